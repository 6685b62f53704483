use std::fmt::Write as _;

use super::{Ast, Detail, NodeId, NodeKind, ReturnType, UnOp, UnparseError, VarInit};

const INDENT: &str = "    ";

/// Prints the retained tree in canonical form: one statement per line,
/// four-space indentation, a blank line before each function definition.
/// Equal retained trees always print to identical text.
pub fn unparse(ast: &Ast) -> Result<String, UnparseError> {
    let mut p = Printer {
        ast,
        out: String::new(),
    };
    let mut first = true;
    for item in ast.retained_children(ast.root()).collect::<Vec<_>>() {
        let is_def = matches!(
            ast.node(item).detail,
            Detail::Function { has_body: true, .. }
        );
        if is_def && !first {
            p.out.push('\n');
        }
        first = false;
        p.item(item)?;
    }
    Ok(p.out)
}

struct Printer<'a> {
    ast: &'a Ast,
    out: String,
}

type R = Result<(), UnparseError>;

impl Printer<'_> {
    fn child(&self, id: NodeId, index: usize) -> Result<NodeId, UnparseError> {
        let child = self.ast.node(id).children[index];
        if self.ast.is_deleted(child) {
            return Err(UnparseError::MissingChild {
                node: id,
                kind: self.ast.kind(id),
                child,
            });
        }
        Ok(child)
    }

    fn pad(&mut self, indent: usize) {
        for _ in 0..indent {
            self.out.push_str(INDENT);
        }
    }

    fn item(&mut self, id: NodeId) -> R {
        let node = self.ast.node(id);
        match (&node.kind, &node.detail) {
            (
                NodeKind::FunctionDef,
                Detail::Function {
                    ret,
                    is_extern,
                    void_params,
                    has_body,
                },
            ) => {
                if *is_extern {
                    self.out.push_str("extern ");
                }
                self.out.push_str(match ret {
                    ReturnType::Int => "int ",
                    ReturnType::Void => "void ",
                });
                self.out.push_str(node.symbol.as_deref().unwrap_or_default());
                self.out.push('(');
                if *void_params {
                    self.out.push_str("void");
                }
                let n_params = node.children.len() - usize::from(*has_body);
                for i in 0..n_params {
                    let param = self.child(id, i)?;
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.out.push_str("int ");
                    self.out
                        .push_str(self.ast.node(param).symbol.as_deref().unwrap_or_default());
                }
                self.out.push(')');
                if *has_body {
                    let body = self.child(id, n_params)?;
                    self.block_tail(body, 0)?;
                    self.out.push('\n');
                } else {
                    self.out.push_str(";\n");
                }
                Ok(())
            }
            _ => self.stmt(id, 0),
        }
    }

    /// ` {`, the retained statements one level deeper, then the closing
    /// brace at `indent` with no trailing newline.
    fn block_tail(&mut self, id: NodeId, indent: usize) -> R {
        self.out.push_str(" {\n");
        for s in self.ast.retained_children(id).collect::<Vec<_>>() {
            self.stmt(s, indent + 1)?;
        }
        self.pad(indent);
        self.out.push('}');
        Ok(())
    }

    /// Body of an if/while/for: a block on the same line, or a single
    /// statement on the next line one level deeper. Always ends the line.
    fn body(&mut self, id: NodeId, indent: usize) -> R {
        if self.ast.kind(id) == NodeKind::CompoundStmt {
            self.block_tail(id, indent)?;
            self.out.push('\n');
            Ok(())
        } else {
            self.out.push('\n');
            self.stmt(id, indent + 1)
        }
    }

    fn stmt(&mut self, id: NodeId, indent: usize) -> R {
        let node = self.ast.node(id);
        match node.kind {
            NodeKind::CompoundStmt => {
                self.pad(indent);
                self.out.push('{');
                self.out.push('\n');
                for s in self.ast.retained_children(id).collect::<Vec<_>>() {
                    self.stmt(s, indent + 1)?;
                }
                self.pad(indent);
                self.out.push_str("}\n");
                Ok(())
            }
            NodeKind::VarDecl => {
                self.pad(indent);
                let (array_len, init) = match node.detail {
                    Detail::Var { array_len, init } => (array_len, init),
                    _ => (None, VarInit::None),
                };
                self.out.push_str("int ");
                self.out.push_str(node.symbol.as_deref().unwrap_or_default());
                if let Some(len) = array_len {
                    let _ = write!(self.out, "[{len}]");
                }
                match init {
                    VarInit::None => {}
                    VarInit::Expr => {
                        self.out.push_str(" = ");
                        let e = self.child(id, 0)?;
                        self.expr(e)?;
                    }
                    VarInit::List => {
                        self.out.push_str(" = {");
                        for i in 0..node.children.len() {
                            let e = self.child(id, i)?;
                            if i > 0 {
                                self.out.push_str(", ");
                            }
                            self.expr(e)?;
                        }
                        self.out.push('}');
                    }
                }
                self.out.push_str(";\n");
                Ok(())
            }
            NodeKind::ExprStmt => {
                self.pad(indent);
                let e = self.child(id, 0)?;
                self.expr(e)?;
                self.out.push_str(";\n");
                Ok(())
            }
            NodeKind::ReturnStmt => {
                self.pad(indent);
                self.out.push_str("return");
                if !node.children.is_empty() {
                    self.out.push(' ');
                    let e = self.child(id, 0)?;
                    self.expr(e)?;
                }
                self.out.push_str(";\n");
                Ok(())
            }
            NodeKind::IfStmt => {
                self.pad(indent);
                self.if_stmt(id, indent)
            }
            NodeKind::WhileStmt => {
                self.pad(indent);
                self.out.push_str("while (");
                let cond = self.child(id, 0)?;
                self.expr(cond)?;
                self.out.push(')');
                let body = self.child(id, 1)?;
                self.body(body, indent)
            }
            NodeKind::ForStmt => {
                self.pad(indent);
                let Detail::For {
                    has_init,
                    has_cond,
                    has_step,
                } = node.detail
                else {
                    unreachable!("for statement without for detail")
                };
                self.out.push_str("for (");
                let mut next = 0;
                let parts = [has_init, has_cond, has_step];
                for (i, present) in parts.into_iter().enumerate() {
                    if i > 0 {
                        self.out.push(';');
                        if present {
                            self.out.push(' ');
                        }
                    }
                    if present {
                        let e = self.child(id, next)?;
                        self.expr(e)?;
                        next += 1;
                    }
                }
                self.out.push(')');
                let body = self.child(id, next)?;
                self.body(body, indent)
            }
            other => unreachable!("{other:?} in statement position"),
        }
    }

    /// Prints an if statement whose indentation has already been written.
    fn if_stmt(&mut self, id: NodeId, indent: usize) -> R {
        self.out.push_str("if (");
        let cond = self.child(id, 0)?;
        self.expr(cond)?;
        self.out.push(')');
        let then = self.child(id, 1)?;
        let else_branch = self
            .ast
            .node(id)
            .children
            .get(2)
            .copied()
            .filter(|&e| self.ast.is_retained(e));
        if else_branch.is_some() && self.ends_with_open_if(then) {
            return Err(UnparseError::DanglingElse(id));
        }
        let then_block = self.ast.kind(then) == NodeKind::CompoundStmt;
        if then_block {
            self.block_tail(then, indent)?;
        } else {
            self.out.push('\n');
            self.stmt(then, indent + 1)?;
        }
        match else_branch {
            None => {
                if then_block {
                    self.out.push('\n');
                }
                Ok(())
            }
            Some(e) => {
                if then_block {
                    self.out.push_str(" else");
                } else {
                    self.pad(indent);
                    self.out.push_str("else");
                }
                if self.ast.kind(e) == NodeKind::IfStmt {
                    self.out.push(' ');
                    self.if_stmt(e, indent)
                } else {
                    self.body(e, indent)
                }
            }
        }
    }

    /// Whether printing `id` braceless would leave an `if` without `else`
    /// as its last open construct (which would capture a following else).
    fn ends_with_open_if(&self, id: NodeId) -> bool {
        let node = self.ast.node(id);
        match node.kind {
            NodeKind::IfStmt => match node.children.get(2) {
                Some(&e) if self.ast.is_retained(e) => self.ends_with_open_if(e),
                _ => true,
            },
            NodeKind::WhileStmt | NodeKind::ForStmt => {
                self.ends_with_open_if(*node.children.last().expect("loop has a body"))
            }
            _ => false,
        }
    }

    fn expr(&mut self, id: NodeId) -> R {
        let node = self.ast.node(id);
        for _ in 0..node.parens {
            self.out.push('(');
        }
        match (&node.kind, &node.detail) {
            (NodeKind::IntLiteral, Detail::Int(v)) => {
                let _ = write!(self.out, "{v}");
            }
            (NodeKind::StringLiteral, Detail::Str(raw)) => self.out.push_str(raw),
            (NodeKind::VarRef, _) => self.out.push_str(node.symbol.as_deref().unwrap_or_default()),
            (NodeKind::ArrayIndex, _) => {
                let base = self.child(id, 0)?;
                self.expr(base)?;
                self.out.push('[');
                let index = self.child(id, 1)?;
                self.expr(index)?;
                self.out.push(']');
            }
            (NodeKind::Call, _) => {
                self.out.push_str(node.symbol.as_deref().unwrap_or_default());
                self.out.push('(');
                for i in 0..node.children.len() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    let a = self.child(id, i)?;
                    self.expr(a)?;
                }
                self.out.push(')');
            }
            (NodeKind::Assign, _) => {
                let lhs = self.child(id, 0)?;
                let rhs = self.child(id, 1)?;
                self.expr(lhs)?;
                self.out.push_str(" = ");
                self.expr(rhs)?;
            }
            (NodeKind::BinaryOp, Detail::Binary(op)) => {
                let lhs = self.child(id, 0)?;
                let rhs = self.child(id, 1)?;
                self.expr(lhs)?;
                let _ = write!(self.out, " {} ", op.as_str());
                self.expr(rhs)?;
            }
            (NodeKind::UnaryOp, Detail::Unary(op)) => {
                self.out.push(match op {
                    UnOp::Neg => '-',
                    UnOp::Not => '!',
                });
                let operand = self.child(id, 0)?;
                self.expr(operand)?;
            }
            (kind, _) => unreachable!("{kind:?} in expression position"),
        }
        for _ in 0..node.parens {
            self.out.push(')');
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_source;
    use super::*;

    fn canon(src: &str) -> String {
        unparse(&parse_source(src).unwrap()).unwrap()
    }

    #[test]
    fn minimal_round_trip() {
        let text = canon("int main(){return 0;}");
        assert_eq!(text, "int main() {\n    return 0;\n}\n");
        let a = parse_source("int main(){return 0;}").unwrap();
        assert_eq!(parse_source(&text).unwrap().shape(), a.shape());
    }

    #[test]
    fn canonical_layout() {
        let src = "extern int printf();int g=2;int a[3]={1,2,3};\
                   int f(int x,int y){if(x<y)return -x;else if(x==y){return 0;}else return (y);}\
                   int main(void){int i;for(i=0;i<3;i=i+1){a[i]=f(i,g);}while(!g)g=1;for(;;)return 1;}";
        let expected = "\
extern int printf();
int g = 2;
int a[3] = {1, 2, 3};

int f(int x, int y) {
    if (x < y)
        return -x;
    else if (x == y) {
        return 0;
    } else
        return (y);
}

int main(void) {
    int i;
    for (i = 0; i < 3; i = i + 1) {
        a[i] = f(i, g);
    }
    while (!g)
        g = 1;
    for (;;)
        return 1;
}
";
        assert_eq!(canon(src), expected);
        assert_eq!(canon(expected), expected);
    }

    #[test]
    fn partial_for_headers() {
        for src in [
            "int main(){int i; for (i = 0; i < 2;) i = i + 1; return 0;}",
            "int main(){int i; for (; i < 2; i = i + 1) {} return 0;}",
            "int main(){int i; for (i = 0;;) {} return 0;}",
        ] {
            let text = canon(src);
            assert_eq!(canon(&text), text);
            assert_eq!(
                parse_source(&text).unwrap().shape(),
                parse_source(src).unwrap().shape()
            );
        }
    }

    #[test]
    fn dangling_ref_is_not_an_unparse_error() {
        let ast = parse_source("int x = 1;\nint main(){return x;}").unwrap();
        let decl = ast.node(ast.root()).children[0];
        let out = ast.with_deleted_unchecked([decl]);
        assert_eq!(unparse(&out).unwrap(), "int main() {\n    return x;\n}\n");
    }

    #[test]
    fn missing_condition_is_an_unparse_error() {
        let ast = parse_source("int main(){int c = 0; if (c) c = 1; return c;}").unwrap();
        let if_stmt = ast
            .nodes()
            .iter()
            .find(|n| n.kind == NodeKind::IfStmt)
            .unwrap();
        let out = ast.with_deleted_unchecked([if_stmt.children[0]]);
        assert!(matches!(
            unparse(&out),
            Err(UnparseError::MissingChild {
                kind: NodeKind::IfStmt,
                ..
            })
        ));
    }

    #[test]
    fn refuses_to_rebind_else() {
        let ast =
            parse_source("int main(){int a = 1; if (a) if (a) a = 2; else a = 3; else a = 4; return a;}")
                .unwrap();
        let inner = ast
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::IfStmt)
            .nth(1)
            .unwrap();
        let out = ast.with_deleted_unchecked([inner.children[2]]);
        assert!(matches!(unparse(&out), Err(UnparseError::DanglingElse(_))));
    }
}
