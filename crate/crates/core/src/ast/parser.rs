use super::lexer::{keyword_text, tokenize, Keyword, Punct, Token, TokenKind};
use super::{
    Ast, AstNode, BinOp, Detail, Location, NodeId, NodeKind, ParseError, ReturnType, Span, UnOp,
    VarInit,
};

/// Parses a preprocessed source file in the accepted C subset.
pub fn parse_source(text: &str) -> Result<Ast, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let root = parser.translation_unit()?;
    let mut nodes = Vec::new();
    flatten(root, &parser.tokens, &mut nodes);
    Ok(Ast::from_nodes(nodes))
}

/// Tree node before ids are assigned. Token ranges are half-open indices
/// into the token vector, so token counts fall out of the ranges.
struct PNode {
    kind: NodeKind,
    symbol: Option<String>,
    detail: Detail,
    parens: u32,
    children: Vec<PNode>,
    first: usize,
    end: usize,
}

impl PNode {
    fn new(kind: NodeKind, first: usize, end: usize) -> PNode {
        PNode {
            kind,
            symbol: None,
            detail: Detail::None,
            parens: 0,
            children: Vec::new(),
            first,
            end,
        }
    }

    fn with_symbol(mut self, symbol: String) -> PNode {
        self.symbol = Some(symbol);
        self
    }

    fn with_detail(mut self, detail: Detail) -> PNode {
        self.detail = detail;
        self
    }

    fn with_children(mut self, children: Vec<PNode>) -> PNode {
        self.children = children;
        self
    }

    fn mentions_names(&self) -> bool {
        matches!(self.kind, NodeKind::VarRef | NodeKind::Call)
            || self.children.iter().any(PNode::mentions_names)
    }
}

fn flatten(node: PNode, tokens: &[Token], out: &mut Vec<AstNode>) -> NodeId {
    let id = NodeId(out.len() as u32);
    let span = if node.first < node.end {
        Span {
            start: tokens[node.first].start,
            end: tokens[node.end - 1].end,
        }
    } else {
        Span::default()
    };
    out.push(AstNode {
        id,
        kind: node.kind,
        children: Vec::new(),
        symbol: node.symbol,
        detail: node.detail,
        parens: node.parens,
        span,
        token_count: (node.end - node.first) as u32,
    });
    let children = node
        .children
        .into_iter()
        .map(|c| flatten(c, tokens, out))
        .collect();
    out[id.index()].children = children;
    id
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, off: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + off).map(|t| &t.kind)
    }

    fn here(&self) -> Location {
        match self.tokens.get(self.pos) {
            Some(t) => t.start,
            None => self.tokens.last().map(|t| t.end).unwrap_or(Location {
                line: 1,
                column: 1,
            }),
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(k) => k.to_string(),
            None => "end of input".to_string(),
        }
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        if let Some(TokenKind::Unsupported(word)) = self.peek() {
            return Err(ParseError {
                location: self.here(),
                message: format!("`{word}` is outside the supported C subset"),
            });
        }
        Err(ParseError {
            location: self.here(),
            message: format!("expected {expected}, found {}", self.found()),
        })
    }

    fn fail<T>(&self, at: usize, message: String) -> PResult<T> {
        let location = self
            .tokens
            .get(at)
            .map(|t| t.start)
            .unwrap_or_else(|| self.here());
        Err(ParseError { location, message })
    }

    fn is_punct(&self, p: Punct) -> bool {
        self.peek() == Some(&TokenKind::Punct(p))
    }

    fn is_keyword(&self, k: Keyword) -> bool {
        self.peek() == Some(&TokenKind::Keyword(k))
    }

    fn eat_punct(&mut self, p: Punct) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, k: Keyword) -> bool {
        if self.is_keyword(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: Punct) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(&format!("`{}`", p.as_str()))
        }
    }

    fn expect_keyword(&mut self, k: Keyword) -> PResult<()> {
        if self.eat_keyword(k) {
            Ok(())
        } else {
            self.error(&format!("`{}`", keyword_text(k)))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.error("identifier"),
        }
    }

    fn translation_unit(&mut self) -> PResult<PNode> {
        let mut items = Vec::new();
        while self.peek().is_some() {
            items.push(self.item()?);
        }
        Ok(PNode::new(NodeKind::TranslationUnit, 0, self.tokens.len()).with_children(items))
    }

    fn item(&mut self) -> PResult<PNode> {
        let first = self.pos;
        let is_extern = self.eat_keyword(Keyword::Extern);
        let ret = if self.eat_keyword(Keyword::Int) {
            ReturnType::Int
        } else if self.eat_keyword(Keyword::Void) {
            ReturnType::Void
        } else {
            return self.error("`int` or `void`");
        };
        let name_at = self.pos;
        let name = self.ident()?;
        if self.is_punct(Punct::LParen) {
            return self.function_rest(first, name, ret, is_extern);
        }
        if is_extern {
            return self.fail(first, "extern variables are not supported".to_string());
        }
        if ret == ReturnType::Void {
            return self.fail(name_at, format!("variable `{name}` declared void"));
        }
        let decl = self.var_decl_rest(first, name)?;
        if decl.children.iter().any(PNode::mentions_names) {
            return self.fail(
                first,
                "global initializers must be constant expressions".to_string(),
            );
        }
        Ok(decl)
    }

    fn function_rest(
        &mut self,
        first: usize,
        name: String,
        ret: ReturnType,
        is_extern: bool,
    ) -> PResult<PNode> {
        self.expect_punct(Punct::LParen)?;
        let mut params = Vec::new();
        let mut void_params = false;
        if self.is_keyword(Keyword::Void) && self.peek_at(1) == Some(&TokenKind::Punct(Punct::RParen))
        {
            self.pos += 1;
            void_params = true;
        } else if !self.is_punct(Punct::RParen) {
            loop {
                let p_first = self.pos;
                self.expect_keyword(Keyword::Int)?;
                let pname = self.ident()?;
                params.push(PNode::new(NodeKind::ParamDecl, p_first, self.pos).with_symbol(pname));
                if !self.eat_punct(Punct::Comma) {
                    break;
                }
            }
        }
        self.expect_punct(Punct::RParen)?;
        let has_body = if self.is_punct(Punct::LBrace) {
            if is_extern {
                return self.fail(first, format!("extern function `{name}` cannot have a body"));
            }
            params.push(self.compound()?);
            true
        } else {
            self.expect_punct(Punct::Semi)?;
            false
        };
        Ok(PNode::new(NodeKind::FunctionDef, first, self.pos)
            .with_symbol(name)
            .with_detail(Detail::Function {
                ret,
                is_extern,
                void_params,
                has_body,
            })
            .with_children(params))
    }

    fn var_decl_rest(&mut self, first: usize, name: String) -> PResult<PNode> {
        let array_len = if self.eat_punct(Punct::LBracket) {
            let len = match self.peek() {
                Some(TokenKind::Int(v)) if *v > 0 => *v as u64,
                _ => return self.error("positive array length"),
            };
            self.pos += 1;
            self.expect_punct(Punct::RBracket)?;
            Some(len)
        } else {
            None
        };
        let mut children = Vec::new();
        let init = if self.eat_punct(Punct::Assign) {
            if array_len.is_some() {
                self.expect_punct(Punct::LBrace)?;
                loop {
                    children.push(self.expr()?);
                    if !self.eat_punct(Punct::Comma) {
                        break;
                    }
                }
                self.expect_punct(Punct::RBrace)?;
                VarInit::List
            } else {
                children.push(self.expr()?);
                VarInit::Expr
            }
        } else {
            VarInit::None
        };
        self.expect_punct(Punct::Semi)?;
        Ok(PNode::new(NodeKind::VarDecl, first, self.pos)
            .with_symbol(name)
            .with_detail(Detail::Var { array_len, init })
            .with_children(children))
    }

    fn compound(&mut self) -> PResult<PNode> {
        let first = self.pos;
        self.expect_punct(Punct::LBrace)?;
        let mut stmts = Vec::new();
        while !self.is_punct(Punct::RBrace) {
            if self.peek().is_none() {
                return self.error("`}`");
            }
            stmts.push(self.statement(true)?);
        }
        self.pos += 1;
        Ok(PNode::new(NodeKind::CompoundStmt, first, self.pos).with_children(stmts))
    }

    fn statement(&mut self, in_list: bool) -> PResult<PNode> {
        let first = self.pos;
        match self.peek() {
            Some(TokenKind::Punct(Punct::LBrace)) => self.compound(),
            Some(TokenKind::Keyword(Keyword::Int)) => {
                if !in_list {
                    return self.fail(first, "a declaration is not a statement here".to_string());
                }
                self.pos += 1;
                let name = self.ident()?;
                self.var_decl_rest(first, name)
            }
            Some(TokenKind::Keyword(Keyword::If)) => {
                self.pos += 1;
                self.expect_punct(Punct::LParen)?;
                let cond = self.expr()?;
                self.expect_punct(Punct::RParen)?;
                let then = self.statement(false)?;
                let mut children = vec![cond, then];
                let has_else = self.eat_keyword(Keyword::Else);
                if has_else {
                    children.push(self.statement(false)?);
                }
                Ok(PNode::new(NodeKind::IfStmt, first, self.pos)
                    .with_detail(Detail::If { has_else })
                    .with_children(children))
            }
            Some(TokenKind::Keyword(Keyword::While)) => {
                self.pos += 1;
                self.expect_punct(Punct::LParen)?;
                let cond = self.expr()?;
                self.expect_punct(Punct::RParen)?;
                let body = self.statement(false)?;
                Ok(PNode::new(NodeKind::WhileStmt, first, self.pos).with_children(vec![cond, body]))
            }
            Some(TokenKind::Keyword(Keyword::For)) => {
                self.pos += 1;
                self.expect_punct(Punct::LParen)?;
                let mut children = Vec::new();
                let mut parts = [false; 3];
                for (i, delim) in [Punct::Semi, Punct::Semi, Punct::RParen].into_iter().enumerate()
                {
                    if !self.is_punct(delim) {
                        children.push(self.expr()?);
                        parts[i] = true;
                    }
                    self.expect_punct(delim)?;
                }
                children.push(self.statement(false)?);
                Ok(PNode::new(NodeKind::ForStmt, first, self.pos)
                    .with_detail(Detail::For {
                        has_init: parts[0],
                        has_cond: parts[1],
                        has_step: parts[2],
                    })
                    .with_children(children))
            }
            Some(TokenKind::Keyword(Keyword::Return)) => {
                self.pos += 1;
                let mut children = Vec::new();
                if !self.is_punct(Punct::Semi) {
                    children.push(self.expr()?);
                }
                self.expect_punct(Punct::Semi)?;
                Ok(PNode::new(NodeKind::ReturnStmt, first, self.pos)
                    .with_detail(Detail::Return {
                        has_value: !children.is_empty(),
                    })
                    .with_children(children))
            }
            Some(TokenKind::Keyword(Keyword::Else)) => self.error("statement"),
            Some(TokenKind::Keyword(_)) => self.error("statement"),
            Some(TokenKind::Punct(Punct::Semi)) => self.error("statement"),
            None => self.error("statement"),
            Some(_) => {
                let e = self.expr()?;
                self.expect_punct(Punct::Semi)?;
                Ok(PNode::new(NodeKind::ExprStmt, first, self.pos).with_children(vec![e]))
            }
        }
    }

    fn expr(&mut self) -> PResult<PNode> {
        let lhs = self.binary(0)?;
        if !self.is_punct(Punct::Assign) {
            return Ok(lhs);
        }
        if !matches!(lhs.kind, NodeKind::VarRef | NodeKind::ArrayIndex) {
            return self.fail(lhs.first, "left side of `=` is not assignable".to_string());
        }
        self.pos += 1;
        let rhs = self.expr()?;
        let (first, end) = (lhs.first, rhs.end);
        Ok(PNode::new(NodeKind::Assign, first, end).with_children(vec![lhs, rhs]))
    }

    fn binary(&mut self, level: usize) -> PResult<PNode> {
        const LEVELS: &[&[(Punct, BinOp)]] = &[
            &[(Punct::OrOr, BinOp::Or)],
            &[(Punct::AndAnd, BinOp::And)],
            &[(Punct::EqEq, BinOp::Eq), (Punct::NotEq, BinOp::Ne)],
            &[
                (Punct::Lt, BinOp::Lt),
                (Punct::Le, BinOp::Le),
                (Punct::Gt, BinOp::Gt),
                (Punct::Ge, BinOp::Ge),
            ],
            &[(Punct::Plus, BinOp::Add), (Punct::Minus, BinOp::Sub)],
            &[
                (Punct::Star, BinOp::Mul),
                (Punct::Slash, BinOp::Div),
                (Punct::Percent, BinOp::Rem),
            ],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for &(p, op) in LEVELS[level] {
                if self.eat_punct(p) {
                    let rhs = self.binary(level + 1)?;
                    let (first, end) = (lhs.first, rhs.end);
                    lhs = PNode::new(NodeKind::BinaryOp, first, end)
                        .with_detail(Detail::Binary(op))
                        .with_children(vec![lhs, rhs]);
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> PResult<PNode> {
        let first = self.pos;
        let op = if self.eat_punct(Punct::Bang) {
            UnOp::Not
        } else if self.eat_punct(Punct::Minus) {
            UnOp::Neg
        } else {
            return self.primary();
        };
        let operand = self.unary()?;
        let end = operand.end;
        Ok(PNode::new(NodeKind::UnaryOp, first, end)
            .with_detail(Detail::Unary(op))
            .with_children(vec![operand]))
    }

    fn primary(&mut self) -> PResult<PNode> {
        let first = self.pos;
        match self.peek().cloned() {
            Some(TokenKind::Int(v)) => {
                self.pos += 1;
                Ok(PNode::new(NodeKind::IntLiteral, first, self.pos).with_detail(Detail::Int(v)))
            }
            Some(TokenKind::Punct(Punct::LParen)) => {
                self.pos += 1;
                let mut inner = self.expr()?;
                self.expect_punct(Punct::RParen)?;
                inner.parens += 1;
                inner.first = first;
                inner.end = self.pos;
                Ok(inner)
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                if self.eat_punct(Punct::LParen) {
                    let mut args = Vec::new();
                    if !self.is_punct(Punct::RParen) {
                        loop {
                            args.push(self.argument()?);
                            if !self.eat_punct(Punct::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect_punct(Punct::RParen)?;
                    return Ok(PNode::new(NodeKind::Call, first, self.pos)
                        .with_symbol(name)
                        .with_children(args));
                }
                let var = PNode::new(NodeKind::VarRef, first, self.pos).with_symbol(name);
                if self.eat_punct(Punct::LBracket) {
                    let index = self.expr()?;
                    self.expect_punct(Punct::RBracket)?;
                    if self.is_punct(Punct::LBracket) {
                        return self.error("end of expression (only one-dimensional arrays)");
                    }
                    return Ok(PNode::new(NodeKind::ArrayIndex, first, self.pos)
                        .with_children(vec![var, index]));
                }
                Ok(var)
            }
            Some(TokenKind::Str(_)) => self.fail(
                first,
                "string literals are only allowed as call arguments".to_string(),
            ),
            _ => self.error("expression"),
        }
    }

    fn argument(&mut self) -> PResult<PNode> {
        if let Some(TokenKind::Str(raw)) = self.peek().cloned() {
            let first = self.pos;
            self.pos += 1;
            return Ok(PNode::new(NodeKind::StringLiteral, first, self.pos)
                .with_detail(Detail::Str(raw)));
        }
        self.expr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<NodeKind> {
        parse_source(src)
            .unwrap()
            .nodes()
            .iter()
            .map(|n| n.kind)
            .collect()
    }

    #[test]
    fn precedence_and_associativity() {
        let ast = parse_source("int main(){return 1 - 2 - 3 * 4;}").unwrap();
        // (1 - 2) - (3 * 4)
        let ret = ast.nodes().iter().find(|n| n.kind == NodeKind::ReturnStmt).unwrap();
        let top = ast.node(ret.children[0]);
        assert_eq!(top.detail, Detail::Binary(BinOp::Sub));
        assert_eq!(ast.node(top.children[0]).detail, Detail::Binary(BinOp::Sub));
        assert_eq!(ast.node(top.children[1]).detail, Detail::Binary(BinOp::Mul));
    }

    #[test]
    fn assignment_is_right_associative() {
        let k = kinds("int main(){int a; int b; a = b = 2; return a;}");
        assert_eq!(k.iter().filter(|k| **k == NodeKind::Assign).count(), 2);
    }

    #[test]
    fn parens_are_recorded_and_counted() {
        let ast = parse_source("int main(){return (1 + 2) * 3;}").unwrap();
        let add = ast
            .nodes()
            .iter()
            .find(|n| n.detail == Detail::Binary(BinOp::Add))
            .unwrap();
        assert_eq!(add.parens, 1);
        assert_eq!(add.token_count, 5);
    }

    #[test]
    fn for_with_missing_parts() {
        let ast = parse_source("int main(){int i; for (;;) i = 1; return 0;}").unwrap();
        let f = ast.nodes().iter().find(|n| n.kind == NodeKind::ForStmt).unwrap();
        assert_eq!(
            f.detail,
            Detail::For {
                has_init: false,
                has_cond: false,
                has_step: false
            }
        );
        assert_eq!(f.children.len(), 1);
    }

    #[test]
    fn externs_and_strings() {
        let ast = parse_source("extern int printf();\nint main(void){printf(\"%d\\n\", 3); return 0;}")
            .unwrap();
        let f = &ast.nodes()[1];
        assert!(matches!(
            f.detail,
            Detail::Function {
                is_extern: true,
                has_body: false,
                ..
            }
        ));
        assert!(ast.nodes().iter().any(|n| n.kind == NodeKind::StringLiteral));
    }

    #[test]
    fn rejects_out_of_subset_constructs() {
        for src in [
            "int main(){int *p; return 0;}",
            "int main(){char c; return 0;}",
            "typedef int T;",
            "int main(){int a[2][2]; return 0;}",
            "int main(){int x = \"s\"; return 0;}",
            "int g = h;",
            "int main(){if (1) int x = 2; return 0;}",
            "int main(){1 = 2; return 0;}",
            "int main(){int a, b; return 0;}",
            "extern int v;",
            "int main(){return 0;",
            "int main(){;}",
        ] {
            assert!(parse_source(src).is_err(), "accepted: {src}");
        }
    }

    #[test]
    fn error_reports_line_and_column() {
        let err = parse_source("int main(){\n  return 0\n}").unwrap_err();
        assert_eq!(err.location, Location { line: 3, column: 1 });
        assert!(err.message.contains("expected `;`"), "{}", err.message);
    }
}
