use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::ast::{Ast, Detail, NodeId, NodeKind};

/// A declared variable. Identified by its declaration node; `scope` is the
/// node that owns the declaration (the translation unit for globals, the
/// function for parameters, the enclosing block for locals).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Symbol {
    pub name: String,
    pub scope: NodeId,
    pub decl_node: NodeId,
    pub is_global: bool,
    pub is_param: bool,
    pub is_array: bool,
}

/// Lexical name resolution over the whole parse, independent of deletions:
/// a reference whose declaration is later removed dangles rather than
/// rebinding to an outer name.
#[derive(Debug, Clone, Default)]
pub struct Resolution {
    pub symbols: BTreeMap<NodeId, Symbol>,
    /// VarRef node -> declaration node.
    pub var_refs: BTreeMap<NodeId, NodeId>,
    /// Call node -> FunctionDef node.
    pub calls: BTreeMap<NodeId, NodeId>,
    pub unresolved_vars: BTreeSet<NodeId>,
    pub unresolved_calls: BTreeSet<NodeId>,
    pub refs_by_symbol: BTreeMap<NodeId, Vec<NodeId>>,
    pub calls_by_function: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Resolution {
    pub fn symbol_of(&self, var_ref: NodeId) -> Option<&Symbol> {
        self.var_refs
            .get(&var_ref)
            .and_then(|d| self.symbols.get(d))
    }
}

pub fn resolve(ast: &Ast) -> Resolution {
    let mut res = Resolution::default();
    let root = ast.root();

    // Functions are visible file-wide; a definition wins over prototypes.
    let mut functions: BTreeMap<String, NodeId> = BTreeMap::new();
    for &item in &ast.node(root).children {
        let n = ast.node(item);
        if n.kind != NodeKind::FunctionDef {
            continue;
        }
        let name = n.symbol.clone().unwrap_or_default();
        let has_body = matches!(n.detail, Detail::Function { has_body: true, .. });
        match functions.get(&name) {
            Some(&prev)
                if matches!(
                    ast.node(prev).detail,
                    Detail::Function { has_body: true, .. }
                ) || !has_body => {}
            _ => {
                functions.insert(name, item);
            }
        }
    }

    let mut walker = Walker {
        ast,
        res: &mut res,
        functions: &functions,
        scopes: vec![(root, BTreeMap::new())],
    };
    for &item in &ast.node(root).children {
        walker.item(item);
    }
    res
}

struct Walker<'a> {
    ast: &'a Ast,
    res: &'a mut Resolution,
    functions: &'a BTreeMap<String, NodeId>,
    scopes: Vec<(NodeId, BTreeMap<String, NodeId>)>,
}

impl Walker<'_> {
    fn declare(&mut self, decl: NodeId, is_param: bool) {
        let n = self.ast.node(decl);
        let name = n.symbol.clone().unwrap_or_default();
        let (scope, names) = self.scopes.last_mut().expect("scope stack is never empty");
        let is_global = *scope == self.ast.root();
        let is_array = matches!(
            n.detail,
            Detail::Var {
                array_len: Some(_),
                ..
            }
        );
        names.insert(name.clone(), decl);
        self.res.symbols.insert(
            decl,
            Symbol {
                name,
                scope: *scope,
                decl_node: decl,
                is_global,
                is_param,
                is_array,
            },
        );
        self.res.refs_by_symbol.entry(decl).or_default();
    }

    fn lookup(&self, name: &str) -> Option<NodeId> {
        self.scopes
            .iter()
            .rev()
            .find_map(|(_, names)| names.get(name).copied())
    }

    fn item(&mut self, id: NodeId) {
        let n = self.ast.node(id);
        match n.kind {
            NodeKind::FunctionDef => {
                self.scopes.push((id, BTreeMap::new()));
                for &c in &n.children {
                    match self.ast.kind(c) {
                        NodeKind::ParamDecl => self.declare(c, true),
                        _ => self.stmt(c),
                    }
                }
                self.scopes.pop();
            }
            _ => self.stmt(id),
        }
    }

    fn stmt(&mut self, id: NodeId) {
        let n = self.ast.node(id);
        match n.kind {
            NodeKind::CompoundStmt => {
                self.scopes.push((id, BTreeMap::new()));
                for &c in &n.children {
                    self.stmt(c);
                }
                self.scopes.pop();
            }
            NodeKind::VarDecl => {
                self.declare(id, false);
                for &c in &n.children {
                    self.expr(c);
                }
            }
            _ => {
                for &c in &n.children {
                    if self.ast.kind(c).is_statement() {
                        self.stmt(c);
                    } else {
                        self.expr(c);
                    }
                }
            }
        }
    }

    fn expr(&mut self, id: NodeId) {
        let n = self.ast.node(id);
        match n.kind {
            NodeKind::VarRef => {
                let name = n.symbol.as_deref().unwrap_or_default();
                match self.lookup(name) {
                    Some(decl) => {
                        self.res.var_refs.insert(id, decl);
                        self.res.refs_by_symbol.entry(decl).or_default().push(id);
                    }
                    None => {
                        self.res.unresolved_vars.insert(id);
                    }
                }
            }
            NodeKind::Call => {
                let name = n.symbol.as_deref().unwrap_or_default();
                match self.functions.get(name) {
                    Some(&f) => {
                        self.res.calls.insert(id, f);
                        self.res.calls_by_function.entry(f).or_default().push(id);
                    }
                    None => {
                        self.res.unresolved_calls.insert(id);
                    }
                }
            }
            _ => {}
        }
        for &c in &n.children {
            self.expr(c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;

    #[test]
    fn shadowing_resolves_to_innermost() {
        let ast = parse_source("int x = 1;\nint main(){int x = 2; { int x = 3; x = 4; } return x;}")
            .unwrap();
        let res = resolve(&ast);
        let decls: Vec<_> = ast
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::VarDecl)
            .map(|n| n.id)
            .collect();
        let refs: Vec<_> = ast
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::VarRef)
            .map(|n| n.id)
            .collect();
        assert_eq!(res.var_refs[&refs[0]], decls[2]);
        assert_eq!(res.var_refs[&refs[1]], decls[1]);
        assert!(res.symbols[&decls[0]].is_global);
        assert!(!res.symbols[&decls[1]].is_global);
    }

    #[test]
    fn calls_prefer_definitions_over_prototypes() {
        let ast = parse_source("int f();\nint f(){return 1;}\nint main(){return f() + g();}")
            .unwrap();
        let res = resolve(&ast);
        let def = ast.node(ast.root()).children[1];
        assert_eq!(res.calls.values().copied().collect::<Vec<_>>(), vec![def]);
        assert_eq!(res.unresolved_calls.len(), 1);
    }
}
