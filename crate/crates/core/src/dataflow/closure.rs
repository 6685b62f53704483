use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::chains::check_with;
use super::{analyze, DataflowError};
use crate::ast::{Ast, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Function,
    GlobalVar,
    LocalVar,
    StmtSubtree,
}

impl UnitKind {
    pub const ALL: [UnitKind; 4] = [
        UnitKind::Function,
        UnitKind::GlobalVar,
        UnitKind::LocalVar,
        UnitKind::StmtSubtree,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn of_anchor(ast: &Ast, anchor: NodeId) -> UnitKind {
        match ast.kind(anchor) {
            NodeKind::FunctionDef => UnitKind::Function,
            NodeKind::VarDecl if ast.block_level(anchor) == 0 => UnitKind::GlobalVar,
            NodeKind::VarDecl => UnitKind::LocalVar,
            _ => UnitKind::StmtSubtree,
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::Function => "function",
            UnitKind::GlobalVar => "global_var",
            UnitKind::LocalVar => "local_var",
            UnitKind::StmtSubtree => "stmt_subtree",
        })
    }
}

/// A set of nodes removed together. `roots` are the maximal removed
/// subtrees; `nodes` holds every node beneath them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalUnit {
    pub id: u32,
    pub kind: UnitKind,
    pub anchor: NodeId,
    pub roots: Vec<NodeId>,
    pub nodes: BTreeSet<NodeId>,
    pub token_size: u32,
    /// Tree depth of the anchor node.
    pub depth: u32,
    /// Block nesting level of the anchor (0 for top-level items).
    pub level: u32,
}

impl RemovalUnit {
    fn from_roots(ast: &Ast, anchor: NodeId, roots: BTreeSet<NodeId>) -> RemovalUnit {
        let roots: Vec<NodeId> = roots
            .iter()
            .copied()
            .filter(|&r| {
                let mut cur = ast.parent(r);
                while let Some(p) = cur {
                    if roots.contains(&p) {
                        return false;
                    }
                    cur = ast.parent(p);
                }
                true
            })
            .collect();
        let nodes: BTreeSet<NodeId> = roots
            .iter()
            .flat_map(|&r| ast.retained_subtree(r))
            .collect();
        let token_size = roots.iter().map(|&r| ast.retained_tokens_of(r)).sum();
        RemovalUnit {
            id: 0,
            kind: UnitKind::of_anchor(ast, anchor),
            anchor,
            roots,
            nodes,
            token_size,
            depth: ast.depth(anchor),
            level: ast.block_level(anchor),
        }
    }

    /// Removal sets suitable for [`Ast::delete_units`].
    pub fn root_set(&self) -> BTreeSet<NodeId> {
        self.roots.iter().copied().collect()
    }
}

/// The anchor's subtree alone, with no dependency closure.
pub fn raw_unit(ast: &Ast, anchor: NodeId) -> RemovalUnit {
    RemovalUnit::from_roots(ast, anchor, [anchor].into_iter().collect())
}

/// Least superset of `seed` whose removal leaves no retained use without a
/// reaching definition, no reference to a removed declaration and no call
/// to a removed function. Dangling references already present in `ast`
/// are not the removal's responsibility and are ignored.
pub fn du_closure(ast: &Ast, seed: &BTreeSet<NodeId>) -> Result<RemovalUnit, DataflowError> {
    let Some(&anchor) = seed
        .iter()
        .find(|&&n| !ast.parent(n).is_some_and(|p| seed.contains(&p)))
    else {
        return Ok(RemovalUnit::from_roots(ast, ast.root(), BTreeSet::new()));
    };
    let main = ast.main_function();
    let forbidden = |n: NodeId| n == ast.root() || Some(n) == main;
    if seed.iter().any(|&n| forbidden(n)) {
        return Err(DataflowError::ClosureExplosion { anchor });
    }

    let base = check_with(ast, &analyze(ast)).nodes();
    let mut roots: BTreeSet<NodeId> = seed.clone();
    loop {
        let candidate = ast.with_deleted_unchecked(roots.iter().copied());
        let report = check_with(&candidate, &analyze(&candidate));
        let mut grew = false;
        for d in report.dangling {
            if base.contains(&d.node) {
                continue;
            }
            let member = ast
                .enclosing_list_member(d.node)
                .filter(|&m| !forbidden(m))
                .ok_or(DataflowError::ClosureExplosion { anchor })?;
            grew |= roots.insert(member);
        }
        if !grew {
            break;
        }
    }
    Ok(RemovalUnit::from_roots(ast, anchor, roots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;
    use crate::dataflow::check_du_consistency;

    fn stmts(ast: &Ast) -> Vec<NodeId> {
        ast.nodes()
            .iter()
            .filter(|n| n.kind.is_statement() && n.kind != NodeKind::CompoundStmt)
            .map(|n| n.id)
            .collect()
    }

    const CHAIN: &str = "extern int print();\nint main(){int x = 1; int y = x + 1; print(y); return 0;}";

    #[test]
    fn declaration_drags_its_chain() {
        let ast = parse_source(CHAIN).unwrap();
        let s = stmts(&ast);
        let unit = du_closure(&ast, &[s[0]].into_iter().collect()).unwrap();
        assert_eq!(unit.roots, vec![s[0], s[1], s[2]]);
        assert_eq!(unit.kind, UnitKind::LocalVar);
        let out = ast.delete_units([&unit.root_set()]).unwrap();
        assert!(check_du_consistency(&out).is_empty());
    }

    #[test]
    fn pure_use_closes_to_itself() {
        let ast = parse_source(CHAIN).unwrap();
        let s = stmts(&ast);
        let unit = du_closure(&ast, &[s[2]].into_iter().collect()).unwrap();
        assert_eq!(unit.roots, vec![s[2]]);
        assert_eq!(unit.token_size, ast.node(s[2]).token_count);
    }

    #[test]
    fn function_drags_its_call_sites() {
        let ast = parse_source("int helper(int a){return a * 2;}\nint main(){int r = 0; helper(3); return r;}")
            .unwrap();
        let helper = ast.node(ast.root()).children[0];
        let unit = du_closure(&ast, &[helper].into_iter().collect()).unwrap();
        let call_stmt = ast
            .nodes()
            .iter()
            .find(|n| n.kind == NodeKind::ExprStmt)
            .unwrap()
            .id;
        assert_eq!(unit.roots, vec![helper, call_stmt]);
        assert_eq!(unit.kind, UnitKind::Function);
        assert_eq!(unit.depth, 1);
    }

    #[test]
    fn main_is_never_removable() {
        let ast = parse_source(CHAIN).unwrap();
        let main = ast.main_function().unwrap();
        assert!(matches!(
            du_closure(&ast, &[main].into_iter().collect()),
            Err(DataflowError::ClosureExplosion { .. })
        ));
    }

    #[test]
    fn one_of_two_reaching_defs_is_enough() {
        let ast = parse_source("int main(int c){int x; if (c) x = 1; else x = 2; return x;}").unwrap();
        let assigns: Vec<_> = ast
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::ExprStmt)
            .map(|n| n.id)
            .collect();
        let unit = du_closure(&ast, &[assigns[1]].into_iter().collect()).unwrap();
        assert_eq!(unit.roots, vec![assigns[1]]);
    }

    #[test]
    fn closure_is_idempotent() {
        let ast = parse_source(CHAIN).unwrap();
        let s = stmts(&ast);
        let unit = du_closure(&ast, &[s[0]].into_iter().collect()).unwrap();
        let again = du_closure(&ast, &unit.nodes).unwrap();
        assert_eq!(again.nodes, unit.nodes);
    }
}
