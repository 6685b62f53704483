//! Def-use analysis over the retained part of an [`Ast`].
//!
//! Each function gets a CFG and an intraprocedural reaching-definitions
//! fixpoint. Globals are defined at a synthetic entry (their declaration),
//! and a call weakly defines every global its callee may write. On top of
//! that sit DU chains, the dangling-use check, and the DU closure used to
//! turn a proposed removal into one that leaves no retained use behind.

mod cfg;
mod chains;
mod closure;
mod reaching;
mod symbols;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::{Ast, Location, NodeId};

pub use cfg::{build_cfg, Cfg};
pub use chains::{
    check_du_consistency, compute_du_chains, dump_chains_jsonl, ChainRecord, Dangling,
    DanglingReason, DuChain, DuReport,
};
pub use closure::{du_closure, raw_unit, RemovalUnit, UnitKind};
pub use reaching::{entry_defs, item_effects, mod_sets, transfer, DefSite, Effect, ModSets};
pub use symbols::{resolve, Resolution, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataflowError {
    #[error("unresolved symbol `{name}` at {location}")]
    UnresolvedSymbol { name: String, location: Location },
    #[error("closure of the removal anchored at {anchor} reaches the entry function `main`")]
    ClosureExplosion { anchor: NodeId },
}

/// Dataflow facts for one retained function.
#[derive(Debug, Clone)]
pub struct FunctionFlow {
    pub cfg: Cfg,
    pub reaching: reaching::Reaching,
    pub reachable: Vec<bool>,
}

/// Whole-program analysis result for one Ast value.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub resolution: Resolution,
    pub mods: ModSets,
    pub functions: BTreeMap<NodeId, FunctionFlow>,
}

impl Analysis {
    /// Reaching definitions of a use, or `None` if the VarRef is not a
    /// use analysed in any retained function.
    pub fn reaching_use(&self, var_ref: NodeId) -> Option<&BTreeSet<DefSite>> {
        self.functions
            .values()
            .find_map(|f| f.reaching.at_use.get(&var_ref))
    }
}

pub fn analyze(ast: &Ast) -> Analysis {
    let resolution = resolve(ast);
    let mods = mod_sets(ast, &resolution);
    let functions = reaching::retained_function_defs(ast)
        .into_iter()
        .map(|f| {
            let cfg = build_cfg(ast, f);
            let reaching = reaching::solve(ast, &resolution, &mods, &cfg);
            let reachable = cfg.reachable_from_entry();
            (
                f,
                FunctionFlow {
                    cfg,
                    reaching,
                    reachable,
                },
            )
        })
        .collect();
    Analysis {
        resolution,
        mods,
        functions,
    }
}

/// Definitions reaching the entry of every item of `cfg`.
pub fn reaching_definitions(ast: &Ast, cfg: &Cfg) -> BTreeMap<NodeId, BTreeSet<DefSite>> {
    let resolution = resolve(ast);
    let mods = mod_sets(ast, &resolution);
    reaching::solve(ast, &resolution, &mods, cfg).at_item
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{parse_source, NodeKind};

    fn items(ast: &Ast, kind: NodeKind) -> Vec<NodeId> {
        ast.nodes()
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.id)
            .collect()
    }

    fn main_cfg(ast: &Ast) -> Cfg {
        build_cfg(ast, ast.main_function().unwrap())
    }

    #[test]
    fn redefinition_kills() {
        let ast = parse_source("int main(){int x; int y; x = 1; x = 2; y = x;}").unwrap();
        let rd = reaching_definitions(&ast, &main_cfg(&ast));
        let es = items(&ast, NodeKind::ExprStmt);
        let x = items(&ast, NodeKind::VarDecl)[0];
        let at_use: BTreeSet<_> = rd[&es[2]].iter().filter(|d| d.symbol == x).copied().collect();
        assert_eq!(
            at_use,
            [DefSite {
                symbol: x,
                site: es[1]
            }]
            .into_iter()
            .collect()
        );
    }

    #[test]
    fn first_statement_sees_only_parameters() {
        let ast = parse_source("int main(int argc){int x; x = 1;}").unwrap();
        let rd = reaching_definitions(&ast, &main_cfg(&ast));
        let param = items(&ast, NodeKind::ParamDecl)[0];
        let first = items(&ast, NodeKind::VarDecl)[0];
        assert_eq!(
            rd[&first],
            [DefSite {
                symbol: param,
                site: param
            }]
            .into_iter()
            .collect()
        );
    }

    #[test]
    fn branches_join() {
        let ast = parse_source("int main(int c){int x; int y; if (c) x = 1; else x = 2; y = x;}")
            .unwrap();
        let rd = reaching_definitions(&ast, &main_cfg(&ast));
        let es = items(&ast, NodeKind::ExprStmt);
        let x = items(&ast, NodeKind::VarDecl)[0];
        let at_use: BTreeSet<_> = rd[&es[2]].iter().filter(|d| d.symbol == x).map(|d| d.site).collect();
        assert_eq!(at_use, [es[0], es[1]].into_iter().collect());
    }

    #[test]
    fn loop_carried_definition_reaches_header() {
        let ast = parse_source("int main(){int i = 0; while (i < 3) { i = i + 1; } return i;}")
            .unwrap();
        let rd = reaching_definitions(&ast, &main_cfg(&ast));
        let w = items(&ast, NodeKind::WhileStmt)[0];
        let decl = items(&ast, NodeKind::VarDecl)[0];
        let inc = items(&ast, NodeKind::ExprStmt)[0];
        let sites: BTreeSet<_> = rd[&w].iter().map(|d| d.site).collect();
        assert_eq!(sites, [decl, inc].into_iter().collect());
    }

    #[test]
    fn calls_weakly_define_modified_globals() {
        let ast = parse_source(
            "int g = 0;\nvoid set(){g = 5;}\nvoid wrap(){set();}\nint main(){int y; wrap(); y = g; return y;}",
        )
        .unwrap();
        let analysis = analyze(&ast);
        let g = items(&ast, NodeKind::VarDecl)[0];
        let wrap = ast.node(ast.root()).children[2];
        assert!(analysis.mods[&wrap].contains(&g));
        let g_use = items(&ast, NodeKind::VarRef)
            .into_iter()
            .rfind(|&r| ast.node(r).symbol.as_deref() == Some("g"))
            .unwrap();
        let call_stmt = items(&ast, NodeKind::ExprStmt)[2];
        let sites: BTreeSet<_> = analysis.reaching_use(g_use).unwrap().iter().map(|d| d.site).collect();
        assert_eq!(sites, [g, call_stmt].into_iter().collect());
    }
}
