use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::reaching::{entry_defs, DefSite};
use super::symbols::Symbol;
use super::{analyze, Analysis, DataflowError};
use crate::ast::{Ast, Location, NodeId, NodeKind};

/// One definition and the uses it reaches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuChain {
    pub symbol: Symbol,
    /// The defining item (declaration, statement, or for init/step).
    pub def: NodeId,
    /// (item, VarRef) pairs reached by this definition.
    pub uses: BTreeSet<(NodeId, NodeId)>,
}

/// Line format of the DU-chain debug dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub symbol: String,
    pub scope: NodeId,
    pub def_node: NodeId,
    pub uses: Vec<NodeId>,
}

impl From<&DuChain> for ChainRecord {
    fn from(c: &DuChain) -> Self {
        ChainRecord {
            symbol: c.symbol.name.clone(),
            scope: c.symbol.scope,
            def_node: c.def,
            uses: c.uses.iter().map(|&(_, r)| r).collect(),
        }
    }
}

pub fn dump_chains_jsonl(chains: &[DuChain]) -> String {
    let mut out = String::new();
    for c in chains {
        out.push_str(&serde_json::to_string(&ChainRecord::from(c)).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// DU chains of every retained definition, including ones reaching nothing.
pub fn compute_du_chains(ast: &Ast) -> Result<Vec<DuChain>, DataflowError> {
    let analysis = analyze(ast);
    let res = &analysis.resolution;
    for n in ast.nodes() {
        if n.kind != NodeKind::VarRef || ast.is_deleted(n.id) {
            continue;
        }
        let resolved = res.var_refs.get(&n.id).is_some_and(|d| ast.is_retained(*d));
        if !resolved {
            return Err(DataflowError::UnresolvedSymbol {
                name: n.symbol.clone().unwrap_or_default(),
                location: n.span.start,
            });
        }
    }

    let mut chains: BTreeMap<DefSite, BTreeSet<(NodeId, NodeId)>> = BTreeMap::new();
    for (&f, flow) in &analysis.functions {
        for d in entry_defs(ast, res, f) {
            chains.entry(d).or_default();
        }
        for &d in &flow.reaching.local_defs {
            chains.entry(d).or_default();
        }
        for (&var_ref, reaching) in &flow.reaching.at_use {
            let item = flow.reaching.use_items[&var_ref];
            for d in reaching {
                chains.entry(*d).or_default().insert((item, var_ref));
            }
        }
    }
    // globals of a program without function bodies
    for sym in res.symbols.values() {
        if sym.is_global && ast.is_retained(sym.decl_node) {
            chains
                .entry(DefSite {
                    symbol: sym.decl_node,
                    site: sym.decl_node,
                })
                .or_default();
        }
    }
    Ok(chains
        .into_iter()
        .map(|(d, uses)| DuChain {
            symbol: res.symbols[&d.symbol].clone(),
            def: d.site,
            uses,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DanglingReason {
    /// A read with no retained definition reaching it.
    NoReachingDef,
    /// A reference to a variable whose declaration was removed.
    DeletedDeclaration,
    /// A reference to a name never declared.
    Undeclared,
    /// A call to a function whose definition was removed.
    DeletedFunction,
    /// A call to a name never declared as a function.
    UndeclaredFunction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dangling {
    /// The offending VarRef or Call.
    pub node: NodeId,
    pub name: String,
    pub location: Location,
    pub reason: DanglingReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuReport {
    pub dangling: Vec<Dangling>,
}

impl DuReport {
    pub fn is_empty(&self) -> bool {
        self.dangling.is_empty()
    }

    pub fn nodes(&self) -> BTreeSet<NodeId> {
        self.dangling.iter().map(|d| d.node).collect()
    }
}

/// Lists every retained reference that lost what it depends on. Uses in
/// code unreachable from the function entry are not reported.
pub fn check_du_consistency(ast: &Ast) -> DuReport {
    check_with(ast, &analyze(ast))
}

pub(crate) fn check_with(ast: &Ast, analysis: &Analysis) -> DuReport {
    let res = &analysis.resolution;
    let mut dangling = Vec::new();
    let mut push = |n: &crate::ast::AstNode, reason| {
        dangling.push(Dangling {
            node: n.id,
            name: n.symbol.clone().unwrap_or_default(),
            location: n.span.start,
            reason,
        })
    };
    for n in ast.nodes() {
        if ast.is_deleted(n.id) {
            continue;
        }
        match n.kind {
            NodeKind::VarRef => match res.var_refs.get(&n.id) {
                None => push(n, DanglingReason::Undeclared),
                Some(&decl) if ast.is_deleted(decl) => push(n, DanglingReason::DeletedDeclaration),
                Some(&decl) => {
                    if res.symbols[&decl].is_param {
                        continue;
                    }
                    for flow in analysis.functions.values() {
                        let Some(reaching) = flow.reaching.at_use.get(&n.id) else {
                            continue;
                        };
                        let item = flow.reaching.use_items[&n.id];
                        let live = flow
                            .cfg
                            .block_of(item)
                            .is_some_and(|b| flow.reachable[b]);
                        if live && reaching.is_empty() {
                            push(n, DanglingReason::NoReachingDef);
                        }
                        break;
                    }
                }
            },
            NodeKind::Call => match res.calls.get(&n.id) {
                None => push(n, DanglingReason::UndeclaredFunction),
                Some(&f) if ast.is_deleted(f) => push(n, DanglingReason::DeletedFunction),
                Some(_) => {}
            },
            _ => {}
        }
    }
    DuReport { dangling }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;

    fn of_kind(ast: &Ast, kind: NodeKind) -> Vec<NodeId> {
        ast.nodes()
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.id)
            .collect()
    }

    #[test]
    fn chains_of_straight_line_program() {
        let ast = parse_source("int main(){int x=1; int y=x+1; return y;}").unwrap();
        let chains = compute_du_chains(&ast).unwrap();
        let decls = of_kind(&ast, NodeKind::VarDecl);
        let refs = of_kind(&ast, NodeKind::VarRef);
        let ret = of_kind(&ast, NodeKind::ReturnStmt)[0];
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].def, decls[0]);
        assert_eq!(chains[0].uses, [(decls[1], refs[0])].into_iter().collect());
        assert_eq!(chains[1].def, decls[1]);
        assert_eq!(chains[1].uses, [(ret, refs[1])].into_iter().collect());
    }

    #[test]
    fn unused_definition_has_empty_chain() {
        let ast = parse_source("int main(){int x=1; return 0;}").unwrap();
        let chains = compute_du_chains(&ast).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].symbol.name, "x");
        assert!(chains[0].uses.is_empty());
    }

    #[test]
    fn undeclared_variable_is_an_error() {
        let ast = parse_source("int main(){return z;}").unwrap();
        let err = compute_du_chains(&ast).unwrap_err();
        assert!(matches!(err, DataflowError::UnresolvedSymbol { ref name, .. } if name == "z"));
    }

    #[test]
    fn global_chain_spans_functions() {
        let ast = parse_source("int g = 3;\nint f(){return g;}\nint main(){return g + f();}").unwrap();
        let chains = compute_du_chains(&ast).unwrap();
        let g = chains.iter().find(|c| c.symbol.name == "g").unwrap();
        assert_eq!(g.uses.len(), 2);
        let dump = dump_chains_jsonl(&chains);
        let rec: ChainRecord = serde_json::from_str(dump.lines().next().unwrap()).unwrap();
        assert_eq!(rec.symbol, "g");
        assert_eq!(rec.scope, NodeId(0));
    }

    #[test]
    fn consistency_of_intact_program() {
        let ast =
            parse_source("int g;\nint f(int a){int b; b = a + g; return b;}\nint main(){return f(1);}")
                .unwrap();
        assert!(check_du_consistency(&ast).is_empty());
    }

    #[test]
    fn deleted_declaration_is_reported() {
        let ast = parse_source("int main(){int x=1; return x;}").unwrap();
        let decl = of_kind(&ast, NodeKind::VarDecl)[0];
        let out = ast.delete_units([&[decl].into_iter().collect()]).unwrap();
        let report = check_du_consistency(&out);
        assert_eq!(report.dangling.len(), 1);
        assert_eq!(report.dangling[0].name, "x");
        assert_eq!(report.dangling[0].reason, DanglingReason::DeletedDeclaration);
    }

    #[test]
    fn deleted_sole_definition_is_reported() {
        let ast = parse_source("int main(){int x; x = 1; return x;}").unwrap();
        let def = of_kind(&ast, NodeKind::ExprStmt)[0];
        let out = ast.delete_units([&[def].into_iter().collect()]).unwrap();
        let report = check_du_consistency(&out);
        assert_eq!(report.dangling.len(), 1);
        assert_eq!(report.dangling[0].reason, DanglingReason::NoReachingDef);
    }

    #[test]
    fn removing_unused_function_is_consistent() {
        let ast = parse_source("int unused(int a){return a;}\nint main(){return 0;}").unwrap();
        let f = ast.node(ast.root()).children[0];
        let out = ast.delete_units([&[f].into_iter().collect()]).unwrap();
        assert!(check_du_consistency(&out).is_empty());
    }

    #[test]
    fn removing_called_function_is_reported() {
        let ast = parse_source("int h(){return 1;}\nint main(){return h();}").unwrap();
        let f = ast.node(ast.root()).children[0];
        let out = ast.delete_units([&[f].into_iter().collect()]).unwrap();
        let report = check_du_consistency(&out);
        assert_eq!(report.dangling[0].reason, DanglingReason::DeletedFunction);
    }
}
