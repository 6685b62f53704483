use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::cfg::Cfg;
use super::symbols::Resolution;
use crate::ast::{Ast, Detail, NodeId, NodeKind, VarInit};

/// A definition site: the symbol (by declaration node) and the item that
/// defines it. Parameters and globals are defined at their declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DefSite {
    pub symbol: NodeId,
    pub site: NodeId,
}

/// What an item does to dataflow facts, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    /// A read of `symbol` through the VarRef `var_ref`.
    Use { var_ref: NodeId, symbol: NodeId },
    /// A write. Strong writes kill earlier definitions of the symbol;
    /// weak ones (array elements, callee side effects) only add.
    Def { symbol: NodeId, strong: bool },
    /// A declaration without initializer: earlier values are gone but
    /// nothing new is defined.
    Kill { symbol: NodeId },
}

/// Globals each function may write, directly or through its callees.
pub type ModSets = BTreeMap<NodeId, BTreeSet<NodeId>>;

pub fn mod_sets(ast: &Ast, res: &Resolution) -> ModSets {
    let mut direct: ModSets = BTreeMap::new();
    let mut callees: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for f in retained_function_defs(ast) {
        let mods = direct.entry(f).or_default();
        let outs = callees.entry(f).or_default();
        for n in ast.retained_subtree(f) {
            let node = ast.node(n);
            match node.kind {
                NodeKind::Assign => {
                    let lhs = node.children[0];
                    let target = match ast.kind(lhs) {
                        NodeKind::ArrayIndex => ast.node(lhs).children[0],
                        _ => lhs,
                    };
                    if let Some(sym) = res.symbol_of(target) {
                        if sym.is_global {
                            mods.insert(sym.decl_node);
                        }
                    }
                }
                NodeKind::Call => {
                    if let Some(&callee) = res.calls.get(&n) {
                        outs.insert(callee);
                    }
                }
                _ => {}
            }
        }
    }
    let mut sets = direct;
    loop {
        let mut changed = false;
        for (f, outs) in &callees {
            let mut add = BTreeSet::new();
            for callee in outs {
                if let Some(m) = sets.get(callee) {
                    add.extend(m.iter().copied());
                }
            }
            let entry = sets.entry(*f).or_default();
            let before = entry.len();
            entry.extend(add);
            changed |= entry.len() != before;
        }
        if !changed {
            return sets;
        }
    }
}

pub fn retained_function_defs(ast: &Ast) -> Vec<NodeId> {
    ast.retained_children(ast.root())
        .filter(|&c| {
            matches!(
                ast.node(c).detail,
                Detail::Function { has_body: true, .. }
            )
        })
        .collect()
}

/// Effects of one CFG item. For if/while/for items only the condition is
/// considered; nested statements are items of their own.
pub fn item_effects(ast: &Ast, res: &Resolution, mods: &ModSets, item: NodeId) -> Vec<Effect> {
    let mut out = Vec::new();
    let node = ast.node(item);
    match node.kind {
        NodeKind::VarDecl => {
            for &c in &node.children {
                expr_effects(ast, res, mods, c, &mut out);
            }
            let Detail::Var { array_len, init } = node.detail else {
                unreachable!("declaration without var detail")
            };
            if init != VarInit::None || array_len.is_some() {
                out.push(Effect::Def {
                    symbol: item,
                    strong: true,
                });
            } else {
                out.push(Effect::Kill { symbol: item });
            }
        }
        NodeKind::IfStmt | NodeKind::WhileStmt => {
            expr_effects(ast, res, mods, node.children[0], &mut out);
        }
        NodeKind::ForStmt => {
            if let Detail::For {
                has_init,
                has_cond: true,
                ..
            } = node.detail
            {
                let cond = node.children[usize::from(has_init)];
                expr_effects(ast, res, mods, cond, &mut out);
            }
        }
        NodeKind::ExprStmt | NodeKind::ReturnStmt => {
            for &c in &node.children {
                expr_effects(ast, res, mods, c, &mut out);
            }
        }
        // for-loop init/step expressions
        _ => expr_effects(ast, res, mods, item, &mut out),
    }
    out
}

fn expr_effects(ast: &Ast, res: &Resolution, mods: &ModSets, id: NodeId, out: &mut Vec<Effect>) {
    if ast.is_deleted(id) {
        return;
    }
    let node = ast.node(id);
    match node.kind {
        NodeKind::VarRef => {
            if let Some(&symbol) = res.var_refs.get(&id) {
                out.push(Effect::Use { var_ref: id, symbol });
            }
        }
        NodeKind::Assign => {
            let (lhs, rhs) = (node.children[0], node.children[1]);
            expr_effects(ast, res, mods, rhs, out);
            match ast.kind(lhs) {
                NodeKind::VarRef => {
                    if let Some(&symbol) = res.var_refs.get(&lhs) {
                        out.push(Effect::Def {
                            symbol,
                            strong: true,
                        });
                    }
                }
                _ => {
                    let (base, index) = (ast.node(lhs).children[0], ast.node(lhs).children[1]);
                    expr_effects(ast, res, mods, index, out);
                    if let Some(&symbol) = res.var_refs.get(&base) {
                        out.push(Effect::Def {
                            symbol,
                            strong: false,
                        });
                    }
                }
            }
        }
        NodeKind::Call => {
            for &c in &node.children {
                expr_effects(ast, res, mods, c, out);
            }
            if let Some(callee) = res.calls.get(&id) {
                if ast.is_retained(*callee) {
                    for &g in mods.get(callee).into_iter().flatten() {
                        out.push(Effect::Def {
                            symbol: g,
                            strong: false,
                        });
                    }
                }
            }
        }
        _ => {
            for &c in &node.children {
                expr_effects(ast, res, mods, c, out);
            }
        }
    }
}

/// Applies one effect to a reaching set. `site` is the item performing it.
pub fn transfer(set: &mut BTreeSet<DefSite>, effect: Effect, site: NodeId) {
    match effect {
        Effect::Use { .. } => {}
        Effect::Def { symbol, strong } => {
            if strong {
                set.retain(|d| d.symbol != symbol);
            }
            set.insert(DefSite { symbol, site });
        }
        Effect::Kill { symbol } => set.retain(|d| d.symbol != symbol),
    }
}

/// Definitions live on function entry: parameters and retained globals.
pub fn entry_defs(ast: &Ast, res: &Resolution, function: NodeId) -> BTreeSet<DefSite> {
    let mut set = BTreeSet::new();
    for sym in res.symbols.values() {
        let owned_param = sym.is_param && sym.scope == function;
        if (owned_param || sym.is_global) && ast.is_retained(sym.decl_node) {
            set.insert(DefSite {
                symbol: sym.decl_node,
                site: sym.decl_node,
            });
        }
    }
    set
}

/// Reaching definitions of one function, as the least fixpoint of the
/// forward may-analysis over its CFG.
#[derive(Debug, Clone)]
pub struct Reaching {
    /// Definitions reaching the entry of each item.
    pub at_item: BTreeMap<NodeId, BTreeSet<DefSite>>,
    /// Definitions reaching each use, respecting effect order inside items.
    pub at_use: BTreeMap<NodeId, BTreeSet<DefSite>>,
    /// The item each analysed use belongs to.
    pub use_items: BTreeMap<NodeId, NodeId>,
    /// Every definition site generated inside the function.
    pub local_defs: BTreeSet<DefSite>,
}

pub fn solve(
    ast: &Ast,
    res: &Resolution,
    mods: &ModSets,
    cfg: &Cfg,
) -> Reaching {
    let effects: Vec<Vec<(NodeId, Vec<Effect>)>> = cfg
        .blocks
        .iter()
        .map(|b| {
            b.iter()
                .map(|&item| (item, item_effects(ast, res, mods, item)))
                .collect()
        })
        .collect();

    let n = cfg.blocks.len();
    let mut outs: Vec<BTreeSet<DefSite>> = vec![BTreeSet::new(); n];
    let entry_set = entry_defs(ast, res, cfg.function);
    let preds: Vec<Vec<usize>> = (0..n).map(|b| cfg.predecessors(b).collect()).collect();
    let succs: Vec<Vec<usize>> = (0..n).map(|b| cfg.successors(b).collect()).collect();

    let block_in = |b: usize, outs: &[BTreeSet<DefSite>]| {
        let mut set = if b == cfg.entry {
            entry_set.clone()
        } else {
            BTreeSet::new()
        };
        for &p in &preds[b] {
            set.extend(outs[p].iter().copied());
        }
        set
    };

    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut queued = vec![true; n];
    while let Some(b) = queue.pop_front() {
        queued[b] = false;
        let mut set = block_in(b, &outs);
        for (item, effs) in &effects[b] {
            for &e in effs {
                transfer(&mut set, e, *item);
            }
        }
        if set != outs[b] {
            outs[b] = set;
            for &s in &succs[b] {
                if !queued[s] {
                    queued[s] = true;
                    queue.push_back(s);
                }
            }
        }
    }

    let mut at_item = BTreeMap::new();
    let mut at_use = BTreeMap::new();
    let mut use_items = BTreeMap::new();
    let mut local_defs = BTreeSet::new();
    for (b, block) in effects.iter().enumerate() {
        let mut set = block_in(b, &outs);
        for (item, effs) in block {
            at_item.insert(*item, set.clone());
            for &e in effs {
                match e {
                    Effect::Use { var_ref, symbol } => {
                        let reaching = set.iter().filter(|d| d.symbol == symbol).copied().collect();
                        at_use.insert(var_ref, reaching);
                        use_items.insert(var_ref, *item);
                    }
                    Effect::Def { symbol, .. } => {
                        local_defs.insert(DefSite {
                            symbol,
                            site: *item,
                        });
                    }
                    Effect::Kill { .. } => {}
                }
                transfer(&mut set, e, *item);
            }
        }
    }
    Reaching {
        at_item,
        at_use,
        use_items,
        local_defs,
    }
}
