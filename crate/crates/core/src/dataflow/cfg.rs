use std::collections::BTreeSet;

use serde::Serialize;

use crate::ast::{Ast, Detail, NodeId, NodeKind};

/// Per-function control-flow graph over "items": simple statements, plus
/// the condition of each if/while/for (represented by the statement's own
/// id) and the init/step expressions of a for loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cfg {
    pub function: NodeId,
    pub blocks: Vec<Vec<NodeId>>,
    pub edges: BTreeSet<(usize, usize)>,
    pub entry: usize,
    pub exit: usize,
    /// Blocks not on any entry-to-exit path.
    pub unreachable: Vec<bool>,
}

impl Cfg {
    pub fn successors(&self, block: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((block, 0)..(block + 1, 0))
            .map(|&(_, to)| to)
    }

    pub fn predecessors(&self, block: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |&&(_, to)| to == block)
            .map(|&(from, _)| from)
    }

    pub fn block_of(&self, item: NodeId) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&item))
    }

    /// Blocks reachable from the entry block.
    pub fn reachable_from_entry(&self) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![self.entry];
        while let Some(b) = stack.pop() {
            if std::mem::replace(&mut seen[b], true) {
                continue;
            }
            stack.extend(self.successors(b));
        }
        seen
    }
}

/// Builds the CFG of a retained function definition.
///
/// # Panics
///
/// Panics if `function` is not a FunctionDef with a body.
pub fn build_cfg(ast: &Ast, function: NodeId) -> Cfg {
    let node = ast.node(function);
    assert_eq!(node.kind, NodeKind::FunctionDef, "build_cfg needs a function");
    let body = *node
        .children
        .last()
        .filter(|&&b| ast.kind(b) == NodeKind::CompoundStmt)
        .expect("function has a body");

    let mut b = Builder {
        ast,
        blocks: vec![Vec::new(), Vec::new()],
        edges: BTreeSet::new(),
    };
    let (entry, exit) = (0, 1);
    if let Some(end) = b.stmt(body, entry) {
        b.edge(end, exit);
    }
    b.finish(function, entry, exit)
}

struct Builder<'a> {
    ast: &'a Ast,
    blocks: Vec<Vec<NodeId>>,
    edges: BTreeSet<(usize, usize)>,
}

const EXIT: usize = 1;

impl Builder<'_> {
    fn new_block(&mut self) -> usize {
        self.blocks.push(Vec::new());
        self.blocks.len() - 1
    }

    fn edge(&mut self, from: usize, to: usize) {
        self.edges.insert((from, to));
    }

    /// Appends statement `id` starting in block `cur`. Returns the block
    /// control falls out of, or `None` after a return.
    fn stmt(&mut self, id: NodeId, cur: usize) -> Option<usize> {
        let ast = self.ast;
        if ast.is_deleted(id) {
            return Some(cur);
        }
        let node = ast.node(id);
        match node.kind {
            NodeKind::CompoundStmt => {
                let mut cur = cur;
                for c in ast.retained_children(id).collect::<Vec<_>>() {
                    cur = match self.stmt(c, cur) {
                        Some(next) => next,
                        // code after a return starts an unreachable block
                        None => self.new_block(),
                    };
                }
                Some(cur)
            }
            NodeKind::IfStmt => {
                self.blocks[cur].push(id);
                let then_b = self.new_block();
                self.edge(cur, then_b);
                let then_end = self.stmt(node.children[1], then_b);
                let else_end = match node.children.get(2) {
                    Some(&e) if ast.is_retained(e) => {
                        let else_b = self.new_block();
                        self.edge(cur, else_b);
                        self.stmt(e, else_b)
                    }
                    _ => Some(cur),
                };
                let join = self.new_block();
                for end in [then_end, else_end].into_iter().flatten() {
                    self.edge(end, join);
                }
                Some(join)
            }
            NodeKind::WhileStmt => {
                let header = self.new_block();
                self.edge(cur, header);
                self.blocks[header].push(id);
                let body_b = self.new_block();
                self.edge(header, body_b);
                if let Some(end) = self.stmt(node.children[1], body_b) {
                    self.edge(end, header);
                }
                let after = self.new_block();
                self.edge(header, after);
                Some(after)
            }
            NodeKind::ForStmt => {
                let Detail::For {
                    has_init,
                    has_cond,
                    has_step,
                } = node.detail
                else {
                    unreachable!("for statement without for detail")
                };
                let mut parts = node.children.iter().copied();
                let init = has_init.then(|| parts.next()).flatten();
                let _cond = has_cond.then(|| parts.next()).flatten();
                let step = has_step.then(|| parts.next()).flatten();
                let body = parts.next().expect("for has a body");
                if let Some(init) = init {
                    self.blocks[cur].push(init);
                }
                let header = self.new_block();
                self.edge(cur, header);
                self.blocks[header].push(id);
                let body_b = self.new_block();
                self.edge(header, body_b);
                let body_end = self.stmt(body, body_b);
                let step_b = self.new_block();
                if let Some(end) = body_end {
                    self.edge(end, step_b);
                }
                if let Some(step) = step {
                    self.blocks[step_b].push(step);
                }
                self.edge(step_b, header);
                let after = self.new_block();
                if has_cond {
                    self.edge(header, after);
                }
                Some(after)
            }
            NodeKind::ReturnStmt => {
                self.blocks[cur].push(id);
                self.edge(cur, EXIT);
                None
            }
            _ => {
                self.blocks[cur].push(id);
                Some(cur)
            }
        }
    }

    /// Merges straight-line chains, drops empty unreachable leftovers and
    /// renumbers blocks in creation order.
    fn finish(mut self, function: NodeId, entry: usize, mut exit: usize) -> Cfg {
        let n = self.blocks.len();
        let mut alive = vec![true; n];
        loop {
            let mut merged = false;
            for u in 0..n {
                if !alive[u] {
                    continue;
                }
                let succs: Vec<usize> = self.succs(u);
                if succs.len() != 1 {
                    continue;
                }
                let v = succs[0];
                if v == u || v == entry || self.preds(v).len() != 1 {
                    continue;
                }
                let moved = std::mem::take(&mut self.blocks[v]);
                self.blocks[u].extend(moved);
                let v_succs = self.succs(v);
                self.edges.remove(&(u, v));
                for s in v_succs {
                    self.edges.remove(&(v, s));
                    self.edges.insert((u, if s == v { u } else { s }));
                }
                alive[v] = false;
                if v == exit {
                    exit = u;
                }
                merged = true;
            }
            if !merged {
                break;
            }
        }
        // Empty blocks with no predecessors (e.g. the join after an if
        // whose branches both return) carry nothing.
        #[allow(clippy::needless_range_loop)]
        for b in 0..n {
            if alive[b]
                && b != entry
                && b != exit
                && self.blocks[b].is_empty()
                && self.preds(b).is_empty()
            {
                alive[b] = false;
                for s in self.succs(b) {
                    self.edges.remove(&(b, s));
                }
            }
        }
        let mut renumber = vec![usize::MAX; n];
        let mut blocks = Vec::new();
        for b in 0..n {
            if alive[b] {
                renumber[b] = blocks.len();
                blocks.push(std::mem::take(&mut self.blocks[b]));
            }
        }
        let edges: BTreeSet<_> = self
            .edges
            .iter()
            .map(|&(a, b)| (renumber[a], renumber[b]))
            .collect();
        let mut cfg = Cfg {
            function,
            blocks,
            edges,
            entry: renumber[entry],
            exit: renumber[exit],
            unreachable: Vec::new(),
        };
        let forward = cfg.reachable_from_entry();
        let mut backward = vec![false; cfg.blocks.len()];
        let mut stack = vec![cfg.exit];
        while let Some(b) = stack.pop() {
            if std::mem::replace(&mut backward[b], true) {
                continue;
            }
            stack.extend(cfg.predecessors(b));
        }
        cfg.unreachable = forward
            .iter()
            .zip(&backward)
            .map(|(f, b)| !(*f && *b))
            .collect();
        cfg
    }

    fn succs(&self, b: usize) -> Vec<usize> {
        self.edges
            .range((b, 0)..(b + 1, 0))
            .map(|&(_, to)| to)
            .collect()
    }

    fn preds(&self, b: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, to)| to == b)
            .map(|&(from, _)| from)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;

    fn cfg_of(src: &str) -> (Ast, Cfg) {
        let ast = parse_source(src).unwrap();
        let main = ast.main_function().unwrap();
        let cfg = build_cfg(&ast, main);
        (ast, cfg)
    }

    fn stmts(ast: &Ast, kind: NodeKind) -> Vec<NodeId> {
        ast.nodes()
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.id)
            .collect()
    }

    #[test]
    fn straight_line_is_one_block() {
        let (_, cfg) = cfg_of("int main(){int a = 1; int b = a; int c = b;}");
        assert_eq!(cfg.blocks.len(), 1);
        assert!(cfg.edges.is_empty());
        assert_eq!(cfg.entry, cfg.exit);
        assert_eq!(cfg.blocks[0].len(), 3);
    }

    #[test]
    fn if_else_diamond() {
        let (ast, cfg) = cfg_of("int main(){int c = 1; int x; if (c) { x = 1; } else { x = 2; } c = x;}");
        assert_eq!(cfg.blocks.len(), 4);
        let if_id = stmts(&ast, NodeKind::IfStmt)[0];
        let es = stmts(&ast, NodeKind::ExprStmt);
        let cond = cfg.block_of(if_id).unwrap();
        let a = cfg.block_of(es[0]).unwrap();
        let b = cfg.block_of(es[1]).unwrap();
        let c = cfg.block_of(es[2]).unwrap();
        let expected: BTreeSet<_> = [(cond, a), (cond, b), (a, c), (b, c)].into_iter().collect();
        assert_eq!(cfg.edges, expected);
        assert_eq!(cfg.entry, cond);
        assert_eq!(cfg.exit, c);
    }

    #[test]
    fn while_has_back_edge() {
        let (ast, cfg) = cfg_of("int main(){int c = 3; while (c) { c = c - 1; } c = 0;}");
        let w = cfg.block_of(stmts(&ast, NodeKind::WhileStmt)[0]).unwrap();
        let es = stmts(&ast, NodeKind::ExprStmt);
        let body = cfg.block_of(es[0]).unwrap();
        let after = cfg.block_of(es[1]).unwrap();
        assert!(cfg.edges.contains(&(body, w)));
        assert!(cfg.edges.contains(&(w, after)));
        assert_eq!(cfg.predecessors(cfg.entry).count(), 0);
        assert_eq!(cfg.successors(cfg.exit).count(), 0);
    }

    #[test]
    fn code_after_return_is_flagged() {
        let (ast, cfg) = cfg_of("int main(){int x = 1; return x; x = 2;}");
        let dead = stmts(&ast, NodeKind::ExprStmt)[0];
        let b = cfg.block_of(dead).unwrap();
        assert!(cfg.unreachable[b]);
        assert!(!cfg.unreachable[cfg.entry]);
    }

    #[test]
    fn every_statement_in_exactly_one_block() {
        let (ast, cfg) = cfg_of(
            "int main(){int i; int s = 0; for (i = 0; i < 4; i = i + 1) { if (i % 2) s = s + i; else { s = s - 1; } } while (s > 10) s = s - 10; return s;}",
        );
        let items: Vec<NodeId> = cfg.blocks.iter().flatten().copied().collect();
        let unique: BTreeSet<_> = items.iter().copied().collect();
        assert_eq!(items.len(), unique.len());
        for n in ast.nodes() {
            if n.kind.is_statement() && n.kind != NodeKind::CompoundStmt {
                assert!(unique.contains(&n.id), "{:?} {} missing", n.kind, n.id);
            }
        }
    }
}
