//! Helpers shared by the integration tests: a random program generator and
//! brute-force reference implementations.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ducut_core::ast::{Ast, NodeId};
use ducut_core::dataflow::{
    entry_defs, item_effects, mod_sets, resolve, transfer, Cfg, DefSite,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Emits a random program of the supported subset. Variables may be read
/// before they are written; that is intentional.
pub struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    out: String,
    funcs: Vec<String>,
    globals: Vec<String>,
    next_var: usize,
}

impl<'r> Gen<'r> {
    pub fn program(rng: &'r mut ChaCha8Rng) -> String {
        let mut g = Gen {
            rng,
            out: String::new(),
            funcs: Vec::new(),
            globals: Vec::new(),
            next_var: 0,
        };
        g.out.push_str("extern int put();\nint arr[4] = {1, 2, 3, 4};\n");
        for i in 0..g.rng.gen_range(0..3) {
            let name = format!("g{i}");
            if g.rng.gen_bool(0.5) {
                g.out.push_str(&format!("int {name} = {};\n", g.rng.gen_range(0..9)));
            } else {
                g.out.push_str(&format!("int {name};\n"));
            }
            g.globals.push(name);
        }
        for i in 0..g.rng.gen_range(0..3) {
            let name = format!("f{i}");
            g.out.push_str(&format!("int {name}(int p) {{\n"));
            let mut scope = vec!["p".to_string()];
            g.block(&mut scope, 2, 4);
            let e = g.expr(&scope, 2);
            g.out.push_str(&format!("return {e};\n}}\n"));
            g.funcs.push(name);
        }
        g.out.push_str("int main() {\n");
        let mut scope = Vec::new();
        g.block(&mut scope, 3, 6);
        g.out.push_str("}\n");
        g.out
    }

    fn fresh(&mut self) -> String {
        self.next_var += 1;
        format!("v{}", self.next_var)
    }

    fn var(&mut self, scope: &[String]) -> Option<String> {
        let n = scope.len() + self.globals.len();
        if n == 0 {
            return None;
        }
        let i = self.rng.gen_range(0..n);
        Some(if i < scope.len() {
            scope[i].clone()
        } else {
            self.globals[i - scope.len()].clone()
        })
    }

    fn expr(&mut self, scope: &[String], depth: u32) -> String {
        let choice = if depth == 0 { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..6) };
        match choice {
            0 => self.rng.gen_range(0..10).to_string(),
            1 => self.var(scope).unwrap_or_else(|| "1".into()),
            2 | 3 => {
                let ops = ["+", "-", "*", "<", "==", "&&"];
                let op = ops[self.rng.gen_range(0..ops.len())];
                let a = self.expr(scope, depth - 1);
                let b = self.expr(scope, depth - 1);
                format!("{a} {op} {b}")
            }
            4 if !self.funcs.is_empty() => {
                let f = self.funcs[self.rng.gen_range(0..self.funcs.len())].clone();
                let a = self.expr(scope, depth - 1);
                format!("{f}({a})")
            }
            _ => {
                let a = self.expr(scope, depth - 1);
                format!("arr[{a}]")
            }
        }
    }

    fn block(&mut self, scope: &mut Vec<String>, depth: u32, max: usize) {
        let mark = scope.len();
        for _ in 0..self.rng.gen_range(0..=max) {
            self.stmt(scope, depth);
        }
        scope.truncate(mark);
    }

    fn stmt(&mut self, scope: &mut Vec<String>, depth: u32) {
        let k = if depth == 0 { self.rng.gen_range(0..4) } else { self.rng.gen_range(0..9) };
        match k {
            0 => {
                let v = self.fresh();
                if self.rng.gen_bool(0.6) {
                    let e = self.expr(scope, 2);
                    self.out.push_str(&format!("int {v} = {e};\n"));
                } else {
                    self.out.push_str(&format!("int {v};\n"));
                }
                scope.push(v);
            }
            1 => match self.var(scope) {
                Some(v) => {
                    let e = self.expr(scope, 2);
                    self.out.push_str(&format!("{v} = {e};\n"));
                }
                None => self.out.push_str("put(0);\n"),
            },
            2 => {
                let e = self.expr(scope, 1);
                let i = self.expr(scope, 1);
                self.out.push_str(&format!("arr[{i}] = {e};\n"));
            }
            3 => {
                let e = self.expr(scope, 1);
                self.out.push_str(&format!("put(\"%d\\n\", {e});\n"));
            }
            4 | 5 => {
                let c = self.expr(scope, 1);
                self.out.push_str(&format!("if ({c}) {{\n"));
                self.block(scope, depth - 1, 3);
                if self.rng.gen_bool(0.5) {
                    self.out.push_str("} else {\n");
                    self.block(scope, depth - 1, 3);
                }
                self.out.push_str("}\n");
            }
            6 => {
                let c = self.expr(scope, 1);
                self.out.push_str(&format!("while ({c}) {{\n"));
                self.block(scope, depth - 1, 3);
                self.out.push_str("}\n");
            }
            7 => match self.var(scope) {
                Some(v) => {
                    self.out.push_str(&format!("for ({v} = 0; {v} < 3; {v} = {v} + 1) {{\n"));
                    self.block(scope, depth - 1, 3);
                    self.out.push_str("}\n");
                }
                None => self.out.push_str("put(1);\n"),
            },
            _ => {
                // braceless body, occasionally followed by an early return
                let c = self.expr(scope, 1);
                let e = self.expr(scope, 1);
                if self.rng.gen_bool(0.3) {
                    self.out.push_str(&format!("if ({c}) return {e};\n"));
                } else {
                    self.out.push_str(&format!("if ({c}) put({e});\n"));
                }
            }
        }
    }
}

/// Reaching definitions at every item of the blocks reachable from the
/// entry, by enumerating entry paths that visit each block at most twice
/// and applying the transfer functions along each path.
pub fn brute_force_reaching(ast: &Ast, cfg: &Cfg) -> BTreeMap<NodeId, BTreeSet<DefSite>> {
    let res = resolve(ast);
    let mods = mod_sets(ast, &res);
    let effects: Vec<Vec<(NodeId, Vec<_>)>> = cfg
        .blocks
        .iter()
        .map(|b| b.iter().map(|&i| (i, item_effects(ast, &res, &mods, i))).collect())
        .collect();
    let mut at_item: BTreeMap<NodeId, BTreeSet<DefSite>> = BTreeMap::new();
    let mut visits = vec![0u8; cfg.blocks.len()];

    fn walk(
        b: usize,
        set: BTreeSet<DefSite>,
        cfg: &Cfg,
        effects: &[Vec<(NodeId, Vec<ducut_core::dataflow::Effect>)>],
        visits: &mut [u8],
        at_item: &mut BTreeMap<NodeId, BTreeSet<DefSite>>,
    ) {
        if visits[b] >= 2 {
            return;
        }
        visits[b] += 1;
        let mut set = set;
        for (item, effs) in &effects[b] {
            at_item.entry(*item).or_default().extend(set.iter().copied());
            for &e in effs {
                transfer(&mut set, e, *item);
            }
        }
        for s in cfg.successors(b).collect::<Vec<_>>() {
            walk(s, set.clone(), cfg, effects, visits, at_item);
        }
        visits[b] -= 1;
    }

    walk(
        cfg.entry,
        entry_defs(ast, &res, cfg.function),
        cfg,
        &effects,
        &mut visits,
        &mut at_item,
    );
    at_item
}

/// Every subset of `0..n` as a bitmask predicate check: `s` passes and no
/// single removal from it passes.
pub fn is_one_minimal(s: u32, test: &dyn Fn(u32) -> bool) -> bool {
    if !test(s) {
        return false;
    }
    (0..32).filter(|i| s & (1 << i) != 0).all(|i| !test(s & !(1 << i)))
}

/// All passing 1-minimal subsets of an `n`-element universe.
pub fn one_minimal_sets(n: u32, test: &dyn Fn(u32) -> bool) -> BTreeSet<u32> {
    (0..(1u32 << n)).filter(|&s| is_one_minimal(s, test)).collect()
}
