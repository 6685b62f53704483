//! Arena syntax tree for the accepted C subset.
//!
//! Nodes are allocated in pre-order at parse time and never renumbered.
//! Removal only marks nodes in [`Ast::deleted`], so node ids stay valid
//! across every candidate derived from one parse.

mod lexer;
mod parser;
mod unparse;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_source;
pub use unparse::unparse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: Location,
    pub end: Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    TranslationUnit,
    FunctionDef,
    ParamDecl,
    VarDecl,
    CompoundStmt,
    IfStmt,
    WhileStmt,
    ForStmt,
    ReturnStmt,
    ExprStmt,
    Assign,
    BinaryOp,
    UnaryOp,
    Call,
    VarRef,
    ArrayIndex,
    IntLiteral,
    StringLiteral,
}

impl NodeKind {
    /// Kinds that carry an identifier.
    pub fn has_symbol(self) -> bool {
        matches!(
            self,
            NodeKind::FunctionDef
                | NodeKind::ParamDecl
                | NodeKind::VarDecl
                | NodeKind::VarRef
                | NodeKind::Call
        )
    }

    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::VarDecl
                | NodeKind::CompoundStmt
                | NodeKind::IfStmt
                | NodeKind::WhileStmt
                | NodeKind::ForStmt
                | NodeKind::ReturnStmt
                | NodeKind::ExprStmt
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReturnType {
    Int,
    Void,
}

/// Kind-specific payload that the unparser needs beyond kind and symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detail {
    None,
    Function {
        ret: ReturnType,
        is_extern: bool,
        /// `f(void)` rather than `f()`.
        void_params: bool,
        has_body: bool,
    },
    Var {
        array_len: Option<u64>,
        init: VarInit,
    },
    Binary(BinOp),
    Unary(UnOp),
    Int(i64),
    Str(String),
    If {
        has_else: bool,
    },
    For {
        has_init: bool,
        has_cond: bool,
        has_step: bool,
    },
    Return {
        has_value: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarInit {
    None,
    Expr,
    List,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub symbol: Option<String>,
    pub detail: Detail,
    /// Redundant parentheses wrapped around an expression.
    pub parens: u32,
    pub span: Span,
    pub token_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {location}: {message}")]
pub struct ParseError {
    pub location: Location,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnparseError {
    #[error("{kind:?} {node} is missing its required child {child}")]
    MissingChild {
        node: NodeId,
        kind: NodeKind,
        child: NodeId,
    },
    #[error("if statement {0} would bind a dangling else when printed")]
    DanglingElse(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("the translation unit cannot be removed")]
    RootRemoval,
    #[error("removing {child} orphans a mandatory position of {kind:?} {parent}")]
    MandatoryChild {
        parent: NodeId,
        kind: NodeKind,
        child: NodeId,
    },
}

/// Immutable node storage shared by every candidate derived from a parse.
#[derive(Debug, PartialEq, Eq)]
pub struct Tree {
    nodes: Vec<AstNode>,
    parents: Vec<Option<NodeId>>,
    depths: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    tree: Arc<Tree>,
    deleted: Vec<bool>,
    deleted_count: usize,
}

impl Ast {
    pub(crate) fn from_nodes(nodes: Vec<AstNode>) -> Ast {
        let mut parents = vec![None; nodes.len()];
        let mut depths = vec![0; nodes.len()];
        // Pre-order ids: a parent always precedes its children.
        for node in &nodes {
            for &c in &node.children {
                parents[c.index()] = Some(node.id);
                depths[c.index()] = depths[node.id.index()] + 1;
            }
        }
        let len = nodes.len();
        Ast {
            tree: Arc::new(Tree {
                nodes,
                parents,
                depths,
            }),
            deleted: vec![false; len],
            deleted_count: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node_count(&self) -> usize {
        self.tree.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.tree.nodes[id.index()]
    }

    pub fn get(&self, id: NodeId) -> Option<&AstNode> {
        self.tree.nodes.get(id.index())
    }

    pub fn nodes(&self) -> &[AstNode] {
        &self.tree.nodes
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.node(id).kind
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.tree.parents[id.index()]
    }

    /// Distance from the root; the root has depth 0.
    pub fn depth(&self, id: NodeId) -> u32 {
        self.tree.depths[id.index()]
    }

    pub fn is_deleted(&self, id: NodeId) -> bool {
        self.deleted[id.index()]
    }

    pub fn is_retained(&self, id: NodeId) -> bool {
        !self.deleted[id.index()]
    }

    pub fn deleted(&self) -> BTreeSet<NodeId> {
        self.deleted_ids().collect()
    }

    pub fn deleted_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.deleted
            .iter()
            .enumerate()
            .filter(|(_, d)| **d)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn retained_children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.node(id)
            .children
            .iter()
            .copied()
            .filter(move |c| self.is_retained(*c))
    }

    /// All nodes of the subtree rooted at `id`, in pre-order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.node(n).children.iter().rev().copied());
        }
        out
    }

    /// Retained nodes of the subtree rooted at `id`, in pre-order.
    pub fn retained_subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        if self.is_deleted(id) {
            return out;
        }
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            let kids: Vec<_> = self.retained_children(n).collect();
            stack.extend(kids.into_iter().rev());
        }
        out
    }

    pub fn is_ancestor(&self, ancestor: NodeId, mut node: NodeId) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.parent(node) {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    /// Token count of the retained program.
    pub fn retained_tokens(&self) -> u32 {
        self.retained_tokens_of(self.root())
    }

    /// Token count of the retained part of a subtree.
    pub fn retained_tokens_of(&self, id: NodeId) -> u32 {
        if self.is_deleted(id) {
            return 0;
        }
        let removed: u32 = self
            .node(id)
            .children
            .iter()
            .map(|&c| {
                if self.is_deleted(c) {
                    self.node(c).token_count
                } else {
                    self.node(c).token_count - self.retained_tokens_of(c)
                }
            })
            .sum();
        self.node(id).token_count - removed
    }

    /// Count of retained statements (declarations, expression statements,
    /// control statements and returns; blocks are structural and not counted).
    pub fn retained_statements(&self) -> usize {
        self.nodes()
            .iter()
            .filter(|n| {
                self.is_retained(n.id)
                    && n.kind.is_statement()
                    && n.kind != NodeKind::CompoundStmt
            })
            .count()
    }

    /// Whether the node may disappear without leaving its parent malformed.
    pub fn is_optional_position(&self, id: NodeId) -> bool {
        let Some(parent) = self.parent(id) else {
            return false;
        };
        let p = self.node(parent);
        match p.kind {
            NodeKind::TranslationUnit | NodeKind::CompoundStmt => true,
            NodeKind::IfStmt => p.children.get(2) == Some(&id),
            _ => false,
        }
    }

    /// Statements that sit directly in a statement list (top-level items and
    /// members of blocks); these are the positions removal operates on.
    pub fn is_list_member(&self, id: NodeId) -> bool {
        matches!(
            self.parent(id).map(|p| self.kind(p)),
            Some(NodeKind::TranslationUnit | NodeKind::CompoundStmt)
        )
    }

    /// Number of enclosing blocks: 0 for top-level items, 1 for statements
    /// directly in a function body, and so on.
    pub fn block_level(&self, id: NodeId) -> u32 {
        let mut level = 0;
        let mut cur = self.parent(id);
        while let Some(p) = cur {
            if self.kind(p) == NodeKind::CompoundStmt {
                level += 1;
            }
            cur = self.parent(p);
        }
        level
    }

    /// Nearest ancestor-or-self that is a statement-list member.
    pub fn enclosing_list_member(&self, mut id: NodeId) -> Option<NodeId> {
        loop {
            if self.is_list_member(id) {
                return Some(id);
            }
            id = self.parent(id)?;
        }
    }

    pub fn enclosing_function(&self, mut id: NodeId) -> Option<NodeId> {
        loop {
            if self.kind(id) == NodeKind::FunctionDef {
                return Some(id);
            }
            id = self.parent(id)?;
        }
    }

    /// Top-level function definition named `main`, if any.
    pub fn main_function(&self) -> Option<NodeId> {
        self.node(self.root()).children.iter().copied().find(|&c| {
            let n = self.node(c);
            n.kind == NodeKind::FunctionDef
                && n.symbol.as_deref() == Some("main")
                && matches!(n.detail, Detail::Function { has_body: true, .. })
        })
    }

    /// Returns a new value with `units` (and their descendants) removed.
    /// The receiver is left untouched.
    pub fn delete_units<'a, I>(&self, units: I) -> Result<Ast, StructureError>
    where
        I: IntoIterator<Item = &'a BTreeSet<NodeId>>,
    {
        let mut out = self.clone();
        let mut tops = Vec::new();
        for unit in units {
            for &id in unit {
                if id.index() >= self.node_count() {
                    return Err(StructureError::UnknownNode(id));
                }
                if id == self.root() {
                    return Err(StructureError::RootRemoval);
                }
                if !out.deleted[id.index()] {
                    tops.push(id);
                }
                for n in self.subtree(id) {
                    if !out.deleted[n.index()] {
                        out.deleted[n.index()] = true;
                        out.deleted_count += 1;
                    }
                }
            }
        }
        for id in tops {
            let parent = self.parent(id).expect("non-root node has a parent");
            if out.is_retained(parent) && !self.is_optional_position(id) {
                return Err(StructureError::MandatoryChild {
                    parent,
                    kind: self.kind(parent),
                    child: id,
                });
            }
        }
        Ok(out)
    }

    /// Marks nodes removed without any structural check. Used to build
    /// intermediate states (closure computation) and malformed inputs.
    pub fn with_deleted_unchecked<I>(&self, ids: I) -> Ast
    where
        I: IntoIterator<Item = NodeId>,
    {
        let mut out = self.clone();
        for id in ids {
            for n in self.subtree(id) {
                if !out.deleted[n.index()] {
                    out.deleted[n.index()] = true;
                    out.deleted_count += 1;
                }
            }
        }
        out
    }

    /// The original tree with nothing removed.
    pub fn pristine(&self) -> Ast {
        Ast {
            tree: Arc::clone(&self.tree),
            deleted: vec![false; self.node_count()],
            deleted_count: 0,
        }
    }

    pub fn deleted_len(&self) -> usize {
        self.deleted_count
    }

    /// Structural value of the retained tree, ignoring ids, spans and token
    /// counts. Two Asts are isomorphic iff their shapes are equal.
    pub fn shape(&self) -> Shape {
        self.shape_of(self.root())
    }

    fn shape_of(&self, id: NodeId) -> Shape {
        let n = self.node(id);
        let mut detail = n.detail.clone();
        // Optional parts are implied by which children survive.
        if let Detail::If { has_else } = &mut detail {
            *has_else = n.children.get(2).is_some_and(|&e| self.is_retained(e));
        }
        Shape {
            kind: n.kind,
            symbol: n.symbol.clone(),
            detail,
            parens: n.parens,
            children: self.retained_children(id).map(|c| self.shape_of(c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    pub kind: NodeKind,
    pub symbol: Option<String>,
    pub detail: Detail,
    pub parens: u32,
    pub children: Vec<Shape>,
}
