//! Language-neutral syntax tree used by the differ and the attribute
//! extractor.
//!
//! Nodes live in an arena in preorder, so the subtree of node `i` is exactly
//! the id range `i..i + size(i)`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub kind: &'static str,
    /// Token text for leaves, operator text for operator nodes, empty otherwise.
    pub value: String,
    /// Grammar field under which the node hangs off its parent.
    pub field: Option<&'static str>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// 1-based inclusive line span.
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone)]
pub struct Ast {
    nodes: Vec<AstNode>,
    height: Vec<u32>,
    size: Vec<usize>,
    hash: Vec<u64>,
}

impl Ast {
    pub fn root(&self) -> NodeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[AstNode] {
        &self.nodes
    }

    pub fn kind(&self, id: NodeId) -> &'static str {
        self.nodes[id].kind
    }

    pub fn value(&self, id: NodeId) -> &str {
        &self.nodes[id].value
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Leaves have height 1.
    pub fn height(&self, id: NodeId) -> u32 {
        self.height[id]
    }

    /// Number of nodes in the subtree, the node included.
    pub fn size(&self, id: NodeId) -> usize {
        self.size[id]
    }

    /// Hash of kind, value and the full subtree shape. Equal hashes are
    /// treated as isomorphic subtrees.
    pub fn subtree_hash(&self, id: NodeId) -> u64 {
        self.hash[id]
    }

    /// The node and all of its descendants, in preorder.
    pub fn subtree(&self, id: NodeId) -> std::ops::Range<NodeId> {
        id..id + self.size[id]
    }

    /// Strict descendants in preorder.
    pub fn descendants(&self, id: NodeId) -> std::ops::Range<NodeId> {
        id + 1..id + self.size[id]
    }

    pub fn is_descendant_of(&self, node: NodeId, ancestor: NodeId) -> bool {
        node > ancestor && node < ancestor + self.size[ancestor]
    }

    pub fn ancestors(&self, id: NodeId) -> Ancestors<'_> {
        Ancestors { ast: self, next: self.parent(id) }
    }

    /// Position of the node among its parent's children.
    pub fn child_index(&self, id: NodeId) -> Option<usize> {
        let parent = self.parent(id)?;
        self.children(parent).iter().position(|&c| c == id)
    }

    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![(self.root(), false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                for &c in self.children(id).iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).filter(|&i| self.is_leaf(i))
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Last line any node reaches.
    pub fn last_line(&self) -> u32 {
        self.nodes.iter().map(|n| n.end_line).max().unwrap_or(0)
    }
}

pub struct Ancestors<'a> {
    ast: &'a Ast,
    next: Option<NodeId>,
}

impl Iterator for Ancestors<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let id = self.next?;
        self.next = self.ast.parent(id);
        Some(id)
    }
}

/// Builds an [`Ast`] from nodes opened and closed in document order.
#[derive(Debug, Default)]
pub struct AstBuilder {
    nodes: Vec<AstNode>,
    open: Vec<NodeId>,
}

impl AstBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open(
        &mut self,
        kind: &'static str,
        value: impl Into<String>,
        field: Option<&'static str>,
        start_line: u32,
        end_line: u32,
    ) -> NodeId {
        let id = self.nodes.len();
        let parent = self.open.last().copied();
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        self.nodes.push(AstNode {
            kind,
            value: value.into(),
            field,
            parent,
            children: Vec::new(),
            start_line,
            end_line,
        });
        self.open.push(id);
        id
    }

    pub fn set_value(&mut self, id: NodeId, value: String) {
        self.nodes[id].value = value;
    }

    pub fn close(&mut self) {
        self.open.pop();
    }

    pub fn leaf(
        &mut self,
        kind: &'static str,
        value: impl Into<String>,
        field: Option<&'static str>,
        start_line: u32,
        end_line: u32,
    ) -> NodeId {
        let id = self.open(kind, value, field, start_line, end_line);
        self.close();
        id
    }

    pub fn finish(self) -> Ast {
        let nodes = self.nodes;
        let n = nodes.len();
        let mut height = vec![1u32; n];
        let mut size = vec![1usize; n];
        let mut hash = vec![0u64; n];
        // Children always have larger ids than their parent.
        for id in (0..n).rev() {
            let node = &nodes[id];
            let mut h = DefaultHasher::new();
            node.kind.hash(&mut h);
            node.value.hash(&mut h);
            node.children.len().hash(&mut h);
            for &c in &node.children {
                height[id] = height[id].max(height[c] + 1);
                size[id] += size[c];
                hash[c].hash(&mut h);
            }
            hash[id] = h.finish();
        }
        Ast { nodes, height, size, hash }
    }
}
