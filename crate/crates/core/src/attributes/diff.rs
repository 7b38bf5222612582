//! Tree differencing in the GumTree style.
//!
//! Matching runs in three passes:
//!
//! 1. **Top-down.** Isomorphic subtrees of height >= [`MIN_HEIGHT`] are
//!    anchored greedily from the tallest down. Subtrees with several
//!    isomorphic partners are resolved afterwards by parent similarity, then
//!    by line distance, then by source order.
//! 2. **Bottom-up.** Unmatched containers are matched to the same-kind
//!    destination container sharing the most matched descendants, provided
//!    the dice ratio reaches [`MIN_DICE`]. Roots are always matched when
//!    their kinds agree.
//! 3. **Recovery.** Under every matched pair, still-unmatched children are
//!    aligned: first isomorphic subtrees by LCS, then same-kind nodes by a
//!    similarity-weighted alignment.
//!
//! Actions follow from the mapping: unmatched destination nodes are inserts,
//! unmatched source nodes deletes, matched nodes with a different value are
//! updates, and matched nodes whose parent pairing or sibling order changed
//! are moves. A node that is both moved and updated counts only as updated.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::tree::{Ast, NodeId};

pub const MIN_HEIGHT: u32 = 2;
pub const MIN_DICE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EditAction {
    Insert { dst: NodeId },
    Delete { src: NodeId },
    Move { src: NodeId, dst: NodeId },
    Update { src: NodeId, dst: NodeId },
}

impl EditAction {
    pub fn kind(&self) -> ActionKind {
        match self {
            EditAction::Insert { .. } => ActionKind::Insert,
            EditAction::Delete { .. } => ActionKind::Delete,
            EditAction::Move { .. } => ActionKind::Move,
            EditAction::Update { .. } => ActionKind::Update,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Insert,
    Delete,
    Move,
    Update,
}

#[derive(Debug, Clone)]
pub struct AstMapping {
    src_to_dst: Vec<Option<NodeId>>,
    dst_to_src: Vec<Option<NodeId>>,
    src_action: Vec<Option<ActionKind>>,
    dst_action: Vec<Option<ActionKind>>,
    actions: Vec<EditAction>,
}

impl AstMapping {
    pub fn dst_of(&self, src: NodeId) -> Option<NodeId> {
        self.src_to_dst[src]
    }

    pub fn src_of(&self, dst: NodeId) -> Option<NodeId> {
        self.dst_to_src[dst]
    }

    pub fn matched_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.src_to_dst.iter().enumerate().filter_map(|(s, d)| d.map(|d| (s, d)))
    }

    pub fn matched_count(&self) -> usize {
        self.src_to_dst.iter().filter(|d| d.is_some()).count()
    }

    pub fn actions(&self) -> &[EditAction] {
        &self.actions
    }

    /// Action attached to a source node (Delete, Move or Update).
    pub fn src_action(&self, src: NodeId) -> Option<ActionKind> {
        self.src_action[src]
    }

    /// Action attached to a destination node (Insert, Move or Update).
    pub fn dst_action(&self, dst: NodeId) -> Option<ActionKind> {
        self.dst_action[dst]
    }

    pub fn count(&self, kind: ActionKind) -> usize {
        self.actions.iter().filter(|a| a.kind() == kind).count()
    }
}

/// Computes the node mapping and edit actions turning `src` into `dst`.
pub fn diff_asts(src: &Ast, dst: &Ast) -> AstMapping {
    let mut m = Matcher::new(src, dst);
    m.top_down();
    m.bottom_up();
    m.final_recovery();
    m.into_mapping()
}

struct Matcher<'a> {
    src: &'a Ast,
    dst: &'a Ast,
    s2d: Vec<Option<NodeId>>,
    d2s: Vec<Option<NodeId>>,
}

/// Nodes bucketed by height, popped tallest first.
struct HeightQueue<'a> {
    ast: &'a Ast,
    buckets: BTreeMap<u32, Vec<NodeId>>,
}

impl<'a> HeightQueue<'a> {
    fn new(ast: &'a Ast) -> Self {
        let mut q = Self { ast, buckets: BTreeMap::new() };
        q.push(ast.root());
        q
    }

    fn push(&mut self, id: NodeId) {
        self.buckets.entry(self.ast.height(id)).or_default().push(id);
    }

    fn peek_max(&self) -> Option<u32> {
        self.buckets.keys().next_back().copied()
    }

    fn pop(&mut self, height: u32) -> Vec<NodeId> {
        let mut v = self.buckets.remove(&height).unwrap_or_default();
        v.sort_unstable();
        v
    }

    fn open(&mut self, id: NodeId) {
        for &c in self.ast.children(id) {
            self.push(c);
        }
    }
}

impl<'a> Matcher<'a> {
    fn new(src: &'a Ast, dst: &'a Ast) -> Self {
        Self { src, dst, s2d: vec![None; src.len()], d2s: vec![None; dst.len()] }
    }

    fn link(&mut self, s: NodeId, d: NodeId) {
        debug_assert!(self.s2d[s].is_none() && self.d2s[d].is_none());
        self.s2d[s] = Some(d);
        self.d2s[d] = Some(s);
    }

    /// Matches two isomorphic subtrees node by node.
    fn link_subtrees(&mut self, s: NodeId, d: NodeId) {
        for (a, b) in self.src.subtree(s).zip(self.dst.subtree(d)) {
            if self.s2d[a].is_none() && self.d2s[b].is_none() {
                self.link(a, b);
            }
        }
    }

    fn line_distance(&self, s: NodeId, d: NodeId) -> u32 {
        let a = self.src.node(s);
        let b = self.dst.node(d);
        a.start_line.abs_diff(b.start_line) + a.end_line.abs_diff(b.end_line)
    }

    /// Share of descendants of `s` and `d` that are matched to each other.
    fn dice(&self, s: NodeId, d: NodeId) -> f64 {
        let ns = self.src.size(s) - 1;
        let nd = self.dst.size(d) - 1;
        if ns + nd == 0 {
            return 0.0;
        }
        let common = self
            .src
            .descendants(s)
            .filter(|&x| self.s2d[x].is_some_and(|y| self.dst.is_descendant_of(y, d)))
            .count();
        2.0 * common as f64 / (ns + nd) as f64
    }

    fn top_down(&mut self) {
        let mut src_counts: HashMap<u64, usize> = HashMap::new();
        for i in 0..self.src.len() {
            *src_counts.entry(self.src.subtree_hash(i)).or_default() += 1;
        }
        let mut dst_counts: HashMap<u64, usize> = HashMap::new();
        for i in 0..self.dst.len() {
            *dst_counts.entry(self.dst.subtree_hash(i)).or_default() += 1;
        }

        let mut q1 = HeightQueue::new(self.src);
        let mut q2 = HeightQueue::new(self.dst);
        let mut ambiguous: Vec<(NodeId, NodeId)> = Vec::new();

        while let (Some(h1), Some(h2)) = (q1.peek_max(), q2.peek_max()) {
            if h1.min(h2) < MIN_HEIGHT {
                break;
            }
            if h1 != h2 {
                if h1 > h2 {
                    for t in q1.pop(h1) {
                        q1.open(t);
                    }
                } else {
                    for t in q2.pop(h2) {
                        q2.open(t);
                    }
                }
                continue;
            }
            let level_src = q1.pop(h1);
            let level_dst = q2.pop(h2);
            let mut touched_src = HashSet::new();
            let mut touched_dst = HashSet::new();
            let mut by_hash: HashMap<u64, Vec<NodeId>> = HashMap::new();
            for &d in &level_dst {
                by_hash.entry(self.dst.subtree_hash(d)).or_default().push(d);
            }
            for &s in &level_src {
                let h = self.src.subtree_hash(s);
                let Some(partners) = by_hash.get(&h) else { continue };
                let unique = src_counts[&h] == 1 && dst_counts[&h] == 1;
                for &d in partners {
                    if unique {
                        self.link_subtrees(s, d);
                    } else {
                        ambiguous.push((s, d));
                    }
                    touched_src.insert(s);
                    touched_dst.insert(d);
                }
            }
            for s in level_src {
                if !touched_src.contains(&s) {
                    q1.open(s);
                }
            }
            for d in level_dst {
                if !touched_dst.contains(&d) {
                    q2.open(d);
                }
            }
        }

        let keyed: Vec<_> = ambiguous
            .into_iter()
            .map(|(s, d)| {
                let parent_dice = match (self.src.parent(s), self.dst.parent(d)) {
                    (Some(ps), Some(pd)) => self.dice(ps, pd),
                    _ => 0.0,
                };
                (parent_dice, self.line_distance(s, d), s, d)
            })
            .collect();
        let mut keyed = keyed;
        keyed.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
        });
        for (_, _, s, d) in keyed {
            if self.s2d[s].is_none() && self.d2s[d].is_none() {
                self.link_subtrees(s, d);
            }
        }
    }

    /// Unmatched destination containers of the right kind that are ancestors
    /// of partners of `s`'s matched descendants.
    fn container_candidates(&self, s: NodeId) -> Vec<NodeId> {
        let kind = self.src.kind(s);
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for x in self.src.descendants(s) {
            let Some(y) = self.s2d[x] else { continue };
            for a in self.dst.ancestors(y) {
                if !seen.insert(a) {
                    break;
                }
                if self.d2s[a].is_none() && self.dst.kind(a) == kind {
                    out.push(a);
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn bottom_up(&mut self) {
        let src_root = self.src.root();
        let dst_root = self.dst.root();
        for s in self.src.postorder() {
            if s == src_root {
                if self.s2d[s].is_none()
                    && self.d2s[dst_root].is_none()
                    && self.src.kind(s) == self.dst.kind(dst_root)
                {
                    self.link(s, dst_root);
                }
                if let Some(d) = self.s2d[s] {
                    self.recover(s, d);
                }
                continue;
            }
            if self.s2d[s].is_some() || self.src.is_leaf(s) {
                continue;
            }
            let mut best: Option<(f64, u32, NodeId)> = None;
            for d in self.container_candidates(s) {
                let score = self.dice(s, d);
                let dist = self.line_distance(s, d);
                let better = match best {
                    None => true,
                    Some((bs, bd, _)) => score > bs || (score == bs && dist < bd),
                };
                if better {
                    best = Some((score, dist, d));
                }
            }
            if let Some((score, _, d)) = best {
                if score >= MIN_DICE {
                    self.link(s, d);
                    self.recover(s, d);
                }
            }
        }
    }

    fn final_recovery(&mut self) {
        for s in 0..self.src.len() {
            if let Some(d) = self.s2d[s] {
                self.recover(s, d);
            }
        }
    }

    fn recover(&mut self, s: NodeId, d: NodeId) {
        let mut stack = vec![(s, d)];
        while let Some((s, d)) = stack.pop() {
            let cs: Vec<NodeId> = self.src.children(s).iter().copied().filter(|&c| self.s2d[c].is_none()).collect();
            let cd: Vec<NodeId> = self.dst.children(d).iter().copied().filter(|&c| self.d2s[c].is_none()).collect();
            if cs.is_empty() || cd.is_empty() {
                continue;
            }
            let iso = lcs(&cs, &cd, |a, b| self.src.subtree_hash(a) == self.dst.subtree_hash(b));
            for (a, b) in iso {
                self.link_subtrees(a, b);
            }
            let cs: Vec<NodeId> = cs.into_iter().filter(|&c| self.s2d[c].is_none()).collect();
            let cd: Vec<NodeId> = cd.into_iter().filter(|&c| self.d2s[c].is_none()).collect();
            if cs.is_empty() || cd.is_empty() {
                continue;
            }
            let src_leaves: Vec<Vec<u64>> = cs.iter().map(|&c| leaf_labels(self.src, c)).collect();
            let dst_leaves: Vec<Vec<u64>> = cd.iter().map(|&c| leaf_labels(self.dst, c)).collect();
            let pairs = weighted_alignment(cs.len(), cd.len(), |i, j| {
                if self.src.kind(cs[i]) != self.dst.kind(cd[j]) {
                    return None;
                }
                Some(1.0 + multiset_dice(&src_leaves[i], &dst_leaves[j]))
            });
            for (i, j) in pairs {
                self.link(cs[i], cd[j]);
                stack.push((cs[i], cd[j]));
            }
        }
    }

    fn into_mapping(self) -> AstMapping {
        let Matcher { src, dst, s2d, d2s } = self;
        let mut moved = vec![false; src.len()];

        for (s, d) in s2d.iter().enumerate().filter_map(|(s, d)| d.map(|d| (s, d))) {
            match (src.parent(s), dst.parent(d)) {
                (Some(ps), Some(pd)) if s2d[ps] != Some(pd) => moved[s] = true,
                (Some(_), None) | (None, Some(_)) => moved[s] = true,
                _ => {}
            }
        }
        // Sibling order: children kept under the same parent pair but outside
        // the longest order-preserving run are moved.
        for p in 0..src.len() {
            let Some(q) = s2d[p] else { continue };
            let kept: Vec<(NodeId, usize)> = src
                .children(p)
                .iter()
                .filter_map(|&c| {
                    let dc = s2d[c]?;
                    (dst.parent(dc) == Some(q)).then(|| (c, dst.child_index(dc).unwrap_or(0)))
                })
                .collect();
            let order: Vec<usize> = kept.iter().map(|k| k.1).collect();
            let in_run = longest_increasing(&order);
            for (i, (c, _)) in kept.iter().enumerate() {
                if !in_run[i] {
                    moved[*c] = true;
                }
            }
        }

        let mut src_action = vec![None; src.len()];
        let mut dst_action = vec![None; dst.len()];
        let mut actions = Vec::new();
        for s in 0..src.len() {
            match s2d[s] {
                None => {
                    src_action[s] = Some(ActionKind::Delete);
                    actions.push(EditAction::Delete { src: s });
                }
                Some(d) if src.value(s) != dst.value(d) => {
                    src_action[s] = Some(ActionKind::Update);
                    dst_action[d] = Some(ActionKind::Update);
                    actions.push(EditAction::Update { src: s, dst: d });
                }
                Some(d) if moved[s] => {
                    src_action[s] = Some(ActionKind::Move);
                    dst_action[d] = Some(ActionKind::Move);
                    actions.push(EditAction::Move { src: s, dst: d });
                }
                Some(_) => {}
            }
        }
        for d in 0..dst.len() {
            if d2s[d].is_none() {
                dst_action[d] = Some(ActionKind::Insert);
                actions.push(EditAction::Insert { dst: d });
            }
        }
        AstMapping { src_to_dst: s2d, dst_to_src: d2s, src_action, dst_action, actions }
    }
}

fn leaf_labels(ast: &Ast, id: NodeId) -> Vec<u64> {
    let mut v: Vec<u64> = ast.subtree(id).filter(|&i| ast.is_leaf(i)).map(|i| ast.subtree_hash(i)).collect();
    v.sort_unstable();
    v
}

fn multiset_dice(a: &[u64], b: &[u64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

/// Longest common subsequence under `eq`, returned as index-aligned pairs.
fn lcs(a: &[NodeId], b: &[NodeId], eq: impl Fn(NodeId, NodeId) -> bool) -> Vec<(NodeId, NodeId)> {
    let pairs = weighted_alignment(a.len(), b.len(), |i, j| eq(a[i], b[j]).then_some(1.0));
    pairs.into_iter().map(|(i, j)| (a[i], b[j])).collect()
}

/// Order-preserving alignment maximising the summed score of aligned pairs;
/// `score` returns `None` for pairs that may not align. Ties prefer the
/// earliest pairs.
fn weighted_alignment(n: usize, m: usize, score: impl Fn(usize, usize) -> Option<f64>) -> Vec<(usize, usize)> {
    // dp[i][j]: best score aligning a[i..] with b[j..].
    let mut dp = vec![vec![0.0f64; m + 1]; n + 1];
    let mut pair = vec![vec![None; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let skip = dp[i + 1][j].max(dp[i][j + 1]);
            let s = score(i, j);
            pair[i][j] = s;
            dp[i][j] = match s {
                Some(s) => skip.max(dp[i + 1][j + 1] + s),
                None => skip,
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if let Some(s) = pair[i][j] {
            if dp[i][j] == dp[i + 1][j + 1] + s {
                out.push((i, j));
                i += 1;
                j += 1;
                continue;
            }
        }
        if dp[i][j] == dp[i + 1][j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Marks the members of a longest strictly increasing subsequence, preferring
/// earlier elements on ties.
fn longest_increasing(values: &[usize]) -> Vec<bool> {
    let n = values.len();
    let mut keep = vec![false; n];
    if n == 0 {
        return keep;
    }
    // len[i]: longest increasing run starting at i; next[i]: its successor.
    let mut len = vec![1usize; n];
    let mut next = vec![None; n];
    for i in (0..n).rev() {
        for j in i + 1..n {
            if values[j] > values[i] && len[j] + 1 > len[i] {
                len[i] = len[j] + 1;
                next[i] = Some(j);
            }
        }
    }
    let best = len.iter().copied().max().unwrap_or(0);
    let mut cur = (0..n).find(|&i| len[i] == best);
    while let Some(i) = cur {
        keep[i] = true;
        cur = next[i];
    }
    keep
}
