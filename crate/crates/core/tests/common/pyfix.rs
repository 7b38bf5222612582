//! Synthetic Python file pairs with a known edit script, plus an oracle that
//! derives the expected attribute vector from tree-sitter's concrete tree.
//!
//! Programs are built from statements whose identifiers and literals are all
//! unique, so the correspondence between the two revisions is known by
//! construction: a statement or clause that keeps its id is the same unit on
//! both sides, and its own nodes pair up in preorder. The oracle never looks
//! at the library's matcher.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NAMES: [&str; 27] = [
    "anyInserted",
    "anyDeleted",
    "getMovedSrcs",
    "updatedSrcs",
    "anythingInLineMoved",
    "anythingInLineUpdated",
    "anythingInLineDeleted",
    "anythingMovedIntoLine",
    "anythingInsertedIntoLine",
    "insertedIfConditions",
    "deletedIfConditions",
    "elseInserted",
    "elseDeleted",
    "entireLineMoved",
    "entireLineDeleted",
    "stringsUpdated",
    "magicStringsReplaced",
    "movedBlocksInIfConditions",
    "insertedAssertConditions",
    "insertedTryCatch",
    "removedTryCatch",
    "updatedValueAssignments",
    "updatedFunctionArguments",
    "hasNewFile",
    "hasOldFile",
    "cyclomaticComplexity",
    "commentLOC",
];

pub fn idx(name: &str) -> usize {
    NAMES.iter().position(|n| *n == name).unwrap_or_else(|| panic!("unknown attribute {name}"))
}

// ---------------------------------------------------------------------------
// Program model

#[derive(Clone, Debug)]
struct Clause {
    n: u32,
    a: i64,
    body: Vec<Stmt>,
}

#[derive(Clone, Debug)]
enum K {
    Assign { a: i64, s: String, named: bool },
    Str { s: String, named: bool },
    Aug { a: i64, op: char },
    Call { a: i64, b: i64 },
    Assert { a: i64, s: String },
    Ternary { a: i64 },
    Comp { a: i64 },
    If { a: i64, boolean: bool, body: Vec<Stmt>, elifs: Vec<Clause>, els: Option<Clause> },
    For { body: Vec<Stmt> },
    While { a: i64, body: Vec<Stmt> },
    Try { body: Vec<Stmt>, handler: Clause },
    Def { a: i64, body: Vec<Stmt> },
}

#[derive(Clone, Debug)]
struct Stmt {
    n: u32,
    k: K,
}

impl Stmt {
    /// (owner id, body) for every body directly held by this statement.
    fn bodies(&self) -> Vec<(u32, &Vec<Stmt>)> {
        match &self.k {
            K::If { body, elifs, els, .. } => {
                let mut v = vec![(self.n, body)];
                v.extend(elifs.iter().map(|c| (c.n, &c.body)));
                v.extend(els.iter().map(|c| (c.n, &c.body)));
                v
            }
            K::For { body } | K::While { body, .. } | K::Def { body, .. } => vec![(self.n, body)],
            K::Try { body, handler } => vec![(self.n, body), (handler.n, &handler.body)],
            _ => vec![],
        }
    }

    fn bodies_mut(&mut self) -> Vec<(u32, &mut Vec<Stmt>)> {
        let n = self.n;
        match &mut self.k {
            K::If { body, elifs, els, .. } => {
                let mut v = vec![(n, body)];
                v.extend(elifs.iter_mut().map(|c| (c.n, &mut c.body)));
                v.extend(els.iter_mut().map(|c| (c.n, &mut c.body)));
                v
            }
            K::For { body } | K::While { body, .. } | K::Def { body, .. } => vec![(n, body)],
            K::Try { body, handler } => vec![(n, body), (handler.n, &mut handler.body)],
            _ => vec![],
        }
    }

    fn is_if(&self) -> bool {
        matches!(self.k, K::If { .. })
    }
}

#[derive(Clone, Debug)]
struct Program {
    body: Vec<Stmt>,
    next: u32,
}

impl Program {
    fn fresh(&mut self) -> u32 {
        self.next += 1;
        self.next
    }

    fn body_mut(&mut self, owner: u32) -> Option<&mut Vec<Stmt>> {
        #[allow(clippy::ptr_arg)]
        fn go(stmts: &mut Vec<Stmt>, owner: u32) -> Option<&mut Vec<Stmt>> {
            for s in stmts.iter_mut() {
                for (o, b) in s.bodies_mut() {
                    if o == owner {
                        return Some(b);
                    }
                    if let Some(found) = go(b, owner) {
                        return Some(found);
                    }
                }
            }
            None
        }
        if owner == 0 {
            return Some(&mut self.body);
        }
        go(&mut self.body, owner)
    }

    fn stmt_mut(&mut self, id: u32) -> Option<&mut Stmt> {
        fn go(stmts: &mut [Stmt], id: u32) -> Option<&mut Stmt> {
            for s in stmts.iter_mut() {
                if s.n == id {
                    return Some(s);
                }
                for (_, b) in s.bodies_mut() {
                    if let Some(found) = go(b, id) {
                        return Some(found);
                    }
                }
            }
            None
        }
        go(&mut self.body, id)
    }

    /// (owner, index, statement) for every statement.
    fn stmts(&self) -> Vec<(u32, usize, Stmt)> {
        fn go(owner: u32, stmts: &[Stmt], out: &mut Vec<(u32, usize, Stmt)>) {
            for (i, s) in stmts.iter().enumerate() {
                out.push((owner, i, s.clone()));
                for (o, b) in s.bodies() {
                    go(o, b, out);
                }
            }
        }
        let mut out = Vec::new();
        go(0, &self.body, &mut out);
        out
    }

    /// (owner, len, owner is an if/elif/else body) for every body.
    fn bodies(&self) -> Vec<(u32, usize)> {
        let mut out = vec![(0, self.body.len())];
        for (_, _, s) in self.stmts() {
            out.extend(s.bodies().into_iter().map(|(o, b)| (o, b.len())));
        }
        out
    }

    /// Owners of every body nested inside statement `id`, itself included.
    fn owners_within(&self, id: u32) -> HashSet<u32> {
        fn go(s: &Stmt, out: &mut HashSet<u32>) {
            out.insert(s.n);
            for (o, b) in s.bodies() {
                out.insert(o);
                for c in b {
                    go(c, out);
                }
            }
        }
        let mut out = HashSet::new();
        if let Some((_, _, s)) = self.stmts().into_iter().find(|(_, _, s)| s.n == id) {
            go(&s, &mut out);
        }
        out
    }

    fn render(&self) -> (String, HashMap<u32, (u32, u32)>) {
        let mut lines = Vec::new();
        let mut pos = HashMap::new();
        render_body(&self.body, 0, &mut lines, &mut pos);
        let mut text = lines.join("\n");
        text.push('\n');
        (text, pos)
    }
}

fn render_body(stmts: &[Stmt], indent: usize, lines: &mut Vec<String>, pos: &mut HashMap<u32, (u32, u32)>) {
    fn push(lines: &mut Vec<String>, pos: &mut HashMap<u32, (u32, u32)>, indent: usize, n: u32, text: String) {
        pos.insert(n, (lines.len() as u32 + 1, indent as u32));
        lines.push(format!("{}{text}", " ".repeat(indent)));
    }
    let pad = " ".repeat(indent);
    for s in stmts {
        let n = s.n;
        match &s.k {
            K::Assign { a, s: lit, named } => {
                let arg = if *named { format!("S{n}") } else { format!("'{lit}'") };
                push(lines, pos, indent, n, format!("v{n} = f{n}({a}, {arg})"));
            }
            K::Str { s: lit, named } => {
                let rhs = if *named { format!("M{n}") } else { format!("'{lit}'") };
                push(lines, pos, indent, n, format!("m{n} = {rhs}"));
            }
            K::Aug { a, op } => push(lines, pos, indent, n, format!("w{n} {op}= {a}")),
            K::Call { a, b } => push(lines, pos, indent, n, format!("g{n}(x{n}, {a}, k{n}={b})")),
            K::Assert { a, s: lit } => push(lines, pos, indent, n, format!("assert c{n} > {a}, '{lit}'")),
            K::Ternary { a } => push(lines, pos, indent, n, format!("z{n} = a{n} if b{n} else {a}")),
            K::Comp { a } => push(lines, pos, indent, n, format!("q{n} = [e{n} for e{n} in s{n} if e{n} > {a}]")),
            K::If { a, boolean, body, elifs, els } => {
                let extra = if *boolean { format!(" and d{n}") } else { String::new() };
                push(lines, pos, indent, n, format!("if c{n} > {a}{extra}:"));
                render_body(body, indent + 4, lines, pos);
                for c in elifs {
                    pos.insert(c.n, (lines.len() as u32 + 1, indent as u32));
                    lines.push(format!("{pad}elif c{} > {}:", c.n, c.a));
                    render_body(&c.body, indent + 4, lines, pos);
                }
                if let Some(c) = els {
                    pos.insert(c.n, (lines.len() as u32 + 1, indent as u32));
                    lines.push(format!("{pad}else:"));
                    render_body(&c.body, indent + 4, lines, pos);
                }
            }
            K::For { body } => {
                push(lines, pos, indent, n, format!("for i{n} in r{n}:"));
                render_body(body, indent + 4, lines, pos);
            }
            K::While { a, body } => {
                push(lines, pos, indent, n, format!("while k{n} < {a}:"));
                render_body(body, indent + 4, lines, pos);
            }
            K::Try { body, handler } => {
                push(lines, pos, indent, n, "try:".to_string());
                render_body(body, indent + 4, lines, pos);
                pos.insert(handler.n, (lines.len() as u32 + 1, indent as u32));
                lines.push(format!("{pad}except E{}:", handler.n));
                render_body(&handler.body, indent + 4, lines, pos);
            }
            K::Def { a, body } => {
                push(lines, pos, indent, n, format!("def h{n}(p{n}, o{n}={a}):"));
                render_body(body, indent + 4, lines, pos);
            }
        }
    }
}

fn text_size(stmts: &[Stmt]) -> usize {
    let mut lines = Vec::new();
    render_body(stmts, 0, &mut lines, &mut HashMap::new());
    lines.iter().map(|l| l.trim().len()).sum()
}

// ---------------------------------------------------------------------------
// Random generation

fn lit(n: u32) -> i64 {
    1000 + n as i64 * 7
}

fn simple(p: &mut Program, rng: &mut ChaCha8Rng) -> Stmt {
    let n = p.fresh();
    let a = lit(n);
    let k = match rng.gen_range(0..7) {
        0 => K::Assign { a, s: format!("s{n}"), named: false },
        1 => K::Str { s: format!("s{n}"), named: false },
        2 => K::Aug { a, op: '+' },
        3 => K::Call { a, b: a + 1 },
        4 => K::Assert { a, s: format!("s{n}") },
        5 => K::Ternary { a },
        _ => K::Comp { a },
    };
    Stmt { n, k }
}

fn body(p: &mut Program, rng: &mut ChaCha8Rng, depth: u32, len: usize) -> Vec<Stmt> {
    (0..len).map(|_| stmt(p, rng, depth)).collect()
}

fn stmt(p: &mut Program, rng: &mut ChaCha8Rng, depth: u32) -> Stmt {
    if depth >= 2 || rng.gen_bool(0.6) {
        return simple(p, rng);
    }
    let n = p.fresh();
    let a = lit(n);
    let len = rng.gen_range(2..=3);
    let k = match rng.gen_range(0..5) {
        0 | 1 => {
            let b = body(p, rng, depth + 1, len);
            let elifs = if rng.gen_bool(0.3) {
                let cn = p.fresh();
                vec![Clause { n: cn, a: lit(cn), body: body(p, rng, depth + 1, 2) }]
            } else {
                vec![]
            };
            let els = if rng.gen_bool(0.5) {
                let cn = p.fresh();
                Some(Clause { n: cn, a: 0, body: body(p, rng, depth + 1, 2) })
            } else {
                None
            };
            K::If { a, boolean: rng.gen_bool(0.3), body: b, elifs, els }
        }
        2 => K::For { body: body(p, rng, depth + 1, len) },
        3 => {
            let b = body(p, rng, depth + 1, len);
            let hn = p.fresh();
            K::Try { body: b, handler: Clause { n: hn, a: 0, body: body(p, rng, depth + 1, 2) } }
        }
        _ => {
            if rng.gen_bool(0.5) {
                K::While { a, body: body(p, rng, depth + 1, len) }
            } else {
                K::Def { a, body: body(p, rng, depth + 1, len) }
            }
        }
    };
    Stmt { n, k }
}

fn base_program(rng: &mut ChaCha8Rng) -> Program {
    let mut p = Program { body: vec![], next: 0 };
    let len = rng.gen_range(4..=7);
    p.body = body(&mut p, rng, 0, len);
    p
}

/// Edit categories a fixture is built around.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Focus {
    Identity,
    NoDestination,
    NoSource,
    InsertSimple,
    InsertIf,
    InsertTry,
    InsertAssert,
    DeleteAny,
    DeleteIf,
    DeleteTry,
    MoveAcross,
    MoveOutOfIf,
    MoveWithin,
    UpdateNumber,
    UpdateString,
    UpdateOperator,
    Magic,
    AddElse,
    RemoveElse,
    AddElif,
    RemoveElif,
}

pub const ALL_FOCI: [Focus; 21] = [
    Focus::Identity,
    Focus::NoDestination,
    Focus::NoSource,
    Focus::InsertSimple,
    Focus::InsertIf,
    Focus::InsertTry,
    Focus::InsertAssert,
    Focus::DeleteAny,
    Focus::DeleteIf,
    Focus::DeleteTry,
    Focus::MoveAcross,
    Focus::MoveOutOfIf,
    Focus::MoveWithin,
    Focus::UpdateNumber,
    Focus::UpdateString,
    Focus::UpdateOperator,
    Focus::Magic,
    Focus::AddElse,
    Focus::RemoveElse,
    Focus::AddElif,
    Focus::RemoveElif,
];

/// Foci whose edits never relocate a node.
pub const MOVE_FREE: [Focus; 15] = [
    Focus::InsertSimple,
    Focus::InsertIf,
    Focus::InsertTry,
    Focus::InsertAssert,
    Focus::DeleteAny,
    Focus::DeleteIf,
    Focus::DeleteTry,
    Focus::UpdateNumber,
    Focus::UpdateString,
    Focus::UpdateOperator,
    Focus::AddElse,
    Focus::RemoveElse,
    Focus::AddElif,
    Focus::RemoveElif,
    Focus::Identity,
];

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub source: Option<String>,
    pub destination: Option<String>,
    pub comment_line: u32,
    pub src_pos: HashMap<u32, (u32, u32)>,
    pub dst_pos: HashMap<u32, (u32, u32)>,
}

impl Fixture {
    /// Same fixture with the two revisions exchanged.
    pub fn swapped(&self) -> Fixture {
        Fixture {
            name: format!("{} (swapped)", self.name),
            source: self.destination.clone(),
            destination: self.source.clone(),
            comment_line: self.comment_line,
            src_pos: self.dst_pos.clone(),
            dst_pos: self.src_pos.clone(),
        }
    }

    pub fn expected(&self) -> Result<[u32; 27], String> {
        oracle(self)
    }
}

struct Editor<'a> {
    src: &'a Program,
    dst: Program,
    touched: HashSet<u32>,
    rng: &'a mut ChaCha8Rng,
    /// Statement or body owner the comment should sit next to.
    anchor: Option<u32>,
}

impl Editor<'_> {
    fn free_bodies(&self, min_len: usize) -> Vec<u32> {
        self.src.bodies().into_iter().filter(|(o, l)| *l >= min_len && !self.touched.contains(o)).map(|(o, _)| o).collect()
    }

    fn free_stmts(&self, pred: impl Fn(&Stmt) -> bool) -> Vec<(u32, usize, Stmt)> {
        self.src.stmts().into_iter().filter(|(o, _, s)| !self.touched.contains(o) && !self.touched.contains(&s.n) && pred(s)).collect()
    }

    fn pick<T: Clone>(&mut self, v: &[T]) -> Option<T> {
        v.choose(self.rng).cloned()
    }

    fn insert(&mut self, make: fn(&mut Program, &mut ChaCha8Rng) -> Stmt) -> bool {
        let Some(owner) = self.pick(&self.free_bodies(1)) else { return false };
        let new = make(&mut self.dst, self.rng);
        let b = self.dst.body_mut(owner).unwrap();
        let at = self.rng.gen_range(0..=b.len());
        b.insert(at, new);
        self.touched.insert(owner);
        self.anchor.get_or_insert(owner);
        true
    }

    fn delete(&mut self, pred: fn(&Stmt) -> bool) -> bool {
        let lens: HashMap<u32, usize> = self.src.bodies().into_iter().collect();
        let cands = self.free_stmts(pred);
        let cands: Vec<_> = cands.into_iter().filter(|(o, _, _)| lens[o] >= 2).collect();
        let Some((owner, _, s)) = self.pick(&cands) else { return false };
        let inner = self.src.owners_within(s.n);
        if inner.iter().any(|o| self.touched.contains(o)) {
            return false;
        }
        let b = self.dst.body_mut(owner).unwrap();
        b.retain(|x| x.n != s.n);
        self.touched.insert(owner);
        self.touched.extend(inner);
        self.anchor.get_or_insert(s.n);
        true
    }

    /// Moves one single-line statement that is small next to the rest of its
    /// block. A statement making up most of its block would drag the block's
    /// pairing along with it, which leaves the expected script up to the
    /// matcher's heuristics.
    fn move_stmt(&mut self, from_if: bool, within: bool) -> bool {
        let lens: HashMap<u32, usize> = self.src.bodies().into_iter().collect();
        let if_bodies: HashSet<u32> = self
            .src
            .stmts()
            .into_iter()
            .filter(|(_, _, s)| s.is_if())
            .flat_map(|(_, _, s)| s.bodies().into_iter().map(|(o, _)| o).collect::<Vec<_>>())
            .collect();
        let need = if within { 3 } else { 2 };
        let cands: Vec<_> = self
            .free_stmts(|s| s.bodies().is_empty())
            .into_iter()
            .filter(|(o, _, _)| lens[o] >= need && (!from_if || if_bodies.contains(o)))
            .collect();
        let Some((owner, i, s)) = self.pick(&cands) else { return false };
        let inner = self.src.owners_within(s.n);
        if inner.iter().any(|o| self.touched.contains(o)) {
            return false;
        }
        let mut rest = self.src.clone().body_mut(owner).unwrap().clone();
        rest.remove(i);
        if !within && 2 * text_size(std::slice::from_ref(&s)) >= text_size(&rest) {
            return false;
        }
        if within {
            let len = lens[&owner];
            let targets: Vec<usize> = (0..len).filter(|&j| j.abs_diff(i) >= 2).collect();
            let Some(j) = self.pick(&targets) else { return false };
            let b = self.dst.body_mut(owner).unwrap();
            let moved = b.remove(i);
            b.insert(j, moved);
            self.touched.insert(owner);
        } else {
            let dests: Vec<u32> =
                self.free_bodies(1).into_iter().filter(|o| *o != owner && !inner.contains(o)).collect();
            let Some(to) = self.pick(&dests) else { return false };
            let b = self.dst.body_mut(owner).unwrap();
            let at = b.iter().position(|x| x.n == s.n).unwrap();
            let moved = b.remove(at);
            let tb = self.dst.body_mut(to).unwrap();
            let at = self.rng.gen_range(0..=tb.len());
            tb.insert(at, moved);
            self.touched.insert(owner);
            self.touched.insert(to);
        }
        self.touched.extend(inner);
        self.anchor.get_or_insert(s.n);
        true
    }

    fn edit_stmt(&mut self, pred: fn(&Stmt) -> bool, apply: fn(&mut Stmt)) -> bool {
        let Some((owner, _, s)) = self.pick(&self.free_stmts(pred)) else { return false };
        apply(self.dst.stmt_mut(s.n).unwrap());
        self.touched.insert(owner);
        self.touched.insert(s.n);
        self.anchor.get_or_insert(s.n);
        true
    }

    fn apply(&mut self, focus: Focus) -> bool {
        match focus {
            Focus::Identity | Focus::NoDestination | Focus::NoSource => true,
            Focus::InsertSimple => self.insert(simple),
            Focus::InsertIf => self.insert(|p, rng| {
                let n = p.fresh();
                let b = body(p, rng, 2, 1);
                let cn = p.fresh();
                let e = body(p, rng, 2, 1);
                Stmt { n, k: K::If { a: lit(n), boolean: false, body: b, elifs: vec![], els: Some(Clause { n: cn, a: 0, body: e }) } }
            }),
            Focus::InsertTry => self.insert(|p, rng| {
                let n = p.fresh();
                let b = body(p, rng, 2, 1);
                let hn = p.fresh();
                let h = body(p, rng, 2, 1);
                Stmt { n, k: K::Try { body: b, handler: Clause { n: hn, a: 0, body: h } } }
            }),
            Focus::InsertAssert => self.insert(|p, _| {
                let n = p.fresh();
                Stmt { n, k: K::Assert { a: lit(n), s: format!("s{n}") } }
            }),
            Focus::DeleteAny => self.delete(|s| !matches!(s.k, K::If { .. } | K::Try { .. })),
            Focus::DeleteIf => self.delete(|s| s.is_if()),
            Focus::DeleteTry => self.delete(|s| matches!(s.k, K::Try { .. })),
            Focus::MoveAcross => self.move_stmt(false, false),
            Focus::MoveOutOfIf => self.move_stmt(true, false),
            Focus::MoveWithin => self.move_stmt(false, true),
            Focus::UpdateNumber => self.edit_stmt(
                |s| matches!(s.k, K::Assign { .. } | K::Aug { .. } | K::Call { .. } | K::Assert { .. } | K::If { .. }),
                |s| match &mut s.k {
                    K::Assign { a, .. } | K::Aug { a, .. } | K::Assert { a, .. } | K::If { a, .. } => *a += 500_000,
                    K::Call { b, .. } => *b += 500_000,
                    _ => unreachable!(),
                },
            ),
            Focus::UpdateString => self.edit_stmt(
                |s| matches!(s.k, K::Assign { named: false, .. } | K::Str { named: false, .. } | K::Assert { .. }),
                |s| match &mut s.k {
                    K::Assign { s, .. } | K::Str { s, .. } | K::Assert { s, .. } => s.replace_range(0..1, "t"),
                    _ => unreachable!(),
                },
            ),
            Focus::UpdateOperator => self.edit_stmt(
                |s| matches!(s.k, K::Aug { .. }),
                |s| {
                    if let K::Aug { op, .. } = &mut s.k {
                        *op = '-';
                    }
                },
            ),
            Focus::Magic => self.edit_stmt(
                |s| matches!(s.k, K::Assign { named: false, .. } | K::Str { named: false, .. }),
                |s| match &mut s.k {
                    K::Assign { named, .. } | K::Str { named, .. } => *named = true,
                    _ => unreachable!(),
                },
            ),
            Focus::AddElse => self.clause_edit(|s, p| {
                let K::If { els, .. } = &mut s.k else { return false };
                if els.is_some() {
                    return false;
                }
                let cn = p.fresh();
                let n2 = p.fresh();
                *els = Some(Clause { n: cn, a: 0, body: vec![Stmt { n: n2, k: K::Call { a: lit(n2), b: lit(n2) + 1 } }] });
                true
            }),
            Focus::RemoveElse => self.clause_edit(|s, _| {
                let K::If { els, .. } = &mut s.k else { return false };
                els.take().is_some()
            }),
            Focus::AddElif => self.clause_edit(|s, p| {
                let K::If { elifs, .. } = &mut s.k else { return false };
                let cn = p.fresh();
                let n2 = p.fresh();
                elifs.push(Clause { n: cn, a: lit(cn), body: vec![Stmt { n: n2, k: K::Aug { a: lit(n2), op: '*' } }] });
                true
            }),
            Focus::RemoveElif => self.clause_edit(|s, _| {
                let K::If { elifs, .. } = &mut s.k else { return false };
                elifs.pop().is_some()
            }),
        }
    }

    /// Structural edit of one `if` statement's clauses.
    fn clause_edit(&mut self, f: fn(&mut Stmt, &mut Program) -> bool) -> bool {
        let cands = self.free_stmts(|s| s.is_if());
        let Some((owner, _, s)) = self.pick(&cands) else { return false };
        let inner = self.src.owners_within(s.n);
        if inner.iter().any(|o| self.touched.contains(o)) {
            return false;
        }
        let mut target = self.dst.stmt_mut(s.n).unwrap().clone();
        if !f(&mut target, &mut self.dst) {
            return false;
        }
        *self.dst.stmt_mut(s.n).unwrap() = target;
        self.touched.insert(owner);
        self.touched.extend(inner);
        self.anchor.get_or_insert(s.n);
        true
    }
}

/// Builds one fixture around `focus`, or `None` when the random base program
/// offers no target for it or the expected script is ambiguous.
pub fn generate(seed: u64, focus: Focus) -> Option<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = base_program(&mut rng);
    let mut ed = Editor { src: &src, dst: src.clone(), touched: HashSet::new(), rng: &mut rng, anchor: None };
    if !ed.apply(focus) {
        return None;
    }
    if !matches!(focus, Focus::Identity | Focus::NoDestination | Focus::NoSource) {
        let extra = ed.rng.gen_range(0..=2);
        for _ in 0..extra {
            let f = *MOVE_FREE.choose(ed.rng).unwrap();
            let f = if MOVE_FREE.contains(&focus) { f } else { *ALL_FOCI[3..].choose(ed.rng).unwrap() };
            ed.apply(f);
        }
    }
    let anchor = ed.anchor;
    let dst = ed.dst;
    let (src_text, src_pos) = src.render();
    let (dst_text, dst_pos) = dst.render();
    let lines = src_text.lines().count() as u32;
    let jitter: i64 = rng.gen_range(-4..=4);
    let base = anchor.and_then(|a| src_pos.get(&a).or(dst_pos.get(&a))).map_or_else(|| rng.gen_range(1..=lines), |p| p.0);
    let comment_line = (base as i64 + jitter).clamp(1, lines as i64 + 3) as u32;
    let fixture = Fixture {
        name: format!("{focus:?}#{seed}"),
        source: (focus != Focus::NoSource).then_some(src_text),
        destination: (focus != Focus::NoDestination).then_some(dst_text),
        comment_line,
        src_pos,
        dst_pos,
    };
    fixture.expected().ok()?;
    Some(fixture)
}

/// `per_focus` fixtures for every focus, deterministic.
pub fn corpus(per_focus: usize) -> Vec<Fixture> {
    let mut out = Vec::new();
    for (fi, &focus) in ALL_FOCI.iter().enumerate() {
        let mut got = 0;
        let mut seed = 1_000 * fi as u64;
        while got < per_focus {
            if let Some(f) = generate(seed, focus) {
                out.push(f);
                got += 1;
            }
            seed += 1;
            assert!(seed < 1_000 * fi as u64 + 900, "cannot build fixtures for {focus:?}");
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Concrete tree and oracle

#[derive(Debug, Clone)]
pub struct ONode {
    pub kind: String,
    pub value: String,
    pub field: Option<String>,
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

pub fn concrete_tree(text: &str) -> Vec<ONode> {
    let mut parser = tree_sitter::Parser::new();
    parser.set_language(&tree_sitter_python::LANGUAGE.into()).unwrap();
    let tree = parser.parse(text, None).unwrap();
    assert!(!tree.root_node().has_error(), "fixture does not parse:\n{text}");
    let mut nodes = Vec::new();
    walk(tree.root_node(), None, None, text.as_bytes(), &mut nodes);
    nodes
}

fn unquote(raw: &str) -> String {
    let body = raw.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    for q in ["\"\"\"", "'''", "\"", "'"] {
        if body.len() >= 2 * q.len() && body.starts_with(q) && body.ends_with(q) {
            return body[q.len()..body.len() - q.len()].to_string();
        }
    }
    body.to_string()
}

fn walk(node: tree_sitter::Node, parent: Option<usize>, field: Option<&str>, src: &[u8], out: &mut Vec<ONode>) -> usize {
    let id = out.len();
    let s = node.start_position();
    let e = node.end_position();
    let end_line = if e.column == 0 && e.row > s.row { e.row } else { e.row + 1 } as u32;
    let text = node.utf8_text(src).unwrap_or("").to_string();
    out.push(ONode {
        kind: node.kind().to_string(),
        value: String::new(),
        field: field.map(str::to_string),
        line: s.row as u32 + 1,
        col: s.column as u32,
        end_line,
        parent,
        children: vec![],
    });
    if node.kind() == "string" {
        out[id].value = unquote(&text);
        return id;
    }
    let mut ops = Vec::new();
    for i in 0..node.child_count() {
        let child = node.child(i).unwrap();
        let f = node.field_name_for_child(i);
        if child.is_named() && child.kind() != "line_continuation" {
            let c = walk(child, Some(id), f, src, out);
            out[id].children.push(c);
        } else if !child.is_named() && matches!(f, Some("operator" | "operators")) {
            ops.push(child.utf8_text(src).unwrap_or("").to_string());
        }
    }
    out[id].value = if !ops.is_empty() {
        ops.join(" ")
    } else if node.child_count() == 0 {
        text
    } else {
        String::new()
    };
    id
}

const CLAUSES: [&str; 3] = ["elif_clause", "else_clause", "except_clause"];

fn is_unit_root(t: &[ONode], i: usize) -> bool {
    CLAUSES.contains(&t[i].kind.as_str())
        || t[i].parent.is_some_and(|p| matches!(t[p].kind.as_str(), "module" | "block"))
}

fn own_nodes(t: &[ONode], root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        out.push(n);
        for &c in t[n].children.iter().rev() {
            if !is_unit_root(t, c) {
                stack.push(c);
            }
        }
    }
    out
}

fn unit_root(t: &[ONode], at: (u32, u32)) -> Result<usize, String> {
    let hits: Vec<usize> = (0..t.len()).filter(|&i| (t[i].line, t[i].col) == at && is_unit_root(t, i)).collect();
    match hits.as_slice() {
        [one] => Ok(*one),
        _ => Err(format!("no unique unit root at {at:?}")),
    }
}

fn subtree(t: &[ONode], root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        out.push(n);
        stack.extend(t[n].children.iter().rev());
    }
    out
}

/// Every maximum-length increasing subsequence of `v`, as index sets.
fn all_longest_increasing(v: &[usize]) -> Vec<BTreeSet<usize>> {
    assert!(v.len() <= 16, "brute force over {} siblings", v.len());
    let mut best = 0;
    let mut sets = Vec::new();
    for mask in 0u32..(1 << v.len()) {
        let picked: Vec<usize> = (0..v.len()).filter(|i| mask & (1 << i) != 0).collect();
        if !picked.windows(2).all(|w| v[w[0]] < v[w[1]]) {
            continue;
        }
        match picked.len().cmp(&best) {
            std::cmp::Ordering::Greater => {
                best = picked.len();
                sets = vec![picked.into_iter().collect()];
            }
            std::cmp::Ordering::Equal => sets.push(picked.into_iter().collect()),
            std::cmp::Ordering::Less => {}
        }
    }
    sets
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Act {
    Delete,
    Update,
    Move,
}

fn oracle(f: &Fixture) -> Result<[u32; 27], String> {
    let mut v = [0u32; 27];
    v[idx("hasOldFile")] = f.source.is_some() as u32;
    v[idx("hasNewFile")] = f.destination.is_some() as u32;
    let anchor_text = f.source.as_deref().or(f.destination.as_deref()).ok_or("no revision")?;
    let lines = (anchor_text.lines().count() as u32).max(1);
    let anchor = f.comment_line.min(lines);
    let (lo, hi) = (anchor.saturating_sub(10).max(1), (anchor + 10).min(lines));
    v[idx("commentLOC")] = anchor;

    let Some(src_text) = f.source.as_deref() else { return Ok(v) };
    let src = concrete_tree(src_text);
    const DECISIONS: [&str; 9] = [
        "if_statement",
        "elif_clause",
        "for_statement",
        "while_statement",
        "boolean_operator",
        "except_clause",
        "except_group_clause",
        "conditional_expression",
        "if_clause",
    ];
    v[idx("cyclomaticComplexity")] = 1 + src.iter().filter(|n| DECISIONS.contains(&n.kind.as_str())).count() as u32;
    let Some(dst_text) = f.destination.as_deref() else { return Ok(v) };
    let dst = concrete_tree(dst_text);

    // Mapping by construction.
    let mut s2d: Vec<Option<usize>> = vec![None; src.len()];
    let mut d2s: Vec<Option<usize>> = vec![None; dst.len()];
    s2d[0] = Some(0);
    d2s[0] = Some(0);
    for (id, &sp) in &f.src_pos {
        let Some(&dp) = f.dst_pos.get(id) else { continue };
        let (ls, ld) = (own_nodes(&src, unit_root(&src, sp)?), own_nodes(&dst, unit_root(&dst, dp)?));
        if ls.len() != ld.len() {
            return Err(format!("unit {id} changed shape"));
        }
        for (&a, &b) in ls.iter().zip(&ld) {
            if src[a].kind == dst[b].kind {
                s2d[a] = Some(b);
                d2s[b] = Some(a);
            } else if !(src[a].kind == "string" && dst[b].kind == "identifier") {
                return Err(format!("unit {id}: {} became {}", src[a].kind, dst[b].kind));
            }
        }
    }

    let mut moved = vec![false; src.len()];
    for s in 0..src.len() {
        let Some(d) = s2d[s] else { continue };
        if let (Some(ps), Some(pd)) = (src[s].parent, dst[d].parent) {
            if s2d[ps] != Some(pd) {
                moved[s] = true;
            }
        }
    }
    for p in 0..src.len() {
        let Some(q) = s2d[p] else { continue };
        let kept: Vec<(usize, usize)> = src[p]
            .children
            .iter()
            .filter_map(|&c| {
                let dc = s2d[c]?;
                (dst[dc].parent == Some(q)).then(|| (c, dst[q].children.iter().position(|&x| x == dc).unwrap()))
            })
            .collect();
        let order: Vec<usize> = kept.iter().map(|k| k.1).collect();
        let runs = all_longest_increasing(&order);
        if runs.len() > 1 {
            return Err("sibling reordering is ambiguous".into());
        }
        for (i, (c, _)) in kept.iter().enumerate() {
            if !runs[0].contains(&i) {
                moved[*c] = true;
            }
        }
    }

    let act = |s: usize| -> Option<Act> {
        match s2d[s] {
            None => Some(Act::Delete),
            Some(d) if src[s].value != dst[d].value => Some(Act::Update),
            Some(_) if moved[s] => Some(Act::Move),
            Some(_) => None,
        }
    };
    let in_rcr = |s: usize| src[s].line <= hi && src[s].end_line >= lo;
    let lands_in_rcr = |d: usize| dst[d].parent.and_then(|p| d2s[p]).is_some_and(in_rcr);
    let if_like = |k: &str| matches!(k, "if_statement" | "elif_clause" | "else_clause");
    let if_block = |s: usize| src[s].kind == "block" && src[s].parent.is_some_and(|p| if_like(&src[p].kind));

    for d in (0..dst.len()).filter(|&d| d2s[d].is_none()) {
        v[idx("anyInserted")] += 1;
        if lands_in_rcr(d) {
            v[idx("anythingInsertedIntoLine")] += 1;
        }
        match dst[d].kind.as_str() {
            "if_statement" | "elif_clause" => v[idx("insertedIfConditions")] += 1,
            "else_clause" => v[idx("elseInserted")] += 1,
            "assert_statement" => v[idx("insertedAssertConditions")] += 1,
            "try_statement" => v[idx("insertedTryCatch")] += 1,
            _ => {}
        }
    }
    for s in 0..src.len() {
        match act(s) {
            Some(Act::Delete) => {
                v[idx("anyDeleted")] += 1;
                if in_rcr(s) {
                    v[idx("anythingInLineDeleted")] += 1;
                }
                match src[s].kind.as_str() {
                    "if_statement" | "elif_clause" => v[idx("deletedIfConditions")] += 1,
                    "else_clause" => v[idx("elseDeleted")] += 1,
                    "try_statement" => v[idx("removedTryCatch")] += 1,
                    _ => {}
                }
            }
            Some(Act::Update) => {
                v[idx("updatedSrcs")] += 1;
                if in_rcr(s) {
                    v[idx("anythingInLineUpdated")] += 1;
                }
                if src[s].kind == "string" {
                    v[idx("stringsUpdated")] += 1;
                }
            }
            Some(Act::Move) => {
                v[idx("getMovedSrcs")] += 1;
                if in_rcr(s) {
                    v[idx("anythingInLineMoved")] += 1;
                }
                if lands_in_rcr(s2d[s].unwrap()) {
                    v[idx("anythingMovedIntoLine")] += 1;
                }
                if if_block(s) || src[s].parent.is_some_and(if_block) {
                    v[idx("movedBlocksInIfConditions")] += 1;
                }
            }
            None => {}
        }
    }

    // String literal whose slot now holds a name.
    for s in 0..src.len() {
        if src[s].kind != "string" || s2d[s].is_some() {
            continue;
        }
        let Some(dp) = src[s].parent.and_then(|p| s2d[p]) else { continue };
        let slot = match &src[s].field {
            Some(fl) => dst[dp].children.iter().copied().find(|&c| dst[c].field.as_deref() == Some(fl)),
            None => {
                let i = src[src[s].parent.unwrap()].children.iter().position(|&c| c == s).unwrap();
                dst[dp].children.get(i).copied()
            }
        };
        if slot.is_some_and(|d| matches!(dst[d].kind.as_str(), "identifier" | "attribute")) {
            v[idx("magicStringsReplaced")] += 1;
        }
    }

    let has_update = |r: usize| subtree(&src, r).into_iter().any(|n| act(n) == Some(Act::Update));
    for s in 0..src.len() {
        match src[s].kind.as_str() {
            "assignment" | "augmented_assignment" if s2d[s].is_some() => {
                let rhs = src[s].children.iter().copied().find(|&c| src[c].field.as_deref() == Some("right"));
                if rhs.is_some_and(has_update) {
                    v[idx("updatedValueAssignments")] += 1;
                }
            }
            "argument_list" if src[s].parent.is_some_and(|p| src[p].kind == "call") => {
                v[idx("updatedFunctionArguments")] += src[s].children.iter().filter(|&&a| has_update(a)).count() as u32;
            }
            _ => {}
        }
    }

    // Whole lines of the range covered by moves or deletes.
    for line in lo..=hi {
        let leaves: Vec<usize> =
            (0..src.len()).filter(|&i| src[i].children.is_empty() && src[i].line <= line && src[i].end_line >= line).collect();
        if leaves.is_empty() {
            continue;
        }
        let covered_by_move = |l: usize| {
            s2d[l].is_some() && {
                let mut cur = Some(l);
                let mut hit = false;
                while let Some(c) = cur {
                    hit |= act(c) == Some(Act::Move);
                    cur = src[c].parent;
                }
                hit
            }
        };
        if leaves.iter().all(|&l| covered_by_move(l)) {
            v[idx("entireLineMoved")] += 1;
        }
        if leaves.iter().all(|&l| act(l) == Some(Act::Delete)) {
            v[idx("entireLineDeleted")] += 1;
        }
    }

    // Node-multiset cross-check: per kind, dst count minus src count equals
    // inserts minus deletes of that kind.
    let mut delta: HashMap<&str, i64> = HashMap::new();
    for n in &dst {
        *delta.entry(n.kind.as_str()).or_default() += 1;
    }
    for n in &src {
        *delta.entry(n.kind.as_str()).or_default() -= 1;
    }
    for d in (0..dst.len()).filter(|&d| d2s[d].is_none()) {
        *delta.entry(dst[d].kind.as_str()).or_default() -= 1;
    }
    for s in (0..src.len()).filter(|&s| s2d[s].is_none()) {
        *delta.entry(src[s].kind.as_str()).or_default() += 1;
    }
    if let Some((k, _)) = delta.iter().find(|(_, &x)| x != 0) {
        return Err(format!("node multiset of kind {k} disagrees with the edit script"));
    }
    Ok(v)
}
