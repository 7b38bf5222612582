//! Hand-drawn control-flow graphs for small Python programs. Each node is a
//! basic block or branch test; the complexity is E - N + 2P.

pub struct FlowFixture {
    pub name: &'static str,
    pub source: &'static str,
    pub nodes: &'static [&'static str],
    pub edges: &'static [(&'static str, &'static str)],
}

impl FlowFixture {
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let at = |n: &str| self.nodes.iter().position(|x| *x == n).unwrap_or_else(|| panic!("{}: no node {n}", self.name));
        for (a, b) in self.edges {
            let (ra, rb) = (find(&mut parent, at(a)), find(&mut parent, at(b)));
            parent[ra] = rb;
        }
        (0..self.nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    pub fn mccabe(&self) -> i64 {
        self.edges.len() as i64 - self.nodes.len() as i64 + 2 * self.components() as i64
    }
}

pub const FIXTURES: [FlowFixture; 10] = [
    FlowFixture {
        name: "straight line",
        source: "a = 1\nb = a + 2\nprint(b)\n",
        nodes: &["entry", "exit"],
        edges: &[("entry", "exit")],
    },
    FlowFixture {
        name: "if without else",
        source: "x = read()\nif x > 0:\n    x = -x\nprint(x)\n",
        nodes: &["test", "negate", "print"],
        edges: &[("test", "negate"), ("test", "print"), ("negate", "print")],
    },
    FlowFixture {
        name: "if else",
        source: "if a:\n    b()\nelse:\n    c()\nd()\n",
        nodes: &["a", "b", "c", "d"],
        edges: &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
    },
    FlowFixture {
        name: "if elif else",
        source: "if a:\n    f()\nelif b:\n    g()\nelse:\n    h()\nk()\n",
        nodes: &["a", "f", "b", "g", "h", "k"],
        edges: &[("a", "f"), ("a", "b"), ("f", "k"), ("b", "g"), ("b", "h"), ("g", "k"), ("h", "k")],
    },
    FlowFixture {
        name: "while loop",
        source: "i = 0\nwhile i < n:\n    i += 1\ndone()\n",
        nodes: &["init", "test", "step", "done"],
        edges: &[("init", "test"), ("test", "step"), ("step", "test"), ("test", "done")],
    },
    FlowFixture {
        name: "for with nested if",
        source: "for x in xs:\n    if x:\n        use(x)\nend()\n",
        nodes: &["head", "test", "use", "end"],
        edges: &[("head", "test"), ("head", "end"), ("test", "use"), ("test", "head"), ("use", "head")],
    },
    FlowFixture {
        name: "short-circuit and",
        source: "if a and b:\n    f()\ng()\n",
        nodes: &["a", "b", "f", "g"],
        edges: &[("a", "b"), ("a", "g"), ("b", "f"), ("b", "g"), ("f", "g")],
    },
    FlowFixture {
        name: "try except",
        source: "try:\n    risky()\nexcept ValueError:\n    recover()\nfinish()\n",
        nodes: &["risky", "recover", "finish"],
        edges: &[("risky", "recover"), ("risky", "finish"), ("recover", "finish")],
    },
    FlowFixture {
        name: "conditional expression",
        source: "y = a if c else b\n",
        nodes: &["c", "a", "b", "assign"],
        edges: &[("c", "a"), ("c", "b"), ("a", "assign"), ("b", "assign")],
    },
    FlowFixture {
        name: "loop with early return",
        source: "def find(xs, t):\n    for x in xs:\n        if x == t or x is None:\n            return x\n    return None\n",
        nodes: &["head", "eq", "none", "ret_x", "ret_none", "exit"],
        edges: &[
            ("head", "eq"),
            ("head", "ret_none"),
            ("eq", "ret_x"),
            ("eq", "none"),
            ("none", "ret_x"),
            ("none", "head"),
            ("ret_x", "exit"),
            ("ret_none", "exit"),
        ],
    },
];
