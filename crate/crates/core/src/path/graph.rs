//! Small directed-graph algorithms over dense `usize` vertices.

/// Adjacency lists; successors are kept sorted and unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Digraph {
    adj: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph {
            adj: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Digraph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        let need = a.max(b) + 1;
        if self.adj.len() < need {
            self.adj.resize(need, Vec::new());
        }
        if let Err(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].insert(pos, b);
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    /// Strongly connected components (Tarjan, iterative).
    pub fn scc(&self) -> Vec<Vec<usize>> {
        let n = self.adj.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut next = 0usize;
        let mut call: Vec<(usize, usize)> = Vec::new();
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            call.push((root, 0));
            while let Some(&mut (v, ref mut i)) = call.last_mut() {
                if *i == 0 {
                    index[v] = next;
                    low[v] = next;
                    next += 1;
                    stack.push(v);
                    on_stack[v] = true;
                }
                if *i < self.adj[v].len() {
                    let w = self.adj[v][*i];
                    *i += 1;
                    if index[w] == usize::MAX {
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
        comps
    }

    /// Linear-time acyclicity test.
    pub fn has_cycle(&self) -> bool {
        self.scc().iter().any(|c| c.len() > 1 || self.adj[c[0]].contains(&c[0]))
    }

    /// Every elementary cycle exactly once, rotated so that its smallest
    /// vertex comes first. Enumeration stops after `cap` cycles; the flag
    /// reports truncation.
    pub fn elementary_cycles(&self, cap: usize) -> (Vec<Vec<usize>>, bool) {
        let n = self.adj.len();
        let mut comp_of = vec![usize::MAX; n];
        for (ci, comp) in self.scc().iter().enumerate() {
            for &v in comp {
                comp_of[v] = ci;
            }
        }
        let mut out = Vec::new();
        let mut on_path = vec![false; n];
        for start in 0..n {
            let mut path = vec![start];
            on_path[start] = true;
            let mut iters: Vec<usize> = vec![0];
            while let Some(&v) = path.last() {
                let depth = path.len() - 1;
                let i = iters[depth];
                if i < self.adj[v].len() {
                    iters[depth] += 1;
                    let w = self.adj[v][i];
                    if w < start || comp_of[w] != comp_of[start] {
                        continue;
                    }
                    if w == start {
                        out.push(path.clone());
                        if out.len() >= cap {
                            return (out, true);
                        }
                    } else if !on_path[w] {
                        on_path[w] = true;
                        path.push(w);
                        iters.push(0);
                    }
                } else {
                    on_path[v] = false;
                    path.pop();
                    iters.pop();
                }
            }
        }
        (out, false)
    }

    /// Vertex-simple paths from `s` to `t` in lexicographic order, up to
    /// `cap` of them.
    pub fn simple_paths(&self, s: usize, t: usize, cap: usize) -> (Vec<Vec<usize>>, bool) {
        let mut out = Vec::new();
        if s == t {
            return (out, false);
        }
        let mut on_path = vec![false; self.adj.len()];
        let mut path = vec![s];
        on_path[s] = true;
        let mut iters = vec![0usize];
        while let Some(&v) = path.last() {
            let depth = path.len() - 1;
            let i = iters[depth];
            if v != t && i < self.adj[v].len() {
                iters[depth] += 1;
                let w = self.adj[v][i];
                if on_path[w] {
                    continue;
                }
                if w == t {
                    let mut p = path.clone();
                    p.push(w);
                    out.push(p);
                    if out.len() >= cap {
                        return (out, true);
                    }
                    continue;
                }
                on_path[w] = true;
                path.push(w);
                iters.push(0);
            } else {
                on_path[v] = false;
                path.pop();
                iters.pop();
            }
        }
        (out, false)
    }
}
