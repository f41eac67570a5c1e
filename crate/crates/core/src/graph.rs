//! Directed graphs, incidence operators and Laplacians.
//!
//! Edge `e = (u, v)` has head `u` and tail `v`. With `B = H - T` the signed
//! incidence matrix, the directed Laplacian is `B^T W H` and the undirected
//! Laplacian of `und(G)` is `B^T W B`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Edge-indexed nonnegative weights aligned with a fixed edge order.
/// A zero entry marks a logically deleted edge.
pub type WeightVector = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedGraph {
    n: usize,
    heads: Vec<usize>,
    tails: Vec<usize>,
    weights: Vec<f64>,
}

/// Builds a canonical graph: edges sorted by `(head, tail)` with parallel
/// copies merged by summing their weights.
pub fn build_graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<DirectedGraph> {
    for (i, &(u, v, w)) in edges.iter().enumerate() {
        if u >= n {
            return Err(Error::VertexOutOfRange { index: i, vertex: u, n });
        }
        if v >= n {
            return Err(Error::VertexOutOfRange { index: i, vertex: v, n });
        }
        if u == v {
            return Err(Error::SelfLoop { index: i, vertex: u });
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveWeight { index: i, weight: w });
        }
    }
    let mut sorted: Vec<(usize, usize, f64)> = edges.to_vec();
    sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut heads = Vec::with_capacity(sorted.len());
    let mut tails = Vec::with_capacity(sorted.len());
    let mut weights: Vec<f64> = Vec::with_capacity(sorted.len());
    for (u, v, w) in sorted {
        if let (Some(&h), Some(&t)) = (heads.last(), tails.last()) {
            if h == u && t == v {
                *weights.last_mut().unwrap() += w;
                continue;
            }
        }
        heads.push(u);
        tails.push(v);
        weights.push(w);
    }
    Ok(DirectedGraph { n, heads, tails, weights })
}

impl DirectedGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.heads.len()
    }

    pub fn head(&self, e: usize) -> usize {
        self.heads[e]
    }

    pub fn tail(&self, e: usize) -> usize {
        self.tails[e]
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn tails(&self) -> &[usize] {
        &self.tails
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.m()).map(move |e| (self.heads[e], self.tails[e], self.weights[e]))
    }

    pub fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        self.edges().collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same topology, new weights. Entries must be nonnegative; zero entries
    /// are kept as placeholders so edge indices stay aligned.
    pub fn with_weights(&self, w: &[f64]) -> Result<DirectedGraph> {
        check_len(self.m(), w.len())?;
        if let Some(i) = w.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::NonPositiveWeight { index: i, weight: w[i] });
        }
        Ok(DirectedGraph {
            n: self.n,
            heads: self.heads.clone(),
            tails: self.tails.clone(),
            weights: w.to_vec(),
        })
    }

    /// Drops zero-weight edges. Returns the compacted graph and, for each of
    /// its edges, the index of the originating edge.
    pub fn support(&self) -> (DirectedGraph, Vec<usize>) {
        let keep: Vec<usize> = (0..self.m()).filter(|&e| self.weights[e] > 0.0).collect();
        let g = DirectedGraph {
            n: self.n,
            heads: keep.iter().map(|&e| self.heads[e]).collect(),
            tails: keep.iter().map(|&e| self.tails[e]).collect(),
            weights: keep.iter().map(|&e| self.weights[e]).collect(),
        };
        (g, keep)
    }

    /// Subgraph on an edge subset, same vertex set.
    pub fn edge_subgraph(&self, edges: &[usize]) -> DirectedGraph {
        DirectedGraph {
            n: self.n,
            heads: edges.iter().map(|&e| self.heads[e]).collect(),
            tails: edges.iter().map(|&e| self.tails[e]).collect(),
            weights: edges.iter().map(|&e| self.weights[e]).collect(),
        }
    }

    /// Number of nonzero weights.
    pub fn nnz(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_positive_weight(&self) -> f64 {
        self.weights
            .iter()
            .cloned()
            .filter(|&w| w > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `B^T w`: `+w` at the head, `-w` at the tail.
pub fn degree_imbalance(g: &DirectedGraph) -> Vec<f64> {
    imbalance_of(g, g.weights())
}

/// `B^T x` for an arbitrary edge vector.
pub fn imbalance_of(g: &DirectedGraph, x: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; g.n()];
    for e in 0..g.m() {
        d[g.heads[e]] += x[e];
        d[g.tails[e]] -= x[e];
    }
    d
}

/// `|B|^T x`: total incident weight per vertex.
pub fn abs_degree_of(g: &DirectedGraph, x: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; g.n()];
    for e in 0..g.m() {
        d[g.heads[e]] += x[e];
        d[g.tails[e]] += x[e];
    }
    d
}

pub fn is_eulerian(g: &DirectedGraph, tol: f64) -> bool {
    let d = degree_imbalance(g);
    let linf = d.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    linf <= tol * g.total_weight()
}

/// `vL x = B^T W H x` without forming the matrix.
pub fn directed_laplacian_apply(g: &DirectedGraph, x: &[f64]) -> Result<Vec<f64>> {
    check_len(g.n(), x.len())?;
    Ok(directed_apply_w(g, g.weights(), x))
}

/// `L x = B^T W B x` for `und(G)`.
pub fn undirected_laplacian_apply(g: &DirectedGraph, x: &[f64]) -> Result<Vec<f64>> {
    check_len(g.n(), x.len())?;
    Ok(undirected_apply_w(g, g.weights(), x))
}

pub(crate) fn directed_apply_w(g: &DirectedGraph, w: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; g.n()];
    for e in 0..g.m() {
        let f = w[e] * x[g.heads[e]];
        y[g.heads[e]] += f;
        y[g.tails[e]] -= f;
    }
    y
}

pub(crate) fn directed_apply_transpose_w(g: &DirectedGraph, w: &[f64], x: &[f64]) -> Vec<f64> {
    // (B^T W H)^T x = H^T W B x
    let mut y = vec![0.0; g.n()];
    for e in 0..g.m() {
        y[g.heads[e]] += w[e] * (x[g.heads[e]] - x[g.tails[e]]);
    }
    y
}

pub(crate) fn undirected_apply_w(g: &DirectedGraph, w: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; g.n()];
    for e in 0..g.m() {
        let f = w[e] * (x[g.heads[e]] - x[g.tails[e]]);
        y[g.heads[e]] += f;
        y[g.tails[e]] -= f;
    }
    y
}

/// Bipartite lift: edge `(u, v)` becomes `(u, v + n)`.
#[derive(Debug, Clone)]
pub struct Lift {
    pub graph: DirectedGraph,
    /// `edge_map[lifted edge] = original edge`.
    pub edge_map: Vec<usize>,
    pub base_n: usize,
}

pub fn bipartite_lift(g: &DirectedGraph) -> Lift {
    let n = g.n();
    // (u, v) -> (u, v + n) keeps the (head, tail) sort order, so the map is
    // the identity; it is still recorded explicitly for consumers.
    let graph = DirectedGraph {
        n: 2 * n,
        heads: g.heads.clone(),
        tails: g.tails.iter().map(|&v| v + n).collect(),
        weights: g.weights.clone(),
    };
    Lift { graph, edge_map: (0..g.m()).collect(), base_n: n }
}

/// True when every edge goes from `[0, n/2)` to `[n/2, n)`.
pub fn is_bipartite_lift(g: &DirectedGraph) -> bool {
    if g.n() % 2 != 0 {
        return false;
    }
    let half = g.n() / 2;
    g.edges().all(|(u, v, _)| u < half && v >= half)
}

/// Undirected adjacency in CSR form; each undirected incidence is listed at
/// both endpoints, ordered by edge index.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub offsets: Vec<usize>,
    pub nbr: Vec<usize>,
    pub eid: Vec<usize>,
}

impl Adjacency {
    pub fn new(g: &DirectedGraph) -> Self {
        Self::from_edges(g.n(), g.heads(), g.tails(), |_| true)
    }

    pub fn from_edges(
        n: usize,
        heads: &[usize],
        tails: &[usize],
        keep: impl Fn(usize) -> bool,
    ) -> Self {
        let mut deg = vec![0usize; n + 1];
        for e in 0..heads.len() {
            if keep(e) {
                deg[heads[e]] += 1;
                deg[tails[e]] += 1;
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + deg[v];
        }
        let mut fill = offsets.clone();
        let mut nbr = vec![0usize; offsets[n]];
        let mut eid = vec![0usize; offsets[n]];
        for e in 0..heads.len() {
            if !keep(e) {
                continue;
            }
            let (u, v) = (heads[e], tails[e]);
            nbr[fill[u]] = v;
            eid[fill[u]] = e;
            fill[u] += 1;
            nbr[fill[v]] = u;
            eid[fill[v]] = e;
            fill[v] += 1;
        }
        Adjacency { offsets, nbr, eid }
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.offsets[v]..self.offsets[v + 1]).map(move |i| (self.nbr[i], self.eid[i]))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }
}

/// Connected components of `und(G)` restricted to edges with positive weight.
/// Returns `(count, label per vertex)`.
pub fn components(g: &DirectedGraph) -> (usize, Vec<usize>) {
    components_masked(g.n(), g.heads(), g.tails(), |e| g.weights[e] > 0.0)
}

pub(crate) fn components_masked(
    n: usize,
    heads: &[usize],
    tails: &[usize],
    keep: impl Fn(usize) -> bool,
) -> (usize, Vec<usize>) {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in 0..heads.len() {
        if keep(e) {
            let a = find(&mut parent, heads[e]);
            let b = find(&mut parent, tails[e]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    for v in 0..n {
        let r = find(&mut parent, v);
        if label[r] == usize::MAX {
            label[r] = count;
            count += 1;
        }
        label[v] = label[r];
    }
    (count, label)
}

pub fn is_connected(g: &DirectedGraph) -> bool {
    g.n() <= 1 || components(g).0 == 1
}

pub(crate) fn require_connected(g: &DirectedGraph) -> Result<()> {
    let (c, _) = components(g);
    if g.n() > 1 && c != 1 {
        return Err(Error::Disconnected { components: c });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    /// Tree edge indices, in BFS discovery order.
    pub edges: Vec<usize>,
    /// Parent vertex of each vertex; `None` for the root.
    pub parent: Vec<Option<usize>>,
    /// Edge joining each vertex to its parent.
    pub parent_edge: Vec<Option<usize>>,
    /// Vertices in BFS order starting at the root.
    pub order: Vec<usize>,
}

impl SpanningTree {
    /// Membership mask over the edges of a graph with `m` edges.
    pub fn mask(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        for &e in &self.edges {
            mask[e] = true;
        }
        mask
    }

    /// Checks that `edges` form a spanning tree of `und(g)` and rebuilds the
    /// parent structure from vertex 0.
    pub fn from_edges(g: &DirectedGraph, edges: &[usize]) -> Result<SpanningTree> {
        let n = g.n();
        if n == 0 {
            return Err(Error::NotATree("empty vertex set".into()));
        }
        if edges.len() + 1 != n {
            return Err(Error::NotATree(format!("{} edges for {} vertices", edges.len(), n)));
        }
        if let Some(&e) = edges.iter().find(|&&e| e >= g.m()) {
            return Err(Error::NotATree(format!("edge {e} out of range")));
        }
        let tree_heads: Vec<usize> = edges.iter().map(|&e| g.head(e)).collect();
        let tree_tails: Vec<usize> = edges.iter().map(|&e| g.tail(e)).collect();
        let adj = Adjacency::from_edges(n, &tree_heads, &tree_tails, |_| true);
        let t = bfs_tree(n, &adj, |i| edges[i]);
        if t.order.len() != n {
            return Err(Error::NotATree("edges do not span the vertex set".into()));
        }
        Ok(t)
    }
}

fn bfs_tree(n: usize, adj: &Adjacency, map_edge: impl Fn(usize) -> usize) -> SpanningTree {
    bfs_forest(n, adj, map_edge, false)
}

/// BFS from vertex 0, or from every unreached vertex in id order when
/// `all_roots` is set.
fn bfs_forest(n: usize, adj: &Adjacency, map_edge: impl Fn(usize) -> usize, all_roots: bool) -> SpanningTree {
    let mut parent = vec![None; n];
    let mut parent_edge = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut queue = VecDeque::new();
    let roots = if all_roots { n } else { n.min(1) };
    for root in 0..roots {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for (v, e) in adj.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    let ge = map_edge(e);
                    parent_edge[v] = Some(ge);
                    edges.push(ge);
                    queue.push_back(v);
                }
            }
        }
    }
    SpanningTree { edges, parent, parent_edge, order }
}

/// BFS spanning tree of `und(G)` from vertex 0, scanning incident edges in
/// index order. Zero-weight edges are ignored.
pub fn spanning_tree(g: &DirectedGraph) -> Result<SpanningTree> {
    require_connected(g)?;
    let adj = Adjacency::from_edges(g.n(), g.heads(), g.tails(), |e| g.weights[e] > 0.0);
    Ok(bfs_tree(g.n(), &adj, |e| e))
}

/// BFS spanning forest of `und(G)`, one tree per connected component, rooted
/// at the smallest vertex of each. Zero-weight edges are ignored.
pub fn spanning_forest(g: &DirectedGraph) -> SpanningTree {
    let adj = Adjacency::from_edges(g.n(), g.heads(), g.tails(), |e| g.weights[e] > 0.0);
    bfs_forest(g.n(), &adj, |e| e, true)
}

/// Union of random directed cycles with integer weights in `[1, u_max]`,
/// seeded by a Hamiltonian cycle so the result is connected. Cycles are
/// added until at least `m` distinct edges exist; a cycle is rejected if it
/// would push a merged weight above `u_max`.
pub fn random_eulerian(n: usize, m: usize, u_max: u64, seed: u64) -> Result<DirectedGraph> {
    if n < 2 {
        return Err(Error::InfeasibleParameters("need n >= 2".into()));
    }
    if m < n {
        return Err(Error::InfeasibleParameters(format!("m = {m} < n = {n}")));
    }
    if u_max < 1 {
        return Err(Error::InfeasibleParameters("weight cap must be >= 1".into()));
    }
    let max_edges = n * (n - 1);
    if m > max_edges {
        return Err(Error::InfeasibleParameters(format!(
            "m = {m} exceeds n(n-1) = {max_edges}"
        )));
    }
    let mut rng = stream(seed, &[0x6765_6e65]);
    let mut weight: std::collections::HashMap<(usize, usize), u64> = Default::default();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let c = rng.random_range(1..=u_max);
    for i in 0..n {
        weight.insert((perm[i], perm[(i + 1) % n]), c);
    }
    let budget = 200 * m + 10_000;
    let mut attempts = 0;
    while weight.len() < m {
        attempts += 1;
        if attempts > budget {
            return Err(Error::InfeasibleParameters(format!(
                "could not reach {m} edges under weight cap {u_max}"
            )));
        }
        let len = rng.random_range(2..=n);
        let (cyc, _) = perm.partial_shuffle(&mut rng, len);
        let cyc = cyc.to_vec();
        let used = (0..len)
            .map(|i| weight.get(&(cyc[i], cyc[(i + 1) % len])).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        if used >= u_max {
            continue;
        }
        let c = rng.random_range(1..=(u_max - used));
        for i in 0..len {
            *weight.entry((cyc[i], cyc[(i + 1) % len])).or_insert(0) += c;
        }
    }
    let edges: Vec<(usize, usize, f64)> =
        weight.into_iter().map(|((u, v), w)| (u, v, w as f64)).collect();
    build_graph(n, &edges)
}

/// Complete bidirected graph with unit weights.
pub fn complete_bidirected(n: usize) -> DirectedGraph {
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1));
    for u in 0..n {
        for v in 0..n {
            if u != v {
                edges.push((u, v, 1.0));
            }
        }
    }
    build_graph(n, &edges).expect("complete graph is valid")
}

/// Directed cycle `0 -> 1 -> ... -> n-1 -> 0` with unit weights.
pub fn directed_cycle(n: usize) -> DirectedGraph {
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    build_graph(n, &edges).expect("cycle is valid")
}

/// Undirected graph stored with `u < v` per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndirectedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl UndirectedGraph {
    /// Canonicalizes endpoints to `u < v` and merges parallel edges.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let canon: Vec<_> = edges.iter().map(|&(u, v, w)| (u.min(v), u.max(v), w)).collect();
        let g = build_graph(n, &canon)?;
        Ok(UndirectedGraph { n, edges: g.edge_list() })
    }

    /// Orientation with head = smaller vertex id.
    pub fn oriented(&self) -> DirectedGraph {
        DirectedGraph {
            n: self.n,
            heads: self.edges.iter().map(|e| e.0).collect(),
            tails: self.edges.iter().map(|e| e.1).collect(),
            weights: self.edges.iter().map(|e| e.2).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }
}

/// Random connected undirected graph: a random spanning path plus uniform
/// random extra pairs, integer weights in `[1, u_max]`.
pub fn random_undirected(n: usize, m: usize, u_max: u64, seed: u64) -> Result<UndirectedGraph> {
    if n < 2 || m + 1 < n || m > n * (n - 1) / 2 || u_max < 1 {
        return Err(Error::InfeasibleParameters(format!(
            "n = {n}, m = {m}, U = {u_max}"
        )));
    }
    let mut rng = stream(seed, &[0x756e_6469]);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut set = std::collections::BTreeMap::new();
    for i in 0..n - 1 {
        let (a, b) = (perm[i].min(perm[i + 1]), perm[i].max(perm[i + 1]));
        set.insert((a, b), rng.random_range(1..=u_max) as f64);
    }
    while set.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if !set.contains_key(&key) {
            set.insert(key, rng.random_range(1..=u_max) as f64);
        }
    }
    let edges: Vec<_> = set.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    UndirectedGraph::new(n, &edges)
}

/// Parses `n m` followed by `m` lines of `head tail weight`. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_edge_list(text: &str) -> Result<DirectedGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "empty input".into() })?;
    let mut it = header.split_whitespace();
    let n: usize = parse_field(it.next(), hl, "n")?;
    let m: usize = parse_field(it.next(), hl, "m")?;
    let mut edges = Vec::with_capacity(m);
    for (ln, line) in lines {
        let mut it = line.split_whitespace();
        let u: usize = parse_field(it.next(), ln, "head")?;
        let v: usize = parse_field(it.next(), ln, "tail")?;
        let w: f64 = parse_field(it.next(), ln, "weight")?;
        edges.push((u, v, w));
    }
    if edges.len() != m {
        return Err(Error::Parse {
            line: hl,
            msg: format!("header declares {m} edges, found {}", edges.len()),
        });
    }
    build_graph(n, &edges)
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse { line, msg: format!("missing {what}") })?;
    tok.parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad {what}: {tok:?}") })
}

/// Writes the edge-list format. Weights use the shortest representation that
/// parses back to the same `f64`.
pub fn format_edge_list(g: &DirectedGraph) -> String {
    let mut s = String::with_capacity(16 * g.m() + 16);
    let _ = writeln!(s, "{} {}", g.n(), g.m());
    for (u, v, w) in g.edges() {
        let _ = writeln!(s, "{u} {v} {w}");
    }
    s
}
