//! Low-diameter partitions: region growing, weight-bucketed effective
//! resistance decompositions, and a spectral expander decomposition.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::graph::{components_masked, Adjacency, DirectedGraph};
use crate::report::VerificationReport;
use crate::resistance::er_overestimate_edges;
use crate::rng::stream;
use crate::solver::{SolverHandle, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecompositionKind {
    #[serde(rename = "er")]
    Er,
    #[serde(rename = "expander")]
    Expander,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// Endpoints of the piece's edges, sorted.
    pub vertices: Vec<usize>,
    /// Edge indices, sorted.
    pub edges: Vec<usize>,
    /// Certified spectral parameter for expander pieces; `None` for ER pieces.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi: Option<f64>,
}

impl Piece {
    fn from_edges(g: &DirectedGraph, mut edges: Vec<usize>, phi: Option<f64>) -> Piece {
        edges.sort_unstable();
        let mut vertices: Vec<usize> = edges.iter().flat_map(|&e| [g.head(e), g.tail(e)]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        Piece { vertices, edges, phi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub kind: DecompositionKind,
    pub pieces: Vec<Piece>,
    /// Edges of the domain not covered by any piece.
    pub cut_edges: Vec<usize>,
    /// The edges that were decomposed.
    pub domain: Vec<usize>,
    /// `rho` for ER decompositions, `phi` for expander decompositions.
    pub quality: f64,
    /// Weight ratio `r`.
    pub ratio: f64,
    /// Vertex coverage bound `J`.
    pub coverage: f64,
}

impl Decomposition {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("decomposition serializes")
    }

    /// Largest number of pieces sharing a vertex.
    pub fn max_coverage(&self, n: usize) -> usize {
        let mut cnt = vec![0usize; n];
        for p in &self.pieces {
            for &v in &p.vertices {
                cnt[v] += 1;
            }
        }
        cnt.into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    v: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, id).
        other.dist.total_cmp(&self.dist).then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Region growing over the edges selected by `active`, with lengths `len`
/// and weights `wbar` (zero allowed). Returns a partition label per vertex.
///
/// Each ball is grown from the lowest unassigned vertex and stops at the
/// first radius `r` with `d * cut(r) <= vol(r)`, where `vol` counts
/// `wbar^T len / n` plus the (fractional) length-weight inside the ball.
pub fn region_grow_masked(
    g: &DirectedGraph,
    len: &[f64],
    wbar: &[f64],
    d: f64,
    active: impl Fn(usize) -> bool,
) -> Vec<usize> {
    let n = g.n();
    let adj = Adjacency::from_edges(n, g.heads(), g.tails(), &active);
    let total: f64 = (0..g.m()).filter(|&e| active(e)).map(|e| wbar[e] * len[e]).sum();
    let v0 = if n > 0 { total / n as f64 } else { 0.0 };
    let mut label = vec![usize::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut in_ball = vec![false; n];
    let mut next_part = 0;
    for seed in 0..n {
        if label[seed] != usize::MAX {
            continue;
        }
        let part = next_part;
        next_part += 1;
        let mut touched = vec![seed];
        let mut heap = BinaryHeap::new();
        dist[seed] = 0.0;
        heap.push(HeapItem { dist: 0.0, v: seed });
        let mut ball: Vec<usize> = Vec::new();
        let mut vol = v0;
        let mut cut = 0.0;
        let mut radius: f64 = 0.0;
        loop {
            // Next vertex to join, skipping stale heap entries.
            let next = loop {
                match heap.peek().copied() {
                    Some(it) if in_ball[it.v] || it.dist > dist[it.v] => {
                        heap.pop();
                    }
                    other => break other,
                }
            };
            if !ball.is_empty() {
                let d_next = next.map_or(f64::INFINITY, |it| it.dist);
                if cut <= 0.0 {
                    break;
                }
                let r_star = radius.max(radius + d - vol / cut);
                if r_star < d_next {
                    break;
                }
                vol += cut * (d_next - radius);
                radius = d_next;
            }
            let Some(it) = next else { break };
            heap.pop();
            let x = it.v;
            in_ball[x] = true;
            ball.push(x);
            for (y, e) in adj.neighbors(x) {
                if label[y] != usize::MAX {
                    continue;
                }
                if in_ball[y] {
                    // Crossing edge becomes internal.
                    cut -= wbar[e];
                    vol += wbar[e] * (len[e] - (dist[x] - dist[y]));
                } else {
                    cut += wbar[e];
                    let nd = dist[x] + len[e];
                    if nd < dist[y] {
                        if dist[y].is_infinite() {
                            touched.push(y);
                        }
                        dist[y] = nd;
                        heap.push(HeapItem { dist: nd, v: y });
                    }
                }
            }
        }
        for &x in &ball {
            label[x] = part;
        }
        for &y in &touched {
            in_ball[y] = false;
            dist[y] = f64::INFINITY;
        }
    }
    label
}

/// Region growing on all edges with `wbar = w`.
pub fn region_grow(g: &DirectedGraph, len: &[f64], d: f64) -> Result<Vec<usize>> {
    if len.len() != g.m() {
        return Err(Error::DimensionMismatch { expected: g.m(), got: len.len() });
    }
    if let Some(e) = len.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::PreconditionViolated(format!("edge length {e} must be positive")));
    }
    if !(d > 0.0) {
        return Err(Error::PreconditionViolated("d must be positive".into()));
    }
    Ok(region_grow_masked(g, len, g.weights(), d, |_| true))
}

/// Pieces from the weight bucket `F = {e in domain : w_e in (v/r, v]}`:
/// region growing with `d = alpha / (2 v ln(n+1))`, then the `F`-edges
/// inside each part. Lengths are used on every domain edge.
pub fn bucketed_partition(
    g: &DirectedGraph,
    domain: &[usize],
    len: &[f64],
    v: f64,
    alpha: f64,
    r: f64,
) -> Vec<Piece> {
    let n = g.n();
    let w = g.weights();
    let in_bucket = |e: usize| w[e] > v / r && w[e] <= v;
    let mut mask = vec![false; g.m()];
    for &e in domain {
        mask[e] = true;
    }
    if !domain.iter().any(|&e| in_bucket(e)) {
        return Vec::new();
    }
    let wbar: Vec<f64> = (0..g.m()).map(|e| if mask[e] && in_bucket(e) { w[e] } else { 0.0 }).collect();
    let d = alpha / (2.0 * v * ((n + 1) as f64).ln());
    let label = region_grow_masked(g, len, &wbar, d, |e| mask[e]);
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &e in domain {
        if in_bucket(e) && label[g.head(e)] == label[g.tail(e)] {
            groups.entry(label[g.head(e)]).or_default().push(e);
        }
    }
    groups.into_values().map(|edges| Piece::from_edges(g, edges, None)).collect()
}

fn bucket_range(g: &DirectedGraph, domain: &[usize], r: f64) -> (i64, i64) {
    let w = g.weights();
    let lo = domain.iter().map(|&e| w[e]).fold(f64::INFINITY, f64::min);
    let hi = domain.iter().map(|&e| w[e]).fold(0.0, f64::max);
    ((lo.ln() / r.ln()).floor() as i64, (hi.ln() / r.ln()).ceil() as i64)
}

fn weight_ratio_bound(g: &DirectedGraph, domain: &[usize]) -> f64 {
    let w = g.weights();
    let lo = domain.iter().map(|&e| w[e]).fold(f64::INFINITY, f64::min);
    let hi = domain.iter().map(|&e| w[e]).fold(0.0, f64::max);
    if domain.is_empty() {
        1.0
    } else {
        hi / lo
    }
}

fn finish(
    g: &DirectedGraph,
    kind: DecompositionKind,
    mut pieces: Vec<Piece>,
    domain: &[usize],
    quality: f64,
    r: f64,
) -> Decomposition {
    pieces.sort_by(|a, b| a.edges.cmp(&b.edges));
    let mut covered = vec![false; g.m()];
    for p in &pieces {
        for &e in &p.edges {
            covered[e] = true;
        }
    }
    let mut dom = domain.to_vec();
    dom.sort_unstable();
    let cut_edges = dom.iter().copied().filter(|&e| !covered[e]).collect();
    let coverage = weight_ratio_bound(g, &dom).ln() / r.ln() + 3.0;
    Decomposition { kind, pieces, cut_edges, domain: dom, quality, ratio: r, coverage }
}

/// ER decomposition of the subgraph on `domain`, using `lengths` as edge
/// resistance overestimates. `alpha = 16 r n ln(n+1) / |domain|`.
pub fn er_decomp_with_lengths(
    g: &DirectedGraph,
    domain: &[usize],
    lengths: &[f64],
    r: f64,
) -> Decomposition {
    let n = g.n();
    let m = domain.len().max(1) as f64;
    let alpha = 16.0 * r * n as f64 * ((n + 1) as f64).ln() / m;
    let mut pieces = Vec::new();
    if !domain.is_empty() {
        let (jlo, jhi) = bucket_range(g, domain, r);
        for j in jlo..=jhi {
            let v = r.powi(j as i32);
            pieces.extend(bucketed_partition(g, domain, lengths, v, alpha, r));
        }
    }
    finish(g, DecompositionKind::Er, pieces, domain, alpha, r)
}

/// `(rho, r, J)`-ER decomposition of `und(G)` with `rho = 16 r n ln(n+1)/m`.
pub fn er_decomp(g: &DirectedGraph, r: f64, delta: f64, seed: u64) -> Result<Decomposition> {
    if r < 2.0 {
        return Err(Error::InfeasibleParameters("weight ratio r must be at least 2".into()));
    }
    let domain: Vec<usize> = (0..g.m()).collect();
    let over = er_overestimate_edges(g, &domain, delta, seed)?;
    Ok(er_decomp_with_lengths(g, &domain, &over.values, r))
}

/// Normalized-Laplacian gap of a local graph and a Fiedler-type vector in
/// vertex coordinates. The gap is a lower bound (exact when computed
/// densely).
fn normalized_gap(nv: usize, heads: &[usize], tails: &[usize], w: &[f64], seed: u64) -> (f64, Vec<f64>) {
    if nv <= 1 {
        return (f64::INFINITY, vec![0.0; nv]);
    }
    if nv <= 400 {
        let mut l = DMatrix::<f64>::zeros(nv, nv);
        for i in 0..heads.len() {
            let (a, b) = (heads[i], tails[i]);
            l[(a, a)] += w[i];
            l[(b, b)] += w[i];
            l[(a, b)] -= w[i];
            l[(b, a)] -= w[i];
        }
        let s: Vec<f64> = (0..nv).map(|i| 1.0 / l[(i, i)].sqrt()).collect();
        for i in 0..nv {
            for j in 0..nv {
                l[(i, j)] *= s[i] * s[j];
            }
        }
        let eig = SymmetricEigen::new(l);
        let mut idx: Vec<usize> = (0..nv).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let k = idx[1];
        let vec = (0..nv).map(|i| eig.eigenvectors[(i, k)] * s[i]).collect();
        (eig.eigenvalues[k], vec)
    } else {
        let h = SolverHandle::per_component(
            nv,
            heads,
            tails,
            w,
            &SolverOptions { mu2_lower_bound: Some(1.0), ..Default::default() },
        );
        let mut rng = stream(seed, &[0x6669_6564]);
        let (theta, res, v) = h.lanczos_smallest(nv.min(150), &mut rng, true);
        (theta - res, h.unscale(&v.unwrap_or_else(|| vec![0.0; nv])))
    }
}

/// Recursive spectral bisection of one connected, single-bucket edge set.
fn expander_split(g: &DirectedGraph, edges: Vec<usize>, lambda_min: f64, seed: u64, out: &mut Vec<Piece>) {
    let mut verts: Vec<usize> = edges.iter().flat_map(|&e| [g.head(e), g.tail(e)]).collect();
    verts.sort_unstable();
    verts.dedup();
    let local = |v: usize| verts.binary_search(&v).unwrap();
    let heads: Vec<usize> = edges.iter().map(|&e| local(g.head(e))).collect();
    let tails: Vec<usize> = edges.iter().map(|&e| local(g.tail(e))).collect();
    let w: Vec<f64> = edges.iter().map(|&e| g.weight(e)).collect();
    let (gap, fiedler) = normalized_gap(verts.len(), &heads, &tails, &w, seed);
    if gap >= lambda_min {
        let phi = (2.0 * gap.min(2.0)).sqrt();
        out.push(Piece::from_edges(g, edges, Some(phi)));
        return;
    }
    // Sweep cut over the Fiedler order minimizing conductance.
    let nv = verts.len();
    let mut deg = vec![0.0; nv];
    for i in 0..edges.len() {
        deg[heads[i]] += w[i];
        deg[tails[i]] += w[i];
    }
    let vol_total: f64 = deg.iter().sum();
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|&a, &b| fiedler[a].total_cmp(&fiedler[b]).then(a.cmp(&b)));
    let mut pos = vec![0usize; nv];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for i in 0..edges.len() {
        incident[heads[i]].push(i);
        incident[tails[i]].push(i);
    }
    let (mut cut, mut vol) = (0.0, 0.0);
    let (mut best, mut best_k) = (f64::INFINITY, 1);
    for k in 0..nv - 1 {
        let v = order[k];
        vol += deg[v];
        for &i in &incident[v] {
            let other = if heads[i] == v { tails[i] } else { heads[i] };
            if pos[other] < k {
                cut -= w[i];
            } else {
                cut += w[i];
            }
        }
        let c = cut / vol.min(vol_total - vol);
        if c < best {
            best = c;
            best_k = k + 1;
        }
    }
    let side: Vec<bool> = (0..nv).map(|v| pos[v] < best_k).collect();
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for i in 0..edges.len() {
        match (side[heads[i]], side[tails[i]]) {
            (true, true) => left.push(edges[i]),
            (false, false) => right.push(edges[i]),
            _ => {}
        }
    }
    for (k, part) in [left, right].into_iter().enumerate() {
        for comp in split_components(g, &part) {
            expander_split(g, comp, lambda_min, seed.wrapping_mul(31).wrapping_add(k as u64 + 1), out);
        }
    }
}

fn split_components(g: &DirectedGraph, edges: &[usize]) -> Vec<Vec<usize>> {
    if edges.is_empty() {
        return Vec::new();
    }
    let mut mask = vec![false; g.m()];
    for &e in edges {
        mask[e] = true;
    }
    let (_, label) = components_masked(g.n(), g.heads(), g.tails(), |e| mask[e]);
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &e in edges {
        groups.entry(label[g.head(e)]).or_default().push(e);
    }
    groups.into_values().collect()
}

/// Expander decomposition of the subgraph on `domain`: weight buckets of
/// ratio `r`, connected components, then recursive Fiedler sweep cuts until
/// every piece has normalized gap `>= phi_min^2 / 2`. Each piece reports
/// `phi = sqrt(2 lambda_2)`.
pub fn expander_decomp_domain(
    g: &DirectedGraph,
    domain: &[usize],
    r: f64,
    phi_min: f64,
    seed: u64,
) -> Result<Decomposition> {
    let lambda_min = phi_min * phi_min / 2.0;
    let w = g.weights();
    let mut pieces = Vec::new();
    if !domain.is_empty() {
        let (jlo, jhi) = bucket_range(g, domain, r);
        for j in jlo..=jhi {
            let v = r.powi(j as i32);
            let bucket: Vec<usize> = domain.iter().copied().filter(|&e| w[e] > v / r && w[e] <= v).collect();
            for (c, comp) in split_components(g, &bucket).into_iter().enumerate() {
                let s = crate::rng::derive(seed, &[j as u64, c as u64]);
                expander_split(g, comp, lambda_min, s, &mut pieces);
            }
        }
    }
    let d = finish(g, DecompositionKind::Expander, pieces, domain, phi_min, r);
    if 2 * d.cut_edges.len() > d.domain.len() {
        return Err(Error::QualityNotMet {
            phi_min,
            detail: format!("{} of {} edges cut", d.cut_edges.len(), d.domain.len()),
        });
    }
    Ok(d)
}

/// Default `phi_min = c_adk / ln^2 n`.
pub fn default_phi_min(n: usize, c_adk: f64) -> f64 {
    let l = (n.max(3) as f64).ln();
    c_adk / (l * l)
}

/// `(phi, r, J)`-expander decomposition of `und(G)`.
pub fn expander_decomp(g: &DirectedGraph, r: f64, phi_min: f64, seed: u64) -> Result<Decomposition> {
    let domain: Vec<usize> = (0..g.m()).collect();
    expander_decomp_domain(g, &domain, r, phi_min, seed)
}

/// Re-measures every decomposition item from scratch. ER diameters and
/// normalized gaps use the dense oracle; `quality` is taken from `d`.
pub fn verify_decomposition(g: &DirectedGraph, d: &Decomposition) -> Result<VerificationReport> {
    let w = g.weights();
    let mut rep = VerificationReport::default();
    let mut owner = vec![usize::MAX; g.m()];
    let mut disjoint = true;
    for (i, p) in d.pieces.iter().enumerate() {
        for &e in &p.edges {
            if owner[e] != usize::MAX {
                disjoint = false;
            }
            owner[e] = i;
        }
    }
    rep.check_le("edge_disjoint", if disjoint { 0.0 } else { 1.0 }, 0.0);

    let worst_ratio = d
        .pieces
        .iter()
        .map(|p| {
            let hi = p.edges.iter().map(|&e| w[e]).fold(0.0, f64::max);
            let lo = p.edges.iter().map(|&e| w[e]).fold(f64::INFINITY, f64::min);
            hi / lo
        })
        .fold(1.0, f64::max);
    rep.check_le("weight_ratio", worst_ratio, d.ratio);

    match d.kind {
        DecompositionKind::Er => {
            let worst = if d.pieces.is_empty() {
                0.0
            } else {
                let lp = dense::er_pinv(g)?;
                d.pieces
                    .iter()
                    .map(|p| {
                        let wmax = p.edges.iter().map(|&e| w[e]).fold(0.0, f64::max);
                        wmax * dense::er_diameter(&lp, &p.vertices)
                    })
                    .fold(0.0, f64::max)
            };
            rep.check_le("er_diameter", worst, d.quality * (1.0 + 1e-9));
        }
        DecompositionKind::Expander => {
            let mut worst = f64::INFINITY;
            for p in &d.pieces {
                let local = |v: usize| p.vertices.binary_search(&v).unwrap();
                let hs: Vec<usize> = p.edges.iter().map(|&e| local(g.head(e))).collect();
                let ts: Vec<usize> = p.edges.iter().map(|&e| local(g.tail(e))).collect();
                let ws: Vec<f64> = p.edges.iter().map(|&e| w[e]).collect();
                dense::gate(p.vertices.len())?;
                let (gap, _) = normalized_gap(p.vertices.len(), &hs, &ts, &ws, 0);
                worst = worst.min(gap);
            }
            let need = d.quality * d.quality / 2.0;
            rep.check_ge("normalized_gap", if worst.is_finite() { worst } else { need }, need * (1.0 - 1e-9));
        }
    }
    rep.check_le("edges_cut", d.cut_edges.len() as f64, d.domain.len() as f64 / 2.0);
    rep.check_le("vertex_coverage", d.max_coverage(g.n()) as f64, d.coverage + 1e-9);
    rep.nnz = d.pieces.iter().map(|p| p.edges.len()).sum();
    Ok(rep)
}
