//! Graphical spectral sketches. Work happens on the bipartite lift, where a
//! circulation preserves both in- and out-degrees of the original graph;
//! pieces come from an expander decomposition and only their high-degree
//! cores are reweighted.

use serde::{Deserialize, Serialize};

use crate::decomposition::{default_phi_min, expander_decomp_domain, Decomposition};
use crate::error::{Error, Result};
use crate::graph::{
    bipartite_lift, is_bipartite_lift, require_connected, spanning_forest, DirectedGraph, SpanningTree,
    UndirectedGraph,
};
use crate::projection::rounding;
use crate::rng::derive;
use crate::sparsify::{check_eulerian, two_phase, Cluster, PieceStats, Profile, Schedule, SparsifyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub profile: Profile,
    pub eps: f64,
    pub delta: f64,
    /// Degree threshold override.
    pub beta: Option<f64>,
    pub c_ess: f64,
    pub c_adk: f64,
    /// Expansion target of the decomposition; defaults to `c_adk / ln^2 n`.
    pub phi_min: Option<f64>,
    pub seed: u64,
    pub eta: Option<f64>,
    pub tau: Option<usize>,
    /// Minimum `|E(C)| / |V(C)|` for a core to be reweighted (practical
    /// profile; the faithful profile uses 40).
    pub density_guard: f64,
    /// When set, the loop target is `c * n * beta` instead of
    /// `4 C_ESS n beta log2(32 m n U_max / eps)`.
    pub target_constant: Option<f64>,
}

impl SketchConfig {
    pub fn paper(eps: f64, delta: f64, seed: u64) -> Self {
        SketchConfig {
            profile: Profile::PaperFaithful,
            eps,
            delta,
            beta: None,
            c_ess: 1.0,
            c_adk: 1.0,
            phi_min: None,
            seed,
            eta: None,
            tau: None,
            density_guard: crate::sparsify::FAITHFUL_DENSITY,
            target_constant: None,
        }
    }

    pub fn practical(eps: f64, delta: f64, seed: u64) -> Self {
        SketchConfig { profile: Profile::Practical, ..Self::paper(eps, delta, seed) }
    }

    fn validate(&self) -> Result<()> {
        // The practical range is closed at 1/2 so that eps = 1/2 is usable.
        let ok = |x: f64| match self.profile {
            Profile::PaperFaithful => x > 0.0 && x < 0.01,
            Profile::Practical => x > 0.0 && x <= 0.5,
        };
        if !(ok(self.eps) && ok(self.delta)) {
            let range = match self.profile {
                Profile::PaperFaithful => "(0, 0.01)",
                Profile::Practical => "(0, 0.5]",
            };
            return Err(Error::InfeasibleParameters(format!("eps and delta must lie in {range}")));
        }
        if !(self.c_ess > 0.0 && self.c_adk > 0.0) || matches!(self.beta, Some(b) if !(b > 0.0)) {
            return Err(Error::InfeasibleParameters("constants and beta must be positive".into()));
        }
        Ok(())
    }

    /// Degree threshold for a graph on `n` vertices with weight bound
    /// `u_max`.
    pub fn beta_for(&self, n: usize, u_max: f64) -> f64 {
        if let Some(b) = self.beta {
            return b;
        }
        let ln_n = (n.max(3) as f64).ln();
        match self.profile {
            Profile::PaperFaithful => {
                let l = (n as f64 * u_max / self.delta).ln();
                400000.0 * self.c_ess * self.c_ess / (self.c_adk * self.c_adk * self.eps)
                    * ln_n.powi(6)
                    * l
                    * l.ln().max(0.0).powi(2)
            }
            Profile::Practical => ((4.0 / self.eps).ceil() * (ln_n * ln_n).ceil()).max(8.0),
        }
    }

    /// The reweighting configuration used inside each core.
    pub fn reweight_config(&self) -> SparsifyConfig {
        let base = match self.profile {
            Profile::PaperFaithful => SparsifyConfig::paper(self.eps, self.delta, self.seed),
            Profile::Practical => SparsifyConfig::practical(self.eps, self.delta, self.seed),
        };
        SparsifyConfig {
            c_bfs: self.c_ess,
            c_ps: self.c_ess,
            eta: self.eta,
            tau: self.tau,
            density_guard: self.density_guard,
            ..base
        }
    }
}

/// Result of one pass over an expander decomposition of the lift.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchStep {
    pub weights: Vec<f64>,
    /// High-degree cores, one per piece, in piece order.
    pub clusters: Vec<Cluster>,
    pub pieces: Vec<PieceStats>,
    /// Largest `C_ESS beta^-1 phi^-2 ln(nW/(delta eps)) ln^2 ln(nW/eps)`
    /// over reweighted cores; the analysis needs this `<= 1`.
    pub hypothesis: f64,
}

/// Vertices of the piece with at least `beta` incident piece edges, and the
/// piece edges between them.
fn high_degree_core(g: &DirectedGraph, edges: &[usize], beta: f64) -> (Vec<usize>, Vec<usize>) {
    let mut deg = std::collections::BTreeMap::<usize, usize>::new();
    for &e in edges {
        *deg.entry(g.head(e)).or_default() += 1;
        *deg.entry(g.tail(e)).or_default() += 1;
    }
    let keep = |v: usize| deg.get(&v).is_some_and(|&d| d as f64 >= beta);
    let vertices: Vec<usize> = deg.keys().copied().filter(|&v| keep(v)).collect();
    let core = edges.iter().copied().filter(|&e| keep(g.head(e)) && keep(g.tail(e))).collect();
    (vertices, core)
}

/// Reweights the degree-`>= beta` core of every expander piece of the lift
/// `g`, preserving `B^T w` and `|B|^T w` of the unlifted graph.
#[allow(clippy::too_many_arguments)]
pub fn expander_spectral_sketch(
    decomp: &Decomposition,
    g: &DirectedGraph,
    tree: &SpanningTree,
    delta: f64,
    eps: f64,
    w_cap: f64,
    beta: f64,
    cfg: &SketchConfig,
) -> Result<SketchStep> {
    ess_keyed(decomp, g, tree, delta, eps, w_cap, beta, cfg, derive(cfg.seed, &[0x6573]))
}

#[allow(clippy::too_many_arguments)]
fn ess_keyed(
    decomp: &Decomposition,
    g: &DirectedGraph,
    tree: &SpanningTree,
    delta: f64,
    eps: f64,
    w_cap: f64,
    beta: f64,
    cfg: &SketchConfig,
    key: u64,
) -> Result<SketchStep> {
    if !is_bipartite_lift(g) {
        return Err(Error::NotBipartiteLift);
    }
    let rcfg = cfg.reweight_config();
    let n = g.n() as f64;
    let logs = (n * w_cap / (delta * eps)).ln() * (n * w_cap / eps).ln().ln().max(0.0).powi(2);
    let mut hypothesis: f64 = 0.0;
    let mut clusters = Vec::with_capacity(decomp.pieces.len());
    for piece in &decomp.pieces {
        let (vertices, edges) = high_degree_core(g, &piece.edges, beta);
        let phi = piece.phi.unwrap_or(decomp.quality);
        let rho = 8.0 / (beta * phi * phi);
        let w_floor = edges.iter().map(|&e| g.weight(e)).fold(f64::INFINITY, f64::min);
        let dense = !edges.is_empty() && edges.len() as f64 >= rcfg.min_density() * vertices.len() as f64;
        if dense {
            hypothesis = hypothesis.max(cfg.c_ess * logs / (beta * phi * phi));
        }
        clusters.push(Cluster { edges, vertices, w_floor, rho });
    }
    if cfg.profile == Profile::PaperFaithful && hypothesis > 1.0 {
        return Err(Error::PreconditionViolated(format!(
            "C_ESS beta^-1 phi^-2 ln(nW/(delta eps)) ln^2 ln(nW/eps) = {hypothesis} exceeds 1"
        )));
    }
    let schedule = Schedule { delta_split: 2.0, eps, delta, w_cap, cluster_dims: true };
    let (weights, pieces) = two_phase(g, &clusters, tree, &schedule, &rcfg, key)?;
    Ok(SketchStep { weights, clusters, pieces, hypothesis })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchRound {
    pub round: usize,
    pub nnz_before: usize,
    pub nnz_after: usize,
    pub pieces: usize,
    pub eligible_pieces: usize,
    pub skipped_pieces: usize,
    pub deleted: usize,
    pub hypothesis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchResult {
    /// Weights over the edges of the input; zero marks a removed edge.
    pub weights: Vec<f64>,
    pub graph: DirectedGraph,
    pub rounds: Vec<SketchRound>,
    pub beta: f64,
    pub phi_min: f64,
    pub target: f64,
    pub max_rounds: usize,
    pub weight_growth: f64,
}

impl SketchResult {
    pub fn nnz(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Eulerian graphical sketch of `g`.
pub fn spectral_sketch(g: &DirectedGraph, cfg: &SketchConfig) -> Result<SketchResult> {
    cfg.validate()?;
    check_eulerian(g)?;
    sketch_core(g, cfg, cfg.eps)
}

fn sketch_core(g: &DirectedGraph, cfg: &SketchConfig, eps: f64) -> Result<SketchResult> {
    require_connected(g)?;
    let (n, m) = (g.n(), g.m());
    let wmin = g.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let scale = if wmin < 1.0 { 1.0 / wmin } else { 1.0 };
    let gs = g.with_weights(&g.weights().iter().map(|x| x * scale).collect::<Vec<_>>())?;
    let lift = bipartite_lift(&gs);
    let gl = lift.graph;
    // The lift of a connected graph can still be disconnected (a directed
    // cycle lifts to a matching), so route on a spanning forest.
    let tree = spanning_forest(&gl);
    let in_tree = tree.mask(m);
    let off_tree: Vec<usize> = (0..m).filter(|&e| !in_tree[e]).collect();

    let rounds = ((6.0 * (n.max(2) as f64).ln()).ceil() as usize).max(1);
    let u = gs.max_weight() / gs.min_positive_weight();
    let u_max = u * cfg.c_ess.powi(rounds as i32);
    let beta = cfg.beta_for(n, u_max);
    let (nf, mf) = (n as f64, m as f64);
    let target = match cfg.target_constant {
        Some(c) => c * nf * beta,
        None => 4.0 * cfg.c_ess * nf * beta * (32.0 * mf * nf * u_max / eps).log2(),
    };
    let phi_min = cfg.phi_min.unwrap_or_else(|| default_phi_min(gl.n(), cfg.c_adk));
    let round_delta = cfg.delta / (4.0 * rounds as f64);
    let round_eps = eps / (4.0 * rounds as f64);
    let cutoff = eps / (4.0 * mf * nf);

    let mut w = gl.weights().to_vec();
    let mut trace = Vec::new();
    for t in 0..rounds {
        let live: Vec<usize> = off_tree.iter().copied().filter(|&e| w[e] > 0.0).collect();
        if (live.len() as f64) <= target || live.is_empty() {
            break;
        }
        let gt = gl.with_weights(&w)?;
        let decomp = expander_decomp_domain(&gt, &live, 2.0, phi_min, derive(cfg.seed, &[0x6578, t as u64]))?;
        let step = ess_keyed(
            &decomp,
            &gt,
            &tree,
            round_delta,
            round_eps,
            u_max,
            beta,
            cfg,
            derive(cfg.seed, &[0x6573, t as u64]),
        )?;
        let unchanged = step.weights == w;
        w = step.weights;
        let mut z = vec![0.0; m];
        let mut deleted = 0;
        for &e in &off_tree {
            if w[e] > 0.0 && w[e] <= cutoff {
                z[e] = w[e];
                w[e] = 0.0;
                deleted += 1;
            }
        }
        if deleted > 0 {
            let y = rounding(&gl, &z, &tree)?;
            for &e in &tree.edges {
                w[e] += y[e];
            }
        }
        trace.push(SketchRound {
            round: t,
            nnz_before: live.len(),
            nnz_after: off_tree.iter().filter(|&&e| w[e] > 0.0).count(),
            pieces: step.pieces.len(),
            eligible_pieces: step.pieces.iter().filter(|p| p.eligible).count(),
            skipped_pieces: step.pieces.iter().filter(|p| p.skipped.is_some()).count(),
            deleted,
            hypothesis: step.hypothesis,
        });
        if unchanged && deleted == 0 {
            break;
        }
    }

    // Lifted edge `i` is original edge `edge_map[i]`.
    let mut out = vec![0.0; m];
    for (i, &e) in lift.edge_map.iter().enumerate() {
        out[e] = w[i] / scale;
    }
    let weight_growth = (0..m).filter(|&e| out[e] > 0.0).map(|e| out[e] / g.weight(e)).fold(0.0, f64::max);
    let graph = g.with_weights(&out)?.support().0;
    Ok(SketchResult {
        weights: out,
        graph,
        rounds: trace,
        beta,
        phi_min,
        target,
        max_rounds: rounds,
        weight_growth,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedSketch {
    pub graph: UndirectedGraph,
    /// The run on the oriented graph, with `eps / 30`.
    pub directed: SketchResult,
}

/// Graphical sketch of an undirected graph: orient every edge from its
/// smaller endpoint, sketch with `eps / 30` without the Eulerian gate, and
/// forget the orientation.
pub fn undirected_sketch(g: &UndirectedGraph, cfg: &SketchConfig) -> Result<UndirectedSketch> {
    cfg.validate()?;
    let oriented = g.oriented();
    require_connected(&oriented)?;
    let directed = sketch_core(&oriented, cfg, cfg.eps / 30.0)?;
    let edges: Vec<(usize, usize, f64)> = oriented
        .edges()
        .zip(&directed.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|((u, v, _), &w)| (u, v, w))
        .collect();
    Ok(UndirectedSketch { graph: UndirectedGraph::new(g.n, &edges)?, directed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::expander_decomp;
    use crate::graph::{abs_degree_of, complete_bidirected, degree_imbalance, directed_cycle, random_undirected};

    #[test]
    fn practical_beta_formula() {
        let cfg = SketchConfig::practical(0.5, 0.1, 0);
        let ln = 64f64.ln();
        assert_eq!(cfg.beta_for(64, 1.0), 8.0 * (ln * ln).ceil());
        let cfg = SketchConfig { beta: Some(3.0), ..cfg };
        assert_eq!(cfg.beta_for(64, 1.0), 3.0);
    }

    #[test]
    fn cycle_is_identity() {
        let g = directed_cycle(12);
        let out = spectral_sketch(&g, &SketchConfig::practical(0.25, 0.1, 1)).unwrap();
        assert_eq!(out.weights, g.weights());
    }

    #[test]
    fn non_lift_rejected() {
        let g = complete_bidirected(6);
        let d = expander_decomp(&g, 2.0, 0.1, 0).unwrap();
        let tree = spanning_forest(&g);
        let err = expander_spectral_sketch(&d, &g, &tree, 0.1, 0.1, 1.0, 2.0, &SketchConfig::practical(0.25, 0.1, 0));
        assert!(matches!(err, Err(Error::NotBipartiteLift)));
    }

    #[test]
    fn low_degree_pieces_untouched() {
        let g = bipartite_lift(&complete_bidirected(10)).graph;
        let tree = spanning_forest(&g);
        let mask = tree.mask(g.m());
        let dom: Vec<usize> = (0..g.m()).filter(|&e| !mask[e]).collect();
        let d = expander_decomp_domain(&g, &dom, 2.0, 0.1, 0).unwrap();
        let cfg = SketchConfig::practical(0.25, 0.1, 0);
        let out = expander_spectral_sketch(&d, &g, &tree, 0.1, 0.1, 1.0, 100.0, &cfg).unwrap();
        assert_eq!(out.weights, g.weights());
        assert!(out.clusters.iter().all(|c| c.edges.is_empty()));
    }

    #[test]
    fn lifted_dense_graph_keeps_both_degree_vectors() {
        let base = complete_bidirected(32);
        let g = bipartite_lift(&base).graph;
        let tree = spanning_forest(&g);
        let mask = tree.mask(g.m());
        let dom: Vec<usize> = (0..g.m()).filter(|&e| !mask[e]).collect();
        let d = expander_decomp_domain(&g, &dom, 2.0, 0.1, 0).unwrap();
        let cfg = SketchConfig { density_guard: 4.0, ..SketchConfig::practical(0.25, 0.1, 2) };
        let out = expander_spectral_sketch(&d, &g, &tree, 0.1, 0.1, 1.0, 8.0, &cfg).unwrap();
        assert!(out.pieces.iter().any(|p| p.eligible && p.skipped.is_none()));
        let b0 = degree_imbalance(&base);
        let a0 = abs_degree_of(&base, base.weights());
        let nb = base.with_weights(&out.weights).unwrap();
        let b1 = degree_imbalance(&nb);
        let a1 = abs_degree_of(&nb, nb.weights());
        let tol = 1e-9 * base.total_weight();
        for v in 0..32 {
            assert!((b0[v] - b1[v]).abs() <= tol && (a0[v] - a1[v]).abs() <= tol);
        }
    }

    #[test]
    fn undirected_tree_is_identity() {
        let t = UndirectedGraph::new(5, &[(0, 1, 1.0), (1, 2, 2.0), (1, 3, 1.0), (3, 4, 5.0)]).unwrap();
        let out = undirected_sketch(&t, &SketchConfig::practical(0.25, 0.1, 0)).unwrap();
        assert_eq!(out.graph, t);
    }

    #[test]
    fn undirected_runs() {
        let g = random_undirected(24, 80, 4, 3).unwrap();
        let out = undirected_sketch(&g, &SketchConfig::practical(0.25, 0.1, 3)).unwrap();
        assert_eq!(out.graph.n, 24);
    }
}
