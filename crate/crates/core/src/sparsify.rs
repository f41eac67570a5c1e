//! Degree-preserving sparsification: random reweighting of a cluster along
//! projected circulations, the two-phase per-piece schedule, and the outer
//! rounds loop over effective-resistance decompositions.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{er_decomp_with_lengths, Decomposition, Piece};
use crate::error::{Error, Result};
use crate::graph::{degree_imbalance, require_connected, spanning_tree, DirectedGraph, SpanningTree};
use crate::projection::{rounding, Compensated, ProjectionContext};
use crate::resistance::er_overestimate_edges;
use crate::rng::{derive, stream};
use crate::solver::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    PaperFaithful,
    Practical,
}

/// Default inner-loop length of the practical profile.
pub const PRACTICAL_TAU: usize = 1000;
/// Minimum edge density `|E(H)| / |V(H)|` of a piece under the faithful profile.
pub const FAITHFUL_DENSITY: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifyConfig {
    pub profile: Profile,
    pub c_sign: f64,
    pub c_bfs: f64,
    pub c_ps: f64,
    /// Step size override (practical profile only).
    pub eta: Option<f64>,
    /// Inner-loop length override (practical profile only).
    pub tau: Option<usize>,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    /// Pieces with fewer than `density_guard * |V(H)|` edges are left alone.
    /// Fixed to 40 under the faithful profile.
    pub density_guard: f64,
    /// When set, the sparsity target is `c * n ln n / eps^2` instead of the
    /// full polylogarithmic formula.
    pub target_constant: Option<f64>,
    /// Steps are rescaled so that `||x_t||_inf <= max_step`.
    pub max_step: f64,
    /// Restarts of one reweighting call before giving up.
    pub max_restarts: usize,
    /// Stops the outer loop after this many rounds; the schedule is still
    /// computed for the full round count.
    #[serde(default)]
    pub round_limit: Option<usize>,
}

impl SparsifyConfig {
    pub fn paper(eps: f64, delta: f64, seed: u64) -> Self {
        SparsifyConfig {
            profile: Profile::PaperFaithful,
            c_sign: 1.0,
            c_bfs: 1.0,
            c_ps: 1.0,
            eta: None,
            tau: None,
            eps,
            delta,
            seed,
            density_guard: FAITHFUL_DENSITY,
            target_constant: None,
            max_step: 0.2,
            max_restarts: 16,
            round_limit: None,
        }
    }

    pub fn practical(eps: f64, delta: f64, seed: u64) -> Self {
        SparsifyConfig {
            profile: Profile::Practical,
            target_constant: Some(1.0),
            ..Self::paper(eps, delta, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InfeasibleParameters(what.into()));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad("eps must lie in (0, 1)");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.c_sign > 0.0 && self.c_bfs > 0.0 && self.c_ps > 0.0) {
            return bad("constants must be positive");
        }
        if !(self.max_step > 0.0 && self.max_step < 1.0) {
            return bad("max_step must lie in (0, 1)");
        }
        if matches!(self.eta, Some(e) if !(e > 0.0)) || self.tau == Some(0) {
            return bad("eta and tau overrides must be positive");
        }
        Ok(())
    }

    pub fn min_density(&self) -> f64 {
        match self.profile {
            Profile::PaperFaithful => FAITHFUL_DENSITY,
            Profile::Practical => self.density_guard,
        }
    }

    /// Step size, loop length and projection accuracy for one reweighting
    /// call on a graph with `n` vertices and `m` edges.
    pub fn step_parameters(&self, n: usize, m: usize, ell: f64, delta: f64, eps: f64) -> StepParameters {
        let (n, m) = (n.max(1) as f64, m.max(1) as f64);
        let lg = |tau: usize| (60.0 * m * tau as f64 / delta).ln().max(1.0);
        let (eta, tau) = match self.profile {
            Profile::PaperFaithful => {
                // eta depends on tau through the log and tau on eta; iterate to
                // the fixed point.
                let mut tau = 1usize;
                let mut eta = 1.0;
                for _ in 0..64 {
                    eta = 1.0 / (20.0 * self.c_sign * lg(tau).sqrt());
                    let next = (720.0 / (eta * eta)).ceil() as usize;
                    if next == tau {
                        break;
                    }
                    tau = next;
                }
                (eta, tau)
            }
            Profile::Practical => (self.eta.unwrap_or(0.2), self.tau.unwrap_or(PRACTICAL_TAU)),
        };
        let xi = (ell / 10.0)
            .min(1.0 / (1000.0 * self.c_sign * lg(tau)))
            .min(eps / (200.0 * m * n * n * tau as f64));
        StepParameters { eta, tau, xi }
    }

    /// Non-tree edge count below which the rounds loop stops.
    pub fn sparsity_target(&self, n: usize, m: usize, rounds: usize, u_max: f64) -> f64 {
        let nf = n as f64;
        let nlogn = nf * nf.ln().max(1.0);
        match (self.profile, self.target_constant) {
            (Profile::Practical, Some(c)) => c * nlogn / (self.eps * self.eps),
            _ => {
                let (r, mf) = (rounds as f64, m as f64);
                let a = (32.0 * r * r * mf * nf * u_max / (self.delta * self.eps)).ln();
                let b = (32.0 * r * mf * nf * u_max / self.eps).ln().ln().max(1.0);
                nlogn * a * b * b * 2f64.powi(22) * self.c_ps * self.c_ps / (self.eps * self.eps)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParameters {
    pub eta: f64,
    pub tau: usize,
    pub xi: f64,
}

/// A `(w_floor, rho)`-cluster: an edge set with weights in
/// `[w_floor, 2 w_floor]` and resistance-diameter certificate `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
    pub w_floor: f64,
    pub rho: f64,
}

impl Cluster {
    pub fn from_piece(piece: &Piece, w: &[f64], rho: f64) -> Cluster {
        let w_floor = piece.edges.iter().map(|&e| w[e]).fold(f64::INFINITY, f64::min);
        Cluster { edges: piece.edges.clone(), vertices: piece.vertices.clone(), w_floor, rho }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// A quarter of `F` fell to `ell * w_star` or below.
    Saturated,
    /// The log-potential over the cluster fell to `-|E(H)|`.
    Potential,
    /// No admissible direction was left (the projected step vanished).
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfsStats {
    /// Passes of the outer loop (1 when the first pass exits).
    pub loops: usize,
    pub steps: usize,
    pub stop: StopReason,
    /// Fraction of `F` at or below `ell * w_star` on exit.
    pub small_fraction: f64,
    /// `sum_{E(H)} ln(w_t / w_0)` on exit.
    pub potential: f64,
    /// Steps whose raw sup-norm exceeded `max_step` and were rescaled.
    pub rescaled_steps: usize,
    /// `C_BFS * alpha * rho * ln(m / delta)`; the analysis needs this `<= 1`.
    pub hypothesis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfsOutcome {
    pub weights: Vec<f64>,
    pub stats: BfsStats,
}

fn relative_in(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo * (1.0 - 1e-9) && x <= hi * (1.0 + 1e-9)
}

/// One call of the cluster reweighting with exact degree repair on `tree`.
///
/// `w` and `w_star` are indexed over the edges of `g`; only edges in `f`
/// move, and tree edges absorb the final imbalance.
#[allow(clippy::too_many_arguments)]
pub fn basic_fast_sparsify(
    g: &DirectedGraph,
    w: &[f64],
    cluster: &Cluster,
    w_star: &[f64],
    ell: f64,
    delta: f64,
    eps: f64,
    f: &[usize],
    tree: &SpanningTree,
    cfg: &SparsifyConfig,
) -> Result<BfsOutcome> {
    bfs_keyed(g, w, cluster, w_star, ell, delta, eps, f, tree, cfg, derive(cfg.seed, &[0x6266]), None)
}

#[allow(clippy::too_many_arguments)]
fn bfs_keyed(
    g: &DirectedGraph,
    w: &[f64],
    cluster: &Cluster,
    w_star: &[f64],
    ell: f64,
    delta: f64,
    eps: f64,
    f: &[usize],
    tree: &SpanningTree,
    cfg: &SparsifyConfig,
    key: u64,
    dims: Option<(usize, usize)>,
) -> Result<BfsOutcome> {
    cfg.validate()?;
    let (n, m) = (g.n(), g.m());
    let (n_eff, m_eff) = dims.unwrap_or((n, m));
    for v in [w, w_star] {
        if v.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: v.len() });
        }
    }
    let pre = |msg: String| Err(Error::PreconditionViolated(msg));
    let mh = cluster.edges.len();
    let nh = cluster.vertices.len();
    if (mh as f64) < cfg.min_density() * nh as f64 {
        return pre(format!("cluster has {mh} edges on {nh} vertices"));
    }
    let mut in_h = vec![false; m];
    for &e in &cluster.edges {
        in_h[e] = true;
    }
    let mut f: Vec<usize> = f.to_vec();
    f.sort_unstable();
    f.dedup();
    if f.iter().any(|&e| e >= m || !in_h[e]) {
        return pre("F must be a subset of the cluster edges".into());
    }
    if 4 * f.len() < mh || f.is_empty() {
        return pre(format!("|F| = {} is below a quarter of {mh}", f.len()));
    }
    let sum_w: f64 = cluster.edges.iter().map(|&e| w[e]).sum();
    let sum_star: f64 = cluster.edges.iter().map(|&e| w_star[e]).sum();
    if !(sum_star > 0.0 && (0.99..=1.01).contains(&(sum_w / sum_star))) {
        return pre(format!("weight sum ratio {} outside [0.99, 1.01]", sum_w / sum_star));
    }
    if let Some(&e) =
        cluster.edges.iter().find(|&&e| !relative_in(w[e], 0.5 * ell * w_star[e], 60.0 * w_star[e]))
    {
        return pre(format!("edge {e} outside the band [ell/2, 60] * w_star"));
    }
    // Deleted edges are routed onto the tree, so tree weights may sit
    // slightly below their starting value of at least 1.
    if let Some(&e) = tree.edges.iter().find(|&&e| w[e] < 1.0 - cfg.eps) {
        return pre(format!("tree edge {e} has weight {} < 1", w[e]));
    }
    let wf_sum: f64 = f.iter().map(|&e| w[e]).sum();
    let alpha = wf_sum / (f.len() as f64 * cluster.w_floor);
    let hypothesis = cfg.c_bfs * alpha * cluster.rho * (m_eff as f64 / delta).ln();
    if cfg.profile == Profile::PaperFaithful && hypothesis > 1.0 {
        return pre(format!("C_BFS alpha rho ln(m/delta) = {hypothesis} exceeds 1"));
    }

    let params = cfg.step_parameters(n_eff, m_eff, ell, delta, eps);
    let mean_f = wf_sum / f.len() as f64;
    let large: Vec<f64> = f.iter().map(|&e| 50.0 * w_star[e].min(mean_f)).collect();
    let small: Vec<f64> = f.iter().map(|&e| ell * w_star[e]).collect();
    let quarter = f.len() as f64 / 4.0;
    let floor = -(mh as f64);
    let count_small = |wt: &[f64]| f.iter().zip(&small).filter(|(&e, &s)| wt[e] <= s).count();
    let exit_reason = |wt: &[f64], pot: f64| {
        if count_small(wt) as f64 >= quarter {
            Some(StopReason::Saturated)
        } else if pot <= floor {
            Some(StopReason::Potential)
        } else {
            None
        }
    };

    let mut wt = w.to_vec();
    let mut loops = 0usize;
    let mut steps = 0usize;
    let mut rescaled_steps = 0usize;
    let (stop, potential) = loop {
        loops += 1;
        if loops > cfg.max_restarts {
            return Err(Error::NoConvergence {
                iterations: steps,
                residual: count_small(&wt) as f64 / f.len() as f64,
            });
        }
        wt.copy_from_slice(w);
        let mut pot = Compensated::default();
        let mut reason = None;
        for t in 0..=params.tau {
            if let Some(r) = exit_reason(&wt, pot.value()) {
                reason = Some(r);
                break;
            }
            let active: Vec<usize> = f
                .iter()
                .enumerate()
                .filter(|&(i, &e)| wt[e] > small[i] && wt[e] < large[i])
                .map(|(_, &e)| e)
                .collect();
            if active.len() < 2 {
                reason = Some(StopReason::Stalled);
                break;
            }
            let mut rng = stream(key, &[loops as u64, t as u64]);
            let mut z = vec![0.0; m];
            for &e in &active {
                z[e] = if rng.random::<bool>() { params.eta } else { -params.eta };
            }
            let opts = SolverOptions {
                seed: derive(key, &[loops as u64, t as u64, 1]),
                lanczos_steps: 30,
                ..Default::default()
            };
            let ctx = ProjectionContext::new(g, &wt, &active, Some(&wt), &opts)?;
            let mut x = ctx.proj_minus_rank_one(&z, params.xi)?;
            let sup = active.iter().fold(0.0f64, |a, &e| a.max(x[e].abs()));
            if sup <= 1e-9 * params.eta {
                reason = Some(StopReason::Stalled);
                break;
            }
            if sup > cfg.max_step {
                let s = cfg.max_step / sup;
                for &e in &active {
                    x[e] *= s;
                }
                rescaled_steps += 1;
            }
            for &e in &active {
                pot.add(x[e].ln_1p());
                wt[e] *= 1.0 + x[e];
            }
            steps += 1;
        }
        let potential = pot.value();
        if let Some(r) = reason.or_else(|| exit_reason(&wt, potential)) {
            break (r, potential);
        }
    };

    let small_fraction = count_small(&wt) as f64 / f.len() as f64;
    let diff: Vec<f64> = w.iter().zip(&wt).map(|(a, b)| a - b).collect();
    let y = rounding(g, &diff, tree)?;
    for e in 0..m {
        wt[e] += y[e];
    }
    Ok(BfsOutcome {
        weights: wt,
        stats: BfsStats {
            loops,
            steps,
            stop,
            small_fraction,
            potential,
            rescaled_steps,
            hypothesis,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceStats {
    pub edges: usize,
    pub vertices: usize,
    /// Dense enough to be processed.
    pub eligible: bool,
    /// Set when a reweighting call failed and the piece was restored.
    pub skipped: Option<String>,
    pub phase1: Vec<BfsStats>,
    /// Fraction of the piece's edges at or below `ell_1 * w_star` after
    /// phase 1.
    pub phase1_fraction: f64,
    pub phase2: Vec<BfsStats>,
    /// Edges removed by the deletion threshold.
    pub deleted: usize,
}

impl PieceStats {
    fn idle(c: &Cluster) -> Self {
        PieceStats {
            edges: c.edges.len(),
            vertices: c.vertices.len(),
            eligible: false,
            skipped: None,
            phase1: Vec::new(),
            phase1_fraction: 0.0,
            phase2: Vec::new(),
            deleted: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.phase1.iter().chain(&self.phase2).map(|s| s.steps).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompOutcome {
    pub weights: Vec<f64>,
    pub pieces: Vec<PieceStats>,
    /// `C_PS * rho * ln(nW/(delta eps)) * ln^2 ln(nW/eps)`; the analysis
    /// needs this `<= 1`.
    pub hypothesis: f64,
}

impl DecompOutcome {
    /// The reweighted graph with zero-weight edges dropped.
    pub fn graph(&self, g: &DirectedGraph) -> Result<DirectedGraph> {
        Ok(g.with_weights(&self.weights)?.support().0)
    }
}

/// Two-phase reweighting of every sufficiently dense piece of `decomp`,
/// followed by deletion of edges below `eps / (4 n m)` with tree repair.
/// `w_cap` bounds every weight of `g`.
#[allow(clippy::too_many_arguments)]
pub fn decomp_sparsify(
    decomp: &Decomposition,
    g: &DirectedGraph,
    tree: &SpanningTree,
    delta: f64,
    eps: f64,
    w_cap: f64,
    cfg: &SparsifyConfig,
) -> Result<DecompOutcome> {
    decomp_keyed(decomp, g, tree, delta, eps, w_cap, cfg, derive(cfg.seed, &[0x6473]))
}

#[allow(clippy::too_many_arguments)]
fn decomp_keyed(
    decomp: &Decomposition,
    g: &DirectedGraph,
    tree: &SpanningTree,
    delta: f64,
    eps: f64,
    w_cap: f64,
    cfg: &SparsifyConfig,
    key: u64,
) -> Result<DecompOutcome> {
    cfg.validate()?;
    let n = g.n() as f64;
    let rho = decomp.quality;
    let hypothesis = cfg.c_ps
        * rho
        * (n * w_cap / (delta * eps)).ln()
        * (n * w_cap / eps).ln().ln().max(0.0).powi(2);
    if cfg.profile == Profile::PaperFaithful && hypothesis > 1.0 && !decomp.pieces.is_empty() {
        let dense = decomp
            .pieces
            .iter()
            .any(|p| p.edges.len() as f64 >= cfg.min_density() * p.vertices.len() as f64);
        if dense {
            return Err(Error::PreconditionViolated(format!(
                "C_PS rho ln(nW/(delta eps)) ln^2 ln(nW/eps) = {hypothesis} exceeds 1"
            )));
        }
    }
    let clusters: Vec<Cluster> = decomp.pieces.iter().map(|p| Cluster::from_piece(p, g.weights(), rho)).collect();
    let schedule = Schedule { delta_split: 4.0, eps, delta, w_cap, cluster_dims: false };
    let (weights, pieces) = two_phase(g, &clusters, tree, &schedule, cfg, key)?;
    Ok(DecompOutcome { weights, pieces, hypothesis })
}

/// Parameters shared by every cluster of one two-phase pass.
pub(crate) struct Schedule {
    /// Each call gets `delta / (delta_split * I * tau)`.
    pub delta_split: f64,
    pub eps: f64,
    pub delta: f64,
    pub w_cap: f64,
    /// Step parameters use the cluster's own `(n, m)` instead of those of
    /// `g`.
    pub cluster_dims: bool,
}

/// Runs the two-phase reweighting on every dense enough cluster, in
/// parallel, then deletes cluster edges below `eps / (4 n m)` and routes
/// their weight on the tree. Clusters are edge-disjoint and disjoint from
/// the tree, so per-cluster changes add.
pub(crate) fn two_phase(
    g: &DirectedGraph,
    clusters: &[Cluster],
    tree: &SpanningTree,
    sch: &Schedule,
    cfg: &SparsifyConfig,
    key: u64,
) -> Result<(Vec<f64>, Vec<PieceStats>)> {
    let (n, m) = (g.n() as f64, g.m() as f64);
    let (eps, delta, w_cap) = (sch.eps, sch.delta, sch.w_cap);
    let count = clusters.len().max(1) as f64;
    let ell1 = 1.0 / (2.0 * (n * w_cap / eps).ln().powi(2));
    let tau1 = (2.0 / ell1).ln().ceil().max(1.0) as usize;
    let ell2 = eps / (4.0 * n * m * w_cap);
    let tau2 = (2.0 / ell2).ln().ceil().max(1.0) as usize;
    let cutoff = eps / (4.0 * n * m);
    let w0 = g.weights();

    let results: Vec<Result<(Vec<(usize, f64)>, PieceStats)>> = clusters
        .par_iter()
        .enumerate()
        .map(|(i, cluster)| {
            let mut stats = PieceStats::idle(cluster);
            if cluster.edges.is_empty()
                || (cluster.edges.len() as f64) < cfg.min_density() * cluster.vertices.len() as f64
            {
                return Ok((Vec::new(), stats));
            }
            stats.eligible = true;
            let pkey = derive(key, &[i as u64]);
            let mut local = w0.to_vec();
            let w_star = w0;
            let run = |local: &mut Vec<f64>, ell: f64, tau_c: usize, f: &[usize], phase: u64| {
                let mut out = Vec::with_capacity(tau_c);
                for c in 0..tau_c {
                    let res = bfs_keyed(
                        g,
                        local,
                        cluster,
                        w_star,
                        ell,
                        delta / (sch.delta_split * count * tau_c as f64),
                        eps / (4.0 * count * tau_c as f64),
                        f,
                        tree,
                        cfg,
                        derive(pkey, &[phase, c as u64]),
                        sch.cluster_dims.then(|| (cluster.vertices.len(), cluster.edges.len())),
                    )?;
                    *local = res.weights;
                    out.push(res.stats);
                }
                Ok::<_, Error>(out)
            };
            let phases = (|| {
                stats.phase1 = run(&mut local, ell1, tau1, &cluster.edges, 1)?;
                let f2: Vec<usize> =
                    cluster.edges.iter().copied().filter(|&e| local[e] <= ell1 * w_star[e]).collect();
                stats.phase1_fraction = f2.len() as f64 / cluster.edges.len() as f64;
                if 4 * f2.len() >= cluster.edges.len() {
                    stats.phase2 = run(&mut local, ell2, tau2, &f2, 2)?;
                }
                Ok::<_, Error>(())
            })();
            match phases {
                Ok(()) => {}
                Err(e @ (Error::NoConvergence { .. } | Error::DegenerateConstraint)) => {
                    stats.skipped = Some(e.to_string());
                    return Ok((Vec::new(), stats));
                }
                Err(e) => return Err(e),
            }
            let mut z = vec![0.0; g.m()];
            for &e in &cluster.edges {
                if local[e] <= cutoff {
                    z[e] = local[e];
                    local[e] = 0.0;
                    stats.deleted += 1;
                }
            }
            if stats.deleted > 0 {
                let y = rounding(g, &z, tree)?;
                for &e in &tree.edges {
                    local[e] += y[e];
                }
            }
            let changes = cluster
                .edges
                .iter()
                .chain(&tree.edges)
                .filter(|&&e| local[e] != w0[e])
                .map(|&e| (e, local[e] - w0[e]))
                .collect();
            Ok((changes, stats))
        })
        .collect();

    let mut acc = vec![Compensated::default(); g.m()];
    let mut pieces = Vec::with_capacity(results.len());
    for r in results {
        let (changes, stats) = r?;
        for (e, d) in changes {
            acc[e].add(d);
        }
        pieces.push(stats);
    }
    let weights = (0..g.m()).map(|e| (w0[e] + acc[e].value()).max(0.0)).collect();
    Ok((weights, pieces))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    /// Nonzero non-tree edges at the start of the round.
    pub nnz_before: usize,
    pub nnz_after: usize,
    pub pieces: usize,
    pub eligible_pieces: usize,
    pub skipped_pieces: usize,
    pub rho: f64,
    pub steps: usize,
    /// Edges dropped by the global deletion threshold after the pieces ran.
    pub deleted: usize,
    pub decomp_hypothesis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyResult {
    /// Weights over the edges of the input; zero marks a removed edge.
    pub weights: Vec<f64>,
    pub graph: DirectedGraph,
    pub rounds: Vec<RoundStats>,
    pub max_rounds: usize,
    pub target: f64,
    /// `max w_out / w_in` over surviving edges.
    pub weight_growth: f64,
}

impl SparsifyResult {
    pub fn nnz(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Eulerian sparsifier of `g` with exact degree preservation.
pub fn fast_sparsify(g: &DirectedGraph, cfg: &SparsifyConfig) -> Result<SparsifyResult> {
    fast_sparsify_with(g, cfg, |_, _| {})
}

/// As [`fast_sparsify`], calling `on_round` with each round's statistics and
/// the weights after it.
pub fn fast_sparsify_with(
    g: &DirectedGraph,
    cfg: &SparsifyConfig,
    mut on_round: impl FnMut(&RoundStats, &[f64]),
) -> Result<SparsifyResult> {
    cfg.validate()?;
    check_eulerian(g)?;
    require_connected(g)?;
    let (n, m) = (g.n(), g.m());
    // The analysis assumes weights in [1, U]; rescale and undo at the end.
    let wmin = g.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let scale = if wmin < 1.0 { 1.0 / wmin } else { 1.0 };
    let mut w: Vec<f64> = g.weights().iter().map(|x| x * scale).collect();
    let gs = g.with_weights(&w)?;
    let tree = spanning_tree(&gs)?;
    let in_tree = tree.mask(m);
    let off_tree: Vec<usize> = (0..m).filter(|&e| !in_tree[e]).collect();
    let u = gs.max_weight() / gs.min_positive_weight();
    let rounds = ((6.0 * (n.max(2) as f64).ln()).ceil() as usize).max(1);
    let u_max = u * cfg.c_ps.powi(rounds as i32);
    let target = cfg.sparsity_target(n, m, rounds, u_max);
    let round_delta = cfg.delta / (2.0 * rounds as f64);
    let round_eps = cfg.eps / (4.0 * rounds as f64);
    let cutoff = cfg.eps / (4.0 * m as f64 * n as f64);

    let mut trace = Vec::new();
    for t in 0..cfg.round_limit.map_or(rounds, |r| r.min(rounds)) {
        let live: Vec<usize> = off_tree.iter().copied().filter(|&e| w[e] > 0.0).collect();
        if (live.len() as f64) <= target || live.is_empty() {
            break;
        }
        let gt = gs.with_weights(&w)?;
        let lengths = er_overestimate_edges(&gt, &live, round_delta, derive(cfg.seed, &[0x6572, t as u64]))?;
        let decomp = er_decomp_with_lengths(&gt, &live, &lengths.values, 2.0);
        let out = decomp_keyed(
            &decomp,
            &gt,
            &tree,
            round_delta,
            round_eps,
            u_max,
            cfg,
            derive(cfg.seed, &[0x6473, t as u64]),
        )?;
        let unchanged = out.weights == w;
        w = out.weights;
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
            let y = rounding(&gs, &z, &tree)?;
            for &e in &tree.edges {
                w[e] += y[e];
            }
        }
        let stats = RoundStats {
            round: t,
            nnz_before: live.len(),
            nnz_after: off_tree.iter().filter(|&&e| w[e] > 0.0).count(),
            pieces: out.pieces.len(),
            eligible_pieces: out.pieces.iter().filter(|p| p.eligible).count(),
            skipped_pieces: out.pieces.iter().filter(|p| p.skipped.is_some()).count(),
            rho: decomp.quality,
            steps: out.pieces.iter().map(PieceStats::steps).sum(),
            deleted,
            decomp_hypothesis: out.hypothesis,
        };
        on_round(&stats, &w);
        let stalled = unchanged && deleted == 0;
        trace.push(stats);
        if stalled {
            // Later rounds would see the same graph; stop here.
            break;
        }
    }

    for x in &mut w {
        *x /= scale;
    }
    let weight_growth = (0..m)
        .filter(|&e| w[e] > 0.0)
        .map(|e| w[e] / g.weight(e))
        .fold(0.0, f64::max);
    let graph = g.with_weights(&w)?.support().0;
    Ok(SparsifyResult { weights: w, graph, rounds: trace, max_rounds: rounds, target, weight_growth })
}

/// Zero tolerance for integer weights, otherwise `1e-12 ||w||_1`.
pub(crate) fn check_eulerian(g: &DirectedGraph) -> Result<()> {
    let integral = g.weights().iter().all(|w| w.fract() == 0.0 && *w < 2f64.powi(52));
    let tol = if integral { 0.0 } else { 1e-12 * g.total_weight() };
    let imbalance = degree_imbalance(g).iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if imbalance > tol {
        return Err(Error::NotEulerian { imbalance });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::er_decomp;
    use crate::dense;
    use crate::graph::{build_graph, complete_bidirected, directed_cycle, random_eulerian};

    fn whole(g: &DirectedGraph) -> Cluster {
        let edges: Vec<usize> = (0..g.m()).collect();
        Cluster { edges, vertices: (0..g.n()).collect(), w_floor: 1.0, rho: 1.0 }
    }

    fn residual(g: &DirectedGraph, a: &[f64], b: &[f64]) -> f64 {
        dense::degree_residual(g, a, b)
    }

    #[test]
    fn paper_parameters_are_a_fixed_point() {
        let cfg = SparsifyConfig::paper(0.1, 0.01, 0);
        let p = cfg.step_parameters(16, 200, 0.01, 0.01, 0.1);
        assert_eq!(p.tau, (720.0 / (p.eta * p.eta)).ceil() as usize);
        let lg = (60.0 * 200.0 * p.tau as f64 / 0.01).ln();
        assert!((p.eta - 1.0 / (20.0 * lg.sqrt())).abs() < 1e-12);
        assert!(p.xi <= 1e-3 && p.xi > 0.0);
    }

    #[test]
    fn bfs_on_dense_cluster_keeps_degrees_and_band() {
        let g = complete_bidirected(12);
        // A Hamiltonian path as tree; cluster = the other edges.
        let tree = spanning_tree(&g).unwrap();
        let mask = tree.mask(g.m());
        let edges: Vec<usize> = (0..g.m()).filter(|&e| !mask[e]).collect();
        let cluster = Cluster { edges: edges.clone(), vertices: (0..12).collect(), w_floor: 1.0, rho: 1.0 };
        let cfg = SparsifyConfig { density_guard: 4.0, ..SparsifyConfig::practical(0.25, 0.1, 3) };
        let w = g.weights().to_vec();
        let ell = 0.05;
        let out = basic_fast_sparsify(&g, &w, &cluster, &w, ell, 0.1, 0.1, &edges, &tree, &cfg).unwrap();
        assert!(residual(&g, &w, &out.weights) <= 1e-9 * g.total_weight());
        for &e in &edges {
            let x = out.weights[e];
            assert!(x >= ell / 2.0 * w[e] && x <= 60.0 * w[e], "edge {e}: {x}");
        }
        let ratio: f64 = edges.iter().map(|&e| out.weights[e]).sum::<f64>() / edges.len() as f64;
        assert!((ratio - 1.0).abs() <= 0.1, "{ratio}");
        assert!(out.stats.stop != StopReason::Stalled);
    }

    #[test]
    fn saturated_input_returns_immediately() {
        let g = complete_bidirected(10);
        let tree = spanning_tree(&g).unwrap();
        let mask = tree.mask(g.m());
        let edges: Vec<usize> = (0..g.m()).filter(|&e| !mask[e]).collect();
        let cluster = Cluster { edges: edges.clone(), vertices: (0..10).collect(), w_floor: 1.0, rho: 1.0 };
        let cfg = SparsifyConfig { density_guard: 1.0, ..SparsifyConfig::practical(0.25, 0.1, 0) };
        let w = g.weights().to_vec();
        let out = basic_fast_sparsify(&g, &w, &cluster, &w, 1.0, 0.1, 0.1, &edges, &tree, &cfg).unwrap();
        assert_eq!(out.stats.stop, StopReason::Saturated);
        assert_eq!(out.stats.steps, 0);
        assert_eq!(out.weights, w);
    }

    #[test]
    fn cycle_cluster_stalls_cleanly() {
        // An 8-cycle has a one-dimensional circulation space, which the
        // orthogonality constraint removes.
        let mut edges: Vec<(usize, usize, f64)> = (0..8).map(|i| (i, (i + 1) % 8, 1.0)).collect();
        edges.extend((0..8).map(|i| ((i + 1) % 8, i, 3.0)));
        let g = build_graph(8, &edges).unwrap();
        let tree = SpanningTree::from_edges(
            &g,
            &(0..g.m()).filter(|&e| g.head(e) > g.tail(e) && g.head(e) - g.tail(e) == 1).collect::<Vec<_>>(),
        )
        .unwrap();
        let cyc: Vec<usize> = (0..g.m()).filter(|&e| g.weight(e) == 1.0).collect();
        let cluster = Cluster { edges: cyc.clone(), vertices: (0..8).collect(), w_floor: 1.0, rho: 1.0 };
        let cfg = SparsifyConfig { density_guard: 1.0, ..SparsifyConfig::practical(0.25, 0.1, 0) };
        let w = g.weights().to_vec();
        let out = basic_fast_sparsify(&g, &w, &cluster, &w, 0.01, 0.1, 0.1, &cyc, &tree, &cfg).unwrap();
        assert!(residual(&g, &w, &out.weights) <= 1e-9 * g.total_weight());
        for &e in &cyc {
            assert!(out.weights[e] >= 0.005 && out.weights[e] <= 60.0);
        }
    }

    #[test]
    fn preconditions_reported() {
        let g = complete_bidirected(6);
        let tree = spanning_tree(&g).unwrap();
        let cluster = whole(&g);
        let w = g.weights().to_vec();
        let cfg = SparsifyConfig::paper(0.1, 0.1, 0);
        let err = basic_fast_sparsify(&g, &w, &cluster, &w, 0.1, 0.1, 0.1, &cluster.edges, &tree, &cfg);
        assert!(matches!(err, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn cycle_is_identity() {
        let g = directed_cycle(9);
        let out = fast_sparsify(&g, &SparsifyConfig::practical(0.25, 0.1, 0)).unwrap();
        assert_eq!(out.weights, g.weights());
        assert!(out.rounds.is_empty());
    }

    #[test]
    fn not_eulerian_rejected() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 2.0)]).unwrap();
        let err = fast_sparsify(&g, &SparsifyConfig::practical(0.25, 0.1, 0));
        assert!(matches!(err, Err(Error::NotEulerian { .. })));
    }

    #[test]
    fn decomposition_below_density_is_noop() {
        let g = random_eulerian(24, 72, 4, 2).unwrap();
        let d = er_decomp(&g, 2.0, 0.1, 2).unwrap();
        let tree = spanning_tree(&g).unwrap();
        let out = decomp_sparsify(&d, &g, &tree, 0.1, 0.1, 4.0, &SparsifyConfig::paper(0.1, 0.1, 0)).unwrap();
        assert_eq!(out.weights, g.weights());
        assert!(out.pieces.iter().all(|p| !p.eligible));
    }

    #[test]
    fn fast_sparsify_preserves_degrees() {
        let g = random_eulerian(32, 128, 32, 5).unwrap();
        let cfg = SparsifyConfig { target_constant: Some(0.001), density_guard: 4.0, ..SparsifyConfig::practical(0.25, 0.1, 5) };
        let out = fast_sparsify(&g, &cfg).unwrap();
        assert!(residual(&g, g.weights(), &out.weights) <= 1e-9 * g.total_weight());
        assert!(out.graph.m() <= g.m());
    }

    #[test]
    fn deterministic_under_seed() {
        let g = complete_bidirected(16);
        let cfg = SparsifyConfig { target_constant: Some(0.001), density_guard: 2.0, ..SparsifyConfig::practical(0.5, 0.1, 11) };
        let a = fast_sparsify(&g, &cfg).unwrap();
        let b = fast_sparsify(&g, &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
    }
}
