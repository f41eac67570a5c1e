//! Effective-resistance estimates from Gaussian sketches of electrical
//! potentials.
//!
//! Each repetition draws an `8 x m` Gaussian matrix `Q` with entries of
//! variance `1/8` and computes `Z = M B^T W^{1/2} Q^T`, with `M` the fixed
//! Chebyshev approximation of `L^+`. The squared distance between rows `u`
//! and `v` of `Z` is an unbiased-up-to-solver-error estimate of
//! `ER(u, v)`; the reported value is the median over `K` repetitions.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::rng::stream;
use crate::solver::{SolverHandle, SolverMode, SolverOptions};

/// Gaussian rows per repetition.
pub const SKETCH_ROWS: usize = 8;
/// Relative energy error of the inner linear solver.
pub const SOLVER_XI: f64 = 0.01;

/// Repetition count `K = ceil(8 ln(|S| / delta))`.
pub fn repetitions(pairs: usize, delta: f64) -> usize {
    ((8.0 * (pairs.max(1) as f64 / delta).ln()).ceil() as usize).max(1)
}

/// Estimates `ER(u, v)` for every pair, each within `[2/3, 4/3]` of the
/// truth with probability `>= 1 - delta` jointly.
pub fn approx_er(
    g: &DirectedGraph,
    pairs: &[(usize, usize)],
    delta: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::PreconditionViolated("empty pair set".into()));
    }
    if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u >= g.n() || v >= g.n()) {
        return Err(Error::VertexOutOfRange { index: 0, vertex: u.max(v), n: g.n() });
    }
    let opts = SolverOptions { delta, seed, ..Default::default() };
    let mut handle = SolverHandle::new(g, &opts)?;
    let k = handle.linear_iterations_for(SOLVER_XI);
    handle = SolverHandle::new(
        g,
        &SolverOptions {
            mode: SolverMode::Linear { iterations: k },
            mu2_lower_bound: Some(handle.mu2_lower_bound()),
            ..opts
        },
    )?;
    let reps = repetitions(pairs.len(), delta);
    let sqrt_w: Vec<f64> = g.weights().iter().map(|w| w.sqrt()).collect();
    let scale = (1.0 / SKETCH_ROWS as f64).sqrt();

    let samples: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, &[0x6572, rep as u64]);
            let mut est = vec![0.0; pairs.len()];
            for _ in 0..SKETCH_ROWS {
                let mut rhs = vec![0.0; g.n()];
                for e in 0..g.m() {
                    let q: f64 = rng.sample::<f64, _>(StandardNormal) * scale * sqrt_w[e];
                    rhs[g.head(e)] += q;
                    rhs[g.tail(e)] -= q;
                }
                let z = handle.apply_linear(&rhs, k);
                for (i, &(u, v)) in pairs.iter().enumerate() {
                    let d = z[u] - z[v];
                    est[i] += d * d;
                }
            }
            est
        })
        .collect();

    let mut out = Vec::with_capacity(pairs.len());
    let mut col = vec![0.0; reps];
    for i in 0..pairs.len() {
        for (r, s) in samples.iter().enumerate() {
            col[r] = s[i];
        }
        out.push(median(&mut col));
    }
    Ok(out)
}

/// Estimates for the endpoints of the listed edges.
pub fn approx_er_edges(g: &DirectedGraph, edges: &[usize], delta: f64, seed: u64) -> Result<Vec<f64>> {
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&e| (g.head(e), g.tail(e))).collect();
    approx_er(g, &pairs, delta, seed)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Edgewise resistance overestimate with its weighted-sum certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EROverestimate {
    pub values: Vec<f64>,
    /// `w^T r`.
    pub certificate: f64,
    /// `2 n`.
    pub budget: f64,
}

impl EROverestimate {
    pub fn within_budget(&self) -> bool {
        self.certificate <= self.budget
    }
}

/// `1.5 x approx_er` over every edge.
pub fn er_overestimate(g: &DirectedGraph, delta: f64, seed: u64) -> Result<EROverestimate> {
    let all: Vec<usize> = (0..g.m()).collect();
    er_overestimate_edges(g, &all, delta, seed)
}

/// Overestimate restricted to `edges`, with resistances measured in `g`.
/// Entries outside `edges` are zero and do not enter the certificate.
pub fn er_overestimate_edges(
    g: &DirectedGraph,
    edges: &[usize],
    delta: f64,
    seed: u64,
) -> Result<EROverestimate> {
    let mut values = vec![0.0; g.m()];
    if !edges.is_empty() {
        let est = approx_er_edges(g, edges, delta, seed)?;
        for (&e, r) in edges.iter().zip(est) {
            values[e] = 1.5 * r;
        }
    }
    let certificate = edges.iter().map(|&e| g.weight(e) * values[e]).sum();
    Ok(EROverestimate { values, certificate, budget: 2.0 * g.n() as f64 })
}
