//! Eulerian Laplacian solving and stationary distributions.
//!
//! Both solvers run preconditioned conjugate gradient on normal equations
//! `M^T Q M y = M^T Q c`, where `M` is a directed Laplacian and `Q` a fixed
//! Chebyshev approximation of an undirected Laplacian pseudoinverse. This
//! is a single preconditioning level, not a recursive chain, so the running
//! time is not near-linear.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::dense;
use crate::error::{Error, Result};
use crate::graph::{directed_apply_transpose_w, directed_apply_w, DirectedGraph};
use crate::solver::{dot, energy_norm, SolverHandle, SolverOptions};
use crate::sparsify::{check_eulerian, fast_sparsify, SparsifyConfig};

#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Builds the preconditioner; its `eps` is the sparsifier quality.
    pub sparsify: SparsifyConfig,
    /// Relative energy accuracy of the Chebyshev preconditioner.
    pub precond_xi: f64,
    /// `None` picks `max(1000, 20 n)`.
    pub max_iterations: Option<usize>,
    /// Skip the sparsifier and precondition with `und(G)` itself.
    pub skip_sparsify: bool,
}

impl SolveConfig {
    pub fn new(seed: u64) -> Self {
        SolveConfig {
            sparsify: SparsifyConfig::practical(0.5, 0.1, seed),
            precond_xi: 0.1,
            max_iterations: None,
            skip_sparsify: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerianSolveResult {
    pub x: Vec<f64>,
    /// `||x - vL^+ b||_L / ||vL^+ b||_L` from the dense oracle; `None`
    /// above the oracle limit.
    pub achieved_error: Option<f64>,
    /// Certified upper bound on the relative `L`-norm error.
    pub certified_error: f64,
    pub iterations: usize,
    /// Edges kept by the preconditioner graph.
    pub preconditioner_nnz: usize,
    /// Extreme-eigenvalue ratio of the preconditioned operator, read off
    /// the CG coefficients.
    pub condition_estimate: f64,
    /// `||L^{+/2} (vL - vL^T)/2 L^{+/2}||` at oracle scale.
    pub skew_norm: Option<f64>,
    /// Preconditioned residual norm per iteration.
    pub residual_trace: Vec<f64>,
}

struct Pcg {
    x: Vec<f64>,
    iterations: usize,
    trace: Vec<f64>,
    converged: bool,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

/// PCG for a PSD operator `a` with PSD preconditioner `p`. `accept(x, r)`
/// is called after each step with the preconditioned residual norm.
fn pcg(
    a: impl Fn(&[f64]) -> Vec<f64>,
    p: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    max_iterations: usize,
    mut accept: impl FnMut(&[f64], f64) -> Result<bool>,
) -> Result<Pcg> {
    let n = rhs.len();
    let mut out = Pcg {
        x: vec![0.0; n],
        iterations: 0,
        trace: Vec::new(),
        converged: false,
        alphas: Vec::new(),
        betas: Vec::new(),
    };
    let mut s = rhs.to_vec();
    let mut z = p(&s);
    let mut d = z.clone();
    let mut rz = dot(&s, &z);
    if rz <= 0.0 {
        out.converged = accept(&out.x, 0.0)?;
        return Ok(out);
    }
    while out.iterations < max_iterations {
        let ad = a(&d);
        let curv = dot(&d, &ad);
        if curv <= 0.0 || !curv.is_finite() {
            break;
        }
        let alpha = rz / curv;
        for i in 0..n {
            out.x[i] += alpha * d[i];
            s[i] -= alpha * ad[i];
        }
        z = p(&s);
        let rz_new = dot(&s, &z).max(0.0);
        out.iterations += 1;
        out.alphas.push(alpha);
        out.trace.push(rz_new.sqrt());
        if accept(&out.x, rz_new.sqrt())? {
            out.converged = true;
            break;
        }
        if rz_new == 0.0 {
            break;
        }
        let beta = rz_new / rz;
        out.betas.push(beta);
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
        rz = rz_new;
    }
    Ok(out)
}

/// Condition number of the Lanczos tridiagonal implied by CG coefficients.
fn lanczos_condition(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    if k == 0 {
        return 1.0;
    }
    let mut t = DMatrix::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < k {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let ev = SymmetricEigen::new(t).eigenvalues;
    let hi = ev.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ev.iter().cloned().fold(f64::MAX, f64::min);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn linear_handle(g: &DirectedGraph, seed: u64, xi: f64) -> Result<(SolverHandle, usize)> {
    let h = SolverHandle::new(g, &SolverOptions { seed, ..SolverOptions::default() })?;
    let k = h.linear_iterations_for(xi);
    Ok((h, k))
}

/// Solves `vL x = b` for an Eulerian, connected `g` and `b ⊥ 1`, returning
/// `x ⊥ 1` with `||x - vL^+ b||_L <= eps ||vL^+ b||_L`.
///
/// Stopping uses `L/4 ⪯ vL^T L^+ vL`, so `||x - x*||_L <= 2 ||b - vL x||_{L^+}`,
/// with the right side measured by an adaptive solve on `und(G)`.
pub fn eulerian_solve(
    g: &DirectedGraph,
    b: &[f64],
    eps: f64,
    delta: f64,
    cfg: &SolveConfig,
) -> Result<EulerianSolveResult> {
    let n = g.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InfeasibleParameters(format!("eps={eps}, delta={delta}")));
    }
    check_eulerian(g)?;
    let b_l1: f64 = b.iter().map(|v| v.abs()).sum();
    let b_sum: f64 = b.iter().sum();
    if b_sum.abs() > 1e-10 * b_l1.max(f64::MIN_POSITIVE) {
        return Err(Error::PreconditionViolated(format!("b is not orthogonal to 1 (sum {b_sum:e})")));
    }
    let exact = SolverHandle::new(
        g,
        &SolverOptions { delta, seed: cfg.sparsify.seed, ..SolverOptions::default() },
    )?;
    if b_l1 == 0.0 {
        return Ok(EulerianSolveResult {
            x: vec![0.0; n],
            achieved_error: Some(0.0),
            certified_error: 0.0,
            iterations: 0,
            preconditioner_nnz: 0,
            condition_estimate: 1.0,
            skew_norm: None,
            residual_trace: Vec::new(),
        });
    }

    let precond_graph = if cfg.skip_sparsify {
        g.clone()
    } else {
        fast_sparsify(g, &cfg.sparsify)?.graph
    };
    let (ph, k) = linear_handle(&precond_graph, cfg.sparsify.seed, cfg.precond_xi)?;
    let q = |v: &[f64]| ph.apply_linear(v, k);
    let w = g.weights();
    let a = |y: &[f64]| directed_apply_transpose_w(g, w, &q(&directed_apply_w(g, w, y)));
    let rhs = directed_apply_transpose_w(g, w, &q(b));

    let xi = 1e-3;
    let mut certified = f64::INFINITY;
    let accept = |x: &[f64], _: f64| -> Result<bool> {
        let vx = directed_apply_w(g, w, x);
        let r: Vec<f64> = b.iter().zip(&vx).map(|(b, v)| b - v).collect();
        let xl = energy_norm(g, x);
        if xl == 0.0 {
            return Ok(false);
        }
        let target = eps / (1.0 + eps) * xl / 2.0;
        let proxy = dot(&r, &q(&r)).max(0.0).sqrt();
        if proxy > target {
            return Ok(false);
        }
        let s = exact.solve(&r, xi)?;
        let rl = (dot(&r, &s).max(0.0) / (1.0 - xi)).sqrt();
        if rl <= target {
            // e <= 2 rl and ||x*|| >= ||x|| - 2 rl
            certified = 2.0 * rl / (xl - 2.0 * rl);
            return Ok(true);
        }
        Ok(false)
    };
    let max_it = cfg.max_iterations.unwrap_or((20 * n).max(1000));
    let run = pcg(a, q, &rhs, max_it, accept)?;
    if !run.converged {
        return Err(Error::NoConvergence {
            iterations: run.iterations,
            residual: run.trace.last().copied().unwrap_or(f64::NAN),
        });
    }
    let mut x = run.x;
    exact.project(&mut x);

    let (achieved_error, skew_norm) = if n <= dense::oracle_limit() {
        let vl = dense::directed_laplacian(g);
        let xs = dense::pinv_general(&vl) * nalgebra::DVector::from_column_slice(b);
        let diff: Vec<f64> = x.iter().zip(xs.iter()).map(|(a, b)| a - b).collect();
        let err = energy_norm(g, &diff) / energy_norm(g, xs.as_slice());
        let lh = dense::pinv_half(&dense::undirected_laplacian(g))?;
        let skew = (&vl - vl.transpose()) * 0.5;
        (Some(err), Some(dense::normalized_norm(&lh, &skew)))
    } else {
        (None, None)
    };

    Ok(EulerianSolveResult {
        x,
        achieved_error,
        certified_error: certified,
        iterations: run.iterations,
        preconditioner_nnz: precond_graph.nnz(),
        condition_estimate: lanczos_condition(&run.alphas, &run.betas),
        skew_norm,
        residual_trace: run.trace,
    })
}

/// Forward and backward reachability from vertex 0 over positive edges.
fn strongly_connected(g: &DirectedGraph) -> bool {
    let n = g.n();
    if n <= 1 {
        return true;
    }
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for (u, v, w) in g.edges() {
        if w > 0.0 {
            fwd[u].push(v);
            bwd[v].push(u);
        }
    }
    let reach = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(&fwd) && reach(&bwd)
}

/// Stationary distribution of the chain whose transition probabilities are
/// the edge weights of `chain`: edge `(u, v)` carries `P[u][v]`.
/// Out-weights may sum to less than one; the rest is an implicit self-loop,
/// which does not change the stationary distribution.
///
/// Each outer step reweights edges by the current estimate `pi`, solves
/// `M z = 0` with `M = vL(pi_u P_uv)` via `z = 1 + y`, `M y = -M 1`, and
/// rescales. Lazy power steps then confirm the fixed point.
pub fn stationary_distribution(chain: &DirectedGraph, eps: f64) -> Result<Vec<f64>> {
    let n = chain.n();
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InfeasibleParameters(format!("eps={eps}")));
    }
    if n == 0 {
        return Err(Error::InfeasibleParameters("empty chain".into()));
    }
    let mut out = vec![0.0; n];
    for (u, _, w) in chain.edges() {
        out[u] += w;
    }
    if let Some(u) = (0..n).find(|&u| out[u] > 1.0 + 1e-9) {
        return Err(Error::InfeasibleParameters(format!("row {u} sums to {}", out[u])));
    }
    if !strongly_connected(chain) {
        return Err(Error::NotIrreducible);
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }

    let p = chain.weights();
    let mut pi = vec![1.0 / n as f64; n];
    let tol = (eps * 1e-3).max(1e-13);
    for outer in 0..20 {
        let w: Vec<f64> = (0..chain.m()).map(|e| pi[chain.head(e)] * p[e]).collect();
        let gk = chain.with_weights(&w)?;
        let (ph, k) = linear_handle(&gk, outer as u64, 0.1)?;
        let q = |v: &[f64]| ph.apply_linear(v, k);
        let r = directed_apply_w(chain, &w, &vec![1.0; n]);
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let a = |y: &[f64]| directed_apply_transpose_w(chain, &w, &q(&directed_apply_w(chain, &w, y)));
        let rhs = directed_apply_transpose_w(chain, &w, &q(&neg_r));
        let r0 = dot(&rhs, &q(&rhs)).max(0.0).sqrt();
        let run = pcg(a, q, &rhs, (20 * n).max(1000), |_, res| Ok(res <= tol * r0))?;
        let mut next: Vec<f64> = (0..n).map(|v| (pi[v] * (1.0 + run.x[v])).max(0.0)).collect();
        let total: f64 = next.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoConvergence { iterations: outer, residual: f64::NAN });
        }
        for v in &mut next {
            *v /= total;
        }
        let change = dist(&pi, &next);
        pi = next;
        if change <= eps / 10.0 {
            let lazy = lazy_step(chain, &pi);
            if dist(&pi, &lazy) <= eps / 10.0 {
                return Ok(pi);
            }
        }
    }
    Err(Error::NoConvergence { iterations: 20, residual: dist(&pi, &lazy_step(chain, &pi)) })
}

/// One step of `pi -> (pi + P^T pi) / 2`.
fn lazy_step(chain: &DirectedGraph, pi: &[f64]) -> Vec<f64> {
    let mut next: Vec<f64> = pi.iter().map(|v| v / 2.0).collect();
    let mut stay = pi.to_vec();
    for (u, v, w) in chain.edges() {
        next[v] += pi[u] * w / 2.0;
        stay[u] -= pi[u] * w;
    }
    for v in 0..pi.len() {
        next[v] += stay[v] / 2.0;
    }
    next
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, random_eulerian};

    fn cfg() -> SolveConfig {
        SolveConfig::new(3)
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let r = eulerian_solve(&g, &[0.0; 3], 1e-6, 0.1, &cfg()).unwrap();
        assert_eq!(r.x, vec![0.0; 3]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn three_cycle_matches_pseudoinverse() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let b = [1.0, -1.0, 0.0];
        let r = eulerian_solve(&g, &b, 1e-8, 0.1, &cfg()).unwrap();
        assert!(r.achieved_error.unwrap() <= 1e-8, "{:?}", r.achieved_error);
        assert!(r.certified_error <= 1e-8);
        let vx = directed_apply_w(&g, g.weights(), &r.x);
        for i in 0..3 {
            assert!((vx[i] - b[i]).abs() < 1e-7);
        }
        assert!(r.x.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn random_eulerian_meets_accuracy() {
        let g = random_eulerian(60, 400, 8, 5).unwrap();
        let mut b: Vec<f64> = (0..60).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mean = b.iter().sum::<f64>() / 60.0;
        b.iter_mut().for_each(|v| *v -= mean);
        let r = eulerian_solve(&g, &b, 1e-6, 0.1, &cfg()).unwrap();
        assert!(r.achieved_error.unwrap() <= 1e-6);
        assert!(r.condition_estimate >= 1.0 - 1e-9);
        assert!(r.skew_norm.unwrap() > 0.0);
    }

    #[test]
    fn rejects_unbalanced() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 2.0)]).unwrap();
        let e = eulerian_solve(&g, &[1.0, -1.0, 0.0], 1e-6, 0.1, &cfg()).unwrap_err();
        assert!(matches!(e, Error::NotEulerian { .. }));
    }

    #[test]
    fn rejects_rhs_with_mean() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let e = eulerian_solve(&g, &[1.0, 0.0, 0.0], 1e-6, 0.1, &cfg()).unwrap_err();
        assert!(matches!(e, Error::PreconditionViolated(_)));
    }

    #[test]
    fn two_state_closed_form() {
        let (p, q) = (0.3, 0.05);
        let chain = build_graph(2, &[(0, 1, p), (1, 0, q)]).unwrap();
        let pi = stationary_distribution(&chain, 1e-10).unwrap();
        assert!((pi[0] - q / (p + q)).abs() < 1e-9);
        assert!((pi[1] - p / (p + q)).abs() < 1e-9);
    }

    #[test]
    fn symmetric_cycle_is_uniform() {
        let n = 9;
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((i, (i + 1) % n, 0.5));
            edges.push(((i + 1) % n, i, 0.5));
        }
        let chain = build_graph(n, &edges).unwrap();
        let pi = stationary_distribution(&chain, 1e-10).unwrap();
        for v in pi {
            assert!((v - 1.0 / n as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn reducible_chain_rejected() {
        let chain = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        assert_eq!(stationary_distribution(&chain, 1e-6), Err(Error::NotIrreducible));
    }
}
