//! Approximate application of undirected Laplacian pseudoinverses.
//!
//! Both modes work on the degree-normalized operator
//! `N = D^{-1/2} L D^{-1/2}`, which is the Jacobi-preconditioned system.
//! Adaptive mode runs conjugate gradients and stops once the computable
//! bound `||D^{-1/2} r||_2 / sqrt(mu_2)` on the energy error falls below
//! `xi * ||D^{-1/2} b||_2 / sqrt(2)`, a lower bound on `xi ||L^+ b||_L`.
//! Linear mode runs a fixed number of Chebyshev steps on `[mu_lo, 2]`, so
//! the map `b -> x` is a fixed linear operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{components_masked, DirectedGraph};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverMode {
    Adaptive,
    /// Fixed-iteration Chebyshev; `b -> x` is linear.
    Linear { iterations: usize },
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub mode: SolverMode,
    /// Failure probability budget for the spectral-gap estimate.
    pub delta: f64,
    pub seed: u64,
    /// Lanczos steps per spectral-gap estimate.
    pub lanczos_steps: usize,
    /// Skips the estimate and uses this lower bound on `mu_2` directly.
    pub mu2_lower_bound: Option<f64>,
    /// Iteration cap for adaptive mode; `None` picks `max(1000, 20 n)`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: SolverMode::Adaptive,
            delta: 0.01,
            seed: 0,
            lanczos_steps: 60,
            mu2_lower_bound: None,
            max_iterations: None,
        }
    }
}

/// Immutable after construction; concurrent solves are safe.
#[derive(Debug, Clone)]
pub struct SolverHandle {
    n: usize,
    offsets: Vec<usize>,
    nbr: Vec<usize>,
    wts: Vec<f64>,
    inv_sqrt_deg: Vec<f64>,
    labels: Vec<usize>,
    comp_sizes: Vec<usize>,
    mu2_lb: f64,
    mode: SolverMode,
    max_iterations: usize,
}

/// Relative residual floor reachable in double precision.
fn precision_floor(n: usize) -> f64 {
    8.0 * (n.max(1) as f64).sqrt() * f64::EPSILON
}

impl SolverHandle {
    /// Handle for `und(G)`; the graph must be connected.
    pub fn new(g: &DirectedGraph, opts: &SolverOptions) -> Result<Self> {
        let h = Self::per_component(g.n(), g.heads(), g.tails(), g.weights(), opts);
        let nontrivial = h.comp_sizes.len();
        if g.n() > 1 && nontrivial != 1 {
            return Err(Error::Disconnected { components: nontrivial });
        }
        Ok(h)
    }

    /// Handle that solves independently on every connected component.
    /// Edges with zero weight are ignored.
    pub fn per_component(
        n: usize,
        heads: &[usize],
        tails: &[usize],
        w: &[f64],
        opts: &SolverOptions,
    ) -> Self {
        let mut deg = vec![0.0; n];
        let mut cnt = vec![0usize; n + 1];
        for e in 0..heads.len() {
            if w[e] > 0.0 {
                deg[heads[e]] += w[e];
                deg[tails[e]] += w[e];
                cnt[heads[e]] += 1;
                cnt[tails[e]] += 1;
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + cnt[v];
        }
        let mut fill = offsets.clone();
        let mut nbr = vec![0usize; offsets[n]];
        let mut wts = vec![0.0; offsets[n]];
        for e in 0..heads.len() {
            if w[e] > 0.0 {
                let (u, v) = (heads[e], tails[e]);
                nbr[fill[u]] = v;
                wts[fill[u]] = w[e];
                fill[u] += 1;
                nbr[fill[v]] = u;
                wts[fill[v]] = w[e];
                fill[v] += 1;
            }
        }
        let inv_sqrt_deg: Vec<f64> =
            deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
        let (_, raw) = components_masked(n, heads, tails, |e| w[e] > 0.0);
        // Relabel so that isolated vertices get usize::MAX and nontrivial
        // components are numbered densely.
        let mut map = std::collections::HashMap::new();
        let mut labels = vec![usize::MAX; n];
        let mut comp_sizes = Vec::new();
        for v in 0..n {
            if deg[v] > 0.0 {
                let next = map.len();
                let id = *map.entry(raw[v]).or_insert(next);
                if id == comp_sizes.len() {
                    comp_sizes.push(0);
                }
                comp_sizes[id] += 1;
                labels[v] = id;
            }
        }
        let mut h = SolverHandle {
            n,
            offsets,
            nbr,
            wts,
            inv_sqrt_deg,
            labels,
            comp_sizes,
            mu2_lb: 0.0,
            mode: opts.mode,
            max_iterations: opts.max_iterations.unwrap_or((20 * n).max(1000)),
        };
        h.mu2_lb = match opts.mu2_lower_bound {
            Some(lb) => lb,
            None => h.estimate_mu2_lower_bound(opts),
        };
        h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> SolverMode {
        self.mode
    }

    /// Lower bound on the smallest nonzero eigenvalue of `N`.
    pub fn mu2_lower_bound(&self) -> f64 {
        self.mu2_lb
    }

    /// `y = N z` on the non-isolated vertices.
    fn apply_n(&self, z: &[f64], y: &mut [f64]) {
        for v in 0..self.n {
            let s = self.inv_sqrt_deg[v];
            if s == 0.0 {
                y[v] = 0.0;
                continue;
            }
            let mut acc = 0.0;
            for i in self.offsets[v]..self.offsets[v + 1] {
                let u = self.nbr[i];
                acc += self.wts[i] * self.inv_sqrt_deg[u] * z[u];
            }
            y[v] = z[v] - s * acc;
        }
    }

    /// `L x` using the stored graph.
    pub fn apply_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for v in 0..self.n {
            let mut acc = 0.0;
            let mut d = 0.0;
            for i in self.offsets[v]..self.offsets[v + 1] {
                acc += self.wts[i] * x[self.nbr[i]];
                d += self.wts[i];
            }
            y[v] = d * x[v] - acc;
        }
        y
    }

    /// Removes the mean of `x` on every component; isolated vertices are
    /// zeroed.
    pub fn project(&self, x: &mut [f64]) {
        let k = self.comp_sizes.len();
        let mut sums = vec![0.0; k];
        for v in 0..self.n {
            if self.labels[v] != usize::MAX {
                sums[self.labels[v]] += x[v];
            }
        }
        for v in 0..self.n {
            match self.labels[v] {
                usize::MAX => x[v] = 0.0,
                c => x[v] -= sums[c] / self.comp_sizes[c] as f64,
            }
        }
    }

    /// Projects out the kernel of `N`: for each component, the direction
    /// `D^{1/2} 1_c`.
    fn deflate_n(&self, z: &mut [f64]) {
        let k = self.comp_sizes.len();
        let mut dot = vec![0.0; k];
        let mut nrm = vec![0.0; k];
        for v in 0..self.n {
            let c = self.labels[v];
            if c == usize::MAX {
                z[v] = 0.0;
                continue;
            }
            let s = 1.0 / self.inv_sqrt_deg[v];
            dot[c] += s * z[v];
            nrm[c] += s * s;
        }
        for v in 0..self.n {
            let c = self.labels[v];
            if c != usize::MAX {
                z[v] -= dot[c] / nrm[c] / self.inv_sqrt_deg[v];
            }
        }
    }

    /// Lanczos estimate of the smallest nonzero eigenvalue of `N`, turned
    /// into a lower bound via the Ritz residual. Falls back to a
    /// combinatorial bound when the estimate is not resolved.
    fn estimate_mu2_lower_bound(&self, opts: &SolverOptions) -> f64 {
        let active: usize = self.comp_sizes.iter().sum();
        let rank = active - self.comp_sizes.len();
        if rank == 0 {
            return 1.0;
        }
        let fallback = self.combinatorial_mu2_bound();
        let reps = ((1.0 / opts.delta.clamp(1e-300, 0.5)).ln().ceil() as usize).max(1);
        let steps = opts.lanczos_steps.min(rank).max(1);
        let mut best = f64::INFINITY;
        for rep in 0..reps {
            let mut rng = stream(opts.seed, &[0x6c61_6e63, rep as u64]);
            let (theta, res, _) = self.lanczos_smallest(steps, &mut rng, false);
            best = best.min(theta - res);
        }
        if best.is_finite() && best > fallback {
            best
        } else {
            fallback
        }
    }

    /// Scales `N`-coordinates back to vertex potentials: `x = D^{-1/2} z`.
    pub(crate) fn unscale(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.inv_sqrt_deg).map(|(z, s)| z * s).collect()
    }

    /// `mu_2 >= (w_min / w_max) / (diam * vol)` with `diam <= n` and `vol`
    /// the unweighted volume.
    fn combinatorial_mu2_bound(&self) -> f64 {
        let wmin = self.wts.iter().cloned().fold(f64::INFINITY, f64::min);
        let wmax = self.wts.iter().cloned().fold(0.0, f64::max);
        let vol = self.nbr.len() as f64;
        let diam = *self.comp_sizes.iter().max().unwrap_or(&1) as f64;
        (wmin / wmax) / (diam * vol)
    }

    /// Smallest Ritz value of `N` on the complement of its kernel, its
    /// residual norm, and optionally the Ritz vector (in `N` coordinates).
    pub(crate) fn lanczos_smallest(
        &self,
        k: usize,
        rng: &mut impl Rng,
        want_vector: bool,
    ) -> (f64, f64, Option<Vec<f64>>) {
        let n = self.n;
        let mut q: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        self.deflate_n(&mut q);
        let nrm = norm(&q);
        if nrm == 0.0 {
            return (0.0, f64::INFINITY, None);
        }
        scale(&mut q, 1.0 / nrm);
        let mut basis: Vec<Vec<f64>> = vec![q];
        let mut alpha = Vec::with_capacity(k);
        let mut beta: Vec<f64> = Vec::with_capacity(k);
        let mut w = vec![0.0; n];
        for j in 0..k {
            self.apply_n(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // Full reorthogonalization, twice for stability.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(&mut w, -c, b);
                }
                self.deflate_n(&mut w);
            }
            let bnorm = norm(&w);
            beta.push(bnorm);
            if bnorm <= 1e-12 * a.abs().max(1e-300) || j + 1 == k {
                break;
            }
            let mut next = w.clone();
            scale(&mut next, 1.0 / bnorm);
            basis.push(next);
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (idx, theta) = eig
            .eigenvalues
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let last = eig.eigenvectors[(m - 1, idx)].abs();
        let vector = want_vector.then(|| {
            let mut v = vec![0.0; n];
            for (j, b) in basis.iter().enumerate().take(m) {
                axpy(&mut v, eig.eigenvectors[(j, idx)], b);
            }
            v
        });
        (theta, beta[m - 1] * last, vector)
    }

    /// Adaptive solve of `L x = b` to relative energy error `xi`. `b` is
    /// projected onto the range of `L` first; the output has zero mean on
    /// every component.
    pub fn solve(&self, b: &[f64], xi: f64) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let mut bp = b.to_vec();
        self.project(&mut bp);
        let f: Vec<f64> = bp.iter().zip(&self.inv_sqrt_deg).map(|(x, s)| x * s).collect();
        let fnorm = norm(&f);
        if fnorm == 0.0 {
            return Ok(vec![0.0; self.n]);
        }
        let target = (xi * (self.mu2_lb / 2.0).sqrt()).max(precision_floor(self.n)) * fnorm;
        let mut z = vec![0.0; self.n];
        let mut r = f.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; self.n];
        let mut rr = dot(&r, &r);
        let mut it = 0;
        while rr.sqrt() > target {
            if it >= self.max_iterations {
                return Err(Error::NoConvergence { iterations: it, residual: rr.sqrt() / fnorm });
            }
            self.apply_n(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let a = rr / pap;
            axpy(&mut z, a, &p);
            axpy(&mut r, -a, &ap);
            it += 1;
            if it % 50 == 0 {
                // Replace the recursive residual to avoid drift.
                self.apply_n(&z, &mut ap);
                for i in 0..self.n {
                    r[i] = f[i] - ap[i];
                }
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..self.n {
                p[i] = r[i] + beta * p[i];
            }
        }
        let mut x: Vec<f64> = z.iter().zip(&self.inv_sqrt_deg).map(|(z, s)| z * s).collect();
        self.project(&mut x);
        Ok(x)
    }

    /// Fixed `k`-step Chebyshev approximation of `L^+ b`. Linear in `b`.
    pub fn apply_linear(&self, b: &[f64], k: usize) -> Vec<f64> {
        let mut bp = b.to_vec();
        self.project(&mut bp);
        let f: Vec<f64> = bp.iter().zip(&self.inv_sqrt_deg).map(|(x, s)| x * s).collect();
        let (lo, hi) = (self.mu2_lb.min(1.0), 2.0);
        let theta = (hi + lo) / 2.0;
        let delta = (hi - lo) / 2.0;
        let sigma = theta / delta;
        let mut rho_prev = 1.0 / sigma;
        let mut z = vec![0.0; self.n];
        let mut r = f.clone();
        let mut d: Vec<f64> = r.iter().map(|x| x / theta).collect();
        let mut ad = vec![0.0; self.n];
        for _ in 0..k {
            axpy(&mut z, 1.0, &d);
            self.apply_n(&d, &mut ad);
            axpy(&mut r, -1.0, &ad);
            let rho = 1.0 / (2.0 * sigma - rho_prev);
            for i in 0..self.n {
                d[i] = rho * rho_prev * d[i] + 2.0 * rho / delta * r[i];
            }
            rho_prev = rho;
        }
        let mut x: Vec<f64> = z.iter().zip(&self.inv_sqrt_deg).map(|(z, s)| z * s).collect();
        self.project(&mut x);
        x
    }

    /// Applies the handle in its configured mode.
    pub fn apply(&self, b: &[f64], xi: f64) -> Result<Vec<f64>> {
        match self.mode {
            SolverMode::Adaptive => self.solve(b, xi),
            SolverMode::Linear { iterations } => Ok(self.apply_linear(b, iterations)),
        }
    }

    /// Chebyshev steps that guarantee relative energy error `xi` on the
    /// interval `[mu_lo, 2]`.
    pub fn linear_iterations_for(&self, xi: f64) -> usize {
        let lo = self.mu2_lb.min(1.0);
        let sigma = (2.0 + lo) / (2.0 - lo);
        ((2.0 / xi).acosh() / sigma.acosh()).ceil().max(1.0) as usize
    }

    /// The linear operator `b -> M b` with `k` fixed Chebyshev steps.
    pub fn linear_operator(&self, k: usize) -> LinearOperator<'_> {
        LinearOperator { handle: self, k: k.max(1) }
    }
}

/// Fixed-step linear map produced by [`SolverHandle::linear_operator`].
pub struct LinearOperator<'a> {
    handle: &'a SolverHandle,
    k: usize,
}

impl LinearOperator<'_> {
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.handle.apply_linear(b, self.k)
    }

    pub fn iterations(&self) -> usize {
        self.k
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn scale(x: &mut [f64], a: f64) {
    for v in x {
        *v *= a;
    }
}

/// Energy norm `sqrt(x^T L x)` for `und(G)`.
pub fn energy_norm(g: &DirectedGraph, x: &[f64]) -> f64 {
    let lx = crate::graph::undirected_apply_w(g, g.weights(), x);
    dot(x, &lx).max(0.0).sqrt()
}
