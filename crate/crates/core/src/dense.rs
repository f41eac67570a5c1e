//! Dense reference computations. Everything here is `O(n^3)` and exists to
//! certify the sparse algorithms at small scale.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{require_connected, DirectedGraph};
use crate::report::VerificationReport;

pub type DenseSym = DMatrix<f64>;

static ORACLE_MAX_N: AtomicUsize = AtomicUsize::new(512);

/// Largest vertex count the oracle accepts.
pub fn oracle_limit() -> usize {
    ORACLE_MAX_N.load(Ordering::Relaxed)
}

pub fn set_oracle_limit(n: usize) {
    ORACLE_MAX_N.store(n, Ordering::Relaxed);
}

pub(crate) fn gate(n: usize) -> Result<()> {
    if n > oracle_limit() {
        return Err(Error::InfeasibleParameters(format!(
            "dense oracle limited to n <= {}, got {n}",
            oracle_limit()
        )));
    }
    Ok(())
}

pub fn undirected_laplacian(g: &DirectedGraph) -> DenseSym {
    undirected_laplacian_w(g, g.weights())
}

pub fn undirected_laplacian_w(g: &DirectedGraph, w: &[f64]) -> DenseSym {
    let mut l = DMatrix::zeros(g.n(), g.n());
    for e in 0..g.m() {
        let (u, v) = (g.head(e), g.tail(e));
        l[(u, u)] += w[e];
        l[(v, v)] += w[e];
        l[(u, v)] -= w[e];
        l[(v, u)] -= w[e];
    }
    l
}

/// `B^T W H`: column `h(e)` gets `+w` in row `h(e)` and `-w` in row `t(e)`.
pub fn directed_laplacian(g: &DirectedGraph) -> DMatrix<f64> {
    directed_laplacian_w(g, g.weights())
}

pub fn directed_laplacian_w(g: &DirectedGraph, w: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(g.n(), g.n());
    for e in 0..g.m() {
        let (u, v) = (g.head(e), g.tail(e));
        l[(u, u)] += w[e];
        l[(v, u)] -= w[e];
    }
    l
}

/// Signed incidence `B` (m x n).
pub fn incidence(g: &DirectedGraph) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(g.m(), g.n());
    for e in 0..g.m() {
        b[(e, g.head(e))] = 1.0;
        b[(e, g.tail(e))] = -1.0;
    }
    b
}

/// Eigenvalues below this are treated as kernel.
pub fn kernel_cutoff(n: usize, lambda_max: f64) -> f64 {
    n.max(1) as f64 * f64::EPSILON * lambda_max.abs()
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Applies `f` to the nonzero spectrum of a PSD matrix; kernel maps to 0.
fn spectral_map(l: &DenseSym, f: impl Fn(f64) -> f64) -> Result<DenseSym> {
    let n = l.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(l));
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let cut = kernel_cutoff(n, lmax);
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&x| x < -cut) {
        return Err(Error::NotPsd { eigenvalue: bad });
    }
    let d = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&x| if x > cut { f(x) } else { 0.0 }),
    );
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&d) * v.transpose())
}

pub fn pinv_half(l: &DenseSym) -> Result<DenseSym> {
    spectral_map(l, |x| 1.0 / x.sqrt())
}

pub fn pinv(l: &DenseSym) -> Result<DenseSym> {
    spectral_map(l, |x| 1.0 / x)
}

/// Moore-Penrose pseudoinverse of a general square matrix via SVD.
pub fn pinv_general(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows().max(a.ncols());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = kernel_cutoff(n, smax);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let sinv = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values.iter().map(|&s| if s > cut { 1.0 / s } else { 0.0 }),
    );
    vt.transpose() * DMatrix::from_diagonal(&sinv) * u.transpose()
}

pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn lambda_min(a: &DenseSym) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn lambda_max(a: &DenseSym) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `||L^{+/2} M L^{+/2}||_op` for a precomputed `L^{+/2}`.
pub fn normalized_norm(l_half: &DenseSym, m: &DMatrix<f64>) -> f64 {
    op_norm(&(l_half * m * l_half))
}

/// `||L_ref^{+/2} (vL_ref - vL_test) L_ref^{+/2}||_op`.
pub fn sparsifier_error(gref: &DirectedGraph, gtest: &DirectedGraph) -> Result<f64> {
    if gref.n() != gtest.n() {
        return Err(Error::DimensionMismatch { expected: gref.n(), got: gtest.n() });
    }
    gate(gref.n())?;
    require_connected(gref)?;
    let lh = pinv_half(&undirected_laplacian(gref))?;
    let diff = directed_laplacian(gref) - directed_laplacian(gtest);
    Ok(normalized_norm(&lh, &diff))
}

/// Same as [`sparsifier_error`] with the test graph given as new weights on
/// the reference topology.
pub fn sparsifier_error_w(gref: &DirectedGraph, w_test: &[f64]) -> Result<f64> {
    gate(gref.n())?;
    require_connected(gref)?;
    let lh = pinv_half(&undirected_laplacian(gref))?;
    let dw: Vec<f64> = gref.weights().iter().zip(w_test).map(|(a, b)| a - b).collect();
    Ok(normalized_norm(&lh, &directed_laplacian_w(gref, &dw)))
}

/// Exact effective resistances `b_uv^T L^+ b_uv`.
pub fn exact_er(g: &DirectedGraph, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let lp = er_pinv(g)?;
    Ok(pairs.iter().map(|&(u, v)| er_from_pinv(&lp, u, v)).collect())
}

/// `L^+` of `und(G)` after the connectivity and size checks.
pub fn er_pinv(g: &DirectedGraph) -> Result<DenseSym> {
    gate(g.n())?;
    require_connected(g)?;
    pinv(&undirected_laplacian(g))
}

pub fn er_from_pinv(lp: &DenseSym, u: usize, v: usize) -> f64 {
    lp[(u, u)] + lp[(v, v)] - 2.0 * lp[(u, v)]
}

/// Exact resistance of every edge.
pub fn exact_er_edges(g: &DirectedGraph) -> Result<Vec<f64>> {
    let pairs: Vec<_> = g.edges().map(|(u, v, _)| (u, v)).collect();
    exact_er(g, &pairs)
}

/// Largest exact resistance over all pairs of `vertices`.
pub fn er_diameter(lp: &DenseSym, vertices: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for (i, &a) in vertices.iter().enumerate() {
        for &b in &vertices[i + 1..] {
            best = best.max(er_from_pinv(lp, a, b));
        }
    }
    best
}

/// `A <= B` in Loewner order up to `tol * ||B||_op`. Returns the verdict and
/// the margin `lambda_min(B - A)`.
pub fn loewner_leq(a: &DenseSym, b: &DenseSym, tol: f64) -> (bool, f64) {
    let margin = lambda_min(&(b - a));
    let scale = op_norm(b);
    (margin >= -tol * scale, margin)
}

/// Dense `P_H` (or `P_{H,v}` when `v` is given) over the edges `f`, using
/// weights `w`. Rows and columns follow the order of `f`.
pub fn projection_matrix(
    g: &DirectedGraph,
    w: &[f64],
    f: &[usize],
    v: Option<&[f64]>,
) -> Result<DMatrix<f64>> {
    let k = f.len();
    let n = g.n();
    // W_F B_H as a k x n matrix.
    let mut wb = DMatrix::zeros(k, n);
    for (i, &e) in f.iter().enumerate() {
        wb[(i, g.head(e))] = w[e];
        wb[(i, g.tail(e))] = -w[e];
    }
    let l2 = wb.transpose() * &wb;
    let l2p = pinv(&l2)?;
    let mut p = DMatrix::identity(k, k) - &wb * l2p * wb.transpose();
    if let Some(v) = v {
        let vf = DVector::from_iterator(k, f.iter().map(|&e| v[e]));
        let pv = &p * &vf;
        let q = pv.norm();
        if q <= 1e-12 * vf.norm() {
            return Err(Error::DegenerateConstraint);
        }
        let u = pv / q;
        p -= &u * u.transpose();
    }
    Ok(p)
}

/// Checks both matrix-variance bounds of a cluster against
/// `rho * L^{+/2} L_H L^{+/2}`. `v` switches the projection to `P_{H,v}`.
pub fn verify_variance_bound(
    g: &DirectedGraph,
    cluster: &[usize],
    rho: f64,
    v: Option<&[f64]>,
) -> Result<VerificationReport> {
    gate(g.n())?;
    require_connected(g)?;
    let n = g.n();
    let w = g.weights();
    let lg = undirected_laplacian(g);
    let lp = pinv(&lg)?;
    let lh = pinv_half(&lg)?;

    let mut verts: Vec<usize> = cluster.iter().flat_map(|&e| [g.head(e), g.tail(e)]).collect();
    verts.sort_unstable();
    verts.dedup();
    let wmax = cluster.iter().map(|&e| w[e]).fold(0.0, f64::max);
    let hyp = wmax * er_diameter(&lp, &verts);
    if hyp > rho * (1.0 + 1e-9) {
        return Err(Error::PreconditionViolated(format!(
            "cluster has (max weight)(ER diameter) = {hyp:.6e} > rho = {rho:.6e}"
        )));
    }

    let p = projection_matrix(g, w, cluster, v)?;
    let k = cluster.len();
    let mut lhm = DMatrix::zeros(n, n);
    for &e in cluster {
        let (a, b) = (g.head(e), g.tail(e));
        lhm[(a, a)] += w[e];
        lhm[(b, b)] += w[e];
        lhm[(a, b)] -= w[e];
        lhm[(b, a)] -= w[e];
    }
    let bound = &lh * lhm * &lh * rho;

    let mut left = DMatrix::zeros(n, n);
    let mut right = DMatrix::zeros(n, n);
    for j in 0..k {
        // sum_f P[f, e] w_f b_f e_{h(f)}^T
        let mut inner = DMatrix::zeros(n, n);
        for (i, &f) in cluster.iter().enumerate() {
            let c = p[(i, j)] * w[f];
            if c == 0.0 {
                continue;
            }
            let (h, t) = (g.head(f), g.tail(f));
            inner[(h, h)] += c;
            inner[(t, h)] -= c;
        }
        let a = &lh * inner * &lh;
        left += &a * a.transpose();
        right += a.transpose() * &a;
    }
    let (_, m1) = loewner_leq(&left, &bound, 0.0);
    let (_, m2) = loewner_leq(&right, &bound, 0.0);
    let mut rep = VerificationReport {
        nnz: k,
        loewner_margin: m1.min(m2),
        ..Default::default()
    };
    let scale = op_norm(&bound).max(1e-300);
    rep.check_ge("variance_left_margin", m1, -1e-8 * scale.max(1.0));
    rep.check_ge("variance_right_margin", m2, -1e-8 * scale.max(1.0));
    rep.check_le("rho_hypothesis", hyp, rho * (1.0 + 1e-9));
    Ok(rep)
}

/// `|a^T (vL_test - vL_ref) z| / (||a||_L ||z||_L)` for each pair, with
/// `L` the undirected Laplacian of `gref`.
pub fn bilinear_errors(gref: &DirectedGraph, w_test: &[f64], pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<f64>> {
    gate(gref.n())?;
    let diff = directed_laplacian_w(gref, w_test) - directed_laplacian(gref);
    let l = undirected_laplacian(gref);
    Ok(pairs
        .iter()
        .map(|(a, z)| {
            let a = DVector::from_column_slice(a);
            let z = DVector::from_column_slice(z);
            let num = a.dot(&(&diff * &z)).abs();
            let den = (a.dot(&(&l * &a)) * z.dot(&(&l * &z))).max(0.0).sqrt();
            num / den
        })
        .collect())
}

/// `|x^T (B - A) x| / x^T A x` for each `x`.
pub fn quadratic_errors(a: &DenseSym, b: &DenseSym, xs: &[Vec<f64>]) -> Vec<f64> {
    let d = b - a;
    xs.iter()
        .map(|x| {
            let x = DVector::from_column_slice(x);
            x.dot(&(&d * &x)).abs() / x.dot(&(a * &x))
        })
        .collect()
}

/// Relative degree residual `||B^T (w_test - w_ref)||_inf / ||w_ref||_1`.
pub fn degree_residual(g: &DirectedGraph, w_ref: &[f64], w_test: &[f64]) -> f64 {
    let diff: Vec<f64> = w_test.iter().zip(w_ref).map(|(a, b)| a - b).collect();
    let d = crate::graph::imbalance_of(g, &diff);
    let linf = d.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let l1: f64 = w_ref.iter().map(|x| x.abs()).sum();
    if l1 == 0.0 {
        linf
    } else {
        linf / l1
    }
}

/// Full sparsifier verification: operator-norm error, degree residual and
/// sparsity, with `eps` as the error bound.
pub fn verify_sparsifier(
    gref: &DirectedGraph,
    w_test: &[f64],
    eps: f64,
) -> Result<VerificationReport> {
    let err = sparsifier_error_w(gref, w_test)?;
    let res = degree_residual(gref, gref.weights(), w_test);
    let mut rep = VerificationReport {
        opnorm_error: err,
        degree_residual_linf: res,
        nnz: w_test.iter().filter(|&&x| x > 0.0).count(),
        ..Default::default()
    };
    rep.check_le("opnorm_error", err, eps);
    rep.check_le("degree_residual", res, 1e-9);
    Ok(rep)
}
