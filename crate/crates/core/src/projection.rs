//! Circulation projections on a subgraph and exact degree repair through a
//! spanning tree.
//!
//! For an edge set `F` with weights `w`, `P_H = I_F - W_F B L_{H^2}^+ B^T W_F`
//! projects onto `{x : B^T W x = 0}` restricted to `F`. `P_{H,v}` further
//! removes the direction `P_H v`.

use nalgebra::DVector;

use crate::dense;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, SpanningTree};
use crate::solver::{dot, norm, SolverHandle, SolverOptions};

/// Relative threshold below which `P_H v` is treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Projection state for one subgraph `H` of `G`.
#[derive(Debug, Clone)]
pub struct ProjectionContext<'a> {
    g: &'a DirectedGraph,
    w: Vec<f64>,
    f: Vec<usize>,
    v: Option<Vec<f64>>,
    solver: SolverHandle,
    u_cap: f64,
}

impl<'a> ProjectionContext<'a> {
    /// `w` is edge-indexed over `g` and must be positive on `f`. `v`, when
    /// present, is edge-indexed; entries outside `f` are ignored.
    pub fn new(
        g: &'a DirectedGraph,
        w: &[f64],
        f: &[usize],
        v: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<Self> {
        if w.len() != g.m() {
            return Err(Error::DimensionMismatch { expected: g.m(), got: w.len() });
        }
        if let Some(v) = v {
            if v.len() != g.m() {
                return Err(Error::DimensionMismatch { expected: g.m(), got: v.len() });
            }
        }
        let mut f = f.to_vec();
        f.sort_unstable();
        f.dedup();
        if let Some(&e) = f.iter().find(|&&e| e >= g.m() || !(w[e] > 0.0)) {
            return Err(Error::PreconditionViolated(format!(
                "edge {e} in F must exist and have positive weight"
            )));
        }
        let heads: Vec<usize> = f.iter().map(|&e| g.head(e)).collect();
        let tails: Vec<usize> = f.iter().map(|&e| g.tail(e)).collect();
        let w2: Vec<f64> = f.iter().map(|&e| w[e] * w[e]).collect();
        let solver = SolverHandle::per_component(g.n(), &heads, &tails, &w2, opts);
        let u_cap = f.iter().map(|&e| w[e]).fold(0.0, f64::max);
        let v = v.map(|v| {
            let mut out = vec![0.0; g.m()];
            for &e in &f {
                out[e] = v[e];
            }
            out
        });
        Ok(ProjectionContext { g, w: w.to_vec(), f, v, solver, u_cap })
    }

    pub fn edges(&self) -> &[usize] {
        &self.f
    }

    /// `B^T W_F x` on the vertices.
    fn weighted_imbalance(&self, x: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.g.n()];
        for &e in &self.f {
            let c = self.w[e] * x[e];
            d[self.g.head(e)] += c;
            d[self.g.tail(e)] -= c;
        }
        d
    }

    /// `W_F B a` as an edge vector.
    fn potential_flow(&self, a: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.g.m()];
        for &e in &self.f {
            y[e] = self.w[e] * (a[self.g.head(e)] - a[self.g.tail(e)]);
        }
        y
    }

    fn check_support(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.g.m() {
            return Err(Error::DimensionMismatch { expected: self.g.m(), got: z.len() });
        }
        let mut in_f = vec![false; self.g.m()];
        for &e in &self.f {
            in_f[e] = true;
        }
        if let Some(e) = (0..z.len()).find(|&e| !in_f[e] && z[e] != 0.0) {
            return Err(Error::PreconditionViolated(format!("z is nonzero on edge {e} outside F")));
        }
        Ok(())
    }

    /// Dense reference `P_{H,v} z` (or `P_H z` without a constraint).
    pub fn project_exact(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_support(z)?;
        dense::gate(self.g.n())?;
        let p = dense::projection_matrix(self.g, &self.w, &self.f, self.v.as_deref())?;
        let zf = DVector::from_iterator(self.f.len(), self.f.iter().map(|&e| z[e]));
        let xf = p * zf;
        let mut x = vec![0.0; self.g.m()];
        for (i, &e) in self.f.iter().enumerate() {
            x[e] = xf[i];
        }
        Ok(x)
    }

    /// Solver-based projection meeting
    /// `||x - P z||_inf <= xi`, `||B^T W x||_inf <= xi`, `|<x, v>| <= xi ||v||`.
    ///
    /// Falls back to `P_H` when `||P_H v|| <= DEGENERATE_TOL ||v||`.
    pub fn proj_minus_rank_one(&self, z: &[f64], xi: f64) -> Result<Vec<f64>> {
        self.check_support(z)?;
        let n = self.g.n() as f64;
        let m = self.g.m() as f64;
        let xi_inner = xi / (9.0 * n * self.u_cap.max(1e-300) * m.sqrt());

        let mut u: Option<Vec<f64>> = None;
        if let Some(v) = &self.v {
            let a = self.solver.solve(&self.weighted_imbalance(v), xi_inner)?;
            let wba = self.potential_flow(&a);
            let mut pv = vec![0.0; self.g.m()];
            for &e in &self.f {
                pv[e] = v[e] - wba[e];
            }
            let nv = norm(v);
            let npv = norm(&pv);
            if nv > 0.0 && npv > DEGENERATE_TOL * nv {
                for x in &mut pv {
                    *x /= npv;
                }
                u = Some(pv);
            }
        }
        let b = self.solver.solve(&self.weighted_imbalance(z), xi_inner)?;
        let y = self.potential_flow(&b);
        let mut x = vec![0.0; self.g.m()];
        for &e in &self.f {
            x[e] = z[e] - y[e];
        }
        if let Some(u) = u {
            let c = dot(&x, &u);
            for &e in &self.f {
                x[e] -= c * u[e];
            }
        }
        Ok(x)
    }

    /// The three measured quantities of the approximate-projection contract,
    /// against the dense reference: `(||x - P z||_inf, ||B^T W x||_inf,
    /// |<x, v>| / ||v||)`.
    pub fn contract_errors(&self, z: &[f64], x: &[f64]) -> Result<(f64, f64, f64)> {
        let exact = self.project_exact(z)?;
        let e1 = x.iter().zip(&exact).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let e2 = self.weighted_imbalance(x).iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let e3 = match &self.v {
            Some(v) if norm(v) > 0.0 => dot(x, v).abs() / norm(v),
            _ => 0.0,
        };
        Ok((e1, e2, e3))
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: Compensated) {
        self.add(other.sum);
        self.add(other.c);
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn check_tree(g: &DirectedGraph, tree: &SpanningTree) -> Result<()> {
    let n = g.n();
    if tree.parent.len() != n || tree.parent_edge.len() != n || tree.order.len() != n {
        return Err(Error::NotATree("tree does not match the vertex set".into()));
    }
    let roots = tree.parent.iter().filter(|p| p.is_none()).count();
    if tree.edges.len() + roots != n || roots == 0 {
        return Err(Error::NotATree(format!("{} edges for {} vertices", tree.edges.len(), n)));
    }
    for v in 0..n {
        if let Some(e) = tree.parent_edge[v] {
            let p = tree.parent[v].ok_or_else(|| Error::NotATree("missing parent".into()))?;
            if e >= g.m() || !((g.head(e) == v && g.tail(e) == p) || (g.head(e) == p && g.tail(e) == v)) {
                return Err(Error::NotATree(format!("edge {e} does not join {v} to its parent")));
            }
        }
    }
    Ok(())
}

/// The unique flow `y` supported on the tree with `B^T y = B^T z`. For a
/// spanning forest this needs `z` to have zero net imbalance on every
/// tree; any remainder stays at the roots.
pub fn rounding(g: &DirectedGraph, z: &[f64], tree: &SpanningTree) -> Result<Vec<f64>> {
    if z.len() != g.m() {
        return Err(Error::DimensionMismatch { expected: g.m(), got: z.len() });
    }
    check_tree(g, tree)?;
    let n = g.n();
    let mut acc = vec![Compensated::default(); n];
    for e in 0..g.m() {
        if z[e] != 0.0 {
            acc[g.head(e)].add(z[e]);
            acc[g.tail(e)].add(-z[e]);
        }
    }
    let mut y = vec![0.0; g.m()];
    for &v in tree.order.iter().rev() {
        let (Some(p), Some(e)) = (tree.parent[v], tree.parent_edge[v]) else {
            continue;
        };
        // Net outflow of the subtree below v must cross e.
        let s = acc[v].value();
        y[e] = if g.head(e) == v { s } else { -s };
        let sub = acc[v];
        acc[p].merge(sub);
    }
    Ok(y)
}

/// Dense measurements for the tree-rounding error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingBound {
    /// `||L^{+/2} B^T (Y - Z) H L^{+/2}||`.
    pub difference: f64,
    /// `n ||z||_1`.
    pub difference_bound: f64,
    /// `||L^{+/2} B^T Y H L^{+/2}||`.
    pub tree_flow: f64,
    /// `n ||y||_1`.
    pub tree_flow_bound: f64,
}

impl RoundingBound {
    pub fn holds(&self) -> bool {
        self.difference <= self.difference_bound * (1.0 + 1e-9) + 1e-12
            && self.tree_flow <= self.tree_flow_bound * (1.0 + 1e-9) + 1e-12
    }
}

/// Evaluates both spectral bounds with the dense oracle, measured against
/// `und(G)` with the weights of `g`.
pub fn rounding_error_bound(g: &DirectedGraph, z: &[f64], y: &[f64]) -> Result<RoundingBound> {
    dense::gate(g.n())?;
    crate::graph::require_connected(g)?;
    let lh = dense::pinv_half(&dense::undirected_laplacian(g))?;
    let diff: Vec<f64> = y.iter().zip(z).map(|(a, b)| a - b).collect();
    let d1 = dense::normalized_norm(&lh, &dense::directed_laplacian_w(g, &diff));
    let d2 = dense::normalized_norm(&lh, &dense::directed_laplacian_w(g, y));
    let n = g.n() as f64;
    Ok(RoundingBound {
        difference: d1,
        difference_bound: n * z.iter().map(|x| x.abs()).sum::<f64>(),
        tree_flow: d2,
        tree_flow_bound: n * y.iter().map(|x| x.abs()).sum::<f64>(),
    })
}
