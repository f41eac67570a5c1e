//! Acceptance criteria, one PASS/FAIL line each. Failing lines do not
//! change the exit status; the run is a measurement, not a gate.
//!
//! `ACCEPTANCE_SLOW=1` runs the complete bidirected stress case to the end
//! and extends the timing sweep to n = 2^13.

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;

use eulerian_sparsify::apps::{eulerian_solve, SolveConfig};
use eulerian_sparsify::decomposition::{er_decomp, region_grow};
use eulerian_sparsify::dense;
use eulerian_sparsify::graph::{
    complete_bidirected, imbalance_of, random_eulerian, random_undirected, spanning_tree, DirectedGraph,
};
use eulerian_sparsify::projection::{rounding, rounding_error_bound, ProjectionContext};
use eulerian_sparsify::rng::stream;
use eulerian_sparsify::sketch::{spectral_sketch, undirected_sketch, SketchConfig};
use eulerian_sparsify::solver::SolverOptions;
use eulerian_sparsify::sparsify::{basic_fast_sparsify, fast_sparsify, Cluster, SparsifyConfig};
use eulerian_sparsify::Error;

struct Tally {
    pass: usize,
    fail: usize,
}

impl Tally {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if ok {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
        println!("[{}] {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn slow() -> bool {
    std::env::var("ACCEPTANCE_SLOW").map(|v| v == "1").unwrap_or(false)
}

fn uniform(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn centered(mut x: Vec<f64>) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    x
}

fn corpus_graph(i: u64) -> DirectedGraph {
    let n = [32, 64, 128][(i % 3) as usize];
    random_eulerian(n, n * n / 8, 32, i).expect("corpus graph")
}

fn crit_1_2(t: &mut Tally) {
    let start = Instant::now();
    let (mut worst_res, mut within, mut max_err) = (0.0f64, 0, 0.0f64);
    let (mut dense_cases, mut halved) = (0, 0);
    let runs = 100;
    for i in 0..runs {
        let g = corpus_graph(i);
        let out = fast_sparsify(&g, &SparsifyConfig::practical(0.25, 0.1, i)).expect("fast_sparsify");
        worst_res = worst_res.max(dense::degree_residual(&g, g.weights(), &out.weights));
        let err = dense::sparsifier_error_w(&g, &out.weights).expect("oracle");
        max_err = max_err.max(err);
        within += (err <= 0.25) as usize;
        if g.m() >= 64 * g.n() {
            dense_cases += 1;
            halved += (2 * out.nnz() <= g.m()) as usize;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    t.line(
        "criterion 1 degree exactness",
        worst_res <= 1e-9 && secs < 120.0,
        format!("max relative residual {worst_res:.2e} over {runs} runs, {secs:.1}s"),
    );
    t.line(
        "criterion 2 sparsifier quality",
        within * 100 >= 95 * runs as usize && halved == dense_cases,
        format!(
            "{within}/{runs} runs with error <= 0.25 (max {max_err:.3e}); {halved}/{dense_cases} runs with m >= 64n halved"
        ),
    );
}

fn crit_3(t: &mut Tally) {
    let eps: f64 = 0.25;
    let mut cs = Vec::new();
    for (k, n) in [64usize, 128, 256].into_iter().enumerate() {
        let g = random_eulerian(n, n * n / 8, 32, 300 + k as u64).expect("graph");
        let out = fast_sparsify(&g, &SparsifyConfig::practical(eps, 0.1, k as u64)).expect("fast_sparsify");
        let ln = (n as f64).ln();
        cs.push((n, out.nnz(), out.nnz() as f64 / (n as f64 * ln * ln / (eps * eps))));
    }
    let mut sorted: Vec<f64> = cs.iter().map(|c| c.2).collect();
    sorted.sort_by(f64::total_cmp);
    let c = sorted[1];
    let ok = cs.iter().all(|x| x.2 >= 0.5 * c && x.2 <= 1.5 * c);
    let detail: Vec<String> = cs.iter().map(|(n, nnz, ci)| format!("n={n} nnz={nnz} C={ci:.4}")).collect();
    t.line("criterion 3 sparsity scaling", ok, format!("fitted C={c:.4}; {}", detail.join(", ")));
}

fn crit_4(t: &mut Tally) {
    let (mut det_fail, mut rho_fail) = (0, 0);
    let mut worst_rho = 0.0f64;
    for s in 0..50u64 {
        let n = [16usize, 32, 64, 128][(s % 4) as usize];
        let g = random_eulerian(n, 4 * n, 32, 400 + s).expect("graph");
        let d = er_decomp(&g, 2.0, 0.01, s).expect("er_decomp");
        let w = g.weights();
        let lp = dense::er_pinv(&g).expect("oracle");
        let mut ratio = 1.0f64;
        let mut rho = 0.0f64;
        for p in &d.pieces {
            let hi = p.edges.iter().map(|&e| w[e]).fold(0.0, f64::max);
            let lo = p.edges.iter().map(|&e| w[e]).fold(f64::INFINITY, f64::min);
            ratio = ratio.max(hi / lo);
            rho = rho.max(hi * dense::er_diameter(&lp, &p.vertices));
        }
        let m = g.m() as f64;
        let rho_bound = 16.0 * n as f64 * ((n + 1) as f64).ln() / m;
        worst_rho = worst_rho.max(rho / rho_bound);
        let wr = g.max_weight() / g.min_positive_weight();
        let cover_ok = d.max_coverage(n) as f64 <= wr.log2() + 3.0;
        if ratio > 2.0 || 2 * d.cut_edges.len() > g.m() || !cover_ok {
            det_fail += 1;
        }
        if rho > rho_bound * (1.0 + 1e-9) {
            rho_fail += 1;
        }
    }
    t.line(
        "criterion 4 ER decomposition",
        det_fail == 0 && rho_fail <= 1,
        format!(
            "{det_fail} deterministic failures, {rho_fail} rho failures in 50; worst rho / (16 n ln(n+1)/m) = {worst_rho:.3}"
        ),
    );
}

fn all_pairs(g: &DirectedGraph, len: &[f64]) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut out = vec![vec![f64::INFINITY; n]; n];
    for (s, d) in out.iter_mut().enumerate() {
        d[s] = 0.0;
        let mut done = vec![false; n];
        for _ in 0..n {
            let u = (0..n).filter(|&v| !done[v]).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
            done[u] = true;
            for e in 0..g.m() {
                let (a, b) = (g.head(e), g.tail(e));
                if a == u && d[u] + len[e] < d[b] {
                    d[b] = d[u] + len[e];
                }
                if b == u && d[u] + len[e] < d[a] {
                    d[a] = d[u] + len[e];
                }
            }
        }
    }
    out
}

fn crit_5(t: &mut Tally) {
    let mut fails = 0;
    let mut worst = 0.0f64;
    for s in 0..100u64 {
        let n = 10 + (s as usize % 4) * 10;
        let g = random_eulerian(n, 4 * n, 9, 500 + s).expect("graph");
        let mut rng = stream(s, &[5]);
        let len: Vec<f64> = (0..g.m()).map(|_| rng.random_range(0.05..3.0)).collect();
        let d = rng.random_range(0.02..5.0);
        let lab = region_grow(&g, &len, d).expect("region_grow");
        let dist = all_pairs(&g, &len);
        let bound = 2.0 * d * ((n + 1) as f64).ln();
        let mut diam = 0.0f64;
        for u in 0..n {
            for v in 0..n {
                if lab[u] == lab[v] {
                    diam = diam.max(dist[u][v]);
                }
            }
        }
        let cut: f64 = (0..g.m()).filter(|&e| lab[g.head(e)] != lab[g.tail(e)]).map(|e| g.weight(e)).sum();
        let wl: f64 = (0..g.m()).map(|e| g.weight(e) * len[e]).sum();
        worst = worst.max(diam / bound).max(d * cut / (2.0 * wl));
        if diam > bound * (1.0 + 1e-12) || d * cut > 2.0 * wl * (1.0 + 1e-12) {
            fails += 1;
        }
    }
    t.line(
        "criterion 5 region growing",
        fails == 0,
        format!("{fails} failures in 100; worst ratio to bound {worst:.3}"),
    );
}

/// Rounding items on `g`; returns the number of failed items.
fn rounding_case(g: &DirectedGraph, seed: u64) -> usize {
    let tree = spanning_tree(g).expect("tree");
    let mut rng = stream(seed, &[6]);
    let z = uniform(&mut rng, g.m());
    let y = rounding(g, &z, &tree).expect("rounding");
    let z1: f64 = z.iter().map(|v| v.abs()).sum();
    let dz = imbalance_of(g, &z);
    let dy = imbalance_of(g, &y);
    let item1 = dz.iter().zip(&dy).fold(0.0f64, |a, (p, q)| a.max((p - q).abs())) <= 1e-12 * z1;
    let mask = tree.mask(g.m());
    let item2 = (0..g.m()).all(|e| mask[e] || y[e] == 0.0);
    let b = rounding_error_bound(g, &z, &y).expect("oracle");
    let item3 = b.difference <= b.difference_bound;
    let item4 = b.tree_flow <= b.tree_flow_bound;
    [item1, item2, item3, item4].iter().filter(|ok| !**ok).count()
}

fn crit_6(t: &mut Tally, id: &str, sizes: &[usize]) {
    let mut fails = 0;
    for s in 0..50u64 {
        let n = sizes[s as usize % sizes.len()];
        let g = random_eulerian(n, 3 * n, 16, 600 + s).expect("graph");
        fails += rounding_case(&g, s);
    }
    t.line(id, fails == 0, format!("{fails} failed items over 50 instances"));
}

/// The four approximate-projection conditions; returns the worst value.
fn pmro_case(g: &DirectedGraph, seed: u64, xi: f64) -> f64 {
    let mut rng = stream(seed, &[7]);
    let mut f: Vec<usize> = (0..g.m()).filter(|_| rng.random_bool(0.6)).collect();
    if f.len() < 3 {
        f = (0..g.m()).collect();
    }
    let mut v = vec![0.0; g.m()];
    let mut z = vec![0.0; g.m()];
    for &e in &f {
        v[e] = g.weight(e) * rng.random_range(0.5..1.5);
        z[e] = rng.random_range(-1.0..1.0);
    }
    let ctx = ProjectionContext::new(g, g.weights(), &f, Some(&v), &SolverOptions::default()).expect("context");
    let x = match ctx.proj_minus_rank_one(&z, xi) {
        Ok(x) => x,
        Err(Error::DegenerateConstraint) => return 0.0,
        Err(e) => panic!("{e}"),
    };
    let (e1, e2, e3) = ctx.contract_errors(&z, &x).expect("oracle");
    let mut inside = vec![false; g.m()];
    f.iter().for_each(|&e| inside[e] = true);
    let e4 = (0..g.m()).filter(|&e| !inside[e]).fold(0.0f64, |a, e| a.max(x[e].abs()));
    e1.max(e2).max(e3).max(e4)
}

fn crit_7(t: &mut Tally, id: &str, sizes: &[usize]) {
    let xi = 1e-6;
    let (mut fails, mut worst) = (0, 0.0f64);
    for s in 0..50u64 {
        let n = sizes[s as usize % sizes.len()];
        let g = random_eulerian(n, 4 * n, 16, 700 + s).expect("graph");
        let e = pmro_case(&g, s, xi);
        worst = worst.max(e);
        fails += (e > xi) as usize;
    }
    t.line(id, fails == 0, format!("{fails} failures in 50; worst condition value {worst:.2e} (xi = {xi:.0e})"));
}

fn crit_8(t: &mut Tally) {
    let (mut fails, mut degenerate) = (0, 0);
    let mut worst = f64::INFINITY;
    for s in 0..50u64 {
        let n = 8 + (s as usize % 17);
        let g = random_eulerian(n, 3 * n, 8, 800 + s).expect("graph");
        let mut rng = stream(s, &[8]);
        let keep: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        let mut cluster: Vec<usize> = (0..g.m()).filter(|&e| keep[g.head(e)] && keep[g.tail(e)]).collect();
        if cluster.len() < 3 {
            cluster = (0..g.m()).collect();
        }
        let lp = dense::er_pinv(&g).expect("oracle");
        let mut verts: Vec<usize> = cluster.iter().flat_map(|&e| [g.head(e), g.tail(e)]).collect();
        verts.sort_unstable();
        verts.dedup();
        let wmax = cluster.iter().map(|&e| g.weight(e)).fold(0.0, f64::max);
        let rho = wmax * dense::er_diameter(&lp, &verts);
        let v = if s % 2 == 1 { Some(g.weights()) } else { None };
        let rep = match dense::verify_variance_bound(&g, &cluster, rho, v) {
            Err(Error::DegenerateConstraint) => {
                degenerate += 1;
                dense::verify_variance_bound(&g, &cluster, rho, None).expect("oracle")
            }
            r => r.expect("oracle"),
        };
        worst = worst.min(rep.loewner_margin);
        fails += (!rep.pass) as usize;
    }
    t.line(
        "criterion 8 variance bounds",
        fails == 0,
        format!("{fails} failures in 50 ({degenerate} fell back to P_H); smallest Loewner margin {worst:.3e}"),
    );
}

fn crit_9(t: &mut Tally) {
    let start = Instant::now();
    let (mut worst, mut fails, mut kappa, mut skew) = (0.0f64, 0, 0.0f64, 0.0f64);
    let mut iters = 0;
    for s in 0..10u64 {
        let g = random_eulerian(200, 1600, 16, 900 + s).expect("graph");
        let mut rng = stream(s, &[9]);
        let b = centered(uniform(&mut rng, 200));
        match eulerian_solve(&g, &b, 1e-6, 0.01, &SolveConfig::new(s)) {
            Ok(r) => {
                let e = r.achieved_error.expect("oracle scale");
                worst = worst.max(e);
                fails += (e > 1e-6) as usize;
                kappa = kappa.max(r.condition_estimate);
                skew = skew.max(r.skew_norm.unwrap_or(0.0));
                iters = iters.max(r.iterations);
            }
            Err(e) => {
                println!("  seed {s}: {e}");
                fails += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    t.line(
        "criterion 9 Eulerian solve",
        fails == 0 && secs < 30.0,
        format!(
            "worst relative L-error {worst:.2e} over 10 seeds, {secs:.1}s; max CG iterations {iters}, condition estimate {kappa:.2}, skew norm {skew:.2}"
        ),
    );
}

fn bilinear_rate(g: &DirectedGraph, w_new: &[f64], pairs: &[(Vec<f64>, Vec<f64>)], eps: f64) -> (usize, f64) {
    let diff = dense::directed_laplacian_w(g, w_new) - dense::directed_laplacian(g);
    let l = dense::undirected_laplacian(g);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for (a, z) in pairs {
        let a = DVector::from_column_slice(a);
        let z = DVector::from_column_slice(z);
        let lhs = (a.transpose() * &diff * &z)[(0, 0)].abs();
        let na = (a.transpose() * &l * &a)[(0, 0)].max(0.0).sqrt();
        let nz = (z.transpose() * &l * &z)[(0, 0)].max(0.0).sqrt();
        let r = lhs / (na * nz);
        worst = worst.max(r);
        ok += (r <= eps) as usize;
    }
    (ok, worst)
}

fn crit_10(t: &mut Tally) {
    let (eps, delta) = (0.5, 0.1);
    let g = random_eulerian(64, 2000, 8, 1000).expect("graph");
    // Vectors are fixed before any sketch is drawn.
    let mut rng = stream(0x5eed, &[10]);
    let pairs: Vec<_> = (0..500).map(|_| (uniform(&mut rng, 64), uniform(&mut rng, 64))).collect();
    let xs: Vec<Vec<f64>> = (0..500).map(|_| uniform(&mut rng, 64)).collect();

    let run = |g: &DirectedGraph, cfg: &SketchConfig| -> (String, bool) {
        let out = spectral_sketch(g, cfg).expect("sketch");
        let (ok, worst) = bilinear_rate(g, &out.weights, &pairs, eps);
        let err = dense::sparsifier_error_w(g, &out.weights).expect("oracle");
        let pass = ok * 10 >= 9 * pairs.len() && err <= eps.sqrt();
        (
            format!(
                "beta={:.0} nnz {}/{}; {ok}/500 pairs within eps (worst {worst:.3}); operator error {err:.3} vs sqrt(eps) {:.3}",
                out.beta,
                out.nnz(),
                g.m(),
                eps.sqrt()
            ),
            pass,
        )
    };
    let (d, ok) = run(&g, &SketchConfig::practical(eps, delta, 10));
    t.line("criterion 10 Eulerian sketch", ok, d);
    // Unit weights keep the lift in one weight bucket, so cores are dense
    // enough to be reweighted.
    let unit = random_eulerian(64, 2000, 1, 1000).expect("graph");
    let stress = SketchConfig {
        beta: Some(8.0),
        density_guard: 4.0,
        target_constant: Some(1.0),
        ..SketchConfig::practical(eps, delta, 10)
    };
    let (d, ok) = run(&unit, &stress);
    t.line("criterion 10 Eulerian sketch, unit weights, beta=8, density 4, target n beta", ok, d);

    let ug = random_undirected(64, 1000, 8, 1001).expect("graph");
    let out = undirected_sketch(&ug, &SketchConfig::practical(eps, delta, 11)).expect("sketch");
    let lg = dense::undirected_laplacian(&ug.oriented());
    let lh = dense::undirected_laplacian(&out.graph.oriented());
    let lgp = dense::pinv(&lg).expect("oracle");
    let lhp = dense::pinv(&lh).expect("oracle");
    let (mut quad_ok, mut inv_ok, mut worst_q, mut worst_i) = (0, 0, 0.0f64, 0.0f64);
    for (i, x) in xs.iter().enumerate() {
        let x = DVector::from_column_slice(x);
        let base = (x.transpose() * &lg * &x)[(0, 0)];
        let r = ((x.transpose() * (&lh - &lg) * &x)[(0, 0)] / base).abs();
        worst_q = worst_q.max(r);
        quad_ok += (r <= eps) as usize;
        if i < 50 {
            let base = (x.transpose() * &lgp * &x)[(0, 0)];
            let r = ((x.transpose() * (&lhp - &lgp) * &x)[(0, 0)] / base).abs();
            worst_i = worst_i.max(r / (7.0 * eps));
            inv_ok += (r <= 7.0 * eps) as usize;
        }
    }
    t.line(
        "criterion 10 undirected sketch",
        quad_ok * 10 >= 9 * xs.len() && inv_ok == 50,
        format!(
            "nnz {}/{}; {quad_ok}/500 quadratic forms within eps (worst {worst_q:.3}); {inv_ok}/50 inverse forms within 7 eps (worst ratio {worst_i:.3})",
            out.graph.m(),
            ug.m()
        ),
    );
}

fn crit_11(t: &mut Tally) {
    let top = if slow() { 13 } else { 11 };
    let mut pts = Vec::new();
    let mut rounds = 0;
    for k in 8..=top {
        let n = 1usize << k;
        let g = random_eulerian(n, 8 * n, 16, 1100 + k as u64).expect("graph");
        let start = Instant::now();
        let out = fast_sparsify(&g, &SparsifyConfig::practical(0.25, 0.1, k as u64)).expect("fast_sparsify");
        let secs = start.elapsed().as_secs_f64();
        rounds += out.rounds.len();
        pts.push((g.m() as f64, secs));
        println!("  n={n} m={} {secs:.3}s", g.m());
    }
    // ln(t / m) = ln a + c ln ln m
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln().ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| (p.1 / p.0).ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let c = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    if c > 4.0 {
        println!("  warning: fitted exponent {c:.2} exceeds 4");
    }
    t.line(
        "criterion 11 near-linearity (soft)",
        c <= 4.0,
        format!("fitted t = a m ln^c m with c = {c:.2} over n = 2^8..2^{top}; {rounds} outer rounds ran in total"),
    );
}

fn crit_12(t: &mut Tally) {
    let mut worst = 0.0f64;
    let mut completed = 0;
    for s in 0..10u64 {
        let g = random_eulerian(16, 64, 8, 1200 + s).expect("graph");
        if let Ok(out) = fast_sparsify(&g, &SparsifyConfig::paper(0.005, 0.005, s)) {
            completed += 1;
            worst = worst.max(dense::degree_residual(&g, g.weights(), &out.weights));
        }
    }
    t.line(
        "criterion 12 faithful profile, degree exactness at n=16",
        completed == 10 && worst <= 1e-9,
        format!("{completed}/10 runs completed, max relative residual {worst:.2e}"),
    );
    crit_6(t, "criterion 12 faithful profile, rounding at n<=16", &[8, 12, 16]);
    crit_7(t, "criterion 12 faithful profile, projection at n<=16", &[8, 12, 16]);
}

fn example_bfs_loops(t: &mut Tally) {
    let g = complete_bidirected(12);
    let tree = spanning_tree(&g).expect("tree");
    let mask = tree.mask(g.m());
    let edges: Vec<usize> = (0..g.m()).filter(|&e| !mask[e]).collect();
    let cluster = Cluster { edges: edges.clone(), vertices: (0..12).collect(), w_floor: 1.0, rho: 1.0 };
    let w = g.weights().to_vec();
    let mut loops = 0;
    for s in 0..20u64 {
        let cfg = SparsifyConfig { density_guard: 4.0, ..SparsifyConfig::practical(0.25, 0.1, s) };
        let out = basic_fast_sparsify(&g, &w, &cluster, &w, 0.05, 0.1, 0.1, &edges, &tree, &cfg).expect("bfs");
        loops += out.stats.loops;
    }
    let mean = loops as f64 / 20.0;
    t.line("example reweighting loop count", mean <= 2.5, format!("mean loops {mean:.2} over 20 seeds"));
}

fn example_complete_graph(t: &mut Tally) {
    let g = complete_bidirected(64);
    let cfg = SparsifyConfig {
        round_limit: if slow() { None } else { Some(1) },
        ..SparsifyConfig::practical(0.3, 0.1, 64)
    };
    let start = Instant::now();
    let out = fast_sparsify(&g, &cfg).expect("fast_sparsify");
    let err = dense::sparsifier_error_w(&g, &out.weights).expect("oracle");
    let eulerian = dense::degree_residual(&g, g.weights(), &out.weights) <= 1e-9;
    let in_piece = out.rounds.first().map_or(0, |r| r.nnz_before);
    let dropped = out.rounds.first().map_or(0, |r| r.nnz_before - r.nnz_after);
    let scope = if slow() { "full run" } else { "first round only" };
    t.line(
        "example complete bidirected n=64, eps=0.3",
        eulerian && err <= 0.3 && 2 * out.nnz() < g.m(),
        format!(
            "{scope}: error {err:.3}, nnz {}/{}, weight growth {:.1}, {:.1}s",
            out.nnz(),
            g.m(),
            out.weight_growth,
            start.elapsed().as_secs_f64()
        ),
    );
    t.line(
        "example dense graph drops 1/32 of piece edges",
        32 * dropped >= in_piece,
        format!("first round removed {dropped} of {in_piece} off-tree edges"),
    );
}

fn example_random_128(t: &mut Tally) {
    let mut ok = 0;
    for s in 0..20u64 {
        let g = random_eulerian(128, 4096, 32, 1300 + s).expect("graph");
        let out = fast_sparsify(&g, &SparsifyConfig::practical(0.25, 0.1, s)).expect("fast_sparsify");
        ok += (dense::sparsifier_error_w(&g, &out.weights).expect("oracle") <= 0.25) as usize;
    }
    t.line("example n=128 m=4096", ok >= 19, format!("{ok}/20 runs with error <= 0.25"));
}

fn main() {
    let start = Instant::now();
    let mut t = Tally { pass: 0, fail: 0 };
    crit_1_2(&mut t);
    crit_3(&mut t);
    crit_4(&mut t);
    crit_5(&mut t);
    crit_6(&mut t, "criterion 6 rounding", &[8, 16, 24, 32, 40]);
    crit_7(&mut t, "criterion 7 projection conditions", &[8, 16, 32, 48, 64]);
    crit_8(&mut t);
    crit_9(&mut t);
    crit_10(&mut t);
    crit_11(&mut t);
    crit_12(&mut t);
    example_bfs_loops(&mut t);
    example_complete_graph(&mut t);
    example_random_128(&mut t);
    println!(
        "acceptance: {} passed, {} failed, {:.1}s",
        t.pass,
        t.fail,
        start.elapsed().as_secs_f64()
    );
}
