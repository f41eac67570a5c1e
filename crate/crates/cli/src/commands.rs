use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde_json::{json, Value};

use eulerian_sparsify::apps::{eulerian_solve, stationary_distribution, SolveConfig};
use eulerian_sparsify::decomposition::{default_phi_min, er_decomp, expander_decomp, verify_decomposition};
use eulerian_sparsify::dense;
use eulerian_sparsify::graph::{
    complete_bidirected, degree_imbalance, directed_cycle, format_edge_list, parse_edge_list, random_eulerian,
    random_undirected, DirectedGraph, UndirectedGraph,
};
use eulerian_sparsify::report::VerificationReport;
use eulerian_sparsify::rng::stream;
use eulerian_sparsify::sketch::{spectral_sketch, undirected_sketch, SketchConfig};
use eulerian_sparsify::sparsify::{fast_sparsify, fast_sparsify_with, SparsifyConfig};
use eulerian_sparsify::Error;

use crate::manifest::{CliError, CliResult, Run};
use crate::{Command, Common, DecompKind, GenKind, ProfileArg, SketchMode};

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Gen { n, m, umax, kind, seed, output } => gen(n, m, umax, kind, seed, &output),
        Command::Sparsify { input, output, common, tau } => sparsify(&input, output.as_deref(), &common, tau),
        Command::Sketch { input, output, common, mode, vectors, beta } => {
            sketch(&input, output.as_deref(), &common, mode, vectors, beta)
        }
        Command::Solve { input, rhs, output, common } => solve(&input, &rhs, output.as_deref(), &common),
        Command::Stationary { chain, eps, output, report } => {
            stationary(&chain, eps, output.as_deref(), report.as_deref())
        }
        Command::Decompose { input, output, kind, r, phi_min, common } => {
            decompose(&input, output.as_deref(), kind, r, phi_min, &common)
        }
        Command::Verify { reference, test, eps, report } => verify(&reference, &test, eps, report.as_deref()),
        Command::Bench { lo, hi, density, eps, seed, output } => bench(lo, hi, density, eps, seed, &output),
    }
}

fn sparsify_config(c: &Common) -> SparsifyConfig {
    match c.profile {
        ProfileArg::Paper => SparsifyConfig::paper(c.eps, c.delta, c.seed),
        ProfileArg::Practical => SparsifyConfig::practical(c.eps, c.delta, c.seed),
    }
}

fn sketch_config(c: &Common) -> SketchConfig {
    match c.profile {
        ProfileArg::Paper => SketchConfig::paper(c.eps, c.delta, c.seed),
        ProfileArg::Practical => SketchConfig::practical(c.eps, c.delta, c.seed),
    }
}

fn oracle_scale(n: usize) -> bool {
    n <= dense::oracle_limit()
}

fn format_vector(x: &[f64]) -> String {
    let mut s = String::with_capacity(24 * x.len());
    for v in x {
        let _ = writeln!(s, "{v}");
    }
    s
}

fn parse_vector(text: &str) -> CliResult<Vec<f64>> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<f64>()
                .map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {tok:?}") }.into())
        })
        .collect()
}

fn json_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn gen(n: usize, m: usize, umax: u64, kind: GenKind, seed: u64, output: &Path) -> CliResult<()> {
    let m = if m == 0 { 8 * n } else { m };
    let cfg = json!({ "n": n, "m": m, "umax": umax, "kind": kind });
    let run = Run::new("gen", cfg, Some(seed));
    let g = match kind {
        GenKind::Eulerian => random_eulerian(n, m, umax, seed)?,
        GenKind::Undirected => random_undirected(n, m, umax, seed)?.oriented(),
        GenKind::Complete => complete_bidirected(n),
        GenKind::Cycle => directed_cycle(n),
    };
    let text = format_edge_list(&g);
    run.finish(Some((output, text.as_bytes())), None, json!({ "n": g.n(), "m": g.m() }))
}

fn sparsify(input: &Path, output: Option<&Path>, c: &Common, tau: Option<usize>) -> CliResult<()> {
    let mut cfg = sparsify_config(c);
    cfg.tau = tau;
    let mut run = Run::new("sparsify", json_value(&cfg), Some(c.seed));
    let g = parse_edge_list(&run.input(input)?)?;
    let oracle = oracle_scale(g.n());
    let mut trajectory = Vec::new();
    let res = fast_sparsify_with(&g, &cfg, |stats, w| {
        let err = if oracle { dense::sparsifier_error_w(&g, w).ok() } else { None };
        trajectory.push(json!({ "stats": stats, "opnorm_error": err }));
    })?;
    let verification = if oracle {
        dense::verify_sparsifier(&g, &res.weights, c.eps)?.to_json()
    } else {
        let mut rep = VerificationReport { nnz: res.nnz(), ..Default::default() };
        rep.degree_residual_linf = dense::degree_residual(&g, g.weights(), &res.weights);
        rep.check_le("degree_residual", rep.degree_residual_linf, 1e-9);
        rep.to_json()
    };
    let body = json!({
        "verification": verification,
        "nnz_in": g.m(),
        "nnz_out": res.nnz(),
        "target": res.target,
        "max_rounds": res.max_rounds,
        "weight_growth": res.weight_growth,
        "rounds": trajectory,
    });
    let text = format_edge_list(&res.graph);
    run.finish(output.map(|p| (p, text.as_bytes())), c.report.as_deref(), body)
}

fn random_vectors(seed: u64, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, &[0x7665_6374]);
    (0..k).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn fraction_within(errs: &[f64], bound: f64) -> f64 {
    if errs.is_empty() {
        return 1.0;
    }
    errs.iter().filter(|&&e| e <= bound).count() as f64 / errs.len() as f64
}

fn sketch(
    input: &Path,
    output: Option<&Path>,
    c: &Common,
    mode: SketchMode,
    vectors: usize,
    beta: Option<f64>,
) -> CliResult<()> {
    let mut cfg = sketch_config(c);
    cfg.beta = beta;
    let mut run = Run::new("sketch", json!({ "sketch": cfg, "mode": mode, "vectors": vectors }), Some(c.seed));
    let g = parse_edge_list(&run.input(input)?)?;
    let n = g.n();
    // Test vectors are fixed before the sketch is drawn.
    let xs = random_vectors(c.seed ^ 0x5eed, n, 2 * vectors);
    let (graph_out, body) = match mode {
        SketchMode::Eulerian => {
            let res = spectral_sketch(&g, &cfg)?;
            let mut body = json!({
                "nnz_in": g.m(),
                "nnz_out": res.nnz(),
                "beta": res.beta,
                "phi_min": res.phi_min,
                "target": res.target,
                "max_rounds": res.max_rounds,
                "weight_growth": res.weight_growth,
                "degree_residual": dense::degree_residual(&g, g.weights(), &res.weights),
            });
            if oracle_scale(n) {
                let pairs: Vec<_> = xs.chunks(2).map(|p| (p[0].clone(), p[1].clone())).collect();
                let errs = dense::bilinear_errors(&g, &res.weights, &pairs)?;
                let opnorm = dense::sparsifier_error_w(&g, &res.weights)?;
                body["pairs_within_eps"] = json!(fraction_within(&errs, c.eps));
                body["max_pair_error"] = json!(errs.iter().cloned().fold(0.0, f64::max));
                body["opnorm_error"] = json!(opnorm);
                body["sqrt_eps_clause"] = json!(opnorm <= c.eps.sqrt());
            }
            (res.graph, body)
        }
        SketchMode::Undirected => {
            let ug = UndirectedGraph::new(n, &g.edge_list())?;
            let res = undirected_sketch(&ug, &cfg)?;
            let h = res.graph.oriented();
            let mut body = json!({ "nnz_in": ug.m(), "nnz_out": res.graph.m(), "beta": res.directed.beta });
            if oracle_scale(n) {
                let lg = dense::undirected_laplacian(&ug.oriented());
                let lh = dense::undirected_laplacian(&h);
                let xs: Vec<Vec<f64>> = xs.into_iter().take(vectors).collect();
                let quad = dense::quadratic_errors(&lg, &lh, &xs);
                let k = xs.len().min(50);
                let inv = dense::quadratic_errors(&dense::pinv(&lg)?, &dense::pinv(&lh)?, &xs[..k]);
                body["quadratic_within_eps"] = json!(fraction_within(&quad, c.eps));
                body["inverse_within_7eps"] = json!(fraction_within(&inv, 7.0 * c.eps));
            }
            (h, body)
        }
    };
    let text = format_edge_list(&graph_out);
    run.finish(output.map(|p| (p, text.as_bytes())), c.report.as_deref(), body)
}

fn solve(input: &Path, rhs: &Path, output: Option<&Path>, c: &Common) -> CliResult<()> {
    let mut cfg = SolveConfig::new(c.seed);
    cfg.sparsify = sparsify_config(&Common { eps: 0.5, report: None, ..*c });
    let echo = json!({ "eps": c.eps, "delta": c.delta, "precond_xi": cfg.precond_xi, "sparsify": cfg.sparsify });
    let mut run = Run::new("solve", echo, Some(c.seed));
    let g = parse_edge_list(&run.input(input)?)?;
    let b = parse_vector(&run.input(rhs)?)?;
    let res = eulerian_solve(&g, &b, c.eps, c.delta, &cfg)?;
    let body = json!({
        "achieved_error": res.achieved_error,
        "certified_error": res.certified_error,
        "iterations": res.iterations,
        "preconditioner_nnz": res.preconditioner_nnz,
        "condition_estimate": res.condition_estimate,
        "skew_norm": res.skew_norm,
        "residual_trace": res.residual_trace,
    });
    let text = format_vector(&res.x);
    run.finish(output.map(|p| (p, text.as_bytes())), c.report.as_deref(), body)
}

fn stationary(chain: &Path, eps: f64, output: Option<&Path>, report: Option<&Path>) -> CliResult<()> {
    let mut run = Run::new("stationary", json!({ "eps": eps }), None);
    let g = parse_edge_list(&run.input(chain)?)?;
    let pi = stationary_distribution(&g, eps)?;
    let text = format_vector(&pi);
    run.finish(output.map(|p| (p, text.as_bytes())), report, json!({ "n": g.n() }))
}

fn decompose(
    input: &Path,
    output: Option<&Path>,
    kind: DecompKind,
    r: f64,
    phi_min: Option<f64>,
    c: &Common,
) -> CliResult<()> {
    let echo = json!({ "kind": kind, "r": r, "phi_min": phi_min, "delta": c.delta });
    let mut run = Run::new("decompose", echo, Some(c.seed));
    let g = parse_edge_list(&run.input(input)?)?;
    let d = match kind {
        DecompKind::Er => er_decomp(&g, r, c.delta, c.seed)?,
        DecompKind::Expander => {
            expander_decomp(&g, r, phi_min.unwrap_or_else(|| default_phi_min(g.n(), 1.0)), c.seed)?
        }
    };
    let verification = if oracle_scale(g.n()) { Some(verify_decomposition(&g, &d)?.to_json()) } else { None };
    let body = json!({
        "pieces": d.pieces.len(),
        "cut_edges": d.cut_edges.len(),
        "quality": d.quality,
        "coverage_bound": d.coverage,
        "max_coverage": d.max_coverage(g.n()),
        "verification": verification,
    });
    let text = serde_json::to_string(&d).expect("decomposition serializes") + "\n";
    run.finish(output.map(|p| (p, text.as_bytes())), c.report.as_deref(), body)
}

fn verify(reference: &Path, test: &Path, eps: f64, report: Option<&Path>) -> CliResult<()> {
    let mut run = Run::new("verify", json!({ "eps": eps }), None);
    let gref = parse_edge_list(&run.input(reference)?)?;
    let gtest = parse_edge_list(&run.input(test)?)?;
    if gref.n() != gtest.n() {
        return Err(Error::DimensionMismatch { expected: gref.n(), got: gtest.n() }.into());
    }
    let rep = verification(&gref, &gtest, eps)?;
    let body = rep.to_json();
    println!("{body}");
    run.finish(None, report, body)
}

fn verification(gref: &DirectedGraph, gtest: &DirectedGraph, eps: f64) -> CliResult<VerificationReport> {
    let mut rep = VerificationReport { nnz: gtest.nnz(), ..Default::default() };
    let known: HashSet<(usize, usize)> = gref.edges().map(|(u, v, _)| (u, v)).collect();
    let foreign = gtest.edges().filter(|(u, v, _)| !known.contains(&(*u, *v))).count();
    rep.check_le("edge_subgraph", foreign as f64, 0.0);
    let dr = degree_imbalance(gref);
    let dt = degree_imbalance(gtest);
    let linf = dr.iter().zip(&dt).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    rep.degree_residual_linf = linf / gref.total_weight().max(f64::MIN_POSITIVE);
    rep.check_le("degree_residual", rep.degree_residual_linf, 1e-9);
    if oracle_scale(gref.n()) {
        rep.opnorm_error = dense::sparsifier_error(gref, gtest)?;
        rep.check_le("opnorm_error", rep.opnorm_error, eps);
    }
    Ok(rep)
}

fn bench(lo: u32, hi: u32, density: usize, eps: f64, seed: u64, output: &Path) -> CliResult<()> {
    if lo > hi || hi > 24 {
        return Err(CliError::usage(format!("bad size range 2^{lo}..2^{hi}")));
    }
    let echo = json!({ "lo": lo, "hi": hi, "density": density, "eps": eps });
    let run = Run::new("bench", echo, Some(seed));
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["n", "m", "seconds", "nnz_out"]).map_err(csv_error)?;
    for k in lo..=hi {
        let n = 1usize << k;
        let g = random_eulerian(n, density * n, 16, seed.wrapping_add(k as u64))?;
        let start = Instant::now();
        let res = fast_sparsify(&g, &SparsifyConfig::practical(eps, 0.1, seed))?;
        let secs = start.elapsed().as_secs_f64();
        wtr.write_record([n.to_string(), g.m().to_string(), format!("{secs:.6}"), res.nnz().to_string()])
            .map_err(csv_error)?;
    }
    let bytes = wtr.into_inner().map_err(|e| CliError::from(Error::Io(e.to_string())))?;
    run.finish(Some((output, &bytes)), None, Value::Null)
}

fn csv_error(e: csv::Error) -> CliError {
    Error::Io(e.to_string()).into()
}
