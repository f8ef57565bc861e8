//! Subcommand implementations. Each returns a text report and a JSON document.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use qpcalc_core::endo::EndoJson;
use qpcalc_core::flow::{conservation_check, integrate, step_halving, to_complex, DerivationFamilyJson};
use qpcalc_core::mutation::{nondegeneracy_probe, QPPairJson};
use qpcalc_core::quiver::QuiverJson;
use qpcalc_core::repmod::{critical_point_check, cs_evaluate, fseries, jacobi_module, FSeriesJson, ModuleJson};
use qpcalc_core::torus::{cluster_exchange, ClassMap};
use qpcalc_core::{
    mutate, split_trivial, BigRational, Complex64, DerivationFamily, DimVector, Endomorphism, FSeries,
    JacobiTruncation, MatrixRep, QPPair, Quiver, SplitRule, TangentField, TorusContext,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::io::{read_json, CliError, CliResult};
use crate::{Class, Cli, Command, Global, Method, Rule, TorusCommand};

/// Output of a successful command; `infeasible` turns the exit status into 2.
pub struct Report {
    pub text: String,
    pub json: Value,
    pub infeasible: Option<String>,
}

impl Report {
    fn ok(text: String, json: Value) -> Self {
        Report {
            text,
            json,
            infeasible: None,
        }
    }
}

/// `{"quiver": <quiver>, "endo": <endomorphism>}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndoFile {
    pub quiver: QuiverJson,
    pub endo: EndoJson,
}

pub fn run(cli: &Cli) -> CliResult<Report> {
    let g = &cli.global;
    match &cli.command {
        Command::Mutate { at, rule, qp } => cmd_mutate(g, at, *rule, qp),
        Command::Reduce { rule, qp } => cmd_reduce(g, *rule, qp),
        Command::Invert { method, file } => cmd_invert(g, *method, file),
        Command::Jacobi { module, qp } => cmd_jacobi(g, module.as_deref(), qp),
        Command::Flow {
            field,
            quiver,
            moser,
            from,
            to,
            steps,
        } => match (field, moser) {
            (Some(f), _) => cmd_flow_field(f, quiver.as_deref().expect("clap requires --quiver"), *from, *to, *steps),
            (None, Some(m)) => cmd_flow_moser(g, &m[0], &m[1], *from, *to, *steps),
            (None, None) => Err(CliError::input("flow needs --field FILE --quiver FILE or --moser QP0 QP1")),
        },
        Command::CsCheck { module, dims, h, qp } => cmd_cs_check(g, module.as_deref(), dims.as_deref(), *h, qp),
        Command::Fseries {
            primes,
            budget,
            module,
            quiver,
            jacobi,
            node,
        } => {
            let rep = match (module, jacobi) {
                (Some(m), _) => load_module(quiver.as_deref().expect("clap requires --quiver"), m)?,
                (None, Some(qp)) => {
                    let (qp, n) = load_for_jacobi(g, qp)?;
                    let jt = JacobiTruncation::new(&qp.potential, n)?;
                    let i = qp.quiver().node(node.as_deref().expect("clap requires --node"))?;
                    jacobi_module(&jt, i)?
                }
                (None, None) => return Err(CliError::input("fseries needs --module FILE --quiver FILE or --jacobi QP --node ID")),
            };
            cmd_fseries(&rep, primes, *budget)
        }
        Command::Torus { command } => match command {
            TorusCommand::Exchange { quiver, seq, .. } => cmd_exchange(quiver, seq),
            TorusCommand::Cc {
                quiver,
                g: exps,
                fseries,
                class,
                deg,
            } => cmd_cc(quiver, exps, fseries, *class, *deg),
        },
        Command::Growth { qp } => cmd_growth(g, qp),
        Command::Probe { depth, rule, qp } => cmd_probe(g, *depth, *rule, qp),
    }
}

fn split_rule(r: Rule) -> SplitRule {
    match r {
        Rule::Averaged => SplitRule::Averaged,
        Rule::Earliest => SplitRule::Earliest,
    }
}

fn load_quiver(path: &Path) -> CliResult<Arc<Quiver>> {
    let j: QuiverJson = read_json(path)?;
    Ok(Arc::new(Quiver::from_json(&j)?))
}

fn load_qp(path: &Path, trunc: Option<usize>) -> CliResult<QPPair<BigRational>> {
    let j: QPPairJson = read_json(path)?;
    let qp = QPPair::from_json(&j).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(match trunc {
        Some(n) => QPPair::new(qp.potential.with_trunc(n)),
        None => qp,
    })
}

/// The potential is never cut below `N + 1`, since degree-`N` data of the ideal uses `Φ`
/// to degree `N + 1`; a potential stored at a lower truncation is read as a polynomial.
fn load_for_jacobi(g: &Global, path: &Path) -> CliResult<(QPPair<BigRational>, usize)> {
    let qp = load_qp(path, None)?;
    let n = g.trunc.unwrap_or(qp.trunc());
    if n + 1 > qp.trunc() {
        return Ok((QPPair::new(qp.potential.with_trunc(n + 1)), n));
    }
    Ok((qp, n))
}

fn load_module(quiver: &Path, module: &Path) -> CliResult<MatrixRep<BigRational>> {
    let q = load_quiver(quiver)?;
    let j: ModuleJson = read_json(module)?;
    MatrixRep::from_json(q, &j).map_err(|e| CliError::input(format!("{}: {e}", module.display())))
}

fn describe_qp(out: &mut String, qp: &QPPair<BigRational>) {
    let q = qp.quiver();
    let _ = writeln!(out, "nodes: {}", q.nodes().join(" "));
    let _ = writeln!(out, "arrows:");
    for ar in q.arrows() {
        let _ = writeln!(out, "  {}: {} -> {}", ar.id, q.node_id(ar.src), q.node_id(ar.tgt));
    }
    let _ = writeln!(out, "potential (trunc {}): {}", qp.trunc(), qp.potential.display());
}

fn cmd_mutate(g: &Global, at: &str, rule: Rule, path: &Path) -> CliResult<Report> {
    let qp = load_qp(path, g.trunc)?;
    let k = qp.quiver().node(at)?;
    let m = mutate(&qp, k, split_rule(rule))?;
    let mut text = format!("mutation at node {at}\n");
    describe_qp(&mut text, &m.result);
    let _ = writeln!(text, "2-cycles remain: {}", if m.two_cycles_remain { "yes" } else { "no" });
    for u in &m.splitting.unsplit {
        let _ = writeln!(text, "unsplit: {u}");
    }
    let json = json!({
        "qp": m.result.to_json(),
        "two_cycles_remain": m.two_cycles_remain,
        "unsplit": m.splitting.unsplit,
    });
    let infeasible = (!m.splitting.unsplit.is_empty()).then(|| "some degree-2 terms cannot be split".to_string());
    Ok(Report { text, json, infeasible })
}

fn cmd_reduce(g: &Global, rule: Rule, path: &Path) -> CliResult<Report> {
    let qp = load_qp(path, g.trunc)?;
    let q = qp.quiver().clone();
    let s = split_trivial(&qp, split_rule(rule))?;
    let pairs: Vec<(String, String)> = s
        .pairs
        .iter()
        .map(|&(y, z)| (q.arrow(y).id.clone(), q.arrow(z).id.clone()))
        .collect();
    let mut text = String::new();
    for (y, z) in &pairs {
        let _ = writeln!(text, "trivial pair: {y}·{z}");
    }
    let _ = writeln!(text, "reduced part:");
    describe_qp(&mut text, &s.reduced);
    let _ = writeln!(text, "reducing automorphism:");
    for (a, img) in s.reducer.images().iter().enumerate() {
        let _ = writeln!(text, "  {} -> {}", q.arrow(a).id, img.display());
    }
    for u in &s.unsplit {
        let _ = writeln!(text, "unsplit: {u}");
    }
    let json = json!({
        "pairs": pairs,
        "reduced": s.reduced.to_json(),
        "reducer": EndoFile { quiver: q.to_json(), endo: s.reducer.to_json() },
        "unsplit": s.unsplit,
    });
    let infeasible = (!s.unsplit.is_empty()).then(|| "some degree-2 terms cannot be split".to_string());
    Ok(Report { text, json, infeasible })
}

fn cmd_invert(g: &Global, method: Method, path: &Path) -> CliResult<Report> {
    let file: EndoFile = read_json(path)?;
    let q = Arc::new(Quiver::from_json(&file.quiver)?);
    let h = Endomorphism::<BigRational>::from_json(q.clone(), &file.endo)?;
    let mut text = String::new();
    let inv = match method {
        Method::Order => h.invert()?,
        Method::Trees => h.invert_by_trees()?,
        Method::Both => {
            let a = h.invert()?;
            let b = h.invert_by_trees()?;
            let diff = a.max_abs_diff(&b);
            if diff > g.tol_abs {
                return Err(CliError {
                    code: 2,
                    message: format!("order-by-order and tree inverses differ by {diff:e}"),
                });
            }
            let _ = writeln!(text, "order-by-order and tree inverses agree (max difference {diff:e})");
            a
        }
    };
    let _ = writeln!(text, "inverse (trunc {}):", inv.trunc());
    for (a, img) in inv.images().iter().enumerate() {
        let _ = writeln!(text, "  {} -> {}", q.arrow(a).id, img.display());
    }
    let json = serde_json::to_value(EndoFile {
        quiver: q.to_json(),
        endo: inv.to_json(),
    })
    .expect("schema types serialize");
    Ok(Report::ok(text, json))
}

fn cmd_jacobi(g: &Global, module: Option<&str>, path: &Path) -> CliResult<Report> {
    let (qp, n) = load_for_jacobi(g, path)?;
    let jt = JacobiTruncation::new(&qp.potential, n)?;
    if let Some(id) = module {
        let i = qp.quiver().node(id)?;
        let rep = jacobi_module(&jt, i)?;
        let mj = rep.to_json();
        let text = format!(
            "module of standard paths from node {id}: dimension vector ({})\n{}\n",
            rep.dims().0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", "),
            serde_json::to_string_pretty(&mj).expect("schema types serialize"),
        );
        return Ok(Report::ok(text, serde_json::to_value(mj).expect("schema types serialize")));
    }
    let cert = jt.determinacy_bound();
    let qh = jt.quasi_homogeneous();
    let mut text = format!("Jacobi algebra at truncation {n}\ndegree  paths  quotient\n");
    let mut rows = Vec::new();
    for (d, (p, r)) in jt.path_counts().iter().zip(jt.quotient_dims()).enumerate() {
        let _ = writeln!(text, "{d:>6}  {p:>5}  {r:>8}");
        rows.push(json!({"degree": d, "paths": p, "quotient": r}));
    }
    let _ = writeln!(text, "total quotient dimension: {}", cert.total_dim);
    match (cert.r, cert.bound) {
        (Some(r), Some(b)) => {
            let _ = writeln!(text, "certificate: m^{r} ⊆ J (r = {r}), determinacy bound {b}");
        }
        (Some(r), None) => {
            let _ = writeln!(text, "certificate: m^{r} ⊆ J (r = {r})");
        }
        _ => {
            let _ = writeln!(text, "certificate: none within truncation {n}");
        }
    }
    let _ = writeln!(
        text,
        "quasi-homogeneous: {}{}",
        if qh.holds { "yes" } else { "no" },
        if qh.exact { "" } else { " (truncation-level only)" }
    );
    for w in jt.warnings() {
        let _ = writeln!(text, "warning: {w}");
    }
    let json = json!({
        "trunc": n,
        "degrees": rows,
        "certificate": cert,
        "quasi_homogeneous": qh,
        "warnings": jt.warnings(),
    });
    Ok(Report::ok(text, json))
}

fn describe_endo(out: &mut String, e: &Endomorphism<Complex64>) {
    for (a, img) in e.images().iter().enumerate() {
        let _ = writeln!(out, "  {} -> {}", e.quiver().arrow(a).id, img.display());
    }
}

fn cmd_flow_field(field: &Path, quiver: &Path, from: f64, to: f64, steps: usize) -> CliResult<Report> {
    let q = load_quiver(quiver)?;
    let j: DerivationFamilyJson = read_json(field)?;
    let fam = DerivationFamily::from_json(q, &j)?;
    let state = integrate(&fam, from, to, steps)?;
    let halving = step_halving(&fam, from, to, steps)?;
    let mut text = format!("flow from t = {from} to t = {to} in {steps} steps\n");
    describe_endo(&mut text, &state.endo);
    let _ = writeln!(
        text,
        "step halving: |u_n − u_2n| = {:.3e}, |u_2n − u_4n| = {:.3e}, ratio {:.2}",
        halving.coarse_diff, halving.fine_diff, halving.ratio
    );
    let json = json!({
        "t": state.t,
        "endo": state.endo.to_json(),
        "halving": halving,
    });
    Ok(Report::ok(text, json))
}

fn cmd_flow_moser(g: &Global, p0: &Path, p1: &Path, from: f64, to: f64, steps: usize) -> CliResult<Report> {
    let theta0 = load_qp(p0, g.trunc)?.potential;
    let theta1 = load_qp(p1, g.trunc)?.potential;
    let field = TangentField::new(theta0.clone(), theta1.try_sub(&theta0)?)?;
    let theta = |t: f64| field.theta_at(t).map(|p| to_complex(&p));
    let grid: Vec<f64> = (0..=4).map(|k| from + (to - from) * k as f64 / 4.0).collect();
    let deviation = conservation_check(&theta, &field, from, to, steps, &grid)?;
    let halving = step_halving(&field, from, to, steps)?;
    let state = integrate(&field, from, to, steps)?;
    let ok = deviation <= g.tol_fd;
    let mut text = format!("Moser flow along Θ_t = (1 − t)·Θ_0 + t·Θ_1, t from {from} to {to}, {steps} steps\n");
    let _ = writeln!(
        text,
        "conservation deviation: {deviation:.3e} ({} tolerance {:e})",
        if ok { "within" } else { "outside" },
        g.tol_fd
    );
    let _ = writeln!(
        text,
        "step halving: |u_n − u_2n| = {:.3e}, |u_2n − u_4n| = {:.3e}, ratio {:.2}",
        halving.coarse_diff, halving.fine_diff, halving.ratio
    );
    let _ = writeln!(text, "H at t = {to}:");
    describe_endo(&mut text, &state.endo);
    let json = json!({
        "deviation": deviation,
        "within_tolerance": ok,
        "halving": halving,
        "endo": state.endo.to_json(),
    });
    Ok(Report::ok(text, json))
}

/// Random nilpotent representation: basis vectors get levels in `0..3` and arrows only
/// raise the level.
fn random_nilpotent(q: &Arc<Quiver>, dims: &DimVector, rng: &mut ChaCha8Rng) -> CliResult<MatrixRep<Complex64>> {
    let levels: Vec<Vec<usize>> = dims
        .0
        .iter()
        .map(|&d| (0..d).map(|_| rng.gen_range(0..3)).collect())
        .collect();
    let mut rep = MatrixRep::zero(q.clone(), dims.clone())?;
    for (a, ar) in q.arrows().iter().enumerate() {
        for i in 0..dims.0[ar.tgt] {
            for j in 0..dims.0[ar.src] {
                if levels[ar.tgt][i] > levels[ar.src][j] {
                    rep.set_entry(a, i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
        }
    }
    Ok(rep)
}

fn cmd_cs_check(g: &Global, module: Option<&Path>, dims: Option<&[usize]>, h: f64, path: &Path) -> CliResult<Report> {
    let qp = load_qp(path, g.trunc)?;
    let q = qp.quiver().clone();
    let phi = to_complex(&qp.potential);
    let rep = match module {
        Some(m) => {
            let j: ModuleJson = read_json(m)?;
            MatrixRep::<Complex64>::from_json(q.clone(), &j).map_err(|e| CliError::input(format!("{}: {e}", m.display())))?
        }
        None => {
            let d = match dims {
                Some(d) => DimVector::new(&q, d.to_vec())?,
                None => DimVector(vec![1; q.node_count()]),
            };
            random_nilpotent(&q, &d, &mut ChaCha8Rng::seed_from_u64(g.seed))?
        }
    };
    let value = cs_evaluate(&phi, &rep)?;
    let report = critical_point_check(&phi, &rep, h, g.tol_abs)?;
    let ok = report.max_discrepancy <= g.tol_fd;
    let mut text = format!("Chern–Simons value: {:e} + {:e}i\n", value.re, value.im);
    let _ = writeln!(
        text,
        "gradient discrepancy at h = {h:e}: {:.3e} ({} tolerance {:e})",
        report.max_discrepancy,
        if ok { "within" } else { "outside" },
        g.tol_fd
    );
    let _ = writeln!(text, "gradient norm: {:.3e}", report.gradient_norm);
    let _ = writeln!(text, "critical point: {}", if report.is_critical { "yes" } else { "no" });
    let _ = writeln!(text, "nilpotent: {}", if report.nilpotent { "yes" } else { "no" });
    let json = json!({
        "value": [value.re, value.im],
        "h": h,
        "within_tolerance": ok,
        "report": report,
        "module": rep.to_json(),
    });
    Ok(Report::ok(text, json))
}

fn cmd_fseries(rep: &MatrixRep<BigRational>, primes: &[u64], budget: u128) -> CliResult<Report> {
    let f = fseries(rep, primes, budget)?;
    let q = rep.quiver();
    let mut text = format!("F-series: {}\n", f.display(q));
    let _ = writeln!(text, "dimension  value  provenance  counts (p, #)");
    let fj = f.to_json();
    for e in &fj.entries {
        let counts: Vec<String> = e.counts.iter().map(|(p, c)| format!("({p}, {c})")).collect();
        let _ = writeln!(
            text,
            "{:?}  {}  {}  {}",
            e.dim,
            e.value,
            serde_json::to_value(&e.provenance).expect("enum serializes").as_str().unwrap_or(""),
            counts.join(" ")
        );
    }
    for o in &fj.omitted {
        let _ = writeln!(text, "omitted {:?}: {}", o.dim, o.reason);
    }
    Ok(Report::ok(text, serde_json::to_value(&fj).expect("schema types serialize")))
}

fn node_indices(q: &Quiver, ids: &[String]) -> CliResult<Vec<usize>> {
    ids.iter().map(|id| q.node(id).map_err(CliError::from)).collect()
}

fn cmd_exchange(quiver: &Path, seq: &[String]) -> CliResult<Report> {
    let q = load_quiver(quiver)?;
    let ks = node_indices(&q, seq)?;
    let history = cluster_exchange(&q, &ks)?;
    let mut text = String::new();
    let mut clusters = Vec::new();
    for (step, cluster) in history.iter().enumerate() {
        let label = if step == 0 {
            "initial cluster".to_string()
        } else {
            format!("after mutating at {}", seq[step - 1])
        };
        let _ = writeln!(text, "{label}:");
        for (i, x) in cluster.iter().enumerate() {
            let _ = writeln!(text, "  x_{} = {}", q.node_id(i), x.display());
        }
        clusters.push(cluster.iter().map(|x| x.to_json()).collect::<Vec<_>>());
    }
    let json = json!({"sequence": seq, "clusters": clusters});
    Ok(Report::ok(text, json))
}

fn cmd_cc(quiver: &Path, g: &[i64], fpath: &Path, class: Class, deg: usize) -> CliResult<Report> {
    let q = load_quiver(quiver)?;
    let fj: FSeriesJson = read_json(fpath)?;
    let f = FSeries::from_json(&fj).map_err(|e| CliError::input(format!("{}: {e}", fpath.display())))?;
    let ctx = TorusContext::from_quiver(&q);
    let class = match class {
        Class::Y => ClassMap::Y,
        Class::Specialized => ClassMap::Specialized,
    };
    let cc = ctx.cc_character(g, &f, &class, deg)?;
    let text = format!("{}\n", cc.display());
    Ok(Report::ok(text, serde_json::to_value(cc.to_json()).expect("schema types serialize")))
}

fn cmd_growth(g: &Global, path: &Path) -> CliResult<Report> {
    let qp = load_qp(path, g.trunc)?;
    let r = qp.potential.growth_report();
    let mut text = String::from("degree  coefficient sum\n");
    for (n, s) in r.sums.iter().enumerate() {
        let _ = writeln!(text, "{n:>6}  {s:.6e}");
    }
    let _ = writeln!(text, "estimated growth constant: {:.6}", r.c_hat);
    let _ = writeln!(text, "geometric bound holds: {}", if r.geometric { "yes" } else { "no" });
    let _ = writeln!(text, "n-th roots increasing: {}", if r.root_increasing { "yes" } else { "no" });
    Ok(Report::ok(text, serde_json::to_value(&r).expect("report serializes")))
}

fn cmd_probe(g: &Global, depth: usize, rule: Rule, path: &Path) -> CliResult<Report> {
    let qp = load_qp(path, g.trunc)?;
    let r = nondegeneracy_probe(&qp, depth, split_rule(rule));
    let mut text = format!("explored {} mutation sequences up to length {depth}\n", r.sequences_explored);
    if r.degenerate.is_empty() {
        let _ = writeln!(text, "no sequence leaves a 2-cycle");
    }
    for d in &r.degenerate {
        let _ = writeln!(text, "degenerate after {}: {}", d.sequence.join(","), d.reason);
    }
    if r.zero_potential_seen {
        let _ = writeln!(text, "note: a zero potential was reached; absence of 2-cycles there says nothing about a generic potential");
    }
    Ok(Report::ok(text, serde_json::to_value(&r).expect("report serializes")))
}
