//! One function per subcommand, each returning a [`Report`].

use std::f64::consts::{E, TAU};
use std::path::Path;

use mbqc_core::criteria::{
    check_approx_det, check_approx_stoch, check_efficiency, check_unbounded_measure,
    default_f_eps_class, descriptor, stability_frontier, w_threshold_eta, Accuracy, Frontier,
    ScalingClass, Verdict,
};
use mbqc_core::epsilon::{
    eps_geo_closed_form, eps_geo_star_lower, eps_geo_variational, star_lower_raw, DistanceKind,
    EtaMap,
};
use mbqc_core::locc::{
    chain_protocol, grid_protocol, noisy_cluster_experiment, run_protocol, stability_sweep,
    NoiseModel, Protocol,
};
use mbqc_core::monotones::{evaluate, family_supremum, Family, Measure, OptimizerSettings};
use mbqc_core::percolation::{
    deformed_p_site, deformed_threshold, estimate_threshold, povm_hole_sampler,
    spanning_probability,
};
use mbqc_core::qstate::{Ensemble, PureState};
use mbqc_core::rng::stream;
use mbqc_core::Limits;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{usage, CliError, CliResult};
use crate::report::{prov, Cell, Report, Table};

/// Run-wide settings resolved from the global flags.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub seed: u64,
    pub seed_source: &'static str,
}

impl Ctx {
    pub fn config(&self, params: Value) -> Value {
        json!({ "seed": self.seed, "seed_source": self.seed_source, "params": params })
    }
}

pub fn measure_of(k: MeasureKind) -> Measure {
    match k {
        MeasureKind::Geometric => Measure::Geometric,
        MeasureKind::SchmidtRankWidth => Measure::SchmidtRankWidth,
        MeasureKind::EntropicWidth => Measure::EntropicWidth,
    }
}

pub fn distance_of(d: DistanceArg) -> DistanceKind {
    match d {
        DistanceArg::Trace => DistanceKind::Trace,
        DistanceArg::Bures => DistanceKind::Bures,
    }
}

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.display().to_string(),
        source,
    })
}

fn reference_value(family: Family, measure: Measure, n: usize) -> Option<(f64, &'static str)> {
    let nf = n as f64;
    match (family, measure) {
        (Family::W, Measure::Geometric) => {
            Some((1.0 - (1.0 - 1.0 / nf).powf(nf - 1.0), "1 - (1 - 1/N)^(N-1)"))
        }
        (Family::Ghz, Measure::Geometric) => Some((0.5, "1/2")),
        (Family::Ghz, Measure::SchmidtRankWidth) => Some((2.0, "2")),
        (Family::Product, _) => Some((
            if measure == Measure::Geometric {
                0.0
            } else {
                1.0
            },
            "product state",
        )),
        _ => None,
    }
}

pub fn measure(a: &MeasureArgs, ctx: &Ctx) -> CliResult<Report> {
    let m = measure_of(a.measure);
    let settings = OptimizerSettings {
        restarts: a.restarts,
        max_sweeps: a.max_sweeps,
        tol: a.tol,
        seed: ctx.seed,
    };
    let limits = Limits::default();
    let mut results = serde_json::Map::new();
    results.insert("measure".into(), json!(m.name()));
    let mut params = json!({ "measure": m.name(), "restarts": a.restarts, "max_sweeps": a.max_sweeps, "tol": a.tol });
    let r = if let Some(path) = &a.state {
        let psi = PureState::from_json(&read_file(path)?)?;
        params["state"] = json!(path.display().to_string());
        results.insert("qubits".into(), json!(psi.qubits()));
        evaluate(m, &psi, &settings, &limits)?
    } else {
        let family = Family::parse(a.family.as_deref().unwrap_or_default())?;
        let n = a.n.ok_or_else(|| usage("--n is required with --family"))?;
        params["family"] = json!(family.name());
        params["n"] = json!(n);
        params["sup"] = json!(a.sup);
        results.insert("family".into(), json!(family.name()));
        results.insert("n".into(), json!(n));
        if a.sup {
            family_supremum(family, m, n, &settings, &limits)?
        } else {
            let psi = family.member(n)?.ok_or_else(|| {
                usage(format!(
                    "family {} has no member on {n} qubits",
                    family.name()
                ))
            })?;
            if let Some((value, formula)) = reference_value(family, m, n) {
                results.insert(
                    "reference".into(),
                    json!({ "value": value, "formula": formula }),
                );
            }
            evaluate(m, &psi, &settings, &limits)?
        }
    };
    let r = if a.witness { r } else { r.without_witness() };
    let mut table = Table::new(&["n", "value"]);
    if r.per_size.is_empty() {
        table.push(vec![
            a.n.map_or(Cell::Text(String::new()), Cell::from),
            r.value.into(),
        ]);
    } else {
        r.per_size
            .iter()
            .for_each(|&(n, v)| table.push(vec![n.into(), v.into()]));
    }
    let source = match m {
        Measure::Geometric => (
            "monotones::geometric_measure",
            "1 - max overlap with product states, alternating optimization",
        ),
        Measure::SchmidtRankWidth => (
            "monotones::schmidt_rank_width",
            "min over subcubic trees of max cut Schmidt rank",
        ),
        Measure::EntropicWidth => (
            "monotones::entropic_entanglement_width",
            "min over subcubic trees of max cut entropy",
        ),
    };
    results.insert(
        "result".into(),
        serde_json::to_value(&r).map_err(|e| CliError::Internal(e.to_string()))?,
    );
    Ok(
        Report::new("measure", ctx.config(params), Value::Object(results))
            .provenance(vec![prov("result.value", source.0, source.1)])
            .table(table),
    )
}

pub fn eps_bound(a: &EpsBoundArgs, ctx: &Ctx) -> CliResult<Report> {
    let distance = distance_of(a.distance);
    let eta = match (a.eta, a.eps) {
        (Some(eta), _) => eta,
        (None, Some(eps)) => EtaMap::new(distance).eta(eps)?,
        (None, None) => return Err(usage("one of --eta or --eps is required")),
    };
    let wants = |f: FormulaKind| a.formula == FormulaKind::All || a.formula == f;
    let need_eg = || {
        a.eg.ok_or_else(|| usage("--eg is required for the variational and closed formulas"))
    };
    let mut bounds = Vec::new();
    let mut provenance = Vec::new();
    if wants(FormulaKind::Variational) && (a.formula != FormulaKind::All || a.eg.is_some()) {
        bounds.push(eps_geo_variational(need_eg()?, eta)?);
        provenance.push(prov(
            "variational",
            "epsilon::eps_geo_variational",
            "max over Δ of (1 - η/Δ)(E_G - 3√Δ)",
        ));
    }
    if wants(FormulaKind::Closed) && (a.formula != FormulaKind::All || a.eg.is_some()) {
        bounds.push(eps_geo_closed_form(need_eg()?, eta)?);
        provenance.push(prov(
            "closed_form",
            "epsilon::eps_geo_closed_form",
            "[1 - (3√η/(2E_G))^(2/3)][E_G - (18 E_G η)^(1/3)]",
        ));
    }
    if wants(FormulaKind::Star) {
        bounds.push(eps_geo_star_lower(eta)?);
        provenance.push(prov(
            "star_lower",
            "epsilon::eps_geo_star_lower",
            "1 - 4η^(1/3) + 3.4η^(2/3)",
        ));
    }
    let mut table = Table::new(&["formula", "eta", "value", "validity_ok", "clamped"]);
    for b in &bounds {
        let name = serde_json::to_value(b.formula)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        table.push(vec![
            name.into(),
            b.eta_used.into(),
            b.value.into(),
            b.validity_ok.into(),
            b.clamped.into(),
        ]);
    }
    let params = json!({ "formula": format!("{:?}", a.formula).to_lowercase(), "eg": a.eg, "eta": a.eta, "eps": a.eps, "distance": distance });
    Ok(Report::new(
        "eps-bound",
        ctx.config(params),
        json!({ "eta": eta, "bounds": bounds }),
    )
    .provenance(provenance)
    .table(table))
}

fn verdict_provenance(v: &Verdict, source: &str) -> Vec<crate::report::Provenance> {
    v.trace
        .iter()
        .map(|t| prov(&t.quantity, source, &t.provenance))
        .collect()
}

pub fn criteria(c: &CriteriaCmd, ctx: &Ctx) -> CliResult<Report> {
    match &c.sub {
        Some(CriteriaSub::Frontier(f)) => frontier(f, ctx),
        Some(CriteriaSub::Threshold) => threshold(ctx),
        None => verdict(&c.verdict, ctx),
    }
}

fn verdict(a: &CriteriaArgs, ctx: &Ctx) -> CliResult<Report> {
    let family = Family::parse(
        a.family
            .as_deref()
            .ok_or_else(|| usage("--family is required"))?,
    )?;
    let m = measure_of(a.measure);
    let mut desc = descriptor(family);
    if let Some(s) = &a.scaling {
        desc = desc.with_scaling(m, ScalingClass::parse(s)?);
    }
    let check = a.check.unwrap_or(match m {
        Measure::Geometric if a.delta == 0.0 => CheckKind::Det,
        Measure::Geometric => CheckKind::Stoch,
        _ => CheckKind::Unbounded,
    });
    let accuracy = || match (a.eps, a.eta) {
        (Some(eps), _) => Ok(Accuracy::Eps {
            eps,
            distance: distance_of(a.distance),
        }),
        (None, Some(eta)) => Ok(Accuracy::Eta(eta)),
        (None, None) => Err(usage("--eps or --eta is required for this check")),
    };
    let (v, source) = match check {
        CheckKind::Det => (
            check_approx_det(&desc, accuracy()?, m)?,
            "criteria::check_approx_det",
        ),
        CheckKind::Stoch => (
            check_approx_stoch(&desc, accuracy()?, a.delta, m)?,
            "criteria::check_approx_stoch",
        ),
        CheckKind::Unbounded => (
            check_unbounded_measure(&desc, m, a.delta)?,
            "criteria::check_unbounded_measure",
        ),
        CheckKind::Efficiency => {
            let f = a
                .f_eps
                .as_deref()
                .map(ScalingClass::parse)
                .transpose()?
                .unwrap_or(default_f_eps_class(m));
            (check_efficiency(&desc, m, f)?, "criteria::check_efficiency")
        }
    };
    let params = json!({
        "family": family.name(), "eps": a.eps, "eta": a.eta, "delta": a.delta, "measure": m.name(),
        "distance": distance_of(a.distance), "check": format!("{check:?}").to_lowercase(),
        "f_eps": a.f_eps, "scaling": a.scaling,
    });
    let provenance = verdict_provenance(&v, source);
    Ok(Report::new("criteria", ctx.config(params), &v).provenance(provenance))
}

fn frontier_table(f: &Frontier, mu_column: bool) -> (Table, EtaMap) {
    let cols: &[&str] = if mu_column {
        &["mu", "eps_prime", "delta_prime", "delta_prime_eta"]
    } else {
        &["eps_prime", "delta_prime", "delta_prime_eta"]
    };
    (Table::new(cols), EtaMap::new(f.distance))
}

fn frontier_rows(f: &Frontier, table: &mut Table, map: &EtaMap, mu: Option<f64>) {
    for &(e, d) in &f.points {
        let prod = map.eta(e).map(|h| h * d).unwrap_or(f64::NAN);
        let mut row: Vec<Cell> = mu.map(Cell::from).into_iter().collect();
        row.extend([e.into(), d.into(), prod.into()]);
        table.push(row);
    }
}

fn frontier(a: &FrontierArgs, ctx: &Ctx) -> CliResult<Report> {
    let distance = distance_of(a.distance);
    let f = stability_frontier(a.eps, a.delta, a.mu, distance, a.points)?;
    let (mut table, map) = frontier_table(&f, false);
    frontier_rows(&f, &mut table, &map, None);
    let params = json!({ "eps": a.eps, "delta": a.delta, "mu": a.mu, "distance": distance, "points": a.points });
    Ok(Report::new("criteria-frontier", ctx.config(params), &f)
        .provenance(vec![
            prov("required", "epsilon::EtaMap::eta", "η(ε + δ + μ)"),
            prov(
                "points",
                "criteria::stability_frontier",
                "smallest δ′ with δ′ η(ε′) ≥ η(ε + δ + μ)",
            ),
        ])
        .table(table))
}

fn threshold(ctx: &Ctx) -> CliResult<Report> {
    let eta = w_threshold_eta();
    let sup = 1.0 - 1.0 / E;
    let results = json!({
        "eta_threshold": eta,
        "star_lower_at_threshold": star_lower_raw(eta),
        "w_supremum": sup,
        "residual": star_lower_raw(eta) - sup,
    });
    Ok(
        Report::new("criteria-threshold", ctx.config(json!({})), results).provenance(vec![
            prov(
                "eta_threshold",
                "criteria::w_threshold_eta",
                "bisection for 1 - 4η^(1/3) + 3.4η^(2/3) = 1 - 1/e",
            ),
            prov(
                "w_supremum",
                "criteria::descriptor",
                "sup_N E_G(W_N) = 1 - 1/e",
            ),
        ]),
    )
}

pub fn percolate(c: &PercolateCmd, ctx: &Ctx) -> CliResult<Report> {
    if let Some(PercolateSub::Threshold(t)) = &c.sub {
        let est = estimate_threshold(t.side, t.trials, ctx.seed)?;
        let mut table = Table::new(&["p", "crossing_probability"]);
        est.evaluations
            .iter()
            .for_each(|&(p, x)| table.push(vec![p.into(), x.into()]));
        let params = json!({ "L": t.side, "trials": t.trials });
        return Ok(Report::new("percolate-threshold", ctx.config(params), &est)
            .provenance(vec![prov(
                "p_c",
                "percolation::estimate_threshold",
                "bisection on P(left-right crossing) = 1/2",
            )])
            .table(table));
    }
    let a = &c.run;
    let p = a.p.ok_or_else(|| usage("--p is required"))?;
    let est = spanning_probability(a.side, p, a.trials, ctx.seed)?;
    let mut table = Table::new(&[
        "L",
        "p",
        "trials",
        "spanning_probability",
        "std_error",
        "seed",
    ]);
    table.push(vec![
        a.side.into(),
        p.into(),
        a.trials.into(),
        est.spanning_probability.into(),
        est.std_error.into(),
        Cell::Text(ctx.seed.to_string()),
    ]);
    let params = json!({ "L": a.side, "p": p, "trials": a.trials });
    Ok(Report::new("percolate", ctx.config(params), &est)
        .provenance(vec![
            prov(
                "spanning_probability",
                "percolation::spanning_probability",
                "fraction of trials with a left-right crossing",
            ),
            prov(
                "std_error",
                "percolation::spanning_probability",
                "sqrt(P(1-P)/trials)",
            ),
        ])
        .table(table))
}

pub fn deformed(a: &DeformedArgs, ctx: &Ctx) -> CliResult<Report> {
    let p_site = deformed_p_site(a.lambda)?;
    let lambda_c = deformed_threshold(a.p_c)?;
    let mut results = json!({
        "lambda": a.lambda,
        "p_site": p_site,
        "p_c": a.p_c,
        "lambda_c": lambda_c,
        "above_threshold": a.lambda > lambda_c,
    });
    if a.samples > 0 {
        let counts: Vec<usize> = (0..a.samples)
            .into_par_iter()
            .map(|s| {
                povm_hole_sampler(a.lambda, a.side, &mut stream(ctx.seed, s as u64))
                    .map(|h| h.lattice.occupied_count())
            })
            .collect::<Result<_, _>>()?;
        let sites = (a.samples * a.side * a.side) as f64;
        let frac = counts.iter().sum::<usize>() as f64 / sites;
        let sigma = (p_site * (1.0 - p_site) / sites).sqrt();
        results["holes"] = json!({
            "L": a.side,
            "samples": a.samples,
            "occupied_fraction": frac,
            "sigma": sigma,
            "z_score": if sigma > 0.0 { (frac - p_site) / sigma } else { 0.0 },
        });
    }
    if a.trials > 0 {
        results["spanning"] =
            serde_json::to_value(spanning_probability(a.side, p_site, a.trials, ctx.seed)?)
                .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let params = json!({ "lambda": a.lambda, "L": a.side, "samples": a.samples, "trials": a.trials, "p_c": a.p_c });
    Ok(
        Report::new("deformed", ctx.config(params), results).provenance(vec![
            prov("p_site", "percolation::deformed_p_site", "2λ²/(1+λ²)"),
            prov(
                "lambda_c",
                "percolation::deformed_threshold",
                "sqrt(p_c/(2-p_c))",
            ),
            prov(
                "holes.occupied_fraction",
                "percolation::povm_hole_sampler",
                "heralded filter successes per site",
            ),
        ]),
    )
}

pub fn locc(c: &LoccCmd, ctx: &Ctx) -> CliResult<Report> {
    match &c.sub {
        LoccSub::Run(a) => locc_run(a, ctx),
        LoccSub::NoisyCluster(a) => noisy_cluster(a, ctx),
        LoccSub::Stability(a) => stability(a, ctx),
    }
}

fn locc_run(a: &LoccRunArgs, ctx: &Ctx) -> CliResult<Report> {
    let state_text = read_file(&a.state)?;
    let state = match PureState::from_json(&state_text) {
        Ok(psi) => Ensemble::pure(psi),
        Err(pure_err) => serde_json::from_str::<Ensemble>(&state_text).map_err(|ens_err| {
            usage(format!(
                "state file is neither a pure state ({pure_err}) nor an ensemble ({ens_err})"
            ))
        })?,
    };
    let protocol = Protocol::from_json(&read_file(&a.protocol)?)?;
    let tree = run_protocol(&state, &protocol)?;
    let mut table = Table::new(&["outcomes", "probability", "correction", "residual_terms"]);
    for l in &tree.leaves {
        let terms = l.residual.as_ref().map_or(0, |r| r.len());
        table.push(vec![
            l.outcomes.clone().into(),
            l.probability.into(),
            l.correction.clone().into(),
            terms.into(),
        ]);
    }
    let results = json!({ "qubits": state.qubits(), "total_probability": tree.total_probability(), "tree": tree });
    let params = json!({ "state": a.state.display().to_string(), "protocol": a.protocol.display().to_string() });
    Ok(Report::new("locc-run", ctx.config(params), results)
        .provenance(vec![prov(
            "tree",
            "locc::run_protocol",
            "Born-rule branching with Pauli-frame feedforward",
        )])
        .table(table))
}

fn noisy_cluster(a: &NoisyClusterArgs, ctx: &Ctx) -> CliResult<Report> {
    let mut rng = stream(ctx.seed, 0);
    let (label, angles, (graph, protocol, _)) = if a.grid {
        if a.n != 4 {
            return Err(usage("--grid uses the 2x2 grid; --n must be 4"));
        }
        let angles = [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)];
        ("grid2x2", angles.to_vec(), grid_protocol(angles)?)
    } else {
        if a.n < 2 {
            return Err(usage("--n must be at least 2"));
        }
        let angles: Vec<f64> = (0..a.n - 1).map(|_| rng.random_range(0.0..TAU)).collect();
        ("chain", angles.clone(), chain_protocol(&angles)?)
    };
    let qubits = graph.num_vertices();
    let noise = match a.patterns {
        Some(0) => return Err(usage("--patterns must be positive")),
        Some(k) => NoiseModel::random_patterns(qubits, k, &mut stream(ctx.seed, 1)),
        None => NoiseModel::SingleFlip {
            qubit: a.flip.unwrap_or(0),
        },
    };
    let r = noisy_cluster_experiment(&graph, &noise, a.p, &protocol)?;
    let mut table = Table::new(&["outcomes", "probability", "distance", "bound"]);
    for b in &r.branches {
        table.push(vec![
            b.outcomes.clone().into(),
            b.probability.into(),
            b.distance.into(),
            r.bound.into(),
        ]);
    }
    let params =
        json!({ "n": a.n, "p": a.p, "flip": a.flip, "patterns": a.patterns, "grid": a.grid });
    let results =
        json!({ "graph": label, "qubits": qubits, "angles": angles, "noise": noise, "report": r });
    Ok(
        Report::new("locc-noisy-cluster", ctx.config(params), results)
            .provenance(vec![
                prov(
                    "report.branches.distance",
                    "qstate::trace_distance",
                    "D(ρ_k, target) per outcome branch",
                ),
                prov("report.bound", "locc::noisy_cluster_experiment", "p"),
                prov(
                    "report.averaged_fidelity",
                    "qstate::fidelity",
                    "⟨target| Σ p_k ρ_k |target⟩",
                ),
            ])
            .table(table),
    )
}

fn stability(a: &StabilityArgs, ctx: &Ctx) -> CliResult<Report> {
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let s = stability_sweep(a.n, a.mu, a.eps, a.delta, a.trials, ctx.seed)?;
    let mut table = Table::new(&[
        "trial",
        "mu",
        "output_distance",
        "distance_bound",
        "measured_fidelity",
        "fidelity_bound",
        "pass",
    ]);
    let mut per_trial = Vec::with_capacity(s.reports.len());
    for (i, r) in s.reports.iter().enumerate() {
        table.push(vec![
            i.into(),
            r.mu.into(),
            r.output_distance.into(),
            r.distance_bound.into(),
            r.measured_fidelity.into(),
            r.fidelity_bound.into(),
            r.pass.into(),
        ]);
        per_trial.push(json!({
            "mu": r.mu, "output_distance": r.output_distance, "distance_bound": r.distance_bound,
            "measured_fidelity": r.measured_fidelity, "fidelity_bound": r.fidelity_bound, "pass": r.pass,
        }));
    }
    let results = json!({
        "n": a.n, "mu": s.mu, "eps": a.eps, "delta": a.delta, "trials": s.trials, "seed": s.seed,
        "violations": s.violations, "max_excess": s.max_excess, "pass": s.violations == 0,
        "frontier": s.reports.first().map(|r| &r.frontier), "per_trial": per_trial,
    });
    let params =
        json!({ "n": a.n, "mu": a.mu, "eps": a.eps, "delta": a.delta, "trials": a.trials });
    Ok(Report::new("locc-stability", ctx.config(params), results)
        .provenance(vec![
            prov(
                "per_trial.output_distance",
                "locc::stability_experiment",
                "D(ρ̃_A, target) after replaying the protocol",
            ),
            prov(
                "per_trial.distance_bound",
                "locc::stability_experiment",
                "μ + ε + δ",
            ),
            prov(
                "frontier",
                "criteria::stability_frontier",
                "δ′ η(ε′) ≥ η(ε + δ + μ)",
            ),
        ])
        .table(table))
}
