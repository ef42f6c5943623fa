//! Compact versions of the acceptance checks, fast enough for routine use.

use std::f64::consts::{E, TAU};
use std::time::Instant;

use mbqc_core::criteria::{
    check_approx_det, check_approx_stoch, check_unbounded_measure, descriptor, w_threshold_eta,
    Accuracy, Decision,
};
use mbqc_core::epsilon::{
    eps_geo_closed_form, eps_geo_star_lower, eps_geo_variational, lemma_lipschitz_check,
};
use mbqc_core::locc::{
    averaged_fidelity_check, chain_protocol, grid_protocol, noisy_cluster_experiment, run_protocol,
    stability_sweep, NoiseModel, Protocol,
};
use mbqc_core::monotones::{
    double_factorial_count, enumerate_subcubic_trees, product_overlap, schmidt_rank_width, Family,
    Measure, OptimizerSettings, DEFAULT_RANK_TOL,
};
use mbqc_core::percolation::{
    deformed_p_site, deformed_threshold, estimate_threshold, povm_hole_sampler,
};
use mbqc_core::qstate::{make_ghz, make_graph_state, make_w_state, Ensemble, Graph, PureState};
use mbqc_core::rng::stream;
use rand::Rng;
use serde_json::json;

use crate::args::SelftestArgs;
use crate::commands::Ctx;
use crate::error::CliResult;
use crate::report::{prov, Report, Table};

type Check = Result<String, String>;
type Job = Option<Box<dyn Fn() -> Check>>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn core(e: mbqc_core::Error) -> String {
    e.to_string()
}

fn w_overlap() -> Check {
    let s = OptimizerSettings::default();
    let mut prev = f64::INFINITY;
    for n in 2..=8 {
        let v = product_overlap(&make_w_state(n).map_err(core)?, &s)
            .map_err(core)?
            .value;
        let nf = n as f64;
        let expect = (1.0 - 1.0 / nf).powf(nf - 1.0);
        ensure(
            (v - expect).abs() <= 1e-6,
            format!("N = {n}: {v} vs {expect}"),
        )?;
        ensure(v < prev, format!("not decreasing at N = {n}"))?;
        ensure(v > 1.0 / E, format!("N = {n} below 1/e"))?;
        prev = v;
    }
    Ok(format!(
        "N = 2..8 match (1-1/N)^(N-1); N = 8 gives {prev:.9}"
    ))
}

fn w_threshold() -> Check {
    let eta = w_threshold_eta();
    ensure(
        (9.5e-4..=1.1e-3).contains(&eta),
        format!("threshold {eta:e}"),
    )?;
    let x = eta.cbrt();
    let residual = (1.0 - 4.0 * x + 3.4 * x * x) - (1.0 - 1.0 / E);
    ensure(residual.abs() < 1e-9, format!("residual {residual:e}"))?;
    Ok(format!("η = {eta:.6e}, residual {residual:.1e}"))
}

fn star_bound() -> Check {
    let at = eps_geo_star_lower(1e-3).map_err(core)?.value;
    let after = eps_geo_star_lower(1.1e-3).map_err(core)?.value;
    let sup = 1.0 - 1.0 / E;
    ensure(
        at > sup && after < sup,
        format!("no flip: {at} / {after} around {sup}"),
    )?;
    ensure(
        (at - 0.63424).abs() <= 1e-5,
        format!("star bound at 1e-3 is {at:.6}, expected 0.63424 ± 1e-5"),
    )?;
    Ok(format!("{at:.6} > 1-1/e > {after:.6}"))
}

fn percolation(seed: u64) -> Check {
    let est = estimate_threshold(64, 2000, seed).map_err(core)?;
    ensure(
        (est.p_c - 0.5927).abs() <= 0.01,
        format!("p_c = {}", est.p_c),
    )?;
    Ok(format!("p_c = {:.5}", est.p_c))
}

fn deformed(seed: u64) -> Check {
    let lc = deformed_threshold(0.5927).map_err(core)?;
    let ps = deformed_p_site(0.6490).map_err(core)?;
    ensure((lc - 0.6490).abs() <= 5e-4, format!("λ_c = {lc}"))?;
    ensure((ps - 0.5927).abs() <= 5e-4, format!("p_site = {ps}"))?;
    for (i, lambda) in [0.5, 0.6490, 0.8].into_iter().enumerate() {
        let p = deformed_p_site(lambda).map_err(core)?;
        let mut rng = stream(seed, 100 + i as u64);
        let mut hits = 0;
        for _ in 0..20 {
            hits += povm_hole_sampler(lambda, 64, &mut rng)
                .map_err(core)?
                .lattice
                .occupied_count();
        }
        let sites = (20 * 64 * 64) as f64;
        let sigma = (p * (1.0 - p) / sites).sqrt();
        let frac = hits as f64 / sites;
        ensure(
            (frac - p).abs() <= 4.0 * sigma,
            format!("λ = {lambda}: occupancy {frac} vs {p}"),
        )?;
    }
    Ok(format!("λ_c = {lc:.5}, p_site(0.649) = {ps:.5}"))
}

/// (label, graph, protocol, target, measured qubits)
type Case = (String, Graph, Protocol, PureState, usize);

fn noisy_cases(seed: u64) -> Result<Vec<Case>, String> {
    let mut rng = stream(seed, 6);
    let angles: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..TAU)).collect();
    let (g, p, t) = chain_protocol(&angles).map_err(core)?;
    let (gg, gp, gt) =
        grid_protocol([rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)]).map_err(core)?;
    Ok(vec![
        ("chain n=4".into(), g, p, t, 3),
        ("2x2 grid".into(), gg, gp, gt, 3),
    ])
}

fn noisy_cluster(seed: u64) -> Check {
    let mut runs = 0;
    for (label, graph, protocol, _, measured) in noisy_cases(seed)? {
        for p in [0.05, 0.2] {
            for qubit in 0..graph.num_vertices() {
                let r = noisy_cluster_experiment(
                    &graph,
                    &NoiseModel::SingleFlip { qubit },
                    p,
                    &protocol,
                )
                .map_err(core)?;
                ensure(
                    r.max_distance <= p + 1e-9,
                    format!("{label}: distance {} > {p}", r.max_distance),
                )?;
                let expect = 0.5f64.powi(measured as i32);
                ensure(
                    r.probabilities_match
                        && r.branches
                            .iter()
                            .all(|b| (b.probability - expect).abs() <= 1e-12),
                    format!("{label}: branch probabilities"),
                )?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs within D ≤ p"))
}

fn observation(seed: u64) -> Check {
    let mut worst = f64::INFINITY;
    for (label, graph, protocol, target, _) in noisy_cases(seed)? {
        let c = make_graph_state(&graph).map_err(core)?;
        for p in [0.05, 0.2] {
            let rho = Ensemble::new(vec![(1.0 - p, c.clone()), (p, c.apply_z(0).map_err(core)?)])
                .map_err(core)?;
            let tree = run_protocol(&rho, &protocol).map_err(core)?;
            let f = averaged_fidelity_check(&tree, &target, p, 0.0).map_err(core)?;
            ensure(
                f.pass,
                format!("{label}: fidelity {} < {}", f.fidelity, f.bound),
            )?;
            worst = worst.min(f.fidelity - f.bound);
        }
    }
    Ok(format!("smallest fidelity slack {worst:.3e}"))
}

fn stability(seed: u64) -> Check {
    let mut total = 0;
    for mu in [0.02, 0.05, 0.1] {
        let s = stability_sweep(4, mu, 0.0, 0.0, 10, seed).map_err(core)?;
        ensure(
            s.violations == 0,
            format!("μ = {mu}: {} violations", s.violations),
        )?;
        for r in &s.reports {
            let f = &r.frontier;
            ensure(
                f.points
                    .iter()
                    .all(|&(e, d)| d >= 1.0 || e * d >= f.required - 1e-12),
                format!("μ = {mu}: frontier below η(ε+δ+μ)"),
            )?;
        }
        total += s.trials;
    }
    Ok(format!("{total} perturbations, zero violations"))
}

fn lemmas(seed: u64) -> Check {
    let s = OptimizerSettings {
        restarts: 8,
        ..Default::default()
    };
    let mut rng = stream(seed, 9);
    for i in 0..40 {
        let n = 1 + i % 3;
        let psi = PureState::random(n, &mut rng).map_err(core)?;
        let t: f64 = rng.random_range(1e-4..0.2);
        let phi = PureState::random(n, &mut rng).map_err(core)?;
        let amps = psi
            .amplitudes()
            .iter()
            .zip(phi.amplitudes())
            .map(|(a, b)| a + b * t)
            .collect();
        let tilde = PureState::from_unnormalized(n, amps).map_err(core)?;
        let r = lemma_lipschitz_check(&psi, &tilde, &s).map_err(core)?;
        ensure(
            r.holds,
            format!("pair {i}: difference {} > {}", r.difference, r.bound),
        )?;
    }
    for i in 1..=10 {
        for j in 0..10 {
            let eg = i as f64 / 10.0;
            let eta = 10f64.powf(-12.0 + 1.1 * j as f64);
            let v = eps_geo_variational(eg, eta).map_err(core)?.value;
            let c = eps_geo_closed_form(eg, eta).map_err(core)?.value;
            ensure(
                v >= c - 1e-12,
                format!("variational {v} < closed {c} at ({eg}, {eta:e})"),
            )?;
        }
    }
    Ok("40 Lipschitz pairs, 10x10 dominance grid".into())
}

fn axioms() -> Check {
    for n in 3..=7 {
        let count = enumerate_subcubic_trees(n).map_err(core)?.count() as u64;
        ensure(
            count == double_factorial_count(n),
            format!("n = {n}: {count} trees"),
        )?;
    }
    for n in 4..=6 {
        let chi = schmidt_rank_width(&make_ghz(n).map_err(core)?, DEFAULT_RANK_TOL)
            .map_err(core)?
            .value;
        ensure(chi == 2.0, format!("GHZ_{n}: χ_wd = {chi}"))?;
    }
    Ok("tree counts (2n-5)!! for n = 3..7, χ_wd(GHZ) = 2".into())
}

fn criteria() -> Check {
    for (family, expect) in [
        (Family::Ghz, Decision::RuledOut),
        (Family::Cluster1d, Decision::RuledOut),
        (Family::Cluster2d, Decision::NotRuledOut),
    ] {
        let v = check_unbounded_measure(&descriptor(family), Measure::SchmidtRankWidth, 0.0)
            .map_err(core)?;
        ensure(
            v.decision == expect,
            format!("{}: {:?}", family.name(), v.decision),
        )?;
    }
    for family in [Family::W, Family::Ghz, Family::Cluster2d, Family::Product] {
        for eta in [1e-4, 1e-3, 1.1e-3, 0.05] {
            let d = check_approx_det(&descriptor(family), Accuracy::Eta(eta), Measure::Geometric)
                .map_err(core)?;
            let s = check_approx_stoch(
                &descriptor(family),
                Accuracy::Eta(eta),
                0.0,
                Measure::Geometric,
            )
            .map_err(core)?;
            ensure(
                d.decision == s.decision
                    && d.required_value.to_bits() == s.required_value.to_bits(),
                format!("{} at η = {eta}: det and stoch(0) differ", family.name()),
            )?;
        }
    }
    Ok("unbounded-measure verdicts and det = stoch(δ = 0)".into())
}

pub fn selftest(a: &SelftestArgs, ctx: &Ctx) -> CliResult<Report> {
    let seed = ctx.seed;
    let checks: Vec<(&str, Job)> = vec![
        ("W-state overlap", Some(Box::new(w_overlap))),
        ("W threshold", Some(Box::new(w_threshold))),
        ("star bound arithmetic", Some(Box::new(star_bound))),
        (
            "percolation threshold",
            a.full
                .then(|| Box::new(move || percolation(seed)) as Box<dyn Fn() -> Check>),
        ),
        (
            "deformed-cluster constants",
            Some(Box::new(move || deformed(seed))),
        ),
        ("noisy cluster", Some(Box::new(move || noisy_cluster(seed)))),
        (
            "observation bound",
            Some(Box::new(move || observation(seed))),
        ),
        ("stability", Some(Box::new(move || stability(seed)))),
        ("lemmas", Some(Box::new(move || lemmas(seed)))),
        ("monotone axioms", Some(Box::new(axioms))),
        ("criteria engine", Some(Box::new(criteria))),
    ];
    let mut table = Table::new(&["check", "name", "status", "detail"]);
    let mut rows = Vec::new();
    let mut failed = 0;
    for (i, (name, check)) in checks.into_iter().enumerate() {
        let (status, detail) = match check {
            None => ("skipped", "slow; run with --full".to_string()),
            Some(f) => {
                let t = Instant::now();
                let r = f();
                eprintln!("selftest {:>2} {name}: {:.2?}", i + 1, t.elapsed());
                match r {
                    Ok(d) => ("pass", d),
                    Err(d) => {
                        failed += 1;
                        ("fail", d)
                    }
                }
            }
        };
        table.push(vec![
            (i + 1).into(),
            name.into(),
            status.into(),
            detail.clone().into(),
        ]);
        rows.push(json!({ "check": i + 1, "name": name, "status": status, "detail": detail }));
    }
    let results = json!({ "checks": rows, "failed": failed, "passed": failed == 0 });
    let mut report = Report::new("selftest", ctx.config(json!({ "full": a.full })), results)
        .provenance(vec![prov(
            "checks",
            "selftest",
            "reduced-size versions of the acceptance checks",
        )])
        .table(table);
    report.human_table = true;
    report.exit_code = if failed == 0 { 0 } else { 1 };
    Ok(report)
}
