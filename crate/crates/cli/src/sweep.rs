//! Grid sweeps. Rows are ordered by grid index whatever the thread count.

use mbqc_core::criteria::{check_approx_stoch, descriptor, stability_frontier, Accuracy};
use mbqc_core::epsilon::{eps_geo_closed_form, eps_geo_star_lower, eps_geo_variational};
use mbqc_core::monotones::{Family, Measure};
use mbqc_core::percolation::spanning_probability;
use rayon::prelude::*;
use serde_json::json;

use crate::args::{SweepCmd, SweepSub};
use crate::commands::{distance_of, Ctx};
use crate::error::{usage, CliResult};
use crate::report::{prov, Cell, Report, Table};

pub const MAX_POINTS: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: u64,
}

impl Range {
    pub fn parse(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad number {t:?} in range {s:?}")))
        };
        let r = match parts.as_slice() {
            [v] => Range {
                lo: num(v)?,
                hi: num(v)?,
                n: 1,
            },
            [lo, hi, n] => Range {
                lo: num(lo)?,
                hi: num(hi)?,
                n: n.trim()
                    .parse()
                    .map_err(|_| usage(format!("bad point count in range {s:?}")))?,
            },
            _ => {
                return Err(usage(format!(
                    "range {s:?} must be lo:hi:n or a single value"
                )))
            }
        };
        if r.n == 0 || !r.lo.is_finite() || !r.hi.is_finite() {
            return Err(usage(format!(
                "range {s:?} needs finite ends and at least one point"
            )));
        }
        Ok(r)
    }

    pub fn values(&self, log: bool) -> CliResult<Vec<f64>> {
        if log && !(self.lo > 0.0 && self.hi > 0.0) {
            return Err(usage("log-spaced ranges need positive ends"));
        }
        if self.n == 1 {
            return Ok(vec![self.lo]);
        }
        let t = |i: u64| i as f64 / (self.n - 1) as f64;
        Ok((0..self.n)
            .map(|i| {
                if log {
                    (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * t(i)).exp()
                } else {
                    self.lo + (self.hi - self.lo) * t(i)
                }
            })
            .collect())
    }
}

fn check_size(counts: &[u64]) -> CliResult<()> {
    let total = counts
        .iter()
        .try_fold(1u64, |acc, &c| acc.checked_mul(c))
        .unwrap_or(u64::MAX);
    if total > MAX_POINTS {
        return Err(usage(format!(
            "grid of {total} points refused (limit {MAX_POINTS})"
        )));
    }
    Ok(())
}

fn grid2(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| (x, y)))
        .collect()
}

pub fn sweep(c: &SweepCmd, ctx: &Ctx) -> CliResult<Report> {
    let (kind, params, table, provenance) = match &c.sub {
        SweepSub::Star { eta, log } => {
            let r = Range::parse(eta)?;
            check_size(&[r.n])?;
            let mut t = Table::new(&["eta", "value", "clamped", "validity_ok"]);
            for h in r.values(*log)? {
                let b = eps_geo_star_lower(h)?;
                t.push(vec![
                    h.into(),
                    b.value.into(),
                    b.clamped.into(),
                    b.validity_ok.into(),
                ]);
            }
            (
                "star",
                json!({ "eta": eta, "log": log }),
                t,
                vec![prov(
                    "value",
                    "epsilon::eps_geo_star_lower",
                    "1 - 4η^(1/3) + 3.4η^(2/3)",
                )],
            )
        }
        SweepSub::Bound { eg, eta, log } => {
            let (re, rh) = (Range::parse(eg)?, Range::parse(eta)?);
            check_size(&[re.n, rh.n])?;
            let points = grid2(&re.values(false)?, &rh.values(*log)?);
            let rows: Vec<Vec<Cell>> = points
                .par_iter()
                .map(|&(g, h)| {
                    let v = eps_geo_variational(g, h)?;
                    let cf = eps_geo_closed_form(g, h)?;
                    Ok(vec![
                        g.into(),
                        h.into(),
                        v.value.into(),
                        cf.value.into(),
                        v.delta.unwrap_or(f64::NAN).into(),
                    ])
                })
                .collect::<mbqc_core::Result<_>>()?;
            let t = Table {
                columns: ["eg", "eta", "variational", "closed_form", "delta_opt"]
                    .map(String::from)
                    .to_vec(),
                rows,
            };
            (
                "bound",
                json!({ "eg": eg, "eta": eta, "log": log }),
                t,
                vec![
                    prov(
                        "variational",
                        "epsilon::eps_geo_variational",
                        "max over Δ of (1 - η/Δ)(E_G - 3√Δ)",
                    ),
                    prov(
                        "closed_form",
                        "epsilon::eps_geo_closed_form",
                        "[1 - (3√η/(2E_G))^(2/3)][E_G - (18 E_G η)^(1/3)]",
                    ),
                ],
            )
        }
        SweepSub::Percolate { side, p, trials } => {
            let r = Range::parse(p)?;
            check_size(&[r.n])?;
            let mut t = Table::new(&["p", "spanning_probability", "std_error"]);
            for q in r.values(false)? {
                let e = spanning_probability(*side, q, *trials, ctx.seed)?;
                t.push(vec![
                    q.into(),
                    e.spanning_probability.into(),
                    e.std_error.into(),
                ]);
            }
            (
                "percolate",
                json!({ "L": side, "p": p, "trials": trials }),
                t,
                vec![prov(
                    "spanning_probability",
                    "percolation::spanning_probability",
                    "fraction of trials with a left-right crossing",
                )],
            )
        }
        SweepSub::Frontier {
            eps,
            delta,
            mu,
            distance,
            points,
        } => {
            let r = Range::parse(mu)?;
            check_size(&[r.n, *points as u64])?;
            let kind = distance_of(*distance);
            let map = mbqc_core::epsilon::EtaMap::new(kind);
            let mut t = Table::new(&["mu", "eps_prime", "delta_prime", "delta_prime_eta"]);
            for m in r.values(false)? {
                let f = stability_frontier(*eps, *delta, m, kind, *points)?;
                for &(e, d) in &f.points {
                    let prod = map.eta(e).map(|h| h * d).unwrap_or(f64::NAN);
                    t.push(vec![m.into(), e.into(), d.into(), prod.into()]);
                }
            }
            (
                "frontier",
                json!({ "eps": eps, "delta": delta, "mu": mu, "distance": kind, "points": points }),
                t,
                vec![prov(
                    "delta_prime",
                    "criteria::stability_frontier",
                    "smallest δ′ with δ′ η(ε′) ≥ η(ε + δ + μ)",
                )],
            )
        }
        SweepSub::Criteria {
            family,
            eta,
            delta,
            log,
        } => {
            let (rh, rd) = (Range::parse(eta)?, Range::parse(delta)?);
            check_size(&[rh.n, rd.n])?;
            let fam = Family::parse(family)?;
            let desc = descriptor(fam);
            let points = grid2(&rh.values(*log)?, &rd.values(false)?);
            let rows: Vec<Vec<Cell>> = points
                .par_iter()
                .map(|&(h, d)| {
                    let v = check_approx_stoch(&desc, Accuracy::Eta(h), d, Measure::Geometric)?;
                    let decision = serde_json::to_value(v.decision)
                        .ok()
                        .and_then(|x| x.as_str().map(String::from));
                    Ok(vec![
                        h.into(),
                        d.into(),
                        v.family_value.into(),
                        v.required_value.into(),
                        decision.unwrap_or_default().into(),
                    ])
                })
                .collect::<mbqc_core::Result<_>>()?;
            let t = Table {
                columns: ["eta", "delta", "family_value", "required_value", "decision"]
                    .map(String::from)
                    .to_vec(),
                rows,
            };
            (
                "criteria",
                json!({ "family": fam.name(), "eta": eta, "delta": delta, "log": log }),
                t,
                vec![prov(
                    "decision",
                    "criteria::check_approx_stoch",
                    "ruled_out iff family value < (1 - δ) E*_ε",
                )],
            )
        }
    };
    let mut results = table.to_json();
    results["kind"] = json!(kind);
    Ok(Report::new("sweep", ctx.config(params), results)
        .provenance(provenance)
        .table(table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(
            Range::parse("0:1:3").unwrap().values(false).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(
            Range::parse("0.25").unwrap().values(false).unwrap(),
            vec![0.25]
        );
        let v = Range::parse("1e-4:1:5").unwrap().values(true).unwrap();
        assert!((v[1] - 1e-3).abs() < 1e-15 && (v[4] - 1.0).abs() < 1e-15);
        assert!(Range::parse("0:1").is_err());
        assert!(Range::parse("0:1:0").is_err());
        assert!(Range::parse("0:1:x").is_err());
        assert!(Range::parse("0:1:4").unwrap().values(true).is_err());
    }

    #[test]
    fn grid_cap() {
        assert!(check_size(&[100_000]).is_ok());
        assert!(check_size(&[100_001]).is_err());
        assert!(check_size(&[400, 400]).is_err());
        assert!(check_size(&[u64::MAX, 2]).is_err());
    }
}
