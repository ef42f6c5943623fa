//! Necessary conditions for approximate, stochastic and efficient
//! universality turned into verdict records.
//!
//! A verdict is one-sided: `RuledOut` means the family provably fails the
//! condition, `NotRuledOut` makes no claim about universality.

use serde::{Deserialize, Serialize};

use crate::epsilon::{eps_geo_star_lower, star_lower_raw, DistanceKind, EtaMap, ETA_VALIDITY};
use crate::error::{invalid, Error, Result};
use crate::monotones::{Family, Measure};

/// Asymptotic growth of a measure along a family, in the number of qubits N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingClass {
    Constant,
    Logarithmic,
    Polylog,
    Polynomial,
    Exponential,
    Unknown,
}

impl ScalingClass {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "constant" => ScalingClass::Constant,
            "logarithmic" | "log" => ScalingClass::Logarithmic,
            "polylog" => ScalingClass::Polylog,
            "polynomial" | "poly" => ScalingClass::Polynomial,
            "exponential" | "exp" => ScalingClass::Exponential,
            "unknown" => ScalingClass::Unknown,
            _ => return Err(invalid(format!("unknown scaling class {name:?}"))),
        })
    }

    /// Class of log f for f in this class.
    pub fn log_of(self) -> ScalingClass {
        match self {
            ScalingClass::Exponential => ScalingClass::Polynomial,
            ScalingClass::Polynomial => ScalingClass::Logarithmic,
            ScalingClass::Unknown => ScalingClass::Unknown,
            _ => ScalingClass::Constant,
        }
    }

    fn rank(self) -> Option<u8> {
        match self {
            ScalingClass::Constant => Some(0),
            ScalingClass::Logarithmic => Some(1),
            ScalingClass::Polylog => Some(2),
            ScalingClass::Polynomial => Some(3),
            ScalingClass::Exponential => Some(4),
            ScalingClass::Unknown => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownValue {
    pub value: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureFacts {
    pub measure: Measure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_supremum: Option<KnownValue>,
    pub scaling_class: ScalingClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub name: String,
    pub family: Family,
    pub facts: Vec<MeasureFacts>,
}

impl FamilyDescriptor {
    pub fn facts(&self, measure: Measure) -> Option<&MeasureFacts> {
        self.facts.iter().find(|f| f.measure == measure)
    }

    pub fn known_supremum(&self, measure: Measure) -> Option<&KnownValue> {
        self.facts(measure).and_then(|f| f.known_supremum.as_ref())
    }

    pub fn scaling_class(&self, measure: Measure) -> ScalingClass {
        self.facts(measure)
            .map_or(ScalingClass::Unknown, |f| f.scaling_class)
    }

    pub fn with_scaling(mut self, measure: Measure, class: ScalingClass) -> Self {
        match self.facts.iter_mut().find(|f| f.measure == measure) {
            Some(f) => f.scaling_class = class,
            None => self.facts.push(MeasureFacts {
                measure,
                known_supremum: None,
                scaling_class: class,
            }),
        }
        self
    }
}

fn facts(measure: Measure, sup: Option<(f64, &str)>, class: ScalingClass) -> MeasureFacts {
    MeasureFacts {
        measure,
        known_supremum: sup.map(|(value, p)| KnownValue {
            value,
            provenance: p.into(),
        }),
        scaling_class: class,
    }
}

/// Built-in descriptor for a registered family.
pub fn descriptor(family: Family) -> FamilyDescriptor {
    use Measure::*;
    use ScalingClass::*;
    let facts = match family {
        Family::W => vec![
            facts(
                Geometric,
                Some((1.0 - (-1.0f64).exp(), "limit of 1-(1-1/N)^(N-1)")),
                Constant,
            ),
            facts(
                SchmidtRankWidth,
                Some((2.0, "every cut of W has Schmidt rank 2")),
                Constant,
            ),
        ],
        Family::Ghz => vec![
            facts(Geometric, Some((0.5, "overlap with |0...0>")), Constant),
            facts(
                SchmidtRankWidth,
                Some((2.0, "every cut of GHZ has Schmidt rank 2")),
                Constant,
            ),
        ],
        Family::Cluster1d => vec![
            facts(Geometric, None, Polynomial),
            facts(
                SchmidtRankWidth,
                Some((2.0, "path graph, rank-width 1")),
                Constant,
            ),
        ],
        Family::Cluster2d => vec![
            facts(
                Geometric,
                Some((1.0, "geometric measure of 2D clusters tends to 1")),
                Polynomial,
            ),
            facts(SchmidtRankWidth, None, Exponential),
        ],
        Family::DeformedCluster2d { .. } => vec![facts(SchmidtRankWidth, None, Exponential)],
        Family::Product => vec![
            facts(Geometric, Some((0.0, "product states")), Constant),
            facts(SchmidtRankWidth, Some((1.0, "product states")), Constant),
        ],
    };
    FamilyDescriptor {
        name: family.name(),
        family,
        facts,
    }
}

/// Axiom flags that gate the use of a measure in a verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureAxioms {
    pub measure: Measure,
    /// P1 through P6.
    pub properties: [bool; 6],
    pub extendable: bool,
    pub strong_monotone: bool,
    pub divergent_eps_star: bool,
    pub theorem_use: bool,
    /// Known finite upper bound over all states, if any.
    pub global_upper: Option<u32>,
}

pub fn axioms(measure: Measure) -> MeasureAxioms {
    match measure {
        Measure::Geometric => MeasureAxioms {
            measure,
            properties: [true; 6],
            extendable: true,
            strong_monotone: true,
            divergent_eps_star: false,
            theorem_use: true,
            global_upper: Some(1),
        },
        Measure::SchmidtRankWidth => MeasureAxioms {
            measure,
            properties: [true; 6],
            extendable: true,
            strong_monotone: true,
            divergent_eps_star: true,
            theorem_use: true,
            global_upper: None,
        },
        Measure::EntropicWidth => MeasureAxioms {
            measure,
            properties: [false; 6],
            extendable: false,
            strong_monotone: false,
            divergent_eps_star: false,
            theorem_use: false,
            global_upper: None,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    RuledOut,
    NotRuledOut,
}

/// Strict comparison shared by all verdicts.
pub fn decide(family_value: f64, required_value: f64) -> Decision {
    if family_value < required_value {
        Decision::RuledOut
    } else {
        Decision::NotRuledOut
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub quantity: String,
    pub value: serde_json::Value,
    pub provenance: String,
}

fn entry(
    quantity: &str,
    value: impl Into<serde_json::Value>,
    provenance: impl Into<String>,
) -> TraceEntry {
    TraceEntry {
        quantity: quantity.into(),
        value: value.into(),
        provenance: provenance.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub family: String,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub delta: f64,
    pub measure: Measure,
    /// Non-finite values serialize as null.
    pub family_value: f64,
    pub required_value: f64,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub trace: Vec<TraceEntry>,
}

/// Target accuracy, given either as a distance ε or directly as η.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Accuracy {
    Eps { eps: f64, distance: DistanceKind },
    Eta(f64),
}

impl Accuracy {
    pub fn trace(eps: f64) -> Self {
        Accuracy::Eps {
            eps,
            distance: DistanceKind::Trace,
        }
    }

    fn resolve(&self, trace: &mut Vec<TraceEntry>) -> Result<(Option<f64>, f64)> {
        match *self {
            Accuracy::Eps { eps, distance } => {
                let eta = EtaMap::new(distance).eta(eps)?;
                trace.push(entry(
                    "eta",
                    eta,
                    format!("eta(eps) for {distance:?} distance"),
                ));
                Ok((Some(eps), eta))
            }
            Accuracy::Eta(eta) => {
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(invalid(format!("η = {eta} outside (0, 1]")));
                }
                trace.push(entry("eta", eta, "given"));
                Ok((None, eta))
            }
        }
    }
}

fn refuse(measure: Measure, why: &str) -> Error {
    Error::NotApplicable(format!(
        "measure {} cannot be used here: {why}",
        measure.name()
    ))
}

/// Upper value of the measure on the family: known supremum or global bound.
fn family_upper(
    desc: &FamilyDescriptor,
    measure: Measure,
    trace: &mut Vec<TraceEntry>,
) -> Result<f64> {
    if let Some(k) = desc.known_supremum(measure) {
        trace.push(entry(
            "family_value",
            k.value,
            format!("known supremum: {}", k.provenance),
        ));
        return Ok(k.value);
    }
    match axioms(measure).global_upper {
        Some(u) => {
            trace.push(entry(
                "family_value",
                u,
                "global upper bound of the measure",
            ));
            Ok(u as f64)
        }
        None => Err(refuse(
            measure,
            "no known value for this family and no global upper bound",
        )),
    }
}

/// Lower bound on E*_ε for the measure at the given η.
fn eps_star_lower(measure: Measure, eta: f64, trace: &mut Vec<TraceEntry>) -> Result<f64> {
    match measure {
        Measure::Geometric => {
            let b = eps_geo_star_lower(eta)?;
            if !b.validity_ok {
                return Err(invalid(format!(
                    "η = {eta} above the validity limit {ETA_VALIDITY}"
                )));
            }
            trace.push(entry(
                "eps_star_lower",
                b.value,
                "1 - 4 eta^(1/3) + 3.4 eta^(2/3), clamped at 0",
            ));
            Ok(b.value)
        }
        _ => Err(refuse(
            measure,
            "no lower bound on the ε-supremum is available",
        )),
    }
}

fn gate(measure: Measure, need_strong: bool) -> Result<()> {
    let a = axioms(measure);
    if !a.theorem_use {
        return Err(refuse(measure, "not an entanglement monotone"));
    }
    if !a.extendable {
        return Err(refuse(measure, "not extendable to mixed states"));
    }
    if need_strong && !a.strong_monotone {
        return Err(refuse(measure, "not a strong monotone"));
    }
    if !need_strong && !a.properties[5] {
        return Err(refuse(
            measure,
            "not weakly non-increasing under the target operations",
        ));
    }
    Ok(())
}

/// Deterministic ε-approximate universality requires E(Σ) ≥ E*_ε.
pub fn check_approx_det(
    desc: &FamilyDescriptor,
    accuracy: Accuracy,
    measure: Measure,
) -> Result<Verdict> {
    gate(measure, false)?;
    let mut trace = Vec::new();
    let (epsilon, eta) = accuracy.resolve(&mut trace)?;
    let required_value = eps_star_lower(measure, eta, &mut trace)?;
    let family_value = family_upper(desc, measure, &mut trace)?;
    Ok(Verdict {
        family: desc.name.clone(),
        epsilon,
        eta: Some(eta),
        delta: 0.0,
        measure,
        family_value,
        required_value,
        decision: decide(family_value, required_value),
        note: None,
        trace,
    })
}

/// δ-stochastic version: E(Σ) ≥ (1 − δ) E*_ε.
pub fn check_approx_stoch(
    desc: &FamilyDescriptor,
    accuracy: Accuracy,
    delta: f64,
    measure: Measure,
) -> Result<Verdict> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid(format!("δ = {delta} outside [0, 1]")));
    }
    gate(measure, true)?;
    let mut trace = Vec::new();
    let (epsilon, eta) = accuracy.resolve(&mut trace)?;
    let star = eps_star_lower(measure, eta, &mut trace)?;
    let required_value = (1.0 - delta) * star;
    trace.push(entry(
        "required_value",
        required_value,
        "(1 - delta) * eps_star_lower",
    ));
    let family_value = family_upper(desc, measure, &mut trace)?;
    Ok(Verdict {
        family: desc.name.clone(),
        epsilon,
        eta: Some(eta),
        delta,
        measure,
        family_value,
        required_value,
        decision: decide(family_value, required_value),
        note: None,
        trace,
    })
}

/// For a measure whose ε-supremum diverges as ε → 0, any family of bounded
/// value fails for every δ < 1.
pub fn check_unbounded_measure(
    desc: &FamilyDescriptor,
    measure: Measure,
    delta: f64,
) -> Result<Verdict> {
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("δ = {delta} outside [0, 1)")));
    }
    let a = axioms(measure);
    if !a.divergent_eps_star {
        return Err(refuse(measure, "ε-supremum is not known to diverge"));
    }
    let class = desc.scaling_class(measure);
    let mut trace = vec![
        entry(
            "required_value",
            f64::INFINITY,
            "ε-supremum diverges as ε → 0",
        ),
        entry(
            "scaling_class",
            serde_json::to_value(class)?,
            "family descriptor",
        ),
    ];
    let (family_value, note) = match class {
        ScalingClass::Constant => {
            let v = desc.known_supremum(measure).map_or(f64::MAX, |k| k.value);
            trace.push(entry("family_value", v, "bounded family"));
            (v, None)
        }
        ScalingClass::Unknown => (f64::INFINITY, Some("insufficient data".to_string())),
        _ => (f64::INFINITY, None),
    };
    Ok(Verdict {
        family: desc.name.clone(),
        epsilon: None,
        eta: None,
        delta,
        measure,
        family_value,
        required_value: f64::INFINITY,
        decision: decide(family_value, f64::INFINITY),
        note,
        trace,
    })
}

/// Growth class of the 2D-cluster lower bound f_ε(N) for a measure.
/// Overridable; the default for χ_wd is 2^{Θ(√N)}.
pub fn default_f_eps_class(measure: Measure) -> ScalingClass {
    match measure {
        Measure::SchmidtRankWidth => ScalingClass::Exponential,
        _ => ScalingClass::Unknown,
    }
}

/// A family whose measure grows no faster than log f_ε(N) cannot be an
/// efficient resource. Classes are compared by rank; family_value and
/// required_value carry those ranks.
pub fn check_efficiency(
    desc: &FamilyDescriptor,
    measure: Measure,
    f_eps: ScalingClass,
) -> Result<Verdict> {
    gate(measure, true)?;
    let class = desc.scaling_class(measure);
    let target = f_eps.log_of();
    let mut trace = vec![
        entry(
            "family_class",
            serde_json::to_value(class)?,
            "family descriptor",
        ),
        entry(
            "f_eps_class",
            serde_json::to_value(f_eps)?,
            "f_eps descriptor",
        ),
        entry(
            "log_f_eps_class",
            serde_json::to_value(target)?,
            "class of log f_eps",
        ),
    ];
    let (family_value, required_value, note) = match (class.rank(), target.rank()) {
        (Some(a), Some(b)) => (a as f64, b as f64 + 1.0, None),
        _ => (
            f64::INFINITY,
            f64::INFINITY,
            Some("insufficient data".to_string()),
        ),
    };
    trace.push(entry(
        "rule",
        "ruled out iff family class <= class of log f_eps",
        "class order",
    ));
    Ok(Verdict {
        family: desc.name.clone(),
        epsilon: None,
        eta: None,
        delta: 0.0,
        measure,
        family_value,
        required_value,
        decision: decide(family_value, required_value),
        note,
        trace,
    })
}

/// Smaller root of 1 − 4η^{1/3} + 3.4η^{2/3} = 1 − 1/e, by bisection.
pub fn w_threshold_eta() -> f64 {
    let target = 1.0 - (-1.0f64).exp();
    // the expression decreases up to its vertex at η^{1/3} = 4/6.8
    let vertex = (4.0f64 / 6.8).powi(3);
    let g = |eta: f64| star_lower_raw(eta) - target;
    let (mut lo, mut hi) = (0.0f64, vertex.min(ETA_VALIDITY));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-18 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub eps: f64,
    pub delta: f64,
    pub mu: f64,
    pub distance: DistanceKind,
    /// η(ε + δ + μ)
    pub required: f64,
    /// (ε′, δ′) with δ′ the smallest admissible value at ε′.
    pub points: Vec<(f64, f64)>,
}

/// Admissible (ε′, δ′) for a resource perturbed by μ: δ′ η(ε′) ≥ η(ε + δ + μ).
pub fn stability_frontier(
    eps: f64,
    delta: f64,
    mu: f64,
    distance: DistanceKind,
    points: usize,
) -> Result<Frontier> {
    if eps < 0.0 || delta < 0.0 || mu < 0.0 {
        return Err(invalid("ε, δ and μ must be nonnegative"));
    }
    if eps + delta >= 1.0 {
        return Err(invalid(format!(
            "hypothesis δ + ε < 1 violated: {}",
            eps + delta
        )));
    }
    if mu > 1.0 - delta - eps {
        return Err(invalid(format!(
            "hypothesis μ ≤ 1 − δ − ε violated: μ = {mu} > {}",
            1.0 - delta - eps
        )));
    }
    if points < 2 {
        return Err(invalid("frontier needs at least two points"));
    }
    let map = EtaMap::new(distance);
    let s = eps + delta + mu;
    let required = map.eta(s)?;
    let hi = map.max_eps();
    let lo = if s > 0.0 { s } else { 1e-3 };
    let grid = (0..points).map(|i| {
        let t = i as f64 / (points - 1) as f64;
        (lo.ln() + (hi.ln() - lo.ln()) * t).exp().min(hi)
    });
    let points = grid
        .map(|e| Ok((e, (required / map.eta(e)?).min(1.0))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Frontier {
        eps,
        delta,
        mu,
        distance,
        required,
        points,
    })
}

/// Whether a finite-size sequence is compatible with a declared class.
/// Only coarse shape tests are possible on finite data: constant means no
/// growth beyond `tol`, any growing class means non-decreasing with some
/// growth, and the exponential class additionally requires the increments
/// not to shrink on average.
pub fn scaling_consistent(class: ScalingClass, per_size: &[(usize, f64)], tol: f64) -> bool {
    if per_size.len() < 2 {
        return true;
    }
    let first = per_size[0].1;
    let last = per_size[per_size.len() - 1].1;
    let non_decreasing = per_size.windows(2).all(|w| w[1].1 >= w[0].1 - tol);
    match class {
        ScalingClass::Unknown => true,
        ScalingClass::Constant => per_size
            .iter()
            .all(|&(_, v)| (v - first).abs() <= tol.max(1e-9) + tol * first.abs()),
        ScalingClass::Exponential => {
            let steps: Vec<f64> = per_size.windows(2).map(|w| w[1].1 - w[0].1).collect();
            let half = steps.len() / 2;
            let early: f64 = steps[..half.max(1)].iter().sum::<f64>() / half.max(1) as f64;
            let late: f64 = steps[half..].iter().sum::<f64>() / (steps.len() - half) as f64;
            non_decreasing && last > first && late >= early - tol
        }
        _ => non_decreasing && last > first,
    }
}
