//! ε-measure machinery for the geometric measure: the distance-to-fidelity
//! link η(ε), lower bounds on the ε-geometric measure, and executable checks
//! of the two lemmas those bounds rest on.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::monotones::{geometric_measure, OptimizerSettings};
use crate::qstate::{fidelity, Ensemble, PureState};

/// Regime boundary for the closed-form and star bounds.
pub const ETA_VALIDITY: f64 = 0.44;

/// Slack allowed for optimizer error when comparing two geometric measures.
pub const OPTIMIZER_SLACK: f64 = 2e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// ½‖ρ − σ‖₁; η(ε) = ε against pure references.
    Trace,
    /// √(2(1 − √F)); η(ε) = 1 − (1 − ε²/2)².
    Bures,
}

impl DistanceKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "trace" => Ok(DistanceKind::Trace),
            "bures" => Ok(DistanceKind::Bures),
            _ => Err(invalid(format!("unknown distance {name:?}"))),
        }
    }
}

/// Strictly increasing η with η(0) = 0 such that D ≤ ε implies F ≥ 1 − η(ε).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaMap {
    pub distance_kind: DistanceKind,
}

impl EtaMap {
    pub fn new(distance_kind: DistanceKind) -> Self {
        Self { distance_kind }
    }

    /// Largest ε in the domain.
    pub fn max_eps(&self) -> f64 {
        match self.distance_kind {
            DistanceKind::Trace => 1.0,
            DistanceKind::Bures => std::f64::consts::SQRT_2,
        }
    }

    pub fn eta(&self, eps: f64) -> Result<f64> {
        if !(0.0..=self.max_eps()).contains(&eps) {
            return Err(invalid(format!(
                "ε = {eps} outside [0, {}] for {:?} distance",
                self.max_eps(),
                self.distance_kind
            )));
        }
        Ok(match self.distance_kind {
            DistanceKind::Trace => eps,
            DistanceKind::Bures => {
                let r = 1.0 - eps * eps / 2.0;
                1.0 - r * r
            }
        })
    }
}

pub fn eta_for_trace(eps: f64) -> Result<f64> {
    EtaMap::new(DistanceKind::Trace).eta(eps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFormula {
    Variational,
    ClosedForm,
    StarLower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBound {
    pub value: f64,
    pub eta_used: f64,
    pub validity_ok: bool,
    pub formula: BoundFormula,
    /// The raw expression was negative (or had no admissible region) and was set to 0.
    pub clamped: bool,
    /// Optimal Δ for the variational bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn check_eg_eta(eg: f64, eta: f64) -> Result<()> {
    if !(eg > 0.0 && eg <= 1.0) {
        return Err(invalid(format!("E_G = {eg} outside (0, 1]")));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid(format!("η = {eta} must be > 0")));
    }
    Ok(())
}

/// (1 − η/Δ)(E_G − 3√Δ), with each factor floored at 0 so that the product
/// is only counted where it is a valid bound.
fn variational_objective(eg: f64, eta: f64, delta: f64) -> f64 {
    (1.0 - eta / delta).max(0.0) * (eg - 3.0 * delta.sqrt()).max(0.0)
}

/// Unique positive root of u³ + ηu − (2/3)E_G η = 0, the stationary point
/// (in u = √Δ) of the variational objective.
fn stationary_sqrt_delta(eg: f64, eta: f64) -> f64 {
    let p = eta;
    let q = -(2.0 / 3.0) * eg * eta;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let s = disc.sqrt();
    let mut u = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
    // polish against cancellation in the second cube root
    for _ in 0..3 {
        let f = u * u * u + p * u + q;
        let df = 3.0 * u * u + p;
        u -= f / df;
    }
    u
}

/// Log grid over Δ followed by golden-section refinement around the best node.
fn grid_maximum(eg: f64, eta: f64) -> (f64, f64) {
    const POINTS: usize = 400;
    let lo = (1e-12f64).min(eta).ln();
    let hi = 0.0f64;
    let node = |i: usize| (lo + (hi - lo) * i as f64 / (POINTS - 1) as f64).exp();
    let (best_i, _) = (0..POINTS)
        .map(|i| (i, variational_objective(eg, eta, node(i))))
        .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut a = node(best_i.saturating_sub(1));
    let mut b = node((best_i + 1).min(POINTS - 1));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |d: f64| variational_objective(eg, eta, d);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a) < 1e-16 * b.max(1e-300) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (f(x), x)
}

/// max over Δ > 0 of (1 − η/Δ)(E_G − 3√Δ).
pub fn eps_geo_variational(eg: f64, eta: f64) -> Result<EpsilonBound> {
    check_eg_eta(eg, eta)?;
    let mut out = EpsilonBound {
        value: 0.0,
        eta_used: eta,
        validity_ok: true,
        formula: BoundFormula::Variational,
        clamped: false,
        delta: None,
        warning: None,
    };
    // both factors are nonnegative only for Δ in [η, (E_G/3)²]
    if eta >= (eg / 3.0).powi(2) {
        out.clamped = true;
        return Ok(out);
    }
    let u = stationary_sqrt_delta(eg, eta);
    let closed = variational_objective(eg, eta, u * u);
    let (grid, grid_delta) = grid_maximum(eg, eta);
    if (grid - closed).abs() <= 1e-9 {
        out.value = closed;
        out.delta = Some(u * u);
    } else {
        out.value = grid.max(0.0);
        out.delta = Some(grid_delta);
        out.warning = Some(format!(
            "stationary value {closed} disagrees with grid maximum {grid}; grid value used"
        ));
    }
    Ok(out)
}

/// [1 − (3√η/(2E_G))^{2/3}][E_G − (18 E_G η)^{1/3}], clamped at 0.
pub fn eps_geo_closed_form(eg: f64, eta: f64) -> Result<EpsilonBound> {
    check_eg_eta(eg, eta)?;
    let first = 1.0 - (3.0 * eta.sqrt() / (2.0 * eg)).powf(2.0 / 3.0);
    let second = eg - (18.0 * eg * eta).cbrt();
    let clamped = first < 0.0 || second < 0.0;
    Ok(EpsilonBound {
        value: if clamped { 0.0 } else { first * second },
        eta_used: eta,
        validity_ok: eta <= ETA_VALIDITY,
        formula: BoundFormula::ClosedForm,
        clamped,
        delta: Some(((2.0 / 3.0) * eg * eta).powf(2.0 / 3.0)),
        warning: None,
    })
}

/// Unclamped 1 − 4η^{1/3} + 3.4η^{2/3}.
pub fn star_lower_raw(eta: f64) -> f64 {
    let x = eta.cbrt();
    1.0 - 4.0 * x + 3.4 * x * x
}

/// Lower bound on the supremum of the ε-geometric measure over all states.
pub fn eps_geo_star_lower(eta: f64) -> Result<EpsilonBound> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid(format!("η = {eta} must be > 0")));
    }
    let raw = star_lower_raw(eta);
    Ok(EpsilonBound {
        value: raw.max(0.0),
        eta_used: eta,
        validity_ok: eta <= ETA_VALIDITY,
        formula: BoundFormula::StarLower,
        clamped: raw < 0.0,
        delta: None,
        warning: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassConcentrationReport {
    /// 1 − ⟨ψ|ρ|ψ⟩ for the given pair.
    pub eta: f64,
    pub delta: f64,
    /// Weight of the terms with |⟨ψ_i|ψ⟩|² ≥ 1 − Δ.
    pub close_mass: f64,
    /// 1 − η/Δ
    pub required: f64,
    pub holds: bool,
}

/// For a decomposition ρ = Σ p_i |ψ_i⟩⟨ψ_i| with ⟨ψ|ρ|ψ⟩ = 1 − η, the terms
/// Δ-close to ψ carry at least 1 − η/Δ of the weight.
pub fn lemma_mass_concentration_check(
    rho: &Ensemble,
    psi: &PureState,
    delta: f64,
) -> Result<MassConcentrationReport> {
    if !(delta > 0.0) {
        return Err(invalid("Δ must be > 0"));
    }
    let eta = (1.0 - fidelity(rho, psi)?).max(0.0);
    let close_mass: f64 = rho
        .terms()
        .iter()
        .filter(|(_, s)| s.overlap(psi) >= 1.0 - delta)
        .map(|(p, _)| p)
        .sum();
    let required = 1.0 - eta / delta;
    Ok(MassConcentrationReport {
        eta,
        delta,
        close_mass,
        required,
        holds: close_mass >= required - 1e-12,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// 1 − |⟨ψ|ψ̃⟩|²
    pub eta: f64,
    pub eg_psi: f64,
    pub eg_psi_tilde: f64,
    pub difference: f64,
    /// 3√η
    pub bound: f64,
    pub holds: bool,
}

/// |E_G(ψ) − E_G(ψ̃)| ≤ 3√η, with [`OPTIMIZER_SLACK`] for the optimizer.
pub fn lemma_lipschitz_check(
    psi: &PureState,
    psi_tilde: &PureState,
    settings: &OptimizerSettings,
) -> Result<LipschitzReport> {
    if psi.qubits() != psi_tilde.qubits() {
        return Err(invalid("states have different qubit counts"));
    }
    let eta = (1.0 - psi.overlap(psi_tilde)).max(0.0);
    let a = geometric_measure(psi, settings)?.value;
    let b = geometric_measure(psi_tilde, settings)?.value;
    let difference = (a - b).abs();
    let bound = 3.0 * eta.sqrt();
    Ok(LipschitzReport {
        eta,
        eg_psi: a,
        eg_psi_tilde: b,
        difference,
        bound,
        holds: difference <= bound + OPTIMIZER_SLACK,
    })
}
