use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BoundKind, MonotoneResult, Witness};
use crate::error::{invalid, Result};
use crate::qstate::{qubit_mask, Ensemble, PureState, C64};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Stop once a full sweep improves the overlap by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_sweeps: 500,
            tol: 1e-10,
            seed: 0x5EED,
        }
    }
}

impl OptimizerSettings {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid("restarts must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be > 0"));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps must be >= 1"));
        }
        Ok(())
    }
}

struct Climb {
    value: f64,
    sweeps: usize,
    converged: bool,
    locals: Vec<[C64; 2]>,
}

/// Contracts ψ against conj(φ_j) for every qubit j ≠ `skip`, leaving a
/// 2-vector over qubit `skip`.
fn contract_except(amps: &[C64], n: usize, locals: &[[C64; 2]], skip: usize) -> [C64; 2] {
    let mut buf: Vec<C64> = amps.to_vec();
    // trailing qubits first: each step halves the buffer
    for q in (skip + 1..n).rev() {
        let [a, b] = [locals[q][0].conj(), locals[q][1].conj()];
        let half = buf.len() / 2;
        for i in 0..half {
            buf[i] = a * buf[2 * i] + b * buf[2 * i + 1];
        }
        buf.truncate(half);
    }
    // then leading qubits, which are now the most significant bits
    for loc in locals.iter().take(skip) {
        let [a, b] = [loc[0].conj(), loc[1].conj()];
        let half = buf.len() / 2;
        for i in 0..half {
            buf[i] = a * buf[i] + b * buf[i + half];
        }
        buf.truncate(half);
    }
    [buf[0], buf[1]]
}

fn overlap_of(amps: &[C64], n: usize, locals: &[[C64; 2]]) -> f64 {
    let c = contract_except(amps, n, locals, n - 1);
    (locals[n - 1][0].conj() * c[0] + locals[n - 1][1].conj() * c[1]).norm_sqr()
}

fn climb(psi: &PureState, mut locals: Vec<[C64; 2]>, settings: &OptimizerSettings) -> Climb {
    let n = psi.qubits();
    let amps = psi.amplitudes();
    let mut value = overlap_of(amps, n, &locals);
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut last = value;
        for k in 0..n {
            let c = contract_except(amps, n, &locals, k);
            let norm = (c[0].norm_sqr() + c[1].norm_sqr()).sqrt();
            if norm > 0.0 {
                locals[k] = [c[0] / norm, c[1] / norm];
                last = norm * norm;
            }
        }
        let gain = last - value;
        value = last.max(value);
        if gain < settings.tol {
            converged = true;
            break;
        }
    }
    Climb {
        value: value.clamp(0.0, 1.0),
        sweeps,
        converged,
        locals,
    }
}

fn random_locals<R: Rng>(n: usize, rng: &mut R) -> Vec<[C64; 2]> {
    (0..n)
        .map(|_| {
            let v: [C64; 2] = std::array::from_fn(|_| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let s = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            [v[0] / s, v[1] / s]
        })
        .collect()
}

/// Principal eigenvector of each single-qubit reduced density matrix.
fn marginal_locals(psi: &PureState) -> Vec<[C64; 2]> {
    let n = psi.qubits();
    let amps = psi.amplitudes();
    (0..n)
        .map(|q| {
            let mask = qubit_mask(n, q);
            let (mut r00, mut r11, mut r01) = (0.0, 0.0, C64::new(0.0, 0.0));
            for i in (0..amps.len()).filter(|i| i & mask == 0) {
                let (a0, a1) = (amps[i], amps[i | mask]);
                r00 += a0.norm_sqr();
                r11 += a1.norm_sqr();
                r01 += a0 * a1.conj();
            }
            let half = 0.5 * (r00 - r11);
            let top = 0.5 * (r00 + r11) + (half * half + r01.norm_sqr()).sqrt();
            let v = [r01, C64::new(top - r00, 0.0)];
            let s = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            if s < 1e-12 {
                if r00 >= r11 {
                    [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
                } else {
                    [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
                }
            } else {
                [v[0] / s, v[1] / s]
            }
        })
        .collect()
}

/// Largest squared overlap of `psi` with a fully product state, approached from
/// below by multi-start alternating optimization.
pub fn product_overlap(psi: &PureState, settings: &OptimizerSettings) -> Result<MonotoneResult> {
    product_overlap_seeded(psi, settings, &[])
}

/// As [`product_overlap`], with extra starting points. Each sweep never lowers
/// the overlap, so the result is at least the overlap of every supplied seed.
pub fn product_overlap_seeded(
    psi: &PureState,
    settings: &OptimizerSettings,
    seeds: &[Vec<[C64; 2]>],
) -> Result<MonotoneResult> {
    settings.validate()?;
    let n = psi.qubits();
    if let Some(bad) = seeds.iter().find(|s| s.len() != n) {
        return Err(invalid(format!(
            "seed has {} local states for {n} qubits",
            bad.len()
        )));
    }
    let mut starts: Vec<Vec<[C64; 2]>> = seeds.to_vec();
    starts.push(marginal_locals(psi));
    let fixed = starts.len();
    let runs: Vec<Climb> = (0..fixed + settings.restarts - 1)
        .into_par_iter()
        .map(|i| {
            let start = if i < fixed {
                starts[i].clone()
            } else {
                random_locals(n, &mut rng::stream(settings.seed, i as u64))
            };
            climb(psi, start, settings)
        })
        .collect();
    let total_sweeps = runs.iter().map(|r| r.sweeps).sum();
    let restarts = runs.len();
    // first maximal run wins, independent of scheduling
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.value > best.value { r } else { best })
        .expect("at least one start");
    Ok(MonotoneResult {
        value: best.value,
        kind: BoundKind::LowerBound,
        method: "alternating product-state optimization".into(),
        iterations: total_sweeps,
        restarts,
        converged: best.converged,
        note: None,
        per_size: Vec::new(),
        witness: Some(Witness::Product(best.locals)),
    })
}

/// E_G = 1 − π. Since π is approached from below this is an upper bound.
pub fn geometric_measure(psi: &PureState, settings: &OptimizerSettings) -> Result<MonotoneResult> {
    let mut r = product_overlap(psi, settings)?;
    r.value = (1.0 - r.value).clamp(0.0, 1.0);
    r.kind = BoundKind::UpperBound;
    r.method = "1 - alternating product-state optimization".into();
    Ok(r)
}

/// Σ p_i E_G(ψ_i) for the given decomposition: an upper bound on the convex roof.
pub fn geometric_measure_ensemble_ub(
    rho: &Ensemble,
    settings: &OptimizerSettings,
) -> Result<MonotoneResult> {
    let mut value = 0.0;
    let mut iterations = 0;
    let mut restarts = 0;
    let mut converged = true;
    for (i, (p, s)) in rho.terms().iter().enumerate() {
        let term_settings = OptimizerSettings {
            seed: settings.seed.wrapping_add(i as u64 * 0x9E37_79B9),
            ..*settings
        };
        let r = geometric_measure(s, &term_settings)?;
        value += p * r.value;
        iterations += r.iterations;
        restarts += r.restarts;
        converged &= r.converged;
    }
    Ok(MonotoneResult {
        value: value.clamp(0.0, 1.0),
        kind: BoundKind::UpperBound,
        method: "decomposition-relative average of pure-state geometric measures".into(),
        iterations,
        restarts,
        converged,
        note: Some(format!("{} terms", rho.len())),
        per_size: Vec::new(),
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{make_ghz, make_w_state};
    use approx::assert_abs_diff_eq;

    /// Grid over Bloch angles of every qubit (real and complex phases), then
    /// refined by coordinate-wise golden search; independent of the optimizer.
    fn brute_force_overlap(psi: &PureState, steps: usize) -> f64 {
        let n = psi.qubits();
        let local = |t: f64, p: f64| {
            [
                C64::new((t / 2.0).cos(), 0.0),
                C64::from_polar((t / 2.0).sin(), p),
            ]
        };
        let eval = |angles: &[f64]| {
            let locals: Vec<[C64; 2]> = (0..n)
                .map(|q| local(angles[2 * q], angles[2 * q + 1]))
                .collect();
            let prod = PureState::product(&locals).unwrap();
            psi.overlap(&prod)
        };
        let mut best = (0.0, vec![0.0; 2 * n]);
        let total = steps.pow(2 * n as u32);
        for idx in 0..total {
            let mut k = idx;
            let mut angles = vec![0.0; 2 * n];
            for a in angles.iter_mut().enumerate() {
                let range = if a.0 % 2 == 0 {
                    std::f64::consts::PI
                } else {
                    2.0 * std::f64::consts::PI
                };
                *a.1 = range * (k % steps) as f64 / steps as f64;
                k /= steps;
            }
            let v = eval(&angles);
            if v > best.0 {
                best = (v, angles);
            }
        }
        let (mut value, mut angles) = best;
        let mut h = std::f64::consts::PI / steps as f64;
        while h > 1e-9 {
            let mut improved = false;
            for i in 0..2 * n {
                for dir in [-1.0, 1.0] {
                    let mut trial = angles.clone();
                    trial[i] += dir * h;
                    let v = eval(&trial);
                    if v > value {
                        value = v;
                        angles = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        value
    }

    #[test]
    fn brute_force_oracle_values() {
        let w3 = brute_force_overlap(&make_w_state(3).unwrap(), 8);
        assert_abs_diff_eq!(w3, 4.0 / 9.0, epsilon = 1e-8);
        let g3 = brute_force_overlap(&make_ghz(3).unwrap(), 8);
        assert_abs_diff_eq!(g3, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn optimizer_matches_frozen_oracles() {
        let s = OptimizerSettings::default();
        let w3 = product_overlap(&make_w_state(3).unwrap(), &s).unwrap();
        assert_abs_diff_eq!(w3.value, 4.0 / 9.0, epsilon = 1e-8);
        assert_eq!(w3.kind, BoundKind::LowerBound);
        for n in 3..=6 {
            let g = product_overlap(&make_ghz(n).unwrap(), &s).unwrap();
            assert_abs_diff_eq!(g.value, 0.5, epsilon = 1e-8);
        }
        let eg = geometric_measure(&make_w_state(3).unwrap(), &s).unwrap();
        assert_abs_diff_eq!(eg.value, 5.0 / 9.0, epsilon = 1e-8);
        assert_eq!(eg.kind, BoundKind::UpperBound);
        let eg4 = geometric_measure(&make_ghz(4).unwrap(), &s).unwrap();
        assert_abs_diff_eq!(eg4.value, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn product_states_have_unit_overlap() {
        let mut r = rng::stream(3, 0);
        for n in 1..=5 {
            let locals = random_locals(n, &mut r);
            let psi = PureState::product(&locals).unwrap();
            let v = product_overlap(&psi, &OptimizerSettings::default()).unwrap();
            assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn contraction_matches_direct_sum() {
        let mut r = rng::stream(9, 0);
        let psi = PureState::random(4, &mut r).unwrap();
        let locals = random_locals(4, &mut r);
        let prod = PureState::product(&locals).unwrap();
        assert_abs_diff_eq!(
            overlap_of(psi.amplitudes(), 4, &locals),
            psi.overlap(&prod),
            epsilon = 1e-13
        );
    }

    #[test]
    fn settings_are_validated() {
        let psi = make_ghz(3).unwrap();
        let bad = OptimizerSettings {
            restarts: 0,
            ..Default::default()
        };
        assert!(product_overlap(&psi, &bad).is_err());
        let bad = OptimizerSettings {
            tol: 0.0,
            ..Default::default()
        };
        assert!(product_overlap(&psi, &bad).is_err());
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let psi = make_w_state(8).unwrap();
        let s = OptimizerSettings {
            max_sweeps: 1,
            restarts: 2,
            tol: 1e-300,
            ..Default::default()
        };
        let r = product_overlap(&psi, &s).unwrap();
        assert!(!r.converged);
        assert!(r.value > 0.0 && r.value <= 1.0);
    }

    #[test]
    fn ensemble_upper_bound() {
        let s = OptimizerSettings::default();
        let w = make_w_state(3).unwrap();
        let single = geometric_measure_ensemble_ub(&Ensemble::pure(w.clone()), &s).unwrap();
        assert_abs_diff_eq!(
            single.value,
            geometric_measure(&w, &s).unwrap().value,
            epsilon = 1e-10
        );
        let mix = Ensemble::new(vec![
            (0.5, PureState::basis(3, 0).unwrap()),
            (0.5, PureState::basis(3, 7).unwrap()),
        ])
        .unwrap();
        assert_abs_diff_eq!(
            geometric_measure_ensemble_ub(&mix, &s).unwrap().value,
            0.0,
            epsilon = 1e-10
        );
    }
}
