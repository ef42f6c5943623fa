#![allow(dead_code)]

use mbqc_core::qstate::{PureState, C64};
use rand::Rng;

pub fn random_unitary<R: Rng>(rng: &mut R) -> [[C64; 2]; 2] {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
    let (a, b, g): (f64, f64, f64) = (
        rng.random_range(0.0..std::f64::consts::TAU),
        rng.random_range(0.0..std::f64::consts::TAU),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let ph = C64::from_polar(1.0, a);
    [
        [
            ph * C64::from_polar(theta.cos(), b),
            -ph * C64::from_polar(theta.sin(), g),
        ],
        [
            ph * C64::from_polar(theta.sin(), -g),
            ph * C64::from_polar(theta.cos(), -b),
        ],
    ]
}

pub fn apply_random_locals<R: Rng>(psi: &PureState, rng: &mut R) -> PureState {
    (0..psi.qubits()).fold(psi.clone(), |s, q| {
        s.apply_local(q, &random_unitary(rng)).unwrap()
    })
}

/// ψ + t·χ renormalized, for a random χ.
pub fn nearby<R: Rng>(psi: &PureState, t: f64, rng: &mut R) -> PureState {
    let chi = PureState::random(psi.qubits(), rng).unwrap();
    let amps = psi
        .amplitudes()
        .iter()
        .zip(chi.amplitudes())
        .map(|(a, b)| a + b * t)
        .collect();
    PureState::from_unnormalized(psi.qubits(), amps).unwrap()
}

pub fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:>2} [{}] {title}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
