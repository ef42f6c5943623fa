//! Single-qubit measurement protocols with classical feedforward, executed
//! exhaustively as branch trees on dense states.
//!
//! Feedforward is kept as a Pauli frame: before measuring step k a Pauli
//! chosen by the earlier outcomes is applied to the measured qubit, and at
//! read-out a Pauli string chosen by the full record is applied to the
//! outputs. Measured qubits are removed from the residual states.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{stability_frontier, Frontier};
use crate::epsilon::{DistanceKind, EtaMap};
use crate::error::{capacity, invalid, Result};
use crate::qstate::{
    fidelity, make_graph_state_with, qubit_mask, trace_distance, DensityOperator, Ensemble, Graph,
    PureState, C64,
};
use crate::rng::stream;
use crate::Limits;

/// Probabilities below this are treated as zero and pruned.
pub const ZERO_BRANCH: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            _ => Err(invalid(format!("unknown Pauli {c:?}"))),
        }
    }

    pub fn from_frame(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

fn parse_pauli_string(s: &str) -> Result<Vec<Pauli>> {
    s.chars().map(Pauli::from_char).collect()
}

fn pauli_string(p: &[Pauli]) -> String {
    p.iter().map(|q| q.to_char()).collect()
}

fn is_bits(s: &str) -> bool {
    s.bytes().all(|b| b == b'0' || b == b'1')
}

/// Measurement of one qubit in the basis
/// b₀ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩, b₁ = sin(θ/2)|0⟩ − e^{iφ} cos(θ/2)|1⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureStep {
    pub qubit: usize,
    pub theta: f64,
    pub phi: f64,
    /// Prior-outcome record (one bit per earlier step) → Pauli applied
    /// before measuring. Missing records mean no correction.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ff: BTreeMap<String, Pauli>,
}

impl MeasureStep {
    pub fn new(qubit: usize, theta: f64, phi: f64) -> Self {
        Self {
            qubit,
            theta,
            phi,
            ff: BTreeMap::new(),
        }
    }

    pub fn equatorial(qubit: usize, phi: f64) -> Self {
        Self::new(qubit, PI / 2.0, phi)
    }

    pub fn computational(qubit: usize) -> Self {
        Self::new(qubit, 0.0, 0.0)
    }

    /// The two basis vectors.
    pub fn basis(&self) -> [[C64; 2]; 2] {
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        let e = C64::from_polar(1.0, self.phi);
        [[C64::new(c, 0.0), e * s], [C64::new(s, 0.0), -e * c]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub steps: Vec<MeasureStep>,
    pub outputs: Vec<usize>,
    /// Full outcome record → Pauli string over the outputs, applied at read-out.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub corrections: BTreeMap<String, String>,
}

impl Protocol {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for (k, step) in self.steps.iter().enumerate() {
            if step.qubit >= n {
                return Err(invalid(format!(
                    "step {k} measures qubit {} of {n}",
                    step.qubit
                )));
            }
            if std::mem::replace(&mut seen[step.qubit], true) {
                return Err(invalid(format!("qubit {} measured twice", step.qubit)));
            }
            if !step.theta.is_finite() || !step.phi.is_finite() {
                return Err(invalid(format!("step {k} has a non-finite angle")));
            }
            let b = step.basis();
            let ip = b[0][0].conj() * b[1][0] + b[0][1].conj() * b[1][1];
            if ip.norm() > 1e-12 {
                return Err(invalid(format!("step {k} basis not orthonormal")));
            }
            for key in step.ff.keys() {
                if key.len() != k || !is_bits(key) {
                    return Err(invalid(format!(
                        "step {k} feedforward key {key:?} must be a record of the {k} earlier outcomes"
                    )));
                }
            }
        }
        let unmeasured: Vec<usize> = (0..n).filter(|&q| !seen[q]).collect();
        if self.outputs != unmeasured {
            return Err(invalid(format!(
                "outputs {:?} must list the unmeasured qubits {:?} in ascending order",
                self.outputs, unmeasured
            )));
        }
        for (key, val) in &self.corrections {
            if key.len() != self.steps.len() || !is_bits(key) {
                return Err(invalid(format!(
                    "correction key {key:?} is not a full outcome record"
                )));
            }
            if parse_pauli_string(val)?.len() != self.outputs.len() {
                return Err(invalid(format!(
                    "correction {val:?} does not cover the {} outputs",
                    self.outputs.len()
                )));
            }
        }
        Ok(())
    }

    fn correction_for(&self, bits: &str) -> Result<Vec<Pauli>> {
        match self.corrections.get(bits) {
            Some(s) => parse_pauli_string(s),
            None => Ok(vec![Pauli::I; self.outputs.len()]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchLeaf {
    pub outcomes: String,
    pub probability: f64,
    /// Corrected state of the outputs; absent when every qubit was measured.
    pub residual: Option<Ensemble>,
    pub correction: String,
}

impl BranchLeaf {
    /// The residual as a pure state, when it has a single term.
    pub fn residual_pure(&self) -> Option<&PureState> {
        match &self.residual {
            Some(e) if e.len() == 1 => Some(&e.terms()[0].1),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchTree {
    pub leaves: Vec<BranchLeaf>,
    /// Outcome records whose probability vanished.
    pub pruned: Vec<String>,
}

impl BranchTree {
    pub fn total_probability(&self) -> f64 {
        self.leaves.iter().map(|l| l.probability).sum()
    }

    pub fn leaf(&self, outcomes: &str) -> Option<&BranchLeaf> {
        self.leaves.iter().find(|l| l.outcomes == outcomes)
    }

    /// Σ_k p_k ρ_k with the outcome record discarded.
    pub fn merged_output(&self) -> Result<Ensemble> {
        let mut terms = Vec::new();
        for leaf in &self.leaves {
            let Some(res) = &leaf.residual else {
                return Err(invalid("protocol has no output qubits"));
            };
            terms.extend(
                res.terms()
                    .iter()
                    .map(|(w, s)| (leaf.probability * w, s.clone())),
            );
        }
        Ensemble::from_weights(terms)
    }
}

/// Projects `qubit` onto ⟨b| and removes it; returns the unnormalized rest.
fn project_out(amps: &[C64], n: usize, qubit: usize, b: &[C64; 2]) -> Vec<C64> {
    let mask = qubit_mask(n, qubit);
    let low = mask - 1;
    let mut out = vec![C64::new(0.0, 0.0); amps.len() / 2];
    for (r, slot) in out.iter_mut().enumerate() {
        let i0 = ((r & !low) << 1) | (r & low);
        *slot = b[0].conj() * amps[i0] + b[1].conj() * amps[i0 | mask];
    }
    out
}

fn apply_pauli(amps: &mut [C64], n: usize, qubit: usize, p: Pauli) {
    if p == Pauli::I {
        return;
    }
    let m = p.matrix();
    let mask = qubit_mask(n, qubit);
    for i in 0..amps.len() {
        if i & mask == 0 {
            let (a0, a1) = (amps[i], amps[i | mask]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

struct RawLeaf {
    bits: String,
    probability: f64,
    state: Option<PureState>,
    correction: Vec<Pauli>,
}

fn run_pure(psi: &PureState, protocol: &Protocol) -> Result<(Vec<RawLeaf>, Vec<String>)> {
    let mut leaves = Vec::new();
    let mut pruned = Vec::new();
    // (record, positions of remaining original qubits, unnormalized amplitudes)
    let mut stack = vec![(
        String::new(),
        (0..psi.qubits()).collect::<Vec<_>>(),
        psi.amplitudes().to_vec(),
    )];
    while let Some((bits, alive, mut amps)) = stack.pop() {
        let k = bits.len();
        if k == protocol.steps.len() {
            let probability: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let correction = protocol.correction_for(&bits)?;
            let state = if alive.is_empty() {
                None
            } else {
                let n = alive.len();
                for (pos, &p) in correction.iter().enumerate() {
                    apply_pauli(&mut amps, n, pos, p);
                }
                Some(PureState::from_unnormalized(n, amps)?)
            };
            leaves.push(RawLeaf {
                bits,
                probability,
                state,
                correction,
            });
            continue;
        }
        let step = &protocol.steps[k];
        let n = alive.len();
        let pos = alive
            .iter()
            .position(|&q| q == step.qubit)
            .expect("validated protocol");
        if let Some(&p) = step.ff.get(&bits) {
            apply_pauli(&mut amps, n, pos, p);
        }
        let basis = step.basis();
        let mut rest = alive.clone();
        rest.remove(pos);
        for s in (0..2).rev() {
            let child = project_out(&amps, n, pos, &basis[s]);
            let rec = format!("{bits}{s}");
            if child.iter().map(|a| a.norm_sqr()).sum::<f64>() < ZERO_BRANCH {
                pruned.push(rec);
            } else {
                stack.push((rec, rest.clone(), child));
            }
        }
    }
    leaves.sort_by(|a, b| a.bits.cmp(&b.bits));
    Ok((leaves, pruned))
}

type MergedLeaf = (f64, Vec<(f64, PureState)>, Vec<Pauli>, bool);

pub fn run_protocol<A: DensityOperator + ?Sized>(
    state: &A,
    protocol: &Protocol,
) -> Result<BranchTree> {
    run_protocol_with(state, protocol, &Limits::default())
}

/// Runs the protocol on every pure term and merges branches by outcome record.
pub fn run_protocol_with<A: DensityOperator + ?Sized>(
    state: &A,
    protocol: &Protocol,
    limits: &Limits,
) -> Result<BranchTree> {
    let n = state.qubits();
    if n > limits.dense_qubits {
        return Err(capacity(format!(
            "{n} qubits exceed the dense limit {}",
            limits.dense_qubits
        )));
    }
    protocol.validate(n)?;
    let m = protocol.steps.len();
    if m >= usize::BITS as usize - 1 || (1usize << m) > limits.branches {
        return Err(capacity(format!(
            "2^{m} branches exceed the cap {}",
            limits.branches
        )));
    }
    let terms = state.weighted_terms();
    let runs = terms
        .par_iter()
        .map(|(w, psi)| run_pure(psi, protocol).map(|r| (*w, r)))
        .collect::<Result<Vec<_>>>()?;

    // outcome bits → (probability, weighted residuals, correction, fully measured)
    let mut merged: BTreeMap<String, MergedLeaf> = BTreeMap::new();
    let mut pruned = Vec::new();
    for (w, (leaves, zero)) in runs {
        pruned.extend(zero);
        for leaf in leaves {
            let entry =
                merged
                    .entry(leaf.bits)
                    .or_insert((0.0, Vec::new(), leaf.correction, false));
            let weight = w * leaf.probability;
            entry.0 += weight;
            match leaf.state {
                Some(s) => entry.1.push((weight, s)),
                None => entry.3 = true,
            }
        }
    }
    let mut leaves = Vec::with_capacity(merged.len());
    for (bits, (p, terms, corr, empty)) in merged {
        let residual = if empty {
            None
        } else {
            Some(Ensemble::from_weights(terms)?)
        };
        leaves.push(BranchLeaf {
            outcomes: bits,
            probability: p,
            residual,
            correction: pauli_string(&corr),
        });
    }
    pruned.sort();
    pruned.dedup();
    pruned.retain(|b| !leaves.iter().any(|l| l.outcomes == *b));
    Ok(BranchTree { leaves, pruned })
}

type Mat2 = [[C64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// H·diag(1, e^{−iφ}): the map one equatorial measurement at angle φ
/// teleports onto the next qubit of a chain.
pub fn chain_step_unitary(phi: f64) -> Mat2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let e = C64::from_polar(FRAC_1_SQRT_2, -phi);
    [[h, e], [h, -e]]
}

/// Product of the chain-step maps in measurement order.
pub fn chain_unitary(angles: &[f64]) -> Mat2 {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    angles.iter().fold([[one, zero], [zero, one]], |acc, &phi| {
        mat_mul(&chain_step_unitary(phi), &acc)
    })
}

fn plus_state() -> PureState {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    PureState::product(&[[h, h]]).expect("valid state")
}

/// Protocol on a graph state: computational-basis measurements on `deleted`
/// (in order), then equatorial measurements along `path` with the given
/// angles. The last path vertex is the output and must be the only vertex
/// left. The target is the chain unitary applied to |+⟩.
pub fn path_protocol(
    graph: &Graph,
    deleted: &[usize],
    path: &[usize],
    angles: &[f64],
) -> Result<(Protocol, PureState)> {
    let n = graph.num_vertices();
    if path.len() != angles.len() + 1 {
        return Err(invalid("a path of m+1 vertices needs m angles"));
    }
    if deleted.len() + path.len() != n {
        return Err(invalid("deleted and path vertices must cover the graph"));
    }
    for w in path.windows(2) {
        if !graph.has_edge(w[0], w[1]) {
            return Err(invalid(format!(
                "path step {}-{} is not an edge",
                w[0], w[1]
            )));
        }
    }
    // the path must be induced once the deleted vertices are gone
    for (i, &u) in path.iter().enumerate() {
        for &v in path.iter().skip(i + 2) {
            if graph.has_edge(u, v) {
                return Err(invalid(format!(
                    "path vertices {u} and {v} are joined by a chord"
                )));
            }
        }
    }
    let output = *path.last().expect("nonempty path");
    let measured = deleted.len() + angles.len();
    let mut steps: Vec<MeasureStep> = deleted
        .iter()
        .map(|&q| MeasureStep::computational(q))
        .collect();
    steps.extend(
        path[..angles.len()]
            .iter()
            .zip(angles)
            .map(|(&q, &phi)| MeasureStep::equatorial(q, phi)),
    );
    let mut corrections = BTreeMap::new();

    for record in 0..(1usize << measured) {
        let bit = |k: usize| (record >> (measured - 1 - k)) & 1 == 1;
        let bits: String = (0..measured)
            .map(|k| if bit(k) { '1' } else { '0' })
            .collect();
        // Z byproducts from the computational-basis deletions
        let deleted_z = |v: usize| {
            deleted
                .iter()
                .enumerate()
                .filter(|&(_, &d)| graph.has_edge(d, v))
                .fold(false, |acc, (k, _)| acc ^ bit(k))
        };
        let (mut x, mut z) = (false, deleted_z(path[0]));
        for j in 0..angles.len() {
            let k = deleted.len() + j;
            if x {
                steps[k].ff.insert(bits[..k].to_string(), Pauli::X);
            }
            let s = bit(k);
            (x, z) = (s ^ z, x);
            z ^= deleted_z(path[j + 1]);
        }
        let c = Pauli::from_frame(x, z);
        if c != Pauli::I {
            corrections.insert(bits, c.to_char().to_string());
        }
    }
    let u = chain_unitary(angles);
    let target = plus_state().apply_local(0, &u)?;
    Ok((
        Protocol {
            steps,
            outputs: vec![output],
            corrections,
        },
        target,
    ))
}

/// Chain protocol on the m-qubit 1D cluster, output on the last qubit.
pub fn chain_protocol(angles: &[f64]) -> Result<(Graph, Protocol, PureState)> {
    let g = Graph::path(angles.len() + 1);
    let path: Vec<usize> = (0..=angles.len()).collect();
    let (p, t) = path_protocol(&g, &[], &path, angles)?;
    Ok((g, p, t))
}

/// 2×2 cluster: vertex 2 removed by a computational-basis measurement, then
/// the chain 0 → 1 → 3.
pub fn grid_protocol(angles: [f64; 2]) -> Result<(Graph, Protocol, PureState)> {
    let g = Graph::grid(2, 2);
    let (p, t) = path_protocol(&g, &[2], &[0, 1, 3], &angles)?;
    Ok((g, p, t))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    pub graph: Graph,
    pub protocol: Protocol,
    pub target: PureState,
    pub unitary: Mat2,
}

/// Single-qubit rotation on the 5-qubit chain: four equatorial
/// measurements at angles (0, α, β, γ), output on the last qubit.
pub fn one_way_rotation(angles: [f64; 3]) -> Result<Rotation> {
    let all = [0.0, angles[0], angles[1], angles[2]];
    let (graph, protocol, target) = chain_protocol(&all)?;
    Ok(Rotation {
        graph,
        protocol,
        target,
        unitary: chain_unitary(&all),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseModel {
    /// σ_z on one qubit.
    SingleFlip { qubit: usize },
    /// Weighted Z patterns (qubit lists); weights are renormalized.
    Patterns { patterns: Vec<(f64, Vec<usize>)> },
}

impl NoiseModel {
    fn components(&self, n: usize) -> Result<Vec<(f64, usize)>> {
        let mask_of = |qs: &[usize]| -> Result<usize> {
            qs.iter().try_fold(0usize, |m, &q| {
                if q >= n {
                    Err(invalid(format!("noise qubit {q} out of range")))
                } else {
                    Ok(m | qubit_mask(n, q))
                }
            })
        };
        match self {
            NoiseModel::SingleFlip { qubit } => Ok(vec![(1.0, mask_of(&[*qubit])?)]),
            NoiseModel::Patterns { patterns } => {
                let total: f64 = patterns.iter().map(|p| p.0).sum();
                if patterns.is_empty() || !(total > 0.0) || patterns.iter().any(|p| p.0 < 0.0) {
                    return Err(invalid(
                        "noise patterns need nonnegative weights with positive sum",
                    ));
                }
                patterns
                    .iter()
                    .map(|(w, qs)| Ok((w / total, mask_of(qs)?)))
                    .collect()
            }
        }
    }

    /// Random weights over `count` random nonempty Z patterns.
    pub fn random_patterns<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Self {
        let patterns = (0..count)
            .map(|_| {
                let mask: usize = rng.random_range(1..(1usize << n));
                let qs = (0..n).filter(|&q| mask & qubit_mask(n, q) != 0).collect();
                (rng.random::<f64>() + 1e-3, qs)
            })
            .collect();
        NoiseModel::Patterns { patterns }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDistance {
    pub outcomes: String,
    pub probability: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyClusterReport {
    pub p: f64,
    pub branches: Vec<BranchDistance>,
    pub max_distance: f64,
    pub bound: f64,
    pub probabilities_match: bool,
    /// F(Σ p_k ρ_k, target)
    pub averaged_fidelity: f64,
    pub pass: bool,
}

/// Target of a protocol: the common corrected output of every branch on `psi`.
pub fn protocol_target(psi: &PureState, protocol: &Protocol) -> Result<PureState> {
    let tree = run_protocol(psi, protocol)?;
    let first = tree.leaves.first().and_then(|l| l.residual_pure()).cloned();
    let Some(first) = first else {
        return Err(invalid("protocol has no output qubits"));
    };
    for leaf in &tree.leaves {
        let r = leaf
            .residual_pure()
            .ok_or_else(|| invalid("branch output is not pure"))?;
        if r.overlap(&first) < 1.0 - 1e-9 {
            return Err(invalid(format!(
                "protocol/target mismatch: branch {} differs",
                leaf.outcomes
            )));
        }
    }
    Ok(first)
}

/// Graph state mixed with Z-flipped copies, (1−p)|C⟩⟨C| + p Σ λ_k Z^k|C⟩⟨C|Z^k,
/// run through a protocol that is exact on |C⟩.
pub fn noisy_cluster_experiment(
    graph: &Graph,
    noise: &NoiseModel,
    p: f64,
    protocol: &Protocol,
) -> Result<NoisyClusterReport> {
    if !(0.0..1.0).contains(&p) {
        return Err(invalid(format!("p = {p} outside [0, 1)")));
    }
    let c = make_graph_state_with(graph, &Limits::default())?;
    let n = c.qubits();
    let target = protocol_target(&c, protocol)?;
    let parts = noise.components(n)?;
    let mut terms = vec![(1.0 - p, c.clone())];
    terms.extend(
        parts
            .iter()
            .map(|&(w, mask)| (p * w, c.apply_z_pattern(mask))),
    );
    let rho = Ensemble::from_weights(terms.clone())?;
    let tree = run_protocol(&rho, protocol)?;

    let reference = run_protocol(&c, protocol)?;
    let mut probabilities_match = true;
    for (_, s) in &terms {
        let t = run_protocol(s, protocol)?;
        probabilities_match &= t.leaves.len() == reference.leaves.len()
            && t.leaves.iter().zip(&reference.leaves).all(|(a, b)| {
                a.outcomes == b.outcomes && (a.probability - b.probability).abs() < 1e-12
            });
    }
    let branches = tree
        .leaves
        .iter()
        .map(|leaf| {
            let res = leaf
                .residual
                .as_ref()
                .ok_or_else(|| invalid("protocol has no output qubits"))?;
            Ok(BranchDistance {
                outcomes: leaf.outcomes.clone(),
                probability: leaf.probability,
                distance: trace_distance(res, &target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_distance = branches.iter().map(|b| b.distance).fold(0.0, f64::max);
    let averaged_fidelity = fidelity(&tree.merged_output()?, &target)?;
    Ok(NoisyClusterReport {
        p,
        max_distance,
        bound: p,
        probabilities_match,
        averaged_fidelity,
        pass: max_distance <= p + 1e-9 && probabilities_match,
        branches,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub bound: f64,
    pub pass: bool,
}

/// F(Σ p_i ρ_i, target) against (1−ε)(1−δ).
pub fn averaged_fidelity_check(
    tree: &BranchTree,
    target: &PureState,
    eps: f64,
    delta: f64,
) -> Result<FidelityReport> {
    let f = fidelity(&tree.merged_output()?, target)?;
    let bound = (1.0 - eps) * (1.0 - delta);
    Ok(FidelityReport {
        fidelity: f,
        bound,
        pass: f >= bound - 1e-9,
    })
}

/// (1−q)|ψ⟩⟨ψ| + q|φ⟩⟨φ| at trace distance exactly μ from ψ.
pub fn perturb_towards(psi: &PureState, phi: &PureState, mu: f64) -> Result<Ensemble> {
    let gap = (1.0 - psi.overlap(phi)).max(0.0).sqrt();
    if !(gap > 1e-12) {
        return Err(invalid("perturbing state coincides with the base state"));
    }
    let q = mu / gap;
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!(
            "μ = {mu} not reachable towards this state"
        )));
    }
    Ensemble::new(vec![(1.0 - q, psi.clone()), (q, phi.clone())])
}

/// (1−q)|ψ⟩⟨ψ| + q·I/2ⁿ at trace distance exactly μ from ψ, with the
/// maximally mixed part written over the computational basis.
pub fn depolarize_by_mixing(psi: &PureState, mu: f64) -> Result<Ensemble> {
    let n = psi.qubits();
    let d = (1usize << n) as f64;
    let q = mu / (1.0 - 1.0 / d);
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!(
            "μ = {mu} too large for depolarizing {n} qubits"
        )));
    }
    let mut terms = vec![(1.0 - q, psi.clone())];
    for i in 0..(1usize << n) {
        terms.push((q / d, PureState::basis(n, i)?));
    }
    Ensemble::new(terms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Measured D(base, perturbed).
    pub mu: f64,
    pub eps: f64,
    pub delta: f64,
    /// D(ρ̃_A, target) of the merged perturbed output.
    pub output_distance: f64,
    pub distance_bound: f64,
    pub measured_fidelity: f64,
    pub fidelity_bound: f64,
    pub frontier: Frontier,
    pub pass: bool,
}

/// Runs the protocol designed for `base` on `perturbed` and checks the
/// output against the degraded accuracy μ + ε + δ.
pub fn stability_experiment<A, B>(
    base: &A,
    perturbed: &B,
    protocol: &Protocol,
    target: &PureState,
    eps: f64,
    delta: f64,
    distance: DistanceKind,
) -> Result<StabilityReport>
where
    A: DensityOperator + ?Sized,
    B: DensityOperator + ?Sized,
{
    let mu = trace_distance(base, perturbed)?;
    if eps < 0.0 || delta < 0.0 {
        return Err(invalid("ε and δ must be nonnegative"));
    }
    if mu > 1.0 - delta - eps + 1e-12 {
        return Err(invalid(format!(
            "hypothesis μ ≤ 1 − δ − ε violated: μ = {mu}"
        )));
    }
    let mu = mu.min(1.0 - delta - eps);
    let tree = run_protocol(perturbed, protocol)?;
    let out = tree.merged_output()?;
    let output_distance = trace_distance(&out, target)?;
    let measured_fidelity = fidelity(&out, target)?;
    let s = mu + eps + delta;
    let fidelity_bound = 1.0 - EtaMap::new(DistanceKind::Trace).eta(s.min(1.0))?;
    let frontier = stability_frontier(eps, delta, mu, distance, 25)?;
    Ok(StabilityReport {
        mu,
        eps,
        delta,
        output_distance,
        distance_bound: s,
        measured_fidelity,
        fidelity_bound,
        pass: output_distance <= s + 1e-9 && measured_fidelity >= fidelity_bound - 1e-9,
        frontier,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySweep {
    pub mu: f64,
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    pub max_excess: f64,
    pub reports: Vec<StabilityReport>,
}

/// Exact chain protocol on the n-qubit 1D cluster against `trials`
/// perturbations at distance μ: trial 0 depolarizes, the others mix in a
/// random state.
pub fn stability_sweep(
    n: usize,
    mu: f64,
    eps: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<StabilitySweep> {
    if n < 2 {
        return Err(invalid("the chain needs at least two qubits"));
    }
    let angles: Vec<f64> = {
        let mut rng = stream(seed, u64::MAX);
        (0..n - 1)
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect()
    };
    let (graph, protocol, target) = chain_protocol(&angles)?;
    let base = make_graph_state_with(&graph, &Limits::default())?;
    let reports = (0..trials)
        .into_par_iter()
        .map(|t| {
            let perturbed = if t == 0 {
                depolarize_by_mixing(&base, mu)?
            } else {
                let mut rng = stream(seed, t as u64);
                loop {
                    let phi = PureState::random(n, &mut rng)?;
                    if let Ok(e) = perturb_towards(&base, &phi, mu) {
                        break e;
                    }
                }
            };
            stability_experiment(
                &base,
                &perturbed,
                &protocol,
                &target,
                eps,
                delta,
                DistanceKind::Trace,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = reports.iter().filter(|r| !r.pass).count();
    let max_excess = reports
        .iter()
        .map(|r| r.output_distance - r.distance_bound)
        .fold(f64::MIN, f64::max);
    Ok(StabilitySweep {
        mu,
        trials,
        seed,
        violations,
        max_excess,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::make_ghz;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plus_in_computational_basis() {
        let p = Protocol {
            steps: vec![MeasureStep::computational(0)],
            outputs: vec![],
            corrections: BTreeMap::new(),
        };
        let tree = run_protocol(&plus_state(), &p).unwrap();
        assert_eq!(tree.leaves.len(), 2);
        for l in &tree.leaves {
            assert_abs_diff_eq!(l.probability, 0.5, epsilon = 1e-15);
            assert!(l.residual.is_none());
        }
    }

    #[test]
    fn bell_pair_any_basis() {
        let bell = make_ghz(2).unwrap();
        for (theta, phi) in [(0.3, 1.1), (PI / 2.0, 0.0), (2.0, -0.7)] {
            let p = Protocol {
                steps: vec![MeasureStep::new(0, theta, phi)],
                outputs: vec![1],
                corrections: BTreeMap::new(),
            };
            let tree = run_protocol(&bell, &p).unwrap();
            assert_eq!(tree.leaves.len(), 2);
            let basis = p.steps[0].basis();
            for (s, l) in tree.leaves.iter().enumerate() {
                assert_abs_diff_eq!(l.probability, 0.5, epsilon = 1e-12);
                // residual ∝ conj(b_s)
                let b = basis[s];
                let expect = PureState::product(&[[b[0].conj(), b[1].conj()]]).unwrap();
                assert_abs_diff_eq!(
                    l.residual_pure().unwrap().overlap(&expect),
                    1.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn validation_errors() {
        let n = 3;
        let mut p = Protocol {
            steps: vec![MeasureStep::computational(0), MeasureStep::computational(0)],
            outputs: vec![1, 2],
            corrections: BTreeMap::new(),
        };
        assert!(p.validate(n).is_err());
        p.steps[1].qubit = 1;
        p.outputs = vec![2];
        assert!(p.validate(n).is_ok());
        p.steps[1].ff.insert("01".into(), Pauli::X);
        assert!(p.validate(n).is_err());
        p.steps[1].ff = [("1".to_string(), Pauli::X)].into();
        assert!(p.validate(n).is_ok());
        p.outputs = vec![1, 2];
        assert!(p.validate(n).is_err());
        p.outputs = vec![2];
        p.corrections.insert("1".into(), "X".into());
        assert!(p.validate(n).is_err());
    }

    #[test]
    fn branch_cap() {
        let p = Protocol {
            steps: (0..3).map(MeasureStep::computational).collect(),
            outputs: vec![],
            corrections: BTreeMap::new(),
        };
        let limits = Limits {
            branches: 4,
            ..Limits::default()
        };
        let psi = PureState::basis(3, 0).unwrap();
        assert!(matches!(
            run_protocol_with(&psi, &p, &limits),
            Err(crate::Error::Capacity(_))
        ));
        let tree = run_protocol(&psi, &p).unwrap();
        assert_eq!(tree.leaves.len(), 1);
        assert_eq!(tree.pruned.len(), 3);
    }

    #[test]
    fn rotation_identity() {
        let r = one_way_rotation([0.0; 3]).unwrap();
        let tree = run_protocol(
            &make_graph_state_with(&r.graph, &Limits::default()).unwrap(),
            &r.protocol,
        )
        .unwrap();
        assert_eq!(tree.leaves.len(), 16);
        for l in &tree.leaves {
            assert_abs_diff_eq!(l.probability, 1.0 / 16.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                l.residual_pure().unwrap().overlap(&plus_state()),
                1.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn grid_protocol_exact() {
        let (g, p, t) = grid_protocol([0.4, -1.3]).unwrap();
        let c = make_graph_state_with(&g, &Limits::default()).unwrap();
        let tree = run_protocol(&c, &p).unwrap();
        assert_eq!(tree.leaves.len(), 8);
        for l in &tree.leaves {
            assert_abs_diff_eq!(l.probability, 0.125, epsilon = 1e-12);
            assert_abs_diff_eq!(l.residual_pure().unwrap().overlap(&t), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn perturbations_hit_mu() {
        let c = make_graph_state_with(&Graph::path(3), &Limits::default()).unwrap();
        let e = depolarize_by_mixing(&c, 0.05).unwrap();
        assert_abs_diff_eq!(trace_distance(&c, &e).unwrap(), 0.05, epsilon = 1e-10);
        let phi = PureState::basis(3, 5).unwrap();
        let e = perturb_towards(&c, &phi, 0.07).unwrap();
        assert_abs_diff_eq!(trace_distance(&c, &e).unwrap(), 0.07, epsilon = 1e-10);
    }
}
