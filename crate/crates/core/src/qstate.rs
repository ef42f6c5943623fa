//! Dense pure states, finite ensembles, graphs and the two distance
//! functionals (fidelity and trace distance).
//!
//! Qubit 0 is the most significant bit of a basis index: for `n` qubits the
//! basis index `x` has qubit `q` in bit `n - 1 - q`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{capacity, invalid, Result};
use crate::Limits;

pub type C64 = Complex64;

pub const NORM_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn bit_of(index: usize, n: usize, qubit: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

#[inline]
pub(crate) fn qubit_mask(n: usize, qubit: usize) -> usize {
    1 << (n - 1 - qubit)
}

/// Normalized amplitude vector over `n` qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateFile", into = "StateFile")]
pub struct PureState {
    n: usize,
    amplitudes: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    n: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl TryFrom<StateFile> for PureState {
    type Error = crate::Error;

    fn try_from(f: StateFile) -> Result<Self> {
        let amps = f
            .amplitudes
            .iter()
            .map(|&[re, im]| C64::new(re, im))
            .collect();
        PureState::new(f.n, amps)
    }
}

impl From<PureState> for StateFile {
    fn from(s: PureState) -> Self {
        StateFile {
            n: s.n,
            amplitudes: s.amplitudes.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl PureState {
    /// Wraps `amplitudes`, which must already have unit norm.
    pub fn new(n: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a state needs at least one qubit"));
        }
        if n >= usize::BITS as usize || amplitudes.len() != 1 << n {
            return Err(invalid(format!(
                "{} amplitudes given for {} qubits",
                amplitudes.len(),
                n
            )));
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(invalid("non-finite amplitude"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("state norm² is {norm}, expected 1")));
        }
        Ok(Self { n, amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn from_unnormalized(n: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(n, amplitudes)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if n == 0 || n >= usize::BITS as usize || index >= 1 << n {
            return Err(invalid(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self {
            n,
            amplitudes: amps,
        })
    }

    /// Tensor product of single-qubit states, qubit 0 first.
    pub fn product(locals: &[[C64; 2]]) -> Result<Self> {
        if locals.is_empty() {
            return Err(invalid("empty product"));
        }
        let mut amps = vec![C64::new(1.0, 0.0)];
        for local in locals {
            let nn = local[0].norm_sqr() + local[1].norm_sqr();
            if !(nn > 0.0) {
                return Err(invalid("zero local state"));
            }
            let s = nn.sqrt();
            amps = amps
                .iter()
                .flat_map(|&a| [a * local[0] / s, a * local[1] / s])
                .collect();
        }
        Self::from_unnormalized(locals.len(), amps)
    }

    /// Haar-random state from normalized complex Gaussians.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > 24 {
            return Err(invalid(format!("random state on {n} qubits")));
        }
        let amps = (0..1usize << n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_unnormalized(n, amps)
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨self|other⟩|², clamped into [0, 1].
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr().clamp(0.0, 1.0)
    }

    /// `self ⊗ other`, with `other` occupying the trailing qubits.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let amps = self
            .amplitudes
            .iter()
            .flat_map(|&a| other.amplitudes.iter().map(move |&b| a * b))
            .collect();
        PureState {
            n: self.n + other.n,
            amplitudes: amps,
        }
    }

    /// Appends `k` qubits in |0⟩.
    pub fn extend_with_zeros(&self, k: usize) -> PureState {
        let mut amps = vec![C64::new(0.0, 0.0); self.dim() << k];
        for (i, a) in self.amplitudes.iter().enumerate() {
            amps[i << k] = *a;
        }
        PureState {
            n: self.n + k,
            amplitudes: amps,
        }
    }

    /// Applies a 2×2 matrix (row-major) to one qubit. The result is renormalized,
    /// so non-unitary filters are accepted as long as the output is nonzero.
    pub fn apply_local(&self, qubit: usize, m: &[[C64; 2]; 2]) -> Result<PureState> {
        if qubit >= self.n {
            return Err(invalid(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n
            )));
        }
        let mask = qubit_mask(self.n, qubit);
        let mut amps = self.amplitudes.clone();
        for i in 0..self.dim() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                amps[i] = m[0][0] * a0 + m[0][1] * a1;
                amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        PureState::from_unnormalized(self.n, amps)
    }

    /// Phase flip on a set of qubits given as a bitmask in basis-index convention.
    pub fn apply_z_pattern(&self, pattern: usize) -> PureState {
        let amps = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if (i & pattern).count_ones() % 2 == 1 {
                    -a
                } else {
                    a
                }
            })
            .collect();
        PureState {
            n: self.n,
            amplitudes: amps,
        }
    }

    pub fn apply_z(&self, qubit: usize) -> Result<PureState> {
        if qubit >= self.n {
            return Err(invalid(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n
            )));
        }
        Ok(self.apply_z_pattern(qubit_mask(self.n, qubit)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Finite mixture of pure states on a common number of qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    terms: Vec<(f64, PureState)>,
}

impl Ensemble {
    pub fn new(terms: Vec<(f64, PureState)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(invalid("empty ensemble"));
        };
        let n = first.qubits();
        if terms.iter().any(|(_, s)| s.qubits() != n) {
            return Err(invalid("ensemble terms have different qubit counts"));
        }
        if terms.iter().any(|(p, _)| !(*p >= 0.0) || !p.is_finite()) {
            return Err(invalid("negative or non-finite ensemble weight"));
        }
        let total: f64 = terms.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("ensemble weights sum to {total}")));
        }
        Ok(Self { terms })
    }

    /// Renormalizes the weights before validating.
    pub fn from_weights(mut terms: Vec<(f64, PureState)>) -> Result<Self> {
        let total: f64 = terms.iter().map(|(p, _)| p).sum();
        if !(total > 0.0) {
            return Err(invalid("ensemble weights must have a positive sum"));
        }
        terms.iter_mut().for_each(|(p, _)| *p /= total);
        Self::new(terms)
    }

    pub fn pure(state: PureState) -> Self {
        Self {
            terms: vec![(1.0, state)],
        }
    }

    pub fn terms(&self) -> &[(f64, PureState)] {
        &self.terms
    }

    pub fn qubits(&self) -> usize {
        self.terms[0].1.qubits()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl From<PureState> for Ensemble {
    fn from(s: PureState) -> Self {
        Ensemble::pure(s)
    }
}

/// Anything that stands for a density operator Σ p_i |ψ_i⟩⟨ψ_i|.
pub trait DensityOperator {
    fn qubits(&self) -> usize;
    fn weighted_terms(&self) -> Vec<(f64, &PureState)>;
}

impl DensityOperator for PureState {
    fn qubits(&self) -> usize {
        self.n
    }
    fn weighted_terms(&self) -> Vec<(f64, &PureState)> {
        vec![(1.0, self)]
    }
}

impl DensityOperator for Ensemble {
    fn qubits(&self) -> usize {
        Ensemble::qubits(self)
    }
    fn weighted_terms(&self) -> Vec<(f64, &PureState)> {
        self.terms.iter().map(|(p, s)| (*p, s)).collect()
    }
}

/// Simple undirected graph without self-loops.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct Graph {
    num_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    vertices: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for Graph {
    type Error = crate::Error;
    fn try_from(f: GraphFile) -> Result<Self> {
        Graph::new(f.vertices, f.edges.iter().map(|&[u, v]| (u, v)))
    }
}

impl From<Graph> for GraphFile {
    fn from(g: Graph) -> Self {
        GraphFile {
            vertices: g.num_vertices,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
        }
    }
}

impl Graph {
    pub fn new(
        num_vertices: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(invalid(format!("self-loop at vertex {u}")));
            }
            if u >= num_vertices || v >= num_vertices {
                return Err(invalid(format!(
                    "edge ({u},{v}) outside {num_vertices} vertices"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self {
            num_vertices,
            edges: set,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            num_vertices: n,
            edges: BTreeSet::new(),
        }
    }

    /// 1D chain 0 - 1 - ... - (n-1).
    pub fn path(n: usize) -> Self {
        Self {
            num_vertices: n,
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        }
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid("a cycle needs at least 3 vertices"));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// rows × cols square lattice, vertex `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = BTreeSet::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.insert((v, v + 1));
                }
                if r + 1 < rows {
                    edges.insert((v, v + cols));
                }
            }
        }
        Self {
            num_vertices: rows * cols,
            edges,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Split of the qubits into two nonempty complementary sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    n: usize,
    side_a: Vec<usize>,
}

impl Bipartition {
    pub fn new(n: usize, side_a: &[usize]) -> Result<Self> {
        let set: BTreeSet<usize> = side_a.iter().copied().collect();
        if set.len() != side_a.len() {
            return Err(invalid("repeated qubit in bipartition"));
        }
        if set.is_empty() || set.len() >= n {
            return Err(invalid("side A must be a nonempty proper subset"));
        }
        if let Some(&q) = set.iter().find(|&&q| q >= n) {
            return Err(invalid(format!("qubit {q} out of range for {n} qubits")));
        }
        Ok(Self {
            n,
            side_a: set.into_iter().collect(),
        })
    }

    /// Side A given as a bitmask over qubit labels (bit `q` = qubit `q`).
    pub fn from_label_mask(n: usize, mask: u64) -> Result<Self> {
        let side: Vec<usize> = (0..n).filter(|&q| mask >> q & 1 == 1).collect();
        if mask >> n != 0 {
            return Err(invalid("mask has bits beyond the qubit count"));
        }
        Self::new(n, &side)
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn side_a(&self) -> &[usize] {
        &self.side_a
    }

    pub fn side_b(&self) -> Vec<usize> {
        (0..self.n).filter(|q| !self.side_a.contains(q)).collect()
    }
}

fn check_dense(n: usize, limits: &Limits) -> Result<()> {
    if n > limits.dense_qubits {
        return Err(capacity(format!(
            "{n} qubits exceeds the dense limit of {}",
            limits.dense_qubits
        )));
    }
    Ok(())
}

/// (|10…0⟩ + |01…0⟩ + … + |0…01⟩)/√n
pub fn make_w_state(n: usize) -> Result<PureState> {
    if n < 2 {
        return Err(invalid("W state needs n >= 2"));
    }
    check_dense(n, &Limits::default())?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    let a = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    for q in 0..n {
        amps[qubit_mask(n, q)] = a;
    }
    PureState::from_unnormalized(n, amps)
}

/// (|0…0⟩ + |1…1⟩)/√2
pub fn make_ghz(n: usize) -> Result<PureState> {
    if n < 2 {
        return Err(invalid("GHZ state needs n >= 2"));
    }
    check_dense(n, &Limits::default())?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[0] = a;
    amps[(1 << n) - 1] = a;
    PureState::from_unnormalized(n, amps)
}

pub fn make_graph_state(g: &Graph) -> Result<PureState> {
    make_graph_state_with(g, &Limits::default())
}

/// CZ along every edge applied to |+⟩^⊗n. Amplitude at `x` is
/// 2^{-n/2} (-1)^{#edges with both endpoints set in x}.
pub fn make_graph_state_with(g: &Graph, limits: &Limits) -> Result<PureState> {
    let n = g.num_vertices();
    if n == 0 {
        return Err(invalid("graph has no vertices"));
    }
    check_dense(n, limits)?;
    let edge_masks: Vec<usize> = g
        .edges()
        .map(|(u, v)| qubit_mask(n, u) | qubit_mask(n, v))
        .collect();
    let amp = (0.5f64).powf(n as f64 / 2.0);
    let amps = (0..1usize << n)
        .map(|x| {
            let parity = edge_masks.iter().filter(|&&m| x & m == m).count() % 2;
            C64::new(if parity == 0 { amp } else { -amp }, 0.0)
        })
        .collect();
    PureState::from_unnormalized(n, amps)
}

/// diag(1, λ) on every qubit of the graph state, renormalized. λ = 0 is
/// accepted and leaves only the all-|0⟩ component.
pub fn make_deformed_cluster(g: &Graph, lambda: f64) -> Result<PureState> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("deformation λ = {lambda} outside [0, 1]")));
    }
    let base = make_graph_state(g)?;
    let n = base.qubits();
    let amps = base
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(x, &a)| a * lambda.powi(x.count_ones() as i32))
        .collect();
    PureState::from_unnormalized(n, amps)
}

/// Closed-form squared overlap between a deformed graph state and the
/// undeformed one on `m` vertices.
pub fn deformed_cluster_fidelity(m: usize, lambda: f64) -> f64 {
    ((1.0 + lambda).powi(2) / (2.0 * (1.0 + lambda * lambda))).powi(m as i32)
}

/// ⟨b|ρ_a|b⟩
pub fn fidelity<A: DensityOperator + ?Sized>(a: &A, b: &PureState) -> Result<f64> {
    if a.qubits() != b.qubits() {
        return Err(invalid(format!(
            "fidelity between {} and {} qubits",
            a.qubits(),
            b.qubits()
        )));
    }
    let f: f64 = a
        .weighted_terms()
        .iter()
        .map(|(p, s)| p * s.overlap(b))
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

pub fn trace_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: DensityOperator + ?Sized,
    B: DensityOperator + ?Sized,
{
    trace_distance_with(a, b, &Limits::default())
}

/// ½‖ρ_a − ρ_b‖₁, evaluated inside the span of the ensemble vectors so the
/// full 2^n × 2^n operators are never formed.
pub fn trace_distance_with<A, B>(a: &A, b: &B, limits: &Limits) -> Result<f64>
where
    A: DensityOperator + ?Sized,
    B: DensityOperator + ?Sized,
{
    let n = a.qubits();
    if b.qubits() != n {
        return Err(invalid(format!(
            "trace distance between {} and {} qubits",
            n,
            b.qubits()
        )));
    }
    check_dense(n, limits)?;
    let ta = a.weighted_terms();
    let tb = b.weighted_terms();
    let vectors: Vec<&PureState> = ta.iter().chain(tb.iter()).map(|(_, s)| *s).collect();
    let basis = orthonormal_span(&vectors);
    let r = basis.len();
    let coords = |s: &PureState| -> DVector<C64> {
        DVector::from_iterator(r, basis.iter().map(|q| dot_conj(q, s.amplitudes())))
    };
    let mut diff = DMatrix::<C64>::zeros(r, r);
    for (p, s) in &ta {
        let c = coords(s);
        diff += (&c * c.adjoint()) * C64::new(*p, 0.0);
    }
    for (p, s) in &tb {
        let c = coords(s);
        diff -= (&c * c.adjoint()) * C64::new(*p, 0.0);
    }
    Ok(half_trace_norm(diff))
}

fn dot_conj(q: &[C64], v: &[C64]) -> C64 {
    q.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
fn orthonormal_span(vectors: &[&PureState]) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.amplitudes().to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot_conj(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-10 {
            w.iter_mut().for_each(|x| *x /= norm);
            basis.push(w);
        }
    }
    basis
}

fn half_trace_norm(m: DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    // symmetrize against round-off before the Hermitian solver
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let d = 0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>();
    d.clamp(0.0, 1.0)
}

/// Dense density operator; intended for small systems and test oracles.
pub fn density_matrix<A: DensityOperator + ?Sized>(a: &A) -> Result<DMatrix<C64>> {
    let n = a.qubits();
    check_dense(
        n,
        &Limits {
            dense_qubits: 10,
            ..Limits::default()
        },
    )?;
    let d = 1 << n;
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for (p, s) in a.weighted_terms() {
        let v = DVector::from_column_slice(s.amplitudes());
        rho += (&v * v.adjoint()) * C64::new(p, 0.0);
    }
    Ok(rho)
}

/// ½‖ρ − σ‖₁ for explicit density matrices.
pub fn trace_distance_dense(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> Result<f64> {
    if rho.shape() != sigma.shape() || rho.nrows() != rho.ncols() {
        return Err(invalid("density matrices must be square with equal shape"));
    }
    Ok(half_trace_norm(rho - sigma))
}

/// Traces out one qubit of an `n`-qubit density matrix.
pub fn partial_trace(rho: &DMatrix<C64>, n: usize, qubit: usize) -> Result<DMatrix<C64>> {
    if rho.nrows() != 1 << n || qubit >= n || n < 2 {
        return Err(invalid("partial trace: shape or qubit out of range"));
    }
    let mask = qubit_mask(n, qubit);
    let low = mask - 1;
    let squeeze = |x: usize| ((x >> 1) & !low) | (x & low);
    let d = 1 << (n - 1);
    let mut out = DMatrix::<C64>::zeros(d, d);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            if (i & mask) == (j & mask) {
                out[(squeeze(i), squeeze(j))] += rho[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Amplitudes reshaped into a d_A × d_B matrix for the given cut.
pub(crate) fn reshape_for_cut(psi: &PureState, side_a: &[usize], side_b: &[usize]) -> DMatrix<C64> {
    let n = psi.qubits();
    let index_in = |x: usize, side: &[usize]| {
        side.iter()
            .fold(0usize, |acc, &q| (acc << 1) | bit_of(x, n, q))
    };
    let mut m = DMatrix::<C64>::zeros(1 << side_a.len(), 1 << side_b.len());
    for (x, &a) in psi.amplitudes().iter().enumerate() {
        m[(index_in(x, side_a), index_in(x, side_b))] = a;
    }
    m
}

/// Schmidt coefficients (singular values of the reshaped amplitudes), in
/// descending order; there are min(d_A, d_B) of them.
pub fn schmidt_coefficients(psi: &PureState, cut: &Bipartition) -> Result<Vec<f64>> {
    if cut.qubits() != psi.qubits() {
        return Err(invalid("bipartition and state disagree on the qubit count"));
    }
    let m = reshape_for_cut(psi, cut.side_a(), &cut.side_b());
    Ok(singular_values_desc(m))
}

pub(crate) fn singular_values_desc(m: DMatrix<C64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn w_state_amplitudes() {
        let w2 = make_w_state(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(w2.amplitudes(), &[c(0.0), c(s), c(s), c(0.0)]);
        let w3 = make_w_state(3).unwrap();
        for (i, a) in w3.amplitudes().iter().enumerate() {
            let expect = if [1, 2, 4].contains(&i) {
                1.0 / 3f64.sqrt()
            } else {
                0.0
            };
            assert_abs_diff_eq!(a.re, expect, epsilon = 1e-15);
        }
        assert!(make_w_state(1).is_err());
    }

    #[test]
    fn ghz_has_two_equal_amplitudes() {
        for n in 2..8 {
            let g = make_ghz(n).unwrap();
            let nz: Vec<_> = g.amplitudes().iter().filter(|a| a.norm() > 0.0).collect();
            assert_eq!(nz.len(), 2);
            assert!(nz.iter().all(|a| (a.norm() - 0.5f64.sqrt()).abs() < 1e-15));
        }
        assert!(make_ghz(1).is_err());
    }

    #[test]
    fn graph_state_fixtures() {
        let e = make_graph_state(&Graph::empty(3)).unwrap();
        assert!(e
            .amplitudes()
            .iter()
            .all(|a| (a.re - 0.5f64.powf(1.5)).abs() < 1e-15));
        let one = make_graph_state(&Graph::path(2)).unwrap();
        assert_eq!(one.amplitudes(), &[c(0.5), c(0.5), c(0.5), c(-0.5)]);
    }

    #[test]
    fn graph_state_matches_sequential_cz_circuit() {
        // straight-line circuit: |+++⟩ then CZ(0,1), CZ(1,2)
        let plus = [c(1.0), c(1.0)];
        let mut v = PureState::product(&[plus, plus, plus])
            .unwrap()
            .amplitudes()
            .to_vec();
        for (u, w) in [(0, 1), (1, 2)] {
            for (x, a) in v.iter_mut().enumerate() {
                if bit_of(x, 3, u) == 1 && bit_of(x, 3, w) == 1 {
                    *a = -*a;
                }
            }
        }
        let g = make_graph_state(&Graph::path(3)).unwrap();
        for (a, b) in g.amplitudes().iter().zip(&v) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
        }
    }

    #[test]
    fn graph_capacity() {
        assert!(matches!(
            make_graph_state(&Graph::path(15)),
            Err(crate::Error::Capacity(_))
        ));
        let limits = Limits {
            dense_qubits: 3,
            ..Limits::default()
        };
        assert!(make_graph_state_with(&Graph::path(4), &limits).is_err());
    }

    #[test]
    fn deformed_cluster_overlap_closed_form() {
        let g = Graph::grid(2, 2);
        let base = make_graph_state(&g).unwrap();
        let same = make_deformed_cluster(&g, 1.0).unwrap();
        assert_abs_diff_eq!(base.overlap(&same), 1.0, epsilon = 1e-14);
        let d = make_deformed_cluster(&g, 0.6490).unwrap();
        let expected = (1.6490f64.powi(2) / (2.0 * (1.0 + 0.6490f64.powi(2)))).powi(4);
        assert_abs_diff_eq!(base.overlap(&d), expected, epsilon = 1e-10);
        let z = make_deformed_cluster(&g, 0.0).unwrap();
        assert_abs_diff_eq!(z.amplitudes()[0].re, 1.0, epsilon = 1e-15);
        assert!(make_deformed_cluster(&g, 1.2).is_err());
        assert!(make_deformed_cluster(&g, -0.1).is_err());
    }

    #[test]
    fn fidelity_and_trace_distance_fixtures() {
        let zero = PureState::basis(1, 0).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert_abs_diff_eq!(trace_distance(&zero, &zero).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&zero, &one).unwrap(), 1.0, epsilon = 1e-15);
        // F = 0.75: a = |0⟩, b = (√3|0⟩ + |1⟩)/2
        let b = PureState::from_unnormalized(1, vec![c(3f64.sqrt()), c(1.0)]).unwrap();
        assert_abs_diff_eq!(fidelity(&zero, &b).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&zero, &b).unwrap(), 0.5, epsilon = 1e-14);
        assert!(fidelity(&zero, &make_ghz(2).unwrap()).is_err());
    }

    #[test]
    fn ensemble_validation() {
        let z = PureState::basis(2, 0).unwrap();
        assert!(Ensemble::new(vec![(0.5, z.clone()), (0.4, z.clone())]).is_err());
        assert!(Ensemble::new(vec![(1.5, z.clone()), (-0.5, z.clone())]).is_err());
        assert!(Ensemble::new(vec![
            (0.5, z.clone()),
            (0.5, PureState::basis(1, 0).unwrap())
        ])
        .is_err());
        assert!(Ensemble::new(vec![]).is_err());
        let e = Ensemble::from_weights(vec![(2.0, z.clone()), (2.0, z)]).unwrap();
        assert_eq!(e.terms()[0].0, 0.5);
    }

    #[test]
    fn schmidt_fixtures() {
        let prod = PureState::basis(3, 5).unwrap();
        let cut = Bipartition::new(3, &[1]).unwrap();
        let sc = schmidt_coefficients(&prod, &cut).unwrap();
        assert_eq!(sc.len(), 2);
        assert_abs_diff_eq!(sc[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sc[1], 0.0, epsilon = 1e-14);

        let bell = make_ghz(2).unwrap();
        let sc = schmidt_coefficients(&bell, &Bipartition::new(2, &[0]).unwrap()).unwrap();
        assert_abs_diff_eq!(sc[0], 0.5f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(sc[1], 0.5f64.sqrt(), epsilon = 1e-14);

        let ghz = make_ghz(4).unwrap();
        let sc = schmidt_coefficients(&ghz, &Bipartition::new(4, &[0, 1]).unwrap()).unwrap();
        assert_eq!(sc.len(), 4);
        let expect = [0.5f64.sqrt(), 0.5f64.sqrt(), 0.0, 0.0];
        for (a, b) in sc.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn bipartition_validation() {
        assert!(Bipartition::new(3, &[]).is_err());
        assert!(Bipartition::new(3, &[0, 1, 2]).is_err());
        assert!(Bipartition::new(3, &[3]).is_err());
        assert!(Bipartition::new(3, &[1, 1]).is_err());
        assert_eq!(Bipartition::new(4, &[2, 0]).unwrap().side_b(), vec![1, 3]);
    }

    #[test]
    fn files_round_trip_bit_exactly() {
        let mut rng = crate::rng::stream(11, 0);
        let s = PureState::random(3, &mut rng).unwrap();
        let back = PureState::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
        let g = Graph::grid(2, 3);
        let js = serde_json::to_string(&g).unwrap();
        assert!(js.starts_with("{\"vertices\":6,\"edges\":[[0,1]"));
        assert_eq!(serde_json::from_str::<Graph>(&js).unwrap(), g);
        assert!(serde_json::from_str::<Graph>("{\"vertices\":2,\"edges\":[[1,1]]}").is_err());
        assert!(PureState::from_json("{\"n\":1,\"amplitudes\":[[1,0],[1,0]]}").is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let s = PureState::product(&[[c(1.0), c(0.0)], [c(1.0), c(1.0)]]).unwrap();
        let rho = density_matrix(&s).unwrap();
        let r0 = partial_trace(&rho, 2, 1).unwrap();
        assert_abs_diff_eq!(r0[(0, 0)].re, 1.0, epsilon = 1e-15);
        let r1 = partial_trace(&rho, 2, 0).unwrap();
        assert_abs_diff_eq!(r1[(0, 1)].re, 0.5, epsilon = 1e-15);
    }
}
