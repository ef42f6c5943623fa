//! Entanglement monotones on dense pure states: the geometric measure by
//! alternating optimization, Schmidt ranks, the Schmidt-rank width and the
//! entropic entanglement width by exhaustive subcubic-tree enumeration, and
//! finite-cap suprema over standard state families.

mod family;
mod geometric;
mod trees;

use serde::{Deserialize, Serialize};

pub use family::{evaluate, family_supremum, Family, Measure};
pub use geometric::{
    geometric_measure, geometric_measure_ensemble_ub, product_overlap, product_overlap_seeded,
    OptimizerSettings,
};
pub use trees::{
    double_factorial_count, entropic_entanglement_width, entropic_entanglement_width_with,
    enumerate_subcubic_trees, enumerate_subcubic_trees_with, schmidt_rank, schmidt_rank_width,
    schmidt_rank_width_with, SubcubicTree, SubcubicTrees, DEFAULT_RANK_TOL,
};

use crate::qstate::C64;

/// How a reported value relates to the true value of the monotone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    LowerBound,
    UpperBound,
}

/// Optimizer or enumeration witness attached to a result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// Local states of the best product state, qubit 0 first.
    Product(Vec<[C64; 2]>),
    Tree(SubcubicTree),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneResult {
    pub value: f64,
    pub kind: BoundKind,
    pub method: String,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// (size, value) for family suprema.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_size: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl MonotoneResult {
    pub(crate) fn exact(value: f64, method: &str) -> Self {
        Self {
            value,
            kind: BoundKind::Exact,
            method: method.to_string(),
            iterations: 0,
            restarts: 0,
            converged: true,
            note: None,
            per_size: Vec::new(),
            witness: None,
        }
    }

    pub fn without_witness(mut self) -> Self {
        self.witness = None;
        self
    }
}
