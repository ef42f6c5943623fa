use serde::{Deserialize, Serialize};

use super::{
    entropic_entanglement_width_with, geometric_measure, schmidt_rank_width_with, BoundKind,
    MonotoneResult, OptimizerSettings, DEFAULT_RANK_TOL,
};
use crate::error::{invalid, Result};
use crate::qstate::{
    make_deformed_cluster, make_ghz, make_graph_state, make_w_state, Graph, PureState,
};
use crate::Limits;

/// Registered state families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Family {
    W,
    Ghz,
    Cluster1d,
    Cluster2d,
    DeformedCluster2d { lambda: f64 },
    Product,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "w" => Family::W,
            "ghz" => Family::Ghz,
            "cluster1d" | "1d-cluster" | "chain" => Family::Cluster1d,
            "cluster2d" | "2d-cluster" | "cluster" => Family::Cluster2d,
            "product" => Family::Product,
            _ => {
                if let Some(rest) = lower.strip_prefix("deformed") {
                    let lambda = match rest.trim_start_matches([':', '=', '-']) {
                        "" => 0.8,
                        v => v
                            .parse()
                            .map_err(|_| invalid(format!("bad deformation in {name:?}")))?,
                    };
                    if !(0.0..=1.0).contains(&lambda) {
                        return Err(invalid(format!("deformation λ = {lambda} outside [0, 1]")));
                    }
                    Family::DeformedCluster2d { lambda }
                } else {
                    return Err(invalid(format!("unknown family {name:?}")));
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            Family::W => "w".into(),
            Family::Ghz => "ghz".into(),
            Family::Cluster1d => "cluster1d".into(),
            Family::Cluster2d => "cluster2d".into(),
            Family::DeformedCluster2d { lambda } => format!("deformed:{lambda}"),
            Family::Product => "product".into(),
        }
    }

    fn rectangles(cap: usize) -> Vec<(usize, usize)> {
        // square and near-square grids, ordered by size
        let mut out = Vec::new();
        let mut r = 2;
        while r * r <= cap {
            out.push((r, r));
            if r * (r + 1) <= cap {
                out.push((r, r + 1));
            }
            r += 1;
        }
        out
    }

    /// The member on `size` qubits, if the family has one.
    pub fn member(&self, size: usize) -> Result<Option<PureState>> {
        if size < 2 {
            return Ok(None);
        }
        let grid_of = |size: usize| {
            Self::rectangles(size)
                .into_iter()
                .find(|(r, c)| r * c == size)
                .map(|(r, c)| Graph::grid(r, c))
        };
        Ok(match self {
            Family::W => Some(make_w_state(size)?),
            Family::Ghz => Some(make_ghz(size)?),
            Family::Cluster1d => Some(make_graph_state(&Graph::path(size))?),
            Family::Product => Some(PureState::basis(size, 0)?),
            Family::Cluster2d => grid_of(size).map(|g| make_graph_state(&g)).transpose()?,
            Family::DeformedCluster2d { lambda } => grid_of(size)
                .map(|g| make_deformed_cluster(&g, *lambda))
                .transpose()?,
        })
    }

    /// Qubit counts of the members up to `cap`.
    pub fn sizes(&self, cap: usize) -> Vec<usize> {
        match self {
            Family::Cluster2d | Family::DeformedCluster2d { .. } => Self::rectangles(cap)
                .into_iter()
                .map(|(r, c)| r * c)
                .collect(),
            _ => (2..=cap).collect(),
        }
    }
}

/// Monotones the library can evaluate on pure states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Geometric,
    SchmidtRankWidth,
    EntropicWidth,
}

impl Measure {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "geometric" | "eg" | "e_g" => Ok(Measure::Geometric),
            "schmidt-rank-width" | "srw" | "chi" | "chi_wd" | "chi-wd" => {
                Ok(Measure::SchmidtRankWidth)
            }
            "entropic-width" | "ewd" | "e_wd" | "e-wd" => Ok(Measure::EntropicWidth),
            _ => Err(invalid(format!("unknown measure {name:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Measure::Geometric => "geometric",
            Measure::SchmidtRankWidth => "schmidt-rank-width",
            Measure::EntropicWidth => "entropic-width",
        }
    }
}

pub fn evaluate(
    measure: Measure,
    psi: &PureState,
    settings: &OptimizerSettings,
    limits: &Limits,
) -> Result<MonotoneResult> {
    match measure {
        Measure::Geometric => geometric_measure(psi, settings),
        Measure::SchmidtRankWidth => schmidt_rank_width_with(psi, DEFAULT_RANK_TOL, limits),
        Measure::EntropicWidth => entropic_entanglement_width_with(psi, limits),
    }
}

/// Largest value of `measure` over the family members with at most
/// `size_cap` qubits. Only a lower bound on the supremum over the infinite
/// family; the per-size sequence is attached.
pub fn family_supremum(
    family: Family,
    measure: Measure,
    size_cap: usize,
    settings: &OptimizerSettings,
    limits: &Limits,
) -> Result<MonotoneResult> {
    let usable_cap = match measure {
        Measure::Geometric => size_cap.min(limits.dense_qubits),
        _ => size_cap.min(limits.tree_leaves).min(limits.dense_qubits),
    };
    let mut per_size = Vec::new();
    let mut iterations = 0;
    let mut converged = true;
    for size in family.sizes(usable_cap) {
        let Some(psi) = family.member(size)? else {
            continue;
        };
        let r = evaluate(measure, &psi, settings, limits)?;
        iterations += r.iterations;
        converged &= r.converged;
        per_size.push((size, r.value));
    }
    if per_size.is_empty() {
        return Err(invalid(format!(
            "family {} has no members up to size {size_cap}",
            family.name()
        )));
    }
    let value = per_size.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let note = (usable_cap < size_cap)
        .then(|| format!("sizes above {usable_cap} skipped (capacity limits)"));
    Ok(MonotoneResult {
        value,
        kind: BoundKind::LowerBound,
        method: format!("family-supremum over generated members up to size cap {usable_cap}"),
        iterations,
        restarts: settings.restarts,
        converged,
        note,
        per_size,
        witness: None,
    })
}
