//! Site percolation on the L×L square lattice and the deformed-cluster
//! hole model.
//!
//! Every trial draws one uniform number per site from its own stream, so
//! with a fixed seed the crossing indicator of each trial is monotone in p.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{substream, StreamRng};

/// Known square-lattice site threshold, used only for reporting.
pub const SQUARE_SITE_THRESHOLD: f64 = 0.592746;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    side: usize,
    occupied: Vec<bool>,
}

impl Lattice {
    pub fn new(side: usize, occupied: Vec<bool>) -> Result<Self> {
        if side < 2 {
            return Err(invalid(format!("lattice side {side} < 2")));
        }
        if occupied.len() != side * side {
            return Err(invalid(format!(
                "expected {} sites, got {}",
                side * side,
                occupied.len()
            )));
        }
        Ok(Self { side, occupied })
    }

    pub fn filled(side: usize, value: bool) -> Result<Self> {
        Self::new(side, vec![value; side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.occupied[row * self.side + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.occupied[row * self.side + col] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.occupied.len() as f64
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p_site = {p} outside [0, 1]")));
    }
    Ok(())
}

fn check_side(side: usize) -> Result<()> {
    if side < 2 {
        return Err(invalid(format!("lattice side {side} < 2")));
    }
    Ok(())
}

pub fn sample_lattice<R: Rng + ?Sized>(side: usize, p_site: f64, rng: &mut R) -> Result<Lattice> {
    check_side(side)?;
    check_p(p_site)?;
    let occupied = (0..side * side)
        .map(|_| rng.random::<f64>() < p_site)
        .collect();
    Lattice::new(side, occupied)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Left-right crossing by a 4-connected cluster of occupied sites.
pub fn spans(lattice: &Lattice) -> bool {
    let l = lattice.side;
    let left = l * l;
    let right = left + 1;
    let mut uf = UnionFind::new(l * l + 2);
    for r in 0..l {
        for c in 0..l {
            if !lattice.is_occupied(r, c) {
                continue;
            }
            let i = r * l + c;
            if c == 0 {
                uf.union(i, left);
            }
            if c == l - 1 {
                uf.union(i, right);
            }
            if c + 1 < l && lattice.is_occupied(r, c + 1) {
                uf.union(i, i + 1);
            }
            if r + 1 < l && lattice.is_occupied(r + 1, c) {
                uf.union(i, i + l);
            }
        }
    }
    uf.find(left) == uf.find(right)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercolationEstimate {
    pub p_site: f64,
    #[serde(rename = "L")]
    pub side: usize,
    pub trials: usize,
    pub spanning_probability: f64,
    pub std_error: f64,
    pub seed: u64,
}

fn trial_rng(seed: u64, side: usize, trial: usize) -> StreamRng {
    substream(seed, side as u64, trial as u64)
}

pub fn spanning_probability(
    side: usize,
    p_site: f64,
    trials: usize,
    seed: u64,
) -> Result<PercolationEstimate> {
    check_side(side)?;
    check_p(p_site)?;
    if trials == 0 {
        return Err(invalid("trials must be ≥ 1"));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let lat = sample_lattice(side, p_site, &mut trial_rng(seed, side, t))
                .expect("checked arguments");
            spans(&lat) as usize
        })
        .sum::<usize>();
    let p_hat = hits as f64 / trials as f64;
    Ok(PercolationEstimate {
        p_site,
        side,
        trials,
        spanning_probability: p_hat,
        std_error: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub p_c: f64,
    #[serde(rename = "L")]
    pub side: usize,
    pub trials_per_point: usize,
    pub seed: u64,
    /// (p, crossing probability) at every bisection midpoint.
    pub evaluations: Vec<(f64, f64)>,
    pub note: String,
}

pub const BISECTION_STEPS: usize = 12;

/// Bisection on p for crossing probability 1/2.
pub fn estimate_threshold(
    side: usize,
    trials_per_point: usize,
    seed: u64,
) -> Result<ThresholdEstimate> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut evaluations = Vec::with_capacity(BISECTION_STEPS);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let est = spanning_probability(side, mid, trials_per_point, seed)?;
        evaluations.push((mid, est.spanning_probability));
        if est.spanning_probability < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdEstimate {
        p_c: 0.5 * (lo + hi),
        side,
        trials_per_point,
        seed,
        evaluations,
        note: format!("finite-size estimate at L = {side}; the infinite-lattice value is {SQUARE_SITE_THRESHOLD}"),
    })
}

/// Central-difference slope of the crossing probability at p.
pub fn crossing_slope(side: usize, p: f64, h: f64, trials: usize, seed: u64) -> Result<f64> {
    let up = spanning_probability(side, (p + h).min(1.0), trials, seed)?;
    let down = spanning_probability(side, (p - h).max(0.0), trials, seed)?;
    Ok((up.spanning_probability - down.spanning_probability)
        / ((p + h).min(1.0) - (p - h).max(0.0)))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("λ = {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// Probability that the filtering POVM succeeds on one site: 2λ²/(1+λ²).
pub fn deformed_p_site(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let l2 = lambda * lambda;
    Ok(2.0 * l2 / (1.0 + l2))
}

/// Inverse of [`deformed_p_site`]: √(p/(2−p)).
pub fn deformed_threshold(p_c: f64) -> Result<f64> {
    if !(p_c > 0.0 && p_c <= 1.0) {
        return Err(invalid(format!("p_c = {p_c} outside (0, 1]")));
    }
    Ok((p_c / (2.0 - p_c)).sqrt())
}

/// Success and failure Kraus operators of the site filter, as diagonals.
pub fn povm_kraus(lambda: f64) -> Result<([f64; 2], [f64; 2])> {
    check_lambda(lambda)?;
    Ok(([lambda, 1.0], [(1.0 - lambda * lambda).sqrt(), 0.0]))
}

/// Success probability of the site filter on the diagonal single-site
/// marginal diag(1, λ²)/(1+λ²) of the deformed cluster.
pub fn povm_success_probability(lambda: f64) -> Result<f64> {
    let (succ, _) = povm_kraus(lambda)?;
    let l2 = lambda * lambda;
    let marginal = [1.0 / (1.0 + l2), l2 / (1.0 + l2)];
    Ok(succ[0].powi(2) * marginal[0] + succ[1].powi(2) * marginal[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleSample {
    pub lattice: Lattice,
    /// Heralded filter outcome per site, row-major; false marks a hole.
    pub outcomes: Vec<bool>,
}

/// One filter outcome per site with success probability 2λ²/(1+λ²).
pub fn povm_hole_sampler<R: Rng + ?Sized>(
    lambda: f64,
    side: usize,
    rng: &mut R,
) -> Result<HoleSample> {
    let p = deformed_p_site(lambda)?;
    let lattice = sample_lattice(side, p, rng)?;
    let outcomes = lattice.occupied.clone();
    Ok(HoleSample { lattice, outcomes })
}
