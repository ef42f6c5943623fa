use serde::{Deserialize, Serialize};

use super::{MonotoneResult, Witness};
use crate::error::{capacity, invalid, Result};
use crate::qstate::{reshape_for_cut, singular_values_desc, Bipartition, PureState};
use crate::Limits;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Number of Schmidt coefficients above `rank_tol` times the largest one.
pub fn schmidt_rank(psi: &PureState, cut: &Bipartition, rank_tol: f64) -> Result<usize> {
    if !(rank_tol > 0.0) {
        return Err(invalid("rank_tol must be > 0"));
    }
    let sc = crate::qstate::schmidt_coefficients(psi, cut)?;
    Ok(rank_of(&sc, rank_tol))
}

fn rank_of(sc: &[f64], rank_tol: f64) -> usize {
    let top = sc.first().copied().unwrap_or(0.0);
    sc.iter().filter(|&&s| s > rank_tol * top).count()
}

fn entropy_of(sc: &[f64]) -> f64 {
    sc.iter()
        .map(|s| s * s)
        .filter(|&l| l > 1e-300)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Leaf-labeled tree whose vertices all have degree 1 or 3. Vertices
/// `0..leaves` are the leaves (leaf `q` is qubit `q`); the `leaves - 2`
/// internal vertices follow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubcubicTree {
    leaves: usize,
    edges: Vec<(usize, usize)>,
}

impl SubcubicTree {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn internal_vertices(&self) -> usize {
        self.leaves - 2
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// For every edge, the set of leaves on the side away from leaf 0, as a
    /// bitmask over qubit labels.
    pub fn cuts(&self) -> Vec<u64> {
        let v = 2 * self.leaves - 2;
        let mut adj = vec![Vec::new(); v];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        self.edges
            .iter()
            .map(|&(a, b)| {
                // component of b after removing the edge, then pick the side without leaf 0
                let mut seen = vec![false; v];
                seen[a] = true;
                let mut stack = vec![b];
                seen[b] = true;
                let mut mask = 0u64;
                let mut has_zero = false;
                while let Some(x) = stack.pop() {
                    if x < self.leaves {
                        mask |= 1 << x;
                        has_zero |= x == 0;
                    }
                    for &y in &adj[x] {
                        if !seen[y] {
                            seen[y] = true;
                            stack.push(y);
                        }
                    }
                }
                if has_zero {
                    !mask & ((1u64 << self.leaves) - 1)
                } else {
                    mask
                }
            })
            .collect()
    }

    /// Checks connectivity, acyclicity, degrees and the leaf labeling.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.leaves;
        let v = 2 * n - 2;
        if self.edges.len() != v - 1 {
            return Err(invalid("edge count is not vertices - 1"));
        }
        let mut deg = vec![0usize; v];
        let mut parent: Vec<usize> = (0..v).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for &(a, b) in &self.edges {
            if a >= v || b >= v || a == b {
                return Err(invalid("edge endpoint out of range"));
            }
            deg[a] += 1;
            deg[b] += 1;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return Err(invalid("cycle"));
            }
            parent[ra] = rb;
        }
        if (0..n).any(|x| deg[x] != 1) || (n..v).any(|x| deg[x] != 3) {
            return Err(invalid(
                "degree is not 1 on leaves and 3 on internal vertices",
            ));
        }
        Ok(())
    }
}

/// Oriented edges (toward-leaf-0 endpoint first) and their cut masks.
#[derive(Clone)]
struct Builder {
    edges: Vec<(usize, usize)>,
    masks: Vec<u64>,
}

impl Builder {
    fn star(n: usize) -> Self {
        let c = n;
        Self {
            edges: vec![(0, c), (c, 1), (c, 2)],
            masks: vec![0b110, 0b010, 0b100],
        }
    }

    /// Subdivides edge `e` with a new internal vertex carrying leaf `k`.
    fn insert(&mut self, n: usize, k: usize, e: usize) {
        let (u, w) = self.edges[e];
        let s = self.masks[e];
        let bit = 1u64 << k;
        let m = n + k - 2;
        for (f, mask) in self.masks.iter_mut().enumerate() {
            if f != e && *mask & s == s {
                *mask |= bit;
            }
        }
        self.edges[e] = (u, m);
        self.masks[e] = s | bit;
        self.edges.push((m, w));
        self.masks.push(s);
        self.edges.push((m, k));
        self.masks.push(bit);
    }

    fn from_choices(n: usize, choices: &[usize]) -> Self {
        let mut b = Builder::star(n);
        for (i, &e) in choices.iter().enumerate() {
            b.insert(n, i + 3, e);
        }
        b
    }
}

/// (2n − 5)!!, the number of leaf-labeled subcubic trees on n ≥ 3 leaves.
pub fn double_factorial_count(n: usize) -> u64 {
    (3..n).map(|k| (2 * k - 3) as u64).product()
}

/// Every leaf-labeled subcubic tree on `n` leaves, produced by inserting
/// leaf k into each edge of every tree on leaves 0..k.
pub struct SubcubicTrees {
    n: usize,
    choices: Vec<usize>,
    done: bool,
}

impl Iterator for SubcubicTrees {
    type Item = SubcubicTree;

    fn next(&mut self) -> Option<SubcubicTree> {
        if self.done {
            return None;
        }
        let b = Builder::from_choices(self.n, &self.choices);
        // odometer, last digit fastest; digit i has radix 2(i + 3) − 3
        self.done = true;
        for i in (0..self.choices.len()).rev() {
            self.choices[i] += 1;
            if self.choices[i] < 2 * i + 3 {
                self.done = false;
                break;
            }
            self.choices[i] = 0;
        }
        Some(SubcubicTree {
            leaves: self.n,
            edges: b.edges,
        })
    }
}

pub fn enumerate_subcubic_trees(n: usize) -> Result<SubcubicTrees> {
    enumerate_subcubic_trees_with(n, &Limits::default())
}

pub fn enumerate_subcubic_trees_with(n: usize, limits: &Limits) -> Result<SubcubicTrees> {
    check_tree_size(n, limits)?;
    Ok(SubcubicTrees {
        n,
        choices: vec![0; n - 3],
        done: false,
    })
}

fn check_tree_size(n: usize, limits: &Limits) -> Result<()> {
    if n < 3 {
        return Err(invalid(format!(
            "subcubic trees need at least 3 leaves, got {n}"
        )));
    }
    if n > limits.tree_leaves || n > 60 {
        return Err(capacity(format!(
            "{n} leaves exceeds the tree enumeration cap of {}",
            limits.tree_leaves
        )));
    }
    Ok(())
}

/// Minimizes the largest edge score over all trees; ties keep the earliest
/// tree in enumeration order.
fn min_max_over_trees(n: usize, score: &[f64]) -> (f64, Vec<usize>) {
    struct Search<'a> {
        n: usize,
        score: &'a [f64],
        best: f64,
        best_choices: Vec<usize>,
        choices: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize, b: &Builder) {
            if k == self.n {
                let worst = b
                    .masks
                    .iter()
                    .map(|&m| self.score[m as usize])
                    .fold(f64::MIN, f64::max);
                if worst < self.best {
                    self.best = worst;
                    self.best_choices = self.choices.clone();
                }
                return;
            }
            for e in 0..b.edges.len() {
                let mut child = b.clone();
                child.insert(self.n, k, e);
                self.choices.push(e);
                self.go(k + 1, &child);
                self.choices.pop();
            }
        }
    }
    let mut s = Search {
        n,
        score,
        best: f64::INFINITY,
        best_choices: Vec::new(),
        choices: Vec::new(),
    };
    s.go(3, &Builder::star(n));
    (s.best, s.best_choices)
}

/// Score of every cut, indexed by the label mask of the side without qubit 0.
fn cut_table(psi: &PureState, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let n = psi.qubits();
    let full = (1u64 << n) - 1;
    let mut table = vec![0.0; 1 << n];
    for mask in (2..=full).step_by(2) {
        let side_a: Vec<usize> = (0..n).filter(|&q| mask >> q & 1 == 1).collect();
        let side_b: Vec<usize> = (0..n).filter(|&q| mask >> q & 1 == 0).collect();
        let sv = singular_values_desc(reshape_for_cut(psi, &side_a, &side_b));
        table[mask as usize] = f(&sv);
    }
    table
}

fn tree_width(
    psi: &PureState,
    limits: &Limits,
    score: impl Fn(&[f64]) -> f64,
    method: &str,
) -> Result<MonotoneResult> {
    let n = psi.qubits();
    if n < 3 {
        // no tree to optimize over: one cut for n = 2, none for n = 1
        let value = if n == 2 {
            let cut = Bipartition::new(2, &[0])?;
            score(&crate::qstate::schmidt_coefficients(psi, &cut)?)
        } else {
            score(&[1.0])
        };
        let mut r = MonotoneResult::exact(value, method);
        r.note = Some(format!(
            "{n}-qubit state: value of the single available cut"
        ));
        return Ok(r);
    }
    check_tree_size(n, limits)?;
    let table = cut_table(psi, score);
    let (best, choices) = min_max_over_trees(n, &table);
    let tree = SubcubicTree {
        leaves: n,
        edges: Builder::from_choices(n, &choices).edges,
    };
    let mut r = MonotoneResult::exact(best, method);
    r.iterations = double_factorial_count(n) as usize;
    r.witness = Some(Witness::Tree(tree));
    Ok(r)
}

/// min over subcubic trees of the max Schmidt rank across the tree's edge cuts.
pub fn schmidt_rank_width(psi: &PureState, rank_tol: f64) -> Result<MonotoneResult> {
    schmidt_rank_width_with(psi, rank_tol, &Limits::default())
}

pub fn schmidt_rank_width_with(
    psi: &PureState,
    rank_tol: f64,
    limits: &Limits,
) -> Result<MonotoneResult> {
    if !(rank_tol > 0.0) {
        return Err(invalid("rank_tol must be > 0"));
    }
    tree_width(
        psi,
        limits,
        |sc| rank_of(sc, rank_tol) as f64,
        "exhaustive subcubic-tree enumeration, Schmidt rank",
    )
}

/// Same optimization with the base-2 entanglement entropy as the edge score.
pub fn entropic_entanglement_width(psi: &PureState) -> Result<MonotoneResult> {
    entropic_entanglement_width_with(psi, &Limits::default())
}

pub fn entropic_entanglement_width_with(
    psi: &PureState,
    limits: &Limits,
) -> Result<MonotoneResult> {
    tree_width(
        psi,
        limits,
        entropy_of,
        "exhaustive subcubic-tree enumeration, entanglement entropy",
    )
}
