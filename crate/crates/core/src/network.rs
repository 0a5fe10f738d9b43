//! Enzyme network specifications and their generating matrices.
//!
//! A network with `n` conformations has `3n` states laid out in three
//! stages: free enzyme `E_1..E_n`, enzyme–substrate complex `ES_1..ES_n`
//! and the product-release (on) states `E0_1..E0_n`. Within each stage the
//! conformations interconvert through a fluctuation matrix; between stages
//! the only moves are `E_i -> ES_i` (rate `k1_i [S]`), `ES_i -> E_i`
//! (`k_-1i`), `ES_i -> E0_i` (`k2_i`) and `E0_i -> E_i` (`delta_i`).

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All rate constants of one enzyme network at a fixed substrate
/// concentration.
///
/// Rates are per second and the concentration is micromolar, so
/// `k1` is per (micromolar · second). The diagonals of the three
/// fluctuation matrices are always recomputed from their off-diagonal
/// entries, which makes every row sum to zero by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkSpecDoc", into = "NetworkSpecDoc")]
pub struct NetworkSpec {
    n: usize,
    concentration: f64,
    q_aa: DMatrix<f64>,
    q_bb: DMatrix<f64>,
    q_cc: DMatrix<f64>,
    k1: DVector<f64>,
    k_neg1: DVector<f64>,
    k2: DVector<f64>,
    delta: DVector<f64>,
}

/// Wire form of [`NetworkSpec`]: matrices are row-major arrays of arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpecDoc {
    pub n: usize,
    pub concentration: f64,
    pub q_aa: Vec<Vec<f64>>,
    pub q_bb: Vec<Vec<f64>>,
    pub q_cc: Vec<Vec<f64>>,
    pub k1: Vec<f64>,
    pub k_neg1: Vec<f64>,
    pub k2: Vec<f64>,
    pub delta: Vec<f64>,
}

impl TryFrom<NetworkSpecDoc> for NetworkSpec {
    type Error = Error;

    fn try_from(doc: NetworkSpecDoc) -> Result<Self> {
        let n = doc.n;
        if n == 0 {
            return Err(Error::spec("n must be a positive integer"));
        }
        let q_aa = matrix_from_rows("q_aa", n, &doc.q_aa)?;
        let q_bb = matrix_from_rows("q_bb", n, &doc.q_bb)?;
        let q_cc = matrix_from_rows("q_cc", n, &doc.q_cc)?;
        NetworkBuilder::new(n)
            .concentration(doc.concentration)
            .q_aa(q_aa)
            .q_bb(q_bb)
            .q_cc(q_cc)
            .k1(DVector::from_vec(doc.k1))
            .k_neg1(DVector::from_vec(doc.k_neg1))
            .k2(DVector::from_vec(doc.k2))
            .delta(DVector::from_vec(doc.delta))
            .build()
    }
}

impl From<NetworkSpec> for NetworkSpecDoc {
    fn from(spec: NetworkSpec) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
        NetworkSpecDoc {
            n: spec.n,
            concentration: spec.concentration,
            q_aa: rows(&spec.q_aa),
            q_bb: rows(&spec.q_bb),
            q_cc: rows(&spec.q_cc),
            k1: spec.k1.iter().copied().collect(),
            k_neg1: spec.k_neg1.iter().copied().collect(),
            k2: spec.k2.iter().copied().collect(),
            delta: spec.delta.iter().copied().collect(),
        }
    }
}

fn matrix_from_rows(name: &str, n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::spec(format!("{name} must be a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Incremental constructor for [`NetworkSpec`]. Fluctuation matrices
/// default to zero (no conformational transitions).
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    n: usize,
    concentration: f64,
    q_aa: Option<DMatrix<f64>>,
    q_bb: Option<DMatrix<f64>>,
    q_cc: Option<DMatrix<f64>>,
    k1: Option<DVector<f64>>,
    k_neg1: Option<DVector<f64>>,
    k2: Option<DVector<f64>>,
    delta: Option<DVector<f64>>,
}

impl NetworkBuilder {
    pub fn new(n: usize) -> Self {
        NetworkBuilder {
            n,
            concentration: 1.0,
            q_aa: None,
            q_bb: None,
            q_cc: None,
            k1: None,
            k_neg1: None,
            k2: None,
            delta: None,
        }
    }

    pub fn concentration(mut self, s: f64) -> Self {
        self.concentration = s;
        self
    }

    pub fn q_aa(mut self, m: DMatrix<f64>) -> Self {
        self.q_aa = Some(m);
        self
    }

    pub fn q_bb(mut self, m: DMatrix<f64>) -> Self {
        self.q_bb = Some(m);
        self
    }

    pub fn q_cc(mut self, m: DMatrix<f64>) -> Self {
        self.q_cc = Some(m);
        self
    }

    pub fn k1(mut self, v: DVector<f64>) -> Self {
        self.k1 = Some(v);
        self
    }

    pub fn k_neg1(mut self, v: DVector<f64>) -> Self {
        self.k_neg1 = Some(v);
        self
    }

    pub fn k2(mut self, v: DVector<f64>) -> Self {
        self.k2 = Some(v);
        self
    }

    pub fn delta(mut self, v: DVector<f64>) -> Self {
        self.delta = Some(v);
        self
    }

    pub fn build(self) -> Result<NetworkSpec> {
        let n = self.n;
        if n == 0 {
            return Err(Error::spec("n must be a positive integer"));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::spec(format!(
                "concentration must be finite and positive, got {}",
                self.concentration
            )));
        }
        let fluct = |name: &str, m: Option<DMatrix<f64>>| -> Result<DMatrix<f64>> {
            let m = m.unwrap_or_else(|| DMatrix::zeros(n, n));
            generator_block(name, n, m)
        };
        let rate = |name: &str, v: Option<DVector<f64>>| -> Result<DVector<f64>> {
            let v = v.ok_or_else(|| Error::spec(format!("{name} is required")))?;
            if v.len() != n {
                return Err(Error::spec(format!("{name} has length {}, expected {n}", v.len())));
            }
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::spec(format!(
                    "{name}[{i}] = {x} must be finite and strictly positive"
                )));
            }
            Ok(v)
        };
        Ok(NetworkSpec {
            n,
            concentration: self.concentration,
            q_aa: fluct("q_aa", self.q_aa)?,
            q_bb: fluct("q_bb", self.q_bb)?,
            q_cc: fluct("q_cc", self.q_cc)?,
            k1: rate("k1", self.k1)?,
            k_neg1: rate("k_neg1", self.k_neg1)?,
            k2: rate("k2", self.k2)?,
            delta: rate("delta", self.delta)?,
        })
    }
}

/// Validates off-diagonals and overwrites the diagonal with the negated
/// off-diagonal row sum.
fn generator_block(name: &str, n: usize, mut m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::spec(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let x = m[(i, j)];
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::spec(format!(
                    "{name}[{i}][{j}] = {x} must be finite and nonnegative"
                )));
            }
            off += x;
        }
        m[(i, i)] = -off;
    }
    Ok(m)
}

impl NetworkSpec {
    /// The classical three-state Michaelis–Menten scheme as a one-conformation network.
    pub fn michaelis_menten(k1: f64, k_neg1: f64, k2: f64, delta: f64, concentration: f64) -> Result<Self> {
        NetworkBuilder::new(1)
            .concentration(concentration)
            .k1(DVector::from_element(1, k1))
            .k_neg1(DVector::from_element(1, k_neg1))
            .k2(DVector::from_element(1, k2))
            .delta(DVector::from_element(1, delta))
            .build()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn q_aa(&self) -> &DMatrix<f64> {
        &self.q_aa
    }

    pub fn q_bb(&self) -> &DMatrix<f64> {
        &self.q_bb
    }

    pub fn q_cc(&self) -> &DMatrix<f64> {
        &self.q_cc
    }

    pub fn k1(&self) -> &DVector<f64> {
        &self.k1
    }

    pub fn k_neg1(&self) -> &DVector<f64> {
        &self.k_neg1
    }

    pub fn k2(&self) -> &DVector<f64> {
        &self.k2
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    /// `diag(k1_i [S])`, the E -> ES association block.
    pub fn q_ab(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&(&self.k1 * self.concentration))
    }

    pub fn q_ba(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.k_neg1)
    }

    pub fn q_bc(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.k2)
    }

    pub fn q_ca(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.delta)
    }

    pub fn with_concentration(&self, concentration: f64) -> Result<Self> {
        if !(concentration.is_finite() && concentration > 0.0) {
            return Err(Error::spec(format!(
                "concentration must be finite and positive, got {concentration}"
            )));
        }
        Ok(NetworkSpec {
            concentration,
            ..self.clone()
        })
    }

    pub fn with_delta(&self, delta: DVector<f64>) -> Result<Self> {
        self.to_builder().delta(delta).build()
    }

    pub fn to_builder(&self) -> NetworkBuilder {
        NetworkBuilder::new(self.n)
            .concentration(self.concentration)
            .q_aa(self.q_aa.clone())
            .q_bb(self.q_bb.clone())
            .q_cc(self.q_cc.clone())
            .k1(self.k1.clone())
            .k_neg1(self.k_neg1.clone())
            .k2(self.k2.clone())
            .delta(self.delta.clone())
    }

    /// Largest rate in the network other than the reset rates `delta`.
    pub fn max_non_reset_rate(&self) -> f64 {
        let offdiag_max = |m: &DMatrix<f64>| {
            let mut best = 0.0f64;
            for i in 0..self.n {
                for j in 0..self.n {
                    if i != j {
                        best = best.max(m[(i, j)]);
                    }
                }
            }
            best
        };
        [
            offdiag_max(&self.q_aa),
            offdiag_max(&self.q_bb),
            offdiag_max(&self.q_cc),
            self.k1.max() * self.concentration,
            self.k_neg1.max(),
            self.k2.max(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn generator(&self) -> Generator {
        build_generator(self)
    }

    pub fn reduced(&self) -> ReducedGenerator {
        build_reduced(self)
    }
}

/// Full `3n x 3n` generating matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    n: usize,
    matrix: DMatrix<f64>,
}

/// Stage a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Free,
    Complex,
    Released,
}

impl Generator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        3 * self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn stage(&self, state: usize) -> Stage {
        match state / self.n {
            0 => Stage::Free,
            1 => Stage::Complex,
            _ => Stage::Released,
        }
    }

    /// `E_1..E_n, ES_1..ES_n, E0_1..E0_n`.
    pub fn state_labels(&self) -> Vec<String> {
        let n = self.n;
        (0..3 * n)
            .map(|s| {
                let i = s % n + 1;
                match self.stage(s) {
                    Stage::Free => format!("E_{i}"),
                    Stage::Complex => format!("ES_{i}"),
                    Stage::Released => format!("E0_{i}"),
                }
            })
            .collect()
    }

    /// True for the fluorescent E0 states.
    pub fn on_mask(&self) -> Vec<bool> {
        (0..self.dim()).map(|s| s >= 2 * self.n).collect()
    }

    pub fn is_irreducible(&self) -> bool {
        is_strongly_connected(&self.matrix)
    }
}

/// The `2n x 2n` generator of the fast-reset system in which each E0
/// state is merged into the matching free-enzyme state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGenerator {
    n: usize,
    matrix: DMatrix<f64>,
}

impl ReducedGenerator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_irreducible(&self) -> bool {
        is_strongly_connected(&self.matrix)
    }
}

pub fn build_generator(spec: &NetworkSpec) -> Generator {
    let n = spec.n;
    let q_ab = spec.q_ab();
    let q_ba = spec.q_ba();
    let q_bc = spec.q_bc();
    let q_ca = spec.q_ca();
    let mut q = DMatrix::zeros(3 * n, 3 * n);
    q.view_mut((0, 0), (n, n)).copy_from(&(&spec.q_aa - &q_ab));
    q.view_mut((0, n), (n, n)).copy_from(&q_ab);
    q.view_mut((n, 0), (n, n)).copy_from(&q_ba);
    q.view_mut((n, n), (n, n)).copy_from(&(&spec.q_bb - (&q_ba + &q_bc)));
    q.view_mut((n, 2 * n), (n, n)).copy_from(&q_bc);
    q.view_mut((2 * n, 0), (n, n)).copy_from(&q_ca);
    q.view_mut((2 * n, 2 * n), (n, n)).copy_from(&(&spec.q_cc - &q_ca));
    Generator { n, matrix: q }
}

pub fn build_reduced(spec: &NetworkSpec) -> ReducedGenerator {
    let n = spec.n;
    let q_ab = spec.q_ab();
    let back = spec.q_ba() + spec.q_bc();
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    k.view_mut((0, 0), (n, n)).copy_from(&(&spec.q_aa - &q_ab));
    k.view_mut((0, n), (n, n)).copy_from(&q_ab);
    k.view_mut((n, 0), (n, n)).copy_from(&back);
    k.view_mut((n, n), (n, n)).copy_from(&(&spec.q_bb - &back));
    ReducedGenerator { n, matrix: k }
}

/// Strong connectivity of the directed graph formed by the positive
/// off-diagonal entries.
pub(crate) fn is_strongly_connected(m: &DMatrix<f64>) -> bool {
    let d = m.nrows();
    if d <= 1 {
        return true;
    }
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; d];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..d {
                let w = if forward { m[(u, v)] } else { m[(v, u)] };
                if v != u && w > 0.0 && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    };
    reach(true) == d && reach(false) == d
}
