//! Operator-sum kernels on the oscillator space.
//!
//! States of the driven oscillator stay concentrated on low Fock levels for
//! most of the parameter space, and every Kraus operator of the protocol is
//! numerically banded. [`ReducedState`] keeps only the occupied leading block
//! of ρ and [`BandedOp`] keeps one contiguous row segment per column, so an
//! application costs O(nnz · support) instead of O(n_max³).

use ndarray::s;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::statespace::{
    self, support_len, CMatrix, DensityOperator, SpaceTag, ZERO,
};

/// Matrix elements below this magnitude are treated as zero when building a
/// [`BandedOp`]; it sits at the round-off floor of the eigendecomposition
/// that produces the operators.
pub const DROP_EPS: f64 = 1e-14;

/// Column-banded sparse operator.
#[derive(Clone, Debug)]
pub struct BandedOp {
    rows: usize,
    /// Per column: first stored row and the dense segment from there.
    columns: Vec<(usize, Vec<C64>)>,
    /// `reach[k]`: number of leading output rows touched by input columns `0..k`.
    reach: Vec<usize>,
}

impl BandedOp {
    pub fn from_dense(m: &CMatrix) -> Self {
        let (rows, cols) = m.dim();
        let mut columns = Vec::with_capacity(cols);
        for c in 0..cols {
            let col = m.column(c);
            let first = (0..rows).find(|&r| col[r].norm() > DROP_EPS);
            match first {
                None => columns.push((0, Vec::new())),
                Some(first) => {
                    let last = (0..rows).rev().find(|&r| col[r].norm() > DROP_EPS).unwrap();
                    columns.push((first, (first..=last).map(|r| col[r]).collect()));
                }
            }
        }
        let mut reach = vec![0; cols + 1];
        for c in 0..cols {
            let (start, ref seg) = columns[c];
            let end = if seg.is_empty() { 0 } else { start + seg.len() };
            reach[c + 1] = reach[c].max(end);
        }
        BandedOp { rows, columns, reach }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn reach(&self, support: usize) -> usize {
        self.reach[support.min(self.columns.len())]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros((self.rows, self.columns.len()));
        for (c, (start, seg)) in self.columns.iter().enumerate() {
            for (i, v) in seg.iter().enumerate() {
                m[[start + i, c]] = *v;
            }
        }
        m
    }

    /// Accumulates `conj(K ρ K†)` into `out_conj` (row-major, `ld` columns),
    /// with ρ given as its leading `k×k` block.
    fn sandwich_conj_into(&self, rho: &[C64], k: usize, out_conj: &mut [C64], ld: usize, scratch: &mut Vec<C64>) {
        let r = self.reach(k);
        if r == 0 {
            return;
        }
        // y = K[:, ..k] ρ, stored transposed as yt (k × r).
        scratch.clear();
        scratch.resize(r * k, ZERO);
        let y = &mut scratch[..];
        for c in 0..k {
            let (start, seg) = &self.columns[c];
            let rho_row = &rho[c * k..(c + 1) * k];
            for (i, kv) in seg.iter().enumerate() {
                let row = start + i;
                let dst = &mut y[row * k..(row + 1) * k];
                for (d, rv) in dst.iter_mut().zip(rho_row) {
                    *d += kv * rv;
                }
            }
        }
        // (K ρ K†)ᵀ[b, a] = Σ_c conj(K[b, c]) y[a, c]; for Hermitian output
        // the transpose equals the conjugate.
        let mut yt = vec![ZERO; k * r];
        for a in 0..r {
            for c in 0..k {
                yt[c * r + a] = y[a * k + c];
            }
        }
        for c in 0..k {
            let (start, seg) = &self.columns[c];
            let src = &yt[c * r..(c + 1) * r];
            for (i, kv) in seg.iter().enumerate() {
                let b = start + i;
                let kc = kv.conj();
                let dst = &mut out_conj[b * ld..b * ld + r];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += kc * s;
                }
            }
        }
    }
}

/// A reduced oscillator state stored as its occupied leading block.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    block: CMatrix,
    fock_dim: usize,
}

impl ReducedState {
    pub fn from_density(rho: &DensityOperator) -> Result<Self> {
        if rho.tag() != SpaceTag::Oscillator {
            return Err(Error::WrongSpace { expected: SpaceTag::Oscillator, found: rho.tag() });
        }
        Ok(Self::from_matrix(rho.matrix()))
    }

    pub(crate) fn from_matrix(m: &CMatrix) -> Self {
        let k = support_len(m);
        ReducedState { block: m.slice(s![..k, ..k]).to_owned(), fock_dim: m.nrows() }
    }

    pub fn support(&self) -> usize {
        self.block.nrows()
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn block(&self) -> &CMatrix {
        &self.block
    }

    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros((self.fock_dim, self.fock_dim));
        let k = self.support();
        m.slice_mut(s![..k, ..k]).assign(&self.block);
        m
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_raw(self.to_matrix(), SpaceTag::Oscillator)
    }

    pub fn trace(&self) -> f64 {
        self.block.diag().iter().map(|c| c.re).sum()
    }

    pub fn population(&self, n: usize) -> f64 {
        if n < self.support() {
            self.block[[n, n]].re
        } else {
            0.0
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.fock_dim).map(|n| self.population(n)).collect()
    }

    pub fn linear_entropy(&self) -> f64 {
        (1.0 - statespace::purity(&self.block)).max(0.0)
    }

    /// Total population on levels `n ≥ level`.
    pub fn escape_population(&self, level: usize) -> f64 {
        (level..self.support()).map(|n| self.block[[n, n]].re).sum::<f64>().clamp(0.0, 1.0)
    }

    pub fn trace_distance(&self, other: &ReducedState) -> Result<f64> {
        if self.fock_dim != other.fock_dim {
            return Err(Error::DimensionMismatch { expected: self.fock_dim, found: other.fock_dim });
        }
        let k = self.support().max(other.support());
        let pad = |b: &CMatrix| {
            let mut m = CMatrix::zeros((k, k));
            m.slice_mut(s![..b.nrows(), ..b.ncols()]).assign(b);
            m
        };
        statespace::trace_distance_matrices(&pad(&self.block), &pad(&other.block))
    }
}

/// A complete set of Kraus operators on the oscillator space.
#[derive(Clone, Debug)]
pub struct KrausSet {
    ops: Vec<BandedOp>,
}

impl KrausSet {
    pub fn from_dense(ops: &[CMatrix]) -> Self {
        KrausSet { ops: ops.iter().map(BandedOp::from_dense).collect() }
    }

    pub fn ops(&self) -> &[BandedOp] {
        &self.ops
    }

    /// `max |Σ K†K − 1|` elementwise.
    pub fn completeness_deviation(&self) -> f64 {
        let dense: Vec<CMatrix> = self.ops.iter().map(BandedOp::to_dense).collect();
        completeness_deviation(&dense)
    }

    /// `ρ ↦ Σ_j K_j ρ K_j†`.
    pub fn apply(&self, state: &ReducedState) -> ReducedState {
        let k = state.support();
        let r = self.ops.iter().map(|op| op.reach(k)).max().unwrap_or(0).max(1);
        let rho = state.block.as_standard_layout();
        let rho = rho.as_slice().expect("standard layout");
        let mut out = vec![ZERO; r * r];
        let mut scratch = Vec::new();
        for op in &self.ops {
            op.sandwich_conj_into(rho, k, &mut out, r, &mut scratch);
        }
        let full = CMatrix::from_shape_vec((r, r), out)
            .expect("shape")
            .mapv(|c| c.conj());
        let mut next = ReducedState::from_matrix(&full);
        next.fock_dim = state.fock_dim;
        next
    }
}

pub fn completeness_deviation(ops: &[CMatrix]) -> f64 {
    let Some(first) = ops.first() else { return f64::INFINITY };
    let mut sum = CMatrix::zeros((first.ncols(), first.ncols()));
    for k in ops {
        sum += &statespace::dagger(k).dot(k);
    }
    statespace::max_abs_diff(&sum, &CMatrix::eye(first.ncols()))
}

/// Dense reference for `Σ_j K_j ρ K_j†`.
pub fn apply_dense(ops: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(rho.dim());
    for k in ops {
        out += &k.dot(rho).dot(&statespace::dagger(k));
    }
    out
}
