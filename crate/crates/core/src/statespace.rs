//! Truncated oscillator ⊗ three-level meter space.
//!
//! Bipartite basis ordering is meter-major: index = meter · (n_max + 1) + n,
//! with meter order h = 0, g = 1, e = 2. Everything that serializes or
//! compares operators relies on this ordering.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eigh, EigValsh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const NEGATIVITY_TOL: f64 = 1e-10;
/// Hermiticity required of a validated density operator.
pub const STATE_HERMITIAN_TOL: f64 = 1e-12;
pub const KET_NORM_TOL: f64 = 1e-12;

/// Population below which a Fock level counts as unoccupied when states are
/// restricted to their leading block.
pub const SUPPORT_EPS: f64 = 1e-26;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Meter {
    H,
    G,
    E,
}

impl Meter {
    pub const ALL: [Meter; 3] = [Meter::H, Meter::G, Meter::E];

    pub fn index(self) -> usize {
        match self {
            Meter::H => 0,
            Meter::G => 1,
            Meter::E => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Meter> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceTag {
    Oscillator,
    Meter,
    Bipartite,
}

/// Truncated Fock space `|0⟩..|n_max⟩` paired with the meter levels h, g, e.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SpaceConfig {
    n_max: usize,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    n_max: usize,
}

impl TryFrom<RawSpace> for SpaceConfig {
    type Error = Error;
    fn try_from(raw: RawSpace) -> Result<Self> {
        SpaceConfig::new(raw.n_max)
    }
}

impl From<SpaceConfig> for RawSpace {
    fn from(s: SpaceConfig) -> Self {
        RawSpace { n_max: s.n_max }
    }
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig { n_max: Self::DEFAULT_N_MAX }
    }
}

impl SpaceConfig {
    pub const DEFAULT_N_MAX: usize = 80;
    pub const MIN_N_MAX: usize = 3;
    pub const METER_LEVELS: usize = 3;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < Self::MIN_N_MAX {
            return Err(Error::InvalidParameter(format!(
                "n_max = {n_max} below the minimum of {}",
                Self::MIN_N_MAX
            )));
        }
        Ok(SpaceConfig { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        Self::METER_LEVELS * self.fock_dim()
    }

    pub fn dim_of(&self, tag: SpaceTag) -> usize {
        match tag {
            SpaceTag::Oscillator => self.fock_dim(),
            SpaceTag::Meter => Self::METER_LEVELS,
            SpaceTag::Bipartite => self.dim(),
        }
    }

    pub fn index(&self, meter: Meter, n: usize) -> usize {
        debug_assert!(n <= self.n_max);
        meter.index() * self.fock_dim() + n
    }

    pub fn decode(&self, index: usize) -> Option<(Meter, usize)> {
        let meter = Meter::from_index(index / self.fock_dim())?;
        Some((meter, index % self.fock_dim()))
    }

    pub fn check_fock(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            Err(Error::FockOutOfRange { index: n, n_max: self.n_max })
        } else {
            Ok(())
        }
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
    tag: SpaceTag,
}

impl Ket {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn normalized(amplitudes: CVector, tag: SpaceTag) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("ket has zero or non-finite norm".into()));
        }
        Ok(Ket { amplitudes: amplitudes.mapv(|a| a / norm), tag })
    }

    pub fn fock(space: &SpaceConfig, n: usize) -> Result<Self> {
        space.check_fock(n)?;
        let mut v = CVector::zeros(space.fock_dim());
        v[n] = ONE;
        Ok(Ket { amplitudes: v, tag: SpaceTag::Oscillator })
    }

    pub fn meter(level: Meter) -> Self {
        let mut v = CVector::zeros(SpaceConfig::METER_LEVELS);
        v[level.index()] = ONE;
        Ket { amplitudes: v, tag: SpaceTag::Meter }
    }

    pub fn product(space: &SpaceConfig, level: Meter, n: usize) -> Result<Self> {
        space.check_fock(n)?;
        let mut v = CVector::zeros(space.dim());
        v[space.index(level, n)] = ONE;
        Ok(Ket { amplitudes: v, tag: SpaceTag::Bipartite })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn projector(&self) -> CMatrix {
        let n = self.dim();
        Array2::from_shape_fn((n, n), |(i, j)| self.amplitudes[i] * self.amplitudes[j].conj())
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    tag: SpaceTag,
}

impl DensityOperator {
    /// Validates hermiticity, trace and positivity.
    pub fn new(matrix: CMatrix, tag: SpaceTag) -> Result<Self> {
        check_square(&matrix)?;
        let dev = hermiticity_deviation(&matrix);
        if dev > STATE_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = min_eigenvalue(&matrix)?;
        if min_eig < -NEGATIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(DensityOperator { matrix, tag })
    }

    /// Skips validation; callers guarantee the invariants structurally.
    pub(crate) fn from_raw(matrix: CMatrix, tag: SpaceTag) -> Self {
        DensityOperator { matrix, tag }
    }

    pub fn from_ket(ket: &Ket) -> Self {
        DensityOperator { matrix: ket.projector(), tag: ket.tag }
    }

    pub fn fock(space: &SpaceConfig, n: usize) -> Result<Self> {
        Ok(Self::from_ket(&Ket::fock(space, n)?))
    }

    /// Diagonal oscillator state; `populations` is zero-padded to the Fock dimension.
    pub fn diagonal(space: &SpaceConfig, populations: &[f64]) -> Result<Self> {
        if populations.len() > space.fock_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.fock_dim(),
                found: populations.len(),
            });
        }
        let mut m = CMatrix::zeros((space.fock_dim(), space.fock_dim()));
        for (n, &p) in populations.iter().enumerate() {
            m[[n, n]] = C64::new(p, 0.0);
        }
        Self::new(m, SpaceTag::Oscillator)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        trace(&self.matrix)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|c| c.re).collect()
    }

    pub fn purity(&self) -> f64 {
        purity(&self.matrix)
    }
}

pub(crate) fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() })
    } else {
        Ok(())
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().iter().sum()
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|c| c.conj())
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `Tr ρ²` for Hermitian ρ, i.e. the squared Frobenius norm.
pub(crate) fn purity(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum()
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    let mut h = m.clone();
    let n = m.nrows();
    for i in 0..n {
        h[[i, i]] = C64::new(m[[i, i]].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            h[[i, j]] = v;
            h[[j, i]] = v.conj();
        }
    }
    h
}

pub(crate) fn eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(hermitize(m).eigvalsh(UPLO::Upper)?.to_vec())
}

pub(crate) fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Index of the highest Fock level whose population exceeds [`SUPPORT_EPS`], plus one.
pub(crate) fn support_len(m: &CMatrix) -> usize {
    let d = m.nrows();
    (0..d).rev().find(|&n| m[[n, n]].re > SUPPORT_EPS).map_or(1, |n| n + 1)
}

/// `ρ_HO ⊗ |m⟩⟨m|` in meter-major ordering.
pub fn embed_with_meter(
    rho: &DensityOperator,
    meter: &Ket,
    space: &SpaceConfig,
) -> Result<DensityOperator> {
    if rho.tag != SpaceTag::Oscillator {
        return Err(Error::WrongSpace { expected: SpaceTag::Oscillator, found: rho.tag });
    }
    if meter.tag != SpaceTag::Meter {
        return Err(Error::WrongSpace { expected: SpaceTag::Meter, found: meter.tag });
    }
    if rho.dim() != space.fock_dim() {
        return Err(Error::DimensionMismatch { expected: space.fock_dim(), found: rho.dim() });
    }
    let f = space.fock_dim();
    let mut out = CMatrix::zeros((space.dim(), space.dim()));
    for a in 0..SpaceConfig::METER_LEVELS {
        for b in 0..SpaceConfig::METER_LEVELS {
            let w = meter.amplitudes[a] * meter.amplitudes[b].conj();
            if w == ZERO {
                continue;
            }
            let mut block = out.slice_mut(s![a * f..(a + 1) * f, b * f..(b + 1) * f]);
            block.zip_mut_with(&rho.matrix, |o, r| *o = r * w);
        }
    }
    Ok(DensityOperator { matrix: out, tag: SpaceTag::Bipartite })
}

/// Partial trace over the meter of any bipartite square matrix.
pub fn partial_trace_matrix(m: &CMatrix, space: &SpaceConfig) -> Result<CMatrix> {
    check_square(m)?;
    if m.nrows() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: m.nrows() });
    }
    let f = space.fock_dim();
    let mut out = CMatrix::zeros((f, f));
    for a in 0..SpaceConfig::METER_LEVELS {
        out += &m.slice(s![a * f..(a + 1) * f, a * f..(a + 1) * f]);
    }
    Ok(out)
}

pub fn partial_trace_meter(rho: &DensityOperator, space: &SpaceConfig) -> Result<DensityOperator> {
    if rho.tag != SpaceTag::Bipartite {
        return Err(Error::WrongSpace { expected: SpaceTag::Bipartite, found: rho.tag });
    }
    Ok(DensityOperator {
        matrix: partial_trace_matrix(&rho.matrix, space)?,
        tag: SpaceTag::Oscillator,
    })
}

/// Spectral decomposition of a static Hamiltonian; `U(t) = V e^{-iEt} V†`
/// for any `t` from a single diagonalization.
#[derive(Clone, Debug)]
pub struct HermitianPropagator {
    energies: Array1<f64>,
    vectors: CMatrix,
}

impl HermitianPropagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        check_square(h)?;
        let dev = hermiticity_deviation(h);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let (energies, vectors) = hermitize(h).eigh(UPLO::Upper)?;
        Ok(HermitianPropagator { energies, vectors })
    }

    pub fn energies(&self) -> &Array1<f64> {
        &self.energies
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        let phased = self.phased_vectors(t);
        phased.dot(&dagger(&self.vectors))
    }

    /// Columns `cols` of `U(t)`.
    pub fn columns(&self, t: f64, cols: std::ops::Range<usize>) -> CMatrix {
        let phased = self.phased_vectors(t);
        let right = self.vectors.slice(s![cols, ..]).mapv(|c| c.conj()).reversed_axes();
        phased.dot(&right)
    }

    fn phased_vectors(&self, t: f64) -> CMatrix {
        let phases: Vec<C64> = self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
        let mut v = self.vectors.clone();
        for mut row in v.rows_mut() {
            for (x, p) in row.iter_mut().zip(&phases) {
                *x *= p;
            }
        }
        v
    }
}

/// `e^{-iHt}` via Hermitian eigendecomposition.
pub fn unitary_from_hamiltonian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(HermitianPropagator::new(h)?.unitary(t))
}

/// `½ Σ|λ_i|` over the spectrum of `a − b`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.tag != b.tag {
        return Err(Error::WrongSpace { expected: a.tag, found: b.tag });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    trace_distance_matrices(&a.matrix, &b.matrix)
}

pub(crate) fn trace_distance_matrices(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let k = support_len(a).max(support_len(b));
    let diff = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        let x = a[[i, j]] - b[[i, j]];
        let y = (a[[j, i]] - b[[j, i]]).conj();
        (x + y) * 0.5
    });
    let d = 0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// `S_L = 1 − Tr ρ²`.
pub fn linear_entropy(rho: &DensityOperator) -> f64 {
    (1.0 - rho.purity()).max(0.0)
}
