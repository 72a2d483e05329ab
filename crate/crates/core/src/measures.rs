//! Diagnostics of the reduced dynamics: escape population, BLP
//! non-Markovianity, Bloch-sphere state pairs and the drive rotation axis.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PiecewiseEngine, ProtocolSpec, Snapshot};
use crate::error::{Error, Result};
use crate::kraus::ReducedState;
use crate::lindblad::LindbladEngine;
use crate::statespace::{self, CMatrix, CVector, DensityOperator, Ket, SpaceConfig, SpaceTag};

const TWO_PI: f64 = 2.0 * PI;
/// Tolerance on trace distances slightly outside `[0, 1]` from round-off.
const DISTANCE_SLACK: f64 = 1e-9;
/// Relative tolerance when matching sample times of two runs.
const TIME_MATCH_TOL: f64 = 1e-9;

/// `P_Z̄ = Σ_{n ≥ z} ⟨n|ρ|n⟩`.
pub fn escape_population(rho: &DensityOperator, level: usize) -> Result<f64> {
    if rho.tag() != SpaceTag::Oscillator {
        return Err(Error::WrongSpace { expected: SpaceTag::Oscillator, found: rho.tag() });
    }
    if level >= rho.dim() {
        return Err(Error::FockOutOfRange { index: level, n_max: rho.dim() - 1 });
    }
    Ok(rho.populations()[level..].iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Polar angle `theta ∈ [0, π]` and azimuth `phi ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAngles")]
pub struct BlochAngles {
    theta: f64,
    phi: f64,
}

#[derive(Deserialize)]
struct RawAngles {
    theta: f64,
    phi: f64,
}

impl TryFrom<RawAngles> for BlochAngles {
    type Error = Error;
    fn try_from(raw: RawAngles) -> Result<Self> {
        BlochAngles::new(raw.theta, raw.phi)
    }
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !(0.0..TWO_PI).contains(&phi) {
            return Err(Error::InvalidParameter(format!(
                "Bloch angles need θ ∈ [0, π] and φ ∈ [0, 2π), got ({theta}, {phi})"
            )));
        }
        Ok(BlochAngles { theta, phi })
    }

    /// Accepts any azimuth and reduces it modulo 2π.
    pub fn wrapped(theta: f64, phi: f64) -> Result<Self> {
        let mut phi = phi.rem_euclid(TWO_PI);
        if phi >= TWO_PI {
            phi = 0.0;
        }
        Self::new(theta, phi)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// `cos(θ/2)|0⟩ + sin(θ/2)e^{iφ}|1⟩`.
pub fn bloch_state(angles: BlochAngles, space: &SpaceConfig) -> Ket {
    let mut v = CVector::zeros(space.fock_dim());
    v[0] = C64::new((angles.theta / 2.0).cos(), 0.0);
    v[1] = C64::from_polar((angles.theta / 2.0).sin(), angles.phi);
    Ket::normalized(v, SpaceTag::Oscillator).expect("unit vector")
}

/// Named state pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairPreset {
    /// `(|0⟩, |z⟩)`: the single-pulse convention.
    Ground,
    /// `((|0⟩+|1⟩)/√2, |z⟩)`: the two-pulse convention.
    Balanced,
    /// `(|1⟩, |z⟩)`.
    Excited,
}

impl PairPreset {
    pub fn angles(self) -> BlochAngles {
        match self {
            PairPreset::Ground => BlochAngles { theta: 0.0, phi: 0.0 },
            PairPreset::Balanced => BlochAngles { theta: PI / 2.0, phi: 0.0 },
            PairPreset::Excited => BlochAngles { theta: PI, phi: 0.0 },
        }
    }
}

/// How the first state of a BLP pair is chosen; the second is the Zeno level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairConvention {
    Preset(PairPreset),
    Bloch(BlochAngles),
}

impl PairConvention {
    pub fn angles(self) -> BlochAngles {
        match self {
            PairConvention::Preset(p) => p.angles(),
            PairConvention::Bloch(a) => a,
        }
    }
}

/// Two oscillator states whose distinguishability is tracked.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePair {
    pub psi1: Ket,
    pub psi2: Ket,
}

impl StatePair {
    pub fn new(psi1: Ket, psi2: Ket) -> Result<Self> {
        for k in [&psi1, &psi2] {
            if k.tag() != SpaceTag::Oscillator {
                return Err(Error::WrongSpace { expected: SpaceTag::Oscillator, found: k.tag() });
            }
        }
        if psi1.dim() != psi2.dim() {
            return Err(Error::DimensionMismatch { expected: psi1.dim(), found: psi2.dim() });
        }
        Ok(StatePair { psi1, psi2 })
    }

    /// `(|ψ(θ, φ)⟩, |z⟩)`.
    pub fn bloch(angles: BlochAngles, level: usize, space: &SpaceConfig) -> Result<Self> {
        Self::new(bloch_state(angles, space), Ket::fock(space, level)?)
    }

    pub fn from_convention(convention: PairConvention, level: usize, space: &SpaceConfig) -> Result<Self> {
        Self::bloch(convention.angles(), level, space)
    }

    pub fn densities(&self) -> (DensityOperator, DensityOperator) {
        (DensityOperator::from_ket(&self.psi1), DensityOperator::from_ket(&self.psi2))
    }
}

/// Running BLP sum `Σ max(0, D_{k+1} − D_k)`.
#[derive(Clone, Debug, Default)]
pub struct BlpAccumulator {
    last: Option<f64>,
    total: f64,
}

impl BlpAccumulator {
    pub fn push(&mut self, d: f64) -> Result<()> {
        if !(-DISTANCE_SLACK..=1.0 + DISTANCE_SLACK).contains(&d) {
            return Err(Error::InvalidParameter(format!("trace distance {d} outside [0, 1]")));
        }
        if let Some(prev) = self.last {
            self.total += (d - prev).max(0.0);
        }
        self.last = Some(d);
        Ok(())
    }

    pub fn value(&self) -> f64 {
        self.total
    }
}

pub fn blp_from_distance_series(series: &[f64]) -> Result<f64> {
    let mut acc = BlpAccumulator::default();
    for &d in series {
        acc.push(d)?;
    }
    Ok(acc.value())
}

/// Trace distances of two runs at their shared sample times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DistanceSeries {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Sample indices that close a measurement interval.
    pub boundaries: Vec<usize>,
}

impl DistanceSeries {
    pub fn blp(&self) -> Result<f64> {
        blp_from_distance_series(&self.distances)
    }

    /// Minimum of the distance over each interval (the slow envelope under
    /// the fast intra-interval oscillation). The initial sample is excluded.
    pub fn lower_envelope(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.boundaries.len());
        let mut start = 1;
        for &b in &self.boundaries {
            let end = (b + 1).min(self.distances.len());
            if start < end {
                out.push(self.distances[start..end].iter().copied().fold(f64::INFINITY, f64::min));
            }
            start = end;
        }
        out
    }

    /// Maximum of the distance over each interval.
    pub fn upper_envelope(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.boundaries.len());
        let mut start = 1;
        for &b in &self.boundaries {
            let end = (b + 1).min(self.distances.len());
            if start < end {
                out.push(self.distances[start..end].iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
            start = end;
        }
        out
    }

    /// CSV with columns `time,trace_distance`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "trace_distance"])?;
        for (t, d) in self.times.iter().zip(&self.distances) {
            w.write_record([format!("{t:.11e}"), format!("{d:.11e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn matched(a: &Snapshot, b: &Snapshot) -> Result<()> {
    let scale = a.time.abs().max(1.0);
    if a.index != b.index || (a.time - b.time).abs() > TIME_MATCH_TOL * scale || a.boundary != b.boundary {
        return Err(Error::ScheduleMismatch(format!(
            "sample {} at t = {} vs sample {} at t = {}",
            a.index, a.time, b.index, b.time
        )));
    }
    Ok(())
}

/// Zips two sample streams into a distance series.
pub fn distance_series<A, B>(a: A, b: B) -> Result<DistanceSeries>
where
    A: IntoIterator<Item = Result<Snapshot>>,
    B: IntoIterator<Item = Result<Snapshot>>,
{
    let mut series = DistanceSeries::default();
    let mut a = a.into_iter();
    let mut b = b.into_iter();
    loop {
        match (a.next(), b.next()) {
            (None, None) => return Ok(series),
            (Some(x), Some(y)) => {
                let (x, y) = (x?, y?);
                matched(&x, &y)?;
                if x.boundary {
                    series.boundaries.push(series.distances.len());
                }
                series.times.push(x.time);
                series.distances.push(x.state.trace_distance(&y.state)?);
            }
            _ => return Err(Error::ScheduleMismatch("runs have different lengths".into())),
        }
    }
}

/// Distance series of a pair under the piecewise engine.
pub fn piecewise_distance_series(engine: &PiecewiseEngine, pair: &StatePair) -> Result<DistanceSeries> {
    let (r1, r2) = pair.densities();
    distance_series(engine.propagate(&r1)?, engine.propagate(&r2)?)
}

/// Distance series of a pair under the master equation.
pub fn lindblad_distance_series(engine: &LindbladEngine, pair: &StatePair) -> Result<DistanceSeries> {
    let (r1, r2) = pair.densities();
    distance_series(engine.propagate(&r1)?, engine.propagate(&r2)?)
}

/// BLP measure of `pair` for the piecewise protocol `spec`.
pub fn blp_measure(pair: &StatePair, spec: &ProtocolSpec) -> Result<f64> {
    let engine = PiecewiseEngine::new(spec)?;
    piecewise_distance_series(&engine, pair)?.blp()
}

/// BLP measure of `pair` for the master equation matching `spec`.
pub fn lindblad_blp(pair: &StatePair, spec: &ProtocolSpec) -> Result<f64> {
    let engine = LindbladEngine::from_spec(spec)?;
    lindblad_distance_series(&engine, pair)?.blp()
}

/// BLP values over a `(θ, φ)` grid, pair partner `|z⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochScan {
    pub theta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    /// `values[i][j]` at `(theta_grid[i], phi_grid[j])`.
    pub values: Vec<Vec<f64>>,
}

impl BlochScan {
    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> (usize, usize) {
        let mut best = (0, 0);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if better(v, self.values[best.0][best.1]) {
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Grid indices of the largest value (first in row-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        self.extreme(|v, b| v > b)
    }

    pub fn argmin(&self) -> (usize, usize) {
        self.extreme(|v, b| v < b)
    }

    pub fn angles(&self, (i, j): (usize, usize)) -> (f64, f64) {
        (self.theta_grid[i], self.phi_grid[j])
    }

    /// CSV with columns `theta,phi,n_blp`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "phi", "n_blp"])?;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([
                    format!("{:.11e}", self.theta_grid[i]),
                    format!("{:.11e}", self.phi_grid[j]),
                    format!("{v:.11e}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn pad(block: &CMatrix, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros((k, k));
    m.slice_mut(ndarray::s![..block.nrows(), ..block.ncols()]).assign(block);
    m
}

/// Scans `Ψ₁ = |ψ(θ, φ)⟩` against `Ψ₂ = |z⟩`.
///
/// The channel is linear, so every `|ψ⟩⟨ψ|` is a fixed combination of the
/// propagated `|0⟩⟨0|`, `|1⟩⟨1|`, `|+x⟩⟨+x|` and `|+y⟩⟨+y|`; four runs
/// replace one run per grid point.
pub fn bloch_scan(spec: &ProtocolSpec, theta_grid: &[f64], phi_grid: &[f64]) -> Result<BlochScan> {
    if theta_grid.is_empty() || phi_grid.is_empty() {
        return Err(Error::InvalidParameter("Bloch scan grids must be nonempty".into()));
    }
    let angles: Vec<Vec<BlochAngles>> = theta_grid
        .iter()
        .map(|&t| phi_grid.iter().map(|&p| BlochAngles::wrapped(t, p)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let engine = PiecewiseEngine::new(spec)?;
    let space = spec.space;
    let level = spec.zeno_level();
    let r = FRAC_1_SQRT_2;
    let basis = [
        Ket::fock(&space, 0)?,
        Ket::fock(&space, 1)?,
        bloch_state(BlochAngles { theta: PI / 2.0, phi: 0.0 }, &space),
        bloch_state(BlochAngles { theta: PI / 2.0, phi: PI / 2.0 }, &space),
    ];
    debug_assert!((basis[2].amplitudes()[1].re - r).abs() < 1e-15);
    let mut runs = basis
        .iter()
        .map(|k| engine.propagate(&DensityOperator::from_ket(k)))
        .collect::<Result<Vec<_>>>()?;
    let mut partner = engine.propagate(&DensityOperator::fock(&space, level)?)?;

    // weights of (P0, P1, X, Y) per grid point; the poles ignore φ, so
    // equal weight vectors are evaluated once
    let mut unique: Vec<[f64; 4]> = Vec::new();
    let slots: Vec<Vec<usize>> = angles
        .iter()
        .map(|row| {
            row.iter()
                .map(|a| {
                    let (c, s) = ((a.theta / 2.0).cos(), (a.theta / 2.0).sin());
                    let cs = if (c * s).abs() < 1e-12 { 0.0 } else { c * s };
                    let (cp, sp) = (cs * a.phi.cos(), cs * a.phi.sin());
                    let w = [c * c - cp - sp, s * s - cp - sp, 2.0 * cp, 2.0 * sp];
                    match unique.iter().position(|u| u == &w) {
                        Some(k) => k,
                        None => {
                            unique.push(w);
                            unique.len() - 1
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut acc = vec![BlpAccumulator::default(); unique.len()];

    loop {
        let next: Vec<Option<Result<Snapshot>>> = runs.iter_mut().map(|r| r.next()).collect();
        let other = partner.next();
        let Some(other) = other else {
            if next.iter().any(Option::is_some) {
                return Err(Error::ScheduleMismatch("runs have different lengths".into()));
            }
            break;
        };
        let other = other?;
        let snaps = next
            .into_iter()
            .map(|s| s.ok_or_else(|| Error::ScheduleMismatch("runs have different lengths".into()))?)
            .collect::<Result<Vec<_>>>()?;
        for s in &snaps {
            matched(s, &other)?;
        }
        let k = snaps.iter().map(|s| s.state.support()).chain([other.state.support()]).max().unwrap_or(1);
        let blocks: Vec<CMatrix> = snaps.iter().map(|s| pad(s.state.block(), k)).collect();
        let target = pad(other.state.block(), k);
        for (w, a) in unique.iter().zip(acc.iter_mut()) {
            let mut rho = &blocks[0] * C64::new(w[0], 0.0);
            for (b, &wb) in blocks.iter().zip(w).skip(1) {
                rho.scaled_add(C64::new(wb, 0.0), b);
            }
            a.push(statespace::trace_distance_matrices(&rho, &target)?)?;
        }
    }

    Ok(BlochScan {
        theta_grid: theta_grid.to_vec(),
        phi_grid: phi_grid.to_vec(),
        values: slots.iter().map(|row| row.iter().map(|&k| acc[k].value()).collect()).collect(),
    })
}

/// `(Re α, Im α, 0)/|α|`.
pub fn rotation_axis(alpha: C64) -> Result<[f64; 3]> {
    let norm = alpha.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("rotation axis undefined for α = 0".into()));
    }
    Ok([alpha.re / norm, alpha.im / norm, 0.0])
}

/// Bloch azimuth `φ_α + π/2` of the optimal pair member, in `[0, 2π)`.
pub fn optimal_phase(alpha: C64) -> Result<f64> {
    rotation_axis(alpha)?;
    Ok((alpha.arg() + PI / 2.0).rem_euclid(TWO_PI))
}

/// Reduced state helper used by sweep code: escape population of a block.
pub fn escape_of(state: &ReducedState, level: usize) -> f64 {
    state.escape_population(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tests::undriven_engine;
    use approx::assert_abs_diff_eq;

    fn space() -> SpaceConfig {
        SpaceConfig::new(6).unwrap()
    }

    #[test]
    fn escape_examples() {
        let sp = space();
        assert_eq!(escape_population(&DensityOperator::fock(&sp, 0).unwrap(), 2).unwrap(), 0.0);
        assert_abs_diff_eq!(escape_population(&DensityOperator::fock(&sp, 2).unwrap(), 2).unwrap(), 1.0);
        let rho = DensityOperator::diagonal(&sp, &[0.25, 0.25, 0.5]).unwrap();
        assert_abs_diff_eq!(escape_population(&rho, 2).unwrap(), 0.5, epsilon = 1e-15);
        assert!(escape_population(&rho, 7).is_err());
    }

    #[test]
    fn bloch_examples() {
        let sp = space();
        let k = bloch_state(BlochAngles::new(0.0, 0.0).unwrap(), &sp);
        assert_abs_diff_eq!(k.amplitudes()[0].re, 1.0);
        let k = bloch_state(BlochAngles::new(PI / 2.0, PI / 2.0).unwrap(), &sp);
        assert_abs_diff_eq!(k.amplitudes()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(k.amplitudes()[1].im, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(k.amplitudes()[1].re, 0.0, epsilon = 1e-15);
        let k = bloch_state(BlochAngles::new(PI, 0.0).unwrap(), &sp);
        assert_abs_diff_eq!(k.amplitudes()[1].norm(), 1.0, epsilon = 1e-15);
        assert!(BlochAngles::new(4.0, 0.0).is_err());
        assert!(BlochAngles::new(1.0, TWO_PI).is_err());
        assert_abs_diff_eq!(BlochAngles::wrapped(1.0, -PI / 2.0).unwrap().phi(), 1.5 * PI);
    }

    #[test]
    fn blp_series_examples() {
        assert_eq!(blp_from_distance_series(&[0.4; 5]).unwrap(), 0.0);
        assert_eq!(blp_from_distance_series(&[1.0, 0.8, 0.3, 0.1]).unwrap(), 0.0);
        assert_abs_diff_eq!(blp_from_distance_series(&[1.0, 0.5, 0.8, 0.6, 0.9]).unwrap(), 0.6, epsilon = 1e-15);
        assert!(blp_from_distance_series(&[0.5, 1.2]).is_err());
        assert!(blp_from_distance_series(&[-0.1]).is_err());
        assert_eq!(blp_from_distance_series(&[]).unwrap(), 0.0);
    }

    #[test]
    fn blp_additive_at_shared_endpoint() {
        let a = [0.9, 0.2, 0.7, 0.5];
        let b = [0.5, 0.8, 0.1, 0.4];
        let joined: Vec<f64> = a.iter().chain(&b[1..]).copied().collect();
        let sum = blp_from_distance_series(&a).unwrap() + blp_from_distance_series(&b).unwrap();
        assert_abs_diff_eq!(blp_from_distance_series(&joined).unwrap(), sum, epsilon = 1e-15);
    }

    #[test]
    fn rotation_axis_examples() {
        let [x, y, z] = rotation_axis(C64::new(0.3, 0.0)).unwrap();
        assert_eq!((x, y, z), (1.0, 0.0, 0.0));
        let [x, y, _] = rotation_axis(C64::new(0.0, 0.02)).unwrap();
        assert_abs_diff_eq!(x, 0.0);
        assert_abs_diff_eq!(y, 1.0);
        let v = rotation_axis(C64::new(-0.7, 2.1)).unwrap();
        assert_abs_diff_eq!(v.iter().map(|c| c * c).sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(rotation_axis(C64::new(0.0, 0.0)).is_err());
        assert_abs_diff_eq!(optimal_phase(C64::new(0.0, 0.01)).unwrap(), PI);
    }

    #[test]
    fn identical_pair_and_undriven_orthogonal_pair() {
        let sp = space();
        let engine = undriven_engine(sp, &[], 1.0, 4, 3);
        let same = StatePair::new(Ket::fock(&sp, 1).unwrap(), Ket::fock(&sp, 1).unwrap()).unwrap();
        assert_eq!(piecewise_distance_series(&engine, &same).unwrap().blp().unwrap(), 0.0);
        let ortho = StatePair::bloch(PairPreset::Ground.angles(), 2, &sp).unwrap();
        let series = piecewise_distance_series(&engine, &ortho).unwrap();
        assert!(series.distances.iter().all(|d| (d - 1.0).abs() < 1e-12));
        assert_eq!(series.blp().unwrap(), 0.0);
        assert_eq!(series.boundaries.len(), 4);
    }

    #[test]
    fn mismatched_schedules_rejected() {
        let sp = space();
        let a = undriven_engine(sp, &[], 1.0, 4, 3);
        let b = undriven_engine(sp, &[], 1.0, 4, 2);
        let rho = DensityOperator::fock(&sp, 0).unwrap();
        let err = distance_series(a.propagate(&rho).unwrap(), b.propagate(&rho).unwrap());
        assert!(matches!(err, Err(Error::ScheduleMismatch(_))));
    }

    fn small_spec(phi: f64) -> ProtocolSpec {
        let mut spec = ProtocolSpec::single_pulse(0.2, phi).with_space(SpaceConfig::new(16).unwrap()).unwrap();
        spec.intervals = Some(8);
        spec.sub_samples = 4;
        spec
    }

    /// Doubling the sampling density only adds sample points, so the sum of
    /// positive increments cannot shrink.
    #[test]
    fn refinement_never_decreases_blp() {
        for phi in [1.0, 2.0 * PI, 3.3] {
            let coarse = small_spec(phi);
            let fine = ProtocolSpec { sub_samples: 8, ..coarse.clone() };
            let pair = StatePair::bloch(PairPreset::Ground.angles(), 2, &coarse.space).unwrap();
            let a = blp_measure(&pair, &coarse).unwrap();
            let b = blp_measure(&pair, &fine).unwrap();
            assert!(b >= a - 1e-12, "φ = {phi}: {a} > {b}");
        }
    }

    #[test]
    fn scan_matches_direct_runs() {
        let spec = small_spec(2.0 * PI);
        let thetas = [0.0, 0.9, PI];
        let phis = [0.0, 1.2, 4.0];
        let scan = bloch_scan(&spec, &thetas, &phis).unwrap();
        for (i, &t) in thetas.iter().enumerate() {
            for (j, &p) in phis.iter().enumerate() {
                let pair = StatePair::bloch(BlochAngles::new(t, p).unwrap(), 2, &spec.space).unwrap();
                let direct = blp_measure(&pair, &spec).unwrap();
                assert_abs_diff_eq!(scan.values[i][j], direct, epsilon = 1e-9);
            }
        }
        let single = bloch_scan(&spec, &[0.5], &[0.5]).unwrap();
        assert_eq!(single.argmax(), single.argmin());
        assert!(bloch_scan(&spec, &[], &[0.0]).is_err());
    }

    #[test]
    fn envelopes_per_interval() {
        let series = DistanceSeries {
            times: (0..7).map(f64::from).collect(),
            distances: vec![1.0, 0.6, 0.9, 0.8, 0.5, 0.95, 0.7],
            boundaries: vec![3, 6],
        };
        assert_eq!(series.lower_envelope(), vec![0.6, 0.5]);
        assert_eq!(series.upper_envelope(), vec![0.9, 0.95]);
    }

    #[test]
    fn markovian_contrast() {
        let spec = ProtocolSpec::single_pulse(0.3, 2.0 * PI).with_space(SpaceConfig::new(24).unwrap()).unwrap();
        let pair = StatePair::bloch(PairPreset::Ground.angles(), 2, &spec.space).unwrap();
        assert!(lindblad_blp(&pair, &spec).unwrap() < 1e-6);
    }
}
