//! Piecewise dynamics: intervals of joint oscillator–meter evolution, each
//! closed by a destructive meter readout, with a fresh meter in `|h⟩`.
//!
//! One interval is the channel `ρ ↦ Σ_j K_j ρ K_j†` with `K_j = ⟨j|U(τ)|h⟩`.
//! The Hamiltonian is static, so a single eigendecomposition yields the
//! conditional operators for every sub-interval sampling time and is reused
//! for all intervals.

use std::f64::consts::PI;

use log::{debug, warn};
use ndarray::s;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kraus::{self, KrausSet, ReducedState};
use crate::model::{self, Frame, ModelParams, ZenoPulse};
use crate::statespace::{
    CMatrix, DensityOperator, HermitianPropagator, Ket, Meter, SpaceConfig, SpaceTag,
};

pub const TWO_PI: f64 = 2.0 * PI;
/// Default `|α|/Ω`.
pub const DEFAULT_DRIVE_RATIO: f64 = 0.005;
pub const DEFAULT_SUB_SAMPLES: usize = 20;
/// Zeno level used for escape diagnostics when no pulse is configured.
pub const DEFAULT_ZENO_LEVEL: usize = 2;

pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const TRACE_DRIFT_TOL: f64 = 1e-9;
/// Population in the top two Fock levels that triggers a truncation warning.
pub const TRUNCATION_WARN: f64 = 1e-6;
/// Population in the top Fock level that aborts a run.
pub const TRUNCATION_FAIL: f64 = 1e-3;

/// Timing of a protocol with `β·M = 2π` by default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Displacement per interval, `β = |α|τ`.
    pub beta: f64,
    pub intervals: usize,
    pub tau: f64,
    /// Drive amplitude; purely imaginary so that `−iατ = β` is real.
    pub alpha: C64,
    /// Zeno pulse strengths `ω_i = φ_i/τ`, in the order of the angles given.
    pub strengths: Vec<f64>,
    pub total_time: f64,
}

/// Derives the interval length, drive and pulse strengths.
///
/// With `intervals = None`, `M` is the integer nearest to `2π/β` and `β` is
/// re-derived as `2π/M` so that the total displacement is exactly 2π.
pub fn derive_schedule(
    beta: f64,
    intervals: Option<usize>,
    angles: &[f64],
    rabi: f64,
    drive_ratio: f64,
) -> Result<Schedule> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("β = {beta} must be positive")));
    }
    if !(rabi > 0.0) || !rabi.is_finite() {
        return Err(Error::InvalidParameter(format!("Ω = {rabi} must be positive")));
    }
    if !(drive_ratio > 0.0) || drive_ratio > model::MAX_DRIVE_RATIO {
        return Err(Error::InvalidParameter(format!(
            "drive ratio {drive_ratio} outside (0, {}]",
            model::MAX_DRIVE_RATIO
        )));
    }
    let (beta, intervals) = match intervals {
        Some(0) => return Err(Error::InvalidParameter("interval count must be at least 1".into())),
        Some(m) => (beta, m),
        None => {
            let m = ((TWO_PI / beta).round() as usize).max(1);
            let adjusted = TWO_PI / m as f64;
            debug!("β = {beta} → M = {m}, β adjusted to {adjusted}");
            (adjusted, m)
        }
    };
    let magnitude = drive_ratio * rabi;
    let tau = beta / magnitude;
    Ok(Schedule {
        beta,
        intervals,
        tau,
        alpha: C64::new(0.0, magnitude),
        strengths: angles.iter().map(|phi| phi / tau).collect(),
        total_time: intervals as f64 * tau,
    })
}

/// A Zeno pulse given by its Rabi angle per interval, `φ = ω_z τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseAngle {
    pub level: usize,
    pub angle: f64,
}

/// Every knob of one piecewise run.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub space: SpaceConfig,
    pub rabi: f64,
    pub drive_ratio: f64,
    pub frame: Frame,
    pub beta: f64,
    /// `None` selects `M = round(2π/β)`.
    pub intervals: Option<usize>,
    pub pulses: Vec<PulseAngle>,
    /// Samples per interval; the last one is the post-measurement state.
    pub sub_samples: usize,
    pub initial: DensityOperator,
    pub omega_ho: Option<f64>,
    pub omega_meter: Option<f64>,
}

impl ProtocolSpec {
    /// Defaults: n_max = 80, Ω = 1, `|α|/Ω` = 0.005, resonant frame, 20
    /// samples per interval, initial state `|0⟩`.
    pub fn new(beta: f64, pulses: Vec<PulseAngle>) -> Self {
        let space = SpaceConfig::default();
        ProtocolSpec {
            space,
            rabi: 1.0,
            drive_ratio: DEFAULT_DRIVE_RATIO,
            frame: Frame::Resonant,
            beta,
            intervals: None,
            pulses,
            sub_samples: DEFAULT_SUB_SAMPLES,
            initial: DensityOperator::fock(&space, 0).expect("vacuum"),
            omega_ho: None,
            omega_meter: None,
        }
    }

    /// Single Zeno pulse on `|2⟩`.
    pub fn single_pulse(beta: f64, phi2: f64) -> Self {
        Self::new(beta, vec![PulseAngle { level: 2, angle: phi2 }])
    }

    /// Pulses on `|2⟩` and `|1⟩`.
    pub fn two_pulse(beta: f64, phi2: f64, phi1: f64) -> Self {
        Self::new(
            beta,
            vec![PulseAngle { level: 2, angle: phi2 }, PulseAngle { level: 1, angle: phi1 }],
        )
    }

    /// Changes the truncation; the initial state must be reset afterwards if
    /// it was built for another space.
    pub fn with_space(mut self, space: SpaceConfig) -> Result<Self> {
        let populations = self.initial.populations();
        self.space = space;
        if self.initial.dim() != space.fock_dim() {
            let n = populations.iter().position(|p| *p > 0.5).unwrap_or(0);
            self.initial = DensityOperator::fock(&space, n)?;
        }
        Ok(self)
    }

    pub fn with_initial(mut self, initial: DensityOperator) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_initial_ket(self, ket: &Ket) -> Self {
        self.with_initial(DensityOperator::from_ket(ket))
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let angles: Vec<f64> = self.pulses.iter().map(|p| p.angle).collect();
        derive_schedule(self.beta, self.intervals, &angles, self.rabi, self.drive_ratio)
    }

    pub fn model(&self) -> Result<ModelParams> {
        let schedule = self.schedule()?;
        let params = ModelParams {
            rabi: self.rabi,
            alpha: schedule.alpha,
            pulses: self
                .pulses
                .iter()
                .zip(&schedule.strengths)
                .map(|(p, &strength)| ZenoPulse { level: p.level, strength })
                .collect(),
            frame: self.frame,
            omega_ho: self.omega_ho,
            omega_meter: self.omega_meter,
        };
        params.validate(&self.space)?;
        Ok(params)
    }

    /// Highest configured Zeno level; escape is measured from it upwards.
    pub fn zeno_level(&self) -> usize {
        self.pulses.iter().map(|p| p.level).max().unwrap_or(DEFAULT_ZENO_LEVEL)
    }
}

/// `(cos φ/2, sin φ/2)`: amplitudes of `|h,z⟩` and `|+,z⟩` after one interval
/// of a resonant Zeno pulse started in `|h,z⟩`.
pub fn rabi_closed_form(phi: f64) -> (f64, f64) {
    ((phi / 2.0).cos(), (phi / 2.0).sin())
}

/// `K_j = ⟨j|U|h⟩` for j = h, g, e.
pub fn conditional_step_operators(u: &CMatrix, space: &SpaceConfig) -> Result<[CMatrix; 3]> {
    if u.nrows() != space.dim() || u.ncols() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: u.nrows() });
    }
    let h_cols = u.slice(s![.., 0..space.fock_dim()]).to_owned();
    let ops = split_meter_rows(&h_cols, space);
    check_completeness(&ops)?;
    Ok(ops)
}

fn split_meter_rows(h_cols: &CMatrix, space: &SpaceConfig) -> [CMatrix; 3] {
    let f = space.fock_dim();
    Meter::ALL.map(|m| {
        let base = m.index() * f;
        h_cols.slice(s![base..base + f, ..]).to_owned()
    })
}

fn check_completeness(ops: &[CMatrix]) -> Result<()> {
    let deviation = kraus::completeness_deviation(ops);
    if deviation > COMPLETENESS_TOL {
        Err(Error::Completeness { deviation })
    } else {
        Ok(())
    }
}

/// One sampled reduced state of a propagation.
#[derive(Clone, Debug)]
pub struct Snapshot {
    /// Position in the sample sequence; 0 is the initial state.
    pub index: usize,
    pub time: f64,
    /// Completed measurement intervals at this time, counting a boundary
    /// sample as completed.
    pub interval: usize,
    /// Post-measurement sample.
    pub boundary: bool,
    pub state: ReducedState,
}

/// Precomputed channel of one parameter point.
#[derive(Clone, Debug)]
pub struct PiecewiseEngine {
    space: SpaceConfig,
    schedule: Schedule,
    zeno_level: usize,
    /// `steps[s]` maps the interval-start state to sample `s + 1`.
    steps: Vec<KrausSet>,
    interval_ops: [CMatrix; 3],
}

impl PiecewiseEngine {
    pub fn new(spec: &ProtocolSpec) -> Result<Self> {
        let schedule = spec.schedule()?;
        let params = spec.model()?;
        Self::from_model(&params, spec.space, schedule, spec.sub_samples)
    }

    /// Engine for explicit model parameters; `schedule` supplies τ and M,
    /// pulse strengths are taken from `params`.
    pub fn from_model(
        params: &ModelParams,
        space: SpaceConfig,
        schedule: Schedule,
        sub_samples: usize,
    ) -> Result<Self> {
        if sub_samples == 0 {
            return Err(Error::InvalidParameter("sub_samples must be at least 1".into()));
        }
        if !(schedule.tau > 0.0) || schedule.intervals == 0 {
            return Err(Error::InvalidParameter("schedule needs τ > 0 and M ≥ 1".into()));
        }
        let h = model::total_hamiltonian(params, &space)?;
        let propagator = HermitianPropagator::new(&h)?;

        let shifts = model::frame_shifts(params, &space);

        let f = space.fock_dim();
        let mut steps = Vec::with_capacity(sub_samples);
        let mut interval_ops = None;
        for s in 1..=sub_samples {
            let t = s as f64 / sub_samples as f64 * schedule.tau;
            let h_cols = propagator.columns(t, 0..f);
            let mut ops = split_meter_rows(&h_cols, &space);
            // undo the frame term on |h,z⟩: e^{+iCt}
            for (n, &q) in shifts.iter().enumerate() {
                let phase = C64::from_polar(1.0, q * t);
                ops[0].row_mut(n).mapv_inplace(|c| c * phase);
            }
            check_completeness(&ops)?;
            steps.push(KrausSet::from_dense(&ops));
            if s == sub_samples {
                interval_ops = Some(ops);
            }
        }

        Ok(PiecewiseEngine {
            space,
            schedule,
            zeno_level: params.pulses.iter().map(|p| p.level).max().unwrap_or(DEFAULT_ZENO_LEVEL),
            steps,
            interval_ops: interval_ops.expect("at least one sample"),
        })
    }

    pub fn space(&self) -> &SpaceConfig {
        &self.space
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn sub_samples(&self) -> usize {
        self.steps.len()
    }

    pub fn zeno_level(&self) -> usize {
        self.zeno_level
    }

    /// Dense conditional operators of a full interval, frame phase included.
    pub fn interval_operators(&self) -> &[CMatrix; 3] {
        &self.interval_ops
    }

    /// One full interval applied to `rho`.
    pub fn apply_interval(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let state = ReducedState::from_density(rho)?;
        Ok(self.steps.last().expect("steps").apply(&state).to_density())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let per = self.steps.len();
        (0..=self.schedule.intervals * per).map(|k| self.time_of(k)).collect()
    }

    fn time_of(&self, k: usize) -> f64 {
        let per = self.steps.len();
        k as f64 / per as f64 * self.schedule.tau
    }

    /// Streams every sample, starting with the initial state.
    pub fn propagate(&self, initial: &DensityOperator) -> Result<Propagation<'_>> {
        self.start(initial, false)
    }

    /// Streams the initial state and the post-measurement states only.
    pub fn propagate_boundaries(&self, initial: &DensityOperator) -> Result<Propagation<'_>> {
        self.start(initial, true)
    }

    fn start(&self, initial: &DensityOperator, boundaries_only: bool) -> Result<Propagation<'_>> {
        if initial.dim() != self.space.fock_dim() {
            return Err(Error::DimensionMismatch { expected: self.space.fock_dim(), found: initial.dim() });
        }
        Ok(Propagation {
            engine: self,
            current: ReducedState::from_density(initial)?,
            interval: 0,
            sub: 0,
            emitted_initial: false,
            boundaries_only,
            warned: false,
            done: false,
        })
    }

    /// Runs to completion, recording every sample.
    pub fn run(&self, initial: &DensityOperator) -> Result<Trajectory> {
        Trajectory::collect(self.propagate(initial)?, self.zeno_level)
    }

    /// Post-measurement state after the last interval.
    pub fn final_state(&self, initial: &DensityOperator) -> Result<ReducedState> {
        let mut last = None;
        for snap in self.propagate_boundaries(initial)? {
            last = Some(snap?.state);
        }
        Ok(last.expect("initial sample"))
    }
}

/// Iterator over the samples of a piecewise run.
pub struct Propagation<'a> {
    engine: &'a PiecewiseEngine,
    /// State at the start of the current interval.
    current: ReducedState,
    interval: usize,
    sub: usize,
    emitted_initial: bool,
    boundaries_only: bool,
    warned: bool,
    done: bool,
}

impl Propagation<'_> {
    fn check_boundary(&mut self, state: &ReducedState) -> Result<()> {
        let drift = (state.trace() - 1.0).abs();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift { drift, interval: self.interval });
        }
        let n_max = self.engine.space.n_max();
        let top = state.population(n_max);
        if top > TRUNCATION_FAIL {
            return Err(Error::Truncation { population: top });
        }
        let top_two = top + state.population(n_max - 1);
        if top_two > TRUNCATION_WARN && !self.warned {
            warn!(
                "population {top_two:.3e} in the top two Fock levels after interval {}; increase n_max",
                self.interval
            );
            self.warned = true;
        }
        Ok(())
    }
}

impl Iterator for Propagation<'_> {
    type Item = Result<Snapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let per = self.engine.steps.len();
        if !self.emitted_initial {
            self.emitted_initial = true;
            return Some(Ok(Snapshot {
                index: 0,
                time: 0.0,
                interval: 0,
                boundary: false,
                state: self.current.clone(),
            }));
        }
        if self.interval >= self.engine.schedule.intervals {
            self.done = true;
            return None;
        }
        if self.boundaries_only {
            self.sub = per - 1;
        }
        let state = self.engine.steps[self.sub].apply(&self.current);
        let k = self.interval * per + self.sub + 1;
        let boundary = self.sub + 1 == per;
        let snapshot_interval = if boundary { self.interval + 1 } else { self.interval };
        if boundary {
            if let Err(e) = self.check_boundary(&state) {
                self.done = true;
                return Some(Err(e));
            }
            self.current = state.clone();
            self.interval += 1;
            self.sub = 0;
        } else {
            self.sub += 1;
        }
        Some(Ok(Snapshot {
            index: k,
            time: self.engine.time_of(k),
            interval: snapshot_interval,
            boundary,
            state,
        }))
    }
}

/// Recorded reduced states of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    states: Vec<ReducedState>,
    /// Indices of post-measurement (or interval-end) samples.
    pub interval_boundaries: Vec<usize>,
    zeno_level: usize,
}

impl Trajectory {
    pub(crate) fn from_parts(
        sample_times: Vec<f64>,
        states: Vec<ReducedState>,
        interval_boundaries: Vec<usize>,
        zeno_level: usize,
    ) -> Self {
        Trajectory { sample_times, states, interval_boundaries, zeno_level }
    }

    fn collect(samples: Propagation<'_>, zeno_level: usize) -> Result<Self> {
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut boundaries = Vec::new();
        for snap in samples {
            let snap = snap?;
            if snap.boundary {
                boundaries.push(states.len());
            }
            times.push(snap.time);
            states.push(snap.state);
        }
        Ok(Trajectory::from_parts(times, states, boundaries, zeno_level))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn zeno_level(&self) -> usize {
        self.zeno_level
    }

    pub fn reduced(&self, i: usize) -> &ReducedState {
        &self.states[i]
    }

    pub fn reduced_states(&self) -> &[ReducedState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> DensityOperator {
        self.states[i].to_density()
    }

    pub fn final_state(&self) -> &ReducedState {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn linear_entropy_series(&self) -> Vec<f64> {
        self.states.iter().map(ReducedState::linear_entropy).collect()
    }

    pub fn escape_series(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.escape_population(self.zeno_level)).collect()
    }

    pub fn final_linear_entropy(&self) -> f64 {
        self.final_state().linear_entropy()
    }

    pub fn final_escape(&self) -> f64 {
        self.final_state().escape_population(self.zeno_level)
    }
}

/// Builds the engine for `spec` and propagates `spec.initial`.
pub fn run_piecewise(spec: &ProtocolSpec) -> Result<Trajectory> {
    PiecewiseEngine::new(spec)?.run(&spec.initial)
}

/// `ρ_HO ⊗ |h⟩⟨h|`, conjugated by `U`, meter traced out: the reference route.
pub fn exact_interval_map(
    u: &CMatrix,
    rho: &DensityOperator,
    space: &SpaceConfig,
) -> Result<DensityOperator> {
    use crate::statespace::{dagger, embed_with_meter, partial_trace_matrix};
    let big = embed_with_meter(rho, &Ket::meter(Meter::H), space)?;
    let evolved = u.dot(big.matrix()).dot(&dagger(u));
    Ok(DensityOperator::from_raw(partial_trace_matrix(&evolved, space)?, SpaceTag::Oscillator))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::statespace::{max_abs_diff, unitary_from_hamiltonian, ZERO};
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_rounding_and_timing() {
        let s = derive_schedule(0.025, None, &[], 1.0, 0.005).unwrap();
        // 2π/0.025 = 251.33
        assert_eq!(s.intervals, 251);
        assert_abs_diff_eq!(s.beta * s.intervals as f64, TWO_PI, epsilon = 1e-12);
        assert_abs_diff_eq!(s.total_time, s.intervals as f64 * s.tau);

        let s = derive_schedule(0.025, Some(100), &[TWO_PI, 0.0], 1.0, 0.005).unwrap();
        assert_abs_diff_eq!(s.tau, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.strengths[0], TWO_PI / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.strengths[0], 1.2566, epsilon = 1e-4);
        assert_eq!(s.strengths[1], 0.0);
        assert_eq!(s.alpha.re, 0.0);
        assert_abs_diff_eq!(s.alpha.im, 0.005);

        assert!(derive_schedule(0.025, None, &[], 1.0, 0.2).is_err());
        assert!(derive_schedule(-1.0, None, &[], 1.0, 0.005).is_err());
        assert!(derive_schedule(0.1, Some(0), &[], 1.0, 0.005).is_err());
    }

    #[test]
    fn rabi_closed_form_values() {
        assert_eq!(rabi_closed_form(0.0), (1.0, 0.0));
        let (c, s) = rabi_closed_form(PI);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 1.0);
        let (c, s) = rabi_closed_form(PI / 2.0);
        assert_abs_diff_eq!(c, 0.70711, epsilon = 1e-5);
        assert_abs_diff_eq!(s, 0.70711, epsilon = 1e-5);
    }

    #[test]
    fn identity_propagator_gives_trivial_kraus() {
        let sp = SpaceConfig::new(4).unwrap();
        let ops = conditional_step_operators(&CMatrix::eye(sp.dim()), &sp).unwrap();
        assert_eq!(ops[0], CMatrix::eye(sp.fock_dim()));
        assert!(ops[1].iter().chain(ops[2].iter()).all(|c| *c == ZERO));
    }

    #[test]
    fn conditional_operators_reject_non_unitary() {
        let sp = SpaceConfig::new(4).unwrap();
        let u = CMatrix::eye(sp.dim()) * C64::new(0.5, 0.0);
        assert!(matches!(conditional_step_operators(&u, &sp), Err(Error::Completeness { .. })));
    }

    #[test]
    fn kraus_map_equals_reference_route() {
        let sp = SpaceConfig::new(5).unwrap();
        let n = sp.dim();
        let a = CMatrix::from_shape_fn((n, n), |(i, j)| {
            C64::new(((i * 13 + j * 7) % 17) as f64 / 17.0 - 0.5, ((i * 5 + j * 11) % 19) as f64 / 19.0 - 0.5)
        });
        let h = &a + &crate::statespace::dagger(&a);
        let u = unitary_from_hamiltonian(&h, 0.9).unwrap();
        let ops = conditional_step_operators(&u, &sp).unwrap();
        let mut v = crate::statespace::CVector::zeros(sp.fock_dim());
        for (k, x) in v.iter_mut().enumerate() {
            *x = C64::new(1.0 / (k + 1) as f64, 0.3 * k as f64);
        }
        let rho = DensityOperator::from_ket(&Ket::normalized(v, SpaceTag::Oscillator).unwrap());
        let via_kraus = kraus::apply_dense(&ops, rho.matrix());
        let reference = exact_interval_map(&u, &rho, &sp).unwrap();
        assert!(max_abs_diff(&via_kraus, reference.matrix()) < 1e-12);
    }

    /// A quarter of the drive cycle on a small space.
    fn small_spec(beta: f64, phi: f64) -> ProtocolSpec {
        let mut spec = ProtocolSpec::single_pulse(beta, phi).with_space(SpaceConfig::new(12).unwrap()).unwrap();
        spec.intervals = Some((TWO_PI / beta / 4.0).round() as usize);
        spec
    }

    pub(crate) fn undriven_engine(
        sp: SpaceConfig,
        pulses: &[(usize, f64)],
        tau: f64,
        intervals: usize,
        sub_samples: usize,
    ) -> PiecewiseEngine {
        let params = ModelParams {
            pulses: pulses.iter().map(|&(level, phi)| ZenoPulse { level, strength: phi / tau }).collect(),
            ..Default::default()
        };
        let schedule = Schedule {
            beta: 0.0,
            intervals,
            tau,
            alpha: ZERO,
            strengths: params.pulses.iter().map(|p| p.strength).collect(),
            total_time: intervals as f64 * tau,
        };
        PiecewiseEngine::from_model(&params, sp, schedule, sub_samples).unwrap()
    }

    #[test]
    fn constant_without_drive_or_pulses() {
        let sp = SpaceConfig::new(6).unwrap();
        let engine = undriven_engine(sp, &[], 5.0, 4, 3);
        let mut v = crate::statespace::CVector::zeros(sp.fock_dim());
        v[0] = C64::new(0.6, 0.0);
        v[3] = C64::new(0.0, 0.8);
        let rho = DensityOperator::from_ket(&Ket::normalized(v, SpaceTag::Oscillator).unwrap());
        let traj = engine.run(&rho).unwrap();
        assert_eq!(traj.len(), 13);
        for i in 0..traj.len() {
            assert!(max_abs_diff(traj.state(i).matrix(), rho.matrix()) < 1e-13);
        }
    }

    #[test]
    fn full_rabi_cycle_returns_population() {
        let sp = SpaceConfig::new(6).unwrap();
        let engine = undriven_engine(sp, &[(2, TWO_PI)], 5.0, 1, 10);
        let fin = engine.final_state(&DensityOperator::fock(&sp, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(fin.population(2), 1.0, epsilon = 1e-12);
        // |h,z⟩ ↦ −|h,z⟩: coherence with |0⟩ flips sign
        let mut v = crate::statespace::CVector::zeros(sp.fock_dim());
        v[0] = C64::new(1.0, 0.0);
        v[2] = C64::new(1.0, 0.0);
        let rho = DensityOperator::from_ket(&Ket::normalized(v, SpaceTag::Oscillator).unwrap());
        let out = engine.apply_interval(&rho).unwrap();
        assert_abs_diff_eq!(out.matrix()[[0, 2]].re, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.matrix()[[0, 2]].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn half_rabi_cycle_splits_population() {
        let sp = SpaceConfig::new(6).unwrap();
        // φ = π moves everything to |+,z⟩, half of which is |e,z−1⟩
        let engine = undriven_engine(sp, &[(2, PI)], 3.0, 1, 4);
        let fin = engine.final_state(&DensityOperator::fock(&sp, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(fin.population(2), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fin.population(1), 0.5, epsilon = 1e-12);
        // φ = π/2: sin² = ½ reaches |+,z⟩
        let engine = undriven_engine(sp, &[(2, PI / 2.0)], 3.0, 1, 4);
        let fin = engine.final_state(&DensityOperator::fock(&sp, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(fin.population(2), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(fin.population(1), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn states_below_the_pulse_are_stationary() {
        let sp = SpaceConfig::new(8).unwrap();
        let z = 4;
        let engine = undriven_engine(sp, &[(z, 1.7)], 2.0, 3, 5);
        let mut v = crate::statespace::CVector::zeros(sp.fock_dim());
        for n in 0..=z - 2 {
            v[n] = C64::new(1.0, n as f64 * 0.2);
        }
        let rho = DensityOperator::from_ket(&Ket::normalized(v, SpaceTag::Oscillator).unwrap());
        let traj = engine.run(&rho).unwrap();
        for i in 0..traj.len() {
            assert!(max_abs_diff(traj.state(i).matrix(), rho.matrix()) < 1e-13);
        }
    }

    #[test]
    fn rabi_amplitudes_match_closed_form() {
        let sp = SpaceConfig::new(5).unwrap();
        let phi = 2.3;
        let tau = 4.0;
        let params = ModelParams {
            pulses: vec![ZenoPulse { level: 2, strength: phi / tau }],
            ..Default::default()
        };
        let u = crate::statespace::unitary_from_hamiltonian(&model::total_hamiltonian(&params, &sp).unwrap(), tau).unwrap();
        let (c, s) = rabi_closed_form(phi);
        let hz = sp.index(Meter::H, 2);
        let plus = model::dressed_ket(model::DressedSign::Plus, 2, &sp).unwrap();
        let amp_h = u[[hz, hz]];
        let amp_plus: C64 = plus.amplitudes().iter().enumerate().map(|(i, p)| p.conj() * u[[i, hz]]).sum();
        // common phase e^{-iΩ√z τ/2}, and −i on the |+,z⟩ amplitude
        let global = C64::from_polar(1.0, -model::dressed_shift(1.0, 2) * tau);
        assert_abs_diff_eq!((amp_h - global * c).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((amp_plus - global * C64::new(0.0, -s)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn driven_run_without_pulses() {
        let sp = SpaceConfig::new(6).unwrap();
        let mut spec = ProtocolSpec::new(0.1, vec![]).with_space(sp).unwrap();
        spec.intervals = Some(3);
        let engine = PiecewiseEngine::new(&spec).unwrap();
        assert_eq!(engine.sub_samples(), DEFAULT_SUB_SAMPLES);
        let traj = engine.run(&spec.initial).unwrap();
        assert_eq!(traj.len(), 1 + spec.schedule().unwrap().intervals * DEFAULT_SUB_SAMPLES);
        assert!(traj.sample_times.windows(2).all(|w| w[1] > w[0]));
        assert_abs_diff_eq!(*traj.sample_times.last().unwrap(), spec.schedule().unwrap().total_time);
        assert_eq!(traj.interval_boundaries.len(), spec.schedule().unwrap().intervals);
        // the h sector is closed without pulses, so the state stays pure
        assert!(traj.final_linear_entropy() < 1e-10);
    }

    #[test]
    fn boundary_stream_matches_full_stream() {
        let spec = small_spec(0.2, 1.3);
        let engine = PiecewiseEngine::new(&spec).unwrap();
        let full = engine.run(&spec.initial).unwrap();
        let fin = engine.final_state(&spec.initial).unwrap();
        assert!(max_abs_diff(&fin.to_matrix(), &full.final_state().to_matrix()) < 1e-14);
    }

    #[test]
    fn trace_and_positivity_along_run() {
        let spec = small_spec(0.3, 2.0);
        let traj = run_piecewise(&spec).unwrap();
        for (i, s) in traj.reduced_states().iter().enumerate().step_by(7) {
            assert_abs_diff_eq!(s.trace(), 1.0, epsilon = 1e-9);
            let rho = traj.state(i);
            assert!(crate::statespace::min_eigenvalue(rho.matrix()).unwrap() > -1e-10);
        }
    }
}
