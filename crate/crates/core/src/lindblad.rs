//! Continuous-measurement limit of the protocol: first-order Kraus operators,
//! the Lindblad master equation for a single Zeno pulse and a fixed-step RK4
//! integrator for it.
//!
//! The master equation only carries the drive in its commutator; the
//! Jaynes–Cummings coupling has been absorbed into the rates.

use ndarray::s;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ProtocolSpec, Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::kraus::ReducedState;
use crate::statespace::{self, CMatrix, DensityOperator, SpaceConfig, SpaceTag, I, SUPPORT_EPS, ZERO};

/// Default step as a fraction of τ.
pub const DEFAULT_STEPS_PER_INTERVAL: usize = 50;
/// Default recorded samples per interval.
pub const DEFAULT_SAMPLES_PER_INTERVAL: usize = 10;
pub const LINDBLAD_TRACE_TOL: f64 = 1e-8;
pub const LINDBLAD_NEGATIVITY_TOL: f64 = 1e-8;
/// Largest accepted `dt·κ·max γ`.
pub const MAX_RATE_STEP: f64 = 0.1;
/// Largest accepted `dt/τ`.
pub const MAX_STEP_FRACTION: f64 = 0.1;

/// Dimensionless rates of one Zeno pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub gamma_a: f64,
    pub gamma_pi_star: f64,
    pub gamma_pi: f64,
}

/// `γ_A = ½sin²(φ/2)`, `γ_Π* = 2sin²(φ/4)`, `γ_Π = γ_Π*² + γ_A`.
pub fn rates_from_angle(phi: f64) -> DecayRates {
    // half-angle forms are exact at multiples of π
    let gamma_a = 0.25 * (1.0 - phi.cos());
    let gamma_pi_star = 1.0 - (phi / 2.0).cos();
    DecayRates { gamma_a, gamma_pi_star, gamma_pi: gamma_pi_star * gamma_pi_star + gamma_a }
}

/// Parameters of the master equation with jump `A = |z−1⟩⟨z|` and dephasing
/// `Π = |z⟩⟨z|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladParams {
    /// Measurement rate `κ = 1/τ`.
    pub kappa: f64,
    pub gamma_a: f64,
    pub gamma_pi: f64,
    /// Only enters the dynamics through `gamma_pi`.
    pub gamma_pi_star: f64,
    pub level: usize,
    pub alpha: C64,
}

impl LindbladParams {
    pub fn new(kappa: f64, rates: DecayRates, level: usize, alpha: C64) -> Result<Self> {
        let p = LindbladParams {
            kappa,
            gamma_a: rates.gamma_a,
            gamma_pi: rates.gamma_pi,
            gamma_pi_star: rates.gamma_pi_star,
            level,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    /// Rates of a pulse with Rabi angle `phi` repeated every `tau`.
    pub fn from_angle(phi: f64, tau: f64, level: usize, alpha: C64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("τ must be positive, got {tau}")));
        }
        Self::new(1.0 / tau, rates_from_angle(phi), level, alpha)
    }

    /// Parameters matching a single-pulse protocol.
    pub fn from_spec(spec: &ProtocolSpec) -> Result<Self> {
        let [pulse] = spec.pulses.as_slice() else {
            return Err(Error::InvalidParameter(format!(
                "the master equation covers exactly one Zeno pulse, got {}",
                spec.pulses.len()
            )));
        };
        let schedule = spec.schedule()?;
        let p = Self::from_angle(pulse.angle, schedule.tau, pulse.level, schedule.alpha)?;
        spec.space.check_fock(p.level)?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("κ must be positive, got {}", self.kappa)));
        }
        let rates = [self.gamma_a, self.gamma_pi, self.gamma_pi_star];
        if rates.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidParameter(format!("rates must be non-negative, got {rates:?}")));
        }
        let expected = self.gamma_pi_star * self.gamma_pi_star + self.gamma_a;
        if (self.gamma_pi - expected).abs() > 1e-12 * expected.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "γ_Π = {} differs from γ_Π*² + γ_A = {expected}",
                self.gamma_pi
            )));
        }
        if self.level == 0 {
            return Err(Error::InvalidParameter("the Zeno level must be at least 1".into()));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.kappa
    }

    fn max_rate(&self) -> f64 {
        self.kappa * self.gamma_a.max(self.gamma_pi)
    }
}

/// `w_hh = 1 − (1 − cos φ/2)Π`, `w_gh = sin(φ/2)/√2 Π`, `w_eh = sin(φ/2)/√2 A`,
/// on the oscillator space.
pub fn first_order_kraus(phi: f64, level: usize, space: &SpaceConfig) -> Result<[CMatrix; 3]> {
    space.check_fock(level)?;
    if level == 0 {
        return Err(Error::InvalidParameter("the Zeno level must be at least 1".into()));
    }
    let f = space.fock_dim();
    let mut w_hh = CMatrix::eye(f);
    w_hh[[level, level]] = C64::new((phi / 2.0).cos(), 0.0);
    let amp = C64::new((phi / 2.0).sin() / std::f64::consts::SQRT_2, 0.0);
    let mut w_gh = CMatrix::zeros((f, f));
    w_gh[[level, level]] = amp;
    let mut w_eh = CMatrix::zeros((f, f));
    w_eh[[level - 1, level]] = amp;
    Ok([w_hh, w_gh, w_eh])
}

/// `Σ_j w_j U ρ U† w_j†`.
pub fn kraus_step(rho: &CMatrix, ops: &[CMatrix], u_cs: &CMatrix) -> CMatrix {
    let moved = u_cs.dot(rho).dot(&statespace::dagger(u_cs));
    let mut out = CMatrix::zeros(rho.raw_dim());
    for w in ops {
        out += &w.dot(&moved).dot(&statespace::dagger(w));
    }
    out
}

fn dissipate(rho: &CMatrix, params: &LindbladParams, out: &mut CMatrix) {
    let z = params.level;
    let k = rho.nrows();
    if z >= k {
        return;
    }
    let half_total = 0.5 * params.kappa * (params.gamma_a + params.gamma_pi);
    for j in 0..k {
        out[[z, j]] -= rho[[z, j]] * half_total;
        out[[j, z]] -= rho[[j, z]] * half_total;
    }
    let pz = rho[[z, z]];
    out[[z, z]] += pz * (params.kappa * params.gamma_pi);
    out[[z - 1, z - 1]] += pz * (params.kappa * params.gamma_a);
}

/// `−i[H_CS, ρ] + κγ_A D[A]ρ + κγ_Π D[Π]ρ` with a dense drive Hamiltonian.
pub fn lindblad_rhs(rho: &CMatrix, params: &LindbladParams, h_cs: &CMatrix) -> CMatrix {
    let comm = h_cs.dot(rho) - rho.dot(h_cs);
    let mut out = comm.mapv(|c| -I * c);
    dissipate(rho, params, &mut out);
    out
}

/// Same as [`lindblad_rhs`] for `H_CS = αa† + α*a`, exploiting its band
/// structure; `rho` may be a leading block of the full operator.
fn banded_rhs(rho: &CMatrix, params: &LindbladParams, sqrt_n: &[f64], out: &mut CMatrix) {
    let k = rho.nrows();
    let a = params.alpha;
    let ac = a.conj();
    for i in 0..k {
        for j in 0..k {
            let mut hr = ZERO;
            if i > 0 {
                hr += a * sqrt_n[i] * rho[[i - 1, j]];
            }
            if i + 1 < k {
                hr += ac * sqrt_n[i + 1] * rho[[i + 1, j]];
            }
            let mut rh = ZERO;
            if j > 0 {
                rh += rho[[i, j - 1]] * ac * sqrt_n[j];
            }
            if j + 1 < k {
                rh += rho[[i, j + 1]] * a * sqrt_n[j + 1];
            }
            let d = hr - rh;
            out[[i, j]] = C64::new(d.im, -d.re);
        }
    }
    dissipate(rho, params, out);
}

/// Fixed-step integrator for the master equation.
#[derive(Clone, Debug)]
pub struct LindbladEngine {
    params: LindbladParams,
    fock_dim: usize,
    dt: f64,
    steps: usize,
    /// Steps between recorded samples.
    stride: usize,
    sqrt_n: Vec<f64>,
}

impl LindbladEngine {
    /// Integrates over `total_time` with a step no longer than `dt`, recording
    /// about ten samples per `τ`.
    pub fn new(params: LindbladParams, space: &SpaceConfig, total_time: f64, dt: f64) -> Result<Self> {
        params.validate()?;
        space.check_fock(params.level)?;
        if !(total_time > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need T > 0 and dt > 0, got T = {total_time}, dt = {dt}"
            )));
        }
        let steps = (total_time / dt - 1e-9).ceil().max(1.0) as usize;
        let dt = total_time / steps as f64;
        let target = params.tau() / DEFAULT_SAMPLES_PER_INTERVAL as f64;
        let stride = ((target / dt).round() as usize).max(1);
        Self::build(params, space, dt, steps, stride)
    }

    /// Engine for a single-pulse protocol: `M` intervals, `dt = τ/50`, ten
    /// samples per interval.
    pub fn from_spec(spec: &ProtocolSpec) -> Result<Self> {
        let params = LindbladParams::from_spec(spec)?;
        let schedule = spec.schedule()?;
        let per = DEFAULT_STEPS_PER_INTERVAL;
        Self::build(
            params,
            &spec.space,
            schedule.tau / per as f64,
            per * schedule.intervals,
            per / DEFAULT_SAMPLES_PER_INTERVAL,
        )
    }

    fn build(params: LindbladParams, space: &SpaceConfig, dt: f64, steps: usize, stride: usize) -> Result<Self> {
        let tau = params.tau();
        if dt > MAX_STEP_FRACTION * tau * (1.0 + 1e-12) {
            return Err(Error::Stability(format!("dt = {dt} exceeds τ/10 = {}", tau / 10.0)));
        }
        let rate_step = dt * params.max_rate();
        if rate_step > MAX_RATE_STEP {
            return Err(Error::Stability(format!("dt·κ·max γ = {rate_step:.3} exceeds {MAX_RATE_STEP}")));
        }
        let fock_dim = space.fock_dim();
        let sqrt_n = (0..=fock_dim).map(|n| (n as f64).sqrt()).collect();
        Ok(LindbladEngine { params, fock_dim, dt, steps, stride, sqrt_n })
    }

    pub fn params(&self) -> &LindbladParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Streams recorded samples, starting with the initial state.
    pub fn propagate(&self, initial: &DensityOperator) -> Result<LindbladPropagation<'_>> {
        if initial.tag() != SpaceTag::Oscillator || initial.dim() != self.fock_dim {
            return Err(Error::DimensionMismatch { expected: self.fock_dim, found: initial.dim() });
        }
        Ok(LindbladPropagation {
            engine: self,
            rho: initial.matrix().clone(),
            step: 0,
            sample: 0,
            started: false,
        })
    }

    pub fn run(&self, initial: &DensityOperator) -> Result<Trajectory> {
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut boundaries = Vec::new();
        for snap in self.propagate(initial)? {
            let snap = snap?;
            if snap.boundary {
                boundaries.push(states.len());
            }
            times.push(snap.time);
            states.push(snap.state);
        }
        Ok(Trajectory::from_parts(times, states, boundaries, self.params.level))
    }

    pub fn final_state(&self, initial: &DensityOperator) -> Result<ReducedState> {
        let mut last = None;
        for snap in self.propagate(initial)? {
            last = Some(snap?.state);
        }
        Ok(last.expect("the initial sample is always emitted"))
    }

    /// One RK4 step on the populated leading block.
    fn step(&self, rho: &mut CMatrix) {
        let f = self.fock_dim;
        let k = (statespace::support_len(rho) + 4).min(f);
        let block = rho.slice(s![..k, ..k]).to_owned();
        let dt = self.dt;
        let mut k1 = CMatrix::zeros((k, k));
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        banded_rhs(&block, &self.params, &self.sqrt_n, &mut k1);
        banded_rhs(&(&block + &(&k1 * (0.5 * dt))), &self.params, &self.sqrt_n, &mut k2);
        banded_rhs(&(&block + &(&k2 * (0.5 * dt))), &self.params, &self.sqrt_n, &mut k3);
        banded_rhs(&(&block + &(&k3 * dt)), &self.params, &self.sqrt_n, &mut k4);
        let next = &block + &((&k1 + &(&k2 * 2.0) + &(&k3 * 2.0) + &k4) * (dt / 6.0));
        rho.slice_mut(s![..k, ..k]).assign(&statespace::hermitize(&next));
    }

    fn is_boundary(&self, step: usize) -> bool {
        let per = self.params.tau() / self.dt;
        let intervals = step as f64 / per;
        (intervals - intervals.round()).abs() * per < 0.5 && intervals.round() >= 1.0
    }
}

/// Iterator over the recorded samples of a master-equation run.
pub struct LindbladPropagation<'a> {
    engine: &'a LindbladEngine,
    rho: CMatrix,
    step: usize,
    sample: usize,
    started: bool,
}

impl Iterator for LindbladPropagation<'_> {
    type Item = Result<Snapshot>;

    fn next(&mut self) -> Option<Self::Item> {
        let e = self.engine;
        if !self.started {
            self.started = true;
            return Some(Ok(self.snapshot(false)));
        }
        if self.step >= e.steps {
            return None;
        }
        let target = (self.step + e.stride).min(e.steps);
        let mut boundary = false;
        while self.step < target {
            e.step(&mut self.rho);
            self.step += 1;
            boundary |= e.is_boundary(self.step);
        }
        self.sample += 1;
        let time = self.step as f64 * e.dt;
        let drift = (statespace::trace(&self.rho).re - 1.0).abs();
        if drift > LINDBLAD_TRACE_TOL {
            self.step = e.steps;
            let interval = (time * e.params.kappa).floor() as usize;
            return Some(Err(Error::TraceDrift { drift, interval }));
        }
        if boundary || self.step == e.steps {
            let k = statespace::support_len(&self.rho);
            let block = self.rho.slice(s![..k, ..k]).to_owned();
            match statespace::min_eigenvalue(&block) {
                Ok(lambda) if lambda < -LINDBLAD_NEGATIVITY_TOL => {
                    self.step = e.steps;
                    return Some(Err(Error::Positivity { eigenvalue: lambda, time }));
                }
                Err(err) => {
                    self.step = e.steps;
                    return Some(Err(err));
                }
                Ok(_) => {}
            }
        }
        Some(Ok(self.snapshot(boundary)))
    }
}

impl LindbladPropagation<'_> {
    fn snapshot(&self, boundary: bool) -> Snapshot {
        let time = self.step as f64 * self.engine.dt;
        Snapshot {
            index: self.sample,
            time,
            interval: (time * self.engine.params.kappa + 1e-9).floor() as usize,
            boundary,
            state: ReducedState::from_matrix(&self.rho),
        }
    }
}

/// Integrates the master equation from `rho0` over `total_time`.
pub fn propagate_lindblad(
    rho0: &DensityOperator,
    params: &LindbladParams,
    total_time: f64,
    dt: f64,
) -> Result<Trajectory> {
    let space = SpaceConfig::new(rho0.dim().saturating_sub(1))?;
    LindbladEngine::new(params.clone(), &space, total_time, dt)?.run(rho0)
}

/// Support threshold re-exported for callers building blocks by hand.
pub const fn support_eps() -> f64 {
    SUPPORT_EPS
}

#[cfg(test)]
mod tests {
    use crate::model;
    use super::*;
    use crate::dynamics::tests::undriven_engine;
    use crate::statespace::max_abs_diff;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn space() -> SpaceConfig {
        SpaceConfig::new(6).unwrap()
    }

    #[test]
    fn rates_table() {
        let r = rates_from_angle(0.0);
        assert_eq!((r.gamma_a, r.gamma_pi_star, r.gamma_pi), (0.0, 0.0, 0.0));
        let r = rates_from_angle(PI);
        assert_abs_diff_eq!(r.gamma_a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.gamma_pi_star, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.gamma_pi, 1.5, epsilon = 1e-15);
        let r = rates_from_angle(2.0 * PI);
        assert_abs_diff_eq!(r.gamma_a, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.gamma_pi_star, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.gamma_pi, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn rate_periodicity() {
        for phi in [0.1, 0.7, 2.3, 4.0] {
            let a = rates_from_angle(phi);
            let b = rates_from_angle(phi + 4.0 * PI);
            let c = rates_from_angle(phi + 2.0 * PI);
            assert_abs_diff_eq!(a.gamma_pi_star, b.gamma_pi_star, epsilon = 1e-12);
            assert_abs_diff_eq!(a.gamma_a, c.gamma_a, epsilon = 1e-12);
        }
    }

    #[test]
    fn params_consistency() {
        let mut r = rates_from_angle(1.1);
        assert!(LindbladParams::new(0.2, r, 2, ZERO).is_ok());
        r.gamma_pi += 1e-6;
        assert!(LindbladParams::new(0.2, r, 2, ZERO).is_err());
        assert!(LindbladParams::new(0.0, rates_from_angle(1.0), 2, ZERO).is_err());
        let two = ProtocolSpec::two_pulse(0.1, 1.0, 1.0);
        assert!(LindbladParams::from_spec(&two).is_err());
    }

    #[test]
    fn first_order_operators() {
        let sp = space();
        let [hh, gh, eh] = first_order_kraus(0.0, 2, &sp).unwrap();
        assert!(max_abs_diff(&hh, &CMatrix::eye(sp.fock_dim())) < 1e-15);
        assert!(gh.iter().chain(eh.iter()).all(|c| c.norm() < 1e-15));

        let [hh, gh, eh] = first_order_kraus(2.0 * PI, 2, &sp).unwrap();
        let mut expected = CMatrix::eye(sp.fock_dim());
        expected[[2, 2]] = C64::new(-1.0, 0.0);
        assert!(max_abs_diff(&hh, &expected) < 1e-15);
        assert!(gh.iter().chain(eh.iter()).all(|c| c.norm() < 1e-15));

        let ops = first_order_kraus(1.3, 2, &sp).unwrap();
        assert!(crate::kraus::completeness_deviation(&ops) < 1e-12);
    }

    #[test]
    fn kraus_step_identity_and_projector() {
        let sp = space();
        let f = sp.fock_dim();
        let rho = DensityOperator::diagonal(&sp, &[0.2, 0.3, 0.5]).unwrap();
        let id = CMatrix::eye(f);
        let out = kraus_step(rho.matrix(), std::slice::from_ref(&id), &id);
        assert!(max_abs_diff(&out, rho.matrix()) < 1e-15);

        let phi = 0.9;
        let ops = first_order_kraus(phi, 2, &sp).unwrap();
        let two = DensityOperator::fock(&sp, 2).unwrap();
        let out = kraus_step(two.matrix(), &ops, &id);
        let moved = 0.5 * (phi / 2.0).sin().powi(2);
        assert_abs_diff_eq!(out[[2, 2]].re, 1.0 - moved, epsilon = 1e-15);
        assert_abs_diff_eq!(out[[1, 1]].re, moved, epsilon = 1e-15);
        assert_abs_diff_eq!(statespace::trace(&out).re, 1.0, epsilon = 1e-12);
    }

    /// Without drive and in the resonant frame the first-order map is the
    /// exact interval channel.
    #[test]
    fn first_order_matches_exact_interval() {
        let sp = space();
        let id = CMatrix::eye(sp.fock_dim());
        let rho = crate::testutil::random_density(&sp, 11);
        for phi in [0.3, PI, 2.0 * PI, 5.0] {
            let tau = 3.7;
            let engine = undriven_engine(sp, &[(2, phi)], tau, 1, 1);
            let exact = crate::kraus::apply_dense(engine.interval_operators(), rho.matrix());
            let approx = kraus_step(rho.matrix(), &first_order_kraus(phi, 2, &sp).unwrap(), &id);
            assert!(max_abs_diff(&exact, &approx) < 1e-10, "φ = {phi}");
        }
    }

    #[test]
    fn rhs_examples() {
        let sp = space();
        let f = sp.fock_dim();
        let p = LindbladParams::from_angle(1.7, 2.0, 2, ZERO).unwrap();
        let h0 = CMatrix::zeros((f, f));
        let vac = DensityOperator::fock(&sp, 0).unwrap();
        assert!(lindblad_rhs(vac.matrix(), &p, &h0).iter().all(|c| c.norm() == 0.0));

        let two = DensityOperator::fock(&sp, 2).unwrap();
        let d = lindblad_rhs(two.matrix(), &p, &h0);
        assert_abs_diff_eq!(d[[2, 2]].re, -p.kappa * p.gamma_a, epsilon = 1e-15);
        assert_abs_diff_eq!(d[[1, 1]].re, p.kappa * p.gamma_a, epsilon = 1e-15);

        let mut coh = CMatrix::zeros((f, f));
        coh[[2, 1]] = C64::new(0.3, 0.1);
        let d = lindblad_rhs(&coh, &p, &h0);
        let rate = 0.5 * p.kappa * (p.gamma_a + p.gamma_pi);
        assert_abs_diff_eq!((d[[2, 1]] + coh[[2, 1]] * rate).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn banded_rhs_matches_dense() {
        let sp = space();
        let alpha = C64::new(0.01, 0.03);
        let p = LindbladParams::from_angle(2.2, 1.5, 2, alpha).unwrap();
        let h = model::oscillator_drive(alpha, &sp);
        let rho = crate::testutil::random_density(&sp, 3);
        let dense = lindblad_rhs(rho.matrix(), &p, &h);
        let sqrt_n: Vec<f64> = (0..=sp.fock_dim()).map(|n| (n as f64).sqrt()).collect();
        let mut banded = CMatrix::zeros(dense.raw_dim());
        banded_rhs(rho.matrix(), &p, &sqrt_n, &mut banded);
        assert!(max_abs_diff(&dense, &banded) < 1e-15);
        assert!(statespace::trace(&dense).norm() < 1e-12);
    }

    #[test]
    fn constant_without_rates_and_drive() {
        let sp = space();
        let p = LindbladParams::from_angle(0.0, 1.0, 2, ZERO).unwrap();
        let rho = crate::testutil::random_density(&sp, 5);
        let traj = propagate_lindblad(&rho, &p, 3.0, 0.05).unwrap();
        for s in traj.reduced_states() {
            assert!(max_abs_diff(&s.to_matrix(), rho.matrix()) < 1e-14);
        }
    }

    #[test]
    fn closed_form_decay() {
        let sp = space();
        let p = LindbladParams::from_angle(PI, 1.0, 2, ZERO).unwrap();
        let rate = p.kappa * p.gamma_a;
        let t = 3.0 / rate;
        let traj = propagate_lindblad(&DensityOperator::fock(&sp, 2).unwrap(), &p, t, 0.02).unwrap();
        assert_relative_eq!(traj.final_state().population(2), (-rate * t).exp(), max_relative = 1e-6);
    }

    #[test]
    fn step_halving() {
        let sp = SpaceConfig::new(10).unwrap();
        let p = LindbladParams::from_angle(2.5, 2.0, 2, C64::new(0.0, 0.05)).unwrap();
        let rho = DensityOperator::fock(&sp, 1).unwrap();
        let a = propagate_lindblad(&rho, &p, 4.0, 0.04).unwrap();
        let b = propagate_lindblad(&rho, &p, 4.0, 0.02).unwrap();
        assert!(max_abs_diff(&a.final_state().to_matrix(), &b.final_state().to_matrix()) < 1e-8);
    }

    #[test]
    fn stability_guard() {
        let sp = space();
        let p = LindbladParams::from_angle(PI, 1.0, 2, ZERO).unwrap();
        assert!(matches!(LindbladEngine::new(p.clone(), &sp, 1.0, 0.2), Err(Error::Stability(_))));
        let fast = LindbladParams { kappa: 10.0, ..p };
        assert!(matches!(LindbladEngine::new(fast, &sp, 1.0, 0.009), Err(Error::Stability(_))));
    }

    #[test]
    fn spec_engine_samples() {
        let spec = ProtocolSpec::single_pulse(0.5, 1.0).with_space(SpaceConfig::new(20).unwrap()).unwrap();
        let engine = LindbladEngine::from_spec(&spec).unwrap();
        let traj = engine.run(&spec.initial).unwrap();
        let m = spec.schedule().unwrap().intervals;
        assert_eq!(traj.len(), 1 + m * DEFAULT_SAMPLES_PER_INTERVAL);
        assert_eq!(traj.interval_boundaries.len(), m);
        assert_abs_diff_eq!(*traj.sample_times.last().unwrap(), spec.schedule().unwrap().total_time, epsilon = 1e-9);
        for s in traj.reduced_states() {
            assert_abs_diff_eq!(s.trace(), 1.0, epsilon = 1e-8);
        }
    }

    /// Trace distance between two master-equation trajectories never grows.
    #[test]
    fn contractive_distance() {
        let spec = ProtocolSpec::single_pulse(0.3, 2.0 * PI).with_space(SpaceConfig::new(24).unwrap()).unwrap();
        let engine = LindbladEngine::from_spec(&spec).unwrap();
        let a = DensityOperator::fock(&spec.space, 0).unwrap();
        let b = DensityOperator::fock(&spec.space, 2).unwrap();
        let mut prev = f64::INFINITY;
        for (x, y) in engine.propagate(&a).unwrap().zip(engine.propagate(&b).unwrap()) {
            let d = x.unwrap().state.trace_distance(&y.unwrap().state).unwrap();
            assert!(d <= prev + 1e-8);
            prev = d;
        }
    }
}
