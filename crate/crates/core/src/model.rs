//! Hamiltonians of the driven oscillator, the meter and the Zeno pulses, in
//! the interaction picture with respect to the bare oscillator and meter
//! energies.

use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statespace::{CMatrix, CVector, Ket, Meter, SpaceConfig, SpaceTag, ZERO};

/// Largest accepted `|α|/Ω`.
pub const MAX_DRIVE_RATIO: f64 = 0.05;
/// `|α|/Ω` above which the weak-drive assumption is flagged.
pub const WARN_DRIVE_RATIO: f64 = 0.01;
/// Required `ω/ω′` when both bare frequencies are supplied.
pub const MAX_FREQUENCY_RATIO: f64 = 0.1;

/// How the Zeno coupling is made resonant.
///
/// Every variant except `Literal` adds a diagonal energy on the `|h⟩` meter
/// sector and removes the accumulated phase when the meter is read out.
///
/// * `Resonant` shifts the whole `|h⟩` sector. With one pulse this is the
///   rotating frame of the pulse field, so drive, JC coupling and pulse are
///   all static. With several pulses each `|h,n⟩` takes the shift of the
///   closest pulse level at or below `n` (the lowest pulse level below it).
/// * `Level` shifts only the pulsed levels `|h,z_i⟩`. This also detunes the
///   drive on the transitions into and out of `|h,z_i⟩`.
/// * `Literal` propagates the sum of the bare couplings unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    #[default]
    Resonant,
    Level,
    Literal,
}

/// A Zeno pulse on Fock level `level` with coupling strength `strength` (ω_z).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZenoPulse {
    pub level: usize,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Jaynes–Cummings Rabi frequency Ω; sets the frequency unit.
    pub rabi: f64,
    /// Classical drive amplitude α.
    pub alpha: C64,
    pub pulses: Vec<ZenoPulse>,
    pub frame: Frame,
    /// Bare oscillator frequency ω. Not used in propagation.
    pub omega_ho: Option<f64>,
    /// Bare h↔g splitting ω′. Not used in propagation.
    pub omega_meter: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            rabi: 1.0,
            alpha: ZERO,
            pulses: Vec::new(),
            frame: Frame::Resonant,
            omega_ho: None,
            omega_meter: None,
        }
    }
}

impl ModelParams {
    pub fn validate(&self, space: &SpaceConfig) -> Result<()> {
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            return Err(Error::InvalidParameter(format!("Rabi frequency {} must be non-negative", self.rabi)));
        }
        let ratio = if self.alpha == ZERO { 0.0 } else { self.alpha.norm() / self.rabi };
        if ratio > MAX_DRIVE_RATIO {
            return Err(Error::InvalidParameter(format!(
                "drive |α|/Ω = {ratio:.4} exceeds {MAX_DRIVE_RATIO}"
            )));
        }
        if ratio > WARN_DRIVE_RATIO {
            warn!("drive |α|/Ω = {ratio:.4} is above {WARN_DRIVE_RATIO}; weak-drive assumption is marginal");
        }
        let mut levels = Vec::with_capacity(self.pulses.len());
        for p in &self.pulses {
            if p.level < 1 || p.level + 1 > space.n_max() {
                return Err(Error::InvalidParameter(format!(
                    "Zeno level {} outside 1..={}",
                    p.level,
                    space.n_max() - 1
                )));
            }
            if !p.strength.is_finite() {
                return Err(Error::InvalidParameter("non-finite Zeno pulse strength".into()));
            }
            if levels.contains(&p.level) {
                return Err(Error::InvalidParameter(format!("duplicate Zeno level {}", p.level)));
            }
            levels.push(p.level);
        }
        if let (Some(w), Some(wp)) = (self.omega_ho, self.omega_meter) {
            if !(w < MAX_FREQUENCY_RATIO * wp) {
                return Err(Error::InvalidParameter(format!(
                    "ω = {w} is not small compared to ω′ = {wp}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DressedSign {
    Plus,
    Minus,
}

/// `|±,n⟩ = (|e,n−1⟩ ± |g,n⟩)/√2`.
pub fn dressed_ket(sign: DressedSign, n: usize, space: &SpaceConfig) -> Result<Ket> {
    if n < 1 {
        return Err(Error::FockOutOfRange { index: n, n_max: space.n_max() });
    }
    space.check_fock(n)?;
    let mut v = CVector::zeros(space.dim());
    v[space.index(Meter::E, n - 1)] = C64::new(1.0, 0.0);
    v[space.index(Meter::G, n)] = C64::new(
        match sign {
            DressedSign::Plus => 1.0,
            DressedSign::Minus => -1.0,
        },
        0.0,
    );
    Ket::normalized(v, SpaceTag::Bipartite)
}

/// `(Ω/2)(σ₋a† + σ₊a)` with σ₋ = |g⟩⟨e|.
pub fn build_h_jc(params: &ModelParams, space: &SpaceConfig) -> CMatrix {
    let mut h = CMatrix::zeros((space.dim(), space.dim()));
    for n in 1..=space.n_max() {
        let v = C64::new(params.rabi * (n as f64).sqrt() / 2.0, 0.0);
        let g = space.index(Meter::G, n);
        let e = space.index(Meter::E, n - 1);
        h[[g, e]] = v;
        h[[e, g]] = v;
    }
    h
}

/// `α a† + α* a` on the oscillator alone.
pub fn oscillator_drive(alpha: C64, space: &SpaceConfig) -> CMatrix {
    let f = space.fock_dim();
    let mut h = CMatrix::zeros((f, f));
    for n in 1..f {
        let s = (n as f64).sqrt();
        h[[n, n - 1]] = alpha * s;
        h[[n - 1, n]] = alpha.conj() * s;
    }
    h
}

/// Drive `α a† + α* a`, acting identically in every meter sector.
pub fn build_h_cs(params: &ModelParams, space: &SpaceConfig) -> CMatrix {
    let osc = oscillator_drive(params.alpha, space);
    let mut h = CMatrix::zeros((space.dim(), space.dim()));
    for m in Meter::ALL {
        let base = space.index(m, 0);
        for ((i, j), v) in osc.indexed_iter() {
            if *v != ZERO {
                h[[base + i, base + j]] = *v;
            }
        }
    }
    h
}

/// `(ω_z/2)(|h,z⟩⟨+,z| + |+,z⟩⟨h,z|)`.
pub fn build_h_z(level: usize, strength: f64, space: &SpaceConfig) -> Result<CMatrix> {
    if level < 1 || level > space.n_max() {
        return Err(Error::FockOutOfRange { index: level, n_max: space.n_max() });
    }
    let mut h = CMatrix::zeros((space.dim(), space.dim()));
    let v = C64::new(strength / (2.0 * std::f64::consts::SQRT_2), 0.0);
    let hz = space.index(Meter::H, level);
    for other in [space.index(Meter::G, level), space.index(Meter::E, level - 1)] {
        h[[hz, other]] = v;
        h[[other, hz]] = v;
    }
    Ok(h)
}

/// Energy of `|+,z⟩` under the Jaynes–Cummings coupling, `Ω√z/2`.
pub fn dressed_shift(rabi: f64, level: usize) -> f64 {
    rabi * (level as f64).sqrt() / 2.0
}

/// Energy added to each `|h,n⟩`, indexed by `n`; zeros in the literal frame.
pub fn frame_shifts(params: &ModelParams, space: &SpaceConfig) -> Vec<f64> {
    let mut q = vec![0.0; space.fock_dim()];
    // a pulse of zero strength is absent and must not move the frame
    let mut levels: Vec<usize> =
        params.pulses.iter().filter(|p| p.strength != 0.0).map(|p| p.level).collect();
    levels.sort_unstable();
    let Some(&lowest) = levels.first() else {
        return q;
    };
    match params.frame {
        Frame::Literal => {}
        Frame::Level => {
            for &z in &levels {
                q[z] = dressed_shift(params.rabi, z);
            }
        }
        Frame::Resonant => {
            for (n, shift) in q.iter_mut().enumerate() {
                let z = levels.iter().rev().find(|&&z| z <= n).copied().unwrap_or(lowest);
                *shift = dressed_shift(params.rabi, z);
            }
        }
    }
    q
}

/// Diagonal frame term `Σ_n q_n |h,n⟩⟨h,n|` with `q` from [`frame_shifts`].
pub fn build_compensation(params: &ModelParams, space: &SpaceConfig) -> CMatrix {
    let mut c = CMatrix::zeros((space.dim(), space.dim()));
    for (n, q) in frame_shifts(params, space).into_iter().enumerate() {
        let i = space.index(Meter::H, n);
        c[[i, i]] = C64::new(q, 0.0);
    }
    c
}

pub fn total_hamiltonian(params: &ModelParams, space: &SpaceConfig) -> Result<CMatrix> {
    params.validate(space)?;
    let mut h = build_h_cs(params, space) + build_h_jc(params, space);
    for p in &params.pulses {
        h += &build_h_z(p.level, p.strength, space)?;
    }
    h += &build_compensation(params, space);
    Ok(h)
}
