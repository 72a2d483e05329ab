//! Parameter sweeps over `(β, φ₂, φ₁)`, engine comparison, CSV persistence
//! and plot-script emission.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PiecewiseEngine, ProtocolSpec, PulseAngle, DEFAULT_DRIVE_RATIO, DEFAULT_SUB_SAMPLES};
use crate::error::{Error, Result};
use crate::kraus::ReducedState;
use crate::lindblad::LindbladEngine;
use crate::measures::{self, PairConvention, PairPreset, StatePair};
use crate::model::Frame;
use crate::statespace::{DensityOperator, SpaceConfig};
use crate::dynamics::Trajectory;

/// Bumped whenever the column set or its meaning changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const CSV_COLUMNS: [&str; 8] = ["beta", "phi2", "phi1", "engine", "s_l", "p_escape", "n_blp", "error"];
/// Level of the main pulse and of the auxiliary one.
pub const PRIMARY_LEVEL: usize = 2;
pub const AUXILIARY_LEVEL: usize = 1;
/// Highlighted displacements of the two-pulse scatter view.
pub const HIGHLIGHTED_BETAS: [f64; 3] = [0.0126, 0.0252, 0.0503];
/// Addressability margins below this draw a warning.
pub const ADDRESSABILITY_WARN: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    #[default]
    Piecewise,
    Lindblad,
    Both,
}

/// Engine that produced a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Piecewise,
    Lindblad,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Piecewise => "piecewise",
            EngineKind::Lindblad => "lindblad",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "piecewise" => Ok(EngineKind::Piecewise),
            "lindblad" => Ok(EngineKind::Lindblad),
            _ => Err(Error::InvalidParameter(format!("unknown engine `{s}`"))),
        }
    }
}

impl EngineChoice {
    pub fn kinds(self) -> &'static [EngineKind] {
        match self {
            EngineChoice::Piecewise => &[EngineKind::Piecewise],
            EngineChoice::Lindblad => &[EngineKind::Lindblad],
            EngineChoice::Both => &[EngineKind::Piecewise, EngineKind::Lindblad],
        }
    }
}

fn default_phi1() -> Vec<f64> {
    vec![0.0]
}
fn default_pair() -> PairConvention {
    PairConvention::Preset(PairPreset::Ground)
}
fn default_sub_samples() -> usize {
    DEFAULT_SUB_SAMPLES
}
fn default_n_max() -> usize {
    SpaceConfig::default().n_max()
}
fn default_rabi() -> f64 {
    1.0
}
fn default_drive_ratio() -> f64 {
    DEFAULT_DRIVE_RATIO
}
fn default_true() -> bool {
    true
}

/// A grid of protocol points and how to evaluate them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub beta_grid: Vec<f64>,
    pub phi2_grid: Vec<f64>,
    #[serde(default = "default_phi1")]
    pub phi1_grid: Vec<f64>,
    #[serde(default = "default_pair")]
    pub pair: PairConvention,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default = "default_sub_samples")]
    pub sub_samples: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_rabi")]
    pub rabi: f64,
    #[serde(default = "default_drive_ratio")]
    pub drive_ratio: f64,
    #[serde(default)]
    pub frame: Frame,
    /// Skipping the pair runs leaves `n_blp` as NaN.
    #[serde(default = "default_true")]
    pub measure_blp: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect()
}

/// `0, step·π, …, stop·π` in units of π.
fn pi_steps(stop: f64, step: f64) -> Vec<f64> {
    let n = (stop / step).round() as usize;
    (0..=n).map(|k| k as f64 * step * PI).collect()
}

impl SweepSpec {
    pub fn new(beta_grid: Vec<f64>, phi2_grid: Vec<f64>, phi1_grid: Vec<f64>) -> Self {
        SweepSpec {
            beta_grid,
            phi2_grid,
            phi1_grid,
            pair: default_pair(),
            engine: EngineChoice::default(),
            sub_samples: DEFAULT_SUB_SAMPLES,
            n_max: default_n_max(),
            rabi: 1.0,
            drive_ratio: DEFAULT_DRIVE_RATIO,
            frame: Frame::default(),
            measure_blp: true,
            output: None,
        }
    }

    /// Full grid: 20 displacements from 0.0126 to 0.251, `φ₂ ∈ [0, 6π]` in
    /// steps of 0.1π, `φ₁ ∈ [0, π]` in steps of 0.025π.
    pub fn default_grid() -> Self {
        Self::new(linspace(0.0126, 0.251, 20), pi_steps(6.0, 0.1), pi_steps(1.0, 0.025))
    }

    /// The default displacements and `φ₂` with the auxiliary pulse off.
    pub fn default_single_pulse() -> Self {
        Self::new(linspace(0.0126, 0.251, 20), pi_steps(6.0, 0.1), vec![0.0])
    }

    /// 4 × 7 single-pulse grid for quick checks.
    pub fn smoke_single_pulse() -> Self {
        let mut s = Self::new(vec![0.0126, 0.025, 0.05, 0.1], pi_steps(6.0, 1.0), vec![0.0]);
        s.sub_samples = 4;
        s
    }

    /// 4 × 7 × 5 two-pulse grid for quick checks.
    pub fn smoke_two_pulse() -> Self {
        let mut s = Self::smoke_single_pulse();
        s.phi1_grid = pi_steps(1.0, 0.25);
        s.pair = PairConvention::Preset(PairPreset::Balanced);
        s
    }

    pub fn space(&self) -> Result<SpaceConfig> {
        SpaceConfig::new(self.n_max)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [("beta_grid", &self.beta_grid), ("phi2_grid", &self.phi2_grid), ("phi1_grid", &self.phi1_grid)] {
            if grid.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} is empty")));
            }
            if grid.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter(format!("{name} must be strictly increasing")));
            }
        }
        if self.beta_grid[0] <= 0.0 {
            return Err(Error::InvalidParameter("displacements must be positive".into()));
        }
        if self.phi2_grid[0] < 0.0 || self.phi1_grid[0] < 0.0 {
            return Err(Error::InvalidParameter("Rabi angles must be non-negative".into()));
        }
        if self.sub_samples == 0 {
            return Err(Error::InvalidParameter("sub_samples must be at least 1".into()));
        }
        self.space()?;
        Ok(())
    }

    pub fn is_single_pulse(&self) -> bool {
        self.phi1_grid == [0.0]
    }

    /// Grid points in lexicographic `(β, φ₂, φ₁)` order.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.beta_grid.len() * self.phi2_grid.len() * self.phi1_grid.len());
        for &b in &self.beta_grid {
            for &p2 in &self.phi2_grid {
                for &p1 in &self.phi1_grid {
                    out.push((b, p2, p1));
                }
            }
        }
        out
    }

    /// Protocol at one grid point, starting from `|0⟩`. A zero `φ₁` leaves
    /// the auxiliary pulse out entirely.
    pub fn protocol(&self, beta: f64, phi2: f64, phi1: f64) -> Result<ProtocolSpec> {
        let mut pulses = vec![PulseAngle { level: PRIMARY_LEVEL, angle: phi2 }];
        if phi1 != 0.0 {
            pulses.push(PulseAngle { level: AUXILIARY_LEVEL, angle: phi1 });
        }
        let mut spec = ProtocolSpec::new(beta, pulses).with_space(self.space()?)?;
        spec.rabi = self.rabi;
        spec.drive_ratio = self.drive_ratio;
        spec.frame = self.frame;
        spec.sub_samples = self.sub_samples;
        Ok(spec)
    }
}

/// One evaluated grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub phi2: f64,
    pub phi1: f64,
    pub engine: EngineKind,
    pub s_l: f64,
    pub p_escape: f64,
    pub n_blp: f64,
    /// Seconds spent on the point; kept out of the CSV so files stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(beta: f64, phi2: f64, phi1: f64, engine: EngineKind, err: &Error) -> Self {
        SweepRow {
            beta,
            phi2,
            phi1,
            engine,
            s_l: f64::NAN,
            p_escape: f64::NAN,
            n_blp: f64::NAN,
            wall_time: 0.0,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// `φ₁` maximising `S_L` at fixed `(β, φ₂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurningPoint {
    pub beta: f64,
    pub phi2: f64,
    pub phi1: f64,
    pub s_l: f64,
}

impl SweepResult {
    pub fn rows_for(&self, engine: EngineKind) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.engine == engine)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn find(&self, engine: EngineKind, beta: f64, phi2: f64, phi1: f64) -> Option<&SweepRow> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        self.rows_for(engine).find(|r| close(r.beta, beta) && close(r.phi2, phi2) && close(r.phi1, phi1))
    }

    /// Piecewise turning points in grid order; failed rows are skipped.
    pub fn turning_points(&self) -> Vec<TurningPoint> {
        let mut out: Vec<TurningPoint> = Vec::new();
        for r in self.rows_for(EngineKind::Piecewise).filter(|r| r.is_ok()) {
            match out.last_mut() {
                Some(tp) if tp.beta == r.beta && tp.phi2 == r.phi2 => {
                    if r.s_l > tp.s_l {
                        tp.phi1 = r.phi1;
                        tp.s_l = r.s_l;
                    }
                }
                _ => out.push(TurningPoint { beta: r.beta, phi2: r.phi2, phi1: r.phi1, s_l: r.s_l }),
            }
        }
        out
    }
}

fn vacuum(space: &SpaceConfig) -> Result<DensityOperator> {
    DensityOperator::fock(space, 0)
}

fn evaluate(sweep: &SweepSpec, kind: EngineKind, beta: f64, phi2: f64, phi1: f64) -> Result<(f64, f64, f64)> {
    let spec = sweep.protocol(beta, phi2, phi1)?;
    let level = spec.zeno_level();
    let pair = StatePair::from_convention(sweep.pair, level, &spec.space)?;
    let (last, n_blp): (ReducedState, f64) = match kind {
        EngineKind::Piecewise => {
            let engine = PiecewiseEngine::new(&spec)?;
            let last = engine.final_state(&vacuum(&spec.space)?)?;
            let n = if sweep.measure_blp {
                measures::piecewise_distance_series(&engine, &pair)?.blp()?
            } else {
                f64::NAN
            };
            (last, n)
        }
        EngineKind::Lindblad => {
            let engine = LindbladEngine::from_spec(&spec)?;
            let last = engine.final_state(&vacuum(&spec.space)?)?;
            let n = if sweep.measure_blp {
                measures::lindblad_distance_series(&engine, &pair)?.blp()?
            } else {
                f64::NAN
            };
            (last, n)
        }
    };
    Ok((last.linear_entropy(), last.escape_population(level), n_blp))
}

fn evaluate_row(sweep: &SweepSpec, kind: EngineKind, (beta, phi2, phi1): (f64, f64, f64)) -> SweepRow {
    let start = Instant::now();
    match evaluate(sweep, kind, beta, phi2, phi1) {
        Ok((s_l, p_escape, n_blp)) => SweepRow {
            beta,
            phi2,
            phi1,
            engine: kind,
            s_l,
            p_escape,
            n_blp,
            wall_time: start.elapsed().as_secs_f64(),
            error: None,
        },
        Err(e) => {
            log::warn!("grid point (β={beta}, φ₂={phi2}, φ₁={phi1}, {}) failed: {e}", kind.name());
            SweepRow { wall_time: start.elapsed().as_secs_f64(), ..SweepRow::failed(beta, phi2, phi1, kind, &e) }
        }
    }
}

/// Maps `f` over `items` on at most `jobs` threads (all cores when `None`),
/// keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], jobs: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs == Some(1) {
        return Ok(items.iter().map(f).collect());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::InvalidParameter("job count must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Evaluates every grid point with every selected engine.
pub fn run_sweep(sweep: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    sweep.validate()?;
    let work: Vec<(EngineKind, (f64, f64, f64))> = sweep
        .points()
        .into_iter()
        .flat_map(|p| sweep.engine.kinds().iter().map(move |&k| (k, p)))
        .collect();
    log::info!("sweeping {} work items", work.len());
    let rows = parallel_map(&work, jobs, |&(k, p)| evaluate_row(sweep, k, p))?;
    Ok(SweepResult { rows })
}

pub fn sweep_single_pulse(sweep: &SweepSpec, jobs: Option<usize>) -> Result<SweepResult> {
    if !sweep.is_single_pulse() {
        return Err(Error::InvalidParameter("single-pulse sweep needs phi1_grid = [0]".into()));
    }
    run_sweep(sweep, jobs)
}

pub fn sweep_two_pulse(sweep: &SweepSpec, jobs: Option<usize>) -> Result<(SweepResult, Vec<TurningPoint>)> {
    if sweep.phi1_grid.iter().all(|&p| p == 0.0) {
        return Err(Error::InvalidParameter("two-pulse sweep needs a nonzero φ₁".into()));
    }
    let result = run_sweep(sweep, jobs)?;
    let turning = result.turning_points();
    Ok((result, turning))
}

/// Master-equation minus piecewise values at one `(β, φ₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub beta: f64,
    pub phi2: f64,
    pub d_escape: f64,
    pub d_entropy: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineComparison {
    pub rows: Vec<ComparisonRow>,
    /// Pearson correlation of `|ΔS_L|` with `φ₂·β` over the valid rows.
    pub correlation: f64,
}

impl EngineComparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["beta", "phi2", "d_escape", "d_entropy", "error"])?;
        for r in &self.rows {
            w.write_record([
                fmt_num(r.beta),
                fmt_num(r.phi2),
                fmt_num(r.d_escape),
                fmt_num(r.d_entropy),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Runs both engines over a single-pulse grid (pair runs skipped).
pub fn compare_engines(sweep: &SweepSpec, jobs: Option<usize>) -> Result<EngineComparison> {
    if !sweep.is_single_pulse() {
        return Err(Error::InvalidParameter("engine comparison needs phi1_grid = [0]".into()));
    }
    let sweep = SweepSpec { engine: EngineChoice::Both, measure_blp: false, ..sweep.clone() };
    let result = run_sweep(&sweep, jobs)?;
    let rows: Vec<ComparisonRow> = result
        .rows
        .chunks(2)
        .map(|pair| {
            let (p, l) = (&pair[0], &pair[1]);
            let error = p.error.clone().or_else(|| l.error.clone());
            ComparisonRow {
                beta: p.beta,
                phi2: p.phi2,
                d_escape: l.p_escape - p.p_escape,
                d_entropy: l.s_l - p.s_l,
                error,
            }
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.error.is_none()).map(|r| (r.phi2 * r.beta, r.d_entropy.abs())).unzip();
    let correlation = pearson(&x, &y);
    Ok(EngineComparison { rows, correlation })
}

/// `Δt_Z · Ω · |√(z+1) − √z|`: how well a pulse of duration `Δt_Z` resolves
/// the dressed-state splitting around level `z`.
pub fn addressability_margin(rabi: f64, level: usize, duration: f64) -> f64 {
    let z = level as f64;
    duration * rabi * ((z + 1.0).sqrt() - z.sqrt()).abs()
}

fn fmt_num(x: f64) -> String {
    // no "-0" in output
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

fn header_comment() -> String {
    format!("# zeno sweep csv v{CSV_SCHEMA_VERSION}; columns: {}", CSV_COLUMNS.join(","))
}

/// Writes rows as CSV: a versioned comment line, the header, then one line
/// per row with 12 significant digits.
pub fn write_results_to<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    writeln!(out, "{}", header_comment())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &result.rows {
        w.write_record([
            fmt_num(r.beta),
            fmt_num(r.phi2),
            fmt_num(r.phi1),
            r.engine.name().to_string(),
            fmt_num(r.s_l),
            fmt_num(r.p_escape),
            fmt_num(r.n_blp),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results(result: &SweepResult, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_results_to(result, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_results_from<R: BufRead>(input: R) -> Result<SweepResult> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::InvalidParameter(format!("unexpected CSV header {headers:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number `{s}`")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let error = rec[7].to_string();
        rows.push(SweepRow {
            beta: num(&rec[0])?,
            phi2: num(&rec[1])?,
            phi1: num(&rec[2])?,
            engine: EngineKind::parse(&rec[3])?,
            s_l: num(&rec[4])?,
            p_escape: num(&rec[5])?,
            n_blp: num(&rec[6])?,
            wall_time: 0.0,
            error: (!error.is_empty()).then_some(error),
        });
    }
    Ok(SweepResult { rows })
}

pub fn read_results(path: &Path) -> Result<SweepResult> {
    read_results_from(std::io::BufReader::new(fs::File::open(path)?))
}

/// Resolved sweep settings plus the sweep outcome, as TOML.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest<'a> {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub rows: usize,
    pub failures: usize,
    pub sweep: &'a SweepSpec,
}

impl<'a> RunManifest<'a> {
    pub fn new(sweep: &'a SweepSpec, result: &SweepResult) -> Self {
        RunManifest {
            schema_version: CSV_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            rows: result.rows.len(),
            failures: result.failures(),
            sweep,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParameter(format!("manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

const PLOT_TEMPLATE: &str = r##"#!/usr/bin/env python3
# Heat maps of S_L, P_escape and N_BLP over (beta, phi2) for the single-pulse
# rows, and S_L against N_BLP for the two-pulse rows.
import sys

import matplotlib.pyplot as plt
import numpy as np

CSV = sys.argv[1] if len(sys.argv) > 1 else "@CSV@"
HIGHLIGHT = [@HIGHLIGHT@]

data = np.genfromtxt(CSV, delimiter=",", names=True, dtype=None, encoding="utf-8", comments="#")
data = np.atleast_1d(data)
ok = np.array([not e for e in data["error"]]) if data.dtype["error"].kind == "U" else np.ones(len(data), bool)

for engine in sorted(set(data["engine"])):
    sel = ok & (data["engine"] == engine) & (data["phi1"] == 0.0)
    if not sel.any():
        continue
    betas = np.unique(data["beta"][sel])
    phis = np.unique(data["phi2"][sel])
    fig, axes = plt.subplots(1, 3, figsize=(13, 4), constrained_layout=True)
    for ax, key, label in zip(axes, ["p_escape", "s_l", "n_blp"], ["$P_{\\bar Z}$", "$S_L$", "$N_{BLP}$"]):
        grid = np.full((len(phis), len(betas)), np.nan)
        for row in data[sel]:
            grid[np.searchsorted(phis, row["phi2"]), np.searchsorted(betas, row["beta"])] = row[key]
        mesh = ax.pcolormesh(betas, phis / np.pi, grid, shading="nearest")
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlabel(r"$\beta$")
        ax.set_ylabel(r"$\varphi_2/\pi$")
    fig.savefig(f"heatmap_{engine}.png", dpi=150)

sel = ok & (data["engine"] == "piecewise") & (data["phi1"] > 0.0)
if sel.any():
    fig, ax = plt.subplots(figsize=(6, 5), constrained_layout=True)
    pts = ax.scatter(data["n_blp"][sel], data["s_l"][sel], c=data["phi1"][sel] / np.pi, s=6, cmap="viridis")
    fig.colorbar(pts, ax=ax, label=r"$\varphi_1/\pi$")
    for b in HIGHLIGHT:
        near = sel & np.isclose(data["beta"], b, rtol=0.02)
        if near.any():
            ax.scatter(data["n_blp"][near], data["s_l"][near], s=10, label=rf"$\beta={b}$")
    ax.set_xlabel(r"$N_{BLP}$")
    ax.set_ylabel(r"$S_L$")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.savefig("scatter_two_pulse.png", dpi=150)
"##;

/// Standalone matplotlib program that reads the sweep CSV at `csv_path`.
pub fn plot_script(csv_path: &str) -> String {
    let highlight: Vec<String> = HIGHLIGHTED_BETAS.iter().map(|b| b.to_string()).collect();
    PLOT_TEMPLATE.replace("@CSV@", &csv_path.replace('\\', "/").replace('"', "")).replace("@HIGHLIGHT@", &highlight.join(", "))
}

pub fn emit_plot_script(csv_path: &Path, script_path: &Path) -> Result<()> {
    fs::write(script_path, plot_script(&csv_path.to_string_lossy()))?;
    Ok(())
}

/// CSV of a trajectory: time, `P(n)` for `n ≤ z+1`, `S_L`, `P_Z̄`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let z = traj.zeno_level();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend((0..=z + 1).map(|n| format!("p{n}")));
    header.extend(["s_l".to_string(), "p_escape".to_string()]);
    w.write_record(&header)?;
    for (t, s) in traj.sample_times.iter().zip(traj.reduced_states()) {
        let mut rec = vec![fmt_num(*t)];
        rec.extend((0..=z + 1).map(|n| fmt_num(s.population(n))));
        rec.push(fmt_num(s.linear_entropy()));
        rec.push(fmt_num(s.escape_population(z)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
