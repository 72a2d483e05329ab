use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use zeno_core::dynamics::{PiecewiseEngine, ProtocolSpec};
use zeno_core::experiments::{
    self, addressability_margin, EngineChoice, RunManifest, ADDRESSABILITY_WARN,
};
use zeno_core::lindblad::{rates_from_angle, LindbladEngine};
use zeno_core::measures;

mod config;

use config::{GridPreset, RunConfig, SimEngine};

#[derive(Parser, Debug)]
#[command(name = "zeno", version, about = "Zeno-pulse open-system simulator")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "ZENO_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate one protocol and write its trajectory.
    Simulate(SimArgs),
    /// Evaluate a parameter grid.
    Sweep(SweepArgs),
    /// Master equation against piecewise dynamics over a single-pulse grid.
    Compare(SweepArgs),
    /// BLP measure over the Bloch sphere of the first pair state.
    ScanBloch(ScanArgs),
    /// Decay rates for a Rabi angle.
    Rates(RatesArgs),
    /// Print the default configuration.
    Defaults,
}

#[derive(Args, Debug, Default)]
struct ProtocolArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Rabi angle of the level-2 pulse, in units of π.
    #[arg(long)]
    phi2_pi: Option<f64>,
    /// Rabi angle of the level-1 pulse, in units of π.
    #[arg(long)]
    phi1_pi: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    sub_samples: Option<usize>,
    #[arg(long)]
    intervals: Option<usize>,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long)]
    initial_fock: Option<usize>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "trajectory.csv")]
    out: String,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum EngineArg {
    Piecewise,
    Lindblad,
    Both,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum PresetArg {
    SmokeSingle,
    SmokeTwo,
    FullSingle,
    Full,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    sub_samples: Option<usize>,
    /// File name stem for the outputs.
    #[arg(long, default_value = "sweep")]
    name: String,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    theta_points: Option<usize>,
    #[arg(long)]
    phi_points: Option<usize>,
    #[arg(long, default_value = "bloch_scan.csv")]
    out: String,
}

#[derive(Args, Debug)]
struct RatesArgs {
    /// Rabi angle in radians.
    phi: f64,
    /// Read the angle in units of π instead.
    #[arg(long)]
    pi: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = Some(d.clone());
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    match cli.command {
        Command::Simulate(a) => simulate(cfg, a),
        Command::Sweep(a) => sweep(cfg, a),
        Command::Compare(a) => compare(cfg, a),
        Command::ScanBloch(a) => scan_bloch(cfg, a),
        Command::Rates(a) => rates(a),
        Command::Defaults => defaults(),
    }
}

fn apply_protocol(cfg: &mut RunConfig, a: &ProtocolArgs) {
    let p = &mut cfg.protocol;
    if let Some(v) = a.beta {
        p.beta = v;
    }
    if let Some(v) = a.phi2_pi {
        p.phi2_pi = v;
    }
    if let Some(v) = a.phi1_pi {
        p.phi1_pi = v;
    }
    if let Some(v) = a.sub_samples {
        p.sub_samples = v;
    }
    if a.intervals.is_some() {
        p.intervals = a.intervals;
    }
    if let Some(v) = a.n_max {
        cfg.model.n_max = v;
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn warn_addressability(spec: &ProtocolSpec) -> Result<()> {
    let tau = spec.schedule()?.tau;
    for p in spec.pulses.iter().filter(|p| p.angle != 0.0) {
        let m = addressability_margin(spec.rabi, p.level, tau);
        if m < ADDRESSABILITY_WARN {
            eprintln!(
                "warning: pulse on |{}⟩ has addressability margin {m:.3} (< {ADDRESSABILITY_WARN}); \
                 neighbouring dressed levels are not well resolved",
                p.level
            );
        }
    }
    Ok(())
}

fn simulate(mut cfg: RunConfig, a: SimArgs) -> Result<()> {
    apply_protocol(&mut cfg, &a.protocol);
    if let Some(n) = a.initial_fock {
        cfg.protocol.initial_fock = n;
        cfg.protocol.initial_theta_pi = None;
        cfg.protocol.initial_phi_pi = None;
    }
    match a.engine {
        Some(EngineArg::Piecewise) => cfg.protocol.engine = SimEngine::Piecewise,
        Some(EngineArg::Lindblad) => cfg.protocol.engine = SimEngine::Lindblad,
        Some(EngineArg::Both) => bail!("simulate runs one engine at a time"),
        None => {}
    }
    let spec = cfg.protocol_spec()?;
    warn_addressability(&spec)?;
    let schedule = spec.schedule()?;
    let traj = match cfg.protocol.engine {
        SimEngine::Piecewise => PiecewiseEngine::new(&spec)?.run(&spec.initial)?,
        SimEngine::Lindblad => LindbladEngine::from_spec(&spec)?.run(&spec.initial)?,
    };
    let path = output_dir(&cfg)?.join(&a.out);
    let mut buf = Vec::new();
    experiments::write_trajectory_csv(&traj, &mut buf)?;
    write_file(&path, &buf)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "engine       {:?}", cfg.protocol.engine)?;
    writeln!(out, "beta         {:.6}", schedule.beta)?;
    writeln!(out, "intervals    {}", schedule.intervals)?;
    writeln!(out, "tau          {:.6}", schedule.tau)?;
    writeln!(out, "samples      {}", traj.len())?;
    writeln!(out, "final S_L    {:.6}", traj.final_linear_entropy())?;
    writeln!(out, "final P_esc  {:.6e}", traj.final_escape())?;
    writeln!(out, "written      {}", path.display())?;
    Ok(())
}

fn apply_sweep(cfg: &mut RunConfig, a: &SweepArgs) {
    if let Some(p) = a.preset {
        cfg.sweep.preset = match p {
            PresetArg::SmokeSingle => GridPreset::SmokeSingle,
            PresetArg::SmokeTwo => GridPreset::SmokeTwo,
            PresetArg::FullSingle => GridPreset::FullSingle,
            PresetArg::Full => GridPreset::Full,
        };
    }
    if let Some(e) = a.engine {
        cfg.sweep.engine = Some(match e {
            EngineArg::Piecewise => EngineChoice::Piecewise,
            EngineArg::Lindblad => EngineChoice::Lindblad,
            EngineArg::Both => EngineChoice::Both,
        });
    }
    if let Some(n) = a.n_max {
        cfg.model.n_max = n;
    }
    if a.sub_samples.is_some() {
        cfg.sweep.sub_samples = a.sub_samples;
    }
}

fn sweep(mut cfg: RunConfig, a: SweepArgs) -> Result<()> {
    apply_sweep(&mut cfg, &a);
    let mut spec = cfg.sweep_spec()?;
    let dir = output_dir(&cfg)?;
    let csv = dir.join(format!("{}.csv", a.name));
    spec.output = Some(csv.clone());
    let result = experiments::run_sweep(&spec, cfg.jobs)?;
    experiments::write_results(&result, &csv)?;
    RunManifest::new(&spec, &result).write(&dir.join(format!("{}_manifest.toml", a.name)))?;
    experiments::emit_plot_script(Path::new(&format!("{}.csv", a.name)), &dir.join(format!("plot_{}.py", a.name)))?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "rows      {}", result.rows.len())?;
    writeln!(out, "failures  {}", result.failures())?;
    if !spec.is_single_pulse() {
        writeln!(out, "turning points (phi1 maximising S_L):")?;
        writeln!(out, "{:>10} {:>10} {:>10} {:>10}", "beta", "phi2/pi", "phi1/pi", "S_L")?;
        for tp in result.turning_points() {
            writeln!(out, "{:>10.5} {:>10.3} {:>10.3} {:>10.4}", tp.beta, tp.phi2 / PI, tp.phi1 / PI, tp.s_l)?;
        }
    }
    writeln!(out, "written   {}", csv.display())?;
    if result.failures() > 0 {
        bail!("{} grid points failed; see the error column", result.failures());
    }
    Ok(())
}

fn compare(mut cfg: RunConfig, a: SweepArgs) -> Result<()> {
    apply_sweep(&mut cfg, &a);
    let spec = cfg.sweep_spec()?;
    let cmp = experiments::compare_engines(&spec, cfg.jobs)?;
    let path = output_dir(&cfg)?.join(format!("{}_compare.csv", a.name));
    let mut buf = Vec::new();
    cmp.write_csv(&mut buf)?;
    write_file(&path, &buf)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "{:>10} {:>10} {:>12} {:>12}", "beta", "phi2/pi", "dP_esc", "dS_L")?;
    for r in &cmp.rows {
        writeln!(out, "{:>10.5} {:>10.3} {:>12.4e} {:>12.4e}", r.beta, r.phi2 / PI, r.d_escape, r.d_entropy)?;
    }
    writeln!(out, "corr(|dS_L|, phi2*beta) = {:.4}", cmp.correlation)?;
    writeln!(out, "written   {}", path.display())?;
    if let Some(r) = cmp.rows.iter().find(|r| r.error.is_some()) {
        bail!("engine comparison failed at beta = {}, phi2 = {}: {}", r.beta, r.phi2, r.error.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn grid(points: usize, stop: f64, inclusive: bool) -> Vec<f64> {
    let div = if inclusive { points.saturating_sub(1).max(1) } else { points };
    (0..points).map(|k| stop * k as f64 / div as f64).collect()
}

fn scan_bloch(mut cfg: RunConfig, a: ScanArgs) -> Result<()> {
    apply_protocol(&mut cfg, &a.protocol);
    if let Some(n) = a.theta_points {
        cfg.scan.theta_points = n;
    }
    if let Some(n) = a.phi_points {
        cfg.scan.phi_points = n;
    }
    if cfg.scan.theta_points == 0 || cfg.scan.phi_points == 0 {
        bail!("scan grids need at least one point");
    }
    let spec = cfg.protocol_spec()?;
    warn_addressability(&spec)?;
    let thetas = grid(cfg.scan.theta_points, PI, true);
    let phis = grid(cfg.scan.phi_points, 2.0 * PI, false);
    let scan = measures::bloch_scan(&spec, &thetas, &phis)?;
    let path = output_dir(&cfg)?.join(&a.out);
    let mut buf = Vec::new();
    scan.write_csv(&mut buf)?;
    write_file(&path, &buf)?;

    let (tmax, pmax) = scan.angles(scan.argmax());
    let (tmin, pmin) = scan.angles(scan.argmin());
    let alpha = spec.schedule()?.alpha;
    let mut out = std::io::stdout().lock();
    writeln!(out, "max N_BLP  {:.4} at theta = {:.3}π, phi = {:.3}π", scan.values.iter().flatten().cloned().fold(f64::MIN, f64::max), tmax / PI, pmax / PI)?;
    writeln!(out, "min N_BLP  {:.4} at theta = {:.3}π, phi = {:.3}π", scan.values.iter().flatten().cloned().fold(f64::MAX, f64::min), tmin / PI, pmin / PI)?;
    writeln!(out, "drive axis phase + π/2 = {:.3}π", measures::optimal_phase(alpha)? / PI)?;
    writeln!(out, "written    {}", path.display())?;
    Ok(())
}

fn rates(a: RatesArgs) -> Result<()> {
    let phi = if a.pi { a.phi * PI } else { a.phi };
    let r = rates_from_angle(phi);
    let mut out = std::io::stdout().lock();
    writeln!(out, "phi        {phi:.6}")?;
    writeln!(out, "gamma_A    {:.6}", r.gamma_a)?;
    writeln!(out, "gamma_Pi*  {:.6}", r.gamma_pi_star)?;
    writeln!(out, "gamma_Pi   {:.6}", r.gamma_pi)?;
    Ok(())
}

fn defaults() -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "# default run configuration; every key may be omitted")?;
    writeln!(out, "# angles are in units of pi; pair presets: ground, balanced, excited")?;
    writeln!(out, "# sweep presets: smoke-single (4x7), smoke-two (4x7x5), full-single (20x61), full (20x61x41)")?;
    write!(out, "{}", RunConfig::default().to_toml()?)?;
    Ok(())
}
