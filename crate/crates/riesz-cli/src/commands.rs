//! Subcommand implementations. Each returns a process exit code:
//! 0 success/pass, 1 computation failure, 2 invalid configuration,
//! 3 experiment conclusion `fail`, 4 experiment conclusion `inconclusive`.

use crate::config::{RunConfig, SCHEMA_DOC};
use crate::wos::{self, HornProfile, PreparedTarget, WosParams, WosTarget};
use clap::{Args, Parser, Subcommand};
use riesz_core::balayage::{self, SweepConfig};
use riesz_core::equilibrium::{self, Classification, ClassifyConfig, EquilibriumConfig, WienerMode};
use riesz_core::geometry::{Inversion, Point, PointCloud, Region, SampleMode};
use riesz_core::kernel::RieszParams;
use riesz_core::measure::DiscreteMeasure;
use riesz_core::principles::{self, Conclusion, ExperimentConfig, ExperimentName, PomTolerance};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAIL: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "riesz",
    version,
    about = "Riesz potential toolkit: capacities, equilibrium measures, sweeping, thinness diagnostics"
)]
pub struct Cli {
    /// Worker thread cap; 1 reproduces parallel runs bitwise.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (default: $RIESZ_OUT_DIR or the working directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inner capacity of a bounded region.
    Capacity(GeomArgs),
    /// Equilibrium measure of a bounded region (capacity + measure file).
    Equilibrium(GeomArgs),
    /// Sweep (balayage) of a measure onto a bounded region.
    Sweep(SweepArgs),
    /// Kelvin transform of a measure file under sphere inversion.
    Kelvin(KelvinArgs),
    /// Wiener-type series: thinness at infinity, regularity, capacity
    /// finiteness.
    Wiener(WienerArgs),
    /// Positivity-of-mass verdict for two measure files on a probe set.
    Pom(PomArgs),
    /// Run a named experiment preset.
    Experiment(ExperimentArgs),
    /// Independent stochastic oracles.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    /// Ambient dimension.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Kernel order, 0 < alpha <= 2, alpha < n.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
}

#[derive(Args, Debug, Clone)]
pub struct RegionArgs {
    /// Region kind: ball | shell | f1 | f2.
    #[arg(long, default_value = "ball")]
    pub region: String,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Profile parameter of the rotation bodies.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Truncate to |x| < CLIP (mandatory for unbounded bodies outside
    /// `wiener`).
    #[arg(long)]
    pub clip: Option<f64>,
    /// Center coordinates "x,y,z" (balls and shells).
    #[arg(long)]
    pub center: Option<String>,
}

#[derive(Args, Debug)]
pub struct GeomArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// surface | volume (default by alpha).
    #[arg(long)]
    pub mode: Option<String>,
    /// Optional Gram cache file (pure optimization; results are identical
    /// with the cache disabled).
    #[arg(long)]
    pub gram_cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    /// Source point "x,y,z" for a mollified Dirac source.
    #[arg(long, conflicts_with = "source_file")]
    pub source: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Source measure CSV (x1,...,xn,delta,weight).
    #[arg(long)]
    pub source_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Args, Debug)]
pub struct KelvinArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Measure CSV to transform.
    #[arg(long)]
    pub measure: PathBuf,
    /// Inversion center "x,y,z".
    #[arg(long, default_value = "0,0,0")]
    pub center: String,
}

#[derive(Args, Debug)]
pub struct WienerArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Body: f1 | f2 (rotation bodies) or ball (bounded smoke case).
    #[arg(long, default_value = "f2")]
    pub body: String,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// thinness | regularity | finiteness.
    #[arg(long, default_value = "thinness")]
    pub mode: String,
    /// Series center "x,y,z".
    #[arg(long, default_value = "0,0,0")]
    pub y: String,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 1)]
    pub jmin: u32,
    #[arg(long, default_value_t = 7)]
    pub jmax: u32,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct PomArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    #[arg(long)]
    pub probes: PathBuf,
    /// Relative pointwise slack.
    #[arg(long, default_value_t = 0.02)]
    pub rel: f64,
    #[arg(long, default_value_t = 0.0)]
    pub abs: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub mass_tol: f64,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// One of: f1-mass-retention, f2-mass-loss, sharpness, onset-pom,
    /// ball-benchmarks, kelvin-identities, thinness-atlas.
    pub name: String,
    /// Full experiment configuration JSON (the report echoes it).
    #[arg(long)]
    pub experiment_config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub shell_points: Option<usize>,
    #[arg(long)]
    pub slice_points: Option<usize>,
    /// Truncation radii "8,16,32".
    #[arg(long)]
    pub radii: Option<String>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(subcommand)]
    pub which: OracleCommand,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Walk-on-spheres Monte Carlo (Newtonian case only).
    Wos(WosArgs),
}

#[derive(Args, Debug)]
pub struct WosArgs {
    /// Target: ball | f1 | f2.
    #[arg(long, default_value = "ball")]
    pub target: String,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Truncation |x| <= CLIP for the rotation bodies.
    #[arg(long)]
    pub clip: Option<f64>,
    /// hitprob | capacity.
    #[arg(long, default_value = "hitprob")]
    pub mode: String,
    /// Source point "x,y,z" (hitprob mode).
    #[arg(long, default_value = "2,0,0")]
    pub source: String,
    #[arg(long, default_value_t = 200_000)]
    pub walks: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

// ---------------------------------------------------------------------------

struct Ctx {
    out_dir: PathBuf,
    file_config: Option<RunConfig>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Usage/parse problems are configuration errors; `--help` and
            // `--version` are ordinary successes.
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };

    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("--threads must be positive");
            return EXIT_CONFIG;
        }
        // Build the global pool once; later invocations in the same process
        // keep the first pool, which is fine because every computation is
        // thread-count invariant.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("RIESZ_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create output directory {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }

    let file_config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => {
                if let Err(e) = cfg.validate() {
                    eprintln!("invalid config: {e}\n{SCHEMA_DOC}");
                    return EXIT_CONFIG;
                }
                Some(cfg)
            }
            Err(e) => {
                eprintln!("invalid config: {e}\n{SCHEMA_DOC}");
                return EXIT_CONFIG;
            }
        },
        None => None,
    };

    let ctx = Ctx {
        out_dir,
        file_config,
    };

    let result = match cli.command {
        Command::Capacity(a) => cmd_capacity(&ctx, a, false),
        Command::Equilibrium(a) => cmd_capacity(&ctx, a, true),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::Kelvin(a) => cmd_kelvin(&ctx, a),
        Command::Wiener(a) => cmd_wiener(&ctx, a),
        Command::Pom(a) => cmd_pom(&ctx, a),
        Command::Experiment(a) => cmd_experiment(&ctx, a),
        Command::Oracle(a) => match a.which {
            OracleCommand::Wos(w) => cmd_wos(&ctx, w),
        },
    };

    match result {
        Ok(code) => code,
        Err(CmdError::Config(msg)) => {
            eprintln!("invalid config: {msg}");
            EXIT_CONFIG
        }
        Err(CmdError::Compute(msg)) => {
            eprintln!("computation failed: {msg}");
            EXIT_COMPUTE
        }
    }
}

enum CmdError {
    Config(String),
    Compute(String),
}

impl From<riesz_core::Error> for CmdError {
    fn from(e: riesz_core::Error) -> Self {
        CmdError::Compute(e.to_string())
    }
}

type CmdResult = Result<i32, CmdError>;

fn parse_point(text: &str, n: usize) -> Result<Point, CmdError> {
    let coords: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|e| CmdError::Config(format!("bad point '{text}': {e}")))?;
    if coords.len() != n {
        return Err(CmdError::Config(format!(
            "point '{text}' has {} coordinates, expected {n}",
            coords.len()
        )));
    }
    Ok(Point::new(coords))
}

fn parse_mode(mode: &Option<String>) -> Result<Option<SampleMode>, CmdError> {
    match mode.as_deref() {
        None => Ok(None),
        Some("surface") => Ok(Some(SampleMode::Surface)),
        Some("volume") => Ok(Some(SampleMode::Volume)),
        Some(other) => Err(CmdError::Config(format!(
            "mode must be surface|volume, got '{other}'"
        ))),
    }
}

fn kernel_params(ctx: &Ctx, args: &KernelArgs) -> Result<RieszParams, CmdError> {
    let (n, alpha) = match &ctx.file_config {
        Some(cfg) => (cfg.params.n, cfg.params.alpha),
        None => (args.n, args.alpha),
    };
    RieszParams::new(n, alpha).map_err(|e| CmdError::Config(e.to_string()))
}

fn build_region(ctx: &Ctx, args: &RegionArgs, n: usize, need_bounded: bool) -> Result<Region, CmdError> {
    if let Some(cfg) = &ctx.file_config {
        if let Some(region) = &cfg.region {
            if need_bounded && !region.is_bounded() {
                return Err(CmdError::Config(
                    "region must be bounded (add an annulus clip)".into(),
                ));
            }
            return Ok(region.clone());
        }
    }
    let center = match &args.center {
        Some(text) => parse_point(text, n)?,
        None => Point::new(vec![0.0; n]),
    };
    if !(args.radius > 0.0) {
        return Err(CmdError::Config("radius must be positive".into()));
    }
    let base = match args.region.as_str() {
        "ball" => Region::Ball {
            center,
            radius: args.radius,
        },
        "shell" => Region::SphereShell {
            center,
            radius: args.radius,
        },
        "f1" => Region::rotation_body_power(args.s),
        "f2" => Region::rotation_body_exp(args.s),
        other => {
            return Err(CmdError::Config(format!(
                "region must be ball|shell|f1|f2, got '{other}'"
            )))
        }
    };
    let region = match args.clip {
        Some(r) if r > 0.0 => Region::AnnulusClip {
            inner: Box::new(base),
            center: Point::new(vec![0.0; n]),
            r_lo: 0.0,
            r_hi: r,
        },
        Some(_) => return Err(CmdError::Config("clip radius must be positive".into())),
        None => base,
    };
    region
        .validate()
        .map_err(|e| CmdError::Config(e.to_string()))?;
    if need_bounded && !region.is_bounded() {
        return Err(CmdError::Config(
            "region must be bounded; pass --clip R to truncate".into(),
        ));
    }
    Ok(region)
}

fn write(path: &Path, contents: &str) -> Result<(), CmdError> {
    std::fs::write(path, contents).map_err(|e| CmdError::Compute(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct CapacityReport<'a> {
    command: &'a str,
    params: RieszParams,
    region: &'a Region,
    resolution: usize,
    seed: u64,
    capacity: f64,
    energy: f64,
    mass_energy_residual: f64,
    support_potential_dev: f64,
    min_grid_slack: f64,
    solver: &'a riesz_core::balayage::SolverMeta,
}

fn cmd_capacity(ctx: &Ctx, args: GeomArgs, write_measure: bool) -> CmdResult {
    let params = kernel_params(ctx, &args.kernel)?;
    let region = build_region(ctx, &args.region, params.n, true)?;
    let resolution = ctx
        .file_config
        .as_ref()
        .and_then(|c| c.resolution)
        .unwrap_or(args.points);
    let seed = ctx
        .file_config
        .as_ref()
        .and_then(|c| c.seed)
        .unwrap_or(args.seed);
    let mode = match parse_mode(&args.mode)? {
        Some(m) => Some(m),
        None => ctx.file_config.as_ref().and_then(|c| c.mode),
    };
    let cfg = EquilibriumConfig {
        seed,
        mode,
        ..EquilibriumConfig::default()
    };

    // Optional gram cache: identical results either way; on miss the cache is
    // rebuilt for next time.
    let res = if let Some(cache) = &args.gram_cache {
        let sample_mode = mode.unwrap_or_else(|| balayage::default_mode(&params));
        let cloud = riesz_core::geometry::sample(&region, resolution, sample_mode, seed)?;
        match riesz_core::kernel::GramMatrix::load_cache(cache, &cloud, &params)? {
            Some(_) => {}
            None => {
                let g = riesz_core::kernel::gram(&cloud, &params)?;
                g.save_cache(cache)?;
            }
        }
        equilibrium::equilibrium_on_cloud(&cloud, &params, &cfg)?
    } else {
        equilibrium::equilibrium_measure(&region, resolution, &params, &cfg)?
    };

    if !res.solver.converged {
        return Err(CmdError::Compute(format!(
            "equilibrium solve did not converge (residual {:.2e})",
            res.solver.kkt_residual
        )));
    }

    let report = CapacityReport {
        command: if write_measure { "equilibrium" } else { "capacity" },
        params,
        region: &region,
        resolution,
        seed,
        capacity: res.capacity,
        energy: res.energy_value,
        mass_energy_residual: (res.capacity - res.energy_value).abs(),
        support_potential_dev: res.potential_on_set.max_support_dev,
        min_grid_slack: res.potential_on_set.min_slack,
        solver: &res.solver,
    };
    let name = if write_measure {
        "equilibrium_report.json"
    } else {
        "capacity_report.json"
    };
    write(&ctx.path(name), &to_pretty(&report)?)?;
    if write_measure {
        write(&ctx.path("equilibrium_measure.csv"), &res.gamma.to_csv())?;
    }
    println!("capacity = {:.6}", res.capacity);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    command: &'a str,
    params: RieszParams,
    region: &'a Region,
    resolution: usize,
    seed: u64,
    source_mass: f64,
    swept_mass: f64,
    mass_ratio: f64,
    on_set_gap: &'a riesz_core::balayage::GapStats,
    on_support_gap: &'a riesz_core::balayage::GapStats,
    off_set_domination: &'a riesz_core::balayage::GapStats,
    mass_bound_ok: bool,
    solver: &'a riesz_core::balayage::SolverMeta,
}

fn cmd_sweep(ctx: &Ctx, args: SweepArgs) -> CmdResult {
    let params = kernel_params(ctx, &args.kernel)?;
    let region = build_region(ctx, &args.region, params.n, true)?;
    let sigma = match (&args.source, &args.source_file) {
        (Some(text), None) => {
            let p = parse_point(text, params.n)?;
            if !(args.mass > 0.0 && args.delta > 0.0) {
                return Err(CmdError::Config("mass and delta must be positive".into()));
            }
            DiscreteMeasure::mollified_dirac(p, args.mass, args.delta)?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))?;
            DiscreteMeasure::from_csv(&text, SampleMode::Volume)
                .map_err(|e| CmdError::Config(e.to_string()))?
        }
        _ => {
            return Err(CmdError::Config(
                "exactly one of --source or --source-file is required".into(),
            ))
        }
    };
    let cfg = SweepConfig {
        resolution: ctx
            .file_config
            .as_ref()
            .and_then(|c| c.resolution)
            .unwrap_or(args.points),
        seed: ctx
            .file_config
            .as_ref()
            .and_then(|c| c.seed)
            .unwrap_or(args.seed),
        mode: parse_mode(&args.mode)?.or_else(|| ctx.file_config.as_ref().and_then(|c| c.mode)),
        ..SweepConfig::default()
    };
    let res = balayage::sweep(&sigma, &region, &params, &cfg)?;
    if !res.solver.converged {
        return Err(CmdError::Compute(format!(
            "sweep solve did not converge (residual {:.2e})",
            res.solver.kkt_residual
        )));
    }
    let report = SweepReport {
        command: "sweep",
        params,
        region: &region,
        resolution: cfg.resolution,
        seed: cfg.seed,
        source_mass: res.source_mass,
        swept_mass: res.swept_mass,
        mass_ratio: res.mass_ratio(),
        on_set_gap: &res.on_set_match,
        on_support_gap: &res.on_support_match,
        off_set_domination: &res.off_set_domination,
        mass_bound_ok: res.mass_bound_ok,
        solver: &res.solver,
    };
    write(&ctx.path("sweep_report.json"), &to_pretty(&report)?)?;
    write(&ctx.path("swept_measure.csv"), &res.swept.to_csv())?;
    println!(
        "swept mass = {:.6} (source {:.6}, ratio {:.6})",
        res.swept_mass,
        res.source_mass,
        res.mass_ratio()
    );
    Ok(EXIT_OK)
}

fn cmd_kelvin(ctx: &Ctx, args: KelvinArgs) -> CmdResult {
    let params = kernel_params(ctx, &args.kernel)?;
    let center = parse_point(&args.center, params.n)?;
    let text = std::fs::read_to_string(&args.measure)
        .map_err(|e| CmdError::Config(format!("{}: {e}", args.measure.display())))?;
    let nu = DiscreteMeasure::from_csv(&text, SampleMode::Volume)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let star = nu.kelvin_transform(&Inversion::new(center.clone()), &params)?;
    let duality = riesz_core::kernel::potential_exact(&star, &center, &params);
    write(&ctx.path("kelvin_measure.csv"), &star.to_csv())?;
    println!(
        "transformed {} atoms; mass(nu) = {:.12}, potential of nu* at center = {:.12}",
        star.len(),
        nu.total_mass(),
        duality
    );
    Ok(EXIT_OK)
}

fn cmd_wiener(ctx: &Ctx, args: WienerArgs) -> CmdResult {
    let params = kernel_params(ctx, &args.kernel)?;
    let mode = match args.mode.as_str() {
        "thinness" => WienerMode::Thinness,
        "regularity" => WienerMode::Regularity,
        "finiteness" => WienerMode::Finiteness,
        other => {
            return Err(CmdError::Config(format!(
                "mode must be thinness|regularity|finiteness, got '{other}'"
            )))
        }
    };
    let region = match args.body.as_str() {
        "f1" => Region::rotation_body_power(args.s),
        "f2" => Region::rotation_body_exp(args.s),
        "ball" => Region::Ball {
            center: Point::new(vec![0.0; params.n]),
            radius: args.radius,
        },
        other => {
            return Err(CmdError::Config(format!(
                "body must be f1|f2|ball, got '{other}'"
            )))
        }
    };
    if args.jmin > args.jmax {
        return Err(CmdError::Config("jmin must be <= jmax".into()));
    }
    let y = parse_point(&args.y, params.n)?;
    let report = equilibrium::wiener_series(
        &region,
        mode,
        &y,
        args.q,
        args.jmin..=args.jmax,
        args.points,
        &params,
        &ClassifyConfig::default(),
        args.seed,
    )?;
    write(&ctx.path("wiener_series.csv"), &report.to_csv())?;
    write(&ctx.path("wiener_summary.json"), &report.to_json())?;
    let gloss = match (mode, report.classification) {
        (WienerMode::Thinness, Classification::Convergent) => "convergent (thin)",
        (WienerMode::Thinness, Classification::Divergent) => "divergent (not thin)",
        (WienerMode::Regularity, Classification::Convergent) => "convergent (irregular point)",
        (WienerMode::Regularity, Classification::Divergent) => "divergent (regular point)",
        (WienerMode::Finiteness, Classification::Convergent) => "convergent (finite capacity)",
        (WienerMode::Finiteness, Classification::Divergent) => "divergent (infinite capacity)",
        (_, Classification::Inconclusive) => "inconclusive",
    };
    println!("classification: {gloss}");
    Ok(EXIT_OK)
}

fn cmd_pom(ctx: &Ctx, args: PomArgs) -> CmdResult {
    let params = kernel_params(ctx, &args.kernel)?;
    let read_measure = |path: &Path| -> Result<DiscreteMeasure, CmdError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))?;
        DiscreteMeasure::from_csv(&text, SampleMode::Volume)
            .map_err(|e| CmdError::Config(e.to_string()))
    };
    let mu = read_measure(&args.mu)?;
    let nu = read_measure(&args.nu)?;
    let probes_text = std::fs::read_to_string(&args.probes)
        .map_err(|e| CmdError::Config(format!("{}: {e}", args.probes.display())))?;
    let probes = PointCloud::from_csv(&probes_text, SampleMode::Volume)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let tol = PomTolerance {
        rel: args.rel,
        abs: args.abs,
        mass: args.mass_tol,
    };
    let verdict = principles::pom_verify_with(&mu, &nu, &probes, &tol, &params)?;
    write(&ctx.path("pom_verdict.json"), &to_pretty(&verdict)?)?;
    println!(
        "pointwiseHolds = {}\nmassMu = {:.12}\nmassNu = {:.12}\nmassInequalityHolds = {}\nexcludedProbes = {}\nmaxPointwiseExcess = {:.6e}",
        verdict.pointwise_holds,
        verdict.mass_mu,
        verdict.mass_nu,
        verdict.mass_inequality_holds,
        verdict.excluded_probes,
        verdict.max_pointwise_excess
    );
    Ok(EXIT_OK)
}

fn cmd_experiment(ctx: &Ctx, args: ExperimentArgs) -> CmdResult {
    let name: ExperimentName = args
        .name
        .parse()
        .map_err(|e: riesz_core::Error| CmdError::Config(e.to_string()))?;
    let mut cfg = match &args.experiment_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(p) = args.points {
        cfg.resolution = p;
    }
    if let Some(p) = args.shell_points {
        cfg.shell_resolution = p;
    }
    if let Some(p) = args.slice_points {
        cfg.slice_resolution = p;
    }
    if let Some(radii) = &args.radii {
        let parsed: Result<Vec<f64>, _> = radii.split(',').map(|v| v.trim().parse()).collect();
        cfg.truncation_radii =
            parsed.map_err(|e| CmdError::Config(format!("bad radii '{radii}': {e}")))?;
        if cfg.truncation_radii.len() < 2
            || cfg.truncation_radii.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(CmdError::Config(
                "radii must be at least two strictly increasing values".into(),
            ));
        }
    }
    RieszParams::new(cfg.params.n, cfg.params.alpha)
        .map_err(|e| CmdError::Config(e.to_string()))?;

    let report = principles::run_experiment(name, &cfg)?;
    let json_path = ctx.path(&format!("experiment_{}.json", name.as_str()));
    principles::write_report_atomic(&report, &json_path)?;

    // Summary table and plot-ready data files.
    let mut summary = String::from("experiment,conclusion,key,value\n");
    if let Some(map) = report.stages.as_object() {
        for (k, v) in map {
            if let Some(x) = v.as_f64() {
                summary.push_str(&format!(
                    "{},{:?},{k},{x:.17e}\n",
                    report.name, report.conclusion
                ));
            }
        }
    }
    write(
        &ctx.path(&format!("experiment_{}_summary.csv", name.as_str())),
        &summary,
    )?;
    if let Some(ratios) = report.stages.get("mass_ratios").and_then(|v| v.as_array()) {
        let mut data = String::from("# stage massRatio\n");
        for (k, r) in ratios.iter().enumerate() {
            data.push_str(&format!("{k} {:.17e}\n", r.as_f64().unwrap_or(f64::NAN)));
        }
        write(
            &ctx.path(&format!("experiment_{}_ratios.dat", name.as_str())),
            &data,
        )?;
    }
    if let Some(trace) = report.stages.get("trace_csv").and_then(|v| v.as_str()) {
        write(
            &ctx.path(&format!("experiment_{}_trace.csv", name.as_str())),
            trace,
        )?;
    }
    if let Some(rows) = report.stages.get("rows").and_then(|v| v.as_array()) {
        let mut data = String::from("# label j term\n");
        for row in rows {
            if let (Some(label), Some(terms)) = (
                row.get("label").and_then(|v| v.as_str()),
                row.get("terms").and_then(|v| v.as_array()),
            ) {
                for (j, t) in terms.iter().enumerate() {
                    data.push_str(&format!(
                        "\"{label}\" {} {:.17e}\n",
                        j + 1,
                        t.as_f64().unwrap_or(f64::NAN)
                    ));
                }
            }
        }
        write(
            &ctx.path(&format!("experiment_{}_terms.dat", name.as_str())),
            &data,
        )?;
    }

    println!(
        "experiment {}: {:?} ({} ms)",
        report.name, report.conclusion, report.wall_ms
    );
    Ok(match report.conclusion {
        Conclusion::Pass => EXIT_OK,
        Conclusion::Fail => EXIT_FAIL,
        Conclusion::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn cmd_wos(ctx: &Ctx, args: WosArgs) -> CmdResult {
    let target = match args.target.as_str() {
        "ball" => {
            if !(args.radius > 0.0) {
                return Err(CmdError::Config("radius must be positive".into()));
            }
            WosTarget::Ball {
                center: [0.0; 3],
                radius: args.radius,
            }
        }
        "f1" | "f2" => {
            let clip = args.clip.ok_or_else(|| {
                CmdError::Config("rotation-body targets need --clip R".into())
            })?;
            if !(clip > 0.0) {
                return Err(CmdError::Config("clip radius must be positive".into()));
            }
            let profile = if args.target == "f1" {
                HornProfile::Power { s: args.s }
            } else {
                HornProfile::Exp { s: args.s }
            };
            WosTarget::Horn {
                profile,
                clip_radius: clip,
            }
        }
        other => {
            return Err(CmdError::Config(format!(
                "target must be ball|f1|f2, got '{other}'"
            )))
        }
    };
    let prepared = PreparedTarget::new(target.clone());
    let params = WosParams {
        walks: args.walks,
        eps: args.eps,
        seed: args.seed,
        ..WosParams::default()
    };
    let estimate = match args.mode.as_str() {
        "hitprob" => {
            let p = parse_point(&args.source, 3)?;
            let source = [p.coords[0], p.coords[1], p.coords[2]];
            if prepared.distance(&source) <= 0.0 {
                return Err(CmdError::Config("source lies inside the target".into()));
            }
            wos::hit_probability(&prepared, source, &params)
        }
        "capacity" => wos::capacity(&prepared, &params),
        other => {
            return Err(CmdError::Config(format!(
                "mode must be hitprob|capacity, got '{other}'"
            )))
        }
    };

    #[derive(Serialize)]
    struct WosReport<'a> {
        target: &'a WosTarget,
        mode: &'a str,
        params: &'a WosParams,
        estimate: &'a wos::WosEstimate,
    }
    write(
        &ctx.path("wos_report.json"),
        &to_pretty(&WosReport {
            target: &target,
            mode: &args.mode,
            params: &params,
            estimate: &estimate,
        })?,
    )?;
    println!(
        "{} = {:.6} +- {:.6} ({} walks, {} truncated)",
        args.mode, estimate.value, estimate.std_error, estimate.walks, estimate.truncated
    );
    Ok(EXIT_OK)
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String, CmdError> {
    serde_json::to_string_pretty(value).map_err(|e| CmdError::Compute(e.to_string()))
}
