//! Command-line front end. Every run writes its data files plus a
//! `manifest.json` with SHA-256 digests of inputs and outputs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::lorenz_exponential;
use crate::energy::{self, EnergyUnit};
use crate::error::{Error, Result};
use crate::fokker_planck::{self, DiffusionKind, DriftDiffusionSpec, Grid, GridDistribution, TransientSolver};
use crate::income::{self, FitOptions, IncomeBinTable, SyntheticSpec, Window};
use crate::kinetic::{self, RuleKind, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "ineqstat", version, about = "Statistical mechanics of money, income and energy inequality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kinetic money-exchange simulation
    Simulate(SimulateArgs),
    /// Fokker-Planck stationary and transient income densities
    Fp(FpArgs),
    /// Two-class fit of binned income data
    FitIncome(FitArgs),
    /// Population-weighted energy consumption inequality
    Energy(EnergyArgs),
    /// Check the digests recorded in a run manifest
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON SimConfig; replaces the individual flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    agents: Option<usize>,
    /// Total money in quanta
    #[arg(long, required_unless_present = "config")]
    money: Option<i64>,
    #[arg(long, default_value_t = 1.0)]
    quantum: f64,
    #[arg(long, required_unless_present = "config")]
    steps: Option<u64>,
    #[arg(long, default_value = "uniform")]
    rule: RuleKind,
    /// Quanta per transaction for the fixed rule
    #[arg(long, default_value_t = 1)]
    delta: i64,
    /// Largest allowed debt in quanta
    #[arg(long, default_value_t = 0)]
    debt_limit: i64,
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
    /// Steps between checkpoints (default: steps / 100)
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FpArgs {
    /// JSON DriftDiffusionSpec; replaces the coefficient flags
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    kind: Option<DiffusionKind>,
    #[arg(long = "A0", default_value_t = 0.0)]
    a0: f64,
    #[arg(long = "B0", default_value_t = 0.0)]
    b0: f64,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    /// Log-grid points per e-fold
    #[arg(long, default_value_t = 200)]
    per_efold: usize,
    /// Also evolve a unit pulse placed at this income
    #[arg(long)]
    pulse_at: Option<f64>,
    /// Linear transient grid: number of points on [0, 50 max(T, r0)]
    #[arg(long, default_value_t = 401)]
    transient_points: usize,
    #[arg(long, default_value_t = 10_000)]
    transient_steps: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Binned income CSV; repeat for several years
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Year tags matched to inputs in order
    #[arg(long)]
    year: Vec<i32>,
    /// Generate a table from T,ALPHA,R0 instead of reading one
    #[arg(long, value_delimiter = ',', value_name = "T,ALPHA,R0")]
    synthetic: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 50)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// C_e range of the exponential stage
    #[arg(long, value_delimiter = ',', value_name = "LO,HI")]
    exp_window: Option<Vec<f64>>,
    /// C_e range of the power-law stage
    #[arg(long, value_delimiter = ',', value_name = "LO,HI")]
    tail_window: Option<Vec<f64>>,
    /// Joint refinement of (T, alpha, r0) after the staged fit
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EnergyArgs {
    #[arg(long, required_unless_present = "fixture")]
    energy: Option<PathBuf>,
    #[arg(long, required_unless_present = "fixture")]
    population: Option<PathBuf>,
    #[arg(long)]
    year: i32,
    /// Energy values are kW per person rather than ktoe per year
    #[arg(long)]
    per_capita: bool,
    /// Use the embedded 22-country table
    #[arg(long, conflicts_with_all = ["energy", "population"])]
    fixture: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub created_unix: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects written files for the manifest.
struct RunDir {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(RunDir { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(self, subcommand: &str, config: serde_json::Value, inputs: &[PathBuf]) -> Result<()> {
        let inputs = inputs
            .iter()
            .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|name| Ok(FileDigest { path: name.clone(), sha256: sha256_file(&self.dir.join(name))? }))
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config,
            inputs,
            outputs,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        emit_manifest(&self.dir, &manifest)?;
        eprintln!("wrote {} files and manifest.json to {}", manifest.outputs.len(), self.dir.display());
        Ok(())
    }
}

pub fn emit_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Files whose current digest differs from the manifest (outputs resolved
/// against the manifest's directory).
pub fn verify_manifest(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut bad = Vec::new();
    let inputs = manifest.inputs.iter().map(|d| (PathBuf::from(&d.path), d));
    let outputs = manifest.outputs.iter().map(|d| (dir.join(&d.path), d));
    for (p, d) in inputs.chain(outputs) {
        match sha256_file(&p) {
            Ok(h) if h == d.sha256 => {}
            _ => bad.push(p.display().to_string()),
        }
    }
    Ok(bad)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn csv_text(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct SimSummary {
    n_agents: usize,
    total_money_quanta: i64,
    temperature: f64,
    chemical_potential: Option<f64>,
    entropy_final: f64,
    entropy_equilibrium: f64,
    ks_distance: f64,
    min_balance: i64,
    steps: u64,
    accepted: u64,
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let (config, inputs) = match &args.config {
        Some(p) => (read_json::<SimConfig>(p)?, vec![p.clone()]),
        None => {
            let steps = args.steps.unwrap_or(0);
            let config = SimConfig {
                n_agents: args.agents.unwrap_or(0),
                total_money_quanta: args.money.unwrap_or(0),
                quantum_value: args.quantum,
                rule: args.rule,
                delta: args.delta,
                floor: -args.debt_limit.abs(),
                steps,
                seed: args.seed.unwrap_or(0),
                checkpoint_every: args.checkpoint_every.unwrap_or((steps / 100).max(1)),
            };
            (config, vec![])
        }
    };
    let traj = config.run()?;
    let mut run = RunDir::create(&args.out)?;
    run.write(
        "trajectory.csv",
        csv_text(
            "step,entropy,temperature",
            traj.checkpoints.iter().map(|c| format!("{},{},{}", c.step, c.entropy, c.temperature)),
        )
        .as_bytes(),
    )?;
    let h = &traj.final_histogram;
    run.write(
        "histogram.csv",
        csv_text("bin_lower,count", h.counts.iter().enumerate().map(|(k, c)| format!("{},{c}", h.bin_lower(k))))
            .as_bytes(),
    )?;
    let ens = &traj.final_ensemble;
    let last = traj.checkpoints.last().copied();
    let summary = SimSummary {
        n_agents: ens.len(),
        total_money_quanta: ens.total(),
        temperature: ens.temperature(),
        chemical_potential: kinetic::temperature_and_potential(ens).ok().map(|p| p.1),
        entropy_final: last.map_or(0.0, |c| c.entropy),
        entropy_equilibrium: kinetic::equilibrium_entropy(ens.len(), ens.total() as f64 / ens.len() as f64),
        ks_distance: kinetic::ks_distance_exponential(ens.balances(), config.floor),
        min_balance: ens.min_balance(),
        steps: config.steps,
        accepted: last.map_or(0, |c| c.accepted),
    };
    run.write_json("summary.json", &summary)?;
    run.finish("simulate", serde_json::to_value(&config)?, &inputs)
}

fn distribution_csv(p: &GridDistribution) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf)?;
    Ok(buf)
}

fn run_fp(args: FpArgs) -> Result<()> {
    let (spec, inputs) = match &args.spec {
        Some(p) => (read_json::<DriftDiffusionSpec>(p)?.validated()?, vec![p.clone()]),
        None => {
            let kind = args.kind.ok_or_else(|| Error::Config("--kind is required".into()))?;
            let spec = DriftDiffusionSpec { kind, a0: args.a0, b0: args.b0, a: args.a, b: args.b };
            (spec.validated()?, vec![])
        }
    };
    let grid = Grid::for_spec(&spec, args.per_efold)?;
    let stationary = fokker_planck::stationary_solution(&spec, &grid)?;
    let mut run = RunDir::create(&args.out)?;
    run.write("stationary.csv", &distribution_csv(&stationary)?)?;
    let diag = csv_text(
        "r,delta_r2",
        grid.points().iter().map(|&r| format!("{r},{}", fokker_planck::delta_r2_diagnostic(r, &spec))),
    );
    run.write("delta_r2.csv", diag.as_bytes())?;

    if let Some(r_pulse) = args.pulse_at {
        let scale = spec.temperature().unwrap_or(1.0).max(spec.r0().unwrap_or(0.0));
        let r_max = (50.0 * scale).max(2.0 * r_pulse);
        let r_min = if spec.kind == DiffusionKind::Multiplicative { r_max / args.transient_points as f64 } else { 0.0 };
        let tgrid = Grid::linear(r_min, r_max, args.transient_points)?;
        let dt = fokker_planck::stable_time_step(&tgrid, &spec)?;
        let mut solver = TransientSolver::new(GridDistribution::pulse(tgrid.clone(), r_pulse)?, &spec, dt)?;
        solver.run(args.transient_steps);
        run.write("transient.csv", &distribution_csv(solver.state())?)?;
    }
    let config = serde_json::json!({
        "spec": spec,
        "per_efold": args.per_efold,
        "pulse_at": args.pulse_at,
        "transient_points": args.transient_points,
        "transient_steps": args.transient_steps,
    });
    run.finish("fp", config, &inputs)
}

fn window(v: &Option<Vec<f64>>, default: Window) -> Result<Window> {
    match v.as_deref() {
        Some([lo, hi]) => Window::new(*lo, *hi),
        Some(_) => Err(Error::Config("fit window takes LO,HI".into())),
        None => Ok(default),
    }
}

fn run_fit(args: FitArgs) -> Result<()> {
    let opts = FitOptions {
        exp_window: window(&args.exp_window, Window::EXPONENTIAL)?,
        tail_window: window(&args.tail_window, Window::TAIL)?,
        refine: args.refine,
    };
    let mut tables: Vec<(String, IncomeBinTable)> = Vec::new();
    let mut run = RunDir::create(&args.out)?;
    let mut synthetic = None;
    if let Some(p) = &args.synthetic {
        let [t, alpha, r0] = p[..] else {
            return Err(Error::Config("--synthetic takes T,ALPHA,R0".into()));
        };
        let spec = SyntheticSpec {
            t,
            alpha,
            r0,
            samples: args.samples,
            levels: args.levels,
            seed: args.seed,
            c_min: 1e-4,
        };
        let mut table = income::synthetic_table(&spec)?;
        table.year = args.year.first().copied();
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        run.write("synthetic.csv", &buf)?;
        tables.push(("synthetic".into(), table));
        synthetic = Some(spec);
    } else if args.input.is_empty() {
        return Err(Error::Config("give --input or --synthetic".into()));
    }
    for (i, path) in args.input.iter().enumerate() {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let year = args.year.get(i).copied();
        let table = IncomeBinTable::from_csv(file, &path.display().to_string(), year)?;
        let stem = path.file_stem().map_or_else(|| format!("input{i}"), |s| s.to_string_lossy().into_owned());
        tables.push((stem, table));
    }
    let single = tables.len() == 1;
    println!("{}", income::FitReport::table_header());
    for (stem, table) in &tables {
        let report = income::fit_report(table, &opts)?;
        println!("{}", report.table_row());
        let (fit_name, lorenz_name) = if single {
            ("fit.json".to_string(), "lorenz.csv".to_string())
        } else {
            (format!("fit_{stem}.json"), format!("lorenz_{stem}.csv"))
        };
        run.write_json(&fit_name, &report)?;
        let mut buf = Vec::new();
        report.write_lorenz_csv(&mut buf)?;
        run.write(&lorenz_name, &buf)?;
    }
    let config = serde_json::json!({
        "options": opts,
        "years": args.year,
        "synthetic": synthetic,
    });
    run.finish("fit-income", config, &args.input)
}

fn run_energy(args: EnergyArgs) -> Result<()> {
    let (records, dropped, inputs) = if args.fixture {
        (energy::fixture::records(args.year)?, 0, vec![])
    } else {
        let (ep, pp) = match (&args.energy, &args.population) {
            (Some(e), Some(p)) => (e.clone(), p.clone()),
            _ => return Err(Error::Config("--energy and --population are required".into())),
        };
        let unit = if args.per_capita { EnergyUnit::PerCapitaKw } else { EnergyUnit::Ktoe };
        let ef = fs::File::open(&ep).map_err(|e| Error::io(&ep, e))?;
        let pf = fs::File::open(&pp).map_err(|e| Error::io(&pp, e))?;
        let report =
            energy::ingest_wri(ef, &ep.display().to_string(), pf, &pp.display().to_string(), args.year, unit)?;
        if report.dropped > 0 {
            eprintln!("dropped {} rows without a usable partner", report.dropped);
        }
        (report.records, report.dropped, vec![ep, pp])
    };
    let summary = energy::summarize(args.year, &records, dropped)?;
    let cdf = energy::weighted_cdf(&records)?;
    let curve = energy::lorenz_energy(&records)?;
    let overlay = energy::exponential_overlay(summary.world_avg_kw, cdf.values())?;

    let mut run = RunDir::create(&args.out)?;
    run.write("cdf.csv", csv_text("epsilon_kw,C", cdf.points().map(|(e, c)| format!("{e},{c}"))).as_bytes())?;
    run.write(
        "lorenz.csv",
        csv_text("x,y", curve.points().iter().map(|(x, y)| format!("{x},{y}"))).as_bytes(),
    )?;
    run.write(
        "overlay.csv",
        csv_text(
            "epsilon_kw,C_exponential",
            overlay.iter().map(|(e, c)| format!("{e},{c}")),
        )
        .as_bytes(),
    )?;
    let exp_lorenz = (0..=100)
        .map(|i| {
            let x = i as f64 / 100.0;
            lorenz_exponential(x).map(|y| format!("{x},{y}"))
        })
        .collect::<Result<Vec<_>>>()?;
    run.write("lorenz_exponential.csv", csv_text("x,y", exp_lorenz).as_bytes())?;
    run.write_json("summary.json", &summary)?;
    let config = serde_json::json!({
        "year": args.year,
        "per_capita": args.per_capita,
        "fixture": args.fixture,
    });
    run.finish("energy", config, &inputs)
}

fn run_verify(args: VerifyArgs) -> Result<()> {
    let bad = verify_manifest(&args.manifest)?;
    if bad.is_empty() {
        eprintln!("all digests match");
        Ok(())
    } else {
        Err(Error::Config(format!("digest mismatch: {}", bad.join(", "))))
    }
}

/// Parses `argv` (program name first) and runs the selected pipeline.
/// Returns 0 on success, 1 on pipeline errors, 2 on usage errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Fp(a) => run_fp(a),
        Command::FitIncome(a) => run_fit(a),
        Command::Energy(a) => run_energy(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
