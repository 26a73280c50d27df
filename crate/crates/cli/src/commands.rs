//! Command-line surface and the subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use vnb_planning::bench::{calibration_experiment, enumerate_episodes, generate_dataset, run_benchmark, run_single, run_single_with_env, worker_count, parallel_map, BenchConfig, BenchNets, Method};
use vnb_planning::nets::BeliefNets;
use vnb_planning::planner::MpcConfig;
use vnb_planning::sim::{stress_test, FrictionRegime, PerturbationSuite};
use vnb_planning::training::{read_dataset, train_belief_nets, write_dataset, TrainConfig};

use crate::config::{Profile, RunConfig};
use crate::error::CliError;
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "vnb", version, about = "Risk-aware grasp planning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out scripted closing episodes and write a trajectory dataset.
    GenData(CommonArgs),
    /// Train belief networks on a trajectory dataset.
    Train(TrainArgs),
    /// Run a single planning episode.
    Plan(CommonArgs),
    /// Run the benchmark cross-product and write the results tables.
    Bench(CommonArgs),
    /// Run episodes and report the outcome of every perturbation test.
    Stress(CommonArgs),
    /// Compare belief-predicted and empirical failure rates on known ground truth.
    Calibrate(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML or JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Planning method(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<Method>,
    /// Friction regime(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub regime: Vec<FrictionRegime>,
    /// Object name(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub object: Vec<String>,
    /// CVaR level(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Belief EMA rate.
    #[arg(long)]
    pub ema: Option<f64>,
    /// Mixture belief weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Single-component belief weights.
    #[arg(long)]
    pub weights_gauss: Option<PathBuf>,
    /// Trajectory dataset path.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Record wall-clock planning time (true/false).
    #[arg(long)]
    pub timing: Option<bool>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of mixture components.
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl CommonArgs {
    /// Loads the configuration file (or defaults) and applies the flag overrides.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if !self.method.is_empty() {
            cfg.methods = self.method.clone();
        }
        if !self.regime.is_empty() {
            cfg.regimes = self.regime.clone();
        }
        if !self.object.is_empty() {
            cfg.objects = self.object.clone();
        }
        if !self.beta.is_empty() {
            cfg.betas = self.beta.clone();
        }
        if let Some(s) = self.seeds {
            cfg.seeds = s;
        }
        if let Some(s) = self.master_seed {
            cfg.master_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(p) = self.profile {
            cfg.profile = p;
        }
        if let Some(t) = self.t_max {
            cfg.mpc.t_max = t;
        }
        if let Some(e) = self.ema {
            cfg.ema = e;
        }
        if let Some(w) = &self.weights {
            cfg.weights.mixture = Some(w.clone());
        }
        if let Some(w) = &self.weights_gauss {
            cfg.weights.gaussian = Some(w.clone());
        }
        if let Some(d) = &self.data {
            cfg.data.path = d.clone();
        }
        if let Some(t) = self.timing {
            cfg.timing = t;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => gen_data(&a.resolve()?),
        Command::Train(a) => {
            let mut cfg = a.common.resolve()?;
            if let Some(k) = a.components {
                cfg.train.components = k;
            }
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            train(&cfg).map(|_| ())
        }
        Command::Plan(a) => plan(&a.resolve()?),
        Command::Bench(a) => bench(&a.resolve()?).map(|_| ()),
        Command::Stress(a) => stress(&a.resolve()?),
        Command::Calibrate(a) => calibrate(&a.resolve()?),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn gen_data(cfg: &RunConfig) -> Result<(), CliError> {
    let data = generate_dataset(&cfg.objects, &cfg.regimes, cfg.data.episodes, cfg.data.steps, cfg.env, cfg.master_seed)?;
    if let Some(parent) = cfg.data.path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let f = File::create(&cfg.data.path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", cfg.data.path.display())))?;
    write_dataset(BufWriter::new(f), &data)?;
    let steps: usize = data.iter().map(|t| t.steps.len()).sum();
    eprintln!("wrote {} trajectories ({steps} steps) to {}", data.len(), cfg.data.path.display());
    Ok(())
}

/// Path of the weights file written by `train` for a component count.
pub fn weights_file(out: &Path, components: usize) -> PathBuf {
    out.join(format!("belief-k{components}.vnbw"))
}

pub fn train(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let f = File::open(&cfg.data.path).map_err(|e| CliError::Config(format!("cannot open dataset {}: {e}", cfg.data.path.display())))?;
    let data = read_dataset(BufReader::new(f))?;
    let tc: &TrainConfig = &cfg.train;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let (nets, report) = train_belief_nets(&data, tc, &mut rng)?;
    create_dir(&cfg.out)?;
    let path = weights_file(&cfg.out, tc.components);
    nets.save(&path)?;
    write_json(&cfg.out.join(format!("train_report-k{}.json", tc.components)), &report)?;
    eprintln!("trained K={} for {} epochs: NLL {:.3} -> {:.3}; weights in {}", tc.components, tc.epochs, report.initial_nll, report.final_nll, path.display());
    Ok(path)
}

fn load_weights(path: Option<&PathBuf>, what: &str) -> Result<BeliefNets, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("no {what} weights configured")))?;
    if !path.exists() {
        return Err(CliError::Config(format!("{what} weights file {} does not exist", path.display())));
    }
    Ok(BeliefNets::load(path)?)
}

/// Loads the networks required by the configured methods.
pub fn load_nets(cfg: &RunConfig) -> Result<BenchNets, CliError> {
    let mut nets = BenchNets::default();
    if cfg.methods.iter().any(Method::needs_mixture) {
        nets.mixture = Some(load_weights(cfg.weights.mixture.as_ref(), "mixture")?);
    }
    if cfg.methods.iter().any(Method::needs_gaussian) {
        nets.gaussian = Some(load_weights(cfg.weights.gaussian.as_ref(), "single-component")?);
    }
    Ok(nets)
}

pub fn plan(cfg: &RunConfig) -> Result<(), CliError> {
    let nets = load_nets(cfg)?;
    let bench = BenchConfig { seeds: 1, ..cfg.bench_config() };
    let spec = enumerate_episodes(&bench).into_iter().next().ok_or_else(|| CliError::Config("nothing to plan".into()))?;
    let record = run_single(&spec, &bench, &nets)?;
    create_dir(&cfg.out)?;
    let line = record.to_json_line()?;
    std::fs::write(cfg.out.join(report::EPISODES_FILE), format!("{line}\n"))?;
    println!("{line}");
    Ok(())
}

pub fn bench(cfg: &RunConfig) -> Result<Vec<vnb_planning::bench::RegimeMetrics>, CliError> {
    let nets = load_nets(cfg)?;
    let bench = cfg.bench_config();
    let n = enumerate_episodes(&bench).len();
    eprintln!("running {n} episodes on {} worker(s)", worker_count(bench.threads));
    let records = run_benchmark(&bench, &nets)?;
    let metrics = report::write_outputs(&cfg.out, &records, &format!("Benchmark ({} profile)", cfg.profile))?;
    report::verify_outputs(&cfg.out)?;
    print!("{}", report::results_csv(&metrics)?);
    Ok(metrics)
}

#[derive(Debug, Serialize)]
struct StressLine<'a> {
    method: &'a str,
    regime: &'a str,
    object: &'a str,
    beta: f64,
    episode: usize,
    eps: f64,
    lift_ok: bool,
    shear_ok: &'a [bool],
    outcomes: &'a [vnb_planning::sim::PerturbationOutcome],
    survival: f64,
}

pub fn stress(cfg: &RunConfig) -> Result<(), CliError> {
    let nets = load_nets(cfg)?;
    let bench = cfg.bench_config();
    let specs = enumerate_episodes(&bench);
    let suite = PerturbationSuite::default();
    let results = parallel_map(&specs, worker_count(bench.threads), |s| {
        run_single_with_env(s, &bench, &nets).map(|(rec, env)| (rec, stress_test(&env.grasp_state(), &suite)))
    });
    let results: Vec<_> = results.into_iter().collect::<Result<_, _>>()?;
    let records: Vec<_> = results.iter().map(|(r, _)| r.clone()).collect();
    report::write_outputs(&cfg.out, &records, &format!("Stress run ({} profile)", cfg.profile))?;

    let mut jsonl = String::new();
    let labels: Vec<String> = suite.perturbations().iter().map(|p| p.label()).collect();
    let mut passes = vec![0usize; labels.len()];
    for (rec, rep) in &results {
        let line = StressLine {
            method: &rec.method,
            regime: &rec.regime,
            object: &rec.object,
            beta: rec.beta,
            episode: rec.episode,
            eps: rep.eps,
            lift_ok: rep.lift_ok,
            shear_ok: &rep.shear_ok,
            outcomes: &rep.outcomes,
            survival: rep.survival,
        };
        jsonl.push_str(&serde_json::to_string(&line)?);
        jsonl.push('\n');
        for (i, o) in rep.outcomes.iter().enumerate() {
            if o.passed {
                passes[i] += 1;
            }
        }
    }
    std::fs::write(cfg.out.join("stress.jsonl"), jsonl)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(["perturbation", "episodes", "passed", "pass_rate"]).map_err(map)?;
    let total = results.len().max(1);
    for (label, p) in labels.iter().zip(&passes) {
        w.write_record([label.clone(), results.len().to_string(), p.to_string(), format!("{:.3}", *p as f64 / total as f64)]).map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(cfg.out.join("stress_summary.csv"), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

pub fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let c = &cfg.calibration;
    let beta = cfg.betas.first().copied().unwrap_or(cfg.mpc.beta);
    let mpc = MpcConfig { beta, ..cfg.mpc.clone() };
    let rep = calibration_experiment(c.cases, c.trials, c.belief_samples, &mpc, cfg.master_seed)?;
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("calibration.json"), &rep)?;
    for (i, case) in rep.cases.iter().enumerate() {
        println!("case {i}: P_bel {:.4}  P_emp {:.4}  gap {:.4}  (95% CI ±{:.4})", case.p_bel, case.p_emp, case.gap, case.ci95);
    }
    println!("max gap {:.4} over {} trials per case", rep.max_gap, rep.trials);
    Ok(())
}
