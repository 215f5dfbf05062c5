use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use offload_core::dp::{backward_induction, PolicyTable, SolverOptions};
use offload_core::heuristic::{price_only_policy, BaselinePolicy, HeuristicPolicy, Named};
use offload_core::io::config::ScenarioConfig;
use offload_core::io::convert::scenario_to_f64;
use offload_core::io::energy::{fit_energy_curve, log_residual, parse_samples};
use offload_core::io::fingerprint::scenario_fingerprint;
use offload_core::io::generate::{generate_scenario, random_tiny_instance, scenario_rng};
use offload_core::io::report::{emit_report, to_csv, to_json, ReportFormat};
use offload_core::io::sweep::{run_sweep, PolicyKind, SweepAxis, SweepOptions};
use offload_core::model::{ActionMode, Policy};
use offload_core::sim::{brute_force_value, monte_carlo, AggregateReport, MonteCarloOptions};
use offload_core::Scenario64;

#[derive(Parser, Debug)]
#[command(name = "offload", version, about = "WLAN/cellular offloading planner and simulator")]
struct Cli {
    /// Base seed for scenario generation and Monte Carlo episodes.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo episodes per policy.
    #[arg(long, global = true)]
    episodes: Option<usize>,

    /// Output file; the format follows the extension where it matters.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Actions the exact solver considers.
    #[arg(long, global = true, value_parser = parse_mode)]
    action_mode: Option<ActionMode>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Desk,
    SingleFlow,
    ApSweep,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args, Debug)]
struct ConfigArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Built-in configuration used when no file is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the scenario exactly and write the policy table.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Monte Carlo comparison of policies on one generated scenario.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Policy table from `solve`; solved on the fly when absent.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
        policies: Option<Vec<PolicyKind>>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Vary one parameter and evaluate every policy at each value.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
        policies: Option<Vec<PolicyKind>>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Fit an exponential energy curve to `throughput,joule_per_mbit` samples.
    FitEnergy {
        #[arg(long)]
        samples: PathBuf,
    },
    /// Compare the exact solver with brute-force search on random tiny instances.
    OracleCheck {
        #[arg(long, default_value_t = 25)]
        instances: usize,
    },
}

fn parse_mode(s: &str) -> Result<ActionMode, String> {
    s.parse().map_err(|e: offload_core::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: offload_core::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: offload_core::Error| e.to_string())
}

impl Cli {
    fn load_config(&self, args: &ConfigArgs) -> Result<ScenarioConfig> {
        let mut c = match &args.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => match args.preset {
                Preset::Desk => ScenarioConfig::desk(),
                Preset::SingleFlow => ScenarioConfig::single_flow_desk(),
                Preset::ApSweep => ScenarioConfig::ap_sweep_desk(),
            },
        };
        if let Some(seed) = self.seed {
            c.run.seed = seed;
        }
        if let Some(n) = self.episodes {
            c.run.episodes = n;
        }
        c.validate()?;
        Ok(c)
    }

    fn solver_options(&self, num_flows: usize) -> SolverOptions {
        let mut o = SolverOptions::for_flows(num_flows);
        if let Some(mode) = self.action_mode {
            o.action_mode = mode;
        }
        o
    }
}

fn write_reports(reports: &[AggregateReport], out: Option<&Path>, format: Option<Format>) -> Result<()> {
    match out {
        Some(path) => {
            let fmt = match format {
                Some(Format::Csv) => ReportFormat::Csv,
                Some(Format::Json) => ReportFormat::Json,
                None => ReportFormat::for_path(path),
            };
            emit_report(reports, fmt, path).with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let body = match format {
                Some(Format::Json) => to_json(reports)?,
                _ => to_csv(reports),
            };
            std::io::stdout().write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

fn first_scenario(config: &ScenarioConfig) -> Result<Scenario64> {
    Ok(generate_scenario(config, &mut scenario_rng(config.run.seed, 0))?)
}

fn solve(cli: &Cli, cfg: &ConfigArgs) -> Result<()> {
    let config = cli.load_config(cfg)?;
    let sc = first_scenario(&config)?;
    let sol = backward_induction(&sc, &cli.solver_options(sc.num_flows()))?;
    let path = cli
        .out
        .clone()
        .or(config.output.policy.clone())
        .unwrap_or_else(|| PathBuf::from("policy.bin"));
    sol.policy
        .save(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    let starts: Vec<f64> = (0..sc.num_locations()).map(|l| sol.start_value(&sc, l)).collect();
    let mean = starts.iter().sum::<f64>() / starts.len() as f64;
    println!("policy written to {}", path.display());
    println!("expected cost from a uniform start: {mean:.6}");
    Ok(())
}

fn simulate(
    cli: &Cli,
    cfg: &ConfigArgs,
    policy: Option<&Path>,
    kinds: Option<&[PolicyKind]>,
    format: Option<Format>,
) -> Result<()> {
    let config = cli.load_config(cfg)?;
    let sc = first_scenario(&config)?;
    let mut opts = MonteCarloOptions::new(config.run.episodes, config.run.seed);
    opts.start_location = config.run.start_location;
    let kinds = kinds.map(<[_]>::to_vec).unwrap_or_else(|| {
        let mut all = PolicyKind::ALL.to_vec();
        if sc.num_flows() > 1 {
            all.retain(|k| *k != PolicyKind::PriceOnly);
        }
        all
    });

    let mut reports = Vec::new();
    for kind in kinds {
        let report = match kind {
            PolicyKind::Dp => {
                let table = match policy {
                    Some(path) => {
                        let t = PolicyTable::load(path).with_context(|| format!("loading {}", path.display()))?;
                        if t.fingerprint() != &scenario_fingerprint(&sc) {
                            bail!("{} was solved for a different scenario", path.display());
                        }
                        t
                    }
                    None => backward_induction(&sc, &cli.solver_options(sc.num_flows()))?.policy,
                };
                monte_carlo(&sc, &table, &opts)?
            }
            PolicyKind::Heuristic => monte_carlo(&sc, &HeuristicPolicy::new(&sc, config.heuristic), &opts)?,
            PolicyKind::Baseline => monte_carlo(&sc, &BaselinePolicy, &opts)?,
            PolicyKind::PriceOnly => {
                let table = price_only_policy(&sc, &cli.solver_options(1))?;
                let p: &dyn Policy<f64> = &Named::new(kind.name(), table);
                monte_carlo(&sc, p, &opts)?
            }
        };
        reports.push(report);
    }
    write_reports(&reports, cli.out.as_deref().or(config.output.csv.as_deref()), format)
}

fn sweep(
    cli: &Cli,
    cfg: &ConfigArgs,
    axis: SweepAxis,
    values: &[f64],
    kinds: Option<&[PolicyKind]>,
    format: Option<Format>,
) -> Result<()> {
    let config = cli.load_config(cfg)?;
    let mut opts = SweepOptions {
        action_mode: cli.action_mode,
        ..SweepOptions::default()
    };
    if let Some(k) = kinds {
        opts.policies = k.to_vec();
    }
    let out = run_sweep(&config, axis, values, &opts)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    write_reports(&out.reports, cli.out.as_deref().or(config.output.csv.as_deref()), format)
}

fn fit_energy(cli: &Cli, samples: &Path) -> Result<()> {
    let text = fs::read_to_string(samples).with_context(|| format!("reading {}", samples.display()))?;
    let points = parse_samples(&text).with_context(|| samples.display().to_string())?;
    let curve = fit_energy_curve(&points)?;
    println!(
        "amplitude = {:.6}\ndecay = {:.6}\nlog residual = {:.3e}",
        curve.amplitude,
        curve.decay,
        log_residual(&curve, &points)
    );
    if let Some(path) = &cli.out {
        fs::write(path, serde_json::to_string_pretty(&curve)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn oracle_check(cli: &Cli, instances: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
    let mut failures = 0;
    for i in 0..instances {
        let exact = random_tiny_instance(&mut rng)?;
        let sol = backward_induction(&exact, &SolverOptions::with_mode(ActionMode::Exhaustive))?;
        let approx = scenario_to_f64(&exact);
        let sol64 = backward_induction(&approx, &SolverOptions::with_mode(ActionMode::Exhaustive))?;
        for l in 0..exact.num_locations() {
            let dp = sol.start_value(&exact, l);
            let bf = brute_force_value(&exact, l)?;
            let bf64 = brute_force_value(&approx, l)?;
            let ok = dp == bf && (sol64.start_value(&approx, l) - bf64).abs() <= 1e-9;
            if !ok {
                failures += 1;
                eprintln!("instance {i}, start {l}: solver {dp} vs brute force {bf}");
            }
        }
    }
    println!("{instances} instances checked, {failures} mismatches");
    if failures > 0 {
        bail!("solver disagrees with brute force on {failures} start states");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve { cfg } => solve(cli, cfg),
        Command::Simulate {
            cfg,
            policy,
            policies,
            format,
        } => simulate(cli, cfg, policy.as_deref(), policies.as_deref(), *format),
        Command::Sweep {
            cfg,
            axis,
            values,
            policies,
            format,
        } => sweep(cli, cfg, *axis, values, policies.as_deref(), *format),
        Command::FitEnergy { samples } => fit_energy(cli, samples),
        Command::OracleCheck { instances } => oracle_check(cli, *instances),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
