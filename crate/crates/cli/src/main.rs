use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnoma_core::experiments::{
    self, recipe, run_recipe, run_scenario, run_validation, write_csv, FigureId, ScenarioRow,
    SweepSpec, ValidateOptions, CHECK_CSV_HEADER, FIGURE_CSV_HEADER, SCENARIO_CSV_HEADER,
};
use nnoma_core::link::UserId;
use nnoma_core::monte_carlo::{ExecutionMode, McSettings, DEFAULT_SEED, DEFAULT_TRIALS};
use nnoma_core::point_process::Truncation;
use nnoma_core::SystemConfig;

mod plot;

/// Outage analysis and simulation of network NOMA over Poisson line Cox networks.
#[derive(Debug, Parser)]
#[command(name = "nnoma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one scenario (or a sweep of it) analytically and by simulation.
    Run(RunArgs),
    /// Reproduce a figure as CSV plus SVG plots.
    Figure(FigureArgs),
    /// Run the validation suites and write a pass/fail report.
    Validate(ValidateArgs),
    /// Dump one network realization as CSV plus an SVG scatter plot.
    Snapshot(SnapshotArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Flat `key = value` config file; every field is required.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config field, e.g. `--set beta=0.25`. Repeatable.
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> nnoma_core::Result<SystemConfig> {
        let mut cfg = match &self.config {
            Some(p) => SystemConfig::load(p)?,
            None => SystemConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| {
                nnoma_core::Error::Parse(format!("override `{o}` is not FIELD=VALUE"))
            })?;
            cfg.set_field(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
    /// Radius of the disc holding the road representation points, m.
    #[arg(long, default_value_t = 2000.0)]
    r_max: f64,
    /// Half-length of the sampled part of every road, m.
    #[arg(long, default_value_t = 2000.0)]
    half_length: f64,
    /// Skip the simulation and report analytic values only.
    #[arg(long)]
    no_mc: bool,
}

impl McArgs {
    fn settings(&self) -> Option<McSettings> {
        (!self.no_mc).then(|| McSettings {
            n_trials: self.trials,
            seed: self.seed,
            trunc: Truncation {
                r_max: self.r_max,
                half_length: self.half_length,
            },
            workers: self.workers,
            mode: if self.sequential {
                ExecutionMode::Sequential
            } else {
                ExecutionMode::Parallel
            },
        })
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    mc: McArgs,
    /// Users to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "comp,noma1,noma2")]
    users: Vec<UserId>,
    /// Sweep one field: `field=v1,v2` or `field=start:stop:count[:log]`.
    #[arg(long)]
    sweep: Option<SweepSpec>,
    /// Scenario label written to the CSV.
    #[arg(long, default_value = "scenario")]
    name: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fail with exit code 1 if any |z| of simulation vs analysis exceeds 4.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args)]
struct FigureArgs {
    id: FigureId,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Trials per radius in the truncation check.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    /// Realizations in the two-slot interference check.
    #[arg(long, default_value_t = 50)]
    realizations: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SnapshotArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Half-width of the plotted window, m.
    #[arg(long, default_value_t = 1000.0)]
    r_max: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

const CHECK_LIMIT: f64 = 4.0;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Figure(a) => cmd_figure(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Snapshot(a) => cmd_snapshot(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type CmdResult = Result<bool, Box<dyn std::error::Error>>;

fn cmd_run(a: RunArgs) -> CmdResult {
    let cfg = a.cfg.load()?;
    let mc = a.mc.settings();
    let scenarios = match &a.sweep {
        Some(s) => s
            .apply(&cfg)?
            .into_iter()
            .map(|(x, c)| (format!("{}:{}={x}", a.name, s.variable), c))
            .collect(),
        None => vec![(a.name.clone(), cfg)],
    };
    let mut rows: Vec<ScenarioRow> = Vec::new();
    for (name, c) in &scenarios {
        rows.extend(run_scenario(name, c, &a.users, mc.as_ref())?);
    }
    let path = a.out.join("run.csv");
    write_csv(&path, &SCENARIO_CSV_HEADER, &rows)?;
    print_scenario_table(&rows);
    println!("wrote {}", path.display());
    if a.check {
        if mc.is_none() {
            return Err("--check needs the simulation; drop --no-mc".into());
        }
        let bad: Vec<&ScenarioRow> = rows
            .iter()
            .filter(|r| r.z_score.is_some_and(|z| !(z.abs() <= CHECK_LIMIT)))
            .collect();
        for r in &bad {
            eprintln!(
                "check failed: {} {} z = {:.2}",
                r.scenario,
                r.user,
                r.z_score.unwrap_or(f64::NAN)
            );
        }
        return Ok(bad.is_empty());
    }
    Ok(true)
}

fn print_scenario_table(rows: &[ScenarioRow]) {
    println!(
        "{:<28} {:<6} {:>12} {:>12} {:>10} {:>8}",
        "scenario", "user", "analytic", "mc", "stderr", "z"
    );
    let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
    for r in rows {
        println!(
            "{:<28} {:<6} {:>12.6} {:>12} {:>10} {:>8}",
            r.scenario,
            r.user,
            r.analytic_p,
            opt(r.p_hat, 6),
            opt(r.stderr, 6),
            opt(r.z_score, 2)
        );
    }
}

fn cmd_figure(a: FigureArgs) -> CmdResult {
    if a.id == FigureId::Snapshot {
        return cmd_snapshot(SnapshotArgs {
            cfg: ConfigArgs {
                config: None,
                overrides: Vec::new(),
            },
            seed: a.mc.seed,
            r_max: 1000.0,
            out: a.out,
        });
    }
    let r = recipe(a.id)?;
    let rows = run_recipe(&r, a.mc.settings().as_ref())?;
    let csv_path = a.out.join(format!("{}.csv", a.id));
    write_csv(&csv_path, &FIGURE_CSV_HEADER, &rows)?;
    println!("wrote {}", csv_path.display());
    for panel in &r.panels {
        let svg = a.out.join(format!("{}_{}.svg", a.id, panel.name));
        plot::figure_panel(&csv_path, r.title, panel, &svg)?;
        println!("wrote {}", svg.display());
    }
    Ok(true)
}

fn cmd_validate(a: ValidateArgs) -> CmdResult {
    let cfg = a.cfg.load()?;
    std::fs::create_dir_all(&a.out)?;
    let mut opts = ValidateOptions {
        seed: a.seed,
        truncation_trials: a.trials,
        ..ValidateOptions::default()
    };
    opts.lemma1.n_realizations = a.realizations;
    let checks = run_validation(&cfg, &opts)?;
    let path = a.out.join("validate.csv");
    write_csv(&path, &CHECK_CSV_HEADER, &checks)?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        println!(
            "{} {:<18} {:<28} value {:.3e} tol {:.1e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.check,
            c.value,
            c.tolerance,
            c.detail
        );
    }
    println!("wrote {}", path.display());
    Ok(ok)
}

fn cmd_snapshot(a: SnapshotArgs) -> CmdResult {
    let cfg = a.cfg.load()?;
    let rows = experiments::snapshot(&cfg, Truncation::square(a.r_max), a.seed)?;
    let csv_path = a.out.join("snapshot.csv");
    write_csv(
        &csv_path,
        &["kind", "rho", "theta", "offset", "x", "y"],
        &rows,
    )?;
    println!("wrote {}", csv_path.display());
    let svg = a.out.join("snapshot.svg");
    plot::snapshot(&csv_path, a.r_max, &svg)?;
    println!("wrote {}", svg.display());
    Ok(true)
}
