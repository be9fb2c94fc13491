use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use valgrad::critics::InputActivation;
use valgrad::harness::{self, Algorithm, ExperimentConfig, LanderStarts};
use valgrad::{Error, Result};

#[derive(Parser)]
#[command(name = "valgrad", version, about = "Value-learning and value-gradient-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One-step Toy Problem.
    Exp1(ExpArgs),
    /// Two-step Toy Problem with a flexible critic.
    Exp2(ExpArgs),
    /// Divergence analysis of the two-step problem.
    Exp3(ExpArgs),
    /// Two-step Toy Problem with a single shared weight.
    Exp4(ExpArgs),
    /// Lunar lander with a neural-network critic.
    Exp5(ExpArgs),
    /// Compare every analytic derivative with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal lander trajectory from the adjoint equations.
    OracleLander {
        #[arg(long)]
        h0: f64,
        #[arg(long)]
        v0: f64,
        #[arg(long)]
        u0: f64,
        #[arg(long, default_value_t = 0.01)]
        c: f64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stability of the two-step weight dynamics for a parameter preset.
    Stability {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum Input {
    Sigmoid,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Starts {
    Single,
    Grid,
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    c3: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration cap per trial (lander: training iterations).
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_enum)]
    starts: Option<Starts>,
    /// Input-layer activation of the lander critic.
    #[arg(long, value_enum)]
    input: Option<Input>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExpArgs {
    fn config(&self, id: u8) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::defaults(id)?;
        if let Some(a) = &self.algo {
            cfg.algorithm = a.parse::<Algorithm>()?;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(lambda, alpha, epsilon, c1, c2, c3, k, n, c, dt, trials, seed);
        if let Some(v) = self.iterations {
            cfg.max_iterations = v;
        }
        if let Some(s) = self.starts {
            cfg.starts = match s {
                Starts::Single => LanderStarts::Single,
                Starts::Grid => LanderStarts::Grid,
            };
        }
        if let Some(i) = self.input {
            cfg.input_activation = match i {
                Input::Sigmoid => InputActivation::Sigmoid,
                Input::Identity => InputActivation::Identity,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_out(dir: Option<&Path>, name: &str, body: &str) -> Result<()> {
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        fs::write(d.join(name), body)?;
    }
    Ok(())
}

/// `Ok(false)` means the run finished but one of its checks failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Exp1(a) => toy(&a, 1),
        Command::Exp2(a) => toy(&a, 2),
        Command::Exp4(a) => toy(&a, 4),
        Command::Exp3(a) => {
            let cfg = a.config(3)?;
            let report = harness::run_exp3(&cfg)?;
            let text = report.to_tsv(&cfg);
            print!("{text}");
            write_out(a.out.as_deref(), "exp3.tsv", &text)?;
            Ok(report.matches_expected())
        }
        Command::Exp5(a) => {
            let cfg = a.config(5)?;
            let report = harness::run_exp5(&cfg)?;
            print!("{}", report.summary_tsv(&cfg));
            if let Some(d) = a.out.as_deref() {
                write_out(Some(d), "exp5_summary.tsv", &report.summary_tsv(&cfg))?;
                write_out(Some(d), "exp5_curves.tsv", &report.curves_tsv(&cfg))?;
                for (i, run) in report.runs.iter().enumerate() {
                    write_out(Some(d), &format!("exp5_trajectories_{i}.tsv"), &run.trajectories_tsv())?;
                }
            }
            Ok(true)
        }
        Command::Gradcheck { seed, instances, out } => {
            let report = harness::gradcheck(seed, instances)?;
            let text = report.to_tsv();
            print!("{text}");
            write_out(out.as_deref(), "gradcheck.tsv", &text)?;
            Ok(report.all_pass())
        }
        Command::OracleLander { h0, v0, u0, c, dt, out } => {
            let model = valgrad::models::LunarLander::new(c)?;
            let sol = valgrad::analysis::pontryagin_lander(&model, (h0, v0, u0), dt)?;
            let text = format!(
                "# oracle h0={h0} v0={v0} u0={u0} c={c} dt={dt}\n# total_reward={} v_final={} duration={}\n{}",
                sol.total_reward,
                sol.v_final,
                sol.duration(),
                sol.to_tsv()
            );
            print!("{text}");
            write_out(out.as_deref(), "oracle_lander.tsv", &text)?;
            Ok(true)
        }
        Command::Stability { preset, out } => {
            let p = match preset {
                Preset::A => valgrad::analysis::StabilityPreset::A,
                Preset::B => valgrad::analysis::StabilityPreset::B,
            };
            let text = harness::stability_report(p);
            print!("{text}");
            write_out(out.as_deref(), &format!("stability_{}.tsv", p.name()), &text)?;
            Ok(true)
        }
    }
}

fn toy(a: &ExpArgs, id: u8) -> Result<bool> {
    let cfg = a.config(id)?;
    let (row, trials) = harness::run_experiment(&cfg)?;
    print!("{}", row.to_tsv());
    write_out(a.out.as_deref(), &format!("exp{id}_table.tsv"), &row.to_tsv())?;
    write_out(a.out.as_deref(), &format!("exp{id}_trials.tsv"), &harness::trials_tsv(&cfg, &trials))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ (Error::Config(_) | Error::Argument(_) | Error::Parse(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
