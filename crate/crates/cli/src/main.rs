//! Command-line front end: type checking, evaluation, differentiation,
//! smoothing compilation, optimisation, experiments and the quadrature oracle.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use smoothppl::autodiff::{finite_diff_grad, grad_with};
use smoothppl::compile::smooth_compile;
use smoothppl::estimate::{
    run_adam, run_sgd, AdamConfig, EstimateError, Estimator, Model, ModelOracle, Sense, StepSchedule, TraceStream,
};
use smoothppl::harness::{
    builtin, elbo_experiment, quadrature_expectation, sig17, variance_report, work_normalised_variance, write_elbo_csv,
    write_trajectory_csv, write_variance_csv, write_wnv_csv, BuiltinError, ExperimentConfig, QuadratureError,
    QuadratureOptions,
};
use smoothppl::semantics::{eval_operational, eval_with, Branching, EvalError, EvalOptions, SmoothingConfig};
use smoothppl::syntax::{parse_program_with, ParseOptions, Program, SyntaxError};
use smoothppl::types::{check_poly, check_sgd, check_unif, infer_program_basic, TypeError};

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Builtin(#[from] BuiltinError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Compile(#[from] smoothppl::compile::CompileError),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Parser)]
#[command(name = "smoothppl", version, about = "Typed probabilistic programs with smoothed conditionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Basic,
    Poly,
    Sgd,
    Unif,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Reparam,
    Smooth,
    Score,
}

#[derive(Subcommand)]
enum Command {
    /// Type-check a program and print its trace type and type.
    Typecheck {
        #[arg(long, value_enum, default_value = "basic")]
        system: SystemArg,
        /// Program file, or `builtin:NAME`.
        file: String,
        /// Accept compiler-internal forms such as `sigma`.
        #[arg(long)]
        internal: bool,
    },
    /// Evaluate a program on one trace.
    Eval {
        file: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        trace: Vec<f64>,
        /// Smooth conditionals with this accuracy coefficient.
        #[arg(long)]
        eta: Option<f64>,
        /// Use the operational semantics and print the trace weight.
        #[arg(long)]
        weights: bool,
        #[arg(long)]
        internal: bool,
    },
    /// Value and parameter gradient on one trace.
    Grad {
        file: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        trace: Vec<f64>,
        #[arg(long)]
        eta: Option<f64>,
        /// Compare against central finite differences with this step.
        #[arg(long)]
        check: Option<f64>,
        #[arg(long)]
        internal: bool,
    },
    /// Compile a first-order program to one without conditionals.
    Smooth {
        file: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Optimise the expected value of a program and write the trajectory.
    Optimize {
        file: String,
        #[arg(long, value_enum, default_value = "smooth")]
        estimator: EstimatorArg,
        #[arg(long, value_enum, default_value = "adam")]
        optimizer: OptimizerArg,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long, default_value_t = 1000)]
        iters: u64,
        #[arg(long, default_value_t = 16)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0.15)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `rm:C` for C/k steps or `const:G`; SGD only. Defaults to `const:LR`.
        #[arg(long)]
        schedule: Option<String>,
        /// Starting point; defaults to the builtin's, else zeros (1 for preal).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta0: Option<Vec<f64>>,
        /// Maximise instead of minimise.
        #[arg(long)]
        maximize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the ELBO, variance and work-normalised-variance experiments.
    Bench {
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', default_value = "smooth:0.1,smooth:0.15,smooth:0.2,reparam,score")]
        estimators: Vec<String>,
        #[arg(long, default_value_t = 5000)]
        iters: u64,
        /// Defaults to the model's recommended rate.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, default_value_t = 16)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        objective_samples: usize,
        #[arg(long, default_value_t = 1000)]
        variance_samples: usize,
        /// Seconds per estimator for the timing runs.
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expectation over traces by deterministic quadrature.
    Oracle {
        file: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Vec<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 4001)]
        nodes: usize,
    },
    /// Print the source of a built-in model.
    ShowModel { name: String },
}

/// A program read from a file or named `builtin:NAME`.
fn load(file: &str, internal: bool) -> Result<(Program, Option<smoothppl::harness::BuiltinModel>), CliError> {
    if let Some(name) = file.strip_prefix("builtin:") {
        let b = builtin(name)?;
        return Ok((b.model.program.clone(), Some(b)));
    }
    let path = Path::new(file);
    let src = fs::read_to_string(path).map_err(io_err(path))?;
    Ok((parse_program_with(&src, ParseOptions { internal })?, None))
}

fn smoothing(eta: Option<f64>) -> Result<Option<SmoothingConfig>, CliError> {
    Ok(eta.map(SmoothingConfig::new).transpose()?)
}

fn eval_options(p: &Program, eta: Option<f64>) -> Result<EvalOptions, CliError> {
    let cfg = smoothing(eta)?;
    let sigma = cfg.filter(|_| p.body.contains_sigma());
    let branching = match cfg {
        Some(c) if !p.body.contains_sigma() => Branching::Smoothed(c),
        _ => Branching::Measurable,
    };
    Ok(EvalOptions { branching, sigma })
}

fn parse_schedule(s: &str) -> Result<StepSchedule, CliError> {
    let bad = || CliError::Usage(format!("schedule `{s}` is not `rm:C` or `const:G`"));
    let (kind, v) = s.split_once(':').ok_or_else(bad)?;
    let v: f64 = v.parse().map_err(|_| bad())?;
    match kind {
        "rm" => Ok(StepSchedule::RobbinsMonro(v)),
        "const" => Ok(StepSchedule::Constant(v)),
        _ => Err(bad()),
    }
}

fn write_out(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(fs::File::create(p).map_err(io_err(p))?);
            f(&mut file).and_then(|_| file.flush()).map_err(io_err(p))
        }
        None => f(&mut io::stdout().lock()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| sig17(*x)).collect::<Vec<_>>().join(",")
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Typecheck { system, file, internal } => {
            let (p, _) = load(&file, internal)?;
            let result = match system {
                SystemArg::Basic => infer_program_basic(&p).map(|j| j.to_string()),
                SystemArg::Poly => check_poly(&p).map(|j| j.to_string()),
                SystemArg::Sgd => check_sgd(&p).map(|j| j.to_string()),
                SystemArg::Unif => check_unif(&p).map(|j| j.to_string()),
            };
            match result {
                Ok(s) => {
                    println!("{s}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("rejected: {}", e.kind);
                    println!("rule: {}", e.rule);
                    println!("path: {}", e.path);
                    println!("detail: {}", e.detail);
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Eval { file, theta, trace, eta, weights, internal } => {
            let (p, _) = load(&file, internal)?;
            if weights {
                if eta.is_some() {
                    return Err(CliError::Usage("--weights uses the unsmoothed operational semantics".into()));
                }
                let r = eval_operational(&p, &theta, &trace)?;
                match r.real() {
                    Some(v) => println!("value: {}", sig17(v)),
                    None => println!("value: {}", r.value),
                }
                println!("log_weight: {}", sig17(r.log_weight));
                println!("weight: {}", sig17(r.weight()));
            } else {
                let v = eval_with(&p, &theta, &trace, eval_options(&p, eta)?)?;
                match v.as_real() {
                    Some(x) => println!("{}", sig17(*x)),
                    None => println!("{v}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Grad { file, theta, trace, eta, check, internal } => {
            let (p, _) = load(&file, internal)?;
            let opts = eval_options(&p, eta)?;
            let (v, g) = grad_with(&p, &theta, &trace, opts)?;
            println!("value: {}", sig17(v));
            println!("gradient: {}", join(&g));
            if let Some(h) = check {
                let fd = finite_diff_grad(&p, &theta, &trace, opts, h)?;
                let dev =
                    g.iter().zip(&fd).map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-12)).fold(0.0, f64::max);
                println!("finite_difference: {}", join(&fd));
                println!("max_relative_deviation: {}", sig17(dev));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Smooth { file, output } => {
            let (p, _) = load(&file, false)?;
            let compiled = smooth_compile(&p)?;
            write_out(output.as_deref(), |w| writeln!(w, "{compiled}"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Optimize {
            file,
            estimator,
            optimizer,
            lr,
            iters,
            mc_samples,
            eta,
            seed,
            schedule,
            theta0,
            maximize,
            out,
        } => {
            let (p, b) = load(&file, false)?;
            let model = match &b {
                Some(b) => b.model.clone(),
                None => Model::new(&file, p, if maximize { Sense::Maximize } else { Sense::Minimize })?,
            };
            let theta0 = match (theta0, &b) {
                (Some(t), _) => t,
                (None, Some(b)) => b.theta0.clone(),
                (None, None) => model
                    .program
                    .params
                    .iter()
                    .map(|d| if d.base == smoothppl::syntax::BaseType::PosReal { 1.0 } else { 0.0 })
                    .collect(),
            };
            let est = match estimator {
                EstimatorArg::Reparam => Estimator::Reparam,
                EstimatorArg::Smooth => Estimator::Smooth(SmoothingConfig::new(eta)?),
                EstimatorArg::Score => Estimator::Score,
            };
            let mut oracle =
                ModelOracle { model: &model, estimator: est, samples: mc_samples, stream: TraceStream::new(seed) };
            let traj = match optimizer {
                OptimizerArg::Adam => run_adam(&model.domain, &theta0, AdamConfig::with_lr(lr), iters, &mut oracle)?,
                OptimizerArg::Sgd => {
                    let sched = match schedule {
                        Some(s) => parse_schedule(&s)?,
                        None => StepSchedule::Constant(lr),
                    };
                    run_sgd(&model.domain, &theta0, sched, iters, &mut oracle)?
                }
            };
            write_out(out.as_deref(), |w| write_trajectory_csv(w, &traj))?;
            if out.is_some() {
                println!("final theta: {}", join(traj.last()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            model,
            estimators,
            iters,
            lr,
            mc_samples,
            seed,
            objective_samples,
            variance_samples,
            budget,
            out,
        } => {
            let b = builtin(&model)?;
            let ests = estimators
                .iter()
                .map(|s| Estimator::parse(s).ok_or_else(|| CliError::Usage(format!("unknown estimator `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if budget.is_nan() || budget <= 0.0 {
                return Err(CliError::Usage("--budget must be positive".into()));
            }
            let cfg = ExperimentConfig {
                iters,
                samples_per_step: mc_samples,
                adam: AdamConfig::with_lr(lr.unwrap_or(b.learning_rate)),
                seed,
                objective_samples,
                variance_samples,
                time_budget: Duration::from_secs_f64(budget),
                ..ExperimentConfig::default()
            };
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            let runs = elbo_experiment(&b.model, &ests, &b.theta0, &cfg)?;
            write_out(Some(&out.join("elbo.csv")), |w| write_elbo_csv(w, &runs))?;
            let vars = variance_report(&b.model, &runs, &cfg)?;
            write_out(Some(&out.join("variance.csv")), |w| write_variance_csv(w, &vars))?;
            let wnv = work_normalised_variance(&b.model, &b.theta0, &vars, &cfg)?;
            write_out(Some(&out.join("wnv.csv")), |w| write_wnv_csv(w, &wnv))?;
            for r in &runs {
                let c = r.final_checkpoint();
                println!(
                    "{}: final theta {} objective {}",
                    r.estimator.name(),
                    join(&c.theta),
                    sig17(c.objective_measurable)
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { file, theta, eta, nodes } => {
            let (p, _) = load(&file, false)?;
            let opts = QuadratureOptions { nodes, ..QuadratureOptions::default() };
            let r = quadrature_expectation(&p, &theta, smoothing(eta)?, &opts)?;
            println!("expectation: {}", sig17(r.value));
            println!("widening_delta: {}", sig17(r.widening_delta));
            Ok(ExitCode::SUCCESS)
        }
        Command::ShowModel { name } => {
            let b = builtin(&name)?;
            println!("{}", b.model.program);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
