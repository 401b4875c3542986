//! `kmf`, the kinetic mean-field toolkit CLI.
//!
//! Subcommands: `rates`, `simulate`, `contraction`, `equilibrium`,
//! `chaos`, `deviation`, `moments`, `transport`. Exit codes: 0 on
//! success/pass, 2 when an experiment verdict fails, 1 on usage or
//! configuration errors.
//!
//! `KMF_THREADS` caps worker parallelism (0 or unset = auto). Results are
//! byte-identical for any thread count.

mod config;
mod csv;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kmf_core::dynamics::{advance, MomentRecorder, NoiseLane};
use kmf_core::experiments::{
    run_chaos, run_contraction, run_deviation, run_equilibrium, run_moment_bound, ChaosConfig,
    ContractionConfig, ContractionStatus, DeviationConfig, EquilibriumConfig, McKeanMode,
    MomentConfig, SimParams, UniformityCheck, Verdict,
};
use kmf_core::noise::NoiseStream;
use kmf_core::rates::{contraction_rate, QForm, SearchMode, Variant};
use kmf_core::transport::{w2_entropic, w2_exact, GroundMetric, PlanKind};

use config::{parse_config, Overrides, RunConfig};
use csv::{fmt_f64, read_snapshot, OutputSink};

#[derive(Parser)]
#[command(name = "kmf", version, about = "Kinetic mean-field simulation and verification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Particle count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Recording stride in steps.
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Force field kind: linear | sinusoidal.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_prime: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    /// Initial law: dirac | gaussian.
    #[arg(long)]
    init_kind: Option<String>,
    /// Initial position (Dirac point or Gaussian mean), comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    init_x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    init_v: Option<Vec<f64>>,
    #[arg(long)]
    init_b_kind: Option<String>,
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    init_b_x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    init_b_v: Option<Vec<f64>>,
    /// Suppress the timestamp header line in CSV outputs.
    #[arg(long)]
    no_timestamp: bool,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            kind: self.kind.clone(),
            alpha: self.alpha,
            alpha_prime: self.alpha_prime,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            dim: self.dim,
            n: self.n,
            dt: self.dt,
            t_final: self.t_final,
            stride: self.stride,
            seed: self.seed,
            replicas: self.replicas,
            out: self.out.clone(),
            no_timestamp: self.no_timestamp,
            experiment: Default::default(),
            init_x: self.init_x.clone(),
            init_v: self.init_v.clone(),
            init_kind: self.init_kind.clone(),
            init_b_x: self.init_b_x.clone(),
            init_b_v: self.init_b_v.clone(),
            init_b_kind: self.init_b_kind.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived contraction constants for given coefficients.
    Rates {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha_prime: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Perturbation size gamma + delta.
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// contraction | doubled_alpha
        #[arg(long, default_value = "contraction")]
        variant: String,
        /// two_step | full_lmi
        #[arg(long, default_value = "two_step")]
        mode: String,
    },
    /// Advance one particle system and emit its moment series.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also dump the terminal state as a snapshot CSV.
        #[arg(long)]
        snapshot: bool,
    },
    /// Coupled two-law decay experiment (trend to equilibrium).
    Contraction {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        offset_x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        offset_v: Option<Vec<f64>>,
    },
    /// Two far-apart initializations relaxing to one stationary law.
    Equilibrium {
        #[command(flatten)]
        common: CommonArgs,
        /// Subsample size for the terminal W2 diagnostics.
        #[arg(long)]
        w2_sample: Option<usize>,
    },
    /// Propagation-of-chaos ladder: coupling error vs particle count.
    Chaos {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        ladder: Option<Vec<usize>>,
        /// exact | proxy
        #[arg(long)]
        mckean: Option<String>,
        #[arg(long)]
        proxy_m: Option<usize>,
        /// Ladder entry re-run at the doubled horizon.
        #[arg(long)]
        uniformity_n: Option<usize>,
    },
    /// Gaussian deviation structure of empirical observables.
    Deviation {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        ns: Option<Vec<usize>>,
        /// x0 | smooth_norm
        #[arg(long)]
        observable: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        radii_sigmas: Option<Vec<f64>>,
        #[arg(long)]
        reference_n: Option<usize>,
        #[arg(long)]
        reference_t: Option<f64>,
    },
    /// Long-horizon second-moment bound with plateau detection.
    Moments {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Wasserstein-2 distance between two snapshot files.
    Transport {
        file_a: PathBuf,
        file_b: PathBuf,
        /// euclidean | qform
        #[arg(long, default_value = "euclidean")]
        metric: String,
        /// Q-form parameter b (qform metric).
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        /// Q-form parameter beta (qform metric).
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Use the exact assignment solver (default).
        #[arg(long, conflicts_with = "entropic")]
        exact: bool,
        /// Use the entropic solver.
        #[arg(long)]
        entropic: bool,
        /// Entropic regularization.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write the transport plan to this file.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// `KMF_THREADS` caps the rayon pool; 0 or unset means auto.
fn configure_threads() {
    if let Ok(v) = std::env::var("KMF_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn sim_params(cfg: &RunConfig) -> SimParams {
    SimParams {
        n: cfg.n,
        dt: cfg.dt,
        t_final: cfg.t_final,
        stride: cfg.stride,
        seed: cfg.seed,
        replicas: cfg.replicas,
    }
}

fn prepare(experiment: &str, common: &CommonArgs, over: Overrides) -> Result<(RunConfig, OutputSink)> {
    let cfg = parse_config(experiment, common.config.as_deref(), &over)?;
    let sink = OutputSink::new(&cfg.out_dir, cfg.timestamp)?;
    let echoed = toml::to_string_pretty(&cfg.to_file_config())?;
    std::fs::write(sink.path("resolved_config.toml"), echoed)?;
    Ok((cfg, sink))
}

fn print_verdicts(verdicts: &[Verdict]) -> bool {
    let mut all = true;
    for v in verdicts {
        println!(
            "{:<32} theory={:<12} measured={:<14} threshold={:<12} {}",
            v.experiment,
            format!("{:.6}", v.theory),
            format!("{:.6}", v.measured),
            format!("{:.6}", v.threshold),
            if v.pass { "PASS" } else { "FAIL" }
        );
        all &= v.pass;
    }
    all
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Rates {
            alpha,
            alpha_prime,
            beta,
            eta,
            variant,
            mode,
        } => cmd_rates(alpha, alpha_prime, beta, eta, &variant, &mode),
        Command::Simulate { common, snapshot } => {
            let mut over = common.overrides();
            over.experiment.snapshot = if snapshot { Some(true) } else { None };
            let (cfg, sink) = prepare("simulate", &common, over)?;
            cmd_simulate(&cfg, &sink)
        }
        Command::Contraction {
            common,
            offset_x,
            offset_v,
        } => {
            let mut over = common.overrides();
            over.experiment.offset_x = offset_x;
            over.experiment.offset_v = offset_v;
            let (cfg, sink) = prepare("contraction", &common, over)?;
            cmd_contraction(&cfg, &sink)
        }
        Command::Equilibrium { common, w2_sample } => {
            let mut over = common.overrides();
            over.experiment.w2_sample = w2_sample;
            let (cfg, sink) = prepare("equilibrium", &common, over)?;
            cmd_equilibrium(&cfg, &sink)
        }
        Command::Chaos {
            common,
            ladder,
            mckean,
            proxy_m,
            uniformity_n,
        } => {
            let mut over = common.overrides();
            over.experiment.ladder = ladder;
            over.experiment.mckean = mckean;
            over.experiment.proxy_m = proxy_m;
            over.experiment.uniformity_n = uniformity_n;
            let (cfg, sink) = prepare("chaos", &common, over)?;
            cmd_chaos(&cfg, &sink)
        }
        Command::Deviation {
            common,
            ns,
            observable,
            radii_sigmas,
            reference_n,
            reference_t,
        } => {
            let mut over = common.overrides();
            over.experiment.ns = ns;
            over.experiment.observable = observable;
            over.experiment.radii_sigmas = radii_sigmas;
            over.experiment.reference_n = reference_n;
            over.experiment.reference_t = reference_t;
            let (cfg, sink) = prepare("deviation", &common, over)?;
            cmd_deviation(&cfg, &sink)
        }
        Command::Moments { common } => {
            let over = common.overrides();
            let (cfg, sink) = prepare("moments", &common, over)?;
            cmd_moments(&cfg, &sink)
        }
        Command::Transport {
            file_a,
            file_b,
            metric,
            b,
            beta,
            exact,
            entropic,
            eps,
            max_iter,
            tol,
            plan,
        } => cmd_transport(
            &file_a, &file_b, &metric, b, beta, exact, entropic, eps, max_iter, tol,
            plan.as_deref(),
        ),
    }
}

fn cmd_rates(
    alpha: f64,
    alpha_prime: f64,
    beta: f64,
    eta: f64,
    variant: &str,
    mode: &str,
) -> Result<bool> {
    let variant = match variant {
        "contraction" => Variant::Contraction,
        "doubled_alpha" => Variant::DoubledAlpha,
        other => bail!("unknown variant '{other}' (contraction | doubled_alpha)"),
    };
    let mode = match mode {
        "two_step" => SearchMode::TwoStep,
        "full_lmi" => SearchMode::FullLmi,
        other => bail!("unknown mode '{other}' (two_step | full_lmi)"),
    };
    let r = contraction_rate(alpha, alpha_prime, beta, eta, variant, mode)?;
    println!("contraction constants (variant = {}, mode = {})", r.variant.as_str(), r.mode.as_str());
    println!("  eta                = {}", fmt_f64(r.eta));
    println!("  eta0 threshold     = {}", fmt_f64(r.eta0));
    println!("  admissible b       = ({}, {})", fmt_f64(r.b_interval.lo), fmt_f64(r.b_interval.hi));
    println!("  optimal (b, eps)   = ({}, {})", fmt_f64(r.b_star), fmt_f64(r.eps_star));
    println!("  dissipation c1, c2 = {}, {}", fmt_f64(r.c1), fmt_f64(r.c2));
    println!("  rate C             = {}", fmt_f64(r.rate));
    println!("  Q spectrum         = [{}, {}]", fmt_f64(r.lambda_min), fmt_f64(r.lambda_max));
    println!("  equivalence C'     = {}", fmt_f64(r.cprime));
    println!("alpha,alpha_prime,beta,eta,variant,mode,eta0,b_lo,b_hi,b_star,eps_star,c1,c2,rate_C,Cprime");
    println!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(r.alpha),
        fmt_f64(r.alpha_prime),
        fmt_f64(r.beta),
        fmt_f64(r.eta),
        r.variant.as_str(),
        r.mode.as_str(),
        fmt_f64(r.eta0),
        fmt_f64(r.b_interval.lo),
        fmt_f64(r.b_interval.hi),
        fmt_f64(r.b_star),
        fmt_f64(r.eps_star),
        fmt_f64(r.c1),
        fmt_f64(r.c2),
        fmt_f64(r.rate),
        fmt_f64(r.cprime)
    );
    Ok(true)
}

fn cmd_simulate(cfg: &RunConfig, sink: &OutputSink) -> Result<bool> {
    let field = cfg.field()?;
    let noise = NoiseStream::new(cfg.seed);
    let mut state = cfg.init.sample(cfg.n, &noise, 0);
    let mut rec = MomentRecorder::new(cfg.stride);
    advance(
        &mut state,
        &field,
        cfg.dt,
        sim_params(cfg).n_steps(),
        &noise,
        NoiseLane::dynamics(0),
        &mut rec,
    )?;
    let dim = field.dim();
    let mut header = String::from("t,m2_x,m2_v");
    for k in 0..dim {
        header.push_str(&format!(",mean_x_{k}"));
    }
    for k in 0..dim {
        header.push_str(&format!(",mean_v_{k}"));
    }
    let rows: Vec<String> = rec
        .rows
        .iter()
        .map(|r| {
            let mut row = format!("{},{},{}", fmt_f64(r.t), fmt_f64(r.m2_x), fmt_f64(r.m2_v));
            for c in r.mean_x.iter().chain(&r.mean_v) {
                row.push(',');
                row.push_str(&fmt_f64(*c));
            }
            row
        })
        .collect();
    sink.write_table("simulate_series.csv", &header, &rows)?;
    if cfg.snapshot {
        sink.write_snapshot("snapshot.csv", &state, cfg.seed)?;
    }
    println!(
        "simulate: n={} steps={} terminal m2={}",
        cfg.n,
        state.step,
        fmt_f64(rec.rows.last().map(|r| r.m2_x + r.m2_v).unwrap_or(0.0))
    );
    Ok(true)
}

fn cmd_contraction(cfg: &RunConfig, sink: &OutputSink) -> Result<bool> {
    let report = run_contraction(&ContractionConfig {
        field: cfg.field()?,
        sim: sim_params(cfg),
        init: cfg.init.clone(),
        offset_x: cfg.offset_x.clone(),
        offset_v: cfg.offset_v.clone(),
    })?;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.q_mean),
                fmt_f64(r.q_se),
                fmt_f64(r.x2_mean),
                fmt_f64(r.xv_mean),
                fmt_f64(r.v2_mean)
            )
        })
        .collect();
    sink.write_table(
        "contraction_series.csv",
        "t,q_mean,q_se,x2_mean,xv_mean,v2_mean",
        &rows,
    )?;
    sink.write_verdicts("contraction_verdict.csv", &report.verdicts)?;
    if report.status == ContractionStatus::Degenerate {
        println!("contraction: degenerate (identical initial laws), series identically zero");
    } else {
        println!(
            "contraction: theory rate {} fitted {} (r2 {})",
            fmt_f64(report.theory.rate),
            fmt_f64(report.fitted_rate.unwrap_or(f64::NAN)),
            fmt_f64(report.fit.map(|f| f.r2).unwrap_or(f64::NAN)),
        );
    }
    Ok(print_verdicts(&report.verdicts))
}

fn cmd_equilibrium(cfg: &RunConfig, sink: &OutputSink) -> Result<bool> {
    let report = run_equilibrium(&EquilibriumConfig {
        field: cfg.field()?,
        sim: sim_params(cfg),
        init_a: cfg.init.clone(),
        init_b: cfg.init_b.clone(),
        w2_sample: cfg.w2_sample,
    })?;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|(t, a, b)| format!("{},{},{}", fmt_f64(*t), fmt_f64(*a), fmt_f64(*b)))
        .collect();
    sink.write_table("equilibrium_series.csv", "t,m2_a,m2_b", &rows)?;
    sink.write_verdicts("equilibrium_verdict.csv", &report.verdicts)?;
    println!(
        "equilibrium: cross W2 {} floor {} var_x {} var_v {}",
        fmt_f64(report.cross_w2),
        fmt_f64(report.floor_w2),
        fmt_f64(report.var_x.first().copied().unwrap_or(f64::NAN)),
        fmt_f64(report.var_v.first().copied().unwrap_or(f64::NAN)),
    );
    Ok(print_verdicts(&report.verdicts))
}

fn cmd_chaos(cfg: &RunConfig, sink: &OutputSink) -> Result<bool> {
    let mode = match cfg.mckean.as_str() {
        "exact" => McKeanMode::ExactLinear,
        "proxy" => McKeanMode::Proxy { m: cfg.proxy_m },
        other => bail!("unknown mckean mode '{other}' (exact | proxy)"),
    };
    let report = run_chaos(&ChaosConfig {
        field: cfg.field()?,
        dt: cfg.dt,
        t_final: cfg.t_final,
        stride: cfg.stride,
        seed: cfg.seed,
        replicas: cfg.replicas,
        ladder: cfg.ladder.clone(),
        init: cfg.init.clone(),
        mode,
        uniformity: cfg.uniformity_n.map(|n| UniformityCheck { n, se_factor: 3.0 }),
    })?;
    let mut rows = Vec::new();
    for level in &report.levels {
        for (t, m) in level.times.iter().zip(&level.mse) {
            rows.push(format!("{},{},{}", level.n, fmt_f64(*t), fmt_f64(*m)));
        }
    }
    sink.write_table("chaos_series.csv", "n,t,mse", &rows)?;
    sink.write_verdicts("chaos_verdict.csv", &report.verdicts)?;
    println!(
        "chaos: slope {} +- {} over N in {:?}",
        fmt_f64(report.fit.value),
        fmt_f64(report.fit.half_width),
        cfg.ladder
    );
    Ok(print_verdicts(&report.verdicts))
}

fn cmd_deviation(cfg: &RunConfig, sink: &OutputSink) -> Result<bool> {
    let (x0, v0) = match &cfg.init {
        kmf_core::experiments::InitialLaw::Dirac { x, v } => (x.clone(), v.clone()),
        _ => bail!("the deviation experiment starts from a deterministic point; use a dirac init"),
    };
    let report = run_deviation(&DeviationConfig {
        field: cfg.field()?,
        dt: cfg.dt,
        t_final: cfg.t_final,
        seed: cfg.seed,
        replicas: cfg.replicas,
        ns: cfg.ns.clone(),
        x0,
        v0,
        observable: cfg.observable()?,
        radii_sigmas: cfg.radii_sigmas.clone(),
        reference_n: cfg.reference_n,
        reference_t: cfg.reference_t,
    })?;
    let mut rows = Vec::new();
    for level in &report.levels {
        for (r, p) in &level.tail {
            rows.push(format!("{},{},{}", level.n, fmt_f64(*r), fmt_f64(*p)));
        }
    }
    sink.write_table("deviation_series.csv", "n,r,p_hat", &rows)?;
    let summary: Vec<String> = report
        .levels
        .iter()
        .map(|l| {
            format!(
                "{},{},{},{},{},{}",
                l.n,
                fmt_f64(l.mean_s),
                fmt_f64(l.var_s),
                fmt_f64(l.tail_slope),
                fmt_f64(l.d_hat),
                fmt_f64(l.centering_offset)
            )
        })
        .collect();
    sink.write_table(
        "deviation_summary.csv",
        "n,mean_s,var_s,tail_slope,d_hat,centering_offset",
        &summary,
    )?;
    sink.write_verdicts("deviation_verdict.csv", &report.verdicts)?;
    println!(
        "deviation: mu_inf_hat {} (+- {})",
        fmt_f64(report.mu_inf_hat),
        fmt_f64(report.mu_inf_se)
    );
    Ok(print_verdicts(&report.verdicts))
}

fn cmd_moments(cfg: &RunConfig, sink: &OutputSink) -> Result<bool> {
    let report = run_moment_bound(&MomentConfig {
        field: cfg.field()?,
        sim: sim_params(cfg),
        init: cfg.init.clone(),
    })?;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|(t, m2)| format!("{},{}", fmt_f64(*t), fmt_f64(*m2)))
        .collect();
    sink.write_table("moments_series.csv", "t,m2", &rows)?;
    sink.write_verdicts("moments_verdict.csv", &report.verdicts)?;
    println!(
        "moments: running max {} at t={}, plateau {}, tail slope {} ({} of plateau)",
        fmt_f64(report.running_max),
        fmt_f64(report.argmax_t),
        fmt_f64(report.plateau),
        fmt_f64(report.tail_slope),
        fmt_f64(report.tail_slope_rel),
    );
    Ok(print_verdicts(&report.verdicts))
}

#[allow(clippy::too_many_arguments)]
fn cmd_transport(
    file_a: &std::path::Path,
    file_b: &std::path::Path,
    metric: &str,
    b: f64,
    beta: f64,
    _exact: bool,
    entropic: bool,
    eps: f64,
    max_iter: usize,
    tol: f64,
    plan_out: Option<&std::path::Path>,
) -> Result<bool> {
    let a = read_snapshot(file_a)?;
    let bb = read_snapshot(file_b)?;
    let metric = match metric {
        "euclidean" => GroundMetric::Euclidean,
        "qform" => GroundMetric::QForm(QForm::new(b, beta)?),
        other => bail!("unknown metric '{other}' (euclidean | qform)"),
    };
    let plan = if entropic {
        let out = w2_entropic(&a, &bb, &metric, eps, max_iter, tol)?;
        if !out.converged {
            eprintln!(
                "warning: entropic solver hit max_iter with marginal error {}",
                fmt_f64(out.marginal_error)
            );
        }
        println!(
            "w2_entropic = {} (eps {}, {} iterations, converged {})",
            fmt_f64(out.distance),
            fmt_f64(eps),
            out.iterations,
            out.converged
        );
        out.plan
    } else {
        let (d, plan) = w2_exact(&a, &bb, &metric)?;
        println!("w2_exact = {}", fmt_f64(d));
        plan
    };
    if let Some(path) = plan_out {
        let mut text = String::new();
        match &plan.kind {
            PlanKind::Assignment(perm) => {
                text.push_str("row,col\n");
                for (i, j) in perm.iter().enumerate() {
                    text.push_str(&format!("{i},{j}\n"));
                }
            }
            PlanKind::Coupling(matrix) => {
                text.push_str("row,col,mass\n");
                let n = a.n;
                for i in 0..n {
                    for j in 0..bb.n {
                        text.push_str(&format!("{i},{j},{}\n", fmt_f64(matrix[i * bb.n + j])));
                    }
                }
            }
        }
        std::fs::write(path, text).with_context(|| format!("writing plan to {}", path.display()))?;
    }
    Ok(true)
}
