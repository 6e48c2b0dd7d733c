//! Command-line front end: declarative experiment configs, subcommands
//! for pricing, risk, surfaces, convergence studies and oracle
//! validation, CSV artifacts and a reproducibility manifest.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use delaybsde::bsde::{solve_delayed_bsde, PastValues};
use delaybsde::config::{
    build_forward, build_generator, build_payoff, initial_state, ExperimentConfig,
};
use delaybsde::error::Error;
use delaybsde::feynman_kac::u_surface;
use delaybsde::finance::{price_large_investor, risk_measure, LargeInvestorMarket, RiskMeasureSpec};
use delaybsde::oracles::{black_scholes_call, delay_ode_backward, run_validation};
use delaybsde::paths::{DiscretePath, TimeGrid};
use delaybsde::rng::BrownianEnsemble;

#[derive(Parser)]
#[command(
    name = "delaybsde",
    version,
    about = "Solvers for forward-backward systems with time-delayed backward generators"
)]
struct Cli {
    /// Path to the experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Dotted-path config overrides, e.g. --set solver.picard_tol=1e-7
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,

    /// Cap the worker-thread count (does not affect results).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured delayed BSDE and report u(0, phi).
    Price,
    /// Evaluate the memory-aware dynamic risk measure rho_0.
    Risk,
    /// Price a claim for the configured large-investor market.
    PriceLargeInvestor,
    /// Sweep initial times and emit the value surface u(t_i, phi).
    Surface {
        /// Grid stride between sweep nodes.
        #[arg(long, default_value_t = 0)]
        stride: usize,
    },
    /// Error-vs-resolution table against the configured oracle.
    Convergence,
    /// Run the oracle validation suite and print a pass/fail table.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: failed to configure the thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::Parse(_) | Error::Io(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config is required for this subcommand"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text, &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.outputs.directory = out.display().to_string();
    }
    Ok(cfg)
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig, started: Instant) -> Result<(), Error> {
    let manifest = format!(
        "delaybsde {}\nwall_time_seconds = {:.3}\n\n# resolved configuration\n{}",
        env!("CARGO_PKG_VERSION"),
        started.elapsed().as_secs_f64(),
        cfg.to_toml()
    );
    write_artifact(dir, "manifest.txt", &manifest)
}

struct Experiment {
    cfg: ExperimentConfig,
    grid: TimeGrid,
    phi: DiscretePath,
    bm: BrownianEnsemble,
    out_dir: PathBuf,
}

fn setup(cli: &Cli) -> Result<Experiment, Error> {
    let cfg = load_config(cli)?;
    let grid = cfg.time_grid()?;
    let model = build_forward(&cfg.forward)?;
    let s0 = initial_state(&cfg.forward)?;
    let phi = DiscretePath::constant(grid, &vec![s0; model.dim])?;
    let bm = BrownianEnsemble::generate(grid, cfg.ensemble.n_samples, model.noise_dim, cfg.ensemble.seed)?;
    let out_dir = PathBuf::from(&cfg.outputs.directory);
    Ok(Experiment {
        cfg,
        grid,
        phi,
        bm,
        out_dir,
    })
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Validate => {
            let rows = run_validation();
            let mut all_ok = true;
            for row in &rows {
                println!(
                    "{:<40} {}  {}",
                    row.name,
                    if row.passed { "pass" } else { "FAIL" },
                    row.detail
                );
                all_ok &= row.passed;
            }
            if all_ok {
                Ok(())
            } else {
                Err(Error::State("one or more oracle validations failed".into()))
            }
        }
        Command::Price => {
            let started = Instant::now();
            let ex = setup(cli)?;
            let model = build_forward(&ex.cfg.forward)?;
            let gen = build_generator(&ex.cfg.generator)?;
            let payoff = build_payoff(&ex.cfg.payoff)?;
            let solver = ex.cfg.solver_config()?;
            let (sol, trace) = solve_delayed_bsde(
                ex.grid.t0(),
                &ex.phi,
                &model,
                &gen,
                &payoff,
                &PastValues::empty(),
                &solver,
                &ex.bm,
            )
            .map_err(|e| print_trace_on_failure(&ex.out_dir, e))?;
            println!("u0 = {} +- {}", sol.u0, sol.u0_std_err);
            write_artifact(
                &ex.out_dir,
                "result.csv",
                &format!("metric,value,std_err\nu0,{},{}\n", sol.u0, sol.u0_std_err),
            )?;
            write_artifact(&ex.out_dir, "picard_trace.csv", &trace.to_csv())?;
            write_artifact(&ex.out_dir, "solution.csv", &sol.to_csv())?;
            write_manifest(&ex.out_dir, &ex.cfg, started)
        }
        Command::Risk => {
            let started = Instant::now();
            let ex = setup(cli)?;
            let risk = ex
                .cfg
                .risk
                .clone()
                .ok_or_else(|| Error::config("risk subcommand needs a [risk] section"))?;
            let asset = build_forward(&ex.cfg.forward)?;
            let payoff = build_payoff(&ex.cfg.payoff)?;
            let s0 = initial_state(&ex.cfg.forward)?;
            let solver = ex.cfg.solver_config()?;
            let spec = RiskMeasureSpec::new(risk.beta, risk.delta, payoff)?;
            let out = risk_measure(&spec, &asset, s0, &solver, &ex.bm)
                .map_err(|e| print_trace_on_failure(&ex.out_dir, e))?;
            println!("rho0 = {} +- {}", out.rho0, out.std_err);
            write_artifact(
                &ex.out_dir,
                "result.csv",
                &format!("metric,value,std_err\nrho0,{},{}\n", out.rho0, out.std_err),
            )?;
            write_artifact(&ex.out_dir, "picard_trace.csv", &out.trace.to_csv())?;
            write_manifest(&ex.out_dir, &ex.cfg, started)
        }
        Command::PriceLargeInvestor => {
            let started = Instant::now();
            let ex = setup(cli)?;
            let section = ex
                .cfg
                .market
                .clone()
                .ok_or_else(|| Error::config("price-large-investor needs a [market] section"))?;
            let s0 = initial_state(&ex.cfg.forward)?;
            let market = if section.impact != 0.0 && section.delta > 0.0 {
                LargeInvestorMarket::wealth_impact_rate(
                    s0,
                    section.r,
                    section.impact,
                    section.mu,
                    section.sigma,
                    section.delta,
                )?
            } else {
                LargeInvestorMarket::constant(s0, section.r, section.mu, section.sigma)?
            };
            let stock = build_forward(&ex.cfg.forward)?;
            let payoff = build_payoff(&ex.cfg.payoff)?;
            let solver = ex.cfg.solver_config()?;
            let out = price_large_investor(&market, &stock, &payoff, &solver, &ex.bm)
                .map_err(|e| print_trace_on_failure(&ex.out_dir, e))?;
            println!("x0 = {} +- {}", out.x0, out.std_err);
            println!(
                "replication residual (mean abs, relative) = {}, {}",
                out.hedge.replication_mean_abs_residual, out.hedge.replication_relative_residual
            );
            write_artifact(
                &ex.out_dir,
                "result.csv",
                &format!(
                    "metric,value,std_err\nx0,{},{}\nreplication_mean_abs_residual,{},\nreplication_relative_residual,{},\n",
                    out.x0, out.std_err,
                    out.hedge.replication_mean_abs_residual,
                    out.hedge.replication_relative_residual
                ),
            )?;
            write_artifact(&ex.out_dir, "hedge.csv", &out.hedge_csv(&ex.grid))?;
            write_artifact(&ex.out_dir, "picard_trace.csv", &out.trace.to_csv())?;
            write_manifest(&ex.out_dir, &ex.cfg, started)
        }
        Command::Surface { stride } => {
            let started = Instant::now();
            let ex = setup(cli)?;
            let model = build_forward(&ex.cfg.forward)?;
            let gen = build_generator(&ex.cfg.generator)?;
            let payoff = build_payoff(&ex.cfg.payoff)?;
            let solver = ex.cfg.solver_config()?;
            let stride = if *stride == 0 {
                (ex.grid.n_steps() / 10).max(1)
            } else {
                *stride
            };
            let surf = u_surface(&ex.phi, &model, &gen, &payoff, &solver, &ex.bm, stride)?;
            for (t, u) in surf.times().iter().zip(surf.values()) {
                println!("u({t:.4}) = {u}");
            }
            write_artifact(&ex.out_dir, "surface.csv", &surf.to_csv())?;
            write_manifest(&ex.out_dir, &ex.cfg, started)
        }
        Command::Convergence => {
            let started = Instant::now();
            let ex = setup(cli)?;
            let reference = oracle_reference(&ex.cfg)?;
            println!("oracle reference = {reference}");
            let mut csv = String::from("n_steps,n_samples,value,std_err,oracle,abs_error\n");
            for n_steps in [25usize, 50, 100, 200] {
                for n_samples in [1_000usize, 10_000, 100_000] {
                    let grid = TimeGrid::new(ex.cfg.grid.t0, ex.cfg.grid.t_end, n_steps)?;
                    let model = build_forward(&ex.cfg.forward)?;
                    let s0 = initial_state(&ex.cfg.forward)?;
                    let phi = DiscretePath::constant(grid, &vec![s0; model.dim])?;
                    let bm = BrownianEnsemble::generate(
                        grid,
                        n_samples,
                        model.noise_dim,
                        ex.cfg.ensemble.seed,
                    )?;
                    let gen = build_generator(&ex.cfg.generator)?;
                    let payoff = build_payoff(&ex.cfg.payoff)?;
                    let solver = ex.cfg.solver_config()?;
                    let (sol, _) = solve_delayed_bsde(
                        grid.t0(),
                        &phi,
                        &model,
                        &gen,
                        &payoff,
                        &PastValues::empty(),
                        &solver,
                        &bm,
                    )?;
                    let err = (sol.u0 - reference).abs();
                    println!(
                        "N={n_steps:<4} M={n_samples:<7} u0={:<22} err={err:.3e}",
                        sol.u0
                    );
                    use std::fmt::Write;
                    let _ = writeln!(
                        csv,
                        "{n_steps},{n_samples},{},{},{reference},{err}",
                        sol.u0, sol.u0_std_err
                    );
                }
            }
            write_artifact(&ex.out_dir, "convergence.csv", &csv)?;
            write_manifest(&ex.out_dir, &ex.cfg, started)
        }
    }
}

/// Pick the closed-form or quadrature oracle matching the configured
/// problem; convergence studies are only defined for problems an oracle
/// can value.
fn oracle_reference(cfg: &ExperimentConfig) -> Result<f64, Error> {
    let horizon = cfg.grid.t_end - cfg.grid.t0;
    let gen = build_generator(&cfg.generator)?;
    match (cfg.generator.name.as_str(), cfg.payoff.name.as_str(), cfg.forward.name.as_str()) {
        ("zero", "call", "gbm") => {
            let s0 = initial_state(&cfg.forward)?;
            let strike = match cfg.payoff.params.get("strike") {
                Some(v) => v.as_float().or(v.as_integer().map(|i| i as f64)).unwrap_or(s0),
                None => s0,
            };
            let vol = cfg
                .forward
                .params
                .get("vol")
                .and_then(|v| v.as_float())
                .ok_or_else(|| Error::config("gbm forward needs vol"))?;
            black_scholes_call(s0, strike, 0.0, vol, horizon)
        }
        (_, "constant", _) => {
            let c = cfg
                .payoff
                .params
                .get("value")
                .and_then(|v| v.as_float().or(v.as_integer().map(|i| i as f64)))
                .ok_or_else(|| Error::config("constant payoff needs value"))?;
            let grid = TimeGrid::new(0.0, horizon, 2000)?;
            Ok(delay_ode_backward(c, &gen, &grid)?[0])
        }
        _ => Err(Error::config(
            "no oracle is defined for this generator/payoff/forward combination; \
             use generator zero + call + gbm, or a constant payoff",
        )),
    }
}

fn print_trace_on_failure(out_dir: &Path, e: Error) -> Error {
    if let Error::NonConvergence { trace } = &e {
        let path = out_dir.join("picard_trace.csv");
        if std::fs::create_dir_all(out_dir).is_ok()
            && std::fs::write(&path, trace.to_csv()).is_ok()
        {
            eprintln!("Picard trace written to {}", path.display());
        }
    }
    e
}
