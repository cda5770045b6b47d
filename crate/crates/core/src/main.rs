use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use contact_hj::experiments::output::{emit, emit_manifest};
use contact_hj::experiments::table::{render_grid, write_table_csv};
use contact_hj::experiments::{
    analyze, initial_grid, mane_agreement, run_lyapunov, run_table1, run_uniqueness_sweep, scheme_for,
    solve_stationary, uniqueness_config, ExperimentConfig,
};
use contact_hj::flow::{flow, level_residual, write_orbit_csv, ContactState};
use contact_hj::hamiltonians::Hamiltonian;
use contact_hj::mather::{classify_stability, uniqueness_check, write_ensemble_csv, CriterionReport};
use contact_hj::semigroup::{action_function, action_function_dual, cap_sensitivity, evolve, EvolveOptions};
use contact_hj::weakkam::find_stationary;
use contact_hj::{Error, GridFunction64};

#[derive(Parser)]
#[command(name = "contact-hj", version, about = "Weak KAM experiments for contact Hamilton-Jacobi equations on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the contact flow from (x0, p0, u0).
    Flow(Common),
    /// Evolve the initial function under the backward or forward semigroup.
    Evolve(Common),
    /// Search for a stationary solution by backward iteration.
    Stationary(Common),
    /// Backward and forward action functions based at (x0, u0).
    Action(Common),
    /// Graph-invariance filter and the coincidence set with the forward conjugate.
    Mane(Common),
    /// Ensemble of invariant measures and the averages of dH/du.
    Mather(Common),
    /// Stability verdict with Lyapunov confirmation runs.
    Classify(Common),
    /// Uniqueness routes and a sweep over random initial functions.
    Uniqueness(Common),
    /// Classification grid over (a, b) for example3.
    Table1(Common),
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon of flow, evolve, action and Lyapunov runs
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other configuration key, as key=value
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> contact_hj::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(v) = self.a {
            cfg.a = v;
        }
        if let Some(v) = self.b {
            cfg.b = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.horizon {
            cfg.t = v;
        }
        if let Some(v) = self.delta {
            cfg.deltas = vec![v];
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Outcome {
    Ok,
    Regression(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Regression(msg)) => {
            eprintln!("verdict regression: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn write_grid(cfg: &ExperimentConfig, stem: &str, g: &GridFunction64) -> contact_hj::Result<()> {
    emit(cfg, stem, "csv", |w| g.write_csv(true, w))?;
    Ok(())
}

fn run(command: Command) -> contact_hj::Result<Outcome> {
    let (common, name) = match &command {
        Command::Flow(c) => (c, "flow"),
        Command::Evolve(c) => (c, "evolve"),
        Command::Stationary(c) => (c, "stationary"),
        Command::Action(c) => (c, "action"),
        Command::Mane(c) => (c, "mane"),
        Command::Mather(c) => (c, "mather"),
        Command::Classify(c) => (c, "classify"),
        Command::Uniqueness(c) => (c, "uniqueness"),
        Command::Table1(c) => (c, "table1"),
    };
    let cfg = common.resolve()?;
    emit_manifest(&cfg)?;
    let model = cfg.model();
    let model: &dyn Hamiltonian<f64> = model.as_ref();
    println!("{name}: {} (config {})", model.name(), cfg.hash());
    match command {
        Command::Flow(_) => {
            let orbit = flow(model, ContactState::new(cfg.x0, cfg.p0, cfg.u0), cfg.t, cfg.flow_dt)?;
            emit(&cfg, "orbit", "csv", |w| write_orbit_csv(model, &orbit, w))?;
            let end = orbit.last();
            println!("end state ({:.10}, {:.10}, {:.10}), max |H - H0| = {:.3e}", end.x, end.p, end.u, level_residual(model, &orbit));
        }
        Command::Evolve(_) => {
            let scheme = scheme_for(&cfg, model)?;
            let phi = initial_grid(&cfg, model)?;
            let reference = GridFunction64::from_fn(cfg.n, |x| model.known_solution(x).unwrap_or(0.0))?;
            let base = if cfg.forward { EvolveOptions::forward(100) } else { EvolveOptions::backward(100) };
            let opts = if model.known_solution(0.0).is_some() { base.with_reference(&reference) } else { base };
            let ev = evolve(model, &scheme, &phi, cfg.t, &opts)?;
            emit(&cfg, "evolve", "csv", |w| ev.write_log_csv(w))?;
            write_grid(&cfg, "evolve_grid", ev.final_grid())?;
            println!("final sup norm {:.6e}", ev.final_grid().sup_norm());
        }
        Command::Stationary(_) => {
            let scheme = scheme_for(&cfg, model)?;
            let r = find_stationary(model, &scheme, &initial_grid(&cfg, model)?, cfg.t_max, cfg.tol);
            write_grid(&cfg, "stationary", &r.solution)?;
            emit(&cfg, "stationary_history", "csv", |w| {
                writeln!(w, "t,change")?;
                r.history.iter().try_for_each(|(t, d)| writeln!(w, "{t:.12e},{d:.12e}"))
            })?;
            println!(
                "converged {} at t = {} (residual {:.3e}, divergence {}), range [{:.6}, {:.6}]",
                r.converged,
                r.t_final,
                r.residual,
                r.divergence.label(),
                r.solution.min(),
                r.solution.max()
            );
        }
        Command::Action(_) => {
            let scheme = scheme_for(&cfg, model)?;
            let back = action_function(model, &scheme, cfg.n, cfg.lip_cap, cfg.x0, cfg.u0, cfg.t)?;
            let fwd = action_function_dual(model, &scheme, cfg.n, cfg.lip_cap, cfg.x0, cfg.u0, cfg.t)?;
            emit(&cfg, "action", "csv", |w| {
                writeln!(w, "x,backward,forward")?;
                (0..cfg.n).try_for_each(|i| {
                    writeln!(w, "{:.12e},{:.12e},{:.12e}", back.node(i), back.values()[i], fwd.values()[i])
                })
            })?;
            let cap = cap_sensitivity(model, &scheme, cfg.n, cfg.lip_cap, cfg.x0, cfg.u0, cfg.t)?;
            println!("backward range [{:.6}, {:.6}], forward range [{:.6}, {:.6}]", back.min(), back.max(), fwd.min(), fwd.max());
            println!("change under doubled needle cap: {cap:.3e}");
        }
        Command::Mane(_) => {
            let scheme = scheme_for(&cfg, model)?;
            let analysis = analyze(&cfg, model, &scheme)?;
            let agree = mane_agreement(&cfg, model, &scheme, &analysis)?;
            emit(&cfg, "mane", "csv", |w| analysis.mane.write_csv(w))?;
            emit(&cfg, "coincidence", "csv", |w| {
                writeln!(w, "x,u_minus,u_plus,coincident,filtered")?;
                let (um, up) = (&analysis.stationary.solution, &agree.conjugate.solution);
                (0..cfg.n).try_for_each(|i| {
                    writeln!(
                        w,
                        "{:.12e},{:.12e},{:.12e},{},{}",
                        um.node(i),
                        um.values()[i],
                        up.values()[i],
                        u8::from(agree.coincidence[i]),
                        u8::from(agree.filtered[i])
                    )
                })
            })?;
            println!(
                "kept {}/{} atoms (dist_tol {:.3e}), coincidence nodes {}, symmetric difference {:.2}%",
                analysis.mane.kept_count(),
                analysis.graph.len(),
                analysis.mane.dist_tol,
                agree.coincidence.iter().filter(|c| **c).count(),
                100.0 * agree.symmetric_difference
            );
        }
        Command::Mather(_) => {
            let scheme = scheme_for(&cfg, model)?;
            let analysis = analyze(&cfg, model, &scheme)?;
            let report = CriterionReport::new(&analysis.ensemble, cfg.crit_tol);
            emit(&cfg, "ensemble", "csv", |w| write_ensemble_csv(&analysis.ensemble, w))?;
            emit(&cfg, "criteria", "csv", |w| report.write_csv(w))?;
            println!(
                "{} measures ({} diracs), A_min = {:.6}, A_max = {:.6}, A1 {}, A2 {}",
                report.averages.len(),
                report.diracs.len(),
                report.a_min,
                report.a_max,
                report.a1,
                report.a2
            );
        }
        Command::Classify(_) => {
            let scheme = scheme_for(&cfg, model)?;
            let analysis = analyze(&cfg, model, &scheme)?;
            let report = classify_stability(&analysis.ensemble, cfg.crit_tol);
            let mut runs = Vec::new();
            for &d in &cfg.deltas {
                runs.push(run_lyapunov(&cfg, model, &scheme, &analysis.stationary.solution, d)?);
            }
            for (k, run) in runs.iter().enumerate() {
                let stem = if k == 0 { "lyapunov".to_string() } else { format!("lyapunov{k}") };
                emit(&cfg, &stem, "csv", |w| run.write_csv(w))?;
            }
            emit(&cfg, "classify", "txt", |w| {
                writeln!(w, "verdict = {}", report.verdict.label())?;
                writeln!(w, "A_min = {:.12e}", report.criteria.a_min)?;
                writeln!(w, "A_max = {:.12e}", report.criteria.a_max)?;
                if let Some(r) = report.rate {
                    writeln!(w, "rate = {r:.12e}")?;
                }
                if let Some(wit) = &report.witness {
                    let z = wit.measure.atoms[0].0;
                    writeln!(w, "witness = {} at ({:.6}, {:.6}, {:.6}) with average {:.6}", wit.kind().label(), z.x, z.p, z.u, wit.hu_average)?;
                }
                for run in &runs {
                    let rate = run.rate.map_or_else(|| "none".into(), |r| format!("{r:.6}"));
                    writeln!(w, "lyapunov delta = {}: rate {rate}, excursion {:.6e}, escaped {}", run.delta, run.excursion, run.escaped())?;
                }
                writeln!(w, "caveat = ensemble of fixed-point, periodic and Birkhoff measures stands in for all invariant measures")
            })?;
            println!("verdict {} (A_min {:.6}, A_max {:.6})", report.verdict.label(), report.criteria.a_min, report.criteria.a_max);
            if let Some(want) = &cfg.expect {
                if want != report.verdict.label() {
                    return Ok(Outcome::Regression(format!("expected {want}, got {}", report.verdict.label())));
                }
            }
        }
        Command::Uniqueness(_) => {
            let scheme = scheme_for(&cfg, model)?;
            let stationary = solve_stationary(&cfg, model, &scheme)?;
            let report = uniqueness_check(model, std::slice::from_ref(&stationary), &uniqueness_config(&cfg));
            let sweep = run_uniqueness_sweep(&cfg, model, &scheme, cfg.n_initials, Some(report.verdict))?;
            emit(&cfg, "uniqueness", "csv", |w| {
                writeln!(w, "quantity,value")?;
                writeln!(w, "verdict,{}", report.verdict.label())?;
                writeln!(w, "energy_samples,{}", report.e_samples)?;
                writeln!(w, "skipped_cells,{}", report.e_skipped)?;
                writeln!(w, "min_du,{:.12e}", report.min_du)?;
                writeln!(w, "b_points,{}", report.b_points.len())?;
                let du = report.b_points.iter().map(|b| b.du).fold(f64::INFINITY, f64::min);
                writeln!(w, "min_du_on_b,{du:.12e}")?;
                writeln!(w, "lie_min,{}", report.lie_min.map_or_else(String::new, |v| format!("{v:.12e}")))?;
                writeln!(w, "degenerate_points,{}", report.degenerate.len())?;
                let l2 = report.degenerate.iter().map(|d| d.lie2).fold(f64::INFINITY, f64::min);
                writeln!(w, "min_lie2_at_degenerate,{l2:.12e}")?;
                writeln!(w, "sweep_clusters,{}", sweep.clusters.len())?;
                writeln!(w, "sweep_diverged,{}", sweep.diverged())?;
                writeln!(w, "sweep_conclusion,{}", sweep.conclusion())
            })?;
            emit(&cfg, "sweep", "csv", |w| sweep.write_csv(w))?;
            println!(
                "{}; sweep: {} converged into {} cluster(s), {} to +inf, {} to -inf, {} unsettled ({})",
                report.verdict.label(),
                sweep.converged(),
                sweep.clusters.len(),
                sweep.to_plus_infinity,
                sweep.to_minus_infinity,
                sweep.oscillating,
                sweep.conclusion()
            );
            if !sweep.consistent() {
                return Ok(Outcome::Regression(format!(
                    "{} but the sweep found {} distinct limits",
                    report.verdict.label(),
                    sweep.clusters.len()
                )));
            }
        }
        Command::Table1(_) => {
            let cells = run_table1(&cfg, &cfg.table_a, &cfg.table_b)?;
            emit(&cfg, "table1", "csv", |w| write_table_csv(&cells, w))?;
            let grid = render_grid(&cells);
            emit(&cfg, "table1", "txt", |w| w.write_all(grid.as_bytes()))?;
            print!("{grid}");
            let failed: Vec<String> = cells.iter().filter(|c| !c.pass()).map(|c| format!("({}, {})", c.a, c.b)).collect();
            if !failed.is_empty() {
                return Ok(Outcome::Regression(format!("cells {} differ from the expected table", failed.join(", "))));
            }
        }
    }
    Ok(Outcome::Ok)
}
