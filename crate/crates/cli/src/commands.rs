//! Argument parsing and the subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use saddle_core::asymptotics::{coeffs, delta0, omega_expansion, tail_coeffs, xi_expansion};
use saddle_core::local_flow::{exit_time_flow, flow, flow_trajectory, ExitTimeSolver, PhaseState};
use saddle_core::renewal::{
    correlation_prediction, fit_higher_order, mixing_coeffs, renewal_sequence, return_distribution, unit_mass_tail,
};
use saddle_core::return_stats::{
    fit_regvar, geometric_grid, monte_carlo_tail, semi_analytic_tail, EntryStrip, FitMode, MonteCarloOptions,
};
use serde_json::{json, Value};

use crate::config::{Format, Resolved, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::{Report, Table};
use crate::verify::{self, SuiteContext};

#[derive(Debug, Parser)]
#[command(name = "saddle", version, about = "Exit times, return-time tails and renewal sequences near a neutral saddle")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; the built-in reference configuration if omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output if omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived constants, asymptotic coefficients and tail coefficients.
    Derive {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        zeta0: Option<f64>,
    },
    /// Integrate the field from one point.
    Flow {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long)]
        t: f64,
        /// Emit every accepted step instead of the end point.
        #[arg(long)]
        trajectory: bool,
    },
    /// Exit time from (xi, eta), or the entry point for a given exit time.
    ExitTime {
        #[arg(long)]
        eta: f64,
        #[arg(long, conflicts_with_all = ["time", "sweep"])]
        xi: Option<f64>,
        #[arg(long = "T", id = "time", conflicts_with = "sweep")]
        time: Option<f64>,
        /// Inverse mode over a geometric grid of exit times.
        #[arg(long)]
        sweep: bool,
        #[command(flatten)]
        grid: TimeGrid,
    },
    /// Exact entry and exit points against their expansions.
    Asymptotics {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        zeta0: Option<f64>,
        #[command(flatten)]
        grid: TimeGrid,
    },
    /// Return-time tail table and its power-law fit.
    Tail {
        #[arg(long, value_enum, default_value_t = TailMethod::Semi)]
        method: TailMethod,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        n_min: u64,
        #[arg(long, default_value_t = 100_000)]
        n_max: u64,
        #[arg(long, default_value_t = 32)]
        per_decade: usize,
        /// Defaults to 1e3 (semi) or 1e2 (mc).
        #[arg(long)]
        fit_lo: Option<f64>,
        #[arg(long)]
        fit_hi: Option<f64>,
        /// Defaults to power-law (semi) or second-order (mc).
        #[arg(long, value_enum)]
        fit_mode: Option<FitModeArg>,
    },
    /// Renewal sequence driven by the semi-analytic return distribution.
    Renewal {
        #[arg(long, default_value_t = 30_000)]
        n_max: usize,
        /// Fit the higher-order correlation terms over [fit_lo, fit_hi].
        #[arg(long, requires = "fit_hi")]
        fit_lo: Option<usize>,
        #[arg(long, requires = "fit_lo")]
        fit_hi: Option<usize>,
    },
    /// Run the acceptance gates.
    Verify,
}

#[derive(Debug, Clone, Args)]
pub struct TimeGrid {
    #[arg(long, default_value_t = 10.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 1e8)]
    pub t_max: f64,
    #[arg(long, default_value_t = 4)]
    pub per_decade: usize,
}

impl TimeGrid {
    fn values(&self) -> CliResult<Vec<f64>> {
        if !(self.t_min > 0.0 && self.t_max >= self.t_min && self.per_decade > 0) {
            return Err(CliError::Validation(format!("bad time grid [{}, {}]", self.t_min, self.t_max)));
        }
        let decades = (self.t_max / self.t_min).log10();
        let steps = (decades * self.per_decade as f64).round() as usize;
        Ok((0..=steps).map(|i| self.t_min * 10f64.powf(decades * i as f64 / steps.max(1) as f64)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailMethod {
    Semi,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModeArg {
    PowerLaw,
    SecondOrder,
}

impl From<FitModeArg> for FitMode {
    fn from(m: FitModeArg) -> Self {
        match m {
            FitModeArg::PowerLaw => FitMode::PowerLaw,
            FitModeArg::SecondOrder => FitMode::SecondOrder,
        }
    }
}

/// What a command produced, plus whether every gate it checked passed.
pub struct Outcome {
    pub report: Report,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub gates_passed: bool,
}

impl Outcome {
    pub fn emit(&self) -> CliResult<()> {
        match &self.out {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                self.report.write(&mut w, self.format)?;
                w.flush()?;
            }
            None => self.report.write(std::io::stdout().lock(), self.format)?,
        }
        Ok(())
    }
}

pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let mut cfg = RunConfig::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = Some(seed);
    }
    let format = cli.global.format.unwrap_or(cfg.output.format);
    let out = cli.global.out.clone().or_else(|| cfg.output.path.clone());
    let r = cfg.resolve()?;
    let mut gates_passed = true;
    let (command, options, result, table) = match &cli.command {
        Command::Derive { eta, zeta0 } => {
            let (o, v) = derive(&r, *eta, *zeta0)?;
            ("derive", o, v, None)
        }
        Command::Flow { x, y, t, trajectory } => {
            let (o, v, tab) = flow_cmd(&r, *x, *y, *t, *trajectory)?;
            ("flow", o, v, Some(tab))
        }
        Command::ExitTime { eta, xi, time, sweep, grid } => {
            let (o, v, tab) = exit_time(&r, *eta, *xi, *time, *sweep, grid)?;
            ("exit-time", o, v, Some(tab))
        }
        Command::Asymptotics { eta, zeta0, grid } => {
            let (o, v, tab) = asymptotics(&r, *eta, *zeta0, grid)?;
            ("asymptotics", o, v, Some(tab))
        }
        Command::Tail { method, samples, n_min, n_max, per_decade, fit_lo, fit_hi, fit_mode } => {
            let args = TailArgs {
                method: *method,
                samples: *samples,
                grid: (*n_min, *n_max, *per_decade),
                fit: (*fit_lo, *fit_hi, *fit_mode),
                jobs: cli.global.jobs,
            };
            let (o, v, tab) = tail(&r, &args)?;
            ("tail", o, v, Some(tab))
        }
        Command::Renewal { n_max, fit_lo, fit_hi } => {
            let (o, v, tab) = renewal(&r, *n_max, fit_lo.zip(*fit_hi))?;
            ("renewal", o, v, Some(tab))
        }
        Command::Verify => {
            let seed = r.seed.ok_or(saddle_core::Error::SeedRequired)?;
            let gates = verify::run_all(&SuiteContext { seed, jobs: cli.global.jobs });
            gates_passed = gates.iter().all(|g| g.pass);
            let mut tab = Table::new(&["id", "name", "pass"]);
            for g in &gates {
                tab.push([json!(g.id), json!(g.name), json!(g.pass)]);
            }
            ("verify", json!({}), json!({ "all_pass": gates_passed, "gates": gates }), Some(tab))
        }
    };
    let report = Report { command, config_hash: cfg.hash(), seed: cfg.seed, options, result, table };
    Ok(Outcome { report, format, out, gates_passed })
}

fn derive(r: &Resolved, eta: Option<f64>, zeta0: Option<f64>) -> CliResult<(Value, Value)> {
    let eta = eta.unwrap_or(r.rect.eta0);
    let zeta0 = zeta0.unwrap_or(r.rect.zeta0);
    let c = coeffs(&r.params, &r.constants, eta, zeta0)?;
    let tc = tail_coeffs(&r.params, &r.constants, &r.density, r.rect.zeta0)?;
    let result = json!({
        "params": r.params,
        "constants": r.constants,
        "rect": r.rect,
        "asymptotics": c,
        "delta0": delta0(&r.constants, &c),
        "tail_coeffs": tc,
    });
    Ok((json!({ "eta": eta, "zeta0": zeta0 }), result))
}

fn flow_cmd(r: &Resolved, x: f64, y: f64, t: f64, trajectory: bool) -> CliResult<(Value, Value, Table)> {
    let z = PhaseState::new(x, y);
    let mut tab = Table::new(&["t", "x", "y"]);
    let end = if trajectory {
        let (end, traj) = flow_trajectory(&r.params, &r.perturbation, z, t, &r.integrator)?;
        for (s, p) in &traj.samples {
            tab.push([*s, p.x, p.y]);
        }
        end
    } else {
        let end = flow(&r.params, &r.perturbation, z, t, &r.integrator)?;
        tab.push([t, end.x, end.y]);
        end
    };
    Ok((json!({ "x": x, "y": y, "t": t, "trajectory": trajectory }), json!({ "end": end }), tab))
}

fn exit_time(
    r: &Resolved,
    eta: f64,
    xi: Option<f64>,
    time: Option<f64>,
    sweep: bool,
    grid: &TimeGrid,
) -> CliResult<(Value, Value, Table)> {
    let zeta0 = r.rect.zeta0;
    let solver = ExitTimeSolver::with_constants(&r.params, &r.constants, zeta0)?;
    if let Some(xi) = xi {
        let (t, omega, method) = if r.perturbation.is_empty() {
            let e = solver.exit(xi, eta)?;
            (e.t, e.omega, "quadrature")
        } else {
            let z = PhaseState::new(xi, eta);
            let t = exit_time_flow(&r.params, &r.perturbation, z, zeta0, &r.integrator)?;
            let omega = if t == 0.0 { eta } else { flow(&r.params, &r.perturbation, z, t, &r.integrator)?.y };
            (t, omega, "flow")
        };
        let mut tab = Table::new(&["xi", "eta", "T", "omega"]);
        tab.push([xi, eta, t, omega]);
        return Ok((json!({ "eta": eta, "xi": xi, "zeta0": zeta0 }), json!({ "method": method }), tab));
    }
    if !r.perturbation.is_empty() {
        return Err(CliError::Validation("inverse exit times need an unperturbed field".into()));
    }
    let times = match (time, sweep) {
        (Some(t), _) => vec![t],
        (None, true) => grid.values()?,
        (None, false) => return Err(CliError::Parse("exit-time needs one of --xi, --T or --sweep".into())),
    };
    let c = coeffs(&r.params, &r.constants, eta, zeta0)?;
    let mut tab = Table::new(&["T", "eta", "xi_exact", "xi_expansion", "relative_gap"]);
    let mut guess = None;
    for &t in &times {
        let exact = solver.invert_near(eta, t, guess)?;
        guess = Some(exact);
        let approx = xi_expansion(&c, t);
        tab.push([t, eta, exact, approx, (approx - exact).abs() / exact]);
    }
    let options = json!({ "eta": eta, "zeta0": zeta0, "T": times });
    Ok((options, json!({ "xi0": c.xi0, "xi1": c.xi1 }), tab))
}

fn asymptotics(r: &Resolved, eta: Option<f64>, zeta0: Option<f64>, grid: &TimeGrid) -> CliResult<(Value, Value, Table)> {
    let eta = eta.unwrap_or(r.rect.eta0);
    let zeta0 = zeta0.unwrap_or(r.rect.zeta0);
    let c = coeffs(&r.params, &r.constants, eta, zeta0)?;
    let solver = ExitTimeSolver::with_constants(&r.params, &r.constants, zeta0)?;
    let mut tab = Table::new(&[
        "T",
        "xi_exact",
        "xi_expansion",
        "xi_second_order",
        "omega_exact",
        "omega_expansion",
        "omega_second_order",
    ]);
    let mut guess = None;
    for t in grid.values()? {
        let xi = solver.invert_near(eta, t, guess)?;
        guess = Some(xi);
        let omega = solver.omega(xi, eta)?;
        tab.push([
            t,
            xi,
            xi_expansion(&c, t),
            (1.0 - xi * t.powf(c.beta2) / c.xi0) * t,
            omega,
            omega_expansion(&c, t),
            (1.0 - omega * t.powf(c.beta0) / c.omega0) * t,
        ]);
    }
    let result = json!({ "coeffs": c, "delta0": delta0(&r.constants, &c) });
    Ok((json!({ "eta": eta, "zeta0": zeta0 }), result, tab))
}

struct TailArgs {
    method: TailMethod,
    samples: usize,
    grid: (u64, u64, usize),
    fit: (Option<f64>, Option<f64>, Option<FitModeArg>),
    jobs: Option<usize>,
}

fn tail(r: &Resolved, a: &TailArgs) -> CliResult<(Value, Value, Table)> {
    let (n_min, n_max, per_decade) = a.grid;
    if !(n_min >= 1 && n_max > n_min && per_decade > 0) {
        return Err(CliError::Validation(format!("bad n grid [{n_min}, {n_max}]")));
    }
    let grid = geometric_grid(n_min, n_max, per_decade);
    let strip = EntryStrip::new(&r.params, &r.rect, r.density.clone())?;
    let entry_mass = strip.entry_mass()?;
    let (table, default_lo, default_mode) = match a.method {
        TailMethod::Semi => {
            if !r.perturbation.is_empty() {
                return Err(CliError::Validation("the semi-analytic tail needs an unperturbed field; use --method mc".into()));
            }
            (semi_analytic_tail(&strip, &grid)?, 1e3, FitModeArg::PowerLaw)
        }
        TailMethod::Mc => {
            let opts = MonteCarloOptions { samples: a.samples, seed: r.seed, jobs: a.jobs, integrator: r.integrator };
            (monte_carlo_tail(&r.params, &r.perturbation, &strip, &grid, &opts)?, 1e2, FitModeArg::SecondOrder)
        }
    };
    let fit_range = [a.fit.0.unwrap_or(default_lo), a.fit.1.unwrap_or(n_max as f64)];
    let mode = a.fit.2.unwrap_or(default_mode);
    let fit = fit_regvar(&table, fit_range, mode.into())?;
    let tc = tail_coeffs(&r.params, &r.constants, &r.density, r.rect.zeta0)?;
    let mut tab = match &table.stderr {
        Some(_) => Table::new(&["n", "mass", "stderr"]),
        None => Table::new(&["n", "mass", "normalized"]),
    };
    for (i, (&n, &m)) in table.n_grid.iter().zip(&table.mass).enumerate() {
        let third = table.stderr.as_ref().map_or(m / entry_mass, |s| s[i]);
        tab.push([json!(n), json!(m), json!(third)]);
    }
    let method = match a.method {
        TailMethod::Semi => "semi",
        TailMethod::Mc => "mc",
    };
    let mut options = json!({ "method": method, "n_min": n_min, "n_max": n_max, "per_decade": per_decade });
    if a.method == TailMethod::Mc {
        options["samples"] = json!(a.samples);
    }
    let result = json!({
        "fit": fit,
        "beta2": r.constants.beta2,
        "entry_mass": entry_mass,
        "tail_coeffs": tc,
    });
    Ok((options, result, tab))
}

fn renewal(r: &Resolved, n_max: usize, fit: Option<(usize, usize)>) -> CliResult<(Value, Value, Table)> {
    if !r.perturbation.is_empty() {
        return Err(CliError::Validation("the renewal shadow is built from the unperturbed tail".into()));
    }
    let strip = EntryStrip::new(&r.params, &r.rect, r.density.clone())?;
    let tc = tail_coeffs(&r.params, &r.constants, &r.density, r.rect.zeta0)?;
    let mut mc = mixing_coeffs(tc.c0, r.constants.beta2)?;
    let dist = return_distribution(&unit_mass_tail(&strip, n_max as u64, 1e-10)?)?;
    let seq = renewal_sequence(&dist.p, n_max)?;
    let mut higher = Value::Null;
    if let Some((lo, hi)) = fit {
        let h = fit_higher_order(&seq.u, &mc, [lo, hi])?;
        mc.d_fit = h.d.clone();
        higher = json!(h);
    }
    let e = 1.0 - mc.beta;
    let mut tab = Table::new(&["n", "p", "u", "scaled_u", "prediction"]);
    for n in 0..=n_max {
        let nf = n as f64;
        let pred = if n == 0 { Value::Null } else { json!(correlation_prediction(&mc, nf)) };
        tab.push([json!(n), json!(seq.p[n]), json!(seq.u[n]), json!(nf.powf(e) * seq.u[n]), pred]);
    }
    let lo = (2 * n_max) / 3;
    let mut scaled: Vec<f64> = (lo.max(1)..=n_max).map(|n| (n as f64).powf(e) * seq.u[n]).collect();
    scaled.sort_by(f64::total_cmp);
    let median = scaled.get(scaled.len() / 2).copied();
    let result = json!({
        "mixing": mc,
        "remainder": dist.remainder,
        "median_scaled_u": { "range": [lo.max(1), n_max], "value": median },
        "higher_order_fit": higher,
    });
    Ok((json!({ "n_max": n_max, "fit": fit }), result, tab))
}
