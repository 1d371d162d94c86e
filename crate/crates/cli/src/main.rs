//! `naming-lab` command line.

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use naming_lab::abm::{ensemble, EnsembleOptions, NetworkKind, NetworkSpec};
use naming_lab::io::{
    curve_table, ensemble_table, heatmap_table, realization_table, sweep_table, trajectory_table, RunConfig,
    RunMetadata, SCHEMA_VERSION,
};
use naming_lab::meanfield::build_system;
use naming_lab::ode::Tolerances;
use naming_lab::opinion::{opinion_label, OpinionSet, RuleVariant};
use naming_lab::recursive::RecursiveEngine;
use naming_lab::sweep::{
    curve_pc_vs, find_critical_abm, find_critical_meanfield, grid, heatmap, Backend, MeanFieldSettings,
};
use naming_lab::symmetry::{reduce_system, OpinionClassPartition};
use naming_lab::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NONCONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "naming-lab", version, about = "Naming Game with committed minorities")]
struct Cli {
    /// Worker threads for ensembles and curves.
    #[arg(long, global = true, env = "NAMING_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field trajectory, or steady state when --t-end is absent.
    #[command(allow_negative_numbers = true)]
    Meanfield(RunArgs),
    /// Discrete listener-only recursion; --t-end records that many steps.
    #[command(allow_negative_numbers = true)]
    Recursive(RunArgs),
    /// Agent-based ensemble on a network.
    #[command(allow_negative_numbers = true)]
    Abm {
        #[command(flatten)]
        run: RunArgs,
        /// Also write every realization's trajectory here.
        #[arg(long)]
        realizations_out: Option<PathBuf>,
    },
    /// Critical point, critical-point curve, or ABM heat map.
    ///
    /// Probes that miss the steady state are used at t_max and listed as
    /// warnings in the metadata; they do not change the exit code.
    #[command(allow_negative_numbers = true)]
    Sweep(RunArgs),
    /// Scenario construction.
    Scenario {
        #[command(subcommand)]
        action: ScenarioCmd,
    },
    /// Draw a CSV produced by the other subcommands as SVG.
    Render {
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Print the scenario as JSON (or write it to --out).
    #[command(allow_negative_numbers = true)]
    Make {
        #[command(flatten)]
        params: Overrides,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    params: Overrides,
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

/// Flag versions of the config keys.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "P", value_delimiter = ',')]
    committed: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    p_a: Option<f64>,
    #[arg(long)]
    p_b: Option<f64>,
    #[arg(long)]
    p_c: Option<f64>,
    #[arg(long)]
    p_tilde: Option<f64>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_parser = parse_serde::<RuleVariant>)]
    variant: Option<RuleVariant>,
    #[arg(long, value_parser = parse_serde::<Backend>)]
    backend: Option<Backend>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long, value_parser = parse_serde::<NetworkKind>)]
    network: Option<NetworkKind>,
    #[arg(long)]
    n_agents: Option<usize>,
    #[arg(long)]
    avg_degree: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "T")]
    sweeps: Option<usize>,
    #[arg(long = "L")]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    network_seed: Option<u64>,
    #[arg(long)]
    fresh_networks: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    p_a_grid: Option<Vec<f64>>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    bracket: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    delta_jump: Option<f64>,
    #[arg(long)]
    curve_param: Option<String>,
    #[arg(long, value_delimiter = ',')]
    curve_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ms: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<f64>>,
}

macro_rules! overlay {
    ($cfg:ident, $o:ident, $($f:ident),*) => {
        $( if let Some(v) = $o.$f.clone() { $cfg.$f = Some(v); } )*
    };
}

fn load_config(path: Option<&Path>, o: &Overrides) -> naming_lab::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => naming_lab::io::read_config(p)?,
        None => RunConfig { schema_version: SCHEMA_VERSION, ..Default::default() },
    };
    overlay!(
        cfg, o, m, committed, x0, family, p_a, p_b, p_c, p_tilde, p0, sigma, variant, backend, t_end, samples,
        steps, eps, t_max, rtol, atol, network, n_agents, avg_degree, beta, sweeps, realizations, seed, network_seed,
        fresh_networks, p_a_grid, grid_step, tol, delta_jump, curve_param, curve_values, ms, degrees
    );
    if let Some(b) = &o.bracket {
        cfg.bracket = Some([b[0], b[1]]);
    }
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    Ok(cfg)
}

/// Outcome of a subcommand that wrote its outputs.
enum Done {
    Ok,
    NotConverged,
}

fn settings(cfg: &RunConfig) -> MeanFieldSettings {
    let c = cfg.with_defaults();
    let backend = c.backend.expect("defaulted");
    let mut s = MeanFieldSettings::with_backend(backend);
    if cfg.variant.is_some() {
        s.variant = c.variant.expect("defaulted");
    }
    s.eps = c.eps.expect("defaulted");
    s.t_max = c.t_max.expect("defaulted");
    s.tol = Tolerances { rtol: c.rtol.expect("defaulted"), atol: c.atol.expect("defaulted") };
    s.delta_jump = c.delta_jump.expect("defaulted");
    if let Some(eps) = cfg.eps {
        s.recursive_eps = eps;
    }
    if let Some(steps) = cfg.steps {
        s.recursive_max_steps = steps;
    }
    s
}

fn sample_times(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

fn run_meanfield(cfg: &RunConfig, out: &Path) -> naming_lab::Result<Done> {
    let sc = cfg.scenario()?;
    let s = settings(cfg);
    let mut meta = RunMetadata::new("meanfield", cfg);
    let single_labels: Vec<String> = (0..sc.m).map(opinion_label).collect();
    let (labels, times, states, converged) = match s.backend {
        Backend::Full => {
            let sys = build_system(sc.m, &sc.committed, s.variant)?;
            let labels: Vec<String> = (0..(1usize << sc.m) - 1)
                .map(|i| OpinionSet::from_index(i).to_string())
                .collect();
            let init = sc.initial_density()?;
            match cfg.t_end {
                Some(t_end) => {
                    let tr = sys.integrate_at(&init, &sample_times(t_end, cfg.samples.unwrap_or(101)), s.tol)?;
                    (labels, tr.times, tr.states, true)
                }
                None => {
                    let (dv, o) = sys.steady_state(&init, s.eps, s.t_max, s.tol)?;
                    (labels, vec![0.0, o.t], vec![init.x, dv.x], o.converged)
                }
            }
        }
        Backend::Reduced => {
            let part = OpinionClassPartition::from_scenario(&sc)?;
            let sys = reduce_system(&part, s.variant)?;
            let singles = |y: &[f64]| -> Vec<f64> {
                sys.observables(y).n.iter().zip(&sc.committed).map(|(n, p)| n - p).collect()
            };
            let y0 = sys.initial_state();
            match cfg.t_end {
                Some(t_end) => {
                    let tr = sys.integrate_at(&y0, &sample_times(t_end, cfg.samples.unwrap_or(101)), s.tol)?;
                    let st = tr.states.iter().map(|y| singles(y)).collect();
                    (single_labels, tr.times, st, true)
                }
                None => {
                    let o = sys.steady_state(&y0, s.eps, s.t_max, s.tol)?;
                    (single_labels, vec![0.0, o.t], vec![singles(&y0), singles(&o.state)], o.converged)
                }
            }
        }
        Backend::Recursive => {
            return Err(Error::Config(vec!["backend: use the recursive subcommand for the recursion".into()]));
        }
    };
    trajectory_table(&times, &labels, &states).write(out)?;
    if s.backend == Backend::Reduced {
        meta.notes.push("reduced backend: only single-opinion densities are written".into());
    }
    if !converged {
        meta.warnings.push(format!("steady state not reached by t_max = {}", s.t_max));
    }
    meta.write_beside(out)?;
    Ok(if converged { Done::Ok } else { Done::NotConverged })
}

fn run_recursive(cfg: &RunConfig, out: &Path) -> naming_lab::Result<Done> {
    let sc = cfg.scenario()?;
    let s = settings(cfg);
    let mut meta = RunMetadata::new("recursive", cfg);
    let (eng, mut st) = RecursiveEngine::from_scenario(&sc)?;
    let labels: Vec<String> = (0..sc.m).map(opinion_label).collect();
    let mut times = vec![0.0];
    let mut states = vec![st.x_single.clone()];
    let mut converged = true;
    match cfg.t_end {
        // A fixed number of steps, every step recorded.
        Some(t_end) => {
            for _ in 0..t_end.round() as u64 {
                eng.step(&mut st);
                times.push(st.t as f64);
                states.push(st.x_single.clone());
            }
        }
        None => {
            let (fin, ok) = eng.steady_state(st, s.recursive_eps, s.recursive_max_steps)?;
            times.push(fin.t as f64);
            states.push(fin.x_single.clone());
            converged = ok;
        }
    }
    trajectory_table(&times, &labels, &states).write(out)?;
    meta.notes.push("one recursion step is one time unit".into());
    if !converged {
        meta.warnings.push(format!("no fixed point within {} steps", s.recursive_max_steps));
    }
    meta.write_beside(out)?;
    Ok(if converged { Done::Ok } else { Done::NotConverged })
}

fn network_of(cfg: &RunConfig) -> naming_lab::Result<NetworkSpec> {
    cfg.network_spec()
        .ok_or_else(|| Error::Config(vec!["network: required (complete, er, sw or sf)".into()]))
}

fn ensemble_options(cfg: &RunConfig, keep: bool) -> EnsembleOptions {
    let c = cfg.with_defaults();
    EnsembleOptions {
        sweeps: c.sweeps.expect("defaulted"),
        realizations: c.realizations.expect("defaulted"),
        seed: c.seed.expect("defaulted"),
        fresh_networks: c.fresh_networks.expect("defaulted"),
        network_seed: c.network_seed.expect("defaulted"),
        keep_trajectories: keep,
    }
}

fn run_abm(cfg: &RunConfig, out: &Path, per_run: Option<&Path>) -> naming_lab::Result<Done> {
    let spec = network_of(cfg)?;
    let opts = ensemble_options(cfg, per_run.is_some());
    let variant = cfg.variant.unwrap_or(RuleVariant::Original);
    let scenarios = match &cfg.p_a_grid {
        Some(g) => {
            let fam = cfg.family()?;
            g.iter().map(|&p| Ok((p, fam.at(p)?))).collect::<naming_lab::Result<Vec<_>>>()?
        }
        None => {
            let sc = cfg.scenario()?;
            vec![(sc.committed[0], sc)]
        }
    };
    let mut meta = RunMetadata::new("abm", cfg);
    let mut stats = Vec::with_capacity(scenarios.len());
    for (p_a, sc) in &scenarios {
        let st = ensemble(&spec, sc, variant, &opts)?;
        if st.ties > 0 {
            meta.warnings.push(format!("P_A = {p_a}: {} tied realizations credited to the lowest index", st.ties));
        }
        if st.diagnostics.isolated_redraws > 0 {
            meta.warnings.push(format!(
                "P_A = {p_a}: {} speaker draws hit isolated nodes and were redrawn",
                st.diagnostics.isolated_redraws
            ));
        }
        stats.push((*p_a, st));
    }
    if let Some((_, first)) = stats.first() {
        meta.realization_seeds = first.run_seeds.clone();
        meta.network_seeds = first.network_seeds.clone();
    }
    let rows: Vec<(f64, &_)> = stats.iter().map(|(p, s)| (*p, s)).collect();
    ensemble_table(&rows).write(out)?;
    if let Some(path) = per_run {
        let (_, last) = stats.last().expect("at least one scenario");
        realization_table(&last.trajectories).write(path)?;
    }
    meta.write_beside(out)?;
    Ok(Done::Ok)
}

fn run_sweep(cfg: &RunConfig, out: &Path) -> naming_lab::Result<Done> {
    let c = cfg.with_defaults();
    let tol = c.tol.expect("defaulted");
    let mut meta = RunMetadata::new("sweep", cfg);
    if let Some(kind) = cfg.network {
        let opts = ensemble_options(cfg, false);
        let step = c.grid_step.expect("defaulted");
        if let (Some(ms), Some(degrees)) = (&cfg.ms, &cfg.degrees) {
            let n = cfg.n_agents.unwrap_or(1000);
            let nets: Vec<NetworkSpec> = degrees
                .iter()
                .map(|&k| match kind {
                    NetworkKind::Complete => NetworkSpec::complete(n),
                    NetworkKind::ErdosRenyi => NetworkSpec::erdos_renyi(n, k),
                    NetworkKind::SmallWorld => NetworkSpec::small_world(n, k, c.beta.expect("defaulted")),
                    NetworkKind::ScaleFree => NetworkSpec::scale_free(n, k),
                })
                .collect();
            let p_tilde = cfg
                .p_tilde
                .ok_or_else(|| Error::Config(vec!["p_tilde: required for a heat map".into()]))?;
            let hi = cfg.bracket.map(|b| b[1]).unwrap_or(0.2);
            let cells = heatmap(ms, &nets, p_tilde, step, hi, &opts)?;
            heatmap_table(&cells).write(out)?;
        } else {
            let fam = cfg.family()?;
            let g = match &cfg.p_a_grid {
                Some(g) => g.clone(),
                None => {
                    let (lo, hi) = match cfg.bracket {
                        Some([lo, hi]) => (lo, hi),
                        None => {
                            let (lo, hi) = fam.default_bracket();
                            (lo, hi.min(lo + 0.2))
                        }
                    };
                    grid(lo, hi, step)
                }
            };
            let spec = network_of(cfg)?;
            let res = find_critical_abm(&fam, &spec, &g, &opts, c.variant.expect("defaulted"), false)?;
            meta.warnings.extend(res.warnings.iter().cloned());
            sweep_table(&res).write(out)?;
        }
        meta.write_beside(out)?;
        return Ok(Done::Ok);
    }
    let s = settings(cfg);
    if let Some(param) = &cfg.curve_param {
        let values = cfg
            .curve_values
            .clone()
            .ok_or_else(|| Error::Config(vec!["curve_values: required with curve_param".into()]))?;
        let pts = curve_pc_vs(param, &values, |v| cfg.curve_family(v), tol, &s);
        for p in &pts {
            if let Some(e) = &p.error {
                meta.warnings.push(format!("{} = {}: {e}", p.param, p.value));
            }
            meta.warnings.extend(p.warnings.iter().map(|w| format!("{} = {}: {w}", p.param, p.value)));
        }
        curve_table(&pts).write(out)?;
    } else {
        let fam = cfg.family()?;
        let res = find_critical_meanfield(&fam, cfg.bracket.map(|b| (b[0], b[1])), tol, &s)?;
        meta.warnings.extend(res.warnings.iter().cloned());
        sweep_table(&res).write(out)?;
    }
    meta.write_beside(out)?;
    Ok(Done::Ok)
}

fn run_scenario_make(cfg: &RunConfig, out: Option<&Path>) -> naming_lab::Result<Done> {
    let sc = cfg.scenario()?;
    let text = serde_json::to_string_pretty(&sc).expect("scenario serializes") + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io { path: p.to_path_buf(), source })?,
        None => print!("{text}"),
    }
    Ok(Done::Ok)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(errs) if !errs.is_empty() && errs.iter().all(|m| m.contains("infeasible-scenario")) => {
            EXIT_INFEASIBLE
        }
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Stiffness { .. } => EXIT_NONCONVERGED,
        Error::Io { .. } => 1,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let result = match &cli.command {
        Command::Meanfield(a) => load_config(a.config.as_deref(), &a.params).and_then(|c| run_meanfield(&c, &a.out)),
        Command::Recursive(a) => load_config(a.config.as_deref(), &a.params).and_then(|c| run_recursive(&c, &a.out)),
        Command::Abm { run, realizations_out } => load_config(run.config.as_deref(), &run.params)
            .and_then(|c| run_abm(&c, &run.out, realizations_out.as_deref())),
        Command::Sweep(a) => load_config(a.config.as_deref(), &a.params).and_then(|c| run_sweep(&c, &a.out)),
        Command::Scenario { action: ScenarioCmd::Make { params, config, out } } => {
            load_config(config.as_deref(), params).and_then(|c| run_scenario_make(&c, out.as_deref()))
        }
        Command::Render { input, out, title } => render::render(input, out, title.as_deref()).map(|warn| {
            if let Some(w) = warn {
                eprintln!("warning: {w}");
            }
            Done::Ok
        }),
    };
    match result {
        Ok(Done::Ok) => ExitCode::SUCCESS,
        Ok(Done::NotConverged) => {
            eprintln!("warning: not converged; results written");
            ExitCode::from(EXIT_NONCONVERGED)
        }
        Err(e) => {
            match &e {
                Error::Config(errs) => {
                    eprintln!("error: invalid configuration");
                    for m in errs {
                        eprintln!("  {m}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
