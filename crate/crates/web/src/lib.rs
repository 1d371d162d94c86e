//! wasm-bindgen entry points for `www/index.html`.
//!
//! Everything crosses the boundary as flat `f64` arrays; errors come back
//! as strings so the page can show them.

use naming_lab::abm::{gen_network, run_realization, NetworkSpec};
use naming_lab::opinion::RuleVariant;
use naming_lab::scenario::{make_network_sym, ScenarioConfig};
use naming_lab::sweep::{steady_point, Backend, MeanFieldSettings};
use wasm_bindgen::prelude::*;

fn js(e: naming_lab::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn demo_settings() -> MeanFieldSettings {
    // Shorter horizon than the CLI so a slow point near P_A^c does not
    // freeze the tab; such points are flagged instead.
    MeanFieldSettings { t_max: 2e4, ..MeanFieldSettings::with_backend(Backend::Reduced) }
}

/// Steady-state `n_A` over `points` values of `P_A` in `[lo, hi]`.
///
/// `m = 2` uses `other` as `P_B`; `m = 3` uses it as `P_C` (no B zealots).
/// Output is `[p_a, n_A, n_B, converged]` per point.
#[wasm_bindgen]
pub fn steady_curve(m: u32, other: f64, lo: f64, hi: f64, points: u32) -> Result<Vec<f64>, JsError> {
    let settings = demo_settings();
    let mut out = Vec::with_capacity(4 * points as usize);
    for k in 0..points.max(2) {
        let p_a = lo + (hi - lo) * f64::from(k) / f64::from(points.max(2) - 1);
        let sc = match m {
            2 => ScenarioConfig::two_opinion(p_a, other),
            3 => ScenarioConfig::three_opinion(p_a, other),
            _ => return Err(JsError::new("m must be 2 or 3")),
        }
        .map_err(js)?;
        let (n, converged) = steady_point(&sc, &settings).map_err(js)?;
        out.extend([p_a, n[0], n[1], if converged { 1.0 } else { 0.0 }]);
    }
    Ok(out)
}

/// Mean-field `n_i` from the all-on-B start, sampled at `samples` times.
///
/// `committed` lists `P_i` for every opinion. Row layout: `t, n_1 .. n_m`.
#[wasm_bindgen]
pub fn trajectory(committed: Vec<f64>, t_end: f64, samples: u32) -> Result<Vec<f64>, JsError> {
    let sc = ScenarioConfig::all_on_b(committed).map_err(js)?;
    sc.validate().map_err(js)?;
    let sys = naming_lab::meanfield::build_system(sc.m, &sc.committed, RuleVariant::Original).map_err(js)?;
    let n = samples.max(2);
    let times: Vec<f64> = (0..n).map(|k| t_end * f64::from(k) / f64::from(n - 1)).collect();
    let traj = sys.integrate_at(&sc.initial_density().map_err(js)?, &times, Default::default()).map_err(js)?;
    let mut out = Vec::new();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        out.push(*t);
        // `{i}` sits at dense index `2^i - 1`.
        out.extend((0..sc.m).map(|i| x[(1 << i) - 1] + sc.committed[i]));
    }
    Ok(out)
}

/// One agent-based run on an Erdős–Rényi graph with the symmetric scenario.
///
/// Returns `n_A, n_B, n_C1..` per sweep, `m` values per row.
#[wasm_bindgen]
pub fn abm_run(
    n_agents: u32,
    avg_degree: f64,
    m: u32,
    p_a: f64,
    p0: f64,
    sweeps: u32,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    let sc = make_network_sym(m as usize, p_a, p0).map_err(js)?;
    let spec = if avg_degree <= 0.0 {
        NetworkSpec::complete(n_agents as usize)
    } else {
        NetworkSpec::erdos_renyi(n_agents as usize, avg_degree)
    };
    let net = gen_network(&spec, u64::from(seed)).map_err(js)?;
    let run = run_realization(&net, &sc, RuleVariant::Original, sweeps as usize, u64::from(seed)).map_err(js)?;
    Ok(run.n.into_iter().flatten().collect())
}
