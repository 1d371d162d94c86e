//! Run configuration, run metadata and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abm::{EnsembleStats, NetworkKind, NetworkSpec, DEFAULT_BETA, DEFAULT_REALIZATIONS, DEFAULT_SWEEPS};
use crate::error::{Error, Result};
use crate::opinion::{opinion_label, RuleVariant};
use crate::scenario::{make_s0, ScenarioConfig, ScenarioLabel, S0_DEFAULT_SIGMA};
use crate::sweep::{Backend, CurvePoint, HeatCell, ScenarioFamily, SweepResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRAJECTORY_HEADER: &str = "t,state,density";
pub const SWEEP_HEADER: &str = "param,value,observable,value2,classification";
pub const ENSEMBLE_HEADER: &str = "P_A,opinion,mean_n,R";
pub const REALIZATION_HEADER: &str = "realization,sweep,opinion,n";
pub const HEATMAP_HEADER: &str = "m,avg_degree,critical";

/// Every parameter any subcommand reads. Absent keys take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,

    // scenario
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub committed: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// `two_opinion`, `three_opinion`, `s0`, `s1`, `s2` or `network_sym`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,

    // dynamics
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<RuleVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,

    // network
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_agents: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_degree: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fresh_networks: Option<bool>,

    // sweeps
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_a_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_jump: Option<f64>,
    /// Parameter varied by a curve sweep, e.g. `P_C`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_param: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<f64>>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

pub const CURVE_PARAMS: [&str; 7] = ["P_B", "P_C", "p0", "P_tilde", "max_Pi", "m", "avg_degree"];
pub const FAMILIES: [&str; 6] = ["two_opinion", "three_opinion", "s0", "s1", "s2", "network_sym"];

impl RunConfig {
    /// Every semantic problem, each prefixed with the offending key.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!("schema_version: expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        let frac = |name: &str, v: Option<f64>, errs: &mut Vec<String>| {
            if let Some(v) = v {
                if !(0.0..1.0).contains(&v) {
                    errs.push(format!("{name}: {v} is not a fraction in [0, 1)"));
                }
            }
        };
        frac("p_a", self.p_a, &mut errs);
        frac("p_b", self.p_b, &mut errs);
        frac("p_c", self.p_c, &mut errs);
        frac("p_tilde", self.p_tilde, &mut errs);
        frac("p0", self.p0, &mut errs);
        frac("beta", self.beta, &mut errs);
        if let Some(m) = self.m {
            if m == 0 {
                errs.push("m: must be at least 1".into());
            }
        }
        if let Some(p) = &self.committed {
            if p.iter().any(|v| !(*v >= 0.0)) {
                errs.push("P: committed fractions must be non-negative".into());
            }
            let total: f64 = p.iter().sum();
            if total >= 1.0 {
                errs.push(format!("P: infeasible-scenario, committed fractions sum to {total} >= 1"));
            }
            if let Some(m) = self.m {
                if p.len() != m {
                    errs.push(format!("P: {} entries for m = {m}", p.len()));
                }
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.iter().any(|v| !(*v >= 0.0)) {
                errs.push("x0: initial densities must be non-negative".into());
            }
            if let Some(p) = &self.committed {
                if x0.len() != p.len() {
                    errs.push(format!("x0: {} entries but P has {}", x0.len(), p.len()));
                } else {
                    let total = x0.iter().sum::<f64>() + p.iter().sum::<f64>();
                    if (total - 1.0).abs() > 1e-9 {
                        errs.push(format!("x0: x0 and P sum to {total}, expected 1"));
                    }
                }
            }
        }
        if let Some(f) = &self.family {
            if !FAMILIES.contains(&f.as_str()) {
                errs.push(format!("family: unknown family {f:?}, expected one of {FAMILIES:?}"));
            }
        }
        if let Some(c) = &self.curve_param {
            if !CURVE_PARAMS.contains(&c.as_str()) {
                errs.push(format!("curve_param: unknown parameter {c:?}, expected one of {CURVE_PARAMS:?}"));
            }
        }
        let positive = |name: &str, v: Option<f64>, errs: &mut Vec<String>| {
            if let Some(v) = v {
                if !(v > 0.0) {
                    errs.push(format!("{name}: must be positive, got {v}"));
                }
            }
        };
        positive("t_end", self.t_end, &mut errs);
        positive("eps", self.eps, &mut errs);
        positive("t_max", self.t_max, &mut errs);
        positive("rtol", self.rtol, &mut errs);
        positive("atol", self.atol, &mut errs);
        positive("tol", self.tol, &mut errs);
        positive("delta_jump", self.delta_jump, &mut errs);
        positive("grid_step", self.grid_step, &mut errs);
        positive("sigma", self.sigma, &mut errs);
        if self.realizations == Some(0) {
            errs.push("L: at least one realization is needed".into());
        }
        if self.n_agents.is_some_and(|n| n < 2) {
            errs.push("n_agents: need at least 2 agents".into());
        }
        if let Some(g) = &self.p_a_grid {
            if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) {
                errs.push("p_a_grid: must be non-empty and strictly ascending".into());
            }
        }
        if let Some([lo, hi]) = self.bracket {
            if !(lo < hi) {
                errs.push(format!("bracket: lower end {lo} is not below upper end {hi}"));
            }
        }
        errs
    }

    /// Fills every unset key that has a documented default, for metadata.
    pub fn with_defaults(&self) -> RunConfig {
        let tol = crate::ode::Tolerances::default();
        let mut c = self.clone();
        c.variant.get_or_insert(RuleVariant::Original);
        c.backend.get_or_insert(Backend::Reduced);
        c.eps.get_or_insert(crate::ode::DEFAULT_STEADY_EPS);
        c.t_max.get_or_insert(crate::ode::DEFAULT_T_MAX);
        c.rtol.get_or_insert(tol.rtol);
        c.atol.get_or_insert(tol.atol);
        c.beta.get_or_insert(DEFAULT_BETA);
        c.sweeps.get_or_insert(DEFAULT_SWEEPS);
        c.realizations.get_or_insert(DEFAULT_REALIZATIONS);
        c.seed.get_or_insert(0);
        c.network_seed.get_or_insert(0);
        c.fresh_networks.get_or_insert(false);
        c.tol.get_or_insert(crate::sweep::DEFAULT_BISECTION_TOL);
        c.delta_jump.get_or_insert(crate::sweep::DEFAULT_DELTA_JUMP);
        c.grid_step.get_or_insert(crate::sweep::DEFAULT_ABM_GRID_STEP);
        c.sigma.get_or_insert(S0_DEFAULT_SIGMA);
        c
    }

    /// Network described by `network`, `n_agents`, `avg_degree` and `beta`.
    pub fn network_spec(&self) -> Option<NetworkSpec> {
        let n = self.n_agents.unwrap_or(1000);
        let k = self.avg_degree.unwrap_or(8.0);
        Some(match self.network? {
            NetworkKind::Complete => NetworkSpec::complete(n),
            NetworkKind::ErdosRenyi => NetworkSpec::erdos_renyi(n, k),
            NetworkKind::SmallWorld => NetworkSpec::small_world(n, k, self.beta.unwrap_or(DEFAULT_BETA)),
            NetworkKind::ScaleFree => NetworkSpec::scale_free(n, k),
        })
    }
}

impl RunConfig {
    /// The scenario family named by `family`, with `P_A` left free.
    pub fn family(&self) -> Result<ScenarioFamily> {
        let need = |name: &str, v: Option<f64>| v.ok_or_else(|| Error::Config(vec![format!("{name}: required by family")]));
        let need_m = || self.m.ok_or_else(|| Error::Config(vec!["m: required by family".into()]));
        let family = self
            .family
            .as_deref()
            .ok_or_else(|| Error::Config(vec!["family: required when P is not given".into()]))?;
        Ok(match family {
            "two_opinion" => ScenarioFamily::TwoOpinion { p_b: self.p_b.unwrap_or(0.0) },
            "three_opinion" => ScenarioFamily::ThreeOpinion { p_c: need("p_c", self.p_c)? },
            "s1" => ScenarioFamily::S1 { m: need_m()?, p_tilde: need("p_tilde", self.p_tilde)? },
            "s2" => ScenarioFamily::S2 { m: need_m()?, p_tilde: need("p_tilde", self.p_tilde)? },
            "s0" => {
                let m = need_m()?;
                let p_tilde = need("p_tilde", self.p_tilde)?;
                // Any cap above P_tilde accepts every draw.
                let cap = self.p_a.unwrap_or(p_tilde + 1e-9).min(1.0 - p_tilde - 1e-9);
                let sigma = self.sigma.unwrap_or(S0_DEFAULT_SIGMA);
                let draw = make_s0(m, cap, p_tilde, sigma, self.seed.unwrap_or(0))?;
                ScenarioFamily::Minority { minority: draw.committed[2..].to_vec() }
            }
            "network_sym" => ScenarioFamily::NetworkSym { m: need_m()?, p0: need("p0", self.p0)? },
            other => return Err(Error::Config(vec![format!("family: unknown family {other:?}")])),
        })
    }

    /// The single scenario to run: explicit `P` (with `x0` or all on `B`),
    /// otherwise `family` evaluated at `p_a`.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        if let Some(p) = &self.committed {
            return match &self.x0 {
                Some(x0) => ScenarioConfig::new(p.clone(), x0.clone(), ScenarioLabel::Custom),
                None => ScenarioConfig::all_on_b(p.clone()),
            };
        }
        let p_a = self.p_a.ok_or_else(|| Error::Config(vec!["p_a: required with family".into()]))?;
        self.family()?.at(p_a)
    }

    /// Family for one value of `curve_param`, other keys held fixed.
    pub fn curve_family(&self, value: f64) -> Result<ScenarioFamily> {
        let param = self
            .curve_param
            .as_deref()
            .ok_or_else(|| Error::Config(vec!["curve_param: required for a curve".into()]))?;
        let mut c = self.clone();
        match param {
            "P_B" => return Ok(ScenarioFamily::TwoOpinion { p_b: value }),
            "P_C" => return Ok(ScenarioFamily::ThreeOpinion { p_c: value }),
            "P_tilde" => c.p_tilde = Some(value),
            "m" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(vec![format!("curve_values: m = {value} is not an integer")]));
                }
                c.m = Some(value as usize);
            }
            "p0" => {
                let m = self.m.ok_or_else(|| Error::Config(vec!["m: required for a p0 curve".into()]))?;
                if self.family.as_deref() == Some("network_sym") {
                    c.p0 = Some(value);
                } else {
                    c.p_tilde = Some(value * m.saturating_sub(2) as f64);
                }
            }
            "max_Pi" => {
                let m = self.m.ok_or_else(|| Error::Config(vec!["m: required for a max_Pi curve".into()]))?;
                let p_tilde = self.p_tilde.ok_or_else(|| Error::Config(vec!["p_tilde: required for a max_Pi curve".into()]))?;
                if m < 4 || value > p_tilde {
                    return Err(Error::infeasible(format!("max_Pi = {value} with m = {m}, P_tilde = {p_tilde}")));
                }
                let rest = (p_tilde - value) / (m - 3) as f64;
                let mut minority = vec![rest; m - 2];
                minority[0] = value;
                return Ok(ScenarioFamily::Minority { minority });
            }
            other => {
                return Err(Error::Config(vec![format!("curve_param: {other} has no mean-field family")]));
            }
        }
        if c.family.is_none() {
            c.family = Some("s1".into());
        }
        c.family()
    }
}

/// Parses JSON config text, reporting syntax errors or every semantic problem at once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(vec![format!("line {}, column {}: {e}", e.line(), e.column())]))?;
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

/// Everything needed to regenerate an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub artifact_version: String,
    pub command: String,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub realization_seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub network_seeds: Vec<u64>,
    /// Effective configuration, defaults included.
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunMetadata {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let config = config.with_defaults();
        RunMetadata {
            artifact_version: ARTIFACT_VERSION.into(),
            command: command.into(),
            master_seed: config.seed.unwrap_or(0),
            realization_seeds: Vec::new(),
            network_seeds: Vec::new(),
            config,
            notes: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Writes `<csv path>.meta.json` next to an output file.
    pub fn write_beside(&self, csv_path: &Path) -> Result<std::path::PathBuf> {
        let mut name = csv_path.as_os_str().to_owned();
        name.push(".meta.json");
        let path = std::path::PathBuf::from(name);
        let text = serde_json::to_string_pretty(self).expect("metadata serializes");
        write_file(&path, &(text + "\n"))?;
        Ok(path)
    }
}

/// `%g`-style formatting at 12 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        }
    }
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// A headered table ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: &'static str,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &'static str) -> Self {
        CsvTable { header, rows: Vec::new() }
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(self.header);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.render())
    }
}

/// Rows `t,state,density` for each time and labelled state.
pub fn trajectory_table(times: &[f64], labels: &[String], states: &[Vec<f64>]) -> CsvTable {
    let mut t = CsvTable::new(TRAJECTORY_HEADER);
    for (time, state) in times.iter().zip(states) {
        for (label, v) in labels.iter().zip(state) {
            t.rows.push(vec![fmt_float(*time), label.clone(), fmt_float(*v)]);
        }
    }
    t
}

/// One row per evaluated point: `P_A`, its value, the observable and its value.
pub fn sweep_table(result: &SweepResult) -> CsvTable {
    let mut t = CsvTable::new(SWEEP_HEADER);
    for p in &result.points {
        let v = match (&p.r, result.observable.as_str()) {
            (Some(r), "R_A") => r[0],
            _ => p.n[0],
        };
        let class = match result.critical_point {
            Some(c) if p.p_a >= c => "above",
            Some(_) => "below",
            None => "none",
        };
        t.rows.push(vec![
            result.param.clone(),
            fmt_float(p.p_a),
            result.observable.clone(),
            fmt_float(v),
            class.into(),
        ]);
    }
    if let Some(c) = result.critical_point {
        t.rows.push(vec![
            result.param.clone(),
            fmt_float(c),
            "P_A_c".into(),
            fmt_float(result.jump.unwrap_or(f64::NAN)),
            result.classification.to_string(),
        ]);
    }
    t
}

/// One row per curve point: the varied parameter, its value and `P_A^(c)`.
pub fn curve_table(points: &[CurvePoint]) -> CsvTable {
    let mut t = CsvTable::new(SWEEP_HEADER);
    for p in points {
        t.rows.push(vec![
            p.param.clone(),
            fmt_float(p.value),
            "P_A_c".into(),
            fmt_float(p.critical_point.unwrap_or(f64::NAN)),
            p.classification.to_string(),
        ]);
    }
    t
}

pub fn ensemble_table(rows: &[(f64, &EnsembleStats)]) -> CsvTable {
    let mut t = CsvTable::new(ENSEMBLE_HEADER);
    for (p_a, st) in rows {
        for (i, (n, r)) in st.mean_n.iter().zip(&st.r).enumerate() {
            t.rows.push(vec![fmt_float(*p_a), opinion_label(i), fmt_float(*n), fmt_float(*r)]);
        }
    }
    t
}

/// `trajectories[r][s][i]`: opinion `i` after `s` sweeps in realization `r`.
pub fn realization_table(trajectories: &[Vec<Vec<f64>>]) -> CsvTable {
    let mut t = CsvTable::new(REALIZATION_HEADER);
    for (r, traj) in trajectories.iter().enumerate() {
        for (s, n) in traj.iter().enumerate() {
            for (i, v) in n.iter().enumerate() {
                t.rows.push(vec![r.to_string(), s.to_string(), opinion_label(i), fmt_float(*v)]);
            }
        }
    }
    t
}

pub fn heatmap_table(cells: &[HeatCell]) -> CsvTable {
    let mut t = CsvTable::new(HEATMAP_HEADER);
    for c in cells {
        t.rows.push(vec![c.m.to_string(), fmt_float(c.avg_degree), fmt_float(c.critical.unwrap_or(f64::NAN))]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_meanfield_config() {
        let c = parse_config(r#"{"m": 2, "P": [0.12, 0.0], "variant": "original"}"#).unwrap();
        assert_eq!(c.m, Some(2));
        assert_eq!(c.variant, Some(RuleVariant::Original));
        assert_eq!(c.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn infeasible_and_unknown_keys() {
        match parse_config(r#"{"m": 2, "P": [0.6, 0.5]}"#) {
            Err(Error::Config(errs)) => assert!(errs.iter().any(|e| e.contains("infeasible-scenario"))),
            other => panic!("{other:?}"),
        }
        match parse_config(r#"{"m": 2, "colour": 1}"#) {
            Err(Error::Config(errs)) => assert!(errs[0].contains("colour")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_are_aggregated() {
        match parse_config(r#"{"m": 3, "P": [0.1, 0.0], "tol": -1, "L": 0, "family": "s9"}"#) {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 4, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_round_trips() {
        let c = parse_config(r#"{"network": "er", "n_agents": 1000, "avg_degree": 8, "T": 1000, "L": 50}"#).unwrap();
        let full = c.with_defaults();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&full).unwrap()).unwrap();
        assert_eq!(back, full);
    }

    #[test]
    fn scenario_resolution() {
        let c = parse_config(r#"{"P": [0.12, 0.0]}"#).unwrap();
        assert_eq!(c.scenario().unwrap().x0, vec![0.0, 0.88]);
        let c = parse_config(r#"{"family": "s1", "m": 6, "p_tilde": 0.12, "p_a": 0.1}"#).unwrap();
        assert_eq!(c.scenario().unwrap().committed, vec![0.1, 0.0, 0.03, 0.03, 0.03, 0.03]);
        let c = parse_config(r#"{"family": "s1", "m": 6, "curve_param": "m"}"#).unwrap();
        assert!(matches!(c.curve_family(5.0), Err(Error::Config(_))));
        let c = parse_config(r#"{"m": 6, "p_tilde": 0.12, "curve_param": "m"}"#).unwrap();
        assert_eq!(c.curve_family(5.0).unwrap(), ScenarioFamily::S1 { m: 5, p_tilde: 0.12 });
        let c = parse_config(r#"{"family": "s2", "m": 6, "curve_param": "p0"}"#).unwrap();
        assert_eq!(c.curve_family(0.02).unwrap(), ScenarioFamily::S2 { m: 6, p_tilde: 0.08 });
        assert!(parse_config(r#"{"family": "s1"}"#).unwrap().family().is_err());
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.098), "0.098");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(fmt_float(123456.0), "123456");
        assert_eq!(fmt_float(1e12), "1e+12");
        assert_eq!(fmt_float(-0.5), "-0.5");
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(0.99999999999999), "1");
    }

    #[test]
    fn headers_are_exact() {
        assert_eq!(trajectory_table(&[], &[], &[]).render(), "t,state,density\n");
        assert_eq!(heatmap_table(&[]).render(), "m,avg_degree,critical\n");
        assert_eq!(ensemble_table(&[]).render(), "P_A,opinion,mean_n,R\n");
        assert_eq!(realization_table(&[]).render(), "realization,sweep,opinion,n\n");
        assert_eq!(curve_table(&[]).render(), "param,value,observable,value2,classification\n");
    }
}
