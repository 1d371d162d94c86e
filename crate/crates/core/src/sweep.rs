//! Locating and classifying the committed fraction at which `A` takes over.

use serde::{Deserialize, Serialize};

use crate::abm::{ensemble, EnsembleOptions, NetworkSpec};
use crate::error::{Error, Result};
use crate::meanfield::{argmax, build_system, Observables};
use crate::ode::{Tolerances, DEFAULT_STEADY_EPS, DEFAULT_T_MAX};
use crate::opinion::RuleVariant;
use crate::recursive::{RecursiveEngine, DEFAULT_MAX_STEPS, DEFAULT_RECURSIVE_EPS};
use crate::scenario::{
    make_network_sym, make_s0, make_s1, make_s2, with_minority, ScenarioConfig, ScenarioLabel, S2_GAP,
};
use crate::symmetry::{reduce_system, OpinionClassPartition};

pub const DEFAULT_BISECTION_TOL: f64 = 5e-4;
pub const DEFAULT_DELTA_JUMP: f64 = 0.1;
pub const DOMINANCE_MARGIN: f64 = 1e-9;
pub const DEFAULT_ABM_GRID_STEP: f64 = 2.5e-3;
/// S0 draws tried per requested kept sample before `bound_check_s0` gives up.
pub const S0_ATTEMPTS_PER_TRIAL: usize = 10;
/// Distance kept from the edge of the feasible `P_A` range.
const EDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// All `2^m - 1` mean-field states.
    Full,
    /// Mean-field equations on symmetry orbits.
    Reduced,
    /// Discrete listener-only recursion.
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Continuous,
    Discontinuous,
    NoTransition,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Continuous => "continuous",
            Classification::Discontinuous => "discontinuous",
            Classification::NoTransition => "no_transition",
        })
    }
}

/// A scenario with `P_A` left free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioFamily {
    TwoOpinion { p_b: f64 },
    ThreeOpinion { p_c: f64 },
    S1 { m: usize, p_tilde: f64 },
    S2 { m: usize, p_tilde: f64 },
    /// Fixed minority committed fractions on `C1..`, e.g. one S0 draw.
    Minority { minority: Vec<f64> },
    NetworkSym { m: usize, p0: f64 },
}

impl ScenarioFamily {
    pub fn m(&self) -> usize {
        match self {
            ScenarioFamily::TwoOpinion { .. } => 2,
            ScenarioFamily::ThreeOpinion { .. } => 3,
            ScenarioFamily::S1 { m, .. } | ScenarioFamily::S2 { m, .. } | ScenarioFamily::NetworkSym { m, .. } => *m,
            ScenarioFamily::Minority { minority } => minority.len() + 2,
        }
    }

    pub fn at(&self, p_a: f64) -> Result<ScenarioConfig> {
        match self {
            ScenarioFamily::TwoOpinion { p_b } => ScenarioConfig::two_opinion(p_a, *p_b),
            ScenarioFamily::ThreeOpinion { p_c } => ScenarioConfig::three_opinion(p_a, *p_c),
            ScenarioFamily::S1 { m, p_tilde } => make_s1(*m, p_a, *p_tilde),
            ScenarioFamily::S2 { m, p_tilde } => make_s2(*m, p_a, *p_tilde),
            ScenarioFamily::Minority { minority } => with_minority(p_a, minority, ScenarioLabel::S0),
            ScenarioFamily::NetworkSym { m, p0 } => make_network_sym(*m, p_a, *p0),
        }
    }

    /// Feasible `P_A` range with `A` the largest committed group.
    pub fn default_bracket(&self) -> (f64, f64) {
        let (lo, others) = match self {
            ScenarioFamily::TwoOpinion { p_b } => (0.0, *p_b),
            ScenarioFamily::ThreeOpinion { p_c } => (0.0, *p_c),
            ScenarioFamily::S1 { m, p_tilde } => (*p_tilde / m.saturating_sub(2).max(1) as f64, *p_tilde),
            ScenarioFamily::S2 { m, p_tilde } => {
                (*p_tilde / m.saturating_sub(2).max(1) as f64 + S2_GAP + EDGE, *p_tilde)
            }
            ScenarioFamily::Minority { minority } => {
                (minority.iter().cloned().fold(0.0, f64::max), minority.iter().sum())
            }
            ScenarioFamily::NetworkSym { m, p0 } => (*p0, *p0 * (m - 1) as f64),
        };
        (lo.max(EDGE), 1.0 - others - EDGE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSettings {
    pub backend: Backend,
    pub variant: RuleVariant,
    pub eps: f64,
    pub t_max: f64,
    pub tol: Tolerances,
    pub recursive_eps: f64,
    pub recursive_max_steps: u64,
    pub delta_jump: f64,
}

impl Default for MeanFieldSettings {
    fn default() -> Self {
        MeanFieldSettings {
            backend: Backend::Reduced,
            variant: RuleVariant::Original,
            eps: DEFAULT_STEADY_EPS,
            t_max: DEFAULT_T_MAX,
            tol: Tolerances::default(),
            recursive_eps: DEFAULT_RECURSIVE_EPS,
            recursive_max_steps: DEFAULT_MAX_STEPS,
            delta_jump: DEFAULT_DELTA_JUMP,
        }
    }
}

impl MeanFieldSettings {
    pub fn with_backend(backend: Backend) -> Self {
        let variant = if backend == Backend::Recursive { RuleVariant::ListenerOnly } else { RuleVariant::Original };
        MeanFieldSettings { backend, variant, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p_a: f64,
    /// Steady-state (or ensemble mean) `n_i`.
    pub n: Vec<f64>,
    /// Dominance ratios, ABM only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    pub converged: bool,
}

impl SweepPoint {
    pub fn a_dominant(&self) -> bool {
        Observables { n: self.n.clone() }.strictly_dominant(0, DOMINANCE_MARGIN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: String,
    pub observable: String,
    /// Evaluated points in ascending `P_A`.
    pub points: Vec<SweepPoint>,
    pub critical_point: Option<f64>,
    pub classification: Classification,
    /// `n_A` just above minus just below the critical point.
    pub jump: Option<f64>,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub backend: String,
    pub warnings: Vec<String>,
}

impl SweepResult {
    fn push(&mut self, p: SweepPoint) {
        if !p.converged {
            self.warnings.push(format!("steady state not reached at P_A = {}; using the final state", p.p_a));
        }
        let at = self.points.partition_point(|q| q.p_a < p.p_a);
        self.points.insert(at, p);
    }

    fn point(&self, p_a: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|q| q.p_a == p_a)
    }
}

/// Steady state of one scenario from its own initial condition.
pub fn steady_point(scenario: &ScenarioConfig, settings: &MeanFieldSettings) -> Result<(Vec<f64>, bool)> {
    scenario.validate()?;
    match settings.backend {
        Backend::Full => {
            let sys = build_system(scenario.m, &scenario.committed, settings.variant)?;
            let (dv, out) = sys.steady_state(&scenario.initial_density()?, settings.eps, settings.t_max, settings.tol)?;
            Ok((dv.observables().n, out.converged))
        }
        Backend::Reduced => {
            let part = OpinionClassPartition::from_scenario(scenario)?;
            let sys = reduce_system(&part, settings.variant)?;
            let out = sys.steady_state(&sys.initial_state(), settings.eps, settings.t_max, settings.tol)?;
            Ok((sys.observables(&out.state).n, out.converged))
        }
        Backend::Recursive => {
            if settings.variant != RuleVariant::ListenerOnly {
                return Err(Error::contract("the recursive backend models the listener-only rule"));
            }
            let (eng, st) = RecursiveEngine::from_scenario(scenario)?;
            let (st, converged) = eng.steady_state(st, settings.recursive_eps, settings.recursive_max_steps)?;
            Ok((eng.observables(&st).n, converged))
        }
    }
}

fn backend_name(settings: &MeanFieldSettings) -> String {
    format!("{:?}/{:?}", settings.backend, settings.variant).to_lowercase()
}

/// Bisects on "`n_A` strictly largest at steady state" to within `tol`.
///
/// The critical point is the midpoint of the final bracket. A jump in `n_A`
/// across that bracket larger than `delta_jump` is classed as discontinuous.
pub fn find_critical_meanfield(
    family: &ScenarioFamily,
    bracket: Option<(f64, f64)>,
    tol: f64,
    settings: &MeanFieldSettings,
) -> Result<SweepResult> {
    let (mut lo, mut hi) = bracket.unwrap_or_else(|| family.default_bracket());
    if !(tol > 0.0) || !(lo < hi) {
        return Err(Error::contract(format!("bad bracket [{lo}, {hi}] or tol {tol}")));
    }
    let mut res = SweepResult {
        param: "P_A".into(),
        observable: "n_A".into(),
        points: Vec::new(),
        critical_point: None,
        classification: Classification::NoTransition,
        jump: None,
        bracket: (lo, hi),
        tol,
        backend: backend_name(settings),
        warnings: Vec::new(),
    };
    let eval = |p_a: f64| -> Result<SweepPoint> {
        let (n, converged) = steady_point(&family.at(p_a)?, settings)?;
        Ok(SweepPoint { p_a, n, r: None, converged })
    };
    let low = eval(lo)?;
    let high = eval(hi)?;
    let (low_dom, high_dom) = (low.a_dominant(), high.a_dominant());
    res.push(low);
    res.push(high);
    if low_dom || !high_dom {
        res.warnings.push(format!(
            "bracket does not straddle the transition (A dominant at low end: {low_dom}, at high end: {high_dom})"
        ));
        return Ok(res);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let p = eval(mid)?;
        if p.a_dominant() {
            hi = mid;
        } else {
            lo = mid;
        }
        res.push(p);
    }
    let jump = res.point(hi).expect("evaluated").n[0] - res.point(lo).expect("evaluated").n[0];
    res.critical_point = Some(0.5 * (lo + hi));
    res.jump = Some(jump);
    res.classification = if jump.abs() > settings.delta_jump {
        Classification::Discontinuous
    } else {
        Classification::Continuous
    };
    Ok(res)
}

/// One point of a critical-point curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: String,
    pub value: f64,
    pub critical_point: Option<f64>,
    pub classification: Classification,
    pub jump: Option<f64>,
    /// Which opinion led just below the critical point.
    pub runner_up: Option<usize>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

/// Runs [`find_critical_meanfield`] once per parameter value. Failures are
/// recorded on their point and never stop the curve.
pub fn curve_pc_vs<F>(
    param: &str,
    values: &[f64],
    family_at: F,
    tol: f64,
    settings: &MeanFieldSettings,
) -> Vec<CurvePoint>
where
    F: Fn(f64) -> Result<ScenarioFamily> + Sync,
{
    let one = |&value: &f64| -> CurvePoint {
        let out = family_at(value).and_then(|fam| find_critical_meanfield(&fam, None, tol, settings));
        match out {
            Ok(r) => {
                let runner_up = r.critical_point.and_then(|c| {
                    r.points.iter().rev().find(|p| p.p_a < c).map(|p| argmax(&p.n))
                });
                CurvePoint {
                    param: param.into(),
                    value,
                    critical_point: r.critical_point,
                    classification: r.classification,
                    jump: r.jump,
                    runner_up,
                    error: None,
                    warnings: r.warnings,
                }
            }
            Err(e) => CurvePoint {
                param: param.into(),
                value,
                critical_point: None,
                classification: Classification::NoTransition,
                jump: None,
                runner_up: None,
                error: Some(e.to_string()),
                warnings: Vec::new(),
            },
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        values.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        values.iter().map(one).collect()
    }
}

/// `P_B` where the two-opinion transition stops being discontinuous.
///
/// Bisects `P_B` in `bracket` until it is narrower than `tol_pb`; returns
/// `None` if the classification does not change across the bracket.
pub fn tricritical_point(
    bracket: (f64, f64),
    tol_pb: f64,
    tol: f64,
    settings: &MeanFieldSettings,
) -> Result<Option<f64>> {
    let classify = |p_b: f64| -> Result<Classification> {
        Ok(find_critical_meanfield(&ScenarioFamily::TwoOpinion { p_b }, None, tol, settings)?.classification)
    };
    let (mut lo, mut hi) = bracket;
    if classify(lo)? != Classification::Discontinuous || classify(hi)? != Classification::Continuous {
        return Ok(None);
    }
    while hi - lo > tol_pb {
        let mid = 0.5 * (lo + hi);
        if classify(mid)? == Classification::Discontinuous {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Ascending grid `start, start + step, ..` up to and including `end`.
pub fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

/// Smallest grid `P_A` at which more than half the realizations end with `A` on top.
///
/// With `stop_early` the scan ends at the first such value, which does not
/// change the answer.
pub fn find_critical_abm(
    family: &ScenarioFamily,
    network: &NetworkSpec,
    p_a_grid: &[f64],
    opts: &EnsembleOptions,
    variant: RuleVariant,
    stop_early: bool,
) -> Result<SweepResult> {
    if p_a_grid.is_empty() || p_a_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::contract("P_A grid must be non-empty and ascending"));
    }
    let mut res = SweepResult {
        param: "P_A".into(),
        observable: "R_A".into(),
        points: Vec::new(),
        critical_point: None,
        classification: Classification::NoTransition,
        jump: None,
        bracket: (p_a_grid[0], *p_a_grid.last().expect("non-empty")),
        tol: 0.0,
        backend: format!("abm/{}/L{}/T{}", network.label(), opts.realizations, opts.sweeps),
        warnings: Vec::new(),
    };
    for &p_a in p_a_grid {
        let st = ensemble(network, &family.at(p_a)?, variant, opts)?;
        let over = st.r[0] > 0.5;
        res.push(SweepPoint { p_a, n: st.mean_n, r: Some(st.r), converged: true });
        if over && res.critical_point.is_none() {
            res.critical_point = Some(p_a);
            let below = res.points.iter().rev().find(|p| p.p_a < p_a).map(|p| p.n[0]);
            let here = res.points.iter().find(|p| p.p_a == p_a).expect("just pushed").n[0];
            res.jump = below.map(|b| here - b);
            res.classification = match res.jump {
                Some(j) if j.abs() <= DEFAULT_DELTA_JUMP => Classification::Continuous,
                _ => Classification::Discontinuous,
            };
            if stop_early {
                break;
            }
        }
    }
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub m: usize,
    pub avg_degree: f64,
    pub critical: Option<f64>,
}

/// ABM critical points over `ms` x `networks` for the symmetric network
/// scenario with fixed total minority `p_tilde`.
pub fn heatmap(
    ms: &[usize],
    networks: &[NetworkSpec],
    p_tilde: f64,
    step: f64,
    p_a_max: f64,
    opts: &EnsembleOptions,
) -> Result<Vec<HeatCell>> {
    let mut cells = Vec::with_capacity(ms.len() * networks.len());
    for &m in ms {
        if m < 2 {
            return Err(Error::infeasible("network scenario needs m >= 2"));
        }
        let p0 = p_tilde / (m - 1) as f64;
        let family = ScenarioFamily::NetworkSym { m, p0 };
        for net in networks {
            let res = find_critical_abm(&family, net, &grid(p0, p_a_max, step), opts, RuleVariant::Original, true)?;
            cells.push(HeatCell { m, avg_degree: net.avg_degree, critical: res.critical_point });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub seed: u64,
    pub minority: Vec<f64>,
    pub critical_point: Option<f64>,
    pub classification: Classification,
    /// Inside the regime the bound applies to: discontinuous, `B` leading below.
    pub kept: bool,
    pub within_bounds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub m: usize,
    pub p_tilde: f64,
    pub pc_s1: f64,
    pub pc_s2: f64,
    pub samples: Vec<BoundSample>,
    pub kept: usize,
    pub violations: usize,
    pub warnings: Vec<String>,
}

/// Checks `P_A^(c2) <= P_A^(c0) <= P_A^(c1)` for random S0 allocations.
///
/// Minority fractions are drawn once per sample and held fixed while `P_A`
/// is bisected. Only samples whose transition is discontinuous out of a
/// `B`-led state are counted (the decreasing branch); comparisons allow one
/// bisection `tol` of slack. Draws stop after `trials` kept samples or
/// `S0_ATTEMPTS_PER_TRIAL * trials` attempts.
pub fn bound_check_s0(
    m: usize,
    p_tilde: f64,
    trials: usize,
    sigma: f64,
    seed: u64,
    tol: f64,
    settings: &MeanFieldSettings,
) -> Result<BoundReport> {
    let pc_of = |fam: &ScenarioFamily| -> Result<SweepResult> { find_critical_meanfield(fam, None, tol, settings) };
    let mut warnings = Vec::new();
    // A scenario whose feasible range starts with A already on top (S2 once
    // P_tilde / p_1 forces P_A past the minority) has its threshold at that edge.
    let mut bound = |name: &str, fam: ScenarioFamily| -> Result<f64> {
        let r = pc_of(&fam)?;
        if let Some(c) = r.critical_point {
            return Ok(c);
        }
        if r.points.first().is_some_and(SweepPoint::a_dominant) {
            warnings.push(format!("{name}: A already dominant at the feasibility edge P_A = {}", r.bracket.0));
            return Ok(r.bracket.0);
        }
        Err(Error::infeasible(format!("{name} has no transition at m = {m}, P_tilde = {p_tilde}")))
    };
    let pc1 = bound("S1", ScenarioFamily::S1 { m, p_tilde })?;
    let pc2 = bound("S2", ScenarioFamily::S2 { m, p_tilde })?;
    let mut report =
        BoundReport { m, p_tilde, pc_s1: pc1, pc_s2: pc2, samples: Vec::new(), kept: 0, violations: 0, warnings };
    let mut k = 0u64;
    while report.kept < trials && (k as usize) < S0_ATTEMPTS_PER_TRIAL * trials.max(1) {
        let draw_seed = crate::abm::derive_seed(seed, k, 0);
        k += 1;
        // Only the truncation to [0, P_tilde] limits the draw; P_A is swept
        // from max(P_i) up, and the branch filter below drops draws whose
        // threshold is set by the strongest minority opinion.
        let draw = make_s0(m, 1.0 - p_tilde - EDGE, p_tilde, sigma, draw_seed)?;
        let minority = draw.committed[2..].to_vec();
        let res = pc_of(&ScenarioFamily::Minority { minority: minority.clone() })?;
        let leader_below = res
            .critical_point
            .and_then(|c| res.points.iter().rev().find(|p| p.p_a < c))
            .map(|p| argmax(&p.n));
        let kept = res.classification == Classification::Discontinuous && leader_below == Some(1);
        let within = res.critical_point.is_some_and(|c| c >= pc2 - tol && c <= pc1 + tol);
        if kept {
            report.kept += 1;
            if !within {
                report.violations += 1;
            }
        }
        report.samples.push(BoundSample {
            seed: draw_seed,
            minority,
            critical_point: res.critical_point,
            classification: res.classification,
            kept,
            within_bounds: within,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_opinion_threshold() {
        let r = find_critical_meanfield(&ScenarioFamily::TwoOpinion { p_b: 0.0 }, None, 1e-3, &MeanFieldSettings::default())
            .unwrap();
        let pc = r.critical_point.unwrap();
        assert!((pc - 0.098).abs() < 0.002, "{pc}");
        assert_eq!(r.classification, Classification::Discontinuous);
        assert!(r.points.windows(2).all(|w| w[0].p_a < w[1].p_a));
    }

    #[test]
    fn bracket_without_transition() {
        let r = find_critical_meanfield(
            &ScenarioFamily::TwoOpinion { p_b: 0.0 },
            Some((0.2, 0.3)),
            1e-3,
            &MeanFieldSettings::default(),
        )
        .unwrap();
        assert_eq!(r.classification, Classification::NoTransition);
        assert!(r.critical_point.is_none());
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn three_opinion_without_c_matches_two() {
        let s = MeanFieldSettings::default();
        let a = find_critical_meanfield(&ScenarioFamily::ThreeOpinion { p_c: 0.0 }, None, 1e-3, &s).unwrap();
        let b = find_critical_meanfield(&ScenarioFamily::TwoOpinion { p_b: 0.0 }, None, 1e-3, &s).unwrap();
        assert!((a.critical_point.unwrap() - b.critical_point.unwrap()).abs() < 1e-3);
    }

    #[test]
    fn recursive_backend_needs_listener_only() {
        let s = MeanFieldSettings { backend: Backend::Recursive, ..Default::default() };
        let sc = ScenarioConfig::two_opinion(0.1, 0.0).unwrap();
        assert!(steady_point(&sc, &s).is_err());
    }

    #[test]
    fn curve_keeps_going_past_errors() {
        let pts = curve_pc_vs(
            "P_B",
            &[0.0, 2.0],
            |p_b| Ok(ScenarioFamily::TwoOpinion { p_b }),
            2e-3,
            &MeanFieldSettings::default(),
        );
        assert_eq!(pts.len(), 2);
        assert!(pts[0].critical_point.is_some());
        assert_eq!(pts[0].runner_up, Some(1));
        assert!(pts[1].error.is_some() || pts[1].classification == Classification::NoTransition);
    }

    #[test]
    fn grid_includes_end() {
        assert_eq!(grid(0.0, 0.01, 2.5e-3).len(), 5);
        assert_eq!(grid(0.02, 0.04, 0.01), vec![0.02, 0.03, 0.04]);
    }

    #[test]
    fn brackets_are_feasible() {
        for fam in [
            ScenarioFamily::TwoOpinion { p_b: 0.1 },
            ScenarioFamily::ThreeOpinion { p_c: 0.1 },
            ScenarioFamily::S1 { m: 6, p_tilde: 0.12 },
            ScenarioFamily::S2 { m: 6, p_tilde: 0.12 },
            ScenarioFamily::Minority { minority: vec![0.01, 0.03] },
            ScenarioFamily::NetworkSym { m: 5, p0: 0.015 },
        ] {
            let (lo, hi) = fam.default_bracket();
            fam.at(lo).unwrap();
            fam.at(hi).unwrap();
        }
    }
}
