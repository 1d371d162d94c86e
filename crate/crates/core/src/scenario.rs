//! Committed-fraction allocations and initial conditions.
//!
//! Opinion order is fixed: index 0 is `A` (largest committed group), index 1
//! is `B`, and the remaining `m - 2` opinions form the minority group.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::DensityVector;

/// Gap between `P_A` and the largest minority committed fraction in S2.
pub const S2_GAP: f64 = 1e-3;
/// Nominal spread of the S0 truncated Gaussian.
pub const S0_DEFAULT_SIGMA: f64 = 0.02;
const S0_MAX_RESAMPLES: usize = 1000;
const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioLabel {
    Custom,
    S0,
    S1,
    S2,
    NetworkSym,
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioLabel::Custom => "custom",
            ScenarioLabel::S0 => "s0",
            ScenarioLabel::S1 => "s1",
            ScenarioLabel::S2 => "s2",
            ScenarioLabel::NetworkSym => "network_sym",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m: usize,
    /// Committed fraction per opinion.
    #[serde(rename = "P")]
    pub committed: Vec<f64>,
    /// Initial uncommitted density on each single opinion.
    pub x0: Vec<f64>,
    pub label: ScenarioLabel,
}

impl ScenarioConfig {
    pub fn new(committed: Vec<f64>, x0: Vec<f64>, label: ScenarioLabel) -> Result<Self> {
        let cfg = ScenarioConfig { m: committed.len(), committed, x0, label };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every uncommitted agent starts on `B`.
    pub fn all_on_b(committed: Vec<f64>) -> Result<Self> {
        if committed.len() < 2 {
            return Err(Error::contract("need opinions A and B"));
        }
        let mut x0 = vec![0.0; committed.len()];
        x0[1] = 1.0 - committed.iter().sum::<f64>();
        if x0[1] < 0.0 {
            return Err(Error::infeasible("committed fractions exceed 1"));
        }
        Self::new(committed, x0, ScenarioLabel::Custom)
    }

    pub fn two_opinion(p_a: f64, p_b: f64) -> Result<Self> {
        Self::all_on_b(vec![p_a, p_b])
    }

    /// Opinions `A`, `B`, `C` with `B` uncommitted.
    pub fn three_opinion(p_a: f64, p_c: f64) -> Result<Self> {
        Self::all_on_b(vec![p_a, 0.0, p_c])
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.committed.len() != self.m || self.x0.len() != self.m {
            return Err(Error::contract(format!(
                "scenario with m = {} has {} committed and {} initial entries",
                self.m,
                self.committed.len(),
                self.x0.len()
            )));
        }
        if let Some(v) = self.committed.iter().chain(&self.x0).find(|v| !(**v >= 0.0)) {
            return Err(Error::infeasible(format!("negative fraction {v}")));
        }
        let total = self.committed_total() + self.x0.iter().sum::<f64>();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::infeasible(format!("fractions sum to {total}, expected 1")));
        }
        if self.committed_total() >= 1.0 {
            return Err(Error::infeasible("no uncommitted agents left"));
        }
        Ok(())
    }

    pub fn committed_total(&self) -> f64 {
        self.committed.iter().sum()
    }

    pub fn initial_density(&self) -> Result<DensityVector> {
        DensityVector::from_singles(&self.x0, &self.committed)
    }

    /// Integer agent counts for a population of `n`, by largest remainder.
    pub fn agent_counts(&self, n: usize) -> AgentCounts {
        let quotas: Vec<f64> = self.committed.iter().chain(&self.x0).map(|f| f * n as f64).collect();
        let counts = apportion(&quotas, n);
        let (c, u) = counts.split_at(self.m);
        AgentCounts { committed: c.to_vec(), uncommitted: u.to_vec() }
    }

    /// Sample standard deviation of the committed fractions over the minority group.
    pub fn minority_sd(&self) -> f64 {
        let g = &self.committed[2.min(self.m)..];
        if g.is_empty() {
            return 0.0;
        }
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        (g.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / g.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentCounts {
    pub committed: Vec<usize>,
    pub uncommitted: Vec<usize>,
}

impl AgentCounts {
    pub fn total(&self) -> usize {
        self.committed.iter().sum::<usize>() + self.uncommitted.iter().sum::<usize>()
    }
}

/// Largest-remainder apportionment of `total` units to `quotas`.
///
/// Quotas are rounded to 1e-9 first so that float noise such as
/// `0.03 * 1000 = 29.999999999999996` does not create a spurious remainder.
/// Ties go to the lower index.
pub fn apportion(quotas: &[f64], total: usize) -> Vec<usize> {
    let q: Vec<f64> = quotas.iter().map(|v| (v * 1e9).round() / 1e9).collect();
    let mut counts: Vec<usize> = q.iter().map(|v| v.floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned < total {
        let mut order: Vec<usize> = (0..q.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = q[a] - q[a].floor();
            let rb = q[b] - q[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle().take(total - assigned) {
            counts[i] += 1;
        }
    }
    counts
}

fn check_pair(p_a: f64, p_tilde: f64) -> Result<()> {
    if !(p_a > 0.0) || !(p_tilde >= 0.0) {
        return Err(Error::infeasible(format!(
            "need P_A > 0 and P_tilde >= 0 (got {p_a}, {p_tilde})"
        )));
    }
    if p_a + p_tilde >= 1.0 {
        return Err(Error::infeasible(format!("P_A + P_tilde = {} >= 1", p_a + p_tilde)));
    }
    Ok(())
}

/// `A` at `p_a`, `B` uncommitted-only, `minority` committed on `C1..`, and
/// every uncommitted agent initially on `B`.
pub fn with_minority(p_a: f64, minority: &[f64], label: ScenarioLabel) -> Result<ScenarioConfig> {
    if !(p_a >= 0.0) || minority.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::infeasible("committed fractions must be non-negative"));
    }
    with_b_remainder(minority.len() + 2, p_a, minority.to_vec(), label)
}

fn with_b_remainder(m: usize, p_a: f64, minority: Vec<f64>, label: ScenarioLabel) -> Result<ScenarioConfig> {
    let mut committed = Vec::with_capacity(m);
    committed.push(p_a);
    committed.push(0.0);
    committed.extend(minority);
    let mut x0 = vec![0.0; m];
    x0[1] = 1.0 - committed.iter().sum::<f64>();
    if x0[1] <= 0.0 {
        return Err(Error::infeasible("no uncommitted mass left for B"));
    }
    ScenarioConfig::new(committed, x0, label)
}

/// Symmetric minority: `m - 2` opinions each at `P_tilde / (m - 2)`.
pub fn make_s1(m: usize, p_a: f64, p_tilde: f64) -> Result<ScenarioConfig> {
    if m < 3 {
        return Err(Error::infeasible("S1 needs m >= 3"));
    }
    check_pair(p_a, p_tilde)?;
    let p0 = p_tilde / (m - 2) as f64;
    with_b_remainder(m, p_a, vec![p0; m - 2], ScenarioLabel::S1)
}

/// Polarized minority: as many opinions as possible at `P_A - 1e-3`,
/// the remainder on one more opinion, the rest uncommitted.
pub fn make_s2(m: usize, p_a: f64, p_tilde: f64) -> Result<ScenarioConfig> {
    if m < 3 {
        return Err(Error::infeasible("S2 needs m >= 3"));
    }
    check_pair(p_a, p_tilde)?;
    let p1 = p_a - S2_GAP;
    if p1 <= 0.0 {
        return Err(Error::infeasible(format!("S2 needs P_A > {S2_GAP}")));
    }
    let n1 = (p_tilde / p1 + 1e-12).floor() as usize;
    if n1 + 3 > m {
        return Err(Error::infeasible(format!(
            "S2 constraint m - n1 - 3 >= 0 violated: m = {m}, n1 = floor(P_tilde/p1) = {n1}"
        )));
    }
    let mut p2 = p_tilde - n1 as f64 * p1;
    if p2.abs() < 1e-15 {
        p2 = 0.0;
    }
    let mut minority = vec![p1; n1];
    minority.push(p2);
    minority.resize(m - 2, 0.0);
    with_b_remainder(m, p_a, minority, ScenarioLabel::S2)
}

/// Random minority: truncated Gaussian draws on `[0, P_tilde]` rescaled to sum to `P_tilde`.
///
/// The whole vector is redrawn while any entry is `>= P_A`.
pub fn make_s0(m: usize, p_a: f64, p_tilde: f64, sigma: f64, seed: u64) -> Result<ScenarioConfig> {
    if m < 3 {
        return Err(Error::infeasible("S0 needs m >= 3"));
    }
    check_pair(p_a, p_tilde)?;
    if !(sigma > 0.0) {
        return Err(Error::contract("sigma must be positive"));
    }
    let k = m - 2;
    let p0 = p_tilde / k as f64;
    if p_tilde == 0.0 {
        return with_b_remainder(m, p_a, vec![0.0; k], ScenarioLabel::S0);
    }
    let normal = Normal::new(p0, sigma).map_err(|e| Error::contract(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..S0_MAX_RESAMPLES {
        let mut draws: Vec<f64> = (0..k)
            .map(|_| loop {
                let v = normal.sample(&mut rng);
                if (0.0..=p_tilde).contains(&v) {
                    break v;
                }
            })
            .collect();
        let sum: f64 = draws.iter().sum();
        if sum <= 0.0 {
            continue;
        }
        let scale = p_tilde / sum;
        draws.iter_mut().for_each(|v| *v *= scale);
        // Put rounding residue on the largest entry so the sum is exact.
        let residue = p_tilde - draws.iter().sum::<f64>();
        let imax = crate::meanfield::argmax(&draws);
        draws[imax] += residue;
        if draws.iter().all(|&v| v < p_a && v >= 0.0) {
            return with_b_remainder(m, p_a, draws, ScenarioLabel::S0);
        }
    }
    Err(Error::infeasible(format!(
        "no S0 draw kept every minority fraction below P_A = {p_a} after {S0_MAX_RESAMPLES} attempts"
    )))
}

/// Network scenario: `A` at `P_A`, the other `m - 1` opinions at `p0` each,
/// uncommitted agents split equally over the non-`A` opinions.
pub fn make_network_sym(m: usize, p_a: f64, p0: f64) -> Result<ScenarioConfig> {
    if m < 2 {
        return Err(Error::infeasible("network scenario needs m >= 2"));
    }
    if !(p_a >= 0.0 && p0 >= 0.0) {
        return Err(Error::infeasible("committed fractions must be non-negative"));
    }
    let others = (m - 1) as f64;
    let rest = 1.0 - p_a - others * p0;
    if rest <= 0.0 {
        return Err(Error::infeasible(format!("P_A + (m-1) p0 = {} >= 1", 1.0 - rest)));
    }
    let mut committed = vec![p0; m];
    committed[0] = p_a;
    let mut x0 = vec![rest / others; m];
    x0[0] = 0.0;
    let fix = 1.0 - committed.iter().sum::<f64>() - x0.iter().sum::<f64>();
    x0[1] += fix;
    ScenarioConfig::new(committed, x0, ScenarioLabel::NetworkSym)
}
