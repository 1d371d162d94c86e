//! Mean-field equations over the full `2^m - 1` opinion-state space.
//!
//! Per unit time one ordered (speaker, listener) pair is drawn with
//! probability equal to the product of the two parties' densities. Writing
//! `Q_o` for the probability that a random speaker utters `o` and `H_o` for
//! the density of agents (committed or not) whose state contains `o`, an
//! uncommitted state `s` evolves by
//!
//! * listener side: hears `o` at rate `x_s Q_o`, collapsing to `{o}` when
//!   `o ∈ s` and growing to `s ∪ {o}` otherwise;
//! * speaker side (original rule only): utters `o ∈ s` at rate `x_s / |s|`
//!   and collapses to `{o}` with probability `H_o`.
//!
//! This factored form costs `O(m 2^m)` per evaluation and equals the sum over
//! all [`RateTerm`](crate::opinion::RateTerm)s, which [`TermSystem`] assembles
//! literally for cross-checking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeSystem, SteadyOutcome, Tolerances, Trajectory};
use crate::opinion::{
    check_m, interaction_rate_terms_capped, state_count, state_index, RateTerm, RuleVariant,
    DEFAULT_M_MAX,
};

/// Tolerance on `Σx + ΣP = 1`.
pub const MASS_TOL: f64 = 1e-12;

/// Uncommitted densities over all opinion states plus committed fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityVector {
    pub x: Vec<f64>,
    #[serde(rename = "P")]
    pub committed: Vec<f64>,
}

impl DensityVector {
    pub fn new(x: Vec<f64>, committed: Vec<f64>) -> Result<Self> {
        let dv = DensityVector { x, committed };
        dv.validate(MASS_TOL)?;
        Ok(dv)
    }

    /// All uncommitted mass on single opinions, `singles[i]` on `{i}`.
    pub fn from_singles(singles: &[f64], committed: &[f64]) -> Result<Self> {
        if singles.len() != committed.len() {
            return Err(Error::contract("singles and committed lengths differ"));
        }
        let mut x = vec![0.0; state_count(committed.len())];
        for (i, &v) in singles.iter().enumerate() {
            x[state_index(1 << i)] = v;
        }
        Self::new(x, committed.to_vec())
    }

    pub fn m(&self) -> usize {
        self.committed.len()
    }

    pub fn mass(&self) -> f64 {
        self.x.iter().sum::<f64>() + self.committed.iter().sum::<f64>()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = self.committed.len();
        if m == 0 || self.x.len() != state_count(m) {
            return Err(Error::contract(format!(
                "state length {} does not match m = {m}",
                self.x.len()
            )));
        }
        if let Some(v) = self.x.iter().chain(&self.committed).find(|v| !(**v >= 0.0)) {
            return Err(Error::contract(format!("negative or NaN density {v}")));
        }
        let defect = (self.mass() - 1.0).abs();
        if defect > tol {
            return Err(Error::contract(format!("densities sum to 1 + {defect:e}")));
        }
        Ok(())
    }

    pub fn observables(&self) -> Observables {
        observables(self)
    }
}

/// Fraction of agents purely supporting each single opinion (committed included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub n: Vec<f64>,
}

impl Observables {
    /// Index of the largest `n_i`, lowest index on ties.
    pub fn dominant(&self) -> usize {
        argmax(&self.n)
    }

    /// True when opinion `i` strictly exceeds every other `n_j` by more than `margin`.
    pub fn strictly_dominant(&self, i: usize, margin: f64) -> bool {
        self.n
            .iter()
            .enumerate()
            .all(|(j, &v)| j == i || self.n[i] > v + margin)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `n_i = x_{i} + P_i`; mixed states contribute to no `n_i`.
pub fn observables(state: &DensityVector) -> Observables {
    Observables {
        n: state
            .committed
            .iter()
            .enumerate()
            .map(|(i, p)| state.x[state_index(1 << i)] + p)
            .collect(),
    }
}

/// Right-hand side of the full mean-field system.
#[derive(Debug, Clone)]
pub struct MeanFieldSystem {
    m: usize,
    committed: Vec<f64>,
    variant: RuleVariant,
}

/// Builds the mean-field system for `m` opinions with committed fractions `committed`.
pub fn build_system(m: usize, committed: &[f64], variant: RuleVariant) -> Result<MeanFieldSystem> {
    build_system_capped(m, committed, variant, DEFAULT_M_MAX)
}

pub fn build_system_capped(
    m: usize,
    committed: &[f64],
    variant: RuleVariant,
    m_max: usize,
) -> Result<MeanFieldSystem> {
    check_m(m, m_max)?;
    check_committed(m, committed)?;
    Ok(MeanFieldSystem { m, committed: committed.to_vec(), variant })
}

pub(crate) fn check_committed(m: usize, committed: &[f64]) -> Result<()> {
    if committed.len() != m {
        return Err(Error::contract(format!(
            "{} committed fractions given for m = {m}",
            committed.len()
        )));
    }
    if committed.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::contract("committed fractions must be non-negative"));
    }
    let total: f64 = committed.iter().sum();
    if total >= 1.0 {
        return Err(Error::infeasible(format!("committed fractions sum to {total} >= 1")));
    }
    Ok(())
}

impl MeanFieldSystem {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn committed(&self) -> &[f64] {
        &self.committed
    }

    pub fn variant(&self) -> RuleVariant {
        self.variant
    }

    fn check_state(&self, init: &DensityVector) -> Result<()> {
        if init.committed != self.committed {
            return Err(Error::contract("state committed fractions differ from the system's"));
        }
        init.validate(MASS_TOL)
    }

    /// `dx/dt` at `state`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; x.len()];
        self.rhs(x, &mut dx);
        dx
    }

    pub fn integrate(&self, init: &DensityVector, t_end: f64, tol: Tolerances) -> Result<Trajectory> {
        self.check_state(init)?;
        ode::integrate(self, &init.x, t_end, tol)
    }

    pub fn integrate_at(&self, init: &DensityVector, times: &[f64], tol: Tolerances) -> Result<Trajectory> {
        self.check_state(init)?;
        ode::integrate_at(self, &init.x, times, tol)
    }

    /// Integrates until `max|dx/dt| < eps` or `t_max`; non-convergence is a flag.
    pub fn steady_state(
        &self,
        init: &DensityVector,
        eps: f64,
        t_max: f64,
        tol: Tolerances,
    ) -> Result<(DensityVector, SteadyOutcome)> {
        self.check_state(init)?;
        let out = ode::steady_state(self, &init.x, eps, t_max, tol)?;
        let dv = DensityVector { x: out.state.clone(), committed: self.committed.clone() };
        Ok((dv, out))
    }
}

impl OdeSystem for MeanFieldSystem {
    fn dim(&self) -> usize {
        state_count(self.m)
    }

    fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        let m = self.m;
        let mut q = self.committed.clone();
        let mut h = self.committed.clone();
        for (idx, &xs) in x.iter().enumerate() {
            if xs == 0.0 {
                continue;
            }
            let mask = idx as u32 + 1;
            let share = xs / mask.count_ones() as f64;
            let mut rest = mask;
            while rest != 0 {
                let o = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                q[o] += share;
                h[o] += xs;
            }
        }
        dx.fill(0.0);
        let speaker_side = self.variant.updates_speaker();
        for (idx, &xs) in x.iter().enumerate() {
            if xs == 0.0 {
                continue;
            }
            let mask = idx as u32 + 1;
            let inv_len = 1.0 / mask.count_ones() as f64;
            for o in 0..m {
                let bit = 1u32 << o;
                if mask & bit != 0 {
                    if mask != bit {
                        let mut r = xs * q[o];
                        if speaker_side {
                            r += xs * inv_len * h[o];
                        }
                        dx[idx] -= r;
                        dx[state_index(bit)] += r;
                    }
                } else {
                    let r = xs * q[o];
                    dx[idx] -= r;
                    dx[state_index(mask | bit)] += r;
                }
            }
        }
    }
}

/// The same system assembled literally from enumerated rate terms.
///
/// Quadratic in `2^m`; intended for checking [`MeanFieldSystem`] at small `m`.
#[derive(Debug, Clone)]
pub struct TermSystem {
    m: usize,
    committed: Vec<f64>,
    terms: Vec<RateTerm>,
}

impl TermSystem {
    pub fn new(m: usize, committed: &[f64], variant: RuleVariant) -> Result<Self> {
        check_committed(m, committed)?;
        let terms = interaction_rate_terms_capped(m, variant, 10)?
            .filter(|t| !t.delta.is_empty())
            .collect();
        Ok(TermSystem { m, committed: committed.to_vec(), terms })
    }

    pub fn terms(&self) -> &[RateTerm] {
        &self.terms
    }
}

impl OdeSystem for TermSystem {
    fn dim(&self) -> usize {
        state_count(self.m)
    }

    fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        dx.fill(0.0);
        for t in &self.terms {
            let rate = t.probability
                * t.speaker_density(x, &self.committed)
                * t.listener_density(x, &self.committed);
            for &(k, d) in &t.delta {
                dx[k] += rate * d as f64;
            }
        }
    }
}

/// Hand-written two-opinion equations; returns `(dx_A/dt, dx_B/dt)`.
///
/// `dx_AB/dt = -dx_A/dt - dx_B/dt`.
pub fn two_opinion_rhs(state: (f64, f64, f64), p_a: f64, p_b: f64) -> Result<(f64, f64)> {
    let (xa, xb, xab) = state;
    if [xa, xb, xab, p_a, p_b].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::contract("densities must be non-negative"));
    }
    let total = xa + xb + xab + p_a + p_b;
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("densities sum to {total}, expected 1")));
    }
    let dxa = -xa * xb + xab * xab + xab * xa + 1.5 * p_a * xab - p_b * xa;
    let dxb = -xa * xb + xab * xab + xab * xb + 1.5 * p_b * xab - p_a * xb;
    Ok((dxa, dxb))
}
