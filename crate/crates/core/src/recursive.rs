//! Discrete-time recursion for the listener-only game on a complete graph.
//!
//! Every uncommitted agent listens once per step. A listener hearing an
//! opinion it holds collapses to it, otherwise it adds it, so a mixed state of
//! size `n + 1` at step `t` was a singleton at `t - n` and grew by one opinion
//! on each of the following `n` steps. Its density is therefore a sum over
//! ordered tuples of distinct opinions:
//!
//! ```text
//! x_{j j1 .. jn}(t) = Σ_orderings x_j(t-n) Q_{j1}(t-n) Q_{j2}(t-n+1) ... Q_{jn}(t-1)
//! ```
//!
//! The engine keeps only single-opinion densities, per-opinion aggregates by
//! mixed-state length, and the last `m - 1` history arrays of `x` and `Q`:
//! `Θ(m^2)` numbers. The ordered sums are evaluated by dynamic programming
//! over how many members of each class of interchangeable opinions have been
//! used; with all-distinct opinions that is the usual subset DP, with
//! symmetric scenarios it is polynomial in `m`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::meanfield::{check_committed, Observables};
use crate::opinion::{state_count, state_index, DEFAULT_M_MAX};
use crate::scenario::ScenarioConfig;

pub const DEFAULT_RECURSIVE_EPS: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveState {
    pub t: u64,
    pub x_single: Vec<f64>,
    /// `x_len[i][n - 1]`: total density of mixed states of size `n + 1` containing `i`.
    pub x_len: Vec<Vec<f64>>,
    /// `Q` of the most recent steps, newest first.
    q_hist: VecDeque<Vec<f64>>,
    /// Single-opinion densities of the most recent steps, newest first.
    x_hist: VecDeque<Vec<f64>>,
}

impl RecursiveState {
    pub fn m(&self) -> usize {
        self.x_single.len()
    }

    /// Aggregate density of all mixed states containing `i`.
    pub fn x_plus(&self, i: usize) -> f64 {
        self.x_len[i].iter().sum()
    }

    /// Total uncommitted density; each mixed state of size `n + 1` is counted `n + 1` times in `x_len`.
    pub fn uncommitted_mass(&self) -> f64 {
        let mixed: f64 = self
            .x_len
            .iter()
            .map(|row| row.iter().enumerate().map(|(k, v)| v / (k + 2) as f64).sum::<f64>())
            .sum();
        self.x_single.iter().sum::<f64>() + mixed
    }

    /// Count of `f64` values held, history included.
    pub fn stored_values(&self) -> usize {
        self.x_single.len()
            + self.x_len.iter().map(Vec::len).sum::<usize>()
            + self.q_hist.iter().map(Vec::len).sum::<usize>()
            + self.x_hist.iter().map(Vec::len).sum::<usize>()
    }
}

/// Recursion parameters: committed fractions and groups of interchangeable opinions.
#[derive(Debug, Clone)]
pub struct RecursiveEngine {
    committed: Vec<f64>,
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl RecursiveEngine {
    /// Prepares an engine and its `t = 0` state with all uncommitted mass on singles.
    ///
    /// Opinions with equal committed fraction and equal initial density
    /// evolve identically and are grouped for the ordered-sum evaluation.
    pub fn new(committed: &[f64], x0: &[f64]) -> Result<(Self, RecursiveState)> {
        let m = committed.len();
        check_committed(m, committed)?;
        if x0.len() != m || x0.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::contract("initial densities must be m non-negative values"));
        }
        let total = x0.iter().sum::<f64>() + committed.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::contract(format!("initial fractions sum to {total}")));
        }
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut class_of = vec![0; m];
        for o in 0..m {
            match classes
                .iter()
                .position(|c| committed[c[0]] == committed[o] && x0[c[0]] == x0[o])
            {
                Some(c) => {
                    classes[c].push(o);
                    class_of[o] = c;
                }
                None => {
                    class_of[o] = classes.len();
                    classes.push(vec![o]);
                }
            }
        }
        let state = RecursiveState {
            t: 0,
            x_single: x0.to_vec(),
            x_len: vec![vec![0.0; m.saturating_sub(1)]; m],
            q_hist: VecDeque::with_capacity(m),
            x_hist: VecDeque::with_capacity(m),
        };
        Ok((RecursiveEngine { committed: committed.to_vec(), classes, class_of }, state))
    }

    pub fn from_scenario(s: &ScenarioConfig) -> Result<(Self, RecursiveState)> {
        s.validate()?;
        Self::new(&s.committed, &s.x0)
    }

    pub fn m(&self) -> usize {
        self.committed.len()
    }

    pub fn committed(&self) -> &[f64] {
        &self.committed
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Probability that a uniformly drawn speaker utters each opinion.
    pub fn transmission_probabilities(&self, state: &RecursiveState) -> Vec<f64> {
        (0..self.m())
            .map(|i| {
                state.x_single[i]
                    + self.committed[i]
                    + state.x_len[i]
                        .iter()
                        .enumerate()
                        .map(|(k, v)| v / (k + 2) as f64)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn observables(&self, state: &RecursiveState) -> Observables {
        Observables {
            n: state.x_single.iter().zip(&self.committed).map(|(x, p)| x + p).collect(),
        }
    }

    /// Advances one synchronous step.
    pub fn step(&self, state: &mut RecursiveState) {
        let m = self.m();
        // Σ Q = 1 only while mass is conserved, and the map amplifies any
        // drift, so round-off is removed before it compounds.
        let q = normalized(self.transmission_probabilities(state));
        let next_single: Vec<f64> = (0..m)
            .map(|i| (state.x_single[i] + state.x_plus(i)) * q[i])
            .collect();
        let depth = m.saturating_sub(1);
        state.q_hist.push_front(q);
        state.x_hist.push_front(std::mem::replace(&mut state.x_single, next_single));
        state.q_hist.truncate(depth);
        state.x_hist.truncate(depth);

        let full: Vec<usize> = self.classes.iter().map(Vec::len).collect();
        for n in 1..m {
            // States of size n + 1 need singles from n steps back.
            if state.x_hist.len() < n {
                for row in state.x_len.iter_mut() {
                    row[n - 1] = 0.0;
                }
                continue;
            }
            let mut slots: Vec<&[f64]> = Vec::with_capacity(n + 1);
            slots.push(&state.x_hist[n - 1]);
            for k in 1..=n {
                slots.push(&state.q_hist[n - k]);
            }
            let total = self.ordered_sum(&slots, &full);
            let mut per_class = Vec::with_capacity(self.classes.len());
            for c in 0..self.classes.len() {
                let mut avail = full.clone();
                avail[c] -= 1;
                per_class.push((total - self.ordered_sum(&slots, &avail)).max(0.0));
            }
            for i in 0..m {
                state.x_len[i][n - 1] = per_class[self.class_of[i]];
            }
        }
        state.t += 1;
    }

    /// Sum over ordered tuples of distinct opinions, one per slot, of the
    /// product of slot weights; class `c` may contribute at most `avail[c]`
    /// members. Weights are read from each class's first member.
    fn ordered_sum(&self, slots: &[&[f64]], avail: &[usize]) -> f64 {
        let nc = self.classes.len();
        let mut stride = vec![1usize; nc];
        for c in 1..nc {
            stride[c] = stride[c - 1] * (avail[c - 1] + 1);
        }
        let size = stride[nc - 1] * (avail[nc - 1] + 1);
        let mut f = vec![0.0; size];
        let mut g = vec![0.0; size];
        f[0] = 1.0;
        for w in slots {
            g.iter_mut().for_each(|v| *v = 0.0);
            for code in 0..size {
                let val = f[code];
                if val == 0.0 {
                    continue;
                }
                for c in 0..nc {
                    let used = (code / stride[c]) % (avail[c] + 1);
                    if used < avail[c] {
                        let wc = w[self.classes[c][0]];
                        g[code + stride[c]] += val * (avail[c] - used) as f64 * wc;
                    }
                }
            }
            std::mem::swap(&mut f, &mut g);
        }
        f.iter().sum()
    }

    /// Iterates until `max|Δx_single| < eps` or `max_steps`.
    ///
    /// Returns the last state that showed no change, so a fixed point given
    /// as input is returned unchanged at its own `t`.
    pub fn steady_state(&self, state: RecursiveState, eps: f64, max_steps: u64) -> Result<(RecursiveState, bool)> {
        if !(eps > 0.0) {
            return Err(Error::contract("eps must be positive"));
        }
        let mut cur = state;
        let start = cur.t;
        loop {
            let mut next = cur.clone();
            self.step(&mut next);
            let delta = next
                .x_single
                .iter()
                .zip(&cur.x_single)
                .fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));
            if delta < eps {
                return Ok((cur, true));
            }
            if next.t - start >= max_steps {
                return Ok((next, false));
            }
            cur = next;
        }
    }
}

fn normalized(mut q: Vec<f64>) -> Vec<f64> {
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        q.iter_mut().for_each(|v| *v /= total);
    }
    q
}

/// Full-state synchronous map, the reference for the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDiscreteState {
    pub x: Vec<f64>,
    pub committed: Vec<f64>,
}

impl FullDiscreteState {
    pub fn from_singles(singles: &[f64], committed: &[f64]) -> Result<Self> {
        let m = committed.len();
        if m == 0 || m > DEFAULT_M_MAX || singles.len() != m {
            return Err(Error::contract("unsupported m for a full discrete state"));
        }
        let mut x = vec![0.0; state_count(m)];
        for (i, &v) in singles.iter().enumerate() {
            x[state_index(1 << i)] = v;
        }
        Ok(FullDiscreteState { x, committed: committed.to_vec() })
    }

    pub fn m(&self) -> usize {
        self.committed.len()
    }

    pub fn transmission_probabilities(&self) -> Vec<f64> {
        let mut q = self.committed.clone();
        for (idx, &v) in self.x.iter().enumerate() {
            let mask = idx as u32 + 1;
            let share = v / mask.count_ones() as f64;
            for (o, qo) in q.iter_mut().enumerate() {
                if mask & (1 << o) != 0 {
                    *qo += share;
                }
            }
        }
        q
    }

    pub fn singles(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.x[state_index(1 << i)]).collect()
    }

    /// `[i][n - 1]`: density of size-`(n + 1)` states containing `i`.
    pub fn length_aggregates(&self) -> Vec<Vec<f64>> {
        let m = self.m();
        let mut agg = vec![vec![0.0; m.saturating_sub(1)]; m];
        for (idx, &v) in self.x.iter().enumerate() {
            let mask = idx as u32 + 1;
            let len = mask.count_ones() as usize;
            if len < 2 {
                continue;
            }
            for (o, row) in agg.iter_mut().enumerate() {
                if mask & (1 << o) != 0 {
                    row[len - 2] += v;
                }
            }
        }
        agg
    }
}

/// Every uncommitted bucket hears opinion `o` with probability `Q_o` and
/// applies the listener rule.
pub fn oracle_step(state: &FullDiscreteState) -> FullDiscreteState {
    let q = normalized(state.transmission_probabilities());
    let mut next = vec![0.0; state.x.len()];
    for (idx, &v) in state.x.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let mask = idx as u32 + 1;
        for (o, &qo) in q.iter().enumerate() {
            let bit = 1u32 << o;
            let target = if mask & bit != 0 { bit } else { mask | bit };
            next[state_index(target)] += v * qo;
        }
    }
    FullDiscreteState { x: next, committed: state.committed.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monoculture_is_fixed_at_t0() {
        let (eng, st) = RecursiveEngine::new(&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(eng.transmission_probabilities(&st)[1], 1.0);
        let (out, converged) = eng.steady_state(st.clone(), 1e-12, 10).unwrap();
        assert!(converged);
        assert_eq!(out.t, 0);
        assert_eq!(out, st);
    }

    #[test]
    fn committed_monoculture_has_unit_q() {
        let (eng, st) = RecursiveEngine::new(&[0.2, 0.0], &[0.8, 0.0]).unwrap();
        assert_eq!(eng.transmission_probabilities(&st), vec![1.0, 0.0]);
    }

    #[test]
    fn two_opinion_q_substitution() {
        // x_A = 0.3, x_B = 0.3, x_AB = 0.2, P_A = P_B = 0.1.
        let (eng, mut st) = RecursiveEngine::new(&[0.1, 0.1], &[0.3, 0.5]).unwrap();
        st.x_single = vec![0.3, 0.3];
        st.x_len = vec![vec![0.2], vec![0.2]];
        let q = eng.transmission_probabilities(&st);
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn oracle_two_opinion_mixed_update() {
        let mut s = FullDiscreteState::from_singles(&[0.3, 0.5], &[0.15, 0.05]).unwrap();
        s.x[2] = 0.0;
        let q = s.transmission_probabilities();
        let next = oracle_step(&s);
        let expect = 0.3 * q[1] + 0.5 * q[0];
        assert!((next.x[2] - expect).abs() < 1e-15);
        assert!((next.x.iter().sum::<f64>() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn footprint_is_quadratic() {
        for m in 2..=12 {
            let committed = vec![0.01; m];
            let mut x0 = vec![0.0; m];
            x0[1] = 1.0 - 0.01 * m as f64;
            let (eng, mut st) = RecursiveEngine::new(&committed, &x0).unwrap();
            for _ in 0..2 * m {
                eng.step(&mut st);
            }
            assert!(st.stored_values() <= 4 * m * m, "m = {m}: {}", st.stored_values());
        }
    }

    fn check_against_oracle(committed: &[f64], x0: &[f64], steps: usize) {
        let (eng, mut st) = RecursiveEngine::new(committed, x0).unwrap();
        let mut full = FullDiscreteState::from_singles(x0, committed).unwrap();
        for t in 0..steps {
            let q_rec = eng.transmission_probabilities(&st);
            let q_full = full.transmission_probabilities();
            let agg = full.length_aggregates();
            for i in 0..committed.len() {
                assert!((q_rec[i] - q_full[i]).abs() < 1e-12, "t={t} Q_{i}");
                assert!((st.x_single[i] - full.singles()[i]).abs() < 1e-12, "t={t} x_{i}");
                for (a, b) in st.x_len[i].iter().zip(&agg[i]) {
                    assert!((a - b).abs() < 1e-12, "t={t} len {i}: {a} vs {b}");
                }
            }
            assert!((st.uncommitted_mass() - full.x.iter().sum::<f64>()).abs() < 1e-12);
            eng.step(&mut st);
            full = oracle_step(&full);
        }
    }

    #[test]
    fn matches_full_map_distinct_opinions() {
        check_against_oracle(&[0.06, 0.02], &[0.3, 0.62], 12);
        check_against_oracle(&[0.05, 0.0, 0.03], &[0.2, 0.5, 0.22], 12);
        check_against_oracle(&[0.07, 0.01, 0.02, 0.03], &[0.1, 0.4, 0.2, 0.17], 12);
        check_against_oracle(&[0.04, 0.0, 0.01, 0.02, 0.03], &[0.05, 0.5, 0.1, 0.15, 0.1], 12);
    }

    #[test]
    fn matches_full_map_with_grouped_opinions() {
        check_against_oracle(&[0.08, 0.0, 0.02, 0.02, 0.02], &[0.0, 0.86, 0.0, 0.0, 0.0], 15);
        check_against_oracle(&[0.05, 0.01, 0.01, 0.01, 0.01, 0.01], &[0.1, 0.2, 0.15, 0.15, 0.15, 0.15], 10);
        let (eng, _) = RecursiveEngine::new(&[0.08, 0.0, 0.02, 0.02, 0.02], &[0.0, 0.86, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(eng.class_count(), 3);
    }

    #[test]
    fn conserves_mass() {
        let (eng, mut st) = RecursiveEngine::new(&[0.1, 0.0, 0.03, 0.03], &[0.0, 0.84, 0.0, 0.0]).unwrap();
        for _ in 0..200 {
            eng.step(&mut st);
            assert!((st.uncommitted_mass() - 0.84).abs() < 1e-12, "t={} {}", st.t, st.uncommitted_mass() - 0.84);
        }
    }
}
