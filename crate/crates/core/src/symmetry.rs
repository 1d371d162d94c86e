//! Orbit reduction of the mean-field system under opinion-relabeling symmetry.
//!
//! Opinions sharing the same committed fraction and the same initial
//! uncommitted density are interchangeable for all time. An opinion state is
//! then described, up to relabeling, by how many members of each class it
//! contains. For the S1 layout `{A}, {B}, {C_1..C_{m-2}}` that leaves
//! `2 * 2 * (m - 1) - 1 = 4m - 5` orbits.
//!
//! The reduced rates follow from the full ones by symmetry. With `q_c` the
//! utterance probability and `h_c` the holding density of any one opinion of
//! class `c` (size `s_c`), a listener in orbit `K` with `k_c` members of
//! class `c` collapses to the class singleton at rate `y_K k_c q_c` and grows
//! at rate `y_K (s_c - k_c) q_c`; under the original rule the speaker in `K`
//! collapses at rate `y_K (k_c / |K|) h_c`.

use crate::error::{Error, Result};
use crate::meanfield::{check_committed, DensityVector, Observables};
use crate::ode::{self, OdeSystem, SteadyOutcome, Tolerances, Trajectory};
use crate::opinion::{state_count, RuleVariant, DEFAULT_M_MAX, MAX_OPINIONS};
use crate::scenario::ScenarioConfig;

/// Absolute tolerance for deciding that a full state is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionClass {
    pub members: Vec<usize>,
    /// Committed fraction of each member.
    pub committed: f64,
    /// Initial uncommitted density on each member's singleton.
    pub x0: f64,
}

impl OpinionClass {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionClassPartition {
    m: usize,
    classes: Vec<OpinionClass>,
    class_of: Vec<usize>,
}

impl OpinionClassPartition {
    pub fn new(m: usize, classes: Vec<OpinionClass>) -> Result<Self> {
        if m == 0 || m > MAX_OPINIONS {
            return Err(Error::contract(format!("unsupported m = {m}")));
        }
        let mut class_of = vec![usize::MAX; m];
        for (c, class) in classes.iter().enumerate() {
            if class.members.is_empty() {
                return Err(Error::contract(format!("class {c} is empty")));
            }
            if !(class.committed >= 0.0 && class.x0 >= 0.0) {
                return Err(Error::contract(format!("class {c} has a negative fraction")));
            }
            for &o in &class.members {
                if o >= m || class_of[o] != usize::MAX {
                    return Err(Error::contract(format!("opinion {o} is out of range or repeated")));
                }
                class_of[o] = c;
            }
        }
        if class_of.contains(&usize::MAX) {
            return Err(Error::contract("partition does not cover every opinion"));
        }
        let mass: f64 = classes.iter().map(|c| c.size() as f64 * (c.committed + c.x0)).sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::infeasible(format!("partition mass is {mass}, expected 1")));
        }
        Ok(OpinionClassPartition { m, classes, class_of })
    }

    /// Groups opinions with identical committed and initial fractions.
    pub fn from_scenario(s: &ScenarioConfig) -> Result<Self> {
        s.validate()?;
        let mut classes: Vec<OpinionClass> = Vec::new();
        for o in 0..s.m {
            let (p, x) = (s.committed[o], s.x0[o]);
            match classes.iter_mut().find(|c| c.committed == p && c.x0 == x) {
                Some(c) => c.members.push(o),
                None => classes.push(OpinionClass { members: vec![o], committed: p, x0: x }),
            }
        }
        Self::new(s.m, classes)
    }

    /// One class per opinion: no reduction.
    pub fn singletons(committed: &[f64], x0: &[f64]) -> Result<Self> {
        let classes = committed
            .iter()
            .zip(x0)
            .enumerate()
            .map(|(o, (&p, &x))| OpinionClass { members: vec![o], committed: p, x0: x })
            .collect();
        Self::new(committed.len(), classes)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn classes(&self) -> &[OpinionClass] {
        &self.classes
    }

    pub fn class_of(&self, opinion: usize) -> usize {
        self.class_of[opinion]
    }

    pub fn committed(&self) -> Vec<f64> {
        (0..self.m).map(|o| self.classes[self.class_of[o]].committed).collect()
    }

    /// Number of orbits: `Π (s_c + 1) - 1`.
    pub fn orbit_count(&self) -> usize {
        self.classes.iter().map(|c| c.size() + 1).product::<usize>() - 1
    }
}

/// Reduced mean-field system over orbit densities.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    partition: OpinionClassPartition,
    variant: RuleVariant,
    /// Per-class member counts of each orbit.
    counts: Vec<Vec<u32>>,
    totals: Vec<u32>,
    /// `grow[K][c]`: orbit `K + e_c`, if class `c` is not exhausted.
    grow: Vec<Vec<Option<usize>>>,
    /// Orbit of a single opinion of class `c`.
    single: Vec<usize>,
    sizes: Vec<f64>,
    class_committed: Vec<f64>,
    multiplicity: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Builds the orbit-reduced system for a symmetric partition.
pub fn reduce_system(partition: &OpinionClassPartition, variant: RuleVariant) -> Result<ReducedSystem> {
    check_committed(partition.m, &partition.committed())?;
    let radix: Vec<usize> = partition.classes.iter().map(|c| c.size() + 1).collect();
    let n_orbits = partition.orbit_count();
    let nc = radix.len();
    let encode = |k: &[u32]| -> usize {
        let mut code = 0;
        for c in (0..nc).rev() {
            code = code * radix[c] + k[c] as usize;
        }
        code - 1
    };
    let mut counts = Vec::with_capacity(n_orbits);
    for idx in 0..n_orbits {
        let mut code = idx + 1;
        let k: Vec<u32> = radix
            .iter()
            .map(|&r| {
                let d = code % r;
                code /= r;
                d as u32
            })
            .collect();
        counts.push(k);
    }
    let totals = counts.iter().map(|k| k.iter().sum()).collect();
    let grow = counts
        .iter()
        .map(|k| {
            (0..nc)
                .map(|c| {
                    (k[c] as usize + 1 < radix[c]).then(|| {
                        let mut g = k.clone();
                        g[c] += 1;
                        encode(&g)
                    })
                })
                .collect()
        })
        .collect();
    let single = (0..nc)
        .map(|c| {
            let mut e = vec![0u32; nc];
            e[c] = 1;
            encode(&e)
        })
        .collect();
    let sizes: Vec<f64> = partition.classes.iter().map(|c| c.size() as f64).collect();
    let multiplicity = counts
        .iter()
        .map(|k| {
            k.iter()
                .zip(&partition.classes)
                .map(|(&kc, cl)| binomial(cl.size(), kc as usize))
                .product()
        })
        .collect();
    Ok(ReducedSystem {
        class_committed: partition.classes.iter().map(|c| c.committed).collect(),
        partition: partition.clone(),
        variant,
        counts,
        totals,
        grow,
        single,
        sizes,
        multiplicity,
    })
}

impl ReducedSystem {
    pub fn partition(&self) -> &OpinionClassPartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Per-class member counts of orbit `idx`.
    pub fn orbit_counts(&self, idx: usize) -> &[u32] {
        &self.counts[idx]
    }

    /// Number of full opinion states in orbit `idx`.
    pub fn multiplicity(&self, idx: usize) -> f64 {
        self.multiplicity[idx]
    }

    fn orbit_of_mask(&self, mask: u32) -> usize {
        let nc = self.sizes.len();
        let mut k = vec![0u32; nc];
        let mut rest = mask;
        while rest != 0 {
            let o = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            k[self.partition.class_of[o]] += 1;
        }
        let mut code = 0;
        for c in (0..nc).rev() {
            code = code * (self.sizes[c] as usize + 1) + k[c] as usize;
        }
        code - 1
    }

    /// Orbit state of the partition's initial condition.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (c, class) in self.partition.classes.iter().enumerate() {
            y[self.single[c]] += class.x0 * class.size() as f64;
        }
        y
    }

    /// Expands an orbit state to the full `2^m - 1` state space.
    pub fn lift(&self, y: &[f64]) -> Result<DensityVector> {
        let m = self.partition.m;
        if m > DEFAULT_M_MAX {
            return Err(Error::ResourceLimit(format!("cannot lift to 2^{m} states")));
        }
        if y.len() != self.dim() {
            return Err(Error::contract("orbit state has the wrong length"));
        }
        let x = (1..=state_count(m) as u32)
            .map(|mask| {
                let k = self.orbit_of_mask(mask);
                y[k] / self.multiplicity[k]
            })
            .collect();
        Ok(DensityVector { x, committed: self.partition.committed() })
    }

    /// Sums a symmetric full state into orbits; rejects asymmetric input.
    pub fn project(&self, state: &DensityVector) -> Result<Vec<f64>> {
        let m = self.partition.m;
        if state.m() != m || state.x.len() != state_count(m) {
            return Err(Error::contract("state dimension does not match the partition"));
        }
        if state
            .committed
            .iter()
            .zip(self.partition.committed())
            .any(|(a, b)| (a - b).abs() > SYMMETRY_TOL)
        {
            return Err(Error::contract("committed fractions are not symmetric under the partition"));
        }
        let mut y = vec![0.0; self.dim()];
        let mut orbit = vec![0usize; state.x.len()];
        for (idx, &v) in state.x.iter().enumerate() {
            let k = self.orbit_of_mask(idx as u32 + 1);
            orbit[idx] = k;
            y[k] += v;
        }
        for (idx, &v) in state.x.iter().enumerate() {
            let k = orbit[idx];
            let expect = y[k] / self.multiplicity[k];
            if (v - expect).abs() > SYMMETRY_TOL {
                return Err(Error::contract(format!(
                    "state is not symmetric: density {v} differs from orbit mean {expect}"
                )));
            }
        }
        Ok(y)
    }

    /// Per-opinion `n_i` from an orbit state.
    pub fn observables(&self, y: &[f64]) -> Observables {
        let per_class: Vec<f64> = (0..self.sizes.len())
            .map(|c| y[self.single[c]] / self.sizes[c] + self.class_committed[c])
            .collect();
        Observables {
            n: (0..self.partition.m).map(|o| per_class[self.partition.class_of[o]]).collect(),
        }
    }

    pub fn integrate_at(&self, y0: &[f64], times: &[f64], tol: Tolerances) -> Result<Trajectory> {
        ode::integrate_at(self, y0, times, tol)
    }

    pub fn steady_state(&self, y0: &[f64], eps: f64, t_max: f64, tol: Tolerances) -> Result<SteadyOutcome> {
        ode::steady_state(self, y0, eps, t_max, tol)
    }
}

impl OdeSystem for ReducedSystem {
    fn dim(&self) -> usize {
        self.counts.len()
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let nc = self.sizes.len();
        let mut q = self.class_committed.clone();
        let mut h = self.class_committed.clone();
        for (idx, &yk) in y.iter().enumerate() {
            if yk == 0.0 {
                continue;
            }
            let inv_total = 1.0 / self.totals[idx] as f64;
            for c in 0..nc {
                let kc = self.counts[idx][c];
                if kc > 0 {
                    let frac = yk * kc as f64 / self.sizes[c];
                    h[c] += frac;
                    q[c] += frac * inv_total;
                }
            }
        }
        dy.fill(0.0);
        let speaker_side = self.variant.updates_speaker();
        for (idx, &yk) in y.iter().enumerate() {
            if yk == 0.0 {
                continue;
            }
            let inv_total = 1.0 / self.totals[idx] as f64;
            for c in 0..nc {
                let kc = self.counts[idx][c] as f64;
                if kc > 0.0 && self.single[c] != idx {
                    let mut r = yk * kc * q[c];
                    if speaker_side {
                        r += yk * kc * inv_total * h[c];
                    }
                    dy[idx] -= r;
                    dy[self.single[c]] += r;
                }
                if let Some(target) = self.grow[idx][c] {
                    let r = yk * (self.sizes[c] - kc) * q[c];
                    dy[idx] -= r;
                    dy[target] += r;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::build_system;
    use crate::scenario::{make_s1, make_s2};

    #[test]
    fn s1_dimension_is_4m_minus_5() {
        for m in 3..=30 {
            let s = make_s1(m, 0.1, 0.06).unwrap();
            let p = OpinionClassPartition::from_scenario(&s).unwrap();
            let red = reduce_system(&p, RuleVariant::Original).unwrap();
            assert_eq!(red.dim(), 4 * m - 5, "m = {m}");
        }
    }

    #[test]
    fn singleton_partition_is_identity() {
        let p = OpinionClassPartition::singletons(&[0.1, 0.05, 0.02], &[0.0, 0.83, 0.0]).unwrap();
        let red = reduce_system(&p, RuleVariant::Original).unwrap();
        assert_eq!(red.dim(), 7);
        for k in 0..7 {
            assert_eq!(red.multiplicity(k), 1.0);
        }
    }

    #[test]
    fn pure_b_orbit_has_one_entry() {
        let s = make_s1(6, 0.1, 0.1).unwrap();
        let p = OpinionClassPartition::from_scenario(&s).unwrap();
        let red = reduce_system(&p, RuleVariant::Original).unwrap();
        let y = red.initial_state();
        assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 1);
        let back = red.project(&red.lift(&y).unwrap()).unwrap();
        assert_eq!(back, y);
    }

    #[test]
    fn uniform_state_round_trips() {
        let s = make_s1(4, 0.1, 0.1).unwrap();
        let p = OpinionClassPartition::from_scenario(&s).unwrap();
        let red = reduce_system(&p, RuleVariant::Original).unwrap();
        let mass = 1.0 - 0.2;
        let x = vec![mass / 15.0; 15];
        let dv = DensityVector::new(x, s.committed.clone()).unwrap();
        let y = red.project(&dv).unwrap();
        let lifted = red.lift(&y).unwrap();
        for (a, b) in lifted.x.iter().zip(&dv.x) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn asymmetric_state_rejected() {
        let s = make_s1(4, 0.1, 0.1).unwrap();
        let p = OpinionClassPartition::from_scenario(&s).unwrap();
        let red = reduce_system(&p, RuleVariant::Original).unwrap();
        let mut singles = s.x0.clone();
        singles[1] -= 0.1;
        singles[2] += 0.1;
        let dv = DensityVector::from_singles(&singles, &s.committed).unwrap();
        assert!(matches!(red.project(&dv), Err(Error::Contract(_))));
    }

    #[test]
    fn reduced_rhs_matches_full_on_symmetric_state() {
        let s = make_s2(6, 0.08, 0.2).unwrap();
        let p = OpinionClassPartition::from_scenario(&s).unwrap();
        assert!(p.classes().len() < 6);
        for variant in [RuleVariant::Original, RuleVariant::ListenerOnly] {
            let red = reduce_system(&p, variant).unwrap();
            let full = build_system(6, &s.committed, variant).unwrap();
            // A generic symmetric state: spread mass over orbits.
            let mut y: Vec<f64> = (0..red.dim()).map(|k| 1.0 + (k % 5) as f64).collect();
            let total: f64 = y.iter().sum();
            let unc = 1.0 - s.committed_total();
            y.iter_mut().for_each(|v| *v *= unc / total);
            let lifted = red.lift(&y).unwrap();
            let mut dy = vec![0.0; red.dim()];
            red.rhs(&y, &mut dy);
            let dx = full.eval(&lifted.x);
            let projected = red.project(&DensityVector { x: dx, committed: s.committed.clone() });
            // dx is symmetric, so projection succeeds and equals dy.
            let projected = projected.unwrap();
            for (a, b) in projected.iter().zip(&dy) {
                assert!((a - b).abs() < 1e-14, "{variant}: {a} vs {b}");
            }
        }
    }
}
