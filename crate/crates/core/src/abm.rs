//! Agent-based Naming Game on finite networks.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::argmax;
use crate::opinion::{interact_masks, OpinionId, OpinionSet, RuleVariant};
use crate::scenario::ScenarioConfig;

pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_SWEEPS: usize = 1000;
pub const DEFAULT_REALIZATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Complete,
    #[serde(rename = "er")]
    ErdosRenyi,
    #[serde(rename = "sw")]
    SmallWorld,
    #[serde(rename = "sf")]
    ScaleFree,
}

/// Generator parameters. `avg_degree` is ignored for complete graphs and
/// `beta` is used only by small-world rewiring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub n: usize,
    #[serde(default)]
    pub avg_degree: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl NetworkSpec {
    pub fn complete(n: usize) -> Self {
        NetworkSpec { kind: NetworkKind::Complete, n, avg_degree: n.saturating_sub(1) as f64, beta: DEFAULT_BETA }
    }

    pub fn erdos_renyi(n: usize, avg_degree: f64) -> Self {
        NetworkSpec { kind: NetworkKind::ErdosRenyi, n, avg_degree, beta: DEFAULT_BETA }
    }

    pub fn small_world(n: usize, avg_degree: f64, beta: f64) -> Self {
        NetworkSpec { kind: NetworkKind::SmallWorld, n, avg_degree, beta }
    }

    pub fn scale_free(n: usize, avg_degree: f64) -> Self {
        NetworkSpec { kind: NetworkKind::ScaleFree, n, avg_degree, beta: DEFAULT_BETA }
    }

    /// Short label for file names and tables, e.g. `er-k8`.
    pub fn label(&self) -> String {
        match self.kind {
            NetworkKind::Complete => "complete".into(),
            NetworkKind::ErdosRenyi => format!("er-k{}", self.avg_degree),
            NetworkKind::SmallWorld => format!("sw-k{}-b{}", self.avg_degree, self.beta),
            NetworkKind::ScaleFree => format!("sf-k{}", self.avg_degree),
        }
    }

    fn even_degree(&self) -> Result<usize> {
        let k = self.avg_degree.round();
        if (self.avg_degree - k).abs() > 1e-9 || k < 2.0 || !(k as usize).is_multiple_of(2) {
            return Err(Error::Network(format!(
                "{:?} needs an even integer average degree, got {}",
                self.kind, self.avg_degree
            )));
        }
        Ok(k as usize)
    }
}

/// Simple undirected graph in compressed adjacency form.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub seed: u64,
    n_nodes: usize,
    complete: bool,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Network {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn degree(&self, i: usize) -> usize {
        if self.complete {
            self.n_nodes - 1
        } else {
            self.offsets[i + 1] - self.offsets[i]
        }
    }

    pub fn edge_count(&self) -> usize {
        if self.complete {
            self.n_nodes * (self.n_nodes - 1) / 2
        } else {
            self.neighbors.len() / 2
        }
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.n_nodes as f64
    }

    pub fn isolated_nodes(&self) -> usize {
        (0..self.n_nodes).filter(|&i| self.degree(i) == 0).count()
    }

    /// `k`-th neighbour of `i` in ascending order.
    pub fn neighbor(&self, i: usize, k: usize) -> usize {
        if self.complete {
            if k >= i {
                k + 1
            } else {
                k
            }
        } else {
            self.neighbors[self.offsets[i] + k] as usize
        }
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.degree(i)).map(|k| self.neighbor(i, k)).collect()
    }

    fn from_sets(spec: NetworkSpec, seed: u64, adj: Vec<HashSet<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for set in adj {
            let mut row: Vec<u32> = set.into_iter().collect();
            row.sort_unstable();
            neighbors.extend(row);
            offsets.push(neighbors.len());
        }
        Network { spec, seed, n_nodes: offsets.len() - 1, complete: false, offsets, neighbors }
    }
}

/// Builds a network; the same spec and seed always give the same graph.
///
/// Erdős–Rényi uses exactly `M = n <k> / 2` edges. Small-world starts from a
/// ring where each node links to its `<k>/2` nearest neighbours per side and
/// rewires each edge with probability `beta`. Scale-free uses preferential
/// attachment with `<k>/2` links per new node, grown from a star.
pub fn gen_network(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    let n = spec.n;
    if n < 2 || n > u32::MAX as usize {
        return Err(Error::Network(format!("network size {n} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.kind {
        NetworkKind::Complete => Ok(Network {
            spec: *spec,
            seed,
            n_nodes: n,
            complete: true,
            offsets: Vec::new(),
            neighbors: Vec::new(),
        }),
        NetworkKind::ErdosRenyi => {
            let edges = (n as f64 * spec.avg_degree / 2.0).round();
            let max_edges = (n * (n - 1) / 2) as f64;
            if !(edges >= 0.0 && edges <= max_edges) {
                return Err(Error::Network(format!("{edges} edges do not fit in {n} nodes")));
            }
            let mut adj = vec![HashSet::new(); n];
            let mut placed = 0usize;
            while placed < edges as usize {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u != v && adj[u].insert(v as u32) {
                    adj[v].insert(u as u32);
                    placed += 1;
                }
            }
            Ok(Network::from_sets(*spec, seed, adj))
        }
        NetworkKind::SmallWorld => {
            let k = spec.even_degree()?;
            if k >= n {
                return Err(Error::Network(format!("ring degree {k} needs more than {n} nodes")));
            }
            if !(0.0..=1.0).contains(&spec.beta) {
                return Err(Error::Network(format!("rewiring probability {} outside [0, 1]", spec.beta)));
            }
            let mut adj = vec![HashSet::new(); n];
            for u in 0..n {
                for j in 1..=k / 2 {
                    let v = (u + j) % n;
                    adj[u].insert(v as u32);
                    adj[v].insert(u as u32);
                }
            }
            for j in 1..=k / 2 {
                for u in 0..n {
                    let v = (u + j) % n;
                    if rng.random::<f64>() >= spec.beta || !adj[u].contains(&(v as u32)) {
                        continue;
                    }
                    if adj[u].len() >= n - 1 {
                        continue;
                    }
                    let mut w = rng.random_range(0..n);
                    while w == u || adj[u].contains(&(w as u32)) {
                        w = rng.random_range(0..n);
                    }
                    adj[u].remove(&(v as u32));
                    adj[v].remove(&(u as u32));
                    adj[u].insert(w as u32);
                    adj[w].insert(u as u32);
                }
            }
            Ok(Network::from_sets(*spec, seed, adj))
        }
        NetworkKind::ScaleFree => {
            let m_attach = spec.even_degree()? / 2;
            if m_attach >= n {
                return Err(Error::Network(format!("{m_attach} links per node need more than {n} nodes")));
            }
            let mut adj = vec![HashSet::new(); n];
            let mut repeated: Vec<usize> = Vec::with_capacity(2 * m_attach * n);
            for leaf in 1..=m_attach {
                adj[0].insert(leaf as u32);
                adj[leaf].insert(0);
                repeated.push(0);
                repeated.push(leaf);
            }
            for source in m_attach + 1..n {
                let mut targets: Vec<usize> = Vec::with_capacity(m_attach);
                while targets.len() < m_attach {
                    let t = repeated[rng.random_range(0..repeated.len())];
                    if !targets.contains(&t) {
                        targets.push(t);
                    }
                }
                for &t in &targets {
                    adj[source].insert(t as u32);
                    adj[t].insert(source as u32);
                }
                repeated.extend(&targets);
                repeated.extend(std::iter::repeat_n(source, m_attach));
            }
            Ok(Network::from_sets(*spec, seed, adj))
        }
    }
}

/// Agent states. Committed agents hold their singleton for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub m: usize,
    masks: Vec<u32>,
    committed: Vec<Option<OpinionId>>,
    single_counts: Vec<usize>,
}

impl Population {
    /// Places agents according to the scenario's integer counts, in a
    /// uniformly random order.
    pub fn place<R: Rng + ?Sized>(scenario: &ScenarioConfig, n: usize, rng: &mut R) -> Result<Self> {
        scenario.validate()?;
        let counts = scenario.agent_counts(n);
        let mut masks = Vec::with_capacity(n);
        let mut committed = Vec::with_capacity(n);
        for (o, &c) in counts.committed.iter().enumerate() {
            masks.extend(std::iter::repeat_n(1u32 << o, c));
            committed.extend(std::iter::repeat_n(Some(OpinionId(o as u32)), c));
        }
        for (o, &c) in counts.uncommitted.iter().enumerate() {
            masks.extend(std::iter::repeat_n(1u32 << o, c));
            committed.extend(std::iter::repeat_n(None, c));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let masks: Vec<u32> = order.iter().map(|&i| masks[i]).collect();
        let committed: Vec<Option<OpinionId>> = order.iter().map(|&i| committed[i]).collect();
        let mut single_counts = vec![0; scenario.m];
        for &mask in &masks {
            single_counts[mask.trailing_zeros() as usize] += 1;
        }
        Ok(Population { m: scenario.m, masks, committed, single_counts })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn state(&self, agent: usize) -> OpinionSet {
        OpinionSet::from_mask(self.masks[agent]).expect("agent states are never empty")
    }

    pub fn committed(&self, agent: usize) -> Option<OpinionId> {
        self.committed[agent]
    }

    /// Fraction of all agents (committed included) holding exactly `{i}`.
    pub fn n(&self) -> Vec<f64> {
        let total = self.masks.len() as f64;
        self.single_counts.iter().map(|&c| c as f64 / total).collect()
    }

    fn set(&mut self, agent: usize, mask: u32) {
        let old = self.masks[agent];
        if old == mask {
            return;
        }
        if old.is_power_of_two() {
            self.single_counts[old.trailing_zeros() as usize] -= 1;
        }
        if mask.is_power_of_two() {
            self.single_counts[mask.trailing_zeros() as usize] += 1;
        }
        self.masks[agent] = mask;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Speaker draws that hit a degree-0 node and were redrawn.
    pub isolated_redraws: u64,
    pub interactions: u64,
    pub successes: u64,
}

#[derive(Debug, Clone)]
pub struct Realization {
    /// `n[s][i]` after `s` sweeps; row 0 is the initial condition.
    pub n: Vec<Vec<f64>>,
    pub population: Population,
    pub diagnostics: Diagnostics,
}

impl Realization {
    pub fn final_n(&self) -> &[f64] {
        self.n.last().expect("trajectory has the initial row")
    }
}

fn uttered_bit<R: Rng + ?Sized>(mask: u32, rng: &mut R) -> u32 {
    let mut k = rng.random_range(0..mask.count_ones());
    let mut rest = mask;
    while k > 0 {
        rest &= rest - 1;
        k -= 1;
    }
    rest & rest.wrapping_neg()
}

/// Runs `sweeps * N` elementary interactions: a uniformly random speaker
/// talks to a uniformly random neighbour. `n_i` is recorded after every sweep.
pub fn run_realization(
    network: &Network,
    scenario: &ScenarioConfig,
    variant: RuleVariant,
    sweeps: usize,
    seed: u64,
) -> Result<Realization> {
    run_inner(network, scenario, variant, sweeps, seed, false)
}

/// As [`run_realization`], also checking after every interaction that no
/// committed agent changed. A violation is reported as a contract error.
pub fn run_realization_checked(
    network: &Network,
    scenario: &ScenarioConfig,
    variant: RuleVariant,
    sweeps: usize,
    seed: u64,
) -> Result<Realization> {
    run_inner(network, scenario, variant, sweeps, seed, true)
}

fn run_inner(
    network: &Network,
    scenario: &ScenarioConfig,
    variant: RuleVariant,
    sweeps: usize,
    seed: u64,
    check: bool,
) -> Result<Realization> {
    let n = network.n_nodes();
    if network.isolated_nodes() == n {
        return Err(Error::Network("every node is isolated".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop = Population::place(scenario, n, &mut rng)?;
    let update_speaker = variant.updates_speaker();
    let mut diag = Diagnostics::default();
    let mut traj = Vec::with_capacity(sweeps + 1);
    traj.push(pop.n());
    for _ in 0..sweeps {
        for _ in 0..n {
            let speaker = loop {
                let s = rng.random_range(0..n);
                if network.degree(s) > 0 {
                    break s;
                }
                diag.isolated_redraws += 1;
            };
            let listener = network.neighbor(speaker, rng.random_range(0..network.degree(speaker)));
            let s_mask = pop.masks[speaker];
            let l_mask = pop.masks[listener];
            let s_fixed = pop.committed[speaker].is_some();
            let l_fixed = pop.committed[listener].is_some();
            let bit = uttered_bit(s_mask, &mut rng);
            let (s_new, l_new, ok) = interact_masks(s_mask, l_mask, bit, update_speaker, s_fixed, l_fixed);
            if check && ((s_fixed && s_new != s_mask) || (l_fixed && l_new != l_mask)) {
                return Err(Error::contract(format!(
                    "committed agent changed in interaction {} -> {}",
                    speaker, listener
                )));
            }
            pop.set(speaker, s_new);
            pop.set(listener, l_new);
            diag.interactions += 1;
            diag.successes += ok as u64;
        }
        traj.push(pop.n());
    }
    Ok(Realization { n: traj, population: pop, diagnostics: diag })
}

/// Seed for one purpose of one realization, derived from the master seed.
pub fn derive_seed(master: u64, realization: u64, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(realization.wrapping_mul(2).wrapping_add(purpose & 1));
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub sweeps: usize,
    pub realizations: usize,
    pub seed: u64,
    /// Generate a new network for every realization instead of reusing the
    /// one built from `network_seed`.
    pub fresh_networks: bool,
    pub network_seed: u64,
    /// Keep every realization's `n_i` trajectory, not just the final values.
    pub keep_trajectories: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            sweeps: DEFAULT_SWEEPS,
            realizations: DEFAULT_REALIZATIONS,
            seed: 0,
            fresh_networks: false,
            network_seed: 0,
            keep_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    /// `<n_i>` over realizations, at the final sweep.
    pub mean_n: Vec<f64>,
    /// Fraction of realizations dominated by each opinion.
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    #[serde(rename = "L")]
    pub l: usize,
    pub finals: Vec<Vec<f64>>,
    /// Realizations whose maximum was shared; credited to the lowest index.
    pub ties: usize,
    pub network_seeds: Vec<u64>,
    pub run_seeds: Vec<u64>,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub trajectories: Vec<Vec<Vec<f64>>>,
}

/// Runs `L` realizations and aggregates the final `n_i`. Each realization
/// has its own dynamics seed; the network is shared unless
/// `fresh_networks` is set.
pub fn ensemble(
    spec: &NetworkSpec,
    scenario: &ScenarioConfig,
    variant: RuleVariant,
    opts: &EnsembleOptions,
) -> Result<EnsembleStats> {
    if opts.realizations == 0 {
        return Err(Error::contract("an ensemble needs at least one realization"));
    }
    scenario.validate()?;
    let shared = if opts.fresh_networks { None } else { Some(gen_network(spec, opts.network_seed)?) };
    let one = |r: usize| -> Result<(u64, u64, Realization)> {
        let run_seed = derive_seed(opts.seed, r as u64, 1);
        let (net_seed, real) = match &shared {
            Some(net) => (opts.network_seed, run_realization(net, scenario, variant, opts.sweeps, run_seed)?),
            None => {
                let net_seed = derive_seed(opts.seed, r as u64, 0);
                let net = gen_network(spec, net_seed)?;
                (net_seed, run_realization(&net, scenario, variant, opts.sweeps, run_seed)?)
            }
        };
        let mut real = real;
        if !opts.keep_trajectories {
            let last = real.n.pop().expect("trajectory has the initial row");
            real.n = vec![last];
        }
        Ok((net_seed, run_seed, real))
    };
    #[cfg(feature = "parallel")]
    let runs: Vec<_> = {
        use rayon::prelude::*;
        (0..opts.realizations).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<_> = (0..opts.realizations).map(one).collect::<Result<_>>()?;

    let m = scenario.m;
    let l = runs.len();
    let mut stats = EnsembleStats {
        mean_n: vec![0.0; m],
        r: vec![0.0; m],
        l,
        finals: Vec::with_capacity(l),
        ties: 0,
        network_seeds: Vec::with_capacity(l),
        run_seeds: Vec::with_capacity(l),
        diagnostics: Diagnostics::default(),
        trajectories: Vec::new(),
    };
    for (net_seed, run_seed, real) in runs {
        let fin = real.final_n().to_vec();
        let top = argmax(&fin);
        if fin.iter().enumerate().any(|(i, &v)| i != top && v == fin[top]) {
            stats.ties += 1;
        }
        stats.r[top] += 1.0;
        for (acc, v) in stats.mean_n.iter_mut().zip(&fin) {
            *acc += v;
        }
        stats.diagnostics.isolated_redraws += real.diagnostics.isolated_redraws;
        stats.diagnostics.interactions += real.diagnostics.interactions;
        stats.diagnostics.successes += real.diagnostics.successes;
        stats.finals.push(fin);
        stats.network_seeds.push(net_seed);
        stats.run_seeds.push(run_seed);
        if opts.keep_trajectories {
            stats.trajectories.push(real.n);
        }
    }
    for v in stats.mean_n.iter_mut().chain(stats.r.iter_mut()) {
        *v /= l as f64;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::make_network_sym;

    #[test]
    fn er_has_exact_edge_count() {
        let net = gen_network(&NetworkSpec::erdos_renyi(1000, 8.0), 3).unwrap();
        assert_eq!(net.edge_count(), 4000);
        assert_eq!(net.mean_degree(), 8.0);
    }

    #[test]
    fn complete_graph_edges() {
        let net = gen_network(&NetworkSpec::complete(5), 0).unwrap();
        assert_eq!(net.edge_count(), 10);
        assert_eq!(net.neighbors(2), vec![0, 1, 3, 4]);
    }

    #[test]
    fn scale_free_edge_count() {
        let net = gen_network(&NetworkSpec::scale_free(1000, 8.0), 1).unwrap();
        assert_eq!(net.edge_count(), 4 * 996);
        assert!((net.mean_degree() - 7.968).abs() < 1e-12);
        assert_eq!(net.isolated_nodes(), 0);
    }

    #[test]
    fn small_world_keeps_edges() {
        let net = gen_network(&NetworkSpec::small_world(1000, 8.0, 0.1), 1).unwrap();
        assert_eq!(net.edge_count(), 4000);
        let ring = gen_network(&NetworkSpec::small_world(20, 4.0, 0.0), 1).unwrap();
        assert_eq!(ring.neighbors(0), vec![1, 2, 18, 19]);
    }

    #[test]
    fn graphs_are_simple() {
        for spec in [
            NetworkSpec::erdos_renyi(300, 6.0),
            NetworkSpec::small_world(300, 6.0, 0.3),
            NetworkSpec::scale_free(300, 6.0),
        ] {
            let net = gen_network(&spec, 9).unwrap();
            for i in 0..net.n_nodes() {
                let nb = net.neighbors(i);
                assert!(!nb.contains(&i));
                assert!(nb.windows(2).all(|w| w[0] < w[1]));
                for j in nb {
                    assert!(net.neighbors(j).contains(&i));
                }
            }
        }
    }

    #[test]
    fn infeasible_networks_rejected() {
        assert!(gen_network(&NetworkSpec::small_world(100, 5.0, 0.1), 0).is_err());
        assert!(gen_network(&NetworkSpec::erdos_renyi(10, 20.0), 0).is_err());
        assert!(gen_network(&NetworkSpec::scale_free(3, 8.0), 0).is_err());
        assert!(gen_network(&NetworkSpec::small_world(100, 4.0, 1.5), 0).is_err());
    }

    #[test]
    fn placement_matches_counts() {
        let s = make_network_sym(5, 0.03, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = Population::place(&s, 1000, &mut rng).unwrap();
        let committed: Vec<usize> = (0..5)
            .map(|o| (0..1000).filter(|&a| pop.committed(a) == Some(OpinionId(o))).count())
            .collect();
        assert_eq!(committed, vec![30, 10, 10, 10, 10]);
        assert_eq!(pop.n(), vec![0.03, 0.243, 0.243, 0.242, 0.242]);
    }

    #[test]
    fn utterance_picks_held_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            let b = uttered_bit(0b10101, &mut rng);
            assert!(b.is_power_of_two() && b & 0b10101 != 0);
            seen[(b.trailing_zeros() / 2) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 900), "{seen:?}");
    }

    #[test]
    fn single_realization_ensemble() {
        let spec = NetworkSpec::erdos_renyi(200, 6.0);
        let s = make_network_sym(3, 0.05, 0.02).unwrap();
        let opts = EnsembleOptions { sweeps: 20, realizations: 1, seed: 4, keep_trajectories: true, ..Default::default() };
        let st = ensemble(&spec, &s, RuleVariant::Original, &opts).unwrap();
        assert_eq!(st.mean_n, st.trajectories[0].last().unwrap().clone());
        assert_eq!(st.r.iter().sum::<f64>(), 1.0);
        assert_eq!(st.trajectories[0].len(), 21);
    }

    #[test]
    fn isolated_speakers_are_redrawn() {
        // 10 nodes, 2 edges: most nodes are isolated.
        let spec = NetworkSpec::erdos_renyi(10, 0.4);
        let net = gen_network(&spec, 2).unwrap();
        assert_eq!(net.edge_count(), 2);
        let s = ScenarioConfig::two_opinion(0.1, 0.0).unwrap();
        let r = run_realization(&net, &s, RuleVariant::Original, 5, 1).unwrap();
        assert!(r.diagnostics.isolated_redraws > 0);
        assert_eq!(r.diagnostics.interactions, 50);
    }
}
