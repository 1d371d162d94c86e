//! Opinion states and the pairwise Naming Game interaction rules.
//!
//! An opinion state is a non-empty subset of the `m` single opinions, stored
//! as an `m`-bit mask with opinion `k` at bit `k`. Dense arrays over all
//! `2^m - 1` states use `mask - 1` as the index.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `m` representable by the mask encoding.
pub const MAX_OPINIONS: usize = 32;

/// Cap on `m` for anything that enumerates all `2^m - 1` states.
pub const DEFAULT_M_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpinionId(pub u32);

impl OpinionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn bit(self) -> u32 {
        1 << self.0
    }
}

impl fmt::Display for OpinionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&opinion_label(self.index()))
    }
}

/// Display name of opinion `i`: `A`, `B`, then `C1`, `C2`, ...
pub fn opinion_label(i: usize) -> String {
    match i {
        0 => "A".to_string(),
        1 => "B".to_string(),
        k => format!("C{}", k - 1),
    }
}

/// Number of opinion states for `m` single opinions.
pub fn state_count(m: usize) -> usize {
    (1usize << m) - 1
}

/// Dense array index of a state mask.
#[inline]
pub fn state_index(mask: u32) -> usize {
    debug_assert!(mask != 0);
    mask as usize - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct OpinionSet(u32);

impl OpinionSet {
    pub fn from_mask(mask: u32) -> Result<Self> {
        if mask == 0 {
            return Err(Error::InvalidState("opinion set is empty".into()));
        }
        Ok(OpinionSet(mask))
    }

    pub fn singleton(o: OpinionId) -> Self {
        OpinionSet(o.bit())
    }

    pub fn from_opinions<I: IntoIterator<Item = OpinionId>>(opinions: I) -> Result<Self> {
        Self::from_mask(opinions.into_iter().fold(0, |acc, o| acc | o.bit()))
    }

    /// State stored at dense index `idx`.
    pub fn from_index(idx: usize) -> Self {
        OpinionSet(idx as u32 + 1)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        state_index(self.0)
    }

    pub fn contains(self, o: OpinionId) -> bool {
        self.0 & o.bit() != 0
    }

    pub fn with(self, o: OpinionId) -> Self {
        OpinionSet(self.0 | o.bit())
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(self) -> bool {
        false
    }

    pub fn is_singleton(self) -> bool {
        self.0.is_power_of_two()
    }

    /// Highest opinion index plus one.
    pub fn span(self) -> usize {
        32 - self.0.leading_zeros() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = OpinionId> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let bit = rest.trailing_zeros();
            rest &= rest - 1;
            Some(OpinionId(bit))
        })
    }
}

impl TryFrom<u32> for OpinionSet {
    type Error = Error;

    fn try_from(mask: u32) -> Result<Self> {
        Self::from_mask(mask)
    }
}

impl From<OpinionSet> for u32 {
    fn from(s: OpinionSet) -> u32 {
        s.0
    }
}

impl fmt::Display for OpinionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in self.iter() {
            write!(f, "{o}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleVariant {
    /// Both parties may update.
    Original,
    /// Only the listener updates.
    ListenerOnly,
}

impl RuleVariant {
    pub fn updates_speaker(self) -> bool {
        matches!(self, RuleVariant::Original)
    }
}

impl fmt::Display for RuleVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleVariant::Original => "original",
            RuleVariant::ListenerOnly => "listener_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Uncommitted,
    Committed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteractionOutcome {
    pub new_speaker: OpinionSet,
    pub new_listener: OpinionSet,
    pub success: bool,
}

/// Probability of each opinion being uttered by `speaker`: uniform over its members.
pub fn utterance_distribution(speaker: OpinionSet) -> Vec<(OpinionId, f64)> {
    let p = 1.0 / speaker.len() as f64;
    speaker.iter().map(|o| (o, p)).collect()
}

/// Mask-level interaction rule without contract checks; the simulation hot path.
///
/// Returns `(new_speaker, new_listener, success)`.
#[inline]
pub fn interact_masks(
    speaker: u32,
    listener: u32,
    uttered_bit: u32,
    update_speaker: bool,
    speaker_committed: bool,
    listener_committed: bool,
) -> (u32, u32, bool) {
    if listener & uttered_bit != 0 {
        let s = if update_speaker && !speaker_committed { uttered_bit } else { speaker };
        let l = if listener_committed { listener } else { uttered_bit };
        (s, l, true)
    } else {
        let l = if listener_committed { listener } else { listener | uttered_bit };
        (speaker, l, false)
    }
}

/// Applies one speaker-to-listener interaction.
///
/// Committed parties must hold a singleton and never change. A committed
/// listener that already holds the uttered opinion still signals success, so
/// an uncommitted speaker collapses onto it under [`RuleVariant::Original`].
pub fn apply_interaction(
    speaker: OpinionSet,
    listener: OpinionSet,
    uttered: OpinionId,
    variant: RuleVariant,
    speaker_committed: bool,
    listener_committed: bool,
) -> Result<InteractionOutcome> {
    if !speaker.contains(uttered) {
        return Err(Error::contract(format!(
            "speaker {speaker} cannot utter {uttered}"
        )));
    }
    if speaker_committed && !speaker.is_singleton() {
        return Err(Error::contract(format!("committed speaker holds {speaker}")));
    }
    if listener_committed && !listener.is_singleton() {
        return Err(Error::contract(format!("committed listener holds {listener}")));
    }
    let (s, l, success) = interact_masks(
        speaker.mask(),
        listener.mask(),
        uttered.bit(),
        variant.updates_speaker(),
        speaker_committed,
        listener_committed,
    );
    Ok(InteractionOutcome {
        new_speaker: OpinionSet(s),
        new_listener: OpinionSet(l),
        success,
    })
}

/// One ordered (speaker, listener, utterance) event of the mean-field pairing.
///
/// Per unit time a pair is drawn with probability equal to the product of the
/// two parties' densities; the utterance then occurs with `probability`. The
/// `delta` lists the signed change in the count of uncommitted agents per
/// opinion-state index (gain minus loss), with zero entries omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTerm {
    pub speaker: OpinionSet,
    pub listener: OpinionSet,
    pub speaker_role: Role,
    pub listener_role: Role,
    pub uttered: OpinionId,
    pub probability: f64,
    pub delta: Vec<(usize, i32)>,
}

impl RateTerm {
    /// Density of the speaker party under state `x` and committed fractions `committed`.
    pub fn speaker_density(&self, x: &[f64], committed: &[f64]) -> f64 {
        party_density(self.speaker, self.speaker_role, x, committed)
    }

    pub fn listener_density(&self, x: &[f64], committed: &[f64]) -> f64 {
        party_density(self.listener, self.listener_role, x, committed)
    }
}

fn party_density(set: OpinionSet, role: Role, x: &[f64], committed: &[f64]) -> f64 {
    match role {
        Role::Uncommitted => x[set.index()],
        Role::Committed => committed[set.iter().next().unwrap().index()],
    }
}

/// Enumerates every ordered pairing of parties with every possible utterance.
///
/// Parties are the `2^m - 1` uncommitted states followed by the `m` committed
/// singletons. Terms are yielded lazily; the full list for `m` has
/// `(2^m - 1 + m)^2 * O(m)` entries.
pub fn interaction_rate_terms(
    m: usize,
    variant: RuleVariant,
) -> Result<impl Iterator<Item = RateTerm>> {
    interaction_rate_terms_capped(m, variant, DEFAULT_M_MAX)
}

pub fn interaction_rate_terms_capped(
    m: usize,
    variant: RuleVariant,
    m_max: usize,
) -> Result<impl Iterator<Item = RateTerm>> {
    check_m(m, m_max)?;
    let n_states = state_count(m);
    let n_parties = n_states + m;
    let party = move |p: usize| -> (OpinionSet, Role) {
        if p < n_states {
            (OpinionSet::from_index(p), Role::Uncommitted)
        } else {
            (OpinionSet::singleton(OpinionId((p - n_states) as u32)), Role::Committed)
        }
    };
    Ok((0..n_parties).flat_map(move |sp| {
        (0..n_parties).flat_map(move |lp| {
            let (speaker, speaker_role) = party(sp);
            let (listener, listener_role) = party(lp);
            let probability = 1.0 / speaker.len() as f64;
            speaker.iter().map(move |uttered| {
                let s_committed = speaker_role == Role::Committed;
                let l_committed = listener_role == Role::Committed;
                let (s, l, _) = interact_masks(
                    speaker.mask(),
                    listener.mask(),
                    uttered.bit(),
                    variant.updates_speaker(),
                    s_committed,
                    l_committed,
                );
                let mut delta: Vec<(usize, i32)> = Vec::with_capacity(4);
                let mut bump = |mask: u32, d: i32| {
                    let k = state_index(mask);
                    match delta.iter_mut().find(|(i, _)| *i == k) {
                        Some(e) => e.1 += d,
                        None => delta.push((k, d)),
                    }
                };
                if !s_committed && s != speaker.mask() {
                    bump(speaker.mask(), -1);
                    bump(s, 1);
                }
                if !l_committed && l != listener.mask() {
                    bump(listener.mask(), -1);
                    bump(l, 1);
                }
                delta.retain(|&(_, d)| d != 0);
                delta.sort_unstable();
                RateTerm {
                    speaker,
                    listener,
                    speaker_role,
                    listener_role,
                    uttered,
                    probability,
                    delta,
                }
            })
        })
    }))
}

pub(crate) fn check_m(m: usize, m_max: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::contract("need at least one opinion"));
    }
    if m > m_max.min(MAX_OPINIONS) {
        return Err(Error::ResourceLimit(format!(
            "m = {m} exceeds the full-enumeration cap of {}",
            m_max.min(MAX_OPINIONS)
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[u32]) -> OpinionSet {
        OpinionSet::from_opinions(ids.iter().map(|&i| OpinionId(i))).unwrap()
    }

    #[test]
    fn utterance_is_uniform() {
        assert_eq!(utterance_distribution(set(&[0])), vec![(OpinionId(0), 1.0)]);
        assert_eq!(
            utterance_distribution(set(&[0, 1])),
            vec![(OpinionId(0), 0.5), (OpinionId(1), 0.5)]
        );
        let three = utterance_distribution(set(&[0, 1, 2]));
        assert_eq!(three.len(), 3);
        for (_, p) in &three {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((three.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(OpinionSet::from_mask(0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn sport_example_success() {
        // soccer=0, cricket=1, rugby=2, basketball=3
        let out = apply_interaction(
            set(&[0, 1, 2]),
            set(&[0, 3]),
            OpinionId(0),
            RuleVariant::Original,
            false,
            false,
        )
        .unwrap();
        assert_eq!(out.new_speaker, set(&[0]));
        assert_eq!(out.new_listener, set(&[0]));
        assert!(out.success);
    }

    #[test]
    fn committed_listener_collapses_speaker() {
        let out = apply_interaction(
            set(&[0, 1]),
            set(&[1]),
            OpinionId(1),
            RuleVariant::Original,
            false,
            true,
        )
        .unwrap();
        assert_eq!(out.new_speaker, set(&[1]));
        assert_eq!(out.new_listener, set(&[1]));
        assert!(out.success);
    }

    #[test]
    fn listener_only_failure_adds() {
        let out = apply_interaction(
            set(&[0]),
            set(&[1]),
            OpinionId(0),
            RuleVariant::ListenerOnly,
            false,
            false,
        )
        .unwrap();
        assert_eq!(out.new_speaker, set(&[0]));
        assert_eq!(out.new_listener, set(&[0, 1]));
        assert!(!out.success);
    }

    #[test]
    fn committed_listener_never_adds() {
        let out = apply_interaction(
            set(&[0]),
            set(&[1]),
            OpinionId(0),
            RuleVariant::Original,
            false,
            true,
        )
        .unwrap();
        assert_eq!(out.new_listener, set(&[1]));
        assert!(!out.success);
    }

    #[test]
    fn contract_violations() {
        let bad_utter = apply_interaction(
            set(&[0]),
            set(&[1]),
            OpinionId(1),
            RuleVariant::Original,
            false,
            false,
        );
        assert!(matches!(bad_utter, Err(Error::Contract(_))));
        let bad_committed = apply_interaction(
            set(&[0, 1]),
            set(&[1]),
            OpinionId(0),
            RuleVariant::Original,
            true,
            false,
        );
        assert!(matches!(bad_committed, Err(Error::Contract(_))));
    }

    #[test]
    fn single_opinion_terms_are_inert() {
        for variant in [RuleVariant::Original, RuleVariant::ListenerOnly] {
            let terms: Vec<_> = interaction_rate_terms(1, variant).unwrap().collect();
            assert_eq!(terms.len(), 4);
            assert!(terms.iter().all(|t| t.delta.is_empty()));
        }
    }

    #[test]
    fn outcome_probabilities_sum_to_one_per_pair() {
        use std::collections::HashMap;
        let mut totals: HashMap<(u32, Role, u32, Role), f64> = HashMap::new();
        for t in interaction_rate_terms(3, RuleVariant::Original).unwrap() {
            *totals
                .entry((t.speaker.mask(), t.speaker_role, t.listener.mask(), t.listener_role))
                .or_default() += t.probability;
        }
        assert_eq!(totals.len(), (7 + 3) * (7 + 3));
        for p in totals.values() {
            assert!((p - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn oversized_m_is_a_resource_error() {
        assert!(matches!(
            interaction_rate_terms(21, RuleVariant::Original).map(|_| ()),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn labels() {
        assert_eq!(set(&[0, 1]).to_string(), "AB");
        assert_eq!(set(&[2, 3]).to_string(), "C1C2");
    }
}
