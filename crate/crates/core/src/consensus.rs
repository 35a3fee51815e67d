//! Hierarchical approver/verifier consensus over a topology snapshot.
//!
//! Signatures are a stand-in: a keyed SHA-256 digest reduced into the additive
//! group Z_p with p = 2^128 - 159. Aggregation is addition mod p. The final
//! check compares each side's released aggregate with the aggregate
//! recomputed over the canonical payload, so it passes exactly when every
//! participant signed the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{kcore_decomposition, ActuatorGraph};
use crate::time::Timestamp;

/// 2^128 - 159, the largest prime below 2^128.
pub const GROUP_MODULUS: u128 = u128::MAX - 158;

pub const VALID_MESSAGE: &str = "Verification is valid!";
pub const REPEAT_MESSAGE: &str = "Repeat Process!";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConsensusError {
    #[error("role counts must be at least 1 (approvers {approvers}, verifiers {verifiers})")]
    ZeroCount { approvers: usize, verifiers: usize },
    #[error("{requested} role holders requested but the graph has {available} nodes")]
    CountsExceedNodes { requested: usize, available: usize },
    #[error("maximum coreness is {k_max}; a two-tier k-core split needs at least 2")]
    NoTwoTier { k_max: usize },
    #[error("the coreness-{shell} shell is empty; fall back to degree-based roles")]
    EmptyApproverShell { shell: usize },
    #[error("assignment is not runnable: {0}")]
    Unrunnable(String),
}

impl ConsensusError {
    /// The k-core split failed in a way the degree strategy can cover.
    pub fn is_fallback_signal(&self) -> bool {
        matches!(self, ConsensusError::EmptyApproverShell { .. } | ConsensusError::NoTwoTier { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoleStrategy {
    DegreeMode,
    KCoreShell,
}

impl fmt::Display for RoleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleStrategy::DegreeMode => "degree",
            RoleStrategy::KCoreShell => "kcore",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub approvers: BTreeSet<u32>,
    pub verifiers: BTreeSet<u32>,
    pub idle: BTreeSet<u32>,
    pub strategy: RoleStrategy,
    pub snapshot_time: Option<Timestamp>,
}

impl RoleAssignment {
    pub fn is_runnable(&self) -> bool {
        !self.approvers.is_empty()
            && !self.verifiers.is_empty()
            && self.approvers.is_disjoint(&self.verifiers)
    }

    pub fn with_time(mut self, t: Timestamp) -> Self {
        self.snapshot_time = Some(t);
        self
    }
}

/// Default role counts: ⌈10%⌉ approvers and ⌈5%⌉ verifiers.
pub fn default_role_counts(node_count: usize) -> (usize, usize) {
    let approvers = (node_count * 10).div_ceil(100).max(1);
    let verifiers = (node_count * 5).div_ceil(100).max(1);
    (approvers, verifiers)
}

/// Most frequent degree; the largest one when several tie.
fn modal_degree(g: &ActuatorGraph) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..g.node_count() {
        *counts.entry(g.degree(i)).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(d, _)| d)
        .unwrap_or(0)
}

/// Nodes closest to the modal degree take the roles: verifiers first, then approvers.
pub fn assign_roles_degree(
    g: &ActuatorGraph,
    approver_count: usize,
    verifier_count: usize,
) -> Result<RoleAssignment, ConsensusError> {
    if approver_count == 0 || verifier_count == 0 {
        return Err(ConsensusError::ZeroCount {
            approvers: approver_count,
            verifiers: verifier_count,
        });
    }
    let n = g.node_count();
    if approver_count + verifier_count > n {
        return Err(ConsensusError::CountsExceedNodes {
            requested: approver_count + verifier_count,
            available: n,
        });
    }
    let mode = modal_degree(g);
    let mut ranking: Vec<usize> = (0..n).collect();
    ranking.sort_by_key(|&i| {
        let d = g.degree(i);
        (d.abs_diff(mode), std::cmp::Reverse(d), g.node_ids()[i])
    });
    let ids = |range: std::ops::Range<usize>| -> BTreeSet<u32> {
        ranking[range].iter().map(|&i| g.node_ids()[i]).collect()
    };
    Ok(RoleAssignment {
        verifiers: ids(0..verifier_count),
        approvers: ids(verifier_count..verifier_count + approver_count),
        idle: ids(verifier_count + approver_count..n),
        strategy: RoleStrategy::DegreeMode,
        snapshot_time: None,
    })
}

/// Verifiers are the innermost core, approvers the shell just below it.
pub fn assign_roles_kcore(g: &ActuatorGraph) -> Result<RoleAssignment, ConsensusError> {
    let coreness = kcore_decomposition(g);
    let k_max = coreness.iter().copied().max().unwrap_or(0);
    if k_max < 2 {
        return Err(ConsensusError::NoTwoTier { k_max });
    }
    let mut assignment = RoleAssignment {
        approvers: BTreeSet::new(),
        verifiers: BTreeSet::new(),
        idle: BTreeSet::new(),
        strategy: RoleStrategy::KCoreShell,
        snapshot_time: None,
    };
    for (i, &k) in coreness.iter().enumerate() {
        let id = g.node_ids()[i];
        if k == k_max {
            assignment.verifiers.insert(id);
        } else if k == k_max - 1 {
            assignment.approvers.insert(id);
        } else {
            assignment.idle.insert(id);
        }
    }
    if assignment.approvers.is_empty() {
        return Err(ConsensusError::EmptyApproverShell { shell: k_max - 1 });
    }
    Ok(assignment)
}

/// Per-node signing key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeKey(pub [u8; 32]);

impl NodeKey {
    /// Deterministic key for `node_id` under a run seed.
    pub fn derive(seed: u64, node_id: u32) -> Self {
        let mut h = Sha256::new();
        h.update(b"sda-node-key");
        h.update(seed.to_le_bytes());
        h.update(node_id.to_le_bytes());
        Self(h.finalize().into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureShare {
    pub node_id: u32,
    pub value: u128,
    pub payload_digest: [u8; 32],
}

pub fn payload_digest(payload: &[u8]) -> [u8; 32] {
    Sha256::digest(payload).into()
}

fn add_mod(a: u128, b: u128) -> u128 {
    let (s, overflow) = a.overflowing_add(b);
    if overflow || s >= GROUP_MODULUS {
        s.wrapping_sub(GROUP_MODULUS)
    } else {
        s
    }
}

/// Sum of share values in Z_p.
pub fn aggregate<'a>(shares: impl IntoIterator<Item = &'a SignatureShare>) -> u128 {
    shares.into_iter().fold(0, |acc, s| add_mod(acc, s.value))
}

/// Keyed digest of the payload, reduced mod p.
pub fn sign(node_id: u32, key: &NodeKey, payload: &[u8]) -> SignatureShare {
    let digest = payload_digest(payload);
    let mut h = Sha256::new();
    h.update(b"sda-share");
    h.update(key.0);
    h.update(digest);
    let out: [u8; 32] = h.finalize().into();
    let raw = u128::from_be_bytes(out[..16].try_into().expect("16 bytes"));
    let value = if raw >= GROUP_MODULUS {
        raw - GROUP_MODULUS
    } else {
        raw
    };
    SignatureShare {
        node_id,
        value,
        payload_digest: digest,
    }
}

/// What a participant signs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Behavior {
    #[default]
    Honest,
    /// Signs these bytes instead of the payload.
    Tamper(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Approval,
    Verification,
    Check,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Valid,
    Repeat,
}

impl Outcome {
    pub fn message(self) -> &'static str {
        match self {
            Outcome::Valid => VALID_MESSAGE,
            Outcome::Repeat => REPEAT_MESSAGE,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCost {
    pub approval_msgs: usize,
    pub verification_msgs: usize,
    pub total: usize,
}

/// One broadcast per role holder per phase.
pub fn message_cost(assignment: &RoleAssignment) -> MessageCost {
    let approval_msgs = assignment.approvers.len();
    let verification_msgs = assignment.verifiers.len();
    MessageCost {
        approval_msgs,
        verification_msgs,
        total: approval_msgs + verification_msgs,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRound {
    pub payload: Vec<u8>,
    pub assignment: RoleAssignment,
    pub approver_shares: Vec<SignatureShare>,
    pub verifier_shares: Vec<SignatureShare>,
    /// Verifiers whose recomputation of the approver aggregate matched.
    pub approval_confirmations: usize,
    phase: Phase,
    outcome: Option<Outcome>,
    seed: u64,
}

impl ConsensusRound {
    pub fn new(payload: Vec<u8>, assignment: RoleAssignment, seed: u64) -> Result<Self, ConsensusError> {
        if !assignment.is_runnable() {
            return Err(ConsensusError::Unrunnable(
                "approvers and verifiers must be non-empty and disjoint".into(),
            ));
        }
        Ok(Self {
            payload,
            assignment,
            approver_shares: Vec::new(),
            verifier_shares: Vec::new(),
            approval_confirmations: 0,
            phase: Phase::Approval,
            outcome: None,
            seed,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Set only once the round reaches [`Phase::Done`].
    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    fn expected(&self, ids: &BTreeSet<u32>) -> u128 {
        let shares: Vec<SignatureShare> = ids
            .iter()
            .map(|&id| sign(id, &NodeKey::derive(self.seed, id), &self.payload))
            .collect();
        aggregate(&shares)
    }

    fn signed_view(&self, id: u32, behavior: &BTreeMap<u32, Behavior>) -> SignatureShare {
        let key = NodeKey::derive(self.seed, id);
        match behavior.get(&id) {
            Some(Behavior::Tamper(bytes)) => sign(id, &key, bytes),
            _ => sign(id, &key, &self.payload),
        }
    }

    /// Runs the current phase and moves to the next one.
    pub fn advance(&mut self, behavior: &BTreeMap<u32, Behavior>) -> Phase {
        match self.phase {
            Phase::Approval => {
                self.approver_shares = self
                    .assignment
                    .approvers
                    .iter()
                    .map(|&id| self.signed_view(id, behavior))
                    .collect();
                self.phase = Phase::Verification;
            }
            Phase::Verification => {
                let released = aggregate(&self.approver_shares);
                let expected = self.expected(&self.assignment.approvers);
                self.approval_confirmations = if released == expected {
                    self.assignment.verifiers.len()
                } else {
                    0
                };
                self.verifier_shares = self
                    .assignment
                    .verifiers
                    .iter()
                    .map(|&id| self.signed_view(id, behavior))
                    .collect();
                self.phase = Phase::Check;
            }
            Phase::Check => {
                let approvers_ok = aggregate(&self.approver_shares) == self.expected(&self.assignment.approvers);
                let verifiers_ok = aggregate(&self.verifier_shares) == self.expected(&self.assignment.verifiers);
                self.outcome = Some(if approvers_ok && verifiers_ok {
                    Outcome::Valid
                } else {
                    Outcome::Repeat
                });
                self.phase = Phase::Done;
            }
            Phase::Done => {}
        }
        self.phase
    }
}

/// Runs all three phases. Role holders must be nodes of `g`.
pub fn run_round(
    payload: &[u8],
    assignment: &RoleAssignment,
    g: &ActuatorGraph,
    behavior: &BTreeMap<u32, Behavior>,
    seed: u64,
) -> Result<ConsensusRound, ConsensusError> {
    let known: BTreeSet<u32> = g.node_ids().iter().copied().collect();
    if let Some(stray) = assignment
        .approvers
        .iter()
        .chain(&assignment.verifiers)
        .find(|id| !known.contains(id))
    {
        return Err(ConsensusError::Unrunnable(format!(
            "node {stray} is not in the snapshot graph"
        )));
    }
    let mut round = ConsensusRound::new(payload.to_vec(), assignment.clone(), seed)?;
    while round.advance(behavior) != Phase::Done {}
    Ok(round)
}

/// Line-delimited record of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub timestamp: Option<String>,
    pub strategy: String,
    pub approvers: Vec<u32>,
    pub verifiers: Vec<u32>,
    pub outcome: String,
    pub approval_msgs: usize,
    pub verification_msgs: usize,
    pub total_msgs: usize,
}

impl RoundTranscript {
    pub fn from_round(round: &ConsensusRound) -> Self {
        let cost = message_cost(&round.assignment);
        Self {
            timestamp: round.assignment.snapshot_time.map(|t| t.to_iso8601()),
            strategy: round.assignment.strategy.to_string(),
            approvers: round.assignment.approvers.iter().copied().collect(),
            verifiers: round.assignment.verifiers.iter().copied().collect(),
            outcome: round
                .outcome()
                .map(|o| o.message().to_string())
                .unwrap_or_default(),
            approval_msgs: cost.approval_msgs,
            verification_msgs: cost.verification_msgs,
            total_msgs: cost.total,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k4_pendant_path() -> ActuatorGraph {
        ActuatorGraph::unweighted(6, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5)]).unwrap()
    }

    fn k4_with_triangle() -> ActuatorGraph {
        ActuatorGraph::unweighted(6, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (5, 3)]).unwrap()
    }

    #[test]
    fn modulus_is_two_to_128_minus_159() {
        assert_eq!(GROUP_MODULUS, (u128::MAX - 159) + 1);
    }

    #[test]
    fn add_mod_wraps() {
        let a = GROUP_MODULUS - 1;
        assert_eq!(add_mod(a, 1), 0);
        assert_eq!(add_mod(a, a), GROUP_MODULUS - 2);
        assert_eq!(add_mod(3, 4), 7);
    }

    #[test]
    fn star_degree_roles() {
        let g = star(6);
        let r = assign_roles_degree(&g, 1, 1).unwrap();
        assert_eq!(r.verifiers, BTreeSet::from([1]));
        assert_eq!(r.approvers, BTreeSet::from([2]));
        assert_eq!(r.idle.len(), 5);
    }

    #[test]
    fn regular_graph_roles_follow_ids() {
        let r = assign_roles_degree(&cycle(8), 2, 2).unwrap();
        assert_eq!(r.verifiers, BTreeSet::from([0, 1]));
        assert_eq!(r.approvers, BTreeSet::from([2, 3]));
    }

    #[test]
    fn degree_roles_errors() {
        let g = cycle(4);
        assert_eq!(
            assign_roles_degree(&g, 3, 2),
            Err(ConsensusError::CountsExceedNodes { requested: 5, available: 4 })
        );
        assert!(matches!(assign_roles_degree(&g, 0, 1), Err(ConsensusError::ZeroCount { .. })));
    }

    #[test]
    fn modal_degree_prefers_larger_on_tie() {
        // Degrees: 0:3, 1:2, 2:2, 3:3, 4:1 ... build a graph with tied modes 2 and 3.
        let g = ActuatorGraph::unweighted(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        // degrees 3,2,3,2
        assert_eq!(modal_degree(&g), 3);
    }

    #[test]
    fn kcore_roles_with_empty_shell() {
        let err = assign_roles_kcore(&k4_pendant_path()).unwrap_err();
        assert_eq!(err, ConsensusError::EmptyApproverShell { shell: 2 });
        assert!(err.is_fallback_signal());
    }

    #[test]
    fn kcore_roles_two_tiers() {
        let r = assign_roles_kcore(&k4_with_triangle()).unwrap();
        assert_eq!(r.verifiers, BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(r.approvers, BTreeSet::from([4, 5]));
        assert!(r.idle.is_empty());
    }

    #[test]
    fn kcore_on_tree_fails() {
        assert_eq!(
            assign_roles_kcore(&path(5)),
            Err(ConsensusError::NoTwoTier { k_max: 1 })
        );
    }

    #[test]
    fn signing_is_deterministic_and_keyed() {
        let k1 = NodeKey::derive(7, 1);
        let k2 = NodeKey::derive(7, 2);
        assert_eq!(sign(1, &k1, b"obs"), sign(1, &k1, b"obs"));
        assert_ne!(sign(1, &k1, b"obs").value, sign(2, &k2, b"obs").value);
        assert!(sign(1, &k1, b"obs").value < GROUP_MODULUS);
    }

    #[test]
    fn one_bit_flip_changes_share() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let key = NodeKey::derive(1, 1);
        for _ in 0..1000 {
            let len = rng.gen_range(1..64);
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let mut flipped = payload.clone();
            let bit = rng.gen_range(0..len * 8);
            flipped[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(sign(1, &key, &payload).value, sign(1, &key, &flipped).value);
        }
    }

    #[test]
    fn message_costs() {
        let mut r = assign_roles_degree(&cycle(10), 3, 2).unwrap();
        assert_eq!(
            message_cost(&r),
            MessageCost { approval_msgs: 3, verification_msgs: 2, total: 5 }
        );
        r = assign_roles_degree(&cycle(10), 1, 1).unwrap();
        assert_eq!(message_cost(&r).total, 2);
    }

    #[test]
    fn honest_round_is_valid() {
        let g = k4_with_triangle();
        let a = assign_roles_kcore(&g).unwrap();
        let round = run_round(b"track 42", &a, &g, &BTreeMap::new(), 9).unwrap();
        assert_eq!(round.phase(), Phase::Done);
        assert_eq!(round.outcome(), Some(Outcome::Valid));
        assert_eq!(round.outcome().unwrap().to_string(), "Verification is valid!");
        assert_eq!(round.approval_confirmations, 4);
    }

    #[test]
    fn tampering_forces_repeat() {
        let g = k4_with_triangle();
        let a = assign_roles_kcore(&g).unwrap();
        for liar in [4u32, 1] {
            let behavior = BTreeMap::from([(liar, Behavior::Tamper(b"track 43".to_vec()))]);
            let round = run_round(b"track 42", &a, &g, &behavior, 9).unwrap();
            assert_eq!(round.outcome(), Some(Outcome::Repeat));
            assert_eq!(round.outcome().unwrap().to_string(), "Repeat Process!");
        }
    }

    #[test]
    fn phases_move_forward_only() {
        let a = assign_roles_degree(&cycle(6), 2, 1).unwrap();
        let mut round = ConsensusRound::new(b"x".to_vec(), a, 0).unwrap();
        let none = BTreeMap::new();
        assert_eq!(round.outcome(), None);
        assert_eq!(round.advance(&none), Phase::Verification);
        assert_eq!(round.outcome(), None);
        assert_eq!(round.advance(&none), Phase::Check);
        assert_eq!(round.advance(&none), Phase::Done);
        assert_eq!(round.advance(&none), Phase::Done);
        assert_eq!(round.outcome(), Some(Outcome::Valid));
    }

    #[test]
    fn unrunnable_assignments_rejected() {
        let mut a = assign_roles_degree(&cycle(6), 2, 1).unwrap();
        a.verifiers.clear();
        assert!(matches!(
            ConsensusRound::new(vec![], a, 0),
            Err(ConsensusError::Unrunnable(_))
        ));
        let mut b = assign_roles_degree(&cycle(6), 2, 1).unwrap();
        b.approvers.insert(99);
        assert!(matches!(
            run_round(b"x", &b, &cycle(6), &BTreeMap::new(), 0),
            Err(ConsensusError::Unrunnable(_))
        ));
    }

    #[test]
    fn transcript_line() {
        let g = k4_with_triangle();
        let a = assign_roles_kcore(&g).unwrap().with_time(Timestamp::from_millis(0));
        let round = run_round(b"p", &a, &g, &BTreeMap::new(), 1).unwrap();
        let line = RoundTranscript::from_round(&round).to_json_line();
        assert_eq!(
            line,
            r#"{"timestamp":"1970-01-01T00:00:00.000Z","strategy":"kcore","approvers":[4,5],"verifiers":[0,1,2,3],"outcome":"Verification is valid!","approval_msgs":2,"verification_msgs":4,"total_msgs":6}"#
        );
    }

    #[test]
    fn default_counts_round_up() {
        assert_eq!(default_role_counts(256), (26, 13));
        assert_eq!(default_role_counts(4), (1, 1));
        assert_eq!(default_role_counts(20), (2, 1));
    }
}
