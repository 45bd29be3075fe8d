//! Bit-string commitment from secret sharing.
//!
//! The sender gives the receiver a random mask `r` over the private channel
//! and deals `m ⊕ r` to all players under the access structure
//! `Z = {Z | Z^c ∈ A}`, followed by cut-and-choose rounds whose challenges
//! the receiver issues. Unveiling is reconstruction: the sender announces
//! every replica, every honest holder confirms it, and the receiver strips
//! the mask.
//!
//! Two variants exist. [`commit_partial`] aborts on the first complaint.
//! [`commit_robust`] instead publishes the replicas of every complaining
//! player and repeats the verification rounds until the complaint set stops
//! growing; a complaint set outside `A` convicts the sender.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Endpoint, EventLog};
use crate::rng::{coin, TapeRng};
use crate::sharing::{self, ShareBundle, SecretValue, SharingError, SharingScheme, VssRound};
use crate::structures::{self, MonotoneFamily, PlayerId, PlayerSet, StructureError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitError {
    #[error("adversary structure violates the {0}")]
    InadmissibleStructure(Condition),
    #[error("strategy profile lists {got} players, structure has {expected}")]
    ProfileSize { expected: usize, got: usize },
    #[error("sender and receiver must differ")]
    SamePlayer,
    #[error("player {0} is outside the structure's player set")]
    PlayerOutOfRange(PlayerId),
    #[error("deviating players {0} do not fit inside one collusion of the structure")]
    CheatersNotInStructure(PlayerSet),
    #[error("payload must be nonempty")]
    EmptyPayload,
    #[error("exhaustive enumeration needs n <= 4, one-bit payloads and at most {max} random bits (got n={n}, len={len}, bits={bits})")]
    ScaleBound { n: usize, len: usize, bits: u32, max: u32 },
    #[error("enumerated run did not end committed: {0:?}")]
    NotCommitted(CommitStatus),
    #[error("complaint loop exceeded {0} iterations")]
    LoopBound(usize),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A precondition on the adversary structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// No two collusions cover all players.
    PartialCover,
    /// No two collusions cover all players but one.
    RobustCover,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Condition::PartialCover => f.write_str("partial-robustness condition: two collusions cover all players"),
            Condition::RobustCover => f.write_str("robustness condition: two collusions cover all players but one"),
        }
    }
}

impl Condition {
    pub fn holds(self, adversary: &MonotoneFamily) -> bool {
        match self {
            Condition::PartialCover => structures::partially_robust_admissible(adversary),
            Condition::RobustCover => structures::robust_admissible(adversary),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Partial,
    Robust,
}

impl Variant {
    pub fn condition(self) -> Condition {
        match self {
            Variant::Partial => Condition::PartialCover,
            Variant::Robust => Condition::RobustCover,
        }
    }
}

/// What one player does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    Honest,
    /// Follows the protocol but never reports a mismatch; shares its data
    /// with the rest of the collusion.
    Colluder,
    /// Broadcasts every replica copy it received.
    LeakShares,
    /// Complains in every verification round regardless of what it sees.
    FalseComplainer,
    /// As sender: announces shares of this value at unveil.
    UnveilFlipper(SecretValue),
    /// Honest during the protocol; afterwards pools its view with the
    /// coalition and tries to recover the payload.
    CoalitionReconstructor(PlayerSet),
    /// As sender: hands the listed players a wrong copy of one replica.
    Misdealer(PlayerSet),
    /// As sender: hands the listed players no shares at all.
    EmptyShares(PlayerSet),
}

impl Behavior {
    /// Deviates from the protocol while it runs.
    pub fn deviates(&self) -> bool {
        !matches!(self, Behavior::Honest | Behavior::CoalitionReconstructor(_))
    }

    /// Reports genuine mismatches it observes.
    pub fn reports(&self) -> bool {
        matches!(
            self,
            Behavior::Honest | Behavior::CoalitionReconstructor(_) | Behavior::LeakShares | Behavior::FalseComplainer
        )
    }
}

/// One behavior per player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    behaviors: Vec<Behavior>,
}

impl StrategyProfile {
    pub fn honest(n: usize) -> StrategyProfile {
        StrategyProfile { behaviors: vec![Behavior::Honest; n] }
    }

    pub fn with(mut self, player: PlayerId, behavior: Behavior) -> StrategyProfile {
        self.set(player, behavior);
        self
    }

    pub fn set(&mut self, player: PlayerId, behavior: Behavior) {
        self.behaviors[player.index()] = behavior;
    }

    pub fn n(&self) -> usize {
        self.behaviors.len()
    }

    pub fn behavior(&self, player: PlayerId) -> &Behavior {
        &self.behaviors[player.index()]
    }

    pub fn behaviors(&self) -> &[Behavior] {
        &self.behaviors
    }

    /// Players deviating while the protocol runs.
    pub fn cheaters(&self) -> PlayerSet {
        self.select(|b| b.deviates())
    }

    pub fn select(&self, pred: impl Fn(&Behavior) -> bool) -> PlayerSet {
        PlayerSet::from_players(self.behaviors.iter().enumerate().filter(|(_, b)| pred(b)).map(|(i, _)| i))
    }
}

/// Who issues verification challenges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChallengeMode {
    Receiver,
    PublicCoin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitConfig {
    pub sender: PlayerId,
    pub receiver: PlayerId,
    pub adversary: MonotoneFamily,
    /// Verification rounds per pass.
    pub rounds: usize,
    pub challenges: ChallengeMode,
}

impl CommitConfig {
    pub fn new(sender: PlayerId, receiver: PlayerId, adversary: MonotoneFamily, rounds: usize) -> CommitConfig {
        CommitConfig { sender, receiver, adversary, rounds, challenges: ChallengeMode::Receiver }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    /// A complaint in the given round (0 is initial dealing).
    Complaint { round: usize, players: PlayerSet },
    /// The receiver complained about the sender.
    PairConflict { complainers: PlayerSet },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommitStatus {
    Committed,
    Unveiled(SecretValue),
    Aborted(AbortReason),
    DealerCaught,
}

impl CommitStatus {
    pub fn label(&self) -> String {
        match self {
            CommitStatus::Committed => "committed".into(),
            CommitStatus::Unveiled(v) => format!("unveiled {}", v.to_hex()),
            CommitStatus::Aborted(AbortReason::Complaint { round, players }) => format!("aborted complaint round={round} players={players}"),
            CommitStatus::Aborted(AbortReason::PairConflict { complainers }) => format!("aborted pair-conflict complainers={complainers}"),
            CommitStatus::DealerCaught => "dealer-caught".into(),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CommitStatus::Committed => 0,
            CommitStatus::Unveiled(_) => 1,
            CommitStatus::Aborted(AbortReason::Complaint { .. }) => 2,
            CommitStatus::Aborted(AbortReason::PairConflict { .. }) => 3,
            CommitStatus::DealerCaught => 4,
        }
    }
}

/// Outcome of a post-commit pooling attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionAttempt {
    pub initiator: PlayerId,
    pub coalition: PlayerSet,
    /// The payload, when the pooled view determines it.
    pub learned: Option<SecretValue>,
}

/// Full record of one commitment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSession {
    pub variant: Variant,
    pub sender: PlayerId,
    pub receiver: PlayerId,
    pub adversary: MonotoneFamily,
    pub access: MonotoneFamily,
    pub challenges: ChallengeMode,
    pub mask: SecretValue,
    pub payload: SecretValue,
    /// The sharing of `payload ⊕ mask`, with copies as delivered.
    pub bundle: ShareBundle,
    pub vss: Vec<VssRound>,
    /// Players complaining about their initial shares.
    pub initial_complaints: PlayerSet,
    /// Accumulated complainers (the set `A` of the robust loop).
    pub complaint_set: PlayerSet,
    /// Public replica values, by tag index.
    pub published: Vec<Option<SecretValue>>,
    /// Players who broadcast their copies.
    pub leaked: PlayerSet,
    /// Passes through the complaint loop.
    pub iterations: usize,
    pub status: CommitStatus,
    pub reconstructions: Vec<ReconstructionAttempt>,
    #[serde(skip)]
    pub events: EventLog,
    #[serde(skip)]
    round: usize,
}

impl CommitSession {
    pub fn n(&self) -> usize {
        self.adversary.n()
    }

    /// A player's current copy of replica `t`: the public value once
    /// published, its own copy otherwise.
    pub fn current_copy(&self, player: PlayerId, t: usize) -> Option<&SecretValue> {
        self.published[t].as_ref().or_else(|| self.bundle.copy(player, t))
    }

    pub fn published_indices(&self) -> Vec<usize> {
        self.published.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(i, _)| i).collect()
    }

    /// No single player outside the complaint and leak sets can complete the
    /// replica set from its own copies plus the public ones.
    pub fn single_players_stay_blind(&self) -> bool {
        let tags = self.bundle.tags();
        let exposed = self.complaint_set.union(self.leaked).insert(self.sender);
        PlayerSet::full(self.n()).difference(exposed).members().all(|p| {
            (0..tags.len()).any(|t| self.published[t].is_none() && tags[t].contains(p))
        })
    }

    /// Everything `coalition` has seen, encoded canonically.
    pub fn coalition_view(&self, coalition: PlayerSet) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        let put = |out: &mut Vec<u8>, v: Option<&SecretValue>| match v {
            Some(v) => {
                out.push(1);
                out.extend_from_slice(v.as_bytes());
            }
            None => out.push(0),
        };
        if coalition.contains(self.sender) {
            put(&mut out, Some(&self.payload));
        }
        if coalition.contains(self.sender) || coalition.contains(self.receiver) {
            put(&mut out, Some(&self.mask));
        }
        for p in coalition.members() {
            for h in self.bundle.held_by(p) {
                out.push(h.tag as u8);
                put(&mut out, h.value.as_ref());
            }
        }
        for round in &self.vss {
            out.push(round.challenge as u8);
            out.extend_from_slice(&round.complaints.bits().to_le_bytes());
            for v in &round.opened {
                out.extend_from_slice(v.as_bytes());
            }
            for p in coalition.members() {
                for h in round.aux.held_by(p) {
                    put(&mut out, h.value.as_ref());
                }
            }
        }
        for v in &self.published {
            put(&mut out, v.as_ref());
        }
        out.extend_from_slice(&self.leaked.bits().to_le_bytes());
        out.extend_from_slice(&self.initial_complaints.bits().to_le_bytes());
        out.extend_from_slice(&self.complaint_set.bits().to_le_bytes());
        out.push(self.status.code());
        out.push(self.iterations as u8);
        out
    }

    /// The payload as a coalition could derive it from its pooled view and
    /// the public replicas, if at all.
    pub fn coalition_learns(&self, coalition: PlayerSet) -> Option<SecretValue> {
        if coalition.contains(self.sender) {
            return Some(self.payload.clone());
        }
        if !coalition.contains(self.receiver) {
            return None;
        }
        let public = self.published.iter().enumerate().filter_map(|(t, v)| v.as_ref().map(|v| (t, v)));
        let masked = self.bundle.view(coalition).with_public(public).reconstruct().ok()?;
        Some(&masked ^ &self.mask)
    }
}

struct Engine<'a> {
    session: CommitSession,
    scheme: SharingScheme,
    strategies: &'a StrategyProfile,
}

fn validate(variant: Variant, m: &SecretValue, config: &CommitConfig, strategies: &StrategyProfile) -> Result<(), CommitError> {
    let n = config.adversary.n();
    for p in [config.sender, config.receiver] {
        if p.index() >= n {
            return Err(CommitError::PlayerOutOfRange(p));
        }
    }
    if config.sender == config.receiver {
        return Err(CommitError::SamePlayer);
    }
    if m.is_empty() {
        return Err(CommitError::EmptyPayload);
    }
    if strategies.n() != n {
        return Err(CommitError::ProfileSize { expected: n, got: strategies.n() });
    }
    let condition = variant.condition();
    if !condition.holds(&config.adversary) {
        return Err(CommitError::InadmissibleStructure(condition));
    }
    let cheaters = strategies.cheaters();
    if !config.adversary.contains(cheaters) {
        return Err(CommitError::CheatersNotInStructure(cheaters));
    }
    Ok(())
}

impl<'a> Engine<'a> {
    fn start<R: RngCore + ?Sized>(
        variant: Variant,
        m: &SecretValue,
        config: &CommitConfig,
        strategies: &'a StrategyProfile,
        rng: &mut R,
        events: EventLog,
    ) -> Result<Engine<'a>, CommitError> {
        validate(variant, m, config, strategies)?;
        let access = structures::dual_access(&config.adversary)?;
        let scheme = SharingScheme::new(&access)?;
        let mask = SecretValue::random(m.len(), rng);
        let bundle = scheme.deal(&(m ^ &mask), rng)?;
        let tags = bundle.tags().len();
        let session = CommitSession {
            variant,
            sender: config.sender,
            receiver: config.receiver,
            adversary: config.adversary.clone(),
            access,
            challenges: config.challenges,
            mask,
            payload: m.clone(),
            bundle,
            vss: Vec::new(),
            initial_complaints: PlayerSet::EMPTY,
            complaint_set: PlayerSet::EMPTY,
            published: vec![None; tags],
            leaked: PlayerSet::EMPTY,
            iterations: 0,
            status: CommitStatus::Committed,
            reconstructions: Vec::new(),
            events,
            round: 0,
        };
        let mut engine = Engine { session, scheme, strategies };
        engine.deliver();
        Ok(engine)
    }

    fn players(&self) -> impl Iterator<Item = PlayerId> {
        PlayerSet::full(self.session.n()).members()
    }

    /// Mask to the receiver, shares to everyone, then leaks.
    fn deliver(&mut self) {
        let s = &mut self.session;
        let sender = s.sender;
        match self.strategies.behavior(sender) {
            Behavior::Misdealer(victims) => {
                for v in victims.members().filter(|v| *v != sender) {
                    if let Some(h) = s.bundle.held_by(v).first() {
                        let t = h.tag;
                        let wrong = s.bundle.value(t).perturbed();
                        s.bundle.tamper(v, t, wrong).expect("victim holds its first tag");
                    }
                }
            }
            Behavior::EmptyShares(victims) => {
                for v in victims.members().filter(|v| *v != sender) {
                    let held: Vec<usize> = s.bundle.held_by(v).iter().map(|h| h.tag).collect();
                    for t in held {
                        s.bundle.withhold(v, t).expect("victim holds the tag");
                    }
                }
            }
            _ => {}
        }
        let mask = s.mask.clone();
        s.events.msg(s.round, sender, s.receiver, "mask", mask.as_bytes());
        for p in PlayerSet::full(s.n()).members() {
            let bundle = &s.bundle;
            s.events.msg_with(s.round, sender, p, "share", || held_bytes(bundle, p));
        }
        s.round += 1;
        let leakers = self.strategies.select(|b| matches!(b, Behavior::LeakShares));
        for p in leakers.members() {
            let held: Vec<(usize, Option<SecretValue>)> = s.bundle.held_by(p).iter().map(|h| (h.tag, h.value.clone())).collect();
            for (t, v) in held {
                if let (Some(v), None) = (v, &s.published[t]) {
                    s.published[t] = Some(v);
                }
            }
            s.leaked = s.leaked.insert(p);
            let bundle = &s.bundle;
            s.events.msg_with(s.round, p, Endpoint::Broadcast, "leak", || held_bytes(bundle, p));
        }
        if !leakers.is_empty() {
            s.round += 1;
        }
        // Players missing shares complain about the initial dealing.
        let mut initial = PlayerSet::EMPTY;
        for p in PlayerSet::full(s.n()).members() {
            if p != sender && s.bundle.held_by(p).iter().any(|h| h.value.is_none()) {
                initial = initial.insert(p);
            }
        }
        s.initial_complaints = initial;
        for p in initial.members() {
            s.events.msg(s.round, p, Endpoint::Broadcast, "complaint", b"missing-share");
        }
        if !initial.is_empty() {
            s.round += 1;
        }
    }

    /// One verification round; returns the complainers.
    fn verification_round<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<PlayerSet, CommitError> {
        let len = self.session.payload.len();
        let z = SecretValue::random(len, rng);
        let aux = self.scheme.deal(&z, rng)?;
        let challenge = coin(rng);
        let s = &mut self.session;
        let sender = s.sender;
        for p in PlayerSet::full(s.n()).members() {
            s.events.msg_with(s.round, sender, p, "aux-share", || held_bytes(&aux, p));
        }
        let from = match s.challenges {
            ChallengeMode::Receiver => Endpoint::Player(s.receiver),
            ChallengeMode::PublicCoin => Endpoint::Coin,
        };
        s.events.msg(s.round, from, Endpoint::Broadcast, "challenge", &[challenge as u8]);
        let opened = server_openings(&s.bundle, &aux, challenge);
        s.events.msg_with(s.round, sender, Endpoint::Broadcast, "open", || opened.iter().flat_map(|v| v.as_bytes().to_vec()).collect());
        let mismatched = sharing::check_round(&aux, challenge, &opened, |p, t| s.published[t].as_ref().or_else(|| s.bundle.copy(p, t)));
        let reporting = self.strategies.select(|b| b.reports());
        let liars = self.strategies.select(|b| matches!(b, Behavior::FalseComplainer));
        let complaints = mismatched.intersection(reporting).union(liars).remove(sender);
        for p in complaints.members() {
            s.events.msg(s.round, p, Endpoint::Broadcast, "complaint", &[s.vss.len() as u8]);
        }
        s.round += 1;
        s.vss.push(VssRound { aux, challenge, opened, complaints });
        Ok(complaints)
    }

    fn publish_for(&mut self, complainers: PlayerSet) {
        let s = &mut self.session;
        let mut fresh = Vec::new();
        for t in self.scheme.tags_held_by(complainers) {
            if s.published[t].is_none() {
                s.published[t] = Some(s.bundle.value(t).clone());
                fresh.push(t);
            }
        }
        if !fresh.is_empty() {
            let bytes: Vec<u8> = fresh.iter().flat_map(|&t| {
                let mut b = vec![t as u8];
                b.extend_from_slice(s.bundle.value(t).as_bytes());
                b
            }).collect();
            s.events.msg(s.round, s.sender, Endpoint::Broadcast, "publish", &bytes);
            s.round += 1;
        }
    }

    fn run_partial<R: RngCore + ?Sized>(&mut self, k: usize, rng: &mut R) -> Result<(), CommitError> {
        self.session.iterations = 1;
        if !self.session.initial_complaints.is_empty() {
            self.session.complaint_set = self.session.initial_complaints;
            self.session.status = CommitStatus::Aborted(AbortReason::Complaint { round: 0, players: self.session.initial_complaints });
            return Ok(());
        }
        for j in 0..k {
            let complaints = self.verification_round(rng)?;
            if !complaints.is_empty() {
                self.session.complaint_set = complaints;
                self.session.status = CommitStatus::Aborted(AbortReason::Complaint { round: j + 1, players: complaints });
                return Ok(());
            }
        }
        Ok(())
    }

    fn run_robust<R: RngCore + ?Sized>(&mut self, k: usize, rng: &mut R) -> Result<(), CommitError> {
        let n = self.session.n();
        let mut complained = self.session.initial_complaints;
        self.publish_for(complained);
        loop {
            let before = complained;
            self.session.iterations += 1;
            if self.session.iterations > n + 1 {
                return Err(CommitError::LoopBound(n + 1));
            }
            for _ in 0..k {
                complained = complained.union(self.verification_round(rng)?);
            }
            self.session.complaint_set = complained;
            if !self.session.adversary.contains(complained) {
                self.session.status = CommitStatus::DealerCaught;
                return Ok(());
            }
            if complained.contains(self.session.receiver) {
                self.session.status = CommitStatus::Aborted(AbortReason::PairConflict { complainers: complained });
                return Ok(());
            }
            self.publish_for(complained);
            if complained == before {
                return Ok(());
            }
        }
    }

    fn finish(mut self) -> CommitSession {
        if self.session.status == CommitStatus::Committed {
            for p in self.players().collect::<Vec<_>>() {
                if let Behavior::CoalitionReconstructor(c) = self.strategies.behavior(p) {
                    let coalition = c.insert(p);
                    let learned = self.session.coalition_learns(coalition);
                    let s = &mut self.session;
                    let tag: &[u8] = if learned.is_some() { b"learned" } else { b"blind" };
                    s.events.msg(s.round, p, p, "reconstruct", tag);
                    s.reconstructions.push(ReconstructionAttempt { initiator: p, coalition, learned });
                }
            }
        }
        let label = self.session.status.label();
        self.session.events.verdict(&label);
        self.session
    }
}

fn server_openings(bundle: &ShareBundle, aux: &ShareBundle, challenge: bool) -> Vec<SecretValue> {
    sharing::open_round(bundle, aux, challenge)
}

fn held_bytes(bundle: &ShareBundle, p: PlayerId) -> Vec<u8> {
    let mut out = Vec::new();
    for h in bundle.held_by(p) {
        out.push(h.tag as u8);
        match &h.value {
            Some(v) => out.extend_from_slice(v.as_bytes()),
            None => out.push(0xff),
        }
    }
    out
}

fn run<R: RngCore + ?Sized>(
    variant: Variant,
    m: &SecretValue,
    config: &CommitConfig,
    strategies: &StrategyProfile,
    rng: &mut R,
    events: EventLog,
) -> Result<CommitSession, CommitError> {
    let mut engine = Engine::start(variant, m, config, strategies, rng, events)?;
    match variant {
        Variant::Partial => engine.run_partial(config.rounds, rng)?,
        Variant::Robust => engine.run_robust(config.rounds, rng)?,
    }
    Ok(engine.finish())
}

/// Commitment that aborts on any complaint.
pub fn commit_partial<R: RngCore + ?Sized>(
    m: &SecretValue,
    config: &CommitConfig,
    strategies: &StrategyProfile,
    rng: &mut R,
) -> Result<CommitSession, CommitError> {
    run(Variant::Partial, m, config, strategies, rng, EventLog::new())
}

/// Commitment that publishes complainers' replicas instead of aborting.
pub fn commit_robust<R: RngCore + ?Sized>(
    m: &SecretValue,
    config: &CommitConfig,
    strategies: &StrategyProfile,
    rng: &mut R,
) -> Result<CommitSession, CommitError> {
    run(Variant::Robust, m, config, strategies, rng, EventLog::new())
}

/// Either variant, with or without event logging.
pub fn commit<R: RngCore + ?Sized>(
    variant: Variant,
    m: &SecretValue,
    config: &CommitConfig,
    strategies: &StrategyProfile,
    rng: &mut R,
    log: bool,
) -> Result<CommitSession, CommitError> {
    let events = if log { EventLog::new() } else { EventLog::disabled() };
    run(variant, m, config, strategies, rng, events)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnveilError {
    #[error("session is not in the committed state: {0:?}")]
    NotCommitted(CommitStatus),
    #[error("announcement has {got} replicas, expected {expected}")]
    WrongShape { expected: usize, got: usize },
    #[error("player {player} contradicts announced replica {tag}")]
    Rejected { tag: PlayerSet, player: PlayerId },
}

/// The sender's truthful announcement.
pub fn honest_announcement(session: &CommitSession) -> Vec<SecretValue> {
    session.bundle.values().to_vec()
}

/// An announcement that reconstructs to `target` instead of the payload.
///
/// The difference goes into the replica held by the fewest honest players.
pub fn flip_announcement(session: &CommitSession, strategies: &StrategyProfile, target: &SecretValue) -> Vec<SecretValue> {
    let mut values = honest_announcement(session);
    let delta = target ^ &session.payload;
    if delta.is_zero() {
        return values;
    }
    let honest = strategies.select(|b| b.reports());
    let tags = session.bundle.tags();
    let t = (0..tags.len())
        .min_by_key(|&t| tags[t].complement(session.n()).intersection(honest).len())
        .expect("at least one tag");
    values[t].xor_assign(&delta);
    values
}

/// Reveals the commitment from an announcement of every replica.
///
/// Each reporting player checks the announced value of every replica it
/// holds; on full confirmation the receiver strips its mask.
pub fn unveil(session: &mut CommitSession, announced: &[SecretValue], strategies: &StrategyProfile) -> Result<SecretValue, UnveilError> {
    if session.status != CommitStatus::Committed {
        return Err(UnveilError::NotCommitted(session.status.clone()));
    }
    let tags = session.bundle.tags().to_vec();
    if announced.len() != tags.len() {
        return Err(UnveilError::WrongShape { expected: tags.len(), got: announced.len() });
    }
    let round = session.round;
    session.events.msg_with(round, session.sender, Endpoint::Broadcast, "announce", || {
        announced.iter().flat_map(|v| v.as_bytes().to_vec()).collect()
    });
    let reporting = strategies.select(|b| b.reports()).remove(session.sender);
    for (t, value) in announced.iter().enumerate() {
        for p in tags[t].complement(session.n()).intersection(reporting).members() {
            if let Some(own) = session.current_copy(p, t) {
                if own != value {
                    session.events.msg(round + 1, p, Endpoint::Broadcast, "contradict", &[t as u8]);
                    session.events.verdict("rejected");
                    return Err(UnveilError::Rejected { tag: tags[t], player: p });
                }
            }
        }
    }
    let mut masked = SecretValue::zeros(session.payload.len());
    for v in announced {
        masked.xor_assign(v);
    }
    let value = &masked ^ &session.mask;
    session.status = CommitStatus::Unveiled(value.clone());
    let label = session.status.label();
    session.events.verdict(&label);
    Ok(value)
}

/// Unveils with whatever the sender's behavior dictates.
pub fn unveil_per_strategy(session: &mut CommitSession, strategies: &StrategyProfile) -> Result<SecretValue, UnveilError> {
    let announced = match strategies.behavior(session.sender) {
        Behavior::UnveilFlipper(target) => flip_announcement(session, strategies, target),
        _ => honest_announcement(session),
    };
    unveil(session, &announced, strategies)
}

/// When the coalition's view is collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewPhase {
    /// While the protocol runs; every enumerated execution counts.
    DuringCommit,
    /// After termination; every enumerated execution must end committed.
    AfterCommit,
}

/// A commitment with everything fixed but the payload and the randomness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitTemplate {
    pub variant: Variant,
    pub config: CommitConfig,
    pub strategies: StrategyProfile,
}

/// Exact view multisets of one coalition for payload 0 and payload 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDistribution {
    pub coalition: PlayerSet,
    pub phase: ViewPhase,
    pub runs_per_payload: u64,
    pub given_zero: BTreeMap<Vec<u8>, u64>,
    pub given_one: BTreeMap<Vec<u8>, u64>,
}

impl ViewDistribution {
    pub fn identical(&self) -> bool {
        self.given_zero == self.given_one
    }
}

/// Largest tape length enumerated exhaustively.
pub const MAX_ENUMERATION_BITS: u32 = 22;

/// Number of random bits one execution of `template` consumes with a
/// one-bit payload.
pub fn random_bits(template: &CommitTemplate) -> Result<u32, CommitError> {
    let mut counter = TapeRng::counter();
    run(template.variant, &SecretValue::bit_value(false), &template.config, &template.strategies, &mut counter, EventLog::disabled())?;
    Ok(counter.consumed())
}

/// Enumerates every execution for payloads 0 and 1 and records the view of
/// each listed coalition at its phase, in one pass over all tapes.
pub fn view_distributions(template: &CommitTemplate, queries: &[(PlayerSet, ViewPhase)]) -> Result<Vec<ViewDistribution>, CommitError> {
    let n = template.config.adversary.n();
    let bits = random_bits(template)?;
    if n > 4 || bits > MAX_ENUMERATION_BITS {
        return Err(CommitError::ScaleBound { n, len: 1, bits, max: MAX_ENUMERATION_BITS });
    }
    let mut out: Vec<ViewDistribution> = queries
        .iter()
        .map(|&(c, phase)| ViewDistribution { coalition: c, phase, runs_per_payload: 1 << bits, given_zero: BTreeMap::new(), given_one: BTreeMap::new() })
        .collect();
    for payload in [false, true] {
        let m = SecretValue::bit_value(payload);
        for tape in 0..(1u64 << bits) {
            let mut rng = TapeRng::new(tape, bits);
            let session = run(template.variant, &m, &template.config, &template.strategies, &mut rng, EventLog::disabled())?;
            debug_assert!(!rng.overrun() && rng.consumed() == bits);
            for d in out.iter_mut() {
                if d.phase == ViewPhase::AfterCommit && session.status != CommitStatus::Committed {
                    return Err(CommitError::NotCommitted(session.status));
                }
                let view = session.coalition_view(d.coalition);
                let map = if payload { &mut d.given_one } else { &mut d.given_zero };
                *map.entry(view).or_default() += 1;
            }
        }
    }
    Ok(out)
}

/// Exact view distribution of one coalition; `n <= 4` and one-bit payloads.
pub fn coalition_view_distribution(template: &CommitTemplate, coalition: PlayerSet, phase: ViewPhase) -> Result<ViewDistribution, CommitError> {
    Ok(view_distributions(template, &[(coalition, phase)])?.remove(0))
}
