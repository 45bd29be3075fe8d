//! Replicated secret sharing over XOR for arbitrary access structures, and
//! cut-and-choose verifiable sharing on top of it.
//!
//! For an access structure `Z` let `T_1..T_m` be its maximal unqualified
//! sets. The dealer draws one random replica per `T_j` subject to the XOR of
//! all replicas equalling the secret, and hands replica `j` to every player
//! outside `T_j`. A coalition holds every replica iff it is contained in no
//! `T_j`, i.e. iff it is qualified; any unqualified coalition misses at least
//! one uniformly random replica and learns nothing.

use std::fmt::{self, Write as _};
use std::ops::BitXor;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::rng::{coin, fill_random};
use crate::structures::{self, FamilyKind, MonotoneFamily, PlayerId, PlayerSet, StructureError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SharingError {
    #[error("the empty set is qualified; nothing can be kept secret")]
    DegenerateAccess,
    #[error("no set is qualified")]
    EmptyAccess,
    #[error("expected an access structure")]
    NotAccessStructure,
    #[error("coalition {coalition} is not qualified (misses replica {missing})")]
    NotQualified { coalition: PlayerSet, missing: PlayerSet },
    #[error("coalition holds conflicting copies of replica {tag}")]
    Inconsistent { tag: PlayerSet },
    #[error("bundles differ in access structure, length or replica tags")]
    Mismatch,
    #[error("secret length {0} is invalid")]
    BadLength(usize),
    #[error("player {player} does not hold replica {tag}")]
    NotHeld { player: PlayerId, tag: PlayerSet },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A fixed-length bit string, the group element being shared.
///
/// Bit `i` lives in byte `i / 8` at position `i % 8`; unused high bits of
/// the last byte are always zero.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SecretValue {
    len: usize,
    bytes: SmallVec<[u8; 8]>,
}

impl SecretValue {
    pub fn zeros(len: usize) -> SecretValue {
        SecretValue { len, bytes: SmallVec::from_elem(0, len.div_ceil(8)) }
    }

    pub fn from_bits(bits: &[bool]) -> SecretValue {
        let mut v = SecretValue::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set_bit(i, b);
        }
        v
    }

    /// The low `len` bits of `value`.
    pub fn from_u64(value: u64, len: usize) -> SecretValue {
        assert!(len <= 64);
        let mut v = SecretValue::zeros(len);
        for i in 0..len {
            v.set_bit(i, (value >> i) & 1 == 1);
        }
        v
    }

    pub fn bit_value(b: bool) -> SecretValue {
        SecretValue::from_bits(&[b])
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> SecretValue {
        let mut v = SecretValue::zeros(len);
        fill_random(rng, &mut v.bytes);
        v.mask();
        v
    }

    fn mask(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.bytes[i / 8] >> (i % 8)) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, b: bool) {
        assert!(i < self.len);
        if b {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    /// The value as an integer; only for `len <= 64`.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        (0..self.len).fold(0, |acc, i| acc | ((self.bit(i) as u64) << i))
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|&b| b == 0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn xor(&self, other: &SecretValue) -> SecretValue {
        assert_eq!(self.len, other.len, "xor of values with different lengths");
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect();
        SecretValue { len: self.len, bytes }
    }

    pub fn xor_assign(&mut self, other: &SecretValue) {
        assert_eq!(self.len, other.len, "xor of values with different lengths");
        for (a, b) in self.bytes.iter_mut().zip(&other.bytes) {
            *a ^= b;
        }
    }

    /// The value with its lowest bit flipped; a minimal nonzero change.
    pub fn perturbed(&self) -> SecretValue {
        let mut v = self.clone();
        v.set_bit(0, !v.bit(0));
        v
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn from_hex(len: usize, text: &str) -> Result<SecretValue, SharingError> {
        let bytes = hex::decode(text).map_err(|_| SharingError::BadLength(len))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(SharingError::BadLength(len));
        }
        let mut v = SecretValue { len, bytes: bytes.into_iter().collect() };
        let before = v.clone();
        v.mask();
        if v != before {
            return Err(SharingError::BadLength(len));
        }
        Ok(v)
    }
}

impl fmt::Debug for SecretValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretValue({}b:{})", self.len, self.to_hex())
    }
}

impl fmt::Display for SecretValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl BitXor for &SecretValue {
    type Output = SecretValue;

    fn bitxor(self, rhs: &SecretValue) -> SecretValue {
        self.xor(rhs)
    }
}

/// One replica value together with the maximal unqualified set it is tagged by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replica {
    pub tag: PlayerSet,
    pub value: SecretValue,
}

/// The dealing plan for one access structure: its replica tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharingScheme {
    access: MonotoneFamily,
    tags: Vec<PlayerSet>,
}

impl SharingScheme {
    pub fn new(access: &MonotoneFamily) -> Result<SharingScheme, SharingError> {
        if access.kind() != FamilyKind::Upward {
            return Err(SharingError::NotAccessStructure);
        }
        if access.contains(PlayerSet::EMPTY) {
            return Err(SharingError::DegenerateAccess);
        }
        if access.extremal().is_empty() {
            return Err(SharingError::EmptyAccess);
        }
        let tags = structures::max_unqualified(access)?;
        Ok(SharingScheme { access: access.clone(), tags })
    }

    pub fn access(&self) -> &MonotoneFamily {
        &self.access
    }

    pub fn n(&self) -> usize {
        self.access.n()
    }

    pub fn tags(&self) -> &[PlayerSet] {
        &self.tags
    }

    /// Number of random draws one dealing consumes.
    pub fn random_draws(&self) -> usize {
        self.tags.len() - 1
    }

    /// Indices of the tags held by `player`.
    pub fn held_tags(&self, player: PlayerId) -> impl Iterator<Item = usize> + '_ {
        self.tags.iter().enumerate().filter(move |(_, t)| !t.contains(player)).map(|(i, _)| i)
    }

    /// Indices of the tags held by at least one member of `coalition`.
    pub fn tags_held_by(&self, coalition: PlayerSet) -> Vec<usize> {
        self.tags.iter().enumerate().filter(|(_, t)| !coalition.is_subset(**t)).map(|(i, _)| i).collect()
    }

    pub fn deal<R: RngCore + ?Sized>(&self, secret: &SecretValue, rng: &mut R) -> Result<ShareBundle, SharingError> {
        if secret.is_empty() {
            return Err(SharingError::BadLength(0));
        }
        let mut values = Vec::with_capacity(self.tags.len());
        let mut acc = secret.clone();
        for _ in 1..self.tags.len() {
            let v = SecretValue::random(secret.len(), rng);
            acc.xor_assign(&v);
            values.push(v);
        }
        values.push(acc);
        Ok(self.bundle_from_values(values))
    }

    /// A consistent bundle with the given replica values, one per tag.
    pub fn bundle_from_values(&self, values: Vec<SecretValue>) -> ShareBundle {
        assert_eq!(values.len(), self.tags.len());
        let copies = (0..self.n())
            .map(|p| {
                self.held_tags(PlayerId(p as u8))
                    .map(|t| Held { tag: t, value: Some(values[t].clone()) })
                    .collect()
            })
            .collect();
        ShareBundle {
            access: self.access.clone(),
            secret_len: values[0].len(),
            tags: self.tags.clone(),
            values,
            copies,
        }
    }
}

/// A player's copy of one replica; `None` when the dealer withheld it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Held {
    pub tag: usize,
    pub value: Option<SecretValue>,
}

/// A dealt sharing: the dealer's replica values plus every player's copies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareBundle {
    access: MonotoneFamily,
    secret_len: usize,
    tags: Vec<PlayerSet>,
    values: Vec<SecretValue>,
    copies: Vec<Vec<Held>>,
}

/// Deals `secret` under `access`.
pub fn deal<R: RngCore + ?Sized>(secret: &SecretValue, access: &MonotoneFamily, rng: &mut R) -> Result<ShareBundle, SharingError> {
    SharingScheme::new(access)?.deal(secret, rng)
}

/// Replica-wise XOR of two bundles over the same scheme.
pub fn xor_combine(a: &ShareBundle, b: &ShareBundle) -> Result<ShareBundle, SharingError> {
    if a.access != b.access || a.secret_len != b.secret_len || a.tags != b.tags {
        return Err(SharingError::Mismatch);
    }
    let values = a.values.iter().zip(&b.values).map(|(x, y)| x ^ y).collect();
    let copies = a
        .copies
        .iter()
        .zip(&b.copies)
        .map(|(ha, hb)| {
            ha.iter()
                .zip(hb)
                .map(|(x, y)| Held {
                    tag: x.tag,
                    value: match (&x.value, &y.value) {
                        (Some(u), Some(v)) => Some(u ^ v),
                        _ => None,
                    },
                })
                .collect()
        })
        .collect();
    Ok(ShareBundle { access: a.access.clone(), secret_len: a.secret_len, tags: a.tags.clone(), values, copies })
}

impl ShareBundle {
    pub fn access(&self) -> &MonotoneFamily {
        &self.access
    }

    pub fn n(&self) -> usize {
        self.access.n()
    }

    pub fn secret_len(&self) -> usize {
        self.secret_len
    }

    pub fn tags(&self) -> &[PlayerSet] {
        &self.tags
    }

    /// The dealer's value for tag index `t`.
    pub fn value(&self, t: usize) -> &SecretValue {
        &self.values[t]
    }

    pub fn values(&self) -> &[SecretValue] {
        &self.values
    }

    pub fn replicas(&self) -> impl Iterator<Item = Replica> + '_ {
        self.tags.iter().zip(&self.values).map(|(t, v)| Replica { tag: *t, value: v.clone() })
    }

    /// The dealer's intended secret (XOR of its replica values).
    pub fn secret(&self) -> SecretValue {
        let mut acc = SecretValue::zeros(self.secret_len);
        for v in &self.values {
            acc.xor_assign(v);
        }
        acc
    }

    pub fn held_by(&self, player: PlayerId) -> &[Held] {
        &self.copies[player.index()]
    }

    pub fn copy(&self, player: PlayerId, t: usize) -> Option<&SecretValue> {
        self.copies[player.index()].iter().find(|h| h.tag == t).and_then(|h| h.value.as_ref())
    }

    fn held_mut(&mut self, player: PlayerId, t: usize) -> Result<&mut Held, SharingError> {
        let tag = self.tags[t];
        self.copies[player.index()]
            .iter_mut()
            .find(|h| h.tag == t)
            .ok_or(SharingError::NotHeld { player, tag })
    }

    /// Replaces one player's copy of replica `t`.
    pub fn tamper(&mut self, player: PlayerId, t: usize, value: SecretValue) -> Result<(), SharingError> {
        self.held_mut(player, t)?.value = Some(value);
        Ok(())
    }

    /// Removes one player's copy of replica `t`.
    pub fn withhold(&mut self, player: PlayerId, t: usize) -> Result<(), SharingError> {
        self.held_mut(player, t)?.value = None;
        Ok(())
    }

    /// Every copy equals the dealer's value.
    pub fn is_consistent(&self) -> bool {
        self.copies.iter().flatten().all(|h| h.value.as_ref() == Some(&self.values[h.tag]))
    }

    /// Players holding a copy that differs from the dealer's value (or none at all).
    pub fn inconsistent_players(&self) -> PlayerSet {
        let mut out = PlayerSet::EMPTY;
        for (p, held) in self.copies.iter().enumerate() {
            if held.iter().any(|h| h.value.as_ref() != Some(&self.values[h.tag])) {
                out = out.insert(PlayerId(p as u8));
            }
        }
        out
    }

    pub fn view(&self, coalition: PlayerSet) -> CoalitionView {
        let mut copies = Vec::new();
        for p in coalition.members() {
            for h in &self.copies[p.index()] {
                if let Some(v) = &h.value {
                    copies.push((h.tag, v.clone()));
                }
            }
        }
        CoalitionView { coalition, tags: self.tags.clone(), copies }
    }

    /// Reconstructs from the copies held by `coalition`.
    pub fn reconstruct(&self, coalition: PlayerSet) -> Result<SecretValue, SharingError> {
        self.view(coalition).reconstruct()
    }

    /// Line-oriented text form: `replica <tag> <hex>` per tag, then
    /// `holds <player> <tag>` per held copy, then `copy <player> <tag>
    /// <hex|->` for every copy that differs from the dealer's value. Tags are
    /// four lowercase hex digits of the player bitmask.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (t, v) in self.tags.iter().zip(&self.values) {
            let _ = writeln!(out, "replica {:04x} {}", t.bits(), v.to_hex());
        }
        for (p, held) in self.copies.iter().enumerate() {
            for h in held {
                let _ = writeln!(out, "holds {} {:04x}", p, self.tags[h.tag].bits());
            }
        }
        for (p, held) in self.copies.iter().enumerate() {
            for h in held {
                match &h.value {
                    Some(v) if *v == self.values[h.tag] => {}
                    Some(v) => {
                        let _ = writeln!(out, "copy {} {:04x} {}", p, self.tags[h.tag].bits(), v.to_hex());
                    }
                    None => {
                        let _ = writeln!(out, "copy {} {:04x} -", p, self.tags[h.tag].bits());
                    }
                }
            }
        }
        out
    }
}

/// The copies a coalition holds, possibly extended by published replicas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionView {
    coalition: PlayerSet,
    tags: Vec<PlayerSet>,
    copies: Vec<(usize, SecretValue)>,
}

impl CoalitionView {
    pub fn coalition(&self) -> PlayerSet {
        self.coalition
    }

    /// Adds publicly known replica values.
    pub fn with_public<'a, I>(mut self, public: I) -> CoalitionView
    where
        I: IntoIterator<Item = (usize, &'a SecretValue)>,
    {
        for (t, v) in public {
            self.copies.push((t, v.clone()));
        }
        self
    }

    pub fn reconstruct(&self) -> Result<SecretValue, SharingError> {
        let mut chosen: Vec<Option<&SecretValue>> = vec![None; self.tags.len()];
        for (t, v) in &self.copies {
            match chosen[*t] {
                None => chosen[*t] = Some(v),
                Some(prev) if prev != v => return Err(SharingError::Inconsistent { tag: self.tags[*t] }),
                Some(_) => {}
            }
        }
        let mut acc: Option<SecretValue> = None;
        for (t, v) in chosen.iter().enumerate() {
            let v = v.ok_or(SharingError::NotQualified { coalition: self.coalition, missing: self.tags[t] })?;
            match &mut acc {
                None => acc = Some(v.clone()),
                Some(a) => a.xor_assign(v),
            }
        }
        acc.ok_or(SharingError::NotQualified { coalition: self.coalition, missing: PlayerSet::EMPTY })
    }
}

/// How the dealer behaves during verifiable sharing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DealerBehavior {
    Honest,
    /// One copy of the secret's replica `tag` given to `player` is wrong; the
    /// dealer otherwise answers from its own values.
    Misdeal { player: PlayerId, tag: usize },
    /// As `Misdeal`, but each round the dealer bets on the challenge and
    /// corrupts the auxiliary copy so the bet-on opening checks out.
    AdaptiveMisdeal { player: PlayerId, tag: usize },
}

/// Who flips the challenge coins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChallengeSource {
    /// A designated verifier; when `colluding` the dealer learns each
    /// challenge before dealing the auxiliary sharing.
    DesignatedVerifier { verifier: PlayerId, colluding: bool },
    PublicCoin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VssRound {
    /// The sharing of the fresh random secret `z`.
    pub aux: ShareBundle,
    /// `false`: open `z`; `true`: open `z ⊕ m`.
    pub challenge: bool,
    /// Published replica values, one per tag.
    pub opened: Vec<SecretValue>,
    pub complaints: PlayerSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VssTranscript {
    pub source: ChallengeSource,
    pub rounds: Vec<VssRound>,
}

impl VssTranscript {
    pub fn complaints(&self) -> PlayerSet {
        self.rounds.iter().fold(PlayerSet::EMPTY, |acc, r| acc.union(r.complaints))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VssVerdict {
    Accept,
    Reject { round: usize, complainers: PlayerSet },
}

/// Openings for one challenge, taken from the dealer's own values.
pub fn open_round(secret: &ShareBundle, aux: &ShareBundle, challenge: bool) -> Vec<SecretValue> {
    aux.values()
        .iter()
        .zip(secret.values())
        .map(|(z, m)| if challenge { z ^ m } else { z.clone() })
        .collect()
}

/// Players whose copies contradict the openings.
///
/// `secret_copy(p, t)` gives player `p`'s current copy of the secret's
/// replica `t`.
pub fn check_round<'a, F>(aux: &ShareBundle, challenge: bool, opened: &[SecretValue], secret_copy: F) -> PlayerSet
where
    F: Fn(PlayerId, usize) -> Option<&'a SecretValue>,
{
    let mut out = PlayerSet::EMPTY;
    for p in 0..aux.n() {
        let player = PlayerId(p as u8);
        let bad = aux.held_by(player).iter().any(|h| {
            let Some(z) = &h.value else { return true };
            if challenge {
                match secret_copy(player, h.tag) {
                    Some(m) => z.xor(m) != opened[h.tag],
                    None => true,
                }
            } else {
                *z != opened[h.tag]
            }
        });
        if bad {
            out = out.insert(player);
        }
    }
    out
}

/// Deals `secret` and runs `k` cut-and-choose rounds with every player checking.
pub fn vss_deal<D, V>(
    secret: &SecretValue,
    access: &MonotoneFamily,
    k: usize,
    behavior: DealerBehavior,
    source: ChallengeSource,
    dealer_rng: &mut D,
    verifier_rng: &mut V,
) -> Result<(ShareBundle, VssTranscript, VssVerdict), SharingError>
where
    D: RngCore + ?Sized,
    V: RngCore + ?Sized,
{
    let scheme = SharingScheme::new(access)?;
    let mut bundle = scheme.deal(secret, dealer_rng)?;
    if let DealerBehavior::Misdeal { player, tag } | DealerBehavior::AdaptiveMisdeal { player, tag } = behavior {
        let wrong = bundle.value(tag).perturbed();
        bundle.tamper(player, tag, wrong)?;
    }
    let mut rounds = Vec::with_capacity(k);
    let mut verdict = VssVerdict::Accept;
    for round in 0..k {
        let foreknown = match source {
            ChallengeSource::DesignatedVerifier { colluding: true, .. } => Some(coin(verifier_rng)),
            _ => None,
        };
        let mut aux = scheme.deal(&SecretValue::random(secret.len(), dealer_rng), dealer_rng)?;
        if let DealerBehavior::AdaptiveMisdeal { player, tag } = behavior {
            let bet = match foreknown {
                Some(c) => c,
                None => coin(dealer_rng),
            };
            if bet {
                // Shift the player's z copy by the copy error so z ⊕ m checks out.
                let held_m = bundle.copy(player, tag).expect("tampered copy exists");
                let delta = held_m ^ bundle.value(tag);
                let shifted = aux.value(tag) ^ &delta;
                aux.tamper(player, tag, shifted)?;
            }
        }
        let challenge = match foreknown {
            Some(c) => c,
            None => coin(verifier_rng),
        };
        let opened = open_round(&bundle, &aux, challenge);
        let complaints = check_round(&aux, challenge, &opened, |p, t| bundle.copy(p, t));
        if !complaints.is_empty() && verdict == VssVerdict::Accept {
            verdict = VssVerdict::Reject { round, complainers: complaints };
        }
        rounds.push(VssRound { aux, challenge, opened, complaints });
    }
    Ok((bundle, VssTranscript { source, rounds }, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, TapeRng};
    use crate::structures::{dual_access, threshold_structure};
    use rand::rngs::mock::StepRng;
    use std::collections::BTreeMap;

    fn two_of_three() -> MonotoneFamily {
        dual_access(&threshold_structure(3, 1).unwrap()).unwrap()
    }

    fn ps(p: &[usize]) -> PlayerSet {
        PlayerSet::from_players(p.iter().copied())
    }

    #[test]
    fn secret_value_basics() {
        let v = SecretValue::from_u64(0b1011, 4);
        assert_eq!(v.bits(), vec![true, true, false, true]);
        assert_eq!(v.to_u64(), 0b1011);
        assert_eq!(v.to_hex(), "0b");
        assert_eq!(SecretValue::from_hex(4, "0b").unwrap(), v);
        assert!(SecretValue::from_hex(4, "1b").is_err());
        assert!((&v ^ &v).is_zero());
        let mut r = seeded(3);
        for len in [1, 7, 8, 13, 32] {
            let x = SecretValue::random(len, &mut r);
            assert_eq!(SecretValue::from_hex(len, &x.to_hex()).unwrap(), x);
        }
    }

    #[test]
    fn deal_two_of_three() {
        let z = two_of_three();
        let b = deal(&SecretValue::bit_value(true), &z, &mut seeded(1)).unwrap();
        assert_eq!(b.tags(), &[ps(&[0]), ps(&[1]), ps(&[2])]);
        assert_eq!(b.secret(), SecretValue::bit_value(true));
        let held: Vec<PlayerSet> = b.held_by(PlayerId(0)).iter().map(|h| b.tags()[h.tag]).collect();
        assert_eq!(held, vec![ps(&[1]), ps(&[2])]);
        assert!(b.is_consistent());
    }

    #[test]
    fn zero_secret_zero_randomness() {
        let z = two_of_three();
        let b = deal(&SecretValue::zeros(8), &z, &mut StepRng::new(0, 0)).unwrap();
        assert!(b.values().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn all_players_access() {
        let z = MonotoneFamily::access(2, [PlayerSet::full(2)]).unwrap();
        let b = deal(&SecretValue::bit_value(true), &z, &mut seeded(2)).unwrap();
        assert_eq!(b.tags(), &[ps(&[0]), ps(&[1])]);
        assert_eq!(b.held_by(PlayerId(0)).len(), 1);
        assert_eq!(b.held_by(PlayerId(1)).len(), 1);
    }

    #[test]
    fn deal_rejects_degenerate_access() {
        let z = MonotoneFamily::access(3, [PlayerSet::EMPTY]).unwrap();
        assert_eq!(deal(&SecretValue::zeros(1), &z, &mut seeded(0)), Err(SharingError::DegenerateAccess));
        let empty = MonotoneFamily::access(3, []).unwrap();
        assert_eq!(deal(&SecretValue::zeros(1), &empty, &mut seeded(0)), Err(SharingError::EmptyAccess));
        let adv = threshold_structure(3, 1).unwrap();
        assert_eq!(deal(&SecretValue::zeros(1), &adv, &mut seeded(0)), Err(SharingError::NotAccessStructure));
    }

    #[test]
    fn reconstruct_cases() {
        let z = two_of_three();
        let secret = SecretValue::from_u64(0xa5, 8);
        let mut b = deal(&secret, &z, &mut seeded(5)).unwrap();
        assert_eq!(b.reconstruct(ps(&[0, 1])).unwrap(), secret);
        assert!(matches!(b.reconstruct(ps(&[0])), Err(SharingError::NotQualified { .. })));
        // Players 0 and 1 both hold replica {2}.
        let t = 2;
        let wrong = b.value(t).perturbed();
        b.tamper(PlayerId(1), t, wrong).unwrap();
        assert_eq!(b.reconstruct(ps(&[0, 1])), Err(SharingError::Inconsistent { tag: ps(&[2]) }));
        assert!(b.tamper(PlayerId(2), t, SecretValue::zeros(8)).is_err());
    }

    #[test]
    fn combine_examples() {
        let z = two_of_three();
        let mut r = seeded(9);
        let m = SecretValue::from_u64(0x3c, 8);
        let zz = SecretValue::from_u64(0x81, 8);
        let bm = deal(&m, &z, &mut r).unwrap();
        let bz = deal(&zz, &z, &mut r).unwrap();
        let all = PlayerSet::full(3);
        assert_eq!(xor_combine(&bm, &bz).unwrap().reconstruct(all).unwrap(), &m ^ &zz);
        assert!(xor_combine(&bm, &bm).unwrap().reconstruct(all).unwrap().is_zero());
        let b0 = deal(&SecretValue::zeros(8), &z, &mut r).unwrap();
        assert_eq!(xor_combine(&b0, &bz).unwrap().reconstruct(all).unwrap(), zz);
        let other = deal(&SecretValue::zeros(4), &z, &mut r).unwrap();
        assert_eq!(xor_combine(&bm, &other), Err(SharingError::Mismatch));
    }

    #[test]
    fn serialization_is_stable() {
        let z = two_of_three();
        let mut b = SharingScheme::new(&z).unwrap().bundle_from_values(vec![
            SecretValue::from_u64(1, 1),
            SecretValue::from_u64(0, 1),
            SecretValue::from_u64(0, 1),
        ]);
        b.tamper(PlayerId(0), 1, SecretValue::from_u64(1, 1)).unwrap();
        b.withhold(PlayerId(2), 0).unwrap();
        let text = b.serialize();
        let expected = "replica 0001 01\nreplica 0002 00\nreplica 0004 00\n\
holds 0 0002\nholds 0 0004\nholds 1 0001\nholds 1 0004\nholds 2 0001\nholds 2 0002\n\
copy 0 0002 01\ncopy 2 0001 -\n";
        assert_eq!(text, expected);
    }

    /// Exact privacy: every unqualified coalition sees the same multiset of
    /// views for secret 0 and secret 1, over every access structure on up to
    /// four players.
    #[test]
    fn unqualified_views_are_secret_independent() {
        for n in 1..=4 {
            for adv in structures::all_adversary_structures(n).unwrap() {
                let access = adv.dual();
                let Ok(scheme) = SharingScheme::new(&access) else { continue };
                let bits = scheme.random_draws() as u32;
                for c in PlayerSet::all(n).filter(|c| !access.contains(*c)) {
                    let mut dist: [BTreeMap<Vec<(usize, SecretValue)>, u32>; 2] = Default::default();
                    for (s, d) in dist.iter_mut().enumerate() {
                        for tape in 0..(1u64 << bits) {
                            let b = scheme.deal(&SecretValue::bit_value(s == 1), &mut TapeRng::new(tape, bits)).unwrap();
                            *d.entry(b.view(c).copies).or_default() += 1;
                        }
                    }
                    assert_eq!(dist[0], dist[1], "coalition {c} under {access}");
                }
                for c in PlayerSet::all(n).filter(|c| access.contains(*c)) {
                    let b = scheme.deal(&SecretValue::bit_value(true), &mut seeded(n as u64)).unwrap();
                    assert_eq!(b.reconstruct(c).unwrap(), SecretValue::bit_value(true));
                }
            }
        }
    }

    #[test]
    fn vss_honest_accepts() {
        let z = two_of_three();
        for k in [0, 1, 8] {
            let (b, t, v) = vss_deal(
                &SecretValue::from_u64(0x5a, 8),
                &z,
                k,
                DealerBehavior::Honest,
                ChallengeSource::PublicCoin,
                &mut seeded(k as u64),
                &mut seeded(100 + k as u64),
            )
            .unwrap();
            assert_eq!(v, VssVerdict::Accept);
            assert_eq!(t.rounds.len(), k);
            assert!(b.is_consistent());
        }
    }

    #[test]
    fn vss_misdeal_caught_on_open_of_sum() {
        let z = two_of_three();
        let behavior = DealerBehavior::Misdeal { player: PlayerId(0), tag: 1 };
        let (_, t, v) = vss_deal(&SecretValue::bit_value(true), &z, 16, behavior, ChallengeSource::PublicCoin, &mut seeded(4), &mut seeded(5)).unwrap();
        for r in &t.rounds {
            assert_eq!(r.complaints.is_empty(), !r.challenge);
        }
        assert!(matches!(v, VssVerdict::Reject { complainers, .. } if complainers == ps(&[0])));
    }

    #[test]
    fn colluding_verifier_lets_adaptive_dealer_through() {
        let z = two_of_three();
        let behavior = DealerBehavior::AdaptiveMisdeal { player: PlayerId(1), tag: 0 };
        let colluding = ChallengeSource::DesignatedVerifier { verifier: PlayerId(2), colluding: true };
        let honest = ChallengeSource::DesignatedVerifier { verifier: PlayerId(2), colluding: false };
        let mut caught_public = 0;
        for seed in 0..200 {
            let (_, _, v) = vss_deal(&SecretValue::bit_value(false), &z, 8, behavior, colluding, &mut seeded(seed), &mut seeded(seed + 1000)).unwrap();
            assert_eq!(v, VssVerdict::Accept);
            let (_, _, v) = vss_deal(&SecretValue::bit_value(false), &z, 8, behavior, honest, &mut seeded(seed), &mut seeded(seed + 1000)).unwrap();
            if v != VssVerdict::Accept {
                caught_public += 1;
            }
        }
        assert!(caught_public > 190);
    }
}
