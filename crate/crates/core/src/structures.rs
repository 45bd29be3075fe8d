//! Set algebra over players.
//!
//! Adversary structures (subset-closed) and access structures
//! (superset-closed) are both represented by a [`MonotoneFamily`] holding
//! only its extremal sets. Player sets are bitmasks over at most
//! [`MAX_PLAYERS`] players, so every family operation here is an exhaustive
//! enumeration over extremal sets or over the full power set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported player count.
pub const MAX_PLAYERS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("player count {0} exceeds the supported maximum of {MAX_PLAYERS}")]
    SizeBound(usize),
    #[error("threshold {t} exceeds player count {n}")]
    ThresholdTooLarge { n: usize, t: usize },
    #[error("player {player} out of range for {n} players")]
    PlayerOutOfRange { player: usize, n: usize },
    #[error("{0} is not a maximal set of the structure")]
    NotMaximal(PlayerSet),
    #[error("expected a {expected:?} family")]
    WrongKind { expected: FamilyKind },
    #[error("families are over different player counts ({0} vs {1})")]
    PlayerCountMismatch(usize, usize),
    #[error("cannot parse structure literal: {0}")]
    Parse(String),
}

/// A player index `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlayerId(pub u8);

impl PlayerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A subset of players as a bitmask (bit `i` set iff player `i` is a member).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct PlayerSet(pub u16);

impl PlayerSet {
    pub const EMPTY: PlayerSet = PlayerSet(0);

    /// All players `0..n`.
    pub fn full(n: usize) -> PlayerSet {
        debug_assert!(n <= MAX_PLAYERS);
        if n == MAX_PLAYERS {
            PlayerSet(u16::MAX)
        } else {
            PlayerSet(((1u32 << n) - 1) as u16)
        }
    }

    pub fn singleton(p: PlayerId) -> PlayerSet {
        PlayerSet(1 << p.0)
    }

    pub fn from_players<I: IntoIterator<Item = usize>>(players: I) -> PlayerSet {
        PlayerSet(players.into_iter().fold(0u16, |acc, p| acc | (1 << p)))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn contains(self, p: PlayerId) -> bool {
        self.0 & (1 << p.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: PlayerSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_superset(self, other: PlayerSet) -> bool {
        other.is_subset(self)
    }

    pub fn union(self, other: PlayerSet) -> PlayerSet {
        PlayerSet(self.0 | other.0)
    }

    pub fn intersection(self, other: PlayerSet) -> PlayerSet {
        PlayerSet(self.0 & other.0)
    }

    pub fn difference(self, other: PlayerSet) -> PlayerSet {
        PlayerSet(self.0 & !other.0)
    }

    pub fn insert(self, p: PlayerId) -> PlayerSet {
        PlayerSet(self.0 | (1 << p.0))
    }

    pub fn remove(self, p: PlayerId) -> PlayerSet {
        PlayerSet(self.0 & !(1 << p.0))
    }

    /// Complement relative to the ambient set of `n` players.
    pub fn complement(self, n: usize) -> PlayerSet {
        PlayerSet(!self.0 & PlayerSet::full(n).0)
    }

    /// Members in increasing order.
    pub fn members(self) -> impl Iterator<Item = PlayerId> {
        let bits = self.0;
        (0..MAX_PLAYERS as u8).filter(move |i| bits & (1 << i) != 0).map(PlayerId)
    }

    /// All subsets of `0..n`, in increasing bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = PlayerSet> {
        (0..(1u32 << n)).map(|b| PlayerSet(b as u16))
    }

    /// All subsets of `self` (including `self` and the empty set).
    pub fn subsets(self) -> impl Iterator<Item = PlayerSet> {
        let full = self.0;
        let mut next = Some(0u16);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(PlayerSet(cur))
        })
    }
}

impl fmt::Display for PlayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.members().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Subset-closed: an adversary structure.
    Downward,
    /// Superset-closed: an access structure.
    Upward,
}

/// A monotone family of player sets stored by its extremal sets.
///
/// For a `Downward` family the extremal sets are the maximal members; for an
/// `Upward` family they are the minimal members. The list is always an
/// antichain sorted by bitmask. A `Downward` family always contains the empty
/// set; an `Upward` family with no extremal sets is the empty family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonotoneFamily {
    n: usize,
    kind: FamilyKind,
    extremal: Vec<PlayerSet>,
}

impl MonotoneFamily {
    /// Builds a family, absorbing duplicates and dominated sets.
    pub fn new<I>(n: usize, kind: FamilyKind, sets: I) -> Result<MonotoneFamily, StructureError>
    where
        I: IntoIterator<Item = PlayerSet>,
    {
        if n > MAX_PLAYERS {
            return Err(StructureError::SizeBound(n));
        }
        let full = PlayerSet::full(n);
        let mut sets: Vec<PlayerSet> = sets.into_iter().collect();
        for s in &sets {
            if !s.is_subset(full) {
                let player = s.difference(full).members().next().map_or(0, |p| p.index());
                return Err(StructureError::PlayerOutOfRange { player, n });
            }
        }
        sets.sort();
        sets.dedup();
        let extremal: Vec<PlayerSet> = sets
            .iter()
            .copied()
            .filter(|s| {
                !sets.iter().any(|o| {
                    o != s
                        && match kind {
                            FamilyKind::Downward => s.is_subset(*o),
                            FamilyKind::Upward => s.is_superset(*o),
                        }
                })
            })
            .collect();
        let extremal = if extremal.is_empty() && kind == FamilyKind::Downward {
            vec![PlayerSet::EMPTY]
        } else {
            extremal
        };
        Ok(MonotoneFamily { n, kind, extremal })
    }

    pub fn adversary<I: IntoIterator<Item = PlayerSet>>(n: usize, sets: I) -> Result<MonotoneFamily, StructureError> {
        MonotoneFamily::new(n, FamilyKind::Downward, sets)
    }

    pub fn access<I: IntoIterator<Item = PlayerSet>>(n: usize, sets: I) -> Result<MonotoneFamily, StructureError> {
        MonotoneFamily::new(n, FamilyKind::Upward, sets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn extremal(&self) -> &[PlayerSet] {
        &self.extremal
    }

    pub fn players(&self) -> PlayerSet {
        PlayerSet::full(self.n)
    }

    pub fn contains(&self, s: PlayerSet) -> bool {
        match self.kind {
            FamilyKind::Downward => self.extremal.iter().any(|e| s.is_subset(*e)),
            FamilyKind::Upward => self.extremal.iter().any(|e| s.is_superset(*e)),
        }
    }

    /// Every member of the family, in increasing bitmask order.
    pub fn members(&self) -> impl Iterator<Item = PlayerSet> + '_ {
        PlayerSet::all(self.n).filter(move |s| self.contains(*s))
    }

    pub fn is_maximal(&self, s: PlayerSet) -> bool {
        self.kind == FamilyKind::Downward && self.extremal.contains(&s)
    }

    /// `true` iff every extremal set of `self` lies in `other`.
    pub fn is_subfamily_of(&self, other: &MonotoneFamily) -> bool {
        self.n == other.n && self.kind == other.kind && self.extremal.iter().all(|e| other.contains(*e))
    }

    /// Complements every extremal set and flips the kind. An involution.
    pub fn dual(&self) -> MonotoneFamily {
        let kind = match self.kind {
            FamilyKind::Downward => FamilyKind::Upward,
            FamilyKind::Upward => FamilyKind::Downward,
        };
        let sets = self.extremal.iter().map(|e| e.complement(self.n));
        MonotoneFamily::new(self.n, kind, sets).expect("complements stay in range")
    }

    /// The literal form accepted by [`FromStr`].
    pub fn literal(&self) -> String {
        let body: Vec<String> = self
            .extremal
            .iter()
            .map(|e| e.members().map(|p| p.to_string()).collect::<Vec<_>>().join(" "))
            .collect();
        let head = match self.kind {
            FamilyKind::Downward => "sets",
            FamilyKind::Upward => "access",
        };
        format!("{head}({}; {})", self.n, body.join(", "))
    }

    fn require(&self, kind: FamilyKind) -> Result<(), StructureError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(StructureError::WrongKind { expected: kind })
        }
    }
}

impl fmt::Display for MonotoneFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.literal())
    }
}

/// Downward family whose maximal sets are all `t`-subsets of `n` players.
pub fn threshold_structure(n: usize, t: usize) -> Result<MonotoneFamily, StructureError> {
    if n > MAX_PLAYERS {
        return Err(StructureError::SizeBound(n));
    }
    if t > n {
        return Err(StructureError::ThresholdTooLarge { n, t });
    }
    let sets = PlayerSet::all(n).filter(|s| s.len() == t);
    MonotoneFamily::adversary(n, sets)
}

/// Finds two members of `a` whose union covers `target`.
///
/// Only extremal sets are tried: if any two members cover, so do the maximal
/// sets above them.
pub fn two_sets_cover(a: &MonotoneFamily, target: PlayerSet) -> Option<(PlayerSet, PlayerSet)> {
    debug_assert_eq!(a.kind, FamilyKind::Downward);
    let ext = &a.extremal;
    for (i, x) in ext.iter().enumerate() {
        for y in &ext[i..] {
            if target.is_subset(x.union(*y)) {
                return Some((*x, *y));
            }
        }
    }
    None
}

/// No two collusions cover all players.
pub fn partially_robust_admissible(a: &MonotoneFamily) -> bool {
    two_sets_cover(a, a.players()).is_none()
}

/// No two collusions cover all players but one, for any choice of that player.
pub fn robust_admissible(a: &MonotoneFamily) -> bool {
    let all = a.players();
    all.members().all(|p| two_sets_cover(a, all.remove(p)).is_none())
}

/// The access structure `{Z | Z^c ∈ A}`.
pub fn dual_access(a: &MonotoneFamily) -> Result<MonotoneFamily, StructureError> {
    a.require(FamilyKind::Downward)?;
    Ok(a.dual())
}

/// Maximal sets outside an access structure.
///
/// Returns an empty list when the empty set is already qualified.
pub fn max_unqualified(z: &MonotoneFamily) -> Result<Vec<PlayerSet>, StructureError> {
    z.require(FamilyKind::Upward)?;
    if z.contains(PlayerSet::EMPTY) {
        return Ok(Vec::new());
    }
    let all = z.players();
    Ok(PlayerSet::all(z.n)
        .filter(|s| !z.contains(*s))
        .filter(|s| all.difference(*s).members().all(|p| z.contains(s.insert(p))))
        .collect())
}

/// The family `{A^c | A ∉ adversary}`, which is subset-closed.
pub fn complements_of_outsiders(a: &MonotoneFamily) -> Result<MonotoneFamily, StructureError> {
    a.require(FamilyKind::Downward)?;
    let n = a.n;
    let sets = PlayerSet::all(n).filter(|s| !a.contains(s.complement(n)));
    MonotoneFamily::adversary(n, sets)
}

/// Structure tolerable after termination: `{A^c | A ∉ a} ∪ {m^c}`.
pub fn post_termination_secure(a: &MonotoneFamily, m: PlayerSet) -> Result<MonotoneFamily, StructureError> {
    a.require(FamilyKind::Downward)?;
    if !a.is_maximal(m) {
        return Err(StructureError::NotMaximal(m));
    }
    let base = complements_of_outsiders(a)?;
    let sets = base.extremal.iter().copied().chain(std::iter::once(m.complement(a.n)));
    MonotoneFamily::adversary(a.n, sets)
}

/// Whether `post` fits inside `post_termination_secure(a, M)` for some maximal `M`.
pub fn is_admissible_post_structure(a: &MonotoneFamily, post: &MonotoneFamily) -> Result<bool, StructureError> {
    a.require(FamilyKind::Downward)?;
    post.require(FamilyKind::Downward)?;
    if a.n != post.n {
        return Err(StructureError::PlayerCountMismatch(a.n, post.n));
    }
    Ok(admissible_post_witness(a, post)?.is_some())
}

/// The first maximal set `M` of `a` whose post-termination structure contains `post`.
pub fn admissible_post_witness(a: &MonotoneFamily, post: &MonotoneFamily) -> Result<Option<PlayerSet>, StructureError> {
    for m in &a.extremal {
        let allowed = post_termination_secure(a, *m)?;
        if post.is_subfamily_of(&allowed) {
            return Ok(Some(*m));
        }
    }
    Ok(None)
}

/// Robustness tolerated after termination: all proper subsets of members of `post`.
pub fn post_termination_robust(post: &MonotoneFamily) -> Result<MonotoneFamily, StructureError> {
    post.require(FamilyKind::Downward)?;
    let sets = post.extremal.iter().flat_map(|e| e.members().map(move |p| e.remove(p)));
    MonotoneFamily::adversary(post.n, sets)
}

/// Orients a pair so the sender is outside `m` or the receiver inside it.
///
/// If exactly one endpoint is outside `m` it becomes the sender; otherwise
/// the given order already satisfies the condition and is kept.
pub fn choose_direction(pair: (PlayerId, PlayerId), m: PlayerSet) -> (PlayerId, PlayerId) {
    let (x, y) = pair;
    match (m.contains(x), m.contains(y)) {
        (true, false) => (y, x),
        _ => (x, y),
    }
}

/// Every downward family over `n` players, as canonical antichains.
///
/// Grows quickly (7581 families at `n = 5`); meant for exhaustive checks.
pub fn all_adversary_structures(n: usize) -> Result<Vec<MonotoneFamily>, StructureError> {
    if n > 6 {
        return Err(StructureError::SizeBound(n));
    }
    let sets: Vec<PlayerSet> = PlayerSet::all(n).collect();
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    fn grow(sets: &[PlayerSet], start: usize, chosen: &mut Vec<PlayerSet>, out: &mut Vec<Vec<PlayerSet>>) {
        out.push(chosen.clone());
        for i in start..sets.len() {
            let s = sets[i];
            if chosen.iter().all(|c| !c.is_subset(s) && !s.is_subset(*c)) {
                chosen.push(s);
                grow(sets, i + 1, chosen, out);
                chosen.pop();
            }
        }
    }
    grow(&sets, 0, &mut chosen, &mut out);
    // The empty antichain and {∅} describe the same downward family.
    let mut families: Vec<MonotoneFamily> = out
        .into_iter()
        .filter(|c| !c.is_empty())
        .map(|c| MonotoneFamily::adversary(n, c))
        .collect::<Result<_, _>>()?;
    families.sort_by(|a, b| a.extremal.cmp(&b.extremal));
    families.dedup();
    Ok(families)
}

impl FromStr for MonotoneFamily {
    type Err = StructureError;

    /// Parses `threshold(n,t)`, `sets(n; 0 1, 2 3)` (adversary structure by
    /// maximal sets) or `access(n; 0 1, 2)` (access structure by minimal sets).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let err = |msg: &str| StructureError::Parse(format!("{msg} in `{text}`"));
        let open = text.find('(').ok_or_else(|| err("missing `(`"))?;
        if !text.ends_with(')') {
            return Err(err("missing closing `)`"));
        }
        let head = text[..open].trim();
        let body = &text[open + 1..text.len() - 1];
        let parse_usize = |v: &str| v.trim().parse::<usize>().map_err(|_| err(&format!("bad number `{}`", v.trim())));
        match head {
            "threshold" => {
                let mut parts = body.split(',');
                let n = parse_usize(parts.next().ok_or_else(|| err("missing n"))?)?;
                let t = parse_usize(parts.next().ok_or_else(|| err("missing t"))?)?;
                if parts.next().is_some() {
                    return Err(err("too many arguments"));
                }
                threshold_structure(n, t)
            }
            "sets" | "access" => {
                let (n_text, sets_text) = body.split_once(';').ok_or_else(|| err("missing `;`"))?;
                let n = parse_usize(n_text)?;
                if n > MAX_PLAYERS {
                    return Err(StructureError::SizeBound(n));
                }
                let mut sets = Vec::new();
                if !sets_text.trim().is_empty() {
                    for group in sets_text.split(',') {
                        let mut set = PlayerSet::EMPTY;
                        for tok in group.split_whitespace() {
                            let p = parse_usize(tok)?;
                            if p >= n {
                                return Err(StructureError::PlayerOutOfRange { player: p, n });
                            }
                            set = set.insert(PlayerId(p as u8));
                        }
                        sets.push(set);
                    }
                }
                let kind = if head == "sets" { FamilyKind::Downward } else { FamilyKind::Upward };
                MonotoneFamily::new(n, kind, sets)
            }
            other => Err(err(&format!("unknown structure kind `{other}`"))),
        }
    }
}
