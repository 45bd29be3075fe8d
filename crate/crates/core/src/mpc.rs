//! Pairwise oblivious transfer and a multiparty boolean-circuit evaluator
//! built on it.
//!
//! Wires carry XOR shares: one bit per player, the wire value being their
//! XOR. XOR and NOT gates are local; an AND gate needs one 1-of-4 transfer
//! per pair of players for the cross terms.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EventLog;
use crate::quantum::{self, Bb84Params, Bb84Verdict, CommitBackend, QuantumError};
use crate::rng::{below, coin};
use crate::structures::{self, MonotoneFamily, PlayerId, PlayerSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("circuit line {line}: {message}")]
    CircuitInvalid { line: usize, message: String },
    #[error("expected {expected} input bits, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("oblivious transfer from {sender} to {receiver} aborted: {reason}")]
    OtAborted { sender: PlayerId, receiver: PlayerId, reason: String },
    #[error("player {0} is outside the circuit's player set")]
    PlayerOutOfRange(PlayerId),
}

/// A source of 1-of-2 bit transfers between any two players.
pub trait ObliviousTransfer {
    /// `receiver` learns `if choice { b1 } else { b0 }`.
    fn transfer(&mut self, sender: PlayerId, receiver: PlayerId, b0: bool, b1: bool, choice: bool, rng: &mut dyn RngCore) -> Result<bool, MpcError>;

    fn name(&self) -> &'static str;

    /// Number of transfers run so far, counting sub-transfers.
    fn count(&self) -> u64;
}

/// A trusted box.
#[derive(Debug, Clone, Default)]
pub struct IdealOt {
    count: u64,
    /// When set, every transfer aborts.
    pub fail: bool,
}

impl ObliviousTransfer for IdealOt {
    fn transfer(&mut self, sender: PlayerId, receiver: PlayerId, b0: bool, b1: bool, choice: bool, _rng: &mut dyn RngCore) -> Result<bool, MpcError> {
        self.count += 1;
        if self.fail {
            return Err(MpcError::OtAborted { sender, receiver, reason: "backing transfer failed".into() });
        }
        Ok(if choice { b1 } else { b0 })
    }

    fn name(&self) -> &'static str {
        "ideal"
    }

    fn count(&self) -> u64 {
        self.count
    }
}

/// Transfers over the quantum channel with committed measurements.
///
/// The committing party is the transfer's receiver. Which of the two
/// players may commit to the other is fixed by the maximal collusion
/// `direction`; transfers running the other way are reversed.
#[derive(Debug, Clone)]
pub struct Bb84Ot {
    pub adversary: MonotoneFamily,
    pub direction: PlayerSet,
    pub params: Bb84Params,
    count: u64,
    reversed: u64,
}

impl Bb84Ot {
    pub fn new(adversary: MonotoneFamily, direction: PlayerSet, params: Bb84Params) -> Bb84Ot {
        Bb84Ot { adversary, direction, params, count: 0, reversed: 0 }
    }

    pub fn reversed(&self) -> u64 {
        self.reversed
    }

    fn raw(&mut self, sender: PlayerId, receiver: PlayerId, b0: bool, b1: bool, choice: bool, rng: &mut dyn RngCore) -> Result<bool, MpcError> {
        self.count += 1;
        let mut params = self.params.clone();
        if let CommitBackend::SecretSharing { .. } = params.backend {
            params.backend = CommitBackend::SecretSharing { adversary: self.adversary.clone(), bob: receiver, alice: sender, rounds: match &self.params.backend {
                CommitBackend::SecretSharing { rounds, .. } => *rounds,
                CommitBackend::Ideal => 1,
            } };
        }
        let abort = |reason: String| MpcError::OtAborted { sender, receiver, reason };
        let session = quantum::bb84_ot(b0, b1, choice, &params, rng).map_err(|e: QuantumError| abort(e.to_string()))?;
        match session.verdict {
            Bb84Verdict::Accept { output } => Ok(output),
            other => Err(abort(format!("{other:?}"))),
        }
    }
}

impl ObliviousTransfer for Bb84Ot {
    fn transfer(&mut self, sender: PlayerId, receiver: PlayerId, b0: bool, b1: bool, choice: bool, rng: &mut dyn RngCore) -> Result<bool, MpcError> {
        let (committer, _) = structures::choose_direction((receiver, sender), self.direction);
        if committer == receiver {
            return self.raw(sender, receiver, b0, b1, choice, rng);
        }
        self.reversed += 1;
        // Only receiver→sender transfers are available for this pair.
        let mut base = |s: PlayerId, r: PlayerId, x0: bool, x1: bool, c: bool, rng: &mut dyn RngCore| self.raw(s, r, x0, x1, c, rng);
        ot_reverse(&mut base, receiver, sender, (b0, b1), choice, rng)
    }

    fn name(&self) -> &'static str {
        "bb84"
    }

    fn count(&self) -> u64 {
        self.count
    }
}

/// A transfer from `y` (holding `messages`) to `x` (holding `choice`) out
/// of one transfer in the opposite direction, `x` to `y`.
///
/// `x` sends `(r, r ⊕ c)`; `y` picks with `y0 ⊕ y1` and returns the result
/// XOR `y0`; `x` strips `r`.
pub fn ot_reverse<F>(base: &mut F, x: PlayerId, y: PlayerId, messages: (bool, bool), choice: bool, rng: &mut dyn RngCore) -> Result<bool, MpcError>
where
    F: FnMut(PlayerId, PlayerId, bool, bool, bool, &mut dyn RngCore) -> Result<bool, MpcError>,
{
    let (y0, y1) = messages;
    let r = coin(rng);
    let s = base(x, y, r, r ^ choice, y0 ^ y1, rng)?;
    let reply = s ^ y0;
    Ok(reply ^ r)
}

/// 1-of-4 transfer of `messages[2·c1 + c2]` out of three 1-of-2 transfers.
pub fn ot4_from_ot2(ot: &mut dyn ObliviousTransfer, sender: PlayerId, receiver: PlayerId, messages: [bool; 4], choice: (bool, bool), rng: &mut dyn RngCore) -> Result<bool, MpcError> {
    let [m00, m01, m10, m11] = messages;
    let (c1, c2) = choice;
    let r0 = coin(rng);
    let r1 = coin(rng);
    let key = ot.transfer(sender, receiver, r0, r1, c1, rng)?;
    let low = ot.transfer(sender, receiver, m00 ^ r0, m01 ^ r0, c2, rng)?;
    let high = ot.transfer(sender, receiver, m10 ^ r1, m11 ^ r1, c2, rng)?;
    Ok(key ^ if c1 { high } else { low })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Xor,
    And,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub out: usize,
    pub a: usize,
    pub b: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanCircuit {
    /// `(owner, wire)` in input order.
    pub inputs: Vec<(PlayerId, usize)>,
    pub gates: Vec<Gate>,
    pub outputs: Vec<usize>,
}

impl BooleanCircuit {
    pub fn players(&self) -> usize {
        self.inputs.iter().map(|(p, _)| p.index() + 1).max().unwrap_or(0)
    }

    pub fn and_gates(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::And).count()
    }

    /// Every wire is defined once, before use.
    pub fn validate(&self) -> Result<(), MpcError> {
        let bad = |line: usize, message: String| Err(MpcError::CircuitInvalid { line, message });
        let mut defined = BTreeMap::new();
        for (i, (_, w)) in self.inputs.iter().enumerate() {
            if defined.insert(*w, ()).is_some() {
                return bad(i + 1, format!("wire {w} defined twice"));
            }
        }
        for (i, g) in self.gates.iter().enumerate() {
            let line = self.inputs.len() + i + 1;
            let needs_b = g.kind != GateKind::Not;
            if needs_b != g.b.is_some() {
                return bad(line, format!("{:?} takes {} operands", g.kind, if needs_b { 2 } else { 1 }));
            }
            for w in std::iter::once(g.a).chain(g.b) {
                if !defined.contains_key(&w) {
                    return bad(line, format!("wire {w} used before definition"));
                }
            }
            if defined.insert(g.out, ()).is_some() {
                return bad(line, format!("wire {} defined twice", g.out));
            }
        }
        for (i, w) in self.outputs.iter().enumerate() {
            if !defined.contains_key(w) {
                return bad(self.inputs.len() + self.gates.len() + i + 1, format!("output wire {w} undefined"));
            }
        }
        if self.outputs.is_empty() {
            return bad(0, "no outputs".into());
        }
        Ok(())
    }

    /// `in`, `gate`, `out` lines, one per input, gate and output.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, w) in &self.inputs {
            out.push_str(&format!("in {p} {w}\n"));
        }
        for g in &self.gates {
            let kind = match g.kind {
                GateKind::Xor => "XOR",
                GateKind::And => "AND",
                GateKind::Not => "NOT",
            };
            match g.b {
                Some(b) => out.push_str(&format!("gate {kind} {} {} {b}\n", g.out, g.a)),
                None => out.push_str(&format!("gate {kind} {} {}\n", g.out, g.a)),
            }
        }
        for w in &self.outputs {
            out.push_str(&format!("out {w}\n"));
        }
        out
    }

    /// Three voters, one output: `ab ⊕ bc ⊕ ca`.
    pub fn majority3() -> BooleanCircuit {
        "in 0 0\nin 1 1\nin 2 2\ngate AND 3 0 1\ngate AND 4 1 2\ngate AND 5 2 0\ngate XOR 6 3 4\ngate XOR 7 6 5\nout 7\n".parse().expect("valid circuit")
    }

    pub fn and2() -> BooleanCircuit {
        "in 0 0\nin 1 1\ngate AND 2 0 1\nout 2\n".parse().expect("valid circuit")
    }

    /// Full adder over one bit each plus player 0's carry-in; outputs sum and carry.
    pub fn adder1() -> BooleanCircuit {
        "in 0 0\nin 1 1\nin 0 2\ngate XOR 3 0 1\ngate XOR 4 3 2\ngate AND 5 0 1\ngate AND 6 3 2\ngate XOR 7 5 6\nout 4\nout 7\n".parse().expect("valid circuit")
    }

    pub fn builtin(name: &str) -> Option<BooleanCircuit> {
        match name {
            "majority3" => Some(BooleanCircuit::majority3()),
            "and2" => Some(BooleanCircuit::and2()),
            "adder1" => Some(BooleanCircuit::adder1()),
            _ => None,
        }
    }

    /// Random circuit: each player owns at least one input, every gate
    /// reads earlier wires, the last `outputs` wires are outputs.
    pub fn random<R: RngCore + ?Sized>(players: usize, inputs: usize, gates: usize, outputs: usize, rng: &mut R) -> BooleanCircuit {
        let inputs = inputs.max(players);
        let mut circuit = BooleanCircuit { inputs: Vec::new(), gates: Vec::new(), outputs: Vec::new() };
        for w in 0..inputs {
            let owner = if w < players { w } else { below(rng, players) };
            circuit.inputs.push((PlayerId(owner as u8), w));
        }
        for g in 0..gates {
            let out = inputs + g;
            let kind = match below(rng, 3) {
                0 => GateKind::Xor,
                1 => GateKind::And,
                _ => GateKind::Not,
            };
            let a = below(rng, out);
            let b = (kind != GateKind::Not).then(|| below(rng, out));
            circuit.gates.push(Gate { kind, out, a, b });
        }
        let total = inputs + gates;
        circuit.outputs = (total - outputs.min(total)..total).collect();
        circuit
    }
}

impl FromStr for BooleanCircuit {
    type Err = MpcError;

    fn from_str(text: &str) -> Result<BooleanCircuit, MpcError> {
        let mut circuit = BooleanCircuit { inputs: Vec::new(), gates: Vec::new(), outputs: Vec::new() };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let bad = |message: &str| MpcError::CircuitInvalid { line, message: message.into() };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            let num = |w: &str| w.parse::<usize>().map_err(|_| bad(&format!("`{w}` is not a wire number")));
            match words.as_slice() {
                ["in", p, w] => {
                    let p: u8 = p.parse().map_err(|_| bad("bad player"))?;
                    if p >= 16 {
                        return Err(bad("player out of range"));
                    }
                    circuit.inputs.push((PlayerId(p), num(w)?));
                }
                ["gate", kind, rest @ ..] => {
                    let kind = match *kind {
                        "XOR" => GateKind::Xor,
                        "AND" => GateKind::And,
                        "NOT" => GateKind::Not,
                        other => return Err(bad(&format!("unknown gate `{other}`"))),
                    };
                    let gate = match (kind, rest) {
                        (GateKind::Not, [o, a]) => Gate { kind, out: num(o)?, a: num(a)?, b: None },
                        (GateKind::Xor | GateKind::And, [o, a, b]) => Gate { kind, out: num(o)?, a: num(a)?, b: Some(num(b)?) },
                        _ => return Err(bad("wrong operand count")),
                    };
                    circuit.gates.push(gate);
                }
                ["out", w] => circuit.outputs.push(num(w)?),
                _ => return Err(bad("expected `in`, `gate` or `out`")),
            }
        }
        circuit.validate()?;
        Ok(circuit)
    }
}

fn apply_plain(kind: GateKind, a: bool, b: bool) -> bool {
    match kind {
        GateKind::Xor => a ^ b,
        GateKind::And => a & b,
        GateKind::Not => !a,
    }
}

/// Direct evaluation; `inputs` follow the circuit's input order.
pub fn eval_plain(circuit: &BooleanCircuit, inputs: &[bool]) -> Result<Vec<bool>, MpcError> {
    circuit.validate()?;
    if inputs.len() != circuit.inputs.len() {
        return Err(MpcError::InputCount { expected: circuit.inputs.len(), got: inputs.len() });
    }
    let mut wires = BTreeMap::new();
    for ((_, w), &v) in circuit.inputs.iter().zip(inputs) {
        wires.insert(*w, v);
    }
    for g in &circuit.gates {
        let v = apply_plain(g.kind, wires[&g.a], g.b.is_some_and(|b| wires[&b]));
        wires.insert(g.out, v);
    }
    Ok(circuit.outputs.iter().map(|w| wires[w]).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GmwOutcome {
    pub outputs: Vec<bool>,
    pub transfers: u64,
    pub and_gates: usize,
    /// Individual shares per player of every output wire, as broadcast.
    pub output_shares: Vec<Vec<bool>>,
    pub events: EventLog,
}

/// Semi-honest multiparty evaluation over `players` parties.
pub fn gmw_eval(circuit: &BooleanCircuit, players: usize, inputs: &[bool], ot: &mut dyn ObliviousTransfer, rng: &mut dyn RngCore) -> Result<GmwOutcome, MpcError> {
    circuit.validate()?;
    if inputs.len() != circuit.inputs.len() {
        return Err(MpcError::InputCount { expected: circuit.inputs.len(), got: inputs.len() });
    }
    if players < circuit.players() || players == 0 || players > 16 {
        return Err(MpcError::PlayerOutOfRange(PlayerId(circuit.players().saturating_sub(1) as u8)));
    }
    let mut events = EventLog::new();
    let start = ot.count();
    let mut shares: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for ((owner, w), &v) in circuit.inputs.iter().zip(inputs) {
        let mut s = vec![false; players];
        let mut acc = v;
        for (p, slot) in s.iter_mut().enumerate() {
            if p != owner.index() {
                *slot = coin(rng);
                acc ^= *slot;
                events.msg(0, *owner, PlayerId(p as u8), "input-share", &[*w as u8, *slot as u8]);
            }
        }
        s[owner.index()] = acc;
        shares.insert(*w, s);
    }
    for (gi, g) in circuit.gates.iter().enumerate() {
        let x = shares[&g.a].clone();
        let out = match g.kind {
            GateKind::Xor => {
                let y = &shares[&g.b.expect("validated")];
                x.iter().zip(y).map(|(a, b)| a ^ b).collect()
            }
            GateKind::Not => {
                let mut s = x;
                s[0] = !s[0];
                s
            }
            GateKind::And => {
                let y = shares[&g.b.expect("validated")].clone();
                let mut z: Vec<bool> = x.iter().zip(&y).map(|(a, b)| a & b).collect();
                for i in 0..players {
                    for j in i + 1..players {
                        let (pi, pj) = (PlayerId(i as u8), PlayerId(j as u8));
                        let s = coin(rng);
                        let m = |a: bool, b: bool| s ^ (x[i] & b) ^ (a & y[i]);
                        let got = ot4_from_ot2(ot, pi, pj, [m(false, false), m(false, true), m(true, false), m(true, true)], (x[j], y[j]), rng)?;
                        events.msg(gi + 1, pi, pj, "ot4", &[g.out as u8]);
                        z[i] ^= s;
                        z[j] ^= got;
                    }
                }
                z
            }
        };
        shares.insert(g.out, out);
    }
    let round = circuit.gates.len() + 1;
    let mut output_shares = vec![Vec::new(); players];
    for w in &circuit.outputs {
        for (p, slot) in output_shares.iter_mut().enumerate() {
            let b = shares[w][p];
            slot.push(b);
            events.msg(round, PlayerId(p as u8), crate::events::Endpoint::Broadcast, "output-share", &[*w as u8, b as u8]);
        }
    }
    let outputs: Vec<bool> = circuit.outputs.iter().map(|w| shares[w].iter().fold(false, |a, &b| a ^ b)).collect();
    let rendered: String = outputs.iter().map(|&b| if b { '1' } else { '0' }).collect();
    events.verdict(&format!("outputs {rendered}"));
    Ok(GmwOutcome { outputs, transfers: ot.count() - start, and_gates: circuit.and_gates(), output_shares, events })
}
