//! The shared event-log line format.
//!
//! ```text
//! msg <round> <from> <to|broadcast> <kind> <payload-hash>
//! verdict <status>
//! ```
//!
//! `<payload-hash>` is the first eight bytes of SHA-256 over the payload,
//! as lowercase hex.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::structures::PlayerId;

/// Origin or destination of a logged message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Player(PlayerId),
    Broadcast,
    /// A public coin nobody controls.
    Coin,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Player(p) => write!(f, "{p}"),
            Endpoint::Broadcast => f.write_str("broadcast"),
            Endpoint::Coin => f.write_str("coin"),
        }
    }
}

impl From<PlayerId> for Endpoint {
    fn from(p: PlayerId) -> Endpoint {
        Endpoint::Player(p)
    }
}

pub fn payload_hash(payload: &[u8]) -> String {
    let digest = Sha256::digest(payload);
    hex::encode(&digest[..8])
}

/// An append-only log; a disabled log drops everything (used by exhaustive
/// enumeration, where hashing every message would dominate the cost).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    lines: Vec<String>,
    disabled: bool,
}

impl EventLog {
    pub fn new() -> EventLog {
        EventLog::default()
    }

    pub fn disabled() -> EventLog {
        EventLog { lines: Vec::new(), disabled: true }
    }

    pub fn is_enabled(&self) -> bool {
        !self.disabled
    }

    pub fn msg(&mut self, round: usize, from: impl Into<Endpoint>, to: impl Into<Endpoint>, kind: &str, payload: &[u8]) {
        if self.disabled {
            return;
        }
        let line = format!("msg {round} {} {} {kind} {}", from.into(), to.into(), payload_hash(payload));
        self.lines.push(line);
    }

    /// Like [`EventLog::msg`], building the payload lazily.
    pub fn msg_with<F>(&mut self, round: usize, from: impl Into<Endpoint>, to: impl Into<Endpoint>, kind: &str, payload: F)
    where
        F: FnOnce() -> Vec<u8>,
    {
        if self.disabled {
            return;
        }
        let bytes = payload();
        self.msg(round, from, to, kind, &bytes);
    }

    pub fn verdict(&mut self, status: &str) {
        if !self.disabled {
            self.lines.push(format!("verdict {status}"));
        }
    }

    /// A free-form annotation line (`note <text>`).
    pub fn note(&mut self, text: &str) {
        if !self.disabled {
            self.lines.push(format!("note {text}"));
        }
    }

    pub fn extend(&mut self, other: &EventLog) {
        if !self.disabled {
            self.lines.extend(other.lines.iter().cloned());
        }
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn into_lines(self) -> Vec<String> {
        self.lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let mut log = EventLog::new();
        log.msg(3, PlayerId(0), Endpoint::Broadcast, "open", b"abc");
        log.verdict("committed");
        assert_eq!(log.lines(), &["msg 3 0 broadcast open ba7816bf8f01cfea", "verdict committed"]);
        let mut off = EventLog::disabled();
        off.msg(0, PlayerId(1), PlayerId(2), "share", b"x");
        assert!(off.lines().is_empty());
    }
}
