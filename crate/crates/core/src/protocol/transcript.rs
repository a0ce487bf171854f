use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Alice,
    Bob,
    Env,
    Harness,
}

/// One classical message or measurement event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub actor: Actor,
    pub kind: String,
    pub payload: Value,
}

/// Ordered record of a protocol run, stored as JSON lines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, actor: Actor, kind: &str, payload: Value) {
        let seq = self.events.len() as u64;
        self.events.push(Event { seq, actor, kind: kind.to_string(), payload });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses JSON lines; blank lines are ignored. Sequence numbers must be
    /// consecutive from zero.
    pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Self> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: Event = serde_json::from_str(&line).map_err(io::Error::from)?;
            if e.seq != events.len() as u64 {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("event {} has sequence number {}", events.len(), e.seq),
                ));
            }
            events.push(e);
        }
        Ok(Self { events })
    }

    pub fn from_jsonl(s: &str) -> io::Result<Self> {
        Self::read_jsonl(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn jsonl_roundtrip() {
        let mut t = Transcript::new();
        t.push(Actor::Alice, "prepare", json!({"i": 0, "theta": 0.785}));
        t.push(Actor::Bob, "measure", json!({"i": 0, "basis": 1, "outcome": 0}));
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"seq":0,"actor":"alice","kind":"prepare""#));
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), t);
        assert_eq!(t.of_kind("measure").count(), 1);
    }

    #[test]
    fn rejects_gaps() {
        let text = r#"{"seq":1,"actor":"bob","kind":"x","payload":null}"#;
        assert!(Transcript::from_jsonl(text).is_err());
    }
}
