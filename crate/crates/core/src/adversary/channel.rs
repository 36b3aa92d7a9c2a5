use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::terms::MessageTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    ToServer,
    ToClient,
}

/// What an interceptor does with one in-flight message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Deliver,
    Drop,
    Replace(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    /// Put on the wire by an honest party.
    Sent,
    Delivered,
    Dropped,
    /// The bytes that reached the recipient in place of the previous `Sent`.
    Modified,
    /// Put on the wire by the attacker.
    Injected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub seq: usize,
    pub direction: Direction,
    pub kind: EntryKind,
    pub bytes: Vec<u8>,
}

impl TranscriptEntry {
    /// The wire tag, if the bytes start with a known one.
    pub fn tag(&self) -> Option<MessageTag> {
        self.bytes.first().and_then(|b| MessageTag::from_byte(*b))
    }
}

/// Attacker strategy. It sees every message before delivery and may
/// inject new ones whenever the network goes quiet.
pub trait Interceptor {
    fn intercept(&mut self, direction: Direction, bytes: &[u8]) -> Action {
        let _ = (direction, bytes);
        Action::Deliver
    }

    /// Called when nothing is in flight. Returned messages are queued as
    /// injections; returning none ends the run.
    fn on_idle(&mut self) -> Vec<(Direction, Vec<u8>)> {
        Vec::new()
    }
}

/// Forwards everything untouched.
pub struct Honest;

impl Interceptor for Honest {}

/// One message coming off the wire. `bytes` is `None` when it was dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub direction: Direction,
    pub bytes: Option<Vec<u8>>,
    pub injected: bool,
}

pub struct SimChannel {
    // The flag marks attacker injections, which bypass the interceptor.
    inflight: VecDeque<(Direction, Vec<u8>, bool)>,
    interceptor: Box<dyn Interceptor>,
    transcript: Vec<TranscriptEntry>,
}

impl SimChannel {
    pub fn new(interceptor: Box<dyn Interceptor>) -> Self {
        Self { inflight: VecDeque::new(), interceptor, transcript: Vec::new() }
    }

    pub fn honest() -> Self {
        Self::new(Box::new(Honest))
    }

    fn log(&mut self, direction: Direction, kind: EntryKind, bytes: Vec<u8>) {
        let seq = self.transcript.len();
        self.transcript.push(TranscriptEntry { seq, direction, kind, bytes });
    }

    pub fn send(&mut self, direction: Direction, bytes: Vec<u8>) {
        self.log(direction, EntryKind::Sent, bytes.clone());
        self.inflight.push_back((direction, bytes, false));
    }

    /// Takes the next message off the wire and runs it past the interceptor.
    /// Returns `None` once the wire is empty and the attacker has nothing
    /// more to inject.
    pub fn next(&mut self) -> Option<Delivery> {
        if self.inflight.is_empty() {
            for (direction, bytes) in self.interceptor.on_idle() {
                self.log(direction, EntryKind::Injected, bytes.clone());
                self.inflight.push_back((direction, bytes, true));
            }
        }
        let (direction, bytes, injected) = self.inflight.pop_front()?;
        if injected {
            return Some(Delivery { direction, bytes: Some(bytes), injected });
        }
        let bytes = match self.interceptor.intercept(direction, &bytes) {
            Action::Deliver => {
                self.log(direction, EntryKind::Delivered, bytes.clone());
                Some(bytes)
            }
            Action::Drop => {
                self.log(direction, EntryKind::Dropped, bytes);
                None
            }
            Action::Replace(new) => {
                self.log(direction, EntryKind::Modified, new.clone());
                Some(new)
            }
        };
        Some(Delivery { direction, bytes, injected })
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn into_transcript(self) -> Vec<TranscriptEntry> {
        self.transcript
    }
}
