//! Traces: polarity-labeled sequences of ground messages, with the polarity
//! algebra (restriction, negation, input and output projections).

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    /// `!` — the principal sent the message.
    Sent,
    /// `?` — the principal received the message.
    Received,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Sent => Polarity::Received,
            Polarity::Received => Polarity::Sent,
        }
    }

    pub fn mark(self) -> char {
        match self {
            Polarity::Sent => '!',
            Polarity::Received => '?',
        }
    }
}

use crate::term::Term;

/// One trace element: a ground payload with its polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledMessage {
    pub polarity: Polarity,
    pub payload: Term,
}

impl LabeledMessage {
    pub fn new(polarity: Polarity, payload: Term) -> Self {
        debug_assert!(payload.is_ground(), "trace payloads must be ground");
        LabeledMessage { polarity, payload }
    }

    pub fn sent(payload: Term) -> Self {
        LabeledMessage::new(Polarity::Sent, payload)
    }

    pub fn received(payload: Term) -> Self {
        LabeledMessage::new(Polarity::Received, payload)
    }
}

impl fmt::Display for LabeledMessage {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "{}{}", self.polarity.mark(), self.payload)
    }
}

/// A principal's finite send/receive history.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Trace {
    messages: Vec<LabeledMessage>,
}

impl Trace {
    pub fn new(messages: Vec<LabeledMessage>) -> Self {
        Trace { messages }
    }

    pub fn empty() -> Self {
        Trace::default()
    }

    /// An all-sent trace over the given payloads.
    pub fn positive(payloads: impl IntoIterator<Item = Term>) -> Self {
        Trace {
            messages: payloads.into_iter().map(LabeledMessage::sent).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn push(&mut self, m: LabeledMessage) {
        self.messages.push(m);
    }

    pub fn get(&self, i: usize) -> Option<&LabeledMessage> {
        self.messages.get(i)
    }

    /// The i-th payload, 1-based, as addressed by position variables.
    pub fn message(&self, position: usize) -> Option<&Term> {
        self.messages.get(position.checked_sub(1)?).map(|m| &m.payload)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledMessage> {
        self.messages.iter()
    }

    pub fn payloads(&self) -> impl Iterator<Item = &Term> {
        self.messages.iter().map(|m| &m.payload)
    }

    pub fn is_positive(&self) -> bool {
        self.messages.iter().all(|m| m.polarity == Polarity::Sent)
    }

    pub fn is_negative(&self) -> bool {
        self.messages
            .iter()
            .all(|m| m.polarity == Polarity::Received)
    }

    /// The subsequence carrying the given label.
    pub fn restrict(&self, polarity: Polarity) -> Trace {
        Trace {
            messages: self
                .messages
                .iter()
                .filter(|m| m.polarity == polarity)
                .cloned()
                .collect(),
        }
    }

    /// Flips every label.
    pub fn negate(&self) -> Trace {
        Trace {
            messages: self
                .messages
                .iter()
                .map(|m| LabeledMessage::new(m.polarity.flip(), m.payload.clone()))
                .collect(),
        }
    }

    /// The received subsequence, re-labeled as sent: what the environment
    /// must provide for this trace to happen.
    pub fn input(&self) -> Trace {
        self.restrict(Polarity::Received).negate()
    }

    /// The sent subsequence, re-labeled as received: what the environment
    /// observes of this trace.
    pub fn output(&self) -> Trace {
        self.restrict(Polarity::Sent).negate()
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut messages = self.messages.clone();
        messages.extend(other.messages.iter().cloned());
        Trace { messages }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "(")?;
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                write!(out, ", ")?;
            }
            write!(out, "{m}")?;
        }
        write!(out, ")")
    }
}

impl FromIterator<LabeledMessage> for Trace {
    fn from_iter<T: IntoIterator<Item = LabeledMessage>>(iter: T) -> Self {
        Trace {
            messages: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Term;

    fn sample() -> Trace {
        Trace::new(vec![
            LabeledMessage::received(Term::free("a")),
            LabeledMessage::sent(Term::free("b")),
            LabeledMessage::received(Term::free("c")),
        ])
    }

    #[test]
    fn negate_is_an_involution() {
        let t = sample();
        assert_eq!(t.negate().negate(), t);
    }

    #[test]
    fn input_flips_received_messages() {
        let t = sample();
        let input = t.input();
        assert!(input.is_positive());
        assert_eq!(
            input.payloads().cloned().collect::<Vec<_>>(),
            vec![Term::free("a"), Term::free("c")]
        );
    }

    #[test]
    fn input_of_all_sent_trace_is_empty() {
        let t = Trace::positive(vec![Term::free("a"), Term::free("b")]);
        assert!(t.input().is_empty());
        assert_eq!(t.output().len(), 2);
    }

    #[test]
    fn input_output_partition_length() {
        let t = sample();
        assert_eq!(t.input().len() + t.output().len(), t.len());
    }
}
