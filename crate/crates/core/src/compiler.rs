//! Active frames: executable role scripts with send recipes and receive
//! tests, their evaluation on input traces, and compilation of traces and
//! protocols into (prudent) implementations.
//!
//! Recipes and tests are written over input positions: `vi` denotes the i-th
//! *received* message, so a frame evaluates directly against the positive
//! trace it is fed.

use crate::context::{Context, TestSystem};
use crate::deduction::{finite_basis, synthesize};
use crate::narration::Protocol;
use crate::theory::DeductionSystem;
use crate::trace::{LabeledMessage, Polarity, Trace};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// One step of an active frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameStep {
    /// Send the message built by `recipe` from the inputs received so far.
    Send { recipe: Context },
    /// Receive the next input and check `tests` over the inputs up to and
    /// including it.
    Receive { tests: TestSystem },
}

/// An executable role script.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveFrame {
    steps: Vec<FrameStep>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("step {step}: send recipe reaches position v{position} but only {available} inputs precede it")]
    SendRecipeAhead {
        step: usize,
        position: usize,
        available: usize,
    },
    #[error("step {step}: receive test reaches position v{position} but only {available} inputs are bound there")]
    TestAhead {
        step: usize,
        position: usize,
        available: usize,
    },
}

impl ActiveFrame {
    pub fn new(steps: Vec<FrameStep>) -> Result<Self, FrameError> {
        let mut inputs = 0usize;
        for (idx, step) in steps.iter().enumerate() {
            match step {
                FrameStep::Send { recipe } => {
                    if recipe.max_position() > inputs {
                        return Err(FrameError::SendRecipeAhead {
                            step: idx + 1,
                            position: recipe.max_position(),
                            available: inputs,
                        });
                    }
                }
                FrameStep::Receive { tests } => {
                    inputs += 1;
                    if tests.arity() > inputs {
                        return Err(FrameError::TestAhead {
                            step: idx + 1,
                            position: tests.arity(),
                            available: inputs,
                        });
                    }
                }
            }
        }
        Ok(ActiveFrame { steps })
    }

    pub fn steps(&self) -> &[FrameStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn input_len(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, FrameStep::Receive { .. }))
            .count()
    }

    pub fn to_json(&self, role: Option<&str>, prudent: bool) -> serde_json::Value {
        let steps: Vec<serde_json::Value> = self
            .steps
            .iter()
            .map(|s| match s {
                FrameStep::Send { recipe } => json!({
                    "kind": "send",
                    "recipe": recipe.to_string(),
                }),
                FrameStep::Receive { tests } => json!({
                    "kind": "receive",
                    "tests": tests
                        .iter()
                        .map(|(a, b)| json!([a.to_string(), b.to_string()]))
                        .collect::<Vec<_>>(),
                }),
            })
            .collect();
        match role {
            Some(role) => json!({ "role": role, "prudent": prudent, "steps": steps }),
            None => json!({ "prudent": prudent, "steps": steps }),
        }
    }

    /// Human-readable listing of the script.
    pub fn pseudocode(&self) -> String {
        let mut out = String::new();
        let mut inputs = 0usize;
        for (idx, step) in self.steps.iter().enumerate() {
            match step {
                FrameStep::Send { recipe } => {
                    let _ = writeln!(out, "{:>3}. ! {}", idx + 1, recipe);
                }
                FrameStep::Receive { tests } => {
                    inputs += 1;
                    if tests.is_empty() {
                        let _ = writeln!(out, "{:>3}. ? v{}", idx + 1, inputs);
                    } else {
                        let checks: Vec<String> = tests
                            .iter()
                            .map(|(a, b)| format!("{a} == {b}"))
                            .collect();
                        let _ = writeln!(
                            out,
                            "{:>3}. ? v{}  check: {}",
                            idx + 1,
                            inputs,
                            checks.join(" ; ")
                        );
                    }
                }
            }
        }
        out
    }
}

/// Why an evaluation did not produce a trace.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("frame expects {expected} inputs, trace has {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("rejected at step {step}: test {lhs} == {rhs} failed")]
    Reject {
        step: usize,
        lhs: String,
        rhs: String,
    },
}

/// Per-step record of an evaluation, for transcripts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    pub action: LabeledMessage,
    pub checks: Vec<(String, String, bool)>,
}

/// Evaluates `frame` on a positive input trace: receive steps bind the next
/// input and run their tests, send steps emit the normalized instantiation
/// of their recipe. Returns the full trace when every test passes.
pub fn evaluate(
    frame: &ActiveFrame,
    inputs: &Trace,
    d: &DeductionSystem,
) -> Result<Trace, EvalError> {
    evaluate_with_transcript(frame, inputs, d).0
}

/// Like [`evaluate`], also reporting each step and each test outcome up to
/// the point of rejection.
pub fn evaluate_with_transcript(
    frame: &ActiveFrame,
    inputs: &Trace,
    d: &DeductionSystem,
) -> (Result<Trace, EvalError>, Vec<StepRecord>) {
    assert!(inputs.is_positive(), "frames evaluate on positive traces");
    if inputs.len() != frame.input_len() {
        return (
            Err(EvalError::LengthMismatch {
                expected: frame.input_len(),
                got: inputs.len(),
            }),
            Vec::new(),
        );
    }
    let mut bound = Trace::empty();
    let mut result = Trace::empty();
    let mut transcript = Vec::new();
    let mut cursor = 0usize;
    for (idx, step) in frame.steps.iter().enumerate() {
        match step {
            FrameStep::Receive { tests } => {
                let payload = inputs
                    .message(cursor + 1)
                    .expect("length checked above")
                    .clone();
                cursor += 1;
                bound.push(LabeledMessage::sent(payload.clone()));
                let mut checks = Vec::new();
                let mut failed: Option<(Context, Context)> = None;
                for (lhs, rhs) in tests.iter() {
                    let ok = lhs.apply(&bound, d).expect("tests stay in range")
                        == rhs.apply(&bound, d).expect("tests stay in range");
                    checks.push((lhs.to_string(), rhs.to_string(), ok));
                    if !ok && failed.is_none() {
                        failed = Some((lhs.clone(), rhs.clone()));
                    }
                }
                result.push(LabeledMessage::received(payload.clone()));
                transcript.push(StepRecord {
                    step: idx + 1,
                    action: LabeledMessage::received(payload),
                    checks,
                });
                if let Some((lhs, rhs)) = failed {
                    return (
                        Err(EvalError::Reject {
                            step: idx + 1,
                            lhs: lhs.to_string(),
                            rhs: rhs.to_string(),
                        }),
                        transcript,
                    );
                }
            }
            FrameStep::Send { recipe } => {
                let payload = recipe.apply(&bound, d).expect("recipes stay in range");
                result.push(LabeledMessage::sent(payload.clone()));
                transcript.push(StepRecord {
                    step: idx + 1,
                    action: LabeledMessage::sent(payload),
                    checks: Vec::new(),
                });
            }
        }
    }
    (Ok(result), transcript)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("step {step} sends {message}, which is not derivable from the inputs before it")]
pub struct NotExecutable {
    pub step: usize,
    pub message: String,
}

/// Compiles a trace into an active frame implementing it.
///
/// Sends synthesize a recipe from the inputs seen so far (failure means the
/// trace is not executable). In prudent mode each receive step checks the
/// equalities of the input prefix that are new at that step, so the union of
/// all tests presents every equality of the full input.
pub fn compile(lam: &Trace, d: &DeductionSystem, prudent: bool) -> Result<ActiveFrame, NotExecutable> {
    let mut steps = Vec::new();
    let mut inputs = Trace::empty();
    let mut previous_tests = TestSystem::empty();
    for (idx, m) in lam.iter().enumerate() {
        match m.polarity {
            Polarity::Sent => {
                let recipe = synthesize(&inputs, &m.payload, d).ok_or(NotExecutable {
                    step: idx + 1,
                    message: m.payload.to_string(),
                })?;
                steps.push(FrameStep::Send { recipe });
            }
            Polarity::Received => {
                inputs.push(LabeledMessage::sent(m.payload.clone()));
                let tests = if prudent {
                    let basis = finite_basis(&inputs, d).as_test_system();
                    let new = basis.difference(&previous_tests);
                    previous_tests = basis;
                    new
                } else {
                    TestSystem::empty()
                };
                steps.push(FrameStep::Receive { tests });
            }
        }
    }
    Ok(ActiveFrame::new(steps).expect("compiled steps respect the position discipline"))
}

/// Whether `frame` implements `lam`: it accepts `input(lam)` and reproduces
/// `lam` pointwise modulo E with matching polarities.
pub fn is_implementation(frame: &ActiveFrame, lam: &Trace, d: &DeductionSystem) -> bool {
    match evaluate(frame, &lam.input(), d) {
        Ok(run) => {
            run.len() == lam.len()
                && run
                    .iter()
                    .zip(lam.iter())
                    .all(|(a, b)| a.polarity == b.polarity && d.eq_mod_e(&a.payload, &b.payload))
        }
        Err(_) => false,
    }
}

/// A per-strand map of compiled frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolImplementation {
    pub strands: std::collections::BTreeSet<String>,
    pub frames: BTreeMap<String, ActiveFrame>,
    pub prudent: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("strand {strand}: {source}")]
pub struct StrandNotExecutable {
    pub strand: String,
    #[source]
    pub source: NotExecutable,
}

/// Compiles every strand of a protocol.
pub fn compile_protocol(
    p: &Protocol,
    d: &DeductionSystem,
    prudent: bool,
) -> Result<ProtocolImplementation, StrandNotExecutable> {
    let mut frames = BTreeMap::new();
    for (strand, trace) in &p.traces {
        let frame = compile(trace, d, prudent).map_err(|source| StrandNotExecutable {
            strand: strand.clone(),
            source,
        })?;
        frames.insert(strand.clone(), frame);
    }
    Ok(ProtocolImplementation {
        strands: p.strands.clone(),
        frames,
        prudent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narration::{parse_narration, NarrationFile};
    use crate::syntax::parse_ground_term;
    use crate::term::Term;

    fn d() -> DeductionSystem {
        DeductionSystem::classic()
    }

    fn tr(d: &DeductionSystem, steps: &[(&str, char)]) -> Trace {
        Trace::new(
            steps
                .iter()
                .map(|(s, p)| {
                    let t = parse_ground_term(s, d).unwrap();
                    match p {
                        '!' => LabeledMessage::sent(t),
                        _ => LabeledMessage::received(t),
                    }
                })
                .collect(),
        )
    }

    fn nspk_role_a(d: &DeductionSystem) -> Trace {
        let text = "
            protocol nspk
            roles A, B
            fresh A: ~NA
            fresh B: ~NB
            A knows A, B, KA, KB, inv(KA)
            B knows A, B, KA, KB, inv(KB)
            A -> B : enc(pair(A, ~NA), KB)
            B -> A : enc(pair(~NA, ~NB), KA)
            A -> B : enc(~NB, KB)
        ";
        let NarrationFile::Protocol(p) = parse_narration(text, d).unwrap() else {
            unreachable!()
        };
        p.trace("A").unwrap().clone()
    }

    #[test]
    fn empty_frame_accepts_the_empty_trace() {
        let d = d();
        let frame = ActiveFrame::default();
        assert_eq!(evaluate(&frame, &Trace::empty(), &d).unwrap(), Trace::empty());
        assert!(is_implementation(&frame, &Trace::empty(), &d));
    }

    #[test]
    fn nspk_role_a_compiles_to_the_expected_recipes() {
        let d = d();
        let lam = nspk_role_a(&d);
        let frame = compile(&lam, &d, true).unwrap();
        let sends: Vec<String> = frame
            .steps()
            .iter()
            .filter_map(|s| match s {
                FrameStep::Send { recipe } => Some(recipe.to_string()),
                _ => None,
            })
            .collect();
        assert_eq!(sends, vec!["enc(pair(v2,v1),v5)", "enc(pi2(dec(v7,v6)),v5)"]);
        // The seventh input carries the basis tests; earlier ones are bare.
        let FrameStep::Receive { tests } = &frame.steps()[7] else {
            panic!("step 8 is the protocol receive");
        };
        assert!(tests.contains(
            &Context::parse("pi1(dec(v7,v6))", &d).unwrap(),
            &Context::parse("v1", &d).unwrap()
        ));
        // Unrelated knowledge items are received without checks; the last
        // one (the private key) is tested for being the inverse of v4.
        for step in &frame.steps()[0..5] {
            let FrameStep::Receive { tests } = step else {
                panic!("the first five steps receive initial knowledge");
            };
            assert!(tests.is_empty());
        }
        let FrameStep::Receive { tests } = &frame.steps()[5] else {
            panic!("step 6 receives the private key");
        };
        assert!(tests.contains(
            &Context::parse("v1", &d).unwrap(),
            &Context::parse("dec(enc(v1,v4),v6)", &d).unwrap()
        ));
    }

    #[test]
    fn round_trip_on_nspk_role_a() {
        let d = d();
        let lam = nspk_role_a(&d);
        for prudent in [false, true] {
            let frame = compile(&lam, &d, prudent).unwrap();
            assert!(is_implementation(&frame, &lam, &d));
        }
    }

    #[test]
    fn underivable_send_is_not_executable() {
        let d = d();
        let lam = tr(&d, &[("a", '!')]);
        let err = compile(&lam, &d, false).unwrap_err();
        assert_eq!(err.step, 1);
    }

    #[test]
    fn echo_trace_compiles_to_a_lookup() {
        let d = d();
        let lam = tr(&d, &[("a", '?'), ("a", '!')]);
        let frame = compile(&lam, &d, true).unwrap();
        let FrameStep::Send { recipe } = &frame.steps()[1] else {
            panic!("second step sends");
        };
        assert_eq!(recipe.to_string(), "v1");
        assert!(is_implementation(&frame, &lam, &d));
    }

    #[test]
    fn prudent_frame_rejects_a_malformed_protocol_message() {
        let d = d();
        let lam = nspk_role_a(&d);
        let frame = compile(&lam, &d, true).unwrap();
        let mut inputs = lam.input();
        // Replace the protocol ciphertext with something not under KA.
        let mut msgs: Vec<Term> = inputs.payloads().cloned().collect();
        msgs[6] = parse_ground_term("h(A,B,KA,KB)", &d).unwrap();
        inputs = Trace::positive(msgs);
        let err = evaluate(&frame, &inputs, &d).unwrap_err();
        match err {
            EvalError::Reject { step, .. } => assert_eq!(step, 8),
            other => panic!("expected a rejection, got {other:?}"),
        }
        // The non-prudent frame happily accepts the same inputs.
        let lax = compile(&lam, &d, false).unwrap();
        assert!(evaluate(&lax, &inputs, &d).is_ok());
    }

    #[test]
    fn length_mismatch_is_reported() {
        let d = d();
        let lam = tr(&d, &[("a", '?'), ("a", '!')]);
        let frame = compile(&lam, &d, false).unwrap();
        let err = evaluate(&frame, &Trace::empty(), &d).unwrap_err();
        assert!(matches!(err, EvalError::LengthMismatch { expected: 1, got: 0 }));
    }

    #[test]
    fn compiled_output_is_deterministic() {
        let d = d();
        let lam = nspk_role_a(&d);
        let a = compile(&lam, &d, true).unwrap();
        let b = compile(&lam, &d, true).unwrap();
        assert_eq!(
            serde_json::to_string(&a.to_json(Some("A"), true)).unwrap(),
            serde_json::to_string(&b.to_json(Some("A"), true)).unwrap()
        );
    }

    #[test]
    fn frame_positions_must_respect_the_input_discipline() {
        let d = d();
        let ahead = ActiveFrame::new(vec![FrameStep::Send {
            recipe: Context::parse("v1", &d).unwrap(),
        }]);
        assert!(ahead.is_err());
    }
}
