//! Protocol monitors: disclosure traces, execution logs, attack
//! presentations, detectability, and synthesis of the verdict rule that
//! tells a known attack apart from the intended run.

use crate::compiler::{compile, evaluate, ActiveFrame, ProtocolImplementation};
use crate::context::Context;
use crate::deduction::{equivalent, finite_basis, reduce_detectability, static_equivalence};
use crate::narration::{AttackDefinition, MonitorSpec, Protocol, ProtocolExecution, RoleRef};
use crate::term::Term;
use crate::theory::DeductionSystem;
use crate::trace::Trace;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// A monitor for a protocol: same strands, same inputs, and one disclosure
/// trace per strand whose sends are the data shared with the monitoring
/// authority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monitor {
    pub name: String,
    pub strands: BTreeSet<String>,
    pub disclosure_traces: BTreeMap<String, Trace>,
}

impl Monitor {
    /// Fills a parsed specification against its protocol: strands without a
    /// share section disclose nothing and just read their protocol inputs.
    pub fn materialize(spec: &MonitorSpec, protocol: &Protocol) -> Monitor {
        let mut traces = BTreeMap::new();
        for strand in &protocol.strands {
            let trace = match spec.traces.get(strand) {
                Some(t) => t.clone(),
                None => protocol
                    .traces
                    .get(strand)
                    .map(|t| t.input().negate())
                    .unwrap_or_default(),
            };
            traces.insert(strand.clone(), trace);
        }
        Monitor {
            name: spec.name.clone(),
            strands: protocol.strands.clone(),
            disclosure_traces: traces,
        }
    }

    /// The trivial monitor that disclosures every action of the protocol.
    pub fn full_disclosure(protocol: &Protocol) -> Monitor {
        Monitor {
            name: format!("{}-full", protocol.name),
            strands: protocol.strands.clone(),
            disclosure_traces: protocol.traces.clone(),
        }
    }
}

/// Outcome of validating a monitor against its protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorValidation {
    pub ok: bool,
    pub issues: Vec<String>,
}

/// Checks the three monitor conditions: equal strand sets, per-strand input
/// equality modulo E, and executability of every disclosure trace.
pub fn validate_monitor(m: &Monitor, p: &Protocol, d: &DeductionSystem) -> MonitorValidation {
    let mut issues = Vec::new();
    if m.strands != p.strands {
        issues.push(format!(
            "strand sets differ: monitor has {:?}, protocol has {:?}",
            m.strands, p.strands
        ));
    }
    for strand in m.strands.intersection(&p.strands) {
        let (Some(mt), Some(pt)) = (m.disclosure_traces.get(strand), p.traces.get(strand)) else {
            issues.push(format!("strand {strand} is missing a trace"));
            continue;
        };
        let m_in = mt.input();
        let p_in = pt.input();
        if m_in.len() != p_in.len()
            || !m_in
                .payloads()
                .zip(p_in.payloads())
                .all(|(a, b)| d.eq_mod_e(a, b))
        {
            issues.push(format!(
                "strand {strand}: monitor inputs {m_in} differ from protocol inputs {p_in}"
            ));
        }
        if let Err(e) = compile(mt, d, false) {
            issues.push(format!("strand {strand}: disclosure trace not executable: {e}"));
        }
    }
    MonitorValidation {
        ok: issues.is_empty(),
        issues,
    }
}

/// The ordered concatenation of the honest participants' disclosed outputs,
/// with provenance kept per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionLog {
    pub entries: Vec<(String, Term)>,
    pub participant_order: Vec<String>,
}

impl ExecutionLog {
    pub fn as_trace(&self) -> Trace {
        Trace::positive(self.entries.iter().map(|(_, t)| t.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "order": self.participant_order,
            "entries": self
                .entries
                .iter()
                .map(|(p, t)| json!({ "participant": p, "message": t.to_string() }))
                .collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("participant {participant} plays unknown role {role}")]
    UnknownRole { participant: String, role: String },
    #[error("participant {participant} has no trace")]
    MissingTrace { participant: String },
    #[error("monitor trace for role {role} is not executable: {detail}")]
    MonitorNotExecutable { role: String, detail: String },
    #[error("monitor frame for {participant} (role {role}) rejected its input: {detail}")]
    Reject {
        participant: String,
        role: String,
        detail: String,
    },
}

/// Lexicographic participant order, the default for logs.
pub fn default_order(e: &ProtocolExecution) -> Vec<String> {
    e.honest_participants().map(str::to_string).collect()
}

/// Computes the execution log of `e` under monitor `m`.
///
/// Each honest participant's received messages are run through the compiled
/// disclosure frame of its role and the outputs are concatenated in `order`.
/// Monitor frames are compiled non-prudently: the monitor records what
/// participants share, and the synthesized verdict rule does the policing.
/// The implementation `i_p` fixes the role set; the log itself depends only
/// on the monitor, the execution and the order.
pub fn execution_log(
    i_p: &ProtocolImplementation,
    m: &Monitor,
    e: &ProtocolExecution,
    d: &DeductionSystem,
    order: &[String],
) -> Result<ExecutionLog, LogError> {
    let mut frames: BTreeMap<String, ActiveFrame> = BTreeMap::new();
    let mut entries = Vec::new();
    for participant in order {
        let role = match e.role_map.get(participant) {
            Some(RoleRef::Role(r)) => r.clone(),
            Some(RoleRef::Intruder) => continue,
            None => {
                return Err(LogError::UnknownRole {
                    participant: participant.clone(),
                    role: "<unmapped>".to_string(),
                })
            }
        };
        if !i_p.strands.contains(&role) || !m.strands.contains(&role) {
            return Err(LogError::UnknownRole {
                participant: participant.clone(),
                role,
            });
        }
        if !frames.contains_key(&role) {
            let trace = m
                .disclosure_traces
                .get(&role)
                .expect("monitor strands carry traces");
            let frame = compile(trace, d, false).map_err(|err| LogError::MonitorNotExecutable {
                role: role.clone(),
                detail: err.to_string(),
            })?;
            frames.insert(role.clone(), frame);
        }
        let trace = e
            .traces
            .get(participant)
            .ok_or_else(|| LogError::MissingTrace {
                participant: participant.clone(),
            })?;
        let run = evaluate(&frames[&role], &trace.input(), d).map_err(|err| LogError::Reject {
            participant: participant.clone(),
            role: role.clone(),
            detail: err.to_string(),
        })?;
        for t in run.output().payloads() {
            entries.push((participant.clone(), t.clone()));
        }
    }
    Ok(ExecutionLog {
        entries,
        participant_order: order.to_vec(),
    })
}

/// The two logs an attack definition presents to a monitor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackPresentation {
    pub attack_log: ExecutionLog,
    pub normal_log: ExecutionLog,
    pub warnings: Vec<String>,
}

/// Builds the presentation of `a` to monitor `m`: the logs of the attack and
/// the normal execution over the honest participants, in the same order.
/// Diverging initial-knowledge segments are reported as warnings.
pub fn attack_presentation(
    i_p: &ProtocolImplementation,
    m: &Monitor,
    a: &AttackDefinition,
    d: &DeductionSystem,
    order: &[String],
) -> Result<AttackPresentation, LogError> {
    let attack_exec = a.attack_execution();
    let normal_exec = a.normal_execution();
    let attack_log = execution_log(i_p, m, &attack_exec, d, order)?;
    let normal_log = execution_log(i_p, m, &normal_exec, d, order)?;
    let mut warnings = Vec::new();
    for p in normal_exec.participants.iter() {
        let (Some(at), Some(nt)) = (a.attack_traces.get(p), a.normal_traces.get(p)) else {
            continue;
        };
        let prefix_len = |t: &Trace| {
            t.iter()
                .take_while(|m| m.polarity == crate::trace::Polarity::Received)
                .count()
        };
        let k = prefix_len(at).min(prefix_len(nt));
        let same = (0..k).all(|i| {
            d.eq_mod_e(&at.get(i).unwrap().payload, &nt.get(i).unwrap().payload)
        });
        if !same || prefix_len(at) != prefix_len(nt) {
            warnings.push(format!(
                "participant {p}: initial knowledge differs between the attack and normal traces"
            ));
        }
    }
    Ok(AttackPresentation {
        attack_log,
        normal_log,
        warnings,
    })
}

/// An attack is detectable when its two logs are not equivalent.
pub fn detectable(pres: &AttackPresentation, d: &DeductionSystem) -> bool {
    !equivalent(&pres.attack_log.as_trace(), &pres.normal_log.as_trace(), d)
}

/// Same decision routed through frames with hidden constants and static
/// equivalence; must agree with [`detectable`].
pub fn detectable_via_static_equivalence(pres: &AttackPresentation, d: &DeductionSystem) -> bool {
    let (f1, f2) = reduce_detectability(&pres.attack_log.as_trace(), &pres.normal_log.as_trace());
    !static_equivalence(&f1, &f2, d)
}

/// When a rule blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictPolarity {
    /// The equation holds on the intended run; block executions violating it.
    BlockIfViolated,
    /// The equation holds only on the attack; block executions satisfying it.
    BlockIfSatisfied,
}

/// A monitor check over log positions, with its blocking polarity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorVerdictRule {
    pub lhs: Context,
    pub rhs: Context,
    pub polarity: VerdictPolarity,
}

impl MonitorVerdictRule {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "lhs": self.lhs.to_string(),
            "rhs": self.rhs.to_string(),
            "polarity": match self.polarity {
                VerdictPolarity::BlockIfViolated => "block_if_violated",
                VerdictPolarity::BlockIfSatisfied => "block_if_satisfied",
            },
        })
    }

    pub fn from_json(
        value: &serde_json::Value,
        d: &DeductionSystem,
    ) -> Result<Self, String> {
        let lhs = value
            .get("lhs")
            .and_then(|v| v.as_str())
            .ok_or("rule is missing \"lhs\"")?;
        let rhs = value
            .get("rhs")
            .and_then(|v| v.as_str())
            .ok_or("rule is missing \"rhs\"")?;
        let polarity = match value.get("polarity").and_then(|v| v.as_str()) {
            Some("block_if_violated") => VerdictPolarity::BlockIfViolated,
            Some("block_if_satisfied") => VerdictPolarity::BlockIfSatisfied,
            other => return Err(format!("unknown polarity {other:?}")),
        };
        Ok(MonitorVerdictRule {
            lhs: Context::parse(lhs, d).map_err(|e| e.to_string())?,
            rhs: Context::parse(rhs, d).map_err(|e| e.to_string())?,
            polarity,
        })
    }
}

/// Searches the basis of the normal log for an equation the attack log
/// violates (block on violation), then the basis of the attack log for one
/// the normal log violates (block on satisfaction). Among candidates the
/// smallest equation wins. `None` means the attack is not detectable.
pub fn synthesize_test(
    pres: &AttackPresentation,
    d: &DeductionSystem,
) -> Option<MonitorVerdictRule> {
    let attack = pres.attack_log.as_trace();
    let normal = pres.normal_log.as_trace();
    let pick = |holds_on: &Trace, violated_by: &Trace, polarity: VerdictPolarity| {
        let basis = finite_basis(holds_on, d);
        let mut best: Option<(usize, MonitorVerdictRule)> = None;
        for (lhs, rhs) in basis.pairs() {
            let broken = match (lhs.apply(violated_by, d), rhs.apply(violated_by, d)) {
                (Ok(a), Ok(b)) => a != b,
                // A pair reaching beyond the other log cannot hold there.
                _ => true,
            };
            if broken {
                let cost = lhs.size() + rhs.size();
                let candidate = MonitorVerdictRule {
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                    polarity,
                };
                let better = match &best {
                    None => true,
                    Some((best_cost, best_rule)) => {
                        cost < *best_cost
                            || (cost == *best_cost
                                && (candidate.lhs.body(), candidate.rhs.body())
                                    < (best_rule.lhs.body(), best_rule.rhs.body()))
                    }
                };
                if better {
                    best = Some((cost, candidate));
                }
            }
        }
        best.map(|(_, rule)| rule)
    };
    pick(&normal, &attack, VerdictPolarity::BlockIfViolated)
        .or_else(|| pick(&attack, &normal, VerdictPolarity::BlockIfSatisfied))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Allow,
    Block,
}

/// Evaluates a rule on a log.
pub fn apply_verdict(
    rule: &MonitorVerdictRule,
    log: &ExecutionLog,
    d: &DeductionSystem,
) -> Verdict {
    let trace = log.as_trace();
    let holds = match (rule.lhs.apply(&trace, d), rule.rhs.apply(&trace, d)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    match (rule.polarity, holds) {
        (VerdictPolarity::BlockIfViolated, false) => Verdict::Block,
        (VerdictPolarity::BlockIfSatisfied, true) => Verdict::Block,
        _ => Verdict::Allow,
    }
}
