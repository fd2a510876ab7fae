//! The `.pnar` narration format: protocols, standalone traces, monitor
//! specifications, protocol executions and attack definitions.
//!
//! The format is line oriented with `#` comments. Protocols can be written
//! as Alice&Bob narrations (`A -> B : m` lines plus `knows`/`fresh`
//! declarations) or with explicit per-strand step sections; the
//! pretty-printer always emits the explicit form, which re-parses to the
//! same object.

use crate::syntax::{ParseError, ParseMode, Scanner};
use crate::term::Term;
use crate::theory::DeductionSystem;
use crate::trace::{LabeledMessage, Polarity, Trace};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// A protocol: a finite set of strands (roles) and one trace per strand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    pub name: String,
    pub strands: BTreeSet<String>,
    pub traces: BTreeMap<String, Trace>,
}

impl Protocol {
    pub fn trace(&self, strand: &str) -> Option<&Trace> {
        self.traces.get(strand)
    }

    /// Whether the strand's trace is all-sent.
    pub fn positive_strand(&self, strand: &str) -> Option<bool> {
        self.traces.get(strand).map(Trace::is_positive)
    }
}

/// A standalone named trace, as used by the refinement checker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedTrace {
    pub name: String,
    pub trace: Trace,
}

/// Role played by a participant of an execution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RoleRef {
    Role(String),
    Intruder,
}

/// A concrete run: participants, their ground traces, and the role map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolExecution {
    pub name: String,
    pub protocol: String,
    pub participants: BTreeSet<String>,
    pub traces: BTreeMap<String, Trace>,
    pub role_map: BTreeMap<String, RoleRef>,
}

impl ProtocolExecution {
    pub fn honest_participants(&self) -> impl Iterator<Item = &str> {
        self.participants
            .iter()
            .filter(|p| self.role_map.get(*p) != Some(&RoleRef::Intruder))
            .map(String::as_str)
    }

    /// Structural checks against the protocol this execution claims to run.
    pub fn validate_against(&self, protocol: &Protocol) -> Vec<String> {
        let mut issues = Vec::new();
        if self.protocol != protocol.name {
            issues.push(format!(
                "execution {} targets protocol {}, not {}",
                self.name, self.protocol, protocol.name
            ));
        }
        for p in &self.participants {
            if protocol.strands.contains(p) {
                issues.push(format!("participant {p} collides with a strand name"));
            }
            match self.role_map.get(p) {
                None => issues.push(format!("participant {p} has no role")),
                Some(RoleRef::Role(r)) if !protocol.strands.contains(r) => {
                    issues.push(format!("participant {p} plays unknown role {r}"))
                }
                _ => {}
            }
        }
        issues
    }
}

/// An attack definition: the attack execution plus the intended normal
/// execution of the honest participants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackDefinition {
    pub name: String,
    pub protocol: String,
    pub participants: BTreeSet<String>,
    pub role_map: BTreeMap<String, RoleRef>,
    pub attack_traces: BTreeMap<String, Trace>,
    pub normal_traces: BTreeMap<String, Trace>,
}

impl AttackDefinition {
    pub fn attack_execution(&self) -> ProtocolExecution {
        ProtocolExecution {
            name: format!("{}-attack", self.name),
            protocol: self.protocol.clone(),
            participants: self.participants.clone(),
            traces: self.attack_traces.clone(),
            role_map: self.role_map.clone(),
        }
    }

    /// The honest participants' expected run.
    pub fn normal_execution(&self) -> ProtocolExecution {
        let honest: BTreeSet<String> = self
            .participants
            .iter()
            .filter(|p| self.role_map.get(*p) != Some(&RoleRef::Intruder))
            .cloned()
            .collect();
        ProtocolExecution {
            name: format!("{}-normal", self.name),
            protocol: self.protocol.clone(),
            participants: honest.clone(),
            traces: self
                .normal_traces
                .iter()
                .filter(|(p, _)| honest.contains(*p))
                .map(|(p, t)| (p.clone(), t.clone()))
                .collect(),
            role_map: self
                .role_map
                .iter()
                .filter(|(p, _)| honest.contains(*p))
                .map(|(p, r)| (p.clone(), r.clone()))
                .collect(),
        }
    }
}

/// A monitor specification: per-strand disclosure traces. Strands left out
/// default to the all-input trace of the monitored protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorSpec {
    pub name: String,
    pub protocol: String,
    pub traces: BTreeMap<String, Trace>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NarrationFile {
    Protocol(Protocol),
    Trace(NamedTrace),
    Monitor(MonitorSpec),
    Attack(AttackDefinition),
    Execution(ProtocolExecution),
}

// ---------------------------------------------------------------------------
// Parsing

struct Line<'a> {
    no: usize,
    text: &'a str,
}

fn significant_lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(idx, raw)| {
            let without_comment = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            };
            let trimmed = without_comment.trim_end();
            if trimmed.trim().is_empty() {
                None
            } else {
                Some(Line {
                    no: idx + 1,
                    text: trimmed,
                })
            }
        })
        .collect()
}

#[derive(Default)]
struct StrandBuilder {
    fresh: Vec<Term>,
    knows: Vec<Term>,
    steps: Vec<LabeledMessage>,
    explicit: Vec<LabeledMessage>,
}

impl StrandBuilder {
    fn build(self) -> Trace {
        let mut t = Trace::empty();
        for n in self.fresh {
            t.push(LabeledMessage::received(n));
        }
        for k in self.knows {
            t.push(LabeledMessage::received(k));
        }
        for m in self.explicit {
            t.push(m);
        }
        for m in self.steps {
            t.push(m);
        }
        t
    }
}

/// Parses one narration file. The deduction system resolves function symbols
/// and checks arities.
pub fn parse_narration(text: &str, d: &DeductionSystem) -> Result<NarrationFile, ParseError> {
    let lines = significant_lines(text);
    if lines.is_empty() {
        // An empty file denotes the empty protocol.
        return Ok(NarrationFile::Protocol(Protocol {
            name: String::new(),
            strands: BTreeSet::new(),
            traces: BTreeMap::new(),
        }));
    }
    let mut header = Scanner::new(lines[0].text, lines[0].no);
    let kind = header.ident()?;
    match kind {
        "protocol" => parse_protocol(&lines, d),
        "trace" => parse_trace_file(&lines, d),
        "monitor" => parse_monitor(&lines, d),
        "attack" => parse_attack(&lines, d),
        "execution" => parse_execution(&lines, d),
        other => Err(ParseError::new(
            lines[0].no,
            1,
            format!("expected protocol, trace, monitor, attack or execution, found {other}"),
        )),
    }
}

fn header_name<'a>(line: &Line<'a>, keyword: &str) -> Result<(String, Scanner<'a>), ParseError> {
    let mut s = Scanner::new(line.text, line.no);
    let k = s.ident()?;
    debug_assert_eq!(k, keyword);
    let name = s.name()?.to_string();
    Ok((name, s))
}

fn parse_step_line(
    line: &Line<'_>,
    d: &DeductionSystem,
) -> Result<Option<LabeledMessage>, ParseError> {
    let mut s = Scanner::new(line.text, line.no);
    let polarity = match s.peek() {
        Some('!') => Polarity::Sent,
        Some('?') => Polarity::Received,
        _ => return Ok(None),
    };
    s.eat(if polarity == Polarity::Sent { '!' } else { '?' });
    let term = s.term(d, ParseMode::GroundMessage)?;
    if !s.at_end() {
        return Err(s.error("unexpected trailing input"));
    }
    Ok(Some(LabeledMessage::new(polarity, term)))
}

/// An endpoint of a message line: `a` or `i(a)`; the annotation is routing
/// metadata and is discarded after expansion.
fn parse_endpoint<'a>(s: &mut Scanner<'a>) -> Result<&'a str, ParseError> {
    let name = s.ident()?;
    if s.eat('(') {
        s.ident()?;
        s.expect(')')?;
    }
    Ok(name)
}

fn parse_term_list(
    s: &mut Scanner<'_>,
    d: &DeductionSystem,
) -> Result<Vec<Term>, ParseError> {
    let mut out = vec![s.term(d, ParseMode::GroundMessage)?];
    while s.eat(',') {
        out.push(s.term(d, ParseMode::GroundMessage)?);
    }
    if !s.at_end() {
        return Err(s.error("unexpected trailing input"));
    }
    Ok(out)
}

enum BodyLine {
    Fresh(String, Vec<Term>),
    Knows(String, Vec<Term>),
    Message(String, String, Term),
    StrandSection(String),
    Step(LabeledMessage),
    Plays(String, RoleRef),
    Participants(Vec<String>),
    Roles(Vec<String>),
    BlockHeader(String),
}

fn classify_line(line: &Line<'_>, d: &DeductionSystem) -> Result<BodyLine, ParseError> {
    if let Some(step) = parse_step_line(line, d)? {
        return Ok(BodyLine::Step(step));
    }
    let mut s = Scanner::new(line.text, line.no);
    // Optional step number prefix: `3. A -> B : m`.
    if matches!(s.peek(), Some(c) if c.is_ascii_digit()) {
        while matches!(s.peek(), Some(c) if c.is_ascii_digit()) {
            let c = s.peek().unwrap();
            s.eat(c);
        }
        s.expect('.')?;
    }
    let first = s.ident()?.to_string();
    match first.as_str() {
        "fresh" => {
            let strand = s.ident()?.to_string();
            s.expect(':')?;
            let items = parse_term_list(&mut s, d)?;
            for item in &items {
                if !matches!(item, Term::Nonce(_)) {
                    return Err(s.error(format!("fresh declares nonce constants, got {item}")));
                }
            }
            return Ok(BodyLine::Fresh(strand, items));
        }
        "participants" => {
            let mut names = vec![s.ident()?.to_string()];
            while s.eat(',') {
                names.push(s.ident()?.to_string());
            }
            if !s.at_end() {
                return Err(s.error("unexpected trailing input"));
            }
            return Ok(BodyLine::Participants(names));
        }
        "roles" => {
            let mut names = vec![s.ident()?.to_string()];
            while s.eat(',') {
                names.push(s.ident()?.to_string());
            }
            if !s.at_end() {
                return Err(s.error("unexpected trailing input"));
            }
            return Ok(BodyLine::Roles(names));
        }
        "strand" | "share" => {
            let name = s.ident()?.to_string();
            s.expect(':')?;
            if !s.at_end() {
                return Err(s.error("unexpected trailing input"));
            }
            return Ok(BodyLine::StrandSection(name));
        }
        "attack" | "normal" => {
            if s.eat(':') && s.at_end() {
                return Ok(BodyLine::BlockHeader(first));
            }
            return Err(s.error(format!("malformed {first} block header")));
        }
        _ => {}
    }
    // `X knows ...`, `X plays ...`, `X -> Y : m`, `X(A) -> Y : m`.
    if s.eat('(') {
        s.ident()?;
        s.expect(')')?;
    }
    if let Some(c) = s.peek() {
        if c == '-' {
            s.expect('-')?;
            s.expect('>')?;
            let recipient = parse_endpoint(&mut s)?.to_string();
            s.expect(':')?;
            let term = s.term(d, ParseMode::GroundMessage)?;
            if !s.at_end() {
                return Err(s.error("unexpected trailing input"));
            }
            return Ok(BodyLine::Message(first, recipient, term));
        }
    }
    let verb = s.ident()?;
    match verb {
        "knows" => {
            let items = parse_term_list(&mut s, d)?;
            Ok(BodyLine::Knows(first, items))
        }
        "plays" => {
            let role = s.ident()?;
            let role = if role == "intruder" {
                RoleRef::Intruder
            } else {
                RoleRef::Role(role.to_string())
            };
            if !s.at_end() {
                return Err(s.error("unexpected trailing input"));
            }
            Ok(BodyLine::Plays(first, role))
        }
        other => Err(s.error(format!("expected 'knows', 'plays' or '->', found '{other}'"))),
    }
}

fn parse_protocol(lines: &[Line<'_>], d: &DeductionSystem) -> Result<NarrationFile, ParseError> {
    let (name, _) = header_name(&lines[0], "protocol")?;
    let mut strands: BTreeSet<String> = BTreeSet::new();
    let mut builders: BTreeMap<String, StrandBuilder> = BTreeMap::new();
    let mut section: Option<String> = None;
    for line in &lines[1..] {
        match classify_line(line, d)? {
            BodyLine::Roles(names) => {
                for n in names {
                    strands.insert(n.clone());
                    builders.entry(n).or_default();
                }
            }
            BodyLine::Fresh(strand, items) => {
                section = None;
                let b = known_strand(&mut builders, &strands, &strand, line.no)?;
                b.fresh.extend(items);
            }
            BodyLine::Knows(strand, items) => {
                section = None;
                let b = known_strand(&mut builders, &strands, &strand, line.no)?;
                b.knows.extend(items);
            }
            BodyLine::Message(from, to, term) => {
                section = None;
                known_strand(&mut builders, &strands, &from, line.no)?
                    .steps
                    .push(LabeledMessage::sent(term.clone()));
                known_strand(&mut builders, &strands, &to, line.no)?
                    .steps
                    .push(LabeledMessage::received(term));
            }
            BodyLine::StrandSection(strand) => {
                known_strand(&mut builders, &strands, &strand, line.no)?;
                section = Some(strand);
            }
            BodyLine::Step(step) => match &section {
                Some(strand) => builders
                    .get_mut(strand)
                    .expect("section strand exists")
                    .explicit
                    .push(step),
                None => {
                    return Err(ParseError::new(
                        line.no,
                        1,
                        "step line outside of a strand section",
                    ))
                }
            },
            _ => {
                return Err(ParseError::new(
                    line.no,
                    1,
                    "unexpected line in a protocol file",
                ))
            }
        }
    }
    let traces = builders
        .into_iter()
        .map(|(s, b)| (s, b.build()))
        .collect();
    Ok(NarrationFile::Protocol(Protocol {
        name,
        strands,
        traces,
    }))
}

fn known_strand<'b>(
    builders: &'b mut BTreeMap<String, StrandBuilder>,
    strands: &BTreeSet<String>,
    name: &str,
    line: usize,
) -> Result<&'b mut StrandBuilder, ParseError> {
    if !strands.contains(name) {
        return Err(ParseError::new(line, 1, format!("undeclared role {name}")));
    }
    Ok(builders.get_mut(name).expect("declared roles have builders"))
}

fn parse_trace_file(lines: &[Line<'_>], d: &DeductionSystem) -> Result<NarrationFile, ParseError> {
    let (name, _) = header_name(&lines[0], "trace")?;
    let mut trace = Trace::empty();
    for line in &lines[1..] {
        match parse_step_line(line, d)? {
            Some(step) => trace.push(step),
            None => {
                return Err(ParseError::new(
                    line.no,
                    1,
                    "expected a step line (`! term` or `? term`)",
                ))
            }
        }
    }
    Ok(NarrationFile::Trace(NamedTrace { name, trace }))
}

fn parse_monitor(lines: &[Line<'_>], d: &DeductionSystem) -> Result<NarrationFile, ParseError> {
    let (name, mut s) = header_name(&lines[0], "monitor")?;
    let kw = s.ident()?;
    if kw != "for" {
        return Err(s.error("expected 'for PROTOCOL'"));
    }
    let protocol = s.name()?.to_string();
    let mut traces: BTreeMap<String, Trace> = BTreeMap::new();
    let mut section: Option<String> = None;
    for line in &lines[1..] {
        match classify_line(line, d)? {
            BodyLine::StrandSection(strand) => {
                if traces.contains_key(&strand) {
                    return Err(ParseError::new(
                        line.no,
                        1,
                        format!("duplicate share section for {strand}"),
                    ));
                }
                traces.insert(strand.clone(), Trace::empty());
                section = Some(strand);
            }
            BodyLine::Step(step) => match &section {
                Some(strand) => traces.get_mut(strand).unwrap().push(step),
                None => {
                    return Err(ParseError::new(
                        line.no,
                        1,
                        "step line outside of a share section",
                    ))
                }
            },
            _ => {
                return Err(ParseError::new(
                    line.no,
                    1,
                    "expected a share section or a step line",
                ))
            }
        }
    }
    Ok(NarrationFile::Monitor(MonitorSpec {
        name,
        protocol,
        traces,
    }))
}

struct ExecutionBody {
    traces: BTreeMap<String, Trace>,
    mentioned: BTreeSet<String>,
}

fn parse_execution_body(
    lines: &[Line<'_>],
    participants: &BTreeSet<String>,
    d: &DeductionSystem,
) -> Result<ExecutionBody, ParseError> {
    let mut builders: BTreeMap<String, StrandBuilder> = participants
        .iter()
        .map(|p| (p.clone(), StrandBuilder::default()))
        .collect();
    let mut mentioned = BTreeSet::new();
    let mut section: Option<String> = None;
    for line in lines {
        match classify_line(line, d)? {
            BodyLine::Fresh(p, items) => {
                section = None;
                if let Some(b) = builders.get_mut(&p) {
                    mentioned.insert(p);
                    b.fresh.extend(items);
                }
            }
            BodyLine::Knows(p, items) => {
                section = None;
                if let Some(b) = builders.get_mut(&p) {
                    mentioned.insert(p);
                    b.knows.extend(items);
                }
            }
            BodyLine::Message(from, to, term) => {
                section = None;
                if let Some(b) = builders.get_mut(&from) {
                    mentioned.insert(from);
                    b.steps.push(LabeledMessage::sent(term.clone()));
                }
                if let Some(b) = builders.get_mut(&to) {
                    mentioned.insert(to);
                    b.steps.push(LabeledMessage::received(term));
                }
            }
            BodyLine::StrandSection(p) => {
                if !builders.contains_key(&p) {
                    return Err(ParseError::new(
                        line.no,
                        1,
                        format!("undeclared participant {p}"),
                    ));
                }
                mentioned.insert(p.clone());
                section = Some(p);
            }
            BodyLine::Step(step) => match &section {
                Some(p) => builders.get_mut(p).unwrap().explicit.push(step),
                None => {
                    return Err(ParseError::new(
                        line.no,
                        1,
                        "step line outside of a strand section",
                    ))
                }
            },
            _ => {
                return Err(ParseError::new(line.no, 1, "unexpected line in execution body"))
            }
        }
    }
    Ok(ExecutionBody {
        traces: builders.into_iter().map(|(p, b)| (p, b.build())).collect(),
        mentioned,
    })
}

struct Declarations {
    participants: BTreeSet<String>,
    role_map: BTreeMap<String, RoleRef>,
}

fn parse_declarations(
    lines: &[Line<'_>],
    d: &DeductionSystem,
) -> Result<(Declarations, usize), ParseError> {
    let mut participants = BTreeSet::new();
    let mut role_map = BTreeMap::new();
    let mut consumed = 0;
    for (i, line) in lines.iter().enumerate() {
        match classify_line(line, d)? {
            BodyLine::Participants(names) => {
                participants.extend(names);
                consumed = i + 1;
            }
            BodyLine::Plays(p, role) => {
                if !participants.contains(&p) {
                    return Err(ParseError::new(
                        line.no,
                        1,
                        format!("undeclared participant {p}"),
                    ));
                }
                role_map.insert(p, role);
                consumed = i + 1;
            }
            _ => break,
        }
    }
    Ok((
        Declarations {
            participants,
            role_map,
        },
        consumed,
    ))
}

fn parse_attack(lines: &[Line<'_>], d: &DeductionSystem) -> Result<NarrationFile, ParseError> {
    let (name, mut s) = header_name(&lines[0], "attack")?;
    let kw = s.ident()?;
    if kw != "on" {
        return Err(s.error("expected 'on PROTOCOL'"));
    }
    let protocol = s.name()?.to_string();
    let body = &lines[1..];
    let (decls, consumed) = parse_declarations(body, d)?;
    let mut attack_lines: Vec<&Line<'_>> = Vec::new();
    let mut normal_lines: Vec<&Line<'_>> = Vec::new();
    let mut current: Option<&mut Vec<&Line<'_>>> = None;
    for line in &body[consumed..] {
        if let BodyLine::BlockHeader(which) = classify_line(line, d)? {
            current = Some(if which == "attack" {
                &mut attack_lines
            } else {
                &mut normal_lines
            });
            continue;
        }
        match current.as_deref_mut() {
            Some(block) => block.push(line),
            None => {
                return Err(ParseError::new(
                    line.no,
                    1,
                    "expected an `attack:` or `normal:` block header",
                ))
            }
        }
    }
    let honest: BTreeSet<String> = decls
        .participants
        .iter()
        .filter(|p| decls.role_map.get(*p) != Some(&RoleRef::Intruder))
        .cloned()
        .collect();
    let attack_body = parse_execution_body(
        &attack_lines.iter().map(|l| Line { no: l.no, text: l.text }).collect::<Vec<_>>(),
        &decls.participants,
        d,
    )?;
    let normal_body = parse_execution_body(
        &normal_lines.iter().map(|l| Line { no: l.no, text: l.text }).collect::<Vec<_>>(),
        &honest,
        d,
    )?;
    for p in &normal_body.mentioned {
        if !honest.contains(p) {
            return Err(ParseError::new(
                lines[0].no,
                1,
                format!("intruder participant {p} appears in the normal block"),
            ));
        }
    }
    Ok(NarrationFile::Attack(AttackDefinition {
        name,
        protocol,
        participants: decls.participants,
        role_map: decls.role_map,
        attack_traces: attack_body.traces,
        normal_traces: normal_body.traces,
    }))
}

fn parse_execution(lines: &[Line<'_>], d: &DeductionSystem) -> Result<NarrationFile, ParseError> {
    let (name, mut s) = header_name(&lines[0], "execution")?;
    let kw = s.ident()?;
    if kw != "of" {
        return Err(s.error("expected 'of PROTOCOL'"));
    }
    let protocol = s.name()?.to_string();
    let body = &lines[1..];
    let (decls, consumed) = parse_declarations(body, d)?;
    let rest: Vec<Line<'_>> = body[consumed..]
        .iter()
        .map(|l| Line { no: l.no, text: l.text })
        .collect();
    let exec_body = parse_execution_body(&rest, &decls.participants, d)?;
    Ok(NarrationFile::Execution(ProtocolExecution {
        name,
        protocol,
        participants: decls.participants,
        traces: exec_body.traces,
        role_map: decls.role_map,
    }))
}

// ---------------------------------------------------------------------------
// Pretty printing (canonical explicit form)

fn write_trace_section(out: &mut String, header: &str, trace: &Trace) {
    let _ = writeln!(out, "{header}");
    for m in trace.iter() {
        let _ = writeln!(out, "  {} {}", m.polarity.mark(), m.payload);
    }
}

pub fn print_protocol(p: &Protocol) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "protocol {}", if p.name.is_empty() { "unnamed" } else { &p.name });
    if !p.strands.is_empty() {
        let roles: Vec<&str> = p.strands.iter().map(String::as_str).collect();
        let _ = writeln!(out, "roles {}", roles.join(", "));
    }
    for (strand, trace) in &p.traces {
        write_trace_section(&mut out, &format!("strand {strand}:"), trace);
    }
    out
}

pub fn print_named_trace(t: &NamedTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "trace {}", t.name);
    for m in t.trace.iter() {
        let _ = writeln!(out, "{} {}", m.polarity.mark(), m.payload);
    }
    out
}

pub fn print_monitor(m: &MonitorSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "monitor {} for {}", m.name, m.protocol);
    for (strand, trace) in &m.traces {
        write_trace_section(&mut out, &format!("share {strand}:"), trace);
    }
    out
}

fn print_role_map(out: &mut String, role_map: &BTreeMap<String, RoleRef>) {
    for (p, role) in role_map {
        match role {
            RoleRef::Role(r) => {
                let _ = writeln!(out, "{p} plays {r}");
            }
            RoleRef::Intruder => {
                let _ = writeln!(out, "{p} plays intruder");
            }
        }
    }
}

pub fn print_attack(a: &AttackDefinition) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "attack {} on {}", a.name, a.protocol);
    let names: Vec<&str> = a.participants.iter().map(String::as_str).collect();
    let _ = writeln!(out, "participants {}", names.join(", "));
    print_role_map(&mut out, &a.role_map);
    let _ = writeln!(out, "attack:");
    for (p, trace) in &a.attack_traces {
        write_trace_section(&mut out, &format!("  strand {p}:"), trace);
    }
    let _ = writeln!(out, "normal:");
    for (p, trace) in &a.normal_traces {
        write_trace_section(&mut out, &format!("  strand {p}:"), trace);
    }
    out
}

pub fn print_execution(e: &ProtocolExecution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "execution {} of {}", e.name, e.protocol);
    let names: Vec<&str> = e.participants.iter().map(String::as_str).collect();
    let _ = writeln!(out, "participants {}", names.join(", "));
    print_role_map(&mut out, &e.role_map);
    for (p, trace) in &e.traces {
        write_trace_section(&mut out, &format!("strand {p}:"), trace);
    }
    out
}

pub fn print_narration(file: &NarrationFile) -> String {
    match file {
        NarrationFile::Protocol(p) => print_protocol(p),
        NarrationFile::Trace(t) => print_named_trace(t),
        NarrationFile::Monitor(m) => print_monitor(m),
        NarrationFile::Attack(a) => print_attack(a),
        NarrationFile::Execution(e) => print_execution(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_ground_term;

    const NSPK: &str = "
        protocol nspk
        roles A, B
        fresh A: ~NA
        fresh B: ~NB
        A knows A, B, KA, KB, inv(KA)
        B knows A, B, KA, KB, inv(KB)
        1. A -> B : enc(pair(A, ~NA), KB)
        2. B -> A : enc(pair(~NA, ~NB), KA)
        3. A -> B : enc(~NB, KB)
    ";

    fn classic() -> DeductionSystem {
        DeductionSystem::classic()
    }

    #[test]
    fn nspk_narration_expands_to_role_traces() {
        let d = classic();
        let NarrationFile::Protocol(p) = parse_narration(NSPK, &d).unwrap() else {
            panic!("expected a protocol");
        };
        assert_eq!(p.name, "nspk");
        assert_eq!(
            p.strands.iter().cloned().collect::<Vec<_>>(),
            vec!["A".to_string(), "B".to_string()]
        );
        let a = p.trace("A").unwrap();
        assert_eq!(a.len(), 9);
        let expected_prefix = [
            "?~NA", "?A", "?B", "?KA", "?KB", "?inv(KA)",
            "!enc(pair(A,~NA),KB)",
        ];
        for (i, want) in expected_prefix.iter().enumerate() {
            assert_eq!(a.get(i).unwrap().to_string(), *want);
        }
        assert_eq!(a.get(7).unwrap().to_string(), "?enc(pair(~NA,~NB),KA)");
        assert_eq!(a.get(8).unwrap().to_string(), "!enc(~NB,KB)");
        assert!(!p.positive_strand("A").unwrap());
    }

    #[test]
    fn empty_file_is_the_empty_protocol() {
        let d = classic();
        let NarrationFile::Protocol(p) = parse_narration("", &d).unwrap() else {
            panic!("expected a protocol");
        };
        assert!(p.strands.is_empty());
    }

    #[test]
    fn unclosed_parenthesis_is_a_syntax_error() {
        let d = classic();
        let err = parse_narration(
            "protocol broken\nroles A, B\nA -> B : enc(a",
            &d,
        )
        .unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("expected"), "{err}");
    }

    #[test]
    fn round_trip_protocol() {
        let d = classic();
        let parsed = parse_narration(NSPK, &d).unwrap();
        let printed = print_narration(&parsed);
        let reparsed = parse_narration(&printed, &d).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn attack_files_carry_both_blocks() {
        let d = classic();
        let text = "
            attack reflect on ping
            participants a, i
            a plays A
            i plays intruder
            attack:
              a knows A, B
              a -> i : h(A, A, A, A)
              i -> a : h(A, A, A, A)
            normal:
              a knows A, B
              a -> b : h(A, A, A, A)
              b -> a : h(B, A, A, A)
        ";
        let NarrationFile::Attack(atk) = parse_narration(text, &d).unwrap() else {
            panic!("expected an attack definition");
        };
        assert_eq!(atk.role_map.get("i"), Some(&RoleRef::Intruder));
        assert_eq!(atk.attack_traces["a"].len(), 4);
        assert_eq!(atk.attack_traces["i"].len(), 2);
        assert_eq!(atk.normal_traces["a"].len(), 4);
        assert!(atk.normal_traces.get("i").is_none());
        let h = parse_ground_term("h(A,A,A,A)", &d).unwrap();
        assert_eq!(atk.attack_traces["a"].get(2).unwrap().payload, h);
        // Round-trip through the canonical form.
        let printed = print_attack(&atk);
        let NarrationFile::Attack(again) = parse_narration(&printed, &d).unwrap() else {
            panic!("expected an attack definition");
        };
        assert_eq!(atk, again);
    }

    #[test]
    fn monitor_share_sections() {
        let d = classic();
        let text = "
            monitor min for ping
            share A:
              ? A
              ! h(A, A, A, A)
        ";
        let NarrationFile::Monitor(m) = parse_narration(text, &d).unwrap() else {
            panic!("expected a monitor");
        };
        assert_eq!(m.protocol, "ping");
        assert_eq!(m.traces["A"].len(), 2);
    }

    #[test]
    fn reserved_positions_rejected_in_messages() {
        let d = classic();
        let err = parse_narration("trace t\n! v1", &d).unwrap_err();
        assert!(err.message.contains("reserved"), "{err}");
    }
}
