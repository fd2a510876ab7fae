//! Contexts (recipes over trace positions) and test systems.

use crate::syntax::{parse_term_str, ParseError, ParseMode};
use crate::term::{term_cmp, Term};
use crate::theory::DeductionSystem;
use crate::trace::Trace;
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("contexts may not contain the constant {0}")]
    Constant(String),
    #[error("private symbol {0} may not appear in a context")]
    PrivateSymbol(String),
    #[error("variable {0} is not a position variable")]
    NotAPosition(String),
    #[error("position v{0} exceeds the declared arity {1}")]
    PositionBeyondArity(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("position v{position} is out of range for a trace of length {trace_len}")]
pub struct PositionError {
    pub position: usize,
    pub trace_len: usize,
}

/// A term built from public symbols and position variables only. Applying it
/// to a trace replaces each `vi` by the trace's i-th message and normalizes.
///
/// The declared arity is bookkeeping (the position space the context was
/// written for); identity is the body alone.
#[derive(Debug, Clone)]
pub struct Context {
    body: Term,
    arity: usize,
}

impl PartialEq for Context {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body
    }
}

impl Eq for Context {}

impl std::hash::Hash for Context {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.body.hash(state);
    }
}

impl PartialOrd for Context {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Context {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.body.cmp(&other.body)
    }
}

impl Context {
    pub fn new(body: Term, arity: usize) -> Result<Self, ContextError> {
        let mut err = None;
        body.for_each_subterm(&mut |t| {
            if err.is_some() {
                return;
            }
            match t {
                Term::Free(name) | Term::Nonce(name) => {
                    err = Some(ContextError::Constant(name.clone()));
                }
                Term::Var(name) => match Term::position_index(name) {
                    Some(i) if i > arity => {
                        err = Some(ContextError::PositionBeyondArity(i, arity));
                    }
                    Some(_) => {}
                    None => err = Some(ContextError::NotAPosition(name.clone())),
                },
                Term::App(sym, _) if !sym.public => {
                    err = Some(ContextError::PrivateSymbol(sym.name.clone()));
                }
                Term::App(_, _) => {}
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(Context { body, arity }),
        }
    }

    /// Builds a context whose arity is the largest position mentioned.
    pub fn from_body(body: Term) -> Result<Self, ContextError> {
        let arity = max_position_of(&body);
        Context::new(body, arity)
    }

    /// The projection context `vi`.
    pub fn position(i: usize) -> Self {
        Context {
            body: Term::position(i),
            arity: i,
        }
    }

    pub fn body(&self) -> &Term {
        &self.body
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Largest position index actually used; 0 for a closed body.
    pub fn max_position(&self) -> usize {
        max_position_of(&self.body)
    }

    pub fn size(&self) -> usize {
        self.body.size()
    }

    pub fn depth(&self) -> usize {
        self.body.depth()
    }

    /// Widens the declared arity.
    pub fn with_arity(&self, arity: usize) -> Context {
        debug_assert!(arity >= self.max_position());
        Context {
            body: self.body.clone(),
            arity,
        }
    }

    /// Applies the context to a trace and normalizes the result.
    pub fn apply(&self, trace: &Trace, d: &DeductionSystem) -> Result<Term, PositionError> {
        let t = instantiate(&self.body, trace)?;
        Ok(d.normalize(&t))
    }

    pub fn parse(s: &str, d: &DeductionSystem) -> Result<Self, ParseError> {
        let body = parse_term_str(s, d, ParseMode::Context)?;
        Context::from_body(body).map_err(|e| ParseError::new(1, 1, e.to_string()))
    }
}

fn max_position_of(t: &Term) -> usize {
    let mut max = 0;
    t.for_each_subterm(&mut |s| {
        if let Term::Var(name) = s {
            if let Some(i) = Term::position_index(name) {
                max = max.max(i);
            }
        }
    });
    max
}

fn instantiate(body: &Term, trace: &Trace) -> Result<Term, PositionError> {
    match body {
        Term::Var(name) => {
            let i = Term::position_index(name).expect("context bodies hold positions only");
            trace.message(i).cloned().ok_or(PositionError {
                position: i,
                trace_len: trace.len(),
            })
        }
        Term::App(sym, args) => {
            let args = args
                .iter()
                .map(|a| instantiate(a, trace))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Term::App(sym.clone(), args))
        }
        _ => Ok(body.clone()),
    }
}

/// Orders a pair of contexts canonically: smaller side (by node count, then
/// structurally) first.
pub fn orient_pair(a: Context, b: Context) -> (Context, Context) {
    if term_cmp(a.body(), b.body()) <= std::cmp::Ordering::Equal {
        (a, b)
    } else {
        (b, a)
    }
}

impl fmt::Display for Context {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "{}", self.body)
    }
}

/// A finite set of context equations, all sharing one position space.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TestSystem {
    equations: BTreeSet<(Context, Context)>,
    arity: usize,
}

impl TestSystem {
    pub fn empty() -> Self {
        TestSystem::default()
    }

    pub fn new(pairs: impl IntoIterator<Item = (Context, Context)>) -> Self {
        let mut s = TestSystem::empty();
        for (a, b) in pairs {
            s.insert(a, b);
        }
        s
    }

    pub fn insert(&mut self, a: Context, b: Context) {
        self.arity = self.arity.max(a.max_position()).max(b.max_position());
        self.equations.insert(orient_pair(a, b));
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    /// Common position-space bound of all member contexts.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Context, Context)> {
        self.equations.iter()
    }

    /// Orientation-insensitive membership.
    pub fn contains(&self, a: &Context, b: &Context) -> bool {
        let key = orient_pair(a.clone(), b.clone());
        self.equations.contains(&key)
    }

    pub fn union(&self, other: &TestSystem) -> TestSystem {
        let mut out = self.clone();
        for (a, b) in other.iter() {
            out.insert(a.clone(), b.clone());
        }
        out
    }

    /// Set difference on oriented pairs.
    pub fn difference(&self, other: &TestSystem) -> TestSystem {
        TestSystem::new(
            self.equations
                .iter()
                .filter(|pair| !other.equations.contains(pair))
                .cloned(),
        )
    }
}

impl fmt::Display for TestSystem {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "{{")?;
        for (i, (a, b)) in self.equations.iter().enumerate() {
            if i > 0 {
                write!(out, ", ")?;
            }
            write!(out, "{a} =? {b}")?;
        }
        write!(out, "}}")
    }
}

/// Whether every equation of `system` holds on `trace` modulo E.
pub fn satisfies(
    trace: &Trace,
    system: &TestSystem,
    d: &DeductionSystem,
) -> Result<bool, PositionError> {
    for (lhs, rhs) in system.iter() {
        let left = lhs.apply(trace, d)?;
        let right = rhs.apply(trace, d)?;
        if left != right {
            return Ok(false);
        }
    }
    Ok(true)
}

/// First equation of `system` that fails on `trace`, if any.
pub fn first_violation(
    trace: &Trace,
    system: &TestSystem,
    d: &DeductionSystem,
) -> Result<Option<(Context, Context)>, PositionError> {
    for (lhs, rhs) in system.iter() {
        if lhs.apply(trace, d)? != rhs.apply(trace, d)? {
            return Ok(Some((lhs.clone(), rhs.clone())));
        }
    }
    Ok(None)
}

/// Ground substitution view of a context application, used by tests that
/// instantiate position variables directly.
pub fn bindings_of(trace: &Trace) -> BTreeMap<String, Term> {
    trace
        .payloads()
        .enumerate()
        .map(|(i, t)| (format!("v{}", i + 1), t.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_ground_term;
    use crate::term::Term;
    use crate::trace::Trace;

    fn d() -> DeductionSystem {
        DeductionSystem::classic()
    }

    fn ctx(s: &str) -> Context {
        Context::parse(s, &d()).unwrap()
    }

    #[test]
    fn apply_projects_and_normalizes() {
        let d = d();
        let lam = Trace::positive(vec![
            parse_ground_term("enc(pair(a,~na),kb)", &d).unwrap(),
            parse_ground_term("inv(kb)", &d).unwrap(),
        ]);
        let c = ctx("pi1(dec(v1,v2))");
        assert_eq!(c.apply(&lam, &d).unwrap(), Term::free("a"));
    }

    #[test]
    fn apply_single_position() {
        let d = d();
        let lam = Trace::positive(vec![Term::free("a")]);
        assert_eq!(ctx("v1").apply(&lam, &d).unwrap(), Term::free("a"));
    }

    #[test]
    fn out_of_range_position_is_reported() {
        let d = d();
        let lam = Trace::positive(vec![Term::free("a"), Term::free("b")]);
        let err = ctx("v3").apply(&lam, &d).unwrap_err();
        assert_eq!(err.position, 3);
        assert_eq!(err.trace_len, 2);
    }

    #[test]
    fn satisfies_duplicate_entries() {
        let d = d();
        let lam = Trace::positive(vec![Term::free("a"), Term::free("a")]);
        let sys = TestSystem::new([(ctx("v1"), ctx("v2"))]);
        assert!(satisfies(&lam, &sys, &d).unwrap());
    }

    #[test]
    fn satisfies_fails_on_distinct_hashes() {
        let d = d();
        let lam = Trace::positive(vec![
            parse_ground_term("h(A,D,kA,R)", &d).unwrap(),
            parse_ground_term("h(B,D,kA,R)", &d).unwrap(),
        ]);
        let sys = TestSystem::new([(ctx("v1"), ctx("v2"))]);
        assert!(!satisfies(&lam, &sys, &d).unwrap());
    }

    #[test]
    fn empty_system_is_always_satisfied() {
        let d = d();
        let lam = Trace::positive(vec![Term::free("x")]);
        assert!(satisfies(&lam, &TestSystem::empty(), &d).unwrap());
    }

    #[test]
    fn contexts_reject_constants_and_private_symbols() {
        assert!(Context::parse("a", &d()).is_err());
        assert!(Context::parse("inv(v1)", &d()).is_err());
        assert!(Context::parse("~n", &d()).is_err());
    }
}
