//! Deduction systems: signatures plus a convergent rewrite presentation of
//! the equational theory, with normalization and equality modulo E.
//!
//! The rule class is restricted to subterm-convergent systems: every
//! right-hand side is a proper subterm of its left-hand side or a ground
//! public term. This guarantees terminating normalization and keeps
//! derivability and trace refinement decidable.

use crate::syntax::{parse_term_str, ParseError, ParseMode};
use crate::term::{apply_bindings, Symbol, Term};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

const REWRITE_FUEL: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TheoryError {
    #[error("duplicate symbol {0}")]
    DuplicateSymbol(String),
    #[error("rule uses undeclared symbol {0}")]
    UnknownSymbol(String),
    #[error("rule left-hand side must be a function application: {0}")]
    LhsNotApplication(String),
    #[error("rule right-hand side uses variable {0} absent from the left-hand side")]
    UnboundRuleVariable(String),
    #[error("rule {0} -> {1} is not subterm-convergent: the right-hand side is neither a proper subterm of the left-hand side nor a ground public term")]
    NotSubtermConvergent(String, String),
}

/// An oriented equation `lhs -> rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    lhs: Term,
    rhs: Term,
}

impl RewriteRule {
    pub fn new(lhs: Term, rhs: Term) -> Result<Self, TheoryError> {
        let Term::App(_, _) = lhs else {
            return Err(TheoryError::LhsNotApplication(lhs.to_string()));
        };
        let lhs_vars = lhs.vars();
        for x in rhs.vars() {
            if !lhs_vars.contains(&x) {
                return Err(TheoryError::UnboundRuleVariable(x));
            }
        }
        let proper_subterm = rhs != lhs && lhs.contains(&rhs);
        let ground_public = rhs.is_ground()
            && rhs.constants().is_empty()
            && all_symbols_public(&rhs);
        if !proper_subterm && !ground_public {
            return Err(TheoryError::NotSubtermConvergent(
                lhs.to_string(),
                rhs.to_string(),
            ));
        }
        Ok(RewriteRule { lhs, rhs })
    }

    pub fn lhs(&self) -> &Term {
        &self.lhs
    }

    pub fn rhs(&self) -> &Term {
        &self.rhs
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "{} -> {}", self.lhs, self.rhs)
    }
}

fn all_symbols_public(t: &Term) -> bool {
    match t {
        Term::App(sym, args) => sym.public && args.iter().all(all_symbols_public),
        _ => true,
    }
}

/// Matches `pattern` against `t`, extending `bindings`. Purely syntactic.
pub fn match_pattern(
    pattern: &Term,
    t: &Term,
    bindings: &mut BTreeMap<String, Term>,
) -> bool {
    match pattern {
        Term::Var(x) => match bindings.get(x) {
            Some(bound) => bound == t,
            None => {
                bindings.insert(x.clone(), t.clone());
                true
            }
        },
        Term::App(sym, args) => match t {
            Term::App(tsym, targs) if tsym == sym => args
                .iter()
                .zip(targs.iter())
                .all(|(p, a)| match_pattern(p, a, bindings)),
            _ => false,
        },
        _ => pattern == t,
    }
}

/// A signature together with a convergent rewrite presentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeductionSystem {
    name: String,
    symbols: BTreeMap<String, Symbol>,
    rules: Vec<RewriteRule>,
}

impl DeductionSystem {
    pub fn new(
        name: impl Into<String>,
        symbols: Vec<Symbol>,
        rules: Vec<RewriteRule>,
    ) -> Result<Self, TheoryError> {
        let mut map = BTreeMap::new();
        for s in symbols {
            if map.insert(s.name.clone(), s.clone()).is_some() {
                return Err(TheoryError::DuplicateSymbol(s.name));
            }
        }
        for rule in &rules {
            for side in [rule.lhs(), rule.rhs()] {
                let mut missing = None;
                side.for_each_subterm(&mut |t| {
                    if let Term::App(sym, _) = t {
                        if map.get(&sym.name) != Some(sym) && missing.is_none() {
                            missing = Some(sym.name.clone());
                        }
                    }
                });
                if let Some(name) = missing {
                    return Err(TheoryError::UnknownSymbol(name));
                }
            }
        }
        Ok(DeductionSystem {
            name: name.into(),
            symbols: map,
            rules,
        })
    }

    /// The built-in theory: pairing with projections, asymmetric encryption
    /// with a private key-inverse, symmetric encryption, and a free 4-ary
    /// hash.
    pub fn classic() -> Self {
        let pair = Symbol::new("pair", 2, true);
        let pi1 = Symbol::new("pi1", 1, true);
        let pi2 = Symbol::new("pi2", 1, true);
        let enc = Symbol::new("enc", 2, true);
        let dec = Symbol::new("dec", 2, true);
        let inv = Symbol::new("inv", 1, false);
        let senc = Symbol::new("senc", 2, true);
        let sdec = Symbol::new("sdec", 2, true);
        let h = Symbol::new("h", 4, true);
        let x = || Term::var("x");
        let y = || Term::var("y");
        let rules = vec![
            RewriteRule::new(
                Term::App(pi1.clone(), vec![Term::App(pair.clone(), vec![x(), y()])]),
                x(),
            )
            .unwrap(),
            RewriteRule::new(
                Term::App(pi2.clone(), vec![Term::App(pair.clone(), vec![x(), y()])]),
                y(),
            )
            .unwrap(),
            RewriteRule::new(
                Term::App(
                    dec.clone(),
                    vec![
                        Term::App(enc.clone(), vec![x(), y()]),
                        Term::App(inv.clone(), vec![y()]),
                    ],
                ),
                x(),
            )
            .unwrap(),
            RewriteRule::new(
                Term::App(
                    sdec.clone(),
                    vec![Term::App(senc.clone(), vec![x(), y()]), y()],
                ),
                x(),
            )
            .unwrap(),
        ];
        DeductionSystem::new(
            "classic",
            vec![pair, pi1, pi2, enc, dec, inv, senc, sdec, h],
            rules,
        )
        .unwrap()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn public_symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values().filter(|s| s.public)
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    /// Unique normal form under exhaustive innermost rewriting.
    pub fn normalize(&self, t: &Term) -> Term {
        let mut fuel = REWRITE_FUEL;
        self.normalize_innermost(t, &mut fuel)
    }

    fn normalize_innermost(&self, t: &Term, fuel: &mut u64) -> Term {
        match t {
            Term::App(sym, args) => {
                let args: Vec<Term> = args
                    .iter()
                    .map(|a| self.normalize_innermost(a, fuel))
                    .collect();
                let cur = Term::App(sym.clone(), args);
                for rule in &self.rules {
                    let mut bindings = BTreeMap::new();
                    if match_pattern(rule.lhs(), &cur, &mut bindings) {
                        self.spend(fuel);
                        let reduced = apply_bindings(&bindings, rule.rhs());
                        return self.normalize_innermost(&reduced, fuel);
                    }
                }
                cur
            }
            _ => t.clone(),
        }
    }

    /// Normal form under leftmost-outermost rewriting; used to cross-check
    /// confluence of a rule set.
    pub fn normalize_outermost(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        let mut fuel = REWRITE_FUEL;
        while let Some(next) = self.rewrite_outermost_once(&cur) {
            self.spend(&mut fuel);
            cur = next;
        }
        cur
    }

    fn rewrite_outermost_once(&self, t: &Term) -> Option<Term> {
        for rule in &self.rules {
            let mut bindings = BTreeMap::new();
            if match_pattern(rule.lhs(), t, &mut bindings) {
                return Some(apply_bindings(&bindings, rule.rhs()));
            }
        }
        if let Term::App(sym, args) = t {
            for (i, a) in args.iter().enumerate() {
                if let Some(next) = self.rewrite_outermost_once(a) {
                    let mut args = args.clone();
                    args[i] = next;
                    return Some(Term::App(sym.clone(), args));
                }
            }
        }
        None
    }

    fn spend(&self, fuel: &mut u64) {
        *fuel = fuel.checked_sub(1).unwrap_or_else(|| {
            panic!(
                "rewriting exceeded the step budget; the rule set of theory '{}' does not converge",
                self.name
            )
        });
    }

    /// Equality modulo the equational theory.
    pub fn eq_mod_e(&self, a: &Term, b: &Term) -> bool {
        self.normalize(a) == self.normalize(b)
    }

    /// Loads a theory from its declarative text form: one `fun name/arity
    /// [private]` line per symbol and one `rule lhs -> rhs` line per rule.
    /// In rule terms every identifier that is not a declared 0-ary symbol is
    /// a variable.
    pub fn parse(text: &str) -> Result<Self, TheoryFileError> {
        let mut name = String::from("theory");
        let mut symbols: Vec<Symbol> = Vec::new();
        let mut raw_rules: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("theory ") {
                name = rest.trim().to_string();
            } else if let Some(rest) = line.strip_prefix("fun ") {
                let (decl, private) = match rest.trim().strip_suffix("private") {
                    Some(head) => (head.trim(), true),
                    None => (rest.trim(), false),
                };
                let (sym_name, arity) = decl.split_once('/').ok_or(TheoryFileError::Line {
                    line: line_no,
                    message: "expected fun name/arity".to_string(),
                })?;
                let arity: usize =
                    arity.trim().parse().map_err(|_| TheoryFileError::Line {
                        line: line_no,
                        message: format!("invalid arity '{}'", arity.trim()),
                    })?;
                symbols.push(Symbol::new(sym_name.trim(), arity, !private));
            } else if let Some(rest) = line.strip_prefix("rule ") {
                let (lhs, rhs) = rest.split_once("->").ok_or(TheoryFileError::Line {
                    line: line_no,
                    message: "expected rule lhs -> rhs".to_string(),
                })?;
                raw_rules.push((line_no, lhs.trim().to_string(), rhs.trim().to_string()));
            } else {
                return Err(TheoryFileError::Line {
                    line: line_no,
                    message: format!("unrecognized directive: {line}"),
                });
            }
        }
        // Two passes: symbols first so rule terms can be resolved.
        let signature = DeductionSystem::new(name.clone(), symbols.clone(), Vec::new())?;
        let mut rules = Vec::new();
        for (line_no, lhs, rhs) in raw_rules {
            let lhs = parse_term_str(&lhs, &signature, ParseMode::RuleTerm)
                .map_err(|e| e.at_line(line_no))?;
            let rhs = parse_term_str(&rhs, &signature, ParseMode::RuleTerm)
                .map_err(|e| e.at_line(line_no))?;
            rules.push(RewriteRule::new(lhs, rhs)?);
        }
        Ok(DeductionSystem::new(name, symbols, rules)?)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

#[derive(Debug, Error)]
pub enum TheoryFileError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}
