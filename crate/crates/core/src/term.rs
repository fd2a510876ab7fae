//! Terms, function symbols and substitutions for symbolic messages.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// A function symbol: name, arity and visibility.
///
/// Public symbols are the operations agents can apply themselves; private
/// symbols may occur inside messages but never inside a recipe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
    pub public: bool,
}

impl Symbol {
    pub fn new(name: impl Into<String>, arity: usize, public: bool) -> Self {
        Symbol {
            name: name.into(),
            arity,
            public,
        }
    }
}

/// A symbolic message.
///
/// Free constants and nonce constants live in two disjoint namespaces; nonce
/// constants are written with a `~` prefix in the surface syntax. Variables
/// named `v1`, `v2`, ... are reserved to denote positions in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    /// A free constant such as an agent name or a key.
    Free(String),
    /// A nonce constant, modelling a freshly generated value.
    Nonce(String),
    /// A variable.
    Var(String),
    /// An application of a function symbol to arguments.
    App(Symbol, Vec<Term>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("symbol {symbol} expects {expected} arguments, got {got}")]
    Arity {
        symbol: String,
        expected: usize,
        got: usize,
    },
}

impl Term {
    pub fn free(name: impl Into<String>) -> Term {
        Term::Free(name.into())
    }

    pub fn nonce(name: impl Into<String>) -> Term {
        Term::Nonce(name.into())
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    /// The reserved position variable `v{i}` (1-based).
    pub fn position(i: usize) -> Term {
        Term::Var(format!("v{i}"))
    }

    /// Builds an application, checking the arity.
    pub fn app(symbol: &Symbol, args: Vec<Term>) -> Result<Term, TermError> {
        if args.len() != symbol.arity {
            return Err(TermError::Arity {
                symbol: symbol.name.clone(),
                expected: symbol.arity,
                got: args.len(),
            });
        }
        Ok(Term::App(symbol.clone(), args))
    }

    /// If `name` is a reserved position variable `vN`, returns N.
    pub fn position_index(name: &str) -> Option<usize> {
        let digits = name.strip_prefix('v')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        // Reject leading zeros so the name space stays canonical.
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        digits.parse().ok()
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }

    /// Height of the term; atoms have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    /// Collects variable names.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            _ => {}
        }
    }

    /// Collects free and nonce constants (as terms).
    pub fn constants(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.collect_constants(&mut out);
        out
    }

    fn collect_constants(&self, out: &mut BTreeSet<Term>) {
        match self {
            Term::Free(_) | Term::Nonce(_) => {
                out.insert(self.clone());
            }
            Term::App(_, args) => {
                for a in args {
                    a.collect_constants(out);
                }
            }
            Term::Var(_) => {}
        }
    }

    /// True if `sub` occurs in `self` (including `self` itself).
    pub fn contains(&self, sub: &Term) -> bool {
        if self == sub {
            return true;
        }
        match self {
            Term::App(_, args) => args.iter().any(|a| a.contains(sub)),
            _ => false,
        }
    }

    /// Pre-order traversal over all subterms.
    pub fn for_each_subterm<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        if let Term::App(_, args) = self {
            for a in args {
                a.for_each_subterm(f);
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Free(name) => write!(out, "{name}"),
            Term::Nonce(name) => write!(out, "~{name}"),
            Term::Var(name) => write!(out, "{name}"),
            Term::App(sym, args) => {
                if args.is_empty() {
                    return write!(out, "{}", sym.name);
                }
                write!(out, "{}(", sym.name)?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(out, ",")?;
                    }
                    write!(out, "{a}")?;
                }
                write!(out, ")")
            }
        }
    }
}

/// Total order used wherever a canonical pick among terms is needed:
/// node count first, then the structural order.
pub fn term_cmp(a: &Term, b: &Term) -> std::cmp::Ordering {
    a.size().cmp(&b.size()).then_with(|| a.cmp(b))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubstitutionError {
    #[error("substitution is not idempotent: variable {0} occurs in a bound term")]
    NotIdempotent(String),
}

/// An idempotent mapping from variables to terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new(bindings: BTreeMap<String, Term>) -> Result<Self, SubstitutionError> {
        for t in bindings.values() {
            for x in t.vars() {
                if bindings.contains_key(&x) {
                    return Err(SubstitutionError::NotIdempotent(x));
                }
            }
        }
        Ok(Substitution { bindings })
    }

    pub fn empty() -> Self {
        Substitution::default()
    }

    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(String::as_str)
    }

    pub fn get(&self, x: &str) -> Option<&Term> {
        self.bindings.get(x)
    }

    /// Homomorphic replacement of the bound variables.
    pub fn apply(&self, t: &Term) -> Term {
        apply_bindings(&self.bindings, t)
    }
}

/// Replaces bound variables in `t`; unbound variables stay as they are.
pub fn apply_bindings(bindings: &BTreeMap<String, Term>, t: &Term) -> Term {
    match t {
        Term::Var(x) => bindings.get(x).cloned().unwrap_or_else(|| t.clone()),
        Term::App(sym, args) => Term::App(
            sym.clone(),
            args.iter().map(|a| apply_bindings(bindings, a)).collect(),
        ),
        _ => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc() -> Symbol {
        Symbol::new("enc", 2, true)
    }

    #[test]
    fn apply_subst_binds_variables() {
        let sigma = Substitution::new(
            [("x".to_string(), Term::free("a"))].into_iter().collect(),
        )
        .unwrap();
        assert_eq!(sigma.apply(&Term::var("x")), Term::free("a"));
    }

    #[test]
    fn apply_subst_is_homomorphic() {
        let sigma = Substitution::new(
            [("x".to_string(), Term::free("a"))].into_iter().collect(),
        )
        .unwrap();
        let t = Term::app(&enc(), vec![Term::var("x"), Term::free("k")]).unwrap();
        let expected = Term::app(&enc(), vec![Term::free("a"), Term::free("k")]).unwrap();
        assert_eq!(sigma.apply(&t), expected);
    }

    #[test]
    fn apply_subst_leaves_out_of_support_variables() {
        let sigma = Substitution::new(
            [("x".to_string(), Term::free("a"))].into_iter().collect(),
        )
        .unwrap();
        assert_eq!(sigma.apply(&Term::var("y")), Term::var("y"));
    }

    #[test]
    fn non_idempotent_substitution_rejected() {
        let bad = Substitution::new(
            [("x".to_string(), Term::var("x"))].into_iter().collect(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn arity_is_checked() {
        assert!(Term::app(&enc(), vec![Term::free("a")]).is_err());
    }

    #[test]
    fn position_names() {
        assert_eq!(Term::position_index("v7"), Some(7));
        assert_eq!(Term::position_index("v07"), None);
        assert_eq!(Term::position_index("vx"), None);
        assert_eq!(Term::position_index("w1"), None);
        assert_eq!(Term::position(3), Term::var("v3"));
    }

    #[test]
    fn display_round_shape() {
        let t = Term::app(&enc(), vec![Term::nonce("NA"), Term::free("KB")]).unwrap();
        assert_eq!(t.to_string(), "enc(~NA,KB)");
        assert_eq!(t.size(), 3);
        assert_eq!(t.depth(), 2);
    }
}
