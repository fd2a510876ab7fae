//! Depth-bounded brute-force oracle over the context space, used to
//! cross-validate recipe synthesis and finite bases.
//!
//! Conceptually the oracle ranges over every pair of contexts up to a depth
//! bound and keeps the pairs that are equal on a trace. Materializing that
//! space literally is hopeless (free constructors make it grow as a tower of
//! powers), so the exploration works on its quotient: one class per distinct
//! value, discovered level by level. Three facts make the quotient exact for
//! the questions asked of it:
//!
//! * equality modulo E is a congruence, so the value of an application only
//!   depends on the values of its arguments;
//! * if two applications of the same symbol are equal on the trace without
//!   rewriting at the root, their arguments are equal pairwise, so a minimal
//!   equality witness always has one side that is a position or rewrites at
//!   the root;
//! * transparent (non-rewriting) applications can therefore be left virtual:
//!   they are reconstructed on demand when a materialized class's value
//!   decomposes over derivable arguments.
//!
//! Classes that can feed a rewrite step (their root occurs inside a rule
//! left-hand side) are materialized one level further than the rest, so
//! every root-rewriting application up to the depth bound is enumerated.

use crate::context::{orient_pair, satisfies, Context};
use crate::deduction::Basis;
use crate::term::Term;
use crate::theory::{match_pattern, DeductionSystem};
use crate::trace::Trace;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use thiserror::Error;

/// Depth bound and work budget of one oracle run.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub depth: usize,
    pub budget: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            depth: 3,
            budget: 1_000_000,
        }
    }
}

impl OracleLimits {
    pub fn with_depth(depth: usize) -> Self {
        OracleLimits {
            depth,
            ..OracleLimits::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("oracle exhausted its budget of {budget} probes")]
pub struct ResourceLimit {
    pub budget: u64,
}

struct Class {
    value: Term,
    repr: Term,
    depth: usize,
}

/// What the exploration is for. Equality pairs need constructor classes
/// materialized so root-rewriting collisions up to the bound are found;
/// reachability does not, because a smallest recipe never rewrites at the
/// root of a constructor it built itself, so the pool of positions and
/// extraction results plus on-demand composition covers everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Pairs,
    Reach,
}

struct Explorer<'a> {
    d: &'a DeductionSystem,
    limits: OracleLimits,
    spent: u64,
    classes: Vec<Class>,
    by_value: HashMap<Term, usize>,
    applied: HashSet<(String, Vec<usize>)>,
    pairs: BTreeSet<(Term, Term)>,
    trace_len: usize,
}

impl<'a> Explorer<'a> {
    fn run(
        lam: &Trace,
        d: &'a DeductionSystem,
        limits: OracleLimits,
        mode: Mode,
    ) -> Result<Self, ResourceLimit> {
        assert!(limits.depth >= 1, "the oracle needs depth >= 1");
        assert!(lam.is_positive(), "the oracle reads positive traces");
        let mut ex = Explorer {
            d,
            limits,
            spent: 0,
            classes: Vec::new(),
            by_value: HashMap::new(),
            applied: HashSet::new(),
            pairs: BTreeSet::new(),
            trace_len: lam.len(),
        };
        let fuel_roots = fuel_roots(d);
        for (i, m) in lam.payloads().enumerate() {
            ex.add_or_hit(d.normalize(m), Term::position(i + 1), 1)?;
        }
        for sym in d.public_symbols().filter(|s| s.arity == 0) {
            ex.add_or_hit(
                d.normalize(&Term::App(sym.clone(), Vec::new())),
                Term::App(sym.clone(), Vec::new()),
                1,
            )?;
        }
        for level in 2..=ex.limits.depth {
            let snapshot = ex.classes.len();
            ex.fire_rules(level, snapshot)?;
            if mode == Mode::Pairs && level + 1 <= ex.limits.depth {
                let full = level + 2 <= ex.limits.depth;
                ex.apply_transparent(level, snapshot, full, &fuel_roots)?;
            }
        }
        if mode == Mode::Pairs {
            ex.partner_pass()?;
        }
        Ok(ex)
    }

    fn charge(&mut self) -> Result<(), ResourceLimit> {
        self.spent += 1;
        if self.spent > self.limits.budget {
            return Err(ResourceLimit {
                budget: self.limits.budget,
            });
        }
        Ok(())
    }

    fn add_or_hit(&mut self, value: Term, repr: Term, depth: usize) -> Result<usize, ResourceLimit> {
        match self.by_value.get(&value) {
            Some(&id) => {
                let known = self.classes[id].repr.clone();
                if known != repr {
                    self.emit(known, repr)?;
                }
                Ok(id)
            }
            None => {
                let id = self.classes.len();
                self.by_value.insert(value.clone(), id);
                self.classes.push(Class { value, repr, depth });
                Ok(id)
            }
        }
    }

    fn emit(&mut self, a: Term, b: Term) -> Result<(), ResourceLimit> {
        self.charge()?;
        let (a, b) = orient_bodies(a, b, self.trace_len);
        self.pairs.insert((a.body().clone(), b.body().clone()));
        Ok(())
    }

    /// Smallest-depth realization of a value, preferring materialized
    /// classes and falling back to public decomposition.
    fn compose(&self, value: &Term, max_depth: usize) -> Option<(Term, usize)> {
        if max_depth == 0 {
            return None;
        }
        if let Some(&id) = self.by_value.get(value) {
            let class = &self.classes[id];
            if class.depth <= max_depth {
                return Some((class.repr.clone(), class.depth));
            }
        }
        if let Term::App(sym, args) = value {
            if sym.public {
                let mut bodies = Vec::with_capacity(args.len());
                let mut depth = 0;
                for a in args {
                    let (body, d) = self.compose(a, max_depth - 1)?;
                    depth = depth.max(d);
                    bodies.push(body);
                }
                return Some((Term::App(sym.clone(), bodies), depth + 1));
            }
        }
        None
    }

    /// Rule-driven applications that rewrite at the root. Structured
    /// argument patterns are matched against class values; variable
    /// positions are filled by composing the bound value.
    fn fire_rules(&mut self, level: usize, snapshot: usize) -> Result<(), ResourceLimit> {
        let d = self.d;
        for rule in d.rules() {
            let Term::App(sym, patterns) = rule.lhs().clone() else {
                continue;
            };
            let rhs_vars = rule.rhs().vars();
            let mut states: Vec<(BTreeMap<String, Term>, Vec<Option<usize>>)> =
                vec![(BTreeMap::new(), vec![None; patterns.len()])];
            for (j, p) in patterns.iter().enumerate() {
                if matches!(p, Term::Var(_)) {
                    continue;
                }
                let mut next = Vec::new();
                for (bindings, slots) in &states {
                    for id in 0..snapshot {
                        self.charge()?;
                        let mut extended = bindings.clone();
                        if match_pattern(p, &self.classes[id].value, &mut extended) {
                            let mut slots = slots.clone();
                            slots[j] = Some(id);
                            next.push((extended, slots));
                        }
                    }
                }
                states = next;
            }
            'state: for (bindings, mut slots) in states {
                for (j, p) in patterns.iter().enumerate() {
                    let Term::Var(x) = p else { continue };
                    match bindings.get(x) {
                        Some(value) => {
                            let value = d.normalize(value);
                            let Some((body, depth)) = self.compose(&value, level - 1) else {
                                continue 'state;
                            };
                            let id = self.add_or_hit(value, body, depth)?;
                            slots[j] = Some(id);
                        }
                        None => {
                            if rhs_vars.contains(x) || self.classes.is_empty() {
                                continue 'state;
                            }
                            slots[j] = Some(0);
                        }
                    }
                }
                let ids: Vec<usize> = slots.into_iter().map(|s| s.expect("slots filled")).collect();
                if ids.iter().map(|&id| self.classes[id].depth).max() != Some(level - 1) {
                    continue;
                }
                self.apply(sym.clone(), ids, level)?;
            }
        }
        Ok(())
    }

    /// Constructor-style applications. With `full` every public symbol is
    /// applied; otherwise only symbols that can occur under a rule pattern
    /// (the others stay virtual and are recovered by `compose`).
    fn apply_transparent(
        &mut self,
        level: usize,
        snapshot: usize,
        full: bool,
        fuel_roots: &BTreeSet<String>,
    ) -> Result<(), ResourceLimit> {
        if snapshot == 0 {
            return Ok(());
        }
        let symbols: Vec<_> = self
            .d
            .public_symbols()
            .filter(|s| s.arity >= 1)
            .filter(|s| full || fuel_roots.contains(&s.name))
            .cloned()
            .collect();
        for sym in symbols {
            let mut ids = vec![0usize; sym.arity];
            'tuples: loop {
                let newest = ids
                    .iter()
                    .map(|&id| self.classes[id].depth)
                    .max()
                    .expect("arity >= 1");
                if newest == level - 1 {
                    self.apply(sym.clone(), ids.clone(), level)?;
                }
                // Advance the tuple odometer.
                let mut pos = sym.arity;
                while pos > 0 {
                    pos -= 1;
                    ids[pos] += 1;
                    if ids[pos] < snapshot {
                        continue 'tuples;
                    }
                    ids[pos] = 0;
                }
                break;
            }
        }
        Ok(())
    }

    fn apply(
        &mut self,
        sym: crate::term::Symbol,
        ids: Vec<usize>,
        level: usize,
    ) -> Result<(), ResourceLimit> {
        let d = self.d;
        self.charge()?;
        if !self.applied.insert((sym.name.clone(), ids.clone())) {
            return Ok(());
        }
        let args: Vec<Term> = ids.iter().map(|&id| self.classes[id].value.clone()).collect();
        let repr_args: Vec<Term> = ids.iter().map(|&id| self.classes[id].repr.clone()).collect();
        let value = d.normalize(&Term::App(sym.clone(), args));
        let depth = 1 + ids
            .iter()
            .map(|&id| self.classes[id].depth)
            .max()
            .unwrap_or(0);
        debug_assert!(depth <= level);
        self.add_or_hit(value, Term::App(sym, repr_args), depth)?;
        Ok(())
    }

    /// Emits, for every class whose value decomposes over derivable
    /// arguments, the pair between its representative and the virtual
    /// transparent construction of the same value.
    fn partner_pass(&mut self) -> Result<(), ResourceLimit> {
        for id in 0..self.classes.len() {
            let value = self.classes[id].value.clone();
            let Term::App(sym, args) = &value else { continue };
            if !sym.public {
                continue;
            }
            self.charge()?;
            let mut bodies = Vec::with_capacity(args.len());
            let mut ok = true;
            for a in args {
                match self.compose(a, self.limits.depth - 1) {
                    Some((body, _)) => bodies.push(body),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let partner = Term::App(sym.clone(), bodies);
            let repr = self.classes[id].repr.clone();
            if partner != repr {
                self.emit(repr, partner)?;
            }
        }
        Ok(())
    }

    fn into_basis(self) -> Basis {
        let n = self.trace_len;
        Basis::new(self.pairs.into_iter().map(|(a, b)| {
            (
                Context::new(a, n).expect("oracle bodies are contexts"),
                Context::new(b, n).expect("oracle bodies are contexts"),
            )
        }))
    }
}

fn orient_bodies(a: Term, b: Term, n: usize) -> (Context, Context) {
    orient_pair(
        Context::new(a, n).expect("oracle bodies are contexts"),
        Context::new(b, n).expect("oracle bodies are contexts"),
    )
}

/// Public symbols that appear strictly inside some rule left-hand side:
/// applications with these roots can become part of a redex later on.
fn fuel_roots(d: &DeductionSystem) -> BTreeSet<String> {
    let mut roots = BTreeSet::new();
    for rule in d.rules() {
        if let Term::App(_, args) = rule.lhs() {
            for arg in args {
                arg.for_each_subterm(&mut |t| {
                    if let Term::App(sym, _) = t {
                        if sym.public {
                            roots.insert(sym.name.clone());
                        }
                    }
                });
            }
        }
    }
    roots
}

/// All context equalities of `lam` visible at the given depth, presented as
/// a basis of pairs.
pub fn brute_force_basis(
    lam: &Trace,
    d: &DeductionSystem,
    limits: OracleLimits,
) -> Result<Basis, ResourceLimit> {
    Ok(Explorer::run(lam, d, limits, Mode::Pairs)?.into_basis())
}

/// Refinement verdict obtained purely from the depth-bounded pair space of
/// `lam`.
pub fn oracle_refines(
    lam_prime: &Trace,
    lam: &Trace,
    d: &DeductionSystem,
    limits: OracleLimits,
) -> Result<bool, ResourceLimit> {
    if lam_prime.len() != lam.len() {
        return Ok(false);
    }
    let basis = brute_force_basis(lam, d, limits)?;
    Ok(satisfies(lam_prime, &basis.as_test_system(), d).unwrap_or(false))
}

/// Searches for a recipe of `t` over `lam` within the depth bound.
pub fn oracle_derive(
    lam: &Trace,
    t: &Term,
    d: &DeductionSystem,
    limits: OracleLimits,
) -> Result<Option<Context>, ResourceLimit> {
    let ex = Explorer::run(lam, d, limits, Mode::Reach)?;
    let target = d.normalize(t);
    Ok(ex.compose(&target, limits.depth).map(|(body, _)| {
        Context::new(body, lam.len()).expect("oracle bodies are contexts")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_ground_term;

    fn d() -> DeductionSystem {
        DeductionSystem::classic()
    }

    fn tr(d: &DeductionSystem, terms: &[&str]) -> Trace {
        Trace::positive(terms.iter().map(|s| parse_ground_term(s, d).unwrap()))
    }

    fn ctx(s: &str) -> Context {
        Context::parse(s, &d()).unwrap()
    }

    #[test]
    fn single_constant_has_no_nontrivial_pairs() {
        let d = d();
        let basis = brute_force_basis(&tr(&d, &["a"]), &d, OracleLimits::with_depth(2)).unwrap();
        assert!(basis.is_empty());
    }

    #[test]
    fn duplicates_show_up_at_depth_one() {
        let d = d();
        let basis = brute_force_basis(&tr(&d, &["a", "a"]), &d, OracleLimits::with_depth(1)).unwrap();
        assert!(basis.contains(&ctx("v1"), &ctx("v2")));
    }

    #[test]
    fn nspk_inputs_expose_the_nonce_check_at_depth_three() {
        let d = d();
        let lam = tr(
            &d,
            &["~NA", "A", "B", "KA", "KB", "inv(KA)", "enc(pair(~NA,~NB),KA)"],
        );
        let basis = brute_force_basis(&lam, &d, OracleLimits::default()).unwrap();
        assert!(basis.contains(&ctx("pi1(dec(v7,v6))"), &ctx("v1")));
    }

    #[test]
    fn derives_by_lookup_and_composition() {
        let d = d();
        let lam = tr(&d, &["a", "k"]);
        let target = parse_ground_term("senc(a,k)", &d).unwrap();
        let recipe = oracle_derive(&lam, &target, &d, OracleLimits::default())
            .unwrap()
            .unwrap();
        assert_eq!(recipe.apply(&lam, &d).unwrap(), d.normalize(&target));
    }

    #[test]
    fn underivable_targets_fail() {
        let d = d();
        let lam = tr(&d, &["enc(a,k)"]);
        let got = oracle_derive(&lam, &Term::free("a"), &d, OracleLimits::with_depth(4)).unwrap();
        assert!(got.is_none());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let d = d();
        let lam = tr(&d, &["a", "b", "c", "d", "e", "f"]);
        let limits = OracleLimits {
            depth: 3,
            budget: 10,
        };
        assert!(brute_force_basis(&lam, &d, limits).is_err());
    }

    #[test]
    fn refinement_matches_the_key_swap_example() {
        let d = d();
        let lam = tr(&d, &["senc(a,k)", "senc(a,k')", "k", "k'", "a"]);
        let lam_prime = tr(&d, &["senc(a,k)", "senc(a,k')", "k", "k''", "a"]);
        let limits = OracleLimits::default();
        assert!(oracle_refines(&lam, &lam_prime, &d, limits).unwrap());
        assert!(!oracle_refines(&lam_prime, &lam, &d, limits).unwrap());
        let basis = brute_force_basis(&lam, &d, limits).unwrap();
        assert!(basis.contains(&ctx("sdec(v2,v4)"), &ctx("v5")));
    }
}
