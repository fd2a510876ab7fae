//! Derivability and indistinguishability over positive traces: recipe
//! synthesis by knowledge-base saturation, finite bases of context
//! equalities, trace refinement and equivalence, and static equivalence of
//! frames with hidden constants.

use crate::context::{orient_pair, satisfies, Context, TestSystem};
use crate::term::{apply_bindings, term_cmp, Term};
use crate::theory::{match_pattern, DeductionSystem};
use crate::trace::Trace;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Saturated knowledge derived from a positive trace: one entry per
/// derivable fact (in normal form) with a canonical recipe, plus every
/// alternative recipe discovered on the way.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    entries: Vec<(Term, Context)>,
    by_fact: HashMap<Term, usize>,
    alt_pairs: BTreeSet<(Context, Context)>,
    trace_len: usize,
    /// Distinct opaque constants, one per position: a recipe pair equal on
    /// this trace is equal on every trace and carries no information.
    generic: Trace,
}

impl KnowledgeBase {
    /// Saturates the knowledge extractable from `lam`.
    ///
    /// Every message seeds an entry; then rewrite rules are applied to
    /// entries: a rule fires when its non-variable argument patterns match
    /// known facts and its remaining side conditions are derivable, and the
    /// reduct is added with the composed recipe. Each fact keeps the
    /// smallest recipe (node count, then structural order); rounds repeat
    /// until facts and recipes are stable.
    pub fn saturate(lam: &Trace, d: &DeductionSystem) -> KnowledgeBase {
        assert!(lam.is_positive(), "knowledge bases read positive traces");
        let mut kb = KnowledgeBase {
            entries: Vec::new(),
            by_fact: HashMap::new(),
            alt_pairs: BTreeSet::new(),
            trace_len: lam.len(),
            generic: Trace::positive(
                (0..lam.len()).map(|i| Term::free(format!("\u{1}g{i}"))),
            ),
        };
        for (i, m) in lam.payloads().enumerate() {
            let fact = d.normalize(m);
            kb.offer(fact, Context::position(i + 1).with_arity(lam.len()), d);
        }
        loop {
            let mut changed = false;
            for rule in d.rules() {
                let Term::App(sym, patterns) = rule.lhs() else {
                    continue;
                };
                let firings = kb.rule_firings(patterns, rule.rhs(), d);
                for (bindings, arg_recipes) in firings {
                    let fact = d.normalize(&apply_bindings(&bindings, rule.rhs()));
                    let body = Term::App(
                        sym.clone(),
                        arg_recipes.iter().map(|c| c.body().clone()).collect(),
                    );
                    let recipe = Context::new(body, kb.trace_len)
                        .expect("recipes compose from public material");
                    changed |= kb.offer(fact, recipe, d);
                }
            }
            // Recipes may shrink once later-derived facts provide shorter
            // compositions; re-minimize until stable.
            for i in 0..kb.entries.len() {
                let fact = kb.entries[i].0.clone();
                if let Some(better) = kb.compose(&fact) {
                    changed |= kb.offer(fact, better, d);
                }
            }
            if !changed {
                break;
            }
        }
        kb
    }

    /// Adds or improves an entry; records a pair when a second recipe for a
    /// known fact shows up. Pairs that already hold on the generic trace
    /// hold everywhere and are dropped. Returns true if anything changed.
    fn offer(&mut self, fact: Term, recipe: Context, d: &DeductionSystem) -> bool {
        match self.by_fact.get(&fact) {
            None => {
                self.by_fact.insert(fact.clone(), self.entries.len());
                self.entries.push((fact, recipe));
                true
            }
            Some(&i) => {
                let current = self.entries[i].1.clone();
                if current == recipe {
                    return false;
                }
                let universal = current.apply(&self.generic, d).ok()
                    == recipe.apply(&self.generic, d).ok();
                if !universal {
                    self.alt_pairs
                        .insert(orient_pair(current.clone(), recipe.clone()));
                }
                if term_cmp(recipe.body(), current.body()) == std::cmp::Ordering::Less {
                    self.entries[i].1 = recipe;
                    true
                } else {
                    false
                }
            }
        }
    }

    /// All ways a rule's argument patterns can be filled from the current
    /// knowledge. A pattern is matched by an entry fact, or built from a
    /// public constructor over recursively filled sub-patterns; bound
    /// variables are composed top-down. Constructed matches are what expose
    /// key-relationship equalities such as "position 1 deciphers whatever is
    /// encrypted under position 3".
    fn rule_firings(
        &self,
        patterns: &[Term],
        rhs: &Term,
        d: &DeductionSystem,
    ) -> Vec<(BTreeMap<String, Term>, Vec<Context>)> {
        // Structured patterns first: they bind the variables cheaply.
        let mut order: Vec<usize> = (0..patterns.len()).collect();
        order.sort_by_key(|&j| matches!(patterns[j], Term::Var(_)));
        // A variable occurring once in the left-hand side is a pure payload
        // slot: the firing condition does not depend on it, so a single
        // derivable filler carries the equality.
        let mut occurrences: BTreeMap<String, usize> = BTreeMap::new();
        for p in patterns {
            p.for_each_subterm(&mut |t| {
                if let Term::Var(x) = t {
                    *occurrences.entry(x.clone()).or_insert(0) += 1;
                }
            });
        }
        let single_use: std::collections::BTreeSet<String> = occurrences
            .into_iter()
            .filter(|(_, n)| *n == 1)
            .map(|(x, _)| x)
            .collect();
        let rhs_vars = rhs.vars();
        let mut states: Vec<(BTreeMap<String, Term>, Vec<Option<Context>>)> =
            vec![(BTreeMap::new(), vec![None; patterns.len()])];
        for &j in &order {
            let p = &patterns[j];
            let mut next = Vec::new();
            for (bindings, recipes) in &states {
                // A slot the reduct ignores only needs some derivable
                // filler; enumerating more would replay the same equality.
                if matches!(p, Term::Var(x) if !bindings.contains_key(x) && !rhs_vars.contains(x))
                {
                    if let Some((_, filler)) = self.entries.first() {
                        let mut recipes = recipes.clone();
                        recipes[j] = Some(filler.clone());
                        next.push((bindings.clone(), recipes));
                    }
                    continue;
                }
                for (extended, recipe) in self.pattern_candidates(p, bindings, d, &single_use) {
                    let mut recipes = recipes.clone();
                    recipes[j] = Some(recipe);
                    next.push((extended, recipes));
                }
            }
            states = next;
            if states.is_empty() {
                return Vec::new();
            }
        }
        states
            .into_iter()
            .map(|(bindings, recipes)| {
                (
                    bindings,
                    recipes
                        .into_iter()
                        .map(|r| r.expect("all slots filled"))
                        .collect(),
                )
            })
            .collect()
    }

    /// Ways to realize `pattern` from the knowledge: entries whose fact
    /// matches it, the composition of an already bound variable, or a public
    /// constructor over realized sub-patterns.
    fn pattern_candidates(
        &self,
        pattern: &Term,
        bindings: &BTreeMap<String, Term>,
        d: &DeductionSystem,
        single_use: &std::collections::BTreeSet<String>,
    ) -> Vec<(BTreeMap<String, Term>, Context)> {
        let mut out = Vec::new();
        if let Term::Var(x) = pattern {
            if let Some(value) = bindings.get(x) {
                if let Some(recipe) = self.compose(&d.normalize(value)) {
                    out.push((bindings.clone(), recipe));
                }
                return out;
            }
            if single_use.contains(x) {
                if let Some((fact, recipe)) = self.entries.first() {
                    let mut extended = bindings.clone();
                    extended.insert(x.clone(), fact.clone());
                    out.push((extended, recipe.clone()));
                }
                return out;
            }
        }
        for (fact, recipe) in &self.entries {
            let mut extended = bindings.clone();
            if match_pattern(pattern, fact, &mut extended) {
                out.push((extended, recipe.clone()));
            }
        }
        if let Term::App(sym, sub_patterns) = pattern {
            if sym.public {
                let mut states: Vec<(BTreeMap<String, Term>, Vec<Context>)> =
                    vec![(bindings.clone(), Vec::new())];
                for q in sub_patterns {
                    let mut next = Vec::new();
                    for (b, parts) in &states {
                        for (extended, recipe) in self.pattern_candidates(q, b, d, single_use) {
                            let mut parts = parts.clone();
                            parts.push(recipe);
                            next.push((extended, parts));
                        }
                    }
                    states = next;
                    if states.is_empty() {
                        break;
                    }
                }
                for (b, parts) in states {
                    let body = Term::App(
                        sym.clone(),
                        parts.iter().map(|c| c.body().clone()).collect(),
                    );
                    let recipe = Context::new(body, self.trace_len)
                        .expect("constructed patterns are contexts");
                    out.push((b, recipe));
                }
            }
        }
        out
    }

    /// Smallest recipe deriving `fact` (which must be in normal form) from
    /// the current knowledge: an entry lookup, or a public constructor
    /// applied to recursively composed arguments.
    pub fn compose(&self, fact: &Term) -> Option<Context> {
        let entry = self
            .by_fact
            .get(fact)
            .map(|&i| self.entries[i].1.clone());
        let built = match fact {
            Term::App(sym, args) if sym.public => {
                let parts: Option<Vec<Context>> =
                    args.iter().map(|a| self.compose(a)).collect();
                parts.map(|parts| {
                    Context::new(
                        Term::App(sym.clone(), parts.iter().map(|c| c.body().clone()).collect()),
                        self.trace_len,
                    )
                    .expect("compositions of recipes are contexts")
                })
            }
            _ => None,
        };
        match (entry, built) {
            (Some(e), Some(b)) => {
                if term_cmp(e.body(), b.body()) <= std::cmp::Ordering::Equal {
                    Some(e)
                } else {
                    Some(b)
                }
            }
            (e, b) => e.or(b),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &(Term, Context)> {
        self.entries.iter()
    }

    pub fn alt_pairs(&self) -> impl Iterator<Item = &(Context, Context)> {
        self.alt_pairs.iter()
    }

    pub fn trace_len(&self) -> usize {
        self.trace_len
    }
}

/// Smallest recipe over `lam` whose application equals `t` modulo E, or
/// `None` when `t` is not derivable. Non-derivability is an answer, not an
/// error: callers branch on it.
pub fn synthesize(lam: &Trace, t: &Term, d: &DeductionSystem) -> Option<Context> {
    let kb = KnowledgeBase::saturate(lam, d);
    let recipe = kb.compose(&d.normalize(t));
    if let Some(recipe) = &recipe {
        debug_assert!(
            recipe.apply(lam, d).ok().as_ref() == Some(&d.normalize(t)),
            "synthesized recipe must reproduce the target"
        );
    }
    recipe
}

/// A finite set of context pairs presenting the equalities a positive trace
/// satisfies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Basis {
    pairs: BTreeSet<(Context, Context)>,
}

impl Basis {
    pub fn new(pairs: impl IntoIterator<Item = (Context, Context)>) -> Self {
        Basis {
            pairs: pairs
                .into_iter()
                .map(|(a, b)| orient_pair(a, b))
                .collect(),
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(Context, Context)> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Orientation-insensitive membership.
    pub fn contains(&self, a: &Context, b: &Context) -> bool {
        self.pairs.contains(&orient_pair(a.clone(), b.clone()))
    }

    pub fn as_test_system(&self) -> TestSystem {
        TestSystem::new(self.pairs.iter().cloned())
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "pairs": self
                .pairs
                .iter()
                .map(|(a, b)| json!([a.to_string(), b.to_string()]))
                .collect::<Vec<_>>(),
        })
    }
}

/// Computes a finite basis of the equalities holding on `lam`: every
/// alternative recipe discovered during saturation paired against the
/// canonical one, plus one reconstruction pair `vi = f(R1,...,Rk)` for each
/// trace entry whose normal form is a public application with derivable
/// arguments.
pub fn finite_basis(lam: &Trace, d: &DeductionSystem) -> Basis {
    let kb = KnowledgeBase::saturate(lam, d);
    let mut pairs: BTreeSet<(Context, Context)> = kb.alt_pairs.clone();
    for (i, m) in lam.payloads().enumerate() {
        let fact = d.normalize(m);
        if let Term::App(sym, args) = &fact {
            if !sym.public {
                continue;
            }
            let parts: Option<Vec<Context>> = args.iter().map(|a| kb.compose(a)).collect();
            if let Some(parts) = parts {
                let body = Term::App(
                    sym.clone(),
                    parts.iter().map(|c| c.body().clone()).collect(),
                );
                let recon =
                    Context::new(body, lam.len()).expect("reconstructions are contexts");
                pairs.insert(orient_pair(
                    Context::position(i + 1).with_arity(lam.len()),
                    recon,
                ));
            }
        }
    }
    let basis = Basis { pairs };
    debug_assert!(
        satisfies(lam, &basis.as_test_system(), d).unwrap_or(false),
        "every emitted pair must hold on the generating trace"
    );
    basis
}

/// Whether every context equality holding on `lam` also holds on
/// `lam_prime`. Traces of different lengths are never refinements.
pub fn refines(lam_prime: &Trace, lam: &Trace, d: &DeductionSystem) -> bool {
    if lam_prime.len() != lam.len() {
        return false;
    }
    let basis = finite_basis(lam, d);
    satisfies(lam_prime, &basis.as_test_system(), d).unwrap_or(false)
}

/// Mutual refinement.
pub fn equivalent(a: &Trace, b: &Trace, d: &DeductionSystem) -> bool {
    refines(a, b, d) && refines(b, a, d)
}

/// A positive trace with a set of hidden constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqFrame {
    pub hidden: BTreeSet<Term>,
    pub body: Trace,
}

impl EqFrame {
    pub fn new(hidden: BTreeSet<Term>, body: Trace) -> Self {
        debug_assert!(body.is_positive(), "frame bodies are positive traces");
        EqFrame { hidden, body }
    }

    /// Hides every constant of the trace.
    pub fn hiding_all(body: Trace) -> Self {
        let mut hidden = BTreeSet::new();
        for m in body.payloads() {
            hidden.extend(m.constants());
        }
        EqFrame::new(hidden, body)
    }
}

/// Decides static equivalence of two frames.
///
/// Distinguishing tests may name any constant outside the hidden sets, and
/// finitely many fresh names suffice at this scale; both are realized by
/// appending the visible constants of either body plus `max(len) + 2` fresh
/// free constants to both bodies and deciding trace equivalence on the
/// extensions.
pub fn static_equivalence(f1: &EqFrame, f2: &EqFrame, d: &DeductionSystem) -> bool {
    if f1.body.len() != f2.body.len() {
        return false;
    }
    let mut visible: BTreeSet<Term> = BTreeSet::new();
    let mut used_names: BTreeSet<String> = BTreeSet::new();
    for body in [&f1.body, &f2.body] {
        for m in body.payloads() {
            for c in m.constants() {
                if let Term::Free(name) | Term::Nonce(name) = &c {
                    used_names.insert(name.clone());
                }
                if !f1.hidden.contains(&c) && !f2.hidden.contains(&c) {
                    visible.insert(c);
                }
            }
        }
    }
    for c in f1.hidden.iter().chain(f2.hidden.iter()) {
        if let Term::Free(name) | Term::Nonce(name) = c {
            used_names.insert(name.clone());
        }
    }
    let mut supply: Vec<Term> = visible.into_iter().collect();
    let mut next = 1usize;
    for _ in 0..f1.body.len() + 2 {
        let name = loop {
            let candidate = format!("fresh{next}");
            next += 1;
            if !used_names.contains(&candidate) {
                break candidate;
            }
        };
        supply.push(Term::free(name));
    }
    let extend = |body: &Trace| {
        let mut t = body.clone();
        for c in &supply {
            t.push(crate::trace::LabeledMessage::sent(c.clone()));
        }
        t
    };
    equivalent(&extend(&f1.body), &extend(&f2.body), d)
}

/// Packs two traces as frames hiding all their constants; the pair is
/// tellable apart by some test exactly when the frames are not statically
/// equivalent.
pub fn reduce_detectability(t1: &Trace, t2: &Trace) -> (EqFrame, EqFrame) {
    let positivize = |t: &Trace| Trace::positive(t.payloads().cloned());
    (
        EqFrame::hiding_all(positivize(t1)),
        EqFrame::hiding_all(positivize(t2)),
    )
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
    fn synthesize_direct_lookup() {
        let d = d();
        let lam = tr(&d, &["a"]);
        let recipe = synthesize(&lam, &Term::free("a"), &d).unwrap();
        assert_eq!(recipe.to_string(), "v1");
    }

    #[test]
    fn synthesize_nspk_first_message() {
        let d = d();
        // Role A's initial knowledge in the fresh-then-knows order.
        let lam = tr(&d, &["~NA", "A", "B", "KA", "KB", "inv(KA)"]);
        let target = parse_ground_term("enc(pair(A,~NA),KB)", &d).unwrap();
        let recipe = synthesize(&lam, &target, &d).unwrap();
        assert_eq!(recipe.to_string(), "enc(pair(v2,v1),v5)");
    }

    #[test]
    fn synthesize_fails_without_the_inverse_key() {
        let d = d();
        let lam = tr(&d, &["enc(a,k)"]);
        assert!(synthesize(&lam, &Term::free("a"), &d).is_none());
    }

    #[test]
    fn duplicate_entries_yield_a_position_pair() {
        let d = d();
        let basis = finite_basis(&tr(&d, &["a", "a"]), &d);
        assert!(basis.contains(&ctx("v1"), &ctx("v2")));
    }

    #[test]
    fn opaque_ciphertext_has_empty_basis() {
        let d = d();
        let basis = finite_basis(&tr(&d, &["enc(a,k)"]), &d);
        assert!(basis.is_empty(), "{basis:?}");
    }

    #[test]
    fn nspk_input_basis_contains_the_nonce_check() {
        let d = d();
        let lam = tr(
            &d,
            &["~NA", "A", "B", "KA", "KB", "inv(KA)", "enc(pair(~NA,~NB),KA)"],
        );
        let basis = finite_basis(&lam, &d);
        assert!(
            basis.contains(&ctx("pi1(dec(v7,v6))"), &ctx("v1")),
            "basis was {:?}",
            basis.pairs().map(|p| format!("{} = {}", p.0, p.1)).collect::<Vec<_>>()
        );
    }

    fn def7_traces(d: &DeductionSystem) -> (Trace, Trace) {
        let lam = tr(d, &["senc(a,k)", "senc(a,k')", "k", "k'", "a"]);
        let lam_prime = tr(d, &["senc(a,k)", "senc(a,k')", "k", "k''", "a"]);
        (lam, lam_prime)
    }

    #[test]
    fn refinement_is_one_directional_on_the_key_swap_pair() {
        let d = d();
        let (lam, lam_prime) = def7_traces(&d);
        assert!(refines(&lam, &lam_prime, &d));
        assert!(!refines(&lam_prime, &lam, &d));
        // The separating equality.
        let basis = finite_basis(&lam, &d);
        assert!(basis.contains(&ctx("sdec(v2,v4)"), &ctx("v5")));
    }

    #[test]
    fn refines_is_reflexive_and_length_strict() {
        let d = d();
        let (lam, lam_prime) = def7_traces(&d);
        assert!(refines(&lam, &lam, &d));
        assert!(!refines(&lam.concat(&tr(&d, &["a"])), &lam, &d));
        assert!(!equivalent(&lam, &lam_prime, &d));
        assert!(equivalent(&lam, &lam, &d));
    }

    #[test]
    fn single_free_constants_are_equivalent() {
        let d = d();
        assert!(equivalent(&tr(&d, &["a"]), &tr(&d, &["b"]), &d));
    }

    #[test]
    fn static_equivalence_examples() {
        let d = d();
        let (lam, lam_prime) = def7_traces(&d);
        let f1 = EqFrame::hiding_all(lam.clone());
        assert!(static_equivalence(&f1, &f1, &d));
        let f2 = EqFrame::hiding_all(lam_prime);
        assert!(!static_equivalence(&f1, &f2, &d));
        let short = EqFrame::hiding_all(tr(&d, &["a"]));
        assert!(!static_equivalence(&f1, &short, &d));
    }

    #[test]
    fn visible_constants_can_separate_frames() {
        let d = d();
        // With nothing hidden, a test can name the constant itself.
        let f1 = EqFrame::new(BTreeSet::new(), tr(&d, &["a"]));
        let f2 = EqFrame::new(BTreeSet::new(), tr(&d, &["b"]));
        assert!(!static_equivalence(&f1, &f2, &d));
        // Hidden, the two singletons are indistinguishable.
        let g1 = EqFrame::hiding_all(tr(&d, &["a"]));
        let g2 = EqFrame::hiding_all(tr(&d, &["b"]));
        assert!(static_equivalence(&g1, &g2, &d));
    }

    #[test]
    fn detectability_reduction_on_degenerate_traces() {
        let d = d();
        let empty = Trace::empty();
        let (f1, f2) = reduce_detectability(&empty, &empty);
        assert!(static_equivalence(&f1, &f2, &d));
        let (g1, g2) = reduce_detectability(&tr(&d, &["a", "a"]), &tr(&d, &["a", "a"]));
        assert!(static_equivalence(&g1, &g2, &d));
    }
}
