//! Seeded random generation of terms, traces and trace variants, used by the
//! property suites and as a diagnostic aid. All draws go through one RNG so
//! a fixed seed reproduces a whole scenario.

use crate::context::Context;
use crate::term::{Symbol, Term};
use crate::theory::DeductionSystem;
use crate::trace::{LabeledMessage, Trace};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub struct Sampler {
    rng: StdRng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: StdRng::seed_from_u64(seed),
        }
    }

    /// A small pool of atoms: agent-style constants, keys with published
    /// inverses, and nonces.
    pub fn atom_pool(&self, d: &DeductionSystem) -> Vec<Term> {
        let mut pool = vec![
            Term::free("a"),
            Term::free("b"),
            Term::free("c"),
            Term::free("k1"),
            Term::free("k2"),
            Term::nonce("n1"),
            Term::nonce("n2"),
        ];
        if let Some(inv) = d.symbol("inv") {
            pool.push(Term::App(inv.clone(), vec![Term::free("k1")]));
            pool.push(Term::App(inv.clone(), vec![Term::free("k2")]));
        }
        pool
    }

    fn public_symbols(&self, d: &DeductionSystem) -> Vec<Symbol> {
        d.public_symbols().cloned().collect()
    }

    /// A random ground term of depth at most `depth`.
    pub fn ground_term(&mut self, d: &DeductionSystem, depth: usize) -> Term {
        let atoms = self.atom_pool(d);
        self.ground_term_from(d, depth, &atoms)
    }

    fn ground_term_from(&mut self, d: &DeductionSystem, depth: usize, atoms: &[Term]) -> Term {
        if depth <= 1 || self.rng.gen_bool(0.35) {
            return atoms.choose(&mut self.rng).expect("pool not empty").clone();
        }
        let symbols = self.public_symbols(d);
        let sym = symbols.choose(&mut self.rng).expect("signature not empty");
        let args = (0..sym.arity)
            .map(|_| self.ground_term_from(d, depth - 1, atoms))
            .collect();
        Term::App(sym.clone(), args)
    }

    /// A random instance of a rewrite rule's left-hand side: guaranteed to
    /// contain a redex.
    pub fn reducible_term(&mut self, d: &DeductionSystem, depth: usize) -> Term {
        let rules = d.rules();
        if rules.is_empty() {
            return self.ground_term(d, depth);
        }
        let rule = &rules[self.rng.gen_range(0..rules.len())];
        let mut bindings = std::collections::BTreeMap::new();
        for x in rule.lhs().vars() {
            let t = self.ground_term(d, depth.saturating_sub(2).max(1));
            bindings.insert(x, t);
        }
        crate::term::apply_bindings(&bindings, rule.lhs())
    }

    /// A positive trace of random messages. Later messages reuse earlier
    /// ones (verbatim, wrapped, or by sharing subterms) often enough that
    /// traces carry nontrivial equalities.
    pub fn positive_trace(&mut self, d: &DeductionSystem, len: usize, depth: usize) -> Trace {
        let mut msgs: Vec<Term> = Vec::with_capacity(len);
        for _ in 0..len {
            let reuse = !msgs.is_empty() && self.rng.gen_bool(0.45);
            let m = if reuse {
                let prev = msgs[self.rng.gen_range(0..msgs.len())].clone();
                match self.rng.gen_range(0..3u8) {
                    // Duplicate an earlier message.
                    0 => prev,
                    // Publish a piece of an earlier message.
                    1 => first_proper_subterm(&prev).unwrap_or(prev),
                    // Wrap an earlier message under a fresh constructor.
                    _ => {
                        let symbols: Vec<Symbol> = self
                            .public_symbols(d)
                            .into_iter()
                            .filter(|s| s.arity >= 1)
                            .collect();
                        match symbols.choose(&mut self.rng) {
                            Some(sym) => {
                                let mut args: Vec<Term> = (0..sym.arity)
                                    .map(|_| self.ground_term(d, depth.saturating_sub(1).max(1)))
                                    .collect();
                                args[0] = prev;
                                Term::App(sym.clone(), args)
                            }
                            None => prev,
                        }
                    }
                }
            } else {
                self.ground_term(d, depth)
            };
            msgs.push(m);
        }
        Trace::positive(msgs)
    }

    /// A mixed-polarity trace whose sent messages are derivable from the
    /// inputs before them, so it always compiles.
    pub fn executable_trace(&mut self, d: &DeductionSystem, len: usize, depth: usize) -> Trace {
        let mut trace = Trace::empty();
        let mut inputs = Trace::empty();
        for _ in 0..len {
            let send = !inputs.is_empty() && self.rng.gen_bool(0.4);
            if send {
                let recipe = self.random_context(d, inputs.len(), 3);
                let payload = recipe.apply(&inputs, d).expect("positions in range");
                trace.push(LabeledMessage::sent(payload));
            } else {
                let payload = self.ground_term(d, depth);
                inputs.push(LabeledMessage::sent(payload.clone()));
                trace.push(LabeledMessage::received(payload));
            }
        }
        trace
    }

    /// A random context over `positions` positions.
    pub fn random_context(&mut self, d: &DeductionSystem, positions: usize, depth: usize) -> Context {
        let body = self.context_body(d, positions, depth);
        Context::new(body, positions).expect("generated bodies are contexts")
    }

    fn context_body(&mut self, d: &DeductionSystem, positions: usize, depth: usize) -> Term {
        debug_assert!(positions >= 1);
        if depth <= 1 || self.rng.gen_bool(0.45) {
            return Term::position(self.rng.gen_range(1..=positions));
        }
        let symbols: Vec<Symbol> = self
            .public_symbols(d)
            .into_iter()
            .filter(|s| s.arity >= 1)
            .collect();
        if symbols.is_empty() {
            return Term::position(self.rng.gen_range(1..=positions));
        }
        let sym = symbols.choose(&mut self.rng).unwrap().clone();
        let args = (0..sym.arity)
            .map(|_| self.context_body(d, positions, depth - 1))
            .collect();
        Term::App(sym, args)
    }

    /// A variant of a positive trace, spanning exact copies, consistent
    /// constant renamings (which preserve every context equality), local
    /// mutations and fresh traces.
    pub fn trace_variant(&mut self, d: &DeductionSystem, original: &Trace) -> Trace {
        if original.is_empty() {
            return original.clone();
        }
        match self.rng.gen_range(0..6u8) {
            0 => original.clone(),
            1 => self.rename_constants(original),
            2 => {
                // Replace one whole message.
                let mut msgs: Vec<Term> = original.payloads().cloned().collect();
                let i = self.rng.gen_range(0..msgs.len());
                msgs[i] = self.ground_term(d, 3);
                Trace::positive(msgs)
            }
            3 => {
                // Mutate one subterm of one message.
                let mut msgs: Vec<Term> = original.payloads().cloned().collect();
                let i = self.rng.gen_range(0..msgs.len());
                let replacement = self.ground_term(d, 2);
                msgs[i] = self.mutate_subterm(&msgs[i], replacement);
                Trace::positive(msgs)
            }
            4 => {
                // Swap two positions.
                let mut msgs: Vec<Term> = original.payloads().cloned().collect();
                if msgs.len() >= 2 {
                    let i = self.rng.gen_range(0..msgs.len());
                    let j = self.rng.gen_range(0..msgs.len());
                    msgs.swap(i, j);
                }
                Trace::positive(msgs)
            }
            _ => self.positive_trace(d, original.len(), 3),
        }
    }

    /// Renames every constant injectively; equalities cannot name constants,
    /// so the result satisfies exactly the same tests.
    pub fn rename_constants(&mut self, original: &Trace) -> Trace {
        let mut mapping: std::collections::BTreeMap<Term, Term> = std::collections::BTreeMap::new();
        let mut counter = 0usize;
        for m in original.payloads() {
            for c in m.constants() {
                mapping.entry(c.clone()).or_insert_with(|| {
                    counter += 1;
                    match c {
                        Term::Nonce(_) => Term::nonce(format!("rn{counter}")),
                        _ => Term::free(format!("rc{counter}")),
                    }
                });
            }
        }
        let rename = |t: &Term| replace_constants(t, &mapping);
        Trace::positive(original.payloads().map(rename))
    }

    fn mutate_subterm(&mut self, t: &Term, replacement: Term) -> Term {
        let size = t.size();
        let target = self.rng.gen_range(0..size);
        let mut counter = 0usize;
        replace_nth(t, target, &mut counter, &replacement)
    }

    pub fn gen_bool(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn gen_range(&mut self, range: std::ops::Range<usize>) -> usize {
        self.rng.gen_range(range)
    }
}

fn first_proper_subterm(t: &Term) -> Option<Term> {
    match t {
        Term::App(_, args) => args.first().cloned(),
        _ => None,
    }
}

fn replace_constants(t: &Term, mapping: &std::collections::BTreeMap<Term, Term>) -> Term {
    if let Some(new) = mapping.get(t) {
        return new.clone();
    }
    match t {
        Term::App(sym, args) => Term::App(
            sym.clone(),
            args.iter().map(|a| replace_constants(a, mapping)).collect(),
        ),
        _ => t.clone(),
    }
}

fn replace_nth(t: &Term, target: usize, counter: &mut usize, replacement: &Term) -> Term {
    if *counter == target {
        *counter += 1;
        return replacement.clone();
    }
    *counter += 1;
    match t {
        Term::App(sym, args) => Term::App(
            sym.clone(),
            args.iter()
                .map(|a| replace_nth(a, target, counter, replacement))
                .collect(),
        ),
        _ => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_under_a_seed() {
        let d = DeductionSystem::classic();
        let mut s1 = Sampler::new(7);
        let mut s2 = Sampler::new(7);
        for _ in 0..20 {
            assert_eq!(s1.ground_term(&d, 4), s2.ground_term(&d, 4));
        }
    }

    #[test]
    fn executable_traces_compile() {
        let d = DeductionSystem::classic();
        let mut s = Sampler::new(11);
        for _ in 0..30 {
            let len = 1 + s.gen_range(0..6);
            let t = s.executable_trace(&d, len, 3);
            assert!(crate::compiler::compile(&t, &d, false).is_ok(), "{t}");
        }
    }

    #[test]
    fn renaming_preserves_refinement_both_ways() {
        let d = DeductionSystem::classic();
        let mut s = Sampler::new(13);
        for _ in 0..15 {
            let t = s.positive_trace(&d, 4, 3);
            let r = s.rename_constants(&t);
            assert!(crate::deduction::refines(&r, &t, &d), "{t} vs {r}");
            assert!(crate::deduction::refines(&t, &r, &d), "{t} vs {r}");
        }
    }
}
