use vigil_core::deduction::finite_basis;
use vigil_core::syntax::parse_ground_term;
use vigil_core::{DeductionSystem, Trace};
fn main() {
    let d = DeductionSystem::classic();
    let msgs = ["~NA", "A", "B", "KA", "KB", "inv(KA)"];
    for k in 1..=msgs.len() {
        let lam = Trace::positive(msgs[..k].iter().map(|s| parse_ground_term(s, &d).unwrap()));
        let basis = finite_basis(&lam, &d);
        println!("prefix {k}:");
        for (a, b) in basis.pairs() {
            println!("   {a} = {b}");
        }
    }
}
