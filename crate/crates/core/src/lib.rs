//! Symbolic analysis of protocol narrations: compilation of traces into
//! test-guarded role scripts and synthesis of runtime monitor checks that
//! tell known attack executions apart from intended ones.

pub mod compiler;
pub mod context;
pub mod deduction;
pub mod monitor;
pub mod narration;
pub mod oracle;
pub mod sampling;
pub mod syntax;
pub mod term;
pub mod theory;
pub mod trace;

pub use context::{satisfies, Context, PositionError, TestSystem};
pub use deduction::{
    equivalent, finite_basis, reduce_detectability, refines, static_equivalence, Basis, EqFrame,
};
pub use narration::{
    parse_narration, AttackDefinition, MonitorSpec, NarrationFile, Protocol, ProtocolExecution,
    RoleRef,
};
pub use term::{Substitution, Symbol, Term};
pub use theory::{DeductionSystem, RewriteRule};
pub use trace::{LabeledMessage, Polarity, Trace};
