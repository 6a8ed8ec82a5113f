//! Kernel of the CO2 contract-oriented calculus: a process runtime
//! parameterised over contract models, with a CCS model checked by LTL and a
//! propositional contract logic model.

pub mod ccs;
pub mod encoding;
pub mod exec;
pub mod pcl;
pub mod runtime;
pub mod syntax;
pub mod terms;

pub use exec::Exec;
pub use terms::{
    fresh_session_name, ActionLabel, ContractModel, Ident, IdentKind, ModelError, Sort,
    Substitutable, Substitution, TermError,
};
