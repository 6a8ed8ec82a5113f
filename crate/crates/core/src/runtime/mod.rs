//! Systems of agents and sessions: normal forms, reductions, traces and
//! honesty checking.

use std::sync::Arc;

use thiserror::Error;

use crate::terms::{Ident, ModelError, TermError};

pub mod agreement;
pub mod honesty;
pub mod process;
pub mod report;
pub mod step;
pub mod system;
pub mod trace;

pub use agreement::{broker_agreements, Agreement, AgreementSearch, Latent, MAX_FUSE_LATENTS};
pub use honesty::{check_honesty, HonestyConfig, HonestyReport, StateGraph, Verdict, Witness, DEFAULT_MAX_DEPTH, DEFAULT_MAX_STATES};
pub use report::{AgreementView, StepView, TraceView, VerdictView, WitnessView};
pub use process::{Defs, Prefix, ProcDef, Process, SysTerm};
pub use step::{enumerate_steps, PrefixInstance, Rule, Step};
pub use system::{normalize, validate_defs, Agent, Session, System, Thread};
pub use trace::{run_trace, run_trace_with, Strategy, TraceRecord, TraceStep};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("undefined process identifier `{0}`")]
    UndefinedProcess(Arc<str>),
    #[error("process `{name}` expects {expected} arguments, got {got}")]
    Arity { name: Arc<str>, expected: usize, got: usize },
    #[error("argument `{arg}` of `{name}` has the wrong sort for parameter `{param}`")]
    CallSort { name: Arc<str>, param: Ident, arg: Ident },
    #[error("unguarded recursion through `{0}`")]
    Unguarded(Arc<str>),
    #[error("session `{0}` is not a session name")]
    SessionNotName(Ident),
    #[error("session `{0}` occurs twice")]
    DuplicateSession(Ident),
    #[error("agent `{0}` is not a principal name")]
    AgentNotPrincipal(Ident),
    #[error("agent `{0}` occurs twice")]
    DuplicateAgent(Ident),
    #[error("variable `{0}` is not bound by any delimiter")]
    Open(Ident),
    #[error("fuse over {count} latent contracts exceeds the cap of {cap}")]
    TooManyLatents { count: usize, cap: usize },
    #[error("unknown agent `{0}`")]
    UnknownAgent(Ident),
    #[error("choice {choice} out of range: {available} steps enabled")]
    BadChoice { choice: usize, available: usize },
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
