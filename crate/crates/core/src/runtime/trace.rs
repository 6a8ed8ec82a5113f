//! Running a system along one path of its reduction graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::process::Defs;
use super::step::{enumerate_steps, Rule, Step};
use super::system::System;
use super::RuntimeError;
use crate::terms::{ContractModel, Ident};

/// How the next step is picked among the enabled ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    First,
    Random(u64),
    /// Step indices chosen up front; the run stops when the list is used up.
    Scripted(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep<M: ContractModel> {
    /// 1-based position in the trace.
    pub index: usize,
    pub rule: Rule,
    pub agents: Vec<Ident>,
    pub session: Option<Ident>,
    pub label: Option<Vec<String>>,
    /// Successor with session delimiters stripped.
    pub state: System<M>,
}

impl<M: ContractModel> TraceStep<M> {
    pub fn from_step(index: usize, step: &Step<M>) -> Self {
        TraceStep {
            index,
            rule: step.rule,
            agents: step.agents.clone(),
            session: step.session.clone(),
            label: step.label.as_ref().map(|l| l.entry_strings()),
            state: step.next.freeze_names(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord<M: ContractModel> {
    pub initial: System<M>,
    pub steps: Vec<TraceStep<M>>,
    /// Index chosen at each step, enough to replay the run.
    pub choices: Vec<usize>,
    /// No step is enabled in the last state.
    pub stuck: bool,
    pub max_steps_reached: bool,
}

impl<M: ContractModel> TraceRecord<M> {
    pub fn last_state(&self) -> &System<M> {
        self.steps.last().map_or(&self.initial, |s| &s.state)
    }
}

/// Runs `sys` for at most `max_steps` steps, letting `choose` pick among the
/// enabled steps. Returning `None` ends the run early.
pub fn run_trace_with<M, F>(
    model: &M,
    defs: &Defs<M>,
    sys: &System<M>,
    max_steps: usize,
    mut choose: F,
) -> Result<TraceRecord<M>, RuntimeError>
where
    M: ContractModel,
    F: FnMut(&System<M>, &[Step<M>]) -> Option<usize>,
{
    let mut record = TraceRecord {
        initial: sys.freeze_names(),
        steps: Vec::new(),
        choices: Vec::new(),
        stuck: false,
        max_steps_reached: false,
    };
    let mut cur = sys.clone();
    loop {
        let steps = enumerate_steps(model, defs, &cur)?;
        if steps.is_empty() {
            record.stuck = true;
            break;
        }
        if record.steps.len() >= max_steps {
            record.max_steps_reached = true;
            break;
        }
        let Some(i) = choose(&cur, &steps) else { break };
        let step = steps.get(i).ok_or(RuntimeError::BadChoice {
            choice: i,
            available: steps.len(),
        })?;
        record.choices.push(i);
        record.steps.push(TraceStep::from_step(record.steps.len() + 1, step));
        cur = step.next.clone();
    }
    Ok(record)
}

pub fn run_trace<M: ContractModel>(
    model: &M,
    defs: &Defs<M>,
    sys: &System<M>,
    strategy: &Strategy,
    max_steps: usize,
) -> Result<TraceRecord<M>, RuntimeError> {
    match strategy {
        Strategy::First => run_trace_with(model, defs, sys, max_steps, |_, _| Some(0)),
        Strategy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            run_trace_with(model, defs, sys, max_steps, |_, steps| Some(rng.gen_range(0..steps.len())))
        }
        Strategy::Scripted(script) => {
            let mut it = script.iter().copied();
            run_trace_with(model, defs, sys, max_steps, |_, _| it.next())
        }
    }
}
