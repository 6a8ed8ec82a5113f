//! Flat, serialisable views of traces, verdicts and agreements.

use serde::Serialize;

use super::agreement::{Agreement, Latent};
use super::honesty::{HonestyReport, Verdict};
use super::trace::{TraceRecord, TraceStep};
use crate::terms::ContractModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepView {
    pub step: usize,
    pub rule: String,
    pub agents: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Vec<String>>,
    pub state: String,
}

impl<M: ContractModel> From<&TraceStep<M>> for StepView {
    fn from(s: &TraceStep<M>) -> Self {
        StepView {
            step: s.index,
            rule: s.rule.to_string(),
            agents: s.agents.iter().map(ToString::to_string).collect(),
            session: s.session.as_ref().map(ToString::to_string),
            label: s.label.clone(),
            state: s.state.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceView {
    pub initial: String,
    pub steps: Vec<StepView>,
    pub choices: Vec<usize>,
    pub stuck: bool,
    pub max_steps_reached: bool,
}

impl<M: ContractModel> From<&TraceRecord<M>> for TraceView {
    fn from(t: &TraceRecord<M>) -> Self {
        TraceView {
            initial: t.initial.to_string(),
            steps: t.steps.iter().map(StepView::from).collect(),
            choices: t.choices.clone(),
            stuck: t.stuck,
            max_steps_reached: t.max_steps_reached,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessView {
    /// Steps from the initial state to the culpable state.
    pub path: Vec<StepView>,
    /// Steps looping back to the culpable state; empty when it is final.
    pub cycle: Vec<StepView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerdictView {
    pub principal: String,
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obligations: Option<Vec<String>>,
    pub states: usize,
    pub exhausted: bool,
}

impl<M: ContractModel> From<&HonestyReport<M>> for VerdictView {
    fn from(r: &HonestyReport<M>) -> Self {
        let mut v = VerdictView {
            principal: r.principal.to_string(),
            verdict: r.verdict.as_str(),
            witness: None,
            session: None,
            obligations: None,
            states: r.states,
            exhausted: r.exhausted,
        };
        if let Verdict::Dishonest(w) = &r.verdict {
            v.witness = Some(WitnessView {
                path: w.path.iter().map(StepView::from).collect(),
                cycle: w.cycle.iter().map(StepView::from).collect(),
            });
            v.session = Some(w.session.to_string());
            v.obligations = Some(w.obligations.clone());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgreementView {
    pub session: String,
    /// The fused latent contracts, printed as `{x} c`.
    pub fused: Vec<String>,
    pub sigma: Vec<(String, String)>,
}

impl AgreementView {
    pub fn new<M: ContractModel>(a: &Agreement, latents: &[Latent<M>]) -> Self {
        AgreementView {
            session: a.session.to_string(),
            fused: a
                .fused
                .iter()
                .map(|&i| format!("{{{}}} ({})", latents[i].var, latents[i].contract))
                .collect(),
            sigma: a.sigma.iter().map(|(v, n)| (v.to_string(), n.to_string())).collect(),
        }
    }
}
