//! One-step reductions of a system.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::agreement::{Agreement, AgreementSearch, Latent};
use super::process::{Defs, Prefix, Process, SysTerm};
use super::system::{normalize, System, Thread};
use super::RuntimeError;
use crate::terms::{fresh_session_name, ActionLabel, ContractModel, Ident, IdentKind, Sort, Substitutable, Substitution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    Tau,
    Tell1,
    Tell2,
    Do,
    Ask,
    Fuse,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Tau => "Tau",
            Rule::Tell1 => "Tell1",
            Rule::Tell2 => "Tell2",
            Rule::Do => "Do",
            Rule::Ask => "Ask",
            Rule::Fuse => "Fuse",
        };
        write!(f, "{s}")
    }
}

/// A prefix occurrence consumed by a step: the agent, the thread it sits in
/// and the chosen branch. Instances are identified by content, so the same
/// prefix is recognised across states.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrefixInstance<M: ContractModel> {
    pub agent: Ident,
    pub thread: Thread<M>,
    pub branch: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step<M: ContractModel> {
    pub rule: Rule,
    pub agents: Vec<Ident>,
    pub session: Option<Ident>,
    pub label: Option<ActionLabel<M::Atom>>,
    /// Instantiation chosen by `ask` or `fuse`.
    pub sigma: Option<Substitution>,
    /// Latent contracts fused by a `fuse` step, with their markers.
    pub fused: Vec<Latent<M>>,
    pub fired: Vec<PrefixInstance<M>>,
    pub next: System<M>,
}

impl<M: ContractModel> Step<M> {
    /// One-line description, e.g. `Do A,B s1 <A says pay?, B says pay!>`.
    pub fn describe(&self) -> String {
        let mut s = format!("{} {}", self.rule, self.agents.iter().map(Ident::to_string).collect::<Vec<_>>().join(","));
        if let Some(x) = &self.session {
            s.push_str(&format!(" {x}"));
        }
        if let Some(l) = &self.label {
            s.push_str(&format!(" {l}"));
        }
        if let Some(sig) = &self.sigma {
            s.push_str(&format!(" {sig}"));
        }
        s
    }
}

/// A pending edit of the source system.
struct Edit<M: ContractModel> {
    removed: BTreeMap<usize, BTreeSet<usize>>,
    added: BTreeMap<usize, Vec<Process<M>>>,
    session: Option<(Ident, Vec<M::Contract>)>,
    new_binder: Option<Ident>,
    sigma: BTreeMap<Ident, Ident>,
}

impl<M: ContractModel> Edit<M> {
    fn new() -> Self {
        Edit {
            removed: BTreeMap::new(),
            added: BTreeMap::new(),
            session: None,
            new_binder: None,
            sigma: BTreeMap::new(),
        }
    }

    /// Consume thread `t` of agent `a`, continuing with `cont`.
    fn fire(mut self, a: usize, t: usize, cont: &Process<M>) -> Self {
        self.removed.entry(a).or_default().insert(t);
        self.added.entry(a).or_default().push(cont.clone());
        self
    }

    fn apply(self, model: &M, defs: &Defs<M>, sys: &System<M>) -> Result<System<M>, RuntimeError> {
        let mut parts = Vec::new();
        for (ai, a) in sys.agents.iter().enumerate() {
            let removed = self.removed.get(&ai);
            let mut ps: Vec<Process<M>> = a
                .threads
                .iter()
                .enumerate()
                .filter(|(ti, _)| removed.is_none_or(|r| !r.contains(ti)))
                .map(|(_, t)| t.to_process())
                .collect();
            ps.extend(self.added.get(&ai).into_iter().flatten().cloned());
            parts.push(SysTerm::Agent(a.name.clone(), Process::Par(ps).rename(&self.sigma)));
        }
        let mut replaced = false;
        for s in &sys.sessions {
            let contracts = match &self.session {
                Some((n, cs)) if *n == s.name => {
                    replaced = true;
                    cs.clone()
                }
                _ => s.contracts.clone(),
            };
            parts.push(SysTerm::Session(s.name.clone(), contracts.rename(&self.sigma)));
        }
        if let (false, Some((n, cs))) = (replaced, &self.session) {
            parts.push(SysTerm::Session(n.clone(), cs.rename(&self.sigma)));
        }
        let mut binders: Vec<Ident> = sys.binders.iter().filter(|b| !self.sigma.contains_key(b)).cloned().collect();
        binders.extend(self.new_binder);
        let body = SysTerm::Par(parts);
        let term = if binders.is_empty() { body } else { SysTerm::Delim(binders, Box::new(body)) };
        normalize(model, defs, &term)
    }
}

/// All substitutions with domain `vars` (principal variables to principals
/// of the system, session variables to `session`).
fn ask_substitutions(vars: &[Ident], principals: &BTreeSet<Ident>, session: &Ident) -> Vec<Substitution> {
    let mut out = vec![Substitution::new()];
    for v in vars.iter().collect::<BTreeSet<_>>() {
        let choices: Vec<Ident> = match v.sort() {
            Sort::Principal => principals.iter().cloned().collect(),
            Sort::Session => vec![session.clone()],
        };
        out = out
            .into_iter()
            .flat_map(|s| {
                choices.iter().map(move |c| {
                    let mut s = s.clone();
                    s.bind(v.clone(), c.clone()).expect("sorts match");
                    s
                })
            })
            .collect();
    }
    out
}

/// Every reduction enabled in `sys`, in a fixed order: local steps agent by
/// agent, thread by thread, branch by branch, then `do` steps session by
/// session.
pub fn enumerate_steps<M: ContractModel>(model: &M, defs: &Defs<M>, sys: &System<M>) -> Result<Vec<Step<M>>, RuntimeError> {
    let mut out = Vec::new();
    let principals = sys.principal_names();
    for (ai, agent) in sys.agents.iter().enumerate() {
        let a = &agent.name;
        for (ti, thread) in agent.threads.iter().enumerate() {
            let Thread::Sum(branches) = thread else { continue };
            for (bi, (prefix, cont)) in branches.iter().enumerate() {
                let inst = || {
                    vec![PrefixInstance {
                        agent: a.clone(),
                        thread: thread.clone(),
                        branch: bi,
                    }]
                };
                let mk = |rule, agents: Vec<Ident>, session, sigma, fused, next| Step {
                    rule,
                    agents,
                    session,
                    label: None,
                    sigma,
                    fused,
                    fired: inst(),
                    next,
                };
                match prefix {
                    Prefix::Tau => {
                        let next = Edit::new().fire(ai, ti, cont).apply(model, defs, sys)?;
                        out.push(mk(Rule::Tau, vec![a.clone()], None, None, Vec::new(), next));
                    }
                    Prefix::Tell { target, var, contract } => {
                        let latent = Process::Latent {
                            var: var.clone(),
                            contract: model.says(a, contract.clone()),
                        };
                        if target == a {
                            let mut e = Edit::new().fire(ai, ti, cont);
                            e.added.entry(ai).or_default().push(latent);
                            let next = e.apply(model, defs, sys)?;
                            out.push(mk(Rule::Tell1, vec![a.clone()], None, None, Vec::new(), next));
                        } else if let Some(bi) = sys.agents.iter().position(|b| &b.name == target) {
                            let mut e = Edit::new().fire(ai, ti, cont);
                            e.added.entry(bi).or_default().push(latent);
                            let next = e.apply(model, defs, sys)?;
                            out.push(mk(Rule::Tell2, vec![a.clone(), target.clone()], None, None, Vec::new(), next));
                        }
                    }
                    Prefix::Ask { target, vars, observable } => {
                        let Some(session) = sys.session(target) else { continue };
                        for sigma in ask_substitutions(vars, &principals, target) {
                            let phi = observable.apply(&sigma);
                            let cs: Vec<M::Contract> = session.contracts.apply(&sigma);
                            if !phi.is_closed() || !cs.iter().all(Substitutable::is_closed) {
                                continue;
                            }
                            if !model.entails(&cs, &phi)? {
                                continue;
                            }
                            let mut e = Edit::new().fire(ai, ti, cont);
                            e.sigma = sigma.as_map().clone();
                            let next = e.apply(model, defs, sys)?;
                            out.push(mk(Rule::Ask, vec![a.clone()], Some(target.clone()), Some(sigma), Vec::new(), next));
                        }
                    }
                    Prefix::Fuse { var, observable } => {
                        let locals = agent.latents();
                        let latents: Vec<Latent<M>> = locals
                            .iter()
                            .map(|(_, v, c)| Latent {
                                var: v.clone(),
                                contract: c.clone(),
                            })
                            .collect();
                        let universe: BTreeSet<Ident> = sys
                            .all_idents()
                            .into_iter()
                            .filter(|i| i.kind() == IdentKind::SessionName)
                            .collect();
                        let session = fresh_session_name(&universe);
                        let search = AgreementSearch {
                            model,
                            latents: &latents,
                            var,
                            observable,
                            principals: &principals,
                            session: &session,
                        };
                        for Agreement { fused, sigma, session } in search.run()? {
                            let mut e = Edit::new().fire(ai, ti, cont);
                            for &k in &fused {
                                e.removed.entry(ai).or_default().insert(locals[k].0);
                            }
                            let contracts: Vec<M::Contract> =
                                fused.iter().map(|&k| latents[k].contract.clone()).collect();
                            e.session = Some((session.clone(), model.normalize(contracts)));
                            e.new_binder = Some(session.clone());
                            e.sigma = sigma.as_map().clone();
                            let next = e.apply(model, defs, sys)?;
                            let fused = fused.iter().map(|&k| latents[k].clone()).collect();
                            out.push(mk(Rule::Fuse, vec![a.clone()], Some(session), Some(sigma), fused, next));
                        }
                    }
                    Prefix::Do { .. } => {}
                }
            }
        }
    }
    do_steps(model, defs, sys, &mut out)?;
    Ok(out)
}

struct Offer<'a, M: ContractModel> {
    agent: usize,
    thread: usize,
    branch: usize,
    atom: &'a M::Atom,
    cont: &'a Process<M>,
}

fn do_steps<M: ContractModel>(model: &M, defs: &Defs<M>, sys: &System<M>, out: &mut Vec<Step<M>>) -> Result<(), RuntimeError> {
    for session in &sys.sessions {
        let mut offers = Vec::new();
        for (ai, agent) in sys.agents.iter().enumerate() {
            for (ti, thread) in agent.threads.iter().enumerate() {
                let Thread::Sum(branches) = thread else { continue };
                for (bi, (prefix, cont)) in branches.iter().enumerate() {
                    if let Prefix::Do { target, atom } = prefix {
                        if *target == session.name {
                            offers.push(Offer {
                                agent: ai,
                                thread: ti,
                                branch: bi,
                                atom,
                                cont,
                            });
                        }
                    }
                }
            }
        }
        // ordered tuples of offers from pairwise distinct agents
        let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..model.max_label_arity() {
            let mut longer = Vec::new();
            for t in &tuples {
                for (oi, o) in offers.iter().enumerate() {
                    if t.iter().all(|&j| offers[j].agent != o.agent) {
                        let mut u = t.clone();
                        u.push(oi);
                        longer.push(u);
                    }
                }
            }
            for t in &longer {
                let label = ActionLabel::new(
                    t.iter()
                        .map(|&j| (sys.agents[offers[j].agent].name.clone(), offers[j].atom.clone()))
                        .collect(),
                )?;
                for contracts in model.step(&session.contracts, &label)? {
                    let mut e = Edit::new();
                    for &j in t {
                        e = e.fire(offers[j].agent, offers[j].thread, offers[j].cont);
                    }
                    e.session = Some((session.name.clone(), contracts));
                    let next = e.apply(model, defs, sys)?;
                    out.push(Step {
                        rule: Rule::Do,
                        agents: t.iter().map(|&j| sys.agents[offers[j].agent].name.clone()).collect(),
                        session: Some(session.name.clone()),
                        label: Some(label.clone()),
                        sigma: None,
                        fused: Vec::new(),
                        fired: t
                            .iter()
                            .map(|&j| {
                                let o = &offers[j];
                                PrefixInstance {
                                    agent: sys.agents[o.agent].name.clone(),
                                    thread: sys.agents[o.agent].threads[o.thread].clone(),
                                    branch: o.branch,
                                }
                            })
                            .collect(),
                        next,
                    });
                }
            }
            tuples = longer;
        }
    }
    Ok(())
}
