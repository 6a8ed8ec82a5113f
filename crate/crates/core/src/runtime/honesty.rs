//! Honesty checking by bounded exploration of the reduction graph.
//!
//! A principal is dishonest when some fair maximal run leaves one of its
//! sessions unfulfilled for good: either the run ends in a state where the
//! principal is not fulfilled in some session, or it cycles forever through
//! such a state. Fairness is weak fairness on prefix occurrences: a cycle
//! that keeps some prefix enabled without ever firing it does not count.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::process::Defs;
use super::step::{enumerate_steps, PrefixInstance, Rule, Step};
use super::system::System;
use super::trace::TraceStep;
use super::RuntimeError;
use crate::ccs::ltl::tarjan;
use crate::exec::Exec;
use crate::terms::{ContractModel, Ident};

pub const DEFAULT_MAX_STATES: usize = 10_000;
pub const DEFAULT_MAX_DEPTH: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HonestyConfig {
    pub max_depth: usize,
    pub max_states: usize,
    pub exec: Exec,
}

impl Default for HonestyConfig {
    fn default() -> Self {
        HonestyConfig {
            max_depth: DEFAULT_MAX_DEPTH,
            max_states: DEFAULT_MAX_STATES,
            exec: Exec::default(),
        }
    }
}

/// A run on which the principal stays culpable: `path` leads from the
/// initial state to a culpable state and `cycle` (empty for a final state)
/// returns to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness<M: ContractModel> {
    pub session: Ident,
    pub path: Vec<TraceStep<M>>,
    pub cycle: Vec<TraceStep<M>>,
    pub obligations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict<M: ContractModel> {
    Honest,
    Dishonest(Box<Witness<M>>),
    /// No culpable run was found but the graph was not fully explored.
    Inconclusive,
}

impl<M: ContractModel> Verdict<M> {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Honest => "honest",
            Verdict::Dishonest(_) => "dishonest",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HonestyReport<M: ContractModel> {
    pub principal: Ident,
    pub verdict: Verdict<M>,
    pub states: usize,
    pub exhausted: bool,
}

#[derive(Clone, Debug)]
struct Edge<M: ContractModel> {
    to: usize,
    rule: Rule,
    agents: Vec<Ident>,
    session: Option<Ident>,
    label: Option<Vec<String>>,
    fired: Vec<PrefixInstance<M>>,
}

/// The reachable part of the reduction graph over states with session
/// delimiters stripped. `edges[i]` is `None` for states left unexpanded by
/// the bounds.
#[derive(Clone, Debug)]
pub struct StateGraph<M: ContractModel> {
    states: Vec<System<M>>,
    edges: Vec<Option<Vec<Edge<M>>>>,
    parent: Vec<Option<(usize, usize)>>,
    exhausted: bool,
}

impl<M: ContractModel> StateGraph<M> {
    /// Breadth-first exploration from `sys`. Each level is expanded with
    /// `cfg.exec`; successors are merged in a fixed order so the graph does
    /// not depend on the execution strategy.
    pub fn explore(model: &M, defs: &Defs<M>, sys: &System<M>, cfg: &HonestyConfig) -> Result<Self, RuntimeError> {
        let init = sys.freeze_names();
        let mut g = StateGraph {
            states: vec![init.clone()],
            edges: vec![None],
            parent: vec![None],
            exhausted: true,
        };
        let mut index: HashMap<System<M>, usize> = HashMap::from([(init, 0)]);
        let mut frontier = vec![0usize];
        let mut depth = 0;
        while !frontier.is_empty() {
            let systems: Vec<&System<M>> = frontier.iter().map(|&i| &g.states[i]).collect();
            let expanded: Vec<Result<Vec<Step<M>>, RuntimeError>> =
                cfg.exec.map(&systems, |s| enumerate_steps(model, defs, s));
            let mut next = Vec::new();
            for (&src, steps) in frontier.iter().zip(expanded) {
                let steps = steps?;
                if !steps.is_empty() && depth >= cfg.max_depth {
                    g.exhausted = false;
                    continue;
                }
                let succ: Vec<System<M>> = steps.iter().map(|s| s.next.freeze_names()).collect();
                let fresh = succ.iter().collect::<BTreeSet<_>>().into_iter().filter(|s| !index.contains_key(*s)).count();
                if g.states.len() + fresh > cfg.max_states {
                    g.exhausted = false;
                    continue;
                }
                let mut out = Vec::new();
                for (step, state) in steps.into_iter().zip(succ) {
                    let to = match index.get(&state) {
                        Some(&i) => i,
                        None => {
                            let i = g.states.len();
                            index.insert(state.clone(), i);
                            g.states.push(state);
                            g.edges.push(None);
                            g.parent.push(Some((src, out.len())));
                            next.push(i);
                            i
                        }
                    };
                    out.push(Edge {
                        to,
                        rule: step.rule,
                        agents: step.agents,
                        session: step.session,
                        label: step.label.map(|l| l.entry_strings()),
                        fired: step.fired,
                    });
                }
                g.edges[src] = Some(out);
            }
            frontier = next;
            depth += 1;
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn states(&self) -> &[System<M>] {
        &self.states
    }

    /// Rules of every explored edge.
    pub fn rules(&self) -> impl Iterator<Item = Rule> + '_ {
        self.edges.iter().flatten().flatten().map(|e| e.rule)
    }

    fn trace_step(&self, index: usize, from: usize, e: usize) -> TraceStep<M> {
        let edge = &self.edges[from].as_ref().expect("expanded")[e];
        TraceStep {
            index,
            rule: edge.rule,
            agents: edge.agents.clone(),
            session: edge.session.clone(),
            label: edge.label.clone(),
            state: self.states[edge.to].clone(),
        }
    }

    fn path_to(&self, target: usize) -> Vec<TraceStep<M>> {
        let mut hops = Vec::new();
        let mut cur = target;
        while let Some((p, e)) = self.parent[cur] {
            hops.push((p, e));
            cur = p;
        }
        hops.reverse();
        hops.iter()
            .enumerate()
            .map(|(i, &(p, e))| self.trace_step(i + 1, p, e))
            .collect()
    }

    /// Shortest walk inside `scc` from `from` to `to`, as edge hops.
    fn walk(&self, scc: &BTreeSet<usize>, from: usize, to: usize) -> Vec<(usize, usize)> {
        let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(q) = queue.pop_front() {
            if q == to {
                break;
            }
            for (ei, e) in self.edges[q].iter().flatten().enumerate() {
                if scc.contains(&e.to) && seen.insert(e.to) {
                    prev.insert(e.to, (q, ei));
                    queue.push_back(e.to);
                }
            }
        }
        let mut hops = Vec::new();
        let mut cur = to;
        while cur != from {
            let (p, e) = prev[&cur];
            hops.push((p, e));
            cur = p;
        }
        hops.reverse();
        hops
    }

    /// The first session in `state` where `principal` is not fulfilled.
    fn culpable(&self, model: &M, state: usize, principal: &Ident) -> Result<Option<Ident>, RuntimeError> {
        for s in &self.states[state].sessions {
            if !model.fulfilled(&s.contracts, principal)? {
                return Ok(Some(s.name.clone()));
            }
        }
        Ok(None)
    }

    fn witness(&self, model: &M, principal: &Ident, state: usize, session: Ident, cycle: Vec<(usize, usize)>) -> Result<Witness<M>, RuntimeError> {
        let path = self.path_to(state);
        let base = path.len();
        let cycle = cycle
            .iter()
            .enumerate()
            .map(|(i, &(p, e))| self.trace_step(base + i + 1, p, e))
            .collect();
        let contracts = &self.states[state].session(&session).expect("culpable session exists").contracts;
        Ok(Witness {
            obligations: model.obligations(contracts, principal)?,
            session,
            path,
            cycle,
        })
    }

    /// A fair cycle through every state of `scc`, starting and ending at
    /// `start`, that fires each prefix kept enabled throughout `scc`.
    fn fair_cycle(&self, scc: &BTreeSet<usize>, start: usize, needed: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut hops = Vec::new();
        let mut cur = start;
        for &(p, e) in needed {
            hops.extend(self.walk(scc, cur, p));
            hops.push((p, e));
            cur = self.edges[p].as_ref().expect("expanded")[e].to;
        }
        let mut visited: BTreeSet<usize> = hops.iter().map(|&(p, _)| p).collect();
        visited.insert(cur);
        for &q in scc {
            if !visited.contains(&q) {
                let w = self.walk(scc, cur, q);
                visited.extend(w.iter().map(|&(p, _)| p));
                hops.extend(w);
                visited.insert(q);
                cur = q;
            }
        }
        hops.extend(self.walk(scc, cur, start));
        if hops.is_empty() {
            // a self-loop
            let ei = self.edges[start]
                .iter()
                .flatten()
                .position(|e| e.to == start)
                .expect("nontrivial component");
            hops.push((start, ei));
        }
        hops
    }

    pub fn verdict(&self, model: &M, principal: &Ident) -> Result<HonestyReport<M>, RuntimeError> {
        let report = |verdict| HonestyReport {
            principal: principal.clone(),
            verdict,
            states: self.states.len(),
            exhausted: self.exhausted,
        };
        // maximal finite runs, in breadth-first order
        for (q, out) in self.edges.iter().enumerate() {
            if matches!(out, Some(es) if es.is_empty()) {
                if let Some(s) = self.culpable(model, q, principal)? {
                    let w = self.witness(model, principal, q, s, Vec::new())?;
                    return Ok(report(Verdict::Dishonest(Box::new(w))));
                }
            }
        }
        // fair infinite runs
        let adj: Vec<Vec<usize>> = self
            .edges
            .iter()
            .map(|es| es.iter().flatten().map(|e| e.to).collect())
            .collect();
        let mut comps = tarjan(&adj);
        comps.iter_mut().for_each(|c| c.sort());
        comps.sort();
        for comp in comps {
            let scc: BTreeSet<usize> = comp.iter().copied().collect();
            let nontrivial = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
            if !nontrivial {
                continue;
            }
            let Some((q, s)) = self.first_culpable(model, &comp, principal)? else { continue };
            let Some(needed) = self.fairness_edges(&scc) else { continue };
            let cycle = self.fair_cycle(&scc, q, &needed);
            let w = self.witness(model, principal, q, s, cycle)?;
            return Ok(report(Verdict::Dishonest(Box::new(w))));
        }
        Ok(report(if self.exhausted { Verdict::Honest } else { Verdict::Inconclusive }))
    }

    fn first_culpable(&self, model: &M, comp: &[usize], principal: &Ident) -> Result<Option<(usize, Ident)>, RuntimeError> {
        for &q in comp {
            if let Some(s) = self.culpable(model, q, principal)? {
                return Ok(Some((q, s)));
            }
        }
        Ok(None)
    }

    /// For a component admitting a weakly fair run that stays inside it, one
    /// internal edge per prefix occurrence enabled in all of its states;
    /// `None` if some such occurrence can never fire inside the component.
    fn fairness_edges(&self, scc: &BTreeSet<usize>) -> Option<Vec<(usize, usize)>> {
        let mut always: Option<BTreeSet<&PrefixInstance<M>>> = None;
        for &q in scc {
            let enabled: BTreeSet<&PrefixInstance<M>> = self.edges[q].iter().flatten().flat_map(|e| &e.fired).collect();
            always = Some(match always {
                None => enabled,
                Some(a) => a.intersection(&enabled).copied().collect(),
            });
        }
        let mut needed = Vec::new();
        for inst in always.unwrap_or_default() {
            let edge = scc.iter().find_map(|&q| {
                self.edges[q]
                    .iter()
                    .flatten()
                    .position(|e| scc.contains(&e.to) && e.fired.contains(inst))
                    .map(|ei| (q, ei))
            })?;
            if !needed.contains(&edge) {
                needed.push(edge);
            }
        }
        Some(needed)
    }
}

/// Explores `sys` within the bounds of `cfg` and judges `principal`.
pub fn check_honesty<M: ContractModel>(
    model: &M,
    defs: &Defs<M>,
    sys: &System<M>,
    principal: &Ident,
    cfg: &HonestyConfig,
) -> Result<HonestyReport<M>, RuntimeError> {
    StateGraph::explore(model, defs, sys, cfg)?.verdict(model, principal)
}
