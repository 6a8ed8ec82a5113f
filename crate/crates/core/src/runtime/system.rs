//! Systems in normal form and the structural-congruence normaliser.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::process::{all_idents_sys, fresh_variant, write_binders, write_session, Defs, Prefix, Process, SysTerm};
use super::RuntimeError;
use crate::terms::{ContractModel, Ident, IdentKind, Substitutable};

/// A top-level parallel component of an agent's process.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Thread<M: ContractModel> {
    Latent { var: Ident, contract: M::Contract },
    Sum(Vec<(Prefix<M>, Process<M>)>),
}

impl<M: ContractModel> Thread<M> {
    pub fn to_process(&self) -> Process<M> {
        match self {
            Thread::Latent { var, contract } => Process::Latent {
                var: var.clone(),
                contract: contract.clone(),
            },
            Thread::Sum(bs) => Process::Sum(bs.clone()),
        }
    }
}

impl<M: ContractModel> fmt::Display for Thread<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_process())
    }
}

impl<M: ContractModel> Substitutable for Thread<M> {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        self.to_process().visit_free(f)
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        match self.to_process().rename(map) {
            Process::Latent { var, contract } => Thread::Latent { var, contract },
            Process::Sum(bs) => Thread::Sum(bs),
            _ => unreachable!("renaming preserves the shape of a thread"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Agent<M: ContractModel> {
    pub name: Ident,
    pub threads: Vec<Thread<M>>,
}

impl<M: ContractModel> Agent<M> {
    /// The latent contracts `{x} c` in this agent's environment, with their
    /// thread indices.
    pub fn latents(&self) -> Vec<(usize, Ident, M::Contract)> {
        self.threads
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                Thread::Latent { var, contract } => Some((i, var.clone(), contract.clone())),
                Thread::Sum(_) => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Session<M: ContractModel> {
    pub name: Ident,
    pub contracts: Vec<M::Contract>,
}

/// `(binders) (A1[P1] | … | s1[C1] | …)` with agents and sessions sorted by
/// name, threads sorted, and bound variables tagged canonically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct System<M: ContractModel> {
    pub binders: Vec<Ident>,
    pub agents: Vec<Agent<M>>,
    pub sessions: Vec<Session<M>>,
}

impl<M: ContractModel> System<M> {
    pub fn agent(&self, name: &Ident) -> Option<&Agent<M>> {
        self.agents.iter().find(|a| &a.name == name)
    }

    pub fn session(&self, name: &Ident) -> Option<&Session<M>> {
        self.sessions.iter().find(|s| &s.name == name)
    }

    /// The system with session-name binders dropped, so that sessions are
    /// compared by their contents rather than by delimiter position.
    pub fn freeze_names(&self) -> System<M> {
        let mut s = self.clone();
        s.binders.retain(|b| b.kind() != IdentKind::SessionName);
        s
    }

    /// All principal names occurring in the system.
    pub fn principal_names(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.to_term().visit_free(&mut |i| {
            if i.kind() == IdentKind::PrincipalName {
                out.insert(i.clone());
            }
        });
        out
    }

    /// All identifiers occurring in the system, bound or free.
    pub fn all_idents(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        all_idents_sys(&self.to_term(), &mut out);
        out
    }

    pub fn to_term(&self) -> SysTerm<M> {
        let mut parts: Vec<SysTerm<M>> = self
            .agents
            .iter()
            .map(|a| {
                let ps: Vec<Process<M>> = a.threads.iter().map(Thread::to_process).collect();
                let p = if ps.len() == 1 { ps.into_iter().next().unwrap() } else { Process::Par(ps) };
                SysTerm::Agent(a.name.clone(), p)
            })
            .collect();
        parts.extend(
            self.sessions
                .iter()
                .map(|s| SysTerm::Session(s.name.clone(), s.contracts.clone())),
        );
        let body = SysTerm::Par(parts);
        if self.binders.is_empty() {
            body
        } else {
            SysTerm::Delim(self.binders.clone(), Box::new(body))
        }
    }
}

impl<M: ContractModel> fmt::Display for System<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.binders.is_empty() {
            write_binders(f, &self.binders)?;
        }
        if self.agents.is_empty() && self.sessions.is_empty() {
            return write!(f, "0");
        }
        let multi = self.agents.len() + self.sessions.len() > 1;
        if !self.binders.is_empty() && multi {
            write!(f, "(")?;
        }
        let mut first = true;
        for a in &self.agents {
            if !first {
                write!(f, " | ")?;
            }
            first = false;
            write!(f, "{}[", a.name)?;
            if a.threads.is_empty() {
                write!(f, "0")?;
            }
            for (i, t) in a.threads.iter().enumerate() {
                if i > 0 {
                    write!(f, " | ")?;
                }
                write!(f, "{t}")?;
            }
            write!(f, "]")?;
        }
        for s in &self.sessions {
            if !first {
                write!(f, " | ")?;
            }
            first = false;
            write_session(f, &s.name, &s.contracts)?;
        }
        if !self.binders.is_empty() && multi {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Checks that every definition only calls defined identifiers with the
/// right arity and that no call cycle avoids a prefix.
pub fn validate_defs<M: ContractModel>(defs: &Defs<M>) -> Result<(), RuntimeError> {
    for d in defs.iter() {
        let mut calls = BTreeSet::new();
        d.body.calls(&mut calls);
        if let Some(x) = calls.into_iter().find(|x| defs.get(x).is_none()) {
            return Err(RuntimeError::UndefinedProcess(x));
        }
    }
    for d in defs.iter() {
        let mut seen = BTreeSet::new();
        let mut stack = vec![d.name.clone()];
        while let Some(x) = stack.pop() {
            let mut next = Vec::new();
            defs.get(&x).expect("checked above").body.unguarded_calls(&mut next);
            for y in next {
                if y == d.name {
                    return Err(RuntimeError::Unguarded(d.name.clone()));
                }
                if seen.insert(y.clone()) {
                    stack.push(y);
                }
            }
        }
    }
    Ok(())
}

struct Normaliser<'a, M: ContractModel> {
    model: &'a M,
    defs: &'a Defs<M>,
    /// Identifiers that a fresh binder must avoid.
    used: BTreeSet<Ident>,
    claimed: BTreeSet<Ident>,
    binders: Vec<Ident>,
    agents: BTreeMap<Ident, Vec<Thread<M>>>,
    sessions: BTreeMap<Ident, Vec<M::Contract>>,
}

fn garbage<M: ContractModel>(p: &Prefix<M>) -> bool {
    match p {
        Prefix::Tell { var, .. } | Prefix::Fuse { var, .. } => var.is_name(),
        Prefix::Ask { vars, .. } => vars.iter().any(Ident::is_name),
        _ => false,
    }
}

impl<M: ContractModel> Normaliser<'_, M> {
    /// Moves a binder to the top level, renaming it apart if needed.
    fn extrude(&mut self, vs: &[Ident]) -> BTreeMap<Ident, Ident> {
        let mut map = BTreeMap::new();
        for v in vs {
            let w = if self.claimed.contains(v) {
                fresh_variant(v, &self.used)
            } else {
                v.clone()
            };
            self.used.insert(w.clone());
            self.claimed.insert(w.clone());
            self.binders.push(w.clone());
            if &w != v {
                map.insert(v.clone(), w);
            }
        }
        map
    }

    fn system(&mut self, t: &SysTerm<M>) -> Result<(), RuntimeError> {
        match t {
            SysTerm::Zero => Ok(()),
            SysTerm::Par(ts) => ts.iter().try_for_each(|t| self.system(t)),
            SysTerm::Delim(vs, body) => {
                let map = self.extrude(vs);
                self.system(&body.rename(&map))
            }
            SysTerm::Session(s, cs) => {
                if !s.is_name() {
                    return Err(RuntimeError::SessionNotName(s.clone()));
                }
                if self.sessions.contains_key(s) {
                    return Err(RuntimeError::DuplicateSession(s.clone()));
                }
                let cs = self.model.normalize(cs.clone());
                self.sessions.insert(s.clone(), cs);
                Ok(())
            }
            SysTerm::Agent(a, p) => {
                if a.kind() != IdentKind::PrincipalName {
                    return Err(RuntimeError::AgentNotPrincipal(a.clone()));
                }
                if self.agents.contains_key(a) {
                    return Err(RuntimeError::DuplicateAgent(a.clone()));
                }
                let mut threads = Vec::new();
                self.process(p, &mut threads, 0)?;
                self.agents.insert(a.clone(), threads);
                Ok(())
            }
        }
    }

    fn process(&mut self, p: &Process<M>, out: &mut Vec<Thread<M>>, depth: usize) -> Result<(), RuntimeError> {
        match p {
            Process::Latent { var, contract } => {
                if var.is_var() {
                    out.push(Thread::Latent {
                        var: var.clone(),
                        contract: contract.clone(),
                    });
                }
                Ok(())
            }
            Process::Sum(bs) => {
                let mut bs: Vec<_> = bs.iter().filter(|(pre, _)| !garbage(pre)).cloned().collect();
                if !bs.is_empty() {
                    bs.sort();
                    out.push(Thread::Sum(bs));
                }
                Ok(())
            }
            Process::Par(ps) => ps.iter().try_for_each(|q| self.process(q, out, depth)),
            Process::Delim(vs, body) => {
                let map = self.extrude(vs);
                self.process(&body.rename(&map), out, depth)
            }
            Process::Call(x, args) => {
                let d = self.defs.get(x).ok_or_else(|| RuntimeError::UndefinedProcess(x.clone()))?;
                if d.params.len() != args.len() {
                    return Err(RuntimeError::Arity {
                        name: x.clone(),
                        expected: d.params.len(),
                        got: args.len(),
                    });
                }
                for (u, v) in d.params.iter().zip(args) {
                    if u.sort() != v.sort() {
                        return Err(RuntimeError::CallSort {
                            name: x.clone(),
                            param: u.clone(),
                            arg: v.clone(),
                        });
                    }
                }
                if depth > self.defs.iter().count() {
                    return Err(RuntimeError::Unguarded(x.clone()));
                }
                let map: BTreeMap<Ident, Ident> = d.params.iter().cloned().zip(args.iter().cloned()).collect();
                let body = d.body.rename(&map);
                self.process(&body, out, depth + 1)
            }
        }
    }
}

/// Normal form of a system term: delimiters extruded to the top (renamed
/// apart on clashes), calls in head position unfolded, dead terms erased,
/// unused binders dropped, components sorted and bound variables renamed
/// canonically.
pub fn normalize<M: ContractModel>(model: &M, defs: &Defs<M>, term: &SysTerm<M>) -> Result<System<M>, RuntimeError> {
    let mut used = BTreeSet::new();
    all_idents_sys(term, &mut used);
    let mut claimed = BTreeSet::new();
    term.visit_free(&mut |i| {
        claimed.insert(i.clone());
    });
    let mut n = Normaliser {
        model,
        defs,
        used,
        claimed,
        binders: Vec::new(),
        agents: BTreeMap::new(),
        sessions: BTreeMap::new(),
    };
    n.system(term)?;
    let mut sys = System {
        binders: n.binders,
        agents: n
            .agents
            .into_iter()
            .map(|(name, threads)| Agent { name, threads })
            .collect(),
        sessions: n
            .sessions
            .into_iter()
            .map(|(name, contracts)| Session { name, contracts })
            .collect(),
    };
    let mut free = BTreeSet::new();
    for a in &sys.agents {
        a.threads.visit_free(&mut |i| {
            free.insert(i.clone());
        });
    }
    for s in &sys.sessions {
        free.insert(s.name.clone());
        s.contracts.visit_free(&mut |i| {
            free.insert(i.clone());
        });
    }
    sys.binders.retain(|b| free.contains(b));
    if let Some(v) = free.iter().find(|i| i.is_var() && !sys.binders.contains(i)) {
        return Err(RuntimeError::Open(v.clone()));
    }
    canonicalise(&mut sys);
    Ok(sys)
}

/// Sorts threads and renames bound variables by order of first occurrence,
/// so that alpha-equivalent systems get the same representation.
fn canonicalise<M: ContractModel>(sys: &mut System<M>) {
    let vars: BTreeSet<Ident> = sys.binders.iter().filter(|b| b.is_var()).cloned().collect();
    if !vars.is_empty() {
        let erase: BTreeMap<Ident, Ident> = vars.iter().map(|v| (v.clone(), v.with_tag(u32::MAX))).collect();
        for a in &mut sys.agents {
            let mut keyed: Vec<(String, Thread<M>)> = a
                .threads
                .drain(..)
                .map(|t| (t.rename(&erase).to_string(), t))
                .collect();
            keyed.sort();
            a.threads = keyed.into_iter().map(|(_, t)| t).collect();
        }
        let mut order = Vec::new();
        let mut seen = BTreeSet::new();
        let mut visit = |i: &Ident| {
            if vars.contains(i) && seen.insert(i.clone()) {
                order.push(i.clone());
            }
        };
        for a in &sys.agents {
            a.threads.visit_free(&mut visit);
        }
        for s in &sys.sessions {
            s.contracts.visit_free(&mut visit);
        }
        let mut count: BTreeMap<(IdentKind, String), u32> = BTreeMap::new();
        let mut map = BTreeMap::new();
        for v in order {
            let c = count.entry((v.kind(), v.text().to_string())).or_insert(0);
            map.insert(v.clone(), v.with_tag(*c));
            *c += 1;
        }
        sys.substitute_keep_binders(&map);
        sys.binders = sys.binders.iter().map(|b| map.get(b).cloned().unwrap_or_else(|| b.clone())).collect();
    }
    for a in &mut sys.agents {
        a.threads.sort();
    }
    sys.binders.sort();
}

impl<M: ContractModel> System<M> {
    fn substitute_keep_binders(&mut self, map: &BTreeMap<Ident, Ident>) {
        for a in &mut self.agents {
            a.threads = a.threads.rename(map);
        }
        for s in &mut self.sessions {
            s.contracts = s.contracts.rename(map);
        }
    }
}
