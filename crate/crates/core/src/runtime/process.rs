//! Process and system terms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::terms::{ContractModel, Ident, Substitutable};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prefix<M: ContractModel> {
    Tau,
    /// `do u a`: perform `a` in session `u`.
    Do { target: Ident, atom: M::Atom },
    /// `tell A {x} c`: advertise the latent contract `{x} c` to `A`.
    Tell {
        target: Ident,
        var: Ident,
        contract: M::Contract,
    },
    /// `ask u [vars] φ`: wait until session `u` entails `φ` for some
    /// instantiation of `vars`.
    Ask {
        target: Ident,
        vars: Vec<Ident>,
        observable: M::Observable,
    },
    /// `fuse x φ`: stipulate a new session out of local latent contracts.
    Fuse { var: Ident, observable: M::Observable },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process<M: ContractModel> {
    Latent { var: Ident, contract: M::Contract },
    /// Guarded choice; the empty sum is `0`.
    Sum(Vec<(Prefix<M>, Process<M>)>),
    Par(Vec<Process<M>>),
    Delim(Vec<Ident>, Box<Process<M>>),
    Call(Arc<str>, Vec<Ident>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SysTerm<M: ContractModel> {
    Zero,
    Agent(Ident, Process<M>),
    Session(Ident, Vec<M::Contract>),
    Par(Vec<SysTerm<M>>),
    Delim(Vec<Ident>, Box<SysTerm<M>>),
}

/// `X(u1, …, un) = P`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcDef<M: ContractModel> {
    pub name: Arc<str>,
    pub params: Vec<Ident>,
    pub body: Process<M>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Defs<M: ContractModel> {
    map: BTreeMap<Arc<str>, ProcDef<M>>,
}

impl<M: ContractModel> Default for Defs<M> {
    fn default() -> Self {
        Defs { map: BTreeMap::new() }
    }
}

impl<M: ContractModel> Defs<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, def: ProcDef<M>) {
        self.map.insert(def.name.clone(), def);
    }

    pub fn get(&self, name: &str) -> Option<&ProcDef<M>> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProcDef<M>> {
        self.map.values()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl<M: ContractModel> Process<M> {
    pub fn zero() -> Self {
        Process::Sum(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Process::Sum(b) if b.is_empty())
    }

    pub fn prefix(p: Prefix<M>, cont: Process<M>) -> Self {
        Process::Sum(vec![(p, cont)])
    }

    /// Calls reachable without passing a prefix.
    pub(crate) fn unguarded_calls(&self, out: &mut Vec<Arc<str>>) {
        match self {
            Process::Latent { .. } | Process::Sum(_) => {}
            Process::Par(ps) => ps.iter().for_each(|p| p.unguarded_calls(out)),
            Process::Delim(_, p) => p.unguarded_calls(out),
            Process::Call(x, _) => out.push(x.clone()),
        }
    }

    pub(crate) fn calls(&self, out: &mut BTreeSet<Arc<str>>) {
        match self {
            Process::Latent { .. } => {}
            Process::Sum(bs) => bs.iter().for_each(|(_, p)| p.calls(out)),
            Process::Par(ps) => ps.iter().for_each(|p| p.calls(out)),
            Process::Delim(_, p) => p.calls(out),
            Process::Call(x, _) => {
                out.insert(x.clone());
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Process::Par(ps) if ps.len() > 1 => 0,
            Process::Sum(bs) if bs.len() > 1 => 1,
            Process::Delim(..) => 0,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Process::Latent { var, contract } => write!(f, "{{{var}}} ({contract})"),
            Process::Sum(bs) if bs.is_empty() => write!(f, "0"),
            Process::Sum(bs) => {
                for (i, (p, k)) in bs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{p}")?;
                    if !k.is_zero() {
                        write!(f, ".")?;
                        k.fmt_at(f, 2)?;
                    }
                }
                Ok(())
            }
            Process::Par(ps) if ps.is_empty() => write!(f, "0"),
            Process::Par(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    // a delimiter scope extends as far right as possible
                    let min = if i + 1 < ps.len() { 1 } else { 0 };
                    match p {
                        Process::Delim(..) if min > 0 => {
                            write!(f, "(")?;
                            p.fmt_at(f, 0)?;
                            write!(f, ")")?;
                        }
                        _ => p.fmt_at(f, 1)?,
                    }
                }
                Ok(())
            }
            Process::Delim(vs, p) => {
                write_binders(f, vs)?;
                write!(f, " ")?;
                p.fmt_at(f, 0)
            }
            Process::Call(x, args) => {
                write!(f, "{x}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    write_list(f, args)?;
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, xs: &[Ident]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

pub(crate) fn write_binders(f: &mut fmt::Formatter<'_>, xs: &[Ident]) -> fmt::Result {
    write!(f, "(")?;
    write_list(f, xs)?;
    write!(f, ")")
}

impl<M: ContractModel> fmt::Display for Prefix<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prefix::Tau => write!(f, "tau"),
            Prefix::Do { target, atom } => write!(f, "do {target} {atom}"),
            Prefix::Tell { target, var, contract } => write!(f, "tell {target} {{{var}}} ({contract})"),
            Prefix::Ask {
                target,
                vars,
                observable,
            } => {
                write!(f, "ask {target} ")?;
                if !vars.is_empty() {
                    write!(f, "[")?;
                    write_list(f, vars)?;
                    write!(f, "] ")?;
                }
                write!(f, "({observable})")
            }
            Prefix::Fuse { var, observable } => write!(f, "fuse {var} ({observable})"),
        }
    }
}

impl<M: ContractModel> fmt::Display for Process<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl<M: ContractModel> fmt::Display for SysTerm<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SysTerm::Zero => write!(f, "0"),
            SysTerm::Agent(a, p) => write!(f, "{a}[{p}]"),
            SysTerm::Session(s, cs) => write_session(f, s, cs),
            SysTerm::Par(ts) if ts.is_empty() => write!(f, "0"),
            SysTerm::Par(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    match t {
                        SysTerm::Delim(..) | SysTerm::Par(_) if i + 1 < ts.len() => write!(f, "({t})")?,
                        _ => write!(f, "{t}")?,
                    }
                }
                Ok(())
            }
            SysTerm::Delim(vs, t) => {
                write_binders(f, vs)?;
                write!(f, " {t}")
            }
        }
    }
}

pub(crate) fn write_session<C: fmt::Display>(f: &mut fmt::Formatter<'_>, s: &Ident, cs: &[C]) -> fmt::Result {
    write!(f, "{s}[")?;
    if cs.is_empty() {
        write!(f, "0")?;
    }
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{c}")?;
    }
    write!(f, "]")
}

impl<M: ContractModel> fmt::Display for ProcDef<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "def {}", self.name)?;
        if !self.params.is_empty() {
            write!(f, "(")?;
            write_list(f, &self.params)?;
            write!(f, ")")?;
        }
        write!(f, " = {};", self.body)
    }
}

impl<M: ContractModel> Substitutable for Prefix<M> {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        match self {
            Prefix::Tau => {}
            Prefix::Do { target, .. } => f(target),
            Prefix::Tell { target, var, contract } => {
                f(target);
                f(var);
                contract.visit_free(f);
            }
            Prefix::Ask {
                target,
                vars,
                observable,
            } => {
                f(target);
                vars.iter().for_each(&mut *f);
                observable.visit_free(f);
            }
            Prefix::Fuse { var, observable } => {
                f(var);
                observable.visit_free(f);
            }
        }
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        match self {
            Prefix::Tau => Prefix::Tau,
            Prefix::Do { target, atom } => Prefix::Do {
                target: target.rename(map),
                atom: atom.clone(),
            },
            Prefix::Tell { target, var, contract } => Prefix::Tell {
                target: target.rename(map),
                var: var.rename(map),
                contract: contract.rename(map),
            },
            Prefix::Ask {
                target,
                vars,
                observable,
            } => Prefix::Ask {
                target: target.rename(map),
                vars: vars.rename(map),
                observable: observable.rename(map),
            },
            Prefix::Fuse { var, observable } => Prefix::Fuse {
                var: var.rename(map),
                observable: observable.rename(map),
            },
        }
    }
}

fn shadowed(map: &BTreeMap<Ident, Ident>, bound: &[Ident]) -> BTreeMap<Ident, Ident> {
    map.iter()
        .filter(|(k, _)| !bound.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// The smallest-tag variant of `v` not in `avoid`.
pub(crate) fn fresh_variant(v: &Ident, avoid: &BTreeSet<Ident>) -> Ident {
    (v.tag()..)
        .map(|t| v.with_tag(t))
        .find(|c| !avoid.contains(c))
        .expect("unbounded tag range")
}

/// Capture-avoiding entry into a binder: returns the (possibly renamed)
/// binders and the body to which `map` can then be applied safely.
fn enter_binder<T, F>(vs: &[Ident], body: &T, map: &BTreeMap<Ident, Ident>, all: F) -> (Vec<Ident>, BTreeMap<Ident, Ident>, T)
where
    T: Substitutable + Clone,
    F: Fn(&T, &mut BTreeSet<Ident>),
{
    let inner = shadowed(map, vs);
    let range: BTreeSet<&Ident> = inner.values().collect();
    if !vs.iter().any(|v| range.contains(v)) {
        return (vs.to_vec(), inner, body.clone());
    }
    let mut avoid: BTreeSet<Ident> = vs.iter().cloned().collect();
    all(body, &mut avoid);
    avoid.extend(inner.keys().cloned());
    avoid.extend(inner.values().cloned());
    let mut alpha = BTreeMap::new();
    let mut new_vs = Vec::new();
    for v in vs {
        if range.contains(v) {
            let w = fresh_variant(v, &avoid);
            avoid.insert(w.clone());
            alpha.insert(v.clone(), w.clone());
            new_vs.push(w);
        } else {
            new_vs.push(v.clone());
        }
    }
    let body = body.rename(&alpha);
    (new_vs, inner, body)
}

impl<M: ContractModel> Substitutable for Process<M> {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        match self {
            Process::Latent { var, contract } => {
                f(var);
                contract.visit_free(f);
            }
            Process::Sum(bs) => {
                for (p, k) in bs {
                    p.visit_free(f);
                    k.visit_free(f);
                }
            }
            Process::Par(ps) => ps.iter().for_each(|p| p.visit_free(f)),
            Process::Delim(vs, p) => p.visit_free(&mut |i| {
                if !vs.contains(i) {
                    f(i)
                }
            }),
            Process::Call(_, args) => args.iter().for_each(f),
        }
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        match self {
            Process::Latent { var, contract } => Process::Latent {
                var: var.rename(map),
                contract: contract.rename(map),
            },
            Process::Sum(bs) => Process::Sum(bs.iter().map(|(p, k)| (p.rename(map), k.rename(map))).collect()),
            Process::Par(ps) => Process::Par(ps.rename(map)),
            Process::Delim(vs, p) => {
                let (vs, inner, body) = enter_binder(vs, &**p, map, all_idents_proc);
                Process::Delim(vs, Box::new(body.rename(&inner)))
            }
            Process::Call(x, args) => Process::Call(x.clone(), args.rename(map)),
        }
    }
}

impl<M: ContractModel> Substitutable for SysTerm<M> {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        match self {
            SysTerm::Zero => {}
            SysTerm::Agent(a, p) => {
                f(a);
                p.visit_free(f);
            }
            SysTerm::Session(s, cs) => {
                f(s);
                cs.visit_free(f);
            }
            SysTerm::Par(ts) => ts.iter().for_each(|t| t.visit_free(f)),
            SysTerm::Delim(vs, t) => t.visit_free(&mut |i| {
                if !vs.contains(i) {
                    f(i)
                }
            }),
        }
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        match self {
            SysTerm::Zero => SysTerm::Zero,
            SysTerm::Agent(a, p) => SysTerm::Agent(a.rename(map), p.rename(map)),
            SysTerm::Session(s, cs) => SysTerm::Session(s.rename(map), cs.rename(map)),
            SysTerm::Par(ts) => SysTerm::Par(ts.rename(map)),
            SysTerm::Delim(vs, t) => {
                let (vs, inner, body) = enter_binder(vs, &**t, map, all_idents_sys);
                SysTerm::Delim(vs, Box::new(body.rename(&inner)))
            }
        }
    }
}

/// Every identifier occurring anywhere in a term, bound or free.
pub(crate) fn all_idents_proc<M: ContractModel>(p: &Process<M>, out: &mut BTreeSet<Ident>) {
    match p {
        Process::Delim(vs, q) => {
            out.extend(vs.iter().cloned());
            all_idents_proc(q, out);
        }
        Process::Sum(bs) => {
            for (pre, k) in bs {
                pre.visit_free(&mut |i| {
                    out.insert(i.clone());
                });
                all_idents_proc(k, out);
            }
        }
        Process::Par(ps) => ps.iter().for_each(|q| all_idents_proc(q, out)),
        _ => p.visit_free(&mut |i| {
            out.insert(i.clone());
        }),
    }
}

pub(crate) fn all_idents_sys<M: ContractModel>(t: &SysTerm<M>, out: &mut BTreeSet<Ident>) {
    match t {
        SysTerm::Zero => {}
        SysTerm::Agent(a, p) => {
            out.insert(a.clone());
            all_idents_proc(p, out);
        }
        SysTerm::Session(..) => t.visit_free(&mut |i| {
            out.insert(i.clone());
        }),
        SysTerm::Par(ts) => ts.iter().for_each(|t| all_idents_sys(t, out)),
        SysTerm::Delim(vs, t) => {
            out.extend(vs.iter().cloned());
            all_idents_sys(t, out);
        }
    }
}
