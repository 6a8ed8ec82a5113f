//! Contracts as CCS-like processes with `says` localisation.

mod graph;
pub mod ltl;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::terms::{ActionLabel, ContractModel, Ident, ModelError, Substitutable};

pub use graph::{reachable, CcsGraph};
pub use ltl::{Ltl, TraceSemantics};

/// Default bound on reachable states explored for a single contract.
pub const DEFAULT_STATE_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    /// `a?`, written a⁻ in the usual notation.
    Input,
    /// `a!`, written a⁺.
    Output,
    /// `a^`, an autonomous action a⁰.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CcsAtom {
    pub name: Arc<str>,
    pub polarity: Polarity,
}

impl CcsAtom {
    pub fn new(name: &str, polarity: Polarity) -> Self {
        CcsAtom {
            name: name.into(),
            polarity,
        }
    }

    pub fn input(name: &str) -> Self {
        Self::new(name, Polarity::Input)
    }

    pub fn output(name: &str) -> Self {
        Self::new(name, Polarity::Output)
    }

    pub fn auto(name: &str) -> Self {
        Self::new(name, Polarity::Auto)
    }

    pub fn tau() -> Self {
        Self::auto("tau")
    }

    fn co(&self, other: &CcsAtom) -> bool {
        self.name == other.name
            && matches!(
                (self.polarity, other.polarity),
                (Polarity::Input, Polarity::Output) | (Polarity::Output, Polarity::Input)
            )
    }
}

impl fmt::Display for CcsAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.polarity {
            Polarity::Input => '?',
            Polarity::Output => '!',
            Polarity::Auto => '^',
        };
        write!(f, "{}{}", self.name, p)
    }
}

pub type CcsLabel = ActionLabel<CcsAtom>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ccs {
    /// Guarded choice; the empty sum is `0`.
    Sum(Vec<(CcsAtom, Ccs)>),
    Says(Ident, Box<Ccs>),
    Par(Vec<Ccs>),
    /// Reference to a `rec` definition.
    Call(Arc<str>),
}

impl Ccs {
    pub fn zero() -> Self {
        Ccs::Sum(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Ccs::Sum(b) if b.is_empty())
    }

    pub fn prefix(atom: CcsAtom, cont: Ccs) -> Self {
        Ccs::Sum(vec![(atom, cont)])
    }

    /// The prefix chain `a1.a2.….an.0`.
    pub fn seq(atoms: impl IntoIterator<Item = CcsAtom>) -> Self {
        let atoms: Vec<_> = atoms.into_iter().collect();
        atoms
            .into_iter()
            .rev()
            .fold(Ccs::zero(), |acc, a| Ccs::prefix(a, acc))
    }

    pub fn says(principal: Ident, body: Ccs) -> Self {
        Ccs::Says(principal, Box::new(body))
    }

    pub fn call(name: &str) -> Self {
        Ccs::Call(name.into())
    }

    /// Parallel factors of the top level (a non-parallel term is its own
    /// single factor, `0` has none).
    pub fn factors(&self) -> Vec<Ccs> {
        match self {
            Ccs::Par(fs) => fs.clone(),
            c if c.is_zero() => Vec::new(),
            c => vec![c.clone()],
        }
    }

    pub fn par(factors: Vec<Ccs>) -> Self {
        Ccs::Par(factors)
    }

    fn calls(&self, out: &mut BTreeSet<Arc<str>>) {
        match self {
            Ccs::Sum(bs) => bs.iter().for_each(|(_, c)| c.calls(out)),
            Ccs::Says(_, b) => b.calls(out),
            Ccs::Par(fs) => fs.iter().for_each(|c| c.calls(out)),
            Ccs::Call(x) => {
                out.insert(x.clone());
            }
        }
    }

    /// Calls reachable without passing a prefix.
    fn unguarded_calls(&self, out: &mut Vec<Arc<str>>) {
        match self {
            Ccs::Sum(_) => {}
            Ccs::Says(_, b) => b.unguarded_calls(out),
            Ccs::Par(fs) => fs.iter().for_each(|c| c.unguarded_calls(out)),
            Ccs::Call(x) => out.push(x.clone()),
        }
    }

    /// Structural-congruence normal form: parallel composition flattened and
    /// sorted, `0` factors and `A says 0` dropped, `says` distributed over
    /// parallel bodies, sum branches sorted.
    pub fn canonical(&self) -> Ccs {
        match self {
            Ccs::Sum(bs) => {
                let mut bs: Vec<_> = bs.iter().map(|(a, c)| (a.clone(), c.canonical())).collect();
                bs.sort();
                Ccs::Sum(bs)
            }
            Ccs::Says(p, body) => match body.canonical() {
                b if b.is_zero() => Ccs::zero(),
                Ccs::Par(fs) => {
                    Ccs::Par(fs.into_iter().map(|f| Ccs::says(p.clone(), f)).collect()).canonical()
                }
                b => Ccs::says(p.clone(), b),
            },
            Ccs::Par(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    match f.canonical() {
                        Ccs::Par(inner) => out.extend(inner),
                        c if c.is_zero() => {}
                        c => out.push(c),
                    }
                }
                out.sort();
                match out.len() {
                    0 => Ccs::zero(),
                    1 => out.pop().unwrap(),
                    _ => Ccs::Par(out),
                }
            }
            Ccs::Call(_) => self.clone(),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Ccs::Par(fs) if fs.len() > 1 => 0,
            Ccs::Sum(bs) if bs.len() > 1 => 1,
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
            Ccs::Sum(bs) if bs.is_empty() => write!(f, "0"),
            Ccs::Sum(bs) => {
                for (i, (a, c)) in bs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{a}")?;
                    if !c.is_zero() {
                        write!(f, ".")?;
                        c.fmt_at(f, 2)?;
                    }
                }
                Ok(())
            }
            Ccs::Says(p, b) => match **b {
                Ccs::Call(ref x) => write!(f, "{p} says {x}"),
                _ => {
                    write!(f, "{p} says (")?;
                    b.fmt_at(f, 0)?;
                    write!(f, ")")
                }
            },
            Ccs::Par(fs) if fs.is_empty() => write!(f, "0"),
            Ccs::Par(fs) => {
                for (i, c) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    c.fmt_at(f, 1)?;
                }
                Ok(())
            }
            Ccs::Call(x) => write!(f, "{x}"),
        }
    }
}

impl fmt::Display for Ccs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl Substitutable for Ccs {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        match self {
            Ccs::Sum(bs) => bs.iter().for_each(|(_, c)| c.visit_free(f)),
            Ccs::Says(p, b) => {
                f(p);
                b.visit_free(f)
            }
            Ccs::Par(fs) => fs.iter().for_each(|c| c.visit_free(f)),
            Ccs::Call(_) => {}
        }
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        match self {
            Ccs::Sum(bs) => Ccs::Sum(bs.iter().map(|(a, c)| (a.clone(), c.rename(map))).collect()),
            Ccs::Says(p, b) => Ccs::says(p.rename(map), b.rename(map)),
            Ccs::Par(fs) => Ccs::Par(fs.iter().map(|c| c.rename(map)).collect()),
            Ccs::Call(x) => Ccs::Call(x.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CcsError {
    #[error("undefined process identifier `{0}`")]
    Undefined(Arc<str>),
    #[error("definition `{0}` is not guarded: it reaches itself without a prefix")]
    Unguarded(Arc<str>),
    #[error("state cap of {cap} exceeded during bounded exploration")]
    CapExceeded { cap: usize },
    #[error("contract mentions variable `{0}`; only closed contracts can move")]
    Open(Ident),
}

impl From<CcsError> for ModelError {
    fn from(e: CcsError) -> Self {
        match e {
            CcsError::CapExceeded { cap } => ModelError::CapExceeded { cap },
            CcsError::Open(v) => ModelError::Open(v.to_string()),
            e => ModelError::Definition(e.to_string()),
        }
    }
}

/// Recursive definitions `X = c`. Bodies must be prefix-guarded.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Definitions {
    map: BTreeMap<Arc<str>, Ccs>,
}

impl Definitions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, body: Ccs) {
        self.map.insert(name.into(), body);
    }

    pub fn get(&self, name: &str) -> Option<&Ccs> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Arc<str>, &Ccs)> {
        self.map.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// Checks that every referenced identifier is defined and that no
    /// definition reaches a call cycle without passing a prefix.
    pub fn validate(&self) -> Result<(), CcsError> {
        for body in self.map.values() {
            let mut calls = BTreeSet::new();
            body.calls(&mut calls);
            if let Some(x) = calls.into_iter().find(|x| !self.map.contains_key(x)) {
                return Err(CcsError::Undefined(x));
            }
        }
        for start in self.map.keys() {
            let mut seen = BTreeSet::new();
            let mut stack = vec![start.clone()];
            while let Some(x) = stack.pop() {
                let mut next = Vec::new();
                self.map[&x].unguarded_calls(&mut next);
                for y in next {
                    if &y == start {
                        return Err(CcsError::Unguarded(start.clone()));
                    }
                    if seen.insert(y.clone()) {
                        stack.push(y);
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that every identifier referenced by `c` is defined.
    pub fn check_term(&self, c: &Ccs) -> Result<(), CcsError> {
        let mut calls = BTreeSet::new();
        c.calls(&mut calls);
        match calls.into_iter().find(|x| !self.map.contains_key(x)) {
            Some(x) => Err(CcsError::Undefined(x)),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Definitions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, c) in &self.map {
            writeln!(f, "rec {x} = {c};")?;
        }
        Ok(())
    }
}

/// Intermediate moves; only `Label` moves are visible at the top level.
#[derive(Clone, Debug)]
enum Move {
    Raw(CcsAtom),
    /// An input or output lifted through `A says`, waiting for a partner.
    Tagged(Ident, CcsAtom),
    Label(CcsLabel),
}

fn moves(defs: &Definitions, c: &Ccs, out: &mut Vec<(Move, Ccs)>) -> Result<(), CcsError> {
    match c {
        Ccs::Sum(bs) => {
            for (a, k) in bs {
                out.push((Move::Raw(a.clone()), k.clone()));
            }
        }
        Ccs::Says(p, body) => {
            if !p.is_name() {
                return Err(CcsError::Open(p.clone()));
            }
            let mut inner = Vec::new();
            moves(defs, body, &mut inner)?;
            for (m, k) in inner {
                let k = Ccs::says(p.clone(), k);
                match m {
                    Move::Raw(a) if a.polarity == Polarity::Auto => {
                        let label = ActionLabel::single(p.clone(), a).expect("closed principal");
                        out.push((Move::Label(label), k));
                    }
                    Move::Raw(a) => out.push((Move::Tagged(p.clone(), a), k)),
                    // already localised or already synchronised: stuck
                    Move::Tagged(..) | Move::Label(_) => {}
                }
            }
        }
        Ccs::Par(fs) => {
            let per: Vec<Vec<(Move, Ccs)>> = fs
                .iter()
                .map(|f| {
                    let mut v = Vec::new();
                    moves(defs, f, &mut v).map(|_| v)
                })
                .collect::<Result<_, _>>()?;
            let replace = |i: usize, ki: &Ccs| {
                let mut v = fs.clone();
                v[i] = ki.clone();
                v
            };
            for (i, mi) in per.iter().enumerate() {
                for (m, k) in mi {
                    out.push((m.clone(), Ccs::Par(replace(i, k))));
                }
            }
            for (i, mi) in per.iter().enumerate() {
                for (j, mj) in per.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    for (m1, k1) in mi {
                        let Move::Tagged(p1, a1) = m1 else { continue };
                        if a1.polarity != Polarity::Input {
                            continue;
                        }
                        for (m2, k2) in mj {
                            let Move::Tagged(p2, a2) = m2 else { continue };
                            if !a1.co(a2) {
                                continue;
                            }
                            let mut v = replace(i, k1);
                            v[j] = k2.clone();
                            let label = ActionLabel::new(vec![
                                (p1.clone(), a1.clone()),
                                (p2.clone(), a2.clone()),
                            ])
                            .expect("closed principals");
                            out.push((Move::Label(label), Ccs::Par(v)));
                        }
                    }
                }
            }
        }
        Ccs::Call(x) => {
            let body = defs.get(x).ok_or_else(|| CcsError::Undefined(x.clone()))?;
            moves(defs, body, out)?;
        }
    }
    Ok(())
}

/// The labelled successors of a contract; successors are canonical, sorted
/// and deduplicated.
pub fn ccs_step(defs: &Definitions, c: &Ccs) -> Result<Vec<(CcsLabel, Ccs)>, CcsError> {
    let mut raw = Vec::new();
    moves(defs, &c.canonical(), &mut raw)?;
    let mut out: Vec<(CcsLabel, Ccs)> = raw
        .into_iter()
        .filter_map(|(m, k)| match m {
            Move::Label(l) => Some((l, k.canonical())),
            _ => None,
        })
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// `c` is fulfilled for `A` when no top-level factor is `A says c'` with
/// `c'` non-null.
pub fn ccs_fulfilled(c: &Ccs, principal: &Ident) -> bool {
    !c.canonical()
        .factors()
        .iter()
        .any(|f| matches!(f, Ccs::Says(p, _) if p == principal))
}

/// The CCS contract model, with its recursive definitions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CcsModel {
    defs: Arc<Definitions>,
    cap: usize,
    semantics: TraceSemantics,
}

impl Default for CcsModel {
    fn default() -> Self {
        Self::new(Definitions::new())
    }
}

impl CcsModel {
    pub fn new(defs: Definitions) -> Self {
        CcsModel {
            defs: Arc::new(defs),
            cap: DEFAULT_STATE_CAP,
            semantics: TraceSemantics::default(),
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_semantics(mut self, semantics: TraceSemantics) -> Self {
        self.semantics = semantics;
        self
    }

    pub fn defs(&self) -> &Definitions {
        &self.defs
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn compose(contracts: &[Ccs]) -> Ccs {
        Ccs::Par(contracts.to_vec()).canonical()
    }
}

impl ContractModel for CcsModel {
    type Contract = Ccs;
    type Atom = CcsAtom;
    type Observable = Ltl;

    fn name(&self) -> &'static str {
        "ccs"
    }

    fn says(&self, principal: &Ident, contract: Ccs) -> Ccs {
        Ccs::says(principal.clone(), contract).canonical()
    }

    fn max_label_arity(&self) -> usize {
        2
    }

    fn normalize(&self, contracts: Vec<Ccs>) -> Vec<Ccs> {
        Self::compose(&contracts).factors()
    }

    fn step(&self, contracts: &[Ccs], label: &CcsLabel) -> Result<Vec<Vec<Ccs>>, ModelError> {
        let c = Self::compose(contracts);
        let mut out: Vec<Vec<Ccs>> = ccs_step(&self.defs, &c)?
            .into_iter()
            .filter(|(l, _)| l == label)
            .map(|(_, k)| k.factors())
            .collect();
        out.dedup();
        Ok(out)
    }

    fn entails(&self, contracts: &[Ccs], phi: &Ltl) -> Result<bool, ModelError> {
        let c = Self::compose(contracts);
        if let Some(v) = c.free_vars().into_iter().next() {
            return Err(CcsError::Open(v).into());
        }
        let g = reachable(&self.defs, &c, self.cap)?;
        Ok(ltl::entails(&g, phi, self.semantics))
    }

    fn fulfilled(&self, contracts: &[Ccs], principal: &Ident) -> Result<bool, ModelError> {
        Ok(ccs_fulfilled(&Self::compose(contracts), principal))
    }

    fn obligations(&self, contracts: &[Ccs], principal: &Ident) -> Result<Vec<String>, ModelError> {
        Ok(Self::compose(contracts)
            .factors()
            .into_iter()
            .filter(|f| matches!(f, Ccs::Says(p, _) if p == principal))
            .map(|f| f.to_string())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> Ident {
        Ident::principal("A")
    }
    fn b() -> Ident {
        Ident::principal("B")
    }

    fn sale() -> Ccs {
        Ccs::par(vec![
            Ccs::says(a(), Ccs::seq([CcsAtom::input("pay"), CcsAtom::auto("ship")])),
            Ccs::says(b(), Ccs::seq([CcsAtom::output("pay")])),
        ])
    }

    #[test]
    fn sync_then_autonomous() {
        let defs = Definitions::new();
        let s = ccs_step(&defs, &sale()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].0.to_string(), "<A says pay?, B says pay!>");
        assert_eq!(s[0].1, Ccs::says(a(), Ccs::seq([CcsAtom::auto("ship")])));
        let s2 = ccs_step(&defs, &s[0].1).unwrap();
        assert_eq!(s2.len(), 1);
        assert_eq!(s2[0].0.to_string(), "<A says ship^>");
        assert!(s2[0].1.is_zero());
    }

    #[test]
    fn raw_actions_never_escape() {
        let defs = Definitions::new();
        let c = Ccs::seq([CcsAtom::output("pay")]);
        assert!(ccs_step(&defs, &c).unwrap().is_empty());
        // unlocalised complementary actions do not synchronise either
        let c = Ccs::par(vec![c, Ccs::seq([CcsAtom::input("pay")])]);
        assert!(ccs_step(&defs, &c).unwrap().is_empty());
        // an unpartnered localised output is stuck
        let c = Ccs::says(a(), Ccs::seq([CcsAtom::output("pay")]));
        assert!(ccs_step(&defs, &c).unwrap().is_empty());
    }

    #[test]
    fn nested_says_is_stuck() {
        let defs = Definitions::new();
        let c = Ccs::says(a(), Ccs::says(b(), Ccs::seq([CcsAtom::auto("x")])));
        assert!(ccs_step(&defs, &c).unwrap().is_empty());
    }

    #[test]
    fn same_principal_can_synchronise_with_itself() {
        let defs = Definitions::new();
        let c = Ccs::says(
            a(),
            Ccs::par(vec![
                Ccs::seq([CcsAtom::input("p")]),
                Ccs::seq([CcsAtom::output("p")]),
            ]),
        );
        let s = ccs_step(&defs, &c).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].0.to_string(), "<A says p?, A says p!>");
    }

    #[test]
    fn canonical_form() {
        let c = Ccs::par(vec![
            Ccs::zero(),
            Ccs::says(b(), Ccs::zero()),
            Ccs::par(vec![Ccs::says(b(), Ccs::seq([CcsAtom::output("pay")])), Ccs::zero()]),
        ]);
        assert_eq!(c.canonical(), Ccs::says(b(), Ccs::seq([CcsAtom::output("pay")])));
        let d = Ccs::says(
            a(),
            Ccs::par(vec![Ccs::seq([CcsAtom::auto("x")]), Ccs::seq([CcsAtom::auto("y")])]),
        );
        assert_eq!(d.canonical().factors().len(), 2);
        assert_eq!(d.canonical(), d.canonical().canonical());
    }

    #[test]
    fn fulfilment() {
        assert!(!ccs_fulfilled(&sale(), &a()));
        assert!(!ccs_fulfilled(&sale(), &b()));
        let after = Ccs::says(a(), Ccs::seq([CcsAtom::auto("ship")]));
        assert!(!ccs_fulfilled(&after, &a()));
        assert!(ccs_fulfilled(&after, &b()));
        assert!(ccs_fulfilled(&Ccs::zero(), &a()));
    }

    #[test]
    fn definitions_are_checked() {
        let mut d = Definitions::new();
        d.insert("X", Ccs::call("Y"));
        assert!(matches!(d.validate(), Err(CcsError::Undefined(_))));
        d.insert("Y", Ccs::says(a(), Ccs::call("X")));
        assert!(matches!(d.validate(), Err(CcsError::Unguarded(_))));
        let mut d = Definitions::new();
        d.insert("X", Ccs::prefix(CcsAtom::auto("t"), Ccs::call("X")));
        d.validate().unwrap();
        let c = Ccs::says(a(), Ccs::call("X"));
        let s = ccs_step(&d, &c).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].1, c);
    }

    #[test]
    fn display() {
        assert_eq!(sale().to_string(), "A says (pay?.ship^) | B says (pay!)");
        let c = Ccs::prefix(
            CcsAtom::input("a"),
            Ccs::Sum(vec![
                (CcsAtom::auto("b"), Ccs::zero()),
                (CcsAtom::auto("c"), Ccs::zero()),
            ]),
        );
        assert_eq!(c.to_string(), "a?.(b^ + c^)");
    }

    #[test]
    fn model_step_matches_label() {
        let m = CcsModel::default();
        let contracts = m.normalize(sale().factors());
        let l = ActionLabel::new(vec![
            (a(), CcsAtom::input("pay")),
            (b(), CcsAtom::output("pay")),
        ])
        .unwrap();
        let next = m.step(&contracts, &l).unwrap();
        assert_eq!(next.len(), 1);
        let wrong = ActionLabel::new(vec![
            (b(), CcsAtom::output("pay")),
            (a(), CcsAtom::input("pay")),
        ])
        .unwrap();
        assert!(m.step(&contracts, &wrong).unwrap().is_empty());
    }
}
