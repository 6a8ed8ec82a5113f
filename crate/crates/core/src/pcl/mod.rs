//! Propositional contract logic: formulas, a Horn-style prover for the
//! fragment used by contracts, and the induced contract model.

mod clause;
mod prover;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::terms::{ActionLabel, ContractModel, Ident, ModelError, Substitutable};

pub use clause::{clausify, compile_goal, Clause, ClauseKind, Goal, PosF, TaggedAtom};
pub use prover::{Derivation, Theory};

/// An atom `a` (a promise) or `!a` (the fact that `a` was done).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PclAtom {
    pub name: Arc<str>,
    pub fact: bool,
}

impl PclAtom {
    pub fn promise(name: &str) -> Self {
        PclAtom {
            name: name.into(),
            fact: false,
        }
    }

    pub fn fact(name: &str) -> Self {
        PclAtom {
            name: name.into(),
            fact: true,
        }
    }
}

impl fmt::Display for PclAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fact {
            write!(f, "!")?;
        }
        write!(f, "{}", self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pcl {
    True,
    False,
    Atom(PclAtom),
    And(Box<Pcl>, Box<Pcl>),
    Or(Box<Pcl>, Box<Pcl>),
    /// Intuitionistic implication `->`.
    Imp(Box<Pcl>, Box<Pcl>),
    /// Contractual implication `-->>`.
    CImp(Box<Pcl>, Box<Pcl>),
    Says(Ident, Box<Pcl>),
}

impl Pcl {
    pub fn atom(name: &str) -> Self {
        Pcl::Atom(PclAtom::promise(name))
    }

    pub fn fact(name: &str) -> Self {
        Pcl::Atom(PclAtom::fact(name))
    }

    pub fn and(a: Pcl, b: Pcl) -> Self {
        Pcl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Pcl, b: Pcl) -> Self {
        Pcl::Or(Box::new(a), Box::new(b))
    }

    pub fn imp(a: Pcl, b: Pcl) -> Self {
        Pcl::Imp(Box::new(a), Box::new(b))
    }

    pub fn cimp(a: Pcl, b: Pcl) -> Self {
        Pcl::CImp(Box::new(a), Box::new(b))
    }

    pub fn says(p: Ident, body: Pcl) -> Self {
        Pcl::Says(p, Box::new(body))
    }

    /// Right-nested conjunction; `true` when empty.
    pub fn conj(items: impl IntoIterator<Item = Pcl>) -> Self {
        let mut v: Vec<Pcl> = items.into_iter().collect();
        match v.pop() {
            None => Pcl::True,
            Some(last) => v.into_iter().rev().fold(last, |acc, x| Pcl::and(x, acc)),
        }
    }

    /// Right-nested disjunction; `false` when empty.
    pub fn disj(items: impl IntoIterator<Item = Pcl>) -> Self {
        let mut v: Vec<Pcl> = items.into_iter().collect();
        match v.pop() {
            None => Pcl::False,
            Some(last) => v.into_iter().rev().fold(last, |acc, x| Pcl::or(x, acc)),
        }
    }

    /// Top-level conjuncts, flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Pcl> {
        match self {
            Pcl::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            Pcl::True => Vec::new(),
            p => vec![p],
        }
    }

    /// Names of all atoms occurring in the formula.
    pub fn atom_names(&self, out: &mut BTreeSet<Arc<str>>) {
        match self {
            Pcl::True | Pcl::False => {}
            Pcl::Atom(a) => {
                out.insert(a.name.clone());
            }
            Pcl::And(a, b) | Pcl::Or(a, b) | Pcl::Imp(a, b) | Pcl::CImp(a, b) => {
                a.atom_names(out);
                b.atom_names(out);
            }
            Pcl::Says(_, b) => b.atom_names(out),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Pcl::Imp(..) | Pcl::CImp(..) => 0,
            Pcl::Or(..) => 1,
            Pcl::And(..) => 2,
            _ => 3,
        }
    }

    /// Operand of a binary connective; `says` is parenthesised for legibility.
    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if matches!(self, Pcl::Says(..)) || self.prec() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            write!(f, ")")
        } else {
            self.fmt_at(f, min)
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Pcl::True => write!(f, "true"),
            Pcl::False => write!(f, "false"),
            Pcl::Atom(a) => write!(f, "{a}"),
            Pcl::And(a, b) => {
                a.fmt_operand(f, 2)?;
                write!(f, " /\\ ")?;
                b.fmt_operand(f, 3)
            }
            Pcl::Or(a, b) => {
                a.fmt_operand(f, 1)?;
                write!(f, " \\/ ")?;
                b.fmt_operand(f, 2)
            }
            Pcl::Imp(a, b) | Pcl::CImp(a, b) => {
                a.fmt_operand(f, 1)?;
                let op = if matches!(self, Pcl::Imp(..)) { "->" } else { "-->>" };
                write!(f, " {op} ")?;
                b.fmt_operand(f, 0)
            }
            Pcl::Says(p, b) => match **b {
                Pcl::Atom(_) | Pcl::True | Pcl::False => write!(f, "{p} says {b}"),
                _ => {
                    write!(f, "{p} says (")?;
                    b.fmt_at(f, 0)?;
                    write!(f, ")")
                }
            },
        }
    }
}

impl fmt::Display for Pcl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl Substitutable for Pcl {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        match self {
            Pcl::True | Pcl::False | Pcl::Atom(_) => {}
            Pcl::And(a, b) | Pcl::Or(a, b) | Pcl::Imp(a, b) | Pcl::CImp(a, b) => {
                a.visit_free(f);
                b.visit_free(f);
            }
            Pcl::Says(p, b) => {
                f(p);
                b.visit_free(f);
            }
        }
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        let r = |x: &Pcl| Box::new(x.rename(map));
        match self {
            Pcl::True | Pcl::False | Pcl::Atom(_) => self.clone(),
            Pcl::And(a, b) => Pcl::And(r(a), r(b)),
            Pcl::Or(a, b) => Pcl::Or(r(a), r(b)),
            Pcl::Imp(a, b) => Pcl::Imp(r(a), r(b)),
            Pcl::CImp(a, b) => Pcl::CImp(r(a), r(b)),
            Pcl::Says(p, b) => Pcl::Says(p.rename(map), r(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PclError {
    #[error("formula outside the supported fragment: {0}")]
    Fragment(String),
    #[error("unsupported goal: {0}")]
    UnsupportedGoal(String),
    #[error("formula mentions variable `{0}`; only closed formulas can be decided")]
    Open(Ident),
}

impl From<PclError> for ModelError {
    fn from(e: PclError) -> Self {
        match e {
            PclError::Fragment(m) => ModelError::Fragment(m),
            PclError::UnsupportedGoal(m) => ModelError::UnsupportedGoal(m),
            PclError::Open(v) => ModelError::Open(v.to_string()),
        }
    }
}

fn check_closed<'a>(fs: impl IntoIterator<Item = &'a Pcl>) -> Result<(), PclError> {
    for f in fs {
        if let Some(v) = f.free_vars().into_iter().next() {
            return Err(PclError::Open(v));
        }
    }
    Ok(())
}

/// `contracts ⊢ goal`.
pub fn pcl_entails(contracts: &[Pcl], goal: &Pcl) -> Result<bool, PclError> {
    check_closed(contracts.iter().chain([goal]))?;
    let theory = Theory::from_contracts(contracts)?;
    let goal = compile_goal(goal)?;
    Ok(theory.entails(&goal))
}

/// Firing `A says a` records both the promise and the fact.
pub fn pcl_step(contracts: &[Pcl], principal: &Ident, atom: &str) -> Vec<Pcl> {
    let mut out = contracts.to_vec();
    out.push(Pcl::says(principal.clone(), Pcl::atom(atom)));
    out.push(Pcl::says(principal.clone(), Pcl::fact(atom)));
    out.sort();
    out.dedup();
    out
}

/// Atoms `a` such that `A says a` is entailed but `A says !a` is not.
pub fn pcl_obligations(contracts: &[Pcl], principal: &Ident) -> Result<Vec<Arc<str>>, PclError> {
    check_closed(contracts)?;
    let theory = Theory::from_contracts(contracts)?;
    let d = theory.derive();
    let mut names = BTreeSet::new();
    for c in contracts {
        c.atom_names(&mut names);
    }
    Ok(names
        .into_iter()
        .filter(|n| {
            let t = |fact| TaggedAtom::new(Some(principal.clone()), n, fact);
            d.has(&t(false)) && !d.has(&t(true))
        })
        .collect())
}

pub fn pcl_fulfilled(contracts: &[Pcl], principal: &Ident) -> Result<bool, PclError> {
    Ok(pcl_obligations(contracts, principal)?.is_empty())
}

/// The PCL contract model. Sessions are sets of formulas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PclModel;

impl ContractModel for PclModel {
    type Contract = Pcl;
    type Atom = PclAtom;
    type Observable = Pcl;

    fn name(&self) -> &'static str {
        "pcl"
    }

    fn says(&self, principal: &Ident, contract: Pcl) -> Pcl {
        Pcl::says(principal.clone(), contract)
    }

    fn max_label_arity(&self) -> usize {
        1
    }

    fn normalize(&self, mut contracts: Vec<Pcl>) -> Vec<Pcl> {
        contracts.retain(|c| *c != Pcl::True);
        contracts.sort();
        contracts.dedup();
        contracts
    }

    fn step(&self, contracts: &[Pcl], label: &ActionLabel<PclAtom>) -> Result<Vec<Vec<Pcl>>, ModelError> {
        match label.entries() {
            [(p, a)] if !a.fact => Ok(vec![pcl_step(contracts, p, &a.name)]),
            _ => Ok(Vec::new()),
        }
    }

    fn entails(&self, contracts: &[Pcl], phi: &Pcl) -> Result<bool, ModelError> {
        Ok(pcl_entails(contracts, phi)?)
    }

    fn fulfilled(&self, contracts: &[Pcl], principal: &Ident) -> Result<bool, ModelError> {
        Ok(pcl_fulfilled(contracts, principal)?)
    }

    fn obligations(&self, contracts: &[Pcl], principal: &Ident) -> Result<Vec<String>, ModelError> {
        Ok(pcl_obligations(contracts, principal)?
            .into_iter()
            .map(|a| a.to_string())
            .collect())
    }
}
