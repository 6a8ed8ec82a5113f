//! Forward-chaining prover. Contractual implications are justified by the
//! greatest set of them whose premises become derivable once all their heads
//! are assumed; plain implications are applied to a fixpoint.

use std::collections::BTreeSet;

use super::clause::{clausify, Clause, ClauseKind, Goal, PosF, TaggedAtom};
use super::{Pcl, PclError};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Theory {
    clauses: Vec<Clause>,
}

/// The result of saturating a theory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Derivation {
    pub atoms: BTreeSet<TaggedAtom>,
    /// Derived disjunctions, each a `PosF::Or`.
    pub disjunctions: BTreeSet<PosF>,
    /// Indices of the contractual clauses that are supported.
    pub supported: Vec<usize>,
}

impl Derivation {
    /// `A says p` is witnessed by `A says p` itself or by an unqualified `p`.
    pub fn has(&self, t: &TaggedAtom) -> bool {
        self.atoms.contains(t) || (t.sayer.is_some() && self.atoms.contains(&t.untagged()))
    }

    fn add(&mut self, head: &PosF) -> bool {
        match head {
            PosF::True | PosF::False => false,
            PosF::Atom(t) => {
                let mut changed = self.atoms.insert(t.clone());
                if t.fact {
                    changed |= self.atoms.insert(t.promise());
                }
                changed
            }
            PosF::And(v) => v.iter().fold(false, |c, h| self.add(h) | c),
            PosF::Or(_) => self.disjunctions.insert(head.clone()),
        }
    }
}

/// Does `d` (a disjunct of a derived disjunction) entail goal disjunct `g`?
fn covers(d: &PosF, g: &Goal) -> bool {
    match (d, g) {
        (PosF::Atom(t), Goal::Atom(u)) => t == u || (u.sayer.is_some() && *t == u.untagged()),
        (PosF::And(ds), g) => ds.iter().any(|d| covers(d, g)),
        (d, Goal::And(gs)) => gs.iter().all(|g| covers(d, g)),
        (d, Goal::Or(gs)) => gs.iter().any(|g| covers(d, g)),
        (PosF::False, _) | (_, Goal::True) => true,
        _ => false,
    }
}

impl Theory {
    pub fn new(clauses: Vec<Clause>) -> Self {
        Theory { clauses }
    }

    pub fn from_contracts(contracts: &[Pcl]) -> Result<Self, PclError> {
        let mut clauses = Vec::new();
        for c in contracts {
            clauses.extend(clausify(c)?);
        }
        Ok(Theory { clauses })
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    fn with(&self, extra: impl IntoIterator<Item = Clause>) -> Theory {
        let mut t = self.clone();
        t.clauses.extend(extra);
        t
    }

    /// Closure of the theory where the heads of the contractual clauses in
    /// `enabled` are assumed outright.
    pub fn closure(&self, enabled: &[bool]) -> Derivation {
        let mut d = Derivation::default();
        for (i, c) in self.clauses.iter().enumerate() {
            let unconditional = match c.kind {
                ClauseKind::Imp => c.premises.is_empty(),
                ClauseKind::CImp => enabled[i],
            };
            if unconditional {
                d.add(&c.head);
            }
        }
        loop {
            let mut changed = false;
            for c in &self.clauses {
                if c.kind == ClauseKind::Imp
                    && !c.premises.is_empty()
                    && c.premises.iter().all(|p| d.has(p))
                {
                    changed |= d.add(&c.head);
                }
            }
            if !changed {
                break;
            }
        }
        d
    }

    fn cimp_mask(&self) -> Vec<bool> {
        self.clauses.iter().map(|c| c.kind == ClauseKind::CImp).collect()
    }

    /// Greatest supported set of contractual clauses, computed by removing
    /// unsupported clauses one at a time in the given order.
    pub fn supported_in_order(&self, order: &[usize]) -> Vec<bool> {
        let mut w = self.cimp_mask();
        loop {
            let d = self.closure(&w);
            let drop = order
                .iter()
                .copied()
                .find(|&i| w[i] && !self.clauses[i].premises.iter().all(|p| d.has(p)));
            match drop {
                Some(i) => w[i] = false,
                None => return w,
            }
        }
    }

    /// Greatest supported set, removing all unsupported clauses per round.
    pub fn supported(&self) -> Vec<bool> {
        let mut w = self.cimp_mask();
        loop {
            let d = self.closure(&w);
            let mut changed = false;
            for (i, c) in self.clauses.iter().enumerate() {
                if w[i] && !c.premises.iter().all(|p| d.has(p)) {
                    w[i] = false;
                    changed = true;
                }
            }
            if !changed {
                return w;
            }
        }
    }

    pub fn derive(&self) -> Derivation {
        let w = self.supported();
        let mut d = self.closure(&w);
        d.supported = (0..w.len()).filter(|&i| w[i]).collect();
        d
    }

    pub fn entails(&self, goal: &Goal) -> bool {
        self.holds(&self.derive(), goal)
    }

    fn holds(&self, d: &Derivation, goal: &Goal) -> bool {
        match goal {
            Goal::True => true,
            Goal::False => false,
            Goal::Atom(t) => d.has(t),
            Goal::And(gs) => gs.iter().all(|g| self.holds(d, g)),
            Goal::Or(gs) => {
                gs.iter().any(|g| self.holds(d, g))
                    || d.disjunctions.iter().any(|dj| match dj {
                        PosF::Or(ds) => ds.iter().all(|x| covers(x, goal)),
                        _ => false,
                    })
            }
            Goal::Clause(c) => self.clause_holds(d, c),
        }
    }

    fn head_goal(head: &PosF) -> Goal {
        match head {
            PosF::True => Goal::True,
            PosF::False => Goal::False,
            PosF::Atom(t) => Goal::Atom(t.clone()),
            PosF::And(v) => Goal::And(v.iter().map(Self::head_goal).collect()),
            PosF::Or(v) => Goal::Or(v.iter().map(Self::head_goal).collect()),
        }
    }

    fn clause_holds(&self, d: &Derivation, c: &Clause) -> bool {
        let head = Self::head_goal(&c.head);
        let assume = |atoms: &[TaggedAtom]| atoms.iter().cloned().map(Clause::fact).collect::<Vec<_>>();
        match c.kind {
            ClauseKind::Imp => {
                let t = self.with(assume(&c.premises));
                t.holds(&t.derive(), &head)
            }
            ClauseKind::CImp => {
                if self.holds(d, &head) {
                    return true;
                }
                let with_premises = self.with(assume(&c.premises));
                let dp = with_premises.derive();
                self.clauses.iter().any(|k| {
                    k.kind == ClauseKind::CImp
                        && k.sayer == c.sayer
                        && k.premises.iter().all(|p| dp.has(p))
                        && {
                            let t = self.with([Clause {
                                kind: ClauseKind::Imp,
                                sayer: k.sayer.clone(),
                                premises: Vec::new(),
                                head: k.head.clone(),
                            }]);
                            t.holds(&t.derive(), &head)
                        }
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{compile_goal, Pcl};
    use super::*;
    use crate::terms::Ident;

    fn p(s: &str) -> Ident {
        Ident::principal(s)
    }

    fn entails(c: &[Pcl], g: &Pcl) -> bool {
        Theory::from_contracts(c).unwrap().entails(&compile_goal(g).unwrap())
    }

    #[test]
    fn disjunctive_heads() {
        let c = vec![Pcl::says(p("A"), Pcl::or(Pcl::atom("ship"), Pcl::atom("fraud")))];
        let a = |x| Pcl::says(p("A"), Pcl::atom(x));
        assert!(entails(&c, &Pcl::or(a("ship"), a("fraud"))));
        assert!(entails(&c, &Pcl::or(a("fraud"), Pcl::or(a("x"), a("ship")))));
        assert!(!entails(&c, &a("ship")));
        assert!(!entails(&c, &Pcl::or(a("ship"), a("x"))));
    }

    #[test]
    fn unsupported_cycle_is_dropped() {
        // A promises a only if B does b, and nobody promises b
        let c = vec![Pcl::says(p("A"), Pcl::cimp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a")))];
        let t = Theory::from_contracts(&c).unwrap();
        assert!(t.derive().supported.is_empty());
        assert!(!entails(&c, &Pcl::says(p("A"), Pcl::atom("a"))));
    }

    #[test]
    fn clause_goals() {
        let c = vec![Pcl::says(p("A"), Pcl::cimp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a")))];
        // the contract entails itself and a weaker version of itself
        assert!(entails(&c, &c[0]));
        let weaker = Pcl::says(
            p("A"),
            Pcl::cimp(
                Pcl::and(Pcl::says(p("B"), Pcl::atom("b")), Pcl::says(p("B"), Pcl::atom("c"))),
                Pcl::atom("a"),
            ),
        );
        assert!(entails(&c, &weaker));
        assert!(!entails(std::slice::from_ref(&weaker), &c[0]));
        // plain implication goals are checked by the deduction rule
        let imp = Pcl::imp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::says(p("A"), Pcl::atom("a")));
        let c2 = vec![Pcl::says(p("A"), Pcl::imp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a")))];
        assert!(entails(&c2, &imp));
    }

    #[test]
    fn deletion_order_does_not_matter() {
        let c = vec![
            Pcl::says(p("A"), Pcl::cimp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a"))),
            Pcl::says(p("B"), Pcl::cimp(Pcl::says(p("C"), Pcl::atom("c")), Pcl::atom("b"))),
            Pcl::says(p("C"), Pcl::cimp(Pcl::says(p("D"), Pcl::atom("d")), Pcl::atom("c"))),
        ];
        let t = Theory::from_contracts(&c).unwrap();
        let fwd = t.supported_in_order(&[0, 1, 2]);
        let rev = t.supported_in_order(&[2, 1, 0]);
        assert_eq!(fwd, rev);
        assert_eq!(fwd, t.supported());
        assert!(fwd.iter().all(|x| !x));
    }
}
