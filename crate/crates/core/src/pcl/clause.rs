//! Translation of contract formulas into clauses and of queries into goals.

use std::fmt;
use std::sync::Arc;

use super::{Pcl, PclError};
use crate::terms::Ident;

/// An atom together with the principal asserting it (`None` when the atom
/// occurs outside any `says`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaggedAtom {
    pub sayer: Option<Ident>,
    pub name: Arc<str>,
    pub fact: bool,
}

impl TaggedAtom {
    pub fn new(sayer: Option<Ident>, name: &str, fact: bool) -> Self {
        TaggedAtom {
            sayer,
            name: name.into(),
            fact,
        }
    }

    pub fn untagged(&self) -> Self {
        TaggedAtom {
            sayer: None,
            ..self.clone()
        }
    }

    pub fn promise(&self) -> Self {
        TaggedAtom {
            fact: false,
            ..self.clone()
        }
    }
}

impl fmt::Display for TaggedAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.sayer {
            write!(f, "{p} says ")?;
        }
        if self.fact {
            write!(f, "!")?;
        }
        write!(f, "{}", self.name)
    }
}

/// Positive formulas over tagged atoms, kept flattened, sorted and
/// deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PosF {
    True,
    False,
    Atom(TaggedAtom),
    And(Vec<PosF>),
    Or(Vec<PosF>),
}

impl PosF {
    pub fn and(items: Vec<PosF>) -> PosF {
        let mut out = Vec::new();
        for i in items {
            match i {
                PosF::True => {}
                PosF::False => return PosF::False,
                PosF::And(v) => out.extend(v),
                p => out.push(p),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => PosF::True,
            1 => out.pop().unwrap(),
            _ => PosF::And(out),
        }
    }

    pub fn or(items: Vec<PosF>) -> PosF {
        let mut out = Vec::new();
        for i in items {
            match i {
                PosF::False => {}
                PosF::True => return PosF::True,
                PosF::Or(v) => out.extend(v),
                p => out.push(p),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => PosF::False,
            1 => out.pop().unwrap(),
            _ => PosF::Or(out),
        }
    }
}

impl fmt::Display for PosF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, v: &[PosF], op: &str| {
            for (i, p) in v.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                match p {
                    PosF::And(_) | PosF::Or(_) | PosF::Atom(TaggedAtom { sayer: Some(_), .. }) => {
                        write!(f, "({p})")?
                    }
                    _ => write!(f, "{p}")?,
                }
            }
            Ok(())
        };
        match self {
            PosF::True => write!(f, "true"),
            PosF::False => write!(f, "false"),
            PosF::Atom(a) => write!(f, "{a}"),
            PosF::And(v) => join(f, v, "/\\"),
            PosF::Or(v) => join(f, v, "\\/"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClauseKind {
    Imp,
    CImp,
}

/// `premises -> head` or `premises -->> head`, with the head an atom or a
/// disjunction. An unconditional atom is an `Imp` clause without premises.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    pub kind: ClauseKind,
    pub sayer: Option<Ident>,
    pub premises: Vec<TaggedAtom>,
    pub head: PosF,
}

impl Clause {
    pub fn fact(atom: TaggedAtom) -> Self {
        Clause {
            kind: ClauseKind::Imp,
            sayer: atom.sayer.clone(),
            premises: Vec::new(),
            head: PosF::Atom(atom),
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.premises.is_empty() && self.kind == ClauseKind::Imp {
            return write!(f, "{}", self.head);
        }
        let prem: Vec<String> = self.premises.iter().map(|p| format!("({p})")).collect();
        let op = match self.kind {
            ClauseKind::Imp => "->",
            ClauseKind::CImp => "-->>",
        };
        let prem = if prem.is_empty() { "true".to_string() } else { prem.join(" /\\ ") };
        write!(f, "{prem} {op} ")?;
        match &self.head {
            PosF::Or(_) => write!(f, "({})", self.head),
            h => write!(f, "{h}"),
        }
    }
}

fn fragment(what: &str, f: &Pcl) -> PclError {
    PclError::Fragment(format!("{what} in `{f}`"))
}

fn enter_says(ctx: &Option<Ident>, p: &Ident, whole: &Pcl) -> Result<Option<Ident>, PclError> {
    match ctx {
        Some(q) if q != p => Err(fragment("nested `says` of a different principal", whole)),
        _ => Ok(Some(p.clone())),
    }
}

fn tag(ctx: &Option<Ident>, a: &super::PclAtom) -> TaggedAtom {
    TaggedAtom {
        sayer: ctx.clone(),
        name: a.name.clone(),
        fact: a.fact,
    }
}

/// Positive formula in sayer context `ctx`.
fn positive(f: &Pcl, ctx: &Option<Ident>) -> Result<PosF, PclError> {
    Ok(match f {
        Pcl::True => PosF::True,
        Pcl::False => PosF::False,
        Pcl::Atom(a) => PosF::Atom(tag(ctx, a)),
        Pcl::And(x, y) => PosF::and(vec![positive(x, ctx)?, positive(y, ctx)?]),
        Pcl::Or(x, y) => PosF::or(vec![positive(x, ctx)?, positive(y, ctx)?]),
        Pcl::Says(p, b) => positive(b, &enter_says(ctx, p, f)?)?,
        Pcl::Imp(..) | Pcl::CImp(..) => return Err(fragment("nested implication", f)),
    })
}

/// Premises: a conjunction of (possibly `says`-tagged) atoms. `None` means the
/// premise is unsatisfiable, so the clause can be dropped.
fn premises(f: &Pcl, ctx: &Option<Ident>, out: &mut Vec<TaggedAtom>) -> Result<bool, PclError> {
    match f {
        Pcl::True => Ok(true),
        Pcl::False => Ok(false),
        Pcl::Atom(a) => {
            out.push(tag(ctx, a));
            Ok(true)
        }
        Pcl::And(x, y) => Ok(premises(x, ctx, out)? & premises(y, ctx, out)?),
        Pcl::Says(p, b) => {
            // premises may quote any principal, but only one level deep
            let inner = match ctx {
                Some(q) if q == p => ctx.clone(),
                _ if matches!(**b, Pcl::Says(..)) => {
                    return Err(fragment("nested `says` in a premise", f))
                }
                _ => Some(p.clone()),
            };
            premises(b, &inner, out)
        }
        _ => Err(fragment("premise that is not a conjunction of atoms", f)),
    }
}

fn split_heads(h: PosF) -> Vec<PosF> {
    match h {
        PosF::True => Vec::new(),
        PosF::And(v) => v,
        h => vec![h],
    }
}

fn clauses_in(f: &Pcl, ctx: &Option<Ident>, out: &mut Vec<Clause>) -> Result<(), PclError> {
    match f {
        Pcl::True => Ok(()),
        Pcl::False => Err(fragment("contract asserting `false`", f)),
        Pcl::And(x, y) => {
            clauses_in(x, ctx, out)?;
            clauses_in(y, ctx, out)
        }
        Pcl::Atom(_) | Pcl::Or(..) => {
            let h = positive(f, ctx)?;
            if h == PosF::False {
                return Err(fragment("contract asserting `false`", f));
            }
            for head in split_heads(h) {
                out.push(Clause {
                    kind: ClauseKind::Imp,
                    sayer: ctx.clone(),
                    premises: Vec::new(),
                    head,
                });
            }
            Ok(())
        }
        Pcl::Says(p, b) => clauses_in(b, &enter_says(ctx, p, f)?, out),
        Pcl::Imp(x, y) | Pcl::CImp(x, y) => {
            let kind = if matches!(f, Pcl::Imp(..)) { ClauseKind::Imp } else { ClauseKind::CImp };
            let mut prem = Vec::new();
            if !premises(x, ctx, &mut prem)? {
                return Ok(());
            }
            let head = positive(y, ctx)?;
            if head == PosF::False {
                return Err(fragment("implication with head `false`", f));
            }
            for head in split_heads(head) {
                out.push(Clause {
                    kind,
                    sayer: ctx.clone(),
                    premises: prem.clone(),
                    head,
                });
            }
            Ok(())
        }
    }
}

/// Clauses of a contract formula.
pub fn clausify(f: &Pcl) -> Result<Vec<Clause>, PclError> {
    let mut out = Vec::new();
    clauses_in(f, &None, &mut out)?;
    Ok(out)
}

/// A query: positive combinations of atoms and of implication clauses.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Goal {
    True,
    False,
    Atom(TaggedAtom),
    And(Vec<Goal>),
    Or(Vec<Goal>),
    Clause(Clause),
}

fn goal_in(f: &Pcl, ctx: &Option<Ident>) -> Result<Goal, PclError> {
    let unsupported = |e: PclError| match e {
        PclError::Fragment(m) => PclError::UnsupportedGoal(m),
        e => e,
    };
    Ok(match f {
        Pcl::True => Goal::True,
        Pcl::False => Goal::False,
        Pcl::Atom(a) => Goal::Atom(tag(ctx, a)),
        Pcl::And(x, y) => Goal::And(vec![goal_in(x, ctx)?, goal_in(y, ctx)?]),
        Pcl::Or(x, y) => Goal::Or(vec![goal_in(x, ctx)?, goal_in(y, ctx)?]),
        Pcl::Says(p, b) => goal_in(b, &enter_says(ctx, p, f).map_err(unsupported)?)?,
        Pcl::Imp(..) | Pcl::CImp(..) => {
            let mut cs = Vec::new();
            clauses_in(f, ctx, &mut cs).map_err(unsupported)?;
            Goal::And(cs.into_iter().map(Goal::Clause).collect())
        }
    })
}

pub fn compile_goal(f: &Pcl) -> Result<Goal, PclError> {
    goal_in(f, &None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sale_clauses() {
        let a = Ident::principal("A");
        let b = Ident::principal("B");
        let f = Pcl::says(
            a.clone(),
            Pcl::imp(Pcl::says(b.clone(), Pcl::atom("pay")), Pcl::and(Pcl::atom("ship"), Pcl::atom("x"))),
        );
        let cs = clausify(&f).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].premises, vec![TaggedAtom::new(Some(b), "pay", false)]);
        assert_eq!(cs[0].head, PosF::Atom(TaggedAtom::new(Some(a.clone()), "ship", false)));
        assert_eq!(cs[0].to_string(), "(B says pay) -> A says ship");
    }

    #[test]
    fn untagged_premise_inherits_sayer() {
        let a = Ident::principal("A");
        let cs = clausify(&Pcl::says(a.clone(), Pcl::cimp(Pcl::atom("p"), Pcl::atom("q")))).unwrap();
        assert_eq!(cs[0].premises[0].sayer, Some(a));
        assert_eq!(cs[0].kind, ClauseKind::CImp);
    }

    #[test]
    fn fragment_errors() {
        let a = Ident::principal("A");
        let b = Ident::principal("B");
        assert!(clausify(&Pcl::False).is_err());
        assert!(clausify(&Pcl::says(a.clone(), Pcl::says(b.clone(), Pcl::atom("p")))).is_err());
        assert!(clausify(&Pcl::imp(Pcl::atom("p"), Pcl::imp(Pcl::atom("q"), Pcl::atom("r")))).is_err());
        assert!(clausify(&Pcl::imp(Pcl::or(Pcl::atom("p"), Pcl::atom("q")), Pcl::atom("r"))).is_err());
        // unsatisfiable premise: the clause is vacuous
        assert!(clausify(&Pcl::imp(Pcl::False, Pcl::atom("r"))).unwrap().is_empty());
        assert!(matches!(
            compile_goal(&Pcl::says(a, Pcl::says(b, Pcl::atom("p")))),
            Err(PclError::UnsupportedGoal(_))
        ));
    }

    #[test]
    fn disjunction_normalisation() {
        let t = |n: &str| PosF::Atom(TaggedAtom::new(None, n, false));
        let d = PosF::or(vec![t("b"), PosF::or(vec![t("a"), t("b")]), PosF::False]);
        assert_eq!(d, PosF::Or(vec![t("a"), t("b")]));
        assert_eq!(PosF::or(vec![t("a"), t("a")]), t("a"));
        assert_eq!(PosF::and(vec![t("a"), PosF::True]), t("a"));
    }
}
