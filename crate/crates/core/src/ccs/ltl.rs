//! Linear temporal logic over the traces of a contract, decided by product
//! of the reachable graph with a tableau automaton for the negated formula.
//!
//! Maximal finite traces are padded with an `end` letter repeated forever.
//! Atoms are false on `end` and the temporal operators only look at real
//! positions, so `X` is the strong next: it fails at the last action of a
//! finite trace.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{CcsAtom, CcsGraph, CcsLabel, Polarity};
use crate::terms::{Ident, Substitutable};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ltl {
    True,
    False,
    Atom(CcsAtom),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Eventually(Box<Ltl>),
    Always(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
}

/// Which traces the entailment quantifies over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceSemantics {
    /// Infinite traces plus maximal finite ones.
    #[default]
    Maximal,
    /// Infinite traces only; finite maximal traces are ignored.
    InfiniteOnly,
}

impl Ltl {
    pub fn atom(a: CcsAtom) -> Self {
        Ltl::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Ltl) -> Self {
        Ltl::Not(Box::new(f))
    }

    pub fn and(a: Ltl, b: Ltl) -> Self {
        Ltl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Ltl, b: Ltl) -> Self {
        Ltl::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Ltl) -> Self {
        Ltl::Next(Box::new(f))
    }

    pub fn eventually(f: Ltl) -> Self {
        Ltl::Eventually(Box::new(f))
    }

    pub fn always(f: Ltl) -> Self {
        Ltl::Always(Box::new(f))
    }

    pub fn until(a: Ltl, b: Ltl) -> Self {
        Ltl::Until(Box::new(a), Box::new(b))
    }

    fn prec(&self) -> u8 {
        match self {
            Ltl::Or(..) => 0,
            Ltl::And(..) => 1,
            Ltl::Until(..) => 2,
            _ => 3,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Ltl::True => write!(f, "true"),
            Ltl::False => write!(f, "false"),
            Ltl::Atom(a) => write!(f, "{a}"),
            Ltl::Not(g) => {
                write!(f, "!")?;
                g.fmt_at(f, 3)
            }
            Ltl::Next(g) => {
                write!(f, "X ")?;
                g.fmt_at(f, 3)
            }
            Ltl::Eventually(g) => {
                write!(f, "<>")?;
                g.fmt_at(f, 3)
            }
            Ltl::Always(g) => {
                write!(f, "[]")?;
                g.fmt_at(f, 3)
            }
            Ltl::And(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " /\\ ")?;
                b.fmt_at(f, 2)
            }
            Ltl::Or(a, b) => {
                a.fmt_at(f, 0)?;
                write!(f, " \\/ ")?;
                b.fmt_at(f, 1)
            }
            Ltl::Until(a, b) => {
                a.fmt_at(f, 3)?;
                write!(f, " U ")?;
                b.fmt_at(f, 2)
            }
        }
    }
}

impl fmt::Display for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

// LTL formulas never mention principals or sessions.
impl Substitutable for Ltl {
    fn visit_free(&self, _f: &mut dyn FnMut(&Ident)) {}

    fn rename(&self, _map: &BTreeMap<Ident, Ident>) -> Self {
        self.clone()
    }
}

/// Does `atom` hold on a step labelled `label` (`None` is the `end` letter)?
pub fn atom_holds(atom: &CcsAtom, label: Option<&CcsLabel>) -> bool {
    let Some(l) = label else { return false };
    match atom.polarity {
        Polarity::Auto => l.arity() == 1 && l.entries()[0].1 == *atom,
        Polarity::Input | Polarity::Output => {
            l.arity() == 2 && l.entries().iter().all(|(_, a)| a.name == atom.name)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Prop {
    Atom(CcsAtom),
    End,
}

impl Prop {
    fn holds(&self, label: Option<&CcsLabel>) -> bool {
        match self {
            Prop::Atom(a) => atom_holds(a, label),
            Prop::End => label.is_none(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Nnf {
    True,
    False,
    Lit(Prop, bool),
    And(Box<Nnf>, Box<Nnf>),
    Or(Box<Nnf>, Box<Nnf>),
    Next(Box<Nnf>),
    Until(Box<Nnf>, Box<Nnf>),
    Release(Box<Nnf>, Box<Nnf>),
}

fn nnf(f: &Ltl, pos: bool) -> Nnf {
    use Nnf as N;
    let b = Box::new;
    match f {
        Ltl::True if pos => N::True,
        Ltl::True => N::False,
        Ltl::False if pos => N::False,
        Ltl::False => N::True,
        Ltl::Atom(a) => N::Lit(Prop::Atom(a.clone()), pos),
        Ltl::Not(g) => nnf(g, !pos),
        Ltl::And(x, y) if pos => N::And(b(nnf(x, true)), b(nnf(y, true))),
        Ltl::And(x, y) => N::Or(b(nnf(x, false)), b(nnf(y, false))),
        Ltl::Or(x, y) if pos => N::Or(b(nnf(x, true)), b(nnf(y, true))),
        Ltl::Or(x, y) => N::And(b(nnf(x, false)), b(nnf(y, false))),
        // Temporal operators only range over real (non-`end`) positions.
        Ltl::Next(g) if pos => N::Next(b(real(nnf(g, true)))),
        Ltl::Next(g) => N::Next(b(padded(nnf(g, false)))),
        Ltl::Eventually(g) if pos => N::Until(b(N::True), b(real(nnf(g, true)))),
        Ltl::Eventually(g) => N::Release(b(N::False), b(padded(nnf(g, false)))),
        Ltl::Always(g) if pos => N::Release(b(N::False), b(padded(nnf(g, true)))),
        Ltl::Always(g) => N::Until(b(N::True), b(real(nnf(g, false)))),
        Ltl::Until(x, y) if pos => N::Until(b(nnf(x, true)), b(real(nnf(y, true)))),
        Ltl::Until(x, y) => N::Release(b(nnf(x, false)), b(padded(nnf(y, false)))),
    }
}

fn real(f: Nnf) -> Nnf {
    Nnf::And(Box::new(Nnf::Lit(Prop::End, false)), Box::new(f))
}

fn padded(f: Nnf) -> Nnf {
    Nnf::Or(Box::new(Nnf::Lit(Prop::End, true)), Box::new(f))
}

fn untils(f: &Nnf, out: &mut BTreeSet<Nnf>) {
    match f {
        Nnf::True | Nnf::False | Nnf::Lit(..) => {}
        Nnf::And(a, b) | Nnf::Or(a, b) | Nnf::Release(a, b) => {
            untils(a, out);
            untils(b, out);
        }
        Nnf::Until(a, b) => {
            out.insert(f.clone());
            untils(a, out);
            untils(b, out);
        }
        Nnf::Next(a) => untils(a, out),
    }
}

const INIT: usize = usize::MAX;

struct Node {
    incoming: BTreeSet<usize>,
    old: BTreeSet<Nnf>,
    next: BTreeSet<Nnf>,
}

struct Pending {
    incoming: BTreeSet<usize>,
    new: BTreeSet<Nnf>,
    old: BTreeSet<Nnf>,
    next: BTreeSet<Nnf>,
}

/// Generalised Büchi automaton produced by the tableau construction.
struct Automaton {
    lits: Vec<Vec<(Prop, bool)>>,
    succ: Vec<Vec<usize>>,
    initial: Vec<usize>,
    accepting: Vec<Vec<bool>>,
}

fn tableau(phi: Nnf) -> Automaton {
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack = vec![Pending {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([phi.clone()]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];
    while let Some(mut nd) = stack.pop() {
        let Some(eta) = nd.new.pop_first() else {
            if let Some(n) = nodes.iter_mut().find(|n| n.old == nd.old && n.next == nd.next) {
                n.incoming.extend(nd.incoming);
                continue;
            }
            let id = nodes.len();
            stack.push(Pending {
                incoming: BTreeSet::from([id]),
                new: nd.next.clone(),
                old: BTreeSet::new(),
                next: BTreeSet::new(),
            });
            nodes.push(Node {
                incoming: nd.incoming,
                old: nd.old,
                next: nd.next,
            });
            continue;
        };
        if nd.old.contains(&eta) {
            stack.push(nd);
            continue;
        }
        match &eta {
            Nnf::False => {}
            Nnf::True => {
                nd.old.insert(eta);
                stack.push(nd);
            }
            Nnf::Lit(p, v) => {
                if !nd.old.contains(&Nnf::Lit(p.clone(), !v)) {
                    nd.old.insert(eta);
                    stack.push(nd);
                }
            }
            Nnf::And(a, b) => {
                for g in [a, b] {
                    if !nd.old.contains(g) {
                        nd.new.insert((**g).clone());
                    }
                }
                nd.old.insert(eta);
                stack.push(nd);
            }
            Nnf::Next(a) => {
                nd.next.insert((**a).clone());
                nd.old.insert(eta);
                stack.push(nd);
            }
            Nnf::Or(a, b) | Nnf::Until(a, b) | Nnf::Release(a, b) => {
                // (new1, next1) and new2 for the two branches
                let (new1, next1, new2): (Vec<&Nnf>, Option<Nnf>, Vec<&Nnf>) = match &eta {
                    Nnf::Or(..) => (vec![a], None, vec![b]),
                    Nnf::Until(..) => (vec![a], Some(eta.clone()), vec![b]),
                    _ => (vec![b], Some(eta.clone()), vec![a, b]),
                };
                let mut n1 = Pending {
                    incoming: nd.incoming.clone(),
                    new: nd.new.clone(),
                    old: nd.old.clone(),
                    next: nd.next.clone(),
                };
                for g in new1 {
                    if !n1.old.contains(g) {
                        n1.new.insert(g.clone());
                    }
                }
                n1.next.extend(next1);
                n1.old.insert(eta.clone());
                let mut n2 = nd;
                for g in new2 {
                    if !n2.old.contains(g) {
                        n2.new.insert(g.clone());
                    }
                }
                n2.old.insert(eta);
                stack.push(n2);
                stack.push(n1);
            }
        }
    }

    let mut us = BTreeSet::new();
    untils(&phi, &mut us);
    let n = nodes.len();
    let mut succ = vec![Vec::new(); n];
    let mut initial = Vec::new();
    for (j, node) in nodes.iter().enumerate() {
        for &i in &node.incoming {
            if i == INIT {
                initial.push(j);
            } else {
                succ[i].push(j);
            }
        }
    }
    let accepting = us
        .iter()
        .map(|u| {
            let Nnf::Until(_, b) = u else { unreachable!() };
            nodes
                .iter()
                .map(|nd| !nd.old.contains(u) || nd.old.contains(b))
                .collect()
        })
        .collect();
    let lits = nodes
        .iter()
        .map(|nd| {
            nd.old
                .iter()
                .filter_map(|f| match f {
                    Nnf::Lit(p, v) => Some((p.clone(), *v)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Automaton {
        lits,
        succ,
        initial,
        accepting,
    }
}

/// Letters leaving a graph state: its labelled edges, plus an `end`
/// self-loop at deadlocks under maximal-trace semantics.
fn letters(g: &CcsGraph, s: usize, sem: TraceSemantics) -> Vec<(Option<&CcsLabel>, usize)> {
    let mut v: Vec<_> = g.edges[s].iter().map(|(l, t)| (Some(l), *t)).collect();
    if v.is_empty() && sem == TraceSemantics::Maximal {
        v.push((None, s));
    }
    v
}

/// Is there a trace of `g` accepted by the automaton?
fn nonempty(g: &CcsGraph, aut: &Automaton, sem: TraceSemantics) -> bool {
    // Product state (graph state, automaton node, letter index): the node's
    // literals constrain the letter read from the graph state.
    type P = (usize, usize, usize);
    let mut index: HashMap<P, usize> = HashMap::new();
    let mut states: Vec<P> = Vec::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let ok = |s: usize, n: usize, li: usize| {
        let letter = letters(g, s, sem)[li].0;
        aut.lits[n].iter().all(|(p, v)| p.holds(letter) == *v)
    };
    let push = |p: P, index: &mut HashMap<P, usize>, states: &mut Vec<P>, adj: &mut Vec<Vec<usize>>| {
        *index.entry(p).or_insert_with(|| {
            states.push(p);
            adj.push(Vec::new());
            states.len() - 1
        })
    };
    if g.is_empty() {
        return false;
    }
    for &n in &aut.initial {
        for li in 0..letters(g, 0, sem).len() {
            if ok(0, n, li) {
                push((0, n, li), &mut index, &mut states, &mut adj);
            }
        }
    }
    let mut i = 0;
    while i < states.len() {
        let (s, n, li) = states[i];
        let t = letters(g, s, sem)[li].1;
        let nl = letters(g, t, sem).len();
        for &m in &aut.succ[n] {
            for lj in 0..nl {
                if ok(t, m, lj) {
                    let j = push((t, m, lj), &mut index, &mut states, &mut adj);
                    adj[i].push(j);
                }
            }
        }
        i += 1;
    }
    for comp in tarjan(&adj) {
        let nontrivial = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
        if !nontrivial {
            continue;
        }
        let all = aut
            .accepting
            .iter()
            .all(|f| comp.iter().any(|&p| f[states[p].1]));
        if all {
            return true;
        }
    }
    false
}

/// Strongly connected components (iterative Tarjan).
pub(crate) fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on[root] = true;
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if *ei < adj[v].len() {
                let w = adj[v][*ei];
                *ei += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on[w] = true;
                    call.push((w, 0));
                } else if on[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Does every trace of `g` satisfy `phi`?
pub fn entails(g: &CcsGraph, phi: &Ltl, sem: TraceSemantics) -> bool {
    let aut = tableau(nnf(phi, false));
    !nonempty(g, &aut, sem)
}
