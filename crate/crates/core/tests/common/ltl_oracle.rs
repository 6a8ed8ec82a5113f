//! Trace-enumeration reference for LTL entailment on explicit graphs. Every
//! path from the initial state that visits no state more than twice is
//! enumerated; each way of closing it into a lasso, and each path ending in a
//! deadlock, is evaluated directly.

use co2::ccs::{CcsAtom, CcsGraph, CcsLabel, Ccs, Ltl, Polarity};
use co2::{ActionLabel, Ident};
use rand::Rng;

/// `true` on the end letter that pads a finite trace.
fn label_holds(atom: &CcsAtom, label: &CcsLabel) -> bool {
    let e = label.entries();
    match atom.polarity {
        Polarity::Auto => e.len() == 1 && e[0].1.name == atom.name && e[0].1.polarity == Polarity::Auto,
        _ => e.len() == 2 && e[0].1.name == atom.name && e[1].1.name == atom.name,
    }
}

/// Value of `phi` at the end letter: nothing happens there any more.
fn at_end(phi: &Ltl) -> bool {
    match phi {
        Ltl::True | Ltl::Always(_) => true,
        Ltl::False | Ltl::Atom(_) | Ltl::Next(_) | Ltl::Eventually(_) | Ltl::Until(..) => false,
        Ltl::Not(f) => !at_end(f),
        Ltl::And(a, b) => at_end(a) && at_end(b),
        Ltl::Or(a, b) => at_end(a) || at_end(b),
    }
}

/// Truth of `phi` at each position of a finite trace.
pub fn eval_finite(phi: &Ltl, w: &[&CcsLabel]) -> Vec<bool> {
    let k = w.len();
    match phi {
        Ltl::True => vec![true; k],
        Ltl::False => vec![false; k],
        Ltl::Atom(a) => w.iter().map(|l| label_holds(a, l)).collect(),
        Ltl::Not(f) => eval_finite(f, w).into_iter().map(|b| !b).collect(),
        Ltl::And(a, b) => eval_finite(a, w).into_iter().zip(eval_finite(b, w)).map(|(x, y)| x && y).collect(),
        Ltl::Or(a, b) => eval_finite(a, w).into_iter().zip(eval_finite(b, w)).map(|(x, y)| x || y).collect(),
        Ltl::Next(f) => {
            let v = eval_finite(f, w);
            (0..k).map(|i| i + 1 < k && v[i + 1]).collect()
        }
        Ltl::Eventually(f) => {
            let v = eval_finite(f, w);
            (0..k).map(|i| v[i..].iter().any(|&b| b)).collect()
        }
        Ltl::Always(f) => {
            let v = eval_finite(f, w);
            (0..k).map(|i| v[i..].iter().all(|&b| b)).collect()
        }
        Ltl::Until(a, b) => {
            let (va, vb) = (eval_finite(a, w), eval_finite(b, w));
            (0..k).map(|i| (i..k).any(|j| vb[j] && (i..j).all(|l| va[l]))).collect()
        }
    }
}

/// Truth of `phi` at each position of the lasso `w[..p] (w[p..])^ω`.
pub fn eval_lasso(phi: &Ltl, w: &[&CcsLabel], p: usize) -> Vec<bool> {
    let n = w.len();
    let succ = |i: usize| if i + 1 < n { i + 1 } else { p };
    let until = |va: &[bool], vb: &[bool]| {
        let mut v = vec![false; n];
        loop {
            let mut changed = false;
            for i in (0..n).rev() {
                let x = vb[i] || (va[i] && v[succ(i)]);
                if x != v[i] {
                    v[i] = x;
                    changed = true;
                }
            }
            if !changed {
                return v;
            }
        }
    };
    match phi {
        Ltl::True => vec![true; n],
        Ltl::False => vec![false; n],
        Ltl::Atom(a) => w.iter().map(|l| label_holds(a, l)).collect(),
        Ltl::Not(f) => eval_lasso(f, w, p).into_iter().map(|b| !b).collect(),
        Ltl::And(a, b) => eval_lasso(a, w, p).into_iter().zip(eval_lasso(b, w, p)).map(|(x, y)| x && y).collect(),
        Ltl::Or(a, b) => eval_lasso(a, w, p).into_iter().zip(eval_lasso(b, w, p)).map(|(x, y)| x || y).collect(),
        Ltl::Next(f) => {
            let v = eval_lasso(f, w, p);
            (0..n).map(|i| v[succ(i)]).collect()
        }
        Ltl::Eventually(f) => until(&vec![true; n], &eval_lasso(f, w, p)),
        Ltl::Always(f) => {
            let neg: Vec<bool> = eval_lasso(f, w, p).into_iter().map(|b| !b).collect();
            until(&vec![true; n], &neg).into_iter().map(|b| !b).collect()
        }
        Ltl::Until(a, b) => until(&eval_lasso(a, w, p), &eval_lasso(b, w, p)),
    }
}

/// Does every enumerated trace satisfy `phi`? `finite` says whether maximal
/// finite traces count.
pub fn entails(g: &CcsGraph, phi: &Ltl, finite: bool) -> bool {
    struct Walk<'a> {
        g: &'a CcsGraph,
        phi: &'a Ltl,
        finite: bool,
        states: Vec<usize>,
        labels: Vec<&'a CcsLabel>,
        visits: Vec<u8>,
    }
    impl<'a> Walk<'a> {
        fn ok(&mut self) -> bool {
            let s = *self.states.last().unwrap();
            if self.g.edges[s].is_empty() && self.finite {
                let good = if self.labels.is_empty() {
                    at_end(self.phi)
                } else {
                    eval_finite(self.phi, &self.labels)[0]
                };
                if !good {
                    return false;
                }
            }
            for (l, t) in &self.g.edges[s] {
                self.labels.push(l);
                for j in 0..self.states.len() {
                    if self.states[j] == *t && !eval_lasso(self.phi, &self.labels, j)[0] {
                        return false;
                    }
                }
                if self.visits[*t] < 2 {
                    self.visits[*t] += 1;
                    self.states.push(*t);
                    let r = self.ok();
                    self.states.pop();
                    self.visits[*t] -= 1;
                    if !r {
                        return false;
                    }
                }
                self.labels.pop();
            }
            true
        }
    }
    let mut visits = vec![0u8; g.len()];
    visits[0] = 1;
    Walk {
        g,
        phi,
        finite,
        states: vec![0],
        labels: Vec::new(),
        visits,
    }
    .ok()
}

fn label(atom: usize, sync: bool) -> CcsLabel {
    let names = ["a", "b", "c"];
    let n = names[atom];
    let entries = if sync {
        vec![(Ident::principal("A"), CcsAtom::input(n)), (Ident::principal("B"), CcsAtom::output(n))]
    } else {
        vec![(Ident::principal("A"), CcsAtom::auto(n))]
    };
    ActionLabel::new(entries).unwrap()
}

/// A sparse random graph with at most `max_states` states, all reachable
/// from state 0.
pub fn random_graph<R: Rng>(rng: &mut R, max_states: usize) -> CcsGraph {
    let n = rng.gen_range(1..=max_states);
    let mut edges: Vec<Vec<(CcsLabel, usize)>> = vec![Vec::new(); n];
    // a spanning tree keeps every state reachable
    for s in 1..n {
        let from = rng.gen_range(0..s);
        edges[from].push((label(rng.gen_range(0..3), rng.gen_bool(0.4)), s));
    }
    for out in edges.iter_mut() {
        if out.len() < 2 && rng.gen_bool(0.5) {
            let t = rng.gen_range(0..n);
            out.push((label(rng.gen_range(0..3), rng.gen_bool(0.4)), t));
        }
    }
    CcsGraph {
        states: vec![Ccs::zero(); n],
        edges,
    }
}

pub fn random_ltl<R: Rng>(rng: &mut R, depth: u32) -> Ltl {
    let leaf = |rng: &mut R| match rng.gen_range(0..6) {
        0 => Ltl::True,
        1 => Ltl::atom(CcsAtom::auto("a")),
        2 => Ltl::atom(CcsAtom::auto("b")),
        3 => Ltl::atom(CcsAtom::output("c")),
        4 => Ltl::atom(CcsAtom::input("a")),
        _ => Ltl::atom(CcsAtom::auto("c")),
    };
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng);
    }
    let d = depth - 1;
    match rng.gen_range(0..8) {
        0 => Ltl::not(random_ltl(rng, d)),
        1 => Ltl::and(random_ltl(rng, d), random_ltl(rng, d)),
        2 => Ltl::or(random_ltl(rng, d), random_ltl(rng, d)),
        3 => Ltl::next(random_ltl(rng, d)),
        4 => Ltl::eventually(random_ltl(rng, d)),
        5 => Ltl::always(random_ltl(rng, d)),
        _ => Ltl::until(random_ltl(rng, d), random_ltl(rng, d)),
    }
}
