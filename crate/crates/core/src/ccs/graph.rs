use std::collections::{HashMap, VecDeque};

use super::{ccs_step, Ccs, CcsError, CcsLabel, Definitions};

/// The reachable transition graph of a contract. State 0 is the initial one.
#[derive(Clone, Debug)]
pub struct CcsGraph {
    pub states: Vec<Ccs>,
    pub edges: Vec<Vec<(CcsLabel, usize)>>,
}

impl CcsGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_deadlock(&self, s: usize) -> bool {
        self.edges[s].is_empty()
    }

    pub fn find(&self, c: &Ccs) -> Option<usize> {
        let c = c.canonical();
        self.states.iter().position(|s| *s == c)
    }

    /// Shortest label sequence from the initial state to `target`.
    pub fn path_to(&self, target: usize) -> Option<Vec<CcsLabel>> {
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.len()];
        let mut seen = vec![false; self.len()];
        seen[0] = true;
        let mut q = VecDeque::from([0]);
        while let Some(s) = q.pop_front() {
            if s == target {
                let mut path = Vec::new();
                let mut cur = s;
                while let Some((p, e)) = prev[cur] {
                    path.push(self.edges[p][e].0.clone());
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for (e, (_, t)) in self.edges[s].iter().enumerate() {
                if !seen[*t] {
                    seen[*t] = true;
                    prev[*t] = Some((s, e));
                    q.push_back(*t);
                }
            }
        }
        None
    }
}

/// Breadth-first exploration of the states reachable from `c`; fails once
/// more than `cap` states have been discovered.
pub fn reachable(defs: &Definitions, c: &Ccs, cap: usize) -> Result<CcsGraph, CcsError> {
    defs.check_term(c)?;
    let init = c.canonical();
    let mut index: HashMap<Ccs, usize> = HashMap::from([(init.clone(), 0)]);
    let mut g = CcsGraph {
        states: vec![init],
        edges: vec![Vec::new()],
    };
    let mut next = 0;
    while next < g.states.len() {
        let succ = ccs_step(defs, &g.states[next])?;
        let mut out = Vec::with_capacity(succ.len());
        for (l, k) in succ {
            let id = match index.get(&k) {
                Some(&id) => id,
                None => {
                    let id = g.states.len();
                    if id >= cap {
                        return Err(CcsError::CapExceeded { cap });
                    }
                    index.insert(k.clone(), id);
                    g.states.push(k);
                    g.edges.push(Vec::new());
                    id
                }
            };
            out.push((l, id));
        }
        g.edges[next] = out;
        next += 1;
    }
    Ok(g)
}
