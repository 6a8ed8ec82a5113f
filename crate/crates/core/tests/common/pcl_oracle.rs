//! Brute-force derivability for clause sets of the shape
//! `P says ((Q1 says a1) /\ .. -> h1 /\ ..)`, `-->>` likewise, and facts
//! `P says h`. The set of contractual clauses taken as justified is found by
//! trying every subset and keeping the self-supporting ones.

use std::collections::BTreeSet;

use co2::pcl::Pcl;
use co2::Ident;
use rand::seq::SliceRandom;
use rand::Rng;

pub type Tagged = (String, String);

#[derive(Clone, Debug)]
pub struct OClause {
    pub sayer: String,
    pub contractual: bool,
    /// Empty for a plain assertion of the heads.
    pub premises: Vec<Tagged>,
    pub heads: Vec<String>,
}

impl OClause {
    pub fn to_pcl(&self) -> Pcl {
        let heads = Pcl::conj(self.heads.iter().map(|h| Pcl::atom(h)));
        let body = if self.premises.is_empty() {
            heads
        } else {
            let prem = Pcl::conj(self.premises.iter().map(|(q, a)| Pcl::says(Ident::principal(q), Pcl::atom(a))));
            if self.contractual {
                Pcl::cimp(prem, heads)
            } else {
                Pcl::imp(prem, heads)
            }
        };
        Pcl::says(Ident::principal(&self.sayer), body)
    }

    fn tagged_heads(&self) -> impl Iterator<Item = Tagged> + '_ {
        self.heads.iter().map(|h| (self.sayer.clone(), h.clone()))
    }
}

/// Least set closed under the plain clauses, with the heads of the
/// contractual clauses in `assumed` given outright.
fn closure(clauses: &[OClause], assumed: &[usize]) -> BTreeSet<Tagged> {
    let mut out: BTreeSet<Tagged> = BTreeSet::new();
    for (i, c) in clauses.iter().enumerate() {
        if (!c.contractual && c.premises.is_empty()) || assumed.contains(&i) {
            out.extend(c.tagged_heads());
        }
    }
    loop {
        let before = out.len();
        for c in clauses {
            if !c.contractual && !c.premises.is_empty() && c.premises.iter().all(|p| out.contains(p)) {
                out.extend(c.tagged_heads());
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

pub fn derivable(clauses: &[OClause]) -> BTreeSet<Tagged> {
    let cimps: Vec<usize> = (0..clauses.len()).filter(|&i| clauses[i].contractual).collect();
    let mut out = closure(clauses, &[]);
    for mask in 1u32..(1 << cimps.len()) {
        let w: Vec<usize> = cimps.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, &i)| i).collect();
        let c = closure(clauses, &w);
        if w.iter().all(|&i| clauses[i].premises.iter().all(|p| c.contains(p))) {
            out.extend(c);
        }
    }
    out
}

pub const PRINCIPALS: [&str; 3] = ["A", "B", "C"];
pub const ATOMS: [&str; 4] = ["a", "b", "c", "d"];

pub fn random_clauses<R: Rng>(rng: &mut R, max: usize) -> Vec<OClause> {
    let n = rng.gen_range(1..=max);
    let pick_p = |rng: &mut R| PRINCIPALS.choose(rng).unwrap().to_string();
    let pick_a = |rng: &mut R| ATOMS.choose(rng).unwrap().to_string();
    (0..n)
        .map(|_| {
            let sayer = pick_p(rng);
            let kind = rng.gen_range(0..3);
            let premises = if kind == 0 {
                Vec::new()
            } else {
                (0..rng.gen_range(1..=2)).map(|_| (pick_p(rng), pick_a(rng))).collect()
            };
            let heads = (0..rng.gen_range(1..=2)).map(|_| pick_a(rng)).collect();
            OClause {
                sayer,
                contractual: kind == 2,
                premises,
                heads,
            }
        })
        .collect()
}
