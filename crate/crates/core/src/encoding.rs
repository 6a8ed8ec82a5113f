//! Translation of the implication fragment of the contract logic into
//! CCS contracts, and checkers relating the two models on it.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ccs::{ccs_fulfilled, reachable, Ccs, CcsAtom, CcsError, CcsLabel, Definitions};
use crate::exec::Exec;
use crate::pcl::{pcl_entails, pcl_fulfilled, pcl_step, Pcl, PclError};
use crate::terms::{Ident, IdentKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("formula outside the encodable fragment: {0}")]
    Fragment(String),
    #[error(transparent)]
    Ccs(#[from] CcsError),
    #[error(transparent)]
    Pcl(#[from] PclError),
    #[error("label universe of {0} actions is too large to enumerate")]
    TooManyActions(usize),
}

/// The body of one conjunct `A says α`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Alpha {
    Atoms(Vec<Arc<str>>),
    Imp {
        premises: Vec<(Ident, Arc<str>)>,
        heads: Vec<Arc<str>>,
    },
    CImp {
        premises: Vec<(Ident, Arc<str>)>,
        heads: Vec<Arc<str>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Conjunct {
    pub principal: Ident,
    pub alpha: Alpha,
}

/// A formula `∧ᵢ Aᵢ says αᵢ` of the fragment.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PclMinus {
    pub conjuncts: Vec<Conjunct>,
}

fn fragment(f: &Pcl, why: &str) -> EncodingError {
    EncodingError::Fragment(format!("{why}: `{f}`"))
}

fn atoms_of(f: &Pcl, out: &mut Vec<Arc<str>>) -> Result<(), EncodingError> {
    match f {
        Pcl::True => Ok(()),
        Pcl::Atom(a) if !a.fact => {
            out.push(a.name.clone());
            Ok(())
        }
        Pcl::And(x, y) => {
            atoms_of(x, out)?;
            atoms_of(y, out)
        }
        _ => Err(fragment(f, "expected a conjunction of atoms")),
    }
}

fn premises_of(f: &Pcl, out: &mut Vec<(Ident, Arc<str>)>) -> Result<(), EncodingError> {
    match f {
        Pcl::Says(p, body) if p.kind() == IdentKind::PrincipalName => match &**body {
            Pcl::Atom(a) if !a.fact => {
                out.push((p.clone(), a.name.clone()));
                Ok(())
            }
            _ => Err(fragment(f, "premise must be `B says p`")),
        },
        Pcl::And(x, y) => {
            premises_of(x, out)?;
            premises_of(y, out)
        }
        _ => Err(fragment(f, "premise must be a conjunction of `B says p`")),
    }
}

fn tagged(q: &str, p: &Ident) -> String {
    format!("{q}/{p}")
}

fn out_call(q: &str, p: &Ident) -> Ccs {
    Ccs::call(&format!("OUT_{}", tagged(q, p)))
}

impl PclMinus {
    pub fn from_formula(f: &Pcl) -> Result<Self, EncodingError> {
        let mut conjuncts = Vec::new();
        for c in f.conjuncts() {
            let Pcl::Says(p, body) = c else {
                return Err(fragment(c, "conjunct must be `A says α`"));
            };
            if p.kind() != IdentKind::PrincipalName {
                return Err(fragment(c, "sayer must be a principal name"));
            }
            let alpha = match &**body {
                Pcl::Imp(x, y) | Pcl::CImp(x, y) => {
                    let mut premises = Vec::new();
                    premises_of(x, &mut premises)?;
                    let mut heads = Vec::new();
                    atoms_of(y, &mut heads)?;
                    if matches!(**body, Pcl::Imp(..)) {
                        Alpha::Imp { premises, heads }
                    } else {
                        Alpha::CImp { premises, heads }
                    }
                }
                b => {
                    let mut atoms = Vec::new();
                    atoms_of(b, &mut atoms)?;
                    Alpha::Atoms(atoms)
                }
            };
            conjuncts.push(Conjunct {
                principal: p.clone(),
                alpha,
            });
        }
        Ok(PclMinus { conjuncts })
    }

    pub fn to_formula(&self) -> Pcl {
        let atoms = |v: &[Arc<str>]| Pcl::conj(v.iter().map(|a| Pcl::atom(a)));
        let prems = |v: &[(Ident, Arc<str>)]| {
            Pcl::conj(v.iter().map(|(p, a)| Pcl::says(p.clone(), Pcl::atom(a))))
        };
        Pcl::conj(self.conjuncts.iter().map(|c| {
            let body = match &c.alpha {
                Alpha::Atoms(v) => atoms(v),
                Alpha::Imp { premises, heads } => Pcl::imp(prems(premises), atoms(heads)),
                Alpha::CImp { premises, heads } => Pcl::cimp(prems(premises), atoms(heads)),
            };
            Pcl::says(c.principal.clone(), body)
        }))
    }

    /// Sayers of the conjuncts together with the principals quoted in premises.
    pub fn principals(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        for c in &self.conjuncts {
            out.insert(c.principal.clone());
            if let Alpha::Imp { premises, .. } | Alpha::CImp { premises, .. } = &c.alpha {
                out.extend(premises.iter().map(|(p, _)| p.clone()));
            }
        }
        out
    }

    /// A representative that identifies formulas with the same encoding:
    /// conjuncts sorted, atom conjunctions split, heads sorted. Premise order
    /// is kept because it fixes the order of the input chain.
    pub fn canonical(&self) -> PclMinus {
        let mut conjuncts = Vec::new();
        for c in &self.conjuncts {
            match &c.alpha {
                Alpha::Atoms(v) => conjuncts.extend(v.iter().map(|a| Conjunct {
                    principal: c.principal.clone(),
                    alpha: Alpha::Atoms(vec![a.clone()]),
                })),
                Alpha::Imp { premises, heads } => {
                    let mut heads = heads.clone();
                    heads.sort();
                    conjuncts.push(Conjunct {
                        principal: c.principal.clone(),
                        alpha: Alpha::Imp {
                            premises: premises.clone(),
                            heads,
                        },
                    })
                }
                Alpha::CImp { premises, heads } => {
                    let mut heads = heads.clone();
                    heads.sort();
                    conjuncts.push(Conjunct {
                        principal: c.principal.clone(),
                        alpha: Alpha::CImp {
                            premises: premises.clone(),
                            heads,
                        },
                    })
                }
            }
        }
        conjuncts.sort();
        PclMinus { conjuncts }
    }
}

impl fmt::Display for PclMinus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

/// Latent actions: each head atom tagged with the clause's sayer and each
/// premise atom tagged with the premise's sayer.
pub fn latent_actions(c: &PclMinus) -> BTreeSet<(Ident, Arc<str>)> {
    let mut out = BTreeSet::new();
    for k in &c.conjuncts {
        let heads = match &k.alpha {
            Alpha::Atoms(v) => v,
            Alpha::Imp { premises, heads } | Alpha::CImp { premises, heads } => {
                out.extend(premises.iter().cloned());
                heads
            }
        };
        out.extend(heads.iter().map(|q| (k.principal.clone(), q.clone())));
    }
    out
}

/// `∧ A says a` over the latent actions.
pub fn latent_formula(c: &PclMinus) -> Pcl {
    Pcl::conj(
        latent_actions(c)
            .into_iter()
            .map(|(p, a)| Pcl::says(p, Pcl::atom(&a))),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub contract: Ccs,
    pub defs: Definitions,
}

/// The CCS contract of a fragment formula. Every head `q` of principal `A`
/// becomes `OUT_q/A = tau^ + q/A!.OUT_q/A`; premises `B says p` become inputs
/// `p/B?`.
pub fn encode(c: &PclMinus) -> Encoded {
    let mut defs = Definitions::new();
    let mut outs = |heads: &[Arc<str>], p: &Ident| -> Ccs {
        let v: Vec<Ccs> = heads
            .iter()
            .map(|q| {
                let t = tagged(q, p);
                let name = format!("OUT_{t}");
                defs.insert(
                    &name,
                    Ccs::Sum(vec![
                        (CcsAtom::tau(), Ccs::zero()),
                        (CcsAtom::output(&t), Ccs::call(&name)),
                    ]),
                );
                out_call(q, p)
            })
            .collect();
        if v.len() == 1 {
            v.into_iter().next().unwrap()
        } else {
            Ccs::par(v)
        }
    };
    let chain = |premises: &[(Ident, Arc<str>)], tail: Ccs| {
        premises
            .iter()
            .rev()
            .fold(tail, |k, (b, p)| Ccs::prefix(CcsAtom::input(&tagged(p, b)), k))
    };
    let mut factors = Vec::new();
    for k in &c.conjuncts {
        let body = match &k.alpha {
            Alpha::Atoms(v) => outs(v, &k.principal),
            Alpha::Imp { premises, heads } => chain(premises, outs(heads, &k.principal)),
            Alpha::CImp { premises, heads } => {
                Ccs::par(vec![outs(heads, &k.principal), chain(premises, Ccs::zero())])
            }
        };
        factors.push(Ccs::says(k.principal.clone(), body));
    }
    Encoded {
        contract: Ccs::par(factors).canonical(),
        defs,
    }
}

/// Outcome of checking one side-by-side equivalence on one formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TheoremCheck {
    pub lhs: bool,
    pub rhs: bool,
    /// Labels of a run of the encoding reaching the target, when one exists.
    pub witness: Option<Vec<CcsLabel>>,
    /// For the run-based side: a set of fired actions after which every
    /// principal is fulfilled but some latent action is missing.
    pub counterexample: Option<Vec<(Ident, Arc<str>)>>,
}

impl TheoremCheck {
    pub fn agrees(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// `c ⊢ λ(c)` against reachability of `0` from the encoding.
pub fn check_theorem2(c: &PclMinus, cap: usize) -> Result<TheoremCheck, EncodingError> {
    let lhs = pcl_entails(&[c.to_formula()], &latent_formula(c))?;
    let enc = encode(c);
    let g = reachable(&enc.defs, &enc.contract, cap)?;
    let witness = g.find(&Ccs::zero()).and_then(|z| g.path_to(z));
    Ok(TheoremCheck {
        lhs,
        rhs: witness.is_some(),
        witness,
        counterexample: None,
    })
}

/// Largest latent-action set the run-based side will enumerate.
pub const MAX_LATENT_ACTIONS: usize = 16;

/// Run-based equivalence. The left side enumerates every set of fired
/// actions drawn from the latent actions: the logic's transition system only
/// accumulates facts, so a run is determined by the set it fires, and an
/// action outside the latent set matches no premise and creates no
/// obligation, so it cannot change the verdict. The right side searches the
/// encoding for a state where every involved principal is fulfilled.
pub fn check_theorem1(c: &PclMinus, cap: usize) -> Result<TheoremCheck, EncodingError> {
    let lambda: Vec<(Ident, Arc<str>)> = latent_actions(c).into_iter().collect();
    if lambda.len() > MAX_LATENT_ACTIONS {
        return Err(EncodingError::TooManyActions(lambda.len()));
    }
    let principals = c.principals();
    let base = vec![c.to_formula()];
    let mut counterexample = None;
    for mask in 0u32..(1 << lambda.len()) {
        if mask == (1 << lambda.len()) - 1 {
            continue; // all latent actions fired: the implication holds
        }
        let mut env = base.clone();
        let mut fired = Vec::new();
        for (i, (p, a)) in lambda.iter().enumerate() {
            if mask & (1 << i) != 0 {
                env = pcl_step(&env, p, a);
                fired.push((p.clone(), a.clone()));
            }
        }
        let mut all = true;
        for p in &principals {
            if !pcl_fulfilled(&env, p)? {
                all = false;
                break;
            }
        }
        if all {
            counterexample = Some(fired);
            break;
        }
    }
    let enc = encode(c);
    let g = reachable(&enc.defs, &enc.contract, cap)?;
    let target = (0..g.len()).find(|&s| principals.iter().all(|p| ccs_fulfilled(&g.states[s], p)));
    let witness = target.and_then(|s| g.path_to(s));
    Ok(TheoremCheck {
        lhs: counterexample.is_none(),
        rhs: witness.is_some(),
        witness,
        counterexample,
    })
}

/// Shape of randomly generated fragment formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusParams {
    pub principals: usize,
    pub atoms: usize,
    pub max_conjuncts: usize,
    pub max_premises: usize,
    pub max_heads: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            principals: 3,
            atoms: 4,
            max_conjuncts: 4,
            max_premises: 2,
            max_heads: 2,
        }
    }
}

const PRINCIPALS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];
const ATOMS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

pub fn random_pcl_minus<R: Rng>(rng: &mut R, params: &CorpusParams) -> PclMinus {
    let principals: Vec<Ident> = PRINCIPALS[..params.principals.min(PRINCIPALS.len())]
        .iter()
        .map(|p| Ident::principal(p))
        .collect();
    let atoms: Vec<Arc<str>> = ATOMS[..params.atoms.min(ATOMS.len())]
        .iter()
        .map(|a| Arc::from(*a))
        .collect();
    let heads = |rng: &mut R| -> Vec<Arc<str>> {
        let n = rng.gen_range(1..=params.max_heads);
        (0..n).map(|_| atoms.choose(rng).unwrap().clone()).collect()
    };
    let n = rng.gen_range(1..=params.max_conjuncts);
    let conjuncts = (0..n)
        .map(|_| {
            let principal = principals.choose(rng).unwrap().clone();
            let alpha = match rng.gen_range(0..3) {
                0 => Alpha::Atoms(heads(rng)),
                k => {
                    let np = rng.gen_range(1..=params.max_premises);
                    let premises = (0..np)
                        .map(|_| {
                            (
                                principals.choose(rng).unwrap().clone(),
                                atoms.choose(rng).unwrap().clone(),
                            )
                        })
                        .collect();
                    let heads = heads(rng);
                    if k == 1 {
                        Alpha::Imp { premises, heads }
                    } else {
                        Alpha::CImp { premises, heads }
                    }
                }
            };
            Conjunct { principal, alpha }
        })
        .collect();
    PclMinus { conjuncts }
}

/// A seeded corpus of fragment formulas.
pub fn corpus(n: usize, seed: u64, params: &CorpusParams) -> Vec<PclMinus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_pcl_minus(&mut rng, params)).collect()
}

#[derive(Clone, Debug)]
pub struct InstanceReport {
    pub formula: PclMinus,
    pub theorem1: Result<TheoremCheck, EncodingError>,
    pub theorem2: Result<TheoremCheck, EncodingError>,
}

impl InstanceReport {
    pub fn agrees(&self) -> bool {
        matches!((&self.theorem1, &self.theorem2), (Ok(a), Ok(b)) if a.agrees() && b.agrees())
    }
}

/// State cap used for the encodings of generated formulas.
pub const CORPUS_STATE_CAP: usize = 1_000_000;

/// Checks both equivalences on every formula of a seeded corpus.
pub fn run_corpus(n: usize, seed: u64, cap: usize, exec: Exec) -> Vec<InstanceReport> {
    let formulas = corpus(n, seed, &CorpusParams::default());
    exec.map(&formulas, |f| InstanceReport {
        formula: f.clone(),
        theorem1: check_theorem1(f, cap),
        theorem2: check_theorem2(f, cap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Ident {
        Ident::principal(s)
    }

    fn parse(f: Pcl) -> PclMinus {
        PclMinus::from_formula(&f).unwrap()
    }

    fn row5() -> PclMinus {
        parse(Pcl::and(
            Pcl::says(p("A"), Pcl::cimp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a"))),
            Pcl::says(p("B"), Pcl::cimp(Pcl::says(p("A"), Pcl::atom("a")), Pcl::atom("b"))),
        ))
    }

    fn row2() -> PclMinus {
        parse(Pcl::and(
            Pcl::says(p("A"), Pcl::imp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a"))),
            Pcl::says(p("B"), Pcl::imp(Pcl::says(p("A"), Pcl::atom("a")), Pcl::atom("b"))),
        ))
    }

    #[test]
    fn encodings() {
        let e = encode(&parse(Pcl::says(p("B"), Pcl::atom("pay"))));
        assert_eq!(e.contract.to_string(), "B says OUT_pay/B");
        assert_eq!(
            e.defs.get("OUT_pay/B").unwrap().to_string(),
            "tau^ + pay/B!.OUT_pay/B"
        );
        let e = encode(&parse(Pcl::says(
            p("A"),
            Pcl::imp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a")),
        )));
        assert_eq!(e.contract.to_string(), "A says (b/B?.OUT_a/A)");
        let e = encode(&parse(Pcl::says(
            p("A"),
            Pcl::cimp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a")),
        )));
        assert_eq!(e.contract.to_string(), "A says (b/B?) | A says OUT_a/A");
    }

    #[test]
    fn latent_sets() {
        let l = latent_actions(&parse(Pcl::says(
            p("A"),
            Pcl::imp(Pcl::says(p("B"), Pcl::atom("b")), Pcl::atom("a")),
        )));
        assert_eq!(l, BTreeSet::from([(p("A"), Arc::from("a")), (p("B"), Arc::from("b"))]));
        assert!(latent_actions(&parse(Pcl::says(p("A"), Pcl::True))).is_empty());
        assert_eq!(latent_actions(&row5()).len(), 2);
    }

    #[test]
    fn table_rows() {
        let t = check_theorem2(&row5(), 1000).unwrap();
        assert_eq!((t.lhs, t.rhs), (true, true));
        let t = check_theorem2(&row2(), 1000).unwrap();
        assert_eq!((t.lhs, t.rhs), (false, false));
        let t = check_theorem1(&row5(), 1000).unwrap();
        assert_eq!((t.lhs, t.rhs), (true, true));
        let t = check_theorem1(&row2(), 1000).unwrap();
        assert!(t.agrees());
        let single = parse(Pcl::says(p("B"), Pcl::atom("pay")));
        let t = check_theorem2(&single, 1000).unwrap();
        assert_eq!((t.lhs, t.rhs), (true, true));
        let empty = PclMinus::default();
        let t = check_theorem1(&empty, 1000).unwrap();
        assert_eq!((t.lhs, t.rhs), (true, true));
    }

    #[test]
    fn fragment_is_enforced() {
        assert!(PclMinus::from_formula(&Pcl::atom("a")).is_err());
        assert!(PclMinus::from_formula(&Pcl::says(p("A"), Pcl::or(Pcl::atom("a"), Pcl::atom("b")))).is_err());
        assert!(PclMinus::from_formula(&Pcl::says(
            p("A"),
            Pcl::imp(Pcl::atom("b"), Pcl::atom("a"))
        ))
        .is_err());
    }

    #[test]
    fn round_trip_through_formula() {
        for f in corpus(50, 7, &CorpusParams::default()) {
            assert_eq!(PclMinus::from_formula(&f.to_formula()).unwrap(), f);
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = corpus(20, 42, &CorpusParams::default());
        let b = corpus(20, 42, &CorpusParams::default());
        assert_eq!(a, b);
    }
}
