//! Agreement search: which latent contracts a broker can fuse into a new
//! session, and under which instantiation of their variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::system::System;
use super::RuntimeError;
use crate::terms::{fresh_session_name, ContractModel, Ident, IdentKind, Sort, Substitutable, Substitution};

/// Upper bound on the number of latent contracts a single fuse considers.
pub const MAX_FUSE_LATENTS: usize = 12;

/// A latent contract `{x} c` as seen by the broker.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Latent<M: ContractModel> {
    pub var: Ident,
    pub contract: M::Contract,
}

/// One way of stipulating a session: the fused latents (as indices into the
/// candidate list), the closing substitution and the fresh session name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Agreement {
    pub fused: Vec<usize>,
    pub sigma: Substitution,
    pub session: Ident,
}

impl Agreement {
    /// The session contents `(↑K)σ`.
    pub fn contracts<M: ContractModel>(&self, model: &M, latents: &[Latent<M>]) -> Vec<M::Contract> {
        model.normalize(
            self.fused
                .iter()
                .map(|&i| latents[i].contract.apply(&self.sigma))
                .collect(),
        )
    }
}

/// Search context for one `fuse x φ` prefix.
pub struct AgreementSearch<'a, M: ContractModel> {
    pub model: &'a M,
    pub latents: &'a [Latent<M>],
    pub var: &'a Ident,
    pub observable: &'a M::Observable,
    /// Principal names that principal variables may be bound to.
    pub principals: &'a BTreeSet<Ident>,
    pub session: &'a Ident,
}

impl<M: ContractModel> AgreementSearch<'_, M> {
    /// Variables that the closing substitution for `mask` must cover.
    fn domain(&self, mask: u32) -> BTreeSet<Ident> {
        let mut d = BTreeSet::from([self.var.clone()]);
        d.extend(self.observable.free_vars());
        for (i, l) in self.latents.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if l.var.is_var() {
                    d.insert(l.var.clone());
                }
                d.extend(l.contract.free_vars());
            }
        }
        d
    }

    /// All sort-respecting substitutions on `dom` sending session variables
    /// to the fresh session.
    fn substitutions(&self, dom: &BTreeSet<Ident>) -> Vec<Substitution> {
        let mut out = vec![Substitution::new()];
        for v in dom {
            let choices: Vec<Ident> = match v.sort() {
                Sort::Session => vec![self.session.clone()],
                Sort::Principal => self.principals.iter().cloned().collect(),
            };
            out = out
                .into_iter()
                .flat_map(|s| {
                    choices.iter().map(move |c| {
                        let mut s = s.clone();
                        s.bind(v.clone(), c.clone()).expect("sorts match");
                        s
                    })
                })
                .collect();
        }
        out
    }

    /// Conditions other than minimality: `(↑K)σ ⊢ φσ` with everything closed.
    fn satisfies(
        &self,
        mask: u32,
        sigma: &Substitution,
        memo: &mut HashMap<(u32, Substitution), bool>,
    ) -> Result<bool, RuntimeError> {
        if let Some(&v) = memo.get(&(mask, sigma.clone())) {
            return Ok(v);
        }
        let contracts: Vec<M::Contract> = (0..self.latents.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.latents[i].contract.apply(sigma))
            .collect();
        let phi = self.observable.apply(sigma);
        let ok = contracts.iter().all(Substitutable::is_closed)
            && phi.is_closed()
            && self.model.entails(&self.model.normalize(contracts), &phi)?;
        memo.insert((mask, sigma.clone()), ok);
        Ok(ok)
    }

    /// Every minimal agreement over non-empty subsets of the latents.
    pub fn run(&self) -> Result<Vec<Agreement>, RuntimeError> {
        let n = self.latents.len();
        if n > MAX_FUSE_LATENTS {
            return Err(RuntimeError::TooManyLatents {
                count: n,
                cap: MAX_FUSE_LATENTS,
            });
        }
        if self.var.kind() != IdentKind::SessionVar {
            return Ok(Vec::new());
        }
        let mut memo = HashMap::new();
        let mut found: BTreeMap<(Vec<Latent<M>>, Substitution), Agreement> = BTreeMap::new();
        for mask in 1u32..(1 << n) {
            let dom = self.domain(mask);
            for sigma in self.substitutions(&dom) {
                if !self.satisfies(mask, &sigma, &mut memo)? || !self.minimal(mask, &dom, &sigma, &mut memo)? {
                    continue;
                }
                let fused: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                let mut key: Vec<Latent<M>> = fused.iter().map(|&i| self.latents[i].clone()).collect();
                key.sort();
                found.entry((key, sigma.clone())).or_insert(Agreement {
                    fused,
                    sigma,
                    session: self.session.clone(),
                });
            }
        }
        let mut out: Vec<_> = found.into_values().collect();
        out.sort_by(|a, b| (a.fused.len(), &a.fused, &a.sigma).cmp(&(b.fused.len(), &b.fused, &b.sigma)));
        Ok(out)
    }

    /// No non-empty sub-multiset with a strictly smaller variable domain
    /// reaches an agreement under the restricted substitution.
    fn minimal(
        &self,
        mask: u32,
        dom: &BTreeSet<Ident>,
        sigma: &Substitution,
        memo: &mut HashMap<(u32, Substitution), bool>,
    ) -> Result<bool, RuntimeError> {
        let mut sub = (mask - 1) & mask;
        while sub > 0 {
            let d = self.domain(sub);
            if d.len() < dom.len() && d.is_subset(dom) && self.satisfies(sub, &sigma.restrict(&d), memo)? {
                return Ok(false);
            }
            sub = (sub - 1) & mask;
        }
        Ok(true)
    }

    /// Re-checks every condition for a given witness.
    pub fn verify(&self, a: &Agreement) -> Result<bool, RuntimeError> {
        let mask = a.fused.iter().fold(0u32, |m, &i| m | (1 << i));
        let dom = self.domain(mask);
        let mut memo = HashMap::new();
        Ok(a.sigma.domain() == dom
            && a.sigma.contains(self.var)
            && a
                .sigma
                .iter()
                .all(|(v, n)| v.sort() != Sort::Session || n == self.session)
            && self.satisfies(mask, &a.sigma, &mut memo)?
            && self.minimal(mask, &dom, &a.sigma, &mut memo)?)
    }
}

/// Agreements the agent `broker` could reach in `sys` by fusing its current
/// latent contracts on `observable`, as a fuse prefix on a fresh variable
/// would. Returns the candidate latents alongside the agreements.
pub fn broker_agreements<M: ContractModel>(
    model: &M,
    sys: &System<M>,
    broker: &Ident,
    observable: &M::Observable,
) -> Result<(Vec<Latent<M>>, Vec<Agreement>), RuntimeError> {
    let agent = sys.agent(broker).ok_or_else(|| RuntimeError::UnknownAgent(broker.clone()))?;
    let latents: Vec<Latent<M>> = agent
        .latents()
        .into_iter()
        .map(|(_, var, contract)| Latent { var, contract })
        .collect();
    let idents = sys.all_idents();
    let var = (0..)
        .map(|i| Ident::session_var(&if i == 0 { "z".to_string() } else { format!("z{i}") }))
        .find(|v| !idents.contains(v) && !observable.free_vars().contains(v))
        .expect("unbounded supply");
    let names: BTreeSet<Ident> = idents.into_iter().filter(|i| i.kind() == IdentKind::SessionName).collect();
    let session = fresh_session_name(&names);
    let principals = sys.principal_names();
    let found = AgreementSearch {
        model,
        latents: &latents,
        var: &var,
        observable,
        principals: &principals,
        session: &session,
    }
    .run()?;
    Ok((latents, found))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcl::{Pcl, PclModel};

    fn p(s: &str) -> Ident {
        Ident::principal(s)
    }

    fn latent(var: &str, who: &str, body: Pcl) -> Latent<PclModel> {
        Latent {
            var: Ident::session_var(var),
            contract: Pcl::says(p(who), body),
        }
    }

    #[test]
    fn sale_agreement() {
        let latents = vec![
            latent("x", "A", Pcl::imp(Pcl::says(p("B"), Pcl::atom("pay")), Pcl::atom("ship"))),
            latent("y", "B", Pcl::atom("pay")),
        ];
        let z = Ident::session_var("z");
        let phi = Pcl::says(p("A"), Pcl::atom("ship"));
        let principals = BTreeSet::from([p("A"), p("B"), p("C")]);
        let s = Ident::session("s1");
        let search = AgreementSearch {
            model: &PclModel,
            latents: &latents,
            var: &z,
            observable: &phi,
            principals: &principals,
            session: &s,
        };
        let found = search.run().unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].fused, vec![0, 1]);
        assert_eq!(found[0].sigma.len(), 3);
        assert!(search.verify(&found[0]).unwrap());
    }

    #[test]
    fn unrelated_latents_are_left_out() {
        let latents = vec![
            latent("x", "A", Pcl::atom("a")),
            latent("y", "B", Pcl::atom("b")),
        ];
        let z = Ident::session_var("z");
        let phi = Pcl::says(p("A"), Pcl::atom("a"));
        let principals = BTreeSet::from([p("A"), p("B")]);
        let s = Ident::session("s1");
        let search = AgreementSearch {
            model: &PclModel,
            latents: &latents,
            var: &z,
            observable: &phi,
            principals: &principals,
            session: &s,
        };
        let found = search.run().unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].fused, vec![0]);
    }

    #[test]
    fn cap_is_enforced() {
        let latents: Vec<_> = (0..13).map(|i| latent(&format!("x{i}"), "A", Pcl::atom("a"))).collect();
        let z = Ident::session_var("z");
        let principals = BTreeSet::new();
        let s = Ident::session("s1");
        let search = AgreementSearch {
            model: &PclModel,
            latents: &latents,
            var: &z,
            observable: &Pcl::True,
            principals: &principals,
            session: &s,
        };
        assert!(matches!(search.run(), Err(RuntimeError::TooManyLatents { .. })));
    }
}
