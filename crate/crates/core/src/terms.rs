//! Identifiers, substitutions, action labels and the contract-model interface
//! that the runtime is parameterised over.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use thiserror::Error;

/// The four disjoint identifier families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IdentKind {
    PrincipalName,
    SessionName,
    PrincipalVar,
    SessionVar,
}

/// Whether an identifier denotes (or ranges over) principals or sessions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Principal,
    Session,
}

impl IdentKind {
    pub fn is_name(self) -> bool {
        matches!(self, IdentKind::PrincipalName | IdentKind::SessionName)
    }

    pub fn is_var(self) -> bool {
        !self.is_name()
    }

    pub fn sort(self) -> Sort {
        match self {
            IdentKind::PrincipalName | IdentKind::PrincipalVar => Sort::Principal,
            IdentKind::SessionName | IdentKind::SessionVar => Sort::Session,
        }
    }
}

/// A name or variable. `tag` distinguishes alpha-renamed copies of the same
/// source token; it is 0 for everything written by hand.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident {
    text: Arc<str>,
    tag: u32,
    kind: IdentKind,
}

impl Ident {
    pub fn new(kind: IdentKind, text: impl Into<Arc<str>>) -> Self {
        Ident {
            text: text.into(),
            tag: 0,
            kind,
        }
    }

    pub fn principal(text: &str) -> Self {
        Self::new(IdentKind::PrincipalName, text)
    }

    pub fn session(text: &str) -> Self {
        Self::new(IdentKind::SessionName, text)
    }

    pub fn principal_var(text: &str) -> Self {
        Self::new(IdentKind::PrincipalVar, text)
    }

    pub fn session_var(text: &str) -> Self {
        Self::new(IdentKind::SessionVar, text)
    }

    pub fn with_tag(&self, tag: u32) -> Self {
        Ident {
            text: self.text.clone(),
            tag,
            kind: self.kind,
        }
    }

    pub fn kind(&self) -> IdentKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tag(&self) -> u32 {
        self.tag
    }

    pub fn is_name(&self) -> bool {
        self.kind.is_name()
    }

    pub fn is_var(&self) -> bool {
        self.kind.is_var()
    }

    pub fn sort(&self) -> Sort {
        self.kind.sort()
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tag == 0 {
            write!(f, "{}", self.text)
        } else {
            write!(f, "{}#{}", self.text, self.tag)
        }
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            IdentKind::PrincipalName => "P",
            IdentKind::SessionName => "S",
            IdentKind::PrincipalVar => "p",
            IdentKind::SessionVar => "s",
        };
        write!(f, "{k}:{}#{}", self.text, self.tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("`{0}` is not a variable")]
    NotAVariable(Ident),
    #[error("`{0}` is not a name")]
    NotAName(Ident),
    #[error("sort mismatch: variable `{var}` cannot be bound to `{name}`")]
    SortMismatch { var: Ident, name: Ident },
    #[error("action label must have at least one entry")]
    EmptyLabel,
    #[error("action label principal `{0}` is not a principal name")]
    LabelPrincipal(Ident),
}

/// A finite, sort-respecting map from variables to names.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    bindings: BTreeMap<Ident, Ident>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self, TermError>
    where
        I: IntoIterator<Item = (Ident, Ident)>,
    {
        let mut s = Self::new();
        for (v, n) in pairs {
            s.bind(v, n)?;
        }
        Ok(s)
    }

    pub fn bind(&mut self, var: Ident, name: Ident) -> Result<(), TermError> {
        if !var.is_var() {
            return Err(TermError::NotAVariable(var));
        }
        if !name.is_name() {
            return Err(TermError::NotAName(name));
        }
        if var.sort() != name.sort() {
            return Err(TermError::SortMismatch { var, name });
        }
        self.bindings.insert(var, name);
        Ok(())
    }

    pub fn get(&self, var: &Ident) -> Option<&Ident> {
        self.bindings.get(var)
    }

    pub fn contains(&self, var: &Ident) -> bool {
        self.bindings.contains_key(var)
    }

    pub fn domain(&self) -> BTreeSet<Ident> {
        self.bindings.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ident, &Ident)> {
        self.bindings.iter()
    }

    pub fn as_map(&self) -> &BTreeMap<Ident, Ident> {
        &self.bindings
    }

    /// The restriction of this substitution to `dom`.
    pub fn restrict(&self, dom: &BTreeSet<Ident>) -> Self {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(k, _)| dom.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn without(&self, var: &Ident) -> Self {
        let mut s = self.clone();
        s.bindings.remove(var);
        s
    }

    /// `self ⊆ other` as partial maps.
    pub fn is_subset_of(&self, other: &Substitution) -> bool {
        self.bindings
            .iter()
            .all(|(k, v)| other.bindings.get(k) == Some(v))
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k} -> {v}")?;
        }
        write!(f, "}}")
    }
}

/// Terms that mention identifiers and support renaming of free occurrences.
pub trait Substitutable: Sized {
    /// Calls `f` on every free identifier occurrence, in a deterministic
    /// structural order.
    fn visit_free(&self, f: &mut dyn FnMut(&Ident));

    /// Replaces every free occurrence of a key of `map` by its image.
    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self;

    fn apply(&self, sigma: &Substitution) -> Self {
        self.rename(sigma.as_map())
    }

    fn free_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.visit_free(&mut |i| {
            if i.is_var() {
                out.insert(i.clone());
            }
        });
        out
    }

    fn free_names(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.visit_free(&mut |i| {
            if i.is_name() {
                out.insert(i.clone());
            }
        });
        out
    }

    fn is_closed(&self) -> bool {
        let mut closed = true;
        self.visit_free(&mut |i| closed &= i.is_name());
        closed
    }
}

impl Substitutable for Ident {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        f(self)
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        map.get(self).cloned().unwrap_or_else(|| self.clone())
    }
}

impl<T: Substitutable> Substitutable for Vec<T> {
    fn visit_free(&self, f: &mut dyn FnMut(&Ident)) {
        for t in self {
            t.visit_free(f);
        }
    }

    fn rename(&self, map: &BTreeMap<Ident, Ident>) -> Self {
        self.iter().map(|t| t.rename(map)).collect()
    }
}

/// `⟨A₁ says a₁, …, Aⱼ says aⱼ⟩`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionLabel<A> {
    entries: Vec<(Ident, A)>,
}

impl<A> ActionLabel<A> {
    pub fn new(entries: Vec<(Ident, A)>) -> Result<Self, TermError> {
        if entries.is_empty() {
            return Err(TermError::EmptyLabel);
        }
        if let Some((p, _)) = entries
            .iter()
            .find(|(p, _)| p.kind() != IdentKind::PrincipalName)
        {
            return Err(TermError::LabelPrincipal(p.clone()));
        }
        Ok(ActionLabel { entries })
    }

    pub fn single(principal: Ident, atom: A) -> Result<Self, TermError> {
        Self::new(vec![(principal, atom)])
    }

    pub fn entries(&self) -> &[(Ident, A)] {
        &self.entries
    }

    pub fn arity(&self) -> usize {
        self.entries.len()
    }

    pub fn principals(&self) -> impl Iterator<Item = &Ident> {
        self.entries.iter().map(|(p, _)| p)
    }
}

impl<A: fmt::Display> ActionLabel<A> {
    /// Each entry rendered as `A says a`.
    pub fn entry_strings(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|(p, a)| format!("{p} says {a}"))
            .collect()
    }
}

impl<A: fmt::Display> fmt::Display for ActionLabel<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.entry_strings().join(", "))
    }
}

/// Returns the session name `s<i>` with the lowest index `i >= 1` that does
/// not occur in `universe`.
///
/// The allocator is a pure function of the universe, so concurrent callers
/// that agree on the universe agree on the result.
pub fn fresh_session_name(universe: &BTreeSet<Ident>) -> Ident {
    let taken: BTreeSet<&str> = universe
        .iter()
        .filter(|i| i.kind() == IdentKind::SessionName && i.tag() == 0)
        .map(|i| i.text())
        .collect();
    (1..)
        .map(|i| format!("s{i}"))
        .find(|t| !taken.contains(t.as_str()))
        .map(|t| Ident::session(&t))
        .expect("unbounded index range")
}

/// Errors raised by a contract model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("state cap of {cap} exceeded during bounded exploration")]
    CapExceeded { cap: usize },
    #[error("definition error: {0}")]
    Definition(String),
    #[error("formula outside the supported fragment: {0}")]
    Fragment(String),
    #[error("unsupported goal: {0}")]
    UnsupportedGoal(String),
    #[error("term is not closed: {0}")]
    Open(String),
}

/// A contract model: contracts, atoms, a labelled transition relation over
/// contract multisets, observables, entailment and fulfilment.
pub trait ContractModel:
    Clone + fmt::Debug + PartialEq + Eq + PartialOrd + Ord + Hash + Send + Sync + 'static
{
    type Contract: Clone
        + fmt::Debug
        + fmt::Display
        + PartialEq
        + Eq
        + PartialOrd
        + Ord
        + Hash
        + Substitutable
        + Send
        + Sync;
    type Atom: Clone + fmt::Debug + fmt::Display + PartialEq + Eq + PartialOrd + Ord + Hash + Send + Sync;
    type Observable: Clone
        + fmt::Debug
        + fmt::Display
        + PartialEq
        + Eq
        + PartialOrd
        + Ord
        + Hash
        + Substitutable
        + Send
        + Sync;

    fn name(&self) -> &'static str;

    /// `A says c`. Total on every principal and contract.
    fn says(&self, principal: &Ident, contract: Self::Contract) -> Self::Contract;

    /// Largest number of entries a transition label can carry.
    fn max_label_arity(&self) -> usize;

    /// Canonical representative of a contract multiset.
    fn normalize(&self, contracts: Vec<Self::Contract>) -> Vec<Self::Contract>;

    /// All successors of `contracts` under `label` (closed multisets only).
    fn step(
        &self,
        contracts: &[Self::Contract],
        label: &ActionLabel<Self::Atom>,
    ) -> Result<Vec<Vec<Self::Contract>>, ModelError>;

    fn entails(
        &self,
        contracts: &[Self::Contract],
        observable: &Self::Observable,
    ) -> Result<bool, ModelError>;

    fn fulfilled(&self, contracts: &[Self::Contract], principal: &Ident) -> Result<bool, ModelError>;

    /// Human-readable outstanding duties of `principal`, used in reports.
    fn obligations(
        &self,
        _contracts: &[Self::Contract],
        _principal: &Ident,
    ) -> Result<Vec<String>, ModelError> {
        Ok(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_single_binding() {
        let x = Ident::session_var("x");
        let s = Ident::session("s");
        let sigma = Substitution::from_pairs([(x.clone(), s.clone())]).unwrap();
        assert_eq!(x.apply(&sigma), s);
    }

    #[test]
    fn sort_violations_rejected() {
        let mut sigma = Substitution::new();
        let err = sigma
            .bind(Ident::session_var("x"), Ident::principal("A"))
            .unwrap_err();
        assert!(matches!(err, TermError::SortMismatch { .. }));
        assert!(sigma.bind(Ident::principal("A"), Ident::principal("B")).is_err());
        assert!(sigma
            .bind(Ident::principal_var("b"), Ident::principal_var("c"))
            .is_err());
    }

    #[test]
    fn fresh_names() {
        let mut u = BTreeSet::new();
        assert_eq!(fresh_session_name(&u), Ident::session("s1"));
        u.insert(Ident::session("s1"));
        assert_eq!(fresh_session_name(&u), Ident::session("s2"));
        u.insert(Ident::session("s3"));
        assert_eq!(fresh_session_name(&u), Ident::session("s2"));
        // variables and principals with the same text do not block a name
        let v: BTreeSet<_> = [Ident::session_var("s1"), Ident::principal("s2")].into();
        assert_eq!(fresh_session_name(&v), Ident::session("s1"));
    }

    #[test]
    fn label_validation() {
        assert!(ActionLabel::<u8>::new(vec![]).is_err());
        assert!(ActionLabel::new(vec![(Ident::principal_var("a"), 1u8)]).is_err());
        let l = ActionLabel::new(vec![(Ident::principal("A"), "pay")]).unwrap();
        assert_eq!(l.to_string(), "<A says pay>");
    }

    #[test]
    fn subset_and_restrict() {
        let x = Ident::session_var("x");
        let b = Ident::principal_var("b");
        let s = Substitution::from_pairs([
            (x.clone(), Ident::session("s")),
            (b.clone(), Ident::principal("B")),
        ])
        .unwrap();
        let r = s.restrict(&[x.clone()].into());
        assert!(r.is_subset_of(&s));
        assert!(!s.is_subset_of(&r));
        assert_eq!(s.without(&b), r);
    }
}
