//! Recursive-descent parser core, identifier resolution and the process and
//! system grammar.
//!
//! Sorts are not written in the source. A first pass over the tokens records
//! how each identifier is used (as a principal, in a session position, as a
//! session component, as a call argument); a second pass builds the terms
//! with the inferred kinds. Delimited identifiers become variables, except
//! delimited identifiers with a component `s[...]` which are session names.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::diag::{Diagnostic, Span};
use super::lexer::{Tok, Token};
use crate::runtime::{Prefix, ProcDef, Process, SysTerm};
use crate::terms::{ContractModel, Ident, IdentKind, Sort};

pub type PResult<T> = Result<T, Diagnostic>;

/// How an identifier occurrence constrains its sort.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Role {
    Principal,
    /// Agent component `A[...]`: a principal name.
    Agent,
    Session,
    /// Session component `s[...]`: a session name.
    SessionTerm,
    /// Argument `i` of a call to process `X`.
    Arg(Arc<str>, usize),
    /// No constraint (ask variable lists).
    Any,
}

#[derive(Clone, Debug)]
struct Binder {
    text: String,
    span: Span,
    /// Parameter `i` of definition `X`.
    param: Option<(Arc<str>, usize)>,
    roles: Vec<(Role, Span)>,
}

#[derive(Clone, Debug, Default)]
struct FreeUse {
    span: Span,
    roles: Vec<(Role, Span)>,
}

/// Scoped identifier table shared by both passes.
#[derive(Debug, Default)]
pub struct Resolver {
    resolving: bool,
    scopes: Vec<Vec<(String, usize)>>,
    binders: Vec<Binder>,
    counter: usize,
    free: BTreeMap<String, FreeUse>,
    binder_kinds: Vec<IdentKind>,
    free_kinds: BTreeMap<String, IdentKind>,
}

fn split_tag(text: &str) -> (&str, u32) {
    match text.split_once('#') {
        Some((t, n)) => (t, n.parse().unwrap_or(0)),
        None => (text, 0),
    }
}

fn make_ident(kind: IdentKind, text: &str) -> Ident {
    let (t, tag) = split_tag(text);
    Ident::new(kind, t).with_tag(tag)
}

fn role_sort(r: &Role) -> Option<Sort> {
    match r {
        Role::Principal | Role::Agent => Some(Sort::Principal),
        Role::Session | Role::SessionTerm => Some(Sort::Session),
        Role::Arg(..) | Role::Any => None,
    }
}

impl Resolver {
    fn lookup(&self, text: &str) -> Option<usize> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.iter().rev().find(|(t, _)| t == text).map(|&(_, id)| id))
    }

    pub(crate) fn push_scope(&mut self) {
        self.scopes.push(Vec::new());
    }

    pub(crate) fn pop_scope(&mut self) {
        self.scopes.pop();
    }

    /// Declares a binder in the innermost scope.
    fn bind(&mut self, text: &str, span: Span, param: Option<(Arc<str>, usize)>) -> Ident {
        let id = self.counter;
        self.counter += 1;
        if !self.resolving {
            self.binders.push(Binder {
                text: text.to_string(),
                span,
                param,
                roles: Vec::new(),
            });
        }
        self.scopes.last_mut().expect("open scope").push((text.to_string(), id));
        if self.resolving {
            make_ident(self.binder_kinds[id], text)
        } else {
            make_ident(IdentKind::SessionVar, text)
        }
    }

    fn use_ident(&mut self, text: &str, role: Role, span: Span) -> Ident {
        let bound = self.lookup(text);
        if self.resolving {
            let kind = match bound {
                Some(id) => self.binder_kinds[id],
                None => self.free_kinds[text],
            };
            return make_ident(kind, text);
        }
        match bound {
            Some(id) => self.binders[id].roles.push((role, span)),
            None => self
                .free
                .entry(text.to_string())
                .or_insert_with(|| FreeUse { span, roles: Vec::new() })
                .roles
                .push((role, span)),
        }
        make_ident(IdentKind::SessionVar, text)
    }

    /// Infers every kind from the recorded uses and switches to the second
    /// pass.
    fn resolve(&mut self) -> Result<(), Vec<Diagnostic>> {
        let mut errors = Vec::new();
        // parameter sorts, propagated through call arguments to a fixpoint
        let mut params: BTreeMap<(Arc<str>, usize), Sort> = BTreeMap::new();
        loop {
            let mut changed = false;
            for b in &self.binders {
                let Some(p) = &b.param else { continue };
                if params.contains_key(p) {
                    continue;
                }
                let sort = b.roles.iter().find_map(|(r, _)| match r {
                    Role::Arg(x, i) => params.get(&(x.clone(), *i)).copied(),
                    r => role_sort(r),
                });
                if let Some(s) = sort {
                    params.insert(p.clone(), s);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let sorts_of = |roles: &[(Role, Span)]| -> Vec<(Sort, Span)> {
            roles
                .iter()
                .filter_map(|(r, sp)| match r {
                    Role::Arg(x, i) => params.get(&(x.clone(), *i)).map(|s| (*s, *sp)),
                    r => role_sort(r).map(|s| (s, *sp)),
                })
                .collect()
        };
        let conflict = |text: &str, sorts: &[(Sort, Span)]| -> Option<Diagnostic> {
            let first = sorts.first()?;
            let other = sorts.iter().find(|(s, _)| *s != first.0)?;
            Some(Diagnostic::error(
                other.1,
                format!("`{text}` is used both as a principal and as a session"),
            ))
        };
        for b in &self.binders {
            let sorts = sorts_of(&b.roles);
            if let Some(d) = conflict(&b.text, &sorts) {
                errors.push(d);
            }
            if let Some((_, sp)) = b.roles.iter().find(|(r, _)| *r == Role::Agent) {
                errors.push(Diagnostic::error(
                    *sp,
                    format!("agent `{}` is delimited; principal names cannot be restricted", b.text),
                ));
            }
            let kind = if b.roles.iter().any(|(r, _)| *r == Role::SessionTerm) {
                IdentKind::SessionName
            } else {
                let sort = match &b.param {
                    Some(p) => params.get(p).copied(),
                    None => sorts.first().map(|s| s.0),
                };
                match sort {
                    Some(Sort::Principal) => IdentKind::PrincipalVar,
                    _ => IdentKind::SessionVar,
                }
            };
            if b.param.is_some() && kind == IdentKind::SessionName {
                errors.push(Diagnostic::error(b.span, format!("parameter `{}` cannot be a session component", b.text)));
            }
            self.binder_kinds.push(kind);
        }
        for (text, u) in &self.free {
            let sorts = sorts_of(&u.roles);
            if let Some(d) = conflict(text, &sorts) {
                errors.push(d);
            }
            let kind = match sorts.first() {
                Some((Sort::Principal, _)) => IdentKind::PrincipalName,
                Some((Sort::Session, _)) => IdentKind::SessionName,
                None => {
                    errors.push(
                        Diagnostic::error(u.span, format!("`{text}` is not delimited"))
                            .with_suggestion(format!("bind it with `({text})` around its scope")),
                    );
                    IdentKind::SessionVar
                }
            };
            self.free_kinds.insert(text.clone(), kind);
        }
        if !errors.is_empty() {
            errors.sort_by_key(|d| d.span.offset);
            return Err(errors);
        }
        self.resolving = true;
        self.counter = 0;
        self.scopes = vec![Vec::new()];
        Ok(())
    }
}

/// Model-specific grammar for contracts, atoms and observables.
pub trait Surface: ContractModel + Sized {
    fn contract(p: &mut Parser<'_>) -> PResult<Self::Contract>;
    fn atom(p: &mut Parser<'_>) -> PResult<Self::Atom>;
    fn observable(p: &mut Parser<'_>) -> PResult<Self::Observable>;
}

pub struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    res: &'a mut Resolver,
    /// Process calls with their spans, for definedness checks.
    pub(crate) calls: Vec<(Arc<str>, usize, Span)>,
    /// Contract-level calls (`rec` identifiers).
    pub(crate) contract_calls: Vec<(Arc<str>, Span)>,
}

const PREFIX_KEYWORDS: [&str; 5] = ["tau", "do", "tell", "ask", "fuse"];

impl<'a> Parser<'a> {
    fn new(toks: &'a [Token], res: &'a mut Resolver) -> Self {
        Parser {
            toks,
            pos: 0,
            res,
            calls: Vec::new(),
            contract_calls: Vec::new(),
        }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    pub fn joined_at(&self, n: usize) -> bool {
        self.toks[(self.pos + n).min(self.toks.len() - 1)].joined
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Ident(s) if s == kw)
    }

    pub fn unexpected(&self, what: &str) -> Diagnostic {
        Diagnostic::error(self.span(), format!("expected {what}, found {}", self.peek().describe()))
    }

    pub fn expect(&mut self, t: &Tok, what: &str) -> PResult<Span> {
        if self.peek() == t {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(what))
        }
    }

    /// Expects the bracket closing the one opened at `open`; a missing one is
    /// reported at the opening bracket.
    pub fn close(&mut self, t: &Tok, open: Span) -> PResult<()> {
        if self.eat(t) {
            return Ok(());
        }
        let opener = match t {
            Tok::RParen => "(",
            Tok::RBracket => "[",
            _ => "{",
        };
        Err(Diagnostic::error(open, format!("unclosed `{opener}`")).with_suggestion(format!(
            "add `{}` before {}",
            t.text(),
            self.peek().describe()
        )))
    }

    pub fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => Err(self.unexpected(what)),
        }
    }

    pub fn keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    /// A plain name (atom or definition name): no `#` tag allowed.
    pub fn name(&mut self, what: &str) -> PResult<String> {
        let (s, sp) = self.ident(what)?;
        if s.contains('#') {
            return Err(Diagnostic::error(sp, format!("`{s}`: tags are only allowed on principals and sessions")));
        }
        Ok(s)
    }

    pub fn principal(&mut self) -> PResult<Ident> {
        let (s, sp) = self.ident("a principal")?;
        Ok(self.res.use_ident(&s, Role::Principal, sp))
    }

    fn session_ref(&mut self) -> PResult<Ident> {
        let (s, sp) = self.ident("a session or session variable")?;
        Ok(self.res.use_ident(&s, Role::Session, sp))
    }

    fn binder_list(&mut self) -> PResult<Vec<Ident>> {
        let open = self.expect(&Tok::LParen, "`(`")?;
        let mut vs = Vec::new();
        loop {
            let (s, sp) = self.ident("an identifier")?;
            vs.push(self.res.bind(&s, sp, None));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.close(&Tok::RParen, open)?;
        Ok(vs)
    }

    /// `( x , …)` followed by something that can start a term.
    fn at_binder_list(&self) -> bool {
        if *self.peek() != Tok::LParen || !matches!(self.peek_at(1), Tok::Ident(_)) {
            return false;
        }
        let mut n = 2;
        loop {
            match self.peek_at(n) {
                Tok::Comma if matches!(self.peek_at(n + 1), Tok::Ident(_)) => n += 2,
                Tok::RParen => break,
                _ => return false,
            }
        }
        matches!(self.peek_at(n + 1), Tok::Zero | Tok::LParen | Tok::LBrace | Tok::Ident(_))
    }

    // ---- processes ----

    pub fn process<M: Surface>(&mut self) -> PResult<Process<M>> {
        let mut items = vec![self.proc_sum::<M>()?];
        while self.eat(&Tok::Bar) {
            items.push(self.proc_sum::<M>()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Process::Par(items) })
    }

    fn at_prefix(&self) -> bool {
        PREFIX_KEYWORDS.iter().any(|k| self.is_kw(k))
    }

    fn proc_sum<M: Surface>(&mut self) -> PResult<Process<M>> {
        if !self.at_prefix() {
            return self.proc_atom();
        }
        let mut branches = Vec::new();
        loop {
            branches.push(self.branch::<M>()?);
            if !self.eat(&Tok::Plus) {
                break;
            }
            if !self.at_prefix() {
                return Err(self.unexpected("a prefix (`tau`, `do`, `tell`, `ask` or `fuse`) after `+`"));
            }
        }
        Ok(Process::Sum(branches))
    }

    fn branch<M: Surface>(&mut self) -> PResult<(Prefix<M>, Process<M>)> {
        let pre = self.prefix::<M>()?;
        let cont = if self.eat(&Tok::Dot) { self.proc_atom()? } else { Process::zero() };
        Ok((pre, cont))
    }

    fn prefix<M: Surface>(&mut self) -> PResult<Prefix<M>> {
        let (kw, _) = self.ident("a prefix")?;
        match kw.as_str() {
            "tau" => Ok(Prefix::Tau),
            "do" => {
                let target = self.session_ref()?;
                let atom = M::atom(self)?;
                Ok(Prefix::Do { target, atom })
            }
            "tell" => {
                let target = self.principal()?;
                let open = self.expect(&Tok::LBrace, "`{`")?;
                let var = self.session_ref()?;
                self.close(&Tok::RBrace, open)?;
                let contract = self.parenthesised(M::contract)?;
                Ok(Prefix::Tell { target, var, contract })
            }
            "ask" => {
                let target = self.session_ref()?;
                let mut vars = Vec::new();
                if self.eat(&Tok::Box) {
                } else if *self.peek() == Tok::LBracket {
                    let open = self.bump().span;
                    loop {
                        let (s, sp) = self.ident("a variable")?;
                        vars.push(self.res.use_ident(&s, Role::Any, sp));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.close(&Tok::RBracket, open)?;
                }
                let observable = self.parenthesised(M::observable)?;
                Ok(Prefix::Ask {
                    target,
                    vars,
                    observable,
                })
            }
            "fuse" => {
                let var = self.session_ref()?;
                let observable = self.parenthesised(M::observable)?;
                Ok(Prefix::Fuse { var, observable })
            }
            _ => unreachable!("caller checked the keyword"),
        }
    }

    pub fn parenthesised<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        let open = self.expect(&Tok::LParen, "`(`")?;
        let t = f(self)?;
        self.close(&Tok::RParen, open)?;
        Ok(t)
    }

    fn proc_atom<M: Surface>(&mut self) -> PResult<Process<M>> {
        if self.at_prefix() {
            let (pre, cont) = self.branch::<M>()?;
            return Ok(Process::prefix(pre, cont));
        }
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(Process::zero())
            }
            Tok::LBrace => {
                let open = self.bump().span;
                let var = self.session_ref()?;
                self.close(&Tok::RBrace, open)?;
                let contract = self.parenthesised(M::contract)?;
                Ok(Process::Latent { var, contract })
            }
            Tok::LParen if self.at_binder_list() => {
                self.res.push_scope();
                let r = (|| {
                    let vs = self.binder_list()?;
                    let body = self.process::<M>()?;
                    Ok(Process::Delim(vs, Box::new(body)))
                })();
                self.res.pop_scope();
                r
            }
            Tok::LParen => self.parenthesised(|p| p.process::<M>()),
            Tok::Ident(_) => {
                let name: Arc<str> = self.name("a process identifier")?.into();
                let sp = self.toks[self.pos - 1].span;
                let mut args = Vec::new();
                if *self.peek() == Tok::LParen && self.joined_at(0) {
                    let open = self.bump().span;
                    loop {
                        let (s, asp) = self.ident("an argument")?;
                        args.push(self.res.use_ident(&s, Role::Arg(name.clone(), args.len()), asp));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.close(&Tok::RParen, open)?;
                }
                self.calls.push((name.clone(), args.len(), sp));
                Ok(Process::Call(name, args))
            }
            _ => Err(self.unexpected("a process")),
        }
    }

    // ---- systems ----

    pub fn system<M: Surface>(&mut self) -> PResult<SysTerm<M>> {
        let mut items = vec![self.sys_atom::<M>()?];
        while self.eat(&Tok::Bar) {
            items.push(self.sys_atom::<M>()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { SysTerm::Par(items) })
    }

    fn sys_atom<M: Surface>(&mut self) -> PResult<SysTerm<M>> {
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(SysTerm::Zero)
            }
            Tok::LParen if self.at_binder_list() => {
                self.res.push_scope();
                let r = (|| {
                    let vs = self.binder_list()?;
                    let body = self.system::<M>()?;
                    Ok(SysTerm::Delim(vs, Box::new(body)))
                })();
                self.res.pop_scope();
                r
            }
            Tok::LParen => self.parenthesised(|p| p.system::<M>()),
            Tok::Ident(s) if matches!(self.peek_at(1), Tok::LBracket | Tok::Box) => {
                let sp = self.bump().span;
                let agent = s.chars().next().is_some_and(|c| c.is_ascii_uppercase());
                if self.eat(&Tok::Box) {
                    return Ok(if agent {
                        SysTerm::Agent(self.res.use_ident(&s, Role::Agent, sp), Process::zero())
                    } else {
                        SysTerm::Session(self.res.use_ident(&s, Role::SessionTerm, sp), Vec::new())
                    });
                }
                let open = self.bump().span;
                if agent {
                    let a = self.res.use_ident(&s, Role::Agent, sp);
                    let p = self.process::<M>()?;
                    self.close(&Tok::RBracket, open)?;
                    Ok(SysTerm::Agent(a, p))
                } else {
                    let n = self.res.use_ident(&s, Role::SessionTerm, sp);
                    let mut cs = Vec::new();
                    if *self.peek() == Tok::Zero && *self.peek_at(1) == Tok::RBracket {
                        // `s[0]`: the empty session
                        self.bump();
                    } else if *self.peek() != Tok::RBracket {
                        loop {
                            cs.push(M::contract(self)?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.close(&Tok::RBracket, open)?;
                    Ok(SysTerm::Session(n, cs))
                }
            }
            _ => Err(self.unexpected("an agent `A[...]`, a session `s[...]`, `0` or a delimiter")),
        }
    }

    /// `def X(u1, …) = P;`, after the `def` keyword.
    pub fn definition<M: Surface>(&mut self) -> PResult<ProcDef<M>> {
        let name: Arc<str> = self.name("a process identifier")?.into();
        self.res.push_scope();
        let r = (|| {
            let mut params = Vec::new();
            if *self.peek() == Tok::LParen {
                let open = self.bump().span;
                loop {
                    let (s, sp) = self.ident("a parameter")?;
                    params.push(self.res.bind(&s, sp, Some((name.clone(), params.len()))));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.close(&Tok::RParen, open)?;
            }
            self.expect(&Tok::Eq, "`=`")?;
            let body = self.process::<M>()?;
            Ok(ProcDef {
                name: name.clone(),
                params,
                body,
            })
        })();
        self.res.pop_scope();
        r
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_eof(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }
}

/// Process calls (name, arity, span) and contract calls (name, span) seen
/// while parsing.
pub(crate) type Calls = (Vec<(Arc<str>, usize, Span)>, Vec<(Arc<str>, Span)>);

/// Runs `f` twice over `toks`: once to collect identifier uses, once with
/// the inferred kinds.
pub(crate) fn two_pass<T>(toks: &[Token], f: impl Fn(&mut Parser<'_>) -> PResult<T>) -> Result<(T, Calls), Vec<Diagnostic>> {
    let mut res = Resolver {
        scopes: vec![Vec::new()],
        ..Resolver::default()
    };
    {
        let mut p = Parser::new(toks, &mut res);
        f(&mut p).map_err(|d| vec![d])?;
    }
    res.resolve()?;
    let mut p = Parser::new(toks, &mut res);
    let t = f(&mut p).map_err(|d| vec![d])?;
    Ok((t, (p.calls, p.contract_calls)))
}
