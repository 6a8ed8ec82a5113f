//! Surface syntax for contracts, formulas and systems.
//!
//! A `.co2` file holds an optional `model pcl;` or `model ccs;` line
//! (`pcl` is the default), `rec X = c;` contract definitions (CCS only),
//! `def X(u, …) = P;` process definitions and one system, optionally
//! introduced by `system`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ccs::{Ccs, CcsAtom, CcsModel, Definitions, Ltl, Polarity};
use crate::pcl::{Pcl, PclAtom, PclModel};
use crate::runtime::{validate_defs, Defs, ProcDef, SysTerm};
use crate::terms::ContractModel;

pub mod diag;
pub mod lexer;
pub mod parser;

pub use diag::{Diagnostic, Severity, Span};
pub use parser::{PResult, Parser, Surface};

use lexer::{lex, Tok};
use parser::two_pass;

/// One or more diagnostics; the first is the primary one.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl From<Vec<Diagnostic>> for ParseError {
    fn from(diagnostics: Vec<Diagnostic>) -> Self {
        ParseError { diagnostics }
    }
}

impl From<Diagnostic> for ParseError {
    fn from(d: Diagnostic) -> Self {
        ParseError { diagnostics: vec![d] }
    }
}

// ---- PCL ----

fn pcl_imp(p: &mut Parser<'_>) -> PResult<Pcl> {
    let lhs = pcl_or(p)?;
    if p.eat(&Tok::Imp) {
        return Ok(Pcl::imp(lhs, pcl_imp(p)?));
    }
    if p.eat(&Tok::CImp) {
        return Ok(Pcl::cimp(lhs, pcl_imp(p)?));
    }
    Ok(lhs)
}

fn pcl_or(p: &mut Parser<'_>) -> PResult<Pcl> {
    let mut f = pcl_and(p)?;
    while p.eat(&Tok::Or) {
        f = Pcl::or(f, pcl_and(p)?);
    }
    Ok(f)
}

fn pcl_and(p: &mut Parser<'_>) -> PResult<Pcl> {
    let mut f = pcl_unary(p)?;
    while p.eat(&Tok::And) {
        f = Pcl::and(f, pcl_unary(p)?);
    }
    Ok(f)
}

fn pcl_unary(p: &mut Parser<'_>) -> PResult<Pcl> {
    match p.peek().clone() {
        Tok::LParen => p.parenthesised(pcl_imp),
        Tok::Bang => {
            p.bump();
            Ok(Pcl::Atom(PclAtom::fact(&p.name("an atom")?)))
        }
        Tok::Ident(s) if s == "true" => {
            p.bump();
            Ok(Pcl::True)
        }
        Tok::Ident(s) if s == "false" => {
            p.bump();
            Ok(Pcl::False)
        }
        Tok::Ident(_) if p.is_kw_at(1, "says") => {
            let who = p.principal()?;
            p.bump();
            let body = if *p.peek() == Tok::LParen {
                p.parenthesised(pcl_imp)?
            } else {
                pcl_unary(p)?
            };
            Ok(Pcl::says(who, body))
        }
        Tok::Ident(_) => Ok(Pcl::atom(&p.name("an atom")?)),
        _ => Err(p.unexpected("a formula")),
    }
}

impl Surface for PclModel {
    fn contract(p: &mut Parser<'_>) -> PResult<Pcl> {
        pcl_imp(p)
    }

    fn atom(p: &mut Parser<'_>) -> PResult<PclAtom> {
        Ok(PclAtom::promise(&p.name("an atom")?))
    }

    fn observable(p: &mut Parser<'_>) -> PResult<Pcl> {
        pcl_imp(p)
    }
}

// ---- CCS contracts ----

fn at_ccs_atom(p: &Parser<'_>) -> bool {
    matches!(p.peek(), Tok::Ident(_))
        && matches!(p.peek_at(1), Tok::Bang | Tok::Question | Tok::Caret)
        && p.joined_at(1)
}

fn ccs_atom(p: &mut Parser<'_>) -> PResult<CcsAtom> {
    if !at_ccs_atom(p) {
        return Err(p.unexpected("an action such as `pay!`, `pay?` or `pay^`"));
    }
    let name = p.name("an action")?;
    let pol = match p.bump().tok {
        Tok::Bang => Polarity::Output,
        Tok::Question => Polarity::Input,
        _ => Polarity::Auto,
    };
    Ok(CcsAtom::new(&name, pol))
}

fn ccs_par(p: &mut Parser<'_>) -> PResult<Ccs> {
    let mut fs = vec![ccs_sum(p)?];
    while p.eat(&Tok::Bar) {
        fs.push(ccs_sum(p)?);
    }
    Ok(if fs.len() == 1 { fs.pop().unwrap() } else { Ccs::Par(fs) })
}

fn ccs_sum(p: &mut Parser<'_>) -> PResult<Ccs> {
    if !at_ccs_atom(p) {
        return ccs_unit(p);
    }
    let mut branches = Vec::new();
    loop {
        let a = ccs_atom(p)?;
        let k = if p.eat(&Tok::Dot) { ccs_unit(p)? } else { Ccs::zero() };
        branches.push((a, k));
        if !p.eat(&Tok::Plus) {
            break;
        }
        if !at_ccs_atom(p) {
            return Err(p.unexpected("an action after `+`"));
        }
    }
    Ok(Ccs::Sum(branches))
}

fn ccs_unit(p: &mut Parser<'_>) -> PResult<Ccs> {
    if at_ccs_atom(p) {
        let a = ccs_atom(p)?;
        let k = if p.eat(&Tok::Dot) { ccs_unit(p)? } else { Ccs::zero() };
        return Ok(Ccs::prefix(a, k));
    }
    match p.peek().clone() {
        Tok::Zero => {
            p.bump();
            Ok(Ccs::zero())
        }
        Tok::LParen => p.parenthesised(ccs_par),
        Tok::Ident(_) if p.is_kw_at(1, "says") => {
            let who = p.principal()?;
            p.bump();
            let body = if *p.peek() == Tok::LParen {
                p.parenthesised(ccs_par)?
            } else {
                ccs_unit(p)?
            };
            Ok(Ccs::says(who, body))
        }
        Tok::Ident(_) => {
            let sp = p.span();
            let x: Arc<str> = p.name("a contract identifier")?.into();
            p.contract_calls.push((x.clone(), sp));
            Ok(Ccs::Call(x))
        }
        _ => Err(p.unexpected("a contract")),
    }
}

// ---- LTL ----

fn ltl_or(p: &mut Parser<'_>) -> PResult<Ltl> {
    let mut f = ltl_and(p)?;
    while p.eat(&Tok::Or) {
        f = Ltl::or(f, ltl_and(p)?);
    }
    Ok(f)
}

fn ltl_and(p: &mut Parser<'_>) -> PResult<Ltl> {
    let mut f = ltl_until(p)?;
    while p.eat(&Tok::And) {
        f = Ltl::and(f, ltl_until(p)?);
    }
    Ok(f)
}

fn ltl_until(p: &mut Parser<'_>) -> PResult<Ltl> {
    let lhs = ltl_unary(p)?;
    if p.is_kw("U") && !at_ccs_atom(p) {
        p.bump();
        return Ok(Ltl::until(lhs, ltl_until(p)?));
    }
    Ok(lhs)
}

fn ltl_unary(p: &mut Parser<'_>) -> PResult<Ltl> {
    if at_ccs_atom(p) {
        return Ok(Ltl::atom(ccs_atom(p)?));
    }
    match p.peek().clone() {
        Tok::Bang => {
            p.bump();
            Ok(Ltl::not(ltl_unary(p)?))
        }
        Tok::Diamond => {
            p.bump();
            Ok(Ltl::eventually(ltl_unary(p)?))
        }
        Tok::Box => {
            p.bump();
            Ok(Ltl::always(ltl_unary(p)?))
        }
        Tok::LParen => p.parenthesised(ltl_or),
        Tok::Ident(s) if s == "X" => {
            p.bump();
            Ok(Ltl::next(ltl_unary(p)?))
        }
        Tok::Ident(s) if s == "true" => {
            p.bump();
            Ok(Ltl::True)
        }
        Tok::Ident(s) if s == "false" => {
            p.bump();
            Ok(Ltl::False)
        }
        _ => Err(p.unexpected("an LTL formula")),
    }
}

impl Surface for CcsModel {
    fn contract(p: &mut Parser<'_>) -> PResult<Ccs> {
        ccs_par(p)
    }

    fn atom(p: &mut Parser<'_>) -> PResult<CcsAtom> {
        ccs_atom(p)
    }

    fn observable(p: &mut Parser<'_>) -> PResult<Ltl> {
        ltl_or(p)
    }
}

// ---- entry points ----

fn whole<T>(src: &str, f: impl Fn(&mut Parser<'_>) -> PResult<T>) -> Result<T, ParseError> {
    let toks = lex(src)?;
    let (t, _) = two_pass(&toks, |p| {
        let t = f(p)?;
        p.expect_eof()?;
        Ok(t)
    })?;
    Ok(t)
}

/// A closed PCL formula; every `X says` names a principal.
pub fn parse_pcl(src: &str) -> Result<Pcl, ParseError> {
    whole(src, pcl_imp)
}

pub fn parse_ltl(src: &str) -> Result<Ltl, ParseError> {
    whole(src, ltl_or)
}

/// `rec` definitions followed by a CCS contract.
pub fn parse_ccs(src: &str) -> Result<(Definitions, Ccs), ParseError> {
    let toks = lex(src)?;
    let ((recs, c), (_, calls)) = two_pass(&toks, |p| {
        let recs = recs(p)?;
        let c = ccs_par(p)?;
        p.expect_eof()?;
        Ok((recs, c))
    })?;
    let defs = definitions(recs, &calls)?;
    Ok((defs, c))
}

fn recs(p: &mut Parser<'_>) -> PResult<Vec<(String, Ccs)>> {
    let mut out = Vec::new();
    while p.is_kw("rec") {
        p.bump();
        out.push(rec_body(p)?);
    }
    Ok(out)
}

fn rec_body(p: &mut Parser<'_>) -> PResult<(String, Ccs)> {
    let x = p.name("a contract identifier")?;
    p.expect(&Tok::Eq, "`=`")?;
    let c = ccs_par(p)?;
    p.expect(&Tok::Semi, "`;`")?;
    Ok((x, c))
}

fn definitions(recs: Vec<(String, Ccs)>, calls: &[(Arc<str>, Span)]) -> Result<Definitions, ParseError> {
    let mut defs = Definitions::new();
    for (x, c) in recs {
        defs.insert(&x, c);
    }
    if let Some((x, sp)) = calls.iter().find(|(x, _)| defs.get(x).is_none()) {
        return Err(Diagnostic::error(*sp, format!("undefined contract identifier `{x}`")).into());
    }
    defs.validate()
        .map_err(|e| ParseError::from(Diagnostic::error(Span::default(), e.to_string())))?;
    Ok(defs)
}

/// A parsed `.co2` file over one contract model.
#[derive(Clone, Debug)]
pub struct Source<M: ContractModel> {
    pub model: M,
    pub defs: Defs<M>,
    pub system: SysTerm<M>,
}

#[derive(Clone, Debug)]
pub enum Program {
    Pcl(Source<PclModel>),
    Ccs(Source<CcsModel>),
}

impl Program {
    pub fn model_name(&self) -> &'static str {
        match self {
            Program::Pcl(_) => "pcl",
            Program::Ccs(_) => "ccs",
        }
    }
}

impl<M: ContractModel> Source<M> {
    fn write_body(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in self.defs.iter() {
            writeln!(f, "{d}")?;
        }
        writeln!(f, "system {};", self.system)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {};", self.model_name())?;
        match self {
            Program::Pcl(s) => s.write_body(f),
            Program::Ccs(s) => {
                write!(f, "{}", s.model.defs())?;
                s.write_body(f)
            }
        }
    }
}

struct Items<M: ContractModel> {
    recs: Vec<(String, Ccs)>,
    defs: Vec<ProcDef<M>>,
    system: SysTerm<M>,
}

fn file_items<M: Surface>(p: &mut Parser<'_>, allow_rec: bool) -> PResult<Items<M>> {
    if p.is_kw("model") {
        p.bump();
        p.ident("a model name")?;
        p.eat(&Tok::Semi);
    }
    let mut items = Items {
        recs: Vec::new(),
        defs: Vec::new(),
        system: SysTerm::Zero,
    };
    let mut seen_system: Option<Span> = None;
    while !p.at_eof() {
        if p.is_kw("rec") {
            let sp = p.span();
            if !allow_rec {
                return Err(Diagnostic::error(sp, "`rec` definitions need `model ccs;`"));
            }
            p.bump();
            items.recs.push(rec_body(p)?);
        } else if p.is_kw("def") && matches!(p.peek_at(1), Tok::Ident(_)) {
            p.bump();
            let d = p.definition::<M>()?;
            p.expect(&Tok::Semi, "`;` after a definition")?;
            items.defs.push(d);
        } else {
            let sp = p.span();
            if let Some(first) = seen_system {
                return Err(Diagnostic::error(sp, format!("second system block; the first one starts at {first}")));
            }
            if p.is_kw("system") && !matches!(p.peek_at(1), Tok::LBracket | Tok::Box) {
                p.bump();
            }
            seen_system = Some(sp);
            items.system = p.system::<M>()?;
            if !p.at_eof() {
                p.expect(&Tok::Semi, "`;` or end of input after the system")?;
            }
        }
    }
    if seen_system.is_none() {
        return Err(Diagnostic::error(p.span(), "missing system block").with_suggestion("add `system A[0];` or similar"));
    }
    Ok(items)
}

type Parsed<M> = (Items<M>, Defs<M>, Vec<(Arc<str>, Span)>);

fn source<M: Surface>(toks: &[lexer::Token], allow_rec: bool) -> Result<Parsed<M>, ParseError> {
    let (items, (calls, ccalls)) = two_pass(toks, |p| file_items::<M>(p, allow_rec))?;
    let mut defs = Defs::new();
    for d in &items.defs {
        defs.insert(d.clone());
    }
    for (x, n, sp) in &calls {
        match defs.get(x) {
            None => return Err(Diagnostic::error(*sp, format!("undefined process identifier `{x}`")).into()),
            Some(d) if d.params.len() != *n => {
                return Err(Diagnostic::error(
                    *sp,
                    format!("`{x}` expects {} arguments, got {n}", d.params.len()),
                )
                .into())
            }
            Some(_) => {}
        }
    }
    validate_defs(&defs).map_err(|e| ParseError::from(Diagnostic::error(Span::default(), e.to_string())))?;
    Ok((items, defs, ccalls))
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let model = match (&toks[0].tok, &toks.get(1).map(|t| &t.tok)) {
        (Tok::Ident(m), Some(Tok::Ident(name))) if m == "model" => match name.as_str() {
            "pcl" => "pcl",
            "ccs" => "ccs",
            other => {
                return Err(Diagnostic::error(toks[1].span, format!("unknown model `{other}`"))
                    .with_suggestion("use `pcl` or `ccs`")
                    .into())
            }
        },
        _ => "pcl",
    };
    if model == "ccs" {
        let (items, defs, ccalls) = source::<CcsModel>(&toks, true)?;
        Ok(Program::Ccs(Source {
            model: CcsModel::new(definitions(items.recs, &ccalls)?),
            defs,
            system: items.system,
        }))
    } else {
        let (items, defs, _) = source::<PclModel>(&toks, false)?;
        Ok(Program::Pcl(Source {
            model: PclModel,
            defs,
            system: items.system,
        }))
    }
}
