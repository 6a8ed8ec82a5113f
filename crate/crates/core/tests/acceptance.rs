//! End-to-end acceptance checks, one line per criterion.

mod common;

use std::time::{Duration, Instant};

use co2::ccs::ltl::entails as ltl_entails;
use co2::ccs::{ccs_step, reachable, Ccs, TraceSemantics, DEFAULT_STATE_CAP};
use co2::encoding::{run_corpus, CORPUS_STATE_CAP};
use co2::pcl::{pcl_entails, Pcl, Theory};
use co2::runtime::{check_honesty, run_trace, HonestyConfig, Rule, StateGraph, Strategy, Verdict};
use co2::syntax::{parse_ccs, parse_pcl};
use co2::{Exec, Ident};
use common::{ccs_system, ltl_oracle, pcl_oracle, pcl_system, read_corpus};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Runs one part of a criterion that has its own time limit.
fn timed<T>(what: &str, secs: u64, f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    let start = Instant::now();
    let out = f()?;
    let took = start.elapsed();
    ensure(took <= Duration::from_secs(secs), format!("{what} took {took:.2?}, limit {secs}s"))?;
    Ok(out)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn c1_sale_processes() -> Outcome {
    let (defs, mut c) = parse_ccs("A says (pay?.ship^) | B says (pay!)").map_err(err)?;
    let mut labels = Vec::new();
    while !c.is_zero() {
        let succ = ccs_step(&defs, &c).map_err(err)?;
        ensure(succ.len() == 1, format!("{} successors from {c}", succ.len()))?;
        let (l, next) = succ.into_iter().next().unwrap();
        labels.push(l.to_string());
        c = next;
    }
    let expected = ["<A says pay?, B says pay!>", "<A says ship^>"];
    ensure(labels == expected, format!("labels {labels:?}"))?;
    Ok(labels.join(" then "))
}

fn c2_sale_formulae() -> Outcome {
    let ca = parse_pcl("A says ((B says pay) -> ship)").map_err(err)?;
    let cb = parse_pcl("B says pay").map_err(err)?;
    let goal = parse_pcl("(A says ship) /\\ (B says pay)").map_err(err)?;
    ensure(pcl_entails(&[ca, cb], &goal).map_err(err)?, "not entailed")?;
    Ok("entailed".into())
}

fn reaches_zero(src: &str) -> Result<bool, String> {
    let (defs, c) = parse_ccs(src).map_err(err)?;
    let g = reachable(&defs, &c, DEFAULT_STATE_CAP).map_err(err)?;
    Ok(g.find(&Ccs::zero()).is_some())
}

fn c3_comparison_matrix() -> Outcome {
    let processes = [
        ("A says (b?.a^) | B says (b!)", true),
        ("A says (b?.a!) | B says (a?.b!)", false),
        ("A says (b?.a!) | B says (b!.a?)", true),
        ("A says (b?.a!) | B says (b! | a?)", true),
        ("A says (b? | a!) | B says (b! | a?)", true),
    ];
    for (i, (src, expect)) in processes.iter().enumerate() {
        ensure(reaches_zero(src)? == *expect, format!("row {} processes", i + 1))?;
    }
    let goal = parse_pcl("(A says a) /\\ (B says b)").map_err(err)?;
    let formulae = [
        (1, "A says ((B says b) -> a)", "B says b", true),
        (2, "A says ((B says b) -> a)", "B says ((A says a) -> b)", false),
        (4, "A says ((B says b) -> a)", "B says ((A says a) -->> b)", true),
        (5, "A says ((B says b) -->> a)", "B says ((A says a) -->> b)", true),
    ];
    for (row, ca, cb, expect) in formulae {
        let cs = [parse_pcl(ca).map_err(err)?, parse_pcl(cb).map_err(err)?];
        ensure(pcl_entails(&cs, &goal).map_err(err)? == expect, format!("row {row} formulae"))?;
    }
    Ok("5 process rows, 4 formula rows".into())
}

fn c4_theorems() -> Outcome {
    let reports = run_corpus(500, 2024, CORPUS_STATE_CAP, Exec::Parallel);
    let bad: Vec<_> = reports.iter().filter(|r| !r.agrees()).collect();
    ensure(bad.is_empty(), format!("{} discrepancies, first on {:?}", bad.len(), bad.first().map(|r| r.formula.to_formula().to_string())))?;
    let entailed = reports.iter().filter(|r| matches!(&r.theorem2, Ok(c) if c.lhs)).count();
    Ok(format!("500 instances, 0 discrepancies ({entailed} entail their latent formula)"))
}

fn c5_co2_sale() -> Outcome {
    let (src, sys) = pcl_system(&read_corpus("sale_pcl"));
    let t = run_trace(&src.model, &src.defs, &sys, &Strategy::First, 100).map_err(err)?;
    let rules: Vec<Rule> = t.steps.iter().map(|s| s.rule).collect();
    use Rule::*;
    ensure(rules == [Tell1, Tell2, Fuse, Ask, Do, Do], format!("rules {rules:?}"))?;
    let last = t.last_state();
    ensure(last.agents.iter().all(|a| a.threads.is_empty()), "agents not 0")?;
    let facts: Vec<String> = last.sessions.iter().flat_map(|s| s.contracts.iter().map(|c| c.to_string())).collect();
    ensure(facts.contains(&"A says !ship".into()) && facts.contains(&"B says !pay".into()), format!("{facts:?}"))?;
    Ok(format!("6 steps, ends {last}"))
}

fn c6_broker_escrow() -> Outcome {
    let mut ends = Vec::new();
    for (f, end) in [
        ("broker_ccs", "A[0] | B[0] | C[0] | s1[0]"),
        ("escrow_ccs", "A[0] | B[0] | E[0] | s1[0]"),
    ] {
        let t = timed(f, 2, || {
            let (src, sys) = ccs_system(&read_corpus(f));
            run_trace(&src.model, &src.defs, &sys, &Strategy::First, 100).map_err(err)
        })?;
        let got = t.last_state().to_string();
        ensure(t.stuck && got == end, format!("{f} ends {got}"))?;
        ends.push(got);
    }
    Ok(ends.join("; "))
}

fn c7_honesty() -> Outcome {
    let cfg = HonestyConfig::default();
    let pcl = |f: &str, who: &str| -> Result<&'static str, String> {
        timed(f, 10, || {
            let (src, sys) = pcl_system(&read_corpus(f));
            let r = check_honesty(&src.model, &src.defs, &sys, &Ident::principal(who), &cfg).map_err(err)?;
            if let Verdict::Dishonest(w) = &r.verdict {
                ensure(!w.path.is_empty(), "empty witness")?;
            }
            Ok(r.verdict.as_str())
        })
    };
    let ccs = |f: &str, who: &str| -> Result<&'static str, String> {
        timed(f, 10, || {
            let (src, sys) = ccs_system(&read_corpus(f));
            let r = check_honesty(&src.model, &src.defs, &sys, &Ident::principal(who), &cfg).map_err(err)?;
            if let Verdict::Dishonest(w) = &r.verdict {
                ensure(!w.path.is_empty(), "empty witness")?;
            }
            Ok(r.verdict.as_str())
        })
    };
    let cases = [
        ("fraudulent seller A", pcl("snakeoil_promise_ship", "A")?, "dishonest"),
        ("snake-oil contract A", pcl("snakeoil_contract", "A")?, "honest"),
        ("ccs e-commerce A1", ccs("ecommerce_ccs", "A1")?, "dishonest"),
        ("ccs e-commerce A2", ccs("ecommerce_ccs", "A2")?, "honest"),
        ("pcl e-commerce A1", pcl("ecommerce_pcl", "A1")?, "honest"),
        ("sale A", pcl("sale_pcl", "A")?, "honest"),
        ("sale B", pcl("sale_pcl", "B")?, "honest"),
    ];
    for (what, got, want) in cases {
        ensure(got == want, format!("{what}: {got}"))?;
    }
    Ok("7 verdicts".into())
}

fn c8_protection() -> Outcome {
    let (src, sys) = pcl_system(&read_corpus("protected_buyer"));
    let g = StateGraph::explore(&src.model, &src.defs, &sys, &HonestyConfig::default()).map_err(err)?;
    ensure(g.exhausted(), "exploration hit a bound")?;
    ensure(g.rules().all(|r| r != Rule::Fuse), "a fuse step is enabled")?;
    Ok(format!("{} states, no fuse", g.len()))
}

fn c9_oracles() -> Outcome {
    timed("pcl entailment", 60, || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..1000 {
            let clauses = pcl_oracle::random_clauses(&mut rng, 8);
            let contracts: Vec<Pcl> = clauses.iter().map(|c| c.to_pcl()).collect();
            let expected = pcl_oracle::derivable(&clauses);
            for p in pcl_oracle::PRINCIPALS {
                for a in pcl_oracle::ATOMS {
                    let goal = Pcl::says(Ident::principal(p), Pcl::atom(a));
                    let got = pcl_entails(&contracts, &goal).map_err(err)?;
                    ensure(got == expected.contains(&(p.to_string(), a.to_string())), format!("pcl instance {i}"))?;
                }
            }
        }
        Ok(())
    })?;
    timed("ltl entailment", 60, || {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for i in 0..1000 {
            let g = ltl_oracle::random_graph(&mut rng, 20);
            let phi = ltl_oracle::random_ltl(&mut rng, 3);
            ensure(
                ltl_entails(&g, &phi, TraceSemantics::Maximal) == ltl_oracle::entails(&g, &phi, true),
                format!("ltl instance {i}: {phi}"),
            )?;
            ensure(
                ltl_entails(&g, &phi, TraceSemantics::InfiniteOnly) == ltl_oracle::entails(&g, &phi, false),
                format!("ltl instance {i} (infinite): {phi}"),
            )?;
        }
        Ok(())
    })?;
    timed("deletion order", 60, || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..1000 {
            let clauses = pcl_oracle::random_clauses(&mut rng, 8);
            let contracts: Vec<Pcl> = clauses.iter().map(|c| c.to_pcl()).collect();
            let t = Theory::from_contracts(&contracts).map_err(err)?;
            let reference = t.supported();
            let mut order: Vec<usize> = (0..t.clauses().len()).collect();
            for _ in 0..4 {
                order.shuffle(&mut rng);
                ensure(t.supported_in_order(&order) == reference, format!("deletion order, instance {i}"))?;
            }
        }
        Ok(())
    })?;
    Ok("1000 clause sets, 1000 graphs, 1000 deletion-order sets: full agreement".into())
}

fn c10_axioms() -> Outcome {
    let cases: [(&[&str], &str); 3] = [
        (&[], "true -->> true"),
        (&["a -->> a"], "a"),
        (&["b -->> a", "a -->> b"], "a /\\ b"),
    ];
    for (hyps, goal) in cases {
        let hs: Vec<Pcl> = hyps.iter().map(|h| parse_pcl(h)).collect::<Result<_, _>>().map_err(err)?;
        let g = parse_pcl(goal).map_err(err)?;
        ensure(pcl_entails(&hs, &g).map_err(err)?, format!("{hyps:?} |- {goal}"))?;
    }
    Ok("3 instances proved".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 sale as processes", 1, c1_sale_processes),
        ("2 sale as formulae", 1, c2_sale_formulae),
        ("3 comparison matrix", 5, c3_comparison_matrix),
        ("4 encoding equivalences", 60, c4_theorems),
        ("5 sale system run", 1, c5_co2_sale),
        ("6 broker and escrow runs", 4, c6_broker_escrow),
        ("7 honesty verdicts", 70, c7_honesty),
        ("8 protected buyer", 5, c8_protection),
        ("9 oracle agreement", 180, c9_oracles),
        ("10 logic axioms", 1, c10_axioms),
    ];
    let mut failed = 0;
    for (name, secs, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|d| {
            if took <= Duration::from_secs(secs) {
                Ok(d)
            } else {
                Err(format!("took {took:.2?}, limit {secs}s"))
            }
        });
        match result {
            Ok(detail) => println!("[PASS] {name} ({took:.2?}): {detail}"),
            Err(e) => {
                failed += 1;
                println!("[FAIL] {name} ({took:.2?}): {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
