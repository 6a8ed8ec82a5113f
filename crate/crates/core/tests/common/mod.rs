//! Shared helpers for the integration tests: corpus loading and independent
//! reference implementations used as oracles.
#![allow(dead_code)]

pub mod ltl_oracle;
pub mod pcl_oracle;

use std::path::PathBuf;

use co2::ccs::CcsModel;
use co2::pcl::PclModel;
use co2::runtime::{normalize, System};
use co2::syntax::{parse_program, Program, Source};

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.co2"))
}

pub fn read_corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn pcl_system(src: &str) -> (Source<PclModel>, System<PclModel>) {
    match parse_program(src).unwrap_or_else(|e| panic!("{e}")) {
        Program::Pcl(s) => {
            let sys = normalize(&s.model, &s.defs, &s.system).unwrap();
            (s, sys)
        }
        Program::Ccs(_) => panic!("expected a pcl program"),
    }
}

pub fn ccs_system(src: &str) -> (Source<CcsModel>, System<CcsModel>) {
    match parse_program(src).unwrap_or_else(|e| panic!("{e}")) {
        Program::Ccs(s) => {
            let sys = normalize(&s.model, &s.defs, &s.system).unwrap();
            (s, sys)
        }
        Program::Pcl(_) => panic!("expected a ccs program"),
    }
}
