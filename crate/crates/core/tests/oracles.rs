mod common;

use co2::ccs::ltl::entails as ltl_entails;
use co2::ccs::TraceSemantics;
use co2::pcl::{pcl_entails, Pcl, Theory};
use co2::Ident;
use common::{ltl_oracle, pcl_oracle};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pcl_entailment_matches_subset_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses = pcl_oracle::random_clauses(&mut rng, 8);
        let contracts: Vec<Pcl> = clauses.iter().map(|c| c.to_pcl()).collect();
        let expected = pcl_oracle::derivable(&clauses);
        for p in pcl_oracle::PRINCIPALS {
            for a in pcl_oracle::ATOMS {
                let goal = Pcl::says(Ident::principal(p), Pcl::atom(a));
                let got = pcl_entails(&contracts, &goal).unwrap();
                prop_assert_eq!(got, expected.contains(&(p.to_string(), a.to_string())), "{:?} |- {}", contracts, goal);
            }
        }
    }

    #[test]
    fn supported_set_is_independent_of_deletion_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses = pcl_oracle::random_clauses(&mut rng, 8);
        let contracts: Vec<Pcl> = clauses.iter().map(|c| c.to_pcl()).collect();
        let t = Theory::from_contracts(&contracts).unwrap();
        let reference = t.supported();
        let mut order: Vec<usize> = (0..t.clauses().len()).collect();
        for _ in 0..6 {
            order.shuffle(&mut rng);
            prop_assert_eq!(t.supported_in_order(&order), reference.clone());
        }
    }

    #[test]
    fn ltl_entailment_matches_trace_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ltl_oracle::random_graph(&mut rng, 20);
        let phi = ltl_oracle::random_ltl(&mut rng, 3);
        prop_assert_eq!(ltl_entails(&g, &phi, TraceSemantics::Maximal), ltl_oracle::entails(&g, &phi, true), "{} on {:?}", phi, g.edges);
        prop_assert_eq!(ltl_entails(&g, &phi, TraceSemantics::InfiniteOnly), ltl_oracle::entails(&g, &phi, false), "{} (infinite) on {:?}", phi, g.edges);
    }
}
