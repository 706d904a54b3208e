// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use trajlink::matcher::{build_graph, match_online, solve_matching, P1Mode, WindowConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn whole_stream_window_equals_batch(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = common::rng(seed);
        let bundle = common::random_bundle(&mut rng, 6, P1Mode::Height);
        let subs: Vec<_> = (0..n as u64).map(|i| common::random_sub(&mut rng, i, 6, 300.0)).collect();
        let batch = solve_matching(&build_graph(&subs, &bundle, 0.05).unwrap());
        let mut stream = subs;
        stream.sort_by(|a, b| a.t_end.total_cmp(&b.t_end));
        let online = match_online(stream, bundle, 0.05, WindowConfig::whole_stream()).unwrap();
        prop_assert_eq!(online, vec![batch]);
    }

    #[test]
    fn small_windows_stay_causal_and_one_to_one(seed in any::<u64>(), n in 1usize..60, count in 1usize..8) {
        let mut rng = common::rng(seed);
        let bundle = common::random_bundle(&mut rng, 6, P1Mode::Height);
        let subs: Vec<_> = (0..n as u64).map(|i| common::random_sub(&mut rng, i, 6, 600.0)).collect();
        let by_id: std::collections::BTreeMap<u64, _> = subs.iter().map(|s| (s.id, s.clone())).collect();
        let mut stream = subs;
        stream.sort_by(|a, b| a.t_end.total_cmp(&b.t_end));
        let cfg = WindowConfig { count, expiry: 30.0, settle: 5.0, max_wait: 60.0 };
        let results = match_online(stream, bundle, 0.05, cfg).unwrap();
        let (mut succ, mut pred) = (BTreeSet::new(), BTreeSet::new());
        for (k, r) in results.iter().enumerate() {
            prop_assert_eq!(r.window_id, k as u64);
            for &(u, v, w) in &r.pairs {
                prop_assert!(by_id[&u].t_end < by_id[&v].t_start);
                prop_assert!((0.0..=1.0).contains(&w));
                prop_assert!(succ.insert(u), "{} matched twice as predecessor", u);
                prop_assert!(pred.insert(v), "{} matched twice as successor", v);
            }
        }
    }
}
