#![no_main]

use libfuzzer_sys::fuzz_target;
use slate_auction::allocator::{solve_with, SolveOptions};
use slate_auction::curves::curves_for_all;
use slate_auction::harness::parse_instance;
use slate_auction::model::feasible;
use slate_auction::pricing::{quote, Scheme};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(inst) = parse_instance(text) else {
        return;
    };
    if inst.candidates().len() > 12 || inst.page().h > 64 || inst.bids().iter().any(|&b| b > 1e6) {
        return;
    }
    let r = solve_with(&inst, &SolveOptions { max_swaps: 200, deadline: None });
    assert!(feasible(&r.best, &inst));
    let curves = curves_for_all(&r, &inst).expect("curves agree with the chosen slate");
    for (name, curve) in &curves {
        assert!(curve.is_nondecreasing(), "{name}: {curve:?}");
        let adv = inst.advertiser_index(name).unwrap();
        let bid = inst.bids()[adv];
        for scheme in Scheme::ALL {
            let q = quote(curve, bid, scheme, 3.0).unwrap();
            assert!((0.0..=bid).contains(&q.per_click), "{scheme}: {q:?}");
        }
    }
});
