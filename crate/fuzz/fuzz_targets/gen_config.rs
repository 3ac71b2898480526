#![no_main]

use libfuzzer_sys::fuzz_target;
use slate_auction::harness::{generate, GenConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = serde_json::from_slice::<GenConfig>(data) else {
        return;
    };
    if cfg.n_instances > 4 || cfg.candidates_max > 40 || cfg.h > 64 || cfg.adlim > 16 {
        return;
    }
    if let Ok(corpus) = generate(&cfg) {
        assert_eq!(corpus.len(), cfg.n_instances);
        for inst in &corpus {
            assert!(inst.candidates().len() >= cfg.candidates_min);
            assert!(inst.candidates().len() <= cfg.candidates_max);
        }
    }
});
