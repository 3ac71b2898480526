#![no_main]

use libfuzzer_sys::fuzz_target;
use slate_auction::harness::{parse_corpus, write_corpus};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(corpus) = parse_corpus(text) else {
        return;
    };
    let mut buf = Vec::new();
    write_corpus(&mut buf, &corpus).unwrap();
    let again = parse_corpus(std::str::from_utf8(&buf).unwrap()).expect("written corpus parses");
    assert_eq!(corpus, again);
});
