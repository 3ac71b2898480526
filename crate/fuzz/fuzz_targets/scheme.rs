#![no_main]

use libfuzzer_sys::fuzz_target;
use slate_auction::pricing::Scheme;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scheme) = text.parse::<Scheme>() {
        assert_eq!(scheme.to_string().parse::<Scheme>().unwrap(), scheme);
    }
});
