#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(deltas) = binocov_cli::args::parse_deltas(&text) {
        assert!(!deltas.0.is_empty());
        assert!(deltas.0.iter().all(|d| *d > 0.0 && *d < 1.0));
    }
});
