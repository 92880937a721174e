#![no_main]

use libfuzzer_sys::fuzz_target;

// NUL-separated argv; parsing must never panic.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let argv = std::iter::once("binocov").chain(text.split('\0'));
    let _ = binocov_cli::args::parse_args(argv);
});
