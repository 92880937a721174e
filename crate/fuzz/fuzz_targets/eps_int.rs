#![no_main]

use std::ffi::OsString;

use binocov::{SnapTolerance, TrialCount};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data).into_owned();
    if let Ok(snap) = binocov_cli::parse_env_eps(Some(OsString::from(text))) {
        assert!(snap.0.is_finite() && snap.0 >= 0.0);
        let n = TrialCount::new(1000).unwrap();
        let x = snap.snap(12.5, n);
        assert!(x.is_finite());
        let _ = SnapTolerance::parse(&snap.0.to_string()).unwrap();
    }
});
