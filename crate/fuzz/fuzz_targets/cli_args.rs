#![no_main]

use glrt_robust::cli::parse_args;
use libfuzzer_sys::fuzz_target;

// Arguments are NUL-separated; parsing must never panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let args = std::iter::once("glrt").chain(text.split('\0'));
    let _ = parse_args(args);
});
