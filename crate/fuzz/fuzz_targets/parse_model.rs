#![no_main]

use glrt_robust::config::ModelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = ModelSpec::from_json(text) else {
        return;
    };
    let Ok(model) = spec.build() else {
        return;
    };
    assert!(model.sigma() > 0.0 && model.sigma().is_finite());
    assert!(model.dim() >= 1);
    let total: f64 = model.priors().iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
});
