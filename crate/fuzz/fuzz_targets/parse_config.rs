#![no_main]

use glrt_robust::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::from_json(text) else {
        return;
    };
    // An accepted config stays valid and hashes deterministically.
    cfg.validate().expect("accepted config must validate");
    assert_eq!(cfg.hash(), cfg.hash());
    let _ = cfg.kappas();
    let _ = cfg.check_simulation();
    let model = cfg.model.build().expect("validated model must build");
    assert!(model.num_classes() >= 2);
});
