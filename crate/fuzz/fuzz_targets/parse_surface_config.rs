#![no_main]

use glrt_robust::config::SurfaceConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = SurfaceConfig::from_json(text) else {
        return;
    };
    cfg.validate().expect("accepted config must validate");
    let model = cfg.model.build().expect("validated model must build");
    assert!(cfg.true_class < model.num_classes());
});
