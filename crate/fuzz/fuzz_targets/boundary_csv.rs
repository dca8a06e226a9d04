#![no_main]

use fpt_core::BoundaryCurve;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(curve) = BoundaryCurve::from_csv_str(text, 1.0) {
        let horizon = curve.horizon();
        for k in 0..=8 {
            let t = horizon * k as f64 / 8.0;
            assert!(curve.eval(t).is_ok());
        }
        assert!(curve.eval(horizon * 1.5 + 1.0).is_err());
        let _ = curve.estimate_holder([0.0, horizon], 4);
    }
});
