#![no_main]

use fpt_core::DensityEstimate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(est) = DensityEstimate::from_csv_str(text, 1.0) {
        let horizon = est.horizon();
        for k in 1..=8 {
            let t = horizon * k as f64 / 8.0;
            let f = est.cdf_at(t).unwrap();
            assert!((0.0..=1.0).contains(&f));
            let _ = est.density(t);
        }
        let again = DensityEstimate::from_csv_str(&est.to_csv(), 1.0).unwrap();
        assert_eq!(again.values(), est.values());
    }
});
