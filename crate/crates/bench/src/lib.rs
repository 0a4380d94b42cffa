//! Benchmark fixtures shared by the criterion targets.

use aoi_core::{MultiZoneScenario, SharedParams, ZoneParams, ZoneSpec};

/// Single zone with uniform costs on `[0, 2]` starting from age 0.
pub fn zone(alpha: f64, rho: f64, horizon: usize) -> ZoneParams {
    ZoneParams::new(alpha, 2.0, rho, 0.0, 0.0, horizon).expect("valid fixture")
}

/// `n` zones with arrival rates spread over `[0.7, 0.95]`, all with `w = 0.7`.
pub fn zones(n: usize, horizon: usize) -> MultiZoneScenario {
    let step = if n > 1 { 0.25 / (n - 1) as f64 } else { 0.0 };
    MultiZoneScenario {
        shared: SharedParams {
            rho: 0.5,
            b: 2.0,
            a0: 0.0,
            horizon,
        },
        zones: (0..n)
            .map(|i| ZoneSpec {
                alpha: 0.7 + step * i as f64,
                a_init: 0.0,
                w: 0.7,
            })
            .collect(),
    }
}
