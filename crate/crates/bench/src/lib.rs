//! Fixtures shared by the criterion benches.

use evolk_core::hj::SectionX;
use evolk_core::{builtin, LagrangianSystem, SampleGrid, TangentPoint};

pub fn system(name: &str) -> LagrangianSystem {
    builtin(name).expect("builtin exists").system
}

/// The unit-energy oscillator section with its recommended grid.
pub fn oscillator_solution() -> (LagrangianSystem, SectionX, SampleGrid) {
    let b = builtin("oscillator_1d").expect("builtin exists");
    let x = SectionX::parse(&["sqrt(1-q1^2)"], 1).expect("valid section");
    (b.system, x, b.q_grid)
}

/// Deterministic tangent points spread over `[-1, 1]^(2n)`.
pub fn tangent_points(n: usize, count: usize) -> Vec<TangentPoint> {
    (0..count)
        .map(|k| {
            let c = |i: usize| ((k * 7 + i * 13) % 29) as f64 / 14.0 - 1.0;
            TangentPoint { q: (0..n).map(c).collect(), v: (0..n).map(|i| c(i + n)).collect() }
        })
        .collect()
}
