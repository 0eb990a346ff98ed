//! Fixed inputs shared by the benchmarks in `benches/`.

use crio_core::{PauliAxis, ProtocolConfig, C64};

/// A run with `n` groups, distinct axes and angles, and a fixed target.
pub fn sample_config(n: usize) -> ProtocolConfig {
    ProtocolConfig::new(
        n,
        (0..n)
            .map(|j| PauliAxis::from_angles(0.4 + 0.3 * j as f64, 1.1 * j as f64))
            .collect(),
        (0..n).map(|j| 0.2 + 0.5 * j as f64).collect(),
        vec![[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]; n],
    )
}
