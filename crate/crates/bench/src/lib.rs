//! Fixtures shared by the benchmarks.

use rost_core::{build_rpc, ParametricCdf, Rost, Seed};

/// Two-level cascade parameter used throughout the benchmarks.
pub fn two_level() -> ParametricCdf {
    ParametricCdf::for_cascade(vec![(0.3, 0.25), (0.7, 0.25)]).expect("valid cascade")
}

/// A cascade replica with `n` particles.
pub fn cascade(n: usize, seed: u64) -> Rost {
    build_rpc(&two_level(), n, &mut Seed(seed).rng()).expect("cascade builds")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_has_the_requested_size() {
        assert_eq!(cascade(16, 1).dim(), 16);
    }
}
