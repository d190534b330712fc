//! Synthetic data (Gaussian, compound-Gaussian, Toeplitz-correlated) and
//! the Monte-Carlo detection harness.

mod generators;
mod rng;
mod scenario;

pub use generators::{
    ar_toeplitz, compound_gaussian_sample, doppler_steering, gen_circular_gaussian, gen_compound_gaussian,
    gen_real_gaussian, gen_target, standard_complex_normal, target_variance, Correlation, Texture,
};
pub use rng::{stream_rng, Role};
pub use scenario::{
    run_scenario, write_csv, CurvePoint, DetectorCurve, Scenario, ScenarioConfig, ScenarioResult, ThresholdSource,
    CSV_HEADER,
};
