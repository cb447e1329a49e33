//! Shared setup for the history benchmarks.

use std::sync::Arc;

use subdiff_core::fast_history::build_for_scheme;
use subdiff_core::stepper::Snapshots;
use subdiff_core::{
    CorrectionConfig, ExpSumApprox, GeneratingFunction, ProblemSpec, Reaction, ScalarMode,
    SchemeConfig,
};

/// `D^alpha u = -u`, `u(0) = 1` on `(0, 1]` with `n_steps` steps and one
/// correction, plus a fast-history approximation built for it.
pub fn scalar_setup(alpha: f64, n_steps: usize) -> (ProblemSpec, SchemeConfig, ExpSumApprox) {
    let op = Arc::new(ScalarMode::new(-1.0).expect("valid eigenvalue"));
    let problem = ProblemSpec::new(op, Reaction::Zero, vec![1.0], 1.0).expect("valid problem");
    let scheme = SchemeConfig::for_problem(
        &problem,
        GeneratingFunction::fbdf2(alpha).expect("valid order"),
        CorrectionConfig::multiples_of(alpha, 1).expect("valid exponents"),
        1.0 / n_steps as f64,
    )
    .expect("valid scheme")
    .with_snapshots(Snapshots::Final);
    let approx = build_for_scheme(&scheme, 1e-10).expect("approximation");
    (problem, scheme, approx)
}
