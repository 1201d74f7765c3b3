use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparsepath::model::{GlmProblem, Loss};
use sparsepath::path::{follow_path, EventKind, PathOptions, Termination};
use sparsepath::penalty::PenaltySpec;

fn problem(seed: u64) -> GlmProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (40, 8);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = DVector::from_fn(p, |j, _| if j < 3 { 2.0 } else { 0.0 });
    let y = &x * &beta + DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    GlmProblem::all_penalized(x, y, Loss::Gaussian).unwrap()
}

/// Paths asked to stop at an arbitrary `rho_min` land on it exactly without stepping past it.
#[test]
fn path_ends_exactly_at_requested_rho() {
    let prob = problem(3);
    let specs = [
        PenaltySpec::power(0.5).unwrap(),
        PenaltySpec::power(1.0).unwrap(),
        PenaltySpec::log(2.0).unwrap(),
        PenaltySpec::mcplus(2.0).unwrap(),
    ];
    for spec in &specs {
        let full = follow_path(&prob, spec, &PathOptions::default()).unwrap();
        let rho_max = full.samples[0].rho;
        for k in (1..=120).step_by(7) {
            let frac = 0.9 * 0.96f64.powi(k);
            let target = frac * rho_max;
            let opts = PathOptions { rho_min: Some(target), ..PathOptions::default() };
            let path = follow_path(&prob, spec, &opts).unwrap();
            let last = path.samples.last().unwrap();
            assert_eq!(path.termination, Termination::RhoMin, "{spec} target {target}");
            assert_eq!(last.rho, target, "{spec}");
            assert!(path.samples.iter().all(|s| s.rho >= target));
            assert!(
                !path.events.iter().any(|e| e.rho < target
                    || (matches!(e.kind, EventKind::HessianSingular) && e.rho < target * (1.0 + 1e-6))),
                "{spec} target {target}: {:?}",
                path.events
            );
        }
    }
}
