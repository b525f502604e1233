//! Analytic gradients against central differences.

use fairclass::optim::assemble_problem;
use fairclass::solver::numeric_gradient;
use fairclass::synth::{gen_mixed, gen_regular, SynthSpec};
use fairclass::{ConstraintSet, Dataset, Family, ModelSpec, Smoothing};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const POINTS: usize = 20;
const TOL: f64 = 1e-6;
const STEP: f64 = 1e-6;

fn regular(family: Family) -> Dataset<f64> {
    let spec = SynthSpec { split_frac: 0.5, ..SynthSpec::regular(family, 300, 11) };
    gen_regular(&spec).unwrap().train
}

fn mixed(family: Family) -> Dataset<f64> {
    let spec = SynthSpec { split_frac: 0.5, k: Some(6), ..SynthSpec::mixed(family, 300, 11) };
    gen_mixed(&spec).unwrap().train
}

fn rel_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let diff = (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    diff / scale
}

/// Checks the objective and every constraint term at random points.
fn check(family: Family, constraint: ConstraintSet, d: &Dataset<f64>, smoothing: Smoothing<f64>) {
    let spec = ModelSpec::new(family, constraint, &["s"]).with_mu(0.7).with_lambda(1.3);
    let p = assemble_problem(&spec, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for point in 0..POINTS {
        let theta: Array1<f64> = (0..p.n_params()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, grad) = p.objective(&theta, smoothing);
        let fd = numeric_gradient(|t| p.objective(t, smoothing).0, &theta, STEP);
        let e = rel_err(&grad, &fd);
        assert!(e <= TOL, "{family:?} objective point {point}: rel err {e:e}");
        for (k, (_, grad)) in p.term_values(&theta, smoothing).into_iter().enumerate() {
            let fd = numeric_gradient(|t| p.term_values(t, smoothing)[k].0, &theta, STEP);
            let e = rel_err(&grad, &fd);
            assert!(e <= TOL, "{family:?} {constraint:?} term {k} point {point}: rel err {e:e}");
        }
    }
}

#[test]
fn logistic_objective() {
    let d = regular(Family::Lr);
    check(Family::Lr, ConstraintSet::None, &d, Smoothing::Exact);
}

#[test]
fn svm_objective_smoothed() {
    let d = regular(Family::Svm);
    for tau in [1e-2, 1e-3] {
        check(Family::Svm, ConstraintSet::None, &d, Smoothing::Softplus(tau));
    }
}

#[test]
fn mixed_logistic_objective() {
    let d = mixed(Family::Lr);
    check(Family::Melr, ConstraintSet::None, &d, Smoothing::Exact);
}

#[test]
fn mixed_svm_objective_smoothed() {
    let d = mixed(Family::Svm);
    check(Family::Mesvm, ConstraintSet::None, &d, Smoothing::Softplus(1e-2));
}

#[test]
fn constraint_terms_smoothed() {
    let d = regular(Family::Lr);
    for constraint in [ConstraintSet::Di, ConstraintSet::Dm] {
        check(Family::Lr, constraint, &d, Smoothing::Softplus(1e-2));
    }
    let d = mixed(Family::Lr);
    check(Family::Melr, ConstraintSet::Dm, &d, Smoothing::Softplus(1e-2));
}
