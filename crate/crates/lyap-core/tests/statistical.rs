//! Statistical cross-validation of the Monte Carlo estimators against
//! independent oracles: exact first-passage generating functions solved by
//! dense elimination, closed-form exponents, and pairs of estimators that
//! target the same quantity through different representations.

use lyap_core::exec::Sequential;
use lyap_core::exponents::{
    annealed_exponent_direct, annealed_exponent_localtime, hyperplane_exponent_martingale,
    hyperplane_exponent_mc, quenched_exponent, SolverEstimatorParams,
};
use lyap_core::lab::{example4_bound, example4_mc_crosscheck, laplace_limit_check};
use lyap_core::lattice::Direction;
use lyap_core::potential::{PotentialSpec, Scaling};
use lyap_core::rng::{derive_seed, TAG_PATH};
use lyap_core::walk::first_stop_time_capped;

/// Exact `E[z^{T_1}]` for the projection walk along `e_1`, by solving the
/// tridiagonal first-passage system on `(-L, q)` with absorbing truncation
/// far to the left. Independent of the walk engine and of the green solver.
///
/// In d = 1 the projection is the simple walk; in d = 2 it is the lazy walk
/// that stays put with probability 1/2.
fn laplace_t1_oracle(d: usize, q: i64, z: f64) -> f64 {
    assert!(d == 1 || d == 2);
    // f(x) = a (f(x-1) + f(x+1)) / 2 with f(q) = 1, f(-L) = 0
    let a = match d {
        1 => z,
        _ => 0.5 * z / (1.0 - 0.5 * z),
    };
    let decay = (1.0 - (1.0 - a * a).sqrt()) / a;
    // truncation error ~ decay^(2L)
    let mut l = 64i64;
    while decay.powi(2 * l as i32) > 1e-16 {
        l *= 2;
    }
    let n = (l + q + 1) as usize;
    // sites -L..=q, unknowns at -L+1..=q-1; forward sweep u_i = c_i u_{i+1}
    let mut c = vec![0.0f64; n];
    for i in 1..n - 1 {
        c[i] = (0.5 * a) / (1.0 - 0.5 * a * c[i - 1]);
    }
    let mut u = vec![0.0f64; n];
    u[n - 1] = 1.0;
    for i in (1..n - 1).rev() {
        u[i] = c[i] * u[i + 1];
    }
    u[l as usize] // position 0
}

#[test]
fn t1_laplace_transform_matches_dense_oracle_at_moderate_gamma() {
    // gamma = 0.25: threshold q = 2. Frozen from the generating function
    // ((1 - sqrt(1 - z^2))/z)^2 at z = e^{-1/4} and confirmed by the
    // elimination oracle.
    let frozen = 0.229_051_323_318_998_7;
    let oracle = laplace_t1_oracle(1, 2, (-0.25f64).exp());
    assert!((oracle - frozen).abs() < 1e-12, "oracle {oracle} vs frozen {frozen}");

    let paths = 40_000usize;
    let cap = 1u64 << 26;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for i in 0..paths {
        let s = match first_stop_time_capped(1, &Direction::axis(1, 0), 0.25, derive_seed(7, TAG_PATH, i as u64), cap)
        {
            Some(t) => (-0.25 * t as f64).exp(),
            None => 0.0,
        };
        sum += s;
        sumsq += s * s;
    }
    let mean = sum / paths as f64;
    let var = (sumsq / paths as f64 - mean * mean).max(0.0);
    let se = (var / paths as f64).sqrt();
    assert!(
        (mean - frozen).abs() <= 4.0 * se,
        "MC {mean} vs oracle {frozen} (se {se})"
    );
}

#[test]
fn t1_laplace_transform_matches_dense_oracle_in_d2() {
    let z = (-0.0625f64).exp();
    let oracle = laplace_t1_oracle(2, 4, z); // gamma = 1/16, threshold 4
    let paths = 30_000usize;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for i in 0..paths {
        let s = match first_stop_time_capped(2, &Direction::axis(2, 0), 0.0625, derive_seed(11, TAG_PATH, i as u64), 1 << 26)
        {
            Some(t) => (-0.0625 * t as f64).exp(),
            None => 0.0,
        };
        sum += s;
        sumsq += s * s;
    }
    let mean = sum / paths as f64;
    let var = (sumsq / paths as f64 - mean * mean).max(0.0);
    let se = (var / paths as f64).sqrt();
    assert!(
        (mean - oracle).abs() <= 4.0 * se,
        "MC {mean} vs oracle {oracle} (se {se})"
    );
}

#[test]
fn laplace_limit_of_first_slab_time_small_budget() {
    // Desk-scale version of the Brownian limit check; the full-budget run is
    // an acceptance criterion. Finite-gamma truth at gamma = 1e-4, c = 1/2
    // is 0.3678764 (elimination oracle), limit e^{-1} = 0.3678794.
    let rep = laplace_limit_check(
        1,
        &Direction::axis(1, 0),
        0.5,
        &[1e-2, 1e-4],
        20_000,
        5,
        1 << 40,
        &Sequential,
    )
    .unwrap();
    assert!((rep.target - (-1.0f64).exp()).abs() < 1e-15);
    assert!(rep.pass, "laplace limit check failed: {:?}", rep.points);
}

#[test]
fn hyperplane_mc_agrees_with_martingale_inverse() {
    let gamma = 0.25;
    let ell = Direction::axis(1, 0);
    let oracle = hyperplane_exponent_martingale(1, gamma, &ell).value;
    // arcosh(e^{1/4}) = 0.7369045906...
    assert!((oracle - 0.736_904_590_620_968_7).abs() < 1e-12);
    let est = hyperplane_exponent_mc(1, gamma, &ell, 20, 40, 20_000, 3, 1 << 30, &Sequential)
        .unwrap();
    assert!(
        (est.value - oracle).abs() <= 3.0 * est.stat_error + 2e-3,
        "MC {} +- {} vs oracle {}",
        est.value,
        est.stat_error,
        oracle
    );
    assert_eq!(est.censored_fraction, Some(0.0));
    // doubling the paths shrinks the error roughly like 1/sqrt(2)
    let est2 = hyperplane_exponent_mc(1, gamma, &ell, 20, 40, 40_000, 3, 1 << 30, &Sequential)
        .unwrap();
    let shrink = est2.stat_error / est.stat_error;
    assert!(
        (shrink - 0.5f64.sqrt()).abs() < 0.2,
        "error shrink factor {shrink} not near 1/sqrt(2)"
    );
}

#[test]
fn hyperplane_mc_handles_large_gamma() {
    // gamma = 5: a single slab dominates the cost and almost every path is
    // resolved by the weight floor rather than simulated to the far plane.
    let gamma = 5.0;
    let ell = Direction::axis(1, 0);
    let oracle = hyperplane_exponent_martingale(1, gamma, &ell).value;
    let est =
        hyperplane_exponent_mc(1, gamma, &ell, 2, 10, 60_000, 9, 1 << 24, &Sequential).unwrap();
    assert!(
        (est.value - oracle).abs() <= 3.0 * est.stat_error + 1e-3,
        "MC {} +- {} vs oracle {}",
        est.value,
        est.stat_error,
        oracle
    );
}

#[test]
fn localtime_estimator_matches_direct_average_on_bernoulli() {
    // Two independent routes to the same annealed exponent: exact disorder
    // integration along walk local times, and passage solves averaged over
    // sampled disorder.
    let spec =
        PotentialSpec::bernoulli(0.5, 0.0, 1.0).with_scaling(Scaling::GammaScaled { gamma: 0.05 });
    let ell = Direction::axis(1, 0);
    let lt = annealed_exponent_localtime(&spec, &ell, 20, 40, 30_000, 17, 1 << 24, &Sequential)
        .unwrap();
    let mut params = SolverEstimatorParams::new(20, 40, 400, 60);
    params.solve = lyap_core::green::SolveOptions::direct_1d();
    let direct = annealed_exponent_direct(&spec, &ell, &params, 23, &Sequential).unwrap();
    let sigma = (lt.stat_error.powi(2) + direct.stat_error.powi(2)).sqrt();
    assert!(
        (lt.value - direct.value).abs() <= 3.0 * sigma + 5e-3,
        "localtime {} +- {} vs direct {} +- {}",
        lt.value,
        lt.stat_error,
        direct.value,
        direct.stat_error
    );
}

#[test]
fn localtime_constant_spec_matches_closed_form() {
    // Point mass c: the score collapses to exp(-c H(k)) and the estimate
    // approaches arcosh(e^c) in d = 1.
    let spec = PotentialSpec::constant(0.25);
    let ell = Direction::axis(1, 0);
    let est =
        annealed_exponent_localtime(&spec, &ell, 10, 30, 30_000, 29, 1 << 24, &Sequential).unwrap();
    let oracle = 0.25f64.exp().acosh();
    assert!(
        (est.value - oracle).abs() <= 3.0 * est.stat_error + 3e-3,
        "localtime {} +- {} vs closed form {}",
        est.value,
        est.stat_error,
        oracle
    );
}

#[test]
fn quenched_solver_reproduces_d2_closed_form_at_desk_scale() {
    let spec = PotentialSpec::constant(0.5);
    let ell = Direction::axis(2, 0);
    let params = SolverEstimatorParams::new(8, 16, 1, 24);
    let est = quenched_exponent(&spec, &ell, &params, 0, &Sequential).unwrap();
    let oracle = (2.0 * 0.5f64.exp() - 1.0).acosh();
    assert!(
        (est.value - oracle).abs() < 2e-2,
        "quenched {} vs closed form {}",
        est.value,
        oracle
    );
}

#[test]
fn example4_direct_estimate_respects_the_closed_bound() {
    let gamma = 1e-3;
    let mut params = SolverEstimatorParams::new(10, 30, 400, 45);
    params.solve = lyap_core::green::SolveOptions::direct_1d();
    let (est, bound, pass) = example4_mc_crosscheck(gamma, &params, 31, &Sequential).unwrap();
    assert!((bound - example4_bound(gamma)).abs() < 1e-15);
    assert!(pass, "estimate {} undercuts bound {}", est.value, bound);
}
