mod common;

use approx::assert_relative_eq;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{grid_minimum, lad_vertex_minimum, lad_vertices, random_instance, reference_minimum, Instance, RefLoss};
use mest::penalties::lasso_weights;
use mest::simgen::gen_dataset;
use mest::solver::{fit_penalized, fit_penalized_from, fit_unpenalized, kkt_residual, mean_loss, objective};
use mest::{ErrorDist, LossSpec, PenaltyWeights, ScenarioConfig, SolveOptions};

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn lad_instance_matches_exhaustive_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let y: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
    let inst = Instance {
        rows,
        y,
        w: vec![0.3, 0.7],
        loss: RefLoss::Lad,
    };
    let fit = fit_penalized(&inst.dataset(), &LossSpec::lad(), &inst.weights(), &opts()).unwrap();
    assert!(fit.converged);
    let (grid_best, _) = grid_minimum(&inst, 5.0);
    let ours = inst.objective(fit.beta.as_slice());
    assert!(ours <= grid_best + 1e-3, "{ours} vs grid {grid_best}");
    // the optimum of a piecewise-linear objective is attained at a vertex
    let vertex_best = lad_vertices(&inst)
        .iter()
        .map(|v| inst.objective(v))
        .fold(f64::INFINITY, f64::min);
    assert_relative_eq!(ours, vertex_best, epsilon = 1e-10);
}

#[test]
fn restarts_reach_the_same_objective() {
    let cfg = ScenarioConfig::new(100, ErrorDist::StudentT5, 3);
    let data = gen_dataset(&cfg, 0).unwrap().data;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for loss in [
        LossSpec::lad(),
        LossSpec::huber(1.0).unwrap(),
        LossSpec::quantile(0.25).unwrap(),
    ] {
        let w = PenaltyWeights::new(DVector::from_fn(data.p(), |_, _| rng.random_range(0.0..0.1))).unwrap();
        let base = fit_penalized(&data, &loss, &w, &opts()).unwrap();
        assert!(base.converged);
        for _ in 0..3 {
            let init = DVector::from_fn(data.p(), |_, _| rng.random_range(-4.0..4.0));
            let other = fit_penalized_from(&data, &loss, &w, &opts(), Some(&init)).unwrap();
            assert!(other.converged);
            assert_relative_eq!(other.objective, base.objective, epsilon = 1e-9, max_relative = 1e-9);
        }
    }
}

#[test]
fn half_quantile_with_half_weights_solves_lad() {
    let cfg = ScenarioConfig::new(200, ErrorDist::NormalMixture, 11);
    let data = gen_dataset(&cfg, 0).unwrap().data;
    let w = lasso_weights(0.05, data.p()).unwrap();
    let lad = fit_penalized(&data, &LossSpec::lad(), &w, &opts()).unwrap();
    let q = fit_penalized(
        &data,
        &LossSpec::quantile(0.5).unwrap(),
        &w.scaled(0.5).unwrap(),
        &opts(),
    )
    .unwrap();
    assert!(lad.converged && q.converged);
    assert_relative_eq!(2.0 * q.objective, lad.objective, epsilon = 1e-10, max_relative = 1e-10);
}

#[test]
fn zero_weights_reduce_to_unpenalized() {
    let cfg = ScenarioConfig::new(100, ErrorDist::StdNormal, 2);
    let data = gen_dataset(&cfg, 0).unwrap().data;
    for loss in [LossSpec::lad(), LossSpec::least_squares(), LossSpec::lq(1.5).unwrap()] {
        let pen = fit_penalized(&data, &loss, &PenaltyWeights::zeros(data.p()), &opts()).unwrap();
        let unpen = fit_unpenalized(&data, &loss, &opts()).unwrap();
        assert_relative_eq!(pen.objective, unpen.objective, epsilon = 1e-10, max_relative = 1e-9);
    }
}

#[test]
fn fitted_loss_grows_with_the_penalty() {
    let cfg = ScenarioConfig::new(200, ErrorDist::StdNormal, 4);
    let data = gen_dataset(&cfg, 0).unwrap().data;
    for loss in [LossSpec::lad(), LossSpec::huber(1.345).unwrap()] {
        let mut last = 0.0;
        for lambda in [0.0, 0.01, 0.05, 0.1, 0.3, 1.0, 3.0] {
            let fit = fit_penalized(&data, &loss, &lasso_weights(lambda, data.p()).unwrap(), &opts()).unwrap();
            assert!(fit.converged);
            let m = mean_loss(&data, &loss, &fit.beta);
            assert!(m >= last - 1e-10, "{loss} lambda {lambda}: {m} < {last}");
            last = m;
        }
    }
}

#[test]
fn every_loss_certifies_on_simulated_data() {
    let cfg = ScenarioConfig::new(200, ErrorDist::StudentT5, 21);
    let data = gen_dataset(&cfg, 0).unwrap().data;
    let w = lasso_weights(0.02, data.p()).unwrap();
    for loss in ["lad", "ls", "huber:1.345", "quantile:0.75", "lq:1.5", "lq:1.2"] {
        let loss: LossSpec = loss.parse().unwrap();
        let fit = fit_penalized(&data, &loss, &w, &opts()).unwrap();
        assert!(fit.converged, "{loss} kkt {}", fit.kkt_residual);
        assert!(kkt_residual(&data, &loss, &w, &fit.beta) <= 1e-8);
        assert_relative_eq!(fit.objective, objective(&data, &loss, &w, &fit.beta));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_reference_minimum(seed in any::<u64>(), huber in any::<bool>(), c in 0.2f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let loss = if huber { RefLoss::Huber(c) } else { RefLoss::Lad };
        let inst = random_instance(&mut rng, loss);
        let data = inst.dataset();
        let w = inst.weights();
        let fit = fit_penalized(&data, &loss.spec(), &w, &opts()).unwrap();
        let ours = inst.objective(fit.beta.as_slice());
        let reference = reference_minimum(&inst);
        prop_assert!(ours <= reference + 1e-3, "ours {} reference {}", ours, reference);
        if fit.converged {
            prop_assert!(kkt_residual(&data, &loss.spec(), &w, &fit.beta) <= 1e-8);
        }
        // the library objective agrees with the independent evaluation
        prop_assert!((fit.objective - ours).abs() <= 1e-12 * (1.0 + ours));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // integer data put many kinks through the same points
    #[test]
    fn degenerate_lad_matches_vertex_enumeration(
        rows in proptest::collection::vec((-2i32..=2, -2i32..=2), 3..10),
        y in proptest::collection::vec(-3i32..=3, 10),
        w in (0usize..3, 0usize..3),
    ) {
        let n = rows.len();
        let inst = Instance {
            rows: rows.iter().map(|&(a, b)| vec![a as f64, b as f64]).collect(),
            y: y[..n].iter().map(|&v| v as f64).collect(),
            w: vec![w.0 as f64 * 0.25, w.1 as f64 * 0.25],
            loss: RefLoss::Lad,
        };
        let data = inst.dataset();
        let fit = fit_penalized(&data, &LossSpec::lad(), &inst.weights(), &opts()).unwrap();
        let ours = inst.objective(fit.beta.as_slice());
        let reference = reference_minimum(&inst);
        prop_assert!(ours <= reference + 1e-9, "ours {} reference {}", ours, reference);
        prop_assert!(fit.converged, "kkt {}", fit.kkt_residual);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degenerate_lad_in_more_dimensions(
        p in 3usize..=4,
        cells in proptest::collection::vec(-2i32..=2, 40),
        y in proptest::collection::vec(-3i32..=3, 8),
        w in proptest::collection::vec(0usize..3, 4),
        n in 4usize..=8,
    ) {
        let inst = Instance {
            rows: (0..n).map(|i| (0..p).map(|j| cells[i * p + j] as f64).collect()).collect(),
            y: y[..n].iter().map(|&v| v as f64).collect(),
            w: w[..p].iter().map(|&v| v as f64 * 0.25).collect(),
            loss: RefLoss::Lad,
        };
        let fit = fit_penalized(&inst.dataset(), &LossSpec::lad(), &inst.weights(), &opts()).unwrap();
        let ours = inst.objective(fit.beta.as_slice());
        let reference = lad_vertex_minimum(&inst);
        prop_assert!(ours <= reference + 1e-9, "ours {} reference {}", ours, reference);
        prop_assert!(fit.converged, "kkt {}", fit.kkt_residual);
    }
}

#[test]
fn degenerate_lad_regression() {
    let rows = [(-1, 0), (0, -1), (-2, -2), (0, 2), (1, 0), (1, 1), (0, 2), (2, -2)];
    let inst = Instance {
        rows: rows.iter().map(|&(a, b)| vec![a as f64, b as f64]).collect(),
        y: vec![-1.0, 1.0, -2.0, -2.0, 2.0, 2.0, -2.0, 2.0],
        w: vec![0.0, 0.0],
        loss: RefLoss::Lad,
    };
    let fit = fit_penalized(&inst.dataset(), &LossSpec::lad(), &inst.weights(), &opts()).unwrap();
    let ours = inst.objective(fit.beta.as_slice());
    let reference = reference_minimum(&inst);
    assert!(
        ours <= reference + 1e-9,
        "ours {ours} reference {reference} beta {:?}",
        fit.beta.as_slice()
    );
    assert!(fit.converged, "kkt {}", fit.kkt_residual);
}
