use hnf_core::data::{make_synthetic_blobs, Dataset, Split};
use hnf_core::layers::{expand_rows, pair_distance_report, HnfNetwork};
use hnf_core::linalg::Matrix;
use hnf_core::matrixgen::{make_random_orthonormal, make_raw_gaussian, WeightKind, WeightMatrix};
use hnf_core::solvers::{
    admm_constrained_ls, elm_features, elm_solve, epsilon_first_layer, epsilon_next_layer, least_squares,
    Activation, AdmmConfig, OutputMap, EPSILON_FLOOR,
};
use hnf_core::trainer::{
    build_untrained, evaluate, recomputed_train_cost, train, verify_invariants, verify_model, EpsSchedule, Front,
    TrainConfig, TrainedModel, CHECK_LOWER,
};
use hnf_core::Error;

fn blobs() -> Dataset {
    make_synthetic_blobs(8, 3, 500, 3.0, 7).unwrap()
}

fn cfg(n1: usize, depth: usize) -> TrainConfig {
    TrainConfig {
        n1,
        depth,
        ..TrainConfig::default()
    }
}

#[test]
fn scalar_constrained_problem() {
    let y = Matrix::from_rows(&[[2.0]]);
    let t = Matrix::from_rows(&[[4.0]]);
    let o = admm_constrained_ls(&y, &t, 1.0, &AdmmConfig::default()).unwrap();
    assert!((o.matrix[(0, 0)] - 1.0).abs() < 1e-9);
    assert!((o.train_cost - 4.0).abs() < 1e-8);
}

#[test]
fn inactive_constraint_returns_least_squares() {
    let d = blobs();
    let (y, t) = (d.train_x(), d.train_t());
    let ls = least_squares(&y, &t, 0.0).unwrap();
    let o = admm_constrained_ls(&y, &t, 2.0 * ls.norm_sq(), &AdmmConfig::default()).unwrap();
    assert!(o.matrix.max_abs_diff(&ls.matrix) <= 1e-4);
}

#[test]
fn active_constraint_hits_the_boundary() {
    let d = blobs();
    let (y, t) = (d.train_x(), d.train_t());
    let ls = least_squares(&y, &t, 0.0).unwrap();
    let eps = 0.01 * ls.norm_sq();
    let o = admm_constrained_ls(&y, &t, eps, &AdmmConfig::default()).unwrap();
    assert!((o.norm_sq() - eps).abs() <= 1e-3 * eps);
}

#[test]
fn epsilon_for_orthonormal_weights_doubles_the_norm() {
    let o = Matrix::from_rows(&[[1.0, 0.5, 0.0], [0.0, -1.0, 0.0]]);
    assert!((o.frobenius_norm_sq() - 2.25).abs() < 1e-15);
    let prev = OutputMap {
        matrix: o.scaled((1.5f64 / 2.25).sqrt()),
        epsilon: f64::INFINITY,
        train_cost: 0.0,
        layer_index: 0,
        admm: None,
    };
    let w = make_random_orthonormal(5, 3, 2).unwrap();
    assert!((epsilon_next_layer(&prev, &w).unwrap() - 3.0).abs() < 1e-10);
    let zero = OutputMap {
        matrix: Matrix::zeros(2, 3),
        ..prev
    };
    assert_eq!(epsilon_first_layer(&zero, &w).unwrap(), EPSILON_FLOOR);
}

#[test]
fn elm_feature_examples() {
    let x = Matrix::from_rows(&[[0.0, 1.0, 2.0], [3.0, 0.5, 0.0]]);
    let eye = WeightMatrix::from_parts(Matrix::identity(2), WeightKind::RawGaussian, Some(0)).unwrap();
    let t = Matrix::from_rows(&[[1.0, 0.0, 1.0]]);
    let (f, map) = elm_solve(&eye, &x, &t, Activation::Relu).unwrap();
    assert_eq!(f, x);
    assert_eq!(map.matrix, least_squares(&x, &t, 0.0).unwrap().matrix);
    let w = make_raw_gaussian(4, 2, 1).unwrap();
    let s = elm_features(&w, &Matrix::zeros(2, 3), Activation::Sigmoid).unwrap();
    assert!(s.as_slice().iter().all(|&v| v == 0.5));
}

#[test]
fn random_features_fit_better_than_raw_inputs() {
    let d = make_synthetic_blobs(16, 10, 2000, 2.0, 3).unwrap();
    let (x, t) = (d.train_x(), d.train_t());
    let ls = least_squares(&x, &t, 0.0).unwrap();
    let w1 = make_raw_gaussian(250, 16, 9).unwrap();
    let (_, elm) = elm_solve(&w1, &x, &t, Activation::Relu).unwrap();
    assert!(elm.train_cost < ls.train_cost, "{} vs {}", elm.train_cost, ls.train_cost);
}

#[test]
fn blobs_accuracy_tracks_separation() {
    let far = make_synthetic_blobs(8, 3, 600, 10.0, 1).unwrap();
    let (model, report) = train(&far, &cfg(8, 1)).unwrap();
    assert!(report.baseline.train_acc >= 0.95);
    assert!(evaluate(&model, &far, 0, Split::Train).unwrap().accuracy >= 0.95);

    let flat = make_synthetic_blobs(8, 3, 600, 0.0, 1).unwrap();
    let (_, report) = train(&flat, &cfg(8, 1)).unwrap();
    assert!((report.baseline.test_acc - 1.0 / 3.0).abs() <= 0.1, "{}", report.baseline.test_acc);
}

#[test]
fn blobs_costs_fall_through_three_layers() {
    let data = blobs();
    let (model, report) = train(&data, &cfg(16, 3)).unwrap();
    assert!(report.monotonicity_certified);
    let costs = report.train_costs();
    assert_eq!(costs.len(), 4);
    for w in costs.windows(2) {
        assert!(w[1] < w[0], "{costs:?}");
    }
    assert_eq!(
        report.records().map(|r| r.nodes_cumulative).collect::<Vec<_>>(),
        vec![0, 32, 32 + 64, 32 + 64 + 128]
    );
    for l in 0..=3 {
        let recomputed = recomputed_train_cost(&model, &data, l).unwrap();
        let eval = evaluate(&model, &data, l, Split::Train).unwrap();
        let reported = costs[l];
        assert!((recomputed - reported).abs() <= 1e-9 * reported);
        assert!((eval.cost - reported).abs() <= 1e-9 * reported);
    }
}

#[test]
fn single_layer_is_one_constrained_solve() {
    let data = blobs();
    let c = cfg(10, 1);
    let (model, report) = train(&data, &c).unwrap();
    let (x, t) = (data.train_x(), data.train_t());
    let ls = least_squares(&x, &t, 0.0).unwrap();
    let w1 = make_random_orthonormal(10, 8, hnf_core::matrixgen::derive_seed(c.seed, 1)).unwrap();
    assert_eq!(model.network.layers()[0].weight(), &w1);
    let eps = epsilon_first_layer(&ls, &w1).unwrap();
    let y = expand_rows(&w1.matrix().matmul(&x));
    let direct = admm_constrained_ls(&y, &t, eps, &c.admm).unwrap();
    assert_eq!(report.per_layer[0].epsilon, eps);
    assert!((report.per_layer[0].train_cost - direct.train_cost).abs() <= 1e-12);
}

#[test]
fn schedules_are_consistent() {
    let data = blobs();
    let (exact_model, exact) = train(&data, &cfg(8, 4)).unwrap();
    for (k, r) in exact.per_layer.iter().enumerate() {
        let prev = exact_model.maps[k].norm_sq();
        assert!((r.epsilon - 2.0 * prev).abs() <= 1e-10 * r.epsilon);
    }
    let dbl_cfg = TrainConfig {
        eps_schedule: EpsSchedule::Doubling,
        ..cfg(8, 4)
    };
    let (_, dbl) = train(&data, &dbl_cfg).unwrap();
    let e1 = dbl.per_layer[0].epsilon;
    assert_eq!(e1, exact.per_layer[0].epsilon);
    for (k, r) in dbl.per_layer.iter().enumerate() {
        assert_eq!(r.epsilon, e1 * (1u64 << k) as f64);
        assert!(r.epsilon >= r.certificate.unwrap().epsilon_exact);
    }
    assert!(dbl.monotonicity_certified);
}

#[test]
fn training_is_deterministic() {
    let data = blobs();
    let (_, a) = train(&data, &cfg(9, 3)).unwrap();
    let (_, b) = train(&data, &cfg(9, 3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn untrained_network_matches_trained_weights() {
    let data = blobs();
    for elm in [false, true] {
        let c = TrainConfig {
            elm_front: elm,
            weight_kind: WeightKind::RawGaussian,
            ..cfg(12, 3)
        };
        let (model, _) = train(&data, &c).unwrap();
        let (front, net) = build_untrained(&c, data.p()).unwrap();
        assert_eq!(front, model.front);
        assert_eq!(net, model.network);
    }
}

#[test]
fn elm_mode_numbering() {
    let data = blobs();
    let c = TrainConfig {
        elm_front: true,
        ..cfg(40, 3)
    };
    let (model, report) = train(&data, &c).unwrap();
    assert!(matches!(model.front, Front::Elm { .. }));
    assert_eq!(report.baseline.layer, 1);
    assert_eq!(report.per_layer.iter().map(|r| r.layer).collect::<Vec<_>>(), vec![2, 3]);
    assert_eq!(
        report.records().map(|r| r.nodes_cumulative).collect::<Vec<_>>(),
        vec![40, 40 + 80, 40 + 80 + 160]
    );
    assert_eq!(model.depth(), 3);
    let e0 = evaluate(&model, &data, 0, Split::Test).unwrap();
    let e1 = evaluate(&model, &data, 1, Split::Test).unwrap();
    assert_eq!(e0, e1);
    assert!(matches!(evaluate(&model, &data, 4, Split::Test), Err(Error::State(_))));
}

#[test]
fn config_preconditions() {
    let data = blobs();
    assert!(matches!(train(&data, &cfg(4, 2)), Err(Error::Config(_))));
    assert!(matches!(train(&data, &cfg(8, 0)), Err(Error::Config(_))));
    let bad = TrainConfig {
        weight_kind: WeightKind::RawGaussian,
        eps_schedule: EpsSchedule::Doubling,
        ..cfg(8, 2)
    };
    assert!(matches!(train(&data, &bad), Err(Error::Config(_))));
}

#[test]
fn memory_budget_names_the_layer() {
    let data = blobs();
    let c = TrainConfig {
        memory_budget: 4 << 20,
        ..cfg(8, 8)
    };
    match train(&data, &c) {
        Err(Error::Resource { layer, required, budget }) => {
            assert!(layer > 1 && layer <= 8);
            assert!(required > budget);
        }
        other => panic!("expected a resource error, got {other:?}"),
    }
}

#[test]
fn evaluate_examples() {
    let x = Matrix::from_fn(2, 10, |i, j| if (j % 2) == i { 1.0 } else { 0.0 });
    let labels: Vec<usize> = (0..10).map(|j| j % 2).collect();
    let data = Dataset::unsplit("toy", x, labels, 2).unwrap();
    let model = |m: Matrix| TrainedModel {
        front: Front::Raw,
        network: HnfNetwork::new(m.cols(), Vec::new()).unwrap(),
        maps: vec![OutputMap {
            matrix: m,
            epsilon: f64::INFINITY,
            train_cost: 0.0,
            layer_index: 0,
            admm: None,
        }],
        standardizer: None,
    };
    assert_eq!(evaluate(&model(Matrix::identity(2)), &data, 0, Split::Train).unwrap().accuracy, 1.0);

    let x = Matrix::from_fn(3, 52, |i, j| (i + j) as f64);
    let labels: Vec<usize> = (0..52).map(|j| (j * 5) % 26).collect();
    let freq0 = labels.iter().filter(|&&l| l == 0).count() as f64 / 52.0;
    let data = Dataset::unsplit("zeros", x, labels, 26).unwrap();
    let acc = evaluate(&model(Matrix::zeros(26, 3)), &data, 0, Split::Train).unwrap().accuracy;
    assert_eq!(acc, freq0);
}

#[test]
fn trained_network_passes_invariant_checks() {
    let data = blobs();
    let (model, _) = train(&data, &cfg(8, 3)).unwrap();
    let r = verify_model(&model, &data, 300, 4).unwrap();
    assert!(r.all_passed(), "{r:?}");
    assert!(r.get(CHECK_LOWER).unwrap().worst_margin >= 0.0);
    assert!(matches!(verify_model(&model, &data, 0, 4), Err(Error::Precondition(_))));

    let x = data.train_x().column(0);
    let d = pair_distance_report(&model.network, &x, &x).unwrap();
    assert_eq!(d.input_dist_sq, 0.0);
    assert!(d.per_layer_dist_sq.iter().all(|&v| v == 0.0));
}

#[test]
fn gaussian_network_skips_orthonormal_checks() {
    let c = TrainConfig {
        weight_kind: WeightKind::RawGaussian,
        ..cfg(10, 2)
    };
    let (_, net) = build_untrained(&c, 8).unwrap();
    let r = verify_invariants(&net, &blobs().train_x(), 50, 1).unwrap();
    assert!(r.all_passed());
    assert!(!r.get(CHECK_LOWER).unwrap().applicable);
}
