use proptest::prelude::*;
use stabenc::optimize::{minimize, train, wrap_angle, Method, OptimizerConfig, Trace};
use stabenc::qnn::{evaluate, Architecture, LabeledState, QnnModel};
use stabenc::sim::StateVector;
use stabenc::Result;
use std::f64::consts::PI;

fn quadratic(center: Vec<f64>, scale: Vec<f64>) -> impl FnMut(&[f64]) -> Result<f64> {
    move |t: &[f64]| {
        Ok(t.iter()
            .zip(&center)
            .zip(&scale)
            .map(|((x, c), s)| s * (x - c).powi(2))
            .sum())
    }
}

fn config(method: Method) -> OptimizerConfig {
    OptimizerConfig {
        method,
        ..OptimizerConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn converges_on_convex_quadratics(
        center in prop::collection::vec(-2.0..2.0f64, 1..6),
        scale_seed in prop::collection::vec(0.5..4.0f64, 6),
        cd in any::<bool>(),
    ) {
        let d = center.len();
        let scale = scale_seed[..d].to_vec();
        let method = if cd { Method::CoordinateDescent } else { Method::NelderMead };
        let r = minimize(quadratic(center.clone(), scale), d, &config(method)).unwrap();
        prop_assert!(r.cost < 1e-6, "cost {}", r.cost);
        for (x, c) in r.theta.iter().zip(&center) {
            prop_assert!((x - c).abs() < 2e-3);
        }
    }

    #[test]
    fn trace_is_monotone_and_replays(
        center in prop::collection::vec(-3.0..3.0f64, 2..5),
        seed in any::<u64>(),
        budget in 1usize..200,
    ) {
        let d = center.len();
        let cfg = OptimizerConfig { max_iterations: budget, perturbation: 0.3, rng_seed: seed, ..OptimizerConfig::default() };
        // a bumpy objective keeps the simplex busy
        let f = |c: Vec<f64>| move |t: &[f64]| -> Result<f64> {
            Ok(t.iter().zip(&c).map(|(x, c)| (x - c).powi(2) + 0.3 * (3.0 * x).sin()).sum())
        };
        let a = minimize(f(center.clone()), d, &cfg).unwrap();
        let b = minimize(f(center), d, &cfg).unwrap();
        prop_assert!(a.iterations <= budget);
        // row 0 is the starting point
        prop_assert_eq!(a.trace.rows.len(), a.iterations + 1);
        prop_assert_eq!(a.trace.rows[0].iteration, 0);
        for w in a.trace.rows.windows(2) {
            prop_assert!(w[1].cost_best <= w[0].cost_best);
            prop_assert_eq!(w[1].iteration, w[0].iteration + 1);
        }
        if let Some(last) = a.trace.rows.last() {
            prop_assert_eq!(last.cost_best, a.cost);
        }
        prop_assert_eq!(&a.theta, &b.theta);
        prop_assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn wrap_angle_lands_in_half_open_interval(t in -100.0..100.0f64) {
        let w = wrap_angle(t);
        prop_assert!(w > -PI && w <= PI);
        prop_assert!(((t - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((t - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
    }
}

#[test]
fn trace_csv_round_trip() {
    let r = minimize(
        quadratic(vec![1.0, -1.0], vec![1.0, 2.0]),
        2,
        &config(Method::NelderMead),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    r.trace.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("iteration,cost_best,cost_current,wall_ms\n"));
    assert_eq!(Trace::load(&path).unwrap(), r.trace);
}

/// Basis states labelled by odd parity: θ = 0 gets every sample wrong, a π
/// rotation on any single qubit gets every sample right.
fn odd_parity_set(n: usize) -> Vec<LabeledState> {
    (0..1usize << n)
        .map(|i| LabeledState {
            state: StateVector::basis(n, i).unwrap(),
            label: (i.count_ones() % 2) as u8,
        })
        .collect()
}

#[test]
fn training_separates_a_separable_set() {
    let set = odd_parity_set(4);
    let template = QnnModel::new(Architecture::SingleQp, 4).unwrap();
    assert_eq!(evaluate(&template, &set).unwrap().accuracy, 0.0);
    for method in [Method::NelderMead, Method::CoordinateDescent] {
        let out = train(&template, &set, &config(method)).unwrap();
        let m = evaluate(&out.model, &set).unwrap();
        assert_eq!(m.accuracy, 1.0, "{method:?}");
        assert!(
            out.result.cost < 1e-8,
            "{method:?} cost {}",
            out.result.cost
        );
        assert!(out.model.theta.iter().all(|t| *t > -PI && *t <= PI));
        assert_eq!(out.model.training_meta.train_size, 16);
    }
}

#[test]
fn zero_budget_keeps_template() {
    let set = odd_parity_set(2);
    let template = QnnModel::with_theta(Architecture::SingleQp, 2, vec![7.0, -9.0]).unwrap();
    let cfg = OptimizerConfig {
        max_iterations: 0,
        ..OptimizerConfig::default()
    };
    let out = train(&template, &set, &cfg).unwrap();
    assert_eq!(out.model.theta, vec![7.0, -9.0]);
    assert_eq!(out.result.trace.rows.len(), 1);
    assert_eq!(out.result.iterations, 0);
}

#[test]
fn batched_cost_matches_full_cost() {
    let set = odd_parity_set(3);
    let model = QnnModel::with_theta(Architecture::SingleQp, 3, vec![0.3, -1.1, 2.0]).unwrap();
    let full = stabenc::qnn::cost(&model, &set).unwrap();
    for b in [1, 3, 8, 100] {
        let batched = stabenc::optimize::batched_cost(&model, &set, Some(b)).unwrap();
        assert!((batched - full).abs() < 1e-14, "batch {b}");
    }
}
