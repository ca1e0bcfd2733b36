use homm::discrepancy::{ClassCenters, Discrepancy, KernelConfig, PseudoLabel, PseudoLabelAssignment};
use homm::moments::{sample_indices, MomentOrder};
use homm::network::*;
use homm::rng::SplitMix64;
use ndarray::Array2;

struct Fixture {
    net: MlpNetwork,
    xs: Array2<f64>,
    ys: Vec<usize>,
    xt: Array2<f64>,
}

fn fixture(sizes: &[usize], b: usize, seed: u64) -> Fixture {
    let net = MlpNetwork::new(sizes, seed).unwrap();
    let mut rng = SplitMix64::new(seed ^ 0xABCD);
    let d = sizes[0];
    let c = *sizes.last().unwrap();
    let xs = Array2::from_shape_fn((b, d), |_| rng.uniform(-1.0, 1.0));
    let xt = Array2::from_shape_fn((b, d), |_| rng.uniform(-1.0, 1.0) + 0.3);
    let ys = (0..b).map(|i| i % c).collect();
    Fixture { net, xs, ys, xt }
}

impl Fixture {
    fn batch(&self) -> StepBatch<'_> {
        StepBatch {
            source_inputs: self.xs.view(),
            source_labels: &self.ys,
            target_inputs: self.xt.view(),
        }
    }

    fn check(&self, config: &LossConfig<'_>, tolerance: f64) -> GradCheckReport {
        let batch = self.batch();
        let (_, grads) = backward(&self.net, &batch, config).unwrap();
        finite_diff_check(
            &self.net,
            |n| objective(n, &batch, config).unwrap().total,
            &grads,
            1e-5,
            tolerance,
        )
    }
}

fn assert_passes(name: &str, report: &GradCheckReport) {
    let worst = report
        .checks
        .iter()
        .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
        .unwrap();
    assert!(report.passed(), "{name}: worst {worst:?}");
}

#[test]
fn zero_weights_give_zero_gradients() {
    let f = fixture(&[4, 6, 8, 3], 4, 1);
    let idx = sample_indices(8, MomentOrder(3), 20, 1).unwrap();
    let config = LossConfig {
        source_weight: 0.0,
        discrepancy: Some(Discrepancy::Sampled { indices: &idx }),
        discrepancy_weight: 0.0,
        clustering: None,
        entropy_weight: 0.0,
    };
    let (_, grads) = backward(&f.net, &f.batch(), &config).unwrap();
    assert!(grads.flatten().iter().all(|&g| g == 0.0));
}

#[test]
fn source_loss_gradient_on_two_layer_net() {
    let f = fixture(&[3, 5, 4], 6, 2);
    let report = f.check(&LossConfig::source_only(), 1e-5);
    assert_passes("L_s", &report);
}

#[test]
fn sampled_discrepancy_gradient() {
    let f = fixture(&[4, 6, 8, 3], 4, 3);
    let idx = sample_indices(8, MomentOrder(3), 100, 4).unwrap();
    let config = LossConfig {
        source_weight: 0.0,
        discrepancy: Some(Discrepancy::Sampled { indices: &idx }),
        discrepancy_weight: 10.0,
        clustering: None,
        entropy_weight: 0.0,
    };
    assert_passes("λ_d·sampled", &f.check(&config, 1e-4));
}

#[test]
fn every_discrepancy_variant_in_isolation() {
    let f = fixture(&[4, 6, 8, 3], 4, 5);
    let idx = sample_indices(8, MomentOrder(3), 60, 6).unwrap();
    let kernel = KernelConfig::gaussian(0.5).unwrap();
    let variants = [
        Discrepancy::Full { order: MomentOrder(3) },
        Discrepancy::Full { order: MomentOrder(4) },
        Discrepancy::Group { order: MomentOrder(3), n_groups: 2 },
        Discrepancy::Sampled { indices: &idx },
        Discrepancy::Kernelized { indices: &idx, kernel },
        Discrepancy::LinearMmd,
        Discrepancy::Gram,
        Discrepancy::Coral,
    ];
    for d in variants {
        let config = LossConfig {
            source_weight: 0.0,
            discrepancy: Some(d),
            discrepancy_weight: 100.0,
            clustering: None,
            entropy_weight: 0.0,
        };
        assert_passes(&format!("{d:?}"), &f.check(&config, 1e-4));
    }
}

#[test]
fn clustering_and_entropy_terms() {
    let f = fixture(&[4, 6, 8, 3], 4, 7);
    let mut rng = SplitMix64::new(8);
    let centers =
        ClassCenters::new(Array2::from_shape_fn((3, 8), |_| rng.uniform(-0.5, 0.5)), 0.5).unwrap();
    let assignment = PseudoLabelAssignment::new(vec![
        PseudoLabel { row: 0, label: 2, confidence: 0.9 },
        PseudoLabel { row: 3, label: 0, confidence: 0.95 },
    ]);
    let clustering = LossConfig {
        source_weight: 0.0,
        discrepancy: None,
        discrepancy_weight: 0.0,
        clustering: Some(ClusteringTerm { weight: 1.0, centers: &centers, assignment: &assignment }),
        entropy_weight: 0.0,
    };
    assert_passes("L_dc", &f.check(&clustering, 1e-4));

    let entropy = LossConfig { entropy_weight: 1.0, ..LossConfig { source_weight: 0.0, ..LossConfig::source_only() } };
    assert_passes("L_ent", &f.check(&entropy, 1e-4));
}

#[test]
fn composite_objective_gradient() {
    let f = fixture(&[4, 6, 8, 3], 4, 9);
    let idx = sample_indices(8, MomentOrder(3), 50, 10).unwrap();
    let centers = ClassCenters::new(Array2::from_elem((3, 8), 0.1), 0.5).unwrap();
    let assignment = PseudoLabelAssignment::new(vec![PseudoLabel { row: 1, label: 1, confidence: 0.8 }]);
    for d in [
        Discrepancy::Full { order: MomentOrder(3) },
        Discrepancy::Kernelized { indices: &idx, kernel: KernelConfig::gaussian(0.2).unwrap() },
    ] {
        let config = LossConfig {
            source_weight: 1.0,
            discrepancy: Some(d),
            discrepancy_weight: 30.0,
            clustering: Some(ClusteringTerm { weight: 0.3, centers: &centers, assignment: &assignment }),
            entropy_weight: 0.1,
        };
        assert_passes("composite", &f.check(&config, 1e-4));
    }
}

#[test]
fn supervised_training_fits_separable_data() {
    let mut rng = SplitMix64::new(11);
    let n = 64;
    let x = Array2::from_shape_fn((n, 2), |_| rng.uniform(-1.0, 1.0));
    let y: Vec<usize> = x.rows().into_iter().map(|r| usize::from(r[0] + 0.5 * r[1] > 0.0)).collect();
    let mut net = MlpNetwork::new(&[2, 16, 8, 2], 3).unwrap();
    let mut opt = Adam::for_network(0.01, &net);
    let batch = StepBatch { source_inputs: x.view(), source_labels: &y, target_inputs: x.view() };
    let mut loss = f64::INFINITY;
    for _ in 0..2000 {
        let (l, g) = backward(&net, &batch, &LossConfig::source_only()).unwrap();
        loss = l.source;
        if loss < 0.05 {
            break;
        }
        opt.step(&mut net, &g).unwrap();
    }
    assert!(loss < 0.05, "L_s stuck at {loss}");
}

#[test]
fn overflowing_term_is_named() {
    // Saturated adapted layer: source features +1, target features -1, so the
    // linear MMD is 4 and any weight above f64::MAX / 4 overflows.
    let mut net = MlpNetwork::zeros(&[1, 1, 2]).unwrap();
    net.set_params(&[100.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let xs = Array2::from_elem((2, 1), 1.0);
    let xt = Array2::from_elem((2, 1), -1.0);
    let batch = StepBatch { source_inputs: xs.view(), source_labels: &[0, 1], target_inputs: xt.view() };
    let config = LossConfig {
        discrepancy: Some(Discrepancy::LinearMmd),
        discrepancy_weight: f64::MAX,
        ..LossConfig::source_only()
    };
    for err in [objective(&net, &batch, &config).unwrap_err(), backward(&net, &batch, &config).unwrap_err()] {
        assert!(err.to_string().contains("lambda_d * L_d"), "{err}");
    }
}
