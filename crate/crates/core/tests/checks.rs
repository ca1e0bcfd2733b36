use homm::checks::*;
use homm::cli::cmd_check_with;
use homm::discrepancy::gram_loss;
use homm::error::Result;
use homm::moments::FeatureBatch;

fn doubled_gram(s: &FeatureBatch, t: &FeatureBatch, centralize: bool) -> Result<f64> {
    gram_loss(s, t, centralize).map(|v| 2.0 * v)
}

#[test]
fn correct_build_passes_every_property() {
    let mut out = Vec::new();
    let code = cmd_check_with(&CheckRoutes::default(), 0, &mut out);
    let text = String::from_utf8(out).unwrap();
    assert_eq!(code, 0, "{text}");
    assert!(!text.contains("FAIL"));
    // equivalences, Monte-Carlo, and one line per gradient case
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 16, "{text}");
    assert!(text.lines().all(|l| !l.starts_with("PASS") || l.contains("measured")));
}

#[test]
fn doubled_gram_scale_fails_equivalence_b() {
    let routes = CheckRoutes { gram_loss: doubled_gram, ..CheckRoutes::default() };
    let results = run_checks(&routes, 0);
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    assert_eq!(failed, vec!["equivalence B"]);
    let b = results.iter().find(|r| r.name == "equivalence B").unwrap();
    assert!((b.measured - 0.5).abs() < 1e-12, "relative error of a doubled value is 1/2");

    let mut out = Vec::new();
    assert_ne!(cmd_check_with(&routes, 0, &mut out), 0);
    assert!(String::from_utf8(out).unwrap().contains("FAIL equivalence B"));
}

#[test]
fn biased_sampled_route_fails_equivalence_c() {
    fn biased(s: &FeatureBatch, t: &FeatureBatch, idx: &homm::moments::IndexMatrix) -> Result<f64> {
        homm::discrepancy::homm_sampled(s, t, idx).map(|v| v * 1.01)
    }
    let routes = CheckRoutes { homm_sampled: biased, ..CheckRoutes::default() };
    let results = run_checks(&routes, 3);
    assert!(!results.iter().find(|r| r.name == "equivalence C").unwrap().passed);
    assert!(results.iter().find(|r| r.name == "equivalence A").unwrap().passed);
}

#[test]
fn agreement_handles_zero() {
    assert_eq!(agreement(0.0, 0.0), 0.0);
    assert_eq!(agreement(1.0, 1.0), 0.0);
    assert!((agreement(1.0, 2.0) - 0.5).abs() < 1e-15);
}
