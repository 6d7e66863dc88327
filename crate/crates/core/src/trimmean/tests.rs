use super::testing::{dp_treat_mean_suppressed, dp_trim_mean_suppressed};
use super::*;

fn vecs1(xs: &[f64]) -> Vec<Vector> {
    xs.iter().map(|&x| Vector::new(vec![x])).collect()
}

fn cfg(mu: f64, b: f64, r: u32, xi: f64) -> TrimMeanConfig {
    TrimMeanConfig::new(PrivacyBudget::new(mu).unwrap(), b, r, xi).unwrap()
}

fn cfg_inf(b: f64, r: u32, xi: f64) -> TrimMeanConfig {
    TrimMeanConfig::new(PrivacyBudget::infinite(), b, r, xi).unwrap()
}

/// Symmetric 10-point set whose partial sums cancel exactly in f64, so every
/// suppressed-noise center is exactly zero.
fn symmetric_points() -> Vec<Vector> {
    vecs1(&[1.0, -1.0, 0.75, -0.75, 0.5, -0.5, 0.25, -0.25, 0.125, -0.125])
}

fn dyadic_points() -> Vec<Vector> {
    vecs1(&[48.0, -48.0, 32.0, -32.0, 16.0, -16.0, 8.0, -8.0, 4.0, -4.0])
}

#[test]
fn constant_data_infinite_budget_is_exact() {
    let v = Vector::new(vec![0.1, -2.7, 3.3]);
    let data: Vec<Vector> = (0..7).map(|_| v.clone()).collect();
    let c = cfg_inf(2.0 * v.norm() + 1.0, 8, 0.05);
    let mut rng = RngStream::new(11, 0);
    let out = dp_trim_mean(&data, &c, &mut rng).unwrap();
    assert_eq!(out.m_dp.as_slice(), v.as_slice());
    assert_eq!(out.r_star, 8);
    assert_eq!(out.b_star, 0.0);
    assert!(out.total_spent().is_infinite());
}

#[test]
fn infinite_budget_threshold_keeps_all_users() {
    // tau = n and n_lb = n when mu = inf
    let data = symmetric_points();
    let mut rng = RngStream::new(3, 1);
    let out = dp_trim_mean(&data, &cfg_inf(1e6, 5, 0.1), &mut rng).unwrap();
    assert_eq!(out.n_lb, data.len() as f64);
}

// Hand-traced transcripts with suppressed noise: mu = 10, B = 1024, R = 10,
// xi = 0.05 give tau = 7.687492836306373 and n_lb = 5.3749856726127465; the
// symmetric data keep every center at exactly zero, so the round path is a
// pure function of the dyadic radii.

#[test]
fn golden_trace_full_path() {
    let out = dp_trim_mean_suppressed(&symmetric_points(), &cfg(10.0, 1024.0, 10, 0.05)).unwrap();
    assert!((out.n_lb - 5.3749856726127465).abs() < 1e-12);
    assert_eq!(out.r_star, 10);
    assert_eq!(out.m_dp.as_slice(), &[0.0]);
    assert_eq!(out.prev_center.as_slice(), &[0.0]);
    // final round: radius 1, strict set excludes the two points at +-1
    assert!((out.b_star - 0.052622040262505665).abs() < 1e-15);
    assert_eq!(out.rounds.len(), 11);
    assert!(out.rounds[..10].iter().all(|r| r.decision == RoundDecision::Refined));
    assert_eq!(out.rounds[10].decision, RoundDecision::FinalRound);
    assert_eq!(out.rounds[10].noisy_count, 10.0);
}

#[test]
fn golden_trace_early_exit() {
    let out = dp_trim_mean_suppressed(&dyadic_points(), &cfg(10.0, 1024.0, 10, 0.05)).unwrap();
    // round 5 counts 8 (<= keeps the +-32 pair), round 6 counts 6 < tau
    assert_eq!(out.r_star, 5);
    assert_eq!(out.m_dp.as_slice(), &[0.0]);
    assert_eq!(out.rounds.len(), 7);
    assert_eq!(out.rounds[5].noisy_count, 8.0);
    assert_eq!(out.rounds[6].noisy_count, 6.0);
    assert_eq!(out.rounds[6].decision, RoundDecision::EarlyExit);
    assert!((out.b_star - 1.4231597190512633).abs() < 1e-13);
}

#[test]
fn golden_trace_round_zero_abort() {
    let data = vecs1(&[10000.0, -10000.0, 10001.0, -10001.0, 10002.0, -10002.0]);
    let mut c = cfg(10.0, 1024.0, 10, 0.05);
    c.mu = PrivacyBudget::new(10.0).unwrap();
    let out = dp_trim_mean_suppressed(&data, &c).unwrap();
    assert_eq!(out.r_star, -1);
    // estimate falls back to the origin ball of radius 2B, which is empty
    assert_eq!(out.m_dp.as_slice(), &[0.0]);
    assert_eq!(out.prev_center.as_slice(), &[0.0]);
    let n_lb = 2.0 * (6.0 - 2.3125071636936268) - 6.0;
    assert!((out.n_lb - n_lb).abs() < 1e-12);
    let expected_b = 2.0 * 2048.0 / (2f64.sqrt() * out.n_lb) * (2f64.sqrt() / 10.0);
    assert!((out.b_star - expected_b).abs() < 1e-12);
}

#[test]
fn budget_ledger_telescopes_on_every_path() {
    let mu = 10.0;
    for data in [symmetric_points(), dyadic_points(), vecs1(&[9e9, -9e9, 8e9, -8e9])] {
        let out = dp_trim_mean_suppressed(&data, &cfg(mu, 1024.0, 10, 0.05)).unwrap();
        let spent = out.total_spent();
        assert!(
            (spent.mu() - mu).abs() < 1e-9,
            "path r*={} spent {} != {mu}",
            out.r_star,
            spent.mu()
        );
        assert!((out.config.total_budget.mu() - mu).abs() < 1e-12);
    }
}

#[test]
fn general_budget_specialization_matches_standard_run() {
    let data = dyadic_points();
    let c = cfg(2.0, 1024.0, 10, 0.05);
    let r_sqrt = (10f64).sqrt();
    let gb = GeneralBudget {
        mu_refine: PrivacyBudget::new(2.0 / (2.0 * r_sqrt)).unwrap(),
        mu_count: PrivacyBudget::new(2.0 / (2.0 * r_sqrt)).unwrap(),
        mu_final: PrivacyBudget::new(2.0 / std::f64::consts::SQRT_2).unwrap(),
    };
    let a = dp_trim_mean(&data, &c, &mut RngStream::new(77, 0)).unwrap();
    let b = dp_trim_mean_general(&data, &gb, 1024.0, 10, 0.05, &mut RngStream::new(77, 0)).unwrap();
    assert_eq!(a.m_dp.as_slice(), b.m_dp.as_slice());
    assert_eq!(a.r_star, b.r_star);
    assert_eq!(a.b_star, b.b_star);
    assert_eq!(a.n_lb, b.n_lb);
}

#[test]
fn general_budget_total_report() {
    let gb = GeneralBudget {
        mu_refine: PrivacyBudget::new(0.3).unwrap(),
        mu_count: PrivacyBudget::new(0.4).unwrap(),
        mu_final: PrivacyBudget::new(1.2).unwrap(),
    };
    let total = gb.total(10);
    let expected = (10.0 * 0.09 + 10.0 * 0.16 + 1.44f64).sqrt();
    assert!((total.mu() - expected).abs() < 1e-12);
}

#[test]
fn general_all_infinite_on_constant_data() {
    let v = Vector::new(vec![2.0, -3.0]);
    let data: Vec<Vector> = (0..5).map(|_| v.clone()).collect();
    let gb = GeneralBudget {
        mu_refine: PrivacyBudget::infinite(),
        mu_count: PrivacyBudget::infinite(),
        mu_final: PrivacyBudget::infinite(),
    };
    let out = dp_trim_mean_general(&data, &gb, 100.0, 6, 0.05, &mut RngStream::new(1, 1)).unwrap();
    assert_eq!(out.m_dp.as_slice(), v.as_slice());
    assert!(out.config.total_budget.is_infinite());
}

#[test]
fn determinism_bit_exact_replay() {
    let data = dyadic_points();
    let c = cfg(1.5, 1024.0, 10, 0.05);
    // n = 10 is below the sufficiency threshold at mu = 1.5; widen mu instead
    let c = TrimMeanConfig { mu: PrivacyBudget::new(8.0).unwrap(), ..c };
    let a = dp_trim_mean(&data, &c, &mut RngStream::new(123, 9)).unwrap();
    let b = dp_trim_mean(&data, &c, &mut RngStream::new(123, 9)).unwrap();
    assert_eq!(a.m_dp.as_slice(), b.m_dp.as_slice());
    assert_eq!(a.r_star, b.r_star);
    assert_eq!(a.b_star, b.b_star);
    let c2 = dp_trim_mean(&data, &c, &mut RngStream::new(123, 10)).unwrap();
    assert_ne!(a.m_dp.as_slice(), c2.m_dp.as_slice());
}

#[test]
fn radius_halves_and_r_star_in_range() {
    let out = dp_trim_mean_suppressed(&dyadic_points(), &cfg(10.0, 1024.0, 10, 0.05)).unwrap();
    for w in out.rounds.windows(2) {
        assert_eq!(w[1].radius, w[0].radius / 2.0);
    }
    assert!(out.r_star >= -1 && out.r_star <= 10);
}

#[test]
fn insufficient_users_is_structured() {
    let data = vecs1(&[1.0, 2.0, 3.0]);
    let err = dp_trim_mean(&data, &cfg(1.0, 100.0, 10, 1e-5), &mut RngStream::new(0, 0));
    match err {
        Err(Error::InsufficientUsers { n, required, tau }) => {
            assert_eq!(n, 3);
            assert!(required > 3.0);
            assert!(tau <= 1.0);
        }
        other => panic!("expected InsufficientUsers, got {other:?}"),
    }
}

#[test]
fn dimension_mismatch_rejected() {
    let data = vec![Vector::new(vec![1.0, 2.0]), Vector::new(vec![1.0])];
    assert!(matches!(
        dp_trim_mean(&data, &cfg_inf(10.0, 3, 0.05), &mut RngStream::new(0, 0)),
        Err(Error::InvalidInput(_))
    ));
}

// --- treated variant -------------------------------------------------------

#[test]
fn treated_all_labeled_infinite_budget_matches_plain() {
    // off-boundary data so the <= vs < tie rules cannot differ
    let data = vecs1(&[4.1, -4.1, 2.3, -2.3, 1.7, -1.7, 0.9, -0.9, 0.3, -0.3]);
    let labels = vec![1u8; data.len()];
    let c = cfg_inf(1000.0, 8, 0.05);
    let plain = dp_trim_mean(&data, &c, &mut RngStream::new(4, 0)).unwrap();
    let treated = dp_treat_mean(&data, &labels, &c, &mut RngStream::new(4, 1)).unwrap();
    assert_eq!(plain.m_dp.as_slice(), treated.m_dp.as_slice());
    assert_eq!(plain.r_star, treated.r_star);
}

#[test]
fn treated_unlabeled_points_never_enter() {
    // two z=0 users placed far outside B never affect the estimate
    let mut data = dyadic_points();
    let mut labels = vec![1u8; data.len()];
    data.push(Vector::new(vec![1e9]));
    data.push(Vector::new(vec![-8e9]));
    labels.extend([0u8, 0u8]);
    let out = dp_treat_mean_suppressed(&data, &labels, &cfg(10.0, 1024.0, 10, 0.05)).unwrap();
    assert_eq!(out.m_dp.as_slice(), &[0.0]);
}

#[test]
fn treated_golden_trace() {
    let mut data = dyadic_points();
    let mut labels = vec![1u8; data.len()];
    data.push(Vector::new(vec![1e9]));
    labels.push(0);
    let out = dp_treat_mean_suppressed(&data, &labels, &cfg(10.0, 1024.0, 10, 0.05)).unwrap();
    // strict count drops the +-32 pair one round earlier than the plain form
    assert!((out.n_lb - 4.7377934683143055).abs() < 1e-12);
    assert_eq!(out.r_star, 4);
    assert_eq!(out.m_dp.as_slice(), &[0.0]);
    assert!((out.b_star - 3.8207519427427123).abs() < 1e-13);
}

#[test]
fn treated_budget_ledger() {
    let mu = 10.0;
    let mut data = dyadic_points();
    let mut labels = vec![1u8; data.len()];
    data.push(Vector::new(vec![7e8]));
    labels.push(0);
    let out = dp_treat_mean_suppressed(&data, &labels, &cfg(mu, 1024.0, 10, 0.05)).unwrap();
    assert!((out.total_spent().mu() - mu).abs() < 1e-9);
    assert!((out.config.total_budget.mu() - mu).abs() < 1e-12);
}

#[test]
fn treated_mixed_groups_equals_subsample_trace() {
    // labeled users are the symmetric set; unlabeled users sit inside the
    // ball but must still be ignored
    let mut data = symmetric_points();
    let mut labels = vec![1u8; data.len()];
    data.push(Vector::new(vec![0.9]));
    data.push(Vector::new(vec![0.6]));
    labels.extend([0u8, 0u8]);
    let out = dp_treat_mean_suppressed(&data, &labels, &cfg(10.0, 1024.0, 10, 0.05)).unwrap();
    // the labeled subsample is symmetric, so the trace pins the mean at zero;
    // any leakage of the unlabeled 0.9/0.6 points would shift it
    assert_eq!(out.m_dp.as_slice(), &[0.0]);
}

#[test]
fn count_statistics_respect_tie_rules() {
    let data = vecs1(&[1.0, 0.5, -1.0]);
    let center = Vector::new(vec![0.0]);
    assert_eq!(count_inside(&data, None, &center, 1.0, false), 3);
    assert_eq!(count_inside(&data, None, &center, 1.0, true), 1);
    let labels = [1u8, 0, 1];
    assert_eq!(count_inside(&data, Some(&labels), &center, 1.0, false), 2);
}
