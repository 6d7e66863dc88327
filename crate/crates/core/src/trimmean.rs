//! Adaptive private trimmed-mean estimation.
//!
//! The estimator shrinks a projection ball by halves, privately testing at
//! each round whether enough users remain inside, and releases a clipped mean
//! over the last accepted ball. Three entry points share one loop engine:
//!
//! * [`dp_trim_mean`] - the standard form with a single budget `mu`,
//!   internally split as `mu1 = mu2 = mu/(2 sqrt(R))`, `mu3 = mu/sqrt(2)`;
//! * [`dp_trim_mean_general`] - explicit `(mu1, mu2, mu3)` components;
//! * [`dp_treat_mean`] - group-masked variant whose membership indicators
//!   carry a private 0/1 label, with a privatized group size driving the
//!   count threshold.
//!
//! Membership tie rules follow the listings bit-for-bit: the count check of
//! the standard/general form uses `<=`, the treated form uses `<`, and the
//! estimate sets `S` always use `<`.

use crate::dpcore::{compose, PrivacyBudget, RngStream};
use crate::error::{Error, Result};
use crate::numkit::Vector;
use serde::{Deserialize, Serialize};

#[cfg(all(feature = "test-hooks", not(debug_assertions)))]
compile_error!(
    "the `test-hooks` feature suppresses privacy noise and must not be enabled in release builds"
);

/// Inputs of the standard trimmed-mean run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrimMeanConfig {
    /// Total privacy budget of the run.
    pub mu: PrivacyBudget,
    /// Initial projection radius `B`.
    pub radius: f64,
    /// Maximum number of shrinking rounds `R`.
    pub max_rounds: u32,
    /// Failure probability `xi` used to calibrate the count threshold.
    pub failure_prob: f64,
}

impl TrimMeanConfig {
    pub fn new(mu: PrivacyBudget, radius: f64, max_rounds: u32, failure_prob: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("radius B = {radius} must be finite > 0")));
        }
        if max_rounds < 1 {
            return Err(Error::InvalidInput("max rounds R must be >= 1".into()));
        }
        if !(failure_prob > 0.0 && failure_prob < 1.0) {
            return Err(Error::InvalidInput(format!(
                "failure probability xi = {failure_prob} must lie in (0,1)"
            )));
        }
        Ok(TrimMeanConfig { mu, radius, max_rounds, failure_prob })
    }
}

/// Explicit budget components of the general form: refinement rounds spend
/// `mu1` each, count checks `mu2` each, and the final release `mu3`.
/// The standard form is recovered with `mu1 = mu2 = mu/(2 sqrt(R))` and
/// `mu3 = mu/sqrt(2)`.
#[derive(Debug, Clone, Copy)]
pub struct GeneralBudget {
    pub mu_refine: PrivacyBudget,
    pub mu_count: PrivacyBudget,
    pub mu_final: PrivacyBudget,
}

impl GeneralBudget {
    /// Total budget `sqrt(R mu1^2 + R mu2^2 + mu3^2)` of a run with `R` rounds.
    pub fn total(&self, max_rounds: u32) -> PrivacyBudget {
        let r = max_rounds as f64;
        let q = |b: PrivacyBudget| if b.is_infinite() { 0.0 } else { b.mu() * b.mu() };
        let sum = r * q(self.mu_refine) + r * q(self.mu_count) + q(self.mu_final);
        if sum == 0.0 {
            PrivacyBudget::infinite()
        } else {
            PrivacyBudget::new(sum.sqrt()).expect("positive")
        }
    }

    fn standard(mu: PrivacyBudget, max_rounds: u32) -> GeneralBudget {
        let per_round = mu.scaled_down(2.0 * (max_rounds as f64).sqrt());
        GeneralBudget {
            mu_refine: per_round,
            mu_count: per_round,
            mu_final: mu.scaled_down(std::f64::consts::SQRT_2),
        }
    }

    fn treated(mu: PrivacyBudget, max_rounds: u32) -> GeneralBudget {
        let per_round = mu.scaled_down((4.0 * max_rounds as f64).sqrt());
        GeneralBudget {
            mu_refine: per_round,
            mu_count: per_round,
            mu_final: mu.scaled_down(2.0),
        }
    }
}

/// What happened in one loop round; noisy counts are privatized releases,
/// so exposing them is post-processing.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: u32,
    pub radius: f64,
    pub noisy_count: f64,
    pub decision: RoundDecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RoundDecision {
    Refined,
    EarlyExit,
    FinalRound,
}

/// Echo of the effective run parameters, carried on the output so downstream
/// covariance estimation can recompute the projection ball.
#[derive(Debug, Clone, Copy)]
pub struct RunEcho {
    pub total_budget: PrivacyBudget,
    pub radius: f64,
    pub max_rounds: u32,
    pub failure_prob: f64,
}

/// Full released output of a trimmed-mean run.
#[derive(Debug, Clone)]
pub struct TrimMeanOutput {
    /// The private mean estimate.
    pub m_dp: Vector,
    /// The ball center used by the final estimate (`m_{r*-1}`).
    pub prev_center: Vector,
    /// Termination round; `-1` when the very first count check failed.
    pub r_star: i32,
    /// Final noise scale `B*`.
    pub b_star: f64,
    /// Lower bound on the number of contributing users (real-valued, >= 1).
    pub n_lb: f64,
    /// Run parameters echo.
    pub config: RunEcho,
    /// Per-release budgets actually billed along this execution path,
    /// following the accounting that makes early-exit recapture telescope to
    /// the run total exactly (the round-zero count over the initial ball is
    /// treated as part of initialization).
    pub spent: Vec<PrivacyBudget>,
    /// Per-round audit log.
    pub rounds: Vec<RoundRecord>,
}

impl TrimMeanOutput {
    /// Composed budget over every billed release of this run.
    pub fn total_spent(&self) -> PrivacyBudget {
        compose(&self.spent).expect("ledger never empty")
    }
}

// --- membership statistics -------------------------------------------------

/// Number of users inside the ball. `strict` selects `<` vs `<=`; when a
/// mask is given, user `i`'s radius is `radius * z_i` and the indicator
/// carries the label.
pub fn count_inside(
    data: &[Vector],
    mask: Option<&[u8]>,
    center: &Vector,
    radius: f64,
    strict: bool,
) -> usize {
    data.iter()
        .enumerate()
        .filter(|(i, d)| {
            let z = mask.map_or(1.0, |m| m[*i] as f64);
            if z == 0.0 {
                return false;
            }
            let r = radius * z;
            let dist_sq = d.dist_sq(center);
            if strict {
                dist_sq < r * r
            } else {
                dist_sq <= r * r
            }
        })
        .count()
}

/// The clipped-mean statistic `(1/n_S) sum_{i in S} (D_i - center)` with
/// `S = {i : ||D_i - center|| < radius * z_i}` and `n_S = max(|S|, n_lb)`.
pub fn clipped_mean_stat(
    data: &[Vector],
    mask: Option<&[u8]>,
    center: &Vector,
    radius: f64,
    n_lb: f64,
) -> (Vector, usize) {
    let dim = center.dim();
    let mut sum = Vector::zeros(dim);
    let mut count = 0usize;
    for (i, d) in data.iter().enumerate() {
        let z = mask.map_or(1.0, |m| m[i] as f64);
        if z == 0.0 {
            continue;
        }
        let r = radius * z;
        if d.dist_sq(center) < r * r {
            count += 1;
            for k in 0..dim {
                sum.set(k, sum.get(k) + (d.get(k) - center.get(k)));
            }
        }
    }
    let n_s = (count as f64).max(n_lb);
    (sum.scale(1.0 / n_s), count)
}

// --- loop engine -------------------------------------------------------------

pub(crate) trait GaussianSource {
    fn gauss(&mut self) -> f64;
}

impl GaussianSource for RngStream {
    fn gauss(&mut self) -> f64 {
        self.standard_normal()
    }
}

struct LoopSpec<'a> {
    budget: GeneralBudget,
    total_budget: PrivacyBudget,
    radius: f64,
    max_rounds: u32,
    tau: f64,
    n_lb: f64,
    mask: Option<&'a [u8]>,
    /// `<` in the count indicator (treated form) instead of `<=`.
    count_strict: bool,
    failure_prob: f64,
    /// Ledger entries billed before the loop (the treated form's group-size
    /// release).
    pre_spent: Vec<PrivacyBudget>,
}

fn validate_data(data: &[Vector]) -> Result<usize> {
    if data.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "trimmed mean needs at least 2 users, got {}",
            data.len()
        )));
    }
    let dim = data[0].dim();
    if dim == 0 {
        return Err(Error::InvalidInput("data vectors must have dimension >= 1".into()));
    }
    for (i, d) in data.iter().enumerate() {
        if d.dim() != dim {
            return Err(Error::InvalidInput(format!(
                "user {i} has dimension {} but user 0 has {dim}",
                d.dim()
            )));
        }
        if !d.is_finite() {
            return Err(Error::InvalidInput(format!("user {i} has non-finite entries")));
        }
    }
    Ok(dim)
}

/// Recapture factor for an exit at round `r`: reassigns the budget of the
/// `R - r` unexecuted rounds to the final release.
fn recapture(budget: &GeneralBudget, max_rounds: u32, r: u32) -> f64 {
    if budget.mu_final.is_infinite() {
        return 1.0;
    }
    let q = |b: PrivacyBudget| if b.is_infinite() { 0.0 } else { b.mu() * b.mu() };
    let remaining = (max_rounds - r) as f64 * (q(budget.mu_refine) + q(budget.mu_count));
    let q3 = q(budget.mu_final);
    ((remaining + q3) / q3).sqrt()
}

fn run_loop<S: GaussianSource>(data: &[Vector], spec: LoopSpec, source: &mut S) -> TrimMeanOutput {
    let dim = data[0].dim();
    let b = spec.radius;
    let max_rounds = spec.max_rounds;
    let inv_mu1 = spec.budget.mu_refine.inverse();
    let inv_mu2 = spec.budget.mu_count.inverse();
    let inv_mu3 = spec.budget.mu_final.inverse();

    let mut spent = spec.pre_spent.clone();
    let mut rounds: Vec<RoundRecord> = Vec::with_capacity(max_rounds as usize + 1);

    let mut prev_prev = Vector::zeros(dim); // m_{r-2}
    let mut prev = Vector::zeros(dim); // m_{r-1}

    let mut r: u32 = 0;
    let (m_dp, prev_center, r_star, b_star) = loop {
        let radius = b * 2f64.powi(-(r as i32));
        let count = count_inside(data, spec.mask, &prev, radius, spec.count_strict);
        let omega = count as f64 + inv_mu2 * source.gauss();
        if r >= 1 {
            spent.push(spec.budget.mu_count);
        }

        if omega < spec.tau {
            // early exit: estimate over the previous accepted ball
            rounds.push(RoundRecord { round: r, radius, noisy_count: omega, decision: RoundDecision::EarlyExit });
            let exit_radius = b * 2f64.powi(1 - r as i32);
            let (stat, _) = clipped_mean_stat(data, spec.mask, &prev_prev, exit_radius, spec.n_lb);
            let c = recapture(&spec.budget, max_rounds, r);
            let scale = 2.0 * exit_radius / (c * spec.n_lb) * inv_mu3;
            let mut m = prev_prev.clone();
            m.axpy(1.0, &stat);
            for k in 0..dim {
                m.set(k, m.get(k) + scale * source.gauss());
            }
            let billed = if spec.budget.mu_final.is_infinite() {
                PrivacyBudget::infinite()
            } else {
                PrivacyBudget::new(c * spec.budget.mu_final.mu()).expect("positive")
            };
            spent.push(billed);
            break (m, prev_prev, r as i32 - 1, scale);
        } else if r == max_rounds {
            rounds.push(RoundRecord { round: r, radius, noisy_count: omega, decision: RoundDecision::FinalRound });
            let (stat, _) = clipped_mean_stat(data, spec.mask, &prev, radius, spec.n_lb);
            let scale = 2.0 * radius / spec.n_lb * inv_mu3;
            let mut m = prev.clone();
            m.axpy(1.0, &stat);
            for k in 0..dim {
                m.set(k, m.get(k) + scale * source.gauss());
            }
            spent.push(spec.budget.mu_final);
            break (m, prev, max_rounds as i32, scale);
        } else {
            rounds.push(RoundRecord { round: r, radius, noisy_count: omega, decision: RoundDecision::Refined });
            let (stat, _) = clipped_mean_stat(data, spec.mask, &prev, radius, spec.n_lb);
            let scale = 2.0 * radius / spec.n_lb * inv_mu1;
            let mut next = prev.clone();
            next.axpy(1.0, &stat);
            for k in 0..dim {
                next.set(k, next.get(k) + scale * source.gauss());
            }
            spent.push(spec.budget.mu_refine);
            prev_prev = prev;
            prev = next;
            r += 1;
        }
    };

    TrimMeanOutput {
        m_dp,
        prev_center,
        r_star,
        b_star,
        n_lb: spec.n_lb,
        config: RunEcho {
            total_budget: spec.total_budget,
            radius: b,
            max_rounds,
            failure_prob: spec.failure_prob,
        },
        spent,
        rounds,
    }
}

/// Count threshold `tau = n - (1/mu2) sqrt(2 ln(4R/xi))` of the standard and
/// general forms.
fn count_threshold(n: usize, mu_count: PrivacyBudget, max_rounds: u32, xi: f64) -> f64 {
    n as f64 - mu_count.inverse() * (2.0 * (4.0 * max_rounds as f64 / xi).ln()).sqrt()
}

fn check_sufficient_users(n: usize, dim: usize, tau: f64, cfg_mu: PrivacyBudget, max_rounds: u32, xi: f64) -> Result<()> {
    if tau <= 1.0 {
        // n_min from the threshold formulas with unit constants
        let r = max_rounds as f64;
        let required = cfg_mu.inverse() * (r * ((r / xi).ln() + dim as f64)).sqrt();
        return Err(Error::InsufficientUsers { n, required, tau });
    }
    Ok(())
}

fn general_loop_inputs(
    data: &[Vector],
    gb: &GeneralBudget,
    max_rounds: u32,
    xi: f64,
) -> Result<(f64, f64)> {
    let dim = validate_data(data)?;
    let n = data.len();
    let tau = count_threshold(n, gb.mu_count, max_rounds, xi);
    check_sufficient_users(n, dim, tau, gb.total(max_rounds), max_rounds, xi)?;
    let n_lb = (2.0 * tau - n as f64).max(1.0);
    Ok((tau, n_lb))
}

fn general_spec<'a>(
    data: &[Vector],
    gb: &GeneralBudget,
    radius: f64,
    max_rounds: u32,
    failure_prob: f64,
) -> Result<LoopSpec<'a>> {
    TrimMeanConfig::new(PrivacyBudget::infinite(), radius, max_rounds, failure_prob)?;
    let (tau, n_lb) = general_loop_inputs(data, gb, max_rounds, failure_prob)?;
    Ok(LoopSpec {
        budget: *gb,
        total_budget: gb.total(max_rounds),
        radius,
        max_rounds,
        tau,
        n_lb,
        mask: None,
        count_strict: false,
        failure_prob,
        pre_spent: Vec::new(),
    })
}

/// Standard adaptive trimmed mean.
pub fn dp_trim_mean(
    data: &[Vector],
    cfg: &TrimMeanConfig,
    rng: &mut RngStream,
) -> Result<TrimMeanOutput> {
    let gb = GeneralBudget::standard(cfg.mu, cfg.max_rounds);
    dp_trim_mean_general(data, &gb, cfg.radius, cfg.max_rounds, cfg.failure_prob, rng)
}

/// General-budget adaptive trimmed mean.
pub fn dp_trim_mean_general(
    data: &[Vector],
    gb: &GeneralBudget,
    radius: f64,
    max_rounds: u32,
    failure_prob: f64,
    rng: &mut RngStream,
) -> Result<TrimMeanOutput> {
    let spec = general_spec(data, gb, radius, max_rounds, failure_prob)?;
    Ok(run_loop(data, spec, rng))
}

/// Group-masked trimmed mean with a private membership label.
///
/// Labels enter every membership indicator as a radius factor, the count
/// statistic sums only labeled users, and the count threshold is driven by a
/// privatized group size.
pub fn dp_treat_mean(
    data: &[Vector],
    labels: &[u8],
    cfg: &TrimMeanConfig,
    rng: &mut RngStream,
) -> Result<TrimMeanOutput> {
    TrimMeanConfig::new(cfg.mu, cfg.radius, cfg.max_rounds, cfg.failure_prob)?;
    validate_data(data)?;
    if labels.len() != data.len() {
        return Err(Error::InvalidInput(format!(
            "labels length {} != number of users {}",
            labels.len(),
            data.len()
        )));
    }
    if labels.iter().any(|&z| z > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    let gb = GeneralBudget::treated(cfg.mu, cfg.max_rounds);
    let r = cfg.max_rounds as f64;
    let xi = cfg.failure_prob;

    // privatized group size (one mu3 release)
    let group_size: f64 = labels.iter().map(|&z| z as f64).sum();
    let z_tilde = group_size + gb.mu_final.inverse() * rng.standard_normal();
    let count_term = gb.mu_count.inverse() * (2.0 * (4.0 * r / xi).ln()).sqrt();
    let size_term = gb.mu_final.inverse() * (2.0 * (8.0 / xi).ln()).sqrt();
    let tau = (z_tilde - count_term - size_term).max(1.0);
    let n_lb = (tau - count_term).max(1.0);

    let spec = LoopSpec {
        budget: gb,
        total_budget: treated_total(&gb, cfg.max_rounds),
        radius: cfg.radius,
        max_rounds: cfg.max_rounds,
        tau,
        n_lb,
        mask: Some(labels),
        count_strict: true,
        failure_prob: xi,
        pre_spent: vec![gb.mu_final],
    };
    Ok(run_loop(data, spec, rng))
}

/// `sqrt(R(mu1^2 + mu2^2) + 2 mu3^2)`: the loop total plus the group-size
/// release.
fn treated_total(gb: &GeneralBudget, max_rounds: u32) -> PrivacyBudget {
    compose(&[gb.total(max_rounds), gb.mu_final]).expect("non-empty")
}

/// Noise-suppressed variants for transcript tests. Gated behind the
/// `test-hooks` feature, which refuses to compile in release builds.
#[cfg(any(test, feature = "test-hooks"))]
pub mod testing {
    use super::*;

    struct ZeroNoise;

    impl GaussianSource for ZeroNoise {
        fn gauss(&mut self) -> f64 {
            0.0
        }
    }

    /// [`dp_trim_mean`] with every Gaussian draw forced to zero while keeping
    /// the finite-budget thresholds and reported noise scales.
    pub fn dp_trim_mean_suppressed(data: &[Vector], cfg: &TrimMeanConfig) -> Result<TrimMeanOutput> {
        let gb = GeneralBudget::standard(cfg.mu, cfg.max_rounds);
        let spec = general_spec(data, &gb, cfg.radius, cfg.max_rounds, cfg.failure_prob)?;
        Ok(run_loop(data, spec, &mut ZeroNoise))
    }

    /// [`dp_treat_mean`] with suppressed noise (including the group-size
    /// release, so `z_tilde` equals the true group size).
    pub fn dp_treat_mean_suppressed(
        data: &[Vector],
        labels: &[u8],
        cfg: &TrimMeanConfig,
    ) -> Result<TrimMeanOutput> {
        validate_data(data)?;
        let gb = GeneralBudget::treated(cfg.mu, cfg.max_rounds);
        let r = cfg.max_rounds as f64;
        let xi = cfg.failure_prob;
        let z_tilde: f64 = labels.iter().map(|&z| z as f64).sum();
        let count_term = gb.mu_count.inverse() * (2.0 * (4.0 * r / xi).ln()).sqrt();
        let size_term = gb.mu_final.inverse() * (2.0 * (8.0 / xi).ln()).sqrt();
        let tau = (z_tilde - count_term - size_term).max(1.0);
        let n_lb = (tau - count_term).max(1.0);
        let spec = LoopSpec {
            budget: gb,
            total_budget: treated_total(&gb, cfg.max_rounds),
            radius: cfg.radius,
            max_rounds: cfg.max_rounds,
            tau,
            n_lb,
            mask: Some(labels),
            count_strict: true,
            failure_prob: xi,
            pre_spent: vec![gb.mu_final],
        };
        Ok(run_loop(data, spec, &mut ZeroNoise))
    }
}

#[cfg(test)]
mod tests;
