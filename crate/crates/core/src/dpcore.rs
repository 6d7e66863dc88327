//! Gaussian differential privacy primitives: calibrated noise injection,
//! budget composition arithmetic, and the Gaussian trade-off function.

use crate::error::{Error, Result};
use crate::numkit::{self, Vector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A GDP privacy parameter. `mu = inf` encodes the non-private mode: every
/// mechanism run at an infinite budget adds exactly zero noise, so the same
/// code path serves private and non-private estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    mu: f64,
}

impl PrivacyBudget {
    pub const INFINITE: PrivacyBudget = PrivacyBudget { mu: f64::INFINITY };

    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidInput(format!("privacy budget mu = {mu} must be > 0")));
        }
        Ok(PrivacyBudget { mu })
    }

    pub fn infinite() -> Self {
        Self::INFINITE
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_infinite(&self) -> bool {
        self.mu.is_infinite()
    }

    /// 1/mu, which multiplies every noise scale; zero in non-private mode.
    pub fn inverse(&self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.mu
        }
    }

    /// Splits this budget by a positive factor: `mu / c`.
    pub fn scaled_down(&self, c: f64) -> PrivacyBudget {
        PrivacyBudget { mu: self.mu / c }
    }
}

impl std::fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.mu)
        }
    }
}

/// L2 user-level global sensitivity of a released statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity(f64);

impl Sensitivity {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sensitivity {value} must be finite and >= 0"
            )));
        }
        Ok(Sensitivity(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

fn mix64(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seeded, replayable random stream.
///
/// Backed by a counter-based generator (ChaCha8) keyed on `(seed, stream_id)`;
/// Gaussians come from the inverse-CDF transform of 53-bit uniforms, so a
/// draw sequence is bit-exactly reproducible and distinct stream ids are
/// independent, which keeps parallel replications deterministic.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        let words = [
            mix64(seed),
            mix64(seed ^ mix64(stream_id)),
            mix64(stream_id),
            mix64(mix64(seed).wrapping_add(stream_id)),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        RngStream { seed, stream_id, rng: ChaCha8Rng::from_seed(key) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream keyed on this stream's identity and `label`.
    pub fn substream(&self, label: u64) -> RngStream {
        RngStream::new(self.seed, mix64(self.stream_id).wrapping_add(mix64(label)))
    }

    /// Uniform draw in the open interval (0, 1) with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw via the inverse-CDF transform.
    pub fn standard_normal(&mut self) -> f64 {
        numkit::ppnd16_from_uniform(self.uniform())
    }

    /// Uniform draw on [lo, hi).
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal_vector(&mut self, dim: usize) -> Vector {
        Vector::new((0..dim).map(|_| self.standard_normal()).collect())
    }
}

/// The Gaussian mechanism: `h + (GS(h)/mu) Z` with `Z ~ N(0, I)`.
///
/// Exactly `h.dim()` draws are consumed regardless of the budget, so streams
/// stay aligned between private and non-private runs.
pub fn gaussian_mechanism(
    h: &Vector,
    gs: Sensitivity,
    budget: PrivacyBudget,
    rng: &mut RngStream,
) -> Result<Vector> {
    if !h.is_finite() {
        return Err(Error::InvalidInput("gaussian_mechanism: non-finite statistic".into()));
    }
    let scale = gs.value() * budget.inverse();
    let mut out = h.clone();
    for i in 0..out.dim() {
        let z = rng.standard_normal();
        out.set(i, out.get(i) + scale * z);
    }
    Ok(out)
}

/// N-fold composition: spending budgets `mu_j` jointly costs
/// `sqrt(sum mu_j^2)`. Infinite entries contribute nothing; a composition of
/// only infinite budgets is itself non-private.
pub fn compose(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    if budgets.is_empty() {
        return Err(Error::InvalidInput("compose: empty budget list".into()));
    }
    let sum_sq: f64 = budgets
        .iter()
        .filter(|b| !b.is_infinite())
        .map(|b| b.mu() * b.mu())
        .sum();
    if sum_sq == 0.0 {
        return Ok(PrivacyBudget::infinite());
    }
    PrivacyBudget::new(sum_sq.sqrt())
}

/// The Gaussian trade-off function `G_mu(alpha) = Phi(Phi^{-1}(1-alpha) - mu)`.
pub fn tradeoff_g(budget: PrivacyBudget, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("tradeoff_g: alpha = {alpha} outside [0,1]")));
    }
    if budget.is_infinite() {
        return Ok(0.0);
    }
    if alpha == 0.0 {
        return Ok(numkit::std_normal_cdf(f64::INFINITY));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let z = numkit::std_normal_quantile(1.0 - alpha)?;
    Ok(numkit::std_normal_cdf(z - budget.mu()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mechanism_zero_sensitivity_is_exact() {
        let mut rng = RngStream::new(1, 0);
        let h = Vector::new(vec![0.0, 0.0]);
        let out = gaussian_mechanism(
            &h,
            Sensitivity::new(0.0).unwrap(),
            PrivacyBudget::new(1.0).unwrap(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn mechanism_infinite_budget_is_identity() {
        let mut rng = RngStream::new(1, 0);
        let h = Vector::new(vec![5.0]);
        let out = gaussian_mechanism(
            &h,
            Sensitivity::new(2.0).unwrap(),
            PrivacyBudget::infinite(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.as_slice(), &[5.0]);
    }

    #[test]
    fn mechanism_consumes_one_draw_per_coordinate() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        let h = Vector::new(vec![1.0, 2.0, 3.0]);
        gaussian_mechanism(
            &h,
            Sensitivity::new(0.5).unwrap(),
            PrivacyBudget::infinite(),
            &mut a,
        )
        .unwrap();
        for _ in 0..3 {
            b.standard_normal();
        }
        assert_eq!(a.uniform(), b.uniform());
    }

    #[test]
    fn mechanism_monte_carlo_variance() {
        // gs = 2, mu = 1: output variance should be (gs/mu)^2 = 4
        let mut rng = RngStream::new(2024, 1);
        let gs = Sensitivity::new(2.0).unwrap();
        let budget = PrivacyBudget::new(1.0).unwrap();
        let h = Vector::new(vec![0.0]);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let y = gaussian_mechanism(&h, gs, budget, &mut rng).unwrap().get(0);
            sum += y;
            sum_sq += y * y;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((3.8..=4.2).contains(&var), "sample variance {var}");
    }

    #[test]
    fn mechanism_rejects_negative_sensitivity() {
        assert!(Sensitivity::new(-1.0).is_err());
    }

    #[test]
    fn mechanism_is_replayable_bit_exactly() {
        let h = Vector::new(vec![1.0, -2.5, 3.25]);
        let gs = Sensitivity::new(1.5).unwrap();
        let budget = PrivacyBudget::new(0.7).unwrap();
        let a = gaussian_mechanism(&h, gs, budget, &mut RngStream::new(9, 3)).unwrap();
        let b = gaussian_mechanism(&h, gs, budget, &mut RngStream::new(9, 3)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn compose_worked_example() {
        let mu = 1.3;
        let half = PrivacyBudget::new(mu / std::f64::consts::SQRT_2).unwrap();
        let total = compose(&[half, half]).unwrap();
        assert!((total.mu() - mu).abs() < 1e-12);
    }

    #[test]
    fn compose_singleton_and_infinite() {
        let one = PrivacyBudget::new(1.0).unwrap();
        assert_eq!(compose(&[one]).unwrap().mu(), 1.0);
        assert_eq!(compose(&[PrivacyBudget::infinite(), one]).unwrap().mu(), 1.0);
        assert!(compose(&[PrivacyBudget::infinite()]).unwrap().is_infinite());
        assert!(compose(&[]).is_err());
    }

    #[test]
    fn compose_permutation_invariant() {
        let budgets = [
            PrivacyBudget::new(0.3).unwrap(),
            PrivacyBudget::new(1.7).unwrap(),
            PrivacyBudget::new(0.9).unwrap(),
        ];
        let reversed: Vec<_> = budgets.iter().rev().copied().collect();
        assert!(
            (compose(&budgets).unwrap().mu() - compose(&reversed).unwrap().mu()).abs() < 1e-15
        );
    }

    #[test]
    fn tradeoff_examples() {
        // mu -> 0 limit: G_0(alpha) = 1 - alpha
        let tiny = PrivacyBudget::new(1e-12).unwrap();
        assert!((tradeoff_g(tiny, 0.3).unwrap() - 0.7).abs() < 1e-9);

        let one = PrivacyBudget::new(1.0).unwrap();
        let g = tradeoff_g(one, 0.05).unwrap();
        assert!((g - 0.74046).abs() < 5e-6);

        assert_eq!(tradeoff_g(one, 1.0).unwrap(), 0.0);
        assert!(tradeoff_g(one, 1.5).is_err());
    }

    #[test]
    fn tradeoff_monotone() {
        let one = PrivacyBudget::new(1.0).unwrap();
        let two = PrivacyBudget::new(2.0).unwrap();
        let mut prev = 1.0;
        for k in 1..20 {
            let alpha = k as f64 / 20.0;
            let g = tradeoff_g(one, alpha).unwrap();
            assert!(g < prev);
            assert!(tradeoff_g(two, alpha).unwrap() < g);
            prev = g;
        }
    }

    #[test]
    fn streams_differ_across_ids() {
        let mut a = RngStream::new(5, 0);
        let mut b = RngStream::new(5, 1);
        assert_ne!(a.uniform(), b.uniform());
    }
}
