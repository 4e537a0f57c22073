//! Empirical order of the inner march.
//!
//! Runs the march on `F'' + (1 - (15/4)/ρ²) F = 0` over `[0.5, 1.5]`, whose
//! regular solution is `√ρ J₂(ρ)`, seeded with exact values. The double-double
//! run keeps rounding far below the truncation error even at small `h`.

use crate::error::Result;
use crate::propagator::{inner, RadialSystem};
use crate::real::{Block, Quad, Real};

pub const PROBE_START: f64 = 0.5;
pub const PROBE_END: f64 = 1.5;
pub const PROBE_STEPS: [f64; 3] = [0.02, 0.01, 0.005];

/// `√ρ J₂(ρ)` from the ascending series.
pub fn sqrt_rho_j2<T: Real>(rho: T) -> T {
    let x = rho / T::from(2.0);
    let x2 = x * x;
    let mut term = x2 / T::from(2.0);
    let mut sum = term;
    for m in 1..60 {
        term = -term * x2 / T::from((m * (m + 2)) as f64);
        sum = sum + term;
    }
    rho.sqrt() * sum
}

/// Maximum absolute error of the march against the Bessel solution.
pub fn bessel_error<T: Real>(h: f64) -> Result<f64> {
    let sys = RadialSystem::uncoupled(vec![3.75]);
    let ht = T::from(h);
    let rho = |k: usize| T::from(PROBE_START) + T::from(k as f64) * ht;
    let last = ((PROBE_END - PROBE_START) / h + 1e-9).floor() as usize;
    let mut f: Vec<Block<T>> = (0..6).map(|k| Block::from_fn(1, |_, _| sqrt_rho_j2(rho(k)))).collect();
    inner::march(&sys, ht, rho, &mut f, last, false)?;
    let mut err = 0.0f64;
    for (k, b) in f.iter().enumerate() {
        err = err.max((b.get(0, 0) - sqrt_rho_j2(rho(k))).abs().to_f64());
    }
    Ok(err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Order between consecutive step lengths.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln h`.
    pub fitted: f64,
}

impl OrderReport {
    pub fn min_pairwise(&self) -> f64 {
        self.pairwise.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Even integer closest to the fitted slope.
    pub fn nearest_even(&self) -> u32 {
        (2.0 * (self.fitted / 2.0).round()).max(0.0) as u32
    }
}

pub fn measure_order(steps: &[f64]) -> Result<OrderReport> {
    let errors = steps.iter().map(|&h| bessel_error::<Quad>(h)).collect::<Result<Vec<_>>>()?;
    Ok(report(steps, errors))
}

fn report(steps: &[f64], errors: Vec<f64>) -> OrderReport {
    let pairwise = steps
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    OrderReport { steps: steps.to_vec(), errors, pairwise, fitted: sxy / sxx }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_of_exact_power_law() {
        let steps = [0.4, 0.2, 0.1];
        let r = report(&steps, steps.iter().map(|h: &f64| 3.0 * h.powi(8)).collect());
        assert!((r.fitted - 8.0).abs() < 1e-12);
        assert!(r.pairwise.iter().all(|p| (p - 8.0).abs() < 1e-12));
        assert_eq!(r.nearest_even(), 8);
    }

    #[test]
    fn series_matches_known_value() {
        // J₂(1) = 0.11490348493190048
        assert!((sqrt_rho_j2(1.0f64) - 0.11490348493190048).abs() < 1e-16);
    }
}
