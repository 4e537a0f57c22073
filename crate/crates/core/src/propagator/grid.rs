use crate::error::{Error, Result};

/// Subintervals of `[0, Δ]` in the inner region.
pub const INNER_INTERVALS: usize = 100;

/// Composite radial grid in the scaled variable `ρ = P·R`.
///
/// Inner nodes `ρ_k = k·P·h` for `k = 0..=100`; outer nodes spaced `2·P·h`
/// from `P·Δ` up to `P·R0`, with a shortened last step when `R0 - Δ` is not
/// a multiple of `2h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    h: f64,
    r0: f64,
    momentum: f64,
}

impl RadialGrid {
    pub fn new(h: f64, r0: f64, momentum: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("step length must be positive, got {h}")));
        }
        if !(momentum > 0.0) || !momentum.is_finite() {
            return Err(Error::InvalidParameter(format!("momentum must be positive, got {momentum}")));
        }
        let delta = INNER_INTERVALS as f64 * h;
        if !(r0 > delta) || !r0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "R0 = {r0} must exceed the inner region Δ = 100h = {delta}"
            )));
        }
        Ok(Self { h, r0, momentum })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn delta(&self) -> f64 {
        INNER_INTERVALS as f64 * self.h
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// Inner step in `ρ`.
    pub fn rho_step(&self) -> f64 {
        self.momentum * self.h
    }

    pub fn inner_rho(&self, k: usize) -> f64 {
        k as f64 * self.rho_step()
    }

    pub fn rho_delta(&self) -> f64 {
        self.inner_rho(INNER_INTERVALS)
    }

    pub fn rho_r0(&self) -> f64 {
        self.momentum * self.r0
    }

    pub fn outer_step(&self) -> f64 {
        2.0 * self.rho_step()
    }

    /// Number of outer steps, counting a shortened final one.
    pub fn outer_steps(&self) -> usize {
        let span = self.rho_r0() - self.rho_delta();
        let full = (span / self.outer_step()).floor() as usize;
        if self.rho_delta() + full as f64 * self.outer_step() < self.rho_r0() - 1e-6 * self.outer_step() {
            full + 1
        } else {
            full
        }
    }

    /// Outer node `k`, with `k = 0` at `P·Δ`; the last node is exactly `P·R0`.
    pub fn outer_rho(&self, k: usize) -> f64 {
        if k >= self.outer_steps() {
            self.rho_r0()
        } else {
            self.rho_delta() + k as f64 * self.outer_step()
        }
    }

    pub fn node_count(&self) -> usize {
        INNER_INTERVALS + 1 + self.outer_steps()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_is_hundred_steps() {
        assert_eq!(RadialGrid::new(0.01, 10.0, 1.0).unwrap().delta(), 1.0);
        let g = RadialGrid::new(0.0075, 10.0, 1.0).unwrap();
        assert!((g.delta() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_r0() {
        assert!(RadialGrid::new(0.01, 1.0, 1.0).is_err());
        assert!(RadialGrid::new(0.01, 0.5, 1.0).is_err());
        assert!(RadialGrid::new(0.0, 10.0, 1.0).is_err());
        assert!(RadialGrid::new(0.01, 10.0, 0.0).is_err());
    }

    #[test]
    fn outer_nodes_end_at_r0() {
        for (h, r0, p) in [(0.01, 300.0, 2f64.sqrt()), (0.0075, 300.0, 1.0), (0.009, 37.3, 3f64.sqrt())] {
            let g = RadialGrid::new(h, r0, p).unwrap();
            let n = g.outer_steps();
            assert_eq!(g.outer_rho(n), g.rho_r0());
            assert!(g.outer_rho(n - 1) < g.rho_r0());
            for k in 1..=n {
                let step = g.outer_rho(k) - g.outer_rho(k - 1);
                assert!(step > 0.0 && step <= g.outer_step() * (1.0 + 1e-6));
            }
            assert_eq!(g.outer_rho(0), g.inner_rho(INNER_INTERVALS));
        }
    }
}
