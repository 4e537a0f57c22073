//! Regular power-series solutions near the origin.
//!
//! Column `j` starts as `ρ^{σ}` in channel `j` with `σ = ν_j + 1`. Terms
//! `c_{i,k} ρ^{σ+k}` follow from
//!
//! ```text
//! [(σ+k)(σ+k-1) - ν_i(ν_i+1)] c_{i,k} + c_{i,k-2} + 2 Σ_m α_im c_{m,k-1} = 0
//! ```
//!
//! When `σ + k = ν_i + 1` the bracket vanishes and a `ρ^{σ+k} ln ρ` term takes
//! over that order; its free regular coefficient is set to zero.

use nalgebra::DMatrix;

use super::RadialSystem;

/// Highest power kept beyond the leading one.
pub const SERIES_ORDER: usize = 4;

#[derive(Debug, Clone)]
pub struct FrobeniusSeries {
    sigma: Vec<f64>,
    /// `coeff[k][(i, j)]`: channel `i`, column `j`, power `σ_j + k`,
    /// in units where the series is evaluated at `ρ / scale`.
    coeff: Vec<DMatrix<f64>>,
    log_coeff: Vec<DMatrix<f64>>,
    scale: f64,
}

impl FrobeniusSeries {
    /// Coefficients normalized so that each leading term is 1 at `ρ = scale`.
    pub fn new(system: &RadialSystem, scale: f64) -> Self {
        let n = system.dim();
        let nu: Vec<f64> = (0..n).map(|i| system.nu(i)).collect();
        let sigma: Vec<f64> = nu.iter().map(|v| v + 1.0).collect();
        let a = system.coupling();
        let mut coeff = vec![DMatrix::zeros(n, n); SERIES_ORDER + 1];
        let mut log_coeff = vec![DMatrix::zeros(n, n); SERIES_ORDER + 1];
        for j in 0..n {
            coeff[0][(j, j)] = 1.0;
        }
        for k in 1..=SERIES_ORDER {
            // c_k here means c_k · scale^k
            for j in 0..n {
                let s = sigma[j] + k as f64;
                for i in 0..n {
                    let mut src = 0.0;
                    let mut log_src = 0.0;
                    if k >= 2 {
                        src += coeff[k - 2][(i, j)] * scale * scale;
                        log_src += log_coeff[k - 2][(i, j)] * scale * scale;
                    }
                    for m in 0..n {
                        src += 2.0 * scale * a[(i, m)] * coeff[k - 1][(m, j)];
                        log_src += 2.0 * scale * a[(i, m)] * log_coeff[k - 1][(m, j)];
                    }
                    let bracket = s * (s - 1.0) - nu[i] * (nu[i] + 1.0);
                    if bracket.abs() < 1e-9 * (1.0 + s * s) {
                        log_coeff[k][(i, j)] = -src / (2.0 * s - 1.0);
                    } else {
                        let d = -log_src / bracket;
                        log_coeff[k][(i, j)] = d;
                        coeff[k][(i, j)] = -(src + (2.0 * s - 1.0) * d) / bracket;
                    }
                }
            }
        }
        Self { sigma, coeff, log_coeff, scale }
    }

    /// Values of all columns at `rho`; entry `(i, j)` is channel `i` of column `j`.
    pub fn eval(&self, rho: f64) -> DMatrix<f64> {
        let n = self.sigma.len();
        let x = rho / self.scale;
        let lx = x.ln();
        DMatrix::from_fn(n, n, |i, j| {
            let mut v = 0.0;
            let base = x.powf(self.sigma[j]);
            let mut p = base;
            for k in 0..=SERIES_ORDER {
                v += p * (self.coeff[k][(i, j)] + self.log_coeff[k][(i, j)] * lx);
                p *= x;
            }
            v
        })
    }

    pub fn has_log_terms(&self) -> bool {
        self.log_coeff.iter().any(|m| m.iter().any(|&v| v != 0.0))
    }
}
