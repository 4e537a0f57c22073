//! Taylor-series propagation between `P·Δ` and `P·R0`.
//!
//! About `ρ0`, write `F(ρ0 + t) = Σ f_k t^k`. Multiplying the radial equation
//! by `ρ² = ρ0² + 2ρ0 t + t²` and collecting `t^k` gives
//!
//! ```text
//! ρ0² (k+2)(k+1) f_{k+2} = -[2ρ0 (k+1)k f_{k+1} + (k(k-1) + ρ0² - L) f_k
//!                            + 2ρ0 f_{k-1} + f_{k-2} + 2α(ρ0 f_k + f_{k-1})]
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::RadialSystem;

pub const DEFAULT_TAYLOR_ORDER: usize = 10;

/// Advances values `f` and derivatives `fp` (columns are solutions) by `step`.
pub fn taylor_step(
    system: &RadialSystem,
    rho0: f64,
    step: f64,
    order: usize,
    f: &DMatrix<f64>,
    fp: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = system.coupling();
    let lvec = system.centrifugal();
    let n = f.nrows();
    let cols = f.ncols();
    let r2 = rho0 * rho0;
    let mut terms: Vec<DMatrix<f64>> = Vec::with_capacity(order + 1);
    terms.push(f.clone());
    terms.push(fp.clone());
    for k in 0..order.saturating_sub(1) {
        let kf = k as f64;
        let fk = &terms[k];
        let mut rhs = &terms[k + 1] * (2.0 * rho0 * (kf + 1.0) * kf);
        rhs += fk * (kf * (kf - 1.0) + r2);
        for i in 0..n {
            for j in 0..cols {
                rhs[(i, j)] -= lvec[i] * fk[(i, j)];
            }
        }
        let mut mix = fk * rho0;
        if k >= 1 {
            rhs += &terms[k - 1] * (2.0 * rho0);
            mix += &terms[k - 1];
        }
        if k >= 2 {
            rhs += &terms[k - 2];
        }
        rhs += (a * mix) * 2.0;
        terms.push(rhs * (-1.0 / (r2 * (kf + 2.0) * (kf + 1.0))));
    }
    terms.truncate(order + 1);
    let mut val = terms[order].clone();
    let mut der = &terms[order] * order as f64;
    for k in (0..order).rev() {
        val = val * step + &terms[k];
        if k >= 1 {
            der = der * step + &terms[k] * k as f64;
        }
    }
    (val, der)
}

/// Value and derivative of all columns at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchPoint {
    pub rho: f64,
    pub values: DMatrix<f64>,
    pub derivatives: DMatrix<f64>,
}

impl MatchPoint {
    pub fn right_multiply(&mut self, m: &DMatrix<f64>) {
        self.values = &self.values * m;
        self.derivatives = &self.derivatives * m;
    }
}

/// Right factor that orthonormalizes the stacked `[F; F']` columns.
pub(crate) fn stabilizer(p: &MatchPoint) -> Option<DMatrix<f64>> {
    let n = p.values.nrows();
    let cols = p.values.ncols();
    let mut stacked = DMatrix::zeros(2 * n, cols);
    stacked.rows_mut(0, n).copy_from(&p.values);
    stacked.rows_mut(n, n).copy_from(&p.derivatives);
    stacked.qr().r().try_inverse()
}

/// Propagates from `start` through the node sequence `nodes` (the first one
/// must equal `start.rho`). Returns the last `tail` nodes, newest last.
pub fn propagate(
    system: &RadialSystem,
    start: MatchPoint,
    nodes: impl IntoIterator<Item = f64>,
    order: usize,
    stabilize_every: Option<usize>,
    tail: usize,
) -> Result<Vec<MatchPoint>> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!("Taylor order must be at least 2, got {order}")));
    }
    let mut iter = nodes.into_iter();
    let first = iter.next().unwrap_or(start.rho);
    if first != start.rho {
        return Err(Error::InvalidParameter(format!(
            "outer nodes start at {first}, propagation starts at {}",
            start.rho
        )));
    }
    let keep = tail.max(1);
    let mut history = vec![start];
    for (idx, rho) in iter.enumerate() {
        let cur = history.last().expect("history is never empty");
        let (values, derivatives) = taylor_step(system, cur.rho, rho - cur.rho, order, &cur.values, &cur.derivatives);
        if !values.iter().chain(derivatives.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { node: idx + 1, rho });
        }
        history.push(MatchPoint { rho, values, derivatives });
        if history.len() > keep {
            history.remove(0);
        }
        if let Some(every) = stabilize_every {
            if (idx + 1) % every == 0 {
                let last = history.last().expect("just pushed");
                let m = stabilizer(last).ok_or(Error::NonFinite { node: idx + 1, rho })?;
                for p in history.iter_mut() {
                    p.right_multiply(&m);
                }
            }
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn harmonic_invariant_conserved() {
        let sys = RadialSystem::uncoupled(vec![0.0]);
        let start = MatchPoint { rho: 1.0, values: scalar(0.3f64.sin()), derivatives: scalar(0.3f64.cos()) };
        let nodes = (0..=10_000).map(|k| 1.0 + 0.02 * k as f64);
        let out = propagate(&sys, start, nodes, DEFAULT_TAYLOR_ORDER, None, 1).unwrap();
        let p = &out[0];
        let inv = p.values[(0, 0)].powi(2) + p.derivatives[(0, 0)].powi(2);
        assert!((inv - 1.0).abs() < 1e-10, "{:e}", inv - 1.0);
        let want = (1.0 + 200.0 - 1.0 + 0.3f64).sin();
        assert!((p.values[(0, 0)] - want).abs() < 1e-10);
    }

    #[test]
    fn tail_and_node_checks() {
        let sys = RadialSystem::uncoupled(vec![2.0]);
        let start = MatchPoint { rho: 2.0, values: scalar(1.0), derivatives: scalar(0.0) };
        let out = propagate(&sys, start.clone(), [2.0, 2.1, 2.2, 2.3], 10, None, 2).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].rho, 2.3);
        assert!(propagate(&sys, start.clone(), [2.5, 2.6], 10, None, 1).is_err());
        assert!(propagate(&sys, start, [2.0, 2.1], 1, None, 1).is_err());
    }

    #[test]
    fn stabilization_preserves_span() {
        let a = DMatrix::from_row_slice(2, 2, &[0.4, 0.2, 0.2, -0.3]);
        let sys = RadialSystem::new(vec![3.75, 15.75], a).unwrap();
        let start = MatchPoint {
            rho: 1.0,
            values: DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            derivatives: DMatrix::from_row_slice(2, 2, &[2.5, 0.0, 0.3, 4.5]),
        };
        let nodes: Vec<f64> = (0..=500).map(|k| 1.0 + 0.02 * k as f64).collect();
        let plain = propagate(&sys, start.clone(), nodes.clone(), 10, None, 1).unwrap().pop().unwrap();
        let stab = propagate(&sys, start, nodes, 10, Some(7), 1).unwrap().pop().unwrap();
        // stab = plain · M for some M: recover M from values and check derivatives
        let m = plain.values.clone().try_inverse().unwrap() * &stab.values;
        let d = (&plain.derivatives * &m - &stab.derivatives).abs().max();
        assert!(d < 1e-10 * stab.derivatives.abs().max(), "{d:e}");
    }
}
