//! Seven-node implicit march for `F'' = -W(ρ) F` on a uniform grid.
//!
//! The stencil is the symmetric two-step-type scheme
//!
//! ```text
//! Σ_k a_k F_{m-6+k} = h² Σ_k b_k F''_{m-6+k},    k = 0..=6
//! ```
//!
//! with `a = (1, -2, 2, -2, 2, -2, 1)`, i.e. `(ζ-1)²(ζ⁴+ζ²+1)`, whose extra
//! roots sit on the unit circle away from 1, and `b` fixed by Taylor matching
//! through `h⁸`. Symmetry makes the local error expansion even in `h`; the
//! global error is `O(h⁸)`.

use crate::error::{Error, Result};
use crate::real::{stacked_r, Block, Real};

use super::RadialSystem;

pub const STENCIL_A: [i64; 7] = [1, -2, 2, -2, 2, -2, 1];

/// `b_k` as exact rationals `(num, den)`.
pub const STENCIL_B: [(i64, i64); 7] = [
    (275, 4032),
    (1021, 1120),
    (-23, 2240),
    (5347, 5040),
    (-23, 2240),
    (1021, 1120),
    (275, 4032),
];

/// Relative pivot floor for the per-step block solve.
const PIVOT_TOL: f64 = 1e-13;

fn coeffs<T: Real>() -> ([T; 7], [T; 7]) {
    let a = STENCIL_A.map(|v| T::from(v as f64));
    let b = STENCIL_B.map(|(n, d)| T::from_ratio(n, d));
    (a, b)
}

/// Marches `f` forward until it holds `upto + 1` nodes.
///
/// `f[k]` is the `N×N` block of all columns at node `k`, located at
/// `rho_at(k)`. The last six entries on entry seed the stencil; no earlier
/// node is read.
///
/// With `stabilize`, every step re-orthogonalizes the columns against the
/// stacked values at nodes `m` and `m-3` and applies the same right factor to
/// every stored node. The column span is unchanged; this keeps closed
/// channels growing like `ρ^{ν+1}` from collapsing the slower columns.
pub fn march<T: Real>(
    system: &RadialSystem,
    h: T,
    rho_at: impl Fn(usize) -> T,
    f: &mut Vec<Block<T>>,
    upto: usize,
    stabilize: bool,
) -> Result<()> {
    let start = f.len();
    if start < 6 {
        return Err(Error::InvalidParameter(format!("march needs six seed nodes, got {start}")));
    }
    let (a, b) = coeffs::<T>();
    let n = system.dim();
    let h2 = h * h;
    let mut g: Vec<Block<T>> = (start - 6..start).map(|k| system.w_block(rho_at(k)).mul(&f[k])).collect();
    let ident = Block::<T>::identity(n);
    for m in start..=upto {
        let mut rhs = Block::<T>::zeros(n);
        for k in 0..6 {
            rhs.axpy(-a[k], &f[m - 6 + k]);
            rhs.axpy(-(h2 * b[k]), &g[k]);
        }
        let rho = rho_at(m);
        let w = system.w_block(rho);
        let mut lhs = ident.scaled(a[6]);
        lhs.axpy(h2 * b[6], &w);
        let floor = T::from(PIVOT_TOL) * (a[6].abs() + (h2 * b[6]).abs() * w.max_abs());
        let next = lhs
            .solve_with_floor(&rhs, floor)
            .ok_or(Error::SingularStep { node: m, rho: rho.to_f64() })?;
        if !next.is_finite() {
            return Err(Error::NonFinite { node: m, rho: rho.to_f64() });
        }
        g.remove(0);
        g.push(w.mul(&next));
        f.push(next);
        if stabilize {
            let r = stacked_r(&f[m], &f[m - 3]).ok_or(Error::SingularStep { node: m, rho: rho.to_f64() })?;
            let r_inv = r
                .solve(&ident, 1e-300)
                .ok_or(Error::SingularStep { node: m, rho: rho.to_f64() })?;
            for block in f.iter_mut().chain(g.iter_mut()) {
                *block = block.mul(&r_inv);
            }
        }
    }
    Ok(())
}

/// Relative residual of the discrete equations for the stencil ending at node `m`.
pub fn stencil_residual<T: Real>(system: &RadialSystem, h: T, rho_at: impl Fn(usize) -> T, f: &[Block<T>], m: usize) -> f64 {
    let (a, b) = coeffs::<T>();
    let n = system.dim();
    let mut r = Block::<T>::zeros(n);
    let mut scale = 0.0f64;
    for k in 0..7 {
        let node = m - 6 + k;
        let g = system.w_block(rho_at(node)).mul(&f[node]);
        r.axpy(a[k], &f[node]);
        r.axpy(h * h * b[k], &g);
        scale = scale.max(f[node].max_abs().to_f64());
    }
    r.max_abs().to_f64() / scale
}

/// Central nine-point first derivative at node `m`.
pub fn derivative<T: Real>(f: &[Block<T>], m: usize, h: T) -> Block<T> {
    const W: [(i64, i64); 9] = [(1, 280), (-4, 105), (1, 5), (-4, 5), (0, 1), (4, 5), (-1, 5), (4, 105), (-1, 280)];
    let n = f[m].dim();
    let mut d = Block::<T>::zeros(n);
    for (k, &(num, den)) in W.iter().enumerate() {
        if num != 0 {
            d.axpy(T::from_ratio(num, den) / h, &f[m + k - 4]);
        }
    }
    d
}
