//! Zero-angular-momentum hyperspherical channels.
//!
//! With all one-electron angular momenta zero the harmonic reduces to a
//! function of the hyperangle alone: `P_n^{(1/2,1/2)}(cos 2α)` times the
//! constant `Y_00^00 = 1/(4π)`, kept only when `s + n` is even.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::Rule;

/// Default Gauss-Legendre order for angular integrals.
pub const DEFAULT_QUAD_ORDER: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    Singlet,
    Triplet,
}

impl Symmetry {
    pub fn from_spin(s: u8) -> Result<Self> {
        match s {
            0 => Ok(Symmetry::Singlet),
            1 => Ok(Symmetry::Triplet),
            other => Err(Error::InvalidParameter(format!("symmetry label must be 0 or 1, got {other}"))),
        }
    }

    pub fn spin(self) -> u8 {
        match self {
            Symmetry::Singlet => 0,
            Symmetry::Triplet => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Symmetry::Singlet => "singlet",
            Symmetry::Triplet => "triplet",
        }
    }

    /// Whether the symmetrization factor `(1 + (-1)^{s+n})/2` keeps degree `n`.
    pub fn admits(self, n: u32) -> bool {
        (self.spin() as u32 + n).is_multiple_of(2)
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "singlet" | "0" => Ok(Symmetry::Singlet),
            "triplet" | "1" => Ok(Symmetry::Triplet),
            other => Err(Error::InvalidParameter(format!("unknown symmetry '{other}'"))),
        }
    }
}

/// Ordered Jacobi degrees spanning the channel space of one symmetry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelBasis {
    symmetry: Symmetry,
    degrees: Vec<u32>,
}

impl ChannelBasis {
    pub fn new(symmetry: Symmetry, degrees: Vec<u32>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InvalidBasis("basis must contain at least one degree".into()));
        }
        if let Some(&n) = degrees.iter().find(|&&n| !symmetry.admits(n)) {
            return Err(Error::InvalidBasis(format!(
                "degree {n} has the wrong parity for the {symmetry} symmetry"
            )));
        }
        if degrees.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidBasis("degrees must be strictly increasing".into()));
        }
        Ok(Self { symmetry, degrees })
    }

    /// The first `size` admissible degrees: 0, 2, 4, ... or 1, 3, 5, ...
    pub fn with_size(symmetry: Symmetry, size: usize) -> Result<Self> {
        let offset = symmetry.spin() as u32;
        Self::new(symmetry, (0..size as u32).map(|k| 2 * k + offset).collect())
    }

    /// Six channels: n = 0..10 even (singlet) or 1..11 odd (triplet).
    pub fn default_for(symmetry: Symmetry) -> Self {
        Self::with_size(symmetry, 6).expect("default basis is valid")
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn nu(&self, index: usize) -> f64 {
        nu_of(self.degrees[index])
    }

    /// `ν(ν+1)` per channel, the centrifugal strengths of the radial system.
    pub fn centrifugal(&self) -> Vec<f64> {
        self.degrees.iter().map(|&n| {
            let nu = nu_of(n);
            nu * (nu + 1.0)
        }).collect()
    }

    /// Channel values of the harmonics at one hyperangle.
    pub fn evaluate(&self, p: AngularPoint) -> Vec<f64> {
        self.degrees.iter().map(|&n| angular_fn(n, self.symmetry, p)).collect()
    }
}

/// Hyperangle `α = arctan(r2/r1)` in `[0, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngularPoint(f64);

impl AngularPoint {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("hyperangle {alpha} outside [0, π/2]")));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// The exchange image `π/2 - α`.
    pub fn reflected(self) -> Self {
        Self(FRAC_PI_2 - self.0)
    }
}

fn nu_of(n: u32) -> f64 {
    2.0 * n as f64 + 1.5
}

pub fn nu_index(n: i64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidParameter(format!("Jacobi degree must be non-negative, got {n}")));
    }
    Ok(nu_of(n as u32))
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` by forward three-term recurrence.
pub fn jacobi(n: i64, a: f64, b: f64, x: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidParameter(format!("Jacobi degree must be non-negative, got {n}")));
    }
    if a <= -1.0 || b <= -1.0 {
        return Err(Error::InvalidParameter(format!("Jacobi parameters must exceed -1, got ({a}, {b})")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("Jacobi argument {x} outside [-1, 1]")));
    }
    Ok(jacobi_unchecked(n as u32, a, b, x))
}

pub(crate) fn jacobi_unchecked(n: u32, a: f64, b: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for k in 1..n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * (k + 1.0) * (k + a + b + 1.0) * s;
        let c2 = (s + 1.0) * (a * a - b * b);
        let c3 = s * (s + 1.0) * (s + 2.0);
        let c4 = 2.0 * (k + a) * (k + b) * (s + 2.0);
        let next = ((c2 + c3 * x) * cur - c4 * prev) / c1;
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalization making `∫ φ_n φ_m sin²α cos²α dα (4π)² = δ_nm`.
fn norm(n: u32) -> f64 {
    // Γ(n + 3/2) = Γ(3/2) ∏_{k=1}^{n} (k + 1/2)
    let mut gamma = 0.5 * PI.sqrt();
    for k in 1..=n {
        gamma *= k as f64 + 0.5;
    }
    let mut fact = 1.0; // n! (n+1)!
    for k in 1..=n {
        fact *= (k * k) as f64;
    }
    fact *= (n + 1) as f64;
    let h = 4.0 / (2.0 * n as f64 + 2.0) * gamma * gamma / fact;
    (8.0 / h).sqrt()
}

/// Channel function with the constant `Y_00^00 = 1/(4π)` folded in.
pub fn angular_fn(n: u32, s: Symmetry, p: AngularPoint) -> f64 {
    if !s.admits(n) {
        return 0.0;
    }
    let x = (2.0 * p.0).cos();
    norm(n) * jacobi_unchecked(n, 0.5, 0.5, x) / (4.0 * PI)
}

/// Gram matrix of the basis under `sin²α cos²α dα (4π)²`.
pub fn gram_matrix(basis: &ChannelBasis, quad_order: usize) -> Result<DMatrix<f64>> {
    let rule = Rule::new(quad_order)?;
    let n = basis.len();
    let mut g = DMatrix::zeros(n, n);
    let scale = (4.0 * PI).powi(2);
    for (a, b) in [(0.0, FRAC_PI_2 / 2.0), (FRAC_PI_2 / 2.0, FRAC_PI_2)] {
        for (alpha, w) in rule.panel(a, b) {
            let p = AngularPoint(alpha);
            let vals = basis.evaluate(p);
            let weight = w * (alpha.sin() * alpha.cos()).powi(2) * scale;
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += weight * vals[i] * vals[j];
                }
            }
        }
    }
    Ok(g)
}
