//! Curve models for SDCS data: `a + b x + c |x - d|` and polynomials up to
//! degree six, with end-point trimming.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::observables::SdcsCurve;

pub const MAX_DEGREE: usize = 6;
pub const GRID_NODES: usize = 1000;
/// Default trimming cap, as a fraction of the points.
pub const MAX_DROP_FRACTION: f64 = 0.1;

const GOLDEN_ITERS: usize = 100;
const RANK_TOL: f64 = 1e-13;
const MAD_SCALE: f64 = 1.4826;
const TRIM_SIGMAS: f64 = 3.0;
const TRIM_FLOOR: f64 = 1e-9;
const KINK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum FitModel {
    LinLin { a: f64, b: f64, c: f64, d: f64 },
    /// Coefficients of `x^0, x^1, ...`.
    Poly { coeffs: Vec<f64> },
}

impl FitModel {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FitModel::LinLin { a, b, c, d } => a + b * x + c * (x - d).abs(),
            FitModel::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, k| acc * x + k),
        }
    }

    pub fn name(&self) -> String {
        match self {
            FitModel::LinLin { .. } => "linlin".into(),
            FitModel::Poly { coeffs } => format!("poly{}", coeffs.len() - 1),
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            FitModel::LinLin { a, b, c, d } => vec![*a, *b, *c, *d],
            FitModel::Poly { coeffs } => coeffs.clone(),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            FitModel::LinLin { .. } => ModelSpec::LinLin,
            FitModel::Poly { coeffs } => ModelSpec::Poly(coeffs.len() - 1),
        }
    }
}

pub fn eval_model(m: &FitModel, x: f64) -> f64 {
    m.eval(x)
}

/// What a model's x coordinate means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Secondary-electron energy in Ry.
    Energy,
    /// `E_b / E`.
    Fraction,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "energy" => Ok(Axis::Energy),
            "fraction" => Ok(Axis::Fraction),
            other => Err(Error::InvalidParameter(format!("unknown axis '{other}', expected energy or fraction"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Energy => "energy",
            Axis::Fraction => "fraction",
        })
    }
}

/// Evaluates a model fitted against `model_axis` at `value` given on `axis`.
pub fn eval_on_axis(m: &FitModel, value: f64, axis: Axis, model_axis: Axis, total_energy: f64) -> f64 {
    let x = match (axis, model_axis) {
        (Axis::Energy, Axis::Fraction) => value / total_energy,
        (Axis::Fraction, Axis::Energy) => value * total_energy,
        _ => value,
    };
    m.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    LinLin,
    Poly(usize),
}

impl ModelSpec {
    pub fn parameters(self) -> usize {
        match self {
            ModelSpec::LinLin => 4,
            ModelSpec::Poly(deg) => deg + 1,
        }
    }
}

impl std::str::FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "linlin" {
            return Ok(ModelSpec::LinLin);
        }
        let deg = s
            .strip_prefix("poly")
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model '{s}', expected linlin or poly0..poly6")))?;
        if deg > MAX_DEGREE {
            return Err(Error::InvalidParameter(format!("polynomial degree {deg} exceeds {MAX_DEGREE}")));
        }
        Ok(ModelSpec::Poly(deg))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::LinLin => f.write_str("linlin"),
            ModelSpec::Poly(d) => write!(f, "poly{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    /// Indices excluded from fits, ascending.
    pub trimmed: Vec<usize>,
}

impl DataSet {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        Self::weighted(x, y, vec![1.0; n])
    }

    pub fn weighted(x: Vec<f64>, y: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "data lengths differ: {} x, {} y, {} weights",
                x.len(),
                y.len(),
                weights.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("data must be finite".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("x values must be strictly increasing".into()));
        }
        Ok(Self { x, y, weights, trimmed: Vec::new() })
    }

    pub fn from_curve(curve: &SdcsCurve, axis: Axis) -> Result<Self> {
        let scale = match axis {
            Axis::Energy => curve.energy,
            Axis::Fraction => 1.0,
        };
        let (x, y) = curve.samples.iter().map(|&(f, v)| (f * scale, v)).unzip();
        Self::new(x, y)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| self.trimmed.binary_search(i).is_err()).collect()
    }

    fn subset(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let idx = self.active();
        (
            idx.iter().map(|&i| self.x[i]).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
            idx.iter().map(|&i| self.weights[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: FitModel,
    /// `sqrt(Σ w r²)` over the points used.
    pub residual_norm: f64,
    pub trimmed: Vec<usize>,
    pub points_used: usize,
    /// False when `c` is negligible and `d` carries no information.
    pub kink_identified: bool,
}

/// Weighted least squares with column scaling, via SVD.
fn lstsq(design: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<(DVector<f64>, f64)> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(Error::DegenerateFit(format!("{rows} points for {cols} parameters")));
    }
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut a = DMatrix::from_fn(rows, cols, |i, j| design[(i, j)] * sw[i]);
    let mut scale = vec![1.0; cols];
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = a.column(j).norm();
        if norm == 0.0 {
            return Err(Error::DegenerateFit(format!("design column {j} vanishes")));
        }
        *s = norm;
        a.column_mut(j).unscale_mut(norm);
    }
    let rhs = DVector::from_fn(rows, |i, _| y[i] * sw[i]);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::DegenerateFit(format!("design matrix is rank deficient (σmin/σmax = {:e})", smin / smax)));
    }
    let sol = svd.solve(&rhs, 0.0).map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let ssr = (&a * &sol - &rhs).norm_squared();
    let coeffs = DVector::from_fn(cols, |j, _| sol[j] / scale[j]);
    Ok((coeffs, ssr))
}

fn poly_on(x: &[f64], y: &[f64], w: &[f64], degree: usize) -> Result<(FitModel, f64)> {
    let design = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let (c, ssr) = lstsq(&design, y, w)?;
    Ok((FitModel::Poly { coeffs: c.iter().copied().collect() }, ssr))
}

pub fn fit_poly(data: &DataSet, degree: usize) -> Result<FitReport> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!("polynomial degree {degree} exceeds {MAX_DEGREE}")));
    }
    let (x, y, w) = data.subset();
    let (model, ssr) = poly_on(&x, &y, &w, degree)?;
    Ok(FitReport {
        model,
        residual_norm: ssr.sqrt(),
        trimmed: data.trimmed.clone(),
        points_used: x.len(),
        kink_identified: true,
    })
}

/// `(a, b, c)` and SSR for a fixed kink position.
fn linlin_at(x: &[f64], y: &[f64], w: &[f64], d: f64) -> Option<([f64; 3], f64)> {
    let design = DMatrix::from_fn(x.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => x[i],
        _ => (x[i] - d).abs(),
    });
    lstsq(&design, y, w).ok().map(|(c, ssr)| ([c[0], c[1], c[2]], ssr))
}

/// Exact optimum with the kink between `x[k]` and `x[k+1]`.
///
/// There `c|x_i - d| = c s_i x_i - c d s_i` with fixed signs `s_i`, so the
/// model is linear in `(a, b, c, e = -c d)`.
fn linlin_interval(x: &[f64], y: &[f64], w: &[f64], k: usize) -> Option<(FitModel, f64)> {
    let s = |i: usize| if i <= k { -1.0 } else { 1.0 };
    let design = DMatrix::from_fn(x.len(), 4, |i, j| match j {
        0 => 1.0,
        1 => x[i],
        2 => s(i) * x[i],
        _ => s(i),
    });
    let (c, _) = lstsq(&design, y, w).ok()?;
    if c[2] == 0.0 {
        return None;
    }
    let d = -c[3] / c[2];
    if !(x[k]..=x[k + 1]).contains(&d) {
        return None;
    }
    let (abc, ssr) = linlin_at(x, y, w, d)?;
    Some((FitModel::LinLin { a: abc[0], b: abc[1], c: abc[2], d }, ssr))
}

fn linlin_on(x: &[f64], y: &[f64], w: &[f64]) -> Result<(FitModel, f64, bool)> {
    if x.len() < 4 {
        return Err(Error::DegenerateFit(format!("linlin needs at least 4 points, got {}", x.len())));
    }
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let node = |k: usize| lo + (hi - lo) * k as f64 / (GRID_NODES - 1) as f64;
    let mut best: Option<(f64, [f64; 3], f64)> = None;
    let mut best_k = 0;
    for k in 0..GRID_NODES {
        let d = node(k);
        if let Some((abc, ssr)) = linlin_at(x, y, w, d) {
            if best.is_none_or(|b| ssr < b.2) {
                best = Some((d, abc, ssr));
                best_k = k;
            }
        }
    }
    let (mut d, mut abc, mut ssr) =
        best.ok_or_else(|| Error::DegenerateFit("collinear data: no kink position gives a full-rank design".into()))?;

    // golden-section refinement on the bracketing grid cells
    let cost = |d: f64| linlin_at(x, y, w, d).map_or(f64::INFINITY, |r| r.1);
    let (mut a, mut b) = (node(best_k.saturating_sub(1)), node((best_k + 1).min(GRID_NODES - 1)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c1 = b - g * (b - a);
    let mut c2 = a + g * (b - a);
    let (mut f1, mut f2) = (cost(c1), cost(c2));
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - g * (b - a);
            f1 = cost(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + g * (b - a);
            f2 = cost(c2);
        }
    }
    let dg = if f1 <= f2 { c1 } else { c2 };
    if let Some((abc_g, ssr_g)) = linlin_at(x, y, w, dg) {
        if ssr_g < ssr {
            (d, abc, ssr) = (dg, abc_g, ssr_g);
        }
    }
    let mut model = FitModel::LinLin { a: abc[0], b: abc[1], c: abc[2], d };

    for k in 0..x.len() - 1 {
        if let Some((m, s)) = linlin_interval(x, y, w, k) {
            if s < ssr {
                model = m;
                ssr = s;
            }
        }
    }

    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c = match model {
        FitModel::LinLin { c, .. } => c,
        _ => unreachable!(),
    };
    let identified = c.abs() * (hi - lo) > KINK_TOL * ymax.max(f64::MIN_POSITIVE);
    Ok((model, ssr, identified))
}

pub fn fit_linlin(data: &DataSet) -> Result<FitReport> {
    let (x, y, w) = data.subset();
    let (model, ssr, kink_identified) = linlin_on(&x, &y, &w)?;
    Ok(FitReport { model, residual_norm: ssr.sqrt(), trimmed: data.trimmed.clone(), points_used: x.len(), kink_identified })
}

pub fn fit(data: &DataSet, spec: ModelSpec) -> Result<FitReport> {
    match spec {
        ModelSpec::LinLin => fit_linlin(data),
        ModelSpec::Poly(deg) => fit_poly(data, deg),
    }
}

pub fn default_max_drop(points: usize) -> usize {
    (points as f64 * MAX_DROP_FRACTION).floor() as usize
}

/// Drops up to `max_drop` points from the two ends of the data.
///
/// Each round refits the model on the remaining points and looks at the
/// outermost remaining point on each side. The one with the larger absolute
/// residual (smaller index on ties) is dropped if it exceeds three robust
/// standard deviations of the residuals, estimated from the median absolute
/// deviation. Trimming stops at the first round with no such point.
pub fn trim_extremes(data: &DataSet, spec: ModelSpec, max_drop: usize) -> Result<DataSet> {
    let n = data.len();
    if max_drop > default_max_drop(n) {
        return Err(Error::InvalidParameter(format!(
            "cannot drop {max_drop} of {n} points; the cap is {}",
            default_max_drop(n)
        )));
    }
    if n < spec.parameters() + max_drop {
        return Err(Error::InvalidParameter(format!(
            "dropping {max_drop} of {n} points leaves too few for {spec}"
        )));
    }
    let ymax = data.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = data.clone();
    out.trimmed.clear();
    let (mut left, mut right) = (0usize, n - 1);
    for _ in 0..max_drop {
        let model = fit(&out, spec)?.model;
        let active = out.active();
        let res: Vec<f64> = active.iter().map(|&i| data.y[i] - model.eval(data.x[i])).collect();
        let med = median(res.clone());
        let mad = median(res.iter().map(|r| (r - med).abs()).collect());
        let threshold = (TRIM_SIGMAS * MAD_SCALE * mad).max(TRIM_FLOOR * ymax);
        let resid = |i: usize| (data.y[i] - model.eval(data.x[i]) - med).abs();
        let (rl, rr) = (resid(left), resid(right));
        let pick = if rl >= rr { left } else { right };
        if resid(pick) <= threshold {
            break;
        }
        out.trimmed.push(pick);
        out.trimmed.sort_unstable();
        if pick == left {
            left += 1;
        } else {
            right -= 1;
        }
    }
    Ok(out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Largest `|m(x) - m(E - x)|` over `samples` points, relative to `max |m|`.
pub fn symmetry_defect(m: &FitModel, total_energy: f64, samples: usize) -> f64 {
    let xs: Vec<f64> = (0..samples).map(|i| total_energy * i as f64 / (samples - 1).max(1) as f64).collect();
    let scale = xs.iter().map(|&x| m.eval(x).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    xs.iter().map(|&x| (m.eval(x) - m.eval(total_energy - x)).abs()).fold(0.0, f64::max) / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Factor applied to the model values.
    pub scale: f64,
    pub rms: f64,
    pub max_abs: f64,
    pub points: usize,
}

/// Compares a model against reference points, optionally with the single
/// scale factor that minimizes the squared deviation.
pub fn compare(m: &FitModel, reference: &[(f64, f64)], free_scale: bool) -> Result<Comparison> {
    compare_with(|x| m.eval(x), reference, free_scale)
}

pub fn compare_with(f: impl Fn(f64) -> f64, reference: &[(f64, f64)], free_scale: bool) -> Result<Comparison> {
    if reference.is_empty() {
        return Err(Error::InvalidParameter("reference data is empty".into()));
    }
    let model: Vec<f64> = reference.iter().map(|&(x, _)| f(x)).collect();
    let scale = if free_scale {
        let num: f64 = model.iter().zip(reference).map(|(v, r)| v * r.1).sum();
        let den: f64 = model.iter().map(|v| v * v).sum();
        if den == 0.0 {
            return Err(Error::DegenerateFit("model vanishes on the reference points".into()));
        }
        num / den
    } else {
        1.0
    };
    let dev: Vec<f64> = model.iter().zip(reference).map(|(v, r)| scale * v - r.1).collect();
    if dev.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("reference lies outside the compared curve".into()));
    }
    Ok(Comparison {
        scale,
        rms: (dev.iter().map(|d| d * d).sum::<f64>() / dev.len() as f64).sqrt(),
        max_abs: dev.iter().fold(0.0, |m, d| m.max(d.abs())),
        points: dev.len(),
    })
}

/// Piecewise-linear interpolant through sorted points; NaN outside their range.
pub fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let k = points.partition_point(|p| p.0 < x);
    if k < points.len() && points[k].0 == x {
        return points[k].1;
    }
    if k == 0 || k == points.len() {
        return f64::NAN;
    }
    let (x0, y0) = points[k - 1];
    let (x1, y1) = points[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(m: &FitModel, e: f64) -> DataSet {
        let x: Vec<f64> = (0..80).map(|i| e * i as f64 / 79.0).collect();
        let y = x.iter().map(|&v| m.eval(v)).collect();
        DataSet::new(x, y).unwrap()
    }

    fn quartic() -> FitModel {
        FitModel::Poly { coeffs: vec![0.042012, -0.650385, 3.8148108, -10.0556766, 10.054884] }
    }

    fn kinked() -> FitModel {
        FitModel::LinLin { a: 0.0405, b: 0.00567, c: 0.20568, d: 0.25395 }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1e-300))
    }

    #[test]
    fn evaluation_values() {
        assert_eq!(quartic().eval(0.0), 0.042012);
        // 0.042012 - 0.3251925 + 0.9537027 - 1.256959575 + 0.62843025
        assert!((quartic().eval(0.5) - 0.041992875).abs() < 1e-12);
        assert!((kinked().eval(0.0) - (0.0405 + 0.20568 * 0.25395)).abs() < 1e-16);
    }

    #[test]
    fn quartic_round_trip() {
        let r = fit_poly(&samples(&quartic(), 1.0), 4).unwrap();
        assert!(close(&r.model.coefficients(), &quartic().coefficients(), 1e-6), "{:?}", r.model);
    }

    #[test]
    fn linlin_round_trip() {
        let r = fit_linlin(&samples(&kinked(), 1.0)).unwrap();
        let got = r.model.coefficients();
        assert!(close(&got[..3], &kinked().coefficients()[..3], 1e-6), "{got:?}");
        assert!((got[3] - 0.25395).abs() < 1e-4 * 0.25395);
        assert!(r.kink_identified);
    }

    #[test]
    fn returned_kink_beats_grid() {
        let mut data = samples(&kinked(), 1.0);
        for (i, y) in data.y.iter_mut().enumerate() {
            *y += 1e-4 * ((i * 37 % 11) as f64 - 5.0);
        }
        let r = fit_linlin(&data).unwrap();
        let ssr = r.residual_norm.powi(2);
        for k in 0..GRID_NODES {
            let d = k as f64 / (GRID_NODES - 1) as f64;
            if let Some((_, s)) = linlin_at(&data.x, &data.y, &data.weights, d) {
                assert!(ssr <= s * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn straight_line_flags_kink() {
        let line = FitModel::Poly { coeffs: vec![0.3, -0.1] };
        let r = fit_linlin(&samples(&line, 2.0)).unwrap();
        assert!(!r.kink_identified);
        assert!(r.residual_norm < 1e-12);
    }

    #[test]
    fn constant_and_monotone_residuals() {
        let c = FitModel::Poly { coeffs: vec![0.25] };
        let r = fit_poly(&samples(&c, 1.0), 0).unwrap();
        assert!((r.model.coefficients()[0] - 0.25).abs() < 1e-15);
        let data = samples(&FitModel::Poly { coeffs: vec![0.0] }, 1.0);
        let y: Vec<f64> = data.x.iter().map(|x| (3.0 * x).sin()).collect();
        let data = DataSet::new(data.x, y).unwrap();
        let norms: Vec<f64> = (0..=6).map(|d| fit_poly(&data, d).unwrap().residual_norm).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
        assert!(fit_poly(&data, 7).is_err());
    }

    #[test]
    fn rank_deficiency_reported() {
        let data = DataSet::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(fit_poly(&data, 4), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_linlin(&data), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn trimming_rules() {
        let clean = samples(&quartic(), 1.0);
        assert_eq!(trim_extremes(&clean, ModelSpec::Poly(4), 0).unwrap().trimmed, Vec::<usize>::new());
        assert_eq!(trim_extremes(&clean, ModelSpec::Poly(4), 8).unwrap().trimmed, Vec::<usize>::new());
        assert!(trim_extremes(&clean, ModelSpec::Poly(4), 9).is_err());

        let mut planted = clean.clone();
        for (i, bump) in [(0, 0.02), (1, -0.015), (2, 0.01)] {
            planted.y[i] += bump;
        }
        let t = trim_extremes(&planted, ModelSpec::Poly(4), 8).unwrap();
        assert_eq!(t.trimmed, vec![0, 1, 2]);
        let r = fit_poly(&t, 4).unwrap();
        assert!(close(&r.model.coefficients(), &quartic().coefficients(), 1e-6));

        let mut interior = clean.clone();
        interior.y[40] += 5.0;
        let t = trim_extremes(&interior, ModelSpec::Poly(4), 8).unwrap();
        assert!(!t.trimmed.contains(&40));
    }

    #[test]
    fn optimal_against_perturbation() {
        let mut data = samples(&kinked(), 1.0);
        for (i, y) in data.y.iter_mut().enumerate() {
            *y += 2e-4 * ((i * 13 % 7) as f64 - 3.0);
        }
        let r = fit_poly(&data, 3).unwrap();
        let base = r.residual_norm;
        for k in 0..4 {
            for s in [-1e-6, 1e-6] {
                let mut c = r.model.coefficients();
                c[k] += s;
                let m = FitModel::Poly { coeffs: c };
                let ssr: f64 = data.x.iter().zip(&data.y).map(|(x, y)| (y - m.eval(*x)).powi(2)).sum();
                assert!(ssr.sqrt() >= base * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn axis_conversion() {
        let m = FitModel::Poly { coeffs: vec![0.0, 1.0] };
        assert_eq!(eval_on_axis(&m, 0.5, Axis::Fraction, Axis::Energy, 2.0), 1.0);
        assert_eq!(eval_on_axis(&m, 1.0, Axis::Energy, Axis::Fraction, 2.0), 0.5);
    }

    #[test]
    fn free_scale_recovers_factor() {
        let m = quartic();
        let reference: Vec<(f64, f64)> = (0..20).map(|i| i as f64 / 19.0).map(|x| (x, 0.03 * m.eval(x))).collect();
        let c = compare(&m, &reference, true).unwrap();
        assert!((c.scale - 0.03).abs() < 1e-14);
        assert!(c.max_abs < 1e-15);
        assert_eq!(compare(&m, &reference, false).unwrap().scale, 1.0);
    }

    #[test]
    fn linear_interpolation() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)];
        assert_eq!(interpolate(&pts, 0.5), 2.0);
        assert_eq!(interpolate(&pts, 2.0), 2.0);
        assert!(interpolate(&pts, 2.5).is_nan());
        assert!(compare_with(|x| interpolate(&pts, x), &[(3.0, 1.0)], false).is_err());
    }

    #[test]
    fn model_specs_parse() {
        assert_eq!("linlin".parse::<ModelSpec>().unwrap(), ModelSpec::LinLin);
        assert_eq!("poly6".parse::<ModelSpec>().unwrap(), ModelSpec::Poly(6));
        assert!("poly7".parse::<ModelSpec>().is_err());
        assert!("spline".parse::<ModelSpec>().is_err());
    }
}
