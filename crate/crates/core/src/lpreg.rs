//! Finite-sample local polynomial regression: weights, worst-case bias over
//! Taylor and Hölder classes, and nearest-neighbor variance estimates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::poly::{PiecewisePolynomial, Polynomial};

/// Observations `(x_i, y_i)` sorted by `x`, with the point of interest at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Sample {
    /// Validates and sorts by `x` (stable, so ties keep their input order).
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain(format!("x has {} values but y has {}", x.len(), y.len())));
        }
        if let Some(i) = x.iter().chain(y.iter()).position(|v| !v.is_finite()) {
            let i = if i < x.len() { i } else { i - x.len() };
            return Err(Error::domain(format!("non-finite value in observation {i}")));
        }
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let xs = idx.iter().map(|&i| x[i]).collect();
        let ys = idx.iter().map(|&i| y[i]).collect();
        Ok(Self { x: xs, y: ys })
    }

    /// Shifts the running variable so the point of interest is at zero.
    pub fn centered(mut self, at: f64) -> Self {
        for v in &mut self.x {
            *v -= at;
        }
        self
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn with_y(&self, y: Vec<f64>) -> Self {
        assert_eq!(y.len(), self.x.len());
        Self { x: self.x.clone(), y }
    }
}

/// Which observations enter a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Both,
    /// `x ≥ 0`.
    Plus,
    /// `x < 0`.
    Minus,
}

impl Side {
    pub fn contains(self, x: f64) -> bool {
        match self {
            Side::Both => true,
            Side::Plus => x >= 0.0,
            Side::Minus => x < 0.0,
        }
    }
}

/// Local polynomial weights at zero: `T̂ = Σ w_i y_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFit {
    /// One weight per observation, zero outside the window.
    pub weights: Vec<f64>,
    pub h: f64,
    pub q: usize,
    pub kernel: KernelSpec,
    pub side: Side,
    /// Design points, aligned with `weights`.
    x: Vec<f64>,
    /// Number of observations with positive kernel weight.
    pub effective_n: usize,
    /// Index range holding every nonzero weight.
    window: (usize, usize),
    sorted: bool,
}

impl LocalFit {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Nonzero-weight `(x_i, w_i)` pairs.
    pub fn active(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (a, b) = self.window;
        self.x[a..b].iter().zip(&self.weights[a..b]).filter(|(_, w)| **w != 0.0).map(|(x, w)| (*x, *w))
    }

    /// Window of design points and weights containing every nonzero weight.
    fn window_slices(&self) -> (&[f64], &[f64]) {
        let (a, b) = self.window;
        (&self.x[a..b], &self.weights[a..b])
    }
}

const MAX_CONDITION: f64 = 1e12;

/// `w_i = e₁' Q⁻¹ m_q(x_i/h) k(x_i/h)` with `Q = Σ k(x_i/h) m_q(x_i/h) m_q(x_i/h)'`.
///
/// Points on the edge of the kernel support get zero weight.
pub fn lp_weights(x: &[f64], h: f64, k: &KernelSpec, q: usize, side: Side) -> Result<LocalFit> {
    let sorted = x.windows(2).all(|w| w[0] <= w[1]);
    let mut buf = Vec::new();
    let (start, effective_n) = window_weights(x, sorted, h, k, q, side, &mut buf)?;
    let mut weights = vec![0.0; x.len()];
    weights[start..start + buf.len()].copy_from_slice(&buf);
    Ok(LocalFit {
        weights,
        h,
        q,
        kernel: k.clone(),
        side,
        x: x.to_vec(),
        effective_n,
        window: (start, start + buf.len()),
        sorted,
    })
}

/// Core of [`lp_weights`]: writes the weights of `x[start..start + w.len()]`
/// into `w` (reusing its allocation) and returns `start` and the number of
/// points with positive kernel weight. For sorted `x` only the kernel window
/// is visited.
pub(crate) fn window_weights(
    x: &[f64],
    sorted: bool,
    h: f64,
    k: &KernelSpec,
    q: usize,
    side: Side,
    w: &mut Vec<f64>,
) -> Result<(usize, usize)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("bandwidth must be positive and finite, got {h}")));
    }
    let (lo, hi) = k.shape.support();
    let dim = q + 1;
    let (start, end) =
        if sorted { (x.partition_point(|&v| v / h <= lo), x.partition_point(|&v| v / h < hi)) } else { (0, x.len()) };
    w.clear();
    w.resize(end - start, 0.0);
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut effective_n = 0;
    let mut m = [0.0f64; 16];
    for (wi, &xi) in w.iter_mut().zip(&x[start..end]) {
        if !side.contains(xi) {
            continue;
        }
        let u = xi / h;
        if u <= lo || u >= hi {
            continue;
        }
        let kval = k.shape.eval(u);
        if kval == 0.0 {
            continue;
        }
        *wi = kval;
        effective_n += 1;
        let mut pw = kval;
        for mj in m.iter_mut().take(2 * dim - 1) {
            *mj = pw;
            pw *= u;
        }
        for a in 0..dim {
            for b in 0..dim {
                gram[(a, b)] += m[a + b];
            }
        }
    }
    let insufficient = || {
        Error::insufficient(
            format!("local polynomial of order {q} is not identified at bandwidth {h} ({side:?} side)"),
            effective_n,
        )
    };
    if effective_n < dim {
        return Err(insufficient());
    }
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let (emin, emax) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e.abs())));
    if !(emin > 0.0) || emax / emin > MAX_CONDITION {
        return Err(insufficient());
    }
    let chol = gram.cholesky().ok_or_else(insufficient)?;
    let mut e1 = DVector::zeros(dim);
    e1[0] = 1.0;
    let c = chol.solve(&e1);
    for (wi, &xi) in w.iter_mut().zip(&x[start..end]) {
        if *wi != 0.0 {
            let u = xi / h;
            let poly = c.iter().rev().fold(0.0, |acc, &cj| acc * u + cj);
            *wi *= poly;
        }
    }
    Ok((start, effective_n))
}

/// `Σ w_i y_i`.
pub fn estimate(fit: &LocalFit, y: &[f64]) -> f64 {
    assert_eq!(fit.weights.len(), y.len(), "one outcome per observation");
    let (a, b) = fit.window;
    fit.weights[a..b].iter().zip(&y[a..b]).map(|(w, y)| w * y).sum()
}

fn factorial(p: usize) -> f64 {
    (1..=p).map(|i| i as f64).product()
}

/// Errors unless `Σ w_i x_i^j = 0` for `1 ≤ j < p` (relative to `Σ |w_i x_i^j|`).
fn check_moments(x: &[f64], w: &[f64], p: usize) -> Result<()> {
    for j in 1..p {
        let (s, a) = x.iter().zip(w).fold((0.0, 0.0), |(s, a), (x, w)| {
            let t = w * x.powi(j as i32);
            (s + t, a + t.abs())
        });
        if s.abs() > 1e-8 * a.max(f64::MIN_POSITIVE) {
            return Err(Error::InfiniteBias(format!(
                "weights do not annihilate x^{j}; a local polynomial of order at least {} is needed",
                p - 1
            )));
        }
    }
    Ok(())
}

fn check_order(p: usize) -> Result<()> {
    if p == 0 {
        Err(Error::domain("smoothness order p must be at least 1"))
    } else {
        Ok(())
    }
}

/// Worst-case bias over the Taylor class: `(M / p!) Σ |w_i x_i^p|`.
pub fn maxbias_taylor(fit: &LocalFit, p: usize, m: f64) -> Result<f64> {
    let (x, w) = fit.window_slices();
    taylor_bias_slices(x, w, p, m)
}

pub(crate) fn taylor_bias_slices(x: &[f64], w: &[f64], p: usize, m: f64) -> Result<f64> {
    check_order(p)?;
    check_moments(x, w, p)?;
    let s: f64 = x.iter().zip(w).map(|(x, w)| (w * x.powi(p as i32)).abs()).sum();
    Ok(m * s / factorial(p))
}

/// `w̄_p(s) = Σ_{x_i ≥ s} w_i (x_i − s)^{p−1} / (p−1)!` for `s ≥ 0` (`plus`),
/// and the same for the reflected points `−x_i`, `x_i < 0` (`minus`).
#[derive(Clone, Debug, PartialEq)]
pub struct BiasWeightFunction {
    pub p: usize,
    pub plus: PiecewisePolynomial,
    pub minus: PiecewisePolynomial,
}

impl BiasWeightFunction {
    /// Value at `s`, with `s < 0` read off the reflected side.
    pub fn eval(&self, s: f64) -> f64 {
        if s >= 0.0 {
            self.plus.eval(s)
        } else {
            self.minus.eval(-s)
        }
    }

    /// `∫ |w̄|` over both sides.
    pub fn integral_abs(&self) -> f64 {
        self.plus.integral_abs() + self.minus.integral_abs()
    }
}

/// One side of the bias weight function from points `t_i > 0` (ascending) and
/// weights, evaluated directly from the definition piece by piece.
fn tail_weight_side(pts: &[(f64, f64)], p: usize) -> PiecewisePolynomial {
    // Merge equal abscissas.
    let mut knots: Vec<(f64, f64)> = Vec::new();
    for &(t, w) in pts {
        match knots.last_mut() {
            Some((lt, lw)) if *lt == t => *lw += w,
            _ => knots.push((t, w)),
        }
    }
    if knots.is_empty() {
        return PiecewisePolynomial::zero();
    }
    let mut breaks = vec![0.0];
    breaks.extend(knots.iter().map(|k| k.0));
    let n = knots.len();
    // pw[j] = Σ_{t_i > a} w_i (t_i − a)^j for the current left end a.
    let mut pw = vec![0.0; p];
    let mut pieces = vec![Polynomial::zero(); n];
    let fact = factorial(p - 1);
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    for k in (0..n).rev() {
        let a = breaks[k];
        let d = knots[k].0 - a;
        let wk = knots[k].1;
        // Move the reference point from t_k down to a: add the point at t_k.
        let mut next = vec![0.0; p];
        for (j, nj) in next.iter_mut().enumerate() {
            let mut acc = wk * d.powi(j as i32);
            for (mm, pm) in pw.iter().enumerate().take(j + 1) {
                acc += binom(j, mm) * d.powi((j - mm) as i32) * pm;
            }
            *nj = acc;
        }
        pw = next;
        // Piece on [a, t_k] in local t = s − a:
        // Σ w_i (t_i − a − t)^{p−1} = Σ_m C(p−1, m) (−t)^{p−1−m} pw[m].
        let mut coeffs = vec![0.0; p];
        for (mm, &pm) in pw.iter().enumerate() {
            let deg = p - 1 - mm;
            let sign = if deg.is_multiple_of(2) { 1.0 } else { -1.0 };
            coeffs[deg] += binom(p - 1, mm) * sign * pm / fact;
        }
        pieces[k] = Polynomial::new(coeffs);
    }
    if breaks[1] == 0.0 {
        // A knot at zero contributes only at s = 0; drop the empty piece.
        breaks.remove(0);
        pieces.remove(0);
        if pieces.is_empty() {
            return PiecewisePolynomial::zero();
        }
    }
    PiecewisePolynomial::from_local(breaks, pieces)
}

pub fn bias_weight_function(fit: &LocalFit, p: usize) -> BiasWeightFunction {
    bias_weight_from_pairs(fit.active(), p)
}

fn bias_weight_from_pairs(pairs: impl Iterator<Item = (f64, f64)>, p: usize) -> BiasWeightFunction {
    assert!(p >= 1, "p must be at least 1");
    let mut plus: Vec<(f64, f64)> = Vec::new();
    let mut minus: Vec<(f64, f64)> = Vec::new();
    for (x, w) in pairs {
        if x >= 0.0 {
            plus.push((x, w));
        } else {
            minus.push((-x, w));
        }
    }
    plus.sort_by(|a, b| a.0.total_cmp(&b.0));
    minus.sort_by(|a, b| a.0.total_cmp(&b.0));
    BiasWeightFunction { p, plus: tail_weight_side(&plus, p), minus: tail_weight_side(&minus, p) }
}

/// Worst-case bias over the Hölder class: `M ∫ |w̄_p(s)| ds`.
pub fn maxbias_holder(fit: &LocalFit, p: usize, m: f64) -> Result<f64> {
    let (x, w) = fit.window_slices();
    holder_bias_slices(x, w, fit.sorted, p, m)
}

pub(crate) fn holder_bias_slices(x: &[f64], w: &[f64], sorted: bool, p: usize, m: f64) -> Result<f64> {
    check_order(p)?;
    check_moments(x, w, p)?;
    let pairs = x.iter().zip(w).map(|(x, w)| (*x, *w)).filter(|p| p.1 != 0.0);
    if p > 3 {
        return Ok(m * bias_weight_from_pairs(pairs, p).integral_abs());
    }
    let (plus, minus) = if sorted {
        let cut = x.partition_point(|&v| v < 0.0);
        let plus = x[cut..].iter().zip(&w[cut..]).rev().map(|(x, w)| (*x, *w));
        let minus = x[..cut].iter().zip(&w[..cut]).map(|(x, w)| (-*x, *w));
        (side_abs_integral(plus.filter(|p| p.1 != 0.0), p), side_abs_integral(minus.filter(|p| p.1 != 0.0), p))
    } else {
        let mut plus: Vec<(f64, f64)> = pairs.clone().filter(|(x, _)| *x >= 0.0).collect();
        let mut minus: Vec<(f64, f64)> = pairs.filter(|(x, _)| *x < 0.0).map(|(x, w)| (-x, w)).collect();
        plus.sort_by(|a, b| b.0.total_cmp(&a.0));
        minus.sort_by(|a, b| b.0.total_cmp(&a.0));
        (side_abs_integral(plus.into_iter(), p), side_abs_integral(minus.into_iter(), p))
    };
    Ok(m * (plus + minus))
}

const BINOM: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 2.0, 1.0]];

/// `∫₀^∞ |w̄_p|` for one side from points `(t_i, w_i)`, `t_i ≥ 0`, given in
/// descending order of `t`. Allocation-free version of
/// [`bias_weight_function`] for `p ≤ 3`.
fn side_abs_integral(pts: impl Iterator<Item = (f64, f64)>, p: usize) -> f64 {
    debug_assert!((1..=3).contains(&p));
    if p == 2 {
        return side_abs_integral_linear(pts);
    }
    // pw[j] = Σ_{t_i ≥ r} w_i (t_i − r)^j at the current reference point r.
    let mut pw = [0.0f64; 3];
    let mut r = f64::NAN;
    let mut total = 0.0;
    let fact = if p == 3 { 2.0 } else { 1.0 };
    let piece = |pw: &[f64; 3], len: f64| -> f64 {
        // Σ_m C(p−1, m) (−τ)^{p−1−m} pw[m] / (p−1)! on τ ∈ [0, len].
        let mut c = [0.0f64; 3];
        for (mm, &pm) in pw.iter().enumerate().take(p) {
            let deg = p - 1 - mm;
            let sign = if deg.is_multiple_of(2) { 1.0 } else { -1.0 };
            c[deg] += BINOM[p - 1][mm] * sign * pm / fact;
        }
        abs_integral_quadratic(c, len)
    };
    let shift = |pw: &mut [f64; 3], d: f64| {
        let old = *pw;
        for j in 0..p {
            let mut acc = 0.0;
            let mut dp = 1.0;
            for mm in (0..=j).rev() {
                acc += BINOM[j][mm] * dp * old[mm];
                dp *= d;
            }
            pw[j] = acc;
        }
    };
    for (t, w) in pts {
        if r.is_finite() {
            let d = r - t;
            shift(&mut pw, d);
            if d > 0.0 {
                total += piece(&pw, d);
            }
        }
        pw[0] += w;
        r = t;
    }
    if r.is_finite() && r > 0.0 {
        shift(&mut pw, r);
        total += piece(&pw, r);
    }
    total
}

/// The `p = 2` case: `w̄₂` is linear between design points.
fn side_abs_integral_linear(pts: impl Iterator<Item = (f64, f64)>) -> f64 {
    // On (t, r): w̄₂(t + τ) = b − aτ, with a = Σ_{t_i ≥ r} w_i and b = Σ w_i (t_i − t).
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut r = f64::NAN;
    let mut total = 0.0;
    let mut piece = |a: f64, b: f64, d: f64| {
        let e = b - a * d;
        total += if (b > 0.0) != (e > 0.0) && b != 0.0 && e != 0.0 {
            let root = b / a;
            0.5 * (b.abs() * root + e.abs() * (d - root))
        } else {
            0.5 * (b + e).abs() * d
        };
    };
    for (t, w) in pts {
        if r.is_finite() {
            let d = r - t;
            b += a * d;
            if d > 0.0 {
                piece(a, b, d);
            }
        }
        a += w;
        r = t;
    }
    if r.is_finite() && r > 0.0 {
        b += a * r;
        piece(a, b, r);
    }
    total
}

/// `∫₀^len |c₀ + c₁τ + c₂τ²| dτ`.
fn abs_integral_quadratic(c: [f64; 3], len: f64) -> f64 {
    let anti = |u: f64| u * (c[0] + u * (c[1] / 2.0 + u * c[2] / 3.0));
    let mut cuts = [0.0, len, len, len];
    let mut k = 1;
    let mut push = |r: f64| {
        if r > 0.0 && r < len {
            cuts[k] = r;
            k += 1;
        }
    };
    if c[2] != 0.0 {
        let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
        if disc > 0.0 {
            let qq = -0.5 * (c[1] + c[1].signum() * disc.sqrt());
            let (r1, r2) = (qq / c[2], if qq != 0.0 { c[0] / qq } else { 0.0 });
            let (a, b) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            push(a);
            push(b);
        }
    } else if c[1] != 0.0 {
        push(-c[0] / c[1]);
    }
    cuts[k] = len;
    (0..k).map(|i| (anti(cuts[i + 1]) - anti(cuts[i])).abs()).sum()
}

/// Sharp RD fit: separate local polynomial fits on either side of zero with a
/// common bandwidth; the estimate is their difference.
#[derive(Clone, Debug, PartialEq)]
pub struct RdFit {
    pub plus: LocalFit,
    pub minus: LocalFit,
}

impl RdFit {
    /// `w₊ − w₋`.
    pub fn weights(&self) -> Vec<f64> {
        self.plus.weights.iter().zip(&self.minus.weights).map(|(a, b)| a - b).collect()
    }

    pub fn estimate(&self, y: &[f64]) -> f64 {
        estimate(&self.plus, y) - estimate(&self.minus, y)
    }

    pub fn standard_error(&self, sigma2: &[f64]) -> f64 {
        let a = standard_error(&self.plus, sigma2);
        let b = standard_error(&self.minus, sigma2);
        a.hypot(b)
    }

    /// Worst case over functions that are Hölder on each side with unrestricted
    /// jumps at zero: the one-sided worst cases add up.
    pub fn maxbias_holder(&self, p: usize, m: f64) -> Result<f64> {
        Ok(maxbias_holder(&self.plus, p, m)? + maxbias_holder(&self.minus, p, m)?)
    }
}

pub fn rd_weights(x: &[f64], h: f64, k: &KernelSpec, q: usize) -> Result<RdFit> {
    let side = |s: Side, name: &str| {
        lp_weights(x, h, k, q, s).map_err(|e| match e {
            Error::InsufficientData { effective_n, .. } => Error::insufficient(
                format!("{name} the cutoff: local polynomial of order {q} is not identified at bandwidth {h}"),
                effective_n,
            ),
            e => e,
        })
    };
    Ok(RdFit { plus: side(Side::Plus, "above")?, minus: side(Side::Minus, "below")? })
}

/// Nearest-neighbor variance estimates
/// `σ̂²(x_i) = J/(J+1) (y_i − mean of the J nearest y)²`.
///
/// With `split_at_zero`, neighbors are drawn from the same side of zero.
/// Distance ties go to the lower index.
pub fn nn_variance(sample: &Sample, j: usize, split_at_zero: bool) -> Result<Vec<f64>> {
    if j == 0 {
        return Err(Error::domain("number of neighbors J must be at least 1"));
    }
    let x = sample.x();
    let y = sample.y();
    let n = x.len();
    let groups: Vec<(usize, usize)> = if split_at_zero {
        let cut = x.partition_point(|&v| v < 0.0);
        [(0, cut), (cut, n)].into_iter().filter(|(a, b)| b > a).collect()
    } else {
        vec![(0, n)]
    };
    let mut out = vec![0.0; n];
    for (a, b) in groups {
        if b - a <= j {
            return Err(Error::insufficient(
                format!("nearest-neighbor variance needs more than J = {j} observations per group"),
                b - a,
            ));
        }
        for i in a..b {
            let (mut l, mut r) = (i, i + 1);
            let mut sum = 0.0;
            for _ in 0..j {
                let take_left = match (l > a, r < b) {
                    (true, true) => (x[i] - x[l - 1]) <= (x[r] - x[i]),
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => unreachable!("group has more than J points"),
                };
                if take_left {
                    l -= 1;
                    sum += y[l];
                } else {
                    sum += y[r];
                    r += 1;
                }
            }
            let d = y[i] - sum / j as f64;
            out[i] = j as f64 / (j as f64 + 1.0) * d * d;
        }
    }
    Ok(out)
}

/// `sqrt(Σ w_i² σ̂²_i)`.
pub fn standard_error(fit: &LocalFit, sigma2: &[f64]) -> f64 {
    assert_eq!(fit.weights.len(), sigma2.len(), "one variance per observation");
    let (a, b) = fit.window;
    fit.weights[a..b].iter().zip(&sigma2[a..b]).map(|(w, s)| w * w * s).sum::<f64>().sqrt()
}
