//! Kernels, equivalent kernels and their asymptotic constants.
//!
//! Everything is represented exactly as a [`PiecewisePolynomial`], so the
//! variance constant `∫ k*²` and both worst-case bias constants are closed-form
//! integrals up to root isolation for the absolute values.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::brent_root;
use crate::poly::{PiecewisePolynomial, Polynomial};

/// Where the estimate is evaluated relative to the support of the design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Interior point: the kernel is integrated over the whole real line.
    Interior,
    /// Boundary point: only `u ≥ 0` is observed.
    Boundary,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Interior => "interior",
            Domain::Boundary => "boundary",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interior" => Ok(Domain::Interior),
            "boundary" => Ok(Domain::Boundary),
            _ => Err(Error::domain(format!("unknown domain '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Uniform,
    Triangular,
    Epanechnikov,
    SacksYlvisaker(u32),
    Holder2Optimal,
    Custom,
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelName::Uniform => f.write_str("uniform"),
            KernelName::Triangular => f.write_str("triangular"),
            KernelName::Epanechnikov => f.write_str("epanechnikov"),
            KernelName::SacksYlvisaker(p) => write!(f, "sacks_ylvisaker({p})"),
            KernelName::Holder2Optimal => f.write_str("holder2_optimal"),
            KernelName::Custom => f.write_str("custom"),
        }
    }
}

/// A kernel together with the domain it is meant for.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub name: KernelName,
    pub shape: PiecewisePolynomial,
    pub domain: Domain,
}

impl KernelSpec {
    /// `½ 1{|u| ≤ 1}`.
    pub fn uniform(domain: Domain) -> Self {
        Self {
            name: KernelName::Uniform,
            shape: PiecewisePolynomial::on_interval(Polynomial::constant(0.5), -1.0, 1.0),
            domain,
        }
    }

    /// `(1 − |u|)₊`.
    pub fn triangular(domain: Domain) -> Self {
        let shape = PiecewisePolynomial::from_global(
            vec![-1.0, 0.0, 1.0],
            vec![Polynomial::new(vec![1.0, 1.0]), Polynomial::new(vec![1.0, -1.0])],
        );
        Self { name: KernelName::Triangular, shape, domain }
    }

    /// `¾ (1 − u²)₊`.
    pub fn epanechnikov(domain: Domain) -> Self {
        Self {
            name: KernelName::Epanechnikov,
            shape: PiecewisePolynomial::on_interval(Polynomial::new(vec![0.75, 0.0, -0.75]), -1.0, 1.0),
            domain,
        }
    }

    pub fn custom(shape: PiecewisePolynomial, domain: Domain) -> Self {
        Self { name: KernelName::Custom, shape, domain }
    }

    /// One of the three classical kernels by name.
    pub fn classical(name: &str, domain: Domain) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "uniform" | "rectangular" => Ok(Self::uniform(domain)),
            "triangular" | "tri" => Ok(Self::triangular(domain)),
            "epanechnikov" | "epa" => Ok(Self::epanechnikov(domain)),
            _ => Err(Error::domain(format!("unknown kernel '{name}'"))),
        }
    }

    /// Kernel value at `u` (the boundary version is zero for `u < 0`).
    pub fn eval(&self, u: f64) -> f64 {
        if self.domain == Domain::Boundary && u < 0.0 {
            0.0
        } else {
            self.shape.eval(u)
        }
    }

    /// Largest `|u|` in the support.
    pub fn support_radius(&self) -> f64 {
        let (lo, hi) = self.shape.support();
        lo.abs().max(hi.abs())
    }

    /// The same kernel dilated so that its support radius is one.
    pub fn with_unit_support(&self) -> Self {
        let r = self.support_radius();
        Self { shape: dilate(&self.shape, 1.0 / r), ..self.clone() }
    }
}

/// `u ↦ f(u / s)` for `s > 0`, stretched onto the scaled breakpoints.
fn dilate(f: &PiecewisePolynomial, s: f64) -> PiecewisePolynomial {
    let breaks: Vec<f64> = f.breaks().iter().map(|b| b * s).collect();
    let pieces = (0..f.num_pieces()).map(|i| f.piece(i).dilate(1.0 / s)).collect();
    PiecewisePolynomial::from_local(breaks, pieces)
}

fn observed_part(shape: &PiecewisePolynomial, domain: Domain) -> PiecewisePolynomial {
    match domain {
        Domain::Interior => shape.clone(),
        Domain::Boundary => shape.restrict(0.0, f64::INFINITY),
    }
}

/// Equivalent kernel `k*_q(u) = e₁' (∫_X m_q m_q' k)⁻¹ m_q(u) k(u)`.
pub fn equivalent_kernel(k: &KernelSpec, q: usize, domain: Domain) -> Result<PiecewisePolynomial> {
    let (base, coef) = equivalent_kernel_factor(k, q, domain)?;
    Ok(base.mul_poly(&coef))
}

/// The observed part of `k` and the polynomial `e₁'(∫_X m_q m_q' k)⁻¹ m_q(u)`
/// multiplying it.
fn equivalent_kernel_factor(k: &KernelSpec, q: usize, domain: Domain) -> Result<(PiecewisePolynomial, Polynomial)> {
    let base = observed_part(&k.shape, domain);
    let dim = q + 1;
    let moments: Vec<f64> = (0..2 * dim - 1).map(|j| base.moment(j)).collect();
    // A kernel that already satisfies the moment conditions is its own
    // equivalent kernel: Q e₁ = e₁. This covers optimal kernels whose higher
    // moments vanish and make Q singular.
    if (moments[0] - 1.0).abs() < 1e-12 && moments[1..dim].iter().all(|m| m.abs() < 1e-12) {
        return Ok((base, Polynomial::constant(1.0)));
    }
    let gram = DMatrix::from_fn(dim, dim, |i, j| moments[i + j]);
    let sv = gram.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= smax * 1e-13 {
        return Err(Error::DegenerateKernel { order: q });
    }
    let mut e1 = DVector::zeros(dim);
    e1[0] = 1.0;
    let coef = gram.lu().solve(&e1).ok_or(Error::DegenerateKernel { order: q })?;
    Ok((base, Polynomial::new(coef.iter().copied().collect())))
}

/// `∫ k*(u)² du`.
pub fn sd_constant(kstar: &PiecewisePolynomial) -> f64 {
    kstar.mul(kstar).integral()
}

/// Checks `∫ u^j k* = 0` for `1 ≤ j < p`, which is what keeps the worst-case
/// bias finite over a class of order `p`.
fn check_moments(kstar: &PiecewisePolynomial, p: usize) -> Result<()> {
    let scale = kstar.integral_abs().max(f64::MIN_POSITIVE);
    for j in 1..p {
        let m = kstar.moment(j);
        let (lo, hi) = kstar.support();
        let radius = lo.abs().max(hi.abs()).max(1.0).powi(j as i32);
        if m.abs() > 1e-8 * scale * radius {
            return Err(Error::InfiniteBias(format!(
                "moment {j} of the equivalent kernel is {m:.3e}; need local polynomial order at least {}",
                p - 1
            )));
        }
    }
    Ok(())
}

/// `B^T_p = ∫ |u^p k*(u)| du`.
pub fn taylor_bias_constant(kstar: &PiecewisePolynomial, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::domain("smoothness order p must be at least 1"));
    }
    check_moments(kstar, p)?;
    Ok(kstar.mul_monomial(p).integral_abs())
}

/// `w̄_p(t) = ∫_{u ≥ t} f(u) (u − t)^{p−1} / (p−1)! du` for `t ≥ 0`, built by
/// repeated tail integration of `f` restricted to `[0, ∞)`.
pub fn tail_weight(f: &PiecewisePolynomial, p: usize) -> PiecewisePolynomial {
    let mut w = f.restrict(0.0, f64::INFINITY);
    for _ in 0..p {
        w = w.tail_integral();
    }
    w
}

/// `B^Höl_p = p! (∫₀^∞ |w̄⁺_p| + ∫₀^∞ |w̄⁻_p|)`, where `w̄⁻` uses the
/// reflected kernel.
pub fn holder_bias_constant(kstar: &PiecewisePolynomial, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::domain("smoothness order p must be at least 1"));
    }
    check_moments(kstar, p)?;
    let fact: f64 = (1..=p).map(|i| i as f64).product();
    let plus = tail_weight(kstar, p).integral_abs();
    let minus = if kstar.support().0 < 0.0 { tail_weight(&kstar.reflect(), p).integral_abs() } else { 0.0 };
    Ok(fact * (plus + minus))
}

/// Variance and bias constants for a kernel, local polynomial order `q` and
/// smoothness order `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub sd_constant: f64,
    pub taylor_bias: f64,
    pub holder_bias: f64,
    pub q: usize,
    pub p: usize,
}

pub fn kernel_constants(k: &KernelSpec, q: usize, p: usize, domain: Domain) -> Result<KernelConstants> {
    let kstar = equivalent_kernel(k, q, domain)?;
    Ok(KernelConstants {
        sd_constant: sd_constant(&kstar),
        taylor_bias: taylor_bias_constant(&kstar, p)?,
        holder_bias: holder_bias_constant(&kstar, p)?,
        q,
        p,
    })
}

// ---------------------------------------------------------------------------
// Sacks-Ylvisaker kernels

/// Soft-thresholding of `P(u)` by `|u|^p`, on `u ≥ 0` (`side = 1`) or
/// `u ≤ 0` (`side = -1`). Returns the kernel and the indicator of its active
/// set, both in global coordinates on `[0, R]` or `[−R, 0]`.
fn sy_half(coef: &[f64], p: usize, side: f64) -> Option<(Vec<f64>, Vec<Polynomial>, Vec<bool>)> {
    let poly = Polynomial::new(coef.to_vec());
    // |u|^p on this side as a polynomial in u.
    let abs_p = Polynomial::monomial(p, side.powi(p as i32));
    let upper = poly.sub(&abs_p);
    let lower = poly.add(&abs_p);
    let radius = 1.0 + coef.iter().map(|c| c.abs()).sum::<f64>();
    let (a, b) = if side > 0.0 { (0.0, radius) } else { (-radius, 0.0) };
    let mut cuts = vec![a, b];
    cuts.extend(upper.roots_in(a, b));
    cuts.extend(lower.roots_in(a, b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    let mut breaks = vec![cuts[0]];
    let mut pieces = Vec::new();
    let mut active = Vec::new();
    for w in cuts.windows(2) {
        if w[1] - w[0] < 1e-14 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let (piece, on) = if upper.eval(mid) > 0.0 {
            (upper.clone(), true)
        } else if lower.eval(mid) < 0.0 {
            (lower.clone(), true)
        } else {
            (Polynomial::zero(), false)
        };
        breaks.push(w[1]);
        pieces.push(piece);
        active.push(on);
    }
    // Trim inactive pieces at the outer end.
    while active.len() > 1 && !active[if side > 0.0 { active.len() - 1 } else { 0 }] {
        if side > 0.0 {
            active.pop();
            pieces.pop();
            breaks.pop();
        } else {
            active.remove(0);
            pieces.remove(0);
            breaks.remove(0);
        }
    }
    if !active.iter().any(|&x| x) {
        return None;
    }
    Some((breaks, pieces, active))
}

fn sy_kernel(coef: &[f64], p: usize, domain: Domain) -> Option<(PiecewisePolynomial, PiecewisePolynomial)> {
    let (mut breaks, mut pieces, mut active) = sy_half(coef, p, 1.0)?;
    if domain == Domain::Interior {
        let (lb, lp, la) = sy_half(coef, p, -1.0)?;
        breaks = lb.into_iter().chain(breaks.into_iter().skip(1)).collect();
        pieces = lp.into_iter().chain(pieces).collect();
        active = la.into_iter().chain(active).collect();
    }
    let ind = active.iter().map(|&a| Polynomial::constant(if a { 1.0 } else { 0.0 })).collect();
    Some((PiecewisePolynomial::from_global(breaks.clone(), pieces), PiecewisePolynomial::from_global(breaks, ind)))
}

fn sy_residual(k: &PiecewisePolynomial, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |j, _| k.moment(j) - if j == 0 { 1.0 } else { 0.0 })
}

/// Rescales `coef` within the family `k ↦ s^p k(·/s)`, which multiplies `∫ k`
/// by `s^{p+1}`, so that the kernel integrates to one.
fn sy_normalize(coef: &[f64], p: usize, domain: Domain) -> Option<Vec<f64>> {
    let (k, _) = sy_kernel(coef, p, domain)?;
    let mass = k.integral();
    if !(mass > 0.0) {
        return None;
    }
    let s = mass.powf(-1.0 / (p as f64 + 1.0));
    Some(coef.iter().enumerate().map(|(j, c)| c * s.powi((p - j) as i32)).collect())
}

/// Starting coefficients from the polynomial factor of the triangular
/// equivalent kernel of order `p − 1`. Its size relative to `|u|^p` is the one
/// shape parameter not fixed by normalization. Candidates over a grid of that
/// parameter are returned best first.
fn sy_starts(p: usize, domain: Domain) -> Result<Vec<Vec<f64>>> {
    let (_, factor) = equivalent_kernel_factor(&KernelSpec::triangular(domain), p - 1, domain)?;
    let mut shape: Vec<f64> = (0..p).map(|j| factor.coeffs().get(j).copied().unwrap_or(0.0)).collect();
    if domain == Domain::Interior {
        for (j, c) in shape.iter_mut().enumerate() {
            if j % 2 == 1 {
                *c = 0.0;
            }
        }
    }
    let lead = shape[0];
    let mut cands: Vec<(f64, Vec<f64>)> = Vec::new();
    for i in 0..=80 {
        let tau = 10f64.powf(-2.0 + 4.0 * i as f64 / 80.0);
        let trial: Vec<f64> = shape.iter().map(|c| tau * c / lead).collect();
        let Some(coef) = sy_normalize(&trial, p, domain) else { continue };
        let Some((k, _)) = sy_kernel(&coef, p, domain) else { continue };
        let r = sy_residual(&k, p).norm();
        cands.push((r, coef));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(cands.into_iter().map(|(_, c)| c).collect())
}

/// Sacks-Ylvisaker kernel
/// `(b + Σ α_j u^j − |u|^p)₊ − (b + Σ α_j u^j + |u|^p)₋` normalized so that
/// `∫ k = 1` and `∫ u^j k = 0` for `1 ≤ j < p`.
pub fn optimal_kernel_sy(p: usize, domain: Domain) -> Result<KernelSpec> {
    if !(1..=4).contains(&p) {
        return Err(Error::domain(format!("Sacks-Ylvisaker kernels are available for p in 1..=4, got {p}")));
    }
    let mut last = Error::Solver { iterations: 0, residual: f64::NAN };
    for start in sy_starts(p, domain)? {
        match sy_newton(start, p, domain) {
            Ok(k) => return Ok(KernelSpec { name: KernelName::SacksYlvisaker(p as u32), shape: k, domain }),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Damped Newton on the moment equations. The Jacobian is exact: the kernel is
/// continuous in `u`, so moving the edges of the active set contributes nothing.
fn sy_newton(mut coef: Vec<f64>, p: usize, domain: Domain) -> Result<PiecewisePolynomial> {
    let max_iter = 200;
    let (mut k, mut active) = sy_kernel(&coef, p, domain).ok_or(Error::Solver { iterations: 0, residual: f64::NAN })?;
    let mut res = sy_residual(&k, p);
    for iter in 0..max_iter {
        let norm = res.norm();
        if norm < 1e-12 {
            break;
        }
        let jac = DMatrix::from_fn(p, p, |j, m| active.moment(j + m));
        let step = jac.lu().solve(&(-&res)).ok_or(Error::Solver { iterations: iter, residual: norm })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = coef.iter().zip(step.iter()).map(|(c, d)| c + lambda * d).collect();
            if let Some((kt, at)) = sy_kernel(&trial, p, domain) {
                let rt = sy_residual(&kt, p);
                if rt.norm() < norm {
                    coef = trial;
                    k = kt;
                    active = at;
                    res = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::Solver { iterations: iter, residual: norm });
            }
        }
    }
    let norm = res.norm();
    if norm >= 1e-12 {
        return Err(Error::Solver { iterations: max_iter, residual: norm });
    }
    Ok(k)
}

// ---------------------------------------------------------------------------
// Optimal kernel for the second-order Hölder class

/// Ratio of successive knot gaps.
pub fn holder2_ratio() -> f64 {
    let r33 = 33f64.sqrt();
    let v = 3.0 + r33 - (26.0 + 6.0 * r33).sqrt();
    v * v / 16.0
}

/// Knots `k_j` up to the point where they stop moving, and the support limit.
fn holder2_knots() -> (Vec<f64>, f64) {
    let q = holder2_ratio();
    let sq = q.sqrt();
    let c = (1.0 + q).sqrt() / (1.0 - sq);
    let limit = 2.0 * c;
    let mut knots = Vec::new();
    for j in 0.. {
        let kj = c * (2.0 - sq.powi(j) - sq.powi(j + 1));
        if let Some(&last) = knots.last() {
            if kj - last < 1e-10 {
                break;
            }
        }
        knots.push(kj);
    }
    (knots, limit)
}

/// `f(u) = 1 − u²/2 + Σ_j (−1)^j (u − k_j)₊²` on `u ≥ 0`, as a piecewise
/// polynomial on `[0, limit]`.
fn holder2_half() -> PiecewisePolynomial {
    let (knots, limit) = holder2_knots();
    let mut breaks = vec![0.0];
    breaks.extend(knots.iter().copied());
    breaks.push(limit);
    let mut current = Polynomial::new(vec![1.0, 0.0, -0.5]);
    let mut pieces = vec![current.clone()];
    for (j, &kj) in knots.iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let sq = Polynomial::new(vec![-kj, 1.0]);
        current = current.add(&sq.mul(&sq).scale(sign));
        pieces.push(current.clone());
    }
    PiecewisePolynomial::from_global(breaks, pieces)
}

fn holder2_boundary_shape(x0: f64) -> PiecewisePolynomial {
    let half = holder2_half();
    let amp = 1.0 - 0.5 * x0 * x0;
    let s = (0.5 * x0 * x0 - 1.0).sqrt();
    let mut breaks = vec![0.0, x0];
    let mut pieces = vec![Polynomial::new(vec![1.0, -x0, 0.5])];
    // A f((x − x₀)/s) in local coordinates of each stretched piece.
    for i in 0..half.num_pieces() {
        breaks.push(x0 + s * half.breaks()[i + 1]);
        pieces.push(half.piece(i).dilate(1.0 / s).scale(amp));
    }
    let first = pieces.remove(0);
    let mut local = vec![first];
    local.extend(pieces);
    PiecewisePolynomial::from_local(breaks, local)
}

/// Splice point of the boundary kernel, chosen so that `∫ u f(u) du = 0`.
pub fn holder2_boundary_splice() -> f64 {
    brent_root(|x0| holder2_boundary_shape(x0).moment(1), 2f64.sqrt() + 1e-3, 2.0, 1e-14)
        .expect("first moment changes sign on the bracket")
}

/// Optimal kernel for the Hölder class of order two, normalized to `∫ k = 1`.
pub fn optimal_kernel_holder2(domain: Domain) -> KernelSpec {
    let shape = match domain {
        Domain::Interior => {
            let half = holder2_half();
            let left = half.reflect();
            let mut breaks: Vec<f64> = left.breaks().to_vec();
            breaks.extend(half.breaks().iter().skip(1));
            let mut pieces: Vec<Polynomial> = (0..left.num_pieces()).map(|i| left.piece(i).clone()).collect();
            pieces.extend((0..half.num_pieces()).map(|i| half.piece(i).clone()));
            PiecewisePolynomial::from_local(breaks, pieces)
        }
        Domain::Boundary => holder2_boundary_shape(holder2_boundary_splice()),
    };
    let mass = shape.integral();
    KernelSpec { name: KernelName::Holder2Optimal, shape: shape.scale(1.0 / mass), domain }
}
