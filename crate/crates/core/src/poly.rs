//! Exact polynomial and piecewise-polynomial algebra.
//!
//! Kernels, equivalent kernels and bias weight functions are all piecewise
//! polynomials of low degree, so every constant in this crate is computed by
//! integrating polynomials in closed form. Integrals of absolute values are
//! handled by isolating the real roots of each piece first.
//!
//! Each piece of a [`PiecewisePolynomial`] is stored in *local* coordinates:
//! on `[breaks[i], breaks[i + 1]]` the function equals `pieces[i](u - breaks[i])`.
//! This keeps evaluation well conditioned when breakpoints are far from zero
//! (design points measured in the units of the running variable).

use std::fmt;

/// Dense univariate polynomial, coefficients in ascending order of degree.
#[derive(Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c * u^k`.
    pub fn monomial(k: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect())
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i + 1] = c / (i + 1) as f64;
        }
        Self::new(out)
    }

    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    /// `p(u + delta)` as a polynomial in `u` (Taylor shift).
    pub fn shift(&self, delta: f64) -> Self {
        if delta == 0.0 {
            return self.clone();
        }
        // Horner's scheme on polynomials: p(u + d) = c0 + (u + d)(c1 + (u + d)(...)).
        let mut out = vec![0.0; self.coeffs.len()];
        for &c in self.coeffs.iter().rev() {
            // out <- out * (u + d) + c
            for k in (1..out.len()).rev() {
                out[k] = out[k] * delta + out[k - 1];
            }
            out[0] = out[0] * delta + c;
        }
        Self::new(out)
    }

    /// `p(s * u)` as a polynomial in `u`.
    pub fn dilate(&self, s: f64) -> Self {
        let mut f = 1.0;
        Self::new(
            self.coeffs
                .iter()
                .map(|c| {
                    let v = c * f;
                    f *= s;
                    v
                })
                .collect(),
        )
    }

    /// Real roots in the open interval `(a, b)`, sorted ascending.
    ///
    /// Isolation by recursion on the derivative: between consecutive critical
    /// points the polynomial is monotone, so each sign change brackets exactly
    /// one root, which is then polished by bisection.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if !(b > a) || self.is_zero() {
            return out;
        }
        match self.degree() {
            0 => return out,
            1 => {
                let r = -self.coeffs[0] / self.coeffs[1];
                if r > a && r < b {
                    out.push(r);
                }
                return out;
            }
            _ => {}
        }
        let mut cuts = vec![a];
        cuts.extend(self.derivative().roots_in(a, b));
        cuts.push(b);
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let tiny = scale * 1e-300;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (flo, fhi) = (self.eval(lo), self.eval(hi));
            if flo.abs() <= tiny && lo > a {
                push_unique(&mut out, lo);
                continue;
            }
            if flo * fhi < 0.0 {
                push_unique(&mut out, bisect(|u| self.eval(u), lo, hi, flo));
            }
        }
        out
    }
}

fn push_unique(out: &mut Vec<f64>, r: f64) {
    if out.last().is_none_or(|&l| (r - l).abs() > 1e-14 * (1.0 + r.abs())) {
        out.push(r);
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * (1.0 + mid.abs()) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// `∫_0^len |p(t)| dt` for a single local piece.
fn integrate_abs_local(p: &Polynomial, len: f64) -> f64 {
    let anti = p.antiderivative();
    let mut cuts = vec![0.0];
    cuts.extend(p.roots_in(0.0, len));
    cuts.push(len);
    cuts.windows(2).map(|w| (anti.eval(w[1]) - anti.eval(w[0])).abs()).sum()
}

/// A function that is polynomial between consecutive breakpoints and zero
/// outside `[breaks[0], breaks[last]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePolynomial {
    breaks: Vec<f64>,
    pieces: Vec<Polynomial>,
}

impl PiecewisePolynomial {
    /// Builds from breakpoints and pieces expressed in local coordinates.
    ///
    /// Panics if the breakpoints are not strictly increasing or the number of
    /// pieces does not match.
    pub fn from_local(breaks: Vec<f64>, pieces: Vec<Polynomial>) -> Self {
        assert_eq!(breaks.len(), pieces.len() + 1, "one piece per interval");
        assert!(breaks.windows(2).all(|w| w[1] > w[0]), "breakpoints must be strictly increasing");
        Self { breaks, pieces }
    }

    /// Builds from pieces expressed in the global variable `u`.
    pub fn from_global(breaks: Vec<f64>, pieces: Vec<Polynomial>) -> Self {
        let local = pieces.iter().zip(&breaks).map(|(p, &a)| p.shift(a)).collect();
        Self::from_local(breaks, local)
    }

    /// A single polynomial restricted to `[lo, hi]`.
    pub fn on_interval(poly: Polynomial, lo: f64, hi: f64) -> Self {
        Self::from_global(vec![lo, hi], vec![poly])
    }

    /// The zero function (represented on `[0, 1]`).
    pub fn zero() -> Self {
        Self { breaks: vec![0.0, 1.0], pieces: vec![Polynomial::zero()] }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Local polynomial of piece `i`.
    pub fn piece(&self, i: usize) -> &Polynomial {
        &self.pieces[i]
    }

    /// Piece `i` as a polynomial in the global variable.
    pub fn global_piece(&self, i: usize) -> Polynomial {
        self.pieces[i].shift(-self.breaks[i])
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breaks[0], self.breaks[self.breaks.len() - 1])
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    fn locate(&self, u: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if u < lo || u > hi {
            return None;
        }
        let i = self.breaks.partition_point(|&b| b <= u);
        Some(i.saturating_sub(1).min(self.pieces.len() - 1))
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self.locate(u) {
            Some(i) => self.pieces[i].eval(u - self.breaks[i]),
            None => 0.0,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { breaks: self.breaks.clone(), pieces: self.pieces.iter().map(|p| p.scale(s)).collect() }
    }

    pub fn integral(&self) -> f64 {
        self.pieces.iter().zip(self.breaks.windows(2)).map(|(p, w)| p.integrate(0.0, w[1] - w[0])).sum()
    }

    pub fn integral_abs(&self) -> f64 {
        self.pieces.iter().zip(self.breaks.windows(2)).map(|(p, w)| integrate_abs_local(p, w[1] - w[0])).sum()
    }

    /// `∫ u^j f(u) du`.
    pub fn moment(&self, j: usize) -> f64 {
        self.mul_monomial(j).integral()
    }

    /// `u^j f(u)`.
    pub fn mul_monomial(&self, j: usize) -> Self {
        let pieces =
            self.pieces.iter().zip(&self.breaks).map(|(p, &a)| p.mul(&Polynomial::monomial(j, 1.0).shift(a))).collect();
        Self { breaks: self.breaks.clone(), pieces }
    }

    /// `g(u) f(u)` for a global polynomial `g`.
    pub fn mul_poly(&self, g: &Polynomial) -> Self {
        let pieces = self.pieces.iter().zip(&self.breaks).map(|(p, &a)| p.mul(&g.shift(a))).collect();
        Self { breaks: self.breaks.clone(), pieces }
    }

    /// Pointwise product with another piecewise polynomial.
    pub fn mul(&self, other: &Self) -> Self {
        let (alo, ahi) = self.support();
        let (blo, bhi) = other.support();
        let (lo, hi) = (alo.max(blo), ahi.min(bhi));
        if !(hi > lo) {
            return Self::zero();
        }
        let mut breaks: Vec<f64> =
            self.breaks.iter().chain(other.breaks.iter()).copied().filter(|&b| b >= lo && b <= hi).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let pieces = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let pa = self.local_at(mid, w[0]);
                let pb = other.local_at(mid, w[0]);
                pa.mul(&pb)
            })
            .collect();
        Self::from_local(breaks, pieces)
    }

    /// The piece covering `mid`, re-expressed locally around `origin`.
    fn local_at(&self, mid: f64, origin: f64) -> Polynomial {
        let i = self.locate(mid).expect("point inside support");
        self.pieces[i].shift(origin - self.breaks[i])
    }

    /// `f(-u)`.
    pub fn reflect(&self) -> Self {
        let n = self.pieces.len();
        let mut breaks: Vec<f64> = self.breaks.iter().rev().map(|b| -b).collect();
        // normalize -0.0
        for b in breaks.iter_mut() {
            *b += 0.0;
        }
        let pieces = (0..n)
            .rev()
            .map(|i| {
                // piece i covers [b_i, b_{i+1}]; reflected covers [-b_{i+1}, -b_i].
                let len = self.breaks[i + 1] - self.breaks[i];
                // g(t) = p(len - t)
                self.pieces[i].dilate(-1.0).shift(-len)
            })
            .collect();
        Self::from_local(breaks, pieces)
    }

    /// Restriction to `[lo, hi]` (intersected with the support).
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        let (slo, shi) = self.support();
        let (lo, hi) = (lo.max(slo), hi.min(shi));
        if !(hi > lo) {
            return Self::zero();
        }
        let mut breaks = vec![lo];
        breaks.extend(self.breaks.iter().copied().filter(|&b| b > lo && b < hi));
        breaks.push(hi);
        let pieces = breaks.windows(2).map(|w| self.local_at(0.5 * (w[0] + w[1]), w[0])).collect();
        Self::from_local(breaks, pieces)
    }

    /// `t ↦ ∫_{u ≥ t} f(u) du`, a continuous piecewise polynomial on the
    /// support that vanishes at the right end.
    pub fn tail_integral(&self) -> Self {
        let n = self.pieces.len();
        let mut pieces = vec![Polynomial::zero(); n];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            let len = self.breaks[i + 1] - self.breaks[i];
            let anti = self.pieces[i].antiderivative();
            // ∫_t^len p + acc = anti(len) - anti(t) + acc
            let c = anti.eval(len) + acc;
            pieces[i] = Polynomial::constant(c).sub(&anti);
            acc = c;
        }
        Self { breaks: self.breaks.clone(), pieces }
    }

    /// Splits every piece at its interior roots so each piece has constant sign.
    pub fn sign_pieces(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (p, w) in self.pieces.iter().zip(self.breaks.windows(2)) {
            let len = w[1] - w[0];
            let mut cuts = vec![0.0];
            cuts.extend(p.roots_in(0.0, len));
            cuts.push(len);
            for c in cuts.windows(2) {
                let s = p.eval(0.5 * (c[0] + c[1])).signum();
                out.push((w[0] + c[0], w[0] + c[1], s));
            }
        }
        out
    }
}
