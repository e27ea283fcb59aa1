//! The local archimedean integral `J` and the contour integral `I`.
//!
//! `J(l, n, s) = (4π)^{k-1}/Γ(k-1) ∫ y^{s-1} κ_χ(l y) κ_f(m y) κ_f(n y) d^×y`
//! with `κ_f(u) = u^{k/2} e^{-2πu}` and `κ_χ(u) = 2|u|^{1/2} K_ν(2π|u|) sgn(u)^ε`.
//! `I(l, n, x) = ∫_(c) ĥ(s) x^s ∏_j J_j(s) ds / 2πi`, where `ĥ` is the Mellin
//! transform of the bump `h(y) = exp(1 - 1/(1 - ln² y))`.

use super::bessel::{bessel_k, Order};
use super::gamma::{log_gamma, log_gamma_real};
use super::hyper::hyp2f1;
use super::SpecialError;
use crate::Real;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

/// One archimedean place: weight, order, parity, shift and base point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Place<T> {
    pub k: u32,
    pub order: Order<T>,
    pub parity: u8,
    pub l: T,
    pub n: T,
}

/// Arguments of a single `J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JParams<T> {
    pub place: Place<T>,
    pub s: Complex<T>,
}

/// Arguments of `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct IParams<T> {
    pub places: Vec<Place<T>>,
    pub x: T,
    pub c: T,
    pub t_max: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JValue<T> {
    /// Zero when `|J| < 1e-300`; see `log_abs`.
    pub value: Complex<T>,
    pub log_abs: T,
    pub abs_err: T,
}

/// The three factors of the closed form, separated for inspection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JFactors<T> {
    /// Log of the Gamma-ratio prefactor times the min/max power (complex).
    pub log_prefactor: Complex<T>,
    /// `Γ(k+s-1/2+ν)Γ(k+s-1/2-ν) / (Γ(k+s-1)Γ(k+s))`.
    pub gamma_quotient: Complex<T>,
    /// `2F1(1/2-ν, 1/2+ν; k+s; -min/|l|)`.
    pub hypergeometric: Complex<T>,
    pub sign: T,
}

impl<T: Real> Place<T> {
    pub fn m(&self) -> T {
        self.n + self.l
    }

    pub fn max_mn(&self) -> T {
        self.m().max(self.n)
    }

    pub fn min_mn(&self) -> T {
        self.m().min(self.n)
    }

    pub fn sign(&self) -> T {
        if self.parity % 2 == 1 && self.l < T::zero() {
            -T::one()
        } else {
            T::one()
        }
    }

    pub fn validate(&self) -> Result<(), SpecialError> {
        self.order.validate()?;
        if self.k < 2 || !self.k.is_multiple_of(2) {
            return Err(SpecialError::Domain("weight must be even and at least 2"));
        }
        if self.parity > 1 {
            return Err(SpecialError::Domain("parity must be 0 or 1"));
        }
        if self.l == T::zero() {
            return Err(SpecialError::Domain("shift component is zero"));
        }
        if !(self.n > T::zero() && self.m() > T::zero()) {
            return Err(SpecialError::Domain("need n > 0 and m = n + l > 0"));
        }
        Ok(())
    }

    /// `ln [ √(mn) (min/max)^{(k-1)/2} ]`.
    fn log_size(&self) -> T {
        let half = T::of(0.5);
        let (m, n) = (self.m(), self.n);
        half * (m * n).ln() + half * T::of(self.k as f64 - 1.0) * (self.min_mn() / self.max_mn()).ln()
    }
}

fn check_sigma<T: Real>(s: Complex<T>) -> Result<(), SpecialError> {
    if s.re < T::of(-0.5) || !s.re.is_finite() || !s.im.is_finite() {
        return Err(SpecialError::Domain("need Re s >= -1/2"));
    }
    Ok(())
}

const LOG_TINY: f64 = -690.775_527_898_213_7; // ln 1e-300

fn finish<T: Real>(log: Complex<T>, sign: T, rel_err: T) -> JValue<T> {
    let log_abs = log.re;
    let value = if log_abs < T::of(LOG_TINY) { Complex::new(T::zero(), T::zero()) } else { log.exp() * sign };
    JValue { value, log_abs, abs_err: rel_err * value.norm() }
}

/// The factors of the closed form of `J`.
pub fn j_factors<T: Real>(p: &JParams<T>) -> Result<JFactors<T>, SpecialError> {
    let pl = &p.place;
    pl.validate()?;
    check_sigma(p.s)?;
    let s = p.s;
    let k = T::of(pl.k as f64);
    let half = T::of(0.5);
    let one = T::one();
    let nu = pl.order.nu();
    let four_pi_max = T::of(4.0) * T::PI() * pl.max_mn();
    let log_prefactor = log_gamma(s + (k - one))? - log_gamma_real(k - one) + pl.log_size() - s * four_pi_max.ln();
    let base = s + k;
    let gq = log_gamma(base - half + nu)? + log_gamma(base - half - nu)? - log_gamma(base - one)? - log_gamma(base)?;
    let z = -(pl.min_mn() / pl.l.abs());
    let f = hyp2f1(Complex::new(half, T::zero()) - nu, Complex::new(half, T::zero()) + nu, base, z)?;
    Ok(JFactors { log_prefactor, gamma_quotient: gq.exp(), hypergeometric: f.value, sign: pl.sign() })
}

/// `J` via its closed form in Gamma functions and `2F1`.
pub fn j_closed_form<T: Real>(p: &JParams<T>) -> Result<JValue<T>, SpecialError> {
    let pl = &p.place;
    pl.validate()?;
    check_sigma(p.s)?;
    let s = p.s;
    let k = T::of(pl.k as f64);
    let half = T::of(0.5);
    let one = T::one();
    let nu = pl.order.nu();
    let four_pi_max = T::of(4.0) * T::PI() * pl.max_mn();
    let base = s + k;
    let z = -(pl.min_mn() / pl.l.abs());
    let f = hyp2f1(Complex::new(half, T::zero()) - nu, Complex::new(half, T::zero()) + nu, base, z)?;
    if f.value.norm() == T::zero() {
        return Ok(JValue { value: f.value, log_abs: T::neg_infinity(), abs_err: f.abs_err });
    }
    let log = log_gamma(s + (k - one))? - log_gamma_real(k - one) + pl.log_size() - s * four_pi_max.ln()
        + log_gamma(base - half + nu)?
        + log_gamma(base - half - nu)?
        - log_gamma(base - one)?
        - log_gamma(base)?
        + f.value.ln();
    let rel = f.abs_err / f.value.norm() + T::of(64.0) * T::epsilon();
    Ok(finish(log, pl.sign(), rel))
}

/// Right-hand side of the refined bound on `|J|`.
pub fn j_bound_legit<T: Real>(p: &JParams<T>) -> Result<T, SpecialError> {
    let pl = &p.place;
    pl.validate()?;
    check_sigma(p.s)?;
    let sigma = p.s.re;
    let k = T::of(pl.k as f64);
    let one = T::one();
    let four_pi_max = T::of(4.0) * T::PI() * pl.max_mn();
    Ok((log_gamma_real(k - one + sigma) - log_gamma_real(k - one) + pl.log_size() - sigma * four_pi_max.ln()).exp())
}

/// Right-hand side of the trivial bound on `|J|` (uses `(m+n)/2` in place of the max).
pub fn j_bound_trivial<T: Real>(p: &JParams<T>) -> Result<T, SpecialError> {
    let pl = &p.place;
    pl.validate()?;
    check_sigma(p.s)?;
    let sigma = p.s.re;
    let k = T::of(pl.k as f64);
    let one = T::one();
    let half = T::of(0.5);
    let (m, n) = (pl.m(), pl.n);
    let avg = (m + n) * half;
    let four_pi_avg = T::of(4.0) * T::PI() * avg;
    let log = log_gamma_real(k - one + sigma) - log_gamma_real(k - one) + half * (m * n).ln() - sigma * four_pi_avg.ln()
        + (k - one) * (half * (m * n).ln() - avg.ln());
    Ok(log.exp())
}

/// `J` by direct quadrature of its defining integral on a logarithmic scale.
pub fn j_quadrature<T: Real>(p: &JParams<T>) -> Result<JValue<T>, SpecialError> {
    let pl = &p.place;
    pl.validate()?;
    check_sigma(p.s)?;
    let s = p.s;
    let k = T::of(pl.k as f64);
    let half = T::of(0.5);
    let one = T::one();
    let two_pi = T::of(2.0) * T::PI();
    let (m, n, l) = (pl.m(), pl.n, pl.l.abs());
    let log_const = T::of(pl.k as f64 - 1.0) * (T::of(4.0) * T::PI()).ln() - log_gamma_real(k - one)
        + T::of(2.0).ln()
        + half * l.ln()
        + half * k * (m * n).ln();
    let slope = s.re + k - half;
    let nu_re = match pl.order {
        Order::Real(v) => v.abs(),
        Order::Imaginary(_) => T::zero(),
    };
    let rate = two_pi * (m + n);
    // log of |integrand| without the Bessel factor
    let envelope = |v: T| slope * v - rate * v.exp();
    let v_peak = (slope / (rate + two_pi * l)).ln();
    let left_slope = (slope - nu_re).max(T::of(0.05));
    let v_lo = v_peak - (T::of(80.0) + T::of(4.0) * (one + (k).ln())) / left_slope;
    let mut v_hi = v_peak;
    let peak = envelope(v_peak);
    while envelope(v_hi) > peak - T::of(80.0) {
        v_hi = v_hi + T::of(0.25);
    }
    let integrand = |v: T| -> Result<Complex<T>, SpecialError> {
        let kv = bessel_k(pl.order, two_pi * l * v.exp())?;
        if kv.value == T::zero() {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        let phase = Complex::new(T::zero(), s.im * v);
        let mag = log_const + envelope(v) + (s.re - one + one) * T::zero();
        Ok((phase + mag).exp() * kv.value)
    };
    let mut n_int = 64usize;
    let mut h = (v_hi - v_lo) / T::of(n_int as f64);
    let mut sum = (integrand(v_lo)? + integrand(v_hi)?) * half;
    let mut abs_sum = sum.norm();
    for i in 1..n_int {
        let f = integrand(v_lo + h * T::of(i as f64))?;
        sum = sum + f;
        abs_sum = abs_sum + f.norm();
    }
    let mut prev = sum * h;
    for _ in 0..12 {
        let mut extra = Complex::new(T::zero(), T::zero());
        for i in 0..n_int {
            let f = integrand(v_lo + h * (T::of(i as f64) + half))?;
            extra = extra + f;
            abs_sum = abs_sum + f.norm();
        }
        sum = sum + extra;
        n_int *= 2;
        h = h * half;
        let cur = sum * h;
        let diff = (cur - prev).norm();
        let noise = T::of(64.0) * T::epsilon() * abs_sum * h;
        if diff <= noise.max(T::of(1e-13) * cur.norm()) {
            let value = cur * pl.sign();
            return Ok(JValue { value, log_abs: value.norm().ln(), abs_err: diff + noise });
        }
        prev = cur;
    }
    Err(SpecialError::NoConvergence("J quadrature"))
}

/// Mellin transform of the bump, `ĥ(s) = ∫_{-1}^{1} e^{1 - 1/(1-u²)} e^{-su} du`,
/// on precomputed tanh-sinh nodes.
#[derive(Clone, Debug)]
pub struct BumpMellin<T> {
    h: T,
    nodes: Vec<(T, T)>,
    /// Nested coarser rules: every `2^k`-th node with its weight scaled by `2^k`.
    levels: Vec<Vec<(T, T)>>,
}

const COARSE_LEVELS: usize = 4;

impl<T: Real> BumpMellin<T> {
    pub fn new() -> Self {
        Self::with_step(T::of(1.0 / 512.0))
    }

    /// Nodes with tanh-sinh step `h` (smaller is finer).
    pub fn with_step(h: T) -> Self {
        let half_pi = T::FRAC_PI_2();
        let mut indexed = Vec::new();
        let count = (T::of(1.8) / h).ceil().to_i64().unwrap_or(1000);
        for j in -count..=count {
            let tau = h * T::of(j as f64);
            let w = half_pi * tau.sinh();
            let sh = w.sinh();
            let ch = w.cosh();
            let weight = (-(sh * sh)).exp() * half_pi * tau.cosh() / (ch * ch) * h;
            if weight > T::zero() {
                indexed.push((j, (w.tanh(), weight)));
            }
        }
        let levels = (1..=COARSE_LEVELS)
            .map(|k| {
                let stride = 1i64 << k;
                let scale = T::of(stride as f64);
                indexed.iter().filter(|(j, _)| j % stride == 0).map(|&(_, (u, w))| (u, w * scale)).collect()
            })
            .collect();
        Self { h, nodes: indexed.into_iter().map(|(_, n)| n).collect(), levels }
    }

    /// Nodes `(u, weight·bump(u))` for integrating `bump(u) g(u) du` over `(-1, 1)`.
    pub fn nodes(&self) -> &[(T, T)] {
        &self.nodes
    }

    /// Uses the coarsest nested rule whose step keeps `|s|·step <= 1/2`.
    pub fn eval(&self, s: Complex<T>) -> Complex<T> {
        let reach = s.norm() * self.h;
        let mut nodes = &self.nodes[..];
        for (k, level) in self.levels.iter().enumerate() {
            if reach * T::of((1u32 << (k + 1)) as f64) <= T::of(0.5) {
                nodes = level;
            }
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(u, w) in nodes {
            acc = acc + (-s * u).exp() * w;
        }
        acc
    }
}

impl<T: Real> Default for BumpMellin<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// The bump `h(y) = exp(1 - 1/(1 - ln² y))` on `e^{-1} < y < e`, zero elsewhere.
pub fn bump<T: Real>(y: T) -> T {
    let u = y.ln();
    if u.abs() >= T::one() {
        T::zero()
    } else {
        (T::one() - T::one() / (T::one() - u * u)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IValue<T> {
    pub value: Complex<T>,
    pub abs_err: T,
    pub t_max: T,
}

fn validate_i<T: Real>(p: &IParams<T>) -> Result<(), SpecialError> {
    if p.places.is_empty() {
        return Err(SpecialError::Domain("need at least one place"));
    }
    for pl in &p.places {
        pl.validate()?;
    }
    if !(p.x > T::zero()) || !p.x.is_finite() {
        return Err(SpecialError::Domain("scale x must be positive"));
    }
    if p.c < T::zero() {
        return Err(SpecialError::Domain("contour abscissa must be >= 0"));
    }
    Ok(())
}

/// Log of the integrand envelope at height `t` used to truncate the contour.
fn log_envelope<T: Real>(p: &IParams<T>, hat: &BumpMellin<T>, t: T) -> Result<T, SpecialError> {
    let s = Complex::new(p.c, t);
    let mut acc = hat.eval(s).norm().ln() + p.c * p.x.ln();
    for pl in &p.places {
        let k = T::of(pl.k as f64);
        acc = acc + log_gamma(s + (k - T::one()))?.re - log_gamma_real(k - T::one()) + pl.log_size()
            - p.c * (T::of(4.0) * T::PI() * pl.max_mn()).ln();
    }
    Ok(acc)
}

/// `I` by the trapezoid rule on the vertical line `Re s = c`.
///
/// `ĥ(s̄) = conj ĥ(s)` and likewise for each `J`, so the integrand is
/// conjugate-symmetric in `t` and only `t >= 0` is sampled.
pub fn i_contour<T: Real>(p: &IParams<T>, hat: &BumpMellin<T>) -> Result<IValue<T>, SpecialError> {
    validate_i(p)?;
    let half = T::of(0.5);
    let cutoff = T::of(-16.0 * std::f64::consts::LN_10);
    let env0 = log_envelope(p, hat, T::zero())?;
    let t_max = match p.t_max {
        Some(t) => {
            if log_envelope(p, hat, t)? - env0 > cutoff + T::of(2.0) {
                return Err(SpecialError::Truncation);
            }
            t
        }
        None => {
            let mut t = T::one();
            let mut peak = env0;
            loop {
                let e = log_envelope(p, hat, t)?;
                peak = peak.max(e);
                if e - peak < cutoff {
                    break t;
                }
                t = t + T::one();
                if t > T::of(2000.0) {
                    return Err(SpecialError::Truncation);
                }
            }
        }
    };
    let ln_x = p.x.ln();
    let g = |t: T| -> Result<Complex<T>, SpecialError> {
        let s = Complex::new(p.c, t);
        let mut acc = hat.eval(s) * (s * ln_x).exp();
        for pl in &p.places {
            let j = j_closed_form(&JParams { place: *pl, s })?;
            acc = acc * j.value;
        }
        Ok(acc)
    };
    let mut freq = ln_x.abs() + T::one();
    for pl in &p.places {
        freq = freq + (T::of(4.0) * T::PI() * pl.max_mn()).ln().abs() + (pl.min_mn() / pl.l.abs()).ln_1p();
    }
    let mut h = (T::of(0.5) / freq).min(T::of(0.25));
    let mut n = (t_max / h).ceil().to_usize().unwrap_or(1).max(8);
    h = t_max / T::of(n as f64);
    let mut sum = g(T::zero())?.re * half + g(t_max)?.re * half;
    let mut abs_sum = sum.abs();
    for i in 1..n {
        let v = g(h * T::of(i as f64))?.re;
        sum = sum + v;
        abs_sum = abs_sum + v.abs();
    }
    let mut prev = sum * h;
    for _ in 0..10 {
        let mut extra = T::zero();
        for i in 0..n {
            let v = g(h * (T::of(i as f64) + half))?.re;
            extra = extra + v;
            abs_sum = abs_sum + v.abs();
        }
        sum = sum + extra;
        n *= 2;
        h = h * half;
        let cur = sum * h;
        let diff = (cur - prev).abs();
        let noise = T::of(64.0) * T::epsilon() * abs_sum * h;
        if diff <= noise.max(T::of(1e-11) * cur.abs()) {
            let pi = T::PI();
            return Ok(IValue { value: Complex::new(cur / pi, T::zero()), abs_err: (diff + noise) / pi, t_max });
        }
        prev = cur;
    }
    Err(SpecialError::NoConvergence("contour integral"))
}

fn kappa_product<T: Real>(pl: &Place<T>, y: T) -> Result<T, SpecialError> {
    let k = T::of(pl.k as f64);
    let two_pi = T::of(2.0) * T::PI();
    let (m, n, l) = (pl.m(), pl.n, pl.l);
    let kv = bessel_k(pl.order, two_pi * l.abs() * y)?;
    if kv.value == T::zero() {
        return Ok(T::zero());
    }
    let log_f = T::of(0.5) * k * (m * n * y * y).ln() - two_pi * (m + n) * y;
    let chi = T::of(2.0) * (l.abs() * y).sqrt() * kv.value * pl.sign();
    Ok(chi * log_f.exp())
}

fn log_norm_const<T: Real>(pl: &Place<T>) -> T {
    let k = T::of(pl.k as f64);
    (k - T::one()) * (T::of(4.0) * T::PI()).ln() - log_gamma_real(k - T::one())
}

/// `I` by direct quadrature of its defining integral over `(R_+^*)^d`, `d <= 2`.
pub fn i_direct<T: Real>(p: &IParams<T>) -> Result<IValue<T>, SpecialError> {
    validate_i(p)?;
    let bump_nodes = BumpMellin::<T>::with_step(T::of(1.0 / 128.0));
    let c_log: T = p.places.iter().map(log_norm_const).fold(T::zero(), |a, b| a + b);
    match p.places.len() {
        1 => {
            let pl = &p.places[0];
            let mut acc = T::zero();
            for &(u, w) in bump_nodes.nodes() {
                let y = u.exp() / p.x;
                acc = acc + w * kappa_product(pl, y)? / y;
            }
            Ok(IValue { value: Complex::new(acc * c_log.exp(), T::zero()), abs_err: T::zero(), t_max: T::zero() })
        }
        2 => {
            let (p1, p2) = (&p.places[0], &p.places[1]);
            // y1 y2 = e^u / x; integrate over v1 = ln y1 and u
            let k1 = T::of(p1.k as f64);
            let center = (k1 / (T::of(4.0) * T::PI() * (p1.m() + p1.n))).ln();
            let lo = center - T::of(40.0);
            let hi = center + T::of(6.0);
            let inner = |v1: T| -> Result<T, SpecialError> {
                let y1 = v1.exp();
                let a = kappa_product(p1, y1)?;
                if a == T::zero() {
                    return Ok(T::zero());
                }
                let mut acc = T::zero();
                for &(u, w) in bump_nodes.nodes() {
                    let y2 = u.exp() / (p.x * y1);
                    acc = acc + w * kappa_product(p2, y2)? / (y1 * y2);
                }
                Ok(a * acc)
            };
            let mut n = 128usize;
            let mut h = (hi - lo) / T::of(n as f64);
            let mut sum = (inner(lo)? + inner(hi)?) * T::of(0.5);
            for i in 1..n {
                sum = sum + inner(lo + h * T::of(i as f64))?;
            }
            let mut prev = sum * h;
            for _ in 0..6 {
                let mut extra = T::zero();
                for i in 0..n {
                    extra = extra + inner(lo + h * (T::of(i as f64) + T::of(0.5)))?;
                }
                sum = sum + extra;
                n *= 2;
                h = h * T::of(0.5);
                let cur = sum * h;
                if (cur - prev).abs() <= T::of(1e-10) * cur.abs() {
                    let scale = c_log.exp();
                    return Ok(IValue {
                        value: Complex::new(cur * scale, T::zero()),
                        abs_err: (cur - prev).abs() * scale,
                        t_max: T::zero(),
                    });
                }
                prev = cur;
            }
            Err(SpecialError::NoConvergence("direct two-place integral"))
        }
        _ => Err(SpecialError::Domain("direct quadrature supports one or two places")),
    }
}

/// The `n`-independent part of the explicit majorant along `Re s = c`:
/// `x^c (1/2π)∫|ĥ(c+it)| ∏|Γ(k_j-1+c+it)|/Γ(k_j-1) dt`, kept in log form.
#[derive(Clone, Debug, PartialEq)]
pub struct MajorantKernel<T> {
    pub weights: Vec<u32>,
    pub x: T,
    pub c: T,
    pub log_const: T,
}

impl<T: Real> MajorantKernel<T> {
    pub fn new(weights: &[u32], x: T, c: T, hat: &BumpMellin<T>) -> Result<Self, SpecialError> {
        if weights.is_empty() || weights.iter().any(|&k| k < 2 || k % 2 != 0) {
            return Err(SpecialError::Domain("weights must be even and at least 2"));
        }
        if !(x > T::zero()) || !x.is_finite() || c < T::zero() {
            return Err(SpecialError::Domain("need x > 0 and c >= 0"));
        }
        let log_env = |t: T| -> Result<T, SpecialError> {
            let s = Complex::new(c, t);
            let mut acc = hat.eval(s).norm().ln();
            for &k in weights {
                let k = T::of(k as f64);
                acc = acc + log_gamma(s + (k - T::one()))?.re - log_gamma_real(k - T::one());
            }
            Ok(acc)
        };
        let h = T::of(0.05);
        let mut total = T::zero();
        let mut t = T::zero();
        let peak0 = log_env(T::zero())?;
        let mut peak = peak0;
        // sums e^{e - peak0} to stay in range
        loop {
            let e = log_env(t)?;
            peak = peak.max(e);
            let w = if t == T::zero() { T::of(0.5) } else { T::one() };
            total = total + w * (e - peak0).exp();
            if e - peak < T::of(-40.0) {
                break;
            }
            t = t + h;
            if t > T::of(5000.0) {
                return Err(SpecialError::Truncation);
            }
        }
        // the trapezoid sum over t >= 0 covers half the line
        let log_const =
            (total * h / T::PI() * (T::one() + T::of(1e-6))).ln() + peak0 + c * x.ln();
        Ok(Self { weights: weights.to_vec(), x, c, log_const })
    }

    /// `ln` of the per-place factor `(4π max)^{-c} √(mn) (min/max)^{(k-1)/2}`.
    pub fn log_place_factor(&self, pl: &Place<T>) -> T {
        pl.log_size() - self.c * (T::of(4.0) * T::PI() * pl.max_mn()).ln()
    }

    /// `ln` of the majorant at the given places (weights must match the kernel).
    pub fn log_bound(&self, places: &[Place<T>]) -> T {
        debug_assert_eq!(places.len(), self.weights.len());
        places.iter().fold(self.log_const, |acc, pl| acc + self.log_place_factor(pl))
    }
}

/// Explicit majorant for `|I|` along `Re s = c`:
/// `(1/2π)∫|ĥ(c+it)| ∏|Γ(k_j-1+c+it)|/Γ(k_j-1) dt · x^c ∏ (4π max_j)^{-c} √(m_j n_j) (min_j/max_j)^{(k_j-1)/2}`.
pub fn i_majorant_at<T: Real>(p: &IParams<T>, hat: &BumpMellin<T>, c: T) -> Result<T, SpecialError> {
    let q = IParams { c, ..p.clone() };
    validate_i(&q)?;
    let weights: Vec<u32> = p.places.iter().map(|pl| pl.k).collect();
    let kernel = MajorantKernel::new(&weights, p.x, c, hat)?;
    Ok(kernel.log_bound(&p.places).exp())
}

/// `min(M_0, M_A)` of the two explicit majorants.
pub fn i_majorant<T: Real>(p: &IParams<T>, hat: &BumpMellin<T>, a: T) -> Result<T, SpecialError> {
    Ok(i_majorant_at(p, hat, T::zero())?.min(i_majorant_at(p, hat, a)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_bump_rules_match_the_full_rule() {
        let hat = BumpMellin::<f64>::new();
        for c in [0.5, 8.0] {
            for t in [0.0, 3.0, 7.5, 15.0, 30.0, 60.0, 120.0] {
                let s = Complex::new(c, t);
                let full = hat.nodes().iter().fold(Complex::new(0.0, 0.0), |acc, &(u, w)| acc + (-s * u).exp() * w);
                let floor: f64 = hat.nodes().iter().map(|&(u, w)| (-c * u).exp() * w).sum::<f64>() * 64.0 * f64::EPSILON;
                let err = (hat.eval(s) - full).norm();
                assert!(err <= 1e-12 * full.norm() + floor, "s = {s}: {err:e}");
            }
        }
    }
}
