//! Modified Bessel function of the second kind, `K_ν(x)`, for imaginary
//! order `ν = i r` and real order `|ν| < 1/2`.

use super::gamma::log_gamma;
use super::SpecialError;
use crate::Real;
use num_complex::Complex;

/// The order of `K`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Order<T> {
    /// `ν = i r` with `r` real.
    Imaginary(T),
    /// Real `ν` in the open strip `(-1/2, 1/2)`.
    Real(T),
}

impl<T: Real> Order<T> {
    /// The order as a complex number `ν`.
    pub fn nu(&self) -> Complex<T> {
        match *self {
            Order::Imaginary(r) => Complex::new(T::zero(), r),
            Order::Real(v) => Complex::new(v, T::zero()),
        }
    }

    pub fn validate(&self) -> Result<(), SpecialError> {
        match *self {
            Order::Imaginary(r) if r.is_finite() => Ok(()),
            Order::Real(v) if v.abs() < T::of(0.5) => Ok(()),
            _ => Err(SpecialError::Domain("order must be imaginary or real in (-1/2, 1/2)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselValue<T> {
    pub value: T,
    pub abs_err: T,
    /// Set when `x > 700` and the value was flushed to zero.
    pub underflow: bool,
}

const UNDERFLOW_X: f64 = 700.0;

/// Trapezoid on `∫_0^∞ e^{-x(cosh t - 1)} w(t) dt`, refined by halving.
fn quadrature<T: Real>(x: T, order: Order<T>) -> Result<(T, T), SpecialError> {
    let growth = match order {
        Order::Imaginary(_) => T::zero(),
        Order::Real(v) => v.abs(),
    };
    let weight = |t: T| match order {
        Order::Imaginary(r) => (r * t).cos(),
        Order::Real(v) => (v * t).cosh(),
    };
    // the integrand is below e^{-60} of its peak beyond t_max
    let target = T::of(60.0);
    let mut t_max = T::one();
    while x * (t_max.cosh() - T::one()) - growth * t_max < target {
        t_max = t_max + T::of(0.5);
        if t_max > T::of(200.0) {
            break;
        }
    }
    let env = |t: T| (-x * (t.cosh() - T::one())).exp();
    let f = |t: T| env(t) * weight(t);
    let g = |t: T| env(t) * weight(t).abs();
    let mut n = 32usize;
    let mut h = t_max / T::of(n as f64);
    let mut sum = f(T::zero()) * T::of(0.5);
    let mut abs_sum = g(T::zero()) * T::of(0.5);
    for i in 1..=n {
        sum = sum + f(h * T::of(i as f64));
        abs_sum = abs_sum + g(h * T::of(i as f64));
    }
    let mut prev = sum * h;
    let e = (-x).exp();
    for _ in 0..16 {
        let mut extra = T::zero();
        let mut abs_extra = T::zero();
        for i in 0..n {
            let t = h * (T::of(i as f64) + T::of(0.5));
            extra = extra + f(t);
            abs_extra = abs_extra + g(t);
        }
        sum = sum + extra;
        abs_sum = abs_sum + abs_extra;
        n *= 2;
        h = h * T::of(0.5);
        let cur = sum * h;
        let noise = T::of(16.0) * T::epsilon() * abs_sum * h;
        let diff = (cur - prev).abs();
        if diff <= noise.max(T::of(1e-15) * cur.abs()) {
            return Ok((cur * e, (diff + noise) * e));
        }
        prev = cur;
    }
    Err(SpecialError::NoConvergence("Bessel K quadrature"))
}

/// `K_{ir}(x) = -π Im I_{ir}(x) / sinh(π r)`, free of the `e^{-πr/2}` cancellation
/// that the integral representation suffers for small `x`.
fn series_imaginary<T: Real>(r: T, x: T) -> Result<(T, T), SpecialError> {
    let nu = Complex::new(T::zero(), r);
    let half_x = x * T::of(0.5);
    let ln_half_x = half_x.ln();
    let lg = log_gamma(nu + T::one())?;
    let mut term = (nu * ln_half_x - lg).exp();
    let mut sum = term;
    let mut scale = term.norm();
    let q = half_x * half_x;
    for k in 1..2000 {
        let kf = T::of(k as f64);
        term = term * q / (nu + kf) / kf;
        sum = sum + term;
        scale = scale.max(term.norm());
        if term.norm() <= T::epsilon() * T::of(1e-3) * scale {
            break;
        }
    }
    let denom = (T::PI() * r).sinh();
    let value = -T::PI() * sum.im / denom;
    let err = T::PI() * T::epsilon() * T::of(8.0) * scale / denom;
    Ok((value, err))
}

/// `K_ν(x)` for `x > 0`; values for `x > 700` underflow to zero and are flagged.
pub fn bessel_k<T: Real>(order: Order<T>, x: T) -> Result<BesselValue<T>, SpecialError> {
    order.validate()?;
    if !(x > T::zero()) || !x.is_finite() {
        return Err(SpecialError::Domain("bessel_k needs x > 0"));
    }
    if x > T::of(UNDERFLOW_X) {
        return Ok(BesselValue { value: T::zero(), abs_err: T::zero(), underflow: true });
    }
    if let Order::Imaginary(r) = order {
        let ra = r.abs();
        if ra >= T::one() && ra <= T::of(200.0) && x <= T::of(2.0).max(T::of(1.2) * ra) {
            let (value, abs_err) = series_imaginary(ra, x)?;
            return Ok(BesselValue { value, abs_err, underflow: false });
        }
    }
    let (value, abs_err) = quadrature(x, order)?;
    Ok(BesselValue { value, abs_err, underflow: false })
}
