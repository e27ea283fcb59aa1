//! Complex log-Gamma on the principal branch.

use super::SpecialError;
use crate::Real;
use num_complex::Complex;

const LANCZOS_G: f64 = 607.0 / 128.0;

const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_8e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_6e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];

fn lanczos<T: Real>(z: Complex<T>) -> Complex<T> {
    let half = T::of(0.5);
    let w = z - T::one();
    let mut acc = Complex::new(T::of(LANCZOS[0]), T::zero());
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + Complex::new(T::of(c), T::zero()) / (w + T::of(k as f64));
    }
    let t = w + T::of(LANCZOS_G) + half;
    let half_log_two_pi = T::of(0.918_938_533_204_672_8);
    (w + half) * t.ln() - t + acc.ln() + half_log_two_pi
}

/// `ln |sin(pi z)|`, stable for large imaginary parts.
fn ln_abs_sin_pi<T: Real>(z: Complex<T>) -> T {
    let pi = T::PI();
    let two = T::of(2.0);
    let y = z.im.abs();
    let x = z.re;
    if pi * y > T::of(20.0) {
        let e = (-two * pi * y).exp();
        let c = (two * pi * x).cos();
        pi * y - two.ln() + T::of(0.5) * (T::one() - two * e * c + e * e).ln()
    } else {
        let s = (pi * x).sin();
        let sh = (pi * y).sinh();
        T::of(0.5) * (s * s + sh * sh).ln()
    }
}

/// Principal branch of `ln Γ(z)`.
///
/// Uses the 15-term Lanczos sum for `Re z >= 1/2`. Left of that line the real
/// part comes from reflection and the imaginary part from the recurrence
/// `ln Γ(z) = ln Γ(z + N) - Σ Log(z + j)`, which fixes the branch.
pub fn log_gamma<T: Real>(z: Complex<T>) -> Result<Complex<T>, SpecialError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(SpecialError::Domain("log_gamma argument is not finite"));
    }
    let half = T::of(0.5);
    if z.re >= half {
        return Ok(lanczos(z));
    }
    if z.im == T::zero() && z.re == z.re.round() {
        return Err(SpecialError::Pole);
    }
    let reflected = lanczos(Complex::new(T::one(), T::zero()) - z);
    let re = T::PI().ln() - ln_abs_sin_pi(z) - reflected.re;
    let shift = (half - z.re).ceil().to_usize().unwrap_or(0).max(1);
    let shifted = lanczos(z + T::of(shift as f64));
    let mut im = shifted.im;
    for j in 0..shift {
        im = im - (z + T::of(j as f64)).arg();
    }
    Ok(Complex::new(re, im))
}

/// `ln Γ(x)` for real `x > 0`.
pub fn log_gamma_real<T: Real>(x: T) -> T {
    lanczos(Complex::new(x, T::zero())).re
}

/// `Γ(z)` as a complex number.
pub fn gamma<T: Real>(z: Complex<T>) -> Result<Complex<T>, SpecialError> {
    log_gamma(z).map(|l| l.exp())
}
