//! Special functions. Evaluated in `f64` and cast back, since the
//! inputs are scalars and the callers only need `f32`/`f64` precision.

use statrs::function::gamma;

use crate::real::Real;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn norm_pdf<T: Real>(z: T) -> T {
    let z = z.f64();
    T::c((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal CDF `Φ(z)`.
pub fn norm_cdf<T: Real>(z: T) -> T {
    let z = z.f64();
    if z == 0.0 {
        return T::c(0.5);
    }
    T::c(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
}

/// Mills ratio `Φ(-x)/φ(x)` for large positive `x` by Lentz's continued fraction.
fn mills_ratio(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    1.0 / f
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn log_norm_cdf<T: Real>(z: T) -> T {
    let zf = z.f64();
    if zf > -5.0 {
        return T::c(norm_cdf(zf).ln());
    }
    let x = -zf;
    T::c(-0.5 * x * x - 0.5 * LN_2PI + mills_ratio(x).ln())
}

/// `φ(z) / Φ(z)`, the derivative of `ln Φ` at `z`.
pub fn inv_mills<T: Real>(z: T) -> T {
    let zf = z.f64();
    if zf > -5.0 {
        return T::c(norm_pdf(zf) / norm_cdf(zf));
    }
    T::c(1.0 / mills_ratio(-zf))
}

pub fn ln_gamma<T: Real>(x: T) -> T {
    T::c(gamma::ln_gamma(x.f64()))
}

pub fn digamma<T: Real>(x: T) -> T {
    T::c(gamma::digamma(x.f64()))
}

/// Binary entropy in bits.
pub fn binary_entropy_bits<T: Real>(p: T) -> T {
    let p = p.f64();
    if p <= 0.0 || p >= 1.0 {
        return T::zero();
    }
    T::c(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// `ln Σ exp(xᵢ)` without overflow; `-∞` entries are ignored.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}
