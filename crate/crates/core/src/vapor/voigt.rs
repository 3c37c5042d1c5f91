use std::sync::OnceLock;

use num_complex::Complex;

use crate::consts::{BOLTZMANN, SPEED_OF_LIGHT};
use crate::real::{lit, Real};

// Weideman's rational expansion of the Faddeeva function, N terms.
const N: usize = 40;

fn coefficients() -> &'static [f64; N] {
    static COEF: OnceLock<[f64; N]> = OnceLock::new();
    COEF.get_or_init(|| {
        let m = 2 * N;
        let m2 = 2 * m;
        let l = (N as f64 / 2f64.sqrt()).sqrt();
        let g = |k: i64| {
            let theta = k as f64 * std::f64::consts::PI / m as f64;
            let t = l * (theta / 2.0).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let mut a = [0.0; N];
        for (n, slot) in a.iter_mut().enumerate() {
            let n = n + 1;
            let mut s = 0.0;
            for k in -(m as i64) + 1..m as i64 {
                s += g(k) * (std::f64::consts::TAU * (k * n as i64) as f64 / m2 as f64).cos();
            }
            *slot = s / m2 as f64;
        }
        a
    })
}

/// Faddeeva function `w(z) = e^{−z²} erfc(−iz)` for `Im z ≥ 0`.
pub fn faddeeva<T: Real>(z: Complex<T>) -> Complex<T> {
    let a = coefficients();
    let l = lit::<T>((N as f64 / 2f64.sqrt()).sqrt());
    let iz = Complex::new(-z.im, z.re);
    let den = Complex::new(l, T::zero()) - iz;
    let zz = (Complex::new(l, T::zero()) + iz) / den;
    let mut p = Complex::new(T::zero(), T::zero());
    for &c in a.iter().rev() {
        p = p * zz + Complex::new(lit(c), T::zero());
    }
    let two = Complex::new(lit::<T>(2.0), T::zero());
    two * p / (den * den) + Complex::new(T::one() / T::PI().sqrt(), T::zero()) / den
}

/// Area-normalised Voigt profile: Gaussian of standard deviation `sigma` convolved with a
/// Lorentzian of half width `gamma`.
pub fn voigt<T: Real>(x: T, sigma: T, gamma: T) -> T {
    if sigma <= T::zero() {
        return gamma / (T::PI() * (x * x + gamma * gamma));
    }
    let s2 = sigma * T::SQRT_2();
    let w = faddeeva(Complex::new(x / s2, gamma / s2));
    w.re / (sigma * T::TAU().sqrt())
}

/// Voigt profile scaled so the pure Lorentzian (`sigma = 0`) would peak at 1.
pub fn voigt_relative<T: Real>(x: T, sigma: T, gamma: T) -> T {
    if sigma <= T::zero() {
        return gamma * gamma / (x * x + gamma * gamma);
    }
    T::PI() * gamma * voigt(x, sigma, gamma)
}

/// Doppler FWHM `ν₀ √(8 ln2 k_B T / (m c²))`.
pub fn doppler_width<T: Real>(temperature: T, nu0: T, mass: T) -> T {
    let c = lit::<T>(SPEED_OF_LIGHT);
    nu0 * (lit::<T>(8.0) * T::LN_2() * lit::<T>(BOLTZMANN) * temperature / (mass * c * c)).sqrt()
}

/// Gaussian standard deviation of the Doppler profile.
pub fn doppler_sigma<T: Real>(temperature: T, nu0: T, mass: T) -> T {
    doppler_width(temperature, nu0, mass) / (lit::<T>(8.0) * T::LN_2()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::ATOMIC_MASS_UNIT;
    use crate::quad::integrate;

    const SIGMA: f64 = 211.3187e6;
    const GAMMA: f64 = 2.873e6;

    #[test]
    fn matches_reference_values() {
        // scipy.special.voigt_profile(x, σ, γ) · πγ
        let table = [
            (0.0, 0.016856255435149015),
            (10e6, 0.01683759565759159),
            (100e6, 0.015089264691888088),
            (300e6, 0.00623448674459681),
            (1000e6, 9.987772563190892e-06),
            (3000e6, 9.31127148102822e-07),
            (5000e6, 3.3195029751138166e-07),
        ];
        for (x, v) in table {
            let got = voigt_relative(x, SIGMA, GAMMA);
            assert!((got / v - 1.0).abs() < 1e-6, "x={x}: {got} vs {v}");
            assert_eq!(got, voigt_relative(-x, SIGMA, GAMMA));
        }
    }

    #[test]
    fn faddeeva_known_points() {
        // w(0) = 1; w(i) = e erfc(1)
        let w0 = faddeeva(Complex::new(0.0f64, 0.0));
        assert!((w0.re - 1.0).abs() < 1e-13 && w0.im.abs() < 1e-13);
        let wi = faddeeva(Complex::new(0.0f64, 1.0));
        assert!((wi.re - 0.427_583_576_155_807).abs() < 1e-13);
        // Dawson relation on the real axis: Im w(x) = 2/√π D(x); D(1) = 0.5380795069127684
        let w1 = faddeeva(Complex::new(1.0f64, 0.0));
        assert!((w1.re - (-1.0f64).exp()).abs() < 1e-13);
        assert!((w1.im - 2.0 / std::f64::consts::PI.sqrt() * 0.538_079_506_912_768_4).abs() < 1e-13);
    }

    #[test]
    fn unit_area() {
        let a = integrate(|x| voigt(x, SIGMA, GAMMA), -200.0 * SIGMA, 200.0 * SIGMA, 0.0, 1e-12, 4000);
        // Lorentzian tail mass beyond ±200σ
        let tail = 2.0 / std::f64::consts::PI * (GAMMA / (200.0 * SIGMA)).atan();
        assert!((a + tail - 1.0).abs() < 1e-8, "{a}");
    }

    #[test]
    fn limits() {
        for x in [0.0, 0.5, 1.3, 3.0] {
            let gauss = (-x * x / 2.0f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let v = voigt(x, 1.0, 1e-9);
            assert!((v / gauss - 1.0).abs() < 1e-4, "{x}");
            let lor = 1.0 / (std::f64::consts::PI * (1.0 + x * x));
            let v = voigt(x, 1e-7, 1.0);
            assert!((v / lor - 1.0).abs() < 1e-4, "{x}");
            assert!((voigt(x, 0.0, 1.0) / lor - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn doppler_width_oracle_and_scaling() {
        let m = 86.909_180_527 * ATOMIC_MASS_UNIT;
        let nu = SPEED_OF_LIGHT / 795e-9;
        let w = doppler_width(300.0, nu, m);
        assert!((w / 501.8e6 - 1.0).abs() < 0.01, "{w}");
        assert!((doppler_width(300.0, 2.0 * nu, m) / w - 2.0).abs() < 1e-14);
        for t in [270.0, 301.5, 333.3, 370.0] {
            let r = doppler_width(t, nu, m) / w;
            assert!((r / (t / 300.0f64).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}
