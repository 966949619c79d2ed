//! Special functions on complex arguments: the Bessel kernel `J1(z)/z`,
//! generalized Laguerre polynomials with `alpha = 1`, and factorial helpers.

use num_complex::Complex;

use crate::scalar::{Real, C};

/// `J1(sqrt(y)) / sqrt(y)` as an entire function of `y`.
///
/// Working in `y = z^2` keeps the kernel single-valued, so complex optical
/// depths need no branch choice.
pub fn bessel_kernel<T: Real>(y: C<T>) -> C<T> {
    if y.norm() <= T::lit(144.0) {
        // J1(z)/z = 1/2 * sum_k (-y/4)^k / (k! (k+1)!)
        let w = -y / T::lit(4.0);
        let mut term = Complex::new(T::lit(0.5), T::zero());
        let mut sum = term;
        for k in 1..200 {
            let kf = T::from_usize_lossy(k);
            term = term * w / (kf * (kf + T::one()));
            sum += term;
            if term.norm() <= T::epsilon() * T::lit(1e-3) * sum.norm().max(T::min_positive_value()) {
                break;
            }
        }
        sum
    } else {
        let z = y.sqrt();
        hankel_j1(z) / z
    }
}

/// `J1(z)` for complex `z`.
pub fn bessel_j1<T: Real>(z: C<T>) -> C<T> {
    z * bessel_kernel(z * z)
}

/// Large-argument expansion of `J1(z)`, `Re z >= 0`.
fn hankel_j1<T: Real>(z: C<T>) -> C<T> {
    let mu = T::lit(4.0);
    let mut p = Complex::new(T::one(), T::zero());
    let mut q = Complex::new(T::zero(), T::zero());
    let mut a = T::one();
    let mut zpow = Complex::new(T::one(), T::zero());
    let mut last = T::infinity();
    for k in 1..60 {
        let kf = T::from_usize_lossy(k);
        let odd = T::from_usize_lossy(2 * k - 1);
        a = a * (mu - odd * odd) / (kf * T::lit(8.0));
        zpow *= z;
        let term = zpow.inv() * a;
        let mag = term.norm();
        if mag > last {
            break;
        }
        last = mag;
        let sign = if (k / 2) % 2 == 0 { T::one() } else { -T::one() };
        if k % 2 == 0 {
            p += term * sign;
        } else {
            q += term * sign;
        }
        if mag <= T::epsilon() * T::lit(1e-2) {
            break;
        }
    }
    let chi = z - T::lit(0.75) * T::PI();
    let amp = (z * T::PI()).inv().scale(T::lit(2.0)).sqrt();
    amp * (p * chi.cos() - q * chi.sin())
}

/// Generalized Laguerre polynomial `L_n^(1)(z)`.
///
/// Degrees below 5 use the explicit sum; higher degrees the three-term
/// recurrence.
pub fn generalized_laguerre<T: Real>(n: usize, z: C<T>) -> C<T> {
    if n < 5 {
        return laguerre_explicit(n, z);
    }
    let one = Complex::new(T::one(), T::zero());
    let mut prev = one;
    let mut cur = Complex::new(T::lit(2.0), T::zero()) - z;
    for k in 1..n {
        let kf = T::from_usize_lossy(k);
        let next = (cur * (Complex::new(T::lit(2.0) * kf + T::lit(2.0), T::zero()) - z) - prev * (kf + T::one())) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// `L_n^(1)(z) = sum_m binom(n+1, n-m) (-z)^m / m!`.
pub fn laguerre_explicit<T: Real>(n: usize, z: C<T>) -> C<T> {
    let mut sum = Complex::new(T::zero(), T::zero());
    let mut pow = Complex::new(T::one(), T::zero());
    for m in 0..=n {
        let c = binomial::<T>(n + 1, n - m) / factorial::<T>(m);
        sum += pow * c;
        pow *= -z;
    }
    sum
}

/// `n!` as a float (exact up to the mantissa width).
pub fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_usize_lossy(k))
}

/// `ln(n!)`.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    (2..=n).fold(T::zero(), |acc, k| acc + T::from_usize_lossy(k).ln())
}

/// Binomial coefficient `C(n, k)`, zero for `k > n`.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    if n <= 60 {
        let mut acc = 1u128;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        return T::from_u128(acc).expect("binomial representable");
    }
    (ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)).exp()
}

/// `binom(-k, l) = (-1)^l C(k+l-1, l)` for `k >= 1`.
pub fn binomial_negative<T: Real>(k: usize, l: usize) -> T {
    let mag = binomial::<T>(k + l - 1, l);
    if l.is_multiple_of(2) {
        mag
    } else {
        -mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Z = Complex<f64>;

    /// J1 from its integral representation, by composite Simpson.
    fn j1_integral(z: Z) -> Z {
        let n = 4000;
        let h = std::f64::consts::PI / n as f64;
        let f = |t: f64| (Z::new(t, 0.0) - z * t.sin()).cos();
        let mut s = f(0.0) + f(std::f64::consts::PI);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0 / std::f64::consts::PI
    }

    #[test]
    fn kernel_at_zero_is_half() {
        assert_eq!(bessel_kernel(Z::new(0.0, 0.0)), Z::new(0.5, 0.0));
    }

    #[test]
    fn j1_matches_integral_on_both_sides_of_switch() {
        for &z in &[Z::new(0.3, 0.0), Z::new(3.8, 0.05), Z::new(11.9, -0.2), Z::new(12.1, 0.1), Z::new(25.0, 0.3), Z::new(40.0, -1.0)] {
            let a = bessel_j1(z);
            let b = j1_integral(z);
            assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()), "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn kernel_continuous_across_switch() {
        let below = bessel_kernel(Z::new(144.0 - 1e-10, 0.0));
        let above = bessel_kernel(Z::new(144.0 + 1e-10, 0.0));
        assert!((below - above).norm() < 1e-10, "{below} {above}");
    }

    #[test]
    fn laguerre_low_orders() {
        let z = Z::new(0.7, -1.3);
        assert_eq!(generalized_laguerre(0, z), Z::new(1.0, 0.0));
        assert!((generalized_laguerre(1, z) - (Z::new(2.0, 0.0) - z)).norm() < 1e-15);
        assert_eq!(generalized_laguerre(1, Z::new(0.0, 0.0)), Z::new(2.0, 0.0));
    }

    #[test]
    fn laguerre_degree_switch_consistent() {
        let z = Z::new(-0.4, 2.1);
        for n in 0..=20 {
            let a = generalized_laguerre(n, z);
            let b = laguerre_explicit(n, z);
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0), "n={n}");
        }
    }

    #[test]
    fn factorials_and_binomials() {
        assert_eq!(factorial::<f64>(5), 120.0);
        assert!((ln_factorial::<f64>(20) - factorial::<f64>(20).ln()).abs() < 1e-12);
        assert_eq!(binomial::<f64>(6, 2), 15.0);
        assert_eq!(binomial::<f64>(3, 5), 0.0);
        assert_eq!(binomial_negative::<f64>(2, 3), -4.0);
        assert_eq!(binomial_negative::<f64>(1, 4), 1.0);
        let big = binomial::<f64>(100, 50);
        assert!((big / 1.0089134454556419e29 - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn laguerre5_matches_binomial_sum(re in -5.0f64..5.0, im in -5.0f64..5.0) {
            let z = Z::new(re, im);
            // recurrence path at n = 5 against the explicit sum
            let a = generalized_laguerre(5, z);
            let b = laguerre_explicit(5, z);
            prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }

        #[test]
        fn j1_matches_integral(re in 0.0f64..30.0, im in -2.0f64..2.0) {
            let z = Z::new(re, im);
            let a = bessel_j1(z);
            let b = j1_integral(z);
            prop_assert!((a - b).norm() <= 1e-10 * (1.0 + b.norm()), "{} vs {}", a, b);
        }
    }
}
