//! Multimode propagation through a uniform resonant layer.
//!
//! Mode amplitudes obey `∂ₓβ = iQβ − i(ζ/2)F(ω)Λβ` with `Λ = ξ ⊗ 1ᵀ`.
//! Wavenumbers are offsets from the vacuum wavenumber, so `x` and the
//! retarded time are the only coordinates. The driving pulse is a unit
//! broadband delta: time-domain outputs are scattered envelopes divided by
//! the total input field at `x = 0`.

use num_complex::Complex;
use rustfft::FftNum;
use thiserror::Error;

use crate::fourier::{invert_causal, FourierError, OmegaGrid, TimeSeries};
use crate::linalg::CMatrix;
use crate::modes::{InputAperture, ModeSet};
use crate::nuclear::{attenuation_zeta, lorentzian, ResponseModel};
use crate::output::CsvTable;
use crate::scalar::{im_unit, re, Real, C};
use crate::special::{bessel_kernel, ln_factorial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagateError {
    #[error("system shape: {0}")]
    Shape(String),
    #[error("mode {0} grows along x (Im q < 0)")]
    Gain(usize),
    #[error("couplings sum to zero, the geometric factor is undefined")]
    NoCoupling,
    #[error("input field vanishes at x = 0, normalized envelopes are undefined")]
    NoInput,
    #[error("propagation needs a scalar (unsplit) response")]
    NotIsotropic,
    #[error("negative propagation distance {0:e}")]
    NegativeDistance(f64),
    #[error("wavenumbers {0} and {1} coincide; use the matrix exponential instead of the residue series")]
    Degenerate(usize, usize),
    #[error("residue multiplicities: {0}")]
    Multiplicity(String),
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

/// The mode space seen by the resonant layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSystem<T> {
    q: Vec<C<T>>,
    xi: Vec<C<T>>,
    zeta: T,
    response: ResponseModel<T>,
    beta0: Vec<C<T>>,
}

impl<T: Real> EffectiveSystem<T> {
    pub fn new(
        q: Vec<C<T>>,
        xi: Vec<C<T>>,
        zeta: T,
        response: ResponseModel<T>,
        beta0: Vec<C<T>>,
    ) -> Result<Self, PropagateError> {
        if q.is_empty() || q.len() != xi.len() || q.len() != beta0.len() {
            return Err(PropagateError::Shape(format!(
                "{} wavenumbers, {} couplings, {} inputs",
                q.len(),
                xi.len(),
                beta0.len()
            )));
        }
        if response.hyperfine().is_some() {
            return Err(PropagateError::NotIsotropic);
        }
        if !(zeta >= T::zero()) || !zeta.is_finite() {
            return Err(PropagateError::Shape(format!("ζ = {zeta}")));
        }
        if let Some(i) = q.iter().position(|z| z.im < T::zero()) {
            return Err(PropagateError::Gain(i));
        }
        let sys = Self {
            q,
            xi,
            zeta,
            response,
            beta0,
        };
        if sys.trace_lambda().norm_sqr() == T::zero() {
            return Err(PropagateError::NoCoupling);
        }
        Ok(sys)
    }

    /// All modes of `set`, fed through `aperture`, with `ζ` from the species.
    pub fn from_mode_set(
        set: &ModeSet<T>,
        response: ResponseModel<T>,
        aperture: InputAperture,
    ) -> Result<Self, PropagateError> {
        let all: Vec<usize> = (0..set.len()).collect();
        Self::from_mode_subset(set, &all, response, aperture)
    }

    pub fn from_mode_subset(
        set: &ModeSet<T>,
        indices: &[usize],
        response: ResponseModel<T>,
        aperture: InputAperture,
    ) -> Result<Self, PropagateError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= set.len()) {
            return Err(PropagateError::Shape(format!("mode index {bad} out of {}", set.len())));
        }
        let overlaps = set.input_overlaps(aperture);
        let q = indices.iter().map(|&i| set.modes()[i].q_rel()).collect();
        let xi = indices.iter().map(|&i| set.couplings()[i]).collect();
        let beta0 = indices.iter().map(|&i| overlaps[i]).collect();
        let zeta = attenuation_zeta(response.species());
        Self::new(q, xi, zeta, response, beta0)
    }

    /// Same modes with a different resonant density.
    pub fn with_zeta(&self, zeta: T) -> Result<Self, PropagateError> {
        Self::new(self.q.clone(), self.xi.clone(), zeta, self.response.clone(), self.beta0.clone())
    }

    pub fn with_input(&self, beta0: Vec<C<T>>) -> Result<Self, PropagateError> {
        Self::new(self.q.clone(), self.xi.clone(), self.zeta, self.response.clone(), beta0)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q(&self) -> &[C<T>] {
        &self.q
    }

    pub fn xi(&self) -> &[C<T>] {
        &self.xi
    }

    pub fn zeta(&self) -> T {
        self.zeta
    }

    pub fn beta0(&self) -> &[C<T>] {
        &self.beta0
    }

    pub fn response(&self) -> &ResponseModel<T> {
        &self.response
    }

    pub fn gamma(&self) -> T {
        self.response.gamma()
    }

    pub fn trace_lambda(&self) -> C<T> {
        self.xi.iter().copied().sum()
    }

    /// `B_in(0) = Σ β0`.
    pub fn input_total(&self) -> C<T> {
        self.beta0.iter().copied().sum()
    }

    /// Free field `Σ β0_λ e^{iq_λ x}`.
    pub fn free_field(&self, x: T) -> C<T> {
        let i = im_unit::<T>();
        self.q.iter().zip(&self.beta0).map(|(q, b)| *b * (i * *q * x).exp()).sum()
    }

    /// Scalar response `F(ω)`.
    pub fn response_at(&self, omega: T) -> C<T> {
        lorentzian(self.gamma(), omega)
    }

    /// `iQ − i(ζ/2)F(ω)Λ`.
    pub fn generator(&self, omega: T) -> CMatrix<T> {
        let i = im_unit::<T>();
        let n = self.len();
        let a = -i * re(self.zeta * T::lit(0.5)) * self.response_at(omega);
        let ones = vec![re(T::one()); n];
        let mut g = CMatrix::outer(&self.xi, &ones).scale(a);
        for (k, q) in self.q.iter().enumerate() {
            g[(k, k)] += i * *q;
        }
        g
    }

    fn check_distinct(&self) -> Result<(), PropagateError> {
        check_distinct(&self.q)
    }

    fn normalized_input(&self) -> Result<C<T>, PropagateError> {
        let b = self.input_total();
        if b.norm_sqr() == T::zero() {
            return Err(PropagateError::NoInput);
        }
        Ok(b)
    }
}

fn check_distance<T: Real>(x: T) -> Result<(), PropagateError> {
    if x < T::zero() {
        return Err(PropagateError::NegativeDistance(x.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

fn check_distinct<T: Real>(q: &[C<T>]) -> Result<(), PropagateError> {
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            let scale = q[i].norm().max(q[j].norm());
            if (q[i] - q[j]).norm() <= T::lit(1e-6) * scale {
                return Err(PropagateError::Degenerate(i, j));
            }
        }
    }
    Ok(())
}

/// Mode amplitudes `exp((iQ − i(ζ/2)F(ω)Λ)x)·β0`.
pub fn propagate_frequency<T: Real>(sys: &EffectiveSystem<T>, x: T, omega: T) -> Result<Vec<C<T>>, PropagateError> {
    check_distance(x)?;
    let g = sys.generator(omega).scale(re(x));
    Ok(g.expm().mul_vec(&sys.beta0))
}

/// Mode amplitudes on an `x × ω` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution<T> {
    pub x: Vec<T>,
    pub omega: Vec<T>,
    /// `beta[ix * omega.len() + iw]`.
    pub beta: Vec<Vec<C<T>>>,
}

impl<T: Real> FieldSolution<T> {
    pub fn compute(sys: &EffectiveSystem<T>, x: &[T], omega: &[T]) -> Result<Self, PropagateError> {
        let mut beta = Vec::with_capacity(x.len() * omega.len());
        for &xi in x {
            for &w in omega {
                beta.push(propagate_frequency(sys, xi, w)?);
            }
        }
        Ok(Self {
            x: x.to_vec(),
            omega: omega.to_vec(),
            beta,
        })
    }

    pub fn amplitudes(&self, ix: usize, iw: usize) -> &[C<T>] {
        &self.beta[ix * self.omega.len() + iw]
    }

    /// `B(x, ω) = Σ_λ β_λ`.
    pub fn total(&self, ix: usize, iw: usize) -> C<T> {
        self.amplitudes(ix, iw).iter().copied().sum()
    }

    /// `x, omega, re_b, im_b, abs2_b`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "omega", "re_b", "im_b", "abs2_b"]);
        for (ix, &x) in self.x.iter().enumerate() {
            for (iw, &w) in self.omega.iter().enumerate() {
                let b = self.total(ix, iw);
                t.push(&[x, w, b.re, b.im, b.norm_sqr()]);
            }
        }
        t
    }
}

/// `U(Δx) = Σ ξ_λ e^{iq_λΔx} / Σ ξ_λ`.
pub fn geometric_factor_u<T: Real>(sys: &EffectiveSystem<T>, dx: T) -> C<T> {
    let i = im_unit::<T>();
    let s: C<T> = sys.q.iter().zip(&sys.xi).map(|(q, xi)| *xi * (i * *q * dx).exp()).sum();
    if dx == T::zero() {
        return re(T::one());
    }
    s / sys.trace_lambda()
}

/// Compositions of `n` into `N` non-negative parts, lexicographic.
pub fn partitions(parts: usize, n: usize) -> Vec<Vec<usize>> {
    fn fill(rest: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 1 {
            cur.push(rest);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=rest {
            cur.push(k);
            fill(rest - k, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if n == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    fill(n, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// `ln C(n, k)`.
fn ln_binomial<T: Real>(n: usize, k: usize) -> T {
    ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)
}

/// Inverse Laplace transform of `Π (s − iq_i)^{−k_i}` at `x`.
pub fn residue_r<T: Real>(q: &[C<T>], k: &[usize], x: T) -> Result<C<T>, PropagateError> {
    if q.len() != k.len() {
        return Err(PropagateError::Multiplicity(format!("{} poles, {} multiplicities", q.len(), k.len())));
    }
    check_distance(x)?;
    let active: Vec<usize> = (0..q.len()).filter(|&i| k[i] > 0).collect();
    if active.is_empty() {
        return Err(PropagateError::Multiplicity("all multiplicities are zero".into()));
    }
    let pq: Vec<C<T>> = active.iter().map(|&i| q[i]).collect();
    check_distinct(&pq).map_err(|e| match e {
        PropagateError::Degenerate(a, b) => PropagateError::Degenerate(active[a], active[b]),
        other => other,
    })?;
    let i = im_unit::<T>();
    let mut total = Complex::new(T::zero(), T::zero());
    for (a, &j) in active.iter().enumerate() {
        let m = k[j] - 1;
        let mut inner = Complex::new(T::zero(), T::zero());
        for l in partitions(active.len(), m) {
            let deep = l.iter().zip(&active).any(|(&li, &p)| li + k[p] > 20);
            let term = if deep {
                // sign and log magnitude kept apart
                let mut ln = Complex::new(T::zero(), T::zero());
                let mut negative = false;
                let mut vanishes = false;
                for (b, &p) in active.iter().enumerate() {
                    let lb = l[b];
                    if b == a {
                        if lb > 0 {
                            if x == T::zero() {
                                vanishes = true;
                            } else {
                                ln += re(T::from_usize_lossy(lb) * x.ln() - ln_factorial::<T>(lb));
                            }
                        }
                    } else {
                        let kp = k[p];
                        negative ^= lb % 2 == 1;
                        let delta = i * (q[j] - q[p]);
                        ln += re(ln_binomial::<T>(kp + lb - 1, lb)) - delta.ln() * T::from_usize_lossy(kp + lb);
                    }
                }
                if vanishes {
                    Complex::new(T::zero(), T::zero())
                } else {
                    let v = ln.exp();
                    if negative {
                        -v
                    } else {
                        v
                    }
                }
            } else {
                let mut v = re(T::one());
                for (b, &p) in active.iter().enumerate() {
                    let lb = l[b];
                    if b == a {
                        v *= re(x.powi(lb as i32) / crate::special::factorial::<T>(lb));
                    } else {
                        let kp = k[p];
                        let delta = i * (q[j] - q[p]);
                        v = v * re(crate::special::binomial_negative::<T>(kp, lb)) / delta.powi((kp + lb) as i32);
                    }
                }
                v
            };
            inner += term;
        }
        total += (i * q[j] * x).exp() * inner;
    }
    Ok(total)
}

/// Why a series sum stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Two consecutive terms fell below `1e-12` of the running sum.
    Converged,
    /// The requested maximum order was reached first.
    MaxOrder,
}

/// A truncated series value with its last-term magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum<T> {
    pub value: C<T>,
    pub last_term: T,
    /// Largest term magnitude; `peak_term / |value|` bounds the cancellation.
    pub peak_term: T,
    pub orders: usize,
    pub stop: Truncation,
}

/// Laplace-space multiple-scattering coefficients at one distance.
///
/// `d_n` is the inverse transform at `x̂ = 1` of `Ũ(ŝ)ⁿ B̃_in(ŝ)` after
/// rescaling `ŝ = s x`, with `Ũ = Σ g_λ/(ŝ − iq_λx)` and `g_λ = ζξ_λx/2`;
/// the field is then `Σ (−iF)ⁿ d_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DysonSeries<T> {
    d: Vec<C<T>>,
    methods: Vec<CoefficientMethod>,
    gamma: T,
    input: C<T>,
}

impl<T: Real> DysonSeries<T> {
    pub fn new(sys: &EffectiveSystem<T>, x: T, n_max: usize) -> Result<Self, PropagateError> {
        check_distance(x)?;
        sys.check_distinct()?;
        let (d, methods) = scaled_coefficients(sys, x, n_max);
        Ok(Self {
            d,
            methods,
            gamma: sys.gamma(),
            input: sys.input_total(),
        })
    }

    pub fn coefficients(&self) -> &[C<T>] {
        &self.d
    }

    pub fn methods(&self) -> &[CoefficientMethod] {
        &self.methods
    }

    pub fn n_max(&self) -> usize {
        self.d.len() - 1
    }

    /// Total field `B(x, ω)`.
    pub fn frequency(&self, omega: T) -> SeriesSum<T> {
        let a = -im_unit::<T>() * lorentzian(self.gamma, omega);
        let mut p = re(T::one());
        sum_series(self.d.iter().enumerate().map(|(n, d)| {
            if n > 0 {
                p *= a;
            }
            *d * p
        }))
    }

    /// Scattered envelope `B_sc(x, t) / B_in(0)`.
    pub fn time(&self, t: T) -> Result<SeriesSum<T>, PropagateError> {
        if self.input.norm_sqr() == T::zero() {
            return Err(PropagateError::NoInput);
        }
        let zero = Complex::new(T::zero(), T::zero());
        if t < T::zero() {
            return Ok(SeriesSum {
                value: zero,
                last_term: T::zero(),
                peak_term: T::zero(),
                orders: 0,
                stop: Truncation::Converged,
            });
        }
        let h = self.gamma * T::lit(0.5);
        let y = h * t;
        // (−1)^n y^{n−1}/(n−1)!
        let mut c = -T::one();
        let mut s = sum_series(std::iter::once(zero).chain(self.d.iter().enumerate().skip(1).map(|(n, d)| {
            let v = *d * c;
            c = -c * y / T::from_usize_lossy(n);
            v
        })));
        let scale = re(h * (-y).exp()) / self.input;
        s.value *= scale;
        s.last_term *= scale.norm();
        s.peak_term *= scale.norm();
        Ok(s)
    }
}

fn sum_series<T: Real, I: Iterator<Item = C<T>>>(terms: I) -> SeriesSum<T> {
    let mut value = Complex::new(T::zero(), T::zero());
    let mut last = T::zero();
    let mut peak = T::zero();
    let mut quiet = 0;
    let mut orders = 0;
    for (n, term) in terms.enumerate() {
        value += term;
        last = term.norm();
        peak = peak.max(last);
        orders = n;
        if n == 0 {
            continue;
        }
        if last <= T::lit(1e-12) * value.norm() {
            quiet += 1;
            if quiet == 2 {
                return SeriesSum {
                    value,
                    last_term: last,
                    peak_term: peak,
                    orders,
                    stop: Truncation::Converged,
                };
            }
        } else {
            quiet = 0;
        }
    }
    SeriesSum {
        value,
        last_term: last,
        peak_term: peak,
        orders,
        stop: Truncation::MaxOrder,
    }
}

/// How one Laplace coefficient was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientMethod {
    /// Sum of the pole residues, one Taylor coefficient per pole.
    Residues,
    /// The same residue sum as a trapezoidal Cauchy integral on a circle
    /// enclosing every pole; used where the poles nearly cancel.
    Contour,
}

/// `d_0 ..= d_{n_max}` with the evaluation chosen per order.
fn scaled_coefficients<T: Real>(sys: &EffectiveSystem<T>, x: T, n_max: usize) -> (Vec<C<T>>, Vec<CoefficientMethod>) {
    let half = T::lit(0.5);
    let poles: Vec<C<T>> = sys.q.iter().map(|q| im_unit::<T>() * *q * x).collect();
    let g: Vec<C<T>> = sys.xi.iter().map(|xi| *xi * sys.zeta * x * half).collect();
    let by_pole = pole_coefficients(&poles, &g, &sys.beta0, n_max);
    let mut d = Vec::with_capacity(n_max + 1);
    let mut how = Vec::with_capacity(n_max + 1);
    for (n, (value, err)) in by_pole.into_iter().enumerate() {
        // the contour is only worth trying once the poles cancel
        if err <= T::lit(1e-13) * value.norm() {
            d.push(value);
            how.push(CoefficientMethod::Residues);
            continue;
        }
        let (cv, cerr) = contour_coefficient(&poles, &g, &sys.beta0, n);
        if cerr < err {
            d.push(cv);
            how.push(CoefficientMethod::Contour);
        } else {
            d.push(value);
            how.push(CoefficientMethod::Residues);
        }
    }
    (d, how)
}

/// Residue sums with rounding estimates.
///
/// Around the pole `ŝ = p_j + h` the integrand is `h^{−(n+1)} Pⁿ Q e^{p_j} e^h`
/// with `P = hŨ`, `Q = hB̃_in` analytic, so each residue is one Taylor
/// coefficient; this is the partition sum of [`residue_r`] collected order by order.
fn pole_coefficients<T: Real>(poles: &[C<T>], g: &[C<T>], beta: &[C<T>], n_max: usize) -> Vec<(C<T>, T)> {
    let n = poles.len();
    let zero = Complex::new(T::zero(), T::zero());
    let len = n_max + 1;
    let mut d = vec![zero; len];
    let mut mag = vec![T::zero(); len];
    let mut ex = Vec::with_capacity(len);
    let mut fact = T::one();
    for l in 0..len {
        if l > 0 {
            fact /= T::from_usize_lossy(l);
        }
        ex.push(fact);
    }
    for j in 0..n {
        if g[j].norm_sqr() == T::zero() && beta[j].norm_sqr() == T::zero() {
            continue;
        }
        let mut p = vec![zero; len + 1];
        let mut qq = vec![zero; len + 1];
        p[0] = g[j];
        qq[0] = beta[j];
        for m in 0..n {
            if m == j {
                continue;
            }
            // 1/(h + Δ) = Σ (−1)^l h^l / Δ^{l+1}
            let inv = (poles[j] - poles[m]).inv();
            let mut c = inv;
            for l in 0..len {
                p[l + 1] += g[m] * c;
                qq[l + 1] += beta[m] * c;
                c = -c * inv;
            }
        }
        let e0 = poles[j].exp();
        let qe: Vec<C<T>> = (0..len)
            .map(|a| (0..=a).map(|b| qq[b] * ex[a - b]).sum::<C<T>>() * e0)
            .collect();
        let mut pn = vec![zero; len];
        pn[0] = re(T::one());
        for order in 0..len {
            let mut s = zero;
            for l in 0..=order {
                let t = pn[l] * qe[order - l];
                mag[order] += t.norm();
                s += t;
            }
            d[order] += s;
            if order + 1 < len {
                let mut next = vec![zero; len];
                for (a, pa) in pn.iter().enumerate() {
                    if pa.norm_sqr() == T::zero() {
                        continue;
                    }
                    for b in 0..len - a {
                        next[a + b] += *pa * p[b];
                    }
                }
                pn = next;
            }
        }
    }
    d.into_iter()
        .zip(mag)
        .map(|(v, m)| (v, m * T::epsilon() * T::lit(8.0)))
        .collect()
}

/// `(1/2πi)∮ Ũⁿ B̃ e^ŝ dŝ` with rounding estimate.
fn contour_coefficient<T: Real>(poles: &[C<T>], g: &[C<T>], beta: &[C<T>], n: usize) -> (C<T>, T) {
    let zero = Complex::new(T::zero(), T::zero());
    let live: Vec<usize> = (0..poles.len())
        .filter(|&j| g[j].norm_sqr() > T::zero() || beta[j].norm_sqr() > T::zero())
        .collect();
    if live.is_empty() {
        return (zero, T::zero());
    }
    let centre = live.iter().map(|&j| poles[j]).sum::<C<T>>() / T::from_usize_lossy(live.len());
    let r0 = live.iter().map(|&j| (poles[j] - centre).norm()).fold(T::zero(), T::max);
    // radius n balances e^ρ against ρ^{−n}
    let rho = T::from_usize_lossy(n).max(T::lit(2.0) * r0).max(T::one());
    let m = (rho * T::E()).ceil().to_usize().unwrap_or(0).max(n) + 64;
    let mut sum = zero;
    let mut mag = T::zero();
    for k in 0..m {
        let theta = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(m);
        let dz = Complex::from_polar(rho, theta);
        let s = centre + dz;
        let mut u = zero;
        let mut b = zero;
        for &j in &live {
            let w = (s - poles[j]).inv();
            u += g[j] * w;
            b += beta[j] * w;
        }
        let f = u.powi(n as i32) * b * s.exp() * dz;
        mag += f.norm();
        sum += f;
    }
    let mf = T::from_usize_lossy(m);
    (sum / mf, mag / mf * T::epsilon() * T::lit(8.0))
}

/// `d_n` assembled term by term from [`partitions`] and [`residue_r`].
pub fn dyson_coefficient_explicit<T: Real>(sys: &EffectiveSystem<T>, x: T, n: usize) -> Result<C<T>, PropagateError> {
    sys.check_distinct()?;
    let half = T::lit(0.5);
    let qh: Vec<C<T>> = sys.q.iter().map(|q| *q * x).collect();
    let g: Vec<C<T>> = sys.xi.iter().map(|xi| *xi * sys.zeta * x * half).collect();
    let mut total = Complex::new(T::zero(), T::zero());
    for k in partitions(sys.len(), n) {
        let ln_multi = ln_factorial::<T>(n) - k.iter().map(|&kj| ln_factorial::<T>(kj)).fold(T::zero(), |a, b| a + b);
        let mut weight = re(ln_multi.exp());
        for (gj, &kj) in g.iter().zip(&k) {
            weight *= gj.powi(kj as i32);
        }
        if weight.norm_sqr() == T::zero() {
            continue;
        }
        for (idx, b) in sys.beta0.iter().enumerate() {
            if b.norm_sqr() == T::zero() {
                continue;
            }
            let mut kk = k.clone();
            kk[idx] += 1;
            total += *b * weight * residue_r(&qh, &kk, T::one())?;
        }
    }
    Ok(total)
}

/// Dyson partial sum of the total field at `(x, ω)`.
pub fn dyson_field_frequency<T: Real>(
    sys: &EffectiveSystem<T>,
    x: T,
    omega: T,
    n_max: usize,
) -> Result<SeriesSum<T>, PropagateError> {
    Ok(DysonSeries::new(sys, x, n_max)?.frequency(omega))
}

/// Dyson partial sum of the scattered envelope at `(x, t)`.
pub fn dyson_time_field<T: Real>(sys: &EffectiveSystem<T>, x: T, t: T, n_max: usize) -> Result<SeriesSum<T>, PropagateError> {
    DysonSeries::new(sys, x, n_max)?.time(t)
}

/// Single-mode scattered envelope `−e^{−γt/2}(γτ/2) J₁(√(τγt))/√(τγt)`, `τ = ξζx`.
pub fn bessel_time_response<T: Real>(xi: C<T>, zeta: T, x: T, gamma: T, t: T) -> C<T> {
    if t < T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let tau = xi * zeta * x;
    let y = tau * gamma * t;
    -re((-gamma * t * T::lit(0.5)).exp()) * tau * re(gamma * T::lit(0.5)) * bessel_kernel(y)
}

/// Expansion `1ᵀ exp(iQx + εΛx) β0 = Σ εⁿ cₙ`, `n = 0..=order`, from one
/// block-bidiagonal matrix exponential.
pub fn taylor_coefficients<T: Real>(sys: &EffectiveSystem<T>, x: T, order: usize) -> Vec<C<T>> {
    let n = sys.len();
    let blocks = order + 1;
    let dim = n * blocks;
    let i = im_unit::<T>();
    let mut m = CMatrix::zeros(dim);
    for b in 0..blocks {
        for r in 0..n {
            m[(b * n + r, b * n + r)] = i * sys.q[r] * x;
            if b + 1 < blocks {
                for c in 0..n {
                    m[(b * n + r, (b + 1) * n + c)] = sys.xi[r] * x;
                }
            }
        }
    }
    let e = m.expm();
    (0..blocks)
        .map(|b| {
            let mut s = Complex::new(T::zero(), T::zero());
            for r in 0..n {
                for c in 0..n {
                    s += e[(r, b * n + c)] * sys.beta0[c];
                }
            }
            s
        })
        .collect()
}

/// Number of Laurent terms removed before the FFT.
pub const FFT_TAIL_ORDER: usize = 4;

/// Scattered envelope `B_sc(x, t)/B_in(0)` by numerical inversion of the
/// matrix-exponential spectrum.
pub fn fft_time_response<T: Real + FftNum>(
    sys: &EffectiveSystem<T>,
    x: T,
    grid: &OmegaGrid<T>,
) -> Result<TimeSeries<T>, PropagateError> {
    check_distance(x)?;
    let input = sys.normalized_input()?;
    let gamma = sys.gamma();
    grid.validate(gamma)?;
    let free = sys.free_field(x);
    // F = (γ/2)/w, so the n-th order is cₙ (−iζγ/4)ⁿ / wⁿ
    let c = taylor_coefficients(sys, x, FFT_TAIL_ORDER);
    let a = -im_unit::<T>() * sys.zeta * gamma * T::lit(0.25);
    let mut p = re(T::one());
    let tail: Vec<C<T>> = c[1..]
        .iter()
        .map(|cn| {
            p *= a;
            *cn * p / input
        })
        .collect();
    let ts = invert_causal(
        grid,
        gamma,
        |w| {
            let beta = sys.generator(w).scale(re(x)).expm().mul_vec(&sys.beta0);
            (beta.iter().copied().sum::<C<T>>() - free) / input
        },
        &tail,
    )?;
    Ok(ts)
}
