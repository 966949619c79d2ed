//! Resonant layers patterned into thin strips along the propagation axis.
//!
//! Each strip is thin enough that the envelope is uniform across it, so it
//! acts as a point scatterer with susceptibility `χ(ω) = −ν0/(ω + iγ/2 + ν0)`,
//! `ν0 = iγτ trΛ/4`. Arrays are solved either as an ordered product of
//! rank-one scattering factors and free propagators or as a sum over
//! scattering orders `T = Σ χ^m V_m`; both are exact.

use num_complex::Complex;
use rustfft::FftNum;
use thiserror::Error;

use crate::fourier::{invert_causal, FourierError, OmegaGrid, TimeSeries};
use crate::linalg::CMatrix;
use crate::modes::TwoModeParams;
use crate::nuclear::{scalar_response, NuclearError, ResponseModel};
use crate::output::{fmt17, CsvTable};
use crate::propagate::{bessel_time_response, geometric_factor_u, EffectiveSystem, PropagateError};
use crate::scalar::{im_unit, re, Real, C};
use crate::special::{binomial, binomial_negative, generalized_laguerre};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StripError {
    #[error("strip array is empty")]
    Empty,
    #[error("strip width must be positive")]
    Width,
    #[error("strip optical depth must be positive")]
    Depth,
    #[error("strip {0} does not start after strip {} ends", .0 - 1)]
    Overlap(usize),
    #[error("1 + a·trΛ vanishes, the scattering factor is singular")]
    Singular,
    #[error("order {m_max} exceeds the {n} strips in the array")]
    Order { m_max: usize, n: usize },
    #[error("strip count must be at least 1")]
    Count,
    #[error("layout line {line}: {message}")]
    Layout { line: usize, message: String },
    #[error(transparent)]
    Nuclear(#[from] NuclearError),
    #[error(transparent)]
    Propagate(#[from] PropagateError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

/// `χ = −i(τ/2)F trΛ / (1 + i(τ/2)F trΛ)` from the response function.
pub fn strip_susceptibility<T: Real>(
    tau: T,
    trace: C<T>,
    response: &ResponseModel<T>,
    omega: T,
) -> Result<C<T>, StripError> {
    let f = scalar_response(response, omega)?;
    let a = im_unit::<T>() * tau * T::lit(0.5) * f * trace;
    Ok(-a / (re(T::one()) + a))
}

/// `(1 + aΛ)⁻¹ = 1 − aΛ/(1 + a trΛ)` for `Λ = ξ ⊗ 1ᵀ`.
pub fn sherman_morrison_inverse<T: Real>(a: C<T>, xi: &[C<T>]) -> Result<CMatrix<T>, StripError> {
    let trace: C<T> = xi.iter().copied().sum();
    let den = re(T::one()) + a * trace;
    if den.norm() <= T::epsilon() * (T::one() + (a * trace).norm()) {
        return Err(StripError::Singular);
    }
    let ones = vec![re(T::one()); xi.len()];
    let lambda = CMatrix::outer(xi, &ones);
    Ok(&CMatrix::identity(xi.len()) - &lambda.scale(a / den))
}

/// The collective single-strip response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripResponse<T> {
    pub tau: T,
    pub trace: C<T>,
    pub gamma: T,
}

impl<T: Real> StripResponse<T> {
    /// `ν0 = iγτ trΛ/4`.
    pub fn nu0(&self) -> C<T> {
        im_unit::<T>() * self.gamma * self.tau * self.trace * T::lit(0.25)
    }

    pub fn chi(&self, omega: T) -> C<T> {
        let nu = self.nu0();
        -nu / (Complex::new(omega, self.gamma * T::lit(0.5)) + nu)
    }

    /// Pole of `χ` at `−iγ/2 − ν0`.
    pub fn pole(&self) -> C<T> {
        Complex::new(T::zero(), -self.gamma * T::lit(0.5)) - self.nu0()
    }

    /// Full width of the collective line, `γ + 2 Im ν0`.
    pub fn width(&self) -> T {
        -T::lit(2.0) * self.pole().im
    }

    /// Collective Lamb shift, `−Re ν0`.
    pub fn shift(&self) -> T {
        self.pole().re
    }
}

/// Envelope change `1 − cos(w/λ)` across a strip of width `w` for a beat
/// wavelength `λ`.
pub fn envelope_variation<T: Real>(width: T, beat_length: T) -> T {
    T::one() - (width / beat_length).cos()
}

/// Strips of common width at increasing positions.
#[derive(Debug, Clone, PartialEq)]
pub struct StripArray<T> {
    positions: Vec<T>,
    width: T,
    tau: T,
    system: EffectiveSystem<T>,
}

impl<T: Real> StripArray<T> {
    /// `τ = width·ζ`.
    pub fn new(positions: Vec<T>, width: T, system: EffectiveSystem<T>) -> Result<Self, StripError> {
        if positions.is_empty() {
            return Err(StripError::Empty);
        }
        if !(width > T::zero()) {
            return Err(StripError::Width);
        }
        let tau = width * system.zeta();
        if !(tau > T::zero()) {
            return Err(StripError::Depth);
        }
        if let Some(i) = (1..positions.len()).find(|&i| !(positions[i] > positions[i - 1] + width)) {
            return Err(StripError::Overlap(i));
        }
        Ok(Self {
            positions,
            width,
            tau,
            system,
        })
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn system(&self) -> &EffectiveSystem<T> {
        &self.system
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn response(&self) -> StripResponse<T> {
        StripResponse {
            tau: self.tau,
            trace: self.system.trace_lambda(),
            gamma: self.system.gamma(),
        }
    }

    /// The strips at `indices` (in order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self, StripError> {
        let positions = indices
            .iter()
            .map(|&i| {
                self.positions.get(i).copied().ok_or(StripError::Layout {
                    line: 0,
                    message: format!("strip index {i} out of {}", self.len()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(positions, self.width, self.system.clone())
    }

    /// Number of strips at or before `x`.
    fn upstream(&self, x: T) -> usize {
        self.positions.iter().take_while(|&&p| p <= x).count()
    }

    /// `index,x` rows.
    pub fn layout_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["index", "x"]);
        for (i, x) in self.positions.iter().enumerate() {
            t.push_cells(&[i.to_string(), fmt17(*x)]);
        }
        t
    }
}

/// Reads positions from `index,x` rows.
pub fn parse_layout<T: Real>(text: &str) -> Result<Vec<T>, StripError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("index")) {
            continue;
        }
        let err = |message: String| StripError::Layout { line: n + 1, message };
        let mut cells = line.split(',');
        let idx: usize = cells
            .next()
            .ok_or_else(|| err("missing index".into()))?
            .trim()
            .parse()
            .map_err(|e| err(format!("index: {e}")))?;
        if idx != out.len() {
            return Err(err(format!("expected index {}, found {idx}", out.len())));
        }
        let x: f64 = cells
            .next()
            .ok_or_else(|| err("missing position".into()))?
            .trim()
            .parse()
            .map_err(|e| err(format!("position: {e}")))?;
        if cells.next().is_some() {
            return Err(err("trailing cells".into()));
        }
        out.push(T::lit(x));
    }
    Ok(out)
}

/// Free propagator `S(Δx) = diag(e^{iq_λΔx})`.
fn free_step<T: Real>(sys: &EffectiveSystem<T>, dx: T) -> Vec<C<T>> {
    let i = im_unit::<T>();
    sys.q().iter().map(|q| (i * *q * dx).exp()).collect()
}

fn scatter_factor<T: Real>(sys: &EffectiveSystem<T>, chi: C<T>) -> CMatrix<T> {
    let n = sys.len();
    let ones = vec![re(T::one()); n];
    let lt = CMatrix::outer(sys.xi(), &ones).scale(chi / sys.trace_lambda());
    &CMatrix::identity(n) + &lt
}

/// `W = (1+χΛ̃) S(x_N − x_{N−1}) ⋯ S(x_2 − x_1) (1+χΛ̃)`.
pub fn transfer_total<T: Real>(array: &StripArray<T>, omega: T) -> CMatrix<T> {
    transfer_upto(array, array.len(), array.response().chi(omega))
}

fn transfer_upto<T: Real>(array: &StripArray<T>, count: usize, chi: C<T>) -> CMatrix<T> {
    let sys = &array.system;
    let s = scatter_factor(sys, chi);
    let mut w = CMatrix::identity(sys.len());
    for k in 0..count {
        if k > 0 {
            let step = CMatrix::from_diagonal(&free_step(sys, array.positions[k] - array.positions[k - 1]));
            w = &step * &w;
        }
        w = &s * &w;
    }
    w
}

/// Total field `1ᵀ S(x − x_N) W S(x_1) β0` counting strips at or before `x`.
pub fn array_field<T: Real>(array: &StripArray<T>, x: T, omega: T) -> C<T> {
    let sys = &array.system;
    let count = array.upstream(x);
    if count == 0 {
        return sys.free_field(x);
    }
    let chi = array.response().chi(omega);
    let b0: Vec<C<T>> = free_step(sys, array.positions[0])
        .into_iter()
        .zip(sys.beta0())
        .map(|(s, b)| s * *b)
        .collect();
    let after = transfer_upto(array, count, chi).mul_vec(&b0);
    free_step(sys, x - array.positions[count - 1])
        .into_iter()
        .zip(after)
        .map(|(s, b)| s * b)
        .sum()
}

/// `T(x, ω) = B(x, ω)/B_in(0)` from the transfer product.
pub fn transfer_transmission<T: Real>(array: &StripArray<T>, x: T, omega: T) -> Result<C<T>, StripError> {
    let b0 = array.system.input_total();
    if b0.norm_sqr() == T::zero() {
        return Err(PropagateError::NoInput.into());
    }
    Ok(array_field(array, x, omega) / b0)
}

/// Geometric factors `V_0 ..= V_{m_max}` at `x`.
///
/// `P_m(i)` accumulates every ordered path of `m` sites ending on strip `i`,
/// so the subset sum costs `O(N² m_max)`.
pub fn geometric_orders<T: Real>(array: &StripArray<T>, x: T, m_max: usize) -> Result<Vec<C<T>>, StripError> {
    let n = array.len();
    if m_max > n {
        return Err(StripError::Order { m_max, n });
    }
    let sys = &array.system;
    let b0 = sys.input_total();
    if b0.norm_sqr() == T::zero() {
        return Err(PropagateError::NoInput.into());
    }
    let count = array.upstream(x);
    let xs = &array.positions[..count];
    let zero = Complex::new(T::zero(), T::zero());
    let mut v = Vec::with_capacity(m_max + 1);
    v.push(sys.free_field(x) / b0);
    let to_obs: Vec<C<T>> = xs.iter().map(|&xi| geometric_factor_u(sys, x - xi)).collect();
    let hop: Vec<Vec<C<T>>> = (0..count)
        .map(|i| (0..i).map(|j| geometric_factor_u(sys, xs[i] - xs[j])).collect())
        .collect();
    let mut p: Vec<C<T>> = xs.iter().map(|&xi| sys.free_field(xi) / b0).collect();
    for m in 1..=m_max {
        if m > 1 {
            let mut next = vec![zero; count];
            for i in 0..count {
                let mut s = zero;
                for j in 0..i {
                    s += hop[i][j] * p[j];
                }
                next[i] = s;
            }
            p = next;
        }
        v.push(p.iter().zip(&to_obs).map(|(a, b)| *a * *b).sum());
    }
    Ok(v)
}

/// `Σ_{m ≤ m_max} χ(ω)^m V_m(x)`.
pub fn scattering_series_t<T: Real>(array: &StripArray<T>, x: T, omega: T, m_max: usize) -> Result<C<T>, StripError> {
    let v = geometric_orders(array, x, m_max)?;
    Ok(sum_orders(&v, array.response().chi(omega)))
}

/// `Σ χ^m V_m`.
pub fn sum_orders<T: Real>(v: &[C<T>], chi: C<T>) -> C<T> {
    v.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, vm| acc * chi + *vm)
}

/// Scattered envelope `Σ_{m≥1} V_m (iν0)^m t^{m−1}/(m−1)! e^{−γt/2 + iν0t}`.
pub fn orders_time_response<T: Real>(v: &[C<T>], nu0: C<T>, gamma: T, t: T) -> C<T> {
    let zero = Complex::new(T::zero(), T::zero());
    if t < T::zero() {
        return zero;
    }
    let a = im_unit::<T>() * nu0;
    let mut c = a;
    let mut s = zero;
    for (m, vm) in v.iter().enumerate().skip(1) {
        s += *vm * c;
        c = c * a * t / T::from_usize_lossy(m);
    }
    s * (re(-gamma * T::lit(0.5) * t) + im_unit::<T>() * nu0 * t).exp()
}

/// Scattered envelope of an array at `x` and time `t`.
pub fn strip_time_response<T: Real>(array: &StripArray<T>, x: T, t: T) -> Result<C<T>, StripError> {
    let v = geometric_orders(array, x, array.len())?;
    let r = array.response();
    Ok(orders_time_response(&v, r.nu0(), r.gamma, t))
}

/// Laurent coefficients `h_l` of `Σ_{m≥1} χ^m V_m` in `1/(ω + iγ/2)`.
pub fn orders_tail<T: Real>(v: &[C<T>], nu0: C<T>, terms: usize) -> Vec<C<T>> {
    let mut out = Vec::with_capacity(terms);
    let mut nu_l = re(T::one());
    for l in 1..=terms {
        nu_l *= nu0;
        let mut s = Complex::new(T::zero(), T::zero());
        for (m, vm) in v.iter().enumerate().skip(1).take(l) {
            let sign = if m % 2 == 0 { T::one() } else { -T::one() };
            s += *vm * (sign * binomial_negative::<T>(m, l - m));
        }
        out.push(s * nu_l);
    }
    out
}

/// Laurent terms removed before inverting strip spectra.
pub const STRIP_TAIL_ORDER: usize = 8;

/// Numerical inversion of `Σ_{m≥1} χ^m V_m`.
pub fn fft_orders_response<T: Real + FftNum>(
    v: &[C<T>],
    response: &StripResponse<T>,
    grid: &OmegaGrid<T>,
) -> Result<TimeSeries<T>, StripError> {
    let tail = orders_tail(v, response.nu0(), STRIP_TAIL_ORDER);
    let scattered = |w: T| sum_orders(v, response.chi(w)) - v[0];
    Ok(invert_causal(grid, response.gamma, scattered, &tail)?)
}

/// `x_k = (πk − δφ)/δq`, `k = 0..n`.
pub fn constructive_positions<T: Real>(n: usize, two: &TwoModeParams<T>) -> Vec<T> {
    (0..n)
        .map(|k| (T::PI() * T::from_usize_lossy(k) - two.delta_phi) / two.delta_q)
        .collect()
}

/// `x_k = (πk/2 − δφ)/δq`, `k = 0..n`: half the constructive spacing from
/// the same anchor.
pub fn destructive_positions<T: Real>(n: usize, two: &TwoModeParams<T>) -> Vec<T> {
    (0..n)
        .map(|k| (T::FRAC_PI_2() * T::from_usize_lossy(k) - two.delta_phi) / two.delta_q)
        .collect()
}

/// Sub-ensemble transmissions of an ideal destructive grid, envelope removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityTransmissions<T> {
    pub even: C<T>,
    pub odd: C<T>,
    pub total: C<T>,
}

/// Even/odd sub-ensemble transmissions for `N` strips at `x_n = (n−1)π/(2δq)`
/// driven with mode amplitudes `β1, β2`.
pub fn parity_transmissions<T: Real>(
    n: usize,
    chi: C<T>,
    delta_q: T,
    x: T,
    beta1: C<T>,
    beta2: C<T>,
) -> Result<ParityTransmissions<T>, StripError> {
    if n == 0 {
        return Err(StripError::Count);
    }
    let one = re(T::one()) + chi;
    let n_even = n / 2;
    let n_odd = n - n_even;
    let even = re((delta_q * x).sin()) * one.powi(n_even as i32);
    let odd = re((delta_q * x).cos()) * one.powi(n_odd as i32);
    let total = odd + even * im_unit::<T>() * (beta1 - beta2) / (beta1 + beta2);
    Ok(ParityTransmissions { even, odd, total })
}

/// `R_n(t) = iν0 e^{−γt/2 + iν0t} L^{(1)}_{n−1}(−iν0t)`.
pub fn laguerre_response<T: Real>(n: usize, nu0: C<T>, gamma: T, t: T) -> Result<C<T>, StripError> {
    if n == 0 {
        return Err(StripError::Count);
    }
    if t < T::zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let i = im_unit::<T>();
    let phase = (re(-gamma * T::lit(0.5) * t) + i * nu0 * t).exp();
    Ok(i * nu0 * phase * generalized_laguerre(n - 1, -i * nu0 * t))
}

/// `V_m` of `n` perfectly constructive strips on one mode: `C(n, m)`.
pub fn constructive_orders<T: Real>(n: usize) -> Vec<C<T>> {
    (0..=n).map(|m| re(binomial::<T>(n, m))).collect()
}

/// Laguerre response of `n` strips against the solid-layer Bessel response
/// of the same total effective depth `τ_eff = nτ trΛ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselLimit<T> {
    pub t: Vec<T>,
    pub laguerre: Vec<C<T>>,
    pub bessel: Vec<C<T>>,
}

impl<T: Real> BesselLimit<T> {
    /// `max |a − b| / max |b|` over samples with `t <= t_max`.
    pub fn deviation_until(&self, t_max: T) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for ((t, a), b) in self.t.iter().zip(&self.laguerre).zip(&self.bessel) {
            if *t <= t_max {
                num = num.max((*a - *b).norm());
                den = den.max(b.norm());
            }
        }
        num / den
    }

    /// Latest time before which every sample agrees pointwise to `tol`
    /// relative error.
    pub fn agreement_window(&self, tol: T) -> T {
        let mut last = T::zero();
        for ((t, a), b) in self.t.iter().zip(&self.laguerre).zip(&self.bessel) {
            if (*a - *b).norm() > tol * b.norm() {
                break;
            }
            last = *t;
        }
        last
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["t", "re_laguerre", "im_laguerre", "re_bessel", "im_bessel"]);
        for ((tt, a), b) in self.t.iter().zip(&self.laguerre).zip(&self.bessel) {
            t.push(&[*tt, a.re, a.im, b.re, b.im]);
        }
        t
    }
}

pub fn bessel_limit_check<T: Real>(n_strips: usize, tau_eff: T, gamma: T, t: &[T]) -> Result<BesselLimit<T>, StripError> {
    if n_strips == 0 {
        return Err(StripError::Count);
    }
    let nu0 = im_unit::<T>() * gamma * tau_eff / T::from_usize_lossy(n_strips) * T::lit(0.25);
    let laguerre = t
        .iter()
        .map(|&tt| laguerre_response(n_strips, nu0, gamma, tt))
        .collect::<Result<Vec<_>, _>>()?;
    let bessel = t
        .iter()
        .map(|&tt| bessel_time_response(re(T::one()), tau_eff, T::one(), gamma, tt))
        .collect();
    Ok(BesselLimit {
        t: t.to_vec(),
        laguerre,
        bessel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuclear::NuclearSpecies;
    use crate::special::laguerre_explicit;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Z = Complex<f64>;

    fn fe() -> ResponseModel<f64> {
        ResponseModel::isotropic(NuclearSpecies::fe57())
    }

    fn rel(a: Z, b: Z) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn reference_pair(zeta: f64) -> EffectiveSystem<f64> {
        EffectiveSystem::new(
            vec![Z::new(-231248.75, 1372.06), Z::new(-535664.8, 4947.0)],
            vec![Z::new(0.0398787, 0.000384), Z::new(0.0400413, -0.000592)],
            zeta,
            fe(),
            vec![Z::new(5.49060, -0.00192), Z::new(-0.61388, 0.01648)],
        )
        .unwrap()
    }

    fn ideal(dq: f64, beta: (Z, Z), zeta: f64) -> EffectiveSystem<f64> {
        let qbar = Z::new(-3.8e5, 0.0);
        EffectiveSystem::new(
            vec![qbar + dq, qbar - dq],
            vec![Z::new(0.04, 0.0); 2],
            zeta,
            fe(),
            vec![beta.0, beta.1],
        )
        .unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng, modes: usize) -> EffectiveSystem<f64> {
        let q = (0..modes)
            .map(|k| Z::new(-2e5 - 1.3e5 * k as f64 + rng.gen_range(-2e4..2e4), rng.gen_range(1e3..5e3)))
            .collect();
        let xi = (0..modes)
            .map(|_| Z::new(rng.gen_range(0.01..0.05), rng.gen_range(-1e-3..1e-3)))
            .collect();
        let beta = (0..modes)
            .map(|_| Z::new(rng.gen_range(-3.0..3.0), rng.gen_range(-0.5..0.5)))
            .collect();
        EffectiveSystem::new(q, xi, rng.gen_range(1e5..2e7), fe(), beta).unwrap()
    }

    fn random_array(rng: &mut ChaCha8Rng, strips: usize, modes: usize) -> StripArray<f64> {
        let mut x = rng.gen_range(0.0..5e-6);
        let mut pos = Vec::new();
        for _ in 0..strips {
            pos.push(x);
            x += rng.gen_range(2e-6..15e-6);
        }
        StripArray::new(pos, 0.5e-6, random_system(rng, modes)).unwrap()
    }

    #[test]
    fn susceptibility_forms_agree() {
        let model = fe();
        let g = model.gamma();
        let r = StripResponse { tau: 8.0, trace: Z::new(0.08, -0.0002), gamma: g };
        for w in [-3.0, -0.4, 0.0, 0.7, 5.0] {
            let a = strip_susceptibility(r.tau, r.trace, &model, w * g).unwrap();
            assert!((a - r.chi(w * g)).norm() < 1e-12);
        }
        assert!(strip_susceptibility(8.0, Z::new(0.08, 0.0), &model, 1e30).unwrap().norm() < 1e-20);
        let c0 = strip_susceptibility(8.0, Z::new(0.08, 0.0), &model, 0.0).unwrap();
        let h = 8.0 * 0.08 / 2.0;
        assert!((c0 - Z::new(-h / (1.0 + h), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transmission_is_passive() {
        let r = StripResponse { tau: 12.0, trace: Z::new(0.08, 0.001), gamma: 1.0 };
        for k in -200..=200 {
            assert!((Z::new(1.0, 0.0) + r.chi(k as f64 * 0.05)).norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn broadening_matches_table_value() {
        // trΛ τ chosen so that ν0/γ = 6.4056e-4 + 0.20477i
        let nu = Z::new(6.4056e-4, 0.20477);
        let trace = Z::new(0.08, 0.0);
        let tau_c = nu / (Z::i() * trace * 0.25);
        let r = StripResponse { tau: tau_c.re, trace: trace * (tau_c / tau_c.re), gamma: 1.0 };
        assert!((r.nu0() - nu).norm() < 1e-15);
        assert!((r.width() - 1.0 - 2.0 * 0.20477).abs() < 1e-12);
        assert!((r.shift() + 6.4056e-4).abs() < 1e-15);
    }

    #[test]
    fn sherman_morrison_cases() {
        let xi = [Z::new(0.3, 0.1), Z::new(-0.2, 0.4), Z::new(0.5, 0.0)];
        assert_eq!(sherman_morrison_inverse(Z::new(0.0, 0.0), &xi).unwrap(), CMatrix::identity(3));
        let one = sherman_morrison_inverse(Z::new(0.4, 0.2), &xi[..1]).unwrap();
        assert!((one[(0, 0)] - Z::new(1.0, 0.0) / (Z::new(1.0, 0.0) + Z::new(0.4, 0.2) * xi[0])).norm() < 1e-15);
        let trace: Z = xi.iter().sum();
        assert!(matches!(sherman_morrison_inverse(-trace.inv(), &xi), Err(StripError::Singular)));
    }

    #[test]
    fn envelope_bound() {
        let v: f64 = envelope_variation(1e-6, 20e-6);
        assert!(v < 0.0015);
        assert!((v - 0.0012497).abs() < 1e-6);
    }

    #[test]
    fn array_validation() {
        let sys = reference_pair(1e7);
        assert!(matches!(StripArray::new(vec![], 1e-6, sys.clone()), Err(StripError::Empty)));
        assert!(matches!(StripArray::new(vec![0.0, 0.5e-6], 1e-6, sys.clone()), Err(StripError::Overlap(1))));
        assert!(matches!(StripArray::new(vec![0.0], 0.0, sys.clone()), Err(StripError::Width)));
        assert!(matches!(
            StripArray::new(vec![0.0], 1e-6, sys.with_zeta(0.0).unwrap()),
            Err(StripError::Depth)
        ));
        let a = StripArray::new(vec![0.0, 3e-6], 1e-6, sys).unwrap();
        assert!(matches!(geometric_orders(&a, 1e-5, 3), Err(StripError::Order { m_max: 3, n: 2 })));
    }

    #[test]
    fn single_strip_and_transparent_limits() {
        let sys = reference_pair(1e7);
        let a = StripArray::new(vec![4e-6], 1e-6, sys.clone()).unwrap();
        let w = 0.3 * sys.gamma();
        let chi = a.response().chi(w);
        let expected = scatter_factor(&sys, chi);
        assert!(transfer_total(&a, w).max_abs_diff(&expected) < 1e-15);
        let far = transfer_total(&a, 1e12 * sys.gamma());
        assert!(far.max_abs_diff(&CMatrix::identity(2)) < 1e-10);
    }

    #[test]
    fn two_strip_second_order_is_single_path() {
        let sys = reference_pair(1e7);
        let a = StripArray::new(vec![2e-6, 9e-6], 1e-6, sys.clone()).unwrap();
        let x = 30e-6;
        let v = geometric_orders(&a, x, 2).unwrap();
        let want = geometric_factor_u(&sys, x - 9e-6) * geometric_factor_u(&sys, 7e-6) * sys.free_field(2e-6)
            / sys.input_total();
        assert!(rel(v[2], want) < 1e-13);
        assert!(rel(v[0], sys.free_field(x) / sys.input_total()) < 1e-14);
        let t0 = scattering_series_t(&a, x, 0.0, 0).unwrap();
        assert!(rel(t0, sys.free_field(x) / sys.input_total()) < 1e-14);
    }

    #[test]
    fn series_matches_product_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let strips = 1 + trial % 8;
            let modes = 2 + trial % 2;
            let a = random_array(&mut rng, strips, modes);
            let g = a.system().gamma();
            let x = a.positions()[strips - 1] + rng.gen_range(0.0..20e-6);
            let w = rng.gen_range(-4.0..4.0) * g;
            let prod = transfer_transmission(&a, x, w).unwrap();
            let series = scattering_series_t(&a, x, w, strips).unwrap();
            assert!(rel(series, prod) < 1e-10, "{trial}: {series} {prod}");
        }
    }

    #[test]
    fn observation_inside_array_counts_upstream_strips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_array(&mut rng, 5, 2);
        let x = 0.5 * (a.positions()[2] + a.positions()[3]);
        let g = a.system().gamma();
        let full = transfer_transmission(&a, x, 0.2 * g).unwrap();
        let head = a.subset(&[0, 1, 2]).unwrap();
        assert!(rel(transfer_transmission(&head, x, 0.2 * g).unwrap(), full) < 1e-13);
        assert!(rel(scattering_series_t(&a, x, 0.2 * g, 5).unwrap(), full) < 1e-10);
    }

    #[test]
    fn placements() {
        let params = crate::modes::two_mode_parameters(
            Z::new(-1e5 + std::f64::consts::PI / 20.65e-6, 0.0),
            Z::new(-1e5, 0.0),
            Z::new(0.04, 0.0),
            Z::new(0.04, 0.0),
        )
        .unwrap();
        // 2δq = π/20.65 μm here, so the beat length is 2 × 20.65 μm
        let c = constructive_positions(4, &params);
        assert!((c[1] - c[0] - 2.0 * 20.65e-6).abs() < 1e-15);
        let d = destructive_positions(4, &params);
        assert!((2.0 * (d[1] - d[0]) - (c[1] - c[0])).abs() < 1e-18);
        let sys = EffectiveSystem::new(
            vec![Z::new(-1e5 + std::f64::consts::PI / 20.65e-6, 0.0), Z::new(-1e5, 0.0)],
            vec![Z::new(0.04, 0.0); 2],
            1e7,
            fe(),
            vec![Z::new(1.0, 0.0); 2],
        )
        .unwrap();
        assert!((geometric_factor_u(&sys, c[1] - c[0]).norm() - 1.0).abs() < 1e-12);
        assert!(geometric_factor_u(&sys, d[1] - d[0]).norm() < 1e-12);
        assert!((geometric_factor_u(&sys, d[2] - d[0]).norm() - 1.0).abs() < 1e-12);
        let shifted = crate::modes::two_mode_parameters(
            Z::new(-1e5 + 2e5, 0.0),
            Z::new(-1e5, 0.0),
            Z::new(0.04, 0.004),
            Z::new(0.04, -0.004),
        )
        .unwrap();
        let one = constructive_positions(1, &shifted);
        assert_eq!(one.len(), 1);
        assert!((one[0] + shifted.delta_phi / shifted.delta_q).abs() < 1e-20);
    }

    #[test]
    fn parity_formulas_match_array() {
        let dq = 1.5e5;
        let betas = (Z::new(1.3, 0.1), Z::new(0.4, -0.2));
        let sys = ideal(dq, betas, 1e7);
        let qbar = Z::new(-3.8e5, 0.0);
        for n in [1usize, 2, 3, 4, 7, 8] {
            let pos: Vec<f64> = (0..n).map(|k| k as f64 * std::f64::consts::PI / (2.0 * dq)).collect();
            let a = StripArray::new(pos.clone(), 0.6e-6, sys.clone()).unwrap();
            let w = 0.3 * sys.gamma();
            let chi = a.response().chi(w);
            for frac in [0.0, 0.13, 0.25, 0.61] {
                let x = pos[n - 1] + frac * std::f64::consts::PI / dq;
                let p = parity_transmissions(n, chi, dq, x, betas.0, betas.1).unwrap();
                let want = transfer_transmission(&a, x, w).unwrap();
                let got = p.total * (Z::i() * qbar * x).exp();
                assert!(rel(got, want) < 1e-12, "{n} {frac}: {got} {want}");
            }
        }
    }

    #[test]
    fn symmetric_drive_hides_even_sites() {
        let chi = Z::new(-0.3, 0.2);
        let b = Z::new(0.7, 0.0);
        let p = parity_transmissions(6, chi, 1.0, 0.4, b, b).unwrap();
        assert_eq!(p.total, p.odd);
        let node = parity_transmissions(2, chi, 1.0, std::f64::consts::PI, b, b).unwrap();
        assert!((node.odd + Z::new(1.0, 0.0) + chi).norm() < 1e-15);
        assert!(parity_transmissions(0, chi, 1.0, 0.0, b, b).is_err());
    }

    #[test]
    fn laguerre_limits() {
        let nu = Z::new(0.01, 0.2);
        let g = 1.0;
        let t = 1.7;
        let r1 = laguerre_response(1, nu, g, t).unwrap();
        assert!(rel(r1, Z::i() * nu * (Z::new(-0.5 * t, 0.0) + Z::i() * nu * t).exp()) < 1e-14);
        assert!(rel(laguerre_response(2, nu, g, 0.0).unwrap(), 2.0 * Z::i() * nu) < 1e-15);
        assert_eq!(laguerre_response(4, nu, g, -1.0).unwrap(), Z::new(0.0, 0.0));
        let z = Z::new(0.8, -1.3);
        assert!(rel(generalized_laguerre(5, z), laguerre_explicit(5, z)) < 1e-12);
    }

    #[test]
    fn constructive_orders_reproduce_laguerre() {
        let nu = Z::new(0.002, 0.35);
        for n in [1usize, 3, 9, 20] {
            let v = constructive_orders::<f64>(n);
            for k in 0..30 {
                let t = k as f64 * 0.3;
                let a = orders_time_response(&v, nu, 1.0, t);
                let b = laguerre_response(n, nu, 1.0, t).unwrap();
                assert!((a - b).norm() < 1e-11 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn laguerre_matches_fft() {
        let g = 1.0;
        let nu = Z::new(6.4056e-4, 0.20477);
        let r = StripResponse { tau: 1.0, trace: nu / (Z::i() * 0.25), gamma: g };
        let grid = OmegaGrid::default_for(g);
        for n in [1usize, 5, 13] {
            let ts = fft_orders_response(&constructive_orders(n), &r, &grid).unwrap().truncated(5.0 / g);
            let want: Vec<Z> = ts.t.iter().map(|&t| laguerre_response(n, nu, g, t).unwrap()).collect();
            let num: f64 = ts.values.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum();
            let den: f64 = want.iter().map(|b| b.norm_sqr()).sum();
            assert!((num / den).sqrt() < 1e-6, "{n}");
        }
    }

    #[test]
    fn bessel_limit_behaviour() {
        let g = 1.0;
        let t: Vec<f64> = (0..=400).map(|k| k as f64 * 0.025).collect();
        let tiny = bessel_limit_check(1, 1e-4, g, &t).unwrap();
        assert!(tiny.deviation_until(10.0) < 1e-3);
        let five = bessel_limit_check(5, 20.0, g, &t).unwrap();
        let thirty = bessel_limit_check(30, 20.0, g, &t).unwrap();
        let d: Vec<f64> = [5usize, 10, 20, 40, 80, 160].iter().map(|&n| bessel_limit_check(n, 20.0, g, &t).unwrap().deviation_until(3.0)).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert!(thirty.agreement_window(0.05) > five.agreement_window(0.05));
        assert!(five.to_csv().to_text().lines().count() == 402);
    }

    #[test]
    fn layout_roundtrip() {
        let sys = reference_pair(1e7);
        let a = StripArray::new(vec![0.0, 2.5e-6, 7.125e-6], 1e-6, sys).unwrap();
        let text = a.layout_csv().to_text();
        assert_eq!(parse_layout::<f64>(&text).unwrap(), a.positions());
        assert!(matches!(parse_layout::<f64>("index,x\n1,0.0\n"), Err(StripError::Layout { line: 2, .. })));
        assert!(parse_layout::<f64>("index,x\n0,abc\n").is_err());
    }

    #[test]
    fn destructive_grid_decouples() {
        let dq = 1.5e5;
        let sys = ideal(dq, (Z::new(1.0, 0.0), Z::new(1.0, 0.0)), 1e7);
        let n = 8;
        let pos: Vec<f64> = (0..n).map(|k| k as f64 * std::f64::consts::PI / (2.0 * dq)).collect();
        let all = StripArray::new(pos.clone(), 0.6e-6, sys.clone()).unwrap();
        let odd_sites: Vec<usize> = (0..n).step_by(2).collect();
        let odd = all.subset(&odd_sites).unwrap();
        let x = pos[n - 1] + 0.3e-6;
        for w in [-1.0, 0.0, 0.5] {
            let w = w * sys.gamma();
            let a = transfer_transmission(&all, x, w).unwrap();
            let b = transfer_transmission(&odd, x, w).unwrap();
            assert!((a - b).norm() < 1e-12 * b.norm().max(1e-3));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sherman_morrison_inverts(
            ar in -2.0f64..2.0, ai in -2.0f64..2.0,
            x in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
        ) {
            let a = Z::new(ar, ai);
            let xi: Vec<Z> = x.iter().map(|&(r, i)| Z::new(r, i)).collect();
            let trace: Z = xi.iter().sum();
            prop_assume!((Z::new(1.0, 0.0) + a * trace).norm() > 1e-3);
            let inv = sherman_morrison_inverse(a, &xi).unwrap();
            let ones = vec![Z::new(1.0, 0.0); 3];
            let m = &CMatrix::identity(3) + &CMatrix::outer(&xi, &ones).scale(a);
            let scale = 1.0 + inv.norm1();
            prop_assert!((&m * &inv).max_abs_diff(&CMatrix::identity(3)) < 1e-12 * scale);
            prop_assert!(inv.max_abs_diff(&m.inverse().unwrap()) < 1e-12 * scale);
        }

        #[test]
        fn duality_random(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let strips = rng.gen_range(1..=8);
            let modes = rng.gen_range(2..=3);
            let a = random_array(&mut rng, strips, modes);
            let g = a.system().gamma();
            let x = a.positions()[strips - 1] + rng.gen_range(0.0..10e-6);
            let w = rng.gen_range(-3.0..3.0) * g;
            let prod = transfer_transmission(&a, x, w).unwrap();
            let series = scattering_series_t(&a, x, w, strips).unwrap();
            prop_assert!(rel(series, prod) < 1e-10);
        }
    }
}
