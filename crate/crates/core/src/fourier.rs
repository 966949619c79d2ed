//! Frequency-to-time inversion of causal Lorentzian-type spectra.
//!
//! Spectra here decay like `1/ω`, so a bare FFT would converge slowly and
//! ring at `t = 0`. The leading Laurent terms `h_l / w^l` with
//! `w = ω + iγ/2` are subtracted before the transform and their exact
//! transforms `h_l (-i)^l t^{l-1}/(l-1)! e^{-γt/2}` added back afterwards.
//!
//! Convention: `f(t) = ∫ dω/2π e^{-iωt} G(ω)`.

use num_complex::Complex;
use rustfft::{FftNum, FftPlanner};
use thiserror::Error;

use crate::output::CsvTable;
use crate::scalar::{im_unit, Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error("frequency spacing {spacing:e} exceeds γ/10 = {limit:e}")]
    TooCoarse { spacing: f64, limit: f64 },
    #[error("frequency grid needs a positive span and spacing")]
    BadGrid,
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
}

/// Symmetric uniform frequency grid `ω_k = (k - N/2) Δω`, `k = 0..N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaGrid<T> {
    pub half_span: T,
    pub spacing: T,
}

impl<T: Real> OmegaGrid<T> {
    /// Span `400γ`, spacing `γ/50`.
    pub fn default_for(gamma: T) -> Self {
        Self {
            half_span: gamma * T::lit(200.0),
            spacing: gamma / T::lit(50.0),
        }
    }

    /// Checks the grid against the linewidth.
    pub fn validate(&self, gamma: T) -> Result<(), FourierError> {
        if !(self.half_span > T::zero() && self.spacing > T::zero() && self.half_span > self.spacing) {
            return Err(FourierError::BadGrid);
        }
        let limit = gamma / T::lit(10.0);
        if self.spacing > limit {
            return Err(FourierError::TooCoarse {
                spacing: self.spacing.to_f64().unwrap_or(f64::NAN),
                limit: limit.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        let n = (T::lit(2.0) * self.half_span / self.spacing).round().to_usize().unwrap_or(0);
        n + n % 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<T> {
        let n = self.len();
        let h = T::from_usize_lossy(n / 2);
        (0..n).map(|k| (T::from_usize_lossy(k) - h) * self.spacing).collect()
    }

    /// Time step `2π/(N Δω)` of the inverted series.
    pub fn time_step(&self) -> T {
        T::TAU() / (T::from_usize_lossy(self.len()) * self.spacing)
    }
}

/// Complex samples on a uniform time grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub t: Vec<T>,
    pub values: Vec<C<T>>,
}

impl<T: Real> TimeSeries<T> {
    /// Keeps samples with `t <= t_max`.
    pub fn truncated(&self, t_max: T) -> Self {
        let n = self.t.iter().take_while(|&&t| t <= t_max).count();
        Self {
            t: self.t[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }

    /// `t, re, im, abs2`.
    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(&["t", "re", "im", "abs2"]);
        for (t, v) in self.t.iter().zip(&self.values) {
            table.push(&[*t, v.re, v.im, v.norm_sqr()]);
        }
        table
    }
}

/// Rectangle-rule inverse transform of samples on `grid`.
pub fn invert_spectrum<T: Real + FftNum>(grid: &OmegaGrid<T>, samples: &[C<T>]) -> Result<TimeSeries<T>, FourierError> {
    let n = grid.len();
    if samples.len() != n {
        return Err(FourierError::SampleCount {
            expected: n,
            got: samples.len(),
        });
    }
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dt = grid.time_step();
    let w0 = -grid.spacing * T::from_usize_lossy(n / 2);
    let norm = grid.spacing / T::TAU();
    let mut t = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (j, b) in buf.into_iter().enumerate() {
        let tj = dt * T::from_usize_lossy(j);
        // e^{-iω_k t_j} = e^{-i ω_0 t_j} e^{-2πi kj/N}
        let phase = Complex::from_polar(norm, -w0 * tj);
        t.push(tj);
        values.push(b * phase);
    }
    Ok(TimeSeries { t, values })
}

/// `Σ_l h_l / w^l`, `l = 1..`, with `w = ω + iγ/2`.
pub fn laurent_tail<T: Real>(tail: &[C<T>], gamma: T, omega: T) -> C<T> {
    let winv = Complex::new(omega, gamma * T::lit(0.5)).inv();
    let mut p = winv;
    let mut s = Complex::new(T::zero(), T::zero());
    for h in tail {
        s += *h * p;
        p *= winv;
    }
    s
}

/// Exact transform of [`laurent_tail`] at `t >= 0`.
pub fn laurent_tail_time<T: Real>(tail: &[C<T>], gamma: T, t: T) -> C<T> {
    if t < T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let mi = -im_unit::<T>();
    let mut coef = mi; // (-i)^l t^{l-1}/(l-1)!
    let mut s = Complex::new(T::zero(), T::zero());
    for (l, h) in tail.iter().enumerate() {
        s += *h * coef;
        coef = coef * mi * t / T::from_usize_lossy(l + 1);
    }
    s * (-gamma * T::lit(0.5) * t).exp()
}

/// Inverts a causal spectrum whose large-`ω` behaviour is `Σ h_l / w^l`.
pub fn invert_causal<T: Real + FftNum, F: Fn(T) -> C<T>>(
    grid: &OmegaGrid<T>,
    gamma: T,
    spectrum: F,
    tail: &[C<T>],
) -> Result<TimeSeries<T>, FourierError> {
    grid.validate(gamma)?;
    let samples: Vec<C<T>> = grid
        .points()
        .into_iter()
        .map(|w| spectrum(w) - laurent_tail(tail, gamma, w))
        .collect();
    let mut ts = invert_spectrum(grid, &samples)?;
    for (t, v) in ts.t.iter().zip(ts.values.iter_mut()) {
        *v += laurent_tail_time(tail, gamma, *t);
    }
    Ok(ts)
}
