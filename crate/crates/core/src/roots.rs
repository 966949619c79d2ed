//! Zeros of analytic functions inside rectangles: argument-principle
//! counting, bisection into single-zero cells, and Newton polishing.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{Real, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("function vanishes on the contour near {re} + {im}i")]
    ZeroOnContour { re: f64, im: f64 },
    #[error("argument principle counted {counted} zeros but polishing found {polished}")]
    CountMismatch { counted: usize, polished: usize },
    #[error("negative winding number {0}: function has poles in the rectangle")]
    NegativeWinding(i64),
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub re_min: T,
    pub re_max: T,
    pub im_min: T,
    pub im_max: T,
}

impl<T: Real> Rect<T> {
    pub fn new(re_min: T, re_max: T, im_min: T, im_max: T) -> Self {
        Self {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn contains(&self, z: C<T>) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn center(&self) -> C<T> {
        Complex::new(
            (self.re_min + self.re_max) * T::lit(0.5),
            (self.im_min + self.im_max) * T::lit(0.5),
        )
    }

    pub fn width(&self) -> T {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> T {
        self.im_max - self.im_min
    }

    fn corners(&self) -> [C<T>; 4] {
        [
            Complex::new(self.re_min, self.im_min),
            Complex::new(self.re_max, self.im_min),
            Complex::new(self.re_max, self.im_max),
            Complex::new(self.re_min, self.im_max),
        ]
    }

    fn split(&self) -> (Self, Self) {
        self.split_at(T::lit(0.5))
    }

    /// Cuts the longer side at fraction `t`.
    fn split_at(&self, t: T) -> (Self, Self) {
        if self.width() >= self.height() {
            let mid = self.re_min + self.width() * t;
            (
                Self::new(self.re_min, mid, self.im_min, self.im_max),
                Self::new(mid, self.re_max, self.im_min, self.im_max),
            )
        } else {
            let mid = self.im_min + self.height() * t;
            (
                Self::new(self.re_min, self.re_max, self.im_min, mid),
                Self::new(self.re_min, self.re_max, mid, self.im_max),
            )
        }
    }
}

/// Controls for [`find_zeros`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions<T> {
    /// Convergence target for the caller-supplied residual.
    pub tol: T,
    /// Initial samples per rectangle edge.
    pub edge_samples: usize,
    /// Maximum bisection depth.
    pub max_depth: usize,
}

impl<T: Real> Default for RootOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            edge_samples: 32,
            max_depth: 48,
        }
    }
}

fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::TAU();
    let mut x = a % tau;
    if x > T::PI() {
        x -= tau;
    } else if x <= -T::PI() {
        x += tau;
    }
    x
}

/// Phase change of `f` along the segment `a -> b`, refined until every step
/// turns by less than an eighth of a revolution.
fn segment_phase<T: Real, F: Fn(C<T>) -> C<T>>(f: &F, a: C<T>, b: C<T>, n: usize) -> Result<T, RootError> {
    let mut total = T::zero();
    let nf = T::from_usize_lossy(n);
    let mut fa = f(a);
    let mut za = a;
    for k in 1..=n {
        let zb = a + (b - a) * (T::from_usize_lossy(k) / nf);
        let fb = f(zb);
        total += refine(f, za, zb, fa, fb, 0)?;
        za = zb;
        fa = fb;
    }
    Ok(total)
}

fn refine<T: Real, F: Fn(C<T>) -> C<T>>(
    f: &F,
    za: C<T>,
    zb: C<T>,
    fa: C<T>,
    fb: C<T>,
    depth: usize,
) -> Result<T, RootError> {
    if fa.norm() == T::zero() || !fa.norm().is_finite() {
        return Err(RootError::ZeroOnContour {
            re: za.re.to_f64().unwrap_or(f64::NAN),
            im: za.im.to_f64().unwrap_or(f64::NAN),
        });
    }
    let d = wrap_angle(fb.arg() - fa.arg());
    if d.abs() < T::FRAC_PI_4() {
        return Ok(d);
    }
    if depth > 40 {
        return Err(RootError::ZeroOnContour {
            re: za.re.to_f64().unwrap_or(f64::NAN),
            im: za.im.to_f64().unwrap_or(f64::NAN),
        });
    }
    let zm = (za + zb) * T::lit(0.5);
    let fm = f(zm);
    Ok(refine(f, za, zm, fa, fm, depth + 1)? + refine(f, zm, zb, fm, fb, depth + 1)?)
}

/// Number of zeros of `f` inside `rect` (winding number of `f` on its boundary).
pub fn count_zeros<T: Real, F: Fn(C<T>) -> C<T>>(f: &F, rect: &Rect<T>, edge_samples: usize) -> Result<usize, RootError> {
    let c = rect.corners();
    let mut total = T::zero();
    for k in 0..4 {
        total += segment_phase(f, c[k], c[(k + 1) % 4], edge_samples)?;
    }
    let w = (total / T::TAU()).round().to_i64().unwrap_or(0);
    if w < 0 {
        return Err(RootError::NegativeWinding(w));
    }
    Ok(w as usize)
}

/// Newton iteration with a central-difference derivative.
///
/// `residual` is the scaled convergence measure; iteration stops once it
/// drops below `tol` or the step stalls.
pub fn newton<T: Real, F: Fn(C<T>) -> C<T>, R: Fn(C<T>) -> T>(
    f: &F,
    residual: &R,
    z0: C<T>,
    scale: T,
    tol: T,
) -> Option<C<T>> {
    let mut z = z0;
    let h0 = scale * T::lit(1e-7);
    for _ in 0..80 {
        let fz = f(z);
        if residual(z) < tol * T::lit(1e-3) {
            return Some(z);
        }
        let h = Complex::new(h0, T::zero());
        let dfz = (f(z + h) - f(z - h)) / (h * T::lit(2.0));
        if dfz.norm() == T::zero() || !dfz.norm().is_finite() {
            return None;
        }
        let step = fz / dfz;
        z -= step;
        if !z.norm().is_finite() {
            return None;
        }
        if step.norm() <= scale * T::epsilon() * T::lit(4.0) {
            break;
        }
    }
    if residual(z) < tol {
        Some(z)
    } else {
        None
    }
}

/// All simple zeros of `f` in `rect`, each polished until `residual < tol`.
///
/// Returns an error if the polished roots do not account for every zero the
/// argument principle counted.
pub fn find_zeros<T: Real, F: Fn(C<T>) -> C<T>, R: Fn(C<T>) -> T>(
    f: &F,
    residual: &R,
    rect: &Rect<T>,
    opts: &RootOptions<T>,
) -> Result<Vec<C<T>>, RootError> {
    let counted = count_zeros(f, rect, opts.edge_samples)?;
    let scale = rect.width().max(rect.height());
    let mut roots = Vec::new();
    if counted > 0 {
        search(f, residual, rect, counted, scale, opts, 0, &mut roots)?;
    }
    // cells share edges, so a root on a cut line may be reported twice
    let mut unique: Vec<C<T>> = Vec::new();
    for r in roots {
        if !unique.iter().any(|u| (*u - r).norm() < scale * opts.tol * T::lit(10.0)) {
            unique.push(r);
        }
    }
    if unique.len() != counted {
        return Err(RootError::CountMismatch {
            counted,
            polished: unique.len(),
        });
    }
    Ok(unique)
}

#[allow(clippy::too_many_arguments)]
fn search<T: Real, F: Fn(C<T>) -> C<T>, R: Fn(C<T>) -> T>(
    f: &F,
    residual: &R,
    rect: &Rect<T>,
    count: usize,
    scale: T,
    opts: &RootOptions<T>,
    depth: usize,
    out: &mut Vec<C<T>>,
) -> Result<(), RootError> {
    if count == 1 {
        if let Some(z) = newton(f, residual, rect.center(), scale, opts.tol) {
            let pad = rect.width().max(rect.height()) * T::lit(1e-6);
            let grown = Rect::new(rect.re_min - pad, rect.re_max + pad, rect.im_min - pad, rect.im_max + pad);
            if grown.contains(z) {
                out.push(z);
                return Ok(());
            }
        }
    }
    if depth >= opts.max_depth {
        return Ok(());
    }
    let (a, b) = rect.split();
    let (a, b, na) = match count_zeros(f, &a, opts.edge_samples) {
        Ok(n) => (a, b, n),
        Err(RootError::ZeroOnContour { .. }) => {
            // a zero sits on the cut line: move the cut off-centre
            let (a, b) = rect.split_at(T::lit(3.0 / 7.0));
            let n = count_zeros(f, &a, opts.edge_samples)?;
            (a, b, n)
        }
        Err(e) => return Err(e),
    };
    let nb = count.saturating_sub(na);
    if na > 0 {
        search(f, residual, &a, na, scale, opts, depth + 1, out)?;
    }
    if nb > 0 {
        search(f, residual, &b, nb, scale, opts, depth + 1, out)?;
    }
    Ok(())
}
