//! TE guided modes of planar layered waveguides.
//!
//! The transverse profile solves `u'' + (k0² n(z)² - q²) u = 0` with decaying
//! tails in both claddings. The depth coordinate `z` starts at the interface
//! between the top cladding and the first layer and grows into the stack.
//!
//! Wavenumbers are handled relative to the vacuum wavenumber, `q_rel = q - k0`.
//! Guided x-ray modes sit within ~1e-5 of `k0`, and working with the offset
//! and with the index contrast `n - 1` keeps the transverse wavenumbers
//! accurate: `k0² n² - q² = (k0 c - q_rel)(2 k0 + k0 c + q_rel)` with `c = n - 1`.

use num_complex::Complex;
use thiserror::Error;

use crate::materials::{bundled, index_at, MaterialError, RefractiveIndex};
use crate::nuclear::wavenumber_from_energy_ev;
use crate::output::CsvTable;
use crate::roots::{find_zeros, Rect, RootError, RootOptions};
use crate::scalar::{exprel, im_unit, re, sqrt_im_pos, sqrt_re_pos, Real, C};

#[derive(Debug, Error)]
pub enum ModeError {
    #[error("invalid stack: {0}")]
    Stack(String),
    #[error("stack has no resonant layer marked")]
    NoResonantLayer,
    #[error("wavenumber is not a mode: scaled determinant {residual:e} exceeds {tol:e}")]
    NotARoot { residual: f64, tol: f64 },
    #[error("transverse wavenumber vanishes in layer {0}; profile undefined")]
    DegenerateLayer(usize),
    #[error("mode has vanishing self-overlap and cannot be normalized")]
    Degenerate,
    #[error("degenerate mode pair: q1 = q2")]
    IdenticalPair,
    #[error("root search: {0}")]
    Roots(#[from] RootError),
    #[error("materials: {0}")]
    Material(#[from] MaterialError),
}

/// One homogeneous layer of finite thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer<T> {
    pub thickness: T,
    pub index: RefractiveIndex<T>,
}

/// Semi-infinite claddings around an ordered sequence of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack<T> {
    top: RefractiveIndex<T>,
    layers: Vec<Layer<T>>,
    bottom: RefractiveIndex<T>,
    k0: T,
    resonant: Option<usize>,
}

impl<T: Real> LayerStack<T> {
    pub fn new(
        top: RefractiveIndex<T>,
        layers: Vec<Layer<T>>,
        bottom: RefractiveIndex<T>,
        k0: T,
    ) -> Result<Self, ModeError> {
        if !(k0 > T::zero() && k0.is_finite()) {
            return Err(ModeError::Stack("k0 must be positive".into()));
        }
        let passive = |n: &RefractiveIndex<T>| (n.value() * n.value()).im >= T::zero();
        if !passive(&top) || !passive(&bottom) {
            return Err(ModeError::Stack("cladding is not passive".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if !(l.thickness > T::zero() && l.thickness.is_finite()) {
                return Err(ModeError::Stack(format!("layer {i} has non-positive thickness")));
            }
            if !passive(&l.index) {
                return Err(ModeError::Stack(format!("layer {i} is not passive")));
            }
        }
        Ok(Self {
            top,
            layers,
            bottom,
            k0,
            resonant: None,
        })
    }

    /// Marks layer `index` as the one holding resonant nuclei.
    pub fn with_resonant_layer(mut self, index: usize) -> Result<Self, ModeError> {
        if index >= self.layers.len() {
            return Err(ModeError::Stack(format!("resonant layer {index} does not exist")));
        }
        self.resonant = Some(index);
        Ok(self)
    }

    pub fn top(&self) -> RefractiveIndex<T> {
        self.top
    }

    pub fn bottom(&self) -> RefractiveIndex<T> {
        self.bottom
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn k0(&self) -> T {
        self.k0
    }

    pub fn resonant_layer(&self) -> Option<usize> {
        self.resonant
    }

    /// Depth of the top face of layer `i` (`i == len` gives the bottom face).
    pub fn interface_depth(&self, i: usize) -> T {
        self.layers[..i].iter().fold(T::zero(), |acc, l| acc + l.thickness)
    }

    pub fn total_thickness(&self) -> T {
        self.interface_depth(self.layers.len())
    }

    /// Centre depth `z0` and thickness `L` of the resonant layer.
    pub fn resonant_geometry(&self) -> Result<(T, T), ModeError> {
        let i = self.resonant.ok_or(ModeError::NoResonantLayer)?;
        let d = self.layers[i].thickness;
        Ok((self.interface_depth(i) + d * T::lit(0.5), d))
    }

    /// Depth used to fix the sign of mode profiles.
    pub fn reference_depth(&self) -> T {
        match self.resonant_geometry() {
            Ok((z0, _)) => z0,
            Err(_) => self.total_thickness() * T::lit(0.5),
        }
    }

    /// `k0² n² - q²` for a layer of contrast `c`.
    fn transverse_sq(&self, c: C<T>, q_rel: C<T>) -> C<T> {
        let kc = c * self.k0;
        (kc - q_rel) * (kc + q_rel + self.k0 * T::lit(2.0))
    }

    /// Decay constant in a cladding; `Re >= 0` on the guided sheet.
    fn cladding_decay(&self, n: RefractiveIndex<T>, q_rel: C<T>, sheet: Sheet) -> C<T> {
        let g = sqrt_re_pos(-self.transverse_sq(n.contrast(), q_rel));
        match sheet {
            Sheet::Guided => g,
            Sheet::Leaky => -g,
        }
    }
}

/// Mo / B₄C 15.8 nm / ⁵⁷Fe 1 nm / B₄C 15.8 nm / Mo cavity at 14.4 keV, built
/// from the bundled optical constants, with the iron layer marked resonant.
pub fn reference_cavity<T: Real>() -> Result<LayerStack<T>, ModeError> {
    let e = T::lit(14_400.0);
    let mo = index_at(&bundled::<T>("Mo")?, e)?;
    let b4c = index_at(&bundled::<T>("B4C")?, e)?;
    let fe = index_at(&bundled::<T>("Fe")?, e)?;
    let nm = T::lit(1e-9);
    let layers = vec![
        Layer { thickness: T::lit(15.8) * nm, index: b4c },
        Layer { thickness: nm, index: fe },
        Layer { thickness: T::lit(15.8) * nm, index: b4c },
    ];
    LayerStack::new(mo, layers, mo, wavenumber_from_energy_ev(e))?.with_resonant_layer(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sheet {
    Guided,
    Leaky,
}

/// Tolerances for the mode search.
#[derive(Debug, Clone, Copy)]
pub struct ModeSolverOptions<T> {
    /// Bound on the determinant scaled by `|u'| + |γ u|` at the bottom face.
    pub tol_root: T,
    /// Initial samples per edge for the argument principle.
    pub edge_samples: usize,
}

impl<T: Real> Default for ModeSolverOptions<T> {
    fn default() -> Self {
        Self {
            tol_root: T::lit(1e-10),
            edge_samples: 48,
        }
    }
}

struct Shot<T> {
    u: C<T>,
    du: C<T>,
    gamma_bottom: C<T>,
}

fn shoot<T: Real>(stack: &LayerStack<T>, q_rel: C<T>, sheet: Sheet) -> Shot<T> {
    let mut u = re(T::one());
    let mut du = stack.cladding_decay(stack.top, q_rel, sheet);
    for l in &stack.layers {
        let p2 = stack.transverse_sq(l.index.contrast(), q_rel);
        let p = p2.sqrt();
        let pd = p * l.thickness;
        let (c, s) = (pd.cos(), pd.sin());
        // sin(pd)/p evaluated without dividing by a vanishing p
        let sinc = if pd.norm() < T::lit(1e-4) {
            (re(T::one()) - pd * pd / T::lit(6.0)) * l.thickness
        } else {
            s / p
        };
        let nu = u * c + du * sinc;
        let ndu = -u * p * s + du * c;
        u = nu;
        du = ndu;
    }
    Shot {
        u,
        du,
        gamma_bottom: stack.cladding_decay(stack.bottom, q_rel, sheet),
    }
}

fn determinant_on<T: Real>(stack: &LayerStack<T>, q_rel: C<T>, sheet: Sheet) -> C<T> {
    let s = shoot(stack, q_rel, sheet);
    s.du + s.gamma_bottom * s.u
}

fn scaled_residual<T: Real>(stack: &LayerStack<T>, q_rel: C<T>, sheet: Sheet) -> T {
    let s = shoot(stack, q_rel, sheet);
    let d = s.du + s.gamma_bottom * s.u;
    let scale = s.du.norm() + (s.gamma_bottom * s.u).norm();
    if scale == T::zero() {
        T::infinity()
    } else {
        d.norm() / scale
    }
}

/// Outgoing-wave boundary determinant; zero exactly at guided modes.
///
/// Starts from `u = 1`, `u' = γ_top` at the top face, transfers `(u, u')`
/// across the layers and returns `u' + γ_bottom u` at the bottom face.
pub fn dispersion_determinant<T: Real>(stack: &LayerStack<T>, q_rel: C<T>) -> C<T> {
    determinant_on(stack, q_rel, Sheet::Guided)
}

/// `|D|` divided by the size of its two terms; compared against `tol_root`.
pub fn determinant_residual<T: Real>(stack: &LayerStack<T>, q_rel: C<T>) -> T {
    scaled_residual(stack, q_rel, Sheet::Guided)
}

/// Rectangle in `q_rel` between the cladding and core light lines.
pub fn guided_search_window<T: Real>(stack: &LayerStack<T>) -> Option<Rect<T>> {
    let k0 = stack.k0;
    let lo = k0 * stack.top.contrast().re.max(stack.bottom.contrast().re);
    let hi = stack
        .layers
        .iter()
        .map(|l| l.index.contrast().re * k0)
        .fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return None;
    }
    let span = hi - lo;
    let max_im = stack
        .layers
        .iter()
        .map(|l| l.index.beta())
        .chain([stack.top.beta(), stack.bottom.beta()])
        .fold(T::zero(), T::max);
    let im_max = (T::lit(10.0) * max_im * k0).max(span * T::lit(1e-3));
    // keep the left edge off the cladding branch point; lossless roots sit
    // on the real axis, so the bottom edge dips just below it
    Some(Rect::new(
        lo + span * T::lit(1e-7),
        hi + span * T::lit(1e-3),
        -span * T::lit(1e-4),
        im_max,
    ))
}

/// Guided-mode wavenumbers `q - k0`, sorted by descending real part.
pub fn find_guided_modes<T: Real>(stack: &LayerStack<T>) -> Result<Vec<C<T>>, ModeError> {
    find_guided_modes_with(stack, &ModeSolverOptions::default())
}

pub fn find_guided_modes_with<T: Real>(
    stack: &LayerStack<T>,
    opts: &ModeSolverOptions<T>,
) -> Result<Vec<C<T>>, ModeError> {
    let Some(rect) = guided_search_window(stack) else {
        return Ok(Vec::new());
    };
    let f = |q: C<T>| determinant_on(stack, q, Sheet::Guided);
    let r = |q: C<T>| scaled_residual(stack, q, Sheet::Guided);
    let ro = RootOptions {
        tol: opts.tol_root,
        edge_samples: opts.edge_samples,
        ..RootOptions::default()
    };
    let mut roots = find_zeros(&f, &r, &rect, &ro)?;
    // lossless roots can land a rounding error below the axis
    let floor = -rect.width() * T::lit(1e-6);
    roots.retain(|q| q.im >= floor);
    roots.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal));
    Ok(roots)
}

/// Roots on the leaky sheet (both cladding solutions growing) inside
/// `region`. Diagnostic only.
///
/// The cladding square roots keep their principal cut, which runs from the
/// cladding light line toward smaller `Re q` at `Im q = k0 β_clad`; regions
/// should not straddle it.
pub fn find_leaky_modes<T: Real>(stack: &LayerStack<T>, region: &Rect<T>) -> Result<Vec<C<T>>, ModeError> {
    let f = |q: C<T>| determinant_on(stack, q, Sheet::Leaky);
    let r = |q: C<T>| scaled_residual(stack, q, Sheet::Leaky);
    let opts = ModeSolverOptions::<T>::default();
    let ro = RootOptions {
        tol: opts.tol_root,
        edge_samples: opts.edge_samples,
        ..RootOptions::default()
    };
    let mut roots = find_zeros(&f, &r, region, &ro)?;
    roots.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal));
    Ok(roots)
}

/// Where a profile segment lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionKind<T> {
    /// `z < 0`.
    TopCladding,
    /// Finite layer of the given thickness.
    Layer(T),
    /// Below the last layer.
    BottomCladding,
}

/// `u(z) = forward·e^{ip s} + backward·e^{-ip s}` with `s = z - z_start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRegion<T> {
    pub kind: RegionKind<T>,
    pub z_start: T,
    pub p: C<T>,
    pub forward: C<T>,
    pub backward: C<T>,
}

impl<T: Real> ProfileRegion<T> {
    fn value(&self, s: T) -> C<T> {
        let e = (im_unit::<T>() * self.p * s).exp();
        self.forward * e + self.backward / e
    }

    fn derivative(&self, s: T) -> C<T> {
        let e = (im_unit::<T>() * self.p * s).exp();
        im_unit::<T>() * self.p * (self.forward * e - self.backward / e)
    }

    /// `∫ u dz` over the region.
    fn integral(&self) -> C<T> {
        let ip = im_unit::<T>() * self.p;
        match self.kind {
            RegionKind::TopCladding => self.forward / ip,
            RegionKind::BottomCladding => self.backward / ip,
            RegionKind::Layer(d) => (self.forward * exprel(ip * d) + self.backward * exprel(-ip * d)) * d,
        }
    }

    /// `∫ u² dz` over the region.
    fn integral_sq(&self) -> C<T> {
        let ip = im_unit::<T>() * self.p;
        let two = T::lit(2.0);
        match self.kind {
            RegionKind::TopCladding => self.forward * self.forward / (ip * two),
            RegionKind::BottomCladding => self.backward * self.backward / (ip * two),
            RegionKind::Layer(d) => {
                (self.forward * self.forward * exprel(ip * d * two)
                    + self.backward * self.backward * exprel(-ip * d * two)
                    + self.forward * self.backward * two)
                    * d
            }
        }
    }

    fn scaled(&self, s: C<T>) -> Self {
        Self {
            forward: self.forward * s,
            backward: self.backward * s,
            ..*self
        }
    }
}

/// Transverse profile of one guided mode.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedMode<T> {
    q_rel: C<T>,
    k0: T,
    regions: Vec<ProfileRegion<T>>,
    normalized: bool,
    z_ref: T,
}

impl<T: Real> GuidedMode<T> {
    /// `q - k0`.
    pub fn q_rel(&self) -> C<T> {
        self.q_rel
    }

    /// Full propagation wavenumber `q`.
    pub fn q(&self) -> C<T> {
        self.q_rel + self.k0
    }

    pub fn k0(&self) -> T {
        self.k0
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn regions(&self) -> &[ProfileRegion<T>] {
        &self.regions
    }

    fn locate(&self, z: T) -> (&ProfileRegion<T>, T) {
        if z < T::zero() {
            return (&self.regions[0], z);
        }
        for r in &self.regions[1..] {
            match r.kind {
                RegionKind::Layer(d) if z <= r.z_start + d => return (r, z - r.z_start),
                RegionKind::BottomCladding => return (r, z - r.z_start),
                _ => {}
            }
        }
        let last = self.regions.last().expect("profile has regions");
        (last, z - last.z_start)
    }

    /// `u(z)`.
    pub fn value(&self, z: T) -> C<T> {
        let (r, s) = self.locate(z);
        r.value(s)
    }

    /// `u'(z)`.
    pub fn derivative(&self, z: T) -> C<T> {
        let (r, s) = self.locate(z);
        r.derivative(s)
    }

    /// `∫ u² dz` over all depths (no conjugation).
    pub fn self_overlap(&self) -> C<T> {
        self.regions.iter().fold(re(T::zero()), |acc, r| acc + r.integral_sq())
    }

    /// `∫ u dz` over the chosen aperture.
    pub fn integral(&self, aperture: InputAperture) -> C<T> {
        self.regions
            .iter()
            .filter(|r| aperture == InputAperture::AllDepths || matches!(r.kind, RegionKind::Layer(_)))
            .fold(re(T::zero()), |acc, r| acc + r.integral())
    }

    /// Largest relative jump of `u` or `u'` across any interface.
    pub fn interface_mismatch(&self) -> T {
        let mut worst = T::zero();
        for w in self.regions.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let s = match a.kind {
                RegionKind::Layer(d) => d,
                _ => T::zero(),
            };
            let (ua, ub) = (a.value(s), b.value(T::zero()));
            let (da, db) = (a.derivative(s), b.derivative(T::zero()));
            let su = ua.norm().max(ub.norm());
            let sd = da.norm().max(db.norm()) + su * b.p.norm();
            let ru = if su > T::zero() { (ua - ub).norm() / su } else { T::zero() };
            let rd = if sd > T::zero() { (da - db).norm() / sd } else { T::zero() };
            worst = worst.max(ru).max(rd);
        }
        worst
    }

    /// Multiplies the profile by `s`; the normalized flag is cleared.
    pub fn scaled(&self, s: C<T>) -> Self {
        Self {
            regions: self.regions.iter().map(|r| r.scaled(s)).collect(),
            normalized: false,
            ..self.clone()
        }
    }
}

/// Unnormalized profile at a root `q_rel`.
pub fn mode_profile<T: Real>(stack: &LayerStack<T>, q_rel: C<T>) -> Result<GuidedMode<T>, ModeError> {
    mode_profile_with(stack, q_rel, &ModeSolverOptions::default())
}

pub fn mode_profile_with<T: Real>(
    stack: &LayerStack<T>,
    q_rel: C<T>,
    opts: &ModeSolverOptions<T>,
) -> Result<GuidedMode<T>, ModeError> {
    let residual = scaled_residual(stack, q_rel, Sheet::Guided);
    if !(residual < opts.tol_root) {
        return Err(ModeError::NotARoot {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            tol: opts.tol_root.to_f64().unwrap_or(f64::NAN),
        });
    }
    let i = im_unit::<T>();
    let g_top = stack.cladding_decay(stack.top, q_rel, Sheet::Guided);
    let mut regions = vec![ProfileRegion {
        kind: RegionKind::TopCladding,
        z_start: T::zero(),
        p: -i * g_top,
        forward: re(T::one()),
        backward: re(T::zero()),
    }];
    let mut u = re(T::one());
    let mut du = g_top;
    let mut z = T::zero();
    for (k, l) in stack.layers.iter().enumerate() {
        let p = sqrt_im_pos(stack.transverse_sq(l.index.contrast(), q_rel));
        if p.norm() * l.thickness < T::epsilon().sqrt() {
            return Err(ModeError::DegenerateLayer(k));
        }
        let ratio = du / (i * p);
        let r = ProfileRegion {
            kind: RegionKind::Layer(l.thickness),
            z_start: z,
            p,
            forward: (u + ratio) * T::lit(0.5),
            backward: (u - ratio) * T::lit(0.5),
        };
        u = r.value(l.thickness);
        du = r.derivative(l.thickness);
        regions.push(r);
        z += l.thickness;
    }
    let g_bot = stack.cladding_decay(stack.bottom, q_rel, Sheet::Guided);
    regions.push(ProfileRegion {
        kind: RegionKind::BottomCladding,
        z_start: z,
        p: -i * g_bot,
        forward: re(T::zero()),
        backward: u,
    });
    Ok(GuidedMode {
        q_rel,
        k0: stack.k0,
        regions,
        normalized: false,
        z_ref: stack.reference_depth(),
    })
}

/// Rescales so that `∫ u² dz = 1`, with `Re u(z_ref) >= 0` at the resonant
/// layer centre (or the stack centre when none is marked).
pub fn normalize_mode<T: Real>(mode: &GuidedMode<T>) -> Result<GuidedMode<T>, ModeError> {
    let n = mode.self_overlap();
    let scale_ref = mode
        .regions
        .iter()
        .map(|r| r.forward.norm_sqr() + r.backward.norm_sqr())
        .fold(T::zero(), T::max);
    if !(n.norm() > T::epsilon() * T::epsilon() * scale_ref) {
        return Err(ModeError::Degenerate);
    }
    let mut s = n.sqrt().inv();
    if (mode.value(mode.z_ref) * s).re < T::zero() {
        s = -s;
    }
    let mut out = mode.scaled(s);
    out.normalized = true;
    Ok(out)
}

/// `ξ = k0 L u(z0)² / q`.
pub fn coupling_strength<T: Real>(mode: &GuidedMode<T>, z0: T, thickness: T, k0: T) -> C<T> {
    let u = mode.value(z0);
    u * u * (k0 * thickness) / mode.q()
}

/// Depth range over which a uniform input beam is projected onto the modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputAperture {
    /// Only the finite layers, i.e. the guiding core between the claddings.
    #[default]
    Core,
    /// All depths, including the evanescent cladding tails.
    AllDepths,
}

/// `β(0) = amplitude · ∫ u dz` over the aperture, for a normalized mode.
pub fn input_overlap<T: Real>(mode: &GuidedMode<T>, aperture: InputAperture, amplitude: C<T>) -> C<T> {
    mode.integral(aperture) * amplitude
}

/// `g(z, z') = i u(z) u(z') / (2q)`.
pub fn greens_envelope<T: Real>(mode: &GuidedMode<T>, z: T, zp: T) -> C<T> {
    im_unit::<T>() * mode.value(z) * mode.value(zp) / (mode.q() * T::lit(2.0))
}

/// Normalized guided modes with their couplings to one resonant layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet<T> {
    modes: Vec<GuidedMode<T>>,
    couplings: Vec<C<T>>,
    z0: T,
    thickness: T,
}

impl<T: Real> ModeSet<T> {
    /// Finds, normalizes and couples every guided mode of `stack`.
    pub fn solve(stack: &LayerStack<T>) -> Result<Self, ModeError> {
        Self::solve_with(stack, &ModeSolverOptions::default())
    }

    pub fn solve_with(stack: &LayerStack<T>, opts: &ModeSolverOptions<T>) -> Result<Self, ModeError> {
        let (z0, thickness) = stack.resonant_geometry()?;
        let modes = find_guided_modes_with(stack, opts)?
            .into_iter()
            .map(|q| mode_profile_with(stack, q, opts).and_then(|m| normalize_mode(&m)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_modes(modes, z0, thickness))
    }

    pub fn from_modes(modes: Vec<GuidedMode<T>>, z0: T, thickness: T) -> Self {
        let couplings = modes
            .iter()
            .map(|m| coupling_strength(m, z0, thickness, m.k0()))
            .collect();
        Self {
            modes,
            couplings,
            z0,
            thickness,
        }
    }

    pub fn modes(&self) -> &[GuidedMode<T>] {
        &self.modes
    }

    pub fn couplings(&self) -> &[C<T>] {
        &self.couplings
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn z0(&self) -> T {
        self.z0
    }

    pub fn thickness(&self) -> T {
        self.thickness
    }

    /// Input amplitudes `β_λ(0)` for a unit uniform beam.
    pub fn input_overlaps(&self, aperture: InputAperture) -> Vec<C<T>> {
        self.modes
            .iter()
            .map(|m| input_overlap(m, aperture, re(T::one())))
            .collect()
    }

    /// Indices of the two most strongly coupled modes, in stored order.
    pub fn dominant_pair(&self) -> Option<(usize, usize)> {
        if self.modes.len() < 2 {
            return None;
        }
        let mut idx: Vec<usize> = (0..self.modes.len()).collect();
        idx.sort_by(|&a, &b| {
            self.couplings[b]
                .norm()
                .partial_cmp(&self.couplings[a].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let (a, b) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
        Some((a, b))
    }

    /// Two-mode summary of the dominant pair.
    pub fn two_mode_parameters(&self) -> Option<Result<TwoModeParams<T>, ModeError>> {
        let (a, b) = self.dominant_pair()?;
        Some(two_mode_parameters(
            self.modes[a].q_rel(),
            self.modes[b].q_rel(),
            self.couplings[a],
            self.couplings[b],
        ))
    }

    /// `index, Re q, Im q, Re ξ, Im ξ`, with `q` relative to `k0`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["index", "re_q_rel", "im_q_rel", "re_xi", "im_xi"]);
        for (k, (m, xi)) in self.modes.iter().zip(&self.couplings).enumerate() {
            let q = m.q_rel();
            t.push_cells(&[
                (k + 1).to_string(),
                crate::output::fmt17(q.re),
                crate::output::fmt17(q.im),
                crate::output::fmt17(xi.re),
                crate::output::fmt17(xi.im),
            ]);
        }
        t
    }
}

/// Mean/difference description of a mode pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeParams<T> {
    /// Mean of `Re q` (in the reference of the inputs).
    pub q_bar: T,
    pub delta_q: T,
    pub kappa_bar: T,
    pub delta_kappa: T,
    pub phi_bar: T,
    pub delta_phi: T,
    pub xi_mags: [T; 2],
    /// `|δq/δκ|`; infinite when `δκ = 0`.
    pub q_beat: T,
    /// `|δq/κ̄|`; infinite when `κ̄ = 0`.
    pub q_atten: T,
    /// `sqrt(Q_beat Q_atten)`; infinite when either factor is.
    pub q_mean: T,
}

/// Splits `(q1, ξ1)`, `(q2, ξ2)` into means and half-differences.
pub fn two_mode_parameters<T: Real>(q1: C<T>, q2: C<T>, xi1: C<T>, xi2: C<T>) -> Result<TwoModeParams<T>, ModeError> {
    if q1 == q2 {
        return Err(ModeError::IdenticalPair);
    }
    let half = T::lit(0.5);
    let delta_q = (q1.re - q2.re) * half;
    let kappa_bar = (q1.im + q2.im) * half;
    let delta_kappa = (q1.im - q2.im) * half;
    let (p1, p2) = (xi1.arg(), xi2.arg());
    let ratio = |num: T, den: T| {
        if den == T::zero() {
            T::infinity()
        } else {
            (num / den).abs()
        }
    };
    let q_beat = ratio(delta_q, delta_kappa);
    let q_atten = ratio(delta_q, kappa_bar);
    let q_mean = if q_beat.is_infinite() || q_atten.is_infinite() {
        T::infinity()
    } else {
        (q_beat * q_atten).sqrt()
    };
    Ok(TwoModeParams {
        q_bar: (q1.re + q2.re) * half,
        delta_q,
        kappa_bar,
        delta_kappa,
        phi_bar: (p1 + p2) * half,
        delta_phi: (p1 - p2) * half,
        xi_mags: [xi1.norm(), xi2.norm()],
        q_beat,
        q_atten,
        q_mean,
    })
}

impl<T: Real> TwoModeParams<T> {
    /// Rebuilds `(q1, q2, ξ1, ξ2)`.
    pub fn reconstruct(&self) -> (C<T>, C<T>, C<T>, C<T>) {
        let q1 = Complex::new(self.q_bar + self.delta_q, self.kappa_bar + self.delta_kappa);
        let q2 = Complex::new(self.q_bar - self.delta_q, self.kappa_bar - self.delta_kappa);
        let xi1 = Complex::from_polar(self.xi_mags[0], self.phi_bar + self.delta_phi);
        let xi2 = Complex::from_polar(self.xi_mags[1], self.phi_bar - self.delta_phi);
        (q1, q2, xi1, xi2)
    }

    /// Interference-beat wavelength `π/δq`.
    pub fn beat_length(&self) -> T {
        T::PI() / self.delta_q.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Z = Complex<f64>;

    /// Symmetric lossless slab: core contrast `c1`, cladding contrast `c0`.
    fn slab(c0: f64, c1: f64, d: f64) -> LayerStack<f64> {
        let k0 = 7.3e10;
        let clad = RefractiveIndex::from_contrast(Z::new(c0, 0.0));
        let core = RefractiveIndex::from_contrast(Z::new(c1, 0.0));
        LayerStack::new(clad, vec![Layer { thickness: d, index: core }], clad, k0).unwrap()
    }

    /// Even TE mode of a symmetric slab, by bisection on `κ tan(κd/2) = γ`.
    fn even_mode_oracle(c0: f64, c1: f64, d: f64, k0: f64) -> f64 {
        // work in q_rel, using the same contrast factorisation
        let kappa = |q: f64| ((k0 * c1 - q) * (2.0 * k0 + k0 * c1 + q)).sqrt();
        let gamma = |q: f64| ((q - k0 * c0) * (2.0 * k0 + k0 * c0 + q)).sqrt();
        let g = |q: f64| kappa(q) * (kappa(q) * d / 2.0).tan() - gamma(q);
        let (mut lo, mut hi) = (k0 * c0 * (1.0 - 1e-12), k0 * c1 * (1.0 + 1e-12));
        // fundamental branch: κd/2 < π/2
        let q_pi = {
            let (mut a, mut b) = (k0 * c0, k0 * c1);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if kappa(m) * d / 2.0 > std::f64::consts::FRAC_PI_2 {
                    a = m;
                } else {
                    b = m;
                }
            }
            b
        };
        lo = lo.max(q_pi);
        for _ in 0..300 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn symmetric_slab_matches_bisection_oracle() {
        let (c0, c1, d) = (-8e-6, -2e-6, 30e-9);
        let s = slab(c0, c1, d);
        let q = even_mode_oracle(c0, c1, d, s.k0());
        let modes = find_guided_modes(&s).unwrap();
        let fundamental = modes[0];
        assert!((fundamental - Z::new(q, 0.0)).norm() / (q + s.k0()) < 1e-10);
        assert!(dispersion_determinant(&s, Z::new(q, 0.0)).norm() / s.k0() < 1e-8);
    }

    #[test]
    fn single_mode_below_cutoff() {
        // second TE mode appears at V = k0 d sqrt(n1² - n0²) = π
        let (c0, c1) = (-8e-6, -2e-6);
        let k0 = 7.3e10;
        let na = ((1.0_f64 + c1) * (1.0 + c1) - (1.0 + c0) * (1.0 + c0)).sqrt();
        let d_cut = std::f64::consts::PI / (k0 * na);
        assert_eq!(find_guided_modes(&slab(c0, c1, 0.8 * d_cut)).unwrap().len(), 1);
        assert_eq!(find_guided_modes(&slab(c0, c1, 1.3 * d_cut)).unwrap().len(), 2);
    }

    #[test]
    fn uniform_and_vacuum_stacks_have_no_modes() {
        let v = RefractiveIndex::<f64>::vacuum();
        let s = LayerStack::new(v, vec![Layer { thickness: 1e-8, index: v }], v, 7.3e10).unwrap();
        assert!(find_guided_modes(&s).unwrap().is_empty());
        let n = RefractiveIndex::from_delta_beta(5e-6, 1e-7);
        let s = LayerStack::new(n, vec![Layer { thickness: 3e-8, index: n }], n, 7.3e10).unwrap();
        assert!(find_guided_modes(&s).unwrap().is_empty());
    }

    #[test]
    fn stack_validation() {
        let v = RefractiveIndex::<f64>::vacuum();
        assert!(LayerStack::new(v, vec![Layer { thickness: 0.0, index: v }], v, 1.0).is_err());
        assert!(LayerStack::new(v, vec![], v, -1.0).is_err());
        let gain = RefractiveIndex::from_delta_beta(1e-6, -1e-8);
        assert!(LayerStack::new(v, vec![Layer { thickness: 1e-9, index: gain }], v, 1.0).is_err());
        let s = LayerStack::new(v, vec![Layer { thickness: 1e-9, index: v }], v, 1.0).unwrap();
        assert!(s.clone().with_resonant_layer(3).is_err());
        assert!(matches!(s.resonant_geometry(), Err(ModeError::NoResonantLayer)));
    }

    #[test]
    fn profile_symmetry_and_parity() {
        let (c0, c1, d) = (-8e-6, -2e-6, 60e-9);
        let s = slab(c0, c1, d);
        let modes = find_guided_modes(&s).unwrap();
        assert!(modes.len() >= 2);
        let even = normalize_mode(&mode_profile(&s, modes[0]).unwrap()).unwrap();
        let odd = normalize_mode(&mode_profile(&s, modes[1]).unwrap()).unwrap();
        for k in 0..20 {
            let z = -20e-9 + k as f64 * 5e-9;
            let (a, b) = (even.value(z).norm(), even.value(d - z).norm());
            assert!((a - b).abs() <= 1e-9 * a.max(b), "{z}");
        }
        let peak = odd.value(d / 4.0).norm();
        assert!(odd.value(d / 2.0).norm() < 1e-9 * peak);
        assert!(coupling_strength(&odd, d / 2.0, 1e-9, s.k0()).norm() < 1e-15);
        assert!(input_overlap(&odd, InputAperture::AllDepths, Z::new(1.0, 0.0)).norm() < 1e-10 * peak * d);
    }

    #[test]
    fn non_root_rejected() {
        let s = slab(-8e-6, -2e-6, 30e-9);
        assert!(matches!(mode_profile(&s, Z::new(-3e5, 0.0)), Err(ModeError::NotARoot { .. })));
    }

    #[test]
    fn normalization_idempotent_and_scale_invariant() {
        let s = reference_cavity::<f64>().unwrap();
        let q = find_guided_modes(&s).unwrap()[0];
        let m = mode_profile(&s, q).unwrap();
        let n1 = normalize_mode(&m).unwrap();
        assert!(n1.is_normalized());
        assert!((n1.self_overlap() - Z::new(1.0, 0.0)).norm() < 1e-10);
        let n2 = normalize_mode(&n1).unwrap();
        let n3 = normalize_mode(&m.scaled(Z::new(2.0, 0.0))).unwrap();
        let n4 = normalize_mode(&m.scaled(Z::new(0.0, -3.0))).unwrap();
        for z in [-5e-9, 3e-9, 16.3e-9, 30e-9, 40e-9] {
            let r = n1.value(z);
            assert!((n2.value(z) - r).norm() < 1e-12 * r.norm().max(1.0));
            assert!((n3.value(z) - r).norm() < 1e-12 * r.norm().max(1.0));
            assert!((n4.value(z) - r).norm() < 1e-12 * r.norm().max(1.0));
        }
        assert!(n1.value(s.reference_depth()).re >= 0.0);
    }

    #[test]
    fn reference_cavity_interfaces_continuous() {
        let s = reference_cavity::<f64>().unwrap();
        for q in find_guided_modes(&s).unwrap() {
            assert!(determinant_residual(&s, q) < 1e-10);
            assert!(q.im > 0.0);
            let m = normalize_mode(&mode_profile(&s, q).unwrap()).unwrap();
            assert!(m.interface_mismatch() < 1e-10, "{}", m.interface_mismatch());
        }
    }

    #[test]
    fn greens_envelope_identities() {
        let s = reference_cavity::<f64>().unwrap();
        let set = ModeSet::solve(&s).unwrap();
        let (z0, l) = (set.z0(), set.thickness());
        let mut sum = Z::new(0.0, 0.0);
        for m in set.modes() {
            assert_eq!(greens_envelope(m, 3e-9, 20e-9), greens_envelope(m, 20e-9, 3e-9));
            let g = greens_envelope(m, z0, z0);
            let direct = Z::new(0.0, 1.0) * m.value(z0) * m.value(z0) / (m.q() * 2.0);
            assert!((g - direct).norm() <= 1e-15 * direct.norm());
            sum += g * (2.0 * s.k0() * l) / Z::new(0.0, 1.0);
        }
        let total: Z = set.couplings().iter().sum();
        assert!((sum - total).norm() < 1e-12 * total.norm());
    }

    #[test]
    fn two_mode_degenerate_and_invalid() {
        let q1 = Z::new(-0.3e6, 2.0e3);
        let p = two_mode_parameters(q1, q1.conj(), Z::new(0.1, 0.0), Z::new(0.1, 0.0)).unwrap();
        assert_eq!(p.delta_q, 0.0);
        assert_eq!(p.kappa_bar, 0.0);
        assert!(p.q_atten.is_infinite());
        assert!(p.q_mean.is_infinite());
        let same_kappa = two_mode_parameters(Z::new(1.0, 1.0), Z::new(2.0, 1.0), Z::new(1.0, 0.0), Z::new(1.0, 0.0)).unwrap();
        assert!(same_kappa.q_beat.is_infinite());
        assert!(matches!(two_mode_parameters(q1, q1, Z::new(1.0, 0.0), Z::new(1.0, 0.0)), Err(ModeError::IdenticalPair)));
    }

    #[test]
    fn csv_export_layout() {
        let set = ModeSet::solve(&reference_cavity::<f64>().unwrap()).unwrap();
        let text = set.to_csv().to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,re_q_rel,im_q_rel,re_xi,im_xi");
        assert_eq!(lines.len(), 1 + set.len());
        assert!(lines[1].starts_with("1,"));
    }

    fn arb_c() -> impl Strategy<Value = Z> {
        (-1e6f64..1e6, 0.0f64..1e4).prop_map(|(a, b)| Z::new(a, b))
    }

    fn arb_xi() -> impl Strategy<Value = Z> {
        (1e-4f64..1.0, -3.1f64..3.1).prop_map(|(r, t)| Z::from_polar(r, t))
    }

    proptest! {
        #[test]
        fn two_mode_round_trip(q1 in arb_c(), q2 in arb_c(), x1 in arb_xi(), x2 in arb_xi()) {
            prop_assume!(q1 != q2);
            let p = two_mode_parameters(q1, q2, x1, x2).unwrap();
            let (a, b, c, d) = p.reconstruct();
            let tol = 4.0 * f64::EPSILON;
            prop_assert!((a - q1).norm() <= tol * q1.norm().max(q2.norm()));
            prop_assert!((b - q2).norm() <= tol * q1.norm().max(q2.norm()));
            prop_assert!((c - x1).norm() <= tol * 4.0);
            prop_assert!((d - x2).norm() <= tol * 4.0);
            let mean = (p.q_beat * p.q_atten).sqrt();
            prop_assert!((p.q_mean - mean).abs() <= 1e-15 * mean);
        }

        #[test]
        fn two_mode_swap_antisymmetry(q1 in arb_c(), q2 in arb_c(), x1 in arb_xi(), x2 in arb_xi()) {
            prop_assume!(q1 != q2);
            let p = two_mode_parameters(q1, q2, x1, x2).unwrap();
            let s = two_mode_parameters(q2, q1, x2, x1).unwrap();
            prop_assert_eq!(p.delta_q, -s.delta_q);
            prop_assert_eq!(p.delta_kappa, -s.delta_kappa);
            prop_assert_eq!(p.delta_phi, -s.delta_phi);
            prop_assert_eq!(p.q_bar, s.q_bar);
            prop_assert_eq!(p.kappa_bar, s.kappa_bar);
        }

        #[test]
        fn slab_modes_are_roots_and_continuous(d_nm in 10.0f64..80.0, c1 in -4e-6f64..-1e-6, beta in 0.0f64..1e-7) {
            let k0 = 7.3e10;
            let clad = RefractiveIndex::from_delta_beta(8e-6, 2e-7);
            let core = RefractiveIndex::from_contrast(Z::new(c1, beta));
            let s = LayerStack::new(clad, vec![Layer { thickness: d_nm * 1e-9, index: core }], clad, k0).unwrap();
            for q in find_guided_modes(&s).unwrap() {
                prop_assert!(determinant_residual(&s, q) < 1e-10);
                let m = normalize_mode(&mode_profile(&s, q).unwrap()).unwrap();
                prop_assert!(m.interface_mismatch() < 1e-10);
                prop_assert!((m.self_overlap() - Z::new(1.0, 0.0)).norm() < 1e-10);
            }
        }
    }
}
