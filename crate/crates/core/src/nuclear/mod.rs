//! Linear response of Mössbauer nuclei: transition constants, hyperfine
//! levels, the Lorentzian response tensor `F(ω)`, and the resonant cross
//! section.
//!
//! Frequencies are detunings from the bare transition, in rad/s.

pub mod wigner;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{im_unit, re, Real, C};
pub use wigner::{wigner_3j, wigner_3j_exact, HalfInt, Wigner3j};

/// ħc in eV·m.
pub const HBAR_C_EV_M: f64 = 1.973_269_804e-7;
/// ħ in eV·s.
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NuclearError {
    #[error("angular momentum argument: {0}")]
    Argument(String),
    #[error("invalid species: {0}")]
    Species(String),
    #[error("invalid hyperfine configuration: {0}")]
    Hyperfine(String),
    #[error("scalar response requested for a hyperfine-split model")]
    NotIsotropic,
}

/// Vacuum wavenumber `E/(ħc)` in 1/m for a photon energy in eV.
pub fn wavenumber_from_energy_ev<T: Real>(energy_ev: T) -> T {
    energy_ev / T::lit(HBAR_C_EV_M)
}

/// Transition constants of the resonant isotope.
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearSpecies<T> {
    /// Transition energy in keV.
    pub e0_kev: T,
    /// Total width γ in 1/s.
    pub gamma: T,
    /// Internal conversion coefficient.
    pub alpha: T,
    /// Lamb-Mössbauer factor.
    pub f_lm: T,
    pub i_g: HalfInt,
    pub i_e: HalfInt,
    /// Number density of resonant nuclei in 1/m³.
    pub rho_n: T,
}

impl<T: Real> NuclearSpecies<T> {
    pub fn new(
        e0_kev: T,
        gamma: T,
        alpha: T,
        f_lm: T,
        i_g: HalfInt,
        i_e: HalfInt,
        rho_n: T,
    ) -> Result<Self, NuclearError> {
        let s = Self {
            e0_kev,
            gamma,
            alpha,
            f_lm,
            i_g,
            i_e,
            rho_n,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), NuclearError> {
        let bad = |m: &str| Err(NuclearError::Species(m.to_string()));
        if !(self.e0_kev > T::zero()) {
            return bad("transition energy must be positive");
        }
        if !(self.gamma > T::zero()) {
            return bad("linewidth must be positive");
        }
        if !(self.alpha >= T::zero()) {
            return bad("internal conversion coefficient must be non-negative");
        }
        if !(self.f_lm >= T::zero() && self.f_lm <= T::one()) {
            return bad("Lamb-Mössbauer factor must lie in [0, 1]");
        }
        if self.i_g.doubled() < 0 || self.i_e.doubled() < 0 {
            return bad("spins must be non-negative");
        }
        if !(self.rho_n >= T::zero()) {
            return bad("nuclear density must be non-negative");
        }
        Ok(())
    }

    /// ⁵⁷Fe: 14.4 keV, ħγ = 4.7 neV, α = 8.56, f_LM = 0.8, fully enriched α-Fe.
    pub fn fe57() -> Self {
        Self {
            e0_kev: T::lit(14.4),
            gamma: T::lit(4.7e-9 / HBAR_EV_S),
            alpha: T::lit(8.56),
            f_lm: T::lit(0.8),
            i_g: HalfInt::from_doubled(1),
            i_e: HalfInt::from_doubled(3),
            rho_n: T::lit(8.49e28),
        }
    }

    /// Linewidth `ħγ` in eV.
    pub fn linewidth_ev(&self) -> T {
        self.gamma * T::lit(HBAR_EV_S)
    }

    /// Transition wavenumber in 1/m.
    pub fn k0(&self) -> T {
        wavenumber_from_energy_ev(self.e0_kev * T::lit(1e3))
    }
}

/// Resonant scattering cross section in m².
pub fn sigma_res<T: Real>(species: &NuclearSpecies<T>) -> T {
    let k0 = species.k0();
    let ge = T::from_usize_lossy(species.i_e.multiplicity());
    let gg = T::from_usize_lossy(species.i_g.multiplicity());
    T::TAU() / (k0 * k0) * species.f_lm / (T::one() + species.alpha) * ge / gg
}

/// On-resonance attenuation coefficient `ζ = ρ_N σ_res` in 1/m.
pub fn attenuation_zeta<T: Real>(species: &NuclearSpecies<T>) -> T {
    species.rho_n * sigma_res(species)
}

/// An eigenstate of the hyperfine Hamiltonian in one nuclear level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLevel<T> {
    /// Energy shift in rad/s.
    pub shift: T,
    /// `⟨I, m|level⟩` for `m = -I, ..., I`.
    pub amplitudes: Vec<C<T>>,
}

/// Hyperfine eigenbases of the excited and ground levels.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperfineConfig<T> {
    i_e: HalfInt,
    i_g: HalfInt,
    excited: Vec<SpinLevel<T>>,
    ground: Vec<SpinLevel<T>>,
}

fn check_basis<T: Real>(levels: &[SpinLevel<T>], spin: HalfInt, which: &str) -> Result<(), NuclearError> {
    let n = spin.multiplicity();
    if levels.len() != n {
        return Err(NuclearError::Hyperfine(format!(
            "{which} level count {} differs from 2I+1 = {n}",
            levels.len()
        )));
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
    for (a, la) in levels.iter().enumerate() {
        if la.amplitudes.len() != n {
            return Err(NuclearError::Hyperfine(format!("{which} level {a} has wrong amplitude count")));
        }
        for (b, lb) in levels.iter().enumerate().skip(a) {
            let dot = la
                .amplitudes
                .iter()
                .zip(&lb.amplitudes)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y);
            let target = if a == b { T::one() } else { T::zero() };
            if (dot - target).norm() > tol {
                return Err(NuclearError::Hyperfine(format!(
                    "{which} levels {a},{b} are not orthonormal"
                )));
            }
        }
    }
    Ok(())
}

impl<T: Real> HyperfineConfig<T> {
    /// Requires orthonormal amplitude vectors, `2I+1` of each.
    pub fn new(
        i_e: HalfInt,
        i_g: HalfInt,
        excited: Vec<SpinLevel<T>>,
        ground: Vec<SpinLevel<T>>,
    ) -> Result<Self, NuclearError> {
        check_basis(&excited, i_e, "excited")?;
        check_basis(&ground, i_g, "ground")?;
        Ok(Self {
            i_e,
            i_g,
            excited,
            ground,
        })
    }

    /// Pure `|I, m⟩` states with the given shifts (ascending `m`).
    pub fn pure(i_e: HalfInt, i_g: HalfInt, excited_shifts: &[T], ground_shifts: &[T]) -> Result<Self, NuclearError> {
        let basis = |spin: HalfInt, shifts: &[T]| -> Result<Vec<SpinLevel<T>>, NuclearError> {
            let n = spin.multiplicity();
            if shifts.len() != n {
                return Err(NuclearError::Hyperfine(format!("expected {n} shifts, got {}", shifts.len())));
            }
            Ok((0..n)
                .map(|i| SpinLevel {
                    shift: shifts[i],
                    amplitudes: (0..n).map(|k| re(if k == i { T::one() } else { T::zero() })).collect(),
                })
                .collect())
        };
        Self::new(i_e, i_g, basis(i_e, excited_shifts)?, basis(i_g, ground_shifts)?)
    }

    /// Pure states, no splitting.
    pub fn unsplit(i_e: HalfInt, i_g: HalfInt) -> Self {
        let ze = vec![T::zero(); i_e.multiplicity()];
        let zg = vec![T::zero(); i_g.multiplicity()];
        Self::pure(i_e, i_g, &ze, &zg).expect("pure basis is orthonormal")
    }

    pub fn excited(&self) -> &[SpinLevel<T>] {
        &self.excited
    }

    pub fn ground(&self) -> &[SpinLevel<T>] {
        &self.ground
    }

    pub fn i_e(&self) -> HalfInt {
        self.i_e
    }

    pub fn i_g(&self) -> HalfInt {
        self.i_g
    }
}

fn level_check<T>(cfg: &HyperfineConfig<T>, mu: usize, j: usize) -> Result<(), NuclearError> {
    if mu >= cfg.excited.len() || j >= cfg.ground.len() {
        return Err(NuclearError::Argument(format!("level index ({mu}, {j}) out of range")));
    }
    Ok(())
}

/// Generalized coefficient `C(kq, μ→j)` for rank-`k` multipole component `q`.
pub fn clebsch_c<T: Real>(
    cfg: &HyperfineConfig<T>,
    k: i32,
    q: i32,
    mu: usize,
    j: usize,
) -> Result<C<T>, NuclearError> {
    level_check(cfg, mu, j)?;
    if k < 0 {
        return Err(NuclearError::Argument(format!("negative multipole rank {k}")));
    }
    let zero = Complex::new(T::zero(), T::zero());
    if q.abs() > k {
        return Ok(zero);
    }
    let (ie, ig) = (cfg.i_e, cfg.i_g);
    let mut sum = zero;
    for (ae, me) in cfg.excited[mu].amplitudes.iter().zip(ie.projections()) {
        if ae.norm_sqr() == T::zero() {
            continue;
        }
        for (ag, mg) in cfg.ground[j].amplitudes.iter().zip(ig.projections()) {
            if ag.norm_sqr() == T::zero() {
                continue;
            }
            let w: T = wigner_3j(ie, HalfInt::integer(k), ig, -me, HalfInt::integer(q), mg)?;
            if w == T::zero() {
                continue;
            }
            let phase_odd = ((ie.doubled() - me.doubled()) / 2).rem_euclid(2) == 1;
            let s = if phase_odd { -w } else { w };
            sum += ae.conj() * ag * s;
        }
    }
    Ok(sum * T::from_usize_lossy(ie.multiplicity()).sqrt())
}

/// Branching fraction `Σ_q |C(1q, μ→j)|²` of the dipole transition.
pub fn rate_fraction<T: Real>(cfg: &HyperfineConfig<T>, mu: usize, j: usize) -> Result<T, NuclearError> {
    let mut r = T::zero();
    for q in -1..=1 {
        r += clebsch_c(cfg, 1, q, mu, j)?.norm_sqr();
    }
    Ok(r)
}

/// Cartesian `Σ_q ê_q C(1q, μ→j)` with `ê_{±1} = (x̂ ± iŷ)/√2`, `ê_0 = ẑ`.
pub fn d_vector<T: Real>(cfg: &HyperfineConfig<T>, mu: usize, j: usize) -> Result<[C<T>; 3], NuclearError> {
    let cm = clebsch_c(cfg, 1, -1, mu, j)?;
    let c0 = clebsch_c(cfg, 1, 0, mu, j)?;
    let cp = clebsch_c(cfg, 1, 1, mu, j)?;
    let r = T::FRAC_1_SQRT_2();
    let i = im_unit::<T>();
    Ok([(cp + cm) * r, (cp - cm) * i * r, c0])
}

/// Complex 3×3 tensor, row-major.
pub type Tensor3<T> = [[C<T>; 3]; 3];

#[derive(Debug, Clone, PartialEq)]
struct Transition<T> {
    /// `Δ_μ - Δ_j`.
    detuning: T,
    /// `d* ⊗ d` weighted by `3/(2I_e+1)`.
    weight: Tensor3<T>,
}

/// Nuclear response `F(ω)`, optionally hyperfine split.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseModel<T> {
    species: NuclearSpecies<T>,
    hyperfine: Option<HyperfineConfig<T>>,
    transitions: Vec<Transition<T>>,
}

impl<T: Real> ResponseModel<T> {
    /// Isotropic (unsplit) response.
    pub fn isotropic(species: NuclearSpecies<T>) -> Self {
        Self {
            species,
            hyperfine: None,
            transitions: Vec::new(),
        }
    }

    pub fn with_hyperfine(species: NuclearSpecies<T>, cfg: HyperfineConfig<T>) -> Result<Self, NuclearError> {
        if cfg.i_e != species.i_e || cfg.i_g != species.i_g {
            return Err(NuclearError::Hyperfine("spins differ from the species".into()));
        }
        let norm = T::lit(3.0) / T::from_usize_lossy(species.i_e.multiplicity());
        let mut transitions = Vec::new();
        for mu in 0..cfg.excited.len() {
            for j in 0..cfg.ground.len() {
                let d = d_vector(&cfg, mu, j)?;
                if d.iter().all(|c| c.norm_sqr() == T::zero()) {
                    continue;
                }
                let mut weight = [[Complex::new(T::zero(), T::zero()); 3]; 3];
                for (a, row) in weight.iter_mut().enumerate() {
                    for (b, w) in row.iter_mut().enumerate() {
                        *w = d[a].conj() * d[b] * norm;
                    }
                }
                transitions.push(Transition {
                    detuning: cfg.excited[mu].shift - cfg.ground[j].shift,
                    weight,
                });
            }
        }
        Ok(Self {
            species,
            hyperfine: Some(cfg),
            transitions,
        })
    }

    pub fn species(&self) -> &NuclearSpecies<T> {
        &self.species
    }

    pub fn hyperfine(&self) -> Option<&HyperfineConfig<T>> {
        self.hyperfine.as_ref()
    }

    pub fn gamma(&self) -> T {
        self.species.gamma
    }
}

/// `(γ/2) / (ω + iγ/2)`.
pub fn lorentzian<T: Real>(gamma: T, omega: T) -> C<T> {
    let h = gamma * T::lit(0.5);
    re(h) / Complex::new(omega, h)
}

/// Full response tensor at detuning `ω`.
pub fn response_tensor<T: Real>(model: &ResponseModel<T>, omega: T) -> Tensor3<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut f = [[zero; 3]; 3];
    let gamma = model.species.gamma;
    if model.hyperfine.is_none() {
        let l = lorentzian(gamma, omega);
        for (a, row) in f.iter_mut().enumerate() {
            row[a] = l;
        }
        return f;
    }
    for t in &model.transitions {
        let l = lorentzian(gamma, omega - t.detuning);
        for a in 0..3 {
            for b in 0..3 {
                f[a][b] += t.weight[a][b] * l;
            }
        }
    }
    f
}

/// Scalar Lorentzian of an isotropic model.
pub fn scalar_response<T: Real>(model: &ResponseModel<T>, omega: T) -> Result<C<T>, NuclearError> {
    if model.hyperfine.is_some() {
        return Err(NuclearError::NotIsotropic);
    }
    Ok(lorentzian(model.species.gamma, omega))
}
