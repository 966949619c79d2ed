//! X-ray waveguides with thin layers of Mössbauer nuclei.
//!
//! The pipeline runs from optical constants to time spectra:
//!
//! * [`materials`] loads refractive-index tables and interpolates them.
//! * [`modes`] finds the guided modes of a planar stack and their couplings
//!   `ξ_λ` to a thin resonant layer.
//! * [`nuclear`] builds the nuclear response `F(ω)`, including hyperfine
//!   splitting via exact Wigner 3j symbols.
//! * [`propagate`] solves the multimode equation of motion for a uniform
//!   resonant layer: matrix exponential, single-mode Bessel response, the
//!   residue form of the multiple-scattering series and FFT inversion.
//! * [`strips`] handles layers cut into strips: transfer products,
//!   scattering-order sums, constructive/destructive placement and the
//!   Laguerre time response.
//!
//! Everything is generic over the float type through [`scalar::Real`];
//! the `*64` aliases below fix it to `f64`.
//!
//! ```
//! use nuclear_waveguide::{modes::reference_cavity, ModeSet64};
//!
//! let stack = reference_cavity::<f64>().unwrap();
//! let set = ModeSet64::solve(&stack).unwrap();
//! assert_eq!(set.len(), 3);
//! ```

// `!(a > b)` rejects NaN along with the ordered failures.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fourier;
pub mod linalg;
pub mod materials;
pub mod modes;
pub mod nuclear;
pub mod output;
pub mod propagate;
pub mod roots;
pub mod scalar;
pub mod special;
pub mod strips;

pub use num_complex::Complex64;

pub type LayerStack64 = modes::LayerStack<f64>;
pub type ModeSet64 = modes::ModeSet<f64>;
pub type GuidedMode64 = modes::GuidedMode<f64>;
pub type TwoModeParams64 = modes::TwoModeParams<f64>;
pub type NuclearSpecies64 = nuclear::NuclearSpecies<f64>;
pub type ResponseModel64 = nuclear::ResponseModel<f64>;
pub type EffectiveSystem64 = propagate::EffectiveSystem<f64>;
pub type StripArray64 = strips::StripArray<f64>;
pub type OmegaGrid64 = fourier::OmegaGrid<f64>;
pub type TimeSeries64 = fourier::TimeSeries<f64>;
pub type MaterialOpticalData64 = materials::MaterialOpticalData<f64>;
