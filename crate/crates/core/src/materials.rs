//! Tabulated x-ray optical constants and complex refractive indices.
//!
//! Tables are plain text, one sample per line: `energy_eV delta beta`, with
//! `n = 1 - delta + i*beta`. Lines starting with `#` are comments.

use std::io::{BufRead, BufReader, Read};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{Real, C};

/// Errors raised while reading or querying optical-constant tables.
#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: photon energy {energy} does not increase")]
    NonMonotone { line: usize, energy: f64 },
    #[error("line {line}: negative beta {beta} (active medium)")]
    NegativeBeta { line: usize, beta: f64 },
    #[error("table `{0}` has no samples")]
    Empty(String),
    #[error("energy {energy} eV outside sampled range [{min}, {max}] eV of `{name}`")]
    OutOfRange {
        name: String,
        energy: f64,
        min: f64,
        max: f64,
    },
    #[error("no bundled table for `{0}`")]
    UnknownMaterial(String),
    #[error("reading table: {0}")]
    Io(#[from] std::io::Error),
}

/// Complex refractive index stored as its contrast `n - 1`.
///
/// Hard x-ray indices differ from unity by ~1e-6, so keeping the contrast
/// avoids losing most significant digits to the leading one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefractiveIndex<T> {
    contrast: C<T>,
}

impl<T: Real> RefractiveIndex<T> {
    pub fn vacuum() -> Self {
        Self {
            contrast: Complex::new(T::zero(), T::zero()),
        }
    }

    /// `n = 1 - delta + i*beta`.
    pub fn from_delta_beta(delta: T, beta: T) -> Self {
        Self {
            contrast: Complex::new(-delta, beta),
        }
    }

    pub fn from_contrast(contrast: C<T>) -> Self {
        Self { contrast }
    }

    /// `n - 1`.
    pub fn contrast(&self) -> C<T> {
        self.contrast
    }

    pub fn delta(&self) -> T {
        -self.contrast.re
    }

    pub fn beta(&self) -> T {
        self.contrast.im
    }

    /// The index itself, `1 - delta + i*beta`.
    pub fn value(&self) -> C<T> {
        self.contrast + T::one()
    }
}

/// One tabulated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSample<T> {
    pub energy_ev: T,
    pub delta: T,
    pub beta: T,
}

/// Optical constants of one material on an increasing photon-energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialOpticalData<T> {
    name: String,
    samples: Vec<OpticalSample<T>>,
}

impl<T: Real> MaterialOpticalData<T> {
    /// Validates and wraps samples.
    pub fn new(name: impl Into<String>, samples: Vec<OpticalSample<T>>) -> Result<Self, MaterialError> {
        let name = name.into();
        if samples.is_empty() {
            return Err(MaterialError::Empty(name));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.beta < T::zero() {
                return Err(MaterialError::NegativeBeta {
                    line: i + 1,
                    beta: s.beta.to_f64().unwrap_or(f64::NAN),
                });
            }
            if i > 0 && s.energy_ev <= samples[i - 1].energy_ev {
                return Err(MaterialError::NonMonotone {
                    line: i + 1,
                    energy: s.energy_ev.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { name, samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[OpticalSample<T>] {
        &self.samples
    }

    /// Writes the table back in the load format at 17 significant digits.
    pub fn to_table_text(&self) -> String {
        let mut out = format!("# {}\n# energy_eV delta beta\n", self.name);
        for s in &self.samples {
            out.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", s.energy_ev, s.delta, s.beta));
        }
        out
    }
}

/// Parses a table from any byte stream.
pub fn load_material_table<T: Real, R: Read>(
    source: R,
    name: &str,
) -> Result<MaterialOpticalData<T>, MaterialError> {
    let reader = BufReader::new(source);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(MaterialError::Parse {
                line: lineno,
                message: format!("expected 3 columns, found {}", fields.len()),
            });
        }
        let mut vals = [T::zero(); 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = T::from_str_radix(f, 10).map_err(|_| MaterialError::Parse {
                line: lineno,
                message: format!("not a number: `{f}`"),
            })?;
            if !v.is_finite() {
                return Err(MaterialError::Parse {
                    line: lineno,
                    message: format!("non-finite value `{f}`"),
                });
            }
        }
        let sample = OpticalSample {
            energy_ev: vals[0],
            delta: vals[1],
            beta: vals[2],
        };
        if sample.beta < T::zero() {
            return Err(MaterialError::NegativeBeta {
                line: lineno,
                beta: vals[2].to_f64().unwrap_or(f64::NAN),
            });
        }
        if let Some(prev) = samples.last() {
            let prev: &OpticalSample<T> = prev;
            if sample.energy_ev <= prev.energy_ev {
                return Err(MaterialError::NonMonotone {
                    line: lineno,
                    energy: vals[0].to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        samples.push(sample);
    }
    MaterialOpticalData::new(name, samples)
}

/// Linearly interpolated index at `energy_ev`.
pub fn index_at<T: Real>(
    material: &MaterialOpticalData<T>,
    energy_ev: T,
) -> Result<RefractiveIndex<T>, MaterialError> {
    let s = &material.samples;
    let (lo, hi) = (s[0].energy_ev, s[s.len() - 1].energy_ev);
    if !(energy_ev >= lo && energy_ev <= hi) {
        return Err(MaterialError::OutOfRange {
            name: material.name.clone(),
            energy: energy_ev.to_f64().unwrap_or(f64::NAN),
            min: lo.to_f64().unwrap_or(f64::NAN),
            max: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    let i = s.partition_point(|p| p.energy_ev < energy_ev);
    if s[i.min(s.len() - 1)].energy_ev == energy_ev {
        let p = s[i];
        return Ok(RefractiveIndex::from_delta_beta(p.delta, p.beta));
    }
    let (a, b) = (s[i - 1], s[i]);
    let w = (energy_ev - a.energy_ev) / (b.energy_ev - a.energy_ev);
    let delta = a.delta + (b.delta - a.delta) * w;
    let beta = a.beta + (b.beta - a.beta) * w;
    Ok(RefractiveIndex::from_delta_beta(delta, beta))
}

const BUNDLED: [(&str, &str); 3] = [
    ("Mo", include_str!("../data/Mo.txt")),
    ("B4C", include_str!("../data/B4C.txt")),
    ("Fe", include_str!("../data/Fe.txt")),
];

/// Names of the tables shipped with the crate.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Loads one of the bundled 14-15 keV tables (`Mo`, `B4C`, `Fe`).
pub fn bundled<T: Real>(name: &str) -> Result<MaterialOpticalData<T>, MaterialError> {
    let (n, text) = BUNDLED
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| MaterialError::UnknownMaterial(name.to_string()))?;
    load_material_table(text.as_bytes(), n)
}
