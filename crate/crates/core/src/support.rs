//! Frequency supports, their set algebra, and the multipliers `M_A`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{parameter, structural, Result};
use crate::field::{forward_transform, inverse_transform, GridSpec, SampledField, SpectralField};

/// Relative threshold used when a support has to be detected from data.
pub const DEFAULT_TAU_REL: f64 = 1e-12;

/// Characteristic set on the frequency nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMask {
    grid: GridSpec,
    bits: Vec<bool>,
}

/// Where a support came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskProvenance {
    /// Exact support attached when the spectrum was constructed.
    Declared,
    /// Thresholded `|F_k| > tau * max |F|`.
    Detected,
}

impl SupportMask {
    pub fn new(grid: GridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(structural(format!(
                "mask has {} bits, grid has {} nodes",
                bits.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, bits })
    }

    pub fn empty(grid: GridSpec) -> Self {
        let bits = vec![false; grid.len()];
        Self { grid, bits }
    }

    pub fn full(grid: GridSpec) -> Self {
        let bits = vec![true; grid.len()];
        Self { grid, bits }
    }

    pub fn from_indices(grid: GridSpec, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = vec![false; grid.len()];
        for k in indices {
            *bits
                .get_mut(k)
                .ok_or_else(|| structural(format!("mask index {k} out of range")))? = true;
        }
        Ok(Self { grid, bits })
    }

    /// Mask of the nodes whose frequency satisfies `pred`.
    pub fn from_predicate(grid: GridSpec, pred: impl Fn(&[f64]) -> bool) -> Self {
        let bits = (0..grid.len()).map(|k| pred(&grid.frequency(k))).collect();
        Self { grid, bits }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// Lebesgue measure surrogate: count times the frequency cell volume.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.frequency_cell_volume()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
    }

    fn zip(&self, other: &SupportMask, op: impl Fn(bool, bool) -> bool) -> Result<SupportMask> {
        if self.grid != other.grid {
            return Err(structural("masks live on different grids"));
        }
        Ok(SupportMask {
            grid: self.grid.clone(),
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    pub fn intersect(&self, other: &SupportMask) -> Result<SupportMask> {
        self.zip(other, |a, b| a && b)
    }

    pub fn union(&self, other: &SupportMask) -> Result<SupportMask> {
        self.zip(other, |a, b| a || b)
    }

    /// `self \ other`.
    pub fn diff(&self, other: &SupportMask) -> Result<SupportMask> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> SupportMask {
        SupportMask {
            grid: self.grid.clone(),
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset(&self, other: &SupportMask) -> Result<bool> {
        Ok(self.diff(other)?.is_empty())
    }

    /// `chi_A F`.
    pub fn restrict(&self, spectrum: &SpectralField) -> Result<SpectralField> {
        if spectrum.grid() != &self.grid {
            return Err(structural("mask and spectrum live on different grids"));
        }
        let values = spectrum
            .values()
            .iter()
            .zip(&self.bits)
            .map(|(&v, &b)| if b { v } else { Complex64::default() })
            .collect();
        SpectralField::new(self.grid.clone(), values)
    }
}

/// Thresholded surrogate for `supp(F)`.
pub fn detect_support(spectrum: &SpectralField, tau_rel: f64) -> Result<SupportMask> {
    if !(0.0..1.0).contains(&tau_rel) {
        return Err(parameter(format!("tau_rel {tau_rel} must lie in [0, 1)")));
    }
    let peak = spectrum
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let cut = tau_rel * peak;
    let bits = spectrum.values().iter().map(|v| v.norm() > cut).collect();
    SupportMask::new(spectrum.grid().clone(), bits)
}

/// The Fourier multiplier `M_A = F^-1 chi_A F`.
///
/// The result carries the declared support `A` (intersected with the input's
/// declared support when present).
pub fn apply_multiplier(mask: &SupportMask, f: &SampledField) -> Result<SampledField> {
    if mask.grid() != f.grid() {
        return Err(structural("mask and field live on different grids"));
    }
    let restricted = mask.restrict(&forward_transform(f))?;
    let declared = match f.mask() {
        Some(m) => m.intersect(mask)?,
        None => mask.clone(),
    };
    inverse_transform(&restricted).with_mask(declared)
}

/// A spectrum together with the support used for it.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Forward transform; with a declared mask, off-mask bins are exactly zero.
    pub spectrum: SpectralField,
    pub mask: SupportMask,
    pub provenance: MaskProvenance,
}

/// Transform `f` and settle its support: the declared mask when present,
/// otherwise a detected one.
pub fn resolve(f: &SampledField, tau_rel: f64) -> Result<Resolved> {
    let spectrum = forward_transform(f);
    match f.mask() {
        Some(mask) => Ok(Resolved {
            spectrum: mask.restrict(&spectrum)?,
            mask: mask.clone(),
            provenance: MaskProvenance::Declared,
        }),
        None => Ok(Resolved {
            mask: detect_support(&spectrum, tau_rel)?,
            spectrum,
            provenance: MaskProvenance::Detected,
        }),
    }
}

/// The sets `A_{f cap g}`, `A_{f \ g}`, `A_{g \ f}` and `A_{f cup g}^c`,
/// which partition the frequency grid.
#[derive(Debug, Clone)]
pub struct Partition {
    pub common: SupportMask,
    pub only_f: SupportMask,
    pub only_g: SupportMask,
    pub outside: SupportMask,
}

impl Partition {
    pub fn new(f: &SupportMask, g: &SupportMask) -> Result<Self> {
        Ok(Self {
            common: f.intersect(g)?,
            only_f: f.diff(g)?,
            only_g: g.diff(f)?,
            outside: f.union(g)?.complement(),
        })
    }
}
