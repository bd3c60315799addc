//! `FLD-JSON v1`, the on-disk field format.
//!
//! ```json
//! {"version":1,"kind":"sampled","n":1,"dims":[4],"spacing":0.5,
//!  "re":[0,1,0,0],"im":[0,0,0,0],"mask":[0,1,1,0]}
//! ```
//!
//! Arrays are row-major. `mask` is optional and, when present, is a declared
//! spectral support.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{forward_transform, inverse_transform, GridSpec, SampledField, SpectralField};
use crate::support::SupportMask;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Sampled,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FldDocument {
    pub version: u32,
    pub kind: Kind,
    pub n: usize,
    pub dims: Vec<usize>,
    pub spacing: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<u8>>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl FldDocument {
    pub fn from_sampled(f: &SampledField) -> Self {
        Self::build(Kind::Sampled, f.grid(), f.values(), f.mask())
    }

    pub fn from_spectral(spectrum: &SpectralField, mask: Option<&SupportMask>) -> Self {
        Self::build(Kind::Spectral, spectrum.grid(), spectrum.values(), mask)
    }

    fn build(
        kind: Kind,
        grid: &GridSpec,
        values: &[Complex64],
        mask: Option<&SupportMask>,
    ) -> Self {
        Self {
            version: VERSION,
            kind,
            n: grid.dim(),
            dims: grid.dims().to_vec(),
            spacing: grid.spacing(),
            re: values.iter().map(|v| v.re).collect(),
            im: values.iter().map(|v| v.im).collect(),
            mask: mask.map(|m| m.bits().iter().map(|&b| u8::from(b)).collect()),
        }
    }

    fn validate(&self) -> Result<GridSpec> {
        if self.version != VERSION {
            return Err(format_err(format!(
                "unsupported FLD-JSON version {}",
                self.version
            )));
        }
        if self.n != self.dims.len() {
            return Err(format_err(format!(
                "n = {} does not match {} dims",
                self.n,
                self.dims.len()
            )));
        }
        let grid = GridSpec::new(self.dims.clone(), self.spacing)
            .map_err(|e| format_err(e.to_string()))?;
        for (name, len) in [("re", self.re.len()), ("im", self.im.len())] {
            if len != grid.len() {
                return Err(format_err(format!(
                    "`{name}` has {len} entries, grid has {}",
                    grid.len()
                )));
            }
        }
        if let Some(mask) = &self.mask {
            if mask.len() != grid.len() {
                return Err(format_err(format!(
                    "`mask` has {} entries, grid has {}",
                    mask.len(),
                    grid.len()
                )));
            }
            if mask.iter().any(|&b| b > 1) {
                return Err(format_err("`mask` entries must be 0 or 1"));
            }
        }
        Ok(grid)
    }

    fn values(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }

    /// The field in spatial form; spectral documents are inverse transformed.
    pub fn to_sampled(&self) -> Result<SampledField> {
        let grid = self.validate()?;
        let mask = match &self.mask {
            Some(bits) => Some(SupportMask::new(
                grid.clone(),
                bits.iter().map(|&b| b == 1).collect(),
            )?),
            None => None,
        };
        let field = match self.kind {
            Kind::Sampled => SampledField::new(grid, self.values())?,
            Kind::Spectral => {
                let spectrum = SpectralField::new(grid, self.values())?;
                match &mask {
                    Some(m) => inverse_transform(&m.restrict(&spectrum)?),
                    None => inverse_transform(&spectrum),
                }
            }
        };
        match mask {
            Some(m) => field.with_mask(m),
            None => Ok(field),
        }
    }

    /// The spectrum; sampled documents are forward transformed.
    pub fn to_spectral(&self) -> Result<SpectralField> {
        match self.kind {
            Kind::Spectral => SpectralField::new(self.validate()?, self.values()),
            Kind::Sampled => Ok(forward_transform(&self.to_sampled()?)),
        }
    }
}

pub fn to_string(f: &SampledField) -> Result<String> {
    Ok(serde_json::to_string(&FldDocument::from_sampled(f))?)
}

pub fn from_str(text: &str) -> Result<SampledField> {
    let doc: FldDocument =
        serde_json::from_str(text).map_err(|e| format_err(format!("invalid FLD-JSON: {e}")))?;
    doc.to_sampled()
}

pub fn read_field(path: impl AsRef<Path>) -> Result<SampledField> {
    from_str(&fs::read_to_string(path)?)
}

pub fn write_field(path: impl AsRef<Path>, f: &SampledField) -> Result<()> {
    fs::write(path, to_string(f)?)?;
    Ok(())
}
