//! Seeded generators of test fields.
//!
//! Spectral families are built bin by bin in frequency space, so off-mask
//! bins are exactly zero and the mask is declared. Random values come from a
//! ChaCha stream keyed by `(seed, stream, bin)`, which makes every bin
//! independent of evaluation order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{apply_element, AmbiguityElement};
use crate::error::{parameter, structural, Result};
use crate::field::{forward_transform, inverse_transform, GridSpec, SampledField, SpectralField};
use crate::support::{apply_multiplier, SupportMask};

/// Largest boundary sample allowed relative to the peak for Gaussians.
pub const BOUNDARY_DECAY: f64 = 1e-12;

/// A set of frequency bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSpec {
    Full,
    /// Per-axis half-open index ranges `lo[i]..hi[i]`.
    Box {
        lo: Vec<usize>,
        hi: Vec<usize>,
    },
    Indices {
        indices: Vec<usize>,
    },
}

impl MaskSpec {
    pub fn build(&self, grid: &GridSpec) -> Result<SupportMask> {
        match self {
            MaskSpec::Full => Ok(SupportMask::full(grid.clone())),
            MaskSpec::Box { lo, hi } => {
                if lo.len() != grid.dim() || hi.len() != grid.dim() {
                    return Err(structural("box mask dimension does not match the grid"));
                }
                for a in 0..grid.dim() {
                    if lo[a] > hi[a] || hi[a] > grid.dims()[a] {
                        return Err(parameter(format!(
                            "box range {}..{} does not fit axis {a} of length {}",
                            lo[a],
                            hi[a],
                            grid.dims()[a]
                        )));
                    }
                }
                let bits = (0..grid.len())
                    .map(|k| {
                        grid.unravel(k)
                            .iter()
                            .enumerate()
                            .all(|(a, &i)| (lo[a]..hi[a]).contains(&i))
                    })
                    .collect();
                SupportMask::new(grid.clone(), bits)
            }
            MaskSpec::Indices { indices } => {
                SupportMask::from_indices(grid.clone(), indices.iter().copied())
            }
        }
    }
}

/// Distribution of the in-mask spectral values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// Circular complex Gaussian with `E|F|^2 = 1`.
    #[default]
    ComplexGaussian,
    /// Real standard Gaussian, giving a real-valued spectrum.
    RealGaussian,
}

/// A field recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    ModulatedGaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
        wavevector: Vec<f64>,
    },
    BandLimitedRandom {
        mask: MaskSpec,
        #[serde(default)]
        law: AmplitudeLaw,
        /// Independent substream index, so pairs can share a seed.
        #[serde(default)]
        stream: u32,
        #[serde(default = "unit")]
        scale: f64,
    },
    FromSpectrum {
        re: Vec<f64>,
        im: Vec<f64>,
        mask: Option<MaskSpec>,
    },
    /// `M_B` applied to another recipe.
    Restricted { base: Box<Family>, mask: MaskSpec },
    /// An ambiguity element applied to another recipe.
    Transformed {
        base: Box<Family>,
        element: AmbiguityElement,
    },
    /// `base + perturbation`; declared masks are merged when both exist.
    Sum {
        base: Box<Family>,
        perturbation: Box<Family>,
    },
    /// Drops the declared mask so the support must be detected.
    Undeclared { base: Box<Family> },
}

fn unit() -> f64 {
    1.0
}

/// Everything needed to rebuild a field bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(flatten)]
    pub family: Family,
}

impl GenSpec {
    pub fn new(seed: u64, grid: GridSpec, family: Family) -> Self {
        Self { seed, grid, family }
    }

    pub fn generate(&self) -> Result<SampledField> {
        build(self.seed, &self.grid, &self.family)
    }
}

fn build(seed: u64, grid: &GridSpec, family: &Family) -> Result<SampledField> {
    match family {
        Family::Gaussian {
            amplitude,
            center,
            width,
        } => gaussian(grid, *amplitude, center, *width, &vec![0.0; grid.dim()]),
        Family::ModulatedGaussian {
            amplitude,
            center,
            width,
            wavevector,
        } => gaussian(grid, *amplitude, center, *width, wavevector),
        Family::BandLimitedRandom {
            mask,
            law,
            stream,
            scale,
        } => {
            let f = band_limited_random(seed, *stream, &mask.build(grid)?, *law)?;
            Ok(f.scale(Complex64::new(*scale, 0.0)))
        }
        Family::FromSpectrum { re, im, mask } => {
            let mask = mask.as_ref().map(|m| m.build(grid)).transpose()?;
            from_spectrum(grid, re, im, mask)
        }
        Family::Restricted { base, mask } => {
            apply_multiplier(&mask.build(grid)?, &build(seed, grid, base)?)
        }
        Family::Transformed { base, element } => apply_element(element, &build(seed, grid, base)?),
        Family::Sum { base, perturbation } => {
            let a = build(seed, grid, base)?;
            let b = build(seed, grid, perturbation)?;
            let one = Complex64::new(1.0, 0.0);
            let sum = a.combine(one, &b, one)?;
            match (a.mask(), b.mask()) {
                (Some(ma), Some(mb)) => sum.with_mask(ma.union(mb)?),
                _ => Ok(sum),
            }
        }
        Family::Undeclared { base } => Ok(build(seed, grid, base)?.without_mask()),
    }
}

/// Samples of `A exp(-|x - c|^2 / (2 w^2)) exp(i k.x)` with a declared full
/// spectral mask.
pub fn gaussian(
    grid: &GridSpec,
    amplitude: f64,
    center: &[f64],
    width: f64,
    wavevector: &[f64],
) -> Result<SampledField> {
    let n = grid.dim();
    if center.len() != n || wavevector.len() != n {
        return Err(structural(
            "center and wavevector must match the grid dimension",
        ));
    }
    let h = grid.spacing();
    if width < 4.0 * h {
        return Err(parameter(format!(
            "width {width} is below 4h = {}",
            4.0 * h
        )));
    }
    let extent = (0..n).map(|a| grid.extent(a)).fold(f64::INFINITY, f64::min);
    if width > extent / 8.0 {
        return Err(parameter(format!(
            "width {width} exceeds extent/8 = {}",
            extent / 8.0
        )));
    }
    let f = SampledField::from_fn(grid.clone(), |x| {
        let r2: f64 = x.iter().zip(center).map(|(xi, ci)| (xi - ci).powi(2)).sum();
        let phase: f64 = x.iter().zip(wavevector).map(|(xi, ki)| xi * ki).sum();
        Complex64::from_polar(amplitude * (-r2 / (2.0 * width * width)).exp(), phase)
    })?;
    let peak = f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let edge = (0..grid.len())
        .filter(|&k| {
            grid.unravel(k)
                .iter()
                .zip(grid.dims())
                .any(|(&i, &len)| i == 0 || i == len - 1)
        })
        .map(|k| f.values()[k].norm())
        .fold(0.0, f64::max);
    if edge > BOUNDARY_DECAY * peak {
        return Err(parameter(format!(
            "Gaussian does not decay at the boundary: edge/peak = {:e}",
            edge / peak
        )));
    }
    f.with_mask(SupportMask::full(grid.clone()))
}

fn bin_value(seed: u64, stream: u32, bin: usize, law: AmplitudeLaw) -> Complex64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(stream) << 40) | bin as u64);
    match law {
        AmplitudeLaw::ComplexGaussian => {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
        AmplitudeLaw::RealGaussian => Complex64::new(StandardNormal.sample(&mut rng), 0.0),
    }
}

/// A field whose spectrum is a seeded Gaussian draw on `mask` and exactly
/// zero elsewhere.
pub fn band_limited_random(
    seed: u64,
    stream: u32,
    mask: &SupportMask,
    law: AmplitudeLaw,
) -> Result<SampledField> {
    if mask.is_empty() {
        return Err(parameter("band-limited field needs a nonempty mask"));
    }
    let values: Vec<Complex64> = mask
        .bits()
        .par_iter()
        .enumerate()
        .map(|(k, &on)| {
            if on {
                bin_value(seed, stream, k, law)
            } else {
                Complex64::default()
            }
        })
        .collect();
    let spectrum = SpectralField::new(mask.grid().clone(), values)?;
    inverse_transform(&spectrum).with_mask(mask.clone())
}

/// The field with the given spectrum; with a mask, off-mask bins are zeroed
/// and the mask is declared.
pub fn from_spectrum(
    grid: &GridSpec,
    re: &[f64],
    im: &[f64],
    mask: Option<SupportMask>,
) -> Result<SampledField> {
    if re.len() != grid.len() || im.len() != grid.len() {
        return Err(structural("spectrum length does not match the grid"));
    }
    let values = re
        .iter()
        .zip(im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    let spectrum = SpectralField::new(grid.clone(), values)?;
    match mask {
        Some(m) => inverse_transform(&m.restrict(&spectrum)?).with_mask(m),
        None => Ok(inverse_transform(&spectrum)),
    }
}

/// Masks of `m` bins per axis-0 interval whose intersection over union is
/// `fraction` (up to rounding of the overlap to whole bins), centred on
/// `xi = 0`. On higher-dimensional grids both masks share the same
/// interval on the other axes.
pub fn overlap_masks(grid: &GridSpec, fraction: f64, bins: usize) -> Result<(MaskSpec, MaskSpec)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(parameter(format!(
            "overlap fraction {fraction} must lie in [0, 1]"
        )));
    }
    let n0 = grid.dims()[0];
    if bins == 0 || 2 * bins > n0 {
        return Err(parameter(format!(
            "{bins} bins per mask do not fit twice on an axis of {n0} bins"
        )));
    }
    let overlap = (2.0 * bins as f64 * fraction / (1.0 + fraction)).round() as usize;
    if (fraction > 0.0 && overlap == 0) || (fraction < 1.0 && overlap == bins) {
        return Err(parameter(format!(
            "overlap fraction {fraction} is not resolvable with {bins} bins"
        )));
    }
    let union = 2 * bins - overlap;
    let start = n0 / 2 - union / 2;
    let mut lo_f = vec![start];
    let mut hi_f = vec![start + bins];
    let mut lo_g = vec![start + bins - overlap];
    let mut hi_g = vec![start + union];
    for &len in &grid.dims()[1..] {
        let (lo, hi) = (len / 4, len - len / 4);
        lo_f.push(lo);
        hi_f.push(hi);
        lo_g.push(lo);
        hi_g.push(hi);
    }
    Ok((
        MaskSpec::Box { lo: lo_f, hi: hi_f },
        MaskSpec::Box { lo: lo_g, hi: hi_g },
    ))
}

/// Independent band-limited fields on masks with the given overlap.
pub fn overlap_pair(
    seed: u64,
    grid: &GridSpec,
    fraction: f64,
    bins: usize,
    law: AmplitudeLaw,
) -> Result<(GenSpec, GenSpec)> {
    let (mf, mg) = overlap_masks(grid, fraction, bins)?;
    let spec = |mask, stream| {
        GenSpec::new(
            seed,
            grid.clone(),
            Family::BandLimitedRandom {
                mask,
                law,
                stream,
                scale: 1.0,
            },
        )
    };
    Ok((spec(mf, 0), spec(mg, 1)))
}

/// Spectrum of a generated field, for tests that need `f^` directly.
pub fn spectrum_of(spec: &GenSpec) -> Result<SpectralField> {
    Ok(forward_transform(&spec.generate()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{lp_norm, Exponent};

    #[test]
    fn gaussian_peak_and_resolution() {
        let grid = GridSpec::line(256, 0.1).unwrap();
        let k = 5.0;
        let f = gaussian(&grid, 1.0, &[0.0], 1.0, &[k]).unwrap();
        let spec = forward_transform(&f);
        let peak = (0..grid.len())
            .max_by(|&a, &b| spec.values()[a].norm().total_cmp(&spec.values()[b].norm()))
            .unwrap();
        assert!((grid.frequency(peak)[0] - k).abs() <= grid.frequency_step(0));
        assert!(gaussian(&grid, 1.0, &[0.0], 0.39, &[0.0]).is_err());
        assert!(gaussian(&grid, 1.0, &[0.0], 4.0, &[0.0]).is_err());
        let a = GenSpec::new(
            1,
            grid.clone(),
            Family::Gaussian {
                amplitude: 1.0,
                center: vec![0.0],
                width: 1.0,
            },
        );
        let b = GenSpec {
            seed: 2,
            ..a.clone()
        };
        assert_eq!(a.generate().unwrap(), b.generate().unwrap());
    }

    #[test]
    fn single_bin_is_plane_wave() {
        let grid = GridSpec::line(32, 0.5).unwrap();
        let mask = SupportMask::from_indices(grid.clone(), [20]).unwrap();
        let f = band_limited_random(9, 0, &mask, AmplitudeLaw::ComplexGaussian).unwrap();
        let xi = grid.frequency(20)[0];
        let v0 = f.values()[0];
        for (j, v) in f.values().iter().enumerate() {
            let x = grid.position(j)[0];
            let x0 = grid.position(0)[0];
            let expected = v0 * Complex64::from_polar(1.0, xi * (x - x0));
            assert!((v - expected).norm() < 1e-12 * v0.norm());
        }
    }

    #[test]
    fn deterministic_and_exact_masks() {
        let grid = GridSpec::square(16, 0.5).unwrap();
        let mask = MaskSpec::Box {
            lo: vec![3, 4],
            hi: vec![9, 12],
        };
        let spec = GenSpec::new(
            77,
            grid.clone(),
            Family::BandLimitedRandom {
                mask: mask.clone(),
                law: AmplitudeLaw::ComplexGaussian,
                stream: 0,
                scale: 1.0,
            },
        );
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a, b);
        let m = mask.build(&grid).unwrap();
        assert_eq!(a.mask(), Some(&m));
        assert!(
            band_limited_random(1, 0, &SupportMask::empty(grid), AmplitudeLaw::RealGaussian)
                .is_err()
        );
    }

    #[test]
    fn real_law_gives_real_spectrum() {
        let grid = GridSpec::line(64, 0.25).unwrap();
        let mask = SupportMask::from_indices(grid.clone(), 20..40).unwrap();
        let f = band_limited_random(3, 0, &mask, AmplitudeLaw::RealGaussian).unwrap();
        let spec = forward_transform(&f);
        let peak = spec.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(spec.values().iter().all(|v| v.im.abs() <= 1e-12 * peak));
    }

    #[test]
    fn norm_concentration() {
        let grid = GridSpec::line(128, 0.25).unwrap();
        let mask = SupportMask::from_indices(grid.clone(), 40..90).unwrap();
        let mean: f64 = (0..100)
            .map(|seed| {
                let f = band_limited_random(seed, 0, &mask, AmplitudeLaw::ComplexGaussian).unwrap();
                lp_norm(&f, Exponent::Finite(2.0)).powi(2)
            })
            .sum::<f64>()
            / 100.0;
        let expected = 50.0 * grid.frequency_cell_volume();
        assert!((mean / expected - 1.0).abs() < 0.1, "{mean} vs {expected}");
    }

    #[test]
    fn overlap_fractions_by_counting() {
        let grid = GridSpec::line(128, 0.25).unwrap();
        for fraction in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let (a, b) = overlap_masks(&grid, fraction, 32).unwrap();
            let (a, b) = (a.build(&grid).unwrap(), b.build(&grid).unwrap());
            let inter = a.intersect(&b).unwrap().count() as f64;
            let union = a.union(&b).unwrap().count() as f64;
            let bin = 1.0 / union;
            assert!((inter / union - fraction).abs() <= bin, "{fraction}");
            if fraction == 0.0 {
                assert_eq!(inter, 0.0);
            }
            if fraction == 1.0 {
                assert_eq!(a, b);
            }
        }
        assert!(overlap_masks(&grid, 1.5, 32).is_err());
        assert!(overlap_masks(&grid, 0.01, 4).is_err());
        assert!(overlap_masks(&grid, 0.5, 100).is_err());
    }

    #[test]
    fn genspec_json_round_trip() {
        let grid = GridSpec::line(32, 0.5).unwrap();
        let spec = GenSpec::new(
            5,
            grid,
            Family::Transformed {
                base: Box::new(Family::BandLimitedRandom {
                    mask: MaskSpec::Indices {
                        indices: vec![1, 2, 3],
                    },
                    law: AmplitudeLaw::RealGaussian,
                    stream: 2,
                    scale: 0.5,
                }),
                element: AmbiguityElement::shift(vec![3]),
            },
        );
        let text = serde_json::to_string(&spec).unwrap();
        let back: GenSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.generate().unwrap(), spec.generate().unwrap());
    }
}
