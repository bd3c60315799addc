//! Uniform centred grids on `R^n` and the discrete unitary Fourier pair.
//!
//! Spatial nodes sit at `x_j = (j - N/2) h` and frequency nodes at
//! `xi_k = 2 pi (k - N/2) / (N h)`, componentwise. The forward transform is
//! the rectangle-rule quadrature of
//!
//! ```text
//! f^(xi) = (2 pi)^(-n/2) * integral exp(-i x.xi) f(x) dx
//! ```
//!
//! evaluated with an FFT and centring phase factors. With cell volumes `h^n`
//! on the spatial side and `prod(dxi_i)` on the spectral side the pair is
//! exactly unitary, so discrete Parseval holds up to rounding.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{parameter, structural, Result};
use crate::support::SupportMask;

/// Uniform grid with the same spacing on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dims: Vec<usize>,
    spacing: f64,
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, spacing: f64) -> Result<Self> {
        if dims.is_empty() {
            return Err(parameter("grid needs at least one axis"));
        }
        if let Some(&n) = dims.iter().find(|&&n| n < 4 || n % 2 != 0) {
            return Err(parameter(format!(
                "axis length {n} must be even and at least 4"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(parameter(format!("spacing {spacing} must be positive")));
        }
        Ok(Self { dims, spacing })
    }

    /// One-dimensional grid with `n` nodes.
    pub fn line(n: usize, spacing: f64) -> Result<Self> {
        Self::new(vec![n], spacing)
    }

    /// Square grid of `n x n` nodes.
    pub fn square(n: usize, spacing: f64) -> Result<Self> {
        Self::new(vec![n, n], spacing)
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Frequency spacing `2 pi / (N_i h)` along `axis`.
    pub fn frequency_step(&self, axis: usize) -> f64 {
        2.0 * PI / (self.dims[axis] as f64 * self.spacing)
    }

    /// Frequency cell volume `prod(dxi_i)`.
    pub fn frequency_cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.frequency_step(a)).product()
    }

    /// Side length `N_i h` of the periodic box along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        self.dims[axis] as f64 * self.spacing
    }

    /// Spatial node coordinates along one axis.
    pub fn spatial_nodes(&self, axis: usize) -> Vec<f64> {
        let n = self.dims[axis];
        (0..n)
            .map(|j| (j as f64 - (n / 2) as f64) * self.spacing)
            .collect()
    }

    /// Frequency node coordinates along one axis.
    pub fn frequency_nodes(&self, axis: usize) -> Vec<f64> {
        let n = self.dims[axis];
        let step = self.frequency_step(axis);
        (0..n).map(|k| (k as f64 - (n / 2) as f64) * step).collect()
    }

    /// Multi-index of a row-major flat index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (slot, &n) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    /// Row-major flat index of a multi-index; components are taken modulo
    /// the axis lengths.
    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + i % n)
    }

    /// Frequency vector at a flat index.
    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(a, &k)| (k as f64 - (self.dims[a] / 2) as f64) * self.frequency_step(a))
            .collect()
    }

    /// Spatial position at a flat index.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(a, &j)| (j as f64 - (self.dims[a] / 2) as f64) * self.spacing)
            .collect()
    }

    /// `|xi_k|^2` for every frequency node, row-major.
    pub fn frequency_sq_norms(&self) -> Vec<f64> {
        self.separable_sum(|a| self.frequency_nodes(a).into_iter().map(|x| x * x).collect())
    }

    /// `|x_j|^2` for every spatial node, row-major.
    pub fn spatial_sq_norms(&self) -> Vec<f64> {
        self.separable_sum(|a| self.spatial_nodes(a).into_iter().map(|x| x * x).collect())
    }

    /// Index of the node at the origin (each component `N_i / 2`).
    pub fn origin_index(&self) -> usize {
        let mid: Vec<usize> = self.dims.iter().map(|n| n / 2).collect();
        self.ravel(&mid)
    }

    /// Row-major sum over axes of per-axis tables.
    fn separable_sum(&self, per_axis: impl Fn(usize) -> Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0];
        for a in 0..self.dim() {
            let table = per_axis(a);
            out = out
                .iter()
                .flat_map(|&acc| table.iter().map(move |&v| acc + v))
                .collect();
        }
        out
    }
}

/// Complex samples at the spatial nodes of a grid.
///
/// A field may carry a declared spectral support: an exact mask attached by
/// whoever built the spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<Complex64>,
    mask: Option<SupportMask>,
}

/// Complex samples at the frequency nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

fn check_values(grid: &GridSpec, values: &[Complex64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(structural(format!(
            "expected {} samples, got {}",
            grid.len(),
            values.len()
        )));
    }
    if values
        .iter()
        .any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(parameter("field contains non-finite samples"));
    }
    Ok(())
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        check_values(&grid, &values)?;
        Ok(Self {
            grid,
            values,
            mask: None,
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let values = vec![Complex64::default(); grid.len()];
        Self {
            grid,
            values,
            mask: None,
        }
    }

    /// Samples `f(x_j)` of a closure evaluated at every spatial node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|j| f(&grid.position(j))).collect();
        Self::new(grid, values)
    }

    /// Attach a declared spectral support.
    pub fn with_mask(mut self, mask: SupportMask) -> Result<Self> {
        if mask.grid() != &self.grid {
            return Err(structural("declared mask lives on a different grid"));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Declared spectral support, if any.
    pub fn mask(&self) -> Option<&SupportMask> {
        self.mask.as_ref()
    }

    /// `self - other`; the declared mask is dropped.
    pub fn sub(&self, other: &SampledField) -> Result<SampledField> {
        same_grid(&self.grid, &other.grid)?;
        Ok(SampledField {
            grid: self.grid.clone(),
            values: zip_with(&self.values, &other.values, |a, b| a - b),
            mask: None,
        })
    }

    /// `alpha * self + beta * other`; the declared mask is dropped.
    pub fn combine(
        &self,
        alpha: Complex64,
        other: &SampledField,
        beta: Complex64,
    ) -> Result<SampledField> {
        same_grid(&self.grid, &other.grid)?;
        Ok(SampledField {
            grid: self.grid.clone(),
            values: zip_with(&self.values, &other.values, |a, b| alpha * a + beta * b),
            mask: None,
        })
    }

    /// Pointwise scaling; the declared mask is kept (scaling by zero keeps
    /// a superset of the support, which callers must not rely on).
    pub fn scale(&self, c: Complex64) -> SampledField {
        SampledField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Circular shift by `m` cells per axis: `out_j = f_{j - m}`.
    pub fn circular_shift(&self, shift: &[i64]) -> Result<SampledField> {
        if shift.len() != self.grid.dim() {
            return Err(structural("shift has the wrong number of axes"));
        }
        let dims = self.grid.dims();
        let mut out = vec![Complex64::default(); self.values.len()];
        for (flat, v) in self.values.iter().enumerate() {
            let idx: Vec<usize> = self
                .grid
                .unravel(flat)
                .iter()
                .zip(shift)
                .zip(dims)
                .map(|((&j, &m), &n)| (j as i64 + m).rem_euclid(n as i64) as usize)
                .collect();
            out[self.grid.ravel(&idx)] = *v;
        }
        Ok(SampledField {
            grid: self.grid.clone(),
            values: out,
            mask: self.mask.clone(),
        })
    }

    /// Conjugate reflection `f(x) -> conj(f(-x))` realised by the index map
    /// `j -> (N - j) mod N`. The spectrum is conjugated pointwise, so the
    /// declared support is unchanged.
    pub fn conjugate_reflect(&self) -> SampledField {
        let dims = self.grid.dims();
        let values = (0..self.values.len())
            .map(|flat| {
                let src: Vec<usize> = self
                    .grid
                    .unravel(flat)
                    .iter()
                    .zip(dims)
                    .map(|(&j, &n)| (n - j) % n)
                    .collect();
                self.values[self.grid.ravel(&src)].conj()
            })
            .collect();
        SampledField {
            grid: self.grid.clone(),
            values,
            mask: self.mask.clone(),
        }
    }
}

impl SpectralField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        check_values(&grid, &values)?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let values = vec![Complex64::default(); grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Pointwise product with a real weight table.
    pub fn weighted(&self, weights: &[f64]) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(weights)
                .map(|(v, w)| v * w)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        same_grid(&self.grid, &other.grid)?;
        Ok(SpectralField {
            grid: self.grid.clone(),
            values: zip_with(&self.values, &other.values, |a, b| a - b),
        })
    }
}

pub(crate) fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(structural(format!(
            "grid mismatch: {:?}/{} vs {:?}/{}",
            a.dims, a.spacing, b.dims, b.spacing
        )));
    }
    Ok(())
}

fn zip_with(
    a: &[Complex64],
    b: &[Complex64],
    f: impl Fn(Complex64, Complex64) -> Complex64,
) -> Vec<Complex64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalised FFT applied along every axis in place.
pub(crate) fn fft_nd(data: &mut [Complex64], dims: &[usize], direction: FftDirection) {
    for axis in 0..dims.len() {
        let n = dims[axis];
        let plan = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
        for_each_line(data, dims, axis, |line| plan.process(line));
    }
}

/// Runs `f` on every 1-D line along `axis`, copying strided data through a
/// scratch buffer.
fn for_each_line(
    data: &mut [Complex64],
    dims: &[usize],
    axis: usize,
    mut f: impl FnMut(&mut [Complex64]),
) {
    let n = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut buf = vec![Complex64::default(); n];
    for o in 0..outer {
        for i in 0..stride {
            let base = o * n * stride + i;
            if stride == 1 {
                f(&mut data[base..base + n]);
                continue;
            }
            for (j, slot) in buf.iter_mut().enumerate() {
                *slot = data[base + j * stride];
            }
            f(&mut buf);
            for (j, v) in buf.iter().enumerate() {
                data[base + j * stride] = *v;
            }
        }
    }
}

/// Centred, scaled transform along every axis.
///
/// Per axis `x_j xi_k = 2 pi jk/N - pi j - pi k + pi N/2`, so the centred
/// kernel is the plain DFT kernel wrapped in `(-1)^j` and `(-1)^(k + N/2)`.
fn centred_transform(values: &mut [Complex64], grid: &GridSpec, direction: FftDirection) {
    let dims = grid.dims();
    for axis in 0..dims.len() {
        let n = dims[axis];
        let scale = match direction {
            FftDirection::Forward => grid.spacing() / (2.0 * PI).sqrt(),
            FftDirection::Inverse => grid.frequency_step(axis) / (2.0 * PI).sqrt(),
        };
        let half_sign = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        let plan = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
        for_each_line(values, dims, axis, |line| {
            for (j, v) in line.iter_mut().enumerate() {
                if j % 2 == 1 {
                    *v = -*v;
                }
            }
            plan.process(line);
            for (k, v) in line.iter_mut().enumerate() {
                let sign = if k % 2 == 1 { -half_sign } else { half_sign };
                *v *= sign * scale;
            }
        });
    }
}

/// Discrete realisation of the unitary Fourier transform.
pub fn forward_transform(f: &SampledField) -> SpectralField {
    let mut values = f.values.clone();
    centred_transform(&mut values, &f.grid, FftDirection::Forward);
    SpectralField {
        grid: f.grid.clone(),
        values,
    }
}

/// Inverse of [`forward_transform`].
pub fn inverse_transform(spectrum: &SpectralField) -> SampledField {
    let mut values = spectrum.values.clone();
    centred_transform(&mut values, &spectrum.grid, FftDirection::Inverse);
    SampledField {
        grid: spectrum.grid.clone(),
        values,
        mask: None,
    }
}
