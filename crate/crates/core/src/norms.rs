//! Quadrature norms: `L^p`, Sobolev `H^s`, Bessel potential `H^{t,p}` and the
//! bracket-weighted norm of a characteristic function.
//!
//! Every norm uses the rectangle rule with the cell volumes of the grid side
//! it lives on, so the Hölder and Parseval steps of the stability estimates
//! hold exactly at the discrete level.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::{beckner_constant, ConstantMode};
use crate::error::{parameter, structural, Result};
use crate::field::{forward_transform, inverse_transform, GridSpec, SampledField, SpectralField};
use crate::support::SupportMask;

/// An exponent in `[1, inf]` with a dedicated infinite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            return Ok(Exponent::Infinite);
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(parameter(format!("exponent {p} must be >= 1")));
        }
        Ok(Exponent::Finite(p))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinite => 0.0,
        }
    }

    /// Hölder conjugate `p/(p-1)`; `1 <-> inf`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinite => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinite,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    /// `p^(1/p)`, whose limit at infinity is 1.
    pub fn self_root(self) -> f64 {
        match self {
            Exponent::Finite(p) => p.powf(1.0 / p),
            Exponent::Infinite => 1.0,
        }
    }

    /// `p / 2`; used for `q = p'/2`.
    pub fn half(self) -> Exponent {
        match self {
            Exponent::Finite(p) => Exponent::Finite(p / 2.0),
            Exponent::Infinite => Exponent::Infinite,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

/// The orders `s`, `t` and integrability `p` of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    /// Sobolev order of the distance being bounded.
    pub s: f64,
    /// Order of the a priori Bessel potential norm.
    pub t: f64,
    /// Integrability of the a priori norm, in `[1, 2]`.
    pub p: f64,
}

impl StabilityParams {
    pub fn new(s: f64, t: f64, p: f64) -> Result<Self> {
        if !(s.is_finite() && t.is_finite()) {
            return Err(parameter("orders s and t must be finite"));
        }
        if !(1.0..=2.0).contains(&p) {
            return Err(parameter(format!("p = {p} must lie in [1, 2]")));
        }
        Ok(Self { s, t, p })
    }

    pub fn p_exponent(&self) -> Exponent {
        Exponent::Finite(self.p)
    }

    /// `p'`.
    pub fn conjugate(&self) -> Exponent {
        self.p_exponent().conjugate()
    }

    /// `q = p'/2`, the exponent put on `<xi>^{2t} |f^ - g^|^2`.
    pub fn q(&self) -> Exponent {
        self.conjugate().half()
    }

    /// `q' = p/(2-p)`, with `2/(2-2) = inf`.
    pub fn coefficient_exponent(&self) -> Exponent {
        if self.p == 2.0 {
            Exponent::Infinite
        } else {
            Exponent::Finite(self.p / (2.0 - self.p))
        }
    }

    /// `a = n (1/p - 1/2)`.
    pub fn threshold(&self, n: usize) -> f64 {
        n as f64 * (1.0 / self.p - 0.5)
    }

    /// Order `2s - 2t` of the coefficient weight.
    pub fn weight_order(&self) -> f64 {
        2.0 * self.s - 2.0 * self.t
    }
}

/// Japanese bracket `sqrt(1 + |xi|^2)`.
pub fn bracket(xi: &[f64]) -> f64 {
    (1.0 + xi.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// `<xi_k>^order` at every frequency node.
pub fn bracket_weights(grid: &GridSpec, order: f64) -> Vec<f64> {
    grid.frequency_sq_norms()
        .into_iter()
        .map(|r2| (1.0 + r2).powf(order / 2.0))
        .collect()
}

/// `(cell * sum |v|^p)^(1/p)`, or `max |v|` for `p = inf`.
fn quadrature_lp<I>(moduli: I, cell: f64, p: Exponent) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let peak = moduli.clone().fold(0.0, f64::max);
    match p {
        Exponent::Infinite => peak,
        _ if peak == 0.0 => 0.0,
        Exponent::Finite(p) => {
            let sum: f64 = moduli.map(|m| (m / peak).powf(p)).sum();
            peak * (cell * sum).powf(1.0 / p)
        }
    }
}

/// Spatial `L^p` norm with cell volume `h^n`.
pub fn lp_norm(f: &SampledField, p: Exponent) -> f64 {
    quadrature_lp(
        f.values().iter().map(|v| v.norm()),
        f.grid().cell_volume(),
        p,
    )
}

/// Spectral `L^p` norm with the frequency cell volume.
pub fn spectral_lp_norm(spectrum: &SpectralField, p: Exponent) -> f64 {
    quadrature_lp(
        spectrum.values().iter().map(|v| v.norm()),
        spectrum.grid().frequency_cell_volume(),
        p,
    )
}

/// Spectral `L^p` norm of an arbitrary real table on the frequency grid.
pub fn weighted_lp_norm(grid: &GridSpec, moduli: &[f64], p: Exponent) -> f64 {
    quadrature_lp(
        moduli.iter().map(|m| m.abs()),
        grid.frequency_cell_volume(),
        p,
    )
}

/// Sobolev inner product `<F, G>_s = dxi * sum <xi>^{2s} F conj(G)`.
pub fn sobolev_inner(a: &SpectralField, b: &SpectralField, s: f64) -> Result<Complex64> {
    if a.grid() != b.grid() {
        return Err(structural("spectra live on different grids"));
    }
    let w = bracket_weights(a.grid(), 2.0 * s);
    let sum: Complex64 = a
        .values()
        .iter()
        .zip(b.values())
        .zip(&w)
        .map(|((x, y), w)| x * y.conj() * w)
        .sum();
    Ok(sum * a.grid().frequency_cell_volume())
}

/// Squared Sobolev norm `dxi * sum <xi>^{2s} |F|^2`.
pub fn sobolev_norm_sq(spectrum: &SpectralField, s: f64) -> f64 {
    let w = bracket_weights(spectrum.grid(), 2.0 * s);
    let sum: f64 = spectrum
        .values()
        .iter()
        .zip(&w)
        .map(|(v, w)| v.norm_sqr() * w)
        .sum();
    sum * spectrum.grid().frequency_cell_volume()
}

/// `||u||_{H^s} = || <xi>^s u^ ||_2`, computed from the spectrum.
pub fn sobolev_norm(spectrum: &SpectralField, s: f64) -> f64 {
    sobolev_norm_sq(spectrum, s).sqrt()
}

/// Squared `H^s`-weighted `L^2` norm of a real spectral table, e.g.
/// `|f^| - |g^|`.
pub fn weighted_l2_sq(grid: &GridSpec, table: &[f64], s: f64) -> f64 {
    let w = bracket_weights(grid, 2.0 * s);
    table.iter().zip(&w).map(|(v, w)| v * v * w).sum::<f64>() * grid.frequency_cell_volume()
}

/// `|| <xi>^s (|F| - |G|) ||_2^2`, the magnitude-data term.
pub fn magnitude_gap_sq(a: &SpectralField, b: &SpectralField, s: f64) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(structural("spectra live on different grids"));
    }
    let gap: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x.norm() - y.norm())
        .collect();
    Ok(weighted_l2_sq(a.grid(), &gap, s))
}

/// `|| F^-1(<xi>^t F) ||_p` for a spectrum.
pub fn bessel_norm_of_spectrum(spectrum: &SpectralField, t: f64, p: Exponent) -> f64 {
    let potential = spectrum.weighted(&bracket_weights(spectrum.grid(), t));
    lp_norm(&inverse_transform(&potential), p)
}

/// Bessel potential norm `||f||_{H^{t,p}} = || F^-1(<xi>^t f^) ||_p`.
pub fn bessel_norm(f: &SampledField, t: f64, p: Exponent) -> f64 {
    if t == 0.0 {
        return lp_norm(f, p);
    }
    bessel_norm_of_spectrum(&forward_transform(f), t, p)
}

/// `|| chi_A <xi>^alpha ||_q` on the frequency grid; zero for an empty mask.
pub fn weight_norm(mask: &SupportMask, alpha: f64, q: Exponent) -> f64 {
    let grid = mask.grid();
    let sq = grid.frequency_sq_norms();
    match q {
        Exponent::Infinite => mask
            .indices()
            .map(|k| (1.0 + sq[k]).powf(alpha / 2.0))
            .fold(0.0, f64::max),
        Exponent::Finite(q) => {
            let sum: f64 = mask
                .indices()
                .map(|k| (1.0 + sq[k]).powf(alpha * q / 2.0))
                .sum();
            (grid.frequency_cell_volume() * sum).powf(1.0 / q)
        }
    }
}

/// Both sides of `||f^||_{p'} <= sqrt(c_{n,p}) ||f||_p`.
pub fn hausdorff_young_check(f: &SampledField, p: f64) -> Result<(f64, f64)> {
    let params = StabilityParams::new(0.0, 0.0, p)?;
    let c = beckner_constant(f.grid().dim(), p, ConstantMode::Beckner)?;
    let lhs = spectral_lp_norm(&forward_transform(f), params.conjugate());
    let rhs = c.sqrt() * lp_norm(f, params.p_exponent());
    Ok((lhs, rhs))
}
