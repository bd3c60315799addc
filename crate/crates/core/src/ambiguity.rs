//! Trivial ambiguities of the phase problem and quotient distances.
//!
//! The parametric family `P = e^{i theta} T_tau R^b` (conjugate reflection
//! first, then translation, then a global phase) is a group: composing two
//! elements stays in the family and every element with `b = 1` is an
//! involution. Quotient distances `inf_P ||f - P g||_{H^s}` over a subgroup
//! are found exhaustively over reflections and circular shifts, with the
//! optimal phase in closed form from one weighted cross-correlation per
//! reflection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{parameter, structural, Error, Result};
use crate::field::{
    fft_nd, forward_transform, inverse_transform, same_grid, GridSpec, SampledField, SpectralField,
};
use crate::norms::{
    bracket_weights, lp_norm, magnitude_gap_sq, sobolev_inner, sobolev_norm, sobolev_norm_sq,
    Exponent,
};
use crate::support::{resolve, MaskProvenance, DEFAULT_TAU_REL};

/// One element `e^{i theta} T_tau R^b` of the parametric ambiguity group,
/// with `tau = shift * h + tau_frac`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityElement {
    pub theta: f64,
    pub shift: Vec<i64>,
    pub tau_frac: Vec<f64>,
    #[serde(with = "bit")]
    pub reflect: bool,
}

mod bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!(
                "reflect must be 0 or 1, got {other}"
            ))),
        }
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

impl AmbiguityElement {
    pub fn identity(dim: usize) -> Self {
        Self {
            theta: 0.0,
            shift: vec![0; dim],
            tau_frac: vec![0.0; dim],
            reflect: false,
        }
    }

    pub fn phase(dim: usize, theta: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            ..Self::identity(dim)
        }
    }

    pub fn shift(shift: Vec<i64>) -> Self {
        Self {
            tau_frac: vec![0.0; shift.len()],
            shift,
            theta: 0.0,
            reflect: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn is_identity(&self) -> bool {
        self.theta == 0.0
            && !self.reflect
            && self.shift.iter().all(|&m| m == 0)
            && self.tau_frac.iter().all(|&t| t == 0.0)
    }

    /// Group inverse. Elements with a reflection are involutions.
    pub fn inverse(&self) -> Self {
        if self.reflect {
            return self.clone();
        }
        Self {
            theta: wrap_angle(-self.theta),
            shift: self.shift.iter().map(|m| -m).collect(),
            tau_frac: self.tau_frac.iter().map(|t| -t).collect(),
            reflect: false,
        }
    }

    fn check_dim(&self, grid: &GridSpec) -> Result<()> {
        if self.shift.len() != grid.dim() || self.tau_frac.len() != grid.dim() {
            return Err(structural(format!(
                "element has {} axes, grid has {}",
                self.shift.len(),
                grid.dim()
            )));
        }
        Ok(())
    }

    /// Total translation per axis, in spatial units.
    pub fn translation(&self, spacing: f64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(&self.tau_frac)
            .map(|(&m, &t)| m as f64 * spacing + t)
            .collect()
    }

    /// Action on a spectrum: `e^{i theta} e^{-i tau.xi} (conj if b)(F)`.
    pub fn act_on_spectrum(&self, spectrum: &SpectralField) -> Result<SpectralField> {
        let grid = spectrum.grid();
        self.check_dim(grid)?;
        let tau = self.translation(grid.spacing());
        let rotate = Complex64::from_polar(1.0, self.theta);
        let values = spectrum
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let v = if self.reflect { v.conj() } else { v };
                let phase: f64 = grid.frequency(k).iter().zip(&tau).map(|(x, t)| x * t).sum();
                rotate * Complex64::from_polar(1.0, -phase) * v
            })
            .collect();
        SpectralField::new(grid.clone(), values)
    }
}

/// Applies `e` to `f`. Reflection and integer shifts are exact index maps;
/// a fractional translation goes through the spectrum.
pub fn apply_element(e: &AmbiguityElement, f: &SampledField) -> Result<SampledField> {
    e.check_dim(f.grid())?;
    let mut out = if e.reflect {
        f.conjugate_reflect()
    } else {
        f.clone()
    };
    if e.shift.iter().any(|&m| m != 0) {
        out = out.circular_shift(&e.shift)?;
    }
    if e.tau_frac.iter().any(|&t| t != 0.0) {
        let frac = AmbiguityElement {
            theta: 0.0,
            shift: vec![0; e.dim()],
            tau_frac: e.tau_frac.clone(),
            reflect: false,
        };
        let moved = inverse_transform(&frac.act_on_spectrum(&forward_transform(&out))?);
        out = match out.mask() {
            Some(m) => moved.with_mask(m.clone())?,
            None => moved,
        };
    }
    if e.theta != 0.0 {
        out = out.scale(Complex64::from_polar(1.0, e.theta));
    }
    Ok(out)
}

/// Which generator families a subgroup `G` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GroupSpec {
    pub global_phase: bool,
    pub translations: bool,
    pub conjugate_reflection: bool,
    /// Parabolic sub-cell refinement of the best grid shift.
    #[serde(default)]
    pub subgrid: bool,
}

impl GroupSpec {
    pub const IDENTITY: GroupSpec = GroupSpec {
        global_phase: false,
        translations: false,
        conjugate_reflection: false,
        subgrid: false,
    };

    pub const PHASE: GroupSpec = GroupSpec {
        global_phase: true,
        ..GroupSpec::IDENTITY
    };

    pub const PHASE_SHIFT: GroupSpec = GroupSpec {
        global_phase: true,
        translations: true,
        ..GroupSpec::IDENTITY
    };

    pub const FULL: GroupSpec = GroupSpec {
        global_phase: true,
        translations: true,
        conjugate_reflection: true,
        subgrid: false,
    };

    pub fn is_identity(&self) -> bool {
        !(self.global_phase || self.translations || self.conjugate_reflection)
    }

    pub fn with_subgrid(mut self, on: bool) -> Self {
        self.subgrid = on;
        self
    }

    /// Whether `e` belongs to this subgroup.
    pub fn contains(&self, e: &AmbiguityElement) -> bool {
        (self.global_phase || e.theta == 0.0)
            && (self.conjugate_reflection || !e.reflect)
            && (self.translations
                || (e.shift.iter().all(|&m| m == 0) && e.tau_frac.iter().all(|&t| t == 0.0)))
    }

    /// `G1 <= G2` in the lattice of generator flags.
    pub fn is_subgroup_of(&self, other: &GroupSpec) -> bool {
        (!self.global_phase || other.global_phase)
            && (!self.translations || other.translations)
            && (!self.conjugate_reflection || other.conjugate_reflection)
    }

    /// Every flag subset of this group (including the identity and itself),
    /// in a fixed order.
    pub fn subgroups(&self) -> Vec<GroupSpec> {
        (0u8..8)
            .map(|bits| GroupSpec {
                global_phase: bits & 1 != 0,
                translations: bits & 2 != 0,
                conjugate_reflection: bits & 4 != 0,
                subgrid: self.subgrid,
            })
            .filter(|g| g.is_subgroup_of(self))
            .collect()
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("id");
        }
        let mut parts = Vec::new();
        if self.global_phase {
            parts.push("phase");
        }
        if self.translations {
            parts.push("shift");
        }
        if self.conjugate_reflection {
            parts.push("reflect");
        }
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut g = GroupSpec::IDENTITY;
        if s == "id" || s == "identity" {
            return Ok(g);
        }
        for token in s.split('+') {
            match token.trim() {
                "phase" => g.global_phase = true,
                "shift" | "translation" => g.translations = true,
                "reflect" | "reflection" => g.conjugate_reflection = true,
                "subgrid" => g.subgrid = true,
                other => return Err(parameter(format!("unknown group generator `{other}`"))),
            }
        }
        Ok(g)
    }
}

/// Closed-form optimal global phase for `inf_theta ||f - e^{i theta} g||_{H^s}`.
///
/// Returns `theta* = arg <f, g>_s` in `[0, 2 pi)` and the distance, evaluated
/// directly at `theta*`.
pub fn optimal_phase(f: &SampledField, g: &SampledField, s: f64) -> Result<(f64, f64)> {
    same_grid(f.grid(), g.grid())?;
    let fs = forward_transform(f);
    let gs = forward_transform(g);
    let inner = sobolev_inner(&fs, &gs, s)?;
    let theta = wrap_angle(inner.arg());
    let rotated = AmbiguityElement::phase(f.grid().dim(), theta).act_on_spectrum(&gs)?;
    Ok((theta, sobolev_norm(&fs.sub(&rotated)?, s)))
}

/// Result of a quotient-distance search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientDistance {
    /// `||f - P g||_{H^s}` evaluated directly at the witness.
    pub distance: f64,
    /// Minimising element `P`.
    pub witness: AmbiguityElement,
}

/// Row-major multi-indices of every circular shift, as signed offsets in
/// `[0, N_i)`.
fn shift_of(grid: &GridSpec, flat: usize) -> Vec<i64> {
    grid.unravel(flat).into_iter().map(|m| m as i64).collect()
}

/// Objective pieces shared by the search and its refinement.
struct Search<'a> {
    grid: &'a GridSpec,
    group: GroupSpec,
    base: f64,
}

impl Search<'_> {
    /// `||f||^2 + ||g||^2 - 2 |C|` (phase free) or `- 2 Re C`.
    fn objective(&self, c: Complex64) -> f64 {
        if self.group.global_phase {
            self.base - 2.0 * c.norm()
        } else {
            self.base - 2.0 * c.re
        }
    }

    fn theta(&self, c: Complex64) -> f64 {
        if self.group.global_phase {
            wrap_angle(c.arg())
        } else {
            0.0
        }
    }

    /// `C(tau) = dxi * sum w_k e^{i tau.xi_k}` for a continuous translation.
    fn correlation_at(&self, weights: &[Complex64], tau: &[f64]) -> Complex64 {
        let sum: Complex64 = weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let phase: f64 = self
                    .grid
                    .frequency(k)
                    .iter()
                    .zip(tau)
                    .map(|(x, t)| x * t)
                    .sum();
                w * Complex64::from_polar(1.0, phase)
            })
            .sum();
        sum * self.grid.frequency_cell_volume()
    }
}

/// All `C(m) = <f, T_m g'>_s` for circular shifts `m`, by one inverse FFT of
/// `<xi>^{2s} f^ conj(g'^)`.
fn shift_correlations(grid: &GridSpec, weights: &[Complex64]) -> Vec<Complex64> {
    let mut corr = weights.to_vec();
    fft_nd(&mut corr, grid.dims(), FftDirection::Inverse);
    let cell = grid.frequency_cell_volume();
    corr.iter_mut().enumerate().for_each(|(flat, c)| {
        let parity: usize = grid.unravel(flat).iter().sum();
        let sign = if parity.is_multiple_of(2) {
            cell
        } else {
            -cell
        };
        *c *= sign;
    });
    corr
}

/// `d([f],[g]) = inf_{P in G} ||f - P g||_{H^s}` over the parametric
/// subgroup `G`.
///
/// Ties between candidates resolve to the smallest reflection bit, then the
/// lexicographically smallest shift in `[0, N_i)`.
pub fn quotient_distance(
    f: &SampledField,
    g: &SampledField,
    s: f64,
    group: GroupSpec,
) -> Result<QuotientDistance> {
    same_grid(f.grid(), g.grid())?;
    let grid = f.grid();
    let fs = forward_transform(f);
    let gs = forward_transform(g);
    quotient_distance_spectral(grid, &fs, &gs, s, group)
}

pub(crate) fn quotient_distance_spectral(
    grid: &GridSpec,
    fs: &SpectralField,
    gs: &SpectralField,
    s: f64,
    group: GroupSpec,
) -> Result<QuotientDistance> {
    let dim = grid.dim();
    let w2s = bracket_weights(grid, 2.0 * s);
    let search = Search {
        grid,
        group,
        base: sobolev_norm_sq(fs, s) + sobolev_norm_sq(gs, s),
    };

    let reflections: &[bool] = if group.conjugate_reflection {
        &[false, true]
    } else {
        &[false]
    };

    // (objective, element, weights) of the incumbent
    let mut best: Option<(f64, AmbiguityElement, Vec<Complex64>)> = None;
    for &reflect in reflections {
        let weights: Vec<Complex64> = fs
            .values()
            .iter()
            .zip(gs.values())
            .zip(&w2s)
            .map(|((a, b), w)| {
                let b = if reflect { *b } else { b.conj() };
                a * b * w
            })
            .collect();
        let candidates: Vec<(Vec<i64>, Complex64)> = if group.translations {
            shift_correlations(grid, &weights)
                .into_iter()
                .enumerate()
                .map(|(flat, c)| (shift_of(grid, flat), c))
                .collect()
        } else {
            let c: Complex64 = weights.iter().sum::<Complex64>() * grid.frequency_cell_volume();
            vec![(vec![0; dim], c)]
        };
        let mut local: Option<(f64, AmbiguityElement)> = None;
        let mut objectives = Vec::with_capacity(candidates.len());
        for (shift, c) in candidates {
            let j = search.objective(c);
            objectives.push(j);
            if local.as_ref().is_none_or(|(bj, _)| j < *bj) {
                local = Some((
                    j,
                    AmbiguityElement {
                        theta: search.theta(c),
                        shift,
                        tau_frac: vec![0.0; dim],
                        reflect,
                    },
                ));
            }
        }
        let (mut j, mut element) = local.expect("at least one candidate");
        if group.translations && group.subgrid {
            if let Some((jr, er)) = refine_subgrid(&search, &weights, &objectives, &element) {
                if jr < j {
                    j = jr;
                    element = er;
                }
            }
        }
        if best.as_ref().is_none_or(|(bj, _, _)| j < *bj) {
            best = Some((j, element, weights));
        }
    }
    let (_, witness, _) = best.expect("at least one reflection");

    let direct = |e: &AmbiguityElement| -> Result<f64> {
        Ok(sobolev_norm(&fs.sub(&e.act_on_spectrum(gs)?)?, s))
    };
    let distance = direct(&witness)?;
    let identity = AmbiguityElement::identity(dim);
    let plain = direct(&identity)?;
    if plain < distance {
        return Ok(QuotientDistance {
            distance: plain,
            witness: identity,
        });
    }
    Ok(QuotientDistance { distance, witness })
}

/// Parabolic vertex through the objective at `m-1, m, m+1` on each axis;
/// evaluates the continuous translation at the vertex.
fn refine_subgrid(
    search: &Search<'_>,
    weights: &[Complex64],
    objectives: &[f64],
    element: &AmbiguityElement,
) -> Option<(f64, AmbiguityElement)> {
    let grid = search.grid;
    let centre: Vec<usize> = element.shift.iter().map(|&m| m as usize).collect();
    let j0 = objectives[grid.ravel(&centre)];
    let mut offsets = vec![0.0; grid.dim()];
    for (axis, slot) in offsets.iter_mut().enumerate() {
        let n = grid.dims()[axis];
        let mut lo = centre.clone();
        lo[axis] = (centre[axis] + n - 1) % n;
        let mut hi = centre.clone();
        hi[axis] = (centre[axis] + 1) % n;
        let (jm, jp) = (objectives[grid.ravel(&lo)], objectives[grid.ravel(&hi)]);
        let curvature = jm - 2.0 * j0 + jp;
        if curvature > 0.0 {
            *slot = ((jm - jp) / (2.0 * curvature)).clamp(-0.5, 0.5);
        }
    }
    if offsets.iter().all(|&d| d == 0.0) {
        return None;
    }
    let h = grid.spacing();
    let tau_frac: Vec<f64> = offsets.iter().map(|d| d * h).collect();
    let tau: Vec<f64> = element
        .shift
        .iter()
        .zip(&tau_frac)
        .map(|(&m, t)| m as f64 * h + t)
        .collect();
    let c = search.correlation_at(weights, &tau);
    Some((
        search.objective(c),
        AmbiguityElement {
            theta: search.theta(c),
            shift: element.shift.clone(),
            tau_frac,
            reflect: element.reflect,
        },
    ))
}

/// The unimodular multiplier that makes `M_a g` closest to `f` in `L^2`.
#[derive(Debug, Clone)]
pub struct UnimodularFit {
    /// `a = f^/|f^| * conj(g^)/|g^|` off `A`, and `1` on
    /// `A = {f^ = 0 or g^ = 0}`.
    pub multiplier: SpectralField,
    /// `||f - M_a g||_2`, computed on the spatial side.
    pub distance: f64,
    /// `|| |f^| - |g^| ||_2`, computed on the spectral side.
    pub magnitude_gap: f64,
    pub provenance: MaskProvenance,
}

pub fn unimodular_optimal_multiplier(f: &SampledField, g: &SampledField) -> Result<UnimodularFit> {
    same_grid(f.grid(), g.grid())?;
    let fr = resolve(f, DEFAULT_TAU_REL)?;
    let gr = resolve(g, DEFAULT_TAU_REL)?;
    let provenance =
        if fr.provenance == MaskProvenance::Declared && gr.provenance == MaskProvenance::Declared {
            MaskProvenance::Declared
        } else {
            MaskProvenance::Detected
        };
    let both = fr.mask.intersect(&gr.mask)?;
    let one = Complex64::new(1.0, 0.0);
    let a: Vec<Complex64> = (0..f.grid().len())
        .map(|k| {
            let (x, y) = (fr.spectrum.values()[k], gr.spectrum.values()[k]);
            if both.contains(k) && x.norm() > 0.0 && y.norm() > 0.0 {
                x / x.norm() * y.conj() / y.norm()
            } else {
                one
            }
        })
        .collect();
    let multiplier = SpectralField::new(f.grid().clone(), a)?;

    let g_hat = forward_transform(g);
    let moved: Vec<Complex64> = g_hat
        .values()
        .iter()
        .zip(multiplier.values())
        .map(|(v, a)| v * a)
        .collect();
    let mg = inverse_transform(&SpectralField::new(f.grid().clone(), moved)?);
    let distance = lp_norm(&f.sub(&mg)?, Exponent::Finite(2.0));
    let magnitude_gap = magnitude_gap_sq(&fr.spectrum, &gr.spectrum, 0.0)?.sqrt();
    Ok(UnimodularFit {
        multiplier,
        distance,
        magnitude_gap,
        provenance,
    })
}
