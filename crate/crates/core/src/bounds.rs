//! Assembly of the stability estimates and their comparators.
//!
//! The main estimate bounds the (quotient) `H^s` distance by the magnitude
//! data term plus `c_{n,p} ||chi_{A_{f cap g}} <xi>^{2s-2t}||_{p/(2-p)}` times
//! the squared a priori `H^{t,p}` distance. Every step except the
//! Hausdorff–Young inequality is exact at the discrete level.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{quotient_distance_spectral, AmbiguityElement, GroupSpec};
use crate::error::{domain, parameter, Result};
use crate::field::{forward_transform, inverse_transform, same_grid, SampledField, SpectralField};
use crate::norms::{
    bracket_weights, lp_norm, magnitude_gap_sq, sobolev_norm, sobolev_norm_sq, spectral_lp_norm,
    weight_norm, Exponent, StabilityParams,
};
use crate::support::{resolve, MaskProvenance, Resolved, SupportMask, DEFAULT_TAU_REL};

/// Default relative tolerance on inequality margins.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Which value of `c_{n,p}` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantMode {
    /// Sharp constant converted to the unitary convention.
    #[default]
    Beckner,
    /// The admissible upper bound `c_{n,p} = 1`.
    One,
}

/// Squared operator norm of the Fourier transform `L^p -> L^{p'}`:
/// `[(2 pi)^{2/p' - 1} p^{1/p} / p'^{1/p'}]^n`.
pub fn beckner_constant(n: usize, p: f64, mode: ConstantMode) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(parameter(format!("p = {p} must lie in [1, 2]")));
    }
    if mode == ConstantMode::One || p == 2.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok((2.0 * PI).powi(-(n as i32)));
    }
    let p_exp = Exponent::Finite(p);
    let conj = p_exp.conjugate();
    let per_axis =
        (2.0 * PI).powf(2.0 * conj.reciprocal() - 1.0) * p_exp.self_root() / conj.self_root();
    Ok(per_axis.powi(n as i32))
}

/// Options shared by the bound assemblers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub constant: ConstantMode,
    /// Relative margin below which an instance is a violation finding.
    pub tolerance: f64,
    /// Threshold for detected supports.
    pub tau_rel: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            constant: ConstantMode::Beckner,
            tolerance: DEFAULT_TOLERANCE,
            tau_rel: DEFAULT_TAU_REL,
        }
    }
}

/// The three terms of the basic magnitude/multiplier split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaGap {
    /// `||f - g||_{H^s}^2`.
    pub lhs: f64,
    /// `||<xi>^s (|f^| - |g^|)||_2^2`.
    pub magnitude_term: f64,
    /// `||M_{f cap g}(f - g)||_{H^s}^2`.
    pub multiplier_term: f64,
}

impl LemmaGap {
    pub fn margin(&self) -> f64 {
        self.magnitude_term + self.multiplier_term - self.lhs
    }
}

fn resolve_pair(f: &SampledField, g: &SampledField, tau_rel: f64) -> Result<(Resolved, Resolved)> {
    same_grid(f.grid(), g.grid())?;
    Ok((resolve(f, tau_rel)?, resolve(g, tau_rel)?))
}

fn pair_provenance(a: &Resolved, b: &Resolved) -> MaskProvenance {
    if a.provenance == MaskProvenance::Declared && b.provenance == MaskProvenance::Declared {
        MaskProvenance::Declared
    } else {
        MaskProvenance::Detected
    }
}

/// `||f-g||_{H^s}^2 <= ||<xi>^s(|f^|-|g^|)||^2 + ||M_{f cap g}(f-g)||_{H^s}^2`.
pub fn lemma_gap(f: &SampledField, g: &SampledField, s: f64) -> Result<LemmaGap> {
    let (fr, gr) = resolve_pair(f, g, DEFAULT_TAU_REL)?;
    lemma_gap_resolved(&fr, &gr, s)
}

pub(crate) fn lemma_gap_resolved(fr: &Resolved, gr: &Resolved, s: f64) -> Result<LemmaGap> {
    let diff = fr.spectrum.sub(&gr.spectrum)?;
    let common = fr.mask.intersect(&gr.mask)?;
    Ok(LemmaGap {
        lhs: sobolev_norm_sq(&diff, s),
        magnitude_term: magnitude_gap_sq(&fr.spectrum, &gr.spectrum, s)?,
        multiplier_term: sobolev_norm_sq(&common.restrict(&diff)?, s),
    })
}

/// What is known about `A_{f cap g}` beyond the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskMeta {
    /// The set stands for a bounded subset of `R^n`.
    pub bounded: bool,
    /// The support was thresholded from data, so grid boundedness says
    /// nothing about the continuum set.
    pub grid_vacuous: bool,
}

impl MaskMeta {
    /// A declared proper subset of the grid is bounded; a declared full grid
    /// stands for all of `R^n`; detected masks are bounded only on the grid.
    pub fn of(mask: &SupportMask, provenance: MaskProvenance) -> Self {
        match provenance {
            MaskProvenance::Declared => MaskMeta {
                bounded: !mask.is_full(),
                grid_vacuous: false,
            },
            MaskProvenance::Detected => MaskMeta {
                bounded: true,
                grid_vacuous: true,
            },
        }
    }
}

/// Sufficient conditions for the coefficient to be finite in the continuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinitenessFlags {
    /// (i) `A_{f cap g}` is compact.
    pub compact: bool,
    /// (ii) `A_{f cap g}` has finite measure and `s <= t`.
    pub finite_measure: bool,
    /// (iii) `s < t - a`.
    pub subcritical: bool,
    /// (i) and (ii) hold only because the grid is finite.
    pub grid_vacuous: bool,
}

impl FinitenessFlags {
    /// At least one condition holds for a reason that survives the
    /// continuum limit.
    pub fn certified(&self) -> bool {
        self.subcritical || (!self.grid_vacuous && (self.compact || self.finite_measure))
    }
}

pub fn finiteness_conditions(
    params: &StabilityParams,
    n: usize,
    meta: MaskMeta,
) -> FinitenessFlags {
    FinitenessFlags {
        compact: meta.bounded,
        finite_measure: meta.bounded && params.s <= params.t,
        subcritical: params.s < params.t - params.threshold(n),
        grid_vacuous: meta.grid_vacuous,
    }
}

/// Witnesses used for the two infima of the main estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    /// Minimiser of the `H^s` distance.
    pub distance: AmbiguityElement,
    /// Best element found for the `H^{t,p}` a priori term.
    pub apriori: AmbiguityElement,
}

/// Every term of one instance of the main estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub params: StabilityParams,
    pub group: GroupSpec,
    pub dim: usize,
    pub constant_mode: ConstantMode,
    /// `d([f],[g])^2`.
    pub lhs: f64,
    pub magnitude_term: f64,
    /// `c_{n,p}`.
    pub constant: f64,
    /// `||chi_{A_{f cap g}} <xi>^{2s-2t}||_{p/(2-p)}`.
    pub weight: f64,
    /// `constant * weight`.
    pub coefficient: f64,
    /// `inf_{P,Q} ||Pf - Qg||_{H^{t,p}}^2` over the evaluated candidates.
    pub apriori_term: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `||M_{f cap g}(f - P g)||_{H^s}^2` at the a priori witness; bounded
    /// by `coefficient * apriori_term` through Hölder and Hausdorff–Young.
    pub holder_lhs: f64,
    /// `|A_{f cap g}|`.
    pub common_measure: f64,
    /// `||f||_{H^s}^2 + ||g||_{H^s}^2`, the roundoff scale of every term.
    pub energy: f64,
    pub conditions: FinitenessFlags,
    pub provenance: MaskProvenance,
    pub witnesses: Witnesses,
    pub violation: bool,
}

/// Scale for relative margins: the right-hand side, floored at machine
/// precision of the inputs' energy so that pairs equal up to roundoff are
/// not compared on a scale of `1e-30`.
pub fn margin_scale(rhs: f64, energy: f64) -> f64 {
    let scale = rhs.max(f64::EPSILON * energy);
    if scale > 0.0 {
        scale
    } else {
        1.0
    }
}

impl StabilityReport {
    /// Margin divided by [`margin_scale`].
    pub fn relative_margin(&self) -> f64 {
        self.margin / margin_scale(self.rhs, self.energy)
    }

    pub fn holder_margin(&self) -> f64 {
        self.coefficient * self.apriori_term - self.holder_lhs
    }

    pub fn relative_holder_margin(&self) -> f64 {
        self.holder_margin() / margin_scale(self.rhs, self.energy)
    }
}

/// Evaluates `theta -> ||U - e^{i theta} V||_p` on the spatial side.
struct PhaseObjective {
    u: SampledField,
    v: SampledField,
    p: Exponent,
}

impl PhaseObjective {
    fn value(&self, theta: f64) -> f64 {
        let rot = Complex64::from_polar(1.0, theta);
        let diff = self
            .u
            .combine(Complex64::new(1.0, 0.0), &self.v, -rot)
            .expect("same grid");
        lp_norm(&diff, self.p)
    }

    /// Golden-section search on `[centre - pi, centre + pi]`; returns the
    /// best point seen, including the centre.
    fn refine(&self, centre: f64) -> (f64, f64) {
        const ITERATIONS: usize = 48;
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut best = (centre, self.value(centre));
        let (mut a, mut b) = (centre - PI, centre + PI);
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let mut f1 = self.value(x1);
        let mut f2 = self.value(x2);
        for _ in 0..ITERATIONS {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = self.value(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = self.value(x2);
            }
            for (x, v) in [(x1, f1), (x2, f2)] {
                if v < best.1 {
                    best = (x, v);
                }
            }
        }
        best
    }
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Best a priori distance `||f - P g||_{H^{t,p}}` over the candidate set:
/// the `H^s`-optimal witness of every flag subgroup of `G`, each followed by
/// a golden-section phase refinement when `G` has the global phase.
///
/// The candidate set of a subgroup is contained in that of any larger group,
/// so the result is monotone in `G`.
fn apriori_search(
    fs: &SpectralField,
    gs: &SpectralField,
    params: &StabilityParams,
    group: GroupSpec,
) -> Result<(f64, AmbiguityElement)> {
    let grid = fs.grid();
    let p = params.p_exponent();
    let tw = bracket_weights(grid, params.t);
    let u = inverse_transform(&fs.weighted(&tw));

    let mut witnesses: Vec<AmbiguityElement> = Vec::new();
    for sub in group.subgroups() {
        let w = quotient_distance_spectral(grid, fs, gs, params.s, sub)?.witness;
        if !witnesses.contains(&w) {
            witnesses.push(w);
        }
    }

    let mut best: Option<(f64, AmbiguityElement)> = None;
    for w in witnesses {
        let unrotated = AmbiguityElement {
            theta: 0.0,
            ..w.clone()
        };
        let v = inverse_transform(&unrotated.act_on_spectrum(gs)?.weighted(&tw));
        let objective = PhaseObjective { u: u.clone(), v, p };
        let (theta, value) = if group.global_phase {
            objective.refine(w.theta)
        } else {
            (w.theta, objective.value(w.theta))
        };
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((
                value,
                AmbiguityElement {
                    theta: wrap(theta),
                    ..w
                },
            ));
        }
    }
    let (value, element) = best.expect("identity is always a candidate");
    Ok((value * value, element))
}

/// Assembles every term of the main estimate for `(f, g)`.
pub fn stability_bound(
    f: &SampledField,
    g: &SampledField,
    params: &StabilityParams,
    group: GroupSpec,
    opts: &BoundOptions,
) -> Result<StabilityReport> {
    let (fr, gr) = resolve_pair(f, g, opts.tau_rel)?;
    let grid = f.grid();
    let n = grid.dim();
    let s = params.s;

    let quotient = quotient_distance_spectral(grid, &fr.spectrum, &gr.spectrum, s, group)?;
    let lhs = quotient.distance * quotient.distance;
    let magnitude_term = magnitude_gap_sq(&fr.spectrum, &gr.spectrum, s)?;

    let common = fr.mask.intersect(&gr.mask)?;
    let provenance = pair_provenance(&fr, &gr);
    let constant = beckner_constant(n, params.p, opts.constant)?;
    let weight = weight_norm(
        &common,
        params.weight_order(),
        params.coefficient_exponent(),
    );
    let coefficient = constant * weight;

    let (apriori_term, apriori_witness) =
        apriori_search(&fr.spectrum, &gr.spectrum, params, group)?;
    let moved = apriori_witness.act_on_spectrum(&gr.spectrum)?;
    let holder_lhs = sobolev_norm_sq(&common.restrict(&fr.spectrum.sub(&moved)?)?, s);

    let rhs = magnitude_term + coefficient * apriori_term;
    let margin = rhs - lhs;
    let energy = sobolev_norm_sq(&fr.spectrum, s) + sobolev_norm_sq(&gr.spectrum, s);
    let scale = margin_scale(rhs, energy);
    Ok(StabilityReport {
        params: *params,
        group,
        dim: n,
        constant_mode: opts.constant,
        lhs,
        magnitude_term,
        constant,
        weight,
        coefficient,
        apriori_term,
        rhs,
        margin,
        holder_lhs,
        common_measure: common.measure(),
        energy,
        conditions: finiteness_conditions(params, n, MaskMeta::of(&common, provenance)),
        provenance,
        witnesses: Witnesses {
            distance: quotient.witness,
            apriori: apriori_witness,
        },
        violation: margin < -opts.tolerance * scale,
    })
}

/// Both sides of `||f||_2^2 <= (2 pi)^{-n} L ||f||_1^2` with `L` the measure
/// of the declared spectral support.
pub fn basic_support_estimate(f: &SampledField) -> Result<(f64, f64)> {
    let mask = f
        .mask()
        .ok_or_else(|| domain("support estimate needs a declared spectral mask"))?;
    let n = f.grid().dim() as i32;
    let lhs = lp_norm(f, Exponent::Finite(2.0)).powi(2);
    let rhs = (2.0 * PI).powi(-n) * mask.measure() * lp_norm(f, Exponent::Finite(1.0)).powi(2);
    Ok((lhs, rhs))
}

/// Terms of the comparison estimate with an imaginary-part penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparatorTerms {
    /// `||f - g||_2`.
    pub lhs: f64,
    /// `2a + 30 sqrt(L) b + 2c`.
    pub rhs: f64,
    /// `a = || |f^| - |g^| ||_2`.
    pub magnitude_gap: f64,
    /// `b = ||f - g||_1`.
    pub l1_distance: f64,
    /// `c = ||Im g^||_2`.
    pub imaginary_part: f64,
    /// `L = |supp f^|`.
    pub support_measure: f64,
}

/// Relative size of `Im f^` tolerated when checking that `f^` is real.
pub const REAL_SPECTRUM_TOL: f64 = 1e-10;

/// `||f-g||_2 <= 2|| |f^|-|g^| ||_2 + 30 sqrt(L) ||f-g||_1 + 2||Im g^||_2`,
/// valid for `f` with real spectrum of finite support measure `L`.
pub fn steinerberger_bound(f: &SampledField, g: &SampledField) -> Result<ComparatorTerms> {
    same_grid(f.grid(), g.grid())?;
    let mask = f.mask().ok_or_else(|| {
        domain("hypothesis failed: supp f^ must be a declared finite-measure set")
    })?;
    if mask.is_full() {
        return Err(domain(
            "hypothesis failed: supp f^ covers the whole grid (infinite measure in the continuum)",
        ));
    }
    let f_hat = forward_transform(f);
    let peak = f_hat.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let imag = f_hat
        .values()
        .iter()
        .map(|v| v.im.abs())
        .fold(0.0, f64::max);
    if imag > REAL_SPECTRUM_TOL * peak {
        return Err(domain(format!(
            "hypothesis failed: f^ is not real-valued (max |Im f^| = {imag:e}, max |f^| = {peak:e})"
        )));
    }
    let (fr, gr) = resolve_pair(f, g, DEFAULT_TAU_REL)?;
    let a = magnitude_gap_sq(&fr.spectrum, &gr.spectrum, 0.0)?.sqrt();
    let diff = f.sub(g)?;
    let b = lp_norm(&diff, Exponent::Finite(1.0));
    let g_hat = forward_transform(g);
    let imag_part: Vec<Complex64> = g_hat
        .values()
        .iter()
        .map(|v| Complex64::new(v.im, 0.0))
        .collect();
    let c = spectral_lp_norm(
        &SpectralField::new(g.grid().clone(), imag_part)?,
        Exponent::Finite(2.0),
    );
    let l = mask.measure();
    Ok(ComparatorTerms {
        lhs: lp_norm(&diff, Exponent::Finite(2.0)),
        rhs: 2.0 * a + 30.0 * l.sqrt() * b + 2.0 * c,
        magnitude_gap: a,
        l1_distance: b,
        imaginary_part: c,
        support_measure: l,
    })
}

/// Both sides of `||f||_{H^s} <= sqrt(c_{n,p} ||<xi>^{2s-2t}||_{p/(2-p)})
/// ||f||_{H^{t,p}}`, the full-grid case of the main estimate with `g = 0`.
pub fn sobolev_embedding_check(
    f: &SampledField,
    params: &StabilityParams,
    mode: ConstantMode,
) -> Result<(f64, f64)> {
    let n = f.grid().dim();
    if params.s >= params.t - params.threshold(n) {
        return Err(parameter(format!(
            "embedding needs s < t - a, got s = {}, t = {}, a = {}",
            params.s,
            params.t,
            params.threshold(n)
        )));
    }
    let spectrum = forward_transform(f);
    let full = SupportMask::full(f.grid().clone());
    let weight = weight_norm(&full, params.weight_order(), params.coefficient_exponent());
    let c = beckner_constant(n, params.p, mode)?;
    let lhs = sobolev_norm(&spectrum, params.s);
    let rhs = (c * weight).sqrt()
        * crate::norms::bessel_norm_of_spectrum(&spectrum, params.t, params.p_exponent());
    Ok((lhs, rhs))
}
