//! Conditional estimates that use only the magnitude data, valid when the
//! difference `f - g` has a controlled share of energy on the common
//! spectral support.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{quotient_distance_spectral, GroupSpec};
use crate::error::{domain, parameter, Result};
use crate::field::{same_grid, SampledField};
use crate::norms::{magnitude_gap_sq, sobolev_norm_sq};
use crate::support::{resolve, MaskProvenance, Resolved, DEFAULT_TAU_REL};

/// Slack allowed when testing `ratio <= r`.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Whether detected supports may be used for the set-splitting identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPolicy {
    #[default]
    DeclaredOnly,
    AllowDetected,
}

/// `H^s` energies of the pieces of `f - g` on the spectral partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// `||f - g||_{H^s}^2`.
    pub total: f64,
    /// `||M_{f cap g}(f - g)||_{H^s}^2`.
    pub common: f64,
    /// `||M_{f \ g} f||_{H^s}^2`.
    pub only_f: f64,
    /// `||M_{g \ f} g||_{H^s}^2`.
    pub only_g: f64,
    /// `||<xi>^s (|f^| - |g^|)||_2^2`.
    pub magnitude: f64,
    pub same_support: bool,
}

impl Split {
    /// `||M_{f \ g} f||^2 + ||M_{g \ f} g||^2`.
    pub fn difference_energy(&self) -> f64 {
        self.only_f + self.only_g
    }
}

fn resolve_pair(
    f: &SampledField,
    g: &SampledField,
    policy: MaskPolicy,
) -> Result<(Resolved, Resolved)> {
    same_grid(f.grid(), g.grid())?;
    let fr = resolve(f, DEFAULT_TAU_REL)?;
    let gr = resolve(g, DEFAULT_TAU_REL)?;
    if policy == MaskPolicy::DeclaredOnly
        && (fr.provenance == MaskProvenance::Detected || gr.provenance == MaskProvenance::Detected)
    {
        return Err(domain(
            "declared spectral masks are required here (detected supports make the splitting inexact; use --allow-detected to override)",
        ));
    }
    Ok((fr, gr))
}

fn split_resolved(fr: &Resolved, gr: &Resolved, s: f64) -> Result<Split> {
    let diff = fr.spectrum.sub(&gr.spectrum)?;
    let common = fr.mask.intersect(&gr.mask)?;
    let only_f = fr.mask.diff(&gr.mask)?;
    let only_g = gr.mask.diff(&fr.mask)?;
    Ok(Split {
        total: sobolev_norm_sq(&diff, s),
        common: sobolev_norm_sq(&common.restrict(&diff)?, s),
        only_f: sobolev_norm_sq(&only_f.restrict(&fr.spectrum)?, s),
        only_g: sobolev_norm_sq(&only_g.restrict(&gr.spectrum)?, s),
        magnitude: magnitude_gap_sq(&fr.spectrum, &gr.spectrum, s)?,
        same_support: fr.mask == gr.mask,
    })
}

/// Energies of `f - g` on the partition of the frequency grid.
pub fn split(f: &SampledField, g: &SampledField, s: f64, policy: MaskPolicy) -> Result<Split> {
    let (fr, gr) = resolve_pair(f, g, policy)?;
    split_resolved(&fr, &gr, s)
}

fn ratio_of(split: &Split) -> Result<f64> {
    if split.total == 0.0 {
        return Err(domain("ratio undefined: f = g"));
    }
    Ok((split.common / split.total).sqrt())
}

fn r_zero_of(split: &Split) -> Result<f64> {
    if split.same_support {
        return Err(domain(
            "hypothesis failed: supp f^ and supp g^ must differ (equal supports only allow r = 1)",
        ));
    }
    if split.total == 0.0 {
        return Err(domain("threshold undefined: f = g"));
    }
    Ok((1.0 - split.difference_energy() / split.total)
        .max(0.0)
        .sqrt())
}

/// `r(f, g) = ||M_{f cap g}(f - g)||_{H^s} / ||f - g||_{H^s}`.
pub fn disjointness_ratio(
    f: &SampledField,
    g: &SampledField,
    s: f64,
    policy: MaskPolicy,
) -> Result<f64> {
    ratio_of(&split(f, g, s, policy)?)
}

/// `r_0 = sqrt(1 - (||M_{f\g} f||^2 + ||M_{g\f} g||^2) / ||f - g||^2)`.
pub fn r_zero(f: &SampledField, g: &SampledField, s: f64, policy: MaskPolicy) -> Result<f64> {
    r_zero_of(&split(f, g, s, policy)?)
}

/// `(f, g)` belongs to `X^s(r)`, i.e. `r(f, g) <= r`. Compared as energy
/// fractions `r(f, g)^2 <= r^2`, with slack [`MEMBERSHIP_SLACK`].
pub fn is_member(ratio: f64, r: f64) -> bool {
    ratio * ratio <= r * r + MEMBERSHIP_SLACK
}

/// Whether `r` is at or above the threshold `r0`, on the same squared scale
/// as [`is_member`].
pub fn above_threshold(r: f64, r0: f64) -> bool {
    r * r >= r0 * r0 - MEMBERSHIP_SLACK
}

/// One instance of a conditional estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    /// The disjointness level used (`None` for the quotient form).
    pub r: Option<f64>,
    pub ratio: f64,
    pub r0: f64,
    /// `1 / (1 - r^2)`, or `d^2 / (||M_{f\g} f||^2 + ||M_{g\f} g||^2)`.
    pub constant: f64,
    pub lhs: f64,
    pub magnitude_term: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `g` lies in `X^s(f; r)`.
    pub member_f: bool,
    /// `(f, g)` lies in `X^s(r)`.
    pub member_pair: bool,
    /// `||<xi>^s(|f^| - |g^|)||^2 / (||M_{f\g} f||^2 + ||M_{g\f} g||^2)`.
    pub trivial_ratio: f64,
    pub group: Option<GroupSpec>,
    pub split: Split,
}

impl ConditionalReport {
    pub fn relative_margin(&self) -> f64 {
        self.margin / if self.rhs > 0.0 { self.rhs } else { 1.0 }
    }
}

/// `||f - g||_{H^s}^2 <= ||<xi>^s(|f^| - |g^|)||^2 / (1 - r^2)` for pairs in
/// `X^s(r)`.
pub fn conditional_bound(
    f: &SampledField,
    g: &SampledField,
    s: f64,
    r: f64,
    policy: MaskPolicy,
) -> Result<ConditionalReport> {
    if !(0.0..1.0).contains(&r) {
        return Err(parameter(format!("r = {r} must lie in [0, 1)")));
    }
    let sp = split(f, g, s, policy)?;
    let ratio = ratio_of(&sp)?;
    if !is_member(ratio, r) {
        return Err(domain(format!(
            "(f, g) is not in X^s(r): disjointness ratio {ratio} exceeds r = {r}"
        )));
    }
    let r0 = r_zero_of(&sp)?;
    let constant = 1.0 / (1.0 - r * r);
    let rhs = constant * sp.magnitude;
    Ok(ConditionalReport {
        r: Some(r),
        ratio,
        r0,
        constant,
        lhs: sp.total,
        magnitude_term: sp.magnitude,
        rhs,
        margin: rhs - sp.total,
        member_f: true,
        member_pair: true,
        trivial_ratio: trivial_ratio(&sp)?,
        group: None,
        split: sp,
    })
}

fn trivial_ratio(sp: &Split) -> Result<f64> {
    let energy = sp.difference_energy();
    if energy == 0.0 {
        return Err(domain(
            "f and g carry no energy on the difference sets of their supports",
        ));
    }
    Ok(sp.magnitude / energy)
}

/// `d([f],[g])^2 <= d^2 / (||M_{f\g} f||^2 + ||M_{g\f} g||^2) *
/// ||<xi>^s(|f^| - |g^|)||^2`, which holds iff the trivial ratio is at least 1.
pub fn quotient_conditional_bound(
    f: &SampledField,
    g: &SampledField,
    s: f64,
    group: GroupSpec,
    policy: MaskPolicy,
) -> Result<ConditionalReport> {
    let (fr, gr) = resolve_pair(f, g, policy)?;
    let sp = split_resolved(&fr, &gr, s)?;
    let r0 = r_zero_of(&sp)?;
    let ratio = ratio_of(&sp)?;
    let trivial = trivial_ratio(&sp)?;
    let d = quotient_distance_spectral(f.grid(), &fr.spectrum, &gr.spectrum, s, group)?.distance;
    let lhs = d * d;
    let constant = lhs / sp.difference_energy();
    let rhs = constant * sp.magnitude;
    Ok(ConditionalReport {
        r: None,
        ratio,
        r0,
        constant,
        lhs,
        magnitude_term: sp.magnitude,
        rhs,
        margin: rhs - lhs,
        member_f: is_member(ratio, r0),
        member_pair: is_member(ratio, r0),
        trivial_ratio: trivial,
        group: Some(group),
        split: sp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::support::{apply_multiplier, SupportMask};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band(grid: &GridSpec, range: std::ops::Range<usize>, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mask = SupportMask::from_indices(grid.clone(), range).unwrap();
        apply_multiplier(&mask, &SampledField::new(grid.clone(), v).unwrap()).unwrap()
    }

    const P: MaskPolicy = MaskPolicy::DeclaredOnly;

    #[test]
    fn disjoint_spectra() {
        let grid = GridSpec::line(32, 0.5).unwrap();
        let f = band(&grid, 2..10, 1);
        let g = band(&grid, 12..20, 2);
        assert_eq!(disjointness_ratio(&f, &g, 0.5, P).unwrap(), 0.0);
        assert_eq!(r_zero(&f, &g, 0.5, P).unwrap(), 0.0);
        let rep = conditional_bound(&f, &g, 0.5, 0.0, P).unwrap();
        assert_eq!(rep.constant, 1.0);
        assert!((rep.lhs - rep.rhs).abs() <= 1e-12 * rep.rhs);
        let q = quotient_conditional_bound(&f, &g, 0.5, GroupSpec::IDENTITY, P).unwrap();
        assert!((q.trivial_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_supports() {
        let grid = GridSpec::line(32, 0.5).unwrap();
        let f = band(&grid, 2..10, 1);
        let g = band(&grid, 2..10, 2);
        let ratio = disjointness_ratio(&f, &g, 1.0, P).unwrap();
        assert!((ratio - 1.0).abs() < 1e-12);
        assert!(r_zero(&f, &g, 1.0, P).is_err());
        assert!(conditional_bound(&f, &g, 1.0, 0.99, P).is_err());
        assert!(disjointness_ratio(&f, &f, 1.0, P).is_err());
    }

    #[test]
    fn nested_pair_two_routes() {
        let grid = GridSpec::line(64, 0.25).unwrap();
        let f = band(&grid, 10..40, 3);
        let sub = SupportMask::from_indices(grid.clone(), 15..30).unwrap();
        let g = apply_multiplier(&sub, &f).unwrap();
        for s in [-1.0, 0.0, 2.0] {
            let sp = split(&f, &g, s, P).unwrap();
            assert!((sp.common + sp.only_f + sp.only_g - sp.total).abs() <= 1e-10 * sp.total);
            let r0 = r_zero(&f, &g, s, P).unwrap();
            let ratio = disjointness_ratio(&f, &g, s, P).unwrap();
            assert!(ratio < 1e-12);
            assert!((r0 * r0 - ratio * ratio).abs() <= 1e-10);
        }
    }

    #[test]
    fn membership_flips_at_threshold() {
        let grid = GridSpec::line(64, 0.25).unwrap();
        let f = band(&grid, 10..40, 4);
        let g = band(&grid, 25..50, 5);
        let r0 = r_zero(&f, &g, 0.0, P).unwrap();
        let below = r0 - 1e-3;
        assert!(conditional_bound(&f, &g, 0.0, below.max(0.0), P).is_err() || below < 0.0);
        let at = conditional_bound(&f, &g, 0.0, r0, P).unwrap();
        let looser = conditional_bound(&f, &g, 0.0, (1.0 + r0) / 2.0, P).unwrap();
        assert!(at.margin >= -1e-10 * at.rhs);
        assert!(at.margin <= looser.margin);
    }

    #[test]
    fn quotient_form_trivial_ratio() {
        let grid = GridSpec::line(64, 0.25).unwrap();
        let f = band(&grid, 10..40, 6);
        let g = band(&grid, 25..50, 7);
        let q = quotient_conditional_bound(&f, &g, 0.5, GroupSpec::PHASE_SHIFT, P).unwrap();
        assert!(q.trivial_ratio >= 1.0 - 1e-10);
        assert!(q.margin >= -1e-10 * q.rhs);
    }

    #[test]
    fn detected_masks_need_override() {
        let grid = GridSpec::line(32, 0.5).unwrap();
        let f = band(&grid, 2..10, 1).without_mask();
        let g = band(&grid, 6..20, 2).without_mask();
        let err = disjointness_ratio(&f, &g, 0.0, P).unwrap_err();
        assert!(err.to_string().contains("--allow-detected"));
        assert!(disjointness_ratio(&f, &g, 0.0, MaskPolicy::AllowDetected).is_ok());
    }
}
