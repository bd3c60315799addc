//! Seeded verification suites and parameter sweeps.
//!
//! A [`RunConfig`] fully determines a run. Pairs of fields are described by
//! [`GenSpec`]s derived from the config seed and the trial index, trials run
//! on a rayon pool, and records are sorted by `(trial, index)` before they
//! are returned, so output is bitwise identical for any worker count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{unimodular_optimal_multiplier, AmbiguityElement, GroupSpec};
use crate::bounds::{
    finiteness_conditions, lemma_gap, sobolev_embedding_check, stability_bound,
    steinerberger_bound, BoundOptions, ComparatorTerms, ConstantMode, LemmaGap, MaskMeta,
    StabilityReport,
};
use crate::conditional::{
    above_threshold, conditional_bound, is_member, quotient_conditional_bound, split,
    ConditionalReport, MaskPolicy,
};
use crate::error::{parameter, Error, Result};
use crate::field::{GridSpec, SampledField};
use crate::gen::{overlap_masks, AmplitudeLaw, Family, GenSpec, MaskSpec};
use crate::norms::{lp_norm, Exponent, StabilityParams};
use crate::support::{MaskProvenance, DEFAULT_TAU_REL};

/// Absolute slack, in units of `sqrt(||f||^2 + ||g||^2)`, granted to the
/// unimodular identity before its relative error counts; both sides sit at
/// roundoff level when `g` is a symmetry image of `f`.
pub const ROUNDOFF_ALLOWANCE: f64 = 64.0 * f64::EPSILON;

/// The verifiable statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// Magnitude/multiplier split of `||f - g||_{H^s}^2`.
    Lemma,
    /// The main stability estimate.
    Theorem,
    /// Conditional estimates for partially disjoint spectra.
    AppendixA,
    /// `||f - M_a g||_2 = || |f^| - |g^| ||_2` for the optimal unimodular `a`.
    AppendixB,
    /// Bessel-potential embedding into `H^s`.
    Embedding,
    /// Comparison with the estimate carrying an imaginary-part penalty.
    CompareSteinerberger,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Lemma,
        Check::Theorem,
        Check::AppendixA,
        Check::AppendixB,
        Check::Embedding,
        Check::CompareSteinerberger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Lemma => "lemma",
            Check::Theorem => "theorem",
            Check::AppendixA => "appendix-a",
            Check::AppendixB => "appendix-b",
            Check::Embedding => "embedding",
            Check::CompareSteinerberger => "compare-steinerberger",
        }
    }

    /// Relative tolerance on margins (or identity errors) for this check.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Check::Theorem | Check::Embedding => 1e-8,
            Check::CompareSteinerberger => 1e-12,
            Check::Lemma | Check::AppendixA | Check::AppendixB => 1e-10,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| parameter(format!("unknown check `{s}`")))
    }
}

/// Lists of orders and exponents; runs use their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            s: vec![-1.0, 0.0, 0.5, 2.0],
            t: vec![-1.0, 0.0, 1.0, 2.0],
            p: vec![1.0, 4.0 / 3.0, 1.5, 2.0],
        }
    }
}

impl ParamGrid {
    pub fn combos(&self) -> Result<Vec<StabilityParams>> {
        let mut out = Vec::new();
        for &s in &self.s {
            for &t in &self.t {
                for &p in &self.p {
                    out.push(StabilityParams::new(s, t, p)?);
                }
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        for (name, values) in [("s", &self.s), ("t", &self.t), ("p", &self.p)] {
            if values.is_empty() {
                return Err(parameter(format!("parameter list `{name}` is empty")));
            }
        }
        self.combos().map(|_| ())
    }
}

/// Quantity varied by a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    OverlapFraction,
    S,
    T,
    P,
    /// Bins per mask, which sets the support measure.
    L,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::OverlapFraction => "overlap_fraction",
            Axis::S => "s",
            Axis::T => "t",
            Axis::P => "p",
            Axis::L => "L",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overlap_fraction" | "overlap" => Ok(Axis::OverlapFraction),
            "s" => Ok(Axis::S),
            "t" => Ok(Axis::T),
            "p" => Ok(Axis::P),
            "L" | "l" | "bins" => Ok(Axis::L),
            other => Err(parameter(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    /// `axis=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (axis, values) = s
            .split_once('=')
            .ok_or_else(|| parameter(format!("sweep `{s}` must look like axis=v1,v2")))?;
        let values = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| parameter(format!("bad sweep value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sweep {
            axis: axis.trim().parse()?,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Command {
    Verify { check: Check },
    Scan { sweeps: Vec<Sweep> },
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_suite")]
    pub suite: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grids")]
    pub grids: Vec<GridSpec>,
    #[serde(default)]
    pub params: ParamGrid,
    #[serde(default)]
    pub group: GroupSpec,
    #[serde(default)]
    pub constant: ConstantMode,
    /// Overrides the check's default relative tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub allow_detected: bool,
    /// Base overlap fraction for scans.
    #[serde(default = "default_fraction")]
    pub overlap_fraction: f64,
    /// Bins per mask; defaults to a quarter of the first axis.
    #[serde(default)]
    pub bins: Option<usize>,
}

fn default_suite() -> String {
    "default".into()
}

fn default_trials() -> usize {
    200
}

fn default_fraction() -> f64 {
    0.5
}

/// One line grid and one square grid, small enough for desk-scale suites.
pub fn default_grids() -> Vec<GridSpec> {
    vec![
        GridSpec::line(128, 0.25).expect("valid grid"),
        GridSpec::square(16, 0.5).expect("valid grid"),
    ]
}

impl RunConfig {
    pub fn verify(check: Check) -> Self {
        Self::with_command(Command::Verify { check })
    }

    pub fn scan(sweeps: Vec<Sweep>) -> Self {
        Self::with_command(Command::Scan { sweeps })
    }

    fn with_command(command: Command) -> Self {
        Self {
            command,
            suite: default_suite(),
            trials: default_trials(),
            seed: 0,
            grids: default_grids(),
            params: ParamGrid::default(),
            group: GroupSpec::IDENTITY,
            constant: ConstantMode::Beckner,
            tolerance: None,
            allow_detected: false,
            overlap_fraction: default_fraction(),
            bins: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn tolerance_for(&self, check: Check) -> f64 {
        self.tolerance.unwrap_or(check.default_tolerance())
    }

    pub fn validate(&self) -> Result<()> {
        if self.suite != "default" {
            return Err(parameter(format!("unknown suite `{}`", self.suite)));
        }
        if self.grids.is_empty() {
            return Err(parameter("no grids configured"));
        }
        for g in &self.grids {
            GridSpec::new(g.dims().to_vec(), g.spacing())?;
        }
        self.params.validate()?;
        if let Some(tol) = self.tolerance {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(parameter(format!(
                    "tolerance {tol} must be finite and nonnegative"
                )));
            }
        }
        match &self.command {
            Command::Verify { .. } => {
                if self.trials == 0 {
                    return Err(parameter("trials must be positive"));
                }
            }
            Command::Scan { sweeps } => {
                if sweeps.is_empty() || sweeps.len() > 2 {
                    return Err(parameter("a scan needs one or two sweep axes"));
                }
                for sw in sweeps {
                    if sw.values.is_empty() {
                        return Err(parameter(format!(
                            "sweep axis `{}` is empty",
                            sw.axis.name()
                        )));
                    }
                }
                if sweeps.len() == 2 && sweeps[0].axis == sweeps[1].axis {
                    return Err(parameter("sweep axes must differ"));
                }
            }
        }
        Ok(())
    }

    pub fn options(&self, check: Check) -> BoundOptions {
        BoundOptions {
            constant: self.constant,
            tolerance: self.tolerance_for(check),
            tau_rel: DEFAULT_TAU_REL,
        }
    }

    pub fn policy(&self) -> MaskPolicy {
        if self.allow_detected {
            MaskPolicy::AllowDetected
        } else {
            MaskPolicy::DeclaredOnly
        }
    }
}

/// How the two fields of a trial relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFamily {
    Disjoint,
    Overlap25,
    Overlap50,
    Overlap75,
    EqualSupport,
    Nested,
    Perturbed,
    Planted,
    Gaussian,
    Detected,
}

impl PairFamily {
    pub fn name(self) -> &'static str {
        match self {
            PairFamily::Disjoint => "disjoint",
            PairFamily::Overlap25 => "overlap25",
            PairFamily::Overlap50 => "overlap50",
            PairFamily::Overlap75 => "overlap75",
            PairFamily::EqualSupport => "equal_support",
            PairFamily::Nested => "nested",
            PairFamily::Perturbed => "perturbed",
            PairFamily::Planted => "planted",
            PairFamily::Gaussian => "gaussian",
            PairFamily::Detected => "detected",
        }
    }

    fn fraction(self) -> f64 {
        match self {
            PairFamily::Overlap25 => 0.25,
            PairFamily::Overlap50 | PairFamily::Perturbed | PairFamily::Detected => 0.5,
            PairFamily::Overlap75 => 0.75,
            PairFamily::EqualSupport | PairFamily::Planted => 1.0,
            PairFamily::Disjoint | PairFamily::Nested | PairFamily::Gaussian => 0.0,
        }
    }
}

/// Families used by a check on a given grid.
fn families(check: Check, grid: &GridSpec, bins: usize, allow_detected: bool) -> Vec<PairFamily> {
    use PairFamily::*;
    let mut out = match check {
        Check::AppendixA => vec![Disjoint, Overlap25, Overlap50, Overlap75, Nested, Perturbed],
        Check::CompareSteinerberger => vec![
            Disjoint,
            Overlap25,
            Overlap50,
            Overlap75,
            EqualSupport,
            Nested,
            Perturbed,
            Planted,
        ],
        _ => vec![
            Disjoint,
            Overlap25,
            Overlap50,
            Overlap75,
            EqualSupport,
            Nested,
            Perturbed,
            Planted,
            Gaussian,
            Detected,
        ],
    };
    if check == Check::AppendixA && allow_detected {
        out.push(Detected);
    }
    if grid.dim() != 1 {
        out.retain(|f| *f != Gaussian);
    }
    out.retain(|f| overlap_masks(grid, f.fraction(), bins).is_ok());
    out
}

fn band(mask: MaskSpec, law: AmplitudeLaw, stream: u32, scale: f64) -> Family {
    Family::BandLimitedRandom {
        mask,
        law,
        stream,
        scale,
    }
}

/// Random element of `group` with integer shifts.
fn random_element(rng: &mut ChaCha8Rng, grid: &GridSpec, group: GroupSpec) -> AmbiguityElement {
    let n = grid.dim();
    let mut e = AmbiguityElement::identity(n);
    if group.global_phase {
        e.theta = rng.random_range(0.0..std::f64::consts::TAU);
    }
    if group.translations {
        e.shift = grid
            .dims()
            .iter()
            .map(|&len| rng.random_range(0..len as i64) - len as i64 / 2)
            .collect();
    }
    if group.conjugate_reflection {
        e.reflect = rng.random_bool(0.5);
    }
    e
}

/// The pair of recipes for one trial.
pub fn make_pair(
    family: PairFamily,
    seed: u64,
    grid: &GridSpec,
    bins: usize,
    law: AmplitudeLaw,
    planted: AmbiguityElement,
    gaussian: [f64; 3],
) -> Result<(GenSpec, GenSpec)> {
    let spec = |fam| GenSpec::new(seed, grid.clone(), fam);
    let (mf, mg) = overlap_masks(grid, family.fraction(), bins)?;
    let base = band(mf.clone(), law, 0, 1.0);
    let pair = match family {
        PairFamily::Disjoint
        | PairFamily::Overlap25
        | PairFamily::Overlap50
        | PairFamily::Overlap75
        | PairFamily::EqualSupport => (spec(base), spec(band(mg, law, 1, 1.0))),
        PairFamily::Nested => {
            let MaskSpec::Box { lo, hi } = &mf else {
                unreachable!("overlap masks are boxes")
            };
            let quarter = (hi[0] - lo[0]) / 4;
            let mut sub_lo = lo.clone();
            let mut sub_hi = hi.clone();
            sub_lo[0] += quarter;
            sub_hi[0] -= quarter.max(1);
            let sub = MaskSpec::Box {
                lo: sub_lo,
                hi: sub_hi,
            };
            let g = Family::Restricted {
                base: Box::new(base.clone()),
                mask: sub,
            };
            (spec(base), spec(g))
        }
        PairFamily::Perturbed => {
            let g = Family::Sum {
                base: Box::new(base.clone()),
                perturbation: Box::new(band(mg, law, 1, 0.1)),
            };
            (spec(base), spec(g))
        }
        PairFamily::Planted => {
            let g = Family::Transformed {
                base: Box::new(base.clone()),
                element: planted,
            };
            (spec(base), spec(g))
        }
        PairFamily::Gaussian => {
            let h = grid.spacing();
            let [offset, wavenumber, amplitude] = gaussian;
            let f = Family::Gaussian {
                amplitude: 1.0,
                center: vec![0.0],
                width: 5.0 * h,
            };
            let g = Family::ModulatedGaussian {
                amplitude,
                center: vec![offset],
                width: 5.6 * h,
                wavevector: vec![wavenumber],
            };
            (spec(f), spec(g))
        }
        PairFamily::Detected => {
            let undeclared = |fam: Family| Family::Undeclared {
                base: Box::new(fam),
            };
            (
                spec(undeclared(base)),
                spec(undeclared(band(mg, law, 1, 1.0))),
            )
        }
    };
    Ok(pair)
}

/// What one record verified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Lemma {
        s: f64,
        provenance: MaskProvenance,
        #[serde(flatten)]
        gap: LemmaGap,
    },
    Theorem(StabilityReport),
    AppendixA {
        s: f64,
        r0: f64,
        ratio: f64,
        /// Membership agrees with `r >= r0` on the whole `r` grid.
        threshold_exact: bool,
        at_r0: Option<ConditionalReport>,
        midpoint: Option<ConditionalReport>,
        quotient: ConditionalReport,
    },
    AppendixB {
        distance: f64,
        magnitude_gap: f64,
        relative_error: f64,
        /// Error beyond [`ROUNDOFF_ALLOWANCE`], relative to the magnitude gap.
        excess_error: f64,
        provenance: MaskProvenance,
    },
    Embedding {
        field: char,
        params: StabilityParams,
        lhs: f64,
        rhs: f64,
    },
    Comparator {
        terms: ComparatorTerms,
        /// Square root of the main estimate's right-hand side at
        /// `(s, t, p) = (0, 0, 1)` with the identity group.
        theorem_rhs: f64,
    },
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub trial: usize,
    pub index: usize,
    pub check: Check,
    pub family: PairFamily,
    pub f: GenSpec,
    pub g: GenSpec,
    /// Signed slack of the checked statement relative to its scale; negative
    /// values below `-tolerance` are violations.
    pub relative_margin: f64,
    pub violation: bool,
    pub outcome: Outcome,
}

/// Flat CSV view of a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub trial: usize,
    pub index: usize,
    pub check: Check,
    pub family: &'static str,
    pub dim: usize,
    pub points: usize,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_margin: f64,
    pub violation: bool,
}

impl Record {
    pub fn csv_row(&self) -> CsvRow {
        let (s, t, p, lhs, rhs) = match &self.outcome {
            Outcome::Lemma { s, gap, .. } => (
                Some(*s),
                None,
                None,
                gap.lhs,
                gap.magnitude_term + gap.multiplier_term,
            ),
            Outcome::Theorem(r) => (
                Some(r.params.s),
                Some(r.params.t),
                Some(r.params.p),
                r.lhs,
                r.rhs,
            ),
            Outcome::AppendixA { s, quotient, .. } => {
                (Some(*s), None, None, quotient.lhs, quotient.rhs)
            }
            Outcome::AppendixB {
                distance,
                magnitude_gap,
                ..
            } => (None, None, None, *distance, *magnitude_gap),
            Outcome::Embedding {
                params, lhs, rhs, ..
            } => (Some(params.s), Some(params.t), Some(params.p), *lhs, *rhs),
            Outcome::Comparator { terms, theorem_rhs } => {
                (Some(0.0), Some(0.0), Some(1.0), *theorem_rhs, terms.rhs)
            }
        };
        CsvRow {
            trial: self.trial,
            index: self.index,
            check: self.check,
            family: self.family.name(),
            dim: self.f.grid.dim(),
            points: self.f.grid.len(),
            s,
            t,
            p,
            lhs,
            rhs,
            relative_margin: self.relative_margin,
            violation: self.violation,
        }
    }
}

/// Totals for one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub check: Check,
    pub trials: usize,
    pub records: usize,
    pub violations: usize,
    pub worst_relative_margin: f64,
}

impl Summary {
    pub fn of(check: Check, trials: usize, records: &[Record]) -> Self {
        Self {
            check,
            trials,
            records: records.len(),
            violations: records.iter().filter(|r| r.violation).count(),
            worst_relative_margin: records
                .iter()
                .map(|r| r.relative_margin)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Result of a verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<Record>,
    pub summary: Summary,
}

struct Trial {
    id: usize,
    family: PairFamily,
    f: GenSpec,
    g: GenSpec,
}

fn trial_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

fn default_bins(grid: &GridSpec) -> usize {
    (grid.dims()[0] / 4).max(1)
}

fn build_trials(config: &RunConfig, check: Check) -> Result<Vec<Trial>> {
    let law = if check == Check::CompareSteinerberger {
        AmplitudeLaw::RealGaussian
    } else {
        AmplitudeLaw::ComplexGaussian
    };
    let mut plan: Vec<(usize, PairFamily)> = Vec::new();
    let mut per_grid: Vec<Vec<PairFamily>> = Vec::new();
    for grid in &config.grids {
        let bins = config.bins.unwrap_or_else(|| default_bins(grid));
        let fams = families(check, grid, bins, config.allow_detected);
        if fams.is_empty() {
            return Err(parameter(format!(
                "{bins} bins per mask do not fit grid {:?}",
                grid.dims()
            )));
        }
        per_grid.push(fams);
    }
    for id in 0..config.trials {
        let gi = id % config.grids.len();
        let fams = &per_grid[gi];
        plan.push((gi, fams[(id / config.grids.len()) % fams.len()]));
    }
    plan.into_iter()
        .enumerate()
        .map(|(id, (gi, family))| {
            let grid = &config.grids[gi];
            let mut rng = trial_rng(config.seed, id);
            let seed = rng.next_u64();
            let planted = random_element(&mut rng, grid, config.group);
            let gaussian = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(0.5..1.5),
            ];
            let bins = config.bins.unwrap_or_else(|| default_bins(grid));
            let (f, g) = make_pair(family, seed, grid, bins, law, planted, gaussian)?;
            Ok(Trial { id, family, f, g })
        })
        .collect()
}

fn relative(margin: f64, scale: f64) -> f64 {
    margin / if scale > 0.0 { scale } else { 1.0 }
}

fn run_trial(config: &RunConfig, check: Check, trial: &Trial) -> Result<Vec<Record>> {
    let f = trial.f.generate()?;
    let g = trial.g.generate()?;
    let tol = config.tolerance_for(check);
    let outcomes = evaluate(config, check, &f, &g)?;
    Ok(outcomes
        .into_iter()
        .enumerate()
        .map(|(index, (relative_margin, outcome))| Record {
            trial: trial.id,
            index,
            check,
            family: trial.family,
            f: trial.f.clone(),
            g: trial.g.clone(),
            relative_margin,
            violation: relative_margin < -tol,
            outcome,
        })
        .collect())
}

fn pair_meta(f: &SampledField, g: &SampledField) -> Option<MaskMeta> {
    match (f.mask(), g.mask()) {
        (Some(a), Some(b)) => Some(MaskMeta::of(
            &a.intersect(b).ok()?,
            MaskProvenance::Declared,
        )),
        _ => None,
    }
}

/// Checks one pair and returns `(relative margin, outcome)` per record.
pub fn evaluate(
    config: &RunConfig,
    check: Check,
    f: &SampledField,
    g: &SampledField,
) -> Result<Vec<(f64, Outcome)>> {
    let opts = config.options(check);
    let mut out = Vec::new();
    match check {
        Check::Lemma => {
            let declared = f.mask().is_some() && g.mask().is_some();
            for &s in &config.params.s {
                let gap = lemma_gap(f, g, s)?;
                let margin = if declared {
                    relative(gap.margin(), gap.lhs)
                } else {
                    0.0
                };
                let provenance = if declared {
                    MaskProvenance::Declared
                } else {
                    MaskProvenance::Detected
                };
                out.push((margin, Outcome::Lemma { s, provenance, gap }));
            }
        }
        Check::Theorem => {
            let n = f.grid().dim();
            let meta = pair_meta(f, g).unwrap_or(MaskMeta {
                bounded: true,
                grid_vacuous: true,
            });
            for params in config.params.combos()? {
                if !finiteness_conditions(&params, n, meta).certified() {
                    continue;
                }
                let report = stability_bound(f, g, &params, config.group, &opts)?;
                let margin = report
                    .relative_margin()
                    .min(report.relative_holder_margin());
                out.push((margin, Outcome::Theorem(report)));
            }
        }
        Check::AppendixA => {
            let policy = config.policy();
            for &s in &config.params.s {
                let sp = split(f, g, s, policy)?;
                let ratio = crate::conditional::disjointness_ratio(f, g, s, policy)?;
                let r0 = crate::conditional::r_zero(f, g, s, policy)?;
                let threshold_exact = (0..1000).all(|i| {
                    let r = i as f64 * 1e-3;
                    is_member(ratio, r) == above_threshold(r, r0)
                });
                let bound_at = |r: f64| -> Result<Option<ConditionalReport>> {
                    if r < 1.0 {
                        conditional_bound(f, g, s, r, policy).map(Some)
                    } else {
                        Ok(None)
                    }
                };
                let at_r0 = bound_at(r0)?;
                let midpoint = bound_at((1.0 + r0) / 2.0)?;
                let quotient = quotient_conditional_bound(f, g, s, config.group, policy)?;
                let pythagoras = (sp.common + sp.difference_energy() - sp.total).abs() / sp.total;
                let mut margin = (quotient.trivial_ratio - 1.0)
                    .min(quotient.relative_margin())
                    .min(-(r0 * r0 - ratio * ratio).abs())
                    .min(-pythagoras);
                for rep in at_r0.iter().chain(&midpoint) {
                    margin = margin.min(rep.relative_margin());
                }
                if !threshold_exact {
                    margin = f64::NEG_INFINITY;
                }
                out.push((
                    margin,
                    Outcome::AppendixA {
                        s,
                        r0,
                        ratio,
                        threshold_exact,
                        at_r0,
                        midpoint,
                        quotient,
                    },
                ));
            }
        }
        Check::AppendixB => {
            let fit = unimodular_optimal_multiplier(f, g)?;
            let energy = lp_norm(f, Exponent::Finite(2.0)).powi(2)
                + lp_norm(g, Exponent::Finite(2.0)).powi(2);
            let allowance = ROUNDOFF_ALLOWANCE * energy.sqrt();
            let error = (fit.distance - fit.magnitude_gap).abs();
            let relative_error = if error == 0.0 {
                0.0
            } else {
                error / fit.magnitude_gap
            };
            let excess = (error - allowance).max(0.0);
            let excess_error = if excess == 0.0 {
                0.0
            } else {
                excess / fit.magnitude_gap
            };
            out.push((
                if excess_error == 0.0 {
                    0.0
                } else {
                    -excess_error
                },
                Outcome::AppendixB {
                    distance: fit.distance,
                    magnitude_gap: fit.magnitude_gap,
                    relative_error,
                    excess_error,
                    provenance: fit.provenance,
                },
            ));
        }
        Check::Embedding => {
            let n = f.grid().dim();
            for params in config.params.combos()? {
                if params.s >= params.t - params.threshold(n) {
                    continue;
                }
                for (field, x) in [('f', f), ('g', g)] {
                    let (lhs, rhs) = sobolev_embedding_check(x, &params, config.constant)?;
                    out.push((
                        relative(rhs - lhs, rhs),
                        Outcome::Embedding {
                            field,
                            params,
                            lhs,
                            rhs,
                        },
                    ));
                }
            }
        }
        Check::CompareSteinerberger => {
            let terms = steinerberger_bound(f, g)?;
            let params = StabilityParams::new(0.0, 0.0, 1.0)?;
            let report = stability_bound(f, g, &params, GroupSpec::IDENTITY, &opts)?;
            let theorem_rhs = report.rhs.sqrt();
            out.push((
                relative(terms.rhs - theorem_rhs, terms.rhs),
                Outcome::Comparator { terms, theorem_rhs },
            ));
        }
    }
    Ok(out)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(parameter("thread count must be positive"));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| parameter(format!("cannot start worker pool: {e}")))
}

/// Runs a `verify` config on `threads` workers (all cores when `None`).
pub fn run_verify(config: &RunConfig, threads: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let Command::Verify { check } = config.command else {
        return Err(parameter("config is not a verify command"));
    };
    let trials = build_trials(config, check)?;
    let results: Vec<Result<Vec<Record>>> = pool(threads)?.install(|| {
        trials
            .par_iter()
            .map(|t| run_trial(config, check, t))
            .collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    records.sort_by_key(|r| (r.trial, r.index));
    let summary = Summary::of(check, trials.len(), &records);
    Ok(RunOutput { records, summary })
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub axis1: Axis,
    pub value1: f64,
    pub axis2: Option<Axis>,
    pub value2: Option<f64>,
    pub overlap_fraction: f64,
    pub bins: usize,
    pub s: f64,
    pub t: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub relative_margin: f64,
    pub magnitude_term: f64,
    pub constant: f64,
    pub weight: f64,
    pub coefficient: f64,
    pub apriori_term: f64,
    pub common_measure: f64,
    pub r0: Option<f64>,
    pub trivial_ratio: Option<f64>,
    pub conditional_constant: Option<f64>,
    pub violation: bool,
}

struct Point {
    fraction: f64,
    bins: usize,
    params: StabilityParams,
}

fn apply_axis(point: &mut Point, axis: Axis, value: f64) -> Result<()> {
    let p = &mut point.params;
    match axis {
        Axis::OverlapFraction => point.fraction = value,
        Axis::S => *p = StabilityParams::new(value, p.t, p.p)?,
        Axis::T => *p = StabilityParams::new(p.s, value, p.p)?,
        Axis::P => *p = StabilityParams::new(p.s, p.t, value)?,
        Axis::L => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(parameter(format!(
                    "L must be a positive bin count, got {value}"
                )));
            }
            point.bins = value as usize;
        }
    }
    Ok(())
}

/// Runs a `scan` config: one overlap pair per point, with the main and the
/// quotient conditional estimates evaluated.
pub fn run_scan(config: &RunConfig, threads: Option<usize>) -> Result<Vec<ScanRow>> {
    config.validate()?;
    let Command::Scan { sweeps } = &config.command else {
        return Err(parameter("config is not a scan command"));
    };
    let grid = &config.grids[0];
    let base = Point {
        fraction: config.overlap_fraction,
        bins: config.bins.unwrap_or_else(|| default_bins(grid)),
        params: StabilityParams::new(config.params.s[0], config.params.t[0], config.params.p[0])?,
    };
    let second: Vec<Option<f64>> = match sweeps.get(1) {
        Some(sw) => sw.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut jobs = Vec::new();
    for &v1 in &sweeps[0].values {
        for &v2 in &second {
            let mut point = Point { ..base };
            apply_axis(&mut point, sweeps[0].axis, v1)?;
            if let Some(v) = v2 {
                apply_axis(&mut point, sweeps[1].axis, v)?;
            }
            let (mf, mg) = overlap_masks(grid, point.fraction, point.bins)?;
            let law = AmplitudeLaw::ComplexGaussian;
            let f = GenSpec::new(config.seed, grid.clone(), band(mf, law, 0, 1.0));
            let g = GenSpec::new(config.seed, grid.clone(), band(mg, law, 1, 1.0));
            jobs.push((v1, v2, point, f, g));
        }
    }
    let opts = config.options(Check::Theorem);
    let rows: Vec<Result<ScanRow>> = pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|(v1, v2, point, fs, gs)| {
                let f = fs.generate()?;
                let g = gs.generate()?;
                let report = stability_bound(&f, &g, &point.params, config.group, &opts)?;
                let conditional = if point.fraction < 1.0 {
                    Some(quotient_conditional_bound(
                        &f,
                        &g,
                        point.params.s,
                        config.group,
                        MaskPolicy::DeclaredOnly,
                    )?)
                } else {
                    None
                };
                Ok(ScanRow {
                    axis1: sweeps[0].axis,
                    value1: *v1,
                    axis2: sweeps.get(1).map(|s| s.axis),
                    value2: *v2,
                    overlap_fraction: point.fraction,
                    bins: point.bins,
                    s: point.params.s,
                    t: point.params.t,
                    p: point.params.p,
                    lhs: report.lhs,
                    rhs: report.rhs,
                    margin: report.margin,
                    relative_margin: report.relative_margin(),
                    magnitude_term: report.magnitude_term,
                    constant: report.constant,
                    weight: report.weight,
                    coefficient: report.coefficient,
                    apriori_term: report.apriori_term,
                    common_measure: report.common_measure,
                    r0: conditional.as_ref().map(|c| c.r0),
                    trivial_ratio: conditional.as_ref().map(|c| c.trivial_ratio),
                    conditional_constant: conditional.as_ref().map(|c| c.constant),
                    violation: report.violation,
                })
            })
            .collect()
    });
    rows.into_iter().collect()
}
