use num_complex::Complex64;
use phasebound::conditional::split;
use phasebound::gen::{overlap_pair, AmplitudeLaw};
use phasebound::norms::sobolev_norm_sq;
use phasebound::{
    beckner_constant, forward_transform, inverse_transform, lemma_gap, quotient_distance,
    stability_bound, AmbiguityElement, BoundOptions, ConstantMode, GridSpec, GroupSpec, MaskPolicy,
    SampledField, StabilityParams,
};
use proptest::prelude::*;

fn field(values: Vec<(f64, f64)>) -> SampledField {
    let grid = GridSpec::line(values.len(), 0.5).unwrap();
    SampledField::new(
        grid,
        values
            .into_iter()
            .map(|(a, b)| Complex64::new(a, b))
            .collect(),
    )
    .unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n)
}

fn pair(seed: u64, fraction: f64) -> (SampledField, SampledField) {
    let grid = GridSpec::line(64, 0.25).unwrap();
    let (f, g) = overlap_pair(seed, &grid, fraction, 12, AmplitudeLaw::ComplexGaussian).unwrap();
    (f.generate().unwrap(), g.generate().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip_and_parseval(v in values(24)) {
        let f = field(v);
        let spectrum = forward_transform(&f);
        let back = inverse_transform(&spectrum);
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
        let spatial: f64 = f.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * f.grid().cell_volume();
        let spectral = sobolev_norm_sq(&spectrum, 0.0);
        prop_assert!((spatial - spectral).abs() <= 1e-12 * spatial.max(1.0));
    }

    #[test]
    fn quotient_distance_is_monotone_in_the_group(a in values(16), b in values(16), s in -1.0..2.0f64) {
        let (f, g) = (field(a), field(b));
        let chain = [GroupSpec::IDENTITY, GroupSpec::PHASE, GroupSpec::PHASE_SHIFT, GroupSpec::FULL];
        let d: Vec<f64> = chain
            .iter()
            .map(|&grp| quotient_distance(&f, &g, s, grp).unwrap().distance)
            .collect();
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn planted_symmetry_has_zero_distance(v in values(16), theta in 0.0..std::f64::consts::TAU, m in 0i64..16) {
        let f = field(v);
        let e = AmbiguityElement { reflect: true, ..AmbiguityElement::shift(vec![m]) };
        let e = AmbiguityElement { theta, ..e };
        let g = phasebound::apply_element(&e, &f).unwrap();
        let d = quotient_distance(&f, &g, 0.0, GroupSpec::FULL).unwrap().distance;
        let norm = sobolev_norm_sq(&forward_transform(&f), 0.0).sqrt();
        prop_assert!(d <= 1e-12 * norm);
    }

    #[test]
    fn magnitude_split_bounds_the_difference(seed in any::<u64>(), fraction in 0.0..1.0f64, s in -1.0..2.0f64) {
        let (f, g) = pair(seed, (fraction * 4.0).round() / 4.0);
        let gap = lemma_gap(&f, &g, s).unwrap();
        prop_assert!(gap.margin() >= -1e-10 * gap.lhs);
    }

    #[test]
    fn pythagorean_split_is_exact(seed in any::<u64>(), s in -1.0..2.0f64) {
        let (f, g) = pair(seed, 0.5);
        let sp = split(&f, &g, s, MaskPolicy::DeclaredOnly).unwrap();
        let sum = sp.common + sp.difference_energy();
        prop_assert!((sum - sp.total).abs() <= 1e-12 * sp.total);
    }

    #[test]
    fn stability_margin_is_nonnegative(
        seed in any::<u64>(),
        s in -1.0..1.0f64,
        dt in 0.0..2.0f64,
        p in 1.0..2.0f64,
        g_bits in 0u8..4,
    ) {
        let (f, g) = pair(seed, 0.5);
        let group = [GroupSpec::IDENTITY, GroupSpec::PHASE, GroupSpec::PHASE_SHIFT, GroupSpec::FULL][g_bits as usize];
        let params = StabilityParams::new(s, s + dt, p).unwrap();
        let report = stability_bound(&f, &g, &params, group, &BoundOptions::default()).unwrap();
        prop_assert!(report.relative_margin() >= -1e-8);
        prop_assert!(report.relative_holder_margin() >= -1e-8);
        prop_assert!(!report.violation);
    }

    #[test]
    fn beckner_constant_is_below_its_scaling_part(p in 1.0..=2.0f64, n in 1usize..4) {
        let c = beckner_constant(n, p, ConstantMode::Beckner).unwrap();
        let scaling = std::f64::consts::TAU.powf(n as f64 * (1.0 - 2.0 / p));
        prop_assert!(c > 0.0 && c <= 1.0 + 1e-12);
        prop_assert!(c <= scaling * (1.0 + 1e-12));
        prop_assert_eq!(beckner_constant(n, p, ConstantMode::One).unwrap(), 1.0);
    }
}
