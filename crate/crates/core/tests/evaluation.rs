use proptest::prelude::*;
use rdlab::analytic::{reaction_diffusion_series, ProblemSpec, SeriesOptions, SpaceTimePoint};
use rdlab::dataset::{generate, GenerateOptions, ParameterRanges, Split};
use rdlab::evaluation::*;

#[test]
fn oracle_is_perfect_on_analytic_test_split_only() {
    let ds = generate(
        11,
        &GenerateOptions {
            n_batches: 20,
            batch_size: 8,
            points_per_spec: 4,
            ranges: ParameterRanges::desk(),
            ..GenerateOptions::default()
        },
    )
    .unwrap();
    let reports = evaluate_dataset(&SeriesOracle::new(), &ds, &DEFAULT_THRESHOLDS).unwrap();
    assert_eq!(reports.len(), 3);
    let test = reports.iter().find(|r| r.split == Some(Split::Test)).unwrap();
    assert_eq!(test.mse, 0.0);
    assert!(test.threshold_accuracy.iter().all(|a| a.percent == 100.0));
    let train = reports.iter().find(|r| r.split == Some(Split::Train)).unwrap();
    assert_eq!(train.n, 18 * 8);
    // FD labels sit within half a percent of the series, not on it.
    assert!(train.mse > 0.0);
    assert!(train.accuracy(2.0).unwrap() == 100.0);
}

#[test]
fn report_is_monotone_over_default_thresholds() {
    let preds = [1.0, 2.2, 3.9, 4.0, 8.0];
    let targets = [1.1, 3.0, 3.0, 5.5, 4.0];
    let r = EvalReport::from_predictions(&preds, &targets, &[2.0, 0.5, 1.0], None).unwrap();
    let p: Vec<f64> = r.threshold_accuracy.iter().map(|a| a.percent).collect();
    assert_eq!(r.threshold_accuracy.iter().map(|a| a.theta).collect::<Vec<_>>(), [0.5, 1.0, 2.0]);
    assert!(p.windows(2).all(|w| w[0] <= w[1]), "{p:?}");
}

#[test]
fn damkohler_sweep_defaults_give_five_rows_by_decreasing_da() {
    let lattice = Lattice {
        nx: 3,
        nt: 2,
        t_max_years: 1.0,
    };
    let rows = damkohler_sweep(
        75.5,
        0.05,
        DAMKOHLER_K,
        &DAMKOHLER_DE_VALUES,
        &SeriesOracle::new(),
        &DEFAULT_THRESHOLDS,
        &lattice,
        1,
    )
    .unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), DAMKOHLER_DE_VALUES);
    assert!(rows.windows(2).all(|w| w[0].da > w[1].da));
    assert!(rows.iter().all(|r| r.da > 1e3));
    let table = Table::damkohler_sweep(&rows);
    assert_eq!(table.columns, ["de", "da", "mse", "thr0.5_pct", "thr1_pct", "thr2_pct"]);
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().nth(1).unwrap().starts_with("2e-14,"));
}

#[test]
fn coefficient_sweep_defaults_follow_the_table_values() {
    assert_eq!(SweepField::K.default_values(), K_SWEEP_VALUES);
    assert_eq!(SweepField::De.default_values(), DE_SWEEP_VALUES);
    let lattice = Lattice {
        nx: 3,
        nt: 2,
        t_max_years: 7.0,
    };
    for field in [SweepField::K, SweepField::De] {
        let rows = coefficient_sweep(
            &ProblemSpec::baseline(),
            field,
            field.default_values(),
            &SeriesOracle::new(),
            &DEFAULT_THRESHOLDS,
            &lattice,
            2,
        )
        .unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.report.mse == 0.0));
    }
    assert!(coefficient_sweep(
        &ProblemSpec::baseline(),
        SweepField::K,
        &[-1.0],
        &SeriesOracle::new(),
        &DEFAULT_THRESHOLDS,
        &lattice,
        1
    )
    .is_err());
}

#[test]
fn nondimensional_groups_at_reference_points() {
    let spec = ProblemSpec::baseline();
    let g = nondimensionalize(&spec, SpaceTimePoint::new(spec.half_thickness, 1e6), 1e6).unwrap();
    assert_eq!(g.x_star, 1.0);
    assert_eq!(g.t_star, 1.0);
    assert_eq!(g.c_star, 1.0);
    assert!((g.fourier - spec.de * 1e6 / 0.0025).abs() < 1e-14 * g.fourier);
    assert_eq!(g.k_t, spec.k * 1e6);
    assert!(nondimensionalize(&spec, SpaceTimePoint::new(0.0, 1.0), 0.0).is_err());
}

fn series_c_star(spec: &ProblemSpec, x_star: f64, t: f64) -> f64 {
    let c = reaction_diffusion_series(spec, SpaceTimePoint::new(x_star * spec.half_thickness, t), &SeriesOptions::default())
        .unwrap();
    c / spec.c0
}

proptest! {
    #[test]
    fn threshold_accuracy_is_monotone(
        pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..60),
        a in 0.01..10.0f64,
        b in 0.01..10.0f64,
    ) {
        let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(threshold_accuracy(&p, &y, lo).unwrap() <= threshold_accuracy(&p, &y, hi).unwrap());
        let acc = threshold_accuracy(&p, &y, lo).unwrap();
        prop_assert!((0.0..=100.0).contains(&acc));
    }

    #[test]
    fn zero_mse_iff_full_accuracy(
        y in prop::collection::vec(-50.0..50.0f64, 1..40),
        bump in prop::option::of((0usize..40, 1e-9..1.0f64)),
    ) {
        let mut p = y.clone();
        if let Some((i, d)) = bump {
            let i = i % p.len();
            p[i] += d;
        }
        let m = mse(&p, &y).unwrap();
        // Some positive θ below every nonzero deviation exists, so "100% at all θ" reduces to θ → 0.
        let smallest = p.iter().zip(&y).map(|(a, b)| (a - b).abs()).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
        let theta = if smallest.is_finite() { smallest } else { 1e-12 };
        let all_hit = [theta, 0.5, 1.0, 2.0].iter().all(|t| threshold_accuracy(&p, &y, *t).unwrap() == 100.0);
        prop_assert_eq!(m == 0.0, all_hit);
    }

    #[test]
    fn damkohler_invariant_under_slab_rescaling(
        k in 1e-10..1e-1f64,
        lde in -13.0..-1.0f64,
        l in 1e-4..0.05f64,
        s in 0.01..100.0f64,
    ) {
        let de = 10f64.powf(lde);
        let th = RegimeThresholds::default();
        let a = damkohler(&ProblemSpec::new(de, k, 1.0, l).unwrap(), &th);
        let b = damkohler(&ProblemSpec::new(s * s * de, k, 1.0, s * l).unwrap(), &th);
        prop_assert!((a.da - b.da).abs() <= 1e-12 * a.da.abs());
        prop_assert_eq!(a.regime, b.regime);
    }

    #[test]
    fn equal_groups_give_equal_scaled_concentration(
        fourier in 0.01..2.0f64,
        kt in 0.0..5.0f64,
        x_star in -1.0..1.0f64,
        scale in 0.1..10.0f64,
        l2 in 0.001..0.05f64,
        c0b in 1.0..200.0f64,
    ) {
        let t1 = 3.1536e7;
        let a = ProblemSpec::new(fourier * 0.05f64.powi(2) / t1, kt / t1, 75.5, 0.05).unwrap();
        let t2 = t1 * scale;
        let b = ProblemSpec::new(fourier * l2 * l2 / t2, kt / t2, c0b, l2).unwrap();
        let ca = series_c_star(&a, x_star, t1);
        let cb = series_c_star(&b, x_star, t2);
        prop_assert!((ca - cb).abs() <= 1e-12 * ca.abs().max(1e-3), "{} vs {}", ca, cb);
        let ga = nondimensionalize(&a, SpaceTimePoint::new(x_star * 0.05, t1), t1).unwrap();
        let gb = nondimensionalize(&b, SpaceTimePoint::new(x_star * l2, t2), t2).unwrap();
        prop_assert!((ga.fourier - gb.fourier).abs() <= 1e-12 * ga.fourier);
        prop_assert!((ga.k_t - gb.k_t).abs() <= 1e-12 * ga.k_t.max(1e-300));
    }
}
