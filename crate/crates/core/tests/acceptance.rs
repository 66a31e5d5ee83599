//! End-to-end acceptance checks. Runs as a plain binary so that every check
//! prints one PASS/FAIL line; exits non-zero if any check fails.

use std::panic::{self, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdlab::analytic::{
    danckwerts_transform, reaction_diffusion_series, steady_state_profile, ProblemSpec, SeriesOptions, SpaceTimePoint,
    SECONDS_PER_YEAR,
};
use rdlab::dataset::{compute_norm_stats, generate, sample_parameters, Dataset, GenerateOptions, NormMode, ParameterRanges, Split};
use rdlab::evaluation::{
    batch_sweep, damkohler, damkohler_sweep, evaluate, mse, threshold_accuracy, Lattice, RegimeThresholds, SeriesOracle,
    DAMKOHLER_DE_VALUES, DAMKOHLER_K, DEFAULT_THRESHOLDS,
};
use rdlab::fd::{self, Grid};
use rdlab::mlp::{grad_check, init_params, train, Checkpoint, NetworkConfig, TrainReport};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn desk_config() -> NetworkConfig {
    NetworkConfig {
        epochs: 20,
        seed: 1,
        ..NetworkConfig::default()
    }
}

fn desk_options(ranges: ParameterRanges) -> GenerateOptions {
    GenerateOptions {
        n_batches: 100,
        batch_size: 1000,
        ranges,
        ..GenerateOptions::default()
    }
}

struct Trained {
    data: Dataset,
    model: Checkpoint,
    report: TrainReport,
    elapsed: Duration,
}

fn train_fixture(ranges: ParameterRanges, seed: u64) -> Trained {
    let started = Instant::now();
    let data = generate(seed, &desk_options(ranges)).expect("dataset generation");
    let cfg = desk_config();
    let (params, report) = train(&data, &cfg).expect("training");
    let model = Checkpoint::new(params, cfg, data.norm.expect("norm stats"));
    Trained {
        data,
        model,
        report,
        elapsed: started.elapsed(),
    }
}

/// Restricted-range model shared by the training and batch-count checks.
fn desk() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| train_fixture(ParameterRanges::desk(), 42))
}

/// Model over the full parameter ranges, which cover the reaction-dominated sweep.
fn full_range() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| train_fixture(ParameterRanges::full(), 42))
}

fn oracle_triangle() -> Outcome {
    let started = Instant::now();
    let spec = ProblemSpec::baseline();
    let horizon = 7.0 * SECONDS_PER_YEAR;
    let field = fd::solve(&spec, &Grid::for_horizon(&spec, horizon).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if field.grid().nx != 201 {
        return Err(format!("default grid has nx = {}", field.grid().nx));
    }
    let opts = SeriesOptions::default();
    let (mut fd_gap, mut dk_gap) = (0.0f64, 0.0f64);
    for i in 0..10 {
        let x = spec.half_thickness * (2.0 * i as f64 / 9.0 - 1.0);
        for j in 0..10 {
            let t = horizon * j as f64 / 9.0;
            let pt = SpaceTimePoint::new(x, t);
            let s = reaction_diffusion_series(&spec, pt, &opts).map_err(|e| e.to_string())?;
            fd_gap = fd_gap.max((s - field.probe(x, t).map_err(|e| e.to_string())?).abs());
            dk_gap = dk_gap.max((s - danckwerts_transform(&spec, pt, 256, &opts).map_err(|e| e.to_string())?).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        fd_gap < 0.005 * spec.c0 && dk_gap < 1e-5 * spec.c0 && secs < 30.0,
        format!(
            "series-FD {:.3e} c0 (< 5e-3), series-Danckwerts {:.3e} c0 (< 1e-5), {secs:.1}s (< 30s)",
            fd_gap / spec.c0,
            dk_gap / spec.c0
        ),
    )
}

fn ic_bc() -> Outcome {
    let spec = ProblemSpec::baseline();
    let opts = SeriesOptions::with_max_terms(500);
    let mut wall_dev = 0.0f64;
    for t in [0.0, 1.0, 3.6e3, 8.64e4, SECONDS_PER_YEAR, 7.0 * SECONDS_PER_YEAR] {
        for x in [-spec.half_thickness, spec.half_thickness] {
            let c = reaction_diffusion_series(&spec, SpaceTimePoint::new(x, t), &opts).map_err(|e| e.to_string())?;
            wall_dev = wall_dev.max((c - spec.c0).abs());
        }
    }
    let mut ic = 0.0f64;
    for i in 0..=190 {
        let x = spec.half_thickness * (-0.95 + 0.01 * i as f64);
        let c = reaction_diffusion_series(&spec, SpaceTimePoint::new(x, 0.0), &opts).map_err(|e| e.to_string())?;
        ic = ic.max(c.abs());
    }
    check(
        wall_dev <= f64::EPSILON * spec.c0 && ic < 1e-4 * spec.c0,
        format!("|C(±L) - c0| = {wall_dev:e}, max |C(x, 0)| = {:.1e} c0 on |x| <= 0.95L", ic / spec.c0),
    )
}

fn steady_state() -> Outcome {
    let spec = ProblemSpec::baseline();
    let mut worst = 0.0f64;
    for i in 0..21 {
        let x = spec.half_thickness * (i as f64 / 10.0 - 1.0);
        let c = reaction_diffusion_series(&spec, SpaceTimePoint::new(x, 1e9), &SeriesOptions::default())
            .map_err(|e| e.to_string())?;
        let s = steady_state_profile(&spec, x);
        worst = worst.max((c - s).abs() / s);
    }
    check(worst < 1e-4, format!("max relative gap {worst:.2e} at t = 1e9 s over 21 points"))
}

fn fd_order() -> Outcome {
    let started = Instant::now();
    let baseline = fd::observed_order(&ProblemSpec::baseline(), 51, SECONDS_PER_YEAR).map_err(|e| e.to_string())?;
    let diffusion = fd::observed_order(&ProblemSpec::baseline().without_reaction(), 51, 5.0 * 86_400.0)
        .map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let ok = |p: f64| (1.7..=2.3).contains(&p);
    check(
        ok(baseline) && ok(diffusion) && secs < 120.0,
        format!("baseline {baseline:.4}, k = 0 {diffusion:.4} (in [1.7, 2.3]), {secs:.1}s"),
    )
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let inputs: Vec<f64> = (0..20 * 6).map(|_| rng.random_range(-2.0..2.0)).collect();
    let targets: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for hidden in [vec![8], vec![64, 64, 32]] {
        let cfg = NetworkConfig::with_hidden(&hidden);
        let params = init_params(&cfg, &mut rng);
        let err = grad_check(&params, &cfg, &inputs, &targets, 1e-6).map_err(|e| e.to_string())?;
        ok &= err < 1e-5;
        parts.push(format!("{:?}: {err:.2e}", cfg.layer_sizes));
    }
    check(ok, format!("{} (< 1e-5)", parts.join(", ")))
}

fn desk_training() -> Outcome {
    let d = desk();
    let test = d.data.split_samples(Split::Test);
    let r = evaluate(&d.model, &test, &DEFAULT_THRESHOLDS, Some(Split::Test)).map_err(|e| e.to_string())?;
    let (t2, t1) = (r.accuracy(2.0).unwrap_or(0.0), r.accuracy(1.0).unwrap_or(0.0));
    let secs = d.elapsed.as_secs_f64();
    check(
        t2 >= 80.0 && t1 >= 70.0 && secs < 1800.0,
        format!(
            "Thr(2) {t2:.2}% (>= 80), Thr(1) {t1:.2}% (>= 70), test MSE {:.4}, n = {}, {secs:.0}s",
            r.mse, r.n
        ),
    )
}

fn desk_history() -> Outcome {
    let r = &desk().report;
    let best = r.best_epoch.map(|e| r.val_loss[e]).unwrap_or(r.initial_val_loss);
    let smooth: Vec<f64> = r.train_loss.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    let rises = smooth.windows(2).filter(|w| w[1] > w[0] * 1.01).count();
    check(
        best <= r.initial_val_loss / 10.0 && rises == 0,
        format!(
            "best val loss {best:.3e} vs initial {:.3e}; smoothed train loss rises {rises} times",
            r.initial_val_loss
        ),
    )
}

fn batch_trend() -> Outcome {
    let d = desk();
    let rows = batch_sweep(&d.data, &[10, 30, 100], &desk_config(), 1).map_err(|e| e.to_string())?;
    let mses: Vec<f64> = rows.iter().map(|r| r.test_mse).collect();
    let ok = mses.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let desc = rows
        .iter()
        .map(|r| format!("{}: {:.4} ({:.1}%/{:.1}%)", r.batches, r.test_mse, r.thr2, r.thr1))
        .collect::<Vec<_>>()
        .join(", ");
    check(ok, format!("test MSE by batch count {desc}"))
}

fn damkohler_trend() -> Outcome {
    let d = full_range();
    let rows = damkohler_sweep(
        75.5,
        0.05,
        DAMKOHLER_K,
        &DAMKOHLER_DE_VALUES,
        &d.model,
        &DEFAULT_THRESHOLDS,
        &Lattice::default(),
        1,
    )
    .map_err(|e| e.to_string())?;
    let ok = rows.windows(2).all(|w| w[1].value > w[0].value && w[1].report.mse > w[0].report.mse);
    let desc = rows
        .iter()
        .map(|r| format!("{:e}: {:.4}", r.value, r.report.mse))
        .collect::<Vec<_>>()
        .join(", ");
    check(ok, format!("MSE by de {desc}"))
}

fn metric_properties() -> Outcome {
    let mut notes = Vec::new();
    // threshold monotonicity on a trained model's test predictions
    let d = desk();
    let test = d.data.split_samples(Split::Test);
    let thetas: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
    let r = evaluate(&d.model, &test, &thetas, None).map_err(|e| e.to_string())?;
    let monotone = r.threshold_accuracy.windows(2).all(|w| w[0].percent <= w[1].percent);
    notes.push(format!("monotone in theta: {monotone}"));

    // mse = 0 exactly when every threshold passes
    let oracle = evaluate(&SeriesOracle::new(), &test, &DEFAULT_THRESHOLDS, None).map_err(|e| e.to_string())?;
    let perfect = oracle.mse == 0.0 && oracle.threshold_accuracy.iter().all(|a| a.percent == 100.0);
    let y = [1.0, 2.0, 3.0];
    let off = [1.0, 2.0, 3.0 + 1e-6];
    let imperfect = mse(&off, &y).map_err(|e| e.to_string())? > 0.0
        && threshold_accuracy(&off, &y, 1e-7).map_err(|e| e.to_string())? < 100.0;
    notes.push(format!("mse=0 <=> 100%: {}", perfect && imperfect));

    // Damköhler invariance under L -> sL, De -> s^2 De
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut da_gap = 0.0f64;
    for _ in 0..1000 {
        let spec = ProblemSpec::new(
            10f64.powf(rng.random_range(-13.0..-1.0)),
            10f64.powf(rng.random_range(-10.0..-1.0)),
            75.5,
            rng.random_range(1e-4..0.05),
        )
        .map_err(|e| e.to_string())?;
        let s: f64 = rng.random_range(0.01..100.0);
        let scaled = ProblemSpec {
            de: s * s * spec.de,
            half_thickness: s * spec.half_thickness,
            ..spec
        };
        let (a, b) = (damkohler(&spec, &RegimeThresholds::default()), damkohler(&scaled, &RegimeThresholds::default()));
        da_gap = da_gap.max((a.da - b.da).abs() / a.da);
    }
    notes.push(format!("Da scaling gap {da_gap:.1e}"));

    // normalization round trip
    let ranges = ParameterRanges::full();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let train: Vec<_> = (0..2000)
        .map(|_| rdlab::dataset::Sample {
            features: sample_parameters(&mut rng, &ranges),
            label: 0.0,
            label_source: rdlab::dataset::LabelSource::FiniteDifference,
        })
        .collect();
    let mut norm_gap = 0.0f64;
    for mode in [NormMode::Standard, NormMode::PaperExact] {
        let stats = compute_norm_stats(&train, mode, true).map_err(|e| e.to_string())?;
        for _ in 0..10_000 {
            let f = sample_parameters(&mut rng, &ranges);
            let back = stats.denormalize(&stats.normalize(&f));
            for (a, b) in f.to_array().iter().zip(back.to_array()) {
                if a != &b {
                    norm_gap = norm_gap.max((a - b).abs() / a.abs().max(b.abs()));
                }
            }
        }
    }
    notes.push(format!("normalization round trip {norm_gap:.1e}"));

    // byte-exact determinism, sequential and parallel
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = GenerateOptions {
        n_batches: 20,
        batch_size: 50,
        ranges: ParameterRanges::desk(),
        ..GenerateOptions::default()
    };
    let mut bytes = Vec::new();
    for (name, jobs) in [("a.csv", 1), ("b.csv", 1), ("c.csv", 2)] {
        let path = dir.path().join(name);
        generate(9, &GenerateOptions { jobs, ..opts })
            .and_then(|ds| ds.save(&path))
            .map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let deterministic = bytes.windows(2).all(|w| w[0] == w[1]);
    notes.push(format!("dataset bytes identical: {deterministic}"));

    check(
        monotone && perfect && imperfect && da_gap < 1e-12 && norm_gap < 1e-12 && deterministic,
        notes.join("; "),
    )
}

fn dimensionless() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let fourier: f64 = rng.random_range(0.005..3.0);
        let kt: f64 = rng.random_range(0.0..10.0);
        let x_star: f64 = rng.random_range(-1.0..1.0);
        let c_star = |l: f64, t: f64, c0: f64| -> Result<f64, String> {
            let spec = ProblemSpec::new(fourier * l * l / t, kt / t, c0, l).map_err(|e| e.to_string())?;
            let c = reaction_diffusion_series(&spec, SpaceTimePoint::new(x_star * l, t), &SeriesOptions::default())
                .map_err(|e| e.to_string())?;
            Ok(c / c0)
        };
        let a = c_star(0.05, SECONDS_PER_YEAR, 75.5)?;
        let b = c_star(0.0123, 4.2e5, 180.0)?;
        worst = worst.max((a - b).abs() / a.abs().max(1e-300));
    }
    check(worst < 1e-12, format!("max relative gap in C/c0 {worst:.2e} over 200 matched pairs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 oracle triangle", oracle_triangle),
        ("2 initial and boundary values", ic_bc),
        ("3 steady state", steady_state),
        ("4 finite-difference order", fd_order),
        ("5 gradient check", gradients),
        ("6 desk-scale training", desk_training),
        ("6 desk-scale training history", desk_history),
        ("7 batch-count trend", batch_trend),
        ("8 Damkohler trend", damkohler_trend),
        ("9 metric properties", metric_properties),
        ("10 dimensionless equivalence", dimensionless),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
