//! Command implementations behind the `rdlab` executable.

pub mod args;
pub mod config;
pub mod error;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rdlab::analytic::{
    danckwerts_transform, pure_diffusion_series, pure_reaction, reaction_diffusion_series, steady_state_profile,
    ProblemSpec, SeriesOptions, SpaceTimePoint, SECONDS_PER_YEAR,
};
use rdlab::dataset::{compute_norm_stats, generate, Dataset, GenerateOptions, NormMode, ParameterRanges, Split};
use rdlab::evaluation::{
    batch_sweep, coefficient_sweep, damkohler_sweep, evaluate_dataset, Lattice, SeriesOracle, Surrogate, SweepField,
    Table, DAMKOHLER_DE_VALUES, DAMKOHLER_K, DE_SWEEP_VALUES, K_SWEEP_VALUES,
};
use rdlab::fd::{self, Grid};
use rdlab::mlp::{self, load_checkpoint, save_checkpoint, AdamConfig, NetworkConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use args::*;
pub use error::CliError;

/// File name used inside `gen` output directories.
pub const DATASET_FILE: &str = "dataset.csv";
/// Base reaction rate of the diffusion-coefficient sweep, 1/s.
pub const DE_SWEEP_K: f64 = 2.125e-7;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => solve(&a),
        Command::Gen(a) => gen(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Sweep(a) => sweep(&a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// `dir/model.json` → `dir/model.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Serialize)]
struct Sidecar<'a, A: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a A,
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_sha256: Option<String>,
    outputs: Vec<String>,
}

impl<'a, A: Serialize> Sidecar<'a, A> {
    fn new(command: &'a str, args: &'a A, seed: Option<u64>) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            args,
            seed,
            checkpoint_sha256: None,
            data_sha256: None,
            outputs: Vec::new(),
        }
    }

    /// Writes `<stem>.config.json` next to `output`.
    fn write_next_to(mut self, output: &Path, extra: &[&Path]) -> Result<(), CliError> {
        self.outputs = std::iter::once(output)
            .chain(extra.iter().copied())
            .map(|p| p.display().to_string())
            .collect();
        let path = sibling(output, "config.json");
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn spec_of(a: &SpecArgs) -> Result<ProblemSpec, CliError> {
    Ok(ProblemSpec::new(a.de, a.k, a.c0, a.half_thickness)?)
}

fn point_value(a: &SolveArgs, spec: &ProblemSpec, opts: &SeriesOptions, pt: SpaceTimePoint) -> Result<f64, CliError> {
    if !(pt.x.abs() <= spec.half_thickness) {
        return Err(usage(format!("x = {} lies outside [-{L}, {L}]", pt.x, L = spec.half_thickness)));
    }
    Ok(match a.method {
        Method::Series => reaction_diffusion_series(spec, pt, opts)?,
        Method::PureDiffusion => pure_diffusion_series(spec, pt, opts)?,
        Method::Danckwerts => danckwerts_transform(spec, pt, a.quad_steps, opts)?,
        Method::Steady => steady_state_profile(spec, pt.x),
        Method::PureReaction => pure_reaction(spec.c0, spec.k, pt.t),
        Method::Fd => {
            let grid = solve_grid(a, spec, pt.t.max(1.0))?;
            fd::solve(spec, &grid)?.probe(pt.x, pt.t)?
        }
    })
}

fn solve_grid(a: &SolveArgs, spec: &ProblemSpec, horizon: f64) -> Result<Grid, CliError> {
    let nt = match a.nt {
        Some(nt) => nt,
        None => Grid::for_horizon(spec, horizon)?.nt,
    };
    Ok(Grid::new(a.nx, nt, spec.half_thickness, horizon)?)
}

fn solve(a: &SolveArgs) -> Result<(), CliError> {
    let spec = spec_of(&a.spec)?;
    if !(a.t_years >= 0.0 && a.t_years.is_finite()) {
        return Err(usage(format!("--t-years must be a non-negative number, got {}", a.t_years)));
    }
    let opts = SeriesOptions::with_max_terms(a.terms);
    let t = a.t_years * SECONDS_PER_YEAR;
    let Some(path) = &a.grid else {
        let c = point_value(a, &spec, &opts, SpaceTimePoint::new(a.x, t))?;
        println!("{c}");
        return Ok(());
    };
    if t <= 0.0 {
        return Err(usage("--grid needs a positive --t-years horizon"));
    }
    let grid = solve_grid(a, &spec, t)?;
    let mut out = create(path)?;
    if a.method == Method::Fd {
        fd::solve(&spec, &grid)?.write_csv(&mut out)?;
    } else {
        writeln!(out, "x,t,c")?;
        for n in 0..=grid.nt {
            let tn = grid.t_at(n);
            for j in 0..grid.nx {
                let x = grid.x_at(j);
                let c = point_value(a, &spec, &opts, SpaceTimePoint::new(x, tn))?;
                writeln!(out, "{x:.16e},{tn:.16e},{c:.16e}")?;
            }
        }
    }
    out.flush()?;
    Sidecar::new("solve", a, None).write_next_to(path, &[])?;
    eprintln!("wrote {} x {} lattice to {}", grid.nt + 1, grid.nx, path.display());
    Ok(())
}

fn gen(a: &GenArgs) -> Result<(), CliError> {
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let opts = GenerateOptions {
        n_batches: a.batches as usize,
        batch_size: a.batch_size as usize,
        points_per_spec: a.points_per_spec as usize,
        ranges: match a.ranges {
            RangesPreset::Full => ParameterRanges::full(),
            RangesPreset::Desk => ParameterRanges::desk(),
        },
        norm_mode: match a.norm {
            NormChoice::Standard => NormMode::Standard,
            NormChoice::PaperExact => NormMode::PaperExact,
        },
        log_rates: !a.raw_rates,
        jobs: a.jobs,
        ..GenerateOptions::default()
    };
    let dataset = generate(a.seed, &opts)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::Io(format!("{}: {e}", a.out.display())))?;
    let path = a.out.join(DATASET_FILE);
    dataset.save(&path)?;
    let mut side = Sidecar::new("gen", a, Some(a.seed));
    side.data_sha256 = Some(sha256_file(&path)?);
    side.write_next_to(&path, &[&rdlab::dataset::meta_path(&path)])?;
    println!(
        "wrote {} samples in {} batches (train/val/test {}/{}/{}) to {}",
        dataset.len(),
        dataset.batches.len(),
        dataset.splits.train.len(),
        dataset.splits.validation.len(),
        dataset.splits.test.len(),
        path.display()
    );
    Ok(())
}

fn data_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(DATASET_FILE)
    } else {
        p.to_path_buf()
    }
}

/// Loads a dataset, computing z-score statistics when no sidecar supplied them.
fn load_dataset(p: &Path) -> Result<(Dataset, PathBuf), CliError> {
    let path = data_path(p);
    if !path.exists() {
        return Err(CliError::Io(format!("{}: no such dataset", path.display())));
    }
    let mut dataset = Dataset::load(&path)?;
    if dataset.norm.is_none() {
        dataset.norm = Some(compute_norm_stats(dataset.samples(Split::Train), NormMode::Standard, true)?);
    }
    Ok((dataset, path))
}

fn network_config(a: &NetArgs) -> Result<NetworkConfig, CliError> {
    if a.hidden.is_empty() {
        return Err(usage("--hidden needs at least one layer width"));
    }
    let cfg = NetworkConfig {
        lambda: a.lambda,
        epochs: a.epochs,
        seed: a.seed,
        batch_size: a.batch_size,
        scale_init: !a.unscaled_init,
        lr_decay: a.lr_decay,
        adam: AdamConfig {
            alpha: a.lr,
            ..AdamConfig::default()
        },
        ..NetworkConfig::with_hidden(&a.hidden)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = network_config(&a.net)?;
    let (dataset, data) = load_dataset(&a.data)?;
    let (params, report) = mlp::train(&dataset, &cfg)?;
    let norm = dataset.norm.expect("statistics filled in by load_dataset");
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_checkpoint(&params, &cfg, &norm, &a.out)?;

    let history = sibling(&a.out, "history.csv");
    let mut w = create(&history)?;
    writeln!(w, "epoch,train_loss,val_loss")?;
    writeln!(w, "0,,{:e}", report.initial_val_loss)?;
    for (i, (tl, vl)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        writeln!(w, "{},{tl:e},{vl:e}", i + 1)?;
    }
    w.flush()?;

    let mut side = Sidecar::new("train", a, Some(a.net.seed));
    side.checkpoint_sha256 = Some(sha256_file(&a.out)?);
    side.data_sha256 = Some(sha256_file(&data)?);
    side.write_next_to(&a.out, &[&history])?;
    match report.best_epoch {
        Some(best) => println!(
            "kept epoch {} of {}: validation loss {:e} (initial {:e}), {:.1} s",
            best + 1,
            report.val_loss.len(),
            report.val_loss[best],
            report.initial_val_loss,
            report.wall_time_secs
        ),
        None => println!("kept the initial parameters: validation loss {:e}", report.initial_val_loss),
    }
    Ok(())
}

/// A checkpoint, or the exact series for `oracle`, plus the checkpoint hash.
fn load_model(name: &str) -> Result<(Box<dyn Surrogate>, Option<String>), CliError> {
    if name == "oracle" {
        return Ok((Box::new(SeriesOracle::new()), None));
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(CliError::Io(format!("{name}: no such checkpoint")));
    }
    let checkpoint = load_checkpoint(path)?;
    Ok((Box::new(checkpoint), Some(sha256_file(path)?)))
}

fn check_thresholds(thetas: &[f64]) -> Result<(), CliError> {
    if thetas.is_empty() || thetas.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(usage(format!("thresholds must be positive: {thetas:?}")));
    }
    Ok(())
}

fn emit<A: Serialize>(table: &Table, out: Option<&Path>, side: Sidecar<'_, A>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            side.write_next_to(path, &[])?;
            eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => table.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<(), CliError> {
    check_thresholds(&a.thresholds)?;
    let (model, hash) = load_model(&a.model)?;
    let (dataset, data) = load_dataset(&a.data)?;
    let reports = evaluate_dataset(model.as_ref(), &dataset, &a.thresholds)?;
    let mut side = Sidecar::new("eval", a, dataset.meta.seed);
    side.checkpoint_sha256 = hash;
    if a.out.is_some() {
        side.data_sha256 = Some(sha256_file(&data)?);
    }
    emit(&Table::eval_reports(&reports), a.out.as_deref(), side)
}

fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    check_thresholds(&a.thresholds)?;
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let lattice = Lattice {
        nx: a.lattice_nx,
        nt: a.lattice_nt,
        t_max_years: a.t_max_years,
    };
    let model = || -> Result<(Box<dyn Surrogate>, Option<String>), CliError> {
        let name = a.model.as_deref().ok_or_else(|| usage("this sweep needs --model (a checkpoint or `oracle`)"))?;
        load_model(name)
    };
    let values = |defaults: &[f64]| a.values.clone().unwrap_or_else(|| defaults.to_vec());

    let (table, side) = match a.kind {
        SweepKind::Batch => {
            let data = a.data.as_deref().ok_or_else(|| usage("the batch sweep needs --data"))?;
            let cfg = network_config(&a.net)?;
            let (dataset, path) = load_dataset(data)?;
            let rows = batch_sweep(&dataset, &a.counts, &cfg, a.jobs)?;
            let mut side = Sidecar::new("sweep", a, Some(a.net.seed));
            side.data_sha256 = Some(sha256_file(&path)?);
            (Table::batch_sweep(&rows), side)
        }
        SweepKind::K | SweepKind::De => {
            let (field, defaults, k) = match a.kind {
                SweepKind::K => (SweepField::K, &K_SWEEP_VALUES, 0.0),
                _ => (SweepField::De, &DE_SWEEP_VALUES, a.k.unwrap_or(DE_SWEEP_K)),
            };
            let base = ProblemSpec::new(a.de, k, a.c0, a.half_thickness)?;
            let (model, hash) = model()?;
            let rows =
                coefficient_sweep(&base, field, &values(defaults), model.as_ref(), &a.thresholds, &lattice, a.jobs)?;
            let mut side = Sidecar::new("sweep", a, None);
            side.checkpoint_sha256 = hash;
            (Table::coefficient_sweep(field, &rows), side)
        }
        SweepKind::Damkohler => {
            let (model, hash) = model()?;
            let rows = damkohler_sweep(
                a.c0,
                a.half_thickness,
                a.k.unwrap_or(DAMKOHLER_K),
                &values(&DAMKOHLER_DE_VALUES),
                model.as_ref(),
                &a.thresholds,
                &lattice,
                a.jobs,
            )?;
            let mut side = Sidecar::new("sweep", a, None);
            side.checkpoint_sha256 = hash;
            (Table::damkohler_sweep(&rows), side)
        }
    };
    emit(&table, a.out.as_deref(), side)
}
