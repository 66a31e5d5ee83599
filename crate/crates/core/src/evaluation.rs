//! Error metrics, Damköhler analysis, and the experiment harnesses: batch-count
//! sensitivity, single-coefficient sweeps, and the reaction-dominated sweep.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{reaction_diffusion_series, ProblemSpec, SeriesError, SeriesOptions, SpaceTimePoint, SECONDS_PER_YEAR};
use crate::dataset::{Dataset, DatasetError, Features, Sample, Split, Splits};
use crate::mlp::{self, Checkpoint, MlpError, NetworkConfig};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.5, 1.0, 2.0];
/// Reaction rates of the k sweep, 1/s.
pub const K_SWEEP_VALUES: [f64; 5] = [2.125e-2, 2.125e-5, 2.125e-7, 2.125e-10, 2.125e-13];
/// Diffusion coefficients of the De sweep, m²/s.
pub const DE_SWEEP_VALUES: [f64; 5] = [2.6e-5, 2.6e-7, 2.6e-10, 2.6e-12, 2.6e-15];
/// Diffusion coefficients of the reaction-dominated sweep, m²/s.
pub const DAMKOHLER_DE_VALUES: [f64; 5] = [2e-14, 2e-13, 2e-12, 2e-11, 2e-10];
pub const DAMKOHLER_K: f64 = 2e-4;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} predictions, {1} targets")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_lengths(predictions: &[f64], targets: &[f64]) -> Result<(), EvalError> {
    if predictions.len() != targets.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Mean squared difference.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64, EvalError> {
    check_lengths(predictions, targets)?;
    Ok(predictions.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / predictions.len() as f64)
}

/// Percentage of pairs with `|y − y′| < θ`.
pub fn threshold_accuracy(predictions: &[f64], targets: &[f64], theta: f64) -> Result<f64, EvalError> {
    check_lengths(predictions, targets)?;
    if !(theta > 0.0) {
        return Err(EvalError::InvalidArgument(format!("threshold {theta} must be positive")));
    }
    let hits = predictions.iter().zip(targets).filter(|(p, y)| (*p - *y).abs() < theta).count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAccuracy {
    pub theta: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    /// Sorted by ascending θ.
    pub threshold_accuracy: Vec<ThresholdAccuracy>,
    pub n: usize,
    pub split: Option<Split>,
}

impl EvalReport {
    pub fn accuracy(&self, theta: f64) -> Option<f64> {
        self.threshold_accuracy.iter().find(|a| a.theta == theta).map(|a| a.percent)
    }

    pub fn from_predictions(
        predictions: &[f64],
        targets: &[f64],
        thetas: &[f64],
        split: Option<Split>,
    ) -> Result<Self, EvalError> {
        if thetas.is_empty() {
            return Err(EvalError::InvalidArgument("no thresholds given".into()));
        }
        let mut sorted = thetas.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let threshold_accuracy = sorted
            .into_iter()
            .map(|theta| {
                Ok(ThresholdAccuracy {
                    theta,
                    percent: threshold_accuracy(predictions, targets, theta)?,
                })
            })
            .collect::<Result<_, EvalError>>()?;
        Ok(Self {
            mse: mse(predictions, targets)?,
            threshold_accuracy,
            n: predictions.len(),
            split,
        })
    }
}

/// Anything that maps feature tuples to concentrations.
pub trait Surrogate: Sync {
    fn predict_batch(&self, features: &[Features]) -> Result<Vec<f64>, EvalError>;
}

impl Surrogate for Checkpoint {
    fn predict_batch(&self, features: &[Features]) -> Result<Vec<f64>, EvalError> {
        Ok(self.predict_many(features)?)
    }
}

/// The exact series posing as a model; a perfect reference for harness checks.
#[derive(Debug, Clone, Default)]
pub struct SeriesOracle {
    pub options: SeriesOptions,
}

impl SeriesOracle {
    pub fn new() -> Self {
        Self {
            options: SeriesOptions::labelling(),
        }
    }
}

impl Surrogate for SeriesOracle {
    fn predict_batch(&self, features: &[Features]) -> Result<Vec<f64>, EvalError> {
        features
            .iter()
            .map(|f| Ok(reaction_diffusion_series(&f.spec()?, f.point(), &self.options)?))
            .collect()
    }
}

pub fn evaluate<S: Surrogate + ?Sized>(
    model: &S,
    samples: &[Sample],
    thetas: &[f64],
    split: Option<Split>,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let features: Vec<Features> = samples.iter().map(|s| s.features).collect();
    let targets: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let predictions = model.predict_batch(&features)?;
    EvalReport::from_predictions(&predictions, &targets, thetas, split)
}

/// One report per non-empty split.
pub fn evaluate_dataset<S: Surrogate + ?Sized>(
    model: &S,
    dataset: &Dataset,
    thetas: &[f64],
) -> Result<Vec<EvalReport>, EvalError> {
    Split::ALL
        .into_iter()
        .filter(|s| !dataset.splits.get(*s).is_empty())
        .map(|s| evaluate(model, &dataset.split_samples(s), thetas, Some(s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSweepRow {
    pub batches: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: f64,
    pub thr2: f64,
    pub thr1: f64,
}

/// Trains one model per batch count. A count `n` stands for an `n`-batch
/// dataset: its training share (90%) is taken as a prefix of `base`'s training
/// batches, while validation and test sets are `base`'s own, shared by every
/// row so the rows stay comparable.
pub fn batch_sweep(
    base: &Dataset,
    counts: &[usize],
    config: &NetworkConfig,
    jobs: usize,
) -> Result<Vec<BatchSweepRow>, EvalError> {
    if counts.is_empty() {
        return Err(EvalError::InvalidArgument("no batch counts given".into()));
    }
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidArgument(format!("batch counts must ascend: {counts:?}")));
    }
    if counts[0] == 0 || counts[counts.len() - 1] > base.batches.len() {
        return Err(EvalError::InvalidArgument(format!(
            "batch counts {counts:?} must lie in 1..={}",
            base.batches.len()
        )));
    }
    let row = |&count: &usize| -> Result<BatchSweepRow, EvalError> {
        let n_train = Splits::proportional(count).train.len().max(1);
        let subset = base.with_train_prefix(n_train.min(base.splits.train.len()))?;
        let (params, _) = mlp::train(&subset, config)?;
        let norm = subset.norm.ok_or(MlpError::MissingNorm)?;
        let model = Checkpoint::new(params, config.clone(), norm);
        let report = |split| evaluate(&model, &subset.split_samples(split), &[1.0, 2.0], Some(split));
        let test = report(Split::Test)?;
        Ok(BatchSweepRow {
            batches: count,
            train_mse: report(Split::Train)?.mse,
            val_mse: report(Split::Validation)?.mse,
            test_mse: test.mse,
            thr2: test.accuracy(2.0).unwrap_or(0.0),
            thr1: test.accuracy(1.0).unwrap_or(0.0),
        })
    };
    run_jobs(counts, jobs, row)
}

fn run_jobs<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R, EvalError> + Sync + Send,
) -> Result<Vec<R>, EvalError> {
    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| EvalError::InvalidArgument(e.to_string()))?;
        pool.install(|| items.par_iter().map(&f).collect())
    } else {
        items.iter().map(f).collect()
    }
}

/// Evaluation points of one parameter set: the centres of `nx` equal cells
/// spanning `[−L, L]` by `nt` evenly spaced times on `[0, t_max]`. Cell centres
/// skip the walls, where the boundary condition fixes the answer; an odd `nx`
/// includes `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub nx: usize,
    pub nt: usize,
    pub t_max_years: f64,
}

impl Default for Lattice {
    fn default() -> Self {
        Self {
            nx: 21,
            nt: 15,
            t_max_years: 7.0,
        }
    }
}

impl Lattice {
    pub fn points(&self, half_thickness: f64) -> Vec<SpaceTimePoint> {
        let mut pts = Vec::with_capacity(self.nx * self.nt);
        for it in 0..self.nt {
            let t = if self.nt > 1 {
                it as f64 / (self.nt - 1) as f64 * self.t_max_years * SECONDS_PER_YEAR
            } else {
                0.0
            };
            for ix in 0..self.nx {
                let x = half_thickness * ((2 * ix + 1) as f64 / self.nx as f64 - 1.0);
                pts.push(SpaceTimePoint::new(x, t));
            }
        }
        pts
    }

    /// Series-labelled samples of `spec`.
    pub fn samples(&self, spec: &ProblemSpec) -> Result<Vec<Sample>, EvalError> {
        if self.nx == 0 || self.nt == 0 || !(self.t_max_years >= 0.0) {
            return Err(EvalError::InvalidArgument(format!("lattice {self:?}")));
        }
        let opts = SeriesOptions::labelling();
        self.points(spec.half_thickness)
            .into_iter()
            .map(|pt| {
                Ok(Sample {
                    features: Features::from_spec(spec, pt),
                    label: reaction_diffusion_series(spec, pt, &opts)?,
                    label_source: crate::dataset::LabelSource::AnalyticSeries,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepField {
    K,
    De,
}

impl SweepField {
    pub fn name(&self) -> &'static str {
        match self {
            SweepField::K => "k",
            SweepField::De => "de",
        }
    }

    pub fn apply(&self, base: &ProblemSpec, value: f64) -> ProblemSpec {
        match self {
            SweepField::K => ProblemSpec { k: value, ..*base },
            SweepField::De => ProblemSpec { de: value, ..*base },
        }
    }

    pub fn default_values(&self) -> &'static [f64] {
        match self {
            SweepField::K => &K_SWEEP_VALUES,
            SweepField::De => &DE_SWEEP_VALUES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub da: f64,
    pub report: EvalReport,
}

fn sweep_specs<S: Surrogate + ?Sized>(
    specs: &[(f64, ProblemSpec)],
    model: &S,
    thetas: &[f64],
    lattice: &Lattice,
    jobs: usize,
) -> Result<Vec<SweepRow>, EvalError> {
    for (value, spec) in specs {
        if !(*value > 0.0) {
            return Err(EvalError::InvalidArgument(format!("sweep value {value} must be positive")));
        }
        spec.validate()?;
    }
    run_jobs(specs, jobs, |(value, spec)| {
        let samples = lattice.samples(spec)?;
        Ok(SweepRow {
            value: *value,
            da: damkohler(spec, &RegimeThresholds::default()).da,
            report: evaluate(model, &samples, thetas, None)?,
        })
    })
}

/// Varies one coefficient of `base` and scores the model on series-labelled
/// lattices.
pub fn coefficient_sweep<S: Surrogate + ?Sized>(
    base: &ProblemSpec,
    field: SweepField,
    values: &[f64],
    model: &S,
    thetas: &[f64],
    lattice: &Lattice,
    jobs: usize,
) -> Result<Vec<SweepRow>, EvalError> {
    let specs: Vec<(f64, ProblemSpec)> = values.iter().map(|&v| (v, field.apply(base, v))).collect();
    sweep_specs(&specs, model, thetas, lattice, jobs)
}

/// Diffusion-coefficient sweep at fixed `(c0, L, k)`, rows sorted by
/// decreasing Damköhler number.
pub fn damkohler_sweep<S: Surrogate + ?Sized>(
    c0: f64,
    half_thickness: f64,
    k: f64,
    de_values: &[f64],
    model: &S,
    thetas: &[f64],
    lattice: &Lattice,
    jobs: usize,
) -> Result<Vec<SweepRow>, EvalError> {
    let specs: Vec<(f64, ProblemSpec)> = de_values
        .iter()
        .map(|&de| {
            (
                de,
                ProblemSpec {
                    de,
                    k,
                    c0,
                    half_thickness,
                },
            )
        })
        .collect();
    let mut rows = sweep_specs(&specs, model, thetas, lattice, jobs)?;
    rows.sort_by(|a, b| b.da.total_cmp(&a.da));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PureDiffusion,
    ReactionDiffusion,
    PureReaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Below this, diffusion dominates.
    pub diffusion_below: f64,
    /// Above this, reaction dominates.
    pub reaction_above: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            diffusion_below: 0.1,
            reaction_above: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamkohlerRegime {
    pub da: f64,
    pub regime: Regime,
}

/// `Da = k L² / De`.
pub fn damkohler(spec: &ProblemSpec, thresholds: &RegimeThresholds) -> DamkohlerRegime {
    let da = spec.k * spec.half_thickness * spec.half_thickness / spec.de;
    let regime = if da < thresholds.diffusion_below {
        Regime::PureDiffusion
    } else if da > thresholds.reaction_above {
        Regime::PureReaction
    } else {
        Regime::ReactionDiffusion
    };
    DamkohlerRegime { da, regime }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessGroups {
    pub x_star: f64,
    pub t_star: f64,
    pub c_star: f64,
    /// `De t_c / L²`.
    pub fourier: f64,
    /// `k t_c`.
    pub k_t: f64,
}

/// Scaled coordinates of `pt` with time scale `t_c`; `c_star` comes from the
/// series solution.
pub fn nondimensionalize(spec: &ProblemSpec, pt: SpaceTimePoint, t_c: f64) -> Result<DimensionlessGroups, EvalError> {
    if !(t_c > 0.0 && t_c.is_finite()) {
        return Err(EvalError::InvalidArgument(format!("time scale {t_c} must be positive")));
    }
    let c = reaction_diffusion_series(spec, pt, &SeriesOptions::labelling())?;
    let l = spec.half_thickness;
    Ok(DimensionlessGroups {
        x_star: pt.x / l,
        t_star: pt.t / t_c,
        c_star: if spec.c0 > 0.0 { c / spec.c0 } else { 0.0 },
        fourier: spec.de * t_c / (l * l),
        k_t: spec.k * t_c,
    })
}

/// Header and rows of a result table; percentages keep two decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

impl Table {
    pub fn batch_sweep(rows: &[BatchSweepRow]) -> Self {
        Self {
            columns: ["batches", "train_mse", "val_mse", "test_mse", "thr2_pct", "thr1_pct"]
                .map(String::from)
                .to_vec(),
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        r.batches.to_string(),
                        format!("{:.4}", r.train_mse),
                        format!("{:.4}", r.val_mse),
                        format!("{:.4}", r.test_mse),
                        pct(r.thr2),
                        pct(r.thr1),
                    ]
                })
                .collect(),
        }
    }

    /// Coefficient sweep: the swept value then accuracies from large to small θ.
    pub fn coefficient_sweep(field: SweepField, rows: &[SweepRow]) -> Self {
        let thetas = Self::thetas(rows, true);
        let mut columns = vec![field.name().to_string(), "da".into(), "mse".into()];
        columns.extend(thetas.iter().map(|t| format!("thr{t}_pct")));
        Self {
            columns,
            rows: rows
                .iter()
                .map(|r| {
                    let mut row = vec![num(r.value), num(r.da), format!("{:.4}", r.report.mse)];
                    row.extend(thetas.iter().map(|t| pct(r.report.accuracy(*t).unwrap_or(f64::NAN))));
                    row
                })
                .collect(),
        }
    }

    /// Damköhler sweep: `de, da, mse`, then accuracies from small to large θ.
    pub fn damkohler_sweep(rows: &[SweepRow]) -> Self {
        let thetas = Self::thetas(rows, false);
        let mut columns = vec!["de".to_string(), "da".into(), "mse".into()];
        columns.extend(thetas.iter().map(|t| format!("thr{t}_pct")));
        Self {
            columns,
            rows: rows
                .iter()
                .map(|r| {
                    let mut row = vec![num(r.value), num(r.da), format!("{:.4}", r.report.mse)];
                    row.extend(thetas.iter().map(|t| pct(r.report.accuracy(*t).unwrap_or(f64::NAN))));
                    row
                })
                .collect(),
        }
    }

    pub fn eval_reports(reports: &[EvalReport]) -> Self {
        let thetas: Vec<f64> = reports
            .first()
            .map(|r| r.threshold_accuracy.iter().map(|a| a.theta).collect())
            .unwrap_or_default();
        let mut columns = vec!["split".to_string(), "n".into(), "mse".into()];
        columns.extend(thetas.iter().map(|t| format!("thr{t}_pct")));
        Self {
            columns,
            rows: reports
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.split.map(|s| s.name()).unwrap_or("all").to_string(),
                        r.n.to_string(),
                        format!("{:.6}", r.mse),
                    ];
                    row.extend(thetas.iter().map(|t| pct(r.accuracy(*t).unwrap_or(f64::NAN))));
                    row
                })
                .collect(),
        }
    }

    fn thetas(rows: &[SweepRow], descending: bool) -> Vec<f64> {
        let mut t: Vec<f64> = rows
            .first()
            .map(|r| r.report.threshold_accuracy.iter().map(|a| a.theta).collect())
            .unwrap_or_default();
        if descending {
            t.reverse();
        }
        t
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| EvalError::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_hand_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        let m = mse(&[1.4, 2.6, 5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m - 4.52 / 3.0).abs() < 1e-15);
        let a = threshold_accuracy(&[1.4, 2.6, 5.0], &[1.0, 2.0, 3.0], 0.5).unwrap();
        assert!((a - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(threshold_accuracy(&[3.0, 4.0], &[3.0, 4.0], 1e-9).unwrap(), 100.0);
        assert!(matches!(mse(&[], &[]), Err(EvalError::EmptyInput)));
        assert!(matches!(threshold_accuracy(&[], &[], 1.0), Err(EvalError::EmptyInput)));
        assert!(threshold_accuracy(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn damkohler_regimes() {
        let pr = damkohler(&ProblemSpec::new(2e-14, 2e-4, 75.5, 0.05).unwrap(), &RegimeThresholds::default());
        assert!((pr.da - 2.5e7).abs() < 1e-6);
        assert_eq!(pr.regime, Regime::PureReaction);
        let pd = damkohler(&ProblemSpec::new(2.6e-9, 0.0, 75.5, 0.05).unwrap(), &RegimeThresholds::default());
        assert_eq!((pd.da, pd.regime), (0.0, Regime::PureDiffusion));
        let rd = damkohler(&ProblemSpec::baseline(), &RegimeThresholds::default());
        assert!((rd.da - 0.204).abs() < 1e-3, "{}", rd.da);
        assert_eq!(rd.regime, Regime::ReactionDiffusion);
    }

    #[test]
    fn lattice_layout() {
        let pts = Lattice::default().points(0.05);
        assert_eq!(pts.len(), 21 * 15);
        assert!((pts[0].x + 0.05 * 20.0 / 21.0).abs() < 1e-15);
        assert!((pts[20].x - 0.05 * 20.0 / 21.0).abs() < 1e-15);
        assert_eq!(pts[10].x, 0.0);
        assert_eq!(pts[0].t, 0.0);
        assert_eq!(pts.last().unwrap().t, 7.0 * SECONDS_PER_YEAR);
    }

    #[test]
    fn oracle_scores_perfectly_on_a_sweep() {
        let rows = coefficient_sweep(
            &ProblemSpec::baseline(),
            SweepField::K,
            &[2.125e-7],
            &SeriesOracle::new(),
            &DEFAULT_THRESHOLDS,
            &Lattice {
                nx: 5,
                nt: 3,
                t_max_years: 1.0,
            },
            1,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].report.mse, 0.0);
        assert!(rows[0].report.threshold_accuracy.iter().all(|a| a.percent == 100.0));
        let table = Table::coefficient_sweep(SweepField::K, &rows);
        assert_eq!(table.columns, ["k", "da", "mse", "thr2_pct", "thr1_pct", "thr0.5_pct"]);
        assert_eq!(table.rows[0][3], "100.00");
    }

    #[test]
    fn batch_counts_must_ascend() {
        let ds = crate::dataset::generate(
            1,
            &crate::dataset::GenerateOptions {
                n_batches: 20,
                batch_size: 2,
                ranges: crate::dataset::ParameterRanges::desk(),
                ..Default::default()
            },
        )
        .unwrap();
        let cfg = NetworkConfig {
            epochs: 0,
            ..NetworkConfig::default()
        };
        assert!(batch_sweep(&ds, &[3, 2], &cfg, 1).is_err());
        assert!(batch_sweep(&ds, &[], &cfg, 1).is_err());
        assert!(batch_sweep(&ds, &[21], &cfg, 1).is_err());
        assert_eq!(batch_sweep(&ds, &[2], &cfg, 1).unwrap().len(), 1);
    }
}
