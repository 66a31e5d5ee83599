//! Labelled samples mapping `(c0, L, x, t, k, De)` to the concentration `C(x, t)`.
//!
//! Samples are drawn in groups that share one physical problem so that a single
//! finite-difference solve labels the whole group. Batches carry independent
//! seeds derived from the dataset seed, which makes parallel and sequential
//! generation produce the same bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{reaction_diffusion_series, ProblemSpec, SeriesError, SeriesOptions, SpaceTimePoint, SECONDS_PER_YEAR};
use crate::fd::{self, FdError, Grid};

pub const FEATURE_COUNT: usize = 6;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["c0", "L", "x", "t", "k", "de"];
pub const DEFAULT_BATCH_SIZE: usize = 3000;
const META_VERSION: u32 = 1;
const MAX_REDRAWS: usize = 1000;
/// Floor applied to reaction and diffusion rates before taking logarithms.
const RATE_FLOOR: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("feature `{feature}` is constant on the training split")]
    DegenerateFeature { feature: &'static str },
    #[error("malformed dataset file at line {line}: {reason}")]
    MalformedFile { line: u64, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Sampling ranges. `x` always spans `[−L, L]` of the sampled `L`; the half
/// thickness excludes its lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRanges {
    pub c0: Interval,
    pub half_thickness: Interval,
    pub t_years: Interval,
    pub k: Interval,
    pub de: Interval,
}

impl ParameterRanges {
    /// Full feature ranges of the sulfate-attack study.
    pub fn full() -> Self {
        Self {
            c0: Interval::new(0.0, 200.0),
            half_thickness: Interval::new(0.0, 0.05),
            t_years: Interval::new(0.0, 7.0),
            k: Interval::new(1e-10, 1e-1),
            de: Interval::new(1e-13, 1e-1),
        }
    }

    /// Restricted ranges used for desk-scale training runs.
    pub fn desk() -> Self {
        Self {
            c0: Interval::new(50.0, 100.0),
            k: Interval::new(1e-8, 1e-6),
            de: Interval::new(1e-10, 1e-8),
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let linear = [("c0", self.c0), ("half_thickness", self.half_thickness), ("t_years", self.t_years)];
        for (name, iv) in linear {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo >= 0.0 && iv.hi > iv.lo) {
                return Err(DatasetError::InvalidArgument(format!("range {name} = [{}, {}]", iv.lo, iv.hi)));
            }
        }
        for (name, iv) in [("k", self.k), ("de", self.de)] {
            if !(iv.lo > 0.0 && iv.hi.is_finite() && iv.hi >= iv.lo) {
                return Err(DatasetError::InvalidArgument(format!("range {name} = [{}, {}]", iv.lo, iv.hi)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, f: &Features) -> bool {
        self.c0.contains(f.c0)
            && f.half_thickness > self.half_thickness.lo
            && f.half_thickness <= self.half_thickness.hi
            && f.x.abs() <= f.half_thickness
            && self.t_years.contains(f.t / SECONDS_PER_YEAR)
            && self.k.contains(f.k)
            && self.de.contains(f.de)
    }
}

/// One input tuple in SI units (`t` in seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub c0: f64,
    pub half_thickness: f64,
    pub x: f64,
    pub t: f64,
    pub k: f64,
    pub de: f64,
}

impl Features {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [self.c0, self.half_thickness, self.x, self.t, self.k, self.de]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            c0: v[0],
            half_thickness: v[1],
            x: v[2],
            t: v[3],
            k: v[4],
            de: v[5],
        }
    }

    pub fn spec(&self) -> Result<ProblemSpec, SeriesError> {
        ProblemSpec::new(self.de, self.k, self.c0, self.half_thickness)
    }

    pub fn point(&self) -> SpaceTimePoint {
        SpaceTimePoint::new(self.x, self.t)
    }

    pub fn from_spec(spec: &ProblemSpec, pt: SpaceTimePoint) -> Self {
        Self {
            c0: spec.c0,
            half_thickness: spec.half_thickness,
            x: pt.x,
            t: pt.t,
            k: spec.k,
            de: spec.de,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSource {
    FiniteDifference,
    AnalyticSeries,
}

impl LabelSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelSource::FiniteDifference => "FiniteDifference",
            LabelSource::AnalyticSeries => "AnalyticSeries",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "FiniteDifference" => Some(LabelSource::FiniteDifference),
            "AnalyticSeries" => Some(LabelSource::AnalyticSeries),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Features,
    /// Concentration, mol/m³.
    pub label: f64,
    pub label_source: LabelSource,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Batch {
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// Batch indices of each split.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Contiguous 90/5/5 assignment: train first, then validation, then test.
    pub fn proportional(n_batches: usize) -> Self {
        let n_val = (0.05 * n_batches as f64).round() as usize;
        let n_test = (0.05 * n_batches as f64).round() as usize;
        let n_train = n_batches.saturating_sub(n_val + n_test);
        Self {
            train: (0..n_train).collect(),
            validation: (n_train..n_train + n_val).collect(),
            test: (n_train + n_val..n_batches).collect(),
        }
    }

    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn of_batch(&self, b: usize) -> Option<Split> {
        Split::ALL.into_iter().find(|s| self.get(*s).contains(&b))
    }

    /// Disjoint and covering `0..n_batches`.
    pub fn is_partition_of(&self, n_batches: usize) -> bool {
        let mut seen = vec![false; n_batches];
        for &b in self.train.iter().chain(&self.validation).chain(&self.test) {
            if b >= n_batches || seen[b] {
                return false;
            }
            seen[b] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormMode {
    /// `(x − µ)/σ²` with `σ² = mean(x²)` on raw values.
    PaperExact,
    /// z-score `(x − µ)/σ` with the centred variance.
    #[default]
    Standard,
}

/// Per-feature normalization statistics, computed on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu: [f64; FEATURE_COUNT],
    pub sigma_sq: [f64; FEATURE_COUNT],
    pub mode: NormMode,
    /// Whether `k` and `De` enter as `log10` values.
    pub log_rates: bool,
}

fn is_rate(i: usize) -> bool {
    i == 4 || i == 5
}

impl NormStats {
    fn transform(&self, i: usize, v: f64) -> f64 {
        if self.log_rates && is_rate(i) {
            v.max(RATE_FLOOR).log10()
        } else {
            v
        }
    }

    fn untransform(&self, i: usize, v: f64) -> f64 {
        if self.log_rates && is_rate(i) {
            10f64.powf(v)
        } else {
            v
        }
    }

    fn scale(&self, i: usize) -> f64 {
        match self.mode {
            NormMode::PaperExact => self.sigma_sq[i],
            NormMode::Standard => self.sigma_sq[i].sqrt(),
        }
    }

    pub fn normalize(&self, f: &Features) -> [f64; FEATURE_COUNT] {
        let raw = f.to_array();
        std::array::from_fn(|i| (self.transform(i, raw[i]) - self.mu[i]) / self.scale(i))
    }

    pub fn denormalize(&self, v: &[f64; FEATURE_COUNT]) -> Features {
        Features::from_array(std::array::from_fn(|i| self.untransform(i, v[i].mul_add(self.scale(i), self.mu[i]))))
    }
}

/// Mean and scale statistic of one feature column.
pub fn feature_stats(values: &[f64], mode: NormMode) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let m = values.len() as f64;
    let mu = values.iter().sum::<f64>() / m;
    let variance = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
    if !(variance > 0.0) {
        return None;
    }
    let sigma_sq = match mode {
        NormMode::PaperExact => values.iter().map(|v| v * v).sum::<f64>() / m,
        NormMode::Standard => variance,
    };
    Some((mu, sigma_sq))
}

pub fn compute_norm_stats<'a, I>(samples: I, mode: NormMode, log_rates: bool) -> Result<NormStats, DatasetError>
where
    I: IntoIterator<Item = &'a Sample>,
{
    let mut columns: [Vec<f64>; FEATURE_COUNT] = Default::default();
    let mut stats = NormStats {
        mu: [0.0; FEATURE_COUNT],
        sigma_sq: [1.0; FEATURE_COUNT],
        mode,
        log_rates,
    };
    for s in samples {
        for (i, v) in s.features.to_array().into_iter().enumerate() {
            columns[i].push(stats.transform(i, v));
        }
    }
    if columns[0].is_empty() {
        return Err(DatasetError::InvalidArgument("training split is empty".into()));
    }
    for (i, col) in columns.iter().enumerate() {
        let (mu, sigma_sq) = feature_stats(col, mode).ok_or(DatasetError::DegenerateFeature {
            feature: FEATURE_NAMES[i],
        })?;
        stats.mu[i] = mu;
        stats.sigma_sq[i] = sigma_sq;
    }
    Ok(stats)
}

/// Draws from `N(mean, sd)` until the value lies in `[lo, hi]`; clamps after
/// the redraw budget is spent.
fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64, open_lo: bool) -> f64 {
    let normal = Normal::new(mean, sd.max(f64::MIN_POSITIVE)).expect("finite normal parameters");
    let ok = |v: f64| (if open_lo { v > lo } else { v >= lo }) && v <= hi;
    for _ in 0..MAX_REDRAWS {
        let v = normal.sample(rng);
        if ok(v) {
            return v;
        }
    }
    if open_lo {
        mean.clamp(lo + f64::EPSILON * hi.abs().max(1.0), hi)
    } else {
        mean.clamp(lo, hi)
    }
}

/// Picks a decade uniformly, then a Gaussian offset inside it, within `[lo, hi]`.
fn decade_sample<R: Rng + ?Sized>(rng: &mut R, range: Interval) -> f64 {
    let (elo, ehi) = (range.lo.log10(), range.hi.log10());
    if ehi <= elo {
        return range.lo;
    }
    let first = elo.floor() as i32;
    let last = (ehi.ceil() as i32 - 1).max(first);
    let offset = Normal::new(0.5, 0.25).expect("finite normal parameters");
    for _ in 0..MAX_REDRAWS {
        let decade = rng.random_range(first..=last);
        let e = decade as f64 + offset.sample(rng);
        if e >= elo && e <= ehi && e >= decade as f64 && e < decade as f64 + 1.0 {
            return 10f64.powf(e).clamp(range.lo, range.hi);
        }
    }
    10f64.powf(0.5 * (elo + ehi))
}

/// Physical parameters `(c0, L, k, De)` of one draw.
pub fn sample_spec<R: Rng + ?Sized>(rng: &mut R, ranges: &ParameterRanges) -> ProblemSpec {
    let c0 = truncated_normal(rng, ranges.c0.mid(), ranges.c0.width() / 4.0, ranges.c0.lo, ranges.c0.hi, false);
    let l = &ranges.half_thickness;
    let half_thickness = truncated_normal(rng, l.mid(), l.width() / 4.0, l.lo, l.hi, true);
    let k = decade_sample(rng, ranges.k);
    let de = decade_sample(rng, ranges.de);
    ProblemSpec {
        de,
        k,
        c0,
        half_thickness,
    }
}

/// Position and time (seconds) of one draw inside a slab of half width `half_thickness`.
pub fn sample_point<R: Rng + ?Sized>(rng: &mut R, ranges: &ParameterRanges, half_thickness: f64) -> SpaceTimePoint {
    let x = truncated_normal(rng, 0.0, half_thickness / 2.0, -half_thickness, half_thickness, false);
    let t = &ranges.t_years;
    let years = truncated_normal(rng, t.mid(), t.width() / 4.0, t.lo, t.hi, false);
    SpaceTimePoint::new(x, years * SECONDS_PER_YEAR)
}

/// One full feature tuple.
pub fn sample_parameters<R: Rng + ?Sized>(rng: &mut R, ranges: &ParameterRanges) -> Features {
    let spec = sample_spec(rng, ranges);
    let pt = sample_point(rng, ranges, spec.half_thickness);
    Features::from_spec(&spec, pt)
}

/// Labels points that share one problem; the finite-difference route runs a
/// single solve whose horizon covers the latest point.
pub fn label_group(
    spec: &ProblemSpec,
    points: &[SpaceTimePoint],
    source: LabelSource,
) -> Result<Vec<Sample>, DatasetError> {
    spec.validate()?;
    let labels: Vec<f64> = match source {
        LabelSource::AnalyticSeries => {
            let opts = SeriesOptions::labelling();
            points
                .iter()
                .map(|pt| reaction_diffusion_series(spec, *pt, &opts))
                .collect::<Result<_, _>>()?
        }
        LabelSource::FiniteDifference => {
            let horizon = points.iter().map(|p| p.t).fold(0.0, f64::max);
            if horizon > 0.0 {
                let field = fd::solve(spec, &Grid::for_horizon(spec, horizon)?)?;
                points.iter().map(|pt| field.probe(pt.x, pt.t)).collect::<Result<_, _>>()?
            } else {
                points
                    .iter()
                    .map(|pt| if pt.x.abs() >= spec.half_thickness { spec.c0 } else { 0.0 })
                    .collect()
            }
        }
    };
    Ok(points
        .iter()
        .zip(labels)
        .map(|(pt, label)| Sample {
            features: Features::from_spec(spec, *pt),
            label,
            label_source: source,
        })
        .collect())
}

pub fn label_sample(features: &Features, source: LabelSource) -> Result<Sample, DatasetError> {
    let spec = features.spec()?;
    Ok(label_group(&spec, &[features.point()], source)?.remove(0))
}

/// Label source per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSources {
    pub train: LabelSource,
    pub validation: LabelSource,
    pub test: LabelSource,
}

impl Default for SplitSources {
    fn default() -> Self {
        Self {
            train: LabelSource::FiniteDifference,
            validation: LabelSource::FiniteDifference,
            test: LabelSource::AnalyticSeries,
        }
    }
}

impl SplitSources {
    pub fn get(&self, split: Split) -> LabelSource {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub n_batches: usize,
    pub batch_size: usize,
    /// Samples drawn per physical problem (one cached solve each).
    pub points_per_spec: usize,
    pub ranges: ParameterRanges,
    pub sources: SplitSources,
    pub norm_mode: NormMode,
    pub log_rates: bool,
    /// Worker threads; 1 runs sequentially.
    pub jobs: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            n_batches: 1000,
            batch_size: DEFAULT_BATCH_SIZE,
            points_per_spec: 10,
            ranges: ParameterRanges::full(),
            sources: SplitSources::default(),
            norm_mode: NormMode::Standard,
            log_rates: true,
            jobs: 1,
        }
    }
}

/// Generation provenance stored next to the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    pub ranges: Option<ParameterRanges>,
    pub points_per_spec: Option<usize>,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub batches: Vec<Batch>,
    pub splits: Splits,
    pub norm: Option<NormStats>,
    pub meta: DatasetMeta,
}

/// Seed of batch `index`, independent of generation order.
pub fn batch_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn generate_batch(seed: u64, index: usize, opts: &GenerateOptions, source: LabelSource) -> Result<Batch, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed(seed, index));
    let per_spec = opts.points_per_spec.max(1);
    let mut samples = Vec::with_capacity(opts.batch_size);
    while samples.len() < opts.batch_size {
        let spec = sample_spec(&mut rng, &opts.ranges);
        let count = per_spec.min(opts.batch_size - samples.len());
        let points: Vec<SpaceTimePoint> = (0..count)
            .map(|_| sample_point(&mut rng, &opts.ranges, spec.half_thickness))
            .collect();
        match label_group(&spec, &points, source) {
            Ok(group) => samples.extend(group),
            // Draws too close to t = 0 for the series budget are replaced.
            Err(DatasetError::Series(SeriesError::NonConvergence { .. })) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Batch { samples })
}

pub fn generate(seed: u64, opts: &GenerateOptions) -> Result<Dataset, DatasetError> {
    if opts.n_batches == 0 {
        return Err(DatasetError::InvalidArgument("n_batches must be at least 1".into()));
    }
    if opts.batch_size == 0 {
        return Err(DatasetError::InvalidArgument("batch_size must be at least 1".into()));
    }
    opts.ranges.validate()?;
    let splits = Splits::proportional(opts.n_batches);
    let source_of = |b: usize| opts.sources.get(splits.of_batch(b).unwrap_or(Split::Train));
    let make = |b: usize| generate_batch(seed, b, opts, source_of(b));

    let batches: Vec<Batch> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| DatasetError::InvalidArgument(e.to_string()))?;
        pool.install(|| (0..opts.n_batches).into_par_iter().map(make).collect::<Result<_, _>>())?
    } else {
        (0..opts.n_batches).map(make).collect::<Result<_, _>>()?
    };

    let mut dataset = Dataset {
        batches,
        splits,
        norm: None,
        meta: DatasetMeta {
            seed: Some(seed),
            ranges: Some(opts.ranges),
            points_per_spec: Some(opts.points_per_spec),
            batch_size: opts.batch_size,
        },
    };
    if !dataset.splits.train.is_empty() {
        dataset.norm = Some(compute_norm_stats(dataset.samples(Split::Train), opts.norm_mode, opts.log_rates)?);
    }
    Ok(dataset)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.batches.iter().map(|b| b.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.splits
            .get(split)
            .iter()
            .flat_map(move |&b| self.batches[b].samples.iter())
    }

    pub fn split_samples(&self, split: Split) -> Vec<Sample> {
        self.samples(split).copied().collect()
    }

    /// Dataset restricted to the first `n_train` training batches; validation
    /// and test splits are kept whole.
    pub fn with_train_prefix(&self, n_train: usize) -> Result<Dataset, DatasetError> {
        if n_train == 0 || n_train > self.splits.train.len() {
            return Err(DatasetError::InvalidArgument(format!(
                "train prefix {n_train} outside 1..={}",
                self.splits.train.len()
            )));
        }
        let keep: Vec<usize> = self.splits.train[..n_train]
            .iter()
            .chain(&self.splits.validation)
            .chain(&self.splits.test)
            .copied()
            .collect();
        let batches = keep.iter().map(|&b| self.batches[b].clone()).collect();
        let n_val = self.splits.validation.len();
        let splits = Splits {
            train: (0..n_train).collect(),
            validation: (n_train..n_train + n_val).collect(),
            test: (n_train + n_val..keep.len()).collect(),
        };
        let mut subset = Dataset {
            batches,
            splits,
            norm: None,
            meta: self.meta.clone(),
        };
        let (mode, log_rates) = self
            .norm
            .map(|n| (n.mode, n.log_rates))
            .unwrap_or((NormMode::Standard, true));
        subset.norm = Some(compute_norm_stats(subset.samples(Split::Train), mode, log_rates)?);
        Ok(subset)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        let meta = MetaFile {
            format_version: META_VERSION,
            seed: self.meta.seed,
            batch_size: self.meta.batch_size,
            n_batches: self.batches.len(),
            points_per_spec: self.meta.points_per_spec,
            ranges: self.meta.ranges,
            splits: self.splits.clone(),
            norm: self.norm,
        };
        let mut side = BufWriter::new(File::create(meta_path(path))?);
        serde_json::to_writer_pretty(&mut side, &meta).map_err(std::io::Error::other)?;
        side.write_all(b"\n")?;
        side.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "c0,L,x,t,k,de,c,source")?;
        for s in self.batches.iter().flat_map(|b| &b.samples) {
            let f = &s.features;
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                f.c0,
                f.half_thickness,
                f.x,
                f.t,
                f.k,
                f.de,
                s.label,
                s.label_source.as_str()
            )?;
        }
        Ok(())
    }

    /// Reads the CSV and its `.meta.json` sidecar. Without a sidecar the batch
    /// size defaults to 3000 and splits follow the 90/5/5 rule.
    pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
        let samples = read_samples(path)?;
        let meta_file = meta_path(path);
        let meta: Option<MetaFile> = if meta_file.exists() {
            let text = std::fs::read_to_string(&meta_file)?;
            let m: MetaFile = serde_json::from_str(&text).map_err(|e| DatasetError::MalformedFile {
                line: e.line() as u64,
                reason: format!("{}: {e}", meta_file.display()),
            })?;
            if m.format_version != META_VERSION {
                return Err(DatasetError::MalformedFile {
                    line: 0,
                    reason: format!("unsupported metadata version {}", m.format_version),
                });
            }
            Some(m)
        } else {
            None
        };
        let batch_size = meta.as_ref().map(|m| m.batch_size).unwrap_or(DEFAULT_BATCH_SIZE);
        if batch_size == 0 || samples.len() % batch_size != 0 {
            return Err(DatasetError::MalformedFile {
                line: samples.len() as u64 + 1,
                reason: format!("{} rows do not fill batches of {batch_size}", samples.len()),
            });
        }
        let batches: Vec<Batch> = samples
            .chunks(batch_size)
            .map(|c| Batch { samples: c.to_vec() })
            .collect();
        let n_batches = batches.len();
        let (splits, norm, seed, ranges, points_per_spec) = match meta {
            Some(m) => {
                if m.n_batches != n_batches || !m.splits.is_partition_of(n_batches) {
                    return Err(DatasetError::MalformedFile {
                        line: samples.len() as u64 + 1,
                        reason: format!("metadata lists {} batches, file holds {n_batches}", m.n_batches),
                    });
                }
                (m.splits, m.norm, m.seed, m.ranges, m.points_per_spec)
            }
            None => (Splits::proportional(n_batches), None, None, None, None),
        };
        Ok(Dataset {
            batches,
            splits,
            norm,
            meta: DatasetMeta {
                seed,
                ranges,
                points_per_spec,
                batch_size,
            },
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    format_version: u32,
    seed: Option<u64>,
    batch_size: usize,
    n_batches: usize,
    points_per_spec: Option<usize>,
    ranges: Option<ParameterRanges>,
    splits: Splits,
    norm: Option<NormStats>,
}

/// `data/train.csv` → `data/train.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

fn read_samples(path: &Path) -> Result<Vec<Sample>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    let expected = ["c0", "L", "x", "t", "k", "de", "c", "source"];
    if header.iter().ne(expected.iter().copied()) {
        return Err(DatasetError::MalformedFile {
            line: 1,
            reason: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| DatasetError::MalformedFile { line, reason };
        let mut nums = [0.0; 7];
        for (i, slot) in nums.iter_mut().enumerate() {
            let field = record.get(i).ok_or_else(|| bad(format!("missing column {}", expected[i])))?;
            *slot = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("column {} is not a number: `{field}`", expected[i])))?;
        }
        let source_field = record.get(7).unwrap_or("");
        let label_source =
            LabelSource::parse(source_field.trim()).ok_or_else(|| bad(format!("unknown label source `{source_field}`")))?;
        samples.push(Sample {
            features: Features::from_array([nums[0], nums[1], nums[2], nums[3], nums[4], nums[5]]),
            label: nums[6],
            label_source,
        });
    }
    Ok(samples)
}

fn csv_error(e: csv::Error) -> DatasetError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        kind => DatasetError::MalformedFile {
            line,
            reason: format!("{kind:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_options(n_batches: usize, batch_size: usize) -> GenerateOptions {
        GenerateOptions {
            n_batches,
            batch_size,
            points_per_spec: 5,
            ranges: ParameterRanges::desk(),
            ..GenerateOptions::default()
        }
    }

    #[test]
    fn proportional_split_of_twenty() {
        let s = Splits::proportional(20);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (18, 1, 1));
        assert!(s.is_partition_of(20));
        for n in 20..200 {
            assert!(Splits::proportional(n).is_partition_of(n));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let ranges = ParameterRanges::full();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let fa = sample_parameters(&mut a, &ranges);
            assert_eq!(fa, sample_parameters(&mut b, &ranges));
            assert!(ranges.contains(&fa), "{fa:?}");
        }
    }

    #[test]
    fn second_moment_and_zscore_stats() {
        let (mu, s2) = feature_stats(&[1.0, 2.0, 3.0], NormMode::PaperExact).unwrap();
        assert_eq!(mu, 2.0);
        assert!((s2 - 14.0 / 3.0).abs() < 1e-15);
        assert_eq!((2.0 - mu) / s2, 0.0);
        let (mu, s2) = feature_stats(&[1.0, 2.0, 3.0], NormMode::Standard).unwrap();
        assert_eq!(mu, 2.0);
        assert!((s2 - 2.0 / 3.0).abs() < 1e-15);
        assert!(((3.0 - mu) / s2.sqrt() - 1.5f64.sqrt()).abs() < 1e-15);
        assert!(feature_stats(&[2.0, 2.0, 2.0], NormMode::Standard).is_none());
        assert!(feature_stats(&[2.0, 2.0, 2.0], NormMode::PaperExact).is_none());
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let sample = |x: f64| Sample {
            features: Features {
                c0: 2.0,
                half_thickness: 0.05,
                x,
                t: 1.0,
                k: 1e-7,
                de: 1e-9,
            },
            label: 0.0,
            label_source: LabelSource::FiniteDifference,
        };
        let samples = [sample(0.0), sample(0.01), sample(0.02)];
        let err = compute_norm_stats(&samples, NormMode::Standard, true).unwrap_err();
        assert!(matches!(err, DatasetError::DegenerateFeature { feature: "c0" }));
    }

    #[test]
    fn labels_at_initial_time_and_wall() {
        let spec = ProblemSpec::baseline();
        for source in [LabelSource::FiniteDifference, LabelSource::AnalyticSeries] {
            let interior = label_sample(&Features::from_spec(&spec, SpaceTimePoint::new(0.01, 0.0)), source).unwrap();
            assert_eq!(interior.label, 0.0);
            let wall = label_sample(&Features::from_spec(&spec, SpaceTimePoint::new(0.05, 2e7)), source).unwrap();
            assert_eq!(wall.label, spec.c0);
            assert_eq!(wall.label_source, source);
        }
    }

    #[test]
    fn fd_and_series_labels_agree_on_baseline() {
        let spec = ProblemSpec::baseline();
        for (x, years) in [(0.0, 1.0), (0.02, 0.5), (-0.04, 3.0), (0.013, 6.5)] {
            let f = Features::from_spec(&spec, SpaceTimePoint::in_years(x, years));
            let a = label_sample(&f, LabelSource::FiniteDifference).unwrap().label;
            let b = label_sample(&f, LabelSource::AnalyticSeries).unwrap().label;
            assert!((a - b).abs() < 0.005 * spec.c0, "{a} vs {b} at {x}, {years}");
        }
    }

    #[test]
    fn generation_shapes_and_sources() {
        let ds = generate(3, &small_options(20, 10)).unwrap();
        assert_eq!(ds.batches.len(), 20);
        assert_eq!(ds.len(), 200);
        assert!(ds.batches.iter().all(|b| b.samples.len() == 10));
        assert!(ds.samples(Split::Test).all(|s| s.label_source == LabelSource::AnalyticSeries));
        assert!(ds.samples(Split::Train).all(|s| s.label_source == LabelSource::FiniteDifference));
        for s in ds.batches.iter().flat_map(|b| &b.samples) {
            assert!(s.label >= 0.0 && s.label <= s.features.c0 * (1.0 + 1e-6));
            assert!(s.features.x.abs() <= s.features.half_thickness);
        }
        assert!(ds.norm.is_some());
    }

    #[test]
    fn parallel_generation_matches_sequential() {
        let seq = generate(9, &small_options(6, 8)).unwrap();
        let par = generate(9, &GenerateOptions { jobs: 3, ..small_options(6, 8) }).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn zero_batches_rejected() {
        assert!(matches!(generate(1, &small_options(0, 10)), Err(DatasetError::InvalidArgument(_))));
    }

    #[test]
    fn train_prefix_keeps_evaluation_splits() {
        let ds = generate(5, &small_options(20, 4)).unwrap();
        let sub = ds.with_train_prefix(3).unwrap();
        assert_eq!(sub.splits.train.len(), 3);
        assert_eq!(sub.split_samples(Split::Test), ds.split_samples(Split::Test));
        assert_eq!(sub.split_samples(Split::Validation), ds.split_samples(Split::Validation));
        assert_eq!(sub.batches[..3], ds.batches[..3]);
        assert!(ds.with_train_prefix(0).is_err());
    }

    #[test]
    fn meta_path_uses_stem() {
        assert_eq!(meta_path(Path::new("out/data.csv")), PathBuf::from("out/data.meta.json"));
    }
}
