//! Fit-quality protocols: average relative error, R², seeded k-fold cross
//! validation, leave-one-group-out (by model size or benchmark), and the
//! seed-by-family stability sweep.
//!
//! All shuffles run off the crate's portable splitmix stream, so reports
//! are reproducible across platforms given (data, config, seed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitter::{fit_two_stage, FitConfig, LawFamily};
use crate::laws::{eval_2d, eval_3d_raw, Params2D, Params3D};
use crate::numeric::{mean, sample_std};
use crate::records::{Dataset, RunRecord};
use crate::rng::SplitMix64;
use crate::synth::params_label;

/// Mean absolute relative error in percent.
pub fn are(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: obs.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = 0.0;
    for (&p, &o) in pred.iter().zip(obs) {
        if o <= 0.0 {
            return Err(Error::NonPositiveInput(o));
        }
        sum += ((p - o) / o).abs();
    }
    Ok(sum / pred.len() as f64 * 100.0)
}

/// Coefficient of determination, `1 - SS_res/SS_tot`, about the mean of the
/// observations. Can be negative for fits worse than the mean.
pub fn r_squared(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: obs.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean_obs = mean(obs);
    let ss_tot: f64 = obs.iter().map(|o| (o - mean_obs) * (o - mean_obs)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Cv,
    Lomo,
    Lodo,
    Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    ModelSize,
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub held_out_label: String,
    pub n_points: usize,
    pub are_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub protocol: Protocol,
    /// Mean ARE across folds, in percent.
    pub are_percent: f64,
    /// Pooled over all held-out predictions (one sum of squares, not a mean
    /// of per-fold values, which is unstable on small folds).
    pub r_squared: f64,
    pub per_fold: Vec<FoldOutcome>,
    pub seed: u64,
    pub folds: usize,
    pub repeats: usize,
}

/// A fitted law used to predict held-out records: either refit per fold or
/// supplied fixed by the caller.
#[derive(Debug, Clone, Copy)]
pub enum LawPredictor {
    TwoD(Params2D),
    ThreeD(Params3D),
}

impl LawPredictor {
    pub fn predict(&self, record: &RunRecord) -> f64 {
        let n = record.model_params as f64;
        let d = record.pretrain_tokens as f64;
        match self {
            LawPredictor::TwoD(p) => eval_2d(p, n, d),
            LawPredictor::ThreeD(p) => eval_3d_raw(p, n, d, record.retrieval_tokens as f64),
        }
    }
}

fn refit_trainer(cfg: &FitConfig) -> impl Fn(&[RunRecord]) -> Result<LawPredictor> + '_ {
    move |records: &[RunRecord]| {
        let ds = Dataset::from_records(records.to_vec(), "fold")?;
        let (stage1, stage2) = fit_two_stage(&ds, cfg)?;
        Ok(match stage2 {
            Some(s2) => LawPredictor::ThreeD(*s2.params.as_3d().expect("stage 2 is 3d")),
            None => LawPredictor::TwoD(*stage1.params.as_2d().expect("stage 1 is 2d")),
        })
    }
}

struct FoldRun {
    label: String,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn run_folds<T>(
    data: &Dataset,
    folds: &[FoldRun],
    trainer: T,
) -> Result<(Vec<FoldOutcome>, Vec<f64>, Vec<f64>)>
where
    T: Fn(&[RunRecord]) -> Result<LawPredictor>,
{
    let mut outcomes = Vec::with_capacity(folds.len());
    let mut pooled_pred = Vec::new();
    let mut pooled_obs = Vec::new();
    for fold in folds {
        let train: Vec<RunRecord> = fold
            .train
            .iter()
            .map(|&i| data.records[i].clone())
            .collect();
        let predictor = trainer(&train).map_err(|e| match e {
            Error::InsufficientData(msg) => {
                Error::InsufficientData(format!("fold {}: {msg}", fold.label))
            }
            other => other,
        })?;
        let mut pred = Vec::with_capacity(fold.test.len());
        let mut obs = Vec::with_capacity(fold.test.len());
        for &i in &fold.test {
            pred.push(predictor.predict(&data.records[i]));
            obs.push(data.records[i].loss);
        }
        let fold_are = are(&pred, &obs)?;
        outcomes.push(FoldOutcome {
            held_out_label: fold.label.clone(),
            n_points: fold.test.len(),
            are_percent: fold_are,
        });
        pooled_pred.extend(pred);
        pooled_obs.extend(obs);
    }
    Ok((outcomes, pooled_pred, pooled_obs))
}

fn cv_folds(n: usize, folds: usize, repeats: usize, seed: u64) -> Vec<FoldRun> {
    let mut out = Vec::with_capacity(folds * repeats);
    for rep in 0..repeats {
        let mut order: Vec<usize> = (0..n).collect();
        SplitMix64::substream(seed, rep as u64).shuffle(&mut order);
        let base = n / folds;
        let extra = n % folds;
        let mut cursor = 0;
        for f in 0..folds {
            let size = base + usize::from(f < extra);
            let test: Vec<usize> = order[cursor..cursor + size].to_vec();
            cursor += size;
            let mut train: Vec<usize> = order[..cursor - size]
                .iter()
                .chain(&order[cursor..])
                .copied()
                .collect();
            train.sort_unstable();
            out.push(FoldRun {
                label: format!("repeat{rep}/fold{f}"),
                train,
                test,
            });
        }
    }
    out
}

/// Repeated random k-fold cross validation with per-fold refits. Fold sizes
/// differ by at most one; every record is held out exactly once per repeat.
pub fn cross_validate(
    data: &Dataset,
    cfg: &FitConfig,
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<ValidationReport> {
    cross_validate_with(data, refit_trainer(cfg), folds, repeats, seed)
}

/// Cross validation against a caller-supplied fixed law (no refitting).
pub fn cross_validate_fixed(
    data: &Dataset,
    law: LawPredictor,
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<ValidationReport> {
    cross_validate_with(data, move |_: &[RunRecord]| Ok(law), folds, repeats, seed)
}

fn cross_validate_with<T>(
    data: &Dataset,
    trainer: T,
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<ValidationReport>
where
    T: Fn(&[RunRecord]) -> Result<LawPredictor>,
{
    if folds < 2 || folds > data.len() {
        return Err(Error::InvalidArgument(format!(
            "folds must be in [2, {}], got {folds}",
            data.len()
        )));
    }
    if repeats < 1 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let fold_runs = cv_folds(data.len(), folds, repeats, seed);
    let (per_fold, pred, obs) = run_folds(data, &fold_runs, trainer)?;
    Ok(ValidationReport {
        protocol: Protocol::Cv,
        are_percent: mean(&per_fold.iter().map(|f| f.are_percent).collect::<Vec<_>>()),
        r_squared: r_squared(&pred, &obs)?,
        per_fold,
        seed,
        folds,
        repeats,
    })
}

fn group_labels(data: &Dataset, group_by: GroupBy) -> Vec<(String, Vec<usize>)> {
    match group_by {
        GroupBy::ModelSize => {
            let mut sizes: Vec<u64> = data.records.iter().map(|r| r.model_params).collect();
            sizes.sort_unstable();
            sizes.dedup();
            sizes
                .into_iter()
                .map(|size| {
                    let members = data
                        .records
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| r.model_params == size)
                        .map(|(i, _)| i)
                        .collect();
                    (params_label(size), members)
                })
                .collect()
        }
        GroupBy::Benchmark => {
            let mut names: Vec<String> = data.records.iter().map(|r| r.benchmark.clone()).collect();
            names.sort();
            names.dedup();
            names
                .into_iter()
                .map(|name| {
                    let members = data
                        .records
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| r.benchmark == name)
                        .map(|(i, _)| i)
                        .collect();
                    (name, members)
                })
                .collect()
        }
    }
}

/// One fold per distinct group: LOMO when grouping by model size
/// (extrapolation to an unseen scale), LODO when grouping by benchmark
/// (the law is refit on the pooled remaining benchmarks).
pub fn leave_one_group_out(
    data: &Dataset,
    cfg: &FitConfig,
    group_by: GroupBy,
) -> Result<ValidationReport> {
    leave_one_group_out_with(data, refit_trainer(cfg), group_by, cfg.seed)
}

/// Leave-one-group-out against a fixed law (no refitting).
pub fn leave_one_group_out_fixed(
    data: &Dataset,
    law: LawPredictor,
    group_by: GroupBy,
    seed: u64,
) -> Result<ValidationReport> {
    leave_one_group_out_with(data, move |_: &[RunRecord]| Ok(law), group_by, seed)
}

fn leave_one_group_out_with<T>(
    data: &Dataset,
    trainer: T,
    group_by: GroupBy,
    seed: u64,
) -> Result<ValidationReport>
where
    T: Fn(&[RunRecord]) -> Result<LawPredictor>,
{
    let groups = group_labels(data, group_by);
    if groups.len() < 2 {
        return Err(Error::SingleGroup(
            match group_by {
                GroupBy::ModelSize => "model_size",
                GroupBy::Benchmark => "benchmark",
            }
            .to_string(),
        ));
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let fold_runs: Vec<FoldRun> = groups
        .into_iter()
        .map(|(label, members)| {
            let train: Vec<usize> = all
                .iter()
                .copied()
                .filter(|i| !members.contains(i))
                .collect();
            FoldRun {
                label,
                train,
                test: members,
            }
        })
        .collect();
    let folds = fold_runs.len();
    let (per_fold, pred, obs) = run_folds(data, &fold_runs, trainer)?;
    Ok(ValidationReport {
        protocol: match group_by {
            GroupBy::ModelSize => Protocol::Lomo,
            GroupBy::Benchmark => Protocol::Lodo,
        },
        are_percent: mean(&per_fold.iter().map(|f| f.are_percent).collect::<Vec<_>>()),
        r_squared: r_squared(&pred, &obs)?,
        per_fold,
        seed,
        folds,
        repeats: 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub benchmark: String,
    pub subset_id: String,
    pub cv_are: f64,
    pub lomo_are: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub benchmark: String,
    pub subsets: usize,
    pub cv_are_mean: f64,
    pub cv_are_std: f64,
    pub lomo_are_mean: f64,
    pub lomo_are_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub entries: Vec<StabilityEntry>,
    pub summaries: Vec<StabilitySummary>,
    pub seed: u64,
}

/// Enumerates every combination choosing one seed label per family
/// (seeds^families subsets), fits and validates each subset, and summarizes
/// CV and LOMO ARE per benchmark as mean ± sample standard deviation.
pub fn stability_report(
    data: &Dataset,
    cfg: &FitConfig,
    families: &[String],
    seeds: &[String],
    folds: usize,
    repeats: usize,
) -> Result<StabilityReport> {
    if families.is_empty() || seeds.is_empty() {
        return Err(Error::MissingGroup(
            "stability needs families and seeds".into(),
        ));
    }
    for family in families {
        for seed_label in seeds {
            let any = data
                .records
                .iter()
                .any(|r| r.family_label() == family && r.seed_label() == seed_label);
            if !any {
                return Err(Error::MissingGroup(format!(
                    "no records for family `{family}` with seed `{seed_label}`"
                )));
            }
        }
    }

    let benchmarks = data.benchmarks();
    let combos = enumerate_assignments(families.len(), seeds.len());
    let mut entries = Vec::with_capacity(combos.len() * benchmarks.len());
    for combo in &combos {
        let subset_id = families
            .iter()
            .zip(combo)
            .map(|(f, &s)| format!("{f}={}", seeds[s]))
            .collect::<Vec<_>>()
            .join(",");
        let chosen: Vec<(&str, &str)> = families
            .iter()
            .zip(combo)
            .map(|(f, &s)| (f.as_str(), seeds[s].as_str()))
            .collect();
        let subset: Vec<RunRecord> = data
            .records
            .iter()
            .filter(|r| {
                chosen
                    .iter()
                    .any(|(f, s)| r.family_label() == *f && r.seed_label() == *s)
            })
            .cloned()
            .collect();
        for benchmark in &benchmarks {
            let bench_records: Vec<RunRecord> = subset
                .iter()
                .filter(|r| &r.benchmark == benchmark)
                .cloned()
                .collect();
            let ds = Dataset::from_records(bench_records, "stability-subset").map_err(|_| {
                Error::MissingGroup(format!(
                    "benchmark `{benchmark}` has no records in subset {subset_id}"
                ))
            })?;
            let cv = cross_validate(&ds, cfg, folds, repeats, cfg.seed)?;
            let lomo = leave_one_group_out(&ds, cfg, GroupBy::ModelSize)?;
            entries.push(StabilityEntry {
                benchmark: benchmark.clone(),
                subset_id: subset_id.clone(),
                cv_are: cv.are_percent,
                lomo_are: lomo.are_percent,
            });
        }
    }

    let summaries = benchmarks
        .iter()
        .map(|benchmark| {
            let cv: Vec<f64> = entries
                .iter()
                .filter(|e| &e.benchmark == benchmark)
                .map(|e| e.cv_are)
                .collect();
            let lomo: Vec<f64> = entries
                .iter()
                .filter(|e| &e.benchmark == benchmark)
                .map(|e| e.lomo_are)
                .collect();
            StabilitySummary {
                benchmark: benchmark.clone(),
                subsets: cv.len(),
                cv_are_mean: mean(&cv),
                cv_are_std: sample_std(&cv),
                lomo_are_mean: mean(&lomo),
                lomo_are_std: sample_std(&lomo),
            }
        })
        .collect();

    Ok(StabilityReport {
        entries,
        summaries,
        seed: cfg.seed,
    })
}

/// Odometer enumeration of seed choices per family, low index fastest in
/// the last family.
fn enumerate_assignments(families: usize, seeds: usize) -> Vec<Vec<usize>> {
    let total = seeds.pow(families as u32);
    (0..total)
        .map(|mut k| {
            let mut combo = vec![0usize; families];
            for slot in combo.iter_mut().rev() {
                *slot = k % seeds;
                k /= seeds;
            }
            combo
        })
        .collect()
}

/// Goodness-of-fit of a fixed law over a whole dataset (no folds): ARE plus
/// pooled R². Used when validating supplied parameters.
pub fn holdout_report(data: &Dataset, law: LawPredictor) -> Result<(f64, f64)> {
    let pred: Vec<f64> = data.records.iter().map(|r| law.predict(r)).collect();
    let obs: Vec<f64> = data.records.iter().map(|r| r.loss).collect();
    Ok((are(&pred, &obs)?, r_squared(&pred, &obs)?))
}

/// Two-stage refit on the full dataset, returning the predictor alongside
/// the stage results. Convenience for report generation.
pub fn fit_full(data: &Dataset, cfg: &FitConfig) -> Result<LawPredictor> {
    if cfg.family == LawFamily::TwoD {
        let baseline = data.filter(&crate::records::FilterPredicate::baseline_only());
        let (stage1, _) = fit_two_stage(&baseline, cfg)?;
        Ok(LawPredictor::TwoD(*stage1.params.as_2d().expect("2d")))
    } else {
        let (_, stage2) = fit_two_stage(data, cfg)?;
        Ok(LawPredictor::ThreeD(
            *stage2.expect("3d family").params.as_3d().expect("3d"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitter::LawFamily;
    use crate::synth;

    #[test]
    fn are_cases() {
        assert_eq!(are(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(are(&[2.0], &[1.0]).unwrap(), 100.0);
        assert!((are(&[1.1, 0.9], &[1.0, 1.0]).unwrap() - 10.0).abs() < 1e-9);
        assert!(matches!(are(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(
            are(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            are(&[1.0], &[0.0]),
            Err(Error::NonPositiveInput(_))
        ));
    }

    #[test]
    fn are_is_scale_invariant() {
        let pred = [1.3, 0.8, 2.2];
        let obs = [1.0, 1.0, 2.0];
        let scaled_pred: Vec<f64> = pred.iter().map(|p| p * 7.3).collect();
        let scaled_obs: Vec<f64> = obs.iter().map(|o| o * 7.3).collect();
        let a = are(&pred, &obs).unwrap();
        let b = are(&scaled_pred, &scaled_obs).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn r_squared_cases() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((r_squared(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            r_squared(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
    }

    fn noisy_grid(noise: f64, seed: u64) -> Dataset {
        let mut spec = synth::default_grid();
        spec.noise_sigma = noise;
        spec.seed = seed;
        synth::generate(&spec).unwrap()
    }

    #[test]
    fn cv_on_noiseless_data_is_tight() {
        let data = noisy_grid(0.0, 10);
        let cfg = FitConfig::new(LawFamily::LogGain);
        let report = cross_validate(&data, &cfg, 5, 2, 42).unwrap();
        assert!(report.are_percent < 0.5, "CV ARE {}", report.are_percent);
        assert!(report.r_squared > 0.999);
        assert_eq!(report.per_fold.len(), 10);
    }

    #[test]
    fn cv_fold_structure() {
        let data = noisy_grid(0.0, 11);
        let n = data.len();
        let folds = cv_folds(n, 5, 3, 7);
        assert_eq!(folds.len(), 15);
        for rep in 0..3 {
            let mut held: Vec<usize> = folds[rep * 5..(rep + 1) * 5]
                .iter()
                .flat_map(|f| f.test.iter().copied())
                .collect();
            held.sort_unstable();
            assert_eq!(held, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds[rep * 5..(rep + 1) * 5]
                .iter()
                .map(|f| f.test.len())
                .collect();
            let max = sizes.iter().max().unwrap();
            let min = sizes.iter().min().unwrap();
            assert!(max - min <= 1);
        }
    }

    #[test]
    fn cv_same_seed_identical_reports() {
        let data = noisy_grid(0.02, 12);
        let cfg = FitConfig::new(LawFamily::LogGain);
        let a = cross_validate(&data, &cfg, 5, 2, 42).unwrap();
        let b = cross_validate(&data, &cfg, 5, 2, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn cv_noise_floor_bracket() {
        let data = noisy_grid(0.02, 13);
        let cfg = FitConfig::new(LawFamily::LogGain);
        let report = cross_validate(&data, &cfg, 5, 5, 42).unwrap();
        assert!(
            report.are_percent >= 1.0 && report.are_percent <= 4.0,
            "CV ARE {} outside the 2% noise bracket",
            report.are_percent
        );
    }

    #[test]
    fn lomo_fold_per_model_size() {
        let data = noisy_grid(0.0, 14);
        let cfg = FitConfig::new(LawFamily::LogGain);
        let report = leave_one_group_out(&data, &cfg, GroupBy::ModelSize).unwrap();
        assert_eq!(report.folds, 6);
        assert_eq!(report.protocol, Protocol::Lomo);
        let labels: Vec<&str> = report
            .per_fold
            .iter()
            .map(|f| f.held_out_label.as_str())
            .collect();
        assert_eq!(labels, vec!["30M", "136M", "233M", "728M", "1B", "3B"]);
        assert!(report.are_percent < 1.0, "LOMO ARE {}", report.are_percent);
    }

    #[test]
    fn lodo_needs_two_benchmarks() {
        let data = noisy_grid(0.0, 15);
        let cfg = FitConfig::new(LawFamily::LogGain);
        assert!(matches!(
            leave_one_group_out(&data, &cfg, GroupBy::Benchmark),
            Err(Error::SingleGroup(_))
        ));
    }

    #[test]
    fn lodo_pools_remaining_benchmarks() {
        let mut spec = synth::default_grid();
        spec.noise_sigma = 0.01;
        let a = synth::generate(&spec).unwrap();
        spec.benchmark_label = "other".into();
        spec.seed = 43;
        let b = synth::generate(&spec).unwrap();
        let mut records = a.records;
        records.extend(b.records);
        let data = Dataset::from_records(records, "two-bench").unwrap();
        let cfg = FitConfig::new(LawFamily::LogGain);
        let report = leave_one_group_out(&data, &cfg, GroupBy::Benchmark).unwrap();
        assert_eq!(report.folds, 2);
        assert_eq!(report.protocol, Protocol::Lodo);
        assert!(report.are_percent < 5.0, "LODO ARE {}", report.are_percent);
    }

    fn stability_data() -> Dataset {
        // Three families (model sizes), three seeds each, with per-seed
        // noise; mirrors the seed-stability protocol's data layout.
        let mut records = Vec::new();
        for (fi, &n) in [30_000_000u64, 136_000_000, 233_000_000].iter().enumerate() {
            for (si, seed_label) in ["s0", "s1", "s2"].iter().enumerate() {
                let mut spec = synth::default_grid();
                spec.n_values = vec![n, n * 2, n * 4, n * 8, n * 16, n * 32];
                spec.noise_sigma = 0.01;
                spec.seed = (fi * 3 + si) as u64 + 100;
                let ds = synth::generate(&spec).unwrap();
                for mut r in ds.records {
                    r.seed = Some(seed_label.to_string());
                    r.family = Some(format!("fam{fi}"));
                    records.push(r);
                }
            }
        }
        Dataset::from_records(records, "stability").unwrap()
    }

    #[test]
    fn stability_enumerates_all_combinations() {
        assert_eq!(enumerate_assignments(3, 3).len(), 27);
        assert_eq!(enumerate_assignments(2, 4).len(), 16);
        let combos = enumerate_assignments(2, 2);
        assert_eq!(combos, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn stability_report_shape_and_noise() {
        let data = stability_data();
        let mut cfg = FitConfig::new(LawFamily::LogGain);
        cfg.n_starts = 12; // keep the 27-subset sweep quick
        let families = vec!["fam0".to_string(), "fam1".into(), "fam2".into()];
        let seeds = vec!["s0".to_string(), "s1".into(), "s2".into()];
        let report = stability_report(&data, &cfg, &families, &seeds, 4, 1).unwrap();
        assert_eq!(report.entries.len(), 27);
        assert_eq!(report.summaries.len(), 1);
        let summary = &report.summaries[0];
        assert_eq!(summary.subsets, 27);
        // Distinct seeds carry distinct noise, so the spread is nonzero and
        // the mean sits near the 1% noise floor.
        assert!(summary.cv_are_std > 0.0);
        assert!(summary.cv_are_mean > 0.2 && summary.cv_are_mean < 3.0);
    }

    #[test]
    fn stability_identical_seeds_have_zero_std() {
        // Same records under every seed label: only the label differs.
        let mut records = Vec::new();
        let mut spec = synth::default_grid();
        spec.noise_sigma = 0.01;
        spec.seed = 7;
        let base = synth::generate(&spec).unwrap();
        for seed_label in ["s0", "s1"] {
            for mut r in base.records.clone() {
                r.seed = Some(seed_label.to_string());
                r.family = Some("famA".to_string());
                records.push(r);
            }
        }
        let data = Dataset::from_records(records, "dup").unwrap();
        let mut cfg = FitConfig::new(LawFamily::LogGain);
        cfg.n_starts = 12;
        let report = stability_report(
            &data,
            &cfg,
            &["famA".to_string()],
            &["s0".to_string(), "s1".into()],
            4,
            1,
        )
        .unwrap();
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.summaries[0].cv_are_std, 0.0);
        assert_eq!(report.summaries[0].lomo_are_std, 0.0);
    }

    #[test]
    fn stability_missing_group_errors() {
        let data = stability_data();
        let cfg = FitConfig::new(LawFamily::LogGain);
        let err = stability_report(
            &data,
            &cfg,
            &["fam0".to_string()],
            &["nope".to_string()],
            4,
            1,
        );
        assert!(matches!(err, Err(Error::MissingGroup(_))));
    }

    #[test]
    fn fixed_law_validation_skips_refit() {
        let data = noisy_grid(0.0, 16);
        let planted = synth::default_grid().planted;
        let report = cross_validate_fixed(&data, LawPredictor::ThreeD(planted), 5, 2, 42).unwrap();
        assert!(report.are_percent < 1e-9, "{}", report.are_percent);
        let (a, r2) = holdout_report(&data, LawPredictor::ThreeD(planted)).unwrap();
        assert!(a < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
