//! Constrained nonlinear least-squares estimation of the scaling laws.
//!
//! Fits follow the two-stage structure: stage 1 estimates the two-axis
//! baseline on no-retrieval records, stage 2 freezes that baseline and
//! estimates the retrieval gain (magnitude and rate) on the full record
//! set. A joint seven-parameter fit is available for sensitivity analysis.
//!
//! Every fit is a seeded multi-start: starting points come from a
//! low-discrepancy sweep of the bounded parameter box (magnitudes
//! log-spaced, exponents and the floor linear), each start is refined by a
//! bounded simplex descent, and the best converged objective wins with
//! ties broken toward the lexicographically smaller parameter vector. The
//! result is bit-identical for a given (data, config) regardless of how
//! many threads run the starts.

mod objective;
mod simplex;

pub use objective::{CompressedPoints, ResidualSpace};
pub use simplex::{minimize_unit_box, SimplexOptions, SimplexOutcome};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{eval_3d_raw, GainFamily, Params2D, Params3D};
use crate::records::Dataset;
use crate::rng::SplitMix64;
use objective::GainObjective;

/// Which law family a fit estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawFamily {
    TwoD,
    LogGain,
    PowerGain,
}

impl LawFamily {
    pub fn gain_family(self) -> Option<GainFamily> {
        match self {
            LawFamily::TwoD => None,
            LawFamily::LogGain => Some(GainFamily::LogGain),
            LawFamily::PowerGain => Some(GainFamily::PowerGain),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LawFamily::TwoD => "two_d",
            LawFamily::LogGain => "log_gain",
            LawFamily::PowerGain => "power_gain",
        }
    }
}

/// Per-parameter box constraints. `l0_hi = None` resolves to the minimum
/// observed loss of the records being fit; a floor above an observation
/// would force negative power-term contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub a: (f64, f64),
    pub alpha: (f64, f64),
    pub b: (f64, f64),
    pub beta: (f64, f64),
    pub l0_lo: f64,
    pub l0_hi: Option<f64>,
    pub c: (f64, f64),
    pub eta: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            a: (1e-8, 1e4),
            alpha: (1e-3, 2.0),
            b: (1e-8, 1e4),
            beta: (1e-3, 2.0),
            l0_lo: 0.0,
            l0_hi: None,
            c: (1e-8, 1e4),
            eta: (1e-6, 10.0),
            gamma: (1e-4, 10.0),
        }
    }
}

impl Bounds {
    fn check(&self) -> Result<()> {
        let pairs = [
            ("A", self.a),
            ("alpha", self.alpha),
            ("B", self.b),
            ("beta", self.beta),
            ("C", self.c),
            ("eta", self.eta),
            ("gamma", self.gamma),
        ];
        for (name, (lo, hi)) in pairs {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "bound for {name} must satisfy lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if let Some(hi) = self.l0_hi {
            if hi.is_nan() || self.l0_lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "bound for L0 must satisfy lo < hi, got [{}, {hi}]",
                    self.l0_lo
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub family: LawFamily,
    pub residual_space: ResidualSpace,
    pub n_starts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub bounds: Bounds,
}

impl FitConfig {
    pub fn new(family: LawFamily) -> Self {
        FitConfig {
            family,
            residual_space: ResidualSpace::Relative,
            n_starts: 64,
            max_iters: 2000,
            seed: 42,
            bounds: Bounds::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_starts < 1 {
            return Err(Error::InvalidArgument("n_starts must be >= 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        self.bounds.check()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStage {
    Stage1Baseline,
    Stage2Retrieval,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum FittedParams {
    TwoD(Params2D),
    ThreeD(Params3D),
}

impl FittedParams {
    pub fn as_2d(&self) -> Option<&Params2D> {
        match self {
            FittedParams::TwoD(p) => Some(p),
            FittedParams::ThreeD(_) => None,
        }
    }

    pub fn as_3d(&self) -> Option<&Params3D> {
        match self {
            FittedParams::TwoD(_) => None,
            FittedParams::ThreeD(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FittedParams,
    /// Final sum of squared residuals in the configured residual space.
    pub objective: f64,
    pub per_point_residuals: Vec<f64>,
    /// Names of parameters whose estimate lies within 1e-6 of a bound.
    pub saturated_bounds: Vec<String>,
    pub stage: FitStage,
    pub config_echo: FitConfig,
    pub n_points: usize,
}

const SATURATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy)]
enum Scale {
    Log,
    Linear,
}

#[derive(Clone, Copy)]
struct ParamSpec {
    name: &'static str,
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl ParamSpec {
    fn log(name: &'static str, (lo, hi): (f64, f64)) -> Self {
        ParamSpec {
            name,
            lo,
            hi,
            scale: Scale::Log,
        }
    }

    fn linear(name: &'static str, lo: f64, hi: f64) -> Self {
        ParamSpec {
            name,
            lo,
            hi,
            scale: Scale::Linear,
        }
    }

    fn unit_to_value(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u == 0.0 {
            return self.lo;
        }
        if u == 1.0 {
            return self.hi;
        }
        let v = match self.scale {
            Scale::Log => (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp(),
            Scale::Linear => self.lo + u * (self.hi - self.lo),
        };
        v.clamp(self.lo, self.hi)
    }

    fn value_to_unit(self, value: f64) -> f64 {
        let v = value.clamp(self.lo, self.hi);
        let u = match self.scale {
            Scale::Log => (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln()),
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
        };
        u.clamp(0.0, 1.0)
    }

    fn saturated(&self, value: f64) -> bool {
        (value - self.lo).abs() <= SATURATION_TOL || (value - self.hi).abs() <= SATURATION_TOL
    }
}

const MAX_PARAMS: usize = 8;

/// Quasi-random sweep of the unit box: the generalized-golden-ratio
/// additive recurrence with a seeded per-dimension offset.
fn start_sweep(dim: usize, n_starts: usize, seed: u64) -> Vec<Vec<f64>> {
    // phi_d is the unique positive root of x^(d+1) = x + 1.
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let alphas: Vec<f64> = (1..=dim)
        .map(|j| (1.0 / phi.powi(j as i32)).fract())
        .collect();
    let mut rng = SplitMix64::substream(seed, 0x5eed);
    let offsets: Vec<f64> = (0..dim).map(|_| rng.next_f64()).collect();
    (0..n_starts)
        .map(|k| {
            (0..dim)
                .map(|j| (offsets[j] + (k as f64 + 1.0) * alphas[j]).fract())
                .collect()
        })
        .collect()
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Runs the seeded multi-start refinement and returns the winning parameter
/// vector (in `specs` order) and its objective. `extra_starts` (unit-box
/// coordinates) join the sweep, e.g. to warm-start from a staged solution.
fn multi_start<F>(
    objective: F,
    specs: &[ParamSpec],
    cfg: &FitConfig,
    extra_starts: &[Vec<f64>],
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = specs.len();
    assert!(dim <= MAX_PARAMS);
    let unit_objective = |u: &[f64]| {
        let mut p = [0.0f64; MAX_PARAMS];
        for (i, spec) in specs.iter().enumerate() {
            p[i] = spec.unit_to_value(u[i]);
        }
        objective(&p[..dim])
    };
    let opts = SimplexOptions {
        max_iters: cfg.max_iters,
        ..SimplexOptions::default()
    };
    let mut starts = start_sweep(dim, cfg.n_starts, cfg.seed);
    starts.extend(extra_starts.iter().cloned());

    let outcomes: Vec<SimplexOutcome> = starts
        .par_iter()
        .map(|s| minimize_unit_box(unit_objective, s.as_slice(), &opts))
        .collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    for outcome in &outcomes {
        if !outcome.converged {
            continue;
        }
        let params: Vec<f64> = specs
            .iter()
            .zip(&outcome.point)
            .map(|(spec, &u)| spec.unit_to_value(u))
            .collect();
        let better = match &best {
            None => true,
            Some((bp, bv)) => match outcome.value.total_cmp(bv) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => lex_less(&params, bp),
            },
        };
        if better {
            best = Some((params, outcome.value));
        }
    }
    best.ok_or_else(|| {
        Error::NoConvergence(format!(
            "none of {} starts met the simplex tolerance within {} iterations",
            cfg.n_starts, cfg.max_iters
        ))
    })
}

fn saturated_names(specs: &[ParamSpec], values: &[f64]) -> Vec<String> {
    specs
        .iter()
        .zip(values)
        .filter(|(spec, &v)| spec.saturated(v))
        .map(|(spec, _)| spec.name.to_string())
        .collect()
}

/// Stage 1: fits the two-axis baseline on the no-retrieval records of
/// `data`. Needs at least 6 such records (one more than free parameters).
pub fn fit_2d(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.check()?;
    let baseline: Vec<_> = data
        .records
        .iter()
        .filter(|r| r.retrieval_tokens == 0)
        .cloned()
        .collect();
    if baseline.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "2d fit needs at least 6 no-retrieval points, got {}",
            baseline.len()
        )));
    }
    let points = CompressedPoints::new(&baseline, cfg.residual_space);
    let l0_hi = cfg.bounds.l0_hi.unwrap_or_else(|| points.min_loss());
    if l0_hi.is_nan() || cfg.bounds.l0_lo >= l0_hi {
        return Err(Error::InvalidArgument(format!(
            "resolved L0 bound is empty: [{}, {l0_hi}]",
            cfg.bounds.l0_lo
        )));
    }
    let specs = [
        ParamSpec::log("A", cfg.bounds.a),
        ParamSpec::linear("alpha", cfg.bounds.alpha.0, cfg.bounds.alpha.1),
        ParamSpec::log("B", cfg.bounds.b),
        ParamSpec::linear("beta", cfg.bounds.beta.0, cfg.bounds.beta.1),
        ParamSpec::linear("L0", cfg.bounds.l0_lo, l0_hi),
    ];
    let objective = |p: &[f64]| {
        points.sse_2d(&Params2D {
            a: p[0],
            alpha: p[1],
            b: p[2],
            beta: p[3],
            l0: p[4],
        })
    };
    let (values, best) = multi_start(objective, &specs, cfg, &[])?;
    let params = Params2D {
        a: values[0],
        alpha: values[1],
        b: values[2],
        beta: values[3],
        l0: values[4],
    };
    let mut echo = cfg.clone();
    echo.bounds.l0_hi = Some(l0_hi);
    Ok(FitResult {
        params: FittedParams::TwoD(params),
        objective: best,
        per_point_residuals: points.residuals_2d(&params),
        saturated_bounds: saturated_names(&specs, &values),
        stage: FitStage::Stage1Baseline,
        config_echo: echo,
        n_points: points.len(),
    })
}

/// Stage 2: freezes the stage-1 baseline and fits the retrieval gain
/// (magnitude and rate) on all records of `data`. Needs at least 3 records
/// with retrieval tokens.
pub fn fit_3d(data: &Dataset, base: &Params2D, cfg: &FitConfig) -> Result<FitResult> {
    cfg.check()?;
    let family = cfg
        .family
        .gain_family()
        .ok_or_else(|| Error::InvalidArgument("fit_3d requires a retrieval gain family".into()))?;
    let with_retrieval = data
        .records
        .iter()
        .filter(|r| r.retrieval_tokens > 0)
        .count();
    if with_retrieval < 3 {
        return Err(Error::InsufficientData(format!(
            "3d fit needs at least 3 points with retrieval tokens, got {with_retrieval}"
        )));
    }
    let points = CompressedPoints::new(&data.records, cfg.residual_space);
    let rate_bounds = match family {
        GainFamily::LogGain => cfg.bounds.eta,
        GainFamily::PowerGain => cfg.bounds.gamma,
    };
    let specs = [
        ParamSpec::log("C", cfg.bounds.c),
        ParamSpec::log(family.rate_name(), rate_bounds),
    ];
    let gain = GainObjective::new(&points, base, family);
    let (values, best) = multi_start(|p: &[f64]| gain.sse(p[0], p[1]), &specs, cfg, &[])?;
    let params = Params3D {
        base: *base,
        c: values[0],
        rate: values[1],
        family,
    };
    check_positive_on_hull(&params, data)?;
    Ok(FitResult {
        params: FittedParams::ThreeD(params),
        objective: best,
        per_point_residuals: points.residuals_3d(&params),
        saturated_bounds: saturated_names(&specs, &values),
        stage: FitStage::Stage2Retrieval,
        config_echo: cfg.clone(),
        n_points: points.len(),
    })
}

/// All seven parameters free; an alternative to the two-stage default for
/// sensitivity analysis. Needs at least 8 points.
pub fn fit_joint_3d(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.check()?;
    let family = cfg.family.gain_family().ok_or_else(|| {
        Error::InvalidArgument("joint fit requires a retrieval gain family".into())
    })?;
    if data.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "joint fit needs at least 8 points, got {}",
            data.len()
        )));
    }
    let points = CompressedPoints::new(&data.records, cfg.residual_space);
    // The floor bound comes from the no-retrieval slice: at r = 0 the
    // prediction is at least l0 regardless of the gain term, so only those
    // observations cap it. Retrieval rows may legitimately sit below l0.
    let min_baseline_loss = data
        .records
        .iter()
        .filter(|r| r.retrieval_tokens == 0)
        .map(|r| r.loss)
        .fold(f64::INFINITY, f64::min);
    let l0_hi = cfg
        .bounds
        .l0_hi
        .unwrap_or(if min_baseline_loss.is_finite() {
            min_baseline_loss
        } else {
            points.min_loss()
        });
    if l0_hi.is_nan() || cfg.bounds.l0_lo >= l0_hi {
        return Err(Error::InvalidArgument(format!(
            "resolved L0 bound is empty: [{}, {l0_hi}]",
            cfg.bounds.l0_lo
        )));
    }
    let rate_bounds = match family {
        GainFamily::LogGain => cfg.bounds.eta,
        GainFamily::PowerGain => cfg.bounds.gamma,
    };
    let specs = [
        ParamSpec::log("A", cfg.bounds.a),
        ParamSpec::linear("alpha", cfg.bounds.alpha.0, cfg.bounds.alpha.1),
        ParamSpec::log("B", cfg.bounds.b),
        ParamSpec::linear("beta", cfg.bounds.beta.0, cfg.bounds.beta.1),
        ParamSpec::linear("L0", cfg.bounds.l0_lo, l0_hi),
        ParamSpec::log("C", cfg.bounds.c),
        ParamSpec::log(family.rate_name(), rate_bounds),
    ];
    let objective = |p: &[f64]| {
        points.sse_3d(&Params3D {
            base: Params2D {
                a: p[0],
                alpha: p[1],
                b: p[2],
                beta: p[3],
                l0: p[4],
            },
            c: p[5],
            rate: p[6],
            family,
        })
    };
    // The staged solution seeds one extra start, so the joint search always
    // contains the two-stage optimum (the staged fit is a constrained
    // special case of this box).
    let warm_start: Vec<Vec<f64>> = match fit_two_stage(data, cfg) {
        Ok((s1, Some(s2))) => {
            let b = s1.params.as_2d().expect("2d");
            let g = s2.params.as_3d().expect("3d");
            let staged = [b.a, b.alpha, b.b, b.beta, b.l0, g.c, g.rate];
            vec![specs
                .iter()
                .zip(staged)
                .map(|(spec, v)| spec.value_to_unit(v))
                .collect()]
        }
        _ => Vec::new(),
    };
    let (values, best) = multi_start(objective, &specs, cfg, &warm_start)?;
    let params = Params3D {
        base: Params2D {
            a: values[0],
            alpha: values[1],
            b: values[2],
            beta: values[3],
            l0: values[4],
        },
        c: values[5],
        rate: values[6],
        family,
    };
    check_positive_on_hull(&params, data)?;
    let mut echo = cfg.clone();
    echo.bounds.l0_hi = Some(l0_hi);
    Ok(FitResult {
        params: FittedParams::ThreeD(params),
        objective: best,
        per_point_residuals: points.residuals_3d(&params),
        saturated_bounds: saturated_names(&specs, &values),
        stage: FitStage::Joint,
        config_echo: echo,
        n_points: points.len(),
    })
}

/// The log-gain law is coordinate-wise decreasing, so positivity at the
/// maximal corner of the observed box implies positivity over the whole
/// convex hull of observed configurations.
fn check_positive_on_hull(params: &Params3D, data: &Dataset) -> Result<()> {
    if params.family != GainFamily::LogGain {
        return Ok(());
    }
    let n_max = data
        .records
        .iter()
        .map(|r| r.model_params)
        .max()
        .unwrap_or(1) as f64;
    let d_max = data
        .records
        .iter()
        .map(|r| r.pretrain_tokens)
        .max()
        .unwrap_or(1) as f64;
    let r_max = data
        .records
        .iter()
        .map(|r| r.retrieval_tokens)
        .max()
        .unwrap_or(0) as f64;
    let value = eval_3d_raw(params, n_max, d_max, r_max);
    if value <= 0.0 {
        return Err(Error::NonPositivePrediction(format!(
            "fitted log-gain law predicts {value} at the maximal observed corner \
             (n={n_max}, d={d_max}, r={r_max})"
        )));
    }
    Ok(())
}

/// Convenience driver for the two-stage pipeline: stage 1 on the
/// no-retrieval slice, then stage 2 when the family has a gain term.
pub fn fit_two_stage(data: &Dataset, cfg: &FitConfig) -> Result<(FitResult, Option<FitResult>)> {
    let stage1 = fit_2d(data, cfg)?;
    if cfg.family == LawFamily::TwoD {
        return Ok((stage1, None));
    }
    let base = *stage1.params.as_2d().expect("stage 1 yields 2d params");
    let stage2 = fit_3d(data, &base, cfg)?;
    Ok((stage1, Some(stage2)))
}
