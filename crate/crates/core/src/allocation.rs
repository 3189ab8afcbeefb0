//! Allocation of a fixed token budget between pretraining data and a
//! retrieval datastore, plus the derived analyses: trade-off tables over
//! training regimes, the crossover threshold where retrieval starts paying
//! for itself, and iso-loss / compute-frontier grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{
    aggregate_kappa_med, aggregate_sigma_gm, effective_pretrain_tokens, eval_2d, eval_3d,
    marginal_benefit, regime_of, substitutability, Params2D, Params3D, Regime, Substitutability,
    SubstitutabilityInput, TradeoffPoint,
};
use crate::numeric::log_spaced;
use crate::records::Dataset;

/// One sample on the budget frontier d + r = total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierSample {
    pub d: f64,
    pub r: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub n: f64,
    pub total_budget: f64,
    pub d_min: f64,
    pub d_star: f64,
    pub r_star: f64,
    pub predicted_loss: f64,
    pub resolution: usize,
    pub frontier: Vec<FrontierSample>,
}

const GOLDEN_INV: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization on [lo, hi]; ties prefer larger x. Endpoints
/// compete with the interior candidates, so monotone objectives return an
/// endpoint exactly.
fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN_INV * (b - a);
    let mut d = a + GOLDEN_INV * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN_INV * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN_INV * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(lo, f(lo)), (c, fc), (d, fd), (hi, f(hi))];
    let mut best = candidates[0];
    for &(x, fx) in &candidates[1..] {
        if fx < best.1 || (fx == best.1 && x > best.0) {
            best = (x, fx);
        }
    }
    best
}

/// The sampled frontier used by `optimize_split`, emitted for plotting.
/// Samples are log-spaced in d over [d_min, total_budget].
pub fn frontier_curve(
    p: &Params3D,
    n: f64,
    total_budget: f64,
    d_min: f64,
    resolution: usize,
) -> Result<Vec<FrontierSample>> {
    if total_budget.is_nan() || total_budget <= d_min {
        return Err(Error::BudgetTooSmall {
            budget: total_budget,
            d_min,
        });
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be >= 2".into()));
    }
    log_spaced(d_min, total_budget, resolution)
        .into_iter()
        .map(|d| {
            let r = total_budget - d;
            let loss = eval_3d(p, n, d, r)?;
            Ok(FrontierSample { d, r, loss })
        })
        .collect()
}

/// Minimizes predicted loss over the frontier d + r = total_budget with
/// d >= d_min: a log-spaced scan followed by golden-section refinement of
/// the best bracket down to a 1e-6 relative interval. Ties break toward
/// smaller r (retrieval carries inference-time overhead).
pub fn optimize_split(
    p: &Params3D,
    n: f64,
    total_budget: f64,
    d_min: f64,
    resolution: usize,
) -> Result<AllocationPlan> {
    let frontier = frontier_curve(p, n, total_budget, d_min, resolution)?;

    let mut best_idx = 0;
    for (i, s) in frontier.iter().enumerate() {
        // `<=` on an ascending-d scan prefers the larger-d sample on ties.
        if s.loss <= frontier[best_idx].loss {
            best_idx = i;
        }
    }
    let lo = frontier[best_idx.saturating_sub(1)].d;
    let hi = frontier[(best_idx + 1).min(frontier.len() - 1)].d;

    let objective = |ln_d: f64| {
        let d = ln_d.exp();
        crate::laws::eval_3d_raw(p, n, d, total_budget - d)
    };
    let (ln_star, _) = golden_min(objective, lo.ln(), hi.ln(), 1e-6);

    // The refined point competes against every coarse sample; monotone
    // objectives therefore land exactly on a frontier endpoint.
    let mut d_star = ln_star.exp().clamp(d_min, total_budget);
    let mut best_loss = eval_3d(p, n, d_star, total_budget - d_star)?;
    for s in &frontier {
        if s.loss < best_loss || (s.loss == best_loss && s.d > d_star) {
            d_star = s.d;
            best_loss = s.loss;
        }
    }

    Ok(AllocationPlan {
        n,
        total_budget,
        d_min,
        d_star,
        r_star: total_budget - d_star,
        predicted_loss: best_loss,
        resolution,
        frontier,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPoint {
    pub d_over_n: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverEstimate {
    /// Tokens-per-parameter ratio at which the fitted substitutability
    /// trend crosses 1.
    pub threshold_ratio: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n_points_used: usize,
    pub excluded_nonpositive: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverSpace {
    /// Ordinary least squares of log10(sigma) on log10(d/n); the default,
    /// matching the log-linear growth of the substitutability trend.
    LogLog,
    /// Sensitivity fallback: least squares of sigma on d/n directly.
    Linear,
}

/// Line of best fit through the substitutability trend; the threshold is
/// where the fitted line crosses sigma = 1. Non-positive sigma points are
/// excluded from the regression and counted.
pub fn crossover(points: &[CrossoverPoint]) -> Result<CrossoverEstimate> {
    crossover_in(points, CrossoverSpace::LogLog)
}

pub fn crossover_in(points: &[CrossoverPoint], space: CrossoverSpace) -> Result<CrossoverEstimate> {
    for p in points {
        if !(p.d_over_n > 0.0 && p.d_over_n.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "d_over_n must be positive and finite, got {}",
                p.d_over_n
            )));
        }
    }
    let used: Vec<&CrossoverPoint> = points
        .iter()
        .filter(|p| p.sigma > 0.0 && p.sigma.is_finite())
        .collect();
    let excluded_nonpositive = points.len() - used.len();
    if used.len() < 2 {
        return Err(Error::InsufficientPoints(format!(
            "need at least 2 positive-sigma points, got {}",
            used.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = match space {
        CrossoverSpace::LogLog => used
            .iter()
            .map(|p| (p.d_over_n.log10(), p.sigma.log10()))
            .unzip(),
        CrossoverSpace::Linear => used.iter().map(|p| (p.d_over_n, p.sigma)).unzip(),
    };
    let x_mean = crate::numeric::mean(&xs);
    let y_mean = crate::numeric::mean(&ys);
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints(
            "d_over_n values must be distinct".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    if slope == 0.0 {
        return Err(Error::ZeroSlope);
    }
    let threshold_ratio = match space {
        // Fitted log10(sigma) = 0 at log10(ratio) = -intercept/slope.
        CrossoverSpace::LogLog => 10f64.powf(-intercept / slope),
        // Fitted sigma = 1 at ratio = (1 - intercept)/slope.
        CrossoverSpace::Linear => (1.0 - intercept) / slope,
    };
    Ok(CrossoverEstimate {
        threshold_ratio,
        slope,
        intercept,
        n_points_used: used.len(),
        excluded_nonpositive,
    })
}

/// Where baseline and retrieval-augmented losses come from when building
/// trade-off tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Observed losses; each retrieval row is paired with the r = 0 record
    /// at the same (benchmark, n, d, seed).
    Measured,
    /// Law predictions at the same configurations; the baseline comes from
    /// the three-axis law at r = 0 (which differs from the two-axis law by
    /// c under the power family).
    Fitted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub benchmark: String,
    pub regime: Regime,
    #[serde(flatten)]
    pub point: TradeoffPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub rows: usize,
    /// Geometric mean over strictly positive sigma values, when any exist.
    pub sigma_gm: Option<f64>,
    /// Finite sigma values excluded from the geometric mean for being <= 0.
    pub excluded_nonpositive: usize,
    /// Configurations whose loss beat the parametric floor outright.
    pub infinite_sigma: usize,
    pub kappa_med: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffTable {
    pub pairing: Pairing,
    pub rows: Vec<TradeoffRow>,
    pub groups: Vec<RegimeSummary>,
}

/// Builds one trade-off row per retrieval configuration in `data`, grouped
/// into tokens-per-parameter regimes with per-regime aggregates.
pub fn tradeoff_table(
    data: &Dataset,
    p2: &Params2D,
    p3: &Params3D,
    pairing: Pairing,
) -> Result<TradeoffTable> {
    let mut rows = Vec::new();
    for record in data.records.iter().filter(|r| r.retrieval_tokens > 0) {
        let n = record.model_params as f64;
        let d = record.pretrain_tokens as f64;
        let r = record.retrieval_tokens as f64;
        let (loss_baseline, loss_rag) = match pairing {
            Pairing::Measured => {
                let partner = data
                    .records
                    .iter()
                    .find(|b| {
                        b.retrieval_tokens == 0
                            && b.model_params == record.model_params
                            && b.pretrain_tokens == record.pretrain_tokens
                            && b.benchmark == record.benchmark
                            && b.seed_label() == record.seed_label()
                    })
                    .ok_or_else(|| {
                        Error::MissingBaseline(format!(
                            "benchmark={} n={} d={} seed={:?}",
                            record.benchmark,
                            record.model_params,
                            record.pretrain_tokens,
                            record.seed
                        ))
                    })?;
                (partner.loss, record.loss)
            }
            Pairing::Fitted => (eval_3d(p3, n, d, 0.0)?, eval_3d(p3, n, d, r)?),
        };
        let d_eff = effective_pretrain_tokens(p2, n, loss_rag);
        let sigma = substitutability(
            p2,
            &SubstitutabilityInput {
                n,
                d,
                r_opt: r,
                loss_rag,
            },
        )?;
        let kappa = marginal_benefit(loss_baseline, loss_rag, r)?;
        rows.push(TradeoffRow {
            benchmark: record.benchmark.clone(),
            regime: regime_of(n, d),
            point: TradeoffPoint {
                n,
                d,
                r_opt: r,
                loss_rag,
                loss_baseline,
                d_eff,
                sigma,
                delta_loss: loss_baseline - loss_rag,
                kappa,
            },
        });
    }

    let mut groups = Vec::new();
    for regime in [Regime::X1, Regime::X10, Regime::X100, Regime::Other] {
        let members: Vec<&TradeoffRow> = rows.iter().filter(|r| r.regime == regime).collect();
        if members.is_empty() {
            continue;
        }
        let mut positive = Vec::new();
        let mut nonpositive = 0usize;
        let mut infinite = 0usize;
        for m in &members {
            match m.point.sigma {
                Substitutability::Finite(s) if s > 0.0 => positive.push(s),
                Substitutability::Finite(_) => nonpositive += 1,
                Substitutability::Infinite => infinite += 1,
            }
        }
        let kappas: Vec<f64> = members.iter().map(|m| m.point.kappa).collect();
        groups.push(RegimeSummary {
            regime,
            rows: members.len(),
            sigma_gm: if positive.is_empty() {
                None
            } else {
                Some(aggregate_sigma_gm(&positive)?)
            },
            excluded_nonpositive: nonpositive,
            infinite_sigma: infinite,
            kappa_med: aggregate_kappa_med(&kappas)?,
        });
    }

    Ok(TradeoffTable {
        pairing,
        rows,
        groups,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsoGridCell {
    pub n: f64,
    pub d: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComputeFrontierPoint {
    pub compute: f64,
    pub n: f64,
    pub d: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsoSurfaces {
    pub n_values: Vec<f64>,
    pub d_values: Vec<f64>,
    /// Row-major: `cells[i * d_values.len() + j]` is (n_values[i],
    /// d_values[j]).
    pub cells: Vec<IsoGridCell>,
    pub frontier: Vec<ComputeFrontierPoint>,
    pub flops_per_param_token: f64,
}

/// Log-spaced loss grid for contour plotting plus the compute-efficient
/// frontier: per iso-compute budget `flops_per_param_token * n * d`, the
/// (n, d) pair minimizing the two-axis law along that constraint.
pub fn iso_surfaces(
    p2: &Params2D,
    n_range: (f64, f64),
    d_range: (f64, f64),
    grid: usize,
    flops_per_param_token: f64,
) -> Result<IsoSurfaces> {
    if grid < 2 {
        return Err(Error::InvalidArgument("grid must be >= 2 per axis".into()));
    }
    if !(n_range.0 > 0.0 && n_range.1 > n_range.0 && d_range.0 > 0.0 && d_range.1 > d_range.0) {
        return Err(Error::InvalidArgument(
            "ranges must be positive with lo < hi".into(),
        ));
    }
    let n_values = log_spaced(n_range.0, n_range.1, grid);
    let d_values = log_spaced(d_range.0, d_range.1, grid);
    let mut cells = Vec::with_capacity(grid * grid);
    for &n in &n_values {
        for &d in &d_values {
            cells.push(IsoGridCell {
                n,
                d,
                loss: eval_2d(p2, n, d),
            });
        }
    }

    let f = flops_per_param_token;
    let budgets = log_spaced(f * n_range.0 * d_range.0, f * n_range.1 * d_range.1, grid);
    let mut frontier = Vec::new();
    for &compute in &budgets {
        // n range where the constraint stays inside the d box.
        let lo = n_range.0.max(compute / (f * d_range.1));
        let hi = n_range.1.min(compute / (f * d_range.0));
        if lo >= hi || lo.is_nan() || hi.is_nan() {
            continue;
        }
        let objective = |ln_n: f64| {
            let n = ln_n.exp();
            eval_2d(p2, n, compute / (f * n))
        };
        let (ln_n, loss) = golden_min(objective, lo.ln(), hi.ln(), 1e-10);
        let n = ln_n.exp();
        frontier.push(ComputeFrontierPoint {
            compute,
            n,
            d: compute / (f * n),
            loss,
        });
    }

    Ok(IsoSurfaces {
        n_values,
        d_values,
        cells,
        frontier,
        flops_per_param_token: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{EffectiveTokens, GainFamily};
    use crate::records::RunRecord;
    use crate::rng::SplitMix64;

    fn log_gain_params() -> Params3D {
        Params3D {
            base: Params2D {
                a: 2.5,
                alpha: 0.35,
                b: 1.8,
                beta: 0.28,
                l0: 1.1,
            },
            c: 0.3,
            rate: 0.9,
            family: GainFamily::LogGain,
        }
    }

    #[test]
    fn zero_gain_allocates_everything_to_pretraining() {
        let mut p = log_gain_params();
        p.c = 0.0;
        let plan = optimize_split(&p, 1e9, 2e10, 1e6, 512).unwrap();
        assert_eq!(plan.d_star, 2e10);
        assert_eq!(plan.r_star, 0.0);
    }

    #[test]
    fn zero_data_term_allocates_everything_to_retrieval() {
        let mut p = log_gain_params();
        p.base.b = 0.0;
        let plan = optimize_split(&p, 1e9, 2e10, 1e6, 512).unwrap();
        assert_eq!(plan.d_star, 1e6);
        assert!((plan.r_star - (2e10 - 1e6)).abs() < 1e-3);
    }

    #[test]
    fn split_matches_dense_grid_oracle() {
        let p = log_gain_params();
        let n = 7.28e8;
        let budget = 3e10;
        let d_min = 1e6;
        let plan = optimize_split(&p, n, budget, d_min, 512).unwrap();

        // Independent dense scan.
        let dense = 200_000;
        let ln_lo = d_min.ln();
        let step = (budget.ln() - ln_lo) / (dense - 1) as f64;
        let mut best = (0.0f64, f64::INFINITY);
        for i in 0..dense {
            let d = (ln_lo + step * i as f64).exp();
            let loss = crate::laws::eval_3d_raw(&p, n, d, budget - d);
            if loss < best.1 {
                best = (d, loss);
            }
        }
        assert!(
            plan.predicted_loss <= best.1 + 1e-6,
            "plan {} vs dense {}",
            plan.predicted_loss,
            best.1
        );
        let log_gap = (plan.d_star.ln() - best.0.ln()).abs();
        assert!(
            log_gap <= 1.5 * step,
            "location gap {log_gap} vs step {step}"
        );
    }

    #[test]
    fn plan_invariants() {
        let p = log_gain_params();
        let plan = optimize_split(&p, 1e9, 1e10, 1e6, 256).unwrap();
        assert_eq!(plan.d_star + plan.r_star, plan.total_budget);
        assert!(plan.d_star >= 1e6);
        for s in &plan.frontier {
            assert!(
                (s.d + s.r) - plan.total_budget == 0.0
                    || ((s.d + s.r) - plan.total_budget).abs() < 1e-3
            );
            assert!(plan.predicted_loss <= s.loss);
        }
        // Frontier is monotone in d and endpoint losses match direct evals.
        for w in plan.frontier.windows(2) {
            assert!(w[0].d < w[1].d);
        }
        let first = plan.frontier.first().unwrap();
        assert_eq!(first.loss, eval_3d(&p, 1e9, first.d, first.r).unwrap());
        let last = plan.frontier.last().unwrap();
        assert_eq!(last.loss, eval_3d(&p, 1e9, last.d, last.r).unwrap());
    }

    #[test]
    fn budget_too_small_errors() {
        let p = log_gain_params();
        assert!(matches!(
            optimize_split(&p, 1e9, 5e5, 1e6, 128),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    fn planted_crossover_points(threshold: f64, slope: f64, count: usize) -> Vec<CrossoverPoint> {
        // Points exactly on the log-linear trend crossing sigma = 1 at the
        // planted threshold.
        (0..count)
            .map(|i| {
                let x = -0.5 + 3.0 * i as f64 / (count - 1) as f64;
                let y = slope * (x - threshold.log10());
                CrossoverPoint {
                    d_over_n: 10f64.powf(x),
                    sigma: 10f64.powf(y),
                }
            })
            .collect()
    }

    #[test]
    fn crossover_recovers_planted_threshold() {
        let points = planted_crossover_points(4.14, 1.5, 24);
        let est = crossover(&points).unwrap();
        assert!(
            (est.threshold_ratio - 4.14).abs() / 4.14 < 1e-3,
            "{}",
            est.threshold_ratio
        );
        assert!((est.slope - 1.5).abs() < 1e-9);
        assert_eq!(est.n_points_used, 24);
        assert_eq!(est.excluded_nonpositive, 0);
    }

    #[test]
    fn crossover_excludes_nonpositive_sigma() {
        let mut points = planted_crossover_points(4.14, 1.5, 24);
        let base = crossover(&points).unwrap();
        points.push(CrossoverPoint {
            d_over_n: 2.0,
            sigma: -3.0,
        });
        let est = crossover(&points).unwrap();
        assert_eq!(est.excluded_nonpositive, 1);
        assert_eq!(est.slope, base.slope);
        assert_eq!(est.threshold_ratio, base.threshold_ratio);
    }

    #[test]
    fn crossover_flat_trend_is_zero_slope() {
        let points: Vec<CrossoverPoint> = (1..=5)
            .map(|i| CrossoverPoint {
                d_over_n: i as f64,
                sigma: 1.0,
            })
            .collect();
        assert!(matches!(crossover(&points), Err(Error::ZeroSlope)));
    }

    #[test]
    fn crossover_scaling_shifts_threshold_not_slope() {
        let points = planted_crossover_points(4.14, 1.5, 24);
        let base = crossover(&points).unwrap();
        let c = 3.7;
        let scaled: Vec<CrossoverPoint> = points
            .iter()
            .map(|p| CrossoverPoint {
                d_over_n: p.d_over_n,
                sigma: c * p.sigma,
            })
            .collect();
        let est = crossover(&scaled).unwrap();
        assert!((est.slope - base.slope).abs() < 1e-9);
        let expected = base.threshold_ratio * c.powf(-1.0 / base.slope);
        assert!(
            (est.threshold_ratio - expected).abs() / expected < 1e-9,
            "{} vs {expected}",
            est.threshold_ratio
        );
    }

    #[test]
    fn crossover_insufficient_points() {
        let points = vec![CrossoverPoint {
            d_over_n: 2.0,
            sigma: 0.5,
        }];
        assert!(matches!(
            crossover(&points),
            Err(Error::InsufficientPoints(_))
        ));
        let same_x = vec![
            CrossoverPoint {
                d_over_n: 2.0,
                sigma: 0.5,
            },
            CrossoverPoint {
                d_over_n: 2.0,
                sigma: 5.0,
            },
        ];
        assert!(matches!(
            crossover(&same_x),
            Err(Error::InsufficientPoints(_))
        ));
    }

    #[test]
    fn crossover_linear_space_fallback() {
        // sigma = 0.5 * ratio - 1: crosses 1 at ratio 4.
        let points: Vec<CrossoverPoint> = (1..=8)
            .map(|i| CrossoverPoint {
                d_over_n: i as f64,
                sigma: 0.5 * i as f64 - 1.0,
            })
            .collect();
        let est = crossover_in(&points, CrossoverSpace::Linear).unwrap();
        assert!(
            (est.threshold_ratio - 4.0).abs() < 1e-9,
            "{}",
            est.threshold_ratio
        );
    }

    fn tradeoff_dataset(p: &Params3D) -> Dataset {
        let mut records = Vec::new();
        for &n in &[1e8, 1e9] {
            for &d in &[1e9, 1e10, 1e11] {
                for &r in &[0.0, 2e9, 2e10] {
                    records.push(RunRecord {
                        model_params: n as u64,
                        pretrain_tokens: d as u64,
                        retrieval_tokens: r as u64,
                        loss: crate::laws::eval_3d_raw(p, n, d, r),
                        benchmark: "synthetic".into(),
                        seed: None,
                        family: None,
                    });
                }
            }
        }
        Dataset::from_records(records, "tradeoff").unwrap()
    }

    #[test]
    fn tradeoff_fitted_zero_gain_is_all_zero() {
        let mut p = log_gain_params();
        p.c = 0.0;
        let data = tradeoff_dataset(&p);
        let table = tradeoff_table(&data, &p.base, &p, Pairing::Fitted).unwrap();
        assert!(!table.rows.is_empty());
        for row in &table.rows {
            match row.point.sigma {
                Substitutability::Finite(s) => assert!(s.abs() < 1e-6, "sigma {s}"),
                Substitutability::Infinite => panic!("unexpected infinite sigma"),
            }
            assert!(row.point.kappa.abs() < 1e-12);
        }
        for g in &table.groups {
            assert!(g.kappa_med.abs() < 1e-12);
        }
    }

    #[test]
    fn tradeoff_measured_equals_fitted_on_exact_data() {
        let p = log_gain_params();
        let data = tradeoff_dataset(&p);
        let measured = tradeoff_table(&data, &p.base, &p, Pairing::Measured).unwrap();
        let fitted = tradeoff_table(&data, &p.base, &p, Pairing::Fitted).unwrap();
        for (m, f) in measured.rows.iter().zip(&fitted.rows) {
            assert!((m.point.loss_baseline - f.point.loss_baseline).abs() < 1e-12);
            assert!((m.point.loss_rag - f.point.loss_rag).abs() < 1e-12);
            assert!((m.point.kappa - f.point.kappa).abs() < 1e-9);
        }
    }

    #[test]
    fn tradeoff_sigma_round_trip() {
        let p = log_gain_params();
        let data = tradeoff_dataset(&p);
        let table = tradeoff_table(&data, &p.base, &p, Pairing::Fitted).unwrap();
        for row in &table.rows {
            if let Substitutability::Finite(s) = row.point.sigma {
                let reproduced = eval_2d(&p.base, row.point.n, row.point.d + s * row.point.r_opt);
                assert!(
                    (reproduced - row.point.loss_rag).abs() / row.point.loss_rag <= 1e-9,
                    "{reproduced} vs {}",
                    row.point.loss_rag
                );
            }
            if let EffectiveTokens::Finite(d_eff) = row.point.d_eff {
                let reproduced = eval_2d(&p.base, row.point.n, d_eff);
                assert!((reproduced - row.point.loss_rag).abs() / row.point.loss_rag <= 1e-9);
            }
        }
    }

    #[test]
    fn tradeoff_missing_baseline_errors() {
        let p = log_gain_params();
        let mut data = tradeoff_dataset(&p);
        data.records.retain(|r| r.retrieval_tokens > 0);
        let data = Dataset::from_records(data.records, "no-baselines").unwrap();
        assert!(matches!(
            tradeoff_table(&data, &p.base, &p, Pairing::Measured),
            Err(Error::MissingBaseline(_))
        ));
    }

    #[test]
    fn tradeoff_regimes_group_rows() {
        let p = log_gain_params();
        let data = tradeoff_dataset(&p);
        let table = tradeoff_table(&data, &p.base, &p, Pairing::Fitted).unwrap();
        let total: usize = table.groups.iter().map(|g| g.rows).sum();
        assert_eq!(total, table.rows.len());
        // n=1e8, d=1e9 is the 10x regime; n=1e8, d=1e11 is beyond 100x.
        assert!(table.rows.iter().any(|r| r.regime == Regime::X10));
        assert!(table.rows.iter().any(|r| r.regime == Regime::Other));
    }

    #[test]
    fn tradeoff_hand_spot_checks() {
        // Unit-parameter configuration checked by hand: baseline 3.0 at
        // (n, d) = (1e9, 1e9); retrieval at r = (e-1)e9 under c=0.5, eta=1
        // gives 2.5; d_eff = 2e9; sigma = (2e9 - 1e9)/r; kappa = 0.5/(r/1e9).
        let p = Params3D {
            base: Params2D {
                a: 1.0,
                alpha: 1.0,
                b: 1.0,
                beta: 1.0,
                l0: 1.0,
            },
            c: 0.5,
            rate: 1.0,
            family: GainFamily::LogGain,
        };
        let r = (std::f64::consts::E - 1.0) * 1e9;
        let records = vec![
            RunRecord {
                model_params: 1_000_000_000,
                pretrain_tokens: 1_000_000_000,
                retrieval_tokens: 0,
                loss: 3.0,
                benchmark: "unit".into(),
                seed: None,
                family: None,
            },
            RunRecord {
                model_params: 1_000_000_000,
                pretrain_tokens: 1_000_000_000,
                retrieval_tokens: r as u64,
                loss: 2.5,
                benchmark: "unit".into(),
                seed: None,
                family: None,
            },
        ];
        let data = Dataset::from_records(records, "unit").unwrap();
        let table = tradeoff_table(&data, &p.base, &p, Pairing::Measured).unwrap();
        assert_eq!(table.rows.len(), 1);
        let point = &table.rows[0].point;
        let r_actual = point.r_opt;
        assert!((point.delta_loss - 0.5).abs() < 1e-12);
        match point.d_eff {
            EffectiveTokens::Finite(d_eff) => assert!((d_eff - 2e9).abs() < 1.0),
            _ => panic!("expected finite d_eff"),
        }
        match point.sigma {
            Substitutability::Finite(s) => {
                assert!((s - 1e9 / r_actual).abs() < 1e-6, "sigma {s}")
            }
            _ => panic!("expected finite sigma"),
        }
        assert!((point.kappa - 0.5 / (r_actual / 1e9)).abs() < 1e-12);
        assert_eq!(table.rows[0].regime, Regime::X1);
    }

    #[test]
    fn tradeoff_spot_configurations_match_inline_arithmetic() {
        // Five configurations recomputed inline from the projection
        // formula, independent of the laws helpers.
        let p = log_gain_params();
        let data = tradeoff_dataset(&p);
        let table = tradeoff_table(&data, &p.base, &p, Pairing::Fitted).unwrap();
        let b = &p.base;
        for row in table.rows.iter().step_by(3).take(5) {
            let point = &row.point;
            let residual = point.loss_rag - b.l0 - b.a * (point.n / 1e9).powf(-b.alpha);
            assert!(residual > 0.0, "spot checks expect finite projections");
            let d_eff_expect = 1e9 * (residual / b.b).powf(-1.0 / b.beta);
            let sigma_expect = (d_eff_expect - point.d) / point.r_opt;
            let kappa_expect = (point.loss_baseline - point.loss_rag) / (point.r_opt / 1e9);
            match (point.d_eff, point.sigma) {
                (EffectiveTokens::Finite(d_eff), Substitutability::Finite(sigma)) => {
                    assert!((d_eff - d_eff_expect).abs() / d_eff_expect < 1e-12);
                    assert!((sigma - sigma_expect).abs() <= 1e-12 * sigma_expect.abs().max(1.0));
                }
                other => panic!("expected finite projection, got {other:?}"),
            }
            assert!((point.kappa - kappa_expect).abs() < 1e-12);
        }
    }

    #[test]
    fn iso_grid_monotone_and_corners() {
        let p2 = log_gain_params().base;
        let iso = iso_surfaces(&p2, (3e7, 3e9), (3e7, 1e11), 8, 6.0).unwrap();
        assert_eq!(iso.cells.len(), 64);
        // Monotone decreasing along both axes.
        for i in 0..8 {
            for j in 0..7 {
                let here = iso.cells[i * 8 + j].loss;
                let right = iso.cells[i * 8 + j + 1].loss;
                assert!(right < here);
            }
        }
        for i in 0..7 {
            for j in 0..8 {
                let here = iso.cells[i * 8 + j].loss;
                let below = iso.cells[(i + 1) * 8 + j].loss;
                assert!(below < here);
            }
        }
        // Corner cells equal direct evaluation.
        assert_eq!(iso.cells[0].loss, eval_2d(&p2, 3e7, 3e7));
        assert_eq!(iso.cells[63].loss, eval_2d(&p2, 3e9, 1e11));
    }

    #[test]
    fn iso_frontier_beats_sampled_competitors() {
        let p2 = log_gain_params().base;
        let f = 6.0;
        let iso = iso_surfaces(&p2, (3e7, 3e9), (3e7, 1e11), 12, f).unwrap();
        assert!(!iso.frontier.is_empty());
        let mut rng = SplitMix64::new(5);
        for point in &iso.frontier {
            let compute = point.compute;
            let lo = (3e7f64).max(compute / (f * 1e11));
            let hi = (3e9f64).min(compute / (f * 3e7));
            for _ in 0..64 {
                let u = rng.next_f64();
                let n = (lo.ln() + u * (hi.ln() - lo.ln())).exp();
                let loss = eval_2d(&p2, n, compute / (f * n));
                assert!(
                    point.loss <= loss + 1e-9 * loss.abs(),
                    "frontier {} vs sample {loss}",
                    point.loss
                );
            }
            // Constraint holds at the reported point.
            assert!((f * point.n * point.d - compute).abs() / compute < 1e-9);
        }
    }
}
