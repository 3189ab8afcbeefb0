//! Scaling-law families and the derived trade-off quantities.
//!
//! Two families are supported on top of the shared two-axis power law in
//! model parameters and pretraining tokens:
//!
//! * a logarithmic retrieval gain, `- c * ln(1 + rate * r/1e9)`, and
//! * a power retrieval gain, `+ c * (1 + r/1e9)^(-rate)`.
//!
//! Token counts are raw tokens everywhere; the 1e9 normalization happens
//! inside these evaluators and nowhere else. Note the power family's gain
//! term contributes exactly `c` at r = 0, so its no-retrieval baseline sits
//! `c` above the plain two-axis law; baselines for that family must come
//! from `eval_3d` at r = 0, not from `eval_2d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOKEN_SCALE: f64 = 1e9;

/// Two-axis power law: `a * (n/1e9)^(-alpha) + b * (d/1e9)^(-beta) + l0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params2D {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
    pub l0: f64,
}

/// Which retrieval gain term extends the two-axis law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainFamily {
    LogGain,
    PowerGain,
}

impl GainFamily {
    pub fn rate_name(self) -> &'static str {
        match self {
            GainFamily::LogGain => "eta",
            GainFamily::PowerGain => "gamma",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GainFamily::LogGain => "log_gain",
            GainFamily::PowerGain => "power_gain",
        }
    }
}

/// Three-axis law: the two-axis base plus a retrieval gain term of magnitude
/// `c` and rate `rate` (eta for the log family, gamma for the power family).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params3D {
    pub base: Params2D,
    pub c: f64,
    pub rate: f64,
    pub family: GainFamily,
}

/// Predicted loss of the two-axis law. Strictly decreasing in both arguments
/// for positive `a`, `b`; tends to `l0` as both grow.
pub fn eval_2d(p: &Params2D, n: f64, d: f64) -> f64 {
    p.a * (n / TOKEN_SCALE).powf(-p.alpha) + p.b * (d / TOKEN_SCALE).powf(-p.beta) + p.l0
}

/// Raw three-axis prediction without the positivity check. The fitter uses
/// this directly and treats non-positive log-family values as infeasible.
pub fn eval_3d_raw(p: &Params3D, n: f64, d: f64, r: f64) -> f64 {
    let base = eval_2d(&p.base, n, d);
    match p.family {
        GainFamily::LogGain => base - p.c * (1.0 + p.rate * r / TOKEN_SCALE).ln(),
        GainFamily::PowerGain => base + p.c * (1.0 + r / TOKEN_SCALE).powf(-p.rate),
    }
}

/// Predicted loss of the three-axis law.
///
/// Errors with `NonPositivePrediction` when the log-family value is not
/// positive at the queried point, which signals a parameter set outside its
/// domain of validity.
pub fn eval_3d(p: &Params3D, n: f64, d: f64, r: f64) -> Result<f64> {
    let value = eval_3d_raw(p, n, d, r);
    if p.family == GainFamily::LogGain && value <= 0.0 {
        return Err(Error::NonPositivePrediction(format!(
            "log-gain law predicts {value} at (n={n}, d={d}, r={r})"
        )));
    }
    Ok(value)
}

/// Closed-form partial derivatives of the three-axis law (per raw token).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub dn: f64,
    pub dd: f64,
    pub dr: f64,
}

pub fn partials_3d(p: &Params3D, n: f64, d: f64, r: f64) -> Partials {
    let base = &p.base;
    let dn = -base.a * base.alpha / TOKEN_SCALE * (n / TOKEN_SCALE).powf(-base.alpha - 1.0);
    let dd = -base.b * base.beta / TOKEN_SCALE * (d / TOKEN_SCALE).powf(-base.beta - 1.0);
    let dr = match p.family {
        GainFamily::LogGain => -p.c * p.rate / TOKEN_SCALE / (1.0 + p.rate * r / TOKEN_SCALE),
        GainFamily::PowerGain => {
            -p.c * p.rate / TOKEN_SCALE * (1.0 + r / TOKEN_SCALE).powf(-p.rate - 1.0)
        }
    };
    Partials { dn, dd, dr }
}

/// Pretraining tokens at which the two-axis law reproduces a given loss, or
/// a flag when the loss sits at or below the parametric floor for that model
/// size (the projection is then unbounded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "tokens")]
pub enum EffectiveTokens {
    Finite(f64),
    UndefinedFloor,
}

impl EffectiveTokens {
    pub fn finite(self) -> Option<f64> {
        match self {
            EffectiveTokens::Finite(v) => Some(v),
            EffectiveTokens::UndefinedFloor => None,
        }
    }
}

/// Inverts the two-axis law in its data argument: finds d such that
/// `eval_2d(p, n, d)` equals `loss_rag`.
pub fn effective_pretrain_tokens(p: &Params2D, n: f64, loss_rag: f64) -> EffectiveTokens {
    let residual = loss_rag - p.l0 - p.a * (n / TOKEN_SCALE).powf(-p.alpha);
    if residual > 0.0 {
        EffectiveTokens::Finite(TOKEN_SCALE * (residual / p.b).powf(-1.0 / p.beta))
    } else {
        EffectiveTokens::UndefinedFloor
    }
}

/// Pretraining tokens saved per retrieval token, or a flag when the
/// retrieval-augmented loss beats the parametric floor outright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Substitutability {
    Finite(f64),
    Infinite,
}

impl Substitutability {
    pub fn finite(self) -> Option<f64> {
        match self {
            Substitutability::Finite(v) => Some(v),
            Substitutability::Infinite => None,
        }
    }
}

/// Configuration for a substitutability query.
#[derive(Debug, Clone, Copy)]
pub struct SubstitutabilityInput {
    pub n: f64,
    pub d: f64,
    pub r_opt: f64,
    pub loss_rag: f64,
}

/// sigma = (d_eff - d) / r_opt. May be negative when retrieval hurts.
pub fn substitutability(p: &Params2D, cfg: &SubstitutabilityInput) -> Result<Substitutability> {
    if cfg.r_opt == 0.0 {
        return Err(Error::ZeroRetrieval);
    }
    Ok(match effective_pretrain_tokens(p, cfg.n, cfg.loss_rag) {
        EffectiveTokens::Finite(d_eff) => Substitutability::Finite((d_eff - cfg.d) / cfg.r_opt),
        EffectiveTokens::UndefinedFloor => Substitutability::Infinite,
    })
}

/// kappa = (loss_baseline - loss_rag) / (r / 1e9): loss reduction per billion
/// retrieval tokens, negative when retrieval hurts.
pub fn marginal_benefit(loss_baseline: f64, loss_rag: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(Error::ZeroRetrieval);
    }
    Ok((loss_baseline - loss_rag) / (r / TOKEN_SCALE))
}

/// Geometric mean of strictly positive substitutability values. Callers must
/// exclude non-positive entries and report their count separately.
pub fn aggregate_sigma_gm(sigmas: &[f64]) -> Result<f64> {
    if sigmas.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = 0.0;
    for &s in sigmas {
        if s <= 0.0 {
            return Err(Error::NonPositiveInput(s));
        }
        sum += s.ln();
    }
    Ok((sum / sigmas.len() as f64).exp())
}

/// Median marginal benefit; even counts average the two central values.
pub fn aggregate_kappa_med(kappas: &[f64]) -> Result<f64> {
    if kappas.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = kappas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Tokens-per-parameter regime buckets, by nearest decade of d/n in log10
/// space with half-decade bands. A ratio exactly on a band edge goes to the
/// lower regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    X1,
    X10,
    X100,
    Other,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::X1 => "1x",
            Regime::X10 => "10x",
            Regime::X100 => "100x",
            Regime::Other => "other",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn regime_of(n: f64, d: f64) -> Regime {
    let t = (d / n).log10();
    if (-0.5..=0.5).contains(&t) {
        Regime::X1
    } else if t > 0.5 && t <= 1.5 {
        Regime::X10
    } else if t > 1.5 && t <= 2.5 {
        Regime::X100
    } else {
        Regime::Other
    }
}

/// One configuration's trade-off summary: baseline vs retrieval-augmented
/// loss, the effective-pretraining projection, and the two derived rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub n: f64,
    pub d: f64,
    pub r_opt: f64,
    pub loss_rag: f64,
    pub loss_baseline: f64,
    pub d_eff: EffectiveTokens,
    pub sigma: Substitutability,
    pub delta_loss: f64,
    pub kappa: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> Params2D {
        Params2D {
            a: 1.0,
            alpha: 1.0,
            b: 1.0,
            beta: 1.0,
            l0: 1.0,
        }
    }

    #[test]
    fn eval_2d_unit_normalization() {
        assert_eq!(eval_2d(&unit_params(), 1e9, 1e9), 3.0);
    }

    #[test]
    fn eval_2d_hand_case() {
        // 2*4^(-0.5) + 3*16^(-0.25) + 0.5 = 1 + 1.5 + 0.5
        let p = Params2D {
            a: 2.0,
            alpha: 0.5,
            b: 3.0,
            beta: 0.25,
            l0: 0.5,
        };
        let got = eval_2d(&p, 4e9, 16e9);
        assert!((got - 3.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn eval_2d_approaches_floor() {
        let p = Params2D {
            a: 2.0,
            alpha: 0.3,
            b: 3.0,
            beta: 0.2,
            l0: 1.7,
        };
        // Power terms decay like (n/1e9)^(-min exponent); at n = d = 1e40
        // both contributions sit below 1e-6 for exponents >= 0.2.
        let far = eval_2d(&p, 1e40, 1e40);
        assert!((far - p.l0).abs() < 1e-5, "{far}");
        let nearer = eval_2d(&p, 1e18, 1e18);
        assert!(nearer > far && nearer - p.l0 < 0.1, "{nearer}");
    }

    #[test]
    fn log_gain_hand_case() {
        // base 3.0 minus 0.5*ln(e) at r = (e-1)*1e9.
        let p = Params3D {
            base: Params2D {
                a: 2.0,
                alpha: 0.5,
                b: 3.0,
                beta: 0.25,
                l0: 0.5,
            },
            c: 0.5,
            rate: 1.0,
            family: GainFamily::LogGain,
        };
        let r = (std::f64::consts::E - 1.0) * 1e9;
        let got = eval_3d(&p, 4e9, 16e9, r).unwrap();
        assert!((got - 2.5).abs() < 1e-12, "{got}");
    }

    #[test]
    fn log_gain_at_zero_retrieval_is_exactly_2d() {
        let p = Params3D {
            base: Params2D {
                a: 1.3,
                alpha: 0.4,
                b: 0.8,
                beta: 0.3,
                l0: 0.9,
            },
            c: 0.7,
            rate: 2.5,
            family: GainFamily::LogGain,
        };
        let n = 5.5e8;
        let d = 2.2e10;
        assert_eq!(eval_3d(&p, n, d, 0.0).unwrap(), eval_2d(&p.base, n, d));
    }

    #[test]
    fn power_gain_zero_c_matches_2d() {
        let p = Params3D {
            base: unit_params(),
            c: 0.0,
            rate: 3.0,
            family: GainFamily::PowerGain,
        };
        for r in [0.0, 1e9, 7e10] {
            assert_eq!(
                eval_3d(&p, 2e9, 3e9, r).unwrap(),
                eval_2d(&p.base, 2e9, 3e9)
            );
        }
    }

    #[test]
    fn power_gain_offsets_baseline_by_c() {
        let p = Params3D {
            base: unit_params(),
            c: 0.4,
            rate: 1.5,
            family: GainFamily::PowerGain,
        };
        let got = eval_3d(&p, 1e9, 1e9, 0.0).unwrap();
        assert!((got - 3.4).abs() < 1e-12);
    }

    #[test]
    fn log_gain_nonpositive_prediction_errors() {
        let p = Params3D {
            base: Params2D {
                a: 0.01,
                alpha: 1.0,
                b: 0.01,
                beta: 1.0,
                l0: 0.0,
            },
            c: 5.0,
            rate: 10.0,
            family: GainFamily::LogGain,
        };
        assert!(matches!(
            eval_3d(&p, 1e12, 1e12, 1e12),
            Err(Error::NonPositivePrediction(_))
        ));
    }

    #[test]
    fn partials_hand_case() {
        // dL/dd with b=1, beta=1 at d=1e9 is -1e-9 per token.
        let p = Params3D {
            base: unit_params(),
            c: 0.0,
            rate: 1.0,
            family: GainFamily::LogGain,
        };
        let got = partials_3d(&p, 1e9, 1e9, 0.0);
        assert!((got.dd - (-1e-9)).abs() < 1e-24, "{}", got.dd);
        assert_eq!(got.dr, 0.0);
    }

    #[test]
    fn partials_log_gain_dr_formula() {
        let p = Params3D {
            base: unit_params(),
            c: 0.5,
            rate: 2.0,
            family: GainFamily::LogGain,
        };
        let r = 3e9;
        let expect = -0.5 * 2.0 / 1e9 / (1.0 + 2.0 * 3.0);
        assert!((partials_3d(&p, 1e9, 1e9, r).dr - expect).abs() < 1e-24);
    }

    #[test]
    fn effective_tokens_inverts_eval() {
        let p = Params2D {
            a: 1.9,
            alpha: 0.31,
            b: 2.2,
            beta: 0.27,
            l0: 1.05,
        };
        for d in [5e7, 1e9, 3e10, 9e11] {
            let loss = eval_2d(&p, 7e8, d);
            match effective_pretrain_tokens(&p, 7e8, loss) {
                EffectiveTokens::Finite(d_eff) => {
                    assert!((d_eff - d).abs() / d <= 1e-9, "{d_eff} vs {d}")
                }
                EffectiveTokens::UndefinedFloor => panic!("unexpected floor"),
            }
        }
    }

    #[test]
    fn effective_tokens_hand_case() {
        // residual 0.5 with unit params -> 2e9.
        match effective_pretrain_tokens(&unit_params(), 1e9, 2.5) {
            EffectiveTokens::Finite(d_eff) => assert!((d_eff - 2e9).abs() < 1e-3),
            EffectiveTokens::UndefinedFloor => panic!("unexpected floor"),
        }
    }

    #[test]
    fn effective_tokens_floor_boundary() {
        let p = unit_params();
        let floor = p.l0 + p.a * (1e9 / TOKEN_SCALE).powf(-p.alpha);
        assert_eq!(
            effective_pretrain_tokens(&p, 1e9, floor),
            EffectiveTokens::UndefinedFloor
        );
    }

    #[test]
    fn substitutability_hand_case() {
        let cfg = SubstitutabilityInput {
            n: 1e9,
            d: 1e9,
            r_opt: 0.5e9,
            loss_rag: 2.5,
        };
        match substitutability(&unit_params(), &cfg).unwrap() {
            Substitutability::Finite(s) => assert!((s - 2.0).abs() < 1e-9, "{s}"),
            Substitutability::Infinite => panic!("unexpected flag"),
        }
    }

    #[test]
    fn substitutability_zero_when_loss_matches_baseline() {
        let p = unit_params();
        let cfg = SubstitutabilityInput {
            n: 2e9,
            d: 4e9,
            r_opt: 1e9,
            loss_rag: eval_2d(&p, 2e9, 4e9),
        };
        match substitutability(&p, &cfg).unwrap() {
            Substitutability::Finite(s) => assert!(s.abs() < 1e-9, "{s}"),
            Substitutability::Infinite => panic!("unexpected flag"),
        }
    }

    #[test]
    fn substitutability_below_floor_is_infinite() {
        let cfg = SubstitutabilityInput {
            n: 1e9,
            d: 1e9,
            r_opt: 1e9,
            loss_rag: 1.5,
        };
        assert_eq!(
            substitutability(&unit_params(), &cfg).unwrap(),
            Substitutability::Infinite
        );
    }

    #[test]
    fn substitutability_rejects_zero_retrieval() {
        let cfg = SubstitutabilityInput {
            n: 1e9,
            d: 1e9,
            r_opt: 0.0,
            loss_rag: 2.5,
        };
        assert!(matches!(
            substitutability(&unit_params(), &cfg),
            Err(Error::ZeroRetrieval)
        ));
    }

    #[test]
    fn marginal_benefit_cases() {
        assert_eq!(marginal_benefit(2.0, 2.0, 1e9).unwrap(), 0.0);
        assert!((marginal_benefit(2.4, 2.0, 2e9).unwrap() - 0.2).abs() < 1e-15);
        assert!(marginal_benefit(2.0, 2.4, 1e9).unwrap() < 0.0);
        assert!(matches!(
            marginal_benefit(2.0, 1.0, 0.0),
            Err(Error::ZeroRetrieval)
        ));
    }

    #[test]
    fn sigma_gm_cases() {
        assert!((aggregate_sigma_gm(&[1.0, 100.0]).unwrap() - 10.0).abs() < 1e-12);
        assert!((aggregate_sigma_gm(&[7.5]).unwrap() - 7.5).abs() < 1e-12);
        assert!((aggregate_sigma_gm(&[2.0, 8.0, 32.0]).unwrap() - 8.0).abs() < 1e-12);
        assert!(matches!(aggregate_sigma_gm(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            aggregate_sigma_gm(&[1.0, -2.0]),
            Err(Error::NonPositiveInput(_))
        ));
    }

    #[test]
    fn kappa_median_cases() {
        assert_eq!(aggregate_kappa_med(&[-1.0, 0.0, 5.0]).unwrap(), 0.0);
        assert_eq!(aggregate_kappa_med(&[1.0, 3.0]).unwrap(), 2.0);
        assert!(matches!(aggregate_kappa_med(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn kappa_median_matches_sort_oracle() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for trial in 0..1000 {
            let len = 1 + (trial % 17);
            let values: Vec<f64> = (0..len).map(|_| rng.next_f64() * 10.0 - 5.0).collect();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let expect = if len % 2 == 1 {
                sorted[len / 2]
            } else {
                0.5 * (sorted[len / 2 - 1] + sorted[len / 2])
            };
            assert_eq!(aggregate_kappa_med(&values).unwrap(), expect);
        }
    }

    #[test]
    fn regime_buckets() {
        assert_eq!(regime_of(1e9, 1e9), Regime::X1);
        assert_eq!(regime_of(1e8, 1e9), Regime::X10);
        assert_eq!(regime_of(1e8, 1e10), Regime::X100);
        assert_eq!(regime_of(1e8, 1e12), Regime::Other);
        assert_eq!(regime_of(1e9, 1e8), Regime::Other);
        // Band edge 10^0.5 ties to the lower regime.
        let edge = 10f64.powf(0.5);
        assert_eq!(regime_of(1e9, edge * 1e9), Regime::X1);
        assert_eq!(regime_of(1e9, (edge + 1e-6) * 1e9), Regime::X10);
    }
}
