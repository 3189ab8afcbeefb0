//! Report file formats shared by the CLI: the fit/params JSON (parameter
//! values written at 17 significant digits so they round-trip bit-exactly)
//! and the plot-ready CSV layouts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitter::{FitConfig, FitResult, FitStage, FittedParams};
use crate::laws::{GainFamily, Params2D, Params3D};

pub const SCHEMA_VERSION: u32 = 1;

/// One benchmark's fitted stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkFit {
    pub benchmark: String,
    pub stage1: FitResult,
    pub stage2: Option<FitResult>,
}

impl BenchmarkFit {
    pub fn params_2d(&self) -> &Params2D {
        self.stage1
            .params
            .as_2d()
            .expect("stage 1 holds the two-axis law")
    }

    /// The three-axis law for this benchmark; a two-axis-only fit maps to a
    /// zero-gain log family so downstream allocation degenerates cleanly.
    pub fn params_3d(&self) -> Params3D {
        match &self.stage2 {
            Some(s2) => *s2.params.as_3d().expect("stage 2 holds the three-axis law"),
            None => Params3D {
                base: *self.params_2d(),
                c: 0.0,
                rate: 1.0,
                family: GainFamily::LogGain,
            },
        }
    }
}

/// The `fit` command's output and every other command's `--params` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub config: FitConfig,
    pub fits: Vec<BenchmarkFit>,
}

impl FitReport {
    pub fn parse(text: &str) -> Result<FitReport> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })
    }

    /// Selects the entry for `benchmark`, or the only entry when the flag
    /// is omitted.
    pub fn select(&self, benchmark: Option<&str>) -> Result<&BenchmarkFit> {
        match benchmark {
            Some(name) => self
                .fits
                .iter()
                .find(|f| f.benchmark == name)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("params file has no benchmark `{name}`"))
                }),
            None if self.fits.len() == 1 => Ok(&self.fits[0]),
            None => Err(Error::InvalidArgument(format!(
                "params file has {} benchmarks ({}); pass --benchmark",
                self.fits.len(),
                self.fits
                    .iter()
                    .map(|f| f.benchmark.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
        }
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn f17(v: f64) -> String {
    debug_assert!(v.is_finite(), "report floats must be finite, got {v}");
    format!("{v:.16e}")
}

fn jstr(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn write_pair_list(out: &mut String, pairs: &[(&str, String)], indent: &str) {
    for (i, (key, value)) in pairs.iter().enumerate() {
        let comma = if i + 1 == pairs.len() { "" } else { "," };
        let _ = writeln!(out, "{indent}{}: {value}{comma}", jstr(key));
    }
}

fn config_json(cfg: &FitConfig, indent: &str) -> String {
    let inner = format!("{indent}  ");
    let bounds = &cfg.bounds;
    let pair = |b: (f64, f64)| format!("[{}, {}]", f17(b.0), f17(b.1));
    let mut out = String::from("{\n");
    write_pair_list(
        &mut out,
        &[
            ("family", jstr(cfg.family.as_str())),
            (
                "residual_space",
                jstr(match cfg.residual_space {
                    crate::fitter::ResidualSpace::Relative => "relative",
                    crate::fitter::ResidualSpace::Log => "log",
                }),
            ),
            ("n_starts", cfg.n_starts.to_string()),
            ("max_iters", cfg.max_iters.to_string()),
            ("seed", cfg.seed.to_string()),
            (
                "bounds",
                format!(
                    "{{ \"a\": {}, \"alpha\": {}, \"b\": {}, \"beta\": {}, \"l0_lo\": {}, \
                     \"l0_hi\": {}, \"c\": {}, \"eta\": {}, \"gamma\": {} }}",
                    pair(bounds.a),
                    pair(bounds.alpha),
                    pair(bounds.b),
                    pair(bounds.beta),
                    f17(bounds.l0_lo),
                    bounds.l0_hi.map(f17).unwrap_or_else(|| "null".into()),
                    pair(bounds.c),
                    pair(bounds.eta),
                    pair(bounds.gamma),
                ),
            ),
        ],
        &inner,
    );
    let _ = write!(out, "{indent}}}");
    out
}

fn params_json(params: &FittedParams) -> String {
    match params {
        FittedParams::TwoD(p) => format!(
            "{{ \"law\": \"two_d\", \"a\": {}, \"alpha\": {}, \"b\": {}, \"beta\": {}, \
             \"l0\": {} }}",
            f17(p.a),
            f17(p.alpha),
            f17(p.b),
            f17(p.beta),
            f17(p.l0)
        ),
        FittedParams::ThreeD(p) => format!(
            "{{ \"law\": \"three_d\", \"base\": {{ \"a\": {}, \"alpha\": {}, \"b\": {}, \
             \"beta\": {}, \"l0\": {} }}, \"c\": {}, \"rate\": {}, \"family\": {} }}",
            f17(p.base.a),
            f17(p.base.alpha),
            f17(p.base.b),
            f17(p.base.beta),
            f17(p.base.l0),
            f17(p.c),
            f17(p.rate),
            jstr(p.family.as_str())
        ),
    }
}

fn fit_result_json(fr: &FitResult, indent: &str) -> String {
    let inner = format!("{indent}  ");
    let residuals = fr
        .per_point_residuals
        .iter()
        .map(|&r| f17(r))
        .collect::<Vec<_>>()
        .join(", ");
    let saturated = fr
        .saturated_bounds
        .iter()
        .map(|s| jstr(s))
        .collect::<Vec<_>>()
        .join(", ");
    let stage = match fr.stage {
        FitStage::Stage1Baseline => "stage1_baseline",
        FitStage::Stage2Retrieval => "stage2_retrieval",
        FitStage::Joint => "joint",
    };
    let mut out = String::from("{\n");
    write_pair_list(
        &mut out,
        &[
            ("params", params_json(&fr.params)),
            ("objective", f17(fr.objective)),
            ("per_point_residuals", format!("[{residuals}]")),
            ("saturated_bounds", format!("[{saturated}]")),
            ("stage", jstr(stage)),
            ("config_echo", config_json(&fr.config_echo, &inner)),
            ("n_points", fr.n_points.to_string()),
        ],
        &inner,
    );
    let _ = write!(out, "{indent}}}");
    out
}

/// Serializes a fit report with every float at 17 significant digits.
pub fn fit_report_to_json(report: &FitReport) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"schema_version\": {},", report.schema_version);
    let _ = writeln!(out, "  \"config\": {},", config_json(&report.config, "  "));
    let _ = writeln!(out, "  \"fits\": [");
    for (i, fit) in report.fits.iter().enumerate() {
        let comma = if i + 1 == report.fits.len() { "" } else { "," };
        let _ = writeln!(out, "    {{");
        let _ = writeln!(out, "      \"benchmark\": {},", jstr(&fit.benchmark));
        let _ = writeln!(
            out,
            "      \"stage1\": {},",
            fit_result_json(&fit.stage1, "      ")
        );
        let stage2 = match &fit.stage2 {
            Some(s2) => fit_result_json(s2, "      "),
            None => "null".to_string(),
        };
        let _ = writeln!(out, "      \"stage2\": {stage2}");
        let _ = writeln!(out, "    }}{comma}");
    }
    let _ = writeln!(out, "  ]");
    out.push('}');
    out.push('\n');
    out
}

/// CSV summary of fits in the layout of the per-benchmark exponent tables:
/// one row per benchmark with the shared-form exponents first.
pub fn fit_summary_csv(report: &FitReport) -> String {
    let mut out = String::from(
        "benchmark,family,alpha,beta,rate,l0,a,b,c,stage1_objective,stage2_objective,\
         n_points,saturated\n",
    );
    for fit in &report.fits {
        let p = fit.params_2d();
        let (rate, c, s2_obj) = match &fit.stage2 {
            Some(s2) => {
                let g = s2.params.as_3d().expect("3d");
                (
                    g.rate.to_string(),
                    g.c.to_string(),
                    s2.objective.to_string(),
                )
            }
            None => (String::new(), String::new(), String::new()),
        };
        let mut saturated: Vec<&str> = fit
            .stage1
            .saturated_bounds
            .iter()
            .map(String::as_str)
            .collect();
        if let Some(s2) = &fit.stage2 {
            saturated.extend(s2.saturated_bounds.iter().map(String::as_str));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fit.benchmark,
            report.config.family.as_str(),
            p.alpha,
            p.beta,
            rate,
            p.l0,
            p.a,
            p.b,
            c,
            fit.stage1.objective,
            s2_obj,
            fit.stage1.n_points,
            saturated.join(";"),
        );
    }
    out
}
