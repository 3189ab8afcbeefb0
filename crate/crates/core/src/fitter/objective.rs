//! Sum-of-squares objectives over run records, compressed by unique axis
//! values.
//!
//! Fit datasets have hundreds of rows but only a handful of distinct model
//! sizes, data budgets, and retrieval sizes, so each objective evaluation
//! computes one power term per distinct value instead of per row.

use crate::laws::{GainFamily, Params2D, Params3D, TOKEN_SCALE};
use crate::records::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSpace {
    Relative,
    Log,
}

/// Per-point residual in the configured space. Non-positive predictions in
/// log space poison the objective with +inf.
#[inline]
fn residual(space: ResidualSpace, pred: f64, obs: f64, ln_obs: f64) -> f64 {
    match space {
        ResidualSpace::Relative => (pred - obs) / obs,
        ResidualSpace::Log => {
            if pred > 0.0 {
                pred.ln() - ln_obs
            } else {
                f64::INFINITY
            }
        }
    }
}

fn dedup_index(raw: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let mut uniques: Vec<f64> = Vec::new();
    let mut index = Vec::with_capacity(raw.len());
    for &v in raw {
        let pos = match uniques.iter().position(|&u| u == v) {
            Some(p) => p,
            None => {
                uniques.push(v);
                uniques.len() - 1
            }
        };
        index.push(pos as u32);
    }
    (uniques, index)
}

/// Shared compressed view of a record set.
pub struct CompressedPoints {
    pub n_units: Vec<f64>,
    pub d_units: Vec<f64>,
    pub r_units: Vec<f64>,
    pub point_n: Vec<u32>,
    pub point_d: Vec<u32>,
    pub point_r: Vec<u32>,
    pub obs: Vec<f64>,
    pub ln_obs: Vec<f64>,
    pub space: ResidualSpace,
}

impl CompressedPoints {
    pub fn new(records: &[RunRecord], space: ResidualSpace) -> Self {
        let n_raw: Vec<f64> = records
            .iter()
            .map(|r| r.model_params as f64 / TOKEN_SCALE)
            .collect();
        let d_raw: Vec<f64> = records
            .iter()
            .map(|r| r.pretrain_tokens as f64 / TOKEN_SCALE)
            .collect();
        let r_raw: Vec<f64> = records
            .iter()
            .map(|r| r.retrieval_tokens as f64 / TOKEN_SCALE)
            .collect();
        let (n_units, point_n) = dedup_index(&n_raw);
        let (d_units, point_d) = dedup_index(&d_raw);
        let (r_units, point_r) = dedup_index(&r_raw);
        let obs: Vec<f64> = records.iter().map(|r| r.loss).collect();
        let ln_obs: Vec<f64> = obs.iter().map(|&o| o.ln()).collect();
        CompressedPoints {
            n_units,
            d_units,
            r_units,
            point_n,
            point_d,
            point_r,
            obs,
            ln_obs,
            space,
        }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn min_loss(&self) -> f64 {
        self.obs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn term_buffers(&self) -> TermBuffers {
        TermBuffers {
            n_terms: vec![0.0; self.n_units.len()],
            d_terms: vec![0.0; self.d_units.len()],
            r_terms: vec![0.0; self.r_units.len()],
        }
    }

    /// Sum of squared residuals for the two-axis law.
    pub fn sse_2d(&self, p: &Params2D) -> f64 {
        let mut buf = self.term_buffers();
        self.fill_base_terms(p, &mut buf);
        let mut sse = 0.0;
        for i in 0..self.obs.len() {
            let pred = buf.n_terms[self.point_n[i] as usize]
                + buf.d_terms[self.point_d[i] as usize]
                + p.l0;
            let r = residual(self.space, pred, self.obs[i], self.ln_obs[i]);
            sse += r * r;
        }
        sse
    }

    /// Sum of squared residuals for the three-axis law, all parameters free.
    pub fn sse_3d(&self, p: &Params3D) -> f64 {
        let mut buf = self.term_buffers();
        self.fill_base_terms(&p.base, &mut buf);
        fill_gain_terms(p.c, p.rate, p.family, &self.r_units, &mut buf.r_terms);
        let mut sse = 0.0;
        for i in 0..self.obs.len() {
            let pred = buf.n_terms[self.point_n[i] as usize]
                + buf.d_terms[self.point_d[i] as usize]
                + p.base.l0
                + buf.r_terms[self.point_r[i] as usize];
            let r = residual(self.space, pred, self.obs[i], self.ln_obs[i]);
            sse += r * r;
        }
        sse
    }

    fn fill_base_terms(&self, p: &Params2D, buf: &mut TermBuffers) {
        for (t, &u) in buf.n_terms.iter_mut().zip(&self.n_units) {
            *t = p.a * u.powf(-p.alpha);
        }
        for (t, &u) in buf.d_terms.iter_mut().zip(&self.d_units) {
            *t = p.b * u.powf(-p.beta);
        }
    }

    /// Per-point residuals at fixed parameters, in record order.
    pub fn residuals_3d(&self, p: &Params3D) -> Vec<f64> {
        let mut buf = self.term_buffers();
        self.fill_base_terms(&p.base, &mut buf);
        fill_gain_terms(p.c, p.rate, p.family, &self.r_units, &mut buf.r_terms);
        (0..self.obs.len())
            .map(|i| {
                let pred = buf.n_terms[self.point_n[i] as usize]
                    + buf.d_terms[self.point_d[i] as usize]
                    + p.base.l0
                    + buf.r_terms[self.point_r[i] as usize];
                residual(self.space, pred, self.obs[i], self.ln_obs[i])
            })
            .collect()
    }

    pub fn residuals_2d(&self, p: &Params2D) -> Vec<f64> {
        let p3 = Params3D {
            base: *p,
            c: 0.0,
            rate: 1.0,
            family: GainFamily::LogGain,
        };
        self.residuals_3d(&p3)
    }
}

struct TermBuffers {
    n_terms: Vec<f64>,
    d_terms: Vec<f64>,
    r_terms: Vec<f64>,
}

fn fill_gain_terms(c: f64, rate: f64, family: GainFamily, r_units: &[f64], out: &mut [f64]) {
    match family {
        GainFamily::LogGain => {
            for (t, &u) in out.iter_mut().zip(r_units) {
                *t = -c * (rate * u).ln_1p();
            }
        }
        GainFamily::PowerGain => {
            for (t, &u) in out.iter_mut().zip(r_units) {
                *t = c * (1.0 + u).powf(-rate);
            }
        }
    }
}

/// Stage-2 objective: the two-axis contribution per point is frozen, only
/// the gain term varies with (c, rate).
pub struct GainObjective {
    base_pred: Vec<f64>,
    r_units: Vec<f64>,
    point_r: Vec<u32>,
    obs: Vec<f64>,
    ln_obs: Vec<f64>,
    space: ResidualSpace,
    family: GainFamily,
}

impl GainObjective {
    pub fn new(points: &CompressedPoints, base: &Params2D, family: GainFamily) -> Self {
        let base_pred: Vec<f64> = (0..points.len())
            .map(|i| {
                base.a * points.n_units[points.point_n[i] as usize].powf(-base.alpha)
                    + base.b * points.d_units[points.point_d[i] as usize].powf(-base.beta)
                    + base.l0
            })
            .collect();
        GainObjective {
            base_pred,
            r_units: points.r_units.clone(),
            point_r: points.point_r.clone(),
            obs: points.obs.clone(),
            ln_obs: points.ln_obs.clone(),
            space: points.space,
            family,
        }
    }

    pub fn sse(&self, c: f64, rate: f64) -> f64 {
        let mut gain = vec![0.0; self.r_units.len()];
        fill_gain_terms(c, rate, self.family, &self.r_units, &mut gain);
        let mut sse = 0.0;
        for i in 0..self.obs.len() {
            let pred = self.base_pred[i] + gain[self.point_r[i] as usize];
            let r = residual(self.space, pred, self.obs[i], self.ln_obs[i]);
            sse += r * r;
        }
        sse
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::eval_3d_raw;

    fn sample_records() -> Vec<RunRecord> {
        let mut out = Vec::new();
        for &n in &[30_000_000u64, 300_000_000, 3_000_000_000] {
            for &d in &[100_000_000u64, 1_000_000_000, 10_000_000_000] {
                for &r in &[0u64, 2_000_000_000] {
                    out.push(RunRecord {
                        model_params: n,
                        pretrain_tokens: d,
                        retrieval_tokens: r,
                        loss: 1.0 + (n as f64).ln() / 10.0 + (d as f64).ln() / 20.0
                            - (r as f64 / 1e10),
                        benchmark: "t".into(),
                        seed: None,
                        family: None,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn compressed_sse_matches_direct_evaluation() {
        let records = sample_records();
        let p = Params3D {
            base: Params2D {
                a: 2.1,
                alpha: 0.31,
                b: 1.4,
                beta: 0.22,
                l0: 0.8,
            },
            c: 0.25,
            rate: 1.7,
            family: GainFamily::LogGain,
        };
        for space in [ResidualSpace::Relative, ResidualSpace::Log] {
            let points = CompressedPoints::new(&records, space);
            let direct: f64 = records
                .iter()
                .map(|r| {
                    let pred = eval_3d_raw(
                        &p,
                        r.model_params as f64,
                        r.pretrain_tokens as f64,
                        r.retrieval_tokens as f64,
                    );
                    let res = match space {
                        ResidualSpace::Relative => (pred - r.loss) / r.loss,
                        ResidualSpace::Log => pred.ln() - r.loss.ln(),
                    };
                    res * res
                })
                .sum();
            let got = points.sse_3d(&p);
            assert!(
                (got - direct).abs() <= 1e-12 * direct.max(1.0),
                "{got} vs {direct}"
            );

            let gain = GainObjective::new(&points, &p.base, p.family);
            let got2 = gain.sse(p.c, p.rate);
            assert!(
                (got2 - direct).abs() <= 1e-12 * direct.max(1.0),
                "{got2} vs {direct}"
            );
        }
    }

    #[test]
    fn unique_value_compression_counts() {
        let records = sample_records();
        let points = CompressedPoints::new(&records, ResidualSpace::Relative);
        assert_eq!(points.n_units.len(), 3);
        assert_eq!(points.d_units.len(), 3);
        assert_eq!(points.r_units.len(), 2);
        assert_eq!(points.len(), 18);
    }
}
