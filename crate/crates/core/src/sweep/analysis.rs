use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::record::{ExperimentRecord, RecordKey};
use crate::error::{Error, Result};

/// Seed statistics of one configuration. Means cover successful runs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub family: String,
    pub communities: usize,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
    pub width: usize,
    pub rounds: usize,
    pub n_seeds: usize,
    pub n_failed: usize,
    pub mean_top1: Option<f64>,
    /// Sample standard deviation; needs two successful seeds.
    pub std_top1: Option<f64>,
    pub nodes_realized: Option<f64>,
    pub bridges: Option<f64>,
    pub mean_degree: Option<f64>,
    pub clustering: Option<f64>,
    pub avg_path_len: Option<f64>,
    pub modularity: Option<f64>,
    pub cross_density: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mu = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Groups records by every configuration field except the seed. Output is
/// sorted by configuration and does not depend on input order.
pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<RecordKey, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let key = RecordKey { seed: 0, ..r.key() };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_values()
        .map(|mut rows| {
            // Fixed summation order regardless of input order.
            rows.sort_by(|a, b| {
                a.seed
                    .cmp(&b.seed)
                    .then_with(|| a.status.cmp(&b.status))
                    .then_with(|| {
                        let t = |r: &ExperimentRecord| r.top1_error.unwrap_or(f64::NAN);
                        t(a).total_cmp(&t(b))
                    })
            });
            let ok: Vec<&ExperimentRecord> = rows.iter().copied().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&ExperimentRecord) -> Option<f64>| -> Option<f64> {
                mean(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            let top1: Vec<f64> = ok.iter().filter_map(|r| r.top1_error).collect();
            let first = rows[0];
            AggregateRow {
                family: first.family.clone(),
                communities: first.communities,
                p: first.p,
                gamma: first.gamma,
                m: first.m,
                mu: first.mu,
                width: first.width,
                rounds: first.rounds,
                n_seeds: rows.len(),
                n_failed: rows.len() - ok.len(),
                mean_top1: mean(&top1),
                std_top1: sample_std(&top1),
                nodes_realized: col(|r| r.nodes_realized.map(|v| v as f64)),
                bridges: col(|r| r.bridges.map(|v| v as f64)),
                mean_degree: col(|r| r.mean_degree),
                clustering: col(|r| r.clustering),
                avg_path_len: col(|r| r.avg_path_len),
                modularity: col(|r| r.modularity),
                cross_density: col(|r| r.cross_density),
            }
        })
        .collect()
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

/// Quantity plotted against top-1 error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XField {
    P,
    Gamma,
    M,
    Mu,
    Communities,
    MeanDegree,
    Clustering,
    AvgPathLen,
    Modularity,
    CrossDensity,
}

impl XField {
    pub const ALL: [XField; 10] = [
        XField::P,
        XField::Gamma,
        XField::M,
        XField::Mu,
        XField::Communities,
        XField::MeanDegree,
        XField::Clustering,
        XField::AvgPathLen,
        XField::Modularity,
        XField::CrossDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            XField::P => "p",
            XField::Gamma => "gamma",
            XField::M => "m",
            XField::Mu => "mu",
            XField::Communities => "communities",
            XField::MeanDegree => "mean_degree",
            XField::Clustering => "clustering",
            XField::AvgPathLen => "avg_path_len",
            XField::Modularity => "modularity",
            XField::CrossDensity => "cross_density",
        }
    }

    fn of(self, row: &AggregateRow) -> Option<f64> {
        match self {
            XField::P => row.p,
            XField::Gamma => row.gamma,
            XField::M => row.m,
            XField::Mu => row.mu,
            XField::Communities => Some(row.communities as f64),
            XField::MeanDegree => row.mean_degree,
            XField::Clustering => row.clustering,
            XField::AvgPathLen => row.avg_path_len,
            XField::Modularity => row.modularity,
            XField::CrossDensity => row.cross_density,
        }
    }
}

impl std::str::FromStr for XField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        XField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = XField::ALL.iter().map(|f| f.name()).collect();
                Error::Config(format!("unknown field {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// `y = a·x² + b·x + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x * x + self.b * x + self.c
    }

    /// Location of the extremum, if the fit is curved.
    pub fn vertex(&self) -> Option<f64> {
        (self.a != 0.0).then(|| -self.b / (2.0 * self.a))
    }
}

/// Least-squares parabola through `(x, y)` points via the normal equations.
/// The abscissa is standardized before solving and the coefficients mapped
/// back, which keeps the 3x3 system well conditioned.
#[allow(clippy::needless_range_loop)] // row-reduction reads clearer with indices
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<QuadraticFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "a quadratic needs at least 3 distinct x values, got {}",
            distinct.len()
        )));
    }
    if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite point".into()));
    }
    let n = points.len() as f64;
    let center = points.iter().map(|p| p.0).sum::<f64>() / n;
    let scale = (points.iter().map(|p| (p.0 - center).powi(2)).sum::<f64>() / n).sqrt();

    let mut m = [[0f64; 4]; 3];
    for &(x, y) in points {
        let t = (x - center) / scale;
        let pows = [1.0, t, t * t];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += pows[i] * pows[j];
            }
            m[i][3] += pows[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap_or(col);
        m.swap(col, pivot);
        if m[col][col].abs() < 1e-12 * n {
            return Err(Error::Fit("normal equations are rank-deficient".into()));
        }
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut coef = [0f64; 3];
    for i in (0..3).rev() {
        let tail: f64 = (i + 1..3).map(|k| m[i][k] * coef[k]).sum();
        coef[i] = (m[i][3] - tail) / m[i][i];
    }
    // coef is (constant, linear, quadratic) in the standardized variable.
    let [k0, k1, k2] = coef;
    let (mu, s) = (center, scale);
    Ok(QuadraticFit {
        a: k2 / (s * s),
        b: k1 / s - 2.0 * k2 * mu / (s * s),
        c: k0 - k1 * mu / s + k2 * mu * mu / (s * s),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub x_field: String,
    /// `(x, mean top-1 error)` per configuration, sorted by x.
    pub points: Vec<(f64, f64)>,
    pub fit: QuadraticFit,
    /// `None` when every mean error is identical.
    pub r_squared: Option<f64>,
}

/// Seed-averaged top-1 error against `x` with a quadratic fit. Configurations
/// without a successful seed or without a value for `x` are skipped.
pub fn correlation_report(records: &[ExperimentRecord], x: XField) -> Result<CorrelationReport> {
    let mut points: Vec<(f64, f64)> = aggregate(records)
        .iter()
        .filter_map(|row| Some((x.of(row)?, row.mean_top1?)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let fit = fit_quadratic(&points)?;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - fit.eval(p.0)).powi(2)).sum();
    Ok(CorrelationReport {
        x_field: x.name().into(),
        points,
        fit,
        r_squared: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    })
}
