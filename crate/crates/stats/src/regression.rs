//! Ordinary least squares with an intercept, solved through the SVD of the
//! column-equilibrated design.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Result, StatsError};

/// Designs whose equilibrated condition number exceeds this are rejected.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub iv_name: String,
    pub coefficient: f64,
    pub std_err: f64,
    pub t_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub intercept: CoefficientRow,
    /// One row per independent variable, in design column order.
    pub rows: Vec<CoefficientRow>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub df_model: usize,
    pub df_resid: usize,
    pub n: usize,
    /// Condition number of the intercept-augmented design after scaling every
    /// column to unit norm. Large values flag multicollinearity.
    pub condition_number: f64,
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn row(&self, iv_name: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.iv_name == iv_name)
    }
}

/// Fits `y = b0 + X b` by least squares.
///
/// `x` is n x k without the intercept column; `iv_names` labels its columns.
/// Requires `n >= k + 2` and a full-rank augmented design; collinear designs
/// are reported as `RankDeficient` rather than silently reduced.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64], iv_names: &[String]) -> Result<RegressionResult> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(StatsError::DimensionMismatch(format!(
            "design has {n} rows, response has {}",
            y.len()
        )));
    }
    if iv_names.len() != k {
        return Err(StatsError::DimensionMismatch(format!(
            "design has {k} columns, {} names given",
            iv_names.len()
        )));
    }
    if n < k + 2 {
        return Err(StatsError::TooFewObservations {
            rows: n,
            ivs: k,
            needed: k + 2,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite value in design or response".into()));
    }

    let mut design = DMatrix::from_element(n, k + 1, 1.0);
    design.view_mut((0, 1), (n, k)).copy_from(x);

    let scales: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    if scales.iter().any(|s| *s == 0.0) {
        return Err(StatsError::RankDeficient {
            condition_number: f64::INFINITY,
        });
    }
    let mut scaled = design.clone();
    for (mut col, s) in scaled.column_iter_mut().zip(&scales) {
        col /= *s;
    }

    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let s_max = sv.max();
    let s_min = sv.min();
    let condition_number = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(condition_number <= MAX_CONDITION_NUMBER) {
        return Err(StatsError::RankDeficient { condition_number });
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");

    let y_vec = DVector::from_column_slice(y);
    let uty = u.transpose() * &y_vec;
    let inv_sv = sv.map(|s| 1.0 / s);
    let beta_scaled = v_t.transpose() * uty.component_mul(&inv_sv);
    let beta: Vec<f64> = beta_scaled
        .iter()
        .zip(&scales)
        .map(|(b, s)| b / s)
        .collect();

    let fitted = &design * DVector::from_column_slice(&beta);
    let residuals: Vec<f64> = (&y_vec - fitted).iter().copied().collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    if sst == 0.0 {
        return Err(StatsError::DegenerateInput("response has zero variance".into()));
    }

    let df_model = k;
    let df_resid = n - k - 1;
    let sigma2 = ssr / df_resid as f64;

    // diag((X^T X)^-1) = diag(D^-1 V S^-2 V^T D^-1)
    let v = v_t.transpose();
    let inv_sv2 = sv.map(|s| 1.0 / (s * s));
    let t_dist = StudentsT::new(0.0, 1.0, df_resid as f64).expect("df_resid >= 1");
    let coefficient_row = |j: usize, name: String| {
        let var_scaled: f64 = v.row(j).iter().zip(inv_sv2.iter()).map(|(vj, w)| vj * vj * w).sum();
        let std_err = (sigma2 * var_scaled).sqrt() / scales[j];
        let t_value = beta[j] / std_err;
        let p_value = if t_value.is_nan() {
            1.0
        } else {
            (2.0 * t_dist.sf(t_value.abs())).min(1.0)
        };
        CoefficientRow {
            iv_name: name,
            coefficient: beta[j],
            std_err,
            t_value,
            p_value,
        }
    };

    let intercept = coefficient_row(0, "intercept".to_string());
    let rows = iv_names
        .iter()
        .enumerate()
        .map(|(i, name)| coefficient_row(i + 1, name.clone()))
        .collect();

    let r_squared = (1.0 - ssr / sst).clamp(0.0, 1.0);
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_resid as f64;
    let f_statistic = (r_squared / df_model as f64) / ((1.0 - r_squared) / df_resid as f64);
    let f_p_value = if df_model == 0 || f_statistic.is_nan() {
        1.0
    } else {
        FisherSnedecor::new(df_model as f64, df_resid as f64)
            .expect("positive df")
            .sf(f_statistic)
    };

    Ok(RegressionResult {
        intercept,
        rows,
        r_squared,
        adj_r_squared,
        f_statistic,
        f_p_value,
        df_model,
        df_resid,
        n,
        condition_number,
        residuals,
    })
}
