//! Comparison of two coefficients through the Fisher z-transform.
//!
//! The reports apply this to OLS coefficients treated as correlations, which
//! is only meaningful when those coefficients are standardized and lie inside
//! (-1, 1). Anything outside that interval is rejected.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherComparison {
    pub r1: f64,
    pub n1: usize,
    pub r2: f64,
    pub n2: usize,
    pub z_stat: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

pub fn fisher_compare(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<FisherComparison> {
    for r in [r1, r2] {
        if !(r.abs() < 1.0) {
            return Err(StatsError::CoefficientOutOfRange { value: r });
        }
    }
    for n in [n1, n2] {
        if n <= 3 {
            return Err(StatsError::SampleSizeTooSmall { value: n });
        }
    }

    let se = (1.0 / (n1 - 3) as f64 + 1.0 / (n2 - 3) as f64).sqrt();
    let z_stat = (r1.atanh() - r2.atanh()) / se;
    let p_value = (2.0 * Normal::standard().sf(z_stat.abs())).min(1.0);

    Ok(FisherComparison {
        r1,
        n1,
        r2,
        n2,
        z_stat,
        p_value,
        stars: significance_stars(p_value),
    })
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05, otherwise empty.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}
