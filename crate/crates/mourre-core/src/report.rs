//! Sweep records, verdicts and the log-log slope proxies used for integrability decisions.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// One tabulated sweep. `axis_values` is strictly monotone.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRecord {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub values: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl SweepRecord {
    pub fn new(axis_name: &str, axis_values: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if axis_values.len() != values.len() {
            return Err(Error::InvalidParameter("axis and values differ in length".into()));
        }
        if !strictly_monotone(&axis_values) {
            return Err(Error::InvalidParameter("axis values must be strictly monotone".into()));
        }
        Ok(SweepRecord { axis_name: axis_name.into(), axis_values, values, metadata: BTreeMap::new() })
    }

    pub fn with_meta(mut self, key: &str, value: String) -> Self {
        self.metadata.insert(key.into(), value);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

/// Least-squares line with a 95% confidence interval on the slope.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub points: usize,
}

/// Two-sided 97.5% Student t quantile.
pub fn t975(df: usize) -> f64 {
    const T: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= 30 {
        T[df - 1]
    } else {
        1.96 + 2.4 / df as f64
    }
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (se, half) = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| { let e = b - intercept - slope * a; e * e }).sum();
        let se = libm::sqrt(rss / (n - 2) as f64 / sxx);
        (se, t975(n - 2) * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Some(LineFit { slope, intercept, slope_se: se, ci_lo: slope - half, ci_hi: slope + half, points: n })
}

/// Fit `log y` against `log x`, ignoring nonpositive samples.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (libm::log(*a), libm::log(*b)))
        .unzip();
    line_fit(&lx, &ly)
}

/// Indices of the last decade of a schedule, measured toward `toward_large` (true: the decade
/// ending at the largest axis value; false: the decade starting at the smallest).
pub fn last_decade(axis: &[f64], toward_large: bool) -> Vec<usize> {
    let positive: Vec<f64> = axis.iter().cloned().filter(|a| *a > 0.0).collect();
    if positive.is_empty() {
        return Vec::new();
    }
    let hi = positive.iter().cloned().fold(f64::MIN, f64::max);
    let lo = positive.iter().cloned().fold(f64::MAX, f64::min);
    axis.iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0 && if toward_large { a >= hi / 10.0 * (1.0 - 1e-12) } else { a <= lo * 10.0 * (1.0 + 1e-12) })
        .map(|(i, _)| i)
        .collect()
}

/// Decision from a slope fit: satisfied when the whole 95% interval lies below `threshold`,
/// violated when it lies at or above, otherwise inconclusive. An identically zero profile counts as
/// satisfied.
pub fn slope_below(values: &[f64], fit: Option<LineFit>, threshold: f64) -> Verdict {
    if values.iter().all(|v| *v == 0.0) {
        return Verdict::Satisfied;
    }
    match fit {
        Some(f) if f.ci_hi < threshold => Verdict::Satisfied,
        Some(f) if f.ci_lo >= threshold => Verdict::Violated,
        _ => Verdict::Inconclusive,
    }
}

/// Mirror of [`slope_below`] for conditions of the form `slope > threshold`.
pub fn slope_above(values: &[f64], fit: Option<LineFit>, threshold: f64) -> Verdict {
    if values.iter().all(|v| *v == 0.0) {
        return Verdict::Satisfied;
    }
    match fit {
        Some(f) if f.ci_lo > threshold => Verdict::Satisfied,
        Some(f) if f.ci_hi <= threshold => Verdict::Violated,
        _ => Verdict::Inconclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_slope() {
        let x: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|a| 3.0 * libm::pow(*a, -2.5)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope + 2.5).abs() < 1e-12);
        assert_eq!(slope_below(&y, Some(f), -1.0), Verdict::Satisfied);
    }

    #[test]
    fn decade_selection() {
        let x = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
        assert_eq!(last_decade(&x, true), [3, 4, 5, 6]);
        assert_eq!(last_decade(&x, false), [0, 1, 2, 3]);
    }

    #[test]
    fn rejects_non_monotone_axis() {
        assert!(SweepRecord::new("r", [1.0, 1.0].to_vec(), [0.0, 0.0].to_vec()).is_err());
    }
}
