//! Small statistics helpers for comparing simulated strategies.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    /// One-sided p-value for `mean(a - b) < 0`.
    pub p_less: f64,
}

/// Paired t-test on `a[k] - b[k]`. With zero variance the p-value is 0 or 1
/// according to the sign of the mean difference (0.5 when it is exactly 0).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples need equal lengths");
    let n = a.len();
    assert!(n >= 2, "paired t-test needs at least two pairs");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    if se == 0.0 {
        let p_less = if mean < 0.0 {
            0.0
        } else if mean > 0.0 {
            1.0
        } else {
            0.5
        };
        return PairedTest {
            mean_diff: mean,
            t: mean.signum() * f64::INFINITY,
            p_less,
        };
    }
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    PairedTest {
        mean_diff: mean,
        t,
        p_less: dist.cdf(t),
    }
}
