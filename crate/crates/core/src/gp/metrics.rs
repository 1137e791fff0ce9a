use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Metrics {
    pub rmse: f64,
    /// Mean Gaussian NLL of the truth under the predictive `N(mean, variance + noise)`.
    pub mean_test_nll: f64,
}

pub fn metrics(mean: &[f64], truth: &[f64], variance: &[f64], noise: f64) -> Result<Metrics> {
    let n = mean.len();
    if truth.len() != n || variance.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if truth.len() != n { truth.len() } else { variance.len() },
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("no test points".into()));
    }
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut se = 0.0;
    let mut nll = 0.0;
    for i in 0..n {
        let r = truth[i] - mean[i];
        let s2 = variance[i] + noise;
        if !(s2 > 0.0) {
            return Err(Error::InvalidParameter(format!("predictive variance {s2} at point {i} is not positive")));
        }
        se += r * r;
        nll += 0.5 * (r * r / s2 + s2.ln() + ln2pi);
    }
    Ok(Metrics {
        rmse: (se / n as f64).sqrt(),
        mean_test_nll: nll / n as f64,
    })
}
