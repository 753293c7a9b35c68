use crate::error::{Error, Result};

fn check(truth: &[f64], est: &[f64]) -> Result<()> {
    if truth.len() != est.len() {
        return Err(Error::Metric(format!(
            "{} true values but {} estimates",
            truth.len(),
            est.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Metric("no values to score".into()));
    }
    Ok(())
}

fn abs_error_sum(truth: &[f64], est: &[f64]) -> f64 {
    truth.iter().zip(est).map(|(t, e)| (t - e).abs()).sum()
}

/// Mean absolute error.
pub fn mae(truth: &[f64], est: &[f64]) -> Result<f64> {
    check(truth, est)?;
    Ok(abs_error_sum(truth, est) / truth.len() as f64)
}

/// Sum of absolute errors over the (signed) sum of true values.
pub fn mre(truth: &[f64], est: &[f64]) -> Result<f64> {
    check(truth, est)?;
    let denom: f64 = truth.iter().sum();
    if denom == 0.0 {
        return Err(Error::Metric("true values sum to zero; relative error undefined".into()));
    }
    Ok(abs_error_sum(truth, est) / denom)
}
