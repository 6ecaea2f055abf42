use super::MathError;

/// Central-difference gradient of `f` at `theta`.
///
/// `f` is called twice per coordinate with a single coordinate moved by
/// `±step`; `step` must be positive and finite. Non-finite function
/// values are reported as numeric errors instead of polluting the
/// estimate.
pub fn central_diff_gradient<F>(
    mut f: F,
    theta: &[f64],
    step: f64,
) -> Result<Vec<f64>, MathError>
where
    F: FnMut(&[f64]) -> Result<f64, MathError>,
{
    if !step.is_finite() || step <= 0.0 {
        return Err(MathError::domain(
            "central_diff_gradient",
            format!("step must be positive and finite, got {step}"),
        ));
    }
    let mut work = theta.to_vec();
    let mut grad = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        work[i] = theta[i] + step;
        let fp = f(&work)?;
        work[i] = theta[i] - step;
        let fm = f(&work)?;
        work[i] = theta[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(MathError::NonFinite {
                op: "central_diff_gradient",
            });
        }
        grad[i] = (fp - fm) / (2.0 * step);
    }
    Ok(grad)
}

/// Worst-case relative disagreement between an analytic gradient and a
/// central-difference probe of `f`:
///
/// `max_i |ad_i - fd_i| / max(1, |ad_i|, |fd_i|)`
///
/// The `max(1, ...)` floor makes the measure absolute near zero and
/// relative for large gradients.
pub fn finite_diff_check<F>(
    f: F,
    theta: &[f64],
    grad_ad: &[f64],
    step: f64,
) -> Result<f64, MathError>
where
    F: FnMut(&[f64]) -> Result<f64, MathError>,
{
    if theta.len() != grad_ad.len() {
        return Err(MathError::ShapeMismatch {
            op: "finite_diff_check",
            left: vec![theta.len()],
            right: vec![grad_ad.len()],
        });
    }
    let fd = central_diff_gradient(f, theta, step)?;
    let mut worst = 0.0f64;
    for (ad, fd) in grad_ad.iter().zip(&fd) {
        let denom = 1.0f64.max(ad.abs()).max(fd.abs());
        worst = worst.max((ad - fd).abs() / denom);
    }
    Ok(worst)
}
