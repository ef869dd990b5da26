use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

/// Two-sided p-value of a t statistic: `I_{df/(df+t^2)}(df/2, 1/2)`.
///
/// Returns NaN for NaN input and 0 for infinite `t`.
pub fn student_t_pvalue(t: f64, df: u64) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    let d = df as f64;
    let x = d / (d + t * t);
    beta_reg(0.5 * d, 0.5, x).clamp(0.0, 1.0)
}

/// Upper `prob` quantile of `t(df)`, e.g. `prob = 0.975` for a 95% interval.
pub fn student_t_quantile(prob: f64, df: u64) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    assert!(prob > 0.0 && prob < 1.0, "probability must lie in (0, 1)");
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
    let q = dist.inverse_cdf(prob);
    // Polish with Newton steps on the two-sided p-value.
    polish_quantile(q, prob, df)
}

fn polish_quantile(mut q: f64, prob: f64, df: u64) -> f64 {
    let target = 2.0 * (1.0 - prob).min(prob);
    let sign = if prob >= 0.5 { 1.0 } else { -1.0 };
    q = q.abs();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
    for _ in 0..4 {
        use statrs::distribution::Continuous;
        let f = student_t_pvalue(q, df) - target;
        let dens = 2.0 * dist.pdf(q);
        if dens <= 0.0 || !dens.is_finite() {
            break;
        }
        let step = f / dens;
        q += step;
        if step.abs() <= 1e-14 * q.abs().max(1.0) {
            break;
        }
    }
    sign * q
}
