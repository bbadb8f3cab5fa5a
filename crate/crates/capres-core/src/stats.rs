//! Small statistics utilities for the experiment harness: sample moments and
//! Welch's unequal-variance t-test.

use statrs::function::beta::beta_reg;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n-1) standard deviation; zero for fewer than two points.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

/// Two-sided Welch t-test p-value with Welch-Satterthwaite degrees of
/// freedom. The tail is evaluated through the regularized incomplete beta,
/// p = I_{df/(df+t^2)}(df/2, 1/2), which stays accurate for extreme t.
///
/// Degenerate samples follow the documented conventions: two constant,
/// equal samples give p = 1; two constant, different samples give p = 0.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> f64 {
    assert!(a.len() >= 2 && b.len() >= 2, "each sample needs at least two points");
    let (ma, mb) = (mean(a), mean(b));
    let va = sample_std(a).powi(2);
    let vb = sample_std(b).powi(2);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return if ma == mb { 1.0 } else { 0.0 };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}
