// SPDX-License-Identifier: Apache-2.0

//! Small statistical toolkit for the spike tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

use crate::error::{invalid, Result};

/// Exact two-sided Poisson p-value: total probability of counts no more likely
/// than `observed`.
pub fn poisson_two_sided_p(observed: u64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return if observed == 0 { 1.0 } else { 0.0 };
    }
    let pois = Poisson::new(mu).expect("mu > 0");
    let p_obs = pois.pmf(observed);
    let cut = p_obs * (1.0 + 1e-7);
    let hi = ((mu + 40.0 * mu.sqrt() + 50.0) as u64).max(observed + 1);
    let total: f64 = (0..=hi).map(|k| pois.pmf(k)).filter(|&p| p <= cut).sum();
    total.min(1.0)
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    let c = ChiSquared::new(dof).expect("dof > 0");
    (1.0 - c.cdf(statistic)).clamp(0.0, 1.0)
}

/// Two-sided normal p-value for a z-score.
pub fn normal_two_sided_p(z: f64) -> f64 {
    let n = Normal::standard();
    (2.0 * (1.0 - n.cdf(z.abs()))).clamp(0.0, 1.0)
}

/// Kolmogorov survival `Q_KS(x) = 2 sum (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * x * x).exp();
        sum += sign * term;
        if term <= 1e-10 * prev.abs().max(1e-300) || term < 1e-300 {
            break;
        }
        prev = term;
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic KS p-value with the usual small-sample correction.
pub fn ks_p_value(n: usize, d: f64) -> f64 {
    let en = (n as f64).sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

/// One-sample KS statistic of `samples` against a continuous `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i as f64 + 1.0) / n - f).abs().max((f - i as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// 95% Wilson interval.
pub fn wilson(successes: u64, trials: u64) -> Result<Proportion> {
    if trials == 0 {
        return Err(invalid("no trials"));
    }
    if successes > trials {
        return Err(invalid("more successes than trials"));
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let den = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    Ok(Proportion {
        successes,
        trials,
        estimate: p,
        ci_low: (centre - half).max(0.0),
        ci_high: (centre + half).min(1.0),
    })
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

/// Pearson correlation; zero when either side is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}
