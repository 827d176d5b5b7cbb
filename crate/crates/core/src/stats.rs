//! Estimators with standard errors and the two-sample tests used by the
//! verifier.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Result<Estimate> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Estimate { mean, std_error, n })
    }

    pub fn exact(value: f64) -> Estimate {
        Estimate {
            mean: value,
            std_error: 0.0,
            n: 0,
        }
    }

    /// `|mean - value| / std_error`; zero when both coincide exactly.
    pub fn z_against(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.0 {
        // The alternating series converges slowly here; use the dual form
        // sqrt(2 pi)/l sum exp(-(2k-1)^2 pi^2 / (8 l^2)).
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=8)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (c * j * j).exp()
            })
            .sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if (k as u64) % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction of the effective size). Ties are
/// handled by stepping over equal values jointly; `-inf` is allowed.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().chain(ys).any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("NaN in KS sample".into()));
    }
    let a = sorted(xs);
    let b = sorted(ys);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let sq = ne.sqrt();
    let p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult { statistic: d, p_value })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let a = sorted(xs);
    let n = a.len() as f64;
    let d = a.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    });
    let sq = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d),
    })
}

/// `|mean_a - mean_b| / sqrt(se_a^2 + se_b^2)`.
pub fn z_test(a: &Estimate, b: &Estimate) -> f64 {
    let d = (a.mean - b.mean).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
}

/// Two-sided normal p-value of a z-score.
pub fn z_p_value(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    (2.0 * n.sf(z.abs())).min(1.0)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

pub fn normal_sf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sf(x)
}

/// Total variation distance `1/2 sum |p_k - q_k|` between two histograms,
/// each normalized to total mass one first.
pub fn tv_distance(hist_a: &[f64], hist_b: &[f64]) -> Result<f64> {
    let sa: f64 = hist_a.iter().sum();
    let sb: f64 = hist_b.iter().sum();
    if sa <= 0.0 || sb <= 0.0 {
        return Err(Error::EmptySample);
    }
    let len = hist_a.len().max(hist_b.len());
    let get = |h: &[f64], k: usize| h.get(k).copied().unwrap_or(0.0);
    Ok(0.5
        * (0..len)
            .map(|k| (get(hist_a, k) / sa - get(hist_b, k) / sb).abs())
            .sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).unwrap().sf(x)
}

/// Chi-square test of homogeneity for two count histograms over the same
/// bins. Bins are pooled from the top until each pooled bin holds at least
/// ten observations in total.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareResult> {
    let len = a.len().max(b.len());
    let get = |h: &[u64], k: usize| h.get(k).copied().unwrap_or(0) as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for k in (0..len).rev() {
        acc.0 += get(a, k);
        acc.1 += get(b, k);
        if acc.0 + acc.1 >= 10.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }
    let na: f64 = bins.iter().map(|b| b.0).sum();
    let nb: f64 = bins.iter().map(|b| b.1).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::EmptySample);
    }
    let total = na + nb;
    let statistic = bins
        .iter()
        .map(|&(oa, ob)| {
            let col = oa + ob;
            let ea = col * na / total;
            let eb = col * nb / total;
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum::<f64>();
    let dof = bins.len().saturating_sub(1);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

/// Chi-square goodness of fit of observed counts to cell probabilities.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::InvalidArgument("histogram size mismatch".into()));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let statistic = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum::<f64>();
    let dof = observed.len() - 1;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

/// Bins non-negative integers into a histogram with an overflow bin at
/// `cap`.
pub fn count_histogram(values: impl IntoIterator<Item = usize>, cap: usize) -> Vec<u64> {
    let mut h = vec![0u64; cap + 1];
    for v in values {
        h[v.min(cap)] += 1;
    }
    h
}
