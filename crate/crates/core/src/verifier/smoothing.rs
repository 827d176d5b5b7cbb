use serde::{Deserialize, Serialize};

use crate::branching::MeasureSampler;
use crate::error::{Error, Result};
use crate::rng::{try_replicate, StreamKey};

/// A non-increasing `[0, 1]`-valued function on `(0, inf)` known at grid
/// nodes, interpolated linearly in `ln t`, equal to 1 left of the grid and
/// to its last value right of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridFunction {
    t: Vec<f64>,
    values: Vec<f64>,
    log_t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    t: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawGrid> for GridFunction {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridFunction::new(raw.t, raw.values)
    }
}

impl From<GridFunction> for RawGrid {
    fn from(f: GridFunction) -> Self {
        RawGrid {
            t: f.t,
            values: f.values,
        }
    }
}

const MONOTONE_SLACK: f64 = 1e-12;

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl GridFunction {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t.len() != values.len() || t.len() < 2 {
            return Err(Error::InvalidArgument("grid and values must match, length >= 2".into()));
        }
        if !(t[0] > 0.0) || t.windows(2).any(|w| !(w[1] > w[0])) || !t[t.len() - 1].is_finite() {
            return Err(Error::InvalidArgument("grid must be positive and increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::NonMonotone(format!("value {v} outside [0, 1]")));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] > w[0] + MONOTONE_SLACK) {
            return Err(Error::NonMonotone(format!("increases from {} to {}", w[0], w[1])));
        }
        let log_t = t.iter().map(|x| x.ln()).collect();
        Ok(GridFunction { t, values, log_t })
    }

    pub fn from_fn(t: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = t.iter().map(|&x| f(x)).collect();
        GridFunction::new(t, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The node in the middle of the grid.
    pub fn midpoint(&self) -> f64 {
        self.t[self.t.len() / 2]
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_log(t.ln())
    }

    #[inline]
    fn eval_log(&self, lt: f64) -> f64 {
        let n = self.log_t.len();
        if lt < self.log_t[0] {
            return 1.0;
        }
        if lt >= self.log_t[n - 1] {
            return self.values[n - 1];
        }
        let k = self.log_t.partition_point(|&x| x <= lt) - 1;
        let w = (lt - self.log_t[k]) / (self.log_t[k + 1] - self.log_t[k]);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.t
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| (v - other.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRun {
    pub result: GridFunction,
    /// `sup |f_{k+1} - f_k|` over the grid, one entry per iteration.
    pub residuals: Vec<f64>,
}

/// Iterates `f -> E prod_j f(t e^{z_j})` with the expectation replaced by
/// an average over `mc_reps` offspring draws. The same draws serve every
/// node and every iteration, so the iteration applies one fixed empirical
/// operator and the residuals are not masked by fresh sampling noise.
pub fn smoothing_iterate(
    offspring: &MeasureSampler,
    f0: &GridFunction,
    iterations: usize,
    mc_reps: usize,
    key: StreamKey,
) -> Result<SmoothingRun> {
    if mc_reps == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let draws: Vec<Vec<f64>> = try_replicate(key, mc_reps, |_, rng| Ok(offspring.sample(rng)?.into_atoms()))?;
    let mut current = f0.clone();
    let mut residuals = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let values: Vec<f64> = current
            .log_t
            .iter()
            .map(|&lt| {
                draws
                    .iter()
                    .map(|z| z.iter().map(|zj| current.eval_log(lt + zj)).product::<f64>())
                    .sum::<f64>()
                    / mc_reps as f64
            })
            .collect();
        let next = GridFunction::new(current.t.clone(), values)?;
        residuals.push(next.sup_distance(&current));
        current = next;
    }
    Ok(SmoothingRun {
        result: current,
        residuals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFit {
    pub h: f64,
    pub t0: f64,
    /// `sup_t |f(t) - E exp(-h S t^alpha)|` over the grid.
    pub sup_distance: f64,
}

fn shift_laplace(shifts: &[f64], u: f64) -> f64 {
    shifts.iter().map(|s| (-u * s).exp()).sum::<f64>() / shifts.len() as f64
}

/// Matches `E exp(-h S t0^alpha) = f(t0)` at the grid midpoint `t0` only,
/// then measures the distance to `t -> E exp(-h S t^alpha)` on the whole
/// grid.
pub fn fit_shift_family(f: &GridFunction, alpha: f64, shifts: &[f64]) -> Result<SmoothingFit> {
    if shifts.is_empty() {
        return Err(Error::EmptySample);
    }
    let t0 = f.midpoint();
    let target = f.eval(t0);
    let p_zero = shifts.iter().filter(|&&s| s == 0.0).count() as f64 / shifts.len() as f64;
    if !(target > p_zero && target < 1.0) {
        return Err(Error::OutOfRange {
            value: target,
            lo: p_zero,
            hi: 1.0,
        });
    }
    let scale = t0.powf(alpha);
    let (mut lo, mut hi) = ((1e-12f64).ln(), (1e12f64).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shift_laplace(shifts, mid.exp() * scale) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = (0.5 * (lo + hi)).exp();
    let sup_distance =
        f.t.iter()
            .zip(&f.values)
            .map(|(&t, v)| (v - shift_laplace(shifts, h * t.powf(alpha))).abs())
            .fold(0.0, f64::max);
    Ok(SmoothingFit { h, t0, sup_distance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reproduction::ReproductionLaw;

    fn grid() -> Vec<f64> {
        log_spaced(1e-4, 1e4, 81)
    }

    #[test]
    fn grid_midpoint_is_one() {
        let f = GridFunction::from_fn(grid(), |t| (-t).exp()).unwrap();
        assert!((f.midpoint() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_and_clamps() {
        let f = GridFunction::new(vec![1.0, std::f64::consts::E], vec![0.8, 0.4]).unwrap();
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(10.0), 0.4);
        assert!((f.eval(std::f64::consts::E.sqrt()) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(matches!(
            GridFunction::new(vec![1.0, 2.0], vec![0.5, 0.6]),
            Err(Error::NonMonotone(_))
        ));
    }

    #[test]
    fn constant_one_is_fixed() {
        let law = ReproductionLaw::BinaryGaussian { mu: -1.0, sigma: 1.0 };
        let f0 = GridFunction::from_fn(grid(), |_| 1.0).unwrap();
        let run = smoothing_iterate(&MeasureSampler::offspring(law), &f0, 3, 100, StreamKey::new(0)).unwrap();
        assert!(run.residuals.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn single_child_at_origin_fixes_everything() {
        let f0 = GridFunction::from_fn(grid(), |t| (-t).exp()).unwrap();
        let run = smoothing_iterate(&MeasureSampler::dirac(0.0), &f0, 3, 10, StreamKey::new(0)).unwrap();
        assert!(run.residuals.iter().all(|&r| r < 1e-15));
    }

    #[test]
    fn fit_recovers_scale_of_constant_shift() {
        let f = GridFunction::from_fn(grid(), |t| (-2.0 * t).exp()).unwrap();
        let fit = fit_shift_family(&f, 1.0, &[1.0]).unwrap();
        assert!((fit.h - 2.0).abs() < 1e-9);
        assert!(fit.sup_distance < 1e-12);
    }
}
