use serde::{Deserialize, Serialize};

use crate::branching::MeasureSampler;
use crate::error::{Error, Result};
use crate::rng::{try_replicate, StreamKey};
use crate::sdppp::g_curve;
use crate::stats::{z_test, Estimate};
use crate::test_function::TestFunction;

/// `T` with `g(-T) = f0`, by linear interpolation of `g` on an increasing
/// grid `xs` where it is non-increasing.
pub fn fit_t_phi(f0: f64, xs: &[f64], g: &[f64]) -> Result<f64> {
    if xs.len() != g.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("grid and values must match, length >= 2".into()));
    }
    if g.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::NonMonotone("g grid is not non-increasing".into()));
    }
    let (hi, lo) = (g[0], g[g.len() - 1]);
    if !(f0 <= hi && f0 >= lo) {
        return Err(Error::OutOfRange { value: f0, lo, hi });
    }
    let k = g.partition_point(|&v| v > f0);
    if k == 0 {
        return Ok(-xs[0]);
    }
    let (x0, x1, g0, g1) = (xs[k - 1], xs[k], g[k - 1], g[k]);
    let x = if g0 == g1 {
        x0
    } else {
        x0 + (g0 - f0) / (g0 - g1) * (x1 - x0)
    };
    Ok(-x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapePoint {
    pub x: f64,
    pub laplace: Estimate,
    pub g_shifted: Estimate,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub function_id: String,
    pub t_phi: f64,
    pub points: Vec<ShapePoint>,
    pub max_abs_z: f64,
}

/// Compares `F(x) = E exp(-<tau_x E, phi>)` with `g(x - T)` on `xs`, where
/// `g` comes from the shift draws and `T` is fitted from `F(0)`.
pub fn translation_shape_test(
    target: &MeasureSampler,
    phi: &TestFunction,
    shifts: &[f64],
    alpha: f64,
    xs: &[f64],
    reps: usize,
    key: StreamKey,
) -> Result<ShapeReport> {
    let lowest = xs.iter().map(|x| phi.left_edge() - x).fold(phi.left_edge(), f64::min);
    if target.declared_floor() > lowest {
        return Err(Error::Truncation {
            needed: lowest,
            floor: target.declared_floor(),
        });
    }
    let mut points: Vec<f64> = xs.to_vec();
    points.push(0.0);
    let rows = try_replicate(key, reps, |_, rng| {
        let d = target.sample(rng)?;
        points
            .iter()
            .map(|&x| Ok((-d.integrate(&phi.shifted(x))?).exp()))
            .collect::<Result<Vec<f64>>>()
    })?;
    let column = |k: usize| Estimate::from_samples(&rows.iter().map(|r| r[k]).collect::<Vec<f64>>());
    let f0 = column(xs.len())?;
    // A fine g grid wide enough to invert any attainable Laplace value.
    let grid: Vec<f64> = (0..=1200).map(|i| -30.0 + 0.05 * i as f64).collect();
    let g: Vec<f64> = g_curve(shifts, alpha, &grid)?.iter().map(|e| e.mean).collect();
    let t_phi = fit_t_phi(f0.mean, &grid, &g)?;
    let shifted: Vec<f64> = xs.iter().map(|x| x - t_phi).collect();
    let g_at = g_curve(shifts, alpha, &shifted)?;
    let mut out = Vec::with_capacity(xs.len());
    for (k, &x) in xs.iter().enumerate() {
        let laplace = column(k)?;
        let z = z_test(&laplace, &g_at[k]);
        out.push(ShapePoint {
            x,
            laplace,
            g_shifted: g_at[k],
            z,
        });
    }
    Ok(ShapeReport {
        function_id: phi.id(),
        t_phi,
        max_abs_z: out.iter().map(|p| p.z).fold(0.0, f64::max),
        points: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_at_nodes() {
        let xs: Vec<f64> = (-5..=5).map(f64::from).collect();
        let g: Vec<f64> = xs.iter().map(|x: &f64| (-x.exp()).exp()).collect();
        let at0 = g[5];
        let at1 = g[6];
        assert!(fit_t_phi(at0, &xs, &g).unwrap().abs() < 1e-12);
        assert!((fit_t_phi(at1, &xs, &g).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn outside_range_rejected() {
        let xs = [0.0, 1.0];
        let g = [0.8, 0.3];
        assert!(matches!(fit_t_phi(0.9, &xs, &g), Err(Error::OutOfRange { .. })));
    }
}
