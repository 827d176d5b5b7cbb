use serde::{Deserialize, Serialize};

use crate::branching::MeasureSampler;
use crate::error::{Error, Result};
use crate::rng::{try_replicate, StreamKey};
use crate::sdppp::DecorationLaw;
use crate::stats::Estimate;
use crate::test_function::TestFunction;

pub const MIN_LAPLACE_REPS: usize = 1000;

/// Estimate of `E exp(-<E, phi>)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
    pub function_id: String,
    pub sampler_id: String,
}

impl LaplaceEstimate {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            std_error: self.std_error,
            n: self.reps,
        }
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_LAPLACE_REPS {
        return Err(Error::InsufficientSamples {
            needed: MIN_LAPLACE_REPS,
            got: reps,
        });
    }
    Ok(())
}

pub fn laplace_functional(
    sampler: &MeasureSampler,
    phi: &TestFunction,
    reps: usize,
    key: StreamKey,
) -> Result<LaplaceEstimate> {
    Ok(laplace_battery(sampler, std::slice::from_ref(phi), reps, key)?.remove(0))
}

/// Laplace estimates for several functions from common draws.
pub fn laplace_battery(
    sampler: &MeasureSampler,
    battery: &[TestFunction],
    reps: usize,
    key: StreamKey,
) -> Result<Vec<LaplaceEstimate>> {
    check_reps(reps)?;
    let lowest = battery
        .iter()
        .map(TestFunction::left_edge)
        .fold(f64::INFINITY, f64::min);
    if sampler.declared_floor() > lowest {
        return Err(Error::Truncation {
            needed: lowest,
            floor: sampler.declared_floor(),
        });
    }
    let rows = try_replicate(key, reps, |_, rng| {
        let d = sampler.sample(rng)?;
        battery
            .iter()
            .map(|phi| Ok((-d.integrate(phi)?).exp()))
            .collect::<Result<Vec<f64>>>()
    })?;
    battery
        .iter()
        .enumerate()
        .map(|(k, phi)| {
            let column: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let e = Estimate::from_samples(&column)?;
            Ok(LaplaceEstimate {
                mean: e.mean,
                std_error: e.std_error,
                reps,
                function_id: phi.id(),
                sampler_id: sampler.description().to_string(),
            })
        })
        .collect()
}

/// Accuracy settings for [`sdppp_laplace_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Absolute agreement required between successive node doublings.
    pub tolerance: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
    /// Draws per node for sampled decorations; mixtures are exact.
    pub decoration_reps: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            tolerance: 1e-6,
            initial_panels: 64,
            max_panels: 1 << 20,
            decoration_reps: 10_000,
        }
    }
}

/// Composite trapezoid rule on `[lo, hi]` with node doubling until two
/// successive values agree to `tolerance`.
pub(crate) fn trapezoid(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    initial: usize,
    max: usize,
    tolerance: f64,
) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mut n = initial.max(1);
    let mut h = (hi - lo) / n as f64;
    let mut sum = 0.5 * (f(lo) + f(hi)) + (1..n).map(|i| f(lo + i as f64 * h)).sum::<f64>();
    let mut value = sum * h;
    while n < max {
        // Refinement only evaluates the new midpoints.
        sum += (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>();
        n *= 2;
        h *= 0.5;
        let refined = sum * h;
        if (refined - value).abs() <= tolerance {
            return Ok(refined);
        }
        value = refined;
    }
    Err(Error::Quadrature(format!(
        "no agreement to {tolerance} on [{lo}, {hi}] with {max} panels"
    )))
}

/// Semi-analytic Laplace functional of an SDPPP with shift draws
/// `shift_samples` (already multiplied by `c`):
/// `E exp(-S int e^{-alpha x} (1 - e^{-Psi(x)}) dx)` with
/// `e^{-Psi(x)} = E exp(-<tau_x D, phi>)`.
///
/// The standard error reflects the spread of the shift draws only.
pub fn sdppp_laplace_oracle(
    shift_samples: &[f64],
    alpha: f64,
    decoration: &DecorationLaw,
    phi: &TestFunction,
    options: &QuadratureOptions,
    key: StreamKey,
) -> Result<Estimate> {
    if !decoration.is_normalized() {
        return Err(Error::UnnormalizedDecoration);
    }
    let a = phi.left_edge();
    let window = decoration.window();
    // tau_x D has atoms in [x - window, x]: nothing reaches phi for x < a,
    // nothing reaches a plateau for x > b + window, and past
    // a + 1/lambda + window every atom sits on the flat part of a ramp.
    let (hi, flat_beyond) = match *phi {
        TestFunction::Plateau { b, .. } => (b + window, false),
        TestFunction::Ramp { a, lambda, .. } => (a + 1.0 / lambda + window, true),
    };
    let (components, breaks): (Vec<(f64, Vec<f64>)>, Vec<f64>) = match decoration {
        DecorationLaw::Mixture { components, .. } => {
            let comps: Vec<(f64, Vec<f64>)> = components.iter().map(|(p, m)| (*p, m.atoms().to_vec())).collect();
            let mut breaks = Vec::new();
            for (_, atoms) in &comps {
                for d in atoms {
                    breaks.extend(phi.kinks().into_iter().map(|k| k - d));
                }
            }
            // Large empirical mixtures have kinks everywhere; splitting
            // buys nothing there.
            if breaks.len() > 256 {
                breaks.clear();
            }
            (comps, breaks)
        }
        DecorationLaw::Sampled { .. } => {
            let n = options.decoration_reps;
            let draws = try_replicate(key, n, |_, rng| decoration.sample(rng))?;
            let comps = draws.into_iter().map(|m| (1.0 / n as f64, m.into_atoms())).collect();
            (comps, Vec::new())
        }
    };
    let one_minus_laplace = |x: f64| -> f64 {
        let mean: f64 = components
            .iter()
            .map(|(p, atoms)| p * (-atoms.iter().map(|d| phi.eval(x + d)).sum::<f64>()).exp())
            .sum();
        1.0 - mean
    };
    let integrand = |x: f64| (-alpha * x).exp() * one_minus_laplace(x);
    // Piecewise-smooth integrand: split at every kink so the trapezoid rule
    // converges at its smooth rate on each piece.
    let mut cuts: Vec<f64> = breaks.into_iter().filter(|&x| x > a && x < hi).collect();
    cuts.push(a);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut integral = 0.0;
    for w in cuts.windows(2) {
        integral += trapezoid(
            &integrand,
            w[0],
            w[1],
            options.initial_panels,
            options.max_panels,
            options.tolerance / cuts.len() as f64,
        )?;
    }
    if flat_beyond {
        integral += one_minus_laplace(hi) * (-alpha * hi).exp() / alpha;
    }
    let values: Vec<f64> = shift_samples.iter().map(|s| (-s * integral).exp()).collect();
    Estimate::from_samples(&values)
}
