//! Additive and derivative martingales of a branching random walk, and the
//! random shift `S` built from their finite-generation values.

use serde::{Deserialize, Serialize};

use crate::branching::{martingale_barrier, population, DEFAULT_POPULATION_CAP};
use crate::error::{Error, Result};
use crate::reproduction::{Case, ReproductionLaw};
use crate::rng::{replicate, try_replicate, SimRng, StreamKey};
use crate::stats::{ks_two_sample, Estimate, KsResult};

/// Bound on the expected contribution of particles removed by the killing
/// barrier used for martingale evaluation.
pub const MARTINGALE_MISS: f64 = 1e-6;

pub const DEFAULT_MIN_GENERATIONS: usize = 12;

fn check_boundary(law: &ReproductionLaw, alpha: f64) -> Result<()> {
    let report = law.classify(alpha);
    if report.case != Case::Boundary {
        return Err(Error::WrongCase {
            expected: Case::Boundary.to_string(),
            found: report.case.to_string(),
        });
    }
    Ok(())
}

/// `W_n = <Z_n, e^{alpha x}>`.
pub fn additive_martingale(law: &ReproductionLaw, alpha: f64, n: usize, rng: &mut SimRng) -> Result<f64> {
    let barrier = martingale_barrier(law, alpha, n, MARTINGALE_MISS, false);
    let z = population(law, n, barrier, DEFAULT_POPULATION_CAP, rng)?;
    Ok(z.iter().map(|x| (alpha * x).exp()).sum())
}

/// `D_n = <Z_n, -x e^{alpha x}>` for a boundary-case law.
///
/// The sign makes the almost-sure limit non-negative: at the boundary the
/// maximum of `Z_n` drifts to `-inf`, so eventually every atom contributes
/// `|x| e^{alpha x} > 0`.
pub fn derivative_martingale(law: &ReproductionLaw, alpha: f64, n: usize, rng: &mut SimRng) -> Result<f64> {
    check_boundary(law, alpha)?;
    derivative_value(law, alpha, n, rng)
}

fn derivative_value(law: &ReproductionLaw, alpha: f64, n: usize, rng: &mut SimRng) -> Result<f64> {
    let barrier = martingale_barrier(law, alpha, n, MARTINGALE_MISS, true);
    let z = population(law, n, barrier, DEFAULT_POPULATION_CAP, rng)?;
    Ok(z.iter().map(|x| -x * (alpha * x).exp()).sum())
}

/// `E[D_n]` by importance sampling under the size-biased (spine) measure:
/// with `dQ/dP = W_n`, `E_P[D_n] = E_Q[D_n / W_n]`, and `|D_n / W_n|` is
/// bounded by the largest `|x|` in generation `n`. The plain sample mean of
/// `D_n` is dominated by rare large values, so its standard error is
/// unreliable at moderate sample sizes.
pub fn derivative_martingale_mean(
    law: &ReproductionLaw,
    alpha: f64,
    n: usize,
    reps: usize,
    key: StreamKey,
) -> Result<Estimate> {
    check_boundary(law, alpha)?;
    let ratios = replicate(key, reps, |_, rng| {
        let mut current = vec![0.0];
        let mut spine = 0;
        let mut next = Vec::new();
        for _ in 0..n {
            next.clear();
            let mut new_spine = 0;
            for (i, &x) in current.iter().enumerate() {
                if i == spine {
                    let start = next.len();
                    new_spine = start + law.push_size_biased_offspring(alpha, x, rng, &mut next);
                } else {
                    law.push_offspring(x, rng, &mut next);
                }
            }
            spine = new_spine;
            std::mem::swap(&mut current, &mut next);
        }
        let w: f64 = current.iter().map(|x| (alpha * x).exp()).sum();
        let d: f64 = current.iter().map(|x| -x * (alpha * x).exp()).sum();
        d / w
    });
    Estimate::from_samples(&ratios)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftSource {
    Constant {
        value: f64,
    },
    Martingale {
        law: ReproductionLaw,
        alpha: f64,
        case: Case,
        generations: usize,
        barrier: f64,
    },
}

/// Draws of `scale * S`, with `S` a constant or a finite-generation
/// martingale value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSampler {
    pub source: ShiftSource,
    pub scale: f64,
}

/// A batch of shift draws and how many boundary-case draws were clamped.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftBatch {
    pub values: Vec<f64>,
    pub clamped: usize,
}

impl ShiftBatch {
    pub fn clamp_fraction(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.clamped as f64 / self.values.len() as f64
        }
    }
}

impl ShiftSampler {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "constant shift {value} must be finite and >= 0"
            )));
        }
        Ok(ShiftSampler {
            source: ShiftSource::Constant { value },
            scale: 1.0,
        })
    }

    /// Additive martingale in the regular case, clamped derivative
    /// martingale in the boundary case, after `generations` steps.
    pub fn martingale(law: ReproductionLaw, alpha: f64, generations: usize, min_generations: usize) -> Result<Self> {
        law.validate()?;
        if generations < min_generations {
            return Err(Error::InvalidArgument(format!(
                "{generations} generations is below the minimum of {min_generations}"
            )));
        }
        let case = law.classify(alpha).case;
        let derivative = match case {
            Case::Regular => false,
            Case::Boundary => true,
            other => {
                return Err(Error::WrongCase {
                    expected: "regular or boundary".into(),
                    found: other.to_string(),
                })
            }
        };
        Ok(ShiftSampler {
            source: ShiftSource::Martingale {
                law,
                alpha,
                case,
                generations,
                barrier: martingale_barrier(&law, alpha, generations, MARTINGALE_MISS, derivative),
            },
            scale: 1.0,
        })
    }

    /// The same shift with one generation fewer (no-op for constants).
    pub(crate) fn one_generation_shorter(&self) -> Self {
        let source = match &self.source {
            ShiftSource::Martingale {
                law,
                alpha,
                case,
                generations,
                ..
            } if *generations > 0 => {
                let n = generations - 1;
                ShiftSource::Martingale {
                    law: *law,
                    alpha: *alpha,
                    case: *case,
                    generations: n,
                    barrier: martingale_barrier(law, *alpha, n, MARTINGALE_MISS, *case == Case::Boundary),
                }
            }
            other => other.clone(),
        };
        ShiftSampler {
            source,
            scale: self.scale,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        ShiftSampler {
            source: self.source.clone(),
            scale: self.scale * c,
        }
    }

    pub fn case(&self) -> Option<Case> {
        match self.source {
            ShiftSource::Constant { .. } => None,
            ShiftSource::Martingale { case, .. } => Some(case),
        }
    }

    pub fn generations_used(&self) -> usize {
        match self.source {
            ShiftSource::Constant { .. } => 0,
            ShiftSource::Martingale { generations, .. } => generations,
        }
    }

    pub fn description(&self) -> String {
        let base = match &self.source {
            ShiftSource::Constant { value } => format!("const:{value}"),
            ShiftSource::Martingale {
                law, case, generations, ..
            } => format!("martingale:{},{generations},{case}", law.description()),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{} * {base}", self.scale)
        }
    }

    /// One draw and whether it was clamped at 0.
    pub fn sample_with_clamp(&self, rng: &mut SimRng) -> Result<(f64, bool)> {
        let (value, clamped) = match &self.source {
            ShiftSource::Constant { value } => (*value, false),
            ShiftSource::Martingale {
                law,
                alpha,
                case,
                generations,
                barrier,
            } => {
                let z = population(law, *generations, *barrier, DEFAULT_POPULATION_CAP, rng)?;
                match case {
                    Case::Boundary => {
                        let d: f64 = z.iter().map(|x| -x * (alpha * x).exp()).sum();
                        (d.max(0.0), d < 0.0)
                    }
                    _ => (z.iter().map(|x| (alpha * x).exp()).sum(), false),
                }
            }
        };
        Ok((self.scale * value, clamped))
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<f64> {
        Ok(self.sample_with_clamp(rng)?.0)
    }

    pub fn sample_batch(&self, reps: usize, key: StreamKey) -> Result<ShiftBatch> {
        let draws = try_replicate(key, reps, |_, rng| self.sample_with_clamp(rng))?;
        Ok(ShiftBatch {
            clamped: draws.iter().filter(|d| d.1).count(),
            values: draws.into_iter().map(|d| d.0).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingIdentityReport {
    pub ks: KsResult,
    pub direct_mean: f64,
    pub smoothed_mean: f64,
    pub reps: usize,
    pub generations_used: usize,
}

/// Two-sample KS test of `S` against `sum_j e^{alpha z_j} S^{(j)}` with
/// fresh offspring and independent copies of `S`.
///
/// For a martingale shift after `n` generations the copies run `n - 1`
/// generations, so that both sides have the law of the generation-`n`
/// martingale and the identity holds without a finite-`n` bias.
pub fn check_smoothing_identity(
    law: &ReproductionLaw,
    alpha: f64,
    shift: &ShiftSampler,
    reps: usize,
    key: StreamKey,
) -> Result<SmoothingIdentityReport> {
    if reps < 1000 {
        return Err(Error::InsufficientSamples {
            needed: 1000,
            got: reps,
        });
    }
    let direct = shift.sample_batch(reps, key.derive("direct"))?.values;
    let shift = &shift.one_generation_shorter();
    let smoothed = try_replicate(key.derive("smoothed"), reps, |_, rng| {
        let mut children = Vec::new();
        law.push_offspring(0.0, rng, &mut children);
        let mut total = 0.0;
        for z in children {
            total += (alpha * z).exp() * shift.sample(rng)?;
        }
        Ok(total)
    })?;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(SmoothingIdentityReport {
        ks: ks_two_sample(&direct, &smoothed)?,
        direct_mean: mean(&direct),
        smoothed_mean: mean(&smoothed),
        reps,
        generations_used: shift.generations_used(),
    })
}
