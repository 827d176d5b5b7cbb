//! Branching random walks and the branching convolution of point-measure
//! laws.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::point_measure::PointMeasure;
use crate::reproduction::ReproductionLaw;
use crate::rng::SimRng;
use crate::stats::normal_quantile;

pub const DEFAULT_POPULATION_CAP: usize = 10_000_000;

/// Default probability, per replicate, that truncation below a recommended
/// floor changes any test-function integral.
pub const DEFAULT_MISS_PROBABILITY: f64 = 1e-4;

/// Positions of generation `n` of a branching random walk started from
/// `delta_0`, unsorted. Particles below `barrier` are removed together with
/// their descendants.
pub(crate) fn population(
    law: &ReproductionLaw,
    n: usize,
    barrier: f64,
    cap: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let mut current = vec![0.0];
    if 0.0 < barrier {
        current.clear();
    }
    let mut next = Vec::new();
    for generation in 1..=n {
        next.clear();
        for &x in &current {
            law.push_offspring(x, rng, &mut next);
        }
        if barrier > f64::NEG_INFINITY {
            next.retain(|&x| x >= barrier);
        }
        if next.len() > cap {
            return Err(Error::PopulationCap {
                size: next.len(),
                generation,
                cap,
            });
        }
        std::mem::swap(&mut current, &mut next);
        if current.is_empty() {
            break;
        }
    }
    Ok(current)
}

/// Generation `n` of the branching random walk, with the barrier as floor.
pub fn simulate_generation(law: &ReproductionLaw, n: usize, barrier: f64, rng: &mut SimRng) -> Result<PointMeasure> {
    simulate_generation_capped(law, n, barrier, DEFAULT_POPULATION_CAP, rng)
}

pub fn simulate_generation_capped(
    law: &ReproductionLaw,
    n: usize,
    barrier: f64,
    cap: usize,
    rng: &mut SimRng,
) -> Result<PointMeasure> {
    if barrier.is_nan() || barrier == f64::INFINITY {
        return Err(Error::InvalidArgument(format!("invalid barrier {barrier}")));
    }
    law.validate()?;
    let atoms = population(law, n, barrier, cap, rng)?;
    Ok(PointMeasure::from_finite_unsorted(atoms, barrier))
}

type DrawFn = dyn Fn(&mut SimRng) -> Result<PointMeasure> + Send + Sync;

/// A law on point measures, represented by a way to draw from it.
///
/// `declared_floor` is a lower bound on the floor of every draw, and `reach`
/// an almost-sure upper bound on its largest atom (`+inf` if unbounded).
#[derive(Clone)]
pub struct MeasureSampler {
    draw: Arc<DrawFn>,
    declared_floor: f64,
    reach: f64,
    description: String,
}

impl fmt::Debug for MeasureSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasureSampler")
            .field("description", &self.description)
            .field("declared_floor", &self.declared_floor)
            .field("reach", &self.reach)
            .finish()
    }
}

impl MeasureSampler {
    pub fn new<F>(description: impl Into<String>, declared_floor: f64, reach: f64, draw: F) -> Self
    where
        F: Fn(&mut SimRng) -> Result<PointMeasure> + Send + Sync + 'static,
    {
        MeasureSampler {
            draw: Arc::new(draw),
            declared_floor,
            reach,
            description: description.into(),
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<PointMeasure> {
        (self.draw)(rng)
    }

    pub fn declared_floor(&self) -> f64 {
        self.declared_floor
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Always the null measure.
    pub fn null() -> Self {
        MeasureSampler::new("null", f64::NEG_INFINITY, f64::NEG_INFINITY, |_| {
            Ok(PointMeasure::null())
        })
    }

    /// Always `delta_y`.
    pub fn dirac(y: f64) -> Self {
        MeasureSampler::new(format!("dirac({y})"), f64::NEG_INFINITY, y, move |_| {
            Ok(PointMeasure::dirac(y))
        })
    }

    /// First generation of a branching random walk.
    pub fn offspring(law: ReproductionLaw) -> Self {
        let reach = match law {
            ReproductionLaw::BinaryDeterministic { a, b } => a.max(b),
            _ => f64::INFINITY,
        };
        MeasureSampler::new(law.description(), f64::NEG_INFINITY, reach, move |rng| {
            Ok(law.sample_offspring(rng))
        })
    }

    /// Generation `n` of a branching random walk, without barrier.
    pub fn generation(law: ReproductionLaw, n: usize) -> Self {
        let reach = match law {
            ReproductionLaw::BinaryDeterministic { a, b } => n as f64 * a.max(b),
            _ => f64::INFINITY,
        };
        MeasureSampler::new(
            format!("{}^{n}", law.description()),
            f64::NEG_INFINITY,
            reach,
            move |rng| simulate_generation(&law, n, f64::NEG_INFINITY, rng),
        )
    }

    pub fn translated(&self, y: f64) -> Self {
        let inner = self.clone();
        MeasureSampler::new(
            format!("tau_{y}({})", self.description),
            self.declared_floor + y,
            self.reach + y,
            move |rng| Ok(inner.sample(rng)?.translate(y)),
        )
    }
}

/// `a + b` for floors and reaches, with `-inf` absorbing.
fn shift_bound(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a + b
    }
}

/// The branching convolution `A ⊛ B`: draw `D` from `A`, then superpose an
/// independent `B`-draw translated by each atom of `D`.
///
/// A draw is exact above `max_j (d_j + floor(B_j))`, and, when `D` itself
/// was truncated, above `floor(D) + reach(B)` as well.
pub fn convolve(a: &MeasureSampler, b: &MeasureSampler) -> MeasureSampler {
    let (outer, inner) = (a.clone(), b.clone());
    let declared_floor = shift_bound(a.declared_floor, b.reach).max(b.declared_floor);
    let reach = if a.reach == f64::NEG_INFINITY || b.reach == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a.reach + b.reach
    };
    MeasureSampler::new(
        format!("({}) * ({})", a.description, b.description),
        declared_floor,
        reach,
        move |rng| {
            let d = outer.sample(rng)?;
            let mut floor = if d.floor() == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                d.floor() + inner.reach
            };
            let mut atoms = Vec::new();
            for &dj in d.atoms() {
                let e = inner.sample(rng)?;
                floor = floor.max(shift_bound(dj, e.floor()));
                atoms.extend(e.atoms().iter().map(|x| x + dj));
            }
            if atoms.len() > DEFAULT_POPULATION_CAP {
                return Err(Error::PopulationCap {
                    size: atoms.len(),
                    generation: 1,
                    cap: DEFAULT_POPULATION_CAP,
                });
            }
            Ok(PointMeasure::from_finite_unsorted(atoms, floor))
        },
    )
}

/// The one-atom measure at a random position; `-inf` gives the null measure.
pub fn dirac_sampler<F>(description: impl Into<String>, shift: F) -> MeasureSampler
where
    F: Fn(&mut SimRng) -> Result<f64> + Send + Sync + 'static,
{
    MeasureSampler::new(description, f64::NEG_INFINITY, f64::INFINITY, move |rng| {
        let y = shift(rng)?;
        if y.is_nan() || y == f64::INFINITY {
            return Err(Error::NonFiniteAtom(y));
        }
        Ok(if y == f64::NEG_INFINITY {
            PointMeasure::null()
        } else {
            PointMeasure::dirac(y)
        })
    })
}

/// A floor `L` such that a measure truncated at `L` and then convolved on
/// the left by `n_steps` generations of `law` has, with probability at least
/// `1 - miss`, no discarded atom landing in `[left_edge, inf)`.
///
/// With `N` the expected number of generation-`n` particles, each particle
/// must stay below the `(1 - miss)^(1/N)` quantile `q` of its displacement;
/// for Gaussian families `q = n mu + sqrt(n) sigma z`. The result is
/// `left_edge - max(q, 0)`, so it never exceeds `left_edge`.
pub fn recommend_floor(left_edge: f64, law: &ReproductionLaw, n_steps: usize, miss: f64) -> Result<f64> {
    if !(miss > 0.0 && miss < 1.0) {
        if miss >= 1.0 {
            return Ok(left_edge);
        }
        return Err(Error::InvalidArgument(format!("miss probability {miss} not in (0, 1)")));
    }
    law.validate()?;
    if n_steps == 0 {
        return Ok(left_edge);
    }
    let n = n_steps as f64;
    let q = match *law {
        ReproductionLaw::BinaryDeterministic { a, b } => n * a.max(b),
        ReproductionLaw::BinaryGaussian { mu, sigma } | ReproductionLaw::PoissonGaussian { mu, sigma, .. } => {
            let expected = law.mean_offspring().powf(n);
            // Per-particle exceedance 1 - (1 - miss)^(1/N), computed stably.
            let per_particle = -((-miss).ln_1p() / expected).exp_m1();
            n * mu + n.sqrt() * sigma * normal_quantile(1.0 - per_particle)
        }
    };
    Ok(left_edge - q.max(0.0))
}

/// Killing barrier for martingale evaluation: a particle killed at `x`
/// carries expected future weight at most `w(x)` (with `w(x) = e^{alpha x}`
/// for the additive and `|x| e^{alpha x}` for the derivative martingale), and
/// at most `m^k` particles can be killed at generation `k`. The barrier `b`
/// solves `w(b) * sum_{k=1}^n m^k = miss`.
pub fn martingale_barrier(law: &ReproductionLaw, alpha: f64, n: usize, miss: f64, derivative: bool) -> f64 {
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    let m = law.mean_offspring();
    let total: f64 = (1..=n).map(|k| m.powi(k as i32)).sum();
    let log_target = miss.ln() - total.ln();
    if !derivative {
        return log_target / alpha;
    }
    // |x| e^{alpha x} is increasing on (-inf, -1/alpha); bisect there.
    let log_w = |x: f64| (-x).ln() + alpha * x;
    let (mut lo, mut hi) = (-1e6, -1.0 / alpha);
    if log_w(hi) <= log_target {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_w(mid) > log_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}
