//! Poisson point processes with intensity `e^{-alpha x} dx`, their randomly
//! shifted and decorated versions, and estimators for the law of the
//! maximum.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::branching::{MeasureSampler, DEFAULT_POPULATION_CAP};
use crate::error::{Error, Result};
use crate::martingale::ShiftSampler;
use crate::point_measure::PointMeasure;
use crate::reproduction::Case;
use crate::rng::{try_replicate, SimRng, StreamKey};
use crate::stats::Estimate;

/// One component of an explicit decoration mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub p: f64,
    pub atoms: Vec<f64>,
}

/// JSON form of a mixture decoration: `{"mixture": [{"p": .., "atoms": [..]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub mixture: Vec<MixtureComponent>,
}

/// Law of the cluster attached to each Poisson atom.
#[derive(Clone, Debug)]
pub enum DecorationLaw {
    Mixture {
        components: Vec<(f64, PointMeasure)>,
        cumulative: Vec<f64>,
    },
    /// Draws from a sampler, truncated `window` below their maximum.
    Sampled {
        sampler: MeasureSampler,
        window: f64,
        normalized: bool,
    },
}

const PROBABILITY_TOLERANCE: f64 = 1e-9;

impl DecorationLaw {
    pub fn dirac() -> Self {
        DecorationLaw::mixture(vec![(1.0, vec![0.0])]).expect("valid mixture")
    }

    pub fn mixture(components: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("empty mixture".into()));
        }
        let mut total = 0.0;
        let mut out = Vec::with_capacity(components.len());
        let mut cumulative = Vec::with_capacity(components.len());
        for (p, atoms) in components {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidArgument(format!("mixture weight {p}")));
            }
            total += p;
            cumulative.push(total);
            out.push((p, PointMeasure::from_atoms(atoms, f64::NEG_INFINITY)?));
        }
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(DecorationLaw::Mixture {
            components: out,
            cumulative,
        })
    }

    pub fn from_spec(spec: &MixtureSpec) -> Result<Self> {
        DecorationLaw::mixture(spec.mixture.iter().map(|c| (c.p, c.atoms.clone())).collect())
    }

    pub fn sampled(sampler: MeasureSampler, window: f64) -> Result<Self> {
        if !(window > 0.0) {
            return Err(Error::InvalidArgument(format!("decoration window {window}")));
        }
        Ok(DecorationLaw::Sampled {
            sampler,
            window,
            normalized: false,
        })
    }

    /// Whether every draw has its maximal atom at 0.
    pub fn is_normalized(&self) -> bool {
        match self {
            DecorationLaw::Mixture { components, .. } => components
                .iter()
                .filter(|(p, _)| *p > 0.0)
                .all(|(_, m)| m.max_atom() == 0.0),
            DecorationLaw::Sampled { normalized, .. } => *normalized,
        }
    }

    /// Width of the smallest window `[max - w, max]` holding every draw
    /// exactly.
    pub fn window(&self) -> f64 {
        match self {
            DecorationLaw::Mixture { components, .. } => components
                .iter()
                .filter(|(_, m)| !m.is_empty())
                .map(|(_, m)| m.max_atom() - m.atoms()[m.len() - 1])
                .fold(0.0, f64::max),
            DecorationLaw::Sampled { window, .. } => *window,
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<PointMeasure> {
        match self {
            DecorationLaw::Mixture { components, cumulative } => {
                let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let k = cumulative.partition_point(|&c| c <= u).min(components.len() - 1);
                Ok(components[k].1.clone())
            }
            DecorationLaw::Sampled { sampler, window, .. } => {
                let d = sampler.sample(rng)?;
                let top = d.max_atom();
                Ok(if top == f64::NEG_INFINITY {
                    d
                } else {
                    d.truncate(top - window)
                })
            }
        }
    }

    pub fn description(&self) -> String {
        match self {
            DecorationLaw::Mixture { components, .. } => {
                let parts: Vec<String> = components.iter().map(|(p, m)| format!("{p}:{:?}", m.atoms())).collect();
                format!("mixture[{}]", parts.join(","))
            }
            DecorationLaw::Sampled { sampler, window, .. } => {
                format!("sampled[{}; window {window}]", sampler.description())
            }
        }
    }
}

/// Output of [`normalize_decoration`].
#[derive(Clone, Debug)]
pub struct NormalizedDecoration {
    /// `c = E e^{alpha d_1}`.
    pub c: f64,
    /// Zero for exact mixtures.
    pub c_std_error: f64,
    pub star: DecorationLaw,
    /// Effective sample size of the importance weights; `None` when exact.
    pub effective_sample_size: Option<f64>,
}

/// Change of measure `D -> D*`: reweight by `e^{alpha d_1} / c` and recentre
/// each draw at its maximum. Mixtures are handled exactly; sampled laws by
/// self-normalized importance resampling over `budget` draws.
pub fn normalize_decoration(
    raw: &DecorationLaw,
    alpha: f64,
    budget: usize,
    key: StreamKey,
) -> Result<NormalizedDecoration> {
    let draws: Vec<(f64, PointMeasure)> = match raw {
        DecorationLaw::Mixture { components, .. } => components.clone(),
        DecorationLaw::Sampled { .. } => {
            if budget < 2 {
                return Err(Error::InsufficientSamples { needed: 2, got: budget });
            }
            let p = 1.0 / budget as f64;
            try_replicate(key, budget, |_, rng| Ok((p, raw.sample(rng)?)))?
        }
    };
    let weights: Vec<f64> = draws
        .iter()
        .map(|(p, m)| {
            let top = m.max_atom();
            if top == f64::NEG_INFINITY || *p == 0.0 {
                0.0
            } else {
                p * (alpha * top).exp()
            }
        })
        .collect();
    let c: f64 = weights.iter().sum();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InfiniteNormalization(c));
    }
    let components: Vec<(f64, Vec<f64>)> = draws
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|((_, m), &w)| (w / c, m.translate(-m.max_atom()).into_atoms()))
        .collect();
    let total: f64 = components.iter().map(|c| c.0).sum();
    let components = components.into_iter().map(|(p, a)| (p / total, a)).collect();
    let star = DecorationLaw::mixture(components)?;
    let (c_std_error, ess) = match raw {
        DecorationLaw::Mixture { .. } => (0.0, None),
        DecorationLaw::Sampled { .. } => {
            let n = weights.len() as f64;
            let raw_w: Vec<f64> = weights.iter().map(|w| w * n).collect();
            let se = Estimate::from_samples(&raw_w)?.std_error;
            let sq: f64 = weights.iter().map(|w| w * w).sum();
            (se, Some(c * c / sq))
        }
    };
    Ok(NormalizedDecoration {
        c,
        c_std_error,
        star,
        effective_sample_size: ess,
    })
}

/// Poisson points with intensity `scale * e^{-alpha x} dx` on `[floor, inf)`.
fn scaled_ppp(alpha: f64, scale: f64, floor: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
    let mean = scale * (-alpha * floor).exp() / alpha;
    if !mean.is_finite() || mean > DEFAULT_POPULATION_CAP as f64 {
        return Err(Error::PopulationCap {
            size: if mean.is_finite() { mean as usize } else { usize::MAX },
            generation: 0,
            cap: DEFAULT_POPULATION_CAP,
        });
    }
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean).expect("positive finite mean").sample(rng) as usize;
    let gap = Exp::new(alpha).expect("positive rate");
    Ok((0..count).map(|_| floor + gap.sample(rng)).collect())
}

/// Poisson point process with intensity `e^{-alpha x} dx`, exact on
/// `[floor, inf)`.
pub fn sample_ppp_exponential(alpha: f64, floor: f64, rng: &mut SimRng) -> Result<PointMeasure> {
    if !(alpha > 0.0) || !floor.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha {alpha}, floor {floor}")));
    }
    let atoms = scaled_ppp(alpha, 1.0, floor, rng)?;
    Ok(PointMeasure::from_finite_unsorted(atoms, floor))
}

/// One draw of `sum_i tau_{log(S)/alpha + xi_i} D_i`, exact on
/// `[floor, inf)`; the scale `c` is carried by `shift`.
///
/// Since each normalized decoration has its maximum at 0, Poisson atoms
/// below `floor` cannot contribute above it.
pub fn sample_sdppp(
    shift: &ShiftSampler,
    alpha: f64,
    decoration: &DecorationLaw,
    floor: f64,
    rng: &mut SimRng,
) -> Result<PointMeasure> {
    if !decoration.is_normalized() {
        return Err(Error::UnnormalizedDecoration);
    }
    if !(alpha > 0.0) || !floor.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha {alpha}, floor {floor}")));
    }
    let s = shift.sample(rng)?;
    if s == 0.0 {
        return Ok(PointMeasure::null());
    }
    let centres = scaled_ppp(alpha, s, floor, rng)?;
    let mut atoms = Vec::with_capacity(centres.len());
    let mut exact_above = floor;
    for xi in centres {
        let d = decoration.sample(rng)?;
        if d.floor() > f64::NEG_INFINITY {
            exact_above = exact_above.max(xi + d.floor());
        }
        atoms.extend(d.atoms().iter().map(|a| a + xi));
    }
    Ok(PointMeasure::from_finite_unsorted(atoms, exact_above))
}

pub fn sdppp_sampler(shift: ShiftSampler, alpha: f64, decoration: DecorationLaw, floor: f64) -> Result<MeasureSampler> {
    if !decoration.is_normalized() {
        return Err(Error::UnnormalizedDecoration);
    }
    let description = format!(
        "sdppp(shift {}, alpha {alpha}, {})",
        shift.description(),
        decoration.description()
    );
    Ok(MeasureSampler::new(description, floor, f64::INFINITY, move |rng| {
        sample_sdppp(&shift, alpha, &decoration, floor, rng)
    }))
}

/// Cox process with intensity `S e^{-alpha x} dx` (Dirac decoration).
pub fn cox_sampler(shift: ShiftSampler, alpha: f64, floor: f64) -> MeasureSampler {
    sdppp_sampler(shift, alpha, DecorationLaw::dirac(), floor).expect("Dirac decoration is normalized")
}

/// `P(max E <= x) = E exp(-c S e^{-alpha x} / alpha)`.
pub fn max_cdf_semi_analytic(
    c: f64,
    shift: &ShiftSampler,
    alpha: f64,
    x: f64,
    reps: usize,
    key: StreamKey,
) -> Result<Estimate> {
    let s = draw_shifts(shift, reps, key)?;
    Ok(max_cdf_curve(c, &s, alpha, &[x])?.remove(0))
}

/// The max law on a grid, from common shift draws.
pub fn max_cdf_curve(c: f64, shifts: &[f64], alpha: f64, xs: &[f64]) -> Result<Vec<Estimate>> {
    xs.iter()
        .map(|&x| {
            let k = c * (-alpha * x).exp() / alpha;
            let v: Vec<f64> = shifts.iter().map(|s| (-k * s).exp()).collect();
            Estimate::from_samples(&v)
        })
        .collect()
}

/// `g(x) = E exp(-S e^{alpha x})`.
pub fn estimate_g(shift: &ShiftSampler, alpha: f64, x: f64, reps: usize, key: StreamKey) -> Result<Estimate> {
    let s = draw_shifts(shift, reps, key)?;
    Ok(g_curve(&s, alpha, &[x])?.remove(0))
}

pub fn g_curve(shifts: &[f64], alpha: f64, xs: &[f64]) -> Result<Vec<Estimate>> {
    xs.iter()
        .map(|&x| {
            let k = (alpha * x).exp();
            let v: Vec<f64> = shifts.iter().map(|s| (-k * s).exp()).collect();
            Estimate::from_samples(&v)
        })
        .collect()
}

fn draw_shifts(shift: &ShiftSampler, reps: usize, key: StreamKey) -> Result<Vec<f64>> {
    if reps < 1000 {
        return Err(Error::InsufficientSamples {
            needed: 1000,
            got: reps,
        });
    }
    Ok(shift.sample_batch(reps, key)?.values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub z: f64,
    pub ratio: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GAsymptoticsReport {
    /// `regular` ratios are `(1 - g(z)) e^{-alpha z}`; `boundary` ratios are
    /// `(1 - g(z)) / (alpha |z| e^{alpha z})`.
    pub case: Case,
    pub points: Vec<RatioPoint>,
    /// Distances `|ratio - 1|` are non-increasing along the grid, up to one
    /// standard error of the later ratio.
    pub trend_toward_one: bool,
    pub clamp_fraction: f64,
    pub generations_used: usize,
}

/// Ratios of `1 - g(z)` to its predicted leading term on `z_grid`, ordered
/// as given (typically decreasing towards `-inf`), from common shift draws.
pub fn check_g_asymptotics(
    shift: &ShiftSampler,
    alpha: f64,
    z_grid: &[f64],
    reps: usize,
    key: StreamKey,
) -> Result<GAsymptoticsReport> {
    if reps < 1000 {
        return Err(Error::InsufficientSamples {
            needed: 1000,
            got: reps,
        });
    }
    if let Some(&z) = z_grid.iter().find(|&&z| !(z < 0.0)) {
        return Err(Error::InvalidArgument(format!("grid point {z} is not negative")));
    }
    let batch = shift.sample_batch(reps, key)?;
    let case = shift.case().unwrap_or(Case::Regular);
    let points = z_grid
        .iter()
        .map(|&z| {
            let u = (alpha * z).exp();
            let scale = match case {
                Case::Boundary => alpha * z.abs() * u,
                _ => u,
            };
            let v: Vec<f64> = batch.values.iter().map(|s| -(-s * u).exp_m1() / scale).collect();
            let e = Estimate::from_samples(&v)?;
            Ok(RatioPoint {
                z,
                ratio: e.mean,
                std_error: e.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let trend_toward_one = points
        .windows(2)
        .all(|w| (w[1].ratio - 1.0).abs() <= (w[0].ratio - 1.0).abs() + w[1].std_error);
    Ok(GAsymptoticsReport {
        case,
        points,
        trend_toward_one,
        clamp_fraction: batch.clamp_fraction(),
        generations_used: shift.generations_used(),
    })
}
