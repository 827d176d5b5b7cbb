use serde::{Deserialize, Serialize};

use crate::branching::MeasureSampler;
use crate::error::{Error, Result};
use crate::rng::{try_replicate, StreamKey};
use crate::stats::{count_histogram, ks_two_sample, tv_distance};

pub const MIN_CONDITIONED: usize = 200;
const COUNT_CAP: usize = 20;

/// Conditioned sample at one level `z`: draws with `max E >= z`, recentred
/// at the maximum and clipped to `[-window, 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorationLevel {
    pub z: f64,
    pub conditioned: usize,
    /// Atoms in the window, the maximum included; the last bin is an
    /// overflow bin.
    pub count_histogram: Vec<u64>,
    /// Probability of a second atom in `[-window, 0]`.
    pub second_atom_probability: f64,
    /// Max minus second atom, clipped to `window` (also when there is no
    /// second atom in the window).
    pub gaps: Vec<f64>,
}

impl DecorationLevel {
    pub fn gap_mass_within(&self, d: f64, tolerance: f64) -> f64 {
        let hits = self.gaps.iter().filter(|&&g| (g - d).abs() <= tolerance).count();
        hits as f64 / self.gaps.len() as f64
    }

    /// Empirical CDF of the clipped first gap on `grid`.
    pub fn gap_cdf(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter()
            .map(|&x| self.gaps.iter().filter(|&&g| g <= x).count() as f64 / self.gaps.len() as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorationExtraction {
    pub window: f64,
    pub levels: Vec<DecorationLevel>,
    /// Levels with fewer than the required conditioned draws.
    pub dropped: Vec<f64>,
    /// Between consecutive kept levels.
    pub count_tv: Vec<f64>,
    pub gap_ks: Vec<f64>,
}

fn check_levels(z_levels: &[f64]) -> Result<()> {
    if z_levels.is_empty() || z_levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("levels must be non-empty and increasing".into()));
    }
    Ok(())
}

fn check_floor(target: &MeasureSampler, needed: f64) -> Result<()> {
    if target.declared_floor() > needed {
        return Err(Error::Truncation {
            needed,
            floor: target.declared_floor(),
        });
    }
    Ok(())
}

/// Empirical law of `tau_{-max E} E` on `[-window, 0]` given `max E >= z`,
/// for each `z` in `z_levels`.
pub fn extract_decoration(
    target: &MeasureSampler,
    z_levels: &[f64],
    window: f64,
    reps: usize,
    min_conditioned: usize,
    key: StreamKey,
) -> Result<DecorationExtraction> {
    check_levels(z_levels)?;
    if !(window > 0.0) {
        return Err(Error::InvalidArgument(format!("window {window}")));
    }
    check_floor(target, z_levels[0] - window)?;
    let z0 = z_levels[0];
    // (max, atoms of the recentred draw inside the window) for draws above
    // the lowest level.
    let draws: Vec<Option<(f64, Vec<f64>)>> = try_replicate(key, reps, |_, rng| {
        let d = target.sample(rng)?;
        let top = d.max_atom();
        if top < z0 {
            return Ok(None);
        }
        let inside = d
            .atoms()
            .iter()
            .take_while(|&&x| x >= top - window)
            .map(|x| x - top)
            .collect();
        Ok(Some((top, inside)))
    })?;
    let mut levels = Vec::new();
    let mut dropped = Vec::new();
    for &z in z_levels {
        let kept: Vec<&Vec<f64>> = draws
            .iter()
            .flatten()
            .filter(|(top, _)| *top >= z)
            .map(|(_, atoms)| atoms)
            .collect();
        if kept.len() < min_conditioned {
            dropped.push(z);
            continue;
        }
        let n = kept.len();
        let gaps: Vec<f64> = kept
            .iter()
            .map(|a| a.get(1).map_or(window, |s| (-s).min(window)))
            .collect();
        levels.push(DecorationLevel {
            z,
            conditioned: n,
            count_histogram: count_histogram(kept.iter().map(|a| a.len()), COUNT_CAP),
            second_atom_probability: kept.iter().filter(|a| a.len() >= 2).count() as f64 / n as f64,
            gaps,
        });
    }
    let mut count_tv = Vec::new();
    let mut gap_ks = Vec::new();
    for w in levels.windows(2) {
        let as_f64 = |h: &[u64]| h.iter().map(|&c| c as f64).collect::<Vec<f64>>();
        count_tv.push(tv_distance(
            &as_f64(&w[0].count_histogram),
            &as_f64(&w[1].count_histogram),
        )?);
        gap_ks.push(ks_two_sample(&w[0].gaps, &w[1].gaps)?.statistic);
    }
    Ok(DecorationExtraction {
        window,
        levels,
        dropped,
        count_tv,
        gap_ks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountLevel {
    pub z: f64,
    pub conditioned: usize,
    /// `P(E((z, inf)) = k | E((z, inf)) > 0)` for `k = 0..=cap`; entry 0 is
    /// always 0 and the last entry collects the overflow.
    pub distribution: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountStabilization {
    pub levels: Vec<CountLevel>,
    pub dropped: Vec<f64>,
    /// Between consecutive kept levels.
    pub tv_consecutive: Vec<f64>,
    pub tv_decreasing: bool,
}

/// Conditional laws of the tail counts `E((z, inf))` given positivity.
pub fn count_stabilization(
    target: &MeasureSampler,
    z_levels: &[f64],
    reps: usize,
    min_conditioned: usize,
    key: StreamKey,
) -> Result<CountStabilization> {
    check_levels(z_levels)?;
    check_floor(target, z_levels[0])?;
    let counts: Vec<Vec<usize>> = try_replicate(key, reps, |_, rng| {
        let d = target.sample(rng)?;
        z_levels.iter().map(|&z| d.tail_count(z)).collect()
    })?;
    let mut levels = Vec::new();
    let mut dropped = Vec::new();
    for (k, &z) in z_levels.iter().enumerate() {
        let positive: Vec<usize> = counts.iter().map(|c| c[k]).filter(|&c| c > 0).collect();
        if positive.len() < min_conditioned {
            dropped.push(z);
            continue;
        }
        let n = positive.len() as f64;
        let distribution = count_histogram(positive.iter().copied(), COUNT_CAP)
            .into_iter()
            .map(|c| c as f64 / n)
            .collect();
        levels.push(CountLevel {
            z,
            conditioned: positive.len(),
            distribution,
        });
    }
    let tv_consecutive = levels
        .windows(2)
        .map(|w| tv_distance(&w[0].distribution, &w[1].distribution))
        .collect::<Result<Vec<f64>>>()?;
    let tv_decreasing = tv_consecutive.windows(2).all(|w| w[1] <= w[0]);
    Ok(CountStabilization {
        levels,
        dropped,
        tv_consecutive,
        tv_decreasing,
    })
}
