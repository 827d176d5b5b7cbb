use serde::{Deserialize, Serialize};

use crate::branching::{convolve, recommend_floor, MeasureSampler, DEFAULT_MISS_PROBABILITY};
use crate::error::{Error, Result};
use crate::point_measure::PointMeasure;
use crate::reproduction::ReproductionLaw;
use crate::rng::{try_replicate, StreamKey};
use crate::stats::{chi_square_homogeneity, count_histogram, ks_two_sample, tv_distance, z_p_value, z_test, Estimate};
use crate::test_function::TestFunction;

pub const MIN_FIXED_POINT_REPS: usize = 10_000;
pub const MIN_BATTERY: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub reps: usize,
    /// Family-wise level, split evenly over all tests.
    pub significance: f64,
    /// Largest tolerated fraction of replicates whose floor ended above the
    /// lowest level any test looks at.
    pub bias_budget: f64,
    pub miss_probability: f64,
    pub count_thresholds: Vec<f64>,
    /// Tail counts at or above this value share one histogram bin.
    pub count_cap: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            reps: MIN_FIXED_POINT_REPS,
            significance: 1e-3,
            bias_budget: 1e-3,
            miss_probability: DEFAULT_MISS_PROBABILITY,
            count_thresholds: vec![0.0, 1.0],
            count_cap: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: String,
    /// z-score for Laplace means, KS distance for maxima, total variation
    /// for tail-count histograms.
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tests: Vec<TestOutcome>,
    pub verdict: Verdict,
    pub significance: f64,
    pub corrected_level: f64,
    pub reps: usize,
    pub bias_budget: f64,
    pub truncated_fraction: f64,
    pub required_floor: f64,
    pub target_floor: f64,
    pub reason: Option<String>,
    pub note: String,
}

const NOTE: &str = "equality in law is tested through a finite battery; a pass is evidence, not proof";

struct Summary {
    laplace: Vec<f64>,
    max: f64,
    counts: Vec<usize>,
    truncated: bool,
}

fn summarize(d: &PointMeasure, battery: &[TestFunction], thresholds: &[f64], lowest: f64) -> Summary {
    let max = d.max_atom();
    Summary {
        laplace: battery.iter().map(|phi| (-d.integrate_unchecked(phi)).exp()).collect(),
        // Maxima below the lowest exact level are censored to one value.
        max: if max >= lowest { max } else { f64::NEG_INFINITY },
        counts: thresholds
            .iter()
            .map(|&x| d.atoms().partition_point(|&a| a > x))
            .collect(),
        truncated: d.floor() > lowest,
    }
}

/// Tests `E = Z * E` in law, where `target` draws `E` and `Z` is the
/// offspring law: Laplace means over the battery, the law of the maximum,
/// and tail-count histograms, with a Bonferroni-corrected verdict.
pub fn verify_fixed_point(
    law: &ReproductionLaw,
    target: &MeasureSampler,
    battery: &[TestFunction],
    options: &FixedPointOptions,
    key: StreamKey,
) -> Result<VerificationReport> {
    if options.reps < MIN_FIXED_POINT_REPS {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIXED_POINT_REPS,
            got: options.reps,
        });
    }
    if battery.len() < MIN_BATTERY {
        return Err(Error::InvalidArgument(format!(
            "battery has {} functions, at least {MIN_BATTERY} required",
            battery.len()
        )));
    }
    if !(options.significance > 0.0 && options.significance < 1.0) {
        return Err(Error::InvalidArgument(format!("significance {}", options.significance)));
    }
    law.validate()?;
    let lowest = battery
        .iter()
        .map(TestFunction::left_edge)
        .chain(options.count_thresholds.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let required_floor = recommend_floor(lowest, law, 1, options.miss_probability)?;
    let n_tests = battery.len() + 1 + options.count_thresholds.len();
    let corrected_level = options.significance / n_tests as f64;
    let mut report = VerificationReport {
        tests: Vec::new(),
        verdict: Verdict::Inconclusive,
        significance: options.significance,
        corrected_level,
        reps: options.reps,
        bias_budget: options.bias_budget,
        truncated_fraction: 0.0,
        required_floor,
        target_floor: target.declared_floor(),
        reason: None,
        note: NOTE.into(),
    };
    if target.declared_floor() > required_floor {
        report.reason = Some(format!(
            "target is exact only above {}, but {required_floor} is needed",
            target.declared_floor()
        ));
        return Ok(report);
    }

    let convolved = convolve(&MeasureSampler::offspring(*law), target);
    let run = |sampler: &MeasureSampler, tag: &str| {
        try_replicate(key.derive(tag), options.reps, |_, rng| {
            Ok(summarize(
                &sampler.sample(rng)?,
                battery,
                &options.count_thresholds,
                lowest,
            ))
        })
    };
    let direct = run(target, "direct")?;
    let smoothed = run(&convolved, "convolved")?;
    let truncated = direct.iter().chain(&smoothed).filter(|s| s.truncated).count();
    report.truncated_fraction = truncated as f64 / (2 * options.reps) as f64;

    for (k, phi) in battery.iter().enumerate() {
        let column = |rows: &[Summary]| rows.iter().map(|r| r.laplace[k]).collect::<Vec<f64>>();
        let a = Estimate::from_samples(&column(&direct))?;
        let b = Estimate::from_samples(&column(&smoothed))?;
        let z = z_test(&a, &b);
        let p = z_p_value(z);
        report.tests.push(TestOutcome {
            name: format!("laplace {}", phi.id()),
            statistic: z,
            p_value: p,
            pass: p > corrected_level,
        });
    }
    let maxima = |rows: &[Summary]| rows.iter().map(|r| r.max).collect::<Vec<f64>>();
    let ks = ks_two_sample(&maxima(&direct), &maxima(&smoothed))?;
    report.tests.push(TestOutcome {
        name: "max atom ks".into(),
        statistic: ks.statistic,
        p_value: ks.p_value,
        pass: ks.p_value > corrected_level,
    });
    for (k, x) in options.count_thresholds.iter().enumerate() {
        let hist = |rows: &[Summary]| count_histogram(rows.iter().map(|r| r.counts[k]), options.count_cap);
        let (ha, hb) = (hist(&direct), hist(&smoothed));
        let chi = chi_square_homogeneity(&ha, &hb)?;
        let as_f64 = |h: &[u64]| h.iter().map(|&c| c as f64).collect::<Vec<f64>>();
        report.tests.push(TestOutcome {
            name: format!("tail count above {x}"),
            statistic: tv_distance(&as_f64(&ha), &as_f64(&hb))?,
            p_value: chi.p_value,
            pass: chi.p_value > corrected_level,
        });
    }

    report.verdict = if report.truncated_fraction > options.bias_budget {
        report.reason = Some(format!(
            "truncated fraction {} exceeds the bias budget {}",
            report.truncated_fraction, options.bias_budget
        ));
        Verdict::Inconclusive
    } else if report.tests.iter().all(|t| t.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}
