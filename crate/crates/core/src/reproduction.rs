//! Parametric offspring laws with closed-form log-Laplace transform
//! `kappa(theta) = log E sum_j exp(theta z_j)`, and the checks that decide
//! whether a law is critical, regular or boundary, and non-lattice.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_measure::PointMeasure;
use crate::rng::{replicate, SimRng, StreamKey};
use crate::stats::Estimate;

/// Tolerance on `kappa(alpha) = 0` and on the boundary-case moment.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

/// Moments with magnitude between [`CRITICAL_TOLERANCE`] and this value are
/// too close to zero to separate a boundary law from a regular one given the
/// precision of the root solver.
pub const INDETERMINATE_BAND: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReproductionLaw {
    /// Two children, i.i.d. `Normal(mu, sigma^2)` displacements.
    BinaryGaussian { mu: f64, sigma: f64 },
    /// `Poisson(m)` children, i.i.d. `Normal(mu, sigma^2)` displacements.
    PoissonGaussian { m: f64, mu: f64, sigma: f64 },
    /// Two children at fixed displacements `a` and `b`.
    BinaryDeterministic { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Regular,
    Boundary,
    Supercritical,
    Indeterminate,
    Invalid,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Case::Regular => "regular",
            Case::Boundary => "boundary",
            Case::Supercritical => "supercritical",
            Case::Indeterminate => "indeterminate",
            Case::Invalid => "invalid",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentBasis {
    Analytic,
    Assumed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub alpha: f64,
    pub case: Case,
    pub kappa_at_alpha: f64,
    pub mean_offspring: f64,
    pub a1_ok: bool,
    pub a3_ok: bool,
    /// `E sum_j z_j exp(alpha z_j)`.
    pub first_moment: f64,
    pub xlogx_moments_ok: bool,
    pub moments_basis: MomentBasis,
}

impl ReproductionLaw {
    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidLaw(format!("{name} must be finite")))
            }
        };
        match *self {
            ReproductionLaw::BinaryGaussian { mu, sigma } => {
                finite(mu, "mu")?;
                finite(sigma, "sigma")?;
                if sigma <= 0.0 {
                    return Err(Error::InvalidLaw("sigma must be positive".into()));
                }
            }
            ReproductionLaw::PoissonGaussian { m, mu, sigma } => {
                finite(m, "m")?;
                finite(mu, "mu")?;
                finite(sigma, "sigma")?;
                if sigma <= 0.0 {
                    return Err(Error::InvalidLaw("sigma must be positive".into()));
                }
                if m <= 1.0 {
                    return Err(Error::InvalidLaw("mean offspring m must exceed 1".into()));
                }
            }
            ReproductionLaw::BinaryDeterministic { a, b } => {
                finite(a, "a")?;
                finite(b, "b")?;
            }
        }
        Ok(())
    }

    pub fn mean_offspring(&self) -> f64 {
        match *self {
            ReproductionLaw::BinaryGaussian { .. } | ReproductionLaw::BinaryDeterministic { .. } => 2.0,
            ReproductionLaw::PoissonGaussian { m, .. } => m,
        }
    }

    /// Standard deviation of a displacement; zero for the deterministic law.
    pub fn sigma(&self) -> f64 {
        match *self {
            ReproductionLaw::BinaryGaussian { sigma, .. } | ReproductionLaw::PoissonGaussian { sigma, .. } => sigma,
            ReproductionLaw::BinaryDeterministic { .. } => 0.0,
        }
    }

    pub fn description(&self) -> String {
        match *self {
            ReproductionLaw::BinaryGaussian { mu, sigma } => {
                format!("binary_gaussian(mu={mu},sigma={sigma})")
            }
            ReproductionLaw::PoissonGaussian { m, mu, sigma } => {
                format!("poisson_gaussian(m={m},mu={mu},sigma={sigma})")
            }
            ReproductionLaw::BinaryDeterministic { a, b } => {
                format!("binary_deterministic(a={a},b={b})")
            }
        }
    }

    /// Appends the children of a particle at `at`.
    #[inline]
    pub(crate) fn push_offspring(&self, at: f64, rng: &mut SimRng, out: &mut Vec<f64>) {
        match *self {
            ReproductionLaw::BinaryGaussian { mu, sigma } => {
                let n = Normal::new(at + mu, sigma).expect("validated law");
                out.push(n.sample(rng));
                out.push(n.sample(rng));
            }
            ReproductionLaw::PoissonGaussian { m, mu, sigma } => {
                let count = Poisson::new(m).expect("validated law").sample(rng) as usize;
                let n = Normal::new(at + mu, sigma).expect("validated law");
                out.extend((0..count).map(|_| n.sample(rng)));
            }
            ReproductionLaw::BinaryDeterministic { a, b } => {
                out.push(at + a);
                out.push(at + b);
            }
        }
    }

    /// Appends children drawn from the size-biased offspring law
    /// `E[<Z, e^{alpha .}> ; Z in .]` and returns the index (within the
    /// appended block) of the spine child, chosen with probability
    /// proportional to `e^{alpha z_j}`. Requires `kappa(alpha) = 0`.
    pub(crate) fn push_size_biased_offspring(
        &self,
        alpha: f64,
        at: f64,
        rng: &mut SimRng,
        out: &mut Vec<f64>,
    ) -> usize {
        match *self {
            ReproductionLaw::BinaryGaussian { mu, sigma } => {
                // Tilting the pair by e^{alpha z_1} + e^{alpha z_2} and picking
                // a child proportionally is the same as picking one child
                // uniformly and tilting only its displacement.
                let spine = rng.random_range(0..2);
                let plain = Normal::new(at + mu, sigma).expect("validated law");
                let tilted = Normal::new(at + mu + alpha * sigma * sigma, sigma).expect("validated law");
                for k in 0..2 {
                    out.push(if k == spine {
                        tilted.sample(rng)
                    } else {
                        plain.sample(rng)
                    });
                }
                spine
            }
            ReproductionLaw::PoissonGaussian { m, mu, sigma } => {
                // Size-biased Poisson count is 1 + Poisson(m).
                let others = Poisson::new(m).expect("validated law").sample(rng) as usize;
                let plain = Normal::new(at + mu, sigma).expect("validated law");
                let tilted = Normal::new(at + mu + alpha * sigma * sigma, sigma).expect("validated law");
                out.push(tilted.sample(rng));
                out.extend((0..others).map(|_| plain.sample(rng)));
                0
            }
            ReproductionLaw::BinaryDeterministic { a, b } => {
                let wa = (alpha * a).exp();
                let wb = (alpha * b).exp();
                out.push(at + a);
                out.push(at + b);
                usize::from(rng.random::<f64>() * (wa + wb) >= wa)
            }
        }
    }

    pub fn sample_offspring(&self, rng: &mut SimRng) -> PointMeasure {
        let mut atoms = Vec::with_capacity(4);
        self.push_offspring(0.0, rng, &mut atoms);
        PointMeasure::from_finite_unsorted(atoms, f64::NEG_INFINITY)
    }

    pub fn kappa(&self, theta: f64) -> f64 {
        match *self {
            ReproductionLaw::BinaryGaussian { mu, sigma } => {
                std::f64::consts::LN_2 + theta * mu + 0.5 * theta * theta * sigma * sigma
            }
            ReproductionLaw::PoissonGaussian { m, mu, sigma } => {
                m.ln() + theta * mu + 0.5 * theta * theta * sigma * sigma
            }
            ReproductionLaw::BinaryDeterministic { a, b } => {
                let hi = a.max(b);
                let lo = a.min(b);
                theta * hi + (1.0 + (theta * (lo - hi)).exp()).ln()
            }
        }
    }

    pub fn kappa_d1(&self, theta: f64) -> f64 {
        match *self {
            ReproductionLaw::BinaryGaussian { mu, sigma } | ReproductionLaw::PoissonGaussian { mu, sigma, .. } => {
                mu + theta * sigma * sigma
            }
            ReproductionLaw::BinaryDeterministic { a, b } => {
                let (wa, wb) = self.det_weights(theta, a, b);
                wa * a + wb * b
            }
        }
    }

    pub fn kappa_d2(&self, theta: f64) -> f64 {
        match *self {
            ReproductionLaw::BinaryGaussian { sigma, .. } | ReproductionLaw::PoissonGaussian { sigma, .. } => {
                sigma * sigma
            }
            ReproductionLaw::BinaryDeterministic { a, b } => {
                let (wa, wb) = self.det_weights(theta, a, b);
                wa * wb * (a - b) * (a - b)
            }
        }
    }

    fn det_weights(&self, theta: f64, a: f64, b: f64) -> (f64, f64) {
        let m = (theta * a).max(theta * b);
        let ea = (theta * a - m).exp();
        let eb = (theta * b - m).exp();
        (ea / (ea + eb), eb / (ea + eb))
    }

    /// Smallest positive root of `kappa`.
    pub fn solve_critical_alpha(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            ReproductionLaw::BinaryGaussian { mu, sigma } => {
                quadratic_smallest_positive_root(0.5 * sigma * sigma, mu, std::f64::consts::LN_2)
            }
            ReproductionLaw::PoissonGaussian { m, mu, sigma } => {
                quadratic_smallest_positive_root(0.5 * sigma * sigma, mu, m.ln())
            }
            ReproductionLaw::BinaryDeterministic { .. } => self.bisect_critical_alpha(),
        }
    }

    /// For a convex `kappa` with `kappa(0) > 0`: locate the minimiser from
    /// the increasing derivative, then bisect on `[0, argmin]`.
    fn bisect_critical_alpha(&self) -> Result<f64> {
        let k0 = self.kappa(0.0);
        if k0 <= 0.0 {
            return Err(Error::NoCriticalRoot(format!("kappa(0) = {k0} <= 0")));
        }
        let mut hi = 1.0;
        while self.kappa_d1(hi) < 0.0 && self.kappa(hi) >= 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NoCriticalRoot("kappa stays positive".into()));
            }
        }
        if self.kappa(hi) >= 0.0 {
            // hi is past the minimiser; refine it.
            let (mut lo, mut up) = (0.0, hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + up);
                if self.kappa_d1(mid) < 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            hi = up;
            if self.kappa(hi) >= 0.0 {
                return Err(Error::NoCriticalRoot(format!(
                    "minimum of kappa is {} > 0",
                    self.kappa(hi)
                )));
            }
        }
        let (mut lo, mut up) = (0.0, hi);
        while up - lo > 1e-12 * up {
            let mid = 0.5 * (lo + up);
            if self.kappa(mid) > 0.0 {
                lo = mid;
            } else {
                up = mid;
            }
        }
        Ok(0.5 * (lo + up))
    }

    pub fn is_lattice(&self) -> bool {
        // Two atoms always lie on a common lattice a Z + b.
        matches!(self, ReproductionLaw::BinaryDeterministic { .. })
    }

    pub fn classify(&self, alpha: f64) -> CriticalityReport {
        let kappa_at_alpha = self.kappa(alpha);
        let mean_offspring = self.mean_offspring();
        let critical = alpha > 0.0 && kappa_at_alpha.abs() <= CRITICAL_TOLERANCE;
        // E sum z e^{alpha z} = kappa'(alpha) e^{kappa(alpha)} for every family.
        let first_moment = self.kappa_d1(alpha) * kappa_at_alpha.exp();
        let case = if self.validate().is_err() || !critical {
            Case::Invalid
        } else if first_moment.abs() <= CRITICAL_TOLERANCE {
            Case::Boundary
        } else if first_moment.abs() <= INDETERMINATE_BAND {
            Case::Indeterminate
        } else if first_moment < 0.0 {
            Case::Regular
        } else {
            Case::Supercritical
        };
        CriticalityReport {
            alpha,
            case,
            kappa_at_alpha,
            mean_offspring,
            a1_ok: critical && mean_offspring > 1.0,
            a3_ok: !self.is_lattice(),
            first_moment,
            // Gaussian displacements have all exponential moments and the
            // deterministic law is bounded, so every log-moment is finite.
            xlogx_moments_ok: true,
            moments_basis: MomentBasis::Analytic,
        }
    }

    /// Monte Carlo estimate of `E sum_j exp(theta z_j)`.
    pub fn mc_exp_moment(&self, theta: f64, draws: usize, key: StreamKey) -> Result<Estimate> {
        let xs = replicate(key, draws, |_, rng| {
            self.sample_offspring(rng).sum_by(|z| (theta * z).exp())
        });
        Estimate::from_samples(&xs)
    }
}

fn quadratic_smallest_positive_root(a: f64, b: f64, c: f64) -> Result<f64> {
    // a t^2 + b t + c = 0 with a > 0.
    let disc = b * b - 4.0 * a * c;
    let scale = (b * b).max((4.0 * a * c).abs()).max(f64::MIN_POSITIVE);
    // A double root is ill-conditioned: one ulp in `b` moves it by ~1e-8,
    // so a discriminant at rounding level is taken to be exactly zero.
    let disc = if disc.abs() <= 1e-13 * scale { 0.0 } else { disc };
    if disc < 0.0 {
        return Err(Error::NoCriticalRoot(format!("discriminant {disc:e} < 0")));
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(q / a);
        roots.push(c / q);
    } else {
        roots.push(-b / (2.0 * a));
    }
    roots
        .into_iter()
        .filter(|&r| r > 0.0 && r.is_finite())
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::NoCriticalRoot("no positive root".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn boundary() -> ReproductionLaw {
        ReproductionLaw::BinaryGaussian {
            mu: -(2.0 * LN_2).sqrt(),
            sigma: 1.0,
        }
    }

    fn regular() -> ReproductionLaw {
        ReproductionLaw::BinaryGaussian {
            mu: -LN_2 - 0.5,
            sigma: 1.0,
        }
    }

    fn lattice() -> ReproductionLaw {
        ReproductionLaw::BinaryDeterministic { a: -LN_2, b: -LN_2 }
    }

    /// Brute-force root finder: scan a fine grid for the first sign change
    /// (or the first touch of zero) and refine by bisection.
    fn scan_first_root(f: impl Fn(f64) -> f64) -> f64 {
        let mut prev = f(1e-9);
        let mut t = 1e-9;
        let step = 1e-4;
        while t < 10.0 {
            let next = f(t + step);
            if prev.signum() != next.signum() || next.abs() < 1e-12 {
                let (mut lo, mut hi) = (t, t + step);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid).signum() == prev.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
            prev = next;
            t += step;
        }
        panic!("no root");
    }

    #[test]
    fn sample_counts() {
        let key = StreamKey::new(1);
        let mut rng = key.stream(0);
        let m = lattice().sample_offspring(&mut rng);
        assert_eq!(m.atoms(), &[-LN_2, -LN_2]);
        for _ in 0..100 {
            assert_eq!(regular().sample_offspring(&mut rng).len(), 2);
        }
    }

    #[test]
    fn poisson_mean_count() {
        let law = ReproductionLaw::PoissonGaussian {
            m: 2.0,
            mu: -1.0,
            sigma: 1.0,
        };
        let counts = replicate(StreamKey::new(5), 10_000, |_, rng| {
            law.sample_offspring(rng).len() as f64
        });
        let est = Estimate::from_samples(&counts).unwrap();
        assert!(est.z_against(2.0) < 3.0, "{est:?}");
    }

    #[test]
    fn kappa_values() {
        assert!(boundary().kappa((2.0 * LN_2).sqrt()).abs() < 1e-15);
        assert!(lattice().kappa(1.0).abs() < 1e-15);
        let law = ReproductionLaw::BinaryGaussian { mu: 0.3, sigma: 2.0 };
        assert!((law.kappa(0.7) - (LN_2 + 0.21 + 0.5 * 0.49 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let laws = [
            regular(),
            boundary(),
            lattice(),
            ReproductionLaw::BinaryDeterministic { a: 0.4, b: -1.3 },
            ReproductionLaw::PoissonGaussian {
                m: 3.0,
                mu: -0.5,
                sigma: 0.7,
            },
        ];
        let h = 1e-5;
        for law in laws {
            for theta in [0.2, 0.9, 1.7, 2.5] {
                let fd1 = (law.kappa(theta + h) - law.kappa(theta - h)) / (2.0 * h);
                let fd2 = (law.kappa_d1(theta + h) - law.kappa_d1(theta - h)) / (2.0 * h);
                assert!((fd1 - law.kappa_d1(theta)).abs() < 1e-6, "{law:?} {theta}");
                assert!((fd2 - law.kappa_d2(theta)).abs() < 1e-6, "{law:?} {theta}");
            }
        }
    }

    #[test]
    fn critical_alpha_examples() {
        let a = boundary().solve_critical_alpha().unwrap();
        assert!((a - 1.177_410_022_515_474_7).abs() < 1e-9, "{a}");
        let a = regular().solve_critical_alpha().unwrap();
        assert!((a - 1.0).abs() < 1e-12, "{a}");
        let a = lattice().solve_critical_alpha().unwrap();
        assert!((a - 1.0).abs() < 1e-11, "{a}");
    }

    #[test]
    fn critical_alpha_matches_brute_force_scan() {
        let laws = [
            regular(),
            ReproductionLaw::PoissonGaussian {
                m: 3.0,
                mu: -2.0,
                sigma: 0.8,
            },
            ReproductionLaw::BinaryDeterministic { a: -0.2, b: -2.0 },
        ];
        for law in laws {
            let expect = scan_first_root(|t| law.kappa(t));
            let got = law.solve_critical_alpha().unwrap();
            assert!((expect - got).abs() < 1e-8, "{law:?}: {expect} vs {got}");
        }
    }

    #[test]
    fn no_root_reported() {
        let law = ReproductionLaw::BinaryGaussian { mu: 1.0, sigma: 1.0 };
        assert!(matches!(law.solve_critical_alpha(), Err(Error::NoCriticalRoot(_))));
        let law = ReproductionLaw::BinaryDeterministic { a: 0.0, b: -1.0 };
        assert!(law.solve_critical_alpha().is_err());
    }

    #[test]
    fn classification_examples() {
        let law = boundary();
        let r = law.classify(law.solve_critical_alpha().unwrap());
        assert_eq!(r.case, Case::Boundary);
        assert!(r.first_moment.abs() <= 1e-9);
        assert!(r.a1_ok && r.a3_ok);

        let r = regular().classify(1.0);
        assert_eq!(r.case, Case::Regular);
        assert!((r.first_moment - (0.5 - LN_2)).abs() < 1e-12);

        let r = lattice().classify(1.0);
        assert!(!r.a3_ok);

        let r = regular().classify(0.5);
        assert_eq!(r.case, Case::Invalid);
    }

    #[test]
    fn smallest_root_is_never_supercritical() {
        for mu in [-3.0, -2.0, -1.5, -1.2, -1.1774] {
            for sigma in [0.5, 1.0] {
                let law = ReproductionLaw::BinaryGaussian { mu, sigma };
                if let Ok(a) = law.solve_critical_alpha() {
                    assert_ne!(law.classify(a).case, Case::Supercritical, "{law:?}");
                }
            }
        }
    }

    #[test]
    fn json_law_spec() {
        let law: ReproductionLaw =
            serde_json::from_str(r#"{"family":"binary_gaussian","mu":-1.0,"sigma":1.0}"#).unwrap();
        assert_eq!(law, ReproductionLaw::BinaryGaussian { mu: -1.0, sigma: 1.0 });
        let law: ReproductionLaw =
            serde_json::from_str(r#"{"family":"poisson_gaussian","m":2,"mu":-1,"sigma":1}"#).unwrap();
        assert_eq!(law.mean_offspring(), 2.0);
        assert!(serde_json::from_str::<ReproductionLaw>(r#"{"family":"nope"}"#).is_err());
    }
}
