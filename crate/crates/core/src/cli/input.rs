//! Parsing of the textual specs accepted on the command line.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::branching::MeasureSampler;
use crate::error::{Error, Result};
use crate::martingale::{ShiftSampler, DEFAULT_MIN_GENERATIONS};
use crate::point_measure::PointMeasure;
use crate::reproduction::{Case, ReproductionLaw};
use crate::sdppp::{cox_sampler, sample_ppp_exponential, sdppp_sampler, DecorationLaw, MixtureSpec};

/// Inline JSON if the text starts with `{`, otherwise a path to a JSON file.
fn json_text(spec: &str, base: &Path) -> Result<String> {
    let trimmed = spec.trim();
    if trimmed.starts_with('{') {
        return Ok(trimmed.to_string());
    }
    let path = resolve(base, trimmed);
    std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn resolve(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn parse_law(spec: &str, base: &Path) -> Result<ReproductionLaw> {
    let text = json_text(spec, base)?;
    let law: ReproductionLaw =
        serde_json::from_str(&text).map_err(|e| Error::InvalidLaw(format!("{e} in {text:?}")))?;
    law.validate()?;
    Ok(law)
}

/// `auto` solves for the critical exponent of `law`.
pub fn parse_alpha(spec: &str, law: &ReproductionLaw) -> Result<f64> {
    if spec.trim() == "auto" {
        return law.solve_critical_alpha();
    }
    let alpha: f64 = spec
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("alpha must be a number or `auto`, got {spec:?}")))?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha {alpha} must be positive")));
    }
    Ok(alpha)
}

/// Checks a requested case (`auto`, `regular` or `boundary`) against the
/// classification of `law` at `alpha`.
pub fn check_case(spec: &str, law: &ReproductionLaw, alpha: f64) -> Result<Case> {
    let found = law.classify(alpha).case;
    let expected = match spec.trim() {
        "auto" => return Ok(found),
        "regular" => Case::Regular,
        "boundary" => Case::Boundary,
        other => return Err(Error::Config(format!("unknown case {other:?}"))),
    };
    if found != expected {
        return Err(Error::WrongCase {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(found)
}

/// Martingale shift of `law` at its critical exponent.
pub fn martingale_shift(law: ReproductionLaw, generations: usize, case: &str) -> Result<ShiftSampler> {
    let alpha = law.solve_critical_alpha()?;
    check_case(case, &law, alpha)?;
    ShiftSampler::martingale(law, alpha, generations, DEFAULT_MIN_GENERATIONS)
}

/// `const:v` or `martingale:<law>,n,case`; the law may itself contain
/// commas, so the last two fields are split off from the right.
pub fn parse_shift(spec: &str, base: &Path) -> Result<ShiftSampler> {
    if let Some(v) = spec.strip_prefix("const:") {
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad constant shift {v:?}")))?;
        return ShiftSampler::constant(value).map_err(|e| Error::Config(e.to_string()));
    }
    if let Some(rest) = spec.strip_prefix("martingale:") {
        let mut parts = rest.rsplitn(3, ',');
        let (case, n, law) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(n), Some(l)) => (c, n, l),
            _ => return Err(Error::Config(format!("expected martingale:<law>,n,case, got {spec:?}"))),
        };
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad generation count {n:?}")))?;
        return martingale_shift(parse_law(law, base)?, n, case);
    }
    Err(Error::Config(format!(
        "shift must be const:v or martingale:<law>,n,case, got {spec:?}"
    )))
}

/// Mixture decoration from inline JSON or a file; `None` is the Dirac
/// decoration at 0.
pub fn parse_decoration(spec: Option<&str>, base: &Path) -> Result<DecorationLaw> {
    let Some(spec) = spec else {
        return Ok(DecorationLaw::dirac());
    };
    let text = json_text(spec, base)?;
    let mixture: MixtureSpec = serde_json::from_str(&text).map_err(|e| Error::Config(format!("decoration: {e}")))?;
    let law = DecorationLaw::from_spec(&mixture)?;
    if !law.is_normalized() {
        return Err(Error::UnnormalizedDecoration);
    }
    Ok(law)
}

/// Point measures stored one per row as `replicate,floor,atoms...`.
pub fn read_measures(path: &Path) -> Result<Vec<PointMeasure>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        out.push(PointMeasure::from_csv_fields(row.iter().skip(1))?);
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{} holds no samples", path.display())));
    }
    Ok(out)
}

/// Uniform resampling, with replacement, of stored draws; exact only above
/// the highest stored floor.
pub fn file_sampler(path: &Path) -> Result<MeasureSampler> {
    let rows = read_measures(path)?;
    let floor = rows.iter().map(PointMeasure::floor).fold(f64::NEG_INFINITY, f64::max);
    let description = format!("file:{} ({} draws)", path.display(), rows.len());
    Ok(MeasureSampler::new(description, floor, f64::INFINITY, move |rng| {
        Ok(rows[rng.random_range(0..rows.len())].clone())
    }))
}

/// The resolved target of an experiment.
pub enum Target {
    Cox,
    Sdppp(DecorationLaw),
    File(PathBuf),
    Ppp(f64),
}

pub fn parse_target(spec: &str, base: &Path) -> Result<Target> {
    match spec.split_once(':') {
        None if spec == "cox" => Ok(Target::Cox),
        Some(("sdppp", deco)) => Ok(Target::Sdppp(parse_decoration(Some(deco), base)?)),
        Some(("file", path)) => Ok(Target::File(resolve(base, path))),
        Some(("ppp", rate)) => {
            let rate: f64 = rate
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad PPP rate {rate:?}")))?;
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::Config(format!("PPP rate {rate} must be positive")));
            }
            Ok(Target::Ppp(rate))
        }
        _ => Err(Error::Config(format!(
            "target must be cox, sdppp:<decoration>, file:<csv> or ppp:<rate>, got {spec:?}"
        ))),
    }
}

impl Target {
    /// Sampler exact on `[floor, inf)`; `shift` and `alpha` are used by the
    /// Cox and SDPPP targets.
    pub fn sampler(&self, shift: &ShiftSampler, alpha: f64, floor: f64) -> Result<MeasureSampler> {
        match self {
            Target::Cox => Ok(cox_sampler(shift.clone(), alpha, floor)),
            Target::Sdppp(deco) => sdppp_sampler(shift.clone(), alpha, deco.clone(), floor),
            Target::File(path) => file_sampler(path),
            &Target::Ppp(rate) => Ok(MeasureSampler::new(
                format!("ppp(rate {rate})"),
                floor,
                f64::INFINITY,
                move |rng| sample_ppp_exponential(rate, floor, rng),
            )),
        }
    }

    pub fn needs_shift(&self) -> bool {
        matches!(self, Target::Cox | Target::Sdppp(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAW: &str = r#"{"family":"binary_gaussian","mu":-1.1931471805599454,"sigma":1.0}"#;

    #[test]
    fn shift_spec_with_commas_in_law() {
        let s = parse_shift(&format!("martingale:{LAW},12,regular"), Path::new(".")).unwrap();
        assert_eq!(s.case(), Some(Case::Regular));
        assert_eq!(s.generations_used(), 12);
        assert!(parse_shift(&format!("martingale:{LAW},12,boundary"), Path::new(".")).is_err());
        assert!(parse_shift("const:-1", Path::new(".")).is_err());
    }

    #[test]
    fn malformed_law_is_invalid() {
        assert!(matches!(
            parse_law("{\"family\":\"nope\"}", Path::new(".")),
            Err(Error::InvalidLaw(_))
        ));
        assert!(matches!(
            parse_law(r#"{"family":"binary_gaussian","mu":0,"sigma":-1}"#, Path::new(".")),
            Err(Error::InvalidLaw(_))
        ));
    }

    #[test]
    fn alpha_auto_and_numeric() {
        let law = parse_law(LAW, Path::new(".")).unwrap();
        assert!((parse_alpha("auto", &law).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(parse_alpha("0.5", &law).unwrap(), 0.5);
        assert!(parse_alpha("-1", &law).is_err());
    }

    #[test]
    fn targets() {
        assert!(matches!(parse_target("cox", Path::new(".")), Ok(Target::Cox)));
        assert!(matches!(parse_target("ppp:0.5", Path::new(".")), Ok(Target::Ppp(r)) if r == 0.5));
        let deco = r#"sdppp:{"mixture":[{"p":1.0,"atoms":[0,-1]}]}"#;
        assert!(matches!(parse_target(deco, Path::new(".")), Ok(Target::Sdppp(_))));
        let shifted = r#"sdppp:{"mixture":[{"p":1.0,"atoms":[1,-1]}]}"#;
        assert!(matches!(
            parse_target(shifted, Path::new(".")),
            Err(Error::UnnormalizedDecoration)
        ));
        assert!(parse_target("poisson", Path::new(".")).is_err());
    }
}
