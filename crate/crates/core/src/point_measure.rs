//! Finite point measures on the real line.
//!
//! A [`PointMeasure`] stores its atoms ranked in non-increasing order together
//! with a floor: atoms strictly below the floor were discarded when the
//! measure was built, so the measure is exact on `[floor, inf)` only. A floor
//! of `-inf` means nothing was discarded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::test_function::TestFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPointMeasure", into = "RawPointMeasure")]
pub struct PointMeasure {
    atoms: Vec<f64>,
    floor: f64,
}

/// JSON form: `{"atoms": [...], "floor": x}` with `null` for `-inf`.
#[derive(Serialize, Deserialize)]
struct RawPointMeasure {
    atoms: Vec<f64>,
    #[serde(default)]
    floor: Option<f64>,
}

impl TryFrom<RawPointMeasure> for PointMeasure {
    type Error = Error;

    fn try_from(raw: RawPointMeasure) -> Result<Self> {
        PointMeasure::from_atoms(raw.atoms, raw.floor.unwrap_or(f64::NEG_INFINITY))
    }
}

impl From<PointMeasure> for RawPointMeasure {
    fn from(m: PointMeasure) -> Self {
        let floor = (m.floor > f64::NEG_INFINITY).then_some(m.floor);
        RawPointMeasure { atoms: m.atoms, floor }
    }
}

impl Default for PointMeasure {
    fn default() -> Self {
        PointMeasure::null()
    }
}

impl PointMeasure {
    /// Ranks `positions`, dropping those below `floor`. A `-inf` position is
    /// an absent atom and is dropped too.
    pub fn from_atoms(positions: impl Into<Vec<f64>>, floor: f64) -> Result<Self> {
        if floor.is_nan() || floor == f64::INFINITY {
            return Err(Error::InvalidArgument(format!("invalid floor {floor}")));
        }
        let mut atoms = positions.into();
        if let Some(&bad) = atoms.iter().find(|x| x.is_nan() || **x == f64::INFINITY) {
            return Err(Error::NonFiniteAtom(bad));
        }
        atoms.retain(|&x| x >= floor && x > f64::NEG_INFINITY);
        atoms.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(PointMeasure { atoms, floor })
    }

    /// Builds from positions already known to be finite; used on hot paths.
    pub(crate) fn from_finite_unsorted(mut atoms: Vec<f64>, floor: f64) -> Self {
        debug_assert!(atoms.iter().all(|x| x.is_finite()));
        if floor > f64::NEG_INFINITY {
            atoms.retain(|&x| x >= floor);
        }
        atoms.sort_unstable_by(|a, b| b.total_cmp(a));
        PointMeasure { atoms, floor }
    }

    pub fn null() -> Self {
        PointMeasure {
            atoms: Vec::new(),
            floor: f64::NEG_INFINITY,
        }
    }

    pub fn dirac(x: f64) -> Self {
        PointMeasure {
            atoms: vec![x],
            floor: f64::NEG_INFINITY,
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<f64> {
        self.atoms
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn translate(&self, y: f64) -> PointMeasure {
        PointMeasure {
            atoms: self.atoms.iter().map(|x| x + y).collect(),
            floor: self.floor + y,
        }
    }

    /// Raises the floor, discarding atoms below the new value.
    pub fn truncate(&self, floor: f64) -> PointMeasure {
        if floor <= self.floor {
            return self.clone();
        }
        let keep = self.atoms.partition_point(|&x| x >= floor);
        PointMeasure {
            atoms: self.atoms[..keep].to_vec(),
            floor,
        }
    }

    /// Largest atom, or `-inf` for the null measure.
    pub fn max_atom(&self) -> f64 {
        self.atoms.first().copied().unwrap_or(f64::NEG_INFINITY)
    }

    fn check_exact_above(&self, x: f64) -> Result<()> {
        if x < self.floor {
            Err(Error::Truncation {
                needed: x,
                floor: self.floor,
            })
        } else {
            Ok(())
        }
    }

    /// `<D, phi>`. Fails when `phi` reaches below the floor.
    pub fn integrate(&self, phi: &TestFunction) -> Result<f64> {
        self.check_exact_above(phi.left_edge())?;
        Ok(self.integrate_unchecked(phi))
    }

    pub(crate) fn integrate_unchecked(&self, phi: &TestFunction) -> f64 {
        let a = phi.left_edge();
        let right = phi.right_edge();
        // Atoms are ranked, so the support scan stops at the left edge.
        self.atoms
            .iter()
            .take_while(|&&x| x >= a)
            .filter(|&&x| x <= right)
            .map(|&x| phi.eval(x))
            .sum()
    }

    /// `sum_j f(x_j)` over all stored atoms, with no truncation check.
    pub fn sum_by(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&x| f(x)).sum()
    }

    /// `D((x, inf))`.
    pub fn tail_count(&self, x: f64) -> Result<usize> {
        self.check_exact_above(x)?;
        Ok(self.atoms.partition_point(|&a| a > x))
    }

    /// CSV row form `floor,atom1,atom2,...`.
    pub fn to_csv_fields(&self) -> Vec<String> {
        std::iter::once(self.floor)
            .chain(self.atoms.iter().copied())
            .map(|x| x.to_string())
            .collect()
    }

    pub fn from_csv_fields<'a>(fields: impl IntoIterator<Item = &'a str>) -> Result<PointMeasure> {
        let mut it = fields.into_iter();
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
        };
        let floor = parse(it.next().ok_or(Error::EmptySample)?)?;
        let atoms = it
            .filter(|s| !s.trim().is_empty())
            .map(parse)
            .collect::<Result<Vec<_>>>()?;
        PointMeasure::from_atoms(atoms, floor)
    }
}
