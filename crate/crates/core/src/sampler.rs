//! Imbalanced subclass subsampling and balanced test materialization.
//!
//! Selected subclasses keep `s_s = ⌈f·γ_D / (f·γ_s + γ_r)⌉` samples and the
//! others `s_r = ⌊γ_D / (f·γ_s + γ_r)⌋`, evaluated in exact rational arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::topology::{self, GroupedDatasetSpec, LabeledDataset};

const MAX_DECIMALS: usize = 20;

/// A fraction in `[0, 1]` held as an exact rational.
///
/// Built from a float through its shortest decimal representation, so `0.2`
/// is exactly `1/5` rather than the nearest binary double.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fraction(Ratio<i128>);

impl Fraction {
    pub const ZERO: Fraction = Fraction(Ratio::new_raw(0, 1));
    pub const ONE: Fraction = Fraction(Ratio::new_raw(1, 1));

    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 || numer > denom {
            return Err(Error::invalid("f", format!("{numer}/{denom} is not in [0, 1]")));
        }
        Ok(Fraction(Ratio::new(numer.into(), denom.into())))
    }

    pub fn from_f64(f: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::invalid("f", format!("{f} is not in [0, 1]")));
        }
        let text = format!("{f}");
        let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
        if frac.len() > MAX_DECIMALS {
            return Err(Error::invalid(
                "f",
                format!("{f} needs more than {MAX_DECIMALS} decimal digits"),
            ));
        }
        let digits: i128 = format!("{int}{frac}")
            .parse()
            .map_err(|_| Error::invalid("f", format!("cannot read {f} as a decimal")))?;
        Ok(Fraction(Ratio::new(digits, 10i128.pow(frac.len() as u32))))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer() as u64
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom() as u64
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn is_zero(&self) -> bool {
        *self.0.numer() == 0
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = f64::deserialize(d)?;
        Fraction::from_f64(f).map_err(serde::de::Error::custom)
    }
}

/// Per-subclass sample counts `(s_s, s_r)` for subsampled and remaining subclasses.
pub fn subsample_counts(f: Fraction, gamma_d: u64, gamma_s: u64, gamma_r: u64) -> Result<(u64, u64)> {
    if gamma_d == 0 {
        return Err(Error::invalid("gamma_D", "must be at least 1"));
    }
    let f = f.0;
    let denom = f * Ratio::from(i128::from(gamma_s)) + Ratio::from(i128::from(gamma_r));
    if denom == Ratio::from(0) {
        return Err(Error::invalid(
            "gamma_r",
            "f·gamma_s + gamma_r must be positive (no subclass would receive samples)",
        ));
    }
    let total = Ratio::from(i128::from(gamma_d));
    let s_s = (f * total / denom).ceil().to_integer();
    let s_r = (total / denom).floor().to_integer();
    Ok((s_s as u64, s_r as u64))
}

/// Which subclasses receive the reduced count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsampleSelector {
    /// No subclass is subsampled (balanced sampling).
    None,
    /// The last subclass of every class.
    OnePerClass,
    /// Explicit subclass ids.
    Subclasses(Vec<usize>),
}

impl SubsampleSelector {
    pub fn resolve(&self, spec: &GroupedDatasetSpec) -> Result<BTreeSet<usize>> {
        let m = spec.num_subclasses();
        match self {
            SubsampleSelector::None => Ok(BTreeSet::new()),
            SubsampleSelector::OnePerClass => Ok((0..spec.num_classes())
                .map(|c| spec.subclass_ids_of(c).end - 1)
                .collect()),
            SubsampleSelector::Subclasses(ids) => {
                if let Some(&bad) = ids.iter().find(|&&k| k >= m) {
                    return Err(Error::UnknownSubclass(bad as u32));
                }
                Ok(ids.iter().copied().collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPlan {
    pub f: Fraction,
    #[serde(rename = "gamma_D")]
    pub gamma_d: u64,
    #[serde(rename = "subsampled_subclasses")]
    pub subsampled: BTreeSet<usize>,
    #[serde(rename = "remaining_subclasses")]
    pub remaining: BTreeSet<usize>,
    pub s_s: u64,
    pub s_r: u64,
}

impl ShiftPlan {
    pub fn new(spec: &GroupedDatasetSpec, f: Fraction, gamma_d: u64, selector: &SubsampleSelector) -> Result<Self> {
        let subsampled = selector.resolve(spec)?;
        let remaining: BTreeSet<usize> = (0..spec.num_subclasses()).filter(|k| !subsampled.contains(k)).collect();
        let (s_s, s_r) = subsample_counts(f, gamma_d, subsampled.len() as u64, remaining.len() as u64)?;
        Ok(ShiftPlan {
            f,
            gamma_d,
            subsampled,
            remaining,
            s_s,
            s_r,
        })
    }

    pub fn gamma_s(&self) -> usize {
        self.subsampled.len()
    }

    pub fn gamma_r(&self) -> usize {
        self.remaining.len()
    }

    /// Planned count of every subclass.
    pub fn counts(&self) -> BTreeMap<usize, usize> {
        self.subsampled
            .iter()
            .map(|&k| (k, self.s_s as usize))
            .chain(self.remaining.iter().map(|&k| (k, self.s_r as usize)))
            .collect()
    }

    fn check_against(&self, spec: &GroupedDatasetSpec) -> Result<()> {
        let m = spec.num_subclasses();
        if let Some(k) = self.subsampled.intersection(&self.remaining).next() {
            return Err(Error::PlanMismatch(format!(
                "subclass {k} is both subsampled and remaining"
            )));
        }
        let covered: BTreeSet<usize> = self.subsampled.union(&self.remaining).copied().collect();
        let expected: BTreeSet<usize> = (0..m).collect();
        if covered != expected {
            return Err(Error::PlanMismatch(format!(
                "plan covers {:?}, spec has subclasses 0..{m}",
                covered
            )));
        }
        Ok(())
    }
}

pub fn make_train_set(spec: &GroupedDatasetSpec, plan: &ShiftPlan, seed: u64) -> Result<LabeledDataset> {
    plan.check_against(spec)?;
    topology::realize(spec, &plan.counts(), seed)
}

/// `total` points spread evenly over every subclass; the remainder goes one
/// each to the lowest subclass ids.
pub fn make_test_set(spec: &GroupedDatasetSpec, total: usize, seed: u64) -> Result<LabeledDataset> {
    topology::realize(spec, &balanced_counts(spec.num_subclasses(), total), seed)
}

pub fn balanced_counts(m: usize, total: usize) -> BTreeMap<usize, usize> {
    if m == 0 {
        return BTreeMap::new();
    }
    let base = total / m;
    let extra = total % m;
    (0..m).map(|k| (k, base + usize::from(k < extra))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_equidistant_spec;

    fn frac(f: f64) -> Fraction {
        Fraction::from_f64(f).unwrap()
    }

    #[test]
    fn worked_example() {
        assert_eq!(subsample_counts(frac(0.2), 2000, 4, 4).unwrap(), (84, 416));
        assert_eq!(subsample_counts(frac(0.0), 2000, 4, 4).unwrap(), (0, 500));
        assert_eq!(subsample_counts(frac(1.0), 2000, 4, 4).unwrap(), (250, 250));
        assert_eq!(subsample_counts(frac(0.05), 4000, 4, 4).unwrap(), (48, 952));
    }

    #[test]
    fn decimal_fractions_are_exact() {
        assert_eq!(frac(0.2), Fraction::new(1, 5).unwrap());
        assert_eq!(frac(0.01), Fraction::new(1, 100).unwrap());
        // 0.2·2400/4.8 is exactly 100; a binary 0.2 would round up to 101
        assert_eq!(subsample_counts(frac(0.2), 2400, 4, 4).unwrap(), (100, 500));
    }

    #[test]
    fn domain_errors() {
        assert!(Fraction::from_f64(-0.1).is_err());
        assert!(Fraction::from_f64(1.5).is_err());
        assert!(Fraction::from_f64(f64::NAN).is_err());
        assert!(Fraction::new(3, 2).is_err());
        assert!(subsample_counts(frac(0.0), 100, 4, 0).is_err());
        assert!(subsample_counts(frac(0.5), 0, 4, 4).is_err());
        assert!(subsample_counts(frac(0.5), 100, 4, 0).is_ok());
    }

    #[test]
    fn train_set_histogram() {
        let spec = build_equidistant_spec(9, 13, 0.25, 0).unwrap();
        let plan = ShiftPlan::new(&spec, frac(0.2), 2000, &SubsampleSelector::OnePerClass).unwrap();
        assert_eq!(plan.subsampled, [1, 3, 5, 7].into());
        let train = make_train_set(&spec, &plan, 1).unwrap();
        assert_eq!(train.len(), 4 * 84 + 4 * 416);
        assert_eq!(train.subclass_histogram(), vec![416, 84, 416, 84, 416, 84, 416, 84]);

        let plan0 = ShiftPlan::new(&spec, frac(0.0), 2000, &SubsampleSelector::OnePerClass).unwrap();
        let train0 = make_train_set(&spec, &plan0, 1).unwrap();
        assert!(train0.subclasses.iter().all(|s| s % 2 == 0));
    }

    #[test]
    fn mismatched_plan_rejected() {
        let spec = build_equidistant_spec(9, 13, 0.25, 0).unwrap();
        let mut plan = ShiftPlan::new(&spec, frac(0.2), 2000, &SubsampleSelector::OnePerClass).unwrap();
        plan.remaining.remove(&0);
        assert!(matches!(make_train_set(&spec, &plan, 1), Err(Error::PlanMismatch(_))));
        plan.remaining.insert(1);
        assert!(matches!(make_train_set(&spec, &plan, 1), Err(Error::PlanMismatch(_))));
        assert!(ShiftPlan::new(&spec, frac(0.2), 2000, &SubsampleSelector::Subclasses(vec![8])).is_err());
    }

    #[test]
    fn test_set_balance() {
        let spec = build_equidistant_spec(9, 13, 0.25, 0).unwrap();
        let test = make_test_set(&spec, 10_000, 2).unwrap();
        assert_eq!(test.subclass_histogram(), vec![1250; 8]);
        assert!(make_test_set(&spec, 0, 2).unwrap().is_empty());
        let odd = make_test_set(&spec, 11, 2).unwrap();
        assert_eq!(odd.subclass_histogram(), vec![2, 2, 2, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn plan_json_keys() {
        let spec = build_equidistant_spec(9, 13, 0.25, 0).unwrap();
        let plan = ShiftPlan::new(&spec, frac(0.2), 2000, &SubsampleSelector::OnePerClass).unwrap();
        let v = serde_json::to_value(&plan).unwrap();
        assert_eq!(v["f"], 0.2);
        assert_eq!(v["gamma_D"], 2000);
        assert_eq!(v["subsampled_subclasses"], serde_json::json!([1, 3, 5, 7]));
        let back: ShiftPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, plan);
    }
}
