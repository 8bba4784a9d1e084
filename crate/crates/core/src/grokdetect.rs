//! Threshold-based detection of delayed generalization on accuracy curves.
//!
//! Given a training curve `T_R` and a test curve `T_E` sampled at the same
//! epochs:
//!
//! - `alpha0` is the first recording where train accuracy reaches `tau` and
//!   stays there for the next `window` recordings;
//! - the train limit is the mean train accuracy over the final `window`
//!   recordings and `sigma_E = limit − margin` is the floor of the high region;
//! - `sigma_S` is the best test accuracy seen at or before `alpha0`;
//! - `alpha1` is the first recording after `alpha0` with test accuracy at or
//!   above `sigma_E`, and the support is how long it stays there.
//!
//! A run grokked when the jump is large (`sigma_E − sigma_S ≥ min_separation`)
//! and the support outlasts the transition by `support_ratio`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::MetricCurve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Train accuracy regarded as converged.
    pub tau: f64,
    /// Recordings the train accuracy must hold `tau` for.
    pub window: usize,
    /// Distance of `sigma_E` below the train limit.
    pub margin: f64,
    pub min_separation: f64,
    pub support_ratio: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            tau: 0.99,
            window: 50,
            margin: 0.05,
            min_separation: 0.2,
            support_ratio: 5.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", format!("must be in (0, 1], got {}", self.tau)));
        }
        if self.window == 0 {
            return Err(Error::invalid("window", "must be at least 1"));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::invalid(
                "margin",
                format!("must be positive, got {}", self.margin),
            ));
        }
        if !(self.min_separation > 0.0 && self.min_separation.is_finite()) {
            return Err(Error::invalid(
                "min_separation",
                format!("must be positive, got {}", self.min_separation),
            ));
        }
        if !(self.support_ratio >= 1.0 && self.support_ratio.is_finite()) {
            return Err(Error::invalid(
                "support_ratio",
                format!("must be at least 1, got {}", self.support_ratio),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Grokked,
    TrainNotConverged,
    NoTransition,
    InsufficientGap,
    ShortSupport,
}

impl Reason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reason::Grokked => "grokked",
            Reason::TrainNotConverged => "train-not-converged",
            Reason::NoTransition => "no-transition",
            Reason::InsufficientGap => "insufficient-gap",
            Reason::ShortSupport => "short-support",
        }
    }
}

impl std::fmt::Display for Reason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrokkingReport {
    pub alpha0: Option<usize>,
    pub alpha1: Option<usize>,
    pub train_limit: f64,
    /// NaN (`null` in JSON) when the train curve never converged.
    #[serde(rename = "sigma_S", with = "nan_as_null")]
    pub sigma_s: f64,
    #[serde(rename = "sigma_E")]
    pub sigma_e: f64,
    #[serde(rename = "delta_S", with = "nan_as_null")]
    pub delta_s: f64,
    #[serde(rename = "delta_T")]
    pub delta_t: f64,
    pub support: Option<usize>,
    /// The support span was still open when the curve ended.
    pub censored: bool,
    pub grokked: bool,
    pub reason: Reason,
    pub final_test_accuracy: f64,
    pub params: DetectorParams,
}

impl GrokkingReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Mean train accuracy over the final `window` recordings.
pub fn train_limit(curve: &MetricCurve, params: &DetectorParams) -> f64 {
    let n = curve.len();
    let tail = &curve.train_accuracy[n.saturating_sub(params.window)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

/// Position of the first recording where train accuracy is at least `tau` and
/// remains so for the following `window` recordings (or until the curve ends).
pub fn find_alpha0_index(curve: &MetricCurve, params: &DetectorParams) -> Option<usize> {
    let acc = &curve.train_accuracy;
    let n = acc.len();
    // run[i]: how many consecutive recordings starting at i are ≥ tau
    let mut run = vec![0usize; n + 1];
    for i in (0..n).rev() {
        run[i] = if acc[i] >= params.tau { run[i + 1] + 1 } else { 0 };
    }
    (0..n).find(|&i| {
        let needed = (params.window + 1).min(n - i);
        run[i] >= needed
    })
}

pub fn find_alpha0(curve: &MetricCurve, params: &DetectorParams) -> Option<usize> {
    find_alpha0_index(curve, params).map(|i| curve.epochs[i])
}

pub fn detect(curve: &MetricCurve, params: &DetectorParams) -> Result<GrokkingReport> {
    params.validate()?;
    if curve.is_empty() {
        return Err(Error::invalid("curve", "must contain at least one recording"));
    }
    if curve.test_accuracy.len() != curve.len() || curve.train_accuracy.len() != curve.len() {
        return Err(Error::format("metric curve", "series lengths differ"));
    }
    let limit = train_limit(curve, params);
    let sigma_e = limit - params.margin;
    let final_test_accuracy = *curve.test_accuracy.last().expect("non-empty");
    let base = GrokkingReport {
        alpha0: None,
        alpha1: None,
        train_limit: limit,
        sigma_s: f64::NAN,
        sigma_e,
        delta_s: f64::NAN,
        delta_t: limit - sigma_e,
        support: None,
        censored: false,
        grokked: false,
        reason: Reason::TrainNotConverged,
        final_test_accuracy,
        params: *params,
    };
    let Some(i0) = find_alpha0_index(curve, params) else {
        return Ok(base);
    };
    let alpha0 = curve.epochs[i0];
    let sigma_s = curve.test_accuracy[..=i0]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let delta_s = sigma_e - sigma_s;
    let mut report = GrokkingReport {
        alpha0: Some(alpha0),
        sigma_s,
        delta_s,
        reason: Reason::NoTransition,
        ..base
    };
    let Some(i1) = (i0 + 1..curve.len()).find(|&i| curve.test_accuracy[i] >= sigma_e) else {
        return Ok(report);
    };
    let alpha1 = curve.epochs[i1];
    let end = (i1..curve.len()).find(|&i| curve.test_accuracy[i] < sigma_e);
    let (support, censored) = match end {
        Some(i) => (curve.epochs[i] - alpha1, false),
        None => (curve.epochs[curve.len() - 1] - alpha1, true),
    };
    report.alpha1 = Some(alpha1);
    report.support = Some(support);
    report.censored = censored;
    let transition = (alpha1 - alpha0) as f64;
    report.reason = if delta_s < params.min_separation {
        Reason::InsufficientGap
    } else if (support as f64) < params.support_ratio * transition {
        Reason::ShortSupport
    } else {
        Reason::Grokked
    };
    report.grokked = report.reason == Reason::Grokked;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// Population mean and standard deviation; `None` for an empty input.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        // shifted by the first value so identical inputs give exactly zero spread
        let shift = values[0];
        let offset = values.iter().map(|v| v - shift).sum::<f64>() / n;
        let var = values
            .iter()
            .map(|v| (v - shift - offset) * (v - shift - offset))
            .sum::<f64>()
            / n;
        Some(MeanStd {
            mean: shift + offset,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub grokked: usize,
    pub grokking_rate: f64,
    #[serde(rename = "delta_S")]
    pub delta_s: Option<MeanStd>,
    #[serde(rename = "sigma_S")]
    pub sigma_s: Option<MeanStd>,
    pub alpha0: Option<MeanStd>,
    pub alpha1: Option<MeanStd>,
    pub final_test_accuracy: Option<MeanStd>,
    pub reasons: std::collections::BTreeMap<Reason, usize>,
}

pub fn aggregate(reports: &[GrokkingReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::invalid("reports", "need at least one report"));
    }
    let defined = |f: &dyn Fn(&GrokkingReport) -> Option<f64>| -> Option<MeanStd> {
        let vals: Vec<f64> = reports.iter().filter_map(f).filter(|v| v.is_finite()).collect();
        MeanStd::of(&vals)
    };
    let grokked = reports.iter().filter(|r| r.grokked).count();
    let mut reasons = std::collections::BTreeMap::new();
    for r in reports {
        *reasons.entry(r.reason).or_insert(0) += 1;
    }
    Ok(Aggregate {
        runs: reports.len(),
        grokked,
        grokking_rate: grokked as f64 / reports.len() as f64,
        delta_s: defined(&|r| r.alpha0.map(|_| r.delta_s)),
        sigma_s: defined(&|r| r.alpha0.map(|_| r.sigma_s)),
        alpha0: defined(&|r| r.alpha0.map(|a| a as f64)),
        alpha1: defined(&|r| r.alpha1.map(|a| a as f64)),
        final_test_accuracy: defined(&|r| Some(r.final_test_accuracy)),
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Recording;

    pub(crate) fn curve_from(
        epochs: &[usize],
        train: impl Fn(usize) -> f64,
        test: impl Fn(usize) -> f64,
    ) -> MetricCurve {
        let mut c = MetricCurve::default();
        for &e in epochs {
            c.push(Recording {
                epoch: e,
                train_loss: 0.0,
                train_accuracy: train(e),
                test_loss: 0.0,
                test_accuracy: test(e),
                subclass_accuracy: vec![],
            });
        }
        c
    }

    fn every(step: usize, last: usize) -> Vec<usize> {
        (0..=last).step_by(step).collect()
    }

    #[test]
    fn alpha0_constant_train() {
        let c = curve_from(&every(10, 1000), |_| 1.0, |_| 0.5);
        assert_eq!(find_alpha0(&c, &DetectorParams::default()), Some(0));
    }

    #[test]
    fn alpha0_linear_ramp() {
        let c = curve_from(&every(10, 3000), |e| (e as f64 / 1000.0).min(1.0), |_| 0.5);
        assert_eq!(find_alpha0(&c, &DetectorParams::default()), Some(990));
    }

    #[test]
    fn alpha0_absent_when_oscillating() {
        let c = curve_from(
            &every(10, 3000),
            |e| if (e / 10) % 2 == 0 { 0.9 } else { 0.95 },
            |_| 0.5,
        );
        assert_eq!(find_alpha0(&c, &DetectorParams::default()), None);
        let r = detect(&c, &DetectorParams::default()).unwrap();
        assert!(!r.grokked);
        assert_eq!(r.reason, Reason::TrainNotConverged);
    }

    #[test]
    fn empty_curve_and_bad_params_are_errors() {
        assert!(detect(&MetricCurve::default(), &DetectorParams::default()).is_err());
        let c = curve_from(&[0], |_| 1.0, |_| 1.0);
        let bad = DetectorParams {
            tau: 0.0,
            ..Default::default()
        };
        assert!(detect(&c, &bad).is_err());
    }

    #[test]
    fn aggregate_rates_and_means() {
        let c = curve_from(
            &every(10, 5000),
            |e| if e >= 100 { 1.0 } else { 0.5 },
            |e| if e >= 500 { 0.98 } else { 0.3 },
        );
        let g = detect(&c, &DetectorParams::default()).unwrap();
        assert!(g.grokked);
        let agg = aggregate(&vec![g.clone(); 10]).unwrap();
        assert_eq!(agg.grokking_rate, 1.0);
        assert_eq!(agg.delta_s.unwrap().std, 0.0);

        let flat = curve_from(&every(10, 5000), |_| 1.0, |_| 0.3);
        let ng = detect(&flat, &DetectorParams::default()).unwrap();
        assert!(!ng.grokked);
        let mut mixed = vec![ng; 3];
        let alpha1s = [500usize, 600, 700, 800, 900, 1000, 1100];
        for &a in &alpha1s {
            let c = curve_from(
                &every(10, 20000),
                |e| if e >= 100 { 1.0 } else { 0.5 },
                move |e| if e >= a { 0.98 } else { 0.3 },
            );
            mixed.push(detect(&c, &DetectorParams::default()).unwrap());
        }
        let agg = aggregate(&mixed).unwrap();
        assert_eq!(agg.grokked, 7);
        assert!((agg.grokking_rate - 0.7).abs() < 1e-15);
        // (500 + 600 + ... + 1100) / 7 = 5600 / 7
        assert_eq!(agg.alpha1.unwrap().n, 7);
        assert!((agg.alpha1.unwrap().mean - 800.0).abs() < 1e-12);
        assert_eq!(agg.reasons[&Reason::NoTransition], 3);
        assert!(aggregate(&[]).is_err());
    }
}
