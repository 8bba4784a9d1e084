//! Consolidated tables and plot-ready curves from a finished output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use grokbench::grokdetect::{aggregate, Aggregate, GrokkingReport, MeanStd};
use grokbench::nn::MetricCurve;

use crate::error::{HarnessError, Result};
use crate::fsio::{read_to_string, write_atomic};
use crate::manifest::Manifest;

pub const DIR: &str = "report";

/// Pointwise mean and population std of test and train accuracy over runs.
///
/// Each epoch uses the runs that recorded it; `n` counts them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub epochs: Vec<usize>,
    pub n: Vec<usize>,
    pub test_accuracy: Vec<MeanStd>,
    pub train_accuracy: Vec<MeanStd>,
}

impl MeanCurve {
    pub fn of(curves: &[MetricCurve]) -> Self {
        let mut by_epoch: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for c in curves {
            for i in 0..c.len() {
                let e = by_epoch.entry(c.epochs[i]).or_default();
                e.0.push(c.test_accuracy[i]);
                e.1.push(c.train_accuracy[i]);
            }
        }
        let mut out = MeanCurve {
            epochs: Vec::new(),
            n: Vec::new(),
            test_accuracy: Vec::new(),
            train_accuracy: Vec::new(),
        };
        for (epoch, (test, train)) in by_epoch {
            out.epochs.push(epoch);
            out.n.push(test.len());
            out.test_accuracy.push(MeanStd::of(&test).expect("non-empty"));
            out.train_accuracy.push(MeanStd::of(&train).expect("non-empty"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,n,test_acc_mean,test_acc_std,train_acc_mean,train_acc_std\n");
        for i in 0..self.epochs.len() {
            let (t, r) = (self.test_accuracy[i], self.train_accuracy[i]);
            writeln!(
                s,
                "{},{},{},{},{},{}",
                self.epochs[i], self.n[i], t.mean, t.std, r.mean, r.std
            )
            .unwrap();
        }
        s
    }
}

/// What `report` produced for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub index: usize,
    pub label: String,
    pub runs: usize,
    pub completed: usize,
    pub aggregate: Option<Aggregate>,
    pub mean_curve_file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub points: Vec<PointReport>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    /// Unreadable or corrupt artifacts, one line each.
    pub errors: Vec<String>,
    pub text: String,
}

/// Reads every run listed in the manifest under `dir` and writes per-point
/// mean curves plus summary tables into `dir/report/`.
///
/// Broken run artifacts are listed in `errors` and left out; the remaining
/// runs and points are still reported. A missing or corrupt manifest is an
/// error.
pub fn report(dir: &Path) -> Result<ReportOutput> {
    let mut manifest = Manifest::read(dir)?;
    let mut errors = Vec::new();
    let mut points = Vec::new();
    let mut files = Vec::new();

    for p in &manifest.points {
        let mut curves = Vec::new();
        let mut reports = Vec::new();
        for r in &p.runs {
            if r.error.is_some() {
                continue;
            }
            let Some(report_file) = &r.report_file else {
                errors.push(format!("{}: run {} has no report file", p.label, r.run));
                continue;
            };
            let curve = read_to_string(&dir.join(&r.curve_file)).and_then(|t| {
                MetricCurve::read_csv(t.as_bytes()).map_err(|e| HarnessError::artifact(&r.curve_file, e.to_string()))
            });
            let rep = read_to_string(&dir.join(report_file)).and_then(|t| {
                serde_json::from_str::<GrokkingReport>(&t)
                    .map_err(|e| HarnessError::artifact(report_file, e.to_string()))
            });
            match (curve, rep) {
                (Ok(c), Ok(rep)) => {
                    curves.push(c);
                    reports.push(rep);
                }
                (c, rep) => {
                    for e in [c.err(), rep.err()].into_iter().flatten() {
                        errors.push(e.to_string());
                    }
                }
            }
        }
        let mean_curve_file = format!("{DIR}/point-{:02}_mean_curve.csv", p.index);
        write_atomic(&dir.join(&mean_curve_file), MeanCurve::of(&curves).to_csv().as_bytes())?;
        files.push(mean_curve_file.clone());
        points.push(PointReport {
            index: p.index,
            label: p.label.clone(),
            runs: p.runs.len(),
            completed: reports.len(),
            aggregate: if reports.is_empty() {
                None
            } else {
                Some(aggregate(&reports)?)
            },
            mean_curve_file,
        });
    }

    let csv_file = format!("{DIR}/summary.csv");
    write_atomic(&dir.join(&csv_file), summary_csv(&points).as_bytes())?;
    let text = summary_text(&points, &errors);
    let txt_file = format!("{DIR}/summary.txt");
    write_atomic(&dir.join(&txt_file), text.as_bytes())?;
    files.push(csv_file);
    files.push(txt_file);

    manifest.report_files = files.clone();
    manifest.write(dir)?;
    Ok(ReportOutput {
        points,
        files,
        errors,
        text,
    })
}

fn opt(m: Option<MeanStd>, f: impl Fn(MeanStd) -> f64) -> String {
    m.map(|m| f(m).to_string()).unwrap_or_default()
}

fn summary_csv(points: &[PointReport]) -> String {
    let mut s = String::from(
        "point,label,runs,completed,grokked,grokking_rate,delta_S_mean,delta_S_std,sigma_S_mean,sigma_S_std,\
         alpha0_mean,alpha1_mean,final_test_acc_mean,final_test_acc_std,reasons\n",
    );
    for p in points {
        let a = p.aggregate.as_ref();
        let get = |f: fn(&Aggregate) -> Option<MeanStd>| a.and_then(f);
        let reasons = a
            .map(|a| {
                a.reasons
                    .iter()
                    .map(|(r, n)| format!("{r}:{n}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        writeln!(
            s,
            "{},\"{}\",{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.index,
            p.label,
            p.runs,
            p.completed,
            a.map_or(0, |a| a.grokked),
            a.map(|a| a.grokking_rate.to_string()).unwrap_or_default(),
            opt(get(|a| a.delta_s), |m| m.mean),
            opt(get(|a| a.delta_s), |m| m.std),
            opt(get(|a| a.sigma_s), |m| m.mean),
            opt(get(|a| a.sigma_s), |m| m.std),
            opt(get(|a| a.alpha0), |m| m.mean),
            opt(get(|a| a.alpha1), |m| m.mean),
            opt(get(|a| a.final_test_accuracy), |m| m.mean),
            opt(get(|a| a.final_test_accuracy), |m| m.std),
            reasons,
        )
        .unwrap();
    }
    s
}

fn fmt_ms(m: Option<MeanStd>) -> String {
    m.map_or_else(|| "-".to_string(), |m| format!("{:.4} ± {:.4}", m.mean, m.std))
}

fn summary_text(points: &[PointReport], errors: &[String]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<5} {:<28} {:>9} {:>8} {:>19} {:>19} {:>19}",
        "point", "label", "completed", "grokked", "delta_S", "sigma_S", "final test acc"
    )
    .unwrap();
    for p in points {
        let a = p.aggregate.as_ref();
        writeln!(
            s,
            "{:<5} {:<28} {:>9} {:>8} {:>19} {:>19} {:>19}",
            p.index,
            p.label,
            format!("{}/{}", p.completed, p.runs),
            a.map_or("-".to_string(), |a| format!("{}/{}", a.grokked, a.runs)),
            fmt_ms(a.and_then(|a| a.delta_s)),
            fmt_ms(a.and_then(|a| a.sigma_s)),
            fmt_ms(a.and_then(|a| a.final_test_accuracy)),
        )
        .unwrap();
    }
    if !errors.is_empty() {
        writeln!(s, "\nunreadable artifacts:").unwrap();
        for e in errors {
            writeln!(s, "  {e}").unwrap();
        }
    }
    s
}
