use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Metrics recorded during training, one entry per evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricCurve {
    pub epochs: Vec<usize>,
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    /// `per_subclass_test_accuracy[i][k]`: accuracy on subclass `k` at recording `i`.
    pub per_subclass_test_accuracy: Vec<Vec<f64>>,
}

/// One evaluation of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub subclass_accuracy: Vec<f64>,
}

impl MetricCurve {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn num_subclasses(&self) -> usize {
        self.per_subclass_test_accuracy.first().map_or(0, Vec::len)
    }

    pub fn push(&mut self, r: Recording) {
        self.epochs.push(r.epoch);
        self.train_loss.push(r.train_loss);
        self.train_accuracy.push(r.train_accuracy);
        self.test_loss.push(r.test_loss);
        self.test_accuracy.push(r.test_accuracy);
        self.per_subclass_test_accuracy.push(r.subclass_accuracy);
    }

    /// Keeps recordings whose position satisfies `keep`.
    pub fn filter_positions(&self, keep: impl Fn(usize) -> bool) -> MetricCurve {
        let mut out = MetricCurve::default();
        for i in (0..self.len()).filter(|&i| keep(i)) {
            out.push(self.recording(i));
        }
        out
    }

    pub fn truncate(&mut self, len: usize) {
        self.epochs.truncate(len);
        self.train_loss.truncate(len);
        self.train_accuracy.truncate(len);
        self.test_loss.truncate(len);
        self.test_accuracy.truncate(len);
        self.per_subclass_test_accuracy.truncate(len);
    }

    pub fn recording(&self, i: usize) -> Recording {
        Recording {
            epoch: self.epochs[i],
            train_loss: self.train_loss[i],
            train_accuracy: self.train_accuracy[i],
            test_loss: self.test_loss[i],
            test_accuracy: self.test_accuracy[i],
            subclass_accuracy: self.per_subclass_test_accuracy[i].clone(),
        }
    }

    /// Aligned lengths, strictly increasing epochs, accuracies in `[0,1]`,
    /// non-negative losses.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let aligned = [
            self.train_loss.len(),
            self.train_accuracy.len(),
            self.test_loss.len(),
            self.test_accuracy.len(),
            self.per_subclass_test_accuracy.len(),
        ]
        .iter()
        .all(|&l| l == n);
        if !aligned {
            return Err(Error::format("metric curve", "series lengths differ"));
        }
        if self.epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("metric curve", "epochs not strictly increasing"));
        }
        let acc_ok = |v: &f64| (0.0..=1.0).contains(v) || v.is_nan();
        if !self.train_accuracy.iter().chain(&self.test_accuracy).all(acc_ok)
            || !self.per_subclass_test_accuracy.iter().flatten().all(acc_ok)
        {
            return Err(Error::format("metric curve", "accuracy outside [0, 1]"));
        }
        if self.train_loss.iter().chain(&self.test_loss).any(|&l| l < 0.0) {
            return Err(Error::format("metric curve", "negative loss"));
        }
        let m = self.num_subclasses();
        if self.per_subclass_test_accuracy.iter().any(|row| row.len() != m) {
            return Err(Error::format("metric curve", "ragged subclass columns"));
        }
        Ok(())
    }

    /// `epoch,train_loss,train_acc,test_loss,test_acc,subclass_acc_0,...`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("epoch,train_loss,train_acc,test_loss,test_acc");
        for k in 0..self.num_subclasses() {
            write!(line, ",subclass_acc_{k}").unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
        for i in 0..self.len() {
            line.clear();
            write!(
                line,
                "{},{},{},{},{}",
                self.epochs[i], self.train_loss[i], self.train_accuracy[i], self.test_loss[i], self.test_accuracy[i]
            )
            .unwrap();
            for v in &self.per_subclass_test_accuracy[i] {
                write!(line, ",{v}").unwrap();
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::format("curve csv", "empty file"))??;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        const FIXED: [&str; 5] = ["epoch", "train_loss", "train_acc", "test_loss", "test_acc"];
        if cols.len() < 5 || cols[..5] != FIXED {
            return Err(Error::format("curve csv", format!("unexpected header `{header}`")));
        }
        for (k, c) in cols[5..].iter().enumerate() {
            if *c != format!("subclass_acc_{k}") {
                return Err(Error::format("curve csv", format!("unexpected column `{c}`")));
            }
        }
        let width = cols.len();
        let mut curve = MetricCurve::default();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != width {
                return Err(Error::format(
                    "curve csv",
                    format!("row {} has {} fields, expected {width}", row + 1, fields.len()),
                ));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::format("curve csv", format!("row {}: `{s}` is not a number", row + 1)))
            };
            let epoch = fields[0]
                .parse::<usize>()
                .map_err(|_| Error::format("curve csv", format!("row {}: bad epoch `{}`", row + 1, fields[0])))?;
            curve.push(Recording {
                epoch,
                train_loss: num(fields[1])?,
                train_accuracy: num(fields[2])?,
                test_loss: num(fields[3])?,
                test_accuracy: num(fields[4])?,
                subclass_accuracy: fields[5..].iter().map(|s| num(s)).collect::<Result<_>>()?,
            });
        }
        curve.validate()?;
        Ok(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricCurve {
        let mut c = MetricCurve::default();
        for (i, e) in [0usize, 10, 20].into_iter().enumerate() {
            c.push(Recording {
                epoch: e,
                train_loss: 1.0 / (i as f64 + 1.0),
                train_accuracy: 0.3 * i as f64,
                test_loss: 0.1 + i as f64,
                test_accuracy: 0.25,
                subclass_accuracy: vec![0.1, 1.0 / 3.0],
            });
        }
        c
    }

    #[test]
    fn csv_header_and_round_trip() {
        let c = sample();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "epoch,train_loss,train_acc,test_loss,test_acc,subclass_acc_0,subclass_acc_1"
        );
        assert_eq!(MetricCurve::read_csv(&buf[..]).unwrap(), c);
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(MetricCurve::read_csv(&b""[..]).is_err());
        assert!(MetricCurve::read_csv(&b"epoch,loss\n"[..]).is_err());
        let bad = b"epoch,train_loss,train_acc,test_loss,test_acc\n0,1,0.5,1,0.5\n0,1,0.5,1,0.5\n";
        assert!(MetricCurve::read_csv(&bad[..]).is_err());
        let bad = b"epoch,train_loss,train_acc,test_loss,test_acc\n0,1,abc,1,0.5\n";
        assert!(MetricCurve::read_csv(&bad[..]).is_err());
        let bad = b"epoch,train_loss,train_acc,test_loss,test_acc\n0,1,1.5,1,0.5\n";
        assert!(MetricCurve::read_csv(&bad[..]).is_err());
    }
}
