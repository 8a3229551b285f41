//! Pass/fail checks, trend reports and their CSV/JSON forms.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crtwalk::stats::{bootstrap_band, median, nonincreasing_verdict};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Parameter a trend runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    N,
    K,
}

/// One replicate value of a statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub statistic: String,
    pub n: usize,
    pub k: usize,
    pub replica: usize,
    pub value: f64,
}

/// Median of a statistic at one parameter value, with a bootstrap band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub statistic: String,
    pub n: usize,
    pub k: usize,
    pub replicas: usize,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Raw replicate values of several statistics; every summary and verdict is
/// derived from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub name: String,
    pub axis: Axis,
    /// Clock the time-indexed statistics refer to.
    pub clock: String,
    pub allowed_inversions: usize,
    pub samples: Vec<Sample>,
    /// Extra checks that are not trends (e.g. exact zero cases).
    pub extra: Vec<Check>,
}

const RAW_HEADER: &str = "statistic,n,k,replica,value";

impl TrendReport {
    pub fn new(name: &str, axis: Axis, clock: &str) -> Self {
        TrendReport {
            name: name.into(),
            axis,
            clock: clock.into(),
            allowed_inversions: 1,
            samples: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn push(&mut self, statistic: &str, n: usize, k: usize, replica: usize, value: f64) {
        self.samples.push(Sample { statistic: statistic.into(), n, k, replica, value });
    }

    /// Statistic names in order of first appearance.
    pub fn statistics(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.samples {
            if !out.contains(&s.statistic) {
                out.push(s.statistic.clone());
            }
        }
        out
    }

    /// Medians along the axis, in increasing parameter order.
    pub fn points(&self, statistic: &str) -> Vec<TrendPoint> {
        let mut params: Vec<(usize, usize)> = self
            .samples
            .iter()
            .filter(|s| s.statistic == statistic)
            .map(|s| (s.n, s.k))
            .collect();
        params.sort_by_key(|&(n, k)| match self.axis {
            Axis::N => (n, k),
            Axis::K => (k, n),
        });
        params.dedup();
        params
            .into_iter()
            .map(|(n, k)| {
                let mut values: Vec<(usize, f64)> = self
                    .samples
                    .iter()
                    .filter(|s| s.statistic == statistic && s.n == n && s.k == k)
                    .map(|s| (s.replica, s.value))
                    .collect();
                values.sort_by_key(|v| v.0);
                let x: Vec<f64> = values.into_iter().map(|v| v.1).collect();
                let (lo, hi) = if x.len() > 1 {
                    bootstrap_band(&x, &median, 1000, 0.95, (n as u64) << 32 | k as u64)
                } else {
                    (x[0], x[0])
                };
                TrendPoint { statistic: statistic.into(), n, k, replicas: x.len(), median: median(&x), lo, hi }
            })
            .collect()
    }

    /// One verdict per statistic: medians nonincreasing along the axis with
    /// at most `allowed_inversions` adjacent increases.
    pub fn verdicts(&self) -> Vec<Check> {
        let mut out: Vec<Check> = self
            .statistics()
            .iter()
            .map(|stat| {
                let pts = self.points(stat);
                let medians: Vec<f64> = pts.iter().map(|p| p.median).collect();
                let v = nonincreasing_verdict(&medians, self.allowed_inversions);
                let along: Vec<String> = pts
                    .iter()
                    .map(|p| format!("{}={}:{:.4}", self.axis_name(), self.param_of(p), p.median))
                    .collect();
                Check::new(
                    format!("{} {}", self.name, stat),
                    v.pass,
                    format!("{} inversions (allowed {}); {}", v.inversions, v.allowed, along.join(" ")),
                )
            })
            .collect();
        out.extend(self.extra.iter().cloned());
        out
    }

    fn axis_name(&self) -> &'static str {
        match self.axis {
            Axis::N => "n",
            Axis::K => "k",
        }
    }

    fn param_of(&self, p: &TrendPoint) -> usize {
        match self.axis {
            Axis::N => p.n,
            Axis::K => p.k,
        }
    }

    pub fn pass(&self) -> bool {
        all_pass(&self.verdicts())
    }

    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{RAW_HEADER}")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{},{:.16e}", s.statistic, s.n, s.k, s.replica, s.value)?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "statistic,n,k,replicas,median,lo,hi,clock")?;
        for stat in self.statistics() {
            for p in self.points(&stat) {
                writeln!(
                    out,
                    "{},{},{},{},{:.16e},{:.16e},{:.16e},{}",
                    p.statistic, p.n, p.k, p.replicas, p.median, p.lo, p.hi, self.clock
                )?;
            }
        }
        Ok(())
    }

    /// Rebuilds the samples from a raw CSV, keeping the other fields.
    pub fn with_raw_csv<R: BufRead>(&self, input: R) -> Result<TrendReport> {
        let mut out = TrendReport { samples: Vec::new(), ..self.clone() };
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != RAW_HEADER {
                    return Err(HarnessError::Config(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(HarnessError::Config(format!("line {}: expected 5 fields", i + 1)));
            }
            let parse_err = |e: String| HarnessError::Config(format!("line {}: {e}", i + 1));
            out.samples.push(Sample {
                statistic: f[0].to_string(),
                n: f[1].parse().map_err(|e| parse_err(format!("{e}")))?,
                k: f[2].parse().map_err(|e| parse_err(format!("{e}")))?,
                replica: f[3].parse().map_err(|e| parse_err(format!("{e}")))?,
                value: f[4].parse().map_err(|e| parse_err(format!("{e}")))?,
            });
        }
        Ok(out)
    }

    pub fn sort_samples(&mut self) {
        let axis = self.axis;
        let order = self.statistics();
        self.samples.sort_by_key(|s| {
            let stat = order.iter().position(|o| o == &s.statistic).unwrap();
            let p = match axis {
                Axis::N => (s.n, s.k),
                Axis::K => (s.k, s.n),
            };
            (stat, p, s.replica)
        });
    }
}

/// Metadata written next to every output set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub seed: u64,
    pub config: Option<ExperimentConfig>,
    pub git_hash: Option<String>,
    pub clock: Option<String>,
    pub files: Vec<String>,
    pub pass: Option<bool>,
    pub notes: Vec<String>,
}

pub fn git_hash() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    if !out.status.success() {
        return None;
    }
    Some(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_checks_csv<W: Write>(mut out: W, checks: &[Check]) -> Result<()> {
    writeln!(out, "check,pass,detail")?;
    for c in checks {
        writeln!(out, "{:?},{},{:?}", c.name, c.pass, c.detail)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> TrendReport {
        let mut r = TrendReport::new("t", Axis::K, "normalized");
        for (k, base) in [(2, 3.0), (4, 2.0), (8, 2.5), (16, 1.0)] {
            for rep in 0..5 {
                r.push("s", 100, k, rep, base + rep as f64 * 0.01);
            }
        }
        r
    }

    #[test]
    fn verdict_allows_one_inversion() {
        let r = report();
        let v = r.verdicts();
        assert_eq!(v.len(), 1);
        assert!(v[0].pass, "{}", v[0]);
        let mut strict = r.clone();
        strict.allowed_inversions = 0;
        assert!(!strict.verdicts()[0].pass);
    }

    #[test]
    fn verdicts_recompute_from_csv() {
        let r = report();
        let mut buf = Vec::new();
        r.write_raw_csv(&mut buf).unwrap();
        let back = r.with_raw_csv(&buf[..]).unwrap();
        assert_eq!(back.samples, r.samples);
        assert_eq!(back.verdicts(), r.verdicts());
    }
}
