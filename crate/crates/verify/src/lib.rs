//! Pass/fail bookkeeping and curve helpers for the acceptance suite.

use std::time::{Duration, Instant};

use gewi_sim::sweep::LinkResults;

/// Findings for one criterion.
#[derive(Debug, Default)]
pub struct Check {
    passed: bool,
    lines: Vec<(bool, String)>,
}

impl Check {
    fn new() -> Self {
        Self { passed: true, lines: Vec::new() }
    }

    /// Records a requirement; any failed requirement fails the criterion.
    pub fn require(&mut self, ok: bool, what: impl Into<String>) -> bool {
        self.passed &= ok;
        self.lines.push((ok, what.into()));
        ok
    }

    /// Records an observation that does not affect the outcome.
    pub fn note(&mut self, what: impl Into<String>) {
        self.lines.push((true, format!("note: {}", what.into())));
    }

    pub fn passed(&self) -> bool {
        self.passed
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Default)]
pub struct Report {
    outcomes: Vec<Outcome>,
}

impl Report {
    /// Runs one criterion, enforcing `budget` if given, and prints its lines.
    pub fn criterion(&mut self, id: u8, name: &'static str, budget: Option<Duration>, f: impl FnOnce(&mut Check)) {
        let start = Instant::now();
        let mut check = Check::new();
        f(&mut check);
        let elapsed = start.elapsed();
        if let Some(b) = budget {
            check.require(elapsed < b, format!("runtime {:.2} s < {:.0} s", elapsed.as_secs_f64(), b.as_secs_f64()));
        }
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!("criterion {id} ({name}): {verdict} [{:.1} s]", elapsed.as_secs_f64());
        for (ok, line) in &check.lines {
            println!("    {} {line}", if *ok { "ok  " } else { "FAIL" });
        }
        self.outcomes.push(Outcome { id, name, passed: check.passed, elapsed });
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn print_summary(&self) {
        println!();
        for o in &self.outcomes {
            println!("{} criterion {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.name);
        }
        let passed = self.outcomes.iter().filter(|o| o.passed).count();
        println!("{passed}/{} criteria passed", self.outcomes.len());
    }
}

/// One aggregated curve: `(r, mean error, mean throughput)` in r order.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

impl Curve {
    pub fn from_results<R>(res: &LinkResults<R>, label: &str) -> Curve {
        let series = res.find_series(label).unwrap_or_else(|| panic!("no series {label:?}"));
        let points = res.series_summary(series).map(|(r, s)| (r, s.error.mean, s.throughput.mean)).collect();
        Curve { label: label.into(), points }
    }

    pub fn at(&self, r: f64) -> (f64, f64) {
        let p = self.points.iter().find(|p| (p.0 - r).abs() < 1e-9).unwrap_or_else(|| panic!("r={r} not sampled"));
        (p.1, p.2)
    }

    pub fn error(&self, r: f64) -> f64 {
        self.at(r).0
    }

    pub fn throughput(&self, r: f64) -> f64 {
        self.at(r).1
    }

    pub fn rs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// First sampled r whose error is below `threshold`.
    pub fn first_error_below(&self, threshold: f64) -> Option<f64> {
        self.points.iter().find(|p| p.1 < threshold).map(|p| p.0)
    }

    pub fn describe_error(&self) -> String {
        self.points.iter().map(|p| format!("{}:{:.3}", p.0, p.1)).collect::<Vec<_>>().join(" ")
    }

    pub fn describe_throughput(&self) -> String {
        self.points.iter().map(|p| format!("{}:{:.3}", p.0, p.2)).collect::<Vec<_>>().join(" ")
    }
}

/// Smallest sampled r from which `upper` has strictly higher throughput than
/// `lower` at every larger sampled r.
pub fn crossover(upper: &Curve, lower: &Curve) -> Option<f64> {
    let wins: Vec<(f64, bool)> = upper.rs().map(|r| (r, upper.throughput(r) > lower.throughput(r))).collect();
    let mut start = None;
    for (r, win) in wins.iter().rev() {
        if *win {
            start = Some(*r);
        } else {
            break;
        }
    }
    start
}

/// `|a - b| <= tol * max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
