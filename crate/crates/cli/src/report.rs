//! CSV output, seed aggregation and run metadata.

use std::io::Write;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::{Experiment, RunRecord};
use crate::{HarnessError, Result};

pub const TRIALS_HEADER: &str = "trial,algorithm,basis,seed,action,reward,cum_reward,cum_mistakes,abstained";
pub const AGGREGATE_HEADER: &str =
    "trial,algorithm,basis,n_seeds,mean_cum_mistakes,half_width_cum_mistakes,mean_cum_reward,half_width_cum_reward";

/// z-score of a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

/// Baselines from the comparison that this harness does not implement.
pub const ABSENT_BASELINES: [&str; 2] = ["GABA-II", "ContextualBandit-with-similarity"];

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros dropped,
/// exponent form for very small or large magnitudes.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        format!("{}e{exp:+03}", trim_zeros(mantissa))
    } else {
        trim_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_trials<W: Write>(records: &[RunRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRIALS_HEADER}")?;
    for r in records {
        for row in &r.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.trial,
                r.algorithm,
                r.basis,
                r.seed,
                row.action,
                fmt_float(row.reward),
                fmt_float(row.cum_reward),
                row.cum_mistakes,
                u8::from(row.abstained)
            )?;
        }
    }
    Ok(())
}

/// Per-trial mean and, with at least two samples, the half-width
/// `1.96 · s / sqrt(n)` (sample standard deviation `s`).
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub half_width: Option<Vec<f64>>,
}

impl Band {
    fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns.len();
        let len = columns.iter().map(Vec::len).min().unwrap_or(0);
        let mut mean = Vec::with_capacity(len);
        let mut half = Vec::with_capacity(len);
        for t in 0..len {
            let (m, h) = mean_half_width(columns.iter().map(|c| c[t]));
            mean.push(m);
            half.push(h);
        }
        Self {
            mean,
            half_width: (n >= 2).then_some(half),
        }
    }

    pub fn lower(&self, t: usize) -> f64 {
        self.mean[t] - self.half_width.as_ref().map_or(0.0, |h| h[t])
    }

    pub fn upper(&self, t: usize) -> f64 {
        self.mean[t] + self.half_width.as_ref().map_or(0.0, |h| h[t])
    }
}

/// Mean and 95% half-width of a sample; the half-width is 0 below two samples.
pub fn mean_half_width(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.into_iter().collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z_95 * (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub algorithm: String,
    pub basis: String,
    pub n_seeds: usize,
    pub mistakes: Band,
    pub reward: Band,
}

impl Curve {
    pub fn len(&self) -> usize {
        self.mistakes.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One curve per algorithm, in order of first appearance.
pub fn aggregate(records: &[RunRecord]) -> Vec<Curve> {
    let mut algorithms = Vec::new();
    for r in records {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
    }
    algorithms
        .into_iter()
        .map(|a| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == a).collect();
            if runs.len() < 2 {
                log::warn!("{a}: a single seed, confidence bands omitted");
            }
            let mistakes: Vec<Vec<f64>> = runs
                .iter()
                .map(|r| r.rows.iter().map(|row| row.cum_mistakes as f64).collect())
                .collect();
            let reward: Vec<Vec<f64>> = runs
                .iter()
                .map(|r| r.rows.iter().map(|row| row.cum_reward).collect())
                .collect();
            Curve {
                algorithm: a.name().into(),
                basis: runs[0].basis.name().into(),
                n_seeds: runs.len(),
                mistakes: Band::from_columns(&mistakes),
                reward: Band::from_columns(&reward),
            }
        })
        .collect()
}

pub fn write_aggregate<W: Write>(curves: &[Curve], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{AGGREGATE_HEADER}")?;
    let half = |band: &Band, t: usize| band.half_width.as_ref().map_or(String::new(), |h| fmt_float(h[t]));
    for c in curves {
        for t in 0..c.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t + 1,
                c.algorithm,
                c.basis,
                c.n_seeds,
                fmt_float(c.mistakes.mean[t]),
                half(&c.mistakes, t),
                fmt_float(c.reward.mean[t]),
                half(&c.reward, t)
            )?;
        }
    }
    Ok(())
}

/// Reads a file written by [`write_aggregate`].
pub fn parse_aggregate(text: &str) -> Result<Vec<Curve>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == AGGREGATE_HEADER => {}
        _ => return Err(HarnessError::Config("aggregate file: unexpected header".into())),
    }
    let mut curves: Vec<Curve> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| HarnessError::Config(format!("aggregate file, line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let n_seeds = fields[3].parse().map_err(|_| bad("bad seed count"))?;
        let same = curves
            .last()
            .is_some_and(|c| c.algorithm == fields[1] && c.basis == fields[2]);
        if !same {
            let band = |h: bool| Band {
                mean: Vec::new(),
                half_width: h.then(Vec::new),
            };
            curves.push(Curve {
                algorithm: fields[1].into(),
                basis: fields[2].into(),
                n_seeds,
                mistakes: band(!fields[5].is_empty()),
                reward: band(!fields[7].is_empty()),
            });
        }
        let c = curves.last_mut().expect("pushed above");
        for (band, m, h) in [(&mut c.mistakes, fields[4], fields[5]), (&mut c.reward, fields[6], fields[7])] {
            band.mean.push(num(m)?);
            match (band.half_width.as_mut(), opt(h)?) {
                (Some(hw), Some(v)) => hw.push(v),
                (None, None) => {}
                _ => return Err(bad("half-width present on some rows only")),
            }
        }
    }
    Ok(curves)
}

#[derive(Debug, Serialize)]
struct InstanceMeta {
    graph_seed: u64,
    n_nodes: usize,
    n_edges: usize,
    n_classes: usize,
    k: usize,
    repair_edges: usize,
    basis_elements: usize,
    eta: f64,
    w1: f64,
    planted_comparator: bool,
}

#[derive(Debug, Serialize)]
struct RunMeta {
    algorithm: String,
    basis: String,
    seed: u64,
    graph_seed: u64,
    wall_clock_seconds: f64,
    min_selected_probability: Option<f64>,
    projections: u64,
    bisection_iterations: u64,
    max_bisection_iterations: usize,
    tree_rebuilds: u64,
    cum_reward: f64,
    cum_mistakes: u64,
    comparator_reward: Option<f64>,
    regret: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Metadata {
    version: &'static str,
    basis: String,
    horizon: u64,
    m: usize,
    seeds: Vec<u64>,
    algorithms: Vec<String>,
    absent_baselines: Vec<&'static str>,
    instances: Vec<InstanceMeta>,
    runs: Vec<RunMeta>,
}

pub fn metadata_json(config: &ExperimentConfig, experiment: &Experiment) -> String {
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        basis: config.basis.name().into(),
        horizon: config.horizon,
        m: config.m,
        seeds: experiment.records.iter().map(|r| r.seed).fold(Vec::new(), |mut v, s| {
            if !v.contains(&s) {
                v.push(s);
            }
            v
        }),
        algorithms: config.algorithms.iter().map(|a| a.name().into()).collect(),
        absent_baselines: ABSENT_BASELINES.to_vec(),
        instances: experiment
            .instances
            .iter()
            .map(|i| InstanceMeta {
                graph_seed: i.graph_seed,
                n_nodes: i.labeled.n_nodes(),
                n_edges: i.labeled.graph.edges().len(),
                n_classes: i.labeled.n_classes(),
                k: i.k,
                repair_edges: i.labeled.repair_edges,
                basis_elements: i.basis.len(),
                eta: i.tuning.eta,
                w1: i.tuning.w1,
                planted_comparator: i.comparator.is_some(),
            })
            .collect(),
        runs: experiment
            .records
            .iter()
            .map(|r| RunMeta {
                algorithm: r.algorithm.name().into(),
                basis: r.basis.name().into(),
                seed: r.seed,
                graph_seed: r.graph_seed,
                wall_clock_seconds: r.summary.wall_clock_seconds,
                min_selected_probability: r.summary.min_selected_probability,
                projections: r.summary.stats.projections,
                bisection_iterations: r.summary.stats.bisection_iterations,
                max_bisection_iterations: r.summary.stats.max_bisection_iterations,
                tree_rebuilds: r.summary.stats.tree_rebuilds,
                cum_reward: r.cum_reward(),
                cum_mistakes: r.cum_mistakes(),
                comparator_reward: r.summary.comparator_reward,
                regret: r.regret(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&meta).expect("metadata serialises")
}
