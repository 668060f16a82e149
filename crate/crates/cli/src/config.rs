//! Experiment configuration, read from TOML. Unknown keys are rejected.
//!
//! ```toml
//! basis = "dinf"
//! algorithms = ["cba_fast", "exp3"]
//! horizon = 20000
//! m = 2
//! seeds = [0, 1, 2]
//!
//! [environment]
//! kind = "sbm"
//! classes = 2
//! clique_size = 160
//! background = 480
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use cba_core::environments::RewardModel;
use serde::Deserialize;

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub basis: BasisKind,
    pub algorithms: Vec<Algorithm>,
    /// Number of foreground actions; defaults to the number of classes.
    #[serde(default)]
    pub k: Option<usize>,
    /// Trials per run (T).
    pub horizon: u64,
    /// Comparator size used to tune the learning rate (M).
    #[serde(default = "default_m")]
    pub m: usize,
    pub seeds: Vec<u64>,
    /// When set, every seed shares the graph generated from this seed;
    /// otherwise each run seed also seeds its own graph.
    #[serde(default)]
    pub graph_seed: Option<u64>,
    #[serde(default)]
    pub rewards: RewardSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_m() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Sbm {
        classes: usize,
        clique_size: usize,
        background: usize,
        /// Defaults to `1/sqrt(clique_size · background)`.
        #[serde(default)]
        p_background: Option<f64>,
    },
    GaussianKnn {
        classes: usize,
        per_class: usize,
        sigma: f64,
        background: usize,
        background_sigma: f64,
        neighbors: usize,
    },
    Files {
        edges: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        background_classes: BTreeSet<String>,
        #[serde(default)]
        noise: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Balls of the inverse min-cut metric.
    D1,
    /// Balls of the square-root effective-resistance metric.
    D2,
    /// Balls of the shortest-path metric.
    Dinf,
    /// Greedy-peeling chains of Louvain communities.
    Lvc,
    /// Geodesic intervals.
    Int,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::D1 => "d1",
            Self::D2 => "d2",
            Self::Dinf => "dinf",
            Self::Lvc => "lvc",
            Self::Int => "int",
        }
    }

    pub fn is_ball(self) -> bool {
        matches!(self, Self::D1 | Self::D2 | Self::Dinf)
    }

    /// Whether the basis comes as nested families (usable by the fast agent).
    pub fn is_nested(self) -> bool {
        self != Self::Int
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CbaDirect,
    CbaFast,
    Exp3,
    Exp4,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::CbaDirect => "cba_direct",
            Self::CbaFast => "cba_fast",
            Self::Exp3 => "exp3",
            Self::Exp4 => "exp4",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSpec {
    pub p_accept_match: f64,
    pub p_accept_mismatch: f64,
    pub reward_accept: f64,
    pub reward_reject: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        let m = RewardModel::default();
        Self {
            p_accept_match: m.p_accept_match,
            p_accept_mismatch: m.p_accept_mismatch,
            reward_accept: m.reward_accept,
            reward_reject: m.reward_reject,
        }
    }
}

impl RewardSpec {
    pub fn model(&self) -> RewardModel {
        RewardModel {
            p_accept_match: self.p_accept_match,
            p_accept_mismatch: self.p_accept_mismatch,
            reward_accept: self.reward_accept,
            reward_reject: self.reward_reject,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config. Relative file paths are resolved
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let EnvironmentSpec::Files { edges, labels, .. } = &mut config.environment {
            *edges = base_dir.join(&*edges);
            *labels = base_dir.join(&*labels);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.algorithms.is_empty() {
            return fail("`algorithms` must list at least one algorithm".into());
        }
        if self.seeds.is_empty() {
            return fail("`seeds` must list at least one seed".into());
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return fail(format!("seed {dup} listed twice"));
        }
        let mut seen = Vec::new();
        for a in &self.algorithms {
            if seen.contains(a) {
                return fail(format!("algorithm `{a}` listed twice"));
            }
            seen.push(*a);
        }
        if self.algorithms.contains(&Algorithm::CbaFast) && !self.basis.is_nested() {
            return fail(format!("`cba_fast` needs a nested basis, not `{}`", self.basis));
        }
        if self.m == 0 {
            return fail("`m` must be at least 1".into());
        }
        if self.k == Some(0) {
            return fail("`k` must be at least 1".into());
        }
        self.rewards
            .model()
            .validate()
            .map_err(|e| HarnessError::Config(format!("rewards: {e}")))?;
        match &self.environment {
            EnvironmentSpec::Sbm {
                classes,
                clique_size,
                p_background,
                ..
            } => {
                if *classes == 0 || *clique_size == 0 {
                    return fail("environment: sbm needs classes ≥ 1 and clique_size ≥ 1".into());
                }
                if let Some(p) = p_background {
                    if !(0.0..=1.0).contains(p) {
                        return fail(format!("environment: p_background {p} outside [0, 1]"));
                    }
                }
            }
            EnvironmentSpec::GaussianKnn {
                classes,
                per_class,
                sigma,
                background_sigma,
                neighbors,
                ..
            } => {
                if !(1..=4).contains(classes) || *per_class == 0 || *neighbors == 0 {
                    return fail("environment: gaussian_knn needs 1-4 classes, per_class ≥ 1, neighbors ≥ 1".into());
                }
                if !(*sigma > 0.0 && *background_sigma > 0.0) {
                    return fail("environment: sigmas must be positive".into());
                }
            }
            EnvironmentSpec::Files { noise, .. } => {
                if !(0.0..=1.0).contains(noise) {
                    return fail(format!("environment: noise {noise} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }
}
