//! Instance construction and the trial loop.
//!
//! A run is identified by (algorithm, seed). The seed selects three
//! independent random streams: the environment stream draws the context and
//! the full reward vector of every trial (so all algorithms under one seed see
//! the same trace), the learner stream drives action sampling, and the graph
//! stream builds the graph and label noise; community detection has a stream
//! of its own.

use std::sync::Arc;
use std::time::Instant;

use cba_core::bases::{
    ball_orders, community_families, effective_resistance_metric, interval_basis, mincut_metric,
    shortest_path_metric, BallOrder, Basis, Graph, NestedFamily,
};
use cba_core::baselines::{Exp3PerContext, Exp4Contextual};
use cba_core::contextual::{
    tune, tune_balls, ComparatorPolicy, ContextualLearner, DirectAgent, ExpertSets, ExplicitSets,
    FastAgent, LearnerStats, NestedSets, Tuning,
};
use cba_core::environments::{
    draw_context, draw_reward_vector, gen_gaussian_knn, gen_sbm, load_edge_list, GaussianKnnParams,
    Label, LabeledGraph, LoadOptions, RewardModel,
};
use cba_core::rng::{stream, BASIS_STREAM, ENVIRONMENT_STREAM, GRAPH_STREAM, LEARNER_STREAM};
use rayon::prelude::*;

use crate::config::{Algorithm, BasisKind, EnvironmentSpec, ExperimentConfig};
use crate::{HarnessError, Result};

pub fn build_graph(spec: &EnvironmentSpec, graph_seed: u64) -> Result<LabeledGraph> {
    let mut rng = stream(graph_seed, GRAPH_STREAM);
    let graph = match spec {
        EnvironmentSpec::Sbm {
            classes,
            clique_size,
            background,
            p_background,
        } => gen_sbm(*classes, *clique_size, *background, *p_background, &mut rng)?,
        EnvironmentSpec::GaussianKnn {
            classes,
            per_class,
            sigma,
            background,
            background_sigma,
            neighbors,
        } => gen_gaussian_knn(
            &GaussianKnnParams {
                n_fg: *classes,
                fg_count: *per_class,
                fg_sigma: *sigma,
                bg_count: *background,
                bg_sigma: *background_sigma,
                k: *neighbors,
            },
            &mut rng,
        )?,
        EnvironmentSpec::Files {
            edges,
            labels,
            background_classes,
            noise,
        } => {
            let options = LoadOptions {
                background: background_classes.clone(),
                noise: *noise,
            };
            load_edge_list(edges, labels, &options, &mut rng).map_err(|e| match e {
                cba_core::Error::Io(msg) => HarnessError::Config(format!("reading graph files: {msg}")),
                cba_core::Error::Parse { line, message } => {
                    HarnessError::Config(format!("graph files, line {line}: {message}"))
                }
                other => other.into(),
            })?
        }
    };
    if graph.repair_edges > 0 {
        log::warn!(
            "graph seed {graph_seed}: added {} edges to connect the generated graph",
            graph.repair_edges
        );
    }
    Ok(graph)
}

/// A basis as the learners consume it.
#[derive(Clone)]
pub struct BasisData {
    pub kind: BasisKind,
    /// Present for nested bases; element numbering follows family order.
    pub families: Option<Vec<NestedFamily>>,
    pub sets: Arc<dyn ExpertSets>,
}

impl BasisData {
    pub fn build(kind: BasisKind, graph: &Graph, graph_seed: u64) -> Result<Self> {
        let mut rng = stream(graph_seed, BASIS_STREAM);
        let families = match kind {
            BasisKind::D1 => Some(balls(&mincut_metric(graph)?)),
            BasisKind::D2 => Some(balls(&effective_resistance_metric(graph)?)),
            BasisKind::Dinf => Some(balls(&shortest_path_metric(graph)?)),
            BasisKind::Lvc => Some(community_families(graph, &mut rng)?),
            BasisKind::Int => None,
        };
        let sets: Arc<dyn ExpertSets> = match &families {
            Some(f) => Arc::new(NestedSets::new(f)?),
            None => Arc::new(ExplicitSets::new(&interval_basis(graph)?)),
        };
        Ok(Self { kind, families, sets })
    }

    /// Number of basis elements the learners hold weights for.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// The distinct sets of the basis.
    pub fn distinct(&self, graph: &Graph) -> Result<Basis> {
        Ok(match &self.families {
            Some(f) => NestedFamily::basis(graph.n_nodes(), f)?,
            None => interval_basis(graph)?,
        })
    }

    /// Ball bases use the per-center tuning; other bases the generic one.
    pub fn tuning(&self, m: usize, k: usize, horizon: u64) -> Result<Tuning> {
        let t = horizon.max(1);
        Ok(if self.kind.is_ball() {
            tune_balls(self.sets.n_contexts(), self.len(), m, k, t)?
        } else {
            tune(self.len(), m, k, t)?
        })
    }
}

fn balls(metric: &cba_core::bases::MetricMatrix) -> Vec<NestedFamily> {
    ball_orders(metric).iter().map(BallOrder::family).collect()
}

/// One closed neighbourhood per foreground class, playing the class action.
/// Each class takes the member with the fewest neighbours outside the class
/// whose neighbourhood is disjoint from those already chosen. On unit-weight
/// graphs these are radius-1 shortest-path balls; on the block model they are
/// usually exactly the cliques. `None` when some class has no disjoint choice.
pub fn planted_comparator(labeled: &LabeledGraph, k: usize) -> Option<ComparatorPolicy> {
    let g = &labeled.graph;
    let mut taken = vec![false; g.n_nodes()];
    let mut pieces = Vec::new();
    for class in 0..labeled.n_classes().min(k) {
        let outside = |v: usize| {
            g.neighbors(v)
                .iter()
                .filter(|(u, _)| labeled.labels[*u] != Label::Foreground(class))
                .count()
        };
        let mut members = labeled.class_members(class);
        if members.is_empty() {
            continue;
        }
        members.sort_by_key(|&v| (outside(v), v));
        let ball = members.into_iter().find_map(|center| {
            let mut ball: Vec<usize> = g.neighbors(center).iter().map(|(u, _)| *u).collect();
            ball.push(center);
            ball.iter().all(|&v| !taken[v]).then_some(ball)
        })?;
        for &v in &ball {
            taken[v] = true;
        }
        pieces.push((ball, class));
    }
    ComparatorPolicy::disjoint(g.n_nodes(), k, pieces).ok()
}

/// Everything shared by the runs that use one graph.
pub struct Instance {
    pub graph_seed: u64,
    pub labeled: LabeledGraph,
    pub k: usize,
    pub basis: BasisData,
    pub tuning: Tuning,
    pub comparator: Option<ComparatorPolicy>,
}

impl Instance {
    pub fn build(config: &ExperimentConfig, graph_seed: u64) -> Result<Self> {
        let labeled = build_graph(&config.environment, graph_seed)?;
        let k = match config.k {
            Some(k) if k < labeled.n_classes() => {
                return Err(HarnessError::Config(format!(
                    "k = {k} is smaller than the {} foreground classes",
                    labeled.n_classes()
                )))
            }
            Some(k) => k,
            None if labeled.n_classes() == 0 => {
                return Err(HarnessError::Config("no foreground classes; set `k`".into()))
            }
            None => labeled.n_classes(),
        };
        let needs_basis = config
            .algorithms
            .iter()
            .any(|a| !matches!(a, Algorithm::Exp3));
        let basis = if needs_basis {
            BasisData::build(config.basis, &labeled.graph, graph_seed)?
        } else {
            // EXP3 ignores the basis; a trivial one keeps the types uniform.
            let n = labeled.n_nodes();
            let all = NestedFamily::new((0..n).collect(), vec![n], vec![cba_core::bases::Provenance::Loaded])?;
            BasisData {
                kind: config.basis,
                sets: Arc::new(NestedSets::new(std::slice::from_ref(&all))?),
                families: Some(vec![all]),
            }
        };
        let tuning = basis.tuning(config.m, k, config.horizon)?;
        let comparator = planted_comparator(&labeled, k);
        Ok(Self {
            graph_seed,
            labeled,
            k,
            basis,
            tuning,
            comparator,
        })
    }

    pub fn learner(&self, algorithm: Algorithm, horizon: u64) -> Result<Box<dyn ContextualLearner>> {
        let Tuning { eta, w1 } = self.tuning;
        let horizon = horizon.max(1);
        Ok(match algorithm {
            Algorithm::CbaFast => {
                let families = self
                    .basis
                    .families
                    .as_ref()
                    .ok_or_else(|| HarnessError::Config("cba_fast needs a nested basis".into()))?;
                Box::new(FastAgent::new(families, self.k, eta, w1)?)
            }
            Algorithm::CbaDirect => Box::new(DirectAgent::new(self.basis.sets.clone(), self.k, eta, w1)?),
            Algorithm::Exp3 => Box::new(Exp3PerContext::tuned(self.labeled.n_nodes(), self.k, horizon)?),
            Algorithm::Exp4 => Box::new(Exp4Contextual::tuned(self.basis.sets.clone(), self.k, horizon)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRow {
    /// One-based.
    pub trial: u64,
    /// One-based action; 0 is abstention.
    pub action: usize,
    pub reward: f64,
    pub cum_reward: f64,
    pub cum_mistakes: u64,
    pub abstained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub wall_clock_seconds: f64,
    /// Smallest probability of a played foreground action; `None` if the
    /// learner always abstained.
    pub min_selected_probability: Option<f64>,
    pub stats: LearnerStats,
    /// Realised reward of the planted comparator on this run's trace.
    pub comparator_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub basis: BasisKind,
    pub seed: u64,
    pub graph_seed: u64,
    pub rows: Vec<TrialRow>,
    pub summary: RunSummary,
}

impl RunRecord {
    pub fn cum_reward(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_reward)
    }

    pub fn cum_mistakes(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.cum_mistakes)
    }

    pub fn regret(&self) -> Option<f64> {
        self.summary.comparator_reward.map(|c| c - self.cum_reward())
    }
}

/// A trial is a mistake when its realised reward is negative.
pub fn is_mistake(reward: f64) -> bool {
    reward < 0.0
}

pub fn run_one(
    instance: &Instance,
    model: &RewardModel,
    algorithm: Algorithm,
    seed: u64,
    horizon: u64,
    basis: BasisKind,
) -> Result<RunRecord> {
    let start = Instant::now();
    let mut learner = instance.learner(algorithm, horizon)?;
    let mut env = stream(seed, ENVIRONMENT_STREAM);
    let mut rng = stream(seed, LEARNER_STREAM);
    let n = instance.labeled.n_nodes();
    let mut rows = Vec::with_capacity(horizon as usize);
    let mut cum_reward = 0.0;
    let mut cum_mistakes = 0;
    let mut min_p = f64::INFINITY;
    let mut comparator = instance.comparator.as_ref().map(|_| 0.0);
    for trial in 1..=horizon {
        let x = draw_context(n, &mut env);
        let rewards = draw_reward_vector(model, instance.labeled.labels[x], instance.k, &mut env);
        let decision = learner.step(x, &mut rng)?;
        if let Some(p) = decision.probs.iter().find(|p| !p.is_finite()) {
            return Err(HarnessError::Numeric(format!(
                "{algorithm} seed {seed} trial {trial}: action probability {p}"
            )));
        }
        let reward = rewards.get(decision.action);
        learner.feedback(reward)?;
        if let Some(a) = decision.action.index() {
            min_p = min_p.min(decision.probs[a]);
        }
        if let (Some(total), Some(policy)) = (comparator.as_mut(), &instance.comparator) {
            *total += policy.reward(x, &rewards);
        }
        cum_reward += reward;
        cum_mistakes += u64::from(is_mistake(reward));
        rows.push(TrialRow {
            trial,
            action: decision.action.index().map_or(0, |a| a + 1),
            reward,
            cum_reward,
            cum_mistakes,
            abstained: decision.action.is_abstain(),
        });
    }
    Ok(RunRecord {
        algorithm,
        basis,
        seed,
        graph_seed: instance.graph_seed,
        rows,
        summary: RunSummary {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            min_selected_probability: min_p.is_finite().then_some(min_p),
            stats: learner.stats(),
            comparator_reward: comparator,
        },
    })
}

/// Seeds after applying the offset.
pub fn effective_seeds(config: &ExperimentConfig, seed_offset: u64) -> Vec<u64> {
    config.seeds.iter().map(|s| s.wrapping_add(seed_offset)).collect()
}

/// Graph seed of every run seed.
pub fn graph_seed(config: &ExperimentConfig, seed: u64) -> u64 {
    config.graph_seed.unwrap_or(seed)
}

/// Builds the instance of every distinct graph seed, in seed order.
pub fn build_instances(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<Instance>> {
    let mut graph_seeds: Vec<u64> = seeds.iter().map(|&s| graph_seed(config, s)).collect();
    graph_seeds.dedup();
    if config.graph_seed.is_some() {
        graph_seeds.truncate(1);
    }
    graph_seeds
        .par_iter()
        .map(|&g| Instance::build(config, g))
        .collect()
}

pub struct Experiment {
    pub instances: Vec<Instance>,
    pub records: Vec<RunRecord>,
}

/// Executes every (algorithm, seed) run on the current rayon pool. Records come
/// back ordered by algorithm (config order), then seed (config order),
/// whatever the thread count.
pub fn run_experiment(config: &ExperimentConfig, seed_offset: u64) -> Result<Experiment> {
    let seeds = effective_seeds(config, seed_offset);
    let instances = build_instances(config, &seeds)?;
    let instance_for = |seed: u64| {
        let g = graph_seed(config, seed);
        instances.iter().find(|i| i.graph_seed == g).expect("instance built for every seed")
    };
    let model = config.rewards.model();
    let units: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let records = units
        .par_iter()
        .map(|&(a, s)| run_one(instance_for(s), &model, a, s, config.horizon, config.basis))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment { instances, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn config(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
basis = "dinf"
algorithms = ["cba_fast", "cba_direct", "exp3", "exp4"]
horizon = 300
m = 2
seeds = [3, 4]
{extra}
[environment]
kind = "sbm"
classes = 2
clique_size = 8
background = 16
"#
        );
        ExperimentConfig::parse(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn rows_are_prefix_sums() {
        for record in run_experiment(&config(""), 0).unwrap().records {
            let mut reward = 0.0;
            let mut mistakes = 0;
            for (i, row) in record.rows.iter().enumerate() {
                reward += row.reward;
                mistakes += u64::from(row.reward < 0.0);
                assert_eq!(row.trial, i as u64 + 1);
                assert_eq!(row.cum_reward, reward);
                assert_eq!(row.cum_mistakes, mistakes);
                assert_eq!(row.abstained, row.action == 0);
                if row.abstained {
                    assert_eq!(row.reward, 0.0);
                }
            }
            assert_eq!(record.rows.len(), 300);
        }
    }

    #[test]
    fn fast_and_direct_agents_take_identical_actions() {
        let records = run_experiment(&config(""), 0).unwrap().records;
        for seed_idx in 0..2 {
            let fast = &records[seed_idx];
            let direct = &records[2 + seed_idx];
            assert_eq!(fast.algorithm, Algorithm::CbaFast);
            assert_eq!(direct.algorithm, Algorithm::CbaDirect);
            assert_eq!(fast.rows, direct.rows);
        }
    }

    #[test]
    fn records_are_in_canonical_order() {
        let records = run_experiment(&config(""), 10).unwrap().records;
        let keys: Vec<_> = records.iter().map(|r| (r.algorithm.name(), r.seed)).collect();
        assert_eq!(
            keys,
            vec![
                ("cba_fast", 13),
                ("cba_fast", 14),
                ("cba_direct", 13),
                ("cba_direct", 14),
                ("exp3", 13),
                ("exp3", 14),
                ("exp4", 13),
                ("exp4", 14)
            ]
        );
    }

    #[test]
    fn shared_graph_seed_builds_one_instance() {
        let c = config("graph_seed = 7");
        let instances = build_instances(&c, &[1, 2, 3]).unwrap();
        assert_eq!(instances.len(), 1);
        assert_eq!(instances[0].graph_seed, 7);
    }

    #[test]
    fn zero_horizon_gives_empty_runs() {
        let c = config("").clone();
        let c = ExperimentConfig { horizon: 0, ..c };
        for r in run_experiment(&c, 0).unwrap().records {
            assert!(r.rows.is_empty());
            assert_eq!(r.cum_reward(), 0.0);
        }
    }

    #[test]
    fn planted_comparator_covers_the_cliques() {
        let c = config("");
        let instance = Instance::build(&c, 3).unwrap();
        let policy = instance.comparator.as_ref().unwrap();
        assert_eq!(policy.pieces().len(), 2);
        for piece in policy.pieces() {
            assert!(piece.members.len() >= 8);
            let class = piece.action;
            let in_class = piece
                .members
                .iter()
                .filter(|&&v| instance.labeled.labels[v] == Label::Foreground(class))
                .count();
            assert_eq!(in_class, 8);
        }
    }

    #[test]
    fn k_below_class_count_is_a_config_error() {
        let err = Instance::build(&config("k = 1"), 0).err().unwrap();
        assert_eq!(err.exit_code(), 2);
    }
}
