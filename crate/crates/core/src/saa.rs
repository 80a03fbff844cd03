//! Sample average approximation driver.
//!
//! Solves `M` independent sample problems of `N` scenarios each and turns
//! their objectives into a lower-bound estimate. The routing structure of
//! every distinct sample solution is then frozen and costed on a fresh set
//! of `N'` scenarios through the recourse LP. The candidate with the
//! smallest gap is kept.
//!
//! Samples are drawn from the stream tag `saa-sample` (scenario `n` of
//! sample `j` has index `j*N + n`) and evaluation scenarios from
//! `saa-evaluation`, so results do not depend on the thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{build_smifr, BlockValues, BuildError, ModelParams, RecourseEvaluator, Structure};
use crate::network::{Network, NetworkError, PathSets, DEFAULT_FILTER_FACTOR};
use crate::report::{extract_routes, RouteReport};
use crate::scenario::{sample_tagged, DisruptionSpec, RandomStreamConfig, Scenario, ScenarioError};
use crate::solver::{solve_milp, MilpStatus, ModelError, SolveOptions};

pub const SAMPLE_STREAM: &str = "saa-sample";
pub const EVALUATION_STREAM: &str = "saa-evaluation";

#[derive(Debug, Error)]
pub enum SaaError {
    #[error("invalid SAA configuration: {0}")]
    Config(String),
    #[error("need at least 2 values for a variance, got {0}")]
    DegenerateSample(usize),
    #[error("no candidate solutions to select from")]
    NoCandidates,
    #[error("sample {sample}: {message}")]
    Solver { sample: usize, message: String },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn default_solve() -> SolveOptions {
    SolveOptions {
        relative_mip_gap: 1e-4,
        node_limit: Some(20_000),
        ..SolveOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaConfig {
    pub m: usize,
    pub n: usize,
    pub n_prime: usize,
    pub seed: u64,
    pub spec: DisruptionSpec,
    #[serde(default)]
    pub params: ModelParams,
    /// Options of the sample MILPs. The defaults use a relative gap of 1e-4
    /// and a node limit rather than a time limit, which would make results
    /// depend on machine speed.
    #[serde(default = "default_solve")]
    pub solve: SolveOptions,
    #[serde(default = "default_filter")]
    pub filter_factor: f64,
    /// Evaluate candidates with their flow fractions fixed too, instead of
    /// re-optimizing flows within the frozen structure.
    #[serde(default)]
    pub replay_fixed_fractions: bool,
}

fn default_filter() -> f64 {
    DEFAULT_FILTER_FACTOR
}

impl SaaConfig {
    pub fn new(spec: DisruptionSpec, seed: u64) -> Self {
        Self {
            m: 100,
            n: 1,
            n_prime: 1000,
            seed,
            spec,
            params: ModelParams::default(),
            solve: default_solve(),
            filter_factor: DEFAULT_FILTER_FACTOR,
            replay_fixed_fractions: false,
        }
    }

    pub fn with_sizes(mut self, m: usize, n: usize, n_prime: usize) -> Self {
        self.m = m;
        self.n = n;
        self.n_prime = n_prime;
        self
    }

    pub fn validate(&self) -> Result<(), SaaError> {
        if self.m < 2 {
            return Err(SaaError::Config(format!("M must be at least 2, got {}", self.m)));
        }
        if self.n < 1 {
            return Err(SaaError::Config("N must be at least 1".into()));
        }
        if self.n_prime < 2 {
            return Err(SaaError::Config(format!("N' must be at least 2, got {}", self.n_prime)));
        }
        self.spec.validate()?;
        Ok(())
    }
}

/// A frozen routing structure and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub structure: Structure,
    /// Block values of the first scenario of the source sample.
    pub blocks: Vec<BlockValues>,
    pub source_sample: usize,
    /// Objective of the source sample problem.
    pub f_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub status: MilpStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub explored_nodes: usize,
    /// Unsatisfied shipments summed over the sample's scenarios.
    pub unmet: f64,
    /// Counted in the lower-bound estimate.
    pub included: bool,
    /// Index into the candidate list.
    pub candidate: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub source_sample: usize,
    /// Every sample whose solution had this structure.
    pub samples: Vec<usize>,
    pub f_n: f64,
    pub f_tilde: f64,
    pub var_upper: f64,
    pub gap: f64,
    pub sigma_gap: f64,
    /// Unmet shipments in the source sample's own solution.
    pub own_unmet: f64,
    pub mean_unmet: f64,
    /// Evaluation scenarios where the recourse LP failed.
    pub infeasible_scenarios: usize,
    /// Evaluation scenarios where some demand missed its deadline.
    pub shed_scenarios: usize,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaaStats {
    pub f_bar: f64,
    pub var_lower: f64,
    pub f_tilde: f64,
    pub var_upper: f64,
    pub gap: f64,
    pub sigma_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub sampling: f64,
    pub sample_solves: f64,
    pub evaluation: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaResult {
    pub config: SaaConfig,
    pub samples: Vec<SampleOutcome>,
    pub candidates: Vec<CandidateEvaluation>,
    pub selected: usize,
    pub stats: SaaStats,
    pub selected_structure: Structure,
    /// Routes of the selected candidate's own sample solution.
    pub routes: RouteReport,
    pub warnings: Vec<String>,
}

impl SaaResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn selected_candidate(&self) -> &CandidateEvaluation {
        &self.candidates[self.selected]
    }
}

/// Mean and variance of the mean of the sample objectives.
pub fn lower_bound_stats(objectives: &[f64]) -> Result<(f64, f64), SaaError> {
    mean_and_variance(objectives)
}

/// Mean of `values` and the estimated variance of that mean,
/// `sum (v - mean)^2 / (n (n - 1))`.
pub fn mean_and_variance(values: &[f64]) -> Result<(f64, f64), SaaError> {
    let n = values.len();
    if n < 2 {
        return Err(SaaError::DegenerateSample(n));
    }
    // sum / n of equal values can be off in the last bit.
    if values.iter().all(|&v| v == values[0]) {
        return Ok((values[0], 0.0));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, ss / (n as f64 * (n as f64 - 1.0))))
}

pub fn optimality_gap(f_tilde: f64, f_bar: f64, var_upper: f64, var_lower: f64) -> (f64, f64) {
    (f_tilde - f_bar, (var_upper + var_lower).sqrt())
}

/// Index of the smallest gap, lowest index on ties.
pub fn select_candidate(gaps: &[f64]) -> Result<usize, SaaError> {
    let mut best: Option<usize> = None;
    for (i, &g) in gaps.iter().enumerate() {
        if best.is_none_or(|b| g < gaps[b]) {
            best = Some(i);
        }
    }
    best.ok_or(SaaError::NoCandidates)
}

/// Recourse cost of `candidate` on every scenario, with the mean and the
/// variance of the mean.
pub struct Evaluation {
    pub f_tilde: f64,
    pub var_upper: f64,
    pub costs: Vec<f64>,
    pub unmet: Vec<f64>,
    pub infeasible: usize,
    pub shed: usize,
}

pub fn evaluate_candidate(
    candidate: &CandidateSolution,
    net: &Network,
    paths: &PathSets,
    scenarios: &[Scenario],
    params: &ModelParams,
    opts: &SolveOptions,
    replay: bool,
) -> Result<Evaluation, SaaError> {
    let replay_blocks = replay.then_some(candidate.blocks.as_slice());
    let eval = RecourseEvaluator::new(net, paths, params, &candidate.structure, replay_blocks)?;
    let outcomes = eval.evaluate(scenarios, opts)?;
    let costs: Vec<f64> = outcomes.iter().map(|o| o.cost).collect();
    let (f_tilde, var_upper) = mean_and_variance(&costs)?;
    Ok(Evaluation {
        f_tilde,
        var_upper,
        unmet: outcomes.iter().map(|o| o.unmet).collect(),
        infeasible: outcomes.iter().filter(|o| o.infeasible).count(),
        shed: outcomes.iter().filter(|o| !o.shed.is_empty()).count(),
        costs,
    })
}

/// Result plus the wall time of each stage. Times are kept out of
/// [`SaaResult`] so that repeated runs serialize identically.
pub struct SaaRun {
    pub result: SaaResult,
    pub times: StageTimes,
}

struct Solved {
    outcome: SampleOutcome,
    candidate: Option<CandidateSolution>,
}

fn solve_sample(
    net: &Network,
    paths: &PathSets,
    config: &SaaConfig,
    j: usize,
    scenarios: &[Scenario],
) -> Result<Solved, SaaError> {
    let (model, map) = build_smifr(net, paths, scenarios, &config.params)?;
    let sol = solve_milp(&model, &config.solve)?;
    if !sol.has_incumbent() {
        return match sol.status {
            MilpStatus::Infeasible | MilpStatus::Unbounded => Err(SaaError::Solver {
                sample: j,
                message: format!("sample problem is {:?}", sol.status),
            }),
            _ => Ok(Solved {
                outcome: SampleOutcome {
                    index: j,
                    status: sol.status,
                    objective: sol.objective,
                    best_bound: sol.best_bound,
                    explored_nodes: sol.explored_nodes,
                    unmet: f64::NAN,
                    included: false,
                    candidate: None,
                },
                candidate: None,
            }),
        };
    }
    let unmet = (0..scenarios.len())
        .flat_map(|w| map.scenario_values(&sol.values, w))
        .map(|b| b.shortfall)
        .sum::<f64>()
        + 0.0;
    let blocks = map.scenario_values(&sol.values, 0);
    Ok(Solved {
        outcome: SampleOutcome {
            index: j,
            status: sol.status,
            objective: sol.objective,
            best_bound: sol.best_bound,
            explored_nodes: sol.explored_nodes,
            unmet,
            included: !sol.status.hit_limit(),
            candidate: None,
        },
        candidate: Some(CandidateSolution {
            structure: Structure::from_blocks(&blocks),
            blocks,
            source_sample: j,
            f_n: sol.objective,
        }),
    })
}

/// Run all four steps.
pub fn run_saa(net: &Network, config: &SaaConfig) -> Result<SaaRun, SaaError> {
    config.validate()?;
    let start = Instant::now();
    let paths = PathSets::for_demands(net, config.filter_factor)?;
    let streams = RandomStreamConfig::new(config.seed);
    let samples: Vec<Vec<Scenario>> = (0..config.m)
        .map(|j| sample_tagged(net, &config.spec, streams, SAMPLE_STREAM, (j * config.n) as u64, config.n))
        .collect::<Result<_, _>>()?;
    let evaluation = sample_tagged(net, &config.spec, streams, EVALUATION_STREAM, 0, config.n_prime)?;
    let sampling = start.elapsed().as_secs_f64();

    // Sample solves.
    let t1 = Instant::now();
    let solved: Vec<Solved> = samples
        .par_iter()
        .enumerate()
        .map(|(j, sc)| solve_sample(net, &paths, config, j, sc))
        .collect::<Result<_, _>>()?;
    let sample_solves = t1.elapsed().as_secs_f64();

    let mut warnings = Vec::new();
    let mut outcomes = Vec::with_capacity(solved.len());
    let mut candidates: Vec<CandidateSolution> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for s in solved {
        let mut outcome = s.outcome;
        if outcome.status.hit_limit() {
            warnings.push(format!(
                "sample {} stopped on {:?} (objective {}, bound {}); left out of the lower bound",
                outcome.index, outcome.status, outcome.objective, outcome.best_bound
            ));
        }
        if let Some(c) = s.candidate {
            let pos = match candidates.iter().position(|e| e.structure == c.structure) {
                Some(p) => p,
                None => {
                    candidates.push(c);
                    members.push(Vec::new());
                    candidates.len() - 1
                }
            };
            members[pos].push(outcome.index);
            outcome.candidate = Some(pos);
        }
        outcomes.push(outcome);
    }

    // Lower bound.
    let included: Vec<f64> = outcomes.iter().filter(|o| o.included).map(|o| o.objective).collect();
    let (f_bar, var_lower) = lower_bound_stats(&included)?;

    // Candidate evaluation.
    let t3 = Instant::now();
    let lp_opts = SolveOptions {
        relative_mip_gap: 0.0,
        ..config.solve.clone()
    };
    let evaluations: Vec<Evaluation> = candidates
        .par_iter()
        .map(|c| {
            evaluate_candidate(
                c,
                net,
                &paths,
                &evaluation,
                &config.params,
                &lp_opts,
                config.replay_fixed_fractions,
            )
        })
        .collect::<Result<_, _>>()?;
    let evaluation_time = t3.elapsed().as_secs_f64();

    // Selection.
    let mut table = Vec::with_capacity(candidates.len());
    for ((c, e), samples) in candidates.iter().zip(evaluations).zip(members) {
        let (gap, sigma_gap) = optimality_gap(e.f_tilde, f_bar, e.var_upper, var_lower);
        if e.infeasible > 0 {
            warnings.push(format!(
                "candidate from sample {}: recourse LP failed in {} evaluation scenarios, charged full penalty",
                c.source_sample, e.infeasible
            ));
        }
        table.push(CandidateEvaluation {
            source_sample: c.source_sample,
            samples,
            f_n: c.f_n,
            f_tilde: e.f_tilde,
            var_upper: e.var_upper,
            gap,
            sigma_gap,
            own_unmet: c.blocks.iter().map(|b| b.shortfall).sum::<f64>() + 0.0,
            mean_unmet: e.unmet.iter().sum::<f64>() / e.unmet.len() as f64 + 0.0,
            infeasible_scenarios: e.infeasible,
            shed_scenarios: e.shed,
            costs: e.costs,
        });
    }
    let gaps: Vec<f64> = table.iter().map(|c| c.gap).collect();
    let selected = select_candidate(&gaps)?;
    let chosen = &candidates[selected];
    let layout = crate::model::Layout::new(net);
    let mut routes = extract_routes(net, &layout, &chosen.blocks);
    routes.disruption = Some(config.spec.kind.label().to_string());
    for d in routes.residual_demands() {
        warnings.push(format!("demand {d}: flow left over after route decomposition"));
    }
    let sel = &table[selected];
    let stats = SaaStats {
        f_bar,
        var_lower,
        f_tilde: sel.f_tilde,
        var_upper: sel.var_upper,
        gap: sel.gap,
        sigma_gap: sel.sigma_gap,
    };
    let result = SaaResult {
        config: config.clone(),
        samples: outcomes,
        candidates: table,
        selected,
        stats,
        selected_structure: chosen.structure.clone(),
        routes,
        warnings,
    };
    Ok(SaaRun {
        result,
        times: StageTimes {
            sampling,
            sample_solves,
            evaluation: evaluation_time,
            total: start.elapsed().as_secs_f64(),
        },
    })
}
