use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};
use crate::lp::{build_network, solve_lp};
use crate::model::{check_feasibility, ValleyInstance, DEFAULT_FEASIBILITY_TOL};
use crate::predict::PredictConfig;
use crate::price::PriceDecompConfig;
use crate::{heuristic, predict, price};

/// The four methods compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Continuous relaxation, an upper bound.
    Lp,
    /// Price decomposition.
    Price,
    /// Interaction prediction.
    Predict,
    /// Relaxation followed by a nearest-schedule sweep.
    Heuristic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Lp, Algorithm::Price, Algorithm::Predict, Algorithm::Heuristic];

    /// Column label in reports.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Lp => "L",
            Algorithm::Price => "A",
            Algorithm::Predict => "B",
            Algorithm::Heuristic => "C",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lp => "lp",
            Algorithm::Price => "price",
            Algorithm::Predict => "predict",
            Algorithm::Heuristic => "heuristic",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = HydroError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| HydroError::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

/// What one algorithm produced on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    /// Gain of the returned schedule. For the relaxation this is the bound
    /// even though its schedule is generally not feasible.
    pub gain: Option<f64>,
    pub feasible: bool,
    /// Iteration at which the returned schedule was found.
    pub best_iteration: Option<usize>,
    pub iterations: usize,
    pub seconds: f64,
    /// Set when the run stopped on an error rather than finishing.
    pub error: Option<String>,
}

impl Outcome {
    fn failed(error: HydroError, seconds: f64) -> Self {
        Outcome {
            gain: None,
            feasible: false,
            best_iteration: None,
            iterations: 0,
            seconds,
            error: Some(error.to_string()),
        }
    }

    /// Gain counted in scores: zero unless feasible.
    pub fn scored_gain(&self) -> f64 {
        match (self.feasible, self.gain) {
            (true, Some(g)) => g,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub instance: String,
    pub lp: Outcome,
    pub price: Outcome,
    pub predict: Outcome,
    pub heuristic: Outcome,
}

impl InstanceResult {
    pub fn outcome(&self, algorithm: Algorithm) -> &Outcome {
        match algorithm {
            Algorithm::Lp => &self.lp,
            Algorithm::Price => &self.price,
            Algorithm::Predict => &self.predict,
            Algorithm::Heuristic => &self.heuristic,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub price: PriceDecompConfig,
    pub predict: PredictConfig,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs one algorithm. Errors are recorded in the outcome, not returned.
pub fn run_algorithm(instance: &ValleyInstance, algorithm: Algorithm, config: &BenchConfig) -> Outcome {
    match algorithm {
        Algorithm::Lp => {
            let (res, secs) = timed(|| -> Result<Outcome> {
                let sol = solve_lp(instance, &build_network(instance))?;
                let feasible = check_feasibility(instance, &sol.schedule, DEFAULT_FEASIBILITY_TOL)?.feasible;
                Ok(Outcome {
                    gain: Some(sol.gain),
                    feasible,
                    best_iteration: None,
                    iterations: sol.flow.pivots,
                    seconds: 0.0,
                    error: None,
                })
            });
            finish(res, secs)
        }
        Algorithm::Price => {
            let (res, secs) = timed(|| {
                price::run(instance, &config.price).map(|r| Outcome {
                    gain: r.best_gain,
                    feasible: r.best.is_some(),
                    best_iteration: r.best_iteration,
                    iterations: r.history.len(),
                    seconds: 0.0,
                    error: None,
                })
            });
            finish(res, secs)
        }
        Algorithm::Predict => {
            let (res, secs) = timed(|| {
                predict::run(instance, &config.predict).map(|r| Outcome {
                    gain: r.best_gain,
                    feasible: r.best.is_some(),
                    best_iteration: r.best_iteration,
                    iterations: r.history.len(),
                    seconds: 0.0,
                    error: None,
                })
            });
            finish(res, secs)
        }
        Algorithm::Heuristic => {
            let (res, secs) = timed(|| {
                heuristic::run(instance).map(|r| Outcome {
                    gain: r.gain,
                    feasible: r.schedule.is_some(),
                    best_iteration: None,
                    iterations: 1,
                    seconds: 0.0,
                    error: None,
                })
            });
            finish(res, secs)
        }
    }
}

fn finish(res: Result<Outcome>, seconds: f64) -> Outcome {
    match res {
        Ok(o) => Outcome { seconds, ..o },
        Err(e) => Outcome::failed(e, seconds),
    }
}

pub fn run_instance(instance: &ValleyInstance, config: &BenchConfig) -> InstanceResult {
    let run = |a| {
        let out = run_algorithm(instance, a, config);
        if let Some(e) = &out.error {
            log::warn!("{} / {}: {e}", instance.name, a.name());
        }
        out
    };
    InstanceResult {
        instance: instance.name.clone(),
        lp: run(Algorithm::Lp),
        price: run(Algorithm::Price),
        predict: run(Algorithm::Predict),
        heuristic: run(Algorithm::Heuristic),
    }
}

/// Runs every algorithm on every instance, instances in parallel. Results
/// keep the input order.
pub fn run_all(instances: &[ValleyInstance], config: &BenchConfig) -> Vec<InstanceResult> {
    instances.par_iter().map(|inst| run_instance(inst, config)).collect()
}
