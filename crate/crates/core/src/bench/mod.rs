//! Benchmark sample, runner and scoring.

mod run;
mod sample;
mod score;

pub use run::{run_algorithm, run_all, run_instance, Algorithm, BenchConfig, InstanceResult, Outcome};
pub use sample::{
    factors_of, generate_sample, DischargeSet, PriceProfile, PriceSet, SampleConfig,
    SampleFactors, VolumeRatioSet,
};
pub use score::{
    render_summary, score, write_instance_csv, write_summary_csv, write_timings_csv, GroupSummary,
    InstanceScore, ScoreTable,
};

use crate::model::{PlantConstraints, Reservoir, ValleyInstance, ValleyTopology};

/// Two-reservoir valley built to defeat the nearest-schedule heuristic.
///
/// The relaxation releases 1.5 upstream in the first step, which the
/// heuristic rounds up to the 2.0 level. The downstream reservoir holds 0.5,
/// turbines at most 1.0 and cannot spill, so 2.0 arriving at once leaves it
/// no admissible schedule. Releasing 1.0 per step works.
pub fn adversarial_instance() -> ValleyInstance {
    let h = 4;
    ValleyInstance {
        name: "adversarial".into(),
        horizon: h,
        step_hours: 1.0,
        p_gen: vec![200.0, 150.0, 100.0, 50.0],
        topology: ValleyTopology {
            downstream: vec![Some(1), None],
            delay: vec![0, 0],
        },
        reservoirs: vec![
            Reservoir {
                vmin: 0.0,
                vmax: 10.0,
                v0: 3.0,
                dmax: 0.0,
                c_wat: 0.0,
            },
            Reservoir {
                vmin: 0.0,
                vmax: 0.5,
                v0: 0.0,
                dmax: 0.0,
                c_wat: 0.0,
            },
        ],
        plants: vec![
            PlantConstraints {
                levels: vec![0.0, 1.0, 2.0],
                generation: vec![0.0, 1.0, 2.0],
                min_dwell: 0,
                smooth_step: 2,
                initial_level: None,
            },
            PlantConstraints {
                levels: vec![0.0, 0.5, 1.0],
                generation: vec![0.0, 0.75, 1.5],
                min_dwell: 0,
                smooth_step: 2,
                initial_level: None,
            },
        ],
        inflows: vec![vec![0.0; h]; 2],
    }
}
