//! The crossed benchmark sample: three storage-ratio sets, three price
//! sets and six discharge sets on a fixed six-reservoir valley.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};
use crate::model::{PlantConstraints, Reservoir, ValleyInstance, ValleyTopology};

/// Storage capacity, in hours of the reservoir's own plant at full
/// discharge, for the middle pair and the downstream pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeRatioSet {
    pub name: String,
    pub middle_hours: f64,
    pub downstream_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceProfile {
    /// Alternates between `low` and `high` every `period` steps, starting low.
    Alternating { low: f64, high: f64, period: usize },
    /// `base` everywhere except `length` steps from `start` at `peak`.
    Peak {
        base: f64,
        peak: f64,
        start: usize,
        length: usize,
    },
}

impl PriceProfile {
    pub fn prices(&self, horizon: usize) -> Vec<f64> {
        (0..horizon)
            .map(|t| match *self {
                PriceProfile::Alternating { low, high, period } => {
                    if (t / period.max(1)) % 2 == 0 {
                        low
                    } else {
                        high
                    }
                }
                PriceProfile::Peak {
                    base,
                    peak,
                    start,
                    length,
                } => {
                    if (start..start + length).contains(&t) {
                        peak
                    } else {
                        base
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    pub name: String,
    pub profile: PriceProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeSet {
    pub name: String,
    /// Minimum number of steps between two level changes.
    pub min_dwell: usize,
    /// Plants reduced to the single level 0.
    #[serde(default)]
    pub out_of_order: Vec<usize>,
}

/// The factor levels of one sample instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFactors {
    pub volume_ratio_set: String,
    pub price_set: String,
    pub discharge_set: String,
}

/// Valley data shared by every instance plus the factor sets to cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub horizon: usize,
    pub step_hours: f64,
    pub topology: ValleyTopology,
    /// Full discharge of each plant per hour.
    pub hourly_max_discharge: Vec<f64>,
    /// Generation per unit discharge at full discharge, per plant.
    pub efficiency: Vec<f64>,
    /// Discharge levels as fractions of the full discharge.
    pub level_fractions: Vec<f64>,
    /// Generation at each level as a fraction of generation at full discharge.
    pub generation_fractions: Vec<f64>,
    pub smooth_step: usize,
    /// Reservoirs without practical volume limits.
    pub large_reservoirs: Vec<usize>,
    /// Capacity of the large reservoirs in hours of full discharge.
    pub large_hours: f64,
    pub middle_reservoirs: Vec<usize>,
    pub downstream_reservoirs: Vec<usize>,
    /// Price at which stored water is valued neutrally.
    pub reference_price: f64,
    pub volume_sets: Vec<VolumeRatioSet>,
    pub price_sets: Vec<PriceSet>,
    pub discharge_sets: Vec<DischargeSet>,
    /// Relative uniform price noise drawn from the seed; 0 disables it.
    pub price_jitter: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        let dwell = [("D1", 0), ("D2", 2), ("D3", 8)];
        let mut discharge_sets: Vec<DischargeSet> = dwell
            .iter()
            .map(|&(name, d)| DischargeSet {
                name: name.into(),
                min_dwell: d,
                out_of_order: Vec::new(),
            })
            .collect();
        for (k, &(_, d)) in dwell.iter().enumerate() {
            discharge_sets.push(DischargeSet {
                name: format!("D{}", k + 4),
                min_dwell: d,
                out_of_order: vec![2, 3],
            });
        }
        SampleConfig {
            horizon: 48,
            step_hours: 0.5,
            topology: ValleyTopology {
                downstream: vec![Some(2), Some(3), Some(4), Some(4), Some(5), None],
                delay: vec![1; 6],
            },
            hourly_max_discharge: vec![180.0, 180.0, 180.0, 180.0, 360.0, 360.0],
            efficiency: vec![1.0, 1.0, 0.8, 0.8, 0.6, 0.6],
            level_fractions: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            generation_fractions: vec![0.0, 0.36, 0.69, 1.0],
            smooth_step: 2,
            large_reservoirs: vec![0, 1],
            large_hours: 100.0,
            middle_reservoirs: vec![2, 3],
            downstream_reservoirs: vec![4, 5],
            reference_price: 100.0,
            volume_sets: vec![
                VolumeRatioSet {
                    name: "V1".into(),
                    middle_hours: 1.5,
                    downstream_hours: 5.0,
                },
                VolumeRatioSet {
                    name: "V2".into(),
                    middle_hours: 0.5,
                    downstream_hours: 3.0,
                },
                VolumeRatioSet {
                    name: "V3".into(),
                    middle_hours: 5.0,
                    downstream_hours: 15.0,
                },
            ],
            price_sets: vec![
                PriceSet {
                    name: "P1".into(),
                    profile: PriceProfile::Alternating {
                        low: 99.0,
                        high: 101.0,
                        period: 8,
                    },
                },
                PriceSet {
                    name: "P2".into(),
                    profile: PriceProfile::Peak {
                        base: 100.0,
                        peak: 500.0,
                        start: 18,
                        length: 8,
                    },
                },
                PriceSet {
                    name: "P3".into(),
                    profile: PriceProfile::Alternating {
                        low: 80.0,
                        high: 120.0,
                        period: 8,
                    },
                },
            ],
            discharge_sets,
            price_jitter: 0.0,
        }
    }
}

impl SampleConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let cfg: SampleConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topology.len();
        let bad = |m: String| Err(HydroError::InvalidConfig(m));
        if self.hourly_max_discharge.len() != n || self.efficiency.len() != n {
            return bad(format!("per-plant data must have {n} entries"));
        }
        if self.level_fractions.len() != self.generation_fractions.len()
            || self.level_fractions.is_empty()
        {
            return bad("level and generation fractions must pair up".into());
        }
        if !(self.step_hours > 0.0) || self.horizon == 0 {
            return bad("horizon and step length must be positive".into());
        }
        if !(0.0..1.0).contains(&self.price_jitter) {
            return bad("price_jitter must lie in [0, 1)".into());
        }
        let groups = [
            &self.large_reservoirs,
            &self.middle_reservoirs,
            &self.downstream_reservoirs,
        ];
        let mut seen = vec![false; n];
        for g in groups {
            for &i in g {
                if i >= n || seen[i] {
                    return bad(format!("reservoir {i} misplaced in the size groups"));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("every reservoir needs a size group".into());
        }
        for d in &self.discharge_sets {
            if d.out_of_order.iter().any(|&i| i >= n) {
                return bad(format!("discharge set {} names an unknown plant", d.name));
            }
        }
        self.topology.validate(self.horizon)
    }

    /// Per-step full discharge of plant `i`.
    pub fn tmax(&self, i: usize) -> f64 {
        self.hourly_max_discharge[i] * self.step_hours
    }

    /// Water value of reservoir `i`: the reference price times the
    /// generation per unit of water summed over `i` and every plant below it.
    pub fn water_value(&self, i: usize) -> f64 {
        let mut slope = 0.0;
        let mut k = Some(i);
        while let Some(j) = k {
            slope += self.efficiency[j];
            k = self.topology.downstream[j];
        }
        self.reference_price * self.step_hours * slope
    }

    fn plant(&self, i: usize, set: &DischargeSet) -> PlantConstraints {
        if set.out_of_order.contains(&i) {
            return PlantConstraints {
                levels: vec![0.0],
                generation: vec![0.0],
                min_dwell: set.min_dwell,
                smooth_step: 1,
                initial_level: None,
            };
        }
        let tmax = self.tmax(i);
        let gmax = self.efficiency[i] * tmax;
        PlantConstraints {
            levels: self.level_fractions.iter().map(|f| f * tmax).collect(),
            generation: self.generation_fractions.iter().map(|f| f * gmax).collect(),
            min_dwell: set.min_dwell,
            smooth_step: self.smooth_step,
            initial_level: None,
        }
    }

    fn reservoirs(&self, ratios: &VolumeRatioSet) -> Vec<Reservoir> {
        let n = self.topology.len();
        let dmax: f64 = (0..n).map(|i| self.tmax(i)).sum();
        (0..n)
            .map(|i| {
                let hours = if self.large_reservoirs.contains(&i) {
                    self.large_hours
                } else if self.middle_reservoirs.contains(&i) {
                    ratios.middle_hours
                } else {
                    ratios.downstream_hours
                };
                let vmax = hours * self.hourly_max_discharge[i];
                Reservoir {
                    vmin: 0.0,
                    vmax,
                    v0: 0.5 * vmax,
                    dmax,
                    c_wat: self.water_value(i),
                }
            })
            .collect()
    }
}

/// Builds every combination of volume, price and discharge set, in that
/// nesting order. The seed only drives the optional price jitter.
pub fn generate_sample(config: &SampleConfig, seed: u64) -> Result<Vec<ValleyInstance>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.topology.len();
    let mut out = Vec::new();
    for vs in &config.volume_sets {
        for ps in &config.price_sets {
            for ds in &config.discharge_sets {
                let mut p_gen = ps.profile.prices(config.horizon);
                if config.price_jitter > 0.0 {
                    for p in p_gen.iter_mut() {
                        *p *= 1.0 + rng.gen_range(-config.price_jitter..config.price_jitter);
                    }
                }
                let inst = ValleyInstance {
                    name: format!("{}-{}-{}", vs.name, ps.name, ds.name),
                    horizon: config.horizon,
                    step_hours: config.step_hours,
                    p_gen,
                    topology: config.topology.clone(),
                    reservoirs: config.reservoirs(vs),
                    plants: (0..n).map(|i| config.plant(i, ds)).collect(),
                    inflows: vec![vec![0.0; config.horizon]; n],
                };
                inst.validate()?;
                out.push(inst);
            }
        }
    }
    Ok(out)
}

/// Splits an instance name of the form `V-P-D` into its factors.
pub fn factors_of(name: &str) -> Option<SampleFactors> {
    let mut parts = name.split('-');
    let f = SampleFactors {
        volume_ratio_set: parts.next()?.to_string(),
        price_set: parts.next()?.to_string(),
        discharge_set: parts.next()?.to_string(),
    };
    parts.next().is_none().then_some(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_crossing_has_54_instances() {
        let s = generate_sample(&SampleConfig::default(), 0).unwrap();
        assert_eq!(s.len(), 54);
        assert_eq!(s[0].name, "V1-P1-D1");
        assert_eq!(factors_of(&s[53].name).unwrap().discharge_set, "D6");
    }

    #[test]
    fn ratio_sets_size_reservoirs() {
        let cfg = SampleConfig::default();
        let s = generate_sample(&cfg, 0).unwrap();
        // V1: reservoir 5 holds 5 h of its plant's full discharge
        assert_eq!(s[0].reservoirs[4].vmax, 5.0 * cfg.hourly_max_discharge[4]);
        assert_eq!(s[0].reservoirs[2].vmax, 1.5 * cfg.hourly_max_discharge[2]);
        assert!(s.iter().all(|i| i.inflows.iter().flatten().all(|&a| a == 0.0)));
    }

    #[test]
    fn price_profiles() {
        let cfg = SampleConfig::default();
        let p1 = cfg.price_sets[0].profile.prices(48);
        assert_eq!(&p1[..9], &[99.0, 99.0, 99.0, 99.0, 99.0, 99.0, 99.0, 99.0, 101.0]);
        let p2 = cfg.price_sets[1].profile.prices(48);
        assert_eq!(p2.iter().filter(|&&p| p == 500.0).count(), 8);
        assert_eq!(p2.iter().filter(|&&p| p == 100.0).count(), 40);
    }

    #[test]
    fn d6_disables_middle_plants() {
        let s = generate_sample(&SampleConfig::default(), 0).unwrap();
        let d6 = s.iter().find(|i| i.name.ends_with("D6")).unwrap();
        assert_eq!(d6.plants[2].levels, vec![0.0]);
        assert_eq!(d6.plants[3].tmax(), 0.0);
        assert_eq!(d6.plants[2].min_dwell, 8);
    }

    #[test]
    fn jitter_is_seeded() {
        let cfg = SampleConfig {
            price_jitter: 0.05,
            ..Default::default()
        };
        let a = generate_sample(&cfg, 7).unwrap();
        let b = generate_sample(&cfg, 7).unwrap();
        let c = generate_sample(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].p_gen, c[0].p_gen);
    }

    #[test]
    fn water_value_sums_cascade() {
        let cfg = SampleConfig::default();
        assert!((cfg.water_value(0) - 100.0 * 0.5 * (1.0 + 0.8 + 0.6 + 0.6)).abs() < 1e-12);
        assert!((cfg.water_value(5) - 30.0).abs() < 1e-12);
    }
}
