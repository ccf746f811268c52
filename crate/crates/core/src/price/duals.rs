use serde::{Deserialize, Serialize};

/// Multipliers on the water balance, indexed `[reservoir][step]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPrices {
    pub p: Vec<Vec<f64>>,
}

impl DualPrices {
    pub fn zeros(reservoirs: usize, horizon: usize) -> Self {
        DualPrices {
            p: vec![vec![0.0; horizon]; reservoirs],
        }
    }

    pub fn reservoirs(&self) -> usize {
        self.p.len()
    }

    pub fn horizon(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().flatten().all(|x| x.is_finite())
    }

    /// Largest absolute difference to `other`.
    pub fn distance(&self, other: &DualPrices) -> f64 {
        self.p
            .iter()
            .flatten()
            .zip(other.p.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `pi = p + c * residual`.
pub fn shift_price(p: &DualPrices, c: f64, residual: &[Vec<f64>]) -> DualPrices {
    DualPrices {
        p: p
            .p
            .iter()
            .zip(residual)
            .map(|(row, h)| row.iter().zip(h).map(|(x, r)| x + c * r).collect())
            .collect(),
    }
}

/// `p' = p + step * residual`.
pub fn update_multipliers(p: &DualPrices, step: f64, residual: &[Vec<f64>]) -> DualPrices {
    shift_price(p, step, residual)
}
