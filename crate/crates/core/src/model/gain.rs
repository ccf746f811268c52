use crate::error::{HydroError, Result};

use super::{dynamics_residual, Schedule, ValleyInstance, DEFAULT_FEASIBILITY_TOL};

/// Generation revenue plus end-of-horizon water value change, without any
/// consistency check.
pub fn revenue_gain(instance: &ValleyInstance, schedule: &Schedule) -> f64 {
    let mut gain = 0.0;
    for (i, res) in instance.reservoirs.iter().enumerate() {
        for (t, &x) in schedule.discharge[i].iter().enumerate() {
            gain += instance.revenue(i, t, x);
        }
        let v = &schedule.volume[i];
        gain += res.c_wat * (v[instance.horizon] - v[0]);
    }
    gain
}

/// Gain of a consistent schedule:
/// `sum_i sum_t p_gen(t) gen_i(T_i(t)) step_hours + sum_i c_wat_i (V_i(H) - V_i(0))`.
///
/// This is the negation of the minimized cost; larger is better.
pub fn evaluate_gain(instance: &ValleyInstance, schedule: &Schedule) -> Result<f64> {
    let residual = dynamics_residual(instance, schedule)?;
    let mut worst = 0.0_f64;
    let mut inconsistent = false;
    for (i, row) in residual.iter().enumerate() {
        let eps = DEFAULT_FEASIBILITY_TOL * instance.reservoirs[i].vmax.abs().max(1.0);
        for &r in row {
            worst = worst.max(r.abs());
            inconsistent |= r.abs() > eps;
        }
    }
    if inconsistent {
        return Err(HydroError::InconsistentSchedule {
            max_residual: worst,
        });
    }
    Ok(revenue_gain(instance, schedule))
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn idle_schedule_has_zero_gain() {
        let inst = chain2(4, 1);
        assert_eq!(evaluate_gain(&inst, &Schedule::zero(&inst)).unwrap(), 0.0);
    }

    #[test]
    fn constant_price_direct_sum() {
        let mut inst = single(&[0.0, 1.0], 2, 10.0, 20.0);
        inst.step_hours = 0.5;
        let s = Schedule::from_releases(&inst, vec![vec![1.0, 1.0]], vec![vec![0.0; 2]]).unwrap();
        assert_eq!(evaluate_gain(&inst, &s).unwrap(), 200.0 * 0.5);
    }

    #[test]
    fn neutral_water_value_cancels_revenue() {
        let mut inst = single(&[0.0, 1.0, 2.0], 3, 10.0, 20.0);
        inst.reservoirs[0].c_wat = 100.0 * 1.0 * inst.step_hours;
        let s = Schedule::from_releases(&inst, vec![vec![2.0, 1.0, 0.0]], vec![vec![0.0; 3]])
            .unwrap();
        assert!(evaluate_gain(&inst, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn inconsistent_schedule_rejected() {
        let inst = single(&[0.0, 1.0], 2, 10.0, 20.0);
        let mut s = Schedule::zero(&inst);
        s.discharge[0][0] = 1.0;
        assert!(matches!(
            evaluate_gain(&inst, &s),
            Err(HydroError::InconsistentSchedule { .. })
        ));
    }
}
