use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nondecreasing right-continuous step function with jumps at sorted points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    pub jump_points: Vec<f64>,
    pub jump_masses: Vec<f64>,
    pub total_mass: f64,
}

impl StepCdf {
    pub fn new(jump_points: Vec<f64>, jump_masses: Vec<f64>) -> Result<Self> {
        if jump_points.len() != jump_masses.len() {
            return Err(Error::Dimension(
                "jump points and masses differ in length".into(),
            ));
        }
        if jump_points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(
                "jump points must be strictly increasing".into(),
            ));
        }
        if jump_masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::Domain("jump masses must be nonnegative".into()));
        }
        let total_mass = jump_masses.iter().sum();
        Ok(Self {
            jump_points,
            jump_masses,
            total_mass,
        })
    }

    pub fn len(&self) -> usize {
        self.jump_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_points.is_empty()
    }

    /// `F(t)`: mass at points `≤ t`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_points.partition_point(|&p| p <= t);
        self.jump_masses[..k].iter().sum::<f64>().min(1.0)
    }

    /// `F(t-)`: mass at points `< t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.jump_points.partition_point(|&p| p < t);
        self.jump_masses[..k].iter().sum::<f64>().min(1.0)
    }

    /// Indices of jumps in the closed window `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.jump_points.partition_point(|&p| p < lo);
        let b = self.jump_points.partition_point(|&p| p <= hi);
        a..b.max(a)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.jump_points
            .iter()
            .copied()
            .zip(self.jump_masses.iter().copied())
    }
}

/// Kaplan-Meier estimate of the distribution function `1 - S(t)`.
///
/// At tied values events are processed before censorings.
pub fn kaplan_meier(values: &[f64], events: &[bool]) -> Result<StepCdf> {
    if values.len() != events.len() {
        return Err(Error::Dimension(
            "values and event flags differ in length".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "non-finite value in Kaplan-Meier input".into(),
        ));
    }
    if !events.iter().any(|&e| e) {
        return Err(Error::KmUndefined);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .total_cmp(&values[b])
            .then(events[b].cmp(&events[a]))
    });

    // Survival is `base · at_risk / base_risk`, where `base` is refreshed only
    // after a censoring. The product telescopes between censorings, so with no
    // censoring every mass is exactly `deaths / n`.
    let mut at_risk = values.len();
    let mut base = 1.0_f64;
    let mut base_risk = at_risk;
    let mut points = Vec::new();
    let mut masses = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let v = values[order[k]];
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while k < order.len() && values[order[k]] == v {
            if events[order[k]] {
                deaths += 1;
            }
            leaving += 1;
            k += 1;
        }
        if deaths > 0 {
            points.push(v);
            masses.push(base * deaths as f64 / base_risk as f64);
        }
        at_risk -= leaving;
        if leaving > deaths && at_risk > 0 {
            base *= (at_risk + leaving - deaths) as f64 / base_risk as f64;
            base_risk = at_risk;
        }
    }
    StepCdf::new(points, masses)
}
