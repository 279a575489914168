use std::time::Instant;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::classifier::AnalyticClassifier;
use crate::error::Result;
use crate::rng::Xoshiro256StarStar;

use super::experiment::PreparedRun;

/// Least-squares fit of time against task index with a two-sided t-test on
/// the slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeTest {
    pub slope: f64,
    pub intercept: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub n: usize,
}

impl SlopeTest {
    /// Slope is positive and the null of zero slope is rejected at `alpha`.
    pub fn significant_positive(&self, alpha: f64) -> bool {
        self.slope > 0.0 && self.p_value < alpha
    }
}

/// `None` for fewer than three points.
pub fn slope_test(times: &[f64]) -> Option<SlopeTest> {
    let n = times.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = times.iter().sum::<f64>() / nf;
    let sxx: f64 = (0..n).map(|i| (i as f64 - x_mean).powi(2)).sum();
    let sxy: f64 = times.iter().enumerate().map(|(i, y)| (i as f64 - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = times
        .iter()
        .enumerate()
        .map(|(i, y)| (y - intercept - slope * i as f64).powi(2))
        .sum();
    let dof = nf - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let (t_stat, p_value) = if se > 0.0 {
        let t = slope / se;
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        (slope.signum() * f64::INFINITY, 0.0)
    };
    Some(SlopeTest {
        slope,
        intercept,
        t_stat,
        p_value,
        n,
    })
}

/// Mean of a list of durations; zero for an empty list.
pub fn mean_seconds(times: &[f64]) -> f64 {
    if times.is_empty() {
        0.0
    } else {
        times.iter().sum::<f64>() / times.len() as f64
    }
}

/// Re-times every incremental update of a run, drift-controlled.
///
/// The classifier state before each step is kept, then each step's update is
/// replayed `repeats` times from a fresh copy of that state, with all
/// `(step, repeat)` pairs executed in a seeded random order. Slow clock or
/// frequency drift therefore lands on random steps instead of tracking the
/// step index. Returns the median seconds per step.
pub fn retime_updates(prepared: &PreparedRun, repeats: usize, seed: u64) -> Result<Vec<f64>> {
    let steps = prepared.tasks.len().saturating_sub(1);
    let base = &prepared.tasks[0];
    let mut state = AnalyticClassifier::recalibrate(&base.train_features, &base.train_labels, prepared.gamma)?;
    let mut before = Vec::with_capacity(steps);
    for task in &prepared.tasks[1..] {
        before.push(state.clone());
        state.update(&task.train_features, &task.train_labels)?;
    }
    let mut schedule: Vec<usize> = (0..steps).flat_map(|s| std::iter::repeat(s).take(repeats.max(1))).collect();
    Xoshiro256StarStar::derive(seed, 4).shuffle(&mut schedule);
    let mut samples = vec![Vec::with_capacity(repeats.max(1)); steps];
    for s in schedule {
        let task = &prepared.tasks[s + 1];
        let mut c = before[s].clone();
        let started = Instant::now();
        c.update(&task.train_features, &task.train_labels)?;
        samples[s].push(started.elapsed().as_secs_f64());
    }
    Ok(samples
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m]
            } else {
                0.5 * (v[m - 1] + v[m])
            }
        })
        .collect())
}
