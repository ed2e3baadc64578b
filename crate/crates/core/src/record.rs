use serde::Serialize;

use crate::error::{Error, Result};
use crate::hj_pendulum::PendulumInternalState;
use crate::phase::SlowFastState;

/// How long to integrate and how often to sample observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub t_max: f64,
    /// Record observables every this many steps (the last step is always recorded).
    pub sample_every: u64,
}

impl RunOptions {
    pub fn new(t_max: f64, sample_every: u64) -> Self {
        Self { t_max, sample_every: sample_every.max(1) }
    }

    /// Sampling that caps a run near 2000 rows.
    pub fn with_default_sampling(t_max: f64, h: f64) -> Self {
        let every = (t_max / (2000.0 * h)).floor();
        Self::new(t_max, if every >= 1.0 { every as u64 } else { 1 })
    }
}

/// Number of macro steps covering `[0, t_max]`.
pub fn step_count(t_max: f64, h: f64) -> Result<u64> {
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_max must be non-negative, got {t_max}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    Ok((t_max / h).round() as u64)
}

/// Final phase point of a run, in the system's natural coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FinalState {
    SlowFast(SlowFastState),
    Pendulum(PendulumInternalState),
}

/// Fixed-point iteration counts seen over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IterationStats {
    pub solves: u64,
    pub total: u64,
    pub min: u32,
    pub max: u32,
}

impl IterationStats {
    pub fn record(&mut self, iterations: usize) {
        let it = iterations as u32;
        if self.solves == 0 {
            self.min = it;
            self.max = it;
        } else {
            self.min = self.min.min(it);
            self.max = self.max.max(it);
        }
        self.solves += 1;
        self.total += iterations as u64;
    }
}

/// Time series of observables along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub series: Vec<Vec<f64>>,
    pub final_state: FinalState,
    pub steps: u64,
    pub slow_gradient_calls: u64,
    pub iterations: IterationStats,
}

/// Extremal deviation of one observable from its initial value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub key: String,
    pub abs: f64,
    /// `None` when the initial value is zero.
    pub rel: Option<f64>,
}

impl RunRecord {
    pub fn series(&self, key: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == key).map(|i| self.series[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t |X(t) - X(0)|` and its relative form for each requested key.
    pub fn max_metrics(&self, keys: &[&str]) -> Result<Vec<Metric>> {
        keys.iter()
            .map(|&key| {
                let s = self
                    .series(key)
                    .ok_or_else(|| Error::InvalidArgument(format!("no observable named {key:?}")))?;
                Ok(deviation_metric(key, s))
            })
            .collect()
    }

    pub fn final_slow_fast(&self) -> Option<&SlowFastState> {
        match &self.final_state {
            FinalState::SlowFast(s) => Some(s),
            FinalState::Pendulum(_) => None,
        }
    }

    pub fn final_pendulum(&self) -> Option<&PendulumInternalState> {
        match &self.final_state {
            FinalState::Pendulum(s) => Some(s),
            FinalState::SlowFast(_) => None,
        }
    }
}

pub fn deviation_metric(key: &str, s: &[f64]) -> Metric {
    let x0 = s.first().copied().unwrap_or(0.0);
    let abs = s.iter().map(|x| (x - x0).abs()).fold(0.0, f64::max);
    let rel = (x0 != 0.0).then(|| abs / x0.abs());
    Metric { key: key.to_string(), abs, rel }
}

/// Linear interpolation of the samples `(times, values)` at `t`, clamped
/// to the sampled range. `times` must be increasing.
pub fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.partition_point(|&x| x <= t) {
        0 => values[0],
        k if k >= times.len() => values[times.len() - 1],
        k => {
            let (t0, t1) = (times[k - 1], times[k]);
            let w = (t - t0) / (t1 - t0);
            values[k - 1] * (1.0 - w) + values[k] * w
        }
    }
}

/// Root-mean-square difference between a sampled series and a reference
/// series interpolated at the same times.
pub fn rms_deviation(times: &[f64], values: &[f64], ref_times: &[f64], ref_values: &[f64]) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    let sum: f64 = times
        .iter()
        .zip(values)
        .map(|(&t, v)| {
            let d = v - interpolate(ref_times, ref_values, t);
            d * d
        })
        .sum();
    (sum / times.len() as f64).sqrt()
}

/// Everything a stepper reports back to the sampling loop.
pub(crate) struct Driven<S> {
    pub times: Vec<f64>,
    pub series: Vec<Vec<f64>>,
    pub state: S,
    pub steps: u64,
}

/// Runs `n_steps` of `step`, sampling `observe` at step 0, every
/// `every` steps and at the last step. Times are `n * h`.
pub(crate) fn drive<S>(
    mut state: S,
    n_steps: u64,
    every: u64,
    h: f64,
    n_obs: usize,
    mut observe: impl FnMut(&S) -> Result<Vec<f64>>,
    mut step: impl FnMut(&mut S) -> Result<()>,
) -> Result<Driven<S>> {
    let every = every.max(1);
    let cap = (n_steps / every + 2) as usize;
    let mut times = Vec::with_capacity(cap);
    let mut series = vec![Vec::with_capacity(cap); n_obs];
    let mut sample = |t: f64, state: &S, times: &mut Vec<f64>, series: &mut Vec<Vec<f64>>| -> Result<()> {
        let values = observe(state)?;
        debug_assert_eq!(values.len(), n_obs);
        times.push(t);
        for (col, v) in series.iter_mut().zip(values) {
            col.push(v);
        }
        Ok(())
    };
    sample(0.0, &state, &mut times, &mut series)?;
    for n in 1..=n_steps {
        step(&mut state).map_err(|e| Error::StepFailed {
            step: n,
            time: (n - 1) as f64 * h,
            source: Box::new(e),
        })?;
        if n % every == 0 || n == n_steps {
            sample(n as f64 * h, &state, &mut times, &mut series).map_err(|e| Error::StepFailed {
                step: n,
                time: n as f64 * h,
                source: Box::new(e),
            })?;
        }
    }
    Ok(Driven { times, series, state, steps: n_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_metrics() {
        let m = deviation_metric("H", &[2.0, 2.0, 2.0]);
        assert_eq!(m.abs, 0.0);
        assert_eq!(m.rel, Some(0.0));
    }

    #[test]
    fn deviation_metric_arithmetic() {
        let m = deviation_metric("H", &[1.0, 1.1, 0.95]);
        assert!((m.abs - 0.1).abs() < 1e-15);
        assert!((m.rel.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_initial_value_skips_relative_form() {
        let m = deviation_metric("I", &[0.0, 0.5]);
        assert_eq!(m.abs, 0.5);
        assert_eq!(m.rel, None);
    }

    #[test]
    fn drive_samples_first_every_and_last() {
        let d = drive(0u64, 7, 3, 0.5, 1, |s| Ok(vec![*s as f64]), |s| {
            *s += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(d.times, vec![0.0, 1.5, 3.0, 3.5]);
        assert_eq!(d.series[0], vec![0.0, 3.0, 6.0, 7.0]);
        assert!(d.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn drive_reports_failing_step() {
        let err = drive(0u64, 5, 1, 1.0, 0, |_| Ok(vec![]), |s| {
            *s += 1;
            if *s == 3 {
                Err(Error::NonFinite("test"))
            } else {
                Ok(())
            }
        })
        .err()
        .unwrap();
        match err {
            Error::StepFailed { step, .. } => assert_eq!(step, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interpolation_and_rms() {
        let t = [0.0, 1.0, 2.0];
        let v = [0.0, 2.0, 0.0];
        assert_eq!(interpolate(&t, &v, 0.5), 1.0);
        assert_eq!(interpolate(&t, &v, 5.0), 0.0);
        assert_eq!(rms_deviation(&t, &v, &t, &v), 0.0);
        let shifted = [1.0, 3.0, 1.0];
        assert!((rms_deviation(&t, &shifted, &t, &v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn default_sampling_caps_rows() {
        assert_eq!(RunOptions::with_default_sampling(1e4, 5e-3).sample_every, 1000);
        assert_eq!(RunOptions::with_default_sampling(1.0, 0.1).sample_every, 1);
    }
}
