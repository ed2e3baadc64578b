//! Experiment harness behind the `oscint` binary: drift runs, parameter
//! scans, action-exchange comparisons and cost/accuracy sweeps, written as
//! CSV with a leading `# meta:` JSON line.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, Baseline, BaselineConfig};
use crate::config::IntegratorConfig;
use crate::error::{Error, Result};
use crate::hj_matrix::{self, MatrixScheme};
use crate::hj_pendulum::{self, PendulumScheme};
use crate::hj_scalar::{self, ScalarScheme};
use crate::record::{interpolate, RunOptions, RunRecord};
use crate::systems::{
    elastic_pendulum, fpu_initial_state, fpu_modified, pendulum_initial_state, quartic_initial_state, quartic_multi,
};

/// Environment variable capping scan parallelism.
pub const THREADS_ENV: &str = "OSCINT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Fpu,
    Quartic3,
    Quartic4,
    Pendulum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    /// Preconditioned scheme; first-order variant on quartic/pendulum.
    Hj,
    HjNoloop,
    HjSymmetric,
    Verlet,
    Impulse,
    Mollify,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fpu => "fpu",
            Self::Quartic3 => "quartic3",
            Self::Quartic4 => "quartic4",
            Self::Pendulum => "pendulum",
        })
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hj => "hj",
            Self::HjNoloop => "hj-noloop",
            Self::HjSymmetric => "hj-symmetric",
            Self::Verlet => "verlet",
            Self::Impulse => "impulse",
            Self::Mollify => "mollify",
        })
    }
}

impl FromStr for SystemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        <Self as clap::ValueEnum>::from_str(s, true).map_err(|_| Error::InvalidArgument(format!("unknown system {s:?}")))
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        <Self as clap::ValueEnum>::from_str(s, true)
            .map_err(|_| Error::InvalidArgument(format!("unknown integrator {s:?}")))
    }
}

/// Rejects system/integrator pairs that have no implementation.
pub fn check_compatible(system: SystemKind, integrator: IntegratorKind) -> Result<()> {
    let ok = match integrator {
        IntegratorKind::HjNoloop => system == SystemKind::Fpu,
        IntegratorKind::HjSymmetric => system != SystemKind::Fpu,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("integrator {integrator} is not available for system {system}")))
    }
}

/// Quantities whose extremal variation the scans report.
pub fn invariant_keys(system: SystemKind) -> &'static [&'static str] {
    match system {
        SystemKind::Fpu | SystemKind::Pendulum => &["H", "I"],
        SystemKind::Quartic3 => &["H", "I", "I_sqrt2"],
        SystemKind::Quartic4 => &["H", "I", "I_sqrt2", "I4", "I124"],
    }
}

/// Fast-action columns compared in exchange runs.
pub fn action_keys(system: SystemKind) -> Vec<String> {
    match system {
        SystemKind::Fpu | SystemKind::Quartic3 => (1..=3).map(|j| format!("I{j}")).collect(),
        SystemKind::Quartic4 => (1..=4).map(|j| format!("I{j}")).collect(),
        SystemKind::Pendulum => vec!["I".into()],
    }
}

/// One trajectory to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub system: SystemKind,
    pub integrator: IntegratorKind,
    pub eps: f64,
    pub h: f64,
    pub t_max: f64,
    /// Defaults to roughly 2000 samples per run.
    pub sample_every: Option<u64>,
    /// Defaults to `eps / 100`.
    pub inner_dt: Option<f64>,
}

impl RunPoint {
    pub fn options(&self) -> RunOptions {
        match self.sample_every {
            Some(k) => RunOptions::new(self.t_max, k),
            None => RunOptions::with_default_sampling(self.t_max, self.h),
        }
    }

    fn baseline(&self, scheme: Baseline) -> BaselineConfig {
        let cfg = BaselineConfig::new(scheme, self.eps, self.h);
        match self.inner_dt {
            Some(dt) => cfg.with_inner_dt(dt),
            None => cfg,
        }
    }
}

fn baseline_of(kind: IntegratorKind) -> Option<Baseline> {
    match kind {
        IntegratorKind::Verlet => Some(Baseline::Verlet),
        IntegratorKind::Impulse => Some(Baseline::Impulse),
        IntegratorKind::Mollify => Some(Baseline::Mollify),
        _ => None,
    }
}

/// Integrates one trajectory from the system's default initial condition.
pub fn run_point(pt: &RunPoint) -> Result<RunRecord> {
    check_compatible(pt.system, pt.integrator)?;
    let cfg = IntegratorConfig::new(pt.eps, pt.h);
    cfg.validate()?;
    if let Some(w) = cfg.regime_warning() {
        if baseline_of(pt.integrator).is_none() {
            log::warn!("{w}");
        }
    }
    let opts = pt.options();
    match pt.system {
        SystemKind::Fpu => {
            let sys = fpu_modified();
            let st = fpu_initial_state(pt.eps);
            match pt.integrator {
                IntegratorKind::Hj => hj_scalar::run(&st, &sys, &cfg, &opts, ScalarScheme::Implicit),
                IntegratorKind::HjNoloop => hj_scalar::run(&st, &sys, &cfg, &opts, ScalarScheme::NoLoop),
                other => baselines::run_scalar(&st, &sys, &pt.baseline(baseline_of(other).expect("baseline")), &opts),
            }
        }
        SystemKind::Quartic3 | SystemKind::Quartic4 => {
            let sys = quartic_multi(if pt.system == SystemKind::Quartic3 { 3 } else { 4 })?;
            let st = quartic_initial_state(&sys, pt.eps);
            match pt.integrator {
                IntegratorKind::Hj => hj_matrix::run(&st, &sys, &cfg, &opts, MatrixScheme::Forward),
                IntegratorKind::HjSymmetric => hj_matrix::run(&st, &sys, &cfg, &opts, MatrixScheme::Symmetric),
                other => baselines::run_matrix(&st, &sys, &pt.baseline(baseline_of(other).expect("baseline")), &opts),
            }
        }
        SystemKind::Pendulum => {
            let sys = elastic_pendulum();
            let st = pendulum_initial_state(pt.eps);
            match pt.integrator {
                IntegratorKind::Hj => hj_pendulum::run(&st, &sys, &cfg, &opts, PendulumScheme::Forward),
                IntegratorKind::HjSymmetric => hj_pendulum::run(&st, &sys, &cfg, &opts, PendulumScheme::Symmetric),
                other => baselines::run_pendulum(&st, &sys, &pt.baseline(baseline_of(other).expect("baseline")), &opts),
            }
        }
    }
}

/// Scanned parameter. `h_over_eps` keeps `eps` fixed and sets
/// `h = v eps`; `h_over_pi_eps` keeps `h` fixed and sets `eps = h / (pi v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParam {
    H,
    Eps,
    HOverEps,
    HOverPiEps,
}

/// `param:min:max:points`, points evenly spaced and including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanAxis {
    pub param: ScanParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl FromStr for ScanAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("scan axis must read param:min:max:points, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [param, min, max, points] = parts.as_slice() else {
            return Err(bad());
        };
        let param = match *param {
            "h" => ScanParam::H,
            "eps" => ScanParam::Eps,
            "h_over_eps" => ScanParam::HOverEps,
            "h_over_pi_eps" => ScanParam::HOverPiEps,
            other => return Err(Error::InvalidArgument(format!("unknown scan parameter {other:?}"))),
        };
        let min: f64 = min.parse().map_err(|_| bad())?;
        let max: f64 = max.parse().map_err(|_| bad())?;
        let points: usize = points.parse().map_err(|_| bad())?;
        if points == 0 || !(min.is_finite() && max.is_finite()) {
            return Err(bad());
        }
        if points > 1 && !(max > min) {
            return Err(Error::InvalidArgument(format!("scan range must satisfy min < max, got {min}..{max}")));
        }
        Ok(Self { param, min, max, points })
    }
}

impl ScanAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|k| if k + 1 == self.points { self.max } else { self.min + step * k as f64 }).collect()
    }

    /// `(eps, h)` for one scan value.
    pub fn apply(&self, value: f64, eps: f64, h: f64) -> (f64, f64) {
        match self.param {
            ScanParam::H => (eps, value),
            ScanParam::Eps => (value, h),
            ScanParam::HOverEps => (eps, value * eps),
            ScanParam::HOverPiEps => (h / (std::f64::consts::PI * value), h),
        }
    }
}

/// Full description of one CLI invocation; echoed in the CSV meta line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub command: String,
    pub system: SystemKind,
    pub integrator: IntegratorKind,
    pub eps: f64,
    pub h: f64,
    pub t_max: f64,
    pub sample_every: Option<u64>,
    pub inner_dt: Option<f64>,
    pub scan: Option<ScanAxis>,
    pub reference: bool,
}

impl ExperimentSpec {
    pub fn point(&self) -> RunPoint {
        RunPoint {
            system: self.system,
            integrator: self.integrator,
            eps: self.eps,
            h: self.h,
            t_max: self.t_max,
            sample_every: self.sample_every,
            inner_dt: self.inner_dt,
        }
    }

    fn scan_points(&self) -> Result<Vec<(f64, RunPoint)>> {
        let axis = self
            .scan
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs --scan param:min:max:points", self.command)))?;
        Ok(axis
            .values()
            .into_iter()
            .map(|v| {
                let (eps, h) = axis.apply(v, self.eps, self.h);
                (v, RunPoint { eps, h, ..self.point() })
            })
            .collect())
    }

    fn meta_line(&self) -> String {
        let meta = serde_json::json!({
            "program": "oscint",
            "version": env!("CARGO_PKG_VERSION"),
            "spec": self,
        });
        format!("# meta: {meta}")
    }
}

/// In-memory CSV table; rendered with shortest round-trip formatting.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.meta);
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes the table to `path` via a temporary sibling file, so a failed
    /// write never leaves a partial CSV behind.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        let result = (|| -> Result<()> {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(self.render().as_bytes())?;
            f.sync_all()?;
            std::fs::rename(&tmp, path)?;
            Ok(())
        })();
        if result.is_err() {
            let _ = std::fs::remove_file(&tmp);
        }
        result
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Result of a command: the table and whether every point completed.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub table: Table,
    pub complete: bool,
}

/// Time series `t, H, I, ...` of one run.
pub fn cmd_drift(spec: &ExperimentSpec) -> Result<CommandOutput> {
    let rec = run_point(&spec.point())?;
    let mut header = vec!["t".to_string()];
    header.extend(rec.names.iter().cloned());
    let rows = (0..rec.len())
        .map(|i| std::iter::once(rec.times[i]).chain(rec.series.iter().map(|s| s[i])).collect())
        .collect();
    Ok(CommandOutput { table: Table { meta: spec.meta_line(), header, rows }, complete: true })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::InvalidArgument(format!("cannot start worker threads: {e}")))
}

/// Runs every point, possibly in parallel; results keep scan order.
fn run_all<T: Send>(points: &[(f64, RunPoint)], f: impl Fn(&RunPoint) -> T + Sync) -> Result<Vec<T>> {
    let pool = thread_pool()?;
    Ok(pool.install(|| points.par_iter().map(|(_, pt)| f(pt)).collect()))
}

fn metric_columns(system: SystemKind) -> Vec<String> {
    let mut cols = Vec::new();
    for key in invariant_keys(system) {
        let tag = if *key == "H" { "err" } else { "var" };
        cols.push(format!("max_{tag}_{key}"));
        cols.push(format!("rel_{tag}_{key}"));
    }
    cols
}

fn metric_values(system: SystemKind, rec: &RunRecord) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for m in rec.max_metrics(invariant_keys(system))? {
        v.push(m.abs);
        v.push(m.rel.unwrap_or(f64::NAN));
    }
    Ok(v)
}

/// Extremal invariant variations over a parameter scan.
///
/// Columns: `scan_value, eps, h`, then `max_*`/`rel_*` pairs for each
/// invariant, `slow_gradient_calls`, `diverged`, and with `reference` the
/// Verlet (`dt = eps/100`) variation of `I` as `ref_max_var_I`.
pub fn cmd_scan(spec: &ExperimentSpec) -> Result<CommandOutput> {
    let points = spec.scan_points()?;
    let n_metrics = metric_columns(spec.system).len();
    let results = run_all(&points, |pt| {
        let main = run_point(pt).and_then(|rec| Ok((metric_values(pt.system, &rec)?, rec.slow_gradient_calls)));
        let reference = spec.reference.then(|| {
            let ref_pt = RunPoint { integrator: IntegratorKind::Verlet, h: pt.eps / 100.0, sample_every: None, ..*pt };
            run_point(&ref_pt).and_then(|rec| Ok(rec.max_metrics(&["I"])?[0].abs))
        });
        (main, reference)
    })?;
    let mut header: Vec<String> = ["scan_value", "eps", "h"].iter().map(|s| s.to_string()).collect();
    header.extend(metric_columns(spec.system));
    header.push("slow_gradient_calls".into());
    header.push("diverged".into());
    if spec.reference {
        header.push("ref_max_var_I".into());
    }
    let mut complete = true;
    let rows = points
        .iter()
        .zip(results)
        .map(|((v, pt), (main, reference))| {
            let mut row = vec![*v, pt.eps, pt.h];
            match main {
                Ok((metrics, calls)) => {
                    row.extend(metrics);
                    row.push(calls as f64);
                    row.push(0.0);
                }
                Err(e) => {
                    log::warn!("scan point {v} failed: {e}");
                    complete = false;
                    row.extend(std::iter::repeat_n(f64::NAN, n_metrics + 1));
                    row.push(1.0);
                }
            }
            if let Some(r) = reference {
                row.push(r.unwrap_or_else(|e| {
                    log::warn!("reference run at scan point {v} failed: {e}");
                    complete = false;
                    f64::NAN
                }));
            }
            row
        })
        .collect();
    Ok(CommandOutput { table: Table { meta: spec.meta_line(), header, rows }, complete })
}

/// Fast actions of the chosen integrator next to a Verlet reference with
/// `dt = eps/100` (or `--inner-dt`), sampled at the integrator's times.
pub fn cmd_exchange(spec: &ExperimentSpec) -> Result<CommandOutput> {
    let pt = spec.point();
    let rec = run_point(&pt)?;
    let ref_dt = spec.inner_dt.unwrap_or(spec.eps / 100.0);
    let interval = rec.times.get(1).copied().unwrap_or(spec.h);
    let ref_every = ((interval / ref_dt).round() as u64).max(1);
    let ref_pt = RunPoint {
        integrator: IntegratorKind::Verlet,
        h: ref_dt,
        sample_every: Some(ref_every),
        inner_dt: None,
        ..pt
    };
    let reference = run_point(&ref_pt)?;
    let keys = action_keys(spec.system);
    let mut header = vec!["t".to_string()];
    header.extend(keys.iter().map(|k| format!("{k}_{}", spec.integrator)));
    header.extend(keys.iter().map(|k| format!("{k}_verlet")));
    let series = |r: &RunRecord, k: &str| -> Result<Vec<f64>> {
        r.series(k)
            .map(|s| s.to_vec())
            .ok_or_else(|| Error::InvalidArgument(format!("no observable named {k:?}")))
    };
    let main: Vec<Vec<f64>> = keys.iter().map(|k| series(&rec, k)).collect::<Result<_>>()?;
    let refs: Vec<Vec<f64>> = keys.iter().map(|k| series(&reference, k)).collect::<Result<_>>()?;
    let rows = rec
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut row = vec![t];
            row.extend(main.iter().map(|s| s[i]));
            row.extend(refs.iter().map(|s| interpolate(&reference.times, s, t)));
            row
        })
        .collect();
    Ok(CommandOutput { table: Table { meta: spec.meta_line(), header, rows }, complete: true })
}

/// Cost (slow-gradient evaluations) against the extremal energy error over
/// a scan, `h` by default.
pub fn cmd_efficiency(spec: &ExperimentSpec) -> Result<CommandOutput> {
    let points = spec.scan_points()?;
    let results = run_all(&points, |pt| {
        run_point(pt).and_then(|rec| Ok((rec.slow_gradient_calls, rec.max_metrics(&["H"])?.remove(0))))
    })?;
    let header = ["scan_value", "eps", "h", "slow_gradient_calls", "max_err_H", "rel_err_H", "diverged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut complete = true;
    let rows = points
        .iter()
        .zip(results)
        .map(|((v, pt), r)| match r {
            Ok((calls, m)) => vec![*v, pt.eps, pt.h, calls as f64, m.abs, m.rel.unwrap_or(f64::NAN), 0.0],
            Err(e) => {
                log::warn!("efficiency point {v} failed: {e}");
                complete = false;
                vec![*v, pt.eps, pt.h, f64::NAN, f64::NAN, f64::NAN, 1.0]
            }
        })
        .collect();
    Ok(CommandOutput { table: Table { meta: spec.meta_line(), header, rows }, complete })
}

/// Dispatches on `spec.command`.
pub fn run_command(spec: &ExperimentSpec) -> Result<CommandOutput> {
    match spec.command.as_str() {
        "drift" => cmd_drift(spec),
        "scan" => cmd_scan(spec),
        "exchange" => cmd_exchange(spec),
        "efficiency" => cmd_efficiency(spec),
        other => Err(Error::InvalidArgument(format!("unknown command {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(command: &str, system: SystemKind, integrator: IntegratorKind, eps: f64, h: f64, t_max: f64) -> ExperimentSpec {
        ExperimentSpec {
            command: command.into(),
            system,
            integrator,
            eps,
            h,
            t_max,
            sample_every: None,
            inner_dt: None,
            scan: None,
            reference: false,
        }
    }

    #[test]
    fn scan_axis_parsing() {
        let ax: ScanAxis = "h_over_pi_eps:0.5:6:12".parse().unwrap();
        assert_eq!(ax.param, ScanParam::HOverPiEps);
        let v = ax.values();
        assert_eq!(v.len(), 12);
        assert_eq!((v[0], v[11]), (0.5, 6.0));
        assert_eq!("eps:1e-3:1e-3:1".parse::<ScanAxis>().unwrap().values(), vec![1e-3]);
        for bad in ["h:1:2", "dt:1:2:3", "h:2:1:3", "h:1:2:0", "h:a:2:3"] {
            assert!(bad.parse::<ScanAxis>().is_err(), "{bad}");
        }
    }

    #[test]
    fn scan_axis_maps_to_step_and_stiffness() {
        let ax = |param| ScanAxis { param, min: 1.0, max: 2.0, points: 2 };
        assert_eq!(ax(ScanParam::H).apply(0.1, 1e-3, 5e-3), (1e-3, 0.1));
        assert_eq!(ax(ScanParam::Eps).apply(0.1, 1e-3, 5e-3), (0.1, 5e-3));
        assert_eq!(ax(ScanParam::HOverEps).apply(4.0, 1e-3, 5e-3), (1e-3, 4e-3));
        let (eps, h) = ax(ScanParam::HOverPiEps).apply(2.0, 1.0, 0.02);
        assert_eq!(h, 0.02);
        assert!((h / (std::f64::consts::PI * eps) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn compatibility_rules() {
        assert!(check_compatible(SystemKind::Fpu, IntegratorKind::HjNoloop).is_ok());
        assert!(check_compatible(SystemKind::Fpu, IntegratorKind::HjSymmetric).is_err());
        assert!(check_compatible(SystemKind::Pendulum, IntegratorKind::HjNoloop).is_err());
        assert!(check_compatible(SystemKind::Quartic4, IntegratorKind::Mollify).is_ok());
        assert_eq!("quartic3".parse::<SystemKind>().unwrap(), SystemKind::Quartic3);
        assert_eq!("hj-noloop".parse::<IntegratorKind>().unwrap(), IntegratorKind::HjNoloop);
        assert_eq!(IntegratorKind::HjSymmetric.to_string(), "hj-symmetric");
    }

    #[test]
    fn zero_horizon_drift_is_one_row() {
        let out = cmd_drift(&spec("drift", SystemKind::Fpu, IntegratorKind::Hj, 1e-3, 5e-3, 0.0)).unwrap();
        let text = out.table.render();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# meta: {"));
        assert_eq!(lines[1], "t,H,I,I1,I2,I3");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("0,2.500003"));
        assert!(!text.contains('\r'));
        let meta: serde_json::Value = serde_json::from_str(lines[0].trim_start_matches("# meta: ")).unwrap();
        assert_eq!(meta["spec"]["system"], "fpu");
    }

    #[test]
    fn single_point_scan_matches_drift() {
        let mut s = spec("scan", SystemKind::Pendulum, IntegratorKind::HjSymmetric, 2e-3, 0.02, 5.0);
        s.scan = Some(ScanAxis { param: ScanParam::H, min: 0.02, max: 0.02, points: 1 });
        let scan = cmd_scan(&s).unwrap();
        assert!(scan.complete);
        let drift = cmd_drift(&spec("drift", SystemKind::Pendulum, IntegratorKind::HjSymmetric, 2e-3, 0.02, 5.0)).unwrap();
        let h = drift.table.column("H").unwrap();
        let max_err = h.iter().map(|x| (x - h[0]).abs()).fold(0.0, f64::max);
        assert_eq!(scan.table.column("max_err_H").unwrap()[0], max_err);
        assert_eq!(scan.table.column("diverged").unwrap()[0], 0.0);
    }

    #[test]
    fn diverging_points_are_flagged() {
        let mut s = spec("scan", SystemKind::Fpu, IntegratorKind::Impulse, 1e-3, 1e-2, 1.0);
        s.inner_dt = Some(3e-3);
        s.scan = Some(ScanAxis { param: ScanParam::Eps, min: 1e-3, max: 1e-2, points: 2 });
        let out = cmd_scan(&s).unwrap();
        assert!(!out.complete);
        assert_eq!(out.table.column("diverged").unwrap(), vec![1.0, 0.0]);
        assert!(out.table.column("max_err_H").unwrap()[0].is_nan());
        assert!(out.table.column("max_err_H").unwrap()[1].is_finite());
    }

    #[test]
    fn failed_write_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let table = Table { meta: "# meta: {}".into(), header: vec!["t".into()], rows: vec![vec![0.0]] };
        let missing = dir.path().join("absent").join("out.csv");
        assert!(table.write(&missing).is_err());
        assert!(!missing.exists());
        let ok = dir.path().join("out.csv");
        table.write(&ok).unwrap();
        assert_eq!(std::fs::read_to_string(&ok).unwrap(), "# meta: {}\nt\n0\n");
        assert!(!dir.path().join("out.partial").exists());
    }
}
