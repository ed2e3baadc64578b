//! Step-by-step driver over any supported system/integrator pair, used by
//! the C interface. States are exchanged in natural coordinates:
//! `(q1, q2, p1, p2)` for the slow/fast systems and `(a, r, p_a, p_r)` for
//! the pendulum.

use crate::baselines::{
    kick_force, mts_step, total_force, verlet_step, BaselineConfig, MatrixSplit, PendulumSplit, ScalarSplit,
    SplitPotential,
};
use crate::config::IntegratorConfig;
use crate::error::{Error, Result};
use crate::experiments::{check_compatible, IntegratorKind, SystemKind};
use crate::hj_matrix::{self, matrix_observable_names, matrix_observables};
use crate::hj_pendulum::{
    step_pendulum, step_pendulum_symmetric, to_cartesian, to_internal, PendulumCartesianState, PendulumInternalState,
    MIN_RADIUS, PENDULUM_OBSERVABLES,
};
use crate::hj_scalar::{self, finalize_reduced, init_reduced, scalar_observable_names, scalar_observables, ReducedScalarState};
use crate::phase::SlowFastState;
use crate::systems::{
    elastic_pendulum, energy_pendulum, fpu_initial_state, fpu_modified, pendulum_initial_state, pendulum_invariant,
    quartic_initial_state, quartic_multi, Counting, ElasticPendulum, MatrixFreqSystem, ModifiedFpu, QuarticMulti,
};

#[derive(Debug, Clone)]
enum Model {
    Fpu(ModifiedFpu),
    Quartic(QuarticMulti),
    Pendulum(ElasticPendulum),
}

#[derive(Debug, Clone)]
enum Live {
    Reduced(ReducedScalarState),
    Phase(SlowFastState),
    Polar(PendulumInternalState),
    /// Baseline coordinates; Cartesian for the pendulum. `kick` caches
    /// the force of the next half kick.
    Flat { q: Vec<f64>, p: Vec<f64>, kick: Option<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub struct Simulation {
    system: SystemKind,
    integrator: IntegratorKind,
    cfg: IntegratorConfig,
    baseline: Option<BaselineConfig>,
    model: Model,
    live: Live,
    steps: u64,
    calls: u64,
}

impl Simulation {
    /// Starts from the system's default initial condition.
    pub fn new(system: SystemKind, integrator: IntegratorKind, eps: f64, h: f64) -> Result<Self> {
        check_compatible(system, integrator)?;
        let cfg = IntegratorConfig::new(eps, h);
        cfg.validate()?;
        let baseline = match integrator {
            IntegratorKind::Verlet => Some(crate::baselines::Baseline::Verlet),
            IntegratorKind::Impulse => Some(crate::baselines::Baseline::Impulse),
            IntegratorKind::Mollify => Some(crate::baselines::Baseline::Mollify),
            _ => None,
        }
        .map(|b| BaselineConfig::new(b, eps, h));
        if let Some(b) = &baseline {
            b.mts().validate()?;
        }
        let model = match system {
            SystemKind::Fpu => Model::Fpu(fpu_modified()),
            SystemKind::Quartic3 => Model::Quartic(quartic_multi(3)?),
            SystemKind::Quartic4 => Model::Quartic(quartic_multi(4)?),
            SystemKind::Pendulum => Model::Pendulum(elastic_pendulum()),
        };
        let initial = match &model {
            Model::Fpu(_) => fpu_initial_state(eps).to_flat(),
            Model::Quartic(q) => quartic_initial_state(q, eps).to_flat(),
            Model::Pendulum(_) => pendulum_initial_state(eps).to_array().to_vec(),
        };
        let mut sim = Self {
            system,
            integrator,
            cfg,
            baseline,
            model,
            live: Live::Phase(SlowFastState::zeros(0, 0)),
            steps: 0,
            calls: 0,
        };
        sim.set_state(&initial)?;
        Ok(sim)
    }

    /// Changes the inner step of Impulse/Mollify (ignored otherwise).
    pub fn set_inner_dt(&mut self, inner_dt: f64) -> Result<()> {
        if let Some(b) = self.baseline {
            let nb = b.with_inner_dt(inner_dt);
            nb.mts().validate()?;
            self.baseline = Some(nb);
            if let Live::Flat { kick, .. } = &mut self.live {
                *kick = None;
            }
        }
        Ok(())
    }

    pub fn system(&self) -> SystemKind {
        self.system
    }

    pub fn integrator(&self) -> IntegratorKind {
        self.integrator
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Length of the state vector.
    pub fn dim(&self) -> usize {
        match &self.model {
            Model::Fpu(_) => 12,
            Model::Quartic(q) => 2 * (q.slow_dim() + q.fast_dim()),
            Model::Pendulum(_) => 4,
        }
    }

    fn split_dims(&self) -> (usize, usize) {
        match &self.model {
            Model::Fpu(_) => (3, 3),
            Model::Quartic(q) => (q.slow_dim(), q.fast_dim()),
            Model::Pendulum(_) => (2, 0),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.h
    }

    /// Slow-force evaluations spent so far.
    pub fn slow_gradient_calls(&self) -> u64 {
        self.calls
    }

    /// Replaces the state; the step counter and call count are kept.
    pub fn set_state(&mut self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("state needs {} entries, got {}", self.dim(), z.len())));
        }
        if !z.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("state"));
        }
        let (s, f) = self.split_dims();
        let baseline = self.baseline.is_some();
        self.live = match &self.model {
            Model::Pendulum(_) => {
                let st = PendulumInternalState::from_slice(z);
                if !(1.0 + st.r > MIN_RADIUS) {
                    return Err(Error::Domain(format!("pendulum radius 1 + r = {} is too small", 1.0 + st.r)));
                }
                if baseline {
                    let c = to_cartesian(&st)?;
                    Live::Flat { q: vec![c.qx, c.qy], p: vec![c.px, c.py], kick: None }
                } else {
                    Live::Polar(st)
                }
            }
            _ if baseline => {
                let st = SlowFastState::from_flat(s, f, z);
                Live::Flat {
                    q: [st.q1.as_slice(), &st.q2].concat(),
                    p: [st.p1.as_slice(), &st.p2].concat(),
                    kick: None,
                }
            }
            Model::Fpu(sys) => Live::Reduced(init_reduced(&SlowFastState::from_flat(s, f, z), sys, self.cfg.eps)?),
            Model::Quartic(_) => Live::Phase(SlowFastState::from_flat(s, f, z)),
        };
        Ok(())
    }

    /// Current state in natural coordinates.
    pub fn state(&self) -> Result<Vec<f64>> {
        let (s, _) = self.split_dims();
        Ok(match (&self.model, &self.live) {
            (Model::Fpu(sys), Live::Reduced(r)) => finalize_reduced(r, sys, self.cfg.eps)?.to_flat(),
            (_, Live::Phase(st)) => st.to_flat(),
            (_, Live::Polar(st)) => st.to_array().to_vec(),
            (Model::Pendulum(_), Live::Flat { q, p, .. }) => {
                to_internal(&PendulumCartesianState { qx: q[0], qy: q[1], px: p[0], py: p[1] })?.to_array().to_vec()
            }
            (_, Live::Flat { q, p, .. }) => {
                let mut v = q[..s].to_vec();
                v.extend_from_slice(&q[s..]);
                v.extend_from_slice(&p[..s]);
                v.extend_from_slice(&p[s..]);
                v
            }
            _ => unreachable!("state representation does not match the model"),
        })
    }

    pub fn observable_names(&self) -> Vec<String> {
        match &self.model {
            Model::Fpu(_) => scalar_observable_names(3),
            Model::Quartic(q) => matrix_observable_names(q, self.cfg.eps),
            Model::Pendulum(_) => PENDULUM_OBSERVABLES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Same observables, in the same order, as the CLI drift columns.
    pub fn observables(&self) -> Result<Vec<f64>> {
        let z = self.state()?;
        let (s, f) = self.split_dims();
        let eps = self.cfg.eps;
        Ok(match &self.model {
            Model::Fpu(sys) => scalar_observables(sys, &SlowFastState::from_flat(s, f, &z), eps),
            Model::Quartic(sys) => matrix_observables(sys, &SlowFastState::from_flat(s, f, &z), eps),
            Model::Pendulum(sys) => {
                let st = PendulumInternalState::from_slice(&z);
                vec![energy_pendulum(sys, &st, eps)?, pendulum_invariant(&st, eps)]
            }
        })
    }

    /// Advances `n` steps. On failure the state stays at the last
    /// successful step.
    pub fn step(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            let next = self.advance_one().map_err(|e| Error::StepFailed {
                step: self.steps + 1,
                time: self.time(),
                source: Box::new(e),
            })?;
            self.live = next;
            self.steps += 1;
        }
        Ok(())
    }

    fn advance_one(&mut self) -> Result<Live> {
        let cfg = &self.cfg;
        let (live, calls) = match (&self.model, &self.live) {
            (Model::Fpu(sys), Live::Reduced(r)) => {
                let c = Counting::new(sys);
                let next = match self.integrator {
                    IntegratorKind::HjNoloop => hj_scalar::step_noloop(r, &c, cfg)?,
                    _ => hj_scalar::step(r, &c, cfg)?.0,
                };
                (Live::Reduced(next), c.calls())
            }
            (Model::Quartic(sys), Live::Phase(st)) => {
                let c = Counting::new(sys);
                let next = match self.integrator {
                    IntegratorKind::HjSymmetric => hj_matrix::step_symmetric(st, &c, cfg)?.0,
                    _ => hj_matrix::step_forward(st, &c, cfg)?.0,
                };
                (Live::Phase(next), c.calls())
            }
            (Model::Pendulum(sys), Live::Polar(st)) => {
                let c = Counting::new(sys);
                let next = match self.integrator {
                    IntegratorKind::HjSymmetric => step_pendulum_symmetric(st, &c, cfg)?.0,
                    _ => step_pendulum(st, &c, cfg)?.0,
                };
                if !(1.0 + next.r > MIN_RADIUS) {
                    return Err(Error::Domain(format!("pendulum radius 1 + r = {} collapsed", 1.0 + next.r)));
                }
                (Live::Polar(next), c.calls())
            }
            (model, Live::Flat { q, p, kick }) => {
                let b = self.baseline.expect("flat state implies a baseline");
                let (mut q, mut p, kick) = (q.clone(), p.clone(), kick.clone());
                let (kick, calls) = match model {
                    Model::Fpu(sys) => {
                        let c = Counting::new(sys);
                        let k = baseline_step(&ScalarSplit { sys: &c, eps: b.eps }, &b, &mut q, &mut p, kick);
                        (k, c.calls())
                    }
                    Model::Quartic(sys) => {
                        let c = Counting::new(sys);
                        let k = baseline_step(&MatrixSplit::new(&c, b.eps), &b, &mut q, &mut p, kick);
                        (k, c.calls())
                    }
                    Model::Pendulum(sys) => {
                        let c = Counting::new(sys);
                        let k = baseline_step(&PendulumSplit { sys: &c, eps: b.eps }, &b, &mut q, &mut p, kick);
                        (k, c.calls())
                    }
                };
                if !q.iter().chain(&p).all(|x| x.is_finite()) {
                    return Err(Error::NonFinite("baseline step"));
                }
                (Live::Flat { q, p, kick: Some(kick) }, calls)
            }
            _ => unreachable!("state representation does not match the model"),
        };
        self.calls += calls;
        Ok(live)
    }
}

fn baseline_step<P: SplitPotential>(
    pot: &P,
    b: &BaselineConfig,
    q: &mut [f64],
    p: &mut [f64],
    kick: Option<Vec<f64>>,
) -> Vec<f64> {
    let mts = b.mts();
    let verlet = b.scheme == crate::baselines::Baseline::Verlet;
    let mut kick = kick.unwrap_or_else(|| {
        let mut k = vec![0.0; q.len()];
        if verlet {
            total_force(pot, q, &mut k);
        } else {
            kick_force(pot, q, &mts, &mut k);
        }
        k
    });
    if verlet {
        verlet_step(q, p, &mut kick, b.h, |x, f| total_force(pot, x, f));
    } else {
        mts_step(pot, q, p, &mut kick, &mts);
    }
    kick
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_point, RunPoint};

    fn matches_run(system: SystemKind, integrator: IntegratorKind, eps: f64, h: f64, n: u64) {
        let mut sim = Simulation::new(system, integrator, eps, h).unwrap();
        sim.step(n).unwrap();
        let rec = run_point(&RunPoint {
            system,
            integrator,
            eps,
            h,
            t_max: n as f64 * h,
            sample_every: None,
            inner_dt: None,
        })
        .unwrap();
        assert_eq!(rec.steps, n);
        let z = sim.state().unwrap();
        let expect = match system {
            SystemKind::Pendulum => rec.final_pendulum().unwrap().to_array().to_vec(),
            _ => rec.final_slow_fast().unwrap().to_flat(),
        };
        let diff = z.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{system} {integrator}: {diff}");
        assert_eq!(sim.slow_gradient_calls(), rec.slow_gradient_calls, "{system} {integrator}");
        let obs = sim.observables().unwrap();
        for (k, name) in sim.observable_names().iter().enumerate() {
            let last = *rec.series(name).unwrap().last().unwrap();
            assert!((obs[k] - last).abs() < 1e-10 * last.abs().max(1.0), "{name}");
        }
    }

    #[test]
    fn stepping_reproduces_batch_runs() {
        matches_run(SystemKind::Fpu, IntegratorKind::Hj, 1e-2, 0.02, 25);
        matches_run(SystemKind::Fpu, IntegratorKind::HjNoloop, 1e-2, 0.02, 25);
        matches_run(SystemKind::Fpu, IntegratorKind::Verlet, 1e-2, 1e-3, 50);
        matches_run(SystemKind::Quartic3, IntegratorKind::HjSymmetric, 1.0 / 70.0, 10.0 / 70.0, 10);
        matches_run(SystemKind::Quartic4, IntegratorKind::Impulse, 1.0 / 70.0, 0.05, 10);
        matches_run(SystemKind::Pendulum, IntegratorKind::HjSymmetric, 2e-3, 0.02, 20);
        matches_run(SystemKind::Pendulum, IntegratorKind::Mollify, 2e-2, 0.02, 5);
    }

    #[test]
    fn state_round_trip() {
        let mut sim = Simulation::new(SystemKind::Fpu, IntegratorKind::Hj, 1e-3, 5e-3).unwrap();
        let z = sim.state().unwrap();
        sim.set_state(&z).unwrap();
        let back = sim.state().unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_states_and_pairs() {
        let mut sim = Simulation::new(SystemKind::Pendulum, IntegratorKind::Hj, 1e-2, 0.02).unwrap();
        assert!(matches!(sim.set_state(&[0.0; 3]), Err(Error::InvalidArgument(_))));
        assert!(matches!(sim.set_state(&[0.0, -0.95, 0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(sim.set_state(&[f64::NAN, 0.0, 0.0, 0.0]), Err(Error::NonFinite(_))));
        assert!(Simulation::new(SystemKind::Fpu, IntegratorKind::HjSymmetric, 1e-2, 0.02).is_err());
        assert!(Simulation::new(SystemKind::Quartic3, IntegratorKind::HjNoloop, 1e-2, 0.02).is_err());
    }
}
