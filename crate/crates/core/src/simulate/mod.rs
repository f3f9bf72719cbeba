//! Time integration with dose events, and outcome classification.

mod outcome;
mod rk;

use serde::{Deserialize, Serialize};

use crate::control;
use crate::model::{rhs, ControlLaw, ModelParams, State};
use crate::par::{self, Execution};
use crate::{Error, Result};

pub use outcome::{analyze_outcome, OutcomeReport, DIVERGENCE_LIMIT};

use rk::Vec3;

/// Additive cell increments applied instantaneously at `time` (days).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseEvent {
    pub time: f64,
    pub delta: State,
}

impl DoseEvent {
    pub fn new(time: f64, delta: State) -> Self {
        Self { time, delta }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::invalid(
                format!("events[{index}].time"),
                "must be finite and >= 0",
            ));
        }
        self.delta.validate(&format!("events[{index}].delta"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum Method {
    #[serde(rename = "rk4")]
    Rk4Fixed { step: f64 },
    #[serde(rename = "rk45")]
    Rk45Adaptive {
        rel_tol: f64,
        abs_tol: f64,
        min_step: f64,
        max_step: f64,
    },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45Adaptive {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            min_step: 1e-10,
            max_step: 1.0,
        }
    }
}

/// Magnitude below zero that the floor absorbs for fixed-step integration.
pub const RK4_FLOOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    /// Clamp roundoff-sized negative populations to zero after each step;
    /// anything more negative than the absolute tolerance is an error.
    #[serde(default = "default_true")]
    pub nonneg_floor: bool,
    /// Spacing of recorded samples, days.
    #[serde(default = "default_output_interval")]
    pub output_interval: f64,
}

fn default_true() -> bool {
    true
}

fn default_output_interval() -> f64 {
    0.1
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::default(),
            nonneg_floor: true,
            output_interval: default_output_interval(),
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4Fixed { step },
            ..Self::default()
        }
    }

    pub fn rk45(rel_tol: f64, abs_tol: f64) -> Self {
        let Method::Rk45Adaptive { min_step, max_step, .. } = Method::default() else {
            unreachable!()
        };
        Self {
            method: Method::Rk45Adaptive {
                rel_tol,
                abs_tol,
                min_step,
                max_step,
            },
            ..Self::default()
        }
    }

    pub fn with_output_interval(self, output_interval: f64) -> Self {
        Self {
            output_interval,
            ..self
        }
    }

    pub fn with_floor(self, nonneg_floor: bool) -> Self {
        Self {
            nonneg_floor,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("integrator.{name}"), "must be finite and > 0"))
            }
        };
        match self.method {
            Method::Rk4Fixed { step } => positive("step", step)?,
            Method::Rk45Adaptive {
                rel_tol,
                abs_tol,
                min_step,
                max_step,
            } => {
                positive("rel_tol", rel_tol)?;
                positive("abs_tol", abs_tol)?;
                positive("min_step", min_step)?;
                positive("max_step", max_step)?;
                if min_step > max_step {
                    return Err(Error::invalid("integrator.min_step", "must not exceed max_step"));
                }
            }
        }
        positive("output_interval", self.output_interval)
    }

    fn floor_tol(&self) -> f64 {
        match self.method {
            Method::Rk4Fixed { .. } => RK4_FLOOR_TOL,
            Method::Rk45Adaptive { abs_tol, .. } => abs_tol,
        }
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    /// Activation flux in effect, cells/day.
    pub tau: f64,
    /// Certificate value, when a backstepping law and a weight ξ are active.
    pub v: Option<f64>,
    /// Backstepping error, when a backstepping law is active.
    pub z2: Option<f64>,
}

/// A dose as applied during integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedEvent {
    pub event: DoseEvent,
    pub before: State,
    pub after: State,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// Strictly increasing in `t`.
    pub samples: Vec<Sample>,
    pub events_applied: Vec<AppliedEvent>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub initial: State,
    pub law: ControlLaw,
    pub events: Vec<DoseEvent>,
    pub horizon: f64,
    pub integrator: IntegratorConfig,
    /// Weight ξ for the recorded certificate value.
    pub xi: Option<f64>,
}

impl Scenario {
    pub fn run(&self) -> Result<Trajectory> {
        integrate(
            &self.params,
            &self.initial,
            &self.law,
            &self.events,
            self.horizon,
            &self.integrator,
            self.xi,
        )
    }
}

/// Run independent scenarios, results in input order.
pub fn run_batch(scenarios: &[Scenario], exec: Execution) -> Vec<Result<Trajectory>> {
    par::map_indexed(scenarios.len(), exec, |i| scenarios[i].run())
}

fn output_times(interval: f64, horizon: f64) -> Vec<f64> {
    let per_day = 1.0 / interval;
    let integral = (per_day - per_day.round()).abs() < 1e-9 * per_day;
    let at = |i: usize| {
        if integral {
            i as f64 / per_day.round()
        } else {
            i as f64 * interval
        }
    };
    let mut times = Vec::new();
    let mut i = 0usize;
    loop {
        let t = at(i);
        if t > horizon * (1.0 + 1e-12) {
            break;
        }
        times.push(t.min(horizon));
        i += 1;
    }
    if times.last().is_some_and(|&t| t < horizon) {
        times.push(horizon);
    }
    times
}

/// Accepted step handed to the sample recorder.
struct Step {
    t0: f64,
    y0: Vec3,
    f0: Vec3,
    t1: f64,
    y1: Vec3,
    f1: Vec3,
    /// Extra Dormand–Prince coefficient; cubic Hermite when absent.
    dense: Option<Vec3>,
}

struct Recorder<'a> {
    p: &'a ModelParams,
    tau: f64,
    gain: Option<f64>,
    xi: Option<f64>,
    floor: bool,
    times: Vec<f64>,
    next: usize,
    samples: Vec<Sample>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, y: Vec3) -> Result<()> {
        if self.samples.last().is_some_and(|s| s.t >= t) {
            return Ok(());
        }
        let y = if self.floor { y.map(|v| v.max(0.0)) } else { y };
        let state = State::from_array(y);
        let z2 = match self.gain {
            Some(a) if state.is_finite() => Some(control::z2(self.p, a, &state)?),
            _ => None,
        };
        let v = match (z2, self.xi) {
            (Some(e), Some(xi)) => Some(control::lyapunov(xi, state.x1, e)),
            _ => None,
        };
        self.samples.push(Sample {
            t,
            state,
            tau: self.tau,
            v,
            z2,
        });
        Ok(())
    }

    fn start(&mut self, t: f64, y: Vec3) -> Result<()> {
        while self.next < self.times.len() && self.times[self.next] <= t {
            let at = self.times[self.next];
            self.next += 1;
            if at == t {
                self.push(t, y)?;
            }
        }
        Ok(())
    }

    fn step(&mut self, s: &Step) -> Result<()> {
        let h = s.t1 - s.t0;
        while self.next < self.times.len() && self.times[self.next] <= s.t1 {
            let at = self.times[self.next];
            self.next += 1;
            let y = if at == s.t1 {
                s.y1
            } else if at == s.t0 {
                s.y0
            } else {
                let frac = (at - s.t0) / h;
                match &s.dense {
                    Some(d) => rk::dopri_dense(&s.y0, &s.f0, &s.y1, &s.f1, d, h, frac),
                    None => rk::hermite(&s.y0, &s.f0, &s.y1, &s.f1, h, frac),
                }
            };
            self.push(at, y)?;
        }
        Ok(())
    }
}

fn diverged(y: &Vec3) -> bool {
    y.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
}

/// Clamp roundoff-sized negatives; larger excursions are an error.
fn apply_floor(y: &mut Vec3, tol: f64, t: f64) -> Result<bool> {
    let mut clamped = false;
    for (i, v) in y.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::NegativeState {
                    t,
                    component: i + 1,
                    value: *v,
                });
            }
            *v = 0.0;
            clamped = true;
        }
    }
    Ok(clamped)
}

enum SegmentEnd {
    Reached,
    Diverged,
}

struct Integrator<'a, F: Fn(&Vec3) -> Vec3> {
    f: F,
    cfg: &'a IntegratorConfig,
    rec: Recorder<'a>,
}

impl<F: Fn(&Vec3) -> Vec3> Integrator<'_, F> {
    /// Accept a step: floor, record, check divergence.
    fn accept(&mut self, mut step: Step) -> Result<(Vec3, Vec3, bool)> {
        let recorded = Step { ..step };
        if self.cfg.nonneg_floor && apply_floor(&mut step.y1, self.cfg.floor_tol(), step.t1)? {
            step.f1 = (self.f)(&step.y1);
        }
        // interpolate with the unclamped endpoint, continue from the clamped one
        self.rec.step(&recorded)?;
        let stop = diverged(&step.y1);
        if stop {
            self.rec.push(step.t1, step.y1)?;
        }
        Ok((step.y1, step.f1, stop))
    }

    fn segment(&mut self, ta: f64, tb: f64, y: &mut Vec3) -> Result<SegmentEnd> {
        match self.cfg.method {
            Method::Rk4Fixed { step } => self.segment_rk4(ta, tb, y, step),
            Method::Rk45Adaptive {
                rel_tol,
                abs_tol,
                min_step,
                max_step,
            } => self.segment_rk45(ta, tb, y, rel_tol, abs_tol, min_step, max_step),
        }
    }

    fn segment_rk4(&mut self, ta: f64, tb: f64, y: &mut Vec3, step: f64) -> Result<SegmentEnd> {
        let n = ((tb - ta) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (tb - ta) / n as f64;
        let mut fy = (self.f)(y);
        for i in 0..n {
            let t0 = ta + i as f64 * h;
            let t1 = if i + 1 == n { tb } else { ta + (i + 1) as f64 * h };
            let y1 = rk::rk4_step(&self.f, y, &fy, t1 - t0);
            let f1 = (self.f)(&y1);
            let (y1, f1, stop) = self.accept(Step {
                t0,
                y0: *y,
                f0: fy,
                t1,
                y1,
                f1,
                dense: None,
            })?;
            *y = y1;
            fy = f1;
            if stop {
                return Ok(SegmentEnd::Diverged);
            }
        }
        Ok(SegmentEnd::Reached)
    }

    #[allow(clippy::too_many_arguments)]
    fn segment_rk45(
        &mut self,
        ta: f64,
        tb: f64,
        y: &mut Vec3,
        rel_tol: f64,
        abs_tol: f64,
        min_step: f64,
        max_step: f64,
    ) -> Result<SegmentEnd> {
        let scaled_rms = |v: &Vec3, y0: &Vec3, y1: &Vec3| -> f64 {
            let mut sum = 0.0;
            for i in 0..3 {
                let sc = abs_tol + rel_tol * y0[i].abs().max(y1[i].abs());
                sum += (v[i] / sc).powi(2);
            }
            (sum / 3.0).sqrt()
        };
        let mut fy = (self.f)(y);
        let mut h = {
            let d0 = scaled_rms(y, y, y);
            let d1 = scaled_rms(&fy, y, y);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.clamp(min_step, max_step)
        };
        let mut t = ta;
        while t < tb {
            let remaining = tb - t;
            let last = h * 1.000_001 >= remaining;
            let h_try = if last { remaining } else { h };
            let st = rk::dopri_step(&self.f, y, &fy, h_try);
            let finite = st.y_new.iter().all(|v| v.is_finite());
            let err_norm = if finite { scaled_rms(&st.err, y, &st.y_new) } else { f64::INFINITY };
            if err_norm <= 1.0 {
                let t1 = if last { tb } else { t + h_try };
                let (y1, f1, stop) = self.accept(Step {
                    t0: t,
                    y0: *y,
                    f0: fy,
                    t1,
                    y1: st.y_new,
                    f1: st.k7,
                    dense: Some(st.dense),
                })?;
                *y = y1;
                fy = f1;
                t = t1;
                if stop {
                    return Ok(SegmentEnd::Diverged);
                }
                let factor = if err_norm == 0.0 {
                    5.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h_try * factor).min(max_step);
                if !last {
                    h = h.max(min_step);
                }
            } else {
                let factor = if err_norm.is_finite() {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0)
                } else {
                    0.2
                };
                h = h_try * factor;
                if h < min_step {
                    if !finite {
                        // blow-up within a minimal step
                        self.rec.push(t, *y)?;
                        return Ok(SegmentEnd::Diverged);
                    }
                    return Err(Error::StepSizeUnderflow { t });
                }
            }
        }
        Ok(SegmentEnd::Reached)
    }
}

/// Integrate from `t = 0` to `horizon` days.
///
/// τ is constant over the run: zero, the law's constant, or
/// [`control::tau_from_a`] for a backstepping law. At each dose time the
/// integration stops exactly there, the increment is added and integration
/// restarts. Samples are recorded on a uniform `output_interval` grid by cubic
/// Hermite interpolation of the accepted steps; a sample that lands on a dose
/// time shows the pre-dose state. With a backstepping law, `z2` is recorded for
/// every sample and `v` as well when `xi` is given.
///
/// A state that becomes non-finite or exceeds [`DIVERGENCE_LIMIT`] ends the run
/// early with that state as the final sample; [`analyze_outcome`] flags it.
pub fn integrate(
    p: &ModelParams,
    s0: &State,
    law: &ControlLaw,
    events: &[DoseEvent],
    horizon: f64,
    cfg: &IntegratorConfig,
    xi: Option<f64>,
) -> Result<Trajectory> {
    p.validate()?;
    s0.validate("initial")?;
    law.validate()?;
    cfg.validate()?;
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::invalid("horizon", "must be finite and > 0"));
    }
    if let Some(xi) = xi {
        if !xi.is_finite() || xi <= 0.0 {
            return Err(Error::invalid("xi", "must be finite and > 0"));
        }
    }
    for (i, e) in events.iter().enumerate() {
        e.validate(i)?;
    }
    let mut events: Vec<DoseEvent> = events.iter().copied().filter(|e| e.time <= horizon).collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let tau = law.tau(p)?;
    let drains = law.tau_drains_pool;
    let mut it = Integrator {
        f: |y: &Vec3| rhs(p, *y, tau, drains),
        cfg,
        rec: Recorder {
            p,
            tau,
            gain: law.gain(),
            xi,
            floor: cfg.nonneg_floor,
            times: output_times(cfg.output_interval, horizon),
            next: 0,
            samples: Vec::new(),
        },
    };

    let mut applied = Vec::with_capacity(events.len());
    let mut y = s0.as_array();
    let mut t = 0.0;
    let mut pending = events.into_iter().peekable();
    while let Some(e) = pending.next_if(|e| e.time == 0.0) {
        let before = State::from_array(y);
        let after = before + e.delta;
        y = after.as_array();
        applied.push(AppliedEvent { event: e, before, after });
    }
    it.rec.start(0.0, y)?;

    while t < horizon {
        let seg_end = pending.peek().map_or(horizon, |e| e.time);
        if seg_end > t {
            if let SegmentEnd::Diverged = it.segment(t, seg_end, &mut y)? {
                break;
            }
            t = seg_end;
        }
        while let Some(e) = pending.next_if(|e| e.time <= t) {
            let before = State::from_array(y);
            let after = before + e.delta;
            y = after.as_array();
            applied.push(AppliedEvent { event: e, before, after });
        }
    }

    Ok(Trajectory {
        samples: it.rec.samples,
        events_applied: applied,
    })
}
