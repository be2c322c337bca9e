//! Closed-loop simulation: initialization, reference generation, per-step
//! assignment + implicit control + explicit Euler integration, and logging.
//!
//! Every configuration field defaults to the values of the standard
//! experiment (50 inverse-model evaders, 4 herders, 40 ms sample time,
//! 4 m/s speed limit, reference parked at (-35, -35) m until 160 s and then
//! sweeping left along a sinusoid until 400 s), so an empty JSON object is a
//! complete, runnable configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{self, Assignment};
use crate::controller::{self, ControllerConfig, Reference};
use crate::dynamics::{self, EvaderModel, WorldState};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::metrics::ClassifyThresholds;
use crate::scalar::Real;

/// How evader models are assigned at initialization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMix<T> {
    AllInverse,
    AllExponential,
    /// Each evader is exponential with the given probability, inverse
    /// otherwise.
    Bernoulli(T),
}

impl<T> Default for ModelMix<T> {
    fn default() -> Self {
        Self::AllInverse
    }
}

impl<T: Real> std::fmt::Display for ModelMix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::AllInverse => write!(f, "all_inverse"),
            Self::AllExponential => write!(f, "all_exponential"),
            Self::Bernoulli(q) => write!(f, "bernoulli_{q}"),
        }
    }
}

/// Initial agent placement: evaders drawn from an isotropic normal
/// distribution, herders evenly spaced on a circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + serde::Deserialize<'de>"
))]
pub struct InitConfig<T> {
    pub evader_mean: Point2<T>,
    pub evader_cov_scale: T,
    pub herder_center: Point2<T>,
    pub herder_radius: T,
}

impl<T: Real> Default for InitConfig<T> {
    fn default() -> Self {
        Self {
            evader_mean: Point2::new(T::of(20.0), T::zero()),
            evader_cov_scale: T::one(),
            herder_center: Point2::new(T::of(20.0), T::zero()),
            herder_radius: T::of(70.0),
        }
    }
}

/// Reference trajectory: parked at `x_star` until `t_switch`, then moving
/// with velocity `(nu, omega * amplitude * cos(omega * (t - t_switch)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + serde::Deserialize<'de>"
))]
pub struct ReferenceConfig<T> {
    pub x_star: Point2<T>,
    pub t_switch: T,
    pub nu: T,
    pub amplitude: T,
    pub omega: T,
}

impl<T: Real> Default for ReferenceConfig<T> {
    fn default() -> Self {
        Self {
            x_star: Point2::new(T::of(-35.0), T::of(-35.0)),
            t_switch: T::of(160.0),
            nu: T::of(-0.2),
            amplitude: T::of(5.0),
            omega: T::of(0.1),
        }
    }
}

/// Controller gains (scalar multiples of the identity).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + serde::Deserialize<'de>"
))]
pub struct GainConfig<T> {
    pub f_gain: T,
    pub h_gain: T,
}

impl<T: Real> Default for GainConfig<T> {
    fn default() -> Self {
        Self {
            f_gain: T::of(0.25),
            h_gain: T::of(50.0),
        }
    }
}

/// Repulsion gains shared by all evaders of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + serde::Deserialize<'de>"
))]
pub struct EvaderParams<T> {
    pub theta: T,
    pub gamma: T,
    pub beta: T,
    pub sigma: T,
    pub d_min: T,
}

impl<T: Real> Default for EvaderParams<T> {
    fn default() -> Self {
        Self {
            theta: T::of(1.2),
            gamma: T::of(2e-4),
            beta: T::of(0.5),
            sigma: T::of(2.0),
            d_min: T::of(10.0),
        }
    }
}

/// Full description of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + serde::Deserialize<'de>"
))]
pub struct SimConfig<T> {
    pub m: usize,
    pub n: usize,
    pub model_mix: ModelMix<T>,
    pub dt: T,
    pub t_end: T,
    pub v_max: T,
    pub init: InitConfig<T>,
    pub reference: ReferenceConfig<T>,
    pub seed: u64,
    pub controller: GainConfig<T>,
    pub evader_params: EvaderParams<T>,
    pub thresholds: ClassifyThresholds<T>,
    pub output_stride: usize,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            m: 50,
            n: 4,
            model_mix: ModelMix::default(),
            dt: T::of(0.04),
            t_end: T::of(400.0),
            v_max: T::of(4.0),
            init: InitConfig::default(),
            reference: ReferenceConfig::default(),
            seed: 1,
            controller: GainConfig::default(),
            evader_params: EvaderParams::default(),
            thresholds: ClassifyThresholds::default(),
            output_stride: 5,
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.m < 1 {
            return bad("m must be at least 1");
        }
        if self.n < 1 {
            return bad("n must be at least 1");
        }
        if !(self.dt > T::zero()) || !self.dt.finite() {
            return bad("dt must be positive");
        }
        if !(self.t_end >= T::zero()) || !self.t_end.finite() {
            return bad("t_end must be non-negative");
        }
        if !(self.v_max > T::zero()) {
            return bad("v_max must be positive");
        }
        if !(self.init.evader_cov_scale >= T::zero()) {
            return bad("init.evader_cov_scale must be non-negative");
        }
        if !(self.init.herder_radius >= T::zero()) {
            return bad("init.herder_radius must be non-negative");
        }
        if !self.init.evader_mean.finite() || !self.init.herder_center.finite() {
            return bad("init positions must be finite");
        }
        if !(self.reference.t_switch > T::zero()) {
            return bad("reference.t_switch must be positive");
        }
        if !self.reference.x_star.finite() {
            return bad("reference.x_star must be finite");
        }
        let peak = (self.reference.nu * self.reference.nu
            + (self.reference.omega * self.reference.amplitude).powi(2))
        .sqrt();
        if peak > self.v_max {
            return bad("reference velocity exceeds v_max");
        }
        if let ModelMix::Bernoulli(q) = self.model_mix {
            if !(q >= T::zero() && q <= T::one()) {
                return bad("model_mix.bernoulli must be in [0, 1]");
            }
        }
        if self.output_stride < 1 {
            return bad("output_stride must be at least 1");
        }
        self.thresholds.validate()?;
        self.controller_config()?;
        self.inverse_model()?;
        self.exponential_model()?;
        Ok(())
    }

    pub fn controller_config(&self) -> Result<ControllerConfig<T>> {
        ControllerConfig::new(self.controller.f_gain, self.controller.h_gain, self.v_max)
    }

    pub fn inverse_model(&self) -> Result<EvaderModel<T>> {
        EvaderModel::inverse(self.evader_params.theta, self.evader_params.gamma)
    }

    pub fn exponential_model(&self) -> Result<EvaderModel<T>> {
        EvaderModel::exponential(
            self.evader_params.beta,
            self.evader_params.sigma,
            self.evader_params.d_min,
            self.evader_params.gamma,
        )
    }

    /// Number of integration steps: `floor(t_end / dt)`, with a small
    /// tolerance so that exact multiples are not lost to rounding.
    pub fn step_count(&self) -> usize {
        let ratio = self.t_end.to_f64().unwrap_or(0.0) / self.dt.to_f64().unwrap_or(1.0);
        (ratio + 1e-9).floor() as usize
    }
}

/// Place the initial world state: evader positions drawn from
/// `Normal(evader_mean, evader_cov_scale * I)`, herders at angles
/// `2 pi i / n` on the configured circle, models fixed by the mix. The whole
/// draw is a pure function of the seed.
pub fn initialize<T: Real>(cfg: &SimConfig<T>) -> Result<WorldState<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = cfg.init.evader_cov_scale.sqrt();
    let evaders: Vec<Point2<T>> = (0..cfg.m)
        .map(|_| {
            let zx = T::standard_normal(&mut rng);
            let zy = T::standard_normal(&mut rng);
            cfg.init.evader_mean + Point2::new(std * zx, std * zy)
        })
        .collect();

    let inverse = cfg.inverse_model()?;
    let exponential = cfg.exponential_model()?;
    let models: Vec<EvaderModel<T>> = match cfg.model_mix {
        ModelMix::AllInverse => vec![inverse; cfg.m],
        ModelMix::AllExponential => vec![exponential; cfg.m],
        ModelMix::Bernoulli(q) => (0..cfg.m)
            .map(|_| {
                if T::uniform01(&mut rng) < q {
                    exponential
                } else {
                    inverse
                }
            })
            .collect(),
    };

    let herders: Vec<Point2<T>> = (0..cfg.n)
        .map(|i| {
            let angle = T::two_pi() * T::of(i as f64) / T::of(cfg.n as f64);
            cfg.init.herder_center
                + Point2::new(
                    cfg.init.herder_radius * angle.cos(),
                    cfg.init.herder_radius * angle.sin(),
                )
        })
        .collect();

    WorldState::new(evaders, herders, models, T::zero())
}

/// Reference state at time `t`.
///
/// Before `t_switch` the reference is parked at `x_star` with zero velocity;
/// from `t_switch` on, the velocity is `(nu, omega A cos(omega tau))` with
/// `tau = t - t_switch`, and the position is its closed-form integral
/// `x_star + (nu tau, A sin(omega tau))`, continuous across the switch.
pub fn reference_at<T: Real>(t: T, cfg: &SimConfig<T>) -> Result<Reference<T>> {
    let slack = T::of(1e-9) * (T::one() + cfg.t_end.abs());
    if t < -slack || t > cfg.t_end + slack {
        return Err(Error::TimeOutOfRange(t.to_f64().unwrap_or(f64::NAN)));
    }
    let r = &cfg.reference;
    if t < r.t_switch {
        return Ok(Reference::new(r.x_star, Point2::zero()));
    }
    let tau = t - r.t_switch;
    let velocity = Point2::new(r.nu, r.omega * r.amplitude * (r.omega * tau).cos());
    let position = r.x_star + Point2::new(r.nu * tau, r.amplitude * (r.omega * tau).sin());
    Ok(Reference::new(position, velocity))
}

/// Everything the logger keeps about one simulation instant: the pre-step
/// state, the assignment and controller values computed at it, and the
/// saturation outcome of the step taken from it (all false on the final
/// record, from which no step is taken).
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T> {
    pub time: T,
    pub evaders: Vec<Point2<T>>,
    pub herders: Vec<Point2<T>>,
    pub reference: Reference<T>,
    pub selected: Vec<usize>,
    pub h_norm: T,
    pub evader_saturated: Vec<bool>,
    pub herder_saturated: Vec<bool>,
    pub controllability_loss: bool,
}

/// Time-indexed trajectory record of a full run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog<T> {
    pub records: Vec<StepRecord<T>>,
    pub dt: T,
    /// Cause of an early abort (non-finite positions), if any.
    pub abort: Option<String>,
}

impl<T: Real> RunLog<T> {
    /// Serialize the trajectory as CSV, keeping every `stride`-th record.
    /// Rows are grouped per record: evaders (`E`), herders (`H`), then the
    /// reference (`R`); the `selected` column is 1 on directly controlled
    /// evader rows and 0 elsewhere.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("t,kind,id,x,y,selected\n");
        for record in self.records.iter().step_by(stride) {
            for (j, p) in record.evaders.iter().enumerate() {
                let sel = usize::from(record.selected.contains(&j));
                out.push_str(&format!(
                    "{},E,{},{},{},{}\n",
                    record.time, j, p.x, p.y, sel
                ));
            }
            for (i, p) in record.herders.iter().enumerate() {
                out.push_str(&format!("{},H,{},{},{},0\n", record.time, i, p.x, p.y));
            }
            let r = record.reference.position;
            out.push_str(&format!("{},R,0,{},{},0\n", record.time, r.x, r.y));
        }
        out
    }
}

struct StepOutcome<T> {
    state: WorldState<T>,
    record: StepRecord<T>,
}

fn step_detailed<T: Real>(w: &WorldState<T>, cfg: &SimConfig<T>) -> Result<StepOutcome<T>> {
    let assignment: Assignment<T> = assignment::assign(w, w.herder_count(), cfg.seed)?;
    let reference = reference_at(w.time, cfg)?;
    let ctrl = cfg.controller_config()?;

    let terms = controller::control_terms(&assignment.selected, w, &reference, &ctrl)?;
    let h_norm = terms.h.norm();
    let (raw_udot, controllability_loss) =
        match controller::solve_update(&terms, w.herder_count()) {
            Ok(u) => (u, false),
            Err(Error::ControllabilityLoss) => {
                (vec![Point2::zero(); w.herder_count()], true)
            }
            Err(e) => return Err(e),
        };

    let herder_saturated: Vec<bool> = raw_udot.iter().map(|v| v.norm() > cfg.v_max).collect();
    let udot: Vec<Point2<T>> = raw_udot
        .iter()
        .map(|&v| dynamics::saturate(v, cfg.v_max))
        .collect();

    let raw_xdot = dynamics::herd_velocity(w)?;
    let evader_saturated: Vec<bool> = raw_xdot.iter().map(|v| v.norm() > cfg.v_max).collect();
    let xdot: Vec<Point2<T>> = raw_xdot
        .iter()
        .map(|&v| dynamics::saturate(v, cfg.v_max))
        .collect();

    let record = StepRecord {
        time: w.time,
        evaders: w.evaders.clone(),
        herders: w.herders.clone(),
        reference,
        selected: assignment.selected.clone(),
        h_norm,
        evader_saturated,
        herder_saturated,
        controllability_loss,
    };

    let state = WorldState {
        evaders: w
            .evaders
            .iter()
            .zip(&xdot)
            .map(|(&p, &v)| p + v.scaled(cfg.dt))
            .collect(),
        herders: w
            .herders
            .iter()
            .zip(&udot)
            .map(|(&p, &v)| p + v.scaled(cfg.dt))
            .collect(),
        models: w.models.clone(),
        time: w.time + cfg.dt,
    };

    Ok(StepOutcome { state, record })
}

/// Advance the world by one sample time: assignment, implicit control with
/// per-herder saturation, evader dynamics with saturation, explicit Euler.
pub fn step<T: Real>(w: &WorldState<T>, cfg: &SimConfig<T>) -> Result<WorldState<T>> {
    Ok(step_detailed(w, cfg)?.state)
}

/// Snapshot record for a state from which no step is taken (the final one).
fn closing_record<T: Real>(w: &WorldState<T>, cfg: &SimConfig<T>) -> Result<StepRecord<T>> {
    let assignment = assignment::assign(w, w.herder_count(), cfg.seed)?;
    let reference = reference_at(w.time, cfg)?;
    let ctrl = cfg.controller_config()?;
    let terms = controller::control_terms(&assignment.selected, w, &reference, &ctrl)?;
    Ok(StepRecord {
        time: w.time,
        evaders: w.evaders.clone(),
        herders: w.herders.clone(),
        reference,
        selected: assignment.selected,
        h_norm: terms.h.norm(),
        evader_saturated: vec![false; w.evader_count()],
        herder_saturated: vec![false; w.herder_count()],
        controllability_loss: false,
    })
}

/// Run the full closed loop, logging every step.
///
/// The log holds `floor(t_end / dt) + 1` records (initial state included).
/// The run aborts early only if positions become non-finite, in which case
/// the cause is recorded and the log ends at the last finite state.
pub fn run<T: Real>(cfg: &SimConfig<T>) -> Result<RunLog<T>> {
    cfg.validate()?;
    let steps = cfg.step_count();
    let mut w = initialize(cfg)?;
    let mut records = Vec::with_capacity(steps + 1);
    let mut abort = None;

    for k in 0..steps {
        let outcome = step_detailed(&w, cfg)?;
        records.push(outcome.record);
        let mut next = outcome.state;
        // Pin the clock to k * dt instead of accumulating rounding error.
        next.time = cfg.dt * T::of((k + 1) as f64);
        if !next.finite() {
            abort = Some(format!(
                "non-finite position after step {} (t = {})",
                k + 1,
                next.time.to_f64().unwrap_or(f64::NAN)
            ));
            break;
        }
        w = next;
    }
    if abort.is_none() {
        records.push(closing_record(&w, cfg)?);
    }

    Ok(RunLog {
        records,
        dt: cfg.dt,
        abort,
    })
}
