//! Implicit control of the selected evaders through the herder velocities.
//!
//! The relation `h(x, u) = f(x, u) - f*(x) - xdot*` measures how far the
//! selected evaders' dynamics are from the target behavior
//! `f*(e) = -F (e - x*)`, a linear stabilizer acting on the tracking error.
//! Instead of solving `h = 0` for `u` (impossible in closed form, the input
//! enters nonlinearly), the herder velocities are chosen as
//! `udot = pinv(J_u) (-H h - J_x f)`, which imposes `dh/dt = -H h` and lets
//! `h` decay. The pseudoinverse is computed by SVD with a relative
//! singular-value cutoff.

use nalgebra::{DMatrix, DVector, SVD};

use crate::dynamics::{self, WorldState};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Relative singular-value cutoff for the pseudoinverse: singular values
/// below `SVD_CUTOFF_REL * sigma_max` are truncated.
pub const SVD_CUTOFF_REL: f64 = 1e-8;

/// Gains of the implicit control law. `F = f_gain * I` shapes the target
/// dynamics of the selected evaders, `H = h_gain * I` the decay of `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerConfig<T> {
    pub f_gain: T,
    pub h_gain: T,
    pub v_max: T,
}

impl<T: Real> ControllerConfig<T> {
    /// Build a configuration, rejecting gain pairs for which the block
    /// matrix `[[-F, I/2], [I/2, -H]]` is not negative definite.
    pub fn new(f_gain: T, h_gain: T, v_max: T) -> Result<Self> {
        if v_max <= T::zero() {
            return Err(Error::InvalidConfig("v_max must be positive".into()));
        }
        if !check_stability(f_gain, h_gain, 1) {
            return Err(Error::InvalidConfig(
                "gains violate the negative-definiteness stability condition".into(),
            ));
        }
        Ok(Self {
            f_gain,
            h_gain,
            v_max,
        })
    }
}

/// Tracking reference: desired position and feedforward velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference<T> {
    pub position: Point2<T>,
    pub velocity: Point2<T>,
}

impl<T: Real> Reference<T> {
    pub fn new(position: Point2<T>, velocity: Point2<T>) -> Self {
        Self { position, velocity }
    }

    pub fn validate(&self, v_max: T) -> Result<()> {
        if !self.position.finite() || !self.velocity.finite() {
            return Err(Error::InvalidCoordinate);
        }
        if self.velocity.norm() > v_max {
            return Err(Error::InvalidConfig(
                "reference velocity exceeds v_max".into(),
            ));
        }
        Ok(())
    }
}

/// Stability test for scalar-identity gains: with `F = f I` and `H = h I`,
/// the block matrix `[[-F, I/2], [I/2, -H]]` is negative definite iff the
/// condensed 2x2 matrix `[[-f, 1/2], [1/2, -h]]` is, independently of the
/// state dimension `p` (Kronecker structure).
pub fn check_stability<T: Real>(f_gain: T, h_gain: T, _p: usize) -> bool {
    let half = T::of(0.5);
    let trace = -f_gain - h_gain;
    let disc = (h_gain - f_gain) * (h_gain - f_gain) + T::of(4.0) * half * half;
    let root = disc.sqrt();
    let lambda_max = (trace + root) / T::of(2.0);
    let lambda_min = (trace - root) / T::of(2.0);
    lambda_max < T::zero() && lambda_min < T::zero()
}

/// Stacked `h` over the selected evaders:
/// `h_j = f_j(x, u) + f_gain (e_j - x*) - xdot*`.
pub fn h_value<T: Real>(
    selected: &[usize],
    w: &WorldState<T>,
    reference: &Reference<T>,
    cfg: &ControllerConfig<T>,
) -> Result<DVector<T>> {
    let terms = control_terms(selected, w, reference, cfg)?;
    Ok(terms.h)
}

/// Pre-saturation herder velocity command from the implicit control law.
///
/// When every singular value of `J_u` vanishes the herders have no influence
/// on the selected evaders and [`Error::ControllabilityLoss`] is returned;
/// the simulator then applies a zero update and flags the step.
pub fn herder_velocity_update<T: Real>(
    selected: &[usize],
    w: &WorldState<T>,
    reference: &Reference<T>,
    cfg: &ControllerConfig<T>,
) -> Result<Vec<Point2<T>>> {
    let terms = control_terms(selected, w, reference, cfg)?;
    solve_update(&terms, w.herder_count())
}

/// Intermediate quantities of one control evaluation, shared between the
/// public operations and the simulator (which also records `|h|`).
pub(crate) struct ControlTerms<T: Real> {
    pub h: DVector<T>,
    pub j_u: DMatrix<T>,
    pub rhs: DVector<T>,
}

pub(crate) fn control_terms<T: Real>(
    selected: &[usize],
    w: &WorldState<T>,
    reference: &Reference<T>,
    cfg: &ControllerConfig<T>,
) -> Result<ControlTerms<T>> {
    w.validate()?;
    reference.validate(cfg.v_max)?;
    if selected.len() > w.herder_count() {
        return Err(Error::MoreSelectedThanHerders {
            selected: selected.len(),
            herders: w.herder_count(),
        });
    }
    let p = selected.len();
    let mut h = DVector::zeros(2 * p);
    let mut f_sel = DVector::zeros(2 * p);
    for (row, &j) in selected.iter().enumerate() {
        let f = dynamics::evader_velocity(j, w)?;
        let err = w.evaders[j] - reference.position;
        h[2 * row] = f.x + cfg.f_gain * err.x - reference.velocity.x;
        h[2 * row + 1] = f.y + cfg.f_gain * err.y - reference.velocity.y;
        f_sel[2 * row] = f.x;
        f_sel[2 * row + 1] = f.y;
    }
    let j_u = dynamics::jacobian_u(selected, w)?;
    let j_x = dynamics::jacobian_x(selected, w, cfg.f_gain)?;
    let rhs = -(&h * cfg.h_gain) - j_x * f_sel;
    Ok(ControlTerms { h, j_u, rhs })
}

pub(crate) fn solve_update<T: Real>(
    terms: &ControlTerms<T>,
    herder_count: usize,
) -> Result<Vec<Point2<T>>> {
    let svd = SVD::new(terms.j_u.clone(), true, true);
    let sigma_max = svd.singular_values.max();
    if !(sigma_max > T::zero()) || !sigma_max.finite() {
        return Err(Error::ControllabilityLoss);
    }
    let cutoff = sigma_max * T::of(SVD_CUTOFF_REL);
    let udot = svd
        .solve(&terms.rhs, cutoff)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Ok((0..herder_count)
        .map(|i| Point2::new(udot[2 * i], udot[2 * i + 1]))
        .collect())
}
