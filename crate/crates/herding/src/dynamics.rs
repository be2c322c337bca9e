//! Evader velocity fields, the stacked herd dynamics and their analytic
//! Jacobians.
//!
//! Two repulsion models are supported. The inverse model accumulates
//! `theta * d / |d|^3` over herders and `gamma * d / |d|^2` over the other
//! evaders, `d` being the offset from the repelling agent to the evader. The
//! exponential model replaces the herder term with
//! `beta * exp((d_min - |d|) / sigma) * d / |d|` and keeps the same evader
//! term. Distances entering a denominator are clamped below at [`D_FLOOR`],
//! which preserves the repulsion direction while bounding its magnitude near
//! coincidence.

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Distance floor in meters for repulsion denominators.
pub const D_FLOOR: f64 = 1e-3;

/// Per-evader repulsion model and gains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvaderModel<T> {
    /// Inverse-square herder repulsion; `theta` in m^3/s, `gamma` in m^2/s.
    Inverse { theta: T, gamma: T },
    /// Exponentially decaying herder repulsion; `beta` in m/s, `sigma` and
    /// `d_min` in meters, `gamma` in m^2/s.
    Exponential { beta: T, sigma: T, d_min: T, gamma: T },
}

impl<T: Real> EvaderModel<T> {
    pub fn inverse(theta: T, gamma: T) -> Result<Self> {
        if theta <= T::zero() || gamma <= T::zero() {
            return Err(Error::InvalidConfig("evader gains must be positive".into()));
        }
        Ok(Self::Inverse { theta, gamma })
    }

    pub fn exponential(beta: T, sigma: T, d_min: T, gamma: T) -> Result<Self> {
        if beta <= T::zero() || sigma <= T::zero() || d_min <= T::zero() || gamma <= T::zero() {
            return Err(Error::InvalidConfig("evader gains must be positive".into()));
        }
        Ok(Self::Exponential {
            beta,
            sigma,
            d_min,
            gamma,
        })
    }

    pub fn gamma(&self) -> T {
        match *self {
            Self::Inverse { gamma, .. } | Self::Exponential { gamma, .. } => gamma,
        }
    }
}

/// Snapshot of all agent positions at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState<T> {
    pub evaders: Vec<Point2<T>>,
    pub herders: Vec<Point2<T>>,
    pub models: Vec<EvaderModel<T>>,
    pub time: T,
}

impl<T: Real> WorldState<T> {
    pub fn new(
        evaders: Vec<Point2<T>>,
        herders: Vec<Point2<T>>,
        models: Vec<EvaderModel<T>>,
        time: T,
    ) -> Result<Self> {
        let w = Self {
            evaders,
            herders,
            models,
            time,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.evaders.is_empty() || self.herders.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one evader and one herder".into(),
            ));
        }
        if self.models.len() != self.evaders.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} models for {} evaders",
                self.models.len(),
                self.evaders.len()
            )));
        }
        if !self.finite() {
            return Err(Error::InvalidCoordinate);
        }
        Ok(())
    }

    pub fn finite(&self) -> bool {
        self.evaders.iter().all(|p| p.finite())
            && self.herders.iter().all(|p| p.finite())
            && self.time.finite()
    }

    pub fn evader_count(&self) -> usize {
        self.evaders.len()
    }

    pub fn herder_count(&self) -> usize {
        self.herders.len()
    }
}

/// Repulsion exerted on the evader at offset `d` by a single herder.
fn herder_term<T: Real>(model: &EvaderModel<T>, d: Point2<T>) -> Point2<T> {
    let r = d.norm();
    if r == T::zero() {
        return Point2::zero();
    }
    match *model {
        EvaderModel::Inverse { theta, .. } => {
            let rc = r.max(T::of(D_FLOOR));
            d.scaled(theta / (r * rc * rc))
        }
        EvaderModel::Exponential {
            beta, sigma, d_min, ..
        } => {
            let g = ((d_min - r) / sigma).exp();
            d.scaled(beta * g / r)
        }
    }
}

/// Repulsion exerted on an evader at offset `d` by another evader.
fn evader_term<T: Real>(gamma: T, d: Point2<T>) -> Point2<T> {
    let r = d.norm();
    if r == T::zero() {
        return Point2::zero();
    }
    let rc = r.max(T::of(D_FLOOR));
    d.scaled(gamma / (r * rc))
}

fn evader_velocity_unchecked<T: Real>(j: usize, w: &WorldState<T>) -> Point2<T> {
    let model = &w.models[j];
    let xj = w.evaders[j];
    let mut v = Point2::zero();
    for &u in &w.herders {
        v = v + herder_term(model, xj - u);
    }
    let gamma = model.gamma();
    for (j2, &x2) in w.evaders.iter().enumerate() {
        if j2 != j {
            v = v + evader_term(gamma, xj - x2);
        }
    }
    v
}

/// Unsaturated velocity of evader `j` under the current world state.
pub fn evader_velocity<T: Real>(j: usize, w: &WorldState<T>) -> Result<Point2<T>> {
    w.validate()?;
    if j >= w.evaders.len() {
        return Err(Error::IndexOutOfRange(j));
    }
    Ok(evader_velocity_unchecked(j, w))
}

/// Stacked unsaturated velocities of every evader.
pub fn herd_velocity<T: Real>(w: &WorldState<T>) -> Result<Vec<Point2<T>>> {
    w.validate()?;
    Ok((0..w.evaders.len())
        .map(|j| evader_velocity_unchecked(j, w))
        .collect())
}

fn outer<T: Real>(d: Point2<T>) -> Matrix2<T> {
    Matrix2::new(d.x * d.x, d.x * d.y, d.y * d.x, d.y * d.y)
}

/// `d(herder_term)/d(evader position)` for one herder at offset `d`. The
/// derivative with respect to the herder position is the negation. Exact for
/// separations of at least [`D_FLOOR`].
fn herder_jacobian<T: Real>(model: &EvaderModel<T>, d: Point2<T>) -> Matrix2<T> {
    let r = d.norm();
    if r == T::zero() {
        return Matrix2::zeros();
    }
    match *model {
        EvaderModel::Inverse { theta, .. } => {
            (Matrix2::identity() / r.powi(3) - outer(d) * (T::of(3.0) / r.powi(5))) * theta
        }
        EvaderModel::Exponential {
            beta, sigma, d_min, ..
        } => {
            let g = ((d_min - r) / sigma).exp();
            let radial = (T::one() / sigma + T::one() / r) / (r * r);
            (Matrix2::identity() / r - outer(d) * radial) * (beta * g)
        }
    }
}

/// `d(evader_term)/d(evader position)` for an evader pair at offset `d`.
fn evader_jacobian<T: Real>(gamma: T, d: Point2<T>) -> Matrix2<T> {
    let r = d.norm();
    if r == T::zero() {
        return Matrix2::zeros();
    }
    (Matrix2::identity() / (r * r) - outer(d) * (T::of(2.0) / r.powi(4))) * gamma
}

fn check_selected<T: Real>(selected: &[usize], w: &WorldState<T>) -> Result<()> {
    w.validate()?;
    if selected.len() > w.herders.len() {
        return Err(Error::MoreSelectedThanHerders {
            selected: selected.len(),
            herders: w.herders.len(),
        });
    }
    match selected.iter().find(|&&j| j >= w.evaders.len()) {
        Some(&j) => Err(Error::IndexOutOfRange(j)),
        None => Ok(()),
    }
}

/// Jacobian of the selected evaders' dynamics with respect to the stacked
/// herder positions (`2p x 2n`). This equals the Jacobian of `h` with
/// respect to the input, since the target dynamics do not depend on it.
pub fn jacobian_u<T: Real>(selected: &[usize], w: &WorldState<T>) -> Result<DMatrix<T>> {
    check_selected(selected, w)?;
    let p = selected.len();
    let n = w.herders.len();
    let mut jac = DMatrix::zeros(2 * p, 2 * n);
    for (row, &j) in selected.iter().enumerate() {
        let model = &w.models[j];
        for (col, &u) in w.herders.iter().enumerate() {
            let block = -herder_jacobian(model, w.evaders[j] - u);
            jac.fixed_view_mut::<2, 2>(2 * row, 2 * col).copy_from(&block);
        }
    }
    Ok(jac)
}

/// Jacobian of `h` with respect to the stacked selected-evader positions
/// (`2p x 2p`): the dynamics term plus the `f_gain` identity contributed by
/// the target dynamics. Non-selected evaders are treated as constants of the
/// current instant, which keeps the matrix square.
pub fn jacobian_x<T: Real>(selected: &[usize], w: &WorldState<T>, f_gain: T) -> Result<DMatrix<T>> {
    check_selected(selected, w)?;
    let p = selected.len();
    let mut jac = DMatrix::zeros(2 * p, 2 * p);
    for (row, &j) in selected.iter().enumerate() {
        let model = &w.models[j];
        let xj = w.evaders[j];
        let gamma = model.gamma();

        let mut diag = Matrix2::identity() * f_gain;
        for &u in &w.herders {
            diag += herder_jacobian(model, xj - u);
        }
        for (j2, &x2) in w.evaders.iter().enumerate() {
            if j2 != j {
                diag += evader_jacobian(gamma, xj - x2);
            }
        }
        jac.fixed_view_mut::<2, 2>(2 * row, 2 * row).copy_from(&diag);

        for (col, &j2) in selected.iter().enumerate() {
            if j2 == j {
                continue;
            }
            let block = -evader_jacobian(gamma, xj - w.evaders[j2]);
            jac.fixed_view_mut::<2, 2>(2 * row, 2 * col).copy_from(&block);
        }
    }
    Ok(jac)
}

/// Clamp `v` to the speed limit, preserving its direction.
pub fn saturate<T: Real>(v: Point2<T>, v_max: T) -> Point2<T> {
    let n = v.norm();
    if n <= v_max {
        v
    } else {
        v.scaled(v_max / n)
    }
}
