//! Planar geometry: points, Quickhull convex hulls and point-set utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Collinearity tolerance in meters. Points within this distance of a hull
/// edge are treated as on-hull but are not promoted to vertices, keeping the
/// vertex set minimal.
pub const EPS_GEO: f64 = 1e-9;

/// Position in the plane, in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Copy> From<[T; 2]> for Point2<T> {
    fn from(a: [T; 2]) -> Self {
        Self { x: a[0], y: a[1] }
    }
}

impl<T: Copy> From<Point2<T>> for [T; 2] {
    fn from(p: Point2<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, rhs: Self) -> T {
        self.x * rhs.x + self.y * rhs.y
    }

    /// z-component of the cross product `self x rhs`.
    pub fn cross(self, rhs: Self) -> T {
        self.x * rhs.y - self.y * rhs.x
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, rhs: Self) -> T {
        (self - rhs).norm()
    }

    pub fn scaled(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn finite(self) -> bool {
        self.x.finite() && self.y.finite()
    }

    /// Lexicographic (x, then y) comparison; both coordinates must be finite.
    fn lex_cmp(self, rhs: Self) -> std::cmp::Ordering {
        (self.x, self.y)
            .partial_cmp(&(rhs.x, rhs.y))
            .expect("non-finite coordinate in comparison")
    }
}

impl<T: Real> std::ops::Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> std::ops::Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> std::ops::Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Convex hull of a point set, stored as indices into the input slice.
///
/// Vertices are in counter-clockwise order starting from the
/// lexicographically smallest vertex. Exact duplicates are collapsed to the
/// first occurrence before the hull is computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hull {
    vertex_indices: Vec<usize>,
}

impl Hull {
    pub fn vertex_indices(&self) -> &[usize] {
        &self.vertex_indices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_indices.len()
    }

    fn check_indices(&self, len: usize) -> Result<()> {
        match self.vertex_indices.iter().find(|&&i| i >= len) {
            Some(&i) => Err(Error::InvalidHull(format!(
                "vertex index {i} out of range for {len} points"
            ))),
            None => Ok(()),
        }
    }
}

/// Signed distance of `p` from the directed line `a -> b` (positive on the
/// left), in meters.
fn signed_dist<T: Real>(a: Point2<T>, b: Point2<T>, p: Point2<T>) -> T {
    let e = b - a;
    let len = e.norm();
    if len == T::zero() {
        return p.dist(a);
    }
    e.cross(p - a) / len
}

fn validate_points<T: Real>(points: &[Point2<T>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.iter().any(|p| !p.finite()) {
        return Err(Error::InvalidCoordinate);
    }
    Ok(())
}

/// Convex hull of `points` via Quickhull.
///
/// Returns the minimal vertex set: interior points, points on an edge and
/// duplicates are excluded. Degenerate inputs collapse to a single vertex
/// (all points coincident) or the two extreme endpoints (collinear set).
pub fn convex_hull<T: Real>(points: &[Point2<T>]) -> Result<Hull> {
    validate_points(points)?;
    let eps = T::of(EPS_GEO);

    // Collapse exact duplicates, keeping the first occurrence, and order the
    // survivors lexicographically so the extremes sit at both ends. Sorting
    // ties by index means the first occurrence survives the dedup.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].lex_cmp(points[j]).then(i.cmp(&j)));
    let mut unique: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        match unique.last() {
            Some(&last) if points[last] == points[i] => {}
            _ => unique.push(i),
        }
    }

    if unique.len() == 1 {
        return Ok(Hull {
            vertex_indices: unique,
        });
    }

    let a = unique[0];
    let b = unique[unique.len() - 1];
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &i in &unique {
        if i == a || i == b {
            continue;
        }
        let s = signed_dist(points[a], points[b], points[i]);
        if s < -eps {
            lower.push(i);
        } else if s > eps {
            upper.push(i);
        }
    }

    // Counter-clockwise: lexicographic minimum, lower chain, lexicographic
    // maximum, upper chain.
    let mut vertex_indices = vec![a];
    quickhull_side(points, a, b, &lower, eps, &mut vertex_indices);
    vertex_indices.push(b);
    quickhull_side(points, b, a, &upper, eps, &mut vertex_indices);

    Ok(Hull { vertex_indices })
}

/// Expand the hull between `a` and `b` with `candidates` strictly right of
/// the directed line `a -> b`, appending vertices in traversal order.
fn quickhull_side<T: Real>(
    points: &[Point2<T>],
    a: usize,
    b: usize,
    candidates: &[usize],
    eps: T,
    out: &mut Vec<usize>,
) {
    if candidates.is_empty() {
        return;
    }
    let mut far = candidates[0];
    let mut far_depth = -signed_dist(points[a], points[b], points[far]);
    for &i in &candidates[1..] {
        let depth = -signed_dist(points[a], points[b], points[i]);
        if depth > far_depth {
            far = i;
            far_depth = depth;
        }
    }

    let mut outside_af = Vec::new();
    let mut outside_fb = Vec::new();
    for &i in candidates {
        if i == far {
            continue;
        }
        if signed_dist(points[a], points[far], points[i]) < -eps {
            outside_af.push(i);
        } else if signed_dist(points[far], points[b], points[i]) < -eps {
            outside_fb.push(i);
        }
    }

    quickhull_side(points, a, far, &outside_af, eps, out);
    out.push(far);
    quickhull_side(points, far, b, &outside_fb, eps, out);
}

/// Arithmetic mean of a non-empty point set.
pub fn centroid<T: Real>(points: &[Point2<T>]) -> Result<Point2<T>> {
    validate_points(points)?;
    let mut sum = Point2::zero();
    for &p in points {
        sum = sum + p;
    }
    Ok(sum.scaled(T::one() / T::of(points.len() as f64)))
}

/// True iff `p` lies inside or on the convex polygon described by `hull`,
/// with an `EPS_GEO` tolerance on each edge.
pub fn point_in_hull<T: Real>(p: Point2<T>, hull: &Hull, points: &[Point2<T>]) -> Result<bool> {
    validate_points(points)?;
    hull.check_indices(points.len())?;
    if hull.vertex_count() == 0 {
        return Err(Error::InvalidHull("no vertices".into()));
    }
    if !p.finite() {
        return Err(Error::InvalidCoordinate);
    }
    let eps = T::of(EPS_GEO);
    let verts = &hull.vertex_indices;

    match verts.len() {
        1 => Ok(p.dist(points[verts[0]]) <= eps),
        2 => Ok(dist_to_segment(p, points[verts[0]], points[verts[1]]) <= eps),
        _ => Ok(verts.iter().zip(verts.iter().cycle().skip(1)).all(|(&i, &j)| {
            signed_dist(points[i], points[j], p) >= -eps
        })),
    }
}

fn dist_to_segment<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let e = b - a;
    let len_sq = e.norm_sq();
    if len_sq == T::zero() {
        return p.dist(a);
    }
    let t = (p - a).dot(e) / len_sq;
    let t = t.clamp(T::zero(), T::one());
    p.dist(a + e.scaled(t))
}
