//! Standard stationary spacetimes `R x S` with metric
//! `g = -beta dt^2 + omega (x) dt + dt (x) omega + g0`, their Fermat metrics, null
//! geodesics, chronological futures and changes of spacelike section.

use crate::chart::{Chart, Point};
use crate::curve::{gauss2, SampledCurve};
use crate::distance::{self, Direction, DistanceField, GridMask, Level};
use crate::error::{Error, Result};
use crate::field::{Field, MetricField, OneFormField, ScalarField};
use crate::finsler::{FinslerNorm, Orientation, RandersData};
use crate::geodesic::{geodesic_ivp_with, stencil_side, GeodesicOptions};
use crate::linalg::{self, Matrix};
use crate::ode::{dormand_prince, OdeOptions, StepControl};
use crate::scalar::Real;

/// Data `(beta, g0, omega)` of a standard stationary metric on `R x S`.
#[derive(Clone, Debug)]
pub struct StationaryData<T, const D: usize> {
    pub beta: ScalarField<T, D>,
    pub g0: MetricField<T, D>,
    pub omega: OneFormField<T, D>,
    pub chart: Chart<T, D>,
    pub seams: Vec<(usize, T)>,
}

/// A spacetime point `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<T, const D: usize> {
    pub t: T,
    pub x: Point<T, D>,
}

impl<T: Real, const D: usize> Event<T, D> {
    pub fn new(t: T, x: [T; D]) -> Self {
        Event { t, x: Point(x) }
    }
}

/// A spacetime tangent vector `dt d/dt + dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeVector<T, const D: usize> {
    pub dt: T,
    pub dx: [T; D],
}

/// Time orientation of a causal vector: future means `g(K, v) < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeOrientation {
    Future,
    Past,
}

impl TimeOrientation {
    fn fermat(self) -> Orientation {
        match self {
            TimeOrientation::Future => Orientation::Forward,
            TimeOrientation::Past => Orientation::Reverse,
        }
    }
}

impl<T: Real, const D: usize> StationaryData<T, D> {
    pub fn new(beta: ScalarField<T, D>, g0: MetricField<T, D>, omega: OneFormField<T, D>, chart: Chart<T, D>) -> Self {
        StationaryData { beta, g0, omega, chart, seams: Vec::new() }
    }

    pub fn with_seam(mut self, axis: usize, value: T) -> Self {
        self.seams.push((axis, value));
        self
    }

    /// `(beta, g0, omega)` at raw coordinates (periodic axes wrapped).
    #[inline]
    pub fn fields_at(&self, x: &[T; D]) -> (T, Matrix<T, D>, [T; D]) {
        let q = self.chart.wrap_periodic(x);
        (self.beta.at(&q), self.g0.at(&q), self.omega.at(&q))
    }

    /// `g(u, v)` at spatial position `x`.
    pub fn product(&self, x: &[T; D], u: &SpacetimeVector<T, D>, v: &SpacetimeVector<T, D>) -> T {
        let (beta, g0, w) = self.fields_at(x);
        -beta * u.dt * v.dt + u.dt * linalg::dot(&w, &v.dx) + v.dt * linalg::dot(&w, &u.dx) + linalg::bilinear(&g0, &u.dx, &v.dx)
    }

    /// `g(K, v)` with `K = d/dt`.
    pub fn killing_product(&self, x: &[T; D], v: &SpacetimeVector<T, D>) -> T {
        let (beta, _, w) = self.fields_at(x);
        -beta * v.dt + linalg::dot(&w, &v.dx)
    }

    /// Row-major `(D+1) x (D+1)` metric matrix in coordinates `(t, x)`.
    pub fn metric_matrix(&self, x: &[T; D]) -> Vec<T> {
        let (beta, g0, w) = self.fields_at(x);
        let n = D + 1;
        let mut m = vec![T::zero(); n * n];
        m[0] = -beta;
        for i in 0..D {
            m[i + 1] = w[i];
            m[(i + 1) * n] = w[i];
            for j in 0..D {
                m[(i + 1) * n + j + 1] = g0[i][j];
            }
        }
        m
    }

    /// The null vector over `dx` with the given time orientation:
    /// `dt = F(dx)` for the future, `dt = -F(-dx)` for the past.
    pub fn null_lift(&self, x: &[T; D], dx: &[T; D], orientation: TimeOrientation) -> SpacetimeVector<T, D> {
        let (beta, g0, w) = self.fields_at(x);
        let b = linalg::dot(&w, dx) / beta;
        let root = (b * b + linalg::quad(&g0, dx) / beta).max(T::zero()).sqrt();
        let dt = match orientation {
            TimeOrientation::Future => b + root,
            TimeOrientation::Past => b - root,
        };
        SpacetimeVector { dt, dx: *dx }
    }

    fn check_beta(&self) -> Result<()> {
        for idx in 0..self.chart.node_count() {
            let x = self.chart.node_coords(idx);
            let b = self.beta.at(&x);
            if !(b > T::zero()) {
                return Err(Error::InvalidData {
                    point: Point(x).to_f64_vec(),
                    reason: format!("beta = {b} is not positive"),
                });
            }
        }
        Ok(())
    }
}

/// Fermat metric: `h = g0 / beta + (omega / beta)^2`, one-form `omega / beta`.
pub fn fermat_from_stationary<T: Real, const D: usize>(sd: &StationaryData<T, D>) -> Result<RandersData<T, D>> {
    sd.check_beta()?;
    let (b1, g1, w1) = (sd.beta.clone(), sd.g0.clone(), sd.omega.clone());
    let h: MetricField<T, D> = Field::closed(move |x| {
        let beta = b1.at(x);
        let w = w1.at(x);
        linalg::mat_add(&linalg::mat_scale(&g1.at(x), T::one() / beta), &linalg::mat_scale(&linalg::outer(&w, &w), T::one() / (beta * beta)))
    });
    let (b2, w2) = (sd.beta.clone(), sd.omega.clone());
    let omega: OneFormField<T, D> = Field::closed(move |x| linalg::scale(&w2.at(x), T::one() / b2.at(x)));
    let mut r = RandersData::new(h, omega, sd.chart.clone());
    r.seams = sd.seams.clone();
    Ok(r)
}

/// Stationary data `beta = 1, g0 = h - omega (x) omega` with the same `omega`.
pub fn stationary_from_randers<T: Real, const D: usize>(r: &RandersData<T, D>) -> Result<StationaryData<T, D>> {
    for idx in 0..r.chart.node_count() {
        let x = r.chart.node_coords(idx);
        if !(r.omega_norm_at(&x) < T::one()) {
            return Err(Error::InvalidData {
                point: Point(x).to_f64_vec(),
                reason: "one-form has h-norm at least one".into(),
            });
        }
    }
    let (h, w) = (r.h.clone(), r.omega.clone());
    let g0: MetricField<T, D> = Field::closed(move |x| {
        let o = w.at(x);
        linalg::mat_sub(&h.at(x), &linalg::outer(&o, &o))
    });
    let mut sd = StationaryData::new(ScalarField::constant(T::one()), g0, r.omega.clone(), r.chart.clone());
    sd.seams = r.seams.clone();
    Ok(sd)
}

/// Lightlike lift `s -> (t(s), x(s))` of a spatial curve.
#[derive(Debug, Clone)]
pub struct LightlikeLift<T, const D: usize> {
    pub params: Vec<T>,
    pub times: Vec<T>,
    pub points: Vec<[T; D]>,
}

impl<T: Real, const D: usize> LightlikeLift<T, D> {
    pub fn arrival(&self) -> T {
        *self.times.last().unwrap()
    }
}

/// Arrival time of the future lightlike lift of `curve` started at `t_start`:
/// `t_start + int F(x')` with `F` the Fermat metric.
pub fn arrival_time<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    curve: &SampledCurve<T, D>,
    t_start: T,
) -> Result<LightlikeLift<T, D>> {
    let fermat = FinslerNorm::forward(fermat_from_stationary(sd)?);
    let mut times = Vec::with_capacity(curve.len());
    let mut t = t_start;
    times.push(t);
    for i in 0..curve.len().saturating_sub(1) {
        let ds = curve.params[i + 1] - curve.params[i];
        for (u, w) in gauss2::<T>() {
            let (x, v) = curve.segment_eval(i, u);
            t = t + w * ds * fermat.eval(&x, &v);
        }
        times.push(t);
    }
    Ok(LightlikeLift { params: curve.params.clone(), times, points: curve.points.clone() })
}

/// A spacetime null geodesic with conservation diagnostics.
#[derive(Debug, Clone)]
pub struct NullGeodesic<T, const D: usize> {
    pub orientation: TimeOrientation,
    pub params: Vec<T>,
    /// Events with unwrapped spatial coordinates.
    pub events: Vec<Event<T, D>>,
    pub velocities: Vec<SpacetimeVector<T, D>>,
    /// `g(K, u)` at the start.
    pub killing_initial: T,
    /// Largest `|g(K, u) - g(K, u0)| / |g(K, u0)|`.
    pub max_killing_drift: T,
    /// Largest `|g(u, u)| / (dt^2 + |dx|^2)`.
    pub max_null_drift: T,
    /// Smallest `(t' - F(x')) / |x'|` along the curve, sign-adjusted for past curves.
    pub min_time_margin: T,
    /// Raised when the null constraint drifts above `1e-6`.
    pub accuracy_warning: bool,
    pub escaped: bool,
    /// Stopped before crossing a seam of the data.
    pub seam: bool,
}

fn christoffel_accel<T: Real, const D: usize>(sd: &StationaryData<T, D>, x: &[T; D], u: &[T]) -> std::result::Result<Vec<T>, String> {
    let n = D + 1;
    let g = sd.metric_matrix(x);
    // dG/dx^a for spatial a (the metric does not depend on t)
    let mut dg = vec![vec![T::zero(); n * n]; n];
    let eight = T::lit(8.0);
    for a in 0..D {
        let h = sd.chart.fd_step(a);
        let at = |s: T| {
            let mut z = *x;
            z[a] = z[a] + s;
            sd.metric_matrix(&z)
        };
        let side = stencil_side(&sd.seams, a, x[a], h, u[1 + a]);
        if side == 0 {
            let (p1, m1, p2, m2) = (at(h), at(-h), at(h + h), at(-h - h));
            for k in 0..n * n {
                dg[a + 1][k] = (eight * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (T::lit(12.0) * h);
            }
        } else {
            let e = if side > 0 { h } else { -h };
            let vals: Vec<Vec<T>> = (0..5).map(|j| at(T::from_count(j) * e)).collect();
            let c = [-25.0, 48.0, -36.0, 16.0, -3.0].map(T::lit);
            for k in 0..n * n {
                dg[a + 1][k] = (0..5).fold(T::zero(), |acc, j| acc + c[j] * vals[j][k]) / (T::lit(12.0) * e);
            }
        }
    }
    // Gamma_{nu alpha beta} u^alpha u^beta = (d_alpha G_{nu beta} - 1/2 d_nu G_{alpha beta}) u^alpha u^beta
    let mut rhs = vec![T::zero(); n];
    for nu in 0..n {
        let mut s = T::zero();
        for al in 0..n {
            for be in 0..n {
                let term = dg[al][nu * n + be] - T::lit(0.5) * dg[nu][al * n + be];
                s = s + term * u[al] * u[be];
            }
        }
        rhs[nu] = -s;
    }
    let mut m = g;
    linalg::dyn_solve_in_place(&mut m, &mut rhs, n).ok_or_else(|| "degenerate spacetime metric".to_string())?;
    Ok(rhs)
}

/// Integrates the null geodesic through `e0` with tangent `v0` over affine
/// parameter `[0, s_max]`, using Christoffel symbols from finite differences of
/// the metric blocks.
pub fn integrate_null_geodesic<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    e0: &Event<T, D>,
    v0: &SpacetimeVector<T, D>,
    orientation: TimeOrientation,
    s_max: T,
) -> Result<NullGeodesic<T, D>> {
    integrate_null_geodesic_with(sd, e0, v0, orientation, s_max, T::lit(1e-11))
}

pub fn integrate_null_geodesic_with<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    e0: &Event<T, D>,
    v0: &SpacetimeVector<T, D>,
    orientation: TimeOrientation,
    s_max: T,
    tol: T,
) -> Result<NullGeodesic<T, D>> {
    let x0 = sd.chart.normalize(&e0.x)?.0;
    let scale = v0.dt * v0.dt + linalg::dot(&v0.dx, &v0.dx);
    if scale == T::zero() {
        return Err(Error::ZeroVector);
    }
    let norm0 = sd.product(&x0, v0, v0);
    if norm0.abs() > T::lit(1e-10) * scale {
        return Err(Error::Precondition(format!("initial vector is not null: g(v, v) = {norm0}")));
    }
    let k0 = sd.killing_product(&x0, v0);
    let future = k0 < T::zero();
    if future != (orientation == TimeOrientation::Future) || k0 == T::zero() {
        return Err(Error::Precondition("initial vector has the wrong time orientation".into()));
    }
    let n = D + 1;
    let mut y0 = vec![T::zero(); 2 * n];
    y0[0] = e0.t;
    y0[1..n].copy_from_slice(&x0);
    y0[n] = v0.dt;
    y0[n + 1..].copy_from_slice(&v0.dx);

    let mut rhs = |_s: T, y: &[T], dy: &mut [T]| -> std::result::Result<(), String> {
        let x: [T; D] = std::array::from_fn(|i| y[1 + i]);
        let acc = christoffel_accel(sd, &x, &y[n..])?;
        dy[..n].copy_from_slice(&y[n..]);
        dy[n..].copy_from_slice(&acc);
        Ok(())
    };
    let chart = sd.chart.clone();
    let mut escaped = false;
    let mut seam = false;
    let mut prev: [T; D] = x0;
    let mut hook = |_s: T, y: &mut Vec<T>| {
        let x: [T; D] = std::array::from_fn(|i| y[1 + i]);
        for a in 0..D {
            if !chart.is_periodic(a) && (x[a] < chart.lower(a) || x[a] > chart.upper(a)) {
                escaped = true;
                return StepControl::Stop;
            }
        }
        for (axis, value) in &sd.seams {
            if (prev[*axis] - *value) * (x[*axis] - *value) < T::zero() {
                seam = true;
                return StepControl::Stop;
            }
        }
        prev = x;
        StepControl::Continue
    };
    let mut opts = OdeOptions::new(tol);
    opts.h_max = Some(s_max / T::lit(64.0));
    let mut traj = dormand_prince(&mut rhs, T::zero(), s_max, &y0, &opts, &mut hook)?;
    if seam && traj.ys.len() > 1 {
        // the last step straddles a seam where the metric is only continuous
        traj.ts.pop();
        traj.ys.pop();
        traj.dys.pop();
    }

    let fermat = FinslerNorm::forward(fermat_from_stationary(sd)?).with_orientation(orientation.fermat());
    let mut events = Vec::with_capacity(traj.ts.len());
    let mut velocities = Vec::with_capacity(traj.ts.len());
    let mut max_k = T::zero();
    let mut max_null = T::zero();
    let mut min_margin = T::infinity();
    for y in &traj.ys {
        let x: [T; D] = std::array::from_fn(|i| y[1 + i]);
        let v = SpacetimeVector { dt: y[n], dx: std::array::from_fn(|i| y[n + 1 + i]) };
        max_k = max_k.max((sd.killing_product(&x, &v) - k0).abs() / k0.abs());
        let sc = v.dt * v.dt + linalg::dot(&v.dx, &v.dx);
        max_null = max_null.max(sd.product(&x, &v, &v).abs() / sc);
        let nx = linalg::norm(&v.dx);
        if nx > T::zero() {
            let signed_dt = match orientation {
                TimeOrientation::Future => v.dt,
                TimeOrientation::Past => -v.dt,
            };
            min_margin = min_margin.min((signed_dt - fermat.eval(&x, &v.dx)) / nx);
        }
        events.push(Event { t: y[0], x: Point(x) });
        velocities.push(v);
    }
    Ok(NullGeodesic {
        orientation,
        params: traj.ts,
        events,
        velocities,
        killing_initial: k0,
        max_killing_drift: max_k,
        max_null_drift: max_null,
        min_time_margin: min_margin,
        accuracy_warning: max_null > T::lit(1e-6),
        escaped,
        seam,
    })
}

/// Result of [`project_and_compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionReport<T> {
    /// Fermat length covered, `|t_end - t_0|`.
    pub fermat_length: T,
    /// Largest distance between the projection at time `t` and the unit-speed
    /// Fermat geodesic at parameter `|t - t_0|`.
    pub max_spatial_deviation: T,
    /// Largest `| |t(s) - t_0| - int_0^s F(x') |`.
    pub max_time_deviation: T,
}

/// Compares the spatial projection of a null geodesic with the Fermat geodesic
/// (reverse Fermat for past-pointing curves) from the same position and direction.
pub fn project_and_compare<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    null_geo: &NullGeodesic<T, D>,
) -> Result<ProjectionReport<T>> {
    let fermat = FinslerNorm::forward(fermat_from_stationary(sd)?).with_orientation(null_geo.orientation.fermat());
    let e0 = null_geo.events[0];
    let v0 = null_geo.velocities[0];
    let t0 = e0.t;
    let elapsed: Vec<T> = null_geo.events.iter().map(|e| (e.t - t0).abs()).collect();
    let total = *elapsed.last().unwrap();
    if total == T::zero() {
        return Ok(ProjectionReport { fermat_length: total, max_spatial_deviation: T::zero(), max_time_deviation: T::zero() });
    }
    let w = linalg::scale(&v0.dx, T::one() / fermat.eval(&e0.x.0, &v0.dx));
    let opts = GeodesicOptions::new(T::lit(1e-11)).with_max_step(T::lit(0.01).min(total / T::lit(16.0)));
    let geo = geodesic_ivp_with(&fermat, &e0.x, &w, total, &opts)?;
    let (_, g_end) = geo.curve.param_range();
    let mut max_dx = T::zero();
    for (e, s) in null_geo.events.iter().zip(&elapsed) {
        if *s > g_end {
            break;
        }
        max_dx = max_dx.max(linalg::dist(&geo.curve.at(*s), &e.x.0));
    }
    // time advance against the Fermat length of the projection
    let proj = SampledCurve::with_velocities(
        null_geo.params.clone(),
        null_geo.events.iter().map(|e| e.x.0).collect(),
        null_geo.velocities.iter().map(|v| v.dx).collect(),
    )?;
    let mut acc = T::zero();
    let mut max_dt = T::zero();
    for i in 0..proj.len().saturating_sub(1) {
        let ds = proj.params[i + 1] - proj.params[i];
        for (u, wgt) in gauss2::<T>() {
            let (x, v) = proj.segment_eval(i, u);
            acc = acc + wgt * ds * fermat.eval(&x, &v);
        }
        max_dt = max_dt.max((acc - elapsed[i + 1]).abs());
    }
    Ok(ProjectionReport { fermat_length: total, max_spatial_deviation: max_dx, max_time_deviation: max_dt })
}

/// Time-`t` slice of `I+(e0)`: the open forward Fermat ball of radius `t - t0`.
pub fn chronological_future<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    e0: &Event<T, D>,
    t: T,
) -> Result<GridMask<T, D>> {
    let fermat = FinslerNorm::forward(fermat_from_stationary(sd)?);
    if t <= e0.t {
        return Ok(GridMask::from_fn(&sd.chart, |_| false));
    }
    let field = DistanceField::from_point(&fermat, &e0.x, Direction::Forward)?;
    Ok(GridMask::from_fn(&sd.chart, |i| field.values[i] < t - e0.t))
}

/// Time-`t` slice of `I-(e0)`: the open backward Fermat ball of radius `t0 - t`.
pub fn chronological_past<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    e0: &Event<T, D>,
    t: T,
) -> Result<GridMask<T, D>> {
    let fermat = FinslerNorm::forward(fermat_from_stationary(sd)?);
    if t >= e0.t {
        return Ok(GridMask::from_fn(&sd.chart, |_| false));
    }
    let field = DistanceField::from_point(&fermat, &e0.x, Direction::Backward)?;
    Ok(GridMask::from_fn(&sd.chart, |i| field.values[i] < e0.t - t))
}

/// `e1 in I+(e0)` iff `d(x0, x1) < t1 - t0` (refined Fermat distance).
pub fn in_chronological_future<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    e0: &Event<T, D>,
    e1: &Event<T, D>,
) -> Result<bool> {
    if e1.t <= e0.t {
        return Ok(false);
    }
    let fermat = FinslerNorm::forward(fermat_from_stationary(sd)?);
    let d = distance::forward_distance(&fermat, &e0.x, &e1.x, Level::Refined)?;
    Ok(d.value < e1.t - e0.t)
}

/// Result of [`spacelike_section_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SectionReport<T> {
    /// Estimated `sup { df(v) : R(v) = 1 }` over the grid.
    pub sup: T,
    pub margin: T,
    pub is_spacelike: bool,
    pub worst_point: Vec<f64>,
}

/// Integer directions with max-norm `k`, normalized.
fn direction_net<T: Real, const D: usize>(k: isize) -> Vec<[T; D]> {
    let side = (2 * k + 1) as usize;
    let mut out = Vec::new();
    for idx in 0..side.pow(D as u32) {
        let mut rem = idx;
        let mut v = [T::zero(); D];
        let mut maxabs = 0;
        for c in v.iter_mut() {
            let o = (rem % side) as isize - k;
            rem /= side;
            maxabs = maxabs.max(o.abs());
            *c = T::lit(o as f64);
        }
        if maxabs == k {
            out.push(linalg::scale(&v, T::one() / linalg::norm(&v)));
        }
    }
    out
}

/// `sup df(u) / R(u)` over unit directions at `x`: a direction net followed by
/// a shrinking pattern search.
fn local_sup<T: Real, const D: usize>(r: &FinslerNorm<T, D>, x: &[T; D], df: &[T; D]) -> T {
    let ratio = |u: &[T; D]| linalg::dot(df, u) / r.eval(x, u);
    let net = direction_net::<T, D>(if D == 1 { 1 } else { 12 });
    let mut best = net[0];
    let mut val = ratio(&best);
    for u in &net[1..] {
        let v = ratio(u);
        if v > val {
            val = v;
            best = *u;
        }
    }
    if D > 1 {
        let mut step = T::lit(0.1);
        for _ in 0..60 {
            let mut improved = false;
            for a in 0..D {
                for sgn in [T::one(), -T::one()] {
                    let mut u = best;
                    u[a] = u[a] + sgn * step;
                    let u = linalg::scale(&u, T::one() / linalg::norm(&u));
                    let v = ratio(&u);
                    if v > val {
                        val = v;
                        best = u;
                        improved = true;
                    }
                }
            }
            if !improved {
                step = step * T::lit(0.5);
            }
        }
    }
    val
}

/// Estimates `sup { df(v) : R(v) = 1 }` over the chart grid; the graph of `f`
/// is spacelike iff the supremum is below one.
pub fn spacelike_section_check<T: Real, const D: usize>(r: &RandersData<T, D>, f: &ScalarField<T, D>) -> SectionReport<T> {
    let norm = FinslerNorm::forward(r.clone());
    let grid = &r.chart;
    let mut sup = T::neg_infinity();
    let mut worst = grid.node_coords(0);
    for idx in 0..grid.node_count() {
        let x = grid.node_coords(idx);
        let df = f.differential_at(grid, &x);
        let v = local_sup(&norm, &x, &df);
        if v > sup {
            sup = v;
            worst = x;
        }
    }
    let margin = T::one() - sup;
    SectionReport {
        sup,
        margin,
        is_spacelike: margin > T::lit(1e-9),
        worst_point: Point(worst).to_f64_vec(),
    }
}

/// Agreement between the two constructions of `R - df`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionChangeReport<T> {
    pub max_h_difference: T,
    pub max_omega_difference: T,
}

/// Randers data of `R^f = R - df`: metric `h`, one-form `omega - df`.
pub fn section_change_direct<T: Real, const D: usize>(r: &RandersData<T, D>, f: &ScalarField<T, D>) -> RandersData<T, D> {
    let (w, ff, chart) = (r.omega.clone(), f.clone(), r.chart.clone());
    let omega: OneFormField<T, D> = Field::closed(move |x| linalg::sub(&w.at(x), &ff.differential_at(&chart, x)));
    RandersData { h: r.h.clone(), omega, chart: r.chart.clone(), seams: r.seams.clone() }
}

/// `R - df` built directly and through the induced Fermat metric of the graph of
/// `f` in the associated spacetime; both must agree on the grid.
pub fn section_change_checked<T: Real, const D: usize>(
    r: &RandersData<T, D>,
    f: &ScalarField<T, D>,
) -> Result<(RandersData<T, D>, SectionChangeReport<T>)> {
    let check = spacelike_section_check(r, f);
    if !check.is_spacelike {
        return Err(Error::NotSpacelike { point: check.worst_point, sup: check.sup.to_f64_lossy() });
    }
    let direct = section_change_direct(r, f);
    let induced = induced_fermat_of_graph(&stationary_from_randers(r)?, f)?;
    let mut dh = T::zero();
    let mut dw = T::zero();
    for idx in 0..r.chart.node_count() {
        let x = r.chart.node_coords(idx);
        let (h1, w1) = direct.fields_at(&x);
        let (h2, w2) = induced.fields_at(&x);
        dh = dh.max(linalg::max_abs_diff(&h1, &h2));
        dw = dw.max(linalg::max_abs(&linalg::sub(&w1, &w2)));
    }
    Ok((direct, SectionChangeReport { max_h_difference: dh, max_omega_difference: dw }))
}

/// [`section_change_checked`] without the report; errors if the two
/// constructions disagree beyond `1e-9`.
pub fn section_change<T: Real, const D: usize>(r: &RandersData<T, D>, f: &ScalarField<T, D>) -> Result<RandersData<T, D>> {
    let (data, rep) = section_change_checked(r, f)?;
    let tol = T::lit(1e-9);
    if rep.max_h_difference > tol || rep.max_omega_difference > tol {
        return Err(Error::InvalidData {
            point: vec![],
            reason: format!(
                "section change constructions disagree (h {}, omega {})",
                rep.max_h_difference, rep.max_omega_difference
            ),
        });
    }
    Ok(data)
}

/// Fermat metric of the splitting `t' = t - f(x)`:
/// `g0^f = g0 + omega (x) df + df (x) omega - beta df (x) df`, `omega^f = omega - beta df`.
pub fn induced_fermat_of_graph<T: Real, const D: usize>(
    sd: &StationaryData<T, D>,
    f: &ScalarField<T, D>,
) -> Result<RandersData<T, D>> {
    let chart = sd.chart.clone();
    let (b, g, w, ff, c) = (sd.beta.clone(), sd.g0.clone(), sd.omega.clone(), f.clone(), chart.clone());
    let g0f: MetricField<T, D> = Field::closed(move |x| {
        let beta = b.at(x);
        let o = w.at(x);
        let df = ff.differential_at(&c, x);
        let mut m = g.at(x);
        for i in 0..D {
            for j in 0..D {
                m[i][j] = m[i][j] + o[i] * df[j] + df[i] * o[j] - beta * df[i] * df[j];
            }
        }
        m
    });
    for idx in 0..chart.node_count() {
        let x = chart.node_coords(idx);
        if !linalg::is_spd(&g0f.at(&x)) {
            let df = f.differential_at(&chart, &x);
            let fermat = FinslerNorm::forward(fermat_from_stationary(sd)?);
            return Err(Error::NotSpacelike { point: Point(x).to_f64_vec(), sup: local_sup(&fermat, &x, &df).to_f64_lossy() });
        }
    }
    let (b2, w2, ff2, c2) = (sd.beta.clone(), sd.omega.clone(), f.clone(), chart.clone());
    let omegaf: OneFormField<T, D> = Field::closed(move |x| {
        let df = ff2.differential_at(&c2, x);
        linalg::axpy(&w2.at(x), -b2.at(x), &df)
    });
    let induced = StationaryData { beta: sd.beta.clone(), g0: g0f, omega: omegaf, chart, seams: sd.seams.clone() };
    fermat_from_stationary(&induced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::euclidean;
    use crate::finsler::curve_length;

    fn plane() -> Chart<f64, 2> {
        Chart::rectangle([(-2.0, 2.0), (-2.0, 2.0)], 17).unwrap()
    }

    fn minkowski() -> StationaryData<f64, 2> {
        StationaryData::new(ScalarField::constant(1.0), euclidean(), Field::constant([0.0, 0.0]), plane())
    }

    fn wavy() -> RandersData<f64, 2> {
        let h: MetricField<f64, 2> = Field::closed(|x: &[f64; 2]| [[1.0 + 0.2 * x[0].sin(), 0.1], [0.1, 1.3]]);
        let w: OneFormField<f64, 2> = Field::closed(|x: &[f64; 2]| [0.3 * x[1].cos(), 0.2 * x[0].sin()]);
        RandersData::new(h, w, plane())
    }

    #[test]
    fn static_case_is_riemannian() {
        let r = fermat_from_stationary(&minkowski()).unwrap();
        let f = FinslerNorm::forward(r);
        assert_eq!(f.eval(&[0.5, 0.5], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn nonpositive_beta_rejected() {
        let mut sd = minkowski();
        sd.beta = ScalarField::closed(|x: &[f64; 2]| x[0]);
        assert!(matches!(fermat_from_stationary(&sd), Err(Error::InvalidData { .. })));
    }

    #[test]
    fn round_trip_and_constant_form_g0() {
        let r = wavy();
        let sd = stationary_from_randers(&r).unwrap();
        let back = fermat_from_stationary(&sd).unwrap();
        for x in [[0.1, 0.2], [-1.5, 1.9], [1.0, -0.3]] {
            let (h1, w1) = r.fields_at(&x);
            let (h2, w2) = back.fields_at(&x);
            assert!(linalg::max_abs_diff(&h1, &h2) < 1e-12);
            assert!(linalg::max_abs(&linalg::sub(&w1, &w2)) < 1e-12);
        }
        let c = RandersData::new(euclidean(), Field::constant([0.5, 0.0]), plane());
        let sd = stationary_from_randers(&c).unwrap();
        assert_eq!(sd.g0.at(&[0.0, 0.0]), [[0.75, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn null_lift_is_null_and_oriented() {
        let sd = stationary_from_randers(&wavy()).unwrap();
        let x = [0.3, -0.4];
        let dx = [0.7, 0.2];
        let fermat = FinslerNorm::forward(fermat_from_stationary(&sd).unwrap());
        let fut = sd.null_lift(&x, &dx, TimeOrientation::Future);
        let past = sd.null_lift(&x, &dx, TimeOrientation::Past);
        assert!(sd.product(&x, &fut, &fut).abs() < 1e-14);
        assert!(sd.product(&x, &past, &past).abs() < 1e-14);
        assert!((fut.dt - fermat.eval(&x, &dx)).abs() < 1e-14);
        assert!((past.dt + fermat.reverse().eval(&x, &dx)).abs() < 1e-14);
        assert!(sd.killing_product(&x, &fut) < 0.0 && sd.killing_product(&x, &past) > 0.0);
    }

    #[test]
    fn minkowski_null_lines() {
        let sd = minkowski();
        let v = sd.null_lift(&[0.0, 0.0], &[0.6, 0.8], TimeOrientation::Future);
        let g = integrate_null_geodesic(&sd, &Event::new(0.0, [0.0, 0.0]), &v, TimeOrientation::Future, 1.0).unwrap();
        let last = g.events.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12 && (last.x.0[0] - 0.6).abs() < 1e-12);
        let bad = SpacetimeVector { dt: 2.0, dx: [0.6, 0.8] };
        assert!(matches!(
            integrate_null_geodesic(&sd, &Event::new(0.0, [0.0, 0.0]), &bad, TimeOrientation::Future, 1.0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            integrate_null_geodesic(&sd, &Event::new(0.0, [0.0, 0.0]), &v, TimeOrientation::Past, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn projection_matches_fermat_geodesics() {
        let sd = stationary_from_randers(&wavy()).unwrap();
        for orientation in [TimeOrientation::Future, TimeOrientation::Past] {
            let x = [0.1, -0.2];
            let v = sd.null_lift(&x, &[0.5, 0.3], orientation);
            let g = integrate_null_geodesic(&sd, &Event::new(0.0, x), &v, orientation, 1.5).unwrap();
            assert!(g.max_killing_drift < 1e-9, "{}", g.max_killing_drift);
            assert!(g.max_null_drift < 1e-9);
            assert!(g.min_time_margin > -1e-8);
            let rep = project_and_compare(&sd, &g).unwrap();
            assert!(rep.max_spatial_deviation < 1e-5 * rep.fermat_length.max(1.0), "{rep:?}");
            assert!(rep.max_time_deviation < 1e-7, "{rep:?}");
        }
    }

    #[test]
    fn arrival_time_is_fermat_length() {
        let r = wavy();
        let sd = stationary_from_randers(&r).unwrap();
        let c = SampledCurve::uniform(vec![[0.0, 0.0], [0.5, 0.7], [-0.4, 1.2]], 0.0, 1.0).unwrap();
        let lift = arrival_time(&sd, &c, 2.0).unwrap();
        let fl = curve_length(&FinslerNorm::forward(fermat_from_stationary(&sd).unwrap()), &c);
        assert!((lift.arrival() - 2.0 - fl).abs() < 1e-12);
        let seg = SampledCurve::segment([0.0, 0.0], [1.0, 0.0], 1);
        assert!((arrival_time(&minkowski(), &seg, 0.0).unwrap().arrival() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn section_checks() {
        let flat = RandersData::new(euclidean(), Field::constant([0.0, 0.0]), plane());
        let c = spacelike_section_check(&flat, &ScalarField::constant(2.0));
        assert!(c.is_spacelike && c.sup.abs() < 1e-15);
        let half = spacelike_section_check(&flat, &ScalarField::linear(0.0, [0.5, 0.0]));
        assert!(half.is_spacelike && (half.sup - 0.5).abs() < 1e-12);
        let one = spacelike_section_check(&flat, &ScalarField::linear(0.0, [1.0, 0.0]));
        assert!(!one.is_spacelike && one.margin.abs() < 1e-12);
        assert!(matches!(section_change(&flat, &ScalarField::linear(0.0, [1.0, 0.0])), Err(Error::NotSpacelike { .. })));
    }

    #[test]
    fn section_change_paths_agree() {
        let r = wavy();
        let f = ScalarField::with_gradient(
            |x: &[f64; 2]| 0.2 * x[0] * x[1] + 0.1 * x[0],
            |x: &[f64; 2]| [0.2 * x[1] + 0.1, 0.2 * x[0]],
        );
        let (rf, rep) = section_change_checked(&r, &f).unwrap();
        assert!(rep.max_h_difference < 1e-12 && rep.max_omega_difference < 1e-12, "{rep:?}");
        // exact-form telescoping of lengths
        let c = SampledCurve::uniform(vec![[0.0, 0.0], [0.5, 0.7], [-0.4, 1.2]], 0.0, 1.0).unwrap();
        let l = curve_length(&FinslerNorm::forward(r.clone()), &c);
        let lf = curve_length(&FinslerNorm::forward(rf), &c);
        let shift = f.at(&c.start()) - f.at(&c.end());
        assert!((lf - l - shift).abs() < 1e-12);
        let same = section_change(&r, &ScalarField::constant(1.0)).unwrap();
        assert_eq!(same.omega.at(&[0.3, 0.3]), r.omega.at(&[0.3, 0.3]));
    }

    #[test]
    fn chronological_future_minkowski_disk() {
        let sd = minkowski();
        let e0 = Event::new(0.0, [0.0, 0.0]);
        let m = chronological_future(&sd, &e0, 1.0).unwrap();
        for idx in 0..sd.chart.node_count() {
            let x = sd.chart.node_coords(idx);
            let r = linalg::norm(&x);
            if (r - 1.0).abs() > 0.05 {
                assert_eq!(m.inside[idx], r < 1.0, "at {x:?}");
            }
        }
        assert!(chronological_future(&sd, &e0, -0.5).unwrap().is_empty());
        assert!(in_chronological_future(&sd, &e0, &Event::new(1.0, [0.5, 0.5])).unwrap());
        assert!(!in_chronological_future(&sd, &e0, &Event::new(0.7, [0.5, 0.5])).unwrap());
    }
}
