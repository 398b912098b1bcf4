//! Geodesics of a Finsler norm: initial-value integration, exponential maps and
//! a restarted shooting method for two-point problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chart::{Point, TangentVector};
use crate::curve::{hausdorff, SampledCurve};
use crate::distance;
use crate::error::{Error, Result};
use crate::finsler::{curve_length, FinslerNorm};
use crate::linalg;
use crate::ode::{dormand_prince, OdeOptions, StepControl};
use crate::scalar::Real;

/// Why an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicStatus {
    Completed,
    /// Left the chart across a non-periodic face; the curve ends on that face.
    Escaped,
    /// Reached a hyperplane where the metric is only continuous.
    Seam,
}

/// An affinely parametrized geodesic.
#[derive(Debug, Clone)]
pub struct GeodesicSolution<T, const D: usize> {
    /// Unwrapped coordinates with Hermite velocities.
    pub curve: SampledCurve<T, D>,
    pub initial_velocity: TangentVector<T, D>,
    pub length: T,
    /// `F(gamma')` at the start.
    pub speed: T,
    pub converged: bool,
    /// Endpoint miss for boundary-value solutions, zero for initial-value ones.
    pub residual: T,
    pub status: GeodesicStatus,
    /// Largest relative drift of `F(gamma')` from `speed` accumulated over a
    /// single step, measured before the speed is restored.
    pub max_speed_deviation: T,
}

impl<T: Real, const D: usize> GeodesicSolution<T, D> {
    pub fn endpoint(&self) -> [T; D] {
        self.curve.end()
    }

    fn constant(p: [T; D]) -> Self {
        GeodesicSolution {
            curve: SampledCurve::constant(p),
            initial_velocity: TangentVector::new(Point(p), [T::zero(); D]),
            length: T::zero(),
            speed: T::zero(),
            converged: true,
            residual: T::zero(),
            status: GeodesicStatus::Completed,
            max_speed_deviation: T::zero(),
        }
    }
}

/// Integration settings for [`geodesic_ivp_with`].
#[derive(Debug, Clone, Copy)]
pub struct GeodesicOptions<T> {
    pub tol: T,
    /// Cap on the step in the affine parameter; small caps sharpen dense output.
    pub max_step: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> GeodesicOptions<T> {
    pub fn new(tol: T) -> Self {
        GeodesicOptions { tol, max_step: None, max_steps: 100_000 }
    }

    pub fn with_max_step(mut self, h: T) -> Self {
        self.max_step = Some(h);
        self
    }
}

/// Fourth-order central difference of `f` at zero with step `e`.
#[inline]
fn d4<T: Real, const N: usize>(f: impl Fn(T) -> [T; N], e: T) -> [T; N] {
    let (p1, m1, p2, m2) = (f(e), f(-e), f(e + e), f(-e - e));
    let eight = T::lit(8.0);
    let den = T::lit(12.0) * e;
    std::array::from_fn(|k| (eight * (p1[k] - m1[k]) - (p2[k] - m2[k])) / den)
}

/// Side of a base-direction stencil of step `h` at `x` along `axis`: 0 when no
/// seam lies within `2h`, otherwise the side of the seam holding `x` (`hint`
/// breaks the tie when `x` sits on it).
pub(crate) fn stencil_side<T: Real>(seams: &[(usize, T)], axis: usize, x: T, h: T, hint: T) -> i8 {
    for (a, v) in seams {
        if *a != axis || (x - *v).abs() > h + h {
            continue;
        }
        let d = if x == *v { hint } else { x - *v };
        return if d < T::zero() { -1 } else { 1 };
    }
    0
}

/// Derivative at zero of `f` with step `e`: central fourth order for `side = 0`,
/// one-sided fourth order into `sign(side)` otherwise.
#[inline]
pub(crate) fn d4_sided<T: Real, const N: usize>(f: impl Fn(T) -> [T; N], e: T, side: i8) -> [T; N] {
    if side == 0 {
        return d4(f, e);
    }
    let h = if side > 0 { e } else { -e };
    let v: [[T; N]; 5] = std::array::from_fn(|k| f(T::from_count(k) * h));
    let c = [-25.0, 48.0, -36.0, 16.0, -3.0].map(T::lit);
    let den = T::lit(12.0) * h;
    std::array::from_fn(|k| (0..5).fold(T::zero(), |acc, j| acc + c[j] * v[j][k]) / den)
}

/// Fiber gradient `P = d(F^2/2)/dy` by fourth-order differences.
fn fiber_momentum<T: Real, const D: usize>(f: &FinslerNorm<T, D>, x: &[T; D], y: &[T; D], e: T) -> [T; D] {
    std::array::from_fn(|i| {
        d4(
            |s| {
                let mut u = *y;
                u[i] = u[i] + s;
                [f.lagrangian(x, &u)]
            },
            e,
        )[0]
    })
}

/// Second derivative `x''` of the constant-speed geodesic through `(x, y)`.
///
/// The Euler-Lagrange equations of `L = F^2 / 2` read `g x'' = dL/dx - (d^2L/dx dy) y`
/// with `g` the fundamental tensor. All derivatives are finite differences of `F`
/// itself. The result is corrected along `y` so that `dL/ds` vanishes exactly,
/// which keeps the speed constant up to the integrator error.
pub fn geodesic_acceleration<T: Real, const D: usize>(f: &FinslerNorm<T, D>, x: &[T; D], y: &[T; D]) -> Result<[T; D]> {
    let ny = linalg::norm(y);
    if ny == T::zero() {
        return Err(Error::ZeroVector);
    }
    let chart = f.chart();
    let ef = T::lit(1e-3) * ny;
    let mut g = [[T::zero(); D]; D];
    for j in 0..D {
        let col = d4(
            |s| {
                let mut u = *y;
                u[j] = u[j] + s;
                fiber_momentum(f, x, &u, ef)
            },
            ef,
        );
        for i in 0..D {
            g[i][j] = col[i];
        }
    }
    for i in 0..D {
        for j in 0..i {
            let m = T::lit(0.5) * (g[i][j] + g[j][i]);
            g[i][j] = m;
            g[j][i] = m;
        }
    }
    let mut dl = [T::zero(); D];
    let mut mixed_y = [T::zero(); D];
    for a in 0..D {
        let hx = chart.fd_step(a);
        let side = stencil_side(&f.data().seams, a, x[a], hx, y[a]);
        dl[a] = d4_sided(
            |s| {
                let mut z = *x;
                z[a] = z[a] + s;
                [f.lagrangian(&z, y)]
            },
            hx,
            side,
        )[0];
        let dp = d4_sided(
            |s| {
                let mut z = *x;
                z[a] = z[a] + s;
                fiber_momentum(f, &z, y, ef)
            },
            hx,
            side,
        );
        for i in 0..D {
            mixed_y[i] = mixed_y[i] + dp[i] * y[a];
        }
    }
    let rhs = linalg::sub(&dl, &mixed_y);
    let acc = linalg::solve(&g, &rhs).ok_or_else(|| Error::InvalidData {
        point: x.iter().map(|c| c.to_f64_lossy()).collect(),
        reason: "singular fundamental tensor".into(),
    })?;
    // dL/ds = dL/dx . y + P . x''; remove the component along y (g^{-1} P = y)
    let p = fiber_momentum(f, x, y, ef);
    let two_l = linalg::dot(&p, y);
    let c = (linalg::dot(&dl, y) + linalg::dot(&p, &acc)) / two_l;
    Ok(linalg::axpy(&acc, -c, y))
}

/// First coordinate crossing of a hyperplane or face between two accepted nodes.
struct Crossing {
    axis: usize,
    level: usize,
}

#[allow(clippy::too_many_arguments)]
fn bisect_crossing<T: Real>(
    t0: T,
    s0: &[T],
    d0: &[T],
    t1: T,
    s1: &[T],
    d1: &[T],
    axis: usize,
    value: T,
) -> (T, Vec<T>) {
    let side0 = s0[axis] - value;
    let (mut a, mut b) = (t0, t1);
    for _ in 0..80 {
        let m = T::lit(0.5) * (a + b);
        let mid = crate::ode::hermite(t0, s0, d0, t1, s1, d1, m);
        if (mid[axis] - value) * side0 > T::zero() {
            a = m;
        } else {
            b = m;
        }
    }
    (b, crate::ode::hermite(t0, s0, d0, t1, s1, d1, b))
}

/// Integrates the geodesic with `gamma(0) = p`, `gamma'(0) = v` over `[0, t_max]`.
pub fn geodesic_ivp<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    v: &[T; D],
    t_max: T,
    tol: T,
) -> Result<GeodesicSolution<T, D>> {
    geodesic_ivp_with(f, p, v, t_max, &GeodesicOptions::new(tol))
}

pub fn geodesic_ivp_with<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    v: &[T; D],
    t_max: T,
    opts: &GeodesicOptions<T>,
) -> Result<GeodesicSolution<T, D>> {
    let start = f.chart().normalize(p)?;
    if v.iter().all(|c| *c == T::zero()) {
        return Err(Error::ZeroVector);
    }
    if !(t_max > T::zero()) {
        return Err(Error::Precondition("t_max must be positive".into()));
    }
    let speed = f.eval(&start.0, v);
    let chart = f.chart().clone();
    let seams = f.data().seams.clone();
    let mut y0 = Vec::with_capacity(2 * D);
    y0.extend_from_slice(&start.0);
    y0.extend_from_slice(v);

    let mut rhs = |_t: T, s: &[T], ds: &mut [T]| -> std::result::Result<(), String> {
        let x: [T; D] = std::array::from_fn(|i| s[i]);
        let y: [T; D] = std::array::from_fn(|i| s[D + i]);
        let a = geodesic_acceleration(f, &x, &y).map_err(|e| e.to_string())?;
        ds[..D].copy_from_slice(&y);
        ds[D..].copy_from_slice(&a);
        Ok(())
    };

    let mut prev_x = start.0;
    let mut crossing: Option<Crossing> = None;
    let mut drift = T::zero();
    let mut hook = |_t: T, s: &mut Vec<T>| {
        let x: [T; D] = std::array::from_fn(|i| s[i]);
        for a in 0..D {
            if !chart.is_periodic(a) && (x[a] < chart.lower(a) || x[a] > chart.upper(a)) {
                crossing = Some(Crossing { axis: a, level: usize::MAX });
                return StepControl::Stop;
            }
        }
        for (k, (axis, value)) in seams.iter().enumerate() {
            let before = prev_x[*axis] - *value;
            let after = x[*axis] - *value;
            if before * after < T::zero() {
                crossing = Some(Crossing { axis: *axis, level: k });
                return StepControl::Stop;
            }
        }
        // restore F(y) = speed; exact because F is positively homogeneous in y
        let y: [T; D] = std::array::from_fn(|i| s[D + i]);
        let now = f.eval(&x, &y);
        let step_drift = (now - speed).abs() / speed;
        if step_drift > opts.tol {
            return StepControl::Reject;
        }
        prev_x = x;
        drift = drift.max(step_drift);
        if now > T::zero() {
            let r = speed / now;
            for i in 0..D {
                s[D + i] = s[D + i] * r;
            }
            StepControl::Modified
        } else {
            StepControl::Continue
        }
    };

    let mut ode = OdeOptions::new(opts.tol);
    ode.max_steps = opts.max_steps;
    ode.h_max = Some(opts.max_step.unwrap_or(t_max / T::lit(32.0)));
    let mut traj = dormand_prince(&mut rhs, T::zero(), t_max, &y0, &ode, &mut hook)?;

    let mut status = GeodesicStatus::Completed;
    if let Some(c) = crossing {
        let n = traj.ts.len();
        let (axis, value) = if c.level == usize::MAX {
            let last = traj.ys[n - 1][c.axis];
            let bound = if last < chart.lower(c.axis) { chart.lower(c.axis) } else { chart.upper(c.axis) };
            status = GeodesicStatus::Escaped;
            (c.axis, bound)
        } else {
            status = GeodesicStatus::Seam;
            seams[c.level]
        };
        let (t_hit, mut state) = bisect_crossing(
            traj.ts[n - 2],
            &traj.ys[n - 2],
            &traj.dys[n - 2],
            traj.ts[n - 1],
            &traj.ys[n - 1],
            &traj.dys[n - 1],
            axis,
            value,
        );
        let xh: [T; D] = std::array::from_fn(|i| state[i]);
        let yh: [T; D] = std::array::from_fn(|i| state[D + i]);
        let now = f.eval(&xh, &yh);
        if now > T::zero() {
            for c in &mut state[D..] {
                *c = *c * speed / now;
            }
        }
        traj.ts.pop();
        traj.ys.pop();
        traj.dys.pop();
        if t_hit > *traj.ts.last().unwrap() {
            traj.ts.push(t_hit);
            traj.ys.push(state);
            traj.dys.push(vec![T::zero(); 2 * D]);
        }
    }

    let points: Vec<[T; D]> = traj.ys.iter().map(|s| std::array::from_fn(|i| s[i])).collect();
    let vels: Vec<[T; D]> = traj.ys.iter().map(|s| std::array::from_fn(|i| s[D + i])).collect();
    let mut max_dev = drift;
    for (x, y) in points.iter().zip(&vels) {
        max_dev = max_dev.max((f.eval(x, y) - speed).abs() / speed);
    }
    let curve = SampledCurve::with_velocities(traj.ts.clone(), points, vels)?;
    let length = speed * (*traj.ts.last().unwrap());
    Ok(GeodesicSolution {
        curve,
        initial_velocity: TangentVector::new(start, *v),
        length,
        speed,
        converged: status == GeodesicStatus::Completed,
        residual: T::zero(),
        status,
        max_speed_deviation: max_dev,
    })
}

/// `exp_p(v)`: the point reached at parameter one.
pub fn exp_map<T: Real, const D: usize>(f: &FinslerNorm<T, D>, p: &Point<T, D>, v: &[T; D]) -> Result<Point<T, D>> {
    let start = f.chart().normalize(p)?;
    if v.iter().all(|c| *c == T::zero()) {
        return Ok(start);
    }
    let sol = geodesic_ivp(f, &start, v, T::one(), T::lit(1e-9))?;
    if sol.status != GeodesicStatus::Completed {
        return Err(Error::OutOfDomain { point: Point(sol.endpoint()).to_f64_vec() });
    }
    f.chart().normalize(&Point(sol.endpoint()))
}

/// Exponential map of the reverse norm.
pub fn reverse_exp_map<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    v: &[T; D],
) -> Result<Point<T, D>> {
    exp_map(&f.reverse(), p, v)
}

/// Targets `q + k * period` over the periodic axes, `k` in `{-1, 0, 1}` around
/// the nearest image.
fn periodic_images<T: Real, const D: usize>(f: &FinslerNorm<T, D>, p: &[T; D], q: &[T; D]) -> Vec<[T; D]> {
    let chart = f.chart();
    let nearest = linalg::add(p, &chart.displacement(p, q));
    let mut out = vec![nearest];
    for a in 0..D {
        if !chart.is_periodic(a) {
            continue;
        }
        let len = chart.extent(a);
        let current = out.clone();
        for base in current {
            for k in [-1.0, 1.0] {
                let mut t = base;
                t[a] = t[a] + T::lit(k) * len;
                out.push(t);
            }
        }
    }
    out
}

pub(crate) fn shoot_once<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &[T; D],
    target: &[T; D],
    v0: [T; D],
    tol: T,
) -> Option<GeodesicSolution<T, D>> {
    let ode_tol = (tol * T::lit(1e-2)).max(T::lit(1e-11)).min(T::lit(1e-9));
    let opts = GeodesicOptions::new(ode_tol);
    let run = |v: &[T; D]| -> Option<([T; D], GeodesicSolution<T, D>)> {
        let sol = geodesic_ivp_with(f, &Point(*p), v, T::one(), &opts).ok()?;
        if sol.status != GeodesicStatus::Completed {
            return None;
        }
        Some((linalg::sub(&sol.endpoint(), target), sol))
    };
    let mut v = v0;
    let (mut r, mut sol) = run(&v)?;
    let mut rn = linalg::norm(&r);
    for _ in 0..40 {
        if rn < tol {
            sol.residual = rn;
            sol.converged = true;
            return Some(sol);
        }
        let dv = T::lit(1e-6) * (linalg::norm(&v) + T::lit(1e-3));
        let mut jac = [[T::zero(); D]; D];
        for j in 0..D {
            let mut vp = v;
            vp[j] = vp[j] + dv;
            let (rp, _) = run(&vp)?;
            for i in 0..D {
                jac[i][j] = (rp[i] - r[i]) / dv;
            }
        }
        let step = linalg::solve(&jac, &linalg::scale(&r, -T::one()))?;
        let mut lam = T::one();
        let mut improved = false;
        for _ in 0..12 {
            let trial = linalg::axpy(&v, lam, &step);
            if let Some((rt, st)) = run(&trial) {
                let tn = linalg::norm(&rt);
                if tn < rn {
                    v = trial;
                    r = rt;
                    rn = tn;
                    sol = st;
                    improved = true;
                    break;
                }
            }
            lam = lam * T::lit(0.5);
        }
        if !improved {
            return None;
        }
    }
    if rn < tol {
        sol.residual = rn;
        Some(sol)
    } else {
        None
    }
}

/// Geodesics from `p` to `q` found by damped Newton shooting on the initial
/// velocity over the parameter interval `[0, 1]`.
///
/// Seeds: the tangent of the refined grid-distance path, straight chords to each
/// periodic image of `q`, and `restarts` random directions from a fixed-seed
/// generator. Solutions whose images are within `1e-3` of the chart extent in
/// Hausdorff distance are merged; the rest are sorted by length and then by
/// initial direction.
pub fn shoot_connect<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
    tol: T,
    restarts: usize,
) -> Result<Vec<GeodesicSolution<T, D>>> {
    shoot_connect_seeded(f, p, q, tol, restarts, &[])
}

/// Like [`shoot_connect`] with extra caller-supplied initial velocities.
pub fn shoot_connect_seeded<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
    tol: T,
    restarts: usize,
    extra_seeds: &[[T; D]],
) -> Result<Vec<GeodesicSolution<T, D>>> {
    let chart = f.chart();
    let a = chart.normalize(p)?.0;
    let b = chart.normalize(q)?.0;
    if linalg::norm(&chart.displacement(&a, &b)) == T::zero() {
        return Ok(vec![GeodesicSolution::constant(a)]);
    }
    let images = periodic_images(f, &a, &b);
    let mut seeds: Vec<([T; D], [T; D])> = Vec::new();
    for v in extra_seeds {
        let guess = linalg::add(&a, v);
        let target = *images
            .iter()
            .min_by(|s, t| linalg::dist(s, &guess).partial_cmp(&linalg::dist(t, &guess)).unwrap())
            .unwrap();
        seeds.push((target, *v));
    }
    if let Ok(path) = distance::refined_path(f, &Point(a), &Point(b)) {
        let c = &path.curve;
        if c.len() >= 2 {
            let m = T::from_count(c.len() - 1);
            let v = linalg::scale(&linalg::sub(&c.points[1], &c.points[0]), m);
            let end = c.end();
            let target = *images
                .iter()
                .min_by(|s, t| linalg::dist(s, &end).partial_cmp(&linalg::dist(t, &end)).unwrap())
                .unwrap();
            seeds.push((target, v));
        }
    }
    for t in &images {
        seeds.push((*t, linalg::sub(t, &a)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for k in 0..restarts {
        let t = images[k % images.len()];
        let scale = linalg::dist(&t, &a) * T::lit(rng.gen_range(0.6..1.4));
        let dir: [T; D] = std::array::from_fn(|_| T::lit(rng.gen_range(-1.0..1.0)));
        let n = linalg::norm(&dir);
        if n > T::lit(1e-6) {
            seeds.push((t, linalg::scale(&dir, scale / n)));
        }
    }

    let found: Vec<GeodesicSolution<T, D>> =
        seeds.par_iter().filter_map(|(t, v)| shoot_once(f, &a, t, *v, tol)).collect();

    let mut sorted = found;
    sorted.sort_by(|s, t| {
        s.length
            .partial_cmp(&t.length)
            .unwrap()
            .then_with(|| direction_key(s).partial_cmp(&direction_key(t)).unwrap())
    });
    let threshold = T::lit(1e-3) * chart.max_extent();
    let mut distinct: Vec<GeodesicSolution<T, D>> = Vec::new();
    for s in sorted {
        if distinct.iter().all(|d| hausdorff(&d.curve, &s.curve, 64) > threshold) {
            distinct.push(s);
        }
    }
    Ok(distinct)
}

fn direction_key<T: Real, const D: usize>(s: &GeodesicSolution<T, D>) -> Vec<T> {
    let v = &s.initial_velocity.components;
    let n = linalg::norm(v);
    v.iter().map(|c| if n > T::zero() { *c / n } else { *c }).collect()
}

/// Re-evaluates the length of a solution by quadrature (a check on `speed * t`).
pub fn quadrature_length<T: Real, const D: usize>(f: &FinslerNorm<T, D>, s: &GeodesicSolution<T, D>) -> T {
    curve_length(f, &s.curve)
}
