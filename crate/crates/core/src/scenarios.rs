//! Metrics and regions of the shipped scenarios, in `f64`.

use crate::causality::RegionMask;
use crate::chart::Chart;
use crate::field::{euclidean, Field, MetricField, OneFormField, ScalarField};
use crate::finsler::RandersData;
use crate::stationary::StationaryData;

/// Names of the registered scenarios with one-line summaries.
pub const SCENARIOS: &[(&str, &str)] = &[
    ("flat", "Euclidean plane: straight geodesics and round balls"),
    ("constant-form", "Euclidean metric plus a constant one-form a dx"),
    ("strip-cylinder", "bump-form cylinder that is d-bounded but not compact"),
    ("hyperbola-section", "Minkowski plane split along a hyperbola: total Fermat length 2"),
    ("ds-cauchy-sequence", "non-converging sequence that is Cauchy for the symmetrized distance"),
    ("disk-cut-locus", "distance from the complement of the unit disk and its cut point"),
    ("two-disk-horizon", "horizon over the complement of two disks, crease on the bisector"),
    ("minkowski-development", "Cauchy development of an interval in 1+1 Minkowski space"),
];

/// `C^infinity` step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Flat plane `[-2, 2]^2`.
pub fn flat(resolution: usize) -> RandersData<f64, 2> {
    let chart = Chart::rectangle([(-2.0, 2.0), (-2.0, 2.0)], resolution).expect("valid chart");
    RandersData::new(euclidean(), Field::constant([0.0, 0.0]), chart)
}

/// Flat cylinder, `x` periodic on `[0, 2 pi)`, `y` in `[-2, 2]`.
pub fn flat_cylinder(resolution: usize) -> RandersData<f64, 2> {
    let chart = Chart::new([(0.0, std::f64::consts::TAU), (-2.0, 2.0)], [true, false], [resolution, resolution])
        .expect("valid chart");
    RandersData::new(euclidean(), Field::constant([0.0, 0.0]), chart)
}

/// `sqrt(dx^2 + dy^2) + a dx` on `[-2, 2]^2`.
pub fn constant_form(a: f64, resolution: usize) -> RandersData<f64, 2> {
    let chart = Chart::rectangle([(-2.0, 2.0), (-2.0, 2.0)], resolution).expect("valid chart");
    RandersData::new(euclidean(), Field::constant([a, 0.0]), chart)
}

/// Plateau geometry of the strip bumps: `mu_+ = 1` on `|x - centre| <= plateau`,
/// zero once `|x - centre| >= support`, and `mu_-` mirrored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripBumps {
    pub centre: f64,
    pub plateau: f64,
    pub support: f64,
    pub half_width: f64,
}

impl Default for StripBumps {
    fn default() -> Self {
        StripBumps { centre: 3.0, plateau: 1.0, support: 2.0, half_width: 6.0 }
    }
}

impl StripBumps {
    pub fn bump(&self, x: f64, centre: f64) -> f64 {
        let d = (x - centre).abs();
        smooth_step((self.support - d) / (self.support - self.plateau))
    }

    /// `mu_+(x) - mu_-(x)`.
    pub fn profile(&self, x: f64) -> f64 {
        self.bump(x, self.centre) - self.bump(x, -self.centre)
    }
}

/// Strip `[-6, 6) x [-Y, Y]` with `x` periodic, Euclidean `h` and
/// `omega = (mu_+ - mu_-)(x) y^2 / (1 + y^2) dy`.
pub fn strip_cylinder(resolution: [usize; 2], half_height: f64, bumps: StripBumps) -> RandersData<f64, 2> {
    let w = bumps.half_width;
    let chart = Chart::new([(-w, w), (-half_height, half_height)], [true, false], resolution).expect("valid chart");
    let omega: OneFormField<f64, 2> = Field::closed(move |x: &[f64; 2]| {
        let y2 = x[1] * x[1];
        [0.0, bumps.profile(x[0]) * y2 / (1.0 + y2)]
    });
    RandersData::new(euclidean(), omega, chart)
}

/// Hyperbola splitting of 1+1 Minkowski space on `[-theta_max, theta_max]`:
/// `beta = 1`, `g0 = 1`, `omega = -|sinh theta| dtheta`, so the Fermat metric is
/// `cosh theta |v| - |sinh theta| v`. The one-form is only continuous at 0.
pub fn hyperbola_stationary(theta_max: f64, resolution: usize) -> StationaryData<f64, 1> {
    let chart = Chart::new([(-theta_max, theta_max)], [false], [resolution]).expect("valid chart");
    let g0: MetricField<f64, 1> = Field::constant([[1.0]]);
    let omega: OneFormField<f64, 1> = Field::closed(|x: &[f64; 1]| [-x[0].sinh().abs()]);
    StationaryData::new(ScalarField::constant(1.0), g0, omega, chart).with_seam(0, 0.0)
}

/// The Fermat metric of [`hyperbola_stationary`] written directly.
pub fn hyperbola_section(theta_max: f64, resolution: usize) -> RandersData<f64, 1> {
    let chart = Chart::new([(-theta_max, theta_max)], [false], [resolution]).expect("valid chart");
    let h: MetricField<f64, 1> = Field::closed(|x: &[f64; 1]| [[x[0].cosh().powi(2)]]);
    let omega: OneFormField<f64, 1> = Field::closed(|x: &[f64; 1]| [-x[0].sinh().abs()]);
    RandersData::new(h, omega, chart).with_seam(0, 0.0)
}

/// Time function of the flat Minkowski slice in the hyperbola splitting:
/// `f = -(cosh theta - 1) sgn theta`, with `df = -|sinh theta| dtheta`.
pub fn hyperbola_flat_section() -> ScalarField<f64, 1> {
    ScalarField::with_gradient(
        |x: &[f64; 1]| -(x[0].cosh() - 1.0) * x[0].signum(),
        |x: &[f64; 1]| [-x[0].sinh().abs()],
    )
}

/// Arc-length table of `u -> (A sin(pi u), u)` on `[0, 1]`.
#[derive(Debug, Clone)]
struct ArcShape {
    amp: f64,
    s: Vec<f64>,
}

impl ArcShape {
    const SAMPLES: usize = 2048;

    fn speed(amp: f64, u: f64) -> f64 {
        let c = amp * std::f64::consts::PI * (std::f64::consts::PI * u).cos();
        (1.0 + c * c).sqrt()
    }

    fn length(amp: f64) -> f64 {
        // composite Simpson
        let n = Self::SAMPLES;
        let h = 1.0 / n as f64;
        let mut acc = Self::speed(amp, 0.0) + Self::speed(amp, 1.0);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * Self::speed(amp, k as f64 * h);
        }
        acc * h / 3.0
    }

    /// Amplitude giving total length `target`.
    fn with_length(target: f64) -> Self {
        let (mut lo, mut hi) = (0.0, 4.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if Self::length(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let amp = 0.5 * (lo + hi);
        let n = Self::SAMPLES;
        let mut s = vec![0.0; n + 1];
        for k in 0..n {
            let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            let m = 0.5 * (a + b);
            s[k + 1] = s[k] + (b - a) * (Self::speed(amp, a) + 4.0 * Self::speed(amp, m) + Self::speed(amp, b)) / 6.0;
        }
        ArcShape { amp, s }
    }

    /// Table value at the cell start plus Simpson over the rest of the cell,
    /// which keeps the result smooth in `u`.
    fn arclength(&self, u: f64) -> f64 {
        let n = Self::SAMPLES;
        let u = u.clamp(0.0, 1.0);
        let k = ((u * n as f64).floor() as usize).min(n - 1);
        let a = k as f64 / n as f64;
        let m = 0.5 * (a + u);
        self.s[k] + (u - a) * (Self::speed(self.amp, a) + 4.0 * Self::speed(self.amp, m) + Self::speed(self.amp, u)) / 6.0
    }
}

/// One arc `gamma_n` (`side = +1`) or its mirror (`side = -1`).
#[derive(Debug, Clone, Copy)]
struct ArcRef {
    n: usize,
    side: f64,
}

/// The sequence example: points `p_n = (0, n)`, arcs of length 2 from `p_n` to
/// `p_{n+1}` on both sides of the axis, and a one-form of Euclidean norm below 1
/// that is `-alpha_n mu_n` times the unit tangent on the right arcs and
/// `+alpha_n mu_n` times it on the mirrored ones.
#[derive(Clone)]
pub struct DsCauchy {
    pub data: RandersData<f64, 2>,
    /// `p_1, ..., p_{N+1}`.
    pub points: Vec<[f64; 2]>,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Amplitude `A` of the arcs `(A sin(pi u), n + u)`.
    pub amplitude: f64,
    /// Half-width of the tubes carrying the one-form.
    pub tube: f64,
}

impl std::fmt::Debug for DsCauchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DsCauchy").field("points", &self.points).field("amplitude", &self.amplitude).finish()
    }
}

struct DsForm {
    shape: ArcShape,
    count: usize,
    tube: f64,
    softness: f64,
}

impl DsForm {
    fn alpha(n: usize) -> f64 {
        1.0 - 2f64.powi(-(n as i32) - 3)
    }

    fn epsilon(n: usize) -> f64 {
        2f64.powi(-(n as i32) - 3)
    }

    fn point(&self, arc: ArcRef, u: f64) -> [f64; 2] {
        [arc.side * self.shape.amp * (std::f64::consts::PI * u).sin(), arc.n as f64 + u]
    }

    fn tangent(&self, arc: ArcRef, u: f64) -> [f64; 2] {
        let dx = arc.side * self.shape.amp * std::f64::consts::PI * (std::f64::consts::PI * u).cos();
        let n = (dx * dx + 1.0).sqrt();
        [dx / n, 1.0 / n]
    }

    /// Closest parameter and distance by a scan and Newton polish.
    fn project(&self, arc: ArcRef, x: &[f64; 2]) -> (f64, f64) {
        let d2 = |u: f64| {
            let p = self.point(arc, u);
            (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
        };
        let mut best = (0.0, d2(0.0));
        for k in 1..=32 {
            let u = k as f64 / 32.0;
            let v = d2(u);
            if v < best.1 {
                best = (u, v);
            }
        }
        let pi = std::f64::consts::PI;
        let a = arc.side * self.shape.amp;
        let mut u = best.0;
        for _ in 0..8 {
            let (s, c) = (pi * u).sin_cos();
            let px = a * s - x[0];
            let py = arc.n as f64 + u - x[1];
            let g = px * a * pi * c + py;
            let h = (a * pi * c).powi(2) + 1.0 - px * a * pi * pi * s;
            if h <= 0.0 {
                break;
            }
            u = (u - g / h).clamp(0.0, 1.0);
        }
        (u, d2(u).sqrt())
    }

    fn envelope(&self, d: f64) -> f64 {
        smooth_step((self.tube - d) / (0.5 * self.tube))
    }

    fn eval(&self, x: &[f64; 2]) -> [f64; 2] {
        let base = x[1].floor() as i64;
        let mut hits: Vec<(ArcRef, f64, f64)> = Vec::new();
        for n in (base - 1)..=(base + 1) {
            if n < 1 || n as usize > self.count {
                continue;
            }
            for side in [1.0, -1.0] {
                let arc = ArcRef { n: n as usize, side };
                let (u, d) = self.project(arc, x);
                if d < self.tube {
                    hits.push((arc, u, d));
                }
            }
        }
        // each arc enters with activity m = ramp * envelope, both in the
        // convex weights and in its own contribution, so inactive arcs drop out
        let terms: Vec<(f64, f64, [f64; 2])> = hits
            .iter()
            .map(|&(arc, u, d)| {
                let s = self.shape.arclength(u);
                let eps = Self::epsilon(arc.n);
                let m = smooth_step(s / eps) * smooth_step((2.0 - s) / eps) * self.envelope(d);
                let t = self.tangent(arc, u);
                let k = -arc.side * Self::alpha(arc.n);
                (m, d, [k * t[0], k * t[1]])
            })
            .filter(|t| t.0 > 0.0)
            .collect();
        if terms.is_empty() {
            return [0.0, 0.0];
        }
        let dmin = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = terms.iter().map(|t| t.0 * (-(t.1 - dmin) / self.softness).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut w = [0.0, 0.0];
        for ((m, _, v), wt) in terms.iter().zip(&weights) {
            w[0] += wt / total * m * v[0];
            w[1] += wt / total * m * v[1];
        }
        w
    }
}

/// The sequence scenario with `count` arcs on the chart `[-1.2, 1.2] x
/// [0.5, count + 1.5]`, square cells of side `spacing`.
pub fn ds_cauchy_sequence(count: usize, spacing: f64) -> DsCauchy {
    let shape = ArcShape::with_length(2.0);
    let amplitude = shape.amp;
    let tube = 0.1;
    let form = std::sync::Arc::new(DsForm { shape, count, tube, softness: 2e-3 });
    let top = count as f64 + 1.5;
    let rx = (2.4 / spacing).round() as usize + 1;
    let ry = ((top - 0.5) / spacing).round() as usize + 1;
    let chart = Chart::new([(-1.2, 1.2), (0.5, top)], [false, false], [rx, ry]).expect("valid chart");
    let f2 = std::sync::Arc::clone(&form);
    let omega: OneFormField<f64, 2> = Field::closed(move |x: &[f64; 2]| f2.eval(x));
    DsCauchy {
        data: RandersData::new(euclidean(), omega, chart),
        points: (1..=count + 1).map(|n| [0.0, n as f64]).collect(),
        alphas: (1..=count).map(DsForm::alpha).collect(),
        epsilons: (1..=count).map(DsForm::epsilon).collect(),
        amplitude,
        tube,
    }
}

/// Level function of the complement of the disk `|x - c| < r`: `r - |x - c|`.
pub fn outside_disk(centre: [f64; 2], radius: f64) -> ScalarField<f64, 2> {
    ScalarField::with_gradient(
        move |x: &[f64; 2]| radius - ((x[0] - centre[0]).powi(2) + (x[1] - centre[1]).powi(2)).sqrt(),
        move |x: &[f64; 2]| {
            let (dx, dy) = (x[0] - centre[0], x[1] - centre[1]);
            let r = (dx * dx + dy * dy).sqrt().max(1e-300);
            [-dx / r, -dy / r]
        },
    )
}

/// Flat chart `[-1.2, 1.2]^2` with `C` the complement of the open unit disk.
pub fn disk_cut_locus(resolution: usize) -> (RandersData<f64, 2>, RegionMask<f64, 2>) {
    let chart = Chart::rectangle([(-1.2, 1.2), (-1.2, 1.2)], resolution).expect("valid chart");
    let c = RegionMask::from_level(&chart, outside_disk([0.0, 0.0], 1.0));
    (RandersData::new(euclidean(), Field::constant([0.0, 0.0]), chart), c)
}

/// Radius and centres of the two disks.
pub const TWO_DISKS: (f64, [[f64; 2]; 2]) = (0.5, [[-1.0, 0.0], [1.0, 0.0]]);

/// Flat chart `[-2, 2] x [-1.5, 1.5]` with `C` the union of two closed disks.
pub fn two_disks(resolution: usize) -> (RandersData<f64, 2>, RegionMask<f64, 2>) {
    let ry = (resolution - 1) * 3 / 4 + 1;
    let chart = Chart::new([(-2.0, 2.0), (-1.5, 1.5)], [false, false], [resolution, ry]).expect("valid chart");
    let (r, [c1, c2]) = TWO_DISKS;
    let dist = move |x: &[f64; 2], c: [f64; 2]| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
    let phi = ScalarField::with_gradient(
        move |x: &[f64; 2]| dist(x, c1).min(dist(x, c2)) - r,
        move |x: &[f64; 2]| {
            let c = if dist(x, c1) <= dist(x, c2) { c1 } else { c2 };
            let d = dist(x, c).max(1e-300);
            [(x[0] - c[0]) / d, (x[1] - c[1]) / d]
        },
    );
    let c = RegionMask::from_level(&chart, phi);
    (RandersData::new(euclidean(), Field::constant([0.0, 0.0]), chart), c)
}

/// 1+1 Minkowski slice `[-1.5, 1.5]` (as the Randers data `h = 1`, `omega = 0`)
/// with the open interval `A = (a0, a1)`.
pub fn minkowski_development(resolution: usize, interval: (f64, f64)) -> (RandersData<f64, 1>, RegionMask<f64, 1>) {
    let chart = Chart::new([(-1.5, 1.5)], [false], [resolution]).expect("valid chart");
    let (a0, a1) = interval;
    let phi = ScalarField::with_gradient(
        move |y: &[f64; 1]| (a0 - y[0]).max(y[0] - a1),
        move |y: &[f64; 1]| if a0 - y[0] > y[0] - a1 { [-1.0] } else { [1.0] },
    );
    let a = RegionMask::open_from_level(&chart, phi);
    (RandersData::new(euclidean(), Field::constant([0.0]), chart), a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finsler::{curve_length, validate, FinslerNorm};
    use crate::curve::SampledCurve;

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn strip_bumps_plateaus() {
        let b = StripBumps::default();
        assert_eq!(b.profile(3.0), 1.0);
        assert_eq!(b.profile(3.9), 1.0);
        assert_eq!(b.profile(-2.5), -1.0);
        assert_eq!(b.profile(0.0), 0.0);
        assert_eq!(b.profile(5.5), 0.0);
        let r = strip_cylinder([25, 25], 6.0, b);
        assert!(validate(&r, 40).valid);
    }

    #[test]
    fn ds_cauchy_form_is_admissible() {
        let s = ds_cauchy_sequence(3, 0.05);
        assert!((ArcShape::length(s.amplitude) - 2.0).abs() < 1e-9);
        let rep = validate(&s.data, 60);
        assert!(rep.valid && rep.max_omega_norm < 1.0);
        // on the middle of gamma_1 the form is -alpha_1 times the tangent
        let form = DsForm { shape: ArcShape::with_length(2.0), count: 3, tube: 0.1, softness: 5e-4 };
        let arc = ArcRef { n: 1, side: 1.0 };
        let p = form.point(arc, 0.4);
        let t = form.tangent(arc, 0.4);
        let w = s.data.omega.at(&p);
        assert!((w[0] + DsForm::alpha(1) * t[0]).abs() < 1e-9 && (w[1] + DsForm::alpha(1) * t[1]).abs() < 1e-9);
        // the arc itself is a short path from p_1 to p_2
        let pts: Vec<[f64; 2]> = (0..=4000).map(|k| form.point(arc, k as f64 / 4000.0)).collect();
        let c = SampledCurve::uniform(pts, 0.0, 1.0).unwrap();
        let l = curve_length(&FinslerNorm::forward(s.data.clone()), &c);
        assert!(l < 0.5f64.powi(1), "{l}");
    }

    #[test]
    fn hyperbola_forms_agree() {
        let r = hyperbola_section(3.0, 61);
        let st = hyperbola_stationary(3.0, 61);
        let back = crate::stationary::fermat_from_stationary(&st).unwrap();
        for t in [-2.5, -0.3, 0.0, 0.7, 2.9] {
            let (h1, w1) = r.fields_at(&[t]);
            let (h2, w2) = back.fields_at(&[t]);
            assert!((h1[0][0] - h2[0][0]).abs() < 1e-12 * h1[0][0] && (w1[0] - w2[0]).abs() < 1e-12);
        }
    }
}
