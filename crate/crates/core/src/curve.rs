//! Parametrized polylines: the carrier for geodesics, projections and refined paths.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Polyline with a parameter value per node. When node velocities are present
/// the curve is interpolated by cubic Hermite segments, otherwise linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve<T, const D: usize> {
    pub params: Vec<T>,
    pub points: Vec<[T; D]>,
    pub velocities: Option<Vec<[T; D]>>,
}

/// Two-point Gauss-Legendre abscissae on `[0, 1]` and their weights.
pub(crate) fn gauss2<T: Real>() -> [(T, T); 2] {
    let off = T::lit(0.5 / 3f64.sqrt());
    let half = T::lit(0.5);
    [(half - off, half), (half + off, half)]
}

impl<T: Real, const D: usize> SampledCurve<T, D> {
    pub fn new(params: Vec<T>, points: Vec<[T; D]>) -> Result<Self> {
        Self::validate(&params, points.len())?;
        Ok(SampledCurve { params, points, velocities: None })
    }

    pub fn with_velocities(params: Vec<T>, points: Vec<[T; D]>, velocities: Vec<[T; D]>) -> Result<Self> {
        Self::validate(&params, points.len())?;
        if velocities.len() != points.len() {
            return Err(Error::Precondition("velocity count differs from point count".into()));
        }
        Ok(SampledCurve { params, points, velocities: Some(velocities) })
    }

    fn validate(params: &[T], n: usize) -> Result<()> {
        if params.is_empty() || params.len() != n {
            return Err(Error::Precondition("curve needs matching, nonempty params and points".into()));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("curve parameters must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Polyline through `points` with parameters evenly spaced on `[a, b]`.
    pub fn uniform(points: Vec<[T; D]>, a: T, b: T) -> Result<Self> {
        let n = points.len();
        let params = if n == 1 {
            vec![a]
        } else {
            (0..n).map(|i| a + (b - a) * T::from_count(i) / T::from_count(n - 1)).collect()
        };
        Self::new(params, points)
    }

    /// Constant curve at one point.
    pub fn constant(p: [T; D]) -> Self {
        SampledCurve { params: vec![T::zero()], points: vec![p], velocities: Some(vec![[T::zero(); D]]) }
    }

    /// Straight segment `a -> b` sampled with `n` segments on parameter `[0, 1]`.
    pub fn segment(a: [T; D], b: [T; D], n: usize) -> Self {
        let pts = (0..=n).map(|i| linalg::lerp(&a, &b, T::from_count(i) / T::from_count(n))).collect();
        Self::uniform(pts, T::zero(), T::one()).expect("valid segment")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> [T; D] {
        self.points[0]
    }

    pub fn end(&self) -> [T; D] {
        *self.points.last().expect("nonempty curve")
    }

    pub fn param_range(&self) -> (T, T) {
        (self.params[0], *self.params.last().unwrap())
    }

    /// Same image traversed backwards; parameter `s` maps to `a + b - s`.
    pub fn reversed(&self) -> Self {
        let (a, b) = self.param_range();
        let params = self.params.iter().rev().map(|&s| a + b - s).collect();
        let points = self.points.iter().rev().copied().collect();
        let velocities = self
            .velocities
            .as_ref()
            .map(|v| v.iter().rev().map(|u| linalg::scale(u, -T::one())).collect());
        SampledCurve { params, points, velocities }
    }

    /// Position and derivative on segment `i` at local fraction `u` in `[0, 1]`.
    pub fn segment_eval(&self, i: usize, u: T) -> ([T; D], [T; D]) {
        let ds = self.params[i + 1] - self.params[i];
        let p0 = &self.points[i];
        let p1 = &self.points[i + 1];
        match &self.velocities {
            None => (linalg::lerp(p0, p1, u), linalg::scale(&linalg::sub(p1, p0), T::one() / ds)),
            Some(v) => {
                let m0 = linalg::scale(&v[i], ds);
                let m1 = linalg::scale(&v[i + 1], ds);
                let (two, three, six, four) = (T::lit(2.0), T::lit(3.0), T::lit(6.0), T::lit(4.0));
                let u2 = u * u;
                let u3 = u2 * u;
                let h00 = two * u3 - three * u2 + T::one();
                let h10 = u3 - two * u2 + u;
                let h01 = -two * u3 + three * u2;
                let h11 = u3 - u2;
                let d00 = six * u2 - six * u;
                let d10 = three * u2 - four * u + T::one();
                let d01 = -six * u2 + six * u;
                let d11 = three * u2 - two * u;
                let pos = std::array::from_fn(|k| h00 * p0[k] + h10 * m0[k] + h01 * p1[k] + h11 * m1[k]);
                let vel = std::array::from_fn(|k| (d00 * p0[k] + d10 * m0[k] + d01 * p1[k] + d11 * m1[k]) / ds);
                (pos, vel)
            }
        }
    }

    /// Segment index containing parameter `s` (clamped to the curve range).
    fn locate(&self, s: T) -> (usize, T) {
        let n = self.params.len();
        if n == 1 {
            return (0, T::zero());
        }
        let s = s.max(self.params[0]).min(self.params[n - 1]);
        let i = match self.params.binary_search_by(|p| p.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let u = (s - self.params[i]) / (self.params[i + 1] - self.params[i]);
        (i, u)
    }

    /// Interpolated position at parameter `s`.
    pub fn at(&self, s: T) -> [T; D] {
        if self.points.len() == 1 {
            return self.points[0];
        }
        let (i, u) = self.locate(s);
        self.segment_eval(i, u).0
    }

    /// Interpolated velocity at parameter `s`.
    pub fn velocity_at(&self, s: T) -> [T; D] {
        if self.points.len() == 1 {
            return [T::zero(); D];
        }
        let (i, u) = self.locate(s);
        self.segment_eval(i, u).1
    }

    /// Resamples at `n + 1` evenly spaced parameters.
    pub fn resample(&self, n: usize) -> Self {
        let (a, b) = self.param_range();
        if self.points.len() == 1 || n == 0 {
            return self.clone();
        }
        let params: Vec<T> = (0..=n).map(|i| a + (b - a) * T::from_count(i) / T::from_count(n)).collect();
        let points = params.iter().map(|&s| self.at(s)).collect();
        let velocities = self.velocities.as_ref().map(|_| params.iter().map(|&s| self.velocity_at(s)).collect());
        SampledCurve { params, points, velocities }
    }

    /// Euclidean (coordinate) length of the interpolated curve.
    pub fn coordinate_length(&self) -> T {
        let mut total = T::zero();
        for i in 0..self.points.len().saturating_sub(1) {
            let ds = self.params[i + 1] - self.params[i];
            for (u, w) in gauss2::<T>() {
                let (_, v) = self.segment_eval(i, u);
                total = total + w * ds * linalg::norm(&v);
            }
        }
        total
    }
}

fn point_segment_distance<T: Real, const D: usize>(p: &[T; D], a: &[T; D], b: &[T; D]) -> T {
    let ab = linalg::sub(b, a);
    let len2 = linalg::dot(&ab, &ab);
    if len2 == T::zero() {
        return linalg::dist(p, a);
    }
    let t = (linalg::dot(&linalg::sub(p, a), &ab) / len2).max(T::zero()).min(T::one());
    linalg::dist(p, &linalg::axpy(a, t, &ab))
}

fn directed_hausdorff<T: Real, const D: usize>(a: &[[T; D]], b: &[[T; D]]) -> T {
    let mut worst = T::zero();
    for p in a {
        let d = if b.len() == 1 {
            linalg::dist(p, &b[0])
        } else {
            b.windows(2)
                .map(|w| point_segment_distance(p, &w[0], &w[1]))
                .fold(T::infinity(), T::min)
        };
        worst = worst.max(d);
    }
    worst
}

/// Hausdorff distance between the images of two curves (coordinate metric),
/// each densified to `samples` points and compared against the other polyline.
pub fn hausdorff<T: Real, const D: usize>(a: &SampledCurve<T, D>, b: &SampledCurve<T, D>, samples: usize) -> T {
    let da = a.resample(samples);
    let db = b.resample(samples);
    directed_hausdorff(&da.points, &db.points).max(directed_hausdorff(&db.points, &da.points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        assert!(SampledCurve::<f64, 1>::new(vec![0.0, 0.0], vec![[0.0], [1.0]]).is_err());
        assert!(SampledCurve::<f64, 1>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn hermite_reproduces_cubic() {
        // x(s) = s^3 - s on [0, 2] with exact derivatives
        let f = |s: f64| s * s * s - s;
        let df = |s: f64| 3.0 * s * s - 1.0;
        let params = vec![0.0, 0.5, 2.0];
        let c = SampledCurve::with_velocities(
            params.clone(),
            params.iter().map(|&s| [f(s)]).collect(),
            params.iter().map(|&s| [df(s)]).collect(),
        )
        .unwrap();
        for s in [0.1, 0.77, 1.3, 1.99] {
            assert!((c.at(s)[0] - f(s)).abs() < 1e-12);
            assert!((c.velocity_at(s)[0] - df(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn reversal_maps_parameters() {
        let c = SampledCurve::<f64, 2>::segment([0.0, 0.0], [2.0, 1.0], 4);
        let r = c.reversed();
        assert_eq!(r.start(), c.end());
        assert!((r.at(0.25)[0] - c.at(0.75)[0]).abs() < 1e-14);
        assert!((c.coordinate_length() - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_of_parallel_segments() {
        let a = SampledCurve::<f64, 2>::segment([0.0, 0.0], [1.0, 0.0], 3);
        let b = SampledCurve::segment([0.0, 0.1], [1.0, 0.1], 7);
        assert!((hausdorff(&a, &b, 50) - 0.1).abs() < 1e-12);
        assert!(hausdorff(&a, &a.reversed(), 50) < 1e-12);
    }
}
