//! Rectangular coordinate charts with optional periodic identifications, and the
//! regular node grid every sweep runs on.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Real;

/// A point in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T, const D: usize>(pub [T; D]);

impl<T: Real, const D: usize> Point<T, D> {
    pub fn new(coords: [T; D]) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[T; D] {
        &self.0
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.to_f64_lossy()).collect()
    }
}

impl<T, const D: usize> From<[T; D]> for Point<T, D> {
    fn from(c: [T; D]) -> Self {
        Point(c)
    }
}

/// Tangent vector with its base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector<T, const D: usize> {
    pub base: Point<T, D>,
    pub components: Vector<T, D>,
}

impl<T: Real, const D: usize> TangentVector<T, D> {
    pub fn new(base: Point<T, D>, components: [T; D]) -> Self {
        TangentVector { base, components }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| *c == T::zero())
    }

    pub fn scaled(&self, s: T) -> Self {
        TangentVector { base: self.base, components: crate::linalg::scale(&self.components, s) }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-T::one())
    }
}

/// Covector (one-form value) with its base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covector<T, const D: usize> {
    pub base: Point<T, D>,
    pub components: Vector<T, D>,
}

impl<T: Real, const D: usize> Covector<T, D> {
    pub fn apply(&self, v: &[T; D]) -> T {
        crate::linalg::dot(&self.components, v)
    }
}

/// Coordinate patch `[lo_0, hi_0] x ... x [lo_{D-1}, hi_{D-1}]`.
///
/// A periodic axis identifies `lo` with `hi`; its grid holds `resolution` nodes
/// without the duplicated endpoint. A non-periodic axis holds `resolution` nodes
/// including both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart<T, const D: usize> {
    lower: [T; D],
    upper: [T; D],
    periodic: [bool; D],
    resolution: [usize; D],
}

impl<T: Real, const D: usize> Chart<T, D> {
    pub fn new(bounds: [(T, T); D], periodic: [bool; D], resolution: [usize; D]) -> Result<Self> {
        for (axis, (lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && *lo < *hi) {
                return Err(Error::InvalidChart(format!(
                    "axis {axis}: bounds [{lo}, {hi}] are degenerate"
                )));
            }
            if resolution[axis] < 2 {
                return Err(Error::InvalidChart(format!("axis {axis}: resolution must be at least 2")));
            }
        }
        Ok(Chart {
            lower: std::array::from_fn(|i| bounds[i].0),
            upper: std::array::from_fn(|i| bounds[i].1),
            periodic,
            resolution,
        })
    }

    /// Non-periodic box with the same resolution on every axis.
    pub fn rectangle(bounds: [(T, T); D], resolution: usize) -> Result<Self> {
        Self::new(bounds, [false; D], [resolution; D])
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn lower(&self, axis: usize) -> T {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> T {
        self.upper[axis]
    }

    pub fn bounds(&self) -> [(T, T); D] {
        std::array::from_fn(|i| (self.lower[i], self.upper[i]))
    }

    pub fn extent(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    pub fn max_extent(&self) -> T {
        (0..D).map(|a| self.extent(a)).fold(T::zero(), T::max)
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }

    pub fn periodic(&self) -> [bool; D] {
        self.periodic
    }

    pub fn resolution(&self) -> [usize; D] {
        self.resolution
    }

    pub fn with_resolution(&self, resolution: [usize; D]) -> Result<Self> {
        Self::new(self.bounds(), self.periodic, resolution)
    }

    pub fn with_bounds(&self, bounds: [(T, T); D]) -> Result<Self> {
        Self::new(bounds, self.periodic, self.resolution)
    }

    /// Default finite-difference step on `axis`: `1e-5` of the axis extent.
    pub fn fd_step(&self, axis: usize) -> T {
        T::lit(1e-5) * self.extent(axis)
    }

    /// Wraps periodic coordinates into `[lo, hi)`; errors when a non-periodic
    /// coordinate is outside `[lo, hi]`.
    pub fn normalize(&self, p: &Point<T, D>) -> Result<Point<T, D>> {
        let mut out = p.0;
        for axis in 0..D {
            let x = p.0[axis];
            if !x.is_finite() {
                return Err(Error::OutOfDomain { point: p.to_f64_vec() });
            }
            if self.periodic[axis] {
                out[axis] = self.wrap(axis, x);
            } else if x < self.lower[axis] || x > self.upper[axis] {
                return Err(Error::OutOfDomain { point: p.to_f64_vec() });
            }
        }
        Ok(Point(out))
    }

    /// Like [`normalize`](Self::normalize) but clamps non-periodic coordinates.
    pub fn clamp(&self, p: &[T; D]) -> [T; D] {
        std::array::from_fn(|axis| {
            let x = p[axis];
            if self.periodic[axis] {
                self.wrap(axis, x)
            } else {
                x.max(self.lower[axis]).min(self.upper[axis])
            }
        })
    }

    /// Wraps periodic axes only; other coordinates pass through untouched.
    pub fn wrap_periodic(&self, p: &[T; D]) -> [T; D] {
        std::array::from_fn(|axis| if self.periodic[axis] { self.wrap(axis, p[axis]) } else { p[axis] })
    }

    fn wrap(&self, axis: usize, x: T) -> T {
        let lo = self.lower[axis];
        let len = self.extent(axis);
        let mut r = (x - lo) % len;
        if r < T::zero() {
            r = r + len;
        }
        if r >= len {
            r = T::zero();
        }
        lo + r
    }

    pub fn contains(&self, p: &Point<T, D>) -> bool {
        (0..D).all(|a| self.periodic[a] || (p.0[a] >= self.lower[a] && p.0[a] <= self.upper[a]))
    }

    /// True when every non-periodic coordinate is at least `margin[a]` inside.
    pub fn contains_with_margin(&self, p: &[T; D], margin: &[T; D]) -> bool {
        (0..D).all(|a| {
            self.periodic[a] || (p[a] >= self.lower[a] + margin[a] && p[a] <= self.upper[a] - margin[a])
        })
    }

    /// Shortest coordinate displacement `b - a` modulo the periodic identifications.
    pub fn displacement(&self, a: &[T; D], b: &[T; D]) -> [T; D] {
        std::array::from_fn(|axis| {
            let mut d = b[axis] - a[axis];
            if self.periodic[axis] {
                let len = self.extent(axis);
                let half = len * T::lit(0.5);
                while d > half {
                    d = d - len;
                }
                while d < -half {
                    d = d + len;
                }
            }
            d
        })
    }

    // ----- grid -----

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> T {
        let n = self.resolution[axis];
        if self.periodic[axis] {
            self.extent(axis) / T::from_count(n)
        } else {
            self.extent(axis) / T::from_count(n - 1)
        }
    }

    pub fn spacings(&self) -> [T; D] {
        std::array::from_fn(|a| self.spacing(a))
    }

    pub fn max_spacing(&self) -> T {
        (0..D).map(|a| self.spacing(a)).fold(T::zero(), T::max)
    }

    /// Euclidean diagonal of one grid cell in chart units.
    pub fn cell_diagonal(&self) -> T {
        (0..D).map(|a| self.spacing(a) * self.spacing(a)).sum::<T>().sqrt()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; D] {
        let mut m = [0usize; D];
        for axis in (0..D).rev() {
            m[axis] = idx % self.resolution[axis];
            idx /= self.resolution[axis];
        }
        m
    }

    pub fn flat_index(&self, m: &[usize; D]) -> usize {
        let mut idx = 0;
        for axis in 0..D {
            idx = idx * self.resolution[axis] + m[axis];
        }
        idx
    }

    pub fn node_coords_multi(&self, m: &[usize; D]) -> [T; D] {
        std::array::from_fn(|a| self.lower[a] + self.spacing(a) * T::from_count(m[a]))
    }

    pub fn node_coords(&self, idx: usize) -> [T; D] {
        self.node_coords_multi(&self.multi_index(idx))
    }

    pub fn node_point(&self, idx: usize) -> Point<T, D> {
        Point(self.node_coords(idx))
    }

    /// Index of the node nearest to `p` (after periodic normalization).
    pub fn nearest_node(&self, p: &[T; D]) -> usize {
        let q = self.clamp(p);
        let m: [usize; D] = std::array::from_fn(|a| {
            let n = self.resolution[a];
            let f = ((q[a] - self.lower[a]) / self.spacing(a)).round();
            let i = f.to_f64_lossy().max(0.0) as usize;
            if self.periodic[a] {
                i % n
            } else {
                i.min(n - 1)
            }
        });
        self.flat_index(&m)
    }

    /// Lower corner of the cell containing `p`, plus fractional offsets in `[0, 1]`.
    pub fn locate(&self, p: &[T; D]) -> ([usize; D], [T; D]) {
        let q = self.clamp(p);
        let mut base = [0usize; D];
        let mut frac = [T::zero(); D];
        for a in 0..D {
            let n = self.resolution[a];
            let s = (q[a] - self.lower[a]) / self.spacing(a);
            let fl = s.floor();
            let mut i = fl.to_f64_lossy().max(0.0) as usize;
            let mut f = s - fl;
            let last = if self.periodic[a] { n - 1 } else { n - 2 };
            if i > last {
                i = last;
                f = if self.periodic[a] { f } else { T::one() };
            }
            base[a] = i;
            frac[a] = f.max(T::zero()).min(T::one());
        }
        (base, frac)
    }

    /// Neighbor of `idx` at integer `offset`; wraps periodic axes, `None` when the
    /// offset leaves a non-periodic axis.
    pub fn neighbor(&self, idx: usize, offset: &[isize; D]) -> Option<usize> {
        let m = self.multi_index(idx);
        let mut out = [0usize; D];
        for a in 0..D {
            let n = self.resolution[a] as isize;
            let j = m[a] as isize + offset[a];
            if self.periodic[a] {
                out[a] = j.rem_euclid(n) as usize;
            } else if j < 0 || j >= n {
                return None;
            } else {
                out[a] = j as usize;
            }
        }
        Some(self.flat_index(&out))
    }

    /// Chart displacement represented by an integer grid offset.
    pub fn offset_vector(&self, offset: &[isize; D]) -> [T; D] {
        std::array::from_fn(|a| self.spacing(a) * T::from_f64(offset[a] as f64).unwrap())
    }

    /// True for nodes on a non-periodic face of the box.
    pub fn is_truncation_node(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..D).any(|a| !self.periodic[a] && (m[a] == 0 || m[a] + 1 == self.resolution[a]))
    }

    /// Primitive integer offsets with max-norm at most `radius` (16 in 2-D for radius 2).
    pub fn stencil(radius: usize) -> Vec<[isize; D]> {
        let r = radius as isize;
        let side = (2 * r + 1) as usize;
        let total = side.pow(D as u32);
        let mut out = Vec::new();
        for k in 0..total {
            let mut rem = k;
            let mut off = [0isize; D];
            for o in off.iter_mut() {
                *o = (rem % side) as isize - r;
                rem /= side;
            }
            if off.iter().all(|&o| o == 0) {
                continue;
            }
            let g = off.iter().fold(0usize, |g, &o| gcd(g, o.unsigned_abs()));
            if g == 1 {
                out.push(off);
            }
        }
        out
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strip() -> Chart<f64, 2> {
        Chart::new([(-6.0, 6.0), (-4.0, 4.0)], [true, false], [48, 33]).unwrap()
    }

    #[test]
    fn rejects_degenerate_bounds() {
        assert!(Chart::<f64, 1>::rectangle([(1.0, 1.0)], 10).is_err());
        assert!(Chart::<f64, 1>::rectangle([(2.0, 1.0)], 10).is_err());
    }

    #[test]
    fn periodic_wrap_and_domain_errors() {
        let c = strip();
        let p = c.normalize(&Point([7.0, 0.5])).unwrap();
        assert!((p.0[0] + 5.0).abs() < 1e-12);
        let p = c.normalize(&Point([6.0, 0.0])).unwrap();
        assert_eq!(p.0[0], -6.0);
        assert!(matches!(c.normalize(&Point([0.0, 4.5])), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(Chart::<f64, 2>::stencil(1).len(), 8);
        assert_eq!(Chart::<f64, 2>::stencil(2).len(), 16);
        assert_eq!(Chart::<f64, 1>::stencil(2).len(), 2);
    }

    #[test]
    fn grid_indexing_round_trip() {
        let c = strip();
        for idx in [0, 17, 500, c.node_count() - 1] {
            assert_eq!(c.flat_index(&c.multi_index(idx)), idx);
            assert_eq!(c.nearest_node(&c.node_coords(idx)), idx);
        }
        // periodic neighbor wraps
        let last_col = c.flat_index(&[47, 3]);
        assert_eq!(c.neighbor(last_col, &[1, 0]), Some(c.flat_index(&[0, 3])));
        assert_eq!(c.neighbor(c.flat_index(&[3, 0]), &[0, -1]), None);
    }

    #[test]
    fn displacement_uses_minimal_image() {
        let c = strip();
        let d = c.displacement(&[5.5, 0.0], &[-5.5, 1.0]);
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(x in -100.0f64..100.0, y in -4.0f64..4.0) {
            let c = strip();
            let once = c.normalize(&Point([x, y])).unwrap();
            let twice = c.normalize(&once).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert!(once.0[0] >= -6.0 && once.0[0] < 6.0);
        }
    }
}
