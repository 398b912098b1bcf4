//! Randers norms `R(v) = sqrt(h(v, v)) + omega(v)`, their reverses, the fundamental
//! tensor and the length and energy functionals of curves.

use std::sync::Arc;

use crate::chart::{Chart, TangentVector};
use crate::curve::{gauss2, SampledCurve};
use crate::error::{Error, Result};
use crate::field::{MetricField, OneFormField};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;

/// Which of the two Finsler norms built from one Randers datum is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Forward,
    Reverse,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
        }
    }

    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::Forward => T::one(),
            Orientation::Reverse => -T::one(),
        }
    }
}

/// A Riemannian metric `h` and a one-form `omega` on a chart.
///
/// `seams` lists hyperplanes `x[axis] = value` where the data is only
/// continuous; the geodesic integrator stops when it crosses one.
#[derive(Clone, Debug)]
pub struct RandersData<T, const D: usize> {
    pub h: MetricField<T, D>,
    pub omega: OneFormField<T, D>,
    pub chart: Chart<T, D>,
    pub seams: Vec<(usize, T)>,
}

impl<T: Real, const D: usize> RandersData<T, D> {
    pub fn new(h: MetricField<T, D>, omega: OneFormField<T, D>, chart: Chart<T, D>) -> Self {
        RandersData { h, omega, chart, seams: Vec::new() }
    }

    pub fn with_seam(mut self, axis: usize, value: T) -> Self {
        self.seams.push((axis, value));
        self
    }

    /// `h` and `omega` at raw coordinates (periodic axes wrapped).
    #[inline]
    pub fn fields_at(&self, x: &[T; D]) -> (Matrix<T, D>, [T; D]) {
        let q = self.chart.wrap_periodic(x);
        (self.h.at(&q), self.omega.at(&q))
    }

    /// `h`-norm of `omega` at `x`, i.e. `sqrt(omega^T h^{-1} omega)`.
    pub fn omega_norm_at(&self, x: &[T; D]) -> T {
        let (h, w) = self.fields_at(x);
        match linalg::solve(&h, &w) {
            Some(u) => linalg::dot(&w, &u).max(T::zero()).sqrt(),
            None => T::infinity(),
        }
    }
}

/// Forward or reverse Randers norm over shared data.
#[derive(Clone, Debug)]
pub struct FinslerNorm<T, const D: usize> {
    data: Arc<RandersData<T, D>>,
    orientation: Orientation,
}

impl<T: Real, const D: usize> FinslerNorm<T, D> {
    pub fn forward(data: RandersData<T, D>) -> Self {
        FinslerNorm { data: Arc::new(data), orientation: Orientation::Forward }
    }

    pub fn from_shared(data: Arc<RandersData<T, D>>, orientation: Orientation) -> Self {
        FinslerNorm { data, orientation }
    }

    pub fn with_orientation(&self, orientation: Orientation) -> Self {
        FinslerNorm { data: self.data.clone(), orientation }
    }

    /// The reverse norm `v -> F(-v)`.
    pub fn reverse(&self) -> Self {
        self.with_orientation(self.orientation.flipped())
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn data(&self) -> &RandersData<T, D> {
        &self.data
    }

    pub fn shared_data(&self) -> Arc<RandersData<T, D>> {
        self.data.clone()
    }

    pub fn chart(&self) -> &Chart<T, D> {
        &self.data.chart
    }

    /// Norm of `v` at raw coordinates `x`; no domain check.
    #[inline]
    pub fn eval(&self, x: &[T; D], v: &[T; D]) -> T {
        let (h, w) = self.data.fields_at(x);
        let a = linalg::quad(&h, v).max(T::zero()).sqrt();
        a + self.orientation.sign::<T>() * linalg::dot(&w, v)
    }

    /// `F^2 / 2`, the Lagrangian of the energy functional.
    #[inline]
    pub fn lagrangian(&self, x: &[T; D], v: &[T; D]) -> T {
        let f = self.eval(x, v);
        T::lit(0.5) * f * f
    }
}

/// `R(v)` for a tangent vector whose base is checked against the chart.
pub fn randers_norm<T: Real, const D: usize>(f: &FinslerNorm<T, D>, v: &TangentVector<T, D>) -> Result<T> {
    let base = f.chart().normalize(&v.base)?;
    if v.is_zero() {
        return Ok(T::zero());
    }
    Ok(f.eval(&base.0, &v.components))
}

/// `g_ij = 1/2 d^2(F^2)/dy^i dy^j`, by central fiber differences with step
/// `1e-5 |v|`.
pub fn fundamental_tensor<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    v: &TangentVector<T, D>,
) -> Result<Matrix<T, D>> {
    let base = f.chart().normalize(&v.base)?;
    if v.is_zero() {
        return Err(Error::ZeroVector);
    }
    let eps = T::lit(1e-4) * linalg::norm(&v.components);
    Ok(fiber_hessian(f, &base.0, &v.components, eps))
}

fn fiber_hessian<T: Real, const D: usize>(f: &FinslerNorm<T, D>, x: &[T; D], y: &[T; D], eps: T) -> Matrix<T, D> {
    let l = |u: &[T; D]| {
        let n = f.eval(x, u);
        n * n
    };
    let mut g = [[T::zero(); D]; D];
    let half = T::lit(0.5);
    let c = l(y);
    for i in 0..D {
        let mut p = *y;
        let mut m = *y;
        p[i] = p[i] + eps;
        m[i] = m[i] - eps;
        g[i][i] = half * (l(&p) - c - c + l(&m)) / (eps * eps);
        for j in 0..i {
            let shifted = |si: T, sj: T| {
                let mut u = *y;
                u[i] = u[i] + si * eps;
                u[j] = u[j] + sj * eps;
                l(&u)
            };
            let one = T::one();
            let mixed = (shifted(one, one) - shifted(one, -one) - shifted(-one, one) + shifted(-one, -one))
                / (T::lit(4.0) * eps * eps);
            g[i][j] = half * mixed;
            g[j][i] = half * mixed;
        }
    }
    g
}

/// `F`-length of a curve by two-point Gauss quadrature on each segment.
pub fn curve_length<T: Real, const D: usize>(f: &FinslerNorm<T, D>, curve: &SampledCurve<T, D>) -> T {
    integrate_along(curve, |x, v| f.eval(x, v))
}

/// Energy `int F(gamma')^2` over the parameter interval.
pub fn curve_energy<T: Real, const D: usize>(f: &FinslerNorm<T, D>, curve: &SampledCurve<T, D>) -> T {
    integrate_along(curve, |x, v| {
        let n = f.eval(x, v);
        n * n
    })
}

pub(crate) fn integrate_along<T: Real, const D: usize>(
    curve: &SampledCurve<T, D>,
    integrand: impl Fn(&[T; D], &[T; D]) -> T,
) -> T {
    let mut total = T::zero();
    for i in 0..curve.len().saturating_sub(1) {
        let ds = curve.params[i + 1] - curve.params[i];
        for (u, w) in gauss2::<T>() {
            let (x, v) = curve.segment_eval(i, u);
            total = total + w * ds * integrand(&x, &v);
        }
    }
    total
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport<T> {
    pub samples: usize,
    pub max_omega_norm: T,
    pub min_h_eigenvalue: T,
    pub valid: bool,
}

/// Samples `h` and `omega` on a `samples`-per-axis grid and checks the
/// Randers condition `|omega|_h < 1`.
pub fn validate<T: Real, const D: usize>(data: &RandersData<T, D>, samples: usize) -> ValidationReport<T> {
    let grid = data
        .chart
        .with_resolution([samples.max(2); D])
        .expect("resolution at least two");
    let mut max_norm = T::zero();
    let mut min_eig = T::infinity();
    for idx in 0..grid.node_count() {
        let x = grid.node_coords(idx);
        let (h, _) = data.fields_at(&x);
        min_eig = min_eig.min(linalg::sym_eigenvalues(&h)[0]);
        max_norm = max_norm.max(data.omega_norm_at(&x));
    }
    ValidationReport {
        samples: grid.node_count(),
        max_omega_norm: max_norm,
        min_h_eigenvalue: min_eig,
        valid: min_eig > T::zero() && max_norm < T::one(),
    }
}
