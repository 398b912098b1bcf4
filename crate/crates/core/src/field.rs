//! Scalar, one-form and metric fields on a chart.
//!
//! A field is either a closed-form rule or a table of node samples interpolated
//! multilinearly. Closed forms keep analytic scenarios exact; samples make large
//! grid sweeps cheap.

use std::fmt;
use std::sync::Arc;

use crate::chart::{Chart, Covector, Point};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::scalar::Real;

/// Values that can be combined linearly during interpolation.
pub trait Blend<T: Real>: Copy + Send + Sync + 'static {
    fn zero() -> Self;
    fn add_scaled(self, other: &Self, w: T) -> Self;
}

impl<T: Real> Blend<T> for T {
    fn zero() -> Self {
        T::zero()
    }
    fn add_scaled(self, other: &Self, w: T) -> Self {
        self + *other * w
    }
}

impl<T: Real, const D: usize> Blend<T> for [T; D] {
    fn zero() -> Self {
        [T::zero(); D]
    }
    fn add_scaled(self, other: &Self, w: T) -> Self {
        linalg::axpy(&self, w, other)
    }
}

impl<T: Real, const D: usize> Blend<T> for [[T; D]; D] {
    fn zero() -> Self {
        [[T::zero(); D]; D]
    }
    fn add_scaled(self, other: &Self, w: T) -> Self {
        std::array::from_fn(|i| linalg::axpy(&self[i], w, &other[i]))
    }
}

/// Node samples on the grid of `grid`.
#[derive(Debug, Clone)]
pub struct GridSamples<T, const D: usize, V> {
    pub grid: Chart<T, D>,
    pub values: Vec<V>,
}

impl<T: Real, const D: usize, V: Blend<T>> GridSamples<T, D, V> {
    pub fn new(grid: Chart<T, D>, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidChart(format!(
                "expected {} samples, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        Ok(GridSamples { grid, values })
    }

    /// Multilinear interpolation; exact at nodes.
    pub fn interpolate(&self, x: &[T; D]) -> V {
        let (base, frac) = self.grid.locate(x);
        let mut acc = V::zero();
        for corner in 0..(1usize << D) {
            let mut w = T::one();
            let mut off = [0isize; D];
            for a in 0..D {
                if corner >> a & 1 == 1 {
                    w = w * frac[a];
                    off[a] = 1;
                } else {
                    w = w * (T::one() - frac[a]);
                }
            }
            if w == T::zero() {
                continue;
            }
            let base_idx = self.grid.flat_index(&base);
            let idx = self.grid.neighbor(base_idx, &off).unwrap_or(base_idx);
            acc = acc.add_scaled(&self.values[idx], w);
        }
        acc
    }
}

type Rule<T, const D: usize, V> = Arc<dyn Fn(&[T; D]) -> V + Send + Sync>;

/// A field with values of type `V`.
pub enum Field<T, const D: usize, V> {
    Closed(Rule<T, D, V>),
    Sampled(Arc<GridSamples<T, D, V>>),
}

impl<T, const D: usize, V> Clone for Field<T, D, V> {
    fn clone(&self) -> Self {
        match self {
            Field::Closed(f) => Field::Closed(f.clone()),
            Field::Sampled(s) => Field::Sampled(s.clone()),
        }
    }
}

impl<T, const D: usize, V> fmt::Debug for Field<T, D, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Closed(_) => write!(f, "Field::Closed"),
            Field::Sampled(s) => write!(f, "Field::Sampled({} nodes)", s.values.len()),
        }
    }
}

impl<T: Real, const D: usize, V: Blend<T>> Field<T, D, V> {
    pub fn closed(rule: impl Fn(&[T; D]) -> V + Send + Sync + 'static) -> Self {
        Field::Closed(Arc::new(rule))
    }

    pub fn constant(value: V) -> Self {
        Field::closed(move |_| value)
    }

    pub fn sampled(samples: GridSamples<T, D, V>) -> Self {
        Field::Sampled(Arc::new(samples))
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self, Field::Sampled(_))
    }

    /// Evaluates at already-normalized chart coordinates.
    #[inline]
    pub fn at(&self, x: &[T; D]) -> V {
        match self {
            Field::Closed(f) => f(x),
            Field::Sampled(s) => s.interpolate(x),
        }
    }

    /// Evaluates at `p`, normalizing through `chart` first.
    pub fn eval(&self, chart: &Chart<T, D>, p: &Point<T, D>) -> Result<V> {
        let q = chart.normalize(p)?;
        Ok(self.at(&q.0))
    }

    /// Samples this field on the nodes of `grid`.
    pub fn sample_on(&self, grid: &Chart<T, D>) -> Self {
        let values = (0..grid.node_count()).map(|i| self.at(&grid.node_coords(i))).collect();
        Field::sampled(GridSamples { grid: grid.clone(), values })
    }

    /// Pointwise transformation into a closed-form field.
    pub fn map<W: Blend<T>>(&self, f: impl Fn(&[T; D], V) -> W + Send + Sync + 'static) -> Field<T, D, W> {
        let src = self.clone();
        Field::closed(move |x| f(x, src.at(x)))
    }
}

pub type OneFormField<T, const D: usize> = Field<T, D, Vector<T, D>>;
pub type MetricField<T, const D: usize> = Field<T, D, Matrix<T, D>>;

/// Scalar field, optionally carrying an exact differential.
#[derive(Clone, Debug)]
pub struct ScalarField<T, const D: usize> {
    pub value: Field<T, D, T>,
    pub gradient: Option<OneFormField<T, D>>,
}

impl<T: Real, const D: usize> ScalarField<T, D> {
    pub fn closed(rule: impl Fn(&[T; D]) -> T + Send + Sync + 'static) -> Self {
        ScalarField { value: Field::closed(rule), gradient: None }
    }

    /// Closed form with its exact differential.
    pub fn with_gradient(
        rule: impl Fn(&[T; D]) -> T + Send + Sync + 'static,
        grad: impl Fn(&[T; D]) -> [T; D] + Send + Sync + 'static,
    ) -> Self {
        ScalarField { value: Field::closed(rule), gradient: Some(Field::closed(grad)) }
    }

    pub fn constant(c: T) -> Self {
        ScalarField { value: Field::constant(c), gradient: Some(Field::constant([T::zero(); D])) }
    }

    /// Linear function `c + a . x`.
    pub fn linear(c: T, a: [T; D]) -> Self {
        Self::with_gradient(move |x| c + linalg::dot(&a, x), move |_| a)
    }

    #[inline]
    pub fn at(&self, x: &[T; D]) -> T {
        self.value.at(x)
    }

    pub fn eval(&self, chart: &Chart<T, D>, p: &Point<T, D>) -> Result<T> {
        self.value.eval(chart, p)
    }

    /// Differential at `p`: exact when a gradient is attached, otherwise central
    /// differences with the chart default step.
    pub fn differential(&self, chart: &Chart<T, D>, p: &Point<T, D>) -> Result<Covector<T, D>> {
        match &self.gradient {
            Some(g) => {
                let q = chart.normalize(p)?;
                Ok(Covector { base: q, components: g.at(&q.0) })
            }
            None => diff_scalar_with_steps(self, chart, p, &chart_steps(chart)),
        }
    }

    /// Differential at normalized coordinates, falling back to central differences
    /// with clamped stencils near non-periodic faces.
    pub fn differential_at(&self, chart: &Chart<T, D>, x: &[T; D]) -> [T; D] {
        if let Some(g) = &self.gradient {
            return g.at(x);
        }
        std::array::from_fn(|a| {
            let h = chart.fd_step(a);
            let mut xp = *x;
            let mut xm = *x;
            xp[a] = x[a] + h;
            xm[a] = x[a] - h;
            let xp = chart.clamp(&xp);
            let xm = chart.clamp(&xm);
            let span = chart.displacement(&xm, &xp)[a];
            (self.value.at(&xp) - self.value.at(&xm)) / span
        })
    }
}

fn chart_steps<T: Real, const D: usize>(chart: &Chart<T, D>) -> [T; D] {
    std::array::from_fn(|a| chart.fd_step(a))
}

/// Evaluates a metric field at `p`; the value is checked to be positive definite.
pub fn eval_metric<T: Real, const D: usize>(
    field: &MetricField<T, D>,
    chart: &Chart<T, D>,
    p: &Point<T, D>,
) -> Result<Matrix<T, D>> {
    let m = field.eval(chart, p)?;
    if !linalg::is_spd(&m) {
        return Err(Error::InvalidData {
            point: p.to_f64_vec(),
            reason: "metric is not positive definite".into(),
        });
    }
    Ok(m)
}

/// Central finite-difference gradient of `field` at `p` with uniform `step`.
pub fn diff_scalar<T: Real, const D: usize>(
    field: &ScalarField<T, D>,
    chart: &Chart<T, D>,
    p: &Point<T, D>,
    step: T,
) -> Result<Covector<T, D>> {
    diff_scalar_with_steps(field, chart, p, &[step; D])
}

fn diff_scalar_with_steps<T: Real, const D: usize>(
    field: &ScalarField<T, D>,
    chart: &Chart<T, D>,
    p: &Point<T, D>,
    steps: &[T; D],
) -> Result<Covector<T, D>> {
    let q = chart.normalize(p)?;
    if !chart.contains_with_margin(&q.0, steps) {
        return Err(Error::OutOfDomain { point: p.to_f64_vec() });
    }
    let components = std::array::from_fn(|a| {
        let mut xp = q.0;
        let mut xm = q.0;
        xp[a] = xp[a] + steps[a];
        xm[a] = xm[a] - steps[a];
        let xp = chart.clamp(&xp);
        let xm = chart.clamp(&xm);
        (field.at(&xp) - field.at(&xm)) / (steps[a] + steps[a])
    });
    Ok(Covector { base: q, components })
}

/// Euclidean metric field.
pub fn euclidean<T: Real, const D: usize>() -> MetricField<T, D> {
    Field::constant(linalg::identity())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> Chart<f64, 2> {
        Chart::rectangle([(-3.0, 3.0), (-3.0, 3.0)], 13).unwrap()
    }

    #[test]
    fn euclidean_metric_is_identity() {
        let m = eval_metric(&euclidean::<f64, 2>(), &plane(), &Point([0.3, -1.2])).unwrap();
        assert_eq!(m, linalg::identity());
    }

    #[test]
    fn metric_outside_domain_errors() {
        let r = eval_metric(&euclidean::<f64, 2>(), &plane(), &Point([3.5, 0.0]));
        assert!(matches!(r, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn sampled_field_exact_at_nodes() {
        let chart = plane();
        let f: MetricField<f64, 2> = Field::closed(|x: &[f64; 2]| [[1.0 + x[0] * x[0], x[1]], [x[1], 2.0 + x[0].sin()]]);
        let s = f.sample_on(&chart);
        for idx in [0, 40, 84, 168] {
            let x = chart.node_coords(idx);
            assert_eq!(s.at(&x), f.at(&x));
        }
        // bilinear reproduces affine data exactly between nodes
        let g: Field<f64, 2, f64> = Field::closed(|x| 2.0 * x[0] - x[1] + 0.5);
        let gs = g.sample_on(&chart);
        assert!((gs.at(&[0.123, -1.77]) - g.at(&[0.123, -1.77])).abs() < 1e-12);
    }

    #[test]
    fn periodic_interpolation_wraps_seam() {
        let chart = Chart::new([(0.0, 1.0)], [true], [10]).unwrap();
        let f: Field<f64, 1, f64> = Field::closed(|x: &[f64; 1]| (2.0 * std::f64::consts::PI * x[0]).cos());
        let s = f.sample_on(&chart);
        // between the last node (0.9) and the wrapped first node (1.0 == 0.0)
        let mid = s.at(&[0.95]);
        let expect = 0.5 * (f.at(&[0.9]) + f.at(&[0.0]));
        assert!((mid - expect).abs() < 1e-12);
    }

    #[test]
    fn diff_scalar_examples() {
        let chart = plane();
        let lin = ScalarField::closed(|x: &[f64; 2]| x[0]);
        let d = diff_scalar(&lin, &chart, &Point([0.7, 0.1]), 1e-3).unwrap();
        assert!((d.components[0] - 1.0).abs() < 1e-12 && d.components[1].abs() < 1e-12);

        let quad = ScalarField::closed(|x: &[f64; 2]| x[0] * x[0] + x[1] * x[1]);
        let h = 1e-3;
        let d = diff_scalar(&quad, &chart, &Point([1.0, 2.0]), h).unwrap();
        assert!((d.components[0] - 2.0).abs() < h * h && (d.components[1] - 4.0).abs() < h * h);

        let c = ScalarField::constant(3.0);
        let d = diff_scalar(&c, &chart, &Point([0.0, 0.0]), 1e-3).unwrap();
        assert_eq!(d.components, [0.0, 0.0]);
    }

    #[test]
    fn diff_scalar_needs_margin() {
        let chart = plane();
        let lin = ScalarField::closed(|x: &[f64; 2]| x[0]);
        let r = diff_scalar(&lin, &chart, &Point([2.9995, 0.0]), 1e-3);
        assert!(matches!(r, Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn diff_scalar_converges_at_second_order() {
        let chart = plane();
        let f = ScalarField::closed(|x: &[f64; 2]| (1.3 * x[0]).sin() * (0.7 * x[1]).exp());
        let p = Point([0.4, -0.3]);
        let exact = 1.3 * (1.3 * 0.4f64).cos() * (0.7 * -0.3f64).exp();
        let errs: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&h| (diff_scalar(&f, &chart, &p, h).unwrap().components[0] - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(slope >= 1.9, "slope {slope}");
        }
    }
}
