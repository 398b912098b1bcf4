//! Property checks run against any Randers data: triangle inequality,
//! homogeneity, convexity of the indicatrix, constant speed of geodesics,
//! Killing conservation and causality of the lifted null geodesics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{Point, TangentVector};
use crate::distance::{forward_distance, Level};
use crate::error::Result;
use crate::finsler::{fundamental_tensor, FinslerNorm, RandersData};
use crate::geodesic::geodesic_ivp;
use crate::linalg;
use crate::scalar::Real;
use crate::stationary::{integrate_null_geodesic, stationary_from_randers, Event, TimeOrientation};

/// Integration tolerance of the sampled geodesics.
const GEODESIC_TOL: f64 = 1e-9;

/// One invariant with its measured value and bound; passes when `value <= tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl InvariantCheck {
    pub fn pass(&self) -> bool {
        self.value <= self.tol
    }
}

/// Sampling sizes for [`check_invariants`].
#[derive(Debug, Clone, Copy)]
pub struct InvariantOptions {
    pub seed: u64,
    pub pointwise: usize,
    pub triangles: usize,
    pub geodesics: usize,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        InvariantOptions { seed: 0x5eed, pointwise: 200, triangles: 3, geodesics: 4 }
    }
}

fn inner_point<T: Real, const D: usize>(r: &RandersData<T, D>, rng: &mut ChaCha8Rng, shrink: f64) -> [T; D] {
    std::array::from_fn(|a| {
        let lo = r.chart.lower(a).to_f64_lossy();
        let hi = r.chart.upper(a).to_f64_lossy();
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo) * shrink;
        T::lit(rng.gen_range(mid - half..mid + half))
    })
}

fn direction<T: Real, const D: usize>(rng: &mut ChaCha8Rng) -> [T; D] {
    loop {
        let v: [f64; D] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return std::array::from_fn(|k| T::lit(v[k] / n));
        }
    }
}

/// Runs the suite on `r` with samples drawn in the inner half of the chart.
pub fn check_invariants<T: Real, const D: usize>(r: &RandersData<T, D>, opts: &InvariantOptions) -> Result<Vec<InvariantCheck>> {
    let f = FinslerNorm::forward(r.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let extent = r.chart.max_extent().to_f64_lossy();

    let mut homog = 0.0f64;
    let mut spd_fail = 0usize;
    let mut asym = 0.0f64;
    for _ in 0..opts.pointwise {
        let x = inner_point(r, &mut rng, 0.9);
        let v: [T; D] = direction(&mut rng);
        let lam = T::lit(rng.gen_range(0.1..10.0));
        let base = f.eval(&x, &v);
        let scaled = f.eval(&x, &linalg::scale(&v, lam));
        homog = homog.max(((scaled - lam * base) / (lam * base)).abs().to_f64_lossy());
        let g = fundamental_tensor(&f, &TangentVector::new(Point(x), v))?;
        asym = asym.max(linalg::max_abs_diff(&g, &linalg::transpose(&g)).to_f64_lossy());
        if !linalg::is_spd(&g) {
            spd_fail += 1;
        }
    }

    let mut triangle = 0.0f64;
    for _ in 0..opts.triangles {
        let [p, q, s] = [0, 1, 2].map(|_| inner_point(r, &mut rng, 0.5));
        let d = |a: &[T; D], b: &[T; D]| forward_distance(&f, &Point(*a), &Point(*b), Level::Refined).map(|e| e.value.to_f64_lossy());
        let excess = d(&p, &s)? - d(&p, &q)? - d(&q, &s)?;
        triangle = triangle.max(excess);
    }

    let st = stationary_from_randers(r)?;
    let mut speed = 0.0f64;
    let mut killing = 0.0f64;
    let mut null = 0.0f64;
    let mut margin = 0.0f64;
    for _ in 0..opts.geodesics {
        let x = inner_point(r, &mut rng, 0.5);
        let v: [T; D] = direction(&mut rng);
        let reach = T::lit(0.2 * extent);
        let geo = geodesic_ivp(&f, &Point(x), &v, reach, T::lit(GEODESIC_TOL))?;
        speed = speed.max(geo.max_speed_deviation.to_f64_lossy());
        for orientation in [TimeOrientation::Future, TimeOrientation::Past] {
            let u = st.null_lift(&x, &v, orientation);
            let ng = integrate_null_geodesic(&st, &Event::new(T::zero(), x), &u, orientation, reach)?;
            killing = killing.max(ng.max_killing_drift.to_f64_lossy());
            null = null.max(ng.max_null_drift.to_f64_lossy());
            margin = margin.max(-ng.min_time_margin.to_f64_lossy());
        }
    }

    Ok(vec![
        InvariantCheck { name: "homogeneity", value: homog, tol: 1e-12 },
        InvariantCheck { name: "fundamental_tensor_asymmetry", value: asym, tol: 1e-8 },
        InvariantCheck { name: "fundamental_tensor_spd_failures", value: spd_fail as f64, tol: 0.0 },
        InvariantCheck { name: "triangle_excess", value: triangle, tol: 1e-3 * extent },
        InvariantCheck { name: "speed_drift", value: speed, tol: 10.0 * GEODESIC_TOL },
        InvariantCheck { name: "killing_drift", value: killing, tol: 1e-9 },
        InvariantCheck { name: "null_drift", value: null, tol: 1e-6 },
        InvariantCheck { name: "time_margin_deficit", value: margin, tol: 1e-9 },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn constant_form_passes() {
        let r = scenarios::constant_form(0.5, 41);
        let checks = check_invariants(&r, &InvariantOptions { pointwise: 50, triangles: 1, geodesics: 2, ..Default::default() }).unwrap();
        for c in &checks {
            assert!(c.pass(), "{c:?}");
        }
    }
}
