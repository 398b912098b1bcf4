//! Distance to a closed set, Cauchy developments and horizons of spatial
//! regions, minimizing segments and cut loci.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chart::{Chart, Point};
use crate::curve::{gauss2, hausdorff, SampledCurve};
use crate::distance::{
    self, chord_length, nodes_near, refine_polyline, resample_by_length, Direction, DistanceField, DistanceOptions,
    GridMask,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::finsler::{FinslerNorm, RandersData};
use crate::geodesic::{shoot_once, GeodesicSolution};
use crate::linalg;
use crate::scalar::Real;
use crate::stationary::{stationary_from_randers, Event, SpacetimeVector, StationaryData};

/// Arrival directions spreading more than this many degrees mark a crease.
pub const CREASE_SPREAD_DEG: f64 = 15.0;

/// A region of the chart given by a node mask, optionally backed by a level
/// function `phi` (inside where `phi <= 0`, or `phi < 0` for open regions).
#[derive(Clone, Debug)]
pub struct RegionMask<T, const D: usize> {
    pub mask: GridMask<T, D>,
    /// Inside nodes with at least one outside neighbour.
    pub boundary: Vec<usize>,
    pub closed: bool,
    pub level: Option<ScalarField<T, D>>,
}

fn boundary_of<T: Real, const D: usize>(mask: &GridMask<T, D>) -> Vec<usize> {
    let grid = &mask.grid;
    let stencil = Chart::<T, D>::stencil(1);
    (0..grid.node_count())
        .filter(|&i| {
            mask.inside[i] && stencil.iter().any(|o| grid.neighbor(i, o).map(|m| !mask.inside[m]).unwrap_or(false))
        })
        .collect()
}

impl<T: Real, const D: usize> RegionMask<T, D> {
    /// The closed region `{phi <= 0}`.
    pub fn from_level(chart: &Chart<T, D>, phi: ScalarField<T, D>) -> Self {
        let mask = GridMask::from_fn(chart, |i| phi.at(&chart.node_coords(i)) <= T::zero());
        Self::assemble(mask, true, Some(phi))
    }

    /// The open region `{phi < 0}`.
    pub fn open_from_level(chart: &Chart<T, D>, phi: ScalarField<T, D>) -> Self {
        let mask = GridMask::from_fn(chart, |i| phi.at(&chart.node_coords(i)) < T::zero());
        Self::assemble(mask, false, Some(phi))
    }

    pub fn from_mask(mask: GridMask<T, D>, closed: bool) -> Self {
        Self::assemble(mask, closed, None)
    }

    fn assemble(mask: GridMask<T, D>, closed: bool, level: Option<ScalarField<T, D>>) -> Self {
        let boundary = boundary_of(&mask);
        RegionMask { mask, boundary, closed, level }
    }

    pub fn grid(&self) -> &Chart<T, D> {
        &self.mask.grid
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Complement within the chart. With a level function this is
    /// `{-phi <= 0}` (closed) or `{-phi < 0}` (open); mask-only regions flip
    /// node membership and closedness.
    pub fn complement(&self) -> Self {
        match &self.level {
            Some(phi) => {
                let p = phi.clone();
                let neg = ScalarField::with_gradient(
                    {
                        let p = p.clone();
                        move |x: &[T; D]| -p.at(x)
                    },
                    {
                        let (p, g) = (p, self.grid().clone());
                        move |x: &[T; D]| linalg::scale(&p.differential_at(&g, x), -T::one())
                    },
                );
                if self.closed {
                    Self::open_from_level(self.grid(), neg)
                } else {
                    Self::from_level(self.grid(), neg)
                }
            }
            None => Self::from_mask(self.mask.complement(), !self.closed),
        }
    }

    /// Membership of an arbitrary point (level function when present).
    pub fn contains(&self, x: &[T; D]) -> bool {
        let q = self.grid().wrap_periodic(x);
        match &self.level {
            Some(phi) if self.closed => phi.at(&q) <= T::zero(),
            Some(phi) => phi.at(&q) < T::zero(),
            None => self.mask.contains_point(&q),
        }
    }

    /// Unit normal `grad phi / |grad phi|` (zero without a level function).
    pub fn boundary_normal(&self, x: &[T; D]) -> [T; D] {
        let Some(phi) = &self.level else { return [T::zero(); D] };
        let g = phi.differential_at(self.grid(), &self.grid().wrap_periodic(x));
        let n = linalg::norm(&g);
        if n == T::zero() {
            g
        } else {
            linalg::scale(&g, T::one() / n)
        }
    }

    /// Newton projection onto `{phi = 0}`; identity without a level function.
    pub fn project_to_boundary(&self, x: &[T; D]) -> [T; D] {
        let Some(phi) = &self.level else { return *x };
        let grid = self.grid();
        let mut z = *x;
        for _ in 0..30 {
            let v = phi.at(&grid.wrap_periodic(&z));
            let g = phi.differential_at(grid, &grid.wrap_periodic(&z));
            let gg = linalg::dot(&g, &g);
            if gg == T::zero() {
                break;
            }
            let step = linalg::scale(&g, v / gg);
            z = linalg::sub(&z, &step);
            if linalg::norm(&step) < T::lit(1e-14) * (T::one() + linalg::norm(&z)) {
                break;
            }
        }
        z
    }
}

/// Which distance to a set: `rho(p) = inf d(C, p)` or `inf d(p, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOrientation {
    FromSet,
    ToSet,
}

/// Distance field of a closed set with pointwise refinement.
#[derive(Clone, Debug)]
pub struct SetDistance<T, const D: usize> {
    pub norm: FinslerNorm<T, D>,
    pub region: RegionMask<T, D>,
    pub orientation: SetOrientation,
    pub field: DistanceField<T, D>,
}

/// A refined value of `rho_C` with its realizing path.
#[derive(Debug, Clone)]
pub struct SetDistanceEstimate<T, const D: usize> {
    pub value: T,
    pub coarse: T,
    /// Point of `C` where the path starts (from-set) or ends (to-set).
    pub foot: [T; D],
    /// Realizing path oriented along the metric.
    pub curve: SampledCurve<T, D>,
}

/// `rho_C` over the chart by a multi-source sweep seeded on every node of `C`.
/// From-set uses the metric itself; to-set sweeps with the reverse metric.
pub fn distance_to_set<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    c: &RegionMask<T, D>,
    orientation: SetOrientation,
) -> Result<SetDistance<T, D>> {
    if c.is_empty() {
        return Err(Error::EmptySet("distance_to_set source region".into()));
    }
    if !c.closed {
        return Err(Error::Precondition("distance_to_set needs a closed region".into()));
    }
    let direction = match orientation {
        SetOrientation::FromSet => Direction::Forward,
        SetOrientation::ToSet => Direction::Backward,
    };
    let field = DistanceField::from_nodes(f, &c.mask.nodes(), direction)?;
    Ok(SetDistance { norm: f.clone(), region: c.clone(), orientation, field })
}

impl<T: Real, const D: usize> SetDistance<T, D> {
    fn grid(&self) -> &Chart<T, D> {
        &self.field.grid
    }

    /// The sweep metric: `F` for from-set, the reverse metric for to-set.
    pub fn sweep_norm(&self) -> &FinslerNorm<T, D> {
        &self.field.sweep_norm
    }

    pub fn coarse_at(&self, x: &[T; D]) -> T {
        if self.region.contains(x) {
            T::zero()
        } else {
            self.field.value_at(x)
        }
    }

    fn refine_from(&self, initial: &[[T; D]], opts: &DistanceOptions<T>) -> (Vec<[T; D]>, T) {
        let region = &self.region;
        let proj = |z: &[T; D]| region.project_to_boundary(z);
        let normal = |z: &[T; D]| region.boundary_normal(z);
        let start: distance::StartProjection<'_, T, D> =
            region.level.is_some().then_some(distance::StartConstraint { project: &proj, normal: &normal });
        refine_polyline(self.sweep_norm(), initial, start, opts)
    }

    /// Refined `rho_C(x)`: the coarse path is relaxed with its set end free on
    /// the boundary of `C`.
    pub fn refined(&self, x: &[T; D]) -> Result<SetDistanceEstimate<T, D>> {
        let x = self.grid().normalize(&Point(*x))?.0;
        if self.region.contains(&x) {
            return Ok(SetDistanceEstimate {
                value: T::zero(),
                coarse: T::zero(),
                foot: x,
                curve: SampledCurve::constant(x),
            });
        }
        let coarse = self.field.value_at(&x);
        let path = self.field.sweep_path(&x);
        let (pts, len) = if path.len() >= 2 {
            self.refine_from(&path, &DistanceOptions::default())
        } else {
            (path.clone(), coarse)
        };
        let (value, mut pts) = if len <= coarse { (len, pts) } else { (coarse, path) };
        let foot = pts[0];
        if self.orientation == SetOrientation::ToSet {
            pts.reverse();
        }
        Ok(SetDistanceEstimate { value, coarse, foot, curve: SampledCurve::uniform(pts, T::zero(), T::one())? })
    }

    fn cell_step(&self, x: &[T; D]) -> T {
        T::lit(2.0) * distance::half_cell(self.sweep_norm(), x)
    }

    /// Arrival direction `x - root` of node `m`, unwrapped.
    fn arrival_dir(&self, m: usize, x: &[T; D]) -> Option<[T; D]> {
        let r = self.grid().node_coords(self.field.root[m]);
        let d = self.grid().displacement(&r, x);
        let n = linalg::norm(&d);
        (n > T::zero()).then(|| linalg::scale(&d, T::one() / n))
    }

    /// Largest angle (degrees) between arrival directions over the stencil
    /// neighbourhood of node `i`.
    fn coarse_spread(&self, i: usize) -> T {
        let grid = self.grid();
        let x = grid.node_coords(i);
        let mut dirs: Vec<[T; D]> = Vec::new();
        let mut seen = Vec::new();
        for o in Chart::<T, D>::stencil(1).iter().chain(std::iter::once(&[0isize; D])) {
            if let Some(m) = grid.neighbor(i, o) {
                if self.region.mask.inside[m] || !self.field.values[m].is_finite() || seen.contains(&self.field.root[m]) {
                    continue;
                }
                seen.push(self.field.root[m]);
                if let Some(d) = self.arrival_dir(m, &x) {
                    dirs.push(d);
                }
            }
        }
        max_angle_deg(&dirs)
    }

    /// Near-minimal refined families arriving at node `i` from the distinct
    /// roots of its neighbourhood, with their lengths.
    fn families(&self, i: usize, tol: T) -> Vec<(Vec<[T; D]>, T)> {
        let grid = self.grid();
        let x = grid.node_coords(i);
        let two_cells = T::lit(2.0) * grid.max_spacing();
        let mut picks: Vec<(usize, T)> = Vec::new();
        for o in Chart::<T, D>::stencil(1).iter().chain(std::iter::once(&[0isize; D])) {
            let Some(m) = grid.neighbor(i, o) else { continue };
            if !self.field.values[m].is_finite() {
                continue;
            }
            let y = grid.node_coords(m);
            let est = self.field.values[m] + chord_length(self.sweep_norm(), &y, &grid.displacement(&y, &x));
            let root = grid.node_coords(self.field.root[m]);
            match picks
                .iter_mut()
                .find(|(n, _)| linalg::norm(&grid.displacement(&grid.node_coords(self.field.root[*n]), &root)) <= two_cells)
            {
                Some(p) if est < p.1 => *p = (m, est),
                Some(_) => {}
                None => picks.push((m, est)),
            }
        }
        let opts = DistanceOptions::default();
        let mut fams: Vec<(Vec<[T; D]>, T)> = picks
            .iter()
            .map(|&(m, _)| {
                let mut chain = self.field.sweep_path(&grid.node_coords(m));
                let last = *chain.last().unwrap();
                chain.push(linalg::add(&last, &grid.displacement(&last, &x)));
                chain.dedup_by(|a, b| linalg::dist(a, b) == T::zero());
                if chain.len() < 2 {
                    return (chain.clone(), T::zero());
                }
                let coarse = resample_by_length(self.sweep_norm(), &chain, 8);
                self.refine_from(&coarse, &opts)
            })
            .collect();
        let best = fams.iter().map(|f| f.1).fold(T::infinity(), T::min);
        fams.retain(|f| f.1 <= best + tol);
        fams
    }

    /// Fiber gradient of the sweep metric at the arriving tangent of a path.
    fn arrival_gradient(&self, pts: &[[T; D]]) -> Option<[T; D]> {
        let n = pts.len();
        if n < 2 {
            return None;
        }
        let x = pts[n - 1];
        let u = linalg::sub(&pts[n - 1], &pts[n - 2]);
        fiber_gradient(self.sweep_norm(), &x, &u)
    }
}

/// `dF/dy` of a Randers norm at `(x, u)`.
fn fiber_gradient<T: Real, const D: usize>(f: &FinslerNorm<T, D>, x: &[T; D], u: &[T; D]) -> Option<[T; D]> {
    let (h, w) = f.data().fields_at(x);
    let a = linalg::quad(&h, u).sqrt();
    if a == T::zero() {
        return None;
    }
    let hu = linalg::mat_vec(&h, u);
    Some(linalg::axpy(&linalg::scale(&hu, T::one() / a), f.orientation().sign::<T>(), &w))
}

fn max_angle_deg<T: Real, const D: usize>(dirs: &[[T; D]]) -> T {
    let mut worst = T::zero();
    for i in 0..dirs.len() {
        for j in 0..i {
            let (a, b) = (&dirs[i], &dirs[j]);
            let c = linalg::dot(a, b) / (linalg::norm(a) * linalg::norm(b));
            let ang = c.max(-T::one()).min(T::one()).acos().to_degrees();
            worst = worst.max(ang);
        }
    }
    worst
}

fn distinct_paths<T: Real, const D: usize>(fams: &[(Vec<[T; D]>, T)], threshold: T) -> Vec<usize> {
    let curves: Vec<SampledCurve<T, D>> = fams
        .iter()
        .map(|(p, _)| SampledCurve::uniform(p.clone(), T::zero(), T::one()).unwrap_or_else(|_| SampledCurve::constant(p[0])))
        .collect();
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..fams.len() {
        if keep.iter().all(|&k| hausdorff(&curves[k], &curves[i], 32) > threshold) {
            keep.push(i);
        }
    }
    keep
}

/// `C`-minimizing segments ending at `p` (from-set) or starting at `p`
/// (to-set), each validated by shooting.
///
/// Candidates are the refined paths from the distinct roots around `p` and from
/// `restarts` boundary nodes drawn with a fixed seed. Those within `1e-3` of the
/// shortest are shot from their foot to `p` under the sweep metric; the returned
/// solutions are geodesics of that metric from `C` to `p` (reverse them for the
/// to-set case). Duplicates within two grid cells are merged.
pub fn minimizing_segments<T: Real, const D: usize>(
    sd: &SetDistance<T, D>,
    p: &Point<T, D>,
    restarts: usize,
) -> Result<Vec<GeodesicSolution<T, D>>> {
    let grid = sd.grid().clone();
    let x = grid.normalize(p)?.0;
    if sd.region.contains(&x) {
        return Err(Error::Precondition("point lies in the set".into()));
    }
    let opts = DistanceOptions::default();
    let mut initials: Vec<Vec<[T; D]>> = Vec::new();
    let mut roots_seen = Vec::new();
    for m in nodes_near(&grid, &x, 1) {
        if !sd.field.values[m].is_finite() || roots_seen.contains(&sd.field.root[m]) {
            continue;
        }
        roots_seen.push(sd.field.root[m]);
        let mut chain = sd.field.sweep_path(&grid.node_coords(m));
        let last = *chain.last().unwrap();
        chain.push(linalg::add(&last, &grid.displacement(&last, &x)));
        chain.dedup_by(|a, b| linalg::dist(a, b) == T::zero());
        initials.push(chain);
    }
    let pool = if sd.region.boundary.is_empty() { sd.region.mask.nodes() } else { sd.region.boundary.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..restarts {
        let b = grid.node_coords(pool[rng.gen_range(0..pool.len())]);
        initials.push(vec![b, linalg::add(&b, &grid.displacement(&b, &x))]);
    }
    let fams: Vec<(Vec<[T; D]>, T)> = initials
        .par_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let c = if c.len() > 9 { resample_by_length(sd.sweep_norm(), c, 8) } else { c.clone() };
            sd.refine_from(&c, &opts)
        })
        .collect();
    let best = fams.iter().map(|f| f.1).fold(T::infinity(), T::min);
    let len_tol = T::lit(1e-3) * best.max(T::one());
    let near: Vec<(Vec<[T; D]>, T)> = fams.into_iter().filter(|f| f.1 <= best + len_tol).collect();
    let mut sols: Vec<GeodesicSolution<T, D>> = near
        .par_iter()
        .filter_map(|(pts, len)| {
            let foot = pts[0];
            let target = *pts.last().unwrap();
            let m = T::from_count(pts.len() - 1);
            let v0 = linalg::scale(&linalg::sub(&pts[1], &pts[0]), m);
            let sol = shoot_once(sd.sweep_norm(), &foot, &target, v0, T::lit(1e-8))?;
            ((sol.length - *len).abs() <= len_tol).then_some(sol)
        })
        .collect();
    sols.sort_by(|a, b| a.length.partial_cmp(&b.length).unwrap());
    let threshold = T::lit(2.0) * grid.max_spacing();
    let mut distinct: Vec<GeodesicSolution<T, D>> = Vec::new();
    for s in sols {
        if distinct.iter().all(|d| hausdorff(&d.curve, &s.curve, 64) > threshold) {
            distinct.push(s);
        }
    }
    if distinct.is_empty() {
        return Err(Error::NoMinimizer { point: Point(x).to_f64_vec() });
    }
    Ok(distinct)
}

/// Crease detection over the grid.
#[derive(Debug, Clone)]
pub struct CutLocus<T, const D: usize> {
    pub flagged: GridMask<T, D>,
    /// Estimated number of minimizing segments per node (zero inside `C`).
    pub segment_count: Vec<u32>,
    /// Spread in degrees of the arriving fiber gradients of the near-minimal
    /// families (zero where only one family arrives).
    pub spread_deg: Vec<T>,
    /// Nodes examined with refined families.
    pub candidates: usize,
    /// Fraction of nodes outside `C` and its neighbours where
    /// `segment_count >= 2` and `spread > CREASE_SPREAD_DEG` agree.
    pub agreement: T,
}

impl<T: Real, const D: usize> CutLocus<T, D> {
    pub fn flagged_count(&self) -> usize {
        self.flagged.count()
    }
}

/// Cut locus of `C` on the grid.
///
/// Nodes whose neighbourhood shows arrival directions from distinct roots
/// spreading more than half the crease threshold are examined: paths from each
/// root cluster are relaxed with a free foot, families longer than the shortest
/// by more than 1.5 cells are dropped, and the survivors give the segment count
/// and the spread of their fiber gradients. A node is flagged when either
/// indicator fires. Other nodes carry one segment.
pub fn cut_locus<T: Real, const D: usize>(sd: &SetDistance<T, D>) -> CutLocus<T, D> {
    let grid = sd.grid().clone();
    let n = grid.node_count();
    let half = T::lit(0.5 * CREASE_SPREAD_DEG);
    let threshold = T::lit(CREASE_SPREAD_DEG);
    let near_set: Vec<bool> = (0..n)
        .map(|i| {
            sd.region.mask.inside[i]
                || Chart::<T, D>::stencil(1).iter().any(|o| grid.neighbor(i, o).map(|m| sd.region.mask.inside[m]).unwrap_or(false))
        })
        .collect();
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| !sd.region.mask.inside[i] && sd.field.values[i].is_finite() && sd.coarse_spread(i) > half)
        .collect();
    let results: Vec<(usize, u32, T)> = candidates
        .par_iter()
        .map(|&i| {
            let x = grid.node_coords(i);
            let tol = T::lit(1.5) * sd.cell_step(&x);
            let fams = sd.families(i, tol);
            let keep = distinct_paths(&fams, T::lit(2.0) * grid.max_spacing());
            let grads: Vec<[T; D]> = keep.iter().filter_map(|&k| sd.arrival_gradient(&fams[k].0)).collect();
            (i, keep.len().max(1) as u32, max_angle_deg(&grads))
        })
        .collect();
    let mut count: Vec<u32> = (0..n).map(|i| if sd.region.mask.inside[i] { 0 } else { 1 }).collect();
    let mut spread = vec![T::zero(); n];
    for (i, c, s) in &results {
        count[*i] = *c;
        spread[*i] = *s;
    }
    let flagged = GridMask::from_fn(&grid, |i| count[i] >= 2 || spread[i] > threshold);
    let (mut agree, mut total) = (0usize, 0usize);
    for i in 0..n {
        if near_set[i] || !sd.field.values[i].is_finite() {
            continue;
        }
        total += 1;
        if (count[i] >= 2) == (spread[i] > threshold) {
            agree += 1;
        }
    }
    CutLocus {
        flagged,
        segment_count: count,
        spread_deg: spread,
        candidates: candidates.len(),
        agreement: if total == 0 { T::one() } else { T::from_count(agree) / T::from_count(total) },
    }
}

/// Growth exponent `log(c2 / c1) / log(r2 / r1)` of a flagged-cell count
/// between two resolutions: near one for a curve of creases in the plane,
/// near two for an area.
pub fn refinement_exponent(res1: usize, count1: usize, res2: usize, count2: usize) -> f64 {
    ((count2.max(1) as f64) / (count1.max(1) as f64)).ln() / ((res2 as f64) / (res1 as f64)).ln()
}

/// Time side of a development or horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Future,
    Past,
}

/// Cauchy development of the slice `{t0} x A`, as a height over the chart.
#[derive(Debug, Clone)]
pub struct Development<T, const D: usize> {
    pub t0: T,
    pub side: Side,
    /// Node heights `inf d(x, y)` over `x` outside `A` (future) or `inf d(y, x)`
    /// (past); infinite when the complement of `A` is empty.
    pub heights: Vec<T>,
    pub unbounded: bool,
    /// Set when the chart-centred ball diagnostic shows escape, so slices may
    /// fail to be Cauchy and the development is only indicative.
    pub completeness_caveat: bool,
    pub set_distance: Option<SetDistance<T, D>>,
    pub grid: Chart<T, D>,
}

/// Development of `{t0} x A`: `D+ = {(t, y) : t >= t0, t - t0 < height(y)}` and
/// the mirrored set for the past.
pub fn cauchy_development<T: Real, const D: usize>(
    r: &RandersData<T, D>,
    a: &RegionMask<T, D>,
    t0: T,
    side: Side,
) -> Result<Development<T, D>> {
    let grid = r.chart.clone();
    let complement = a.complement();
    let f = FinslerNorm::forward(r.clone());
    if complement.is_empty() {
        return Ok(Development {
            t0,
            side,
            heights: vec![T::infinity(); grid.node_count()],
            unbounded: true,
            completeness_caveat: false,
            set_distance: None,
            grid,
        });
    }
    let orientation = match side {
        Side::Future => SetOrientation::FromSet,
        Side::Past => SetOrientation::ToSet,
    };
    let sd = distance_to_set(&f, &complement, orientation)?;
    let heights: Vec<T> = (0..grid.node_count()).map(|i| if complement.mask.inside[i] { T::zero() } else { sd.field.values[i] }).collect();
    let top = heights.iter().copied().filter(|h| h.is_finite()).fold(T::zero(), T::max);
    let centre: [T; D] = std::array::from_fn(|k| T::lit(0.5) * (grid.lower(k) + grid.upper(k)));
    let completeness_caveat = if top > T::zero() {
        distance::heine_borel_diagnostic(&f, &Point(centre), &[top]).map(|rep| rep.escape_flagged()).unwrap_or(true)
    } else {
        false
    };
    Ok(Development { t0, side, heights, unbounded: false, completeness_caveat, set_distance: Some(sd), grid })
}

impl<T: Real, const D: usize> Development<T, D> {
    /// Refined height at an arbitrary point.
    pub fn height_at(&self, y: &[T; D]) -> Result<T> {
        match &self.set_distance {
            None => Ok(T::infinity()),
            Some(sd) => Ok(sd.refined(y)?.value),
        }
    }

    /// Membership of `(t, y)`, using the refined height.
    pub fn contains(&self, t: T, y: &[T; D]) -> Result<bool> {
        let h = self.height_at(y)?;
        Ok(match self.side {
            Side::Future => t >= self.t0 && t - self.t0 < h,
            Side::Past => t <= self.t0 && self.t0 - t < h,
        })
    }

    /// Membership of `(t, node)` from node heights.
    pub fn contains_node(&self, t: T, idx: usize) -> bool {
        let h = self.heights[idx];
        match self.side {
            Side::Future => t >= self.t0 && t - self.t0 < h,
            Side::Past => t <= self.t0 && self.t0 - t < h,
        }
    }

    /// Time-`t` slice of the development.
    pub fn slice(&self, t: T) -> GridMask<T, D> {
        GridMask::from_fn(&self.grid, |i| self.contains_node(t, i))
    }

    /// Horizon time over a node: `t0 +- height`.
    pub fn horizon_time(&self, idx: usize) -> T {
        match self.side {
            Side::Future => self.t0 + self.heights[idx],
            Side::Past => self.t0 - self.heights[idx],
        }
    }
}

/// A lightlike horizon generator: a minimizing segment lifted to spacetime.
#[derive(Debug, Clone)]
pub struct Generator<T, const D: usize> {
    pub events: Vec<Event<T, D>>,
    /// Largest `|g(v, v)| / (dt^2 + |dx|^2)` over the lifted tangents.
    pub max_null_residual: T,
    /// Node over which the generator ends on the horizon.
    pub node: usize,
}

/// Horizon of `{t0} x A`: the graph of the development height over
/// `{height > 0}`, with crease flags and lifted generators.
#[derive(Debug, Clone)]
pub struct HorizonGraph<T, const D: usize> {
    pub development: Development<T, D>,
    /// Nodes strictly above the slice (height > 0).
    pub support: GridMask<T, D>,
    pub crease: Vec<bool>,
    pub cut: Option<CutLocus<T, D>>,
    pub generators: Vec<Generator<T, D>>,
}

impl<T: Real, const D: usize> HorizonGraph<T, D> {
    pub fn heights(&self) -> &[T] {
        &self.development.heights
    }
}

/// Lifts a path from the set (sweep orientation) to spacetime.
fn lift_generator<T: Real, const D: usize>(
    sd: &SetDistance<T, D>,
    st: &StationaryData<T, D>,
    pts: &[[T; D]],
    t0: T,
    side: Side,
    node: usize,
) -> Generator<T, D> {
    let f = sd.sweep_norm();
    let mut s = T::zero();
    let mut events = vec![Event::new(t0, pts[0])];
    let mut worst = T::zero();
    let fwd = &sd.norm;
    for w in pts.windows(2) {
        let d = linalg::sub(&w[1], &w[0]);
        for (u, _) in gauss2::<T>() {
            let x = linalg::axpy(&w[0], u, &d);
            // spatial tangent of the future-directed generator
            let dx = match side {
                Side::Future => d,
                Side::Past => linalg::scale(&d, -T::one()),
            };
            let v = SpacetimeVector { dt: fwd.eval(&x, &dx), dx };
            let sc = v.dt * v.dt + linalg::dot(&v.dx, &v.dx);
            if sc > T::zero() {
                worst = worst.max(st.product(&x, &v, &v).abs() / sc);
            }
        }
        s = s + chord_length(f, &w[0], &d);
        let t = match side {
            Side::Future => t0 + s,
            Side::Past => t0 - s,
        };
        events.push(Event::new(t, w[1]));
    }
    Generator { events, max_null_residual: worst, node }
}

/// Horizon with up to `max_generators` generators over evenly spread support
/// nodes, plus every family at crease nodes.
pub fn horizon<T: Real, const D: usize>(
    r: &RandersData<T, D>,
    a: &RegionMask<T, D>,
    t0: T,
    side: Side,
) -> Result<HorizonGraph<T, D>> {
    horizon_with(r, a, t0, side, 24)
}

pub fn horizon_with<T: Real, const D: usize>(
    r: &RandersData<T, D>,
    a: &RegionMask<T, D>,
    t0: T,
    side: Side,
    max_generators: usize,
) -> Result<HorizonGraph<T, D>> {
    let dev = cauchy_development(r, a, t0, side)?;
    let grid = dev.grid.clone();
    let support = GridMask::from_fn(&grid, |i| dev.heights[i] > T::zero());
    let Some(sd) = dev.set_distance.clone() else {
        return Ok(HorizonGraph { crease: vec![false; grid.node_count()], development: dev, support, cut: None, generators: vec![] });
    };
    let cut = cut_locus(&sd);
    let crease: Vec<bool> = (0..grid.node_count()).map(|i| support.inside[i] && cut.flagged.inside[i]).collect();
    let st = stationary_from_randers(r)?;
    let nodes = support.nodes();
    let stride = (nodes.len() / max_generators.max(1)).max(1);
    let mut picks: Vec<(usize, bool)> = nodes.iter().step_by(stride).map(|&i| (i, false)).collect();
    picks.extend(nodes.iter().filter(|&&i| crease[i]).map(|&i| (i, true)));
    let generators: Vec<Generator<T, D>> = picks
        .par_iter()
        .flat_map_iter(|&(i, at_crease)| {
            let x = grid.node_coords(i);
            let paths: Vec<Vec<[T; D]>> = if at_crease {
                let fams = sd.families(i, T::lit(1.5) * sd.cell_step(&x));
                distinct_paths(&fams, T::lit(2.0) * grid.max_spacing()).into_iter().map(|k| fams[k].0.clone()).collect()
            } else {
                match sd.refined(&x) {
                    Ok(est) => {
                        let mut p = est.curve.points;
                        if sd.orientation == SetOrientation::ToSet {
                            p.reverse();
                        }
                        vec![p]
                    }
                    Err(_) => vec![],
                }
            };
            paths
                .into_iter()
                .filter(|p| p.len() >= 2)
                .map(|p| lift_generator(&sd, &st, &p, t0, side, i))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(HorizonGraph { development: dev, support, crease, cut: Some(cut), generators })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{euclidean, Field};

    fn disk_chart(res: usize) -> Chart<f64, 2> {
        Chart::rectangle([(-1.2, 1.2), (-1.2, 1.2)], res).unwrap()
    }

    fn flat(chart: Chart<f64, 2>) -> FinslerNorm<f64, 2> {
        FinslerNorm::forward(RandersData::new(euclidean(), Field::constant([0.0, 0.0]), chart))
    }

    fn outside_unit_disk(chart: &Chart<f64, 2>) -> RegionMask<f64, 2> {
        RegionMask::from_level(
            chart,
            ScalarField::with_gradient(
                |x: &[f64; 2]| 1.0 - (x[0] * x[0] + x[1] * x[1]).sqrt(),
                |x: &[f64; 2]| {
                    let r = (x[0] * x[0] + x[1] * x[1]).sqrt().max(1e-300);
                    [-x[0] / r, -x[1] / r]
                },
            ),
        )
    }

    #[test]
    fn region_boundary_and_complement() {
        let chart = disk_chart(25);
        let c = outside_unit_disk(&chart);
        assert!(c.closed && !c.boundary.is_empty());
        for &b in &c.boundary {
            assert!(c.mask.inside[b]);
        }
        let a = c.complement();
        assert!(!a.closed);
        assert!(a.contains(&[0.0, 0.0]) && !a.contains(&[1.0, 0.0]) && c.contains(&[1.0, 0.0]));
        let p = c.project_to_boundary(&[0.3, 0.4]);
        assert!((linalg::norm(&p) - 1.0).abs() < 1e-12);
        let empty = RegionMask::from_mask(GridMask::from_fn(&chart, |_| false), true);
        assert!(matches!(distance_to_set(&flat(chart), &empty, SetOrientation::FromSet), Err(Error::EmptySet(_))));
    }

    #[test]
    fn radial_distance_to_complement() {
        let chart = disk_chart(49);
        let c = outside_unit_disk(&chart);
        let sd = distance_to_set(&flat(chart), &c, SetOrientation::FromSet).unwrap();
        for p in [[0.5, 0.0], [0.1, -0.3], [-0.6, 0.45], [0.0, 0.0]] {
            let est = sd.refined(&p).unwrap();
            let exact = 1.0 - linalg::norm(&p);
            assert!((est.value - exact).abs() < 1e-3, "{p:?}: {} vs {exact}", est.value);
        }
        assert_eq!(sd.refined(&[1.1, 0.0]).unwrap().value, 0.0);
    }

    #[test]
    fn single_point_set_matches_point_field() {
        let chart = disk_chart(21);
        let f = flat(chart.clone());
        let centre = chart.nearest_node(&[0.0, 0.0]);
        let c = RegionMask::from_mask(GridMask::from_fn(&chart, |i| i == centre), true);
        let sd = distance_to_set(&f, &c, SetOrientation::FromSet).unwrap();
        let pf = DistanceField::from_nodes(&f, &[centre], Direction::Forward).unwrap();
        assert_eq!(sd.field.values, pf.values);
    }

    #[test]
    fn radial_segments_and_cut_locus() {
        let chart = disk_chart(33);
        let c = outside_unit_disk(&chart);
        let sd = distance_to_set(&flat(chart.clone()), &c, SetOrientation::FromSet).unwrap();
        let one = minimizing_segments(&sd, &Point([0.5, 0.0]), 4).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].length - 0.5).abs() < 1e-3);
        let many = minimizing_segments(&sd, &Point([0.0, 0.0]), 6).unwrap();
        assert!(many.len() >= 2);
        let cut = cut_locus(&sd);
        let spacing = chart.max_spacing();
        for i in cut.flagged.nodes() {
            assert!(linalg::norm(&chart.node_coords(i)) <= 2.0 * spacing + 1e-12);
        }
        assert!(cut.flagged.inside[chart.nearest_node(&[0.0, 0.0])]);
        assert!(cut.agreement > 0.99);
    }

    #[test]
    fn half_plane_has_no_cut_locus() {
        let chart = disk_chart(25);
        let c = RegionMask::from_level(&chart, ScalarField::linear(0.0, [0.0, 1.0]));
        let sd = distance_to_set(&flat(chart), &c, SetOrientation::FromSet).unwrap();
        assert_eq!(cut_locus(&sd).flagged_count(), 0);
    }

    #[test]
    fn to_set_uses_reverse_metric() {
        let chart: Chart<f64, 2> = Chart::rectangle([(-2.0, 2.0), (-1.0, 1.0)], 33).unwrap();
        let f = FinslerNorm::forward(RandersData::new(euclidean(), Field::constant([0.5, 0.0]), chart.clone()));
        let c = RegionMask::from_level(&chart, ScalarField::linear(0.0, [1.0, 0.0]));
        let from = distance_to_set(&f, &c, SetOrientation::FromSet).unwrap();
        let to = distance_to_set(&f, &c, SetOrientation::ToSet).unwrap();
        // from {x <= 0} to (1, 0) moves in +x: (1 + a); back to the set: (1 - a)
        assert!((from.refined(&[1.0, 0.0]).unwrap().value - 1.5).abs() < 1e-6);
        assert!((to.refined(&[1.0, 0.0]).unwrap().value - 0.5).abs() < 1e-6);
    }

    #[test]
    fn minkowski_development_triangle() {
        let chart = Chart::new([(-1.5, 1.5)], [false], [61]).unwrap();
        let r = RandersData::new(euclidean(), Field::constant([0.0]), chart.clone());
        let a = RegionMask::open_from_level(&chart, ScalarField::closed(|y: &[f64; 1]| y[0].abs() - 1.0));
        let dev = cauchy_development(&r, &a, 0.0, Side::Future).unwrap();
        for i in 0..chart.node_count() {
            let y = chart.node_coords(i)[0];
            assert!((dev.heights[i] - (1.0 - y.abs()).max(0.0)).abs() < 1e-12);
        }
        assert!(dev.contains(0.5, &[0.2]).unwrap() && !dev.contains(0.9, &[0.2]).unwrap());
        let h = horizon(&r, &a, 0.0, Side::Future).unwrap();
        let apex = chart.nearest_node(&[0.0]);
        assert!(h.crease[apex]);
        assert!(h.generators.iter().all(|g| g.max_null_residual < 1e-8));
        let at_apex = h.generators.iter().filter(|g| g.node == apex).count();
        assert!(at_apex >= 2);
        for g in &h.generators {
            let last = g.events.last().unwrap();
            assert!((last.t - h.development.heights[g.node]).abs() < 1e-9);
        }
        let whole = RegionMask::from_mask(GridMask::from_fn(&chart, |_| true), false);
        assert!(cauchy_development(&r, &whole, 0.0, Side::Future).unwrap().unbounded);
    }

    #[test]
    fn constant_form_development_slopes() {
        let chart = Chart::new([(-1.5, 1.5)], [false], [121]).unwrap();
        let a_coef: f64 = 0.5;
        let r = RandersData::new(euclidean(), Field::constant([a_coef]), chart.clone());
        let a = RegionMask::open_from_level(&chart, ScalarField::closed(|y: &[f64; 1]| y[0].abs() - 1.0));
        let fut = cauchy_development(&r, &a, 0.0, Side::Future).unwrap();
        let past = cauchy_development(&r, &a, 0.0, Side::Past).unwrap();
        for y in [-0.7f64, -0.2, 0.0, 0.3, 0.8] {
            // from x = -1 moving right costs (1 + a), from x = 1 moving left (1 - a)
            let expect_future = ((1.0 + a_coef) * (y + 1.0)).min((1.0 - a_coef) * (1.0 - y));
            let expect_past = ((1.0 - a_coef) * (y + 1.0)).min((1.0 + a_coef) * (1.0 - y));
            assert!((fut.height_at(&[y]).unwrap() - expect_future).abs() < 1e-6, "{y}");
            assert!((past.height_at(&[y]).unwrap() - expect_past).abs() < 1e-6, "{y}");
        }
    }

    #[test]
    fn exponent_of_counts() {
        assert!((refinement_exponent(32, 10, 64, 20) - 1.0).abs() < 1e-12);
        assert!((refinement_exponent(32, 10, 64, 40) - 2.0).abs() < 1e-12);
    }
}
