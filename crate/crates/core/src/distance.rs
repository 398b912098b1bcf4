//! Non-symmetric distances on the chart grid: directed Dijkstra sweeps, path
//! refinement by discrete energy minimization, balls, escape diagnostics and
//! the length metric generated by the symmetrized distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::chart::{Chart, Point};
use crate::curve::{gauss2, SampledCurve};
use crate::error::{Error, Result};
use crate::finsler::FinslerNorm;
use crate::linalg;
use crate::scalar::Real;

/// Which way distances are measured relative to the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `d(source, x)`
    Forward,
    /// `d(x, source)`
    Backward,
}

/// Accuracy level of a point-to-point distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Coarse,
    Refined,
}

/// Kind of metric ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallKind {
    Forward,
    Backward,
    Symmetrized,
}

/// Sweep and refinement settings.
#[derive(Debug, Clone, Copy)]
pub struct DistanceOptions<T> {
    /// Max-norm radius of the primitive neighbor stencil.
    pub stencil_radius: usize,
    /// Stop refinement once the relative length change falls below this.
    pub refine_tol: T,
    pub max_refine_iters: usize,
}

impl<T: Real> Default for DistanceOptions<T> {
    fn default() -> Self {
        DistanceOptions { stencil_radius: 2, refine_tol: T::lit(1e-6), max_refine_iters: 200 }
    }
}

/// `F`-length of the straight chord `x -> x + d` by two-point Gauss quadrature.
#[inline]
pub fn chord_length<T: Real, const D: usize>(f: &FinslerNorm<T, D>, x: &[T; D], d: &[T; D]) -> T {
    let mut s = T::zero();
    for (u, w) in gauss2::<T>() {
        s = s + w * f.eval(&linalg::axpy(x, u, d), d);
    }
    s
}

#[derive(Clone, Copy, PartialEq)]
struct Entry<T> {
    value: T,
    node: usize,
}

impl<T: PartialOrd> Eq for Entry<T> {}

impl<T: PartialOrd> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .partial_cmp(&self.value)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: PartialOrd> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Grid of distances from (or to) a source point or node set.
#[derive(Debug, Clone)]
pub struct DistanceField<T, const D: usize> {
    pub grid: Chart<T, D>,
    pub direction: Direction,
    /// The norm the sweep ran with: `F` for forward fields, its reverse otherwise.
    pub sweep_norm: FinslerNorm<T, D>,
    pub values: Vec<T>,
    /// True where the value cannot be undercut by a path leaving the chart.
    pub reached: Vec<bool>,
    /// Lower bound of `F(v) / |v|` over the grid, used to bound escaping paths.
    pub norm_floor: T,
    pub parent: Vec<Option<usize>>,
    /// Seed node each value descends from.
    pub root: Vec<usize>,
    /// Smallest value on a non-periodic face; any path leaving the chart is at
    /// least this long before it exits.
    pub escape_radius: Option<T>,
    /// Off-grid source point, if any.
    pub source_point: Option<[T; D]>,
}

/// Nodes within `radius` cells of `x` (wrapping periodic axes).
pub(crate) fn nodes_near<T: Real, const D: usize>(grid: &Chart<T, D>, x: &[T; D], radius: isize) -> Vec<usize> {
    let (base, _) = grid.locate(x);
    let b = grid.flat_index(&base);
    let side = (2 * radius + 2) as usize;
    let mut out = Vec::new();
    for k in 0..side.pow(D as u32) {
        let mut rem = k;
        let mut off = [0isize; D];
        for o in off.iter_mut() {
            *o = (rem % side) as isize - radius;
            rem /= side;
        }
        if let Some(n) = grid.neighbor(b, &off) {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    out
}

struct Sweep<T> {
    values: Vec<T>,
    parent: Vec<Option<usize>>,
    root: Vec<usize>,
    escape: Option<T>,
}

fn dijkstra<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    grid: &Chart<T, D>,
    seeds: &[(usize, T)],
    radius: usize,
    targets: Option<&[usize]>,
) -> Sweep<T> {
    let n = grid.node_count();
    let stencil = Chart::<T, D>::stencil(radius);
    let offsets: Vec<[T; D]> = stencil.iter().map(|o| grid.offset_vector(o)).collect();
    let mut values = vec![T::infinity(); n];
    let mut parent = vec![None; n];
    let mut root: Vec<usize> = (0..n).collect();
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &(s, v) in seeds {
        if v < values[s] {
            values[s] = v;
            heap.push(Entry { value: v, node: s });
        }
    }
    let mut target_flags = vec![false; if targets.is_some() { n } else { 0 }];
    let mut remaining = targets.map(|t| {
        for &i in t {
            target_flags[i] = true;
        }
        target_flags.iter().filter(|b| **b).count()
    });
    let mut escape = None;
    while let Some(Entry { value, node }) = heap.pop() {
        if settled[node] || value > values[node] {
            continue;
        }
        settled[node] = true;
        if escape.is_none() && grid.is_truncation_node(node) {
            escape = Some(value);
        }
        if let Some(r) = remaining.as_mut() {
            if target_flags[node] {
                *r -= 1;
                if *r == 0 {
                    break;
                }
            }
        }
        let x = grid.node_coords(node);
        for (off, d) in stencil.iter().zip(&offsets) {
            if let Some(m) = grid.neighbor(node, off) {
                if settled[m] {
                    continue;
                }
                let cand = value + chord_length(f, &x, d);
                if cand < values[m] {
                    values[m] = cand;
                    parent[m] = Some(node);
                    root[m] = root[node];
                    heap.push(Entry { value: cand, node: m });
                }
            }
        }
    }
    Sweep { values, parent, root, escape }
}

fn point_seeds<T: Real, const D: usize>(f: &FinslerNorm<T, D>, grid: &Chart<T, D>, p: &[T; D]) -> Vec<(usize, T)> {
    nodes_near(grid, p, 1)
        .into_iter()
        .map(|i| {
            let x = grid.node_coords(i);
            (i, chord_length(f, p, &grid.displacement(p, &x)))
        })
        .collect()
}

impl<T: Real, const D: usize> DistanceField<T, D> {
    /// Field of `d(p, .)` (forward) or `d(., p)` (backward) over the chart grid.
    pub fn from_point(f: &FinslerNorm<T, D>, p: &Point<T, D>, direction: Direction) -> Result<Self> {
        Self::from_point_with(f, p, direction, &DistanceOptions::default())
    }

    pub fn from_point_with(
        f: &FinslerNorm<T, D>,
        p: &Point<T, D>,
        direction: Direction,
        opts: &DistanceOptions<T>,
    ) -> Result<Self> {
        let grid = f.chart().clone();
        let p = grid.normalize(p)?.0;
        let sweep_norm = sweep_norm(f, direction);
        let seeds = point_seeds(&sweep_norm, &grid, &p);
        let sweep = dijkstra(&sweep_norm, &grid, &seeds, opts.stencil_radius, None);
        Ok(Self::assemble(grid, direction, sweep_norm, sweep, Some(p)))
    }

    /// Field of the distance from (forward) or to (backward) a node set.
    pub fn from_nodes(f: &FinslerNorm<T, D>, nodes: &[usize], direction: Direction) -> Result<Self> {
        Self::from_nodes_with(f, nodes, direction, &DistanceOptions::default())
    }

    pub fn from_nodes_with(
        f: &FinslerNorm<T, D>,
        nodes: &[usize],
        direction: Direction,
        opts: &DistanceOptions<T>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptySet("distance source set".into()));
        }
        let grid = f.chart().clone();
        let sweep_norm = sweep_norm(f, direction);
        let seeds: Vec<(usize, T)> = nodes.iter().map(|&i| (i, T::zero())).collect();
        let sweep = dijkstra(&sweep_norm, &grid, &seeds, opts.stencil_radius, None);
        Ok(Self::assemble(grid, direction, sweep_norm, sweep, None))
    }

    fn assemble(
        grid: Chart<T, D>,
        direction: Direction,
        sweep_norm: FinslerNorm<T, D>,
        sweep: Sweep<T>,
        source_point: Option<[T; D]>,
    ) -> Self {
        let escape = sweep.escape;
        let floor = norm_floor(&sweep_norm);
        let reached = sweep
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.is_finite() && certified(*v, escape, floor, &grid, &grid.node_coords(i)))
            .collect();
        DistanceField {
            grid,
            direction,
            sweep_norm,
            values: sweep.values,
            reached,
            norm_floor: floor,
            parent: sweep.parent,
            root: sweep.root,
            escape_radius: escape,
            source_point,
        }
    }

    /// Value at an arbitrary point: best node value plus the chord to the point.
    pub fn value_at(&self, x: &[T; D]) -> T {
        self.best_node_for(x).1
    }

    fn best_node_for(&self, x: &[T; D]) -> (usize, T) {
        let x = self.grid.wrap_periodic(x);
        let mut best = (usize::MAX, T::infinity());
        for i in nodes_near(&self.grid, &x, 1) {
            let y = self.grid.node_coords(i);
            let v = self.values[i] + chord_length(&self.sweep_norm, &y, &self.grid.displacement(&y, &x));
            if v < best.1 {
                best = (i, v);
            }
        }
        if let Some(s) = self.source_point {
            if linalg::norm(&self.grid.displacement(&s, &x)) <= self.grid.max_spacing() {
                let v = chord_length(&self.sweep_norm, &s, &self.grid.displacement(&s, &x));
                if v < best.1 {
                    best = (usize::MAX, v);
                }
            }
        }
        best
    }

    /// Node chain from the seed set to `x` in sweep order (source side first),
    /// as unwrapped coordinates ending exactly at `x`.
    pub fn sweep_path(&self, x: &[T; D]) -> Vec<[T; D]> {
        let x = self.grid.wrap_periodic(x);
        let (node, _) = self.best_node_for(&x);
        let mut chain = Vec::new();
        let mut cur = if node == usize::MAX { None } else { Some(node) };
        while let Some(c) = cur {
            chain.push(c);
            cur = self.parent[c];
        }
        chain.reverse();
        let mut pts: Vec<[T; D]> = Vec::with_capacity(chain.len() + 2);
        if let Some(s) = self.source_point {
            pts.push(s);
        }
        for &c in &chain {
            let y = self.grid.node_coords(c);
            match pts.last() {
                Some(prev) => {
                    let d = self.grid.displacement(prev, &y);
                    pts.push(linalg::add(prev, &d));
                }
                None => pts.push(y),
            }
        }
        match pts.last() {
            Some(prev) => {
                let d = self.grid.displacement(prev, &x);
                pts.push(linalg::add(prev, &d));
            }
            None => pts.push(x),
        }
        pts.dedup_by(|a, b| linalg::dist(a, b) == T::zero());
        pts
    }

    /// Path realizing the coarse value, oriented along `F` (forward fields run
    /// source to `x`, backward fields `x` to source).
    pub fn path_to(&self, x: &[T; D]) -> Vec<[T; D]> {
        let mut pts = self.sweep_path(x);
        if self.direction == Direction::Backward {
            pts.reverse();
        }
        pts
    }

    pub fn is_reached(&self, x: &[T; D]) -> bool {
        certified(self.value_at(x), self.escape_radius, self.norm_floor, &self.grid, x)
    }
}

/// Euclidean distance from `x` to the nearest non-periodic face.
fn truncation_gap<T: Real, const D: usize>(grid: &Chart<T, D>, x: &[T; D]) -> T {
    let mut gap = T::infinity();
    for a in 0..D {
        if !grid.is_periodic(a) {
            gap = gap.min(x[a] - grid.lower(a)).min(grid.upper(a) - x[a]);
        }
    }
    gap.max(T::zero())
}

/// `min (1 - |omega|_h) sqrt(lambda_min(h))` over the grid nodes: `F(v) >= floor |v|`.
pub fn norm_floor<T: Real, const D: usize>(f: &FinslerNorm<T, D>) -> T {
    let grid = f.chart();
    let data = f.data();
    (0..grid.node_count())
        .map(|i| {
            let x = grid.node_coords(i);
            let (h, _) = data.fields_at(&x);
            let lam = linalg::sym_eigenvalues(&h)[0].max(T::zero());
            (T::one() - data.omega_norm_at(&x)).max(T::zero()) * lam.sqrt()
        })
        .fold(T::infinity(), T::min)
}

/// A path that leaves the chart runs at least `escape` to get out and at least
/// `floor * gap` to come back to `x`; values below that sum are certified.
fn certified<T: Real, const D: usize>(value: T, escape: Option<T>, floor: T, grid: &Chart<T, D>, x: &[T; D]) -> bool {
    match escape {
        None => true,
        Some(e) => {
            let back = floor * truncation_gap(grid, x);
            value <= e + back || !back.is_finite()
        }
    }
}

fn sweep_norm<T: Real, const D: usize>(f: &FinslerNorm<T, D>, direction: Direction) -> FinslerNorm<T, D> {
    match direction {
        Direction::Forward => f.clone(),
        Direction::Backward => f.reverse(),
    }
}

// ----- refinement -----

fn polyline_lengths<T: Real, const D: usize>(f: &FinslerNorm<T, D>, pts: &[[T; D]]) -> Vec<T> {
    pts.windows(2).map(|w| chord_length(f, &w[0], &linalg::sub(&w[1], &w[0]))).collect()
}

/// Resamples a polyline at `m + 1` points evenly spaced in `F`-length.
pub(crate) fn resample_by_length<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    pts: &[[T; D]],
    m: usize,
) -> Vec<[T; D]> {
    if pts.len() < 2 {
        return vec![pts[0]; m + 1];
    }
    let seg = polyline_lengths(f, pts);
    let total: T = seg.iter().copied().sum();
    let mut out = Vec::with_capacity(m + 1);
    out.push(pts[0]);
    let mut acc = T::zero();
    let mut i = 0;
    for k in 1..m {
        let target = total * T::from_count(k) / T::from_count(m);
        while i + 1 < seg.len() && acc + seg[i] < target {
            acc = acc + seg[i];
            i += 1;
        }
        let u = if seg[i] > T::zero() { ((target - acc) / seg[i]).max(T::zero()).min(T::one()) } else { T::zero() };
        out.push(linalg::lerp(&pts[i], &pts[i + 1], u));
    }
    out.push(*pts.last().unwrap());
    out
}

/// Constraint keeping the first node on a hypersurface: `project` maps a point
/// onto it and `normal` gives its unit normal.
#[derive(Clone, Copy)]
pub(crate) struct StartConstraint<'a, T, const D: usize> {
    pub project: &'a (dyn Fn(&[T; D]) -> [T; D] + Sync),
    pub normal: &'a (dyn Fn(&[T; D]) -> [T; D] + Sync),
}

pub(crate) type StartProjection<'a, T, const D: usize> = Option<StartConstraint<'a, T, D>>;

/// Restricts the first block row and column to the tangent space of the start
/// constraint, adding the curvature term `-(g . n) dn` of the multiplier.
fn constrain_start<T: Real, const D: usize>(
    c: &StartConstraint<'_, T, D>,
    x: &[T; D],
    scale: T,
    diag: &mut [[T; D]; D],
    sup: Option<&mut [[T; D]; D]>,
    sub: Option<&mut [[T; D]; D]>,
    grad: &mut [T; D],
) {
    let n = (c.normal)(x);
    let p: [[T; D]; D] = linalg::mat_sub(&linalg::identity(), &linalg::outer(&n, &n));
    let gn = linalg::dot(grad, &n);
    // derivative of the unit normal by central differences
    let h = T::lit(1e-5) * scale;
    let mut dn = [[T::zero(); D]; D];
    for j in 0..D {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] = xp[j] + h;
        xm[j] = xm[j] - h;
        let (np, nm) = ((c.normal)(&xp), (c.normal)(&xm));
        for i in 0..D {
            dn[i][j] = (np[i] - nm[i]) / (h + h);
        }
    }
    let curv = linalg::mat_scale(&dn, -gn);
    let hess = linalg::mat_add(diag, &curv);
    let hess = linalg::mat_add(&hess, &linalg::transpose(&hess));
    let hess = linalg::mat_scale(&hess, T::lit(0.5));
    let mul = |a: &[[T; D]; D], b: &[[T; D]; D]| -> [[T; D]; D] {
        std::array::from_fn(|r| std::array::from_fn(|k| (0..D).map(|m| a[r][m] * b[m][k]).sum()))
    };
    let pinned = (0..D).map(|k| diag[k][k].abs()).sum::<T>() / T::from_count(D) + T::machine_eps();
    *diag = linalg::mat_add(&mul(&mul(&p, &hess), &p), &linalg::mat_scale(&linalg::outer(&n, &n), pinned));
    if let Some(s) = sup {
        *s = mul(&p, s);
    }
    if let Some(s) = sub {
        *s = mul(s, &p);
    }
    *grad = linalg::mat_vec(&p, grad);
}

fn keep_in_box<T: Real, const D: usize>(chart: &Chart<T, D>, x: &[T; D]) -> [T; D] {
    std::array::from_fn(|a| if chart.is_periodic(a) { x[a] } else { x[a].max(chart.lower(a)).min(chart.upper(a)) })
}

/// Value, gradient and Hessian of `l(a, b)^2` with respect to `(a, b)`.
fn segment_model<T: Real, const D: usize>(f: &FinslerNorm<T, D>, a: &[T; D], b: &[T; D], h: T) -> (T, Vec<T>, Vec<T>) {
    let n = 2 * D;
    let e = |z: &[T]| {
        let aa: [T; D] = std::array::from_fn(|i| z[i]);
        let bb: [T; D] = std::array::from_fn(|i| z[D + i]);
        let l = chord_length(f, &aa, &linalg::sub(&bb, &aa));
        l * l
    };
    let mut z: Vec<T> = a.iter().chain(b.iter()).copied().collect();
    let e0 = e(&z);
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n * n];
    let two = T::lit(2.0);
    let mut ep = vec![T::zero(); n];
    let mut em = vec![T::zero(); n];
    for i in 0..n {
        let zi = z[i];
        z[i] = zi + h;
        ep[i] = e(&z);
        z[i] = zi - h;
        em[i] = e(&z);
        z[i] = zi;
        grad[i] = (ep[i] - em[i]) / (two * h);
        hess[i * n + i] = (ep[i] - two * e0 + em[i]) / (h * h);
    }
    for i in 0..n {
        for j in 0..i {
            let (zi, zj) = (z[i], z[j]);
            let mut corner = |si: T, sj: T| {
                z[i] = zi + si * h;
                z[j] = zj + sj * h;
                let v = e(&z);
                z[i] = zi;
                z[j] = zj;
                v
            };
            let one = T::one();
            let v = (corner(one, one) - corner(one, -one) - corner(-one, one) + corner(-one, -one)) / (T::lit(4.0) * h * h);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    (e0, grad, hess)
}

/// Block-tridiagonal solve with `D x D` blocks: `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
fn block_tridiagonal<T: Real, const D: usize>(
    sub: &[[[T; D]; D]],
    diag: &[[[T; D]; D]],
    sup: &[[[T; D]; D]],
    rhs: &[[T; D]],
) -> Option<Vec<[T; D]>> {
    let n = diag.len();
    let mut dp = diag.to_vec();
    let mut rp = rhs.to_vec();
    for i in 1..n {
        let inv = linalg::inverse(&dp[i - 1])?;
        // w = sub[i] * inv(dp[i-1])
        let w: [[T; D]; D] = std::array::from_fn(|r| std::array::from_fn(|c| (0..D).map(|k| sub[i][r][k] * inv[k][c]).sum()));
        let wc: [[T; D]; D] =
            std::array::from_fn(|r| std::array::from_fn(|c| (0..D).map(|k| w[r][k] * sup[i - 1][k][c]).sum()));
        dp[i] = linalg::mat_sub(&dp[i], &wc);
        rp[i] = linalg::sub(&rp[i], &linalg::mat_vec(&w, &rp[i - 1]));
    }
    let mut x = vec![[T::zero(); D]; n];
    x[n - 1] = linalg::solve(&dp[n - 1], &rp[n - 1])?;
    for i in (0..n - 1).rev() {
        let r = linalg::sub(&rp[i], &linalg::mat_vec(&sup[i], &x[i + 1]));
        x[i] = linalg::solve(&dp[i], &r)?;
    }
    Some(x)
}

/// Minimizes the discrete energy `sum l_i^2` of a polyline with fixed end (and
/// fixed or projected start) by Levenberg-Marquardt steps. Returns the refined
/// points and their total `F`-length.
pub(crate) fn refine_polyline<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    initial: &[[T; D]],
    start: StartProjection<'_, T, D>,
    opts: &DistanceOptions<T>,
) -> (Vec<[T; D]>, T) {
    let nodes = initial.len();
    let m = (2 * nodes).clamp(16, 128);
    let chart = f.chart();
    let mut pts = resample_by_length(f, initial, m);
    if let Some(c) = start {
        pts[0] = (c.project)(&pts[0]);
    }
    let total = |p: &[[T; D]]| polyline_lengths(f, p).into_iter().sum::<T>();
    let energy = |p: &[[T; D]]| polyline_lengths(f, p).into_iter().map(|l| l * l).sum::<T>();
    let mut length = total(&pts);
    let mut e_cur = energy(&pts);
    if !(length > T::zero()) {
        return (pts, length);
    }
    let first = if start.is_some() { 0 } else { 1 };
    let free = m - first; // variable nodes first..m-1
    let mut lambda = T::lit(1e-3);
    let scale_h = T::lit(1e-3);
    for _ in 0..opts.max_refine_iters {
        let models: Vec<(T, Vec<T>, Vec<T>)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let d = linalg::norm(&linalg::sub(&pts[i + 1], &pts[i]));
                let h = (scale_h * d).max(T::lit(1e-9) * chart.max_extent());
                segment_model(f, &pts[i], &pts[i + 1], h)
            })
            .collect();
        let zero_block = [[T::zero(); D]; D];
        let mut diag = vec![zero_block; free];
        let mut sub = vec![zero_block; free];
        let mut sup = vec![zero_block; free];
        let mut grad = vec![[T::zero(); D]; free];
        let n2 = 2 * D;
        for (i, (_, g, hs)) in models.iter().enumerate() {
            // segment i couples nodes i (a) and i+1 (b)
            let ia = i as isize - first as isize;
            let ib = ia + 1;
            let var = |k: isize| k >= 0 && (k as usize) < free;
            for r in 0..D {
                if var(ia) {
                    grad[ia as usize][r] = grad[ia as usize][r] + g[r];
                }
                if var(ib) {
                    grad[ib as usize][r] = grad[ib as usize][r] + g[D + r];
                }
                for c in 0..D {
                    if var(ia) {
                        diag[ia as usize][r][c] = diag[ia as usize][r][c] + hs[r * n2 + c];
                    }
                    if var(ib) {
                        diag[ib as usize][r][c] = diag[ib as usize][r][c] + hs[(D + r) * n2 + D + c];
                    }
                    if var(ia) && var(ib) {
                        sup[ia as usize][r][c] = sup[ia as usize][r][c] + hs[r * n2 + D + c];
                        sub[ib as usize][r][c] = sub[ib as usize][r][c] + hs[(D + r) * n2 + c];
                    }
                }
            }
        }
        if let Some(c) = start.as_ref() {
            constrain_start(c, &pts[0], chart.max_extent(), &mut diag[0], sup.get_mut(0), sub.get_mut(1), &mut grad[0]);
        }
        let mean_diag = diag.iter().map(|b| (0..D).map(|k| b[k][k].abs()).sum::<T>()).sum::<T>()
            / T::from_count(free * D).max(T::one());
        let mut accepted = false;
        for _ in 0..20 {
            let mut damped = diag.clone();
            for b in damped.iter_mut() {
                for k in 0..D {
                    b[k][k] = b[k][k] + lambda * mean_diag.max(T::machine_eps());
                }
            }
            let rhs: Vec<[T; D]> = grad.iter().map(|g| linalg::scale(g, -T::one())).collect();
            let step = match block_tridiagonal(&sub, &damped, &sup, &rhs) {
                Some(s) => s,
                None => {
                    lambda = lambda * T::lit(10.0);
                    continue;
                }
            };
            let mut trial = pts.clone();
            for (k, s) in step.iter().enumerate() {
                let idx = k + first;
                trial[idx] = keep_in_box(chart, &linalg::add(&trial[idx], s));
            }
            if let Some(c) = start {
                trial[0] = (c.project)(&trial[0]);
            }
            let e_new = energy(&trial);
            if e_new < e_cur {
                pts = trial;
                e_cur = e_new;
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-9));
                accepted = true;
                break;
            }
            lambda = lambda * T::lit(4.0);
        }
        if !accepted {
            break;
        }
        let new_len = total(&pts);
        let change = (length - new_len).abs() / length;
        length = new_len;
        if change < opts.refine_tol {
            break;
        }
    }
    (pts, length)
}

/// A point-to-point distance estimate.
#[derive(Debug, Clone)]
pub struct DistanceEstimate<T, const D: usize> {
    pub value: T,
    pub coarse: T,
    /// False when a path leaving the chart could be shorter; `value` is then an
    /// upper bound and `escape_radius` a lower bound.
    pub reached: bool,
    pub escape_radius: Option<T>,
    /// Realizing path from `p` to `q` in unwrapped coordinates, parameter `[0, 1]`.
    pub curve: SampledCurve<T, D>,
}

/// The straight path `x -> x + d` cut into pieces no longer than a grid cell,
/// with its `F`-length.
fn straight_path<T: Real, const D: usize>(f: &FinslerNorm<T, D>, x: &[T; D], d: &[T; D]) -> (T, Vec<[T; D]>) {
    let grid = f.chart();
    let cells = (0..D).map(|a| (d[a] / grid.spacing(a)).abs()).fold(T::zero(), T::max);
    let n = cells.ceil().to_f64_lossy().max(1.0) as usize;
    let step = linalg::scale(d, T::one() / T::from_count(n));
    let pts: Vec<[T; D]> = (0..=n).map(|k| linalg::axpy(x, T::from_count(k), &step)).collect();
    let len = pts.windows(2).map(|w| chord_length(f, &w[0], &step)).sum();
    (len, pts)
}

/// Coarse sweep from `p` stopped once the cells around `q` are settled.
fn coarse_path<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &[T; D],
    q: &[T; D],
    opts: &DistanceOptions<T>,
) -> (T, Vec<[T; D]>, Option<T>) {
    let grid = f.chart();
    let seeds = point_seeds(f, grid, p);
    let targets = nodes_near(grid, q, 1);
    let sweep = dijkstra(f, grid, &seeds, opts.stencil_radius, Some(&targets));
    let field = DistanceField {
        grid: grid.clone(),
        direction: Direction::Forward,
        sweep_norm: f.clone(),
        reached: vec![true; sweep.values.len()],
        norm_floor: T::zero(),
        values: sweep.values,
        parent: sweep.parent,
        root: sweep.root,
        escape_radius: sweep.escape,
        source_point: Some(*p),
    };
    let value = field.value_at(q);
    let (direct, straight) = straight_path(f, p, &grid.displacement(p, q));
    if direct <= value {
        return (direct, straight, field.escape_radius);
    }
    (value, field.sweep_path(q), field.escape_radius)
}

/// `d(p, q)` at the requested level, with its realizing path.
pub fn forward_distance<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
    level: Level,
) -> Result<DistanceEstimate<T, D>> {
    forward_distance_with(f, p, q, level, &DistanceOptions::default())
}

pub fn forward_distance_with<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
    level: Level,
    opts: &DistanceOptions<T>,
) -> Result<DistanceEstimate<T, D>> {
    let chart = f.chart();
    let a = chart.normalize(p)?.0;
    let b = chart.normalize(q)?.0;
    if linalg::norm(&chart.displacement(&a, &b)) == T::zero() {
        return Ok(DistanceEstimate {
            value: T::zero(),
            coarse: T::zero(),
            reached: true,
            escape_radius: None,
            curve: SampledCurve::constant(a),
        });
    }
    let (coarse, path, escape) = coarse_path(f, &a, &b, opts);
    let (value, pts) = match level {
        Level::Coarse => (coarse, path),
        Level::Refined => {
            let (pts, len) = refine_polyline(f, &path, None, opts);
            if len < coarse {
                (len, pts)
            } else {
                (coarse, path)
            }
        }
    };
    let reached = escape.is_none() || certified(value, escape, norm_floor(f), chart, &b);
    Ok(DistanceEstimate {
        value,
        coarse,
        reached,
        escape_radius: escape,
        curve: SampledCurve::uniform(pts, T::zero(), T::one())?,
    })
}

/// Refined forward distance with its path; the seed source for shooting.
pub fn refined_path<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
) -> Result<DistanceEstimate<T, D>> {
    forward_distance(f, p, q, Level::Refined)
}

/// `d(q, p)`, computed as the forward distance of the reverse norm.
pub fn backward_distance<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
    level: Level,
) -> Result<DistanceEstimate<T, D>> {
    forward_distance(&f.reverse(), p, q, level)
}

/// `ds(p, q) = (d(p, q) + d(q, p)) / 2` from refined distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrizedDistance<T> {
    pub value: T,
    pub forward: T,
    pub backward: T,
    pub reached: bool,
}

pub fn symmetrized_distance<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
) -> Result<SymmetrizedDistance<T>> {
    let fw = forward_distance(f, p, q, Level::Refined)?;
    let bw = forward_distance(f, q, p, Level::Refined)?;
    Ok(SymmetrizedDistance {
        value: T::lit(0.5) * (fw.value + bw.value),
        forward: fw.value,
        backward: bw.value,
        reached: fw.reached && bw.reached,
    })
}

// ----- balls -----

/// Boolean mask over the chart grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMask<T, const D: usize> {
    pub grid: Chart<T, D>,
    pub inside: Vec<bool>,
}

impl<T: Real, const D: usize> GridMask<T, D> {
    pub fn from_fn(grid: &Chart<T, D>, pred: impl Fn(usize) -> bool) -> Self {
        GridMask { grid: grid.clone(), inside: (0..grid.node_count()).map(pred).collect() }
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains_point(&self, x: &[T; D]) -> bool {
        self.inside[self.grid.nearest_node(x)]
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.inside.iter().zip(&other.inside).all(|(a, b)| !*a || *b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        GridMask { grid: self.grid.clone(), inside: self.inside.iter().zip(&other.inside).map(|(a, b)| *a && *b).collect() }
    }

    pub fn complement(&self) -> Self {
        GridMask { grid: self.grid.clone(), inside: self.inside.iter().map(|a| !*a).collect() }
    }

    /// True if any inside node lies on a non-periodic face of the chart.
    pub fn touches_truncation(&self) -> bool {
        self.inside.iter().enumerate().any(|(i, b)| *b && self.grid.is_truncation_node(i))
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.inside.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect()
    }
}

/// Forward and backward coarse fields around `center`, computed concurrently.
pub fn field_pair<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    center: &Point<T, D>,
) -> Result<(DistanceField<T, D>, DistanceField<T, D>)> {
    let (fw, bw) = rayon::join(
        || DistanceField::from_point(f, center, Direction::Forward),
        || DistanceField::from_point(f, center, Direction::Backward),
    );
    Ok((fw?, bw?))
}

/// Half-cell tolerance in distance units at `x`: half the largest norm of a
/// grid step in either direction.
pub fn half_cell<T: Real, const D: usize>(f: &FinslerNorm<T, D>, x: &[T; D]) -> T {
    let grid = f.chart();
    let mut m = T::zero();
    for a in 0..D {
        let e = linalg::scale(&linalg::unit::<T, D>(a), grid.spacing(a));
        m = m.max(f.eval(x, &e)).max(f.eval(x, &linalg::scale(&e, -T::one())));
    }
    T::lit(0.5) * m
}

fn mask_from_fields<T: Real, const D: usize>(
    fw: &DistanceField<T, D>,
    bw: &DistanceField<T, D>,
    r: T,
    kind: BallKind,
    closed_tol: Option<T>,
) -> GridMask<T, D> {
    let value = |i: usize| match kind {
        BallKind::Forward => fw.values[i],
        BallKind::Backward => bw.values[i],
        BallKind::Symmetrized => T::lit(0.5) * (fw.values[i] + bw.values[i]),
    };
    match closed_tol {
        None => GridMask::from_fn(&fw.grid, |i| value(i) < r),
        Some(t) => GridMask::from_fn(&fw.grid, |i| value(i) <= r + t),
    }
}

/// Open ball mask `{x : dist < r}` of the given kind.
pub fn ball<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    center: &Point<T, D>,
    r: T,
    kind: BallKind,
) -> Result<GridMask<T, D>> {
    if !(r > T::zero()) {
        return Err(Error::Precondition("ball radius must be positive".into()));
    }
    let (fw, bw) = field_pair(f, center)?;
    Ok(mask_from_fields(&fw, &bw, r, kind, None))
}

/// Closed ball mask `{x : dist <= r + half cell}`.
pub fn closed_ball<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    center: &Point<T, D>,
    r: T,
    kind: BallKind,
) -> Result<GridMask<T, D>> {
    if !(r > T::zero()) {
        return Err(Error::Precondition("ball radius must be positive".into()));
    }
    let (fw, bw) = field_pair(f, center)?;
    let tol = half_cell(f, &center.0);
    Ok(mask_from_fields(&fw, &bw, r, kind, Some(tol)))
}

/// Per-radius result of [`heine_borel_diagnostic`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeineBorelEntry<T> {
    pub radius: T,
    /// `closed B+(r) & closed B-(r)` inside `closed Bs(r)`.
    pub intersection_in_symmetric: bool,
    /// `closed Bs(r)` inside `closed B+(2r) & closed B-(2r)`.
    pub symmetric_in_doubled: bool,
    /// Whether the symmetrized ball reaches a truncation face, per truncation size.
    pub touches: Vec<bool>,
    /// Symmetrized-ball node counts per truncation size.
    pub counts: Vec<usize>,
    /// Touches at every truncation size.
    pub escape: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeineBorelReport<T> {
    /// Fractions of the chart half-extents used as truncations.
    pub truncations: Vec<T>,
    pub entries: Vec<HeineBorelEntry<T>>,
}

impl<T> HeineBorelReport<T> {
    pub fn escape_flagged(&self) -> bool {
        self.entries.iter().any(|e| e.escape)
    }

    pub fn inclusions_hold(&self) -> bool {
        self.entries.iter().all(|e| e.intersection_in_symmetric && e.symmetric_in_doubled)
    }
}

/// Ball inclusions and escape evidence for symmetrized closed balls about `x`.
///
/// The chart is truncated to 50%, 75% and 100% of its non-periodic extent around
/// `x` (keeping the grid density); a ball that reaches the truncation face at
/// every size is evidence that it is not compact.
pub fn heine_borel_diagnostic<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    x: &Point<T, D>,
    radii: &[T],
) -> Result<HeineBorelReport<T>> {
    let full = f.chart().clone();
    let x = full.normalize(x)?.0;
    let fractions = [T::lit(0.5), T::lit(0.75), T::one()];
    let mut fields = Vec::new();
    for &frac in &fractions {
        let mut bounds = full.bounds();
        let mut res = full.resolution();
        for a in 0..D {
            if full.is_periodic(a) {
                continue;
            }
            let lo = x[a] - (x[a] - full.lower(a)) * frac;
            let hi = x[a] + (full.upper(a) - x[a]) * frac;
            let cells = ((hi - lo) / full.spacing(a)).round().to_f64_lossy().max(2.0) as usize;
            bounds[a] = (lo, hi);
            res[a] = cells + 1;
        }
        let chart = Chart::new(bounds, full.periodic(), res)?;
        let data = crate::finsler::RandersData { chart, ..f.data().clone() };
        let g = FinslerNorm::forward(data).with_orientation(f.orientation());
        let (fw, bw) = field_pair(&g, &Point(x))?;
        fields.push((g, fw, bw));
    }
    let mut entries = Vec::new();
    for &r in radii {
        let (g, fw, bw) = fields.last().unwrap();
        let tol = half_cell(g, &x);
        let plus = mask_from_fields(fw, bw, r, BallKind::Forward, Some(tol));
        let minus = mask_from_fields(fw, bw, r, BallKind::Backward, Some(tol));
        let sym = mask_from_fields(fw, bw, r, BallKind::Symmetrized, Some(tol));
        let plus2 = mask_from_fields(fw, bw, r + r, BallKind::Forward, Some(tol));
        let minus2 = mask_from_fields(fw, bw, r + r, BallKind::Backward, Some(tol));
        let mut touches = Vec::new();
        let mut counts = Vec::new();
        for (g, fw, bw) in &fields {
            let s = mask_from_fields(fw, bw, r, BallKind::Symmetrized, Some(half_cell(g, &x)));
            touches.push(s.touches_truncation());
            counts.push(s.count());
        }
        let escape = touches.iter().all(|t| *t) && (0..D).any(|a| !full.is_periodic(a));
        entries.push(HeineBorelEntry {
            radius: r,
            intersection_in_symmetric: plus.intersection(&minus).is_subset_of(&sym),
            symmetric_in_doubled: sym.is_subset_of(&plus2.intersection(&minus2)),
            touches,
            counts,
            escape,
        });
    }
    Ok(HeineBorelReport { truncations: fractions.to_vec(), entries })
}

// ----- length metric of ds -----

/// Result of [`length_metric_ds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthMetricEstimate<T> {
    pub value: T,
    pub ds: T,
    /// Index of the winning candidate: 0 = h-geodesic, 1 = forward optimal, 2 = reversed backward optimal.
    pub candidate: usize,
}

/// Norm with the same `h` and no one-form.
pub fn riemannian_part<T: Real, const D: usize>(f: &FinslerNorm<T, D>) -> FinslerNorm<T, D> {
    let data = f.data();
    let zero = crate::field::Field::constant([T::zero(); D]);
    FinslerNorm::forward(crate::finsler::RandersData { omega: zero, ..data.clone() })
}

/// Sum of `ds` over `2^k + 1` samples of the best of three candidate paths
/// from `p` to `q`.
pub fn length_metric_ds<T: Real, const D: usize>(
    f: &FinslerNorm<T, D>,
    p: &Point<T, D>,
    q: &Point<T, D>,
    refinement: u32,
) -> Result<LengthMetricEstimate<T>> {
    let h = riemannian_part(f);
    let ds = symmetrized_distance(f, p, q)?.value;
    if ds == T::zero() {
        return Ok(LengthMetricEstimate { value: T::zero(), ds, candidate: 0 });
    }
    let candidates = [
        forward_distance(&h, p, q, Level::Refined)?.curve,
        forward_distance(f, p, q, Level::Refined)?.curve,
        forward_distance(f, q, p, Level::Refined)?.curve.reversed(),
    ];
    let pieces = 1usize << refinement;
    let chart = f.chart();
    let mut best = (T::infinity(), 0);
    for (ci, c) in candidates.iter().enumerate() {
        let pts: Vec<[T; D]> = (0..=pieces)
            .map(|i| chart.wrap_periodic(&c.at(T::from_count(i) / T::from_count(pieces))))
            .collect();
        let parts: Result<Vec<T>> = pts
            .par_windows(2)
            .map(|w| symmetrized_distance(f, &Point(w[0]), &Point(w[1])).map(|s| s.value))
            .collect();
        let total: T = parts?.into_iter().sum();
        if total < best.0 {
            best = (total, ci);
        }
    }
    Ok(LengthMetricEstimate { value: best.0, ds, candidate: best.1 })
}
