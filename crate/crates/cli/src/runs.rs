//! One runner per shipped scenario. Each writes its CSV and SVG artifacts into
//! the output directory and records metrics on the manifest.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randers::distance::DistanceField;
use randers::scenarios::{self, StripBumps};
use randers::*;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::manifest::Manifest;
use crate::oracle;
use crate::svg::{Lattice, Plot};
use crate::usage;

/// Shared state of a run.
pub struct Run<'a> {
    pub config: &'a ScenarioConfig,
    pub out: &'a Path,
    pub manifest: Manifest,
    rng: ChaCha8Rng,
}

impl<'a> Run<'a> {
    pub fn new(config: &'a ScenarioConfig, out: &'a Path) -> Self {
        Run { config, out, manifest: Manifest::new(config), rng: ChaCha8Rng::seed_from_u64(config.seed) }
    }

    fn resolution(&self, default: usize) -> usize {
        self.config.resolution.unwrap_or(default)
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let path = self.out.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: &Plot) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, plot.render()).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    fn point2(&mut self, bounds: [(f64, f64); 2]) -> [f64; 2] {
        std::array::from_fn(|k| self.rng.gen_range(bounds[k].0..bounds[k].1))
    }

    /// Records the invariant suite of `r` as `invariant.<name>` metrics.
    fn invariants<const D: usize>(&mut self, r: &RandersData<f64, D>) -> Result<()> {
        let opts = InvariantOptions { seed: self.config.seed, ..Default::default() };
        for c in check_invariants(r, &opts)? {
            self.manifest.at_most(&format!("invariant.{}", c.name), c.value, c.tol);
        }
        Ok(())
    }
}

pub type Runner = fn(&mut Run<'_>) -> Result<()>;

pub fn runner(name: &str) -> Option<Runner> {
    Some(match name {
        "flat" => flat,
        "constant-form" => constant_form,
        "strip-cylinder" => strip_cylinder,
        "hyperbola-section" => hyperbola_section,
        "ds-cauchy-sequence" => ds_cauchy_sequence,
        "disk-cut-locus" => disk_cut_locus,
        "two-disk-horizon" => two_disk_horizon,
        "minkowski-development" => minkowski_development,
        _ => return None,
    })
}

fn bounds2(c: &Chart2) -> ((f64, f64), (f64, f64)) {
    let b = c.bounds();
    (b[0], b[1])
}

fn lattice2<'v>(c: &Chart2, values: &'v [f64]) -> Lattice<'v> {
    let [nx, ny] = c.resolution();
    let (x, y) = bounds2(c);
    Lattice { nx, ny, x, y, values }
}

#[derive(Serialize)]
struct DistanceRow {
    x: f64,
    y: f64,
    forward: f64,
    backward: f64,
}

fn distance_rows(fw: &DistanceField<f64, 2>, bw: &DistanceField<f64, 2>) -> Vec<DistanceRow> {
    (0..fw.grid.node_count())
        .map(|i| {
            let [x, y] = fw.grid.node_coords(i);
            DistanceRow { x, y, forward: fw.values[i], backward: bw.values[i] }
        })
        .collect()
}

/// Node coordinate of the last forward-ball node on the ray from `start` along `step`.
fn ball_edge(mask: &Mask2, start: usize, step: [isize; 2], axis: usize) -> f64 {
    let mut edge = mask.grid.node_coords(start)[axis];
    let mut cur = start;
    while let Some(m) = mask.grid.neighbor(cur, &step) {
        if !mask.inside[m] {
            break;
        }
        edge = mask.grid.node_coords(m)[axis];
        cur = m;
    }
    edge
}

/// Shared body of `flat` and `constant-form`: sweeps from the origin, samples
/// refined distances against `|dx| + a dx_0` and locates the unit forward ball.
fn planar(run: &mut Run<'_>, a: f64) -> Result<()> {
    let res = run.resolution(41);
    let r = if a == 0.0 { scenarios::flat(res) } else { scenarios::constant_form(a, res) };
    let f = FinslerNorm::forward(r.clone());
    let origin = Point([0.0, 0.0]);
    let fw = DistanceField::from_point(&f, &origin, Direction::Forward)?;
    let bw = DistanceField::from_point(&f, &origin, Direction::Backward)?;
    let cell = r.chart.max_spacing();
    let exact = |p: &[f64; 2], q: &[f64; 2]| {
        let d = [q[0] - p[0], q[1] - p[1]];
        linalg::norm(&d) + a * d[0]
    };

    let mut coarse = 0.0f64;
    for i in 0..r.chart.node_count() {
        let x = r.chart.node_coords(i);
        coarse = coarse.max((fw.values[i] - exact(&[0.0, 0.0], &x)).abs()).max((bw.values[i] - exact(&x, &[0.0, 0.0])).abs());
    }
    run.csv("distance.csv", &distance_rows(&fw, &bw))?;
    run.manifest.at_most("coarse_max_error", coarse, 2.0 * cell);

    let mut refined = 0.0f64;
    for _ in 0..20 {
        let p = run.point2([(-1.5, 1.5); 2]);
        let q = run.point2([(-1.5, 1.5); 2]);
        let d = forward_distance(&f, &Point(p), &Point(q), Level::Refined)?.value;
        refined = refined.max((d - exact(&p, &q)).abs());
    }
    run.manifest.at_most("refined_max_error", refined, run.config.tol());

    if a != 0.0 {
        #[derive(Serialize)]
        struct AxisRow {
            dx: f64,
            forward: f64,
            backward: f64,
            symmetrized: f64,
            forward_expected: f64,
            backward_expected: f64,
        }
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for k in -8..=8 {
            if k == 0 {
                continue;
            }
            let dx = 0.2 * k as f64;
            let q = Point([dx, 0.0]);
            let s = symmetrized_distance(&f, &origin, &q)?;
            let row = AxisRow {
                dx,
                forward: s.forward,
                backward: s.backward,
                symmetrized: s.value,
                forward_expected: dx.abs() + a * dx,
                backward_expected: dx.abs() - a * dx,
            };
            worst = worst
                .max((row.forward - row.forward_expected).abs())
                .max((row.backward - row.backward_expected).abs())
                .max((row.symmetrized - dx.abs()).abs());
            rows.push(row);
        }
        run.csv("axis.csv", &rows)?;
        run.manifest.at_most("axis_max_error", worst, run.config.tol());
    }

    let mask = ball(&f, &origin, 1.0, BallKind::Forward)?;
    let centre = r.chart.nearest_node(&[0.0, 0.0]);
    let edge = ball_edge(&mask, centre, [1, 0], 0);
    run.manifest.at_most("ball_edge_error", (edge - 1.0 / (1.0 + a)).abs(), cell * (1.0 + 1e-9));

    let (x, y) = bounds2(&r.chart);
    let mut plot = Plot::new("forward distance from the origin", x, y);
    let lat = lattice2(&r.chart, &fw.values);
    plot.heatmap(&lat).contours(&lat, &[0.25, 0.5, 0.75, 1.0, 1.5, 2.0], "white");
    run.svg("distance.svg", &plot)?;
    run.invariants(&r)
}

fn flat(run: &mut Run<'_>) -> Result<()> {
    planar(run, 0.0)
}

fn constant_form(run: &mut Run<'_>) -> Result<()> {
    planar(run, run.config.params.a.unwrap_or(0.5))
}

/// Vertical line `x = 3` traversed downward from `y = ymax` to `-ymax`, sampled
/// densely where the integrand varies.
fn downward_line(y_max: f64, n: usize) -> Result<Curve2> {
    let amax = y_max.asinh();
    let pts = (0..=n).map(|k| [3.0, (amax * (1.0 - 2.0 * k as f64 / n as f64)).sinh()]).collect();
    Ok(SampledCurve::uniform(pts, 0.0, 1.0)?)
}

fn strip_bumps(run: &Run<'_>) -> StripBumps {
    let d = StripBumps::default();
    let p = &run.config.params;
    StripBumps { plateau: p.plateau.unwrap_or(d.plateau), support: p.support.unwrap_or(d.support), ..d }
}

fn strip_cylinder(run: &mut Run<'_>) -> Result<()> {
    let bumps = strip_bumps(run);
    if !(0.0 < bumps.plateau && bumps.plateau < bumps.support && bumps.support <= 3.0) {
        return Err(usage("strip bumps need 0 < plateau < support <= 3"));
    }
    let res = run.resolution(65);
    let ry = (res - 1) * 4 / 3 + 1;
    let half = run.config.params.half_height.unwrap_or(8.0);

    #[derive(Serialize)]
    struct LengthRow {
        y_max: f64,
        length: f64,
        expected: f64,
    }
    let mut rows = Vec::new();
    for y_max in [10.0, 100.0, 1e3, 1e4] {
        let tall = FinslerNorm::forward(scenarios::strip_cylinder([res, res], y_max, bumps));
        let length = curve_length(&tall, &downward_line(y_max, 20_000)?);
        rows.push(LengthRow { y_max, length, expected: 2.0 * y_max.atan() });
    }
    let truncation = rows.iter().map(|r| (r.length - r.expected).abs()).fold(0.0, f64::max);
    let last = rows.last().map_or(0.0, |r| r.length);
    run.csv("vertical_length.csv", &rows)?;
    run.manifest.at_most("downward_length_error", (last - PI).abs(), run.config.tol());
    run.manifest.at_most("downward_truncation_error", truncation, 1e-6);

    let r = scenarios::strip_cylinder([res, ry], half, bumps);
    let f = FinslerNorm::forward(r.clone());
    #[derive(Serialize)]
    struct PairRow {
        px: f64,
        py: f64,
        qx: f64,
        qy: f64,
        forward: f64,
        backward: f64,
        ds: f64,
    }
    let mut pairs = Vec::new();
    let inner = [(-6.0, 6.0), (-(half - 1.0), half - 1.0)];
    for _ in 0..20 {
        let p = run.point2(inner);
        let q = run.point2(inner);
        let s = symmetrized_distance(&f, &Point(p), &Point(q))?;
        pairs.push(PairRow { px: p[0], py: p[1], qx: q[0], qy: q[1], forward: s.forward, backward: s.backward, ds: s.value });
    }
    let max_ds = pairs.iter().map(|p| p.ds).fold(0.0, f64::max);
    run.csv("pairs.csv", &pairs)?;
    run.manifest.at_most("max_ds", max_ds, 12.0 + PI);

    #[derive(Serialize)]
    struct EscapeRow {
        y_max: f64,
        escape_length: f64,
        status: String,
    }
    let mut escapes = Vec::new();
    let mut incomplete = true;
    for y_max in [10.0, 100.0, 1e3] {
        let tall = FinslerNorm::forward(scenarios::strip_cylinder([res, res], y_max, bumps));
        let geo = geodesic_ivp(&tall, &Point([3.0, 0.0]), &[0.0, -1.0], 10.0, 1e-9)?;
        let escaped = geo.status == GeodesicStatus::Escaped;
        incomplete &= escaped && geo.length < FRAC_PI_2;
        escapes.push(EscapeRow { y_max, escape_length: geo.length, status: format!("{:?}", geo.status).to_lowercase() });
    }
    run.csv("forward_escape.csv", &escapes)?;
    run.manifest.flag("forward_geodesic_escapes", incomplete, true);
    let hb = heine_borel_diagnostic(&f, &Point([0.0, 0.0]), &[half, 12.0 + PI])?;
    run.manifest.flag("escape_flag", hb.escape_flagged(), true);
    run.manifest.flag("ball_inclusions", hb.inclusions_hold(), true);

    let fw = DistanceField::from_point(&f, &Point([0.0, 0.0]), Direction::Forward)?;
    let (x, y) = bounds2(&r.chart);
    let mut plot = Plot::new("strip: forward distance from the origin", x, y);
    let lat = lattice2(&r.chart, &fw.values);
    plot.heatmap(&lat).contours(&lat, &[1.0, 2.0, 4.0, 6.0], "white");
    run.svg("distance.svg", &plot)?;
    run.invariants(&r)
}

fn segment1(a: f64, b: f64, n: usize) -> Result<Curve1> {
    Ok(SampledCurve::uniform((0..=n).map(|k| [a + (b - a) * k as f64 / n as f64]).collect(), 0.0, 1.0)?)
}

/// Segment `[a, b]` split at the seam `0` so each piece is smooth.
fn seam_segment(a: f64, b: f64, n: usize) -> Result<Curve1> {
    if a * b >= 0.0 {
        return segment1(a, b, n);
    }
    let mut pts: Vec<[f64; 1]> = (0..n).map(|k| [a * (1.0 - k as f64 / n as f64)]).collect();
    pts.extend((0..=n).map(|k| [b * k as f64 / n as f64]));
    Ok(SampledCurve::uniform(pts, 0.0, 1.0)?)
}

fn hyperbola_section(run: &mut Run<'_>) -> Result<()> {
    let t_max = run.config.params.truncation.unwrap_or(20.0);
    if !(t_max > 3.0) {
        return Err(usage("hyperbola truncation must exceed 3"));
    }
    let res = run.resolution(401);
    let long = FinslerNorm::forward(scenarios::hyperbola_section(t_max, res));

    #[derive(Serialize)]
    struct PartialRow {
        theta_max: f64,
        length: f64,
        expected: f64,
    }
    let mut rows = Vec::new();
    for th in [0.5, 1.0, 2.0, 5.0, 10.0, t_max] {
        let length = curve_length(&long, &seam_segment(-th, th, 20_000)?);
        rows.push(PartialRow { theta_max: th, length, expected: 2.0 * (1.0 - (-th).exp()) });
    }
    let partial = rows.iter().map(|r| (r.length - r.expected).abs()).fold(0.0, f64::max);
    let total = rows.last().map_or(0.0, |r| r.length);
    run.csv("partial_length.csv", &rows)?;
    run.manifest.at_most("total_length_error", (total - 2.0).abs(), run.config.tol());
    run.manifest.at_most("partial_length_error", partial, run.config.tol());

    let r = scenarios::hyperbola_section(3.0, (res - 1) * 3 / 5 + 1);
    let f = FinslerNorm::forward(r.clone());
    #[derive(Serialize)]
    struct DistRow {
        theta: f64,
        forward_from_0: f64,
        backward_to_0: f64,
        ds: f64,
        ds_expected: f64,
    }
    let mut dist = Vec::new();
    for k in -10..=10 {
        let th = 0.25 * k as f64;
        let s = symmetrized_distance(&f, &Point([0.0]), &Point([th]))?;
        dist.push(DistRow { theta: th, forward_from_0: s.forward, backward_to_0: s.backward, ds: s.value, ds_expected: th.sinh().abs() });
    }
    let ds_err = dist.iter().map(|d| (d.ds - d.ds_expected).abs() / d.ds_expected.max(1.0)).fold(0.0, f64::max);
    run.csv("distance.csv", &dist)?;
    run.manifest.at_most("ds_relative_error", ds_err, 2.0 * r.chart.max_spacing());

    // unit balls about 0 reach the right face (forward) and the left face (backward)
    let fb = ball(&f, &Point([0.0]), 1.0, BallKind::Forward)?;
    let bb = ball(&f, &Point([0.0]), 1.0, BallKind::Backward)?;
    run.manifest.flag("forward_ball_touches_face", fb.touches_truncation(), true);
    run.manifest.flag("backward_ball_touches_face", bb.touches_truncation(), true);

    // the flat slice as section: sup of |omega|_h must stay below 1
    let rf = section_change(&r, &scenarios::hyperbola_flat_section())?;
    let mut sup = 0.0f64;
    for i in 0..rf.chart.node_count() {
        let (h, w) = rf.fields_at(&rf.chart.node_coords(i));
        sup = sup.max((w[0] * w[0] / h[0][0]).sqrt());
    }
    run.manifest.at_most("section_omega_sup", sup, 1.0 - 1e-12);

    let mut plot = Plot::new("hyperbola section: distances from 0", (-3.0, 3.0), (0.0, 10.1));
    let pick = |g: fn(&DistRow) -> f64| dist.iter().map(|d| (d.theta, g(d))).collect::<Vec<_>>();
    plot.polyline(&pick(|d| d.forward_from_0), "#1f77b4", 1.5)
        .polyline(&pick(|d| d.backward_to_0), "#d62728", 1.5)
        .points(&pick(|d| d.ds), "black", 2.5);
    run.svg("distance.svg", &plot)?;
    run.invariants(&r)
}

fn ds_cauchy_sequence(run: &mut Run<'_>) -> Result<()> {
    let count = run.config.params.count.unwrap_or(6);
    if !(1..=10).contains(&count) {
        return Err(usage("arc count must lie in 1..=10"));
    }
    let res = run.resolution(97);
    let sc = scenarios::ds_cauchy_sequence(count, 2.4 / (res - 1) as f64);
    let f = FinslerNorm::forward(sc.data.clone());
    #[derive(Serialize)]
    struct StepRow {
        n: usize,
        forward: f64,
        backward: f64,
        bound: f64,
        euclidean: f64,
    }
    let mut rows = Vec::new();
    for n in 1..=count {
        let (p, q) = (Point(sc.points[n - 1]), Point(sc.points[n]));
        let forward = forward_distance(&f, &p, &q, Level::Refined)?.value;
        let backward = forward_distance(&f, &q, &p, Level::Refined)?.value;
        rows.push(StepRow { n, forward, backward, bound: 0.5f64.powi(n as i32), euclidean: linalg::norm(&linalg::sub(&q.0, &p.0)) });
    }
    let ratio = rows.iter().map(|r| r.forward.max(r.backward) / r.bound).fold(0.0, f64::max);
    let euclid = rows.iter().map(|r| r.euclidean).fold(f64::INFINITY, f64::min);
    run.csv("steps.csv", &rows)?;
    run.manifest.at_most("max_step_ratio", ratio, 1.0 - 1e-12);
    run.manifest.at_least("min_euclidean_step", euclid, 1.0);

    let fw = DistanceField::from_point(&f, &Point(sc.points[0]), Direction::Forward)?;
    let (x, y) = bounds2(&sc.data.chart);
    let mut plot = Plot::new("forward distance from p1", x, y);
    let lat = lattice2(&sc.data.chart, &fw.values);
    let pts: Vec<(f64, f64)> = sc.points.iter().map(|p| (p[0], p[1])).collect();
    plot.heatmap(&lat).points(&pts, "red", 3.0);
    run.svg("distance.svg", &plot)?;
    run.invariants(&sc.data)
}

fn disk_cut_locus(run: &mut Run<'_>) -> Result<()> {
    let res = run.resolution(61);
    let (r, c) = scenarios::disk_cut_locus(res);
    let f = FinslerNorm::forward(r.clone());
    let sd = distance_to_set(&f, &c, SetOrientation::FromSet)?;
    let cut = cut_locus(&sd);
    let cells = 2.0 * r.chart.max_spacing() * (1.0 + 1e-9);

    #[derive(Serialize)]
    struct RhoRow {
        x: f64,
        y: f64,
        rho: f64,
        segments: u32,
        spread_deg: f64,
        flagged: bool,
    }
    let rows: Vec<RhoRow> = (0..r.chart.node_count())
        .map(|i| {
            let [x, y] = r.chart.node_coords(i);
            RhoRow { x, y, rho: sd.field.values[i], segments: cut.segment_count[i], spread_deg: cut.spread_deg[i], flagged: cut.flagged.inside[i] }
        })
        .collect();
    run.csv("rho.csv", &rows)?;
    let flagged = cut.flagged.nodes();
    let far = flagged.iter().map(|&i| linalg::norm(&r.chart.node_coords(i))).fold(0.0, f64::max);
    run.manifest.at_least("flagged_count", flagged.len() as f64, 1.0);
    run.manifest.at_most("flagged_max_offset", far, cells);

    let mut err = 0.0f64;
    for _ in 0..20 {
        let rad: f64 = run.rng.gen_range(0.1..0.95);
        let th: f64 = run.rng.gen_range(0.0..std::f64::consts::TAU);
        let p = [rad * th.cos(), rad * th.sin()];
        err = err.max((sd.refined(&p)?.value - (1.0 - rad)).abs());
    }
    run.manifest.at_most("rho_max_error", err, run.config.tol());
    run.manifest.at_least("segment_agreement", cut.agreement, 0.99);

    let values: Vec<f64> = rows.iter().map(|r| if r.rho.is_finite() && r.rho > 0.0 { r.rho } else { f64::NAN }).collect();
    let (x, y) = bounds2(&r.chart);
    let mut plot = Plot::new("distance from the outside of the disk", x, y);
    let lat = lattice2(&r.chart, &values);
    let marks: Vec<(f64, f64)> = flagged.iter().map(|&i| r.chart.node_coords(i)).map(|p| (p[0], p[1])).collect();
    plot.heatmap(&lat).contours(&lat, &[0.2, 0.4, 0.6, 0.8], "white").points(&marks, "red", 3.0);
    run.svg("rho.svg", &plot)?;
    run.invariants(&r)
}

fn two_disk_horizon(run: &mut Run<'_>) -> Result<()> {
    let res = run.resolution(41);
    let (r, c) = scenarios::two_disks(res);
    let hz = horizon(&r, &c.complement(), 0.0, Side::Future)?;
    let cell = r.chart.max_spacing();

    #[derive(Serialize)]
    struct HorizonRow {
        x: f64,
        y: f64,
        height: f64,
        crease: bool,
    }
    let rows: Vec<HorizonRow> = (0..r.chart.node_count())
        .map(|i| {
            let [x, y] = r.chart.node_coords(i);
            HorizonRow { x, y, height: hz.heights()[i], crease: hz.crease[i] }
        })
        .collect();
    run.csv("horizon.csv", &rows)?;
    let creases: Vec<usize> = (0..rows.len()).filter(|&i| hz.crease[i]).collect();
    let off_axis = creases.iter().map(|&i| rows[i].x.abs()).fold(0.0, f64::max);
    run.manifest.at_least("crease_count", creases.len() as f64, 1.0);
    run.manifest.at_most("crease_axis_offset", off_axis, 2.0 * cell * (1.0 + 1e-9));
    let residual = hz.generators.iter().map(|g| g.max_null_residual).fold(0.0, f64::max);
    run.manifest.at_least("generator_count", hz.generators.len() as f64, 1.0);
    run.manifest.at_most("generator_null_residual", residual, 1e-9);

    #[derive(Serialize)]
    struct CreaseRow {
        resolution: usize,
        flagged: usize,
    }
    let mut counts = Vec::new();
    for level in [res, 2 * res - 1] {
        let (r2, c2) = scenarios::two_disks(level);
        let sd = distance_to_set(&FinslerNorm::forward(r2), &c2, SetOrientation::FromSet)?;
        counts.push(CreaseRow { resolution: level - 1, flagged: cut_locus(&sd).flagged_count() });
    }
    let expo = refinement_exponent(counts[0].resolution, counts[0].flagged, counts[1].resolution, counts[1].flagged);
    run.csv("creases.csv", &counts)?;
    run.manifest.at_most("crease_exponent_offset", (expo - 1.0).abs(), 0.2);

    let values: Vec<f64> = rows.iter().map(|r| if r.height > 0.0 { r.height } else { f64::NAN }).collect();
    let (x, y) = bounds2(&r.chart);
    let mut plot = Plot::new("horizon height over the two disks", x, y);
    let lat = lattice2(&r.chart, &values);
    let marks: Vec<(f64, f64)> = creases.iter().map(|&i| (rows[i].x, rows[i].y)).collect();
    plot.heatmap(&lat).contours(&lat, &[0.25, 0.5, 0.75, 1.0], "white").points(&marks, "red", 2.5);
    run.svg("horizon.svg", &plot)?;
    run.invariants(&r)
}

fn minkowski_development(run: &mut Run<'_>) -> Result<()> {
    let res = run.resolution(200);
    let [a0, a1] = run.config.params.interval.unwrap_or([-1.0, 1.0]);
    if !(-1.5 < a0 && a1 < 1.5) {
        return Err(usage("interval must lie inside (-1.5, 1.5)"));
    }
    let (r, a) = scenarios::minkowski_development(res, (a0, a1));
    let hz = horizon(&r, &a, 0.0, Side::Future)?;
    let dev = &hz.development;
    let dx = r.chart.spacing(0);
    let xs: Vec<f64> = (0..res).map(|i| r.chart.node_coords(i)[0]).collect();

    #[derive(Serialize)]
    struct DevRow {
        x: f64,
        height: f64,
        horizon_time: f64,
        crease: bool,
    }
    let rows: Vec<DevRow> = (0..res)
        .map(|i| DevRow { x: xs[i], height: dev.heights[i], horizon_time: dev.horizon_time(i), crease: hz.crease[i] })
        .collect();
    run.csv("development.csv", &rows)?;

    // rows of the (t, x) lattice up to t = 3 with dt = dx
    let steps = ((3.0 / dx).round() as usize + 1).min(res);
    let lib: Vec<Vec<bool>> = (0..steps).map(|t| (0..res).map(|i| dev.contains_node(t as f64 * dx, i)).collect()).collect();
    let lattice = oracle::lattice_development(&xs, steps, (a0, a1));
    let haus = oracle::set_hausdorff(&oracle::boundary(&lib), &oracle::boundary(&lattice));
    #[derive(Serialize)]
    struct OracleRow {
        x: f64,
        oracle_height: f64,
        height: f64,
        expected: f64,
    }
    let oracle_rows: Vec<OracleRow> = (0..res)
        .map(|i| OracleRow {
            x: xs[i],
            oracle_height: lattice.iter().take_while(|row| row[i]).count() as f64 * dx,
            height: dev.heights[i],
            expected: (xs[i] - a0).min(a1 - xs[i]).max(0.0),
        })
        .collect();
    let time_err = oracle_rows.iter().filter(|o| o.expected > 0.0).map(|o| (o.height - o.expected).abs()).fold(0.0, f64::max);
    run.csv("oracle.csv", &oracle_rows)?;
    run.manifest.at_most("boundary_hausdorff_cells", haus, 2.0);
    run.manifest.at_most("horizon_time_error", time_err, 2.0 * dx);
    let mid = 0.5 * (a0 + a1);
    let apex = (0..res).any(|i| hz.crease[i] && (xs[i] - mid).abs() <= 2.0 * dx);
    let stray = (0..res).filter(|&i| hz.crease[i] && (xs[i] - mid).abs() > 2.0 * dx).count();
    run.manifest.flag("apex_crease", apex, true);
    run.manifest.at_most("stray_creases", stray as f64, 0.0);

    let top = 0.5 * (a1 - a0) + 0.25;
    let mut plot = Plot::new("future development of A", (-1.5, 1.5), (0.0, top));
    let graph: Vec<(f64, f64)> = rows.iter().filter(|r| r.height > 0.0).map(|r| (r.x, r.horizon_time)).collect();
    let oracle_graph: Vec<(f64, f64)> =
        oracle_rows.iter().filter(|o| o.oracle_height > 0.0).map(|o| (o.x, o.oracle_height)).collect();
    plot.polyline(&[(a0, 0.0), (a1, 0.0)], "black", 3.0)
        .polyline(&oracle_graph, "#999999", 3.0)
        .polyline(&graph, "#1f77b4", 1.5);
    run.svg("development.svg", &plot)?;
    run.invariants(&r)
}
