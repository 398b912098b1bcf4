//! Self-contained SVG plots: heat maps, marching-squares contours, polylines
//! and point marks over a rectangular data window.

use std::fmt::Write as _;

/// Values on a regular `nx x ny` lattice over `[x0, x1] x [y0, y1]`, row-major in `x`.
pub struct Lattice<'a> {
    pub nx: usize,
    pub ny: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub values: &'a [f64],
}

impl Lattice<'_> {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    fn coord(&self, i: usize, j: usize) -> (f64, f64) {
        let fx = i as f64 / (self.nx - 1) as f64;
        let fy = j as f64 / (self.ny - 1) as f64;
        (self.x.0 + fx * (self.x.1 - self.x.0), self.y.0 + fy * (self.y.1 - self.y.0))
    }
}

type Segment = ((f64, f64), (f64, f64));

/// Level-set segments of `lat` at `level`. Cells with a non-finite corner are
/// skipped; saddles are split by the cell-centre average.
pub fn marching_squares(lat: &Lattice<'_>, level: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    for j in 0..lat.ny.saturating_sub(1) {
        for i in 0..lat.nx.saturating_sub(1) {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v = corners.map(|(a, b)| lat.at(a, b));
            if v.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let case = v.iter().enumerate().fold(0usize, |acc, (k, &x)| acc | (usize::from(x > level) << k));
            if case == 0 || case == 15 {
                continue;
            }
            // crossing on edge k between corner k and corner k + 1
            let cross = |k: usize| {
                let (a, b) = (k, (k + 1) % 4);
                let t = (level - v[a]) / (v[b] - v[a]);
                let (pa, pb) = (lat.coord(corners[a].0, corners[a].1), lat.coord(corners[b].0, corners[b].1));
                (pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1))
            };
            let centre_high = v.iter().sum::<f64>() / 4.0 > level;
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(2, 3)],
                5 if centre_high => &[(3, 2), (0, 1)],
                5 => &[(3, 0), (1, 2)],
                10 if centre_high => &[(3, 0), (1, 2)],
                10 => &[(0, 1), (2, 3)],
                _ => &[],
            };
            for &(a, b) in pairs {
                out.push((cross(a), cross(b)));
            }
        }
    }
    out
}

/// Blue-to-yellow ramp on `t` in `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let s = t * (stops.len() - 1) as f64;
    let k = (s.floor() as usize).min(stops.len() - 2);
    let u = s - k as f64;
    let mix = |a: f64, b: f64| (a + u * (b - a)).round() as u8;
    let (a, b) = (stops[k], stops[k + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// An SVG canvas mapping a data window onto a fixed pixel box.
pub struct Plot {
    x: (f64, f64),
    y: (f64, f64),
    width: f64,
    height: f64,
    margin: f64,
    body: String,
    title: String,
}

impl Plot {
    pub fn new(title: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let width = 640.0;
        let aspect = ((y.1 - y.0) / (x.1 - x.0)).clamp(0.25, 4.0);
        Plot { x, y, width, height: width * aspect, margin: 40.0, body: String::new(), title: title.to_string() }
    }

    fn px(&self, p: (f64, f64)) -> (f64, f64) {
        let u = (p.0 - self.x.0) / (self.x.1 - self.x.0);
        let v = (p.1 - self.y.0) / (self.y.1 - self.y.0);
        (self.margin + u * self.width, self.margin + (1.0 - v) * self.height)
    }

    /// Cell-centred colour map of the finite values.
    pub fn heatmap(&mut self, lat: &Lattice<'_>) -> &mut Self {
        let finite = lat.values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let dx = (lat.x.1 - lat.x.0) / (lat.nx - 1) as f64;
        let dy = (lat.y.1 - lat.y.0) / (lat.ny - 1) as f64;
        let w = dx / (self.x.1 - self.x.0) * self.width;
        let h = dy / (self.y.1 - self.y.0) * self.height;
        for j in 0..lat.ny {
            for i in 0..lat.nx {
                let v = lat.at(i, j);
                if !v.is_finite() {
                    continue;
                }
                let (cx, cy) = lat.coord(i, j);
                let (px, py) = self.px((cx - 0.5 * dx, cy + 0.5 * dy));
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    w + 0.05,
                    h + 0.05,
                    ramp((v - lo) / span)
                );
            }
        }
        self
    }

    pub fn contours(&mut self, lat: &Lattice<'_>, levels: &[f64], colour: &str) -> &mut Self {
        for &level in levels {
            let mut d = String::new();
            for (a, b) in marching_squares(lat, level) {
                let (pa, pb) = (self.px(a), self.px(b));
                let _ = write!(d, "M{:.2},{:.2}L{:.2},{:.2}", pa.0, pa.1, pb.0, pb.1);
            }
            if !d.is_empty() {
                let _ = writeln!(self.body, r#"<path d="{d}" stroke="{colour}" stroke-width="1.2" fill="none"/>"#);
            }
        }
        self
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], colour: &str, width: f64) -> &mut Self {
        if pts.len() < 2 {
            return self;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" stroke="{colour}" stroke-width="{width}" fill="none"/>"#,
            coords.join(" ")
        );
        self
    }

    pub fn points(&mut self, pts: &[(f64, f64)], colour: &str, radius: f64) -> &mut Self {
        for &p in pts {
            let (x, y) = self.px(p);
            let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{radius}" fill="{colour}"/>"#);
        }
        self
    }

    pub fn render(&self) -> String {
        let (w, h, m) = (self.width, self.height, self.margin);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
            w + 2.0 * m,
            h + 2.0 * m,
            w + 2.0 * m,
            h + 2.0 * m
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{m}" y="{:.0}" font-family="sans-serif" font-size="14">{}</text>"#, m - 12.0, escape(&self.title));
        s.push_str(&self.body);
        let _ = writeln!(s, r#"<rect x="{m}" y="{m}" width="{w:.2}" height="{h:.2}" stroke="black" fill="none"/>"#);
        let labels = [
            (m, h + m + 16.0, format!("{:.3}", self.x.0)),
            (w + m - 40.0, h + m + 16.0, format!("{:.3}", self.x.1)),
            (2.0, h + m, format!("{:.3}", self.y.0)),
            (2.0, m + 10.0, format!("{:.3}", self.y.1)),
        ];
        for (x, y, t) in labels {
            let _ = writeln!(s, r#"<text x="{x:.0}" y="{y:.0}" font-family="sans-serif" font-size="10">{t}</text>"#);
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
