//! Minimal static SVG writer with marching-squares level sets.

use std::fmt::Write as _;

use rayon::prelude::*;

pub type Seg = ([f64; 2], [f64; 2]);

pub const BLUE: &str = "#1f77b4";
pub const RED: &str = "#d62728";
pub const GREEN: &str = "#2ca02c";
pub const GRAY: &str = "#9e9e9e";
pub const DARK: &str = "#333333";

/// Maps a world box onto a pixel rectangle, y up.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
}

impl Frame {
    /// Largest aspect-preserving frame inside the pixel rectangle.
    pub fn fit(lo: [f64; 2], hi: [f64; 2], x0: f64, y0: f64, w: f64, h: f64) -> Self {
        let sx = w / (hi[0] - lo[0]);
        let sy = h / (hi[1] - lo[1]);
        let s = sx.min(sy);
        let (fw, fh) = (s * (hi[0] - lo[0]), s * (hi[1] - lo[1]));
        Self {
            lo,
            hi,
            x0: x0 + (w - fw) / 2.0,
            y0: y0 + (h - fh) / 2.0,
            w: fw,
            h: fh,
        }
    }

    pub fn px(&self, p: [f64; 2]) -> (f64, f64) {
        (
            self.x0 + (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * self.w,
            self.y0 + (self.hi[1] - p[1]) / (self.hi[1] - self.lo[1]) * self.h,
        )
    }

    pub fn scale(&self) -> f64 {
        self.w / (self.hi[0] - self.lo[0])
    }
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn border(&mut self, f: &Frame) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{DARK}" stroke-width="1"/>"#,
            f.x0, f.y0, f.w, f.h
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" stroke="none"/>"#
        );
    }

    /// Polyline through at most `max_points` evenly spaced samples of `pts`.
    pub fn polyline(&mut self, f: &Frame, pts: &[[f64; 2]], stroke: &str, width: f64, max_points: usize) {
        if pts.len() < 2 {
            return;
        }
        let step = pts.len().div_ceil(max_points.max(2));
        let mut d = String::new();
        let mut push = |p: [f64; 2]| {
            let (x, y) = f.px(p);
            let _ = write!(d, "{x:.2},{y:.2} ");
        };
        for p in pts.iter().step_by(step.max(1)) {
            push(*p);
        }
        push(*pts.last().unwrap());
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-opacity="0.8"/>"#,
            d.trim_end()
        );
    }

    pub fn segments(&mut self, f: &Frame, segs: &[Seg], stroke: &str, width: f64, dash: Option<&str>) {
        if segs.is_empty() {
            return;
        }
        let mut d = String::new();
        for (a, b) in segs {
            let (x1, y1) = f.px(*a);
            let (x2, y2) = f.px(*b);
            let _ = write!(d, "M{x1:.2} {y1:.2}L{x2:.2} {y2:.2}");
        }
        let dash = dash.map(|s| format!(r#" stroke-dasharray="{s}""#)).unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#
        );
    }

    /// Circle with a radius in world units.
    pub fn circle(&mut self, f: &Frame, c: [f64; 2], r: f64, fill: &str, stroke: &str, dash: Option<&str>) {
        let (x, y) = f.px(c);
        let dash = dash.map(|s| format!(r#" stroke-dasharray="{s}""#)).unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{fill}" stroke="{stroke}" stroke-width="1"{dash}/>"#,
            r * f.scale()
        );
    }

    /// Marker with a radius in pixels.
    pub fn dot(&mut self, f: &Frame, c: [f64; 2], r_px: f64, fill: &str) {
        let (x, y) = f.px(c);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r_px:.2}" fill="{fill}"/>"#);
    }

    pub fn line(&mut self, f: &Frame, a: [f64; 2], b: [f64; 2], stroke: &str, width: f64) {
        let (x1, y1) = f.px(a);
        let (x2, y2) = f.px(b);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}" stroke-linecap="round"/>"#
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, s: &str) {
        let esc = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}" fill="{DARK}">{esc}</text>"#
        );
    }

    /// Fill every grid cell whose centre value is `<= 0`, merged into
    /// horizontal runs.
    pub fn fill_negative(&mut self, f: &Frame, g: &ScalarGrid, fill: &str) {
        let cells = g.cell_centres();
        let n = g.n;
        let (cw, ch) = (f.w / n as f64, f.h / n as f64);
        for j in 0..n {
            let mut i = 0;
            while i < n {
                if cells[j * n + i] <= 0.0 {
                    let start = i;
                    while i < n && cells[j * n + i] <= 0.0 {
                        i += 1;
                    }
                    let x = f.x0 + start as f64 * cw;
                    let y = f.y0 + (n - 1 - j) as f64 * ch;
                    self.rect(x, y, (i - start) as f64 * cw, ch, fill);
                } else {
                    i += 1;
                }
            }
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Field values on the `(n + 1)^2` corners of an `n x n` cell grid.
#[derive(Debug, Clone)]
pub struct ScalarGrid {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub n: usize,
    /// Row-major, `values[j * (n + 1) + i]` at `(x_i, y_j)`.
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn sample<F: Fn([f64; 2]) -> f64 + Sync>(lo: [f64; 2], hi: [f64; 2], n: usize, f: F) -> Self {
        let m = n + 1;
        let values = (0..m * m)
            .into_par_iter()
            .map(|k| f(Self::corner(lo, hi, n, k % m, k / m)))
            .collect();
        Self { lo, hi, n, values }
    }

    fn corner(lo: [f64; 2], hi: [f64; 2], n: usize, i: usize, j: usize) -> [f64; 2] {
        [
            lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64,
            lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64,
        ]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n + 1) + i]
    }

    /// Mean of the four corners per cell.
    pub fn cell_centres(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                out.push(0.25 * (self.at(i, j) + self.at(i + 1, j) + self.at(i, j + 1) + self.at(i + 1, j + 1)));
            }
        }
        out
    }

    /// Segments of the `level` set by marching squares; saddle cells are
    /// resolved with the cell mean.
    pub fn contour(&self, level: f64) -> Vec<Seg> {
        let mut segs = Vec::new();
        let n = self.n;
        for j in 0..n {
            for i in 0..n {
                let p = [
                    Self::corner(self.lo, self.hi, n, i, j),
                    Self::corner(self.lo, self.hi, n, i + 1, j),
                    Self::corner(self.lo, self.hi, n, i + 1, j + 1),
                    Self::corner(self.lo, self.hi, n, i, j + 1),
                ];
                let v = [
                    self.at(i, j) - level,
                    self.at(i + 1, j) - level,
                    self.at(i + 1, j + 1) - level,
                    self.at(i, j + 1) - level,
                ];
                if v.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let case = v
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (k, &x)| if x > 0.0 { acc | (1 << k) } else { acc });
                if case == 0 || case == 15 {
                    continue;
                }
                // crossing on edge k, between corners k and k + 1
                let edge = |k: usize| -> [f64; 2] {
                    let (a, b) = (k, (k + 1) % 4);
                    let t = v[a] / (v[a] - v[b]);
                    [p[a][0] + t * (p[b][0] - p[a][0]), p[a][1] + t * (p[b][1] - p[a][1])]
                };
                let crossed: Vec<usize> = (0..4).filter(|&k| (v[k] > 0.0) != (v[(k + 1) % 4] > 0.0)).collect();
                if crossed.len() == 2 {
                    segs.push((edge(crossed[0]), edge(crossed[1])));
                } else {
                    let centre_pos = v.iter().sum::<f64>() > 0.0;
                    // corner 0 positive: pair edges around the corners that
                    // are cut off from the centre
                    let corner0_pos = v[0] > 0.0;
                    if corner0_pos == centre_pos {
                        segs.push((edge(0), edge(1)));
                        segs.push((edge(2), edge(3)));
                    } else {
                        segs.push((edge(3), edge(0)));
                        segs.push((edge(1), edge(2)));
                    }
                }
            }
        }
        segs
    }
}

/// Blue for positive, red for negative, in eleven steps of `t` in `[-1, 1]`.
pub fn diverging(t: f64) -> String {
    let q = (t.clamp(-1.0, 1.0) * 5.0).round() / 5.0;
    let (r, g, b) = if q >= 0.0 {
        (255.0 - 200.0 * q, 255.0 - 130.0 * q, 255.0 - 50.0 * q)
    } else {
        (255.0 + 40.0 * q, 255.0 + 200.0 * q, 255.0 + 200.0 * q)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}
