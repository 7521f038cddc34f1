use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// What a sketched region means to the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Region the manipulator should cover.
    RegionOfInterest,
    /// Region the base may stand in.
    Permissible,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::RegionOfInterest => "roi",
            Label::Permissible => "permissible",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roi" | "region-of-interest" => Ok(Label::RegionOfInterest),
            "permissible" | "permissible-region" => Ok(Label::Permissible),
            other => Err(Error::InvalidSketch(format!("unknown label {other:?}"))),
        }
    }
}

/// A closed polygon drawn in image space. Vertices are pixel coordinates
/// `(u, v)` with pixel centers at integer positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    vertices: Vec<(f64, f64)>,
    label: Label,
}

impl Sketch {
    /// Validates a polygon against an image of `width` x `height` pixels.
    pub fn new(vertices: Vec<(f64, f64)>, label: Label, width: usize, height: usize) -> Result<Self> {
        let sketch = Self::unchecked(vertices, label);
        sketch.validate(width, height)?;
        Ok(sketch)
    }

    /// Builds a sketch without validation; `enclosed_pixels` still rejects
    /// degenerate polygons.
    pub fn unchecked(vertices: Vec<(f64, f64)>, label: Label) -> Self {
        Self { vertices, label }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(Error::InvalidSketch(format!("polygon needs at least 3 vertices, got {n}")));
        }
        let (w, h) = (width as f64 - 1.0, height as f64 - 1.0);
        for &(u, v) in &self.vertices {
            if !(u.is_finite() && v.is_finite()) || u < 0.0 || v < 0.0 || u > w || v > h {
                return Err(Error::InvalidSketch(format!("vertex ({u}, {v}) outside {width}x{height} image")));
            }
        }
        if !is_simple(&self.vertices) {
            return Err(Error::InvalidSketch("polygon self-intersects".into()));
        }
        if signed_area(&self.vertices).abs() < 1e-12 {
            return Err(Error::EmptyRegion);
        }
        Ok(())
    }
}

/// Shoelace area, positive for counter-clockwise order in a y-up frame.
pub fn signed_area(vertices: &[(f64, f64)]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = vertices[i];
            let (x1, y1) = vertices[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
        * 0.5
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

pub(crate) fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when no two non-adjacent edges touch.
pub fn is_simple(vertices: &[(f64, f64)]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

const BOUNDARY_EPS: f64 = 1e-9;

/// Integer pixel centers inside the polygon (even-odd rule) or on its
/// boundary, clipped to the image and ordered row-major.
pub fn enclosed_pixels(sketch: &Sketch, width: usize, height: usize) -> Result<Vec<(usize, usize)>> {
    let verts = sketch.vertices();
    let n = verts.len();
    if n < 3 || signed_area(verts).abs() < 1e-12 {
        return Err(Error::EmptyRegion);
    }
    let min_v = verts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_v = verts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let row_lo = (min_v - BOUNDARY_EPS).ceil().max(0.0) as i64;
    let row_hi = ((max_v + BOUNDARY_EPS).floor() as i64).min(height as i64 - 1);
    let max_u = width as i64 - 1;

    let mut out = Vec::new();
    let mut crossings = Vec::with_capacity(n);
    let mut spans: Vec<(i64, i64)> = Vec::new();
    for row in row_lo..=row_hi {
        let y = row as f64;
        crossings.clear();
        spans.clear();
        for i in 0..n {
            let (x0, y0) = verts[i];
            let (x1, y1) = verts[(i + 1) % n];
            if (y0 - y1).abs() <= BOUNDARY_EPS {
                // Horizontal edge: its lattice points are boundary pixels.
                if (y0 - y).abs() <= BOUNDARY_EPS {
                    spans.push(((x0.min(x1) - BOUNDARY_EPS).ceil() as i64, (x0.max(x1) + BOUNDARY_EPS).floor() as i64));
                }
                continue;
            }
            let x = x0 + (y - y0) * (x1 - x0) / (y1 - y0);
            if (y0 <= y) != (y1 <= y) {
                crossings.push(x);
            }
            // Lattice points exactly on a slanted edge, endpoints included.
            if y >= y0.min(y1) - BOUNDARY_EPS && y <= y0.max(y1) + BOUNDARY_EPS {
                let r = x.round();
                if (x - r).abs() <= BOUNDARY_EPS {
                    spans.push((r as i64, r as i64));
                }
            }
        }
        crossings.sort_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            spans.push(((pair[0] - BOUNDARY_EPS).ceil() as i64, (pair[1] + BOUNDARY_EPS).floor() as i64));
        }
        spans.sort_unstable();
        let mut last = i64::MIN;
        for &(lo, hi) in spans.iter() {
            let lo = lo.max(0).max(last.saturating_add(1));
            let hi = hi.min(max_u);
            for u in lo..=hi {
                out.push((u as usize, row as usize));
            }
            last = last.max(hi);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sketch(vs: &[(f64, f64)]) -> Sketch {
        Sketch::unchecked(vs.to_vec(), Label::RegionOfInterest)
    }

    /// Brute force: even-odd ray cast plus explicit boundary membership.
    fn brute_force(vs: &[(f64, f64)], width: usize, height: usize) -> Vec<(usize, usize)> {
        let n = vs.len();
        let mut out = Vec::new();
        for v in 0..height {
            for u in 0..width {
                let p = (u as f64, v as f64);
                let mut inside = false;
                let mut boundary = false;
                for i in 0..n {
                    let a = vs[i];
                    let b = vs[(i + 1) % n];
                    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                    if cross.abs() <= 1e-9 * len.max(1.0) && on_segment(a, b, p) {
                        boundary = true;
                    }
                    if (a.1 > p.1) != (b.1 > p.1) {
                        let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
                        if p.0 < x {
                            inside = !inside;
                        }
                    }
                }
                if inside || boundary {
                    out.push((u, v));
                }
            }
        }
        out
    }

    #[test]
    fn square_includes_boundary() {
        let px = enclosed_pixels(&sketch(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]), 10, 10).unwrap();
        assert_eq!(px.len(), 25);
        assert!(px.iter().all(|&(u, v)| u <= 4 && v <= 4));
    }

    #[test]
    fn right_triangle() {
        let px = enclosed_pixels(&sketch(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]), 10, 10).unwrap();
        assert_eq!(px, vec![(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)]);
        assert_eq!(px, brute_force(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)], 10, 10));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(enclosed_pixels(&sketch(&[(0.0, 0.0), (3.0, 3.0)]), 10, 10), Err(Error::EmptyRegion)));
        assert!(matches!(
            enclosed_pixels(&sketch(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]), 10, 10),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn concave_polygon_matches_oracle() {
        let vs = [(1.0, 1.0), (8.0, 1.0), (8.0, 8.0), (4.5, 3.0), (1.0, 8.0)];
        assert_eq!(enclosed_pixels(&sketch(&vs), 12, 12).unwrap(), brute_force(&vs, 12, 12));
    }

    #[test]
    fn clips_to_image() {
        let vs = [(0.0, 0.0), (9.0, 0.0), (9.0, 9.0), (0.0, 9.0)];
        let px = enclosed_pixels(&sketch(&vs), 5, 5).unwrap();
        assert_eq!(px.len(), 25);
    }

    #[test]
    fn validation() {
        let ok = Sketch::new(vec![(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)], Label::Permissible, 5, 5);
        assert!(ok.is_ok());
        let out = Sketch::new(vec![(0.0, 0.0), (5.0, 0.0), (0.0, 4.0)], Label::Permissible, 5, 5);
        assert!(matches!(out, Err(Error::InvalidSketch(_))));
        let bowtie = Sketch::new(vec![(0.0, 0.0), (4.0, 4.0), (4.0, 0.0), (0.0, 4.0)], Label::Permissible, 5, 5);
        assert!(matches!(bowtie, Err(Error::InvalidSketch(_))));
        let two = Sketch::new(vec![(0.0, 0.0), (4.0, 4.0)], Label::Permissible, 5, 5);
        assert!(matches!(two, Err(Error::InvalidSketch(_))));
    }

    #[test]
    fn label_round_trip() {
        for l in [Label::RegionOfInterest, Label::Permissible] {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!("blue".parse::<Label>().is_err());
    }

    prop_compose! {
        /// Star-shaped polygons around a center are simple by construction.
        fn star_polygon()(n in 3usize..12, seed in proptest::collection::vec((0.0f64..1.0, 0.2f64..1.0), 12))
            -> Vec<(f64, f64)> {
            let mut angles: Vec<(f64, f64)> = seed[..n].iter().enumerate()
                .map(|(i, &(jit, r))| ((i as f64 + 0.8 * jit) / n as f64 * std::f64::consts::TAU, r))
                .collect();
            angles.sort_by(|a, b| a.0.total_cmp(&b.0));
            angles.iter().map(|&(a, r)| (15.0 + 12.0 * r * a.cos(), 15.0 + 12.0 * r * a.sin())).collect()
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(vs in star_polygon()) {
            prop_assume!(signed_area(&vs).abs() > 1e-6);
            let ours = enclosed_pixels(&sketch(&vs), 32, 32);
            let oracle = brute_force(&vs, 32, 32);
            match ours {
                Ok(px) => prop_assert_eq!(px, oracle),
                Err(_) => prop_assert!(oracle.is_empty()),
            }
        }
    }
}
