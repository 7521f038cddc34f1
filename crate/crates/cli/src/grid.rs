//! Plot-data grids of model probabilities on a horizontal plane.
//!
//! ```text
//! # sdi-grid/1
//! # quantity=roi-probability rows=2 cols=3 x0=-1 x1=1 y0=0 y1=1 z=0.45
//! 0.1 0.2 0.1
//! 0.3 0.9 0.3
//! ```
//!
//! Values are tab separated.
//!
//! Row `i` holds `y = y0 + i (y1 - y0) / (rows - 1)`, column `j` likewise in x.

use std::fmt::Write as _;

use sdi_core::format::sig6;
use sdi_core::sim::SamplingBox;
use sdi_core::{EnergyFunction, Result};

pub const GRID_FORMAT: &str = "sdi-grid/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub quantity: String,
    pub rows: usize,
    pub cols: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Plane height for 3D models.
    pub z: Option<f64>,
    /// Row-major, `rows * cols` values.
    pub values: Vec<f64>,
}

fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n <= 1 {
        0.5 * (lo + hi)
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

impl Grid {
    /// Samples `sigmoid(E)` over the xy extent of `region`, at height `z` for
    /// 3D models.
    pub fn sample(
        quantity: &str,
        model: &dyn EnergyFunction,
        region: &SamplingBox,
        z: Option<f64>,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let (x, y) = ((region.lo[0], region.hi[0]), (region.lo[1], region.hi[1]));
        let mut pts = Vec::with_capacity(rows * cols * 3);
        for i in 0..rows {
            for j in 0..cols {
                pts.push(axis(x.0, x.1, cols, j));
                pts.push(axis(y.0, y.1, rows, i));
                if let Some(z) = z {
                    pts.push(z);
                }
            }
        }
        let values = model.energies(&pts)?.into_iter().map(sdi_core::sim::sigmoid).collect();
        Ok(Self { quantity: quantity.into(), rows, cols, x, y, z, values })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {GRID_FORMAT}\n");
        let _ = write!(
            out,
            "# quantity={} rows={} cols={} x0={} x1={} y0={} y1={}",
            self.quantity,
            self.rows,
            self.cols,
            sig6(self.x.0),
            sig6(self.x.1),
            sig6(self.y.0),
            sig6(self.y.1)
        );
        if let Some(z) = self.z {
            let _ = write!(out, " z={}", sig6(z));
        }
        out.push('\n');
        for row in self.values.chunks(self.cols.max(1)) {
            let line: Vec<String> = row.iter().map(|v| sig6(*v)).collect();
            out.push_str(&line.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Parses [`Grid::to_text`] output, checking the payload against the
    /// declared dimensions.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(&*format!("# {GRID_FORMAT}")) {
            return Err("missing grid format line".into());
        }
        let header = lines.next().and_then(|l| l.strip_prefix("# ")).ok_or("missing header line")?;
        let mut grid = Grid { quantity: String::new(), rows: 0, cols: 0, x: (0.0, 0.0), y: (0.0, 0.0), z: None, values: Vec::new() };
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| format!("bad header field {field:?}"))?;
            let num = || value.parse::<f64>().map_err(|e| format!("{key}: {e}"));
            match key {
                "quantity" => grid.quantity = value.into(),
                "rows" => grid.rows = value.parse().map_err(|e| format!("rows: {e}"))?,
                "cols" => grid.cols = value.parse().map_err(|e| format!("cols: {e}"))?,
                "x0" => grid.x.0 = num()?,
                "x1" => grid.x.1 = num()?,
                "y0" => grid.y.0 = num()?,
                "y1" => grid.y.1 = num()?,
                "z" => grid.z = Some(num()?),
                _ => return Err(format!("unknown header field {key:?}")),
            }
        }
        let mut rows = 0;
        for line in lines {
            let row: Vec<f64> =
                line.split('\t').map(|v| v.parse::<f64>().map_err(|e| format!("value {v:?}: {e}"))).collect::<Result<_, _>>()?;
            if row.len() != grid.cols {
                return Err(format!("row {rows} has {} values, header declares {}", row.len(), grid.cols));
            }
            grid.values.extend(row);
            rows += 1;
        }
        if rows != grid.rows {
            return Err(format!("payload has {rows} rows, header declares {}", grid.rows));
        }
        Ok(grid)
    }
}
