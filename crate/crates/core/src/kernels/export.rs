use std::io::Write;

use super::heatmap::HeatmapGrid;
use crate::error::Result;

/// Matrix CSV with a `c0,c1,...` header; values in shortest round-trip form.
pub fn write_csv(h: &HeatmapGrid, mut w: impl Write) -> Result<()> {
    let header: Vec<String> = (0..h.width).map(|j| format!("c{j}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..h.height {
        let row: Vec<String> = h.values.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Affine map from similarity values to 8-bit gray levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgmScaling {
    pub min: f64,
    pub max: f64,
}

impl PgmScaling {
    /// `round(255·(v − min)/(max − min))`, or 0 when the map is constant.
    pub fn level(&self, v: f64) -> u8 {
        if self.max > self.min {
            (255.0 * (v - self.min) / (self.max - self.min))
                .round()
                .clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }
}

pub fn pgm_scaling(h: &HeatmapGrid) -> PgmScaling {
    let d = h.values.data();
    PgmScaling {
        min: d.iter().copied().fold(f64::INFINITY, f64::min),
        max: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// ASCII PGM (P2), one image row per line.
pub fn write_pgm(h: &HeatmapGrid, mut w: impl Write) -> Result<PgmScaling> {
    let s = pgm_scaling(h);
    writeln!(w, "P2\n{} {}\n255", h.width, h.height)?;
    for i in 0..h.height {
        let row: Vec<String> = h.values.row(i).iter().map(|&v| s.level(v).to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(s)
}

/// Sidecar text: `key = value` lines with the scaling first.
pub fn write_meta(s: &PgmScaling, extra: &[(&str, String)], mut w: impl Write) -> Result<()> {
    writeln!(w, "min = {}", s.min)?;
    writeln!(w, "max = {}", s.max)?;
    writeln!(w, "scaling = level = round(255 * (value - min) / (max - min))")?;
    for (k, v) in extra {
        writeln!(w, "{k} = {v}")?;
    }
    Ok(())
}
