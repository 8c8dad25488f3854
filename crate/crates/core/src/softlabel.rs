//! Proposal-level error pooling and unknown-object soft labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{ErrorMap, Level};
use crate::geometry::BBox;
use crate::weibull::{WeibullPair, SAMPLE_FLOOR};

/// Object-size band handled by one pyramid level, as an area interval in
/// input pixels squared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRange {
    pub level: Level,
    pub min_area: f64,
    pub max_area: f64,
}

/// `[32², 64²]`, `[64², 128²]`, `[128², 256²]`, `[256², 512²]` for P3..P6.
pub fn default_size_ranges() -> Vec<SizeRange> {
    Level::ALL
        .iter()
        .enumerate()
        .map(|(k, &level)| {
            let lo = 32.0 * (1u32 << k) as f64;
            SizeRange {
                level,
                min_area: lo * lo,
                max_area: 4.0 * lo * lo,
            }
        })
        .collect()
}

/// Level whose side-length band `[sqrt(min_area), sqrt(max_area))` holds
/// `sqrt(area)`. Boxes smaller than every band go to the finest level,
/// larger ones to the coarsest.
pub fn route_level(b: &BBox, size_ranges: &[SizeRange]) -> Result<Level> {
    if size_ranges.is_empty() {
        return Err(Error::Invalid("no size ranges configured".into()));
    }
    let mut ranges = size_ranges.to_vec();
    ranges.sort_by(|a, b| a.min_area.total_cmp(&b.min_area));
    let side = b.area().sqrt();
    if side < ranges[0].min_area.sqrt() {
        return Ok(ranges[0].level);
    }
    for r in &ranges {
        if side >= r.min_area.sqrt() && side < r.max_area.sqrt() {
            return Ok(r.level);
        }
    }
    Ok(ranges[ranges.len() - 1].level)
}

fn bilinear(e: &ErrorMap, gx: f64, gy: f64) -> f64 {
    // cell (i, j) is centered at (j + 0.5, i + 0.5) in grid units
    let (h, w) = (e.height(), e.width());
    let u = (gx - 0.5).clamp(0.0, (w - 1) as f64);
    let v = (gy - 0.5).clamp(0.0, (h - 1) as f64);
    let (j0, i0) = (u.floor() as usize, v.floor() as usize);
    let (j1, i1) = ((j0 + 1).min(w - 1), (i0 + 1).min(h - 1));
    let (fu, fv) = (u - j0 as f64, v - i0 as f64);
    let top = e.get(i0, j0) * (1.0 - fu) + e.get(i0, j1) * fu;
    let bottom = e.get(i1, j0) * (1.0 - fu) + e.get(i1, j1) * fu;
    top * (1.0 - fv) + bottom * fv
}

/// Single-bin RoIAlign with a 2x2 grid of bilinear sample points.
///
/// The box is mapped to grid units by dividing by `stride` without
/// rounding; samples sit at 1/4 and 3/4 of each side. Samples that fall
/// outside the map read the nearest border cell.
pub fn pooled_error(e: &ErrorMap, b: &BBox, stride: u32) -> Result<f64> {
    roi_align(e, b, stride, 1, 2).map(|bins| bins[0])
}

/// RoIAlign of `bins x bins` output cells, each averaging
/// `samples x samples` bilinear points; row-major output.
pub fn roi_align(e: &ErrorMap, b: &BBox, stride: u32, bins: usize, samples: usize) -> Result<Vec<f64>> {
    if stride == 0 || bins == 0 || samples == 0 {
        return Err(Error::Invalid("stride, bins and samples must be positive".into()));
    }
    let s = stride as f64;
    let (x0, y0) = (b.x / s, b.y / s);
    let (bw, bh) = (b.w / s, b.h / s);
    let (gw, gh) = (e.width() as f64, e.height() as f64);
    if x0 >= gw || y0 >= gh || x0 + bw <= 0.0 || y0 + bh <= 0.0 {
        return Err(Error::Invalid(format!(
            "box {:?} lies outside the {}x{} map at {}",
            b.to_array(),
            e.height(),
            e.width(),
            e.level()
        )));
    }
    let (cell_w, cell_h) = (bw / bins as f64, bh / bins as f64);
    let n = (samples * samples) as f64;
    let mut out = Vec::with_capacity(bins * bins);
    for bi in 0..bins {
        for bj in 0..bins {
            let mut acc = 0.0;
            for si in 0..samples {
                let gy = y0 + bi as f64 * cell_h + (si as f64 + 0.5) * cell_h / samples as f64;
                for sj in 0..samples {
                    let gx = x0 + bj as f64 * cell_w + (sj as f64 + 0.5) * cell_w / samples as f64;
                    acc += bilinear(e, gx, gy);
                }
            }
            out.push(acc / n);
        }
    }
    Ok(out)
}

/// Soft label with a flag for the case where both densities vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftLabel {
    pub value: f64,
    pub underflow: bool,
}

/// `(f_kn(re) / (f_bg(re) + f_kn(re)))^gamma`.
///
/// `re` is floored at the sample floor. When both densities underflow to
/// zero the label is 0 and flagged.
pub fn soft_label(pair: &WeibullPair, re: f64, gamma: f64) -> Result<SoftLabel> {
    if !(re >= 0.0) {
        return Err(Error::Invalid(format!("reconstruction error must be >= 0, got {re}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Invalid(format!("gamma must be > 0, got {gamma}")));
    }
    let re = re.max(SAMPLE_FLOOR);
    let fk = pair.fg.pdf(re)?;
    let fb = pair.bg.pdf(re)?;
    if fk == 0.0 && fb == 0.0 {
        return Ok(SoftLabel {
            value: 0.0,
            underflow: true,
        });
    }
    let ratio = if fk.is_finite() && fb.is_finite() {
        fk / (fb + fk)
    } else {
        // an infinite density: compare in the log domain
        let d = pair.bg.ln_pdf(re) - pair.fg.ln_pdf(re);
        1.0 / (1.0 + d.exp())
    };
    Ok(SoftLabel {
        value: ratio.powf(gamma).clamp(0.0, 1.0),
        underflow: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftLabeledProposal {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub level: Level,
    pub pooled_error: f64,
    pub soft_label: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub underflow: bool,
}
