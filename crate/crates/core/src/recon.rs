//! Depth reconstruction from photon events and image-quality metrics.
//!
//! Each pixel's histogram is correlated with the instrument response and the
//! arg-max bin taken as the depth estimate, which is the Poisson
//! maximum-likelihood position of a single return over a flat background.
//! Empty pixels are filled by iterated 3x3 medians of their valid neighbours,
//! then the whole image receives one 3x3 median pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon_sim::{GaussianIrf, PhotonEvent, PhotonEvents, SceneTruth, SimulationCondition};
use crate::raster::Raster;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub depth_m: Raster<f64>,
    /// False where the pixel had no photons before infilling.
    pub valid_mask: Raster<bool>,
}

impl DepthImage {
    /// Wraps a depth raster with every pixel marked valid.
    pub fn from_depth(depth_m: Raster<f64>) -> Self {
        let valid_mask = Raster::filled(depth_m.width(), depth_m.height(), true);
        Self {
            depth_m,
            valid_mask,
        }
    }

    pub fn width(&self) -> usize {
        self.depth_m.width()
    }

    pub fn height(&self) -> usize {
        self.depth_m.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth_m.dims()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageQuality {
    pub rmse: f64,
    pub ssim: f64,
}

/// Arg-max of the IRF-correlated histogram of one pixel; ties go to the
/// lowest bin. `bins` must be sorted ascending and non-empty.
pub fn matched_filter_bin(bins: &[u32], kernel: &[f64], t_bin_max: u32) -> u32 {
    debug_assert!(!bins.is_empty());
    let radius = (kernel.len() / 2) as i64;
    let mut best = (f64::NEG_INFINITY, 0u32);
    let mut buf = Vec::new();
    let mut start = 0;
    while start < bins.len() {
        // photons closer than 2R interact; treat each such run separately
        let mut end = start + 1;
        while end < bins.len() && (bins[end] - bins[end - 1]) as i64 <= 2 * radius {
            end += 1;
        }
        let lo = (bins[start] as i64 - radius).max(0);
        let hi = (bins[end - 1] as i64 + radius).min(t_bin_max as i64);
        buf.clear();
        buf.resize((hi - lo + 1) as usize, 0.0);
        for &b in &bins[start..end] {
            for (k, w) in kernel.iter().enumerate() {
                let t = b as i64 + k as i64 - radius;
                if t >= lo && t <= hi {
                    buf[(t - lo) as usize] += w;
                }
            }
        }
        for (i, &score) in buf.iter().enumerate() {
            if score > best.0 {
                best = (score, (lo + i as i64) as u32);
            }
        }
        start = end;
    }
    best.1
}

/// Per-pixel arg-max bins, `None` for pixels without photons.
pub fn estimate_bins(events: &PhotonEvents) -> Raster<Option<u32>> {
    let cond = events.condition();
    let kernel = GaussianIrf::for_condition(cond).kernel();
    let pixels = events.per_pixel();
    let mut bins_buf: Vec<u32> = Vec::new();
    let data = pixels
        .iter()
        .map(|px: &&[PhotonEvent]| {
            if px.is_empty() {
                None
            } else {
                bins_buf.clear();
                bins_buf.extend(px.iter().map(|e| e.bin));
                Some(matched_filter_bin(&bins_buf, &kernel, cond.t_bin_max))
            }
        })
        .collect();
    Raster::from_vec(events.width(), events.height(), data).expect("dims preserved")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn neighbourhood(width: usize, height: usize, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> {
    let xs = x.saturating_sub(1)..=(x + 1).min(width - 1);
    let ys = y.saturating_sub(1)..=(y + 1).min(height - 1);
    ys.flat_map(move |ny| xs.clone().map(move |nx| (nx, ny)))
}

/// Fills invalid pixels by repeated synchronous passes: every invalid pixel
/// with at least one valid 3x3 neighbour takes their median.
pub fn infill(depth: &mut Raster<f64>, valid: &Raster<bool>) -> Result<()> {
    let (w, h) = depth.dims();
    if !valid.as_slice().iter().any(|&v| v) {
        return Err(Error::NoPhotons);
    }
    let mut known = valid.clone();
    let mut scratch = Vec::with_capacity(9);
    loop {
        let mut updates = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if known.get(x, y) {
                    continue;
                }
                scratch.clear();
                scratch.extend(
                    neighbourhood(w, h, x, y)
                        .filter(|&(nx, ny)| known.get(nx, ny))
                        .map(|(nx, ny)| depth.get(nx, ny)),
                );
                if !scratch.is_empty() {
                    updates.push((x, y, median(&mut scratch)));
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (x, y, v) in updates {
            depth.set(x, y, v);
            known.set(x, y, true);
        }
    }
    Ok(())
}

/// One 3x3 median pass; windows are clipped at the borders.
pub fn median_filter(depth: &Raster<f64>) -> Raster<f64> {
    let (w, h) = depth.dims();
    let mut scratch = Vec::with_capacity(9);
    Raster::from_fn(w, h, |x, y| {
        scratch.clear();
        scratch.extend(neighbourhood(w, h, x, y).map(|(nx, ny)| depth.get(nx, ny)));
        median(&mut scratch)
    })
}

/// Reconstructs a depth image from photon events.
pub fn reconstruct(events: &PhotonEvents) -> Result<DepthImage> {
    let cond: &SimulationCondition = events.condition();
    let bins = estimate_bins(events);
    let valid_mask = bins.map(|b| b.is_some());
    let mut depth = bins.map(|b| b.map_or(0.0, |t| cond.bin_to_depth(t as f64)));
    infill(&mut depth, &valid_mask)?;
    Ok(DepthImage {
        depth_m: median_filter(&depth),
        valid_mask,
    })
}

pub fn rmse_raster(pred: &Raster<f64>, truth: &Raster<f64>) -> Result<f64> {
    pred.ensure_dims(truth.dims())?;
    if truth.is_empty() {
        return Err(Error::Empty("raster"));
    }
    let sse: f64 = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Root-mean-square depth error in meters.
pub fn rmse(pred: &DepthImage, truth: &SceneTruth) -> Result<f64> {
    rmse_raster(&pred.depth_m, &truth.depth_m)
}

/// Whole-image SSIM with stabilizers `(0.01 L)^2` and `(0.03 L)^2`.
/// Symmetric in its two image arguments.
pub fn ssim_with_range(x: &Raster<f64>, y: &Raster<f64>, dynamic_range: f64) -> Result<f64> {
    x.ensure_dims(y.dims())?;
    if x.is_empty() {
        return Err(Error::Empty("raster"));
    }
    if !(dynamic_range > 0.0) {
        return Err(Error::DegenerateRange);
    }
    let n = x.len() as f64;
    let mx = x.mean();
    let my = y.mean();
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cov += da * db;
    }
    vx /= n;
    vy /= n;
    cov /= n;
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    Ok((2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
}

/// SSIM of a reconstruction against ground truth, with the dynamic range
/// taken from the truth.
pub fn ssim(pred: &DepthImage, truth: &SceneTruth) -> Result<f64> {
    let (lo, hi) = truth.depth_m.min_max();
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateRange);
    }
    ssim_with_range(&pred.depth_m, &truth.depth_m, range)
}

pub fn image_quality(pred: &DepthImage, truth: &SceneTruth) -> Result<ImageQuality> {
    Ok(ImageQuality {
        rmse: rmse(pred, truth)?,
        ssim: ssim(pred, truth)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond() -> SimulationCondition {
        SimulationCondition {
            t_bin_max: 2000,
            pulse_rms: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn single_photon_inverts_depth() {
        let ev = PhotonEvents::new(1, 1, vec![PhotonEvent { x: 0, y: 0, bin: 1000 }], cond()).unwrap();
        let img = reconstruct(&ev).unwrap();
        let d = img.depth_m.get(0, 0);
        assert!((d - 14.9896229).abs() <= cond().bin_depth());
        assert!(img.valid_mask.get(0, 0));
    }

    #[test]
    fn ties_go_to_lowest_bin() {
        assert_eq!(matched_filter_bin(&[30, 900], &[1.0], 2000), 30);
        let k = GaussianIrf::new(2.0).kernel();
        assert_eq!(matched_filter_bin(&[500, 1500], &k, 2000), 500);
        // a pair beats a lone photon
        assert_eq!(matched_filter_bin(&[100, 1500, 1501], &k, 2000), 1500);
        assert_eq!(matched_filter_bin(&[7, 7, 9, 9, 9], &[1.0], 2000), 9);
    }

    #[test]
    fn centre_hole_filled_from_neighbours() {
        let mut depth = Raster::filled(3, 3, 10.0);
        depth.set(1, 1, 0.0);
        let mut valid = Raster::filled(3, 3, true);
        valid.set(1, 1, false);
        infill(&mut depth, &valid).unwrap();
        assert_eq!(depth.get(1, 1), 10.0);
    }

    #[test]
    fn infill_propagates_over_several_passes() {
        let mut depth = Raster::filled(6, 1, 0.0);
        depth.set(0, 0, 4.0);
        let mut valid = Raster::filled(6, 1, false);
        valid.set(0, 0, true);
        infill(&mut depth, &valid).unwrap();
        assert!(depth.as_slice().iter().all(|&d| d == 4.0));
        let none = Raster::filled(6, 1, false);
        assert!(matches!(infill(&mut depth, &none), Err(Error::NoPhotons)));
    }

    #[test]
    fn empty_events_cannot_be_reconstructed() {
        let ev = PhotonEvents::new(4, 4, vec![], cond()).unwrap();
        assert!(matches!(reconstruct(&ev), Err(Error::NoPhotons)));
    }

    fn scene_of(values: &[f64]) -> SceneTruth {
        SceneTruth::uniform(values.len(), 1, 0.0, 0.5)
            .map(|mut s| {
                s.depth_m = Raster::from_vec(values.len(), 1, values.to_vec()).unwrap();
                s
            })
            .unwrap()
    }

    #[test]
    fn rmse_examples() {
        let truth = scene_of(&[1.0, 2.0, 3.0, 4.0]);
        let same = DepthImage::from_depth(truth.depth_m.clone());
        assert_eq!(rmse(&same, &truth).unwrap(), 0.0);
        let shifted = DepthImage::from_depth(truth.depth_m.map(|d| d + 1.0));
        assert!((rmse(&shifted, &truth).unwrap() - 1.0).abs() < 1e-12);
        let one_off = DepthImage::from_depth(Raster::from_vec(4, 1, vec![4.0, 2.0, 3.0, 4.0]).unwrap());
        assert!((rmse(&one_off, &truth).unwrap() - 1.5).abs() < 1e-12);
        let wrong = DepthImage::from_depth(Raster::filled(3, 1, 0.0));
        assert!(rmse(&wrong, &truth).is_err());
    }

    #[test]
    fn ssim_examples() {
        let truth = scene_of(&[1.0, 3.0, 3.0, 1.0]);
        let same = DepthImage::from_depth(truth.depth_m.clone());
        assert!((ssim(&same, &truth).unwrap() - 1.0).abs() < 1e-12);

        let k = 0.5;
        let offset = DepthImage::from_depth(truth.depth_m.map(|d| d + k));
        let l: f64 = 2.0;
        let c1 = (0.01 * l).powi(2);
        let (mx, my) = (2.0, 2.0 + k);
        let expect = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
        let got = ssim(&offset, &truth).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!(got < 1.0);

        // checkerboard against its mirror about the shared mean
        let anti = DepthImage::from_depth(truth.depth_m.map(|d| 4.0 - d));
        assert!(ssim(&anti, &truth).unwrap() < 0.0);

        let flat = scene_of(&[2.0; 4]);
        assert!(matches!(ssim(&same, &flat), Err(Error::DegenerateRange)));
    }
}
