//! Expected photon rates and the Poisson negative log-likelihood of a depth
//! hypothesis.

use super::condition::{depth_to_bin, SimulationCondition};
use super::events::PhotonEvents;
use super::scene::SceneTruth;
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Discretized unit-sum Gaussian instrument response.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianIrf {
    sigma: f64,
    radius: usize,
}

impl GaussianIrf {
    /// Support extends 6 sigma either side of the centre.
    pub fn new(sigma_bins: f64) -> Self {
        let sigma = sigma_bins.max(0.0);
        Self {
            sigma,
            radius: (6.0 * sigma).ceil() as usize,
        }
    }

    pub fn for_condition(cond: &SimulationCondition) -> Self {
        Self::new(cond.sigma_bins())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Weights on integer bins around a real-valued centre. Returns the first
    /// bin (may be negative) and the normalized weights.
    pub fn weights_around(&self, center: f64) -> (i64, Vec<f64>) {
        if self.sigma == 0.0 {
            return (center.round() as i64, vec![1.0]);
        }
        let r = self.radius as f64;
        let first = (center - r).ceil() as i64;
        let last = (center + r).floor() as i64;
        let two_var = 2.0 * self.sigma * self.sigma;
        let mut w: Vec<f64> = (first..=last)
            .map(|k| {
                let d = k as f64 - center;
                (-d * d / two_var).exp()
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        (first, w)
    }

    /// Symmetric kernel on offsets `-radius..=radius`.
    pub fn kernel(&self) -> Vec<f64> {
        self.weights_around(0.0).1
    }
}

/// Per-pixel rate model `lambda(t) = g * (a * h(t - t_d) + b)`.
///
/// `a` is the expected number of signal photons of the pixel and `b` the
/// expected background photons per bin.
#[derive(Clone, Debug)]
pub struct RateModel {
    cond: SimulationCondition,
    signal_bin: Raster<f64>,
    intensity: Raster<f64>,
    background: Raster<f64>,
    irf: GaussianIrf,
}

impl RateModel {
    /// Builds the model of a depth / reflectance / background hypothesis.
    /// Reflectance is scaled by `n_pulses * msppp` into expected signal photons.
    pub fn new(
        depth_m: &Raster<f64>,
        reflectance: &Raster<f64>,
        background_per_bin: &Raster<f64>,
        cond: &SimulationCondition,
    ) -> Result<Self> {
        cond.validate()?;
        reflectance.ensure_dims(depth_m.dims())?;
        background_per_bin.ensure_dims(depth_m.dims())?;
        let mut signal_bin = Raster::filled(depth_m.width(), depth_m.height(), 0.0);
        for (dst, &d) in signal_bin.as_mut_slice().iter_mut().zip(depth_m.as_slice()) {
            *dst = depth_to_bin(d, cond)?;
        }
        Ok(Self {
            cond: cond.clone(),
            signal_bin,
            intensity: reflectance.map(|r| cond.signal_mean(r)),
            background: background_per_bin.clone(),
            irf: GaussianIrf::for_condition(cond),
        })
    }

    /// The model that generated `scene` under `cond`. Without an explicit
    /// background raster the SBR-implied level is spread uniformly over all bins.
    pub fn from_scene(scene: &SceneTruth, cond: &SimulationCondition) -> Result<Self> {
        let background = match &scene.background {
            Some(b) => b.clone(),
            None => {
                let (w, h) = scene.dims();
                Raster::filled(w, h, sbr_background_per_bin(scene, cond))
            }
        };
        Self::new(&scene.depth_m, &scene.reflectance, &background, cond)
    }

    pub fn condition(&self) -> &SimulationCondition {
        &self.cond
    }

    pub fn irf(&self) -> &GaussianIrf {
        &self.irf
    }

    pub fn dims(&self) -> (usize, usize) {
        self.signal_bin.dims()
    }

    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        self.intensity.get(x, y)
    }

    pub fn background(&self, x: usize, y: usize) -> f64 {
        self.background.get(x, y)
    }

    fn irf_at(&self, x: usize, y: usize, t: i64) -> f64 {
        let (first, w) = self.irf.weights_around(self.signal_bin.get(x, y));
        let idx = t - first;
        if idx < 0 || idx as usize >= w.len() {
            0.0
        } else {
            w[idx as usize]
        }
    }

    /// Expected count of pixel `(x, y)` in bin `t`.
    pub fn expected_rate(&self, x: usize, y: usize, t: u32) -> f64 {
        let a = self.intensity.get(x, y);
        let b = self.background.get(x, y);
        let h = if a == 0.0 { 0.0 } else { self.irf_at(x, y, t as i64) };
        self.cond.gain * (a * h + b)
    }

    /// Sum of the rate of a pixel over all bins `[0, t_bin_max]`.
    pub fn total_rate(&self, x: usize, y: usize) -> f64 {
        let (first, w) = self.irf.weights_around(self.signal_bin.get(x, y));
        let in_range: f64 = w
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = first + *i as i64;
                t >= 0 && t <= self.cond.t_bin_max as i64
            })
            .map(|(_, v)| v)
            .sum();
        self.cond.gain
            * (self.intensity.get(x, y) * in_range
                + self.background.get(x, y) * self.cond.n_bins() as f64)
    }
}

/// Uniform background per bin implied by the SBR: `mean_signal / sbr / T`.
pub fn sbr_background_per_bin(scene: &SceneTruth, cond: &SimulationCondition) -> f64 {
    if cond.sbr.is_infinite() {
        return 0.0;
    }
    cond.signal_mean(scene.reflectance.mean()) / cond.sbr / cond.n_bins() as f64
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `-log P(n | lambda)` for a Poisson count.
pub fn poisson_nll_term(n: u32, lambda: f64) -> f64 {
    if n == 0 {
        return lambda;
    }
    lambda - n as f64 * lambda.ln() + ln_factorial(n)
}

/// Negative log-likelihood of the observed events under `model`, summed over
/// every pixel and every bin, including the `log n!` constants.
pub fn neg_log_likelihood(events: &PhotonEvents, model: &RateModel) -> Result<f64> {
    if events.dims() != model.dims() {
        return Err(Error::DimensionMismatch {
            expected: model.dims(),
            got: events.dims(),
        });
    }
    if events.condition().t_bin_max != model.condition().t_bin_max {
        return Err(Error::InvalidCondition(
            "event and model t_bin_max differ".into(),
        ));
    }
    let (width, height) = events.dims();
    let pixels = events.per_pixel();
    let mut total = 0.0;
    for y in 0..height {
        for x in 0..width {
            // every bin contributes lambda; occupied bins also the count terms
            total += model.total_rate(x, y);
            let px = pixels[y * width + x];
            let mut i = 0;
            while i < px.len() {
                let bin = px[i].bin;
                let mut n = 0u32;
                while i < px.len() && px[i].bin == bin {
                    n += 1;
                    i += 1;
                }
                let lambda = model.expected_rate(x, y, bin);
                if lambda <= 0.0 {
                    return Err(Error::ImpossibleObservation { x, y, bin, count: n });
                }
                total += poisson_nll_term(n, lambda) - lambda;
            }
        }
    }
    Ok(total)
}
