//! Amplitude channel to the information receiver: constellation, pathloss
//! and fading, and the mutual-information engine.
//!
//! With uniformly distributed phase, the information carried by a symbol
//! depends only on its amplitude; the received amplitude follows a mixture
//! of Rician densities and all quantities below are computed from it.

mod bessel;
mod engine;
mod montecarlo;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use bessel::{i0e, ln_i0e};
pub use engine::{expected_mutual_information, MiEngine, QUADRATURE_POINTS, TAIL_SIGMAS};
pub use montecarlo::{monte_carlo_mutual_information, McEstimate, McSettings, PhaseLaw};

use crate::error::{Error, Result};

/// Uniformly spaced amplitudes `r_k = k · r_max / (S − 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    amplitudes: Vec<f64>,
    r_max: f64,
}

impl Constellation {
    pub fn uniform(size: usize, r_max: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::config("constellation.size", "must be at least 1"));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::config(
                "constellation.r_max",
                "must be finite and > 0",
            ));
        }
        let amplitudes = if size == 1 {
            vec![0.0]
        } else {
            (0..size)
                .map(|k| k as f64 * r_max / (size - 1) as f64)
                .collect()
        };
        Ok(Self { amplitudes, r_max })
    }

    /// Constellation whose largest amplitude carries the peak power
    /// `peak_dbm` (so `r_max² = P_max` in watts).
    pub fn from_peak_power_dbm(size: usize, peak_dbm: f64) -> Result<Self> {
        Self::uniform(size, crate::dbm_to_watts(peak_dbm).sqrt())
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Transmit power `r_k²` of each symbol.
    pub fn powers(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|r| r * r).collect()
    }
}

/// Probability vector over constellation amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudePdf {
    pub p: Vec<f64>,
}

impl AmplitudePdf {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let pdf = Self { p };
        pdf.validate(1e-9)?;
        Ok(pdf)
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            p: vec![1.0 / size as f64; size],
        }
    }

    pub fn point_mass(size: usize, index: usize) -> Self {
        let mut p = vec![0.0; size];
        p[index] = 1.0;
        Self { p }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.p.iter().any(|&x| !(x >= -tol) || !x.is_finite()) {
            return Err(Error::Domain(
                "pdf has negative or non-finite entries".into(),
            ));
        }
        let sum: f64 = self.p.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Domain(format!("pdf sums to {sum}, expected 1")));
        }
        Ok(())
    }

    /// `Σ p_k r_k²`, the average transmit power.
    pub fn average_power(&self, constellation: &Constellation) -> f64 {
        self.p
            .iter()
            .zip(constellation.amplitudes())
            .map(|(p, r)| p * r * r)
            .sum()
    }
}

/// Small-scale fading law for `|h̃|`, normalized to unit mean square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fading {
    #[default]
    None,
    Rayleigh,
    Rician {
        k_factor: f64,
    },
}

impl Fading {
    /// Draws `|h̃|²`.
    pub fn sample_power<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Fading::None => 1.0,
            Fading::Rayleigh => {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                0.5 * (x * x + y * y)
            }
            Fading::Rician { k_factor } => {
                let los = (k_factor / (k_factor + 1.0)).sqrt();
                let s = (0.5 / (k_factor + 1.0)).sqrt();
                let x: f64 = StandardNormal.sample(rng);
                let y: f64 = StandardNormal.sample(rng);
                (los + s * x).powi(2) + (s * y).powi(2)
            }
        }
    }
}

/// Large-scale link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub pathloss_exponent: f64,
    pub distance: f64,
    pub reference_distance: f64,
    pub carrier_frequency: f64,
    #[serde(default)]
    pub fading: Fading,
}

impl LinkSpec {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.reference_distance > 0.0) {
            return Err(Error::config(
                format!("{name}.reference_distance"),
                "must be > 0",
            ));
        }
        if !(self.distance >= self.reference_distance) {
            return Err(Error::config(
                format!("{name}.distance"),
                "must be at least the reference distance",
            ));
        }
        if !(self.carrier_frequency > 0.0) {
            return Err(Error::config(
                format!("{name}.carrier_frequency"),
                "must be > 0",
            ));
        }
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::config(
                format!("{name}.pathloss_exponent"),
                "must be > 0",
            ));
        }
        if let Fading::Rician { k_factor } = self.fading {
            if !(k_factor >= 0.0 && k_factor.is_finite()) {
                return Err(Error::config(
                    format!("{name}.fading.k_factor"),
                    "must be >= 0",
                ));
            }
        }
        Ok(())
    }

    /// Mean power gain `(c / (4π f_c d0))² (d0/d)^α`.
    pub fn mean_gain(&self) -> Result<f64> {
        if self.distance < self.reference_distance {
            return Err(Error::Domain(format!(
                "distance {} m is below the reference distance {} m",
                self.distance, self.reference_distance
            )));
        }
        let free = crate::SPEED_OF_LIGHT
            / (4.0 * std::f64::consts::PI * self.carrier_frequency * self.reference_distance);
        Ok(free * free * (self.reference_distance / self.distance).powf(self.pathloss_exponent))
    }

    /// Power gain `|h|²` including one fading draw.
    pub fn pathloss_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.mean_gain()? * self.fading.sample_power(rng))
    }
}

/// Links to the information receiver and the energy harvester, plus the
/// receiver noise variance per real dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub ir: LinkSpec,
    pub eh: LinkSpec,
    pub noise_variance: f64,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        self.ir.validate("channel.ir")?;
        self.eh.validate("channel.eh")?;
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::config(
                "channel.noise_variance",
                "must be finite and > 0",
            ));
        }
        Ok(())
    }

    /// `|h_I|` without fading.
    pub fn ir_gain_magnitude(&self) -> Result<f64> {
        Ok(self.ir.mean_gain()?.sqrt())
    }

    /// `|h_E|` without fading.
    pub fn eh_gain_magnitude(&self) -> Result<f64> {
        Ok(self.eh.mean_gain()?.sqrt())
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_variance.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn link(d: f64, alpha: f64, fading: Fading) -> LinkSpec {
        LinkSpec {
            pathloss_exponent: alpha,
            distance: d,
            reference_distance: 1.0,
            carrier_frequency: 2.45e9,
            fading,
        }
    }

    #[test]
    fn pathloss_reference_values() {
        let g = link(1.0, 3.0, Fading::None).mean_gain().unwrap();
        assert!((g - 9.49e-5).abs() < 0.01e-5, "{g}");
        assert!((10.0 * g.log10() + 40.2).abs() < 0.05);
        let g10 = link(10.0, 2.0, Fading::None).mean_gain().unwrap();
        assert!((10.0 * g10.log10() + 60.2).abs() < 0.05);
        assert!(link(0.5, 2.0, Fading::None).mean_gain().is_err());
    }

    #[test]
    fn fading_has_unit_mean_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fading in [
            Fading::Rayleigh,
            Fading::Rician { k_factor: 1.0 },
            Fading::Rician { k_factor: 10.0 },
        ] {
            let n = 200_000;
            let mean: f64 = (0..n).map(|_| fading.sample_power(&mut rng)).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 0.01, "{fading:?}: {mean}");
        }
    }

    #[test]
    fn constellation_spacing() {
        let c = Constellation::from_peak_power_dbm(64, 50.0).unwrap();
        assert_eq!(c.len(), 64);
        assert_eq!(c.amplitudes()[0], 0.0);
        assert!((c.r_max() - 10.0).abs() < 1e-12);
        assert!((c.amplitudes()[63] - 10.0).abs() < 1e-12);
        assert!((c.amplitudes()[1] - 10.0 / 63.0).abs() < 1e-15);
    }
}
