//! Fading, millimetre-wave, optical and OFDM channel models plus noise and
//! SNR calibration.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gauss_complex, gauss_matrix, CMatrix, SimRng, C64};
use crate::schemes::SpaceTimeCodeword;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    Rayleigh,
    Jakes,
    Mwc,
    Vlc,
    Ofdm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub model: ChannelModel,
}

pub fn rayleigh_channel(n: usize, m: usize, rng: &mut SimRng) -> ChannelRealization {
    ChannelRealization {
        h: gauss_matrix(rng, n, m, 1.0),
        model: ChannelModel::Rayleigh,
    }
}

pub fn ofdm_channel(m: usize, rng: &mut SimRng) -> ChannelRealization {
    let diag: Vec<C64> = (0..m).map(|_| gauss_complex(rng, C64::new(0.0, 0.0), 1.0)).collect();
    ChannelRealization {
        h: CMatrix::diag(&diag),
        model: ChannelModel::Ofdm,
    }
}

/// Sum-of-sinusoids time-varying fading, one independent process per entry.
#[derive(Debug, Clone)]
pub struct JakesChannel {
    n: usize,
    m: usize,
    f_d_t_s: f64,
    // per entry: (Doppler phase increment per block, initial phase) per scatterer
    paths: Vec<Vec<(f64, f64)>>,
}

impl JakesChannel {
    pub fn new(n: usize, m: usize, f_d_t_s: f64, scatterers: usize, rng: &mut SimRng) -> Result<Self> {
        if f_d_t_s < 0.0 || scatterers == 0 {
            return Err(Error::Config("Jakes model needs f_d_t_s >= 0 and at least one scatterer".into()));
        }
        let paths = (0..n * m)
            .map(|_| {
                (0..scatterers)
                    .map(|_| {
                        let alpha = 2.0 * PI * rng.uniform();
                        let phi = 2.0 * PI * rng.uniform();
                        (2.0 * PI * f_d_t_s * alpha.cos(), phi)
                    })
                    .collect()
            })
            .collect();
        Ok(JakesChannel { n, m, f_d_t_s, paths })
    }

    pub fn doppler(&self) -> f64 {
        self.f_d_t_s
    }

    /// Channel at time index `i` (in symbol durations).
    pub fn realization(&self, i: u64) -> ChannelRealization {
        let t = i as f64;
        let h = CMatrix::from_fn(self.n, self.m, |r, c| {
            let path = &self.paths[r * self.m + c];
            let norm = 1.0 / (path.len() as f64).sqrt();
            path.iter()
                .map(|&(w, phi)| C64::from_polar(norm, w * t + phi))
                .sum()
        });
        ChannelRealization { h, model: ChannelModel::Jakes }
    }
}

pub fn jakes_channel(
    n: usize,
    m: usize,
    f_d_t_s: f64,
    scatterers: usize,
    block_index: u64,
    rng: &mut SimRng,
) -> Result<ChannelRealization> {
    Ok(JakesChannel::new(n, m, f_d_t_s, scatterers, rng)?.realization(block_index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Steering {
    Boresight,
    Steered,
}

/// Two parallel uniform linear arrays split into analog subarrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MwcGeometry {
    pub wavelength: f64,
    pub distance: f64,
    pub tilt: f64,
    pub element_spacing: f64,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub tx_subarrays: usize,
    pub rx_subarrays: usize,
    /// Subarray spacings; `None` selects the rank-restoring optimum.
    pub tx_spacing: Option<f64>,
    pub rx_spacing: Option<f64>,
    pub rician_k: f64,
    pub steering: Steering,
}

impl Default for MwcGeometry {
    fn default() -> Self {
        Self::example()
    }
}

impl MwcGeometry {
    /// 16-element arrays in four subarrays at 60 GHz-class wavelength, 5 m apart.
    pub fn example() -> Self {
        MwcGeometry {
            wavelength: 0.005,
            distance: 5.0,
            tilt: 0.0,
            element_spacing: 0.0025,
            tx_elements: 16,
            rx_elements: 16,
            tx_subarrays: 4,
            rx_subarrays: 4,
            tx_spacing: None,
            rx_spacing: None,
            rician_k: 1e12,
            steering: Steering::Boresight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_subarrays == 0 || self.rx_subarrays == 0 {
            return Err(Error::Config("subarray counts must be positive".into()));
        }
        if !self.tx_elements.is_multiple_of(self.tx_subarrays) || !self.rx_elements.is_multiple_of(self.rx_subarrays) {
            return Err(Error::Config("element counts must be divisible by subarray counts".into()));
        }
        let positive = [self.wavelength, self.distance, self.element_spacing];
        if positive.iter().any(|&v| !(v > 0.0)) || !(self.rician_k >= 0.0) {
            return Err(Error::Config("wavelength, distance and spacing must be positive, K nonnegative".into()));
        }
        for s in [self.tx_spacing, self.rx_spacing].into_iter().flatten() {
            if !(s > 0.0) {
                return Err(Error::Config("subarray spacing must be positive".into()));
            }
        }
        Ok(())
    }

    fn spacings(&self) -> Result<(f64, f64)> {
        let opt = match (self.tx_spacing, self.rx_spacing) {
            (Some(t), Some(r)) => return Ok((t, r)),
            _ => optimal_subarray_spacing(self)?,
        };
        Ok((self.tx_spacing.unwrap_or(opt), self.rx_spacing.unwrap_or(opt)))
    }

    fn positions(&self) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
        let (dt, dr) = self.spacings()?;
        let line = |elements: usize, subarrays: usize, spacing: f64| -> Vec<f64> {
            let per = elements / subarrays;
            let mut u = Vec::with_capacity(elements);
            for k in 0..subarrays {
                let centre = (k as f64 - (subarrays as f64 - 1.0) / 2.0) * spacing;
                for e in 0..per {
                    u.push(centre + (e as f64 - (per as f64 - 1.0) / 2.0) * self.element_spacing);
                }
            }
            u
        };
        let tx = line(self.tx_elements, self.tx_subarrays, dt)
            .into_iter()
            .map(|x| [x, 0.0])
            .collect();
        let (s, c) = self.tilt.sin_cos();
        let rx = line(self.rx_elements, self.rx_subarrays, dr)
            .into_iter()
            .map(|u| [u * c, self.distance + u * s])
            .collect();
        Ok((tx, rx))
    }

    /// Element-level pure line-of-sight matrix (N_e × M_e).
    pub fn los_matrix(&self) -> Result<CMatrix> {
        self.validate()?;
        let (tx, rx) = self.positions()?;
        let k = 2.0 * PI / self.wavelength;
        Ok(CMatrix::from_fn(rx.len(), tx.len(), |n, m| {
            let r = ((rx[n][0] - tx[m][0]).powi(2) + (rx[n][1] - tx[m][1]).powi(2)).sqrt();
            C64::from_polar(1.0, -k * r)
        }))
    }

    /// Block-diagonal analog weights with unit-norm columns.
    fn weights(&self, elems: &[[f64; 2]], subarrays: usize, target: [f64; 2]) -> CMatrix {
        let per = elems.len() / subarrays;
        let k = 2.0 * PI / self.wavelength;
        let amp = 1.0 / (per as f64).sqrt();
        let mut w = CMatrix::zeros(elems.len(), subarrays);
        for s in 0..subarrays {
            let block = &elems[s * per..(s + 1) * per];
            let cx = block.iter().map(|p| p[0]).sum::<f64>() / per as f64;
            let cy = block.iter().map(|p| p[1]).sum::<f64>() / per as f64;
            let (dx, dy) = (target[0] - cx, target[1] - cy);
            let len = (dx * dx + dy * dy).sqrt();
            for (e, p) in block.iter().enumerate() {
                let phase = match self.steering {
                    Steering::Boresight => 0.0,
                    Steering::Steered => k * ((p[0] - cx) * dx + (p[1] - cy) * dy) / len,
                };
                w[(s * per + e, s)] = C64::from_polar(amp, phase);
            }
        }
        w
    }

    /// Effective N × M channel Wᴴ H_MWC P for a given element-level matrix.
    pub fn effective(&self, h_elem: &CMatrix) -> Result<CMatrix> {
        let (tx, rx) = self.positions()?;
        let centre = |pts: &[[f64; 2]]| {
            let n = pts.len() as f64;
            [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n]
        };
        let p = self.weights(&tx, self.tx_subarrays, centre(&rx));
        let w = self.weights(&rx, self.rx_subarrays, centre(&tx));
        w.adjoint().matmul(h_elem)?.matmul(&p)
    }
}

pub fn mwc_channel(geometry: &MwcGeometry, rng: &mut SimRng) -> Result<ChannelRealization> {
    let los = geometry.los_matrix()?;
    let k = geometry.rician_k;
    let a = (k / (k + 1.0)).sqrt();
    let b = (1.0 / (k + 1.0)).sqrt();
    let nlos = gauss_matrix(rng, los.rows(), los.cols(), 1.0);
    let elem = &los.scale_real(a) + &nlos.scale_real(b);
    Ok(ChannelRealization {
        h: geometry.effective(&elem)?,
        model: ChannelModel::Mwc,
    })
}

/// Element-level matrix of the Rician model, before beamforming.
pub fn mwc_element_channel(geometry: &MwcGeometry, rng: &mut SimRng) -> Result<CMatrix> {
    let los = geometry.los_matrix()?;
    let k = geometry.rician_k;
    let nlos = gauss_matrix(rng, los.rows(), los.cols(), 1.0);
    Ok(&los.scale_real((k / (k + 1.0)).sqrt()) + &nlos.scale_real((1.0 / (k + 1.0)).sqrt()))
}

pub fn optimal_subarray_spacing(geometry: &MwcGeometry) -> Result<f64> {
    let c = geometry.tilt.cos();
    if geometry.tilt.abs() >= PI / 2.0 || c <= 0.0 {
        return Err(Error::Domain(format!("tilt {} rad leaves no broadside component", geometry.tilt)));
    }
    let big = geometry.tx_subarrays.max(geometry.rx_subarrays) as f64;
    Ok((geometry.wavelength * geometry.distance / (big * c)).sqrt())
}

/// Array-factor magnitude in dB relative to one element at boresight.
///
/// The weights are normalised to unit norm first, so only the shape of the
/// excitation matters.
pub fn array_factor_gain(weights: &[C64], element_spacing: f64, wavelength: f64, angle: f64) -> Result<f64> {
    let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("all-zero weight vector".into()));
    }
    let af: C64 = weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * C64::from_polar(1.0, 2.0 * PI * k as f64 * element_spacing / wavelength * angle.sin()))
        .sum();
    Ok(20.0 * (af.norm() / norm).log10())
}

/// Lambertian line-of-sight optical link; LEDs face down, PDs face up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VlcGeometry {
    pub pd_area: f64,
    pub tx_semi_angle: f64,
    pub fov_semi_angle: f64,
    pub pd_responsivity: f64,
    pub leds: Vec<[f64; 3]>,
    pub pds: Vec<[f64; 3]>,
}

impl Default for VlcGeometry {
    /// Two LEDs 0.1 m apart, 2 m above one centred PD.
    fn default() -> Self {
        VlcGeometry {
            pd_area: 1e-4,
            tx_semi_angle: PI / 3.0,
            fov_semi_angle: PI / 3.0,
            pd_responsivity: 1.0,
            leds: vec![[-0.05, 0.0, 2.0], [0.05, 0.0, 2.0]],
            pds: vec![[0.0, 0.0, 0.0]],
        }
    }
}

impl VlcGeometry {
    pub fn lambertian_order(&self) -> f64 {
        -(2.0f64).ln() / self.tx_semi_angle.cos().ln()
    }

    fn validate(&self) -> Result<()> {
        let c = self.tx_semi_angle.cos();
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Config("tx semi-angle must lie in (0, pi/2)".into()));
        }
        if self.leds.is_empty() || self.pds.is_empty() || !(self.pd_area > 0.0) {
            return Err(Error::Config("VLC geometry needs LEDs, PDs and a positive PD area".into()));
        }
        Ok(())
    }
}

pub fn vlc_channel(geometry: &VlcGeometry) -> Result<ChannelRealization> {
    geometry.validate()?;
    let xi = geometry.lambertian_order();
    let mut h = CMatrix::zeros(geometry.pds.len(), geometry.leds.len());
    for (n, pd) in geometry.pds.iter().enumerate() {
        for (m, led) in geometry.leds.iter().enumerate() {
            let v = [led[0] - pd[0], led[1] - pd[1], led[2] - pd[2]];
            let d2 = v.iter().map(|x| x * x).sum::<f64>();
            if d2 == 0.0 {
                return Err(Error::Domain(format!("LED {m} coincides with PD {n}")));
            }
            let cos_phi = v[2] / d2.sqrt();
            let phi = cos_phi.clamp(-1.0, 1.0).acos();
            if phi > geometry.fov_semi_angle || cos_phi <= 0.0 {
                continue;
            }
            let g = (xi + 1.0) * geometry.pd_area / (2.0 * PI * d2) * cos_phi.powf(xi + 1.0);
            h[(n, m)] = C64::new(geometry.pd_responsivity * g, 0.0);
        }
    }
    Ok(ChannelRealization { h, model: ChannelModel::Vlc })
}

/// Scale a codebook so its mean Frobenius power is `m · t`.
pub fn calibrate_power(codebook: &[SpaceTimeCodeword], m: usize, t: usize) -> Result<Vec<SpaceTimeCodeword>> {
    let k = calibration_factor(codebook, (m * t) as f64)?;
    Ok(codebook
        .iter()
        .map(|c| SpaceTimeCodeword {
            s: c.s.scale_real(k),
            bits: c.bits.clone(),
        })
        .collect())
}

/// Amplitude factor bringing mean codeword power to `target`.
pub fn calibration_factor(codebook: &[SpaceTimeCodeword], target: f64) -> Result<f64> {
    if codebook.is_empty() {
        return Err(Error::Degenerate("empty codebook".into()));
    }
    let mean = codebook.iter().map(|c| c.s.frobenius_norm_sq()).sum::<f64>() / codebook.len() as f64;
    if mean == 0.0 {
        return Err(Error::Degenerate("all-zero codebook".into()));
    }
    Ok((target / mean).sqrt())
}

pub fn awgn(n: usize, t: usize, sigma2: f64, rng: &mut SimRng) -> CMatrix {
    gauss_matrix(rng, n, t, sigma2)
}

/// Noise variance for a power-calibrated RF codebook.
pub fn snr_to_noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Optical SNR: squared mean received power over noise variance.
pub fn vlc_noise_variance(snr_db: f64, mean_received_power: f64) -> f64 {
    mean_received_power * mean_received_power / 10f64.powf(snr_db / 10.0)
}

/// Average received optical intensity over PDs and a codebook.
pub fn mean_received_power(h: &CMatrix, codebook: &[SpaceTimeCodeword]) -> f64 {
    let mut acc = 0.0;
    for c in codebook {
        let y = h * &c.s;
        acc += y.as_slice().iter().map(|z| z.re).sum::<f64>() / y.as_slice().len() as f64;
    }
    acc / codebook.len() as f64
}

/// Channel estimate Ĥ = H + E with E ~ CN(0, ω).
pub fn estimate_with_error(h: &CMatrix, omega: f64, rng: &mut SimRng) -> CMatrix {
    if omega == 0.0 {
        return h.clone();
    }
    &gauss_matrix(rng, h.rows(), h.cols(), omega) + h
}

/// Stateful per-frame source of channel matrices.
#[derive(Debug, Clone)]
pub enum ChannelSource {
    Rayleigh { n: usize, m: usize },
    Jakes { process: JakesChannel, time: u64, step: u64 },
    Mwc(MwcGeometry),
    Static(CMatrix),
    Ofdm { m: usize },
}

impl ChannelSource {
    pub fn next(&mut self, rng: &mut SimRng) -> Result<CMatrix> {
        Ok(match self {
            ChannelSource::Rayleigh { n, m } => gauss_matrix(rng, *n, *m, 1.0),
            ChannelSource::Jakes { process, time, step } => {
                let h = process.realization(*time).h;
                *time += *step;
                h
            }
            ChannelSource::Mwc(g) => mwc_channel(g, rng)?.h,
            ChannelSource::Static(h) => h.clone(),
            ChannelSource::Ofdm { m } => ofdm_channel(*m, rng).h,
        })
    }
}
