//! PSK, square QAM and PAM alphabets with Gray labelling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstellationKind {
    Psk,
    Qam,
    /// Nonnegative levels 2(l−1)/(L−1) for repetition coding.
    PamRc,
    /// Strictly positive levels 2l/(L+1) for optical SM.
    PamOsm,
    /// Zero-mean levels ±1, ±3, … at unit mean power.
    PamSymmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub kind: ConstellationKind,
    pub points: Vec<C64>,
    /// `labels[i]` is the Gray bit pattern (as an integer) carried by `points[i]`.
    pub labels: Vec<usize>,
    by_label: Vec<usize>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl Constellation {
    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.points.len().trailing_zeros() as usize
    }

    pub fn point_for_label(&self, label: usize) -> C64 {
        self.points[self.by_label[label]]
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Gray-mapped symbol for a big-endian group of bits.
    pub fn map_bits(&self, bits: &[u8]) -> Result<C64> {
        let k = self.bits_per_symbol();
        if bits.len() != k {
            return Err(Error::Framing { expected: k, got: bits.len() });
        }
        Ok(self.point_for_label(bits_to_int(bits)))
    }

    /// Points listed in label order, so `by_label()[u]` carries bits `u`.
    pub fn by_label(&self) -> Vec<C64> {
        (0..self.size()).map(|u| self.point_for_label(u)).collect()
    }
}

pub fn bits_to_int(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)
}

pub fn int_to_bits(value: usize, width: usize) -> Vec<u8> {
    (0..width).rev().map(|s| ((value >> s) & 1) as u8).collect()
}

pub fn make_constellation(kind: ConstellationKind, l: usize) -> Result<Constellation> {
    if !l.is_power_of_two() || l > 1024 {
        return Err(Error::Config(format!("constellation size {l} is not a power of two up to 1024")));
    }
    if l == 1 {
        return Ok(build(kind, vec![C64::new(1.0, 0.0)], vec![0]));
    }
    let lf = l as f64;
    let (points, labels) = match kind {
        ConstellationKind::Psk => {
            let pts = (0..l)
                .map(|i| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / lf))
                .map(snap)
                .collect();
            (pts, (0..l).map(gray).collect())
        }
        ConstellationKind::PamRc => (
            (0..l).map(|i| C64::new(2.0 * i as f64 / (lf - 1.0), 0.0)).collect(),
            (0..l).map(gray).collect(),
        ),
        ConstellationKind::PamOsm => (
            (0..l).map(|i| C64::new(2.0 * (i + 1) as f64 / (lf + 1.0), 0.0)).collect(),
            (0..l).map(gray).collect(),
        ),
        ConstellationKind::PamSymmetric => {
            let norm = ((lf * lf - 1.0) / 3.0).sqrt();
            (
                (0..l).map(|i| C64::new((2.0 * i as f64 - (lf - 1.0)) / norm, 0.0)).collect(),
                (0..l).map(gray).collect(),
            )
        }
        ConstellationKind::Qam => {
            let k = l.trailing_zeros() as usize;
            if !k.is_multiple_of(2) {
                return Err(Error::Config(format!("QAM size {l} is not square")));
            }
            let side = 1usize << (k / 2);
            let sf = side as f64;
            let norm = (2.0 * (sf * sf - 1.0) / 3.0).sqrt();
            let mut pts = Vec::with_capacity(l);
            let mut labs = Vec::with_capacity(l);
            for qi in 0..side {
                for ii in 0..side {
                    let re = 2.0 * ii as f64 - (sf - 1.0);
                    let im = 2.0 * qi as f64 - (sf - 1.0);
                    pts.push(C64::new(re / norm, im / norm));
                    labs.push((gray(ii) << (k / 2)) | gray(qi));
                }
            }
            (pts, labs)
        }
    };
    Ok(build(kind, points, labels))
}

fn snap(z: C64) -> C64 {
    let r = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    C64::new(r(z.re), r(z.im))
}

fn build(kind: ConstellationKind, points: Vec<C64>, labels: Vec<usize>) -> Constellation {
    let mut by_label = vec![0; labels.len()];
    for (i, &u) in labels.iter().enumerate() {
        by_label[u] = i;
    }
    Constellation { kind, points, labels, by_label }
}
