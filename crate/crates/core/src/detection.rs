//! Exhaustive maximum-likelihood detectors with real-multiplication counters.
//!
//! Counting rules: a complex product costs 4 real multiplications, a squared
//! modulus costs 2, additions are free, and structural zeros of the candidate
//! codewords are skipped.

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, C64};
use crate::schemes::{SchemeKind, SpaceTimeCodeword};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub detected_bits: Vec<u8>,
    pub detected_index: usize,
    pub metric_value: f64,
    pub real_mults: u64,
}

impl DetectionResult {
    /// Counter normalised to one channel use.
    pub fn mults_per_channel_use(&self, t: usize) -> f64 {
        self.real_mults as f64 / t as f64
    }
}

/// Nonzero entries of each candidate, precomputed once per codebook.
#[derive(Debug, Clone)]
pub struct SparseCodebook {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, usize, C64)>>,
    bits: Vec<Vec<u8>>,
}

impl SparseCodebook {
    pub fn new(codebook: &[SpaceTimeCodeword]) -> Result<Self> {
        let first = codebook.first().ok_or_else(|| Error::Degenerate("empty codebook".into()))?;
        let (rows, cols) = first.s.shape();
        let zero = C64::new(0.0, 0.0);
        let mut entries = Vec::with_capacity(codebook.len());
        for cw in codebook {
            if cw.s.shape() != (rows, cols) {
                return Err(Error::Shape("codewords differ in shape".into()));
            }
            let mut nz = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let v = cw.s[(r, c)];
                    if v != zero {
                        nz.push((r, c, v));
                    }
                }
            }
            entries.push(nz);
        }
        Ok(SparseCodebook {
            rows,
            cols,
            entries,
            bits: codebook.iter().map(|c| c.bits.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bits(&self, k: usize) -> &[u8] {
        &self.bits[k]
    }

    /// argmin_k ‖y − a·S_k‖², where `a` is Ĥ (coherent) or Y(i−1) (differential).
    pub fn detect(&self, y: &CMatrix, a: &CMatrix, scratch: &mut Vec<C64>) -> Result<DetectionResult> {
        let n = y.rows();
        if a.cols() != self.rows || a.rows() != n || y.cols() != self.cols {
            return Err(Error::Shape(format!(
                "y {}x{}, matrix {}x{}, codewords {}x{}",
                y.rows(),
                y.cols(),
                a.rows(),
                a.cols(),
                self.rows,
                self.cols
            )));
        }
        let t = self.cols;
        scratch.clear();
        scratch.resize(n * t, C64::new(0.0, 0.0));
        let ys = y.as_slice();
        let asl = a.as_slice();
        let ac = a.cols();
        let mut best = (0usize, f64::INFINITY);
        let mut mults = 0u64;
        for (k, nz) in self.entries.iter().enumerate() {
            // scratch holds y column-major as residual
            for r in 0..n {
                for c in 0..t {
                    scratch[c * n + r] = ys[r * t + c];
                }
            }
            for &(m, c, v) in nz {
                let col = &mut scratch[c * n..(c + 1) * n];
                for (r, out) in col.iter_mut().enumerate() {
                    *out -= asl[r * ac + m] * v;
                }
            }
            mults += 4 * (n * nz.len()) as u64;
            let metric: f64 = scratch.iter().map(|z| z.norm_sqr()).sum();
            mults += 2 * (n * t) as u64;
            if metric < best.1 {
                best = (k, metric);
            }
        }
        Ok(DetectionResult {
            detected_bits: self.bits[best.0].clone(),
            detected_index: best.0,
            metric_value: best.1,
            real_mults: mults,
        })
    }
}

/// Coherent ML over a codebook given the channel estimate.
pub fn ml_coherent(y: &CMatrix, h_hat: &CMatrix, codebook: &[SpaceTimeCodeword]) -> Result<DetectionResult> {
    SparseCodebook::new(codebook)?.detect(y, h_hat, &mut Vec::new())
}

/// Non-coherent ML on two consecutive received blocks.
pub fn ml_differential(y_curr: &CMatrix, y_prev: &CMatrix, codebook: &[SpaceTimeCodeword]) -> Result<DetectionResult> {
    if y_curr.shape() != y_prev.shape() {
        return Err(Error::Shape("consecutive blocks differ in shape".into()));
    }
    SparseCodebook::new(codebook)?.detect(y_curr, y_prev, &mut Vec::new())
}

/// Rows of the closed-form complexity table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexityRow {
    CoherentApsk,
    Sm,
    Gsm,
    Blast,
    SquareGstsk,
    RectangularAstsk,
    SquareDsm,
    RectangularDsm,
    Ncgsm,
    DifferentialApsk,
}

impl ComplexityRow {
    pub fn for_scheme(kind: SchemeKind) -> Result<Self> {
        Ok(match kind {
            SchemeKind::Apsk => ComplexityRow::CoherentApsk,
            SchemeKind::Sm | SchemeKind::Ssk => ComplexityRow::Sm,
            SchemeKind::Gsm | SchemeKind::Gssk => ComplexityRow::Gsm,
            SchemeKind::Blast => ComplexityRow::Blast,
            SchemeKind::SquareGstsk => ComplexityRow::SquareGstsk,
            SchemeKind::Astsk => ComplexityRow::RectangularAstsk,
            SchemeKind::Bdsm | SchemeKind::Udsm => ComplexityRow::SquareDsm,
            SchemeKind::Ncgsm => ComplexityRow::Ncgsm,
            SchemeKind::Dapsk => ComplexityRow::DifferentialApsk,
            other => {
                return Err(Error::Config(format!("no complexity formula for {}", other.name())));
            }
        })
    }
}

/// Predicted real multiplications per channel use.
pub fn complexity_formula(row: ComplexityRow, r: f64, m: usize, n: usize, t: usize, p: usize) -> f64 {
    let (m, n, t, p) = (m as f64, n as f64, t as f64, p as f64);
    let e = |x: f64| 2f64.powf(x);
    match row {
        ComplexityRow::CoherentApsk => e(r + 1.0) * (2.0 * n + 1.0),
        ComplexityRow::Sm => e(r + 1.0) * 3.0 * n,
        ComplexityRow::Gsm => e(r + 1.0) * (2.0 * p + 1.0) * n,
        ComplexityRow::Blast => e(r + 1.0) * (2.0 * m + 1.0) * n,
        ComplexityRow::SquareGstsk => e(r * m + 1.0) * (2.0 * m + 1.0) * n,
        ComplexityRow::RectangularAstsk => e(r * t + 1.0) * 3.0 * n,
        ComplexityRow::SquareDsm => e(r * m + 1.0) * 3.0 * n,
        ComplexityRow::RectangularDsm => e(r * t + 1.0) * 3.0 * n + 4.0 * n * (m / t + 1.0),
        ComplexityRow::Ncgsm => e(r * m + 1.0) * (2.0 * m + 1.0) * n,
        ComplexityRow::DifferentialApsk => e(r + 2.0) * (n + 1.0) + 8.0,
    }
}
