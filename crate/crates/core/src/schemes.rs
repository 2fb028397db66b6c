//! Transmit encoders: the coherent dispersion-matrix family, differential
//! unitary schemes, subcarrier index modulation and optical intensity
//! schemes.
//!
//! Every scheme is built from a [`SchemeConfig`] into a [`Scheme`], which maps
//! bit blocks to codeword matrices and can enumerate its whole codebook:
//!
//! ```
//! use pmsim::schemes::{Scheme, SchemeConfig, SchemeKind};
//!
//! let cfg = SchemeConfig { p: Some(2), ..SchemeConfig::new(SchemeKind::Gsm, 4) };
//! let gsm = Scheme::build(&cfg).unwrap();
//! assert_eq!(gsm.rate(), 4.0);
//! assert_eq!(gsm.codebook().unwrap().len(), 16);
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constellation::{bits_to_int, int_to_bits, make_constellation, Constellation, ConstellationKind};
use crate::error::{Error, Result};
use crate::numerics::{cayley, gauss_matrix, CMatrix, SimRng, C64};
use crate::permutation::{activation_table, binomial, floor_log2, unrank_permutation, ActivationTable, IndexMode};

/// One transmit block and the bits it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeCodeword {
    pub s: CMatrix,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Single-antenna PSK/QAM.
    Apsk,
    Sm,
    Ssk,
    Gsm,
    Gssk,
    Astsk,
    Blast,
    /// Dense square dispersion matrices (M = T).
    SquareGstsk,
    /// Differential PSK, the single-antenna differential scheme.
    Dapsk,
    Bdsm,
    Udsm,
    Ncgsm,
    Sim,
    Ofdm,
    Osm,
    PiOsm,
    PamRc,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 17] = [
        SchemeKind::Apsk,
        SchemeKind::Sm,
        SchemeKind::Ssk,
        SchemeKind::Gsm,
        SchemeKind::Gssk,
        SchemeKind::Astsk,
        SchemeKind::Blast,
        SchemeKind::SquareGstsk,
        SchemeKind::Dapsk,
        SchemeKind::Bdsm,
        SchemeKind::Udsm,
        SchemeKind::Ncgsm,
        SchemeKind::Sim,
        SchemeKind::Ofdm,
        SchemeKind::Osm,
        SchemeKind::PiOsm,
        SchemeKind::PamRc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Apsk => "apsk",
            SchemeKind::Sm => "sm",
            SchemeKind::Ssk => "ssk",
            SchemeKind::Gsm => "gsm",
            SchemeKind::Gssk => "gssk",
            SchemeKind::Astsk => "astsk",
            SchemeKind::Blast => "blast",
            SchemeKind::SquareGstsk => "square_gstsk",
            SchemeKind::Dapsk => "dapsk",
            SchemeKind::Bdsm => "bdsm",
            SchemeKind::Udsm => "udsm",
            SchemeKind::Ncgsm => "ncgsm",
            SchemeKind::Sim => "sim",
            SchemeKind::Ofdm => "ofdm",
            SchemeKind::Osm => "osm",
            SchemeKind::PiOsm => "pi_osm",
            SchemeKind::PamRc => "pam_rc",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            SchemeKind::Apsk => "single-stream PSK/QAM",
            SchemeKind::Sm => "spatial modulation, one active antenna",
            SchemeKind::Ssk => "space shift keying, index bits only",
            SchemeKind::Gsm => "generalized SM, P of M antennas active",
            SchemeKind::Gssk => "generalized SSK, P of M antennas active, no symbols",
            SchemeKind::Astsk => "sparse unit-modulus dispersion matrices, M x T",
            SchemeKind::Blast => "spatial multiplexing on all antennas",
            SchemeKind::SquareGstsk => "dense square dispersion matrices",
            SchemeKind::Dapsk => "differential PSK",
            SchemeKind::Bdsm => "differential SM with binary permutation matrices",
            SchemeKind::Udsm => "differential SM with unit-modulus permutation matrices",
            SchemeKind::Ncgsm => "Cayley-transform differential GSTSK",
            SchemeKind::Sim => "subcarrier index modulation",
            SchemeKind::Ofdm => "plain OFDM (all subcarriers active)",
            SchemeKind::Osm => "optical SM with positive PAM",
            SchemeKind::PiOsm => "power-imbalanced optical SM",
            SchemeKind::PamRc => "optical PAM repetition coding",
        }
    }

    pub fn is_differential(self) -> bool {
        matches!(self, SchemeKind::Dapsk | SchemeKind::Bdsm | SchemeKind::Udsm | SchemeKind::Ncgsm)
    }

    pub fn is_optical(self) -> bool {
        matches!(self, SchemeKind::Osm | SchemeKind::PiOsm | SchemeKind::PamRc)
    }

    pub fn is_multicarrier(self) -> bool {
        matches!(self, SchemeKind::Sim | SchemeKind::Ofdm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmKind {
    Sm,
    Ssk,
    Gsm,
    Gssk,
    Astsk,
    Blast,
    SquareGstsk,
    DsmBinary,
    DsmUnitary,
    Ncgsm,
}

impl DmKind {
    fn name(self) -> &'static str {
        match self {
            DmKind::Sm => "sm",
            DmKind::Ssk => "ssk",
            DmKind::Gsm => "gsm",
            DmKind::Gssk => "gssk",
            DmKind::Astsk => "astsk",
            DmKind::Blast => "blast",
            DmKind::SquareGstsk => "square_gstsk",
            DmKind::DsmBinary => "dsm_binary",
            DmKind::DsmUnitary => "dsm_unitary",
            DmKind::Ncgsm => "ncgsm",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        [
            DmKind::Sm,
            DmKind::Ssk,
            DmKind::Gsm,
            DmKind::Gssk,
            DmKind::Astsk,
            DmKind::Blast,
            DmKind::SquareGstsk,
            DmKind::DsmBinary,
            DmKind::DsmUnitary,
            DmKind::Ncgsm,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Parse(format!("unknown dispersion-matrix kind `{s}`")))
    }

    fn is_coherent(self) -> bool {
        !matches!(self, DmKind::DsmBinary | DmKind::DsmUnitary | DmKind::Ncgsm)
    }

    /// Kinds whose entries come from a random search rather than a formula.
    pub fn is_randomized(self) -> bool {
        matches!(self, DmKind::Astsk | DmKind::SquareGstsk | DmKind::DsmUnitary | DmKind::Ncgsm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionMatrixSet {
    pub kind: DmKind,
    pub matrices: Vec<CMatrix>,
    pub active: usize,
}

impl DispersionMatrixSet {
    pub fn q(&self) -> usize {
        self.matrices.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.matrices.first().map_or((0, 0), |a| a.shape())
    }

    /// Check the structural rules of the kind.
    pub fn validate(&self) -> Result<()> {
        let (m, t) = self.dims();
        if self.matrices.is_empty() || self.matrices.iter().any(|a| a.shape() != (m, t)) {
            return Err(Error::Contract("dispersion matrices must share one shape".into()));
        }
        let fail = |msg: &str| Err(Error::Contract(format!("{} set: {msg}", self.kind.name())));
        for a in &self.matrices {
            if self.kind.is_coherent() {
                let tr = a.frobenius_norm_sq();
                if (tr - t as f64 / self.active as f64).abs() > 1e-10 {
                    return fail("trace(A Aᴴ) must equal T/P");
                }
            }
            match self.kind {
                DmKind::Sm | DmKind::Ssk | DmKind::Gsm | DmKind::Gssk | DmKind::Blast => {
                    if t != 1 || a.nnz() != 1 {
                        return fail("each matrix must select a single antenna");
                    }
                }
                DmKind::Astsk => {
                    if !one_per_line(a) || a.nnz() != m.min(t) {
                        return fail("one nonzero per row and column required");
                    }
                }
                DmKind::DsmBinary | DmKind::DsmUnitary => {
                    if m != t || !one_per_line(a) || a.nnz() != m {
                        return fail("matrices must be permutation patterns");
                    }
                    if a.as_slice().iter().filter(|z| z.norm() > 0.0).any(|z| (z.norm() - 1.0).abs() > 1e-12) {
                        return fail("nonzero entries must have unit modulus");
                    }
                    if self.kind == DmKind::DsmBinary
                        && a.as_slice().iter().any(|z| *z != C64::new(0.0, 0.0) && *z != C64::new(1.0, 0.0))
                    {
                        return fail("binary permutation entries must be exactly 1");
                    }
                }
                DmKind::Ncgsm => {
                    if m != t || !a.is_hermitian(1e-12) {
                        return fail("matrices must be Hermitian");
                    }
                }
                DmKind::SquareGstsk => {
                    if m != t {
                        return fail("matrices must be square");
                    }
                }
            }
        }
        Ok(())
    }

    /// Versioned plain-text serialisation.
    pub fn to_text(&self) -> String {
        let (m, t) = self.dims();
        let mut out = String::new();
        let _ = writeln!(out, "pmsim-dm 1");
        let _ = writeln!(out, "kind {}", self.kind.name());
        let _ = writeln!(out, "dims {m} {t}");
        let _ = writeln!(out, "count {}", self.q());
        let _ = writeln!(out, "active {}", self.active);
        for (q, a) in self.matrices.iter().enumerate() {
            let _ = writeln!(out, "matrix {q}");
            for r in 0..m {
                let row: Vec<String> = a.row(r).iter().map(|z| format!("{:.17e} {:.17e}", z.re, z.im)).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
        let header = next("header")?;
        if header != "pmsim-dm 1" {
            return Err(Error::Parse(format!("unsupported header `{header}`")));
        }
        let field = |line: &str, key: &str| -> Result<Vec<String>> {
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Parse(format!("expected `{key}` line, got `{line}`")));
            }
            Ok(it.map(String::from).collect())
        };
        let num = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad integer `{s}`"))) };
        let kind = DmKind::parse(field(next("kind")?, "kind")?.first().map(String::as_str).unwrap_or(""))?;
        let dims = field(next("dims")?, "dims")?;
        if dims.len() != 2 {
            return Err(Error::Parse("dims needs two integers".into()));
        }
        let (m, t) = (num(&dims[0])?, num(&dims[1])?);
        let count = num(field(next("count")?, "count")?.first().map(String::as_str).unwrap_or(""))?;
        let active = num(field(next("active")?, "active")?.first().map(String::as_str).unwrap_or(""))?;
        let mut matrices = Vec::with_capacity(count);
        for q in 0..count {
            let tag = field(next("matrix tag")?, "matrix")?;
            if tag.first().map(|s| num(s)).transpose()? != Some(q) {
                return Err(Error::Parse(format!("expected matrix {q}")));
            }
            let mut data = Vec::with_capacity(m * t);
            for _ in 0..m {
                let vals: Vec<f64> = next("matrix row")?
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{v}`"))))
                    .collect::<Result<_>>()?;
                if vals.len() != 2 * t {
                    return Err(Error::Parse(format!("row needs {} numbers, got {}", 2 * t, vals.len())));
                }
                data.extend(vals.chunks(2).map(|p| C64::new(p[0], p[1])));
            }
            matrices.push(CMatrix::from_vec(m, t, data)?);
        }
        let set = DispersionMatrixSet { kind, matrices, active };
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_text(&text)
    }
}

fn one_per_line(a: &CMatrix) -> bool {
    let zero = C64::new(0.0, 0.0);
    let rows_ok = (0..a.rows()).all(|r| a.row(r).iter().filter(|z| **z != zero).count() <= 1);
    let cols_ok = (0..a.cols()).all(|c| (0..a.rows()).filter(|&r| a[(r, c)] != zero).count() <= 1);
    rows_ok && cols_ok
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmCriterion {
    MinDet,
    Med,
    ConstrainedAmi,
}

/// Scheme parameters as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Transmit antennas, subcarriers or light sources.
    pub m: usize,
    /// Receive antennas or photodetectors.
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default)]
    pub t: Option<usize>,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default = "two")]
    pub l: usize,
    /// Per-group constellation sizes for differential SM.
    #[serde(default)]
    pub l_groups: Option<Vec<usize>>,
    #[serde(default)]
    pub constellation: Option<ConstellationKind>,
    /// Number of distinct symbols per differential block (M̄).
    #[serde(default)]
    pub symbols: Option<usize>,
    #[serde(default = "lut")]
    pub index_mode: IndexMode,
    #[serde(default)]
    pub lut_rows: Option<Vec<usize>>,
    #[serde(default)]
    pub pa_factors: Option<Vec<f64>>,
    #[serde(default)]
    pub pi_beta_db: Option<f64>,
    #[serde(default = "min_det")]
    pub dm_criterion: DmCriterion,
    #[serde(default = "budget")]
    pub dm_budget: usize,
    #[serde(default = "one_u64")]
    pub dm_seed: u64,
    #[serde(default)]
    pub dm_file: Option<String>,
}

fn one() -> usize {
    1
}
fn one_u64() -> u64 {
    1
}
fn two() -> usize {
    2
}
fn lut() -> IndexMode {
    IndexMode::Lut
}
fn min_det() -> DmCriterion {
    DmCriterion::MinDet
}
fn budget() -> usize {
    10_000
}

impl SchemeConfig {
    /// Defaults for everything except the kind and transmit dimension.
    pub fn new(kind: SchemeKind, m: usize) -> Self {
        SchemeConfig {
            kind,
            m,
            n: 1,
            t: None,
            q: None,
            p: None,
            l: 2,
            l_groups: None,
            constellation: None,
            symbols: None,
            index_mode: IndexMode::Lut,
            lut_rows: None,
            pa_factors: None,
            pi_beta_db: None,
            dm_criterion: DmCriterion::MinDet,
            dm_budget: 10_000,
            dm_seed: 1,
            dm_file: None,
        }
    }

    /// Generic GSTSK(M, N, T, Q, P) notation.
    pub fn gstsk(kind: SchemeKind, m: usize, n: usize, t: usize, q: usize, p: usize) -> Self {
        SchemeConfig {
            n,
            t: Some(t),
            q: Some(q),
            p: Some(p),
            ..SchemeConfig::new(kind, m)
        }
    }
}

/// Closed-form rate of the dispersion-matrix family, bits per channel use.
pub fn gstsk_rate(q: usize, p: usize, l: usize, t: usize) -> Result<f64> {
    let c = binomial(q as u64, p as u64)?;
    if c == 0 || l == 0 || t == 0 {
        return Err(Error::Config(format!("invalid rate parameters Q={q} P={p} L={l} T={t}")));
    }
    Ok((floor_log2(c) as f64 + p as f64 * (l as f64).log2()) / t as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Gstsk,
    Dsm,
    Ncgsm,
    Sim,
    Optical,
}

/// A fully resolved scheme.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub config: SchemeConfig,
    family: Family,
    m: usize,
    t: usize,
    pub dm_set: Option<DispersionMatrixSet>,
    pub activation: Option<ActivationTable>,
    /// One alphabet per symbol slot (all equal except for mixed differential SM).
    pub constellations: Vec<Constellation>,
    pub symbols: usize,
    pub pa_factors: Vec<f64>,
}

impl Scheme {
    pub fn build(config: &SchemeConfig) -> Result<Scheme> {
        let mut rng = SimRng::stream(config.dm_seed, 0x646d);
        Self::build_with_rng(config, &mut rng)
    }

    pub fn build_with_rng(config: &SchemeConfig, rng: &mut SimRng) -> Result<Scheme> {
        let mut s = Self::skeleton(config)?;
        if let Some(kind) = s.dm_kind() {
            let set = match &config.dm_file {
                Some(path) => {
                    let set = DispersionMatrixSet::load(Path::new(path))?;
                    if set.kind != kind || set.q() != s.q() || set.dims() != (s.m, s.t) {
                        return Err(Error::Config(format!("DM file {path} does not match the scheme")));
                    }
                    set
                }
                None if kind.is_randomized() => dm_optimize(&s, config.dm_criterion, config.dm_budget, rng)?,
                None => build_dm_set(&s, rng)?,
            };
            s.dm_set = Some(set);
        }
        Ok(s)
    }

    /// Resolve dimensions, alphabets and the activation table; DMs come later.
    fn skeleton(cfg: &SchemeConfig) -> Result<Scheme> {
        use SchemeKind as K;
        let kind = cfg.kind;
        let m = if kind == K::Apsk || kind == K::Dapsk { 1 } else { cfg.m };
        if m == 0 || cfg.n == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        let family = match kind {
            K::Dapsk | K::Bdsm | K::Udsm => Family::Dsm,
            K::Ncgsm => Family::Ncgsm,
            K::Sim | K::Ofdm => Family::Sim,
            K::Osm | K::PiOsm | K::PamRc => Family::Optical,
            _ => Family::Gstsk,
        };
        let need = |v: Option<usize>, what: &str| {
            v.ok_or_else(|| Error::Config(format!("{} needs `{what}`", kind.name())))
        };
        let t = match kind {
            K::Astsk => need(cfg.t, "t")?,
            K::SquareGstsk | K::Ncgsm | K::Dapsk | K::Bdsm | K::Udsm => m,
            _ => 1,
        };
        if let Some(tc) = cfg.t {
            if tc != t {
                return Err(Error::Config(format!("{} requires T = {t}, got {tc}", kind.name())));
            }
        }
        let l = if matches!(kind, K::Ssk | K::Gssk) { 1 } else { cfg.l };
        let ckind = cfg.constellation.unwrap_or(match kind {
            K::Ncgsm => ConstellationKind::PamSymmetric,
            K::Osm | K::PiOsm => ConstellationKind::PamOsm,
            K::PamRc => ConstellationKind::PamRc,
            _ => ConstellationKind::Psk,
        });
        if kind.is_optical() && !matches!(ckind, ConstellationKind::PamOsm | ConstellationKind::PamRc) {
            return Err(Error::Config("optical schemes need a nonnegative PAM alphabet".into()));
        }
        if kind == K::Ncgsm && !matches!(ckind, ConstellationKind::PamSymmetric | ConstellationKind::PamRc) {
            return Err(Error::Config("ncgsm needs a real PAM alphabet".into()));
        }
        if family == Family::Dsm && ckind != ConstellationKind::Psk {
            return Err(Error::Config("differential SM needs PSK symbols".into()));
        }
        let (q, p) = match kind {
            K::Apsk | K::Dapsk => (1, 1),
            K::Sm | K::Ssk | K::Osm | K::PiOsm => (m, 1),
            K::Blast | K::Ofdm | K::PamRc => (m, m),
            K::Gsm | K::Gssk | K::Sim => (cfg.q.unwrap_or(m), need(cfg.p, "p")?),
            K::Astsk => (need(cfg.q, "q")?, cfg.p.unwrap_or(1)),
            K::SquareGstsk | K::Ncgsm => (need(cfg.q, "q")?, need(cfg.p, "p")?),
            K::Bdsm | K::Udsm => {
                let cap = 1usize << floor_log2((1..=m as u64).product());
                let q = cfg.q.unwrap_or(cap);
                if q > cap || !q.is_power_of_two() {
                    return Err(Error::Config(format!(
                        "differential SM with M={m} supports a power-of-two Q up to {cap}, got {q}"
                    )));
                }
                (q, 1)
            }
        };
        if p == 0 || p > q {
            return Err(Error::Config(format!("need 1 <= P <= Q, got P={p} Q={q}")));
        }
        if matches!(kind, K::Sm | K::Ssk | K::Gsm | K::Gssk | K::Blast | K::Sim) && q != m {
            return Err(Error::Config(format!("{} uses Q = M", kind.name())));
        }
        let mut symbols = p;
        let mut sizes = vec![l; p];
        if family == Family::Dsm {
            symbols = cfg.symbols.unwrap_or(m);
            if symbols == 0 || m % symbols != 0 {
                return Err(Error::Config(format!("symbols per block must divide M={m}")));
            }
            sizes = match &cfg.l_groups {
                Some(g) if g.len() == symbols => g.clone(),
                Some(g) => {
                    return Err(Error::Config(format!("l_groups needs {symbols} entries, got {}", g.len())));
                }
                None => vec![l; symbols],
            };
        }
        let constellations = sizes
            .iter()
            .map(|&sz| make_constellation(ckind, sz))
            .collect::<Result<Vec<_>>>()?;
        let activation = match family {
            Family::Gstsk | Family::Ncgsm | Family::Sim | Family::Optical if kind != K::PamRc => Some(
                activation_table(q, p, cfg.index_mode, cfg.lut_rows.as_deref())?,
            ),
            _ => None,
        };
        let pa_factors = match kind {
            K::PiOsm => {
                let f = match (&cfg.pa_factors, cfg.pi_beta_db) {
                    (Some(f), _) => f.clone(),
                    (None, Some(beta)) => pi_osm_factors(beta, m),
                    (None, None) => return Err(Error::Config("pi_osm needs pa_factors or pi_beta_db".into())),
                };
                check_pa(&f, m)?;
                f
            }
            _ => vec![1.0; m],
        };
        let _ = q;
        Ok(Scheme {
            config: SchemeConfig { m, ..cfg.clone() },
            family,
            m,
            t,
            dm_set: None,
            activation,
            constellations,
            symbols,
            pa_factors,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.config.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    /// Columns of one codeword matrix.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Channel uses spanned by one codeword (subcarriers for OFDM-type schemes).
    pub fn channel_uses(&self) -> usize {
        if self.family == Family::Sim {
            self.m
        } else {
            self.t
        }
    }

    pub fn q(&self) -> usize {
        match self.kind() {
            SchemeKind::Apsk | SchemeKind::Dapsk => 1,
            SchemeKind::Sm | SchemeKind::Ssk | SchemeKind::Blast | SchemeKind::Osm | SchemeKind::PiOsm => self.m,
            SchemeKind::PamRc | SchemeKind::Ofdm => self.m,
            _ => self
                .config
                .q
                .unwrap_or_else(|| match self.kind() {
                    SchemeKind::Bdsm | SchemeKind::Udsm => 1usize << floor_log2((1..=self.m as u64).product()),
                    _ => self.m,
                }),
        }
    }

    pub fn p(&self) -> usize {
        match &self.activation {
            Some(a) => a.p,
            None if self.family == Family::Dsm => 1,
            None => self.m,
        }
    }

    pub fn is_differential(&self) -> bool {
        self.kind().is_differential()
    }

    pub fn is_optical(&self) -> bool {
        self.kind().is_optical()
    }

    pub fn dm_kind(&self) -> Option<DmKind> {
        use SchemeKind as K;
        Some(match self.kind() {
            K::Apsk | K::Sm => DmKind::Sm,
            K::Ssk => DmKind::Ssk,
            K::Gsm => DmKind::Gsm,
            K::Gssk => DmKind::Gssk,
            K::Astsk => DmKind::Astsk,
            K::Blast => DmKind::Blast,
            K::SquareGstsk => DmKind::SquareGstsk,
            K::Dapsk | K::Bdsm => DmKind::DsmBinary,
            K::Udsm => DmKind::DsmUnitary,
            K::Ncgsm => DmKind::Ncgsm,
            _ => return None,
        })
    }

    fn index_bits(&self) -> usize {
        match self.family {
            Family::Dsm => self.q().trailing_zeros() as usize,
            _ => self.activation.as_ref().map_or(0, |a| a.index_bits()),
        }
    }

    fn symbol_bits(&self) -> usize {
        self.constellations.iter().map(|c| c.bits_per_symbol()).sum()
    }

    /// Bits per codeword, B.
    pub fn bits_per_block(&self) -> usize {
        match self.kind() {
            SchemeKind::PamRc => self.constellations[0].bits_per_symbol(),
            _ => self.index_bits() + self.symbol_bits(),
        }
    }

    /// Bits per channel use (per subcarrier for OFDM-type schemes).
    pub fn rate(&self) -> f64 {
        self.bits_per_block() as f64 / self.channel_uses() as f64
    }

    /// Map one bit block to its codeword matrix. Differential schemes return
    /// the unitary data matrix X.
    pub fn encode(&self, bits: &[u8]) -> Result<CMatrix> {
        let b = self.bits_per_block();
        if bits.len() != b {
            return Err(Error::Framing { expected: b, got: bits.len() });
        }
        let act = || self.activation.as_ref().expect("activation table");
        let dm = || self.dm_set.as_ref().expect("dispersion matrices");
        match self.family {
            Family::Gstsk => Ok(gstsk_encode(bits, dm(), &self.constellations[0], act())?.s),
            Family::Dsm => dsm_encode(bits, dm(), &self.constellations, self.symbols),
            Family::Ncgsm => ncgsm_encode(bits, dm(), &self.constellations[0], act()),
            Family::Sim => Ok(CMatrix::column(&sim_encode(bits, self.m, self.p(), &self.constellations[0], act())?)),
            Family::Optical => {
                let v = match self.kind() {
                    SchemeKind::PamRc => pamrc_encode(bits, self.m, &self.constellations[0])?,
                    SchemeKind::Osm => osm_encode(bits, self.m, &self.constellations[0])?,
                    _ => pi_osm_encode(bits, self.m, &self.constellations[0], &self.pa_factors)?,
                };
                Ok(CMatrix::column(&v.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>()))
            }
        }
    }

    /// All 2^B codewords in bit-lexicographic order (uncalibrated).
    pub fn codebook(&self) -> Result<Vec<SpaceTimeCodeword>> {
        enumerate_codebook(self)
    }
}

fn check_pa(f: &[f64], m: usize) -> Result<()> {
    if f.len() != m {
        return Err(Error::Config(format!("need {m} PA factors, got {}", f.len())));
    }
    if f.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::Config("PA factors must be nonnegative".into()));
    }
    if (f.iter().sum::<f64>() - m as f64).abs() > 1e-10 {
        return Err(Error::Config(format!("PA factors must sum to {m}")));
    }
    Ok(())
}

pub fn enumerate_codebook(scheme: &Scheme) -> Result<Vec<SpaceTimeCodeword>> {
    let b = scheme.bits_per_block();
    if b > 20 {
        return Err(Error::Size(format!("2^{b} codewords exceed the enumeration guard")));
    }
    (0..1usize << b)
        .map(|k| {
            let bits = int_to_bits(k, b);
            Ok(SpaceTimeCodeword { s: scheme.encode(&bits)?, bits })
        })
        .collect()
}

/// Deterministic dispersion matrices, or one random draw for the searched kinds.
pub fn build_dm_set(scheme: &Scheme, rng: &mut SimRng) -> Result<DispersionMatrixSet> {
    let kind = scheme
        .dm_kind()
        .ok_or_else(|| Error::Config(format!("{} has no dispersion matrices", scheme.kind().name())))?;
    let (m, t, q, p) = (scheme.m(), scheme.t(), scheme.q(), scheme.p());
    let zero = C64::new(0.0, 0.0);
    let matrices = match kind {
        DmKind::Sm | DmKind::Ssk | DmKind::Gsm | DmKind::Gssk | DmKind::Blast => {
            let amp = (1.0 / p as f64).sqrt();
            (0..q)
                .map(|i| CMatrix::from_fn(m, 1, |r, _| if r == i { C64::new(amp, 0.0) } else { zero }))
                .collect()
        }
        DmKind::DsmBinary => permutation_patterns(m, q)?
            .into_iter()
            .map(|perm| permutation_matrix(&perm, |_| C64::new(1.0, 0.0)))
            .collect(),
        DmKind::DsmUnitary => permutation_patterns(m, q)?
            .into_iter()
            .map(|perm| permutation_matrix(&perm, |_| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.uniform())))
            .collect(),
        DmKind::Astsk => {
            let k = m.min(t);
            let amp = (t as f64 / (p * k) as f64).sqrt();
            (0..q)
                .map(|_| {
                    let rows = random_subset_order(m, k, rng);
                    let cols = random_subset_order(t, k, rng);
                    let mut a = CMatrix::zeros(m, t);
                    for (&r, &c) in rows.iter().zip(&cols) {
                        a[(r, c)] = C64::from_polar(amp, 2.0 * std::f64::consts::PI * rng.uniform());
                    }
                    a
                })
                .collect()
        }
        DmKind::SquareGstsk => (0..q)
            .map(|_| {
                let g = gauss_matrix(rng, m, t, 1.0);
                let k = (t as f64 / p as f64 / g.frobenius_norm_sq()).sqrt();
                g.scale_real(k)
            })
            .collect(),
        DmKind::Ncgsm => {
            // random Hermitian directions with a log-uniform scale in [0.1, 5]
            (0..q)
                .map(|_| {
                    let g = gauss_matrix(rng, m, m, 1.0);
                    let h = (&g + &g.adjoint()).scale_real(0.5);
                    let scale = 10f64.powf(-1.0 + 1.7 * rng.uniform());
                    let h = h.scale_real(scale / h.frobenius_norm_sq().sqrt());
                    // symmetrise exactly
                    let ha = h.adjoint();
                    (&h + &ha).scale_real(0.5)
                })
                .collect()
        }
    };
    let set = DispersionMatrixSet { kind, matrices, active: p };
    set.validate()?;
    Ok(set)
}

fn random_subset_order(n: usize, k: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// The first `q` permutations of 1..=m, identity first, then ordered by the
/// number of displaced positions and Lehmer rank.
pub fn permutation_patterns(m: usize, q: usize) -> Result<Vec<Vec<usize>>> {
    let total: u64 = (1..=m as u64).product();
    let mut perms: Vec<(usize, u64, Vec<usize>)> = (0..total)
        .map(|r| {
            let p = unrank_permutation(r, m)?;
            let moved = p.iter().enumerate().filter(|(i, &v)| v != i + 1).count();
            Ok((moved, r, p))
        })
        .collect::<Result<_>>()?;
    perms.sort_by_key(|(moved, r, _)| (*moved, *r));
    if q > perms.len() {
        return Err(Error::Config(format!("only {} permutations of {m}", perms.len())));
    }
    Ok(perms.into_iter().take(q).map(|(_, _, p)| p).collect())
}

fn permutation_matrix(perm: &[usize], mut value: impl FnMut(usize) -> C64) -> CMatrix {
    let m = perm.len();
    let mut a = CMatrix::zeros(m, m);
    for (r, &c) in perm.iter().enumerate() {
        a[(r, c - 1)] = value(r);
    }
    a
}

/// Pick the best of `budget` random dispersion-matrix sets.
pub fn dm_optimize(scheme: &Scheme, criterion: DmCriterion, budget: usize, rng: &mut SimRng) -> Result<DispersionMatrixSet> {
    if budget == 0 {
        return Err(Error::Config("optimisation budget must be at least 1".into()));
    }
    let mut best: Option<((f64, f64), DispersionMatrixSet)> = None;
    let mut trial = scheme.clone();
    // common random numbers across candidates for the sampled criterion
    let eval_rng = SimRng::stream(scheme.config.dm_seed, 0x616d69);
    for _ in 0..budget {
        let cand = build_dm_set(scheme, rng)?;
        trial.dm_set = Some(cand.clone());
        let book = trial.codebook()?;
        let score = match criterion {
            DmCriterion::MinDet => {
                let (d, g) = crate::metrics::diversity_coding_gain(&book, 1)?;
                (d as f64, g)
            }
            DmCriterion::Med => (crate::metrics::med(&book, None)?, 0.0),
            DmCriterion::ConstrainedAmi => {
                let cal = crate::channels::calibrate_power(&book, trial.m(), trial.t())?;
                let mut sampler = crate::channels::ChannelSource::Rayleigh { n: scheme.n(), m: scheme.m() };
                let mut r = eval_rng.clone();
                let est = crate::metrics::constrained_ami(&cal, &mut sampler, 1.0, 200, trial.channel_uses(), &mut r)?;
                (est.value, 0.0)
            }
        };
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    Ok(best.expect("budget >= 1").1)
}

fn split_bits(bits: &[u8], index_bits: usize, groups: &[usize]) -> (usize, Vec<usize>) {
    let idx = bits_to_int(&bits[..index_bits]);
    let mut pos = index_bits;
    let mut syms = Vec::with_capacity(groups.len());
    for &g in groups {
        syms.push(bits_to_int(&bits[pos..pos + g]));
        pos += g;
    }
    (idx, syms)
}

/// S = Σ_p s_p A_{a_k(p)}, index bits first, big-endian throughout.
pub fn gstsk_encode(
    bits: &[u8],
    dm_set: &DispersionMatrixSet,
    constellation: &Constellation,
    activation: &ActivationTable,
) -> Result<SpaceTimeCodeword> {
    let kb = activation.index_bits();
    let sb = constellation.bits_per_symbol();
    let want = kb + activation.p * sb;
    if bits.len() != want {
        return Err(Error::Framing { expected: want, got: bits.len() });
    }
    let (k, syms) = split_bits(bits, kb, &vec![sb; activation.p]);
    let (m, t) = dm_set.dims();
    let mut s = CMatrix::zeros(m, t);
    for (&q, &u) in activation.vectors[k].iter().zip(&syms) {
        let sym = constellation.point_for_label(u);
        let a = &dm_set.matrices[q];
        for (o, &v) in s.as_mut_slice().iter_mut().zip(a.as_slice()) {
            *o += sym * v;
        }
    }
    Ok(SpaceTimeCodeword { s, bits: bits.to_vec() })
}

/// X = diag(s) A_q, each of the M̄ symbols repeated M/M̄ times.
pub fn dsm_encode(bits: &[u8], dm_set: &DispersionMatrixSet, constellations: &[Constellation], mbar: usize) -> Result<CMatrix> {
    let (m, _) = dm_set.dims();
    if mbar == 0 || m % mbar != 0 || constellations.len() != mbar {
        return Err(Error::Contract(format!("{mbar} symbol groups do not fit M={m}")));
    }
    let q = dm_set.q();
    if !q.is_power_of_two() {
        return Err(Error::Contract("Q must be a power of two".into()));
    }
    let kb = q.trailing_zeros() as usize;
    let groups: Vec<usize> = constellations.iter().map(|c| c.bits_per_symbol()).collect();
    let want = kb + groups.iter().sum::<usize>();
    if bits.len() != want {
        return Err(Error::Framing { expected: want, got: bits.len() });
    }
    let (k, syms) = split_bits(bits, kb, &groups);
    let rep = m / mbar;
    let diag: Vec<C64> = (0..m).map(|r| constellations[r / rep].point_for_label(syms[r / rep])).collect();
    let a = &dm_set.matrices[k];
    Ok(CMatrix::from_fn(m, m, |r, c| diag[r] * a[(r, c)]))
}

/// X = ζ(Σ_p s_p A_{a_k(p)}) with real PAM symbols.
pub fn ncgsm_encode(
    bits: &[u8],
    dm_set: &DispersionMatrixSet,
    constellation: &Constellation,
    activation: &ActivationTable,
) -> Result<CMatrix> {
    let xt = gstsk_encode(bits, dm_set, constellation, activation)?.s;
    cayley(&xt).map_err(|e| match e {
        Error::Singular { cond } => Error::Contract(format!("Cayley transform singular (cond {cond:.3e}) for {xt:?}")),
        other => other,
    })
}

/// Differential encoder state S(i−1).
#[derive(Debug, Clone)]
pub struct DifferentialState {
    pub s: CMatrix,
    pub index: u64,
}

impl DifferentialState {
    pub const REORTHONORMALIZE_EVERY: u64 = 256;

    pub fn new(m: usize) -> Self {
        DifferentialState { s: CMatrix::identity(m), index: 0 }
    }

    /// S(i) = S(i−1) X(i).
    pub fn step(&mut self, x: &CMatrix) -> Result<CMatrix> {
        if x.shape() != self.s.shape() {
            return Err(Error::Shape("data matrix does not match the state".into()));
        }
        let defect = x.unitarity_defect();
        if defect > 1e-9 {
            return Err(Error::Contract(format!("data matrix not unitary (defect {defect:.2e})")));
        }
        let mut next = &self.s * x;
        self.index += 1;
        if self.index.is_multiple_of(Self::REORTHONORMALIZE_EVERY) {
            next = next.polar_unitary()?;
        }
        self.s = next.clone();
        Ok(next)
    }
}

pub fn differential_step(state: &mut DifferentialState, x: &CMatrix) -> Result<SpaceTimeCodeword> {
    Ok(SpaceTimeCodeword { s: state.step(x)?, bits: Vec::new() })
}

/// Frequency-domain SIM vector; active symbols scaled by √(m/p).
pub fn sim_encode(bits: &[u8], m: usize, p: usize, constellation: &Constellation, activation: &ActivationTable) -> Result<Vec<C64>> {
    if activation.q != m || activation.p != p {
        return Err(Error::Contract("activation table does not match (m, p)".into()));
    }
    let kb = activation.index_bits();
    let sb = constellation.bits_per_symbol();
    let want = kb + p * sb;
    if bits.len() != want {
        return Err(Error::Framing { expected: want, got: bits.len() });
    }
    let (k, syms) = split_bits(bits, kb, &vec![sb; p]);
    let amp = (m as f64 / p as f64).sqrt();
    let mut v = vec![C64::new(0.0, 0.0); m];
    for (&i, &u) in activation.vectors[k].iter().zip(&syms) {
        v[i] = constellation.point_for_label(u) * amp;
    }
    Ok(v)
}

fn optical_split(bits: &[u8], m: usize, constellation: &Constellation) -> Result<(usize, f64)> {
    if !m.is_power_of_two() {
        return Err(Error::Config(format!("optical SM needs a power-of-two LED count, got {m}")));
    }
    let kb = m.trailing_zeros() as usize;
    let sb = constellation.bits_per_symbol();
    if bits.len() != kb + sb {
        return Err(Error::Framing { expected: kb + sb, got: bits.len() });
    }
    let idx = bits_to_int(&bits[..kb]);
    let s = constellation.point_for_label(bits_to_int(&bits[kb..])).re;
    Ok((idx, s))
}

/// One LED carries a positive PAM level.
pub fn osm_encode(bits: &[u8], m: usize, constellation: &Constellation) -> Result<Vec<f64>> {
    let (idx, s) = optical_split(bits, m, constellation)?;
    let mut v = vec![0.0; m];
    v[idx] = s;
    Ok(v)
}

pub fn pi_osm_encode(bits: &[u8], m: usize, constellation: &Constellation, factors: &[f64]) -> Result<Vec<f64>> {
    check_pa(factors, m)?;
    let mut v = osm_encode(bits, m, constellation)?;
    for (x, a) in v.iter_mut().zip(factors) {
        *x *= a;
    }
    Ok(v)
}

/// Every LED carries the same PAM level.
pub fn pamrc_encode(bits: &[u8], m: usize, constellation: &Constellation) -> Result<Vec<f64>> {
    let sb = constellation.bits_per_symbol();
    if bits.len() != sb {
        return Err(Error::Framing { expected: sb, got: bits.len() });
    }
    let s = constellation.point_for_label(bits_to_int(bits)).re;
    Ok(vec![s; m])
}

/// Geometric power-imbalance factors a_m = α^(m−1) a_1 with Σ a_m = M.
pub fn pi_osm_factors(beta_db: f64, m: usize) -> Vec<f64> {
    let alpha = 10f64.powf(beta_db / 10.0);
    let a1 = m as f64 / (0..m).map(|i| alpha.powi(i as i32)).sum::<f64>();
    (0..m).map(|i| a1 * alpha.powi(i as i32)).collect()
}

/// Coordinate search over PA factors maximising optical constrained MI at
/// `snr_db` on a fixed channel; the sum constraint is restored every step.
pub fn pi_osm_optimize(scheme: &Scheme, h: &CMatrix, snr_db: f64, sweeps: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if scheme.kind() != SchemeKind::PiOsm {
        return Err(Error::Config("PA optimisation applies to pi_osm".into()));
    }
    let m = scheme.m();
    let mut cur = scheme.clone();
    let eval = |s: &Scheme| -> Result<f64> {
        let book = s.codebook()?;
        let sigma2 = crate::channels::vlc_noise_variance(snr_db, crate::channels::mean_received_power(h, &book));
        let mut src = crate::channels::ChannelSource::Static(h.clone());
        let mut rng = SimRng::stream(seed, 0x7061);
        Ok(crate::metrics::constrained_ami(&book, &mut src, sigma2, trials, 1, &mut rng)?.value)
    };
    let mut best = eval(&cur)?;
    let mut step = 0.5;
    for _ in 0..sweeps {
        for i in 0..m {
            for dir in [1.0, -1.0] {
                let mut f = cur.pa_factors.clone();
                f[i] = (f[i] + dir * step).max(0.0);
                let sum: f64 = f.iter().sum();
                if sum <= 0.0 {
                    continue;
                }
                f.iter_mut().for_each(|a| *a *= m as f64 / sum);
                let mut cand = cur.clone();
                cand.pa_factors = f;
                let v = eval(&cand)?;
                if v > best {
                    best = v;
                    cur = cand;
                }
            }
        }
        step *= 0.5;
    }
    Ok(cur.pa_factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn key(m: &CMatrix) -> Vec<(u64, u64)> {
        m.as_slice().iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
    }

    #[test]
    fn sm_selectors() {
        let s = Scheme::build(&SchemeConfig::new(SchemeKind::Sm, 4)).unwrap();
        let set = s.dm_set.as_ref().unwrap();
        for (q, a) in set.matrices.iter().enumerate() {
            for r in 0..4 {
                assert_eq!(a[(r, 0)], if r == q { c(1.0, 0.0) } else { c(0.0, 0.0) });
            }
        }
    }

    #[test]
    fn gsm_selectors_scaled() {
        let cfg = SchemeConfig { p: Some(2), ..SchemeConfig::new(SchemeKind::Gsm, 4) };
        let s = Scheme::build(&cfg).unwrap();
        let a = &s.dm_set.as_ref().unwrap().matrices[2];
        assert!((a[(2, 0)].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.rate(), 4.0);
    }

    #[test]
    fn bdsm_three_antennas() {
        let s = Scheme::build(&SchemeConfig { symbols: Some(1), ..SchemeConfig::new(SchemeKind::Bdsm, 3) }).unwrap();
        let set = s.dm_set.unwrap();
        let want = [
            CMatrix::identity(3),
            CMatrix::from_real_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]),
            CMatrix::from_real_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]),
            CMatrix::from_real_rows(&[&[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]]),
        ];
        assert_eq!(set.matrices, want);
        let too_many = SchemeConfig { q: Some(8), symbols: Some(1), ..SchemeConfig::new(SchemeKind::Bdsm, 3) };
        assert!(matches!(Scheme::build(&too_many), Err(Error::Config(_))));
    }

    #[test]
    fn rates() {
        assert_eq!(gstsk_rate(4, 2, 2, 1).unwrap(), 4.0);
        assert_eq!(gstsk_rate(4, 1, 4, 1).unwrap(), 4.0);
        assert_eq!(gstsk_rate(1, 1, 2, 1).unwrap(), 1.0);
        let sm = Scheme::build(&SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Sm, 4) }).unwrap();
        assert_eq!(sm.rate(), 4.0);
        let dsm = Scheme::build(&SchemeConfig { q: Some(2), symbols: Some(2), ..SchemeConfig::new(SchemeKind::Bdsm, 2) }).unwrap();
        assert_eq!(dsm.rate(), 1.5);
        let nc = Scheme::build(&SchemeConfig { dm_budget: 20, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 2, 2, 4, 2) }).unwrap();
        assert_eq!(nc.rate(), 2.0);
        let sim = Scheme::build(&SchemeConfig {
            p: Some(1),
            l: 4,
            constellation: Some(ConstellationKind::Qam),
            ..SchemeConfig::new(SchemeKind::Sim, 4)
        })
        .unwrap();
        assert_eq!(sim.bits_per_block(), 4);
        assert_eq!(sim.rate(), 1.0);
    }

    #[test]
    fn gsm_table_rows() {
        let cfg = SchemeConfig { p: Some(2), ..SchemeConfig::new(SchemeKind::Gsm, 4) };
        let s = Scheme::build(&cfg).unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(s.encode(&[0, 0, 0, 0]).unwrap(), CMatrix::from_real_rows(&[&[r], &[r], &[0.0], &[0.0]]));
        assert_eq!(s.encode(&[1, 0, 1, 1]).unwrap(), CMatrix::from_real_rows(&[&[0.0], &[-r], &[0.0], &[-r]]));
        assert!(matches!(s.encode(&[1, 0, 1]), Err(Error::Framing { expected: 4, got: 3 })));
        let apsk = Scheme::build(&SchemeConfig::new(SchemeKind::Apsk, 1)).unwrap();
        assert_eq!(apsk.encode(&[1]).unwrap(), CMatrix::from_real_rows(&[&[-1.0]]));
    }

    #[test]
    fn ssk_codebook_columns() {
        let s = Scheme::build(&SchemeConfig::new(SchemeKind::Ssk, 4)).unwrap();
        let book = s.codebook().unwrap();
        assert_eq!(book.len(), 4);
        for (k, cw) in book.iter().enumerate() {
            for r in 0..4 {
                assert_eq!(cw.s[(r, 0)].re, if r == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn degenerate_single_codeword() {
        let s = Scheme::build(&SchemeConfig { l: 1, ..SchemeConfig::new(SchemeKind::Apsk, 1) }).unwrap();
        assert_eq!(s.bits_per_block(), 0);
        assert_eq!(s.codebook().unwrap().len(), 1);
    }

    #[test]
    fn dsm_patterns() {
        let cfg = SchemeConfig { symbols: Some(2), l: 4, ..SchemeConfig::new(SchemeKind::Bdsm, 4) };
        let s = Scheme::build(&cfg).unwrap();
        let bits = vec![0, 0, 0, 0, 0, 1, 1, 1];
        let x = s.encode(&bits).unwrap();
        let s1 = s.constellations[0].point_for_label(1);
        let s2 = s.constellations[1].point_for_label(3);
        assert_eq!(x, CMatrix::diag(&[s1, s1, s2, s2]));
        let ident = s.encode(&[0; 8]).unwrap();
        assert_eq!(ident, CMatrix::identity(4));
    }

    #[test]
    fn differential_chain() {
        let mut st = DifferentialState::new(3);
        for _ in 0..5 {
            assert_eq!(st.step(&CMatrix::identity(3)).unwrap(), CMatrix::identity(3));
        }
        let perm = CMatrix::from_real_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let mut st = DifferentialState::new(3);
        assert_eq!(st.step(&perm).unwrap(), perm);
        assert!(matches!(st.step(&perm.scale_real(2.0)), Err(Error::Contract(_))));

        let cfg = SchemeConfig { dm_budget: 1, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 2, 2, 4, 2) };
        let s = Scheme::build(&cfg).unwrap();
        let mut rng = SimRng::new(3);
        let mut st = DifferentialState::new(2);
        for _ in 0..1000 {
            let x = s.encode(&rng.bits(4)).unwrap();
            st.step(&x).unwrap();
        }
        assert!(st.s.unitarity_defect() < 1e-8);
    }

    #[test]
    fn ncgsm_zero_symbol_gives_identity() {
        // PAM_RC contains the level 0, so an all-zero symbol block is reachable
        let cfg = SchemeConfig {
            constellation: Some(ConstellationKind::PamRc),
            dm_budget: 1,
            ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 1, 2, 4, 2)
        };
        let s = Scheme::build(&cfg).unwrap();
        let x = s.encode(&[1, 0, 0, 0]).unwrap();
        assert!((&x - &CMatrix::identity(2)).frobenius_norm_sq() < 1e-30);
    }

    #[test]
    fn sim_vectors() {
        let q4 = make_constellation(ConstellationKind::Qam, 4).unwrap();
        let act = activation_table(4, 1, IndexMode::Nbc, None).unwrap();
        let v = sim_encode(&[1, 0, 0, 1], 4, 1, &q4, &act).unwrap();
        let pw: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((pw - 4.0).abs() < 1e-12);
        assert_eq!(v.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert!(v[2].norm() > 0.0);
        let full = activation_table(4, 4, IndexMode::Nbc, None).unwrap();
        let bp = make_constellation(ConstellationKind::Psk, 2).unwrap();
        assert_eq!(sim_encode(&[0, 1, 1, 0], 4, 4, &bp, &full).unwrap(), vec![c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn optical_encoders() {
        let rc = make_constellation(ConstellationKind::PamRc, 4).unwrap();
        // level l=3 carries Gray label 3
        let v = pamrc_encode(&[1, 1], 3, &rc).unwrap();
        assert!(v.iter().all(|&x| (x - 4.0 / 3.0).abs() < 1e-15));
        let osm = make_constellation(ConstellationKind::PamOsm, 2).unwrap();
        let v = osm_encode(&[0, 1, 0], 4, &osm).unwrap();
        assert_eq!(v.len(), 4);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-15 && v[0] == 0.0 && v[2] == 0.0 && v[3] == 0.0);

        let f = pi_osm_factors(1.0, 4);
        let alpha = 10f64.powf(0.1);
        assert!((alpha - 1.2589).abs() < 1e-4);
        assert!((f[0] - 4.0 / (1.0 + alpha + alpha * alpha + alpha.powi(3))).abs() < 1e-12);
        assert!((f.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!(matches!(pi_osm_encode(&[0, 0, 0], 4, &osm, &[2.0, 2.0, 1.0, -1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn dm_text_roundtrip() {
        let cfg = SchemeConfig { dm_budget: 3, ..SchemeConfig::gstsk(SchemeKind::Astsk, 2, 1, 2, 4, 1) };
        let s = Scheme::build(&cfg).unwrap();
        let set = s.dm_set.unwrap();
        let back = DispersionMatrixSet::from_text(&set.to_text()).unwrap();
        assert_eq!(back, set);
        assert!(DispersionMatrixSet::from_text("pmsim-dm 9\n").is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("astsk.dm");
        set.save(&path).unwrap();
        let loaded = Scheme::build(&SchemeConfig { dm_file: Some(path.display().to_string()), ..cfg }).unwrap();
        assert_eq!(loaded.dm_set.unwrap(), set);
    }

    #[test]
    fn optimiser_is_monotone_and_seeded() {
        let cfg = SchemeConfig::gstsk(SchemeKind::SquareGstsk, 2, 1, 2, 4, 2);
        let one = Scheme::build(&SchemeConfig { dm_budget: 1, ..cfg.clone() }).unwrap();
        let many = Scheme::build(&SchemeConfig { dm_budget: 300, ..cfg.clone() }).unwrap();
        let score = |s: &Scheme| crate::metrics::diversity_coding_gain(&s.codebook().unwrap(), 1).unwrap();
        let (d1, g1) = score(&one);
        let (d2, g2) = score(&many);
        assert!((d2, g2) >= (d1, g1));
        let again = Scheme::build(&SchemeConfig { dm_budget: 300, ..cfg }).unwrap();
        assert_eq!(again.dm_set, many.dm_set);
    }

    #[test]
    fn coherent_sets_meet_power_rule() {
        let cfgs = vec![
            SchemeConfig::new(SchemeKind::Sm, 4),
            SchemeConfig { p: Some(3), ..SchemeConfig::new(SchemeKind::Gsm, 5) },
            SchemeConfig::new(SchemeKind::Blast, 3),
            SchemeConfig { dm_budget: 5, ..SchemeConfig::gstsk(SchemeKind::Astsk, 4, 1, 2, 4, 1) },
            SchemeConfig { dm_budget: 5, ..SchemeConfig::gstsk(SchemeKind::Astsk, 2, 1, 3, 4, 1) },
            SchemeConfig { dm_budget: 5, ..SchemeConfig::gstsk(SchemeKind::SquareGstsk, 3, 1, 3, 4, 2) },
        ];
        for cfg in cfgs {
            let s = Scheme::build(&cfg).unwrap();
            s.dm_set.as_ref().unwrap().validate().unwrap();
            let t = s.t() as f64;
            for a in &s.dm_set.as_ref().unwrap().matrices {
                assert!((a.frobenius_norm_sq() - t / s.p() as f64).abs() < 1e-10);
            }
        }
    }

    fn small_schemes() -> Vec<Scheme> {
        let cfgs = vec![
            SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Apsk, 1) },
            SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Sm, 4) },
            SchemeConfig::new(SchemeKind::Ssk, 8),
            SchemeConfig { p: Some(2), ..SchemeConfig::new(SchemeKind::Gsm, 4) },
            SchemeConfig { p: Some(2), ..SchemeConfig::new(SchemeKind::Gssk, 5) },
            SchemeConfig { dm_budget: 5, ..SchemeConfig::gstsk(SchemeKind::Astsk, 2, 1, 2, 4, 1) },
            SchemeConfig::new(SchemeKind::Blast, 3),
            SchemeConfig { dm_budget: 5, ..SchemeConfig::gstsk(SchemeKind::SquareGstsk, 2, 1, 2, 4, 2) },
            SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::Dapsk, 1) },
            SchemeConfig { symbols: Some(2), ..SchemeConfig::new(SchemeKind::Bdsm, 2) },
            SchemeConfig { symbols: Some(1), l: 4, dm_budget: 5, ..SchemeConfig::new(SchemeKind::Udsm, 2) },
            SchemeConfig { dm_budget: 5, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 2, 1, 2, 4, 2) },
            SchemeConfig { p: Some(1), l: 4, constellation: Some(ConstellationKind::Qam), ..SchemeConfig::new(SchemeKind::Sim, 4) },
            SchemeConfig::new(SchemeKind::Ofdm, 4),
            SchemeConfig::new(SchemeKind::Osm, 4),
            SchemeConfig { pi_beta_db: Some(2.0), ..SchemeConfig::new(SchemeKind::PiOsm, 2) },
            SchemeConfig { l: 4, ..SchemeConfig::new(SchemeKind::PamRc, 2) },
        ];
        cfgs.iter().map(|c| Scheme::build(c).unwrap()).collect()
    }

    #[test]
    fn encoders_are_injective_and_rates_agree() {
        for s in small_schemes() {
            let book = s.codebook().unwrap();
            let set: HashSet<_> = book.iter().map(|c| key(&c.s)).collect();
            assert_eq!(set.len(), book.len(), "{:?}", s.kind());
            let r = (book.len() as f64).log2() / s.channel_uses() as f64;
            assert!((r - s.rate()).abs() < 1e-12);
            if s.is_differential() {
                assert!(book.iter().all(|c| c.s.unitarity_defect() < 1e-9));
            }
            if s.is_optical() {
                assert!(book.iter().all(|c| c.s.as_slice().iter().all(|z| z.re >= 0.0 && z.im == 0.0)));
            }
        }
    }

    #[test]
    fn gstsk_matches_term_by_term_sum() {
        for s in small_schemes().into_iter().filter(|s| s.family == Family::Gstsk) {
            let set = s.dm_set.as_ref().unwrap();
            let act = s.activation.as_ref().unwrap();
            let con = &s.constellations[0];
            let kb = act.index_bits();
            let sb = con.bits_per_symbol();
            for cw in s.codebook().unwrap() {
                let k = bits_to_int(&cw.bits[..kb]);
                let mut want = CMatrix::zeros(s.m(), s.t());
                for (pi, &q) in act.vectors[k].iter().enumerate() {
                    let u = bits_to_int(&cw.bits[kb + pi * sb..kb + (pi + 1) * sb]);
                    want = &want + &set.matrices[q].scale(con.point_for_label(u));
                }
                assert!((&want - &cw.s).frobenius_norm_sq() < 1e-28);
            }
        }
    }

    proptest! {
        #[test]
        fn random_data_matrices_unitary(seed in any::<u64>()) {
            let mut rng = SimRng::new(seed);
            let cfgs = [
                SchemeConfig { symbols: Some(1), l: 8, dm_budget: 1, dm_seed: seed, ..SchemeConfig::new(SchemeKind::Udsm, 3) },
                SchemeConfig { l: 4, dm_budget: 1, dm_seed: seed, ..SchemeConfig::gstsk(SchemeKind::Ncgsm, 3, 1, 3, 5, 2) },
            ];
            for cfg in &cfgs {
                let s = Scheme::build(cfg).unwrap();
                let x = s.encode(&rng.bits(s.bits_per_block())).unwrap();
                prop_assert!(x.unitarity_defect() < 1e-10);
            }
        }
    }
}
