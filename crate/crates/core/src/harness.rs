//! Configuration-driven experiment runner and command-line entry point.
//!
//! An experiment file is JSON with four blocks:
//!
//! ```json
//! {
//!   "experiment": { "kind": "ber", "snr_db": [0, 5, 10], "trials": 10000, "seed": 1 },
//!   "scheme":     { "kind": "sm", "m": 2, "n": 2 },
//!   "channel":    { "model": "rayleigh" },
//!   "noise":      { "csi_error_variance": 0.0 }
//! }
//! ```
//!
//! Trials at each SNR point are cut into fixed-size frames. Every frame owns a
//! random stream keyed by (point, frame) and its own channel process, so the
//! output does not depend on how many workers execute the frames.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    awgn, calibrate_power, estimate_with_error, mean_received_power, snr_to_noise_variance, vlc_channel,
    vlc_noise_variance, ChannelModel, ChannelSource, JakesChannel, MwcGeometry, VlcGeometry,
};
use crate::detection::SparseCodebook;
use crate::error::{Error, Result};
use crate::metrics::{self, MetricKind, Moments};
use crate::numerics::{CMatrix, SimRng};
use crate::schemes::{DifferentialState, Scheme, SchemeConfig, SchemeKind, SpaceTimeCodeword};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ber,
    AmiConstrained,
    AmiUnconstrained,
    MedTable,
    ComplexityTable,
    PepBound,
}

fn one() -> u64 {
    1
}
fn default_trials() -> u64 {
    1000
}
fn default_frame() -> u64 {
    1000
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    pub snr_db: Vec<f64>,
    /// Codeword blocks (BER) or channel/noise samples (AMI) per SNR point.
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub output: Option<String>,
    /// Trials per independently seeded frame.
    #[serde(default = "default_frame")]
    pub frame: u64,
    /// Write measured wall time instead of 0 (makes the CSV non-reproducible).
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_scatterers() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JakesConfig {
    /// Normalised Doppler F_d T_s.
    pub doppler: f64,
    #[serde(default = "default_scatterers")]
    pub scatterers: usize,
}

fn default_model() -> ChannelModel {
    ChannelModel::Rayleigh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "default_model")]
    pub model: ChannelModel,
    #[serde(default)]
    pub jakes: Option<JakesConfig>,
    #[serde(default)]
    pub mwc: Option<MwcGeometry>,
    #[serde(default)]
    pub vlc: Option<VlcGeometry>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { model: ChannelModel::Rayleigh, jakes: None, mwc: None, vlc: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Variance ω of the additive channel-estimation error; 0 is perfect CSI.
    #[serde(default)]
    pub csi_error_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentBlock,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.inner()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks everything that can be checked without simulating, including
    /// building the scheme and its channel.
    pub fn validate(&self) -> Result<()> {
        Experiment::prepare(self).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub metric: MetricKind,
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub errors: u64,
    pub wall_seconds: f64,
}

/// A validated experiment with its scheme and codebooks resolved.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub scheme: Scheme,
    /// Transmitted codewords: power-calibrated RF blocks (differential data
    /// matrices scaled like the transmitted state), raw intensities for optics.
    pub codebook: Vec<SpaceTimeCodeword>,
    detector: SparseCodebook,
    /// Fixed channel for optical links.
    vlc_h: Option<CMatrix>,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        let ex = &config.experiment;
        if ex.snr_db.is_empty() {
            return Err(Error::Config("experiment.snr_db must not be empty".into()));
        }
        if ex.snr_db.windows(2).any(|w| !(w[1] > w[0])) || ex.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("experiment.snr_db must be finite and strictly increasing".into()));
        }
        if ex.trials == 0 || ex.frame == 0 || ex.workers == 0 {
            return Err(Error::Config("experiment.trials, frame and workers must be positive".into()));
        }
        if !(config.noise.csi_error_variance >= 0.0) {
            return Err(Error::Config("noise.csi_error_variance must be nonnegative".into()));
        }
        let scheme = Scheme::build(&config.scheme)?;
        let (m, n) = (scheme.m(), scheme.n());
        let model = config.channel.model;
        let kind = scheme.kind();
        match model {
            ChannelModel::Ofdm if !kind.is_multicarrier() => {
                return Err(Error::Config(format!("ofdm channel needs a multicarrier scheme, not {}", kind.name())));
            }
            ChannelModel::Vlc if !kind.is_optical() => {
                return Err(Error::Config(format!("vlc channel needs an optical scheme, not {}", kind.name())));
            }
            _ if kind.is_multicarrier() && model != ChannelModel::Ofdm => {
                return Err(Error::Config(format!("{} runs over the ofdm channel", kind.name())));
            }
            _ if kind.is_optical() && model != ChannelModel::Vlc => {
                return Err(Error::Config(format!("{} runs over the vlc channel", kind.name())));
            }
            _ => {}
        }
        if kind.is_multicarrier() && n != 1 {
            return Err(Error::Config("multicarrier schemes use a single receive antenna".into()));
        }
        let mut vlc_h = None;
        match model {
            ChannelModel::Jakes => {
                let j = config.channel.jakes.as_ref().ok_or_else(|| Error::Config("channel.jakes is required".into()))?;
                JakesChannel::new(n, m, j.doppler, j.scatterers, &mut SimRng::new(0))?;
            }
            ChannelModel::Mwc => {
                let g = config.channel.mwc.as_ref().ok_or_else(|| Error::Config("channel.mwc is required".into()))?;
                g.validate()?;
                if (g.rx_subarrays, g.tx_subarrays) != (n, m) {
                    return Err(Error::Config(format!(
                        "mwc subarrays {}x{} do not match scheme N x M = {n}x{m}",
                        g.rx_subarrays, g.tx_subarrays
                    )));
                }
            }
            ChannelModel::Vlc => {
                let g = config.channel.vlc.clone().unwrap_or_default();
                if (g.pds.len(), g.leds.len()) != (n, m) {
                    return Err(Error::Config(format!(
                        "vlc geometry has {} PDs x {} LEDs, scheme needs {n}x{m}",
                        g.pds.len(),
                        g.leds.len()
                    )));
                }
                vlc_h = Some(vlc_channel(&g)?.h);
            }
            _ => {}
        }
        let needs_book = !matches!(ex.kind, ExperimentKind::MedTable) || !is_selector(kind);
        let codebook = if needs_book { transmit_codebook(&scheme)? } else { Vec::new() };
        let detector = if codebook.is_empty() {
            SparseCodebook::new(&scheme.codebook()?[..1])?
        } else {
            SparseCodebook::new(&codebook)?
        };
        Ok(Experiment { config: config.clone(), scheme, codebook, detector, vlc_h })
    }

    fn noise_variance(&self, snr_db: f64) -> f64 {
        match &self.vlc_h {
            Some(h) => vlc_noise_variance(snr_db, mean_received_power(h, &self.codebook)),
            None => snr_to_noise_variance(snr_db),
        }
    }

    /// Fresh channel process for one frame.
    fn source(&self, rng: &mut SimRng) -> Result<ChannelSource> {
        let (m, n) = (self.scheme.m(), self.scheme.n());
        Ok(match self.config.channel.model {
            ChannelModel::Rayleigh => ChannelSource::Rayleigh { n, m },
            ChannelModel::Ofdm => ChannelSource::Ofdm { m },
            ChannelModel::Jakes => {
                let j = self.config.channel.jakes.as_ref().expect("validated");
                ChannelSource::Jakes { process: JakesChannel::new(n, m, j.doppler, j.scatterers, rng)?, time: 0, step: 1 }
            }
            ChannelModel::Mwc => ChannelSource::Mwc(self.config.channel.mwc.clone().expect("validated")),
            ChannelModel::Vlc => ChannelSource::Static(self.vlc_h.clone().expect("validated")),
        })
    }

    /// Runs the configured experiment over the whole SNR grid.
    pub fn run(&self) -> Result<Vec<ResultRow>> {
        let ex = &self.config.experiment;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ex.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", ex.workers)))?;
        let mut rows = Vec::with_capacity(ex.snr_db.len());
        for (point, &snr) in ex.snr_db.iter().enumerate() {
            let start = Instant::now();
            let mut row = pool.install(|| self.run_point(point, snr))?;
            if ex.record_wall_time {
                row.wall_seconds = start.elapsed().as_secs_f64();
            }
            log::info!("snr {snr} dB: {} = {:.6e}", row.metric.name(), row.value);
            rows.push(row);
        }
        Ok(rows)
    }

    fn frames(&self, point: usize) -> Vec<(SimRng, u64)> {
        let ex = &self.config.experiment;
        let count = ex.trials.div_ceil(ex.frame);
        (0..count)
            .map(|f| {
                let len = ex.frame.min(ex.trials - f * ex.frame);
                (SimRng::stream(ex.seed, ((point as u64) << 32) | f), len)
            })
            .collect()
    }

    fn run_point(&self, point: usize, snr: f64) -> Result<ResultRow> {
        let sigma2 = self.noise_variance(snr);
        let row = |metric, value, std_error, trials, errors| ResultRow {
            snr_db: snr,
            metric,
            value,
            std_error,
            trials,
            errors,
            wall_seconds: 0.0,
        };
        match self.config.experiment.kind {
            ExperimentKind::Ber => {
                let parts: Vec<Result<(u64, u64)>> =
                    self.frames(point).into_par_iter().map(|(mut rng, len)| self.ber_frame(sigma2, len, &mut rng)).collect();
                let (mut bits, mut errors) = (0u64, 0u64);
                for p in parts {
                    let (b, e) = p?;
                    bits += b;
                    errors += e;
                }
                let ber = errors as f64 / bits as f64;
                let se = (ber * (1.0 - ber) / bits as f64).sqrt();
                Ok(row(MetricKind::Ber, ber, se, self.config.experiment.trials, errors))
            }
            ExperimentKind::AmiConstrained | ExperimentKind::AmiUnconstrained => {
                let constrained = self.config.experiment.kind == ExperimentKind::AmiConstrained;
                let parts: Vec<Result<Moments>> = self
                    .frames(point)
                    .into_par_iter()
                    .map(|(mut rng, len)| self.ami_frame(constrained, sigma2, len, &mut rng))
                    .collect();
                let mut mom = Moments::default();
                for p in parts {
                    mom.merge(&p?);
                }
                let kind = if constrained { MetricKind::AmiConstrained } else { MetricKind::AmiUnconstrained };
                let est = mom.estimate(kind, 1.0 / self.scheme.channel_uses() as f64);
                Ok(row(kind, est.value, est.std_error, est.trials, 0))
            }
            ExperimentKind::MedTable => Ok(row(MetricKind::Med, self.med()?, 0.0, 0, 0)),
            ExperimentKind::ComplexityTable => Ok(row(MetricKind::Complexity, self.complexity()?, 0.0, 1, 0)),
            ExperimentKind::PepBound => {
                let bound = metrics::ber_union_bound(&self.codebook, self.scheme.n(), sigma2)?;
                Ok(row(MetricKind::PepBound, bound, 0.0, 0, 0))
            }
        }
    }

    /// (bits sent, bit errors) over `len` blocks.
    fn ber_frame(&self, sigma2: f64, len: u64, rng: &mut SimRng) -> Result<(u64, u64)> {
        let mut src = self.source(rng)?;
        let omega = self.config.noise.csi_error_variance;
        let nc = self.codebook.len();
        let b = self.scheme.bits_per_block() as u64;
        let mut errors = 0u64;
        let mut scratch = Vec::new();
        let hamming = |a: &[u8], c: &[u8]| a.iter().zip(c).filter(|(x, y)| x != y).count() as u64;
        if !self.scheme.is_differential() {
            for _ in 0..len {
                let h = src.next(rng)?;
                let h_hat = estimate_with_error(&h, omega, rng);
                let k = rng.below(nc);
                let cw = &self.codebook[k];
                let clean = h.matmul(&cw.s)?;
                let y = &clean + &awgn(clean.rows(), clean.cols(), sigma2, rng);
                let d = self.detector.detect(&y, &h_hat, &mut scratch)?;
                errors += hamming(&d.detected_bits, &cw.bits);
            }
            return Ok((len * b, errors));
        }
        // differential: the codebook holds scaled data matrices, the state is unitary
        let m = self.scheme.m();
        let unit: Vec<CMatrix> = self.scheme.codebook()?.into_iter().map(|c| c.s).collect();
        let gain = (self.scheme.t() as f64).sqrt();
        let continuous = matches!(src, ChannelSource::Jakes { .. });
        let mut state = DifferentialState::new(m);
        let receive = |h: &CMatrix, s: &CMatrix, rng: &mut SimRng| -> Result<CMatrix> {
            let clean = h.matmul(s)?.scale_real(gain);
            Ok(&clean + &awgn(clean.rows(), clean.cols(), sigma2, rng))
        };
        let mut y_prev = if continuous { Some(receive(&src.next(rng)?, &state.s, rng)?) } else { None };
        for _ in 0..len {
            let k = rng.below(nc);
            let prev_s = state.s.clone();
            let s = state.step(&unit[k])?;
            let h = src.next(rng)?;
            let yp = match y_prev.take() {
                Some(y) => y,
                None => receive(&h, &prev_s, rng)?,
            };
            let y = receive(&h, &s, rng)?;
            let d = self.detector.detect(&y, &yp, &mut scratch)?;
            errors += hamming(&d.detected_bits, &self.codebook[k].bits);
            if continuous {
                y_prev = Some(y);
            }
        }
        Ok((len * b, errors))
    }

    fn ami_frame(&self, constrained: bool, sigma2: f64, len: u64, rng: &mut SimRng) -> Result<Moments> {
        let mut src = self.source(rng)?;
        if constrained {
            return metrics::constrained_ami_moments(&self.codebook, &mut src, sigma2, len as usize, rng);
        }
        // per-block capacity is T copies of the per-use log-det; run_point divides by channel uses
        let rho = mean_entry_power(&self.codebook) / sigma2;
        let t = self.scheme.t() as f64;
        let mut mom = Moments::default();
        for _ in 0..len {
            mom.push(t * metrics::log_det_capacity(&src.next(rng)?, rho)?);
        }
        Ok(mom)
    }

    fn med(&self) -> Result<f64> {
        if is_selector(self.scheme.kind()) {
            return metrics::med_selector(&self.scheme);
        }
        if self.codebook.len() > 1 << 12 {
            return Err(Error::Size(format!("exhaustive MED over {} codewords", self.codebook.len())));
        }
        metrics::med(&self.codebook, None)
    }

    /// Counted real multiplications per channel use for one detection.
    fn complexity(&self) -> Result<f64> {
        let (n, t) = (self.scheme.n(), self.scheme.t());
        let y = CMatrix::zeros(n, t);
        let a = CMatrix::zeros(n, self.scheme.m());
        let d = self.detector.detect(&y, &a, &mut Vec::new())?;
        Ok(d.mults_per_channel_use(t))
    }
}

fn is_selector(kind: SchemeKind) -> bool {
    use SchemeKind as K;
    matches!(kind, K::Apsk | K::Sm | K::Ssk | K::Gsm | K::Gssk | K::Blast)
}

fn mean_entry_power(book: &[SpaceTimeCodeword]) -> f64 {
    let (r, c) = book[0].s.shape();
    book.iter().map(|w| w.s.frobenius_norm_sq()).sum::<f64>() / (book.len() * r * c) as f64
}

/// Codewords as transmitted: RF books are calibrated to mean power M·T (for
/// differential schemes this is the data matrix scaled like the state);
/// optical books are used as is.
pub fn transmit_codebook(scheme: &Scheme) -> Result<Vec<SpaceTimeCodeword>> {
    let book = scheme.codebook()?;
    if scheme.is_optical() {
        return Ok(book);
    }
    calibrate_power(&book, scheme.m(), scheme.t())
}

/// `%.9g`-style formatting.
pub fn format_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..9).contains(&exp) {
        trim(&format!("{v:.*}", (8 - exp).max(0) as usize))
    } else {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub const CSV_HEADER: &str = "snr_db,metric,value,std_error,trials,errors,wall_seconds";

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_g9(r.snr_db),
            r.metric.name(),
            format_g9(r.value),
            format_g9(r.std_error),
            r.trials,
            r.errors,
            format_g9(r.wall_seconds)
        );
    }
    out
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, to_csv(rows)).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn simulate_ber(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if config.experiment.kind != ExperimentKind::Ber {
        return Err(Error::Config("simulate_ber needs experiment.kind = ber".into()));
    }
    Experiment::prepare(config)?.run()
}

pub fn sweep_ami(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if !matches!(config.experiment.kind, ExperimentKind::AmiConstrained | ExperimentKind::AmiUnconstrained) {
        return Err(Error::Config("sweep_ami needs an ami experiment kind".into()));
    }
    Experiment::prepare(config)?.run()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Experiment::prepare(config)?.run()
}

#[derive(Debug, Parser)]
#[command(name = "pmsim", about = "Permutation and index modulation link-level simulator")]
struct Cli {
    /// Experiment file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, overriding experiment.workers.
    #[arg(long)]
    workers: Option<usize>,
    /// CSV destination, overriding experiment.output; stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the configuration and exit.
    #[arg(long)]
    validate_only: bool,
    /// Print the supported scheme kinds and exit.
    #[arg(long)]
    list_schemes: bool,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("PMSIM_LOG", "off");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `argv` (program name first) and runs. Returns the exit status:
/// 0 on success, 2 for usage and configuration errors, 1 for runtime failures.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.list_schemes {
        for k in SchemeKind::ALL {
            println!("{:<14} {}", k.name(), k.summary());
        }
        return 0;
    }
    let Some(path) = cli.config else {
        eprintln!("usage error: --config <path> is required");
        return 2;
    };
    let mut config = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e}");
            return 2;
        }
    };
    if let Some(s) = cli.seed {
        config.experiment.seed = s;
    }
    if let Some(w) = cli.workers {
        config.experiment.workers = w;
    }
    if let Some(out) = &cli.out {
        config.experiment.output = Some(out.display().to_string());
    }
    let exp = match Experiment::prepare(&config) {
        Ok(e) => e,
        Err(e @ (Error::Io { .. } | Error::NonFinite(_) | Error::Singular { .. })) => {
            eprintln!("runtime error: {e}");
            return 1;
        }
        Err(e) => {
            eprintln!("usage error: {e}");
            return 2;
        }
    };
    if cli.validate_only {
        eprintln!(
            "{}: {} carries {} bits per block at {} bits per channel use, configuration ok",
            path.display(),
            config.scheme.kind.name(),
            exp.scheme.bits_per_block(),
            format_g9(exp.scheme.rate())
        );
        return 0;
    }
    let rows = match exp.run() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("runtime error: {e}");
            return 1;
        }
    };
    match &config.experiment.output {
        Some(out) => {
            if let Err(e) = write_csv(Path::new(out), &rows) {
                eprintln!("runtime error: {e}");
                return 1;
            }
            for r in &rows {
                println!(
                    "snr {:>8} dB  {} {:<14} +- {:<14} trials {} errors {}",
                    format_g9(r.snr_db),
                    r.metric.name(),
                    format_g9(r.value),
                    format_g9(r.std_error),
                    r.trials,
                    r.errors
                );
            }
            println!("wrote {} rows to {out}", rows.len());
        }
        None => print!("{}", to_csv(&rows)),
    }
    0
}
