//! Monte-Carlo experiment orchestration: deterministic per-trial seeding,
//! scheme dispatch (transmit → channel → detect → count), early stopping,
//! and CSV report generation for the command-line interface.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Deserialize;
use std::fmt::Write as _;

use crate::channel::{
    add_awgn, apply_channel, generate_taps, per_bin_response, ChannelTap, MobilityProfile,
    PowerDelayProfile,
};
use crate::detect::{
    equalize_per_bin, hard_decisions, matched_filter_separate, mpa_detect, sic_detect,
    GroupObservation,
};
use crate::error::{Error, Result};
use crate::noma::{
    hermite_tx, pdm_weights, scma_encode, spectral_efficiency, superimpose_pdm, Scheme,
    ScmaCodebook,
};
use crate::otfs::{dd_demodulate, dd_modulate, DDGrid, OtfsConfig, QamConstellation};
use crate::pulse::{
    ambiguity, hermite_subpulse, pulse_train, rect_subpulse, rrc_subpulse, Pulse, ScalePolicy,
};

/// Trials dispatched per parallel batch. Early-stop decisions happen only at
/// batch boundaries, so results are identical at every worker count.
const BATCH: usize = 256;

/// Message-passing iterations used by the sparse-code receiver.
const MPA_ITERS: usize = 10;

/// Stand-in noise variance handed to the MPA when the run is noiseless.
const NOISELESS_N0: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Complete description of one BER experiment. Deserializable from TOML; the
/// CLI overlays its flags on top of the file values.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub users: usize,
    pub m: usize,
    pub n: usize,
    pub sps: usize,
    pub delta_f_hz: f64,
    pub qam_order: usize,
    pub beta: f64,
    pub speed_kmh: f64,
    pub carrier_hz: f64,
    /// Number of propagation paths; 0 disables fading entirely (identity
    /// channel, the receiver assumes a flat unit response).
    pub paths: usize,
    pub delay_spread_s: f64,
    pub esn0_db: Vec<f64>,
    /// Hard cap on simulated frames per sweep point.
    pub trials: usize,
    /// Frames that must accumulate before early stopping is considered.
    pub min_frames: usize,
    /// Accumulated bit errors (all users) that allow a point to stop early;
    /// 0 disables early stopping.
    pub stop_errors: usize,
    pub seed: u64,
    pub noiseless: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheme: Scheme::Hermite,
            users: 2,
            m: 4,
            n: 2,
            sps: 8,
            delta_f_hz: 15e3,
            qam_order: 4,
            beta: 0.2,
            speed_kmh: 500.0,
            carrier_hz: 4e9,
            paths: 4,
            delay_spread_s: 1.0e-5,
            esn0_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            trials: 20_000,
            min_frames: 200,
            stop_errors: 500,
            seed: 1,
            noiseless: false,
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML experiment file; unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config file: {e}")))
    }

    pub fn otfs(&self) -> Result<OtfsConfig> {
        OtfsConfig::new(self.m, self.n, self.delta_f_hz, self.sps)
    }

    fn mobility(&self, seed: u64) -> MobilityProfile {
        MobilityProfile {
            speed_kmh: self.speed_kmh,
            carrier_hz: self.carrier_hz,
            paths: self.paths,
            pdp: PowerDelayProfile::Exponential { db_per_tap: 3.0 },
            delay_spread_s: self.delay_spread_s,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.esn0_db.is_empty() {
            return Err(Error::config("Es/N0 sweep must not be empty"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.users == 0 {
            return Err(Error::config("need at least one user"));
        }
        if self.scheme == Scheme::Scma && self.qam_order != 4 {
            return Err(Error::config(
                "the shipped sparse codebook uses 4-point codewords; qam_order must be 4",
            ));
        }
        self.otfs()?;
        QamConstellation::new(self.qam_order)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One row of a BER sweep: a (scheme, user, Es/N0) cell. `user` is a numeric
/// id or "all" for the aggregate across users.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub user: String,
    pub esn0_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub seed: u64,
}

/// Monte-Carlo standard deviation of a BER estimate.
pub fn ber_std(ber: f64, bits: u64) -> f64 {
    if bits == 0 {
        return f64::INFINITY;
    }
    (ber * (1.0 - ber) / bits as f64).max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// Deterministic seeding
// ---------------------------------------------------------------------------

/// Counter-based stream: the generator for one trial is fully determined by
/// (master seed, sweep index, trial index), so any execution order or worker
/// count reproduces identical draws.
fn trial_rng(master: u64, snr_idx: usize, trial: usize) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&(snr_idx as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&(trial as u64).to_le_bytes());
    seed[24..32].copy_from_slice(b"ddnomaMC");
    ChaCha12Rng::from_seed(seed)
}

// ---------------------------------------------------------------------------
// Per-trial simulation
// ---------------------------------------------------------------------------

/// Immutable per-run assets shared by all worker threads.
struct RunContext {
    cfg: ExperimentConfig,
    otfs: OtfsConfig,
    qam: QamConstellation,
    /// Hermite orders 0..users (pulse-division scheme).
    orders: Vec<usize>,
    /// Shared data waveform for the power-domain and sparse-code schemes.
    train: Pulse,
    /// Power split for the power-domain scheme.
    weights: Vec<f64>,
    codebook: ScmaCodebook,
    /// Average energy per transmitted constellation symbol at channel input.
    es: f64,
}

impl RunContext {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let otfs = cfg.otfs()?;
        let qam = QamConstellation::new(cfg.qam_order)?;
        let sub = rrc_subpulse(cfg.beta, otfs.m(), &otfs)?;
        let train = pulse_train(&sub, &otfs)?;
        let codebook = ScmaCodebook::default_k4_j6().active(match cfg.scheme {
            Scheme::Scma => cfg.users,
            _ => 1,
        })?;
        if cfg.scheme == Scheme::Scma && otfs.bins() % codebook.k() != 0 {
            return Err(Error::config(format!(
                "grid capacity {} is not a multiple of the {}-resource group",
                otfs.bins(),
                codebook.k()
            )));
        }
        let es = match cfg.scheme {
            Scheme::Pdm => 1.0 / cfg.users as f64,
            Scheme::Scma | Scheme::Hermite => 1.0,
        };
        Ok(RunContext {
            cfg: cfg.clone(),
            otfs,
            qam,
            orders: (0..cfg.users).collect(),
            train,
            weights: pdm_weights(cfg.users),
            codebook,
            es,
        })
    }

    fn bits_per_frame_per_user(&self) -> usize {
        match self.cfg.scheme {
            Scheme::Pdm | Scheme::Hermite => self.otfs.bins() * self.qam.bits_per_symbol(),
            Scheme::Scma => {
                self.otfs.bins() / self.codebook.k() * self.codebook.bits_per_codeword()
            }
        }
    }

    /// Fixed per-trial draw order: tap seed, then each user's bits, then the
    /// noise inside add_awgn.
    fn run_trial(&self, snr_idx: usize, trial: usize, esn0_db: f64) -> Result<Vec<(u64, u64)>> {
        let mut rng = trial_rng(self.cfg.seed, snr_idx, trial);
        let tap_seed: u64 = rng.gen();
        let taps: Option<Vec<ChannelTap>> = if self.cfg.paths > 0 {
            Some(generate_taps(&self.cfg.mobility(tap_seed), &self.otfs)?)
        } else {
            None
        };
        let users = self.cfg.users;
        let bpf = self.bits_per_frame_per_user();
        let tx_bits: Vec<Vec<u8>> = (0..users)
            .map(|_| (0..bpf).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();

        let rx_bits: Vec<Vec<u8>> = match self.cfg.scheme {
            Scheme::Hermite => self.trial_hermite(&tx_bits, taps.as_deref(), esn0_db, &mut rng)?,
            Scheme::Pdm => self.trial_pdm(&tx_bits, taps.as_deref(), esn0_db, &mut rng)?,
            Scheme::Scma => self.trial_scma(&tx_bits, taps.as_deref(), esn0_db, &mut rng)?,
        };

        Ok(tx_bits
            .iter()
            .zip(&rx_bits)
            .map(|(tx, rx)| {
                let errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64;
                (tx.len() as u64, errors)
            })
            .collect())
    }

    fn qam_grid(&self, bits: &[u8]) -> Result<DDGrid> {
        let symbols = self.qam.map_bits(bits)?;
        DDGrid::from_data(self.otfs.m(), self.otfs.n(), symbols)
    }

    fn ones_grid(&self) -> DDGrid {
        let mut h = DDGrid::zeros(self.otfs.m(), self.otfs.n());
        for v in h.as_mut_slice() {
            *v = Complex64::new(1.0, 0.0);
        }
        h
    }

    fn channel_and_noise(
        &self,
        s: crate::otfs::TimeSignal,
        taps: Option<&[ChannelTap]>,
        esn0_db: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<crate::otfs::TimeSignal> {
        let r = match taps {
            Some(t) => apply_channel(&s, t, &self.otfs)?,
            None => s,
        };
        if self.cfg.noiseless {
            Ok(r)
        } else {
            add_awgn(&r, esn0_db, self.es, rng)
        }
    }

    fn trial_hermite(
        &self,
        tx_bits: &[Vec<u8>],
        taps: Option<&[ChannelTap]>,
        esn0_db: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Vec<u8>>> {
        let grids: Vec<DDGrid> =
            tx_bits.iter().map(|b| self.qam_grid(b)).collect::<Result<_>>()?;
        let s = hermite_tx(&grids, &self.orders, &self.otfs)?;
        let r = self.channel_and_noise(s, taps, esn0_db, rng)?;
        let ys = matched_filter_separate(&r, &self.orders, &self.otfs)?;
        let trains = crate::noma::hermite_trains(&self.orders, &self.otfs)?;
        let mut out = Vec::with_capacity(ys.len());
        for (y, train) in ys.iter().zip(&trains) {
            let h = match taps {
                Some(t) => per_bin_response(t, train, &self.otfs)?,
                None => self.ones_grid(),
            };
            let z = equalize_per_bin(y, &h)?;
            out.push(self.qam.demap_symbols(z.as_slice()));
        }
        Ok(out)
    }

    fn trial_pdm(
        &self,
        tx_bits: &[Vec<u8>],
        taps: Option<&[ChannelTap]>,
        esn0_db: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Vec<u8>>> {
        let grids: Vec<DDGrid> =
            tx_bits.iter().map(|b| self.qam_grid(b)).collect::<Result<_>>()?;
        let mix = superimpose_pdm(&grids, &self.weights)?;
        let s = dd_modulate(&mix, &self.train, &self.otfs)?;
        let r = self.channel_and_noise(s, taps, esn0_db, rng)?;
        let y = dd_demodulate(&r, &self.train, &self.otfs)?;
        let h = match taps {
            Some(t) => per_bin_response(t, &self.train, &self.otfs)?,
            None => self.ones_grid(),
        };
        sic_detect(&y, &self.weights, &self.qam, &h)
    }

    fn trial_scma(
        &self,
        tx_bits: &[Vec<u8>],
        taps: Option<&[ChannelTap]>,
        esn0_db: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Vec<u8>>> {
        let grid = scma_encode(tx_bits, &self.codebook, &self.otfs)?;
        let s = dd_modulate(&grid, &self.train, &self.otfs)?;
        let r = self.channel_and_noise(s, taps, esn0_db, rng)?;
        let y = dd_demodulate(&r, &self.train, &self.otfs)?;
        let h = match taps {
            Some(t) => per_bin_response(t, &self.train, &self.otfs)?,
            None => self.ones_grid(),
        };
        let k = self.codebook.k();
        let groups: Vec<GroupObservation> = y
            .as_slice()
            .chunks(k)
            .zip(h.as_slice().chunks(k))
            .map(|(yc, hc)| GroupObservation { y: yc.to_vec(), h: hc.to_vec() })
            .collect();
        let n0 = if self.cfg.noiseless {
            NOISELESS_N0
        } else {
            self.es * 10f64.powf(-esn0_db / 10.0)
        };
        let posteriors = mpa_detect(&groups, &self.codebook, n0, MPA_ITERS)?;
        let decisions = hard_decisions(&posteriors);
        let bpc = self.codebook.bits_per_codeword();
        let mut out = vec![Vec::with_capacity(decisions.len() * bpc); self.cfg.users];
        for group in &decisions {
            for (j, &sym) in group.iter().enumerate() {
                out[j].extend(self.qam.index_to_bits(sym));
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Sweep driver
// ---------------------------------------------------------------------------

/// Runs the configured BER sweep. For each Es/N0 point, trials are simulated
/// in fixed-size batches (parallel within a batch, results reduced in trial
/// order); a point stops early once at least `min_frames` frames are done and
/// `stop_errors` bit errors have accumulated. Emits one record per user per
/// point plus an "all" aggregate.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    let ctx = RunContext::new(cfg)?;
    let users = cfg.users;
    let mut records = Vec::new();
    for (si, &esn0) in cfg.esn0_db.iter().enumerate() {
        let mut bits = vec![0u64; users];
        let mut errors = vec![0u64; users];
        let mut trial = 0usize;
        while trial < cfg.trials {
            let hi = (trial + BATCH).min(cfg.trials);
            let batch: Vec<Vec<(u64, u64)>> = (trial..hi)
                .into_par_iter()
                .map(|t| ctx.run_trial(si, t, esn0))
                .collect::<Result<_>>()?;
            for counts in &batch {
                for (j, &(b, e)) in counts.iter().enumerate() {
                    bits[j] += b;
                    errors[j] += e;
                }
            }
            trial = hi;
            let total_errors: u64 = errors.iter().sum();
            if cfg.stop_errors > 0
                && trial >= cfg.min_frames
                && total_errors >= cfg.stop_errors as u64
            {
                break;
            }
        }
        for j in 0..users {
            records.push(BerRecord {
                scheme: cfg.scheme,
                user: j.to_string(),
                esn0_db: esn0,
                bits: bits[j],
                errors: errors[j],
                ber: errors[j] as f64 / bits[j].max(1) as f64,
                seed: cfg.seed,
            });
        }
        let all_bits: u64 = bits.iter().sum();
        let all_errors: u64 = errors.iter().sum();
        records.push(BerRecord {
            scheme: cfg.scheme,
            user: "all".to_string(),
            esn0_db: esn0,
            bits: all_bits,
            errors: all_errors,
            ber: all_errors as f64 / all_bits.max(1) as f64,
            seed: cfg.seed,
        });
    }
    Ok(records)
}

/// Renders BER records as CSV with `#` metadata lines and the fixed column
/// set `scheme,user,esn0_db,bits,errors,ber,seed`.
pub fn ber_to_csv(records: &[BerRecord], cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str("# ddnoma ber sweep\n");
    let _ = writeln!(
        out,
        "# scheme={} users={} qam={} es_per_symbol={}",
        cfg.scheme,
        cfg.users,
        cfg.qam_order,
        match cfg.scheme {
            Scheme::Pdm => 1.0 / cfg.users as f64,
            _ => 1.0,
        }
    );
    let _ = writeln!(
        out,
        "# otfs: m={} n={} sps={} delta_f_hz={}",
        cfg.m, cfg.n, cfg.sps, cfg.delta_f_hz
    );
    let _ = writeln!(
        out,
        "# channel: speed_kmh={} carrier_hz={} paths={} delay_spread_s={}",
        cfg.speed_kmh, cfg.carrier_hz, cfg.paths, cfg.delay_spread_s
    );
    let _ = writeln!(
        out,
        "# run: trials={} min_frames={} stop_errors={} noiseless={} mpa_iters={}",
        cfg.trials, cfg.min_frames, cfg.stop_errors, cfg.noiseless, MPA_ITERS
    );
    out.push_str("scheme,user,esn0_db,bits,errors,ber,seed\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6e},{}",
            r.scheme, r.user, r.esn0_db, r.bits, r.errors, r.ber, r.seed
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Pulse and ambiguity reports
// ---------------------------------------------------------------------------

/// Pulse family selector for the `ambiguity` and `pulses` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseFamily {
    Rect,
    Rrc,
    Hermite,
}

impl std::str::FromStr for PulseFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" => Ok(PulseFamily::Rect),
            "rrc" => Ok(PulseFamily::Rrc),
            "hermite" => Ok(PulseFamily::Hermite),
            other => Err(Error::config(format!(
                "unknown pulse family '{other}' (expected rect, rrc, or hermite)"
            ))),
        }
    }
}

/// Builds the frame-tiling pulse train for a family: rect and RRC occupy one
/// delay bin (RRC spans the slot via periodic folding), Hermite uses the
/// requested order at the shared scale policy.
pub fn build_train(
    family: PulseFamily,
    order: usize,
    beta: f64,
    cfg: &OtfsConfig,
) -> Result<Pulse> {
    let sub = match family {
        PulseFamily::Rect => rect_subpulse(cfg),
        PulseFamily::Rrc => rrc_subpulse(beta, cfg.m(), cfg)?,
        PulseFamily::Hermite => hermite_subpulse(order, cfg, &ScalePolicy::single(order))?,
    };
    pulse_train(&sub, cfg)
}

/// Cross-ambiguity of a pulse train with itself on the delay-Doppler lattice,
/// as CSV rows `m,n,tau_s,nu_hz,re,im,abs`.
pub fn ambiguity_csv(
    family: PulseFamily,
    order: usize,
    beta: f64,
    cfg: &OtfsConfig,
) -> Result<String> {
    let train = build_train(family, order, beta, cfg)?;
    let surf = ambiguity(&train, &train, cfg)?;
    let mut out = String::new();
    let _ = writeln!(out, "# ambiguity surface: {}", train.label);
    let _ = writeln!(
        out,
        "# delay_step_s={} doppler_step_hz={}",
        surf.delay_step_s(),
        surf.doppler_step_hz()
    );
    out.push_str("m,n,tau_s,nu_hz,re,im,abs\n");
    for (m, n, v) in surf.iter() {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.12e},{:.12e},{:.12e}",
            m,
            n,
            m as f64 * surf.delay_step_s(),
            n as f64 * surf.doppler_step_hz(),
            v.re,
            v.im,
            v.norm()
        );
    }
    Ok(out)
}

/// Sampled waveform of a pulse train, as CSV rows `idx,t_s,re,im`.
pub fn pulses_csv(family: PulseFamily, order: usize, beta: f64, cfg: &OtfsConfig) -> Result<String> {
    let train = build_train(family, order, beta, cfg)?;
    let mut out = String::new();
    let _ = writeln!(out, "# pulse train: {}", train.label);
    out.push_str("idx,t_s,re,im\n");
    for (i, v) in train.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{},{:.12e},{:.12e}", i, i as f64 * train.dt, v.re, v.im);
    }
    Ok(out)
}

/// Spectral-efficiency table: every ordered scheme pair with their bit/bin
/// rates and the ratio, as CSV `scheme_a,scheme_b,se_a,se_b,ratio`.
pub fn se_report_csv(qam_order: usize, users: usize, k: usize) -> Result<String> {
    QamConstellation::new(qam_order)?;
    if users == 0 || k == 0 {
        return Err(Error::config("users and resource-group size must be positive"));
    }
    let schemes = [Scheme::Hermite, Scheme::Scma, Scheme::Pdm];
    let mut out = String::new();
    let _ = writeln!(out, "# spectral efficiency (bits per delay-Doppler bin), qam={qam_order} users={users} k={k}");
    out.push_str("scheme_a,scheme_b,se_a,se_b,ratio\n");
    for &a in &schemes {
        for &b in &schemes {
            let se_a = spectral_efficiency(a, qam_order, users, k);
            let se_b = spectral_efficiency(b, qam_order, users, k);
            let _ = writeln!(out, "{},{},{},{},{}", a, b, se_a, se_b, se_a / se_b);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
