//! Doubly dispersive channel and noise.
//!
//! The channel is a finite sum of point scatterers, each with a complex gain,
//! a sample-aligned delay, and a Doppler shift. Delays act cyclically over
//! the frame (cyclic-prefix emulation); Doppler modulates in absolute time.
//! Tap parameters stay constant over a frame (block fading). AWGN is
//! calibrated against the average energy per transmitted constellation
//! symbol, so Es/N0 sweeps line up with closed-form references.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::otfs::{dd_demodulate, dd_modulate, DDGrid, OtfsConfig, TimeSignal, SPEED_OF_LIGHT};
use crate::pulse::Pulse;

/// One point scatterer of the delay-Doppler channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTap {
    pub gain: Complex64,
    /// Propagation delay in seconds, quantized to the sample grid.
    pub delay_s: f64,
    /// Doppler shift in Hz.
    pub doppler_hz: f64,
}

/// Per-path average power law used when drawing tap gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerDelayProfile {
    /// All paths carry equal average power.
    Uniform,
    /// Average power drops by `db_per_tap` dB from each path to the next.
    Exponential { db_per_tap: f64 },
}

/// Scenario description from which random channel realizations are drawn.
/// The seed makes realizations reproducible; Monte-Carlo trials derive one
/// profile (hence one independent tap set) per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityProfile {
    pub speed_kmh: f64,
    pub carrier_hz: f64,
    pub paths: usize,
    pub pdp: PowerDelayProfile,
    /// Largest path delay, in seconds (quantized down to the delay-bin grid).
    pub delay_spread_s: f64,
    pub seed: u64,
}

impl MobilityProfile {
    /// High-mobility default: 500 km/h at a 4 GHz carrier, four paths with a
    /// 3 dB/tap exponential profile. The default delay spread keeps every
    /// path inside the first delay bin of the default 4x2 grid at 15 kHz
    /// spacing, so the selectivity comes from Doppler: the per-bin
    /// matched-filter receivers are built for a multiplicative delay-Doppler
    /// channel, and paths in distinct bins would add cross-bin interference
    /// they do not model. Raise the spread to study exactly that breakdown.
    pub fn default_link(seed: u64) -> Self {
        MobilityProfile {
            speed_kmh: 500.0,
            carrier_hz: 4.0e9,
            paths: 4,
            pdp: PowerDelayProfile::Exponential { db_per_tap: 3.0 },
            delay_spread_s: 1.0e-5,
            seed,
        }
    }

    /// Maximum Doppler shift `f_c·v/c` implied by the profile.
    pub fn doppler_max_hz(&self) -> f64 {
        self.carrier_hz * (self.speed_kmh / 3.6) / SPEED_OF_LIGHT
    }
}

/// One standard-Gaussian pair via the Box-Muller transform.
pub(crate) fn gaussian_pair(rng: &mut impl Rng) -> (f64, f64) {
    // gen::<f64>() is in [0,1); flip to (0,1] so the log stays finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Draws a random channel realization: delays uniform on delay-bin grid
/// points (multiples of `T/M`) in `[0, delay_spread]`, per-path Doppler
/// `ν_max·cos(θ)` with θ uniform (Jakes angle model), and complex Gaussian
/// gains shaped by the power-delay profile then normalized so
/// `Σ|gain|² = 1` exactly.
///
/// Paths are resolvable at the delay-bin level: a bin-aligned delay moves a
/// modulated pulse to another lattice point instead of shearing it inside
/// its bin, which is the regime the matched-filter receivers are built for.
/// Doppler stays continuous — at lattice scale it shows up as the fractional
/// inter-bin leakage a high-mobility link actually has.
pub fn generate_taps(profile: &MobilityProfile, cfg: &OtfsConfig) -> Result<Vec<ChannelTap>> {
    if profile.paths == 0 {
        return Err(Error::config("path count must be at least 1"));
    }
    if !(profile.speed_kmh >= 0.0 && profile.speed_kmh.is_finite()) {
        return Err(Error::config("speed must be finite and non-negative"));
    }
    if !(profile.carrier_hz > 0.0 && profile.carrier_hz.is_finite()) {
        return Err(Error::config("carrier frequency must be positive"));
    }
    if !(profile.delay_spread_s >= 0.0 && profile.delay_spread_s.is_finite()) {
        return Err(Error::config("delay spread must be finite and non-negative"));
    }
    let nu_max = profile.doppler_max_hz();
    if nu_max >= 1.0 / cfg.symbol_s() {
        return Err(Error::config(format!(
            "maximum Doppler {nu_max:.1} Hz reaches 1/T = {:.1} Hz; underspread assumption broken",
            1.0 / cfg.symbol_s()
        )));
    }
    if profile.delay_spread_s >= 1.0 / cfg.delta_f_hz() {
        return Err(Error::config(format!(
            "delay spread {} s reaches 1/Δf = {} s; underspread assumption broken",
            profile.delay_spread_s,
            1.0 / cfg.delta_f_hz()
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(profile.seed);
    let max_delay_bins = (profile.delay_spread_s / cfg.delay_res_s() + 1e-9).floor() as usize;

    // Fixed draw order (delays, then angles, then gains) is part of the
    // determinism contract.
    let delays: Vec<f64> = (0..profile.paths)
        .map(|_| (rng.gen_range(0..=max_delay_bins) * cfg.sps()) as f64 * cfg.dt())
        .collect();
    let dopplers: Vec<f64> = (0..profile.paths)
        .map(|_| {
            let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            nu_max * theta.cos()
        })
        .collect();
    let mut gains: Vec<Complex64> = (0..profile.paths)
        .map(|p| {
            let (re, im) = gaussian_pair(&mut rng);
            let weight = match profile.pdp {
                PowerDelayProfile::Uniform => 1.0,
                PowerDelayProfile::Exponential { db_per_tap } => {
                    10f64.powf(-db_per_tap * p as f64 / 10.0)
                }
            };
            Complex64::new(re, im) * (weight / 2.0).sqrt()
        })
        .collect();
    let total: f64 = gains.iter().map(|g| g.norm_sqr()).sum();
    if total <= 0.0 {
        return Err(Error::numeric("all channel gains drew zero"));
    }
    let scale = total.sqrt().recip();
    for g in &mut gains {
        *g *= scale;
    }

    Ok((0..profile.paths)
        .map(|p| ChannelTap { gain: gains[p], delay_s: delays[p], doppler_hz: dopplers[p] })
        .collect())
}

/// Checks one tap against the configuration: sample-aligned delay inside
/// `[0, 1/Δf)` and Doppler magnitude below `1/T`.
fn validate_tap(tap: &ChannelTap, cfg: &OtfsConfig) -> Result<usize> {
    let samples = tap.delay_s / cfg.dt();
    let rounded = samples.round();
    if (samples - rounded).abs() > 1e-6 {
        return Err(Error::config(format!(
            "tap delay {} s is not aligned to the {} s sample grid",
            tap.delay_s,
            cfg.dt()
        )));
    }
    if rounded < 0.0 || tap.delay_s >= 1.0 / cfg.delta_f_hz() {
        return Err(Error::config(format!("tap delay {} s outside [0, 1/Δf)", tap.delay_s)));
    }
    if tap.doppler_hz.abs() >= 1.0 / cfg.symbol_s() {
        return Err(Error::config(format!(
            "tap Doppler {} Hz reaches 1/T",
            tap.doppler_hz
        )));
    }
    Ok(rounded as usize)
}

/// Applies the channel: `r(t) = Σ_p gain_p · s(t−τ_p) · e^{j2πν_p(t−τ_p)}`,
/// with delays wrapping cyclically over the frame.
pub fn apply_channel(s: &TimeSignal, taps: &[ChannelTap], cfg: &OtfsConfig) -> Result<TimeSignal> {
    crate::otfs::check_dt(s.dt, cfg, "channel input")?;
    let frame = cfg.frame_samples();
    if s.len() != frame {
        return Err(Error::config(format!(
            "channel input has {} samples, expected one {frame}-sample frame",
            s.len()
        )));
    }
    let mut r = TimeSignal::zeros(cfg);
    for tap in taps {
        let d = validate_tap(tap, cfg)?;
        // e^{j2pi*nu*(t_i - tau)} via a rotating phasor.
        let step = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * tap.doppler_hz * s.dt);
        let mut phase =
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * tap.doppler_hz * tap.delay_s);
        for i in 0..frame {
            let src = (i + frame - d) % frame;
            r.samples[i] += tap.gain * s.samples[src] * phase;
            phase *= step;
        }
    }
    Ok(r)
}

/// Adds circularly symmetric Gaussian noise calibrated so the noise density
/// is `N0 = es·10^(−esn0_db/10)`, where `es` is the average energy per
/// transmitted constellation symbol at the channel input. Each complex sample
/// gets variance `N0/dt`, split equally across real and imaginary parts, so a
/// unit-energy matched filter sees output variance exactly `N0`.
pub fn add_awgn(s: &TimeSignal, esn0_db: f64, es: f64, rng: &mut impl Rng) -> Result<TimeSignal> {
    if s.is_empty() {
        return Err(Error::config("cannot add noise to an empty signal"));
    }
    if !(es > 0.0 && es.is_finite()) {
        return Err(Error::config(format!("symbol energy must be positive, got {es}")));
    }
    let n0 = es * 10f64.powf(-esn0_db / 10.0);
    let sigma = (n0 / (2.0 * s.dt)).sqrt();
    let mut out = s.clone();
    for v in &mut out.samples {
        let (re, im) = gaussian_pair(rng);
        *v += Complex64::new(sigma * re, sigma * im);
    }
    Ok(out)
}

/// Formats taps as CSV for audit (`gain_re,gain_im,delay_s,doppler_hz`).
pub fn taps_to_csv(taps: &[ChannelTap]) -> String {
    let mut out = String::from("gain_re,gain_im,delay_s,doppler_hz\n");
    for tap in taps {
        out.push_str(&format!(
            "{},{},{},{}\n",
            tap.gain.re, tap.gain.im, tap.delay_s, tap.doppler_hz
        ));
    }
    out
}

/// Per-bin diagonal channel response seen by a receiver that transmits and
/// matched-filters with `train`: entry (m,n) is the inner product of the
/// channel-distorted basis waveform for bin (m,n) with the clean basis
/// waveform. Computed definitionally by passing each basis waveform through
/// the modulator, the channel, and the demodulator. Off-diagonal leakage
/// (inter-bin interference) is deliberately not modeled — detectors treat it
/// as noise.
pub fn per_bin_response(
    taps: &[ChannelTap],
    train: &Pulse,
    cfg: &OtfsConfig,
) -> Result<DDGrid> {
    let mut h = DDGrid::zeros(cfg.m(), cfg.n());
    for m in 0..cfg.m() {
        for n in 0..cfg.n() {
            let mut delta = DDGrid::zeros(cfg.m(), cfg.n());
            delta.set(m, n, Complex64::new(1.0, 0.0));
            let basis = dd_modulate(&delta, train, cfg)?;
            let warped = apply_channel(&basis, taps, cfg)?;
            let received = dd_demodulate(&warped, train, cfg)?;
            h.set(m, n, received.get(m, n));
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
