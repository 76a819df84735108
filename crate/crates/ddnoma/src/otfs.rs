//! Delay-Doppler modulation core: grid types, QAM mapping, the symplectic
//! finite Fourier transform pair, and the pulse-shaped modulators.
//!
//! Two modulator families are provided. `heisenberg`/`wigner_receive` work on
//! the time-frequency lattice (slot spacing `T`, subcarrier spacing `Δf`) and
//! suit pulses confined to a single slot. `dd_modulate`/`dd_demodulate` work
//! directly on the delay-Doppler lattice (delay spacing `T/M`, Doppler spacing
//! `1/(NT)`) and suit full-frame pulse trains, whose self-ambiguity is a delta
//! on exactly that lattice; the multiuser schemes are built on them.
//!
//! Frames are treated cyclically: every time shift is taken modulo the frame
//! length, which emulates a sufficient cyclic prefix.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pulse::Pulse;

/// Speed of light in m/s, used to convert mobile speed to Doppler shift.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Frame geometry: `m` delay bins by `n` Doppler bins, subcarrier spacing
/// `delta_f_hz`, and `sps` time samples per delay bin.
///
/// Derived quantities: symbol time `T = 1/Δf`, frame duration `NT`, bandwidth
/// `MΔf`, delay resolution `T/M`, Doppler resolution `1/(NT)`, and sample
/// interval `dt = T/(M·sps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OtfsConfig {
    m: usize,
    n: usize,
    delta_f_hz: f64,
    sps: usize,
}

impl OtfsConfig {
    pub fn new(m: usize, n: usize, delta_f_hz: f64, sps: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::config("grid dimensions must be at least 1"));
        }
        if !(delta_f_hz.is_finite() && delta_f_hz > 0.0) {
            return Err(Error::config(format!(
                "subcarrier spacing must be positive, got {delta_f_hz}"
            )));
        }
        if sps < 2 {
            return Err(Error::config(format!(
                "need at least 2 samples per delay bin, got {sps}"
            )));
        }
        Ok(OtfsConfig { m, n, delta_f_hz, sps })
    }

    /// Default link geometry: 4 delay bins, 2 Doppler bins, 15 kHz subcarrier
    /// spacing, 8 samples per delay bin.
    pub fn default_link() -> Self {
        OtfsConfig::new(4, 2, 15_000.0, 8).expect("default config is valid")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sps(&self) -> usize {
        self.sps
    }

    pub fn delta_f_hz(&self) -> f64 {
        self.delta_f_hz
    }

    /// Symbol (slot) duration `T = 1/Δf` in seconds.
    pub fn symbol_s(&self) -> f64 {
        1.0 / self.delta_f_hz
    }

    /// Frame duration `NT` in seconds.
    pub fn frame_s(&self) -> f64 {
        self.n as f64 * self.symbol_s()
    }

    /// Occupied bandwidth `MΔf` in Hz.
    pub fn bandwidth_hz(&self) -> f64 {
        self.m as f64 * self.delta_f_hz
    }

    /// Delay-bin width `T/M` seconds (also the delay resolution).
    pub fn delay_res_s(&self) -> f64 {
        self.symbol_s() / self.m as f64
    }

    /// Doppler-bin width `1/(NT)` Hz.
    pub fn doppler_res_hz(&self) -> f64 {
        1.0 / self.frame_s()
    }

    /// Sample interval `dt = T/(M·sps)` seconds.
    pub fn dt(&self) -> f64 {
        self.delay_res_s() / self.sps as f64
    }

    /// Samples per slot, `M·sps`.
    pub fn slot_samples(&self) -> usize {
        self.m * self.sps
    }

    /// Samples per frame, `N·M·sps`.
    pub fn frame_samples(&self) -> usize {
        self.n * self.m * self.sps
    }

    /// Number of delay-Doppler bins per frame, `M·N`.
    pub fn bins(&self) -> usize {
        self.m * self.n
    }
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

macro_rules! grid_type {
    ($(#[$meta:meta])* $name:ident, $rows_doc:expr, $cols_doc:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            rows: usize,
            cols: usize,
            data: Vec<Complex64>,
        }

        impl $name {
            pub fn zeros(rows: usize, cols: usize) -> Self {
                $name { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
            }

            /// Builds a grid from row-major data (row index varies slowest).
            pub fn from_data(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
                if data.len() != rows * cols {
                    return Err(Error::config(format!(
                        "grid data length {} does not match {}x{}",
                        data.len(), rows, cols
                    )));
                }
                Ok($name { rows, cols, data })
            }

            #[doc = $rows_doc]
            pub fn rows(&self) -> usize {
                self.rows
            }

            #[doc = $cols_doc]
            pub fn cols(&self) -> usize {
                self.cols
            }

            #[inline]
            pub fn get(&self, r: usize, c: usize) -> Complex64 {
                debug_assert!(r < self.rows && c < self.cols);
                self.data[r * self.cols + c]
            }

            #[inline]
            pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
                debug_assert!(r < self.rows && c < self.cols);
                self.data[r * self.cols + c] = v;
            }

            /// Row-major backing slice.
            pub fn as_slice(&self) -> &[Complex64] {
                &self.data
            }

            pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
                &mut self.data
            }

            /// Sum of squared magnitudes over all bins.
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|v| v.norm_sqr()).sum()
            }

            /// Largest entry-wise absolute difference against `other`.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                assert_eq!(self.rows, other.rows, "grid row mismatch");
                assert_eq!(self.cols, other.cols, "grid column mismatch");
                self.data
                    .iter()
                    .zip(&other.data)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            }
        }
    };
}

grid_type!(
    /// Delay-Doppler grid: `rows = M` delay bins, `cols = N` Doppler bins.
    DDGrid,
    "Number of delay bins (M).",
    "Number of Doppler bins (N)."
);

grid_type!(
    /// Time-frequency grid: `rows = M` subcarriers, `cols = N` time slots.
    TFGrid,
    "Number of subcarriers (M).",
    "Number of time slots (N)."
);

// ---------------------------------------------------------------------------
// Time signal
// ---------------------------------------------------------------------------

/// One frame of baseband samples taken at interval `dt`, starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
    pub dt: f64,
}

impl TimeSignal {
    pub fn zeros(cfg: &OtfsConfig) -> Self {
        TimeSignal {
            samples: vec![Complex64::new(0.0, 0.0); cfg.frame_samples()],
            dt: cfg.dt(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Signal energy `Σ|s[i]|²·dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn max_abs_diff(&self, other: &TimeSignal) -> f64 {
        assert_eq!(self.len(), other.len(), "signal length mismatch");
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Checks that a signal or pulse sample interval matches the config grid.
pub(crate) fn check_dt(dt: f64, cfg: &OtfsConfig, what: &str) -> Result<()> {
    let want = cfg.dt();
    if (dt - want).abs() > 1e-9 * want {
        return Err(Error::config(format!(
            "{what} sample interval {dt} does not match configuration dt {want}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// QAM
// ---------------------------------------------------------------------------

/// Gray-labelled square QAM constellation with unit average symbol energy.
///
/// For order 4 the labelling is: bits `b1 b0` select the point
/// `((1-2·b1) + j·(1-2·b0))/√2`, so `00 → (1+j)/√2` and geometric neighbours
/// differ in exactly one bit.
#[derive(Debug, Clone, PartialEq)]
pub struct QamConstellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
}

/// Binary-reflected Gray code of `n`.
fn gray_code(n: usize) -> usize {
    n ^ (n >> 1)
}

impl QamConstellation {
    /// Builds a square constellation. Supported orders: 4, 16, 64.
    pub fn new(order: usize) -> Result<Self> {
        let side = match order {
            4 => 2usize,
            16 => 4,
            64 => 8,
            _ => {
                return Err(Error::config(format!(
                    "unsupported QAM order {order} (expected 4, 16, or 64)"
                )))
            }
        };
        let bits_per_axis = side.trailing_zeros() as usize;
        let bits_per_symbol = 2 * bits_per_axis;

        // Position p along an axis carries label gray_code(p); invert so that
        // a bit-group value v selects the position whose Gray label equals v.
        let mut pos_for_label = vec![0usize; side];
        for p in 0..side {
            pos_for_label[gray_code(p)] = p;
        }

        let amp = |label: usize| -> f64 {
            let p = pos_for_label[label] as f64;
            (side as f64 - 1.0) - 2.0 * p
        };

        let mut points = Vec::with_capacity(order);
        for idx in 0..order {
            let label_i = idx >> bits_per_axis;
            let label_q = idx & (side - 1);
            points.push(Complex64::new(amp(label_i), amp(label_q)));
        }
        let mean_energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        let scale = mean_energy.sqrt().recip();
        for p in &mut points {
            *p *= scale;
        }
        Ok(QamConstellation { order, bits_per_symbol, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Packs a bit group (most significant bit first) into a symbol index.
    pub fn bits_to_index(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits_per_symbol {
            return Err(Error::config(format!(
                "expected {} bits per symbol, got {}",
                self.bits_per_symbol,
                bits.len()
            )));
        }
        let mut acc = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::config(format!("bits must be 0 or 1, got {b}")));
            }
            acc = (acc << 1) | b as usize;
        }
        Ok(acc)
    }

    /// Returns the bit label of `index` (most significant bit first).
    pub fn index_to_bits(&self, index: usize) -> Vec<u8> {
        (0..self.bits_per_symbol).rev().map(|shift| ((index >> shift) & 1) as u8).collect()
    }

    /// Maps a bit sequence to symbols. Length must be a multiple of
    /// `bits_per_symbol`.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(Error::config(format!(
                "bit count {} is not a multiple of {} bits per symbol",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        bits.chunks(self.bits_per_symbol)
            .map(|chunk| Ok(self.points[self.bits_to_index(chunk)?]))
            .collect()
    }

    /// Nearest-point decision; ties resolve to the lowest constellation index.
    pub fn demap_symbol(&self, y: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (idx, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = idx;
            }
        }
        best
    }

    /// Hard-demaps a symbol sequence back to bits.
    pub fn demap_symbols(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &y in symbols {
            let idx = self.demap_symbol(y);
            bits.extend(self.index_to_bits(idx));
        }
        bits
    }
}

// ---------------------------------------------------------------------------
// SFFT pair
// ---------------------------------------------------------------------------

/// Unit roots `e^{+j2π·r/len}` for `r = 0..len`.
pub(crate) fn unit_roots(len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|r| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r as f64 / len as f64))
        .collect()
}

/// Inverse symplectic finite Fourier transform:
/// `X_tf[l,k] = (1/√(NM)) · Σ_{n,m} X[m,n] · e^{j2π(nk/N − ml/M)}`.
pub fn isfft(x: &DDGrid) -> TFGrid {
    let (m_bins, n_bins) = (x.rows(), x.cols());
    let wn = unit_roots(n_bins);
    let wm = unit_roots(m_bins);
    let norm = 1.0 / ((m_bins * n_bins) as f64).sqrt();

    // Doppler -> slot axis first (positive exponent), then delay -> tone axis
    // (negative exponent), as separable one-dimensional transforms.
    let mut stage = vec![Complex64::new(0.0, 0.0); m_bins * n_bins];
    for m in 0..m_bins {
        for k in 0..n_bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..n_bins {
                acc += x.get(m, n) * wn[(n * k) % n_bins];
            }
            stage[m * n_bins + k] = acc;
        }
    }
    let mut out = TFGrid::zeros(m_bins, n_bins);
    for l in 0..m_bins {
        for k in 0..n_bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..m_bins {
                acc += stage[m * n_bins + k] * wm[(m * l) % m_bins].conj();
            }
            out.set(l, k, acc * norm);
        }
    }
    out
}

/// Symplectic finite Fourier transform (inverse of [`isfft`]):
/// `Y[m,n] = (1/√(NM)) · Σ_{k,l} Y_tf[l,k] · e^{−j2π(nk/N − ml/M)}`.
pub fn sfft(y_tf: &TFGrid) -> DDGrid {
    let (m_bins, n_bins) = (y_tf.rows(), y_tf.cols());
    let wn = unit_roots(n_bins);
    let wm = unit_roots(m_bins);
    let norm = 1.0 / ((m_bins * n_bins) as f64).sqrt();

    let mut stage = vec![Complex64::new(0.0, 0.0); m_bins * n_bins];
    for l in 0..m_bins {
        for n in 0..n_bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n_bins {
                acc += y_tf.get(l, k) * wn[(n * k) % n_bins].conj();
            }
            stage[l * n_bins + n] = acc;
        }
    }
    let mut out = DDGrid::zeros(m_bins, n_bins);
    for m in 0..m_bins {
        for n in 0..n_bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..m_bins {
                acc += stage[l * n_bins + n] * wm[(m * l) % m_bins];
            }
            out.set(m, n, acc * norm);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Time-frequency lattice modulator (Heisenberg / Wigner)
// ---------------------------------------------------------------------------

fn check_tf_args(grid_rows: usize, grid_cols: usize, g: &Pulse, cfg: &OtfsConfig) -> Result<()> {
    if grid_rows != cfg.m() || grid_cols != cfg.n() {
        return Err(Error::config(format!(
            "grid is {}x{} but configuration expects {}x{}",
            grid_rows,
            grid_cols,
            cfg.m(),
            cfg.n()
        )));
    }
    check_dt(g.dt, cfg, "pulse")?;
    if g.samples.len() > cfg.frame_samples() {
        return Err(Error::config(format!(
            "pulse support of {} samples exceeds the {}-sample frame",
            g.samples.len(),
            cfg.frame_samples()
        )));
    }
    Ok(())
}

/// Heisenberg transform on the time-frequency lattice:
/// `s(t) = Σ_{k,l} X_tf[l,k] · g_tx(t − kT) · e^{j2πlΔf(t − kT)}`,
/// with time shifts taken cyclically over the frame.
pub fn heisenberg(x_tf: &TFGrid, g_tx: &Pulse, cfg: &OtfsConfig) -> Result<TimeSignal> {
    check_tf_args(x_tf.rows(), x_tf.cols(), g_tx, cfg)?;
    let frame = cfg.frame_samples();
    let slot = cfg.slot_samples();
    let w = unit_roots(slot);

    // Per-slot tone synthesis V_k[r] = Σ_l X_tf[l,k]·e^{j2πlr/S}; the sample
    // index i contributes through r = (i − kS) mod frame, reduced mod S for
    // the subcarrier phase (Δf·T = 1 makes the phase slot-periodic).
    let mut tone = vec![Complex64::new(0.0, 0.0); cfg.n() * slot];
    for k in 0..cfg.n() {
        for r in 0..slot {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..cfg.m() {
                acc += x_tf.get(l, k) * w[(l * r) % slot];
            }
            tone[k * slot + r] = acc;
        }
    }

    let mut s = TimeSignal::zeros(cfg);
    for k in 0..cfg.n() {
        let shift = k * slot;
        for (r, &g) in g_tx.samples.iter().enumerate() {
            let i = (r + shift) % frame;
            s.samples[i] += g * tone[k * slot + r % slot];
        }
    }
    Ok(s)
}

/// Wigner/matched-filter receiver on the time-frequency lattice: the
/// cross-ambiguity of the received frame with `g_rx`, sampled at `(lΔf, kT)`:
/// `Y[l,k] = Σ_i r[i] · g_rx*(t_i − kT) · e^{−j2πlΔf(t_i − kT)} · dt`.
pub fn wigner_receive(r: &TimeSignal, g_rx: &Pulse, cfg: &OtfsConfig) -> Result<TFGrid> {
    check_tf_args(cfg.m(), cfg.n(), g_rx, cfg)?;
    check_dt(r.dt, cfg, "received signal")?;
    if r.len() != cfg.frame_samples() {
        return Err(Error::config(format!(
            "received signal has {} samples, expected one frame of {}",
            r.len(),
            cfg.frame_samples()
        )));
    }
    let frame = cfg.frame_samples();
    let slot = cfg.slot_samples();
    let w = unit_roots(slot);

    let mut out = TFGrid::zeros(cfg.m(), cfg.n());
    for k in 0..cfg.n() {
        let shift = k * slot;
        let mut acc = vec![Complex64::new(0.0, 0.0); cfg.m()];
        for (j, &g) in g_rx.samples.iter().enumerate() {
            let c = r.samples[(j + shift) % frame] * g.conj();
            let rj = j % slot;
            for (l, a) in acc.iter_mut().enumerate() {
                *a += c * w[(l * rj) % slot].conj();
            }
        }
        for l in 0..cfg.m() {
            out.set(l, k, acc[l] * r.dt);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Delay-Doppler lattice modulator (pulse trains)
// ---------------------------------------------------------------------------

fn check_dd_args(grid: &DDGrid, train: &Pulse, cfg: &OtfsConfig) -> Result<()> {
    if grid.rows() != cfg.m() || grid.cols() != cfg.n() {
        return Err(Error::config(format!(
            "grid is {}x{} but configuration expects {}x{}",
            grid.rows(),
            grid.cols(),
            cfg.m(),
            cfg.n()
        )));
    }
    check_dt(train.dt, cfg, "pulse train")?;
    if train.samples.len() > cfg.frame_samples() {
        return Err(Error::config(format!(
            "pulse train of {} samples exceeds the {}-sample frame",
            train.samples.len(),
            cfg.frame_samples()
        )));
    }
    Ok(())
}

/// Delay-Doppler lattice modulator:
/// `s(t) = Σ_{m,n} X[m,n] · u(t − m·T/M) · e^{j2π·n/(NT)·(t − m·T/M)}`,
/// with delay shifts taken cyclically over the frame. With a pulse train `u`
/// whose ambiguity is a delta on the `(T/M, 1/(NT))` lattice, the basis
/// functions are orthonormal and the map is unitary.
pub fn dd_modulate(x: &DDGrid, train: &Pulse, cfg: &OtfsConfig) -> Result<TimeSignal> {
    check_dd_args(x, train, cfg)?;
    let frame = cfg.frame_samples();
    let w = unit_roots(frame);

    // Doppler tone synthesis per delay bin: T_m[r] = Σ_n X[m,n]·e^{j2πnr/L},
    // where r = (i − m·sps) mod L.
    let mut s = TimeSignal::zeros(cfg);
    let mut tone = vec![Complex64::new(0.0, 0.0); frame];
    for m in 0..cfg.m() {
        let row_zero = (0..cfg.n()).all(|n| x.get(m, n) == Complex64::new(0.0, 0.0));
        if row_zero {
            continue;
        }
        for (r, t) in tone.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..cfg.n() {
                acc += x.get(m, n) * w[(n * r) % frame];
            }
            *t = acc;
        }
        let shift = m * cfg.sps();
        for (r, &u) in train.samples.iter().enumerate() {
            let i = (r + shift) % frame;
            s.samples[i] += u * tone[r];
        }
    }
    Ok(s)
}

/// Matched-filter receiver on the delay-Doppler lattice: correlates the frame
/// against every delay/Doppler shift of `u`:
/// `Y[m,n] = Σ_i r[i] · u*(t_i − m·T/M) · e^{−j2π·n/(NT)·(t_i − m·T/M)} · dt`.
pub fn dd_demodulate(r: &TimeSignal, train: &Pulse, cfg: &OtfsConfig) -> Result<DDGrid> {
    let probe = DDGrid::zeros(cfg.m(), cfg.n());
    check_dd_args(&probe, train, cfg)?;
    check_dt(r.dt, cfg, "received signal")?;
    if r.len() != cfg.frame_samples() {
        return Err(Error::config(format!(
            "received signal has {} samples, expected one frame of {}",
            r.len(),
            cfg.frame_samples()
        )));
    }
    let frame = cfg.frame_samples();
    let w = unit_roots(frame);

    let mut out = DDGrid::zeros(cfg.m(), cfg.n());
    for m in 0..cfg.m() {
        let shift = m * cfg.sps();
        let mut acc = vec![Complex64::new(0.0, 0.0); cfg.n()];
        for (j, &u) in train.samples.iter().enumerate() {
            let c = r.samples[(j + shift) % frame] * u.conj();
            for (n, a) in acc.iter_mut().enumerate() {
                *a += c * w[(n * j) % frame].conj();
            }
        }
        for n in 0..cfg.n() {
            out.set(m, n, acc[n] * r.dt);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{pulse_train, rect_pulse, rect_subpulse};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_dd(m: usize, n: usize, rng: &mut ChaCha12Rng) -> DDGrid {
        let data = (0..m * n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        DDGrid::from_data(m, n, data).unwrap()
    }

    fn random_tf(m: usize, n: usize, rng: &mut ChaCha12Rng) -> TFGrid {
        let data = (0..m * n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        TFGrid::from_data(m, n, data).unwrap()
    }

    /// Direct four-loop evaluation of the ISFFT definition, kept deliberately
    /// separate from the staged implementation.
    fn isfft_oracle(x: &DDGrid) -> TFGrid {
        let (mm, nn) = (x.rows(), x.cols());
        let norm = 1.0 / ((mm * nn) as f64).sqrt();
        let mut out = TFGrid::zeros(mm, nn);
        for l in 0..mm {
            for k in 0..nn {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..mm {
                    for n in 0..nn {
                        let theta = 2.0
                            * std::f64::consts::PI
                            * (n as f64 * k as f64 / nn as f64
                                - m as f64 * l as f64 / mm as f64);
                        acc += x.get(m, n) * Complex64::from_polar(1.0, theta);
                    }
                }
                out.set(l, k, acc * norm);
            }
        }
        out
    }

    #[test]
    fn test_config_rejects_bad_dimensions() {
        assert!(OtfsConfig::new(0, 2, 15e3, 8).is_err());
        assert!(OtfsConfig::new(4, 2, -1.0, 8).is_err());
        assert!(OtfsConfig::new(4, 2, 15e3, 1).is_err());
    }

    #[test]
    fn test_config_derived_quantities() {
        let cfg = OtfsConfig::new(4, 2, 15_000.0, 8).unwrap();
        let t = 1.0 / 15_000.0;
        assert!((cfg.symbol_s() - t).abs() < 1e-18);
        assert!((cfg.frame_s() - 2.0 * t).abs() < 1e-18);
        assert!((cfg.bandwidth_hz() - 60_000.0).abs() < 1e-9);
        assert!((cfg.delay_res_s() - t / 4.0).abs() < 1e-18);
        assert!((cfg.doppler_res_hz() - 1.0 / (2.0 * t)).abs() < 1e-9);
        assert_eq!(cfg.frame_samples(), 64);
        assert_eq!(cfg.slot_samples(), 32);
    }

    #[test]
    fn test_isfft_of_delta_is_flat() {
        // A unit impulse at delay-Doppler bin (0,0) spreads uniformly over the
        // 2x2 time-frequency grid with amplitude 1/sqrt(NM) = 1/2.
        let mut x = DDGrid::zeros(2, 2);
        x.set(0, 0, Complex64::new(1.0, 0.0));
        let tf = isfft(&x);
        for l in 0..2 {
            for k in 0..2 {
                assert!((tf.get(l, k) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
            }
        }
        // And the SFFT takes it back to the impulse.
        let back = sfft(&tf);
        assert!((back.get(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(back.get(1, 1).norm() < 1e-14);
    }

    #[test]
    fn test_isfft_matches_direct_sum_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &(m, n) in &[(2usize, 2usize), (4, 2), (8, 4), (5, 3)] {
            let x = random_dd(m, n, &mut rng);
            let fast = isfft(&x);
            let slow = isfft_oracle(&x);
            assert!(
                fast.max_abs_diff(&slow) < 1e-12,
                "isfft mismatch on {}x{}",
                m,
                n
            );
        }
    }

    #[test]
    fn test_sfft_isfft_roundtrip_and_parseval() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for trial in 0..100 {
            let (m, n) = ([2, 4, 8, 16][trial % 4], [2, 3, 4][trial % 3]);
            let x = random_dd(m, n, &mut rng);
            let tf = isfft(&x);
            let back = sfft(&tf);
            assert!(back.max_abs_diff(&x) < 1e-12, "roundtrip failed");
            let rel = (tf.energy() - x.energy()).abs() / x.energy();
            assert!(rel < 1e-10, "Parseval violated: rel err {rel}");
        }
    }

    #[test]
    fn test_transforms_are_linear() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let a = random_dd(4, 2, &mut rng);
        let b = random_dd(4, 2, &mut rng);
        let alpha = Complex64::new(0.7, -0.3);
        let mut combo = DDGrid::zeros(4, 2);
        for m in 0..4 {
            for n in 0..2 {
                combo.set(m, n, alpha * a.get(m, n) + b.get(m, n));
            }
        }
        let lhs = isfft(&combo);
        let ta = isfft(&a);
        let tb = isfft(&b);
        for l in 0..4 {
            for k in 0..2 {
                let rhs = alpha * ta.get(l, k) + tb.get(l, k);
                assert!((lhs.get(l, k) - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn test_qam4_mapping_and_gray_neighbours() {
        let qam = QamConstellation::new(4).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((qam.point(0) - Complex64::new(s, s)).norm() < 1e-15, "bits 00");
        assert!((qam.point(1) - Complex64::new(s, -s)).norm() < 1e-15, "bits 01");
        assert!((qam.point(2) - Complex64::new(-s, s)).norm() < 1e-15, "bits 10");
        assert!((qam.point(3) - Complex64::new(-s, -s)).norm() < 1e-15, "bits 11");

        // Geometric neighbours (same row or column of the 2x2 grid) must
        // differ in exactly one bit.
        for a in 0..4usize {
            for b in 0..4usize {
                let pa = qam.point(a);
                let pb = qam.point(b);
                let same_axis = (pa.re - pb.re).abs() < 1e-12 || (pa.im - pb.im).abs() < 1e-12;
                if a != b && same_axis {
                    assert_eq!((a ^ b).count_ones(), 1, "labels {a} and {b}");
                }
            }
        }
    }

    #[test]
    fn test_qam_unit_energy_all_orders() {
        for order in [4usize, 16, 64] {
            let qam = QamConstellation::new(order).unwrap();
            let mean = qam.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
            assert!((mean - 1.0).abs() < 1e-12, "order {order} mean energy {mean}");
        }
        assert!(QamConstellation::new(8).is_err(), "non-square order rejected");
    }

    #[test]
    fn test_qam_demap_nearest_and_roundtrip() {
        let qam = QamConstellation::new(4).unwrap();
        let idx = qam.demap_symbol(Complex64::new(0.9, 0.1));
        assert_eq!(idx, 0, "0.9+0.1j decides for (1+j)/sqrt(2)");

        // Equidistant point (origin) resolves to the lowest index.
        assert_eq!(qam.demap_symbol(Complex64::new(0.0, 0.0)), 0);

        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let bits: Vec<u8> = (0..200).map(|_| rng.gen_range(0..2u8)).collect();
        let symbols = qam.map_bits(&bits).unwrap();
        let back = qam.demap_symbols(&symbols);
        assert_eq!(bits, back, "noiseless map/demap roundtrip");
    }

    #[test]
    fn test_qam_rejects_bad_bit_lengths() {
        let qam = QamConstellation::new(4).unwrap();
        assert!(qam.map_bits(&[1u8]).is_err(), "odd bit count");
        assert!(qam.map_bits(&[2u8, 0]).is_err(), "non-binary digit");
    }

    #[test]
    fn test_heisenberg_rect_places_first_slot() {
        // xtf[0,0] = 1 with a unit-energy rectangle of duration T puts a
        // scaled rectangle in the first slot and nothing elsewhere.
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let mut x_tf = TFGrid::zeros(4, 2);
        x_tf.set(0, 0, Complex64::new(1.0, 0.0));
        let g = rect_pulse(&cfg);
        let s = heisenberg(&x_tf, &g, &cfg).unwrap();
        let amp = (1.0 / cfg.symbol_s()).sqrt();
        for i in 0..cfg.frame_samples() {
            let want = if i < cfg.slot_samples() {
                Complex64::new(amp, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((s.samples[i] - want).norm() < 1e-12, "sample {i}");
        }
    }

    /// Direct per-sample evaluation of the Heisenberg sum, including the
    /// cyclic wrap, with trigonometric phases.
    fn heisenberg_oracle(x_tf: &TFGrid, g: &Pulse, cfg: &OtfsConfig) -> TimeSignal {
        let frame = cfg.frame_samples();
        let slot = cfg.slot_samples();
        let mut s = TimeSignal::zeros(cfg);
        for i in 0..frame {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..cfg.n() {
                let r = (i + frame - (k * slot) % frame) % frame;
                if r >= g.samples.len() {
                    continue;
                }
                for l in 0..cfg.m() {
                    let theta = 2.0 * std::f64::consts::PI * l as f64 * r as f64 / slot as f64;
                    acc += x_tf.get(l, k) * g.samples[r] * Complex64::from_polar(1.0, theta);
                }
            }
            s.samples[i] = acc;
        }
        s
    }

    #[test]
    fn test_heisenberg_matches_direct_sum() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let x_tf = random_tf(4, 2, &mut rng);
        let g = rect_pulse(&cfg);
        let fast = heisenberg(&x_tf, &g, &cfg).unwrap();
        let slow = heisenberg_oracle(&x_tf, &g, &cfg);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn test_wigner_of_own_pulse_is_one_at_origin() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let g = rect_pulse(&cfg);
        let mut r = TimeSignal::zeros(&cfg);
        for (i, &v) in g.samples.iter().enumerate() {
            r.samples[i] = v;
        }
        let y = wigner_receive(&r, &g, &cfg).unwrap();
        assert!((y.get(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn test_rect_loopback_is_identity() {
        // Matched rectangular transmit/receive pulses make the slot/tone
        // chain exactly invertible on the sample grid.
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let x_tf = random_tf(4, 2, &mut rng);
        let g = rect_pulse(&cfg);
        let s = heisenberg(&x_tf, &g, &cfg).unwrap();
        let back = wigner_receive(&s, &g, &cfg).unwrap();
        assert!(back.max_abs_diff(&x_tf) < 1e-12, "rect loopback floor");
    }

    /// Direct per-sample evaluation of the delay-Doppler modulator.
    fn dd_modulate_oracle(x: &DDGrid, u: &Pulse, cfg: &OtfsConfig) -> TimeSignal {
        let frame = cfg.frame_samples();
        let mut s = TimeSignal::zeros(cfg);
        for i in 0..frame {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..cfg.m() {
                let r = (i + frame - (m * cfg.sps()) % frame) % frame;
                if r >= u.samples.len() {
                    continue;
                }
                for n in 0..cfg.n() {
                    let theta = 2.0 * std::f64::consts::PI * n as f64 * r as f64 / frame as f64;
                    acc += x.get(m, n) * u.samples[r] * Complex64::from_polar(1.0, theta);
                }
            }
            s.samples[i] = acc;
        }
        s
    }

    #[test]
    fn test_dd_modulate_matches_direct_sum() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let x = random_dd(4, 2, &mut rng);
        let sub = rect_subpulse(&cfg);
        let train = pulse_train(&sub, &cfg).unwrap();
        let fast = dd_modulate(&x, &train, &cfg).unwrap();
        let slow = dd_modulate_oracle(&x, &train, &cfg);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn test_dd_loopback_with_bin_confined_train_is_identity() {
        // A train of bin-confined subpulses gives an orthonormal basis, so
        // modulate -> demodulate is the identity to machine precision.
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let x = random_dd(4, 2, &mut rng);
        let sub = rect_subpulse(&cfg);
        let train = pulse_train(&sub, &cfg).unwrap();
        let s = dd_modulate(&x, &train, &cfg).unwrap();
        let back = dd_demodulate(&s, &train, &cfg).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12, "dd loopback floor");
    }

    #[test]
    fn test_modulators_reject_mismatched_inputs() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let other = OtfsConfig::new(4, 2, 30e3, 8).unwrap();
        let g_wrong = rect_pulse(&other);
        let x_tf = TFGrid::zeros(4, 2);
        assert!(heisenberg(&x_tf, &g_wrong, &cfg).is_err(), "dt mismatch");

        let x_bad = TFGrid::zeros(2, 2);
        let g = rect_pulse(&cfg);
        assert!(heisenberg(&x_bad, &g, &cfg).is_err(), "grid mismatch");

        let short = TimeSignal { samples: vec![Complex64::new(0.0, 0.0); 3], dt: cfg.dt() };
        assert!(wigner_receive(&short, &g, &cfg).is_err(), "length mismatch");
    }
}
