//! Multi-user multiplexing onto one delay-Doppler frame.
//!
//! Three front-ends share the OTFS chain:
//!
//! - power-domain superposition: users share every bin at different powers;
//! - sparse-code spreading: each data symbol rides a sparse signature across
//!   a group of K bins, with controlled collisions between users;
//! - pulse-division: every user occupies every bin, separated by mutually
//!   orthogonal pulse trains built from distinct Hermite orders.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::otfs::{dd_modulate, DDGrid, OtfsConfig, QamConstellation, TimeSignal};
use crate::pulse::{orthonormal_hermite_set, pulse_train, Pulse, ScalePolicy};

/// Which multi-user front-end a simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Power-domain superposition, successive interference cancellation.
    Pdm,
    /// Sparse-code spreading, message-passing detection.
    Scma,
    /// Hermite pulse-division, matched-filter separation.
    Hermite,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Pdm => "pdm",
            Scheme::Scma => "scma",
            Scheme::Hermite => "hermite",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pdm" => Ok(Scheme::Pdm),
            "scma" => Ok(Scheme::Scma),
            "hermite" => Ok(Scheme::Hermite),
            other => Err(Error::config(format!(
                "unknown scheme '{other}' (expected pdm, scma, or hermite)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Power-domain superposition
// ---------------------------------------------------------------------------

/// Default power split: weights proportional to 4^(-j) in user order,
/// normalized to sum exactly 1. Two users get (0.8, 0.2); each further user
/// sits another ~6 dB down, which keeps every SIC stage's decision margin
/// comparable.
pub fn pdm_weights(users: usize) -> Vec<f64> {
    assert!(users >= 1, "need at least one user");
    let raw: Vec<f64> = (0..users).map(|j| 4f64.powi(-(j as i32))).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Superimposes per-user grids bin-wise: `out[m,n] = Σ_j √(w_j)·grid_j[m,n]`.
pub fn superimpose_pdm(user_grids: &[DDGrid], weights: &[f64]) -> Result<DDGrid> {
    if user_grids.is_empty() {
        return Err(Error::config("need at least one user grid"));
    }
    if user_grids.len() != weights.len() {
        return Err(Error::config(format!(
            "{} grids but {} weights",
            user_grids.len(),
            weights.len()
        )));
    }
    let (rows, cols) = (user_grids[0].rows(), user_grids[0].cols());
    for g in user_grids {
        if g.rows() != rows || g.cols() != cols {
            return Err(Error::config("user grids must share dimensions"));
        }
    }
    for &w in weights {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::config(format!("power weights must be positive, got {w}")));
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("power weights must sum to 1, got {total}")));
    }
    let mut out = DDGrid::zeros(rows, cols);
    for (g, &w) in user_grids.iter().zip(weights) {
        let amp = w.sqrt();
        for (o, v) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *o += amp * v;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sparse-code spreading
// ---------------------------------------------------------------------------

/// One user's low-density-spreading codebook: a sparse signature sequence
/// (K entries, d_v of them nonzero) scaled by each point of an M-ary
/// constellation. The codeword matrix is rank one by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LdsCodebook {
    sequence: Vec<Complex64>,
    constellation: Vec<Complex64>,
    /// codewords[symbol][resource]
    codewords: Vec<Vec<Complex64>>,
}

impl LdsCodebook {
    fn new(sequence: Vec<Complex64>, constellation: Vec<Complex64>) -> Self {
        let codewords = constellation
            .iter()
            .map(|beta| sequence.iter().map(|s| s * beta).collect())
            .collect();
        LdsCodebook { sequence, constellation, codewords }
    }

    pub fn sequence(&self) -> &[Complex64] {
        &self.sequence
    }

    pub fn constellation(&self) -> &[Complex64] {
        &self.constellation
    }

    /// Codeword for constellation index `symbol`, one entry per resource.
    pub fn codeword(&self, symbol: usize) -> &[Complex64] {
        &self.codewords[symbol]
    }

    /// Resource indices this user occupies.
    pub fn support(&self) -> Vec<usize> {
        self.sequence
            .iter()
            .enumerate()
            .filter(|(_, s)| s.norm_sqr() > 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

/// The full multi-user sparse codebook: K resources, J users, fixed collision
/// structure (d_v resources per user, d_f users per resource).
#[derive(Debug, Clone, PartialEq)]
pub struct ScmaCodebook {
    k: usize,
    d_v: usize,
    d_f: usize,
    users: Vec<LdsCodebook>,
}

const DEFAULT_CODEBOOK: &str = include_str!("../data/scma_k4_j6.txt");

impl ScmaCodebook {
    /// Parses the plain-text signature-matrix format: a `#` header carrying
    /// `k= j= dv= df= m=`, further `#` comment lines, then K rows of J
    /// whitespace-separated `re,im` entries (users as columns).
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, usize, usize, usize)> = None;
        let mut rows: Vec<Vec<Complex64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if header.is_none() && comment.contains("k=") {
                    header = Some(Self::parse_header(comment, lineno + 1)?);
                }
                continue;
            }
            let mut row = Vec::new();
            for token in line.split_whitespace() {
                let (re, im) = token.split_once(',').ok_or_else(|| {
                    Error::config(format!("line {}: entry '{token}' is not re,im", lineno + 1))
                })?;
                let re: f64 = re.parse().map_err(|_| {
                    Error::config(format!("line {}: bad real part '{re}'", lineno + 1))
                })?;
                let im: f64 = im.parse().map_err(|_| {
                    Error::config(format!("line {}: bad imaginary part '{im}'", lineno + 1))
                })?;
                if !(re.is_finite() && im.is_finite()) {
                    return Err(Error::config(format!("line {}: non-finite entry", lineno + 1)));
                }
                row.push(Complex64::new(re, im));
            }
            rows.push(row);
        }
        let (k, j, d_v, d_f, m) =
            header.ok_or_else(|| Error::config("missing '# ... k= j= dv= df= m=' header"))?;
        if rows.len() != k {
            return Err(Error::config(format!("expected {k} resource rows, found {}", rows.len())));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != j {
                return Err(Error::config(format!(
                    "resource row {} has {} entries, expected {j}",
                    r + 1,
                    row.len()
                )));
            }
            let occupancy = row.iter().filter(|v| v.norm_sqr() > 0.0).count();
            if occupancy != d_f {
                return Err(Error::config(format!(
                    "resource row {} carries {occupancy} users, expected df={d_f}",
                    r + 1
                )));
            }
        }
        let constellation = QamConstellation::new(m)?.points().to_vec();
        let mut users = Vec::with_capacity(j);
        for col in 0..j {
            let sequence: Vec<Complex64> = rows.iter().map(|row| row[col]).collect();
            let support = sequence.iter().filter(|v| v.norm_sqr() > 0.0).count();
            if support != d_v {
                return Err(Error::config(format!(
                    "user column {} occupies {support} resources, expected dv={d_v}",
                    col + 1
                )));
            }
            let norm: f64 = sequence.iter().map(|v| v.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "user column {} has signature norm {norm}, expected 1",
                    col + 1
                )));
            }
            users.push(LdsCodebook::new(sequence, constellation.clone()));
        }
        Ok(ScmaCodebook { k, d_v, d_f, users })
    }

    fn parse_header(comment: &str, lineno: usize) -> Result<(usize, usize, usize, usize, usize)> {
        let mut k = None;
        let mut j = None;
        let mut d_v = None;
        let mut d_f = None;
        let mut m = None;
        for token in comment.split_whitespace() {
            let Some((key, value)) = token.split_once('=') else { continue };
            let value: usize = value
                .parse()
                .map_err(|_| Error::config(format!("line {lineno}: bad header value '{token}'")))?;
            match key {
                "k" => k = Some(value),
                "j" => j = Some(value),
                "dv" => d_v = Some(value),
                "df" => d_f = Some(value),
                "m" => m = Some(value),
                _ => {}
            }
        }
        match (k, j, d_v, d_f, m) {
            (Some(k), Some(j), Some(d_v), Some(d_f), Some(m)) => Ok((k, j, d_v, d_f, m)),
            _ => Err(Error::config(format!(
                "line {lineno}: header must define k=, j=, dv=, df=, m="
            ))),
        }
    }

    /// The codebook shipped with the crate: K=4 resources, J=6 users, d_v=2,
    /// d_f=3, 4-point constellation.
    pub fn default_k4_j6() -> Self {
        Self::parse(DEFAULT_CODEBOOK).expect("shipped codebook must parse")
    }

    /// Restricts the codebook to its first `users` columns (partial load).
    /// d_f is recomputed from the surviving collision structure.
    pub fn active(&self, users: usize) -> Result<Self> {
        if users == 0 || users > self.users.len() {
            return Err(Error::config(format!(
                "requested {users} active users of {} available",
                self.users.len()
            )));
        }
        let kept: Vec<LdsCodebook> = self.users[..users].to_vec();
        let d_f = (0..self.k)
            .map(|r| kept.iter().filter(|u| u.sequence[r].norm_sqr() > 0.0).count())
            .max()
            .unwrap_or(0);
        Ok(ScmaCodebook { k: self.k, d_v: self.d_v, d_f, users: kept })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn users(&self) -> usize {
        self.users.len()
    }

    pub fn d_v(&self) -> usize {
        self.d_v
    }

    /// Largest number of users colliding on any one resource.
    pub fn d_f(&self) -> usize {
        self.d_f
    }

    pub fn user(&self, j: usize) -> &LdsCodebook {
        &self.users[j]
    }

    /// Constellation size M shared by all users.
    pub fn order(&self) -> usize {
        self.users[0].constellation.len()
    }

    /// Bits per codeword (log2 of the constellation size).
    pub fn bits_per_codeword(&self) -> usize {
        self.order().trailing_zeros() as usize
    }

    /// Users sharing resource `r`, in user order.
    pub fn users_on_resource(&self, r: usize) -> Vec<usize> {
        (0..self.users.len())
            .filter(|&j| self.users[j].sequence[r].norm_sqr() > 0.0)
            .collect()
    }
}

/// Converts `bits` (MSB first) to a codeword index.
fn bits_to_index(bits: &[u8]) -> Result<usize> {
    let mut idx = 0usize;
    for &b in bits {
        if b > 1 {
            return Err(Error::config(format!("bits must be 0 or 1, got {b}")));
        }
        idx = (idx << 1) | b as usize;
    }
    Ok(idx)
}

/// Spreads every user's bits over the frame: the grid is split into
/// `M·N / K` groups of K consecutive bins (delay-major order: bin index
/// `m·N + n`), and each group carries the superposition of one codeword per
/// user.
pub fn scma_encode(
    per_user_bits: &[Vec<u8>],
    codebook: &ScmaCodebook,
    cfg: &OtfsConfig,
) -> Result<DDGrid> {
    if per_user_bits.len() != codebook.users() {
        return Err(Error::config(format!(
            "{} bit streams for a {}-user codebook",
            per_user_bits.len(),
            codebook.users()
        )));
    }
    let bins = cfg.bins();
    let k = codebook.k();
    if bins % k != 0 {
        return Err(Error::config(format!(
            "grid capacity {bins} is not divisible by the {k}-resource group size"
        )));
    }
    let groups = bins / k;
    let bpc = codebook.bits_per_codeword();
    for (j, bits) in per_user_bits.iter().enumerate() {
        if bits.len() != groups * bpc {
            return Err(Error::config(format!(
                "user {j} has {} bits, expected {} ({} groups x {} bits)",
                bits.len(),
                groups * bpc,
                groups,
                bpc
            )));
        }
    }
    let mut flat = vec![Complex64::new(0.0, 0.0); bins];
    for g in 0..groups {
        for (j, bits) in per_user_bits.iter().enumerate() {
            let idx = bits_to_index(&bits[g * bpc..(g + 1) * bpc])?;
            let codeword = codebook.user(j).codeword(idx);
            for (r, &value) in codeword.iter().enumerate() {
                flat[g * k + r] += value;
            }
        }
    }
    // Delay-major flattening: bin index = m·N + n.
    let mut grid = DDGrid::zeros(cfg.m(), cfg.n());
    for (idx, value) in flat.into_iter().enumerate() {
        grid.set(idx / cfg.n(), idx % cfg.n(), value);
    }
    Ok(grid)
}

// ---------------------------------------------------------------------------
// Hermite pulse-division
// ---------------------------------------------------------------------------

/// Builds one unit-energy pulse train per order from the orthonormalized
/// truncated-Hermite set (shared dilation policy across the set).
pub fn hermite_trains(orders: &[usize], cfg: &OtfsConfig) -> Result<Vec<Pulse>> {
    let policy = ScalePolicy::for_orders(orders);
    let set = orthonormal_hermite_set(orders, cfg, &policy)?;
    set.iter().map(|p| pulse_train(p, cfg)).collect()
}

/// Transmits all users at once: each user's grid modulates that user's
/// orthogonalized Hermite pulse train, and the waveforms add. Every user
/// occupies every delay-Doppler bin simultaneously.
pub fn hermite_tx(
    user_grids: &[DDGrid],
    orders: &[usize],
    cfg: &OtfsConfig,
) -> Result<TimeSignal> {
    if user_grids.len() != orders.len() {
        return Err(Error::config(format!(
            "{} grids for {} Hermite orders",
            user_grids.len(),
            orders.len()
        )));
    }
    let trains = hermite_trains(orders, cfg)?;
    let mut out = TimeSignal::zeros(cfg);
    for (grid, train) in user_grids.iter().zip(&trains) {
        let s = dd_modulate(grid, train, cfg)?;
        for (o, v) in out.samples.iter_mut().zip(&s.samples) {
            *o += v;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Spectral efficiency
// ---------------------------------------------------------------------------

/// Spectral efficiency in bits per delay-Doppler bin per frame. Power-domain
/// and pulse-division users each place one constellation symbol in every bin;
/// sparse-code users place one symbol per K-bin group, giving up a factor K.
pub fn spectral_efficiency(scheme: Scheme, qam_order: usize, users: usize, k: usize) -> f64 {
    assert!(users >= 1, "need at least one user");
    assert!(k >= 1, "group size must be at least 1");
    assert!(
        qam_order.is_power_of_two() && qam_order >= 2,
        "constellation order must be a power of two"
    );
    let bits = (qam_order.trailing_zeros() as usize * users) as f64;
    match scheme {
        Scheme::Pdm | Scheme::Hermite => bits,
        Scheme::Scma => bits / k as f64,
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
