//! Pulse shapes and their ambiguity analysis.
//!
//! Provides root-raised-cosine and truncated-Hermite subpulses, the pulse
//! trains built from them (one subpulse copy per slot), Gram–Schmidt
//! re-orthonormalization of truncated Hermite sets, and the cross-ambiguity
//! surface sampled on the delay-Doppler lattice.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::otfs::OtfsConfig;

/// Highest Hermite order the generators accept.
pub const MAX_HERMITE_ORDER: usize = 12;

// ---------------------------------------------------------------------------
// Pulse type
// ---------------------------------------------------------------------------

/// A sampled pulse starting at t = 0 with sample interval `dt`. Generators in
/// this module always produce unit-energy pulses (`Σ|a[i]|²·dt = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub samples: Vec<Complex64>,
    pub dt: f64,
    /// Human-readable tag describing family and parameters.
    pub label: String,
}

impl Pulse {
    /// Wraps samples and rescales them to unit energy.
    pub fn unit_energy(samples: Vec<Complex64>, dt: f64, label: impl Into<String>) -> Result<Self> {
        let raw: f64 = samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * dt;
        if !(raw.is_finite() && raw > 1e-300) {
            return Err(Error::numeric("cannot normalize a zero-energy pulse"));
        }
        let scale = raw.sqrt().recip();
        let samples = samples.into_iter().map(|v| v * scale).collect();
        Ok(Pulse { samples, dt, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Pulse energy `Σ|a[i]|²·dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dt
    }

    /// Support length in seconds (samples × dt).
    pub fn support_s(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

/// Discrete inner product `Σ a[i]·b*[i]·dt` over the common length.
fn inner(a: &[Complex64], b: &[Complex64], dt: f64) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() * dt
}

// ---------------------------------------------------------------------------
// Rectangular pulses
// ---------------------------------------------------------------------------

/// Unit-energy rectangle spanning one slot (duration `T`).
pub fn rect_pulse(cfg: &OtfsConfig) -> Pulse {
    let v = Complex64::new(1.0, 0.0);
    Pulse::unit_energy(vec![v; cfg.slot_samples()], cfg.dt(), "rect(T)")
        .expect("rectangle has positive energy")
}

/// Unit-energy rectangle spanning one delay bin (duration `T/M`).
pub fn rect_subpulse(cfg: &OtfsConfig) -> Pulse {
    let v = Complex64::new(1.0, 0.0);
    Pulse::unit_energy(vec![v; cfg.sps()], cfg.dt(), "rect(T/M)")
        .expect("rectangle has positive energy")
}

// ---------------------------------------------------------------------------
// Root-raised cosine
// ---------------------------------------------------------------------------

/// Root-raised-cosine waveform with roll-off `beta` at time `x`, measured in
/// units of the zero-ISI interval. Handles the removable singularities at
/// `x = 0` and `|x| = 1/(4β)` by their analytic limits; `beta = 0` reduces to
/// the sinc pulse.
pub fn rrc_waveform(beta: f64, x: f64) -> f64 {
    use std::f64::consts::PI;
    assert!((0.0..=1.0).contains(&beta), "roll-off must lie in [0,1], got {beta}");
    if beta == 0.0 {
        return if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
    }
    if x.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let q = 4.0 * beta * x.abs();
    if (q - 1.0).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2.0f64.sqrt()
            * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    ((PI * x * (1.0 - beta)).sin() + 4.0 * beta * x * (PI * x * (1.0 + beta)).cos())
        / (PI * x * (1.0 - q * q))
}

/// Root-raised-cosine subpulse with zero-ISI interval `T/M`, truncated to
/// `span` such intervals centred on its peak and rescaled to unit energy.
///
/// Truncation is done by periodic folding rather than hard windowing: the
/// ideal pulse's tails are aliased back into the window at period `span`.
/// Folding preserves the Nyquist-null structure that hard truncation destroys
/// — the folded pulse's periodic autocorrelation at non-zero multiples of
/// `T/M` is a sum of ideal-pulse nulls — so short spans (down to `span = M`,
/// the largest that fits one slot) still give a clean delta-like ambiguity on
/// the delay-Doppler lattice.
pub fn rrc_subpulse(beta: f64, span: usize, cfg: &OtfsConfig) -> Result<Pulse> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config(format!("roll-off must lie in [0,1], got {beta}")));
    }
    if span < 4 {
        return Err(Error::config(format!("span must be at least 4 zero-ISI intervals, got {span}")));
    }
    // Fold enough copies that the discarded tails sit beyond ~64 zero-ISI
    // intervals, where the pulse has decayed to ~1e-4 of its peak.
    let folds = (64 + span - 1) / span;
    let len = span * cfg.sps();
    let half = span as f64 / 2.0;
    let samples = (0..len)
        .map(|q| {
            let x = q as f64 / cfg.sps() as f64 - half;
            let mut v = 0.0;
            for k in -(folds as i64)..=(folds as i64) {
                v += rrc_waveform(beta, x + (k * span as i64) as f64);
            }
            Complex64::new(v, 0.0)
        })
        .collect();
    Pulse::unit_energy(samples, cfg.dt(), format!("rrc(beta={beta},span={span})"))
}

// ---------------------------------------------------------------------------
// Hermite functions
// ---------------------------------------------------------------------------

/// Physicists' Hermite polynomial `H_k(t)` via the three-term recurrence
/// `H_{k+1} = 2t·H_k − 2k·H_{k−1}`.
pub fn hermite_poly(k: usize, t: f64) -> f64 {
    assert!(k <= MAX_HERMITE_ORDER, "Hermite order {k} exceeds supported maximum {MAX_HERMITE_ORDER}");
    let mut prev = 1.0; // H_0
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * t; // H_1
    for j in 1..k {
        let next = 2.0 * t * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Exact factorials up to `MAX_HERMITE_ORDER` (12! still fits f64 exactly).
const FACTORIAL: [f64; 13] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
];

/// Orthonormal Hermite function `h_k(t) = H_k(t)·e^{−t²/2} / √(2^k·k!·√π)`.
/// The normalization is evaluated in the log domain to sidestep factorial
/// growth before it is combined with the Gaussian envelope.
pub fn hermite_fn(k: usize, t: f64) -> f64 {
    assert!(k <= MAX_HERMITE_ORDER, "Hermite order {k} exceeds supported maximum {MAX_HERMITE_ORDER}");
    let ln_norm = -0.5
        * (k as f64 * std::f64::consts::LN_2
            + FACTORIAL[k].ln()
            + 0.5 * std::f64::consts::PI.ln());
    hermite_poly(k, t) * (ln_norm - 0.5 * t * t).exp()
}

/// Dilation policy for mapping a Hermite function onto one delay bin: the bin
/// `[0, T/M]` is made to span `±width_factor` natural widths `√(2·max_order+1)`
/// of the highest order in use, so every pulse in a set shares one dilation
/// and the truncated tails stay negligible.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePolicy {
    pub width_factor: f64,
    pub max_order: usize,
}

impl ScalePolicy {
    pub const DEFAULT_WIDTH_FACTOR: f64 = 3.2;

    /// Policy sized for a single order.
    pub fn single(order: usize) -> Self {
        ScalePolicy { width_factor: Self::DEFAULT_WIDTH_FACTOR, max_order: order }
    }

    /// Shared policy for a set of orders (sized for the largest).
    pub fn for_orders(orders: &[usize]) -> Self {
        ScalePolicy {
            width_factor: Self::DEFAULT_WIDTH_FACTOR,
            max_order: orders.iter().copied().max().unwrap_or(0),
        }
    }

    /// Half-width of the natural-coordinate window.
    pub fn half_width(&self) -> f64 {
        self.width_factor * (2.0 * self.max_order as f64 + 1.0).sqrt()
    }
}

/// Order-`k` Hermite function truncated to one delay bin `[0, T/M]` (zero
/// outside), dilated per `policy`, sampled on the configuration grid, and
/// rescaled to unit energy.
pub fn hermite_subpulse(k: usize, cfg: &OtfsConfig, policy: &ScalePolicy) -> Result<Pulse> {
    if k > MAX_HERMITE_ORDER {
        return Err(Error::config(format!(
            "unknown Hermite order {k} (supported range is 0..={MAX_HERMITE_ORDER})"
        )));
    }
    if policy.max_order > MAX_HERMITE_ORDER || policy.max_order < k {
        return Err(Error::config(format!(
            "scale policy max_order {} cannot host order {k}",
            policy.max_order
        )));
    }
    if !(policy.width_factor.is_finite() && policy.width_factor > 0.0) {
        return Err(Error::config("scale policy width factor must be positive"));
    }
    let bin = cfg.delay_res_s();
    let c = policy.half_width();
    let samples: Vec<Complex64> = (0..cfg.sps())
        .map(|q| {
            let t = q as f64 * cfg.dt();
            let x = (t - bin / 2.0) * (2.0 * c / bin);
            Complex64::new(hermite_fn(k, x), 0.0)
        })
        .collect();
    Pulse::unit_energy(samples, cfg.dt(), format!("hermite(k={k},c={c:.2})"))
}

/// Builds the truncated Hermite subpulses for `orders` under a shared dilation
/// and re-orthonormalizes them with (twice-applied) modified Gram–Schmidt, so
/// the sampled Gram matrix is the identity to machine precision. Results match
/// the input order of `orders`; the projection sweep runs in ascending order
/// so low orders keep their shape.
pub fn orthonormal_hermite_set(
    orders: &[usize],
    cfg: &OtfsConfig,
    policy: &ScalePolicy,
) -> Result<Vec<Pulse>> {
    if orders.is_empty() {
        return Err(Error::config("need at least one Hermite order"));
    }
    let mut seen = vec![false; MAX_HERMITE_ORDER + 1];
    for &k in orders {
        if k > MAX_HERMITE_ORDER {
            return Err(Error::config(format!(
                "unknown Hermite order {k} (supported range is 0..={MAX_HERMITE_ORDER})"
            )));
        }
        if seen[k] {
            return Err(Error::config(format!("duplicate Hermite order {k}")));
        }
        seen[k] = true;
    }
    if orders.len() > cfg.sps() {
        return Err(Error::config(format!(
            "{} orders exceed the {} samples per delay bin; orthogonalization is impossible",
            orders.len(),
            cfg.sps()
        )));
    }

    let mut ascending: Vec<usize> = orders.to_vec();
    ascending.sort_unstable();

    let dt = cfg.dt();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(ascending.len());
    for &k in &ascending {
        let p = hermite_subpulse(k, cfg, policy)?;
        basis.push(p.samples);
    }

    // Modified Gram-Schmidt, applied twice for numerical orthogonality.
    for _pass in 0..2 {
        for j in 0..basis.len() {
            for i in 0..j {
                let (head, tail) = basis.split_at_mut(j);
                let proj = inner(&tail[0], &head[i], dt);
                for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                    *t -= proj * h;
                }
            }
            let norm = inner(&basis[j], &basis[j], dt).re.sqrt();
            if !(norm.is_finite() && norm > 1e-7) {
                return Err(Error::numeric(format!(
                    "Hermite order {} is numerically dependent on lower orders at {} samples per bin",
                    ascending[j],
                    cfg.sps()
                )));
            }
            let scale = norm.recip();
            for v in &mut basis[j] {
                *v *= scale;
            }
        }
    }

    let c = policy.half_width();
    let mut out = Vec::with_capacity(orders.len());
    for &k in orders {
        let pos = ascending.iter().position(|&a| a == k).expect("order present");
        out.push(Pulse {
            samples: basis[pos].clone(),
            dt,
            label: format!("hermite-gs(k={k},c={c:.2})"),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pulse trains
// ---------------------------------------------------------------------------

/// Pulse train `u(t) = Σ_{n=0}^{N−1} a(t − nT)`, one subpulse copy per slot,
/// rescaled to unit energy over the frame. The subpulse must fit inside one
/// slot so the copies do not overlap.
pub fn pulse_train(subpulse: &Pulse, cfg: &OtfsConfig) -> Result<Pulse> {
    if (subpulse.dt - cfg.dt()).abs() > 1e-9 * cfg.dt() {
        return Err(Error::config(format!(
            "subpulse sample interval {} does not match configuration dt {}",
            subpulse.dt,
            cfg.dt()
        )));
    }
    let slot = cfg.slot_samples();
    if subpulse.len() > slot {
        return Err(Error::config(format!(
            "subpulse support of {} samples exceeds the {slot}-sample slot",
            subpulse.len()
        )));
    }
    let frame = cfg.frame_samples();
    let mut samples = vec![Complex64::new(0.0, 0.0); frame];
    for block in 0..cfg.n() {
        for (r, &a) in subpulse.samples.iter().enumerate() {
            samples[block * slot + r] = a;
        }
    }
    Pulse::unit_energy(samples, cfg.dt(), format!("train(x{}){{{}}}", cfg.n(), subpulse.label))
}

// ---------------------------------------------------------------------------
// Ambiguity surface
// ---------------------------------------------------------------------------

/// Cross-ambiguity values sampled on the delay-Doppler lattice:
/// `A(m·T/M, n/(NT))` for `|m| ≤ M−1`, `|n| ≤ N−1`, stored delay-major.
#[derive(Debug, Clone)]
pub struct AmbiguitySurface {
    m_max: isize,
    n_max: isize,
    delay_step_s: f64,
    doppler_step_hz: f64,
    values: Vec<Complex64>,
}

impl AmbiguitySurface {
    pub fn m_max(&self) -> isize {
        self.m_max
    }

    pub fn n_max(&self) -> isize {
        self.n_max
    }

    /// Delay-lattice spacing `T/M` in seconds.
    pub fn delay_step_s(&self) -> f64 {
        self.delay_step_s
    }

    /// Doppler-lattice spacing `1/(NT)` in Hz.
    pub fn doppler_step_hz(&self) -> f64 {
        self.doppler_step_hz
    }

    /// Value at lattice point `(m, n)`; both indices may be negative.
    pub fn at(&self, m: isize, n: isize) -> Complex64 {
        assert!(m.abs() <= self.m_max && n.abs() <= self.n_max, "lattice index out of range");
        let row = (m + self.m_max) as usize;
        let col = (n + self.n_max) as usize;
        self.values[row * (2 * self.n_max as usize + 1) + col]
    }

    /// Value at the origin (should equal the pulse energy for `u = v`).
    pub fn origin(&self) -> Complex64 {
        self.at(0, 0)
    }

    /// Largest magnitude over all lattice points other than the origin.
    pub fn max_abs_off_origin(&self) -> f64 {
        let mut best = 0.0f64;
        for m in -self.m_max..=self.m_max {
            for n in -self.n_max..=self.n_max {
                if m == 0 && n == 0 {
                    continue;
                }
                best = best.max(self.at(m, n).norm());
            }
        }
        best
    }

    /// Iterates `(m, n, value)` in delay-major order.
    pub fn iter(&self) -> impl Iterator<Item = (isize, isize, Complex64)> + '_ {
        let n_max = self.n_max;
        let m_max = self.m_max;
        (-m_max..=m_max).flat_map(move |m| (-n_max..=n_max).map(move |n| (m, n, self.at(m, n))))
    }
}

/// Cross-ambiguity `A_{u,v}(τ, ν) = ∫ u(t)·v*(t−τ)·e^{−j2πν(t−τ)} dt` by
/// direct quadrature (Riemann sum, weight `dt`), sampled on the delay-Doppler
/// lattice of `cfg`.
///
/// Shifts are cyclic over the frame `[0, NT)` — both pulses are zero-padded
/// to the frame length and the delayed copy wraps — because that is the
/// correlation the cyclic-frame receiver actually evaluates. For pulses whose
/// support keeps them clear of the frame edge at every tested shift (any
/// subpulse confined to one slot), this coincides with the linear overlap
/// integral. Lattice Doppler phases reduce to exact roots of unity, so the
/// n ≠ 0 cancellations of periodic trains are exact here, not approximate.
pub fn ambiguity(u: &Pulse, v: &Pulse, cfg: &OtfsConfig) -> Result<AmbiguitySurface> {
    if (u.dt - v.dt).abs() > 1e-9 * u.dt.abs().max(v.dt.abs()) {
        return Err(Error::config(format!(
            "sample-rate mismatch between pulses ({} vs {})",
            u.dt, v.dt
        )));
    }
    if (u.dt - cfg.dt()).abs() > 1e-9 * cfg.dt() {
        return Err(Error::config(format!(
            "pulse sample interval {} does not match configuration dt {}",
            u.dt,
            cfg.dt()
        )));
    }
    let frame = cfg.frame_samples();
    if u.len() > frame || v.len() > frame {
        return Err(Error::config(format!(
            "pulse of {} samples exceeds the {frame}-sample frame",
            u.len().max(v.len())
        )));
    }
    let m_max = cfg.m() as isize - 1;
    let n_max = cfg.n() as isize - 1;
    let dt = u.dt;
    // Lattice Doppler n/(NT) at sample i contributes e^{-j2pi*n*i/(N*M*sps)}.
    let w = crate::otfs::unit_roots(frame);
    let mut values =
        Vec::with_capacity((2 * m_max as usize + 1) * (2 * n_max as usize + 1));
    for m in -m_max..=m_max {
        let shift = m * cfg.sps() as isize;
        for n in -n_max..=n_max {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &ui) in u.samples.iter().enumerate() {
                let r = (i as isize - shift).rem_euclid(frame as isize) as usize;
                if r >= v.len() {
                    continue;
                }
                let idx = (n * r as isize).rem_euclid(frame as isize) as usize;
                acc += ui * v.samples[r].conj() * w[idx].conj();
            }
            values.push(acc * dt);
        }
    }
    Ok(AmbiguitySurface {
        m_max,
        n_max,
        delay_step_s: cfg.delay_res_s(),
        doppler_step_hz: cfg.doppler_res_hz(),
        values,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn test_rrc_beta_zero_is_sinc_with_nyquist_zeros() {
        assert!((rrc_waveform(0.0, 0.0) - 1.0).abs() < 1e-15);
        for k in 1..=6 {
            let v = rrc_waveform(0.0, k as f64);
            assert!(v.abs() < 1e-9, "sinc zero at lag {k}, got {v}");
        }
    }

    #[test]
    fn test_rrc_singular_points_are_continuous() {
        let beta = 0.2;
        let x0 = 1.0 / (4.0 * beta);
        let at = rrc_waveform(beta, x0);
        let near = rrc_waveform(beta, x0 + 1e-7);
        assert!(at.is_finite());
        assert!((at - near).abs() < 1e-5, "limit value {at} vs nearby {near}");

        let peak = rrc_waveform(beta, 0.0);
        assert!((peak - (1.0 - beta + 4.0 * beta / std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn test_rrc_subpulse_autocorrelation_nulls() {
        // Zero-ISI property: the autocorrelation at non-zero multiples of the
        // zero-ISI interval stays below 1e-3 for a 16-interval truncation.
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let p = rrc_subpulse(0.2, 16, &cfg).unwrap();
        for lag in 1..8usize {
            let shift = lag * cfg.sps();
            let corr: Complex64 = p.samples[shift..]
                .iter()
                .zip(&p.samples[..p.len() - shift])
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                * cfg.dt();
            assert!(
                corr.norm() < 1e-3,
                "autocorrelation at lag {lag} intervals is {}",
                corr.norm()
            );
        }
    }

    #[test]
    fn test_rrc_subpulse_rejects_bad_arguments() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        assert!(rrc_subpulse(1.5, 8, &cfg).is_err(), "roll-off out of range");
        assert!(rrc_subpulse(0.2, 2, &cfg).is_err(), "span too short");
    }

    #[test]
    fn test_hermite_poly_low_orders() {
        let t = 0.73;
        assert_eq!(hermite_poly(0, t), 1.0);
        assert!((hermite_poly(1, t) - 2.0 * t).abs() < 1e-15);
        assert!((hermite_poly(2, t) - (4.0 * t * t - 2.0)).abs() < 1e-12);
        assert!((hermite_poly(3, t) - (8.0 * t * t * t - 12.0 * t)).abs() < 1e-12);
    }

    /// Rodrigues-formula oracle: `H_k(t) = (−1)^k e^{t²} (d/dt)^k e^{−t²}`,
    /// with the derivative taken numerically as a Cauchy circle integral
    /// (spectrally accurate for the entire function e^{−z²}).
    fn hermite_rodrigues(k: usize, t: f64) -> f64 {
        let radius = 1.0;
        let nodes = 128;
        let mut acc = Complex64::new(0.0, 0.0);
        for q in 0..nodes {
            let theta = 2.0 * std::f64::consts::PI * q as f64 / nodes as f64;
            let z = Complex64::new(t, 0.0) + Complex64::from_polar(radius, theta);
            let f = (-z * z).exp();
            acc += f * Complex64::from_polar(1.0, -(k as f64) * theta);
        }
        let deriv = acc * FACTORIAL[k] / (nodes as f64 * radius.powi(k as i32));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * (t * t).exp() * deriv.re
    }

    #[test]
    fn test_hermite_poly_matches_rodrigues_formula() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..20 {
            let t = rng.gen::<f64>() * 6.0 - 3.0;
            let direct = hermite_poly(5, t);
            let oracle = hermite_rodrigues(5, t);
            let rel = (direct - oracle).abs() / oracle.abs().max(1.0);
            assert!(rel < 1e-6, "H_5({t}): recurrence {direct} vs Rodrigues {oracle}");
        }
    }

    #[test]
    fn test_hermite_fn_peak_value() {
        // h_0(0) = pi^(-1/4)
        let want = std::f64::consts::PI.powf(-0.25);
        assert!((hermite_fn(0, 0.0) - want).abs() < 1e-12);
    }

    #[test]
    fn test_hermite_fn_normalized_recurrence() {
        // Independent check: h_{k+1}(t) = t·sqrt(2/(k+1))·h_k − sqrt(k/(k+1))·h_{k−1}.
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        for _ in 0..100 {
            let t = rng.gen::<f64>() * 8.0 - 4.0;
            for k in 1..MAX_HERMITE_ORDER {
                let lhs = hermite_fn(k + 1, t);
                let rhs = t * (2.0 / (k as f64 + 1.0)).sqrt() * hermite_fn(k, t)
                    - (k as f64 / (k as f64 + 1.0)).sqrt() * hermite_fn(k - 1, t);
                let scale = lhs.abs().max(rhs.abs()).max(1e-12);
                assert!(
                    ((lhs - rhs) / scale).abs() < 1e-8,
                    "recurrence mismatch at k={k}, t={t}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn test_hermite_quadrature_orthonormality() {
        // Fine-grid quadrature of h_i·h_j over [-12, 12]; light version of the
        // full acceptance check.
        let step = 1e-3;
        let steps = (24.0 / step) as usize;
        for i in 0..=4usize {
            for j in 0..=4usize {
                let mut acc = 0.0;
                for q in 0..=steps {
                    let t = -12.0 + q as f64 * step;
                    let w = if q == 0 || q == steps { 0.5 } else { 1.0 };
                    acc += w * hermite_fn(i, t) * hermite_fn(j, t) * step;
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc - want).abs() < 1e-8, "Gram[{i},{j}] = {acc}");
            }
        }
    }

    #[test]
    fn test_hermite_subpulse_order0_peaks_mid_bin() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let p = hermite_subpulse(0, &cfg, &ScalePolicy::single(0)).unwrap();
        assert_eq!(p.len(), cfg.sps());
        let peak = p
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, cfg.sps() / 2, "Gaussian lobe peaks at T/(2M)");
        assert!((p.energy() - 1.0).abs() < 1e-10);
        // Even-symmetric single lobe: all samples non-negative.
        assert!(p.samples.iter().all(|v| v.re >= 0.0 && v.im == 0.0));
    }

    #[test]
    fn test_hermite_set_gram_identity_after_orthogonalization() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let orders = [0usize, 1, 2, 3, 4];
        let policy = ScalePolicy::for_orders(&orders);
        let set = orthonormal_hermite_set(&orders, &cfg, &policy).unwrap();
        for (a, pa) in set.iter().enumerate() {
            for (b, pb) in set.iter().enumerate() {
                let g = inner(&pa.samples, &pb.samples, cfg.dt());
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (g - Complex64::new(want, 0.0)).norm() < 1e-12,
                    "Gram[{a},{b}] = {g}"
                );
            }
        }
    }

    #[test]
    fn test_hermite_set_rejects_bad_requests() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let policy = ScalePolicy::for_orders(&[0, 0]);
        assert!(orthonormal_hermite_set(&[0, 0], &cfg, &policy).is_err(), "duplicate order");
        let too_many: Vec<usize> = (0..9).collect();
        let policy = ScalePolicy::for_orders(&too_many);
        assert!(
            orthonormal_hermite_set(&too_many, &cfg, &policy).is_err(),
            "more orders than samples per bin"
        );
        assert!(hermite_subpulse(13, &cfg, &ScalePolicy::single(13)).is_err(), "order too high");
    }

    #[test]
    fn test_pulse_train_tiles_and_normalizes() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let sub = hermite_subpulse(0, &cfg, &ScalePolicy::single(0)).unwrap();
        let train = pulse_train(&sub, &cfg).unwrap();
        assert_eq!(train.len(), cfg.frame_samples());
        assert!((train.energy() - 1.0).abs() < 1e-12);

        // Two disjoint copies, each carrying half the energy.
        let slot = cfg.slot_samples();
        let first: f64 =
            train.samples[..slot].iter().map(|v| v.norm_sqr()).sum::<f64>() * cfg.dt();
        let second: f64 =
            train.samples[slot..].iter().map(|v| v.norm_sqr()).sum::<f64>() * cfg.dt();
        assert!((first - 0.5).abs() < 1e-12);
        assert!((second - 0.5).abs() < 1e-12);

        // N = 1: the train is the subpulse itself (already unit energy).
        let cfg1 = OtfsConfig::new(4, 1, 15e3, 8).unwrap();
        let sub1 = hermite_subpulse(0, &cfg1, &ScalePolicy::single(0)).unwrap();
        let train1 = pulse_train(&sub1, &cfg1).unwrap();
        for (a, b) in train1.samples[..sub1.len()].iter().zip(&sub1.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn test_pulse_train_rejects_wide_subpulse() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        // span 8 zero-ISI intervals = 2 slots at M = 4: support violation.
        let wide = rrc_subpulse(0.2, 8, &cfg).unwrap();
        assert!(pulse_train(&wide, &cfg).is_err());
    }

    #[test]
    fn test_ambiguity_origin_is_energy_and_symmetric() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let sub = rrc_subpulse(0.2, 4, &cfg).unwrap();
        let train = pulse_train(&sub, &cfg).unwrap();
        let surf = ambiguity(&train, &train, &cfg).unwrap();
        assert!((surf.origin() - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        for m in -3..=3isize {
            for n in -1..=1isize {
                let fwd = surf.at(m, n).norm();
                let rev = surf.at(-m, -n).norm();
                assert!(
                    (fwd - rev).abs() < 1e-10,
                    "|A({m},{n})| = {fwd} vs |A({},{})| = {rev}",
                    -m,
                    -n
                );
            }
        }
    }

    /// Brute-force oracle: cyclic shifted-modulated inner product with
    /// trig-evaluated phases (independent of the table-driven implementation).
    fn ambiguity_oracle(
        u: &Pulse,
        v: &Pulse,
        cfg: &OtfsConfig,
        m: isize,
        n: isize,
    ) -> Complex64 {
        let frame = cfg.frame_samples() as isize;
        let nu = n as f64 * cfg.doppler_res_hz();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..u.len() as isize {
            let r = (i - m * cfg.sps() as isize).rem_euclid(frame);
            if (r as usize) < v.len() {
                let theta = -2.0 * std::f64::consts::PI * nu * r as f64 * cfg.dt();
                acc += u.samples[i as usize]
                    * v.samples[r as usize].conj()
                    * Complex64::from_polar(1.0, theta);
            }
        }
        acc * cfg.dt()
    }

    #[test]
    fn test_ambiguity_matches_bruteforce_oracle() {
        let cfg = OtfsConfig::new(3, 2, 15e3, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(47);
        let mut random_pulse = |len: usize| {
            let samples: Vec<Complex64> = (0..len)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            Pulse::unit_energy(samples, cfg.dt(), "random").unwrap()
        };
        let u = random_pulse(cfg.frame_samples());
        let v = random_pulse(cfg.slot_samples());
        let surf = ambiguity(&u, &v, &cfg).unwrap();
        for m in -2..=2isize {
            for n in -1..=1isize {
                let want = ambiguity_oracle(&u, &v, &cfg, m, n);
                let got = surf.at(m, n);
                assert!(
                    (got - want).norm() < 1e-10,
                    "A({m},{n}) = {got} vs oracle {want}"
                );
            }
        }
    }

    #[test]
    fn test_ambiguity_rejects_sample_rate_mismatch() {
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let other = OtfsConfig::new(4, 2, 30e3, 8).unwrap();
        let a = rect_subpulse(&cfg);
        let b = rect_subpulse(&other);
        assert!(ambiguity(&a, &b, &cfg).is_err());
    }

    #[test]
    fn test_rrc_train_ambiguity_delta_property() {
        // Eq-style sufficient orthogonality: the train's self-ambiguity is ~0
        // at every non-origin lattice point (exact only for infinite support,
        // hence the 1e-2 bound for the 4-interval truncation).
        let cfg = OtfsConfig::new(4, 2, 15e3, 8).unwrap();
        let sub = rrc_subpulse(0.2, 4, &cfg).unwrap();
        let train = pulse_train(&sub, &cfg).unwrap();
        let surf = ambiguity(&train, &train, &cfg).unwrap();
        assert!((surf.origin().norm() - 1.0).abs() < 1e-6);
        let worst = surf.max_abs_off_origin();
        assert!(worst < 1e-2, "worst off-origin lattice value {worst}");
    }
}
