//! Multi-user receivers: matched-filter separation for pulse-division users,
//! successive interference cancellation for power-domain users, log-domain
//! message passing for sparse-code users, and an exact brute-force joint MAP
//! used as a testing oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noma::{hermite_trains, ScmaCodebook};
use crate::otfs::{dd_demodulate, DDGrid, OtfsConfig, QamConstellation, TimeSignal};

// ---------------------------------------------------------------------------
// Matched-filter separation (pulse-division users)
// ---------------------------------------------------------------------------

/// Separates pulse-division users by matched filtering: user j's grid is the
/// demodulation of `r` against user j's orthogonalized Hermite pulse train.
/// The train set is rebuilt deterministically from `orders`, so transmitter
/// and receiver agree exactly.
pub fn matched_filter_separate(
    r: &TimeSignal,
    orders: &[usize],
    cfg: &OtfsConfig,
) -> Result<Vec<DDGrid>> {
    let trains = hermite_trains(orders, cfg)?;
    trains.iter().map(|train| dd_demodulate(r, train, cfg)).collect()
}

// ---------------------------------------------------------------------------
// Per-bin equalization
// ---------------------------------------------------------------------------

/// Divides each bin by its known scalar channel response. Because the QAM
/// slicer picks the nearest point, `demap(y/h)` is exactly the per-bin
/// maximum-likelihood decision `argmin_x |y − h·x|`. Bins with a vanishing
/// response are zeroed (every hypothesis is equally likely there, and zero
/// demaps deterministically to the lowest constellation index).
pub fn equalize_per_bin(y: &DDGrid, h: &DDGrid) -> Result<DDGrid> {
    if y.rows() != h.rows() || y.cols() != h.cols() {
        return Err(Error::config("observation and channel grids must share dimensions"));
    }
    let mut out = DDGrid::zeros(y.rows(), y.cols());
    for (o, (&yv, &hv)) in
        out.as_mut_slice().iter_mut().zip(y.as_slice().iter().zip(h.as_slice()))
    {
        *o = if hv.norm_sqr() > 1e-30 { yv / hv } else { Complex64::new(0.0, 0.0) };
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Successive interference cancellation (power-domain users)
// ---------------------------------------------------------------------------

fn sic_detect_inner(
    y: &DDGrid,
    weights: &[f64],
    constellation: &QamConstellation,
    h: &DDGrid,
    genie_grids: Option<&[DDGrid]>,
) -> Result<Vec<Vec<u8>>> {
    if weights.is_empty() {
        return Err(Error::config("need at least one user weight"));
    }
    for &w in weights {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::config(format!("power weights must be positive, got {w}")));
        }
    }
    if y.rows() != h.rows() || y.cols() != h.cols() {
        return Err(Error::config("observation and channel grids must share dimensions"));
    }
    if let Some(grids) = genie_grids {
        if grids.len() != weights.len() {
            return Err(Error::config("one feedback grid per user required"));
        }
    }

    // Detection order: strongest user first (ties broken by user index).
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));

    let bins = y.as_slice().len();
    let bps = constellation.bits_per_symbol();
    let mut bits = vec![vec![0u8; bins * bps]; weights.len()];
    for bin in 0..bins {
        let yv = y.as_slice()[bin];
        let hv = h.as_slice()[bin];
        let mut residual = yv;
        for &user in &order {
            let amp = weights[user].sqrt();
            let z = if hv.norm_sqr() > 1e-30 {
                residual / (hv * amp)
            } else {
                Complex64::new(0.0, 0.0)
            };
            let idx = constellation.demap_symbol(z);
            bits[user][bin * bps..(bin + 1) * bps]
                .copy_from_slice(&constellation.index_to_bits(idx));
            let feedback = match genie_grids {
                Some(grids) => grids[user].as_slice()[bin],
                None => constellation.point(idx),
            };
            residual -= hv * amp * feedback;
        }
    }
    Ok(bits)
}

/// Successive interference cancellation over a power-domain superposition:
/// per bin, users are demapped strongest-first, each decided contribution is
/// reconstructed through the known per-bin channel and subtracted, and the
/// next user sees the cleaned residual. Returns bits in user order (delay-
/// major bin order, most significant bit of each symbol first).
pub fn sic_detect(
    y: &DDGrid,
    weights: &[f64],
    constellation: &QamConstellation,
    h: &DDGrid,
) -> Result<Vec<Vec<u8>>> {
    sic_detect_inner(y, weights, constellation, h, None)
}

/// SIC with genie decision feedback: the subtraction uses the true
/// transmitted symbols instead of the receiver's decisions. Used by tests to
/// isolate error propagation from first-stage decision quality.
pub fn sic_detect_genie(
    y: &DDGrid,
    weights: &[f64],
    constellation: &QamConstellation,
    h: &DDGrid,
    true_grids: &[DDGrid],
) -> Result<Vec<Vec<u8>>> {
    sic_detect_inner(y, weights, constellation, h, Some(true_grids))
}

// ---------------------------------------------------------------------------
// Message passing (sparse-code users)
// ---------------------------------------------------------------------------

/// What the demodulator hands the sparse-code detector for one K-bin group:
/// the received value and the known scalar channel response per resource
/// (all users share the waveform, hence the response).
#[derive(Debug, Clone)]
pub struct GroupObservation {
    pub y: Vec<Complex64>,
    pub h: Vec<Complex64>,
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalizes a log-domain message so its exponentials sum to 1.
fn normalize_log(msg: &mut [f64]) {
    let z = logsumexp(msg);
    for v in msg.iter_mut() {
        *v -= z;
    }
}

/// Log-domain sum-product detection on the sparse collision graph.
///
/// Messages run resource → user then user → resource for `iters` rounds,
/// followed by one final resource pass that forms the posteriors, so
/// `iters = 0` yields pure single-user likelihood marginals on collision-free
/// graphs. Each resource update enumerates all `M^{d_f}` joint hypotheses of
/// its colliding users with the exact Gaussian log-likelihood
/// `−|y_r − h_r·Σ_j s_j[r]·β_j|²/n0` and exact log-sum-exp marginalization.
///
/// Returns, per group and per user, the posterior probability of each of the
/// M codewords (normalized to sum to 1).
pub fn mpa_detect(
    groups: &[GroupObservation],
    codebook: &ScmaCodebook,
    n0: f64,
    iters: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::config(format!("noise variance must be positive, got {n0}")));
    }
    let k = codebook.k();
    let j_users = codebook.users();
    let m_order = codebook.order();
    for (g, group) in groups.iter().enumerate() {
        if group.y.len() != k || group.h.len() != k {
            return Err(Error::config(format!(
                "group {g} carries {} observations and {} responses, expected {k}",
                group.y.len(),
                group.h.len()
            )));
        }
    }

    // Static graph structure shared by all groups.
    let on_resource: Vec<Vec<usize>> = (0..k).map(|r| codebook.users_on_resource(r)).collect();
    let supports: Vec<Vec<usize>> = (0..j_users).map(|j| codebook.user(j).support()).collect();

    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        // Messages indexed [resource][user] and [user][resource]; only edges
        // of the collision graph are used.
        let uniform = vec![-(m_order as f64).ln(); m_order];
        let mut res_to_user = vec![vec![uniform.clone(); j_users]; k];
        let mut user_to_res = vec![vec![uniform.clone(); k]; j_users];

        let resource_pass = |user_to_res: &Vec<Vec<Vec<f64>>>,
                             res_to_user: &mut Vec<Vec<Vec<f64>>>| {
            for r in 0..k {
                let colliders = &on_resource[r];
                if colliders.is_empty() {
                    continue;
                }
                // Joint hypothesis index = base-M digits, one per collider.
                let combos = m_order.pow(colliders.len() as u32);
                let mut loglik = vec![0.0f64; combos];
                for (c, ll) in loglik.iter_mut().enumerate() {
                    let mut sum = Complex64::new(0.0, 0.0);
                    let mut digits = c;
                    for &j in colliders {
                        let sym = digits % m_order;
                        digits /= m_order;
                        sum += codebook.user(j).codeword(sym)[r];
                    }
                    let diff = group.y[r] - group.h[r] * sum;
                    *ll = -diff.norm_sqr() / n0;
                }
                for (pos, &j) in colliders.iter().enumerate() {
                    let stride = m_order.pow(pos as u32);
                    let mut msg = vec![f64::NEG_INFINITY; m_order];
                    for (target, slot) in msg.iter_mut().enumerate() {
                        let mut terms = Vec::with_capacity(combos / m_order);
                        for (c, &ll) in loglik.iter().enumerate() {
                            if (c / stride) % m_order != target {
                                continue;
                            }
                            let mut prior = 0.0;
                            let mut digits = c;
                            for (qpos, &q) in colliders.iter().enumerate() {
                                let sym = digits % m_order;
                                digits /= m_order;
                                if qpos != pos {
                                    prior += user_to_res[q][r][sym];
                                }
                            }
                            terms.push(ll + prior);
                        }
                        *slot = logsumexp(&terms);
                    }
                    normalize_log(&mut msg);
                    res_to_user[r][j] = msg;
                }
            }
        };

        for _ in 0..iters {
            resource_pass(&user_to_res, &mut res_to_user);
            for j in 0..j_users {
                for &r in &supports[j] {
                    let mut msg = vec![0.0f64; m_order];
                    for &r2 in &supports[j] {
                        if r2 == r {
                            continue;
                        }
                        for (sym, v) in msg.iter_mut().enumerate() {
                            *v += res_to_user[r2][j][sym];
                        }
                    }
                    normalize_log(&mut msg);
                    user_to_res[j][r] = msg;
                }
            }
        }
        resource_pass(&user_to_res, &mut res_to_user);

        let mut posteriors = Vec::with_capacity(j_users);
        for j in 0..j_users {
            let mut log_post = vec![0.0f64; m_order];
            for &r in &supports[j] {
                for (sym, v) in log_post.iter_mut().enumerate() {
                    *v += res_to_user[r][j][sym];
                }
            }
            normalize_log(&mut log_post);
            posteriors.push(log_post.into_iter().map(f64::exp).collect::<Vec<f64>>());
        }
        out.push(posteriors);
    }
    Ok(out)
}

/// Hard decisions from posteriors: per group and user, the codeword with the
/// largest probability; exact ties resolve to the lowest index.
pub fn hard_decisions(posteriors: &[Vec<Vec<f64>>]) -> Vec<Vec<usize>> {
    posteriors
        .iter()
        .map(|group| {
            group
                .iter()
                .map(|probs| {
                    let mut best = 0;
                    for (idx, &p) in probs.iter().enumerate() {
                        if p > probs[best] {
                            best = idx;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

/// Exact joint maximum-likelihood detection by enumerating every codeword
/// combination (M^J hypotheses per group). Testing oracle for `mpa_detect`;
/// refuses search spaces beyond 10^6 hypotheses.
pub fn map_bruteforce(
    groups: &[GroupObservation],
    codebook: &ScmaCodebook,
    n0: f64,
) -> Result<Vec<Vec<usize>>> {
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::config(format!("noise variance must be positive, got {n0}")));
    }
    let k = codebook.k();
    let j_users = codebook.users();
    let m_order = codebook.order();
    let combos = (m_order as f64).powi(j_users as i32);
    if combos > 1e6 {
        return Err(Error::config(format!(
            "{m_order}^{j_users} hypotheses exceed the 10^6 brute-force budget"
        )));
    }
    let combos = combos as usize;
    for (g, group) in groups.iter().enumerate() {
        if group.y.len() != k || group.h.len() != k {
            return Err(Error::config(format!("group {g} does not match the codebook geometry")));
        }
    }

    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let mut best_combo = 0usize;
        let mut best_metric = f64::NEG_INFINITY;
        for c in 0..combos {
            let mut metric = 0.0;
            for r in 0..k {
                let mut sum = Complex64::new(0.0, 0.0);
                let mut digits = c;
                for j in 0..j_users {
                    let sym = digits % m_order;
                    digits /= m_order;
                    sum += codebook.user(j).codeword(sym)[r];
                }
                let diff = group.y[r] - group.h[r] * sum;
                metric -= diff.norm_sqr() / n0;
            }
            if metric > best_metric {
                best_metric = metric;
                best_combo = c;
            }
        }
        let mut digits = best_combo;
        let mut symbols = Vec::with_capacity(j_users);
        for _ in 0..j_users {
            symbols.push(digits % m_order);
            digits /= m_order;
        }
        out.push(symbols);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
