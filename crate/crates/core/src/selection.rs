//! User selection for the BPSK broadcast channel.
//!
//! BPSK only uses the real axis, so two users interfere through
//! `Re{h_j h_l^H}` rather than `|h_j h_l^H|`. Geometric user selection (GUS)
//! packs users whose real correlation distance is small, which lets it serve
//! more users than there are transmit antennas. Semi-orthogonal user
//! selection (SUS) is the classical baseline and never exceeds `M` users.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::ChannelSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Selected users in selection order.
    pub selected: Vec<usize>,
    /// Outer iterations (GUS) or selection rounds (SUS).
    pub iterations: usize,
    /// Target size `K` tried at every outer iteration.
    pub k_trace: Vec<usize>,
    /// `α` used by the iteration that produced `selected` (GUS only).
    pub alpha_used: Option<f64>,
    /// `K` of the iteration that produced `selected`: every pair of selected
    /// users has `d_RC ≤ 1/(K − 1)`.
    pub packing_k: usize,
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Real correlation distance `|Re{h_j h_l^H}| / min(‖h_j‖², ‖h_l‖²)`.
pub fn d_rc(hj: &[Complex64], hl: &[Complex64]) -> Result<f64> {
    if hj.len() != hl.len() {
        return Err(Error::Dimension(format!("channels of length {} and {}", hj.len(), hl.len())));
    }
    let (nj, nl) = (norm_sq(hj), norm_sq(hl));
    if !(nj > 0.0) {
        return Err(Error::ZeroNorm(0));
    }
    if !(nl > 0.0) {
        return Err(Error::ZeroNorm(1));
    }
    Ok(inner(hj, hl).re.abs() / nj.min(nl))
}

/// Chordal distance `sin θ` between the lines spanned by two channels.
///
/// Diagnostic only; selection decisions use [`d_rc`].
pub fn chordal_distance(hj: &[Complex64], hl: &[Complex64]) -> Result<f64> {
    if hj.len() != hl.len() {
        return Err(Error::Dimension(format!("channels of length {} and {}", hj.len(), hl.len())));
    }
    let (nj, nl) = (norm_sq(hj), norm_sq(hl));
    if !(nj > 0.0 && nl > 0.0) {
        return Err(Error::ZeroNorm(if nj > 0.0 { 1 } else { 0 }));
    }
    let c = inner(hj, hl).norm_sqr() / (nj * nl);
    Ok((1.0 - c).max(0.0).sqrt())
}

/// Initial target size `K = M + 1` of GUS, from the Rankin-type packing bound.
pub fn initial_k(antennas: usize) -> usize {
    antennas + 1
}

/// How GUS picks `α` in its candidate rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRule {
    /// `α = (K − 1)/K` for the current target size `K`.
    Adaptive,
    Fixed(f64),
}

impl AlphaRule {
    fn alpha(self, k: usize) -> f64 {
        match self {
            AlphaRule::Adaptive => (k as f64 - 1.0) / k as f64,
            AlphaRule::Fixed(a) => a,
        }
    }
}

/// Termination guards of the GUS outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GusCaps {
    /// Largest target size `K` tried.
    pub max_k: usize,
    pub max_outer: usize,
}

impl GusCaps {
    /// `K ≤ 2M` and at most `3M` outer iterations.
    pub fn for_antennas(m: usize) -> Self {
        GusCaps { max_k: 2 * m, max_outer: 3 * m }
    }
}

/// Running flop tally following the accounting of the complexity analysis.
#[derive(Debug, Default)]
struct Flops(u64);

impl Flops {
    fn add(&mut self, n: usize) {
        self.0 += n as u64;
    }
}

/// One pass of the GUS main body for target size `k`.
fn gus_main_body(channels: &ChannelSet, norms: &[f64], usable: &[usize], k: usize, alpha: f64, flops: &mut Flops) -> Vec<usize> {
    let m = channels.num_antennas();
    let threshold = if k > 1 { 1.0 / (k as f64 - 1.0) } else { f64::INFINITY };
    let cand_threshold = if k > 1 { alpha * threshold } else { f64::INFINITY };

    let mut available: Vec<usize> = usable.to_vec();
    let mut candidates: Vec<usize> = available.clone();
    let mut selected = Vec::with_capacity(k);
    while selected.len() < k && !candidates.is_empty() {
        // Strict comparison keeps the lowest index on ties.
        flops.add(candidates.len());
        let mut pi = candidates[0];
        for &j in &candidates[1..] {
            if norms[j] > norms[pi] {
                pi = j;
            }
        }
        selected.push(pi);
        available.retain(|&j| j != pi);

        flops.add((4 * m + 3) * available.len());
        let hp = channels.row(pi);
        let dist: Vec<(usize, f64)> = available
            .iter()
            .map(|&j| (j, inner(channels.row(j), hp).re.abs() / norms[j].min(norms[pi])))
            .collect();
        let kept: Vec<(usize, f64)> = dist.into_iter().filter(|&(_, d)| d <= threshold).collect();
        flops.add(kept.len());
        available = kept.iter().map(|&(j, _)| j).collect();
        candidates = kept.iter().filter(|&&(_, d)| d > cand_threshold).map(|&(j, _)| j).collect();
        if candidates.is_empty() {
            candidates.clone_from(&available);
        }
    }
    selected
}

fn gus_impl(channels: &ChannelSet, alpha_rule: AlphaRule, caps: GusCaps, flops: &mut Flops) -> SelectionOutcome {
    let m = channels.num_antennas();
    let kt = channels.num_users();
    let norms = channels.norms_sq();
    flops.add(kt * (4 * m - 1));
    // Users without any channel cannot be served or measured against.
    let usable: Vec<usize> = (0..kt).filter(|&j| norms[j] > 0.0).collect();

    let mut k_trace = Vec::new();
    let mut previous: Option<(Vec<usize>, usize, f64)> = None;
    let mut k_next = initial_k(m).min(caps.max_k.max(1));
    let mut iteration = 0;
    loop {
        iteration += 1;
        let k = k_next;
        let alpha = alpha_rule.alpha(k);
        let selected = gus_main_body(channels, norms, &usable, k, alpha, flops);
        k_trace.push(k);
        let finish = |selected: Vec<usize>, packing_k: usize, alpha: f64, k_trace: Vec<usize>| SelectionOutcome {
            selected,
            iterations: iteration,
            k_trace,
            alpha_used: Some(alpha),
            packing_k,
        };

        match &previous {
            None => {
                k_next = if selected.len() == k { k + 1 } else { k - 1 };
            }
            Some((prev_sel, prev_k, prev_alpha)) => {
                if k > *prev_k && selected.len() >= prev_sel.len() {
                    k_next = k + 1;
                } else if k > *prev_k {
                    return finish(prev_sel.clone(), *prev_k, *prev_alpha, k_trace);
                } else if k < *prev_k && selected.len() + 1 >= k {
                    return finish(selected, k, alpha, k_trace);
                } else {
                    k_next = k - 1;
                }
            }
        }
        if k_next < 1 || k_next > caps.max_k || iteration >= caps.max_outer {
            return finish(selected, k, alpha, k_trace);
        }
        previous = Some((selected, k, alpha));
    }
}

/// Geometric user selection.
pub fn gus(channels: &ChannelSet, alpha: AlphaRule, caps: Option<GusCaps>) -> SelectionOutcome {
    let caps = caps.unwrap_or_else(|| GusCaps::for_antennas(channels.num_antennas()));
    gus_impl(channels, alpha, caps, &mut Flops::default())
}

/// [`gus`] together with its flop count.
pub fn gus_with_count(channels: &ChannelSet, alpha: AlphaRule, caps: Option<GusCaps>) -> (SelectionOutcome, u64) {
    let caps = caps.unwrap_or_else(|| GusCaps::for_antennas(channels.num_antennas()));
    let mut flops = Flops::default();
    let outcome = gus_impl(channels, alpha, caps, &mut flops);
    (outcome, flops.0)
}

/// Upper bound `2M²(4M+5)K_T + (4M−1)K_T` on the GUS flop count.
pub fn op_count_bound(antennas: usize, users: usize) -> u64 {
    let (m, kt) = (antennas as u64, users as u64);
    2 * m * m * (4 * m + 5) * kt + (4 * m - 1) * kt
}

/// Semi-orthogonal user selection with orthogonality threshold `epsilon`.
///
/// Each round picks the user with the largest component orthogonal to the
/// span of the users already chosen, then keeps only users whose normalized
/// correlation with that component is below `epsilon`.
pub fn sus(channels: &ChannelSet, epsilon: f64, max_users: usize) -> Result<SelectionOutcome> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("SUS threshold {epsilon} must lie in (0, 1)")));
    }
    let limit = max_users.min(channels.num_antennas());
    let mut remaining: Vec<usize> = (0..channels.num_users()).filter(|&j| channels.norm_sq(j) > 0.0).collect();
    let mut selected = Vec::new();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut rounds = 0;
    while selected.len() < limit && !remaining.is_empty() {
        rounds += 1;
        let mut best: Option<(usize, Vec<Complex64>, f64)> = None;
        for &k in &remaining {
            let mut g = channels.row(k).to_vec();
            for b in &basis {
                let coef = inner(&g, b) / norm_sq(b);
                for (gi, bi) in g.iter_mut().zip(b) {
                    *gi -= coef * bi;
                }
            }
            let n = norm_sq(&g);
            if best.as_ref().is_none_or(|(_, _, bn)| n > *bn) {
                best = Some((k, g, n));
            }
        }
        let (pi, g, gn) = best.expect("remaining is nonempty");
        if !(gn > 0.0) {
            break;
        }
        selected.push(pi);
        let gnorm = gn.sqrt();
        remaining.retain(|&k| {
            k != pi && inner(channels.row(k), &g).norm() / (channels.norm_sq(k).sqrt() * gnorm) < epsilon
        });
        basis.push(g);
    }
    Ok(SelectionOutcome {
        selected,
        iterations: rounds,
        k_trace: vec![limit],
        alpha_used: None,
        packing_k: limit,
    })
}

/// Mean SUS selection size for each threshold over a set of channel draws.
pub fn sus_epsilon_sweep(draws: &[ChannelSet], epsilons: &[f64]) -> Result<Vec<(f64, f64)>> {
    epsilons
        .iter()
        .map(|&eps| {
            let total = draws
                .iter()
                .map(|ch| sus(ch, eps, ch.num_antennas()).map(|o| o.selected.len()))
                .sum::<Result<usize>>()?;
            Ok((eps, total as f64 / draws.len().max(1) as f64))
        })
        .collect()
}
