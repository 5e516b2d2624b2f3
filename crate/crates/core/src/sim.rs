//! Monte Carlo campaigns: BER measurement, iteration statistics, user-selection
//! counts and frame-wise expected throughput.
//!
//! A campaign draws one channel set per realization, optionally selects users
//! from it, and evaluates every (selection, precoder) arm at every SNR point on
//! that same draw. Each realization owns its RNG streams, derived from the
//! campaign seed and the realization index, so results do not depend on how
//! realizations are scheduled across threads.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::errorprob::{effective_gains, pe_average};
use crate::model::{detect, enumerate_symbols, generate_channels, ChannelSet, SystemConfig};
use crate::precoders::{build, Method, MpeOptions, PrecoderResult};
use crate::selection::{gus, sus, AlphaRule, SelectionOutcome};
use crate::{Error, Result};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SelectionKind {
    Gus { alpha: AlphaRule },
    Sus { epsilon: f64 },
}

impl SelectionKind {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionKind::Gus { .. } => "gus",
            SelectionKind::Sus { .. } => "sus",
        }
    }

    pub fn select(&self, channels: &ChannelSet) -> Result<SelectionOutcome> {
        match *self {
            SelectionKind::Gus { alpha } => Ok(gus(channels, alpha, None)),
            SelectionKind::Sus { epsilon } => sus(channels, epsilon, channels.num_antennas()),
        }
    }
}

/// Who is served in each realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserSetup {
    /// A fixed group of `K` users, no selection.
    Fixed { users: usize },
    /// `K_T` candidate users and one or more selection rules, each paired with
    /// every precoder of the campaign.
    Selected { total_users: usize, methods: Vec<SelectionKind> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub antennas: usize,
    pub users: UserSetup,
    pub snr_db: Vec<f64>,
    pub realizations: usize,
    /// Channel uses simulated per realization and cell; each use carries one
    /// bit per served user.
    pub symbols_per_realization: usize,
    /// Frame length `ℓ` of the headline throughput column.
    pub frame_len: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(skip)]
    pub mpe: MpeOptions,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.antennas == 0 {
            return bad("antennas must be positive".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("the SNR grid must be a nonempty list of finite values".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.frame_len == 0 {
            return bad("frame length must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one precoder is required".into());
        }
        match &self.users {
            UserSetup::Fixed { users } => {
                if *users == 0 || *users > crate::MAX_USERS {
                    return bad(format!("user count {users} must lie in 1..={}", crate::MAX_USERS));
                }
            }
            UserSetup::Selected { total_users, methods } => {
                if *total_users == 0 {
                    return bad("the candidate pool must be nonempty".into());
                }
                if methods.is_empty() {
                    return bad("at least one selection rule is required".into());
                }
                for m in methods {
                    match *m {
                        SelectionKind::Sus { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => {
                            return bad(format!("SUS threshold {epsilon} must lie in (0, 1)"));
                        }
                        SelectionKind::Gus { alpha: AlphaRule::Fixed(a) } if !(a.is_finite() && a >= 0.0) => {
                            return bad(format!("GUS alpha {a} must be finite and nonnegative"));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// (selection, precoder) pairs in output order.
    ///
    /// ZF and MMSE are not paired with GUS: GUS routinely serves more users
    /// than there are antennas, where neither applies.
    pub fn arms(&self) -> Vec<Arm> {
        match &self.users {
            UserSetup::Fixed { .. } => self.methods.iter().map(|&method| Arm { selection: None, method }).collect(),
            UserSetup::Selected { methods, .. } => methods
                .iter()
                .flat_map(|&s| {
                    self.methods
                        .iter()
                        .filter(move |m| !(matches!(s, SelectionKind::Gus { .. }) && matches!(m, Method::Zf | Method::Mmse)))
                        .map(move |&method| Arm { selection: Some(s), method })
                })
                .collect(),
        }
    }

    fn pool_size(&self) -> usize {
        match &self.users {
            UserSetup::Fixed { users } => *users,
            UserSetup::Selected { total_users, .. } => *total_users,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub selection: Option<SelectionKind>,
    pub method: Method,
}

impl Arm {
    /// `mpe-joint`, or `gus+mpe-joint` when users are selected.
    pub fn label(&self) -> String {
        match self.selection {
            Some(s) => format!("{}+{}", s.name(), self.method.name()),
            None => self.method.name().to_string(),
        }
    }
}

/// Seed of realization `index`, a SplitMix64 mix of the campaign seed.
pub fn realization_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One transmitted symbol vector and what every receiver saw.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub symbols: Vec<f64>,
    /// Noiseless filter outputs `w_j h_j U s`.
    pub noiseless: Vec<Complex64>,
    /// Filter outputs `w_j (h_j U s + z_j)`.
    pub noisy: Vec<Complex64>,
    pub decisions: Vec<f64>,
}

/// Sends one uniformly drawn BPSK vector through `gains = H U` and the filters.
pub fn transmit<R: Rng + ?Sized>(gains: &crate::CMatrix, w: &[Complex64], noise_var: f64, rng: &mut R) -> Transmission {
    let k = gains.ncols();
    let symbols: Vec<f64> = (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let sd = (noise_var / 2.0).sqrt();
    let mut noiseless = Vec::with_capacity(k);
    let mut noisy = Vec::with_capacity(k);
    let mut decisions = Vec::with_capacity(k);
    for j in 0..k {
        let clean: Complex64 = (0..k).map(|l| gains[(j, l)] * symbols[l]).sum();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let y = w[j] * (clean + Complex64::new(sd * re, sd * im));
        noiseless.push(w[j] * clean);
        noisy.push(y);
        decisions.push(detect(y.re));
    }
    Transmission { symbols, noiseless, noisy, decisions }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BerCount {
    pub errors: u64,
    pub bits: u64,
}

impl BerCount {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// Simulates `uses` channel uses and counts bit errors over all users.
pub fn measure_ber<R: Rng + ?Sized>(
    result: &PrecoderResult,
    channels: &ChannelSet,
    config: &SystemConfig,
    uses: usize,
    rng: &mut R,
) -> Result<BerCount> {
    if result.w.len() != channels.num_users() {
        return Err(Error::Dimension(format!(
            "{} filters for {} users",
            result.w.len(),
            channels.num_users()
        )));
    }
    let gains = effective_gains(&result.u, channels)?;
    let mut count = BerCount::default();
    for _ in 0..uses {
        let t = transmit(&gains, result.w.as_slice(), config.noise_var, rng);
        count.errors += t.symbols.iter().zip(&t.decisions).filter(|(s, d)| s != d).count() as u64;
        count.bits += t.symbols.len() as u64;
    }
    Ok(count)
}

/// `E[Thr] = (1 − Pe)^ℓ K_avg` bits per channel use.
pub fn expected_throughput(pe: f64, frame_len: usize, k_avg: f64) -> f64 {
    (1.0 - pe).powf(frame_len as f64) * k_avg
}

/// Wilson score interval for `errors` out of `trials` at 95% confidence.
pub fn wilson(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The exact endpoints are 0 and 1 at the extremes; avoid rounding residue.
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Aggregate of one (arm, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub label: String,
    pub method: Method,
    pub selection: Option<String>,
    pub snr_db: f64,
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ber_ci_low: f64,
    pub ber_ci_high: f64,
    /// Mean exact error probability of the precoder and filters actually used.
    pub pe_theory: f64,
    pub mean_iters: f64,
    pub mean_selected: f64,
    pub throughput: f64,
    pub throughput_l100: f64,
    pub throughput_l500: f64,
    /// Realizations that produced a precoder.
    pub realizations: usize,
    pub failures: usize,
}

impl CellResult {
    pub fn ber_ci_half_width(&self) -> f64 {
        (self.ber_ci_high - self.ber_ci_low) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub label: String,
    pub snr_db: f64,
    pub realization: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRecord {
    pub realization: usize,
    pub realization_seed: u64,
    pub method: String,
    pub selected: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub seed: u64,
    /// Cells ordered by arm, then SNR.
    pub cells: Vec<CellResult>,
    pub failures: Vec<Failure>,
    pub selections: Vec<SelectionRecord>,
}

impl CampaignResult {
    pub fn cell(&self, label: &str, snr_db: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.label == label && c.snr_db == snr_db)
    }

    pub fn series(&self, label: &str) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| c.label == label).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    pe: f64,
    errors: u64,
    bits: u64,
    iterations: usize,
    selected: usize,
}

struct RealizationOutput {
    samples: Vec<std::result::Result<Sample, String>>,
    selections: Vec<SelectionRecord>,
}

fn run_realization(spec: &CampaignSpec, arms: &[Arm], index: usize) -> RealizationOutput {
    let rseed = realization_seed(spec.seed, index);
    let pool = generate_channels(rseed, spec.pool_size(), spec.antennas);
    let mut opts = spec.mpe.clone();
    opts.seed = rseed;

    let mut selections = Vec::new();
    let mut served: Vec<(Option<SelectionKind>, std::result::Result<ChannelSet, String>)> = Vec::new();
    match &spec.users {
        UserSetup::Fixed { .. } => served.push((None, Ok(pool.clone()))),
        UserSetup::Selected { methods, .. } => {
            for kind in methods {
                let users = kind.select(&pool).and_then(|out| {
                    let set = pool.subset(&out.selected)?;
                    selections.push(SelectionRecord {
                        realization: index,
                        realization_seed: rseed,
                        method: kind.name().to_string(),
                        selected: out.selected,
                        iterations: out.iterations,
                    });
                    Ok(set)
                });
                served.push((Some(*kind), users.map_err(|e| e.to_string())));
            }
        }
    }

    let mut samples = Vec::with_capacity(arms.len() * spec.snr_db.len());
    for (a, arm) in arms.iter().enumerate() {
        let users = &served.iter().find(|(s, _)| *s == arm.selection).expect("every arm has a user set").1;
        for (s, &snr) in spec.snr_db.iter().enumerate() {
            let sample = users.clone().and_then(|ch| {
                let mut rng = ChaCha20Rng::seed_from_u64(rseed);
                rng.set_stream((a * spec.snr_db.len() + s + 1) as u64);
                evaluate(arm.method, &ch, spec, snr, &opts, &mut rng).map_err(|e| e.to_string())
            });
            samples.push(sample);
        }
    }
    RealizationOutput { samples, selections }
}

fn evaluate(method: Method, ch: &ChannelSet, spec: &CampaignSpec, snr: f64, opts: &MpeOptions, rng: &mut ChaCha20Rng) -> Result<Sample> {
    let k = ch.num_users();
    let config = SystemConfig::at_snr_db(spec.antennas, k, snr)?;
    let book = enumerate_symbols(k)?;
    let result = build(method, ch, &config, opts)?;
    let pe = pe_average(&result.w, &result.u, ch, &book, &config)?.average;
    let count = measure_ber(&result, ch, &config, spec.symbols_per_realization, rng)?;
    Ok(Sample { pe, errors: count.errors, bits: count.bits, iterations: result.outer_iterations, selected: k })
}

/// Runs every realization (in parallel on the current rayon pool) and folds
/// them in realization order.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignResult> {
    spec.validate()?;
    let arms = spec.arms();
    let outputs: Vec<RealizationOutput> =
        (0..spec.realizations).into_par_iter().map(|r| run_realization(spec, &arms, r)).collect();

    let n_snr = spec.snr_db.len();
    let mut cells = Vec::with_capacity(arms.len() * n_snr);
    let mut failures = Vec::new();
    for (a, arm) in arms.iter().enumerate() {
        for (s, &snr) in spec.snr_db.iter().enumerate() {
            let idx = a * n_snr + s;
            let mut acc = Sample::default();
            let (mut ok, mut failed) = (0usize, 0usize);
            for (r, out) in outputs.iter().enumerate() {
                match &out.samples[idx] {
                    Ok(x) => {
                        ok += 1;
                        acc.pe += x.pe;
                        acc.errors += x.errors;
                        acc.bits += x.bits;
                        acc.iterations += x.iterations;
                        acc.selected += x.selected;
                    }
                    Err(message) => {
                        failed += 1;
                        failures.push(Failure { label: arm.label(), snr_db: snr, realization: r, message: message.clone() });
                    }
                }
            }
            let n = ok.max(1) as f64;
            let pe = acc.pe / n;
            let k_avg = acc.selected as f64 / n;
            let (lo, hi) = wilson(acc.errors, acc.bits);
            cells.push(CellResult {
                label: arm.label(),
                method: arm.method,
                selection: arm.selection.map(|s| s.name().to_string()),
                snr_db: snr,
                errors: acc.errors,
                bits: acc.bits,
                ber: BerCount { errors: acc.errors, bits: acc.bits }.ber(),
                ber_ci_low: lo,
                ber_ci_high: hi,
                pe_theory: pe,
                mean_iters: acc.iterations as f64 / n,
                mean_selected: k_avg,
                throughput: expected_throughput(pe, spec.frame_len, k_avg),
                throughput_l100: expected_throughput(pe, 100, k_avg),
                throughput_l500: expected_throughput(pe, 500, k_avg),
                realizations: ok,
                failures: failed,
            });
        }
    }
    for arm in &arms {
        let label = arm.label();
        let n = failures.iter().filter(|f| f.label == label).count();
        if let Some(f) = failures.iter().find(|f| f.label == label) {
            log::warn!("{label}: {n} failed cells, first in realization {} at {} dB: {}", f.realization, f.snr_db, f.message);
        }
    }
    let selections = outputs.into_iter().flat_map(|o| o.selections).collect();
    Ok(CampaignResult { seed: spec.seed, cells, failures, selections })
}

/// Writes the per-cell result table.
pub fn write_results_csv<W: Write>(result: &CampaignResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method",
        "snr_db",
        "ber",
        "ber_ci",
        "pe_theory",
        "mean_iters",
        "mean_selected",
        "throughput_l100",
        "throughput_l500",
        "seed",
        "realizations",
    ])?;
    for c in &result.cells {
        w.write_record([
            c.label.clone(),
            c.snr_db.to_string(),
            format!("{:e}", c.ber),
            format!("{:e}", c.ber_ci_half_width()),
            format!("{:e}", c.pe_theory),
            c.mean_iters.to_string(),
            c.mean_selected.to_string(),
            c.throughput_l100.to_string(),
            c.throughput_l500.to_string(),
            result.seed.to_string(),
            c.realizations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per (realization, selection rule).
pub fn write_selections_csv<W: Write>(records: &[SelectionRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["realization_seed", "method", "selected_count", "selected_indices", "iterations"])?;
    for r in records {
        let indices: Vec<String> = r.selected.iter().map(|j| j.to_string()).collect();
        w.write_record([
            r.realization_seed.to_string(),
            r.method.clone(),
            r.selected.len().to_string(),
            indices.join(";"),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean selection size of one rule for one (M, K_T) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionCount {
    pub antennas: usize,
    pub total_users: usize,
    pub method: String,
    pub mean_selected: f64,
    /// Histogram of selection sizes, index = size.
    pub histogram: Vec<usize>,
    pub realizations: usize,
}

impl SelectionCount {
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (size, &n) in self.histogram.iter().enumerate() {
            if n > self.histogram[best] {
                best = size;
            }
        }
        best
    }
}

/// Selection counts versus pool size. Every rule sees the same channel draws.
pub fn selection_count_sweep(
    antennas: &[usize],
    totals: &[usize],
    methods: &[SelectionKind],
    realizations: usize,
    seed: u64,
) -> Result<Vec<SelectionCount>> {
    if realizations == 0 {
        return Err(Error::InvalidParameter("realizations must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &m in antennas {
        for &kt in totals {
            let per_draw: Vec<Vec<usize>> = (0..realizations)
                .into_par_iter()
                .map(|r| {
                    let ch = generate_channels(realization_seed(seed, r), kt, m);
                    methods.iter().map(|k| k.select(&ch).map(|o| o.selected.len())).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            for (i, kind) in methods.iter().enumerate() {
                let mut histogram = vec![0; 2 * m + 2];
                let mut total = 0;
                for draw in &per_draw {
                    let size = draw[i];
                    if size >= histogram.len() {
                        histogram.resize(size + 1, 0);
                    }
                    histogram[size] += 1;
                    total += size;
                }
                rows.push(SelectionCount {
                    antennas: m,
                    total_users: kt,
                    method: kind.name().to_string(),
                    mean_selected: total as f64 / realizations as f64,
                    histogram,
                    realizations,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes a selection-count sweep as CSV.
pub fn write_selection_counts_csv<W: Write>(rows: &[SelectionCount], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["antennas", "total_users", "method", "mean_selected", "modal_selected", "realizations"])?;
    for r in rows {
        w.write_record([
            r.antennas.to_string(),
            r.total_users.to_string(),
            r.method.clone(),
            r.mean_selected.to_string(),
            r.mode().to_string(),
            r.realizations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Default SUS orthogonality threshold.
pub const SUS_EPSILON: f64 = 0.35;

/// A named experiment: a Monte Carlo campaign or a selection-count sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Campaign(CampaignSpec),
    SelectionSweep(SweepSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub antennas: Vec<usize>,
    pub totals: Vec<usize>,
    pub methods: Vec<SelectionKind>,
    pub realizations: usize,
    pub seed: u64,
}

/// Inclusive grid `start, start + step, …` up to `stop`.
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::InvalidParameter(format!("invalid SNR range {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

/// Desk-scale versions of the published experiments.
///
/// | name | setup | SNR (dB) | realizations | per cell |
/// |------|-------|----------|--------------|----------|
/// | fig2 | M=3, K=3; MSLNR, ZF, MMSE, MPE-ML, MPE joint | −5..20 step 2.5 | 200 | 170 uses (510 bits) per realization |
/// | fig3 | M=3, K=3; MPE-ML, MPE joint (iteration counts) | 0..15 step 2.5 | 100 | 100 uses |
/// | fig4 | GUS and SUS counts, M ∈ {2,4,6}, K_T from 10 to 10⁴ | – | 1000 | – |
/// | fig5 | M=2, K_T=50; GUS and SUS with MRT, MSLNR, ZF, MMSE, MPE-ML, MPE joint | 0..30 step 5 | 100 | 200 uses |
/// | fig6 | the fig5 campaign, reported as expected throughput | 0..30 step 5 | 100 | 200 uses |
pub fn preset(name: &str, seed: u64) -> Result<Preset> {
    let fixed = |snr_db: Vec<f64>, realizations, symbols_per_realization, methods| CampaignSpec {
        antennas: 3,
        users: UserSetup::Fixed { users: 3 },
        snr_db,
        realizations,
        symbols_per_realization,
        frame_len: 100,
        methods,
        seed,
        mpe: MpeOptions::default(),
    };
    let both = vec![SelectionKind::Gus { alpha: AlphaRule::Adaptive }, SelectionKind::Sus { epsilon: SUS_EPSILON }];
    Ok(match name {
        "fig2" => Preset::Campaign(fixed(
            snr_grid(-5.0, 20.0, 2.5)?,
            200,
            170,
            vec![Method::Mslnr, Method::Zf, Method::Mmse, Method::MpeMl, Method::MpeJoint],
        )),
        "fig3" => Preset::Campaign(fixed(snr_grid(0.0, 15.0, 2.5)?, 100, 100, vec![Method::MpeMl, Method::MpeJoint])),
        "fig4" => Preset::SelectionSweep(SweepSpec {
            antennas: vec![2, 4, 6],
            totals: vec![10, 20, 50, 100, 200, 500, 1000, 10_000],
            methods: both,
            realizations: 1000,
            seed,
        }),
        "fig5" | "fig6" => Preset::Campaign(CampaignSpec {
            antennas: 2,
            users: UserSetup::Selected { total_users: 50, methods: both },
            snr_db: snr_grid(0.0, 30.0, 5.0)?,
            realizations: 100,
            symbols_per_realization: 200,
            frame_len: 100,
            methods: vec![Method::Mrt, Method::Mslnr, Method::Zf, Method::Mmse, Method::MpeMl, Method::MpeJoint],
            seed,
            mpe: MpeOptions::default(),
        }),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    })
}
