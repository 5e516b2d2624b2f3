//! Precoder constructions.
//!
//! Two minimum-probability-of-error designs built on alternating minimization
//! plus four classical baselines:
//!
//! - [`mpe_ml`]: receivers use the single-user ML filter; the transmitter
//!   minimizes the Cauchy–Schwarz bound on the ML error probability,
//!   alternating between beam directions `Ū` and amplitudes `a`.
//! - [`mpe_joint`]: the precoder `U` and the receive filters `w` are optimized
//!   jointly, alternating between a convex problem in `U` and one convex
//!   problem per receive filter.
//! - [`zf`], [`mmse`], [`mslnr`], [`mrt`]: closed-form baselines, all paired
//!   with ML receive filters.
//!
//! Every subproblem keeps the noiseless decision statistics nonnegative
//! (no error floor) and works on the logarithm of the error probability, which
//! has the same minimizers and stays well scaled at high SNR. A subproblem
//! result replaces the current iterate only if it is feasible and does not
//! increase the objective, so the recorded traces are monotone.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::errorprob::{
    bound_chain, bound_coefficients_unchecked, combined_gain, effective_gains, from_real_vec, log_q_mixture,
    ml_filters, q_function, to_real_vec,
};
use crate::model::{enumerate_symbols, ChannelSet, CMatrix, ReceiveFilters, SymbolBook, SystemConfig};
use crate::optim::{minimize, ConstraintSet, Problem, SolveReport, SolverOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Zf,
    Mmse,
    Mslnr,
    Mrt,
    MpeMl,
    MpeJoint,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Zf, Method::Mmse, Method::Mslnr, Method::Mrt, Method::MpeMl, Method::MpeJoint];

    pub fn name(self) -> &'static str {
        match self {
            Method::Zf => "zf",
            Method::Mmse => "mmse",
            Method::Mslnr => "mslnr",
            Method::Mrt => "mrt",
            Method::MpeMl => "mpe-ml",
            Method::MpeJoint => "mpe-joint",
        }
    }

    pub fn is_mpe(self) -> bool {
        matches!(self, Method::MpeMl | Method::MpeJoint)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown precoder `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderResult {
    pub u: CMatrix,
    pub w: ReceiveFilters,
    pub method: Method,
    pub outer_iterations: usize,
    /// Objective after every outer iteration: the ML bound for MPE-ML, the
    /// weighted average error probability for the joint design.
    pub pe_trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpeOptions {
    /// Outer loop stops once an iteration improves the objective by at most this.
    pub pe_threshold: f64,
    pub max_outer: usize,
    /// Starts tried for the first (non-convex) direction update of MPE-ML.
    pub multi_starts: usize,
    pub solver: SolverOptions,
    /// Seed of the random initialization.
    pub seed: u64,
}

impl Default for MpeOptions {
    fn default() -> Self {
        MpeOptions {
            pe_threshold: 1e-8,
            max_outer: 200,
            multi_starts: 4,
            solver: SolverOptions::default(),
            seed: 0,
        }
    }
}

/// Builds the precoder of `method` for the given users.
pub fn build(method: Method, channels: &ChannelSet, config: &SystemConfig, opts: &MpeOptions) -> Result<PrecoderResult> {
    match method {
        Method::Zf => zf(channels, config),
        Method::Mmse => mmse(channels, config),
        Method::Mslnr => mslnr(channels, config),
        Method::Mrt => mrt(channels, config),
        Method::MpeMl => mpe_ml(channels, config, opts),
        Method::MpeJoint => mpe_joint(channels, config, opts),
    }
}

fn check_channels(channels: &ChannelSet, config: &SystemConfig) -> Result<()> {
    config.validate()?;
    config.check_problem(channels)?;
    if let Some(j) = (0..channels.num_users()).find(|&j| !(channels.norm_sq(j) > 0.0)) {
        return Err(Error::ZeroNorm(j));
    }
    Ok(())
}

fn baseline(u: CMatrix, method: Method, channels: &ChannelSet) -> Result<PrecoderResult> {
    let w = ml_filters(&u, channels)?;
    Ok(PrecoderResult { u, w, method, outer_iterations: 0, pe_trace: Vec::new(), converged: true })
}

fn scale_columns(u: &mut CMatrix, amplitude: f64) {
    for mut col in u.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col *= Complex64::new(amplitude / n, 0.0);
        }
    }
}

/// Zero forcing `H^H (H H^H)^{-1}` with equal per-user power `τ/K`.
pub fn zf(channels: &ChannelSet, config: &SystemConfig) -> Result<PrecoderResult> {
    check_channels(channels, config)?;
    let (k, m) = (channels.num_users(), channels.num_antennas());
    if k > m {
        return Err(Error::TooManyUsers { users: k, antennas: m });
    }
    let h = channels.matrix();
    let sv = h.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient);
    }
    let gram = &h * h.adjoint();
    let inv = gram.try_inverse().ok_or(Error::RankDeficient)?;
    let mut u = h.adjoint() * inv;
    scale_columns(&mut u, (config.power / k as f64).sqrt());
    baseline(u, Method::Zf, channels)
}

/// Regularized inversion `H^H (H H^H + (Kσ²/τ) I)^{-1}`, scaled to total power `τ`.
pub fn mmse(channels: &ChannelSet, config: &SystemConfig) -> Result<PrecoderResult> {
    check_channels(channels, config)?;
    let k = channels.num_users();
    let h = channels.matrix();
    let reg = k as f64 * config.noise_var / config.power;
    let gram = &h * h.adjoint() + CMatrix::identity(k, k) * Complex64::new(reg, 0.0);
    let inv = gram.try_inverse().ok_or(Error::RankDeficient)?;
    let mut u = h.adjoint() * inv;
    let norm = u.norm();
    u *= Complex64::new(config.power.sqrt() / norm, 0.0);
    baseline(u, Method::Mmse, channels)
}

/// Maximum signal-to-leakage-plus-noise beams with equal power `τ/K`.
///
/// The generalized eigenproblem of the pair `(h_j^H h_j, B_j)` has rank one,
/// so its dominant eigenvector is `B_j^{-1} h_j^H` with
/// `B_j = Σ_{l≠j} h_l^H h_l + (Kσ²/τ) I`.
pub fn mslnr(channels: &ChannelSet, config: &SystemConfig) -> Result<PrecoderResult> {
    check_channels(channels, config)?;
    let (k, m) = (channels.num_users(), channels.num_antennas());
    let h = channels.matrix();
    let reg = k as f64 * config.noise_var / config.power;
    let full = h.adjoint() * &h;
    let mut u = CMatrix::zeros(m, k);
    for j in 0..k {
        let hj = h.row(j).adjoint();
        let b = &full - &hj * hj.adjoint() + CMatrix::identity(m, m) * Complex64::new(reg, 0.0);
        let chol = b.cholesky().ok_or(Error::RankDeficient)?;
        u.set_column(j, &chol.solve(&hj));
    }
    scale_columns(&mut u, (config.power / k as f64).sqrt());
    baseline(u, Method::Mslnr, channels)
}

/// Normalized conjugate beamforming `u_j = h_j^H √(τ / Σ_l ‖h_l‖²)`.
pub fn mrt(channels: &ChannelSet, config: &SystemConfig) -> Result<PrecoderResult> {
    check_channels(channels, config)?;
    let total: f64 = channels.norms_sq().iter().sum();
    let scale = (config.power / total).sqrt();
    let u = channels.matrix().adjoint() * Complex64::new(scale, 0.0);
    baseline(u, Method::Mrt, channels)
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

fn random_unit_columns(rng: &mut impl Rng, m: usize, k: usize) -> CMatrix {
    let mut u = CMatrix::from_fn(m, k, |_, _| complex_gaussian(rng));
    scale_columns(&mut u, 1.0);
    u
}

fn normalize_columns(u: &mut CMatrix) {
    for (l, mut col) in u.column_iter_mut().enumerate() {
        let n = col.norm();
        if n > 0.0 {
            col /= Complex64::new(n, 0.0);
        } else {
            col.fill(Complex64::new(0.0, 0.0));
            let idx = l % col.len();
            col[idx] = Complex64::new(1.0, 0.0);
        }
    }
}

/// Rows of the symbol book with `s_{b,j} = +1`, per user.
///
/// Negating a row leaves every Q argument and every positivity constraint
/// unchanged, so these rows carry all the information.
fn positive_rows(book: &SymbolBook) -> Vec<Vec<usize>> {
    (0..book.users())
        .map(|j| (0..book.len()).filter(|&b| book.sign(b, j) > 0.0).collect())
        .collect()
}

/// Shared state of the ML-bound subproblems.
struct BoundContext<'a> {
    channels: &'a ChannelSet,
    book: SymbolBook,
    rows: Vec<Vec<usize>>,
    kappa: f64,
    /// Mixture coefficient of each (user, row) term: `α_j / (A N_pb)`.
    coeffs: Vec<f64>,
}

impl<'a> BoundContext<'a> {
    fn new(channels: &'a ChannelSet, config: &SystemConfig) -> Result<Self> {
        let book = enumerate_symbols(channels.num_users())?;
        let rows = positive_rows(&book);
        let total: f64 = config.weights.iter().sum();
        let coeffs = rows
            .iter()
            .enumerate()
            .flat_map(|(j, r)| std::iter::repeat_n(config.weights[j] / (total * r.len() as f64), r.len()))
            .collect();
        Ok(BoundContext { channels, book, rows, kappa: SQRT_2 / config.noise_var.sqrt(), coeffs })
    }

    fn k(&self) -> usize {
        self.channels.num_users()
    }

    /// Constraint sums `c_{jb} = Σ_l s_{b,l} P_{jl} a_l`, user-major.
    fn sums(&self, p: &DMatrix<f64>, a: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for (j, rows) in self.rows.iter().enumerate() {
            for &b in rows {
                let s = self.book.row(b);
                out.push((0..self.k()).map(|l| s[l] * p[(j, l)] * a[l]).sum());
            }
        }
        out
    }

    /// `ln` of the bound and `∂/∂c_{jb}` (already including κ).
    fn log_value(&self, sums: &[f64], dsums: &mut [f64]) -> f64 {
        let args: Vec<f64> = sums.iter().map(|c| self.kappa * c).collect();
        let v = log_q_mixture(&args, &self.coeffs, dsums);
        dsums.iter_mut().for_each(|d| *d *= self.kappa);
        v
    }

    /// `Σ_b d_{jb} s_{b,l}` for every (j, l).
    fn pull_rows(&self, d: &[f64]) -> DMatrix<f64> {
        let k = self.k();
        let mut out = DMatrix::zeros(k, k);
        let mut idx = 0;
        for (j, rows) in self.rows.iter().enumerate() {
            for &b in rows {
                let s = self.book.row(b);
                for l in 0..k {
                    out[(j, l)] += d[idx] * s[l];
                }
                idx += 1;
            }
        }
        out
    }

    fn coefficients(&self, u_bar: &CMatrix) -> (CMatrix, DMatrix<f64>) {
        bound_coefficients_unchecked(u_bar, self.channels).expect("channel norms checked upfront")
    }

    /// Evaluates a (`Ū`, `a`) pair: log bound, linear bound, feasibility.
    fn assess(&self, u_bar: &CMatrix, a: &[f64]) -> Assessment {
        let (_, p) = self.coefficients(u_bar);
        let sums = self.sums(&p, a);
        let mut d = vec![0.0; sums.len()];
        let log_value = self.log_value(&sums, &mut d);
        let linear = sums.iter().zip(&self.coeffs).map(|(c, w)| w * q_function(self.kappa * c)).sum();
        Assessment { log_value, linear, feasible: sums.iter().all(|&c| c >= 0.0) }
    }
}

#[derive(Debug, Clone, Copy)]
struct Assessment {
    log_value: f64,
    linear: f64,
    feasible: bool,
}

impl Assessment {
    /// Feasible and no worse than `current` (any feasible point beats an infeasible one).
    fn improves_on(&self, current: &Assessment) -> bool {
        self.feasible && (!current.feasible || (self.log_value <= current.log_value && self.linear <= current.linear))
    }
}

/// Beam directions `Ū` with amplitudes fixed; spheres on every column.
struct DirectionProblem<'c, 'a> {
    ctx: &'c BoundContext<'a>,
    a: Vec<f64>,
    m: usize,
}

impl Problem for DirectionProblem<'_, '_> {
    fn dim(&self) -> usize {
        2 * self.m * self.ctx.k()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let u_bar = from_real_vec(x, self.m, self.ctx.k());
        let (z, p) = self.ctx.coefficients(&u_bar);
        let sums = self.ctx.sums(&p, &self.a);
        let mut d = vec![0.0; sums.len()];
        let v = self.ctx.log_value(&sums, &mut d);
        let e = self.ctx.pull_rows(&d);
        let e = DMatrix::from_fn(e.nrows(), e.ncols(), |j, l| e[(j, l)] * self.a[l]);
        grad.copy_from_slice(&to_real_vec(&bound_chain(&z, &e, self.ctx.channels)));
        v
    }

    fn num_inequalities(&self) -> usize {
        self.ctx.coeffs.len()
    }

    fn inequalities(&self, x: &[f64], out: &mut [f64]) {
        let u_bar = from_real_vec(x, self.m, self.ctx.k());
        let (_, p) = self.ctx.coefficients(&u_bar);
        out.copy_from_slice(&self.ctx.sums(&p, &self.a));
    }

    fn inequality_vjp(&self, x: &[f64], mult: &[f64], out: &mut [f64]) {
        let u_bar = from_real_vec(x, self.m, self.ctx.k());
        let (z, _) = self.ctx.coefficients(&u_bar);
        let e = self.ctx.pull_rows(mult);
        let e = DMatrix::from_fn(e.nrows(), e.ncols(), |j, l| e[(j, l)] * self.a[l]);
        for (o, g) in out.iter_mut().zip(to_real_vec(&bound_chain(&z, &e, self.ctx.channels))) {
            *o += g;
        }
    }
}

/// Amplitudes `a` with directions fixed: a convex problem.
struct AmplitudeProblem<'c, 'a> {
    ctx: &'c BoundContext<'a>,
    p: DMatrix<f64>,
}

impl Problem for AmplitudeProblem<'_, '_> {
    fn dim(&self) -> usize {
        self.ctx.k()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let sums = self.ctx.sums(&self.p, x);
        let mut d = vec![0.0; sums.len()];
        let v = self.ctx.log_value(&sums, &mut d);
        let e = self.ctx.pull_rows(&d);
        for (l, g) in grad.iter_mut().enumerate() {
            *g = (0..self.ctx.k()).map(|j| e[(j, l)] * self.p[(j, l)]).sum();
        }
        v
    }
}

impl AmplitudeProblem<'_, '_> {
    /// Positivity constraints (linear in `a`), then `a ≥ 0`.
    fn constraints(&self, power: f64) -> ConstraintSet {
        let k = self.ctx.k();
        let mut cs = ConstraintSet::new().ball(0, k, power);
        for (j, rows) in self.ctx.rows.iter().enumerate() {
            for &b in rows {
                let s = self.ctx.book.row(b);
                cs = cs.halfspace((0..k).map(|l| s[l] * self.p[(j, l)]).collect(), 0.0);
            }
        }
        for l in 0..k {
            let mut e = vec![0.0; k];
            e[l] = 1.0;
            cs = cs.halfspace(e, 0.0);
        }
        cs
    }
}

/// Minimization over the beam directions for fixed amplitudes (non-convex).
pub fn ml_direction_step(
    channels: &ChannelSet,
    config: &SystemConfig,
    u_bar0: &CMatrix,
    a: &[f64],
    solver: &SolverOptions,
) -> Result<(CMatrix, SolveReport)> {
    check_channels(channels, config)?;
    let ctx = BoundContext::new(channels, config)?;
    direction_step(&ctx, u_bar0, a, solver)
}

fn direction_step(ctx: &BoundContext, u_bar0: &CMatrix, a: &[f64], solver: &SolverOptions) -> Result<(CMatrix, SolveReport)> {
    let (m, k) = (ctx.channels.num_antennas(), ctx.k());
    let problem = DirectionProblem { ctx, a: a.to_vec(), m };
    let mut cs = ConstraintSet::new();
    for l in 0..k {
        cs = cs.sphere(2 * m * l, 2 * m);
    }
    let (x, report) = minimize(&problem, &to_real_vec(u_bar0), &cs, solver)?;
    let mut u_bar = from_real_vec(&x, m, k);
    normalize_columns(&mut u_bar);
    Ok((u_bar, report))
}

/// Minimization over the amplitudes for fixed directions (convex).
pub fn ml_amplitude_step(
    channels: &ChannelSet,
    config: &SystemConfig,
    u_bar: &CMatrix,
    a0: &[f64],
    solver: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    check_channels(channels, config)?;
    let ctx = BoundContext::new(channels, config)?;
    amplitude_step(&ctx, u_bar, a0, config.power, solver)
}

fn amplitude_step(ctx: &BoundContext, u_bar: &CMatrix, a0: &[f64], power: f64, solver: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    let (_, p) = ctx.coefficients(u_bar);
    let problem = AmplitudeProblem { ctx, p };
    let cs = problem.constraints(power);
    let (mut a, report) = minimize(&problem, a0, &cs, solver)?;
    a.iter_mut().for_each(|x| *x = x.max(0.0));
    Ok((a, report))
}

/// MPE precoding for ML receivers: alternating minimization of the ML bound.
///
/// Starts from random unit directions and equal amplitudes `√(τ/K)`. The first
/// direction update is tried from several starts (the current directions,
/// the matched directions `h_j^H/‖h_j‖`, then fresh random ones).
pub fn mpe_ml(channels: &ChannelSet, config: &SystemConfig, opts: &MpeOptions) -> Result<PrecoderResult> {
    check_channels(channels, config)?;
    let (m, k) = (channels.num_antennas(), channels.num_users());
    let ctx = BoundContext::new(channels, config)?;
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);

    let mut u_bar = random_unit_columns(&mut rng, m, k);
    let mut a = vec![(config.power / k as f64).sqrt(); k];
    let mut current = ctx.assess(&u_bar, &a);

    let (mut p1, mut p2) = (1.0, 0.5);
    let mut trace = Vec::new();
    let mut iterations = 0;
    while p1 - p2 > opts.pe_threshold && iterations < opts.max_outer {
        iterations += 1;
        p1 = p2;

        let starts = if iterations == 1 { opts.multi_starts.max(1) } else { 1 };
        for s in 0..starts {
            let start = match s {
                0 => u_bar.clone(),
                1 => {
                    let mut mf = channels.matrix().adjoint();
                    normalize_columns(&mut mf);
                    mf
                }
                _ => random_unit_columns(&mut rng, m, k),
            };
            let (cand, _) = direction_step(&ctx, &start, &a, &opts.solver)?;
            let assessed = ctx.assess(&cand, &a);
            if assessed.improves_on(&current) {
                u_bar = cand;
                current = assessed;
            }
        }

        let (cand, _) = amplitude_step(&ctx, &u_bar, &a, config.power, &opts.solver)?;
        let assessed = ctx.assess(&u_bar, &cand);
        if assessed.improves_on(&current) {
            a = cand;
            current = assessed;
        }

        if !current.feasible {
            return Err(Error::InfeasibleStart(starts));
        }
        p2 = current.linear;
        trace.push(p2);
        log::trace!("mpe-ml iteration {iterations}: bound {p2:.6e}");
    }

    let converged = p1 - p2 <= opts.pe_threshold;
    let u = CMatrix::from_fn(m, k, |mm, l| u_bar[(mm, l)] * a[l]);
    let w = ml_filters(&u, channels)?;
    Ok(PrecoderResult { u, w, method: Method::MpeMl, outer_iterations: iterations, pe_trace: trace, converged })
}

/// Shared state of the joint design's precoder subproblem.
struct JointContext<'a> {
    channels: &'a ChannelSet,
    book: SymbolBook,
    rows: Vec<Vec<usize>>,
    kappa: f64,
    coeffs: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> JointContext<'a> {
    fn new(channels: &'a ChannelSet, config: &SystemConfig) -> Result<Self> {
        let book = enumerate_symbols(channels.num_users())?;
        let rows = positive_rows(&book);
        let total: f64 = config.weights.iter().sum();
        let coeffs = rows
            .iter()
            .enumerate()
            .flat_map(|(j, r)| std::iter::repeat_n(config.weights[j] / (total * r.len() as f64), r.len()))
            .collect();
        Ok(JointContext {
            channels,
            book,
            rows,
            kappa: SQRT_2 / config.noise_var.sqrt(),
            coeffs,
            weights: config.weights.clone(),
        })
    }

    fn k(&self) -> usize {
        self.channels.num_users()
    }

    /// Noiseless statistics `Σ_l s_{b,l} Re{c_j h_j u_l}` for unit filters `c`.
    fn sums(&self, u: &CMatrix, c: &[Complex64]) -> Vec<f64> {
        let g = effective_gains(u, self.channels).expect("dimensions checked upfront");
        let mut out = Vec::with_capacity(self.coeffs.len());
        for (j, rows) in self.rows.iter().enumerate() {
            for &b in rows {
                out.push((c[j] * combined_gain(&g, j, self.book.row(b))).re);
            }
        }
        out
    }

    fn assess(&self, u: &CMatrix, c: &[Complex64]) -> Assessment {
        let sums = self.sums(u, c);
        let args: Vec<f64> = sums.iter().map(|s| self.kappa * s).collect();
        let mut d = vec![0.0; args.len()];
        let log_value = log_q_mixture(&args, &self.coeffs, &mut d);
        let linear = args.iter().zip(&self.coeffs).map(|(x, w)| w * q_function(*x)).sum();
        Assessment { log_value, linear, feasible: sums.iter().all(|&s| s >= 0.0) }
    }

    /// Per-user error probability of user `j` with unit filter `c_j`.
    fn user_pe(&self, g: &CMatrix, j: usize, c: Complex64) -> f64 {
        let rows = &self.rows[j];
        rows.iter()
            .map(|&b| q_function(self.kappa * (c * combined_gain(g, j, self.book.row(b))).re))
            .sum::<f64>()
            / rows.len() as f64
    }
}

/// The precoder subproblem with filters fixed (convex in `U`).
struct PrecoderProblem<'c, 'a> {
    ctx: &'c JointContext<'a>,
    c: Vec<Complex64>,
    m: usize,
}

impl Problem for PrecoderProblem<'_, '_> {
    fn dim(&self) -> usize {
        2 * self.m * self.ctx.k()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.ctx.k();
        let u = from_real_vec(x, self.m, k);
        let sums = self.ctx.sums(&u, &self.c);
        let args: Vec<f64> = sums.iter().map(|s| self.ctx.kappa * s).collect();
        let mut d = vec![0.0; args.len()];
        let v = log_q_mixture(&args, &self.ctx.coeffs, &mut d);
        // D_{jl} = κ Σ_b d_{jb} s_{b,l}; ∇_U = (diag(c) H)^H D.
        let mut dm = DMatrix::<f64>::zeros(k, k);
        let mut idx = 0;
        for (j, rows) in self.ctx.rows.iter().enumerate() {
            for &b in rows {
                let s = self.ctx.book.row(b);
                for l in 0..k {
                    dm[(j, l)] += self.ctx.kappa * d[idx] * s[l];
                }
                idx += 1;
            }
        }
        let mut gu = CMatrix::zeros(self.m, k);
        for j in 0..k {
            let h = self.ctx.channels.row(j);
            for l in 0..k {
                for (mm, hm) in h.iter().enumerate() {
                    gu[(mm, l)] += (self.c[j] * hm).conj() * dm[(j, l)];
                }
            }
        }
        grad.copy_from_slice(&to_real_vec(&gu));
        v
    }
}

impl PrecoderProblem<'_, '_> {
    fn constraints(&self, power: f64) -> ConstraintSet {
        let k = self.ctx.k();
        let mut cs = ConstraintSet::new().ball(0, 2 * self.m * k, power);
        for (j, rows) in self.ctx.rows.iter().enumerate() {
            let h = self.ctx.channels.row(j);
            for &b in rows {
                let s = self.ctx.book.row(b);
                let mut coeffs = vec![0.0; 2 * self.m * k];
                for l in 0..k {
                    for (mm, hm) in h.iter().enumerate() {
                        let a = self.c[j] * hm * s[l];
                        coeffs[2 * (l * self.m + mm)] = a.re;
                        coeffs[2 * (l * self.m + mm) + 1] = -a.im;
                    }
                }
                cs = cs.halfspace(coeffs, 0.0);
            }
        }
        cs
    }
}

fn unit_filters(w: &ReceiveFilters) -> Result<Vec<Complex64>> {
    w.as_slice()
        .iter()
        .enumerate()
        .map(|(j, &x)| if x.norm() > 0.0 { Ok(x / x.norm()) } else { Err(Error::ZeroFilter(j)) })
        .collect()
}

/// Minimization over the precoder with the receive filters fixed (convex).
pub fn joint_precoder_step(
    channels: &ChannelSet,
    config: &SystemConfig,
    w: &ReceiveFilters,
    u0: &CMatrix,
    solver: &SolverOptions,
) -> Result<(CMatrix, SolveReport)> {
    check_channels(channels, config)?;
    if w.len() != channels.num_users() {
        return Err(Error::Dimension(format!("{} filters for {} users", w.len(), channels.num_users())));
    }
    let ctx = JointContext::new(channels, config)?;
    precoder_step(&ctx, &unit_filters(w)?, u0, config.power, solver)
}

fn precoder_step(ctx: &JointContext, c: &[Complex64], u0: &CMatrix, power: f64, solver: &SolverOptions) -> Result<(CMatrix, SolveReport)> {
    let (m, k) = (ctx.channels.num_antennas(), ctx.k());
    if u0.nrows() != m || u0.ncols() != k {
        return Err(Error::Dimension(format!("start is {}x{}, expected {m}x{k}", u0.nrows(), u0.ncols())));
    }
    let problem = PrecoderProblem { ctx, c: c.to_vec(), m };
    let cs = problem.constraints(power);
    let (x, report) = minimize(&problem, &to_real_vec(u0), &cs, solver)?;
    let mut u = from_real_vec(&x, m, k);
    // Scaling preserves every positivity constraint, so clip power exactly.
    let n2 = u.norm_squared();
    if n2 > power {
        u *= Complex64::new((power / n2).sqrt(), 0.0);
    }
    Ok((u, report))
}

/// The per-user filter problem: maximize the decision statistics inside `|w| ≤ 1`.
struct FilterProblem {
    /// `(Re g_b, -Im g_b)` so that `Re{w g_b} = v_b · (Re w, Im w)`.
    v: Vec<[f64; 2]>,
    kappa: f64,
    coeffs: Vec<f64>,
}

impl Problem for FilterProblem {
    fn dim(&self) -> usize {
        2
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let args: Vec<f64> = self.v.iter().map(|v| self.kappa * (v[0] * x[0] + v[1] * x[1])).collect();
        let mut d = vec![0.0; args.len()];
        let value = log_q_mixture(&args, &self.coeffs, &mut d);
        grad[0] = 0.0;
        grad[1] = 0.0;
        for (v, di) in self.v.iter().zip(&d) {
            grad[0] += self.kappa * di * v[0];
            grad[1] += self.kappa * di * v[1];
        }
        value
    }
}

/// Direction in the middle of the feasible arc of filters, or `None` if every
/// direction leaves some decision statistic negative.
fn feasible_arc_center(v: &[[f64; 2]]) -> Option<f64> {
    let mut angles: Vec<f64> = v
        .iter()
        .filter(|p| p[0] != 0.0 || p[1] != 0.0)
        .map(|p| p[1].atan2(p[0]))
        .collect();
    if angles.is_empty() {
        return Some(0.0);
    }
    angles.sort_by(f64::total_cmp);
    // The statistics fit in an arc of width 2π − gap; any filter within
    // π/2 of all of them keeps them nonnegative.
    let n = angles.len();
    let (mut gap, mut after_gap) = (angles[0] + 2.0 * PI - angles[n - 1], angles[0]);
    for i in 1..n {
        let g = angles[i] - angles[i - 1];
        if g > gap {
            gap = g;
            after_gap = angles[i];
        }
    }
    if gap < PI - 1e-12 {
        return None;
    }
    Some(after_gap + (2.0 * PI - gap) / 2.0)
}

/// Minimum-error filter of user `j`, returned with unit modulus.
pub fn optimize_filter(j: usize, u: &CMatrix, channels: &ChannelSet, book: &SymbolBook, noise_var: f64) -> Result<Complex64> {
    optimize_filter_from(j, None, u, channels, book, noise_var, &SolverOptions::default())
}

/// As [`optimize_filter`], warm-started at `w0` when it is strictly feasible.
pub fn optimize_filter_from(
    j: usize,
    w0: Option<Complex64>,
    u: &CMatrix,
    channels: &ChannelSet,
    book: &SymbolBook,
    noise_var: f64,
    solver: &SolverOptions,
) -> Result<Complex64> {
    if j >= channels.num_users() {
        return Err(Error::InvalidParameter(format!("user {j} out of range")));
    }
    let gains = crate::errorprob::user_row_gains(j, u, channels, book)?;
    let v: Vec<[f64; 2]> = gains.iter().map(|g| [g.re, -g.im]).collect();
    let center = feasible_arc_center(&v).ok_or(Error::FloorUnavoidable(j))?;
    let start = match w0 {
        Some(w) if w.norm() > 0.0 && v.iter().all(|p| p[0] * w.re + p[1] * w.im > 0.0) => {
            let w = w / w.norm();
            [w.re, w.im]
        }
        _ => [center.cos(), center.sin()],
    };
    let problem = FilterProblem {
        kappa: SQRT_2 / noise_var.sqrt(),
        coeffs: vec![1.0 / v.len() as f64; v.len()],
        v: v.clone(),
    };
    let mut cs = ConstraintSet::new().ball(0, 2, 1.0);
    for p in &v {
        cs = cs.halfspace(p.to_vec(), 0.0);
    }
    let (x, _) = minimize(&problem, &start, &cs, solver)?;
    let w = Complex64::new(x[0], x[1]);
    let n = w.norm();
    Ok(if n > 0.0 { w / n } else { Complex64::from_polar(1.0, center) })
}

/// Joint transmit precoder and receive filter design.
///
/// Starts from a random Gaussian precoder scaled to power `τ` and one random
/// unit filter shared by all users, then alternates between the convex
/// precoder problem and the per-user filter problems.
pub fn mpe_joint(channels: &ChannelSet, config: &SystemConfig, opts: &MpeOptions) -> Result<PrecoderResult> {
    check_channels(channels, config)?;
    let (m, k) = (channels.num_antennas(), channels.num_users());
    let ctx = JointContext::new(channels, config)?;
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);

    let mut u = CMatrix::from_fn(m, k, |_, _| complex_gaussian(&mut rng));
    u *= Complex64::new(config.power.sqrt() / u.norm(), 0.0);
    let w0 = complex_gaussian(&mut rng);
    let mut c = vec![w0 / w0.norm(); k];
    let total: f64 = ctx.weights.iter().sum();
    let mut current = ctx.assess(&u, &c);

    let mut p1 = vec![1.0; k];
    let mut p2 = vec![0.5; k];
    let gap = |p1: &[f64], p2: &[f64]| -> f64 {
        p1.iter().zip(p2).zip(&ctx.weights).map(|((a, b), w)| w * (a - b)).sum::<f64>() / total
    };
    let mut trace = Vec::new();
    let mut iterations = 0;
    while gap(&p1, &p2) > opts.pe_threshold && iterations < opts.max_outer {
        iterations += 1;
        p1.clone_from(&p2);

        let (cand, _) = precoder_step(&ctx, &c, &u, config.power, &opts.solver)?;
        let assessed = ctx.assess(&cand, &c);
        if assessed.improves_on(&current) {
            u = cand;
        }

        let g = effective_gains(&u, channels)?;
        for j in 0..k {
            let cand = optimize_filter_from(j, Some(c[j]), &u, channels, &ctx.book, config.noise_var, &opts.solver)?;
            let old_feasible = ctx.rows[j].iter().all(|&b| (c[j] * combined_gain(&g, j, ctx.book.row(b))).re >= 0.0);
            let new_feasible = ctx.rows[j].iter().all(|&b| (cand * combined_gain(&g, j, ctx.book.row(b))).re >= 0.0);
            if new_feasible && (!old_feasible || ctx.user_pe(&g, j, cand) <= ctx.user_pe(&g, j, c[j])) {
                c[j] = cand;
            }
        }
        current = ctx.assess(&u, &c);
        if !current.feasible {
            return Err(Error::InfeasibleStart(1));
        }
        for (j, p) in p2.iter_mut().enumerate() {
            *p = ctx.user_pe(&g, j, c[j]);
        }
        let avg = p2.iter().zip(&ctx.weights).map(|(p, w)| p * w).sum::<f64>() / total;
        trace.push(avg);
        log::trace!("mpe-joint iteration {iterations}: pe {avg:.6e}");
    }

    let converged = gap(&p1, &p2) <= opts.pe_threshold;
    Ok(PrecoderResult {
        u,
        w: ReceiveFilters(c),
        method: Method::MpeJoint,
        outer_iterations: iterations,
        pe_trace: trace,
        converged,
    })
}

/// Dominant eigenvector of `B^{-1} A` for Hermitian `A`, `B` by power iteration.
#[cfg(test)]
fn generalized_dominant(a: &CMatrix, b: &CMatrix) -> nalgebra::DVector<Complex64> {
    let binv = b.clone().try_inverse().unwrap();
    let op = binv * a;
    let mut v = nalgebra::DVector::from_fn(a.nrows(), |i, _| Complex64::new(1.0 + i as f64, 0.5));
    for _ in 0..500 {
        v = &op * v;
        let n = v.norm();
        v /= Complex64::new(n, 0.0);
    }
    v
}
