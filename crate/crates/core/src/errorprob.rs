//! Exact BPSK error probabilities of a linear precoder and their gradients.
//!
//! Every quantity enumerates all `N_b` symbol rows in ascending order so the
//! sums are bit-stable. Complex variables are differentiated as pairs of real
//! coordinates: a gradient stored as a complex number `g` means
//! `∂f/∂Re + i ∂f/∂Im`. Matrices are flattened column by column with the real
//! and imaginary part of entry `(m, l)` at `2(lM + m)` and `2(lM + m) + 1`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use libm::erfc;

use crate::model::{ChannelSet, CMatrix, ReceiveFilters, SymbolBook, SystemConfig};
use crate::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gaussian tail probability `Q(x) = ½ erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `Q'(x) = -φ(x)`.
pub fn q_derivative(x: f64) -> f64 {
    -INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `ln Q(x)`, finite even where `Q(x)` underflows.
pub fn log_q(x: f64) -> f64 {
    if x < 30.0 {
        q_function(x).ln()
    } else {
        // Asymptotic tail series; the first omitted term is below 1e-12 here.
        let r = 1.0 / (x * x);
        let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
        -0.5 * x * x - (x * (2.0 * std::f64::consts::PI).sqrt()).ln() + series.ln()
    }
}

/// `ln Σ_i c_i Q(x_i)` for positive coefficients, with `∂/∂x_i` written into `dargs`.
///
/// Working in the log domain keeps the optimizers well scaled when the error
/// probability spans many orders of magnitude across the SNR range.
pub fn log_q_mixture(args: &[f64], coeffs: &[f64], dargs: &mut [f64]) -> f64 {
    debug_assert_eq!(args.len(), coeffs.len());
    let mut max = f64::NEG_INFINITY;
    for (i, (&x, &c)) in args.iter().zip(coeffs).enumerate() {
        let t = c.ln() + log_q(x);
        dargs[i] = t;
        max = max.max(t);
    }
    let sum: f64 = dargs[..args.len()].iter().map(|t| (t - max).exp()).sum();
    let log_s = max + sum.ln();
    let ln_norm = 0.5 * (2.0 * std::f64::consts::PI).ln();
    for (i, (&x, &c)) in args.iter().zip(coeffs).enumerate() {
        dargs[i] = -(c.ln() - 0.5 * x * x - ln_norm - log_s).exp();
    }
    log_s
}

/// Per-user error probabilities together with their weighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PeBreakdown {
    pub per_user: Vec<f64>,
    pub average: f64,
    pub weights: Vec<f64>,
}

impl PeBreakdown {
    fn new(per_user: Vec<f64>, weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let average = per_user.iter().zip(weights).map(|(p, a)| p * a).sum::<f64>() / total;
        PeBreakdown { per_user, average, weights: weights.to_vec() }
    }
}

/// Flattens a complex matrix into interleaved real/imaginary parts, column-major.
pub fn to_real_vec(u: &CMatrix) -> Vec<f64> {
    u.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Inverse of [`to_real_vec`].
pub fn from_real_vec(x: &[f64], rows: usize, cols: usize) -> CMatrix {
    assert_eq!(x.len(), 2 * rows * cols, "flattened length does not match {rows}x{cols}");
    CMatrix::from_iterator(rows, cols, x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])))
}

fn check_dims(u: &CMatrix, channels: &ChannelSet, book: &SymbolBook) -> Result<()> {
    if u.nrows() != channels.num_antennas() {
        return Err(Error::Dimension(format!(
            "precoder has {} rows for {} antennas",
            u.nrows(),
            channels.num_antennas()
        )));
    }
    if u.ncols() != channels.num_users() || book.users() != u.ncols() {
        return Err(Error::Dimension(format!(
            "precoder has {} columns, {} channels, symbol book for {} users",
            u.ncols(),
            channels.num_users(),
            book.users()
        )));
    }
    Ok(())
}

/// Effective gains `G_{jl} = h_j u_l`, a K×K matrix.
pub fn effective_gains(u: &CMatrix, channels: &ChannelSet) -> Result<CMatrix> {
    if u.nrows() != channels.num_antennas() {
        return Err(Error::Dimension(format!(
            "precoder has {} rows for {} antennas",
            u.nrows(),
            channels.num_antennas()
        )));
    }
    let k = channels.num_users();
    let mut g = CMatrix::zeros(k, u.ncols());
    for j in 0..k {
        let h = channels.row(j);
        for l in 0..u.ncols() {
            g[(j, l)] = h.iter().zip(u.column(l).iter()).map(|(a, b)| a * b).sum();
        }
    }
    Ok(g)
}

/// Noiseless combined gain `Σ_l G_{jl} s_{b,l}` seen by user `j` for row `b`.
#[inline]
fn row_gain(g: &CMatrix, j: usize, signs: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, &s) in signs.iter().enumerate() {
        acc += g[(j, l)] * s;
    }
    acc
}

fn user_pe_from_gains(g: &CMatrix, j: usize, w: Complex64, book: &SymbolBook, noise_var: f64) -> Result<f64> {
    let wn = w.norm();
    if !(wn > 0.0) {
        return Err(Error::ZeroFilter(j));
    }
    let scale = SQRT_2 / (noise_var.sqrt() * wn);
    let mut acc = 0.0;
    for b in 0..book.len() {
        let row = book.row(b);
        let arg = scale * row[j] * (w * row_gain(g, j, row)).re;
        acc += q_function(arg);
    }
    let pe = acc / book.len() as f64;
    if pe.is_finite() {
        Ok(pe)
    } else {
        Err(Error::NonFinite)
    }
}

/// Error probability of user `j` under filter `w_j`.
pub fn pe_user(
    j: usize,
    w: Complex64,
    u: &CMatrix,
    channels: &ChannelSet,
    book: &SymbolBook,
    noise_var: f64,
) -> Result<f64> {
    check_dims(u, channels, book)?;
    let g = effective_gains(u, channels)?;
    user_pe_from_gains(&g, j, w, book, noise_var)
}

/// Weighted average error probability over all users.
pub fn pe_average(
    w: &ReceiveFilters,
    u: &CMatrix,
    channels: &ChannelSet,
    book: &SymbolBook,
    config: &SystemConfig,
) -> Result<PeBreakdown> {
    check_dims(u, channels, book)?;
    if w.len() != channels.num_users() || config.weights.len() != channels.num_users() {
        return Err(Error::Dimension(format!(
            "{} filters and {} weights for {} users",
            w.len(),
            config.weights.len(),
            channels.num_users()
        )));
    }
    let g = effective_gains(u, channels)?;
    let per_user = (0..channels.num_users())
        .map(|j| user_pe_from_gains(&g, j, w.get(j), book, config.noise_var))
        .collect::<Result<Vec<_>>>()?;
    Ok(PeBreakdown::new(per_user, &config.weights))
}

/// Single-user ML filter `w_j = u_j^H h_j^H / |h_j u_j|²`.
pub fn ml_filter(j: usize, u: &CMatrix, channels: &ChannelSet) -> Result<Complex64> {
    let h = channels.row(j);
    let col = u.column(j);
    let hu: Complex64 = h.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
    let scale = channels.norm_sq(j).sqrt() * col.norm();
    if !(hu.norm() > 1e-12 * scale) {
        return Err(Error::DegenerateBeam(j));
    }
    Ok(hu.conj() / hu.norm_sqr())
}

pub fn ml_filters(u: &CMatrix, channels: &ChannelSet) -> Result<ReceiveFilters> {
    if u.ncols() != channels.num_users() || u.nrows() != channels.num_antennas() {
        return Err(Error::Dimension(format!(
            "precoder is {}x{} for {} users and {} antennas",
            u.nrows(),
            u.ncols(),
            channels.num_users(),
            channels.num_antennas()
        )));
    }
    (0..channels.num_users())
        .map(|j| ml_filter(j, u, channels))
        .collect::<Result<Vec<_>>>()
        .map(ReceiveFilters)
}

/// Average error probability with every receiver using its ML filter.
pub fn pe_ml(u: &CMatrix, channels: &ChannelSet, book: &SymbolBook, noise_var: f64) -> Result<f64> {
    let config = SystemConfig::new(u.nrows(), u.ncols(), noise_var, 1.0)?;
    Ok(pe_ml_breakdown(u, channels, book, &config)?.average)
}

pub fn pe_ml_breakdown(
    u: &CMatrix,
    channels: &ChannelSet,
    book: &SymbolBook,
    config: &SystemConfig,
) -> Result<PeBreakdown> {
    check_dims(u, channels, book)?;
    let w = ml_filters(u, channels)?;
    pe_average(&w, u, channels, book, config)
}

/// Real coefficients `P_{jl} = Re{(h_j ū_j)^* h_j ū_l} / ‖h_j‖` of the bound.
///
/// The bound's Q argument for user `j`, row `b` is
/// `(√2/σ) s_{b,j} Σ_l s_{b,l} P_{jl} a_l`.
fn bound_coefficients(u_bar: &CMatrix, channels: &ChannelSet) -> Result<(CMatrix, DMatrix<f64>)> {
    let z = effective_gains(u_bar, channels)?;
    let k = channels.num_users();
    let mut p = DMatrix::zeros(k, k);
    for j in 0..k {
        let n = channels.norm_sq(j).sqrt();
        if !(n > 0.0) {
            return Err(Error::ZeroNorm(j));
        }
        for l in 0..k {
            p[(j, l)] = (z[(j, j)].conj() * z[(j, l)]).re / n;
        }
    }
    Ok((z, p))
}

fn check_bound_inputs(u_bar: &CMatrix, a: &[f64], channels: &ChannelSet, book: &SymbolBook) -> Result<()> {
    check_dims(u_bar, channels, book)?;
    if a.len() != u_bar.ncols() {
        return Err(Error::Dimension(format!("{} amplitudes for {} beams", a.len(), u_bar.ncols())));
    }
    for l in 0..u_bar.ncols() {
        if (u_bar.column(l).norm() - 1.0).abs() > 1e-8 {
            return Err(Error::NonUnitColumn(l));
        }
    }
    if a.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter("amplitudes must be nonnegative".into()));
    }
    Ok(())
}

/// Bound arguments per user and row for coefficients `p` and amplitudes `a`.
#[inline]
fn bound_arg(p: &DMatrix<f64>, a: &[f64], j: usize, signs: &[f64], kappa: f64) -> f64 {
    let mut acc = 0.0;
    for (l, &s) in signs.iter().enumerate() {
        acc += s * p[(j, l)] * a[l];
    }
    kappa * signs[j] * acc
}

/// Cauchy–Schwarz upper bound on the ML error probability for `U = Ū diag(a)`.
///
/// It dominates [`pe_ml`] whenever no row violates the positivity
/// constraints; with violations the bound is not guaranteed.
pub fn pe_ml_upper(
    u_bar: &CMatrix,
    a: &[f64],
    channels: &ChannelSet,
    book: &SymbolBook,
    noise_var: f64,
) -> Result<f64> {
    let weights = vec![1.0; u_bar.ncols()];
    Ok(pe_ml_upper_breakdown(u_bar, a, channels, book, noise_var, &weights)?.average)
}

pub fn pe_ml_upper_breakdown(
    u_bar: &CMatrix,
    a: &[f64],
    channels: &ChannelSet,
    book: &SymbolBook,
    noise_var: f64,
    weights: &[f64],
) -> Result<PeBreakdown> {
    check_bound_inputs(u_bar, a, channels, book)?;
    let (_, p) = bound_coefficients(u_bar, channels)?;
    let kappa = SQRT_2 / noise_var.sqrt();
    let k = channels.num_users();
    let per_user = (0..k)
        .map(|j| {
            let sum: f64 = book.rows().map(|row| q_function(bound_arg(&p, a, j, row, kappa))).sum();
            sum / book.len() as f64
        })
        .collect();
    Ok(PeBreakdown::new(per_user, weights))
}

/// Bound value with gradients in `Ū` (flattened) and in `a`.
///
/// The amplitude check is skipped so the optimizer may probe slightly
/// outside the nonnegative orthant; column norms are not checked either.
pub fn pe_ml_upper_grad(
    u_bar: &CMatrix,
    a: &[f64],
    channels: &ChannelSet,
    book: &SymbolBook,
    noise_var: f64,
    weights: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_dims(u_bar, channels, book)?;
    let (z, p) = bound_coefficients(u_bar, channels)?;
    let kappa = SQRT_2 / noise_var.sqrt();
    let k = channels.num_users();
    let total: f64 = weights.iter().sum();
    let nb = book.len() as f64;

    let mut value = 0.0;
    let mut d = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut pe = 0.0;
        for row in book.rows() {
            let arg = bound_arg(&p, a, j, row, kappa);
            pe += q_function(arg);
            let dq = q_derivative(arg) * kappa * row[j];
            for l in 0..k {
                d[(j, l)] += dq * row[l];
            }
        }
        value += weights[j] * pe / nb;
        for l in 0..k {
            d[(j, l)] *= weights[j] / (total * nb);
        }
    }
    value /= total;

    let grad_a = (0..k).map(|l| (0..k).map(|j| d[(j, l)] * p[(j, l)]).sum()).collect();
    let e = DMatrix::from_fn(k, k, |j, l| d[(j, l)] * a[l]);
    let grad_u = bound_chain(&z, &e, channels);
    Ok((value, to_real_vec(&grad_u), grad_a))
}

/// Pulls back `∂/∂P_{jl} = E_{jl}` through `P_{jl} = Re{z_jj^* z_jl}/‖h_j‖` and `z = HŪ`.
pub(crate) fn bound_chain(z: &CMatrix, e: &DMatrix<f64>, channels: &ChannelSet) -> CMatrix {
    let k = channels.num_users();
    let m = channels.num_antennas();
    let mut gz = CMatrix::zeros(k, k);
    for j in 0..k {
        let n = channels.norm_sq(j).sqrt();
        let mut diag = Complex64::new(0.0, 0.0);
        for l in 0..k {
            gz[(j, l)] += z[(j, j)] * (e[(j, l)] / n);
            diag += z[(j, l)] * (e[(j, l)] / n);
        }
        gz[(j, j)] += diag;
    }
    // Γ = H^H Gz
    let mut grad = CMatrix::zeros(m, k);
    for j in 0..k {
        let h = channels.row(j);
        for l in 0..k {
            let gjl = gz[(j, l)];
            if gjl == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (mm, hm) in h.iter().enumerate() {
                grad[(mm, l)] += hm.conj() * gjl;
            }
        }
    }
    grad
}

/// Bound coefficients exposed for the constrained solvers.
pub(crate) fn bound_coefficients_unchecked(u_bar: &CMatrix, channels: &ChannelSet) -> Result<(CMatrix, DMatrix<f64>)> {
    bound_coefficients(u_bar, channels)
}

pub(crate) fn combined_gain(g: &CMatrix, j: usize, signs: &[f64]) -> Complex64 {
    row_gain(g, j, signs)
}

/// Rows `b` for which user `j`'s noiseless decision statistic has the wrong sign.
pub fn error_floor_violations(
    j: usize,
    w: Complex64,
    u: &CMatrix,
    channels: &ChannelSet,
    book: &SymbolBook,
) -> Result<Vec<usize>> {
    check_dims(u, channels, book)?;
    let g = effective_gains(u, channels)?;
    Ok((0..book.len())
        .filter(|&b| {
            let row = book.row(b);
            row[j] * (w * row_gain(&g, j, row)).re < 0.0
        })
        .collect())
}

/// Weighted average Pe and its gradient in `U` (flattened), filters held fixed.
///
/// Filters enter through their phase only, so the value equals
/// [`pe_average`] for any filter magnitudes.
pub fn pe_average_grad_u(
    w: &ReceiveFilters,
    u: &CMatrix,
    channels: &ChannelSet,
    book: &SymbolBook,
    config: &SystemConfig,
) -> Result<(f64, Vec<f64>)> {
    check_dims(u, channels, book)?;
    let k = channels.num_users();
    let m = channels.num_antennas();
    let c: Vec<Complex64> = (0..k)
        .map(|j| {
            let n = w.get(j).norm();
            if n > 0.0 {
                Ok(w.get(j) / n)
            } else {
                Err(Error::ZeroFilter(j))
            }
        })
        .collect::<Result<_>>()?;
    let g = effective_gains(u, channels)?;
    let r = DMatrix::from_fn(k, k, |j, l| (c[j] * g[(j, l)]).re);
    let kappa = SQRT_2 / config.noise_var.sqrt();
    let total: f64 = config.weights.iter().sum();
    let nb = book.len() as f64;
    let ones = vec![1.0; k];

    let mut value = 0.0;
    let mut d = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut pe = 0.0;
        for row in book.rows() {
            let arg = bound_arg(&r, &ones, j, row, kappa);
            pe += q_function(arg);
            let dq = q_derivative(arg) * kappa * row[j];
            for l in 0..k {
                d[(j, l)] += dq * row[l];
            }
        }
        value += config.weights[j] * pe / nb;
        for l in 0..k {
            d[(j, l)] *= config.weights[j] / (total * nb);
        }
    }
    value /= total;

    let mut grad = CMatrix::zeros(m, k);
    for j in 0..k {
        let h = channels.row(j);
        for l in 0..k {
            let djl = d[(j, l)];
            for (mm, hm) in h.iter().enumerate() {
                grad[(mm, l)] += (c[j] * hm).conj() * djl;
            }
        }
    }
    Ok((value, to_real_vec(&grad)))
}

/// Error probability of user `j` and its gradient in `(Re w_j, Im w_j)`.
///
/// This differentiates the scale-invariant form, so the gradient is always
/// orthogonal to `w_j` itself.
pub fn pe_user_grad_w(
    j: usize,
    w: Complex64,
    u: &CMatrix,
    channels: &ChannelSet,
    book: &SymbolBook,
    noise_var: f64,
) -> Result<(f64, [f64; 2])> {
    check_dims(u, channels, book)?;
    let wn = w.norm();
    if !(wn > 0.0) {
        return Err(Error::ZeroFilter(j));
    }
    let g = effective_gains(u, channels)?;
    let kappa = SQRT_2 / noise_var.sqrt();
    let nb = book.len() as f64;
    let (mut value, mut gr, mut gi) = (0.0, 0.0, 0.0);
    for row in book.rows() {
        let gb = row_gain(&g, j, row);
        let re = (w * gb).re;
        let arg = kappa * row[j] * re / wn;
        value += q_function(arg);
        let dq = q_derivative(arg) * kappa * row[j];
        let w3 = wn * wn * wn;
        gr += dq * (gb.re / wn - re * w.re / w3);
        gi += dq * (-gb.im / wn - re * w.im / w3);
    }
    Ok((value / nb, [gr / nb, gi / nb]))
}

/// Combined gains `g_b = Σ_l h_j u_l s_{b,l}` of user `j` for the rows with `s_{b,j} = +1`.
///
/// Rows with `s_{b,j} = -1` are negations of these and add no information
/// to either the filter objective or the positivity constraints.
pub fn user_row_gains(j: usize, u: &CMatrix, channels: &ChannelSet, book: &SymbolBook) -> Result<Vec<Complex64>> {
    check_dims(u, channels, book)?;
    let g = effective_gains(u, channels)?;
    Ok(book.rows().filter(|row| row[j] > 0.0).map(|row| row_gain(&g, j, row)).collect())
}
