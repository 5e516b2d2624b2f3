//! System model of the BPSK MISO broadcast channel.
//!
//! One transmitter with `M` antennas serves `K` single-antenna users. User `j`
//! sees the row channel `h_j` (1×M), the transmitter sends `x = U s` with the
//! precoder `U` (M×K) and the BPSK symbol vector `s`, and receiver `j` applies
//! a complex filter `w_j` before slicing the real part.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense complex matrix used for stacked channels and precoders.
pub type CMatrix = DMatrix<Complex64>;

/// Largest user count accepted for exact symbol enumeration (`N_b = 4096`).
pub const MAX_USERS: usize = 12;

/// Broadcast channel state: one row of `M` complex gains per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    rows: Vec<Vec<Complex64>>,
    norms_sq: Vec<f64>,
}

impl ChannelSet {
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidParameter("a channel set needs at least one user".into()));
        };
        let antennas = first.len();
        if antennas == 0 {
            return Err(Error::InvalidParameter("channels need at least one antenna".into()));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.len() != antennas {
                return Err(Error::Dimension(format!(
                    "channel {j} has {} entries, expected {antennas}",
                    row.len()
                )));
            }
            if row.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("channel {j} has non-finite entries")));
            }
        }
        let norms_sq = rows.iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect();
        Ok(ChannelSet { rows, norms_sq })
    }

    /// Builds a channel set from a K×M matrix whose rows are the user channels.
    pub fn from_matrix(h: &CMatrix) -> Result<Self> {
        let rows = (0..h.nrows())
            .map(|j| h.row(j).iter().copied().collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn num_users(&self) -> usize {
        self.rows.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.rows[j]
    }

    /// Cached `‖h_j‖²`.
    pub fn norm_sq(&self, j: usize) -> f64 {
        self.norms_sq[j]
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norms_sq
    }

    /// Stacked K×M channel matrix `H`.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.num_users(), self.num_antennas(), |j, m| self.rows[j][m])
    }

    /// Channels of the listed users, in the listed order.
    pub fn subset(&self, users: &[usize]) -> Result<ChannelSet> {
        if let Some(&bad) = users.iter().find(|&&j| j >= self.num_users()) {
            return Err(Error::InvalidParameter(format!(
                "user index {bad} out of range for {} users",
                self.num_users()
            )));
        }
        ChannelSet::from_rows(users.iter().map(|&j| self.rows[j].clone()).collect())
    }

    /// Inner product `h_j h_l^H`.
    pub fn inner(&self, j: usize, l: usize) -> Complex64 {
        self.rows[j]
            .iter()
            .zip(&self.rows[l])
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// Writes the channels as `user_index,antenna_index,re,im` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let entries = self.rows.iter().enumerate().flat_map(|(j, row)| {
            row.iter().enumerate().map(move |(m, z)| ComplexEntry {
                user_index: j,
                antenna_index: m,
                re: z.re,
                im: z.im,
            })
        });
        write_entries(writer, entries)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let grid = read_entries(reader)?;
        ChannelSet::from_rows(grid)
    }
}

/// Draws `users` i.i.d. CSCG channels of unit variance over `antennas` antennas.
///
/// Real and imaginary parts are independent `N(0, 1/2)`, so `E|h|² = 1`.
/// The output is a pure function of `seed`.
pub fn generate_channels(seed: u64, users: usize, antennas: usize) -> ChannelSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let rows = (0..users)
        .map(|_| {
            (0..antennas)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(scale * re, scale * im)
                })
                .collect()
        })
        .collect();
    ChannelSet::from_rows(rows).expect("generated channels are well formed")
}

/// All `2^K` BPSK symbol tuples in binary counting order.
///
/// Row `b` assigns `+1` to user `j` when bit `j` of `b` is set and `-1`
/// otherwise, so row `N_b - 1 - b` is always the negation of row `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBook {
    users: usize,
    signs: Vec<f64>,
}

impl SymbolBook {
    pub fn new(users: usize) -> Result<Self> {
        if users == 0 {
            return Err(Error::InvalidParameter("at least one user is required".into()));
        }
        if users > MAX_USERS {
            return Err(Error::Capacity { users, max: MAX_USERS });
        }
        let rows = 1usize << users;
        let mut signs = Vec::with_capacity(rows * users);
        for b in 0..rows {
            for j in 0..users {
                signs.push(if (b >> j) & 1 == 1 { 1.0 } else { -1.0 });
            }
        }
        Ok(SymbolBook { users, signs })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// `N_b = 2^K`.
    pub fn len(&self) -> usize {
        1 << self.users
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `N_pb = 2^(K-1)`: tuples with one user's symbol pinned.
    pub fn half_len(&self) -> usize {
        1 << (self.users - 1)
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.signs[b * self.users..(b + 1) * self.users]
    }

    /// `s_{b,j}`.
    pub fn sign(&self, b: usize, j: usize) -> f64 {
        self.signs[b * self.users + j]
    }

    /// Index of the row holding `-s_b`.
    pub fn negation(&self, b: usize) -> usize {
        self.len() - 1 - b
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.signs.chunks_exact(self.users)
    }
}

/// Enumerates the `2^K` symbol tuples of `users` BPSK users.
pub fn enumerate_symbols(users: usize) -> Result<SymbolBook> {
    SymbolBook::new(users)
}

/// Link-level parameters of one precoding problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub antennas: usize,
    pub users: usize,
    /// Noise variance `σ_z²` (power).
    pub noise_var: f64,
    /// Total transmit power `τ`.
    pub power: f64,
    /// Per-user priorities `α_j`.
    pub weights: Vec<f64>,
}

impl SystemConfig {
    pub fn new(antennas: usize, users: usize, noise_var: f64, power: f64) -> Result<Self> {
        let config = SystemConfig { antennas, users, noise_var, power, weights: vec![1.0; users] };
        config.validate()?;
        Ok(config)
    }

    /// Configuration at `snr_db = 10 log10(τ/σ²)` with `τ = 1`.
    pub fn at_snr_db(antennas: usize, users: usize, snr_db: f64) -> Result<Self> {
        Self::new(antennas, users, noise_var_for_snr_db(snr_db, 1.0), 1.0)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_var.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::InvalidParameter("antennas and users must be positive".into()));
        }
        if self.users > MAX_USERS {
            return Err(Error::Capacity { users: self.users, max: MAX_USERS });
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {} must be positive", self.noise_var)));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::InvalidParameter(format!("transmit power {} must be positive", self.power)));
        }
        if self.weights.len() != self.users {
            return Err(Error::Dimension(format!(
                "{} weights for {} users",
                self.weights.len(),
                self.users
            )));
        }
        if self.weights.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("user weights must be positive".into()));
        }
        Ok(())
    }

    /// Checks that `channels` and `u` match this configuration.
    pub(crate) fn check_problem(&self, channels: &ChannelSet) -> Result<()> {
        if channels.num_users() != self.users || channels.num_antennas() != self.antennas {
            return Err(Error::Dimension(format!(
                "channels are {}x{}, configuration expects {}x{}",
                channels.num_users(),
                channels.num_antennas(),
                self.users,
                self.antennas
            )));
        }
        Ok(())
    }
}

/// `σ² = τ / 10^(snr_db/10)`.
pub fn noise_var_for_snr_db(snr_db: f64, power: f64) -> f64 {
    power / 10f64.powf(snr_db / 10.0)
}

/// Receive filter coefficients `w_j`, one per active user.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveFilters(pub Vec<Complex64>);

impl ReceiveFilters {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> Complex64 {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }
}

/// Noiseless receiver output `w_j h_j U s_b`.
pub fn receiver_output(h: &[Complex64], u: &CMatrix, symbols: &[f64], w: Complex64) -> Result<Complex64> {
    if h.len() != u.nrows() {
        return Err(Error::Dimension(format!(
            "channel has {} antennas, precoder has {} rows",
            h.len(),
            u.nrows()
        )));
    }
    if symbols.len() != u.ncols() {
        return Err(Error::Dimension(format!(
            "{} symbols for a precoder with {} columns",
            symbols.len(),
            u.ncols()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, &s) in symbols.iter().enumerate() {
        let hu: Complex64 = h.iter().zip(u.column(l).iter()).map(|(a, b)| a * b).sum();
        acc += hu * s;
    }
    Ok(w * acc)
}

/// BPSK slicer on the real part of the filter output. Zero maps to `+1`.
pub fn detect(y_real: f64) -> f64 {
    if y_real < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ComplexEntry {
    user_index: usize,
    antenna_index: usize,
    re: f64,
    im: f64,
}

fn write_entries<W: Write>(writer: W, entries: impl Iterator<Item = ComplexEntry>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for entry in entries {
        wtr.serialize(entry)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `(user, antenna)`-indexed complex entries into a dense user-major grid.
fn read_entries<R: Read>(reader: R) -> Result<Vec<Vec<Complex64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["user_index", "antenna_index", "re", "im"];
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header {:?}, found {:?}",
            expected,
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut entries = Vec::new();
    for record in rdr.deserialize() {
        let entry: ComplexEntry = record?;
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(Error::Parse("no entries".into()));
    }
    let users = entries.iter().map(|e| e.user_index).max().unwrap_or(0) + 1;
    let antennas = entries.iter().map(|e| e.antenna_index).max().unwrap_or(0) + 1;
    let mut grid: Vec<Vec<Option<Complex64>>> = vec![vec![None; antennas]; users];
    for e in entries {
        let slot = &mut grid[e.user_index][e.antenna_index];
        if slot.is_some() {
            return Err(Error::Parse(format!(
                "duplicate entry for user {} antenna {}",
                e.user_index, e.antenna_index
            )));
        }
        *slot = Some(Complex64::new(e.re, e.im));
    }
    grid.into_iter()
        .enumerate()
        .map(|(j, row)| {
            row.into_iter()
                .enumerate()
                .map(|(m, z)| z.ok_or_else(|| Error::Parse(format!("missing entry for user {j} antenna {m}"))))
                .collect()
        })
        .collect()
}

/// Writes a precoder as `user_index,antenna_index,re,im`, one row per entry of `u_l`.
pub fn write_precoder_csv<W: Write>(u: &CMatrix, writer: W) -> Result<()> {
    let entries = (0..u.ncols()).flat_map(|l| {
        (0..u.nrows()).map(move |m| ComplexEntry { user_index: l, antenna_index: m, re: u[(m, l)].re, im: u[(m, l)].im })
    });
    write_entries(writer, entries)
}

pub fn read_precoder_csv<R: Read>(reader: R) -> Result<CMatrix> {
    let grid = read_entries(reader)?;
    let users = grid.len();
    let antennas = grid[0].len();
    Ok(CMatrix::from_fn(antennas, users, |m, l| grid[l][m]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn channels_are_deterministic_in_seed() {
        let a = generate_channels(42, 3, 2);
        let b = generate_channels(42, 3, 2);
        assert_eq!(a, b);
        assert_eq!(a.num_users(), 3);
        assert_eq!(a.num_antennas(), 2);
        assert_ne!(a, generate_channels(43, 3, 2));
    }

    #[test]
    fn channel_power_is_unit_on_average() {
        let h = generate_channels(7, 10_000, 4);
        let samples: Vec<f64> = (0..h.num_users()).flat_map(|j| h.row(j).iter().map(|z| z.norm_sqr())).collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        // |h|² is exponential with unit mean and unit variance.
        let sigma = (1.0 / n).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean}");
        let re_var = (0..h.num_users()).flat_map(|j| h.row(j).iter().map(|z| z.re * z.re)).sum::<f64>() / n;
        assert!((re_var - 0.5).abs() < 0.02, "real-part variance {re_var}");
    }

    #[test]
    fn single_scalar_channel() {
        let h = generate_channels(1, 1, 1);
        assert!(h.row(0)[0].re.is_finite() && h.row(0)[0].im.is_finite());
        assert!((h.norm_sq(0) - h.row(0)[0].norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn symbol_book_small_cases() {
        let b1 = enumerate_symbols(1).unwrap();
        assert_eq!(b1.len(), 2);
        assert_eq!(b1.row(0), &[-1.0]);
        assert_eq!(b1.row(1), &[1.0]);

        let b2 = enumerate_symbols(2).unwrap();
        let rows: Vec<Vec<f64>> = b2.rows().map(|r| r.to_vec()).collect();
        assert_eq!(rows, vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(b2.half_len(), 2);
    }

    #[test]
    fn symbol_book_negation_closure() {
        let book = enumerate_symbols(3).unwrap();
        assert_eq!(book.len(), 8);
        for b in 0..book.len() {
            let neg: Vec<f64> = book.row(b).iter().map(|s| -s).collect();
            assert_eq!(book.row(book.negation(b)), neg.as_slice());
        }
        let mut distinct: Vec<Vec<i8>> = book.rows().map(|r| r.iter().map(|&s| s as i8).collect()).collect();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn symbol_book_rejects_oversized() {
        assert!(matches!(enumerate_symbols(13), Err(Error::Capacity { users: 13, max: 12 })));
        assert_eq!(enumerate_symbols(12).unwrap().len(), 4096);
    }

    #[test]
    fn receiver_output_cases() {
        let zero = CMatrix::zeros(1, 1);
        assert_eq!(receiver_output(&[c(1.0, 0.0)], &zero, &[1.0], c(1.0, 0.0)).unwrap(), c(0.0, 0.0));

        let one = CMatrix::from_element(1, 1, c(1.0, 0.0));
        assert_eq!(receiver_output(&[c(1.0, 0.0)], &one, &[1.0], c(1.0, 0.0)).unwrap(), c(1.0, 0.0));

        let h = generate_channels(3, 1, 3);
        let u = CMatrix::from_fn(3, 2, |m, l| c(m as f64 - 0.5, 0.3 * l as f64 + 0.1));
        let w = c(0.4, -1.2);
        let s = [1.0, -1.0];
        let y = receiver_output(h.row(0), &u, &s, w).unwrap();
        let y2 = receiver_output(h.row(0), &(&u * c(2.0, 0.0)), &s, w).unwrap();
        assert!((y2 - y * 2.0).norm() < 1e-14);
        let yneg = receiver_output(h.row(0), &u, &[-1.0, 1.0], w).unwrap();
        assert_eq!(yneg, -y);

        assert!(matches!(receiver_output(h.row(0), &CMatrix::zeros(2, 2), &s, w), Err(Error::Dimension(_))));
        assert!(matches!(receiver_output(h.row(0), &u, &[1.0], w), Err(Error::Dimension(_))));
    }

    #[test]
    fn detection_rule() {
        assert_eq!(detect(0.3), 1.0);
        assert_eq!(detect(-1e-9), -1.0);
        assert_eq!(detect(0.0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(3, 3, 0.1, 1.0).is_ok());
        assert!(SystemConfig::new(3, 0, 0.1, 1.0).is_err());
        assert!(SystemConfig::new(3, 3, 0.0, 1.0).is_err());
        assert!(SystemConfig::new(3, 3, 0.1, -1.0).is_err());
        assert!(matches!(SystemConfig::new(3, 13, 0.1, 1.0), Err(Error::Capacity { .. })));
        assert!(SystemConfig::new(3, 2, 0.1, 1.0).unwrap().with_weights(vec![1.0, 0.0]).is_err());
        let cfg = SystemConfig::at_snr_db(2, 2, 10.0).unwrap();
        assert!((cfg.noise_var - 0.1).abs() < 1e-15);
    }

    #[test]
    fn channel_csv_round_trip() {
        let h = generate_channels(11, 4, 3);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("user_index,antenna_index,re,im\n"));
        let back = ChannelSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn channel_csv_rejects_bad_input() {
        let missing_header = "0,0,1.0,0.0\n";
        assert!(ChannelSet::read_csv(missing_header.as_bytes()).is_err());
        let hole = "user_index,antenna_index,re,im\n0,0,1,0\n1,1,1,0\n";
        assert!(matches!(ChannelSet::read_csv(hole.as_bytes()), Err(Error::Parse(_))));
        let dup = "user_index,antenna_index,re,im\n0,0,1,0\n0,0,2,0\n";
        assert!(matches!(ChannelSet::read_csv(dup.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn precoder_csv_round_trip() {
        let u = CMatrix::from_fn(3, 2, |m, l| c(m as f64 * 0.25, -(l as f64) - 0.125));
        let mut buf = Vec::new();
        write_precoder_csv(&u, &mut buf).unwrap();
        assert_eq!(read_precoder_csv(buf.as_slice()).unwrap(), u);
    }
}
