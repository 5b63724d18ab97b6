//! Butterworth band-pass design, causal filtering and trial windowing.
//!
//! Filters are designed from the analog low-pass Butterworth prototype:
//! band edges are pre-warped, the prototype is mapped to a band-pass with
//! `s -> (s^2 + w0^2) / (s * bw)` and then discretised with the bilinear
//! transform. The result is kept as a cascade of second-order sections,
//! each with numerator `g * (1 - z^-2)` (one zero at DC, one at Nyquist).

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One second-order section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let z2 = z_inv * z_inv;
        let num = Complex::new(self.b0, 0.0) + z_inv * self.b1 + z2 * self.b2;
        let den = Complex::new(1.0, 0.0) + z_inv * self.a1 + z2 * self.a2;
        num / den
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex<f64>; 2] {
        let disc = Complex::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        let a1 = Complex::new(-self.a1, 0.0);
        [(a1 + disc) * 0.5, (a1 - disc) * 0.5]
    }
}

/// A designed band-pass filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub sections: Vec<Biquad>,
    pub band: (f64, f64),
    pub fs: f64,
}

impl IirFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex<f64> {
        let omega = 2.0 * std::f64::consts::PI * freq_hz / self.fs;
        let z_inv = Complex::new(omega.cos(), -omega.sin());
        self.sections
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn max_pole_modulus(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Runs the cascade over `x` from zero initial state, without padding.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        for s in &self.sections {
            run_biquad(s, x);
        }
    }

    /// Samples of leading-edge reflection padding used by [`apply_filter`].
    pub fn pad_len(&self) -> usize {
        3 * (self.fs / self.band.0).ceil() as usize
    }
}

/// Digital Butterworth band-pass with `order` poles per edge (a band-pass
/// of total order `2 * order`). The -3 dB points sit exactly on `low` and
/// `high`.
pub fn design_bandpass(low: f64, high: f64, fs: f64, order: usize) -> Result<IirFilter> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidFilter(format!("sampling rate {fs}")));
    }
    if order == 0 {
        return Err(Error::InvalidFilter("order must be >= 1".into()));
    }
    if !(low > 0.0 && low < high) {
        return Err(Error::InvalidFilter(format!(
            "band edges must satisfy 0 < low < high, got ({low}, {high})"
        )));
    }
    if high >= fs / 2.0 {
        return Err(Error::InvalidFilter(format!(
            "upper edge {high} Hz is at or above Nyquist ({} Hz)",
            fs / 2.0
        )));
    }

    let fs2 = 2.0 * fs;
    let warp = |f: f64| fs2 * (std::f64::consts::PI * f / fs).tan();
    let (w1, w2) = (warp(low), warp(high));
    let bw = w2 - w1;
    let w0_sq = w1 * w2;

    // Upper-half-plane prototype poles; the rest are their conjugates.
    let n = order;
    let proto: Vec<Complex<f64>> = (0..n.div_ceil(2))
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            Complex::new(theta.cos(), theta.sin())
        })
        .collect();

    let mut analog_pole_pairs: Vec<[Complex<f64>; 2]> = Vec::with_capacity(n);
    for p in proto {
        let pb = p * bw;
        let disc = (pb * pb - Complex::new(4.0 * w0_sq, 0.0)).sqrt();
        let r1 = (pb + disc) * 0.5;
        let r2 = (pb - disc) * 0.5;
        if p.im.abs() < 1e-14 {
            analog_pole_pairs.push([r1, r2]);
        } else {
            analog_pole_pairs.push([r1, r1.conj()]);
            analog_pole_pairs.push([r2, r2.conj()]);
        }
    }

    let to_z = |s: Complex<f64>| (Complex::new(fs2, 0.0) + s) / (Complex::new(fs2, 0.0) - s);
    let mut gain = Complex::new(bw.powi(n as i32) * fs2.powi(n as i32), 0.0);
    let mut sections = Vec::with_capacity(n);
    for [p, q] in analog_pole_pairs {
        gain /= (Complex::new(fs2, 0.0) - p) * (Complex::new(fs2, 0.0) - q);
        let (zp, zq) = (to_z(p), to_z(q));
        sections.push(Biquad {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1: -(zp + zq).re,
            a2: (zp * zq).re,
        });
    }

    let gain = gain.re;
    let per_section = gain.abs().powf(1.0 / sections.len() as f64);
    for (i, s) in sections.iter_mut().enumerate() {
        let g = if i == 0 { per_section * gain.signum() } else { per_section };
        s.b0 *= g;
        s.b2 *= g;
    }

    Ok(IirFilter {
        sections,
        band: (low, high),
        fs,
    })
}

/// Filters every channel (column) causally. The leading edge is padded with
/// an odd reflection of [`IirFilter::pad_len`] samples about the first
/// sample; the padded outputs are discarded, so the output shape equals the
/// input shape.
pub fn apply_filter(filter: &IirFilter, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = samples.nrows();
    let pad = filter.pad_len();
    if n <= pad {
        return Err(Error::SignalTooShort { len: n, needed: pad });
    }
    let mut out = DMatrix::zeros(n, samples.ncols());
    let mut buf = Vec::with_capacity(n + pad);
    for c in 0..samples.ncols() {
        let col = samples.column(c);
        let x0 = col[0];
        buf.clear();
        buf.extend((1..=pad).rev().map(|i| 2.0 * x0 - col[i]));
        buf.extend(col.iter().copied());
        filter.filter_in_place(&mut buf);
        out.column_mut(c).copy_from_slice(&buf[pad..]);
    }
    Ok(out)
}

/// Transposed direct form II, zero initial state, in place.
fn run_biquad(s: &Biquad, x: &mut [f64]) {
    let (mut z1, mut z2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let input = *v;
        let y = s.b0 * input + z1;
        z1 = s.b1 * input - s.a1 * y + z2;
        z2 = s.b2 * input - s.a2 * y;
        *v = y;
    }
}

/// Frequency bands and post-onset time windows of the filter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterBankSpec {
    pub bands: Vec<(f64, f64)>,
    pub windows: Vec<(f64, f64)>,
    pub fs: f64,
    /// Butterworth order per band edge.
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    2
}

impl FilterBankSpec {
    pub fn n_cells(&self) -> usize {
        self.bands.len() * self.windows.len()
    }

    /// Checks band edges against Nyquist and windows against the trial
    /// duration (when given).
    pub fn validate(&self, trial_duration_s: Option<f64>) -> Result<()> {
        if self.bands.is_empty() || self.windows.is_empty() {
            return Err(Error::InvalidConfig(
                "filter bank needs at least one band and one window".into(),
            ));
        }
        for &(lo, hi) in &self.bands {
            if !(lo > 0.0 && lo < hi && hi < self.fs / 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "band ({lo}, {hi}) Hz invalid for fs {} Hz",
                    self.fs
                )));
            }
        }
        for &(start, end) in &self.windows {
            let too_long = trial_duration_s.is_some_and(|d| end > d + 1e-9);
            if !(start >= 0.0 && start < end) || too_long {
                return Err(Error::InvalidConfig(format!(
                    "window ({start}, {end}) s invalid"
                )));
            }
        }
        Ok(())
    }

    pub fn design(&self) -> Result<Vec<IirFilter>> {
        self.bands
            .iter()
            .map(|&(lo, hi)| design_bandpass(lo, hi, self.fs, self.order))
            .collect()
    }
}

/// Six 6 Hz bands stepping by 4 Hz across 6-32 Hz, plus the 6-32 Hz
/// broadband, over three overlapping 2 s windows.
pub fn default_filter_bank(fs: f64) -> Result<FilterBankSpec> {
    if fs.is_nan() || fs <= 64.0 {
        return Err(Error::InvalidConfig(format!(
            "default filter bank needs fs > 64 Hz, got {fs}"
        )));
    }
    let mut bands: Vec<(f64, f64)> = (0..6)
        .map(|i| {
            let lo = 6.0 + 4.0 * i as f64;
            (lo, lo + 6.0)
        })
        .collect();
    bands.push((6.0, 32.0));
    Ok(FilterBankSpec {
        bands,
        windows: vec![(0.5, 2.5), (1.5, 3.5), (2.5, 4.5)],
        fs,
        order: 2,
    })
}

/// Rows `floor(start * fs) .. floor(end * fs)` of `samples`.
pub fn extract_window(samples: &DMatrix<f64>, window: (f64, f64), fs: f64) -> Result<DMatrix<f64>> {
    let (start, end) = window;
    let n = samples.nrows();
    let oob = || Error::WindowOutOfBounds {
        start,
        end,
        len: n,
        fs,
    };
    if !(start >= 0.0 && end > start && fs > 0.0) {
        return Err(oob());
    }
    // 1e-9 absorbs products like 2.5 * 250.0 landing a hair below an integer.
    let first = (start * fs + 1e-9).floor() as usize;
    let last = (end * fs + 1e-9).floor() as usize;
    if last > n || first >= last {
        return Err(oob());
    }
    Ok(samples.rows(first, last - first).into_owned())
}
