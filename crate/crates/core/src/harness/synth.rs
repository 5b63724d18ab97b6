//! Synthetic multi-session motor-imagery EEG.
//!
//! Each subject has one mu-rhythm source (band-limited noise around 11 Hz)
//! and `n_channels - 1` pink-noise sources. Channels are an instantaneous
//! linear mixture `A_k * sources` plus white sensor noise. During "walk"
//! trials the mu source variance is scaled by `1 - erd_depth`. Between
//! sessions the mixing matrix follows a random walk,
//! `A_k = A_1 + drift_strength * R_k` with `R_1 = 0` and Gaussian
//! increments, so later sessions drift away from earlier ones.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{Class, Session, Trial, DEFAULT_CHANNELS};
use crate::dsp::{design_bandpass, IirFilter};
use crate::error::{Error, Result};

/// Mu source band (Hz).
pub const MU_BAND: (f64, f64) = (9.0, 13.0);

/// Seconds of signal generated and discarded before every trial so filter
/// start-up transients never reach the data.
const BURN_IN_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_sessions: usize,
    pub n_trials: usize,
    pub fs: f64,
    pub n_channels: usize,
    pub duration_s: f64,
    /// Fractional mu-power attenuation during "walk", in `(0, 1)`.
    pub erd_depth: f64,
    /// Scale of the per-session mixing-matrix random walk.
    pub drift_strength: f64,
    /// Standard deviation of white sensor noise (sources have unit variance).
    pub noise_level: f64,
    /// Standard deviation of the mu source relative to the pink sources.
    pub mu_gain: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 7,
            n_sessions: 14,
            n_trials: 40,
            fs: 256.0,
            n_channels: 11,
            duration_s: 5.0,
            erd_depth: 0.35,
            drift_strength: 0.2,
            noise_level: 1.0,
            mu_gain: 1.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(self.erd_depth >= 0.0 && self.erd_depth < 1.0) {
            return fail(format!("erd_depth {} outside [0, 1)", self.erd_depth));
        }
        if !(self.drift_strength >= 0.0 && self.drift_strength.is_finite()) {
            return fail(format!("drift_strength {} must be >= 0", self.drift_strength));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return fail(format!("noise_level {} must be >= 0", self.noise_level));
        }
        if !(self.mu_gain > 0.0 && self.mu_gain.is_finite()) {
            return fail(format!("mu_gain {} must be > 0", self.mu_gain));
        }
        if self.fs.is_nan() || self.fs <= 2.0 * MU_BAND.1 {
            return fail(format!("fs {} too low for the mu band", self.fs));
        }
        if self.n_channels < 2 {
            return fail("need at least 2 channels".into());
        }
        if self.n_trials < 4 {
            return fail("need at least 4 trials per session".into());
        }
        if self.n_sessions == 0 || self.n_subjects == 0 {
            return fail("need at least one subject and one session".into());
        }
        if self.duration_s.is_nan() || self.duration_s <= 0.0 {
            return fail(format!("duration {} s", self.duration_s));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }

    fn channel_names(&self) -> Vec<String> {
        if self.n_channels == DEFAULT_CHANNELS.len() {
            DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect()
        } else {
            (1..=self.n_channels).map(|i| format!("Ch{i}")).collect()
        }
    }
}

/// Generated sessions together with the per-session mixing matrices
/// (channels x sources) that produced them.
#[derive(Debug, Clone)]
pub struct SynthSubject {
    pub sessions: Vec<Session>,
    pub mixing: Vec<DMatrix<f64>>,
}

/// Seed for subject `index` (0-based) of a study seeded with `seed`.
pub fn subject_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64 + 1)
}

pub fn synth_subject(cfg: &SynthConfig, subject_seed: u64) -> Result<Vec<Session>> {
    Ok(synth_subject_detailed(cfg, subject_seed, "S01")?.sessions)
}

/// All subjects of `cfg`, ids `S01`, `S02`, ...
pub fn synth_study(cfg: &SynthConfig) -> Result<Vec<Vec<Session>>> {
    cfg.validate()?;
    (0..cfg.n_subjects)
        .map(|s| {
            let id = format!("S{:02}", s + 1);
            Ok(synth_subject_detailed(cfg, subject_seed(cfg.seed, s), &id)?.sessions)
        })
        .collect()
}

pub fn synth_subject_detailed(cfg: &SynthConfig, subject_seed: u64, subject_id: &str) -> Result<SynthSubject> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(subject_seed);
    let n_ch = cfg.n_channels;
    let n_src = n_ch;
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let base = DMatrix::from_fn(n_ch, n_src, |_, _| gauss(&mut rng));
    let mut walk = DMatrix::<f64>::zeros(n_ch, n_src);
    let mu_filter = design_bandpass(MU_BAND.0, MU_BAND.1, cfg.fs, 2)?;
    let mu_scale = cfg.mu_gain / impulse_energy(&mu_filter).sqrt();
    let pink_scale = 1.0 / pink_variance().sqrt();
    let names = cfg.channel_names();

    let mut sessions = Vec::with_capacity(cfg.n_sessions);
    let mut mixing = Vec::with_capacity(cfg.n_sessions);
    for k in 1..=cfg.n_sessions {
        if k > 1 {
            walk += DMatrix::from_fn(n_ch, n_src, |_, _| gauss(&mut rng));
        }
        let a = &base + &walk * cfg.drift_strength;

        let mut labels: Vec<Class> = (0..cfg.n_trials)
            .map(|i| if i % 2 == 0 { Class::Walk } else { Class::Rest })
            .collect();
        labels.shuffle(&mut rng);

        let trials = labels
            .into_iter()
            .map(|label| {
                let sources = trial_sources(cfg, label, &mu_filter, mu_scale, pink_scale, &mut rng);
                let mut x = sources * a.transpose();
                for v in x.iter_mut() {
                    *v += cfg.noise_level * gauss(&mut rng);
                }
                Trial::new(label, x)
            })
            .collect::<Result<Vec<_>>>()?;
        sessions.push(Session::new(subject_id, k as u32, cfg.fs, names.clone(), trials)?);
        mixing.push(a);
    }
    Ok(SynthSubject { sessions, mixing })
}

/// time x source matrix for one trial; column 0 is the mu source.
fn trial_sources(
    cfg: &SynthConfig,
    label: Class,
    mu_filter: &IirFilter,
    mu_scale: f64,
    pink_scale: f64,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let n = cfg.n_samples();
    let burn = (BURN_IN_S * cfg.fs).round() as usize;
    let total = n + burn;
    let mut out = DMatrix::zeros(n, cfg.n_channels);
    let mut buf = vec![0.0; total];

    let erd = match label {
        Class::Walk => (1.0 - cfg.erd_depth).sqrt(),
        Class::Rest => 1.0,
    };
    for v in buf.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    mu_filter.filter_in_place(&mut buf);
    for (dst, v) in out.column_mut(0).iter_mut().zip(&buf[burn..]) {
        *dst = v * mu_scale * erd;
    }

    for src in 1..cfg.n_channels {
        let mut pink = PinkNoise::default();
        for v in buf.iter_mut() {
            *v = pink.next(StandardNormal.sample(rng));
        }
        for (dst, v) in out.column_mut(src).iter_mut().zip(&buf[burn..]) {
            *dst = v * pink_scale;
        }
    }
    out
}

fn impulse_energy(filter: &IirFilter) -> f64 {
    let mut h = vec![0.0; 8 * filter.fs as usize];
    h[0] = 1.0;
    filter.filter_in_place(&mut h);
    h.iter().map(|v| v * v).sum()
}

/// Three-pole approximation of 1/f noise driven by white noise.
#[derive(Default)]
struct PinkNoise {
    b: [f64; 3],
}

const PINK_POLES: [f64; 3] = [0.99765, 0.96300, 0.57000];
const PINK_GAINS: [f64; 3] = [0.0990460, 0.2965164, 1.0526913];
const PINK_DIRECT: f64 = 0.1848;

impl PinkNoise {
    fn next(&mut self, white: f64) -> f64 {
        let mut out = white * PINK_DIRECT;
        for i in 0..3 {
            self.b[i] = PINK_POLES[i] * self.b[i] + PINK_GAINS[i] * white;
            out += self.b[i];
        }
        out
    }
}

/// Stationary variance of [`PinkNoise`] for unit white input.
fn pink_variance() -> f64 {
    let mut var = PINK_DIRECT * PINK_DIRECT;
    for i in 0..3 {
        var += 2.0 * PINK_GAINS[i] * PINK_DIRECT;
        for j in 0..3 {
            var += PINK_GAINS[i] * PINK_GAINS[j] / (1.0 - PINK_POLES[i] * PINK_POLES[j]);
        }
    }
    var
}
