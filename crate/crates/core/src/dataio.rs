//! Sessions of labelled calibration trials, their on-disk format, and the
//! published accuracy tables used as a reproduction fixture.
//!
//! On disk a session is a directory holding `manifest.json` plus one CSV
//! per trial:
//!
//! ```text
//! { "subject_id": "S01", "session_index": 3, "fs_hz": 256.0,
//!   "channel_names": ["F3", ...],
//!   "trials": [ { "label": "walk", "file": "trial_000.csv" }, ... ] }
//! ```
//!
//! Each trial CSV has the channel names as its header row followed by one
//! row per time sample. Values are written with the shortest representation
//! that parses back to the same `f64`, so a save/load round trip is exact.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Default montage (10-20 positions).
pub const DEFAULT_CHANNELS: [&str; 11] = [
    "F3", "Fz", "F4", "T3", "C3", "Cz", "C4", "T4", "P3", "Pz", "P4",
];

/// Two-class label. The discriminant value doubles as the column index in a
/// [`ProbabilityMatrix`](crate::ProbabilityMatrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Walk = 0,
    Rest = 1,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Walk, Class::Rest];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Class> {
        match idx {
            0 => Some(Class::Walk),
            1 => Some(Class::Rest),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Walk => "walk",
            Class::Rest => "rest",
        }
    }

    /// Accepts the Italian cue word as an alias for "walk".
    pub fn parse(label: &str) -> Result<Class> {
        match label.trim().to_ascii_lowercase().as_str() {
            "walk" | "cammina" => Ok(Class::Walk),
            "rest" => Ok(Class::Rest),
            _ => Err(Error::UnknownLabel(label.to_string())),
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One calibration trial: rows are time samples, columns are channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    label: Class,
    samples: DMatrix<f64>,
}

impl Trial {
    pub fn new(label: Class, samples: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "trial sample {} (row {}, column {})",
                pos,
                pos % samples.nrows().max(1),
                pos / samples.nrows().max(1)
            )));
        }
        Ok(Trial { label, samples })
    }

    pub fn label(&self) -> Class {
        self.label
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.samples.ncols()
    }
}

/// A validated calibration session.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    subject_id: String,
    session_index: u32,
    fs: f64,
    channel_names: Vec<String>,
    trials: Vec<Trial>,
}

impl Session {
    /// Builds a session, checking that every trial has the same shape, that
    /// the channel count matches `channel_names`, and that each class has at
    /// least two trials.
    pub fn new(
        subject_id: impl Into<String>,
        session_index: u32,
        fs: f64,
        channel_names: Vec<String>,
        trials: Vec<Trial>,
    ) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::EmptySession);
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidSession(format!("sampling rate {fs} Hz")));
        }
        if session_index == 0 {
            return Err(Error::InvalidSession("session index must be >= 1".into()));
        }
        let n_ch = channel_names.len();
        if n_ch == 0 {
            return Err(Error::InvalidSession("no channels".into()));
        }
        let n_rows = trials[0].n_samples();
        for (i, t) in trials.iter().enumerate() {
            if t.n_channels() != n_ch {
                return Err(Error::DimensionMismatch(format!(
                    "trial {i} has {} channels, session declares {n_ch}",
                    t.n_channels()
                )));
            }
            if t.n_samples() != n_rows {
                return Err(Error::DimensionMismatch(format!(
                    "trial {i} has {} samples, trial 0 has {n_rows}",
                    t.n_samples()
                )));
            }
        }
        for class in Class::ALL {
            let n = trials.iter().filter(|t| t.label == class).count();
            if n < 2 {
                return Err(Error::InvalidSession(format!(
                    "class {class} has {n} trials, need at least 2"
                )));
            }
        }
        Ok(Session {
            subject_id: subject_id.into(),
            session_index,
            fs,
            channel_names,
            trials,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn session_index(&self) -> u32 {
        self.session_index
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn n_samples(&self) -> usize {
        self.trials[0].n_samples()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn class_count(&self, class: Class) -> usize {
        self.trials.iter().filter(|t| t.label == class).count()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    subject_id: String,
    session_index: u32,
    fs_hz: f64,
    channel_names: Vec<String>,
    trials: Vec<ManifestTrial>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestTrial {
    label: String,
    file: String,
}

/// Reads a session from its manifest. Trial paths are resolved relative to
/// the manifest's directory.
pub fn load_session(manifest_path: impl AsRef<Path>) -> Result<Session> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if manifest.trials.is_empty() {
        return Err(Error::EmptySession);
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut trials = Vec::with_capacity(manifest.trials.len());
    for entry in &manifest.trials {
        let label = Class::parse(&entry.label)?;
        let samples = read_trial_csv(&base.join(&entry.file), &manifest.channel_names)?;
        trials.push(Trial::new(label, samples)?);
    }
    Session::new(
        manifest.subject_id,
        manifest.session_index,
        manifest.fs_hz,
        manifest.channel_names,
        trials,
    )
}

fn read_trial_csv(path: &Path, channels: &[String]) -> Result<DMatrix<f64>> {
    let bad = |reason: String| Error::TrialFile {
        path: path.to_path_buf(),
        reason,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.len() != channels.len() || header.iter().zip(channels).any(|(h, c)| h != c) {
        return Err(Error::DimensionMismatch(format!(
            "{}: header {:?} does not match manifest channels {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>(),
            channels
        )));
    }
    let n_ch = channels.len();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != n_ch {
            return Err(Error::DimensionMismatch(format!(
                "{}: row {} has {} fields, expected {n_ch}",
                path.display(),
                row + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: cannot parse {field:?}", row + 1)))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{} row {}", path.display(), row + 1)));
            }
            values.push(v);
        }
    }
    let n_rows = values.len() / n_ch.max(1);
    Ok(DMatrix::from_row_slice(n_rows, n_ch, &values))
}

/// Writes `session` into `dir` and returns the manifest path. An existing
/// non-empty directory is an error unless `overwrite` is set.
pub fn save_session(session: &Session, dir: impl AsRef<Path>, overwrite: bool) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty && !overwrite {
            return Err(Error::AlreadyExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut entries = Vec::with_capacity(session.trials.len());
    for (i, trial) in session.trials.iter().enumerate() {
        let file = format!("trial_{i:03}.csv");
        write_trial_csv(&dir.join(&file), &session.channel_names, &trial.samples)?;
        entries.push(ManifestTrial {
            label: trial.label.as_str().to_string(),
            file,
        });
    }
    let manifest = Manifest {
        subject_id: session.subject_id.clone(),
        session_index: session.session_index,
        fs_hz: session.fs,
        channel_names: session.channel_names.clone(),
        trials: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_trial_csv(path: &Path, channels: &[String], samples: &DMatrix<f64>) -> Result<()> {
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::io(path, err),
        other => Error::TrialFile {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer.write_record(channels).map_err(io_err)?;
    let mut row = Vec::with_capacity(samples.ncols());
    for r in 0..samples.nrows() {
        row.clear();
        row.extend((0..samples.ncols()).map(|c| samples[(r, c)].to_string()));
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub const N_TABLE_SESSIONS: usize = 14;
pub const N_TABLE_SUBJECTS: usize = 7;

/// Accuracy tables (percent), rows = sessions 1..=14, columns = subjects 1..=7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperTables {
    pub msfbcsp: [[f64; N_TABLE_SUBJECTS]; N_TABLE_SESSIONS],
    pub single: [[f64; N_TABLE_SUBJECTS]; N_TABLE_SESSIONS],
}

impl PaperTables {
    /// 1-based lookup into the multi-session table.
    pub fn msfbcsp_at(&self, session: usize, subject: usize) -> f64 {
        self.msfbcsp[session - 1][subject - 1]
    }

    /// 1-based lookup into the single-session table.
    pub fn single_at(&self, session: usize, subject: usize) -> f64 {
        self.single[session - 1][subject - 1]
    }

    pub fn msfbcsp_column(&self, subject: usize) -> Vec<f64> {
        self.msfbcsp.iter().map(|row| row[subject - 1]).collect()
    }

    pub fn single_column(&self, subject: usize) -> Vec<f64> {
        self.single.iter().map(|row| row[subject - 1]).collect()
    }

    /// All 98 values in (session, subject) row-major order.
    pub fn msfbcsp_flat(&self) -> Vec<f64> {
        self.msfbcsp.iter().flatten().copied().collect()
    }

    pub fn single_flat(&self) -> Vec<f64> {
        self.single.iter().flatten().copied().collect()
    }
}

const MSFBCSP_TABLE: [[f64; 7]; 14] = [
    [52.9, 41.2, 72.2, 62.5, 82.4, 82.4, 63.2],
    [87.5, 93.8, 88.9, 93.8, 88.2, 100.0, 91.3],
    [94.1, 88.2, 89.5, 81.8, 75.0, 93.8, 87.5],
    [76.5, 84.2, 93.8, 90.0, 72.2, 76.5, 66.7],
    [75.0, 94.1, 95.7, 75.0, 76.5, 76.5, 94.1],
    [77.8, 93.8, 68.8, 93.8, 95.0, 68.8, 76.5],
    [77.8, 94.1, 87.5, 81.3, 82.4, 93.8, 82.6],
    [70.6, 75.0, 64.7, 76.5, 68.8, 81.3, 77.8],
    [75.0, 85.0, 100.0, 75.0, 81.3, 76.5, 82.4],
    [68.8, 100.0, 62.5, 87.5, 93.8, 81.3, 61.3],
    [87.5, 77.8, 68.8, 75.0, 90.0, 76.5, 75.0],
    [62.5, 81.3, 82.6, 93.8, 89.5, 75.0, 58.8],
    [76.5, 82.4, 92.6, 93.8, 75.0, 88.2, 62.5],
    [64.7, 75.0, 68.8, 87.5, 84.2, 62.5, 73.7],
];

const SINGLE_TABLE: [[f64; 7]; 14] = [
    [52.9, 41.2, 72.2, 62.5, 82.4, 82.4, 63.2],
    [43.8, 62.5, 61.1, 81.3, 70.6, 82.4, 47.8],
    [35.3, 58.8, 73.7, 54.5, 62.5, 56.3, 56.3],
    [47.1, 52.6, 81.3, 80.0, 72.2, 52.9, 61.1],
    [46.4, 52.9, 65.2, 68.8, 52.9, 58.8, 52.9],
    [61.1, 68.8, 43.8, 68.8, 65.0, 75.0, 52.9],
    [44.4, 64.7, 87.5, 75.0, 70.6, 43.8, 69.6],
    [41.2, 56.3, 41.2, 64.7, 56.3, 56.3, 50.0],
    [37.5, 65.0, 56.3, 87.5, 50.0, 82.4, 52.9],
    [56.3, 80.0, 50.0, 81.3, 68.8, 68.8, 54.8],
    [37.5, 61.1, 50.0, 56.3, 50.0, 52.9, 62.5],
    [25.0, 75.0, 65.2, 100.0, 68.4, 50.0, 47.1],
    [29.4, 76.5, 74.1, 68.8, 68.8, 64.7, 62.5],
    [58.8, 62.5, 53.1, 56.3, 57.9, 68.8, 73.7],
];

/// Printed per-subject "Median (range)" bottom rows: (median, min, max).
pub const MSFBCSP_SUMMARY_ROW: [(f64, f64, f64); 7] = [
    (75.7, 52.9, 94.1),
    (84.6, 41.2, 100.0),
    (85.1, 62.5, 100.0),
    (84.7, 62.5, 93.8),
    (82.4, 68.8, 95.0),
    (78.9, 62.5, 100.0),
    (75.7, 58.8, 94.1),
];

pub const SINGLE_SUMMARY_ROW: [(f64, f64, f64); 7] = [
    (44.1, 25.0, 61.1),
    (62.5, 41.2, 80.0),
    (63.2, 41.2, 87.5),
    (68.8, 54.5, 100.0),
    (66.7, 50.0, 82.4),
    (61.8, 43.8, 82.4),
    (55.5, 47.1, 73.7),
];

/// Pooled results quoted in the text: (median, min, max).
pub const MSFBCSP_POOLED: (f64, f64, f64) = (81.3, 41.2, 100.0);
pub const SINGLE_POOLED: (f64, f64, f64) = (61.1, 25.0, 100.0);

/// The two published 14x7 accuracy tables, stored exactly as printed.
pub fn paper_tables() -> PaperTables {
    PaperTables {
        msfbcsp: MSFBCSP_TABLE,
        single: SINGLE_TABLE,
    }
}
