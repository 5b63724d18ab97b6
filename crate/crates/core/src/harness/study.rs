//! Multi-subject comparison of single-session FBCSP and msFBCSP.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::{Class, Session};
use crate::dsp::FilterBankSpec;
use crate::error::{Error, Result};
use crate::harness::eval::{accuracy, split_calibration, DEFAULT_TRAIN_FRACTION};
use crate::harness::stats::{fmt_1dp, median_range, wilcoxon_signed_rank, MedianRange, WilcoxonResult};
use crate::pipeline::{
    decide, fuse, predict_fbcsp_from_stats, select_history, train_fbcsp_from_stats, trial_stats, TrialStats,
    DEFAULT_PATTERNS_PER_CLASS, MAX_PRIOR_SESSIONS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub seed: u64,
    pub m: usize,
    pub train_fraction: f64,
    /// Earlier sessions merged into the prior model; 0 disables transfer.
    pub max_prior: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            seed: 0,
            m: DEFAULT_PATTERNS_PER_CLASS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            max_prior: MAX_PRIOR_SESSIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Msfbcsp,
    Single,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Msfbcsp => "msFBCSP",
            Method::Single => "single-session FBCSP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectReport {
    pub subject_id: String,
    pub session_indices: Vec<u32>,
    /// Accuracy in percent per session, in `session_indices` order.
    pub msfbcsp: Vec<f64>,
    pub single: Vec<f64>,
}

impl SubjectReport {
    pub fn accuracies(&self, method: Method) -> &[f64] {
        match method {
            Method::Msfbcsp => &self.msfbcsp,
            Method::Single => &self.single,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_subject: Vec<SubjectReport>,
    pub msfbcsp_pooled: MedianRange,
    pub single_pooled: MedianRange,
    /// msFBCSP against single-session over all (subject, session) pairs.
    pub wilcoxon: WilcoxonResult,
    pub options: StudyOptions,
}

impl EvalReport {
    /// Builds pooled statistics from per-subject accuracies.
    pub fn from_subjects(per_subject: Vec<SubjectReport>, options: StudyOptions) -> Result<Self> {
        let ms: Vec<f64> = per_subject.iter().flat_map(|s| s.msfbcsp.iter().copied()).collect();
        let single: Vec<f64> = per_subject.iter().flat_map(|s| s.single.iter().copied()).collect();
        Ok(EvalReport {
            msfbcsp_pooled: median_range(&ms)?,
            single_pooled: median_range(&single)?,
            wilcoxon: wilcoxon_signed_rank(&ms, &single)?,
            per_subject,
            options,
        })
    }

    pub fn pooled(&self, method: Method) -> MedianRange {
        match method {
            Method::Msfbcsp => self.msfbcsp_pooled,
            Method::Single => self.single_pooled,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Table layout: one row per session index, one column per subject,
    /// closing with a `Median (range)` row. Values have one decimal.
    pub fn to_csv(&self, method: Method) -> Result<String> {
        let mut indices: Vec<u32> = self
            .per_subject
            .iter()
            .flat_map(|s| s.session_indices.iter().copied())
            .collect();
        indices.sort_unstable();
        indices.dedup();

        let mut out = String::from("Session");
        for s in &self.per_subject {
            out.push(',');
            out.push_str(&s.subject_id);
        }
        out.push('\n');
        for k in indices {
            write!(out, "{k}").unwrap();
            for s in &self.per_subject {
                out.push(',');
                if let Some(pos) = s.session_indices.iter().position(|&i| i == k) {
                    out.push_str(&fmt_1dp(s.accuracies(method)[pos]));
                }
            }
            out.push('\n');
        }
        out.push_str("Median (range)");
        for s in &self.per_subject {
            out.push(',');
            out.push_str(&median_range(s.accuracies(method))?.display());
        }
        out.push('\n');
        Ok(out)
    }
}

/// Accuracies of both methods for one session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub msfbcsp: f64,
    pub single: f64,
}

/// Seed of the calibration split for (subject, session position).
fn cell_seed(seed: u64, subject: usize, position: usize) -> u64 {
    seed ^ ((subject as u64) << 32 | position as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93)
}

/// Evaluates session `position` of `sessions` (sorted by index, with
/// `stats[i]` the [`TrialStats`] of `sessions[i]` under `spec`). Both
/// methods share the current-session training split and test set; the
/// prior model sees the full calibration sets of earlier sessions.
pub fn evaluate_cell(
    sessions: &[Session],
    stats: &[Vec<TrialStats>],
    position: usize,
    spec: &FilterBankSpec,
    opts: &StudyOptions,
    split_seed: u64,
) -> Result<CellResult> {
    let current = &sessions[position];
    let current_stats = &stats[position];
    let split = split_calibration(current, opts.train_fraction, split_seed)?;
    let train: Vec<&TrialStats> = split.train.iter().map(|&i| &current_stats[i]).collect();
    let test: Vec<&TrialStats> = split.test.iter().map(|&i| &current_stats[i]).collect();
    let truth: Vec<Class> = test.iter().map(|t| t.label).collect();

    let single = train_fbcsp_from_stats(&train, spec, opts.m)?;
    let p_n = predict_fbcsp_from_stats(&single, &test)?;
    let single_acc = accuracy(&decide(&p_n), &truth)?;

    let history: Vec<&Session> = sessions[..position].iter().collect();
    let used = select_history(current, &history, opts.max_prior)?;
    let p_out = if used.is_empty() {
        fuse(&p_n, None)?
    } else {
        let pooled: Vec<&TrialStats> = used
            .iter()
            .flat_map(|u| {
                let i = sessions[..position]
                    .iter()
                    .position(|s| s.session_index() == u.session_index())
                    .expect("history session present");
                stats[i].iter()
            })
            .collect();
        let prior = train_fbcsp_from_stats(&pooled, spec, opts.m)?;
        let p_p = predict_fbcsp_from_stats(&prior, &test)?;
        fuse(&p_n, Some(&p_p))?
    };
    let ms_acc = accuracy(&decide(&p_out), &truth)?;
    Ok(CellResult {
        msfbcsp: ms_acc,
        single: single_acc,
    })
}

pub fn run_study(subjects: &[Vec<Session>], spec: &FilterBankSpec, opts: &StudyOptions) -> Result<EvalReport> {
    let mut sorted: Vec<Vec<Session>> = Vec::with_capacity(subjects.len());
    for (s, sessions) in subjects.iter().enumerate() {
        if sessions.is_empty() {
            return Err(Error::InvalidConfig(format!("subject {s} has no sessions")));
        }
        let mut v = sessions.clone();
        v.sort_by_key(Session::session_index);
        if v.windows(2).any(|w| w[0].session_index() == w[1].session_index()) {
            return Err(Error::InvalidSession(format!(
                "subject {} has duplicate session indices",
                v[0].subject_id()
            )));
        }
        sorted.push(v);
    }

    let sessions: Vec<(usize, usize)> = sorted
        .iter()
        .enumerate()
        .flat_map(|(s, v)| (0..v.len()).map(move |p| (s, p)))
        .collect();
    let stats_of = |&(s, p): &(usize, usize)| trial_stats(spec, sorted[s][p].trials());
    #[cfg(feature = "parallel")]
    let flat_stats: Vec<Result<Vec<TrialStats>>> = {
        use rayon::prelude::*;
        sessions.par_iter().map(stats_of).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let flat_stats: Vec<Result<Vec<TrialStats>>> = sessions.iter().map(stats_of).collect();

    let mut stats: Vec<Vec<Vec<TrialStats>>> = sorted.iter().map(|v| Vec::with_capacity(v.len())).collect();
    for (&(s, _), st) in sessions.iter().zip(flat_stats) {
        stats[s].push(st?);
    }

    let eval = |&(s, p): &(usize, usize)| {
        evaluate_cell(&sorted[s], &stats[s], p, spec, opts, cell_seed(opts.seed, s, p))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<CellResult>> = {
        use rayon::prelude::*;
        sessions.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<CellResult>> = sessions.iter().map(eval).collect();

    let mut per_subject: Vec<SubjectReport> = sorted
        .iter()
        .map(|v| SubjectReport {
            subject_id: v[0].subject_id().to_string(),
            session_indices: v.iter().map(Session::session_index).collect(),
            msfbcsp: Vec::with_capacity(v.len()),
            single: Vec::with_capacity(v.len()),
        })
        .collect();
    for (&(s, _), r) in sessions.iter().zip(results) {
        let r = r?;
        per_subject[s].msfbcsp.push(r.msfbcsp);
        per_subject[s].single.push(r.single);
    }
    EvalReport::from_subjects(per_subject, opts.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{synth_study, SynthConfig};

    fn small_study() -> (Vec<Vec<Session>>, FilterBankSpec) {
        let cfg = SynthConfig {
            n_subjects: 2,
            n_sessions: 4,
            n_trials: 12,
            n_channels: 5,
            duration_s: 3.0,
            ..Default::default()
        };
        let spec = FilterBankSpec {
            bands: vec![(8.0, 14.0), (14.0, 30.0)],
            windows: vec![(0.5, 2.5)],
            fs: cfg.fs,
            order: 2,
        };
        (synth_study(&cfg).unwrap(), spec)
    }

    #[test]
    fn first_session_rows_agree() {
        let (subjects, spec) = small_study();
        let opts = StudyOptions { m: 1, ..Default::default() };
        let r = run_study(&subjects, &spec, &opts).unwrap();
        for s in &r.per_subject {
            assert_eq!(s.session_indices, vec![1, 2, 3, 4]);
            assert_eq!(s.msfbcsp[0], s.single[0]);
        }
        assert_eq!(r, run_study(&subjects, &spec, &opts).unwrap());
    }

    #[test]
    fn no_transfer_reduces_to_single_session() {
        let (subjects, spec) = small_study();
        let opts = StudyOptions { m: 1, max_prior: 0, ..Default::default() };
        let r = run_study(&subjects, &spec, &opts).unwrap();
        for s in &r.per_subject {
            assert_eq!(s.msfbcsp, s.single);
        }
        assert_eq!(r.wilcoxon.p_value, 1.0);
    }

    #[test]
    fn session_order_does_not_matter() {
        let (mut subjects, spec) = small_study();
        let opts = StudyOptions { m: 1, ..Default::default() };
        let r = run_study(&subjects, &spec, &opts).unwrap();
        subjects[0].reverse();
        assert_eq!(r, run_study(&subjects, &spec, &opts).unwrap());
    }

    #[test]
    fn csv_layout() {
        let (subjects, spec) = small_study();
        let r = run_study(&subjects, &spec, &StudyOptions { m: 1, ..Default::default() }).unwrap();
        let csv = r.to_csv(Method::Single).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "Session,S01,S02");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("1,"));
        assert!(lines[5].starts_with("Median (range),"));
    }
}

