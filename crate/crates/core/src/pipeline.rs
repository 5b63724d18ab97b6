//! Single-session FBCSP and the multi-session (msFBCSP) model.
//!
//! An FBCSP model band-pass filters each trial through every band of the
//! filter bank, cuts each time window, applies the cell's CSP filters and
//! concatenates the log-variance features (band-major, window-minor) into
//! one vector for the LDA.
//!
//! msFBCSP trains two such models: one on the current calibration trials
//! (`P_n`) and one on the pooled calibration trials of up to four earlier
//! sessions (`P_p`). The fused output is `P_n` alone for the first session
//! and the element-wise mean `(P_p + P_n) / 2` afterwards.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::csp::{centered_scatter, covariance_from_scatter, features_from_scatter, train_csp, CspModel};
use crate::dataio::{Class, Session, Trial};
use crate::dsp::{apply_filter, extract_window, FilterBankSpec, IirFilter};
use crate::error::{Error, Result};
use crate::lda::{predict_proba, train_lda, LdaModel, ProbabilityMatrix};

pub const MODEL_FILE_VERSION: u64 = 1;

/// Earlier sessions merged into the prior model.
pub const MAX_PRIOR_SESSIONS: usize = 4;

pub const DEFAULT_PATTERNS_PER_CLASS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbcspModel {
    pub spec: FilterBankSpec,
    /// Spatial patterns per class.
    pub m: usize,
    /// One cell per (band, window), band-major.
    pub csp_cells: Vec<CspModel>,
    pub lda: LdaModel,
    pub class_order: [Class; 2],
}

impl FbcspModel {
    pub fn n_channels(&self) -> usize {
        self.csp_cells[0].n_channels()
    }

    pub fn feature_dim(&self) -> usize {
        self.spec.n_cells() * 2 * self.m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsFbcspModel {
    /// Trained on the current session; produces `P_n`.
    pub current: FbcspModel,
    /// Trained on merged earlier sessions; produces `P_p`.
    pub prior: Option<FbcspModel>,
    /// Fusion index: 1 when no prior model exists, otherwise the current
    /// session index.
    pub k: u32,
    pub history_sessions_used: Vec<u32>,
}

impl MsFbcspModel {
    /// Wraps a plain FBCSP model (k = 1, no prior).
    pub fn single(current: FbcspModel) -> Self {
        MsFbcspModel {
            current,
            prior: None,
            k: 1,
            history_sessions_used: Vec::new(),
        }
    }
}

fn check_trials(trials: &[Trial]) -> Result<(usize, usize)> {
    let first = trials
        .first()
        .ok_or_else(|| Error::Degenerate("no trials".into()))?;
    let shape = (first.n_samples(), first.n_channels());
    for (i, t) in trials.iter().enumerate() {
        if (t.n_samples(), t.n_channels()) != shape {
            return Err(Error::DimensionMismatch(format!(
                "trial {i} is {}x{}, trial 0 is {}x{}",
                t.n_samples(),
                t.n_channels(),
                shape.0,
                shape.1
            )));
        }
    }
    Ok(shape)
}

/// Centred scatter matrices of one trial for every (band, window) cell of a
/// filter bank. CSP training and CSP features depend on a trial only
/// through these, so they can be computed once and reused across models
/// that share the filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub label: Class,
    /// Indexed by cell, band-major.
    pub scatters: Vec<DMatrix<f64>>,
}

pub fn trial_stats(spec: &FilterBankSpec, trials: &[Trial]) -> Result<Vec<TrialStats>> {
    if trials.is_empty() {
        return Ok(Vec::new());
    }
    let (n_samples, _) = check_trials(trials)?;
    spec.validate(Some(n_samples as f64 / spec.fs))?;
    let filters = spec.design()?;
    trials.iter().map(|t| stats_for(spec, &filters, t)).collect()
}

fn stats_for(spec: &FilterBankSpec, filters: &[IirFilter], trial: &Trial) -> Result<TrialStats> {
    let mut scatters = Vec::with_capacity(spec.n_cells());
    for filter in filters {
        let filtered = apply_filter(filter, trial.samples())?;
        for &window in &spec.windows {
            let segment = extract_window(&filtered, window, spec.fs)?;
            if segment.nrows() < 2 {
                return Err(Error::Degenerate(format!("window {window:?} is shorter than 2 samples")));
            }
            scatters.push(centered_scatter(&segment));
        }
    }
    Ok(TrialStats {
        label: trial.label(),
        scatters,
    })
}

/// Trains the single-session FBCSP model on `trials`.
pub fn train_fbcsp(trials: &[Trial], spec: &FilterBankSpec, m: usize) -> Result<FbcspModel> {
    check_trials(trials)?;
    let stats = trial_stats(spec, trials)?;
    train_fbcsp_from_stats(&stats.iter().collect::<Vec<_>>(), spec, m)
}

/// [`train_fbcsp`] from precomputed [`TrialStats`] (which must come from
/// the same `spec`).
pub fn train_fbcsp_from_stats(stats: &[&TrialStats], spec: &FilterBankSpec, m: usize) -> Result<FbcspModel> {
    for class in Class::ALL {
        if !stats.iter().any(|t| t.label == class) {
            return Err(Error::Degenerate(format!("no {class} trials in training set")));
        }
    }
    check_stats(stats, spec.n_cells())?;

    let mut csp_cells = Vec::with_capacity(spec.n_cells());
    for cell in 0..spec.n_cells() {
        let (mut c0, mut c1) = (Vec::new(), Vec::new());
        for t in stats {
            let cov = covariance_from_scatter(&t.scatters[cell])?;
            match t.label {
                Class::Walk => c0.push(cov),
                Class::Rest => c1.push(cov),
            }
        }
        let band = spec.bands[cell / spec.windows.len()];
        let window = spec.windows[cell % spec.windows.len()];
        csp_cells.push(train_csp(&c0, &c1, m)?.with_cell(band, window));
    }

    let features = feature_matrix(&csp_cells, stats)?;
    let labels: Vec<Class> = stats.iter().map(|t| t.label).collect();
    let lda = train_lda(&features, &labels)?;
    Ok(FbcspModel {
        spec: spec.clone(),
        m,
        csp_cells,
        lda,
        class_order: [Class::Walk, Class::Rest],
    })
}

fn check_stats(stats: &[&TrialStats], n_cells: usize) -> Result<()> {
    if stats.iter().any(|t| t.scatters.len() != n_cells) {
        return Err(Error::DimensionMismatch(format!(
            "trial statistics do not cover the {n_cells} filter-bank cells"
        )));
    }
    Ok(())
}

fn feature_matrix(cells: &[CspModel], stats: &[&TrialStats]) -> Result<DMatrix<f64>> {
    let width: usize = cells.iter().map(CspModel::n_filters).sum();
    let mut features = DMatrix::zeros(stats.len(), width);
    for (row, t) in stats.iter().enumerate() {
        let mut col = 0;
        for (cell, scatter) in cells.iter().zip(&t.scatters) {
            for v in features_from_scatter(cell, scatter)? {
                features[(row, col)] = v;
                col += 1;
            }
        }
    }
    Ok(features)
}

/// Concatenated FBCSP features, one row per trial.
pub fn fbcsp_features(model: &FbcspModel, trials: &[Trial]) -> Result<DMatrix<f64>> {
    if let Some(t) = trials.first() {
        if t.n_channels() != model.n_channels() {
            return Err(Error::DimensionMismatch(format!(
                "trials have {} channels, model expects {}",
                t.n_channels(),
                model.n_channels()
            )));
        }
    }
    let stats = trial_stats(&model.spec, trials)?;
    fbcsp_features_from_stats(model, &stats.iter().collect::<Vec<_>>())
}

pub fn fbcsp_features_from_stats(model: &FbcspModel, stats: &[&TrialStats]) -> Result<DMatrix<f64>> {
    check_stats(stats, model.csp_cells.len())?;
    feature_matrix(&model.csp_cells, stats)
}

pub fn predict_fbcsp(model: &FbcspModel, trials: &[Trial]) -> Result<ProbabilityMatrix> {
    let features = fbcsp_features(model, trials)?;
    predict_proba(&model.lda, &features)
}

pub fn predict_fbcsp_from_stats(model: &FbcspModel, stats: &[&TrialStats]) -> Result<ProbabilityMatrix> {
    predict_proba(&model.lda, &fbcsp_features_from_stats(model, stats)?)
}

/// Trains msFBCSP on every trial of `current`.
pub fn train_msfbcsp(
    current: &Session,
    history: &[Session],
    spec: &FilterBankSpec,
    m: usize,
) -> Result<MsFbcspModel> {
    let history: Vec<&Session> = history.iter().collect();
    train_msfbcsp_on(current, current.trials(), &history, spec, m, MAX_PRIOR_SESSIONS)
}

/// Trains msFBCSP with the current model fitted on `current_trials` (a
/// subset of `current`, e.g. a calibration split). The prior model pools
/// all trials of the `max_prior` most recent history sessions.
pub fn train_msfbcsp_on(
    current: &Session,
    current_trials: &[Trial],
    history: &[&Session],
    spec: &FilterBankSpec,
    m: usize,
    max_prior: usize,
) -> Result<MsFbcspModel> {
    if current_trials.is_empty() {
        return Err(Error::EmptySession);
    }
    let prior = train_prior_model(current, history, spec, m, max_prior)?;
    let current_model = train_fbcsp(current_trials, spec, m)?;
    Ok(match prior {
        None => MsFbcspModel::single(current_model),
        Some((prior, used)) => MsFbcspModel {
            current: current_model,
            prior: Some(prior),
            k: current.session_index(),
            history_sessions_used: used,
        },
    })
}

/// The prior-sessions model: FBCSP retrained on the pooled trials of the
/// `max_prior` most recent sessions of `history`. Returns the model and the
/// session indices used, or `None` when there is nothing to pool.
pub fn train_prior_model(
    current: &Session,
    history: &[&Session],
    spec: &FilterBankSpec,
    m: usize,
    max_prior: usize,
) -> Result<Option<(FbcspModel, Vec<u32>)>> {
    let used = select_history(current, history, max_prior)?;
    if used.is_empty() {
        return Ok(None);
    }
    let pooled: Vec<Trial> = used.iter().flat_map(|s| s.trials().iter().cloned()).collect();
    let model = train_fbcsp(&pooled, spec, m)?;
    Ok(Some((model, used.iter().map(|s| s.session_index()).collect())))
}

/// Checks that `history` precedes `current` and shares its layout, and
/// returns the `max_prior` most recent history sessions in index order.
pub fn select_history<'a>(current: &Session, history: &[&'a Session], max_prior: usize) -> Result<Vec<&'a Session>> {
    for h in history {
        if h.session_index() >= current.session_index() {
            return Err(Error::InvalidSession(format!(
                "history session {} does not precede current session {}",
                h.session_index(),
                current.session_index()
            )));
        }
        if h.channel_names() != current.channel_names() || h.fs() != current.fs() {
            return Err(Error::DimensionMismatch(format!(
                "history session {} has a different channel layout or sampling rate",
                h.session_index()
            )));
        }
    }
    let mut ordered: Vec<&Session> = history.to_vec();
    ordered.sort_by_key(|s| s.session_index());
    let skip = ordered.len().saturating_sub(max_prior);
    Ok(ordered.split_off(skip))
}

/// `P_n` when there is no prior model, `(P_p + P_n) / 2` otherwise.
pub fn fuse(p_n: &ProbabilityMatrix, p_p: Option<&ProbabilityMatrix>) -> Result<ProbabilityMatrix> {
    match p_p {
        None => Ok(p_n.clone()),
        Some(p_p) => p_p.mean_with(p_n),
    }
}

pub fn predict_msfbcsp(model: &MsFbcspModel, trials: &[Trial]) -> Result<ProbabilityMatrix> {
    let p_n = predict_fbcsp(&model.current, trials)?;
    let p_p = match &model.prior {
        Some(prior) => Some(predict_fbcsp(prior, trials)?),
        None => None,
    };
    fuse(&p_n, p_p.as_ref())
}

/// Class with probability above 0.5; an exact tie goes to "rest".
pub fn decide(probs: &ProbabilityMatrix) -> Vec<Class> {
    probs
        .rows()
        .iter()
        .map(|r| if r[0] > 0.5 { Class::Walk } else { Class::Rest })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    spec: FilterBankSpec,
    m: usize,
    csp_cells: Vec<CspModel>,
    lda: LdaModel,
    class_order: [Class; 2],
    prior: Option<FbcspModel>,
    k: u32,
    history_sessions_used: Vec<u32>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

pub fn model_to_json(model: &MsFbcspModel) -> String {
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        spec: model.current.spec.clone(),
        m: model.current.m,
        csp_cells: model.current.csp_cells.clone(),
        lda: model.current.lda.clone(),
        class_order: model.current.class_order,
        prior: model.prior.clone(),
        k: model.k,
        history_sessions_used: model.history_sessions_used.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

pub fn model_from_json(text: &str) -> Result<MsFbcspModel> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    if probe.version != MODEL_FILE_VERSION {
        return Err(Error::UnsupportedVersion {
            found: probe.version,
            expected: MODEL_FILE_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let current = FbcspModel {
        spec: file.spec,
        m: file.m,
        csp_cells: file.csp_cells,
        lda: file.lda,
        class_order: file.class_order,
    };
    check_model(&current)?;
    if let Some(p) = &file.prior {
        check_model(p)?;
    }
    if file.prior.is_none() != (file.k == 1) {
        return Err(Error::CorruptModel(format!(
            "k = {} inconsistent with prior model presence",
            file.k
        )));
    }
    if file.history_sessions_used.len() > MAX_PRIOR_SESSIONS {
        return Err(Error::CorruptModel("more than 4 history sessions".into()));
    }
    Ok(MsFbcspModel {
        current,
        prior: file.prior,
        k: file.k,
        history_sessions_used: file.history_sessions_used,
    })
}

fn check_model(model: &FbcspModel) -> Result<()> {
    let bad = |msg: String| Err(Error::CorruptModel(msg));
    if model.csp_cells.len() != model.spec.n_cells() || model.csp_cells.is_empty() {
        return bad(format!(
            "{} CSP cells for a {}-cell filter bank",
            model.csp_cells.len(),
            model.spec.n_cells()
        ));
    }
    let n_ch = model.csp_cells[0].n_channels();
    if model
        .csp_cells
        .iter()
        .any(|c| c.n_channels() != n_ch || c.n_filters() != 2 * model.m)
    {
        return bad("CSP cells disagree on shape".into());
    }
    let lda = &model.lda;
    if lda.feature_dim != model.feature_dim()
        || lda.weights.len() != lda.feature_dim
        || lda.mean0.len() != lda.feature_dim
        || lda.mean1.len() != lda.feature_dim
    {
        return bad("LDA dimensions do not match the filter bank".into());
    }
    Ok(())
}

pub fn save_model(model: &MsFbcspModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MsFbcspModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decide_thresholds() {
        let p = ProbabilityMatrix::from_rows(vec![[0.7, 0.3], [0.5, 0.5], [0.2, 0.8]]).unwrap();
        assert_eq!(decide(&p), vec![Class::Walk, Class::Rest, Class::Rest]);
    }

    #[test]
    fn fusion_arithmetic() {
        let p_n = ProbabilityMatrix::from_rows(vec![[0.9, 0.1]]).unwrap();
        let p_p = ProbabilityMatrix::from_rows(vec![[0.5, 0.5]]).unwrap();
        let out = fuse(&p_n, Some(&p_p)).unwrap();
        assert!((out.rows()[0][0] - 0.7).abs() < 1e-15);
        assert!((out.rows()[0][1] - 0.3).abs() < 1e-15);
        assert_eq!(fuse(&p_n, Some(&p_n)).unwrap(), p_n);
        assert_eq!(fuse(&p_n, None).unwrap(), p_n);
        let short = ProbabilityMatrix::default();
        assert!(fuse(&p_n, Some(&short)).is_err());
    }

    #[test]
    fn unknown_version_rejected() {
        let err = model_from_json(r#"{"version": 2}"#).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVersion { found: 2, .. }));
        assert!(matches!(model_from_json("[1,2"), Err(Error::CorruptModel(_))));
        assert!(matches!(
            model_from_json(r#"{"version": 1, "spec": 3}"#),
            Err(Error::CorruptModel(_))
        ));
    }

    use crate::dsp::default_filter_bank;
    use crate::harness::{synth_subject, SynthConfig};

    fn sessions(n_sessions: usize, n_trials: usize, erd: f64) -> Vec<Session> {
        let cfg = SynthConfig {
            n_sessions,
            n_trials,
            erd_depth: erd,
            ..Default::default()
        };
        synth_subject(&cfg, 7).unwrap()
    }

    fn small_spec() -> FilterBankSpec {
        FilterBankSpec {
            bands: vec![(8.0, 14.0)],
            windows: vec![(0.5, 2.5)],
            fs: 256.0,
            order: 2,
        }
    }

    #[test]
    fn default_model_shape() {
        let s = sessions(1, 28, 0.5);
        let model = train_fbcsp(s[0].trials(), &default_filter_bank(256.0).unwrap(), 3).unwrap();
        assert_eq!(model.csp_cells.len(), 21);
        assert_eq!(model.feature_dim(), 126);
        assert_eq!(model.lda.feature_dim, 126);
        assert_eq!(model.class_order, [Class::Walk, Class::Rest]);
    }

    #[test]
    fn single_cell_m1() {
        let s = sessions(1, 20, 0.5);
        let model = train_fbcsp(s[0].trials(), &small_spec(), 1).unwrap();
        assert_eq!(model.lda.feature_dim, 2);
        let f = fbcsp_features(&model, s[0].trials()).unwrap();
        assert_eq!(f.shape(), (20, 2));
    }

    #[test]
    fn training_is_deterministic() {
        let s = sessions(1, 20, 0.5);
        let a = MsFbcspModel::single(train_fbcsp(s[0].trials(), &small_spec(), 2).unwrap());
        let b = MsFbcspModel::single(train_fbcsp(s[0].trials(), &small_spec(), 2).unwrap());
        assert_eq!(model_to_json(&a), model_to_json(&b));
    }

    #[test]
    fn strong_erd_training_set_is_separable() {
        let cfg = SynthConfig {
            n_sessions: 1,
            n_trials: 30,
            erd_depth: 0.9,
            noise_level: 0.1,
            mu_gain: 3.0,
            ..Default::default()
        };
        let s = synth_subject(&cfg, 11).unwrap();
        let model = train_fbcsp(s[0].trials(), &default_filter_bank(256.0).unwrap(), 3).unwrap();
        let p = predict_fbcsp(&model, s[0].trials()).unwrap();
        let truth: Vec<Class> = s[0].trials().iter().map(Trial::label).collect();
        assert_eq!(decide(&p), truth);
        for r in p.rows() {
            assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_prediction() {
        let s = sessions(1, 20, 0.5);
        let model = train_fbcsp(s[0].trials(), &small_spec(), 1).unwrap();
        assert_eq!(predict_fbcsp(&model, &[]).unwrap().n_rows(), 0);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let s = sessions(1, 20, 0.5);
        let model = train_fbcsp(s[0].trials(), &small_spec(), 1).unwrap();
        let t = Trial::new(Class::Walk, DMatrix::zeros(1280, 3)).unwrap();
        assert!(matches!(predict_fbcsp(&model, &[t]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn first_session_matches_plain_fbcsp() {
        let s = sessions(1, 20, 0.5);
        let ms = train_msfbcsp(&s[0], &[], &small_spec(), 2).unwrap();
        assert!(ms.prior.is_none());
        assert_eq!(ms.k, 1);
        let plain = train_fbcsp(s[0].trials(), &small_spec(), 2).unwrap();
        assert_eq!(
            predict_msfbcsp(&ms, s[0].trials()).unwrap(),
            predict_fbcsp(&plain, s[0].trials()).unwrap()
        );
    }

    #[test]
    fn history_selection() {
        let s = sessions(14, 8, 0.5);
        let spec = small_spec();
        let ms = train_msfbcsp(&s[4], &s[..4], &spec, 1).unwrap();
        assert_eq!(ms.k, 5);
        assert_eq!(ms.history_sessions_used, vec![1, 2, 3, 4]);

        let ms = train_msfbcsp(&s[13], &s[..13], &spec, 1).unwrap();
        assert_eq!(ms.k, 14);
        assert_eq!(ms.history_sessions_used, vec![10, 11, 12, 13]);
        let pooled: Vec<Trial> = s[9..13].iter().flat_map(|x| x.trials().iter().cloned()).collect();
        assert_eq!(ms.prior.as_ref().unwrap(), &train_fbcsp(&pooled, &spec, 1).unwrap());

        let p_n = predict_fbcsp(&ms.current, s[13].trials()).unwrap();
        let p_p = predict_fbcsp(ms.prior.as_ref().unwrap(), s[13].trials()).unwrap();
        let out = predict_msfbcsp(&ms, s[13].trials()).unwrap();
        for ((o, n), p) in out.rows().iter().zip(p_n.rows()).zip(p_p.rows()) {
            assert_eq!(o[0], (p[0] + n[0]) / 2.0);
        }

        assert!(train_msfbcsp(&s[2], &s[3..5], &spec, 1).is_err());
    }

    #[test]
    fn trial_order_equivariance() {
        let s = sessions(3, 12, 0.5);
        let ms = train_msfbcsp(&s[2], &s[..2], &small_spec(), 1).unwrap();
        let trials = s[2].trials();
        let perm: Vec<usize> = (0..trials.len()).rev().collect();
        let permuted: Vec<Trial> = perm.iter().map(|&i| trials[i].clone()).collect();
        let a = predict_msfbcsp(&ms, trials).unwrap();
        let b = predict_msfbcsp(&ms, &permuted).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(a.rows()[i], b.rows()[j]);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let s = sessions(3, 12, 0.5);
        let ms = train_msfbcsp(&s[2], &s[..2], &small_spec(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&ms, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, ms);
        assert_eq!(model_to_json(&loaded), fs::read_to_string(&path).unwrap());
        assert_eq!(
            predict_msfbcsp(&loaded, s[2].trials()).unwrap(),
            predict_msfbcsp(&ms, s[2].trials()).unwrap()
        );
    }

    #[test]
    fn inconsistent_k_rejected() {
        let s = sessions(1, 12, 0.5);
        let mut ms = MsFbcspModel::single(train_fbcsp(s[0].trials(), &small_spec(), 1).unwrap());
        ms.k = 3;
        assert!(matches!(model_from_json(&model_to_json(&ms)), Err(Error::CorruptModel(_))));
    }
}
