//! Browser bindings for the interactive page in `www/`.
//!
//! Each exported function returns a JSON string. The plain Rust versions
//! (`*_json`) are what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use msfbcsp::csp::{train_csp, trial_covariance};
use msfbcsp::dsp::{apply_filter, default_filter_bank, design_bandpass, extract_window};
use msfbcsp::harness::synth::synth_subject_detailed;
use msfbcsp::harness::{run_study, synth_study, StudyOptions, SynthConfig};
use msfbcsp::Class;

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Response {
    freqs: Vec<f64>,
    magnitude_db: Vec<f64>,
    max_pole_modulus: f64,
    sections: usize,
}

pub fn filter_response_json(low: f64, high: f64, fs: f64, order: usize, points: usize) -> Result<String, String> {
    let filter = design_bandpass(low, high, fs, order).map_err(err)?;
    let points = points.clamp(2, 4096);
    let nyquist = fs / 2.0;
    let freqs: Vec<f64> = (0..points).map(|i| nyquist * i as f64 / (points - 1) as f64).collect();
    let magnitude_db = freqs
        .iter()
        .map(|&f| (20.0 * filter.magnitude(f).log10()).max(-120.0))
        .collect();
    serde_json::to_string(&Response {
        freqs,
        magnitude_db,
        max_pole_modulus: filter.max_pole_modulus(),
        sections: filter.sections.len(),
    })
    .map_err(err)
}

/// Magnitude response of a Butterworth band-pass, in dB on a linear
/// frequency grid from 0 to Nyquist.
#[wasm_bindgen]
pub fn filter_response(low: f64, high: f64, fs: f64, order: usize, points: usize) -> Result<String, JsValue> {
    to_js(filter_response_json(low, high, fs, order, points))
}

#[derive(Serialize)]
struct ErdPoint {
    label: &'static str,
    /// Log variance of the first and last CSP filter outputs.
    f_first: f64,
    f_last: f64,
    mu_power: f64,
}

#[derive(Serialize)]
struct ErdResponse {
    points: Vec<ErdPoint>,
    loaded_channel: String,
    walk_rest_power_ratio: f64,
}

pub fn erd_scatter_json(erd_depth: f64, noise_level: f64, n_trials: usize, seed: u64) -> Result<String, String> {
    let cfg = SynthConfig {
        n_sessions: 1,
        n_trials,
        erd_depth,
        noise_level,
        seed,
        ..SynthConfig::default()
    };
    let subject = synth_subject_detailed(&cfg, seed, "S01").map_err(err)?;
    let session = &subject.sessions[0];
    let a = &subject.mixing[0];
    let loaded = (0..a.nrows())
        .max_by(|&i, &j| a[(i, 0)].abs().total_cmp(&a[(j, 0)].abs()))
        .unwrap_or(0);

    let filter = design_bandpass(8.0, 13.0, cfg.fs, 2).map_err(err)?;
    let mut segments = Vec::with_capacity(session.trials().len());
    for t in session.trials() {
        let filtered = apply_filter(&filter, t.samples()).map_err(err)?;
        segments.push(extract_window(&filtered, (0.5, 4.5), cfg.fs).map_err(err)?);
    }
    let covs = segments
        .iter()
        .map(trial_covariance)
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let (mut c0, mut c1) = (Vec::new(), Vec::new());
    for (t, c) in session.trials().iter().zip(&covs) {
        match t.label() {
            Class::Walk => c0.push(c.clone()),
            Class::Rest => c1.push(c.clone()),
        }
    }
    let csp = train_csp(&c0, &c1, 1).map_err(err)?;

    let mut points = Vec::with_capacity(segments.len());
    let (mut walk, mut rest) = (Vec::new(), Vec::new());
    for ((t, seg), cov) in session.trials().iter().zip(&segments).zip(&covs) {
        let var = |j: usize| {
            let w = csp.filters.column(j);
            w.dot(&(cov * w)).ln()
        };
        let col = seg.column(loaded);
        let mean = col.mean();
        let mu_power = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
        match t.label() {
            Class::Walk => walk.push(mu_power),
            Class::Rest => rest.push(mu_power),
        }
        points.push(ErdPoint {
            label: t.label().as_str(),
            f_first: var(0),
            f_last: var(1),
            mu_power,
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    serde_json::to_string(&ErdResponse {
        points,
        loaded_channel: session.channel_names()[loaded].clone(),
        walk_rest_power_ratio: mean(&walk) / mean(&rest),
    })
    .map_err(err)
}

/// One synthetic session projected onto its first and last CSP filters
/// (mu band), with the per-trial mu power at the most-loaded channel.
#[wasm_bindgen]
pub fn erd_scatter(erd_depth: f64, noise_level: f64, n_trials: usize, seed: u64) -> Result<String, JsValue> {
    to_js(erd_scatter_json(erd_depth, noise_level, n_trials, seed))
}

#[derive(Serialize)]
struct CompareResponse {
    /// Median accuracy over subjects, per session index.
    msfbcsp_by_session: Vec<f64>,
    single_by_session: Vec<f64>,
    msfbcsp_pooled: String,
    single_pooled: String,
    p_value: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn compare_methods_json(
    erd_depth: f64,
    drift_strength: f64,
    noise_level: f64,
    n_subjects: usize,
    n_sessions: usize,
    n_trials: usize,
    seed: u64,
) -> Result<String, String> {
    let cfg = SynthConfig {
        n_subjects,
        n_sessions,
        n_trials,
        erd_depth,
        drift_strength,
        noise_level,
        seed,
        ..SynthConfig::default()
    };
    let subjects = synth_study(&cfg).map_err(err)?;
    let spec = default_filter_bank(cfg.fs).map_err(err)?;
    let report = run_study(&subjects, &spec, &StudyOptions { seed, ..Default::default() }).map_err(err)?;
    let by_session = |pick: fn(&msfbcsp::harness::study::SubjectReport) -> &Vec<f64>| -> Result<Vec<f64>, String> {
        (0..n_sessions)
            .map(|k| {
                let column: Vec<f64> = report.per_subject.iter().map(|s| pick(s)[k]).collect();
                Ok(msfbcsp::harness::median_range(&column).map_err(err)?.median)
            })
            .collect()
    };
    serde_json::to_string(&CompareResponse {
        msfbcsp_by_session: by_session(|s| &s.msfbcsp)?,
        single_by_session: by_session(|s| &s.single)?,
        msfbcsp_pooled: report.msfbcsp_pooled.display(),
        single_pooled: report.single_pooled.display(),
        p_value: report.wilcoxon.p_value,
    })
    .map_err(err)
}

/// Runs a small single- vs multi-session study on synthetic data.
#[wasm_bindgen]
pub fn compare_methods(
    erd_depth: f64,
    drift_strength: f64,
    noise_level: f64,
    n_subjects: usize,
    n_sessions: usize,
    n_trials: usize,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(compare_methods_json(
        erd_depth,
        drift_strength,
        noise_level,
        n_subjects,
        n_sessions,
        n_trials,
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn response_has_minus_three_db_edges() {
        let v: Value = serde_json::from_str(&filter_response_json(8.0, 12.0, 256.0, 2, 257).unwrap()).unwrap();
        let db = v["magnitude_db"].as_array().unwrap();
        assert_eq!(db.len(), 257);
        // grid step is 0.5 Hz, so index 16 is 8 Hz
        assert!((db[16].as_f64().unwrap() + 3.0103).abs() < 1e-3);
        assert!(v["max_pole_modulus"].as_f64().unwrap() < 1.0);
        assert!(filter_response_json(12.0, 8.0, 256.0, 2, 10).is_err());
    }

    #[test]
    fn erd_scatter_shape() {
        let v: Value = serde_json::from_str(&erd_scatter_json(0.6, 0.5, 20, 3).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 20);
        assert!(v["walk_rest_power_ratio"].as_f64().unwrap() < 1.0);
    }

    #[test]
    fn compare_is_deterministic() {
        let a = compare_methods_json(0.4, 0.2, 1.0, 2, 3, 12, 1).unwrap();
        assert_eq!(a, compare_methods_json(0.4, 0.2, 1.0, 2, 3, 12, 1).unwrap());
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["msfbcsp_by_session"].as_array().unwrap().len(), 3);
        assert_eq!(v["msfbcsp_by_session"][0], v["single_by_session"][0]);
    }
}
