//! Runs the synthetic single- vs multi-session comparison and prints the
//! pooled results.
//!
//! ```text
//! cargo run --release -p msfbcsp --example synthetic_study -- [erd drift noise mu_gain trials sessions]
//! ```

use std::time::Instant;

use msfbcsp::dsp::default_filter_bank;
use msfbcsp::harness::{run_study, synth_study, StudyOptions, SynthConfig};

fn main() -> msfbcsp::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("number")).collect();
    let d = SynthConfig::default();
    let get = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
    let cfg = SynthConfig {
        erd_depth: get(0, d.erd_depth),
        drift_strength: get(1, d.drift_strength),
        noise_level: get(2, d.noise_level),
        mu_gain: get(3, d.mu_gain),
        n_trials: get(4, d.n_trials as f64) as usize,
        n_sessions: get(5, d.n_sessions as f64) as usize,
        ..d
    };
    let t0 = Instant::now();
    let subjects = synth_study(&cfg)?;
    let spec = default_filter_bank(cfg.fs)?;
    let report = run_study(&subjects, &spec, &StudyOptions { seed: cfg.seed, ..Default::default() })?;
    println!("{cfg:?}");
    println!("msFBCSP {}", report.msfbcsp_pooled.display());
    println!("single  {}", report.single_pooled.display());
    println!("wilcoxon p = {:.3e} (W+ = {})", report.wilcoxon.p_value, report.wilcoxon.w_plus);
    println!("elapsed {:.1?}", t0.elapsed());
    Ok(())
}
