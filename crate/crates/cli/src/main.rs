mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use msfbcsp::dataio::{load_session, save_session, MANIFEST_FILE};
use msfbcsp::harness::{
    accuracy, paper_check, paper_check_tables, run_study, synth_study, Method, StudyOptions, SynthConfig,
};
use msfbcsp::pipeline::{decide, load_model, predict_msfbcsp, save_model, train_msfbcsp_on};
use msfbcsp::{PaperTables, ProbabilityMatrix, Session, Trial};

use config::Config;

#[derive(Parser)]
#[command(name = "msfbcsp", version, about = "Single- and multi-session FBCSP for motor-imagery EEG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic multi-session EEG.
    Simulate(SimulateArgs),
    /// Train a model on one session, optionally with earlier sessions.
    Train(TrainArgs),
    /// Write class probabilities for a session.
    Predict(PredictArgs),
    /// Like `predict`, and also report accuracy against the session labels.
    Evaluate(PredictArgs),
    /// Compare msFBCSP with single-session FBCSP over a data directory.
    Compare(CompareArgs),
    /// Recompute the published table statistics.
    PaperCheck(PaperCheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    erd_depth: Option<f64>,
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Replace existing session directories.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest of the session to calibrate on.
    #[arg(long)]
    current: PathBuf,
    /// Manifests of earlier sessions.
    #[arg(long, num_args = 1..)]
    history: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Session manifest.
    #[arg(long)]
    session: PathBuf,
    /// Probability CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory searched recursively for session manifests.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PaperCheckArgs {
    /// Tables JSON (`{"msfbcsp": [[..7]; 14], "single": [[..7]; 14]}`) to
    /// check instead of the built-in copy.
    #[arg(long)]
    tables: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a, false),
        Command::Evaluate(a) => predict(a, true),
        Command::Compare(a) => compare(a),
        Command::PaperCheck(a) => return check_tables(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let config = Config::load(a.config.as_deref())?;
    let base = config.synth.clone().unwrap_or_default();
    let cfg = SynthConfig {
        n_subjects: a.subjects.unwrap_or(base.n_subjects),
        n_sessions: a.sessions.unwrap_or(base.n_sessions),
        n_trials: a.trials.unwrap_or(base.n_trials),
        seed: a.seed.unwrap_or(base.seed),
        erd_depth: a.erd_depth.unwrap_or(base.erd_depth),
        drift_strength: a.drift.unwrap_or(base.drift_strength),
        noise_level: a.noise.unwrap_or(base.noise_level),
        ..base
    };
    cfg.validate()?;
    info!(
        "simulating {} subjects x {} sessions x {} trials (seed {})",
        cfg.n_subjects, cfg.n_sessions, cfg.n_trials, cfg.seed
    );
    let study = synth_study(&cfg)?;
    for subject in &study {
        for session in subject {
            let dir = a
                .out
                .join(session.subject_id())
                .join(format!("session_{:02}", session.session_index()));
            let manifest = save_session(session, &dir, a.overwrite)?;
            println!("{}", manifest.display());
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<Session> {
    load_session(path).with_context(|| format!("loading session {}", path.display()))
}

fn train(a: TrainArgs) -> Result<()> {
    let config = Config::load(a.config.as_deref())?;
    let current = load(&a.current)?;
    let history = a.history.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let max_prior = config.max_prior();
    if history.len() > max_prior {
        warn!(
            "{} history sessions given; only the {max_prior} most recent are used",
            history.len()
        );
    }
    let spec = config.filter_bank(current.fs())?;
    let refs: Vec<&Session> = history.iter().collect();
    let model = train_msfbcsp_on(&current, current.trials(), &refs, &spec, config.m(), max_prior)?;
    save_model(&model, &a.out)?;
    info!(
        "trained k = {} model (prior sessions {:?}) on {} trials",
        model.k,
        model.history_sessions_used,
        current.trials().len()
    );
    println!("{}", a.out.display());
    Ok(())
}

fn probability_csv(trials: &[Trial], probs: &ProbabilityMatrix) -> String {
    let mut out = String::from("trial,label,p_walk,p_rest,predicted\n");
    for (i, ((t, p), d)) in trials.iter().zip(probs.rows()).zip(decide(probs)).enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            t.label().as_str(),
            p[0],
            p[1],
            d.as_str()
        ));
    }
    out
}

fn predict(a: PredictArgs, report_accuracy: bool) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let session = load(&a.session)?;
    let probs = predict_msfbcsp(&model, session.trials())?;
    let csv = probability_csv(session.trials(), &probs);
    match &a.out {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    if report_accuracy {
        let truth: Vec<_> = session.trials().iter().map(Trial::label).collect();
        let acc = accuracy(&decide(&probs), &truth)?;
        println!("accuracy {acc:.1}% ({} trials)", truth.len());
    }
    Ok(())
}

fn find_manifests(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            find_manifests(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == MANIFEST_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let config = Config::load(a.config.as_deref())?;
    let mut manifests = Vec::new();
    find_manifests(&a.data, &mut manifests)?;
    if manifests.is_empty() {
        bail!("no {MANIFEST_FILE} found under {}", a.data.display());
    }
    let mut by_subject: BTreeMap<String, Vec<Session>> = BTreeMap::new();
    for path in &manifests {
        let s = load(path)?;
        by_subject.entry(s.subject_id().to_string()).or_default().push(s);
    }
    let subjects: Vec<Vec<Session>> = by_subject.into_values().collect();
    let fs_hz = subjects[0][0].fs();
    if subjects.iter().flatten().any(|s| s.fs() != fs_hz) {
        bail!("sessions use different sampling rates");
    }
    let spec = config.filter_bank(fs_hz)?;
    let mut opts = StudyOptions {
        seed: a.seed,
        m: config.m(),
        max_prior: config.max_prior(),
        ..Default::default()
    };
    if let Some(f) = config.train_fraction {
        opts.train_fraction = f;
    }
    info!(
        "comparing methods on {} sessions of {} subjects",
        manifests.len(),
        subjects.len()
    );
    let report = run_study(&subjects, &spec, &opts)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = a.out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    let mut json = report.to_json();
    json.push('\n');
    write("report.json", json)?;
    write("msfbcsp.csv", report.to_csv(Method::Msfbcsp)?)?;
    write("single.csv", report.to_csv(Method::Single)?)?;

    println!("msFBCSP median (range): {}", report.msfbcsp_pooled.display());
    println!("single-session median (range): {}", report.single_pooled.display());
    println!(
        "Wilcoxon signed-rank: W+ = {}, n = {}, p = {:.3e}",
        report.wilcoxon.w_plus, report.wilcoxon.n_eff, report.wilcoxon.p_value
    );
    Ok(())
}

fn check_tables(a: PaperCheckArgs) -> ExitCode {
    let report = match &a.tables {
        None => paper_check(),
        Some(path) => {
            let tables: Result<PaperTables> = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .and_then(|t| serde_json::from_str(&t).context("parsing tables"));
            match tables {
                Ok(t) => paper_check_tables(&t),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            }
        }
    };
    print!("{}", report.render());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
