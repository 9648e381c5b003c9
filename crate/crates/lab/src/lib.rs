//! Experiment driver: loads configs, runs registered experiments and writes
//! versioned CSV results with a markdown manifest.
pub mod config;
pub mod error;
pub mod experiments;
pub mod registry;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use config::LoadedConfig;
use error::{LabError, EXIT_CHECK_FAILED, EXIT_PASS};
use report::{render_csv, render_manifest, write_outputs, ManifestInfo, Row};

/// One `run` invocation: an experiment id paired with its config.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub id: String,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Subdirectory of the output root; the id when absent.
    pub subdir: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub id: String,
    pub rows: Vec<Row>,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn exit_code(&self) -> u8 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Checks a config without running it: it parses, names a registered
/// experiment, and its inputs load.
pub fn validate_config(path: &Path) -> Result<LoadedConfig, LabError> {
    let cfg = LoadedConfig::load(path, None)?;
    let exp = registry::find(&cfg.config.experiment)?;
    drop((exp.plan)(&cfg)?);
    Ok(cfg)
}

/// Runs one experiment. Nothing is written unless every row was produced.
pub fn run_experiment(req: &RunRequest) -> Result<RunOutcome, LabError> {
    let exp = registry::find(&req.id)?;
    let cfg = LoadedConfig::load(&req.config, req.seed)?;
    if cfg.config.experiment != exp.id {
        return Err(LabError::config(format!(
            "{} is a config for `{}`, not `{}`",
            req.config.display(),
            cfg.config.experiment,
            exp.id
        )));
    }
    let job = (exp.plan)(&cfg)?;
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let rows = job()?;
    let wall_clock_s = clock.elapsed().as_secs_f64();
    if rows.is_empty() {
        return Err(LabError::Internal(format!("experiment {} produced no rows", exp.id)));
    }
    let csv = render_csv(exp.id, &cfg.hash, cfg.seed, &rows);
    let manifest = render_manifest(
        &ManifestInfo {
            experiment: exp.id,
            config_path: &cfg.path,
            hash: &cfg.hash,
            seed: cfg.seed,
            started_unix,
            wall_clock_s,
        },
        &rows,
    );
    let dir = cfg.output_root(req.out.as_deref()).join(req.subdir.as_deref().unwrap_or(exp.id));
    let (csv, manifest) = write_outputs(&dir, &csv, &manifest)?;
    Ok(RunOutcome {
        id: exp.id.to_string(),
        rows,
        csv,
        manifest,
    })
}

/// Runs every request, concurrently when `parallel` is set, and returns the
/// results in request order.
pub fn run_all(requests: &[RunRequest], parallel: bool) -> Vec<Result<RunOutcome, LabError>> {
    if !parallel {
        return requests.iter().map(run_experiment).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = requests.iter().map(|r| s.spawn(move || run_experiment(r))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(LabError::Internal("experiment thread panicked".into()))))
            .collect()
    })
}
