use crate::config::LoadedConfig;
use crate::error::LabError;
use crate::experiments;
use crate::report::Row;

/// Work left after a config has been checked and its inputs loaded.
pub type Job = Box<dyn FnOnce() -> Result<Vec<Row>, LabError> + Send>;

pub struct Experiment {
    pub id: &'static str,
    pub description: &'static str,
    /// Config fields the experiment reads, with `params.` for its own block.
    pub fields: &'static [&'static str],
    /// Loads inputs and checks parameters. Failures here are config errors.
    pub plan: fn(&LoadedConfig) -> Result<Job, LabError>,
}

/// All experiments, sorted by id.
pub fn registry() -> Vec<Experiment> {
    let mut all = vec![
        experiments::conjugate::experiment(),
        experiments::finite::duality_experiment(),
        experiments::finite::bipolar_experiment(),
        experiments::finite::minimax_experiment(),
        experiments::diffusion::duality_experiment(),
        experiments::diffusion::girsanov_experiment(),
        experiments::diffusion::density_experiment(),
        experiments::diffusion::separation_experiment(),
    ];
    all.sort_by_key(|e| e.id);
    all
}

pub fn find(id: &str) -> Result<Experiment, LabError> {
    registry()
        .into_iter()
        .find(|e| e.id == id)
        .ok_or_else(|| LabError::UnknownExperiment(id.to_string()))
}
