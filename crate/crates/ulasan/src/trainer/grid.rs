//! Hyperparameter grid: one fine-tuning run per (learning rate, batch
//! size, epochs) cell, each reported as a table row.

use super::{evaluate_accuracy, fine_tune, EncodedDataset, RunHistory, TrainConfig, TrainerError};
use crate::encoder::{init_params, EncoderConfig, EncoderParams};
use crate::eval::RunReport;

/// Default six-cell grid axes.
pub const DEFAULT_GRID_LEARNING_RATES: [f64; 3] = [1e-5, 2e-5, 3e-5];
pub const DEFAULT_GRID_BATCH_SIZES: [usize; 2] = [16, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub epoch_choices: Vec<usize>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if self.learning_rates.is_empty()
            || self.batch_sizes.is_empty()
            || self.epoch_choices.is_empty()
        {
            return Err(TrainerError::BadConfig("every grid axis needs a value".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.learning_rates.len() * self.batch_sizes.len() * self.epoch_choices.len()
    }
}

/// One finished (or failed) grid cell. Failures are recorded so the rest
/// of the grid still runs.
#[derive(Debug)]
pub struct GridCellOutcome {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub outcome: Result<GridCellRun, String>,
}

#[derive(Debug)]
pub struct GridCellRun {
    pub report: RunReport,
    pub history: RunHistory,
    pub params: EncoderParams,
}

/// Run every cell in lexicographic (learning rate, batch size, epochs)
/// order. Each cell starts from a fresh seeded init, or from a clone of
/// `init` when a shared starting checkpoint is given.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    encoder_config: &EncoderConfig,
    base: &TrainConfig,
    grid: &GridSpec,
    init: Option<&EncoderParams>,
    train: &EncodedDataset,
    validation: &EncodedDataset,
    test: &EncodedDataset,
    model: &str,
    labeling: &str,
) -> Result<Vec<GridCellOutcome>, TrainerError> {
    grid_search_jobs(
        encoder_config, base, grid, init, train, validation, test, model, labeling, 1,
    )
}

/// [`grid_search`] with up to `jobs` cells training concurrently. Cells are
/// mutually independent and internally seeded, so outcomes are identical to
/// the sequential run and stay in enumeration order.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_jobs(
    encoder_config: &EncoderConfig,
    base: &TrainConfig,
    grid: &GridSpec,
    init: Option<&EncoderParams>,
    train: &EncodedDataset,
    validation: &EncodedDataset,
    test: &EncodedDataset,
    model: &str,
    labeling: &str,
    jobs: usize,
) -> Result<Vec<GridCellOutcome>, TrainerError> {
    grid.validate()?;
    if let Some(start) = init {
        if start.config() != encoder_config {
            return Err(TrainerError::BadConfig(
                "starting checkpoint was built for a different encoder config".into(),
            ));
        }
    }
    let mut cells = Vec::with_capacity(grid.cells());
    for &learning_rate in &grid.learning_rates {
        for &batch_size in &grid.batch_sizes {
            for &epochs in &grid.epoch_choices {
                cells.push((learning_rate, batch_size, epochs));
            }
        }
    }
    let run_one = |&(learning_rate, batch_size, epochs): &(f64, usize, usize)| {
        let cell = TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            ..base.clone()
        };
        let outcome = run_cell(
            encoder_config, base.seed, &cell, init, train, validation, test, model, labeling,
        )
        .map_err(|e| e.to_string());
        GridCellOutcome {
            learning_rate,
            batch_size,
            epochs,
            outcome,
        }
    };
    if jobs <= 1 || cells.len() <= 1 {
        return Ok(cells.iter().map(run_one).collect());
    }

    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<GridCellOutcome>> = Vec::new();
    slots.resize_with(cells.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let outcome = run_one(cell);
                slots.lock().expect("no panics while locked")[i] = Some(outcome);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("all workers joined")
        .into_iter()
        .map(|slot| slot.expect("every cell ran"))
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    encoder_config: &EncoderConfig,
    init_seed: u64,
    cell: &TrainConfig,
    init: Option<&EncoderParams>,
    train: &EncodedDataset,
    validation: &EncodedDataset,
    test: &EncodedDataset,
    model: &str,
    labeling: &str,
) -> Result<GridCellRun, TrainerError> {
    let start = match init {
        Some(params) => params.clone(),
        None => init_params(encoder_config, init_seed)?,
    };
    let (best, history) = fine_tune(start, cell, train, validation)?;
    let test_acc = evaluate_accuracy(&best, test)?;
    let report = RunReport {
        model: model.to_string(),
        labeling: labeling.to_string(),
        batch_size: cell.batch_size,
        learning_rate: cell.learning_rate,
        epochs: cell.epochs,
        avg_train_acc: history.avg_train_acc(),
        avg_val_acc: history.avg_val_acc(),
        train_time_s: history.train_time_s,
        test_acc,
    };
    Ok(GridCellRun {
        report,
        history,
        params: best,
    })
}
