use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::round::{run_round, ClientState, RoundRecord, SelectionMode, SimState};
use crate::data::{load_cifar10, partition_noniid, LabeledDataset, PartitionPlan, SyntheticGenerator};
use crate::error::{Error, Result};
use crate::model::{ArchSpec, ModelWeights, SplitLevel};
use crate::nn::Hyperparams;
use crate::seed::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Cifar10 {
        dir: PathBuf,
    },
    Synthetic {
        num_classes: usize,
        train_per_class: usize,
        test_per_class: usize,
        shape: [usize; 3],
        noise_sigma: f64,
        seed: u64,
    },
}

impl DatasetSource {
    pub fn input_shape(&self) -> [usize; 3] {
        match self {
            DatasetSource::Cifar10 { .. } => [3, 32, 32],
            DatasetSource::Synthetic { shape, .. } => *shape,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            DatasetSource::Cifar10 { .. } => 10,
            DatasetSource::Synthetic { num_classes, .. } => *num_classes,
        }
    }

    /// Training and test sets. Synthetic train and test draws share templates
    /// and use independent noise.
    pub fn load(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        match self {
            DatasetSource::Cifar10 { dir } => load_cifar10(dir),
            DatasetSource::Synthetic {
                num_classes,
                train_per_class,
                test_per_class,
                shape,
                noise_sigma,
                seed,
            } => {
                let g = SyntheticGenerator::new(*num_classes, *shape, *seed)?;
                let train = g.sample(*train_per_class, *noise_sigma, derive_seed(*seed, &[1]))?;
                let test = g.sample(*test_per_class, *noise_sigma, derive_seed(*seed, &[2]))?;
                Ok((train, test))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub model: u64,
    pub partition: u64,
    pub selection: u64,
    pub shuffle: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            model: seed,
            partition: seed,
            selection: seed,
            shuffle: seed,
        }
    }
}

/// A fully resolved experiment. The shuffle seeds inside the
/// hyperparameters and the seed inside a selection config are taken from
/// `seeds` when the run starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub arch: ArchSpec,
    pub level: SplitLevel,
    pub num_clients: usize,
    pub classes_per_client: usize,
    pub samples_per_client: usize,
    pub rounds: usize,
    pub hyper_local: Hyperparams,
    pub hyper_meta: Hyperparams,
    pub selection: SelectionMode,
    pub seeds: Seeds,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.arch.input_shape != self.dataset.input_shape() {
            return Err(Error::config(format!(
                "arch input shape {:?} does not match dataset samples {:?}",
                self.arch.input_shape,
                self.dataset.input_shape()
            )));
        }
        if self.arch.num_classes != self.dataset.num_classes() {
            return Err(Error::config(format!(
                "arch has {} classes, dataset has {}",
                self.arch.num_classes,
                self.dataset.num_classes()
            )));
        }
        if self.num_clients == 0 {
            return Err(Error::config("num_clients must be positive"));
        }
        if self.classes_per_client == 0 || self.classes_per_client > self.arch.num_classes {
            return Err(Error::config(format!(
                "classes_per_client must be in 1..={}",
                self.arch.num_classes
            )));
        }
        if self.samples_per_client == 0 {
            return Err(Error::config("samples_per_client must be positive"));
        }
        self.hyper_local.validate()?;
        self.hyper_meta.validate()?;
        if let SelectionMode::Select(cfg) = &self.selection {
            cfg.validate()?;
        }
        if let DatasetSource::Synthetic {
            num_classes,
            train_per_class,
            test_per_class,
            shape,
            noise_sigma,
            ..
        } = &self.dataset
        {
            if *num_classes < 2 || *train_per_class == 0 || *test_per_class == 0 || shape.contains(&0) {
                return Err(Error::config("synthetic dataset counts and shape must be positive"));
            }
            if !(noise_sigma.is_finite() && *noise_sigma >= 0.0) {
                return Err(Error::config("synthetic noise_sigma must be non-negative"));
            }
        }
        Ok(())
    }

    /// The selection mode with its seed taken from `seeds.selection`.
    pub fn seeded_selection(&self) -> SelectionMode {
        match &self.selection {
            SelectionMode::Select(cfg) => SelectionMode::Select(crate::selection::SelectionConfig {
                seed: self.seeds.selection,
                ..cfg.clone()
            }),
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub records: Vec<RoundRecord>,
    pub plan: PartitionPlan,
    /// Federated-averaged model after the last round.
    pub final_global: ModelWeights,
    /// Composed model of the last round, when one was built.
    pub final_composed: Option<ModelWeights>,
    /// Metadata union of the last round, when one was built.
    pub final_metadata: Option<super::MetadataSet>,
}

/// Splits `train` into client datasets following `plan`.
pub fn build_clients(train: &LabeledDataset, plan: &PartitionPlan) -> Result<Vec<ClientState>> {
    plan.client_indices
        .iter()
        .enumerate()
        .map(|(id, idx)| {
            Ok(ClientState {
                id,
                data: train.subset(idx)?,
            })
        })
        .collect()
}

/// Initial simulation state for `cfg`: seeded model and hyperparameters.
pub fn initial_state(cfg: &ExperimentConfig) -> Result<SimState> {
    let w0 = ModelWeights::build(&cfg.arch, cfg.seeds.model)?;
    SimState::new(
        w0,
        cfg.level,
        cfg.hyper_local.with_seed(cfg.seeds.shuffle),
        cfg.hyper_meta.with_seed(cfg.seeds.shuffle),
        cfg.seeded_selection(),
    )
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_experiment_with(cfg, |_| {})
}

/// Runs every round, calling `on_round` after each one.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    mut on_round: impl FnMut(&RoundRecord),
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (train, test) = cfg.dataset.load()?;
    let plan = partition_noniid(
        &train,
        cfg.num_clients,
        cfg.classes_per_client,
        cfg.samples_per_client,
        cfg.seeds.partition,
    )?;
    let clients = build_clients(&train, &plan)?;
    let mut state = initial_state(cfg)?;
    let mut records = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let (next, record) = run_round(state, &clients, &test)?;
        on_round(&record);
        records.push(record);
        state = next;
    }
    Ok(ExperimentOutcome {
        records,
        plan,
        final_global: state.w_global,
        final_composed: state.last_composed,
        final_metadata: state.last_metadata,
    })
}
