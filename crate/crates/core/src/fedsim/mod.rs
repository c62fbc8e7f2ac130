//! The round protocol and the experiment driver built on it.

mod experiment;
mod metadata;
mod ops;
mod round;

pub use experiment::{
    build_clients, initial_state, run_experiment, run_experiment_with, DatasetSource, ExperimentConfig,
    ExperimentOutcome, Seeds,
};
pub use metadata::MetadataSet;
pub use ops::{accuracy_from_logits, compose_global, evaluate, fed_average, local_update, metadata_training};
pub use round::{
    run_round, run_round_observed, ClientState, NoObserver, RoundObserver, RoundRecord, SelectionMode, SimState,
};
