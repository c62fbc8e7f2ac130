use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ops::{compose_global, evaluate, fed_average, local_update, metadata_training};
use super::MetadataSet;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{extract_activations, ModelWeights, SplitLevel};
use crate::nn::{Hyperparams, LayerParams};
use crate::parallel;
use crate::seed::derive_seed;
use crate::selection::{client_select_metadata, SelectionConfig};

#[derive(Clone, Debug)]
pub struct ClientState {
    pub id: usize,
    pub data: LabeledDataset,
}

/// How clients build their metadata each round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SelectionMode {
    /// PCA + K-means medoids per class.
    Select(SelectionConfig),
    /// Every extracted map is sent.
    SelectAll,
    /// No metadata path; only federated averaging runs.
    FedavgOnly,
}

impl SelectionMode {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMode::Select(_) => "select",
            SelectionMode::SelectAll => "select_all",
            SelectionMode::FedavgOnly => "fedavg_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Accuracy of the composed model; equals `acc_avg_global` in
    /// federated-averaging-only runs, where no composed model exists.
    pub acc_composed: f64,
    pub acc_avg_global: f64,
    pub metadata_count: usize,
    pub metadata_bytes: usize,
    /// `metadata_count` over the number of client training samples.
    pub selection_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct SimState {
    /// Rounds completed so far.
    pub round: usize,
    /// Global model at the start of the next round.
    pub w_global: ModelWeights,
    w_upper_init: Arc<[LayerParams]>,
    pub level: SplitLevel,
    pub hyper_local: Hyperparams,
    pub hyper_meta: Hyperparams,
    pub selection: SelectionMode,
    /// Composed model of the last finished round.
    pub last_composed: Option<ModelWeights>,
    /// Metadata union of the last finished round.
    pub last_metadata: Option<MetadataSet>,
}

impl SimState {
    /// Snapshots the upper part of `w0` as the fixed starting point of every
    /// round's metadata training.
    pub fn new(
        w0: ModelWeights,
        level: SplitLevel,
        hyper_local: Hyperparams,
        hyper_meta: Hyperparams,
        selection: SelectionMode,
    ) -> Result<Self> {
        hyper_local.validate()?;
        hyper_meta.validate()?;
        if let SelectionMode::Select(cfg) = &selection {
            cfg.validate()?;
        }
        Ok(SimState {
            round: 0,
            w_upper_init: w0.upper_layers(level).into(),
            w_global: w0,
            level,
            hyper_local,
            hyper_meta,
            selection,
            last_composed: None,
            last_metadata: None,
        })
    }

    /// Upper-part initialization shared by every round.
    pub fn upper_init(&self) -> &[LayerParams] {
        &self.w_upper_init
    }

    /// Local-training hyperparameters of client `client` in round `t`.
    pub fn local_hyper(&self, t: usize, client: usize) -> Hyperparams {
        self.hyper_local
            .with_seed(derive_seed(self.hyper_local.shuffle_seed, &[1, t as u64, client as u64]))
    }

    pub fn meta_hyper(&self, t: usize) -> Hyperparams {
        self.hyper_meta
            .with_seed(derive_seed(self.hyper_meta.shuffle_seed, &[2, t as u64]))
    }

    pub fn selection_config(&self, t: usize, client: usize) -> Option<SelectionConfig> {
        match &self.selection {
            SelectionMode::Select(cfg) => Some(SelectionConfig {
                seed: derive_seed(cfg.seed, &[t as u64, client as u64]),
                ..cfg.clone()
            }),
            _ => None,
        }
    }
}

/// Hooks into a round, for instrumentation. Client hooks may be called from
/// several threads at once.
pub trait RoundObserver: Sync {
    /// A client received the model it will extract from and train.
    fn distributed(&self, _t: usize, _client: usize, _weights: &ModelWeights) {}
    /// A client extracted and selected metadata with these lower layers.
    fn extracted(&self, _t: usize, _client: usize, _lower: &[LayerParams], _metadata: &MetadataSet) {}
    /// The server built the evaluation model from these parts.
    fn composed(&self, _t: usize, _lower: &[LayerParams], _upper: &[LayerParams], _model: &ModelWeights) {}
    /// The server produced the next global model.
    fn aggregated(&self, _t: usize, _global: &ModelWeights) {}
}

pub struct NoObserver;

impl RoundObserver for NoObserver {}

struct ClientOutput {
    metadata: Option<MetadataSet>,
    updated: ModelWeights,
}

fn client_stage(
    state: &SimState,
    t: usize,
    client: &ClientState,
    observer: &dyn RoundObserver,
) -> Result<ClientOutput> {
    let global = &state.w_global;
    observer.distributed(t, client.id, global);
    // Extraction uses the received weights, before any local step.
    let metadata = match &state.selection {
        SelectionMode::FedavgOnly => None,
        mode => {
            let lower = global.lower_layers(state.level);
            let maps = extract_activations(global.arch(), lower, state.level, &client.data)
                .map_err(|e| e.at_stage(t, "activation extraction"))?;
            let set = match mode {
                SelectionMode::Select(_) => {
                    let cfg = state.selection_config(t, client.id).expect("select mode");
                    client_select_metadata(&maps, &cfg).map_err(|e| e.at_stage(t, "metadata selection"))?
                }
                _ => MetadataSet::from_activations(maps),
            };
            observer.extracted(t, client.id, lower, &set);
            Some(set)
        }
    };
    let (updated, _) = local_update(global, &client.data, &state.local_hyper(t, client.id))
        .map_err(|e| e.at_stage(t, "local update"))?;
    Ok(ClientOutput { metadata, updated })
}

pub fn run_round(
    state: SimState,
    clients: &[ClientState],
    test: &LabeledDataset,
) -> Result<(SimState, RoundRecord)> {
    run_round_observed(state, clients, test, &NoObserver)
}

/// One round: every client extracts metadata from the received global model
/// and then trains it locally; the server trains the upper part from its
/// fixed initialization on the metadata union, composes it with the previous
/// global lower part for evaluation, and averages the client models into the
/// next global model.
pub fn run_round_observed(
    mut state: SimState,
    clients: &[ClientState],
    test: &LabeledDataset,
    observer: &dyn RoundObserver,
) -> Result<(SimState, RoundRecord)> {
    let t = state.round + 1;
    if clients.is_empty() {
        return Err(Error::invalid("a round needs at least one client").at_stage(t, "setup"));
    }
    if let Some((pos, c)) = clients.iter().enumerate().find(|(i, c)| c.id != *i) {
        return Err(Error::invalid(format!(
            "client ids must be 0..{} in order; position {pos} holds id {}",
            clients.len(),
            c.id
        ))
        .at_stage(t, "setup"));
    }

    let outputs = parallel::map(clients, |c| client_stage(&state, t, c, observer));
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let total_samples: usize = clients.iter().map(|c| c.data.len()).sum();
    let (metadata, composed) = match &state.selection {
        SelectionMode::FedavgOnly => (None, None),
        _ => {
            let parts: Vec<MetadataSet> = outputs
                .iter()
                .map(|o| o.metadata.clone().expect("metadata in this mode"))
                .collect();
            let union = MetadataSet::union(&parts).map_err(|e| e.at_stage(t, "metadata union"))?;
            let (upper, _) = metadata_training(&state.w_upper_init, &union, &state.meta_hyper(t))
                .map_err(|e| e.at_stage(t, "metadata training"))?;
            let lower_prev = state.w_global.lower_layers(state.level);
            let model = compose_global(state.w_global.arch(), lower_prev, &upper, state.level)
                .map_err(|e| e.at_stage(t, "model composition"))?;
            observer.composed(t, lower_prev, &upper, &model);
            (Some(union), Some(model))
        }
    };

    let updated: Vec<ModelWeights> = outputs.into_iter().map(|o| o.updated).collect();
    let global = fed_average(&updated).map_err(|e| e.at_stage(t, "federated averaging"))?;
    observer.aggregated(t, &global);

    let acc_avg_global = evaluate(&global, test).map_err(|e| e.at_stage(t, "evaluation"))?;
    let acc_composed = match &composed {
        Some(m) => evaluate(m, test).map_err(|e| e.at_stage(t, "evaluation"))?,
        None => acc_avg_global,
    };

    let metadata_count = metadata.as_ref().map_or(0, MetadataSet::len);
    let metadata_bytes = metadata.as_ref().map_or(0, MetadataSet::bytes);
    state.w_global = global;
    state.last_composed = composed;
    state.last_metadata = metadata;
    state.round = t;
    let record = RoundRecord {
        round: t,
        acc_composed,
        acc_avg_global,
        metadata_count,
        metadata_bytes,
        selection_fraction: metadata_count as f64 / total_samples as f64,
    };
    Ok((state, record))
}
