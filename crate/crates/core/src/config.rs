//! TOML experiment configuration.
//!
//! ```toml
//! [dataset]
//! source = "synthetic"          # or "cifar10" with `dir = "..."`
//! num_classes = 10
//! train_per_class = 200
//! test_per_class = 50
//! shape = [1, 16, 16]
//! noise_sigma = 0.3
//! seed = 7
//!
//! [arch]                        # optional
//! group_widths = [16, 32, 64]
//! blocks_per_group = 1
//!
//! [experiment]
//! level = "G1"
//! num_clients = 5
//! classes_per_client = 2
//! samples_per_client = 400
//! rounds = 15
//! mode = "select"               # select | select_all | fedavg_only
//!
//! [hyper_local]
//! learning_rate = 0.05
//! batch_size = 32
//! epochs = 1
//! weight_decay = 0.0            # optional
//!
//! [hyper_meta]
//! learning_rate = 0.05
//! batch_size = 32
//! epochs = 30
//!
//! [selection]                   # optional, read in select mode
//! n_components = 200
//! clusters_per_class = 20
//! max_iter = 300
//! tol = 1e-6
//! n_init = 1
//!
//! [seeds]                       # optional, each defaults to 0
//! model = 0
//! partition = 0
//! selection = 0
//! shuffle = 0
//! ```
//!
//! Unknown sections and keys are rejected.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::fedsim::{DatasetSource, ExperimentConfig, Seeds, SelectionMode};
use crate::model::{ArchSpec, SplitLevel};
use crate::nn::Hyperparams;
use crate::selection::SelectionConfig;

/// Command-line values that replace the corresponding config entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub rounds: Option<usize>,
    /// Replaces every seed in `[seeds]`.
    pub seed: Option<u64>,
    pub mode: Option<String>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_with(path, &Overrides::default())
}

pub fn parse_config_with(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str_with(&text, overrides)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    parse_config_str_with(text, &Overrides::default())
}

pub fn parse_config_str_with(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;

    let mut dataset = Section::take(&mut root, "dataset", true)?;
    let mut arch = Section::take(&mut root, "arch", false)?;
    let mut experiment = Section::take(&mut root, "experiment", true)?;
    let local = Section::take(&mut root, "hyper_local", true)?;
    let meta = Section::take(&mut root, "hyper_meta", true)?;
    let mut selection = Section::take(&mut root, "selection", false)?;
    let mut seeds = Section::take(&mut root, "seeds", false)?;
    if let Some(key) = root.keys().next() {
        return Err(Error::config(format!("unknown section `{key}`")));
    }

    let source = dataset.req_str("source")?;
    let dataset_source = match source.as_str() {
        "cifar10" => DatasetSource::Cifar10 {
            dir: PathBuf::from(dataset.req_str("dir")?),
        },
        "synthetic" => DatasetSource::Synthetic {
            num_classes: dataset.req_usize("num_classes")?,
            train_per_class: dataset.req_usize("train_per_class")?,
            test_per_class: dataset.req_usize("test_per_class")?,
            shape: dataset.opt_triple("shape")?.unwrap_or([3, 32, 32]),
            noise_sigma: dataset.opt_f64("noise_sigma")?.unwrap_or(0.3),
            seed: dataset.opt_u64("seed")?.unwrap_or(0),
        },
        other => {
            return Err(Error::config(format!(
                "dataset.source: expected \"cifar10\" or \"synthetic\", got \"{other}\""
            )))
        }
    };
    dataset.finish()?;

    let cifar = ArchSpec::cifar();
    let arch_spec = ArchSpec {
        input_shape: dataset_source.input_shape(),
        group_widths: arch.opt_triple("group_widths")?.unwrap_or(cifar.group_widths),
        blocks_per_group: arch.opt_usize("blocks_per_group")?.unwrap_or(cifar.blocks_per_group),
        num_classes: dataset_source.num_classes(),
    };
    arch.finish()?;

    let level_name = experiment.req_str("level")?;
    let level: SplitLevel = level_name
        .parse()
        .map_err(|_| Error::config(format!("experiment.level: expected G1, G2 or G3, got \"{level_name}\"")))?;
    let num_clients = experiment.req_usize("num_clients")?;
    let classes_per_client = experiment.req_usize("classes_per_client")?;
    let samples_per_client = experiment.req_usize("samples_per_client")?;
    let rounds = experiment.req_usize("rounds")?;
    let mode = experiment.opt_str("mode")?.unwrap_or_else(|| "select".to_string());
    experiment.finish()?;

    let hyper_local = hyperparams(local)?;
    let hyper_meta = hyperparams(meta)?;

    let defaults = SelectionConfig::default();
    let selection_cfg = SelectionConfig {
        n_components: selection.opt_usize("n_components")?.unwrap_or(defaults.n_components),
        clusters_per_class: selection.opt_usize("clusters_per_class")?.unwrap_or(defaults.clusters_per_class),
        seed: 0,
        max_iter: selection.opt_usize("max_iter")?.unwrap_or(defaults.max_iter),
        tol: selection.opt_f64("tol")?.unwrap_or(defaults.tol),
        n_init: selection.opt_usize("n_init")?.unwrap_or(defaults.n_init),
    };
    selection.finish()?;

    let mut seed_values = Seeds {
        model: seeds.opt_u64("model")?.unwrap_or(0),
        partition: seeds.opt_u64("partition")?.unwrap_or(0),
        selection: seeds.opt_u64("selection")?.unwrap_or(0),
        shuffle: seeds.opt_u64("shuffle")?.unwrap_or(0),
    };
    seeds.finish()?;

    let mode = overrides.mode.clone().unwrap_or(mode);
    let selection = match mode.as_str() {
        "select" => SelectionMode::Select(selection_cfg),
        "select_all" => SelectionMode::SelectAll,
        "fedavg_only" => SelectionMode::FedavgOnly,
        other => {
            return Err(Error::config(format!(
                "experiment.mode: expected select, select_all or fedavg_only, got \"{other}\""
            )))
        }
    };
    if let Some(seed) = overrides.seed {
        seed_values = Seeds::all(seed);
    }

    let cfg = ExperimentConfig {
        dataset: dataset_source,
        arch: arch_spec,
        level,
        num_clients,
        classes_per_client,
        samples_per_client,
        rounds: overrides.rounds.unwrap_or(rounds),
        hyper_local,
        hyper_meta,
        selection,
        seeds: seed_values,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn hyperparams(mut section: Section) -> Result<Hyperparams> {
    let h = Hyperparams {
        learning_rate: section.req_f64("learning_rate")?,
        batch_size: section.req_usize("batch_size")?,
        weight_decay: section.opt_f64("weight_decay")?.unwrap_or(0.0),
        epochs: section.req_usize("epochs")?,
        shuffle_seed: 0,
    };
    let name = section.name;
    section.finish()?;
    h.validate()
        .map_err(|e| Error::config(format!("{name}: {}", strip_prefix(&e))))?;
    Ok(h)
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

/// One table with its dotted name, drained key by key.
struct Section {
    name: &'static str,
    table: Table,
}

impl Section {
    fn take(root: &mut Table, name: &'static str, required: bool) -> Result<Section> {
        match root.remove(name) {
            Some(Value::Table(table)) => Ok(Section { name, table }),
            Some(other) => Err(Error::config(format!("{name}: expected a table, got {}", other.type_str()))),
            None if required => Err(Error::config(format!("{name}: required section missing"))),
            None => Ok(Section {
                name,
                table: Table::new(),
            }),
        }
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::config(format!("{}: required", self.path(key))))
    }

    fn wrong(&self, key: &str, expected: &str, got: &Value) -> Error {
        Error::config(format!("{}: expected {expected}, got {}", self.path(key), got.type_str()))
    }

    fn opt_str(&mut self, key: &str) -> Result<Option<String>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.wrong(key, "a string", &v)),
        }
    }

    fn req_str(&mut self, key: &str) -> Result<String> {
        let v = self.opt_str(key)?;
        self.required(key, v)
    }

    fn opt_u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(Value::Integer(_)) => Err(Error::config(format!("{}: must be non-negative", self.path(key)))),
            Some(v) => Err(self.wrong(key, "an integer", &v)),
        }
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>> {
        Ok(self.opt_u64(key)?.map(|v| v as usize))
    }

    fn req_usize(&mut self, key: &str) -> Result<usize> {
        let v = self.opt_usize(key)?;
        self.required(key, v)
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(self.wrong(key, "a number", &v)),
        }
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        let v = self.opt_f64(key)?;
        self.required(key, v)
    }

    fn opt_triple(&mut self, key: &str) -> Result<Option<[usize; 3]>> {
        let Some(v) = self.table.remove(key) else {
            return Ok(None);
        };
        let bad = || Error::config(format!("{}: expected an array of 3 non-negative integers", self.path(key)));
        let Value::Array(items) = v else {
            return Err(bad());
        };
        if items.len() != 3 {
            return Err(bad());
        }
        let mut out = [0usize; 3];
        for (slot, item) in out.iter_mut().zip(&items) {
            match item {
                Value::Integer(i) if *i >= 0 => *slot = *i as usize,
                _ => return Err(bad()),
            }
        }
        Ok(Some(out))
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().next() {
            Some(key) => Err(Error::config(format!("unknown key `{}`", self.path(key)))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[dataset]
source = "synthetic"
num_classes = 4
train_per_class = 10
test_per_class = 5
shape = [1, 8, 8]

[arch]
group_widths = [2, 4, 8]

[experiment]
level = "g2"
num_clients = 2
classes_per_client = 2
samples_per_client = 10
rounds = 3

[hyper_local]
learning_rate = 0.1
batch_size = 4
epochs = 1

[hyper_meta]
learning_rate = 0.1
batch_size = 4
epochs = 2
weight_decay = 0.0005

[selection]
clusters_per_class = 3
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = parse_config_str(BASE).unwrap();
        assert_eq!(cfg.level, SplitLevel::G2);
        assert_eq!(cfg.arch.input_shape, [1, 8, 8]);
        assert_eq!(cfg.arch.num_classes, 4);
        assert_eq!(cfg.hyper_local.weight_decay, 0.0);
        assert_eq!(cfg.hyper_meta.weight_decay, 0.0005);
        match &cfg.selection {
            SelectionMode::Select(s) => {
                assert_eq!(s.clusters_per_class, 3);
                assert_eq!(s.n_components, 200);
            }
            other => panic!("unexpected mode {other:?}"),
        }
        assert_eq!(cfg.seeds, Seeds::all(0));
    }

    #[test]
    fn missing_learning_rate_names_the_path() {
        let text = BASE.replacen("learning_rate = 0.1\n", "", 1);
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.is_usage());
        assert!(err.to_string().contains("hyper_local.learning_rate: required"), "{err}");
    }

    #[test]
    fn zero_clusters_rejected() {
        let text = BASE.replace("clusters_per_class = 3", "clusters_per_class = 0");
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.to_string().contains("clusters_per_class"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let err = parse_config_str(&format!("{BASE}\n[extra]\na = 1\n")).unwrap_err();
        assert!(err.to_string().contains("unknown section `extra`"), "{err}");
        let text = BASE.replace("rounds = 3", "rounds = 3\nround = 4");
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.to_string().contains("experiment.round"), "{err}");
    }

    #[test]
    fn wrong_type_reported() {
        let text = BASE.replace("batch_size = 4\nepochs = 1", "batch_size = \"four\"\nepochs = 1");
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.to_string().contains("hyper_local.batch_size: expected an integer"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let o = Overrides {
            rounds: Some(9),
            seed: Some(5),
            mode: Some("fedavg_only".into()),
        };
        let cfg = parse_config_str_with(BASE, &o).unwrap();
        assert_eq!(cfg.rounds, 9);
        assert_eq!(cfg.seeds, Seeds::all(5));
        assert_eq!(cfg.selection, SelectionMode::FedavgOnly);
        let bad = Overrides {
            mode: Some("other".into()),
            ..Overrides::default()
        };
        assert!(parse_config_str_with(BASE, &bad).unwrap_err().is_usage());
    }

    #[test]
    fn missing_file_is_usage_error() {
        let err = parse_config(Path::new("/nonexistent/config.toml")).unwrap_err();
        assert!(err.is_usage());
    }
}
