use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use splitfed::config::{parse_config_with, Overrides};
use splitfed::fedsim::run_experiment_with;
use splitfed::model::{read_activation_dump, write_activation_dump, ActivationMaps, ArchSpec, ModelWeights, SplitLevel};
use splitfed::nn::grad_check;
use splitfed::report::emit_metrics;
use splitfed::selection::{select_indices, SelectionConfig};
use splitfed::seed::{derive_seed, rng};
use splitfed::{data, Error, Tensor};

#[derive(Parser)]
#[command(name = "splitfed", version, about = "Split-model federated learning with activation-map metadata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write rounds.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        rounds: Option<usize>,
        /// Replaces every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["select", "select_all", "fedavg_only"])]
        mode: Option<String>,
        /// Also write the last round's metadata as metadata.bin/metadata.labels.
        #[arg(long)]
        dump_metadata: bool,
    },
    /// Compare analytic and finite-difference gradients on a small network.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Select representative samples from an activation dump.
    Select {
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 20)]
        clusters_per_class: usize,
        #[arg(long, default_value_t = 200)]
        components: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for selected.bin/selected.labels.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the non-IID client partition of a config as JSON.
    Partition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err.downcast_ref::<Error>().is_some_and(Error::is_usage);
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run {
            config,
            out,
            rounds,
            seed,
            mode,
            dump_metadata,
        } => {
            let cfg = parse_config_with(&config, &Overrides { rounds, seed, mode })?;
            eprintln!(
                "running {} rounds, {} clients, level {}, mode {}",
                cfg.rounds,
                cfg.num_clients,
                cfg.level,
                cfg.selection.name()
            );
            let outcome = run_experiment_with(&cfg, |r| {
                eprintln!(
                    "round {}: acc_composed={:.4} acc_avg_global={:.4} metadata_count={}",
                    r.round, r.acc_composed, r.acc_avg_global, r.metadata_count
                );
            })?;
            emit_metrics(&outcome.records, &cfg, &out)?;
            if dump_metadata {
                if let Some(meta) = &outcome.final_metadata {
                    write_activation_dump(
                        &meta.maps,
                        &meta.labels,
                        &out.join("metadata.bin"),
                        &out.join("metadata.labels"),
                    )?;
                } else {
                    eprintln!("no metadata to dump in {} mode", cfg.selection.name());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { eps, seed } => {
            // Random weights, biases and inputs keep pre-activations away
            // from the ReLU kink, where finite differences are meaningless.
            let arch = ArchSpec {
                input_shape: [2, 6, 6],
                group_widths: [2, 3, 4],
                blocks_per_group: 1,
                num_classes: 3,
            };
            let mut model = ModelWeights::build(&arch, seed)?;
            let mut r = rng(derive_seed(seed, &[1]));
            for layer in model.layers_mut() {
                for b in layer.bias.data_mut() {
                    *b = 0.1 * r.sample::<f64, _>(StandardNormal);
                }
            }
            let batch = 4;
            let pixels: Vec<f64> = (0..batch * 72).map(|_| r.sample(StandardNormal)).collect();
            let inputs = Tensor::new(vec![batch, 2, 6, 6], pixels)?;
            let labels: Vec<usize> = (0..batch).map(|i| i % 3).collect();
            let err = grad_check(model.layers(), &inputs, &labels, eps)?;
            let pass = err < 1e-4;
            println!("max relative error {err:.3e} ({})", if pass { "pass" } else { "fail" });
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Select {
            maps,
            labels,
            clusters_per_class,
            components,
            seed,
            out,
        } => {
            let (tensor, label_vec) = read_activation_dump(&maps, &labels)?;
            let cfg = SelectionConfig {
                n_components: components,
                clusters_per_class,
                seed,
                ..SelectionConfig::default()
            };
            cfg.validate()?;
            let activations = ActivationMaps {
                maps: tensor,
                labels: label_vec,
                level: SplitLevel::G1,
            };
            let selected = select_indices(&activations, &cfg)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let maps: Tensor = activations.maps.gather(&selected)?;
                let labels: Vec<usize> = selected.iter().map(|&i| activations.labels[i]).collect();
                write_activation_dump(&maps, &labels, &dir.join("selected.bin"), &dir.join("selected.labels"))?;
            }
            let report = json!({
                "input_count": activations.len(),
                "selected_count": selected.len(),
                "indices": selected,
            });
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Partition { config, out } => {
            let cfg = parse_config_with(&config, &Overrides::default())?;
            let (train, _) = cfg.dataset.load()?;
            let plan = data::partition_noniid(
                &train,
                cfg.num_clients,
                cfg.classes_per_client,
                cfg.samples_per_client,
                cfg.seeds.partition,
            )?;
            let text = serde_json::to_string_pretty(&plan)?;
            match out {
                Some(path) => std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
