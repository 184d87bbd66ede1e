//! One function per subcommand. Each returns the library error type; the
//! entry point maps errors to exit codes and messages.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use wigcn::{
    evaluate_model, export_embeddings, forward, k_core_filter, load_checkpoint,
    load_interactions, save_checkpoint, topk_ranking, train_test_split, train_with, Checkpoint,
    Error, GraphInputs, InteractionDataset, Result,
};

use crate::config::RunConfig;

/// Ingestion pipeline shared by every subcommand: parse, filter, split.
pub fn load_dataset(config: &RunConfig) -> Result<InteractionDataset> {
    let raw = load_interactions(&config.dataset_path, config.dataset_format)?;
    let filtered = k_core_filter(&raw, config.k_core);
    if filtered.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no interactions survive the {}-core filter on {}",
            config.k_core,
            config.dataset_path.display()
        )));
    }
    train_test_split(&filtered, config.test_fraction, config.seed)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize without maps or NaN keys")
}

pub fn cmd_stats(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    println!("{}", to_json(&dataset.stats()));
    Ok(())
}

fn checkpoint_for(
    params: wigcn::ModelParams,
    config: &RunConfig,
    dataset: &InteractionDataset,
) -> Checkpoint {
    Checkpoint {
        params,
        variant: config.variant,
        leaky_slope: config.leaky_slope,
        n_users: dataset.n_users,
        n_items: dataset.n_items,
    }
}

#[derive(Serialize)]
struct TrainReport {
    epochs: usize,
    final_mean_loss: f64,
    checkpoint: String,
    history: String,
}

pub fn cmd_train(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    let inputs = GraphInputs::build(&dataset.interaction_matrix()?)?;
    let train_config = config.train_config();
    fs::create_dir_all(&config.output_dir)?;
    let history_path = config.output_dir.join("history.jsonl");
    let mut history_file = BufWriter::new(File::create(&history_path)?);

    let (params, history) = train_with(&dataset, &inputs, &train_config, |params, stats| {
        let line = serde_json::to_string(stats)
            .expect("epoch stats are a flat struct of finite numbers");
        writeln!(history_file, "{line}")?;
        if config.checkpoint_every > 0 && stats.epoch % config.checkpoint_every == 0 {
            let path = config.output_dir.join(format!("epoch_{:04}.ckpt", stats.epoch));
            save_checkpoint(&path, &checkpoint_for(params.clone(), config, &dataset))?;
        }
        Ok(())
    })?;
    history_file.flush()?;

    let checkpoint_path = config.output_dir.join("model.ckpt");
    save_checkpoint(&checkpoint_path, &checkpoint_for(params, config, &dataset))?;
    println!(
        "{}",
        to_json(&TrainReport {
            epochs: history.len(),
            final_mean_loss: history.last().map_or(f64::NAN, |s| s.mean_loss),
            checkpoint: checkpoint_path.display().to_string(),
            history: history_path.display().to_string(),
        })
    );
    Ok(())
}

/// Load a checkpoint and insist it was trained on a dataset of this shape.
fn load_matching_checkpoint(
    path: &Path,
    dataset: &InteractionDataset,
) -> Result<Checkpoint> {
    let checkpoint = load_checkpoint(path)?;
    if checkpoint.n_users != dataset.n_users || checkpoint.n_items != dataset.n_items {
        return Err(Error::DimensionMismatch {
            context: "checkpoint versus dataset".into(),
            expected: format!("{} users x {} items", dataset.n_users, dataset.n_items),
            actual: format!("{} users x {} items", checkpoint.n_users, checkpoint.n_items),
        });
    }
    Ok(checkpoint)
}

pub fn cmd_evaluate(config: &RunConfig, checkpoint_path: &Path) -> Result<()> {
    let dataset = load_dataset(config)?;
    let checkpoint = load_matching_checkpoint(checkpoint_path, &dataset)?;
    let inputs = GraphInputs::build(&dataset.interaction_matrix()?)?;
    let trace = forward(
        &checkpoint.params,
        &inputs,
        checkpoint.variant,
        checkpoint.leaky_slope,
    )?;
    let metrics = evaluate_model(&trace, &dataset, config.eval_k)?;
    println!("{}", to_json(&metrics));
    Ok(())
}

#[derive(Serialize)]
struct Recommendation {
    item: u64,
    score: f64,
}

pub fn cmd_recommend(
    config: &RunConfig,
    checkpoint_path: &Path,
    user_external_id: u64,
) -> Result<()> {
    let k = config.eval_k;
    if k == 0 {
        println!("[]");
        return Ok(());
    }
    let dataset = load_dataset(config)?;
    let checkpoint = load_matching_checkpoint(checkpoint_path, &dataset)?;
    let user = dataset
        .user_index(user_external_id)
        .ok_or(Error::UnknownUser(user_external_id))?;
    let inputs = GraphInputs::build(&dataset.interaction_matrix()?)?;
    let trace = forward(
        &checkpoint.params,
        &inputs,
        checkpoint.variant,
        checkpoint.leaky_slope,
    )?;
    let scores = wigcn::predict_scores(&trace, user)?;
    let exclude = dataset.train_positives[user].iter().copied().collect();
    let ranked: Vec<Recommendation> = topk_ranking(&scores, &exclude, k)
        .into_iter()
        .map(|item| Recommendation {
            item: dataset.item_ids[item],
            score: scores[item],
        })
        .collect();
    println!("{}", to_json(&ranked));
    Ok(())
}

pub fn cmd_export_embeddings(
    config: &RunConfig,
    checkpoint_path: &Path,
    out_path: &Path,
) -> Result<()> {
    let dataset = load_dataset(config)?;
    let checkpoint = load_matching_checkpoint(checkpoint_path, &dataset)?;
    let inputs = GraphInputs::build(&dataset.interaction_matrix()?)?;
    let trace = forward(
        &checkpoint.params,
        &inputs,
        checkpoint.variant,
        checkpoint.leaky_slope,
    )?;
    export_embeddings(
        out_path,
        &trace.final_embedding,
        &dataset.user_ids,
        &dataset.item_ids,
    )?;
    eprintln!(
        "wrote {} embedding rows of width {} to {}",
        trace.final_embedding.nrows(),
        trace.final_embedding.ncols(),
        out_path.display()
    );
    Ok(())
}
