//! `ictus train` — fit the multi-scale CNN on a preprocessed cache.

use ictus_core::ieeg::Split;
use ictus_core::model::{self, DiskSegmentStore, ModelMeta, SegmentStore};
use ictus_core::spectro;
use ictus_core::Result;

use crate::config::{required_path, RunConfig};
use crate::report::{csv_float, ensure_dir, write_csv};
use crate::TrainArgs;

pub fn run(args: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let mut train_cfg = cfg.train.clone();
    if let Some(seed) = args.seed {
        train_cfg.rng_seed = seed;
    }
    let cache_dir = required_path(&cfg.paths.cache, "cache")?;
    let index = spectro::load_cache_index(cache_dir)?;
    let mut store = DiskSegmentStore::from_cache(cache_dir, &index, Split::Train)?;
    let input_shape = store.shape();
    ensure_dir(&args.out)?;

    let outcome = model::train(&mut store, &cfg.arch, &train_cfg, &args.out)?;

    // The best-epoch snapshot is train()'s working file, not an artifact.
    let snapshot = args.out.join("best-epoch.params");
    if snapshot.exists() {
        let _ = std::fs::remove_file(&snapshot);
    }

    let meta = ModelMeta {
        input_shape,
        arch: cfg.arch.clone(),
        pipeline: index.pipeline.clone(),
        stft: index.stft.clone(),
        standardizer: index.standardizer.clone(),
    };
    let model_path = args.out.join("model.json");
    model::save_model(&outcome.net, &meta, &model_path)?;

    let rows: Vec<String> = outcome
        .history
        .iter()
        .map(|e| format!("{},{},{}", e.epoch, csv_float(e.train_loss), csv_float(e.val_auc)))
        .collect();
    write_csv(&args.out.join("history.csv"), "epoch,train_loss,val_auc", &rows)?;

    match outcome.best_epoch {
        Some(best) => println!(
            "trained {} epochs (class weight {:.3}), best validation AUC at epoch {best}",
            outcome.history.len(),
            outcome.class_weight_pos
        ),
        None => println!(
            "trained {} epochs (class weight {:.3}), no usable validation split",
            outcome.history.len(),
            outcome.class_weight_pos
        ),
    }
    println!("model: {}", model_path.display());
    Ok(())
}
