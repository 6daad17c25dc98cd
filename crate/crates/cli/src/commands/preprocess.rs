//! `ictus preprocess` — manifest → standardized spectrogram tensor cache.
//!
//! Per clip: dropout scan (heavily dropped clips are excluded and recorded),
//! anti-aliased decimation, segmentation, per-segment STFT log-power tensor
//! written as a binary blob. The elementwise standardizer is fit on the raw
//! *train* tensors only — test data never leaks into the normalization —
//! and stored in the cache index next to the pipeline settings that
//! produced it.

use ictus_core::ieeg::{self, Split};
use ictus_core::spectro::{self, CacheEntry, CacheIndex, ExcludedClip};
use ictus_core::{signal, Error, Result};

use crate::config::{required_path, RunConfig};
use crate::report::ensure_dir;
use crate::PreprocessArgs;

pub fn run(args: &PreprocessArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(f) = args.factor {
        cfg.pipeline.decimation_factor = f;
        cfg.pipeline.validate()?;
    }
    let manifest = required_path(&cfg.paths.data, "data")?;
    let dataset = ieeg::load_manifest(manifest)?;
    ensure_dir(&args.out)?;

    let mut entries: Vec<CacheEntry> = Vec::new();
    let mut excluded: Vec<ExcludedClip> = Vec::new();
    let mut ref_shape: Option<(usize, usize, usize)> = None;

    for clip_ref in &dataset.clips {
        let clip = clip_ref.load()?;
        let dropout = signal::detect_dropout(&clip);
        if dropout.fraction >= cfg.pipeline.dropout_exclude_threshold {
            excluded.push(ExcludedClip {
                clip_id: clip.clip_id.clone(),
                patient_id: clip.patient_id.clone(),
                dropout_fraction: dropout.fraction,
            });
            continue;
        }
        let decimated = signal::decimate(&clip, &cfg.pipeline)?;
        let segments = signal::segment_clip(&decimated, &cfg.pipeline)?;
        for seg in &segments {
            let tensor = spectro::segment_to_tensor(seg, &cfg.stft)?;
            let shape = tensor.shape();
            match ref_shape {
                None => ref_shape = Some(shape),
                Some(want) if want != shape => {
                    return Err(Error::ShapeMismatch(format!(
                        "clip {} yields {}x{}x{} tensors but the cache holds {}x{}x{}",
                        clip.clip_id, shape.0, shape.1, shape.2, want.0, want.1, want.2
                    )));
                }
                Some(_) => {}
            }
            let file = format!("{}.s{:02}.bin", clip.clip_id, seg.segment_index);
            spectro::write_tensor_blob(&tensor, &args.out.join(&file))?;
            entries.push(CacheEntry {
                file,
                clip_id: clip.clip_id.clone(),
                patient_id: clip.patient_id.clone(),
                split: clip_ref.split,
                segment_index: seg.segment_index,
                label: clip.header.label,
                n_channels: shape.0 as u32,
                n_freq: shape.1 as u32,
                n_frames: shape.2 as u32,
            });
        }
    }

    if entries.is_empty() {
        return Err(Error::EmptyInput(
            "no clips survived preprocessing; cannot build a cache".into(),
        ));
    }
    let shape = ref_shape.expect("entries imply a shape");

    let train_files: Vec<String> = entries
        .iter()
        .filter(|e| e.split == Split::Train)
        .map(|e| e.file.clone())
        .collect();
    let standardizer = spectro::fit_standardizer(shape, train_files.len(), |i, out| {
        let path = args.out.join(&train_files[i]);
        let (_dims, data) = spectro::read_tensor_blob(&path)?;
        if data.len() != out.len() {
            return Err(Error::ShapeMismatch(format!(
                "blob {} holds {} values, expected {}",
                path.display(),
                data.len(),
                out.len()
            )));
        }
        for (o, v) in out.iter_mut().zip(&data) {
            *o = *v as f64;
        }
        Ok(())
    })?;

    let index = CacheIndex {
        pipeline: cfg.pipeline.clone(),
        stft: cfg.stft.clone(),
        standardizer,
        entries,
        excluded,
    };
    spectro::save_cache_index(&index, &args.out)?;
    println!(
        "cache: {} tensors of {}x{}x{} ({} train), {} clips excluded -> {}",
        index.entries.len(),
        shape.0,
        shape.1,
        shape.2,
        train_files.len(),
        index.excluded.len(),
        args.out.display()
    );
    Ok(())
}
