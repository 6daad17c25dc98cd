//! `ictus synth` — synthetic dataset generation.

use ictus_core::synth;
use ictus_core::Result;

use crate::config::RunConfig;
use crate::report::ensure_dir;
use crate::SynthArgs;

pub fn run(args: &SynthArgs) -> Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let mut synth_cfg = cfg.synth;
    if let Some(seed) = args.seed {
        synth_cfg.rng_seed = seed;
    }
    ensure_dir(&args.out)?;
    let dataset = synth::generate(&synth_cfg, &args.out)?;
    for ((patient, split), counts) in &dataset.counts {
        println!(
            "{patient} {split}: {} interictal + {} preictal clips",
            counts.interictal, counts.preictal
        );
    }
    println!("manifest: {}", dataset.manifest_path.display());
    Ok(())
}
