//! Extracts multi-level features with the toy extractor, writes and reads
//! them back as an MLFA file, pushes a level through the remaining blocks
//! and inverts a feature back to an input.

use semaug::extractor::{
    invert, load_features, save_features, DatasetSplit, ExtractorConfig, InversionConfig, MultiLevelFeature, Record,
    SplitRole, ToyExtractor,
};
use semaug::rng::{rng_for, stream};
use semaug::Result;

fn main() -> Result<()> {
    let seed = 3;
    let ex = ToyExtractor::new(
        ExtractorConfig {
            input_dim: 12,
            level_dims: vec![16, 24, 32, 48],
            n_classes: 4,
        },
        &mut rng_for(seed, &[stream::INIT_EXTRACTOR]),
    )?;
    let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let f = ex.extract(&x)?;
    println!("level dims {:?}", f.dims());

    let raw = DatasetSplit::new(
        SplitRole::Novel,
        vec![12],
        vec![Record {
            id: 1,
            class: 0,
            feature: MultiLevelFeature::new(vec![x.clone()])?,
        }],
    )?;
    let feats = ex.extract_split(&raw)?;
    let path = std::env::temp_dir().join("semaug_example_features.mlfa");
    save_features(&path, &feats)?;
    let back = load_features(&path, SplitRole::Novel)?;
    let gap = back.records[0]
        .feature
        .levels()
        .iter()
        .flatten()
        .zip(feats.records[0].feature.levels().iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("MLFA round trip (f32 storage): max gap {gap:.2e}");
    std::fs::remove_file(&path).ok();

    let through = ex.feed_through(2, f.level(2))?;
    let gap = through
        .iter()
        .zip(f.last())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("feed-through of level 2 reproduces the last level (max gap {gap:.2e})");

    let inv = invert(
        &ex,
        f.level(2),
        2,
        &InversionConfig::default(),
        &mut rng_for(seed, &[stream::INVERT]),
    )?;
    println!(
        "inversion objective {:.4} -> {:.4} over {} steps",
        inv.initial_objective(),
        inv.objective,
        inv.trace.len() - 1
    );
    Ok(())
}
