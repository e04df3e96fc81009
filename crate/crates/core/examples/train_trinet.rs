//! Jointly trains the toy extractor and a TriNet on a synthetic base set,
//! saves a checkpoint and checks the reloaded model encodes identically.

use semaug::extractor::{ExtractorConfig, ToyExtractor};
use semaug::rng::{from_seed, rng_for, stream};
use semaug::semantic::SpaceKind;
use semaug::synth::{generate, SynthConfig};
use semaug::trinet::{load_model, save_model, train, Checkpoint, Mode, Trainee, TriNetConfig, TriNetModel};
use semaug::Result;

fn main() -> Result<()> {
    let seed = 7;
    let sc = SynthConfig::default();
    let data = generate(&sc, seed)?;
    let space = data.words.clone().into_space(SpaceKind::Word)?;
    let dims = vec![16, 24, 32, 48];
    let mut ex = ToyExtractor::new(
        ExtractorConfig {
            input_dim: sc.input_dim,
            level_dims: dims.clone(),
            n_classes: sc.base_classes,
        },
        &mut rng_for(seed, &[stream::INIT_EXTRACTOR]),
    )?;
    let mut cfg = TriNetConfig::small_data(dims, sc.semantic_dim);
    cfg.epochs = 40;
    let mut tn = TriNetModel::new(cfg, &mut rng_for(seed, &[stream::INIT_TRINET]))?;
    let log = train(
        Trainee::Joint {
            extractor: &mut ex,
            update: true,
        },
        &mut tn,
        &data.base,
        &data.names,
        &space,
        &mut rng_for(seed, &[stream::TRAIN]),
    )?;
    for e in log.epochs.iter().filter(|e| e.epoch % 10 == 0 || e.epoch == 1) {
        println!("{e}");
    }

    let path = std::env::temp_dir().join("semaug_example.trin");
    save_model(
        &path,
        &Checkpoint {
            trinet: tn.clone(),
            extractor: Some(ex.clone()),
        },
    )?;
    let ck = load_model(&path)?;
    std::fs::remove_file(&path).ok();
    let f = ex.extract(data.novel.records[0].feature.last())?;
    let a = tn.encode(&f, Mode::Infer, &mut from_seed(0))?;
    let b = ck.trinet.encode(&f, Mode::Infer, &mut from_seed(0))?;
    println!("reloaded checkpoint encodes identically: {}", a == b);
    Ok(())
}
