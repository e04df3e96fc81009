//! Augments a 5-way 1-shot support set with each method and reports how
//! many training vectors every support instance becomes.

use std::collections::HashMap;

use semaug::augment::{AugmentConfig, AugmentedSet, Augmenter, LayerPolicy, Method, SpaceModel};
use semaug::extractor::{ExtractorConfig, ToyExtractor};
use semaug::fewshot::sample_episode;
use semaug::rng::{rng_for, stream};
use semaug::semantic::SpaceKind;
use semaug::synth::{generate, SynthConfig};
use semaug::trinet::{train, Trainee, TriNetConfig, TriNetModel};
use semaug::Result;

fn main() -> Result<()> {
    let seed = 4;
    let sc = SynthConfig::default();
    let data = generate(&sc, seed)?;
    let space = data.words.clone().into_space(SpaceKind::Word)?;
    let vocab = data.vocab.clone().into_vocabulary()?;
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
    cfg.epochs = 20;
    let mut tn = TriNetModel::new(cfg, &mut rng_for(seed, &[stream::INIT_TRINET]))?;
    let trainee = Trainee::Joint {
        extractor: &mut ex,
        update: true,
    };
    train(
        trainee,
        &mut tn,
        &data.base,
        &data.names,
        &space,
        &mut rng_for(seed, &[stream::TRAIN]),
    )?;

    let novel = ex.extract_split(&data.novel)?;
    let episode = sample_episode(&novel, 5, 1, 15, &mut rng_for(seed, &[stream::EPISODE]))?;
    let aug = Augmenter {
        extractor: Some(&ex),
        word: Some(SpaceModel {
            trinet: &tn,
            fallback_sigma: None,
            class_vectors: None,
        }),
        vocab: Some(&vocab),
        ..Default::default()
    };
    let runs = [
        ("SG multi-level", vec![Method::Sg], LayerPolicy::Multi),
        ("SN multi-level", vec![Method::Sn], LayerPolicy::Multi),
        ("SG last level", vec![Method::Sg], LayerPolicy::Single(4)),
        ("SG+SN multi-level", vec![Method::Sg, Method::Sn], LayerPolicy::Multi),
        ("final-layer noise", vec![Method::Noise], LayerPolicy::Multi),
    ];
    for (name, methods, policy) in runs {
        let cfg = AugmentConfig {
            methods,
            policy,
            ..Default::default()
        };
        let out = aug.augment_support(&episode.support, &cfg, seed, 0)?;
        let mut per: HashMap<u64, usize> = HashMap::new();
        for f in &out.features {
            *per.entry(f.source).or_default() += 1;
        }
        let each = 1 + per.values().next().copied().unwrap_or(0);
        println!(
            "{name:18} {} synthesized vectors, {each} training instances per support example",
            out.features.len()
        );
        if name == "SG+SN multi-level" {
            let set = AugmentedSet::new(48, out.features)?;
            println!("manifest head:");
            for line in set.manifest_text().lines().take(4) {
                println!("  {line}");
            }
        }
    }
    Ok(())
}
