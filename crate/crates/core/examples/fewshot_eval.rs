//! Episodic 5-way 1-shot evaluation with each classifier, with and without
//! SG+SN augmentation, reporting the mean and 95% half-width.

use semaug::augment::{AugmentConfig, Augmenter, SpaceModel};
use semaug::extractor::{ExtractorConfig, ToyExtractor};
use semaug::fewshot::{evaluate, Classifier, EvalAugmentation, EvalOptions, LrConfig, Protocol, SvmConfig};
use semaug::rng::{rng_for, stream};
use semaug::semantic::SpaceKind;
use semaug::synth::{generate, SynthConfig};
use semaug::trinet::{train, Trainee, TriNetConfig, TriNetModel};
use semaug::Result;

fn main() -> Result<()> {
    let seed = 2;
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
    let mut tn = TriNetModel::new(
        TriNetConfig::small_data(dims, sc.semantic_dim),
        &mut rng_for(seed, &[stream::INIT_TRINET]),
    )?;
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
    let acfg = AugmentConfig::default();
    let classifiers = [
        Classifier::Knn { k: 1 },
        Classifier::Svm(SvmConfig::default()),
        Classifier::Lr(LrConfig::default()),
    ];
    for classifier in classifiers {
        let opts = EvalOptions {
            protocol: Protocol {
                episodes: 100,
                ..Protocol::default()
            },
            classifier,
            seed,
            ..Default::default()
        };
        let plain = evaluate(&novel, None, &opts)?;
        let augmented = evaluate(
            &novel,
            Some(EvalAugmentation {
                augmenter: &aug,
                config: &acfg,
            }),
            &opts,
        )?;
        println!(
            "{:3}: none {:.4} ± {:.4}   SG+SN {:.4} ± {:.4}",
            classifier.name(),
            plain.mean,
            plain.ci95,
            augmented.mean,
            augmented.ci95
        );
    }
    Ok(())
}
