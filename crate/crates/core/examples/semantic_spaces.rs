//! Semantic-space utilities: a word space, its class-similarity SVD
//! subspace, the Gaussian σ rule and nearest-vocabulary search.

use std::collections::HashSet;

use semaug::semantic::{build_similarity, nearest_vocab, sigma_for, svd_space, SpaceKind};
use semaug::synth::{generate, SynthConfig};
use semaug::Result;

fn main() -> Result<()> {
    let data = generate(&SynthConfig::default(), 1)?;
    let words = data.words.clone().into_space(SpaceKind::Word)?;
    let vocab = data.vocab.clone().into_vocabulary()?;
    println!(
        "{} class vectors of dim {}, vocabulary of {}",
        words.len(),
        words.dim(),
        vocab.len()
    );

    let labels: Vec<&str> = words.labels().iter().map(String::as_str).collect();
    let sim = build_similarity(&words, &labels)?;
    let (svd, dec) = svd_space(&sim)?;
    let shown: Vec<String> = dec.sigma.iter().take(6).map(|s| format!("{s:.3}")).collect();
    println!(
        "SVD space dim {}, leading singular values {}",
        svd.dim(),
        shown.join(" ")
    );

    let me = words.require(labels[0])?;
    let others: Vec<(&str, &[f64])> = labels[1..].iter().map(|l| (*l, words.require(l).unwrap())).collect();
    println!("sigma for {} = {:.4}", labels[0], sigma_for(me, &labels[0], &others)?);

    let exclude = HashSet::from([labels[0].to_string()]);
    for n in nearest_vocab(me, &vocab, 4, &exclude)? {
        println!("  neighbor {:10} cosine {:.4}", n.token, n.score);
    }
    Ok(())
}
