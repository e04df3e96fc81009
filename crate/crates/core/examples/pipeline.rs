//! The command pipeline driven from a configuration: generate data, train,
//! augment, evaluate and build the SVD space, all inside a temporary
//! directory.

use semaug::config::RunConfig;
use semaug::pipeline;
use semaug::Result;

fn main() -> Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let d = dir.path().display();
    let mut cfg = RunConfig::parse(
        &format!(
            "seed = 9\n\
             data_dir = {d}/data\n\
             checkpoint = {d}/model.trin\n\
             trinet.preset = small_data\n\
             trinet.epochs = 30\n\
             eval.episodes = 100\n"
        ),
        "example",
    )?;
    println!("{}", pipeline::cmd_gen_synth(&cfg)?.summary);
    println!("{}", pipeline::cmd_train(&cfg)?.summary);

    cfg.apply(&[("out".into(), format!("{d}/augmented.mlfa"))])?;
    println!("{}", pipeline::cmd_augment(&cfg)?.summary);

    cfg.apply(&[("out".into(), format!("{d}/report.txt"))])?;
    let (outcome, report) = pipeline::cmd_eval(&cfg)?;
    println!("{}", outcome.summary);
    println!(
        "report header: way = {:?}, shot = {:?}",
        report.get("way"),
        report.get("shot")
    );

    cfg.apply(&[("augment.methods".into(), "none".into())])?;
    println!("without augmentation: {}", pipeline::cmd_eval(&cfg)?.0.summary);

    cfg.apply(&[("out".into(), format!("{d}/svd.txt"))])?;
    println!("{}", pipeline::cmd_svd(&cfg)?.summary);

    let manifest = std::fs::read_to_string(dir.path().join("report.txt.run")).expect("manifest");
    println!("eval run manifest begins:");
    for line in manifest.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
