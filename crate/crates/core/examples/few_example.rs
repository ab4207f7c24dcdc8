//! Few-example event recognition: a kernel classifier per event on top of
//! several representations and fusion strategies.

use videostory::corpus::split_corpus;
use videostory::embedding::Hyperparams;
use videostory::eval::{few_example_harness, FusionStrategy, HarnessConfig, RepresentationSpec};
use videostory::oracle::{synth_corpus, SynthSpec};

fn main() -> videostory::Result<()> {
    let synth = synth_corpus(&SynthSpec {
        n: 600,
        dims: vec![12, 16],
        noise_sigma: 0.5,
        positives_per_event: 30,
        seed: 4,
        ..SynthSpec::default()
    })?;
    // Embeddings are learned on one part, classifiers on another.
    let (learn, rest) = split_corpus(&synth.corpus, 0.5, 1)?;
    let (train, test) = split_corpus(&rest, 0.5, 2)?;
    let cfg = HarnessConfig { max_positives: Some(10), ..HarnessConfig::default() };
    let hp = Hyperparams { k: 10, eta: 0.01, epochs: 20, seed: 9, ..Hyperparams::default() };

    let runs = [
        ("raw", RepresentationSpec::RawFeatures, FusionStrategy::Early),
        ("raw", RepresentationSpec::RawFeatures, FusionStrategy::Late),
        ("videostory", RepresentationSpec::VideoStory { hp: hp.clone() }, FusionStrategy::VsEarly),
        ("videostory", RepresentationSpec::VideoStory { hp: hp.clone() }, FusionStrategy::VsLate),
        ("videostory", RepresentationSpec::VideoStory { hp }, FusionStrategy::VsJoint),
    ];
    for (name, spec, strategy) in runs {
        let report = few_example_harness(&learn, &train, &test, &synth.labels, &spec, strategy, &cfg)?;
        println!("{name:<11} {strategy:<9} mAP {:.3}", report.map);
    }
    Ok(())
}
