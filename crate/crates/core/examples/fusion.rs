//! Two modalities share one embedding. The fused representation of a video
//! concatenates the per-modality predictions.

use videostory::embedding::validation_objective;
use videostory::fusion::{embed_fused, sgd_train_fused};
use videostory::corpus::split_corpus;
use videostory::embedding::Hyperparams;
use videostory::oracle::{synth_corpus, SynthSpec};

fn main() -> videostory::Result<()> {
    let synth = synth_corpus(&SynthSpec { n: 300, m: 40, dims: vec![12, 20], k_true: 8, seed: 11, ..SynthSpec::default() })?;
    let (train, val) = split_corpus(&synth.corpus, 0.75, 2)?;
    let hp = Hyperparams { k: 6, eta: 0.01, epochs: 20, seed: 5, ..Hyperparams::default() };

    for gammas in [[1.0, 1.0], [1.0, 0.25], [0.25, 1.0]] {
        let model = sgd_train_fused(&train, &hp, &gammas)?;
        println!("gammas {gammas:?}: validation objective {:.4}", validation_objective(&model, &val)?);
    }

    let model = sgd_train_fused(&train, &hp, &[1.0, 1.0])?;
    let xs = [val.modality(0).row(0), val.modality(1).row(0)];
    let s = embed_fused(&model, &xs)?;
    println!("fused embedding of {} has {} entries ({} per modality)", val.video_ids()[0], s.len(), model.k());
    Ok(())
}
