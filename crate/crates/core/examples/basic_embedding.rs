//! Train a single-modality embedding on a synthetic corpus, then describe an
//! unseen video by its predicted terms.

use videostory::corpus::split_corpus;
use videostory::embedding::{embed, predict_terms, sgd_train, top_terms, validation_objective, Hyperparams};
use videostory::oracle::{synth_corpus, SynthSpec};

fn main() -> videostory::Result<()> {
    let synth = synth_corpus(&SynthSpec { n: 400, m: 50, dims: vec![16], k_true: 8, seed: 7, ..SynthSpec::default() })?;
    let (train, test) = split_corpus(&synth.corpus, 0.8, 1)?;

    let hp = Hyperparams { k: 8, eta: 0.02, epochs: 30, seed: 3, ..Hyperparams::default() };
    let model = sgd_train(&train, &hp, 0)?;
    println!("validation objective: {:.4}", validation_objective(&model, &test)?);

    let video = 0;
    let s = embed(&model, &test.modality(0).row(video))?;
    let predicted = predict_terms(&model, &s)?;
    let truth: Vec<&str> = test.term_matrix().column(video).iter().map(|&j| test.vocabulary().term(j as usize)).collect();
    println!("video {} is described by: {}", test.video_ids()[video], truth.join(" "));
    for (term, score) in top_terms(&predicted, 5) {
        println!("  {:<10} {score:.3}", test.vocabulary().term(term));
    }
    Ok(())
}
