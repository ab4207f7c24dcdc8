//! The comparison representations: term attributes chosen by frequency or
//! by cross-validation, and the two-step description embedding.

use videostory::baselines::{train_description_embedding, train_term_attributes, train_term_attributes_f};
use videostory::embedding::{total_objective, Hyperparams};
use videostory::oracle::{closed_form_s, synth_corpus, SynthSpec};

fn main() -> videostory::Result<()> {
    let synth = synth_corpus(&SynthSpec { n: 300, m: 40, dims: vec![12], k_true: 8, seed: 3, ..SynthSpec::default() })?;
    let corpus = &synth.corpus;
    let vocab = corpus.vocabulary();

    let frequent = train_term_attributes_f(corpus, 5, 1.0)?;
    let names: Vec<&str> = frequent.selected_terms.iter().map(|&j| vocab.term(j)).collect();
    println!("most frequent terms: {}", names.join(", "));

    let selected = train_term_attributes(corpus, 5, 1.0, 0)?;
    for (&j, score) in selected.selected_terms.iter().zip(&selected.cv_scores) {
        println!("  {:<8} held-out AP {score:.3}", vocab.term(j));
    }
    let reps = selected.represent(corpus)?;
    println!("attribute representation: {} x {}", reps.nrows(), reps.ncols());

    let hp = Hyperparams { k: 8, ..Hyperparams::default() };
    let model = train_description_embedding(corpus, &hp)?;
    let y = corpus.term_matrix().to_dense();
    let x = corpus.modality(0).values();
    let s = closed_form_s(&model.textual, &[model.w().clone()], &y, &[x], &[1.0], hp.lambda_s)?;
    println!("two-step embedding objective: {:.3}", total_objective(&model.textual, model.w(), &s, &y, x, &hp)?);
    Ok(())
}
