//! Rank videos for events known only by their text definition. Each event
//! gets its own model trained with a term-sensitive loss.

use videostory::eval::{mean_average_precision, ranking_ap};
use videostory::embedding::Hyperparams;
use videostory::oracle::{synth_corpus, SynthSpec};
use videostory::zeroshot::{build_event_query, cosine_rank, train_zero};

fn main() -> videostory::Result<()> {
    let synth = synth_corpus(&SynthSpec { n: 500, noise_sigma: 0.0, seed: 8, ..SynthSpec::default() })?;
    let corpus = &synth.corpus;
    let hp = Hyperparams { k: 10, eta: 0.02, epochs: 30, lambda_a: 1e-3, lambda_s: 1e-3, lambda_w: 1e-3, alpha: 0.9, seed: 5, ..Hyperparams::default() };

    let mut results = Vec::new();
    for (event, labels) in synth.events.iter().zip(&synth.labels) {
        let (model, importance) = train_zero(corpus, &hp, event, &[1.0])?;
        let query = build_event_query(event, corpus.vocabulary())?;
        let ranking = cosine_rank(&model, &query, corpus)?;
        let ap = ranking_ap(&ranking, labels)?;
        println!(
            "{} ({} definition terms): AP {:.3}, top video {}",
            event.event_id,
            importance.matched_terms(),
            ap.ap,
            ranking.entries[0].video_id
        );
        results.push(ap);
    }
    println!("mAP {:.3}", mean_average_precision(&results)?);
    Ok(())
}
