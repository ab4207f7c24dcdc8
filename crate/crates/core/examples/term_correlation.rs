//! Terms that share a latent topic end up with correlated rows of A.

use videostory::embedding::{sgd_train, Hyperparams};
use videostory::oracle::{synth_corpus, SynthSpec};

fn main() -> videostory::Result<()> {
    let synth = synth_corpus(&SynthSpec { n: 400, m: 24, dims: vec![12], k_true: 6, n_events: 2, seed: 5, ..SynthSpec::default() })?;
    let corpus = &synth.corpus;
    let model = sgd_train(corpus, &Hyperparams { k: 6, eta: 0.02, epochs: 20, ..Hyperparams::default() }, 0)?;

    let shown = 8;
    let a = model.textual.rows(0, shown);
    let gram = a * a.transpose();
    let vocab = corpus.vocabulary();
    print!("{:>8}", "");
    for j in 0..shown {
        print!("{:>8}", vocab.term(j));
    }
    println!();
    for i in 0..shown {
        print!("{:>8}", vocab.term(i));
        for j in 0..shown {
            print!("{:>8.2}", gram[(i, j)]);
        }
        println!("   topic {}", synth.term_topics[i]);
    }
    Ok(())
}
