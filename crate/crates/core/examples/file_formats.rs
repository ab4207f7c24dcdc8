//! Round-trip every on-disk format: corpus directory, model, ranking,
//! labels and event definitions.

use videostory::corpus::Corpus;
use videostory::embedding::{read_model, sgd_train, write_model, Hyperparams};
use videostory::eval::{read_labels, write_labels};
use videostory::oracle::{synth_corpus, write_manifest, SynthSpec};
use videostory::zeroshot::{build_event_query, cosine_rank, read_events, read_ranking, write_event, write_ranking};

fn main() -> videostory::Result<()> {
    let dir = std::env::temp_dir().join(format!("videostory-formats-{}", std::process::id()));
    std::fs::create_dir_all(dir.join("events"))?;
    let synth = synth_corpus(&SynthSpec { n: 100, m: 30, dims: vec![8], k_true: 6, n_events: 2, seed: 1, ..SynthSpec::default() })?;

    synth.corpus.save(&dir.join("corpus"))?;
    assert_eq!(Corpus::load(&dir.join("corpus"))?, synth.corpus);
    write_manifest(&dir.join("manifest.txt"), &synth)?;

    let model = sgd_train(&synth.corpus, &Hyperparams { k: 4, epochs: 2, ..Hyperparams::default() }, 0)?;
    write_model(&dir.join("model.vsm"), &model)?;
    assert_eq!(read_model(&dir.join("model.vsm"))?, model);

    for event in &synth.events {
        write_event(&dir.join("events").join(format!("{}.txt", event.event_id)), event)?;
    }
    let events = read_events(&dir.join("events"))?;
    assert_eq!(events, synth.events);

    write_labels(&dir.join("labels.tsv"), &synth.labels)?;
    assert_eq!(read_labels(&dir.join("labels.tsv"))?, synth.labels);

    let query = build_event_query(&events[0], synth.corpus.vocabulary())?;
    let ranking = cosine_rank(&model, &query, &synth.corpus)?;
    let path = dir.join("ranking.tsv");
    write_ranking(&path, &ranking)?;
    let back = read_ranking(&path, &ranking.event_id)?;
    println!("{}", std::fs::read_to_string(&path)?.lines().take(3).collect::<Vec<_>>().join("\n"));
    println!("ranking of {} videos read back", back.entries.len());

    for entry in std::fs::read_dir(&dir)? {
        println!("wrote {}", entry?.path().display());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
