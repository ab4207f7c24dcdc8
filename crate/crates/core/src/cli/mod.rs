//! Command-line front end. Every subcommand reads its inputs from files,
//! takes options from flags and an optional `--config` file (flags win),
//! and writes deterministic outputs.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

pub use config::Config;

use crate::baselines::{
    train_description_embedding, train_term_attributes, train_term_attributes_f, write_attribute_model,
};
use crate::corpus::{
    build_vocabulary, read_descriptions, read_features, read_vocabulary, split_corpus, write_vocabulary, Corpus,
};
use crate::embedding::{
    grid_search, predict_terms, read_model, sgd_train, top_terms, write_model, EmbeddingModel, Hyperparams,
    StepSchedule,
};
use crate::error::{Error, Result};
use crate::eval::{
    few_example_harness, metrics_report, ranking_ap, read_labels, write_labels, ClassifierParams, FusionStrategy,
    HarnessConfig, RepresentationSpec,
};
use crate::fusion::{embed_fused, latent_sum, sgd_train_fused};
use crate::oracle::{synth_corpus, write_manifest, SynthSpec};
use crate::textfmt::sig9;
use crate::zeroshot::{
    build_event_query, cosine_rank, read_events, read_ranking, train_zero, write_event, write_ranking,
};

#[derive(Parser, Debug)]
#[command(name = "videostory", version, about = "Joint text-video embeddings for event recognition")]
#[command(args_override_self = true)]
struct Cli {
    /// Maximum worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build a term vocabulary from a descriptions file.
    BuildVocab(BuildVocabArgs),
    /// Encode descriptions and features into a corpus directory.
    Encode(EncodeArgs),
    /// Split a corpus into training and validation directories.
    Split(SplitArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Write the embedding of every video.
    Embed(EmbedArgs),
    /// Write the highest-scoring predicted terms of every video.
    PredictTerms(PredictArgs),
    /// Rank videos for each event definition by cosine similarity.
    Rank(RankArgs),
    /// Score rankings against labels, or run the few-example harness.
    Eval(EvalArgs),
    /// Generate a synthetic corpus with planted events.
    Synth(SynthArgs),
    /// Write A * A^T over the most frequent terms as TSV.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct BuildVocabArgs {
    /// Read options from a key = value file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `<video_id>\t<text>` per line.
    #[arg(long)]
    descriptions: PathBuf,
    /// Minimum number of videos a term must occur in.
    #[arg(long, default_value_t = crate::corpus::DEFAULT_MIN_OCCURRENCES)]
    min_occurrences: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    descriptions: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// `name=path.vsf`, once per modality (or comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    features: Vec<String>,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    val_out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ScheduleKind {
    Constant,
    InverseDecay,
}

#[derive(Args, Debug, Clone)]
struct HpArgs {
    /// Embedding dimensionality.
    #[arg(long, default_value_t = 2048)]
    k: usize,
    /// Sets lambda-a, lambda-s and lambda-w together.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_w: Option<f64>,
    /// SGD step size.
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "constant")]
    schedule: ScheduleKind,
    /// Rate of the inverse-decay schedule.
    #[arg(long, default_value_t = 1e-4)]
    decay_rate: f64,
    /// Weight of event-definition terms in zero-example training.
    #[arg(long, default_value_t = crate::zeroshot::DEFAULT_ALPHA)]
    alpha: f64,
}

impl HpArgs {
    fn hyperparams(&self) -> Hyperparams {
        let base = self.lambda.unwrap_or(1e-3);
        Hyperparams {
            k: self.k,
            lambda_a: self.lambda_a.unwrap_or(base),
            lambda_s: self.lambda_s.unwrap_or(base),
            lambda_w: self.lambda_w.unwrap_or(base),
            eta: self.eta,
            epochs: self.epochs,
            seed: self.seed,
            schedule: match self.schedule {
                ScheduleKind::Constant => StepSchedule::Constant,
                ScheduleKind::InverseDecay => StepSchedule::InverseDecay { rate: self.decay_rate },
            },
            alpha: self.alpha,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Vs,
    Fused,
    Zero,
    DescEmbed,
    TermAttr,
    TermAttrF,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Variant,
    #[arg(long)]
    corpus: PathBuf,
    /// Model file, or a directory of per-event models for `zero`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hp: HpArgs,
    /// Modality used by `vs` (default: the first).
    #[arg(long)]
    modality: Option<String>,
    /// Per-modality weights for `fused` and `zero` (default: all 1).
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<f64>,
    /// Event definition file or directory, for `zero`.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Number of term attributes.
    #[arg(long)]
    m_sel: Option<usize>,
    /// Ridge regularizer of the term-attribute scorers.
    #[arg(long, default_value_t = 1.0)]
    reg: f64,
    /// Validation corpus; with grid flags, `vs` keeps the best grid point.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    grid_lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_eta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_epochs: Vec<usize>,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Output TSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model file, or a directory holding `<event_id>.vsm` per event.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Event definition file or directory.
    #[arg(long)]
    events: PathBuf,
    /// Output directory; one `<event_id>.tsv` ranking per event.
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Representation {
    Raw,
    Vs,
    TermAttr,
    TermAttrF,
    DescEmbed,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `event_id\tvideo_id` per positive.
    #[arg(long)]
    labels: PathBuf,
    /// Directory of `<event_id>.tsv` rankings to score.
    #[arg(long, conflicts_with_all = ["strategy", "train", "test"])]
    rankings: Option<PathBuf>,
    /// Few-example harness: fusion strategy.
    #[arg(long, value_parser = parse_strategy, requires_all = ["train", "test"])]
    strategy: Option<FusionStrategy>,
    /// Corpus for learning representations (default: the training corpus).
    #[arg(long)]
    learn: Option<PathBuf>,
    /// Corpus for training the event classifiers.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "vs")]
    representation: Representation,
    #[command(flatten)]
    hp: HpArgs,
    #[arg(long)]
    m_sel: Option<usize>,
    /// Regularizer of the term-attribute scorers.
    #[arg(long, default_value_t = 1.0)]
    attr_reg: f64,
    /// Kernel classifier regularizer.
    #[arg(long, default_value_t = 1.0)]
    reg: f64,
    #[arg(long, default_value_t = 1.0)]
    rbf_gamma: f64,
    /// Train each classifier on at most this many positives.
    #[arg(long)]
    max_positives: Option<usize>,
    /// Report file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> std::result::Result<FusionStrategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 60)]
    m: usize,
    /// Feature dimensionality of each modality.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    k_true: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    term_threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    term_noise: f64,
    #[arg(long, default_value_t = 5)]
    n_events: usize,
    #[arg(long, default_value_t = 10)]
    positives_per_event: usize,
    #[arg(long, default_value_t = 0.3)]
    topic_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Vocabulary file naming the model's terms.
    #[arg(long)]
    vocab: PathBuf,
    /// Number of most frequent terms to include.
    #[arg(long, default_value_t = 20)]
    terms: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Runs the command line `argv` (program name first) and returns the exit status.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Usage(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Replaces `--config <file>` with the file's entries as flags, placed
/// right after the subcommand so that explicit flags override them.
fn expand_config(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let mut config_path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config_path = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config_path else { return Ok(rest) };
    let cmd = Cli::command();
    let pos = rest
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| cmd.find_subcommand(a.as_str()).is_some())
        .map(|(i, _)| i)
        .ok_or("--config needs a subcommand")?;
    let sub = cmd.find_subcommand(&rest[pos]).expect("found above");
    let extra = Config::load(Path::new(&path))?.to_args(sub)?;
    let tail = rest.split_off(pos + 1);
    rest.extend(extra);
    rest.extend(tail);
    Ok(rest)
}

fn dispatch(cmd: Cmd) -> CliResult {
    match cmd {
        Cmd::BuildVocab(a) => build_vocab(a),
        Cmd::Encode(a) => encode(a),
        Cmd::Split(a) => split(a),
        Cmd::Train(a) => train(a),
        Cmd::Embed(a) => embed(a),
        Cmd::PredictTerms(a) => predict(a),
        Cmd::Rank(a) => rank(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Synth(a) => synth(a),
        Cmd::Inspect(a) => inspect(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Data(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_vocab(a: BuildVocabArgs) -> CliResult {
    let d = read_descriptions(&a.descriptions)?;
    let v = build_vocabulary(&d, a.min_occurrences)?;
    write_vocabulary(&a.out, &v)?;
    Ok(())
}

fn encode(a: EncodeArgs) -> CliResult {
    let d = read_descriptions(&a.descriptions)?;
    let v = read_vocabulary(&a.vocab)?;
    let features = a
        .features
        .iter()
        .map(|spec| {
            let (name, path) = spec
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--features expects name=path, got {spec:?}")))?;
            Ok(read_features(Path::new(path), name)?)
        })
        .collect::<std::result::Result<Vec<_>, Failure>>()?;
    Corpus::assemble(&d, v, features)?.save(&a.out)?;
    Ok(())
}

fn split(a: SplitArgs) -> CliResult {
    let c = Corpus::load(&a.corpus)?;
    let (train, val) = split_corpus(&c, a.train_fraction, a.seed)?;
    train.save(&a.train_out)?;
    val.save(&a.val_out)?;
    Ok(())
}

fn gammas_for(given: &[f64], corpus: &Corpus) -> Vec<f64> {
    if given.is_empty() {
        vec![1.0; corpus.n_modalities()]
    } else {
        given.to_vec()
    }
}

fn train(a: TrainArgs) -> CliResult {
    let corpus = Corpus::load(&a.corpus)?;
    let hp = a.hp.hyperparams();
    match a.variant {
        Variant::Vs => {
            let modality = match &a.modality {
                None => 0,
                Some(name) => corpus
                    .modality_index(name)
                    .ok_or_else(|| Failure::Usage(format!("corpus has no modality {name:?}")))?,
            };
            let model = match &a.validation {
                Some(val) if !(a.grid_lambda.is_empty() && a.grid_eta.is_empty() && a.grid_epochs.is_empty()) => {
                    let val = Corpus::load(val)?;
                    let grid = expand_grid(&hp, &a.grid_lambda, &a.grid_eta, &a.grid_epochs);
                    let search = grid_search(&corpus, &val, &grid, modality)?;
                    for (g, s) in grid.iter().zip(&search.scores) {
                        eprintln!(
                            "grid lambda={} eta={} epochs={} validation={}",
                            sig9(g.lambda_a),
                            sig9(g.eta),
                            g.epochs,
                            sig9(*s)
                        );
                    }
                    search.model
                }
                Some(_) => return Err(Failure::Usage("--validation needs at least one --grid-* list".into())),
                None => sgd_train(&corpus, &hp, modality)?,
            };
            write_model(&a.out, &model)?;
        }
        Variant::Fused => {
            let model = sgd_train_fused(&corpus, &hp, &gammas_for(&a.gammas, &corpus))?;
            write_model(&a.out, &model)?;
        }
        Variant::DescEmbed => write_model(&a.out, &train_description_embedding(&corpus, &hp)?)?,
        Variant::Zero => {
            let events = a.events.as_ref().ok_or_else(|| Failure::Usage("--events is required for zero".into()))?;
            let events = read_events(events)?;
            fs::create_dir_all(&a.out).map_err(Error::from)?;
            let gammas = gammas_for(&a.gammas, &corpus);
            for e in &events {
                let (model, importance) = train_zero(&corpus, &hp, e, &gammas)?;
                if importance.is_empty_query() {
                    eprintln!("warning: event {} shares no terms with the vocabulary", e.event_id);
                }
                write_model(&a.out.join(format!("{}.vsm", e.event_id)), &model)?;
            }
        }
        Variant::TermAttr | Variant::TermAttrF => {
            let m_sel = a.m_sel.unwrap_or(hp.k);
            let model = if a.variant == Variant::TermAttr {
                train_term_attributes(&corpus, m_sel, a.reg, hp.seed)?
            } else {
                train_term_attributes_f(&corpus, m_sel, a.reg)?
            };
            write_attribute_model(&a.out, &model)?;
        }
    }
    Ok(())
}

fn expand_grid(base: &Hyperparams, lambdas: &[f64], etas: &[f64], epochs: &[usize]) -> Vec<Hyperparams> {
    let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let lambdas = or(lambdas, base.lambda_a);
    let etas = or(etas, base.eta);
    let epochs = if epochs.is_empty() { vec![base.epochs] } else { epochs.to_vec() };
    let mut grid = Vec::new();
    for &l in &lambdas {
        for &e in &etas {
            for &n in &epochs {
                grid.push(Hyperparams { lambda_a: l, lambda_s: l, lambda_w: l, eta: e, epochs: n, ..base.clone() });
            }
        }
    }
    grid
}

fn features_of(model: &EmbeddingModel, corpus: &Corpus, i: usize) -> Result<Vec<nalgebra::DVector<f64>>> {
    Ok(model.modality_map(corpus)?.iter().map(|&j| corpus.modality(j).row(i)).collect())
}

fn embed(a: EmbedArgs) -> CliResult {
    let model = read_model(&a.model)?;
    let corpus = Corpus::load(&a.corpus)?;
    let mut out = String::new();
    for i in 0..corpus.len() {
        let e = embed_fused(&model, &features_of(&model, &corpus, i)?)?;
        let vals: Vec<String> = e.iter().map(|v| sig9(*v)).collect();
        let _ = writeln!(out, "{}\t{}", corpus.video_ids()[i], vals.join("\t"));
    }
    emit(a.out.as_deref(), &out)
}

fn predict(a: PredictArgs) -> CliResult {
    let model = read_model(&a.model)?;
    let corpus = Corpus::load(&a.corpus)?;
    model.check_vocabulary(&corpus)?;
    let mut out = String::new();
    for i in 0..corpus.len() {
        let s = latent_sum(&model, &features_of(&model, &corpus, i)?)?;
        let y = predict_terms(&model, &s)?;
        for (t, score) in top_terms(&y, a.top) {
            let _ = writeln!(out, "{}\t{}\t{}", corpus.video_ids()[i], corpus.vocabulary().term(t), sig9(score));
        }
    }
    emit(a.out.as_deref(), &out)
}

fn rank(a: RankArgs) -> CliResult {
    let corpus = Corpus::load(&a.corpus)?;
    let events = read_events(&a.events)?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    let shared = if a.model.is_dir() { None } else { Some(read_model(&a.model)?) };
    for e in &events {
        let model = match &shared {
            Some(m) => m.clone(),
            None => read_model(&a.model.join(format!("{}.vsm", e.event_id)))?,
        };
        let query = build_event_query(e, corpus.vocabulary())?;
        let ranking = cosine_rank(&model, &query, &corpus)?;
        write_ranking(&a.out.join(format!("{}.tsv", e.event_id)), &ranking)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let labels = read_labels(&a.labels)?;
    let report = if let Some(dir) = &a.rankings {
        let results = labels
            .iter()
            .map(|l| ranking_ap(&read_ranking(&dir.join(format!("{}.tsv", l.event_id)), &l.event_id)?, l))
            .collect::<Result<Vec<_>>>()?;
        metrics_report(&results)?
    } else if let Some(strategy) = a.strategy {
        let train = Corpus::load(a.train.as_ref().expect("required by strategy"))?;
        let test = Corpus::load(a.test.as_ref().expect("required by strategy"))?;
        let learn = match &a.learn {
            Some(p) => Corpus::load(p)?,
            None => train.clone(),
        };
        let hp = a.hp.hyperparams();
        let m_sel = a.m_sel.unwrap_or(hp.k);
        let spec = match a.representation {
            Representation::Raw => RepresentationSpec::RawFeatures,
            Representation::Vs => RepresentationSpec::VideoStory { hp },
            Representation::DescEmbed => RepresentationSpec::DescriptionEmbedding { hp },
            Representation::TermAttr => RepresentationSpec::TermAttributes { m_sel, reg: a.attr_reg, seed: hp.seed },
            Representation::TermAttrF => RepresentationSpec::TermAttributesF { m_sel, reg: a.attr_reg },
        };
        let cfg = HarnessConfig {
            classifier: ClassifierParams { reg: a.reg, rbf_gamma: a.rbf_gamma },
            max_positives: a.max_positives,
        };
        metrics_report(&few_example_harness(&learn, &train, &test, &labels, &spec, strategy, &cfg)?.results)?
    } else {
        return Err(Failure::Usage("eval needs --rankings, or --strategy with --train and --test".into()));
    };
    emit(a.out.as_deref(), &report)
}

fn synth(a: SynthArgs) -> CliResult {
    let spec = SynthSpec {
        n: a.n,
        m: a.m,
        dims: a.dims,
        k_true: a.k_true,
        noise_sigma: a.noise_sigma,
        term_threshold: a.term_threshold,
        term_noise: a.term_noise,
        n_events: a.n_events,
        positives_per_event: a.positives_per_event,
        topic_rate: a.topic_rate,
        seed: a.seed,
    };
    let s = synth_corpus(&spec)?;
    fs::create_dir_all(a.out.join("events")).map_err(Error::from)?;
    s.corpus.save(&a.out.join("corpus"))?;
    crate::corpus::write_descriptions(&a.out.join("descriptions.tsv"), &s.descriptions)?;
    for e in &s.events {
        write_event(&a.out.join("events").join(format!("{}.txt", e.event_id)), e)?;
    }
    write_labels(&a.out.join("labels.tsv"), &s.labels)?;
    write_manifest(&a.out.join("manifest.txt"), &s)?;
    Ok(())
}

fn inspect(a: InspectArgs) -> CliResult {
    let model = read_model(&a.model)?;
    let vocab = read_vocabulary(&a.vocab)?;
    if vocab.len() != model.n_terms() || vocab.fingerprint() != model.vocab_fingerprint {
        return Err(Failure::Data(Error::ShapeMismatch("vocabulary does not match the model".into())));
    }
    let n = a.terms.min(vocab.len());
    let top = model.textual.rows(0, n).clone_owned();
    let corr = &top * top.transpose();
    let mut out = String::from("term");
    for t in 0..n {
        out.push('\t');
        out.push_str(vocab.term(t));
    }
    out.push('\n');
    for r in 0..n {
        out.push_str(vocab.term(r));
        for c in 0..n {
            // Entry from the lower triangle so the printed matrix is exactly symmetric.
            let v = if c <= r { corr[(r, c)] } else { corr[(c, r)] };
            out.push('\t');
            out.push_str(&sig9(v));
        }
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)
}
