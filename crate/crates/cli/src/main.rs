//! `deceptgan` command-line front end.
//!
//! Exit status: 0 on success, 1 on a contract error (bad arguments, bad
//! configuration, malformed input, failed check), 2 on an I/O error.
//! Commands that write files build them under a temporary sibling and
//! move them into place only once everything succeeded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use walkdir::WalkDir;

use deceptgan::checkpoint::{load_discriminator, save_discriminator, save_generator, write_atomic};
use deceptgan::corpus::{
    ingest_labeled_dir, kfold_split, load_embeddings, CorpusFile, Fold, Label, TokenSequence, Tokenizer,
};
use deceptgan::metrics::{evaluate_discriminator, export_history, predict_label, run_kfold, MetricsReport};
use deceptgan::selfcheck::{self, CheckResult};
use deceptgan::synth::{bayes_accuracy, sample_corpus, synthetic_vocabulary, SourcePair};
use deceptgan::trainer::{sweep_gd, train, Mode, TrainConfig, TrainOptions, TrainOutcome, Trainer};
use deceptgan::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "deceptgan", version, about = "Dual-discriminator sequence GAN for deceptive review detection")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Preset {
    /// Hotel-review settings.
    Full,
    /// Small settings for the synthetic desk corpus.
    Desk,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TokenizerArg {
    PunctSplit,
    Whitespace,
}

impl From<TokenizerArg> for Tokenizer {
    fn from(t: TokenizerArg) -> Self {
        match t {
            TokenizerArg::PunctSplit => Tokenizer::PunctSplit,
            TokenizerArg::Whitespace => Tokenizer::Whitespace,
        }
    }
}

/// Configuration source and overrides, accepted by every subcommand.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// Flat JSON file with training-configuration fields; missing fields
    /// take the preset's values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base settings when no configuration file is given.
    #[arg(long, global = true, value_enum, default_value = "full")]
    preset: Preset,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    seq_len: Option<usize>,
    #[arg(long, global = true)]
    rollouts: Option<usize>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config_over(path, self.preset)?,
            None => match self.preset {
                Preset::Full => TrainConfig::full_scale(),
                Preset::Desk => TrainConfig::desk(),
            },
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.seq_len {
            cfg.seq_len = v;
        }
        if let Some(v) = self.rollouts {
            cfg.rollouts = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = &self.embeddings {
            cfg.embeddings_path = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a config file whose missing fields fall back to `preset`.
fn load_config_over(path: &Path, preset: Preset) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let format = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let overrides: serde_json::Value = serde_json::from_str(&text).map_err(|e| format(e.to_string()))?;
    let serde_json::Value::Object(fields) = overrides else {
        return Err(format("configuration must be a JSON object".into()));
    };
    let base = match preset {
        Preset::Full => TrainConfig::full_scale(),
        Preset::Desk => TrainConfig::desk(),
    };
    let serde_json::Value::Object(mut merged) = serde_json::to_value(base).expect("config serializes") else {
        unreachable!("config serializes to an object")
    };
    merged.extend(fields);
    serde_json::from_value(serde_json::Value::Object(merged)).map_err(|e| format(e.to_string()))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read `<root>/truthful` and `<root>/deceptive`, keep reviews of at most
    /// `seq_len` tokens and print the class counts.
    Ingest {
        root: PathBuf,
        /// Write the encoded corpus and its vocabulary here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "punct-split")]
        tokenizer: TokenizerArg,
    },
    /// MLE for the generator, then discriminator pretraining only.
    Pretrain(RunArgs),
    /// Pretraining followed by adversarial training.
    Train(RunArgs),
    /// Adversarial training with a single discriminator.
    Ablate {
        #[arg(long)]
        mode: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cross-validated training; prints mean and standard deviation.
    Kfold {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Class reported as positive in the headline precision and recall.
        #[arg(long, default_value = "deceptive")]
        positive: String,
        #[arg(long)]
        force: bool,
    },
    /// Label reviews with a trained discriminator. Prints
    /// `path<TAB>label<TAB>score` per review, where score is the probability
    /// of the truthful class.
    Classify {
        /// A review file or a directory searched recursively for `.txt` files.
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "punct-split")]
        tokenizer: TokenizerArg,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Synthetic Markov sources.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// Finite-difference check of every primitive and both model losses.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = selfcheck::TOLERANCE)]
        tolerance: f64,
    },
    /// Train every (g-steps, d-steps) pair over the given values.
    SweepGd {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        test_corpus: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,3,6")]
        values: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Sample a labelled corpus from a source pair.
    Gen {
        /// Source pair JSON; the pinned desk pair when omitted.
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write one text file per review in the ingest layout.
        #[arg(long)]
        text_dir: Option<PathBuf>,
    },
    /// Accuracy of the likelihood-ratio classifier on fresh samples.
    Bayes {
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        sample_seed: u64,
    },
    /// Write a source pair as JSON.
    Pair {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Encoded corpus written by `ingest` or `synth gen`.
    #[arg(long)]
    corpus: PathBuf,
    /// Held-out corpus; the first of `folds` stratified folds otherwise.
    #[arg(long)]
    test_corpus: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.resolve()?;
    match cli.command {
        Command::Ingest { root, out, tokenizer } => ingest(&config, &root, out.as_deref(), tokenizer.into()),
        Command::Pretrain(args) => run_training(&config, &args, Job::Pretrain),
        Command::Train(args) => run_training(&config, &args, Job::Train),
        Command::Ablate { mode, run } => {
            let mode: Mode = mode.parse()?;
            if mode == Mode::Full {
                return Err(Error::Contract("ablate needs a single-discriminator mode".into()));
            }
            let config = TrainConfig { mode, ..config };
            run_training(&config, &run, Job::Train)
        }
        Command::Kfold {
            corpus,
            out,
            positive,
            force,
        } => kfold(&config, &corpus, &out, positive.parse()?, force),
        Command::Classify {
            input,
            model,
            tokenizer,
            threshold,
        } => classify(&input, &model, tokenizer.into(), threshold),
        Command::Synth { command } => synth(&config, command),
        Command::Gradcheck { seeds, tolerance } => gradcheck(seeds, tolerance),
        Command::SweepGd {
            corpus,
            test_corpus,
            values,
            out,
            force,
        } => sweep(&config, &corpus, test_corpus.as_deref(), &values, &out, force),
    }
}

fn ingest(config: &TrainConfig, root: &Path, out: Option<&Path>, tokenizer: Tokenizer) -> Result<()> {
    let report = ingest_labeled_dir(root, config.seq_len, tokenizer)?;
    if let Some(out) = out {
        CorpusFile::from_raw(&report.corpus, config.seq_len, tokenizer)?.save(out)?;
    }
    eprintln!(
        "discarded (longer than {} tokens): truthful={} deceptive={}",
        config.seq_len, report.discarded_truthful, report.discarded_deceptive
    );
    println!(
        "truthful={} deceptive={}",
        report.corpus.truthful.len(),
        report.corpus.deceptive.len()
    );
    Ok(())
}

/// Loads a corpus and checks it against the configured sequence length.
fn load_corpus(path: &Path, config: &TrainConfig) -> Result<CorpusFile> {
    let file = CorpusFile::load(path)?;
    if file.seq_len != config.seq_len {
        return Err(Error::Contract(format!(
            "corpus {} has sequence length {}, configuration says {}",
            path.display(),
            file.seq_len,
            config.seq_len
        )));
    }
    Ok(file)
}

fn load_split(config: &TrainConfig, corpus: &Path, test: Option<&Path>) -> Result<(CorpusFile, Fold<TokenSequence>)> {
    let file = load_corpus(corpus, config)?;
    let split = match test {
        Some(path) => {
            let test = load_corpus(path, config)?;
            if test.vocabulary != file.vocabulary {
                return Err(Error::Contract("training and test corpora use different vocabularies".into()));
            }
            Fold {
                train: file.corpus.clone(),
                test: test.corpus,
            }
        }
        None => kfold_split(&file.corpus, config.folds, config.seed)?.swap_remove(0),
    };
    Ok((file, split))
}

fn embedding_for(config: &TrainConfig, file: &CorpusFile) -> Result<Option<deceptgan::autodiff::NumArray>> {
    match &config.embeddings_path {
        None => Ok(None),
        Some(path) => {
            let table = load_embeddings(path, &file.vocabulary, config.seed)?;
            if table.dim() != config.embed_dim {
                return Err(Error::Contract(format!(
                    "embedding file has dimension {}, configuration says {}",
                    table.dim(),
                    config.embed_dim
                )));
            }
            Ok(Some(table.into_array()))
        }
    }
}

/// Output directory assembled under a temporary name and renamed on
/// success; dropped without success, it removes itself.
struct Staging {
    tmp: PathBuf,
    target: PathBuf,
    done: bool,
}

impl Staging {
    fn new(target: &Path, force: bool) -> Result<Self> {
        if target.exists() && !force {
            return Err(Error::Contract(format!(
                "{} already exists (use --force to replace it)",
                target.display()
            )));
        }
        let mut name = target
            .file_name()
            .ok_or_else(|| Error::Contract(format!("invalid output path {}", target.display())))?
            .to_os_string();
        name.push(".partial");
        let tmp = target.with_file_name(name);
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| io_err(&tmp, e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| io_err(&tmp, e))?;
        Ok(Staging {
            tmp,
            target: target.to_path_buf(),
            done: false,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.tmp.join(name)
    }

    fn commit(mut self) -> Result<()> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| io_err(&self.target, e))?;
        }
        fs::rename(&self.tmp, &self.target).map_err(|e| io_err(&self.target, e))?;
        self.done = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).expect("summary serializes");
    text.push(b'\n');
    write_atomic(path, &text)
}

#[derive(Clone, Copy, PartialEq)]
enum Job {
    Pretrain,
    Train,
}

#[derive(Serialize)]
struct RunSummary {
    mode: Mode,
    pretrain_only: bool,
    best_accuracy: f64,
    best_step: usize,
    best_adversarial: Option<(usize, f64)>,
    pretrain_plateau: f64,
    converged: bool,
    iterations: usize,
    /// Best D on the held-out split, deceptive as the positive class.
    test_metrics: MetricsReport,
    config: TrainConfig,
}

fn run_training(config: &TrainConfig, args: &RunArgs, job: Job) -> Result<()> {
    let (file, split) = load_split(config, &args.corpus, args.test_corpus.as_deref())?;
    let embedding = embedding_for(config, &file)?;
    let test = split.test.clone();
    let staging = Staging::new(&args.out, args.force)?;
    let options = TrainOptions {
        checkpoint_dir: (job == Job::Train).then(|| staging.path("checkpoints")),
        vocabulary: Some(file.vocabulary.clone()),
    };
    if let Some(dir) = &options.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let vocab_size = file.vocabulary.len();
    let outcome: TrainOutcome = match job {
        Job::Train => train(config, split, vocab_size, embedding, options)?,
        Job::Pretrain => {
            let mut trainer = Trainer::new(config.clone(), split, vocab_size, embedding, options)?;
            trainer.pretrain_all()?;
            trainer.finish(false)
        }
    };
    save_outcome(&staging, &outcome, &file)?;
    let metrics = evaluate_discriminator(&outcome.best_d, &test, Label::Deceptive)?;
    write_json(
        &staging.path("summary.json"),
        &RunSummary {
            mode: config.mode,
            pretrain_only: job == Job::Pretrain,
            best_accuracy: outcome.best_accuracy,
            best_step: outcome.best_step,
            best_adversarial: outcome.best_adversarial,
            pretrain_plateau: outcome.pretrain_plateau,
            converged: outcome.converged,
            iterations: outcome.iterations,
            test_metrics: metrics.clone(),
            config: config.clone(),
        },
    )?;
    staging.commit()?;
    println!(
        "best_d_accuracy={:.4} step={} iterations={} converged={}",
        outcome.best_accuracy, outcome.best_step, outcome.iterations, outcome.converged
    );
    print_metrics(&metrics);
    Ok(())
}

fn save_outcome(staging: &Staging, outcome: &TrainOutcome, file: &CorpusFile) -> Result<()> {
    let vocab = &file.vocabulary;
    export_history(&outcome.history, &staging.path("history.csv"))?;
    save_generator(&staging.path("generator.ckpt"), &outcome.generator, vocab)?;
    save_discriminator(&staging.path("d.ckpt"), &outcome.best_d, vocab)?;
    save_discriminator(&staging.path("d_final.ckpt"), &outcome.d, vocab)?;
    if let Some(dp) = &outcome.d_prime {
        save_discriminator(&staging.path("d_prime.ckpt"), dp, vocab)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn print_metrics(m: &MetricsReport) {
    println!("accuracy={:.4}", m.accuracy);
    for c in [&m.deceptive, &m.truthful] {
        println!(
            "positive={} precision={} recall={}",
            c.label,
            fmt_opt(c.precision),
            fmt_opt(c.recall)
        );
    }
}

fn kfold(config: &TrainConfig, corpus: &Path, out: &Path, positive: Label, force: bool) -> Result<()> {
    let file = load_corpus(corpus, config)?;
    let embedding = embedding_for(config, &file)?;
    let staging = Staging::new(out, force)?;
    let result = run_kfold(config, &file.corpus, file.vocabulary.len(), embedding.as_ref(), positive)?;
    for (i, outcome) in result.outcomes.iter().enumerate() {
        export_history(&outcome.history, &staging.path(&format!("fold{i}_history.csv")))?;
        save_discriminator(&staging.path(&format!("fold{i}_d.ckpt")), &outcome.best_d, &file.vocabulary)?;
    }
    write_json(&staging.path("kfold.json"), &result.aggregate)?;
    staging.commit()?;
    let agg = &result.aggregate;
    for r in &agg.reports {
        println!(
            "fold={} accuracy={:.4} precision={} recall={}",
            r.fold.unwrap_or(0),
            r.accuracy,
            fmt_opt(r.precision()),
            fmt_opt(r.recall())
        );
    }
    println!("accuracy mean={:.4} std={:.4}", agg.accuracy.mean, agg.accuracy.std);
    for (name, s) in [
        (format!("precision({positive})"), agg.precision),
        (format!("recall({positive})"), agg.recall),
        (format!("precision({})", positive.other()), agg.other_precision),
        (format!("recall({})", positive.other()), agg.other_recall),
    ] {
        match s {
            Some(s) => println!("{name} mean={:.4} std={:.4} folds={}", s.mean, s.std, s.count),
            None => println!("{name} undefined in every fold"),
        }
    }
    Ok(())
}

fn review_files(input: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(input).map_err(|e| io_err(input, e))?;
    if meta.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(input) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(input).to_path_buf();
            io_err(&path, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "txt") {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

fn classify(input: &Path, model: &Path, tokenizer: Tokenizer, threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Contract(format!("threshold {threshold} outside [0, 1]")));
    }
    let (d, meta) = load_discriminator(model)?;
    let vocab = meta.vocabulary.ok_or_else(|| Error::Format {
        path: model.to_path_buf(),
        msg: "checkpoint carries no vocabulary".into(),
    })?;
    let seq_len = d.config().seq_len;
    let files = review_files(input)?;
    let mut lines = Vec::with_capacity(files.len());
    for path in files {
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let mut tokens = tokenizer.tokenize(&text)?;
        if tokens.len() > seq_len {
            eprintln!(
                "note: {} has {} tokens; scoring the first {seq_len}",
                path.display(),
                tokens.len()
            );
            tokens.truncate(seq_len);
        }
        let seq = vocab.encode(&tokens, seq_len)?;
        let score = d.score(&seq)?;
        let label = predict_label(&d, &seq, threshold)?;
        lines.push(format!("{}\t{}\t{:.6}", path.display(), label, score));
    }
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

fn load_pair(path: Option<&Path>) -> Result<SourcePair> {
    match path {
        Some(p) => SourcePair::load(p),
        None => Ok(SourcePair::desk()),
    }
}

fn synth(config: &TrainConfig, command: SynthCommand) -> Result<()> {
    match command {
        SynthCommand::Gen {
            pair,
            per_class,
            sample_seed,
            out,
            text_dir,
        } => {
            let pair = load_pair(pair.as_deref())?;
            if config.seq_len < pair.seq_len() {
                return Err(Error::Contract(format!(
                    "seq_len {} is shorter than the source length {}",
                    config.seq_len,
                    pair.seq_len()
                )));
            }
            let vocabulary = synthetic_vocabulary(pair.vocab_size());
            let corpus = sample_corpus(&pair, per_class, sample_seed, config.seq_len)?;
            let file = CorpusFile {
                seq_len: config.seq_len,
                tokenizer: Tokenizer::default(),
                vocabulary,
                corpus,
            };
            let staged_text = match &text_dir {
                Some(dir) => {
                    let staging = Staging::new(dir, false)?;
                    for (i, (seq, label)) in file.corpus.labeled().enumerate() {
                        let sub = staging.path(label.as_str());
                        fs::create_dir_all(&sub).map_err(|e| io_err(&sub, e))?;
                        let text = file.vocabulary.decode(seq).join(" ") + "\n";
                        let path = sub.join(format!("{i:05}.txt"));
                        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
                    }
                    Some(staging)
                }
                None => None,
            };
            file.save(&out)?;
            if let Some(staging) = staged_text {
                staging.commit()?;
            }
            println!("truthful={per_class} deceptive={per_class}");
            Ok(())
        }
        SynthCommand::Bayes {
            pair,
            samples,
            sample_seed,
        } => {
            let pair = load_pair(pair.as_deref())?;
            println!("bayes_accuracy={:.6}", bayes_accuracy(&pair, samples, sample_seed)?);
            Ok(())
        }
        SynthCommand::Pair { out } => {
            let text = serde_json::to_vec_pretty(&SourcePair::desk()).expect("pair serializes");
            write_atomic(&out, &text)
        }
    }
}

fn gradcheck(seeds: u64, tolerance: f64) -> Result<()> {
    if seeds == 0 {
        return Err(Error::Contract("need at least one seed".into()));
    }
    let results = selfcheck::full_suite(0..seeds)?;
    let mut names: Vec<&str> = Vec::new();
    for r in &results {
        if !names.contains(&r.name) {
            names.push(r.name);
        }
    }
    let mut failed = 0;
    for name in names {
        let runs: Vec<&CheckResult> = results.iter().filter(|r| r.name == name).collect();
        let worst = runs
            .iter()
            .max_by(|a, b| a.report.max_relative_error.total_cmp(&b.report.max_relative_error))
            .expect("at least one seed");
        let ok = runs.iter().all(|r| r.passed(tolerance));
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: max relative error {:.3e} (seed {}, {} components)",
            if ok { "PASS" } else { "FAIL" },
            worst.report.max_relative_error,
            worst.seed,
            worst.report.components
        );
    }
    if failed > 0 {
        return Err(Error::Contract(format!("{failed} gradient checks exceed {tolerance:e}")));
    }
    println!("all gradient checks below {tolerance:e} over {seeds} seeds");
    Ok(())
}

fn sweep(
    config: &TrainConfig,
    corpus: &Path,
    test: Option<&Path>,
    values: &[usize],
    out: &Path,
    force: bool,
) -> Result<()> {
    if values.is_empty() || values.contains(&0) {
        return Err(Error::Contract("sweep values must be positive".into()));
    }
    let (file, split) = load_split(config, corpus, test)?;
    let embedding = embedding_for(config, &file)?;
    let staging = Staging::new(out, force)?;
    let results = sweep_gd(config, &split, file.vocabulary.len(), embedding.as_ref(), values)?;
    let mut table = String::from("g_steps,d_steps,best_accuracy,best_step,final_accuracy,converged,iterations\n");
    for ((g, d), outcome) in &results {
        export_history(&outcome.history, &staging.path(&format!("g{g}_d{d}_history.csv")))?;
        let final_acc = outcome
            .history
            .d_accuracies(None)
            .last()
            .map_or(f64::NAN, |&(_, a)| a);
        table.push_str(&format!(
            "{g},{d},{},{},{final_acc},{},{}\n",
            outcome.best_accuracy, outcome.best_step, outcome.converged, outcome.iterations
        ));
        println!(
            "g={g} d={d} best_accuracy={:.4} final_accuracy={final_acc:.4} converged={}",
            outcome.best_accuracy, outcome.converged
        );
    }
    write_atomic(&staging.path("sweep.csv"), table.as_bytes())?;
    staging.commit()
}
