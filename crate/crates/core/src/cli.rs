//! Command-line front end: `build-dict`, `train`, `segment`, `eval` and
//! `sweep`.
//!
//! Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 1 usage or configuration error, 2 data error, 3 numeric failure.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::{parse_mode_pair, Config, FusionMode, SwitchMode};
use crate::corpus::{load_corpus, LabeledSentence, RawCorpus, Vocab};
use crate::error::Error;
use crate::lexicon::{build_lexicon, EraLexicon};
use crate::trainer::{evaluate, train_with_progress, EpochStats, Segmenter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "crosswise", version, about = "Cross-era word segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build one dictionary file per era from segmented corpora.
    BuildDict {
        #[command(flatten)]
        corpora: Corpora,
        #[command(flatten)]
        settings: Settings,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[command(flatten)]
        corpora: Corpora,
        #[command(flatten)]
        dev: DevCorpora,
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        dict_dir: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment text, one sentence per line, from a file or stdin.
    Segment {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dict_dir: PathBuf,
        /// Input file; stdin when absent.
        input: Option<PathBuf>,
    },
    /// Score a checkpoint against gold corpora.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dict_dir: PathBuf,
        #[command(flatten)]
        corpora: Corpora,
        /// Training corpora for OOV recall, paired with --train-era.
        #[arg(long = "train-corpus")]
        train_corpus: Vec<PathBuf>,
        #[arg(long = "train-era")]
        train_era: Vec<usize>,
    },
    /// Train once per grid setting and report dev F1.
    Sweep {
        #[command(flatten)]
        corpora: Corpora,
        #[command(flatten)]
        dev: DevCorpora,
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        dict_dir: PathBuf,
        /// `alpha` for 0.0..=1.0 in steps of 0.1, `modes` for the four
        /// switch/fusion pairs.
        #[arg(long, default_value = "alpha")]
        grid: String,
    },
}

#[derive(Args, Debug)]
struct Corpora {
    /// Segmented corpus file; repeat, pairing each with an --era.
    #[arg(long = "corpus", required = true)]
    paths: Vec<PathBuf>,
    #[arg(long = "era", required = true)]
    eras: Vec<usize>,
}

#[derive(Args, Debug)]
struct DevCorpora {
    /// Development corpus; repeat, pairing each with a --dev-era.
    #[arg(long = "dev")]
    dev_paths: Vec<PathBuf>,
    #[arg(long = "dev-era")]
    dev_eras: Vec<usize>,
}

#[derive(Args, Debug)]
struct Settings {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Switch and fusion pair, e.g. hard+concat.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => exit_code(e),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::NonFinite(_) | Error::Diverged { .. } => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

impl Settings {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    fn resolve(&self) -> CliResult<Config> {
        let mut c = Config::default();
        if let Some(p) = &self.config {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Data {
                path: p.clone(),
                line: 0,
                msg: e.to_string(),
            })?;
            c.apply_text(&text)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
            c.set(k, v)?;
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(m) = &self.mode {
            let (sw, fu) = parse_mode_pair(m)?;
            c.switch_mode = sw;
            c.fusion = fu;
        }
        c.validate()?;
        Ok(c)
    }
}

fn pair(paths: &[PathBuf], eras: &[usize], what: &str) -> CliResult<Vec<(PathBuf, usize)>> {
    if paths.len() != eras.len() {
        return Err(CliError::Usage(format!(
            "{} {what} paths but {} era ids",
            paths.len(),
            eras.len()
        )));
    }
    Ok(paths.iter().cloned().zip(eras.iter().copied()).collect())
}

fn load_all(files: &[(PathBuf, usize)], config: &Config) -> CliResult<RawCorpus> {
    let mut all = RawCorpus::default();
    for (path, era) in files {
        if *era >= config.eras {
            return Err(Error::EraOutOfRange {
                era: *era,
                eras: config.eras,
            }
            .into());
        }
        let c = load_corpus(path, *era, config.max_len)?;
        all.extend(c);
    }
    Ok(all)
}

/// Dictionary file for `era` inside `dir`.
pub fn dict_path(dir: &Path, era: usize) -> PathBuf {
    dir.join(format!("era-{era}.dict"))
}

fn load_lexicons(dir: &Path, eras: usize) -> CliResult<Vec<EraLexicon>> {
    (0..eras)
        .map(|d| EraLexicon::load(dict_path(dir, d), d).map_err(CliError::from))
        .collect()
}

fn labeled(corpus: &RawCorpus) -> CliResult<Vec<LabeledSentence>> {
    Ok(corpus
        .sentences
        .iter()
        .map(LabeledSentence::from_raw)
        .collect::<Result<_, _>>()?)
}

fn log_config(err: &mut dyn Write, config: &Config) -> CliResult {
    for line in config.to_text().lines() {
        writeln!(err, "config {line}")?;
    }
    Ok(())
}

fn epoch_line(s: &EpochStats) -> String {
    let dev = s
        .dev_f1
        .map_or_else(|| "NA".to_string(), |f| format!("{f:.4}"));
    format!(
        "epoch={} loss={:.6} cws={:.6} disc={:.6} dev_f1={dev}",
        s.epoch, s.loss.total, s.loss.cws, s.loss.disc
    )
}

fn cmd_build_dict(
    corpora: &Corpora,
    settings: &Settings,
    out: &Path,
    err: &mut dyn Write,
) -> CliResult {
    let config = settings.resolve()?;
    log_config(err, &config)?;
    let files = pair(&corpora.paths, &corpora.eras, "corpus")?;
    let all = load_all(&files, &config)?;
    std::fs::create_dir_all(out)?;
    for era in 0..config.eras {
        let lex = build_lexicon(&all, era, config.ngram_min_count, config.max_ngram);
        let path = dict_path(out, era);
        lex.save(&path)?;
        writeln!(err, "wrote {} ({} entries)", path.display(), lex.len())?;
    }
    Ok(())
}

struct TrainData {
    config: Config,
    train: RawCorpus,
    train_sentences: Vec<LabeledSentence>,
    dev_sentences: Vec<LabeledSentence>,
    vocab: Vocab,
    lexicons: Vec<EraLexicon>,
}

fn load_train_data(
    corpora: &Corpora,
    dev: &DevCorpora,
    settings: &Settings,
    dict_dir: &Path,
    err: &mut dyn Write,
) -> CliResult<TrainData> {
    let config = settings.resolve()?;
    log_config(err, &config)?;
    let train = load_all(&pair(&corpora.paths, &corpora.eras, "corpus")?, &config)?;
    let dev = load_all(&pair(&dev.dev_paths, &dev.dev_eras, "dev")?, &config)?;
    let lexicons = load_lexicons(dict_dir, config.eras)?;
    let vocab = Vocab::build([&train]);
    Ok(TrainData {
        train_sentences: labeled(&train)?,
        dev_sentences: labeled(&dev)?,
        config,
        train,
        vocab,
        lexicons,
    })
}

fn cmd_train(
    corpora: &Corpora,
    dev: &DevCorpora,
    settings: &Settings,
    dict_dir: &Path,
    out_path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let data = load_train_data(corpora, dev, settings, dict_dir, err)?;
    writeln!(
        err,
        "training on {} sentences, vocab {}",
        data.train.len(),
        data.vocab.len()
    )?;
    let mut lines = Vec::new();
    let outcome = train_with_progress(
        &data.train_sentences,
        &data.dev_sentences,
        &data.vocab,
        &data.lexicons,
        &data.config,
        |s| lines.push(epoch_line(s)),
    )?;
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    outcome.checkpoint.save(out_path)?;
    writeln!(
        err,
        "saved epoch {} checkpoint to {}",
        outcome.checkpoint.epoch,
        out_path.display()
    )?;
    Ok(())
}

fn open_segmenter(checkpoint: &Path, dict_dir: &Path) -> CliResult<Segmenter> {
    let ck = Checkpoint::load(checkpoint).map_err(|e| match e {
        Error::Io(io) => Error::Data {
            path: checkpoint.to_path_buf(),
            line: 0,
            msg: io.to_string(),
        },
        other => other,
    })?;
    let lexicons = load_lexicons(dict_dir, ck.config.eras)?;
    Ok(Segmenter::new(ck, lexicons)?)
}

fn cmd_segment(
    checkpoint: &Path,
    dict_dir: &Path,
    input: Option<&Path>,
    stdin: &mut dyn Read,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let seg = open_segmenter(checkpoint, dict_dir)?;
    log_config(err, &seg.checkpoint.config)?;
    let mut bytes = Vec::new();
    let source = match input {
        Some(p) => {
            bytes = std::fs::read(p).map_err(|e| Error::Data {
                path: p.to_path_buf(),
                line: 0,
                msg: e.to_string(),
            })?;
            p.to_path_buf()
        }
        None => {
            stdin.read_to_end(&mut bytes)?;
            PathBuf::from("<stdin>")
        }
    };
    let mut lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    for (n, raw) in lines.into_iter().enumerate() {
        let line = std::str::from_utf8(raw).map_err(|e| Error::Data {
            path: source.clone(),
            line: n + 1,
            msg: format!("invalid UTF-8: {e}"),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        match seg.segment(line) {
            Ok(s) => writeln!(out, "{}\tera={}", s.words.join(" "), s.era)?,
            Err(Error::EmptySentence) => writeln!(out)?,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    dict_dir: &Path,
    corpora: &Corpora,
    train_paths: &[PathBuf],
    train_eras: &[usize],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let seg = open_segmenter(checkpoint, dict_dir)?;
    let config = &seg.checkpoint.config;
    log_config(err, config)?;
    let gold = load_all(&pair(&corpora.paths, &corpora.eras, "corpus")?, config)?;
    let train_files = pair(train_paths, train_eras, "train-corpus")?;
    let training = if train_files.is_empty() {
        None
    } else {
        Some(load_all(&train_files, config)?)
    };
    let report = evaluate(
        &seg.checkpoint.params,
        config,
        &seg.checkpoint.vocab,
        &seg.lexicons,
        &gold,
        training.as_ref(),
    )?;
    write!(out, "{report}")?;
    write!(out, "{}", report.machine_lines())?;
    Ok(())
}

/// Settings visited by `sweep --grid <name>`, as (label, config) pairs.
pub fn sweep_grid(base: &Config, grid: &str) -> Result<Vec<(String, Config)>, Error> {
    match grid {
        "alpha" => Ok((0..=10)
            .map(|i| {
                let mut c = base.clone();
                c.alpha = i as f64 / 10.0;
                (format!("alpha={:.1}", c.alpha), c)
            })
            .collect()),
        "modes" => {
            let mut out = Vec::new();
            for sw in [SwitchMode::Hard, SwitchMode::Soft] {
                for fu in [FusionMode::Sum, FusionMode::Concat] {
                    let mut c = base.clone();
                    c.switch_mode = sw;
                    c.fusion = fu;
                    out.push((format!("mode={sw}+{fu}"), c));
                }
            }
            Ok(out)
        }
        other => Err(Error::Config(format!(
            "unknown grid {other:?}; use alpha or modes"
        ))),
    }
}

fn cmd_sweep(
    corpora: &Corpora,
    dev: &DevCorpora,
    settings: &Settings,
    dict_dir: &Path,
    grid: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let data = load_train_data(corpora, dev, settings, dict_dir, err)?;
    if data.dev_sentences.is_empty() {
        return Err(CliError::Usage("sweep needs --dev corpora".into()));
    }
    let cells = sweep_grid(&data.config, grid)?;
    writeln!(out, "setting\tdev_f1")?;
    for (label, config) in cells {
        writeln!(err, "sweep {label}")?;
        let outcome = train_with_progress(
            &data.train_sentences,
            &data.dev_sentences,
            &data.vocab,
            &data.lexicons,
            &config,
            |_| {},
        )?;
        writeln!(out, "{label}\t{:.4}", outcome.checkpoint.dev_f1)?;
    }
    Ok(())
}

fn dispatch(cli: Cli, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::BuildDict {
            corpora,
            settings,
            out: dir,
        } => cmd_build_dict(&corpora, &settings, &dir, err),
        Command::Train {
            corpora,
            dev,
            settings,
            dict_dir,
            out: path,
        } => cmd_train(&corpora, &dev, &settings, &dict_dir, &path, out, err),
        Command::Segment {
            checkpoint,
            dict_dir,
            input,
        } => cmd_segment(&checkpoint, &dict_dir, input.as_deref(), stdin, out, err),
        Command::Eval {
            checkpoint,
            dict_dir,
            corpora,
            train_corpus,
            train_era,
        } => cmd_eval(
            &checkpoint,
            &dict_dir,
            &corpora,
            &train_corpus,
            &train_era,
            out,
            err,
        ),
        Command::Sweep {
            corpora,
            dev,
            settings,
            dict_dir,
            grid,
        } => cmd_sweep(&corpora, &dev, &settings, &dict_dir, &grid, out, err),
    }
}

/// Run the command line `args` (program name first) and return the exit
/// code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli, stdin, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}
