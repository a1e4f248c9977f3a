use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mintox_core::{
    bleu, corpus_etox, run_corpus, BanMode, BleuTokenizer, CorpusEntry, DecodeParams, PipelineConfig, ToyModel,
    Vocabulary,
};

mod error;
mod report;

use error::{load_wordlist, read_to_string, CliError};

#[derive(Parser)]
#[command(name = "mintox", version, about = "Detect and mitigate added toxicity in translations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a JSONL corpus, mitigate added toxicity, write a JSON report
    Run(RunArgs),
    /// Classify lines of text against a wordlist, one JSON report per line
    Classify(ClassifyArgs),
    /// Corpus BLEU of a hypothesis file against a reference file
    Bleu(BleuArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BanModeArg {
    /// Ban the words found in the output
    Detected,
    /// Ban the whole target wordlist
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum BleuTokArg {
    #[value(name = "13a")]
    Mteval13a,
    Char,
}

impl From<BleuTokArg> for BleuTokenizer {
    fn from(t: BleuTokArg) -> Self {
        match t {
            BleuTokArg::Mteval13a => BleuTokenizer::Mteval13a,
            BleuTokArg::Char => BleuTokenizer::Char,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Vocabulary file: `surface<TAB>id` or `surface` per line
    #[arg(long)]
    vocab: PathBuf,
    /// Toy model rule table
    #[arg(long)]
    model_rules: PathBuf,
    #[arg(long)]
    src_wordlist: PathBuf,
    #[arg(long)]
    tgt_wordlist: PathBuf,
    /// JSONL with `id`, `src` and optional `ref` per line
    #[arg(long)]
    corpus: PathBuf,
    /// Where to write the JSON report
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    beam_size: usize,
    /// Total output length cap including BOS and EOS; default 2 * source + 16
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long, value_enum, default_value = "detected")]
    ban_mode: BanModeArg,
    /// Filtered decodes per sentence
    #[arg(long, default_value_t = 1)]
    max_rounds: usize,
    /// Ban every segmentation of each word, not only the canonical one
    #[arg(long)]
    all_segmentations: bool,
    /// Segmentations kept per word variant
    #[arg(long, default_value_t = mintox_core::tokenizer::DEFAULT_SEGMENTATION_CAP)]
    segmentation_cap: usize,
    /// Ban only the words as detected, without case variants
    #[arg(long)]
    no_cap_variants: bool,
    #[arg(long, value_enum, default_value = "13a")]
    bleu_tok: BleuTokArg,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    wordlist: PathBuf,
    /// Language tag for the wordlist; defaults to the file stem
    #[arg(long)]
    lang: Option<String>,
    /// Classify this text instead of reading lines
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    /// Input file, one sentence per line; stdin when absent or `-`
    input: Option<PathBuf>,
}

#[derive(Args)]
struct BleuArgs {
    #[arg(long)]
    hyps: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    #[arg(long, value_enum, default_value = "13a")]
    tok: BleuTokArg,
}

fn parse_corpus(text: &str, path: &Path) -> Result<Vec<CorpusEntry>, CliError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: CorpusEntry = serde_json::from_str(line).map_err(|e| CliError::Corpus {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("MINTOX_THREADS") {
        let n: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or(CliError::Threads(value))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Invalid(e.to_string()))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let vocab = Vocabulary::load(read_to_string(&args.vocab)?.lines())
        .map_err(|source| CliError::Vocab { path: args.vocab.clone(), source })?;
    let model = ToyModel::from_rule_lines(read_to_string(&args.model_rules)?.lines(), &vocab, args.temperature)
        .map_err(|source| CliError::Model { path: args.model_rules.clone(), source })?;
    let src_wordlist = load_wordlist(&args.src_wordlist, None)?;
    let tgt_wordlist = load_wordlist(&args.tgt_wordlist, None)?;
    let corpus = parse_corpus(&read_to_string(&args.corpus)?, &args.corpus)?;
    if args.beam_size == 0 {
        return Err(CliError::Invalid("--beam-size must be at least 1".into()));
    }
    if args.segmentation_cap == 0 {
        return Err(CliError::Invalid("--segmentation-cap must be at least 1".into()));
    }

    let config = PipelineConfig {
        ban_mode: match args.ban_mode {
            BanModeArg::Detected => BanMode::DetectedWords,
            BanModeArg::Full => BanMode::FullWordlist,
        },
        max_rounds: args.max_rounds,
        all_segmentations: args.all_segmentations,
        capitalization_variants: !args.no_cap_variants,
        segmentation_cap: args.segmentation_cap,
        decode: DecodeParams { beam_size: args.beam_size, max_length: args.max_length, length_penalty: None },
    };
    let tokenizer = BleuTokenizer::from(args.bleu_tok);
    let corpus_report = thread_pool()?
        .install(|| run_corpus(&model, &vocab, &src_wordlist, &tgt_wordlist, &corpus, &config, tokenizer))?;

    let full = report::Report {
        config: &config,
        bleu_tokenizer: tokenizer,
        summary: report::Summary::new(&corpus_report),
        corpus: &corpus_report,
    };
    let mut json = serde_json::to_string_pretty(&full).expect("report serializes");
    json.push('\n');
    std::fs::write(&args.out, json).map_err(|source| CliError::Write { path: args.out.clone(), source })?;
    print!("{}", report::table(&corpus_report));
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let wordlist = load_wordlist(&args.wordlist, args.lang.as_deref())?;
    let lines: Vec<String> = match (&args.text, &args.input) {
        (Some(text), _) => vec![text.clone()],
        (None, Some(path)) if path.as_os_str() != "-" => read_to_string(path)?.lines().map(String::from).collect(),
        _ => std::io::stdin()
            .lock()
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|source| CliError::Read { path: "<stdin>".into(), source })?,
    };
    let reports: Vec<_> = lines.iter().map(|l| wordlist.classify(l)).collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for r in &reports {
        writeln!(out, "{}", serde_json::to_string(r).expect("report serializes")).map_err(CliError::Stdout)?;
    }
    if let Ok(rate) = corpus_etox(&reports) {
        let summary = serde_json::json!({
            "summary": {
                "sentences": rate.total,
                "toxic": rate.toxic,
                "rate": rate.fraction(),
                "percent": rate.percent(),
            }
        });
        writeln!(out, "{summary}").map_err(CliError::Stdout)?;
    }
    Ok(())
}

fn cmd_bleu(args: BleuArgs) -> Result<(), CliError> {
    let hyps = read_to_string(&args.hyps)?;
    let refs = read_to_string(&args.refs)?;
    let hyps: Vec<&str> = hyps.lines().collect();
    let refs: Vec<&str> = refs.lines().collect();
    let score = bleu(&hyps, &refs, args.tok.into())?;
    println!("{}", serde_json::to_string(&score).expect("score serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Bleu(args) => cmd_bleu(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mintox: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
