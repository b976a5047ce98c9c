use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use msclab::analysis::{bi_awgn_moments, bler_approx, bler_exact, na_bound, recovery_rate, table_ii_profile, RecoveryProfile};
use msclab::bp::{regular_ldpc, write_alist};
use msclab::channel::{modulate, sentence_rng, transmit};
use msclab::confidence::SegmentVerdict;
use msclab::osd::{decode_view, prepare};
use msclab::pipeline::{frame_sentence, run_msc, transmit_frame, FrameShape};
use msclab::semantic::{serve, CandidateProvider, DictionaryProvider, IdentityProvider, NgramProvider};
use msclab::textcodec::{Corpus, PAD};
use msclab::{BitVec, LinearCode};
use msclab_harness::{emit, ExperimentConfig, Experiment};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "msclab", version, about = "Short-code transmission with semantic correction: simulations and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment described by a config file.
    Run(RunArgs),
    /// Check a config file without simulating.
    Validate { config: PathBuf },
    /// Closed-form curves.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Time the decoder stages on random frames.
    Bench(BenchArgs),
    /// Answer provider requests on stdin/stdout with a native provider.
    Serve(ServeArgs),
    /// Emit (clean, corrupted) sentence pairs as NDJSON.
    Corrupt(CorruptArgs),
    /// Write a regular LDPC parity-check matrix in alist format.
    GenLdpc(GenLdpcArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Overrides the long-code parity-check file.
    #[arg(long)]
    lc_alist: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Analyze {
    /// Normal-approximation error probability over a grid of n and SNR.
    Na {
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,1024")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        snr_min: f64,
        #[arg(long, default_value_t = 4.0)]
        snr_max: f64,
        #[arg(long, default_value_t = 0.5)]
        snr_step: f64,
    },
    /// Sentence BLER with semantic recovery from a recovery profile.
    Bler {
        /// Profile JSON file.
        #[arg(long, conflicts_with = "table")]
        profile: Option<PathBuf>,
        /// Built-in profile: 64x32, 128x64 or 256x128.
        #[arg(long)]
        table: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.005,0.01,0.05,0.1")]
        pe: Vec<f64>,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    max_order: usize,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 2000)]
    frames: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum NativeProvider {
    Identity,
    Dictionary,
    Ngram,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_enum, default_value = "dictionary")]
    provider: NativeProvider,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = msclab::semantic::ngram::DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = 16)]
    beam: usize,
    #[arg(long, default_value_t = msclab::semantic::ngram::DEFAULT_SMOOTHING)]
    delta: f64,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 32)]
    k: usize,
    /// Seed of the random code.
    #[arg(long, default_value_t = 1)]
    code_seed: u64,
    #[arg(long, default_value_t = 16)]
    q: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 2)]
    osd_order: usize,
    /// Transmissions per sentence.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenLdpcArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    wc: usize,
    #[arg(long, default_value_t = 6)]
    wr: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let exp = Experiment::new(cfg)?;
            println!("ok {} (provider {}, hash {})", config.display(), exp.provider_name(), exp.hash());
            Ok(())
        }
        Command::Analyze(a) => analyze(a),
        Command::Bench(args) => bench(args),
        Command::Serve(args) => serve_native(args),
        Command::Corrupt(args) => corrupt(args),
        Command::GenLdpc(args) => {
            let h = regular_ldpc(args.n, args.wc, args.wr, args.seed)?;
            let text = write_alist(&h);
            match args.out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(path) = args.lc_alist {
        match cfg.lc.as_mut() {
            Some(lc) => lc.alist = path,
            None => bail!("--lc-alist given but the config has no lc section"),
        }
    }
    let exp = Experiment::new(cfg)?;
    let out = exp.run(args.threads)?;
    let (csv, side) = emit(exp.config(), &out)?;
    for r in &out.rows {
        eprintln!(
            "snr {:>5} {:<14} bler {:.4} [{:.4}, {:.4}] bleu {:.2} rouge-l {:.2}",
            r.snr_db, r.stage, r.bler.rate, r.bler.ci_lo, r.bler.ci_hi, r.bleu, r.rouge_l
        );
    }
    println!("{}\n{}", csv.display(), side.display());
    Ok(())
}

fn analyze(a: Analyze) -> Result<()> {
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    match a {
        Analyze::Na { n, rate, snr_min, snr_max, snr_step } => {
            if snr_step <= 0.0 || snr_max < snr_min {
                bail!("need snr_step > 0 and snr_max >= snr_min");
            }
            writeln!(w, "n,k,snr_db,capacity,dispersion,na_bound")?;
            let steps = ((snr_max - snr_min) / snr_step + 1e-9).floor() as usize;
            for &n in &n {
                let k = (rate * n as f64).round() as usize;
                for i in 0..=steps {
                    let snr = snr_min + i as f64 * snr_step;
                    let m = bi_awgn_moments(snr);
                    writeln!(w, "{n},{k},{snr},{},{},{}", m.capacity, m.dispersion, na_bound(n, k, snr)?)?;
                }
            }
        }
        Analyze::Bler { profile, table, pe } => {
            let (q, prof) = match (profile, table) {
                (Some(p), _) => {
                    let (prof, file) = RecoveryProfile::load(&p)?;
                    (file.q, prof)
                }
                (None, Some(t)) => table_ii_profile(&t).with_context(|| format!("no built-in profile {t}"))?,
                (None, None) => bail!("give --profile or --table"),
            };
            writeln!(w, "q,pe,eta,bler_exact,bler_approx,bler_msc")?;
            for &p in &pe {
                let eta = recovery_rate(q, p, &prof)?;
                let msc = 1.0 - (1.0 - p).powi(q as i32);
                writeln!(w, "{q},{p},{eta},{},{},{msc}", bler_exact(q, p, &prof)?, bler_approx(q, p, eta)?)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let code = LinearCode::random(args.n, args.k, args.seed)?;
    let mut rng = sentence_rng(args.seed, 0, 0);
    let frames: Vec<(BitVec, msclab::SoftObservation)> = (0..args.frames)
        .map(|i| {
            let info = BitVec::from_bits(&(0..args.k).map(|j| ((i * 31 + j * 7) % 3 == 0) as u8).collect::<Vec<_>>());
            let c = code.encode(&info)?;
            Ok((info, transmit(&modulate(&c), args.snr, &mut rng)))
        })
        .collect::<msclab::Result<_>>()?;
    let mut out = io::stdout().lock();
    writeln!(out, "stage,order,frames,block_errors,mean_us")?;
    let t = Instant::now();
    let views = frames.iter().map(|(_, o)| prepare(&code, o)).collect::<msclab::Result<Vec<_>>>()?;
    writeln!(out, "prepare,,{},,{:.3}", args.frames, t.elapsed().as_secs_f64() * 1e6 / args.frames as f64)?;
    for order in 0..=args.max_order.min(args.k) {
        let t = Instant::now();
        let mut errors = 0;
        let mut decoded = Vec::with_capacity(views.len());
        for (v, (info, _)) in views.iter().zip(&frames) {
            let d = decode_view(v, order)?;
            errors += (d.info != *info) as usize;
            decoded.push(d.info);
        }
        writeln!(out, "osd,{order},{},{errors},{:.3}", args.frames, t.elapsed().as_secs_f64() * 1e6 / args.frames as f64)?;
        if order == 0 {
            let t = Instant::now();
            for (v, info) in views.iter().zip(&decoded) {
                SegmentVerdict::evaluate(0, &code, v, info, 0.5)?;
            }
            writeln!(out, "confidence,,{},,{:.3}", args.frames, t.elapsed().as_secs_f64() * 1e6 / args.frames as f64)?;
        }
    }
    Ok(())
}

fn load_sentences(path: &Option<PathBuf>) -> Result<Vec<String>> {
    match path {
        Some(p) => Ok(Corpus::load(p)?.sentences),
        None => bail!("--corpus is required for this provider"),
    }
}

fn serve_native(args: ServeArgs) -> Result<()> {
    let provider: Box<dyn CandidateProvider> = match args.provider {
        NativeProvider::Identity => Box::new(IdentityProvider),
        NativeProvider::Dictionary => Box::new(DictionaryProvider::new(&load_sentences(&args.corpus)?)?),
        NativeProvider::Ngram => {
            Box::new(NgramProvider::train(&load_sentences(&args.corpus)?, args.order, args.delta, args.beam)?)
        }
    };
    let stdin = io::stdin();
    serve(&provider, stdin.lock(), io::stdout().lock())?;
    Ok(())
}

#[derive(Serialize)]
struct CorruptedPair<'a> {
    id: usize,
    clean: &'a str,
    corrupted: String,
    segment_errors: usize,
}

fn corrupt(args: CorruptArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let code = LinearCode::random(args.n, args.k, args.code_seed)?;
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let mut skipped = 0;
    for (i, s) in corpus.sentences.iter().enumerate() {
        let Ok(frame) = frame_sentence(s, args.q, args.k) else {
            skipped += 1;
            continue;
        };
        let shape = FrameShape::of(&frame);
        for r in 0..args.repeats {
            let mut rng = sentence_rng(args.seed, r, i);
            let obs = transmit_frame(&code, &frame, args.snr, &mut rng)?;
            let out = run_msc(&code, shape, &obs, args.osd_order)?;
            let segment_errors = out.decodes.iter().zip(&frame.bitstreams).filter(|(d, b)| d.info != **b).count();
            let pair = CorruptedPair { id: i, clean: s, corrupted: out.text.trim_end_matches(PAD).to_string(), segment_errors };
            serde_json::to_writer(&mut w, &pair)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    if skipped > 0 {
        eprintln!("skipped {skipped} sentences longer than the frame");
    }
    Ok(())
}
