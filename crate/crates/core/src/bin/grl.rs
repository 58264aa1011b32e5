//! Command-line front end. Failures print one line
//! `error code=<n> kind=<kind> message=<text>` and exit with that code.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use grl_mad::augment::{augment_corpus, AugmentConfig};
use grl_mad::bioeval::{self, Report};
use grl_mad::error::{Error, Result};
use grl_mad::grlnet::load_checkpoint;
use grl_mad::manifest::Corpus;
use grl_mad::postops::{self, PostOp};
use grl_mad::sample::Split;
use grl_mad::stylemix::{self, StyleMode, StyleSpec};
use grl_mad::synthface::{build_corpus, CorpusConfig};
use grl_mad::trainer::{self, TrainConfig, Variant};

#[derive(Parser)]
#[command(name = "grl", version, about = "Morph attack detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PostKind {
    Jpg,
    Ps,
}

#[derive(Clone, Copy, ValueEnum)]
enum Style {
    ColorWct,
    FourierMix,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic face corpus.
    Datagen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        identities: usize,
        #[arg(long, default_value_t = 4)]
        instances: usize,
        /// Comma-separated attack tags (`lm`, `self-morph`); empty for none.
        #[arg(long, default_value = "")]
        attacks: String,
        /// Attack tags for the test split; defaults to `--attacks`.
        #[arg(long)]
        test_attacks: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        test_fraction: f64,
        #[arg(long)]
        max_morphs: Option<usize>,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Add self-morphs and style-mixed views to a corpus.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "sm,ism")]
        ops: String,
        #[arg(long)]
        style_pool: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        ism_probability: f64,
        #[arg(long, value_enum, default_value = "color-wct")]
        style: Style,
    },
    /// JPEG-cycle or print-scan every sample of a corpus.
    Postproc {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        op: PostKind,
        #[arg(long, default_value_t = 75)]
        quality: u32,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model on the train split of a corpus.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from an earlier checkpoint of the same run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a split with a stripped model and write the metric report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        det: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Train and evaluate several variants over several seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "baseline,sm,ism,label,emb,grl")]
        variants: String,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty() && *t != "none").map(String::from).collect()
}

fn write(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Datagen {
            out,
            identities,
            instances,
            attacks,
            test_attacks,
            test_fraction,
            max_morphs,
            size,
            seed,
        } => {
            let cfg = CorpusConfig {
                identities,
                instances,
                attacks: split_list(&attacks),
                test_attacks: test_attacks.as_deref().map(split_list),
                test_fraction,
                max_morphs,
                size,
                seed,
                ..CorpusConfig::default()
            };
            let c = build_corpus(&cfg, &out)?;
            println!("{} samples written to {}", c.len(), c.manifest_path().display());
        }
        Command::Augment {
            manifest,
            ops,
            style_pool,
            out,
            seed,
            ism_probability,
            style,
        } => {
            let cfg = AugmentConfig {
                seed,
                ism_probability,
                style: StyleSpec {
                    mode: match style {
                        Style::ColorWct => StyleMode::ColorWct,
                        Style::FourierMix => StyleMode::FourierMix,
                    },
                    ..StyleSpec::default()
                },
                ..AugmentConfig::default()
            }
            .with_ops(&ops)?;
            let pool = match (&style_pool, cfg.ism) {
                (Some(dir), true) => stylemix::load_style_pool(dir)?,
                (None, true) => return Err(Error::invalid("--style-pool is required for ism")),
                _ => vec![],
            };
            let c = augment_corpus(&Corpus::load(&manifest)?, &pool, &cfg, &out)?;
            println!("{} samples written to {}", c.len(), c.manifest_path().display());
        }
        Command::Postproc {
            manifest,
            op,
            quality,
            resolution,
            out,
            seed,
        } => {
            let op = match op {
                PostKind::Jpg => PostOp::Jpeg { quality, resolution },
                PostKind::Ps => PostOp::PrintScan { seed },
            };
            let c = postops::apply_corpus(&Corpus::load(&manifest)?, op, &out)?;
            println!("{} samples written to {}", c.len(), c.manifest_path().display());
        }
        Command::Train {
            config,
            data,
            out,
            resume,
        } => {
            let cfg = TrainConfig::load(&config)?;
            let corpus = Corpus::load(&data)?;
            let fit = trainer::fit(&cfg, &corpus, &out, resume.as_deref())?;
            if let Some(last) = fit.trace.last() {
                println!("epoch {} l_total {}", last.epoch, last.metrics.l_total);
            }
            println!("checkpoint written to {}", out.display());
        }
        Command::Eval {
            ckpt,
            data,
            split,
            report,
            det,
            scores,
        } => {
            let ck = load_checkpoint(&ckpt)?;
            let model = ck.model.strip_inference();
            let s = bioeval::score_dataset(&model, &Corpus::load(&data)?, Split::parse(&split)?)?;
            let r: Report = bioeval::report(&s, &report)?;
            if let Some(p) = det {
                bioeval::write_det_csv(&bioeval::det_curve(&s)?, &p)?;
            }
            if let Some(p) = scores {
                s.write_csv(&p)?;
            }
            print!("{}", r.to_json());
        }
        Command::Ablate {
            config,
            data,
            variants,
            seeds,
            out,
        } => {
            let cfg = TrainConfig::load(&config)?;
            let variants = Variant::parse_list(&variants)?;
            if variants.is_empty() {
                return Err(Error::invalid("no variants given"));
            }
            let table = trainer::ablate(&cfg, &Corpus::load(&data)?, &variants, seeds)?;
            write(&out, &table.to_json())?;
            for row in &table.rows {
                println!("{} eer {:.2} auc {:.2}", row.name, row.median_eer, row.median_auc);
            }
        }
    }
    Ok(())
}

fn kind(e: &Error) -> &'static str {
    match e.exit_code() {
        2 => "invalid-argument",
        3 => "io",
        _ => "numeric",
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error code={} kind={} message={msg}", e.exit_code(), kind(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
