use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use moveseq::eval::{
    match_detections, parse_alpha_grid, per_class_report, sweep_thresholds, Aggregation,
    SweepOptions,
};
use moveseq::features::assemble_features;
use moveseq::normalization::normalize_sequence;
use moveseq::skeleton::{repair_pose, resample};
use moveseq::{
    AnnotationSet, DetectionTimeline, FeatureSet, GameRecord, Metric, NormalizationConfig,
    Pipeline, PipelineConfig, SkeletonSequence, TcnConfig, TcnModel, Threshold,
};

#[derive(Parser)]
#[command(
    name = "moveseq",
    version,
    about = "Online one-shot action detection on skeleton streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random encoder.
    InitWeights {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Encoder configuration as JSON; defaults to the standard 423-input encoder.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repair and normalize a sequence into the body frame.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-frame feature vectors as JSONL.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "norm,geom")]
        features: FeatureSet,
        #[arg(long, default_value_t = 1, value_parser = positive)]
        frame_skip: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Streaming embeddings as JSONL.
    Encode {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detection timeline of one game.
    Detect {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        matching: MatchArgs,
        /// Anchor sequence; repeat for one file per anchor interval.
        #[arg(long, required = true)]
        anchor: Vec<PathBuf>,
        #[arg(long)]
        annotations: PathBuf,
        /// Game to run; may be omitted when the annotations hold a single game.
        #[arg(long)]
        game: Option<String>,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 0.4)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a segment with the closest anchor class.
    Classify {
        #[command(flatten)]
        model: ModelArgs,
        /// Directory of `<class>.jsonl` anchor sequences.
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        segment: PathBuf,
        #[arg(long, default_value_t = Metric::Cos)]
        metric: Metric,
        #[arg(long, default_value_t = 3)]
        m: usize,
    },
    /// Score `<game>.csv` timelines against the annotations.
    Eval {
        #[arg(long)]
        timelines: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 32, value_parser = positive)]
        w: usize,
        /// Stride the timelines were produced with.
        #[arg(long, default_value_t = 1, value_parser = positive)]
        frame_skip: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precision/recall curve over an alpha grid for a corpus of games.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        matching: MatchArgs,
        /// Directory with `<game>.target.jsonl` and `<game>.anchor[.k].jsonl` files.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value = "0:1:0.01", value_parser = alpha_grid)]
        alpha_grid: AlphaGrid,
        #[arg(long, value_parser = positive)]
        w: Option<usize>,
        /// Average per game instead of pooling counts.
        #[arg(long)]
        macro_average: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone)]
struct AlphaGrid(Vec<f64>);

fn alpha_grid(s: &str) -> std::result::Result<AlphaGrid, String> {
    parse_alpha_grid(s)
        .map(AlphaGrid)
        .map_err(|e| e.to_string())
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value = "norm,geom")]
    features: FeatureSet,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    frame_skip: usize,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long, default_value_t = Metric::Cos)]
    metric: Metric,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Tighten alpha with the idle interval (default).
    #[arg(long, conflicts_with = "no_dynamic")]
    dynamic: bool,
    #[arg(long)]
    no_dynamic: bool,
}

impl MatchArgs {
    fn dynamic(&self) -> bool {
        !self.no_dynamic
    }
}

fn pipeline(model: &ModelArgs, matching: Option<&MatchArgs>, alpha: f64) -> Result<Pipeline> {
    let weights = TcnModel::load_weights(&model.weights)?;
    let mut config = PipelineConfig {
        features: model.features,
        frame_skip: model.frame_skip,
        alpha,
        ..PipelineConfig::default()
    };
    if let Some(mt) = matching {
        config.metric = mt.metric;
        config.m = mt.m;
        config.dynamic = mt.dynamic();
    }
    Ok(Pipeline::new(config, weights)?)
}

fn read_seq(path: &Path) -> Result<SkeletonSequence> {
    SkeletonSequence::read(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn pick_game<'a>(ann: &'a AnnotationSet, id: Option<&str>) -> Result<&'a GameRecord> {
    match id {
        Some(id) => ann
            .game(id)
            .ok_or_else(|| anyhow!("no game {id:?} in the annotations")),
        None if ann.games.len() == 1 => Ok(&ann.games[0]),
        None => bail!(
            "annotations hold {} games; choose one with --game",
            ann.games.len()
        ),
    }
}

/// Anchor files of a game in a corpus directory, in index order.
fn corpus_anchors(dir: &Path, id: &str) -> Result<Vec<PathBuf>> {
    let single = dir.join(format!("{id}.anchor.jsonl"));
    if single.exists() {
        return Ok(vec![single]);
    }
    let mut found = Vec::new();
    for k in 0.. {
        let p = dir.join(format!("{id}.anchor.{k}.jsonl"));
        if !p.exists() {
            break;
        }
        found.push(p);
    }
    if found.is_empty() {
        bail!("no anchor file for game {id} in {}", dir.display());
    }
    Ok(found)
}

fn sorted_jsonl(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    paths.sort();
    Ok(paths)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::InitWeights { seed, config, out } => {
            let config = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", p.display()))?
                }
                None => TcnConfig::default(),
            };
            TcnModel::init_seeded(config, seed)?.save_weights(out)?;
        }
        Command::Normalize { input, out } => {
            let (seq, _) = repair_pose(&read_seq(&input)?)?;
            let (norm, _) = normalize_sequence(&seq, &NormalizationConfig::default())?;
            norm.write(out)?;
        }
        Command::Features {
            input,
            features,
            frame_skip,
            out,
        } => {
            let (seq, _) = repair_pose(&read_seq(&input)?)?;
            let world = resample(&seq, frame_skip)?;
            let (norm, _) = normalize_sequence(&world, &NormalizationConfig::default())?;
            let frames = assemble_features(&world, &norm, features)?;
            let mut w = create(&out)?;
            for (pose, f) in world.poses.iter().zip(frames) {
                serde_json::to_writer(
                    &mut w,
                    &serde_json::json!({ "frame": pose.source_frame, "features": f.to_vec() }),
                )?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        Command::Encode { model, input, out } => {
            let p = pipeline(&model, None, PipelineConfig::default().alpha)?;
            let seq = read_seq(&input)?;
            let emb = p.encode_sequence(&seq)?;
            let (world, _) = p.prepare(&seq)?;
            let mut w = create(&out)?;
            for (pose, e) in world.poses.iter().zip(emb) {
                serde_json::to_writer(
                    &mut w,
                    &serde_json::json!({ "frame": pose.source_frame, "embedding": e }),
                )?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        Command::Detect {
            model,
            matching,
            anchor,
            annotations,
            game,
            target,
            alpha,
            out,
        } => {
            let p = pipeline(&model, Some(&matching), alpha)?;
            let ann = AnnotationSet::read(&annotations)?;
            let game = pick_game(&ann, game.as_deref())?;
            let anchors = anchor
                .iter()
                .map(|a| read_seq(a))
                .collect::<Result<Vec<_>>>()?;
            let outcome = p.run_game(&anchors, &read_seq(&target)?, game)?;
            outcome.timeline.write_csv(out)?;
        }
        Command::Classify {
            model,
            anchors,
            segment,
            metric,
            m,
        } => {
            let mut p = pipeline(&model, None, PipelineConfig::default().alpha)?;
            let config = PipelineConfig {
                metric,
                m,
                ..p.config().clone()
            };
            p = Pipeline::new(config, p.model().clone())?;
            let files = sorted_jsonl(&anchors)?;
            if files.is_empty() {
                bail!("no .jsonl anchors in {}", anchors.display());
            }
            let reps = files
                .iter()
                .map(|f| {
                    let label = f
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .unwrap_or_default()
                        .to_string();
                    Ok(p.anchor_from_sequences(&[read_seq(f)?], &label)?)
                })
                .collect::<Result<Vec<_>>>()?;
            println!("{}", p.classify(&reps, &read_seq(&segment)?)?);
        }
        Command::Eval {
            timelines,
            annotations,
            w,
            frame_skip,
            out,
        } => {
            let ann = AnnotationSet::read(&annotations)?;
            let mut results = Vec::new();
            for game in &ann.games {
                let path = timelines.join(format!("{}.csv", game.id));
                let tl =
                    DetectionTimeline::read_csv(&path, Threshold::fixed(f64::NAN), Metric::Cos)?;
                let gt: Vec<_> = game
                    .target_intervals
                    .iter()
                    .map(|iv| iv.downsample(frame_skip))
                    .collect();
                results.push((
                    game.id.clone(),
                    game.class_label.clone(),
                    match_detections(&tl.detections(), &gt, w)?,
                ));
            }
            per_class_report(&results, None, w).write_json(out)?;
        }
        Command::Sweep {
            model,
            matching,
            corpus,
            annotations,
            alpha_grid,
            w,
            macro_average,
            out,
        } => {
            let p = pipeline(&model, Some(&matching), PipelineConfig::default().alpha)?;
            let ann = AnnotationSet::read(&annotations)?;
            let mut games = Vec::new();
            for game in &ann.games {
                let anchors = corpus_anchors(&corpus, &game.id)?
                    .iter()
                    .map(|a| read_seq(a))
                    .collect::<Result<Vec<_>>>()?;
                let target = read_seq(&corpus.join(format!("{}.target.jsonl", game.id)))?;
                games.push(p.sweep_game(&anchors, &target, game)?);
            }
            let opts = SweepOptions {
                metric: matching.metric,
                m: matching.m,
                dynamic: matching.dynamic(),
                w: w.unwrap_or(p.match_window()),
                aggregation: if macro_average {
                    Aggregation::Macro
                } else {
                    Aggregation::Micro
                },
            };
            let res = sweep_thresholds(&games, &alpha_grid.0, opts)?;
            res.write_csv(out)?;
            let best = res.best_point();
            eprintln!("best alpha {} f1 {:.4}", best.alpha, best.scores.f1);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
