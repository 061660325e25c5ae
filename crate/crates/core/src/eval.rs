//! Windowed detection scoring.
//!
//! A detection at frame `n` hits a ground-truth interval `[s, e]` when
//! `s ≤ n ≤ e + w`. Every interval with at least one hit is one true
//! positive, every interval without is one false negative. Detections that
//! hit nothing are grouped left to right: a group covers `w` frames from its
//! first detection and counts as one false positive.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{
    dynamic_threshold_from_distances, AnchorRepresentation, DetectionTimeline, Metric,
};
use crate::skeleton::Interval;
use crate::tcn::Embedding;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Counts {
    /// Precision and recall are 1 when their denominators are 0; F1 is 0 when
    /// both are 0.
    pub fn scores(&self) -> Scores {
        let precision = if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let recall = if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Scores {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub counts: Counts,
    /// Each detected interval with its earliest hitting detection.
    pub matched: Vec<(Interval, usize)>,
    /// Frame span of each false-positive group.
    pub fp_groups: Vec<Interval>,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.counts.tp
    }

    pub fn fp(&self) -> usize {
        self.counts.fp
    }

    pub fn fn_(&self) -> usize {
        self.counts.fn_
    }
}

/// Sorts the intervals and rejects overlapping ones.
pub fn sorted_intervals(gt: &[Interval]) -> Result<Vec<Interval>> {
    let mut gt = gt.to_vec();
    gt.sort();
    for pair in gt.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err(Error::Annotation(format!(
                "ground-truth intervals [{}, {}] and [{}, {}] overlap",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(gt)
}

pub fn match_detections(detections: &[usize], gt: &[Interval], w: usize) -> Result<MatchResult> {
    if w == 0 {
        return Err(Error::Argument("w must be at least 1".into()));
    }
    let gt = sorted_intervals(gt)?;
    let mut frames = detections.to_vec();
    frames.sort_unstable();
    frames.dedup();

    let hits = |iv: &Interval, n: usize| iv.start <= n && n <= iv.end + w;
    let mut matched = Vec::new();
    for iv in &gt {
        if let Some(&n) = frames.iter().find(|&&n| hits(iv, n)) {
            matched.push((*iv, n));
        }
    }
    let mut fp_groups: Vec<Interval> = Vec::new();
    for &n in frames.iter().filter(|&&n| !gt.iter().any(|iv| hits(iv, n))) {
        match fp_groups.last_mut() {
            Some(g) if n - g.start <= w => g.end = n,
            _ => fp_groups.push(Interval { start: n, end: n }),
        }
    }
    let counts = Counts {
        tp: matched.len(),
        fp: fp_groups.len(),
        fn_: gt.len() - matched.len(),
    };
    Ok(MatchResult {
        counts,
        matched,
        fp_groups,
    })
}

pub fn match_timeline(
    timeline: &DetectionTimeline,
    gt: &[Interval],
    w: usize,
) -> Result<MatchResult> {
    match_detections(&timeline.detections(), gt, w)
}

pub fn precision_recall_f1(m: &MatchResult) -> Scores {
    m.counts.scores()
}

/// How per-game results are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Sum counts over games, then score.
    #[default]
    Micro,
    /// Score each game, then average.
    Macro,
}

fn aggregate(per_game: &[Counts], how: Aggregation) -> Scores {
    match how {
        Aggregation::Micro => per_game.iter().copied().sum::<Counts>().scores(),
        Aggregation::Macro => {
            if per_game.is_empty() {
                return Counts::default().scores();
            }
            let n = per_game.len() as f64;
            let mut s = Scores::default();
            for c in per_game {
                let g = c.scores();
                s.precision += g.precision / n;
                s.recall += g.recall / n;
                s.f1 += g.f1 / n;
            }
            s
        }
    }
}

/// One game of a threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGame {
    pub id: String,
    pub class_label: String,
    /// Per anchor sequence, embeddings up to its end frame in time order.
    pub anchor_sequences: Vec<Vec<Embedding>>,
    pub target: Vec<Embedding>,
    pub gt: Vec<Interval>,
    /// Target embeddings over the idle interval.
    pub idle: Option<Vec<Embedding>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub counts: Counts,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: Vec<SweepPoint>,
    /// Index into `curve` of the highest F1, smallest alpha on ties.
    pub best: usize,
}

impl SweepResult {
    pub fn best_point(&self) -> &SweepPoint {
        &self.curve[self.best]
    }

    /// CSV `alpha,precision,recall,f1,best` with the best row flagged.
    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Argument(format!("csv: {e}"));
        out.write_record(["alpha", "precision", "recall", "f1", "best"])
            .map_err(csv_err)?;
        for (i, p) in self.curve.iter().enumerate() {
            out.write_record([
                p.alpha.to_string(),
                p.scores.precision.to_string(),
                p.scores.recall.to_string(),
                p.scores.f1.to_string(),
                if i == self.best { "1" } else { "0" }.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()
            .map_err(|e| Error::Argument(format!("csv: {e}")))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }
}

/// Distances of a game's target and idle frames to its anchor.
#[derive(Debug, Clone)]
pub struct GameDistances {
    pub target: Vec<f64>,
    pub idle: Option<Vec<f64>>,
}

impl GameDistances {
    pub fn compute(game: &SweepGame, m: usize, metric: Metric) -> Result<Self> {
        let anchor =
            AnchorRepresentation::build(&game.anchor_sequences, m, game.class_label.clone())?;
        let dist = |zs: &[Embedding]| {
            zs.iter()
                .map(|z| anchor.distance(z, metric))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            target: dist(&game.target)?,
            idle: game.idle.as_deref().map(dist).transpose()?,
        })
    }

    /// Detected frames at `alpha`, tightened by the idle distances when `dynamic`.
    pub fn detections(&self, alpha: f64, dynamic: bool) -> Vec<usize> {
        let effective = match (&self.idle, dynamic) {
            (Some(idle), true) => dynamic_threshold_from_distances(alpha, idle).effective_alpha,
            _ => alpha,
        };
        self.target
            .iter()
            .enumerate()
            .filter(|(_, &d)| d < effective)
            .map(|(n, _)| n)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub metric: Metric,
    pub m: usize,
    pub dynamic: bool,
    pub w: usize,
    pub aggregation: Aggregation,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Cos,
            m: 3,
            dynamic: true,
            w: 32,
            aggregation: Aggregation::Micro,
        }
    }
}

/// Precision/recall curve over `alphas` and the alpha with the best F1.
pub fn sweep_thresholds(
    games: &[SweepGame],
    alphas: &[f64],
    opts: SweepOptions,
) -> Result<SweepResult> {
    let distances = games
        .iter()
        .map(|g| GameDistances::compute(g, opts.m, opts.metric))
        .collect::<Result<Vec<_>>>()?;
    sweep_distances(games, &distances, alphas, opts)
}

/// Sweep over precomputed distances (one entry per game).
pub fn sweep_distances(
    games: &[SweepGame],
    distances: &[GameDistances],
    alphas: &[f64],
    opts: SweepOptions,
) -> Result<SweepResult> {
    if alphas.is_empty() {
        return Err(Error::Argument("alpha grid is empty".into()));
    }
    if games.len() != distances.len() {
        return Err(Error::Shape("one distance set per game required".into()));
    }
    let gts = games
        .iter()
        .map(|g| sorted_intervals(&g.gt))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let per_game = distances
            .iter()
            .zip(&gts)
            .map(|(d, gt)| {
                match_detections(&d.detections(alpha, opts.dynamic), gt, opts.w).map(|m| m.counts)
            })
            .collect::<Result<Vec<_>>>()?;
        curve.push(SweepPoint {
            alpha,
            counts: per_game.iter().copied().sum(),
            scores: aggregate(&per_game, opts.aggregation),
        });
    }
    let mut best = 0;
    for (i, p) in curve.iter().enumerate() {
        let b = &curve[best];
        if p.scores.f1 > b.scores.f1 || (p.scores.f1 == b.scores.f1 && p.alpha < b.alpha) {
            best = i;
        }
    }
    Ok(SweepResult { curve, best })
}

/// Parses `start:end:step` into an inclusive grid.
pub fn parse_alpha_grid(grid: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = grid.split(':').collect();
    let bad = || Error::Argument(format!("alpha grid {grid:?} must be start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(start <= end) || !start.is_finite() || !end.is_finite() {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    // Rounding to 12 decimals keeps grid points like 0.07 free of accumulated error.
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Counts> for ClassReport {
    fn from(counts: Counts) -> Self {
        let s = counts.scores();
        Self {
            counts,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub id: String,
    pub class: String,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub alpha: Option<f64>,
    pub w: usize,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: BTreeMap<String, ClassReport>,
    pub games: Vec<GameReport>,
}

impl EvalReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Per-class and overall scores from per-game `(id, class, result)` triples.
pub fn per_class_report(
    games: &[(String, String, MatchResult)],
    alpha: Option<f64>,
    w: usize,
) -> EvalReport {
    let mut per_class: BTreeMap<String, Counts> = BTreeMap::new();
    for (_, class, m) in games {
        *per_class.entry(class.clone()).or_default() += m.counts;
    }
    let counts: Counts = games.iter().map(|(_, _, m)| m.counts).sum();
    let s = counts.scores();
    EvalReport {
        alpha,
        w,
        counts,
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        per_class: per_class.into_iter().map(|(k, c)| (k, c.into())).collect(),
        games: games
            .iter()
            .map(|(id, class, m)| GameReport {
                id: id.clone(),
                class: class.clone(),
                counts: m.counts,
            })
            .collect(),
    }
}
