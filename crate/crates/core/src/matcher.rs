//! Embedding distances, anchor representations, thresholds and detection.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tcn::Embedding;

const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cos,
    Js,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Metric::Cos => cosine_distance(a, b),
            Metric::Js => js_distance(a, b),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos" => Ok(Metric::Cos),
            "js" => Ok(Metric::Js),
            other => Err(Error::Argument(format!(
                "unknown metric {other:?}, expected cos or js"
            ))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cos => "cos",
            Metric::Js => "js",
        })
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "embedding dims differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `1 − a·b / (‖a‖‖b‖)`. Two zero vectors are at distance 0, one zero vector
/// is at distance 1 from anything else.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na < ZERO_NORM, nb < ZERO_NORM) {
        (true, true) => Ok(0.0),
        (true, false) | (false, true) => Ok(1.0),
        _ => Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0)),
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Square root of the base-2 Jensen-Shannon divergence between the softmax
/// distributions of the two embeddings.
pub fn js_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    if let Some(v) = a.iter().chain(b).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("embedding value {v}")));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let p = softmax(a);
    let q = softmax(b);
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&pi, &qi) in p.iter().zip(&q) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * (pi / mi).log2();
        }
        if qi > 0.0 {
            kl_q += qi * (qi / mi).log2();
        }
    }
    Ok((0.5 * (kl_p + kl_q)).clamp(0.0, 1.0).sqrt())
}

/// Embeddings representing one action class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRepresentation {
    pub class_label: String,
    pub embeddings: Vec<Embedding>,
    pub m: usize,
    pub source_count: usize,
}

impl AnchorRepresentation {
    /// Keeps the last `min(m, len)` embeddings of each anchor sequence and
    /// merges them.
    pub fn build(
        per_sequence: &[Vec<Embedding>],
        m: usize,
        class_label: impl Into<String>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("m must be at least 1".into()));
        }
        if per_sequence.is_empty() || per_sequence.iter().any(Vec::is_empty) {
            return Err(Error::Argument(
                "anchor needs at least one non-empty embedding sequence".into(),
            ));
        }
        let embeddings: Vec<Embedding> = per_sequence
            .iter()
            .flat_map(|seq| seq[seq.len().saturating_sub(m)..].iter().cloned())
            .collect();
        let dim = embeddings[0].len();
        if embeddings.iter().any(|e| e.len() != dim) {
            return Err(Error::Shape("anchor embeddings have different dims".into()));
        }
        Ok(Self {
            class_label: class_label.into(),
            embeddings,
            m,
            source_count: per_sequence.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    /// Minimum distance from `z` to any anchor embedding.
    pub fn distance(&self, z: &[f64], metric: Metric) -> Result<f64> {
        let mut best = f64::INFINITY;
        for a in &self.embeddings {
            best = best.min(metric.distance(a, z)?);
        }
        Ok(best)
    }
}

pub fn build_anchor(
    per_sequence: &[Vec<Embedding>],
    m: usize,
    class_label: &str,
) -> Result<AnchorRepresentation> {
    AnchorRepresentation::build(per_sequence, m, class_label)
}

pub fn distance_to_anchor(anchor: &AnchorRepresentation, z: &[f64], metric: Metric) -> Result<f64> {
    anchor.distance(z, metric)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub alpha: f64,
    pub dynamic: bool,
    pub effective_alpha: f64,
}

impl Threshold {
    pub fn fixed(alpha: f64) -> Self {
        Self {
            alpha,
            dynamic: false,
            effective_alpha: alpha,
        }
    }
}

/// The `⌈q·N⌉`-th smallest value (1-based). `None` for an empty slice.
pub fn nearest_rank_percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // The tolerance keeps exact products such as 0.1 · 10 from rounding up.
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Some(sorted[rank - 1])
}

/// Fixed threshold from already-computed idle distances.
pub fn dynamic_threshold_from_distances(alpha: f64, idle_distances: &[f64]) -> Threshold {
    let effective_alpha = match nearest_rank_percentile(idle_distances, 0.1) {
        Some(p10) => alpha.min(p10),
        None => alpha,
    };
    Threshold {
        alpha,
        dynamic: true,
        effective_alpha,
    }
}

/// Tightens `alpha` to the 10th percentile of the idle-interval distances.
pub fn dynamic_threshold(
    alpha: f64,
    anchor: &AnchorRepresentation,
    idle_embeddings: &[Embedding],
    metric: Metric,
) -> Result<Threshold> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("alpha {alpha} outside [0, 1]")));
    }
    let distances = idle_embeddings
        .iter()
        .map(|z| anchor.distance(z, metric))
        .collect::<Result<Vec<_>>>()?;
    Ok(dynamic_threshold_from_distances(alpha, &distances))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub frame: usize,
    pub distance: f64,
    pub detected: bool,
    /// `1 − distance` for detected frames.
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTimeline {
    pub records: Vec<TimelineRecord>,
    pub threshold: Threshold,
    pub metric: Metric,
}

impl DetectionTimeline {
    /// Applies `threshold` to precomputed distances for frames `0..n`.
    pub fn from_distances(distances: &[f64], threshold: Threshold, metric: Metric) -> Self {
        let records = distances
            .iter()
            .enumerate()
            .map(|(frame, &distance)| {
                let detected = distance < threshold.effective_alpha;
                TimelineRecord {
                    frame,
                    distance,
                    detected,
                    quality: detected.then_some(1.0 - distance),
                }
            })
            .collect();
        Self {
            records,
            threshold,
            metric,
        }
    }

    pub fn detections(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.detected)
            .map(|r| r.frame)
            .collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.distance).collect()
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Argument(format!("csv: {e}"));
        out.write_record(["frame", "distance", "detected", "quality"])
            .map_err(csv_err)?;
        for r in &self.records {
            out.write_record([
                r.frame.to_string(),
                format_sig9(r.distance),
                if r.detected { "1" } else { "0" }.to_string(),
                r.quality.map(format_sig9).unwrap_or_default(),
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

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads a timeline CSV. The threshold is not stored in the file; the
    /// returned timeline carries `threshold` and `metric` as given.
    pub fn read_csv_from<R: std::io::Read>(
        r: R,
        threshold: Threshold,
        metric: Metric,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["frame", "distance", "detected", "quality"] {
            return Err(Error::parse(
                1,
                "expected header frame,distance,detected,quality",
            ));
        }
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::parse(line, e.to_string()))?;
            let field = |k: usize| row.get(k).unwrap_or("");
            let frame = field(0)
                .parse()
                .map_err(|_| Error::parse(line, "bad frame"))?;
            let distance = field(1)
                .parse()
                .map_err(|_| Error::parse(line, "bad distance"))?;
            let detected = match field(2) {
                "1" => true,
                "0" => false,
                _ => return Err(Error::parse(line, "detected must be 0 or 1")),
            };
            let quality = match field(3) {
                "" => None,
                q => Some(q.parse().map_err(|_| Error::parse(line, "bad quality"))?),
            };
            records.push(TimelineRecord {
                frame,
                distance,
                detected,
                quality,
            });
        }
        Ok(Self {
            records,
            threshold,
            metric,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>, threshold: Threshold, metric: Metric) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file, threshold, metric)
    }
}

/// Nine significant digits in scientific notation.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Distance of every target embedding to the anchor, thresholded.
pub fn detect_stream(
    anchor: &AnchorRepresentation,
    target: &[Embedding],
    threshold: Threshold,
    metric: Metric,
) -> Result<DetectionTimeline> {
    let distances = target
        .iter()
        .map(|z| anchor.distance(z, metric))
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectionTimeline::from_distances(
        &distances, threshold, metric,
    ))
}

/// Label of the anchor closest to `segment`; the first anchor wins ties.
pub fn classify_segment(
    anchors: &[AnchorRepresentation],
    segment: &[f64],
    metric: Metric,
) -> Result<String> {
    let mut best: Option<(f64, &str)> = None;
    for a in anchors {
        let d = a.distance(segment, metric)?;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, &a.class_label));
        }
    }
    best.map(|(_, l)| l.to_string())
        .ok_or_else(|| Error::Argument("no anchors to classify against".into()))
}
