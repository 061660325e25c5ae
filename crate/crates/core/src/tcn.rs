//! Dilated causal temporal convolution encoder.
//!
//! The encoder sees a hard window of the last `window_w` feature frames,
//! left-padded with zero frames. Each residual block holds one causal
//! convolution per dilation (ReLU after each), a residual path (1×1
//! projection when the channel count changes) and a 1×1 skip projection.
//! The embedding is the ReLU of the summed skip outputs at the last step.
//!
//! Only the time steps that can reach the last output are evaluated, and the
//! first layer's per-tap projections are computed once per frame, so a
//! streaming step costs a fraction of a full window pass.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Embedding = Vec<f64>;

pub const WEIGHTS_FORMAT: &str = "moveseq-tcn/1";

const SMALL_M: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnConfig {
    pub input_dim: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub num_blocks: usize,
    pub dilations: Vec<usize>,
    pub window_w: usize,
    pub embedding_dim: usize,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            input_dim: 423,
            filters: 256,
            kernel_size: 4,
            num_blocks: 2,
            dilations: vec![1, 2, 4],
            window_w: 32,
            embedding_dim: 256,
        }
    }
}

impl TcnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("filters", self.filters),
            ("kernel_size", self.kernel_size),
            ("num_blocks", self.num_blocks),
            ("window_w", self.window_w),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Argument(format!("{name} must be positive")));
            }
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(Error::Argument(
                "dilations must be a non-empty list of positive integers".into(),
            ));
        }
        if self.embedding_dim != self.filters {
            return Err(Error::Argument(format!(
                "embedding_dim {} must equal filters {}",
                self.embedding_dim, self.filters
            )));
        }
        Ok(())
    }

    /// Receptive field of the stacked convolutions, ignoring the hard window.
    pub fn receptive_field(&self) -> usize {
        1 + self.num_blocks
            * self
                .dilations
                .iter()
                .map(|d| (self.kernel_size - 1) * d)
                .sum::<usize>()
    }

    fn block_input(&self, block: usize) -> usize {
        if block == 0 {
            self.input_dim
        } else {
            self.filters
        }
    }
}

/// Causal 1-D convolution. Weights are laid out `[kernel][in][out]`; tap `k`
/// reads the input `(kernel − 1 − k) · dilation` steps in the past.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    fn zeros(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel,
            in_channels,
            out_channels,
            weight: vec![0.0; kernel * in_channels * out_channels],
            bias: vec![0.0; out_channels],
        }
    }

    fn shape(&self) -> [usize; 3] {
        [self.kernel, self.in_channels, self.out_channels]
    }

    fn tap(&self, k: usize) -> &[f64] {
        let n = self.in_channels * self.out_channels;
        &self.weight[k * n..(k + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    convs: Vec<Conv1d>,
    residual: Option<Conv1d>,
    skip: Conv1d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnModel {
    config: TcnConfig,
    blocks: Vec<Block>,
}

/// SplitMix64 generator used for deterministic initialization.
#[derive(Debug, Clone)]
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [−0.05, 0.05).
    fn next_param(&mut self) -> f64 {
        let u = self.next_u64();
        ((u >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5) * 0.1
    }
}

/// First-layer contributions of one frame: each tap of block 0's first
/// convolution applied to the frame, and the block-0 residual path.
#[derive(Debug, Clone)]
struct FrameProjection {
    taps: Vec<f64>,
    residual: Vec<f64>,
}

/// Row-major `c = a · b` with `a` m×k and `b` k×n.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m <= SMALL_M {
        // Streams `b` once instead of packing it; packing dominates for a few rows.
        c[..m * n].fill(0.0);
        for i in 0..k {
            let b_row = &b[i * n..(i + 1) * n];
            for r in 0..m {
                let av = a[r * k + i];
                if av == 0.0 {
                    continue;
                }
                for (cv, bv) in c[r * n..(r + 1) * n].iter_mut().zip(b_row) {
                    *cv += av * bv;
                }
            }
        }
        return;
    }
    // SAFETY: the slices are at least as large as the row-major m×k, k×n and
    // m×n matrices described by the strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Marks every input step read by a convolution evaluated at `out`.
fn expand(out: &[bool], kernel: usize, dilation: usize) -> Vec<bool> {
    let mut need = vec![false; out.len()];
    for (t, _) in out.iter().enumerate().filter(|(_, &m)| m) {
        for k in 0..kernel {
            if let Some(s) = t.checked_sub((kernel - 1 - k) * dilation) {
                need[s] = true;
            }
        }
    }
    need
}

fn union(a: &mut [bool], b: &[bool]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x |= *y;
    }
}

/// Steps needed per block: the block output mask and each convolution's mask.
struct Plan {
    outputs: Vec<Vec<bool>>,
    convs: Vec<Vec<Vec<bool>>>,
}

impl TcnModel {
    /// Deterministic model with parameters drawn from SplitMix64. Parameters are
    /// drawn block by block, layer by layer (convolutions, residual, skip),
    /// weights before biases, weights in `[kernel][in][out]` order.
    pub fn init_seeded(config: TcnConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = SplitMix64(seed);
        for layer in model.layers_mut() {
            for w in layer.weight.iter_mut() {
                *w = rng.next_param();
            }
            for b in layer.bias.iter_mut() {
                *b = rng.next_param();
            }
        }
        Ok(model)
    }

    /// Model with every parameter zero.
    pub fn zeros(config: TcnConfig) -> Result<Self> {
        config.validate()?;
        let f = config.filters;
        let k = config.kernel_size;
        let blocks = (0..config.num_blocks)
            .map(|b| {
                let input = config.block_input(b);
                let convs = (0..config.dilations.len())
                    .map(|j| Conv1d::zeros(k, if j == 0 { input } else { f }, f))
                    .collect();
                let residual = (input != f).then(|| Conv1d::zeros(1, input, f));
                Block {
                    convs,
                    residual,
                    skip: Conv1d::zeros(1, f, f),
                }
            })
            .collect();
        Ok(Self { config, blocks })
    }

    pub fn config(&self) -> &TcnConfig {
        &self.config
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    pub fn window_w(&self) -> usize {
        self.config.window_w
    }

    /// Layers in canonical order with their names.
    pub fn named_layers(&self) -> Vec<(String, &Conv1d)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for (j, c) in b.convs.iter().enumerate() {
                out.push((format!("block{i}.conv{j}"), c));
            }
            if let Some(r) = &b.residual {
                out.push((format!("block{i}.residual"), r));
            }
            out.push((format!("block{i}.skip"), &b.skip));
        }
        out
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Conv1d> {
        self.blocks.iter_mut().flat_map(|b| {
            b.convs
                .iter_mut()
                .chain(b.residual.iter_mut())
                .chain(std::iter::once(&mut b.skip))
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.named_layers()
            .iter()
            .map(|(_, l)| l.weight.len() + l.bias.len())
            .sum()
    }

    fn check_frame(&self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "feature frame has {} values, model expects {}",
                frame.len(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    fn project_frame(&self, frame: &[f64]) -> FrameProjection {
        let f = self.config.filters;
        let first = &self.blocks[0].convs[0];
        let mut taps = vec![0.0; first.kernel * f];
        for k in 0..first.kernel {
            gemm(
                1,
                first.in_channels,
                f,
                frame,
                first.tap(k),
                &mut taps[k * f..(k + 1) * f],
            );
        }
        let residual = match &self.blocks[0].residual {
            Some(r) => {
                let mut out = vec![0.0; f];
                gemm(1, r.in_channels, f, frame, &r.weight, &mut out);
                out
            }
            None => frame.to_vec(),
        };
        FrameProjection { taps, residual }
    }

    fn plan(&self) -> Plan {
        let t_len = self.config.window_w;
        let k = self.config.kernel_size;
        let dil = &self.config.dilations;
        let nb = self.blocks.len();
        let mut outputs = vec![Vec::new(); nb];
        let mut convs = vec![Vec::new(); nb];
        let mut last_only = vec![false; t_len];
        last_only[t_len - 1] = true;
        let mut need = last_only.clone();
        for b in (0..nb).rev() {
            let mut masks = vec![Vec::new(); dil.len()];
            masks[dil.len() - 1] = need.clone();
            for j in (1..dil.len()).rev() {
                masks[j - 1] = expand(&masks[j], k, dil[j]);
            }
            let mut input = expand(&masks[0], k, dil[0]);
            union(&mut input, &need);
            outputs[b] = need;
            convs[b] = masks;
            need = input;
            union(&mut need, &last_only);
        }
        Plan { outputs, convs }
    }

    /// Runs the network over `window_w` positions given per-position
    /// projections (`None` for zero padding).
    fn forward_projected(&self, window: &[Option<&FrameProjection>]) -> Embedding {
        let cfg = &self.config;
        let t_len = cfg.window_w;
        let f = cfg.filters;
        let kernel = cfg.kernel_size;
        debug_assert_eq!(window.len(), t_len);
        let plan = self.plan();
        let zero_taps = vec![0.0; kernel * f];
        let zero_res = vec![
            0.0;
            self.blocks[0]
                .residual
                .as_ref()
                .map_or(cfg.input_dim, |_| f)
        ];

        let mut block_in: Vec<f64> = Vec::new();
        let mut skip_sum = vec![0.0; f];
        for (b, block) in self.blocks.iter().enumerate() {
            let mut act: Vec<f64> = Vec::new();
            for (j, conv) in block.convs.iter().enumerate() {
                let d = cfg.dilations[j];
                let mask = &plan.convs[b][j];
                let mut out = vec![0.0; t_len * f];
                if b == 0 && j == 0 {
                    for t in (0..t_len).filter(|&t| mask[t]) {
                        let row = &mut out[t * f..(t + 1) * f];
                        row.copy_from_slice(&conv.bias);
                        for k in 0..kernel {
                            let Some(s) = t.checked_sub((kernel - 1 - k) * d) else {
                                continue;
                            };
                            let taps = window[s].map_or(&zero_taps[..], |p| &p.taps[..]);
                            for (o, v) in row.iter_mut().zip(&taps[k * f..(k + 1) * f]) {
                                *o += v;
                            }
                        }
                    }
                } else {
                    let (src, cin) = if j == 0 {
                        (&block_in, conv.in_channels)
                    } else {
                        (&act, f)
                    };
                    let rows: Vec<usize> = (0..t_len).filter(|&t| mask[t]).collect();
                    let width = kernel * cin;
                    let mut cols = vec![0.0; rows.len() * width];
                    for (r, &t) in rows.iter().enumerate() {
                        for k in 0..kernel {
                            if let Some(s) = t.checked_sub((kernel - 1 - k) * d) {
                                cols[r * width + k * cin..r * width + (k + 1) * cin]
                                    .copy_from_slice(&src[s * cin..(s + 1) * cin]);
                            }
                        }
                    }
                    let mut res = vec![0.0; rows.len() * f];
                    gemm(rows.len(), width, f, &cols, &conv.weight, &mut res);
                    for (r, &t) in rows.iter().enumerate() {
                        let row = &mut out[t * f..(t + 1) * f];
                        for ((o, v), bias) in
                            row.iter_mut().zip(&res[r * f..(r + 1) * f]).zip(&conv.bias)
                        {
                            *o = v + bias;
                        }
                    }
                }
                for t in (0..t_len).filter(|&t| mask[t]) {
                    relu_in_place(&mut out[t * f..(t + 1) * f]);
                }
                act = out;
            }

            let out_mask = &plan.outputs[b];
            let mut block_out = vec![0.0; t_len * f];
            for t in (0..t_len).filter(|&t| out_mask[t]) {
                let row = &mut block_out[t * f..(t + 1) * f];
                row.copy_from_slice(&act[t * f..(t + 1) * f]);
                match (b, &block.residual) {
                    (0, Some(r)) => {
                        let proj = window[t].map_or(&zero_res[..], |p| &p.residual[..]);
                        for ((o, v), bias) in row.iter_mut().zip(proj).zip(&r.bias) {
                            *o += v + bias;
                        }
                    }
                    (0, None) => {
                        let x = window[t].map_or(&zero_res[..], |p| &p.residual[..]);
                        for (o, v) in row.iter_mut().zip(x) {
                            *o += v;
                        }
                    }
                    (_, Some(r)) => {
                        let mut proj = vec![0.0; f];
                        let cin = r.in_channels;
                        gemm(
                            1,
                            cin,
                            f,
                            &block_in[t * cin..(t + 1) * cin],
                            &r.weight,
                            &mut proj,
                        );
                        for ((o, v), bias) in row.iter_mut().zip(&proj).zip(&r.bias) {
                            *o += v + bias;
                        }
                    }
                    (_, None) => {
                        for (o, v) in row.iter_mut().zip(&block_in[t * f..(t + 1) * f]) {
                            *o += v;
                        }
                    }
                }
                relu_in_place(row);
            }

            let last = &block_out[(t_len - 1) * f..t_len * f];
            let mut skip = vec![0.0; f];
            gemm(1, f, f, last, &block.skip.weight, &mut skip);
            for ((s, v), bias) in skip_sum.iter_mut().zip(&skip).zip(&block.skip.bias) {
                *s += v + bias;
            }
            block_in = block_out;
        }
        relu_in_place(&mut skip_sum);
        skip_sum
    }

    /// Embedding of a window of at most `window_w` frames, oldest first.
    /// Shorter windows are left-padded with zero frames.
    pub fn forward_window<F: AsRef<[f64]>>(&self, window: &[F]) -> Result<Embedding> {
        let w = self.config.window_w;
        if window.is_empty() || window.len() > w {
            return Err(Error::Shape(format!(
                "window holds {} frames, expected 1..={w}",
                window.len()
            )));
        }
        for frame in window {
            self.check_frame(frame.as_ref())?;
        }
        let projections: Vec<FrameProjection> = window
            .iter()
            .map(|f| self.project_frame(f.as_ref()))
            .collect();
        let pad = w - window.len();
        let slots: Vec<Option<&FrameProjection>> = (0..w)
            .map(|t| t.checked_sub(pad).map(|i| &projections[i]))
            .collect();
        Ok(self.forward_projected(&slots))
    }

    /// Pushes `frame` into the stream and returns the embedding of the current window.
    pub fn stream_step(
        &self,
        state: &mut EmbeddingStreamState,
        frame: &[f64],
    ) -> Result<Embedding> {
        self.check_frame(frame)?;
        let w = self.config.window_w;
        if state.window != w {
            return Err(Error::Shape(format!(
                "stream state window {} does not match model window {w}",
                state.window
            )));
        }
        let proj = self.project_frame(frame);
        if state.frames.len() == w {
            state.frames.pop_front();
            state.projections.pop_front();
        }
        state.frames.push_back(frame.to_vec());
        state.projections.push_back(proj);
        state.frames_seen += 1;
        let pad = w - state.projections.len();
        let slots: Vec<Option<&FrameProjection>> = (0..w)
            .map(|t| t.checked_sub(pad).map(|i| &state.projections[i]))
            .collect();
        Ok(self.forward_projected(&slots))
    }

    /// Embedding at every frame of `frames`, each from its own window
    /// `frames[n + 1 − w ..= n]`.
    pub fn encode_offline<F: AsRef<[f64]>>(&self, frames: &[F]) -> Result<Vec<Embedding>> {
        let w = self.config.window_w;
        (0..frames.len())
            .map(|n| self.forward_window(&frames[(n + 1).saturating_sub(w)..=n]))
            .collect()
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_weights(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_weights<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct LayerOut<'a> {
            name: String,
            shape: [usize; 3],
            data: &'a [f64],
            bias: &'a [f64],
        }
        #[derive(Serialize)]
        struct FileOut<'a> {
            format: &'static str,
            config: &'a TcnConfig,
            layers: Vec<LayerOut<'a>>,
        }
        let file = FileOut {
            format: WEIGHTS_FORMAT,
            config: &self.config,
            layers: self
                .named_layers()
                .into_iter()
                .map(|(name, l)| LayerOut {
                    name,
                    shape: l.shape(),
                    data: &l.weight,
                    bias: &l.bias,
                })
                .collect(),
        };
        serde_json::to_writer(&mut *w, &file)?;
        w.write_all(b"\n")
    }

    pub fn load_weights(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_weights_str(&text)
    }

    pub fn from_weights_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct LayerIn {
            name: String,
            shape: Vec<usize>,
            data: Vec<Option<f64>>,
            bias: Vec<Option<f64>>,
        }
        #[derive(Deserialize)]
        struct FileIn {
            format: String,
            config: TcnConfig,
            layers: Vec<LayerIn>,
        }
        let file: FileIn =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if file.format != WEIGHTS_FORMAT {
            return Err(Error::Weights(format!(
                "unsupported format {:?}, expected {WEIGHTS_FORMAT}",
                file.format
            )));
        }
        let mut model = Self::zeros(file.config)?;
        let mut by_name: BTreeMap<String, LayerIn> = BTreeMap::new();
        for layer in file.layers {
            if by_name.contains_key(&layer.name) {
                return Err(Error::Weights(format!("duplicate layer {}", layer.name)));
            }
            by_name.insert(layer.name.clone(), layer);
        }
        let names: Vec<String> = model.named_layers().into_iter().map(|(n, _)| n).collect();
        for (name, target) in names.iter().zip(model.layers_mut()) {
            let layer = by_name
                .remove(name)
                .ok_or_else(|| Error::Weights(format!("missing layer {name}")))?;
            let expected = target.shape();
            if layer.shape.as_slice() != expected.as_slice() {
                return Err(Error::Shape(format!(
                    "layer {name} has shape {:?}, expected {expected:?}",
                    layer.shape
                )));
            }
            if layer.data.len() != target.weight.len() {
                return Err(Error::Shape(format!(
                    "layer {name} holds {} weights, shape {expected:?} needs {}",
                    layer.data.len(),
                    target.weight.len()
                )));
            }
            if layer.bias.len() != target.bias.len() {
                return Err(Error::Shape(format!(
                    "layer {name} holds {} biases, expected {}",
                    layer.bias.len(),
                    target.bias.len()
                )));
            }
            let non_finite = || Error::NonFinite(format!("layer {name}"));
            for (dst, src) in target.weight.iter_mut().zip(&layer.data) {
                *dst = src.filter(|v| v.is_finite()).ok_or_else(non_finite)?;
            }
            for (dst, src) in target.bias.iter_mut().zip(&layer.bias) {
                *dst = src.filter(|v| v.is_finite()).ok_or_else(non_finite)?;
            }
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Weights(format!("unexpected layer {extra}")));
        }
        Ok(model)
    }

    pub fn weights_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_weights(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

/// Online encoder state of one stream: the last `window_w` frames and their
/// first-layer projections.
#[derive(Debug, Clone)]
pub struct EmbeddingStreamState {
    window: usize,
    frames: VecDeque<Vec<f64>>,
    projections: VecDeque<FrameProjection>,
    frames_seen: u64,
}

impl EmbeddingStreamState {
    pub fn new(model: &TcnModel) -> Self {
        let window = model.window_w();
        Self {
            window,
            frames: VecDeque::with_capacity(window),
            projections: VecDeque::with_capacity(window),
            frames_seen: 0,
        }
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn buffered(&self) -> usize {
        self.frames.len()
    }

    /// Buffered frames, oldest first.
    pub fn window(&self) -> impl Iterator<Item = &[f64]> {
        self.frames.iter().map(Vec::as_slice)
    }

    pub fn reset(&mut self) {
        self.frames.clear();
        self.projections.clear();
        self.frames_seen = 0;
    }
}
