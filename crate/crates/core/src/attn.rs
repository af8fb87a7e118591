//! Toy multi-head attention with temporal rotary rotation and the
//! query-stream phase operator.
//!
//! Instances hold unrotated per-head content. The pipeline is
//! `rope_apply` (base rotation of queries and keys at their positions),
//! optionally `pas_apply` (extra per-group rotation of video-token query
//! rows), then `attention_forward`. Rotations on the same pair compose
//! additively, so a query shifted by `d` equals the base rotation at
//! `position + d`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::pas::PhaseConfig;
use crate::report::SweepReport;
use crate::rope::{FrequencyLineSet, TimeScale};

/// Unrotated attention inputs: per-head content, token positions (bin
/// units), and the video/text mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionInstance {
    head_count: usize,
    head_dim: usize,
    /// `queries[head][token]` is a `head_dim` vector.
    queries: Vec<Vec<Vec<f64>>>,
    keys: Vec<Vec<Vec<f64>>>,
    values: Vec<Vec<Vec<f64>>>,
    positions: Vec<f64>,
    video_mask: Vec<bool>,
}

fn check_tensor(name: &str, t: &[Vec<Vec<f64>>], heads: usize, tokens: usize, dim: usize) -> Result<()> {
    if t.len() != heads {
        return invalid(format!("{name}: expected {heads} heads, got {}", t.len()));
    }
    for rows in t {
        if rows.len() != tokens {
            return invalid(format!("{name}: expected {tokens} tokens, got {}", rows.len()));
        }
        for row in rows {
            if row.len() != dim {
                return invalid(format!("{name}: expected dim {dim}, got {}", row.len()));
            }
        }
    }
    Ok(())
}

impl AttentionInstance {
    pub fn new(
        queries: Vec<Vec<Vec<f64>>>,
        keys: Vec<Vec<Vec<f64>>>,
        values: Vec<Vec<Vec<f64>>>,
        positions: Vec<f64>,
        video_mask: Vec<bool>,
    ) -> Result<Self> {
        let head_count = queries.len();
        if head_count == 0 {
            return invalid("instance needs at least one head");
        }
        let tokens = positions.len();
        if tokens == 0 {
            return invalid("instance needs at least one token");
        }
        let head_dim = queries[0].first().map(|r| r.len()).unwrap_or(0);
        if head_dim == 0 || head_dim % 2 != 0 {
            return invalid(format!("head_dim must be a positive even number, got {head_dim}"));
        }
        check_tensor("queries", &queries, head_count, tokens, head_dim)?;
        check_tensor("keys", &keys, head_count, tokens, head_dim)?;
        check_tensor("values", &values, head_count, tokens, head_dim)?;
        if video_mask.len() != tokens {
            return Err(Error::LengthMismatch { expected: tokens, got: video_mask.len() });
        }
        if !positions.iter().all(|p| p.is_finite()) {
            return invalid("positions must be finite");
        }
        Ok(Self { head_count, head_dim, queries, keys, values, positions, video_mask })
    }

    /// Random content instance; the first `tokens - video_tokens` tokens
    /// are text, the rest a right-aligned video span with unit-bin
    /// positions.
    pub fn random(
        head_count: usize,
        head_dim: usize,
        tokens: usize,
        video_tokens: usize,
        seed: u64,
    ) -> Result<Self> {
        if video_tokens > tokens {
            return invalid("video span cannot exceed token count");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensor = |scale: f64| -> Vec<Vec<Vec<f64>>> {
            (0..head_count)
                .map(|_| {
                    (0..tokens)
                        .map(|_| (0..head_dim).map(|_| rng.gen_range(-scale..scale)).collect())
                        .collect()
                })
                .collect()
        };
        let queries = tensor(1.0);
        let keys = tensor(1.0);
        let values = tensor(1.0);
        let positions = (0..tokens).map(|t| t as f64).collect();
        let video_mask = (0..tokens).map(|t| t >= tokens - video_tokens).collect();
        Self::new(queries, keys, values, positions, video_mask)
    }

    pub fn head_count(&self) -> usize {
        self.head_count
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn token_count(&self) -> usize {
        self.positions.len()
    }

    pub fn video_token_count(&self) -> usize {
        self.video_mask.iter().filter(|v| **v).count()
    }

    pub fn queries(&self) -> &[Vec<Vec<f64>>] {
        &self.queries
    }

    pub fn keys(&self) -> &[Vec<Vec<f64>>] {
        &self.keys
    }

    pub fn values(&self) -> &[Vec<Vec<f64>>] {
        &self.values
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn video_mask(&self) -> &[bool] {
        &self.video_mask
    }

    /// Same instance with replaced positions (used by jitter sweeps).
    pub fn with_positions(&self, positions: Vec<f64>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::LengthMismatch {
                expected: self.positions.len(),
                got: positions.len(),
            });
        }
        let mut out = self.clone();
        out.positions = positions;
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: AttentionInstance = serde_json::from_str(s)
            .map_err(|e| Error::InvalidArgument(format!("bad instance JSON: {e}")))?;
        Self::new(raw.queries, raw.keys, raw.values, raw.positions, raw.video_mask)
    }
}

/// Rotates pair `i` of `vec` by `angles[i]`, counting four multiplies per
/// pair into `macs`.
pub(crate) fn rotate_pairs_in_place(vec: &mut [f64], angles: &[f64], macs: &mut u64) {
    for (i, &ang) in angles.iter().enumerate() {
        if ang == 0.0 {
            continue;
        }
        let (s, c) = ang.sin_cos();
        let x = vec[2 * i];
        let y = vec[2 * i + 1];
        vec[2 * i] = x * c - y * s;
        vec[2 * i + 1] = x * s + y * c;
        *macs += 4;
    }
}

fn rotation_angles(ls: &FrequencyLineSet, ts: &TimeScale, position: f64) -> Vec<f64> {
    let a = ts.alpha();
    ls.lines().iter().map(|w| w * a * position).collect()
}

/// Planar rotation of the temporal pairs `(2i, 2i+1)` by `w_i * a * position`;
/// coordinates beyond `2 * pair_count` pass through untouched.
pub fn rope_rotate(
    vec: &[f64],
    position: f64,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
) -> Result<Vec<f64>> {
    if vec.len() < 2 * ls.pair_count() {
        return Err(Error::LengthMismatch { expected: 2 * ls.pair_count(), got: vec.len() });
    }
    let mut out = vec.to_vec();
    let mut macs = 0u64;
    rotate_pairs_in_place(&mut out, &rotation_angles(ls, ts, position), &mut macs);
    Ok(out)
}

/// Base positional rotation of every query and key row at its token
/// position. Values are untouched.
pub fn rope_apply(
    inst: &AttentionInstance,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
) -> Result<AttentionInstance> {
    if inst.head_dim() < 2 * ls.pair_count() {
        return Err(Error::LengthMismatch {
            expected: 2 * ls.pair_count(),
            got: inst.head_dim(),
        });
    }
    let mut out = inst.clone();
    let angles: Vec<Vec<f64>> = inst
        .positions
        .iter()
        .map(|&p| rotation_angles(ls, ts, p))
        .collect();
    let mut macs = 0u64;
    for h in 0..out.head_count {
        for t in 0..out.positions.len() {
            rotate_pairs_in_place(&mut out.queries[h][t], &angles[t], &mut macs);
            rotate_pairs_in_place(&mut out.keys[h][t], &angles[t], &mut macs);
        }
    }
    Ok(out)
}

pub(crate) fn pas_apply_counted(
    inst: &AttentionInstance,
    cfg: &PhaseConfig,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
    macs: &mut u64,
) -> Result<AttentionInstance> {
    if inst.head_dim() < 2 * ls.pair_count() {
        return Err(Error::LengthMismatch {
            expected: 2 * ls.pair_count(),
            got: inst.head_dim(),
        });
    }
    let mut out = inst.clone();
    for h in 0..inst.head_count {
        let group = cfg.group_of(h, inst.head_count)?;
        let delta = cfg.offsets()[group];
        if delta == 0.0 {
            continue;
        }
        let angles = rotation_angles(ls, ts, delta);
        for t in 0..inst.positions.len() {
            if !inst.video_mask[t] {
                continue;
            }
            rotate_pairs_in_place(&mut out.queries[h][t], &angles, macs);
        }
    }
    Ok(out)
}

/// Applies the phase operator to the query stream: video-token query rows
/// of each head receive an extra rotation by that head's group offset.
/// Keys, values, text rows, and non-temporal channels are bit-identical
/// to the input.
pub fn pas_apply(
    inst: &AttentionInstance,
    cfg: &PhaseConfig,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
) -> Result<AttentionInstance> {
    let mut macs = 0u64;
    pas_apply_counted(inst, cfg, ls, ts, &mut macs)
}

/// Per-head logits, row-softmax weights, and weighted value outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    logits: Vec<Vec<Vec<f64>>>,
    weights: Vec<Vec<Vec<f64>>>,
    outputs: Vec<Vec<Vec<f64>>>,
}

impl AttentionOutput {
    pub fn logits(&self) -> &[Vec<Vec<f64>>] {
        &self.logits
    }

    pub fn weights(&self) -> &[Vec<Vec<f64>>] {
        &self.weights
    }

    pub fn outputs(&self) -> &[Vec<Vec<f64>>] {
        &self.outputs
    }

    /// Mean over heads of the logit matrices.
    pub fn aggregated_logits(&self) -> Vec<Vec<f64>> {
        aggregate(&self.logits)
    }

    /// Mean over heads of the weight matrices.
    pub fn aggregated_weights(&self) -> Vec<Vec<f64>> {
        aggregate(&self.weights)
    }
}

fn aggregate(per_head: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let heads = per_head.len() as f64;
    let rows = per_head[0].len();
    let cols = per_head[0][0].len();
    let mut out = vec![vec![0.0; cols]; rows];
    for head in per_head {
        for (i, row) in head.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i][j] += v / heads;
            }
        }
    }
    out
}

fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

pub(crate) fn attention_forward_counted(inst: &AttentionInstance, macs: &mut u64) -> AttentionOutput {
    let heads = inst.head_count();
    let n = inst.token_count();
    let d = inst.head_dim();
    let scale = 1.0 / (d as f64).sqrt();

    let mut logits = vec![vec![vec![0.0; n]; n]; heads];
    let mut weights = vec![vec![vec![0.0; n]; n]; heads];
    let mut outputs = vec![vec![vec![0.0; d]; n]; heads];

    for h in 0..heads {
        for i in 0..n {
            for j in 0..n {
                let mut dot = 0.0;
                for k in 0..d {
                    dot += inst.queries[h][i][k] * inst.keys[h][j][k];
                }
                *macs += d as u64;
                logits[h][i][j] = dot * scale;
                *macs += 1;
            }
            weights[h][i] = softmax_row(&logits[h][i]);
            for j in 0..n {
                let w = weights[h][i][j];
                for k in 0..d {
                    outputs[h][i][k] += w * inst.values[h][j][k];
                }
                *macs += d as u64;
            }
        }
    }
    AttentionOutput { logits, weights, outputs }
}

/// Scaled dot-product attention per head: `logits = <q, k> / sqrt(d)`,
/// rows softmaxed, outputs weight-averaged values.
pub fn attention_forward(inst: &AttentionInstance) -> AttentionOutput {
    let mut macs = 0u64;
    attention_forward_counted(inst, &mut macs)
}

fn abs_changes(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, f64) {
    let mut max = 0.0_f64;
    let mut sum = 0.0_f64;
    let mut count = 0usize;
    for (ra, rb) in a.iter().zip(b.iter()) {
        for (x, y) in ra.iter().zip(rb.iter()) {
            let d = (x - y).abs();
            max = max.max(d);
            sum += d;
            count += 1;
        }
    }
    (max, sum / count as f64)
}

fn pipeline_aggregated_logits(
    inst: &AttentionInstance,
    cfg: Option<&PhaseConfig>,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
) -> Result<Vec<Vec<f64>>> {
    let rotated = rope_apply(inst, ls, ts)?;
    let staged = match cfg {
        Some(c) => pas_apply(&rotated, c, ls, ts)?,
        None => rotated,
    };
    Ok(attention_forward(&staged).aggregated_logits())
}

/// Jitter response of the head-aggregated logits.
///
/// For each magnitude, every video-token position is perturbed by that
/// magnitude with a seeded random sign, the pipeline is re-run (with the
/// phase operator when `cfg` is given), and the max and mean absolute
/// change against the unperturbed logits is reported.
pub fn logit_jitter(
    inst: &AttentionInstance,
    cfg: Option<&PhaseConfig>,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
    jitter_magnitudes: &[f64],
    seed: u64,
) -> Result<SweepReport> {
    if jitter_magnitudes.is_empty() {
        return invalid("need at least one jitter magnitude");
    }
    if !jitter_magnitudes.iter().all(|m| m.is_finite() && *m >= 0.0) {
        return invalid("jitter magnitudes must be nonnegative");
    }
    let reference = pipeline_aggregated_logits(inst, cfg, ls, ts)?;

    let mut max_changes = Vec::with_capacity(jitter_magnitudes.len());
    let mut mean_changes = Vec::with_capacity(jitter_magnitudes.len());
    for (idx, &mag) in jitter_magnitudes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((idx as u64) << 40));
        let positions: Vec<f64> = inst
            .positions
            .iter()
            .zip(inst.video_mask.iter())
            .map(|(&p, &is_video)| {
                if is_video {
                    let sign = if rng.gen_range(0..2u8) == 0 { -1.0 } else { 1.0 };
                    p + sign * mag
                } else {
                    p
                }
            })
            .collect();
        let jittered = inst.with_positions(positions)?;
        let logits = pipeline_aggregated_logits(&jittered, cfg, ls, ts)?;
        let (max, mean) = abs_changes(&reference, &logits);
        max_changes.push(max);
        mean_changes.push(mean);
    }

    let mut report = SweepReport::new("jitter_magnitude", jitter_magnitudes.to_vec());
    report.push_metric("max_abs_change", max_changes)?;
    report.push_metric("mean_abs_change", mean_changes)?;
    report.metadata = json!({
        "seed": seed,
        "pas": cfg.map(|c| serde_json::from_str::<serde_json::Value>(&c.to_json()).unwrap()),
        "tokens": inst.token_count(),
        "heads": inst.head_count(),
    });
    Ok(report)
}
