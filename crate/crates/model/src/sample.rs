use molpc_autograd::{softmax_in_place, Graph, Tensor};
use molpc_core::codec::{Vocabulary, BOS, EOS};
use molpc_core::pointcloud::PointCloud;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::encode_text;
use crate::error::ModelError;
use crate::model::{KvCache, Model, PointInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SampleMode {
    Greedy,
    Temperature { temperature: f64 },
    TopK { k: usize, temperature: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutput {
    /// Generated ids without BOS or EOS.
    pub tokens: Vec<usize>,
    /// Decoding stopped at the length limit instead of at EOS.
    pub hit_max_len: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub text: String,
    pub output: SampleOutput,
}

/// Lowest index among the largest values.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn choose_token<R: Rng + ?Sized>(logits: &[f64], mode: SampleMode, rng: &mut R) -> usize {
    match mode {
        SampleMode::Greedy => argmax(logits),
        SampleMode::Temperature { temperature } if temperature <= 0.0 => argmax(logits),
        SampleMode::Temperature { temperature } => {
            let mut p: Vec<f64> = logits.iter().map(|x| x / temperature).collect();
            softmax_in_place(&mut p);
            draw(&p, rng)
        }
        SampleMode::TopK { k, temperature } => {
            if k <= 1 || temperature <= 0.0 {
                return argmax(logits);
            }
            let mut order: Vec<usize> = (0..logits.len()).collect();
            order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
            order.truncate(k);
            let mut p: Vec<f64> = order.iter().map(|&i| logits[i] / temperature).collect();
            softmax_in_place(&mut p);
            order[draw(&p, rng)]
        }
    }
}

/// Autoregressive decoding with cached keys and values, up to
/// `max_tokens` generated ids.
pub fn sample_ids<R: Rng + ?Sized>(
    model: &Model,
    input: &[usize],
    points: Option<&PointInput>,
    mode: SampleMode,
    max_tokens: usize,
    rng: &mut R,
) -> Result<SampleOutput, ModelError> {
    let cross: Vec<(Tensor, Tensor)> = {
        let mut g = Graph::new(&model.params);
        let memory = model.encode(&mut g, input, points)?;
        let kv = model.cross_kv(&mut g, memory)?;
        kv.into_iter().map(|(k, v)| (g.value(k).clone(), g.value(v).clone())).collect()
    };
    let mut cache = KvCache::default();
    let mut tokens = Vec::new();
    let mut last = BOS as usize;
    for _ in 0..max_tokens {
        let mut g = Graph::new(&model.params);
        let cross_vars: Vec<_> = cross
            .iter()
            .map(|(k, v)| (g.constant(k.clone()), g.constant(v.clone())))
            .collect();
        let pass = model.decoder_pass(&mut g, &[last], Some(&cache), &cross_vars)?;
        cache.layers = pass
            .self_kv
            .iter()
            .map(|&(k, v)| (g.value(k).clone(), g.value(v).clone()))
            .collect();
        let next = choose_token(g.value(pass.logits).row(0), mode, rng);
        if next == EOS as usize {
            return Ok(SampleOutput {
                tokens,
                hit_max_len: false,
            });
        }
        tokens.push(next);
        last = next;
    }
    Ok(SampleOutput {
        tokens,
        hit_max_len: true,
    })
}

pub fn sample_text<R: Rng + ?Sized>(
    model: &Model,
    vocab: &Vocabulary,
    input_text: &str,
    pc: Option<&PointCloud>,
    mode: SampleMode,
    rng: &mut R,
) -> Result<Sample, ModelError> {
    let input = encode_text(vocab, input_text);
    let points = match pc {
        Some(pc) if !pc.is_empty() => Some(PointInput::from_cloud(pc, vocab)?),
        _ => None,
    };
    let output = sample_ids(model, &input, points.as_ref(), mode, model.config.decoder.max_output_tokens, rng)?;
    let ids: Vec<u32> = output.tokens.iter().map(|&t| t as u32).collect();
    Ok(Sample {
        text: vocab.decode(&ids),
        output,
    })
}
