use molpc_core::codec::{Vocabulary, BOS, EOS};
use molpc_core::pretrain::{Task, TaskExample};

use crate::error::ModelError;
use crate::model::PointInput;

/// A task example as token ids. The input and the target both end with EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub task: Task,
    pub input: Vec<usize>,
    pub points: Option<PointInput>,
    pub target: Vec<usize>,
}

impl EncodedExample {
    /// BOS followed by the target without its final token.
    pub fn decoder_input(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.target.len());
        v.push(BOS as usize);
        v.extend_from_slice(&self.target[..self.target.len() - 1]);
        v
    }
}

pub fn encode_text(vocab: &Vocabulary, text: &str) -> Vec<usize> {
    let mut ids: Vec<usize> = vocab.encode(text).into_iter().map(|t| t as usize).collect();
    ids.push(EOS as usize);
    ids
}

pub fn encode_example(ex: &TaskExample, vocab: &Vocabulary, max_output_tokens: usize) -> Result<EncodedExample, ModelError> {
    let target = encode_text(vocab, &ex.target);
    if target.len() > max_output_tokens {
        return Err(ModelError::TargetTooLong {
            len: target.len(),
            max: max_output_tokens,
        });
    }
    let points = match &ex.pc {
        Some(pc) if !pc.is_empty() => Some(PointInput::from_cloud(pc, vocab)?),
        _ => None,
    };
    Ok(EncodedExample {
        task: ex.task,
        input: encode_text(vocab, &ex.input_text),
        points,
        target,
    })
}
