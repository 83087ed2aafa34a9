use std::path::{Path, PathBuf};

use molpc_core::datagen::ToySpec;
use molpc_core::pretrain::{BlurParams, Task, TaskConfig};
use molpc_model::{ModelConfig, SampleMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "MOLPC_";

const SECTIONS: [&str; 6] = ["model", "train", "corpus", "sample", "eval", "data"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Threads for parallel stages. Unset means all available cores.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<String>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_tasks() -> Vec<String> {
    vec!["conformation".to_string()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `toy` or `full`.
    pub preset: String,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub heads: Option<usize>,
    pub ff: Option<usize>,
    pub embed_std: Option<f64>,
    pub max_output_tokens: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            preset: "toy".to_string(),
            layers: None,
            hidden: None,
            heads: None,
            ff: None,
            embed_std: None,
            max_output_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub min_lr: f64,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    pub log_every: usize,
    /// Task corpora written by `corpus build-task`. Empty means build the
    /// configured tasks in memory from the molecule corpus.
    pub corpora: Vec<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 16,
            lr: 1e-3,
            min_lr: 0.0,
            warmup_steps: 50,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
            log_every: 100,
            corpora: Vec::new(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// Molecule corpus, one SMILES+XYZ line per molecule. Unset means
    /// generate `molecules` toy molecules.
    pub path: Option<PathBuf>,
    pub molecules: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub branch_prob: f64,
    pub ring_prob: f64,
    pub carbonyl_prob: f64,
    /// Share of molecules that get a generated pocket. Pocket-task examples
    /// always get one.
    pub pocket_fraction: f64,
    pub pocket_residues: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let spec = ToySpec::default();
        Self {
            path: None,
            molecules: 500,
            min_atoms: spec.min_atoms,
            max_atoms: spec.max_atoms,
            branch_prob: spec.branch_prob,
            ring_prob: spec.ring_prob,
            carbonyl_prob: spec.carbonyl_prob,
            pocket_fraction: 0.0,
            pocket_residues: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub p_mask: f64,
    pub blur_ratio: f64,
    pub blur_sigma: f64,
    pub blur_replicas: usize,
    pub shape_sigma: f64,
    pub shape_replicas: usize,
    pub rotate: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        let t = TaskConfig::default();
        Self {
            p_mask: t.p_mask,
            blur_ratio: t.blur_ratio,
            blur_sigma: t.blur.sigma,
            blur_replicas: t.blur.replicas,
            shape_sigma: t.shape_blur.sigma,
            shape_replicas: t.shape_blur.replicas,
            rotate: t.rotate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    /// `greedy`, `temperature` or `top_k`.
    pub mode: String,
    pub temperature: f64,
    pub k: usize,
    /// Prompts per task, taken from the front of each task pool.
    pub count: usize,
    pub max_tokens: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            mode: "greedy".to_string(),
            temperature: 1.0,
            k: 10,
            count: 100,
            max_tokens: None,
            checkpoint: None,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub samples: Option<PathBuf>,
    pub coverage_delta: f64,
    pub top_k: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            samples: None,
            coverage_delta: molpc_core::metrics::DEFAULT_COVERAGE_THRESHOLD,
            top_k: 8,
        }
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `MOLPC_<KEY>` and `MOLPC_<SECTION>_<KEY>` overrides to a raw table.
pub fn apply_overrides<I>(table: &mut toml::Table, vars: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    for (name, raw) in vars {
        let Some(key) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let key = key.to_ascii_lowercase();
        let section = SECTIONS
            .iter()
            .find(|s| key.strip_prefix(*s).is_some_and(|rest| rest.starts_with('_')));
        let value = parse_value(&raw);
        match section {
            Some(s) => {
                let field = key[s.len() + 1..].to_string();
                let entry = table
                    .entry(s.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                match entry {
                    toml::Value::Table(t) => {
                        t.insert(field, value);
                    }
                    _ => return Err(CliError::Usage(format!("`{s}` must be a table"))),
                }
            }
            None => {
                table.insert(key, value);
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Reads the TOML file (if any), applies environment overrides, checks
    /// the result and resolves relative paths against the file's directory.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<RunConfig, CliError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let (mut table, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                let table: toml::Table = text
                    .parse()
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
                (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        apply_overrides(&mut table, env)?;
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.train.corpora.iter_mut().for_each(fix);
        for p in [
            &mut self.train.checkpoint,
            &mut self.corpus.path,
            &mut self.sample.checkpoint,
            &mut self.sample.output,
            &mut self.eval.samples,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        self.task_list()?;
        self.model_config(1)?;
        self.sample_mode()?;
        if self.workers == Some(0) {
            return usage("workers must be at least 1".into());
        }
        if self.train.batch_size == 0 {
            return usage("train.batch_size must be at least 1".into());
        }
        if !(self.train.lr > 0.0) || self.train.min_lr < 0.0 {
            return usage("train.lr must be positive and train.min_lr non-negative".into());
        }
        if self.corpus.path.is_none() && self.corpus.molecules == 0 {
            return usage("corpus.molecules must be at least 1".into());
        }
        if self.corpus.min_atoms < 2 || self.corpus.min_atoms > self.corpus.max_atoms {
            return usage("corpus atom range must satisfy 2 <= min_atoms <= max_atoms".into());
        }
        for (name, p) in [
            ("corpus.branch_prob", self.corpus.branch_prob),
            ("corpus.ring_prob", self.corpus.ring_prob),
            ("corpus.carbonyl_prob", self.corpus.carbonyl_prob),
            ("corpus.pocket_fraction", self.corpus.pocket_fraction),
            ("data.p_mask", self.data.p_mask),
            ("data.blur_ratio", self.data.blur_ratio),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return usage(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.data.blur_sigma < 0.0 || self.data.shape_sigma < 0.0 {
            return usage("blur sigmas must be non-negative".into());
        }
        if !(self.eval.coverage_delta > 0.0) || self.eval.top_k == 0 {
            return usage("eval.coverage_delta must be positive and eval.top_k at least 1".into());
        }
        Ok(())
    }

    pub fn task_list(&self) -> Result<Vec<Task>, CliError> {
        if self.tasks.is_empty() {
            return Err(CliError::Usage("tasks must not be empty".into()));
        }
        let mut out: Vec<Task> = Vec::new();
        for t in &self.tasks {
            let task: Task = t.parse().map_err(CliError::Usage)?;
            if out.contains(&task) {
                return Err(CliError::Usage(format!("task `{t}` listed twice")));
            }
            out.push(task);
        }
        Ok(out)
    }

    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig, CliError> {
        let m = &self.model;
        let mut cfg = match m.preset.as_str() {
            "toy" => ModelConfig::toy(vocab_size),
            "full" => ModelConfig::full(vocab_size),
            other => return Err(CliError::Usage(format!("unknown model preset `{other}`"))),
        };
        if let Some(l) = m.layers {
            cfg.encoder.layers = l;
            cfg.decoder.layers = l;
        }
        if let Some(h) = m.hidden {
            cfg.encoder.hidden = h;
            cfg.decoder.hidden = h;
        }
        if let Some(h) = m.heads {
            cfg.encoder.heads = h;
            cfg.decoder.heads = h;
        }
        if let Some(f) = m.ff {
            cfg.encoder.ff = f;
            cfg.decoder.ff = f;
        }
        if let Some(s) = m.embed_std {
            cfg.embed_std = s;
        }
        if let Some(t) = m.max_output_tokens {
            cfg.decoder.max_output_tokens = t;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lr: t.lr,
            min_lr: t.min_lr,
            warmup_steps: t.warmup_steps,
            total_steps: t.steps,
            weight_decay: t.weight_decay,
            clip_norm: t.clip_norm,
            ..TrainConfig::default()
        }
    }

    pub fn toy_spec(&self) -> ToySpec {
        let c = &self.corpus;
        ToySpec {
            seed: self.seed,
            min_atoms: c.min_atoms,
            max_atoms: c.max_atoms,
            branch_prob: c.branch_prob,
            ring_prob: c.ring_prob,
            carbonyl_prob: c.carbonyl_prob,
            ..ToySpec::default()
        }
    }

    pub fn task_config(&self) -> TaskConfig {
        let d = &self.data;
        TaskConfig {
            p_mask: d.p_mask,
            blur_ratio: d.blur_ratio,
            blur: BlurParams {
                sigma: d.blur_sigma,
                replicas: d.blur_replicas,
            },
            shape_blur: BlurParams {
                sigma: d.shape_sigma,
                replicas: d.shape_replicas,
            },
            rotate: d.rotate,
        }
    }

    pub fn sample_mode(&self) -> Result<SampleMode, CliError> {
        let s = &self.sample;
        match s.mode.as_str() {
            "greedy" => Ok(SampleMode::Greedy),
            "temperature" => Ok(SampleMode::Temperature {
                temperature: s.temperature,
            }),
            "top_k" => Ok(SampleMode::TopK {
                k: s.k,
                temperature: s.temperature,
            }),
            other => Err(CliError::Usage(format!("unknown sample mode `{other}`"))),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(usize::from).unwrap_or(1))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.train
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.ckpt"))
    }

    pub fn samples_path(&self) -> PathBuf {
        self.sample
            .output
            .clone()
            .unwrap_or_else(|| self.output_dir.join("samples.tsv"))
    }
}
