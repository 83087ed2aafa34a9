use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use molpc_core::chem::{canonical_smiles, parse_smiles, Molecule3D};
use molpc_core::codec::{parse_mol3d, parse_records, serialize, TokenId, Vocabulary, UNK};
use molpc_core::datagen::write_corpus;
use molpc_core::metrics::{
    cov_amr, sample_stats, structure_js_suite, ConformerSet, MetricReport, SuiteConfig,
};
use molpc_core::pretrain::{
    read_corpus_tsv, sample_batch_indices, write_corpus_tsv, Task, TaskExample, CONFORMATION_PROMPT_PREFIX,
};
use molpc_model::checkpoint::{load_model, save_model};
use molpc_model::{encode_example, sample_text, EncodedExample, Model, Trainer};

use crate::config::RunConfig;
use crate::data::{item_rng, load_molecules, par_map, task_pool, STREAM_BATCH, STREAM_SAMPLE};
use crate::error::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (checkpoint format 1)");

#[derive(Debug, Parser)]
#[command(name = "molpc", version = VERSION, about = "Point-cloud conditioned SMILES+XYZ generation")]
pub struct Cli {
    /// TOML run configuration. `MOLPC_*` environment variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect SMILES+XYZ text files.
    Codec {
        #[command(subcommand)]
        action: CodecAction,
    },
    /// Write the molecule corpus.
    Datagen,
    /// Write task corpora.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Train a model and write its checkpoint.
    Train {
        /// Overrides `train.steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Decode samples for the configured tasks.
    Sample,
    /// Score samples and write a metric report.
    Eval,
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CodecAction {
    /// Parse every line and check that it re-serializes unchanged.
    Check { file: PathBuf },
    /// Text lines to space-separated token ids.
    Encode { file: PathBuf },
    /// Token id lines back to text.
    Decode { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// Fragment-dropout examples.
    BuildPretrain,
    /// One corpus per configured task.
    BuildTask,
}

#[derive(Debug, Subcommand)]
pub enum BenchAction {
    /// Point count against SMILES+XYZ token count per molecule.
    SeqLen,
}

pub fn run<I>(cli: Cli, env: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    if let Command::Codec { action } = &cli.command {
        return codec(action, out);
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), env)?;
    match cli.command {
        Command::Codec { .. } => unreachable!("handled above"),
        Command::Datagen => datagen(&cfg, out),
        Command::Corpus { action } => corpus(&cfg, &action, out),
        Command::Train { steps } => {
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            train(&cfg, out).map(|_| ())
        }
        Command::Sample => sample(&cfg, out),
        Command::Eval => eval(&cfg, out).map(|_| ()),
        Command::Bench {
            action: BenchAction::SeqLen,
        } => bench_seq_len(&cfg, out).map(|_| ()),
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim_end().to_string()))
        .collect())
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn codec(action: &CodecAction, out: &mut dyn Write) -> Result<(), CliError> {
    let vocab = Vocabulary::standard();
    match action {
        CodecAction::Check { file } => {
            let lines = read_lines(file)?;
            let mut failed = 0;
            for (n, line) in &lines {
                match parse_mol3d(line).and_then(|m| Ok((serialize(&m)?, m.atom_count()))) {
                    Ok((text, atoms)) if &text == line => writeln!(out, "{n}\tok\t{atoms}")?,
                    Ok((text, _)) => {
                        failed += 1;
                        writeln!(out, "{n}\tdiffers\t{text}")?;
                    }
                    Err(e) => {
                        failed += 1;
                        writeln!(out, "{n}\terror\t{e}")?;
                    }
                }
            }
            if failed > 0 {
                return Err(CliError::Data(format!("{failed} of {} lines failed", lines.len())));
            }
        }
        CodecAction::Encode { file } => {
            for (n, line) in read_lines(file)? {
                let ids = vocab.encode(&line);
                if ids.contains(&UNK) {
                    return Err(CliError::Data(format!("line {n}: text outside the vocabulary")));
                }
                let ids: Vec<String> = ids.iter().map(u32::to_string).collect();
                writeln!(out, "{}", ids.join(" "))?;
            }
        }
        CodecAction::Decode { file } => {
            for (n, line) in read_lines(file)? {
                let ids = line
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<TokenId>()
                            .ok()
                            .filter(|&id| (id as usize) < vocab.len())
                            .ok_or_else(|| CliError::Data(format!("line {n}: bad token id `{t}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                writeln!(out, "{}", vocab.decode(&ids))?;
            }
        }
    }
    Ok(())
}

fn datagen(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mols = load_molecules(cfg)?;
    let path = cfg.output_dir.join("corpus.txt");
    write_file(&path, &write_corpus(&mols)?)?;
    writeln!(out, "molecules\t{}\npath\t{}", mols.len(), path.display())?;
    Ok(())
}

fn corpus(cfg: &RunConfig, action: &CorpusAction, out: &mut dyn Write) -> Result<(), CliError> {
    let mols = load_molecules(cfg)?;
    let tasks = match action {
        CorpusAction::BuildPretrain => vec![Task::Pretrain],
        CorpusAction::BuildTask => cfg.task_list()?,
    };
    let dir = cfg.output_dir.join("corpus");
    for task in tasks {
        let (pool, skipped) = task_pool(cfg, task, &mols)?;
        write_corpus_tsv(&pool, &dir, task.tag())?;
        writeln!(out, "{task}\t{}\tskipped\t{skipped}", pool.len())?;
    }
    Ok(())
}

/// Task pools in configured order, from `train.corpora` when given.
pub fn load_pools(cfg: &RunConfig) -> Result<Vec<(Task, Vec<TaskExample>)>, CliError> {
    let tasks = cfg.task_list()?;
    let mut pools: Vec<(Task, Vec<TaskExample>)> = Vec::new();
    if cfg.train.corpora.is_empty() {
        let mols = load_molecules(cfg)?;
        for task in tasks {
            pools.push((task, task_pool(cfg, task, &mols)?.0));
        }
    } else {
        let mut by_task: BTreeMap<Task, Vec<TaskExample>> = BTreeMap::new();
        for path in &cfg.train.corpora {
            for ex in read_corpus_tsv(path)? {
                by_task.entry(ex.task).or_default().push(ex);
            }
        }
        for task in tasks {
            pools.push((task, by_task.remove(&task).unwrap_or_default()));
        }
    }
    if let Some((task, _)) = pools.iter().find(|(_, p)| p.is_empty()) {
        return Err(CliError::Data(format!("no `{task}` examples")));
    }
    Ok(pools)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub report: MetricReport,
    pub losses: Vec<f64>,
}

pub fn train(cfg: &RunConfig, out: &mut dyn Write) -> Result<TrainSummary, CliError> {
    let vocab = Vocabulary::standard();
    let model_config = cfg.model_config(vocab.len())?;
    let max_tokens = model_config.decoder.max_output_tokens;
    let pools = load_pools(cfg)?;
    let encoded: Vec<Vec<EncodedExample>> = pools
        .iter()
        .map(|(_, pool)| {
            pool.iter()
                .map(|ex| encode_example(ex, &vocab, max_tokens))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let sizes: Vec<usize> = encoded.iter().map(Vec::len).collect();
    let model = Model::new(model_config, cfg.seed)?;
    let mut trainer = Trainer::new(model, cfg.train_config());

    let batch_for = |step: usize| -> Result<Vec<&EncodedExample>, CliError> {
        let mut rng = item_rng(cfg.seed, STREAM_BATCH, step as u64);
        Ok(sample_batch_indices(&sizes, cfg.train.batch_size, &mut rng)?
            .into_iter()
            .map(|(t, i)| &encoded[t][i])
            .collect())
    };

    let started = Instant::now();
    let mut log = String::from("step\tloss\tlr\tgrad_norm\n");
    let mut losses = Vec::with_capacity(cfg.train.steps);
    for step in 0..cfg.train.steps {
        let batch = batch_for(step)?;
        let stats = trainer.train_step(&batch)?;
        let _ = writeln!(log, "{}\t{}\t{}\t{}", stats.step, stats.loss, stats.lr, stats.grad_norm);
        losses.push(stats.loss);
        if cfg.train.log_every > 0 && (step % cfg.train.log_every == 0 || step + 1 == cfg.train.steps) {
            writeln!(out, "step\t{step}\tloss\t{:.4}", stats.loss)?;
            eprintln!("train: step {step} loss {:.4} ({:.1}s)", stats.loss, started.elapsed().as_secs_f64());
        }
    }
    let initial = match losses.first() {
        Some(&l) => l,
        None => molpc_model::batch_loss(&trainer.model, &batch_for(0)?)?,
    };
    let tail = losses.len().min(50);
    let final_loss = if tail == 0 {
        initial
    } else {
        losses[losses.len() - tail..].iter().sum::<f64>() / tail as f64
    };

    let mut report = MetricReport::default();
    report.insert("initial_loss".into(), initial);
    report.insert("final_loss".into(), final_loss);
    report.insert("loss_drop".into(), 1.0 - final_loss / initial);
    report.insert("ln_vocab".into(), (vocab.len() as f64).ln());
    report.insert("steps".into(), cfg.train.steps as f64);
    for ((task, _), n) in pools.iter().zip(&sizes) {
        report.insert(format!("examples.{task}"), *n as f64);
    }
    report.note("final_loss", format!("mean step loss over the last {tail} steps"));
    report.note("seed", cfg.seed.to_string());
    report.check_finite()?;

    let ckpt = cfg.checkpoint_path();
    if let Some(dir) = ckpt.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_model(&trainer.model, &ckpt)?;
    write_file(&cfg.output_dir.join("train_log.tsv"), &log)?;
    write_file(&cfg.output_dir.join("train_report.tsv"), &report.to_text())?;
    writeln!(out, "checkpoint\t{}", ckpt.display())?;
    Ok(TrainSummary { report, losses })
}

/// Whether a sample parses; conformation samples borrow the prompt's SMILES.
pub fn sample_molecule(ex_task: Task, prompt: &str, sample: &str) -> Option<Molecule3D> {
    match ex_task {
        Task::Conformation => {
            let smiles = prompt.strip_prefix(CONFORMATION_PROMPT_PREFIX)?;
            parse_records(parse_smiles(smiles).ok()?, sample).ok()
        }
        _ => parse_mol3d(sample).ok(),
    }
}

fn sample(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let vocab = Vocabulary::standard();
    let ckpt = cfg.sample.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let mut model = load_model(&ckpt)?;
    if let Some(t) = cfg.sample.max_tokens {
        model.config.decoder.max_output_tokens = t;
    }
    let mode = cfg.sample_mode()?;
    let pools = load_pools(cfg)?;
    let jobs: Vec<&TaskExample> = pools
        .iter()
        .flat_map(|(_, pool)| pool.iter().take(cfg.sample.count))
        .collect();
    let results = par_map(jobs.len(), cfg.workers(), |i| {
        let ex = jobs[i];
        let mut rng = item_rng(cfg.seed, STREAM_SAMPLE, i as u64);
        sample_text(&model, &vocab, &ex.input_text, ex.pc.as_ref(), mode, &mut rng)
    });
    let mut body = String::new();
    let mut counts: BTreeMap<Task, (usize, usize)> = BTreeMap::new();
    for (ex, r) in jobs.iter().zip(results) {
        let s = r?;
        let valid = sample_molecule(ex.task, &ex.input_text, &s.text).is_some();
        let stop = if s.output.hit_max_len { "max_len" } else { "eos" };
        let _ = writeln!(
            body,
            "{}\t{}\t{}\t{stop},{}",
            ex.task,
            ex.input_text,
            s.text,
            if valid { "valid" } else { "invalid" }
        );
        let c = counts.entry(ex.task).or_default();
        c.0 += 1;
        c.1 += valid as usize;
    }
    let path = cfg.samples_path();
    write_file(&path, &body)?;
    for (task, (n, valid)) in counts {
        writeln!(out, "{task}\tsamples\t{n}\tvalid\t{valid}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleLine {
    pub task: Task,
    pub prompt: String,
    pub sample: String,
    pub flags: Vec<String>,
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleLine>, CliError> {
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(CliError::Data(format!("{} line {n}: expected 4 fields", path.display())));
            }
            Ok(SampleLine {
                task: f[0].parse().map_err(|e| CliError::Data(format!("line {n}: {e}")))?,
                prompt: f[1].to_string(),
                sample: f[2].to_string(),
                flags: f[3].split(',').map(str::to_string).collect(),
            })
        })
        .collect()
}

pub fn eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<MetricReport, CliError> {
    let samples_path = cfg.eval.samples.clone().unwrap_or_else(|| cfg.samples_path());
    let samples = read_samples(&samples_path)?;
    if samples.is_empty() {
        return Err(CliError::Data(format!("{} holds no samples", samples_path.display())));
    }
    let reference = load_molecules(cfg)?;
    let train_set: BTreeSet<String> = reference
        .iter()
        .map(|m| canonical_smiles(m.graph()))
        .collect();

    let mut report = MetricReport::default();
    let mut by_task: BTreeMap<Task, Vec<&SampleLine>> = BTreeMap::new();
    for s in &samples {
        by_task.entry(s.task).or_default().push(s);
    }
    let mut generated = Vec::new();
    for (task, lines) in &by_task {
        let texts: Vec<String> = lines
            .iter()
            .map(|l| match (task, l.prompt.strip_prefix(CONFORMATION_PROMPT_PREFIX)) {
                (Task::Conformation, Some(smiles)) => format!("{smiles}|{}", l.sample),
                _ => l.sample.clone(),
            })
            .collect();
        let st = sample_stats(&texts, &train_set, None);
        report.insert(format!("{task}.samples"), st.total as f64);
        report.insert(format!("{task}.validity"), st.validity);
        report.insert(format!("{task}.uniqueness"), st.uniqueness);
        report.insert(format!("{task}.novelty"), st.novelty);
        report.insert(format!("{task}.diversity"), st.diversity);
        let whole = matches!(task, Task::Distribution | Task::Conformation | Task::Shape | Task::Pocket);
        if whole {
            generated.extend(texts.iter().filter_map(|t| parse_mol3d(t).ok()));
        }
    }

    if let Some(lines) = by_task.get(&Task::Conformation) {
        let (pool, _) = task_pool(cfg, Task::Conformation, &reference)?;
        let truth: BTreeMap<&str, &str> = pool.iter().map(|e| (e.input_text.as_str(), e.target.as_str())).collect();
        let mut groups: BTreeMap<&str, Vec<Molecule3D>> = BTreeMap::new();
        for l in lines {
            if let Some(m) = sample_molecule(Task::Conformation, &l.prompt, &l.sample) {
                groups.entry(l.prompt.as_str()).or_default().push(m);
            }
        }
        let mut sums = [0.0; 4];
        let mut scored = 0;
        for (prompt, gens) in &groups {
            let Some(target) = truth.get(prompt) else { continue };
            let Some(t) = sample_molecule(Task::Conformation, prompt, target) else { continue };
            let gen_set = ConformerSet {
                graph: t.graph().clone(),
                conformers: gens.iter().map(|m| m.coords().to_vec()).collect(),
            };
            let truth_set = ConformerSet {
                graph: t.graph().clone(),
                conformers: vec![t.coords().to_vec()],
            };
            let c = cov_amr(&truth_set, &gen_set, cfg.eval.coverage_delta)?;
            for (s, v) in sums.iter_mut().zip([c.cov_r, c.amr_r, c.cov_p, c.amr_p]) {
                *s += v;
            }
            scored += 1;
        }
        if scored > 0 {
            for (name, s) in ["cov_r", "amr_r", "cov_p", "amr_p"].iter().zip(sums) {
                report.insert(format!("conformation.{name}"), s / scored as f64);
            }
        }
        report.insert("conformation.scored_prompts".into(), scored as f64);
    }

    if generated.is_empty() {
        report.note("js", "no valid whole-molecule samples".into());
    } else {
        let suite = SuiteConfig {
            top_k: cfg.eval.top_k,
            ..SuiteConfig::default()
        };
        report.merge("js.", structure_js_suite(&generated, &reference, &suite)?);
    }
    report.note("coverage_delta", cfg.eval.coverage_delta.to_string());
    report.note("seed", cfg.seed.to_string());
    report.check_finite()?;
    write_file(&cfg.output_dir.join("report.tsv"), &report.to_text())?;
    write_file(&cfg.output_dir.join("report.json"), &report.to_json())?;
    write!(out, "{}", report.to_text())?;
    Ok(report)
}

pub fn bench_seq_len(cfg: &RunConfig, out: &mut dyn Write) -> Result<MetricReport, CliError> {
    let vocab = Vocabulary::standard();
    let mols = load_molecules(cfg)?;
    let rows = par_map(mols.len(), cfg.workers(), |i| {
        serialize(&mols[i]).map(|text| (mols[i].atom_count(), vocab.encode(&text).len()))
    });
    let mut table = String::from("index\tpoints\ttokens\tratio\n");
    let (mut points, mut tokens, mut ratio_sum) = (0usize, 0usize, 0.0);
    for (i, r) in rows.into_iter().enumerate() {
        let (p, t) = r?;
        let ratio = t as f64 / p as f64;
        let _ = writeln!(table, "{i}\t{p}\t{t}\t{ratio}");
        points += p;
        tokens += t;
        ratio_sum += ratio;
    }
    let n = mols.len() as f64;
    let mut report = MetricReport::default();
    report.insert("molecules".into(), n);
    report.insert("mean_points".into(), points as f64 / n);
    report.insert("mean_tokens".into(), tokens as f64 / n);
    report.insert("mean_ratio".into(), ratio_sum / n);
    report.insert("tokens_per_atom".into(), tokens as f64 / points as f64);
    report.note("ratio", "SMILES+XYZ tokens per point, averaged over molecules".into());
    report.note("seed", cfg.seed.to_string());
    write_file(&cfg.output_dir.join("seq_len.tsv"), &table)?;
    write_file(&cfg.output_dir.join("seq_len_report.tsv"), &report.to_text())?;
    write!(out, "{}", report.to_text())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use molpc_model::checkpoint::MODEL_CHECKPOINT_VERSION;

    #[test]
    fn version_names_checkpoint_format() {
        assert!(VERSION.ends_with(&format!("(checkpoint format {MODEL_CHECKPOINT_VERSION})")));
        assert!(VERSION.starts_with(env!("CARGO_PKG_VERSION")));
    }
}
