use molpc_core::chem::Molecule3D;
use molpc_core::datagen::{generate_molecule, generate_pocket, read_corpus};
use molpc_core::pretrain::{make_task_example, PretrainError, SourceRecord, Task, TaskExample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;

/// Stream tags keeping the random draws of different stages apart.
pub const STREAM_POCKET: u64 = 1;
pub const STREAM_TASK: u64 = 2;
pub const STREAM_BATCH: u64 = 3;
pub const STREAM_SAMPLE: u64 = 4;

/// Generator for item `index` of a stage, independent of every other item.
pub fn item_rng(seed: u64, stage: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stage << 48) | index);
    rng
}

/// `f(0..n)` over contiguous chunks on up to `workers` threads, in index order.
pub fn par_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                s.spawn(move || (w * chunk..((w + 1) * chunk).min(n)).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

pub fn load_molecules(cfg: &RunConfig) -> Result<Vec<Molecule3D>, CliError> {
    match &cfg.corpus.path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let mols = read_corpus(&text)
                .map_err(|(line, e)| CliError::Data(format!("{} line {line}: {e}", path.display())))?;
            if mols.is_empty() {
                return Err(CliError::Data(format!("{} holds no molecules", path.display())));
            }
            Ok(mols)
        }
        None => {
            let spec = cfg.toy_spec();
            Ok(par_map(cfg.corpus.molecules, cfg.workers(), |i| generate_molecule(&spec, i as u64)))
        }
    }
}

fn source(cfg: &RunConfig, mol: &Molecule3D, index: usize, force_pocket: bool) -> SourceRecord {
    let mut rng = item_rng(cfg.seed, STREAM_POCKET, index as u64);
    let with_pocket = force_pocket || rng.gen_bool(cfg.corpus.pocket_fraction);
    SourceRecord {
        mol: mol.clone(),
        pocket: with_pocket.then(|| generate_pocket(mol, cfg.corpus.pocket_residues, &mut rng)),
    }
}

/// Examples of one task, one attempt per molecule. Molecules the task cannot
/// use (too few fragments, no linker, ...) are counted and skipped.
pub fn task_pool(cfg: &RunConfig, task: Task, mols: &[Molecule3D]) -> Result<(Vec<TaskExample>, usize), CliError> {
    let task_config = cfg.task_config();
    let task_index = Task::ALL.iter().position(|&t| t == task).expect("known task") as u64;
    let results = par_map(mols.len(), cfg.workers(), |i| {
        let record = source(cfg, &mols[i], i, task == Task::Pocket);
        let mut rng = item_rng(cfg.seed, STREAM_TASK, (task_index << 32) | i as u64);
        make_task_example(task, &record, &task_config, &mut rng)
    });
    let mut pool = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(ex) => pool.push(ex),
            Err(PretrainError::Unmaskable | PretrainError::TaskFormat { .. }) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok((pool, skipped))
}
