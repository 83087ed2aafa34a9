//! Fragment-dropout pretraining examples, task-formatted examples and
//! balanced multi-task batching.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::chem::{
    fragment_molecule, write_smiles_with_order, Atom, Bond, FragmentSplit, MolGraph, Molecule3D, Vec3,
};
use crate::codec::{serialize, serialize_records, CodecError};
use crate::datagen::ToyPocket;
use crate::pointcloud::{
    blur_points, from_molecule, read_mpc, write_mpc, PointCloud, PointCloudError, Role, Rotation,
};

pub const PRETRAIN_PROMPT: &str = "Generate missing fragments";
pub const DISTRIBUTION_PROMPT: &str = "Generate molecular 3d structure from GEOM";
pub const CONFORMATION_PROMPT_PREFIX: &str = "Generate molecular 3d structure for ";
pub const SHAPE_PROMPT: &str = "Generate molecular 3d structure for shape";
pub const LINKER_PROMPT: &str = "Generate linker";
pub const SCAFFOLD_PROMPT: &str = "Generate decoration";
pub const POCKET_PROMPT: &str = "Generate molecular 3d structure for pocket";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PretrainError {
    #[error("molecule has a single fragment and no pocket")]
    Unmaskable,
    #[error("task {task}: {reason}")]
    TaskFormat { task: Task, reason: String },
    #[error("task pool {0} is empty")]
    EmptyTaskPool(usize),
    #[error("no task pools")]
    NoTasks,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    PointCloud(#[from] PointCloudError),
    #[error("corpus line {line}: {reason}")]
    Corpus { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Pretrain,
    Distribution,
    Conformation,
    Shape,
    Linker,
    Scaffold,
    Pocket,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Pretrain,
        Task::Distribution,
        Task::Conformation,
        Task::Shape,
        Task::Linker,
        Task::Scaffold,
        Task::Pocket,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Task::Pretrain => "pretrain",
            Task::Distribution => "distribution",
            Task::Conformation => "conformation",
            Task::Shape => "shape",
            Task::Linker => "linker",
            Task::Scaffold => "scaffold",
            Task::Pocket => "pocket",
        }
    }

    /// Whether the target starts with a SMILES section. Conformation targets
    /// hold only coordinate records.
    pub fn target_has_smiles(self) -> bool {
        self != Task::Conformation
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskStrategy {
    Omit,
    Blur,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurParams {
    pub sigma: f64,
    pub replicas: usize,
}

impl Default for BlurParams {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            replicas: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub p_mask: f64,
    /// Fraction of pretraining examples that blur rather than omit.
    pub blur_ratio: f64,
    pub blur: BlurParams,
    pub shape_blur: BlurParams,
    /// Randomly rotate examples that carry a point cloud.
    pub rotate: bool,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            p_mask: 0.3,
            blur_ratio: 0.5,
            blur: BlurParams::default(),
            shape_blur: BlurParams::default(),
            rotate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskExample {
    pub task: Task,
    pub input_text: String,
    pub pc: Option<PointCloud>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutExample {
    pub input_pc: PointCloud,
    pub instruction: String,
    pub target: String,
    pub split: FragmentSplit,
    /// Ids of masked fragments, ascending.
    pub masked: Vec<usize>,
    pub strategy: MaskStrategy,
    /// Number of leading points in `input_pc` that come from the pocket.
    pub pocket_points: usize,
}

impl DropoutExample {
    pub fn into_task_example(self) -> TaskExample {
        TaskExample {
            task: Task::Pretrain,
            input_text: self.instruction,
            pc: Some(self.input_pc),
            target: self.target,
        }
    }
}

/// Atom groups serialized as one disconnected molecule, groups in the given
/// order. Every bond leaving a group becomes a `*` placed at the position of
/// the atom across that bond.
pub fn groups_with_attachments(mol: &Molecule3D, groups: &[Vec<usize>]) -> Molecule3D {
    let g = mol.graph();
    let x = mol.coords();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut coords: Vec<Vec3> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut local = vec![usize::MAX; g.atom_count()];
    for group in groups {
        let mut members = group.clone();
        members.sort_unstable();
        for &a in &members {
            local[a] = atoms.len();
            atoms.push(g.atoms()[a]);
            coords.push(x[a]);
        }
        for &a in &members {
            for &(nb, bi) in g.neighbors(a) {
                let order = g.bonds()[bi].order;
                if members.binary_search(&nb).is_ok() {
                    if a < nb {
                        bonds.push(Bond::new(local[a], local[nb], order));
                    }
                } else {
                    atoms.push(Atom::wildcard());
                    coords.push(x[nb]);
                    bonds.push(Bond::new(local[a], atoms.len() - 1, order));
                }
            }
        }
        for &a in &members {
            local[a] = usize::MAX;
        }
    }
    let graph = MolGraph::build(atoms, bonds).expect("subgraph of a valid graph");
    Molecule3D::new(graph, coords).expect("finite coordinates")
}

fn choose_masked<R: Rng + ?Sized>(count: usize, p_mask: f64, allow_all: bool, rng: &mut R) -> Vec<usize> {
    let max = if allow_all { count } else { count - 1 };
    if p_mask >= 1.0 {
        if allow_all {
            return (0..count).collect();
        }
        let keep = rng.gen_range(0..count);
        return (0..count).filter(|&i| i != keep).collect();
    }
    if p_mask > 0.0 {
        for _ in 0..10_000 {
            let pick: Vec<usize> = (0..count).filter(|_| rng.gen_bool(p_mask)).collect();
            if !pick.is_empty() && pick.len() <= max {
                return pick;
            }
        }
    }
    vec![rng.gen_range(0..count)]
}

fn frame<R: Rng + ?Sized>(
    mol: &Molecule3D,
    pocket: Option<&ToyPocket>,
    rotate: bool,
    rng: &mut R,
) -> (Molecule3D, Option<ToyPocket>) {
    let anchor: &[Vec3] = match pocket {
        Some(p) => p.atoms.coords(),
        None => mol.coords(),
    };
    let n = anchor.len() as f64;
    let mut mean = [0.0; 3];
    for c in anchor {
        for k in 0..3 {
            mean[k] += c[k] / n;
        }
    }
    let rot = if rotate { Rotation::random(rng) } else { Rotation::identity() };
    let move_all = |coords: &[Vec3]| -> Vec<Vec3> {
        coords
            .iter()
            .map(|c| rot.apply([c[0] - mean[0], c[1] - mean[1], c[2] - mean[2]]))
            .collect()
    };
    let mol = mol.with_coords(move_all(mol.coords())).expect("finite");
    let pocket = pocket.map(|p| ToyPocket {
        atoms: p.atoms.with_coords(move_all(p.atoms.coords())).expect("finite"),
        annotations: p.annotations.clone(),
    });
    (mol, pocket)
}

fn pocket_cloud(pocket: &ToyPocket) -> PointCloud {
    from_molecule(&pocket.atoms, Role::Pocket(&pocket.annotations)).expect("annotations match atoms")
}

/// Masks whole fragments of a ligand and asks for them back. Each fragment
/// is masked independently with probability `p_mask`, redrawn until at least
/// one is chosen and, without a pocket, at least one is left. Pocket points
/// come first in the input cloud and are never altered.
pub fn build_dropout_example<R: Rng + ?Sized>(
    mol: &Molecule3D,
    pocket: Option<&PointCloud>,
    p_mask: f64,
    strategy: MaskStrategy,
    blur: BlurParams,
    rng: &mut R,
) -> Result<DropoutExample, PretrainError> {
    let split = fragment_molecule(mol.graph());
    let count = split.fragments.len();
    if count == 1 && pocket.is_none() {
        return Err(PretrainError::Unmaskable);
    }
    let masked = choose_masked(count, p_mask, pocket.is_some(), rng);
    let groups: Vec<Vec<usize>> = masked.iter().map(|&f| split.fragments[f].clone()).collect();
    let target_mol = groups_with_attachments(mol, &groups);
    let target = serialize(&target_mol)?;

    let labels = split.labels(mol.atom_count());
    let ligand = from_molecule(mol, Role::Ligand)?;
    let mut input = pocket.cloned().unwrap_or_default();
    let pocket_points = input.len();
    let mut hidden = PointCloud::default();
    for (i, p) in ligand.points.into_iter().enumerate() {
        if masked.contains(&labels[i]) {
            hidden.points.push(p);
        } else {
            input.points.push(p);
        }
    }
    if strategy == MaskStrategy::Blur {
        input.extend(blur_points(&hidden, blur.sigma, blur.replicas, false, rng));
    }
    Ok(DropoutExample {
        input_pc: input,
        instruction: PRETRAIN_PROMPT.to_string(),
        target,
        split,
        masked,
        strategy,
        pocket_points,
    })
}

/// A molecule, optionally with its pocket, from which task examples are cut.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRecord {
    pub mol: Molecule3D,
    pub pocket: Option<ToyPocket>,
}

impl SourceRecord {
    pub fn ligand(mol: Molecule3D) -> Self {
        Self { mol, pocket: None }
    }
}

fn task_error(task: Task, reason: &str) -> PretrainError {
    PretrainError::TaskFormat {
        task,
        reason: reason.to_string(),
    }
}

/// Fragment adjacent to at least two others: the linker between them.
pub fn find_linker(split: &FragmentSplit) -> Option<usize> {
    (0..split.fragments.len()).find(|&f| {
        let mut nbrs: Vec<usize> = split.attachment_points[f].iter().map(|p| p.1).collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        nbrs.len() >= 2
    })
}

/// Largest fragment (lowest id on ties) and the connected groups of atoms
/// left after removing it.
pub fn scaffold_and_rgroups(mol: &Molecule3D, split: &FragmentSplit) -> Option<(usize, Vec<Vec<usize>>)> {
    if split.fragments.len() < 2 {
        return None;
    }
    let scaffold = (0..split.fragments.len())
        .max_by_key(|&f| (split.fragments[f].len(), std::cmp::Reverse(f)))
        .expect("non-empty");
    let rest: Vec<usize> = (0..mol.atom_count())
        .filter(|a| split.fragments[scaffold].binary_search(a).is_err())
        .collect();
    let sub = mol.graph().induced(&rest);
    let mut groups: Vec<Vec<usize>> = sub
        .components()
        .into_iter()
        .map(|c| {
            let mut g: Vec<usize> = c.into_iter().map(|i| rest[i]).collect();
            g.sort_unstable();
            g
        })
        .collect();
    groups.sort_by_key(|g| g[0]);
    Some((scaffold, groups))
}

fn cloud_of(mol: &Molecule3D, atoms: &[usize]) -> PointCloud {
    let full = from_molecule(mol, Role::Ligand).expect("ligand role");
    PointCloud::new(atoms.iter().map(|&a| full.points[a].clone()).collect())
}

/// Formats one source record as an example of `task`.
pub fn make_task_example<R: Rng + ?Sized>(
    task: Task,
    record: &SourceRecord,
    config: &TaskConfig,
    rng: &mut R,
) -> Result<TaskExample, PretrainError> {
    let with_cloud = !matches!(task, Task::Distribution | Task::Conformation);
    let (mol, pocket) = frame(&record.mol, record.pocket.as_ref(), config.rotate && with_cloud, rng);
    let example = |input_text: &str, pc: Option<PointCloud>, target: String| TaskExample {
        task,
        input_text: input_text.to_string(),
        pc,
        target,
    };
    match task {
        Task::Distribution => Ok(example(DISTRIBUTION_PROMPT, None, serialize(&mol)?)),
        Task::Conformation => {
            let (smiles, order) = write_smiles_with_order(mol.graph(), None).map_err(CodecError::from)?;
            let prompt = format!("{CONFORMATION_PROMPT_PREFIX}{smiles}");
            Ok(example(&prompt, None, serialize_records(&mol, &order)?))
        }
        Task::Shape => {
            let ligand = from_molecule(&mol, Role::Ligand)?;
            let b = config.shape_blur;
            let pc = blur_points(&ligand, b.sigma, b.replicas, true, rng);
            Ok(example(SHAPE_PROMPT, Some(pc), serialize(&mol)?))
        }
        Task::Pocket => {
            let pocket = pocket.ok_or_else(|| task_error(task, "record has no pocket"))?;
            Ok(example(POCKET_PROMPT, Some(pocket_cloud(&pocket)), serialize(&mol)?))
        }
        Task::Linker => {
            let split = fragment_molecule(mol.graph());
            let linker = find_linker(&split).ok_or_else(|| task_error(task, "no fragment joins two others"))?;
            let others: Vec<usize> = (0..mol.atom_count())
                .filter(|a| split.fragments[linker].binary_search(a).is_err())
                .collect();
            let target = serialize(&groups_with_attachments(&mol, &[split.fragments[linker].clone()]))?;
            Ok(example(LINKER_PROMPT, Some(cloud_of(&mol, &others)), target))
        }
        Task::Scaffold => {
            let split = fragment_molecule(mol.graph());
            let (scaffold, groups) =
                scaffold_and_rgroups(&mol, &split).ok_or_else(|| task_error(task, "molecule has one fragment"))?;
            let mut pc = pocket.as_ref().map(pocket_cloud).unwrap_or_default();
            pc.extend(cloud_of(&mol, &split.fragments[scaffold]));
            let target = serialize(&groups_with_attachments(&mol, &groups))?;
            Ok(example(SCAFFOLD_PROMPT, Some(pc), target))
        }
        Task::Pretrain => {
            let strategy = if rng.gen_bool(config.blur_ratio.clamp(0.0, 1.0)) {
                MaskStrategy::Blur
            } else {
                MaskStrategy::Omit
            };
            let pocket_pc = pocket.as_ref().map(pocket_cloud);
            let ex = build_dropout_example(&mol, pocket_pc.as_ref(), config.p_mask, strategy, config.blur, rng)?;
            Ok(ex.into_task_example())
        }
    }
}

/// Draws a task uniformly, then an example uniformly from that task's pool,
/// once per batch slot. Returns `(task index, example index)` pairs.
pub fn sample_batch_indices<R: Rng + ?Sized>(
    pool_sizes: &[usize],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, PretrainError> {
    if pool_sizes.is_empty() {
        return Err(PretrainError::NoTasks);
    }
    if let Some(empty) = pool_sizes.iter().position(|&s| s == 0) {
        return Err(PretrainError::EmptyTaskPool(empty));
    }
    Ok((0..batch_size)
        .map(|_| {
            let t = rng.gen_range(0..pool_sizes.len());
            (t, rng.gen_range(0..pool_sizes[t]))
        })
        .collect())
}

pub fn sample_batch<'a, R: Rng + ?Sized>(
    pools: &'a [Vec<TaskExample>],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<&'a TaskExample>, PretrainError> {
    let sizes: Vec<usize> = pools.iter().map(Vec::len).collect();
    Ok(sample_batch_indices(&sizes, batch_size, rng)?
        .into_iter()
        .map(|(t, i)| &pools[t][i])
        .collect())
}

/// Writes `task<TAB>input<TAB>mpc-path-or-dash<TAB>target` lines to
/// `dir/name.tsv`, with point clouds as `.mpc` files beside it.
pub fn write_corpus_tsv(examples: &[TaskExample], dir: &Path, name: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        let pc_field = match &ex.pc {
            Some(pc) => {
                let file = format!("{name}_{i:06}.mpc");
                std::fs::write(dir.join(&file), write_mpc(pc))?;
                file
            }
            None => "-".to_string(),
        };
        out.push_str(&format!("{}\t{}\t{}\t{}\n", ex.task, ex.input_text, pc_field, ex.target));
    }
    std::fs::write(dir.join(format!("{name}.tsv")), out)
}

pub fn read_corpus_tsv(path: &Path) -> Result<Vec<TaskExample>, PretrainError> {
    let io = |line: usize, e: std::io::Error| PretrainError::Corpus {
        line,
        reason: e.to_string(),
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(0, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| PretrainError::Corpus { line: i + 1, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let task: Task = fields[0].parse().map_err(bad)?;
        let pc = match fields[2] {
            "-" => None,
            file => {
                let body = std::fs::read_to_string(dir.join(file)).map_err(|e| io(i + 1, e))?;
                Some(read_mpc(&body)?)
            }
        };
        out.push(TaskExample {
            task,
            input_text: fields[1].to_string(),
            pc,
            target: fields[3].to_string(),
        });
    }
    Ok(out)
}

