use molpc_core::chem::{canonical_smiles, parse_smiles, Molecule3D};
use molpc_core::codec::{parse_mol3d, parse_records};
use molpc_core::datagen::{generate_molecule, generate_pocket, ToySpec};
use molpc_core::metrics::kabsch_rmsd;
use molpc_core::pointcloud::{from_molecule, Role, LIGAND, POCKET, SHAPE};
use molpc_core::pretrain::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::oracle::check_dropout;

fn chain() -> Molecule3D {
    let coords = vec![[0.0, 0.0, 0.0], [1.5, 0.0, 0.0], [2.0, 1.4, 0.0], [3.5, 1.4, 0.0]];
    Molecule3D::new(parse_smiles("CCCC").unwrap(), coords).unwrap()
}

#[test]
fn four_chain_dropout() {
    let mol = chain();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut seen = [false; 2];
    for _ in 0..50 {
        let ex = build_dropout_example(&mol, None, 0.0, MaskStrategy::Omit, BlurParams::default(), &mut rng).unwrap();
        assert_eq!(ex.masked.len(), 1);
        assert_eq!(ex.instruction, PRETRAIN_PROMPT);
        match ex.masked[0] {
            0 => {
                assert_eq!(ex.target, "CC*|C 0.00 0.00 0.00|C 1.50 0.00 0.00|* 2.00 1.40 0.00");
                assert_eq!(ex.input_pc.coords(), vec![[2.0, 1.4, 0.0], [3.5, 1.4, 0.0]]);
            }
            _ => {
                assert_eq!(ex.target, "C(C)*|C 2.00 1.40 0.00|C 3.50 1.40 0.00|* 1.50 0.00 0.00");
                assert_eq!(ex.input_pc.coords(), vec![[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]]);
            }
        }
        seen[ex.masked[0]] = true;
        check_dropout(&mol, None, &ex).unwrap();
    }
    assert_eq!(seen, [true, true]);
    let single = Molecule3D::new(parse_smiles("CC").unwrap(), vec![[0.0; 3], [1.5, 0.0, 0.0]]).unwrap();
    assert_eq!(
        build_dropout_example(&single, None, 0.3, MaskStrategy::Omit, BlurParams::default(), &mut rng),
        Err(PretrainError::Unmaskable)
    );
}

#[test]
fn masking_all_keeps_one_without_pocket() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = ToySpec::default();
    for i in 0..200 {
        let mol = generate_molecule(&spec, i);
        let Ok(ex) = build_dropout_example(&mol, None, 1.0, MaskStrategy::Omit, BlurParams::default(), &mut rng) else {
            continue;
        };
        assert_eq!(ex.masked.len(), ex.split.fragments.len() - 1);
        check_dropout(&mol, None, &ex).unwrap();
        let pocket = generate_pocket(&mol, 3, &mut rng);
        let pc = from_molecule(&pocket.atoms, Role::Pocket(&pocket.annotations)).unwrap();
        let ex = build_dropout_example(&mol, Some(&pc), 1.0, MaskStrategy::Omit, BlurParams::default(), &mut rng).unwrap();
        assert_eq!(ex.masked.len(), ex.split.fragments.len());
        assert_eq!(ex.input_pc.len(), pc.len());
        check_dropout(&mol, Some(&pc), &ex).unwrap();
    }
}

#[test]
fn dropout_stream_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = ToySpec::default();
    let mut checked = 0;
    let mut blurred = 0;
    for i in 0..2000 {
        let mol = generate_molecule(&spec, i);
        let pocket = (i % 3 == 0).then(|| {
            let p = generate_pocket(&mol, 4, &mut rng);
            from_molecule(&p.atoms, Role::Pocket(&p.annotations)).unwrap()
        });
        let strategy = if i % 2 == 0 { MaskStrategy::Omit } else { MaskStrategy::Blur };
        match build_dropout_example(&mol, pocket.as_ref(), 0.3, strategy, BlurParams::default(), &mut rng) {
            Ok(ex) => {
                check_dropout(&mol, pocket.as_ref(), &ex).unwrap_or_else(|e| panic!("molecule {i}: {e}"));
                let hidden: usize = ex.masked.iter().map(|&f| ex.split.fragments[f].len()).sum();
                let visible = mol.atom_count() - hidden;
                let extra = ex.input_pc.len() - ex.pocket_points - visible;
                match strategy {
                    MaskStrategy::Omit => assert_eq!(extra, 0),
                    MaskStrategy::Blur => {
                        assert_eq!(extra, hidden * BlurParams::default().replicas);
                        blurred += 1;
                    }
                }
                checked += 1;
            }
            Err(PretrainError::Unmaskable) => assert!(pocket.is_none()),
            Err(e) => panic!("{e}"),
        }
    }
    assert!(checked > 1000 && blurred > 300);
}

#[test]
fn balanced_batching() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = sample_batch_indices(&[10, 1_000_000], 10_000, &mut rng).unwrap();
    let first = draws.iter().filter(|d| d.0 == 0).count() as f64 / 10_000.0;
    let sigma = (0.25f64 / 10_000.0).sqrt();
    assert!((first - 0.5).abs() <= 3.0 * sigma, "{first}");
    assert!(draws.iter().all(|&(t, i)| i < [10, 1_000_000][t]));
    assert_eq!(sample_batch_indices(&[3, 0], 4, &mut rng), Err(PretrainError::EmptyTaskPool(1)));
    assert_eq!(sample_batch_indices(&[], 4, &mut rng), Err(PretrainError::NoTasks));
}

fn linked() -> Molecule3D {
    // two rings joined through a two-carbon linker
    let g = parse_smiles("c1ccccc1CCC1CCCC1").unwrap();
    let mut coords = Vec::new();
    for k in 0..6 {
        let t = std::f64::consts::PI / 3.0 * k as f64;
        coords.push([1.4 * t.cos(), 1.4 * t.sin(), 0.0]);
    }
    coords.push([2.9, 0.0, 0.0]);
    coords.push([4.4, 0.0, 0.0]);
    for k in 0..5 {
        let t = 2.0 * std::f64::consts::PI / 5.0 * k as f64;
        coords.push([6.2 - 1.3 * t.cos(), 1.3 * t.sin(), 0.0]);
    }
    Molecule3D::new(g, coords).unwrap()
}

#[test]
fn task_formats() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = TaskConfig::default();
    let mol = linked();
    let record = SourceRecord::ligand(mol.clone());

    let d = make_task_example(Task::Distribution, &record, &cfg, &mut rng).unwrap();
    assert_eq!(d.input_text, DISTRIBUTION_PROMPT);
    assert!(d.pc.is_none());
    let back = parse_mol3d(&d.target).unwrap();
    assert_eq!(canonical_smiles(back.graph()), canonical_smiles(mol.graph()));

    let c = make_task_example(Task::Conformation, &record, &cfg, &mut rng).unwrap();
    let smiles = c.input_text.strip_prefix(CONFORMATION_PROMPT_PREFIX).unwrap();
    assert!(!c.target.contains(smiles));
    assert!(c.target.starts_with(|ch: char| ch.is_ascii_uppercase()));
    let conf = parse_records(parse_smiles(smiles).unwrap(), &c.target).unwrap();
    assert!(kabsch_rmsd(conf.coords(), back.coords()).unwrap() < 0.02);

    let s = make_task_example(Task::Shape, &record, &cfg, &mut rng).unwrap();
    let pc = s.pc.unwrap();
    assert_eq!(pc.len(), mol.atom_count() * cfg.shape_blur.replicas);
    assert!(pc.points.iter().all(|p| p.has(SHAPE) && p.features.len() == 1));

    let l = make_task_example(Task::Linker, &record, &cfg, &mut rng).unwrap();
    assert_eq!(l.input_text, LINKER_PROMPT);
    // every acyclic single bond between the rings is cut, so the first
    // joining fragment is the lone carbon next to benzene
    let linker = parse_mol3d(&l.target).unwrap();
    assert_eq!(l.target.split('|').next(), Some("C(*)*"));
    assert_eq!(linker.atom_count(), 3);
    assert_eq!(l.pc.unwrap().len(), mol.atom_count() - 1);

    let sc = make_task_example(Task::Scaffold, &record, &cfg, &mut rng).unwrap();
    let smiles = sc.target.split('|').next().unwrap();
    assert_eq!(smiles.matches('.').count(), 0);
    assert_eq!(smiles.matches('*').count(), 1);
    assert_eq!(sc.pc.unwrap().len(), 6);

    assert!(matches!(
        make_task_example(Task::Pocket, &record, &cfg, &mut rng),
        Err(PretrainError::TaskFormat { task: Task::Pocket, .. })
    ));
    let pocket = generate_pocket(&mol, 5, &mut rng);
    let with_pocket = SourceRecord { mol: mol.clone(), pocket: Some(pocket.clone()) };
    let p = make_task_example(Task::Pocket, &with_pocket, &cfg, &mut rng).unwrap();
    let pc = p.pc.unwrap();
    assert_eq!(pc.len(), pocket.atoms.atom_count());
    assert!(pc.points.iter().all(|q| q.has(POCKET)));
    assert!(pc.mean().unwrap().iter().all(|v| v.abs() < 1e-9));

    let pt = make_task_example(Task::Pretrain, &with_pocket, &cfg, &mut rng).unwrap();
    assert_eq!(pt.input_text, PRETRAIN_PROMPT);
    let pc = pt.pc.unwrap();
    assert!(pc.points[..pocket.atoms.atom_count()].iter().all(|q| q.has(POCKET)));
    assert!(pc.points[pocket.atoms.atom_count()..].iter().all(|q| q.has(LIGAND)));
}

#[test]
fn scaffold_groups_are_separated_by_dots() {
    // benzene core carrying two separate ethyl-like arms
    let g = parse_smiles("CCc1ccc(CC)cc1").unwrap();
    let split = molpc_core::chem::fragment_molecule(&g);
    let coords = (0..g.atom_count()).map(|i| [1.5 * i as f64, (i % 2) as f64, 0.0]).collect();
    let mol = Molecule3D::new(g, coords).unwrap();
    let (scaffold, groups) = scaffold_and_rgroups(&mol, &split).unwrap();
    assert_eq!(split.fragments[scaffold].len(), 6);
    assert_eq!(groups.len(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ex = make_task_example(Task::Scaffold, &SourceRecord::ligand(mol), &TaskConfig::default(), &mut rng).unwrap();
    let smiles = ex.target.split('|').next().unwrap();
    assert_eq!(smiles.matches('.').count(), groups.len() - 1);
    assert_eq!(smiles.matches('*').count(), 2);
}

#[test]
fn corpus_tsv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let spec = ToySpec::default();
    let cfg = TaskConfig::default();
    let mut examples = Vec::new();
    for i in 0..30 {
        let mol = generate_molecule(&spec, i);
        let pocket = generate_pocket(&mol, 3, &mut rng);
        let record = SourceRecord { mol, pocket: Some(pocket) };
        for task in Task::ALL {
            if let Ok(ex) = make_task_example(task, &record, &cfg, &mut rng) {
                examples.push(ex);
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    write_corpus_tsv(&examples, dir.path(), "train").unwrap();
    let back = read_corpus_tsv(&dir.path().join("train.tsv")).unwrap();
    assert_eq!(back, examples);
    for task in Task::ALL {
        assert_eq!(task.tag().parse::<Task>(), Ok(task));
    }
}
