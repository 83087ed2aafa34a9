//! Featured point clouds and their preprocessing.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::chem::{Molecule3D, Vec3};
use crate::codec::{charge_token, Vocabulary};

pub const LIGAND: &str = "ligand";
pub const POCKET: &str = "pocket";
pub const SHAPE: &str = "shape";

/// Default atom names kept by [`downsample_prioritized`]: alpha carbons,
/// C-terminal oxygens, and the outermost heavy atoms of each side chain.
pub const DEFAULT_PRIORITY_ATOM_NAMES: [&str; 27] = [
    "CA", "OXT", "CB", "CD1", "CD2", "CG1", "CG2", "OG", "OG1", "SG", "CE", "NZ", "NH1", "NH2", "OD1", "OD2", "ND2",
    "OE1", "OE2", "NE2", "OH", "CZ", "CZ2", "CZ3", "CH2", "NE1", "CG",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointCloudError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("{priority} priority points exceed the budget of {budget}")]
    BudgetTooSmall { priority: usize, budget: usize },
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("{0} residue annotations for {1} atoms")]
    AnnotationMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coord: Vec3,
    pub features: BTreeSet<String>,
}

impl Point {
    pub fn new<I, S>(coord: Vec3, features: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            coord,
            features: features.into_iter().map(Into::into).collect(),
        }
    }

    pub fn has(&self, token: &str) -> bool {
        self.features.contains(token)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueAtom {
    pub residue: String,
    pub name: String,
}

#[derive(Debug, Clone, Copy)]
pub enum Role<'a> {
    Ligand,
    Pocket(&'a [ResidueAtom]),
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: PointCloud) {
        self.points.extend(other.points);
    }

    pub fn coords(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.coord).collect()
    }

    pub fn mean(&self) -> Result<Vec3, PointCloudError> {
        if self.points.is_empty() {
            return Err(PointCloudError::EmptyCloud);
        }
        let mut s = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                s[k] += p.coord[k];
            }
        }
        let n = self.points.len() as f64;
        Ok([s[0] / n, s[1] / n, s[2] / n])
    }

    pub fn translated(&self, t: Vec3) -> PointCloud {
        self.map_coords(|c| [c[0] + t[0], c[1] + t[1], c[2] + t[2]])
    }

    pub fn rotated(&self, r: &Rotation) -> PointCloud {
        self.map_coords(|c| r.apply(c))
    }

    pub fn map_coords(&self, f: impl Fn(Vec3) -> Vec3) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| Point {
                    coord: f(p.coord),
                    features: p.features.clone(),
                })
                .collect(),
        }
    }

    /// Feature tokens missing from the vocabulary, if any.
    pub fn unknown_tokens(&self, vocab: &Vocabulary) -> Vec<String> {
        let mut out: BTreeSet<String> = BTreeSet::new();
        for p in &self.points {
            for f in &p.features {
                if vocab.id(f).is_none() {
                    out.insert(f.clone());
                }
            }
        }
        out.into_iter().collect()
    }
}

/// One point per atom. Ligand points carry `ligand`, the element and a
/// charge token when charged; pocket points carry `pocket`, the element,
/// the residue and the atom name.
pub fn from_molecule(mol: &Molecule3D, role: Role<'_>) -> Result<PointCloud, PointCloudError> {
    let atoms = mol.graph().atoms();
    if let Role::Pocket(ann) = role {
        if ann.len() != atoms.len() {
            return Err(PointCloudError::AnnotationMismatch(ann.len(), atoms.len()));
        }
    }
    let points = atoms
        .iter()
        .zip(mol.coords())
        .enumerate()
        .map(|(i, (atom, &coord))| {
            let mut f = BTreeSet::new();
            f.insert(atom.element.symbol().to_string());
            match role {
                Role::Ligand => {
                    f.insert(LIGAND.to_string());
                    if let Some(q) = charge_token(atom.charge) {
                        f.insert(q);
                    }
                }
                Role::Pocket(ann) => {
                    f.insert(POCKET.to_string());
                    f.insert(ann[i].residue.clone());
                    f.insert(ann[i].name.clone());
                }
            }
            Point { coord, features: f }
        })
        .collect();
    Ok(PointCloud { points })
}

pub fn center(pc: &PointCloud) -> Result<PointCloud, PointCloudError> {
    let m = pc.mean()?;
    Ok(pc.translated([-m[0], -m[1], -m[2]]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    pub fn identity() -> Self {
        Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation matrix of a quaternion, normalized first.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        Rotation([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    /// Uniformly distributed over SO(3).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
            if q.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
                return Self::from_quaternion(q);
            }
        }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

pub fn random_rotation<R: Rng + ?Sized>(pc: &PointCloud, rng: &mut R) -> PointCloud {
    pc.rotated(&Rotation::random(rng))
}

/// Replaces every point by `replicas` copies jittered with isotropic
/// Gaussian noise. With `drop_features` the copies carry only `shape`.
pub fn blur_points<R: Rng + ?Sized>(
    pc: &PointCloud,
    sigma: f64,
    replicas: usize,
    drop_features: bool,
    rng: &mut R,
) -> PointCloud {
    assert!(sigma >= 0.0 && replicas >= 1, "blur needs sigma >= 0 and at least one replica");
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut points = Vec::with_capacity(pc.len() * replicas);
    for p in &pc.points {
        let features = if drop_features {
            BTreeSet::from([SHAPE.to_string()])
        } else {
            p.features.clone()
        };
        for _ in 0..replicas {
            let coord = if sigma == 0.0 {
                p.coord
            } else {
                std::array::from_fn(|k| p.coord[k] + normal.sample(rng))
            };
            points.push(Point {
                coord,
                features: features.clone(),
            });
        }
    }
    PointCloud { points }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityRule {
    pub atom_names: BTreeSet<String>,
}

impl Default for PriorityRule {
    fn default() -> Self {
        Self {
            atom_names: DEFAULT_PRIORITY_ATOM_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl PriorityRule {
    /// One atom name per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Self {
            atom_names: text
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        }
    }

    pub fn is_priority(&self, p: &Point) -> bool {
        p.has(LIGAND) || (p.has(POCKET) && p.features.iter().any(|f| self.atom_names.contains(f)))
    }
}

/// Keeps every priority point and fills the rest of the budget with a
/// uniform sample of the others. Input order is preserved.
pub fn downsample_prioritized<R: Rng + ?Sized>(
    pc: &PointCloud,
    budget: usize,
    rule: &PriorityRule,
    rng: &mut R,
) -> Result<PointCloud, PointCloudError> {
    let priority: Vec<bool> = pc.points.iter().map(|p| rule.is_priority(p)).collect();
    let n_priority = priority.iter().filter(|&&p| p).count();
    if n_priority > budget {
        return Err(PointCloudError::BudgetTooSmall {
            priority: n_priority,
            budget,
        });
    }
    if pc.len() <= budget {
        return Ok(pc.clone());
    }
    let others: Vec<usize> = (0..pc.len()).filter(|&i| !priority[i]).collect();
    let mut keep = priority;
    for k in rand::seq::index::sample(rng, others.len(), budget - n_priority) {
        keep[others[k]] = true;
    }
    Ok(PointCloud {
        points: pc
            .points
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(p, _)| p.clone())
            .collect(),
    })
}

/// `.mpc` text: one point per line, `x y z tok...`.
pub fn write_mpc(pc: &PointCloud) -> String {
    let mut out = String::new();
    for p in &pc.points {
        let _ = write!(out, "{} {} {}", p.coord[0], p.coord[1], p.coord[2]);
        for f in &p.features {
            out.push(' ');
            out.push_str(f);
        }
        out.push('\n');
    }
    out
}

pub fn read_mpc(text: &str) -> Result<PointCloud, PointCloudError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| PointCloudError::Format {
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut fields = line.split_whitespace();
        let mut coord = [0.0; 3];
        for c in &mut coord {
            let f = fields.next().ok_or_else(|| err("expected three coordinates"))?;
            let v: f64 = f.parse().map_err(|_| err("bad coordinate"))?;
            if !v.is_finite() {
                return Err(err("non-finite coordinate"));
            }
            *c = v;
        }
        points.push(Point::new(coord, fields));
    }
    Ok(PointCloud { points })
}
