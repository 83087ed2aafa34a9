use nalgebra::{Matrix3, Vector3};

use crate::chem::{MolGraph, Vec3};

use super::MetricsError;

fn centered(x: &[Vec3]) -> Vec<Vector3<f64>> {
    let n = x.len() as f64;
    let mut c = Vector3::zeros();
    for p in x {
        c += Vector3::from(*p);
    }
    c /= n;
    x.iter().map(|p| Vector3::from(*p) - c).collect()
}

/// Proper rotation minimizing the squared distance between centered `a`
/// (rotated) and centered `b`.
pub fn kabsch_rotation(a: &[Vec3], b: &[Vec3]) -> Result<Matrix3<f64>, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (pa, pb) = (centered(a), centered(b));
    let mut h = Matrix3::zeros();
    for (x, y) in pa.iter().zip(&pb) {
        h += x * y.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested");
    let v = svd.v_t.expect("requested").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    Ok(v * fix * u.transpose())
}

/// Root-mean-square deviation after optimal rigid superposition, with atoms
/// matched by index.
pub fn kabsch_rmsd(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricsError> {
    let r = kabsch_rotation(a, b)?;
    let (pa, pb) = (centered(a), centered(b));
    let sum: f64 = pa.iter().zip(&pb).map(|(x, y)| (r * x - y).norm_squared()).sum();
    Ok((sum / a.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformerSet {
    pub graph: MolGraph,
    pub conformers: Vec<Vec<Vec3>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovAmr {
    pub cov_r: f64,
    pub amr_r: f64,
    pub cov_p: f64,
    pub amr_p: f64,
}

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.75;

/// Coverage and average minimum RMSD in both directions. A reference
/// conformer counts as covered when some other-side conformer lies strictly
/// closer than `delta`.
pub fn cov_amr(truth: &ConformerSet, gen: &ConformerSet, delta: f64) -> Result<CovAmr, MetricsError> {
    if truth.graph != gen.graph {
        return Err(MetricsError::GraphMismatch);
    }
    if truth.conformers.is_empty() || gen.conformers.is_empty() {
        return Err(MetricsError::Empty);
    }
    let table: Vec<Vec<f64>> = truth
        .conformers
        .iter()
        .map(|t| gen.conformers.iter().map(|g| kabsch_rmsd(g, t)).collect())
        .collect::<Result<_, _>>()?;
    let summarize = |mins: Vec<f64>| {
        let n = mins.len() as f64;
        let covered = mins.iter().filter(|&&m| m < delta).count() as f64;
        (covered / n, mins.iter().sum::<f64>() / n)
    };
    let row_min = table.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let col_min = (0..gen.conformers.len())
        .map(|k| table.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let (cov_r, amr_r) = summarize(row_min);
    let (cov_p, amr_p) = summarize(col_min);
    Ok(CovAmr {
        cov_r,
        amr_r,
        cov_p,
        amr_p,
    })
}
