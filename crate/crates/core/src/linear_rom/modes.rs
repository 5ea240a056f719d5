use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::linalg::{eig, normalize_phase};

use super::dmdc::LinearROM;
use super::LinearRomError;

/// Projected dynamic modes `φ_i = D z_i` for eigenpairs `(λ_i, z_i)` of `A_R`.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicModeSet {
    /// Unit-norm columns, largest entry real positive.
    pub modes: Vec<Vec<Complex64>>,
    /// Descending `|λ|`.
    pub eigenvalues: Vec<Complex64>,
}

impl DynamicModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

pub fn dynamic_modes(rom: &LinearROM) -> Result<DynamicModeSet, LinearRomError> {
    let e = eig(&rom.a_r)?;
    let d = &rom.d;
    let modes = e
        .vectors
        .iter()
        .map(|z| {
            let mut phi: Vec<Complex64> =
                (0..d.rows()).map(|i| d.row(i).iter().zip(z).map(|(&dij, zj)| zj * dij).sum()).collect();
            normalize_phase(&mut phi);
            phi
        })
        .collect();
    Ok(DynamicModeSet { modes, eigenvalues: e.values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModePair {
    pub a: usize,
    pub b: usize,
    pub eigenvalue_gap: f64,
    /// `|⟨φ_a, φ_b⟩|`.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchReport {
    /// Ordered by index into the first set.
    pub pairs: Vec<ModePair>,
    pub mean_score: f64,
}

fn inner_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}

/// Greedy nearest-eigenvalue pairing. Ties are broken on the eigenvalues
/// themselves, so swapping the arguments swaps the pairs and nothing else.
pub fn match_modes(a: &DynamicModeSet, b: &DynamicModeSet) -> Result<MatchReport, LinearRomError> {
    if a.len() != b.len() || a.modes.iter().chain(&b.modes).any(|m| m.len() != a.modes[0].len()) {
        return Err(LinearRomError::Shape(format!("mode sets of sizes {} and {} or unequal lengths", a.len(), b.len())));
    }
    let key = |z: Complex64| (z.re, z.im);
    let mut cand: Vec<(f64, (f64, f64), (f64, f64), usize, usize)> = Vec::new();
    for (i, &la) in a.eigenvalues.iter().enumerate() {
        for (j, &lb) in b.eigenvalues.iter().enumerate() {
            let (lo, hi) = if key(la) <= key(lb) { (key(la), key(lb)) } else { (key(lb), key(la)) };
            cand.push(((la - lb).norm(), lo, hi, i, j));
        }
    }
    cand.sort_by(|x, y| (x.0, x.1, x.2).partial_cmp(&(y.0, y.1, y.2)).unwrap());
    let (mut used_a, mut used_b) = (vec![false; a.len()], vec![false; b.len()]);
    let mut pairs = Vec::with_capacity(a.len());
    for (gap, _, _, i, j) in cand {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        pairs.push(ModePair { a: i, b: j, eigenvalue_gap: gap, score: inner_abs(&a.modes[i], &b.modes[j]) });
    }
    pairs.sort_by_key(|p| p.a);
    let mean_score = if pairs.is_empty() { 0.0 } else { pairs.iter().map(|p| p.score).sum::<f64>() / pairs.len() as f64 };
    Ok(MatchReport { pairs, mean_score })
}

/// CSV with columns `zeta, re_phi_0, im_phi_0, ...`.
pub fn write_modes_csv(path: &Path, zeta: &[f64], set: &DynamicModeSet) -> Result<(), LinearRomError> {
    if set.modes.iter().any(|m| m.len() != zeta.len()) {
        return Err(LinearRomError::Shape("mode length differs from the node count".into()));
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write!(f, "zeta")?;
    for i in 0..set.len() {
        write!(f, ",re_phi_{i},im_phi_{i}")?;
    }
    writeln!(f)?;
    for (k, z) in zeta.iter().enumerate() {
        write!(f, "{z}")?;
        for m in &set.modes {
            write!(f, ",{},{}", m[k].re, m[k].im)?;
        }
        writeln!(f)?;
    }
    Ok(())
}
