//! Computable multiscale upper bound on the transport cost between two
//! discrete measures on a cube, built from dyadic conditional-mass
//! discrepancies.
//!
//! The estimate telescopes over nested dyadic partitions of `[0, side]^m`:
//! level `l` splits the cube into `2^{lm}` half-open cells. Summing the
//! conditional-mass mismatch of one measure against the other down to
//! `max_level` and closing with a geometric tail gives an upper bound on
//! `d_p^p` that needs no optimization — which is what makes it usable as an
//! independent check against the exact solver.

use std::collections::{BTreeMap, HashSet};

use super::{require, EmpiricalMeasure, WassersteinError};

/// Keeps `coord · 2^{level+1}` comfortably inside `u64` cell keys.
const MAX_LEVEL_GUARD: usize = 48;

/// Truncation depth and cube geometry for [`dyadic_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicPartitionParams {
    /// Deepest level whose mismatch terms are summed explicitly.
    pub max_level: usize,
    /// The measures live on `[0, side]^m`.
    pub side: f64,
}

/// Upper bound on the transport cost `d_p^p(reference, observed)`.
///
/// The telescoping runs relative to `reference`, so the lemma needs every
/// atom of `observed` to coincide bitwise with an atom of `reference`
/// (support inclusion), and every cell holding observed mass to hold
/// reference mass. The tail beyond `max_level` is geometric in the observed
/// mass of the level-`max_level + 1` cells whose conditional contents still
/// differ; cells where the two measures already agree exactly contribute
/// nothing, so the bound reaches 0 for identical measures at any depth.
pub fn dyadic_bound(
    p: f64,
    reference: &EmpiricalMeasure,
    observed: &EmpiricalMeasure,
    params: &DyadicPartitionParams,
) -> Result<f64, WassersteinError> {
    require(p >= 1.0, || format!("requires p >= 1, got p={p}"))?;
    if reference.dim() != observed.dim() {
        return Err(WassersteinError::DimensionMismatch {
            a: reference.dim(),
            b: observed.dim(),
        });
    }
    require(params.side.is_finite() && params.side > 0.0, || {
        format!("requires side > 0, got side={}", params.side)
    })?;
    require(params.max_level <= MAX_LEVEL_GUARD, || {
        format!("requires max_level <= {MAX_LEVEL_GUARD}, got {}", params.max_level)
    })?;
    check_cube(reference, params.side)?;
    check_cube(observed, params.side)?;

    let ref_support: HashSet<Vec<u64>> = supported_atoms(reference).map(|(i, _)| atom_bits(reference, i)).collect();
    for (i, _) in supported_atoms(observed) {
        if !ref_support.contains(&atom_bits(observed, i)) {
            return Err(WassersteinError::Precondition(
                "observed measure has an atom outside the reference support".to_string(),
            ));
        }
    }

    let m = reference.dim();
    let scaled_ref = scale_to_unit(reference, params.side);
    let scaled_obs = scale_to_unit(observed, params.side);
    let top = params.max_level + 1;

    // Cell masses (reference, observed) per level, keyed by floor coords.
    let mut levels: Vec<BTreeMap<Vec<u64>, (f64, f64)>> = vec![BTreeMap::new(); top + 1];
    for (level, cells) in levels.iter_mut().enumerate() {
        for (i, w) in supported_atoms(reference) {
            cells.entry(cell_key(&scaled_ref[i * m..(i + 1) * m], level)).or_insert((0.0, 0.0)).0 += w;
        }
        for (i, w) in supported_atoms(observed) {
            cells.entry(cell_key(&scaled_obs[i * m..(i + 1) * m], level)).or_insert((0.0, 0.0)).1 += w;
        }
    }

    let mut main = 0.0;
    for level in 0..=params.max_level {
        let mut level_sum = 0.0;
        for (child_key, &(eta_c, xi_c)) in &levels[level + 1] {
            let parent_key: Vec<u64> = child_key.iter().map(|k| k >> 1).collect();
            let &(eta_f, xi_f) =
                levels[level].get(&parent_key).expect("every child cell has a parent cell");
            if xi_f == 0.0 {
                // All of F's children are observed-null too; nothing to add.
                continue;
            }
            if eta_f <= 0.0 {
                return Err(WassersteinError::Precondition(format!(
                    "reference mass vanishes on a level-{level} cell carrying observed mass"
                )));
            }
            level_sum += (xi_c - xi_f * eta_c / eta_f).abs();
        }
        main += 2.0f64.powf(-p * level as f64) * level_sum;
    }

    let unmatched = unmatched_observed_mass(reference, &scaled_ref, observed, &scaled_obs, top);
    let tail = 2.0f64.powf(-p * top as f64) / (1.0 - 2.0f64.powf(-p)) * unmatched;
    let diam_p = (m as f64).sqrt().powf(p);
    Ok(params.side.powf(p) * 0.5 * diam_p * (main + tail))
}

fn check_cube(measure: &EmpiricalMeasure, side: f64) -> Result<(), WassersteinError> {
    for i in 0..measure.len() {
        for &c in measure.atom(i) {
            if !(0.0..=side).contains(&c) {
                return Err(WassersteinError::SupportViolation { index: i, side });
            }
        }
    }
    Ok(())
}

fn supported_atoms(measure: &EmpiricalMeasure) -> impl Iterator<Item = (usize, f64)> + '_ {
    (0..measure.len()).filter_map(|i| {
        let w = measure.weight(i);
        (w > 0.0).then_some((i, w))
    })
}

fn atom_bits(measure: &EmpiricalMeasure, i: usize) -> Vec<u64> {
    measure.atom(i).iter().map(|c| c.to_bits()).collect()
}

/// Coordinates divided by `side`, with the closed upper face nudged just
/// inside so it lands in the last half-open cell at every level.
fn scale_to_unit(measure: &EmpiricalMeasure, side: f64) -> Vec<f64> {
    measure
        .atoms()
        .iter()
        .map(|&c| {
            let s = c / side;
            if s >= 1.0 {
                1.0 - 1e-12
            } else {
                s
            }
        })
        .collect()
}

fn cell_key(scaled: &[f64], level: usize) -> Vec<u64> {
    let factor = (1u64 << level) as f64;
    scaled.iter().map(|&c| (c * factor) as u64).collect()
}

/// `Σ 2·ξ(C)` over the deepest-level cells whose conditional atom contents
/// differ between the two measures. A cell is settled ("matched") when both
/// measures put the same atoms in it with the same conditional weights
/// within 1e−12.
fn unmatched_observed_mass(
    reference: &EmpiricalMeasure,
    scaled_ref: &[f64],
    observed: &EmpiricalMeasure,
    scaled_obs: &[f64],
    level: usize,
) -> f64 {
    let m = reference.dim();
    let mut ref_cells: BTreeMap<Vec<u64>, BTreeMap<Vec<u64>, f64>> = BTreeMap::new();
    for (i, w) in supported_atoms(reference) {
        *ref_cells
            .entry(cell_key(&scaled_ref[i * m..(i + 1) * m], level))
            .or_default()
            .entry(atom_bits(reference, i))
            .or_insert(0.0) += w;
    }
    let mut obs_cells: BTreeMap<Vec<u64>, BTreeMap<Vec<u64>, f64>> = BTreeMap::new();
    for (i, w) in supported_atoms(observed) {
        *obs_cells
            .entry(cell_key(&scaled_obs[i * m..(i + 1) * m], level))
            .or_default()
            .entry(atom_bits(observed, i))
            .or_insert(0.0) += w;
    }
    let mut unmatched = 0.0;
    for (cell, obs_atoms) in &obs_cells {
        let xi_c: f64 = obs_atoms.values().sum();
        let matched = match ref_cells.get(cell) {
            None => false,
            Some(ref_atoms) => {
                let eta_c: f64 = ref_atoms.values().sum();
                ref_atoms.len() == obs_atoms.len()
                    && obs_atoms.iter().all(|(bits, w)| {
                        ref_atoms
                            .get(bits)
                            .is_some_and(|rw| (w / xi_c - rw / eta_c).abs() <= 1e-12)
                    })
            }
        };
        if !matched {
            unmatched += 2.0 * xi_c;
        }
    }
    unmatched
}
