//! Reference persistence computation by naive full boundary-matrix
//! reduction, kept deliberately independent of the production algorithm.
//!
//! Every simplex is a column over global filtration indices; columns are
//! reduced left to right with no per-dimension splitting, no union-find and
//! no pivot shortcuts beyond the textbook cache. Use for validation only —
//! it is quadratic in memory on dense filtrations.

use super::{Filtration, PersistenceDiagram};
use std::collections::HashMap;

/// Diagrams in dimensions `0..=filtration.max_dim` from the full reduction.
pub fn full_reduction(filtration: &Filtration) -> Vec<PersistenceDiagram> {
    let simplices = filtration.all_simplices();
    let n = simplices.len();
    let index: HashMap<&[u32], usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices.as_slice(), i))
        .collect();

    // column j = boundary of simplex j, as sorted global indices
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(n);
    for s in &simplices {
        let mut col = Vec::new();
        if s.vertices.len() > 1 {
            for omit in 0..s.vertices.len() {
                let face: Vec<u32> = s
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != omit)
                    .map(|(_, &v)| v)
                    .collect();
                col.push(index[face.as_slice()]);
            }
            col.sort_unstable();
        }
        columns.push(col);
    }

    let mut low_inverse: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        loop {
            let Some(&low) = columns[j].last() else { break };
            let Some(k) = low_inverse[low] else { break };
            let merged = xor(&columns[j], &columns[k]);
            columns[j] = merged;
        }
        if let Some(&low) = columns[j].last() {
            low_inverse[low] = Some(j);
        }
    }

    let mut paired = vec![false; n];
    let mut diagrams: Vec<PersistenceDiagram> = (0..=filtration.max_dim)
        .map(PersistenceDiagram::empty)
        .collect();
    for j in 0..n {
        if let Some(&low) = columns[j].last() {
            paired[low] = true;
            paired[j] = true;
            let dim = simplices[low].dim();
            if dim <= filtration.max_dim {
                let birth = simplices[low].value;
                let death = simplices[j].value;
                if death > birth {
                    diagrams[dim].pairs.push((birth, death));
                }
            }
        }
    }
    for j in 0..n {
        if !paired[j] && columns[j].is_empty() {
            let dim = simplices[j].dim();
            if dim <= filtration.max_dim {
                diagrams[dim]
                    .pairs
                    .push((simplices[j].value, f64::INFINITY));
            }
        }
    }

    for d in &mut diagrams {
        d.pairs
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    diagrams
}

fn xor(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
