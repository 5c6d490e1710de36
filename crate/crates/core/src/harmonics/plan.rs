//! Batched application of many translations of one kind.
//!
//! Lattices and octrees repeat the same translation vector many times, so
//! pairs are grouped by vector, each matrix is formed once and applied to all
//! of its sources in a single matrix product.

use std::collections::HashMap;
use std::sync::Arc;

use super::solid::{stencil, Stencil, TranslationKind};

/// Default memory budget for keeping translation matrices between applies.
pub const DEFAULT_CACHE_BYTES: usize = 384 << 20;

#[derive(Debug)]
struct Group {
    vector: [f64; 3],
    dst: Vec<u32>,
    src: Vec<u32>,
}

#[derive(Debug)]
pub struct TranslationPlan {
    stencil: Arc<Stencil>,
    groups: Vec<Group>,
    cached: Option<Vec<f64>>,
    pairs: usize,
}

impl TranslationPlan {
    /// `items` are (destination slot, source slot, translation vector).
    pub fn new(
        kind: TranslationKind,
        lout: usize,
        lin: usize,
        items: &[(u32, u32, [f64; 3])],
        cache_bytes: usize,
    ) -> Self {
        let stencil = stencil(kind, lout, lin);
        let scale = items
            .iter()
            .flat_map(|(_, _, v)| v.iter().map(|c| c.abs()))
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let quantum = scale * 1e-12;
        let mut index: HashMap<[i64; 3], usize> = HashMap::new();
        let mut groups: Vec<Group> = Vec::new();
        for &(d, s, v) in items {
            let key = v.map(|c| (c / quantum).round() as i64);
            let g = *index.entry(key).or_insert_with(|| {
                groups.push(Group { vector: v, dst: Vec::new(), src: Vec::new() });
                groups.len() - 1
            });
            groups[g].dst.push(d);
            groups[g].src.push(s);
        }
        let mut plan = Self { stencil, groups, cached: None, pairs: items.len() };
        let block = plan.stencil.rows() * plan.stencil.cols();
        if plan.groups.len() * block * 8 <= cache_bytes {
            let mut all = vec![0.0; plan.groups.len() * block];
            let mut h = Vec::new();
            for (g, chunk) in plan.groups.iter().zip(all.chunks_mut(block)) {
                plan.stencil.fill(g.vector, &mut h, chunk);
            }
            plan.cached = Some(all);
        }
        plan
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn distinct_vectors(&self) -> usize {
        self.groups.len()
    }

    pub fn is_cached(&self) -> bool {
        self.cached.is_some()
    }

    /// dst[slot] += T(vector) · src[slot'] for every pair.
    ///
    /// Slots are contiguous blocks of (lout+1)² and (lin+1)² entries.
    pub fn apply(&self, src: &[f64], dst: &mut [f64]) {
        let rows = self.stencil.rows();
        let cols = self.stencil.cols();
        let block = rows * cols;
        let mut t = if self.cached.is_none() { vec![0.0; block] } else { Vec::new() };
        let mut h = Vec::new();
        let mut b = Vec::new();
        let mut c = Vec::new();
        for (gi, g) in self.groups.iter().enumerate() {
            let tm: &[f64] = match &self.cached {
                Some(all) => &all[gi * block..(gi + 1) * block],
                None => {
                    self.stencil.fill(g.vector, &mut h, &mut t);
                    &t
                }
            };
            let n = g.src.len();
            b.clear();
            for &s in &g.src {
                b.extend_from_slice(&src[s as usize * cols..(s as usize + 1) * cols]);
            }
            c.clear();
            c.resize(rows * n, 0.0);
            // C (rows × n, column-contiguous) = T (row-major) · B (column-contiguous).
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    cols,
                    n,
                    1.0,
                    tm.as_ptr(),
                    cols as isize,
                    1,
                    b.as_ptr(),
                    1,
                    cols as isize,
                    0.0,
                    c.as_mut_ptr(),
                    1,
                    rows as isize,
                );
            }
            for (j, &d) in g.dst.iter().enumerate() {
                let out = &mut dst[d as usize * rows..(d as usize + 1) * rows];
                for (o, v) in out.iter_mut().zip(&c[j * rows..(j + 1) * rows]) {
                    *o += v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{sh_count, translation_matrix};

    #[test]
    fn grouped_apply_matches_pairwise() {
        let lmax = 3;
        let k = sh_count(lmax);
        let vecs = [[2.5, 0.0, 0.0], [0.0, -2.5, 2.5], [2.5, 0.0, 0.0]];
        let items: Vec<(u32, u32, [f64; 3])> =
            vec![(0, 1, vecs[0]), (1, 2, vecs[1]), (2, 0, vecs[2]), (0, 2, vecs[1])];
        let src: Vec<f64> = (0..3 * k).map(|i| (i as f64 * 0.37).sin()).collect();
        for budget in [0, DEFAULT_CACHE_BYTES] {
            let plan = TranslationPlan::new(TranslationKind::MultipoleToLocal, lmax, lmax, &items, budget);
            assert_eq!(plan.distinct_vectors(), 2);
            let mut dst = vec![0.0; 3 * k];
            plan.apply(&src, &mut dst);
            let mut expect = vec![0.0; 3 * k];
            for &(d, s, v) in &items {
                let t = translation_matrix(TranslationKind::MultipoleToLocal, lmax, lmax, v);
                for r in 0..k {
                    for c in 0..k {
                        expect[d as usize * k + r] += t[r * k + c] * src[s as usize * k + c];
                    }
                }
            }
            for (a, b) in dst.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-13 * (1.0 + b.abs()));
            }
        }
    }
}
