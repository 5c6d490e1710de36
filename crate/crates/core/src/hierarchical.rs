//! Octree far-field evaluation of the off-diagonal part of V.
//!
//! Sphere multipoles are shifted into leaf boxes (P2M), aggregated upward
//! (M2M), converted between well-separated boxes of the same level (M2L),
//! pushed down (L2L) and finally re-expanded about each sphere centre (L2P).
//! Spheres in the same or adjacent leaves interact through exact
//! sphere-to-sphere translations. Box expansions are truncated at degree P.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::harmonics::{sh_count, TranslationKind, TranslationPlan, DEFAULT_CACHE_BYTES};

/// How the tree depth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthRule {
    /// Leaves at this level (1 = eight leaves, all near field).
    Fixed(usize),
    /// Smallest depth whose fullest leaf holds at most this many spheres.
    LeafCap(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FarFieldParams {
    /// Degree of the box expansions.
    pub p: usize,
    pub depth: DepthRule,
}

/// Depth limit of the leaf-cap search.
pub const MAX_DEPTH: usize = 10;

impl FarFieldParams {
    pub fn with_depth(p: usize, depth: usize) -> Self {
        Self { p, depth: DepthRule::Fixed(depth) }
    }

    pub fn with_leaf_cap(p: usize, cap: usize) -> Self {
        Self { p, depth: DepthRule::LeafCap(cap) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::Domain("expansion degree P must be at least 1".into()));
        }
        match self.depth {
            DepthRule::Fixed(d) if d < 1 || d > MAX_DEPTH => {
                Err(Error::Domain(format!("tree depth {d} outside 1..={MAX_DEPTH}")))
            }
            DepthRule::LeafCap(0) => Err(Error::Domain("leaf capacity must be positive".into())),
            _ => Ok(()),
        }
    }
}

type Coord = [i64; 3];

#[derive(Debug)]
struct Level {
    coords: Vec<Coord>,
    index: HashMap<Coord, usize>,
}

impl Level {
    fn from_coords(mut coords: Vec<Coord>) -> Self {
        coords.sort_unstable();
        coords.dedup();
        let index = coords.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Self { coords, index }
    }
}

#[derive(Debug)]
pub struct Octree {
    center: [f64; 3],
    half: f64,
    depth: usize,
    p: usize,
    lmax: usize,
    n: usize,
    /// Occupied boxes per level, level 0 is the root.
    levels: Vec<Level>,
    leaf_members: Vec<Vec<u32>>,
    near: TranslationPlan,
    p2m: Option<TranslationPlan>,
    /// `m2m[l]` moves level l+1 multipoles into level l.
    m2m: Vec<Option<TranslationPlan>>,
    m2l: Vec<Option<TranslationPlan>>,
    /// `l2l[l]` moves level l locals into level l+1.
    l2l: Vec<Option<TranslationPlan>>,
    l2p: Option<TranslationPlan>,
}

fn adjacent(a: Coord, b: Coord) -> bool {
    (0..3).all(|k| (a[k] - b[k]).abs() <= 1)
}

fn parent(c: Coord) -> Coord {
    [c[0] >> 1, c[1] >> 1, c[2] >> 1]
}

impl Octree {
    pub fn build(config: &Configuration, lmax: usize, params: FarFieldParams) -> Result<Self> {
        params.validate()?;
        if config.is_empty() {
            return Err(Error::InvalidConfig("configuration has no spheres".into()));
        }
        let centers: Vec<[f64; 3]> = config.spheres.iter().map(|s| s.center).collect();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in &centers {
            for k in 0..3 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let rmax = config.spheres.iter().map(|s| s.radius).fold(0.0, f64::max);
        let half = if extent > 0.0 { 0.5 * extent * 1.05 } else { rmax };

        let leaf_of = |c: &[f64; 3], d: usize| -> Coord {
            let cells = 1i64 << d;
            let w = 2.0 * half / cells as f64;
            let mut out = [0; 3];
            for k in 0..3 {
                let t = ((c[k] - (center[k] - half)) / w).floor() as i64;
                out[k] = t.clamp(0, cells - 1);
            }
            out
        };
        let depth = match params.depth {
            DepthRule::Fixed(d) => d,
            DepthRule::LeafCap(cap) => {
                let mut d = 1;
                loop {
                    let mut counts: HashMap<Coord, usize> = HashMap::new();
                    for c in &centers {
                        *counts.entry(leaf_of(c, d)).or_default() += 1;
                    }
                    if counts.values().all(|&v| v <= cap) || d == MAX_DEPTH {
                        break d;
                    }
                    d += 1;
                }
            }
        };

        let sphere_leaf: Vec<Coord> = centers.iter().map(|c| leaf_of(c, depth)).collect();
        let mut levels: Vec<Level> = Vec::with_capacity(depth + 1);
        levels.resize_with(depth + 1, || Level::from_coords(Vec::new()));
        levels[depth] = Level::from_coords(sphere_leaf.clone());
        for l in (0..depth).rev() {
            let coords = levels[l + 1].coords.iter().map(|c| parent(*c)).collect();
            levels[l] = Level::from_coords(coords);
        }
        let mut leaf_members = vec![Vec::new(); levels[depth].coords.len()];
        for (i, c) in sphere_leaf.iter().enumerate() {
            leaf_members[levels[depth].index[c]].push(i as u32);
        }

        let mut tree = Self {
            center,
            half,
            depth,
            p: params.p,
            lmax,
            n: centers.len(),
            levels,
            leaf_members,
            near: TranslationPlan::new(TranslationKind::MultipoleToLocal, lmax, lmax, &[], 0),
            p2m: None,
            m2m: Vec::new(),
            m2l: Vec::new(),
            l2l: Vec::new(),
            l2p: None,
        };
        tree.plan(&centers);
        Ok(tree)
    }

    fn box_center(&self, level: usize, c: Coord) -> [f64; 3] {
        let w = self.box_width(level);
        [
            self.center[0] - self.half + (c[0] as f64 + 0.5) * w,
            self.center[1] - self.half + (c[1] as f64 + 0.5) * w,
            self.center[2] - self.half + (c[2] as f64 + 0.5) * w,
        ]
    }

    pub fn box_width(&self, level: usize) -> f64 {
        2.0 * self.half / (1u64 << level) as f64
    }

    fn plan(&mut self, centers: &[[f64; 3]]) {
        let d = self.depth;
        let (p, lmax) = (self.p, self.lmax);
        let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let budget = DEFAULT_CACHE_BYTES / 4;
        let leaves = &self.levels[d];

        let mut near_items = Vec::new();
        let mut p2m_items = Vec::new();
        let mut l2p_items = Vec::new();
        for (slot, coord) in leaves.coords.iter().enumerate() {
            let cb = self.box_center(d, *coord);
            for &i in &self.leaf_members[slot] {
                p2m_items.push((slot as u32, i, sub(cb, centers[i as usize])));
                l2p_items.push((i, slot as u32, sub(centers[i as usize], cb)));
            }
            for (other, oc) in leaves.coords.iter().enumerate() {
                if !adjacent(*coord, *oc) {
                    continue;
                }
                for &i in &self.leaf_members[slot] {
                    for &j in &self.leaf_members[other] {
                        if i != j {
                            near_items.push((i, j, sub(centers[i as usize], centers[j as usize])));
                        }
                    }
                }
            }
        }
        self.near = TranslationPlan::new(TranslationKind::MultipoleToLocal, lmax, lmax, &near_items, budget);
        self.m2m = (0..=d).map(|_| None).collect();
        self.m2l = (0..=d).map(|_| None).collect();
        self.l2l = (0..=d).map(|_| None).collect();
        if d < 2 {
            return;
        }
        self.p2m = Some(TranslationPlan::new(TranslationKind::MultipoleToMultipole, p, lmax, &p2m_items, budget / 4));
        self.l2p = Some(TranslationPlan::new(TranslationKind::LocalToLocal, lmax, p, &l2p_items, budget / 4));
        for l in 2..=d {
            let lev = &self.levels[l];
            let mut m2l_items = Vec::new();
            for (t, tc) in lev.coords.iter().enumerate() {
                let ct = self.box_center(l, *tc);
                let pt = parent(*tc);
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            let pn = [pt[0] + dx, pt[1] + dy, pt[2] + dz];
                            for child in 0..8i64 {
                                let sc = [2 * pn[0] + (child & 1), 2 * pn[1] + ((child >> 1) & 1), 2 * pn[2] + (child >> 2)];
                                if adjacent(sc, *tc) {
                                    continue;
                                }
                                if let Some(&s) = lev.index.get(&sc) {
                                    m2l_items.push((t as u32, s as u32, sub(ct, self.box_center(l, sc))));
                                }
                            }
                        }
                    }
                }
            }
            self.m2l[l] = Some(TranslationPlan::new(TranslationKind::MultipoleToLocal, p, p, &m2l_items, budget));
            if l > 2 {
                let plev = &self.levels[l - 1];
                let mut up = Vec::new();
                let mut down = Vec::new();
                for (c, cc) in lev.coords.iter().enumerate() {
                    let pc = parent(*cc);
                    let ps = plev.index[&pc];
                    let v = sub(self.box_center(l - 1, pc), self.box_center(l, *cc));
                    up.push((ps as u32, c as u32, v));
                    down.push((c as u32, ps as u32, [-v[0], -v[1], -v[2]]));
                }
                self.m2m[l - 1] = Some(TranslationPlan::new(TranslationKind::MultipoleToMultipole, p, p, &up, budget / 8));
                self.l2l[l - 1] = Some(TranslationPlan::new(TranslationKind::LocalToLocal, p, p, &down, budget / 8));
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn expansion_degree(&self) -> usize {
        self.p
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[self.depth].coords.len()
    }

    pub fn max_leaf_occupancy(&self) -> usize {
        self.leaf_members.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Leaf slot of every sphere, for checking the partition.
    pub fn leaf_membership(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n];
        for (slot, m) in self.leaf_members.iter().enumerate() {
            for &i in m {
                out[i as usize] = slot;
            }
        }
        out
    }

    pub fn near_pairs(&self) -> usize {
        self.near.pairs()
    }

    pub fn far_translations(&self) -> usize {
        self.m2l.iter().flatten().map(TranslationPlan::pairs).sum()
    }

    /// Adds the local expansions about each sphere centre generated by all
    /// other spheres' multipoles. Both slices hold (lmax+1)² entries per sphere.
    pub fn apply_off_diagonal(&self, multipoles: &[f64], locals: &mut [f64]) {
        self.near.apply(multipoles, locals);
        if self.depth < 2 {
            return;
        }
        let kp = sh_count(self.p);
        let d = self.depth;
        let mut up: Vec<Vec<f64>> = (0..=d).map(|l| vec![0.0; self.levels[l].coords.len() * kp]).collect();
        let mut down: Vec<Vec<f64>> = (0..=d).map(|l| vec![0.0; self.levels[l].coords.len() * kp]).collect();
        self.p2m.as_ref().expect("planned").apply(multipoles, &mut up[d]);
        for l in (2..d).rev() {
            let (lo, hi) = up.split_at_mut(l + 1);
            self.m2m[l].as_ref().expect("planned").apply(&hi[0], &mut lo[l]);
        }
        for l in 2..=d {
            self.m2l[l].as_ref().expect("planned").apply(&up[l], &mut down[l]);
        }
        for l in 2..d {
            let (lo, hi) = down.split_at_mut(l + 1);
            self.l2l[l].as_ref().expect("planned").apply(&lo[l], &mut hi[0]);
        }
        self.l2p.as_ref().expect("planned").apply(&down[d], locals);
    }
}
