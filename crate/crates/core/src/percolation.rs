//! Cluster statistics of sampled colourings on the hypercubic lattice.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{prime_table, Window};
use crate::rng::{domain, Seed};
use crate::sampler::{sample_cop_window_truncated, sampler_truncation, ColouringSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colour {
    White,
    Black,
}

/// Components of one colour in a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentReport {
    pub colour: Colour,
    pub sites: u64,
    pub components: u64,
    pub largest: u64,
    /// Some component touches both faces of the box along every axis.
    pub spanning: bool,
    /// Component size → number of components.
    pub histogram: BTreeMap<u64, u64>,
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    #[inline]
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    #[inline]
    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Components of the sites with `white[i] == (colour == White)` in a box of
/// side lengths `dims` (row-major, last axis fastest), nearest-neighbour
/// adjacency.
pub fn label_components_grid(dims: &[usize], white: &[bool], colour: Colour) -> Result<ComponentReport> {
    let n: usize = dims.iter().product();
    if dims.is_empty() || n != white.len() {
        return Err(Error::param("grid dimensions do not match the site count"));
    }
    if n > u32::MAX as usize {
        return Err(Error::budget("grid too large for 32-bit labels"));
    }
    let want = colour == Colour::White;
    let d = dims.len();
    let mut strides = vec![1usize; d];
    for i in (0..d - 1).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let mut uf = UnionFind::new(n);
    for idx in 0..n {
        if white[idx] != want {
            continue;
        }
        for a in 0..d {
            // coordinate along axis a
            let c = idx / strides[a] % dims[a];
            if c + 1 < dims[a] && white[idx + strides[a]] == want {
                uf.union(idx as u32, (idx + strides[a]) as u32);
            }
        }
    }
    let full_mask: u32 = (1u32 << (2 * d)) - 1;
    let mut faces: BTreeMap<u32, u32> = BTreeMap::new();
    let mut sites = 0u64;
    for idx in 0..n {
        if white[idx] != want {
            continue;
        }
        sites += 1;
        let mut mask = 0u32;
        for a in 0..d {
            let c = idx / strides[a] % dims[a];
            if c == 0 {
                mask |= 1 << (2 * a);
            }
            if c + 1 == dims[a] {
                mask |= 1 << (2 * a + 1);
            }
        }
        let root = uf.find(idx as u32);
        *faces.entry(root).or_insert(0) |= mask;
    }
    let mut histogram = BTreeMap::new();
    let mut largest = 0u64;
    let mut spanning = false;
    for (&root, &mask) in &faces {
        let size = uf.size[root as usize] as u64;
        *histogram.entry(size).or_insert(0) += 1;
        largest = largest.max(size);
        spanning |= mask == full_mask;
    }
    Ok(ComponentReport { colour, sites, components: faces.len() as u64, largest, spanning, histogram })
}

/// Components of one colour of a sample over a box window.
pub fn label_components(sample: &ColouringSample, colour: Colour) -> Result<ComponentReport> {
    let (lo, hi) = sample
        .window
        .as_box()
        .ok_or_else(|| Error::param("component labelling needs a box window"))?;
    let dims: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
    label_components_grid(&dims, &sample.white, colour)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationTrial {
    pub seed: u64,
    pub spanning_white: bool,
    pub white_components: u64,
    pub largest_white: u64,
    pub largest_black: u64,
    pub largest_black_fraction: f64,
    /// White components with more than `L^d/100` sites.
    pub giant_white_components: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationReport {
    pub side: usize,
    pub d: usize,
    pub trials: usize,
    pub truncation_prime: u64,
    pub tv_bound: f64,
    pub spanning_white_fraction: f64,
    pub max_largest_black_fraction: f64,
    /// Trials with exactly one giant white component.
    pub unique_giant_fraction: f64,
    pub per_trial: Vec<PercolationTrial>,
}

/// Samples `trials` coprime colourings of `⟦0, L−1⟧^d` and summarises their clusters.
///
/// Primes up to `P(eps)` are used when that is within the prime table,
/// otherwise the whole table; the reported `tv_bound` is the actual one.
pub fn percolation_experiment(side: usize, d: usize, trials: usize, eps: f64, seed: Seed) -> Result<PercolationReport> {
    if side < 16 {
        return Err(Error::param("side L must be at least 16"));
    }
    if d < 2 {
        return Err(Error::param("percolation experiments need d >= 2"));
    }
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let sites = (side as u64).checked_pow(d as u32).filter(|&n| n <= u32::MAX as u64);
    let sites = sites.ok_or_else(|| Error::budget("window too large"))?;
    let window = Window::box_window(&vec![0; d], &vec![side as i64 - 1; d])?;
    let max_prime = match sampler_truncation(sites as usize, d, eps) {
        Ok(p) => p,
        Err(e) if e.is_budget() => *prime_table().last().expect("prime table"),
        Err(e) => return Err(e),
    };
    let giant = sites / 100;
    let per_trial: Vec<PercolationTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.child(domain::TRIAL, t as u64);
            let sample = sample_cop_window_truncated(&window, d, max_prime, s)?;
            let white = label_components(&sample, Colour::White)?;
            let black = label_components(&sample, Colour::Black)?;
            let giant_white_components = white.histogram.range(giant + 1..).map(|(_, c)| c).sum();
            Ok(PercolationTrial {
                seed: s.0,
                spanning_white: white.spanning,
                white_components: white.components,
                largest_white: white.largest,
                largest_black: black.largest,
                largest_black_fraction: black.largest as f64 / sites as f64,
                giant_white_components,
            })
        })
        .collect::<Result<_>>()?;
    let frac = |f: &dyn Fn(&PercolationTrial) -> bool| per_trial.iter().filter(|t| f(t)).count() as f64 / trials as f64;
    let sample_tv = crate::sampler::truncation_tv(sites as usize, d, max_prime);
    Ok(PercolationReport {
        side,
        d,
        trials,
        truncation_prime: max_prime,
        tv_bound: sample_tv,
        spanning_white_fraction: frac(&|t| t.spanning_white),
        max_largest_black_fraction: per_trial.iter().map(|t| t.largest_black_fraction).fold(0.0, f64::max),
        unique_giant_fraction: frac(&|t| t.giant_white_components == 1),
        per_trial,
    })
}
