//! Seeded sampling of Mandelbrot percolation.
//!
//! The retention draws for the children of a cube come from a ChaCha
//! generator keyed by `(seed, level, index)` of that cube, so every fate
//! depends only on the cube's position and never on traversal order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

use super::PercolationParams;

/// Selected cubes of every level `0..=depth`.
///
/// A cube at level `k` is a lattice point `(c_1, …, c_d)` with
/// `0 ≤ c_i < n^k`, stored as the index `Σ c_i·(n^k)^{i-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercolationSample {
    pub seed: u64,
    pub n: u32,
    pub d: u32,
    /// `levels[k]` lists the selected level-`k` cubes, grouped by parent
    /// in the order of `levels[k-1]`.
    pub levels: Vec<Vec<u64>>,
    /// `parents[k][j]` is the position in `levels[k-1]` of the parent of
    /// `levels[k][j]` (`parents[0]` is empty).
    pub parents: Vec<Vec<u32>>,
}

impl PercolationSample {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn count(&self, level: usize) -> usize {
        self.levels.get(level).map_or(0, Vec::len)
    }

    pub fn survived(&self) -> bool {
        self.levels.last().is_some_and(|l| !l.is_empty())
    }

    /// Lattice coordinates of a level-`level` cube index.
    pub fn coords(&self, level: usize, index: u64) -> Vec<u64> {
        let side = (self.n as u64).pow(level as u32);
        let mut rest = index;
        (0..self.d)
            .map(|_| {
                let c = rest % side;
                rest /= side;
                c
            })
            .collect()
    }

    /// Index of the level-`ancestor` cube containing the level-`level` cube.
    pub fn ancestor(&self, level: usize, index: u64, ancestor: usize) -> u64 {
        let shrink = (self.n as u64).pow((level - ancestor) as u32);
        let side = (self.n as u64).pow(ancestor as u32);
        self.coords(level, index)
            .iter()
            .rev()
            .fold(0, |acc, c| acc * side + c / shrink)
    }

    /// For every level-`ancestor` cube (in `levels[ancestor]` order), the
    /// number of its selected descendants at level `level`.
    pub fn descendant_counts(&self, ancestor: usize, level: usize) -> Vec<u64> {
        let mut counts = vec![1u64; self.count(level)];
        for k in (ancestor + 1..=level).rev() {
            let mut up = vec![0u64; self.count(k - 1)];
            for (j, &c) in counts.iter().enumerate() {
                up[self.parents[k][j] as usize] += c;
            }
            counts = up;
        }
        counts
    }
}

fn children(n: u64, d: u32, level: usize, index: u64) -> impl Iterator<Item = u64> {
    let side = n.pow(level as u32);
    let mut parent = Vec::with_capacity(d as usize);
    let mut rest = index;
    for _ in 0..d {
        parent.push(rest % side);
        rest /= side;
    }
    let child_side = side * n;
    (0..n.pow(d)).map(move |offset| {
        let mut o = offset;
        let mut idx = 0u64;
        let mut scale = 1u64;
        for c in &parent {
            idx += (c * n + o % n) * scale;
            o /= n;
            scale *= child_side;
        }
        idx
    })
}

/// Generator for the children of cube `index` at `level`.
fn keyed_rng(seed: u64, level: usize, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(level as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Samples the construction to `depth` levels.
pub fn sample(params: &PercolationParams, depth: usize, seed: u64) -> Result<PercolationSample> {
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    let (n, d) = (params.n as u64, params.d);
    let bits = (depth as f64) * (d as f64) * (n as f64).log2();
    if bits >= 63.0 {
        return Err(Error::resource("cube index bits", bits.ceil() as u128, 63));
    }
    let p = params.p_f64();
    let mut levels = vec![vec![0u64]];
    let mut parents = vec![Vec::new()];
    for level in 0..depth {
        let current = &levels[level];
        let kept: Vec<Vec<u64>> = par::map(current, |&cube| {
            let mut rng = keyed_rng(seed, level, cube);
            children(n, d, level, cube)
                .filter(|_| rng.random::<f64>() < p)
                .collect()
        });
        let mut next = Vec::new();
        let mut up = Vec::new();
        for (pos, kids) in kept.into_iter().enumerate() {
            up.extend(std::iter::repeat_n(pos as u32, kids.len()));
            next.extend(kids);
        }
        levels.push(next);
        parents.push(up);
    }
    Ok(PercolationSample {
        seed,
        n: params.n,
        d: params.d,
        levels,
        parents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_cover_the_subgrid() {
        let mut kids: Vec<u64> = children(2, 2, 1, 3).collect();
        kids.sort_unstable();
        // Cube (1,1) at level 1 has children (2..4) × (2..4) in a 4×4 grid.
        assert_eq!(kids, vec![10, 11, 14, 15]);
    }

    #[test]
    fn ancestor_inverts_children() {
        let s = PercolationSample {
            seed: 0,
            n: 3,
            d: 2,
            levels: vec![vec![0]],
            parents: vec![vec![]],
        };
        for parent in 0..9u64 {
            for child in children(3, 2, 1, parent) {
                assert_eq!(s.ancestor(2, child, 1), parent);
            }
        }
    }
}
