//! Exact master equation on the grid torus `Z_M^N`.
//!
//! Each circle is replaced by `M` cells and the noise by its tabulated
//! probability vector, so every product of unit complex numbers becomes an
//! index sum mod `M`. The resulting chain is itself a pair-interaction jump
//! process; for small `N` its transition matrix fits in memory and gives
//! brute-force ground truth for the simulator and the closed-form results.
//!
//! States are multi-indices `(m_1, …, m_N)` flattened with coordinate `0`
//! most significant. [`TransitionMatrix`] stores the row-stochastic jump
//! kernel `P[s, t] = Pr(next = t | current = s)`; densities evolve by its
//! transpose, `F_{k+1} = Q* F_k = Pᵀ F_k`.

use rayon::prelude::*;
use serde::Serialize;

use crate::circle::grid_bisector;
use crate::models::{ModelKind, ModelSpec};
use crate::{Error, Result};

pub const DEFAULT_STATE_CAP: usize = 200_000;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Clone, Debug)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// Column-major copy, filled in increasing source-row order.
    fn transpose(&self, cols: usize) -> Csr {
        let mut counts = vec![0usize; cols + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut t_cols = vec![0u32; self.cols.len()];
        let mut t_vals = vec![0.0; self.vals.len()];
        for r in 0..self.row_ptr.len() - 1 {
            for (c, v) in self.row(r) {
                let at = fill[c];
                t_cols[at] = r as u32;
                t_vals[at] = v;
                fill[c] += 1;
            }
        }
        Csr {
            row_ptr,
            cols: t_cols,
            vals: t_vals,
        }
    }
}

/// Discretized jump kernel of an `N`-particle chain on `Z_M^N`.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    particles: usize,
    grid: usize,
    forward: Csr,
    adjoint: Csr,
}

fn state_count(particles: usize, grid: usize) -> u128 {
    (grid as u128).saturating_pow(particles as u32)
}

fn digits(mut s: usize, particles: usize, grid: usize) -> Vec<usize> {
    let mut d = vec![0; particles];
    for slot in d.iter_mut().rev() {
        *slot = s % grid;
        s /= grid;
    }
    d
}

fn stride(coord: usize, particles: usize, grid: usize) -> usize {
    grid.pow((particles - 1 - coord) as u32)
}

/// Sorts by column and merges duplicates, summing in insertion order.
fn merge_row(mut entries: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

/// Assembles the grid chain for a BDG or CL model.
///
/// The noise is tabulated on the same `M` grid; the pair is uniform and,
/// for CL, the coin fair.
pub fn build_transition(
    model: &ModelSpec,
    particles: usize,
    grid: usize,
    state_cap: usize,
) -> Result<TransitionMatrix> {
    if particles < 2 {
        return Err(Error::invalid("particle count", "N must be >= 2"));
    }
    if model.kind == ModelKind::Kac {
        return Err(Error::invalid(
            "oracle model",
            "the grid oracle covers the circle models (BDG, CL)",
        ));
    }
    let states = state_count(particles, grid);
    if states > state_cap as u128 || states > u32::MAX as u128 {
        return Err(Error::StateSpaceTooLarge {
            states,
            cap: state_cap,
        });
    }
    let states = states as usize;
    let noise: Vec<(usize, f64)> = model
        .noise
        .grid_density(grid)?
        .probabilities()
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .collect();
    let pair_weight = ModelSpec::pair_probability(particles);
    let kind = model.kind;

    let rows: Vec<Vec<(u32, f64)>> = (0..states)
        .into_par_iter()
        .map(|s| {
            let d = digits(s, particles, grid);
            let mut entries = Vec::new();
            for i in 0..particles {
                for j in i + 1..particles {
                    let (si, sj) = (stride(i, particles, grid), stride(j, particles, grid));
                    let base = s - d[i] * si - d[j] * sj;
                    match kind {
                        ModelKind::Cl => {
                            let w = 0.5 * pair_weight;
                            for &(z, p) in &noise {
                                // j follows i, then i follows j
                                let t1 = base + d[i] * si + ((d[i] + z) % grid) * sj;
                                let t2 = base + ((d[j] + z) % grid) * si + d[j] * sj;
                                entries.push((t1 as u32, w * p));
                                entries.push((t2 as u32, w * p));
                            }
                        }
                        ModelKind::Bdg => {
                            let mid = grid_bisector(d[i], d[j], grid);
                            for &(zi, pi) in &noise {
                                for &(zj, pj) in &noise {
                                    let t = base
                                        + ((mid + zi) % grid) * si
                                        + ((mid + zj) % grid) * sj;
                                    entries.push((t as u32, pair_weight * pi * pj));
                                }
                            }
                        }
                        ModelKind::Kac => unreachable!(),
                    }
                }
            }
            merge_row(entries)
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(states + 1);
    row_ptr.push(0);
    let nnz: usize = rows.iter().map(Vec::len).sum();
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    for row in rows {
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    let forward = Csr {
        row_ptr,
        cols,
        vals,
    };
    let adjoint = forward.transpose(states);
    Ok(TransitionMatrix {
        particles,
        grid,
        forward,
        adjoint,
    })
}

impl TransitionMatrix {
    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn states(&self) -> usize {
        self.forward.row_ptr.len() - 1
    }

    pub fn nonzeros(&self) -> usize {
        self.forward.vals.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.states())
            .map(|r| self.forward.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.forward.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.forward
            .row(from)
            .find(|(c, _)| *c == to)
            .map_or(0.0, |(_, v)| v)
    }

    /// Column sums; all ones iff the kernel is doubly stochastic.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.states())
            .map(|c| self.adjoint.row(c).map(|(_, v)| v).sum())
            .collect()
    }

    /// `Q* w` on raw weights.
    pub fn apply_adjoint_raw(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.states());
        (0..self.states())
            .into_par_iter()
            .map(|t| self.adjoint.row(t).map(|(s, p)| p * weights[s]).sum())
            .collect()
    }

    /// One jump of the chain applied to a density.
    pub fn apply_adjoint(&self, d: &JointDensity) -> Result<JointDensity> {
        self.check_density(d)?;
        Ok(JointDensity {
            particles: self.particles,
            grid: self.grid,
            weights: self.apply_adjoint_raw(&d.weights),
        })
    }

    fn check_density(&self, d: &JointDensity) -> Result<()> {
        if d.particles != self.particles || d.grid != self.grid {
            return Err(Error::invalid(
                "joint density",
                format!(
                    "shape (N={}, M={}) does not match the chain (N={}, M={})",
                    d.particles, d.grid, self.particles, self.grid
                ),
            ));
        }
        Ok(())
    }
}

/// A probability vector on `Z_M^N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointDensity {
    particles: usize,
    grid: usize,
    weights: Vec<f64>,
}

impl JointDensity {
    pub fn new(particles: usize, grid: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() as u128 != state_count(particles, grid) {
            return Err(Error::invalid("joint density", "wrong number of weights"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("joint density", "negative weight"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("joint density", format!("total mass {total}")));
        }
        Ok(JointDensity {
            particles,
            grid,
            weights,
        })
    }

    pub fn uniform(particles: usize, grid: usize) -> Self {
        let states = grid.pow(particles as u32);
        JointDensity {
            particles,
            grid,
            weights: vec![1.0 / states as f64; states],
        }
    }

    /// Product of one-coordinate probability vectors.
    pub fn product(factors: &[Vec<f64>]) -> Result<Self> {
        let grid = factors.first().map_or(0, Vec::len);
        if factors.len() < 2 || factors.iter().any(|f| f.len() != grid) {
            return Err(Error::invalid("product density", "need N >= 2 equal-length factors"));
        }
        let particles = factors.len();
        let weights = (0..grid.pow(particles as u32))
            .map(|s| {
                digits(s, particles, grid)
                    .iter()
                    .zip(factors)
                    .map(|(&m, f)| f[m])
                    .product()
            })
            .collect();
        JointDensity::new(particles, grid, weights)
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Densities obtained by relabeling coordinates: `out(m) = self(m∘σ)`.
    pub fn permuted(&self, perm: &[usize]) -> JointDensity {
        let weights = (0..self.weights.len())
            .map(|s| {
                let d = digits(s, self.particles, self.grid);
                let src: usize = (0..self.particles)
                    .map(|c| d[perm[c]] * stride(c, self.particles, self.grid))
                    .sum();
                self.weights[src]
            })
            .collect();
        JointDensity {
            particles: self.particles,
            grid: self.grid,
            weights,
        }
    }

    /// Largest ℓ¹ distance to a copy with two neighbouring coordinates swapped.
    pub fn max_asymmetry(&self) -> f64 {
        (0..self.particles - 1)
            .map(|c| {
                let mut perm: Vec<usize> = (0..self.particles).collect();
                perm.swap(c, c + 1);
                l1_distance(&self.permuted(&perm).weights, &self.weights)
            })
            .fold(0.0, f64::max)
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Joint weights of a subset of coordinates, flattened in the given order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Marginal {
    pub grid: usize,
    pub coords: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Sums out every coordinate not in `coords`.
pub fn marginal(d: &JointDensity, coords: &[usize]) -> Result<Marginal> {
    if coords.is_empty() {
        return Err(Error::invalid("marginal", "no coordinates"));
    }
    let mut seen = vec![false; d.particles];
    for &c in coords {
        if c >= d.particles || std::mem::replace(&mut seen[c], true) {
            return Err(Error::invalid(
                "marginal",
                format!("coordinate {c} out of range or repeated"),
            ));
        }
    }
    let mut weights = vec![0.0; d.grid.pow(coords.len() as u32)];
    for (s, w) in d.weights.iter().enumerate() {
        let dg = digits(s, d.particles, d.grid);
        let idx = coords.iter().fold(0, |acc, &c| acc * d.grid + dg[c]);
        weights[idx] += w;
    }
    Ok(Marginal {
        grid: d.grid,
        coords: coords.to_vec(),
        weights,
    })
}

impl Marginal {
    /// Law of `m_a - m_b mod M` for a two-coordinate marginal.
    pub fn difference_law(&self) -> Result<Vec<f64>> {
        if self.coords.len() != 2 {
            return Err(Error::invalid("difference law", "needs a pair marginal"));
        }
        let m = self.grid;
        let mut law = vec![0.0; m];
        for a in 0..m {
            for b in 0..m {
                law[(a + m - b) % m] += self.weights[a * m + b];
            }
        }
        Ok(law)
    }

    /// Largest deviation from `law(m_a - m_b)/M`, i.e. from a function of the
    /// difference alone.
    pub fn max_translation_defect(&self) -> Result<f64> {
        let law = self.difference_law()?;
        let m = self.grid;
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                let expect = law[(a + m - b) % m] / m as f64;
                worst = worst.max((self.weights[a * m + b] - expect).abs());
            }
        }
        Ok(worst)
    }
}

/// `Σ_δ p(δ) e^{-2πikδ/M}` for `k = 0..=K`; real part of the DFT of a
/// probability vector (the imaginary part vanishes for even laws).
pub fn probability_coeffs(law: &[f64], cutoff: usize) -> Vec<num_complex::Complex64> {
    let m = law.len() as f64;
    (0..=cutoff)
        .map(|k| {
            law.iter()
                .enumerate()
                .map(|(d, p)| {
                    let ang = std::f64::consts::TAU * (k * d) as f64 / m;
                    num_complex::Complex64::new(p * ang.cos(), -p * ang.sin())
                })
                .sum()
        })
        .collect()
}

/// `L* d = N (Q* d - d)`.
pub fn apply_generator(tm: &TransitionMatrix, d: &JointDensity) -> Result<Vec<f64>> {
    let next = tm.apply_adjoint(d)?;
    let n = tm.particles as f64;
    Ok(next
        .weights
        .iter()
        .zip(&d.weights)
        .map(|(a, b)| n * (a - b))
        .collect())
}

#[derive(Clone, Debug)]
pub struct Stationary {
    pub density: JointDensity,
    pub iterations: usize,
    /// `‖Q* F - F‖₁` of the returned density's predecessor step.
    pub residual: f64,
}

/// Power iteration from the uniform density, stopping once successive
/// iterates differ by less than `tol` in ℓ¹ (hence also in total variation).
pub fn stationary(tm: &TransitionMatrix, tol: f64, max_iter: usize) -> Result<Stationary> {
    let mut x = vec![1.0 / tm.states() as f64; tm.states()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut next = tm.apply_adjoint_raw(&x);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = l1_distance(&next, &x);
        x = next;
        if residual < tol {
            return Ok(Stationary {
                density: JointDensity {
                    particles: tm.particles,
                    grid: tm.grid,
                    weights: x,
                },
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::NoiseSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wn16() -> NoiseSpec {
        NoiseSpec::wrapped_normal(0.5).unwrap().tabulate(16).unwrap()
    }

    fn random_density(particles: usize, grid: usize, seed: u64) -> JointDensity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..grid.pow(particles as u32)).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        JointDensity::new(particles, grid, raw.iter().map(|v| v / total).collect()).unwrap()
    }

    #[test]
    fn two_cell_uniform_chain_is_doubly_stochastic() {
        let tm = build_transition(&ModelSpec::cl(NoiseSpec::Uniform), 2, 2, DEFAULT_STATE_CAP).unwrap();
        for s in tm.row_sums().iter().chain(&tm.column_sums()) {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let st = stationary(&tm, 1e-12, 1000).unwrap();
        for w in st.density.weights() {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_stochastic() {
        for model in [ModelSpec::cl(wn16()), ModelSpec::bdg(wn16())] {
            let tm = build_transition(&model, 2, 8, DEFAULT_STATE_CAP);
            // 16-point tabulation cannot be read on 8 cells
            assert!(tm.is_err());
            let g8 = NoiseSpec::wrapped_normal(0.5).unwrap().tabulate(8).unwrap();
            let tm = build_transition(&ModelSpec { noise: g8, ..model }, 2, 8, DEFAULT_STATE_CAP).unwrap();
            assert!(tm.min_entry() >= 0.0);
            for s in tm.row_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cap_is_enforced_with_size_estimate() {
        let err = build_transition(&ModelSpec::cl(wn16()), 5, 16, DEFAULT_STATE_CAP).unwrap_err();
        match err {
            Error::StateSpaceTooLarge { states, cap } => {
                assert_eq!(states, 16u128.pow(5));
                assert_eq!(cap, DEFAULT_STATE_CAP);
            }
            e => panic!("{e}"),
        }
        assert!(build_transition(&ModelSpec::kac(NoiseSpec::Uniform), 2, 4, 100).is_err());
    }

    #[test]
    fn cl_kernel_entries_by_hand() {
        // N=2, M=4, tabulated g: from (a,b) the follower lands on leader+z
        let g = NoiseSpec::tabulated(vec![4.0, 2.0, 1.0, 2.0]).unwrap();
        let p = g.grid_density(4).unwrap().probabilities();
        let tm = build_transition(&ModelSpec::cl(g), 2, 4, 100).unwrap();
        let idx = |a: usize, b: usize| a * 4 + b;
        let (a, b) = (1, 3);
        for t1 in 0..4 {
            for t2 in 0..4 {
                let mut expect = 0.0;
                if t1 == a {
                    expect += 0.5 * p[(t2 + 4 - a) % 4];
                }
                if t2 == b {
                    expect += 0.5 * p[(t1 + 4 - b) % 4];
                }
                assert!((tm.entry(idx(a, b), idx(t1, t2)) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bdg_kernel_uses_grid_midpoint() {
        let g = NoiseSpec::tabulated(vec![6.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = g.grid_density(8).unwrap().probabilities();
        let tm = build_transition(&ModelSpec::bdg(g), 2, 8, 100).unwrap();
        // cells 1 and 5 are antipodal: midpoint 1 + 8/4 = 3
        let from = 8 + 5;
        for zi in [7usize, 0, 1] {
            for zj in [7usize, 0, 1] {
                let to = ((3 + zi) % 8) * 8 + (3 + zj) % 8;
                assert!((tm.entry(from, to) - p[zi] * p[zj]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn adjoint_preserves_symmetry_and_mass() {
        let tm = build_transition(&ModelSpec::cl(wn16()), 3, 16, DEFAULT_STATE_CAP).unwrap();
        let f = NoiseSpec::wrapped_normal(0.8).unwrap().grid_density(16).unwrap().probabilities();
        let sym = JointDensity::product(&[f.clone(), f.clone(), f]).unwrap();
        assert!(sym.max_asymmetry() < 1e-16);
        let next = tm.apply_adjoint(&sym).unwrap();
        assert!(next.max_asymmetry() < 1e-15, "{}", next.max_asymmetry());
        assert!((next.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(next.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn uniform_noise_has_uniform_fixed_point() {
        let tm = build_transition(&ModelSpec::bdg(NoiseSpec::Uniform), 3, 4, 1000).unwrap();
        let st = stationary(&tm, 1e-13, 10_000).unwrap();
        let u = JointDensity::uniform(3, 4);
        assert!(l1_distance(st.density.weights(), u.weights()) < 1e-12);
        let lu = apply_generator(&tm, &u).unwrap();
        assert!(lu.iter().map(|v| v.abs()).sum::<f64>() < 1e-13);
    }

    #[test]
    fn stationary_residual_and_uniform_one_marginal() {
        let tm = build_transition(&ModelSpec::cl(wn16()), 3, 16, DEFAULT_STATE_CAP).unwrap();
        let st = stationary(&tm, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let again = tm.apply_adjoint(&st.density).unwrap();
        assert!(l1_distance(again.weights(), st.density.weights()) < 1e-12);
        let gen = apply_generator(&tm, &st.density).unwrap();
        assert!(gen.iter().map(|v| v.abs()).sum::<f64>() < 3.0 * 1e-12);
        let one = marginal(&st.density, &[0]).unwrap();
        for w in &one.weights {
            assert!((w - 1.0 / 16.0).abs() < 1e-8);
        }
        let pair = marginal(&st.density, &[0, 1]).unwrap();
        assert!(pair.max_translation_defect().unwrap() < 1e-10);
        assert!(st.density.max_asymmetry() < 1e-10);
    }

    #[test]
    fn non_convergence_is_reported() {
        let tm = build_transition(&ModelSpec::cl(wn16()), 3, 16, DEFAULT_STATE_CAP).unwrap();
        match stationary(&tm, 1e-12, 3) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn marginal_of_product_is_product() {
        let a = vec![0.1, 0.2, 0.3, 0.4];
        let b = vec![0.25, 0.25, 0.4, 0.1];
        let c = vec![0.7, 0.1, 0.1, 0.1];
        let d = JointDensity::product(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let m = marginal(&d, &[2, 0]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.weights[i * 4 + j] - c[i] * a[j]).abs() < 1e-15);
            }
        }
        let full = marginal(&d, &[0, 1, 2]).unwrap();
        assert_eq!(full.weights, d.weights());
        assert!(marginal(&d, &[0, 0]).is_err());
        assert!(marginal(&d, &[]).is_err());
        assert!(marginal(&d, &[3]).is_err());
    }

    #[test]
    fn generator_conserves_probability() {
        let tm = build_transition(&ModelSpec::bdg(wn16()), 2, 16, DEFAULT_STATE_CAP).unwrap();
        for seed in 0..5 {
            let d = random_density(2, 16, seed);
            let out = apply_generator(&tm, &d).unwrap();
            assert!(out.iter().sum::<f64>().abs() < 1e-12);
        }
        let wrong = JointDensity::uniform(3, 16);
        assert!(apply_generator(&tm, &wrong).is_err());
    }

    #[test]
    fn two_particle_uniform_copying_generator() {
        // With uniform noise one jump replaces the follower by an independent
        // uniform: Q* d = ½ (d₁ ⊗ u + u ⊗ d₂). L* kills the uniform density
        // and nothing else.
        let m = 4;
        let tm = build_transition(&ModelSpec::cl(NoiseSpec::Uniform), 2, m, 100).unwrap();
        for seed in 0..5 {
            let d = random_density(2, m, 100 + seed);
            let d1 = marginal(&d, &[0]).unwrap().weights;
            let d2 = marginal(&d, &[1]).unwrap().weights;
            let out = apply_generator(&tm, &d).unwrap();
            for a in 0..m {
                for b in 0..m {
                    let q = 0.5 * (d1[a] / m as f64 + d2[b] / m as f64);
                    let expect = 2.0 * (q - d.weights()[a * m + b]);
                    assert!((out[a * m + b] - expect).abs() < 1e-15);
                }
            }
            assert!(out.iter().map(|v| v.abs()).sum::<f64>() > 1e-3);
        }
        let u = apply_generator(&tm, &JointDensity::uniform(2, m)).unwrap();
        assert!(u.iter().all(|v| v.abs() < 1e-16));
    }
}
