//! One-particle kinetic equations.
//!
//! Both limits have the Boltzmann form `∂f/∂t = r (Q₊(f, f) - f)` with
//! `r = rate_factor`. For CL the gain is linear, `Q₊ = ½(f + g⋆f)`, and each
//! Fourier mode decays independently. For BDG the gain is `g ⋆ μ_f`, where
//! `μ_f` is the law of the bisector of two independent draws from `f`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{
    cyclic_convolve, FourierDensity, GridDensity, NoiseSpec, DEFAULT_CUTOFF,
    DEFAULT_GRID,
};
use crate::{Error, Result};

/// Values in `[-RESOLUTION_FLOOR, 0)` after a step are clipped to zero.
pub const RESOLUTION_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticConfig {
    pub rate_factor: f64,
    pub cutoff: usize,
    pub grid: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for KineticConfig {
    fn default() -> Self {
        KineticConfig {
            rate_factor: 2.0,
            cutoff: DEFAULT_CUTOFF,
            grid: DEFAULT_GRID,
            dt: 0.01,
            t_end: 1.0,
        }
    }
}

impl KineticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_factor > 0.0 && self.rate_factor.is_finite()) {
            return Err(Error::invalid("rate_factor", "must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.1 / self.rate_factor) {
            return Err(Error::invalid(
                "dt",
                format!("{} must lie in (0, 0.1/rate_factor]", self.dt),
            ));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end", "must be finite and >= 0"));
        }
        if self.grid < 2 * self.cutoff + 2 {
            return Err(Error::CutoffTooLarge {
                cutoff: self.cutoff,
                grid: self.grid,
            });
        }
        Ok(())
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("time", format!("{t} must be finite and >= 0")));
    }
    Ok(())
}

/// `f̂(k, t) = f̂₀(k) exp(r (ĝ(k) - 1) t / 2)`.
pub fn cl_evolve(f0: &FourierDensity, g: &NoiseSpec, t: f64, cfg: &KineticConfig) -> Result<FourierDensity> {
    check_time(t)?;
    cfg.validate()?;
    let coeffs = f0
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let decay = (cfg.rate_factor * (g.coeff(k as i64) - 1.0) * t / 2.0).exp();
            c * decay
        })
        .collect();
    Ok(FourierDensity::from_raw(coeffs))
}

/// Cells receiving the bisector of cells `a` and `b`, with weights.
///
/// A midpoint on a cell boundary is shared equally by the two neighbours and
/// an antipodal pair by the two perpendicular cells, so the deposition
/// commutes with every cell rotation.
pub fn bisector_deposit(a: usize, b: usize, grid: usize) -> [(usize, f64); 2] {
    let d = (b + grid - a) % grid;
    if 2 * d == grid {
        let c = (a + grid / 4) % grid;
        return [(c, 0.5), ((c + grid / 2) % grid, 0.5)];
    }
    let (base, span) = if 2 * d < grid { (a, d) } else { (b, grid - d) };
    let lo = (base + span / 2) % grid;
    if span % 2 == 0 {
        [(lo, 0.5), (lo, 0.5)]
    } else {
        [(lo, 0.5), ((lo + 1) % grid, 0.5)]
    }
}

fn pushforward_raw(p: &[f64], q: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut out = vec![0.0; m];
    for a in 0..m {
        if p[a] == 0.0 {
            continue;
        }
        for b in 0..m {
            let w = p[a] * q[b];
            for (c, share) in bisector_deposit(a, b, m) {
                out[c] += share * w;
            }
        }
    }
    out
}

/// Law of the bisector of independent draws from `f1` and `f2`.
pub fn mixed_pushforward(f1: &GridDensity, f2: &GridDensity) -> Result<GridDensity> {
    if f1.grid_size() != f2.grid_size() {
        return Err(Error::invalid("pushforward", "grid sizes differ"));
    }
    let raw = pushforward_raw(&f1.probabilities(), &f2.probabilities());
    let w = f1.cell_width();
    GridDensity::normalized(raw.into_iter().map(|v| v / w).collect())
}

/// `μ_f`: each ordered cell pair deposits `f(y₁) f(y₂) Δ²` on the cell of its
/// shorter-arc bisector (see [`bisector_deposit`]).
pub fn bdg_midpoint_pushforward(f: &GridDensity) -> GridDensity {
    let p = f.probabilities();
    let w = f.cell_width();
    let values = pushforward_raw(&p, &p).into_iter().map(|v| v / w).collect();
    GridDensity::new(values).expect("pushforward of a density is a density")
}

fn noise_on_grid(g: &NoiseSpec, grid: usize) -> Result<Vec<f64>> {
    Ok(g.grid_density(grid)?.into_values())
}

/// Unnormalized `g ⋆ μ` on raw values.
fn gain_raw(f: &[f64], g_values: &[f64]) -> Vec<f64> {
    let w = std::f64::consts::TAU / f.len() as f64;
    let p: Vec<f64> = f.iter().map(|v| v * w).collect();
    cyclic_convolve(g_values, &pushforward_raw(&p, &p), 1.0)
}

/// `Q₊(f, f) = g ⋆ μ_f`.
pub fn bdg_gain(f: &GridDensity, g: &NoiseSpec) -> Result<GridDensity> {
    let g_values = noise_on_grid(g, f.grid_size())?;
    let mut values = gain_raw(f.values(), &g_values);
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    GridDensity::normalized(values)
}

fn rhs(f: &[f64], g_values: &[f64], rate: f64) -> Vec<f64> {
    gain_raw(f, g_values)
        .iter()
        .zip(f)
        .map(|(q, v)| rate * (q - v))
        .collect()
}

fn rk4_step(f: &[f64], g_values: &[f64], rate: f64, h: f64) -> Vec<f64> {
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let k1 = rhs(f, g_values, rate);
    let k2 = rhs(&axpy(f, &k1, h / 2.0), g_values, rate);
    let k3 = rhs(&axpy(f, &k2, h / 2.0), g_values, rate);
    let k4 = rhs(&axpy(f, &k3, h), g_values, rate);
    (0..f.len())
        .map(|i| f[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn settle(mut values: Vec<f64>) -> Result<Vec<f64>> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -RESOLUTION_FLOOR {
        return Err(Error::UnresolvedDensity { min });
    }
    if min < 0.0 {
        values.iter_mut().for_each(|v| *v = v.max(0.0));
        let w = std::f64::consts::TAU / values.len() as f64;
        let mass: f64 = values.iter().sum::<f64>() * w;
        values.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(values)
}

/// RK4 for `∂f/∂t = r (Q₊(f, f) - f)`, recording the solution at each of the
/// sorted `times`. Each interval is split into equal steps no longer than `dt`.
pub fn bdg_evolve_checkpoints(
    f0: &GridDensity,
    g: &NoiseSpec,
    times: &[f64],
    cfg: &KineticConfig,
) -> Result<Vec<GridDensity>> {
    cfg.validate()?;
    let g_values = noise_on_grid(g, f0.grid_size())?;
    let mut out = Vec::with_capacity(times.len());
    let mut now = 0.0;
    let mut f = f0.values().to_vec();
    for &t in times {
        check_time(t)?;
        if t < now {
            return Err(Error::invalid("checkpoints", "times must be sorted"));
        }
        let span = t - now;
        let steps = (span / cfg.dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                f = settle(rk4_step(&f, &g_values, cfg.rate_factor, h))?;
            }
        }
        now = t;
        out.push(GridDensity::new(f.clone())?);
    }
    Ok(out)
}

pub fn bdg_evolve(f0: &GridDensity, g: &NoiseSpec, t: f64, cfg: &KineticConfig) -> Result<GridDensity> {
    Ok(bdg_evolve_checkpoints(f0, g, &[t], cfg)?.remove(0))
}

/// Coefficients of a [`FourierDensity`] produced by [`cl_evolve`] at each time.
pub fn cl_evolve_checkpoints(
    f0: &FourierDensity,
    g: &NoiseSpec,
    times: &[f64],
    cfg: &KineticConfig,
) -> Result<Vec<FourierDensity>> {
    times.iter().map(|&t| cl_evolve(f0, g, t, cfg)).collect()
}

/// Mode `k` of the CL solution for a single coefficient.
pub fn cl_mode(f0k: Complex64, g_k: f64, rate_factor: f64, t: f64) -> Complex64 {
    f0k * (rate_factor * (g_k - 1.0) * t / 2.0).exp()
}

/// Bisector by brute force on the doubled grid `Z_{2M}`, as a list of
/// (cell, weight).
fn deposit_by_search(a: usize, b: usize, m: usize) -> Vec<(usize, f64)> {
    let n2 = 2 * m;
    let dist = |x: usize, y: usize| {
        let d = (x + n2 - y) % n2;
        d.min(n2 - d)
    };
    let best_d = (0..n2)
        .filter(|&x| dist(x, 2 * a) == dist(x, 2 * b))
        .map(|x| dist(x, 2 * a))
        .min()
        .unwrap();
    let points: Vec<usize> = (0..n2)
        .filter(|&x| dist(x, 2 * a) == best_d && dist(x, 2 * b) == best_d)
        .collect();
    let mut out = Vec::new();
    let share = 1.0 / points.len() as f64;
    for x in points {
        if x % 2 == 0 {
            out.push((x / 2, share));
        } else {
            out.push(((x - 1) / 2, share / 2.0));
            out.push((((x + 1) / 2) % m, share / 2.0));
        }
    }
    out
}

/// Direct triple-loop quadrature of `∫∫ f(y₁) f(y₂) g(v - ȳ) dy₁ dy₂`, with
/// the bisector located by exhaustive search. `O(M³)`; a reference for
/// [`bdg_gain`].
pub fn bdg_gain_quadrature(f: &GridDensity, g: &NoiseSpec) -> Result<Vec<f64>> {
    let m = f.grid_size();
    let w = std::f64::consts::TAU / m as f64;
    let gv = g.grid_density(m)?.into_values();
    let mids: Vec<Vec<(usize, f64)>> = (0..m * m)
        .into_par_iter()
        .map(|ab| deposit_by_search(ab / m, ab % m, m))
        .collect();
    Ok((0..m)
        .into_par_iter()
        .map(|v| {
            let mut s = 0.0;
            for a in 0..m {
                for b in 0..m {
                    for &(c, share) in &mids[a * m + b] {
                        s += share * f.values()[a] * f.values()[b] * gv[(v + m - c) % m];
                    }
                }
            }
            s * w * w
        })
        .collect())
}
