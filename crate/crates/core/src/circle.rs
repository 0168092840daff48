//! Angles, densities on the unit circle, noise laws, and their Fourier
//! coefficients.
//!
//! Points of S¹ are stored as angles in `[0, 2π)`; multiplying unit complex
//! numbers is angle addition, so noise acts additively. Densities are taken
//! with respect to `dθ` (the uniform density is `1/(2π)`), and the Fourier
//! coefficient convention is
//!
//! ```text
//! f̂(k) = ∫ e^{-ikθ} f(θ) dθ,     f̂(0) = 1.
//! ```
//!
//! Grid densities live on `M` points `θ_m = 2πm/M` (M a power of two) with
//! quadrature weight `2π/M`; each value is read as the constant density of
//! the cell `[θ_m - π/M, θ_m + π/M)` when sampling.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pairs closer than this to antipodal use the fixed bisector convention.
pub const ANTIPODAL_TOL: f64 = 1e-12;

/// Reconstructed values below this are an unresolved density, not ringing.
pub const NEGATIVE_CLIP_TOL: f64 = 1e-9;

pub const DEFAULT_CUTOFF: usize = 64;
pub const DEFAULT_GRID: usize = 256;

const MASS_TOL: f64 = 1e-12;
const COEFF_TOL: f64 = 1e-9;

/// Reduce an angle to `[0, 2π)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly 2π
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn new(theta: f64) -> Self {
        Angle(wrap_angle(theta))
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Group law of S¹: `(a + b) mod 2π`.
    #[inline]
    pub fn compose(self, other: Angle) -> Angle {
        Angle::new(self.0 + other.0)
    }

    /// Complex conjugation, i.e. negation of the angle.
    #[inline]
    pub fn conj(self) -> Angle {
        Angle::new(-self.0)
    }

    pub fn from_vector(x: f64, y: f64) -> Angle {
        Angle::new(y.atan2(x))
    }

    pub fn to_vector(self) -> (f64, f64) {
        let (s, c) = self.0.sin_cos();
        (c, s)
    }

    /// `e^{-ikθ}`.
    #[inline]
    pub fn character(self, k: i64) -> Complex64 {
        let (s, c) = (k as f64 * self.0).sin_cos();
        Complex64::new(c, -s)
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        self.compose(rhs)
    }
}

/// Direction of the normalized sum of two unit vectors: the bisector of the
/// shorter arc between `a` and `b`.
///
/// Antipodal pairs have no midpoint; they map to the smaller of the two
/// angles plus π/2. The result is symmetric in its arguments bit for bit.
pub fn bisector(a: Angle, b: Angle) -> Angle {
    let (lo, hi) = if a.0 <= b.0 { (a.0, b.0) } else { (b.0, a.0) };
    let gap = hi - lo;
    if (gap - PI).abs() < ANTIPODAL_TOL {
        Angle::new(lo + FRAC_PI_2)
    } else if gap < PI {
        Angle::new(lo + 0.5 * gap)
    } else {
        Angle::new(hi + 0.5 * (TAU - gap))
    }
}

/// Grid analogue of [`bisector`] on `Z_M`: the cell nearest to the
/// shorter-arc midpoint of cells `a` and `b`.
///
/// Half-cell midpoints go to the even-indexed neighbour; antipodal cells
/// map to the smaller index plus `M/4`. Symmetric in `a` and `b`.
pub fn grid_bisector(a: usize, b: usize, grid: usize) -> usize {
    debug_assert!(grid % 2 == 0 && a < grid && b < grid);
    let d = (b + grid - a) % grid;
    if d == 0 {
        return a;
    }
    if 2 * d == grid {
        return (a.min(b) + grid / 4) % grid;
    }
    let (base, span) = if 2 * d < grid { (a, d) } else { (b, grid - d) };
    let lo = (base + span / 2) % grid;
    if span % 2 == 0 || lo % 2 == 0 {
        lo
    } else {
        (lo + 1) % grid
    }
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 2 || !grid.is_power_of_two() {
        return Err(Error::invalid(
            "grid size",
            format!("M={grid} must be a power of two >= 2"),
        ));
    }
    Ok(())
}

fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

/// `X_k = Σ_m x_m e^{-2πikm/M}`.
pub(crate) fn dft_real(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_plan(buf.len(), false).process(&mut buf);
    buf
}

/// Cyclic convolution `c_m = w Σ_n a_{m-n} b_n` via FFT.
pub(crate) fn cyclic_convolve(a: &[f64], b: &[f64], weight: f64) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let len = a.len();
    let fa = dft_real(a);
    let fb = dft_real(b);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    fft_plan(len, true).process(&mut prod);
    let scale = weight / len as f64;
    prod.iter().map(|c| c.re * scale).collect()
}

/// A density sampled on a uniform grid of `M` angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    values: Vec<f64>,
}

impl GridDensity {
    /// Wraps values that already integrate to one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_grid(values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(
                "grid density",
                format!("value {v} is negative or not finite"),
            ));
        }
        let d = GridDensity { values };
        let mass = d.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(
                "grid density",
                format!("mass {mass} differs from 1"),
            ));
        }
        Ok(d)
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        check_grid(values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(
                "grid density",
                format!("value {v} is negative or not finite"),
            ));
        }
        let mass: f64 = values.iter().sum::<f64>() * TAU / values.len() as f64;
        if mass <= 0.0 {
            return Err(Error::invalid("grid density", "zero total mass"));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(GridDensity { values })
    }

    pub fn from_fn(grid: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(grid)?;
        let values = (0..grid).map(|m| f(TAU * m as f64 / grid as f64)).collect();
        Self::normalized(values)
    }

    pub fn uniform(grid: usize) -> Result<Self> {
        check_grid(grid)?;
        Ok(GridDensity {
            values: vec![1.0 / TAU; grid],
        })
    }

    /// All mass in one cell.
    pub fn point_mass(grid: usize, cell: usize) -> Result<Self> {
        check_grid(grid)?;
        let mut values = vec![0.0; grid];
        values[cell % grid] = grid as f64 / TAU;
        Ok(GridDensity { values })
    }

    /// Wrapped normal of variance `sigma2` centered at `mean`, sampled
    /// pointwise and renormalized.
    pub fn wrapped_normal(grid: usize, mean: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", format!("{sigma2} must be > 0")));
        }
        Self::from_fn(grid, |theta| wrapped_normal_density(theta - mean, sigma2))
    }

    #[inline]
    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn cell_width(&self) -> f64 {
        TAU / self.values.len() as f64
    }

    #[inline]
    pub fn angle(&self, cell: usize) -> f64 {
        cell as f64 * self.cell_width()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_width()
    }

    /// Cell probabilities `values · 2π/M`.
    pub fn probabilities(&self) -> Vec<f64> {
        let w = self.cell_width();
        self.values.iter().map(|v| v * w).collect()
    }

    /// Translation by `shift` cells.
    pub fn rotate_cells(&self, shift: isize) -> GridDensity {
        let m = self.values.len() as isize;
        let values = (0..m)
            .map(|i| self.values[(i - shift).rem_euclid(m) as usize])
            .collect();
        GridDensity { values }
    }

    pub fn max_abs_diff(&self, other: &GridDensity) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sampler(&self) -> GridSampler {
        GridSampler::new(self)
    }
}

/// Inverse-CDF sampler for the piecewise-constant reading of a grid density.
#[derive(Clone, Debug)]
pub struct GridSampler {
    cumulative: Vec<f64>,
    probs: Vec<f64>,
    width: f64,
}

impl GridSampler {
    fn new(d: &GridDensity) -> Self {
        let probs = d.probabilities();
        let total: f64 = probs.iter().sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        let probs = probs.iter().map(|p| p / total).collect();
        GridSampler {
            cumulative,
            probs,
            width: d.cell_width(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        let u: f64 = rng.random();
        let cell = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let below = if cell == 0 { 0.0 } else { self.cumulative[cell - 1] };
        let frac = ((u - below) / self.probs[cell]).clamp(0.0, 1.0);
        Angle::new((cell as f64 - 0.5 + frac) * self.width)
    }
}

/// Truncated Fourier coefficients `f̂(k)`, `k = -K..K`, of a real density.
///
/// Only `k = 0..=K` is stored; negative modes are conjugates. Modes beyond
/// the cutoff read as zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierDensity {
    coeffs: Vec<Complex64>,
}

impl FourierDensity {
    /// `coeffs[k]` for `k = 0..=K`. The zeroth mode must be 1.
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self> {
        let Some(c0) = coeffs.first() else {
            return Err(Error::invalid("Fourier density", "no coefficients"));
        };
        if (c0 - Complex64::new(1.0, 0.0)).norm() > COEFF_TOL {
            return Err(Error::invalid(
                "Fourier density",
                format!("f̂(0) = {c0} is not 1"),
            ));
        }
        coeffs[0] = Complex64::new(1.0, 0.0);
        if let Some((k, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.norm() <= 1.0 + COEFF_TOL))
        {
            return Err(Error::invalid(
                "Fourier density",
                format!("|f̂({k})| = {} exceeds 1", c.norm()),
            ));
        }
        Ok(FourierDensity { coeffs })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn uniform(cutoff: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); cutoff + 1];
        coeffs[0] = Complex64::new(1.0, 0.0);
        FourierDensity { coeffs }
    }

    #[inline]
    pub fn cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `f̂(k)` for `k ∈ ℤ`.
    pub fn coeff(&self, k: i64) -> Complex64 {
        match self.coeffs.get(k.unsigned_abs() as usize) {
            Some(c) if k >= 0 => *c,
            Some(c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Nonnegative modes `0..=K`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficients of `f(θ - φ)`.
    pub fn rotate(&self, phi: f64) -> FourierDensity {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * Angle::new(phi).character(k as i64))
            .collect();
        FourierDensity { coeffs }
    }

    pub(crate) fn from_raw(coeffs: Vec<Complex64>) -> Self {
        FourierDensity { coeffs }
    }
}

/// `f̂(k) = (2π/M) Σ_m e^{-ikθ_m} d(θ_m)` for `k = 0..=K`.
pub fn fourier_coeffs(d: &GridDensity, cutoff: usize) -> Result<FourierDensity> {
    let grid = d.grid_size();
    if cutoff + 1 > grid / 2 {
        return Err(Error::CutoffTooLarge { cutoff, grid });
    }
    let w = d.cell_width();
    let spectrum = dft_real(d.values());
    FourierDensity::new(spectrum[..=cutoff].iter().map(|c| c * w).collect())
}

/// Inverse transform onto an `M`-point grid.
///
/// Reconstructed values in `[-1e-9, 0)` are treated as ringing, clipped to
/// zero and the result renormalized; anything more negative is an error.
pub fn density_from_coeffs(f: &FourierDensity, grid: usize) -> Result<GridDensity> {
    check_grid(grid)?;
    let cutoff = f.cutoff();
    if grid < 2 * cutoff + 2 {
        return Err(Error::CutoffTooLarge { cutoff, grid });
    }
    let mut spectrum = vec![Complex64::new(0.0, 0.0); grid];
    spectrum[0] = f.coeff(0);
    for k in 1..=cutoff {
        spectrum[k] = f.coeff(k as i64);
        spectrum[grid - k] = f.coeff(-(k as i64));
    }
    fft_plan(grid, true).process(&mut spectrum);
    let mut values: Vec<f64> = spectrum.iter().map(|c| c.re / TAU).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVE_CLIP_TOL {
        return Err(Error::UnresolvedDensity { min });
    }
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    GridDensity::normalized(values)
}

/// Coefficient-wise product, i.e. the convolution `a ⋆ b` on S¹.
pub fn circular_convolve(a: &FourierDensity, b: &FourierDensity) -> Result<FourierDensity> {
    if a.cutoff() != b.cutoff() {
        return Err(Error::CutoffMismatch {
            left: a.cutoff(),
            right: b.cutoff(),
        });
    }
    Ok(FourierDensity::from_raw(
        a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).collect(),
    ))
}

/// Grid-space convolution `(a ⋆ b)(θ_m) = (2π/M) Σ_n a(θ_m - θ_n) b(θ_n)`.
pub fn grid_convolve(a: &GridDensity, b: &GridDensity) -> Result<GridDensity> {
    if a.grid_size() != b.grid_size() {
        return Err(Error::invalid(
            "grid convolution",
            format!("grid sizes {} and {} differ", a.grid_size(), b.grid_size()),
        ));
    }
    let mut values = cyclic_convolve(a.values(), b.values(), a.cell_width());
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    GridDensity::normalized(values)
}

/// Number of periodic images `|j| ≤ J` summed for the wrapped normal.
fn wrapped_normal_images(sigma2: f64) -> i64 {
    (6.0 * sigma2.sqrt() / TAU).ceil() as i64 + 2
}

pub fn wrapped_normal_density(theta: f64, sigma2: f64) -> f64 {
    let images = wrapped_normal_images(sigma2);
    let norm = 1.0 / (TAU * sigma2).sqrt();
    let x = wrap_angle(theta + PI) - PI;
    (-images..=images)
        .map(|j| {
            let y = x + TAU * j as f64;
            (-y * y / (2.0 * sigma2)).exp()
        })
        .sum::<f64>()
        * norm
}

/// Number of trapezoid nodes for von Mises integrals up to mode `k`.
fn von_mises_nodes(kappa: f64, k: u64) -> usize {
    (2 * (k as usize + 40 + (10.0 * kappa.sqrt()).ceil() as usize)).max(64)
}

/// `I_k(κ)/I_0(κ)`. The integrand is periodic and analytic, so the
/// trapezoid rule converges geometrically; the node count keeps the
/// aliased mode `n - k` negligible.
fn von_mises_coeff(kappa: f64, k: i64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if kappa == 0.0 {
        return 0.0;
    }
    let k = k.unsigned_abs();
    let n = von_mises_nodes(kappa, k);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..n {
        let t = TAU * j as f64 / n as f64;
        let w = (kappa * (t.cos() - 1.0)).exp();
        num += w * (k as f64 * t).cos();
        den += w;
    }
    num / den
}

/// `e^{-κ} I_0(κ)`.
fn von_mises_scaled_i0(kappa: f64) -> f64 {
    let n = von_mises_nodes(kappa, 0);
    (0..n)
        .map(|j| (kappa * ((TAU * j as f64 / n as f64).cos() - 1.0)).exp())
        .sum::<f64>()
        / n as f64
}

/// A symmetric noise law `g` on S¹.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Uniform,
    WrappedNormal {
        #[serde(alias = "param")]
        sigma2: f64,
    },
    VonMises {
        #[serde(alias = "param")]
        kappa: f64,
    },
    /// Grid values, piecewise constant per centered cell.
    Tabulated { values: Vec<f64> },
}

impl NoiseSpec {
    pub fn wrapped_normal(sigma2: f64) -> Result<Self> {
        NoiseSpec::WrappedNormal { sigma2 }.validated()
    }

    pub fn von_mises(kappa: f64) -> Result<Self> {
        NoiseSpec::VonMises { kappa }.validated()
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        NoiseSpec::Tabulated { values }.validated()
    }

    /// Tabulates another law on an `M`-point grid.
    pub fn tabulate(&self, grid: usize) -> Result<Self> {
        NoiseSpec::tabulated(self.grid_density(grid)?.into_values())
    }

    /// Checks parameters and evenness; tabulated values come back
    /// normalized to unit mass.
    pub fn validated(self) -> Result<Self> {
        match self {
            NoiseSpec::Uniform => Ok(self),
            NoiseSpec::WrappedNormal { sigma2 } => {
                if sigma2 > 0.0 && sigma2.is_finite() {
                    Ok(self)
                } else {
                    Err(Error::invalid("sigma2", format!("{sigma2} must be > 0")))
                }
            }
            NoiseSpec::VonMises { kappa } => {
                if kappa >= 0.0 && kappa.is_finite() {
                    Ok(self)
                } else {
                    Err(Error::invalid("kappa", format!("{kappa} must be >= 0")))
                }
            }
            NoiseSpec::Tabulated { values } => {
                let d = GridDensity::normalized(values)?;
                let m = d.grid_size();
                let scale = d.values().iter().copied().fold(0.0, f64::max);
                for i in 1..m {
                    if (d.values()[i] - d.values()[m - i]).abs() > 1e-12 * scale {
                        return Err(Error::invalid(
                            "tabulated noise",
                            format!("not even: g[{i}] != g[{}]", m - i),
                        ));
                    }
                }
                Ok(NoiseSpec::Tabulated {
                    values: d.into_values(),
                })
            }
        }
    }

    /// `ĝ(k)`, real by evenness.
    pub fn coeff(&self, k: i64) -> f64 {
        match self {
            NoiseSpec::Uniform => (k == 0) as u8 as f64,
            NoiseSpec::WrappedNormal { sigma2 } => (-(k * k) as f64 * sigma2 / 2.0).exp(),
            NoiseSpec::VonMises { kappa } => von_mises_coeff(*kappa, k),
            NoiseSpec::Tabulated { values } => {
                if k == 0 {
                    return 1.0;
                }
                let m = values.len();
                let w = TAU / m as f64;
                let dft: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * w * (k as f64 * i as f64 * w).cos())
                    .sum();
                // cell average of e^{-ikθ} over a centered cell of width w
                let x = k as f64 * w / 2.0;
                dft * x.sin() / x
            }
        }
    }

    pub fn fourier(&self, cutoff: usize) -> FourierDensity {
        let coeffs = (0..=cutoff as i64)
            .map(|k| Complex64::new(self.coeff(k), 0.0))
            .collect();
        FourierDensity::from_raw(coeffs)
    }

    /// Density with respect to `dθ` at `theta`.
    pub fn density(&self, theta: f64) -> f64 {
        match self {
            NoiseSpec::Uniform => 1.0 / TAU,
            NoiseSpec::WrappedNormal { sigma2 } => wrapped_normal_density(theta, *sigma2),
            NoiseSpec::VonMises { kappa } => {
                (kappa * (theta.cos() - 1.0)).exp() / (TAU * von_mises_scaled_i0(*kappa))
            }
            NoiseSpec::Tabulated { values } => {
                let m = values.len();
                let cell = ((wrap_angle(theta) * m as f64 / TAU) + 0.5).floor() as usize % m;
                values[cell]
            }
        }
    }

    /// The law on an `M`-point grid. Tabulated noise requires the same `M`.
    pub fn grid_density(&self, grid: usize) -> Result<GridDensity> {
        match self {
            NoiseSpec::Uniform => GridDensity::uniform(grid),
            NoiseSpec::Tabulated { values } => {
                if values.len() != grid {
                    return Err(Error::invalid(
                        "tabulated noise",
                        format!("tabulated on {} points, requested {grid}", values.len()),
                    ));
                }
                GridDensity::normalized(values.clone())
            }
            NoiseSpec::VonMises { kappa } => {
                let kappa = *kappa;
                GridDensity::from_fn(grid, |t| (kappa * (t.cos() - 1.0)).exp())
            }
            NoiseSpec::WrappedNormal { sigma2 } => GridDensity::wrapped_normal(grid, 0.0, *sigma2),
        }
    }

    pub fn sampler(&self) -> Result<NoiseSampler> {
        Ok(match self.clone().validated()? {
            NoiseSpec::Uniform => NoiseSampler::Uniform,
            NoiseSpec::WrappedNormal { sigma2 } => {
                NoiseSampler::WrappedNormal(Normal::new(0.0, sigma2.sqrt()).map_err(|e| {
                    Error::invalid("sigma2", e.to_string())
                })?)
            }
            NoiseSpec::VonMises { kappa } => NoiseSampler::VonMises(VonMisesSampler::new(kappa)),
            NoiseSpec::Tabulated { values } => {
                NoiseSampler::Tabulated(GridDensity::normalized(values)?.sampler())
            }
        })
    }
}

/// Heat kernel on S¹ at time `t`: wrapped normal of variance `2t`, whose
/// coefficients are `e^{-k² t}`.
pub fn heat_kernel_spec(t: f64) -> Result<NoiseSpec> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("heat kernel time", format!("{t} must be > 0")));
    }
    NoiseSpec::wrapped_normal(2.0 * t)
}

#[derive(Clone, Debug)]
pub enum NoiseSampler {
    Uniform,
    WrappedNormal(Normal<f64>),
    VonMises(VonMisesSampler),
    Tabulated(GridSampler),
}

impl NoiseSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        match self {
            NoiseSampler::Uniform => Angle::new(rng.random::<f64>() * TAU),
            NoiseSampler::WrappedNormal(normal) => Angle::new(normal.sample(rng)),
            NoiseSampler::VonMises(vm) => vm.sample(rng),
            NoiseSampler::Tabulated(grid) => grid.sample(rng),
        }
    }
}

/// Best–Fisher rejection sampler, centered at 0.
#[derive(Clone, Debug)]
pub struct VonMisesSampler {
    kappa: f64,
    r: f64,
}

impl VonMisesSampler {
    fn new(kappa: f64) -> Self {
        let r = if kappa > 0.0 {
            let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
            let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
            (1.0 + rho * rho) / (2.0 * rho)
        } else {
            0.0
        };
        VonMisesSampler { kappa, r }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        if self.kappa == 0.0 {
            return Angle::new(rng.random::<f64>() * TAU);
        }
        if self.kappa > 1e6 {
            let normal = Normal::new(0.0, 1.0 / self.kappa.sqrt()).expect("finite kappa");
            return Angle::new(normal.sample(rng));
        }
        let f = loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + self.r * z) / (self.r + z);
            let c = self.kappa * (self.r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                break f;
            }
        };
        let theta = f.clamp(-1.0, 1.0).acos();
        if rng.random::<bool>() {
            Angle::new(theta)
        } else {
            Angle::new(-theta)
        }
    }
}

/// One draw from `spec`. Builds the sampler each call; hold a
/// [`NoiseSampler`] for repeated draws.
pub fn sample_noise<R: Rng + ?Sized>(spec: &NoiseSpec, rng: &mut R) -> Result<Angle> {
    Ok(spec.sampler()?.sample(rng))
}
