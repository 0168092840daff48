//! Invariant pair correlations of the copying (CL) dynamics.
//!
//! In the stationary state the two-particle marginal depends only on the
//! difference of the angles, `F₂(v₁, v₂) = 𝓕(v₁ - v₂)`. Everything here is in
//! Fourier space, `k = 0..=K`; the noise is even, so all coefficients are real.

use num_complex::Complex64;
use serde::Serialize;

use crate::circle::{density_from_coeffs, FourierDensity, GridDensity, NoiseSpec};
use crate::{Error, Result};

/// Real Fourier coefficients of a pair-difference law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationProfile {
    /// Particle count, `None` for the scaling limit.
    pub n: Option<usize>,
    pub values: Vec<f64>,
}

impl CorrelationProfile {
    pub fn cutoff(&self) -> usize {
        self.values.len() - 1
    }

    /// `𝓕` on a grid.
    pub fn to_grid(&self, grid: usize) -> Result<GridDensity> {
        let coeffs = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        density_from_coeffs(&FourierDensity::new(coeffs)?, grid)
    }
}

fn check_n(n: usize, min: usize, what: &'static str) -> Result<()> {
    if n < min {
        return Err(Error::invalid(what, format!("N = {n}, need N >= {min}")));
    }
    Ok(())
}

fn noise_coeffs(g: &NoiseSpec, cutoff: usize) -> Vec<f64> {
    (0..=cutoff).map(|k| g.coeff(k as i64)).collect()
}

/// `𝓕̂(k) = ĝ/(N-1) · [1 - (N-2)/(N-1) ĝ]⁻¹` for a given list of `ĝ(k)`.
pub fn closed_from_coeffs(g_hat: &[f64], n: usize) -> Result<CorrelationProfile> {
    check_n(n, 2, "particle count")?;
    let n1 = (n - 1) as f64;
    let r = (n - 2) as f64 / n1;
    let mut values: Vec<f64> = g_hat.iter().map(|&g| g / n1 / (1.0 - r * g)).collect();
    if let Some(v0) = values.first_mut() {
        *v0 = 1.0;
    }
    Ok(CorrelationProfile { n: Some(n), values })
}

pub fn pair_correlation_closed(g: &NoiseSpec, n: usize, cutoff: usize) -> Result<CorrelationProfile> {
    closed_from_coeffs(&noise_coeffs(g, cutoff), n)
}

/// Same quantity written as `ĝ [1 - (N-2)(ĝ - 1)]⁻¹`, the form used for the
/// large-`N` limit.
pub fn pair_correlation_scaled(g: &NoiseSpec, n: usize, cutoff: usize) -> Result<CorrelationProfile> {
    check_n(n, 2, "particle count")?;
    let m = (n - 2) as f64;
    let values = noise_coeffs(g, cutoff)
        .into_iter()
        .enumerate()
        .map(|(k, gk)| if k == 0 { 1.0 } else { gk / (1.0 - m * (gk - 1.0)) })
        .collect();
    Ok(CorrelationProfile { n: Some(n), values })
}

/// Tail `(1/(N-2)) Σ_{ℓ>L} rˡ` of the convolution-power series, `r = (N-2)/(N-1)`.
/// Bounds the truncation error because `|ĝ| ≤ 1`.
pub fn series_tail_bound(n: usize, terms: usize) -> f64 {
    let m = (n - 2) as f64;
    let r = m / (n - 1) as f64;
    r.powi(terms as i32 + 1) / (1.0 - r) / m
}

/// Smallest `L` whose tail bound is below `tol`.
pub fn series_terms_for_tail(n: usize, tol: f64) -> usize {
    let mut lo = 1usize;
    while series_tail_bound(n, lo) >= tol {
        lo *= 2;
    }
    let mut hi = lo;
    lo /= 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if series_tail_bound(n, mid) < tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.max(1)
}

/// Partial sum `(1/(N-2)) Σ_{ℓ=1}^{L} (r ĝ(k))ˡ`, returned with its tail bound.
pub fn pair_correlation_series(
    g: &NoiseSpec,
    n: usize,
    cutoff: usize,
    terms: usize,
) -> Result<(CorrelationProfile, f64)> {
    check_n(n, 3, "particle count for the series form")?;
    if terms == 0 {
        return Err(Error::invalid("series length", "L must be >= 1"));
    }
    let m = (n - 2) as f64;
    let r = m / (n - 1) as f64;
    let values = noise_coeffs(g, cutoff)
        .into_iter()
        .map(|gk| {
            let x = r * gk;
            let mut term = 1.0;
            let mut sum = 0.0;
            for _ in 0..terms {
                term *= x;
                sum += term;
            }
            sum / m
        })
        .collect();
    Ok((CorrelationProfile { n: Some(n), values }, series_tail_bound(n, terms)))
}

/// `γ_N(k) = (N-2)(ĝ_N(k) - 1)` for a noise family indexed by `N`.
pub fn gamma_from_noise(
    family: impl Fn(usize) -> Result<NoiseSpec>,
    n: usize,
    cutoff: usize,
) -> Result<Vec<f64>> {
    check_n(n, 3, "particle count")?;
    let g = family(n)?;
    let m = (n - 2) as f64;
    Ok((0..=cutoff)
        .map(|k| if k == 0 { 0.0 } else { m * (g.coeff(k as i64) - 1.0) })
        .collect())
}

/// Noise whose coefficients are `e^{-k²/N}`: the heat kernel at time `1/N`.
pub fn heat_kernel_family(n: usize) -> Result<NoiseSpec> {
    NoiseSpec::wrapped_normal(2.0 / n as f64)
}

/// `𝓕̂_∞(k) = 1/(1 - γ(k))`.
pub fn limit_profile(gamma: &[f64]) -> Result<CorrelationProfile> {
    if let Some(bad) = gamma.iter().find(|g| !(**g <= 0.0)) {
        return Err(Error::invalid("gamma", format!("needs gamma <= 0, got {bad}")));
    }
    Ok(CorrelationProfile {
        n: None,
        values: gamma.iter().map(|g| 1.0 / (1.0 - g)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization_and_uniform_noise() {
        for n in [2, 3, 10, 1000] {
            let p = pair_correlation_closed(&NoiseSpec::Uniform, n, 8).unwrap();
            assert_eq!(p.values[0], 1.0);
            assert!(p.values[1..].iter().all(|v| *v == 0.0));
        }
        assert!(pair_correlation_closed(&NoiseSpec::Uniform, 1, 8).is_err());
        // k=0 is unity even before the override
        let raw: f64 = 1.0 / 9.0 / (1.0 - 8.0 / 9.0);
        assert!((raw - 1.0).abs() < 1e-14);
    }

    #[test]
    fn three_particles_wrapped_normal() {
        let g = NoiseSpec::wrapped_normal(0.5).unwrap();
        let p = pair_correlation_closed(&g, 3, 4).unwrap();
        let a = (-0.25f64).exp();
        assert!((p.values[1] - 0.5 * a / (1.0 - 0.5 * a)).abs() < 1e-15);
        let (s, tail) = pair_correlation_series(&g, 3, 4, 200).unwrap();
        assert!(tail < 1e-50);
        for k in 0..=4 {
            let gk = g.coeff(k as i64) / 2.0;
            let geometric = gk / (1.0 - gk);
            assert!((s.values[k] - geometric).abs() < 1e-15);
            assert!((s.values[k] - p.values[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn series_weights_sum_to_one_for_flat_coefficient() {
        for n in [3, 5, 20] {
            let l = series_terms_for_tail(n, 1e-13);
            let (s, tail) = pair_correlation_series(&NoiseSpec::wrapped_normal(1e-300).unwrap(), n, 0, l).unwrap();
            assert!((s.values[0] - 1.0).abs() <= tail + 1e-13);
        }
        assert!(pair_correlation_series(&NoiseSpec::Uniform, 2, 4, 10).is_err());
        assert!(pair_correlation_series(&NoiseSpec::Uniform, 5, 4, 0).is_err());
    }

    #[test]
    fn series_converges_to_closed_form() {
        let g = NoiseSpec::wrapped_normal(0.2).unwrap();
        let l = series_terms_for_tail(10, 1e-10);
        assert!(series_tail_bound(10, l) < 1e-10);
        assert!(series_tail_bound(10, l - 1) >= 1e-10);
        let (s, _) = pair_correlation_series(&g, 10, 12, l).unwrap();
        let c = pair_correlation_closed(&g, 10, 12).unwrap();
        for (a, b) in s.values.iter().zip(&c.values).skip(1) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_form_is_the_same_map() {
        let g = NoiseSpec::von_mises(2.0).unwrap();
        for n in [2, 3, 7, 500] {
            let a = pair_correlation_closed(&g, n, 10).unwrap();
            let b = pair_correlation_scaled(&g, n, 10).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn heat_kernel_gamma() {
        let n = 10_000;
        let gamma = gamma_from_noise(heat_kernel_family, n, 3).unwrap();
        assert_eq!(gamma[0], 0.0);
        // (N-2)(e^{-1/N} - 1) = -1 + 2/N + 1/(2N) + O(N⁻²)
        let dev = gamma[1] + 1.0;
        assert!((dev - 2.5e-4).abs() < 1e-7, "{dev}");
        assert!(dev.abs() < 3e-4);
        for k in 1..=3 {
            let kk = (k * k) as f64;
            assert!((gamma[k] + kk).abs() < 3.0 * kk * kk / n as f64);
        }
    }

    #[test]
    fn fixed_noise_gamma_diverges() {
        let g = NoiseSpec::wrapped_normal(0.5).unwrap();
        let fixed = |_n: usize| Ok(g.clone());
        let a = gamma_from_noise(fixed, 1_000, 1).unwrap()[1];
        let b = gamma_from_noise(fixed, 10_000, 1).unwrap()[1];
        assert!((b / a - 9998.0 / 998.0).abs() < 1e-9);
        let far = pair_correlation_closed(&g, 1_000_000, 3).unwrap();
        assert!(far.values[1..].iter().all(|v| *v < 1e-5));
    }

    #[test]
    fn lorentzian_limit() {
        let gamma: Vec<f64> = (0..=5).map(|k| -((k * k) as f64)).collect();
        let p = limit_profile(&gamma).unwrap();
        assert_eq!(p.n, None);
        for k in 0..=5 {
            assert!((p.values[k] - 1.0 / (1.0 + (k * k) as f64)).abs() < 1e-15);
        }
        let flat = limit_profile(&[0.0; 4]).unwrap();
        assert!(flat.values.iter().all(|v| *v == 1.0));
        assert!(limit_profile(&[0.0, 0.5]).is_err());
    }

    #[test]
    fn finite_n_error_ratio() {
        let err = |n| (pair_correlation_scaled(&heat_kernel_family(n).unwrap(), n, 1).unwrap().values[1] - 0.5).abs();
        let ratio = err(1_000) / err(10_000);
        assert!((8.0..=12.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn profile_on_grid_is_a_density() {
        let p = pair_correlation_closed(&NoiseSpec::wrapped_normal(0.5).unwrap(), 5, 20).unwrap();
        let d = p.to_grid(128).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert!(d.values().iter().all(|v| *v >= 0.0));
    }

    proptest! {
        #[test]
        fn monotone_rational_map(g in 0.0f64..0.999, n in 2usize..5000) {
            let dg = 1e-4;
            let a = closed_from_coeffs(&[1.0, g], n).unwrap().values[1];
            let b = closed_from_coeffs(&[1.0, g + dg], n).unwrap().values[1];
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b > a);
        }

        #[test]
        fn series_within_tail(sigma2 in 0.01f64..3.0, n in 3usize..200, l in 1usize..400) {
            let g = NoiseSpec::wrapped_normal(sigma2).unwrap();
            let (s, tail) = pair_correlation_series(&g, n, 6, l).unwrap();
            let c = pair_correlation_closed(&g, n, 6).unwrap();
            for (a, b) in s.values.iter().zip(&c.values).skip(1) {
                prop_assert!((a - b).abs() <= tail * (1.0 + 1e-9) + 1e-15);
            }
        }
    }
}
