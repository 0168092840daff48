//! Ensemble estimators and chaos metrics.
//!
//! For each replica `r` with angles `θ_1..θ_N` let `S_r(k) = Σ_j e^{-ikθ_j}`.
//! The one-particle estimate is `S_r(k)/N`; the pair-difference estimate,
//! averaged over ordered pairs `i ≠ j`, is `(|S_r(k)|² - N) / (N(N-1))`.
//! Standard errors are across replicas only: within a replica the particles
//! are dependent.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::circle::{Angle, FourierDensity, GridDensity};
use crate::models::{replica_rng, Trajectory};
use crate::{Error, Result};

pub const DEFAULT_DIAG_CUTOFF: usize = 16;

/// Estimates at one checkpoint, modes `k = 0..=K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointSummary {
    pub t: f64,
    pub f1: Vec<Complex64>,
    pub f1_se: Vec<f64>,
    pub pair: Vec<f64>,
    pub pair_se: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub replicas: usize,
    pub particles: usize,
    pub cutoff: usize,
    pub checkpoints: Vec<CheckpointSummary>,
}

/// `S(k)` for `k = 0..=K` by power recurrence.
fn power_sums(angles: &[Angle], cutoff: usize) -> Vec<Complex64> {
    let mut sums = vec![Complex64::new(0.0, 0.0); cutoff + 1];
    for a in angles {
        let step = a.character(1);
        let mut z = Complex64::new(1.0, 0.0);
        for s in sums.iter_mut() {
            *s += z;
            z *= step;
        }
    }
    sums
}

fn mean_and_se<T>(xs: &[T], norm2: impl Fn(&T, &T) -> f64, mean: T) -> (T, f64) {
    let r = xs.len();
    if r < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = xs.iter().map(|x| norm2(x, &mean)).sum();
    (mean, (ss / (r - 1) as f64).sqrt() / (r as f64).sqrt())
}

/// Summary of one checkpoint from per-replica angle sets.
pub fn summarize_angles(t: f64, ensemble: &[&[Angle]], cutoff: usize) -> Result<CheckpointSummary> {
    let n = match ensemble.first() {
        None => return Err(Error::EmptyEnsemble("no replicas")),
        Some(a) => a.len(),
    };
    if n < 2 || ensemble.iter().any(|a| a.len() != n) {
        return Err(Error::invalid(
            "ensemble",
            "replicas must share a particle count N >= 2",
        ));
    }
    let sums: Vec<Vec<Complex64>> = ensemble.par_iter().map(|a| power_sums(a, cutoff)).collect();
    let nf = n as f64;
    let r = ensemble.len() as f64;
    let mut f1 = Vec::with_capacity(cutoff + 1);
    let mut f1_se = Vec::with_capacity(cutoff + 1);
    let mut pair = Vec::with_capacity(cutoff + 1);
    let mut pair_se = Vec::with_capacity(cutoff + 1);
    for k in 0..=cutoff {
        let xs: Vec<Complex64> = sums.iter().map(|s| s[k] / nf).collect();
        let ys: Vec<f64> = sums
            .iter()
            .map(|s| (s[k].norm_sqr() - nf) / (nf * (nf - 1.0)))
            .collect();
        let mx = xs.iter().sum::<Complex64>() / r;
        let my = ys.iter().sum::<f64>() / r;
        let (mx, sx) = mean_and_se(&xs, |a, b| (a - b).norm_sqr(), mx);
        let (my, sy) = mean_and_se(&ys, |a, b| (a - b).powi(2), my);
        f1.push(mx);
        f1_se.push(sx);
        pair.push(my);
        pair_se.push(sy);
    }
    // exact by construction
    f1[0] = Complex64::new(1.0, 0.0);
    pair[0] = 1.0;
    Ok(CheckpointSummary {
        t,
        f1,
        f1_se,
        pair,
        pair_se,
    })
}

/// Per-checkpoint summaries of circle-model trajectories.
pub fn summarize(trajectories: &[Trajectory], cutoff: usize) -> Result<EnsembleSummary> {
    let first = trajectories
        .first()
        .ok_or(Error::EmptyEnsemble("no trajectories"))?;
    let times: Vec<f64> = first.snapshots.iter().map(|s| s.t).collect();
    let mut checkpoints = Vec::with_capacity(times.len());
    for (c, &t) in times.iter().enumerate() {
        let ensemble: Vec<&[Angle]> = trajectories
            .iter()
            .map(|tr| {
                tr.snapshots
                    .get(c)
                    .and_then(|s| s.state.as_circle())
                    .map(|s| s.angles())
                    .ok_or(Error::StateMismatch("summaries need circle snapshots"))
            })
            .collect::<Result<_>>()?;
        checkpoints.push(summarize_angles(t, &ensemble, cutoff)?);
    }
    Ok(EnsembleSummary {
        replicas: trajectories.len(),
        particles: first.final_state.len(),
        cutoff,
        checkpoints,
    })
}

/// `D = Σ_{0<|k|≤K} |Ĉ(k) - |f̂(k)|²|²`.
pub fn chaos_distance(s: &CheckpointSummary, f: &FourierDensity, cutoff: usize) -> Result<f64> {
    let have = s.pair.len() - 1;
    if cutoff > have || cutoff > f.cutoff() {
        return Err(Error::CutoffMismatch {
            left: have.min(f.cutoff()),
            right: cutoff,
        });
    }
    Ok(2.0
        * (1..=cutoff)
            .map(|k| (s.pair[k] - f.coeff(k as i64).norm_sqr()).powi(2))
            .sum::<f64>())
}

/// `z(k, t) = |f̂₁(k, t) - f̂_kin(k, t)| / SE(k, t)` for `k = 1..=K`.
pub fn compare_flow(
    s: &EnsembleSummary,
    kinetic: &[FourierDensity],
    cutoff: usize,
) -> Result<Vec<Vec<f64>>> {
    if kinetic.len() != s.checkpoints.len() {
        return Err(Error::invalid(
            "kinetic solution",
            format!(
                "{} solution times for {} checkpoints",
                kinetic.len(),
                s.checkpoints.len()
            ),
        ));
    }
    if cutoff > s.cutoff {
        return Err(Error::CutoffMismatch {
            left: s.cutoff,
            right: cutoff,
        });
    }
    Ok(s.checkpoints
        .iter()
        .zip(kinetic)
        .map(|(c, f)| {
            (1..=cutoff)
                .map(|k| (c.f1[k] - f.coeff(k as i64)).norm() / c.f1_se[k])
                .collect()
        })
        .collect())
}

/// Chaos distances of `draws` independent ensembles of `replicas × particles`
/// i.i.d. samples from `f`, against `f`'s own coefficients.
pub fn iid_noise_floor(
    f: &GridDensity,
    particles: usize,
    replicas: usize,
    cutoff: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let fhat = crate::circle::fourier_coeffs(f, cutoff)?;
    let sampler = f.sampler();
    (0..draws as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = replica_rng(seed, b);
            let ensemble: Vec<Vec<Angle>> = (0..replicas)
                .map(|_| (0..particles).map(|_| sampler.sample(&mut rng)).collect())
                .collect();
            let refs: Vec<&[Angle]> = ensemble.iter().map(Vec::as_slice).collect();
            chaos_distance(&summarize_angles(0.0, &refs, cutoff)?, &fhat, cutoff)
        })
        .collect()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyEnsemble("quantile of no values"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("quantile", format!("{q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::{fourier_coeffs, NoiseSpec};
    use crate::invariant::pair_correlation_closed;
    use rand::Rng;
    use crate::models::{sample_initial_chaotic, EnsembleRun, ModelSpec, State};

    fn iid_ensemble(f: &GridDensity, n: usize, r: usize, seed: u64) -> Vec<Vec<Angle>> {
        let sampler = f.sampler();
        (0..r as u64)
            .map(|i| {
                let mut rng = replica_rng(seed, i);
                (0..n).map(|_| sampler.sample(&mut rng)).collect()
            })
            .collect()
    }

    /// Rotates each replica rigidly by its own random angle.
    fn rotate_replicas<R: Rng + ?Sized>(ensemble: &[Vec<Angle>], rng: &mut R) -> Vec<Vec<Angle>> {
        ensemble
            .iter()
            .map(|a| {
                let phi = Angle::new(rng.random::<f64>() * std::f64::consts::TAU);
                a.iter().map(|&x| x + phi).collect()
            })
            .collect()
    }

    fn refs(e: &[Vec<Angle>]) -> Vec<&[Angle]> {
        e.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn aligned_ensemble() {
        let e = vec![vec![Angle::ZERO; 10]; 5];
        let s = summarize_angles(0.0, &refs(&e), 8).unwrap();
        for k in 0..=8 {
            assert!((s.f1[k] - 1.0).norm() < 1e-14);
            assert!((s.pair[k] - 1.0).abs() < 1e-12);
        }
        let d = chaos_distance(&s, &FourierDensity::uniform(8), 8).unwrap();
        assert!((d - 16.0).abs() < 1e-10);
        assert!(summarize_angles(0.0, &[], 8).is_err());
    }

    #[test]
    fn iid_uniform_pairs_vanish() {
        let u = GridDensity::uniform(256).unwrap();
        let e = iid_ensemble(&u, 100, 100, 1);
        let s = summarize_angles(0.0, &refs(&e), 4).unwrap();
        assert!(s.pair[1].abs() < 4.0 * s.pair_se[1]);
        for k in 1..=4 {
            assert!(s.f1[k].norm() <= 1.0 && s.pair[k].abs() <= 1.0);
        }
    }

    #[test]
    fn iid_wrapped_normal_product_identity() {
        let f = GridDensity::wrapped_normal(1024, 0.0, 0.5).unwrap();
        let e = iid_ensemble(&f, 100, 200, 2);
        let s = summarize_angles(0.0, &refs(&e), 4).unwrap();
        let target = (-0.25f64).exp().powi(2);
        assert!((s.pair[1] - target).abs() < 4.0 * s.pair_se[1]);
    }

    #[test]
    fn standard_errors_scale() {
        let f = GridDensity::wrapped_normal(1024, 0.0, 0.5).unwrap();
        let small = summarize_angles(0.0, &refs(&iid_ensemble(&f, 50, 400, 3)), 2).unwrap();
        let large = summarize_angles(0.0, &refs(&iid_ensemble(&f, 50, 1600, 4)), 2).unwrap();
        for (a, b) in [(small.f1_se[1], large.f1_se[1]), (small.pair_se[1], large.pair_se[1])] {
            let ratio = a / b;
            assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
        }
    }

    #[test]
    fn rotation_invariance_of_distance() {
        let f = GridDensity::wrapped_normal(512, 0.0, 0.5).unwrap();
        let e = iid_ensemble(&f, 30, 50, 5);
        let mut rng = replica_rng(9, 0);
        let rotated = rotate_replicas(&e, &mut rng);
        let a = summarize_angles(0.0, &refs(&e), 6).unwrap();
        let b = summarize_angles(0.0, &refs(&rotated), 6).unwrap();
        let target = fourier_coeffs(&f, 6).unwrap();
        let da = chaos_distance(&a, &target, 6).unwrap();
        let db = chaos_distance(&b, &target, 6).unwrap();
        assert!((da - db).abs() < 1e-12);
        assert!(da >= 0.0);
    }

    #[test]
    fn noise_floor_covers_fresh_iid_sample() {
        let f = GridDensity::wrapped_normal(1024, 0.0, 0.5).unwrap();
        let floor = iid_noise_floor(&f, 40, 60, 8, 100, 11).unwrap();
        let q95 = quantile(&floor, 0.95).unwrap();
        let e = iid_ensemble(&f, 40, 60, 12345);
        let s = summarize_angles(0.0, &refs(&e), 8).unwrap();
        let d = chaos_distance(&s, &fourier_coeffs(&f, 8).unwrap(), 8).unwrap();
        assert!(d < q95, "{d} vs {q95}");
        assert_eq!(floor, iid_noise_floor(&f, 40, 60, 8, 100, 11).unwrap());
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 4.0);
        assert!((quantile(&v, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!(quantile(&[], 0.5).is_err());
    }

    fn cl_run(n: usize, r: usize, rate_check: &[f64], seed: u64) -> EnsembleSummary {
        let model = ModelSpec::cl(NoiseSpec::Uniform);
        let f0 = GridDensity::wrapped_normal(1024, 0.0, 0.5).unwrap();
        let run = EnsembleRun {
            model: &model,
            replicas: r,
            seed,
            t_end: *rate_check.last().unwrap(),
            checkpoints: rate_check,
            log_cap: 0,
        };
        let trajs = run
            .run(|rng| Ok(State::Circle(sample_initial_chaotic(&f0, n, rng)?)))
            .unwrap();
        summarize(&trajs, 4).unwrap()
    }

    #[test]
    fn flow_z_scores_distinguish_rates() {
        let times = [0.0, 1.0];
        let s = cl_run(1000, 100, &times, 21);
        let f0 = fourier_coeffs(&GridDensity::wrapped_normal(1024, 0.0, 0.5).unwrap(), 4).unwrap();
        let sol = |rate: f64| -> Vec<FourierDensity> {
            let cfg = crate::kinetic::KineticConfig {
                rate_factor: rate,
                dt: 0.05 / rate,
                ..Default::default()
            };
            times
                .iter()
                .map(|&t| crate::kinetic::cl_evolve(&f0, &NoiseSpec::Uniform, t, &cfg).unwrap())
                .collect()
        };
        let z2 = compare_flow(&s, &sol(2.0), 4).unwrap();
        assert!(z2[0].iter().all(|z| *z < 4.0));
        assert!(z2[1][0] < 4.0, "{}", z2[1][0]);
        let z1 = compare_flow(&s, &sol(1.0), 4).unwrap();
        assert!(z1[1][0] > 10.0, "{}", z1[1][0]);
        assert!(compare_flow(&s, &sol(2.0)[..1], 4).is_err());
    }

    #[test]
    fn stationary_cl_pairs_match_invariant_profile() {
        let g = NoiseSpec::wrapped_normal(0.5).unwrap();
        let model = ModelSpec::cl(g.clone());
        let n = 5;
        let run = EnsembleRun {
            model: &model,
            replicas: 2000,
            seed: 33,
            t_end: 15.0,
            checkpoints: &[15.0],
            log_cap: 0,
        };
        let u = GridDensity::uniform(256).unwrap();
        let trajs = run
            .run(|rng| Ok(State::Circle(sample_initial_chaotic(&u, n, rng)?)))
            .unwrap();
        let s = summarize(&trajs, 4).unwrap();
        let c = &s.checkpoints[0];
        let prof = pair_correlation_closed(&g, n, 4).unwrap();
        for k in 1..=4 {
            assert!((c.pair[k] - prof.values[k]).abs() < 4.0 * c.pair_se[k], "k={k}");
        }
        let d = chaos_distance(c, &FourierDensity::uniform(4), 4).unwrap();
        let predicted: f64 = 2.0 * prof.values[1..].iter().map(|v| v * v).sum::<f64>();
        assert!((d - predicted).abs() < 0.1 * predicted, "{d} vs {predicted}");
    }
}
