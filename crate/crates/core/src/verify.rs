//! Executable acceptance scenarios.
//!
//! Each scenario runs end to end from a seed and reports its assertions as
//! [`Check`]s with the measured value, the bound and the verdict. Reports are
//! pure functions of the seed, so their JSON serialization is reproducible
//! byte for byte.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::circle::{
    density_from_coeffs, fourier_coeffs, FourierDensity, GridDensity, NoiseSpec,
};
use crate::diagnostics::{
    chaos_distance, compare_flow, iid_noise_floor, quantile, summarize, DEFAULT_DIAG_CUTOFF,
};
use crate::invariant::{
    closed_from_coeffs, heat_kernel_family, pair_correlation_closed, pair_correlation_scaled,
    pair_correlation_series, series_terms_for_tail,
};
use crate::kinetic::{bdg_evolve, bdg_gain, bdg_gain_quadrature, cl_evolve, KineticConfig};
use crate::models::{
    kac_initial_state, replica_rng, simulate, CircleState, EnsembleRun, ModelSpec, State,
};
use crate::oracle::{
    build_transition, marginal, probability_coeffs, stationary, DEFAULT_MAX_ITER,
    DEFAULT_STATE_CAP,
};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_240_607;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, bound: f64) -> Self {
        let passed = match relation {
            Relation::Below => measured < bound,
            Relation::Above => measured > bound,
            Relation::AtMost => measured <= bound,
            Relation::AtLeast => measured >= bound,
        };
        Check {
            name: name.into(),
            measured,
            relation,
            bound,
            passed,
        }
    }

    fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check::new(name, measured, Relation::Below, bound)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Scenario {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::A1,
        Scenario::A2,
        Scenario::A3,
        Scenario::A4,
        Scenario::A5,
        Scenario::A6,
        Scenario::A7,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Scenario::A1 => "invariant pair correlation vs exact grid chain",
            Scenario::A2 => "closed form vs convolution series",
            Scenario::A3 => "heat-kernel scaling limit",
            Scenario::A4 => "chaos distance decays in N",
            Scenario::A5 => "kinetic limit and rate arbitration (CL)",
            Scenario::A6 => "BDG kinetic consistency",
            Scenario::A7 => "structural invariants and determinism",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("scenario", format!("unknown scenario {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub title: String,
    pub seed: u64,
    pub passed: bool,
    /// Rate factor chosen by the CL arbitration, for scenarios that use it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_factor: Option<f64>,
    pub checks: Vec<Check>,
}

impl ScenarioReport {
    fn new(scenario: Scenario, seed: u64, checks: Vec<Check>, rate_factor: Option<f64>) -> Self {
        ScenarioReport {
            scenario,
            title: scenario.title().to_string(),
            seed,
            passed: checks.iter().all(|c| c.passed),
            rate_factor,
            checks,
        }
    }
}

pub fn run(scenario: Scenario, seed: u64) -> Result<ScenarioReport> {
    match scenario {
        Scenario::A1 => a1(seed),
        Scenario::A2 => a2(seed),
        Scenario::A3 => a3(seed),
        Scenario::A4 => a4(seed),
        Scenario::A5 => a5(seed),
        Scenario::A6 => a6(seed),
        Scenario::A7 => a7(seed),
    }
}

/// Sub-seed for a named stage of a scenario.
fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stage)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

// A1: N=3, M=16, tabulated wrapped normal.

const A1_PARTICLES: usize = 3;
const A1_GRID: usize = 16;
const A1_SIGMA2: f64 = 0.5;
const A1_MODES: usize = 4;

fn a1(seed: u64) -> Result<ScenarioReport> {
    let g = NoiseSpec::wrapped_normal(A1_SIGMA2)?.tabulate(A1_GRID)?;
    let tm = build_transition(&ModelSpec::cl(g.clone()), A1_PARTICLES, A1_GRID, DEFAULT_STATE_CAP)?;
    let st = stationary(&tm, 1e-12, DEFAULT_MAX_ITER)?;
    let pair = marginal(&st.density, &[0, 1])?;
    let measured = probability_coeffs(&pair.difference_law()?, A1_MODES);
    let g_hat: Vec<f64> = probability_coeffs(&g.grid_density(A1_GRID)?.probabilities(), A1_MODES)
        .iter()
        .map(|c| c.re)
        .collect();
    let predicted = closed_from_coeffs(&g_hat, A1_PARTICLES)?;
    let rel = max_of((1..=A1_MODES).map(|k| (measured[k].re - predicted.values[k]).abs() / predicted.values[k].abs()));
    let imag = max_of(measured.iter().map(|c| c.im.abs()));
    let one = marginal(&st.density, &[0])?;
    let flat = max_of(one.weights.iter().map(|w| (w - 1.0 / A1_GRID as f64).abs()));
    let checks = vec![
        Check::below("pair-difference coefficients, max relative error for 1<=k<=4", rel, 1e-2),
        Check::below("pair-difference coefficients, max imaginary part", imag, 1e-10),
        Check::below("one-particle marginal, max deviation from uniform", flat, 1e-8),
        Check::below("stationary residual (l1)", st.residual, 1e-12),
    ];
    Ok(ScenarioReport::new(Scenario::A1, seed, checks, None))
}

// A2: the two forms of the invariant profile.

fn a2(seed: u64) -> Result<ScenarioReport> {
    let mut checks = Vec::new();
    for n in [3, 10, 100] {
        for sigma2 in [0.1, 1.0] {
            let g = NoiseSpec::wrapped_normal(sigma2)?;
            let terms = series_terms_for_tail(n, 1e-10);
            let (series, tail) = pair_correlation_series(&g, n, 64, terms)?;
            let closed = pair_correlation_closed(&g, n, 64)?;
            let err = max_of(series.values.iter().zip(&closed.values).skip(1).map(|(a, b)| (a - b).abs()));
            checks.push(Check::below(format!("N={n} sigma2={sigma2}: tail bound"), tail, 1e-10));
            checks.push(Check::below(format!("N={n} sigma2={sigma2}: max |series - closed|, k<=64"), err, 1e-10));
        }
    }
    Ok(ScenarioReport::new(Scenario::A2, seed, checks, None))
}

// A3: e^{-k²/N} noise, error ratio between N=10³ and N=10⁴.

fn a3(seed: u64) -> Result<ScenarioReport> {
    let err = |n: usize, k: usize| -> Result<f64> {
        let p = pair_correlation_scaled(&heat_kernel_family(n)?, n, 3)?;
        Ok((p.values[k] - 1.0 / (1.0 + (k * k) as f64)).abs())
    };
    let mut checks = Vec::new();
    for k in 1..=3 {
        let ratio = err(1_000, k)? / err(10_000, k)?;
        checks.push(Check::new(format!("k={k}: error ratio N=1e3 / N=1e4"), ratio, Relation::AtLeast, 8.0));
        checks.push(Check::new(format!("k={k}: error ratio N=1e3 / N=1e4"), ratio, Relation::AtMost, 12.0));
    }
    Ok(ScenarioReport::new(Scenario::A3, seed, checks, None))
}

fn wn_state(n: usize, sampler: &crate::circle::NoiseSampler, rng: &mut rand_chacha::ChaCha8Rng) -> Result<State> {
    Ok(State::Circle(CircleState::new((0..n).map(|_| sampler.sample(rng)).collect())?))
}

fn wn_coeffs(sigma2: f64, cutoff: usize) -> Result<FourierDensity> {
    let coeffs = (0..=cutoff)
        .map(|k| Complex64::new((-sigma2 * (k * k) as f64 / 2.0).exp(), 0.0))
        .collect();
    FourierDensity::new(coeffs)
}

// A4: CL, wrapped-normal noise and data, t=1, R=400.

pub const A4_SIGMA2: f64 = 0.5;
pub const A4_REPLICAS: usize = 400;
pub const A4_SIZES: [usize; 3] = [50, 200, 800];
pub const A4_BOOTSTRAP: usize = 200;
const A4_SAMPLING_GRID: usize = 1024;

fn a4(seed: u64) -> Result<ScenarioReport> {
    let rate = select_rate_factor(stage_seed(seed, 5))?.unwrap_or(KineticConfig::default().rate_factor);
    let cfg = KineticConfig {
        rate_factor: rate,
        dt: 0.05 / rate,
        ..KineticConfig::default()
    };
    let g = NoiseSpec::wrapped_normal(A4_SIGMA2)?;
    let model = ModelSpec::cl(g.clone());
    let f0 = wn_coeffs(A4_SIGMA2, crate::circle::DEFAULT_CUTOFF)?;
    let f1 = cl_evolve(&f0, &g, 1.0, &cfg)?;
    let sampler = NoiseSpec::wrapped_normal(A4_SIGMA2)?.sampler()?;
    let k = DEFAULT_DIAG_CUTOFF;
    let mut d = Vec::new();
    for (i, &n) in A4_SIZES.iter().enumerate() {
        let run = EnsembleRun {
            model: &model,
            replicas: A4_REPLICAS,
            seed: stage_seed(seed, 40 + i as u64),
            t_end: 1.0,
            checkpoints: &[1.0],
            log_cap: 0,
        };
        let trajs = run.run(|rng| wn_state(n, &sampler, rng))?;
        let s = summarize(&trajs, k)?;
        d.push(chaos_distance(&s.checkpoints[0], &f1, k)?);
    }
    let law = density_from_coeffs(&f1, A4_SAMPLING_GRID)?;
    let n_last = *A4_SIZES.last().unwrap();
    let floor = iid_noise_floor(&law, n_last, A4_REPLICAS, k, A4_BOOTSTRAP, stage_seed(seed, 49))?;
    let q99 = quantile(&floor, 0.99)?;
    let checks = vec![
        Check::below("D(200) < D(50)", d[1], d[0]),
        Check::below("D(800) < D(200)", d[2], d[1]),
        Check::below("D(800) below the i.i.d. 99th percentile", d[2], q99),
    ];
    Ok(ScenarioReport::new(Scenario::A4, seed, checks, Some(rate)))
}

// A5: CL with uniform noise; which decay rate does the particle system show?

pub const A5_PARTICLES: usize = 2000;
pub const A5_REPLICAS: usize = 200;
pub const A5_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
pub const A5_CANDIDATES: [f64; 2] = [1.0, 2.0];
const A5_SIGMA2: f64 = 0.5;

struct RateArbitration {
    /// Largest |z| over times for each candidate.
    max_z: Vec<f64>,
    selected: Option<f64>,
}

fn arbitrate(seed: u64) -> Result<RateArbitration> {
    let model = ModelSpec::cl(NoiseSpec::Uniform);
    let sampler = NoiseSpec::wrapped_normal(A5_SIGMA2)?.sampler()?;
    let run = EnsembleRun {
        model: &model,
        replicas: A5_REPLICAS,
        seed,
        t_end: *A5_TIMES.last().unwrap(),
        checkpoints: &A5_TIMES,
        log_cap: 0,
    };
    let trajs = run.run(|rng| wn_state(A5_PARTICLES, &sampler, rng))?;
    let s = summarize(&trajs, 1)?;
    let f0 = wn_coeffs(A5_SIGMA2, 1)?;
    let mut max_z = Vec::new();
    for &rate in &A5_CANDIDATES {
        let cfg = KineticConfig {
            rate_factor: rate,
            dt: 0.05 / rate,
            ..KineticConfig::default()
        };
        let sol: Vec<FourierDensity> = A5_TIMES
            .iter()
            .map(|&t| cl_evolve(&f0, &NoiseSpec::Uniform, t, &cfg))
            .collect::<Result<_>>()?;
        let z = compare_flow(&s, &sol, 1)?;
        max_z.push(max_of(z.iter().map(|row| row[0])));
    }
    let matching: Vec<usize> = (0..A5_CANDIDATES.len()).filter(|&i| max_z[i] < 4.0).collect();
    let selected = match matching.as_slice() {
        [i] if (0..A5_CANDIDATES.len()).all(|j| j == *i || max_z[j] > 8.0) => Some(A5_CANDIDATES[*i]),
        _ => None,
    };
    Ok(RateArbitration { max_z, selected })
}

/// The rate factor realized by the CL particle system, if the arbitration
/// is conclusive.
pub fn select_rate_factor(seed: u64) -> Result<Option<f64>> {
    Ok(arbitrate(seed)?.selected)
}

fn a5(seed: u64) -> Result<ScenarioReport> {
    let arb = arbitrate(stage_seed(seed, 5))?;
    let mut checks = Vec::new();
    for (rate, z) in A5_CANDIDATES.iter().zip(&arb.max_z) {
        let relation = if arb.selected == Some(*rate) { Relation::Below } else { Relation::Above };
        let bound = if relation == Relation::Below { 4.0 } else { 8.0 };
        checks.push(Check::new(format!("rate_factor={rate}: max |z(1,t)| over t in {{0.5,1,2}}"), *z, relation, bound));
    }
    checks.push(Check::new(
        "exactly one candidate selected",
        arb.selected.map_or(0.0, |_| 1.0),
        Relation::AtLeast,
        1.0,
    ));
    Ok(ScenarioReport::new(Scenario::A5, seed, checks, arb.selected))
}

// A6: BDG against the kinetic solver.

pub const A6_PARTICLES: usize = 2000;
pub const A6_REPLICAS: usize = 200;
pub const A6_T: f64 = 0.5;
const A6_NOISE_SIGMA2: f64 = 0.2;
const A6_DATA_SIGMA2: f64 = 0.5;
const A6_GRID: usize = 256;

fn a6(seed: u64) -> Result<ScenarioReport> {
    let rate = select_rate_factor(stage_seed(seed, 5))?.unwrap_or(KineticConfig::default().rate_factor);
    let cfg = KineticConfig {
        rate_factor: rate,
        grid: A6_GRID,
        dt: 0.02 / rate,
        ..KineticConfig::default()
    };
    let g = NoiseSpec::wrapped_normal(A6_NOISE_SIGMA2)?;
    let model = ModelSpec::bdg(g.clone());
    let sampler = NoiseSpec::wrapped_normal(A6_DATA_SIGMA2)?.sampler()?;
    let run = EnsembleRun {
        model: &model,
        replicas: A6_REPLICAS,
        seed: stage_seed(seed, 60),
        t_end: A6_T,
        checkpoints: &[A6_T],
        log_cap: 0,
    };
    let trajs = run.run(|rng| wn_state(A6_PARTICLES, &sampler, rng))?;
    let s = summarize(&trajs, 2)?;
    let f0 = GridDensity::wrapped_normal(A6_GRID, 0.0, A6_DATA_SIGMA2)?;
    let ft = bdg_evolve(&f0, &g, A6_T, &cfg)?;
    let z = compare_flow(&s, &[fourier_coeffs(&ft, 2)?], 2)?;

    let fq = GridDensity::wrapped_normal(A6_GRID, 0.0, 0.3)?;
    let gq = NoiseSpec::wrapped_normal(0.1)?;
    let fast = bdg_gain(&fq, &gq)?;
    let slow = bdg_gain_quadrature(&fq, &gq)?;
    let quad_err = max_of(fast.values().iter().zip(&slow).map(|(a, b)| (a - b).abs()));

    let half = KineticConfig { dt: cfg.dt / 2.0, ..cfg.clone() };
    let coarse = bdg_evolve(&fq, &g, 1.0, &cfg)?;
    let fine = bdg_evolve(&fq, &g, 1.0, &half)?;

    let checks = vec![
        Check::below("|z(1, t=0.5)|", z[0][0], 4.0),
        Check::below("|z(2, t=0.5)|", z[0][1], 4.0),
        Check::below("gain vs O(M^3) quadrature, max-norm, M=256", quad_err, 1e-8),
        Check::below("self-convergence under dt halving, t=1", coarse.max_abs_diff(&fine), 1e-6),
    ];
    Ok(ScenarioReport::new(Scenario::A6, seed, checks, Some(rate)))
}

// A7: conservation laws and reproducibility.

pub const A7_KAC_PARTICLES: usize = 100;
pub const A7_KAC_EVENTS: f64 = 1e6;

fn a7(seed: u64) -> Result<ScenarioReport> {
    let mut checks = Vec::new();

    let model = ModelSpec::kac(NoiseSpec::Uniform);
    let mut rng = replica_rng(stage_seed(seed, 70), 0);
    let start = kac_initial_state(A7_KAC_PARTICLES, &mut rng)?;
    let e0 = start.energy();
    // a little past the mean so the count clears the target
    let t_end = 1.01 * A7_KAC_EVENTS / A7_KAC_PARTICLES as f64;
    let tr = simulate(&model, &State::Kac(start), t_end, &mut rng, &[], 0)?;
    let e1 = tr.final_state.as_kac().expect("Kac state").energy();
    checks.push(Check::new("Kac jumps simulated", tr.event_count as f64, Relation::AtLeast, A7_KAC_EVENTS));
    checks.push(Check::below("Kac relative energy drift", (e1 - e0).abs() / e0, 1e-12));

    let g16 = NoiseSpec::wrapped_normal(A1_SIGMA2)?.tabulate(A1_GRID)?;
    let g8 = NoiseSpec::wrapped_normal(A1_SIGMA2)?.tabulate(8)?;
    for (what, model, n, m) in [
        ("CL N=3 M=16", ModelSpec::cl(g16.clone()), 3, 16),
        ("BDG N=3 M=16", ModelSpec::bdg(g16), 3, 16),
        ("BDG N=4 M=8", ModelSpec::bdg(g8), 4, 8),
    ] {
        let tm = build_transition(&model, n, m, DEFAULT_STATE_CAP)?;
        let dev = max_of(tm.row_sums().iter().map(|s| (s - 1.0).abs()));
        checks.push(Check::below(format!("oracle {what}: max |row sum - 1|"), dev, 1e-12));
    }

    let g = NoiseSpec::wrapped_normal(0.2)?;
    let cfg = KineticConfig::default();
    let f0 = wn_coeffs(0.5, crate::circle::DEFAULT_CUTOFF)?;
    let cl_mass = max_of([0.5, 1.0, 2.0, 10.0].iter().map(|&t| {
        cl_evolve(&f0, &g, t, &cfg).map_or(f64::INFINITY, |f| (f.coeff(0) - 1.0).norm())
    }));
    checks.push(Check::below("CL kinetic |f(0,t) - 1|", cl_mass, 1e-15));
    let f0_grid = GridDensity::wrapped_normal(cfg.grid, 0.0, 0.3)?;
    let bdg_t = crate::kinetic::bdg_evolve_checkpoints(&f0_grid, &g, &[0.5, 1.0, 2.0], &cfg)?;
    let bdg_mass = max_of(bdg_t.iter().map(|f| (f.mass() - 1.0).abs()));
    checks.push(Check::below("BDG kinetic |f(0,t) - 1|", bdg_mass, 1e-10));

    let mut mismatches = 0usize;
    for sc in &Scenario::ALL[..6] {
        let a = serde_json::to_vec(&run(*sc, seed)?)?;
        let b = serde_json::to_vec(&run(*sc, seed)?)?;
        if a != b {
            mismatches += 1;
        }
    }
    checks.push(Check::new("scenarios A1-A6 with differing rerun bytes", mismatches as f64, Relation::AtMost, 0.0));
    Ok(ScenarioReport::new(Scenario::A7, seed, checks, None))
}
