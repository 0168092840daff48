//! Binary-interaction jump processes and their event-driven simulator.
//!
//! Three pair rules are supported:
//!
//! - **BDG**: both particles jump to the midpoint direction of the pair,
//!   each perturbed by its own noise draw.
//! - **CL** (choose the leader): a fair coin picks the leader; the follower
//!   takes the leader's angle plus noise.
//! - **Kac**: the pair of real velocities is rotated by a random angle,
//!   conserving `v_i² + v_j²`.
//!
//! Jumps arrive as a Poisson process of total rate `N`, and each jump
//! selects an unordered pair uniformly, with probability `2/(N(N-1))`.
//! Within a replica the draw order is fixed: waiting time, pair, then the
//! model's own draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{bisector, Angle, GridDensity, NoiseSampler, NoiseSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "BDG")]
    Bdg,
    #[serde(rename = "CL")]
    Cl,
    #[serde(rename = "Kac")]
    Kac,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Bdg => "BDG",
            ModelKind::Cl => "CL",
            ModelKind::Kac => "Kac",
        })
    }
}

/// A pair rule with its noise law. Pair selection is always uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub noise: NoiseSpec,
}

impl ModelSpec {
    pub fn bdg(noise: NoiseSpec) -> Self {
        ModelSpec { kind: ModelKind::Bdg, noise }
    }

    pub fn cl(noise: NoiseSpec) -> Self {
        ModelSpec { kind: ModelKind::Cl, noise }
    }

    pub fn kac(noise: NoiseSpec) -> Self {
        ModelSpec { kind: ModelKind::Kac, noise }
    }

    /// Probability that a given unordered pair is selected at a jump.
    pub fn pair_probability(n: usize) -> f64 {
        2.0 / (n as f64 * (n as f64 - 1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleState {
    angles: Vec<Angle>,
}

impl CircleState {
    pub fn new(angles: Vec<Angle>) -> Result<Self> {
        if angles.len() < 2 {
            return Err(Error::invalid("particle count", "N must be >= 2"));
        }
        Ok(CircleState { angles })
    }

    pub fn from_radians(theta: &[f64]) -> Result<Self> {
        Self::new(theta.iter().map(|&t| Angle::new(t)).collect())
    }

    pub fn angles(&self) -> &[Angle] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Velocities on the sphere `Σ v_i² = N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacState {
    velocities: Vec<f64>,
}

impl KacState {
    /// Rescales `velocities` onto the sphere of radius `√N`.
    pub fn on_sphere(mut velocities: Vec<f64>) -> Result<Self> {
        let n = velocities.len();
        if n < 2 {
            return Err(Error::invalid("particle count", "N must be >= 2"));
        }
        let energy: f64 = velocities.iter().map(|v| v * v).sum();
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::invalid("Kac state", "zero or non-finite energy"));
        }
        let scale = (n as f64 / energy).sqrt();
        velocities.iter_mut().for_each(|v| *v *= scale);
        Ok(KacState { velocities })
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn energy(&self) -> f64 {
        self.velocities.iter().map(|v| v * v).sum()
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum State {
    Circle(CircleState),
    Kac(KacState),
}

impl State {
    pub fn len(&self) -> usize {
        match self {
            State::Circle(s) => s.len(),
            State::Kac(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_circle(&self) -> Option<&CircleState> {
        match self {
            State::Circle(s) => Some(s),
            State::Kac(_) => None,
        }
    }

    pub fn as_kac(&self) -> Option<&KacState> {
        match self {
            State::Kac(s) => Some(s),
            State::Circle(_) => None,
        }
    }
}

/// Random inputs consumed by one jump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum Draws {
    #[serde(rename = "BDG")]
    Bdg { wi: Angle, wj: Angle },
    /// `leader_is_i` is the coin `B`: when set, `j` copies `i`.
    #[serde(rename = "CL")]
    Cl { leader_is_i: bool, z: Angle },
    #[serde(rename = "Kac")]
    Kac { theta: Angle },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    /// `i < j`.
    pub pair: (usize, usize),
    pub draws: Draws,
}

/// Both particles move to the midpoint direction plus their own noise.
pub fn bdg_pair_update(vi: Angle, vj: Angle, wi: Angle, wj: Angle) -> (Angle, Angle) {
    let mid = bisector(vi, vj);
    (mid + wi, mid + wj)
}

/// The follower copies the leader up to noise; the leader is unchanged.
pub fn cl_pair_update(vi: Angle, vj: Angle, leader_is_i: bool, z: Angle) -> (Angle, Angle) {
    if leader_is_i {
        (vi, vi + z)
    } else {
        (vj + z, vj)
    }
}

pub fn kac_pair_update(vi: f64, vj: f64, theta: Angle) -> (f64, f64) {
    let (s, c) = theta.radians().sin_cos();
    (c * vi + s * vj, -s * vi + c * vj)
}

/// A model ready to draw and apply jumps.
#[derive(Clone, Debug)]
pub struct PairProcess {
    kind: ModelKind,
    noise: NoiseSampler,
}

impl PairProcess {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        Ok(PairProcess {
            kind: model.kind,
            noise: model.noise.sampler()?,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Draws {
        match self.kind {
            ModelKind::Bdg => {
                let wi = self.noise.sample(rng);
                let wj = self.noise.sample(rng);
                Draws::Bdg { wi, wj }
            }
            ModelKind::Cl => {
                let leader_is_i = rng.random::<bool>();
                let z = self.noise.sample(rng);
                Draws::Cl { leader_is_i, z }
            }
            ModelKind::Kac => Draws::Kac {
                theta: self.noise.sample(rng),
            },
        }
    }

    pub fn check_state(&self, state: &State) -> Result<()> {
        match (self.kind, state) {
            (ModelKind::Kac, State::Kac(_)) => Ok(()),
            (ModelKind::Bdg | ModelKind::Cl, State::Circle(_)) => Ok(()),
            (ModelKind::Kac, _) => Err(Error::StateMismatch("Kac needs real velocities")),
            _ => Err(Error::StateMismatch("circle models need angles")),
        }
    }

    /// Applies one jump. The state kind must already match the model.
    pub fn apply(&self, state: &mut State, (i, j): (usize, usize), draws: Draws) {
        match (state, draws) {
            (State::Circle(s), Draws::Bdg { wi, wj }) => {
                let a = &mut s.angles;
                (a[i], a[j]) = bdg_pair_update(a[i], a[j], wi, wj);
            }
            (State::Circle(s), Draws::Cl { leader_is_i, z }) => {
                let a = &mut s.angles;
                (a[i], a[j]) = cl_pair_update(a[i], a[j], leader_is_i, z);
            }
            (State::Kac(s), Draws::Kac { theta }) => {
                let v = &mut s.velocities;
                (v[i], v[j]) = kac_pair_update(v[i], v[j], theta);
            }
            _ => unreachable!("draws do not match the state kind"),
        }
    }
}

/// An unordered pair, uniformly among the `N(N-1)/2`, returned as `(i, j)`
/// with `i < j`.
pub fn draw_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub state: State,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// The first `log_cap` jumps.
    pub events: Vec<JumpEvent>,
    pub event_count: u64,
    pub final_state: State,
}

fn check_times(t_end: f64, checkpoints: &[f64]) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("t_end", format!("{t_end} must be > 0")));
    }
    if checkpoints.iter().any(|&c| !(0.0..=t_end).contains(&c)) {
        return Err(Error::invalid("checkpoints", "must lie in [0, t_end]"));
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("checkpoints", "must be sorted"));
    }
    Ok(())
}

/// Exact event-driven simulation up to `t_end`, recording the state at each
/// checkpoint and logging at most `log_cap` jumps.
pub fn simulate<R: Rng + ?Sized>(
    model: &ModelSpec,
    initial: &State,
    t_end: f64,
    rng: &mut R,
    checkpoints: &[f64],
    log_cap: usize,
) -> Result<Trajectory> {
    check_times(t_end, checkpoints)?;
    let process = PairProcess::new(model)?;
    process.check_state(initial)?;
    let n = initial.len();
    let clock = Exp::new(n as f64).map_err(|e| Error::invalid("rate", e.to_string()))?;

    let mut state = initial.clone();
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut events = Vec::new();
    let mut event_count = 0u64;
    let mut next = 0usize;
    let mut t = 0.0;
    loop {
        let t_next = t + clock.sample(rng);
        while next < checkpoints.len() && checkpoints[next] < t_next {
            snapshots.push(Snapshot {
                t: checkpoints[next],
                state: state.clone(),
            });
            next += 1;
        }
        if t_next > t_end {
            break;
        }
        let pair = draw_pair(rng, n);
        let draws = process.draw(rng);
        process.apply(&mut state, pair, draws);
        if events.len() < log_cap {
            events.push(JumpEvent {
                time: t_next,
                pair,
                draws,
            });
        }
        event_count += 1;
        t = t_next;
    }
    Ok(Trajectory {
        snapshots,
        events,
        event_count,
        final_state: state,
    })
}

/// Re-applies logged jumps to `initial`.
pub fn replay(model: &ModelSpec, initial: &State, events: &[JumpEvent]) -> Result<State> {
    let process = PairProcess::new(model)?;
    process.check_state(initial)?;
    let mut state = initial.clone();
    for e in events {
        let (i, j) = e.pair;
        if i >= j || j >= state.len() {
            return Err(Error::invalid("event pair", format!("{:?}", e.pair)));
        }
        let matches = matches!(
            (model.kind, e.draws),
            (ModelKind::Bdg, Draws::Bdg { .. })
                | (ModelKind::Cl, Draws::Cl { .. })
                | (ModelKind::Kac, Draws::Kac { .. })
        );
        if !matches {
            return Err(Error::StateMismatch("logged draws belong to another model"));
        }
        process.apply(&mut state, e.pair, e.draws);
    }
    Ok(state)
}

/// Generator driving one replica.
pub type ReplicaRng = ChaCha8Rng;

/// Stream `replica` of the master seed.
pub fn replica_rng(seed: u64, replica: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// `N` i.i.d. draws from `f`.
pub fn sample_initial_chaotic<R: Rng + ?Sized>(
    f: &GridDensity,
    n: usize,
    rng: &mut R,
) -> Result<CircleState> {
    let sampler = f.sampler();
    CircleState::new((0..n).map(|_| sampler.sample(rng)).collect())
}

/// Gaussian velocities projected onto the energy sphere.
pub fn kac_initial_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<KacState> {
    KacState::on_sphere((0..n).map(|_| StandardNormal.sample(rng)).collect())
}

/// Settings shared by all replicas of an ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleRun<'a> {
    pub model: &'a ModelSpec,
    pub replicas: usize,
    pub seed: u64,
    pub t_end: f64,
    pub checkpoints: &'a [f64],
    pub log_cap: usize,
}

impl EnsembleRun<'_> {
    /// Runs every replica on its own stream; `initial` draws the starting
    /// state from that stream first. Output is in replica order.
    pub fn run<F>(&self, initial: F) -> Result<Vec<Trajectory>>
    where
        F: Fn(&mut ReplicaRng) -> Result<State> + Sync,
    {
        if self.replicas == 0 {
            return Err(Error::EmptyEnsemble("replicas must be >= 1"));
        }
        (0..self.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(self.seed, r);
                let start = initial(&mut rng)?;
                simulate(
                    self.model,
                    &start,
                    self.t_end,
                    &mut rng,
                    self.checkpoints,
                    self.log_cap,
                )
            })
            .collect()
    }
}
