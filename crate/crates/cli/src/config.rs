//! The JSON experiment document shared by all subcommands.

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use pimlab::circle::{NoiseSpec, DEFAULT_CUTOFF, DEFAULT_GRID};
use pimlab::diagnostics::DEFAULT_DIAG_CUTOFF;
use pimlab::kinetic::KineticConfig;
use pimlab::models::ModelKind;
use pimlab::oracle::{DEFAULT_MAX_ITER, DEFAULT_STATE_CAP, DEFAULT_TOL};

/// How the noise depends on `N` for the `invariant` command.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// The configured noise at every `N`.
    #[default]
    Fixed,
    /// `ĝ_N(k) = e^{-k²/N}`; the configured noise is ignored.
    HeatKernel,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelKind>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub noise: Option<NoiseSpec>,
    pub noise_family: Option<NoiseFamily>,
    /// Law of the i.i.d. initial angles (centered at 0); uniform by default.
    pub initial: Option<NoiseSpec>,
    pub t_end: Option<f64>,
    pub checkpoints: Option<Vec<f64>>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub rate_factor: Option<f64>,
    pub dt: Option<f64>,
    pub log_cap: Option<usize>,
    pub state_cap: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub marginals: Option<Vec<Vec<usize>>>,
    pub scenario: Option<String>,
}

fn need<T: Clone>(v: &Option<T>, path: &str) -> Result<T> {
    v.clone().with_context(|| format!("config: missing required field \"{path}\""))
}

fn check(ok: bool, path: &str, reason: &str) -> Result<()> {
    if !ok {
        bail!("config: invalid \"{path}\": {reason}");
    }
    Ok(())
}

fn validated_noise(v: &Option<NoiseSpec>, path: &str, default: NoiseSpec) -> Result<NoiseSpec> {
    v.clone()
        .unwrap_or(default)
        .validated()
        .map_err(|e| anyhow::anyhow!("config: invalid \"{path}\": {e}"))
}

pub struct SimulateParams {
    pub model: ModelKind,
    pub n: usize,
    pub noise: NoiseSpec,
    pub initial: NoiseSpec,
    pub t_end: f64,
    pub checkpoints: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub k: usize,
    pub m: usize,
    pub kinetic: KineticConfig,
    pub log_cap: usize,
}

pub struct KineticParams {
    pub model: ModelKind,
    pub noise: NoiseSpec,
    pub initial: NoiseSpec,
    pub times: Vec<f64>,
    pub cfg: KineticConfig,
}

pub struct InvariantParams {
    pub noise: NoiseSpec,
    pub family: NoiseFamily,
    pub n: usize,
    pub k: usize,
}

pub struct OracleParams {
    pub model: ModelKind,
    pub noise: NoiseSpec,
    pub n: usize,
    pub m: usize,
    pub state_cap: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub marginals: Vec<Vec<usize>>,
}

pub struct VerifyParams {
    pub scenarios: Vec<pimlab::verify::Scenario>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("config: malformed JSON")
    }

    fn kinetic_cfg(&self, t_end: f64) -> Result<KineticConfig> {
        let rate_factor = self.rate_factor.unwrap_or(KineticConfig::default().rate_factor);
        check(rate_factor > 0.0 && rate_factor.is_finite(), "rate_factor", "must be > 0")?;
        let cfg = KineticConfig {
            rate_factor,
            cutoff: self.k.unwrap_or(DEFAULT_CUTOFF),
            grid: self.m.unwrap_or(DEFAULT_GRID),
            dt: self.dt.unwrap_or(0.02 / rate_factor),
            t_end,
        };
        check(cfg.grid >= 2 && cfg.grid.is_power_of_two(), "M", "must be a power of two >= 2")?;
        check(cfg.dt > 0.0 && cfg.dt <= 0.1 / rate_factor, "dt", "must lie in (0, 0.1/rate_factor]")?;
        check(cfg.grid >= 2 * cfg.cutoff + 2, "K", "needs M >= 2K + 2")?;
        Ok(cfg)
    }

    fn times(&self, t_end: f64, default: Vec<f64>) -> Result<Vec<f64>> {
        let times = self.checkpoints.clone().unwrap_or(default);
        check(
            times.iter().all(|t| (0.0..=t_end).contains(t)),
            "checkpoints",
            "must lie in [0, t_end]",
        )?;
        check(times.windows(2).all(|w| w[0] <= w[1]), "checkpoints", "must be sorted")?;
        Ok(times)
    }

    pub fn simulate(&self) -> Result<SimulateParams> {
        let model = need(&self.model, "model")?;
        let n = need(&self.n, "N")?;
        check(n >= 2, "N", "must be >= 2")?;
        let t_end = need(&self.t_end, "t_end")?;
        check(t_end > 0.0 && t_end.is_finite(), "t_end", "must be > 0")?;
        let replicas = need(&self.replicas, "replicas")?;
        check(replicas >= 1, "replicas", "must be >= 1")?;
        let seed = need(&self.seed, "seed")?;
        let noise = validated_noise(&self.noise, "noise", NoiseSpec::Uniform)?;
        let initial = validated_noise(&self.initial, "initial", NoiseSpec::Uniform)?;
        let k = self.k.unwrap_or(DEFAULT_DIAG_CUTOFF);
        let mut kinetic = self.kinetic_cfg(t_end)?;
        kinetic.cutoff = kinetic.cutoff.max(k);
        check(kinetic.grid >= 2 * kinetic.cutoff + 2, "K", "needs M >= 2K + 2")?;
        Ok(SimulateParams {
            model,
            n,
            noise,
            initial,
            t_end,
            checkpoints: self.times(t_end, vec![0.0, t_end])?,
            replicas,
            seed,
            k,
            m: kinetic.grid,
            kinetic,
            log_cap: self.log_cap.unwrap_or(0),
        })
    }

    pub fn kinetic(&self) -> Result<KineticParams> {
        let model = need(&self.model, "model")?;
        check(model != ModelKind::Kac, "model", "kinetic solvers exist for BDG and CL")?;
        let t_end = need(&self.t_end, "t_end")?;
        check(t_end >= 0.0 && t_end.is_finite(), "t_end", "must be finite and >= 0")?;
        Ok(KineticParams {
            model,
            noise: validated_noise(&self.noise, "noise", NoiseSpec::Uniform)?,
            initial: validated_noise(&self.initial, "initial", NoiseSpec::Uniform)?,
            times: self.times(t_end, vec![0.0, t_end])?,
            cfg: self.kinetic_cfg(t_end)?,
        })
    }

    pub fn invariant(&self) -> Result<InvariantParams> {
        let n = need(&self.n, "N")?;
        check(n >= 3, "N", "must be >= 3")?;
        Ok(InvariantParams {
            noise: validated_noise(&self.noise, "noise", NoiseSpec::Uniform)?,
            family: self.noise_family.unwrap_or_default(),
            n,
            k: self.k.unwrap_or(DEFAULT_DIAG_CUTOFF),
        })
    }

    pub fn oracle(&self) -> Result<OracleParams> {
        let model = need(&self.model, "model")?;
        check(model != ModelKind::Kac, "model", "the grid oracle covers BDG and CL")?;
        let n = need(&self.n, "N")?;
        check(n >= 2, "N", "must be >= 2")?;
        let m = need(&self.m, "M")?;
        check(m >= 2 && m.is_power_of_two(), "M", "must be a power of two >= 2")?;
        let tol = self.tol.unwrap_or(DEFAULT_TOL);
        check(tol > 0.0, "tol", "must be > 0")?;
        let marginals = self.marginals.clone().unwrap_or_else(|| vec![vec![0], vec![0, 1]]);
        for (i, coords) in marginals.iter().enumerate() {
            let mut seen = coords.clone();
            seen.sort_unstable();
            seen.dedup();
            check(
                !coords.is_empty() && seen.len() == coords.len() && coords.iter().all(|&c| c < n),
                &format!("marginals[{i}]"),
                "needs distinct coordinates below N",
            )?;
        }
        Ok(OracleParams {
            model,
            noise: validated_noise(&self.noise, "noise", NoiseSpec::Uniform)?,
            n,
            m,
            state_cap: self.state_cap.unwrap_or(DEFAULT_STATE_CAP),
            tol,
            max_iter: self.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            marginals,
        })
    }

    pub fn verify(&self) -> Result<VerifyParams> {
        use pimlab::verify::Scenario;
        let name = self.scenario.clone().unwrap_or_else(|| "all".to_string());
        let scenarios = if name.eq_ignore_ascii_case("all") {
            Scenario::ALL.to_vec()
        } else {
            vec![name
                .parse::<Scenario>()
                .map_err(|_| anyhow::anyhow!("config: invalid \"scenario\": expected A1..A7 or all, got {name:?}"))?]
        };
        Ok(VerifyParams {
            scenarios,
            seed: self.seed.unwrap_or(pimlab::verify::DEFAULT_SEED),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_simulate_config() {
        let c = ExperimentConfig::parse(
            r#"{"model":"CL","N":10,"noise":{"kind":"uniform"},"t_end":1,"replicas":2,"seed":1}"#,
        )
        .unwrap();
        let p = c.simulate().unwrap();
        assert_eq!(p.n, 10);
        assert_eq!(p.checkpoints, vec![0.0, 1.0]);
        assert_eq!(p.k, DEFAULT_DIAG_CUTOFF);
    }

    #[test]
    fn errors_name_the_field() {
        let c = ExperimentConfig::parse(r#"{"model":"CL","N":10,"t_end":1,"replicas":0,"seed":1}"#).unwrap();
        let msg = c.simulate().err().unwrap().to_string();
        assert!(msg.contains("replicas"), "{msg}");
        let c = ExperimentConfig::parse(r#"{"model":"CL","N":10,"t_end":1,"replicas":2}"#).unwrap();
        assert!(c.simulate().err().unwrap().to_string().contains("seed"));
        let err = ExperimentConfig::parse(r#"{"model":"CL","Nn":10}"#).err().unwrap();
        assert!(format!("{err:#}").contains("Nn"));
        let c = ExperimentConfig::parse(r#"{"model":"BDG","N":3,"M":12}"#).unwrap();
        assert!(c.oracle().err().unwrap().to_string().contains("\"M\""));
        let c = ExperimentConfig::parse(
            r#"{"model":"CL","N":3,"M":8,"noise":{"kind":"wrapped_normal","sigma2":-1}}"#,
        )
        .unwrap();
        assert!(c.oracle().err().unwrap().to_string().contains("\"noise\""));
    }

    #[test]
    fn noise_param_alias() {
        let c = ExperimentConfig::parse(r#"{"noise":{"kind":"von_mises","param":2.0},"N":5}"#).unwrap();
        assert_eq!(c.invariant().unwrap().noise, NoiseSpec::VonMises { kappa: 2.0 });
    }
}
