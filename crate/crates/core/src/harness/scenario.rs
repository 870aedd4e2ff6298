use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adapt::DiffusionPlan;
use crate::synth::{
    illustrative_env, localization_env, spectrum_env, unmix_env, DataModel, LocalizationParams, NodeEnvironment,
    SpectrumParams, SynthError, UnmixEnv, UnmixParams,
};
use crate::topology::{uniform_combiners, ClusteredNetwork, CombinerSet, NetworkDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Clustered multitask ATC diffusion.
    Atc,
    /// Single-task diffusion over the whole network with uniform combiners.
    SingleTask,
    /// Per-node multitask diffusion with uniform weights over all neighbors.
    Multitask,
    /// Non-cooperative LMS.
    Lms,
    /// Projected diffusion for abundance estimation.
    Unmix,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Atc => "atc",
            Algorithm::SingleTask => "single_task",
            Algorithm::Multitask => "multitask",
            Algorithm::Lms => "lms",
            Algorithm::Unmix => "unmix",
        })
    }
}

/// Explicit linear-model environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    pub network: NetworkDocument,
    /// One optimum per node.
    pub w_star: Vec<Vec<f64>>,
    /// Full per-node regressor covariances, rows of each matrix.
    #[serde(default)]
    pub r_x: Option<Vec<Vec<Vec<f64>>>>,
    /// Per-node variances for R_x = σ²_x I. Exclusive with `r_x`.
    #[serde(default)]
    pub sigma2_x: Option<Vec<f64>>,
    pub sigma2_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenarioSpec {
    Illustrative,
    Custom(CustomScenario),
    Spectrum(SpectrumParams),
    Localization(LocalizationParams),
    Unmix(UnmixParams),
}

/// A network with a streaming data model and, when available, its exact
/// second-order moments for theory.
pub struct LinearWorkload {
    pub network: ClusteredNetwork,
    pub combiners: CombinerSet,
    pub model: Box<dyn DataModel>,
    pub moments: Option<NodeEnvironment>,
}

pub enum Workload {
    Linear(LinearWorkload),
    Unmix(UnmixEnv),
}

impl CustomScenario {
    fn environment(&self, n: usize) -> Result<NodeEnvironment, HarnessError> {
        if self.w_star.len() != n {
            return Err(SynthError::NodeCount { what: "w_star", got: self.w_star.len(), expected: n }.into());
        }
        let l = self.w_star.first().map_or(0, Vec::len);
        let r_x: Vec<DMatrix<f64>> = match (&self.r_x, &self.sigma2_x) {
            (Some(_), Some(_)) => return Err(HarnessError::Spec("give either r_x or sigma2_x, not both".into())),
            (None, None) => return Err(HarnessError::Spec("one of r_x or sigma2_x is required".into())),
            (None, Some(s)) => s.iter().map(|&v| DMatrix::identity(l, l) * v).collect(),
            (Some(rows), None) => rows
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    if m.len() != l || m.iter().any(|r| r.len() != l) {
                        return Err(HarnessError::Spec(format!("r_x of node {} must be {l}x{l}", k + 1)));
                    }
                    Ok(DMatrix::from_fn(l, l, |i, j| m[i][j]))
                })
                .collect::<Result<_, _>>()?,
        };
        let w_star = self.w_star.iter().map(|w| DVector::from_column_slice(w)).collect();
        Ok(NodeEnvironment::new(w_star, r_x, self.sigma2_z.clone())?)
    }
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<Workload, HarnessError> {
        let linear = |network, combiners, model: Box<dyn DataModel>, moments| {
            Workload::Linear(LinearWorkload { network, combiners, model, moments })
        };
        Ok(match self {
            ScenarioSpec::Illustrative => {
                let (network, env) = illustrative_env();
                let combiners = uniform_combiners(&network);
                linear(network, combiners, Box::new(env.clone()), Some(env))
            }
            ScenarioSpec::Custom(custom) => {
                let (network, combiners) = custom.network.build()?;
                let env = custom.environment(network.n_nodes())?;
                env.check_clusters(&network)?;
                linear(network, combiners, Box::new(env.clone()), Some(env))
            }
            ScenarioSpec::Spectrum(p) => {
                let sc = spectrum_env(p)?;
                let (network, combiners) = (sc.network.clone(), sc.combiners.clone());
                linear(network, combiners, Box::new(sc), None)
            }
            ScenarioSpec::Localization(p) => {
                let sc = localization_env(p)?;
                let moments = sc.moments();
                let (network, combiners) = (sc.network.clone(), sc.combiners.clone());
                linear(network, combiners, Box::new(sc), Some(moments))
            }
            ScenarioSpec::Unmix(p) => Workload::Unmix(unmix_env(p)?),
        })
    }
}

impl LinearWorkload {
    /// Network, combiners and forced η (if any) that a strategy runs on.
    pub fn strategy_topology(
        &self,
        strategy: Algorithm,
    ) -> Result<(ClusteredNetwork, CombinerSet, Option<f64>), HarnessError> {
        let singletons = || {
            let net = self.network.with_singleton_clusters();
            let comb = uniform_combiners(&net);
            (net, comb)
        };
        Ok(match strategy {
            Algorithm::Atc => (self.network.clone(), self.combiners.clone(), None),
            Algorithm::SingleTask => {
                let net = self.network.with_single_cluster();
                let comb = uniform_combiners(&net);
                (net, comb, Some(0.0))
            }
            Algorithm::Multitask => {
                let (net, comb) = singletons();
                (net, comb, None)
            }
            Algorithm::Lms => {
                let (net, comb) = singletons();
                (net, comb, Some(0.0))
            }
            Algorithm::Unmix => return Err(HarnessError::Spec("algorithm unmix needs the unmix scenario".into())),
        })
    }

    /// Step plan for a strategy and the η it forces, if any.
    pub fn plan(&self, strategy: Algorithm) -> Result<(DiffusionPlan, Option<f64>), HarnessError> {
        let (net, comb, eta) = self.strategy_topology(strategy)?;
        let plan = match strategy {
            Algorithm::Atc => DiffusionPlan::clustered(&net, &comb),
            Algorithm::SingleTask => DiffusionPlan::single_task(&net, &comb),
            Algorithm::Multitask => DiffusionPlan::multitask(&net, &comb),
            Algorithm::Lms => DiffusionPlan::non_cooperative(net.n_nodes()),
            Algorithm::Unmix => unreachable!("rejected by strategy_topology"),
        };
        Ok((plan, eta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_kinds_parse() {
        let s: ScenarioSpec = serde_json::from_str(r#"{"kind": "illustrative"}"#).unwrap();
        assert_eq!(s, ScenarioSpec::Illustrative);
        let s: ScenarioSpec =
            serde_json::from_str(r#"{"kind": "localization", "n_clusters": 5, "nodes_per_cluster": 8}"#).unwrap();
        assert!(matches!(s, ScenarioSpec::Localization(p) if p.n_clusters == 5));
        let s: ScenarioSpec = serde_json::from_str(r#"{"kind": "spectrum", "p0": 0.1}"#).unwrap();
        assert!(matches!(s, ScenarioSpec::Spectrum(p) if p.p0 == Some(0.1)));
    }

    #[test]
    fn unknown_scenario_key_rejected() {
        let err = serde_json::from_str::<ScenarioSpec>(r#"{"kind": "unmix", "heigth": 3}"#).unwrap_err();
        assert!(err.to_string().contains("heigth"), "{err}");
    }

    #[test]
    fn custom_scenario_builds() {
        let s: ScenarioSpec = serde_json::from_str(
            r#"{"kind": "custom",
                "network": {"n_nodes": 2, "edges": [[1, 2]], "clusters": [[1], [2]]},
                "w_star": [[1.0], [2.0]], "sigma2_x": [1.0, 1.0], "sigma2_z": [0.1, 0.1]}"#,
        )
        .unwrap();
        let Workload::Linear(lin) = s.build().unwrap() else { panic!("expected linear workload") };
        assert_eq!(lin.network.n_nodes(), 2);
        assert!(lin.moments.is_some());
    }

    #[test]
    fn custom_scenario_rejects_mixed_optima_in_cluster() {
        let s: ScenarioSpec = serde_json::from_str(
            r#"{"kind": "custom",
                "network": {"n_nodes": 2, "edges": [[1, 2]], "clusters": [[1, 2]]},
                "w_star": [[1.0], [2.0]], "sigma2_x": [1.0, 1.0], "sigma2_z": [0.1, 0.1]}"#,
        )
        .unwrap();
        assert!(s.build().is_err());
    }
}
