//! JSON instance files and their resolution into model inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demand::DemandModel;
use crate::error::{CoreError, Result};
use crate::model::{validate_topology, Arc, Horizon, NetworkTopology, Node, Tier, ValidationReport, VaccineType};
use crate::wastage::{WastageProfile, WastageSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPopulation {
    pub region: String,
    pub population: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandEntry {
    pub vaccine: String,
    pub clinic: String,
    /// one value per period, or a single value used for every period
    pub mean: Vec<f64>,
    #[serde(default)]
    pub std: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daily_mean: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandSpec {
    Explicit {
        entries: Vec<DemandEntry>,
        #[serde(default)]
        poisson: bool,
    },
    /// Region demand proportional to population, split equally over the region's clinics.
    Regional {
        /// annual target-cohort members per inhabitant
        per_capita_rate: f64,
        /// residual std as a fraction of the mean
        cv: f64,
        regions: Vec<RegionPopulation>,
        #[serde(default = "one")]
        demand_scale: f64,
        #[serde(default)]
        poisson: bool,
    },
}

impl DemandSpec {
    pub fn resolve(&self, horizon: &Horizon, nodes: &[Node], catalog: &[VaccineType]) -> Result<DemandModel> {
        let t_max = horizon.periods;
        let days = horizon.period_length_days as f64;
        let mut ids: Vec<String> = nodes.iter().filter(|n| n.tier == Tier::Clinic).map(|n| n.id.clone()).collect();
        match self {
            DemandSpec::Explicit { entries, poisson } => {
                for e in entries {
                    if !ids.contains(&e.clinic) {
                        ids.push(e.clinic.clone());
                    }
                }
                let pos: BTreeMap<String, usize> = ids.iter().cloned().enumerate().map(|(c, id)| (id, c)).collect();
                let mut m = DemandModel::zeros(catalog.len(), ids, t_max);
                m.poisson = *poisson;
                let expand = |v: &[f64], what: &str| -> Result<Vec<f64>> {
                    match v.len() {
                        0 => Ok(vec![0.0; t_max]),
                        1 => Ok(vec![v[0]; t_max]),
                        n if n == t_max => Ok(v.to_vec()),
                        n => Err(CoreError::IndexMismatch(format!("{what} has {n} periods, horizon has {t_max}"))),
                    }
                };
                for e in entries {
                    let i = catalog.iter().position(|v| v.id == e.vaccine).ok_or_else(|| CoreError::UnknownVaccine(e.vaccine.clone()))?;
                    let c = pos[&e.clinic];
                    let mean = expand(&e.mean, "mean")?;
                    let std = expand(&e.std, "std")?;
                    for t in 0..t_max {
                        m.set(i, c, t, mean[t], std[t]);
                    }
                    m.set_daily(i, c, e.daily_mean.unwrap_or(mean.iter().sum::<f64>() / (t_max as f64 * days)));
                }
                m.check()?;
                Ok(m)
            }
            DemandSpec::Regional { per_capita_rate, cv, regions, demand_scale, poisson } => {
                if !(*per_capita_rate >= 0.0 && *cv >= 0.0 && *demand_scale >= 0.0) {
                    return Err(CoreError::Invalid("regional demand parameters must be non-negative".into()));
                }
                let mut m = DemandModel::zeros(catalog.len(), ids.clone(), t_max);
                m.poisson = *poisson;
                let clinic_nodes: Vec<&Node> = nodes.iter().filter(|n| n.tier == Tier::Clinic).collect();
                for r in regions {
                    let members: Vec<usize> = (0..clinic_nodes.len())
                        .filter(|&c| clinic_nodes[c].region.as_deref() == Some(r.region.as_str()))
                        .collect();
                    if members.is_empty() {
                        return Err(CoreError::Invalid(format!("region {} has no clinics", r.region)));
                    }
                    let cohort = r.population * per_capita_rate * demand_scale * days / 365.0 / members.len() as f64;
                    for (i, v) in catalog.iter().enumerate() {
                        let mu = cohort * v.regimen_doses as f64;
                        for &c in &members {
                            for t in 0..t_max {
                                m.set(i, c, t, mu, cv * mu);
                            }
                            m.set_daily(i, c, mu / days);
                        }
                    }
                }
                m.check()?;
                Ok(m)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default)]
    pub name: String,
    pub horizon: Horizon,
    pub vaccines: Vec<VaccineType>,
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    #[serde(default)]
    pub tier_skips_allowed: bool,
    #[serde(default)]
    pub wastage: WastageSpec,
    pub demand_model: DemandSpec,
}

impl Instance {
    pub fn load(path: &Path) -> Result<Instance> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn topology(&self) -> NetworkTopology {
        NetworkTopology {
            horizon: self.horizon.clone(),
            nodes: self.nodes.clone(),
            arcs: self.arcs.clone(),
            tier_skips_allowed: self.tier_skips_allowed,
        }
    }

    pub fn inputs(&self) -> Result<ModelInputs> {
        let topology = self.topology();
        let demand = self.demand_model.resolve(&self.horizon, &self.nodes, &self.vaccines)?;
        ModelInputs::new(self.name.clone(), topology, self.vaccines.clone(), self.wastage.clone(), demand)
    }
}

/// Everything the deterministic-equivalent builder reads.
#[derive(Clone, Debug)]
pub struct ModelInputs {
    pub name: String,
    pub topology: NetworkTopology,
    pub catalog: Vec<VaccineType>,
    pub wastage_spec: WastageSpec,
    pub wastage: WastageProfile,
    pub demand: DemandModel,
    pub report: ValidationReport,
}

impl ModelInputs {
    pub fn new(
        name: String,
        topology: NetworkTopology,
        catalog: Vec<VaccineType>,
        wastage_spec: WastageSpec,
        demand: DemandModel,
    ) -> Result<ModelInputs> {
        for v in &catalog {
            v.check()?;
        }
        if demand.vaccines != catalog.len() || demand.periods != topology.horizon.periods {
            return Err(CoreError::IndexMismatch("demand does not match catalog or horizon".into()));
        }
        let report = validate_topology(&topology, &demand);
        if let Some(v) = report.errors().next() {
            return Err(CoreError::Invalid(format!("{}: {}", v.kind, v.message)));
        }
        let wastage = WastageProfile::resolve(&wastage_spec, &topology, &catalog, &demand)?;
        Ok(ModelInputs { name, topology, catalog, wastage_spec, wastage, demand, report })
    }

    /// Re-resolves wastage after the network or catalog changed.
    pub fn rebuild(&self, topology: NetworkTopology, catalog: Vec<VaccineType>) -> Result<ModelInputs> {
        ModelInputs::new(self.name.clone(), topology, catalog, self.wastage_spec.clone(), self.demand.clone())
    }

    pub fn multi_presentation(&self) -> bool {
        self.catalog.iter().any(|v| v.presentations.len() > 1)
    }
}
