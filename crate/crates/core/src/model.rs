//! Domain types: vaccines, presentations, network nodes and arcs, schedules.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::demand::DemandModel;
use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Central,
    Regional,
    District,
    Clinic,
}

impl Tier {
    pub fn rank(self) -> u8 {
        match self {
            Tier::Central => 0,
            Tier::Regional => 1,
            Tier::District => 2,
            Tier::Clinic => 3,
        }
    }
}

/// Only the refrigerator-only class is constraint-relevant; the other two behave alike.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StorageClass {
    RefrigeratorOnly,
    RefrigeratorOrFreezer,
    FreezerPreferred,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VialPresentation {
    pub vial_size: u32,
    /// cc per dose
    pub packed_volume_per_dose: f64,
    /// cc per dose; 0 when there is no diluent
    #[serde(default)]
    pub diluent_volume_per_dose: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaccineType {
    pub id: String,
    pub name: String,
    pub regimen_doses: u32,
    pub storage_class: StorageClass,
    pub presentations: Vec<VialPresentation>,
    #[serde(default)]
    pub thermostable: bool,
    #[serde(default)]
    pub dual_chamber: bool,
}

impl VaccineType {
    pub fn refrigerator_only(&self) -> bool {
        self.storage_class == StorageClass::RefrigeratorOnly
    }

    /// Largest diluent volume over the presentations.
    pub fn diluent_per_dose(&self) -> f64 {
        self.presentations.iter().map(|p| p.diluent_volume_per_dose).fold(0.0, f64::max)
    }

    pub fn check(&self) -> Result<()> {
        if self.regimen_doses < 1 {
            return Err(CoreError::Invalid(format!("vaccine {}: regimen must be at least 1 dose", self.id)));
        }
        if self.presentations.is_empty() {
            return Err(CoreError::Invalid(format!("vaccine {} has no presentations", self.id)));
        }
        let mut sizes = BTreeSet::new();
        for p in &self.presentations {
            if p.vial_size < 1 || !(p.packed_volume_per_dose > 0.0) || !(p.diluent_volume_per_dose >= 0.0) {
                return Err(CoreError::Invalid(format!("vaccine {}: bad presentation {p:?}", self.id)));
            }
            if !sizes.insert(p.vial_size) {
                return Err(CoreError::Invalid(format!("vaccine {}: duplicate vial size {}", self.id, p.vial_size)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub tier: Tier,
    pub refrigerator_capacity: f64,
    pub freezer_capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    /// Periods with exogenous inbound supply; only read for central stores (default: every period).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply_periods: Option<Vec<usize>>,
}

/// Periods (1-based) in which shipments may depart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScheduleMask {
    pub active_periods: Vec<usize>,
}

impl ScheduleMask {
    pub fn every(periods: usize, step: usize, first: usize) -> ScheduleMask {
        ScheduleMask { active_periods: (first..=periods).step_by(step.max(1)).collect() }
    }

    pub fn contains(&self, t: usize) -> bool {
        self.active_periods.contains(&t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: String,
    pub to: String,
    /// cc per shipment
    pub transport_capacity: f64,
    pub schedule: ScheduleMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub periods: usize,
    #[serde(default = "default_period_days")]
    pub period_length_days: u32,
    /// Periods between departure and arrival of a shipment.
    #[serde(default = "default_lag")]
    pub transit_lag: usize,
}

fn default_period_days() -> u32 {
    30
}

fn default_lag() -> usize {
    1
}

impl Horizon {
    pub fn months(periods: usize) -> Horizon {
        Horizon { periods, period_length_days: 30, transit_lag: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub horizon: Horizon,
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    /// Set once a tier has been removed, which legitimizes arcs that skip a tier.
    #[serde(default)]
    pub tier_skips_allowed: bool,
}

impl NetworkTopology {
    pub fn node_index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(k, n)| (n.id.as_str(), k)).collect()
    }

    pub fn clinics(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&k| self.nodes[k].tier == Tier::Clinic).collect()
    }

    pub fn find_arc(&self, from: &str, to: &str) -> Option<usize> {
        self.arcs.iter().position(|a| a.from == from && a.to == to)
    }

    pub fn supply_periods(&self, node: usize) -> Vec<usize> {
        match &self.nodes[node].supply_periods {
            Some(p) => p.clone(),
            None => (1..=self.horizon.periods).collect(),
        }
    }

    pub fn total_refrigerator(&self) -> f64 {
        self.nodes.iter().map(|n| n.refrigerator_capacity).sum()
    }

    pub fn total_freezer(&self) -> f64 {
        self.nodes.iter().map(|n| n.freezer_capacity).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        !self.violations.iter().any(|v| v.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    fn push(&mut self, severity: Severity, kind: &'static str, message: String) {
        self.violations.push(Violation { severity, kind, message });
    }
}

/// Structural checks of a network together with the demand attached to it.
pub fn validate_topology(topology: &NetworkTopology, demand: &DemandModel) -> ValidationReport {
    let mut r = ValidationReport::default();
    let index = topology.node_index();
    let t_max = topology.horizon.periods;
    if t_max == 0 {
        r.push(Severity::Error, "empty horizon", "horizon has no periods".into());
    }
    if index.len() != topology.nodes.len() {
        r.push(Severity::Error, "duplicate node", "node ids are not unique".into());
    }
    for n in &topology.nodes {
        if !(n.refrigerator_capacity >= 0.0) || !(n.freezer_capacity >= 0.0) {
            r.push(Severity::Error, "negative capacity", format!("node {} has a negative capacity", n.id));
        }
        if let Some(p) = &n.supply_periods {
            if p.is_empty() || p.iter().any(|&t| t == 0 || t > t_max) {
                r.push(Severity::Error, "bad supply schedule", format!("node {} supply periods {p:?}", n.id));
            }
        }
    }
    if !topology.nodes.iter().any(|n| n.tier == Tier::Central) {
        r.push(Severity::Error, "no central store", "network has no central store".into());
    }
    for a in &topology.arcs {
        if a.from == a.to {
            r.push(Severity::Error, "self-loop", format!("arc {} -> {} is a self-loop", a.from, a.to));
        }
        let (Some(&f), Some(&t)) = (index.get(a.from.as_str()), index.get(a.to.as_str())) else {
            r.push(Severity::Error, "dangling arc", format!("arc {} -> {} references an unknown node", a.from, a.to));
            continue;
        };
        let (tf, tt) = (topology.nodes[f].tier.rank(), topology.nodes[t].tier.rank());
        if tt <= tf && a.from != a.to {
            r.push(Severity::Error, "upstream arc", format!("arc {} -> {} does not flow downstream", a.from, a.to));
        } else if tt > tf + 1 && !topology.tier_skips_allowed {
            r.push(Severity::Error, "tier skip", format!("arc {} -> {} skips a tier", a.from, a.to));
        }
        if a.schedule.active_periods.is_empty() {
            r.push(Severity::Error, "empty schedule", format!("arc {} -> {} has no active periods", a.from, a.to));
        } else if a.schedule.active_periods.iter().any(|&t| t == 0 || t > t_max) {
            r.push(Severity::Error, "schedule outside horizon", format!("arc {} -> {}", a.from, a.to));
        }
        if !(a.transport_capacity >= 0.0) {
            r.push(Severity::Error, "negative capacity", format!("arc {} -> {}", a.from, a.to));
        }
    }
    // demand checks
    for (c, id) in demand.clinic_ids.iter().enumerate() {
        let total: f64 = (0..demand.vaccines).map(|i| demand.total_mean(i, c)).sum();
        let Some(&k) = index.get(id.as_str()) else {
            if total > 0.0 {
                r.push(Severity::Error, "demand on unknown node", format!("demand attached to unknown node {id}"));
            }
            continue;
        };
        let node = &topology.nodes[k];
        if node.tier != Tier::Clinic && total > 0.0 {
            r.push(Severity::Error, "demand on storage facility", format!("demand attached to {:?} node {id}", node.tier));
        }
        if node.tier == Tier::Clinic && total > 0.0 && node.refrigerator_capacity == 0.0 && node.freezer_capacity == 0.0 {
            r.push(Severity::Error, "zero-capacity clinic", format!("clinic {id} has demand but no cold storage"));
        }
        for i in 0..demand.vaccines {
            for t in 0..demand.periods {
                let mu = demand.mean(i, c, t);
                if mu > 0.0 && mu <= 10.0 {
                    r.push(
                        Severity::Warning,
                        "small mean demand",
                        format!("vaccine {i} clinic {id} period {}: mean {mu} <= 10", t + 1),
                    );
                }
            }
        }
    }
    for &k in &topology.clinics() {
        if !topology.arcs.iter().any(|a| a.to == topology.nodes[k].id) {
            r.push(Severity::Warning, "unsupplied clinic", format!("clinic {} has no inbound arc", topology.nodes[k].id));
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relocation {
    Clinics,
    Districts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RedesignSpec {
    RemoveTier { tier: Tier, relocate_to: Relocation },
}

/// Splits `total` over `targets` (sorted by id) in whole cc, remainder to the lowest id.
fn split_equally(nodes: &mut [Node], targets: &[usize], total: f64, freezer: bool) {
    if targets.is_empty() || total == 0.0 {
        return;
    }
    let mut order = targets.to_vec();
    order.sort_by(|&a, &b| nodes[a].id.cmp(&nodes[b].id));
    let share = (total / order.len() as f64).floor();
    let remainder = total - share * order.len() as f64;
    for (k, &n) in order.iter().enumerate() {
        let add = if k == 0 { share + remainder } else { share };
        if freezer {
            nodes[n].freezer_capacity += add;
        } else {
            nodes[n].refrigerator_capacity += add;
        }
    }
}

pub fn apply_redesign(topology: &NetworkTopology, redesign: RedesignSpec) -> Result<NetworkTopology> {
    let RedesignSpec::RemoveTier { tier, relocate_to } = redesign;
    if matches!(tier, Tier::Central | Tier::Clinic) {
        return Err(CoreError::TierNotRemovable(tier));
    }
    if tier == Tier::District && relocate_to == Relocation::Districts {
        return Err(CoreError::Invalid("cannot relocate capacity into the removed tier".into()));
    }
    let removed: BTreeSet<String> =
        topology.nodes.iter().filter(|n| n.tier == tier).map(|n| n.id.clone()).collect();
    let total_r: f64 = topology.nodes.iter().filter(|n| n.tier == tier).map(|n| n.refrigerator_capacity).sum();
    let total_f: f64 = topology.nodes.iter().filter(|n| n.tier == tier).map(|n| n.freezer_capacity).sum();

    let mut nodes: Vec<Node> = topology.nodes.iter().filter(|n| n.tier != tier).cloned().collect();
    let target_tier = match relocate_to {
        Relocation::Clinics => Tier::Clinic,
        Relocation::Districts => Tier::District,
    };
    let targets: Vec<usize> = (0..nodes.len()).filter(|&k| nodes[k].tier == target_tier).collect();
    if targets.is_empty() && (total_r > 0.0 || total_f > 0.0) {
        return Err(CoreError::Invalid(format!("no {target_tier:?} nodes to receive relocated capacity")));
    }
    split_equally(&mut nodes, &targets, total_r, false);
    split_equally(&mut nodes, &targets, total_f, true);

    let mut arcs: Vec<Arc> = Vec::new();
    let mut key: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut add = |arcs: &mut Vec<Arc>, a: Arc| match key.get(&(a.from.clone(), a.to.clone())) {
        Some(&k) => {
            arcs[k].transport_capacity = arcs[k].transport_capacity.max(a.transport_capacity);
        }
        None => {
            key.insert((a.from.clone(), a.to.clone()), arcs.len());
            arcs.push(a);
        }
    };
    for a in &topology.arcs {
        if !removed.contains(&a.from) && !removed.contains(&a.to) {
            add(&mut arcs, a.clone());
        }
    }
    for r in &removed {
        for up in topology.arcs.iter().filter(|a| &a.to == r) {
            for down in topology.arcs.iter().filter(|a| &a.from == r) {
                add(
                    &mut arcs,
                    Arc {
                        from: up.from.clone(),
                        to: down.to.clone(),
                        transport_capacity: up.transport_capacity.max(down.transport_capacity),
                        schedule: down.schedule.clone(),
                    },
                );
            }
        }
    }
    Ok(NetworkTopology { horizon: topology.horizon.clone(), nodes, arcs, tier_skips_allowed: true })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PresentationSwap {
    Thermostable { vaccine: String },
    DualChamber { vaccine: String, per_dose_volume: f64 },
}

pub fn apply_presentation_swap(catalog: &[VaccineType], swap: &PresentationSwap) -> Result<Vec<VaccineType>> {
    let id = match swap {
        PresentationSwap::Thermostable { vaccine } | PresentationSwap::DualChamber { vaccine, .. } => vaccine,
    };
    let k = catalog.iter().position(|v| &v.id == id).ok_or_else(|| CoreError::UnknownVaccine(id.clone()))?;
    let mut out = catalog.to_vec();
    let v = &mut out[k];
    match swap {
        PresentationSwap::Thermostable { .. } => v.thermostable = true,
        PresentationSwap::DualChamber { per_dose_volume, .. } => {
            if !(*per_dose_volume > 0.0) {
                return Err(CoreError::Invalid("dual-chamber volume must be positive".into()));
            }
            let diluent = v.diluent_per_dose();
            v.presentations = vec![VialPresentation {
                vial_size: 1,
                packed_volume_per_dose: *per_dose_volume,
                diluent_volume_per_dose: diluent,
            }];
            v.dual_chamber = true;
        }
    }
    Ok(out)
}
