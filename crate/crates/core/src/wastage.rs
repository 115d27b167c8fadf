//! Wastage fractions: storage, transit and open-vial losses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::demand::DemandModel;
use crate::error::{CoreError, Result};
use crate::model::{NetworkTopology, Tier, VaccineType};
use crate::ovw::{estimate_ovw, OvwQuery};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Store {
    Refrigerator,
    Freezer,
}

impl Store {
    pub const BOTH: [Store; 2] = [Store::Refrigerator, Store::Freezer];

    pub fn code(self) -> &'static str {
        match self {
            Store::Refrigerator => "R",
            Store::Freezer => "F",
        }
    }
}

/// Shipment route: storage at the origin, storage at the destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Route {
    RR,
    RF,
    FR,
    FF,
}

impl Route {
    pub const ALL: [Route; 4] = [Route::RR, Route::RF, Route::FR, Route::FF];

    pub fn origin(self) -> Store {
        match self {
            Route::RR | Route::RF => Store::Refrigerator,
            Route::FR | Route::FF => Store::Freezer,
        }
    }

    pub fn destination(self) -> Store {
        match self {
            Route::RR | Route::FR => Store::Refrigerator,
            Route::RF | Route::FF => Store::Freezer,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitLoss {
    #[serde(default)]
    pub rr: f64,
    #[serde(default)]
    pub rf: f64,
    #[serde(default)]
    pub fr: f64,
    #[serde(default)]
    pub ff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateTag {
    Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OvwSetting {
    Fixed(f64),
    Estimate(EstimateTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WastageKind {
    Refrigerator,
    Freezer,
    TransitRR,
    TransitRF,
    TransitFR,
    TransitFF,
    OpenVial,
}

/// Replaces one family of fractions wherever all given filters match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WastageOverride {
    pub kind: WastageKind,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vaccine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vial_size: Option<u32>,
    /// node id, or arc origin for transit kinds
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    /// arc destination for transit kinds
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<usize>>,
}

/// Instance-file form: defaults plus overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WastageSpec {
    #[serde(default)]
    pub refrigerator: f64,
    #[serde(default)]
    pub freezer: f64,
    #[serde(default)]
    pub transit: TransitLoss,
    /// vaccine id -> fixed fraction or "estimate"; missing vaccines are estimated
    #[serde(default)]
    pub open_vial: BTreeMap<String, OvwSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions_per_period: Option<u32>,
    #[serde(default)]
    pub overrides: Vec<WastageOverride>,
}

/// Resolved fractions on a concrete network and catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct WastageProfile {
    periods: usize,
    nodes: usize,
    arcs: usize,
    /// start of each vaccine's presentations in the flat presentation list
    offsets: Vec<usize>,
    refrigerator: Vec<f64>,
    freezer: Vec<f64>,
    transit: [Vec<f64>; 4],
    open_vial: Vec<f64>,
}

fn check_fraction(v: f64, what: &str) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(CoreError::Invalid(format!("{what} fraction {v} outside [0, 1)")))
    }
}

impl WastageProfile {
    /// All fractions zero.
    pub fn zero(topology: &NetworkTopology, catalog: &[VaccineType]) -> WastageProfile {
        let mut offsets = vec![0];
        for v in catalog {
            offsets.push(offsets.last().unwrap() + v.presentations.len());
        }
        let flat = *offsets.last().unwrap();
        let (t, n, a) = (topology.horizon.periods, topology.nodes.len(), topology.arcs.len());
        WastageProfile {
            periods: t,
            nodes: n,
            arcs: a,
            offsets,
            refrigerator: vec![0.0; flat * n * t],
            freezer: vec![0.0; flat * n * t],
            transit: std::array::from_fn(|_| vec![0.0; flat * a * t]),
            open_vial: vec![0.0; flat * n * t],
        }
    }

    pub fn resolve(
        spec: &WastageSpec,
        topology: &NetworkTopology,
        catalog: &[VaccineType],
        demand: &DemandModel,
    ) -> Result<WastageProfile> {
        check_fraction(spec.refrigerator, "refrigerator")?;
        check_fraction(spec.freezer, "freezer")?;
        for (v, name) in [(spec.transit.rr, "RR"), (spec.transit.rf, "RF"), (spec.transit.fr, "FR"), (spec.transit.ff, "FF")] {
            check_fraction(v, name)?;
        }
        for id in spec.open_vial.keys() {
            if !catalog.iter().any(|v| &v.id == id) {
                return Err(CoreError::UnknownVaccine(id.clone()));
            }
        }
        let mut w = WastageProfile::zero(topology, catalog);
        w.refrigerator.fill(spec.refrigerator);
        w.freezer.fill(spec.freezer);
        for (r, v) in Route::ALL.iter().zip([spec.transit.rr, spec.transit.rf, spec.transit.fr, spec.transit.ff]) {
            w.transit[r.slot()].fill(v);
        }

        let days = topology.horizon.period_length_days;
        let sessions = spec.sessions_per_period.unwrap_or(days);
        let clinic_pos: BTreeMap<&str, usize> =
            demand.clinic_ids.iter().enumerate().map(|(c, id)| (id.as_str(), c)).collect();
        for (i, v) in catalog.iter().enumerate() {
            let setting = spec.open_vial.get(&v.id).copied().unwrap_or(OvwSetting::Estimate(EstimateTag::Estimate));
            for (p, pres) in v.presentations.iter().enumerate() {
                for (n, node) in topology.nodes.iter().enumerate() {
                    if node.tier != Tier::Clinic || pres.vial_size == 1 {
                        continue;
                    }
                    let value = match setting {
                        OvwSetting::Fixed(f) => {
                            check_fraction(f, "open-vial")?;
                            f
                        }
                        OvwSetting::Estimate(_) => {
                            let mu = clinic_pos.get(node.id.as_str()).map_or(0.0, |&c| demand.daily_mean(i, c));
                            estimate_ovw(&OvwQuery {
                                daily_mean: mu,
                                vial_size: pres.vial_size,
                                sessions_per_period: sessions,
                                period_length_days: days,
                            })
                        }
                    };
                    for t in 1..=w.periods {
                        let k = w.node_cell(w.offsets[i] + p, n, t);
                        w.open_vial[k] = value;
                    }
                }
            }
        }

        let node_ix = topology.node_index();
        for o in &spec.overrides {
            check_fraction(o.value, "override")?;
            let vaccines: Vec<usize> = match &o.vaccine {
                Some(id) => vec![catalog.iter().position(|v| &v.id == id).ok_or_else(|| CoreError::UnknownVaccine(id.clone()))?],
                None => (0..catalog.len()).collect(),
            };
            let periods: Vec<usize> = o.periods.clone().unwrap_or_else(|| (1..=w.periods).collect());
            if periods.iter().any(|&t| t == 0 || t > w.periods) {
                return Err(CoreError::Invalid(format!("override periods {periods:?} outside horizon")));
            }
            let transit = match o.kind {
                WastageKind::TransitRR => Some(Route::RR),
                WastageKind::TransitRF => Some(Route::RF),
                WastageKind::TransitFR => Some(Route::FR),
                WastageKind::TransitFF => Some(Route::FF),
                _ => None,
            };
            let nodes: Vec<usize> = match (&o.node, transit) {
                (Some(id), None) => {
                    vec![*node_ix.get(id.as_str()).ok_or_else(|| CoreError::Invalid(format!("override names unknown node {id}")))?]
                }
                _ => (0..w.nodes).collect(),
            };
            let arcs: Vec<usize> = (0..w.arcs)
                .filter(|&a| {
                    let arc = &topology.arcs[a];
                    o.node.as_ref().is_none_or(|f| &arc.from == f) && o.to.as_ref().is_none_or(|t| &arc.to == t)
                })
                .collect();
            for &i in &vaccines {
                for (p, pres) in catalog[i].presentations.iter().enumerate() {
                    if o.vial_size.is_some_and(|b| b != pres.vial_size) {
                        continue;
                    }
                    let f = w.offsets[i] + p;
                    for &t in &periods {
                        if let Some(r) = transit {
                            for &a in &arcs {
                                let k = w.arc_cell(f, a, t);
                                w.transit[r.slot()][k] = o.value;
                            }
                            continue;
                        }
                        for &n in &nodes {
                            let k = w.node_cell(f, n, t);
                            match o.kind {
                                WastageKind::Refrigerator => w.refrigerator[k] = o.value,
                                WastageKind::Freezer => w.freezer[k] = o.value,
                                WastageKind::OpenVial => {
                                    if topology.nodes[n].tier == Tier::Clinic && pres.vial_size > 1 {
                                        w.open_vial[k] = o.value;
                                    }
                                }
                                _ => unreachable!(),
                            }
                        }
                    }
                }
            }
        }
        Ok(w)
    }

    fn node_cell(&self, flat: usize, node: usize, t: usize) -> usize {
        (flat * self.nodes + node) * self.periods + (t - 1)
    }

    fn arc_cell(&self, flat: usize, arc: usize, t: usize) -> usize {
        (flat * self.arcs + arc) * self.periods + (t - 1)
    }

    fn flat(&self, i: usize, p: usize) -> usize {
        self.offsets[i] + p
    }

    /// Storage loss over period `t` (1-based).
    pub fn storage(&self, store: Store, i: usize, p: usize, node: usize, t: usize) -> f64 {
        let k = self.node_cell(self.flat(i, p), node, t);
        match store {
            Store::Refrigerator => self.refrigerator[k],
            Store::Freezer => self.freezer[k],
        }
    }

    /// Loss on shipments departing in period `t`.
    pub fn transit(&self, route: Route, i: usize, p: usize, arc: usize, t: usize) -> f64 {
        self.transit[route.slot()][self.arc_cell(self.flat(i, p), arc, t)]
    }

    pub fn open_vial(&self, i: usize, p: usize, node: usize, t: usize) -> f64 {
        self.open_vial[self.node_cell(self.flat(i, p), node, t)]
    }

    /// Whether the profile was resolved against networks and catalogs of these sizes.
    pub fn fits(&self, topology: &NetworkTopology, catalog: &[VaccineType]) -> bool {
        let mut offsets = vec![0];
        for v in catalog {
            offsets.push(offsets.last().unwrap() + v.presentations.len());
        }
        self.periods == topology.horizon.periods
            && self.nodes == topology.nodes.len()
            && self.arcs == topology.arcs.len()
            && self.offsets == offsets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn setup() -> (NetworkTopology, Vec<VaccineType>, DemandModel) {
        let node = |id: &str, tier| Node {
            id: id.into(),
            tier,
            refrigerator_capacity: 100.0,
            freezer_capacity: 0.0,
            region: None,
            supply_periods: None,
        };
        let topo = NetworkTopology {
            horizon: Horizon::months(2),
            nodes: vec![node("C", Tier::Central), node("K", Tier::Clinic)],
            arcs: vec![Arc { from: "C".into(), to: "K".into(), transport_capacity: 10.0, schedule: ScheduleMask::every(2, 1, 1) }],
            tier_skips_allowed: false,
        };
        let v = VaccineType {
            id: "M".into(),
            name: "M".into(),
            regimen_doses: 2,
            storage_class: StorageClass::RefrigeratorOnly,
            presentations: vec![
                VialPresentation { vial_size: 1, packed_volume_per_dose: 5.0, diluent_volume_per_dose: 0.0 },
                VialPresentation { vial_size: 10, packed_volume_per_dose: 2.0, diluent_volume_per_dose: 0.0 },
            ],
            thermostable: false,
            dual_chamber: false,
        };
        let mut d = DemandModel::zeros(1, vec!["K".into()], 2);
        d.set(0, 0, 0, 60.0, 6.0);
        d.set(0, 0, 1, 60.0, 6.0);
        d.daily[0] = 2.0;
        (topo, vec![v], d)
    }

    #[test]
    fn estimate_and_overrides() {
        let (topo, cat, d) = setup();
        let mut spec = WastageSpec { refrigerator: 0.01, ..Default::default() };
        spec.overrides.push(WastageOverride {
            kind: WastageKind::TransitRR,
            value: 0.05,
            vaccine: None,
            vial_size: Some(10),
            node: Some("C".into()),
            to: Some("K".into()),
            periods: Some(vec![2]),
        });
        let w = WastageProfile::resolve(&spec, &topo, &cat, &d).unwrap();
        assert_eq!(w.open_vial(0, 0, 1, 1), 0.0);
        let est = estimate_ovw(&OvwQuery { daily_mean: 2.0, vial_size: 10, sessions_per_period: 30, period_length_days: 30 });
        assert_eq!(w.open_vial(0, 1, 1, 2), est);
        assert_eq!(w.open_vial(0, 1, 0, 2), 0.0);
        assert_eq!(w.storage(Store::Refrigerator, 0, 1, 0, 1), 0.01);
        assert_eq!(w.transit(Route::RR, 0, 1, 0, 2), 0.05);
        assert_eq!(w.transit(Route::RR, 0, 1, 0, 1), 0.0);
        assert_eq!(w.transit(Route::RR, 0, 0, 0, 2), 0.0);
    }

    #[test]
    fn fixed_open_vial_and_bad_fraction() {
        let (topo, cat, d) = setup();
        let mut spec = WastageSpec::default();
        spec.open_vial.insert("M".into(), OvwSetting::Fixed(0.25));
        let w = WastageProfile::resolve(&spec, &topo, &cat, &d).unwrap();
        assert_eq!(w.open_vial(0, 1, 1, 1), 0.25);
        assert_eq!(w.open_vial(0, 0, 1, 1), 0.0);
        spec.freezer = 1.0;
        assert!(WastageProfile::resolve(&spec, &topo, &cat, &d).is_err());
    }

    #[test]
    fn open_vial_setting_parses() {
        let s: BTreeMap<String, OvwSetting> = serde_json::from_str(r#"{"A": "estimate", "B": 0.3}"#).unwrap();
        assert_eq!(s["A"], OvwSetting::Estimate(EstimateTag::Estimate));
        assert_eq!(s["B"], OvwSetting::Fixed(0.3));
    }
}
