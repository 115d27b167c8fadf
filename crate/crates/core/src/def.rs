//! Scenario-expanded penalty LP over a cold-chain network.
//!
//! Quantities are in doses in the base model. In the extended model inventory,
//! shipments and served variables count vials and are weighted by the vial size
//! wherever doses matter (objective, coverage rows, scenario rows, capacities).

use std::collections::{BTreeMap, HashMap};
use std::io::BufWriter;
use std::path::Path;

use coldchain_lp::mps::write_mps;
use coldchain_lp::{LinearProgram, LpBuilder, RowSense, Sense};
use serde::{Deserialize, Serialize};

use crate::demand::ScenarioSet;
use crate::error::{CoreError, Result};
use crate::instance::ModelInputs;
use crate::metrics::quantile_sorted;
use crate::model::Tier;
use crate::wastage::{Route, Store};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PenaltyVector {
    Uniform(f64),
    /// one value per (vaccine, clinic, period) coordinate, in [`DefProblem::coord`] order
    PerCoordinate(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefConfig {
    /// Required probability of meeting demand per (vaccine, clinic, period).
    pub service_level: f64,
    /// Weight of the served-doses term; default 1 / total mean demand.
    pub eps_weight: Option<f64>,
    pub penalties: PenaltyVector,
    pub extended: bool,
}

impl Default for DefConfig {
    fn default() -> Self {
        DefConfig { service_level: 0.7, eps_weight: None, penalties: PenaltyVector::Uniform(0.0), extended: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VarKind {
    Served { store: Store, vaccine: usize, presentation: usize, node: usize, period: usize },
    Covered { node: usize },
    Inventory { store: Store, vaccine: usize, presentation: usize, node: usize, period: usize },
    Shipment { route: Route, vaccine: usize, presentation: usize, arc: usize, period: usize },
    Supply { store: Store, vaccine: usize, presentation: usize, node: usize, period: usize },
    Shortage { vaccine: usize, clinic: usize, period: usize, scenario: usize },
    Excess { vaccine: usize, clinic: usize, period: usize, scenario: usize },
}

impl VarKind {
    pub fn family(&self) -> &'static str {
        match self {
            VarKind::Served { .. } => "served",
            VarKind::Covered { .. } => "covered",
            VarKind::Inventory { .. } => "inventory",
            VarKind::Shipment { .. } => "shipment",
            VarKind::Supply { .. } => "supply",
            VarKind::Shortage { .. } => "shortage",
            VarKind::Excess { .. } => "excess",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum RowKind {
    Balance { store: Store, vaccine: usize, presentation: usize, node: usize, period: usize },
    Capacity { store: Store, node: usize, period: usize },
    Init { store: Store, vaccine: usize, presentation: usize, node: usize },
    NoFreezer { vaccine: usize, presentation: usize, node: usize },
    Transport { arc: usize, period: usize },
    Coverage { vaccine: usize, clinic: usize },
    Scenario { vaccine: usize, clinic: usize, period: usize, scenario: usize },
}

impl RowKind {
    pub fn family(&self) -> &'static str {
        match self {
            RowKind::Balance { .. } => "balance",
            RowKind::Capacity { .. } => "capacity",
            RowKind::Init { .. } => "init",
            RowKind::NoFreezer { .. } => "no_freezer",
            RowKind::Transport { .. } => "transport",
            RowKind::Coverage { .. } => "coverage",
            RowKind::Scenario { .. } => "scenario",
        }
    }
}

/// Dense column ids and their meaning.
#[derive(Clone, Debug, Default)]
pub struct VariableIndex {
    kinds: Vec<VarKind>,
    lookup: HashMap<VarKind, usize>,
}

impl VariableIndex {
    fn push(&mut self, kind: VarKind) -> usize {
        let id = self.kinds.len();
        let fresh = self.lookup.insert(kind, id).is_none();
        debug_assert!(fresh, "duplicate variable {kind:?}");
        self.kinds.push(kind);
        id
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, id: usize) -> VarKind {
        self.kinds[id]
    }

    pub fn id(&self, kind: &VarKind) -> Option<usize> {
        self.lookup.get(kind).copied()
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }
}

/// Served doses per coordinate and coverage per clinic, detached from the LP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServedPlan {
    pub vaccines: usize,
    pub periods: usize,
    pub clinic_ids: Vec<String>,
    pub regions: Vec<String>,
    pub regimen: Vec<u32>,
    /// doses, index `(i * clinics + c) * periods + t`
    pub served: Vec<f64>,
    /// n_j per clinic
    pub covered: Vec<f64>,
}

impl ServedPlan {
    pub fn clinics(&self) -> usize {
        self.clinic_ids.len()
    }

    pub fn served(&self, i: usize, c: usize, t: usize) -> f64 {
        self.served[(i * self.clinics() + c) * self.periods + t]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefSummary {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub sample_size: usize,
    pub extended: bool,
    pub eps_weight: f64,
    pub rows_by_family: BTreeMap<String, usize>,
    pub cols_by_family: BTreeMap<String, usize>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct DefProblem {
    pub lp: LinearProgram,
    pub index: VariableIndex,
    pub rows: Vec<RowKind>,
    pub config: DefConfig,
    pub eps_weight: f64,
    pub penalties: Vec<f64>,
    pub sample_size: usize,
    pub scenario_digest: String,
    pub diagnostics: Vec<String>,
    pub vaccines: usize,
    pub periods: usize,
    /// node index of each clinic
    pub clinics: Vec<usize>,
    pub plan_template: ServedPlan,
    arcs: Vec<(String, String)>,
    /// (column, doses per unit) per coordinate
    served_cols: Vec<Vec<(usize, f64)>>,
    covered_cols: Vec<usize>,
    /// (v, z) columns, index `coord * S + s`
    slack_cols: Vec<(usize, usize)>,
    /// δ, index `coord * S + s`
    demand: Vec<f64>,
}

fn clean(id: &str) -> String {
    id.chars().map(|c| if c.is_whitespace() || c == ',' { '_' } else { c }).collect()
}

/// Builds the scenario-expanded LP for `inputs` under `config`.
pub fn build_def(inputs: &ModelInputs, scenarios: &ScenarioSet, config: &DefConfig) -> Result<DefProblem> {
    let topo = &inputs.topology;
    let catalog = &inputs.catalog;
    let w = &inputs.wastage;
    let demand = &inputs.demand;
    let t_max = topo.horizon.periods;
    let lag = topo.horizon.transit_lag;
    let n_vac = catalog.len();
    let s_count = scenarios.sample_size;
    if !w.fits(topo, catalog) {
        return Err(CoreError::IndexMismatch("wastage profile does not match network or catalog".into()));
    }
    if !config.extended {
        if let Some(v) = catalog.iter().find(|v| v.presentations.len() != 1) {
            return Err(CoreError::Invalid(format!("base model needs one presentation per vaccine; {} has {}", v.id, v.presentations.len())));
        }
    }
    if scenarios.vaccines != n_vac || scenarios.periods != t_max {
        return Err(CoreError::IndexMismatch("scenario set does not match catalog or horizon".into()));
    }
    if !(config.service_level > 0.0 && config.service_level < 1.0) {
        return Err(CoreError::Invalid(format!("service level {} outside (0, 1)", config.service_level)));
    }

    let clinics = topo.clinics();
    let n_clin = clinics.len();
    let scen_pos: Vec<usize> = clinics
        .iter()
        .map(|&k| {
            scenarios
                .clinic_ids
                .iter()
                .position(|id| id == &topo.nodes[k].id)
                .ok_or_else(|| CoreError::IndexMismatch(format!("no scenarios for clinic {}", topo.nodes[k].id)))
        })
        .collect::<Result<_>>()?;
    let demand_pos: Vec<Option<usize>> =
        topo.nodes.iter().map(|n| demand.clinic_ids.iter().position(|id| id == &n.id)).collect();
    let clinic_of: HashMap<usize, usize> = clinics.iter().enumerate().map(|(c, &k)| (k, c)).collect();
    let n_coord = n_vac * n_clin * t_max;
    let coord = |i: usize, c: usize, t: usize| (i * n_clin + c) * t_max + (t - 1);

    let eps = match config.eps_weight {
        Some(e) => e,
        None => {
            let total = demand.grand_total();
            if total > 0.0 {
                1.0 / total
            } else {
                1.0
            }
        }
    };
    let penalties = match &config.penalties {
        PenaltyVector::Uniform(p) => vec![*p; n_coord],
        PenaltyVector::PerCoordinate(v) => {
            if v.len() != n_coord {
                return Err(CoreError::IndexMismatch(format!("{} penalties for {n_coord} coordinates", v.len())));
            }
            v.clone()
        }
    };
    if penalties.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(CoreError::Invalid("penalties must be finite and non-negative".into()));
    }

    let unit = |i: usize, p: usize| if config.extended { catalog[i].presentations[p].vial_size as f64 } else { 1.0 };
    let vname = |i: usize, p: usize| format!("{},{}", clean(&catalog[i].id), catalog[i].presentations[p].vial_size);
    let nname = |k: usize| clean(&topo.nodes[k].id);
    let aname = |a: usize| format!("{}>{}", clean(&topo.arcs[a].from), clean(&topo.arcs[a].to));

    let mut b = LpBuilder::new(if inputs.name.is_empty() { "coldchain".to_string() } else { clean(&inputs.name) }, Sense::Maximize);
    let mut index = VariableIndex::default();
    let mut add = |b: &mut LpBuilder, kind: VarKind, name: String, cost: f64| {
        let id = b.add_column(name, cost, 0.0, f64::INFINITY);
        let k = index.push(kind);
        debug_assert_eq!(id, k);
        id
    };

    // served
    let mut served_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_coord];
    for (c, &k) in clinics.iter().enumerate() {
        for i in 0..n_vac {
            for p in 0..catalog[i].presentations.len() {
                for t in 1..=t_max {
                    for store in Store::BOTH {
                        let u = unit(i, p);
                        let id = add(
                            &mut b,
                            VarKind::Served { store, vaccine: i, presentation: p, node: k, period: t },
                            format!("x{}[{},{},{t}]", store.code(), vname(i, p), nname(k)),
                            eps * u,
                        );
                        served_cols[coord(i, c, t)].push((id, u));
                    }
                }
            }
        }
    }
    let covered_cols: Vec<usize> =
        clinics.iter().map(|&k| add(&mut b, VarKind::Covered { node: k }, format!("n[{}]", nname(k)), 1.0)).collect();
    for i in 0..n_vac {
        for p in 0..catalog[i].presentations.len() {
            for k in 0..topo.nodes.len() {
                for t in 0..=t_max {
                    for store in Store::BOTH {
                        add(
                            &mut b,
                            VarKind::Inventory { store, vaccine: i, presentation: p, node: k, period: t },
                            format!("I{}[{},{},{t}]", store.code(), vname(i, p), nname(k)),
                            0.0,
                        );
                    }
                }
            }
        }
    }
    let active: Vec<Vec<usize>> = topo
        .arcs
        .iter()
        .map(|a| {
            let mut p: Vec<usize> = a.schedule.active_periods.iter().copied().filter(|&t| t >= 1 && t <= t_max).collect();
            p.sort_unstable();
            p.dedup();
            p
        })
        .collect();
    for (a, periods) in active.iter().enumerate() {
        for &t in periods {
            for i in 0..n_vac {
                for p in 0..catalog[i].presentations.len() {
                    for route in Route::ALL {
                        add(
                            &mut b,
                            VarKind::Shipment { route, vaccine: i, presentation: p, arc: a, period: t },
                            format!("S{:?}[{},{},{t}]", route, vname(i, p), aname(a)),
                            0.0,
                        );
                    }
                }
            }
        }
    }
    for (k, node) in topo.nodes.iter().enumerate() {
        if node.tier != Tier::Central {
            continue;
        }
        for t in topo.supply_periods(k) {
            for i in 0..n_vac {
                for p in 0..catalog[i].presentations.len() {
                    for store in Store::BOTH {
                        add(
                            &mut b,
                            VarKind::Supply { store, vaccine: i, presentation: p, node: k, period: t },
                            format!("U{}[{},{},{t}]", store.code(), vname(i, p), nname(k)),
                            0.0,
                        );
                    }
                }
            }
        }
    }
    let mut slack_cols = Vec::with_capacity(n_coord * s_count);
    for i in 0..n_vac {
        for (c, &k) in clinics.iter().enumerate() {
            for t in 1..=t_max {
                let pi = penalties[coord(i, c, t)];
                for s in 0..s_count {
                    let v = add(
                        &mut b,
                        VarKind::Shortage { vaccine: i, clinic: c, period: t, scenario: s },
                        format!("v[{},{},{t},{s}]", clean(&catalog[i].id), nname(k)),
                        -pi,
                    );
                    let z = add(
                        &mut b,
                        VarKind::Excess { vaccine: i, clinic: c, period: t, scenario: s },
                        format!("z[{},{},{t},{s}]", clean(&catalog[i].id), nname(k)),
                        0.0,
                    );
                    slack_cols.push((v, z));
                }
            }
        }
    }
    let col = |kind: VarKind| index.id(&kind).expect("variable exists");
    let node_ix = topo.node_index();
    let mut arcs_in: Vec<Vec<usize>> = vec![Vec::new(); topo.nodes.len()];
    let mut arcs_out: Vec<Vec<usize>> = vec![Vec::new(); topo.nodes.len()];
    for (a, arc) in topo.arcs.iter().enumerate() {
        arcs_in[node_ix[arc.to.as_str()]].push(a);
        arcs_out[node_ix[arc.from.as_str()]].push(a);
    }

    let mut rows = Vec::new();
    let mut add_row = |b: &mut LpBuilder, kind: RowKind, name: String, sense: RowSense, rhs: f64, entries: &[(usize, f64)]| {
        b.add_row(name, sense, rhs, entries);
        rows.push(kind);
    };

    // inventory balance
    for i in 0..n_vac {
        for p in 0..catalog[i].presentations.len() {
            for k in 0..topo.nodes.len() {
                for t in 1..=t_max {
                    for store in Store::BOTH {
                        let mut e = vec![
                            (col(VarKind::Inventory { store, vaccine: i, presentation: p, node: k, period: t }), 1.0),
                            (
                                col(VarKind::Inventory { store, vaccine: i, presentation: p, node: k, period: t - 1 }),
                                -(1.0 - w.storage(store, i, p, k, (t - 1).max(1))),
                            ),
                        ];
                        for &a in &arcs_in[k] {
                            if t > lag && active[a].contains(&(t - lag)) {
                                let d = t - lag;
                                for route in Route::ALL.into_iter().filter(|r| r.destination() == store) {
                                    let id = col(VarKind::Shipment { route, vaccine: i, presentation: p, arc: a, period: d });
                                    e.push((id, -(1.0 - w.transit(route, i, p, a, d))));
                                }
                            }
                        }
                        for &a in &arcs_out[k] {
                            if active[a].contains(&t) {
                                for route in Route::ALL.into_iter().filter(|r| r.origin() == store) {
                                    e.push((col(VarKind::Shipment { route, vaccine: i, presentation: p, arc: a, period: t }), 1.0));
                                }
                            }
                        }
                        if let Some(id) = index.id(&VarKind::Supply { store, vaccine: i, presentation: p, node: k, period: t }) {
                            e.push((id, -1.0));
                        }
                        if clinic_of.contains_key(&k) {
                            let x = col(VarKind::Served { store, vaccine: i, presentation: p, node: k, period: t });
                            e.push((x, 1.0 / (1.0 - w.open_vial(i, p, k, t))));
                        }
                        add_row(
                            &mut b,
                            RowKind::Balance { store, vaccine: i, presentation: p, node: k, period: t },
                            format!("bal{}[{},{},{t}]", store.code(), vname(i, p), nname(k)),
                            RowSense::Eq,
                            0.0,
                            &e,
                        );
                    }
                }
            }
        }
    }

    // node capacity
    let mut diagnostics = Vec::new();
    for (k, node) in topo.nodes.iter().enumerate() {
        let diluent: f64 = match demand_pos[k] {
            Some(c) if node.tier == Tier::Clinic => (0..n_vac)
                .filter(|&i| !catalog[i].dual_chamber && !catalog[i].thermostable)
                .map(|i| catalog[i].diluent_per_dose() * demand.daily_mean(i, c))
                .sum(),
            _ => 0.0,
        };
        for t in 1..=t_max {
            for store in Store::BOTH {
                let mut e = Vec::new();
                for (i, v) in catalog.iter().enumerate() {
                    if v.thermostable {
                        continue;
                    }
                    for (p, pres) in v.presentations.iter().enumerate() {
                        let per_dose = match store {
                            Store::Refrigerator if v.dual_chamber => pres.packed_volume_per_dose + pres.diluent_volume_per_dose,
                            _ => pres.packed_volume_per_dose,
                        };
                        let coef = per_dose * unit(i, p);
                        e.push((col(VarKind::Inventory { store, vaccine: i, presentation: p, node: k, period: t }), coef));
                        for &a in &arcs_in[k] {
                            if active[a].contains(&t) {
                                for route in Route::ALL.into_iter().filter(|r| r.destination() == store) {
                                    let id = col(VarKind::Shipment { route, vaccine: i, presentation: p, arc: a, period: t });
                                    e.push((id, coef * (1.0 - w.transit(route, i, p, a, t))));
                                }
                            }
                        }
                    }
                }
                let rhs = match store {
                    Store::Refrigerator => node.refrigerator_capacity - diluent,
                    Store::Freezer => node.freezer_capacity,
                };
                if rhs < 0.0 {
                    diagnostics.push(format!(
                        "negative {:?} capacity {rhs} at node {} period {t} after diluent adjustment",
                        store, node.id
                    ));
                }
                add_row(
                    &mut b,
                    RowKind::Capacity { store, node: k, period: t },
                    format!("cap{}[{},{t}]", store.code(), nname(k)),
                    RowSense::Le,
                    rhs,
                    &e,
                );
            }
        }
    }

    // initial and terminal inventory
    for i in 0..n_vac {
        for p in 0..catalog[i].presentations.len() {
            for k in 0..topo.nodes.len() {
                for store in Store::BOTH {
                    let id = col(VarKind::Inventory { store, vaccine: i, presentation: p, node: k, period: 0 });
                    add_row(
                        &mut b,
                        RowKind::Init { store, vaccine: i, presentation: p, node: k },
                        format!("init{}[{},{}]", store.code(), vname(i, p), nname(k)),
                        RowSense::Eq,
                        0.0,
                        &[(id, 1.0)],
                    );
                }
                if catalog[i].refrigerator_only() {
                    let id = col(VarKind::Inventory { store: Store::Freezer, vaccine: i, presentation: p, node: k, period: t_max });
                    add_row(
                        &mut b,
                        RowKind::NoFreezer { vaccine: i, presentation: p, node: k },
                        format!("nofrz[{},{}]", vname(i, p), nname(k)),
                        RowSense::Eq,
                        0.0,
                        &[(id, 1.0)],
                    );
                }
            }
        }
    }

    // transport
    for (a, arc) in topo.arcs.iter().enumerate() {
        for &t in &active[a] {
            let mut e = Vec::new();
            for (i, v) in catalog.iter().enumerate() {
                for (p, pres) in v.presentations.iter().enumerate() {
                    for route in Route::ALL {
                        let id = col(VarKind::Shipment { route, vaccine: i, presentation: p, arc: a, period: t });
                        e.push((id, pres.packed_volume_per_dose * unit(i, p)));
                    }
                }
            }
            add_row(
                &mut b,
                RowKind::Transport { arc: a, period: t },
                format!("arc[{},{t}]", aname(a)),
                RowSense::Le,
                arc.transport_capacity,
                &e,
            );
        }
    }

    // coverage
    for i in 0..n_vac {
        let a_i = catalog[i].regimen_doses as f64;
        for c in 0..n_clin {
            let mut e = vec![(covered_cols[c], 1.0)];
            for t in 1..=t_max {
                for &(id, u) in &served_cols[coord(i, c, t)] {
                    e.push((id, -u / a_i));
                }
            }
            add_row(
                &mut b,
                RowKind::Coverage { vaccine: i, clinic: c },
                format!("fic[{},{}]", clean(&catalog[i].id), nname(clinics[c])),
                RowSense::Le,
                0.0,
                &e,
            );
        }
    }

    // scenario rows
    let mut delta = Vec::with_capacity(n_coord * s_count);
    for i in 0..n_vac {
        for c in 0..n_clin {
            for t in 1..=t_max {
                let k = coord(i, c, t);
                let draws = scenarios.draws((i * scenarios.clinics() + scen_pos[c]) * t_max + (t - 1));
                for (s, &d) in draws.iter().enumerate() {
                    let (v, z) = slack_cols[k * s_count + s];
                    let mut e = served_cols[k].clone();
                    e.push((v, 1.0));
                    e.push((z, -1.0));
                    add_row(
                        &mut b,
                        RowKind::Scenario { vaccine: i, clinic: c, period: t, scenario: s },
                        format!("dem[{},{},{t},{s}]", clean(&catalog[i].id), nname(clinics[c])),
                        RowSense::Eq,
                        d,
                        &e,
                    );
                    delta.push(d);
                }
            }
        }
    }

    let plan_template = ServedPlan {
        vaccines: n_vac,
        periods: t_max,
        clinic_ids: clinics.iter().map(|&k| topo.nodes[k].id.clone()).collect(),
        regions: clinics.iter().map(|&k| topo.nodes[k].region.clone().unwrap_or_default()).collect(),
        regimen: catalog.iter().map(|v| v.regimen_doses).collect(),
        served: vec![0.0; n_coord],
        covered: vec![0.0; n_clin],
    };
    Ok(DefProblem {
        lp: b.build(),
        index,
        rows,
        config: config.clone(),
        eps_weight: eps,
        penalties,
        sample_size: s_count,
        scenario_digest: scenarios.digest(),
        diagnostics,
        vaccines: n_vac,
        periods: t_max,
        clinics,
        plan_template,
        arcs: topo.arcs.iter().map(|a| (a.from.clone(), a.to.clone())).collect(),
        served_cols,
        covered_cols,
        slack_cols,
        demand: delta,
    })
}

impl DefProblem {
    pub fn coords(&self) -> usize {
        self.served_cols.len()
    }

    /// Coordinate of (vaccine, clinic position, period 1..=T).
    pub fn coord(&self, i: usize, c: usize, t: usize) -> usize {
        (i * self.clinics.len() + c) * self.periods + (t - 1)
    }

    /// Replaces the shortage penalties in the objective.
    pub fn set_penalties(&mut self, penalties: &[f64]) -> Result<()> {
        if penalties.len() != self.coords() {
            return Err(CoreError::IndexMismatch(format!("{} penalties for {} coordinates", penalties.len(), self.coords())));
        }
        let s = self.sample_size;
        for (k, &pi) in penalties.iter().enumerate() {
            for &(v, _) in &self.slack_cols[k * s..(k + 1) * s] {
                self.lp.objective[v] = -pi;
            }
        }
        self.penalties = penalties.to_vec();
        self.config.penalties = PenaltyVector::PerCoordinate(penalties.to_vec());
        Ok(())
    }

    /// Served doses per coordinate.
    pub fn served(&self, x: &[f64]) -> Vec<f64> {
        self.served_cols.iter().map(|cols| cols.iter().map(|&(j, u)| u * x[j]).sum()).collect()
    }

    pub fn plan(&self, x: &[f64]) -> ServedPlan {
        ServedPlan {
            served: self.served(x),
            covered: self.covered_cols.iter().map(|&j| x[j]).collect(),
            ..self.plan_template.clone()
        }
    }

    pub fn demand(&self, coord: usize, s: usize) -> f64 {
        self.demand[coord * self.sample_size + s]
    }

    pub fn shortage(&self, x: &[f64], coord: usize, s: usize) -> f64 {
        x[self.slack_cols[coord * self.sample_size + s].0]
    }

    /// Scenarios per coordinate whose shortage exceeds `tol`.
    pub fn violation_counts(&self, x: &[f64], tol: f64) -> Vec<usize> {
        let s = self.sample_size;
        (0..self.coords())
            .map(|k| self.slack_cols[k * s..(k + 1) * s].iter().filter(|&&(v, _)| x[v] > tol).count())
            .collect()
    }

    /// Objective without the penalty terms: coverage plus weighted served doses.
    pub fn model_objective(&self, x: &[f64]) -> f64 {
        let covered: f64 = self.covered_cols.iter().map(|&j| x[j]).sum();
        covered + self.eps_weight * self.served(x).iter().sum::<f64>()
    }

    pub fn column(&self, kind: &VarKind) -> Option<usize> {
        self.index.id(kind)
    }

    pub fn arc_id(&self, from: &str, to: &str) -> Option<usize> {
        self.arcs.iter().position(|(f, t)| f == from && t == to)
    }

    /// Periods with an open (not fixed to zero) shipment on the arc.
    pub fn active_periods(&self, from: &str, to: &str) -> Result<Vec<usize>> {
        let a = self.arc_id(from, to).ok_or_else(|| CoreError::UnknownArc(from.into(), to.into()))?;
        let mut out: Vec<usize> = self
            .index
            .kinds()
            .iter()
            .enumerate()
            .filter_map(|(j, k)| match k {
                VarKind::Shipment { arc, period, .. } if *arc == a && self.lp.col_upper[j] > 0.0 => Some(*period),
                _ => None,
            })
            .collect();
        out.dedup();
        Ok(out)
    }

    /// Copy whose scenario demands of each coordinate all equal their `level`
    /// quantile. Its optimal basis is a cheap starting point for the real sample.
    pub fn collapsed(&self, level: f64) -> DefProblem {
        let mut draws: HashMap<(usize, usize, usize), Vec<f64>> = HashMap::new();
        for (r, k) in self.rows.iter().enumerate() {
            if let RowKind::Scenario { vaccine, clinic, period, .. } = *k {
                draws.entry((vaccine, clinic, period)).or_default().push(self.lp.rhs[r]);
            }
        }
        let target: HashMap<(usize, usize, usize), f64> = draws
            .into_iter()
            .map(|(key, mut v)| {
                v.sort_by(f64::total_cmp);
                (key, quantile_sorted(&v, level))
            })
            .collect();
        let mut out = self.clone();
        for (r, k) in self.rows.iter().enumerate() {
            if let RowKind::Scenario { vaccine, clinic, period, .. } = *k {
                out.lp.rhs[r] = target[&(vaccine, clinic, period)];
            }
        }
        out
    }

    pub fn summary(&self) -> DefSummary {
        let mut rows_by_family = BTreeMap::new();
        for r in &self.rows {
            *rows_by_family.entry(r.family().to_string()).or_insert(0) += 1;
        }
        let mut cols_by_family = BTreeMap::new();
        for k in self.index.kinds() {
            *cols_by_family.entry(k.family().to_string()).or_insert(0) += 1;
        }
        DefSummary {
            name: self.lp.name.clone(),
            rows: self.lp.num_rows(),
            cols: self.lp.num_cols(),
            nnz: self.lp.nnz(),
            sample_size: self.sample_size,
            extended: self.config.extended,
            eps_weight: self.eps_weight,
            rows_by_family,
            cols_by_family,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// Fixes shipments on an arc to zero outside `periods`.
pub fn freeze_schedule(def: &DefProblem, from: &str, to: &str, periods: &[usize]) -> Result<DefProblem> {
    let a = def.arc_id(from, to).ok_or_else(|| CoreError::UnknownArc(from.into(), to.into()))?;
    if periods.is_empty() {
        return Err(CoreError::EmptySchedule);
    }
    let mut out = def.clone();
    for (j, k) in def.index.kinds().iter().enumerate() {
        if let VarKind::Shipment { arc, period, .. } = k {
            if *arc == a && !periods.contains(period) {
                out.lp.col_lower[j] = 0.0;
                out.lp.col_upper[j] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Writes the problem as fixed-format MPS.
pub fn export_lp(def: &DefProblem, path: &Path) -> Result<()> {
    if def.lp.num_cols() == 0 {
        return Err(coldchain_lp::LpError::NoVariables.into());
    }
    let f = std::fs::File::create(path)?;
    write_mps(&def.lp, BufWriter::new(f))?;
    Ok(())
}
