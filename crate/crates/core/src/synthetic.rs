//! Synthetic tiered networks with the standard six-antigen catalog.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use coldchain_lp::SolveOptions;

use crate::def::{build_def, DefConfig, PenaltyVector, RowKind};
use crate::demand::sample_scenarios;
use crate::error::{CoreError, Result};
use crate::instance::{DemandSpec, Instance, RegionPopulation};
use crate::model::{Arc, Horizon, Node, ScheduleMask, StorageClass, Tier, VaccineType, VialPresentation};
use crate::ovw::{estimate_ovw, OvwQuery};
use crate::solver::solve;
use crate::wastage::{Store, WastageSpec};

/// Annual births per inhabitant used for cohort sizes.
pub const BIRTH_RATE: f64 = 0.045;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Shape {
    /// 3 (no regional stores) or 4
    pub tiers: u8,
    pub regions: usize,
    pub districts_per_region: usize,
    pub clinics_per_district: usize,
    pub periods: usize,
    /// clinic refrigerator capacity over mean monthly cold volume
    pub capacity_scale: f64,
    pub demand_scale: f64,
    /// residual std over mean
    pub cv: f64,
    pub transit_lag: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            tiers: 4,
            regions: 2,
            districts_per_region: 3,
            clinics_per_district: 4,
            periods: 12,
            capacity_scale: 1.25,
            demand_scale: 1.0,
            cv: 0.2,
            transit_lag: 0,
        }
    }
}

impl Shape {
    pub fn node_count(&self) -> usize {
        let d = self.regions * self.districts_per_region;
        let c = d * self.clinics_per_district;
        1 + if self.tiers == 4 { self.regions } else { 0 } + d + c
    }
}

fn vaccine(id: &str, name: &str, b: u32, q: f64, r: f64, a: u32, storage: StorageClass) -> VaccineType {
    VaccineType {
        id: id.into(),
        name: name.into(),
        regimen_doses: a,
        storage_class: storage,
        presentations: vec![VialPresentation { vial_size: b, packed_volume_per_dose: q, diluent_volume_per_dose: r }],
        thermostable: false,
        dual_chamber: false,
    }
}

/// The six EPI antigens with vial size, packed volume, diluent, regimen and storage.
pub fn standard_catalog() -> Vec<VaccineType> {
    use StorageClass::*;
    vec![
        vaccine("BCG", "BCG", 20, 1.2, 0.7, 1, RefrigeratorOrFreezer),
        vaccine("TT", "Tetanus", 10, 3.0, 0.0, 3, RefrigeratorOnly),
        vaccine("MEA", "Measles", 10, 2.1, 0.5, 2, RefrigeratorOnly),
        vaccine("OPV", "Oral polio", 20, 1.0, 0.0, 4, FreezerPreferred),
        vaccine("YF", "Yellow fever", 10, 2.5, 6.0, 1, RefrigeratorOrFreezer),
        vaccine("DTP", "DTP-HepB-Hib", 1, 16.8, 0.0, 3, RefrigeratorOnly),
    ]
}

/// Builds a synthetic instance: regional populations drawn from `seed`, demand split
/// equally over each region's clinics, clinic capacity `capacity_scale` times the mean
/// monthly cold volume (open-vial losses included), upstream stores and arcs with
/// generous headroom.
pub fn make_synthetic_instance(shape: &Shape, seed: u64) -> Result<Instance> {
    if !(shape.tiers == 3 || shape.tiers == 4) {
        return Err(CoreError::Invalid(format!("tiers must be 3 or 4, got {}", shape.tiers)));
    }
    if shape.regions == 0 || shape.districts_per_region == 0 || shape.clinics_per_district == 0 || shape.periods == 0 {
        return Err(CoreError::Invalid("shape parameters must be positive".into()));
    }
    if !(shape.capacity_scale > 0.0 && shape.demand_scale > 0.0 && shape.cv >= 0.0) {
        return Err(CoreError::Invalid("scales must be positive".into()));
    }
    let catalog = standard_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = 30.0;
    let t_max = shape.periods;
    let per_region_clinics = (shape.districts_per_region * shape.clinics_per_district) as f64;
    let populations: Vec<f64> = (0..shape.regions).map(|_| (rng.random_range(150.0..300.0f64) * 1000.0).round()).collect();

    // mean monthly doses per clinic of each vaccine, and the cold volumes they imply
    let clinic_doses = |r: usize| -> Vec<f64> {
        let cohort = populations[r] * BIRTH_RATE * shape.demand_scale * days / 365.0 / per_region_clinics;
        catalog.iter().map(|v| cohort * v.regimen_doses as f64).collect()
    };
    // cold volume drawn per month, open-vial losses at daily sessions included
    let volume = |doses: &[f64], freezer_only: bool| -> f64 {
        catalog
            .iter()
            .zip(doses)
            .filter(|(v, _)| !freezer_only || v.storage_class == StorageClass::FreezerPreferred)
            .map(|(v, &d)| {
                let pres = &v.presentations[0];
                let w = estimate_ovw(&OvwQuery {
                    daily_mean: d / days,
                    vial_size: pres.vial_size,
                    sessions_per_period: days as u32,
                    period_length_days: days as u32,
                });
                pres.packed_volume_per_dose * d / (1.0 - w)
            })
            .sum()
    };
    let diluent = |doses: &[f64]| -> f64 {
        catalog.iter().zip(doses).map(|(v, d)| v.presentations[0].diluent_volume_per_dose * d / days).sum()
    };

    // the coverage reward fills clinics to capacity, so upstream stores and arcs
    // are sized for the clinic capacity rather than the mean flow
    let head = 1.25 * shape.capacity_scale.max(1.0);
    let mut nodes = Vec::new();
    let mut arcs = Vec::new();
    let monthly = ScheduleMask::every(t_max, 1, 1);
    let quarterly = ScheduleMask::every(t_max, 3, 1);
    let region_volume: Vec<f64> = (0..shape.regions).map(|r| volume(&clinic_doses(r), false) * per_region_clinics).collect();
    let region_frozen: Vec<f64> = (0..shape.regions).map(|r| volume(&clinic_doses(r), true) * per_region_clinics).collect();
    let total: f64 = region_volume.iter().sum();
    let total_frozen: f64 = region_frozen.iter().sum();
    nodes.push(Node {
        id: "CENTRAL".into(),
        tier: Tier::Central,
        refrigerator_capacity: (8.0 * head * total).round(),
        freezer_capacity: (8.0 * head * total_frozen).round(),
        region: None,
        supply_periods: Some((1..=t_max).step_by(2).collect()),
    });
    for r in 0..shape.regions {
        let rid = format!("R{}", r + 1);
        let doses = clinic_doses(r);
        let v_clinic = volume(&doses, false);
        let v_district = v_clinic * shape.clinics_per_district as f64;
        let f_district = volume(&doses, true) * shape.clinics_per_district as f64;
        let parent = if shape.tiers == 4 {
            nodes.push(Node {
                id: rid.clone(),
                tier: Tier::Regional,
                refrigerator_capacity: (6.0 * head * region_volume[r]).round(),
                freezer_capacity: (6.0 * head * region_frozen[r]).round(),
                region: Some(rid.clone()),
                supply_periods: None,
            });
            arcs.push(Arc {
                from: "CENTRAL".into(),
                to: rid.clone(),
                transport_capacity: (30.0 * head * region_volume[r]).round(),
                schedule: quarterly.clone(),
            });
            rid.clone()
        } else {
            "CENTRAL".to_string()
        };
        for d in 0..shape.districts_per_region {
            let did = format!("{rid}-D{}", d + 1);
            nodes.push(Node {
                id: did.clone(),
                tier: Tier::District,
                refrigerator_capacity: (3.0 * head * v_district).round(),
                freezer_capacity: (3.0 * head * f_district).round(),
                region: Some(rid.clone()),
                supply_periods: None,
            });
            arcs.push(Arc {
                from: parent.clone(),
                to: did.clone(),
                transport_capacity: (10.0 * head * v_district).round(),
                schedule: monthly.clone(),
            });
            for c in 0..shape.clinics_per_district {
                let cid = format!("{did}-C{}", c + 1);
                nodes.push(Node {
                    id: cid.clone(),
                    tier: Tier::Clinic,
                    refrigerator_capacity: (shape.capacity_scale * v_clinic + diluent(&doses)).round(),
                    freezer_capacity: 0.0,
                    region: Some(rid.clone()),
                    supply_periods: None,
                });
                arcs.push(Arc {
                    from: did.clone(),
                    to: cid,
                    transport_capacity: (10.0 * head * v_clinic).round(),
                    schedule: monthly.clone(),
                });
            }
        }
    }
    debug_assert_eq!(nodes.len(), shape.node_count());
    Ok(Instance {
        name: format!("synthetic-{}tier-{}x{}x{}", shape.tiers, shape.regions, shape.districts_per_region, shape.clinics_per_district),
        horizon: Horizon { periods: t_max, period_length_days: days as u32, transit_lag: shape.transit_lag },
        vaccines: catalog,
        nodes,
        arcs,
        tier_skips_allowed: shape.tiers < 4,
        wastage: WastageSpec::default(),
        demand_model: DemandSpec::Regional {
            per_capita_rate: BIRTH_RATE,
            cv: shape.cv,
            regions: populations
                .iter()
                .enumerate()
                .map(|(r, &p)| RegionPopulation { region: format!("R{}", r + 1), population: p })
                .collect(),
            demand_scale: shape.demand_scale,
            poisson: false,
        },
    })
}

/// Clinic refrigerator rows at their bound in the mean-demand optimum of `instance`.
pub fn binding_clinic_rows(instance: &Instance) -> Result<usize> {
    let inputs = instance.inputs()?;
    let scen = sample_scenarios(&inputs.demand, 1, 0)?;
    let def = build_def(
        &inputs,
        &scen,
        &DefConfig { penalties: PenaltyVector::Uniform(0.0), extended: inputs.multi_presentation(), ..DefConfig::default() },
    )?;
    let sol = solve(&def, &SolveOptions::default())?;
    if sol.status != coldchain_lp::LpStatus::Optimal {
        return Err(CoreError::SolverFailed(sol.status));
    }
    Ok(def
        .rows
        .iter()
        .enumerate()
        .filter(|(i, r)| match r {
            RowKind::Capacity { store: Store::Refrigerator, node, .. } => {
                inputs.topology.nodes[*node].tier == Tier::Clinic
                    && (sol.row_activity[*i] - def.lp.rhs[*i]).abs() <= 1e-6 * (1.0 + def.lp.rhs[*i].abs())
            }
            _ => false,
        })
        .count())
}

/// Shrinks `shape.capacity_scale` from its current value until the baseline optimum
/// has a binding clinic refrigerator row; returns the scale and the instance.
pub fn calibrate_capacity(shape: &Shape, seed: u64) -> Result<(f64, Instance)> {
    let mut s = shape.clone();
    for _ in 0..20 {
        let inst = make_synthetic_instance(&s, seed)?;
        if binding_clinic_rows(&inst)? > 0 {
            return Ok((s.capacity_scale, inst));
        }
        s.capacity_scale *= 0.8;
    }
    Err(CoreError::Invalid("calibration found no capacity-constrained scale".into()))
}
