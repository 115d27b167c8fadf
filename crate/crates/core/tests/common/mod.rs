//! One central store feeding one clinic, one single-dose vaccine, two periods, one scenario.

use coldchain::def::{build_def, DefConfig, DefProblem, PenaltyVector};
use coldchain::demand::{DemandModel, ScenarioSet, Stream};
use coldchain::instance::ModelInputs;
use coldchain::model::{Arc, Horizon, NetworkTopology, Node, ScheduleMask, StorageClass, Tier, VaccineType, VialPresentation};
use coldchain::wastage::WastageSpec;

pub fn inputs(lag: usize) -> ModelInputs {
    let horizon = Horizon { periods: 2, period_length_days: 30, transit_lag: lag };
    let node = |id: &str, tier, cap| Node {
        id: id.into(),
        tier,
        refrigerator_capacity: cap,
        freezer_capacity: if tier == Tier::Central { 1000.0 } else { 0.0 },
        region: Some("R".into()),
        supply_periods: if tier == Tier::Central { Some(vec![1, 2]) } else { None },
    };
    let topology = NetworkTopology {
        horizon,
        nodes: vec![node("C", Tier::Central, 1000.0), node("K", Tier::Clinic, 10.0)],
        arcs: vec![Arc {
            from: "C".into(),
            to: "K".into(),
            transport_capacity: 100.0,
            schedule: ScheduleMask { active_periods: vec![1, 2] },
        }],
        tier_skips_allowed: true,
    };
    let catalog = vec![VaccineType {
        id: "V".into(),
        name: "test".into(),
        regimen_doses: 1,
        storage_class: StorageClass::RefrigeratorOnly,
        presentations: vec![VialPresentation { vial_size: 1, packed_volume_per_dose: 1.0, diluent_volume_per_dose: 0.0 }],
        thermostable: false,
        dual_chamber: false,
    }];
    let mut demand = DemandModel::zeros(1, vec!["K".into()], 2);
    demand.set(0, 0, 0, 5.0, 0.0);
    demand.set(0, 0, 1, 8.0, 0.0);
    demand.set_daily(0, 0, 13.0 / 60.0);
    ModelInputs::new("mini".into(), topology, catalog, WastageSpec::default(), demand).unwrap()
}

pub fn scenarios() -> ScenarioSet {
    ScenarioSet {
        sample_size: 1,
        seed: 0,
        stream: Stream::Training,
        vaccines: 1,
        clinic_ids: vec!["K".into()],
        periods: 2,
        values: vec![5.0, 8.0],
    }
}

pub fn def(lag: usize, penalty: f64) -> DefProblem {
    let config = DefConfig { eps_weight: Some(0.01), penalties: PenaltyVector::Uniform(penalty), ..DefConfig::default() };
    build_def(&inputs(lag), &scenarios(), &config).unwrap()
}
