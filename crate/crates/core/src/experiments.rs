//! Declarative multi-arm studies: transform a base instance, run BS-SAA per arm,
//! compare arms pairwise and write a report bundle.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bssaa::{replication_seed, run_bssaa, IterationRecord, MinMaxAvg, RunResult, SaaConfig};
use crate::error::{CoreError, Result};
use crate::instance::{Instance, ModelInputs};
use crate::metrics::{paired_compare, GroupStats, Metric, MetricTable, MetricsReport, PairedTest};
use crate::model::{
    apply_presentation_swap, apply_redesign, PresentationSwap, RedesignSpec, Relocation, Tier, VaccineType,
    VialPresentation,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    RemoveTier { tier: Tier, relocate_to: Relocation },
    /// Replaces the presentations of a vaccine with the given vial sizes.
    VialMix { vaccine: String, sizes: Vec<u32> },
    Thermostable { vaccine: String },
    DualChamber { vaccine: String, volume: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub name: String,
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

fn default_level() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub base_instance: PathBuf,
    pub arms: Vec<ArmSpec>,
    #[serde(default)]
    pub saa: SaaConfig,
    pub output_dir: PathBuf,
    /// significance level of the paired tests
    #[serde(default = "default_level")]
    pub level: f64,
}

impl ExperimentSpec {
    /// Reads a spec, or the `spec` field of a previously written manifest.
    /// Relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        // a manifest carries the spec it ran, with paths already resolved
        if let Some(inner) = value.get("spec").filter(|_| value.get("base_instance").is_none()) {
            return Ok(serde_json::from_value(inner.clone())?);
        }
        let mut spec: ExperimentSpec = serde_json::from_value(value)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        if spec.base_instance.is_relative() {
            spec.base_instance = dir.join(&spec.base_instance);
        }
        if spec.output_dir.is_relative() {
            spec.output_dir = dir.join(&spec.output_dir);
        }
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(CoreError::Invalid("experiment needs at least one arm".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &self.arms {
            let safe = !a.name.is_empty()
                && a.name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
                && !a.name.starts_with('.');
            if !safe {
                return Err(CoreError::Invalid(format!("arm name '{}' is not a plain file name", a.name)));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(CoreError::Invalid(format!("duplicate arm '{}'", a.name)));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CoreError::Invalid(format!("level {} outside (0, 1)", self.level)));
        }
        self.saa.check()
    }
}

/// New presentations for `sizes`; an existing presentation of the same size is kept,
/// otherwise packed volume per dose scales as `q0 b0 / b` from the first presentation.
pub fn apply_vial_mix(catalog: &[VaccineType], vaccine: &str, sizes: &[u32]) -> Result<Vec<VaccineType>> {
    let k = catalog.iter().position(|v| v.id == vaccine).ok_or_else(|| CoreError::UnknownVaccine(vaccine.into()))?;
    if sizes.is_empty() {
        return Err(CoreError::Invalid(format!("vial mix for {vaccine} has no sizes")));
    }
    let mut out = catalog.to_vec();
    let v = &mut out[k];
    let base = v.presentations[0].clone();
    v.presentations = sizes
        .iter()
        .map(|&b| match catalog[k].presentations.iter().find(|p| p.vial_size == b) {
            Some(p) => p.clone(),
            None => VialPresentation {
                vial_size: b,
                packed_volume_per_dose: base.packed_volume_per_dose * base.vial_size as f64 / b.max(1) as f64,
                diluent_volume_per_dose: base.diluent_volume_per_dose,
            },
        })
        .collect();
    v.check()?;
    Ok(out)
}

/// Applies an arm's transforms in order.
pub fn arm_inputs(base: &ModelInputs, arm: &ArmSpec) -> Result<ModelInputs> {
    let mut topology = base.topology.clone();
    let mut catalog = base.catalog.clone();
    for t in &arm.transforms {
        match t {
            Transform::RemoveTier { tier, relocate_to } => {
                topology = apply_redesign(&topology, RedesignSpec::RemoveTier { tier: *tier, relocate_to: *relocate_to })?
            }
            Transform::VialMix { vaccine, sizes } => catalog = apply_vial_mix(&catalog, vaccine, sizes)?,
            Transform::Thermostable { vaccine } => {
                catalog = apply_presentation_swap(&catalog, &PresentationSwap::Thermostable { vaccine: vaccine.clone() })?
            }
            Transform::DualChamber { vaccine, volume } => {
                catalog = apply_presentation_swap(
                    &catalog,
                    &PresentationSwap::DualChamber { vaccine: vaccine.clone(), per_dose_volume: *volume },
                )?
            }
        }
    }
    base.rebuild(topology, catalog)
}

#[derive(Clone, Debug, Serialize)]
pub struct ArmResult {
    pub extended: bool,
    pub run: RunResult,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArmOutcome {
    pub name: String,
    pub transforms: Vec<Transform>,
    pub result: std::result::Result<ArmResult, String>,
    pub seconds: f64,
}

impl ArmOutcome {
    pub fn ok(&self) -> Option<&ArmResult> {
        self.result.as_ref().ok()
    }

    /// Failed outright or lost replications.
    pub fn partial(&self) -> bool {
        match &self.result {
            Ok(r) => !r.run.failures.is_empty(),
            Err(_) => true,
        }
    }
}

/// Test of `mean(b - a)` over paired scenario columns.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    pub test: Option<PairedTest>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub instance_sha256: String,
    pub arms: Vec<ArmOutcome>,
    pub comparisons: Vec<Comparison>,
    pub partial: bool,
    pub seconds: f64,
}

impl ExperimentReport {
    pub fn arm(&self, name: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.name == name).and_then(|a| a.ok())
    }

    pub fn comparison(&self, a: &str, b: &str, metric: Metric) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b && c.metric == metric)
    }
}

fn run_arm(base: &ModelInputs, arm: &ArmSpec, saa: &SaaConfig) -> ArmOutcome {
    let start = Instant::now();
    let result = (|| {
        let inputs = arm_inputs(base, arm)?;
        let run = run_bssaa(&inputs, saa)?;
        let metrics = run.metrics()?;
        Ok::<_, CoreError>(ArmResult { extended: saa.extended.unwrap_or(inputs.multi_presentation()), run, metrics })
    })();
    ArmOutcome {
        name: arm.name.clone(),
        transforms: arm.transforms.clone(),
        result: result.map_err(|e| e.to_string()),
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every arm, compares each pair in spec order and writes the bundle.
/// Arm failures do not abort the run; they mark the report partial.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.check()?;
    let start = Instant::now();
    let bytes = std::fs::read(&spec.base_instance)?;
    let instance_sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let instance: Instance = serde_json::from_slice(&bytes)?;
    let base = instance.inputs()?;

    let arms: Vec<ArmOutcome> = spec.arms.par_iter().map(|a| run_arm(&base, a, &spec.saa)).collect();

    let mut comparisons = Vec::new();
    for i in 0..arms.len() {
        for j in i + 1..arms.len() {
            for metric in [Metric::Sr, Metric::Fic] {
                let outcome = match (arms[i].ok(), arms[j].ok()) {
                    (Some(a), Some(b)) => paired_compare(&a.metrics, &b.metrics, metric, spec.level).map_err(|e| e.to_string()),
                    _ => Err("arm failed".to_string()),
                };
                let (test, error) = match outcome {
                    Ok(t) => (Some(t), None),
                    Err(e) => (None, Some(e)),
                };
                comparisons.push(Comparison { a: arms[i].name.clone(), b: arms[j].name.clone(), metric, test, error });
            }
        }
    }
    let partial = arms.iter().any(ArmOutcome::partial) || comparisons.iter().any(|c| c.error.is_some());
    let report = ExperimentReport {
        spec: spec.clone(),
        instance_sha256,
        arms,
        comparisons,
        partial,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_bundle(&report)?;
    Ok(report)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long format `group,scenario,value`; scenario is `m S + s` over replications.
pub fn table_csv(table: &MetricTable) -> String {
    let mut out = String::from("group,scenario,value\n");
    for (g, name) in table.groups.iter().enumerate() {
        let name = csv_field(name);
        for (s, v) in table.row(g).iter().enumerate() {
            let _ = writeln!(out, "{name},{s},{v}");
        }
    }
    out
}

#[derive(Serialize)]
struct ReplicationSummary {
    index: usize,
    seed: u64,
    scenario_digest: String,
    objective: f64,
    model_objective: f64,
    converged: bool,
    satisfied: bool,
    max_violations: usize,
    sr_mean: f64,
    fic_mean: f64,
    posterior_pass_rate: f64,
}

#[derive(Serialize)]
struct ArmSummary<'a> {
    arm: &'a str,
    transforms: &'a [Transform],
    extended: bool,
    replications: Vec<ReplicationSummary>,
    failures: &'a [(usize, String)],
    sr: MinMaxAvg,
    fic: MinMaxAvg,
    confidence: String,
    sr_box: &'a [GroupStats],
    fic_box: &'a [GroupStats],
    diagnostics: &'a [String],
}

#[derive(Serialize)]
struct ReplicationTrace<'a> {
    index: usize,
    seed: u64,
    solves: usize,
    seconds: f64,
    trajectory: &'a [IterationRecord],
}

#[derive(Serialize)]
struct ArmManifest<'a> {
    name: &'a str,
    error: Option<&'a str>,
    seconds: f64,
    replications: Vec<ReplicationTrace<'a>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    spec: &'a ExperimentSpec,
    instance_sha256: &'a str,
    replication_seeds: Vec<u64>,
    partial: bool,
    seconds: f64,
    arms: Vec<ArmManifest<'a>>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Everything except `manifest.json` is free of timings and reproduces byte for byte.
pub fn write_bundle(report: &ExperimentReport) -> Result<()> {
    let dir = &report.spec.output_dir;
    std::fs::create_dir_all(dir)?;
    let saa = &report.spec.saa;
    for arm in &report.arms {
        let Some(res) = arm.ok() else { continue };
        let sub = dir.join(&arm.name);
        std::fs::create_dir_all(&sub)?;
        std::fs::write(sub.join("sr_by_vaccine.csv"), table_csv(&res.metrics.sr))?;
        std::fs::write(sub.join("fic_by_region.csv"), table_csv(&res.metrics.fic))?;
        let replications = res
            .run
            .replications
            .iter()
            .map(|r| ReplicationSummary {
                index: r.index,
                seed: r.seed,
                scenario_digest: r.scenario_digest.clone(),
                objective: r.objective,
                model_objective: r.model_objective,
                converged: r.converged,
                satisfied: r.satisfied,
                max_violations: r.penalties.counts.iter().copied().max().unwrap_or(0),
                sr_mean: r.sr_mean,
                fic_mean: r.fic_mean,
                posterior_pass_rate: r.posterior.pass_rate,
            })
            .collect();
        let summary = ArmSummary {
            arm: &arm.name,
            transforms: &arm.transforms,
            extended: res.extended,
            replications,
            failures: &res.run.failures,
            sr: res.run.sr,
            fic: res.run.fic,
            confidence: res.run.confidence_label(),
            sr_box: &res.metrics.sr_box,
            fic_box: &res.metrics.fic_box,
            diagnostics: &res.metrics.diagnostics,
        };
        write_json(&sub.join("summary.json"), &summary)?;
    }
    write_json(&dir.join("comparisons.json"), &report.comparisons)?;
    let arms = report
        .arms
        .iter()
        .map(|a| ArmManifest {
            name: &a.name,
            error: a.result.as_ref().err().map(String::as_str),
            seconds: a.seconds,
            replications: a
                .ok()
                .map(|r| {
                    r.run
                        .replications
                        .iter()
                        .map(|x| ReplicationTrace {
                            index: x.index,
                            seed: x.seed,
                            solves: x.solves,
                            seconds: x.seconds,
                            trajectory: &x.trajectory,
                        })
                        .collect()
                })
                .unwrap_or_default(),
        })
        .collect();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        spec: &report.spec,
        instance_sha256: &report.instance_sha256,
        replication_seeds: (0..saa.replications).map(|m| replication_seed(saa.master_seed, m)).collect(),
        partial: report.partial,
        seconds: report.seconds,
        arms,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn arm(name: &str, transforms: Vec<Transform>) -> ArmSpec {
    ArmSpec { name: name.into(), transforms }
}

/// Four tiers against the regional tier removed, capacity moved to clinics or districts.
pub fn r1_spec(base_instance: PathBuf, output_dir: PathBuf, saa: SaaConfig) -> ExperimentSpec {
    let remove = |relocate_to| vec![Transform::RemoveTier { tier: Tier::Regional, relocate_to }];
    ExperimentSpec {
        name: "tiers".into(),
        base_instance,
        arms: vec![
            arm("four-tier", vec![]),
            arm("three-tier-clinics", remove(Relocation::Clinics)),
            arm("three-tier-districts", remove(Relocation::Districts)),
        ],
        saa,
        output_dir,
        level: default_level(),
    }
}

/// Measles in 1/5/10-dose vials, then additionally BCG in 10/20.
pub fn r2_spec(base_instance: PathBuf, output_dir: PathBuf, saa: SaaConfig, measles: &str, bcg: &str) -> ExperimentSpec {
    let measles_mix = Transform::VialMix { vaccine: measles.into(), sizes: vec![1, 5, 10] };
    ExperimentSpec {
        name: "vial-mix".into(),
        base_instance,
        arms: vec![
            arm("baseline", vec![]),
            arm("measles-mix", vec![measles_mix.clone()]),
            arm("measles-bcg-mix", vec![measles_mix, Transform::VialMix { vaccine: bcg.into(), sizes: vec![10, 20] }]),
        ],
        saa,
        output_dir,
        level: default_level(),
    }
}

/// Baseline plus one thermostable arm per vaccine.
pub fn r3_spec(base_instance: PathBuf, output_dir: PathBuf, saa: SaaConfig, vaccines: &[String]) -> ExperimentSpec {
    let mut arms = vec![arm("baseline", vec![])];
    arms.extend(
        vaccines.iter().map(|v| arm(&format!("thermostable-{v}"), vec![Transform::Thermostable { vaccine: v.clone() }])),
    );
    ExperimentSpec {
        name: "presentations".into(),
        base_instance,
        arms,
        saa,
        output_dir,
        level: default_level(),
    }
}
