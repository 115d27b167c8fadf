//! Penalty bisection for the sampled chance constraints, posterior checks and bound runs.

use std::time::Instant;

use coldchain_lp::{LpSolution, LpStatus, SolveOptions, WarmStart};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::def::{build_def, DefConfig, DefProblem, PenaltyVector, ServedPlan};
use crate::demand::{posterior_sample, sample_scenarios, DemandModel, ScenarioSet};
use crate::error::{CoreError, Result};
use crate::instance::ModelInputs;
use crate::metrics::{compute_fic, compute_sr, FicDenominator, Grouping, MetricTable, MetricsReport};
use crate::solver::{solve_seeded, solve_warm};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BisectionMode {
    /// Every coordinate moves each round until all gaps are closed.
    #[default]
    Synchronized,
    /// A coordinate stops moving once its own gap is closed.
    PerCoordinate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaaConfig {
    pub sample_size: usize,
    pub posterior_size: usize,
    pub replications: usize,
    /// required probability of meeting demand per (vaccine, clinic, period)
    pub service_level: f64,
    pub master_seed: u64,
    pub eps_weight: Option<f64>,
    pub pi_lower: f64,
    /// default `2 (eps S + 1)`
    pub pi_upper: Option<f64>,
    /// bisection stops when every bound gap is at most this fraction of the initial gap
    pub theta_fraction: f64,
    /// violation-count slack; default `ceil(0.01 S)`
    pub eps_count: Option<usize>,
    pub violation_tol: f64,
    pub max_outer: usize,
    pub repair_rounds: usize,
    pub mode: BisectionMode,
    /// extended multi-presentation model; default when some vaccine has several presentations
    pub extended: Option<bool>,
    pub fic_denominator: FicDenominator,
    pub parallel: bool,
}

impl Default for SaaConfig {
    fn default() -> Self {
        SaaConfig {
            sample_size: 50,
            posterior_size: 300,
            replications: 10,
            service_level: 0.7,
            master_seed: 1,
            eps_weight: None,
            pi_lower: 0.0,
            pi_upper: None,
            theta_fraction: 0.01,
            eps_count: None,
            violation_tol: 1e-6,
            max_outer: 60,
            repair_rounds: 8,
            mode: BisectionMode::Synchronized,
            extended: None,
            fic_denominator: FicDenominator::AllDoses,
            parallel: true,
        }
    }
}

impl SaaConfig {
    pub fn check(&self) -> Result<()> {
        if self.sample_size == 0 || self.replications == 0 {
            return Err(CoreError::Invalid("sample size and replications must be positive".into()));
        }
        if self.posterior_size < self.sample_size {
            return Err(CoreError::Invalid("posterior sample must be at least the training sample".into()));
        }
        if !(self.service_level > 0.0 && self.service_level < 1.0) {
            return Err(CoreError::Invalid(format!("service level {} outside (0, 1)", self.service_level)));
        }
        if !(self.pi_lower >= 0.0) || self.pi_upper.is_some_and(|u| !(u >= self.pi_lower)) {
            return Err(CoreError::Invalid("penalty bounds must satisfy 0 <= lower <= upper".into()));
        }
        Ok(())
    }

    pub fn eps_count(&self) -> usize {
        self.eps_count.unwrap_or((0.01 * self.sample_size as f64).ceil() as usize)
    }

    /// Largest accepted number of short scenarios per coordinate.
    pub fn max_violations(&self) -> usize {
        let raw = (1.0 - self.service_level) * self.sample_size as f64;
        // guard against 0.3 * 50 = 15.000000000000002
        (raw - 1e-9).ceil().max(0.0) as usize + self.eps_count()
    }

    /// 1 - (1/2)^M.
    pub fn confidence(&self) -> f64 {
        1.0 - 0.5f64.powi(self.replications as i32)
    }
}

/// Seed of replication `m`.
pub fn replication_seed(master: u64, m: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"replication");
    h.update(master.to_le_bytes());
    h.update((m as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PenaltyState {
    pub pi: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub theta: f64,
    pub eps_count: usize,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub pi: Vec<f64>,
    pub violated: usize,
    pub objective: f64,
    pub lp_iterations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorReport {
    pub sample_size: usize,
    pub scenario_digest: String,
    /// satisfied fraction per coordinate
    pub fraction: Vec<f64>,
    pub pass: Vec<bool>,
    pub pass_rate: f64,
    pub sr: MetricTable,
    pub fic: MetricTable,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    pub scenario_digest: String,
    #[serde(skip)]
    pub solution: LpSolution,
    #[serde(skip)]
    pub scenarios: ScenarioSet,
    pub penalties: PenaltyState,
    pub trajectory: Vec<IterationRecord>,
    pub plan: ServedPlan,
    /// penalized objective of the terminal LP
    pub objective: f64,
    /// coverage plus weighted served doses, without penalties
    pub model_objective: f64,
    pub converged: bool,
    pub satisfied: bool,
    pub solves: usize,
    pub training: MetricsReport,
    pub posterior: PosteriorReport,
    /// mean SR over vaccines and scenarios, percent
    pub sr_mean: f64,
    /// mean FIC over regions and scenarios
    pub fic_mean: f64,
    pub seconds: f64,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinMaxAvg {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl MinMaxAvg {
    pub fn of(v: &[f64]) -> MinMaxAvg {
        if v.is_empty() {
            return MinMaxAvg { min: f64::NAN, max: f64::NAN, avg: f64::NAN };
        }
        MinMaxAvg {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub config: SaaConfig,
    pub replications: Vec<ReplicationResult>,
    pub failures: Vec<(usize, String)>,
    pub sr: MinMaxAvg,
    pub fic: MinMaxAvg,
    pub confidence: f64,
    pub seconds: f64,
}

impl RunResult {
    pub fn confidence_label(&self) -> String {
        format!("{:.3}", self.confidence)
    }

    /// Training metrics of all replications, columns concatenated in replication order.
    pub fn metrics(&self) -> Result<MetricsReport> {
        let mut reps = self.replications.iter();
        let first = reps.next().ok_or_else(|| CoreError::Invalid("no successful replications".into()))?;
        let (mut sr, mut fic) = (first.training.sr.clone(), first.training.fic.clone());
        let mut digests = vec![first.scenario_digest.clone()];
        let mut diagnostics = first.training.diagnostics.clone();
        for r in reps {
            sr.append(&r.training.sr)?;
            fic.append(&r.training.fic)?;
            digests.push(r.scenario_digest.clone());
            diagnostics.extend(r.training.diagnostics.iter().cloned());
        }
        Ok(MetricsReport::new(digests, sr, fic, diagnostics))
    }
}

fn vaccine_ids(inputs: &ModelInputs) -> Vec<String> {
    inputs.catalog.iter().map(|v| v.id.clone()).collect()
}

fn optimal(sol: LpSolution) -> Result<LpSolution> {
    if sol.status == LpStatus::Optimal {
        Ok(sol)
    } else {
        Err(CoreError::SolverFailed(sol.status))
    }
}

/// Holds the plan fixed and checks demand satisfaction on a fresh sample.
pub fn posterior_check(
    plan: &ServedPlan,
    demand: &DemandModel,
    vaccine_ids: &[String],
    size: usize,
    seed: u64,
    service_level: f64,
    denominator: FicDenominator,
) -> Result<PosteriorReport> {
    let scen = posterior_sample(demand, size, seed)?;
    let pos: Vec<usize> = plan
        .clinic_ids
        .iter()
        .map(|id| scen.clinic_ids.iter().position(|s| s == id).ok_or_else(|| CoreError::IndexMismatch(id.clone())))
        .collect::<Result<_>>()?;
    let mut fraction = Vec::with_capacity(plan.served.len());
    for i in 0..plan.vaccines {
        for (c, &pc) in pos.iter().enumerate() {
            for t in 0..plan.periods {
                let x = plan.served(i, c, t);
                let ok = (0..size).filter(|&s| x >= scen.value(i, pc, t, s) - 1e-6).count();
                fraction.push(ok as f64 / size as f64);
            }
        }
    }
    let pass: Vec<bool> = fraction.iter().map(|&f| f >= service_level).collect();
    let pass_rate = pass.iter().filter(|&&p| p).count() as f64 / pass.len().max(1) as f64;
    Ok(PosteriorReport {
        sample_size: size,
        scenario_digest: scen.digest(),
        sr: compute_sr(plan, &scen, vaccine_ids)?,
        fic: compute_fic(plan, &scen, Grouping::Region, denominator)?.table,
        fraction,
        pass,
        pass_rate,
    })
}

fn run_replication(
    inputs: &ModelInputs,
    config: &SaaConfig,
    m: usize,
    options: &SolveOptions,
    seed_basis: Option<&WarmStart>,
) -> Result<(ReplicationResult, Option<WarmStart>)> {
    let start = Instant::now();
    let seed = replication_seed(config.master_seed, m);
    let scen = sample_scenarios(&inputs.demand, config.sample_size, seed)?;
    let extended = config.extended.unwrap_or_else(|| inputs.multi_presentation());
    let def_config = DefConfig {
        service_level: config.service_level,
        eps_weight: config.eps_weight,
        penalties: PenaltyVector::Uniform(config.pi_lower),
        extended,
    };
    let mut def = build_def(inputs, &scen, &def_config)?;
    let n = def.coords();
    let l0 = config.pi_lower;
    let u0 = config.pi_upper.unwrap_or(2.0 * (def.eps_weight * config.sample_size as f64 + 1.0));
    let theta = config.theta_fraction * (u0 - l0);
    let limit = config.max_violations();
    let mut lower = vec![l0; n];
    let mut upper = vec![u0; n];
    let mut trajectory = Vec::new();
    let mut warm: Option<WarmStart> = seed_basis.cloned();
    let mut first_basis: Option<WarmStart> = None;
    let mut solves = 0;

    let step = |def: &mut DefProblem, pi: &[f64], warm: &mut Option<WarmStart>, trajectory: &mut Vec<IterationRecord>| -> Result<(LpSolution, Vec<usize>)> {
        def.set_penalties(pi)?;
        let t0 = Instant::now();
        let sol = match warm.as_ref() {
            Some(w) => solve_warm(def, options, Some(w))?,
            None => solve_seeded(def, options)?,
        };
        let sol = optimal(sol)?;
        *warm = sol.warm_start.clone();
        let counts = def.violation_counts(&sol.x, config.violation_tol);
        trajectory.push(IterationRecord {
            iteration: trajectory.len(),
            pi: pi.to_vec(),
            violated: counts.iter().filter(|&&c| c > limit).count(),
            objective: sol.objective,
            lp_iterations: sol.iterations,
            seconds: t0.elapsed().as_secs_f64(),
        });
        Ok((sol, counts))
    };

    let mut converged = false;
    for _ in 0..config.max_outer {
        let open: Vec<usize> = (0..n).filter(|&k| upper[k] - lower[k] > theta).collect();
        if open.is_empty() {
            converged = true;
            break;
        }
        let moving: Vec<usize> = match config.mode {
            BisectionMode::Synchronized => (0..n).collect(),
            BisectionMode::PerCoordinate => open,
        };
        let mut pi = upper.clone();
        for &k in &moving {
            pi[k] = 0.5 * (lower[k] + upper[k]);
        }
        let (_, counts) = step(&mut def, &pi, &mut warm, &mut trajectory)?;
        solves += 1;
        if first_basis.is_none() {
            first_basis = warm.clone();
        }
        for &k in &moving {
            if counts[k] <= limit {
                upper[k] = pi[k];
            } else {
                lower[k] = pi[k];
            }
        }
    }
    if !converged && (0..n).all(|k| upper[k] - lower[k] <= theta) {
        converged = true;
    }

    // terminal solve at the upper bounds, then force violated coordinates
    let mut pi = upper.clone();
    let (mut sol, mut counts) = step(&mut def, &pi, &mut warm, &mut trajectory)?;
    solves += 1;
    if first_basis.is_none() {
        first_basis = warm.clone();
    }
    let mut diagnostics = def.diagnostics.clone();
    for _ in 0..config.repair_rounds {
        let bad: Vec<usize> = (0..n).filter(|&k| counts[k] > limit).collect();
        if bad.is_empty() || u0 == 0.0 {
            break;
        }
        for &k in &bad {
            pi[k] = if pi[k] < u0 { u0 } else { 2.0 * pi[k] };
            upper[k] = pi[k];
        }
        (sol, counts) = step(&mut def, &pi, &mut warm, &mut trajectory)?;
        solves += 1;
    }
    let satisfied = counts.iter().all(|&c| c <= limit);
    if !satisfied {
        let bad = counts.iter().filter(|&&c| c > limit).count();
        diagnostics.push(format!("{bad} coordinates exceed {limit} short scenarios after repair"));
    }
    if !converged {
        diagnostics.push(format!("bisection did not converge in {} rounds", config.max_outer));
    }

    let plan = def.plan(&sol.x);
    let ids = vaccine_ids(inputs);
    let sr = compute_sr(&plan, &scen, &ids)?;
    let fic = compute_fic(&plan, &scen, Grouping::Region, config.fic_denominator)?;
    let training = MetricsReport::new(vec![scen.digest()], sr, fic.table, fic.diagnostics);
    let posterior =
        posterior_check(&plan, &inputs.demand, &ids, config.posterior_size, seed, config.service_level, config.fic_denominator)?;
    let result = ReplicationResult {
        index: m,
        seed,
        scenario_digest: scen.digest(),
        objective: sol.objective,
        model_objective: def.model_objective(&sol.x),
        sr_mean: 100.0 * training.sr.mean(),
        fic_mean: training.fic.mean(),
        penalties: PenaltyState { pi, lower, upper, theta, eps_count: config.eps_count(), counts },
        trajectory,
        plan,
        converged,
        satisfied,
        solves,
        training,
        posterior,
        seconds: start.elapsed().as_secs_f64(),
        diagnostics,
        solution: sol,
        scenarios: scen,
    };
    Ok((result, first_basis))
}

/// Runs the bisection on `config.replications` independent scenario samples.
pub fn run_bssaa(inputs: &ModelInputs, config: &SaaConfig) -> Result<RunResult> {
    run_bssaa_with(inputs, config, &SolveOptions::default())
}

pub fn run_bssaa_with(inputs: &ModelInputs, config: &SaaConfig, options: &SolveOptions) -> Result<RunResult> {
    config.check()?;
    let start = Instant::now();
    // replication 0 starts cold; the others reuse its first basis so the result
    // does not depend on scheduling
    let first = run_replication(inputs, config, 0, options, None);
    let basis = first.as_ref().ok().and_then(|(_, b)| b.clone());
    let one = |m: usize| run_replication(inputs, config, m, options, basis.as_ref()).map(|(r, _)| r);
    let rest: Vec<Result<ReplicationResult>> = if config.parallel {
        (1..config.replications).into_par_iter().map(one).collect()
    } else {
        (1..config.replications).map(one).collect()
    };
    let outcomes: Vec<Result<ReplicationResult>> = std::iter::once(first.map(|(r, _)| r)).chain(rest).collect();
    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (m, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => replications.push(r),
            Err(e) => failures.push((m, e.to_string())),
        }
    }
    let srs: Vec<f64> = replications.iter().map(|r| r.sr_mean).collect();
    let fics: Vec<f64> = replications.iter().map(|r| r.fic_mean).collect();
    Ok(RunResult {
        sr: MinMaxAvg::of(&srs),
        fic: MinMaxAvg::of(&fics),
        confidence: config.confidence(),
        config: config.clone(),
        replications,
        failures,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Same pipeline at a looser service level.
pub fn upper_bound_run(inputs: &ModelInputs, config: &SaaConfig, relaxed_level: f64) -> Result<RunResult> {
    let relaxed = SaaConfig { service_level: relaxed_level, ..config.clone() };
    run_bssaa(inputs, &relaxed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub upper_sr: f64,
    pub upper_fic: f64,
    /// percentage gaps of the lower-bound replications against the upper references
    pub sr_gap: MinMaxAvg,
    pub fic_gap: MinMaxAvg,
    /// (lower, upper) model objective per paired replication
    pub objectives: Vec<(f64, f64)>,
    pub ordered: bool,
    pub confidence: f64,
}

/// Upper references are the maxima over the relaxed run; gaps are `100 (UB - LB) / UB`.
pub fn bound_gaps(lower: &RunResult, upper: &RunResult) -> Result<GapReport> {
    if lower.replications.is_empty() || upper.replications.is_empty() {
        return Err(CoreError::Invalid("bound gaps need successful replications".into()));
    }
    let upper_sr = upper.replications.iter().map(|r| r.sr_mean).fold(f64::NEG_INFINITY, f64::max);
    let upper_fic = upper.replications.iter().map(|r| r.fic_mean).fold(f64::NEG_INFINITY, f64::max);
    let gap = |ub: f64, lb: f64| if ub == 0.0 { 0.0 } else { 100.0 * (ub - lb) / ub };
    let sr: Vec<f64> = lower.replications.iter().map(|r| gap(upper_sr, r.sr_mean)).collect();
    let fic: Vec<f64> = lower.replications.iter().map(|r| gap(upper_fic, r.fic_mean)).collect();
    let mut objectives = Vec::new();
    for l in &lower.replications {
        let u = upper
            .replications
            .iter()
            .find(|u| u.index == l.index)
            .ok_or_else(|| CoreError::Unpaired(format!("replication {} missing from upper run", l.index)))?;
        if u.scenario_digest != l.scenario_digest {
            return Err(CoreError::Unpaired(format!("replication {} used different scenarios", l.index)));
        }
        objectives.push((l.model_objective, u.model_objective));
    }
    let ordered = objectives.iter().all(|&(lo, up)| up >= lo - 1e-9 * (1.0 + lo.abs()));
    Ok(GapReport {
        upper_sr,
        upper_fic,
        sr_gap: MinMaxAvg::of(&sr),
        fic_gap: MinMaxAvg::of(&fic),
        objectives,
        ordered,
        confidence: lower.confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_threshold_and_confidence() {
        let c = SaaConfig { sample_size: 50, service_level: 0.7, replications: 10, ..Default::default() };
        assert_eq!(c.eps_count(), 1);
        assert_eq!(c.max_violations(), 16);
        assert_eq!(format!("{:.3}", c.confidence()), "0.999");
        assert_eq!(c.confidence(), 1.0 - 1.0 / 1024.0);
    }

    #[test]
    fn replication_seeds_differ() {
        let s: Vec<u64> = (0..10).map(|m| replication_seed(7, m)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 10);
        assert_eq!(replication_seed(7, 3), s[3]);
    }

    #[test]
    fn config_checks() {
        assert!(SaaConfig { posterior_size: 10, ..Default::default() }.check().is_err());
        assert!(SaaConfig { service_level: 1.0, ..Default::default() }.check().is_err());
        assert!(SaaConfig { pi_upper: Some(0.0), ..Default::default() }.check().is_ok());
    }
}
