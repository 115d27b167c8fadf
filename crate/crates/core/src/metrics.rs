//! Supply ratio and coverage metrics, box statistics and paired comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::def::ServedPlan;
use crate::demand::ScenarioSet;
use crate::error::{CoreError, Result};

/// Values per (group, column); columns are scenarios, concatenated across replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub groups: Vec<String>,
    pub columns: usize,
    /// index `g * columns + col`
    pub values: Vec<f64>,
}

impl MetricTable {
    pub fn value(&self, g: usize, col: usize) -> f64 {
        self.values[g * self.columns + col]
    }

    pub fn row(&self, g: usize) -> &[f64] {
        &self.values[g * self.columns..(g + 1) * self.columns]
    }

    /// Mean over groups, per column.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.groups.len().max(1) as f64;
        (0..self.columns).map(|col| (0..self.groups.len()).map(|g| self.value(g, col)).sum::<f64>() / n).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    /// Appends the columns of `other` (same groups).
    pub fn append(&mut self, other: &MetricTable) -> Result<()> {
        if other.groups != self.groups {
            return Err(CoreError::IndexMismatch("metric tables have different groups".into()));
        }
        let cols = self.columns + other.columns;
        let mut values = Vec::with_capacity(self.groups.len() * cols);
        for g in 0..self.groups.len() {
            values.extend_from_slice(self.row(g));
            values.extend_from_slice(other.row(g));
        }
        self.values = values;
        self.columns = cols;
        Ok(())
    }
}

fn positions(plan: &ServedPlan, scenarios: &ScenarioSet) -> Result<Vec<usize>> {
    if plan.vaccines != scenarios.vaccines || plan.periods != scenarios.periods {
        return Err(CoreError::IndexMismatch("plan and scenarios differ in vaccines or periods".into()));
    }
    plan.clinic_ids
        .iter()
        .map(|id| {
            scenarios
                .clinic_ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| CoreError::IndexMismatch(format!("no scenarios for clinic {id}")))
        })
        .collect()
}

fn delta(scenarios: &ScenarioSet, i: usize, pos: usize, t: usize, s: usize) -> f64 {
    scenarios.value(i, pos, t, s)
}

/// SR per (vaccine, scenario): served doses over scenario demand; 1 when demand is 0.
pub fn compute_sr(plan: &ServedPlan, scenarios: &ScenarioSet, vaccine_ids: &[String]) -> Result<MetricTable> {
    let pos = positions(plan, scenarios)?;
    if vaccine_ids.len() != plan.vaccines {
        return Err(CoreError::IndexMismatch("vaccine ids".into()));
    }
    let s_count = scenarios.sample_size;
    let mut values = Vec::with_capacity(plan.vaccines * s_count);
    for i in 0..plan.vaccines {
        let served: f64 = (0..plan.clinics()).flat_map(|c| (0..plan.periods).map(move |t| (c, t))).map(|(c, t)| plan.served(i, c, t)).sum();
        for s in 0..s_count {
            let d: f64 = (0..plan.clinics())
                .flat_map(|c| (0..plan.periods).map(move |t| (c, t)))
                .map(|(c, t)| delta(scenarios, i, pos[c], t, s))
                .sum();
            values.push(if d > 0.0 { served / d } else { 1.0 });
        }
    }
    Ok(MetricTable { groups: vaccine_ids.to_vec(), columns: s_count, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Clinic,
    Region,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FicDenominator {
    /// Demand summed over all vaccines and periods.
    #[default]
    AllDoses,
    /// Children needing the most-demanded regimen: max over vaccines of demand / regimen. Not the model's formula.
    ChildCohort,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FicTable {
    pub table: MetricTable,
    pub diagnostics: Vec<String>,
}

/// FIC per group and scenario: `100 n_j / D_j` per clinic, demand-weighted over regions.
pub fn compute_fic(
    plan: &ServedPlan,
    scenarios: &ScenarioSet,
    grouping: Grouping,
    denominator: FicDenominator,
) -> Result<FicTable> {
    let pos = positions(plan, scenarios)?;
    let s_count = scenarios.sample_size;
    let n_clin = plan.clinics();
    // denominators per (clinic, scenario)
    let mut denom = vec![0.0; n_clin * s_count];
    for c in 0..n_clin {
        for s in 0..s_count {
            denom[c * s_count + s] = match denominator {
                FicDenominator::AllDoses => (0..plan.vaccines)
                    .map(|i| (0..plan.periods).map(|t| delta(scenarios, i, pos[c], t, s)).sum::<f64>())
                    .sum(),
                FicDenominator::ChildCohort => (0..plan.vaccines)
                    .map(|i| (0..plan.periods).map(|t| delta(scenarios, i, pos[c], t, s)).sum::<f64>() / plan.regimen[i] as f64)
                    .fold(0.0, f64::max),
            };
        }
    }
    let (groups, members): (Vec<String>, Vec<Vec<usize>>) = match grouping {
        Grouping::Clinic => (plan.clinic_ids.clone(), (0..n_clin).map(|c| vec![c]).collect()),
        Grouping::Region => {
            let mut names: Vec<String> = plan.regions.clone();
            names.sort();
            names.dedup();
            let members = names.iter().map(|r| (0..n_clin).filter(|&c| &plan.regions[c] == r).collect()).collect();
            (names, members)
        }
    };
    let mut diagnostics = Vec::new();
    let mut values = Vec::with_capacity(groups.len() * s_count);
    for (g, m) in members.iter().enumerate() {
        let mut zero = 0;
        for s in 0..s_count {
            let d: f64 = m.iter().map(|&c| denom[c * s_count + s]).sum();
            let n: f64 = m.iter().map(|&c| plan.covered[c]).sum();
            if d > 0.0 {
                values.push(100.0 * n / d);
            } else {
                zero += 1;
                values.push(0.0);
            }
        }
        if zero > 0 {
            diagnostics.push(format!("group {}: zero demand in {zero} scenarios, FIC set to 0", groups[g]));
        }
    }
    Ok(FicTable { table: MetricTable { groups, columns: s_count, values }, diagnostics })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(data: &[f64]) -> BoxStats {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    BoxStats {
        min: v.first().copied().unwrap_or(f64::NAN),
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v.last().copied().unwrap_or(f64::NAN),
        mean: if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupStats {
    pub group: String,
    pub stats: BoxStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    /// digests of the scenario sets behind the columns, in order
    pub scenario_digests: Vec<String>,
    pub sr: MetricTable,
    pub fic: MetricTable,
    pub sr_box: Vec<GroupStats>,
    pub fic_box: Vec<GroupStats>,
    pub diagnostics: Vec<String>,
}

impl MetricsReport {
    pub fn new(scenario_digests: Vec<String>, sr: MetricTable, fic: MetricTable, diagnostics: Vec<String>) -> MetricsReport {
        let stats = |t: &MetricTable| {
            t.groups.iter().enumerate().map(|(g, name)| GroupStats { group: name.clone(), stats: box_stats(t.row(g)) }).collect()
        };
        MetricsReport { sr_box: stats(&sr), fic_box: stats(&fic), scenario_digests, sr, fic, diagnostics }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Sr,
    Fic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedTest {
    pub n: usize,
    /// mean of b - a
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: Option<f64>,
    pub df: usize,
    pub p_two_sided: f64,
    /// P-value of the one-sided alternative mean(b - a) > 0
    pub p_greater: f64,
    pub level: f64,
    pub significant: bool,
    pub zero_variance: bool,
    pub note: String,
}

/// Paired t-test on two samples matched by position.
pub fn paired_t(a: &[f64], b: &[f64], level: f64) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(CoreError::Unpaired(format!("{} vs {} observations", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(CoreError::Unpaired("need at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if sd <= 1e-12 * scale {
        let mean = if mean.abs() <= 1e-12 * scale { 0.0 } else { mean };
        let (p2, pg, sig) = if mean == 0.0 { (1.0, 1.0, false) } else { (0.0, if mean > 0.0 { 0.0 } else { 1.0 }, true) };
        return Ok(PairedTest {
            n,
            mean_diff: mean,
            sd_diff: 0.0,
            t: None,
            df,
            p_two_sided: p2,
            p_greater: pg,
            level,
            significant: sig,
            zero_variance: true,
            note: format!("zero variance, difference {mean}"),
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| CoreError::Invalid(e.to_string()))?;
    let upper = 1.0 - dist.cdf(t.abs());
    let p_two = (2.0 * upper).min(1.0);
    let p_greater = 1.0 - dist.cdf(t);
    Ok(PairedTest {
        n,
        mean_diff: mean,
        sd_diff: sd,
        t: Some(t),
        df,
        p_two_sided: p_two,
        p_greater,
        level,
        significant: p_two < level,
        zero_variance: false,
        note: String::new(),
    })
}

/// Compares arms on the per-scenario mean of a metric; arms must share scenario sets.
pub fn paired_compare(a: &MetricsReport, b: &MetricsReport, metric: Metric, level: f64) -> Result<PairedTest> {
    if a.scenario_digests != b.scenario_digests {
        return Err(CoreError::Unpaired("arms were evaluated on different scenario sets".into()));
    }
    let pick = |r: &MetricsReport| match metric {
        Metric::Sr => r.sr.column_means(),
        Metric::Fic => r.fic.column_means(),
    };
    paired_t(&pick(a), &pick(b), level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Stream;

    fn scen(values: Vec<f64>, vaccines: usize, clinics: usize, periods: usize, s: usize) -> ScenarioSet {
        ScenarioSet {
            sample_size: s,
            seed: 0,
            stream: Stream::Training,
            vaccines,
            clinic_ids: (0..clinics).map(|c| format!("K{c}")).collect(),
            periods,
            values,
        }
    }

    fn plan(served: Vec<f64>, covered: Vec<f64>, vaccines: usize, periods: usize, regimen: Vec<u32>) -> ServedPlan {
        let clinics = covered.len();
        ServedPlan {
            vaccines,
            periods,
            clinic_ids: (0..clinics).map(|c| format!("K{c}")).collect(),
            regions: (0..clinics).map(|c| format!("R{}", c / 2)).collect(),
            regimen,
            served,
            covered,
        }
    }

    #[test]
    fn sr_exact_and_zero() {
        let s = scen(vec![4.0, 6.0], 1, 1, 1, 2);
        let full = compute_sr(&plan(vec![5.0], vec![0.0], 1, 1, vec![1]), &s, &["A".into()]).unwrap();
        assert_eq!(full.values, vec![5.0 / 4.0, 5.0 / 6.0]);
        let none = compute_sr(&plan(vec![0.0], vec![0.0], 1, 1, vec![1]), &s, &["A".into()]).unwrap();
        assert_eq!(none.values, vec![0.0, 0.0]);
        let zero = scen(vec![0.0], 1, 1, 1, 1);
        assert_eq!(compute_sr(&plan(vec![0.0], vec![0.0], 1, 1, vec![1]), &zero, &["A".into()]).unwrap().values, vec![1.0]);
    }

    #[test]
    fn fic_two_vaccines() {
        // vaccine 0 (a = 1) and 1 (a = 3), one period, one scenario
        let s = scen(vec![30.0, 90.0], 2, 1, 1, 1);
        let p = plan(vec![30.0, 60.0], vec![20.0], 2, 1, vec![1, 3]);
        let f = compute_fic(&p, &s, Grouping::Clinic, FicDenominator::AllDoses).unwrap();
        assert_eq!(f.table.values, vec![100.0 * 20.0 / 120.0]);
        let c = compute_fic(&p, &s, Grouping::Clinic, FicDenominator::ChildCohort).unwrap();
        assert_eq!(c.table.values, vec![100.0 * 20.0 / 30.0]);
    }

    #[test]
    fn fic_region_weighting_and_zero_demand() {
        let s = scen(vec![10.0, 30.0], 1, 2, 1, 1);
        let p = plan(vec![0.0, 0.0], vec![10.0, 0.0], 1, 1, vec![1]);
        let f = compute_fic(&p, &s, Grouping::Region, FicDenominator::AllDoses).unwrap();
        assert_eq!(f.table.groups, vec!["R0".to_string()]);
        assert_eq!(f.table.values, vec![25.0]);
        let z = scen(vec![0.0, 0.0], 1, 2, 1, 1);
        let f = compute_fic(&p, &z, Grouping::Clinic, FicDenominator::AllDoses).unwrap();
        assert_eq!(f.table.values, vec![0.0, 0.0]);
        assert_eq!(f.diagnostics.len(), 2);
    }

    #[test]
    fn type7_quantiles() {
        let b = box_stats(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 1.75, 2.5, 3.25, 4.0));
    }

    #[test]
    fn paired_degenerate_cases() {
        let a = [1.0, 2.0, 3.0, 5.0];
        let same = paired_t(&a, &a, 0.05).unwrap();
        assert_eq!(same.mean_diff, 0.0);
        assert!(!same.significant);
        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        let shifted = paired_t(&a, &b, 0.05).unwrap();
        assert!(shifted.zero_variance);
        assert!((shifted.mean_diff - 0.1).abs() < 1e-12);
        assert!(shifted.note.starts_with("zero variance"));
        let noisy: Vec<f64> = a.iter().map(|v| v * (1.0 + 1e-15)).collect();
        let round_off = paired_t(&a, &noisy, 0.05).unwrap();
        assert_eq!(round_off.mean_diff, 0.0);
        assert!(!round_off.significant);
        assert!(paired_t(&a, &a[..3], 0.05).is_err());
    }
}
