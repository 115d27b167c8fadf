//! Mean demand tables and reproducible scenario sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};

/// μ, σ per (vaccine, clinic, period) and the daily mean μ' per (vaccine, clinic).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub vaccines: usize,
    pub clinic_ids: Vec<String>,
    pub periods: usize,
    /// index `(i * clinics + c) * periods + t`
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// index `i * clinics + c`
    pub daily: Vec<f64>,
    /// Sample Poisson(μ) instead of the clamped normal.
    #[serde(default)]
    pub poisson: bool,
}

impl DemandModel {
    pub fn zeros(vaccines: usize, clinic_ids: Vec<String>, periods: usize) -> DemandModel {
        let n = vaccines * clinic_ids.len();
        DemandModel {
            vaccines,
            periods,
            means: vec![0.0; n * periods],
            stds: vec![0.0; n * periods],
            daily: vec![0.0; n],
            clinic_ids,
            poisson: false,
        }
    }

    pub fn clinics(&self) -> usize {
        self.clinic_ids.len()
    }

    pub fn cell(&self, i: usize, c: usize, t: usize) -> usize {
        (i * self.clinics() + c) * self.periods + t
    }

    pub fn mean(&self, i: usize, c: usize, t: usize) -> f64 {
        self.means[self.cell(i, c, t)]
    }

    pub fn std(&self, i: usize, c: usize, t: usize) -> f64 {
        self.stds[self.cell(i, c, t)]
    }

    pub fn daily_mean(&self, i: usize, c: usize) -> f64 {
        self.daily[i * self.clinics() + c]
    }

    pub fn total_mean(&self, i: usize, c: usize) -> f64 {
        (0..self.periods).map(|t| self.mean(i, c, t)).sum()
    }

    pub fn grand_total(&self) -> f64 {
        self.means.iter().sum()
    }

    pub fn set(&mut self, i: usize, c: usize, t: usize, mean: f64, std: f64) {
        let k = self.cell(i, c, t);
        self.means[k] = mean;
        self.stds[k] = std;
    }

    pub fn set_daily(&mut self, i: usize, c: usize, daily: f64) {
        let k = i * self.clinics() + c;
        self.daily[k] = daily;
    }

    pub fn check(&self) -> Result<()> {
        let n = self.vaccines * self.clinics();
        if self.means.len() != n * self.periods || self.stds.len() != n * self.periods || self.daily.len() != n {
            return Err(CoreError::IndexMismatch("demand table sizes".into()));
        }
        for (k, (&m, &s)) in self.means.iter().zip(&self.stds).enumerate() {
            if !(m.is_finite() && m >= 0.0 && s.is_finite() && s >= 0.0) {
                return Err(CoreError::Invalid(format!("demand cell {k}: mean {m}, std {s}")));
            }
            if m == 0.0 && s != 0.0 {
                return Err(CoreError::Invalid(format!("demand cell {k}: zero mean with std {s}")));
            }
        }
        if self.daily.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(CoreError::Invalid("daily means must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stream {
    Training,
    Posterior,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Training => 0x7472_6169_6e00_0001,
            Stream::Posterior => 0x706f_7374_0000_0002,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub sample_size: usize,
    pub seed: u64,
    pub stream: Stream,
    pub vaccines: usize,
    pub clinic_ids: Vec<String>,
    pub periods: usize,
    /// index `((i * clinics + c) * periods + t) * sample_size + s`
    pub values: Vec<f64>,
}

impl ScenarioSet {
    pub fn clinics(&self) -> usize {
        self.clinic_ids.len()
    }

    pub fn coords(&self) -> usize {
        self.vaccines * self.clinics() * self.periods
    }

    pub fn value(&self, i: usize, c: usize, t: usize, s: usize) -> f64 {
        self.values[((i * self.clinics() + c) * self.periods + t) * self.sample_size + s]
    }

    /// All S draws of coordinate `k = (i * clinics + c) * periods + t`.
    pub fn draws(&self, k: usize) -> &[f64] {
        &self.values[k * self.sample_size..(k + 1) * self.sample_size]
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.sample_size as u64).to_le_bytes());
        h.update((self.vaccines as u64).to_le_bytes());
        h.update((self.periods as u64).to_le_bytes());
        for id in &self.clinic_ids {
            h.update(id.as_bytes());
            h.update([0]);
        }
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn id_hash(id: &str) -> u64 {
    let d = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Seed of the generator for one draw.
fn draw_key(seed: u64, stream: Stream, i: usize, clinic: u64, t: usize, s: usize) -> u64 {
    let mut k = mix(seed ^ stream.tag());
    for part in [i as u64, clinic, t as u64, s as u64] {
        k = mix(k ^ part);
    }
    k
}

fn draw(model: &DemandModel, i: usize, c: usize, t: usize, key: u64) -> f64 {
    let (mu, sigma) = (model.mean(i, c, t), model.std(i, c, t));
    if mu == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    if model.poisson {
        return Poisson::new(mu).map(|p| p.sample(&mut rng)).unwrap_or(mu);
    }
    if sigma == 0.0 {
        return mu;
    }
    let z: f64 = StandardNormal.sample(&mut rng);
    (mu + sigma * z).max(0.0)
}

fn sample(model: &DemandModel, size: usize, seed: u64, stream: Stream) -> Result<ScenarioSet> {
    if size == 0 {
        return Err(CoreError::EmptySample);
    }
    model.check()?;
    let hashes: Vec<u64> = model.clinic_ids.iter().map(|id| id_hash(id)).collect();
    let mut values = Vec::with_capacity(model.means.len() * size);
    for i in 0..model.vaccines {
        for (c, &h) in hashes.iter().enumerate() {
            for t in 0..model.periods {
                for s in 0..size {
                    values.push(draw(model, i, c, t, draw_key(seed, stream, i, h, t, s)));
                }
            }
        }
    }
    Ok(ScenarioSet {
        sample_size: size,
        seed,
        stream,
        vaccines: model.vaccines,
        clinic_ids: model.clinic_ids.clone(),
        periods: model.periods,
        values,
    })
}

/// Training scenarios: δ = max(0, N(μ, σ)), one independent stream per (i, j, t, s).
pub fn sample_scenarios(model: &DemandModel, size: usize, seed: u64) -> Result<ScenarioSet> {
    sample(model, size, seed, Stream::Training)
}

/// Same as [`sample_scenarios`] on a separate stream.
pub fn posterior_sample(model: &DemandModel, size: usize, seed: u64) -> Result<ScenarioSet> {
    sample(model, size, seed, Stream::Posterior)
}
