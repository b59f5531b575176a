//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use moran_assort::assortment::mean_assortment;
use moran_assort::diffusion::DiffusionSpec;
use moran_assort::moran::{ModelParams, PopulationState};
use moran_assort::recombination::{make_recombination, RecombinationDistribution, RecombinationKind};
use moran_assort::sde::BoundaryPolicy;
use moran_assort::{AssortmentScheme, Mask, MAX_LOCI};
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub mu0: f64,
    pub mu1: f64,
    /// Present for Moran runs, absent for diffusion runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_size: Option<u64>,
    pub assortment: AssortmentConfig,
    #[serde(default)]
    pub recombination: RecombinationConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssortmentConfig {
    /// Values `s_0..s_n` by Hamming distance.
    Hamming { s: Vec<f64> },
    /// Differences `s_1 − s_0, …, s_n − s_{n−1}` with `s_0 = 0`.
    HammingIncrements { increments: Vec<f64> },
    /// Values `s_0..s_n` by number of differing loci, summed over loci.
    Additive { s: Vec<f64> },
    /// `[D01, D10, value]` triples.
    Custom { entries: Vec<(Mask, Mask, f64)> },
    /// Full `2ⁿ×2ⁿ` matrix.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecombinationConfig {
    None,
    #[default]
    Free,
    SingleCrossover { r: f64 },
    Custom { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Every individual carries this genotype.
    Monomorphic(Mask),
    /// Genotype counts summing to the population size.
    Counts(Vec<u64>),
    /// Allele-0 frequencies per locus; Moran runs round the product distribution.
    Frequencies(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    /// Diffusion time; Moran runs take `N²` steps per unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default = "auto")]
    pub policy: BoundaryPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    /// Disequilibrium columns for Moran runs; all subsets of two or more loci by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_masks: Option<Vec<Mask>>,
}

fn one() -> u64 {
    1
}

fn auto() -> BoundaryPolicy {
    BoundaryPolicy::Auto
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: None,
            time_horizon: None,
            dt: None,
            record_every: None,
            replicas: 1,
            policy: BoundaryPolicy::Auto,
            initial: None,
            y_masks: None,
        }
    }
}

fn finite(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be finite (got {v})")))
    }
}

fn all_finite(name: &str, v: &[f64]) -> CliResult<()> {
    v.iter().try_for_each(|&x| finite(name, x))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every field and that the model assembles.
    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 || self.n > MAX_LOCI {
            return Err(CliError::Usage(format!("n must be in 1..={MAX_LOCI} (got {})", self.n)));
        }
        finite("mu0", self.mu0)?;
        finite("mu1", self.mu1)?;
        if self.mu0 < 0.0 || self.mu1 < 0.0 {
            return Err(CliError::Usage("mutation rates must be nonnegative".into()));
        }
        match &self.assortment {
            AssortmentConfig::Hamming { s } | AssortmentConfig::Additive { s } => all_finite("assortment.s", s)?,
            AssortmentConfig::HammingIncrements { increments } => all_finite("assortment.increments", increments)?,
            AssortmentConfig::Custom { entries } => entries.iter().try_for_each(|e| finite("assortment.entries", e.2))?,
            AssortmentConfig::Matrix { rows } => rows.iter().try_for_each(|r| all_finite("assortment.rows", r))?,
        }
        match &self.recombination {
            RecombinationConfig::SingleCrossover { r } => finite("recombination.r", *r)?,
            RecombinationConfig::Custom { weights } => all_finite("recombination.weights", weights)?,
            _ => {}
        }
        let run = &self.run;
        if let Some(t) = run.time_horizon {
            finite("run.time_horizon", t)?;
            if t < 0.0 {
                return Err(CliError::Usage("run.time_horizon must be nonnegative".into()));
            }
        }
        if let Some(dt) = run.dt {
            finite("run.dt", dt)?;
            if dt <= 0.0 {
                return Err(CliError::Usage(format!("run.dt must be positive (got {dt})")));
            }
        }
        if run.record_every == Some(0) {
            return Err(CliError::Usage("run.record_every must be positive".into()));
        }
        if run.steps.is_some() && run.time_horizon.is_some() {
            return Err(CliError::Usage("give run.steps or run.time_horizon, not both".into()));
        }
        if let Some(InitialState::Frequencies(x)) = &run.initial {
            all_finite("run.initial.frequencies", x)?;
            if x.len() != self.n || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(CliError::Usage(format!("run.initial.frequencies needs {} values in [0, 1]", self.n)));
            }
        }
        let scheme = self.scheme()?;
        self.recombination_law()?;
        if let Some(pop) = self.population_size {
            if pop == 0 {
                return Err(CliError::Usage("population_size must be positive".into()));
            }
            scheme.validate_for_population(pop).map_err(usage)?;
        }
        Ok(())
    }

    pub fn scheme(&self) -> CliResult<AssortmentScheme> {
        let scheme = match &self.assortment {
            AssortmentConfig::Hamming { s } => AssortmentScheme::hamming(s.clone()),
            AssortmentConfig::HammingIncrements { increments } => AssortmentScheme::hamming_increments(increments),
            AssortmentConfig::Additive { s } => AssortmentScheme::additive(s.clone()),
            AssortmentConfig::Custom { entries } => {
                AssortmentScheme::custom(self.n, entries.iter().map(|&(a, b, v)| ((a, b), v)))
            }
            AssortmentConfig::Matrix { rows } => AssortmentScheme::from_matrix(self.n, rows),
        }
        .map_err(usage)?;
        if scheme.n() != self.n {
            return Err(CliError::Usage(format!("assortment describes {} loci but n = {}", scheme.n(), self.n)));
        }
        Ok(scheme)
    }

    pub fn recombination_law(&self) -> CliResult<RecombinationDistribution> {
        let kind = match &self.recombination {
            RecombinationConfig::None => RecombinationKind::None,
            RecombinationConfig::Free => RecombinationKind::Free,
            RecombinationConfig::SingleCrossover { r } => RecombinationKind::SingleCrossover(*r),
            RecombinationConfig::Custom { weights } => RecombinationKind::Custom(weights.clone()),
        };
        make_recombination(self.n, &kind).map_err(usage)
    }

    pub fn diffusion_spec(&self) -> CliResult<DiffusionSpec> {
        DiffusionSpec::new(mean_assortment(&self.scheme()?), self.mu0, self.mu1).map_err(usage)
    }

    pub fn model_params(&self) -> CliResult<ModelParams> {
        let pop = self
            .population_size
            .ok_or_else(|| CliError::Usage("simulate needs population_size".into()))?;
        ModelParams::new(self.scheme()?, self.recombination_law()?, self.mu0, self.mu1, pop).map_err(usage)
    }

    /// Moran starting state; all individuals carry genotype 0 unless configured.
    pub fn initial_population(&self, pop: u64) -> CliResult<PopulationState> {
        match &self.run.initial {
            None => PopulationState::monomorphic(self.n, pop, 0),
            Some(InitialState::Monomorphic(g)) => PopulationState::monomorphic(self.n, pop, *g),
            Some(InitialState::Counts(c)) => PopulationState::new(self.n, c.clone()),
            Some(InitialState::Frequencies(x)) => PopulationState::new(self.n, product_counts(x, pop)),
        }
        .map_err(usage)
    }

    /// SDE starting point; the centre unless configured.
    pub fn initial_point(&self) -> CliResult<Vec<f64>> {
        match &self.run.initial {
            None => Ok(vec![0.5; self.n]),
            Some(InitialState::Frequencies(x)) => Ok(x.clone()),
            Some(_) => Err(CliError::Usage("sde runs take run.initial.frequencies".into())),
        }
    }
}

/// Largest-remainder rounding of the linkage-equilibrium distribution.
fn product_counts(x: &[f64], pop: u64) -> Vec<u64> {
    let size = 1usize << x.len();
    let exact: Vec<f64> = (0..size)
        .map(|g| {
            let p: f64 = x.iter().enumerate().map(|(u, &xu)| if g >> u & 1 == 0 { xu } else { 1.0 - xu }).product();
            p * pop as f64
        })
        .collect();
    let mut counts: Vec<u64> = exact.iter().map(|v| v.floor() as u64).collect();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = pop - counts.iter().sum::<u64>();
    for &g in order.iter().take(missing as usize) {
        counts[g] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG5: &str = r#"{
        "n": 2, "mu0": 1.0, "mu1": 1.0, "population_size": 1000,
        "assortment": {"kind": "hamming_increments", "params": {"increments": [-15, -210]}},
        "recombination": {"kind": "free"},
        "run": {"seed": 5, "steps": 33000000, "record_every": 1000}
    }"#;

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::parse(FIG5).unwrap();
        assert_eq!(c.population_size, Some(1000));
        assert_eq!(c.run.replicas, 1);
        assert_eq!(c.recombination, RecombinationConfig::Free);
        assert_eq!(c.initial_population(1000).unwrap().counts()[0], 1000);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = FIG5.replace("\"n\": 2", "\"n\": 2, \"colour\": 1");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Usage(_))));
        let bad = FIG5.replace("\"increments\"", "\"increment\"");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Usage(_))));
    }

    #[test]
    fn rejects_mismatched_loci() {
        let bad = FIG5.replace("\"n\": 2", "\"n\": 3");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Usage(_))));
    }

    #[test]
    fn rejects_bad_dt() {
        let bad = FIG5.replace("\"seed\": 5", "\"seed\": 5, \"dt\": 0");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Usage(_))));
    }

    #[test]
    fn product_counts_sum_to_population() {
        let c = product_counts(&[0.3, 0.55, 0.9], 101);
        assert_eq!(c.iter().sum::<u64>(), 101);
        assert_eq!(c.len(), 8);
    }
}
