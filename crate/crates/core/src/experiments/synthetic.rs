use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adaptation::CENSUS_FACTORS;
use crate::data::{Dataset, FeatureTable, GroupLabel, OutcomeVector};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pipelines::{GroupReduction, PipelineConfig};

/// Seeds of the standard 20-run benchmark.
pub const BENCH_SEEDS: RangeInclusive<u64> = 7..=26;

/// Parameters of the planted-signal generator.
///
/// Factors are noisy mixtures of a few latent demographic dimensions. Each
/// language group holds relative frequencies of Poisson counts whose rates
/// load on latent topics. The outcome sums unit-variance control, language
/// and factor-by-topic interaction components plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_instances: usize,
    /// Features per language group.
    pub n_language_features: usize,
    /// 1 (n-grams) or 2 (n-grams and topics).
    pub n_groups: usize,
    pub n_factors: usize,
    pub control_signal: f64,
    pub language_signal: f64,
    pub interaction_signal: f64,
    pub noise_sd: f64,
    /// Probability that a count cell is zeroed.
    pub sparsity: f64,
    pub seed: u64,
    pub n_latent_factors: usize,
    pub n_topics: usize,
    /// How many factors modulate the language effect.
    pub n_interacting: usize,
    /// Topics each interacting factor modulates.
    pub interaction_topics: usize,
    pub factor_noise: f64,
    /// Correlation between latent topics and latent demographics.
    pub topic_demographic_correlation: f64,
    pub words_per_instance: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_instances: 800,
            n_language_features: 500,
            n_groups: 2,
            n_factors: 11,
            control_signal: 1.0,
            language_signal: 0.5,
            interaction_signal: 0.7,
            noise_sd: 0.7,
            sparsity: 0.05,
            seed: 7,
            n_latent_factors: 3,
            n_topics: 30,
            n_interacting: 3,
            interaction_topics: 4,
            factor_noise: 0.25,
            topic_demographic_correlation: 0.3,
            words_per_instance: 20_000.0,
        }
    }
}

/// The `bench-default` benchmark: 800 instances, two groups of 500
/// features, 11 factors, seed 7.
pub fn bench_default() -> SyntheticSpec {
    SyntheticSpec::default()
}

/// Pipeline sizes used with [`bench_default`]: the 250 best-correlated
/// features of each group reduced to 40 components.
pub fn bench_pipeline() -> PipelineConfig {
    let r = GroupReduction {
        k_best: 250,
        n_components: 40,
    };
    PipelineConfig {
        ngrams: r,
        topics: r,
        ..PipelineConfig::health_defaults()
    }
}

impl SyntheticSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        SyntheticSpec { seed, ..self.clone() }
    }

    /// Parses a TOML spec; missing keys take their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = crate::config::parse_toml(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("control_signal", self.control_signal),
            ("language_signal", self.language_signal),
            ("interaction_signal", self.interaction_signal),
            ("noise_sd", self.noise_sd),
            ("factor_noise", self.factor_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return bad(format!("sparsity must lie in [0, 1], got {}", self.sparsity));
        }
        if !(0.0..1.0).contains(&self.topic_demographic_correlation.abs()) {
            return bad("topic_demographic_correlation must lie in (-1, 1)".into());
        }
        if self.n_instances < 4 {
            return bad("n_instances must be at least 4".into());
        }
        if !(1..=2).contains(&self.n_groups) {
            return bad(format!("n_groups must be 1 or 2, got {}", self.n_groups));
        }
        if self.n_language_features == 0 || self.n_topics == 0 || self.n_latent_factors == 0 {
            return bad("feature, topic and latent-factor counts must be positive".into());
        }
        if self.interaction_topics == 0 || self.interaction_topics > self.n_topics {
            return bad(format!(
                "interaction_topics must lie in 1..={}, got {}",
                self.n_topics, self.interaction_topics
            ));
        }
        if self.n_interacting > self.n_factors {
            return bad(format!(
                "n_interacting ({}) exceeds n_factors ({})",
                self.n_interacting, self.n_factors
            ));
        }
        if !(self.words_per_instance.is_finite() && self.words_per_instance >= 1.0) {
            return bad("words_per_instance must be at least 1".into());
        }
        Ok(())
    }
}

/// Planted coefficients, recorded for oracle checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    pub factor_names: Vec<String>,
    /// Control weights on the standardized factors.
    pub beta: Vec<f64>,
    /// Language weights on the latent topics.
    pub gamma: Vec<f64>,
    pub interacting_factors: Vec<String>,
    /// Per interacting factor, weights on the latent topics.
    pub delta: Vec<Vec<f64>>,
    /// Standard deviations of the raw control, language and interaction
    /// components before each was scaled to unit variance.
    pub component_sd: [f64; 3],
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn standardize(v: &mut [f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    for x in v.iter_mut() {
        *x = if sd > 0.0 { (*x - m) / sd } else { 0.0 };
    }
    sd
}

fn unit_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..cols)
        .map(|_| {
            let mut c: Vec<f64> = (0..rows).map(|_| normal(rng)).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= norm);
            c
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn language_group(
    group: GroupLabel,
    prefix: &str,
    topics: &[Vec<f64>],
    words: &[f64],
    spec: &SyntheticSpec,
    base_range: (f64, f64),
    ids: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<FeatureTable> {
    let n = words.len();
    let p = spec.n_language_features;
    let mut columns = Vec::with_capacity(p);
    for _ in 0..p {
        let base = (rng.random_range(base_range.0.ln()..base_range.1.ln())).exp();
        let k1 = rng.random_range(0..spec.n_topics);
        let s1 = rng.random_range(0.3..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let (k2, s2) = if rng.random_bool(0.3) {
            (rng.random_range(0..spec.n_topics), rng.random_range(-0.4..0.4))
        } else {
            (k1, 0.0)
        };
        let mut col = Vec::with_capacity(n);
        for i in 0..n {
            let rate = base * (s1 * topics[k1][i] + s2 * topics[k2][i]).exp();
            let lambda = rate * words[i];
            let count = if lambda > 0.0 {
                Poisson::new(lambda)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
                    .sample(rng)
            } else {
                0.0
            };
            let dropped = spec.sparsity > 0.0 && rng.random_bool(spec.sparsity);
            col.push(if dropped { 0.0 } else { count / words[i] });
        }
        columns.push(col);
    }
    let width = (p.max(1) - 1).to_string().len().max(4);
    FeatureTable::new(
        group,
        ids.to_vec(),
        (0..p).map(|j| format!("{prefix}{j:0width$}")).collect(),
        Matrix::from_columns(n, &columns)?,
    )
}

/// Draws a dataset from `spec`. Instance ids are `c0000`, `c0001`, ….
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, SyntheticTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_instances;
    let d = spec.n_factors;
    let q = spec.n_latent_factors;
    let ids: Vec<String> = (0..n).map(|i| format!("c{i:04}")).collect();

    let latent: Vec<Vec<f64>> = (0..q).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
    let factor_names: Vec<String> = if d <= CENSUS_FACTORS.len() {
        CENSUS_FACTORS[..d].iter().map(|s| s.to_string()).collect()
    } else {
        (0..d).map(|j| format!("factor_{j:02}")).collect()
    };
    let loadings = unit_columns(q, d, &mut rng);
    let mut factors_std: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut factors_raw: Vec<Vec<f64>> = Vec::with_capacity(d);
    for a in &loadings {
        let mut f: Vec<f64> = (0..n)
            .map(|i| (0..q).map(|k| a[k] * latent[k][i]).sum::<f64>() + spec.factor_noise * normal(&mut rng))
            .collect();
        standardize(&mut f);
        let offset = rng.random_range(10.0..60.0);
        let scale = rng.random_range(1.0..10.0);
        factors_raw.push(f.iter().map(|v| offset + scale * v).collect());
        factors_std.push(f);
    }

    let rho = spec.topic_demographic_correlation;
    let mix = unit_columns(q, spec.n_topics, &mut rng);
    let topics: Vec<Vec<f64>> = mix
        .iter()
        .map(|m| {
            let mut t: Vec<f64> = (0..n)
                .map(|i| {
                    let demo: f64 = (0..q).map(|k| m[k] * latent[k][i]).sum();
                    rho * demo + (1.0 - rho * rho).sqrt() * normal(&mut rng)
                })
                .collect();
            standardize(&mut t);
            t
        })
        .collect();

    let words: Vec<f64> = (0..n)
        .map(|_| (spec.words_per_instance * (0.3 * normal(&mut rng)).exp()).max(1.0))
        .collect();
    let mut language = vec![language_group(
        GroupLabel::Ngrams,
        "w",
        &topics,
        &words,
        spec,
        (2e-4, 5e-3),
        &ids,
        &mut rng,
    )?];
    if spec.n_groups == 2 {
        language.push(language_group(
            GroupLabel::Topics,
            "t",
            &topics,
            &words,
            spec,
            (1e-3, 1e-2),
            &ids,
            &mut rng,
        )?);
    }

    let beta: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let gamma: Vec<f64> = (0..spec.n_topics).map(|_| normal(&mut rng)).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let mut interacting: Vec<usize> = order[..spec.n_interacting].to_vec();
    interacting.sort_unstable();
    let delta: Vec<Vec<f64>> = interacting
        .iter()
        .map(|_| {
            let mut w = vec![0.0; spec.n_topics];
            let mut idx: Vec<usize> = (0..spec.n_topics).collect();
            idx.shuffle(&mut rng);
            for &k in &idx[..spec.interaction_topics] {
                w[k] = normal(&mut rng);
            }
            w
        })
        .collect();

    let topic_score = |w: &[f64], i: usize| -> f64 { w.iter().zip(&topics).map(|(c, t)| c * t[i]).sum() };
    let mut control: Vec<f64> = (0..n)
        .map(|i| beta.iter().zip(&factors_std).map(|(b, f)| b * f[i]).sum())
        .collect();
    let mut lang: Vec<f64> = (0..n).map(|i| topic_score(&gamma, i)).collect();
    let scaled: Vec<Vec<f64>> = interacting
        .iter()
        .map(|&j| {
            let f = &factors_std[j];
            let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            f.iter()
                .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
                .collect()
        })
        .collect();
    let mut inter: Vec<f64> = (0..n)
        .map(|i| scaled.iter().zip(&delta).map(|(v, dl)| v[i] * topic_score(dl, i)).sum())
        .collect();
    let component_sd = [
        standardize(&mut control),
        standardize(&mut lang),
        standardize(&mut inter),
    ];
    let y: Vec<f64> = (0..n)
        .map(|i| {
            spec.control_signal * control[i]
                + spec.language_signal * lang[i]
                + spec.interaction_signal * inter[i]
                + spec.noise_sd * normal(&mut rng)
        })
        .collect();

    let factors = FeatureTable::new(
        GroupLabel::Factors,
        ids.clone(),
        factor_names.clone(),
        Matrix::from_columns(n, &factors_raw)?,
    )?;
    let dataset = Dataset::new(language, factors, OutcomeVector::new("outcome", ids, y)?)?;
    Ok((
        dataset,
        SyntheticTruth {
            spec: spec.clone(),
            interacting_factors: interacting.iter().map(|&j| factor_names[j].clone()).collect(),
            factor_names,
            beta,
            gamma,
            delta,
            component_sd,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            n_instances: 60,
            n_language_features: 30,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let (d, truth) = generate_synthetic(&small()).unwrap();
        assert_eq!(d.n_instances(), 60);
        assert_eq!(d.language().len(), 2);
        assert_eq!(d.language()[0].n_features(), 30);
        assert_eq!(d.factors().feature_names(), CENSUS_FACTORS);
        assert_eq!(truth.interacting_factors.len(), 3);
        assert_eq!(generate_synthetic(&small()).unwrap().0, d);
        assert_ne!(generate_synthetic(&small().with_seed(8)).unwrap().0, d);
        assert!(d.language()[0].values().to_row_major().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn zero_signals_leave_pure_noise() {
        let spec = SyntheticSpec {
            control_signal: 0.0,
            language_signal: 0.0,
            interaction_signal: 0.0,
            noise_sd: 0.0,
            ..small()
        };
        let (d, _) = generate_synthetic(&spec).unwrap();
        assert!(d.outcome().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn toml_spec() {
        let spec = SyntheticSpec::from_toml_str("n_instances = 50\nnoise_sd = 0.1\n").unwrap();
        assert_eq!(spec.n_instances, 50);
        assert_eq!(spec.noise_sd, 0.1);
        assert_eq!(spec.n_factors, 11);
        let err = SyntheticSpec::from_toml_str("n_instance = 50\n").unwrap_err();
        assert!(err.to_string().contains("n_instance"), "{err}");
        assert!(SyntheticSpec::from_toml_str("sparsity = 2.0\n").is_err());
    }

    #[test]
    fn validation() {
        let bad = [
            SyntheticSpec {
                sparsity: 1.5,
                ..small()
            },
            SyntheticSpec {
                control_signal: -1.0,
                ..small()
            },
            SyntheticSpec { n_groups: 3, ..small() },
            SyntheticSpec {
                n_interacting: 12,
                ..small()
            },
        ];
        for s in bad {
            assert!(generate_synthetic(&s).is_err());
        }
    }
}
