//! Model behavior on synthetic data, checked against hand-coded oracles.

#![allow(clippy::needless_range_loop)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rfa_core::data::{Dataset, FeatureTable};
use rfa_core::experiments::{bench_default, generate_synthetic, run_cv, FoldPlan, ModelSpec, SyntheticSpec};
use rfa_core::numerics::{pearson_r, r_squared, Matrix};
use rfa_core::pipelines::{fit, predict, Family, FsStrategy, GroupReduction, PipelineConfig};

fn small_pipeline(seed: u64) -> PipelineConfig {
    PipelineConfig {
        ngrams: GroupReduction {
            k_best: 60,
            n_components: 15,
        },
        topics: GroupReduction {
            k_best: 30,
            n_components: 10,
        },
        seed,
        ..PipelineConfig::default()
    }
}

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_instances: 300,
        n_language_features: 120,
        seed,
        ..SyntheticSpec::default()
    }
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn noise_table(like: &FeatureTable, seed: u64) -> FeatureTable {
    let (n, p) = (like.n_instances(), like.n_features());
    let values = Matrix::from_row_major(n, p, noise(n * p, seed)).unwrap();
    FeatureTable::new(
        like.group(),
        like.instance_ids().to_vec(),
        like.feature_names().to_vec(),
        values,
    )
    .unwrap()
}

fn cv(data: &Dataset, families: &[Family], cfg: &PipelineConfig, folds: usize, seed: u64) -> Vec<(f64, Vec<f64>)> {
    let plan = FoldPlan::new(data.instance_ids(), folds, seed).unwrap();
    let report = run_cv(data, &ModelSpec::families(families, cfg), &plan, 1).unwrap();
    report.models.into_iter().map(|m| (m.r2, m.predictions)).collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least squares with intercept through the normal equations.
fn ols(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len() + 1;
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (r, &yi) in rows.iter().zip(y) {
        let x: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
        for i in 0..p {
            xty[i] += x[i] * yi;
            for j in 0..p {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    solve(xtx, xty)
}

#[test]
fn controls_only_cv_matches_normal_equation_oracle() {
    let (data, _) = generate_synthetic(&bench_default()).unwrap();
    let cfg = PipelineConfig {
        seed: 7,
        ..PipelineConfig::default()
    };
    let (r2, _) = cv(&data, &[Family::Controls], &cfg, 10, 7).remove(0);

    let plan = FoldPlan::new(data.instance_ids(), 10, 7).unwrap();
    let y = data.outcome().values();
    let mut pooled = vec![0.0; y.len()];
    for f in 0..10 {
        let (train, test) = plan.split(&data, f).unwrap();
        let rows: Vec<Vec<f64>> = train.iter().map(|&i| data.factors().values().row(i)).collect();
        let ys: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let w = ols(&rows, &ys);
        for &i in &test {
            let x = data.factors().values().row(i);
            pooled[i] = w[0] + x.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let oracle = r_squared(y, &pooled).unwrap();
    assert!((r2 - oracle).abs() <= 0.02, "pipeline {r2} vs oracle {oracle}");
}

#[test]
fn noise_outcome_gives_no_cv_skill() {
    let (data, _) = generate_synthetic(&small_spec(3)).unwrap();
    let data = data.with_outcome_values(noise(data.n_instances(), 99)).unwrap();
    for (r2, _) in cv(
        &data,
        &[Family::Controls, Family::Language, Family::Rfa],
        &small_pipeline(3),
        5,
        3,
    ) {
        assert!(r2.abs() < 0.06, "R2 {r2} on pure noise");
    }
}

#[test]
fn rc_with_noise_language_tracks_controls() {
    let (data, _) = generate_synthetic(&small_spec(4)).unwrap();
    let language = data
        .language()
        .iter()
        .enumerate()
        .map(|(g, t)| noise_table(t, 50 + g as u64))
        .collect();
    let data = data.with_language(language).unwrap();
    // Without supervised selection the inner penalty search sees the noise
    // for what it is; k-best on residuals would hand it pre-screened columns.
    let cfg = PipelineConfig {
        fs_strategy: FsStrategy::NoFs,
        ..small_pipeline(4)
    };
    let out = cv(&data, &[Family::Controls, Family::Rc], &cfg, 5, 4);
    let (controls, rc) = (&out[0], &out[1]);
    assert!((controls.0 - rc.0).abs() < 0.01, "controls {} rc {}", controls.0, rc.0);
    assert!(pearson_r(&controls.1, &rc.1).unwrap() > 0.99);
}

#[test]
fn planted_additive_signal_favors_rc() {
    let spec = SyntheticSpec {
        interaction_signal: 0.0,
        control_signal: 1.0,
        language_signal: 1.0,
        ..small_spec(5)
    };
    let (data, _) = generate_synthetic(&spec).unwrap();
    let out = cv(
        &data,
        &[Family::Controls, Family::Language, Family::Rc],
        &small_pipeline(5),
        5,
        5,
    );
    let (controls, language, rc) = (out[0].0, out[1].0, out[2].0);
    assert!(
        rc > controls && rc > language,
        "rc {rc} controls {controls} language {language}"
    );
}

#[test]
fn uninformative_language_leaves_controls_on_top() {
    let mut sums = [0.0; 6];
    for seed in 0..20 {
        let spec = SyntheticSpec {
            n_instances: 200,
            n_language_features: 60,
            language_signal: 0.0,
            interaction_signal: 0.0,
            seed,
            ..SyntheticSpec::default()
        };
        let (data, _) = generate_synthetic(&spec).unwrap();
        let cfg = PipelineConfig {
            ngrams: GroupReduction {
                k_best: 30,
                n_components: 8,
            },
            topics: GroupReduction {
                k_best: 20,
                n_components: 8,
            },
            seed,
            ..PipelineConfig::default()
        };
        for (s, (r2, _)) in sums.iter_mut().zip(cv(&data, &Family::ALL, &cfg, 5, seed)) {
            *s += r2 / 20.0;
        }
    }
    let controls = sums[0];
    for (family, mean) in Family::ALL.iter().zip(sums).skip(1) {
        assert!(controls >= mean - 0.03, "controls {controls} vs {family} {mean}");
    }
}

#[test]
fn noiseless_rfa_nearly_interpolates_training_data() {
    let spec = SyntheticSpec {
        n_instances: 600,
        n_language_features: 150,
        noise_sd: 0.0,
        seed: 11,
        ..SyntheticSpec::default()
    };
    let (data, _) = generate_synthetic(&spec).unwrap();
    let cfg = PipelineConfig {
        ngrams: GroupReduction {
            k_best: 150,
            n_components: 60,
        },
        topics: GroupReduction {
            k_best: 30,
            n_components: 30,
        },
        seed: 11,
        ..PipelineConfig::default()
    };
    let m = fit(Family::Rfa, &data, &cfg).unwrap();
    let r2 = r_squared(data.outcome().values(), &predict(&m, &data).unwrap()).unwrap();
    assert!(r2 > 0.9, "training R2 {r2}");
}

#[test]
fn report_covers_every_model_fold_and_instance_once() {
    let (data, _) = generate_synthetic(&small_spec(6)).unwrap();
    let plan = FoldPlan::new(data.instance_ids(), 5, 6).unwrap();
    let report = run_cv(&data, &ModelSpec::families(&Family::ALL, &small_pipeline(6)), &plan, 2).unwrap();
    assert_eq!(report.models.len(), 6);
    let mut seen = vec![0usize; data.n_instances()];
    for f in 0..5 {
        for i in plan.split(&data, f).unwrap().1 {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
    for m in &report.models {
        let folds: Vec<usize> = m.folds.iter().map(|f| f.fold).collect();
        assert_eq!(folds, (0..5).collect::<Vec<_>>(), "{}", m.name);
        assert_eq!(m.folds.iter().map(|f| f.n_test).sum::<usize>(), data.n_instances());
        assert_eq!(m.predictions.len(), data.n_instances());
        assert!(m.predictions.iter().all(|p| p.is_finite()));
    }
    // 15 family pairs.
    assert_eq!(report.comparisons.len(), 15);
}
