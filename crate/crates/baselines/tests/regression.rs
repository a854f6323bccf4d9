use std::collections::HashMap;

use baselines::{ablation_predict, fit_minnorm, predict_last, RegressionMode};
use encoder::EncodingCache;
use icl::{IclConfig, IclParams, Standardizer};
use mining::ContextSequence;
use nalgebra::{DMatrix, DVector};
use numcore::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn randm(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Centred min-norm solution through nalgebra's SVD pseudo-inverse.
fn oracle(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let (n, d) = (x.len(), x[0].len());
    let xm: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, d, |i, j| x[i][j] - xm[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let eps = 1e-10 * xc.singular_values().max();
    let pinv = xc.pseudo_inverse(eps).unwrap();
    let w = pinv * yc;
    let b = ym - w.iter().zip(&xm).map(|(a, m)| a * m).sum::<f64>();
    (w.iter().copied().collect(), b)
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

#[test]
fn identity_design_interpolates() {
    let fit = fit_minnorm(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[3.0, 5.0], 0.0).unwrap();
    assert!((fit.predict(&[1.0, 0.0]) - 3.0).abs() < 1e-14);
    assert!((fit.predict(&[0.0, 1.0]) - 5.0).abs() < 1e-14);
}

#[test]
fn single_row_is_reproduced() {
    let fit = fit_minnorm(&[vec![0.3, -2.0, 1.0]], &[7.5], 0.0).unwrap();
    assert_eq!(fit.predict(&[0.3, -2.0, 1.0]), 7.5);
}

#[test]
fn underdetermined_matches_pseudo_inverse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let x = randm(&mut rng, 9, 768);
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
        let fit = fit_minnorm(&x, &y, 0.0).unwrap();
        let (w, b) = oracle(&x, &y);
        assert!(rel(&fit.weights, &w) <= 1e-8, "{}", rel(&fit.weights, &w));
        assert!((fit.intercept - b).abs() <= 1e-8 * b.abs().max(1.0));
    }
}

#[test]
fn overdetermined_and_rank_deficient_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = randm(&mut rng, 40, 6);
    let y: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
    let fit = fit_minnorm(&x, &y, 0.0).unwrap();
    assert!(rel(&fit.weights, &oracle(&x, &y).0) <= 1e-8);

    // duplicated column: rank 5 in 6 columns
    let xd: Vec<Vec<f64>> = x.iter().map(|r| { let mut r = r.clone(); r[5] = r[0]; r }).collect();
    let fit = fit_minnorm(&xd, &y, 0.0).unwrap();
    let (w, _) = oracle(&xd, &y);
    assert!(rel(&fit.weights, &w) <= 1e-8);
    assert!((fit.weights[0] - fit.weights[5]).abs() < 1e-10);
}

#[test]
fn ridge_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, d, lam) = (12, 5, 0.7);
    let x = randm(&mut rng, n, d);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let fit = fit_minnorm(&x, &y, lam).unwrap();
    let xm: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, d, |i, j| x[i][j] - xm[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let a = xc.transpose() * &xc + DMatrix::identity(d, d) * lam;
    let w = a.lu().solve(&(xc.transpose() * yc)).unwrap();
    assert!(rel(&fit.weights, w.as_slice()) <= 1e-10);
}

#[test]
fn affine_labels_are_recovered_in_context() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // low-dimensional features
    let x = randm(&mut rng, 10, 5);
    let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = x.iter().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - 1.25).collect();
    assert!((predict_last(&x, &y, 0.0).unwrap() - y[9]).abs() <= 1e-8);

    // high-dimensional features on a 4-dimensional affine subspace
    let basis = randm(&mut rng, 4, 768);
    let shift: Vec<f64> = (0..768).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z = randm(&mut rng, 10, 4);
    let x: Vec<Vec<f64>> = z
        .iter()
        .map(|zi| (0..768).map(|j| shift[j] + (0..4).map(|t| zi[t] * basis[t][j]).sum::<f64>()).collect())
        .collect();
    let v: Vec<f64> = (0..768).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + 3.0).collect();
    assert!((predict_last(&x, &y, 0.0).unwrap() - y[9]).abs() <= 1e-8);
}

#[test]
fn constant_labels_predict_the_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = randm(&mut rng, 10, 30);
    let y = vec![-4.25; 10];
    assert!((predict_last(&x, &y, 0.0).unwrap() + 4.25).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolates_when_rows_do_not_exceed_columns(seed in 0u64..10_000, n in 1usize..10, extra in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = n + extra;
        let x = randm(&mut rng, n, d);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let fit = fit_minnorm(&x, &y, 0.0).unwrap();
        for (r, t) in x.iter().zip(&y) {
            prop_assert!((fit.predict(r) - t).abs() <= 1e-8);
        }
    }

    #[test]
    fn order_of_context_examples_does_not_matter(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = randm(&mut rng, 10, 12);
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
        let base = predict_last(&x, &y, 0.0).unwrap();
        let mut perm: Vec<usize> = (0..9).collect();
        for i in (1..9).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).chain([x[9].clone()]).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).chain([y[9]]).collect();
        prop_assert!((predict_last(&xp, &yp, 0.0).unwrap() - base).abs() <= 1e-9 * base.abs().max(1.0));
    }
}

#[test]
fn identity_selection_equals_full_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = 6;
    let ids: Vec<String> = (0..10).map(|i| format!("m{i}")).collect();
    let data: Vec<f32> = (0..10 * d).map(|_| rng.random_range(-1.0..1.0f32)).collect();
    let cache = EncodingCache { ids: ids.clone(), encodings: Tensor::new(vec![10, d], data).unwrap() };
    let index = cache.index();
    let labels: HashMap<&str, f64> = ids.iter().map(|i| (i.as_str(), rng.random_range(-2.0..2.0))).collect();
    let ctx = ContextSequence { pattern_id: "P".into(), molecule_ids: ids.clone() };

    let cfg = IclConfig { dim: d, n_layers: 1, n_heads: 1, input_dim: d, ..Default::default() };
    let mut p: IclParams<f64> = IclParams::init(&cfg, &mut rng).unwrap();
    let mut eye = Tensor::zeros(&[d, d]);
    for i in 0..d {
        eye.data_mut()[i * d + i] = 1.0;
    }
    p.store.insert("select.w", eye);
    p.store.insert("select.b", Tensor::zeros(&[d]));
    let std = Standardizer::identity(d);

    let full = ablation_predict(&ctx, RegressionMode::FullRegression, &cache, &index, &labels, None).unwrap();
    let sel = ablation_predict(&ctx, RegressionMode::SelectionRegression, &cache, &index, &labels, Some((&p, &std))).unwrap();
    assert!((full - sel).abs() < 1e-12);

    let mut missing = ctx.clone();
    missing.molecule_ids[3] = "nope".into();
    let err = ablation_predict(&missing, RegressionMode::FullRegression, &cache, &index, &labels, None).unwrap_err();
    assert!(err.to_string().contains("nope"));
}
