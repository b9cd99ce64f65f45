mod oracle;

use nalgebra::DMatrix;
use oracle::{gram_schmidt, jacobi_eigen, projector, rbf, rbf_gram, span_distance, Xorshift};
use rfkpca_core::batchpca::{exact_erm, nystrom_erm, rf_erm};
use rfkpca_core::evaluate::{
    erm_objective, erm_objective_with_cross, gram_deviation_cross, lifted_objective_basis,
    procrustes_align, subspace_error,
};
use rfkpca_core::kernelmap::kernel_matrix;
use rfkpca_core::{
    approx_kernel, exact_kernel, sample_feature_map, synth_gaussian_spectrum,
    CovarianceAccumulator, EvalSet, KernelFamily, KernelSpec,
};

fn rbf_spec(sigma2: f64, d: usize) -> KernelSpec {
    KernelSpec::rbf_from_variance(sigma2, d).unwrap()
}

fn random_rows(rng: &mut Xorshift, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.uniform()).collect()
}

#[test]
fn rf_erm_agrees_with_jacobi_on_the_covariance() {
    let mut rng = Xorshift(0x5eed_0001);
    let mut inst = 0;
    while inst < 25 {
        let d = 1 + rng.below(4);
        let m = 2 + rng.below(7);
        let n = m + rng.below(33 - m);
        let k = 1 + rng.below(m - 1);
        let rows = random_rows(&mut rng, n, d);
        let map = sample_feature_map(rbf_spec(0.5, d), m, inst as u64).unwrap();
        let mut acc = CovarianceAccumulator::new(m);
        let mut cov = DMatrix::zeros(m, m);
        for i in 0..n {
            let z = map.transform(&rows[i * d..(i + 1) * d]).unwrap();
            acc.accumulate(&z).unwrap();
            for a in 0..m {
                for b in 0..m {
                    cov[(a, b)] += z[a] * z[b] / n as f64;
                }
            }
        }
        let (vals, vecs) = jacobi_eigen(&cov);
        let gap = vals[k - 1] - vals[k];
        // The projector is only defined to ~ε·λ₁/gap; skip unresolvable gaps.
        if gap < 1e-6 * vals[0] {
            continue;
        }
        inst += 1;
        let model = rf_erm(&acc, k, 0).unwrap();
        let dist = (projector(&vecs, k) - model.projector()).norm();
        assert!(
            dist <= 1e-8,
            "instance {inst}: distance {dist:e}, gap {gap:e}"
        );
        for (r, v) in model.rayleigh.iter().zip(&vals) {
            assert!((r - v).abs() <= 1e-12, "instance {inst}: {r} vs {v}");
        }
    }
}

#[test]
fn exact_erm_agrees_with_jacobi_above_the_dense_limit() {
    let mut rng = Xorshift(0x5eed_0002);
    let (n, d, k) = (300, 3, 4);
    let rows = random_rows(&mut rng, n, d);
    let model = exact_erm(&rbf_spec(0.4, d), &rows, k).unwrap();
    let (vals, vecs) = jacobi_eigen(&rbf_gram(&rows, d, 0.4));
    for i in 0..k {
        assert!((model.gram_eigenvalues[i] - vals[i]).abs() <= 1e-9 * vals[0]);
    }
    let dist = (projector(&vecs, k) - projector(&model.coefficients, k)).norm();
    assert!(dist <= 1e-8, "{dist:e}");
}

#[test]
fn nystrom_matches_the_explicit_low_rank_kernel() {
    let mut rng = Xorshift(0x5eed_0003);
    let (n, d, p, k) = (40, 2, 12, 3);
    let rows = random_rows(&mut rng, n, d);
    let spec = rbf_spec(0.3, d);
    let model = nystrom_erm(&spec, &rows, p, k, 9).unwrap();
    let marks = model.landmarks.clone().unwrap();
    let full = rbf_gram(&rows, d, 0.3);
    let c = DMatrix::from_fn(n, p, |i, j| full[(i, marks[j])]);
    let w = DMatrix::from_fn(p, p, |i, j| full[(marks[i], marks[j])]);
    let (wv, we) = jacobi_eigen(&w);
    let mut pinv = DMatrix::zeros(p, p);
    for i in 0..p {
        if wv[i] > 1e-10 * wv[0] {
            let e = we.column(i);
            pinv += e * e.transpose() / wv[i];
        }
    }
    let approx = &c * pinv * c.transpose();
    let (vals, vecs) = jacobi_eigen(&approx);
    for i in 0..k {
        assert!((model.gram_eigenvalues[i] - vals[i]).abs() <= 1e-8 * vals[0]);
    }
    let dist = (projector(&vecs, k) - projector(&model.coefficients, k)).norm();
    assert!(dist <= 1e-6, "{dist:e}");
}

#[test]
fn nystrom_with_every_point_as_landmark_is_exact() {
    let mut rng = Xorshift(0x5eed_0004);
    let (n, d, k) = (25, 2, 3);
    let rows = random_rows(&mut rng, n, d);
    let spec = rbf_spec(0.5, d);
    let exact = exact_erm(&spec, &rows, k).unwrap();
    let nys = nystrom_erm(&spec, &rows, n, k, 3).unwrap();
    let dist = (projector(&exact.coefficients, k) - projector(&nys.coefficients, k)).norm();
    assert!(dist <= 1e-8, "{dist:e}");
}

#[test]
fn erm_objective_matches_pointwise_eigenfunctions() {
    let mut rng = Xorshift(0x5eed_0005);
    let (ntr, ne, d, k, s2) = (30, 17, 3, 3, 0.6);
    let train = random_rows(&mut rng, ntr, d);
    let eval = random_rows(&mut rng, ne, d);
    let model = exact_erm(&rbf_spec(s2, d), &train, k).unwrap();
    let mut want = 0.0;
    for p in 0..ne {
        let x = &eval[p * d..(p + 1) * d];
        for i in 0..k {
            let f: f64 = (0..ntr)
                .map(|q| model.coefficients[(q, i)] * rbf(&train[q * d..(q + 1) * d], x, s2))
                .sum::<f64>()
                / model.gram_eigenvalues[i].sqrt();
            want += f * f;
        }
    }
    want /= ne as f64;
    let got = erm_objective(&model, &eval).unwrap();
    assert!((got.value - want).abs() <= 1e-12 * want.max(1.0));
    assert_eq!(got.effective_rank, k);
}

#[test]
fn erm_objective_on_the_training_set_is_the_eigenvalue_mass() {
    let mut rng = Xorshift(0x5eed_0006);
    let (n, d, k) = (20, 2, 4);
    let rows = random_rows(&mut rng, n, d);
    let model = exact_erm(&rbf_spec(0.5, d), &rows, k).unwrap();
    let (vals, _) = jacobi_eigen(&rbf_gram(&rows, d, 0.5));
    let want: f64 = vals[..k].iter().sum::<f64>() / n as f64;
    let got = erm_objective(&model, &rows).unwrap().value;
    assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    let cross = kernel_matrix(&model.spec, &rows, &rows).unwrap();
    assert!(gram_deviation_cross(&model, &cross).unwrap() <= 1e-9);
}

#[test]
fn erm_objective_single_pair_closed_form() {
    let spec = rbf_spec(2.0, 2);
    let model = exact_erm(&spec, &[0.0, 0.0], 1).unwrap();
    let x = [1.0, 1.0];
    let c = (-2.0f64 / 4.0).exp();
    let got = erm_objective(&model, &x).unwrap().value;
    assert!((got - c * c).abs() < 1e-15);
    let cross = DMatrix::from_element(1, 1, c);
    assert!((erm_objective_with_cross(&model, &cross).unwrap().value - got).abs() < 1e-15);
}

/// Finite-dimensional kernel realized exactly by the identity feature map.
fn identity_eval(rows: &[f64], d: usize) -> EvalSet {
    let n = rows.len() / d;
    let z = DMatrix::from_column_slice(d, n, rows);
    EvalSet::from_exact_features(&rbf_spec(1.0, d), rows, z).unwrap()
}

#[test]
fn lifted_objective_of_the_eigenbasis_is_the_kernel_mass() {
    let mut rng = Xorshift(0x5eed_0007);
    for _ in 0..10 {
        let (n, d) = (12 + rng.below(20), 2 + rng.below(5));
        let rows = random_rows(&mut rng, n, d);
        let eval = identity_eval(&rows, d);
        let z = DMatrix::from_column_slice(d, n, &rows);
        let cov = &z * z.transpose() / n as f64;
        let (_, cvecs) = jacobi_eigen(&cov);
        let kmat = z.transpose() * &z;
        let (kvals, _) = jacobi_eigen(&kmat);
        for k in 1..=d {
            let u = cvecs.columns(0, k).into_owned();
            let got = lifted_objective_basis(&u, &eval).unwrap().value;
            let want: f64 = kvals[..k].iter().sum::<f64>() / n as f64;
            assert!(
                (got - want).abs() <= 1e-10 * want.max(1.0),
                "k={k}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn procrustes_beats_random_rotations() {
    let mut rng = Xorshift(0x5eed_0008);
    let (m, k) = (7, 3);
    let u = gram_schmidt(&DMatrix::from_fn(m, k, |_, _| rng.uniform()));
    let target = gram_schmidt(&DMatrix::from_fn(m, k, |_, _| rng.uniform()));
    let r = procrustes_align(&u, &target).unwrap().rotation;
    let best = (&u * &r - &target).norm();
    assert!((r.transpose() * &r - DMatrix::identity(k, k)).norm() < 1e-12);
    for _ in 0..3000 {
        let q = gram_schmidt(&DMatrix::from_fn(k, k, |_, _| rng.normal()));
        for flip in [1.0, -1.0] {
            let mut q = q.clone();
            q.column_mut(0).scale_mut(flip);
            assert!((&u * &q - &target).norm() >= best - 1e-12);
        }
    }
}

#[test]
fn subspace_error_is_half_the_squared_projector_distance() {
    let mut rng = Xorshift(0x5eed_0009);
    for _ in 0..20 {
        let m = 3 + rng.below(6);
        let k = 1 + rng.below(m - 1);
        let a = gram_schmidt(&DMatrix::from_fn(m, k, |_, _| rng.uniform()));
        let b = gram_schmidt(&DMatrix::from_fn(m, k, |_, _| rng.uniform()));
        let want = 0.5 * span_distance(&a, &b).powi(2);
        let got = subspace_error(&a, &b).unwrap();
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn exact_kernel_matches_closed_forms() {
    let mut rng = Xorshift(0x5eed_000a);
    let d = 4;
    for _ in 0..50 {
        let x: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        let s = 0.7;
        let l1: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        let cauchy: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| 1.0 / (1.0 + (a - b).powi(2) / (s * s)))
            .product();
        let cases = [
            (KernelFamily::Rbf, rbf(&x, &y, s * s)),
            (KernelFamily::Laplacian, (-l1 / s).exp()),
            (KernelFamily::Cauchy, cauchy),
        ];
        for (family, want) in cases {
            let spec = KernelSpec::new(family, s, d).unwrap();
            assert!((exact_kernel(&spec, &x, &y).unwrap() - want).abs() < 1e-14);
        }
    }
}

#[test]
fn random_features_approach_every_kernel_family() {
    let mut rng = Xorshift(0x5eed_000b);
    let d = 3;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            (x, y)
        })
        .collect();
    for family in [
        KernelFamily::Rbf,
        KernelFamily::Laplacian,
        KernelFamily::Cauchy,
    ] {
        let spec = KernelSpec::new(family, 0.8, d).unwrap();
        let mut errs = Vec::new();
        for m in [100, 6400] {
            let map = sample_feature_map(spec, m, 11).unwrap();
            let mean = pairs
                .iter()
                .map(|(x, y)| {
                    (approx_kernel(&map, x, y).unwrap() - exact_kernel(&spec, x, y).unwrap()).abs()
                })
                .sum::<f64>()
                / pairs.len() as f64;
            errs.push(mean);
        }
        // Monte Carlo error shrinks like 1/√m: a 64× budget should cut it ~8×.
        assert!(errs[1] < errs[0] / 3.0, "{family:?}: {errs:?}");
        assert!(errs[1] < 0.03, "{family:?}: {errs:?}");
    }
}

#[test]
fn synthetic_sample_covariance_approaches_the_population() {
    let eig: Vec<f64> = (0..6).map(|j| 0.7f64.powi(j)).collect();
    let data = synth_gaussian_spectrum(6, 40_000, &eig, 4).unwrap();
    let r = &data.rotation;
    let pop = r * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig.clone())) * r.transpose();
    assert!((data.population_covariance() - &pop).norm() < 1e-12);
    let x = DMatrix::from_row_slice(40_000, 6, data.dataset.as_rows());
    let emp = x.transpose() * &x / 40_000.0;
    assert!((emp - pop).norm() < 0.05);
    let (_, vecs) = jacobi_eigen(&data.population_covariance());
    let top = data.top_subspace(2).unwrap();
    assert!(span_distance(&top, &vecs.columns(0, 2).into_owned()) < 1e-8);
}
