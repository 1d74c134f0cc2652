use msfbm::error::Error;
use msfbm::kernels::{integrated_cov, log_kernel_cov, msfbm_cross_cov, KernelArgs};
use msfbm::model::{ModelParams, PairParams};
use msfbm::simulate::*;

/// `sum x_l y_(l+k) / (N - k)`: the field is centered, so no mean is
/// removed.
fn lag_product(x: &[f64], y: &[f64], k: usize) -> f64 {
    let n = x.len() - k;
    (0..n).map(|l| x[l] * y[l + k]).sum::<f64>() / n as f64
}

/// Mean and standard error of per-path statistics.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn within(v: &[f64], truth: f64, k: f64) -> bool {
    let (m, se) = mean_se(v);
    (m - truth).abs() <= k * se
}

const N: usize = 1 << 14;

#[test]
fn univariate_variance_matches_kernel() {
    let p = ModelParams::univariate(N as f64, 0.02, 0.05);
    let (paths, diag) = simulate_field(&p, N, 1.0, 1, 200).unwrap();
    assert_eq!(diag.clipped_mass, 0.0);
    assert_eq!(diag.flag, EmbeddingFlag::Exact);
    let v: Vec<f64> = paths.iter().map(|f| lag_product(&f.data[0], &f.data[0], 0)).collect();
    let truth: f64 = 0.05 / (2.0 * 0.02 * 0.96);
    assert!((truth - 1.302_083_333_333_333).abs() < 1e-12);
    assert!(within(&v, truth, 3.0), "{:?} vs {truth}", mean_se(&v));
}

#[test]
fn bivariate_lag_zero_cross_covariance() {
    let p = ModelParams::bivariate(N as f64, 0.02, 0.05, 0.15, 0.5);
    let (paths, _) = simulate_field(&p, N, 1.0, 2, 200).unwrap();
    let pair = p.pair(0, 1).unwrap();
    let truth = msfbm_cross_cov(0.0, &pair).unwrap();
    let v: Vec<f64> = paths.iter().map(|f| lag_product(&f.data[0], &f.data[1], 0)).collect();
    assert!(within(&v, truth, 3.0), "{:?} vs {truth}", mean_se(&v));
}

#[test]
fn decoupled_marginals_are_uncorrelated() {
    let p = ModelParams::bivariate(4096.0, 0.1, 0.05, 0.2, 0.0);
    let (paths, _) = simulate_field(&p, 4096, 1.0, 3, 200).unwrap();
    let v: Vec<f64> = paths
        .iter()
        .map(|f| {
            let (x, y) = (&f.data[0], &f.data[1]);
            lag_product(x, y, 0) / (lag_product(x, x, 0) * lag_product(y, y, 0)).sqrt()
        })
        .collect();
    assert!(within(&v, 0.0, 3.0), "{:?}", mean_se(&v));
}

#[test]
fn paths_are_reproducible_and_addressable() {
    let p = ModelParams::bivariate(512.0, 0.05, 0.05, 0.15, -0.5);
    let (a, _) = simulate_field(&p, 256, 1.0, 99, 5).unwrap();
    let (b, _) = simulate_field(&p, 256, 1.0, 99, 5).unwrap();
    assert_eq!(a, b);
    let s = field_sampler(&p, 256, 1.0).unwrap();
    for (k, panel) in a.iter().enumerate() {
        assert_eq!(s.sample(99, k as u64), panel.data);
    }
    let (c, _) = simulate_field(&p, 256, 1.0, 100, 5).unwrap();
    assert_ne!(a[0].data, c[0].data);
}

#[test]
fn field_is_stationary_around_zero() {
    let p = ModelParams::bivariate(1024.0, 0.1, 0.05, 0.2, 0.7);
    let (paths, _) = simulate_field(&p, 1024, 1.0, 5, 200).unwrap();
    for i in 0..2 {
        let m: Vec<f64> = paths.iter().map(|f| f.data[i].iter().sum::<f64>() / 1024.0).collect();
        assert!(within(&m, 0.0, 4.0), "marginal {i}: {:?}", mean_se(&m));
        // First and second halves have the same variance.
        let half = |r: std::ops::Range<usize>| -> Vec<f64> {
            paths.iter().map(|f| f.data[i][r.clone()].iter().map(|x| x * x).sum::<f64>() / 512.0).collect()
        };
        let (a, b) = (half(0..512), half(512..1024));
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(within(&diff, 0.0, 4.0));
    }
}

#[test]
fn univariate_embeddings_are_exact() {
    for h in [0.02, 0.1, 0.25, 0.45] {
        for (n, t) in [(1024usize, 1024.0), (1024, 4096.0), (4096, 4096.0)] {
            let s = field_sampler(&ModelParams::univariate(t, h, 0.05), n, 1.0).unwrap();
            assert_eq!(s.diagnostics().clipped_mass, 0.0, "H={h} N={n} T={t}");
            assert_eq!(s.diagnostics().negative_frequencies, 0);
        }
    }
}

#[test]
fn embedding_rejects_indefinite_sequences() {
    // c(0) = c(1) = 1 has spectrum 1 + 2 cos(w), negative near pi.
    let e = CirculantSampler::new(1, 64, |_, _, k| if k <= 1 { 1.0 } else { 0.0 }).unwrap_err();
    assert!(matches!(e, Error::Embedding { .. }), "{e}");
    assert_eq!(embedding_size(1000), 2048);
    assert_eq!(embedding_size(1024), 2048);
}

#[test]
fn diagnostics_report_small_clipping() {
    // A tiny negative dip is clipped but accepted.
    let s = CirculantSampler::new(1, 64, |_, _, k| match k {
        0 => 1.0,
        1 => 0.5 + 1e-9,
        _ => 0.0,
    })
    .unwrap();
    let d = s.diagnostics();
    assert!(d.clipped_mass > 0.0 && d.clipped_mass <= EXACT_CLIP_TOL);
    assert_eq!(d.flag, EmbeddingFlag::ExactWithinTolerance);
    assert!(d.min_eigenvalue < 0.0);
    assert_eq!(d.per_frequency_min.len(), d.m / 2 + 1);
}

#[test]
fn inadmissible_or_singular_params_are_refused() {
    let mut p = ModelParams::bivariate(1024.0, 0.1, 0.05, 0.05, 0.5);
    assert!(matches!(simulate_field(&p, 64, 1.0, 0, 1), Err(Error::Inadmissible(_))));
    p = ModelParams::bivariate(1024.0, 0.1, 0.05, 0.2, 1.0);
    assert!(matches!(simulate_field(&p, 64, 1.0, 0, 1), Err(Error::Inadmissible(_))));
}

#[test]
fn permuting_marginals_commutes_in_law() {
    let p = ModelParams::new(
        2048.0,
        vec![vec![0.05, 0.1, 0.2], vec![0.1, 0.1, 0.15], vec![0.2, 0.15, 0.2]],
        vec![vec![0.05, 0.02, -0.01], vec![0.02, 0.04, 0.01], vec![-0.01, 0.01, 0.06]],
    )
    .unwrap();
    let perm = [2, 0, 1];
    let q = p.permuted(&perm).unwrap();
    let (sp, sq) = (field_sampler(&p, 1024, 1.0).unwrap(), field_sampler(&q, 1024, 1.0).unwrap());
    let (dp, dq) = (sp.diagnostics(), sq.diagnostics());
    assert!((dp.min_eigenvalue - dq.min_eigenvalue).abs() <= 1e-12 * dp.min_eigenvalue.abs().max(1e-300));
    let a = sp.sample_many(1, 300);
    let b = sq.sample_many(2, 300);
    for i in 0..3 {
        for j in 0..3 {
            let x: Vec<f64> = a.iter().map(|f| lag_product(&f[perm[i]], &f[perm[j]], 1)).collect();
            let y: Vec<f64> = b.iter().map(|f| lag_product(&f[i], &f[j], 1)).collect();
            let ((mx, sx), (my, sy)) = (mean_se(&x), mean_se(&y));
            assert!((mx - my).abs() <= 4.0 * (sx * sx + sy * sy).sqrt(), "({i},{j}): {mx} vs {my}");
        }
    }
}

#[test]
fn multifractal_marginal_uses_log_kernel() {
    let p = ModelParams::bivariate(4096.0, 0.0, 0.05, 0.1, 0.5);
    let (paths, _) = simulate_field(&p, 4096, 1.0, 8, 200).unwrap();
    let truth = log_kernel_cov(0.0, 1.0, 0.05, 4096.0).unwrap();
    assert!((truth - 0.05 * (1.0 - (1.0f64 / 4096.0).ln())).abs() < 1e-12);
    let v: Vec<f64> = paths.iter().map(|f| lag_product(&f.data[0], &f.data[0], 0)).collect();
    assert!(within(&v, truth, 3.0), "{:?} vs {truth}", mean_se(&v));
    assert!((marginal_mean(&p, 0, 1.0).unwrap() + truth / 2.0).abs() < 1e-15);
    let m: Vec<f64> = paths
        .iter()
        .map(|f| {
            let lm = field_to_measure(f, &p, 16).unwrap();
            lm.data[0].iter().map(|x| x.exp()).sum::<f64>() / lm.n as f64
        })
        .collect();
    assert!(within(&m, 1.0, 3.0), "{:?}", mean_se(&m));
}

#[test]
fn measure_of_flat_field_is_flat() {
    let p = ModelParams::univariate(64.0, 0.1, 1e-300);
    let f = FieldPanel::new(vec![vec![0.0; 64]], 1.0, 0, Provenance::GaussianField).unwrap();
    let m = field_to_measure(&f, &p, 8).unwrap();
    assert_eq!((m.n, m.delta, m.provenance), (8, 8.0, Provenance::LogvolMeasure));
    assert!(m.data[0].iter().all(|&v| v == 0.0));
}

#[test]
fn measure_degenerates_with_vanishing_intermittency() {
    let p = ModelParams::univariate(4096.0, 0.1, 1e-10);
    let (paths, _) = simulate_field(&p, 4096, 1.0, 4, 2).unwrap();
    let m = field_to_measure(&paths[0], &p, 16).unwrap();
    assert!(m.data[0].iter().all(|v| v.abs() < 1e-3));
}

#[test]
fn unit_aggregation_is_the_shifted_field() {
    let p = ModelParams::univariate(1024.0, 0.1, 0.05);
    let (paths, _) = simulate_field(&p, 1024, 1.0, 4, 1).unwrap();
    let mu = marginal_mean(&p, 0, 1.0).unwrap();
    let m = field_to_measure(&paths[0], &p, 1).unwrap();
    for (a, b) in m.data[0].iter().zip(&paths[0].data[0]) {
        assert!((a - (b + mu)).abs() < 1e-12);
    }
    let g = field_to_gaussian_proxy(&paths[0], &p, 1).unwrap();
    assert_eq!(g.data, paths[0].data);
}

#[test]
fn normalized_measure_has_unit_mean() {
    let p = ModelParams::bivariate(N as f64, 0.02, 0.05, 0.15, 0.5);
    let (paths, _) = simulate_field(&p, N, 1.0, 6, 100).unwrap();
    for i in 0..2 {
        let v: Vec<f64> = paths
            .iter()
            .map(|f| {
                let m = field_to_measure(f, &p, 16).unwrap();
                assert_eq!(m.n, 1024);
                m.data[i].iter().map(|x| x.exp()).sum::<f64>() / m.n as f64
            })
            .collect();
        assert!(within(&v, 1.0, 3.0), "marginal {i}: {:?}", mean_se(&v));
    }
}

#[test]
fn measure_guards_and_checks() {
    let p = ModelParams::univariate(64.0, 0.1, 0.05);
    let mut row = vec![0.0; 8];
    row[5] = 800.0;
    let f = FieldPanel::new(vec![row], 1.0, 0, Provenance::GaussianField).unwrap();
    assert!(matches!(field_to_measure(&f, &p, 2), Err(Error::Overflow(_))));
    let f = FieldPanel::new(vec![vec![0.0; 8]], 1.0, 0, Provenance::GaussianField).unwrap();
    assert!(field_to_measure(&f, &p, 3).is_err());
    assert!(field_to_measure(&f, &p, 8).is_err());
    let g = FieldPanel::new(vec![vec![0.0; 8]], 1.0, 0, Provenance::Market).unwrap();
    assert!(field_to_measure(&g, &p, 2).is_err());
    assert!(field_to_gaussian_proxy(&g, &p, 2).is_err());
    assert!(FieldPanel::new(vec![vec![f64::NAN, 0.0]], 1.0, 0, Provenance::Market).is_err());
    assert!(FieldPanel::new(vec![vec![0.0]], 1.0, 0, Provenance::Market).is_err());
}

#[test]
fn exact_block_proxy_matches_integrated_kernel() {
    let p = ModelParams::bivariate(N as f64, 0.02, 0.05, 0.15, 0.5);
    let (paths, diag) = simulate_gaussian_proxy(&p, 1024, 1.0, 16, 9, 200).unwrap();
    assert_eq!(diag.clipped_mass, 0.0);
    assert_eq!(paths[0].provenance, Provenance::GaussianAverageProxy);
    let dl = 16.0;
    let mut outside = 0;
    let mut total = 0;
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let pair = p.pair(i, j).unwrap();
        for k in 0..=64usize {
            let truth = pair.lambda_prod()
                * integrated_cov(&KernelArgs { tau: k as f64 * dl, delta: dl, pair }).unwrap()
                / (dl * dl);
            let v: Vec<f64> = paths.iter().map(|f| lag_product(&f.data[i], &f.data[j], k)).collect();
            total += 1;
            if !within(&v, truth, 3.0) {
                outside += 1;
            }
        }
    }
    // About 0.3% of a 3 SE band falls outside by chance.
    assert!(outside * 50 <= total, "{outside} of {total} lags outside 3 SE");
}

#[test]
fn discrete_block_proxy_matches_double_sum() {
    let p = ModelParams::bivariate(4096.0, 0.05, 0.05, 0.15, -0.5);
    let agg = 4;
    let (paths, _) = simulate_field(&p, 4096, 1.0, 10, 200).unwrap();
    let proxies: Vec<FieldPanel> = paths.iter().map(|f| field_to_gaussian_proxy(f, &p, agg).unwrap()).collect();
    let pair = p.pair(0, 1).unwrap();
    let c = |m: i64| msfbm_cross_cov(m as f64, &pair).unwrap();
    for k in 0..8i64 {
        let mut truth = 0.0;
        for a in 0..agg as i64 {
            for b in 0..agg as i64 {
                truth += c(k * agg as i64 + b - a);
            }
        }
        truth /= (agg * agg) as f64;
        let v: Vec<f64> = proxies.iter().map(|f| lag_product(&f.data[0], &f.data[1], k as usize)).collect();
        assert!(within(&v, truth, 3.5), "lag {k}: {:?} vs {truth}", mean_se(&v));
    }
}

#[test]
fn prices_under_vanishing_measure_stay_put() {
    let m = FieldPanel::new(vec![vec![-800.0; 16]; 2], 1.0, 0, Provenance::LogvolMeasure).unwrap();
    let pr = simulate_prices(&m, &[1.5, -2.0], 3).unwrap();
    assert!(pr.data[0].iter().all(|&x| x == 1.5));
    assert!(pr.data[1].iter().all(|&x| x == -2.0));
    assert_eq!(pr.data[0].len(), 17);
}

#[test]
fn brownian_case_has_unit_rate() {
    let m = FieldPanel::new(vec![vec![0.0; 100_000]], 0.25, 0, Provenance::LogvolMeasure).unwrap();
    let pr = simulate_prices(&m, &[10.0], 42).unwrap();
    assert_eq!(pr.data[0][0], 10.0);
    let sq: Vec<f64> = pr.data[0].windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    assert!(within(&sq, 0.25, 3.0), "{:?}", mean_se(&sq));
    assert_eq!(simulate_prices(&m, &[10.0], 42).unwrap(), pr);
}

#[test]
fn prices_check_inputs() {
    let f = FieldPanel::new(vec![vec![0.0; 4]], 1.0, 0, Provenance::GaussianField).unwrap();
    assert!(simulate_prices(&f, &[0.0], 1).is_err());
    let m = FieldPanel::new(vec![vec![0.0; 4]], 1.0, 0, Provenance::LogvolMeasure).unwrap();
    assert!(simulate_prices(&m, &[0.0, 1.0], 1).is_err());
    let p = ModelParams::univariate(64.0, 0.1, 0.05);
    assert!(simulate_prices_fine(&m, &p, &[0.0], 1).is_err());
}

#[test]
fn realized_variance_converges_to_the_measure() {
    let p = ModelParams::univariate(N as f64, 0.1, 0.05);
    let (paths, _) = simulate_field(&p, N, 1.0, 11, 1).unwrap();
    let prices = simulate_prices_fine(&paths[0], &p, &[0.0], 12).unwrap();
    let mut errs = Vec::new();
    for agg in [4, 16, 64] {
        let rv = realized_log_variance(&prices, agg).unwrap();
        let lm = field_to_measure(&paths[0], &p, agg).unwrap();
        let mse = rv[0].iter().zip(&lm.data[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / rv[0].len() as f64;
        errs.push(mse);
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    // Chi-square log error has variance close to 2 / agg.
    assert!((errs[2] * 64.0 / 2.0 - 1.0).abs() < 0.3, "{errs:?}");
    assert!(realized_log_variance(&prices, 3).is_err());
}

#[test]
fn panel_text_and_binary_round_trip() {
    let p = ModelParams::bivariate(512.0, 0.05, 0.05, 0.15, 0.5);
    let (paths, _) = simulate_field(&p, 128, 0.5, 21, 1).unwrap();
    let f = &paths[0];

    let mut csv = Vec::new();
    f.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with('#') && first.contains("delta=") && first.contains("provenance=gaussian-field"));
    assert!(text.lines().nth(1).unwrap().starts_with("t,x1,x2"));
    assert_eq!(&FieldPanel::read_csv(csv.as_slice()).unwrap(), f);

    let mut bin = Vec::new();
    f.write_binary(&mut bin).unwrap();
    assert_eq!(&bin[..5], PANEL_MAGIC);
    assert_eq!(&FieldPanel::read_binary(bin.as_slice()).unwrap(), f);
    // Values are little-endian f64, row-major, at the end of the file.
    let tail = &bin[bin.len() - 8..];
    assert_eq!(f64::from_le_bytes(tail.try_into().unwrap()), f.data[1][127]);

    bin[0] = b'X';
    assert!(FieldPanel::read_binary(bin.as_slice()).is_err());
    assert!(FieldPanel::read_binary(&bin[..3]).is_err());
}

#[test]
fn price_panel_csv_has_a_row_per_time() {
    let m = FieldPanel::new(vec![vec![0.0; 4]; 2], 1.0, 0, Provenance::LogvolMeasure).unwrap();
    let pr = simulate_prices(&m, &[1.0, 2.0], 1).unwrap();
    let mut buf = Vec::new();
    pr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2 + 5);
}

#[test]
fn provenance_names_round_trip() {
    for p in [
        Provenance::GaussianField,
        Provenance::LogvolMeasure,
        Provenance::GaussianAverageProxy,
        Provenance::Market,
    ] {
        assert_eq!(Provenance::parse(p.as_str()).unwrap(), p);
    }
    assert!(Provenance::parse("other").is_err());
    let _ = PairParams::diagonal(0.1, 0.05, 1.0);
}
