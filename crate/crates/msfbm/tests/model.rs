use msfbm::error::Error;
use msfbm::model::*;
use msfbm_oracle::SplitMix;
use proptest::prelude::*;

fn reference() -> ModelParams {
    ModelParams::new(
        16384.0,
        vec![vec![0.02, 0.15], vec![0.15, 0.02]],
        vec![vec![0.05, 0.025], vec![0.025, 0.05]],
    )
    .unwrap()
}

#[test]
fn reference_pair_is_admissible() {
    assert!(validate(&reference()).unwrap().is_admissible());
    assert!(validate(&ModelParams::univariate(100.0, 0.1, 0.05)).unwrap().is_admissible());
}

#[test]
fn co_hurst_below_mean_is_reported_with_indices() {
    let mut p = reference();
    p.h[0][1] = 0.01;
    p.h[1][0] = 0.01;
    let r = validate(&p).unwrap();
    assert_eq!(r.violations.len(), 1);
    assert!(matches!(r.violations[0], Violation::CoHurstBelowMean { i: 0, j: 1, .. }));
}

#[test]
fn every_violation_is_listed() {
    let p = ModelParams {
        d: 3,
        t: -1.0,
        h: vec![vec![0.1, 0.2, 0.0], vec![0.25, 0.5, 0.3], vec![0.0, 0.3, 0.1]],
        xi: vec![vec![0.05, 0.06, 0.0], vec![0.06, 0.05, 0.0], vec![0.0, 0.0, 0.0]],
    };
    let r = validate(&p).unwrap();
    let has = |f: &dyn Fn(&Violation) -> bool| r.violations.iter().any(f);
    assert!(has(&|v| matches!(v, Violation::NonPositiveT { .. })));
    assert!(has(&|v| matches!(v, Violation::AsymmetricH { i: 0, j: 1 })));
    assert!(has(&|v| matches!(v, Violation::HurstOutOfRange { i: 1, j: 1, .. })));
    assert!(has(&|v| matches!(v, Violation::ZeroOffDiagonalHurst { i: 0, j: 2 })));
    assert!(has(&|v| matches!(v, Violation::NonPositiveIntermittency { i: 2, .. })));
    assert!(has(&|v| matches!(v, Violation::CauchySchwarz { i: 0, j: 1, .. })));
    assert!(has(&|v| matches!(v, Violation::NotPositiveSemidefinite { .. })));
    assert!(r.into_result().is_err());
}

#[test]
fn diagonal_zero_hurst_is_allowed() {
    let p = ModelParams::bivariate(100.0, 0.0, 0.05, 0.1, 0.5);
    assert!(validate(&p).unwrap().is_admissible());
}

#[test]
fn shape_errors_are_not_admissibility_reports() {
    let p = ModelParams { d: 2, t: 1.0, h: vec![vec![0.1]], xi: vec![vec![0.05]] };
    assert!(matches!(validate(&p), Err(Error::Dimension(_))));
    let p = ModelParams { d: 1, t: 1.0, h: vec![vec![f64::NAN]], xi: vec![vec![0.05]] };
    assert!(matches!(validate(&p), Err(Error::Dimension(_))));
    assert!(ModelParams::new(1.0, vec![], vec![]).is_err());
}

#[test]
fn psd_floor_tolerates_rounding() {
    // Singular xi (g = 1) plus a rounding-size perturbation.
    let mut p = ModelParams::bivariate(100.0, 0.1, 0.05, 0.1, 1.0);
    assert!(validate(&p).unwrap().is_admissible());
    p.xi[0][1] += 1e-14;
    p.xi[1][0] += 1e-14;
    let r = validate(&p).unwrap();
    assert!(!r.violations.iter().any(|v| matches!(v, Violation::NotPositiveSemidefinite { .. })));
}

#[test]
fn g_examples() {
    let g = g_from_xi(&reference()).unwrap();
    assert_eq!(g[0][1], 0.5);
    assert_eq!(g[0][0], 1.0);
    let p = ModelParams::new(1.0, vec![vec![0.1, 0.2], vec![0.2, 0.1]], vec![vec![0.05, -0.0495], vec![-0.0495, 0.05]])
        .unwrap();
    assert!((g_from_xi(&p).unwrap()[0][1] + 0.99).abs() < 1e-15);
    let diag = ModelParams::new(1.0, vec![vec![0.1, 0.2], vec![0.2, 0.3]], vec![vec![0.05, 0.0], vec![0.0, 0.02]])
        .unwrap();
    assert_eq!(g_from_xi(&diag).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let zero = ModelParams::univariate(1.0, 0.1, 0.0);
    assert!(g_from_xi(&zero).is_err());
}

#[test]
fn mu_examples() {
    assert!((mu(0.05, 0.02).unwrap() + 0.05 / (4.0 * 0.02 * 0.96)).abs() < 1e-15);
    assert!((mu(0.05, 0.02).unwrap() + 0.651_041_666_666_666_6).abs() < 1e-12);
    assert!((mu(0.06, 0.25).unwrap() + 0.12).abs() < 1e-15);
    assert_eq!(mu(0.0, 0.1).unwrap(), 0.0);
    assert!(mu(0.05, 0.0).is_err());
    assert!(mu(0.05, 0.5).is_err());
    assert!((mu(0.05, 0.1).unwrap() + nu2(0.05, 0.1) / 4.0).abs() < 1e-15);
}

#[test]
fn json_uses_named_keys_and_round_trips() {
    let mut p = reference();
    p.xi[0][1] = 0.1 + 0.2;
    p.xi[1][0] = 0.1 + 0.2;
    p.t = std::f64::consts::PI * 1e5;
    let s = p.to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    for k in ["d", "T", "H", "xi"] {
        assert!(v.get(k).is_some(), "missing key {k}");
    }
    assert_eq!(ModelParams::from_json(&s).unwrap(), p);
    assert!(ModelParams::from_json(r#"{"d":2,"T":1,"H":[[0.1]],"xi":[[0.05]]}"#).is_err());
}

#[test]
fn permutation_of_marginals() {
    let p = ModelParams::new(
        10.0,
        vec![vec![0.1, 0.2, 0.3], vec![0.2, 0.2, 0.25], vec![0.3, 0.25, 0.3]],
        vec![vec![0.05, 0.01, 0.02], vec![0.01, 0.04, 0.0], vec![0.02, 0.0, 0.06]],
    )
    .unwrap();
    let q = p.permuted(&[2, 0, 1]).unwrap();
    assert_eq!(q.h[0][0], 0.3);
    assert_eq!(q.xi[0][1], 0.02);
    assert_eq!(q.h[1][2], 0.2);
    assert!(p.permuted(&[0, 1]).is_err());
}

fn random_admissible(rng: &mut SplitMix, d: usize) -> ModelParams {
    let hd: Vec<f64> = (0..d).map(|_| rng.range(0.0, 0.45)).collect();
    let l2: Vec<f64> = (0..d).map(|_| rng.range(0.01, 0.1)).collect();
    let c = rng.psd(d);
    let g: Matrix = (0..d).map(|i| (0..d).map(|j| c[i][j] / (c[i][i] * c[j][j]).sqrt()).collect()).collect();
    let mut h = vec![vec![0.0; d]; d];
    for i in 0..d {
        h[i][i] = hd[i];
        for j in i + 1..d {
            let m = 0.5 * (hd[i] + hd[j]);
            let v = rng.range(m, 0.499).max(1e-6);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    ModelParams::new(rng.range(10.0, 1e4), h, xi_from_g(&g, &l2)).unwrap()
}

proptest! {
    #[test]
    fn validate_is_deterministic(seed in any::<u64>(), d in 1usize..6) {
        let p = random_admissible(&mut SplitMix(seed), d);
        let a = serde_json::to_string(&validate(&p).unwrap()).unwrap();
        let b = serde_json::to_string(&validate(&p).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn restrictions_of_admissible_params_are_admissible(seed in any::<u64>(), d in 2usize..6) {
        let p = random_admissible(&mut SplitMix(seed), d);
        prop_assert!(validate(&p).unwrap().is_admissible(), "{}", validate(&p).unwrap());
        for i in 0..d {
            for j in 0..d {
                prop_assert!(p.pair(i, j).unwrap().violations().is_empty());
            }
        }
    }

    #[test]
    fn g_and_xi_round_trip(seed in any::<u64>(), d in 1usize..6) {
        let p = random_admissible(&mut SplitMix(seed), d);
        let back = xi_from_g(&g_from_xi(&p).unwrap(), &p.lambda2_diag());
        for i in 0..d {
            for j in 0..d {
                let (a, b) = (p.xi[i][j], back[i][j]);
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
            }
        }
    }
}

#[test]
fn co_hurst_at_the_decimal_mean_is_accepted() {
    let p = ModelParams::new(
        10.0,
        vec![vec![0.1, 0.15], vec![0.15, 0.2]],
        vec![vec![0.05, 0.01], vec![0.01, 0.05]],
    )
    .unwrap();
    assert!(0.15 < 0.5 * (0.1 + 0.2));
    assert!(validate(&p).unwrap().is_admissible());
    assert!(p.pair(0, 1).unwrap().violations().is_empty());
}
