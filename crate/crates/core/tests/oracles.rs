mod common;

use common::*;
use hqlab::exterior::{build_index_table, derivation_jacobian, derivation_matrix, lambda_of};
use hqlab::lab::{
    check_hypotheses, first_coordinate_ratio, sample_admissible, Constraint, SampleSpec,
};
use hqlab::operator::Workspace;
use hqlab::symmetric::{partial_sigma, quotient_root, sigma, Spectrum};
use hqlab::{HqOperator, OperatorConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn config_strategy() -> impl Strategy<Value = OperatorConfig> {
    let all = all_configs(&[3, 4, 5], 10);
    (0..all.len()).prop_map(move |i| all[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_matches_subset_enumeration(v in prop::collection::vec(-2.0..2.0_f64, 1..10), m in -1i64..11) {
        let a = sigma(m, &v);
        let b = brute_sigma(m, &v);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn sigma_derivative_is_partial_sigma(v in prop::collection::vec(-2.0..2.0_f64, 2..8), m in 1i64..8, seed in any::<u64>()) {
        let i = (seed as usize) % v.len();
        let h = 1e-6 * (1.0 + v[i].abs());
        let mut up = v.clone();
        up[i] += h;
        let mut down = v.clone();
        down[i] -= h;
        let fd = (brute_sigma(m, &up) - brute_sigma(m, &down)) / (2.0 * h);
        let exact = partial_sigma(m - 1, &Spectrum::new(v.clone()).unwrap(), &[i]).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{fd} vs {exact}");
    }

    #[test]
    fn w_spectrum_is_lambda_of_eigenvalues(n in 2usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = r.random_range(1..n);
        let a = random_symmetric(n, &mut r);
        let table = build_index_table(p, n).unwrap();
        let w = derivation_matrix(&a, &table).unwrap().into_matrix();
        prop_assert!((&w - w.transpose()).amax() == 0.0);
        let expected = sorted(brute_lambda(&eigenvalues(&a), p));
        prop_assert!(max_abs_diff(&eigenvalues(&w), &expected) <= 1e-8);
    }

    #[test]
    fn w_is_linear_and_rotation_equivariant(n in 3usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = r.random_range(1..n);
        let table = build_index_table(p, n).unwrap();
        let a = random_symmetric(n, &mut r);
        let b = random_symmetric(n, &mut r);
        let (al, be) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let w = |m: &DMatrix<f64>| derivation_matrix(m, &table).unwrap().into_matrix();
        let lin = w(&(&a * al + &b * be)) - (w(&a) * al + w(&b) * be);
        prop_assert!(lin.amax() <= 1e-14 * 8.0);
        let q = random_orthogonal(n, &mut r);
        let rotated = q.transpose() * &a * &q;
        prop_assert!(max_abs_diff(&eigenvalues(&w(&rotated)), &eigenvalues(&w(&a))) <= 1e-8);
    }

    #[test]
    fn jacobian_matches_finite_differences(n in 3usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = r.random_range(1..n);
        let table = build_index_table(p, n).unwrap();
        let jac = derivation_jacobian(&table);
        let a = random_symmetric(n, &mut r);
        let h = 1e-3;
        for i in 0..n {
            for j in i..n {
                let e = unit(n, i, j);
                let fd = (derivation_matrix(&(&a + &e * h), &table).unwrap().into_matrix()
                    - derivation_matrix(&(&a - &e * h), &table).unwrap().into_matrix())
                    / (2.0 * h);
                for row in 0..table.len() {
                    for col in 0..table.len() {
                        let exact = if i == j {
                            f64::from(jac.coefficient(row, col, i, i))
                        } else {
                            f64::from(jac.coefficient(row, col, i, j) + jac.coefficient(row, col, j, i))
                        };
                        prop_assert!((fd[(row, col)] - exact).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn sigma_of_w_derivative_at_diagonal(n in 3usize..6, m in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = r.random_range(1..n);
        let table = build_index_table(p, n).unwrap();
        let diag: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let a = with_spectrum(&DMatrix::identity(n, n), &diag);
        let sig_w = |x: &DMatrix<f64>| brute_sigma(m as i64, &eigenvalues(&derivation_matrix(x, &table).unwrap().into_matrix()));
        let big = lambda_of(&Spectrum::new(diag.clone()).unwrap(), &table).unwrap().into_inner();
        let h = 1e-5;
        for i in 0..n {
            let e = unit(n, i, i);
            let fd = (sig_w(&(&a + &e * h)) - sig_w(&(&a - &e * h))) / (2.0 * h);
            let exact: f64 = table
                .entries()
                .iter()
                .enumerate()
                .filter(|(_, idx)| idx.contains(i))
                .map(|(s, _)| {
                    let rest: Vec<f64> = big.iter().enumerate().filter(|&(t, _)| t != s).map(|(_, &x)| x).collect();
                    brute_sigma(m as i64 - 1, &rest)
                })
                .sum();
            prop_assert!((fd - exact).abs() <= 1e-7 * (1.0 + exact.abs()), "{fd} vs {exact}");
            for j in i + 1..n {
                let e = unit(n, i, j);
                let fd = (sig_w(&(&a + &e * h)) - sig_w(&(&a - &e * h))) / (2.0 * h);
                prop_assert!(fd.abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn evaluate_matches_oracle_and_is_rotation_invariant(cfg in config_strategy(), seed in any::<u64>()) {
        let op = HqOperator::new(cfg).unwrap();
        let mut r = rng(seed);
        let a = interior_matrix(&op, &mut r);
        let pt = op.evaluate(&a).unwrap();
        let f = oracle_f_matrix(&cfg, &a);
        prop_assert!((pt.f_value - f).abs() <= 1e-9 * f);
        let ft = f.powf(1.0 / (cfg.k - cfg.l) as f64);
        prop_assert!((pt.ftilde_value - ft).abs() <= 1e-9 * ft);
        prop_assert!((pt.eigen.reconstruct() - &a).amax() <= 1e-9 * (1.0 + a.norm()));
        let q = random_orthogonal(cfg.n, &mut r);
        let rot = op.evaluate(&(q.transpose() * &a * &q)).unwrap();
        prop_assert!((rot.f_value - pt.f_value).abs() <= 1e-9 * pt.f_value);
        // moving along the identity stays admissible
        for t in [0.25, 0.5, 1.0] {
            prop_assert!(op.admissible(&(&a + DMatrix::identity(cfg.n, cfg.n) * t)).unwrap().admissible);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(cfg in config_strategy(), seed in any::<u64>()) {
        let op = HqOperator::new(cfg).unwrap();
        let mut r = rng(seed);
        let a = interior_matrix(&op, &mut r);
        let g = op.gradient(&a).unwrap();
        let fd_f = fd_gradient(&a, |m| oracle_f_matrix(&cfg, m));
        let fd_t = fd_gradient(&a, |m| oracle_ftilde_matrix(&cfg, m));
        prop_assert!(rel_err(&g.f, &fd_f) <= 1e-6, "{}", rel_err(&g.f, &fd_f));
        prop_assert!(rel_err(&g.ftilde, &fd_t) <= 1e-6, "{}", rel_err(&g.ftilde, &fd_t));
        // Euler identities for the (k-l)- and 1-homogeneous forms
        let pt = op.evaluate(&a).unwrap();
        let euler_f = g.f.component_mul(&a).sum();
        let euler_t = g.ftilde.component_mul(&a).sum();
        prop_assert!((euler_f - cfg.order() * pt.f_value).abs() <= 1e-8 * cfg.order() * pt.f_value);
        prop_assert!((euler_t - pt.ftilde_value).abs() <= 1e-8 * pt.ftilde_value);
    }

    #[test]
    fn gradient_paths_agree_and_rotate(cfg in config_strategy(), seed in any::<u64>()) {
        let op = HqOperator::new(cfg).unwrap();
        let mut r = rng(seed);
        let a = interior_matrix(&op, &mut r);
        let spectral = op.gradient(&a).unwrap();
        let derivation = op.gradient_via_derivation(&a).unwrap();
        prop_assert!(rel_err(&spectral.f, &derivation.f) <= 1e-8);
        prop_assert!(rel_err(&spectral.ftilde, &derivation.ftilde) <= 1e-8);
        let q = random_orthogonal(cfg.n, &mut r);
        let rotated = op.gradient(&(q.transpose() * &a * &q)).unwrap();
        let expected = q.transpose() * &spectral.f * &q;
        prop_assert!((rotated.f - &expected).amax() <= 1e-8 * expected.amax());
    }

    #[test]
    fn hessian_form_oracles(cfg in config_strategy(), seed in any::<u64>()) {
        let op = HqOperator::new(cfg).unwrap();
        let mut r = rng(seed);
        let a = interior_matrix(&op, &mut r);
        let ft = op.evaluate(&a).unwrap().ftilde_value;
        // radial direction: 1-homogeneity
        let radial = op.hessian_form(&a, &a).unwrap();
        prop_assert!(radial.abs() <= 1e-8 * ft, "{radial}");
        let b = random_symmetric(cfg.n, &mut r);
        let form = op.hessian_form(&a, &b).unwrap();
        prop_assert!(form <= 1e-10, "{form}");
        let h = 1e-4;
        let g = |t: f64| oracle_ftilde_matrix(&cfg, &(&a + &b * t));
        let sd = (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
        // second differences at h = 1e-4 carry rounding of order 1e-8 * Ft
        let floor = 1e-2 * ft;
        prop_assert!((form - sd).abs() <= 1e-4 * form.abs().max(floor), "{form} vs {sd}");
    }

    #[test]
    fn concave_along_segments(cfg in config_strategy(), seed in any::<u64>()) {
        let op = HqOperator::new(cfg).unwrap();
        let mut r = rng(seed);
        let a = interior_matrix(&op, &mut r);
        let b = interior_matrix(&op, &mut r);
        let fa = op.evaluate(&a).unwrap().ftilde_value;
        let fb = op.evaluate(&b).unwrap().ftilde_value;
        for t in [0.25, 0.5, 0.75] {
            let mid = op.evaluate(&(&a * t + &b * (1.0 - t))).unwrap().ftilde_value;
            prop_assert!(mid >= t * fa + (1.0 - t) * fb - 1e-10);
        }
    }

    #[test]
    fn spectral_derivative_structure(cfg in config_strategy(), seed in any::<u64>()) {
        let op = HqOperator::new(cfg).unwrap();
        let mut r = rng(seed);
        let lam = sorted(interior_spectrum(&op, &mut r));
        let sd = op.spectral_first_derivatives(&lam).unwrap();
        // dF/dlambda_i = sum over I containing i of dF/dLambda_I
        let table = op.table();
        for i in 0..cfg.n {
            let s: f64 = table.members(i).iter().map(|&t| sd.d_big_lambda[t]).sum();
            prop_assert!((s - sd.d_lambda[i]).abs() <= 1e-12 * (1.0 + s.abs()));
        }
        prop_assert!(sd.d_lambda.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12) + 1e-15));
        let total: f64 = sd.dt_lambda.iter().sum();
        prop_assert!(total >= cfg.trace_bound() * (1.0 - 1e-12));
        // the quotient root of Lambda agrees with Ft
        let big = Spectrum::new(brute_lambda(&lam, cfg.p)).unwrap();
        let root = quotient_root(cfg.k, cfg.l, &big).unwrap();
        prop_assert!((root - sd.ftilde_value).abs() <= 1e-12 * root);
    }

    #[test]
    fn lemma_ratios_are_scale_invariant(cfg in config_strategy(), seed in 0u64..1000) {
        prop_assume!(cfg.k >= 2);
        let op = HqOperator::new(cfg).unwrap();
        let mut ws = Workspace::default();
        for constraint in [Constraint::FirstNegative, Constraint::Pinched { delta: 0.5, eps: 0.5 }] {
            let spec = SampleSpec::new(cfg, constraint, 50, seed);
            let Ok(samples) = sample_admissible(&spec) else { continue };
            for s in samples {
                let lam = s.values();
                prop_assert!(check_hypotheses(&cfg, constraint, lam).is_ok());
                let doubled: Vec<f64> = lam.iter().map(|x| 2.0 * x).collect();
                let a = first_coordinate_ratio(&op, lam, &mut ws);
                let b = first_coordinate_ratio(&op, &doubled, &mut ws);
                prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn sampler_is_deterministic() {
    let cfg = OperatorConfig::new(4, 2, 3, 1).unwrap();
    let spec = SampleSpec::new(
        cfg,
        Constraint::Pinched {
            delta: 0.1,
            eps: 0.5,
        },
        10_000,
        9,
    );
    let a = sample_admissible(&spec).unwrap();
    let b = sample_admissible(&spec).unwrap();
    assert_eq!(a, b);
    let other = sample_admissible(&SampleSpec { seed: 10, ..spec }).unwrap();
    assert_ne!(a, other);
}

/// With `k = N` the pinched ratio is not bounded below: along
/// `lambda = (a, b, -b + eta)` every hypothesis holds for fixed `delta`, `eps`,
/// yet the ratio decays linearly in `eta`.
#[test]
fn pinched_ratio_vanishes_at_the_cone_boundary_when_k_is_n() {
    let (a, b) = (1.5, 0.4);
    let constraint = Constraint::Pinched {
        delta: 0.1,
        eps: 0.1,
    };
    for l in 0..3 {
        let cfg = OperatorConfig::new(3, 2, 3, l).unwrap();
        let op = HqOperator::new(cfg).unwrap();
        let mut ws = Workspace::default();
        let ratio = |eta: f64, ws: &mut Workspace| {
            let lam = [a, b, -b + eta];
            assert!(check_hypotheses(&cfg, constraint, &lam).is_ok());
            first_coordinate_ratio(&op, &lam, ws)
        };
        let coarse = ratio(1e-6, &mut ws);
        let fine = ratio(1e-12, &mut ws);
        assert!(fine / coarse < 1e-5, "l = {l}: {coarse} -> {fine}");
        if l == 0 {
            // F = sigma_3(Lambda), Lambda = (a + b, a - b + eta, eta)
            let eta = 1e-6;
            let num = eta * (2.0 * a + eta);
            let predicted = num / (2.0 * (num + (a + b) * (a - b + eta)));
            assert!(
                (coarse - predicted).abs() <= 1e-8 * predicted,
                "{coarse} vs {predicted}"
            );
            let bound = hqlab::lab::theoretical_c2(&cfg, 0.1, 0.1).unwrap();
            let below = ratio(1e-9, &mut ws);
            assert!(below < bound, "{below} >= {bound}");
        }
    }
}
