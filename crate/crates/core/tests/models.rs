use std::f64::consts::PI;

use segpc::models::burgers::NOMINAL_COEFFICIENTS;
use segpc::postproc::{higher_moments, HigherMomentScheme, Method};
use segpc::quadrature::{monte_carlo, quadrature_fit, McOptions};
use segpc::{
    fit_model, smolyak_rule, BurgersSolver, ChaosBasis, FitOptions, FnModel, IshigamiModel, Model, OdeModel,
    StochasticSpace,
};

fn fd_check(model: &dyn Model, xi: &[f64]) -> f64 {
    let eval = model.evaluate(xi, true).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..xi.len() {
        let mut plus = xi.to_vec();
        let mut minus = xi.to_vec();
        plus[k] += h;
        minus[k] -= h;
        let fd = (model.evaluate(&plus, false).unwrap().value - model.evaluate(&minus, false).unwrap().value) / (2.0 * h);
        worst = worst.max((eval.gradient[k] - fd).abs() / eval.gradient[k].abs().max(1.0));
    }
    worst
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let ode = OdeModel::new(1.7).unwrap();
    let ish = IshigamiModel::new(7.0, 0.1).unwrap();
    for xi in [-0.9, -0.3, 0.0, 0.4, 0.95] {
        assert!(fd_check(&ode, &[xi]) < 1e-7);
        assert!(fd_check(&ish, &[xi, -xi / 2.0, 0.7 * xi]) < 1e-7);
    }
}

#[test]
fn model_reference_values() {
    let ode = OdeModel::new(1.0).unwrap();
    // k = 0.5 is ξ = 0
    let e = ode.evaluate(&[0.0], true).unwrap();
    assert!((e.value - (-0.5f64).exp()).abs() < 1e-15);
    assert!((e.gradient[0] + 0.5 * (-0.5f64).exp()).abs() < 1e-15);
    assert_eq!(e.cost_units, 2);
    assert!((OdeModel::exact_mean(2.0) - 0.43233).abs() < 1e-5);
    let ish = IshigamiModel::new(7.0, 0.1).unwrap();
    assert!((ish.value(&[PI / 2.0, PI / 2.0, 0.0]).unwrap() - 8.0).abs() < 1e-14);
    let (v, g) = ish.value_and_gradient(&[0.0; 3]).unwrap();
    assert_eq!(v, 0.0);
    assert_eq!(g, vec![1.0, 0.0, 0.0]);
}

#[test]
fn ode_mean_from_seven_points_and_smolyak() {
    let model = OdeModel::new(1.0).unwrap();
    let exact = OdeModel::exact_mean(1.0);
    let opts = FitOptions { method: Method::Wlsq, order: 6, pool: 10_000, oversample: 1.0, seed: 5 };
    let fit = fit_model(&model, &opts).unwrap().surrogate;
    assert_eq!(fit.fit_report.evaluations, 7);
    assert!((fit.mean() - exact).abs() < 1e-4);
    let basis = ChaosBasis::for_space(model.space(), 6).unwrap();
    let rule = smolyak_rule(&model.space().families(), 4).unwrap();
    let proj = quadrature_fit(&basis, &rule, &model).unwrap();
    assert!((proj.mean() - exact).abs() < 1e-4);
}

#[test]
fn segpc_linear_and_minimal_cost() {
    let space = StochasticSpace::standard_gaussian(2).unwrap();
    let model = FnModel::new("linear", space, |x| 2.0 * x[0] - x[1]).with_gradient(|_| vec![2.0, -1.0]);
    let opts = FitOptions { method: Method::Segpc, order: 1, pool: 500, oversample: 1.0, seed: 9 };
    let fit = fit_model(&model, &opts).unwrap().surrogate;
    for (c, want) in fit.coefficients.iter().zip([0.0, 2.0, -1.0]) {
        assert!((c - want).abs() < 1e-12, "{:?}", fit.coefficients);
    }
    for m in 1..6 {
        let space = StochasticSpace::standard_uniform(m).unwrap();
        let model = FnModel::new("sum", space, |x| x.iter().sum())
            .with_gradient(|x| vec![1.0; x.len()]);
        let fit = fit_model(&model, &opts).unwrap().surrogate;
        assert_eq!((fit.fit_report.n_points, fit.fit_report.evaluations), (1, 2));
    }
}

#[test]
fn monte_carlo_reference_cases() {
    let gauss = StochasticSpace::standard_gaussian(1).unwrap();
    let opts = McOptions { n: 1_000_000, seed: 11, antithetic: false, keep_trace: false };
    let e = monte_carlo(&gauss, opts, |x| Ok(x[0])).unwrap();
    assert!(e.mean.abs() < 0.005 && (e.std - 1.0).abs() < 0.005 && (e.kurtosis.unwrap() - 3.0).abs() < 0.05);

    let c = monte_carlo(&gauss, McOptions { n: 1000, ..opts }, |_| Ok(5.0)).unwrap();
    assert_eq!((c.mean, c.std, c.skewness, c.kurtosis), (5.0, 0.0, None, None));

    let ish = IshigamiModel::new(7.0, 0.1).unwrap();
    let e = segpc::monte_carlo_moments(&ish, 1_000_000, 2, false).unwrap();
    assert!((e.mean - 3.5).abs() < 0.02 && (e.std - 3.7208).abs() < 0.02, "{e:?}");
}

#[test]
fn monte_carlo_error_decays_at_half_rate() {
    let gauss = StochasticSpace::standard_gaussian(1).unwrap();
    // mean absolute error of E[ξ²] = 1 over 40 seeds at each n
    let err = |n: usize| {
        (0..40u64)
            .map(|seed| {
                let opts = McOptions { n, seed, antithetic: false, keep_trace: false };
                (monte_carlo(&gauss, opts, |x| Ok(x[0] * x[0])).unwrap().mean - 1.0).abs()
            })
            .sum::<f64>()
            / 40.0
    };
    let (e3, e5) = (err(1_000), err(100_000));
    let slope = (e5 / e3).log10() / 2.0;
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
}

#[test]
fn ishigami_order_ten_moments() {
    let model = IshigamiModel::new(7.0, 0.1).unwrap();
    let opts = FitOptions { method: Method::Wlsq, order: 10, pool: 10_000, oversample: 1.0, seed: 1 };
    let fit = fit_model(&model, &opts).unwrap().surrogate;
    let r = higher_moments(&fit, model.space(), HigherMomentScheme::TensorGauss, Method::Wlsq).unwrap();
    assert!((r.mean - 3.5).abs() < 0.02 && (r.std - 3.7208).abs() < 0.05, "{r:?}");
    assert!(r.skewness.unwrap().abs() < 0.05 && (r.kurtosis.unwrap() - 3.5072).abs() < 0.1, "{r:?}");
}

#[test]
fn burgers_nominal_converges_quadratically() {
    let st = BurgersSolver::new(31, 250.0).unwrap().solve(&NOMINAL_COEFFICIENTS).unwrap();
    assert!(st.residual_norm <= 1e-10 && st.residual_inf_norm() <= 1e-10);
    let h = &st.residual_history;
    let tail = h[h.len() - 1] / h[h.len() - 2];
    assert!(tail < 0.1, "history {h:?}");
    assert!(st.qoi() > 0.0);
    // walls at rest and closed inlet corners
    let n = st.grid;
    for i in 0..n {
        for j in [0, n - 1] {
            assert_eq!((st.u[i * n + j], st.v[i * n + j]), (0.0, 0.0));
        }
    }
    assert_eq!(st.s[0], 0.0);
    assert!((st.s.iter().sum::<f64>()).abs() < 1e-15);
}

#[test]
fn burgers_qoi_matches_refined_exit_quadrature() {
    let st = BurgersSolver::new(31, 250.0).unwrap().solve(&NOMINAL_COEFFICIENTS).unwrap();
    let n = st.grid;
    let exit: Vec<f64> = (0..n)
        .map(|j| {
            let p = (n - 1) * n + j;
            0.5 * (st.u[p] * st.u[p] + st.v[p] * st.v[p])
        })
        .collect();
    // trapezoid on a 10x finer grid over the piecewise-linear exit integrand
    let fine = 10 * (n - 1);
    let hf = 1.0 / fine as f64;
    let at = |k: usize| {
        let (cell, r) = (k / 10, (k % 10) as f64 / 10.0);
        if cell == n - 1 { exit[n - 1] } else { (1.0 - r) * exit[cell] + r * exit[cell + 1] }
    };
    let refined = hf * ((1..fine).map(at).sum::<f64>() + 0.5 * (at(0) + at(fine)));
    assert!((refined - st.qoi()).abs() <= 1e-6 * st.qoi());
}

#[test]
fn burgers_discrete_gradient_matches_finite_differences() {
    let solver = BurgersSolver::new(15, 250.0).unwrap();
    let base = &NOMINAL_COEFFICIENTS[..4];
    let grad = solver.solve(base).unwrap().discrete_gradient().unwrap();
    for k in 0..base.len() {
        let step = 1e-4 * base[k].abs();
        let mut plus = base.to_vec();
        let mut minus = base.to_vec();
        plus[k] += step;
        minus[k] -= step;
        let fd = (solver.solve(&plus).unwrap().qoi() - solver.solve(&minus).unwrap().qoi()) / (2.0 * step);
        assert!((grad[k] - fd).abs() <= 1e-5 * fd.abs(), "k={k}: {} vs {fd}", grad[k]);
    }
}

#[test]
fn burgers_continuous_adjoint_tracks_discrete_gradient() {
    let st = BurgersSolver::new(31, 250.0).unwrap().solve(&NOMINAL_COEFFICIENTS).unwrap();
    let adj = st.adjoint().unwrap().gradient;
    let disc = st.discrete_gradient().unwrap();
    for (a, d) in adj.iter().zip(&disc) {
        assert!((a - d).abs() < 0.02 * d.abs(), "{a} vs {d}");
    }
}

#[test]
fn burgers_qoi_converges_at_second_order() {
    let q = |n: usize| BurgersSolver::new(n, 250.0).unwrap().solve(&NOMINAL_COEFFICIENTS).unwrap().qoi();
    let (q21, q41, q81) = (q(21), q(41), q(81));
    let order = ((q21 - q41) / (q41 - q81)).abs().log2();
    assert!((order - 2.0).abs() <= 0.3, "observed order {order}: {q21} {q41} {q81}");
}
