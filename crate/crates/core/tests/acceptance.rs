//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use odflow::design::{build_design_from_response, ModelSpec, ResponseTransform};
use odflow::estimate::{
    aic, fit_ols, fit_sdem, log_jacobian, Coefficient, ConcentratedProfile, FitResult, ModelKind, SdemOptions,
};
use odflow::pipeline::{format_cell, render_table, ModelReport};
use odflow::synth::{gen_instance_stream, mc_study, McSummary};
use odflow::weights::apply_destination_lag;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// (spatial loglik, parameters, AIC linear, AIC spatial, LR statistic) per model
const TABLE: [(f64, usize, f64, f64, f64); 4] = [
    (-6522.50, 8, 15061.43, 13060.99, 2002.43),
    (-4995.63, 23, 13281.94, 10037.26, 3246.69),
    (-4919.98, 27, 13129.65, 9893.96, 3237.69),
    (-4567.91, 56, 9344.82, 9247.83, 98.99),
];

fn aic_fixtures() -> Outcome {
    let cases = [
        (-4995.63, 23, 10037.26, 0.01),
        (-6522.50, 8, 13060.99, 0.02),
        (-4919.98, 27, 9893.96, 0.03),
        (-4567.91, 56, 9247.83, 0.02),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (ll, k, want, tol) in cases {
        let got = aic(ll, k);
        ok &= (got - want).abs() <= tol;
        parts.push(format!("{got:.2}/{want}"));
    }
    check(ok, parts.join(" "))
}

fn fixture_fit(kind: ModelKind, loglik: f64, n_params: usize) -> FitResult {
    FitResult {
        kind,
        labels: vec![],
        coefficients: vec![],
        std_errors: vec![],
        lambda: (kind == ModelKind::Sdem).then_some(0.5),
        lambda_se: (kind == ModelKind::Sdem).then_some(0.05),
        lambda_fixed: false,
        sigma2: 1.0,
        sigma2_se: None,
        loglik,
        n_params,
        aic: aic(loglik, n_params),
        n_obs: 3424,
        n: 107,
        m: 32,
    }
}

fn lr_aic_identity() -> Outcome {
    let mut reports = Vec::new();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, &(ll, params, aic_lin, aic_sp, lr)) in TABLE.iter().enumerate() {
        // linear benchmark: one parameter fewer, loglik implied by its AIC
        let ll_lin = (2.0 * (params - 1) as f64 - aic_lin) / 2.0;
        let report = ModelReport::new(
            format!("Model {}", k + 1),
            ResponseTransform::Log,
            fixture_fit(ModelKind::Linear, ll_lin, params - 1),
            fixture_fit(ModelKind::Sdem, ll, params),
        )
        .map_err(|e| e.to_string())?;
        let identity = aic_lin - aic_sp + 2.0;
        ok &= (report.lr.statistic - lr).abs() <= 0.02 && (identity - lr).abs() <= 0.02;
        parts.push(format!("{:.2}/{lr}", report.lr.statistic));
        reports.push(report);
    }
    let table = render_table(&reports);
    for (k, &(_, _, aic_lin, _, _)) in TABLE.iter().enumerate() {
        ok &= table.cell("AIC (Linear model)", &format!("Model {}", k + 1)) == Some(&format!("{aic_lin:.2}")[..]);
    }
    check(ok, parts.join(" "))
}

fn jacobian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(5..=50);
        let m = rng.random_range(1..=5);
        let extent = rng.random_range(200.0..600.0);
        let w = random_cutoff_weights(&mut rng, n, extent);
        let (lo, hi) = w.lambda_bounds().map_err(|e| e.to_string())?;
        let dense = dense_lag_operator(w.standardized(), m);
        let eye = DMatrix::<f64>::identity(n * m, n * m);
        for k in 0..21 {
            let lambda = lo + (hi - lo) * (k + 1) as f64 / 22.0;
            let fast = log_jacobian(lambda, w.spectrum(), m).map_err(|e| e.to_string())?;
            let slow = dense_log_abs_det(&eye - &dense * lambda);
            worst = worst.max((fast - slow).abs());
        }
    }
    check(worst < 1e-8, format!("max abs error {worst:.2e}"))
}

fn ols_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let pinned = SdemOptions {
        fixed_lambda: Some(0.0),
        ..SdemOptions::default()
    };
    for r in 0..50 {
        let cfg = small_dgp(rng.random_range(10..=40), rng.random_range(3..=10), rng.random_range(-0.5..0.8), r);
        let inst = gen_instance_stream(&cfg, 0).map_err(|e| e.to_string())?;
        let ols = fit_ols(&inst.design).map_err(|e| e.to_string())?;
        let sdem = fit_sdem(&inst.design, &inst.weights, &pinned).map_err(|e| e.to_string())?;
        for (a, b) in sdem.coefficients.iter().zip(&ols.coefficients) {
            worst = worst.max((a - b).abs() / b.abs().max(1e-300));
        }
        worst = worst.max((sdem.loglik - ols.loglik).abs() / ols.loglik.abs());
    }
    check(worst <= 1e-10, format!("max relative gap {worst:.2e}"))
}

fn optimizer_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (t, &lambda) in [-0.4, 0.0, 0.3, 0.5, 0.8].iter().enumerate() {
        for r in 0..4 {
            let cfg = small_dgp(40, 10, lambda, 500 + t as u64);
            let inst = gen_instance_stream(&cfg, r).map_err(|e| e.to_string())?;
            let profile = ConcentratedProfile::new(&inst.design, &inst.weights).map_err(|e| e.to_string())?;
            let (a, b) = profile.search_interval();
            let steps = ((b - a) / 1e-3).floor() as usize;
            let mut best = (a, f64::NEG_INFINITY);
            for s in 0..=steps {
                let l = a + s as f64 * 1e-3;
                let v = profile.loglik(l).map_err(|e| e.to_string())?;
                if v > best.1 {
                    best = (l, v);
                }
            }
            let fit = fit_sdem(&inst.design, &inst.weights, &SdemOptions::default()).map_err(|e| e.to_string())?;
            worst = worst.max((fit.lambda.unwrap() - best.0).abs());
            count += 1;
        }
    }
    check(worst <= 1e-3, format!("{count} instances, max |lambda - grid argmax| {worst:.2e}"))
}

fn recovery(summary: &McSummary) -> Outcome {
    let lambda = summary.parameter("lambda").ok_or("no lambda row")?;
    let mut ok = (0.45..=0.55).contains(&lambda.mean_estimate);
    let mut worst_bias = 0.0f64;
    let mut coverage = (1.0f64, 0.0f64);
    for p in &summary.parameters {
        if p.parameter != "lambda" && p.parameter != "(Intercept)" {
            worst_bias = worst_bias.max(p.bias.abs());
        }
        coverage = (coverage.0.min(p.coverage), coverage.1.max(p.coverage));
    }
    ok &= worst_bias <= 0.05;
    ok &= coverage.0 >= 0.90 && coverage.1 <= 0.99;
    ok &= summary.failures as f64 <= 0.01 * summary.replications as f64;
    check(
        ok,
        format!(
            "mean lambda {:.4}, max |bias| {worst_bias:.4}, coverage [{:.3}, {:.3}], failures {}/{}",
            lambda.mean_estimate, coverage.0, coverage.1, summary.failures, summary.replications
        ),
    )
}

fn size_check() -> Outcome {
    let s = mc_study(&small_dgp(40, 10, 0.0, 20_190_101), 200, None).map_err(|e| e.to_string())?;
    check(
        s.lr_rejection_rate <= 0.10,
        format!("rejection rate {:.3} over {} fits", s.lr_rejection_rate, s.replications - s.failures),
    )
}

fn construction_oracle() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (2usize..=8, 1usize..=8, any::<u64>());
    runner
        .run(&strategy, |(n, m, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_weights(&mut rng, n, 0.4);
            let toy = toy_tables(&mut rng, n, m);
            let y = DVector::from_fn(n * m, |_, _| rng.random::<f64>());
            let d = build_design_from_response(
                y,
                ResponseTransform::Given,
                &toy.dest_ids,
                &toy.origin_ids,
                &toy.tables,
                &w,
                &ModelSpec::default(),
            )
            .unwrap();
            let kron = dense_lag_operator(w.standardized(), m);
            for j in 0..m {
                for i in 0..n {
                    let r = j * n + i;
                    let naive = [1.0, toy.x_o[j], toy.x_d[i], toy.x_od[(i, j)]];
                    for (c, v) in naive.iter().enumerate() {
                        prop_assert_eq!(d.regressors[(r, c)].to_bits(), v.to_bits());
                    }
                }
            }
            for (src, lag) in [(2, 4), (3, 5)] {
                let dense = &kron * d.regressors.column(src);
                let block = apply_destination_lag(w.standardized(), &d.regressors.column(src).into_owned(), n, m).unwrap();
                prop_assert!((&dense - d.regressors.column(lag)).amax() < 1e-10);
                prop_assert!((dense - block).amax() < 1e-10);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("100 cases, n, m <= 8".into())
}

fn determinism(reference: &McSummary) -> Outcome {
    let cfg = small_dgp(40, 10, 0.5, 20_190_101);
    let one = mc_study(&cfg, 200, Some(1)).map_err(|e| e.to_string())?;
    let four = mc_study(&cfg, 200, Some(4)).map_err(|e| e.to_string())?;
    let (a, b, c) = (
        one.to_csv().map_err(|e| e.to_string())?,
        four.to_csv().map_err(|e| e.to_string())?,
        reference.to_csv().map_err(|e| e.to_string())?,
    );
    check(a == b && b == c, format!("1 vs 4 vs default threads, {} bytes", a.len()))
}

fn table_cell() -> Outcome {
    let fixture = Coefficient {
        estimate: 0.26,
        std_error: 0.07,
        p_value: 0.0002,
    };
    let cell = format_cell(&fixture);
    let derived = format_cell(&Coefficient::new(0.26, 0.07));
    check(cell == "0.26*** (0.07)" && derived == cell, format!("\"{cell}\""))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{id:>2}] {name}: {detail} ({secs:.2}s)");
    };
    let mut mc = None;
    report(1, "AIC fixtures", &mut aic_fixtures);
    report(2, "LR/AIC identity", &mut lr_aic_identity);
    report(3, "Jacobian oracle", &mut jacobian_oracle);
    report(4, "OLS collapse", &mut ols_collapse);
    report(5, "optimizer oracle", &mut optimizer_oracle);
    report(6, "Monte Carlo recovery", &mut || {
        let s = mc_study(&small_dgp(40, 10, 0.5, 20_190_101), 200, None).map_err(|e| e.to_string())?;
        let out = recovery(&s);
        mc = Some(s);
        out
    });
    report(7, "size at lambda = 0", &mut size_check);
    report(8, "construction oracle", &mut construction_oracle);
    report(9, "determinism", &mut || match &mc {
        Some(s) => determinism(s),
        None => Err("no reference study".into()),
    });
    report(10, "table cell", &mut table_cell);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
