use ekdiff::ekops::{ek_integral, EKParams, SampledFunction};
use ekdiff::greenfn::{gaussian_green, ggbm_green, green_variance, DiffusionParams, Reduction};
use ekdiff::solver::*;
use ekdiff::special::recip_gamma;
use ekdiff::Error;

fn config(alpha: f64, beta: f64, nx: usize, nt: usize) -> SolverConfig {
    let params = DiffusionParams::new(alpha, beta).unwrap();
    let grid = Grid1D::symmetric(10.0, nx).unwrap();
    let t0 = start_time(params, grid.dx()).unwrap().max(0.01);
    SolverConfig { params, grid, t0, t_end: 1.0, nt, ic_mode: IcMode::AnalyticGreen, rule: TimeRule::default() }
}

fn final_l1(cfg: &SolverConfig) -> f64 {
    let p = cfg.params;
    let sol = solve(cfg).unwrap();
    sol.l1_error(sol.levels() - 1, |x| ggbm_green(p, x, 1.0)).unwrap()
}

#[test]
fn brownian_benchmark_from_small_start() {
    let mut cfg = config(1.0, 1.0, 401, 200);
    cfg.t0 = 0.01;
    let sol = solve_reduced(Reduction::Brownian, &cfg).unwrap();
    let err = sol.l1_error(199, |x| gaussian_green(x, 1.0)).unwrap();
    assert!(err < 1e-3, "{err}");
    cfg.rule = TimeRule::RightEndpoint;
    let first_order = final_l1(&cfg);
    assert!(first_order > err && first_order < 3e-3, "{first_order}");
}

#[test]
fn limits_match_their_green_functions() {
    let cfg = config(1.4, 1.0, 401, 200);
    let sol = solve_reduced(Reduction::StretchedGaussian, &cfg).unwrap();
    let err = sol.l1_error(199, |x| Ok((-x * x / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt())).unwrap();
    assert!(err < 1e-3, "stretched {err}");

    let cfg = config(0.6, 0.6, 401, 200);
    let err = final_l1(&cfg);
    assert!(err < 5e-3, "time fractional {err}");
    assert!(solve_reduced(Reduction::TimeFractional, &cfg).is_ok());
    assert!(matches!(solve_reduced(Reduction::StretchedGaussian, &cfg), Err(Error::ParamMismatch(_))));
}

#[test]
fn variance_follows_the_law_and_mass_is_kept() {
    for &(alpha, beta) in &[(0.8, 0.5), (1.0, 1.0), (1.4, 0.8)] {
        let cfg = config(alpha, beta, 401, 200);
        let p = cfg.params;
        let sol = solve(&cfg).unwrap();
        let ratios: Vec<f64> = sol.diagnostics.iter().map(|d| d.variance / d.t.powf(alpha)).collect();
        let law = green_variance(p, 1.0);
        for (d, r) in sol.diagnostics.iter().zip(&ratios) {
            assert!((r / law - 1.0).abs() < 1e-2, "({alpha}, {beta}) t={}: {r} vs {law}", d.t);
        }
        assert!(sol.mass_drift < 1e-4, "({alpha}, {beta}) drift {}", sol.mass_drift);
        assert!(sol.diagnostics.iter().all(|d| d.min_value >= -1e-10));
    }
}

#[test]
fn time_and_space_orders() {
    for &(alpha, beta) in &[(1.0, 1.0), (0.6, 0.6), (1.4, 0.8)] {
        let cfg = config(alpha, beta, 101, 101);
        for rule in [TimeRule::EndpointAverage, TimeRule::RightEndpoint] {
            let study = time_refinement(&SolverConfig { rule, ..cfg.clone() }, 3).unwrap();
            assert_eq!(study.sizes, vec![101, 201, 401, 801]);
            assert!(study.min_order() >= 0.9, "({alpha}, {beta}) {rule:?} {study:?}");
        }
        let study = space_refinement(&cfg, 3).unwrap();
        assert!(study.min_order() >= 1.9, "({alpha}, {beta}) {study:?}");
    }
}

#[test]
fn memory_sum_matches_ek_integral() {
    // J^β_T f(T) = t^α I^{0,β}_{α/β} φ(t) with φ(t) = f(t^{α/β})
    for &(alpha, beta) in &[(0.8, 0.5), (1.4, 0.8), (0.6, 0.6)] {
        let eta = alpha / beta;
        let f = |s: f64| (-s).exp() * (1.0 + s * s);
        let t: f64 = 1.3;
        let t_stretched = t.powf(eta);
        let n = 100_000;
        let dt = t_stretched / n as f64;
        let samples: Vec<f64> = (0..=n).map(|m| f(m as f64 * dt)).collect();
        let sum = memory_sum(beta, dt, &samples, TimeRule::EndpointAverage).unwrap();
        let phi = SampledFunction::new(move |s: f64| f(s.powf(eta)));
        let ek = t.powf(alpha) * ek_integral(EKParams::new(0.0, beta, eta).unwrap(), &phi, t).unwrap();
        assert!((sum - ek).abs() < 1e-6, "({alpha}, {beta}) {sum} vs {ek}");
    }
    let ones = vec![1.0; 51];
    let total = memory_sum(0.4, 0.02, &ones, TimeRule::RightEndpoint).unwrap();
    assert!((total - 1f64.powf(0.4) * recip_gamma(1.4)).abs() < 1e-14);
}

#[test]
fn custom_profile_spreads_like_the_heat_kernel() {
    let params = DiffusionParams::new(1.0, 1.0).unwrap();
    let cfg = SolverConfig {
        params,
        grid: Grid1D::symmetric(10.0, 401).unwrap(),
        t0: 0.0,
        t_end: 0.9,
        nt: 181,
        ic_mode: IcMode::Custom(SampledFunction::new(|x| gaussian_green(x, 0.1).unwrap())),
        rule: TimeRule::EndpointAverage,
    };
    let sol = solve(&cfg).unwrap();
    let err = sol.l1_error(180, |x| gaussian_green(x, 1.0)).unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn under_resolved_start_is_rejected() {
    let mut cfg = config(1.4, 1.0, 401, 20);
    cfg.t0 = 1e-3;
    assert!(matches!(solve(&cfg), Err(Error::Resolution(_))));
    cfg.t0 = auto_t0(cfg.params, cfg.grid.dx()).unwrap();
    assert!(solve(&cfg).is_ok());
}

fn exact_field(alpha: f64, beta: f64, nt: usize, nx: usize) -> SolutionField {
    let cfg = SolverConfig { nt, ..config(alpha, beta, nx, nt) };
    let mut sol = solve(&cfg).unwrap();
    let x = sol.x_nodes();
    for (level, t) in sol.times.clone().iter().enumerate() {
        let mut v: Vec<f64> = x.iter().map(|&x| ggbm_green(cfg.params, x, *t).unwrap()).collect();
        v[0] = 0.0;
        *v.last_mut().unwrap() = 0.0;
        sol.values[level] = v;
    }
    sol
}

#[test]
fn ek_residual_behaviour() {
    let coarse = ek_residual(&exact_field(1.0, 1.0, 21, 801), 10).unwrap();
    let fine = ek_residual(&exact_field(1.0, 1.0, 41, 801), 20).unwrap();
    assert!(fine < 0.6 * coarse, "{coarse} {fine}");

    let cfg = config(1.4, 1.0, 201, 21);
    let sol = solve(&cfg).unwrap();
    let level = 10;
    let t = sol.times[level];
    let lap = sol.laplacian(level);
    let (h1, h2) = (t - sol.times[level - 1], sol.times[level + 1] - t);
    let direct = (1..200)
        .map(|i| {
            let (pm, p0, pp) = (sol.values[level - 1][i], sol.values[level][i], sol.values[level + 1][i]);
            let dpdt = (h1 * h1 * pp - h2 * h2 * pm + (h2 * h2 - h1 * h1) * p0) / (h1 * h2 * (h1 + h2));
            (dpdt - 1.4 * t.powf(0.4) * lap[i]).abs()
        })
        .fold(0.0, f64::max);
    let residual = ek_residual(&sol, level).unwrap();
    assert!((residual - direct).abs() <= 1e-12 * direct.max(1.0), "{residual} vs {direct}");

    let zero = SolverConfig {
        ic_mode: IcMode::Custom(SampledFunction::constant(0.0)),
        t0: 0.0,
        ..config(0.6, 0.6, 51, 6)
    };
    assert_eq!(ek_residual(&solve(&zero).unwrap(), 2).unwrap(), 0.0);
    assert!(matches!(ek_residual(&sol, 1), Err(Error::InsufficientHistory { .. })));
    assert!(matches!(ek_residual(&sol, 20), Err(Error::InsufficientHistory { .. })));

    let sol = solve(&config(0.6, 0.6, 101, 41)).unwrap();
    let r = ek_residual(&sol, 20).unwrap();
    let peak = sol.laplacian(20).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(r.is_finite() && r < 0.05 * peak, "{r} vs {peak}");
}
