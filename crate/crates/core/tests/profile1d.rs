use glwedge_core::profile1d::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference values on `[0, 12]` from an independent collocation solver
/// (scipy `solve_bvp`, tolerance 1e-10, golden-section phase search).
const REFERENCE: [(f64, f64, f64, f64); 3] = [
    // (b, alpha, energy, f(0))
    (1.0, -0.8679924619225551, -0.1526290481652255, 0.7022664527131244),
    (1.2, -0.8257849288976389, -0.06293884554184961, 0.6028185460898055),
    (1.5, -0.7857738910685005, -0.0076071959132707765, 0.38428919033333103),
];

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

fn richardson(b: f64, ell: f64, n: usize) -> (f64, f64, f64) {
    let p = Params1D::flat(b, ell, n).unwrap();
    let c = optimize_alpha(&p).unwrap();
    let f = optimize_alpha(&p.refined()).unwrap();
    let r = |x: f64, y: f64| (4.0 * y - x) / 3.0;
    (r(c.alpha, f.alpha), r(c.energy, f.energy), r(c.values[0], f.values[0]))
}

#[test]
fn extrapolated_solution_matches_collocation_reference() {
    for (b, alpha, energy, f0) in REFERENCE {
        let (a, e, v) = richardson(b, 12.0, 2401);
        assert!((a - alpha).abs() < 1e-6, "b={b}: alpha {a} vs {alpha}");
        assert!((e - energy).abs() < 1e-9, "b={b}: energy {e} vs {energy}");
        assert!((v - f0).abs() < 1e-7, "b={b}: f(0) {v} vs {f0}");
    }
}

#[test]
fn identities_hold_at_the_optimum() {
    for b in [1.2, 1.5] {
        let p = Params1D::flat(b, 12.0, 2401).unwrap();
        let prof = optimize_alpha(&p).unwrap();
        let f4: Vec<f64> = prof.values.iter().map(|f| f.powi(4)).collect();
        let id = prof.energy + trapezoid(&f4, p.h()) / (2.0 * b);
        assert!(id.abs() < 1e-6 * (1.0 + prof.energy.abs()), "energy identity {id}");
        assert!(prof.stationarity.abs() < 1e-8);
        assert!(prof.energy < 0.0);
        let (r0, r1) = prof.neumann_residuals();
        assert!(r0.abs() < 1e-8 && r1.abs() < 1e-8, "{r0} {r1}");
        assert!(prof.residual < 1e-9);
        assert!(prof.values.iter().all(|&v| v > 0.0));
    }
}

#[test]
fn phase_scan_never_beats_optimizer() {
    let p = Params1D::flat(1.5, 10.0, 801).unwrap();
    let best = optimize_alpha(&p).unwrap();
    let mut scan_min = (f64::INFINITY, 0.0);
    for i in 0..=80 {
        let a = -1.2 + 0.01 * i as f64;
        let e = solve_profile_fixed_alpha(a, &p).unwrap().energy;
        assert!(e >= best.energy - 1e-12, "alpha={a}: {e} < {}", best.energy);
        if e < scan_min.0 {
            scan_min = (e, a);
        }
    }
    assert!((scan_min.1 - best.alpha).abs() <= 0.01);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = Params1D::new(1.4, 1.0, 0.02, 8.0, 401).unwrap();
    let f: Vec<f64> = (0..p.n).map(|i| (-(p.t(i) - 0.8).powi(2) / 2.0).exp() * (0.6 + 0.1 * rng.gen::<f64>())).collect();
    let alpha = -0.7;
    let g = gradient_1d(&f, alpha, &p).unwrap();
    for _ in 0..20 {
        let d: Vec<f64> = (0..p.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let step = 1e-5;
        let shift = |s: f64| -> Vec<f64> { f.iter().zip(&d).map(|(x, y)| x + s * y).collect() };
        let fd = (energy_1d(&shift(step), alpha, &p).unwrap() - energy_1d(&shift(-step), alpha, &p).unwrap()) / (2.0 * step);
        let an: f64 = g.iter().zip(&d).map(|(x, y)| x * y).sum();
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
    }
}

#[test]
fn energy_converges_at_second_order() {
    let e: Vec<f64> = [301, 601, 1201]
        .iter()
        .map(|&n| optimize_alpha(&Params1D::flat(1.5, 12.0, n).unwrap()).unwrap().energy)
        .collect();
    let order = ((e[0] - e[1]) / (e[1] - e[2])).log2();
    assert!((1.8..=2.2).contains(&order), "observed order {order}");
}

#[test]
fn energy_is_insensitive_to_interval_length() {
    let e = |ell: f64| optimize_alpha(&Params1D::with_spacing(1.5, 0.0, 0.0, ell, 0.01).unwrap()).unwrap().energy;
    assert!((e(12.0) - e(14.0)).abs() < 1e-10);
}

#[test]
fn energy_and_boundary_value_vanish_towards_third_critical_field() {
    let mut prev: Option<(f64, f64)> = None;
    for b in [1.2, 1.4, 1.6, 1.68] {
        let prof = optimize_alpha(&Params1D::flat(b, 12.0, 1201).unwrap()).unwrap();
        assert!(prof.energy < 0.0);
        if let Some((e, f0)) = prev {
            assert!(prof.energy > e && prof.values[0] < f0);
        }
        prev = Some((prof.energy, prof.values[0]));
    }
    let (e, f0) = prev.unwrap();
    assert!(e > -1e-4 && f0 < 0.15);
}

#[test]
fn supercritical_field_gives_trivial_profile() {
    let prof = optimize_alpha(&Params1D::flat(1.8, 10.0, 501).unwrap()).unwrap();
    assert!(prof.degenerate);
    assert_eq!(prof.energy, 0.0);
    assert!(decay_check(&prof).skipped);
}

#[test]
fn half_line_limit_and_curvature_correction() {
    let s = half_line_limit(1.5, &[8.0, 10.0, 12.0, 15.0], DEFAULT_H).unwrap();
    assert!(s.converged);
    assert!((s.e1d_star - REFERENCE[2].2).abs() < 1e-9);
    // Centred finite difference of E_k in eps k from the collocation solver.
    assert!((s.e_corr_integral - 0.04325).abs() < 1e-4);
    assert!(s.e_corr_moment_diff < 1e-8);
    assert!((s.e_corr() - s.e_corr_integral).abs() == 0.0);
}

#[test]
fn curvature_expansion_is_second_order() {
    let e_corr = half_line_limit(1.5, &[8.0, 10.0, 12.0], DEFAULT_H).unwrap().e_corr();
    let t = curvature_expansion_check(1.5, 1.0, &[0.04, 0.02, 0.01], 5.0, e_corr, DEFAULT_H).unwrap();
    assert!(t.exponent.unwrap() >= 1.4, "{:?}", t.exponent);
    let flat = curvature_expansion_check(1.5, 0.0, &[0.04, 0.02], 5.0, e_corr, DEFAULT_H).unwrap();
    assert!(flat.rows.iter().all(|r| r.difference.abs() < 1e-8));
    // Positive E_corr: positive curvature lowers the energy, negative raises it.
    let neg = curvature_expansion_check(1.5, -1.0, &[0.02], 5.0, e_corr, DEFAULT_H).unwrap();
    let e0 = flat.rows[1].predicted;
    assert!(e_corr > 0.0);
    assert!(t.rows[1].e1d_k < e0 && neg.rows[0].e1d_k > e0);
}

#[test]
fn curvature_check_rejects_large_eps() {
    assert!(curvature_expansion_check(1.5, 1.0, &[0.2], 5.0, 0.04, DEFAULT_H).is_err());
}

#[test]
fn cost_tables_on_interval() {
    for ell in [10.0, 12.0, 15.0] {
        let prof = optimize_alpha(&Params1D::with_spacing(1.5, 0.0, 0.0, ell, DEFAULT_H).unwrap()).unwrap();
        let ct = cost_tables(&prof);
        assert_eq!(ct.f_pot[0], 0.0);
        assert!(ct.f_pot.last().unwrap().abs() < 1e-8);
        assert!(ct.f_pot.iter().all(|&v| v <= 1e-10));
        assert!((ct.k_cost[0] - (1.0 - ct.d_ell) * prof.values[0].powi(2)).abs() < 1e-15);
        assert!((0.0..=5.0).contains(&(ell - ct.ell_bar)), "ell={ell} ell_bar={}", ct.ell_bar);
        if ell <= 12.0 {
            let rep = check_cost_positivity(&ct, &prof, true);
            assert!(rep.passed(), "ell={ell}: {:?}", rep.violations);
        }
    }
}

#[test]
fn cost_function_is_convex_at_unit_b() {
    let prof = optimize_alpha(&Params1D::flat(1.0, 12.0, 2401).unwrap()).unwrap();
    let rep = check_cost_positivity(&cost_tables(&prof), &prof, true);
    assert!(rep.min_second_difference >= -1e-8);
    assert!(rep.violations.iter().all(|v| v.check != "K convex"));
}

#[test]
fn half_line_cost_function_is_nonnegative() {
    let prof = optimize_alpha(&Params1D::flat(1.5, 12.0, 2401).unwrap()).unwrap();
    let ct = cost_tables_half_line(&prof);
    assert_eq!(ct.k_cost[0], prof.values[0].powi(2));
    let rep = check_cost_positivity(&ct, &prof, false);
    assert!(rep.passed(), "{:?}", rep.violations);
}

#[test]
fn decay_envelopes_are_bounded() {
    for b in [1.0, 1.2, 1.5, 1.68] {
        let prof = optimize_alpha(&Params1D::flat(b, 12.0, 1201).unwrap()).unwrap();
        let rep = decay_check(&prof);
        assert!(rep.passed, "b={b}: {rep:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimum_satisfies_identities(b in 1.05f64..1.65, ell in 8.0f64..12.0) {
        let p = Params1D::with_spacing(b, 0.0, 0.0, ell, 0.02).unwrap();
        let prof = optimize_alpha(&p).unwrap();
        let f4: Vec<f64> = prof.values.iter().map(|f| f.powi(4)).collect();
        prop_assert!((prof.energy + trapezoid(&f4, p.h()) / (2.0 * b)).abs() < 1e-9);
        prop_assert!(prof.energy < 0.0);
        prop_assert!(prof.stationarity.abs() < 1e-8);
        prop_assert!(prof.values.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn perturbations_raise_the_energy(seed in 0u64..1000, scale in 1e-3f64..1e-1) {
        let p = Params1D::flat(1.3, 8.0, 201).unwrap();
        let prof = optimize_alpha(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = prof.values.iter().map(|v| v + scale * rng.gen_range(-1.0..1.0)).collect();
        prop_assert!(energy_1d(&g, prof.alpha, &p).unwrap() >= prof.energy);
        let shifted = solve_profile_fixed_alpha(prof.alpha + scale, &p).unwrap();
        prop_assert!(shifted.energy >= prof.energy - 1e-14);
    }

    #[test]
    fn energy_is_even_in_the_profile(seed in 0u64..1000, alpha in -2.0f64..1.0) {
        let p = Params1D::flat(1.5, 6.0, 61).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..61).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m: Vec<f64> = f.iter().map(|x| -x).collect();
        prop_assert_eq!(energy_1d(&f, alpha, &p).unwrap(), energy_1d(&m, alpha, &p).unwrap());
    }
}
