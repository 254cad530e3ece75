use std::f64::consts::PI;
use std::sync::OnceLock;

use glwedge_core::corner::*;
use glwedge_core::fieldmin::{BoundaryTag, Mesh2D};
use proptest::prelude::*;

const B: f64 = 1.5;
const E_CORR: f64 = 0.0432485;

fn profiles() -> &'static SolvedProfiles {
    static P: OnceLock<SolvedProfiles> = OnceLock::new();
    P.get_or_init(SolvedProfiles::default)
}

#[test]
fn right_angle_wedge_is_valid_and_tagged() {
    let (g, mesh) = build_wedge(0.5 * PI, 8.0, 6.0, 0.25).unwrap();
    assert!(mesh.min_angle_deg() >= MIN_ANGLE_DEG);
    assert!((mesh.area() - g.polygon_area()).abs() < 1e-12 * g.area());
    assert!((g.polygon_area() - g.area()).abs() < 1e-12 * g.area());
    for tag in BoundaryTag::ALL {
        assert!(mesh.boundary.iter().any(|e| e.tag == tag), "{tag:?}");
    }
    // SIDE edges run along the inward normal of their arm.
    for e in &mesh.boundary {
        let arm = match e.tag {
            BoundaryTag::SideMinus => Arm::Minus,
            BoundaryTag::SidePlus => Arm::Plus,
            _ => continue,
        };
        let (p, q) = (mesh.nodes[e.a], mesh.nodes[e.b]);
        let u = g.tangent(arm);
        assert!(((q[0] - p[0]) * u[0] + (q[1] - p[1]) * u[1]).abs() < 1e-12);
    }
    // OUTER nodes lie on the two arms.
    for e in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Outer) {
        let p = mesh.nodes[e.a];
        let (_, _, t) = g.tubular(p);
        assert!(t.abs() < 1e-12);
    }
}

#[test]
fn flat_wedge_is_the_strip_mesh() {
    let (g, mesh) = build_wedge(PI, 6.0, 8.0, 0.25).unwrap();
    assert_eq!(mesh.hash(), Mesh2D::rectangle(-6.0, 6.0, 0.0, 8.0, 0.25).unwrap().hash());
    assert!((g.area() - 96.0).abs() < 1e-12);
    assert!((g.perimeter() - 40.0).abs() < 1e-12);
}

#[test]
fn reflex_wedge_has_an_arc_inner_boundary() {
    let (g, mesh) = build_wedge(1.5 * PI, 9.0, 6.0, 0.25).unwrap();
    assert!((mesh.area() - g.polygon_area()).abs() < 1e-10);
    assert!((g.polygon_area() - g.area()).abs() < 0.01 * 0.25 * 0.25 * g.area());
    for e in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Inner) {
        let (_, _, t) = g.tubular(mesh.nodes[e.a]);
        assert!((t - 6.0).abs() < 1e-9);
    }
}

#[test]
fn star_data_on_the_boundary() {
    let prof = profiles().profile(B, 10.0).unwrap();
    let g = WedgeGeometry::new(0.5 * PI, 12.0, 10.0, 0.25).unwrap();
    let f0 = prof.values[0];
    let (zb, za) = (
        psi_star(&g, &prof, PhaseConvention::Strip, g.point_b()),
        psi_star(&g, &prof, PhaseConvention::Strip, g.point_a()),
    );
    assert!((zb.norm() - f0).abs() < 1e-14 && (za.norm() - f0).abs() < 1e-14);
    let wrap = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
    assert!(wrap(zb.arg() + prof.alpha * 12.0).abs() < 1e-12);
    assert!(wrap(za.arg() - prof.alpha * 12.0).abs() < 1e-12);
    let lit = psi_star(&g, &prof, PhaseConvention::Literal, g.point_b());
    assert!(wrap(lit.arg() - prof.alpha * 12.0).abs() < 1e-12);
    for p in [g.point_c(), g.point_d(), g.point_e()] {
        assert!(psi_star(&g, &prof, PhaseConvention::Strip, p).norm() < 1e-8);
    }
    // Flat angle: the two frames agree at the bisector foot.
    let flat = WedgeGeometry::new(PI, 6.0, 10.0, 0.25).unwrap();
    for t in [0.0, 1.0, 3.5] {
        let a = psi_star(&flat, &prof, PhaseConvention::Strip, [-1e-15, t]);
        let b = psi_star(&flat, &prof, PhaseConvention::Strip, [0.0, t]);
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn gauge_invariants_on_a_right_angle() {
    let (g, mesh) = build_wedge(0.5 * PI, 8.0, 6.0, 0.25).unwrap();
    let gauge = build_wedge_gauge(&g, &mesh);
    assert!(!gauge.integer_condition && gauge.warning.is_some());
    let c = gauge_checks(&g, &mesh, &gauge);
    assert!(c.curl_deviation < 1e-10, "{c:?}");
    assert!(c.tangential_deviation <= mesh.h, "{c:?}");
    assert!(c.strip_sup <= c.strip_bound, "{c:?}");
    assert!((gauge.half_width - 6f64.powi(-3)).abs() < 1e-18);
}

#[test]
fn integer_condition_adjustment() {
    // Flat angle: L ell = k π (4 L + 2 ell), i.e. L = 2 k π ell / (ell - 4 k π).
    let ell = 20.0;
    let exact = 2.0 * PI * ell / (ell - 4.0 * PI);
    let l = adjust_for_integer_condition(PI, 15.0, ell).unwrap();
    assert!((l - exact).abs() < 1e-8, "{l} vs {exact}");
    assert!(l >= 15.0);
    assert_eq!(l.to_bits(), adjust_for_integer_condition(PI, 15.0, ell).unwrap().to_bits());
    let g = WedgeGeometry::new(PI, l, ell, 0.25).unwrap();
    assert!(g.integer_condition());

    let r = adjust_for_integer_condition(0.5 * PI, 26.0, 20.0).unwrap();
    assert!((r - 50.0 / (5.0 - PI)).abs() < 1e-8);
    assert!(adjust_for_integer_condition(0.5 * PI, 9.0, 6.0).is_err());
}

#[test]
fn gauge_pair_agrees_under_the_integer_condition() {
    let l = adjust_for_integer_condition(0.5 * PI, 26.0, 20.0).unwrap();
    let (g, mesh) = build_wedge(0.5 * PI, l, 20.0, 0.25).unwrap();
    let prof = profiles().profile(B, 20.0).unwrap();
    let pair = gauge_pair_check(&g, &mesh, &prof).unwrap();
    assert!(pair.integer_condition);
    assert_eq!(pair.passed, Some(true));
    assert!(pair.difference.abs() <= pair.budget);
    assert!(pair.difference.abs() < 1e-8, "{pair:?}");
    assert!(pair.checks.strip_sup <= pair.checks.strip_bound);
}

#[test]
fn flat_angle_has_no_corner_energy() {
    let prof = profiles().profile(B, 8.0).unwrap();
    let (g, mesh) = build_wedge(PI, 6.0, 8.0, 0.25).unwrap();
    let lad = solve_corner_refined(&g, mesh, &prof, CornerVariant::DirichletStar, PhaseConvention::Strip).unwrap();
    assert!(lad.e.abs() < 5e-3, "{}", lad.e);
    assert!(lad.e.abs() < 50.0 * 0.125 * 0.125);
    assert!(lad.coarse.agmon_passed && lad.fine.agmon_passed);
    assert!(lad.coarse.report.converged && lad.fine.report.converged);
}

#[test]
fn neumann_lies_below_dirichlet_star() {
    let prof = profiles().profile(B, 6.0).unwrap();
    let (g, mesh) = build_wedge(0.5 * PI, 8.0, 6.0, 0.25).unwrap();
    let d = solve_corner(&g, mesh.clone(), &prof, CornerVariant::DirichletStar, PhaseConvention::Strip).unwrap();
    let n = solve_corner(&g, mesh, &prof, CornerVariant::NeumannModified, PhaseConvention::Strip).unwrap();
    assert!(n.energy <= d.energy + 20.0 * 0.25 * 0.25);
    assert!(n.agmon_passed && d.agmon_passed);
}

#[test]
fn strip_sign_convention_has_lower_energy() {
    // Odd L: with α₀ close to -π/4 the two conventions coincide at even L.
    let prof = profiles().profile(B, 6.0).unwrap();
    let (g, mesh) = build_wedge(PI - 0.2, 9.0, 6.0, 0.25).unwrap();
    let s = solve_corner(&g, mesh.clone(), &prof, CornerVariant::DirichletStar, PhaseConvention::Strip).unwrap();
    let l = solve_corner(&g, mesh, &prof, CornerVariant::DirichletStar, PhaseConvention::Literal).unwrap();
    assert!(s.energy < l.energy - 1e-3, "{} vs {}", s.energy, l.energy);
}

#[test]
fn corner_energy_decreases_with_arm_length() {
    let rows = monotonicity_sweep(0.5 * PI, B, 6.0, &[8.0, 10.0, 12.0], 0.25, profiles()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(max_increase(&rows) <= 20.0 * 0.125 * 0.125, "{rows:?}");
    assert!(rows.iter().all(|r| r.e.abs() <= 10.0 && r.converged && r.agmon_passed));
}

#[test]
fn dirichlet_neumann_gap_shrinks() {
    let g6 = dirichlet_neumann_gap(0.5 * PI, B, 8.0, 6.0, 0.25, profiles()).unwrap();
    let g8 = dirichlet_neumann_gap(0.5 * PI, B, 10.0, 8.0, 0.25, profiles()).unwrap();
    for g in [&g6, &g8] {
        assert!(g.gap >= -20.0 * 0.125 * 0.125, "{g:?}");
    }
    assert!(g8.gap <= g6.gap + 1e-3, "{g6:?} {g8:?}");
    let flat = dirichlet_neumann_gap(PI, B, 6.0, 8.0, 0.25, profiles()).unwrap();
    assert!(flat.gap.abs() < 1e-3, "{flat:?}");
}

#[test]
fn corner_energies_are_bounded() {
    let schedule = Schedule { ells: vec![6.0], ..Schedule::default() };
    for beta in [0.5 * PI, 0.75 * PI, PI, 1.25 * PI] {
        let est = corner_energy_estimate(beta, B, &schedule.entries(beta), CornerVariant::DirichletStar, profiles(), None)
            .unwrap();
        assert!(est.e_corner.abs() <= 10.0, "{est:?}");
        assert!(!est.plateau && est.spread.is_none());
    }
}

#[test]
fn near_flat_angles_follow_the_conjecture() {
    let table = conjecture_check(B, &[PI - 0.2, PI, PI + 0.2], E_CORR, &Schedule::default(), profiles()).unwrap();
    assert_eq!(table.rows.len(), 3);
    for (row, est) in table.rows.iter().zip(&table.estimates) {
        assert_eq!(row.beta, est.beta);
        assert!(est.plateau, "{est:?}");
    }
    let flat = &table.rows[1];
    assert!(flat.e_corner.abs() < 5e-3 && flat.conjecture == 0.0 && flat.rel_dev.is_none());
    for row in [&table.rows[0], &table.rows[2]] {
        assert!(row.within_near_pi_band(), "{row:?}");
        assert!(row.rel_dev.unwrap() <= 0.3, "{row:?}");
    }
    assert!(table.antisymmetry_defect(0.2).unwrap() <= 0.5);
    assert!(table.sign_pattern.is_none());
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("beta,e_corner,conjecture,abs_dev,rel_dev\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn estimate_rejects_bad_schedules() {
    assert!(corner_energy_estimate(0.5 * PI, B, &[], CornerVariant::DirichletStar, profiles(), None).is_err());
    let bad = [ScheduleEntry { l: 4.0, ell: 6.0, h: 0.25 }];
    assert!(corner_energy_estimate(0.5 * PI, B, &bad, CornerVariant::DirichletStar, profiles(), None).is_err());
    let entries = Schedule::default().entries(0.5 * PI);
    assert!(entries.iter().all(|e| e.ell <= e.l));
    assert_eq!(entries.iter().map(|e| e.ell).collect::<Vec<_>>(), vec![6.0, 8.0, 10.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn polygon_area_matches_closed_form(beta in 0.3f64..3.1, l in 6.0f64..20.0, ell in 1.0f64..6.0) {
        prop_assume!(ell <= (0.5 * beta).tan() * l);
        let g = WedgeGeometry::new(beta, l, ell, 0.25).unwrap();
        prop_assert!((g.polygon_area() - g.area()).abs() < 1e-10 * g.area());
        let d = g.point_d();
        for arm in [Arm::Minus, Arm::Plus] {
            let (_, t) = g.linear(arm, d);
            prop_assert!((t - ell).abs() < 1e-9);
        }
    }

    #[test]
    fn gauge_phase_is_minus_half_st_away_from_the_bisector(beta in 0.5f64..5.5, x in 0.5f64..5.0, y in -2.0f64..5.0) {
        let g = WedgeGeometry::new(beta, 30.0, 3.0, 0.25).unwrap();
        for p in [[x, y], [-x, y]] {
            let th = g.angle(p);
            prop_assume!(th >= 0.0 && th <= beta && (th - 0.5 * beta).abs() > 2.0 * g.ell.powi(-3));
            let (s, t) = g.linear(g.arm_of(p), p);
            prop_assert!((gauge_phase(&g, p) + 0.5 * s * t).abs() < 1e-9 * (1.0 + (s * t).abs()));
        }
    }
}
