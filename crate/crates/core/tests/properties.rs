use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use nullsynth::geometry::elements_in_region;
use nullsynth::operator::{
    assemble, minimum_norm_excitations, nr_excitations, polar_sum, select_rank, NrCoefficients,
    RadiationOperator, TruncationReport,
};
use nullsynth::optimizer::{cost_quantized, levels_from_bits, optimize_nr, Constraint, PsoConfig};
use nullsynth::pattern::{
    array_factor, mask_matching, pattern_tolerance, q_factor, steering, AngularGrid, GridSpec,
    PatternMask,
};
use nullsynth::{ApertureRegion, ArrayGeometry, Axis, ExcitationVector, Position};

struct Fixture {
    geom: ArrayGeometry,
    grid: AngularGrid,
    op: RadiationOperator,
    rank: TruncationReport,
}

fn tc1() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let geom = ArrayGeometry::linear(32, 0.3, Axis::Y).unwrap();
        let grid = GridSpec::default().build(&geom).unwrap();
        let op = RadiationOperator::build(&geom, &grid).unwrap();
        let rank = select_rank(&op, 3.5e-3).unwrap();
        Fixture {
            geom,
            grid,
            op,
            rank,
        }
    })
}

fn planar() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let geom = ArrayGeometry::planar_grid(4, 4, 0.4).unwrap();
        let grid = GridSpec::default().build(&geom).unwrap();
        let op = RadiationOperator::build(&geom, &grid).unwrap();
        let chi = op.normalized_spectrum()[12];
        let rank = select_rank(&op, chi).unwrap();
        assert_eq!(rank.s, 12);
        Fixture {
            geom,
            grid,
            op,
            rank,
        }
    })
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn weights(n: usize) -> impl Strategy<Value = ExcitationVector> {
    prop::collection::vec(complex(), n).prop_map(ExcitationVector::new)
}

fn nonzero_weights(n: usize) -> impl Strategy<Value = ExcitationVector> {
    weights(n).prop_filter("nonzero", |w| w.norm() > 1e-3)
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

#[test]
fn tc1_power_matches_double_loop() {
    let f = tc1();
    let w = ExcitationVector::from_polar(
        &(0..32)
            .map(|n| 0.3 + 0.7 * ((n as f64) * 0.37).sin().abs())
            .collect::<Vec<_>>(),
        &(0..32).map(|n| (n as f64) * 0.21 - 2.0).collect::<Vec<_>>(),
    )
    .unwrap();
    let p = array_factor(&f.geom, &w, &f.grid).unwrap();
    for (m, d) in f.grid.directions().iter().enumerate() {
        let mut re = 0.0;
        let mut im = 0.0;
        for n in 0..32 {
            let y = 0.3 * n as f64;
            let arg = 2.0 * PI * y * d.theta.sin() * d.phi.sin();
            let z = w.weights()[n];
            re += z.re * arg.cos() - z.im * arg.sin();
            im += z.re * arg.sin() + z.im * arg.cos();
        }
        let direct = re * re + im * im;
        assert!(
            (p.power()[m] - direct).abs() <= 1e-12 * direct.max(1e-300),
            "sample {m}"
        );
    }
}

#[test]
fn two_element_singular_values_match_gram_eigenvalues() {
    let geom = ArrayGeometry::linear(2, 0.35, Axis::X).unwrap();
    let grid = AngularGrid::linear(40, Axis::X).unwrap();
    let op = RadiationOperator::build(&geom, &grid).unwrap();
    let g = op.matrix();
    let gram = g.adjoint() * g;
    let (a, d, b) = (gram[(0, 0)].re, gram[(1, 1)].re, gram[(0, 1)].norm());
    let disc = ((a - d) * (a - d) / 4.0 + b * b).sqrt();
    let expect = [((a + d) / 2.0 + disc).sqrt(), ((a + d) / 2.0 - disc).sqrt()];
    for (s, e) in op.singular_values().iter().zip(expect) {
        assert!((s - e).abs() <= 1e-12 * expect[0], "{s} vs {e}");
    }
}

#[test]
fn three_element_projection_matches_explicit_projector() {
    let geom = ArrayGeometry::linear(3, 0.3, Axis::Y).unwrap();
    let grid = AngularGrid::linear(24, Axis::Y).unwrap();
    let op = RadiationOperator::build(&geom, &grid).unwrap();
    let rank = select_rank(&op, op.normalized_spectrum()[2] * 1.01).unwrap();
    assert_eq!(rank.s, 2);
    let w = ExcitationVector::new(vec![
        Complex64::new(1.0, 0.2),
        Complex64::new(-0.4, 0.9),
        Complex64::new(0.3, -0.7),
    ]);
    let af = array_factor(&geom, &w, &grid).unwrap();
    let w_ra = minimum_norm_excitations(&op, &rank, &af).unwrap();
    let v3 = op.v().column(2).clone_owned();
    let wv = w.to_dvector();
    let expect = &wv - &v3 * (v3.adjoint() * &wv)[(0, 0)];
    assert!(rel_err(w_ra.weights(), expect.as_slice()) < 1e-10);
}

#[test]
fn single_element_spectrum() {
    let geom = ArrayGeometry::linear(1, 0.5, Axis::Y).unwrap();
    let grid = AngularGrid::linear(8, Axis::Y).unwrap();
    let op = RadiationOperator::build(&geom, &grid).unwrap();
    assert_eq!(op.normalized_spectrum(), vec![1.0]);
    assert_eq!(select_rank(&op, 0.5).unwrap().s, 1);
}

#[test]
fn uniform_weights_violate_cosecant_mask() {
    let f = tc1();
    let mask = nullsynth::pattern::MaskSpec::CosecantSquared {
        sll_db: -20.0,
        rpe_db: 1.0,
        fnbw_deg: 68.0,
        null_start_deg: -10.0,
        transition_deg: 8.0,
        csc_start_deg: 8.0,
        axis: Axis::Y,
        cross_fnbw_deg: None,
    }
    .build(&f.grid)
    .unwrap();
    let w = ExcitationVector::new(vec![Complex64::new(1.0, 0.0); 32]);
    let p = array_factor(&f.geom, &w, &f.grid).unwrap();
    assert!(mask_matching(&p, &mask, &f.grid).unwrap() > 0.0);
}

#[test]
fn no_nr_freedom_is_rejected() {
    let f = planar();
    let rank = select_rank(&f.op, f.op.normalized_spectrum().last().unwrap() * 0.5).unwrap();
    assert_eq!(rank.s, rank.n);
    let w = ExcitationVector::new(vec![Complex64::new(1.0, 0.0); rank.n]);
    let err = optimize_nr(&f.op, &rank, &w, &Constraint::Drr, &PsoConfig::default()).unwrap_err();
    assert!(err.to_string().contains("no NR degrees of freedom"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn array_factor_is_linear(a in weights(16), b in weights(16), ca in complex(), cb in complex()) {
        let f = planar();
        let combo = ExcitationVector::new(
            a.weights().iter().zip(b.weights()).map(|(x, y)| ca * x + cb * y).collect(),
        );
        let fa = array_factor(&f.geom, &a, &f.grid).unwrap();
        let fb = array_factor(&f.geom, &b, &f.grid).unwrap();
        let fc = array_factor(&f.geom, &combo, &f.grid).unwrap();
        for ((c, x), y) in fc.values().iter().zip(fa.values()).zip(fb.values()) {
            prop_assert!((c - ca * x - cb * y).norm() < 1e-10);
        }
    }

    #[test]
    fn gw_matches_array_factor(w in weights(16)) {
        let f = planar();
        let gw = f.op.apply(&w).unwrap();
        let af = array_factor(&f.geom, &w, &f.grid).unwrap();
        for (a, b) in gw.iter().zip(af.values()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_has_unit_modulus(x in -5.0..5.0f64, y in -5.0..5.0f64, u in -1.0..1.0f64, v in -1.0..1.0f64) {
        prop_assert!((steering(Position::new(x, y), u, v).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn q_factor_ignores_global_phase_and_scale(w in nonzero_weights(6), s in 0.1..10.0f64, ph in -PI..PI) {
        let geom = ArrayGeometry::linear(6, 0.4, Axis::X).unwrap();
        let sphere = AngularGrid::full_sphere(45, 90).unwrap();
        let q0 = q_factor(&w, &array_factor(&geom, &w, &sphere).unwrap(), &sphere).unwrap();
        let w2 = w.scaled(Complex64::from_polar(s, ph));
        let q1 = q_factor(&w2, &array_factor(&geom, &w2, &sphere).unwrap(), &sphere).unwrap();
        prop_assert!((q0 - q1).abs() <= 1e-10 * q0);
    }

    #[test]
    fn tolerance_is_scale_invariant(a in nonzero_weights(16), b in nonzero_weights(16), s in 0.1..10.0f64) {
        let f = planar();
        let pa = array_factor(&f.geom, &a, &f.grid).unwrap();
        let pb = array_factor(&f.geom, &b, &f.grid).unwrap();
        let c = Complex64::new(s, 0.0);
        let sa = array_factor(&f.geom, &a.scaled(c), &f.grid).unwrap();
        let sb = array_factor(&f.geom, &b.scaled(c), &f.grid).unwrap();
        let x0 = pattern_tolerance(&pa, &pb, &f.grid).unwrap();
        let x1 = pattern_tolerance(&sa, &sb, &f.grid).unwrap();
        prop_assert!((x0 - x1).abs() <= 1e-10 * x0.max(1e-12));
        prop_assert!(pattern_tolerance(&pa, &pa, &f.grid).unwrap() == 0.0);
    }

    #[test]
    fn mask_violation_is_zero_inside_and_positive_outside(w in nonzero_weights(16), slack in 1.01..2.0f64) {
        let f = planar();
        let p = array_factor(&f.geom, &w, &f.grid).unwrap();
        let norm = p.normalized_power();
        let inside = PatternMask::new(
            norm.iter().map(|x| x / slack).collect(),
            norm.iter().map(|x| (x * slack).min(1.0)).collect(),
        ).unwrap();
        prop_assert_eq!(mask_matching(&p, &inside, &f.grid).unwrap(), 0.0);
        let k = norm.iter().cloned().enumerate().fold((0, 0.0), |b, (i, x)| if x > b.1 { (i, x) } else { b }).0;
        let mut upper = vec![1.0; norm.len()];
        upper[k] = 0.5;
        let outside = PatternMask::new(vec![0.0; norm.len()], upper).unwrap();
        let expect = 0.5 * f.grid.weights()[k] / (2.0 * PI);
        prop_assert!((mask_matching(&p, &outside, &f.grid).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn select_rank_is_monotone(a in 1e-4..0.99f64, b in 1e-4..0.99f64) {
        let f = tc1();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(select_rank(&f.op, lo).unwrap().s >= select_rank(&f.op, hi).unwrap().s);
    }

    #[test]
    fn ra_and_nr_are_orthogonal(w in nonzero_weights(32), g in prop::collection::vec(complex(), 8)) {
        let f = tc1();
        let af = array_factor(&f.geom, &w, &f.grid).unwrap();
        let w_ra = minimum_norm_excitations(&f.op, &f.rank, &af).unwrap();
        let w_nr = nr_excitations(&f.op, &f.rank, &NrCoefficients::new(g).unwrap()).unwrap();
        prop_assert!(w_ra.inner(&w_nr).norm() <= 1e-10 * w_ra.norm() * w_nr.norm().max(1.0));
    }

    #[test]
    fn nr_leakage_is_bounded(g in prop::collection::vec(complex(), 8)) {
        let f = tc1();
        let gamma = NrCoefficients::new(g).unwrap();
        let w_nr = nr_excitations(&f.op, &f.rank, &gamma).unwrap();
        let leak = f.op.apply(&w_nr).unwrap().norm();
        prop_assert!(leak <= f.rank.leakage_bound * gamma.norm() * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn pseudoinverse_recovers_row_space(c in prop::collection::vec(complex(), 24)) {
        let f = tc1();
        let w = ExcitationVector::from_dvector(&(f.op.v().columns(0, 24) * DVector::from_vec(c)));
        prop_assume!(w.norm() > 1e-3);
        let back = f.op.pseudo_inverse(24, f.op.apply(&w).unwrap().as_slice()).unwrap();
        prop_assert!(rel_err(back.weights(), w.weights()) < 1e-8);
    }

    #[test]
    fn interleaving_round_trips(g in prop::collection::vec(complex(), 0..12)) {
        let gamma = NrCoefficients::new(g).unwrap();
        prop_assert_eq!(NrCoefficients::from_interleaved(&gamma.to_interleaved()).unwrap(), gamma);
    }

    #[test]
    fn quantized_cost_matches_brute_force(a in prop::collection::vec(0.0..1.2f64, 1..20), bits in 1u32..5) {
        let levels = levels_from_bits(bits).unwrap();
        let w = ExcitationVector::from_polar(&a, &vec![0.0; a.len()]).unwrap();
        let brute: f64 = a
            .iter()
            .map(|x| levels.iter().map(|l| (x - l).abs()).fold(f64::INFINITY, f64::min))
            .sum();
        prop_assert!((cost_quantized(&w, &levels) - brute).abs() < 1e-12);
    }

    #[test]
    fn circle_region_matches_brute_force(xc in -1.0..3.0f64, yc in -1.0..3.0f64, r in 0.0..2.0f64) {
        let geom = ArrayGeometry::planar_grid(6, 6, 0.45).unwrap();
        let region = ApertureRegion::Circle { x_c: xc, y_c: yc, radius: r };
        let brute: Vec<usize> = geom
            .positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| ((p.x - xc).powi(2) + (p.y - yc).powi(2)).sqrt() <= r)
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(elements_in_region(&geom, &region), brute);
    }

    #[test]
    fn nested_rectangles_nest(x0 in -0.5..2.0f64, y0 in -0.5..2.0f64, w in 0.0..2.0f64, h in 0.0..2.0f64, grow in 0.0..1.0f64) {
        let geom = ArrayGeometry::planar_grid(6, 6, 0.45).unwrap();
        let inner = ApertureRegion::Rectangle { x_min: x0, x_max: x0 + w, y_min: y0, y_max: y0 + h };
        let outer = ApertureRegion::Rectangle { x_min: x0 - grow, x_max: x0 + w + grow, y_min: y0 - grow, y_max: y0 + h + grow };
        let a = elements_in_region(&geom, &inner);
        let b = elements_in_region(&geom, &outer);
        prop_assert!(a.iter().all(|i| b.contains(i)));
    }

    #[test]
    fn swarm_trace_is_monotone_and_seeded_at_ra(seed in 0u64..1000) {
        let f = planar();
        let w = ExcitationVector::new((0..16).map(|n| Complex64::new(1.0 + 0.1 * n as f64, 0.0)).collect());
        let af = array_factor(&f.geom, &w, &f.grid).unwrap();
        let w_ra = minimum_norm_excitations(&f.op, &f.rank, &af).unwrap();
        let cfg = PsoConfig { max_iters: 15, seed, snapshot_iters: vec![0, 15], ..PsoConfig::default() };
        let sol = optimize_nr(&f.op, &f.rank, &w_ra, &Constraint::Drr, &cfg).unwrap();
        prop_assert!(sol.trace.is_monotone());
        prop_assert!(sol.trace.records[0].best_cost <= sol.initial_cost);
        prop_assert_eq!(sol.trace.records.len(), 16);
        prop_assert_eq!(sol.trace.snapshots.len(), 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn polar_sum_matches_complex_addition(a in complex(), b in complex()) {
        let scale = a.norm() + b.norm();
        prop_assume!(scale > 1e-6 && (a + b).norm() > 1e-3 * scale);
        let ra = ExcitationVector::new(vec![a]);
        let nr = ExcitationVector::new(vec![b]);
        let (alpha, beta) = polar_sum(&ra, &nr).unwrap();
        let z = a + b;
        prop_assert!((alpha[0] - z.norm()).abs() <= 1e-12 * scale);
        let dphi = (Complex64::from_polar(1.0, beta[0]) - Complex64::from_polar(1.0, z.arg())).norm();
        prop_assert!(dphi * z.norm() <= 1e-12 * scale);
        prop_assert_eq!(assemble(&ra, &nr).unwrap().weights()[0], z);
    }
}

#[test]
fn svd_is_orthonormal_and_reconstructs() {
    for f in [tc1(), planar()] {
        let n = f.op.n_elements();
        let eye = DMatrix::<Complex64>::identity(n, n);
        assert!((f.op.v().adjoint() * f.op.v() - &eye).camax() < 1e-10);
        assert!((f.op.u().adjoint() * f.op.u() - &eye).camax() < 1e-10);
        assert!(f.op.reconstruction_error() < 1e-10);
    }
}
