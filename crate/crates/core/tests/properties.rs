use std::f64::consts::{FRAC_PI_2, PI, TAU};

use approx::assert_abs_diff_eq;
use nalgebra::Matrix4;
use proptest::prelude::*;
use quadcav::stability::{adiabatic_matrix, iteration_matrix, np_fluctuation_matrix, poly_from_roots, RootConfig};
use quadcav::threemode::{
    characteristic_polynomial, tm_conserved_quantity, tm_integrate, tm_rhs, tm_spectrum, TMParams, TMState,
};
use quadcav::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// nalgebra's Francis QR stalls on the equal-modulus quartets this matrix
// produces; the complex Schur form with a complex diagonal shift separates
// the moduli and converges.
fn numeric_eigenvalues(m: &[[f64; 4]; 4]) -> Option<Vec<Complex64>> {
    let a = Matrix4::from_fn(|i, j| m[i][j]);
    if let Some(s) = a.try_schur(f64::EPSILON, 10_000) {
        return Some(s.complex_eigenvalues().iter().copied().collect());
    }
    let shift = Complex64::new(0.5, 0.3) * (1.0 + a.amax());
    let c = Matrix4::from_fn(|i, j| Complex64::from(m[i][j])) + Matrix4::identity() * shift;
    let s = c.try_schur(f64::EPSILON, 10_000)?;
    Some(s.unpack().1.diagonal().iter().map(|z| z - shift).collect())
}

fn grid() -> Grid {
    Grid::new(64).unwrap()
}

fn random_field(rng: &mut ChaCha8Rng, grid: &Grid) -> CondensateField {
    let amps = (0..grid.num_points())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    CondensateField::from_amplitudes(amps).normalized(grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn order_parameters_bounded(seed in any::<u64>()) {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = order_parameters(&random_field(&mut rng, &g), &g).unwrap();
        prop_assert!(op.theta1 * op.theta1 + op.theta2 * op.theta2 <= 1.0 + 1e-12);
    }

    #[test]
    fn analytic_spectrum_matches_matrix(
        l1 in 0.0..40.0f64, l2 in 0.0..40.0f64, th in -PI..PI,
        dc in -1000.0..-1.0f64, k in 0.0..1000.0f64,
    ) {
        let p = ModelParams::new(l1, l2, th, dc, k).unwrap();
        let m = adiabatic_matrix(&p).unwrap();
        let eig = numeric_eigenvalues(&m).expect("eigen-solver failed");
        let spec = adiabatic_spectrum(&p).unwrap();
        let mut used = [false; 4];
        for e in eig.iter() {
            let (j, d) = spec.roots.iter().enumerate().filter(|(j, _)| !used[*j])
                .map(|(j, r)| (j, (r - e).norm())).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            used[j] = true;
            prop_assert!(d < 1e-8 * (1.0 + spec.scale()), "{e} vs {:?}", spec.roots);
        }
    }

    #[test]
    fn spectra_closed_under_reflection(
        l1 in 0.0..30.0f64, l2 in 0.0..30.0f64, th in -PI..PI,
        dc in -500.0..-1.0f64, k in 0.0..500.0f64,
    ) {
        let p = ModelParams::new(l1, l2, th, dc, k).unwrap();
        let a = adiabatic_spectrum(&p).unwrap();
        prop_assert!(a.closure_defect() < 1e-9 * (1.0 + a.scale()));
        let b = beyond_adiabatic_roots(&p).unwrap();
        prop_assert!(b.closure_defect() < 1e-6 * (1.0 + b.scale()), "{:?}", b.roots);
    }

    #[test]
    fn criterion_matches_spectrum_off_boundary(
        l1 in 0.0..40.0f64, l2 in 0.0..40.0f64, th in -PI..PI,
        dc in -1000.0..-1.0f64, k in 0.0..1000.0f64,
    ) {
        let p = ModelParams::new(l1, l2, th, dc, k).unwrap();
        prop_assume!(stability::instability_margin(&p).unwrap().abs() > 1e-6);
        prop_assume!(l1 + l2 > 0.0);
        let v = classify_stability(&adiabatic_spectrum(&p).unwrap(), None);
        prop_assert_eq!(instability_criterion(&p).unwrap(), !v.stable);
    }

    #[test]
    fn roots_recovered(re in prop::collection::vec(-5.0..5.0f64, 6), im in prop::collection::vec(-5.0..5.0f64, 6)) {
        let roots: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let sep = roots.iter().enumerate()
            .flat_map(|(i, a)| roots[i + 1..].iter().map(move |b| (a - b).norm()))
            .fold(f64::INFINITY, f64::min);
        prop_assume!(sep > 0.5);
        let found = poly_roots(&poly_from_roots(&roots), &RootConfig::default()).unwrap();
        for r in &roots {
            let d = found.iter().map(|f| (f - r).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-9, "{r}: {d}");
        }
    }

    #[test]
    fn np_three_mode_spectrum_matches_sextic(
        l1 in 0.0..20.0f64, l2 in 0.0..20.0f64, th in -PI..PI,
        dc in -400.0..-20.0f64, k in 0.0..300.0f64,
    ) {
        let p = ModelParams::new(l1, l2, th, dc, k).unwrap();
        let (tm, _) = tm_spectrum(&TMState::default(), &TMParams::from_model(&p)).unwrap();
        let sx = beyond_adiabatic_roots(&p).unwrap();
        for z in &tm.roots {
            let d = sx.roots.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-8 * (1.0 + z.norm()), "{z}: {d}; {:?} vs {:?}", tm.roots, sx.roots);
        }
    }
}

#[test]
fn np_matrix_characteristic_polynomial_is_the_sextic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let p = ModelParams::new(
            rng.gen_range(0.0..30.0),
            rng.gen_range(0.0..30.0),
            rng.gen_range(-PI..PI),
            rng.gen_range(-500.0..-1.0),
            rng.gen_range(0.0..500.0),
        )
        .unwrap();
        let from_matrix = characteristic_polynomial(&np_fluctuation_matrix(&p));
        let closed = stability::sextic_coefficients(&p);
        let scale = closed.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in from_matrix.iter().zip(&closed) {
            // trace-power recursion: low coefficients carry ~eps |A|^6 of cancellation
            assert!((a - b).norm() < 1e-7 * scale, "{a} vs {b}; {p:?}");
        }
    }
}

#[test]
fn iteration_matrix_is_the_linearized_relaxation_step() {
    let g = grid();
    let a0 = 1.0 / TAU.sqrt();
    let c = 1.0 / PI.sqrt();
    let modes = |psi: &CondensateField| -> [f64; 2] {
        let f = psi.amplitudes();
        let proj = |w: &dyn Fn(f64) -> f64| {
            g.integrate(g.positions().zip(f).map(|(x, z)| z.re * w(x))) * c
        };
        [proj(&|x: f64| x.cos()), proj(&|x: f64| x.sin())]
    };
    let field = |u: f64, v: f64| {
        CondensateField::from_fn(&g, |x| Complex64::new(a0 + u * c * x.cos() + v * c * x.sin(), 0.0))
            .normalized(&g)
            .unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let p = ModelParams::new(
            rng.gen_range(0.0..20.0),
            rng.gen_range(0.0..20.0),
            rng.gen_range(-PI..PI),
            rng.gen_range(-400.0..-50.0),
            rng.gen_range(0.0..300.0),
        )
        .unwrap();
        let mut errs = vec![];
        for d_tau in [2e-3, 1e-3] {
            let gamma = iteration_matrix(&p, d_tau).unwrap().gamma;
            let h = 1e-6;
            let mut worst = 0.0f64;
            for (j, (u, v)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
                let plus = modes(&relax_step(&p, &g, &field(u, v), d_tau).unwrap());
                let minus = modes(&relax_step(&p, &g, &field(-u, -v), d_tau).unwrap());
                for i in 0..2 {
                    let fd = (plus[i] - minus[i]) / (2.0 * h);
                    worst = worst.max((fd - gamma[i][j]).abs());
                }
            }
            errs.push(worst);
        }
        let scale = 1.0 + 2.0 * (p.lambda1.powi(2) + p.lambda2.powi(2)) * p.phase_shift().unwrap().r;
        // second order in d_tau: halving the step quarters the defect
        assert!(errs[1] < 2e-6 * scale * scale, "{errs:?}");
        assert!(errs[1] < 0.35 * errs[0] + 1e-9, "{errs:?}");
    }
}

#[test]
fn z2_preserves_residual() {
    let g = grid();
    let cfg = RelaxConfig {
        d_tau: 0.1,
        ..RelaxConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let p = ModelParams::new(
            rng.gen_range(5.0..25.0),
            rng.gen_range(0.0..25.0),
            rng.gen_range(-PI..PI),
            -300.0,
            rng.gen_range(0.0..200.0),
        )
        .unwrap();
        if instability_criterion(&p).unwrap() {
            continue;
        }
        let ss = find_steady_state(&p, &g, &cfg).unwrap();
        let r0 = steady_residual(ss.alpha0, &ss.psi0, &p, &g).unwrap();
        let (a, psi) = apply_z2(ss.alpha0, &ss.psi0, &g);
        let r1 = steady_residual(a, &psi, &p, &g).unwrap();
        assert_abs_diff_eq!(r0.norm(), r1.norm(), epsilon = 1e-10);
        assert_abs_diff_eq!(r0.mu, r1.mu, epsilon = 1e-10);
    }
}

#[test]
fn gauge_duality_preserves_residual() {
    let g = grid();
    let cfg = RelaxConfig {
        d_tau: 0.1,
        ..RelaxConfig::default()
    };
    for (eta, phi, kappa) in [(20.0, 0.4, 0.0), (18.0, 1.2, 0.0), (25.0, 0.3, 200.0), (16.0, 2.6, 200.0)] {
        let p = ModelParams::from_mixing(eta, phi, FRAC_PI_2, -300.0, kappa).unwrap();
        if instability_criterion(&p).unwrap() {
            continue;
        }
        let ss = find_steady_state(&p, &g, &cfg).unwrap();
        let r0 = steady_residual(ss.alpha0, &ss.psi0, &p, &g).unwrap();
        let (a, psi, q) = gauge_to_equal_pumps(ss.alpha0, &ss.psi0, &p, &g).unwrap();
        let r1 = steady_residual(a, &psi, &q, &g).unwrap();
        assert_abs_diff_eq!(r0.norm(), r1.norm(), epsilon = 1e-8);
        assert_abs_diff_eq!(r0.mu, r1.mu, epsilon = 1e-8);
    }
}

#[test]
fn converged_states_satisfy_cavity_equation() {
    let g = grid();
    let cfg = RelaxConfig {
        d_tau: 0.1,
        ..RelaxConfig::default()
    };
    let p = ModelParams::new(20.0, 4.0, 0.7, -300.0, 100.0).unwrap();
    let ss = find_steady_state(&p, &g, &cfg).unwrap();
    assert!(ss.converged);
    let r = steady_residual(ss.alpha0, &ss.psi0, &p, &g).unwrap();
    assert!(r.cavity < 1e-8, "{r:?}");
    assert!(r.atomic < 1e-7, "{r:?}");
}

#[test]
fn swapping_pumps_swaps_density_waves() {
    let g = grid();
    let cfg = ClassifyConfig::default();
    for (a, b) in [(20.0, 5.0), (16.0, 14.0), (30.0, 1.0)] {
        let p = ModelParams::new(a, b, FRAC_PI_2, -300.0, 0.0).unwrap();
        let x = classify_point(&p, &g, &cfg).unwrap();
        let y = classify_point(&p.with_pumps(b, a), &g, &cfg).unwrap();
        assert_eq!(x.label, PhaseLabel::DW1);
        assert_eq!(y.label, PhaseLabel::DW2);
        assert_abs_diff_eq!(x.theta1.abs(), y.theta2.abs(), epsilon = 1e-7);
    }
}

#[test]
fn real_time_conserves_norm_and_closed_energy() {
    let g = grid();
    let p = ModelParams::new(16.0, 9.0, 0.9, -300.0, 0.0).unwrap();
    let psi = seed_state(0.05, -0.03, &g);
    let alpha = CavityAmplitude::new(0.01, 0.0);
    let cfg = EvolveConfig::for_duration(&p, 100.0, 100);
    let traj = evolve_real_time(&psi, alpha, &p, &g, &cfg).unwrap();
    let e0 = closed_energy(alpha, &psi, &p, &g);
    let e1 = closed_energy(traj.final_alpha, &traj.final_psi, &p, &g);
    assert!((e1 - e0).abs() < 1e-6 * e0.abs(), "{e0} -> {e1}");
    for s in &traj.samples {
        assert!((s.norm - 1.0).abs() < 1e-8, "{}", s.norm);
    }
}

#[test]
fn three_mode_conserved_quantity_on_symmetric_line() {
    let p = TMParams::new(12.0, 12.0, FRAC_PI_2, -300.0, 0.0).unwrap();
    let init = TMState::new(Complex64::new(0.2, 0.05), Complex64::new(0.1, -0.02), Complex64::new(0.01, 0.0));
    let c0 = tm_conserved_quantity(&init);
    let traj = tm_integrate(init, &p, 2.5e-5, 4_000_000, 400_000).unwrap();
    for (_, st) in &traj {
        assert!((tm_conserved_quantity(st) - c0).abs() < 1e-8);
        assert!(st.p1() + st.p2() <= 1.0);
    }
}

#[test]
fn single_density_wave_three_mode_states_need_the_critical_angle() {
    // with b2 = 0 and the cavity stationary, F2 = mu2 A2 sqrt(q) and
    // A2 ~ cos(theta + chi): only theta = -chi +- pi/2 lets it vanish
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let kappa = rng.gen_range(0.0..300.0);
        let theta = rng.gen_range(-PI..PI);
        let tp = TMParams::new(12.0, 8.0, theta, -300.0, kappa).unwrap();
        let chi = tp.to_model().unwrap().phase_shift().unwrap().chi;
        let b1 = Complex64::new(0.4, 0.0);
        let q: f64 = 1.0 - 0.16;
        let alpha = q.sqrt() * tp.mu1 * 2.0 * b1.re / Complex64::new(-300.0, kappa);
        let st = TMState::new(b1, Complex64::default(), alpha);
        let d = tm_rhs(&st, &tp).unwrap();
        assert!(d.alpha.norm() < 1e-12);
        let f2 = d.beta2.norm();
        let expect = tp.mu2 * q * 2.0 * tp.mu1 * 0.8 * (theta + chi).cos().abs() / Complex64::new(-300.0, kappa).norm();
        assert_abs_diff_eq!(f2, expect, epsilon = 1e-12);
    }
}
