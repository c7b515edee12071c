use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughscat::forward::*;
use roughscat::geometry::*;
use roughscat::inverse::*;
use roughscat::kernels::WaveContext;
use roughscat::nystrom::*;
use roughscat::rcip::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit_s: f64, f: impl FnOnce() -> Outcome) -> (Outcome, Duration, bool) {
    let t = Instant::now();
    let o = f();
    let dt = t.elapsed();
    let in_time = dt.as_secs_f64() < limit_s;
    (o, dt, in_time)
}

fn sine_bump() -> SurfaceProfile {
    SurfaceProfile::closed_form(ProfileKind::SineBump, 1.0).unwrap()
}

fn example1() -> SurfaceProfile {
    SurfaceProfile::closed_form(ProfileKind::Example1, 1.0).unwrap()
}

fn flat_null() -> Outcome {
    // one factorization per k serves all incidence angles
    let g = build_curves(SurfaceProfile::flat(1.0), 1.0, [0.0, -0.5], 0.1).unwrap();
    let angles = upper_half_angles(64);
    let mut worst = 0.0f64;
    for k in [1.0, 10.0] {
        let fs = ForwardSolver::new(&g, WaveContext::new(k, 1.0).unwrap(), 10, 30).unwrap();
        for theta in [0.0, PI / 4.0, -PI / 4.0] {
            let (_, phi) = fs.solve(&fs.rhs(&Incidence::PlaneWave { theta }).unwrap()).unwrap();
            worst = worst.max(fs.far_field(&phi, &angles).iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("max |u∞| = {worst:.3e} (< 1e-10)"),
    }
}

fn point_source() -> Outcome {
    // the closed form holds for y and its mirror image below Γ; h(0.1) > 0.1
    let cfg = ForwardConfig {
        profile: sine_bump(),
        radius: 1.0,
        aux_center: [0.0, -0.5],
        aux_radius: 0.1,
        k: 10.0,
        rho_imp: 1.0,
        incidence: Incidence::PointSource { y: [0.1, 0.1] },
        n_pan: 30,
        n_sub: 30,
        variant: Variant::ThreeCurve,
        observations: Observations::Equidistant { count: 5 },
    };
    let e = pointsource_error(&cfg).unwrap();
    Outcome {
        pass: e < 1e-8,
        detail: format!("k = 10, n_pan = 30: relative far-field error {e:.3e} (< 1e-8)"),
    }
}

fn rcip_oracle() -> Outcome {
    let k = 5.0;
    let n_sub = 3;
    let g = build_curves(sine_bump(), 1.0, [0.0, -0.5], 0.1).unwrap();
    let ctx = WaveContext::new(k, 1.0).unwrap();
    let fs = ForwardSolver::new(&g, ctx, 10, n_sub).unwrap();
    let coarse = fs.coarse.clone();
    let r = compute_R(&coarse, &ctx, n_sub).unwrap();
    let mut worst_r = 0.0f64;
    for c in 0..2 {
        let direct: DMatrix<Complex64> = direct_corner_inverse(&coarse, &ctx, n_sub, c).unwrap();
        worst_r = worst_r.max((&r.corners[c].r - &direct).norm() / r.corners[c].r.norm());
    }
    let fine = refine_corner_mesh(&coarse, n_sub).unwrap();
    let theta = 0.4;
    let (_, phi) = fs.solve(&assemble_G_planewave(&coarse, &ctx, theta).unwrap()).unwrap();
    let direct = solve_direct(&fine, &ctx, &assemble_G_planewave(&fine, &ctx, theta).unwrap()).unwrap();
    let angles = upper_half_angles(32);
    let e = relative_error(
        &far_field_values(&phi, &coarse.set, k, &angles),
        &far_field_values(&direct, &fine.set, k, &angles),
    );
    Outcome {
        pass: worst_r < 1e-10 && e < 1e-9,
        detail: format!("‖R − R_direct‖/‖R‖ = {worst_r:.3e} (< 1e-10), far field {e:.3e} (< 1e-9)"),
    }
}

fn reciprocity() -> Outcome {
    let g = build_curves(example1(), 1.0, [-0.3, -0.4], 0.1).unwrap();
    let fs = ForwardSolver::new(&g, WaveContext::new(5.0, 1.0).unwrap(), 24, 30).unwrap();
    let mut worst = 0.0f64;
    for y in [[-0.4, 1.3], [0.3, 1.2], [0.4, 1.0]] {
        for a in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
            worst = worst.max(check_mixed_reciprocity(&fs, y, [a.cos(), a.sin()]).unwrap());
        }
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!("k = 5, 3×3 grid: max discrepancy {worst:.3e} (< 1e-6)"),
    }
}

fn frechet_fd() -> Outcome {
    let k = 3.0;
    let m = 20;
    let n_pan = 32;
    let h = example1().with_coefficients(vec![0.0; m]).unwrap();
    let d = direction_from_angle(-PI / 3.0);
    let angles = upper_half_angles(32);
    let base = farfield_operator(&h, k, d, &angles, n_pan, 30).unwrap().values;
    let jac = frechet_jacobian(&h, k, d, &angles, n_pan, 30).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let l2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (mut worst, mut worst_ratio, mut central_gain) = (0.0f64, f64::INFINITY, f64::INFINITY);
    for _ in 0..5 {
        let mut v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        let jv: Vec<Complex64> = (0..angles.len())
            .map(|j| (0..m).map(|i| jac[(j, i)] * v[i]).sum())
            .collect();
        let shifted = |eps: f64| {
            let c: Vec<f64> = v.iter().map(|x| eps * x).collect();
            farfield_operator(&h.with_coefficients(c).unwrap(), k, d, &angles, n_pan, 30)
                .unwrap()
                .values
        };
        let err = |eps: f64| {
            let f = shifted(eps);
            let r: Vec<Complex64> = (0..f.len()).map(|j| f[j] - base[j] - jv[j] * eps).collect();
            l2(&r) / (eps * l2(&jv))
        };
        let (e1, e2) = (err(1e-4), err(1e-5));
        worst = worst.max(e1);
        worst_ratio = worst_ratio.min(e1 / e2);
        let (fp, fm) = (shifted(1e-4), shifted(-1e-4));
        let r: Vec<Complex64> = (0..fp.len()).map(|j| (fp[j] - fm[j]) / 2.0 - jv[j] * 1e-4).collect();
        central_gain = central_gain.min(e1 / (l2(&r) / (1e-4 * l2(&jv))));
    }
    Outcome {
        pass: worst <= 1e-2 && worst_ratio >= 3.0,
        detail: format!(
            "k = 3, n_pan = {n_pan}: max FD error {worst:.3e} (<= 1e-2), min reduction {worst_ratio:.2} (>= 3); central differences gain >= {central_gain:.2}x"
        ),
    }
}

fn two_vs_three_curves() -> Outcome {
    let h = example1();
    let ctx = WaveContext::new(3.0, 1.0).unwrap();
    let angles = upper_half_angles(32);
    let mut worst = 0.0f64;
    for theta in [0.0, -PI / 6.0, PI / 6.0] {
        let inc = Incidence::PlaneWave { theta };
        let mut f = Vec::new();
        for g in [
            build_curves(h.clone(), 1.0, [-0.3, -0.4], 0.1).unwrap(),
            build_two_curves(h.clone(), 1.0).unwrap(),
        ] {
            let fs = ForwardSolver::new(&g, ctx, 20, 30).unwrap();
            let (_, phi) = fs.solve(&fs.rhs(&inc).unwrap()).unwrap();
            f.push(fs.far_field(&phi, &angles));
        }
        worst = worst.max(relative_error(&f[1], &f[0]));
    }
    Outcome {
        pass: worst < 1e-8,
        detail: format!("k = 3: relative difference {worst:.3e} (< 1e-8)"),
    }
}

fn desk_reconstruction() -> Outcome {
    let truth = example1();
    let setup = SynthesisSetup {
        radius: 1.0,
        aux_center: [-0.3, -0.4],
        aux_radius: 0.1,
        rho_imp: 1.0,
        n_sub: 30,
        panels: PanelRule::SYNTHESIS,
    };
    let ks = [1.0, 2.0, 3.0, 4.0, 5.0];
    let meas = synthesize_measurements(&truth, &ks, &example_directions(), 200, 0.05, 7, &setup).unwrap();
    let settings = ReconstructionSettings {
        radius: 1.0,
        basis_count: 20,
        rho_lm: 0.8,
        tau: 1.5,
        max_iter_per_k: 20,
        n_sub: 30,
        panels: PanelRule::INVERSION,
        initial: Vec::new(),
    };
    let t = reconstruct(&meas, &settings).unwrap();
    let (l2, linf) = profile_errors(&truth, &t.final_profile(1.0).unwrap(), 1.0);
    let err5 = t.stages.last().unwrap().err_k;
    let exits_ok = t.stages.iter().all(|s| s.converged || s.iterations == settings.max_iter_per_k);
    let (mut down, mut steps) = (0, 0);
    for w in t.records.windows(2) {
        if w[1].k == w[0].k {
            steps += 1;
            down += (w[1].err_k <= w[0].err_k) as usize;
        }
    }
    for s in &t.stages {
        println!(
            "    k = {}: {} iterations, Err_k = {:.4e}, converged = {}",
            s.k, s.iterations, s.err_k, s.converged
        );
    }
    println!("    Err_k non-increasing in {down}/{steps} steps; L2 profile error {l2:.3e}");
    Outcome {
        pass: linf < 0.05 && err5 < 0.075 && exits_ok,
        detail: format!("L∞ = {linf:.3e} (< 0.05), Err_5 = {err5:.4e} (< 0.075)"),
    }
}

fn spline_suite() -> Outcome {
    let mut ok = (quartic_bspline(0.0)[0] - 115.0 / 192.0).abs() < 1e-15;
    // support (−2.5, 2.5)
    let support_ok = [-2.5, 2.5, -2.7, 3.1].iter().all(|&t| quartic_bspline(t)[0] == 0.0)
        && [-2.49, -1.0, 0.0, 2.49].iter().all(|&t| quartic_bspline(t)[0] > 0.0);
    ok &= support_ok;
    let mut pu = 0.0f64;
    for i in 0..100 {
        let t = -5.0 + 10.0 * i as f64 / 99.0;
        let s: f64 = (-8..=8).map(|j| quartic_bspline(t - j as f64)[0]).sum();
        pu = pu.max((s - 1.0).abs());
    }
    ok &= pu < 1e-12;
    // third derivative from finite differences of φ″ on either side of each knot
    let h = 1e-4;
    let mut jump = 0.0f64;
    for j in -3..=2 {
        let t = j as f64 + 0.5;
        let d2 = |x: f64| quartic_bspline(x)[2];
        let left = (d2(t) - d2(t - h)) / h;
        let right = (d2(t + h) - d2(t)) / h;
        for d in 0..3 {
            jump = jump.max((quartic_bspline(t - 1e-12)[d] - quartic_bspline(t + 1e-12)[d]).abs());
        }
        jump = jump.max((left - right).abs() / 10.0);
    }
    ok &= jump < 1e-3;
    Outcome {
        pass: ok,
        detail: format!("φ(0) = 115/192, support (−2.5, 2.5), partition of unity {pu:.1e}, C³ jump {jump:.1e}"),
    }
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, f64, fn() -> Outcome)> = vec![
        ("flat-surface null field", 5.0, flat_null),
        ("point-source closed form", 30.0, point_source),
        ("RCIP oracle equivalence", 30.0, rcip_oracle),
        ("mixed reciprocity", 60.0, reciprocity),
        ("Fréchet derivative FD check", 60.0, frechet_fd),
        ("two-curve / three-curve equivalence", 20.0, two_vs_three_curves),
        ("desk-scale reconstruction", 600.0, desk_reconstruction),
        ("spline basis", 1.0, spline_suite),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let (o, dt, in_time) = timed(limit, f);
        let pass = o.pass && in_time;
        println!(
            "ACCEPTANCE {} {}: {name}: {}; {:.2} s (< {limit} s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            dt.as_secs_f64()
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

// Full-scale frequency-continuation runs of the three bundled inverse examples.
// Not asserted quantitatively beyond the stopping rule and, for the multi-scale
// profile, the stage-wise decrease of the L² profile error. Takes hours.
#[test]
#[ignore]
fn extended_examples() {
    let dirs = example_directions();
    let cases = [
        (ProfileKind::Example1, [-0.3, -0.4], 0.1, 13),
        (ProfileKind::Example2, [0.0, -0.6], 0.05, 33),
        (ProfileKind::Example3, [0.0, -0.4], 0.05, 36),
    ];
    for (kind, aux_center, aux_radius, n) in cases {
        let truth = SurfaceProfile::closed_form(kind, 1.0).unwrap();
        let setup = SynthesisSetup {
            radius: 1.0,
            aux_center,
            aux_radius,
            rho_imp: 1.0,
            n_sub: 30,
            panels: PanelRule::SYNTHESIS,
        };
        let ks: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let meas = synthesize_measurements(&truth, &ks, &dirs, 200, 0.05, 7, &setup).unwrap();
        let settings = ReconstructionSettings {
            radius: 1.0,
            basis_count: 40,
            rho_lm: 0.8,
            tau: 1.5,
            max_iter_per_k: 20,
            n_sub: 30,
            panels: PanelRule::INVERSION,
            initial: Vec::new(),
        };
        let t = reconstruct(&meas, &settings).unwrap();
        let mut l2s = Vec::new();
        for s in &t.stages {
            assert!(s.converged || s.iterations == settings.max_iter_per_k);
            let app = SurfaceProfile::spline(1.0, s.coefficients.clone()).unwrap();
            let (l2, linf) = profile_errors(&truth, &app, 1.0);
            println!("{kind:?} k = {}: Err_k = {:.4e}, L2 = {l2:.4e}, L∞ = {linf:.4e}", s.k, s.err_k);
            l2s.push(l2);
        }
        if kind == ProfileKind::Example3 {
            let down = l2s.windows(2).filter(|w| w[1] <= w[0]).count();
            assert!(down as f64 >= 0.75 * (l2s.len() - 1) as f64, "{down}/{}", l2s.len() - 1);
        }
    }
}
