use num_complex::Complex64;
use roughscat::forward::*;
use roughscat::geometry::*;
use roughscat::kernels::{phi_k, WaveContext};
use roughscat::nystrom::*;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn sine_bump() -> SurfaceProfile {
    SurfaceProfile::closed_form(ProfileKind::SineBump, 1.0).unwrap()
}

fn flat_mesh(n_pan: usize) -> PanelMesh {
    let g = build_curves(SurfaceProfile::flat(1.0), 1.0, [0.0, -0.5], 0.1).unwrap();
    build_coarse_mesh(&g, n_pan).unwrap()
}

#[test]
fn flat_gamma_block_vanishes() {
    let m = flat_mesh(6);
    let a = assemble_A(&m, &WaveContext::new(4.0, 1.0).unwrap());
    let r = m.curve_nodes(CurveLabel::GammaR);
    for i in r.clone() {
        for j in r.clone() {
            assert_eq!(a[(i, j)], Complex64::new(0.0, 0.0));
        }
    }
    assert!(a.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
}

#[test]
fn assembly_is_deterministic() {
    let g = build_curves(sine_bump(), 1.0, [0.0, -0.5], 0.1).unwrap();
    let m = build_coarse_mesh(&g, 6).unwrap();
    let ctx = WaveContext::new(3.0, 1.0).unwrap();
    let a = assemble_A(&m, &ctx);
    let b = assemble_A(&m, &ctx);
    assert!(a.iter().zip(b.iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
}

#[test]
fn two_curve_operator_is_leading_block() {
    let h = SurfaceProfile::closed_form(ProfileKind::Example1, 1.0).unwrap();
    let g3 = build_curves(h.clone(), 1.0, [-0.3, -0.4], 0.1).unwrap();
    let g2 = build_two_curves(h, 1.0).unwrap();
    let ctx = WaveContext::new(3.0, 1.0).unwrap();
    let m3 = build_coarse_mesh(&g3, 6).unwrap();
    let m2 = build_coarse_mesh(&g2, 6).unwrap();
    assert_eq!(Variant::of(&m3), Variant::ThreeCurve);
    assert_eq!(Variant::of(&m2), Variant::TwoCurve);
    let a = assemble_A(&m3, &ctx);
    let b = assemble_A(&m2, &ctx);
    let n = m2.len();
    assert_eq!(b.nrows(), n);
    for i in 0..n {
        for j in 0..n {
            assert_eq!(a[(i, j)], b[(i, j)]);
        }
    }
}

#[test]
fn flat_right_hand_sides_vanish() {
    let m = flat_mesh(6);
    let ctx = WaveContext::new(10.0, 1.0).unwrap();
    for theta in [0.0, 0.7, -1.2] {
        let g = assemble_G_planewave(&m, &ctx, theta).unwrap();
        assert!(g.iter().all(|v| v.norm() < 1e-13));
    }
    let g = assemble_G_pointsource(&m, &ctx, [0.2, 0.3]).unwrap();
    assert!(g.iter().all(|v| v.norm() < 1e-13));
    assert!(assemble_G_planewave(&m, &ctx, 1.6).is_err());
    assert!(assemble_G_pointsource(&m, &ctx, [0.2, 0.0]).is_err());
}

#[test]
fn plane_wave_rhs_symbolic() {
    let h = sine_bump();
    let g = build_curves(h.clone(), 1.0, [0.0, -0.5], 0.1).unwrap();
    let m = build_coarse_mesh(&g, 8).unwrap();
    let k = 7.0;
    let rhs = assemble_G_planewave(&m, &WaveContext::new(k, 1.0).unwrap(), 0.0).unwrap();
    for i in [19usize, 40, 77] {
        let x1 = m.nodes()[i].pos[0];
        let [hv, h1, _] = h.derivs(x1);
        let nu2 = 1.0 / (1.0 + h1 * h1).sqrt();
        let exact = 2.0 * I * k * nu2 * ((I * k * hv).exp() - (-I * k * hv).exp());
        assert!((rhs[i] - exact).norm() < 1e-12 * (1.0 + exact.norm()));
    }
    // entries vanish where h and h′ vanish
    for n in m.curve_nodes(CurveLabel::GammaR) {
        let x1 = m.nodes()[n].pos[0];
        if x1.abs() >= 0.8 {
            assert!(rhs[n].norm() < 1e-13);
        }
    }
    for n in m.curve_nodes(CurveLabel::GammaR).end..m.len() {
        assert_eq!(rhs[n], Complex64::new(0.0, 0.0));
    }
}

#[test]
fn rhs_is_linear_in_the_incident_field() {
    let g = build_curves(sine_bump(), 1.0, [0.0, -0.5], 0.1).unwrap();
    let m = build_coarse_mesh(&g, 6).unwrap();
    let ctx = WaveContext::new(5.0, 1.0).unwrap();
    let a = assemble_G_pointsource(&m, &ctx, [0.1, 0.4]).unwrap();
    let b = assemble_G_pointsource(&m, &ctx, [-0.3, 0.6]).unwrap();
    // the point-source data is a sum of two single-source terms
    let f = |y: [f64; 2]| {
        let mut v = vec![Complex64::new(0.0, 0.0); m.len()];
        for i in m.curve_nodes(CurveLabel::GammaR) {
            let n = &m.nodes()[i];
            let step = 1e-6;
            let xp = [n.pos[0] + step * n.normal[0], n.pos[1] + step * n.normal[1]];
            let xm = [n.pos[0] - step * n.normal[0], n.pos[1] - step * n.normal[1]];
            for s in [y, [y[0], -y[1]]] {
                v[i] += 2.0 * (phi_k(xp, s, 5.0).unwrap() - phi_k(xm, s, 5.0).unwrap()) / (2.0 * step);
            }
        }
        v
    };
    let fa = f([0.1, 0.4]);
    let fb = f([-0.3, 0.6]);
    for i in m.curve_nodes(CurveLabel::GammaR) {
        assert!((a[i] - fa[i]).norm() < 1e-5);
        assert!((a[i] + 2.0 * b[i] - fa[i] - 2.0 * fb[i]).norm() < 1e-5);
    }
}

#[test]
fn far_field_of_zero_density_is_zero() {
    let g = build_curves(sine_bump(), 1.0, [0.0, -0.5], 0.1).unwrap();
    let m = build_coarse_mesh(&g, 4).unwrap();
    let ctx = WaveContext::new(2.0, 1.0).unwrap();
    let d = DensitySolution {
        values: nalgebra::DVector::zeros(m.len()),
        level: m.level,
    };
    let ff = far_field(&d, &m, &ctx, &upper_half_angles(9)).unwrap();
    assert!(ff.values.iter().all(|v| v.norm() == 0.0));
    for dir in ff.directions() {
        assert!((dir[0].hypot(dir[1]) - 1.0).abs() < 1e-15 && dir[1] > 0.0);
    }
    let fine = refine_corner_mesh(&m, 2).unwrap();
    assert!(eval_field_on_gammaR(&d, &fine, &m, &ctx).is_err());
}

#[test]
fn flat_plane_wave_gives_zero_far_field() {
    for k in [1.0, 10.0] {
        let cfg = ForwardConfig {
            profile: SurfaceProfile::flat(1.0),
            radius: 1.0,
            aux_center: [0.0, -0.5],
            aux_radius: 0.1,
            k,
            rho_imp: 1.0,
            incidence: Incidence::PlaneWave { theta: 0.3 },
            n_pan: 10,
            n_sub: 30,
            variant: Variant::ThreeCurve,
            observations: Observations::Equidistant { count: 20 },
        };
        let (d, ff) = solve_forward(&cfg).unwrap();
        assert!(ff.norm() < 1e-10);
        assert!(d.values.iter().all(|v| v.norm() < 1e-12));
    }
}

#[test]
fn boundary_trace_of_point_source() {
    let k = 10.0;
    let y = [0.1, 0.1];
    let g = build_curves(sine_bump(), 1.0, [0.0, -0.5], 0.1).unwrap();
    let fs = ForwardSolver::new(&g, WaveContext::new(k, 1.0).unwrap(), 30, 30).unwrap();
    let (t, _) = fs.solve(&fs.rhs(&Incidence::PointSource { y }).unwrap()).unwrap();
    let fine = fs.fine_mesh().unwrap();
    let dens = fs.fine_density(&t, &fine).unwrap();
    let us = eval_field_on_gammaR(&dens, &fine, &fs.coarse, &fs.ctx).unwrap();
    let nodes = &fs.coarse.nodes()[fs.coarse.curve_nodes(CurveLabel::GammaR)];
    let mut worst = 0.0f64;
    for (n, v) in nodes.iter().zip(&us) {
        let exact = -phi_k(n.pos, y, k).unwrap() - phi_k(n.pos, [y[0], -y[1]], k).unwrap();
        worst = worst.max((v - exact).norm());
    }
    assert!(worst < 1e-6, "max trace error {worst:e}");
}

#[test]
fn tangential_derivatives_on_flat_segment() {
    let m = flat_mesh(5);
    let nodes: Vec<_> = m.nodes()[m.curve_nodes(CurveLabel::GammaR)].to_vec();
    let ones = vec![Complex64::new(2.5, -1.0); nodes.len()];
    let (du, d2u) = tangential_derivatives(&ones, &m).unwrap();
    assert!(du.iter().all(|v| v.norm() < 1e-12));
    // second differentiation amplifies rounding by the squared panel scale
    assert!(d2u.iter().all(|v| v.norm() < 1e-10));
    let cube: Vec<Complex64> = nodes.iter().map(|n| Complex64::new(n.pos[0].powi(3), 0.0)).collect();
    let (du, d2u) = tangential_derivatives(&cube, &m).unwrap();
    for ((n, a), b) in nodes.iter().zip(&du).zip(&d2u) {
        assert!((a.re - 3.0 * n.pos[0].powi(2)).abs() < 1e-12);
        assert!((b.re - 6.0 * n.pos[0]).abs() < 1e-10);
    }
    for k in [1.0, 5.0, 10.0] {
        let d = plane_wave_direction(0.6);
        let u: Vec<Complex64> = nodes.iter().map(|n| (I * k * (d[0] * n.pos[0] + d[1] * n.pos[1])).exp()).collect();
        let du = arc_length_derivative(&u, &m).unwrap();
        for (a, b) in du.iter().zip(&u) {
            assert!((a - I * k * d[0] * b).norm() < 1e-9);
        }
    }
    assert!(tangential_derivatives(&ones[1..], &m).is_err());
}

#[test]
fn even_profile_normal_incidence_symmetry() {
    let cfg = ForwardConfig {
        profile: SurfaceProfile::closed_form(ProfileKind::Example2, 1.0).unwrap(),
        radius: 1.0,
        aux_center: [0.0, -0.5],
        aux_radius: 0.1,
        k: 4.0,
        rho_imp: 1.0,
        incidence: Incidence::PlaneWave { theta: 0.0 },
        n_pan: 16,
        n_sub: 30,
        variant: Variant::ThreeCurve,
        observations: Observations::Equidistant { count: 24 },
    };
    let (_, ff) = solve_forward(&cfg).unwrap();
    let n = ff.values.len();
    for j in 0..n {
        assert!((ff.values[j] - ff.values[n - 1 - j]).norm() < 1e-8);
    }
}
