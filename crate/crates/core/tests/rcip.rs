use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use roughscat::forward::*;
use roughscat::geometry::*;
use roughscat::kernels::WaveContext;
use roughscat::nystrom::*;
use roughscat::rcip::*;

fn sine_bump_geometry() -> Geometry {
    let h = SurfaceProfile::closed_form(ProfileKind::SineBump, 1.0).unwrap();
    build_curves(h, 1.0, [0.0, -0.5], 0.1).unwrap()
}

fn rel(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn prolongation_reproduces_polynomials() {
    let g = sine_bump_geometry();
    let coarse = build_coarse_mesh(&g, 6).unwrap();
    let fine = refine_corner_mesh(&coarse, 4).unwrap();
    let pp = prolongation(&coarse.set, &fine.set).unwrap();
    let fine_owner = |fp: &Panel| {
        coarse
            .panels()
            .iter()
            .position(|c| c.curve == fp.curve && fp.a >= c.a && fp.b <= c.b)
            .unwrap()
    };
    for deg in [0, 3, 15] {
        // p(τ) = τ^deg in the reference coordinate of each coarse panel
        let v = DVector::from_iterator(coarse.len(), coarse.nodes().iter().map(|n| n.tau.powi(deg)));
        let w = &pp.p * v;
        for (fi, fp) in fine.panels().iter().enumerate() {
            let cp = coarse.panels()[fine_owner(fp)];
            for j in fine.set.panel_nodes(fi) {
                let tau = cp.to_ref(fine.nodes()[j].param);
                assert!((w[j] - tau.powi(deg)).abs() < 1e-11, "degree {deg}");
            }
        }
    }
    let id = pp.pw.transpose() * &pp.p;
    let err = (&id - DMatrix::<f64>::identity(coarse.len(), coarse.len())).abs().max();
    assert!(err < 1e-11, "P_W^T P - I = {err:e}");
}

#[test]
fn star_and_circ_reassemble_the_operator() {
    let g = sine_bump_geometry();
    let m = build_coarse_mesh(&g, 8).unwrap();
    let a = assemble_A(&m, &WaveContext::new(3.0, 1.0).unwrap());
    let s = kernel_split(&a, &m).unwrap();
    assert_eq!(&s.star + &s.circ, a);
    let zones = star_zones(&m).unwrap();
    for z in &zones {
        assert_eq!(z.panels.len(), 4);
        assert_eq!(z.nodes.len(), 64);
    }
    let nonzero = s.star.iter().filter(|v| v.norm() != 0.0).count();
    assert!(nonzero <= 2 * 64 * 64);
    for i in m.curve_nodes(CurveLabel::AuxCircle) {
        for j in 0..m.len() {
            assert_eq!(s.star[(i, j)], Complex64::new(0.0, 0.0));
            assert_eq!(s.star[(j, i)], Complex64::new(0.0, 0.0));
        }
    }
    for z in &zones {
        for &i in &z.nodes {
            for &j in &z.nodes {
                assert_eq!(s.circ[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
    }
}

#[test]
fn zero_levels_invert_the_star_block() {
    let g = sine_bump_geometry();
    let m = build_coarse_mesh(&g, 8).unwrap();
    let ctx = WaveContext::new(3.0, 1.0).unwrap();
    let a = assemble_A(&m, &ctx);
    let r = compute_R(&m, &ctx, 0).unwrap();
    for c in &r.corners {
        let block = DMatrix::from_fn(64, 64, |i, j| a[(c.zone.nodes[i], c.zone.nodes[j])]);
        let inv = (DMatrix::identity(64, 64) + block).try_inverse().unwrap();
        assert!(rel(&c.r, &inv) < 1e-13);
    }
}

#[test]
fn compressed_inverse_is_identity_off_the_corners() {
    let g = sine_bump_geometry();
    let m = build_coarse_mesh(&g, 8).unwrap();
    let r = compute_R(&m, &WaveContext::new(5.0, 1.0).unwrap(), 6).unwrap();
    let d = r.dense();
    let mut in_star = vec![false; m.len()];
    for c in &r.corners {
        for &i in &c.zone.nodes {
            in_star[i] = true;
        }
    }
    for i in 0..m.len() {
        for j in 0..m.len() {
            if !(in_star[i] && in_star[j]) {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_eq!(d[(i, j)], Complex64::new(e, 0.0));
            }
        }
    }
}

#[test]
fn recursion_matches_direct_fine_inverse() {
    let g = sine_bump_geometry();
    let m = build_coarse_mesh(&g, 8).unwrap();
    let ctx = WaveContext::new(5.0, 1.0).unwrap();
    for n_sub in [1usize, 2, 3] {
        let r = compute_R(&m, &ctx, n_sub).unwrap();
        for c in 0..2 {
            let direct = direct_corner_inverse(&m, &ctx, n_sub, c).unwrap();
            let e = rel(&r.corners[c].r, &direct);
            assert!(e < 1e-10, "n_sub = {n_sub}, corner {c}: {e:e}");
        }
    }
}

#[test]
fn recursion_has_converged_by_thirty_levels() {
    let g = sine_bump_geometry();
    let ctx = WaveContext::new(5.0, 1.0).unwrap();
    let angles = upper_half_angles(16);
    let inc = Incidence::PlaneWave { theta: 0.4 };
    let field = |n_sub: usize| {
        let fs = ForwardSolver::new(&g, ctx, 10, n_sub).unwrap();
        let (_, phi) = fs.solve(&fs.rhs(&inc).unwrap()).unwrap();
        fs.far_field(&phi, &angles)
    };
    let e = relative_error(&field(25), &field(30));
    assert!(e < 1e-12, "far fields at n_sub 25 and 30 differ by {e:e}");

    // the matrix itself converges linearly in the innermost panel length
    let m = build_coarse_mesh(&g, 10).unwrap();
    let rs: Vec<_> = [20usize, 25, 30].iter().map(|&n| compute_R(&m, &ctx, n).unwrap()).collect();
    for c in 0..2 {
        let d1 = rel(&rs[0].corners[c].r, &rs[1].corners[c].r);
        let d2 = rel(&rs[1].corners[c].r, &rs[2].corners[c].r);
        assert!(d2 < 1e-9 && d1 / d2 > 20.0, "corner {c}: {d1:e}, {d2:e}");
    }
}

#[test]
fn deep_refinement_is_rejected() {
    let g = sine_bump_geometry();
    let m = build_coarse_mesh(&g, 30).unwrap();
    let ctx = WaveContext::new(5.0, 1.0).unwrap();
    assert!(matches!(compute_R(&m, &ctx, 45), Err(roughscat::Error::Config(_))));
}

fn fine_oracle(k: f64, n_sub: usize) -> (PanelMesh, PanelMesh, ForwardSolver, DVector<Complex64>, DVector<Complex64>) {
    let g = sine_bump_geometry();
    let ctx = WaveContext::new(k, 1.0).unwrap();
    let fs = ForwardSolver::new(&g, ctx, 10, n_sub).unwrap();
    let coarse = fs.coarse.clone();
    let fine = refine_corner_mesh(&coarse, n_sub).unwrap();
    let theta = 0.4;
    let (tilde, _) = fs.solve(&assemble_G_planewave(&coarse, &ctx, theta).unwrap()).unwrap();
    let direct = solve_direct(&fine, &ctx, &assemble_G_planewave(&fine, &ctx, theta).unwrap()).unwrap();
    (coarse, fine, fs, tilde, direct)
}

#[test]
fn preconditioned_solve_matches_direct_fine_solve() {
    let angles = upper_half_angles(16);
    for k in [1.0, 5.0, 10.0] {
        for n_sub in [1usize, 3] {
            let (coarse, fine, fs, tilde, direct) = fine_oracle(k, n_sub);
            let phi = fs.solve(&assemble_G_planewave(&coarse, &fs.ctx, 0.4).unwrap()).unwrap().1;
            let r = compute_R(&coarse, &fs.ctx, n_sub).unwrap();
            assert!((r.apply(&tilde) - &phi).norm() <= 1e-13 * phi.norm());
            let a = far_field_values(&phi, &coarse.set, k, &angles);
            let b = far_field_values(&direct, &fine.set, k, &angles);
            let e = relative_error(&a, &b);
            assert!(e < 1e-9, "k = {k}, n_sub = {n_sub}: {e:e}");
        }
    }
}

#[test]
fn reconstructed_fine_density_reproduces_the_field() {
    let (_coarse, fine, fs, tilde, direct) = fine_oracle(5.0, 3);
    let dens = fs.fine_density(&tilde, &fine).unwrap();
    assert_eq!(dens.level, MeshLevel::Fine { n_sub: 3 });
    for x in [[0.0, 1.5], [0.7, 1.2], [-1.4, 0.6], [0.0, -1.6]] {
        let a = single_layer_at(&dens.values, &fine.set, 5.0, x);
        let b = single_layer_at(&direct, &fine.set, 5.0, x);
        assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()), "{x:?}: {a} vs {b}");
    }
    let zero = fs.fine_density(&DVector::zeros(tilde.len()), &fine).unwrap();
    assert!(zero.values.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn zero_level_reconstruction_is_r_times_tilde() {
    let g = sine_bump_geometry();
    let ctx = WaveContext::new(3.0, 1.0).unwrap();
    let coarse = build_coarse_mesh(&g, 8).unwrap();
    let r = compute_R(&coarse, &ctx, 0).unwrap();
    let tilde = DVector::from_fn(coarse.len(), |i, _| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
    let fine = refine_corner_mesh(&coarse, 0).unwrap();
    let d = reconstruct_fine_density(&tilde, &r, &coarse, &fine).unwrap();
    let expect = r.apply(&tilde);
    assert!((d.values - expect).norm() < 1e-14 * tilde.norm());
    let wrong = refine_corner_mesh(&coarse, 2).unwrap();
    assert!(reconstruct_fine_density(&tilde, &r, &coarse, &wrong).is_err());
}

#[test]
fn flat_surface_gives_zero_transformed_density() {
    let g = build_curves(SurfaceProfile::flat(1.0), 1.0, [0.0, -0.5], 0.1).unwrap();
    let ctx = WaveContext::new(4.0, 1.0).unwrap();
    let m = build_coarse_mesh(&g, 8).unwrap();
    let system = BlockSystem {
        matrix: assemble_A(&m, &ctx),
        rhs: assemble_G_planewave(&m, &ctx, 0.5).unwrap(),
        variant: Variant::ThreeCurve,
    };
    let r = compute_R(&m, &ctx, 30).unwrap();
    let (t, phi) = solve_preconditioned(&system, &m, &r).unwrap();
    assert!(t.iter().chain(phi.iter()).all(|v| v.norm() < 1e-13));
}

#[test]
fn corner_relabelling_symmetry() {
    // even profile, aux disk on the axis: θ → −θ mirrors the far field
    let h = SurfaceProfile::closed_form(ProfileKind::Example2, 1.0).unwrap();
    let g = build_curves(h, 1.0, [0.0, -0.5], 0.1).unwrap();
    let fs = ForwardSolver::new(&g, WaveContext::new(5.0, 1.0).unwrap(), 16, 30).unwrap();
    let angles = upper_half_angles(20);
    let mirrored: Vec<f64> = angles.iter().map(|a| std::f64::consts::PI - a).collect();
    let (_, p1) = fs.solve(&fs.rhs(&Incidence::PlaneWave { theta: 0.5 }).unwrap()).unwrap();
    let (_, p2) = fs.solve(&fs.rhs(&Incidence::PlaneWave { theta: -0.5 }).unwrap()).unwrap();
    let a = fs.far_field(&p1, &angles);
    let b = fs.far_field(&p2, &mirrored);
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).norm() < 1e-10 * scale.max(1.0));
    }
}
