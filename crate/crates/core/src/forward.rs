//! End-to-end forward solves and validation experiments.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    build_coarse_mesh, build_curves, build_two_curves, refine_corner_mesh, Geometry, PanelMesh,
    SurfaceProfile,
};
use crate::kernels::{far_field_constant, WaveContext};
use crate::nystrom::{
    assemble_A, assemble_G_planewave, assemble_G_pointsource, far_field_values,
    plane_wave_direction, single_layer_at, BoundaryTraceOperator, DensitySolution, FarFieldSamples,
    Incidence, Variant,
};
use crate::rcip::{compute_R, reconstruct_fine_density, PreconditionedSolver};
use crate::dense::DenseLu;
use crate::{vec2, Error, Point, Result};

type CVec = DVector<Complex64>;

/// `n` equidistant observation angles `(j + ½)π/n` on the upper half circle.
pub fn upper_half_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5) * PI / n as f64).collect()
}

/// Observation directions, either listed (radians) or equidistant on `S¹₊`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observations {
    Angles(Vec<f64>),
    Equidistant { count: usize },
}

impl Observations {
    pub fn angles(&self) -> Vec<f64> {
        match self {
            Observations::Angles(a) => a.clone(),
            Observations::Equidistant { count } => upper_half_angles(*count),
        }
    }
}

fn default_rho() -> f64 {
    1.0
}

fn default_n_sub() -> usize {
    30
}

fn default_variant() -> Variant {
    Variant::ThreeCurve
}

/// Everything needed for one forward solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub profile: SurfaceProfile,
    #[serde(rename = "R")]
    pub radius: f64,
    pub aux_center: Point,
    pub aux_radius: f64,
    pub k: f64,
    #[serde(default = "default_rho")]
    pub rho_imp: f64,
    pub incidence: Incidence,
    pub n_pan: usize,
    #[serde(default = "default_n_sub")]
    pub n_sub: usize,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    pub observations: Observations,
}

impl ForwardConfig {
    pub fn context(&self) -> Result<WaveContext> {
        let ctx = WaveContext::new(self.k, self.rho_imp)?;
        if self.variant == Variant::ThreeCurve {
            ctx.check_aux_radius(self.aux_radius)?;
        }
        Ok(ctx)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        match self.variant {
            Variant::ThreeCurve => build_curves(
                self.profile.clone(),
                self.radius,
                self.aux_center,
                self.aux_radius,
            ),
            Variant::TwoCurve => build_two_curves(self.profile.clone(), self.radius),
        }
    }

    /// Checks every precondition without computing anything expensive.
    pub fn validate(&self) -> Result<()> {
        self.context()?;
        self.geometry()?;
        if self.n_pan < 4 {
            return Err(Error::Config(format!(
                "n_pan must be at least 4, got {}",
                self.n_pan
            )));
        }
        if let Incidence::PlaneWave { theta } = self.incidence {
            if !(theta.abs() < 0.5 * PI) {
                return Err(Error::Config(format!(
                    "incidence angle must satisfy |θ| < π/2, got {theta}"
                )));
            }
        }
        let angles = self.observations.angles();
        if angles.is_empty() {
            return Err(Error::Config("no observation directions".into()));
        }
        if angles.iter().any(|a| !(a.is_finite() && a.sin() > 0.0)) {
            return Err(Error::Config(
                "observation directions must lie on the upper half circle".into(),
            ));
        }
        Ok(())
    }
}

/// Factorized forward problem on one geometry and wave number; right-hand
/// sides can be solved repeatedly.
pub struct ForwardSolver {
    pub ctx: WaveContext,
    pub coarse: PanelMesh,
    pub n_sub: usize,
    pub variant: Variant,
    solver: PreconditionedSolver,
}

impl ForwardSolver {
    pub fn new(geometry: &Geometry, ctx: WaveContext, n_pan: usize, n_sub: usize) -> Result<Self> {
        if let Some(aux) = &geometry.aux {
            if let crate::geometry::CurveShape::Circle { radius, .. } = aux.shape {
                ctx.check_aux_radius(radius)?;
            }
        }
        let coarse = build_coarse_mesh(geometry, n_pan)?;
        let a = assemble_A(&coarse, &ctx);
        let r = compute_R(&coarse, &ctx, n_sub)?;
        let solver = PreconditionedSolver::new(&a, &coarse, r)?;
        Ok(Self {
            ctx,
            variant: Variant::of(&coarse),
            coarse,
            n_sub,
            solver,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.coarse.geometry
    }

    /// Right-hand side `G` for an incident field.
    pub fn rhs(&self, incidence: &Incidence) -> Result<CVec> {
        match *incidence {
            Incidence::PlaneWave { theta } => assemble_G_planewave(&self.coarse, &self.ctx, theta),
            Incidence::PointSource { y } => assemble_G_pointsource(&self.coarse, &self.ctx, y),
        }
    }

    /// `(Φ̃, Φ)` on the coarse mesh.
    pub fn solve(&self, g: &CVec) -> Result<(CVec, CVec)> {
        self.solver.solve(g)
    }

    pub fn far_field(&self, phi: &CVec, angles: &[f64]) -> Vec<Complex64> {
        far_field_values(phi, &self.coarse.set, self.ctx.k, angles)
    }

    pub fn fine_mesh(&self) -> Result<PanelMesh> {
        refine_corner_mesh(&self.coarse, self.n_sub)
    }

    pub fn fine_density(&self, phi_tilde: &CVec, fine: &PanelMesh) -> Result<DensitySolution> {
        reconstruct_fine_density(phi_tilde, &self.solver.r, &self.coarse, fine)
    }

    /// Operator mapping fine densities to `u^s` at the coarse `Γ_R` nodes.
    pub fn trace_operator(&self, fine: &PanelMesh) -> Result<BoundaryTraceOperator> {
        BoundaryTraceOperator::new(&self.coarse, fine, &self.ctx)
    }

    /// Scattered field at a point at least one panel length away from every curve.
    pub fn field_at(&self, phi: &CVec, x: Point) -> Result<Complex64> {
        let longest = (0..self.coarse.panels().len())
            .map(|p| {
                self.coarse.set.nodes[self.coarse.set.panel_nodes(p)]
                    .iter()
                    .map(|n| n.weight)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let nearest = self
            .coarse
            .nodes()
            .iter()
            .map(|n| vec2::norm(vec2::sub(x, n.pos)))
            .fold(f64::INFINITY, f64::min);
        if nearest < longest {
            return Err(Error::Geometry(format!(
                "evaluation point {x:?} is closer than one panel length to the boundary"
            )));
        }
        Ok(single_layer_at(phi, &self.coarse.set, self.ctx.k, x))
    }
}

/// Assembles, compresses and solves one configuration; returns the coarse
/// density `Φ = diag(R, I) Φ̃` and the far field.
pub fn solve_forward(config: &ForwardConfig) -> Result<(DensitySolution, FarFieldSamples)> {
    config.validate()?;
    let ctx = config.context()?;
    let geometry = config.geometry()?;
    let fs = ForwardSolver::new(&geometry, ctx, config.n_pan, config.n_sub)?;
    let g = fs.rhs(&config.incidence)?;
    let (_, phi) = fs.solve(&g)?;
    let angles = config.observations.angles();
    let values = fs.far_field(&phi, &angles);
    Ok((
        DensitySolution {
            values: phi,
            level: fs.coarse.level,
        },
        FarFieldSamples {
            k: ctx.k,
            incidence: Some(config.incidence),
            angles,
            values,
        },
    ))
}

/// Unpreconditioned `(I + A)⁻¹ G` on an arbitrary (typically fine) mesh.
pub fn solve_direct(mesh: &PanelMesh, ctx: &WaveContext, g: &CVec) -> Result<CVec> {
    let n = mesh.len();
    let m = DMatrix::identity(n, n) + assemble_A(mesh, ctx);
    if g.len() != n {
        return Err(Error::State("right-hand side has the wrong length".into()));
    }
    DenseLu::new(&m)
        .solve(g)
        .ok_or_else(|| Error::Numerical("direct system is singular".into()))
}

/// `u∞(x̂; y) = −γ (e^{−ik x̂·y} + e^{−ik x̂·y^re})`, the far field of
/// `−Φ_k(·, y) − Φ_k(·, y^re)`.
pub fn exact_pointsource_farfield(y: Point, k: f64, angles: &[f64]) -> Result<FarFieldSamples> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Config(format!(
            "wave number must be positive, got {k}"
        )));
    }
    let gamma = far_field_constant(k);
    let yr = vec2::reflect(y);
    let values = angles
        .iter()
        .map(|a| {
            let xh = [a.cos(), a.sin()];
            -gamma
                * (Complex64::from_polar(1.0, -k * vec2::dot(xh, y))
                    + Complex64::from_polar(1.0, -k * vec2::dot(xh, yr)))
        })
        .collect();
    Ok(FarFieldSamples {
        k,
        incidence: Some(Incidence::PointSource { y }),
        angles: angles.to_vec(),
        values,
    })
}

/// Relative ℓ² distance between two sample vectors.
pub fn relative_error(approx: &[Complex64], exact: &[Complex64]) -> f64 {
    let num: f64 = approx
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let den: f64 = exact.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

/// The closed form `u^s = −Φ_k(·, y) − Φ_k(·, y^re)` solves the Neumann
/// problem only when `y` and `y^re` both lie strictly below the surface.
pub fn check_closed_form_source(geometry: &Geometry, y: Point) -> Result<()> {
    let h = geometry.profile();
    for p in [y, vec2::reflect(y)] {
        if p[1] >= h.value(p[0]) {
            return Err(Error::Geometry(format!(
                "closed-form point-source solution needs {p:?} strictly below the surface"
            )));
        }
    }
    Ok(())
}

/// Relative far-field error against the closed form for a point-source config.
pub fn pointsource_error(config: &ForwardConfig) -> Result<f64> {
    let Incidence::PointSource { y } = config.incidence else {
        return Err(Error::Config(
            "closed-form comparison needs point-source incidence".into(),
        ));
    };
    check_closed_form_source(&config.geometry()?, y)?;
    let (_, ff) = solve_forward(config)?;
    let exact = exact_pointsource_farfield(y, config.k, &ff.angles)?;
    Ok(relative_error(&ff.values, &exact.values))
}

/// `(n_pan, relative error)` against the closed-form far field.
pub fn convergence_study(config: &ForwardConfig, n_pans: &[usize]) -> Result<Vec<(usize, f64)>> {
    n_pans
        .iter()
        .map(|&n| {
            let mut c = config.clone();
            c.n_pan = n;
            pointsource_error(&c).map(|e| (n, e))
        })
        .collect()
}

/// Mixed reciprocity `u∞(d; y) = γ u(y; −d)` with both sides including the
/// incident and reflected parts. Returns `|LHS − γ u| / |γ u|`.
pub fn check_mixed_reciprocity(solver: &ForwardSolver, y: Point, d: Point) -> Result<f64> {
    let k = solver.ctx.k;
    if !(solver.geometry().is_above_surface(y)) {
        return Err(Error::Geometry(format!(
            "source {y:?} must lie above the surface"
        )));
    }
    if !((vec2::norm(d) - 1.0).abs() < 1e-12 && d[1] > 0.0) {
        return Err(Error::Config(format!(
            "d = {d:?} must be a unit vector in the upper half plane"
        )));
    }
    let gamma = far_field_constant(k);
    let angle = d[1].atan2(d[0]);

    let g = solver.rhs(&Incidence::PointSource { y })?;
    let (_, phi) = solver.solve(&g)?;
    let us_inf = solver.far_field(&phi, &[angle])[0];
    let yr = vec2::reflect(y);
    let lhs = us_inf
        + gamma
            * (Complex64::from_polar(1.0, -k * vec2::dot(d, y))
                + Complex64::from_polar(1.0, -k * vec2::dot(d, yr)));

    let minus_d = [-d[0], -d[1]];
    let inc = Incidence::plane_wave_towards(minus_d)?;
    let Incidence::PlaneWave { theta } = inc else {
        unreachable!()
    };
    let g = solver.rhs(&inc)?;
    let (_, phi) = solver.solve(&g)?;
    let dd = plane_wave_direction(theta);
    let ui = Complex64::from_polar(1.0, k * vec2::dot(dd, y));
    let ur = Complex64::from_polar(1.0, k * vec2::dot(vec2::reflect(dd), y));
    let u = ui + ur + solver.field_at(&phi, y)?;
    let rhs = gamma * u;
    Ok((lhs - rhs).norm() / rhs.norm())
}
