//! Nyström discretization of the block operators, right-hand sides, far
//! fields and boundary traces.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{CurveLabel, MeshLevel, MeshNode, PanelMesh, PanelSet};
use crate::kernels::{
    far_field_constant, kprime_chord, kprime_raw, phi_raw, single_layer_diagonal, WaveContext,
};
use crate::specfun::{
    differentiation_matrix, gl16, interpolation_matrix, log_product_weights, PANEL_ORDER,
};
use crate::{vec2, Error, Point, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Three-curve system `(I + A)Φ = G` or the two-curve system `(I + B)Φ = G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ThreeCurve,
    TwoCurve,
}

/// Incident field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Incidence {
    /// `u^i = exp(ik d·x)`, `d = (sin θ, −cos θ)`.
    PlaneWave { theta: f64 },
    /// `u^i = Φ_k(x, y)`.
    PointSource { y: Point },
}

impl Incidence {
    /// Plane wave travelling in direction `d` (second component negative).
    pub fn plane_wave_towards(d: Point) -> Result<Self> {
        let n = vec2::norm(d);
        if !(n.is_finite() && (n - 1.0).abs() < 1e-12 && d[1] < 0.0) {
            return Err(Error::Config(format!(
                "incident direction must be a unit vector pointing downwards, got {d:?}"
            )));
        }
        Ok(Incidence::PlaneWave {
            theta: d[0].atan2(-d[1]),
        })
    }
}

/// Direction `d = (sin θ, −cos θ)` of a plane wave.
pub fn plane_wave_direction(theta: f64) -> Point {
    [theta.sin(), -theta.cos()]
}

/// Discretized block operator (without the identity) and right-hand side.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub matrix: DMatrix<Complex64>,
    pub rhs: DVector<Complex64>,
    pub variant: Variant,
}

/// Density values at the nodes of a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySolution {
    pub values: DVector<Complex64>,
    pub level: MeshLevel,
}

/// Far-field pattern sampled at observation angles `φ`, `x̂ = (cos φ, sin φ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldSamples {
    pub k: f64,
    pub incidence: Option<Incidence>,
    pub angles: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl FarFieldSamples {
    pub fn directions(&self) -> Vec<Point> {
        self.angles.iter().map(|a| [a.cos(), a.sin()]).collect()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Variant {
    pub fn of(mesh: &PanelMesh) -> Self {
        if mesh.geometry.aux.is_some() {
            Variant::ThreeCurve
        } else {
            Variant::TwoCurve
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum KernelMode {
    /// Row kernel of `A`: `−2K′` on `Γ_R`, `−2(K′ − K′ʳᵉ)` on the arc,
    /// `−2(K′ + iρS)` on the auxiliary circle.
    System,
    /// Plain single layer `S`.
    SingleLayer,
}

fn row_coefficients(
    mode: KernelMode,
    curve: CurveLabel,
    ctx: &WaveContext,
) -> (f64, Complex64, f64) {
    match mode {
        KernelMode::SingleLayer => (0.0, Complex64::new(1.0, 0.0), 0.0),
        KernelMode::System => match curve {
            CurveLabel::GammaR => (-2.0, ZERO, 0.0),
            CurveLabel::LowerArc => (-2.0, ZERO, 2.0),
            CurveLabel::AuxCircle => (-2.0, -2.0 * I * ctx.rho_imp, 0.0),
        },
    }
}

/// `(|x − y|, ν(x)·(x − y)/|x − y|)`. On a circle both come from the chord
/// formula so corner-refined panels keep full relative precision.
#[inline]
fn pair_geometry(x: &MeshNode, y: &MeshNode) -> (f64, f64) {
    if x.curve == y.curve && x.curve != CurveLabel::GammaR {
        let s = (0.5 * (x.param - y.param)).sin().abs();
        (2.0 * x.speed * s, s)
    } else {
        let d = vec2::sub(x.pos, y.pos);
        let r = vec2::norm(d);
        (r, vec2::dot(x.normal, d) / r)
    }
}

/// `c_kp K′ + c_s S` at a pair of distinct points, with its log coefficient.
#[inline]
fn direct_kernel(
    x: &MeshNode,
    y: &MeshNode,
    k: f64,
    c_kp: f64,
    c_s: Complex64,
) -> (Complex64, Complex64) {
    let (r, c) = pair_geometry(x, y);
    let z = k * r;
    let mut val = ZERO;
    let mut logc = ZERO;
    if c_kp != 0.0 {
        let (j1, y1) = (libm::j1(z), libm::y1(z));
        val += c_kp * (-0.25 * I * k * c * Complex64::new(j1, y1));
        logc += c_kp * k / (2.0 * PI) * j1 * c;
    }
    if c_s != ZERO {
        let (j0, y0) = (libm::j0(z), libm::y0(z));
        val += c_s * (0.25 * I * Complex64::new(j0, y0));
        logc += c_s * (-j0 / (2.0 * PI));
    }
    (val, logc)
}

/// Fills the 16×16 block of the discretized row kernel for target panel `tp`
/// and source panel `sp` into `out` at `(row0, col0)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fill_panel_block(
    set: &PanelSet,
    tp: usize,
    sp: usize,
    ctx: &WaveContext,
    mode: KernelMode,
    out: &mut DMatrix<Complex64>,
    row0: usize,
    col0: usize,
) {
    let k = ctx.k;
    let rule = gl16();
    let tpanel = set.panels[tp];
    let spanel = set.panels[sp];
    let tnodes = &set.nodes[set.panel_nodes(tp)];
    let snodes = &set.nodes[set.panel_nodes(sp)];
    let (c_kp, c_s, c_re) = row_coefficients(mode, tpanel.curve, ctx);
    let near = if tp == sp {
        Some(0.0)
    } else {
        tpanel.neighbour_shift(&spanel)
    };
    let hl = spanel.half_length();
    let (s_diag, s_logc) = single_layer_diagonal(k);
    for (i, x) in tnodes.iter().enumerate() {
        let row = row0 + i;
        match near {
            Some(shift) => {
                let tau0 = spanel.to_ref(x.param + shift);
                let wlog = log_product_weights(rule, tau0);
                for (j, y) in snodes.iter().enumerate() {
                    let (reg, logc) = if tp == sp && i == j {
                        let kp_diag = vec2::dot(x.normal, x.accel) / (4.0 * PI * x.speed * x.speed);
                        let logc = c_s * s_logc;
                        let smooth = c_kp * kp_diag + c_s * s_diag;
                        (smooth + logc * (x.speed * hl).ln(), logc)
                    } else {
                        let (val, logc) = direct_kernel(x, y, k, c_kp, c_s);
                        (val - logc * (y.tau - tau0).abs().ln(), logc)
                    };
                    out[(row, col0 + j)] = hl * y.speed * (rule.weights[j] * reg + wlog[j] * logc);
                }
            }
            None => {
                for (j, y) in snodes.iter().enumerate() {
                    let (val, _) = direct_kernel(x, y, k, c_kp, c_s);
                    out[(row, col0 + j)] = y.weight * val;
                }
            }
        }
        if c_re != 0.0 {
            let xr = vec2::reflect(x.pos);
            let nur = vec2::reflect(x.normal);
            for (j, y) in snodes.iter().enumerate() {
                let v = if y.curve == CurveLabel::LowerArc {
                    // x^re sits at angle −t on the same circle
                    let s = (0.5 * (x.param + y.param)).sin().abs();
                    kprime_chord(2.0 * y.speed * s, s, k)
                } else {
                    let d = vec2::sub(xr, y.pos);
                    let r = vec2::norm(d);
                    kprime_raw(d, r, nur, k)
                };
                out[(row, col0 + j)] += c_re * y.weight * v;
            }
        }
    }
}

/// Discretized row kernel with target panels `rows` and source panels `cols` of `set`.
pub(crate) fn assemble_panels(
    set: &PanelSet,
    ctx: &WaveContext,
    mode: KernelMode,
    rows: &[usize],
    cols: &[usize],
) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(rows.len() * PANEL_ORDER, cols.len() * PANEL_ORDER);
    for (bi, &tp) in rows.iter().enumerate() {
        for (bj, &sp) in cols.iter().enumerate() {
            fill_panel_block(
                set,
                tp,
                sp,
                ctx,
                mode,
                &mut m,
                bi * PANEL_ORDER,
                bj * PANEL_ORDER,
            );
        }
    }
    m
}

/// Discrete `A` (three-curve mesh) or `B` (two-curve mesh) on all nodes of `set`.
pub(crate) fn assemble_operator(set: &PanelSet, ctx: &WaveContext) -> DMatrix<Complex64> {
    let all: Vec<usize> = (0..set.panels.len()).collect();
    assemble_panels(set, ctx, KernelMode::System, &all, &all)
}

/// Discrete block operator `A` on the mesh; `B` when the mesh has no auxiliary circle.
#[allow(non_snake_case)]
pub fn assemble_A(mesh: &PanelMesh, ctx: &WaveContext) -> DMatrix<Complex64> {
    assemble_operator(&mesh.set, ctx)
}

/// `2 ∂(u^i + u^r)/∂ν` for a plane wave at incidence angle `theta`.
#[allow(non_snake_case)]
pub fn assemble_G_planewave(
    mesh: &PanelMesh,
    ctx: &WaveContext,
    theta: f64,
) -> Result<DVector<Complex64>> {
    if !(theta.abs() < 0.5 * PI) {
        return Err(Error::Config(format!(
            "incidence angle must satisfy |θ| < π/2, got {theta}"
        )));
    }
    let k = ctx.k;
    let d = plane_wave_direction(theta);
    let dr = vec2::reflect(d);
    let mut g = DVector::zeros(mesh.len());
    for i in mesh.curve_nodes(CurveLabel::GammaR) {
        let n = &mesh.nodes()[i];
        let ui = Complex64::from_polar(1.0, k * vec2::dot(d, n.pos));
        let ur = Complex64::from_polar(1.0, k * vec2::dot(dr, n.pos));
        g[i] = 2.0 * I * k * (vec2::dot(d, n.normal) * ui + vec2::dot(dr, n.normal) * ur);
    }
    Ok(g)
}

/// `2 ∂(Φ_k(·, y) + Φ_k(·, y^re))/∂ν` for a point source at `y`. Both `y` and
/// `y^re` must be off the surface.
#[allow(non_snake_case)]
pub fn assemble_G_pointsource(
    mesh: &PanelMesh,
    ctx: &WaveContext,
    y: Point,
) -> Result<DVector<Complex64>> {
    let profile = mesh.geometry.profile();
    let yr = vec2::reflect(y);
    for p in [y, yr] {
        if !(p[0].is_finite() && p[1].is_finite()) || (p[1] - profile.value(p[0])).abs() < 1e-12 {
            return Err(Error::Geometry(format!(
                "point source {p:?} lies on the surface"
            )));
        }
    }
    let k = ctx.k;
    let mut g = DVector::zeros(mesh.len());
    for i in mesh.curve_nodes(CurveLabel::GammaR) {
        let n = &mesh.nodes()[i];
        let mut v = ZERO;
        for s in [y, yr] {
            let d = vec2::sub(n.pos, s);
            v += kprime_raw(d, vec2::norm(d), n.normal, k);
        }
        g[i] = 2.0 * v;
    }
    Ok(g)
}

/// Right-hand side for Neumann data `∂u^s/∂ν = f` on the `Γ_R` nodes: `G₁ = −2f`.
#[allow(non_snake_case)]
pub fn assemble_G_boundary_data(mesh: &PanelMesh, f: &[Complex64]) -> Result<DVector<Complex64>> {
    let range = mesh.curve_nodes(CurveLabel::GammaR);
    if f.len() != range.len() {
        return Err(Error::Config(format!(
            "boundary data has {} values, Γ_R has {} nodes",
            f.len(),
            range.len()
        )));
    }
    let mut g = DVector::zeros(mesh.len());
    for (i, v) in range.zip(f) {
        g[i] = -2.0 * v;
    }
    Ok(g)
}

/// `u∞(x̂) = γ Σ_j w_j e^{−ik x̂·y_j} φ_j` over all nodes of `set`.
pub fn far_field_values(
    values: &DVector<Complex64>,
    set: &PanelSet,
    k: f64,
    angles: &[f64],
) -> Vec<Complex64> {
    let gamma = far_field_constant(k);
    angles
        .iter()
        .map(|a| {
            let xh = [a.cos(), a.sin()];
            let s: Complex64 = set
                .nodes
                .iter()
                .zip(values.iter())
                .map(|(n, v)| n.weight * Complex64::from_polar(1.0, -k * vec2::dot(xh, n.pos)) * v)
                .sum();
            gamma * s
        })
        .collect()
}

/// Far field of a density on its mesh.
pub fn far_field(
    density: &DensitySolution,
    mesh: &PanelMesh,
    ctx: &WaveContext,
    angles: &[f64],
) -> Result<FarFieldSamples> {
    if density.values.len() != mesh.len() {
        return Err(Error::State(format!(
            "density has {} values, mesh has {} nodes",
            density.values.len(),
            mesh.len()
        )));
    }
    Ok(FarFieldSamples {
        k: ctx.k,
        incidence: None,
        angles: angles.to_vec(),
        values: far_field_values(&density.values, &mesh.set, ctx.k, angles),
    })
}

/// Single-layer potential `Σ_j Φ_k(x, y_j) w_j φ_j` at a point off the boundary (plain quadrature).
pub fn single_layer_at(values: &DVector<Complex64>, set: &PanelSet, k: f64, x: Point) -> Complex64 {
    set.nodes
        .iter()
        .zip(values.iter())
        .map(|(n, v)| n.weight * phi_raw(vec2::norm(vec2::sub(x, n.pos)), k) * v)
        .sum()
}

fn gl_differentiation() -> &'static DMatrix<f64> {
    static D: OnceLock<DMatrix<f64>> = OnceLock::new();
    D.get_or_init(|| differentiation_matrix(&gl16().nodes))
}

/// Scattered field at the coarse `Γ_R` nodes from a density on the fine mesh:
/// single-layer evaluation at fine `Γ_R` nodes followed by panel-wise
/// degree-15 interpolation back to the coarse nodes.
pub struct BoundaryTraceOperator {
    rows: DMatrix<Complex64>,
    restrict: DMatrix<f64>,
}

impl BoundaryTraceOperator {
    pub fn new(coarse: &PanelMesh, fine: &PanelMesh, ctx: &WaveContext) -> Result<Self> {
        let rule = gl16();
        let fine_gamma = fine.curve_panels(CurveLabel::GammaR);
        let coarse_nodes = &coarse.nodes()[coarse.curve_nodes(CurveLabel::GammaR)];
        // containing fine panel for every coarse node
        let mut owner = Vec::with_capacity(coarse_nodes.len());
        for n in coarse_nodes {
            let p = fine_gamma
                .clone()
                .find(|&p| {
                    let fp = fine.panels()[p];
                    n.param >= fp.a && n.param <= fp.b
                })
                .ok_or_else(|| Error::State("coarse node outside the fine mesh".into()))?;
            owner.push(p);
        }
        let mut needed: Vec<usize> = owner.clone();
        needed.dedup();
        let all: Vec<usize> = (0..fine.panels().len()).collect();
        let rows = assemble_panels(&fine.set, ctx, KernelMode::SingleLayer, &needed, &all);
        let mut restrict = DMatrix::zeros(coarse_nodes.len(), needed.len() * PANEL_ORDER);
        for (i, (n, p)) in coarse_nodes.iter().zip(&owner).enumerate() {
            let slot = needed.iter().position(|q| q == p).expect("owner is listed");
            let tau = fine.panels()[*p].to_ref(n.param);
            let interp = interpolation_matrix(&rule.nodes, &[tau]);
            for j in 0..PANEL_ORDER {
                restrict[(i, slot * PANEL_ORDER + j)] = interp[(0, j)];
            }
        }
        Ok(Self { rows, restrict })
    }

    pub fn apply(&self, fine_density: &DVector<Complex64>) -> DVector<Complex64> {
        let v = &self.rows * fine_density;
        self.restrict.map(|x| Complex64::new(x, 0.0)) * v
    }
}

/// `u^s` at the coarse `Γ_R` nodes computed from a fine-mesh density.
#[allow(non_snake_case)]
pub fn eval_field_on_gammaR(
    density_fine: &DensitySolution,
    mesh_fine: &PanelMesh,
    mesh_coarse: &PanelMesh,
    ctx: &WaveContext,
) -> Result<Vec<Complex64>> {
    if density_fine.values.len() != mesh_fine.len() {
        return Err(Error::State("density does not match the fine mesh".into()));
    }
    let op = BoundaryTraceOperator::new(mesh_coarse, mesh_fine, ctx)?;
    Ok(op.apply(&density_fine.values).iter().copied().collect())
}

/// Arc-length derivative `dg/ds` of nodal values on the `Γ_R` panels of `mesh`,
/// via the degree-15 interpolant of each panel.
pub fn arc_length_derivative(values: &[Complex64], mesh: &PanelMesh) -> Result<Vec<Complex64>> {
    let (du, _) = tangential_derivatives(values, mesh)?;
    Ok(du)
}

/// `(du/ds, d²u/ds²)` at the `Γ_R` nodes from the panel-wise degree-15 interpolant.
pub fn tangential_derivatives(
    values: &[Complex64],
    mesh: &PanelMesh,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let panels = mesh.curve_panels(CurveLabel::GammaR);
    if values.len() != panels.len() * PANEL_ORDER {
        return Err(Error::Config(format!(
            "expected {} Γ_R values, got {}",
            panels.len() * PANEL_ORDER,
            values.len()
        )));
    }
    let d = gl_differentiation();
    let mut du = Vec::with_capacity(values.len());
    let mut d2u = Vec::with_capacity(values.len());
    for (ip, p) in panels.enumerate() {
        let hl = mesh.panels()[p].half_length();
        let u = &values[ip * PANEL_ORDER..(ip + 1) * PANEL_ORDER];
        let ut: Vec<Complex64> = (0..PANEL_ORDER)
            .map(|i| {
                (0..PANEL_ORDER)
                    .map(|j| d[(i, j)] * u[j])
                    .sum::<Complex64>()
                    / hl
            })
            .collect();
        let utt: Vec<Complex64> = (0..PANEL_ORDER)
            .map(|i| {
                (0..PANEL_ORDER)
                    .map(|j| d[(i, j)] * ut[j])
                    .sum::<Complex64>()
                    / hl
            })
            .collect();
        for (i, n) in mesh.set.nodes[mesh.set.panel_nodes(p)].iter().enumerate() {
            let s = n.speed;
            // σ = |x′(t)|, σ′ = x′·x″/σ with x′ = speed · tangent
            let tangent = match n.curve {
                CurveLabel::GammaR => [n.normal[1], -n.normal[0]],
                _ => [-n.normal[1], n.normal[0]],
            };
            let st = vec2::dot(tangent, n.accel);
            du.push(ut[i] / s);
            d2u.push(utt[i] / (s * s) - ut[i] * st / (s * s * s));
        }
    }
    Ok((du, d2u))
}
