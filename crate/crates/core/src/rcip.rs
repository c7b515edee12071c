//! Recursively compressed inverse preconditioning for the two corners
//! `x_A = (−R, 0)` and `x_B = (R, 0)` where `Γ_R` meets `∂B_R⁻`.
//!
//! Each corner owns a star neighbourhood of four coarse panels: the two
//! panels nearest the corner on `Γ_R` and on the arc (64 nodes). Local
//! ordering is always `Γ_R` side first, then the arc side, each by increasing
//! parameter.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::geometry::{
    check_refinement_depth, dyadic_breaks, CurveLabel, MeshLevel, Panel, PanelMesh, PanelSet,
};
use crate::kernels::WaveContext;
use crate::nystrom::{
    assemble_operator, assemble_panels, BlockSystem, DensitySolution, KernelMode,
};
use crate::specfun::{gl16, interpolation_matrix, PANEL_ORDER};
use crate::dense::DenseLu;
use crate::{Error, Result};

type CMat = DMatrix<Complex64>;

/// Polynomial prolongation `P` from a coarse panel set to a refinement of it,
/// and the weighted version `P_W = W_fine P W_coarse⁻¹` (parameter weights).
#[derive(Clone, Debug)]
pub struct ProlongationPair {
    pub p: DMatrix<f64>,
    pub pw: DMatrix<f64>,
}

/// Panel-wise degree-15 interpolation from `coarse` to `fine`, where every
/// fine panel lies inside one coarse panel of the same curve.
pub fn prolongation(coarse: &PanelSet, fine: &PanelSet) -> Result<ProlongationPair> {
    let rule = gl16();
    let mut p = DMatrix::zeros(fine.len(), coarse.len());
    for (fi, fp) in fine.panels.iter().enumerate() {
        let ci = coarse
            .panels
            .iter()
            .position(|cp| {
                let tol = 1e-9 * cp.half_length();
                cp.curve == fp.curve && fp.a >= cp.a - tol && fp.b <= cp.b + tol
            })
            .ok_or_else(|| {
                Error::State(format!("fine panel {fp:?} is not inside the coarse panels"))
            })?;
        let cp = coarse.panels[ci];
        let taus: Vec<f64> = fine.nodes[fine.panel_nodes(fi)]
            .iter()
            .map(|n| cp.to_ref(n.param))
            .collect();
        let m = interpolation_matrix(&rule.nodes, &taus);
        let (r0, c0) = (fi * PANEL_ORDER, ci * PANEL_ORDER);
        p.view_mut((r0, c0), (PANEL_ORDER, PANEL_ORDER))
            .copy_from(&m);
    }
    let mut pw = p.clone();
    for i in 0..fine.len() {
        for j in 0..coarse.len() {
            pw[(i, j)] *= fine.nodes[i].param_weight / coarse.nodes[j].param_weight;
        }
    }
    Ok(ProlongationPair { p, pw })
}

/// Star neighbourhood of one corner on the coarse mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct StarZone {
    /// 0 for `x_A`, 1 for `x_B`.
    pub corner: usize,
    /// Coarse panel indices in local order.
    pub panels: Vec<usize>,
    /// Coarse node indices in local order.
    pub nodes: Vec<usize>,
}

/// The two star neighbourhoods; they are disjoint only for `n_pan ≥ 4`.
pub fn star_zones(mesh: &PanelMesh) -> Result<[StarZone; 2]> {
    if mesh.level != MeshLevel::Coarse {
        return Err(Error::State(
            "star neighbourhoods are defined on the coarse mesh".into(),
        ));
    }
    if mesh.n_pan < 4 {
        return Err(Error::Config(format!(
            "corner compression needs n_pan >= 4, got {}",
            mesh.n_pan
        )));
    }
    let g = mesh.curve_panels(CurveLabel::GammaR);
    let a = mesh.curve_panels(CurveLabel::LowerArc);
    let zone = |corner: usize, panels: Vec<usize>| StarZone {
        corner,
        nodes: panels
            .iter()
            .flat_map(|&p| mesh.set.panel_nodes(p))
            .collect(),
        panels,
    };
    Ok([
        zone(0, vec![g.start, g.start + 1, a.start, a.start + 1]),
        zone(1, vec![g.end - 2, g.end - 1, a.end - 2, a.end - 1]),
    ])
}

/// `A = A* + A°`: `A*` keeps only interactions inside one star neighbourhood.
#[derive(Clone, Debug)]
pub struct KernelSplit {
    pub star: CMat,
    pub circ: CMat,
}

pub fn kernel_split(a: &CMat, mesh: &PanelMesh) -> Result<KernelSplit> {
    let zones = star_zones(mesh)?;
    let mut star = CMat::zeros(a.nrows(), a.ncols());
    let mut circ = a.clone();
    for z in &zones {
        for &i in &z.nodes {
            for &j in &z.nodes {
                star[(i, j)] = a[(i, j)];
                circ[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(KernelSplit { star, circ })
}

/// Parameter of the point at distance `s` (in parameter) from the corner on a side.
fn side_param(corner_param: f64, outward: f64, s: f64) -> f64 {
    corner_param + outward * s
}

/// Corner parameter, direction away from the corner, and coarse panel length on both sides.
/// Per side: curve, corner parameter, direction away from the corner, and the
/// lengths of the two coarse panels nearest the corner.
fn corner_sides(mesh: &PanelMesh, corner: usize) -> [(CurveLabel, f64, f64, [f64; 2]); 2] {
    let mut out = [(CurveLabel::GammaR, 0.0, 0.0, [0.0; 2]); 2];
    for (k, label) in [CurveLabel::GammaR, CurveLabel::LowerArc]
        .into_iter()
        .enumerate()
    {
        let c = mesh.geometry.curve(label).expect("both curves exist");
        let i = mesh.corner_panels[corner][k];
        let next = if corner == 0 { i + 1 } else { i - 1 };
        let len = |j: usize| {
            let p = mesh.panels()[j];
            p.b - p.a
        };
        let delta = [len(i), len(next)];
        out[k] = if corner == 0 {
            (label, c.t0, 1.0, delta)
        } else {
            (label, c.t1, -1.0, delta)
        };
    }
    out
}

/// Corner distance of a scaled breakpoint: `w ≤ 1` lies in the corner panel,
/// `1 < w ≤ 2` in its neighbour.
fn scaled_distance(w: f64, delta: [f64; 2]) -> f64 {
    if w <= 1.0 {
        w * delta[0]
    } else {
        delta[0] + (w - 1.0) * delta[1]
    }
}

/// Panels on both sides of a corner given by corner-distance breakpoints
/// (scaled by the side's coarse panel length), in local order. Returns the
/// panels and, per panel, the largest scaled corner distance.
fn corner_panels(mesh: &PanelMesh, corner: usize, breaks: &[f64]) -> (Vec<Panel>, Vec<f64>) {
    let mut panels = Vec::new();
    let mut reach = Vec::new();
    for (label, tc, dir, delta) in corner_sides(mesh, corner) {
        let mut side: Vec<(Panel, f64)> = breaks
            .windows(2)
            .map(|w| {
                let (p, q) = (
                    side_param(tc, dir, scaled_distance(w[0], delta)),
                    side_param(tc, dir, scaled_distance(w[1], delta)),
                );
                (
                    Panel {
                        curve: label,
                        a: p.min(q),
                        b: p.max(q),
                    },
                    w[1],
                )
            })
            .collect();
        side.sort_by(|x, y| x.0.a.total_cmp(&y.0.a));
        for (p, r) in side {
            panels.push(p);
            reach.push(r);
        }
    }
    (panels, reach)
}

/// Recursion data of one level, kept for fine-density reconstruction.
#[derive(Clone, Debug)]
struct LevelData {
    /// Type-b panels of this level.
    panels: Vec<Panel>,
    inner: Vec<usize>,
    outer: Vec<usize>,
    /// `M⁻¹ P` where `M` is the level's local system.
    mp: CMat,
    /// Factorization of `R` of the next finer level (absent on the finest level).
    r_next: Option<LU<Complex64, Dyn, Dyn>>,
}

/// Compressed inverse of one corner.
#[derive(Clone, Debug)]
pub struct CornerBlock {
    pub zone: StarZone,
    pub r: CMat,
    levels: Vec<LevelData>,
}

/// `R`: identity except for a 64×64 block per corner.
#[derive(Clone, Debug)]
pub struct CompressedInverse {
    pub n_sub: usize,
    pub size: usize,
    pub corners: Vec<CornerBlock>,
}

impl CompressedInverse {
    /// Dense `size × size` matrix.
    pub fn dense(&self) -> CMat {
        let mut m = CMat::identity(self.size, self.size);
        for c in &self.corners {
            for (a, &i) in c.zone.nodes.iter().enumerate() {
                for (b, &j) in c.zone.nodes.iter().enumerate() {
                    m[(i, j)] = c.r[(a, b)];
                }
            }
        }
        m
    }

    /// `R v`.
    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = v.clone();
        for c in &self.corners {
            let local =
                DVector::from_iterator(c.zone.nodes.len(), c.zone.nodes.iter().map(|&i| v[i]));
            let y = &c.r * local;
            for (a, &i) in c.zone.nodes.iter().enumerate() {
                out[i] = y[a];
            }
        }
        out
    }
}

fn invert(m: CMat, what: &str) -> Result<CMat> {
    m.try_inverse()
        .filter(|inv| inv.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
        .ok_or_else(|| Error::Numerical(format!("singular local system ({what})")))
}

fn local_set(mesh: &PanelMesh, panels: Vec<Panel>) -> Result<PanelSet> {
    PanelSet::new(&mesh.geometry, panels)
}

/// Type-b breakpoints `[0, L/4, L/2, L]` and type-c `[0, L/2, L]` at level
/// `level ≥ 1`, scaled by the coarse panel length (`L = 2 · 2^{−(level−1)}`).
fn level_breaks(level: usize) -> ([f64; 4], [f64; 3]) {
    let l = 2.0 * 0.5f64.powi(level as i32 - 1);
    ([0.0, 0.25 * l, 0.5 * l, l], [0.0, 0.5 * l, l])
}

fn corner_recursion(
    mesh: &PanelMesh,
    ctx: &WaveContext,
    zone: StarZone,
    n_sub: usize,
) -> Result<CornerBlock> {
    let corner = zone.corner;
    if n_sub == 0 {
        let k = assemble_panels(
            &mesh.set,
            ctx,
            KernelMode::System,
            &zone.panels,
            &zone.panels,
        );
        let n = k.nrows();
        let r = invert(
            CMat::identity(n, n) + k,
            &format!("corner {corner}, n_sub = 0"),
        )?;
        return Ok(CornerBlock {
            zone,
            r,
            levels: Vec::new(),
        });
    }
    let mut levels: Vec<LevelData> = Vec::with_capacity(n_sub);
    let mut r_prev: Option<CMat> = None;
    for level in (1..=n_sub).rev() {
        let (bb, cb) = level_breaks(level);
        let (bpanels, reach) = corner_panels(mesh, corner, &bb);
        let (cpanels, _) = corner_panels(mesh, corner, &cb);
        let bset = local_set(mesh, bpanels.clone())?;
        let cset = local_set(mesh, cpanels)?;
        let pp = prolongation(&cset, &bset)?;
        let half = 0.5 * bb[3];
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        for (ip, r) in reach.iter().enumerate() {
            let idx = ip * PANEL_ORDER..(ip + 1) * PANEL_ORDER;
            if *r <= half * (1.0 + 1e-12) {
                inner.extend(idx);
            } else {
                outer.extend(idx);
            }
        }
        let mut m = assemble_operator(&bset, ctx);
        let nb = m.nrows();
        match &r_prev {
            None => {
                m += CMat::identity(nb, nb);
            }
            Some(rp) => {
                let rinv = invert(rp.clone(), &format!("corner {corner}, level {}", level + 1))?;
                for (a, &i) in inner.iter().enumerate() {
                    for (b, &j) in inner.iter().enumerate() {
                        m[(i, j)] = rinv[(a, b)];
                    }
                }
                for &i in &outer {
                    m[(i, i)] += Complex64::new(1.0, 0.0);
                }
            }
        }
        let lu = m.lu();
        let pc = pp.p.map(|x| Complex64::new(x, 0.0));
        let mp = lu
            .solve(&pc)
            .filter(|s| s.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "singular local system at corner {corner}, level {level}"
                ))
            })?;
        let r = pp.pw.transpose().map(|x| Complex64::new(x, 0.0)) * &mp;
        levels.push(LevelData {
            panels: bpanels,
            inner,
            outer,
            mp,
            r_next: r_prev.take().map(|rp| rp.lu()),
        });
        r_prev = Some(r);
    }
    levels.reverse();
    Ok(CornerBlock {
        zone,
        r: r_prev.expect("n_sub >= 1"),
        levels,
    })
}

/// Compressed inverse `R` for both corners via the level-by-level recursion.
#[allow(non_snake_case)]
pub fn compute_R(
    mesh_coarse: &PanelMesh,
    ctx: &WaveContext,
    n_sub: usize,
) -> Result<CompressedInverse> {
    let zones = star_zones(mesh_coarse)?;
    check_refinement_depth(mesh_coarse, n_sub)?;
    let mut corners = Vec::with_capacity(2);
    for z in zones {
        corners.push(corner_recursion(mesh_coarse, ctx, z, n_sub)?);
    }
    Ok(CompressedInverse {
        n_sub,
        size: mesh_coarse.len(),
        corners,
    })
}

/// Brute-force `P_Wᵀ (I + A*_fin)⁻¹ P` for one corner on the fully refined
/// star neighbourhood. Used as an oracle for the recursion.
pub fn direct_corner_inverse(
    mesh: &PanelMesh,
    ctx: &WaveContext,
    n_sub: usize,
    corner: usize,
) -> Result<CMat> {
    let zones = star_zones(mesh)?;
    let zone = &zones[corner];
    let coarse_panels: Vec<Panel> = zone.panels.iter().map(|&p| mesh.panels()[p]).collect();
    let mut breaks = dyadic_breaks(0.0, 1.0, n_sub, true);
    breaks.push(2.0);
    let (fine_panels, _) = corner_panels(mesh, corner, &breaks);
    let cset = local_set(mesh, coarse_panels)?;
    let fset = local_set(mesh, fine_panels)?;
    let pp = prolongation(&cset, &fset)?;
    let k = assemble_operator(&fset, ctx);
    let n = k.nrows();
    let inv = invert(CMat::identity(n, n) + k, "direct fine star system")?;
    let pc = pp.p.map(|x| Complex64::new(x, 0.0));
    Ok(pp.pw.transpose().map(|x| Complex64::new(x, 0.0)) * inv * pc)
}

/// Factorized `I + A° diag(R, I)` for repeated solves.
pub struct PreconditionedSolver {
    lu: DenseLu,
    pub r: CompressedInverse,
}

impl PreconditionedSolver {
    /// `a` is the coarse discretization of `A` (or `B`) on `mesh`.
    pub fn new(a: &CMat, mesh: &PanelMesh, r: CompressedInverse) -> Result<Self> {
        let n = a.nrows();
        if n != mesh.len() || r.size != n {
            return Err(Error::State("operator, mesh and R sizes differ".into()));
        }
        let mut m = a.clone();
        for c in &r.corners {
            for &i in &c.zone.nodes {
                for &j in &c.zone.nodes {
                    m[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        for c in &r.corners {
            let cols = m.select_columns(&c.zone.nodes);
            let updated = cols * &c.r;
            for (b, &j) in c.zone.nodes.iter().enumerate() {
                m.set_column(j, &updated.column(b));
            }
        }
        for i in 0..n {
            m[(i, i)] += Complex64::new(1.0, 0.0);
        }
        Ok(Self {
            lu: DenseLu::new(&m),
            r,
        })
    }

    /// Returns `(Φ̃, Φ = diag(R, I) Φ̃)`.
    pub fn solve(
        &self,
        g: &DVector<Complex64>,
    ) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
        if g.len() != self.r.size {
            return Err(Error::State("right-hand side has the wrong length".into()));
        }
        let t = self
            .lu
            .solve(g)
            .ok_or_else(|| Error::Numerical("preconditioned coarse system is singular".into()))?;
        let phi = self.r.apply(&t);
        Ok((t, phi))
    }
}

/// Solves the compressed coarse system for `system.rhs`.
pub fn solve_preconditioned(
    system: &BlockSystem,
    mesh: &PanelMesh,
    r: &CompressedInverse,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    PreconditionedSolver::new(&system.matrix, mesh, r.clone())?.solve(&system.rhs)
}

fn find_panel(set: &PanelSet, p: &Panel) -> Result<usize> {
    let tol = 1e-8 * p.half_length();
    set.panels
        .iter()
        .position(|q| q.curve == p.curve && (q.a - p.a).abs() <= tol && (q.b - p.b).abs() <= tol)
        .ok_or_else(|| Error::State(format!("panel {p:?} not found on the fine mesh")))
}

fn scatter(
    values: &mut DVector<Complex64>,
    fine: &PanelSet,
    panels: &[Panel],
    local: &DVector<Complex64>,
    idx: &[usize],
) -> Result<()> {
    // idx lists local node indices; they come panel by panel
    for chunk in idx.chunks(PANEL_ORDER) {
        let lp = chunk[0] / PANEL_ORDER;
        let fp = find_panel(fine, &panels[lp])?;
        for (j, &li) in chunk.iter().enumerate() {
            values[fp * PANEL_ORDER + j] = local[li];
        }
    }
    Ok(())
}

/// Density values on the fine mesh from the transformed coarse density `Φ̃`.
pub fn reconstruct_fine_density(
    phi_tilde: &DVector<Complex64>,
    r: &CompressedInverse,
    mesh_coarse: &PanelMesh,
    mesh_fine: &PanelMesh,
) -> Result<DensitySolution> {
    let expected = if r.n_sub == 0 {
        MeshLevel::Coarse
    } else {
        MeshLevel::Fine { n_sub: r.n_sub }
    };
    if mesh_fine.level != expected || phi_tilde.len() != r.size || mesh_coarse.len() != r.size {
        return Err(Error::State(
            "fine mesh, coarse density and R do not belong together".into(),
        ));
    }
    let mut values = DVector::zeros(mesh_fine.len());
    let in_star: Vec<bool> = {
        let mut v = vec![false; mesh_coarse.panels().len()];
        for c in &r.corners {
            for &p in &c.zone.panels {
                v[p] = true;
            }
        }
        v
    };
    for (ip, p) in mesh_coarse.panels().iter().enumerate() {
        if in_star[ip] {
            continue;
        }
        let fp = find_panel(&mesh_fine.set, p)?;
        for j in 0..PANEL_ORDER {
            values[fp * PANEL_ORDER + j] = phi_tilde[ip * PANEL_ORDER + j];
        }
    }
    for c in &r.corners {
        let mut rt = DVector::from_iterator(
            c.zone.nodes.len(),
            c.zone.nodes.iter().map(|&i| phi_tilde[i]),
        );
        if r.n_sub == 0 {
            let y = &c.r * rt;
            let panels: Vec<Panel> = c
                .zone
                .panels
                .iter()
                .map(|&p| mesh_coarse.panels()[p])
                .collect();
            let all: Vec<usize> = (0..y.len()).collect();
            scatter(&mut values, &mesh_fine.set, &panels, &y, &all)?;
            continue;
        }
        if c.levels.len() != r.n_sub {
            return Err(Error::State("recursion artifacts are missing".into()));
        }
        for (li, lvl) in c.levels.iter().enumerate() {
            let y = &lvl.mp * &rt;
            scatter(&mut values, &mesh_fine.set, &lvl.panels, &y, &lvl.outer)?;
            let inner = DVector::from_iterator(lvl.inner.len(), lvl.inner.iter().map(|&i| y[i]));
            if li + 1 == c.levels.len() {
                scatter(&mut values, &mesh_fine.set, &lvl.panels, &y, &lvl.inner)?;
            } else {
                let next = lvl
                    .r_next
                    .as_ref()
                    .ok_or_else(|| Error::State("recursion artifacts are missing".into()))?;
                rt = next
                    .solve(&inner)
                    .ok_or_else(|| Error::Numerical("compressed inverse is singular".into()))?;
            }
        }
    }
    Ok(DensitySolution {
        values,
        level: mesh_fine.level,
    })
}
