use std::ops::Range;

use super::curve::{CurveLabel, Geometry};
use crate::specfun::{gl16, PANEL_ORDER};
use crate::{vec2, Error, Point, Result};

/// Parameter interval `[a, b]` on one curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub curve: CurveLabel,
    pub a: f64,
    pub b: f64,
}

impl Panel {
    pub fn half_length(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    pub fn from_ref(&self, tau: f64) -> f64 {
        0.5 * (self.a + self.b) + self.half_length() * tau
    }

    pub fn to_ref(&self, t: f64) -> f64 {
        (t - 0.5 * (self.a + self.b)) / self.half_length()
    }

    /// Shift to add to a parameter value on `self` so it can be mapped with
    /// `other.to_ref`, if the two panels touch. Panels on the closed auxiliary
    /// circle also touch across the `0 ≡ 2π` seam.
    pub fn neighbour_shift(&self, other: &Panel) -> Option<f64> {
        if self.curve != other.curve {
            return None;
        }
        let tol = 1e-6 * self.half_length().min(other.half_length());
        if (self.b - other.a).abs() <= tol || (self.a - other.b).abs() <= tol {
            return Some(0.0);
        }
        if self.curve == CurveLabel::AuxCircle {
            let period = 2.0 * std::f64::consts::PI;
            if (self.b - period - other.a).abs() <= tol {
                return Some(-period);
            }
            if (self.a + period - other.b).abs() <= tol {
                return Some(period);
            }
        }
        None
    }
}

/// Geometric data at one quadrature node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshNode {
    pub curve: CurveLabel,
    pub panel: usize,
    /// Curve parameter `t`.
    pub param: f64,
    /// Gauss–Legendre node in `[−1, 1]`.
    pub tau: f64,
    pub pos: Point,
    pub normal: Point,
    /// `|x′(t)|`.
    pub speed: f64,
    /// `x″(t)`.
    pub accel: Point,
    /// Arc-length weight `w_j |x′(t_j)| (b−a)/2`.
    pub weight: f64,
    /// Parameter weight `w_j (b−a)/2`.
    pub param_weight: f64,
}

/// Panels with their 16 nodes each, in panel order.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelSet {
    pub panels: Vec<Panel>,
    pub nodes: Vec<MeshNode>,
}

impl PanelSet {
    pub fn new(geometry: &Geometry, panels: Vec<Panel>) -> Result<Self> {
        let rule = gl16();
        let mut nodes = Vec::with_capacity(panels.len() * PANEL_ORDER);
        for (ip, p) in panels.iter().enumerate() {
            let curve = geometry
                .curve(p.curve)
                .ok_or_else(|| Error::Geometry(format!("panel on missing curve {:?}", p.curve)))?;
            if !(p.b > p.a) {
                return Err(Error::Geometry(format!("empty panel [{}, {}]", p.a, p.b)));
            }
            let hl = p.half_length();
            for (&tau, &w) in rule.nodes.iter().zip(&rule.weights) {
                let t = p.from_ref(tau);
                let cp = curve.point(t);
                let speed = vec2::norm(cp.d1);
                nodes.push(MeshNode {
                    curve: p.curve,
                    panel: ip,
                    param: t,
                    tau,
                    pos: cp.pos,
                    normal: curve.normal_from(cp.d1),
                    speed,
                    accel: cp.d2,
                    weight: w * hl * speed,
                    param_weight: w * hl,
                });
            }
        }
        Ok(Self { panels, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_nodes(&self, panel: usize) -> Range<usize> {
        panel * PANEL_ORDER..(panel + 1) * PANEL_ORDER
    }

    /// Node range covered by the panels of one curve (panels of a curve are contiguous).
    pub fn curve_nodes(&self, label: CurveLabel) -> Range<usize> {
        let r = self.curve_panels(label);
        r.start * PANEL_ORDER..r.end * PANEL_ORDER
    }

    pub fn curve_panels(&self, label: CurveLabel) -> Range<usize> {
        let start = self.panels.iter().position(|p| p.curve == label);
        match start {
            None => 0..0,
            Some(s) => {
                let n = self.panels[s..]
                    .iter()
                    .take_while(|p| p.curve == label)
                    .count();
                s..s + n
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshLevel {
    Coarse,
    Fine { n_sub: usize },
}

/// Panelization of all curves of a [`Geometry`], with corner bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelMesh {
    pub geometry: Geometry,
    pub n_pan: usize,
    pub level: MeshLevel,
    pub set: PanelSet,
    /// For corner `x_A = (−R, 0)` and `x_B = (R, 0)`: the `Γ_R` and `∂B_R⁻`
    /// panels touching that corner.
    pub corner_panels: [[usize; 2]; 2],
}

impl PanelMesh {
    pub fn nodes(&self) -> &[MeshNode] {
        &self.set.nodes
    }

    pub fn panels(&self) -> &[Panel] {
        &self.set.panels
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn curve_nodes(&self, label: CurveLabel) -> Range<usize> {
        self.set.curve_nodes(label)
    }

    pub fn curve_panels(&self, label: CurveLabel) -> Range<usize> {
        self.set.curve_panels(label)
    }

    /// Sum of the arc-length weights on one curve.
    pub fn arc_length(&self, label: CurveLabel) -> f64 {
        self.set.nodes[self.curve_nodes(label)]
            .iter()
            .map(|n| n.weight)
            .sum()
    }

    /// Corner points `x_A`, `x_B`.
    pub fn corners(&self) -> [Point; 2] {
        let r = self.geometry.radius;
        [[-r, 0.0], [r, 0.0]]
    }
}

fn uniform_panels(label: CurveLabel, t0: f64, t1: f64, n: usize) -> Vec<Panel> {
    let h = (t1 - t0) / n as f64;
    (0..n)
        .map(|i| Panel {
            curve: label,
            a: if i == 0 { t0 } else { t0 + i as f64 * h },
            b: if i + 1 == n {
                t1
            } else {
                t0 + (i + 1) as f64 * h
            },
        })
        .collect()
}

fn corner_indices(set: &PanelSet) -> [[usize; 2]; 2] {
    let g = set.curve_panels(CurveLabel::GammaR);
    let a = set.curve_panels(CurveLabel::LowerArc);
    [[g.start, a.start], [g.end - 1, a.end - 1]]
}

/// `n_pan` equal-parameter panels on each curve.
pub fn build_coarse_mesh(geometry: &Geometry, n_pan: usize) -> Result<PanelMesh> {
    if n_pan < 2 {
        return Err(Error::Config(format!(
            "n_pan must be at least 2, got {n_pan}"
        )));
    }
    let mut panels = Vec::new();
    for c in geometry.curves() {
        panels.extend(uniform_panels(c.label, c.t0, c.t1, n_pan));
    }
    let set = PanelSet::new(geometry, panels)?;
    let corner_panels = corner_indices(&set);
    Ok(PanelMesh {
        geometry: geometry.clone(),
        n_pan,
        level: MeshLevel::Coarse,
        set,
        corner_panels,
    })
}

/// Breakpoints of a panel `[a, b]` halved `n` times towards `a` (`toward_a`) or `b`.
pub(crate) fn dyadic_breaks(a: f64, b: f64, n: usize, toward_a: bool) -> Vec<f64> {
    let d = b - a;
    let mut pts = vec![a];
    if toward_a {
        for j in (1..=n).rev() {
            pts.push(a + d * 0.5f64.powi(j as i32));
        }
    } else {
        for j in 1..=n {
            pts.push(b - d * 0.5f64.powi(j as i32));
        }
    }
    pts.push(b);
    pts
}

/// Fine mesh: the `Γ_R` and `∂B_R⁻` panels touching each corner are halved
/// `n_sub` times towards the corner.
/// Rejects `n_sub` values whose smallest corner panel would be too short for
/// its 16 nodes to stay distinct in double precision.
pub fn check_refinement_depth(coarse: &PanelMesh, n_sub: usize) -> Result<()> {
    for label in [CurveLabel::GammaR, CurveLabel::LowerArc] {
        let range = coarse.curve_panels(label);
        let first = coarse.panels()[range.start];
        let scale = first
            .a
            .abs()
            .max(coarse.panels()[range.end - 1].b.abs())
            .max(1.0);
        let finest = 2.0 * first.half_length() * 0.5f64.powi(n_sub as i32);
        if finest < 1e-12 * scale {
            return Err(Error::Config(format!(
                "n_sub = {n_sub} refines the corner panels of {label:?} below double precision"
            )));
        }
    }
    Ok(())
}

pub fn refine_corner_mesh(coarse: &PanelMesh, n_sub: usize) -> Result<PanelMesh> {
    if coarse.level != MeshLevel::Coarse {
        return Err(Error::State(
            "refine_corner_mesh needs a coarse mesh".into(),
        ));
    }
    check_refinement_depth(coarse, n_sub)?;
    let mut panels = Vec::with_capacity(coarse.panels().len() + 4 * n_sub);
    for label in [
        CurveLabel::GammaR,
        CurveLabel::LowerArc,
        CurveLabel::AuxCircle,
    ] {
        let range = coarse.curve_panels(label);
        if range.is_empty() {
            continue;
        }
        let src = &coarse.panels()[range.clone()];
        let refine = label != CurveLabel::AuxCircle;
        for (i, p) in src.iter().enumerate() {
            let breaks = if refine && i == 0 {
                dyadic_breaks(p.a, p.b, n_sub, true)
            } else if refine && i + 1 == src.len() {
                dyadic_breaks(p.a, p.b, n_sub, false)
            } else {
                vec![p.a, p.b]
            };
            panels.extend(breaks.windows(2).map(|w| Panel {
                curve: label,
                a: w[0],
                b: w[1],
            }));
        }
    }
    let set = PanelSet::new(&coarse.geometry, panels)?;
    let corner_panels = corner_indices(&set);
    Ok(PanelMesh {
        geometry: coarse.geometry.clone(),
        n_pan: coarse.n_pan,
        level: if n_sub == 0 {
            MeshLevel::Coarse
        } else {
            MeshLevel::Fine { n_sub }
        },
        set,
        corner_panels,
    })
}
