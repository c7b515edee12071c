use std::f64::consts::PI;

use super::profile::SurfaceProfile;
use crate::{vec2, Error, Point, Result};

/// Which boundary component a curve (or panel, or node) belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurveLabel {
    /// `Γ_R`: the graph of `h` over `[−R, R]`, parameterized by `x₁`.
    GammaR,
    /// `∂B_R⁻`: lower half circle, parameterized by angle `π → 2π`.
    LowerArc,
    /// `Γ̃`: auxiliary impedance circle, parameterized by angle `0 → 2π`.
    AuxCircle,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CurveShape {
    Graph(SurfaceProfile),
    Circle { center: Point, radius: f64 },
}

/// Position with first and second parameter derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub pos: Point,
    pub d1: Point,
    pub d2: Point,
}

/// A parameterized boundary curve on `[t0, t1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: CurveLabel,
    pub shape: CurveShape,
    pub t0: f64,
    pub t1: f64,
}

impl Curve {
    pub fn gamma_r(profile: SurfaceProfile, radius: f64) -> Self {
        Self {
            label: CurveLabel::GammaR,
            shape: CurveShape::Graph(profile),
            t0: -radius,
            t1: radius,
        }
    }

    pub fn lower_arc(radius: f64) -> Self {
        Self {
            label: CurveLabel::LowerArc,
            shape: CurveShape::Circle {
                center: [0.0, 0.0],
                radius,
            },
            t0: PI,
            t1: 2.0 * PI,
        }
    }

    pub fn aux_circle(center: Point, radius: f64) -> Self {
        Self {
            label: CurveLabel::AuxCircle,
            shape: CurveShape::Circle { center, radius },
            t0: 0.0,
            t1: 2.0 * PI,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.label == CurveLabel::AuxCircle
    }

    pub fn param_length(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn point(&self, t: f64) -> CurvePoint {
        match &self.shape {
            CurveShape::Graph(p) => {
                let [h, h1, h2] = p.derivs(t);
                CurvePoint {
                    pos: [t, h],
                    d1: [1.0, h1],
                    d2: [0.0, h2],
                }
            }
            CurveShape::Circle { center, radius } => {
                let (s, c) = t.sin_cos();
                CurvePoint {
                    pos: [center[0] + radius * c, center[1] + radius * s],
                    d1: [-radius * s, radius * c],
                    d2: [-radius * c, -radius * s],
                }
            }
        }
    }

    /// Unit normal: into `D₊` on `Γ_R`, outward radial on the circles.
    pub fn normal_from(&self, d1: Point) -> Point {
        let s = vec2::norm(d1);
        match self.label {
            CurveLabel::GammaR => [-d1[1] / s, d1[0] / s],
            CurveLabel::LowerArc | CurveLabel::AuxCircle => [d1[1] / s, -d1[0] / s],
        }
    }

    pub fn normal(&self, t: f64) -> Point {
        self.normal_from(self.point(t).d1)
    }
}

/// The boundary curves of one scattering configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub radius: f64,
    pub gamma: Curve,
    pub arc: Curve,
    pub aux: Option<Curve>,
}

impl Geometry {
    pub fn profile(&self) -> &SurfaceProfile {
        match &self.gamma.shape {
            CurveShape::Graph(p) => p,
            CurveShape::Circle { .. } => unreachable!("Γ_R is always a graph"),
        }
    }

    pub fn curve(&self, label: CurveLabel) -> Option<&Curve> {
        match label {
            CurveLabel::GammaR => Some(&self.gamma),
            CurveLabel::LowerArc => Some(&self.arc),
            CurveLabel::AuxCircle => self.aux.as_ref(),
        }
    }

    /// Curves in block order.
    pub fn curves(&self) -> Vec<&Curve> {
        let mut v = vec![&self.gamma, &self.arc];
        if let Some(a) = &self.aux {
            v.push(a);
        }
        v
    }

    /// Same geometry with the auxiliary circle dropped.
    pub fn without_aux(&self) -> Self {
        Self {
            aux: None,
            ..self.clone()
        }
    }

    /// `true` if `p` lies strictly above the surface.
    pub fn is_above_surface(&self, p: Point) -> bool {
        p[1] > self.profile().value(p[0])
    }
}

fn check_support(profile: &SurfaceProfile, radius: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Geometry(format!("R must be positive, got {radius}")));
    }
    profile.validate()?;
    let (lo, hi) = profile.support_interval();
    if lo <= -radius || hi >= radius {
        return Err(Error::Geometry(format!(
            "supp(h) ⊂ [{lo}, {hi}] is not inside (-{radius}, {radius})"
        )));
    }
    Ok(())
}

/// `Γ_R` and `∂B_R⁻` only.
pub fn build_two_curves(profile: SurfaceProfile, radius: f64) -> Result<Geometry> {
    check_support(&profile, radius)?;
    Ok(Geometry {
        radius,
        gamma: Curve::gamma_r(profile, radius),
        arc: Curve::lower_arc(radius),
        aux: None,
    })
}

/// `Γ_R`, `∂B_R⁻` and the auxiliary circle, which must lie strictly inside `D_R⁻`.
pub fn build_curves(
    profile: SurfaceProfile,
    radius: f64,
    aux_center: Point,
    aux_radius: f64,
) -> Result<Geometry> {
    let mut g = build_two_curves(profile, radius)?;
    if !(aux_radius.is_finite() && aux_radius > 0.0) {
        return Err(Error::Geometry(format!(
            "auxiliary radius must be positive, got {aux_radius}"
        )));
    }
    let aux = Curve::aux_circle(aux_center, aux_radius);
    let inside = |p: Point| vec2::norm(p) < radius && p[1] < g.profile().value(p[0]);
    if !inside(aux_center) {
        return Err(Error::Geometry(format!(
            "auxiliary center {aux_center:?} is not inside D_R⁻"
        )));
    }
    const SAMPLES: usize = 2048;
    for i in 0..SAMPLES {
        let t = 2.0 * PI * i as f64 / SAMPLES as f64;
        let p = aux.point(t).pos;
        if !inside(p) {
            return Err(Error::Geometry(format!(
                "auxiliary circle leaves D_R⁻ near {p:?}"
            )));
        }
    }
    g.aux = Some(aux);
    Ok(g)
}
