use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Built-in surface profiles plus the spline family used by the inversion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Flat,
    /// `φ((x+0.2)/0.3) − 0.8 φ((x−0.3)/0.2)`.
    Example1,
    /// `0.5 b(x) cos(4πx)`.
    Example2,
    /// `b(x) (0.5 + 0.1 sin(16πx)) sin(πx)`.
    Example3,
    /// `b(x) sin(4πx)`, the point-source validation surface.
    SineBump,
    /// `Σ a_i φ_{i,M}(x)` on the basis of [`spline_basis`].
    Spline,
}

/// Height function `h` of the locally rough surface `x₂ = h(x₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceProfile {
    pub kind: ProfileKind,
    #[serde(rename = "R")]
    pub radius: f64,
    /// Spline coefficients `a_i`; `Σ a_i φ_{i,M}` is added to the closed-form part.
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

/// Cardinal quartic B-spline centered at 0 and its first three derivatives.
pub fn quartic_bspline(t: f64) -> [f64; 4] {
    if t.abs() >= 2.5 {
        return [0.0; 4];
    }
    const BINOM: [f64; 6] = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
    let mut out = [0.0; 4];
    for (j, c) in BINOM.iter().enumerate() {
        let z = t + 2.5 - j as f64;
        if z <= 0.0 {
            continue;
        }
        let s = if j % 2 == 0 { c / 24.0 } else { -c / 24.0 };
        out[0] += s * z.powi(4);
        out[1] += s * 4.0 * z.powi(3);
        out[2] += s * 12.0 * z * z;
        out[3] += s * 24.0 * z;
    }
    out
}

/// `b(x) = exp(16/(25x²−16))` for `|x| < 4/5`, zero otherwise; value and two derivatives.
fn bump(x: f64) -> [f64; 3] {
    if x.abs() >= 0.8 {
        return [0.0; 3];
    }
    let d = 25.0 * x * x - 16.0;
    let b = (16.0 / d).exp();
    if b == 0.0 {
        return [0.0; 3];
    }
    let g1 = -800.0 * x / (d * d);
    let g2 = -800.0 / (d * d) + 80000.0 * x * x / (d * d * d);
    [b, b * g1, b * (g2 + g1 * g1)]
}

fn product(f: [f64; 3], g: [f64; 3]) -> [f64; 3] {
    [
        f[0] * g[0],
        f[1] * g[0] + f[0] * g[1],
        f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2],
    ]
}

fn sine(a: f64, x: f64) -> [f64; 3] {
    let (s, c) = (a * x).sin_cos();
    [s, a * c, -a * a * s]
}

fn cosine(a: f64, x: f64) -> [f64; 3] {
    let (s, c) = (a * x).sin_cos();
    [c, -a * s, -a * a * c]
}

/// Scaled B-spline `φ((x − c)/w)` with chain-rule derivatives.
fn scaled_bspline(x: f64, c: f64, w: f64) -> [f64; 3] {
    let p = quartic_bspline((x - c) / w);
    [p[0], p[1] / w, p[2] / (w * w)]
}

/// Quartic spline basis `φ_{i,M}(t) = φ((t − t_i)/h)`, `t_i = (i+2)h − R`, `h = 2R/(M+5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineBasis {
    pub count: usize,
    pub radius: f64,
    pub spacing: f64,
}

/// Basis of `M` quartic splines supported inside `(−R, R)`.
pub fn spline_basis(m: usize, radius: f64) -> Result<SplineBasis> {
    if m < 1 {
        return Err(Error::Config("spline basis needs M >= 1".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Config(format!(
            "support radius must be positive, got {radius}"
        )));
    }
    Ok(SplineBasis {
        count: m,
        radius,
        spacing: 2.0 * radius / (m as f64 + 5.0),
    })
}

impl SplineBasis {
    /// Knot center `t_i` of basis function `i` (0-based, i.e. `t_{i+1}`).
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 3.0) * self.spacing - self.radius
    }

    /// Value and first two derivatives of basis function `i` (0-based).
    pub fn eval(&self, i: usize, x: f64) -> [f64; 3] {
        scaled_bspline(x, self.center(i), self.spacing)
    }

    /// Open support `(t_i − 2.5h, t_i + 2.5h)` of basis function `i`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let c = self.center(i);
        (c - 2.5 * self.spacing, c + 2.5 * self.spacing)
    }
}

impl SurfaceProfile {
    pub fn new(kind: ProfileKind, radius: f64, coefficients: Vec<f64>) -> Result<Self> {
        let p = Self {
            kind,
            radius,
            coefficients,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn flat(radius: f64) -> Self {
        Self {
            kind: ProfileKind::Flat,
            radius,
            coefficients: Vec::new(),
        }
    }

    pub fn closed_form(kind: ProfileKind, radius: f64) -> Result<Self> {
        if kind == ProfileKind::Spline {
            return Err(Error::Config("spline profiles need coefficients".into()));
        }
        Self::new(kind, radius, Vec::new())
    }

    pub fn spline(radius: f64, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(ProfileKind::Spline, radius, coefficients)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::Config(format!(
                "profile radius R must be positive, got {}",
                self.radius
            )));
        }
        if self.kind == ProfileKind::Spline && self.coefficients.is_empty() {
            return Err(Error::Config("spline profile has no coefficients".into()));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("spline coefficients must be finite".into()));
        }
        let (lo, hi) = self.support_interval();
        if lo <= -self.radius || hi >= self.radius {
            return Err(Error::Geometry(format!(
                "support [{lo}, {hi}] of h is not inside (-{r}, {r})",
                r = self.radius
            )));
        }
        Ok(())
    }

    /// Closed interval containing `supp(h)` (a point for the flat profile).
    pub fn support_interval(&self) -> (f64, f64) {
        let closed = match self.kind {
            ProfileKind::Flat | ProfileKind::Spline => None,
            ProfileKind::Example1 => Some((-0.95, 0.8)),
            ProfileKind::Example2 | ProfileKind::Example3 | ProfileKind::SineBump => Some((-0.8, 0.8)),
        };
        let spline = (!self.coefficients.is_empty()).then(|| {
            let h = 2.0 * self.radius / (self.coefficients.len() as f64 + 5.0);
            (-self.radius + 0.5 * h, self.radius - 0.5 * h)
        });
        match (closed, spline) {
            (Some(a), Some(b)) => (a.0.min(b.0), a.1.max(b.1)),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => (0.0, 0.0),
        }
    }

    /// Basis of the spline part (`M` = number of coefficients).
    pub fn basis(&self) -> Option<SplineBasis> {
        spline_basis(self.coefficients.len(), self.radius).ok()
    }

    /// Same closed-form part with different spline coefficients.
    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(self.kind, self.radius, coefficients)
    }

    /// `[h, h′, h″]` at `x`.
    pub fn derivs(&self, x: f64) -> [f64; 3] {
        let c = self.closed_derivs(x);
        let s = self.spline_derivs(x);
        [c[0] + s[0], c[1] + s[1], c[2] + s[2]]
    }

    fn closed_derivs(&self, x: f64) -> [f64; 3] {
        use std::f64::consts::PI;
        match self.kind {
            ProfileKind::Example1 => {
                let a = scaled_bspline(x, -0.2, 0.3);
                let b = scaled_bspline(x, 0.3, 0.2);
                [a[0] - 0.8 * b[0], a[1] - 0.8 * b[1], a[2] - 0.8 * b[2]]
            }
            ProfileKind::Example2 => {
                let v = product(bump(x), cosine(4.0 * PI, x));
                [0.5 * v[0], 0.5 * v[1], 0.5 * v[2]]
            }
            ProfileKind::Example3 => {
                let s16 = sine(16.0 * PI, x);
                let inner = [0.5 + 0.1 * s16[0], 0.1 * s16[1], 0.1 * s16[2]];
                product(bump(x), product(inner, sine(PI, x)))
            }
            ProfileKind::SineBump => product(bump(x), sine(4.0 * PI, x)),
            ProfileKind::Flat | ProfileKind::Spline => [0.0; 3],
        }
    }

    fn spline_derivs(&self, x: f64) -> [f64; 3] {
        let m = self.coefficients.len();
        let mut out = [0.0; 3];
        if m == 0 {
            return out;
        }
        let h = 2.0 * self.radius / (m as f64 + 5.0);
        // only the ≤ 5 splines whose support contains x contribute
        let s = (x + self.radius) / h - 3.0;
        let lo = (s - 2.5).floor().max(0.0) as usize;
        let hi = ((s + 2.5).ceil().max(-1.0) as i64).min(m as i64 - 1);
        if hi < lo as i64 {
            return out;
        }
        for i in lo..=hi as usize {
            let c = (i as f64 + 3.0) * h - self.radius;
            let p = scaled_bspline(x, c, h);
            let a = self.coefficients[i];
            out[0] += a * p[0];
            out[1] += a * p[1];
            out[2] += a * p[2];
        }
        out
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivs(x)[0]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}
