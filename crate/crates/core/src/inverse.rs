//! Far-field operator, its Fréchet derivative and the multi-frequency
//! Levenberg–Marquardt reconstruction.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::forward::{upper_half_angles, ForwardSolver};
use crate::geometry::{
    build_curves, build_two_curves, CurveLabel, PanelMesh, SplineBasis, SurfaceProfile,
};
use crate::kernels::WaveContext;
use crate::nystrom::{
    arc_length_derivative, assemble_G_boundary_data, tangential_derivatives, BoundaryTraceOperator,
    FarFieldSamples, Incidence,
};
use crate::{vec2, Error, Point, Result};

type CVec = DVector<Complex64>;

/// `n_pan = round(slope · k + offset)`, at least 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelRule {
    pub slope: f64,
    pub offset: f64,
}

impl PanelRule {
    pub const SYNTHESIS: PanelRule = PanelRule {
        slope: 0.6,
        offset: 18.0,
    };
    pub const INVERSION: PanelRule = PanelRule {
        slope: 0.5,
        offset: 14.0,
    };

    pub fn n_pan(&self, k: f64) -> usize {
        ((self.slope * k + self.offset).round().max(4.0)) as usize
    }
}

/// Unit incident direction `(cos a, sin a)`.
pub fn direction_from_angle(a: f64) -> Point {
    [a.cos(), a.sin()]
}

/// Far-field data at several wave numbers and incident directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub wave_numbers: Vec<f64>,
    /// Incident directions `d_l` on the lower half circle.
    pub directions: Vec<Point>,
    /// Observation angles on the upper half circle.
    pub angles: Vec<f64>,
    pub delta: f64,
    /// `values[m][l][j] = u∞_{δ,k_m}(x̂_j; d_l)`.
    #[serde(skip)]
    pub values: Vec<Vec<Vec<Complex64>>>,
}

impl MeasurementSet {
    pub fn validate(&self) -> Result<()> {
        if self.wave_numbers.is_empty() || self.directions.is_empty() || self.angles.is_empty() {
            return Err(Error::Config(
                "measurements need at least one wave number, direction and angle".into(),
            ));
        }
        if self
            .wave_numbers
            .iter()
            .any(|k| !(k.is_finite() && *k > 0.0))
            || self.wave_numbers.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "wave numbers must be positive and strictly increasing".into(),
            ));
        }
        for d in &self.directions {
            if !((vec2::norm(*d) - 1.0).abs() < 1e-12 && d[1] < 0.0) {
                return Err(Error::Config(format!(
                    "incident direction {d:?} is not a unit vector pointing downwards"
                )));
            }
        }
        if self.angles.iter().any(|a| !(a.is_finite() && a.sin() > 0.0)) {
            return Err(Error::Config(
                "observation angles must lie in (0, π)".into(),
            ));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Config(format!(
                "noise ratio must be non-negative, got {}",
                self.delta
            )));
        }
        let shape_ok = self.values.len() == self.wave_numbers.len()
            && self.values.iter().all(|per_k| {
                per_k.len() == self.directions.len()
                    && per_k.iter().all(|v| v.len() == self.angles.len())
            });
        if !shape_ok {
            return Err(Error::Config(
                "measurement values do not match the wave number / direction / angle lists".into(),
            ));
        }
        Ok(())
    }

    /// Samples as CSV rows `(k_index, k, d_index, angle_index, angle, re, im)`.
    pub fn to_csv(&self) -> String {
        let mut csv = String::from("k_index,k,d_index,angle_index,angle,re,im\n");
        for (m, k) in self.wave_numbers.iter().enumerate() {
            for l in 0..self.directions.len() {
                for (j, a) in self.angles.iter().enumerate() {
                    let v = self.values[m][l][j];
                    writeln!(
                        csv,
                        "{m},{k:.16e},{l},{j},{a:.16e},{:.16e},{:.16e}",
                        v.re, v.im
                    )
                    .expect("writing to a String");
                }
            }
        }
        csv
    }

    /// Metadata as JSON (the samples live in the CSV).
    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `measurements.json` (metadata) and `measurements.csv` (samples).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("measurements.json"), self.metadata_json()?)?;
        std::fs::write(dir.join("measurements.csv"), self.to_csv())?;
        Ok(())
    }

    /// Reads the pair written by [`MeasurementSet::write`].
    pub fn read(dir: &Path) -> Result<Self> {
        let meta = std::fs::read_to_string(dir.join("measurements.json"))?;
        let mut set: MeasurementSet = serde_json::from_str(&meta)?;
        let (nk, nd, nf) = (
            set.wave_numbers.len(),
            set.directions.len(),
            set.angles.len(),
        );
        set.values = vec![vec![vec![Complex64::new(f64::NAN, f64::NAN); nf]; nd]; nk];
        let csv = std::fs::read_to_string(dir.join("measurements.csv"))?;
        let mut seen = 0usize;
        for (line_no, line) in csv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("measurements.csv line {}: malformed", line_no + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            let m: usize = f[0].parse().map_err(|_| bad())?;
            let l: usize = f[2].parse().map_err(|_| bad())?;
            let j: usize = f[3].parse().map_err(|_| bad())?;
            let re: f64 = f[5].parse().map_err(|_| bad())?;
            let im: f64 = f[6].parse().map_err(|_| bad())?;
            if m >= nk || l >= nd || j >= nf {
                return Err(bad());
            }
            set.values[m][l][j] = Complex64::new(re, im);
            seen += 1;
        }
        if seen != nk * nd * nf || set.values.iter().flatten().flatten().any(|v| v.re.is_nan()) {
            return Err(Error::Config(
                "measurements.csv does not cover every (k, d, angle) sample".into(),
            ));
        }
        set.validate()?;
        Ok(set)
    }
}

/// Geometry and discretization used to synthesize data (three-curve solver).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSetup {
    #[serde(rename = "R")]
    pub radius: f64,
    pub aux_center: Point,
    pub aux_radius: f64,
    pub rho_imp: f64,
    pub n_sub: usize,
    pub panels: PanelRule,
}

/// Noiseless far fields from the three-curve solver plus complex Gaussian
/// noise `δ ζ ‖u∞‖/‖ζ‖` per `(k, d)`.
pub fn synthesize_measurements(
    truth: &SurfaceProfile,
    wave_numbers: &[f64],
    directions: &[Point],
    n_f: usize,
    delta: f64,
    seed: u64,
    setup: &SynthesisSetup,
) -> Result<MeasurementSet> {
    let angles = upper_half_angles(n_f);
    let mut set = MeasurementSet {
        wave_numbers: wave_numbers.to_vec(),
        directions: directions.to_vec(),
        angles: angles.clone(),
        delta,
        values: Vec::new(),
    };
    // shape check before any solve
    set.values = vec![vec![vec![Complex64::new(0.0, 0.0); n_f]; directions.len()]; wave_numbers.len()];
    set.validate()?;
    let geometry = build_curves(truth.clone(), setup.radius, setup.aux_center, setup.aux_radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (m, &k) in wave_numbers.iter().enumerate() {
        let ctx = WaveContext::new(k, setup.rho_imp)?;
        let n_pan = setup.panels.n_pan(k);
        let solver = ForwardSolver::new(&geometry, ctx, n_pan, setup.n_sub)?;
        for (l, &d) in directions.iter().enumerate() {
            let g = solver.rhs(&Incidence::plane_wave_towards(d)?)?;
            let (_, phi) = solver.solve(&g)?;
            let clean = solver.far_field(&phi, &angles);
            let zeta: Vec<Complex64> = (0..n_f)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect();
            set.values[m][l] = add_noise(&clean, &zeta, delta);
        }
        debug!("synthesized k = {k} with n_pan = {n_pan}");
    }
    Ok(set)
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `u + δ ζ ‖u‖/‖ζ‖`.
pub fn add_noise(u: &[Complex64], zeta: &[Complex64], delta: f64) -> Vec<Complex64> {
    if delta == 0.0 {
        return u.to_vec();
    }
    let scale = delta * l2(u) / l2(zeta);
    u.iter().zip(zeta).map(|(a, z)| a + z * scale).collect()
}

/// Forward map of one geometry at one wave number with the two-curve solver,
/// plus everything needed for Fréchet derivatives.
pub struct LinearizedModel {
    pub solver: ForwardSolver,
    pub basis: SplineBasis,
    fine: PanelMesh,
    trace: BoundaryTraceOperator,
}

/// Forward solution for one incident direction.
pub struct DirectionSolve {
    pub direction: Point,
    pub far_field: Vec<Complex64>,
    phi_tilde: CVec,
}

impl LinearizedModel {
    /// `profile` must carry spline coefficients; their count fixes `M`.
    pub fn new(profile: &SurfaceProfile, k: f64, n_pan: usize, n_sub: usize) -> Result<Self> {
        let basis = profile
            .basis()
            .ok_or_else(|| Error::Config("inversion profile needs spline coefficients".into()))?;
        let geometry = build_two_curves(profile.clone(), profile.radius)?;
        let ctx = WaveContext::new(k, 1.0)?;
        let solver = ForwardSolver::new(&geometry, ctx, n_pan, n_sub)?;
        let fine = solver.fine_mesh()?;
        let trace = solver.trace_operator(&fine)?;
        Ok(Self {
            solver,
            basis,
            fine,
            trace,
        })
    }

    pub fn k(&self) -> f64 {
        self.solver.ctx.k
    }

    /// `F_{d,k}[h]` at the observation angles.
    pub fn solve(&self, d: Point, angles: &[f64]) -> Result<DirectionSolve> {
        let g = self.solver.rhs(&Incidence::plane_wave_towards(d)?)?;
        let (phi_tilde, phi) = self.solver.solve(&g)?;
        Ok(DirectionSolve {
            direction: d,
            far_field: self.solver.far_field(&phi, angles),
            phi_tilde,
        })
    }

    /// Total field `u = u^i + u^r + u^s` and `du/ds` at the coarse `Γ_R` nodes.
    pub fn boundary_field(&self, sol: &DirectionSolve) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let density = self.solver.fine_density(&sol.phi_tilde, &self.fine)?;
        let us = self.trace.apply(&density.values);
        let coarse = &self.solver.coarse;
        let k = self.k();
        let d = sol.direction;
        let dr = vec2::reflect(d);
        let u: Vec<Complex64> = coarse.nodes()[coarse.curve_nodes(CurveLabel::GammaR)]
            .iter()
            .zip(us.iter())
            .map(|(n, s)| {
                Complex64::from_polar(1.0, k * vec2::dot(n.pos, d))
                    + Complex64::from_polar(1.0, k * vec2::dot(n.pos, dr))
                    + s
            })
            .collect();
        let (du, _) = tangential_derivatives(&u, coarse)?;
        Ok((u, du))
    }

    /// Values of basis function `i` at the coarse `Γ_R` nodes.
    pub fn basis_on_gamma(&self, i: usize) -> Vec<f64> {
        let coarse = &self.solver.coarse;
        coarse.nodes()[coarse.curve_nodes(CurveLabel::GammaR)]
            .iter()
            .map(|n| self.basis.eval(i, n.pos[0])[0])
            .collect()
    }

    /// `n_f × M` matrix whose column `i` is `F′_{d,k}[h; φ_{i,M}]`.
    pub fn jacobian(&self, sol: &DirectionSolve, angles: &[f64]) -> Result<DMatrix<Complex64>> {
        let (u, du) = self.boundary_field(sol)?;
        let m = self.basis.count;
        let mut jac = DMatrix::zeros(angles.len(), m);
        for i in 0..m {
            let dh = self.basis_on_gamma(i);
            let col = self.derivative_far_field(&u, &du, &dh, angles)?;
            for (j, v) in col.into_iter().enumerate() {
                jac[(j, i)] = v;
            }
        }
        Ok(jac)
    }

    /// Far field of the Neumann problem driven by `frechet_rhs(u, du/ds, Δh)`.
    pub fn derivative_far_field(
        &self,
        u: &[Complex64],
        du: &[Complex64],
        delta_h: &[f64],
        angles: &[f64],
    ) -> Result<Vec<Complex64>> {
        let coarse = &self.solver.coarse;
        let f = frechet_rhs(coarse, u, du, delta_h, self.k())?;
        let g = assemble_G_boundary_data(coarse, &f)?;
        let (_, phi) = self.solver.solve(&g)?;
        Ok(self.solver.far_field(&phi, angles))
    }
}

/// Boundary data `f = d/ds[(ν₂Δh) du/ds] + k² (ν₂Δh) u` at the `Γ_R` nodes of
/// `mesh`; the outer derivative is taken panel-wise from the degree-15 interpolant.
pub fn frechet_rhs(
    mesh: &PanelMesh,
    u: &[Complex64],
    du: &[Complex64],
    delta_h: &[f64],
    k: f64,
) -> Result<Vec<Complex64>> {
    let nodes = &mesh.nodes()[mesh.curve_nodes(CurveLabel::GammaR)];
    if u.len() != nodes.len() || du.len() != nodes.len() || delta_h.len() != nodes.len() {
        return Err(Error::Config(format!(
            "frechet_rhs needs {} values per input",
            nodes.len()
        )));
    }
    let a: Vec<f64> = nodes
        .iter()
        .zip(delta_h)
        .map(|(n, dh)| n.normal[1] * dh)
        .collect();
    let g: Vec<Complex64> = a.iter().zip(du).map(|(a, d)| d * *a).collect();
    let dg = arc_length_derivative(&g, mesh)?;
    Ok(dg
        .iter()
        .zip(&a)
        .zip(u)
        .map(|((dg, a), u)| dg + u * (k * k * a))
        .collect())
}

/// `F_{d,k}[h]` for a spline profile with the two-curve solver.
pub fn farfield_operator(
    profile: &SurfaceProfile,
    k: f64,
    d: Point,
    angles: &[f64],
    n_pan: usize,
    n_sub: usize,
) -> Result<FarFieldSamples> {
    let geometry = build_two_curves(profile.clone(), profile.radius)?;
    let solver = ForwardSolver::new(&geometry, WaveContext::new(k, 1.0)?, n_pan, n_sub)?;
    let incidence = Incidence::plane_wave_towards(d)?;
    let (_, phi) = solver.solve(&solver.rhs(&incidence)?)?;
    Ok(FarFieldSamples {
        k,
        incidence: Some(incidence),
        angles: angles.to_vec(),
        values: solver.far_field(&phi, angles),
    })
}

/// `F′_{d,k}[h; ·]` in the spline basis of `profile` (`n_f × M`).
pub fn frechet_jacobian(
    profile: &SurfaceProfile,
    k: f64,
    d: Point,
    angles: &[f64],
    n_pan: usize,
    n_sub: usize,
) -> Result<DMatrix<Complex64>> {
    let model = LinearizedModel::new(profile, k, n_pan, n_sub)?;
    let sol = model.solve(d, angles)?;
    model.jacobian(&sol, angles)
}

/// Outcome of one regularized Gauss–Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct LmStep {
    pub delta_a: Vec<f64>,
    pub beta: f64,
    /// Linearized residual `‖J Δa + r‖²` at the chosen β.
    pub model_residual: f64,
    /// The discrepancy target was outside the bisection bracket; β sits at its edge.
    pub bracket_edge: bool,
}

/// Minimizes `‖J Δa + r‖² + β‖Δa‖²` over real `Δa` (real and imaginary parts
/// stacked), with β chosen by bisection in `log β` so that
/// `‖J Δa + r‖² = ρ² ‖r‖²` within 0.1%.
pub fn lm_step(jac: &DMatrix<Complex64>, residual: &[Complex64], rho_lm: f64) -> Result<LmStep> {
    if !(rho_lm > 0.0 && rho_lm < 1.0) {
        return Err(Error::Config(format!("rho_lm must lie in (0, 1), got {rho_lm}")));
    }
    let (n, m) = jac.shape();
    if residual.len() != n {
        return Err(Error::Config(format!(
            "residual has {} entries, Jacobian has {n} rows",
            residual.len()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(2 * n, m);
    let mut r = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        for j in 0..m {
            a[(i, j)] = jac[(i, j)].re;
            a[(n + i, j)] = jac[(i, j)].im;
        }
        r[i] = residual[i].re;
        r[n + i] = residual[i].im;
    }
    let r2 = r.norm_squared();
    if r2 == 0.0 {
        return Ok(LmStep {
            delta_a: vec![0.0; m],
            beta: 0.0,
            model_residual: 0.0,
            bracket_edge: false,
        });
    }
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let sigma = &svd.singular_values;
    let c = u.transpose() * &r;
    let perp = (r2 - c.norm_squared()).max(0.0);
    let model = |beta: f64| -> f64 {
        perp + sigma
            .iter()
            .zip(c.iter())
            .map(|(s, ci)| (beta / (s * s + beta) * ci).powi(2))
            .sum::<f64>()
    };
    let s_max = sigma.iter().fold(0.0f64, |acc, s| acc.max(s * s));
    if s_max == 0.0 {
        return Err(Error::Numerical("Jacobian is identically zero".into()));
    }
    let target = rho_lm * rho_lm * r2;
    let (mut lo, mut hi) = ((1e-14 * s_max).ln(), (1e6 * s_max).ln());
    let mut bracket_edge = false;
    let beta = if model(lo.exp()) > target {
        bracket_edge = true;
        lo.exp()
    } else if model(hi.exp()) < target {
        bracket_edge = true;
        hi.exp()
    } else {
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..60 {
            mid = 0.5 * (lo + hi);
            let v = model(mid.exp());
            if ((v - target) / target).abs() <= 1e-3 {
                break;
            }
            if v < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mid.exp()
    };
    let mut delta = DVector::<f64>::zeros(m);
    for (i, s) in sigma.iter().enumerate() {
        let coef = -s / (s * s + beta) * c[i];
        delta += vt.row(i).transpose() * coef;
    }
    Ok(LmStep {
        delta_a: delta.iter().copied().collect(),
        beta,
        model_residual: model(beta),
        bracket_edge,
    })
}

/// `(1/n_d) Σ_l ‖F_l − u∞_l‖ / ‖u∞_l‖`.
pub fn err_k(forward: &[Vec<Complex64>], measured: &[Vec<Complex64>]) -> Result<f64> {
    if forward.len() != measured.len() || forward.is_empty() {
        return Err(Error::Config("err_k needs one forward field per measured direction".into()));
    }
    let mut total = 0.0;
    for (f, m) in forward.iter().zip(measured) {
        if f.len() != m.len() {
            return Err(Error::Config("forward and measured sample counts differ".into()));
        }
        let den = l2(m);
        if den == 0.0 {
            return Err(Error::Numerical("measured far field has zero norm".into()));
        }
        let num = f
            .iter()
            .zip(m)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        total += num / den;
    }
    Ok(total / forward.len() as f64)
}

/// Parameters of the frequency-continuation loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSettings {
    #[serde(rename = "R")]
    pub radius: f64,
    pub basis_count: usize,
    pub rho_lm: f64,
    pub tau: f64,
    pub max_iter_per_k: usize,
    pub n_sub: usize,
    pub panels: PanelRule,
    /// Initial coefficients; empty means `h^app = 0`.
    #[serde(default)]
    pub initial: Vec<f64>,
}

impl ReconstructionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.basis_count == 0 {
            return Err(Error::Config("basis_count must be positive".into()));
        }
        if !(self.tau > 1.0) {
            return Err(Error::Config(format!("tau must exceed 1, got {}", self.tau)));
        }
        if !(self.rho_lm > 0.0 && self.rho_lm < 1.0) {
            return Err(Error::Config(format!(
                "rho_lm must lie in (0, 1), got {}",
                self.rho_lm
            )));
        }
        if !self.initial.is_empty() && self.initial.len() != self.basis_count {
            return Err(Error::Config(format!(
                "initial guess has {} coefficients, basis_count is {}",
                self.initial.len(),
                self.basis_count
            )));
        }
        SurfaceProfile::spline(self.radius, vec![0.0; self.basis_count])?;
        Ok(())
    }

    fn profile(&self, coefficients: &[f64]) -> Result<SurfaceProfile> {
        SurfaceProfile::spline(self.radius, coefficients.to_vec())
    }
}

/// Current iterate of the reconstruction loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub coefficients: Vec<f64>,
    pub k_index: usize,
    pub err_history: Vec<f64>,
    pub beta_history: Vec<f64>,
}

/// One evaluation of `Err_k`; `beta` is the β of the step that produced the iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: f64,
    pub iteration: usize,
    pub err_k: f64,
    pub beta: Option<f64>,
    pub bracket_edge: bool,
}

/// Profile at the end of one frequency stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub k: f64,
    pub iterations: usize,
    pub err_k: f64,
    pub converged: bool,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub stages: Vec<StageResult>,
    pub state: IterationState,
}

impl Trajectory {
    pub fn final_profile(&self, radius: f64) -> Result<SurfaceProfile> {
        SurfaceProfile::spline(radius, self.state.coefficients.clone())
    }

    /// CSV of `(k, iteration, Err_k, β, bracket_edge)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,iteration,err_k,beta,bracket_edge\n");
        for r in &self.records {
            let beta = r.beta.map_or_else(|| "nan".to_string(), |b| format!("{b:.16e}"));
            writeln!(
                s,
                "{:.16e},{},{:.16e},{beta},{}",
                r.k, r.iteration, r.err_k, r.bracket_edge as u8
            )
            .expect("writing to a String");
        }
        s
    }
}

/// Frequency continuation: for each wave number in ascending order, take
/// Levenberg–Marquardt steps until `Err_k < τδ` or the iteration cap.
pub fn reconstruct(meas: &MeasurementSet, settings: &ReconstructionSettings) -> Result<Trajectory> {
    meas.validate()?;
    settings.validate()?;
    let mut state = IterationState {
        coefficients: if settings.initial.is_empty() {
            vec![0.0; settings.basis_count]
        } else {
            settings.initial.clone()
        },
        k_index: 0,
        err_history: Vec::new(),
        beta_history: Vec::new(),
    };
    let threshold = settings.tau * meas.delta;
    let mut records = Vec::new();
    let mut stages = Vec::new();
    for (m, &k) in meas.wave_numbers.iter().enumerate() {
        state.k_index = m;
        let n_pan = settings.panels.n_pan(k);
        let mut iteration = 0;
        let mut last_step: Option<LmStep> = None;
        loop {
            let profile = settings.profile(&state.coefficients)?;
            let model = LinearizedModel::new(&profile, k, n_pan, settings.n_sub)?;
            let sols = meas
                .directions
                .iter()
                .map(|&d| model.solve(d, &meas.angles))
                .collect::<Result<Vec<_>>>()?;
            let fields: Vec<Vec<Complex64>> = sols.iter().map(|s| s.far_field.clone()).collect();
            let err = err_k(&fields, &meas.values[m])?;
            state.err_history.push(err);
            records.push(IterationRecord {
                k,
                iteration,
                err_k: err,
                beta: last_step.as_ref().map(|s| s.beta),
                bracket_edge: last_step.as_ref().is_some_and(|s| s.bracket_edge),
            });
            info!("k = {k}, iteration {iteration}: Err_k = {err:.6e}");
            let converged = err < threshold;
            if converged || iteration >= settings.max_iter_per_k {
                if !converged {
                    warn!(
                        "k = {k}: Err_k = {err:.3e} still above τδ = {threshold:.3e} after {iteration} iterations"
                    );
                }
                stages.push(StageResult {
                    k,
                    iterations: iteration,
                    err_k: err,
                    converged,
                    coefficients: state.coefficients.clone(),
                });
                break;
            }
            let nf = meas.angles.len();
            let nd = meas.directions.len();
            let mut jac = DMatrix::zeros(nd * nf, settings.basis_count);
            let mut residual = Vec::with_capacity(nd * nf);
            for (l, sol) in sols.iter().enumerate() {
                let jl = model.jacobian(sol, &meas.angles)?;
                jac.rows_mut(l * nf, nf).copy_from(&jl);
                residual.extend(
                    sol.far_field
                        .iter()
                        .zip(&meas.values[m][l])
                        .map(|(f, u)| f - u),
                );
            }
            let step = lm_step(&jac, &residual, settings.rho_lm)?;
            if step.bracket_edge {
                warn!("k = {k}: β bisection hit the bracket edge (β = {:.3e})", step.beta);
            }
            for (a, d) in state.coefficients.iter_mut().zip(&step.delta_a) {
                *a += d;
            }
            state.beta_history.push(step.beta);
            iteration += 1;
            last_step = Some(step);
        }
    }
    Ok(Trajectory {
        records,
        stages,
        state,
    })
}

/// `n` equispaced points on `[−R, R]`.
pub fn profile_grid(radius: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -radius + 2.0 * radius * i as f64 / (n - 1) as f64)
        .collect()
}

/// `(L², L∞)` distance between two profiles on a 512-point grid of `[−R, R]`
/// (trapezoidal L²).
pub fn profile_errors(a: &SurfaceProfile, b: &SurfaceProfile, radius: f64) -> (f64, f64) {
    let xs = profile_grid(radius, 512);
    let diffs: Vec<f64> = xs.iter().map(|&x| (a.value(x) - b.value(x)).abs()).collect();
    let dx = xs[1] - xs[0];
    let l2 = diffs
        .windows(2)
        .map(|w| 0.5 * (w[0] * w[0] + w[1] * w[1]) * dx)
        .sum::<f64>()
        .sqrt();
    let linf = diffs.iter().fold(0.0f64, |acc, v| acc.max(*v));
    (l2, linf)
}

/// The two incident directions of the bundled inverse examples:
/// `(cos(−π/3), sin(−π/3))` and `(cos(−2π/3), sin(−2π/3))`.
pub fn example_directions() -> Vec<Point> {
    vec![
        direction_from_angle(-PI / 3.0),
        direction_from_angle(-2.0 * PI / 3.0),
    ]
}
