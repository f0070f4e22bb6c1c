//! Income diffusion: `dP/dt = d/dr (A P) + d²/dr² (B P)` with
//! `A = A0 + a r` and `B = B0 + b r²`.
//!
//! The stationary solution `P_s = (c / B) exp(-∫ A/B)` is built by
//! cumulative Gauss-Legendre quadrature of `A/B` over each grid interval.
//! The time stepper is a conservative exponential-fitting scheme whose
//! discrete fixed point is exactly that stationary solution.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::gauss_legendre8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffusionKind {
    /// `A = A0`, `B = B0`.
    Additive,
    /// `A = a r`, `B = b r²`.
    Multiplicative,
    /// Both processes together.
    Combined,
}

impl std::str::FromStr for DiffusionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(DiffusionKind::Additive),
            "multiplicative" => Ok(DiffusionKind::Multiplicative),
            "combined" => Ok(DiffusionKind::Combined),
            other => Err(Error::Config(format!("unknown diffusion kind '{other}'"))),
        }
    }
}

/// Drift and diffusion coefficients. Terms not belonging to `kind` are
/// ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusionSpec {
    pub kind: DiffusionKind,
    #[serde(rename = "A0", default)]
    pub a0: f64,
    #[serde(rename = "B0", default)]
    pub b0: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

impl DriftDiffusionSpec {
    pub fn additive(a0: f64, b0: f64) -> Result<Self> {
        Self { kind: DiffusionKind::Additive, a0, b0, a: 0.0, b: 0.0 }.validated()
    }

    pub fn multiplicative(a: f64, b: f64) -> Result<Self> {
        Self { kind: DiffusionKind::Multiplicative, a0: 0.0, b0: 0.0, a, b }.validated()
    }

    pub fn combined(a0: f64, a: f64, b0: f64, b: f64) -> Result<Self> {
        Self { kind: DiffusionKind::Combined, a0, b0, a, b }.validated()
    }

    /// Coefficients that reproduce the two-class density with the given
    /// `(T, alpha, r0)` at diffusion rate `b`.
    pub fn from_model(t: f64, alpha: f64, r0: f64, b: f64) -> Result<Self> {
        positive("T", t)?;
        positive("r0", r0)?;
        positive("b", b)?;
        if !(alpha > 1.0) {
            return Err(Error::domain(format!("alpha must exceed 1, got {alpha}")));
        }
        let b0 = b * r0 * r0;
        Self::combined(b0 / t, (alpha - 1.0) * b, b0, b)
    }

    pub fn validated(self) -> Result<Self> {
        if self.has_additive() {
            positive("A0", self.a0)?;
            positive("B0", self.b0)?;
        }
        if self.has_multiplicative() {
            positive("a", self.a)?;
            positive("b", self.b)?;
        }
        Ok(self)
    }

    fn has_additive(&self) -> bool {
        matches!(self.kind, DiffusionKind::Additive | DiffusionKind::Combined)
    }

    fn has_multiplicative(&self) -> bool {
        matches!(self.kind, DiffusionKind::Multiplicative | DiffusionKind::Combined)
    }

    fn coefficients(&self) -> (f64, f64, f64, f64) {
        let (a0, b0) = if self.has_additive() { (self.a0, self.b0) } else { (0.0, 0.0) };
        let (a, b) = if self.has_multiplicative() { (self.a, self.b) } else { (0.0, 0.0) };
        (a0, b0, a, b)
    }

    pub fn drift(&self, r: f64) -> f64 {
        let (a0, _, a, _) = self.coefficients();
        a0 + a * r
    }

    pub fn diffusion(&self, r: f64) -> f64 {
        let (_, b0, _, b) = self.coefficients();
        b0 + b * r * r
    }

    /// `T = B0/A0`, present when the additive process is.
    pub fn temperature(&self) -> Option<f64> {
        self.has_additive().then(|| self.b0 / self.a0)
    }

    /// `r0 = sqrt(B0/b)`, present for the combined kind.
    pub fn r0(&self) -> Option<f64> {
        (self.kind == DiffusionKind::Combined).then(|| (self.b0 / self.b).sqrt())
    }

    /// `alpha = 1 + a/b`, present when the multiplicative process is.
    pub fn alpha(&self) -> Option<f64> {
        self.has_multiplicative().then(|| 1.0 + self.a / self.b)
    }
}

pub fn alpha_from_coefficients(a: f64, b: f64) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::domain("diffusion rate b must be non-zero"));
    }
    if a < 0.0 || b < 0.0 {
        return Err(Error::domain(format!("rates must be non-negative, got a={a}, b={b}")));
    }
    Ok(1.0 + a / b)
}

/// Rate of change of `r²` for an agent at income `r`: `2(B - r A)`.
pub fn delta_r2_diagnostic(r: f64, spec: &DriftDiffusionSpec) -> f64 {
    let (a0, b0, a, b) = spec.coefficients();
    // expanded so that a == b cancels exactly
    2.0 * (b0 - a0 * r + (b - a) * r * r)
}

/// Strictly increasing income points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::domain("grid needs at least 3 points"));
        }
        if points[0] < 0.0 || points.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("grid points must be finite and non-negative"));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!("grid not strictly increasing at {} -> {}", w[0], w[1])));
        }
        Ok(Grid { points })
    }

    pub fn linear(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if n < 3 || !(r_max > r_min) {
            return Err(Error::domain("linear grid needs n >= 3 and r_max > r_min"));
        }
        let h = (r_max - r_min) / (n - 1) as f64;
        Self::new((0..n).map(|i| r_min + h * i as f64).collect())
    }

    pub fn log(r_min: f64, r_max: f64, per_efold: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) || per_efold == 0 {
            return Err(Error::domain("log grid needs 0 < r_min < r_max"));
        }
        let n = ((r_max / r_min).ln() * per_efold as f64).ceil() as usize + 1;
        let step = (r_max / r_min).ln() / (n - 1) as f64;
        Self::new((0..n).map(|i| r_min * (step * i as f64).exp()).collect())
    }

    /// Linear on `[0, split]` with the same spacing the log part has at
    /// `split`, log-spaced above.
    pub fn mixed(split: f64, r_max: f64, per_efold: usize) -> Result<Self> {
        let log = Self::log(split, r_max, per_efold)?;
        let h = log.points[1] - log.points[0];
        let n_lin = ((split / h).ceil() as usize).max(2);
        let mut points: Vec<f64> = (0..n_lin).map(|i| split * i as f64 / n_lin as f64).collect();
        points.extend(log.points);
        Self::new(points)
    }

    /// Default grid for a spec. Additive and combined kinds start at 0 and
    /// go log-spaced above `min(T, r0)/100`; `r_max` is at least
    /// `50 max(T, r0)` and far enough that the power-law tail beyond it
    /// carries under 1e-9 of the mass. Multiplicative solutions are
    /// singular at 0, so their grid spans `[1, 1e6]`.
    pub fn for_spec(spec: &DriftDiffusionSpec, per_efold: usize) -> Result<Self> {
        match spec.kind {
            DiffusionKind::Multiplicative => Self::log(1.0, 1e6, per_efold),
            DiffusionKind::Additive => {
                let t = spec.b0 / spec.a0;
                Self::mixed(t / 100.0, 50.0 * t, per_efold)
            }
            DiffusionKind::Combined => {
                let t = spec.b0 / spec.a0;
                let r0 = (spec.b0 / spec.b).sqrt();
                let alpha = 1.0 + spec.a / spec.b;
                let tail = (r0 * 1e9f64.powf(1.0 / alpha)).min(r0 * 1e12);
                Self::mixed(t.min(r0) / 100.0, tail.max(50.0 * t.max(r0)), per_efold)
            }
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_spacing(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Control-volume widths: half of each adjacent interval.
    pub fn volumes(&self) -> Vec<f64> {
        let p = &self.points;
        let n = p.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { p[i] - p[i - 1] } else { 0.0 };
                let right = if i + 1 < n { p[i + 1] - p[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }
}

/// Density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    grid: Grid,
    density: Vec<f64>,
    mass: f64,
}

impl GridDistribution {
    pub fn new(grid: Grid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::domain("density length differs from grid length"));
        }
        if density.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain("density must be finite and non-negative"));
        }
        let mass = trapezoid_mass(&grid, &density);
        Ok(GridDistribution { grid, density, mass })
    }

    /// Rescales to unit trapezoid mass.
    pub fn normalized(mut self) -> Result<Self> {
        if !(self.mass > 0.0) {
            return Err(Error::domain("cannot normalize a zero density"));
        }
        let m = self.mass;
        self.density.iter_mut().for_each(|p| *p /= m);
        self.mass = trapezoid_mass(&self.grid, &self.density);
        Ok(self)
    }

    /// Unit-mass spike on the grid node nearest `r`.
    pub fn pulse(grid: Grid, r: f64) -> Result<Self> {
        let idx = grid
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let vol = grid.volumes()[idx];
        let mut density = vec![0.0; grid.len()];
        density[idx] = 1.0 / vol;
        Self::new(grid, density)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `∫|P - Q|` by the same trapezoid rule as the mass.
    pub fn l1_distance(&self, other: &GridDistribution) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::domain("distributions live on different grids"));
        }
        let diff: Vec<f64> = self
            .density
            .iter()
            .zip(&other.density)
            .map(|(p, q)| (p - q).abs())
            .collect();
        Ok(trapezoid_mass(&self.grid, &diff))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        w.write_record(["r", "density"]).map_err(map)?;
        for (r, p) in self.grid.points.iter().zip(&self.density) {
            w.write_record([format!("{r}"), format!("{p}")]).map_err(map)?;
        }
        w.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

fn trapezoid_mass(grid: &Grid, density: &[f64]) -> f64 {
    grid.volumes().iter().zip(density).map(|(v, p)| v * p).sum()
}

/// `Phi(r_i) = ∫_{r_0}^{r_i} A/B`, with an error if `B <= 0` on the grid.
fn potential(spec: &DriftDiffusionSpec, grid: &Grid) -> Result<Vec<f64>> {
    if let Some(&r) = grid.points.iter().find(|&&r| !(spec.diffusion(r) > 0.0)) {
        return Err(Error::SingularDiffusion { r, value: spec.diffusion(r) });
    }
    let mut phi = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    phi.push(acc);
    for w in grid.points.windows(2) {
        acc += gauss_legendre8(|r| spec.drift(r) / spec.diffusion(r), w[0], w[1]);
        phi.push(acc);
    }
    Ok(phi)
}

/// Normalized stationary density on `grid`.
pub fn stationary_solution(spec: &DriftDiffusionSpec, grid: &Grid) -> Result<GridDistribution> {
    let spec = spec.validated()?;
    let phi = potential(&spec, grid)?;
    let density = grid
        .points
        .iter()
        .zip(&phi)
        .map(|(&r, &f)| (-f).exp() / spec.diffusion(r))
        .collect();
    GridDistribution::new(grid.clone(), density)?.normalized()
}

/// Largest time step the explicit stepper accepts on `grid`.
pub fn stable_time_step(grid: &Grid, spec: &DriftDiffusionSpec) -> Result<f64> {
    let spec = spec.validated()?;
    let max_b = grid.points.iter().map(|&r| spec.diffusion(r)).fold(0.0, f64::max);
    Ok(0.4 * grid.min_spacing().powi(2) / max_b)
}

/// Explicit conservative stepper with zero-flux boundaries at both ends.
#[derive(Debug, Clone)]
pub struct TransientSolver {
    state: GridDistribution,
    diffusion: Vec<f64>,
    volumes: Vec<f64>,
    /// Per interval: `(e^{-dPhi/2}/h, e^{dPhi/2}/h)`.
    weights: Vec<(f64, f64)>,
    dt: f64,
}

impl TransientSolver {
    pub fn new(p0: GridDistribution, spec: &DriftDiffusionSpec, dt: f64) -> Result<Self> {
        let spec = spec.validated()?;
        let grid = p0.grid.clone();
        let phi = potential(&spec, &grid)?;
        let diffusion: Vec<f64> = grid.points.iter().map(|&r| spec.diffusion(r)).collect();
        let bound = stable_time_step(&grid, &spec)?;
        if !(dt > 0.0 && dt <= bound) {
            return Err(Error::Config(format!("time step {dt} violates stability bound {bound}")));
        }
        let weights: Vec<(f64, f64)> = grid
            .points
            .windows(2)
            .zip(phi.windows(2))
            .map(|(r, f)| {
                let h = r[1] - r[0];
                let half = 0.5 * (f[1] - f[0]);
                ((-half).exp() / h, half.exp() / h)
            })
            .collect();
        let volumes = grid.volumes();
        // diagonal of the explicit update must stay non-negative
        for i in 0..grid.len() {
            let mut out = 0.0;
            if i + 1 < grid.len() {
                out += weights[i].0;
            }
            if i > 0 {
                out += weights[i - 1].1;
            }
            if dt * diffusion[i] * out > volumes[i] {
                return Err(Error::Config(format!(
                    "time step {dt} breaks positivity at r = {}",
                    grid.points[i]
                )));
            }
        }
        Ok(TransientSolver { state: p0, diffusion, volumes, weights, dt })
    }

    pub fn step(&mut self) {
        let n = self.state.density.len();
        let p = &mut self.state.density;
        // flux through interval i: -(e^{dPhi/2} g_{i+1} - e^{-dPhi/2} g_i)/h, g = B P
        let fluxes: Vec<f64> = (0..n - 1)
            .map(|i| {
                let (lo, hi) = self.weights[i];
                -(hi * self.diffusion[i + 1] * p[i + 1] - lo * self.diffusion[i] * p[i])
            })
            .collect();
        for i in 0..n {
            let inflow = if i > 0 { fluxes[i - 1] } else { 0.0 };
            let outflow = if i + 1 < n { fluxes[i] } else { 0.0 };
            p[i] += self.dt / self.volumes[i] * (inflow - outflow);
        }
        self.state.mass = trapezoid_mass(&self.state.grid, &self.state.density);
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn state(&self) -> &GridDistribution {
        &self.state
    }

    pub fn into_state(self) -> GridDistribution {
        self.state
    }
}

pub fn evolve_transient(
    p0: GridDistribution,
    spec: &DriftDiffusionSpec,
    dt: f64,
    steps: u64,
) -> Result<GridDistribution> {
    let mut solver = TransientSolver::new(p0, spec, dt)?;
    solver.run(steps);
    Ok(solver.into_state())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation_and_mapping() {
        assert!(DriftDiffusionSpec::additive(0.0, 1.0).is_err());
        assert!(DriftDiffusionSpec::combined(1.0, 0.0, 1.0, 1.0).is_err());
        let s = DriftDiffusionSpec::combined(2.0, 0.5, 8.0, 2.0).unwrap();
        assert_eq!(s.temperature(), Some(4.0));
        assert_eq!(s.r0(), Some(2.0));
        assert_eq!(s.alpha(), Some(1.25));
        let m = DriftDiffusionSpec::from_model(48.0, 1.34, 113.0, 0.1).unwrap();
        assert!((m.temperature().unwrap() - 48.0).abs() < 1e-12);
        assert!((m.alpha().unwrap() - 1.34).abs() < 1e-12);
        assert!((m.r0().unwrap() - 113.0).abs() < 1e-9);
    }

    #[test]
    fn json_uses_capitalised_constants() {
        let s = DriftDiffusionSpec::additive(1.5, 3.0).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"A0\":1.5"));
        let back: DriftDiffusionSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let partial: DriftDiffusionSpec =
            serde_json::from_str(r#"{"kind":"multiplicative","a":1,"b":2}"#).unwrap();
        assert_eq!(partial.alpha(), Some(1.5));
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_from_coefficients(0.3, 0.3).unwrap(), 2.0);
        assert_eq!(alpha_from_coefficients(0.5, 1.0).unwrap(), 1.5);
        assert!(alpha_from_coefficients(1.0, 0.0).is_err());
    }

    #[test]
    fn delta_r2_signs() {
        let s = DriftDiffusionSpec::additive(2.0, 6.0).unwrap();
        assert_eq!(delta_r2_diagnostic(3.0, &s), 0.0);
        assert!(delta_r2_diagnostic(2.9, &s) > 0.0);
        assert!(delta_r2_diagnostic(3.1, &s) < 0.0);
        let m = DriftDiffusionSpec::multiplicative(0.7, 0.7).unwrap();
        for r in [0.0, 1e-3, 1.0, 17.3, 1e6] {
            assert_eq!(delta_r2_diagnostic(r, &m), 0.0);
        }
        let m = DriftDiffusionSpec::multiplicative(0.2, 0.5).unwrap();
        assert!((delta_r2_diagnostic(3.0, &m) - 2.0 * 0.3 * 9.0).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Grid::new(vec![-1.0, 0.0, 1.0]).is_err());
        let g = Grid::mixed(0.01, 50.0, 100).unwrap();
        assert_eq!(g.points()[0], 0.0);
        assert!((g.points().last().unwrap() - 50.0).abs() < 1e-9);
        let vols: f64 = g.volumes().iter().sum();
        assert!((vols - 50.0).abs() < 1e-9);
    }

    #[test]
    fn singular_diffusion_is_reported() {
        let m = DriftDiffusionSpec::multiplicative(1.0, 1.0).unwrap();
        let g = Grid::linear(0.0, 10.0, 11).unwrap();
        assert!(matches!(stationary_solution(&m, &g), Err(Error::SingularDiffusion { .. })));
    }

    #[test]
    fn additive_is_exponential() {
        let s = DriftDiffusionSpec::additive(0.5, 10.0).unwrap();
        let g = Grid::for_spec(&s, 400).unwrap();
        let p = stationary_solution(&s, &g).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-12);
        for (&r, &d) in g.points().iter().zip(p.density()) {
            if r <= 200.0 {
                let exact = (-r / 20.0).exp() / 20.0;
                assert!(((d - exact) / exact).abs() < 1e-4, "r={r}");
            }
        }
    }

    #[test]
    fn stepper_rejects_large_dt() {
        let s = DriftDiffusionSpec::additive(1.0, 1.0).unwrap();
        let g = Grid::linear(0.0, 50.0, 501).unwrap();
        let p = stationary_solution(&s, &g).unwrap();
        assert!(matches!(TransientSolver::new(p, &s, 0.01), Err(Error::Config(_))));
    }

    #[test]
    fn csv_output() {
        let s = DriftDiffusionSpec::additive(1.0, 1.0).unwrap();
        let g = Grid::linear(0.0, 2.0, 3).unwrap();
        let p = stationary_solution(&s, &g).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,density\n0,"));
        assert_eq!(text.lines().count(), 4);
    }
}
