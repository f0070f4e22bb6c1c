//! Closed-form and quadrature-backed income distributions, Lorenz curves
//! and two-class summary quantities.
//!
//! The interpolating density is
//!
//! ```text
//! P(r) = c * exp(-(r0/T) * atan(r/r0)) / (1 + (r/r0)^2)^((alpha+1)/2)
//! ```
//!
//! which is exponential with scale `T` for `r << r0` and a power law
//! `r^-(1+alpha)` for `r >> r0`. Its complementary CDF has no closed form,
//! so the model carries a panel table of upper integrals built once at
//! construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, gauss_legendre8};

/// Log-spaced panels per e-fold of income.
const PANELS_PER_EFOLD: f64 = 16.0;
/// Linear panels covering `[0, r_lo]`.
const LINEAR_PANELS: usize = 4;

/// Two-class income model `(T, alpha, r0)` with its normalization `c`.
#[derive(Debug, Clone)]
pub struct TwoClassModel {
    t: f64,
    alpha: f64,
    r0: f64,
    c: f64,
    table: CcdfTable,
}

/// Flat parameter record, the JSON form of a [`TwoClassModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
    pub r0: f64,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Clone)]
struct CcdfTable {
    /// Panel edges; `edges[0] = 0`, the last edge is where the analytic
    /// tail takes over.
    edges: Vec<f64>,
    /// Index of the first log-spaced panel.
    first_log: usize,
    /// `upper[k]` = integral of the unnormalized density over `[edges[k], inf)`.
    upper: Vec<f64>,
}

impl TwoClassModel {
    pub fn new(t: f64, alpha: f64, r0: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("temperature must be positive, got {t}")));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("Pareto exponent must exceed 1, got {alpha}")));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::domain(format!("crossover income must be positive, got {r0}")));
        }
        let mut model = TwoClassModel {
            t,
            alpha,
            r0,
            c: 1.0,
            table: CcdfTable {
                edges: Vec::new(),
                first_log: 0,
                upper: Vec::new(),
            },
        };
        model.table = model.build_table();
        model.c = 1.0 / model.table.upper[0];
        Ok(model)
    }

    pub fn from_params(p: &ModelParams) -> Result<Self> {
        Self::new(p.t, p.alpha, p.r0)
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            t: self.t,
            alpha: self.alpha,
            r0: self.r0,
            c: self.c,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Normalization constant, in units of 1/income.
    pub fn normalization(&self) -> f64 {
        self.c
    }

    /// Unnormalized density.
    fn shape(&self, r: f64) -> f64 {
        let x = r / self.r0;
        (-(self.r0 / self.t) * x.atan() - 0.5 * (self.alpha + 1.0) * (x * x).ln_1p()).exp()
    }

    /// Integral of the unnormalized density over `[r, inf)` for `r` beyond
    /// the tabulated range, from the expansion in `v = r0/r`:
    /// `r0 e^{-pi r0 / 2T} [v^a / a + (r0/T) v^(a+1) / (a+1)]`.
    fn analytic_tail(&self, r: f64) -> f64 {
        let v = self.r0 / r;
        let a = self.alpha;
        let pre = self.r0 * (-std::f64::consts::FRAC_PI_2 * self.r0 / self.t).exp();
        pre * (v.powf(a) / a + (self.r0 / self.t) * v.powf(a + 1.0) / (a + 1.0))
    }

    fn analytic_tail_first_moment(&self, r: f64) -> f64 {
        // integral of r * K r^-(1+a) over [r, inf) with K = r0^(1+a) e^{-pi r0/2T}
        let a = self.alpha;
        let k = self.r0.powf(1.0 + a) * (-std::f64::consts::FRAC_PI_2 * self.r0 / self.t).exp();
        k * r.powf(1.0 - a) / (a - 1.0)
    }

    fn build_table(&self) -> CcdfTable {
        let r_lo = self.t.min(self.r0) / 100.0;
        let scale = self.r0 * (self.r0 / self.t).max(1.0);
        let r_hi = 1e3 * scale.max(self.t);
        let mut edges = Vec::new();
        for i in 0..LINEAR_PANELS {
            edges.push(r_lo * i as f64 / LINEAR_PANELS as f64);
        }
        let first_log = edges.len();
        let span = (r_hi / r_lo).ln();
        let n_log = (span * PANELS_PER_EFOLD).ceil().max(1.0) as usize;
        for i in 0..=n_log {
            edges.push(r_lo * (span * i as f64 / n_log as f64).exp());
        }
        let n = edges.len();
        let mut upper = vec![0.0; n];
        upper[n - 1] = self.analytic_tail(edges[n - 1]);
        for k in (0..n - 1).rev() {
            upper[k] = upper[k + 1] + self.panel_integral(k, edges[k], edges[k + 1], first_log);
        }
        CcdfTable {
            edges,
            first_log,
            upper,
        }
    }

    fn panel_integral(&self, k: usize, a: f64, b: f64, first_log: usize) -> f64 {
        if k < first_log || a <= 0.0 {
            gauss_legendre8(|r| self.shape(r), a, b)
        } else {
            gauss_legendre8(
                |u| {
                    let r = u.exp();
                    self.shape(r) * r
                },
                a.ln(),
                b.ln(),
            )
        }
    }

    /// Probability density at income `r`.
    pub fn pdf(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("income must be non-negative, got {r}")));
        }
        Ok(self.c * self.shape(r))
    }

    /// Complementary cumulative probability `C(r) = P(income >= r)`.
    pub fn ccdf(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("income must be non-negative, got {r}")));
        }
        Ok(self.ccdf_unchecked(r))
    }

    pub(crate) fn ccdf_unchecked(&self, r: f64) -> f64 {
        let edges = &self.table.edges;
        let last = edges.len() - 1;
        if r <= 0.0 {
            return 1.0;
        }
        if r >= edges[last] {
            return (self.c * self.analytic_tail(r)).min(1.0);
        }
        // panel k with edges[k] <= r < edges[k+1]
        let k = edges.partition_point(|&e| e <= r) - 1;
        let partial = self.panel_integral(k, r, edges[k + 1], self.table.first_log);
        (self.c * (self.table.upper[k + 1] + partial)).clamp(0.0, 1.0)
    }

    /// Mean income of the model.
    pub fn mean(&self) -> f64 {
        let edges = &self.table.edges;
        let last = edges.len() - 1;
        let mut acc = self.analytic_tail_first_moment(edges[last]);
        for k in 0..last {
            let (a, b) = (edges[k], edges[k + 1]);
            acc += if k < self.table.first_log {
                gauss_legendre8(|r| r * self.shape(r), a, b)
            } else {
                gauss_legendre8(
                    |u| {
                        let r = u.exp();
                        r * r * self.shape(r)
                    },
                    a.ln(),
                    b.ln(),
                )
            };
        }
        self.c * acc
    }

    /// Income `r` with `C(r) = p`, for `p` in `(0, 1]`.
    pub fn inverse_ccdf(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("probability must lie in (0, 1], got {p}")));
        }
        if p == 1.0 {
            return Ok(0.0);
        }
        let mut hi = self.t.max(self.r0);
        while self.ccdf_unchecked(hi) > p {
            hi *= 2.0;
        }
        let target = p.ln();
        bisect(
            |r| self.ccdf_unchecked(r).max(f64::MIN_POSITIVE).ln() - target,
            0.0,
            hi,
            1e-12 * hi,
        )
        .ok_or_else(|| Error::domain("inverse CDF bracket failed"))
    }
}

impl Serialize for TwoClassModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.params().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TwoClassModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = ModelParams::deserialize(d)?;
        TwoClassModel::from_params(&p).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`TwoClassModel::pdf`].
pub fn two_class_pdf(r: f64, model: &TwoClassModel) -> Result<f64> {
    model.pdf(r)
}

/// Free-function form of [`TwoClassModel::ccdf`].
pub fn two_class_cdf(r: f64, model: &TwoClassModel) -> Result<f64> {
    model.ccdf(r)
}

/// Lorenz curve of the exponential distribution, `y = x + (1-x) ln(1-x)`.
pub fn lorenz_exponential(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("population fraction must lie in [0, 1], got {x}")));
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let one_minus = 1.0 - x;
    Ok(x + one_minus * one_minus.ln())
}

/// Lorenz curve of an exponential lower class plus a fraction `f` of total
/// income held by a vanishing upper-class population. The step is taken
/// exactly at `x = 1`.
pub fn lorenz_two_class(x: f64, f: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::domain(format!("tail fraction must lie in [0, 1), got {f}")));
    }
    let base = lorenz_exponential(x)?;
    if x == 1.0 {
        return Ok(1.0);
    }
    Ok((1.0 - f) * base)
}

/// A Lorenz curve: `(population fraction, resource fraction)` points from
/// `(0, 0)` to `(1, 1)` with its Gini coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorenzCurve {
    points: Vec<(f64, f64)>,
    gini: f64,
}

const CURVE_TOL: f64 = 1e-9;

impl LorenzCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::MalformedCurve(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let (x0, y0) = points[0];
        let (xn, yn) = points[points.len() - 1];
        if x0.abs() > CURVE_TOL || y0.abs() > CURVE_TOL {
            return Err(Error::MalformedCurve(format!("first point ({x0}, {y0}) is not (0, 0)")));
        }
        if (xn - 1.0).abs() > CURVE_TOL || (yn - 1.0).abs() > CURVE_TOL {
            return Err(Error::MalformedCurve(format!("last point ({xn}, {yn}) is not (1, 1)")));
        }
        for w in points.windows(2) {
            let ((xa, ya), (xb, yb)) = (w[0], w[1]);
            if !(xb >= xa - CURVE_TOL) || !(yb >= ya - CURVE_TOL) {
                return Err(Error::MalformedCurve(format!(
                    "curve decreases between ({xa}, {ya}) and ({xb}, {yb})"
                )));
            }
        }
        if let Some(&(x, y)) = points.iter().find(|&&(x, y)| y > x + CURVE_TOL) {
            return Err(Error::MalformedCurve(format!("point ({x}, {y}) lies above the diagonal")));
        }
        let gini = gini_from_curve(&points)?;
        Ok(LorenzCurve { points, gini })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn gini(&self) -> f64 {
        self.gini
    }

    /// `lorenz_exponential` sampled at `x = i/n`, `i = 0..=n`.
    pub fn exponential(n: usize) -> Self {
        let n = n.max(1);
        let points = (0..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (x, lorenz_exponential(x).unwrap_or(1.0))
            })
            .collect();
        LorenzCurve::new(points).expect("exponential Lorenz curve is valid")
    }

    /// `lorenz_two_class` sampled at `x = i/n` for `i < n`, followed by the
    /// pre-jump point `(1, 1-f)` and the endpoint `(1, 1)`.
    pub fn two_class(f: f64, n: usize) -> Result<Self> {
        let n = n.max(1);
        let mut points = Vec::with_capacity(n + 2);
        for i in 0..n {
            let x = i as f64 / n as f64;
            points.push((x, lorenz_two_class(x, f)?));
        }
        if f > 0.0 {
            points.push((1.0, 1.0 - f));
        }
        points.push((1.0, 1.0));
        LorenzCurve::new(points)
    }
}

/// `1 - 2 * integral of y dx`, trapezoid over the curve's points.
pub fn gini_from_curve(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::MalformedCurve(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    let area: f64 = points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    Ok((1.0 - 2.0 * area).clamp(0.0, 1.0))
}

/// Share of total income in the upper tail, `f = 1 - T / <r>`.
pub fn tail_fraction(t: f64, mean_income: f64) -> Result<f64> {
    if !(t > 0.0) || !(mean_income > 0.0) {
        return Err(Error::domain(format!(
            "temperature and mean income must be positive, got T={t}, <r>={mean_income}"
        )));
    }
    if t > mean_income {
        return Err(Error::NonPhysical { t, mean: mean_income });
    }
    Ok(1.0 - t / mean_income)
}

/// Gini coefficient `(1 + f) / 2` of the two-class Lorenz curve.
pub fn gini_two_class(f: f64) -> f64 {
    0.5 * (1.0 + f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassBoundary {
    pub r_star: f64,
    /// `exp(-r*/T)`: population share above the boundary under the
    /// exponential lower-class law.
    pub upper_fraction: f64,
}

/// Intersection of the exponential CDF fit `c1 e^{-r/T}` with the power-law
/// fit `c2 r^{-alpha}` above which the power law dominates. The log gap is
/// concave with its peak at `alpha T`, so the upper crossing is bisected on
/// `[max(T, alpha T), 100 T]`.
pub fn class_boundary(t: f64, alpha: f64, exp_prefactor: f64, pl_prefactor: f64) -> Result<ClassBoundary> {
    if !(t > 0.0) || !(alpha > 0.0) || !(exp_prefactor > 0.0) || !(pl_prefactor > 0.0) {
        return Err(Error::domain(format!(
            "class boundary needs positive T, alpha and prefactors, got T={t}, alpha={alpha}, c1={exp_prefactor}, c2={pl_prefactor}"
        )));
    }
    let (lo, hi) = (t.max(alpha * t).min(100.0 * t), 100.0 * t);
    // log of exponential minus log of power law
    let gap = |r: f64| exp_prefactor.ln() - r / t - pl_prefactor.ln() + alpha * r.ln();
    let r_star = bisect(gap, lo, hi, 1e-13 * hi).ok_or(Error::NoIntersection { lo, hi })?;
    Ok(ClassBoundary {
        r_star,
        upper_fraction: (-r_star / t).exp(),
    })
}
