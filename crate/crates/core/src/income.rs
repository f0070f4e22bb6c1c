//! Two-class income fitting from binned counts.
//!
//! Stages run in a fixed order: exponential temperature from the body of
//! the complementary CDF, Pareto exponent from the top percentiles, then
//! the crossover scale `r0` by a one-dimensional search on the log-ratio
//! objective. An optional joint pass refines all three together.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdf::WeightedCdf;
use crate::distributions::{class_boundary, gini_from_curve, gini_two_class, tail_fraction, LorenzCurve, TwoClassModel};
use crate::error::{Error, Result};
use crate::numeric::{fit_line, golden_section, nelder_mead};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    /// Each count is the number of returns with income at or above the level.
    AtOrAbove,
    /// Each count is the number of returns in `[level_n, level_{n+1})`.
    InBin,
}

/// Income levels (k$/year) with complementary return counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncomeBinTable {
    pub year: Option<i32>,
    levels: Vec<f64>,
    at_or_above: Vec<f64>,
}

impl IncomeBinTable {
    pub fn new(year: Option<i32>, levels: Vec<f64>, counts: Vec<f64>, mode: CountMode) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::domain("income table has no levels"));
        }
        if levels.len() != counts.len() {
            return Err(Error::domain("levels and counts differ in length"));
        }
        if levels.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::domain("income levels must be finite and non-negative"));
        }
        if let Some(w) = levels.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!("income levels not strictly increasing at {} -> {}", w[0], w[1])));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::domain("return counts must be finite and non-negative"));
        }
        let at_or_above = match mode {
            CountMode::AtOrAbove => {
                if counts.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::domain("complementary counts must be non-increasing"));
                }
                counts
            }
            CountMode::InBin => {
                let mut acc = 0.0;
                let mut out: Vec<f64> = counts
                    .iter()
                    .rev()
                    .map(|c| {
                        acc += c;
                        acc
                    })
                    .collect();
                out.reverse();
                out
            }
        };
        if !(at_or_above[0] > 0.0) {
            return Err(Error::domain("income table has no returns"));
        }
        Ok(IncomeBinTable { year, levels, at_or_above })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn at_or_above(&self) -> &[f64] {
        &self.at_or_above
    }

    pub fn in_bin(&self) -> Vec<f64> {
        (0..self.levels.len())
            .map(|i| self.at_or_above[i] - self.at_or_above.get(i + 1).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.at_or_above[0]
    }

    /// Copy with every level multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::domain(format!("scale must be positive, got {s}")));
        }
        Self::new(
            self.year,
            self.levels.iter().map(|r| r * s).collect(),
            self.at_or_above.clone(),
            CountMode::AtOrAbove,
        )
    }

    /// Reads `level_kusd,returns_at_or_above` or `level_kusd,returns_in_bin`;
    /// the second header column selects the mode.
    pub fn from_csv<R: Read>(input: R, source_name: &str, year: Option<i32>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let fmt = |line: u64, message: String| Error::Format {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let headers = rdr.headers().map_err(|e| fmt(1, e.to_string()))?.clone();
        let mode = match (headers.get(0), headers.get(1)) {
            (Some("level_kusd"), Some("returns_at_or_above")) => CountMode::AtOrAbove,
            (Some("level_kusd"), Some("returns_in_bin")) => CountMode::InBin,
            _ => {
                return Err(fmt(
                    1,
                    "expected header level_kusd,returns_at_or_above or level_kusd,returns_in_bin".into(),
                ))
            }
        };
        let mut levels = Vec::new();
        let mut counts = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| fmt(line, e.to_string()))?;
            let num = |k: usize| -> Result<f64> {
                let field = rec.get(k).unwrap_or("");
                field
                    .parse::<f64>()
                    .map_err(|_| fmt(line, format!("column {} is not a number: '{field}'", k + 1)))
            };
            levels.push(num(0)?);
            counts.push(num(1)?);
        }
        Self::new(year, levels, counts, mode)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        w.write_record(["level_kusd", "returns_at_or_above"]).map_err(map)?;
        for (r, c) in self.levels.iter().zip(&self.at_or_above) {
            w.write_record([format!("{r}"), format!("{c}")]).map_err(map)?;
        }
        w.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

/// `C_e(r_n)`: share of returns at or above each level.
pub fn empirical_cdf_income(table: &IncomeBinTable) -> Result<WeightedCdf> {
    WeightedCdf::from_complementary(&table.levels, &table.at_or_above)
}

/// Closed range of `C_e` values selecting the levels used by a fit stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub const EXPONENTIAL: Window = Window { lo: 0.1, hi: 0.95 };
    pub const TAIL: Window = Window { lo: 0.001, hi: 0.03 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 < lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("fit window needs 0 < lo < hi <= 1, got [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }

    fn select<'a>(&self, cdf: &'a WeightedCdf) -> impl Iterator<Item = (f64, f64)> + 'a {
        let w = *self;
        cdf.points().filter(move |&(_, c)| c > 0.0 && c >= w.lo && c <= w.hi)
    }
}

/// Stage result: `C ~ prefactor * e^{-r/T}` or `C ~ prefactor * r^{-alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageFit {
    /// `T` for the exponential stage, `alpha` for the power-law stage.
    pub value: f64,
    pub prefactor: f64,
    /// Mean squared residual of the log-linear regression.
    pub mse: f64,
    pub points: usize,
}

const MIN_POINTS: usize = 3;

fn window_points(cdf: &WeightedCdf, window: Window, log_x: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = window
        .select(cdf)
        .filter(|&(r, _)| !log_x || r > 0.0)
        .map(|(r, c)| (if log_x { r.ln() } else { r }, c.ln()))
        .unzip();
    if xs.len() < MIN_POINTS {
        return Err(Error::InsufficientData { found: xs.len(), needed: MIN_POINTS });
    }
    Ok((xs, ys))
}

/// Slope of `ln C_e` against `r` over `window`; `T = -1/slope`.
pub fn fit_temperature(cdf: &WeightedCdf, window: Window) -> Result<StageFit> {
    let (xs, ys) = window_points(cdf, window, false)?;
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::DegenerateCurve("all window levels coincide".into()))?;
    if !(fit.slope < 0.0) {
        return Err(Error::DegenerateCurve(format!("exponential fit slope {} is not negative", fit.slope)));
    }
    Ok(StageFit {
        value: -1.0 / fit.slope,
        prefactor: fit.intercept.exp(),
        mse: fit.mse,
        points: fit.n,
    })
}

/// Slope of `ln C_e` against `ln r` over `window`; `alpha = -slope`.
pub fn fit_pareto_exponent(cdf: &WeightedCdf, window: Window) -> Result<StageFit> {
    let (xs, ys) = window_points(cdf, window, true)?;
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::DegenerateCurve("all window levels coincide".into()))?;
    if !(fit.slope < 0.0) {
        return Err(Error::DegenerateCurve(format!("power-law fit slope {} is not negative", fit.slope)));
    }
    Ok(StageFit {
        value: -fit.slope,
        prefactor: fit.intercept.exp(),
        mse: fit.mse,
        points: fit.n,
    })
}

/// `sum ln²(C_t / C_e)` over levels with `C_e > 0`, and the number of terms.
pub fn crossover_objective(cdf: &WeightedCdf, model: &TwoClassModel) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for (r, ce) in cdf.points().filter(|&(_, c)| c > 0.0) {
        let ct = model.ccdf_unchecked(r);
        let d = (ct / ce).ln();
        sum += d * d;
        n += 1;
    }
    (sum, n)
}

fn objective_for(cdf: &WeightedCdf, t: f64, alpha: f64, r0: f64) -> f64 {
    match TwoClassModel::new(t, alpha, r0) {
        Ok(model) => crossover_objective(cdf, &model).0,
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverFit {
    pub r0: f64,
    /// Objective value at `r0`.
    pub objective: f64,
    /// The minimum sits at an end of the search bracket.
    pub degenerate: bool,
    /// The objective looked non-unimodal and a grid scan was used.
    pub grid_scan: bool,
}

const GRID_SCAN_POINTS: usize = 1000;

/// Golden-section search for `r0` in `[T/10, 100 T]` (in `ln r0`).
pub fn fit_crossover(cdf: &WeightedCdf, t: f64, alpha: f64) -> Result<CrossoverFit> {
    if !(t > 0.0) || !(alpha > 1.0) {
        return Err(Error::domain(format!("crossover search needs T > 0 and alpha > 1, got T={t}, alpha={alpha}")));
    }
    let (lo, hi) = ((t / 10.0).ln(), (100.0 * t).ln());
    let obj = |u: f64| objective_for(cdf, t, alpha, u.exp());
    let (f_lo, f_hi, f_mid) = (obj(lo), obj(hi), obj(0.5 * (lo + hi)));
    let (u, value, grid_scan) = if f_lo < f_mid && f_hi < f_mid {
        let best = (0..GRID_SCAN_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (GRID_SCAN_POINTS - 1) as f64)
            .map(|u| (u, obj(u)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((lo, f_lo));
        (best.0, best.1, true)
    } else {
        let m = golden_section(obj, lo, hi, 1e-9);
        (m.x, m.value, false)
    };
    let edge = 1e-3 * (hi - lo);
    Ok(CrossoverFit {
        r0: u.exp(),
        objective: value,
        degenerate: u - lo < edge || hi - u < edge,
        grid_scan,
    })
}

/// Inverse-variance weighted form of the crossover objective used by the
/// joint pass: `ln C_e` at a level with `n` of `N` returns above it has
/// binomial variance `(1 - C_e) / (N C_e)`. Levels with `C_e = 1` carry no
/// information and are skipped.
pub fn weighted_objective(cdf: &WeightedCdf, total: f64, model: &TwoClassModel) -> f64 {
    cdf.points()
        .filter(|&(_, c)| c > 0.0 && c < 1.0)
        .map(|(r, ce)| {
            let d = (model.ccdf_unchecked(r) / ce).ln();
            d * d * total * ce / (1.0 - ce)
        })
        .sum()
}

/// Joint Nelder-Mead refinement of `(T, alpha, r0)` from staged estimates,
/// minimizing [`weighted_objective`]. Returns the refined parameters.
pub fn refine_joint(cdf: &WeightedCdf, total: f64, t: f64, alpha: f64, r0: f64) -> Result<(f64, f64, f64)> {
    // unconstrained coordinates keep T, alpha - 1 and r0 positive
    let start = [t.ln(), (alpha - 1.0).ln(), r0.ln()];
    let (best, value) = nelder_mead(
        |p| match TwoClassModel::new(p[0].exp(), 1.0 + p[1].exp(), p[2].exp()) {
            Ok(m) => weighted_objective(cdf, total, &m),
            Err(_) => f64::INFINITY,
        },
        &start,
        &[0.05, 0.05, 0.1],
        1e-10,
        2000,
    );
    if !value.is_finite() {
        return Err(Error::DegenerateCurve("joint refinement diverged".into()));
    }
    Ok((best[0].exp(), 1.0 + best[1].exp(), best[2].exp()))
}

/// Least-squares intercept of `ln C` against `x` with the slope held fixed.
fn fixed_slope_prefactor(cdf: &WeightedCdf, window: Window, slope: f64, log_x: bool) -> Result<f64> {
    let (xs, ys) = window_points(cdf, window, log_x)?;
    let n = xs.len() as f64;
    let intercept = xs.iter().zip(&ys).map(|(x, y)| y - slope * x).sum::<f64>() / n;
    Ok(intercept.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub exp_window: Window,
    pub tail_window: Window,
    pub refine: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            exp_window: Window::EXPONENTIAL,
            tail_window: Window::TAIL,
            refine: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub year: Option<i32>,
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
    pub r0: f64,
    pub r_star: f64,
    /// Population share above `r_star` under the exponential law.
    pub upper_fraction: f64,
    pub mean_income: f64,
    pub f: f64,
    /// `(1 + f) / 2`.
    pub gini: f64,
    /// Gini of the empirical Lorenz curve.
    pub gini_empirical: f64,
    /// Mean square of `ln(C_t / C_e)` over levels with returns.
    pub residual: f64,
    pub exp_mse: f64,
    pub tail_mse: f64,
    pub degenerate: bool,
    pub refined: bool,
    #[serde(skip)]
    pub lorenz: LorenzCurve,
}

/// Mean income per bin: midpoints below the top level, the Pareto
/// conditional mean `r_top alpha / (alpha - 1)` for the open top bin.
fn bin_means(table: &IncomeBinTable, alpha: f64) -> Vec<f64> {
    let r = &table.levels;
    let n = r.len();
    (0..n)
        .map(|i| {
            if i + 1 < n {
                0.5 * (r[i] + r[i + 1])
            } else {
                r[i] * alpha / (alpha - 1.0)
            }
        })
        .collect()
}

/// Mean income of the table with the open top bin at its power-law mean.
pub fn table_mean(table: &IncomeBinTable, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::domain(format!("top-bin mean needs alpha > 1, got {alpha}")));
    }
    let counts = table.in_bin();
    let total: f64 = counts.iter().sum();
    Ok(bin_means(table, alpha).iter().zip(&counts).map(|(m, c)| m * c).sum::<f64>() / total)
}

/// Lorenz curve of the binned table, bins in ascending income order.
pub fn empirical_lorenz(table: &IncomeBinTable, alpha: f64) -> Result<LorenzCurve> {
    let counts = table.in_bin();
    let means = bin_means(table, alpha);
    let total_n: f64 = counts.iter().sum();
    let total_income: f64 = counts.iter().zip(&means).map(|(c, m)| c * m).sum();
    if !(total_income > 0.0) {
        return Err(Error::DegenerateCurve("table carries no income".into()));
    }
    let mut points = vec![(0.0, 0.0)];
    let (mut x, mut y) = (0.0, 0.0);
    for (c, m) in counts.iter().zip(&means) {
        if *c == 0.0 {
            continue;
        }
        x += c / total_n;
        y += c * m / total_income;
        points.push((x.min(1.0), y.min(x).min(1.0)));
    }
    if let Some(last) = points.last_mut() {
        *last = (1.0, 1.0);
    }
    LorenzCurve::new(points)
}

/// Full staged fit of a binned table.
pub fn fit_report(table: &IncomeBinTable, opts: &FitOptions) -> Result<FitReport> {
    let cdf = empirical_cdf_income(table)?;
    let exp = fit_temperature(&cdf, opts.exp_window)?;
    let tail = fit_pareto_exponent(&cdf, opts.tail_window)?;
    if !(tail.value > 1.0) {
        return Err(Error::DegenerateCurve(format!("fitted Pareto exponent {} does not exceed 1", tail.value)));
    }
    let cross = fit_crossover(&cdf, exp.value, tail.value)?;
    let (mut t, mut alpha, mut r0) = (exp.value, tail.value, cross.r0);
    let (mut c1, mut c2) = (exp.prefactor, tail.prefactor);
    if opts.refine {
        (t, alpha, r0) = refine_joint(&cdf, table.total(), t, alpha, r0)?;
        c1 = fixed_slope_prefactor(&cdf, opts.exp_window, -1.0 / t, false)?;
        c2 = fixed_slope_prefactor(&cdf, opts.tail_window, -alpha, true)?;
    }
    let (objective, terms) = crossover_objective(&cdf, &TwoClassModel::new(t, alpha, r0)?);
    let mut degenerate = cross.degenerate;

    let mean_income = table_mean(table, alpha)?;
    let f = match tail_fraction(t, mean_income) {
        Ok(f) => f,
        // a tail-free table can fit T marginally above its mean
        Err(Error::NonPhysical { t, mean }) if t <= 1.05 * mean => {
            degenerate = true;
            0.0
        }
        Err(e) => return Err(e),
    };
    let boundary = class_boundary(t, alpha, c1, c2)?;
    let lorenz = empirical_lorenz(table, alpha)?;
    let gini_empirical = gini_from_curve(lorenz.points())?;

    Ok(FitReport {
        year: table.year,
        t,
        alpha,
        r0,
        r_star: boundary.r_star,
        upper_fraction: boundary.upper_fraction,
        mean_income,
        f,
        gini: gini_two_class(f),
        gini_empirical,
        residual: objective / terms.max(1) as f64,
        exp_mse: exp.mse,
        tail_mse: tail.mse,
        degenerate,
        refined: opts.refine,
        lorenz,
    })
}

impl FitReport {
    /// One whitespace-aligned row: year, T, alpha, r0, r*, f, G.
    pub fn table_row(&self) -> String {
        let year = self.year.map_or_else(|| "-".to_string(), |y| y.to_string());
        format!(
            "{year:>6} {:>8.2} {:>6.3} {:>8.2} {:>8.2} {:>6.3} {:>6.3}",
            self.t, self.alpha, self.r0, self.r_star, self.f, self.gini
        )
    }

    pub fn table_header() -> &'static str {
        "  year        T  alpha       r0       r*      f      G"
    }

    pub fn write_lorenz_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        w.write_record(["population_fraction", "income_fraction"]).map_err(map)?;
        for (x, y) in self.lorenz.points() {
            w.write_record([format!("{x}"), format!("{y}")]).map_err(map)?;
        }
        w.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

/// Settings for a model-generated table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
    pub r0: f64,
    pub samples: u64,
    pub levels: usize,
    pub seed: u64,
    /// Smallest complementary probability of the highest level.
    #[serde(default = "default_c_min")]
    pub c_min: f64,
}

fn default_c_min() -> f64 {
    1e-4
}

/// Draws `samples` incomes from the model and counts them against
/// `levels` levels at model quantiles whose tail probabilities run
/// log-evenly from 1 down to `c_min`. A sample lies at or above level `k`
/// exactly when its uniform tail probability is at most `C_k`.
pub fn synthetic_table(spec: &SyntheticSpec) -> Result<IncomeBinTable> {
    if spec.levels < 2 || spec.samples == 0 {
        return Err(Error::domain("synthetic table needs at least 2 levels and 1 sample"));
    }
    if !(spec.c_min > 0.0 && spec.c_min < 1.0) {
        return Err(Error::domain(format!("c_min must lie in (0, 1), got {}", spec.c_min)));
    }
    let model = TwoClassModel::new(spec.t, spec.alpha, spec.r0)?;
    let step = spec.c_min.ln() / (spec.levels - 1) as f64;
    let tail_probs: Vec<f64> = (0..spec.levels).map(|k| (step * k as f64).exp()).collect();
    let mut levels = Vec::with_capacity(spec.levels);
    levels.push(0.0);
    for &c in &tail_probs[1..] {
        levels.push(model.inverse_ccdf(c)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_bin = vec![0u64; spec.levels];
    for _ in 0..spec.samples {
        // tail probability of the sampled income; uniform on (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        // highest level k with C_k >= u
        let k = tail_probs.partition_point(|&c| c >= u) - 1;
        in_bin[k] += 1;
    }
    IncomeBinTable::new(
        None,
        levels,
        in_bin.into_iter().map(|c| c as f64).collect(),
        CountMode::InBin,
    )
}
