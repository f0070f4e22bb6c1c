//! Per-capita energy consumption across countries: unit conversion,
//! population-weighted CDF and Lorenz curve.
//!
//! Each country is treated as `N_n` people consuming the same `ε_n`, so
//! within-country inequality is ignored.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::cdf::WeightedCdf;
use crate::distributions::{gini_from_curve, LorenzCurve};
use crate::error::{Error, Result};

/// Joules in one tonne of oil equivalent.
pub const TOE_JOULES: f64 = 41.85e9;
/// Seconds in a 365.25-day year.
pub const YEAR_SECONDS: f64 = 3.15576e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyUnit {
    /// Country total in kilotonnes of oil equivalent per year.
    Ktoe,
    /// Already per person, in kW.
    PerCapitaKw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub name: String,
    pub label: String,
    pub year: i32,
    pub value: f64,
    pub unit: EnergyUnit,
    pub population: f64,
}

impl CountryRecord {
    pub fn new(
        name: impl Into<String>,
        label: impl Into<String>,
        year: i32,
        value: f64,
        unit: EnergyUnit,
        population: f64,
    ) -> Result<Self> {
        let name = name.into();
        if !(population >= 0.0 && population.is_finite()) {
            return Err(Error::domain(format!("{name}: population must be non-negative, got {population}")));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::domain(format!("{name}: energy must be non-negative, got {value}")));
        }
        Ok(CountryRecord { name, label: label.into(), year, value, unit, population })
    }
}

/// kW per person for a country total in ktoe/year.
pub fn ktoe_to_kw_per_capita(ktoe: f64, population: f64) -> Result<f64> {
    if !(population > 0.0) {
        return Err(Error::domain(format!("population must be positive, got {population}")));
    }
    // ktoe -> toe -> J, per second, per person, W -> kW
    Ok(ktoe * 1000.0 * TOE_JOULES / YEAR_SECONDS / population / 1000.0)
}

pub fn per_capita_kw(record: &CountryRecord) -> Result<f64> {
    match record.unit {
        EnergyUnit::Ktoe => ktoe_to_kw_per_capita(record.value, record.population),
        EnergyUnit::PerCapitaKw => {
            if !(record.population > 0.0) {
                return Err(Error::domain(format!("{}: population must be positive", record.name)));
            }
            Ok(record.value)
        }
    }
}

/// Joined records and the number of rows discarded on the way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub records: Vec<CountryRecord>,
    /// Rows for the year with a missing or non-numeric value, or without a
    /// partner in the other file.
    pub dropped: usize,
}

struct Row {
    value: Option<f64>,
    label: Option<String>,
}

fn read_year<R: Read>(input: R, source_name: &str, year: i32) -> Result<BTreeMap<String, Row>> {
    let fmt = |line: u64, message: String| Error::Format {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| fmt(1, e.to_string()))?.clone();
    let expected = ["country", "year", "value"];
    if headers.len() < 3 || headers.iter().take(3).zip(expected).any(|(h, e)| h != e) {
        return Err(fmt(1, "expected header country,year,value[,label]".into()));
    }
    let mut rows = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| fmt(line, e.to_string()))?;
        let name = rec.get(0).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(fmt(line, "empty country name".into()));
        }
        let y: i32 = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| fmt(line, format!("year is not an integer: '{}'", rec.get(1).unwrap_or(""))))?;
        if y != year {
            continue;
        }
        let value = rec.get(2).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite() && *v >= 0.0);
        let label = rec.get(3).filter(|l| !l.is_empty()).map(str::to_string);
        if rows.insert(name.clone(), Row { value, label }).is_some() {
            return Err(fmt(line, format!("duplicate row for {name} in {year}")));
        }
    }
    Ok(rows)
}

fn default_label(name: &str) -> String {
    name.chars().filter(|c| c.is_alphanumeric()).take(3).collect::<String>().to_uppercase()
}

/// Inner join of energy and population tables (`country,year,value[,label]`)
/// on country name for one year. Records come out sorted by name.
pub fn ingest_wri<E: Read, P: Read>(
    energy: E,
    energy_name: &str,
    population: P,
    population_name: &str,
    year: i32,
    unit: EnergyUnit,
) -> Result<IngestReport> {
    let energy = read_year(energy, energy_name, year)?;
    let population = read_year(population, population_name, year)?;
    let mut dropped = 0;
    let mut records = Vec::new();
    for (name, e) in &energy {
        let p = population.get(name);
        match (e.value, p.and_then(|p| p.value)) {
            (Some(v), Some(n)) if n > 0.0 => {
                let label = e
                    .label
                    .clone()
                    .or_else(|| p.and_then(|p| p.label.clone()))
                    .unwrap_or_else(|| default_label(name));
                records.push(CountryRecord::new(name.clone(), label, year, v, unit, n)?);
            }
            _ => {
                dropped += 1;
                // the partner row is discarded too
                if p.is_some() {
                    dropped += 1;
                }
            }
        }
    }
    dropped += population.keys().filter(|k| !energy.contains_key(*k)).count();
    if records.is_empty() {
        return Err(Error::EmptyJoin { dropped });
    }
    Ok(IngestReport { records, dropped })
}

/// One country on the consumption axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyPoint {
    pub label: String,
    pub kw: f64,
    pub population: f64,
}

/// Records converted to kW per person, sorted ascending with ties broken
/// by label.
pub fn sorted_points(records: &[CountryRecord]) -> Result<Vec<EnergyPoint>> {
    if records.is_empty() {
        return Err(Error::domain("no country records"));
    }
    let mut pts = records
        .iter()
        .map(|r| {
            Ok(EnergyPoint {
                label: r.label.clone(),
                kw: per_capita_kw(r)?,
                population: r.population,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    pts.sort_by(|a, b| a.kw.total_cmp(&b.kw).then_with(|| a.label.cmp(&b.label)));
    Ok(pts)
}

/// Population-weighted complementary CDF of per-capita consumption.
pub fn weighted_cdf(records: &[CountryRecord]) -> Result<WeightedCdf> {
    let pairs: Vec<(f64, f64)> = sorted_points(records)?.iter().map(|p| (p.kw, p.population)).collect();
    WeightedCdf::from_sorted(&pairs)
}

/// Population-weighted mean consumption, kW per person.
pub fn world_average(records: &[CountryRecord]) -> Result<f64> {
    let pts = sorted_points(records)?;
    let pop: f64 = pts.iter().map(|p| p.population).sum();
    Ok(pts.iter().map(|p| p.kw * p.population).sum::<f64>() / pop)
}

/// Lorenz curve over countries in ascending consumption order, starting at
/// `(0, 0)`.
pub fn lorenz_energy(records: &[CountryRecord]) -> Result<LorenzCurve> {
    if records.len() < 2 {
        return Err(Error::domain("Lorenz curve needs at least two countries"));
    }
    let pts = sorted_points(records)?;
    let pop: f64 = pts.iter().map(|p| p.population).sum();
    let energy: f64 = pts.iter().map(|p| p.kw * p.population).sum();
    if !(energy > 0.0) {
        return Err(Error::DegenerateCurve("total energy consumption is zero".into()));
    }
    let mut points = Vec::with_capacity(pts.len() + 1);
    points.push((0.0, 0.0));
    let (mut x, mut y) = (0.0, 0.0);
    for p in &pts {
        x += p.population;
        y += p.kw * p.population;
        let (xf, yf) = (x / pop, y / energy);
        points.push((xf, yf.min(xf)));
    }
    if let Some(last) = points.last_mut() {
        *last = (1.0, 1.0);
    }
    LorenzCurve::new(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeProfile {
    /// Slope of each segment with positive width.
    pub slopes: Vec<f64>,
    /// `x` of the vertex with the largest slope increase.
    pub kink_x: f64,
    pub max_jump: f64,
}

pub fn slope_profile(curve: &LorenzCurve) -> Result<SlopeProfile> {
    let pts = curve.points();
    if pts.len() < 3 {
        return Err(Error::domain("slope profile needs at least three points"));
    }
    let segs: Vec<(f64, f64)> = pts
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| (w[0].0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
        .collect();
    let slopes: Vec<f64> = segs.iter().map(|s| s.1).collect();
    let (mut kink_x, mut max_jump) = (segs.get(1).map_or(0.0, |s| s.0), 0.0);
    for w in segs.windows(2) {
        let jump = w[1].1 - w[0].1;
        if jump > max_jump {
            max_jump = jump;
            kink_x = w[1].0;
        }
    }
    Ok(SlopeProfile { slopes, kink_x, max_jump })
}

/// `exp(-ε/T)` at each ε: the parameter-free exponential comparison.
pub fn exponential_overlay(t: f64, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("overlay temperature must be positive, got {t}")));
    }
    Ok(eps.iter().map(|&e| (e, (-e / t).exp())).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    pub year: i32,
    pub world_avg_kw: f64,
    pub gini: f64,
    pub kink_x: f64,
    pub countries: usize,
    pub dropped: usize,
}

pub fn summarize(year: i32, records: &[CountryRecord], dropped: usize) -> Result<EnergySummary> {
    let curve = lorenz_energy(records)?;
    Ok(EnergySummary {
        year,
        world_avg_kw: world_average(records)?,
        gini: gini_from_curve(curve.points())?,
        kink_x: slope_profile(&curve)?.kink_x,
        countries: records.len(),
        dropped,
    })
}

/// Per-capita consumption of 22 countries in 1990, 2000 and 2005, with
/// approximate mid-year populations (millions) for weighting.
pub mod fixture {
    use super::{CountryRecord, EnergyUnit};
    use crate::error::{Error, Result};

    pub const YEARS: [i32; 3] = [1990, 2000, 2005];

    /// Global per-capita averages (kW) reported with the country values.
    pub const WORLD_AVERAGE_KW: [f64; 3] = [2.2, 2.2, 2.3];

    // name, label, kW (1990, 2000, 2005), population in millions (1990, 2000, 2005)
    #[rustfmt::skip]
    const ROWS: [(&str, &str, [f64; 3], [f64; 3]); 22] = [
        ("Australia", "AUS", [6.9, 7.7, 7.9], [17.1, 19.2, 20.3]),
        ("Bahrain", "BHR", [13.0, 12.8, 14.9], [0.50, 0.67, 0.73]),
        ("Brazil", "BRA", [1.2, 1.4, 1.5], [149.4, 174.8, 186.0]),
        ("Canada", "CAN", [10.0, 10.9, 11.3], [27.7, 30.7, 32.2]),
        ("China", "CHN", [1.0, 1.2, 1.7], [1135.0, 1263.0, 1304.0]),
        ("Cuba", "CUB", [2.1, 1.4, 1.2], [10.6, 11.1, 11.3]),
        ("France", "FRA", [5.3, 5.8, 6.0], [56.7, 59.0, 61.0]),
        ("Germany", "DEU", [6.0, 5.6, 5.6], [79.4, 82.2, 82.5]),
        ("Iceland", "ISL", [11.3, 15.3, 16.3], [0.255, 0.281, 0.296]),
        ("India", "IND", [0.5, 0.6, 0.6], [870.0, 1053.0, 1094.0]),
        ("Iran", "IRN", [1.6, 2.4, 3.1], [56.7, 66.1, 69.5]),
        ("Israel", "ISR", [3.6, 4.2, 3.9], [4.66, 6.3, 6.9]),
        ("Japan", "JPN", [4.8, 5.5, 5.5], [123.5, 126.8, 127.8]),
        ("Kenya", "KEN", [0.7, 0.6, 0.7], [23.4, 31.3, 35.6]),
        ("Kuwait", "KWT", [5.3, 12.2, 13.9], [2.1, 2.0, 2.7]),
        ("Mexico", "MEX", [2.0, 2.0, 2.3], [83.9, 98.0, 104.0]),
        ("Netherlands Antilles", "ANT", [10.4, 10.2, 11.9], [0.19, 0.18, 0.18]),
        ("Russia", "RUS", [7.9, 5.6, 6.0], [148.0, 146.6, 143.0]),
        ("Arab Emirates", "ARE", [16.1, 14.7, 15.2], [1.8, 3.0, 4.1]),
        ("United Kingdom", "GBR", [4.9, 5.3, 5.2], [57.2, 58.9, 60.2]),
        ("United States", "USA", [10.0, 10.8, 10.4], [249.6, 282.2, 296.0]),
        ("Qatar", "QAT", [18.1, 25.6, 26.5], [0.47, 0.59, 0.82]),
    ];

    fn year_index(year: i32) -> Result<usize> {
        YEARS
            .iter()
            .position(|&y| y == year)
            .ok_or_else(|| Error::domain(format!("fixture covers 1990, 2000 and 2005, not {year}")))
    }

    /// Per-capita records for `year`.
    pub fn records(year: i32) -> Result<Vec<CountryRecord>> {
        let k = year_index(year)?;
        ROWS.iter()
            .map(|(name, label, kw, pop)| {
                CountryRecord::new(*name, *label, year, kw[k], EnergyUnit::PerCapitaKw, pop[k] * 1e6)
            })
            .collect()
    }

    pub fn world_average_kw(year: i32) -> Result<f64> {
        Ok(WORLD_AVERAGE_KW[year_index(year)?])
    }

    /// The fixture as a pair of `country,year,value,label` CSV texts:
    /// per-capita kW and population.
    pub fn csv_texts(year: i32) -> Result<(String, String)> {
        let mut energy = String::from("country,year,value,label\n");
        let mut population = String::from("country,year,value,label\n");
        for r in records(year)? {
            energy.push_str(&format!("{},{},{},{}\n", r.name, year, r.value, r.label));
            population.push_str(&format!("{},{},{},{}\n", r.name, year, r.population, r.label));
        }
        Ok((energy, population))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kw(label: &str, kw: f64, pop: f64) -> CountryRecord {
        CountryRecord::new(label, label, 2005, kw, EnergyUnit::PerCapitaKw, pop).unwrap()
    }

    #[test]
    fn unit_conversion() {
        let w = ktoe_to_kw_per_capita(1e-3, 1.0).unwrap();
        assert!((w - 41.85e9 / 3.15576e7 / 1000.0).abs() < 1e-12);
        assert!((w - 1.3261).abs() < 1e-4);
        assert_eq!(ktoe_to_kw_per_capita(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(ktoe_to_kw_per_capita(5.0, 20.0).unwrap() * 2.0, ktoe_to_kw_per_capita(5.0, 10.0).unwrap());
        assert!(ktoe_to_kw_per_capita(1.0, 0.0).is_err());
    }

    #[test]
    fn cdf_and_average_examples() {
        let c = weighted_cdf(&[kw("AAA", 2.0, 5.0)]).unwrap();
        assert_eq!(c.ccdf(), &[1.0]);
        let recs = [kw("BBB", 3.0, 1.0), kw("AAA", 1.0, 1.0)];
        let c = weighted_cdf(&recs).unwrap();
        assert_eq!(c.values(), &[1.0, 3.0]);
        assert_eq!(c.ccdf(), &[1.0, 0.5]);
        assert_eq!(world_average(&recs).unwrap(), 2.0);
        assert!(weighted_cdf(&[]).is_err());
    }

    #[test]
    fn lorenz_examples() {
        let eq = lorenz_energy(&[kw("AAA", 2.0, 1.0), kw("BBB", 2.0, 1.0)]).unwrap();
        assert!(eq.gini().abs() < 1e-12);
        let skew = lorenz_energy(&[kw("AAA", 0.0, 1e9), kw("BBB", 1.0, 1.0)]).unwrap();
        assert!(skew.gini() > 0.999);
        assert!(matches!(
            lorenz_energy(&[kw("AAA", 0.0, 1.0), kw("BBB", 0.0, 1.0)]),
            Err(Error::DegenerateCurve(_))
        ));
    }

    #[test]
    fn kink_of_two_segments() {
        let curve = LorenzCurve::new(vec![(0.0, 0.0), (0.35, 0.1), (0.7, 0.2), (0.85, 0.6), (1.0, 1.0)]).unwrap();
        let p = slope_profile(&curve).unwrap();
        assert!((p.kink_x - 0.7).abs() < 1e-12);
        let diag = LorenzCurve::new(vec![(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]).unwrap();
        let p = slope_profile(&diag).unwrap();
        assert!(p.slopes.iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert_eq!(p.max_jump, 0.0);
    }

    #[test]
    fn join_semantics() {
        let e = "country,year,value\nUSA,2005,100\n";
        let p = "country,year,value\nUSA,2005,3\n";
        let r = ingest_wri(e.as_bytes(), "e", p.as_bytes(), "p", 2005, EnergyUnit::Ktoe).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.dropped, 0);
        assert_eq!(r.records[0].label, "USA");
        let none = "country,year,value\n";
        assert!(matches!(
            ingest_wri(e.as_bytes(), "e", none.as_bytes(), "p", 2005, EnergyUnit::Ktoe),
            Err(Error::EmptyJoin { dropped: 1 })
        ));
    }

    #[test]
    fn bad_rows_and_files() {
        let e = "country,year,value\nUSA,2005,n/a\nIndia,2005,10\nChina,1990,5\n";
        let p = "country,year,value\nUSA,2005,3\nIndia,2005,2\n";
        let r = ingest_wri(e.as_bytes(), "e", p.as_bytes(), "p", 2005, EnergyUnit::Ktoe).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.dropped, 2);
        let bad = "country,year,value\nUSA,20x5,1\n";
        match ingest_wri(bad.as_bytes(), "e.csv", p.as_bytes(), "p", 2005, EnergyUnit::Ktoe) {
            Err(Error::Format { line, source_name, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(source_name, "e.csv");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ingest_wri("name,v\n".as_bytes(), "e", p.as_bytes(), "p", 2005, EnergyUnit::Ktoe),
            Err(Error::Format { line: 1, .. })
        ));
    }

    #[test]
    fn fixture_shape() {
        for y in fixture::YEARS {
            assert_eq!(fixture::records(y).unwrap().len(), 22);
        }
        assert!(fixture::records(1995).is_err());
        let (e, p) = fixture::csv_texts(2005).unwrap();
        let r = ingest_wri(e.as_bytes(), "e", p.as_bytes(), "p", 2005, EnergyUnit::PerCapitaKw).unwrap();
        assert_eq!(r.records.len(), 22);
        let direct = world_average(&fixture::records(2005).unwrap()).unwrap();
        assert!((world_average(&r.records).unwrap() - direct).abs() < 1e-12);
    }
}
