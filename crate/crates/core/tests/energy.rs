use ineqstat::distributions::gini_from_curve;
use ineqstat::energy::*;

fn per_capita(label: &str, kw: f64, pop: f64) -> CountryRecord {
    CountryRecord::new(label, label, 2005, kw, EnergyUnit::PerCapitaKw, pop).unwrap()
}

#[test]
fn ccdf_integrates_to_the_mean() {
    for year in fixture::YEARS {
        let recs = fixture::records(year).unwrap();
        let cdf = weighted_cdf(&recs).unwrap();
        let mut prev = 0.0;
        let mut integral = 0.0;
        for (v, c) in cdf.points() {
            integral += (v - prev) * c;
            prev = v;
        }
        let mean = world_average(&recs).unwrap();
        assert!((integral / mean - 1.0).abs() < 1e-12, "{year}: {integral} vs {mean}");
    }
}

#[test]
fn lorenz_is_convex_and_below_diagonal() {
    for year in fixture::YEARS {
        let curve = lorenz_energy(&fixture::records(year).unwrap()).unwrap();
        let prof = slope_profile(&curve).unwrap();
        assert!(prof.slopes.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(curve.points().iter().all(|&(x, y)| y <= x + 1e-12));
        let g = gini_from_curve(curve.points()).unwrap();
        assert!(g > 0.3 && g < 0.7, "{g}");
    }
}

#[test]
fn fixture_ratios_to_world_average() {
    let recs = fixture::records(2005).unwrap();
    let avg = fixture::world_average_kw(2005).unwrap();
    let find = |l: &str| recs.iter().find(|r| r.label == l).unwrap().value;
    assert!((find("USA") / avg - 4.5).abs() < 0.1);
    assert!((find("IND") / avg - 0.26).abs() < 0.01);
    assert!(find("QAT") > find("USA"));
}

#[test]
fn ingest_matches_fixture_records() {
    let (e, p) = fixture::csv_texts(2000).unwrap();
    let rep = ingest_wri(e.as_bytes(), "e.csv", p.as_bytes(), "p.csv", 2000, EnergyUnit::PerCapitaKw).unwrap();
    assert_eq!(rep.dropped, 0);
    let direct = fixture::records(2000).unwrap();
    assert_eq!(world_average(&rep.records).unwrap(), world_average(&direct).unwrap());
}

#[test]
fn ingest_drops_unmatched_and_other_years() {
    let energy = "country,year,value\nA,2005,1000\nB,2005,2000\nC,2005,500\nA,2004,9\n";
    let pop = "country,year,value\nA,2005,1000000\nB,2005,2000000\n";
    let rep = ingest_wri(energy.as_bytes(), "e", pop.as_bytes(), "p", 2005, EnergyUnit::Ktoe).unwrap();
    assert_eq!(rep.records.len(), 2);
    assert!(rep.dropped >= 1);
    let a = rep.records.iter().find(|r| r.name == "A").unwrap();
    assert!((per_capita_kw(a).unwrap() - ktoe_to_kw_per_capita(1000.0, 1e6).unwrap()).abs() < 1e-15);
    assert!(matches!(
        ingest_wri(energy.as_bytes(), "e", pop.as_bytes(), "p", 1999, EnergyUnit::Ktoe),
        Err(ineqstat::Error::EmptyJoin { .. })
    ));
}

#[test]
fn ties_break_by_label() {
    let a = [per_capita("ZZZ", 2.0, 1.0), per_capita("AAA", 2.0, 3.0), per_capita("MMM", 1.0, 1.0)];
    let pts = sorted_points(&a).unwrap();
    let labels: Vec<&str> = pts.iter().map(|p| p.label.as_str()).collect();
    assert_eq!(labels, ["MMM", "AAA", "ZZZ"]);
}

#[test]
fn summary_from_fixture() {
    let recs = fixture::records(1990).unwrap();
    let s = summarize(1990, &recs, 0).unwrap();
    assert_eq!(s.countries, 22);
    assert!(s.kink_x > 0.0 && s.kink_x < 1.0);
    let overlay = exponential_overlay(s.world_avg_kw, &[0.0, s.world_avg_kw]).unwrap();
    assert_eq!(overlay[0].1, 1.0);
    assert!((overlay[1].1 - (-1f64).exp()).abs() < 1e-15);
}
