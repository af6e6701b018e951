use std::path::PathBuf;

use chrono::NaiveDate;
use crashscope::geo::LonLat;
use crashscope::ingest::{
    dedupe, filter_category, filter_window, parse_events_path, spatial_filter, subcategory_shares, write_events,
    Boundary, CategoryFilter, ParseOptions, RejectionKind,
};
use crashscope::synth::{generate, null_scenario};
use crashscope::temporal::{build_table, TemporalFactor};
use crashscope::{Category, EventRecord, Severity, StudyWindow};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn window() -> StudyWindow {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    StudyWindow::new(d(2024, 11, 5), d(2025, 6, 2), [d(2024, 11, 9), d(2024, 11, 10)]).unwrap()
}

#[test]
fn ten_valid_two_malformed() {
    let out = parse_events_path(&fixture("events_12.csv"), &ParseOptions::default()).unwrap();
    assert_eq!(out.records.len(), 10);
    assert_eq!(out.rejections.len(), 2);
    let lat = &out.rejections[0];
    assert_eq!((lat.line, lat.id.as_deref()), (12, Some("E11")));
    assert_eq!(lat.kind, RejectionKind::InvalidCoordinate);
    assert_eq!(lat.reason, "latitude out of range");
    let ts = &out.rejections[1];
    assert_eq!((ts.line, ts.kind), (13, RejectionKind::Malformed));

    let first = &out.records[0];
    assert_eq!((first.lon, first.lat, first.severity), (55.27, 25.2, Severity::High));

    // window edges: first and last day of the window are both kept
    let kept = filter_window(out.records.clone(), &window());
    assert_eq!((kept.kept.len(), kept.removed.len()), (10, 0));

    // hand tally by period: Morning E01 E02 E09, Afternoon E03 E04,
    // Evening E05 E06 E10, Night E07 E08
    let t = build_table(&out.records, &TemporalFactor::TimeOfDay).unwrap();
    assert_eq!(t.observed(), &[[1, 2], [1, 1], [1, 2], [1, 1]]);
}

#[test]
fn five_records_with_shared_id() {
    let out = parse_events_path(&fixture("duplicates_5.csv"), &ParseOptions::default()).unwrap();
    assert_eq!(out.records.len(), 5);
    let d = dedupe(out.records);
    assert_eq!(d.kept.len(), 4);
    assert_eq!(d.removed.len(), 1);
    let a1 = d.kept.iter().find(|e| e.id == "A1").unwrap();
    assert_eq!(a1.category, Category::VehicleObject, "first occurrence wins");
}

#[test]
fn missing_column_is_fatal() {
    let mut opts = ParseOptions::default();
    opts.columns.severity = "injury_level".into();
    let err = parse_events_path(&fixture("events_12.csv"), &opts).unwrap_err();
    assert!(matches!(err, crashscope::Error::MissingColumn(c) if c == "injury_level"));
    assert!(parse_events_path(&fixture("no_such_file.csv"), &ParseOptions::default()).is_err());
}

#[test]
fn geojson_boundary_file() {
    let b = Boundary::from_geojson_path(&fixture("square.geojson")).unwrap();
    assert!(b.contains(LonLat::new(55.5, 25.5)));
    assert!(b.contains(LonLat::new(56.0, 25.5)), "edge counts as inside");
    assert!(!b.contains(LonLat::new(56.5, 25.5)));
}

/// 33,604 collision records of which 124 lie outside the boundary; 1,367 of
/// them are pedestrian collisions with 2 outside. Cleaning must leave 33,480
/// and 1,365.
#[test]
fn boundary_filter_golden_counts() {
    let mut s = null_scenario(42);
    s.n_background = 33_604;
    let mut events = generate(&s).unwrap();
    let b = s.bbox;
    for (i, e) in events.iter_mut().enumerate() {
        e.category = if i < 1_367 {
            Category::Pedestrian
        } else {
            Category::VehicleVehicle
        };
        // 2 pedestrian and 122 other records pushed east of the box
        if i < 2 || (1_367..1_489).contains(&i) {
            e.lon = b.max_lon + 0.01 + 0.001 * (i % 7) as f64;
        }
    }
    let mut csv = Vec::new();
    write_events(&mut csv, &events).unwrap();
    let parsed = crashscope::ingest::parse_events(csv.as_slice(), &ParseOptions::default()).unwrap();
    assert_eq!(parsed.records.len(), 33_604);
    let boundary = b.to_boundary().unwrap();

    let cleaned = dedupe(filter_window(parsed.records, &s.window).kept).kept;
    let collisions = spatial_filter(
        filter_category(cleaned.clone(), CategoryFilter::Collision).kept,
        &boundary,
    );
    assert_eq!((collisions.kept.len(), collisions.removed.len()), (33_480, 124));

    let ped = filter_category(cleaned, CategoryFilter::Pedestrian).kept;
    assert_eq!(ped.len(), 1_367);
    let ped = spatial_filter(ped, &boundary);
    assert_eq!(ped.kept.len(), 1_365);
}

fn with_category(category: Category, n: usize) -> impl Iterator<Item = EventRecord> {
    let base = generate(&crashscope::synth::SynthScenario {
        n_background: 1,
        ..null_scenario(1)
    })
    .unwrap()
    .remove(0);
    (0..n).map(move |i| EventRecord {
        id: format!("{category}-{i}"),
        category,
        ..base.clone()
    })
}

#[test]
fn subcategory_table_shares() {
    let counts = [
        (Category::VehicleObject, 17_149),
        (Category::VehicleVehicle, 6_901),
        (Category::Motorcycle, 3_555),
        (Category::Rollover, 2_271),
        (Category::HitAndRun, 1_423),
        (Category::Pedestrian, 1_367),
        (Category::Bicycle, 719),
        (Category::Animal, 158),
        (Category::SpecialVehicle, 61),
    ];
    let events: Vec<EventRecord> = counts.iter().flat_map(|(c, n)| with_category(*c, *n)).collect();
    assert_eq!(events.len(), 33_604);
    let shares = subcategory_shares(&events);
    let printed = [51.03, 20.54, 10.58, 6.76, 4.23, 4.07, 2.14, 0.47, 0.18];
    for (s, p) in shares.iter().zip(printed) {
        assert_eq!(format!("{:.2}", s.percent), format!("{p:.2}"), "{:?}", s.category);
    }
    let rounded: f64 = shares.iter().map(|s| (s.percent * 100.0).round() / 100.0).sum();
    assert!((rounded - 100.0).abs() <= 0.05);
    assert_eq!(shares.iter().map(|s| s.count).sum::<usize>(), 33_604);
}
