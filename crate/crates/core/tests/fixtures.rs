use std::path::{Path, PathBuf};

use rosfit::fixtures::{self, load_fixture, write_fixture, HIDDEN_GLOBAL};
use rosfit::simulator::{simulate, simulate_unadjusted, AdjustmentSet};

fn data_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn shipped_fixtures_regenerate_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    for case in fixtures::all() {
        let out = tmp.path().join(&case.name);
        write_fixture(&case, &out).unwrap();
        let shipped = data_dir(&case.name);
        let mut names: Vec<_> = std::fs::read_dir(&shipped).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 12, "{}: {} files", case.name, names.len());
        for name in names {
            let want = std::fs::read(shipped.join(&name)).unwrap();
            let got = std::fs::read(out.join(&name)).unwrap();
            assert!(want == got, "{}/{} differs from the generator", case.name, name.to_string_lossy());
        }
    }
}

#[test]
fn loaded_fixtures_reproduce_their_scars() {
    for case in fixtures::all() {
        let loaded = load_fixture(&data_dir(&case.name)).unwrap();
        assert_eq!(loaded.landscape, case.landscape);
        assert_eq!(loaded.weather, case.weather);
        assert_eq!(loaded.ignition, case.ignition);
        let rerun = simulate(&loaded.landscape, &loaded.weather, &loaded.ignition, &loaded.manifest.hidden_x, &case.config).unwrap();
        assert_eq!(rerun, loaded.scars, "{}", case.name);
        assert!(loaded.scars.is_monotone());
    }
}

#[test]
fn circle_target_is_the_baseline() {
    let case = fixtures::circle_5x5();
    let base = simulate_unadjusted(&case.landscape, &case.weather, &case.ignition, &case.config).unwrap();
    assert_eq!(case.target().unwrap(), base);
    assert_eq!(base.grids()[0].burned_count(), 25);
}

#[test]
fn homogeneous_target_outgrows_the_baseline() {
    let case = fixtures::homogeneous_20x20();
    assert_eq!(case.hidden_x, AdjustmentSet::Global(HIDDEN_GLOBAL));
    let target = case.target().unwrap();
    let base = simulate_unadjusted(&case.landscape, &case.weather, &case.ignition, &case.config).unwrap();
    assert_eq!(target.len(), 7);
    for (t, b) in target.grids().iter().zip(base.grids()) {
        assert!(t.burned_count() > b.burned_count(), "{} vs {}", t.burned_count(), b.burned_count());
    }
}

#[test]
fn striped_fixture_covers_eight_fuels() {
    let case = fixtures::striped_8_fuels();
    assert_eq!(case.fuels(), (1..=8).collect::<Vec<_>>());
    let last = case.target().unwrap().last().unwrap().clone();
    for fuel in 1..=8u32 {
        let reached = (0..24).any(|r| (0..24).any(|c| case.landscape.fuel_at(r, c) == fuel && *last.get(r, c)));
        assert!(reached, "stripe {fuel} never burns");
    }
}

#[test]
fn unknown_fixture_name_is_rejected() {
    assert!(fixtures::by_name("nope").is_err());
    assert_eq!(fixtures::by_name("striped-8").unwrap().name, "striped-8");
}
