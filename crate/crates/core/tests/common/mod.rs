//! Shared fixtures and oracles for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use city_its::datacenter::config::{RawCity, RawConfig, RawTuning};
use city_its::datacenter::{Stores, WorldConfig};
use city_its::simulator::CityModel;
use city_its::transit::{Bus, BusStop, GeoPoint, Polyline, Route, EARTH_RADIUS_M};

pub const M_PER_DEG_EQ: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

pub fn equator_point(meters: f64) -> GeoPoint {
    GeoPoint::new(0.0, meters / M_PER_DEG_EQ).unwrap()
}

/// East-west polyline along the equator with vertices at the given meter
/// marks, so arc lengths are exact by construction.
pub fn equator_line(marks: &[f64]) -> Polyline {
    Polyline::new(marks.iter().map(|&m| equator_point(m)).collect()).unwrap()
}

fn stop(id: &str, name: &str, at_m: f64) -> BusStop {
    BusStop { stop_id: id.into(), name: name.into(), location: equator_point(at_m) }
}

/// The canonical gateway fixture: a 2000 m route whose "AB Chowk" stop sits
/// at 1000 m, one bus 600 m upstream at 10 m/s, no congestion data. The
/// query "BUS AB Chowk;Nal Stop" must answer 600 m / 60 s.
pub fn eta_fixture() -> (Arc<WorldConfig>, Stores) {
    let line = equator_line(&[0.0, 1000.0, 2000.0]);
    let route = Route::new(
        "R",
        vec![
            (stop("S0", "Origin", 0.0), 0),
            (stop("S1", "AB Chowk", 1000.0), 100),
            (stop("S2", "Nal Stop", 2000.0), 200),
        ],
        line,
    )
    .unwrap();
    let bus = Bus {
        bus_no: "105".into(),
        route_id: "R".into(),
        progress_m: 400.0,
        last_fix: (route.polyline.at(400.0), 0),
        free_speed_mps: 10.0,
    };
    let city = CityModel {
        name: "eta-fixture".into(),
        roads: vec![],
        initial_plans: vec![],
        routes: vec![route],
        buses: vec![bus],
        gps_interval_s: 10,
        start_time_s: 0,
        seed: 0,
    };
    let raw = RawConfig {
        city: RawCity {
            name: "eta-fixture".into(),
            center: [0.0, 0.0],
            start_time_s: 0,
            capture_interval_s: 30,
            gps_interval_s: 10,
            seed: 0,
        },
        tuning: RawTuning::default(),
        gazetteer: BTreeMap::new(),
        road: vec![],
        junction: vec![],
        route: vec![],
        bus: vec![],
        od_road: vec![],
    };
    let mut gazetteer = BTreeMap::new();
    gazetteer.insert("ab chowk".to_string(), equator_point(1000.0));
    let world = Arc::new(WorldConfig {
        city,
        gazetteer,
        od_roads: BTreeMap::new(),
        city_center: equator_point(0.0),
        pixel_tolerance: 10,
        raw,
    });
    let stores = Stores::new(&world);
    (world, stores)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // tied values share the average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(ry.iter()) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    num / (dx.sqrt() * dy.sqrt())
}
