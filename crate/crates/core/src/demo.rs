//! A small ready-made city: three junctions, four roads, two bus routes,
//! three buses. Used by the bundled example generator, the test suites,
//! and the README walkthrough.

use std::fs;
use std::path::{Path, PathBuf};

use crate::datacenter::config::{
    ConfigError, RawBus, RawCity, RawConfig, RawJunction, RawOdRoad, RawRoad, RawRoute, RawStop,
    RawTuning,
};
use crate::pnm;
use crate::raster::{Mask, Raster};
use crate::transit::{geo_distance, GeoPoint};

// Junction coordinates, roughly 600 m apart.
const AB_CHOWK: [f64; 2] = [18.5160, 73.8410]; // J1
const NAL_STOP: [f64; 2] = [18.5125, 73.8370]; // J2
const GARWARE: [f64; 2] = [18.5195, 73.8455]; // J3
const CENTER: [f64; 2] = [18.5160, 73.8410];

const FRAME_W: u32 = 64;
const FRAME_H: u32 = 48;

fn hourly_profile(scale: f64) -> Vec<f64> {
    // veh/min with morning and evening peaks
    let shape = [
        0.3, 0.2, 0.2, 0.2, 0.3, 0.8, 2.0, 4.5, 6.0, 5.0, 3.5, 3.0, 3.0, 3.2, 3.5, 4.0, 5.0,
        6.5, 6.0, 4.0, 2.5, 1.5, 1.0, 0.5,
    ];
    shape.iter().map(|r| r * scale).collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    geo_distance(GeoPoint::new(a[0], a[1]).unwrap(), GeoPoint::new(b[0], b[1]).unwrap()).round()
}

fn road(
    id: &str,
    from: [f64; 2],
    to: [f64; 2],
    lanes: u32,
    junction: &str,
    demand_scale: f64,
) -> RawRoad {
    RawRoad {
        id: id.to_string(),
        baseline: format!("rasters/{id}_baseline.ppm"),
        mask: format!("rasters/{id}_mask.pbm"),
        length_m: dist(from, to),
        lanes,
        polyline: vec![from, to],
        junction: junction.to_string(),
        arrival_per_min: hourly_profile(demand_scale),
        capture_interval_s: None,
    }
}

fn stop(id: &str, name: &str, at: [f64; 2], offset_s: u32) -> RawStop {
    RawStop { id: id.to_string(), name: name.to_string(), lat: at[0], lon: at[1], offset_s }
}

/// Write the demo city (config plus rasters) into `dir`; returns the
/// config file path.
pub fn write_demo_city(dir: &Path) -> Result<PathBuf, ConfigError> {
    let rasters = dir.join("rasters");
    fs::create_dir_all(&rasters)
        .map_err(|e| ConfigError::Io { path: rasters.clone(), source: e })?;

    let roads = [
        // two-lane arterials into AB Chowk, one-lane links outward
        ("fc_road", GARWARE, AB_CHOWK, 2, "J1", 4.5),
        ("jm_road", NAL_STOP, AB_CHOWK, 2, "J1", 3.0),
        ("karve_road", AB_CHOWK, NAL_STOP, 1, "J2", 2.2),
        ("senapati_road", AB_CHOWK, GARWARE, 1, "J3", 1.6),
    ];

    for (i, (id, ..)) in roads.iter().enumerate() {
        let shade = 195 + 5 * i as u8;
        let baseline = Raster::filled(FRAME_W, FRAME_H, [shade, shade, shade]);
        let mut mask = Mask::filled(FRAME_W, FRAME_H, false);
        for y in 4..FRAME_H - 2 {
            for x in 2..FRAME_W - 2 {
                mask.set(x, y, true);
            }
        }
        let baseline_path = rasters.join(format!("{id}_baseline.ppm"));
        pnm::save_ppm(&baseline_path, &baseline)
            .map_err(|e| ConfigError::Raster { path: baseline_path.clone(), source: e })?;
        let mask_path = rasters.join(format!("{id}_mask.pbm"));
        pnm::save_pbm(&mask_path, &mask)
            .map_err(|e| ConfigError::Raster { path: mask_path.clone(), source: e })?;
    }

    let raw = RawConfig {
        city: RawCity {
            name: "demo-city".into(),
            center: CENTER,
            start_time_s: 345_600, // Monday 00:00 UTC
            capture_interval_s: 30,
            gps_interval_s: 10,
            seed: 0,
        },
        tuning: RawTuning::default(),
        gazetteer: [
            ("AB Chowk", AB_CHOWK),
            ("Nal Stop", NAL_STOP),
            ("Garware Chowk", GARWARE),
            ("City Center", CENTER),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        road: roads
            .iter()
            .map(|&(id, from, to, lanes, junction, scale)| {
                road(id, from, to, lanes, junction, scale)
            })
            .collect(),
        junction: vec![
            RawJunction {
                id: "J1".into(),
                approaches: vec!["fc_road".into(), "jm_road".into()],
                cycle_s: 120,
                lost_time_s: 5,
                min_green_s: 10,
                max_green_s: 90,
                max_delta_s: 5,
                greens: None,
            },
            RawJunction {
                id: "J2".into(),
                approaches: vec!["karve_road".into(), "jm_road".into()],
                cycle_s: 120,
                lost_time_s: 5,
                min_green_s: 10,
                max_green_s: 90,
                max_delta_s: 5,
                greens: None,
            },
            RawJunction {
                id: "J3".into(),
                approaches: vec!["senapati_road".into(), "fc_road".into()],
                cycle_s: 120,
                lost_time_s: 5,
                min_green_s: 10,
                max_green_s: 90,
                max_delta_s: 5,
                greens: None,
            },
        ],
        route: vec![
            RawRoute {
                id: "R1".into(),
                polyline: vec![GARWARE, AB_CHOWK, NAL_STOP],
                stops: vec![
                    stop("S_GAR", "Garware Chowk", GARWARE, 0),
                    stop("S_AB", "AB Chowk", AB_CHOWK, 300),
                    stop("S_NAL", "Nal Stop", NAL_STOP, 600),
                ],
            },
            RawRoute {
                id: "R2".into(),
                polyline: vec![NAL_STOP, AB_CHOWK, GARWARE],
                stops: vec![
                    stop("S_NAL", "Nal Stop", NAL_STOP, 0),
                    stop("S_AB", "AB Chowk", AB_CHOWK, 300),
                    stop("S_GAR", "Garware Chowk", GARWARE, 600),
                ],
            },
        ],
        bus: vec![
            RawBus { no: "101".into(), route: "R1".into(), free_speed_mps: 10.0, start_progress_m: 0.0 },
            RawBus { no: "102".into(), route: "R1".into(), free_speed_mps: 10.0, start_progress_m: 800.0 },
            RawBus { no: "201".into(), route: "R2".into(), free_speed_mps: 10.0, start_progress_m: 100.0 },
        ],
        od_road: vec![
            RawOdRoad { source: "AB Chowk".into(), dest: "Nal Stop".into(), road: "karve_road".into() },
            RawOdRoad { source: "Nal Stop".into(), dest: "AB Chowk".into(), road: "jm_road".into() },
            RawOdRoad { source: "AB Chowk".into(), dest: "Garware Chowk".into(), road: "senapati_road".into() },
            RawOdRoad { source: "Garware Chowk".into(), dest: "AB Chowk".into(), road: "fc_road".into() },
        ],
    };

    let config_path = dir.join("config.toml");
    fs::write(&config_path, raw.to_toml()?)
        .map_err(|e| ConfigError::Io { path: config_path.clone(), source: e })?;
    Ok(config_path)
}
