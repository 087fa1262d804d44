//! TOML city configuration.
//!
//! One file describes the whole world: roads (with baseline/mask raster
//! paths resolved relative to the config file), junctions, routes, buses,
//! the gazetteer, and the source/destination -> road table for TRAFFIC
//! queries. `load_config` turns it into a validated [`WorldConfig`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::congestion::{RoadProfile, PIXEL_TOLERANCE};
use crate::datacenter::store::WorldConfig;
use crate::pnm;
use crate::signalctl::{
    SignalPlan, DEFAULT_CYCLE_S, DEFAULT_LOST_TIME_S, DEFAULT_MAX_DELTA_S, DEFAULT_MAX_GREEN_S,
    DEFAULT_MIN_GREEN_S,
};
use crate::simulator::{CityModel, SimRoad, DEFAULT_CAPTURE_INTERVAL_S, DEFAULT_GPS_INTERVAL_S};
use crate::transit::{Bus, BusStop, GeoPoint, Polyline, Route, DEFAULT_FREE_SPEED_MPS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("cannot load raster {path}: {source}")]
    Raster {
        path: PathBuf,
        #[source]
        source: crate::pnm::PnmError,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    pub city: RawCity,
    #[serde(default)]
    pub tuning: RawTuning,
    /// Place name -> [lat, lon].
    #[serde(default)]
    pub gazetteer: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub road: Vec<RawRoad>,
    #[serde(default)]
    pub junction: Vec<RawJunction>,
    #[serde(default)]
    pub route: Vec<RawRoute>,
    #[serde(default)]
    pub bus: Vec<RawBus>,
    #[serde(default)]
    pub od_road: Vec<RawOdRoad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCity {
    pub name: String,
    /// [lat, lon]; the network-location fallback for unresolvable sources.
    pub center: [f64; 2],
    /// Simulation epoch (seconds since Unix epoch). Defaults to a Monday 00:00 UTC.
    #[serde(default = "default_start_time")]
    pub start_time_s: u64,
    #[serde(default = "default_capture_interval")]
    pub capture_interval_s: u32,
    #[serde(default = "default_gps_interval")]
    pub gps_interval_s: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_start_time() -> u64 {
    345_600 // 1970-01-05, a Monday
}

fn default_capture_interval() -> u32 {
    DEFAULT_CAPTURE_INTERVAL_S
}

fn default_gps_interval() -> u32 {
    DEFAULT_GPS_INTERVAL_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTuning {
    #[serde(default = "default_tolerance")]
    pub pixel_tolerance: u8,
}

impl Default for RawTuning {
    fn default() -> Self {
        RawTuning { pixel_tolerance: PIXEL_TOLERANCE }
    }
}

fn default_tolerance() -> u8 {
    PIXEL_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRoad {
    pub id: String,
    /// Baseline PPM path, relative to the config file.
    pub baseline: String,
    /// ROI mask path (P4, or P6 with white = road), relative to the config file.
    pub mask: String,
    pub length_m: f64,
    pub lanes: u32,
    /// [lat, lon] vertices.
    pub polyline: Vec<[f64; 2]>,
    /// Junction whose green gates this road's discharge.
    pub junction: String,
    /// Vehicles per minute by hour of day (24 entries).
    pub arrival_per_min: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_interval_s: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawJunction {
    pub id: String,
    pub approaches: Vec<String>,
    #[serde(default = "default_cycle")]
    pub cycle_s: u32,
    #[serde(default = "default_lost")]
    pub lost_time_s: u32,
    #[serde(default = "default_min_green")]
    pub min_green_s: u32,
    #[serde(default = "default_max_green")]
    pub max_green_s: u32,
    #[serde(default = "default_max_delta")]
    pub max_delta_s: u32,
    /// Initial greens; defaults to an even split of the budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greens: Option<BTreeMap<String, u32>>,
}

fn default_cycle() -> u32 {
    DEFAULT_CYCLE_S
}

fn default_lost() -> u32 {
    DEFAULT_LOST_TIME_S
}

fn default_min_green() -> u32 {
    DEFAULT_MIN_GREEN_S
}

fn default_max_green() -> u32 {
    DEFAULT_MAX_GREEN_S
}

fn default_max_delta() -> u32 {
    DEFAULT_MAX_DELTA_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRoute {
    pub id: String,
    pub polyline: Vec<[f64; 2]>,
    pub stops: Vec<RawStop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawStop {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub offset_s: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBus {
    pub no: String,
    pub route: String,
    #[serde(default = "default_free_speed")]
    pub free_speed_mps: f64,
    #[serde(default)]
    pub start_progress_m: f64,
}

fn default_free_speed() -> f64 {
    DEFAULT_FREE_SPEED_MPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawOdRoad {
    pub source: String,
    pub dest: String,
    pub road: String,
}

fn geo(pair: [f64; 2], what: &str) -> Result<GeoPoint, ConfigError> {
    GeoPoint::new(pair[0], pair[1]).map_err(|e| invalid(format!("{what}: {e}")))
}

fn geo_polyline(pairs: &[[f64; 2]], what: &str) -> Result<Polyline, ConfigError> {
    let points = pairs
        .iter()
        .map(|&p| geo(p, what))
        .collect::<Result<Vec<_>, _>>()?;
    Polyline::new(points).map_err(|e| invalid(format!("{what}: {e}")))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Build and validate the world; raster paths resolve against `base_dir`.
    pub fn into_world(self, base_dir: &Path) -> Result<WorldConfig, ConfigError> {
        let mut roads = Vec::new();
        for raw in &self.road {
            let baseline_path = base_dir.join(&raw.baseline);
            let baseline = pnm::load_ppm(&baseline_path)
                .map_err(|e| ConfigError::Raster { path: baseline_path.clone(), source: e })?;
            let mask_path = base_dir.join(&raw.mask);
            let mask = pnm::load_mask(&mask_path)
                .map_err(|e| ConfigError::Raster { path: mask_path.clone(), source: e })?;
            let profile = RoadProfile::new(
                raw.id.clone(),
                baseline,
                mask,
                raw.length_m,
                raw.lanes,
                raw.capture_interval_s.unwrap_or(self.city.capture_interval_s),
            )
            .map_err(|e| invalid(format!("road {}: {e}", raw.id)))?;
            let polyline = geo_polyline(&raw.polyline, &format!("road {} polyline", raw.id))?;
            let rates: [f64; 24] = raw
                .arrival_per_min
                .clone()
                .try_into()
                .map_err(|_| invalid(format!("road {}: arrival_per_min needs 24 entries", raw.id)))?;
            let road = SimRoad::new(profile, polyline, rates, raw.junction.clone())
                .map_err(|e| invalid(e.to_string()))?;
            roads.push(road);
        }
        if roads.iter().map(SimRoad::road_id).collect::<std::collections::BTreeSet<_>>().len()
            != roads.len()
        {
            return Err(invalid("duplicate road ids"));
        }

        let mut initial_plans = Vec::new();
        for raw in &self.junction {
            let plan = match &raw.greens {
                Some(greens) => SignalPlan::new(
                    raw.id.clone(),
                    greens.clone(),
                    raw.cycle_s,
                    raw.lost_time_s,
                    raw.min_green_s,
                    raw.max_green_s,
                    raw.max_delta_s,
                ),
                None => SignalPlan::equal_split(
                    raw.id.clone(),
                    &raw.approaches,
                    raw.cycle_s,
                    raw.lost_time_s,
                    raw.min_green_s,
                    raw.max_green_s,
                    raw.max_delta_s,
                ),
            }
            .map_err(|e| invalid(format!("junction {}: {e}", raw.id)))?;
            if let Some(greens) = &raw.greens {
                let mut wanted: Vec<&String> = raw.approaches.iter().collect();
                wanted.sort();
                let have: Vec<&String> = greens.keys().collect();
                if wanted != have {
                    return Err(invalid(format!(
                        "junction {}: greens must cover exactly the approaches",
                        raw.id
                    )));
                }
            }
            initial_plans.push(plan);
        }

        let mut routes = Vec::new();
        for raw in &self.route {
            let polyline = geo_polyline(&raw.polyline, &format!("route {} polyline", raw.id))?;
            let stops = raw
                .stops
                .iter()
                .map(|s| {
                    Ok((
                        BusStop {
                            stop_id: s.id.clone(),
                            name: s.name.clone(),
                            location: geo([s.lat, s.lon], &format!("stop {}", s.id))?,
                        },
                        s.offset_s,
                    ))
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            let route = Route::new(raw.id.clone(), stops, polyline)
                .map_err(|e| invalid(e.to_string()))?;
            routes.push(route);
        }

        let mut buses = Vec::new();
        for raw in &self.bus {
            let route = routes
                .iter()
                .find(|r| r.route_id == raw.route)
                .ok_or_else(|| invalid(format!("bus {} rides unknown route {}", raw.no, raw.route)))?;
            if buses.iter().any(|b: &Bus| b.bus_no == raw.no) {
                return Err(invalid(format!("duplicate bus number {}", raw.no)));
            }
            buses.push(Bus {
                bus_no: raw.no.clone(),
                route_id: raw.route.clone(),
                progress_m: raw.start_progress_m,
                last_fix: (route.polyline.at(raw.start_progress_m), self.city.start_time_s),
                free_speed_mps: raw.free_speed_mps,
            });
        }

        let city = CityModel {
            name: self.city.name.clone(),
            roads,
            initial_plans,
            routes,
            buses,
            gps_interval_s: self.city.gps_interval_s,
            start_time_s: self.city.start_time_s,
            seed: self.city.seed,
        };
        city.validate().map_err(|e| invalid(e.to_string()))?;

        let mut gazetteer = BTreeMap::new();
        for (name, pair) in &self.gazetteer {
            gazetteer.insert(name.trim().to_lowercase(), geo(*pair, &format!("gazetteer '{name}'"))?);
        }
        let mut od_roads = BTreeMap::new();
        for od in &self.od_road {
            if city.road(&od.road).is_none() {
                return Err(invalid(format!(
                    "od mapping {} -> {} names unknown road {}",
                    od.source, od.dest, od.road
                )));
            }
            od_roads.insert(
                (od.source.trim().to_lowercase(), od.dest.trim().to_lowercase()),
                od.road.clone(),
            );
        }

        let city_center = geo(self.city.center, "city center")?;
        let pixel_tolerance = self.tuning.pixel_tolerance;
        Ok(WorldConfig { city, gazetteer, od_roads, city_center, pixel_tolerance, raw: self })
    }
}

/// Load and validate a config file; raster paths resolve against the
/// file's directory.
pub fn load_config(path: &Path) -> Result<WorldConfig, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    let raw = RawConfig::parse(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    raw.into_world(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_round_trips_through_toml() {
        let raw = RawConfig {
            city: RawCity {
                name: "t".into(),
                center: [18.5, 73.8],
                start_time_s: default_start_time(),
                capture_interval_s: 30,
                gps_interval_s: 10,
                seed: 7,
            },
            tuning: RawTuning::default(),
            gazetteer: BTreeMap::from([("AB Chowk".to_string(), [18.51, 73.84])]),
            road: vec![],
            junction: vec![],
            route: vec![],
            bus: vec![],
            od_road: vec![],
        };
        let text = raw.to_toml().unwrap();
        let back = RawConfig::parse(&text).unwrap();
        assert_eq!(back.city.name, "t");
        assert_eq!(back.city.seed, 7);
        assert_eq!(back.gazetteer["AB Chowk"], [18.51, 73.84]);
    }

    #[test]
    fn defaults_fill_in() {
        let text = r#"
            [city]
            name = "mini"
            center = [18.5, 73.8]
        "#;
        let raw = RawConfig::parse(text).unwrap();
        assert_eq!(raw.city.capture_interval_s, 30);
        assert_eq!(raw.city.gps_interval_s, 10);
        assert_eq!(raw.tuning.pixel_tolerance, PIXEL_TOLERANCE);
        assert_eq!(raw.city.start_time_s, 345_600);
    }
}
