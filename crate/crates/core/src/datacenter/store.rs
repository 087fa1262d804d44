//! Stores and snapshots.
//!
//! One writer (the pipeline) owns the stores; readers get immutable
//! `Snapshot`s, so a query never observes a torn state.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::congestion::{CongestionSample, HistoricalModel, TREND_WINDOW_S};
use crate::gateway::AccountStore;
use crate::signalctl::{JunctionState, SignalPlan};
use crate::simulator::{nearest_road, CityModel};
use crate::transit::{Bus, GeoPoint, GpsFix};

#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("sample timestamps for {road} must strictly increase ({prev} then {next})")]
    NonMonotonicSample { road: String, prev: u64, next: u64 },
}

/// Everything static for a run: the city model plus the gateway's
/// name-resolution tables and tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub city: CityModel,
    /// Lowercased place name -> coordinate.
    pub gazetteer: BTreeMap<String, GeoPoint>,
    /// Lowercased (source, destination) pair -> road id, for TRAFFIC queries.
    pub od_roads: BTreeMap<(String, String), String>,
    /// Network-location fallback for unresolvable sources.
    pub city_center: GeoPoint,
    pub pixel_tolerance: u8,
    /// The parsed config this world came from, kept so state directories
    /// can carry a self-contained copy.
    pub raw: crate::datacenter::config::RawConfig,
}

impl WorldConfig {
    /// Change the seed everywhere it is recorded (model and raw config).
    pub fn set_seed(&mut self, seed: u64) {
        self.city.seed = seed;
        self.raw.city.seed = seed;
    }

    pub fn gazetteer_lookup(&self, name: &str) -> Option<GeoPoint> {
        self.gazetteer.get(&name.trim().to_lowercase()).copied()
    }

    pub fn road_between(&self, source: &str, destination: &str) -> Option<String> {
        self.od_roads
            .get(&(source.trim().to_lowercase(), destination.trim().to_lowercase()))
            .cloned()
    }
}

/// Append-only, per-road, time-ordered congestion samples plus the
/// historical day/hour model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleStore {
    per_road: BTreeMap<String, Vec<CongestionSample>>,
    pub history: HistoricalModel,
}

impl SampleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, sample: CongestionSample) -> Result<(), StoreError> {
        let series = self.per_road.entry(sample.road_id.clone()).or_default();
        if let Some(last) = series.last() {
            if sample.timestamp_s <= last.timestamp_s {
                return Err(StoreError::NonMonotonicSample {
                    road: sample.road_id,
                    prev: last.timestamp_s,
                    next: sample.timestamp_s,
                });
            }
        }
        series.push(sample);
        Ok(())
    }

    pub fn latest(&self, road_id: &str) -> Option<&CongestionSample> {
        self.per_road.get(road_id).and_then(|s| s.last())
    }

    /// Samples with `now - span_s <= timestamp <= now`, in time order.
    pub fn window(&self, road_id: &str, now: u64, span_s: u64) -> &[CongestionSample] {
        let Some(series) = self.per_road.get(road_id) else { return &[] };
        let cutoff = now.saturating_sub(span_s);
        let start = series.partition_point(|s| s.timestamp_s < cutoff);
        let end = series.partition_point(|s| s.timestamp_s <= now);
        &series[start..end]
    }

    pub fn roads(&self) -> impl Iterator<Item = &str> {
        self.per_road.keys().map(String::as_str)
    }

    pub fn series(&self, road_id: &str) -> &[CongestionSample] {
        self.per_road.get(road_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All samples in (road, time) order.
    pub fn iter_all(&self) -> impl Iterator<Item = &CongestionSample> {
        self.per_road.values().flatten()
    }

    pub fn total_count(&self) -> usize {
        self.per_road.values().map(Vec::len).sum()
    }
}

/// Everything the writer task owns.
#[derive(Debug, Clone, PartialEq)]
pub struct Stores {
    pub samples: SampleStore,
    pub fixes: Vec<GpsFix>,
    pub tracked: BTreeMap<String, Bus>,
    pub junctions: Vec<JunctionState>,
    pub accounts: AccountStore,
    pub clock_s: u64,
}

impl Stores {
    pub fn new(world: &WorldConfig) -> Self {
        let tracked = world
            .city
            .buses
            .iter()
            .map(|b| (b.bus_no.clone(), b.clone()))
            .collect();
        let junctions =
            world.city.initial_plans.iter().cloned().map(JunctionState::new).collect();
        Stores {
            samples: SampleStore::new(),
            fixes: Vec::new(),
            tracked,
            junctions,
            accounts: AccountStore::new(),
            clock_s: world.city.start_time_s,
        }
    }

    pub fn plans(&self) -> Vec<SignalPlan> {
        self.junctions.iter().map(|j| j.plan.clone()).collect()
    }

    /// Immutable view of one logical instant. Subsequent writes to the
    /// stores never alter a snapshot already taken.
    pub fn snapshot(&self, world: &Arc<WorldConfig>) -> Snapshot {
        let mut latest = BTreeMap::new();
        let mut windows = BTreeMap::new();
        for road in self.samples.roads() {
            if let Some(s) = self.samples.latest(road) {
                latest.insert(road.to_string(), s.clone());
            }
            let window = self.samples.window(road, self.clock_s, TREND_WINDOW_S);
            if !window.is_empty() {
                windows.insert(road.to_string(), window.to_vec());
            }
        }
        Snapshot {
            clock_s: self.clock_s,
            latest,
            windows,
            buses: self.tracked.values().cloned().collect(),
            plans: self.plans(),
            world: Arc::clone(world),
        }
    }
}

/// A consistent, immutable view of the datacenter at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub clock_s: u64,
    pub latest: BTreeMap<String, CongestionSample>,
    pub windows: BTreeMap<String, Vec<CongestionSample>>,
    pub buses: Vec<Bus>,
    pub plans: Vec<SignalPlan>,
    pub world: Arc<WorldConfig>,
}

impl Snapshot {
    /// Latest congestion percent on the road nearest to a point (a bus's
    /// current road), 0 when nothing is known.
    pub fn congestion_at(&self, point: GeoPoint) -> f64 {
        nearest_road(&self.world.city, point)
            .and_then(|road| self.latest.get(road.road_id()))
            .map(|s| s.percent)
            .unwrap_or(0.0)
    }
}
