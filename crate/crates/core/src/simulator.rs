//! Synthetic city: queues, frames, and GPS fixes.
//!
//! Replaces the camera/GSM/GPS hardware with a deterministic discrete-time
//! model. Vehicles arrive via a fractional accumulator (exact, no
//! randomness), discharge at saturation rate while their gate junction
//! shows green, and are rendered into frames as fixed dark blobs filling
//! the ROI from the stop line backwards so the pixel measure tracks the
//! queue monotonically.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::congestion::RoadProfile;
use crate::raster::Raster;
use crate::signalctl::{JunctionState, SignalPlan};
use crate::transit::{congestion_speed_factor, Bus, GpsFix, Polyline, Route};

/// Rough curb length one queued vehicle occupies.
pub const VEHICLE_SPACING_M: f64 = 7.5;
/// Saturation discharge while green, per lane.
pub const SATURATION_VEH_PER_S_PER_LANE: f64 = 0.5;
pub const DEFAULT_CAPTURE_INTERVAL_S: u32 = 30;
pub const DEFAULT_GPS_INTERVAL_S: u32 = 10;

/// Rendered vehicle blob: 6 px wide, 3 px tall, solid dark gray.
pub const VEHICLE_BLOB_W: u32 = 6;
pub const VEHICLE_BLOB_H: u32 = 3;
pub const VEHICLE_RGB: [u8; 3] = [30, 30, 30];

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("unknown road '{0}'")]
    UnknownRoad(String),
    #[error("invalid city model: {0}")]
    InvalidCity(String),
}

/// One simulated road: capture profile, geometry, demand, and the junction
/// whose green gates its discharge.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRoad {
    pub profile: RoadProfile,
    pub polyline: Polyline,
    pub capacity_veh: u32,
    /// Vehicles per minute arriving, by hour of day.
    pub arrival_per_min: [f64; 24],
    pub gate_junction: String,
}

impl SimRoad {
    pub fn new(
        profile: RoadProfile,
        polyline: Polyline,
        arrival_per_min: [f64; 24],
        gate_junction: impl Into<String>,
    ) -> Result<Self, SimError> {
        let capacity_veh =
            (profile.length_m * profile.lanes as f64 / VEHICLE_SPACING_M).floor() as u32;
        if capacity_veh == 0 {
            return Err(SimError::InvalidCity(format!(
                "road {} is too short to hold a single vehicle",
                profile.road_id
            )));
        }
        if arrival_per_min.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(SimError::InvalidCity(format!(
                "road {} has a negative or non-finite arrival rate",
                profile.road_id
            )));
        }
        Ok(SimRoad { profile, polyline, capacity_veh, arrival_per_min, gate_junction: gate_junction.into() })
    }

    pub fn road_id(&self) -> &str {
        &self.profile.road_id
    }
}

/// The full synthetic city: roads, signal plans, transit, and clocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CityModel {
    pub name: String,
    pub roads: Vec<SimRoad>,
    pub initial_plans: Vec<SignalPlan>,
    pub routes: Vec<Route>,
    pub buses: Vec<Bus>,
    pub gps_interval_s: u32,
    pub start_time_s: u64,
    pub seed: u64,
}

impl CityModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.roads.is_empty() {
            return Err(SimError::InvalidCity("no roads".into()));
        }
        if self.gps_interval_s == 0 {
            return Err(SimError::InvalidCity("gps interval must be positive".into()));
        }
        let road_ids: Vec<&str> = self.roads.iter().map(|r| r.road_id()).collect();
        for plan in &self.initial_plans {
            for road in plan.greens.keys() {
                if !road_ids.contains(&road.as_str()) {
                    return Err(SimError::InvalidCity(format!(
                        "junction {} references unknown road {road}",
                        plan.junction_id
                    )));
                }
            }
        }
        for road in &self.roads {
            let gate = self
                .initial_plans
                .iter()
                .find(|p| p.junction_id == road.gate_junction)
                .ok_or_else(|| {
                    SimError::InvalidCity(format!(
                        "road {} gates at unknown junction {}",
                        road.road_id(),
                        road.gate_junction
                    ))
                })?;
            if !gate.greens.contains_key(road.road_id()) {
                return Err(SimError::InvalidCity(format!(
                    "junction {} does not list its gated road {}",
                    gate.junction_id,
                    road.road_id()
                )));
            }
        }
        for bus in &self.buses {
            let route = self
                .routes
                .iter()
                .find(|r| r.route_id == bus.route_id)
                .ok_or_else(|| {
                    SimError::InvalidCity(format!(
                        "bus {} rides unknown route {}",
                        bus.bus_no, bus.route_id
                    ))
                })?;
            if !(bus.free_speed_mps > 0.0) {
                return Err(SimError::InvalidCity(format!(
                    "bus {} needs a positive free speed",
                    bus.bus_no
                )));
            }
            if bus.progress_m > route.polyline.length_m() {
                return Err(SimError::InvalidCity(format!(
                    "bus {} starts beyond the end of route {}",
                    bus.bus_no, bus.route_id
                )));
            }
        }
        Ok(())
    }

    pub fn road(&self, road_id: &str) -> Option<&SimRoad> {
        self.roads.iter().find(|r| r.road_id() == road_id)
    }
}

/// Mutable simulation state. Queue bookkeeping is exact integers:
/// `entered == queued + departed` per road at all times.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub clock_s: u64,
    pub rng_seed: u64,
    queues: BTreeMap<String, u32>,
    entered: BTreeMap<String, u64>,
    departed: BTreeMap<String, u64>,
    arrival_carry: BTreeMap<String, f64>,
    discharge_credit: BTreeMap<String, f64>,
    bus_progress: Vec<f64>,
}

impl SimState {
    pub fn new(city: &CityModel, seed: u64) -> Self {
        let mut queues = BTreeMap::new();
        let mut entered = BTreeMap::new();
        let mut departed = BTreeMap::new();
        let mut arrival_carry = BTreeMap::new();
        let mut discharge_credit = BTreeMap::new();
        for road in &city.roads {
            let id = road.road_id().to_string();
            queues.insert(id.clone(), 0);
            entered.insert(id.clone(), 0);
            departed.insert(id.clone(), 0);
            arrival_carry.insert(id.clone(), 0.0);
            discharge_credit.insert(id, 0.0);
        }
        SimState {
            clock_s: city.start_time_s,
            rng_seed: seed,
            queues,
            entered,
            departed,
            arrival_carry,
            discharge_credit,
            bus_progress: city.buses.iter().map(|b| b.progress_m).collect(),
        }
    }

    pub fn queue(&self, road_id: &str) -> Option<u32> {
        self.queues.get(road_id).copied()
    }

    pub fn entered(&self, road_id: &str) -> Option<u64> {
        self.entered.get(road_id).copied()
    }

    pub fn departed(&self, road_id: &str) -> Option<u64> {
        self.departed.get(road_id).copied()
    }

    pub fn bus_progress(&self, index: usize) -> f64 {
        self.bus_progress[index]
    }

    pub fn set_bus_progress(&mut self, index: usize, progress_m: f64) {
        self.bus_progress[index] = progress_m;
    }

    #[cfg(test)]
    pub(crate) fn force_queue(&mut self, road_id: &str, queue: u32) {
        *self.queues.get_mut(road_id).unwrap() = queue;
        *self.entered.get_mut(road_id).unwrap() =
            self.departed[road_id] + queue as u64;
    }
}

/// One discrete step: accumulate arrivals per road, discharge queues whose
/// gate junction shows green, advance the clock.
pub fn step(city: &CityModel, junctions: &[JunctionState], state: &mut SimState, dt_s: u32) {
    assert!(dt_s > 0, "dt must be positive");
    let hour = ((state.clock_s % 86_400) / 3_600) as usize;
    for road in &city.roads {
        let id = road.road_id();
        let rate = road.arrival_per_min[hour];
        let carry = state.arrival_carry.get_mut(id).expect("known road");
        let acc = *carry + rate * dt_s as f64 / 60.0;
        let whole = acc.floor();
        *carry = acc - whole;
        let arrivals = whole as u32;
        *state.queues.get_mut(id).unwrap() += arrivals;
        *state.entered.get_mut(id).unwrap() += arrivals as u64;

        let green = junctions
            .iter()
            .find(|j| j.plan.junction_id == road.gate_junction)
            .map(|j| j.is_green(id))
            .unwrap_or(false);
        let credit = state.discharge_credit.get_mut(id).unwrap();
        if green {
            *credit += SATURATION_VEH_PER_S_PER_LANE * road.profile.lanes as f64 * dt_s as f64;
            let queue = state.queues.get_mut(id).unwrap();
            let departures = (credit.floor() as u32).min(*queue);
            *queue -= departures;
            *credit -= departures as f64;
            *state.departed.get_mut(id).unwrap() += departures as u64;
        } else {
            // discharge credit does not survive a red
            *credit = 0.0;
        }
    }
    state.clock_s += dt_s as u64;
}

/// Grid-aligned blob positions fully inside the ROI, stop line (bottom row)
/// first, left to right.
pub fn vehicle_slots(profile: &RoadProfile) -> Vec<(u32, u32)> {
    let w = profile.baseline.width();
    let h = profile.baseline.height();
    let mut slots = Vec::new();
    if w < VEHICLE_BLOB_W || h < VEHICLE_BLOB_H {
        return slots;
    }
    let mut y = h - VEHICLE_BLOB_H;
    loop {
        let mut x = 0;
        while x + VEHICLE_BLOB_W <= w {
            let mut inside = true;
            'cell: for dy in 0..VEHICLE_BLOB_H {
                for dx in 0..VEHICLE_BLOB_W {
                    if !profile.roi_mask.get(x + dx, y + dy) {
                        inside = false;
                        break 'cell;
                    }
                }
            }
            if inside {
                slots.push((x, y));
            }
            x += VEHICLE_BLOB_W;
        }
        if y < VEHICLE_BLOB_H {
            break;
        }
        y -= VEHICLE_BLOB_H;
    }
    slots
}

/// Baseline copy with `min(queue, drawable capacity)` vehicle blobs.
pub fn synthesize_frame(profile: &RoadProfile, queue: u32) -> Raster {
    let mut frame = profile.baseline.clone();
    let slots = vehicle_slots(profile);
    for &(x, y) in slots.iter().take(queue as usize) {
        for dy in 0..VEHICLE_BLOB_H {
            for dx in 0..VEHICLE_BLOB_W {
                frame.set(x + dx, y + dy, VEHICLE_RGB);
            }
        }
    }
    frame
}

/// The road whose polyline passes closest to `point`.
pub fn nearest_road<'a>(city: &'a CityModel, point: crate::transit::GeoPoint) -> Option<&'a SimRoad> {
    let mut best: Option<(&SimRoad, f64)> = None;
    for road in &city.roads {
        let (_, dist) = road.polyline.nearest(point);
        match best {
            Some((_, bd)) if dist >= bd => {}
            _ => best = Some((road, dist)),
        }
    }
    best.map(|(r, _)| r)
}

/// Move every bus along its route at its congestion-degraded speed,
/// wrapping to the route start at the end (circular service). Emits one
/// fix per bus whenever the post-step clock lands on a GPS interval.
/// Call after [`step`] within the same tick; reads the already-advanced clock.
pub fn advance_buses(
    city: &CityModel,
    state: &mut SimState,
    latest_percent: &BTreeMap<String, f64>,
    dt_s: u32,
) -> Vec<GpsFix> {
    assert!(dt_s > 0, "dt must be positive");
    let emit = {
        let rel = state.clock_s.saturating_sub(city.start_time_s);
        rel > 0 && rel % city.gps_interval_s as u64 == 0
    };
    let mut fixes = Vec::new();
    for (i, bus) in city.buses.iter().enumerate() {
        let route = city
            .routes
            .iter()
            .find(|r| r.route_id == bus.route_id)
            .expect("city validated");
        let total = route.polyline.length_m();
        let position = route.polyline.at(state.bus_progress[i]);
        let percent = nearest_road(city, position)
            .and_then(|r| latest_percent.get(r.road_id()))
            .copied()
            .unwrap_or(0.0);
        let speed = bus.free_speed_mps * congestion_speed_factor(percent);
        let mut progress = state.bus_progress[i] + speed * dt_s as f64;
        if progress >= total {
            progress %= total;
        }
        state.bus_progress[i] = progress;
        if emit {
            fixes.push(GpsFix {
                bus_no: bus.bus_no.clone(),
                timestamp_s: state.clock_s,
                point: route.polyline.at(progress),
            });
        }
    }
    fixes
}

/// Queue occupancy as a percentage of road capacity, saturating at 100.
pub fn ground_truth_congestion(
    city: &CityModel,
    state: &SimState,
    road_id: &str,
) -> Result<f64, SimError> {
    let road = city.road(road_id).ok_or_else(|| SimError::UnknownRoad(road_id.to_string()))?;
    let queue = state.queues[road_id] as f64;
    Ok(100.0 * (queue / road.capacity_veh as f64).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congestion::{diff_against_baseline, PIXEL_TOLERANCE};
    use crate::raster::Mask;
    use crate::transit::GeoPoint;
    use std::collections::BTreeMap;

    const M_PER_DEG_EQ: f64 = crate::transit::EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

    fn line(meters: &[f64]) -> Polyline {
        Polyline::new(
            meters.iter().map(|&m| GeoPoint::new(0.0, m / M_PER_DEG_EQ).unwrap()).collect(),
        )
        .unwrap()
    }

    fn profile(id: &str, w: u32, h: u32) -> RoadProfile {
        RoadProfile::new(
            id,
            Raster::filled(w, h, [200, 200, 200]),
            Mask::filled(w, h, true),
            300.0,
            1,
            30,
        )
        .unwrap()
    }

    fn two_road_city() -> (CityModel, Vec<JunctionState>) {
        let plan = SignalPlan::new(
            "J1",
            BTreeMap::from([("east".to_string(), 30), ("west".to_string(), 30)]),
            70,
            5,
            10,
            90,
            5,
        )
        .unwrap();
        let mut rates = [0.0; 24];
        rates[0] = 10.0;
        let east = SimRoad::new(profile("east", 64, 48), line(&[0.0, 300.0]), rates, "J1").unwrap();
        let west =
            SimRoad::new(profile("west", 64, 48), line(&[1000.0, 1300.0]), [0.0; 24], "J1").unwrap();
        let city = CityModel {
            name: "test".into(),
            roads: vec![east, west],
            initial_plans: vec![plan.clone()],
            routes: vec![],
            buses: vec![],
            gps_interval_s: 10,
            start_time_s: 0,
            seed: 1,
        };
        city.validate().unwrap();
        let junctions = vec![JunctionState::new(plan)];
        (city, junctions)
    }

    #[test]
    fn dead_road_stays_empty() {
        let (city, junctions) = two_road_city();
        let mut state = SimState::new(&city, 1);
        for _ in 0..100 {
            step(&city, &junctions, &mut state, 1);
        }
        assert_eq!(state.queue("west"), Some(0));
        assert_eq!(state.entered("west"), Some(0));
    }

    #[test]
    fn red_signal_accumulates_the_arrival_rate() {
        let (city, mut junctions) = two_road_city();
        // phase order is "east" first; west's queue grows while east holds green
        let mut state = SimState::new(&city, 1);
        // make east red too by moving the junction into west's phase... keep
        // it simple: watch west accumulate nothing and east discharge, so
        // run with rates on east but the phase forced to west.
        junctions[0].active_phase = "west".to_string();
        step(&city, &junctions, &mut state, 60);
        assert_eq!(state.queue("east"), Some(10)); // 10/min for 60 s, red
        assert_eq!(state.departed("east"), Some(0));
    }

    #[test]
    fn green_discharges_at_saturation() {
        let (city, junctions) = two_road_city();
        let mut state = SimState::new(&city, 1);
        state.force_queue("east", 20);
        // east is green for 30 s from t=0; 0.5 veh/s/lane
        for _ in 0..20 {
            step(&city, &junctions, &mut state, 1);
        }
        // 20 s of green at 0.5 veh/s discharges 10, arrivals 10/min add ~3
        let entered = state.entered("east").unwrap();
        let queued = state.queue("east").unwrap() as u64;
        let departed = state.departed("east").unwrap();
        assert_eq!(entered, queued + departed);
        assert_eq!(departed, 10);
    }

    #[test]
    fn conservation_over_random_horizons() {
        let (city, mut junctions) = two_road_city();
        let mut state = SimState::new(&city, 1);
        for i in 0..500 {
            for j in junctions.iter_mut() {
                j.tick(1);
            }
            step(&city, &junctions, &mut state, 1);
            if i % 97 == 0 {
                for road in &city.roads {
                    let id = road.road_id();
                    assert_eq!(
                        state.entered(id).unwrap(),
                        state.queue(id).unwrap() as u64 + state.departed(id).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn synthesize_frame_empty_queue_is_the_baseline() {
        let p = profile("east", 64, 48);
        let frame = synthesize_frame(&p, 0);
        assert_eq!(frame, p.baseline);
        let (_, pct) = diff_against_baseline(&p, &frame, PIXEL_TOLERANCE).unwrap();
        assert_eq!(pct, 0.0);
    }

    #[test]
    fn one_vehicle_changes_exactly_one_blob() {
        let p = profile("east", 64, 48);
        let frame = synthesize_frame(&p, 1);
        let (img, pct) = diff_against_baseline(&p, &frame, PIXEL_TOLERANCE).unwrap();
        let masked = p.roi_mask.count_set() as f64;
        assert_eq!(img.red_count(), 18);
        assert_eq!(pct, 100.0 * 18.0 / masked);
    }

    #[test]
    fn fill_order_is_monotone_in_queue() {
        let p = profile("east", 64, 48);
        let mut last = -1.0;
        for q in [0u32, 1, 2, 5, 40, 100, 200, 1000] {
            let frame = synthesize_frame(&p, q);
            let (_, pct) = diff_against_baseline(&p, &frame, PIXEL_TOLERANCE).unwrap();
            assert!(pct >= last, "queue {q} decreased percent");
            last = pct;
        }
    }

    #[test]
    fn slots_fill_from_the_stop_line_backwards() {
        let p = profile("east", 12, 9);
        let slots = vehicle_slots(&p);
        // 2 columns x 3 rows, bottom row first
        assert_eq!(slots.len(), 6);
        assert_eq!(slots[0], (0, 6));
        assert_eq!(slots[1], (6, 6));
        assert_eq!(slots[2], (0, 3));
        assert_eq!(slots.last(), Some(&(6, 0)));
    }

    fn bus_city(bus_progress: f64) -> CityModel {
        let route_line = line(&[0.0, 1000.0, 2000.0]);
        let a = crate::transit::BusStop {
            stop_id: "A".into(),
            name: "Alpha".into(),
            location: route_line.at(0.0),
        };
        let b = crate::transit::BusStop {
            stop_id: "B".into(),
            name: "Beta".into(),
            location: route_line.at(2000.0),
        };
        let route = Route::new("R1", vec![(a, 0), (b, 200)], route_line).unwrap();
        let bus = Bus {
            bus_no: "105".into(),
            route_id: "R1".into(),
            progress_m: bus_progress,
            last_fix: (route.polyline.at(bus_progress), 0),
            free_speed_mps: 10.0,
        };
        let plan = SignalPlan::new(
            "J1",
            BTreeMap::from([("east".to_string(), 30), ("west".to_string(), 30)]),
            70,
            5,
            10,
            90,
            5,
        )
        .unwrap();
        let east = SimRoad::new(profile("east", 64, 48), line(&[0.0, 300.0]), [0.0; 24], "J1").unwrap();
        let west =
            SimRoad::new(profile("west", 64, 48), line(&[5000.0, 5300.0]), [0.0; 24], "J1").unwrap();
        let city = CityModel {
            name: "bus-test".into(),
            roads: vec![east, west],
            initial_plans: vec![plan],
            routes: vec![route],
            buses: vec![bus],
            gps_interval_s: 10,
            start_time_s: 0,
            seed: 0,
        };
        city.validate().unwrap();
        city
    }

    #[test]
    fn buses_advance_at_free_speed_without_congestion() {
        let city = bus_city(0.0);
        let mut state = SimState::new(&city, 0);
        state.clock_s = 10; // as if step() already ran
        let fixes = advance_buses(&city, &mut state, &BTreeMap::new(), 10);
        assert!((state.bus_progress(0) - 100.0).abs() < 1e-9);
        assert_eq!(fixes.len(), 1);
        assert_eq!(fixes[0].timestamp_s, 10);
    }

    #[test]
    fn congestion_quarters_the_bus_speed() {
        let city = bus_city(0.0);
        let mut state = SimState::new(&city, 0);
        state.clock_s = 7; // off the GPS interval: no fix emitted
        let latest = BTreeMap::from([("east".to_string(), 100.0)]);
        let fixes = advance_buses(&city, &mut state, &latest, 10);
        assert!((state.bus_progress(0) - 25.0).abs() < 1e-9);
        assert!(fixes.is_empty());
    }

    #[test]
    fn buses_wrap_at_the_route_end() {
        let city = bus_city(0.0);
        let mut state = SimState::new(&city, 0);
        state.set_bus_progress(0, 2000.0); // exactly at the end
        state.clock_s = 5;
        advance_buses(&city, &mut state, &BTreeMap::new(), 1);
        assert!((state.bus_progress(0) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn ground_truth_ratio() {
        let (city, _) = two_road_city();
        let mut state = SimState::new(&city, 1);
        assert_eq!(ground_truth_congestion(&city, &state, "east").unwrap(), 0.0);
        let cap = city.road("east").unwrap().capacity_veh; // 300 m / 7.5 = 40
        assert_eq!(cap, 40);
        state.force_queue("east", cap);
        assert_eq!(ground_truth_congestion(&city, &state, "east").unwrap(), 100.0);
        state.force_queue("east", 20);
        assert_eq!(ground_truth_congestion(&city, &state, "east").unwrap(), 50.0);
        state.force_queue("east", 2 * cap);
        assert_eq!(ground_truth_congestion(&city, &state, "east").unwrap(), 100.0);
        assert_eq!(
            ground_truth_congestion(&city, &state, "nowhere"),
            Err(SimError::UnknownRoad("nowhere".into()))
        );
    }

    #[test]
    fn identical_seeds_give_identical_states() {
        let (city, junctions) = two_road_city();
        let mut a = SimState::new(&city, 42);
        let mut b = SimState::new(&city, 42);
        for _ in 0..300 {
            step(&city, &junctions, &mut a, 1);
            step(&city, &junctions, &mut b, 1);
        }
        assert_eq!(a, b);
    }
}
