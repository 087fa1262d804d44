//! Bus tracking and congestion-aware arrival estimation.
//!
//! Buses live on route polylines; GPS fixes are snapped to the polyline by
//! arc length, and "which bus, which stop, when" queries walk the routes
//! that visit the rider's boarding stop before their destination.

use std::collections::BTreeMap;

use thiserror::Error;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const DEFAULT_FREE_SPEED_MPS: f64 = 10.0;

/// How the ETA degrades with congestion: speed is scaled by
/// `max(1 - SLOPE * percent/100, FLOOR)`.
pub const ETA_CONGESTION_SLOPE: f64 = 0.75;
pub const ETA_SPEED_FLOOR: f64 = 0.1;

/// A configured stop must sit within this distance of its route polyline.
const STOP_SNAP_TOLERANCE_M: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum TransitError {
    #[error("latitude {0} outside [-90, 90] or longitude {1} outside [-180, 180]")]
    InvalidCoordinate(f64, f64),
    #[error("stop list is empty")]
    EmptyStopList,
    #[error("no stop named '{0}'")]
    UnknownDestination(String),
    #[error("no route visits the boarding stop before the destination")]
    NoRouteFound,
    #[error("all buses on matching routes are already past the boarding stop")]
    NoBusAvailable,
    #[error("stale fix: timestamp {got} is older than {have}")]
    StaleFix { have: u64, got: u64 },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, TransitError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(TransitError::InvalidCoordinate(lat, lon));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// Haversine great-circle distance in meters.
pub fn geo_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().asin()
}

/// An ordered geographic polyline with precomputed arc lengths, used both
/// for bus routes and road geometry. Projection math runs in a local
/// equirectangular plane around the polyline's mean latitude, which is
/// plenty accurate at city scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<GeoPoint>,
    enu: Vec<(f64, f64)>,
    cum_m: Vec<f64>,
    meters_per_deg_lat: f64,
    meters_per_deg_lon: f64,
}

impl Polyline {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, TransitError> {
        if points.len() < 2 {
            return Err(TransitError::InvalidPolyline("needs at least 2 points".into()));
        }
        let lat0 = points.iter().map(|p| p.lat).sum::<f64>() / points.len() as f64;
        let meters_per_deg_lat = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let meters_per_deg_lon = meters_per_deg_lat * lat0.to_radians().cos();
        let enu: Vec<(f64, f64)> =
            points.iter().map(|p| (p.lon * meters_per_deg_lon, p.lat * meters_per_deg_lat)).collect();
        let mut cum_m = Vec::with_capacity(points.len());
        cum_m.push(0.0);
        for w in points.windows(2) {
            let d = geo_distance(w[0], w[1]);
            cum_m.push(cum_m.last().unwrap() + d);
        }
        if *cum_m.last().unwrap() <= 0.0 {
            return Err(TransitError::InvalidPolyline("zero total length".into()));
        }
        Ok(Polyline { points, enu, cum_m, meters_per_deg_lat, meters_per_deg_lon })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn length_m(&self) -> f64 {
        *self.cum_m.last().unwrap()
    }

    /// Arc-length position of the polyline point nearest to `p`, plus the
    /// distance from `p` to that point. Ties go to the earliest segment.
    pub fn nearest(&self, p: GeoPoint) -> (f64, f64) {
        let px = p.lon * self.meters_per_deg_lon;
        let py = p.lat * self.meters_per_deg_lat;
        let mut best_d2 = f64::INFINITY;
        let mut best_progress = 0.0;
        for i in 0..self.enu.len() - 1 {
            let (ax, ay) = self.enu[i];
            let (bx, by) = self.enu[i + 1];
            let dx = bx - ax;
            let dy = by - ay;
            let len2 = dx * dx + dy * dy;
            let t = if len2 == 0.0 {
                0.0
            } else {
                (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
            };
            let cx = ax + t * dx;
            let cy = ay + t * dy;
            let d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
            if d2 < best_d2 {
                best_d2 = d2;
                best_progress = self.cum_m[i] + t * (self.cum_m[i + 1] - self.cum_m[i]);
            }
        }
        (best_progress, best_d2.sqrt())
    }

    /// Point at a given arc-length position, clamped to the polyline.
    pub fn at(&self, progress_m: f64) -> GeoPoint {
        let total = self.length_m();
        let m = progress_m.clamp(0.0, total);
        let mut i = match self.cum_m.iter().position(|&c| c >= m) {
            Some(0) | None => 0,
            Some(j) => j - 1,
        };
        // skip zero-length segments
        while i + 2 < self.cum_m.len() && self.cum_m[i + 1] <= m && self.cum_m[i + 1] == self.cum_m[i] {
            i += 1;
        }
        let seg = self.cum_m[i + 1] - self.cum_m[i];
        let t = if seg == 0.0 { 0.0 } else { (m - self.cum_m[i]) / seg };
        let a = self.points[i];
        let b = self.points[i + 1];
        GeoPoint { lat: a.lat + t * (b.lat - a.lat), lon: a.lon + t * (b.lon - a.lon) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusStop {
    pub stop_id: String,
    pub name: String,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteStop {
    pub stop: BusStop,
    /// Scheduled seconds from route start; display metadata, not used for ETAs.
    pub scheduled_offset_s: u32,
    /// Arc-length position of the stop along the route polyline.
    pub progress_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub route_id: String,
    pub stops: Vec<RouteStop>,
    pub polyline: Polyline,
}

impl Route {
    pub fn new(
        route_id: impl Into<String>,
        stops: Vec<(BusStop, u32)>,
        polyline: Polyline,
    ) -> Result<Self, TransitError> {
        let route_id = route_id.into();
        if stops.len() < 2 {
            return Err(TransitError::InvalidRoute(format!(
                "route {route_id} needs at least 2 stops"
            )));
        }
        let mut seen = BTreeMap::new();
        let mut route_stops = Vec::with_capacity(stops.len());
        let mut last_offset: Option<u32> = None;
        for (stop, offset) in stops {
            if stop.name.trim().is_empty() {
                return Err(TransitError::InvalidRoute(format!(
                    "stop {} has an empty name",
                    stop.stop_id
                )));
            }
            if let Some(prev) = seen.insert(stop.stop_id.clone(), ()) {
                let _ = prev;
                return Err(TransitError::InvalidRoute(format!(
                    "duplicate stop id {} on route {route_id}",
                    stop.stop_id
                )));
            }
            if let Some(last) = last_offset {
                if offset <= last {
                    return Err(TransitError::InvalidRoute(format!(
                        "stop offsets must strictly increase on route {route_id}"
                    )));
                }
            }
            last_offset = Some(offset);
            let (progress_m, dist) = polyline.nearest(stop.location);
            if dist > STOP_SNAP_TOLERANCE_M {
                return Err(TransitError::InvalidRoute(format!(
                    "stop {} is {dist:.1} m off the route {route_id} polyline",
                    stop.stop_id
                )));
            }
            route_stops.push(RouteStop { stop, scheduled_offset_s: offset, progress_m });
        }
        Ok(Route { route_id, stops: route_stops, polyline })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub bus_no: String,
    pub route_id: String,
    pub progress_m: f64,
    pub last_fix: (GeoPoint, u64),
    pub free_speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsFix {
    pub bus_no: String,
    pub timestamp_s: u64,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaResult {
    pub bus_no: String,
    pub boarding_stop: BusStop,
    /// Along-route distance from the bus to the boarding stop.
    pub distance_m: f64,
    pub eta_s: f64,
}

/// Stop nearest to `source` by great-circle distance; ties break to the
/// lexicographically smallest stop id.
pub fn nearest_stop<'a>(
    source: GeoPoint,
    stops: &'a [BusStop],
) -> Result<&'a BusStop, TransitError> {
    let mut best: Option<(&BusStop, f64)> = None;
    for stop in stops {
        let d = geo_distance(source, stop.location);
        let better = match best {
            None => true,
            Some((b, bd)) => d < bd || (d == bd && stop.stop_id < b.stop_id),
        };
        if better {
            best = Some((stop, d));
        }
    }
    best.map(|(s, _)| s).ok_or(TransitError::EmptyStopList)
}

/// Speed multiplier under congestion: linear degradation with a floor.
pub fn congestion_speed_factor(congestion_percent: f64) -> f64 {
    (1.0 - ETA_CONGESTION_SLOPE * congestion_percent / 100.0).max(ETA_SPEED_FLOOR)
}

/// Seconds for a bus to cover `distance_m` at `free_speed_mps` degraded by
/// the congestion on its current road.
pub fn estimate_arrival(distance_m: f64, free_speed_mps: f64, congestion_percent: f64) -> f64 {
    distance_m / (free_speed_mps * congestion_speed_factor(congestion_percent))
}

fn name_matches(candidate: &str, wanted: &str) -> bool {
    candidate.trim().eq_ignore_ascii_case(wanted.trim())
}

/// Buses heading from the rider's boarding stop (nearest to `source`)
/// toward `destination_name`, soonest first.
///
/// A bus qualifies when its route visits the boarding stop strictly before
/// a stop matching the destination and the bus has not yet passed the
/// boarding stop. `congestion_for` supplies the latest congestion percent
/// on a bus's current road (0 when unknown).
pub fn buses_toward(
    source: GeoPoint,
    destination_name: &str,
    routes: &[Route],
    buses: &[Bus],
    congestion_for: &dyn Fn(&Bus) -> f64,
) -> Result<Vec<EtaResult>, TransitError> {
    let mut all_stops: Vec<BusStop> = Vec::new();
    let mut seen = BTreeMap::new();
    for route in routes {
        for rs in &route.stops {
            if seen.insert(rs.stop.stop_id.clone(), ()).is_none() {
                all_stops.push(rs.stop.clone());
            }
        }
    }
    let destination_known = all_stops.iter().any(|s| name_matches(&s.name, destination_name));
    if !destination_known {
        return Err(TransitError::UnknownDestination(destination_name.trim().to_string()));
    }
    let boarding = nearest_stop(source, &all_stops)?.clone();

    let mut route_found = false;
    let mut results = Vec::new();
    for route in routes {
        let board_idx = route.stops.iter().position(|rs| rs.stop.stop_id == boarding.stop_id);
        let Some(i) = board_idx else { continue };
        let has_destination_after =
            route.stops[i + 1..].iter().any(|rs| name_matches(&rs.stop.name, destination_name));
        if !has_destination_after {
            continue;
        }
        route_found = true;
        let boarding_progress = route.stops[i].progress_m;
        for bus in buses.iter().filter(|b| b.route_id == route.route_id) {
            if bus.progress_m >= boarding_progress {
                continue; // already past the boarding stop
            }
            let distance_m = boarding_progress - bus.progress_m;
            let eta_s = estimate_arrival(distance_m, bus.free_speed_mps, congestion_for(bus));
            results.push(EtaResult {
                bus_no: bus.bus_no.clone(),
                boarding_stop: boarding.clone(),
                distance_m,
                eta_s,
            });
        }
    }
    if !route_found {
        return Err(TransitError::NoRouteFound);
    }
    if results.is_empty() {
        return Err(TransitError::NoBusAvailable);
    }
    results.sort_by(|a, b| {
        a.eta_s.partial_cmp(&b.eta_s).unwrap().then_with(|| a.bus_no.cmp(&b.bus_no))
    });
    Ok(results)
}

/// Apply a GPS fix: snap the bus to the nearest point of its route polyline
/// (by arc length) and record the fix. A fix older than the last one is
/// rejected and the bus is left untouched.
pub fn update_fix(
    bus: &mut Bus,
    route: &Route,
    point: GeoPoint,
    timestamp_s: u64,
) -> Result<(), TransitError> {
    let have = bus.last_fix.1;
    if timestamp_s < have {
        return Err(TransitError::StaleFix { have, got: timestamp_s });
    }
    let (progress_m, _) = route.polyline.nearest(point);
    bus.progress_m = progress_m;
    bus.last_fix = (point, timestamp_s);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // ~meters per degree of longitude at the equator
    const M_PER_DEG_EQ: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn stop(id: &str, name: &str, loc: GeoPoint) -> BusStop {
        BusStop { stop_id: id.into(), name: name.into(), location: loc }
    }

    /// East-west polyline along the equator with vertices at the given
    /// meter offsets, so arc lengths are exact by construction.
    fn equator_line(meters: &[f64]) -> Polyline {
        Polyline::new(meters.iter().map(|&m| p(0.0, m / M_PER_DEG_EQ)).collect()).unwrap()
    }

    /// Independent great-circle oracle (Vincenty sphere form).
    fn atan2_distance(a: GeoPoint, b: GeoPoint) -> f64 {
        let f1 = a.lat.to_radians();
        let f2 = b.lat.to_radians();
        let dl = (b.lon - a.lon).to_radians();
        let y = ((f2.cos() * dl.sin()).powi(2)
            + (f1.cos() * f2.sin() - f1.sin() * f2.cos() * dl.cos()).powi(2))
        .sqrt();
        let x = f1.sin() * f2.sin() + f1.cos() * f2.cos() * dl.cos();
        EARTH_RADIUS_M * y.atan2(x)
    }

    #[test]
    fn geo_distance_reference_points() {
        let a = p(18.5, 73.8);
        assert_eq!(geo_distance(a, a), 0.0);
        let d = geo_distance(a, p(18.5, 73.81));
        assert!((d - 1054.5).abs() / 1054.5 < 0.001, "got {d}");
        let e = geo_distance(p(0.0, 0.0), p(0.0, 0.001));
        assert!((e - 111.19).abs() / 111.19 < 0.001, "got {e}");
    }

    #[test]
    fn nearest_stop_picks_closest_and_breaks_ties() {
        let s1 = stop("S1", "Near", p(0.0, 0.001));
        let s2 = stop("S2", "Far", p(0.0, 0.005));
        let both = [s2.clone(), s1.clone()];
        let got = nearest_stop(p(0.0, 0.0), &both).unwrap();
        assert_eq!(got.stop_id, "S1");

        // exact location match
        let got = nearest_stop(s2.location, &both).unwrap();
        assert_eq!(got.stop_id, "S2");

        // equidistant: smaller id wins regardless of order
        let tied = [stop("S2", "B", p(0.0, -0.001)), stop("S1", "A", p(0.0, 0.001))];
        let got = nearest_stop(p(0.0, 0.0), &tied).unwrap();
        assert_eq!(got.stop_id, "S1");

        assert_eq!(nearest_stop(p(0.0, 0.0), &[]), Err(TransitError::EmptyStopList));
    }

    #[test]
    fn estimate_arrival_formula() {
        assert_eq!(estimate_arrival(0.0, 10.0, 50.0), 0.0);
        assert!((estimate_arrival(600.0, 10.0, 0.0) - 60.0).abs() < 1e-12);
        // factor floors at 0.25 for 100% congestion
        assert!((estimate_arrival(600.0, 10.0, 100.0) - 240.0).abs() < 1e-12);
    }

    #[test]
    fn polyline_progress_and_interpolation() {
        let line = equator_line(&[0.0, 100.0, 150.0]);
        assert!((line.length_m() - 150.0).abs() < 1e-6);
        let (prog, dist) = line.nearest(line.points()[1]);
        assert!((prog - 100.0).abs() < 1e-6);
        assert!(dist < 1e-6);
        let mid = line.at(50.0);
        let (prog_mid, _) = line.nearest(mid);
        assert!((prog_mid - 50.0).abs() < 1e-6);
    }

    fn two_stop_route(route_id: &str, len_m: f64) -> Route {
        let line = equator_line(&[0.0, len_m / 2.0, len_m]);
        let a = stop("A", "Alpha", line.at(len_m / 2.0));
        let b = stop("B", "Omega", line.at(len_m));
        Route::new(route_id, vec![(a, 0), (b, 300)], line).unwrap()
    }

    fn bus_at(no: &str, route: &Route, progress: f64) -> Bus {
        Bus {
            bus_no: no.into(),
            route_id: route.route_id.clone(),
            progress_m: progress,
            last_fix: (route.polyline.at(progress), 0),
            free_speed_mps: DEFAULT_FREE_SPEED_MPS,
        }
    }

    #[test]
    fn update_fix_snaps_to_arc_length() {
        let route = two_stop_route("R", 150.0);
        let mut bus = bus_at("42", &route, 0.0);
        update_fix(&mut bus, &route, route.polyline.points()[0], 10).unwrap();
        assert!(bus.progress_m.abs() < 1e-9);
        update_fix(&mut bus, &route, route.polyline.points()[1], 20).unwrap();
        assert!((bus.progress_m - 75.0).abs() < 1e-6);
        // stale fix rejected, state unchanged
        let before = bus.clone();
        let err = update_fix(&mut bus, &route, route.polyline.points()[0], 5);
        assert_eq!(err, Err(TransitError::StaleFix { have: 20, got: 5 }));
        assert_eq!(bus, before);
    }

    #[test]
    fn update_fix_two_segment_vertex_example() {
        let line = equator_line(&[0.0, 100.0, 150.0]);
        let a = stop("A", "Start", line.at(0.0));
        let b = stop("B", "End", line.at(150.0));
        let route = Route::new("R", vec![(a, 0), (b, 60)], line).unwrap();
        let mut bus = bus_at("1", &route, 0.0);
        let second_vertex = route.polyline.points()[1];
        update_fix(&mut bus, &route, second_vertex, 30).unwrap();
        assert!((bus.progress_m - 100.0).abs() < 1e-6);
    }

    #[test]
    fn buses_toward_orders_by_eta_and_excludes_passed() {
        let route = two_stop_route("R", 2000.0);
        // boarding stop "Alpha" sits at progress 1000
        let near = bus_at("7", &route, 700.0); // 300 m upstream
        let far = bus_at("3", &route, 100.0); // 900 m upstream
        let passed = bus_at("9", &route, 1500.0); // beyond the boarding stop
        let source = route.stops[0].stop.location;
        let got = buses_toward(
            source,
            "Omega",
            std::slice::from_ref(&route),
            &[far.clone(), near.clone(), passed],
            &|_| 0.0,
        )
        .unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].bus_no, "7");
        assert!((got[0].distance_m - 300.0).abs() < 1e-6);
        assert!((got[0].eta_s - 30.0).abs() < 1e-6);
        assert_eq!(got[1].bus_no, "3");
        assert!((got[1].distance_m - 900.0).abs() < 1e-6);
        assert_eq!(got[0].boarding_stop.stop_id, "A");
    }

    #[test]
    fn buses_toward_error_cases() {
        let route = two_stop_route("R", 2000.0);
        let source = route.stops[0].stop.location;
        // unknown destination name anywhere
        assert_eq!(
            buses_toward(source, "Atlantis", std::slice::from_ref(&route), &[], &|_| 0.0),
            Err(TransitError::UnknownDestination("Atlantis".into()))
        );
        // destination upstream of boarding stop: rider is at Omega (end)
        let at_end = route.stops[1].stop.location;
        assert_eq!(
            buses_toward(at_end, "Alpha", std::slice::from_ref(&route), &[], &|_| 0.0),
            Err(TransitError::NoRouteFound)
        );
        // route exists but the only bus is past the boarding stop
        let passed = bus_at("9", &route, 1999.0);
        assert_eq!(
            buses_toward(source, "Omega", std::slice::from_ref(&route), &[passed], &|_| 0.0),
            Err(TransitError::NoBusAvailable)
        );
    }

    #[test]
    fn destination_matches_case_insensitively() {
        let route = two_stop_route("R", 2000.0);
        let bus = bus_at("5", &route, 0.0);
        let source = route.stops[0].stop.location;
        let got =
            buses_toward(source, "  omega ", std::slice::from_ref(&route), &[bus], &|_| 0.0)
                .unwrap();
        assert_eq!(got[0].bus_no, "5");
    }

    #[test]
    fn route_validation_rejects_bad_inputs() {
        let line = equator_line(&[0.0, 100.0]);
        let a = stop("A", "Alpha", line.at(0.0));
        let b = stop("B", "Beta", line.at(100.0));
        // offsets must strictly increase
        assert!(matches!(
            Route::new("R", vec![(a.clone(), 10), (b.clone(), 10)], line.clone()),
            Err(TransitError::InvalidRoute(_))
        ));
        // a stop far off the polyline
        let off = stop("C", "Gamma", p(0.01, 0.0));
        assert!(matches!(
            Route::new("R", vec![(a.clone(), 0), (off, 10)], line.clone()),
            Err(TransitError::InvalidRoute(_))
        ));
        // fewer than two stops
        assert!(matches!(
            Route::new("R", vec![(a, 0)], line),
            Err(TransitError::InvalidRoute(_))
        ));
    }

    proptest! {
        #[test]
        fn geo_distance_is_symmetric_nonnegative_and_near_oracle(
            lat1 in -80.0f64..80.0, lon1 in -179.0f64..179.0,
            lat2 in -80.0f64..80.0, lon2 in -179.0f64..179.0,
        ) {
            let a = p(lat1, lon1);
            let b = p(lat2, lon2);
            let d = geo_distance(a, b);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, geo_distance(b, a));
            prop_assert_eq!(geo_distance(a, a), 0.0);
            let want = atan2_distance(a, b);
            if want > 1.0 {
                prop_assert!(((d - want) / want).abs() < 0.001, "{} vs {}", d, want);
            }
        }

        #[test]
        fn nearest_stop_minimizes_distance(
            src_lon in -0.01f64..0.01,
            lons in proptest::collection::vec(-0.01f64..0.01, 1..8),
        ) {
            let stops: Vec<BusStop> = lons
                .iter()
                .enumerate()
                .map(|(i, &lon)| stop(&format!("S{i}"), &format!("Stop {i}"), p(0.0, lon)))
                .collect();
            let src = p(0.0, src_lon);
            let best = nearest_stop(src, &stops).unwrap();
            let bd = geo_distance(src, best.location);
            for s in &stops {
                prop_assert!(bd <= geo_distance(src, s.location) + 1e-12);
            }
        }

        #[test]
        fn eta_monotone_in_distance_and_congestion(
            d1 in 0.0f64..5000.0, d2 in 0.0f64..5000.0,
            c1 in 0.0f64..100.0, c2 in 0.0f64..100.0,
        ) {
            let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let (clo, chi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            prop_assert!(estimate_arrival(dlo, 10.0, clo) <= estimate_arrival(dhi, 10.0, clo));
            prop_assert!(estimate_arrival(dhi, 10.0, clo) <= estimate_arrival(dhi, 10.0, chi));
            if dlo > 0.0 {
                prop_assert!(estimate_arrival(dlo, 10.0, clo) > 0.0);
            }
        }

        #[test]
        fn forward_fixes_never_decrease_progress(
            marks in proptest::collection::vec(0.0f64..1.0, 2..12),
        ) {
            let route = two_stop_route("R", 3000.0);
            let mut sorted = marks.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut bus = bus_at("1", &route, 0.0);
            let mut last = 0.0;
            for (i, frac) in sorted.iter().enumerate() {
                let point = route.polyline.at(frac * route.polyline.length_m());
                update_fix(&mut bus, &route, point, (i as u64 + 1) * 10).unwrap();
                prop_assert!(bus.progress_m >= last - 1e-9);
                last = bus.progress_m;
            }
        }
    }
}
