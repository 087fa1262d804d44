//! Plain-text run report: per-road sample statistics, per-junction plans,
//! and tracked bus positions.

use std::fmt::Write as _;

use crate::congestion::classify_status;
use crate::datacenter::store::{Stores, WorldConfig};

pub fn render_report(world: &WorldConfig, stores: &Stores) -> String {
    let mut out = String::new();
    let city = &world.city;
    writeln!(out, "city: {}", city.name).unwrap();
    writeln!(out, "clock: {} s (started {} s, seed {})", stores.clock_s, city.start_time_s, city.seed)
        .unwrap();
    writeln!(
        out,
        "roads: {}, junctions: {}, routes: {}, buses: {}",
        city.roads.len(),
        city.initial_plans.len(),
        city.routes.len(),
        city.buses.len()
    )
    .unwrap();
    out.push('\n');

    for road in &city.roads {
        let id = road.road_id();
        let series = stores.samples.series(id);
        if series.is_empty() {
            writeln!(out, "road {id}: no samples").unwrap();
            continue;
        }
        let latest = series.last().unwrap().percent;
        let mean = series.iter().map(|s| s.percent).sum::<f64>() / series.len() as f64;
        let min = series.iter().map(|s| s.percent).fold(f64::INFINITY, f64::min);
        let max = series.iter().map(|s| s.percent).fold(f64::NEG_INFINITY, f64::max);
        let status = classify_status(latest.clamp(0.0, 100.0)).expect("clamped");
        writeln!(
            out,
            "road {id}: samples {}, latest {latest:.1}%, mean {mean:.1}%, min {min:.1}%, max {max:.1}%, status {status}",
            series.len()
        )
        .unwrap();
    }
    out.push('\n');

    for junction in &stores.junctions {
        let greens: Vec<String> = junction
            .plan
            .greens
            .iter()
            .map(|(road, g)| format!("{road}={g}s"))
            .collect();
        writeln!(
            out,
            "junction {}: cycle {}s, active {}, greens {}",
            junction.plan.junction_id,
            junction.plan.cycle_s,
            junction.active_phase,
            greens.join(" ")
        )
        .unwrap();
    }
    if !stores.tracked.is_empty() {
        out.push('\n');
        for bus in stores.tracked.values() {
            writeln!(
                out,
                "bus {}: route {}, progress {:.1} m, last fix at {} s",
                bus.bus_no, bus.route_id, bus.progress_m, bus.last_fix.1
            )
            .unwrap();
        }
    }
    writeln!(out, "\nsamples total: {}, fixes total: {}", stores.samples.total_count(), stores.fixes.len())
        .unwrap();
    out
}
