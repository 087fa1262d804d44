//! The autonomous pipeline.
//!
//! One writer owns all stores and advances the world one second at a time:
//! queues step, frames are captured (synthesized or ingested) and diffed
//! into samples, the historical model learns, buses move and their fixes
//! feed the tracker, and junctions replan at cycle boundaries. Queries
//! never run here; they read snapshots.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::congestion::{
    diff_against_baseline, relative_change, trend_last_5min, CongestionError, CongestionSample,
    DayHour, TrendLabel, TREND_WINDOW_S,
};
use crate::datacenter::store::{Snapshot, StoreError, Stores, WorldConfig};
use crate::pnm::{self, PnmError};
use crate::signalctl::{junction_max_geom, priority_score, replan, Approach, SignalError};
use crate::simulator::{advance_buses, step, synthesize_frame, SimState};
use crate::transit::{update_fix, TransitError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Congestion(#[from] CongestionError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Transit(#[from] TransitError),
    #[error(transparent)]
    Pnm(#[from] PnmError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where captured frames come from.
#[derive(Debug, Clone)]
pub enum FrameSource {
    /// Render frames from the simulated queues.
    Synthesize,
    /// Read `frames/<road>/<timestamp>.ppm` under this directory; a missing
    /// frame skips that road for that instant.
    Ingest(PathBuf),
}

pub struct Pipeline {
    pub world: Arc<WorldConfig>,
    pub sim: SimState,
    pub stores: Stores,
    source: FrameSource,
    /// When set, captured frames are written under `<dir>/<road>/<ts>.ppm`.
    frames_dir: Option<PathBuf>,
    pub skipped_frames: u64,
}

pub fn frame_file_name(timestamp_s: u64) -> String {
    format!("{timestamp_s}.ppm")
}

impl Pipeline {
    pub fn new(
        world: Arc<WorldConfig>,
        seed: u64,
        source: FrameSource,
        frames_dir: Option<PathBuf>,
    ) -> Result<Self, PipelineError> {
        let sim = SimState::new(&world.city, seed);
        let stores = Stores::new(&world);
        if let Some(dir) = &frames_dir {
            for road in &world.city.roads {
                let road_dir = dir.join(road.road_id());
                std::fs::create_dir_all(&road_dir)
                    .map_err(|e| PipelineError::Io { path: road_dir.clone(), source: e })?;
            }
        }
        Ok(Pipeline { world, sim, stores, source, frames_dir, skipped_frames: 0 })
    }

    /// Advance the whole world by one second.
    pub fn tick(&mut self) -> Result<(), PipelineError> {
        let dt = 1u32;
        let city = &self.world.city;

        step(city, &self.stores.junctions, &mut self.sim, dt);
        let clock = self.sim.clock_s;
        self.stores.clock_s = clock;
        let rel = clock - city.start_time_s;

        // capture instants
        for road in &city.roads {
            let interval = road.profile.capture_interval_s as u64;
            if rel == 0 || rel % interval != 0 {
                continue;
            }
            let road_id = road.road_id();
            let frame = match &self.source {
                FrameSource::Synthesize => {
                    let queue = self.sim.queue(road_id).expect("known road");
                    synthesize_frame(&road.profile, queue)
                }
                FrameSource::Ingest(dir) => {
                    let path =
                        dir.join("frames").join(road_id).join(frame_file_name(clock));
                    if !path.exists() {
                        self.skipped_frames += 1;
                        continue;
                    }
                    pnm::load_ppm(&path)?
                }
            };
            if let Some(out) = &self.frames_dir {
                let path = out.join(road_id).join(frame_file_name(clock));
                pnm::save_ppm(&path, &frame)?;
            }
            let (_processed, percent) =
                diff_against_baseline(&road.profile, &frame, self.world.pixel_tolerance)?;
            let mut sample = CongestionSample {
                road_id: road_id.to_string(),
                timestamp_s: clock,
                percent,
                relative_delta_pct: None,
            };
            if let Some(previous) = self.stores.samples.latest(road_id) {
                sample.relative_delta_pct = Some(relative_change(previous, &sample)?);
            }
            self.stores.samples.history.update(road_id, DayHour::from_timestamp(clock), percent);
            self.stores.samples.append(sample)?;
        }

        // buses move every tick; fixes are emitted on the GPS schedule and
        // immediately drive the tracker
        let latest: BTreeMap<String, f64> = city
            .roads
            .iter()
            .filter_map(|r| {
                self.stores.samples.latest(r.road_id()).map(|s| (r.road_id().to_string(), s.percent))
            })
            .collect();
        let fixes = advance_buses(city, &mut self.sim, &latest, dt);
        for fix in fixes {
            let bus = self.stores.tracked.get_mut(&fix.bus_no).expect("tracked bus");
            let route = city
                .routes
                .iter()
                .find(|r| r.route_id == bus.route_id)
                .expect("city validated");
            update_fix(bus, route, fix.point, fix.timestamp_s)?;
            self.stores.fixes.push(fix);
        }

        // junction clocks; replan only at cycle boundaries
        let stores = &mut self.stores;
        for junction in &mut stores.junctions {
            let completed = junction.tick(dt);
            if completed == 0 || junction.plan.greens.len() < 2 {
                continue;
            }
            let approaches: Vec<Approach> = junction
                .plan
                .greens
                .keys()
                .map(|road_id| {
                    let road = city.road(road_id).expect("city validated");
                    let latest_percent =
                        stores.samples.latest(road_id).map(|s| s.percent).unwrap_or(0.0);
                    let trend_label = trend_last_5min(
                        stores.samples.window(road_id, clock, TREND_WINDOW_S),
                    )
                    .map(|t| t.label)
                    .unwrap_or(TrendLabel::Steady);
                    let historical_percent = stores
                        .samples
                        .history
                        .predict(road_id, DayHour::from_timestamp(clock))
                        .ok();
                    Approach {
                        road_id: road_id.clone(),
                        length_m: road.profile.length_m,
                        lanes: road.profile.lanes,
                        latest_percent,
                        trend_label,
                        historical_percent,
                    }
                })
                .collect();
            let max_geom = junction_max_geom(&approaches);
            let scores: BTreeMap<String, f64> = approaches
                .iter()
                .map(|a| (a.road_id.clone(), priority_score(a, max_geom)))
                .collect();
            junction.plan = replan(&junction.plan, &scores)?;
        }
        Ok(())
    }

    pub fn run(&mut self, duration_s: u64) -> Result<(), PipelineError> {
        for _ in 0..duration_s {
            self.tick()?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        self.stores.snapshot(&self.world)
    }
}
