//! Congestion detection from road frames.
//!
//! A road's congestion percentage is the fraction of ROI pixels in the
//! captured frame that differ from the empty-road baseline beyond a
//! per-channel tolerance. On top of that sit successive-sample deltas,
//! 5-minute trends, a day-of-week/hour historical model, and the
//! color-coded virtual map.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::raster::{draw_polyline, Mask, Raster};

/// Per-channel tolerance for "same pixel" during frame differencing,
/// inclusive: a channel delta of exactly this value still counts as same.
pub const PIXEL_TOLERANCE: u8 = 10;

/// Samples older than this (relative to the newest) fall out of the trend window.
pub const TREND_WINDOW_S: u64 = 300;

/// Slope magnitude (percent per minute) separating Rising/Falling from Steady.
pub const TREND_SLOPE_THRESHOLD: f64 = 0.5;

pub const WHITE: [u8; 3] = [255, 255, 255];
pub const RED: [u8; 3] = [255, 0, 0];

#[derive(Debug, Error, PartialEq)]
pub enum CongestionError {
    #[error("frame is {got_w}x{got_h} but the baseline is {want_w}x{want_h}")]
    DimensionMismatch { want_w: u32, want_h: u32, got_w: u32, got_h: u32 },
    #[error("samples are for different roads ({0} vs {1})")]
    RoadMismatch(String, String),
    #[error("sample timestamps do not increase ({prev} then {next})")]
    NonMonotonicTimestamps { prev: u64, next: u64 },
    #[error("percent {0} outside [0, 100]")]
    OutOfRange(f64),
    #[error("trend needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("no historical data for this bucket")]
    NoData,
    #[error("virtual map needs at least one road")]
    EmptyRoadList,
    #[error("invalid road profile: {0}")]
    InvalidProfile(String),
}

/// Static per-road capture setup: the empty-road baseline, the ROI mask,
/// and the geometry the signal controller weighs.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadProfile {
    pub road_id: String,
    pub baseline: Raster,
    pub roi_mask: Mask,
    pub length_m: f64,
    pub lanes: u32,
    pub capture_interval_s: u32,
}

impl RoadProfile {
    pub fn new(
        road_id: impl Into<String>,
        baseline: Raster,
        roi_mask: Mask,
        length_m: f64,
        lanes: u32,
        capture_interval_s: u32,
    ) -> Result<Self, CongestionError> {
        let road_id = road_id.into();
        if !roi_mask.matches_raster(&baseline) {
            return Err(CongestionError::InvalidProfile(format!(
                "mask {}x{} does not match baseline {}x{}",
                roi_mask.width(),
                roi_mask.height(),
                baseline.width(),
                baseline.height()
            )));
        }
        if roi_mask.count_set() == 0 {
            return Err(CongestionError::InvalidProfile("ROI mask has no road cells".into()));
        }
        if !(length_m > 0.0) {
            return Err(CongestionError::InvalidProfile("length_m must be positive".into()));
        }
        if lanes == 0 {
            return Err(CongestionError::InvalidProfile("lanes must be >= 1".into()));
        }
        if capture_interval_s == 0 {
            return Err(CongestionError::InvalidProfile("capture interval must be positive".into()));
        }
        Ok(RoadProfile { road_id, baseline, roi_mask, length_m, lanes, capture_interval_s })
    }
}

/// White/red visualization of a baseline-vs-frame comparison. Every pixel
/// is pure white (same / outside ROI) or pure red (changed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedImage {
    raster: Raster,
}

impl ProcessedImage {
    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn red_count(&self) -> usize {
        let mut n = 0;
        for y in 0..self.raster.height() {
            for x in 0..self.raster.width() {
                if self.raster.get(x, y) == RED {
                    n += 1;
                }
            }
        }
        n
    }
}

/// One congestion measurement for one road.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionSample {
    pub road_id: String,
    pub timestamp_s: u64,
    pub percent: f64,
    /// Signed change vs. the previous sample on the same road; `None` for
    /// the first sample.
    pub relative_delta_pct: Option<f64>,
}

/// Compare a captured frame against the road's empty baseline pixel by
/// pixel. Masked pixels whose largest per-channel difference exceeds
/// `tolerance` turn red in the processed image; everything else is white.
/// Returns the processed image and the congestion percentage
/// `100 * red / masked`.
pub fn diff_against_baseline(
    profile: &RoadProfile,
    current: &Raster,
    tolerance: u8,
) -> Result<(ProcessedImage, f64), CongestionError> {
    if !profile.baseline.same_dims(current) {
        return Err(CongestionError::DimensionMismatch {
            want_w: profile.baseline.width(),
            want_h: profile.baseline.height(),
            got_w: current.width(),
            got_h: current.height(),
        });
    }
    let mut out = Raster::filled(current.width(), current.height(), WHITE);
    let mut masked = 0u64;
    let mut red = 0u64;
    for y in 0..current.height() {
        for x in 0..current.width() {
            if !profile.roi_mask.get(x, y) {
                continue;
            }
            masked += 1;
            let a = profile.baseline.get(x, y);
            let b = current.get(x, y);
            let delta = a
                .iter()
                .zip(b.iter())
                .map(|(p, q)| p.abs_diff(*q))
                .max()
                .expect("three channels");
            if delta > tolerance {
                red += 1;
                out.set(x, y, RED);
            }
        }
    }
    // RoadProfile guarantees masked > 0.
    let percent = 100.0 * red as f64 / masked as f64;
    Ok((ProcessedImage { raster: out }, percent))
}

/// Signed percent change between two successive samples of the same road.
pub fn relative_change(
    previous: &CongestionSample,
    current: &CongestionSample,
) -> Result<f64, CongestionError> {
    if previous.road_id != current.road_id {
        return Err(CongestionError::RoadMismatch(
            previous.road_id.clone(),
            current.road_id.clone(),
        ));
    }
    if current.timestamp_s <= previous.timestamp_s {
        return Err(CongestionError::NonMonotonicTimestamps {
            prev: previous.timestamp_s,
            next: current.timestamp_s,
        });
    }
    Ok(current.percent - previous.percent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrafficStatus {
    Free,
    Moderate,
    Heavy,
    Jam,
}

impl fmt::Display for TrafficStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrafficStatus::Free => "Free",
            TrafficStatus::Moderate => "Moderate",
            TrafficStatus::Heavy => "Heavy",
            TrafficStatus::Jam => "Jam",
        };
        f.write_str(s)
    }
}

/// Free [0,25), Moderate [25,50), Heavy [50,75), Jam [75,100].
pub fn classify_status(percent: f64) -> Result<TrafficStatus, CongestionError> {
    if !(0.0..=100.0).contains(&percent) {
        return Err(CongestionError::OutOfRange(percent));
    }
    Ok(if percent < 25.0 {
        TrafficStatus::Free
    } else if percent < 50.0 {
        TrafficStatus::Moderate
    } else if percent < 75.0 {
        TrafficStatus::Heavy
    } else {
        TrafficStatus::Jam
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendLabel {
    Rising,
    Falling,
    Steady,
}

impl fmt::Display for TrendLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrendLabel::Rising => "Rising",
            TrendLabel::Falling => "Falling",
            TrendLabel::Steady => "Steady",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trend5Min {
    pub slope_pct_per_min: f64,
    pub label: TrendLabel,
}

pub fn label_for_slope(slope_pct_per_min: f64) -> TrendLabel {
    if slope_pct_per_min > TREND_SLOPE_THRESHOLD {
        TrendLabel::Rising
    } else if slope_pct_per_min < -TREND_SLOPE_THRESHOLD {
        TrendLabel::Falling
    } else {
        TrendLabel::Steady
    }
}

/// Ordinary-least-squares slope of percent against time-in-minutes over the
/// caller-supplied window (time-ordered, all within [`TREND_WINDOW_S`] of
/// the newest sample).
pub fn trend_last_5min(samples: &[CongestionSample]) -> Result<Trend5Min, CongestionError> {
    if samples.len() < 2 {
        return Err(CongestionError::InsufficientSamples(samples.len()));
    }
    let t0 = samples[0].timestamp_s;
    let xs: Vec<f64> = samples.iter().map(|s| (s.timestamp_s - t0) as f64 / 60.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.percent).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    let slope = num / den;
    Ok(Trend5Min { slope_pct_per_min: slope, label: label_for_slope(slope) })
}

/// A (day-of-week, hour-of-day) bucket index. Day 0 is Sunday.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayHour {
    dow: u8,
    hour: u8,
}

impl DayHour {
    pub fn new(dow: u8, hour: u8) -> Option<Self> {
        (dow < 7 && hour < 24).then_some(DayHour { dow, hour })
    }

    /// Bucket for an epoch timestamp (UTC). 1970-01-01 was a Thursday.
    pub fn from_timestamp(timestamp_s: u64) -> Self {
        let days = timestamp_s / 86_400;
        let dow = ((days + 4) % 7) as u8;
        let hour = ((timestamp_s % 86_400) / 3_600) as u8;
        DayHour { dow, hour }
    }

    pub fn dow(&self) -> u8 {
        self.dow
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HistoryBucket {
    pub count: u64,
    pub mean_percent: f64,
}

/// 7x24 incremental-mean grid per road: the "same hour on the same weekday"
/// congestion trend.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoricalModel {
    roads: BTreeMap<String, Box<[[HistoryBucket; 24]; 7]>>,
}

impl HistoricalModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, road_id: &str, at: DayHour, percent: f64) {
        let grid = self
            .roads
            .entry(road_id.to_string())
            .or_insert_with(|| Box::new([[HistoryBucket::default(); 24]; 7]));
        let bucket = &mut grid[at.dow as usize][at.hour as usize];
        bucket.count += 1;
        // Incremental mean keeps the bucket equal to the arithmetic mean of
        // everything ever added to it.
        bucket.mean_percent += (percent - bucket.mean_percent) / bucket.count as f64;
    }

    pub fn predict(&self, road_id: &str, at: DayHour) -> Result<f64, CongestionError> {
        let bucket = self
            .roads
            .get(road_id)
            .map(|g| g[at.dow as usize][at.hour as usize])
            .unwrap_or_default();
        if bucket.count == 0 {
            return Err(CongestionError::NoData);
        }
        Ok(bucket.mean_percent)
    }

    pub fn bucket(&self, road_id: &str, at: DayHour) -> HistoryBucket {
        self.roads
            .get(road_id)
            .map(|g| g[at.dow as usize][at.hour as usize])
            .unwrap_or_default()
    }

    /// Non-empty buckets in (road, dow, hour) order.
    pub fn iter_buckets(&self) -> impl Iterator<Item = (&str, DayHour, HistoryBucket)> + '_ {
        self.roads.iter().flat_map(|(road, grid)| {
            grid.iter().enumerate().flat_map(move |(d, row)| {
                row.iter().enumerate().filter_map(move |(h, b)| {
                    (b.count > 0).then(|| {
                        (road.as_str(), DayHour { dow: d as u8, hour: h as u8 }, *b)
                    })
                })
            })
        })
    }

    pub fn set_bucket(&mut self, road_id: &str, at: DayHour, bucket: HistoryBucket) {
        let grid = self
            .roads
            .entry(road_id.to_string())
            .or_insert_with(|| Box::new([[HistoryBucket::default(); 24]; 7]));
        grid[at.dow as usize][at.hour as usize] = bucket;
    }
}

pub fn status_color(status: TrafficStatus) -> [u8; 3] {
    match status {
        TrafficStatus::Free => [0, 200, 0],
        TrafficStatus::Moderate => [230, 200, 0],
        TrafficStatus::Heavy => [255, 140, 0],
        TrafficStatus::Jam => [255, 0, 0],
    }
}

/// Schematic city map: each road drawn as a 3-pixel-wide polyline in its
/// status color on a white canvas. Polyline coordinates are canvas pixels.
pub fn render_virtual_map(
    roads: &[(Vec<(f64, f64)>, f64)],
    width: u32,
    height: u32,
) -> Result<Raster, CongestionError> {
    if roads.is_empty() {
        return Err(CongestionError::EmptyRoadList);
    }
    assert!(width > 0 && height > 0, "canvas dimensions must be positive");
    let mut canvas = Raster::filled(width, height, WHITE);
    for (polyline, percent) in roads {
        let status = classify_status(percent.clamp(0.0, 100.0)).expect("clamped percent");
        draw_polyline(&mut canvas, polyline, status_color(status), 1.5);
    }
    Ok(canvas)
}
