//! CSV persistence for every store, and whole state-directory save/load.
//!
//! Formats are plain comma-separated with a header row; floats print in
//! Rust's shortest round-trip form so `load(save(x)) == x` exactly. String
//! fields must not contain commas or line breaks; that is enforced on
//! write rather than quoted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::congestion::{CongestionSample, DayHour, HistoricalModel, HistoryBucket};
use crate::datacenter::config::{load_config, ConfigError};
use crate::datacenter::report::render_report;
use crate::datacenter::store::{Stores, WorldConfig};
use crate::gateway::{Account, AccountStore};
use crate::signalctl::SignalPlan;
use crate::transit::{update_fix, GeoPoint, GpsFix, Route};

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt record: {msg}")]
    CorruptRecord { path: PathBuf, line: usize, msg: String },
    #[error("field {field} contains a delimiter: {value:?}")]
    InvalidField { field: &'static str, value: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot rebuild state: {0}")]
    Rebuild(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io { path: path.to_path_buf(), source }
}

fn check_field(field: &'static str, value: &str) -> Result<(), PersistError> {
    if value.contains(',') || value.contains('\n') || value.contains('\r') {
        return Err(PersistError::InvalidField { field, value: value.to_string() });
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), PersistError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Read a headered CSV, handing each record line (1-based numbering) to
/// `parse`; a `parse` error message becomes a `CorruptRecord` at that line.
fn read_records<T>(
    path: &Path,
    header: &str,
    mut parse: impl FnMut(&str) -> Result<T, String>,
) -> Result<Vec<T>, PersistError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == header => {}
        Some((_, first)) => {
            return Err(PersistError::CorruptRecord {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected header '{header}', found '{first}'"),
            })
        }
        None => {
            return Err(PersistError::CorruptRecord {
                path: path.to_path_buf(),
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        out.push(parse(line).map_err(|msg| PersistError::CorruptRecord {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        })?);
    }
    Ok(out)
}

fn split_exact<'a>(line: &'a str, n: usize) -> Result<Vec<&'a str>, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        return Err(format!("expected {n} fields, found {}", fields.len()));
    }
    Ok(fields)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("bad {what} {s:?}: {e}"))
}

// --- samples ---------------------------------------------------------------

pub const SAMPLES_HEADER: &str = "road_id,timestamp_s,percent,relative_delta_pct";

pub fn save_samples<'a>(
    path: &Path,
    samples: impl Iterator<Item = &'a CongestionSample>,
) -> Result<(), PersistError> {
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for s in samples {
        check_field("road_id", &s.road_id)?;
        let delta = s.relative_delta_pct.map(|d| d.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", s.road_id, s.timestamp_s, s.percent, delta).unwrap();
    }
    write_file(path, &out)
}

pub fn load_samples(path: &Path) -> Result<Vec<CongestionSample>, PersistError> {
    read_records(path, SAMPLES_HEADER, |line| {
        let f = split_exact(line, 4)?;
        Ok(CongestionSample {
            road_id: f[0].to_string(),
            timestamp_s: parse_num(f[1], "timestamp")?,
            percent: parse_num(f[2], "percent")?,
            relative_delta_pct: if f[3].is_empty() {
                None
            } else {
                Some(parse_num(f[3], "relative delta")?)
            },
        })
    })
}

// --- GPS fixes ---------------------------------------------------------------

pub const FIXES_HEADER: &str = "bus_no,timestamp_s,lat,lon";

pub fn save_fixes<'a>(
    path: &Path,
    fixes: impl Iterator<Item = &'a GpsFix>,
) -> Result<(), PersistError> {
    let mut out = String::from(FIXES_HEADER);
    out.push('\n');
    for fix in fixes {
        check_field("bus_no", &fix.bus_no)?;
        writeln!(out, "{},{},{},{}", fix.bus_no, fix.timestamp_s, fix.point.lat, fix.point.lon)
            .unwrap();
    }
    write_file(path, &out)
}

pub fn load_fixes(path: &Path) -> Result<Vec<GpsFix>, PersistError> {
    read_records(path, FIXES_HEADER, |line| {
        let f = split_exact(line, 4)?;
        let lat: f64 = parse_num(f[2], "lat")?;
        let lon: f64 = parse_num(f[3], "lon")?;
        Ok(GpsFix {
            bus_no: f[0].to_string(),
            timestamp_s: parse_num(f[1], "timestamp")?,
            point: GeoPoint::new(lat, lon).map_err(|e| e.to_string())?,
        })
    })
}

// --- signal plans ------------------------------------------------------------

pub const PLANS_HEADER: &str = "junction_id,road_id,green_s,cycle_s";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanRow {
    pub junction_id: String,
    pub road_id: String,
    pub green_s: u32,
    pub cycle_s: u32,
}

pub fn plans_to_rows(plans: &[SignalPlan]) -> Vec<PlanRow> {
    let mut rows = Vec::new();
    for plan in plans {
        for (road, &green) in &plan.greens {
            rows.push(PlanRow {
                junction_id: plan.junction_id.clone(),
                road_id: road.clone(),
                green_s: green,
                cycle_s: plan.cycle_s,
            });
        }
    }
    rows
}

pub fn save_plans(path: &Path, rows: &[PlanRow]) -> Result<(), PersistError> {
    let mut out = String::from(PLANS_HEADER);
    out.push('\n');
    for r in rows {
        check_field("junction_id", &r.junction_id)?;
        check_field("road_id", &r.road_id)?;
        writeln!(out, "{},{},{},{}", r.junction_id, r.road_id, r.green_s, r.cycle_s).unwrap();
    }
    write_file(path, &out)
}

pub fn load_plans(path: &Path) -> Result<Vec<PlanRow>, PersistError> {
    read_records(path, PLANS_HEADER, |line| {
        let f = split_exact(line, 4)?;
        Ok(PlanRow {
            junction_id: f[0].to_string(),
            road_id: f[1].to_string(),
            green_s: parse_num(f[2], "green")?,
            cycle_s: parse_num(f[3], "cycle")?,
        })
    })
}

// --- historical model ----------------------------------------------------------

pub const HISTORY_HEADER: &str = "road_id,dow,hour,count,mean_percent";

pub fn save_history(path: &Path, model: &HistoricalModel) -> Result<(), PersistError> {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for (road, at, bucket) in model.iter_buckets() {
        check_field("road_id", road)?;
        writeln!(out, "{road},{},{},{},{}", at.dow(), at.hour(), bucket.count, bucket.mean_percent)
            .unwrap();
    }
    write_file(path, &out)
}

pub fn load_history(path: &Path) -> Result<HistoricalModel, PersistError> {
    let rows = read_records(path, HISTORY_HEADER, |line| {
        let f = split_exact(line, 5)?;
        let dow: u8 = parse_num(f[1], "dow")?;
        let hour: u8 = parse_num(f[2], "hour")?;
        let at = DayHour::new(dow, hour).ok_or_else(|| format!("bad bucket {dow}/{hour}"))?;
        Ok((
            f[0].to_string(),
            at,
            HistoryBucket {
                count: parse_num(f[3], "count")?,
                mean_percent: parse_num(f[4], "mean")?,
            },
        ))
    })?;
    let mut model = HistoricalModel::new();
    for (road, at, bucket) in rows {
        model.set_bucket(&road, at, bucket);
    }
    Ok(model)
}

// --- accounts ------------------------------------------------------------------

pub const ACCOUNTS_HEADER: &str = "username,salt,digest,created_at";

pub fn save_accounts(path: &Path, store: &AccountStore) -> Result<(), PersistError> {
    let mut out = String::from(ACCOUNTS_HEADER);
    out.push('\n');
    for account in store.iter() {
        check_field("username", &account.username)?;
        writeln!(
            out,
            "{},{},{},{}",
            account.username,
            hex::encode(account.salt),
            hex::encode(account.digest),
            account.created_at
        )
        .unwrap();
    }
    write_file(path, &out)
}

pub fn load_accounts(path: &Path) -> Result<AccountStore, PersistError> {
    let rows = read_records(path, ACCOUNTS_HEADER, |line| {
        let f = split_exact(line, 4)?;
        let salt_vec = hex::decode(f[1]).map_err(|e| format!("bad salt hex: {e}"))?;
        let digest_vec = hex::decode(f[2]).map_err(|e| format!("bad digest hex: {e}"))?;
        let salt: [u8; 16] =
            salt_vec.try_into().map_err(|_| "salt must be 16 bytes".to_string())?;
        let digest: [u8; 32] =
            digest_vec.try_into().map_err(|_| "digest must be 32 bytes".to_string())?;
        Ok(Account {
            username: f[0].to_string(),
            salt,
            digest,
            created_at: parse_num(f[3], "created_at")?,
        })
    })?;
    let mut store = AccountStore::new();
    for account in rows {
        store
            .insert_raw(account)
            .map_err(|e| PersistError::Rebuild(format!("duplicate account: {e}")))?;
    }
    Ok(store)
}

// --- route stops -----------------------------------------------------------------

pub const STOPS_HEADER: &str = "route_id,seq,stop_id,stop_name,lat,lon,offset_s";

#[derive(Debug, Clone, PartialEq)]
pub struct StopRow {
    pub route_id: String,
    pub seq: u32,
    pub stop_id: String,
    pub stop_name: String,
    pub lat: f64,
    pub lon: f64,
    pub offset_s: u32,
}

pub fn routes_to_stop_rows(routes: &[Route]) -> Vec<StopRow> {
    let mut rows = Vec::new();
    for route in routes {
        for (seq, rs) in route.stops.iter().enumerate() {
            rows.push(StopRow {
                route_id: route.route_id.clone(),
                seq: seq as u32,
                stop_id: rs.stop.stop_id.clone(),
                stop_name: rs.stop.name.clone(),
                lat: rs.stop.location.lat,
                lon: rs.stop.location.lon,
                offset_s: rs.scheduled_offset_s,
            });
        }
    }
    rows
}

pub fn save_stops(path: &Path, rows: &[StopRow]) -> Result<(), PersistError> {
    let mut out = String::from(STOPS_HEADER);
    out.push('\n');
    for r in rows {
        check_field("route_id", &r.route_id)?;
        check_field("stop_id", &r.stop_id)?;
        check_field("stop_name", &r.stop_name)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.route_id, r.seq, r.stop_id, r.stop_name, r.lat, r.lon, r.offset_s
        )
        .unwrap();
    }
    write_file(path, &out)
}

pub fn load_stops(path: &Path) -> Result<Vec<StopRow>, PersistError> {
    read_records(path, STOPS_HEADER, |line| {
        let f = split_exact(line, 7)?;
        Ok(StopRow {
            route_id: f[0].to_string(),
            seq: parse_num(f[1], "seq")?,
            stop_id: f[2].to_string(),
            stop_name: f[3].to_string(),
            lat: parse_num(f[4], "lat")?,
            lon: parse_num(f[5], "lon")?,
            offset_s: parse_num(f[6], "offset")?,
        })
    })
}

// --- whole state directories -------------------------------------------------------

/// Write the full state of a run into `dir`, self-contained: the config
/// (raster paths rewritten to a local `rasters/` copy), all CSV stores,
/// and the human-readable report. Frames are streamed separately by the
/// pipeline during the run.
pub fn save_state(dir: &Path, world: &WorldConfig, stores: &Stores) -> Result<(), PersistError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rasters = dir.join("rasters");
    fs::create_dir_all(&rasters).map_err(io_err(&rasters))?;
    let mut raw = world.raw.clone();
    for road_cfg in &mut raw.road {
        let road = world
            .city
            .road(&road_cfg.id)
            .ok_or_else(|| PersistError::Rebuild(format!("unknown road {}", road_cfg.id)))?;
        road_cfg.baseline = format!("rasters/{}_baseline.ppm", road_cfg.id);
        road_cfg.mask = format!("rasters/{}_mask.pbm", road_cfg.id);
        let baseline_path = dir.join(&road_cfg.baseline);
        crate::pnm::save_ppm(&baseline_path, &road.profile.baseline)
            .map_err(|e| PersistError::Rebuild(format!("{}: {e}", baseline_path.display())))?;
        let mask_path = dir.join(&road_cfg.mask);
        crate::pnm::save_pbm(&mask_path, &road.profile.roi_mask)
            .map_err(|e| PersistError::Rebuild(format!("{}: {e}", mask_path.display())))?;
    }
    let config_dst = dir.join("config.toml");
    write_file(&config_dst, &raw.to_toml()?)?;
    save_samples(&dir.join("samples.csv"), stores.samples.iter_all())?;
    save_fixes(&dir.join("fixes.csv"), stores.fixes.iter())?;
    save_plans(&dir.join("plans.csv"), &plans_to_rows(&stores.plans()))?;
    save_history(&dir.join("history.csv"), &stores.samples.history)?;
    save_accounts(&dir.join("accounts.csv"), &stores.accounts)?;
    save_stops(&dir.join("stops.csv"), &routes_to_stop_rows(&world.city.routes))?;
    write_file(&dir.join("report.txt"), &render_report(world, stores))
}

/// Rebuild a queryable world from a state directory: reload the config,
/// replay samples and GPS fixes, and restore plans, history, and accounts.
pub fn load_state(dir: &Path) -> Result<(WorldConfig, Stores), PersistError> {
    let world = load_config(&dir.join("config.toml"))?;
    let mut stores = Stores::new(&world);

    for sample in load_samples(&dir.join("samples.csv"))? {
        stores
            .samples
            .append(sample)
            .map_err(|e| PersistError::Rebuild(e.to_string()))?;
    }
    stores.samples.history = load_history(&dir.join("history.csv"))?;

    let fixes = load_fixes(&dir.join("fixes.csv"))?;
    for fix in &fixes {
        let bus = stores.tracked.get_mut(&fix.bus_no).ok_or_else(|| {
            PersistError::Rebuild(format!("fix for unknown bus {}", fix.bus_no))
        })?;
        let route = world
            .city
            .routes
            .iter()
            .find(|r| r.route_id == bus.route_id)
            .expect("config validated");
        update_fix(bus, route, fix.point, fix.timestamp_s)
            .map_err(|e| PersistError::Rebuild(e.to_string()))?;
    }
    stores.fixes = fixes;

    let plan_rows = load_plans(&dir.join("plans.csv"))?;
    for junction in &mut stores.junctions {
        let mine: BTreeMap<String, u32> = plan_rows
            .iter()
            .filter(|r| r.junction_id == junction.plan.junction_id)
            .map(|r| (r.road_id.clone(), r.green_s))
            .collect();
        if mine.is_empty() {
            continue;
        }
        let cycle = plan_rows
            .iter()
            .find(|r| r.junction_id == junction.plan.junction_id)
            .map(|r| r.cycle_s)
            .unwrap();
        let plan = SignalPlan::new(
            junction.plan.junction_id.clone(),
            mine,
            cycle,
            junction.plan.lost_time_s,
            junction.plan.min_green_s,
            junction.plan.max_green_s,
            junction.plan.max_delta_s,
        )
        .map_err(|e| PersistError::Rebuild(e.to_string()))?;
        *junction = crate::signalctl::JunctionState::new(plan);
    }

    let accounts_path = dir.join("accounts.csv");
    if accounts_path.exists() {
        stores.accounts = load_accounts(&accounts_path)?;
    }

    stores.clock_s = stores
        .samples
        .iter_all()
        .map(|s| s.timestamp_s)
        .chain(stores.fixes.iter().map(|f| f.timestamp_s))
        .max()
        .unwrap_or(world.city.start_time_s);
    Ok((world, stores))
}
