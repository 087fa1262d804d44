//! Command-line front end: simulate, serve, query, render-map, report.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::{Parser, Subcommand};

use city_its::congestion::render_virtual_map;
use city_its::datacenter::{
    load_config, load_state, save_state, serve, FrameSource, Pipeline, Stores, WorldConfig,
};
use city_its::datacenter::report::render_report;
use city_its::gateway;
use city_its::pnm;
use city_its::transit::GeoPoint;

#[derive(Parser)]
#[command(
    name = "city-its",
    version,
    about = "City ITS datacenter: frame-diff congestion detection, bus tracking, gradual signal retiming, and an SMS-style query gateway"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the autonomous pipeline over the synthetic city and write a state directory
    Simulate {
        /// City config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Simulated seconds to run
        #[arg(long)]
        duration: u64,
        /// Overrides the seed in the config
        #[arg(long)]
        seed: Option<u64>,
        /// Output state directory (must be empty or absent)
        #[arg(long)]
        out: PathBuf,
        /// Read frames from `<DIR>/frames/<road>/<ts>.ppm` instead of synthesizing
        #[arg(long)]
        ingest: Option<PathBuf>,
    },
    /// Run the live pipeline with the line-protocol gateway (TCP with --listen, stdin otherwise)
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Address to listen on, e.g. 127.0.0.1:7060
        #[arg(long)]
        listen: Option<String>,
    },
    /// Answer one SMS-style query against a saved state directory
    Query {
        /// Query body, e.g. "BUS AB Chowk;Nal Stop"
        #[arg(long)]
        sms: String,
        #[arg(long)]
        state: PathBuf,
        /// Device coordinate "lat,lon" for the @GPS source
        #[arg(long)]
        at: Option<String>,
    },
    /// Render the color-coded virtual map for a saved state directory
    RenderMap {
        #[arg(long)]
        state: PathBuf,
        /// Output PPM file
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        width: u32,
        #[arg(long, default_value_t = 512)]
        height: u32,
    },
    /// Print per-road statistics and junction plans from a saved state directory
    Report {
        #[arg(long)]
        state: PathBuf,
    },
}

type AnyError = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), AnyError> {
    match command {
        Command::Simulate { config, duration, seed, out, ingest } => {
            simulate(&config, duration, seed, &out, ingest)
        }
        Command::Serve { config, listen } => run_serve(&config, listen),
        Command::Query { sms, state, at } => query(&sms, &state, at),
        Command::RenderMap { state, out, width, height } => render_map(&state, &out, width, height),
        Command::Report { state } => {
            let (world, stores) = load_state(&state)?;
            print!("{}", render_report(&world, &stores));
            Ok(())
        }
    }
}

fn simulate(
    config_path: &Path,
    duration: u64,
    seed: Option<u64>,
    out: &Path,
    ingest: Option<PathBuf>,
) -> Result<(), AnyError> {
    let mut world = load_config(config_path)?;
    if let Some(seed) = seed {
        world.set_seed(seed);
    }
    let world = Arc::new(world);
    if out.exists() && out.read_dir()?.next().is_some() {
        return Err(format!("output directory {} is not empty", out.display()).into());
    }
    fs::create_dir_all(out)?;
    let source = match ingest {
        Some(dir) => FrameSource::Ingest(dir),
        None => FrameSource::Synthesize,
    };
    let mut pipeline = Pipeline::new(
        Arc::clone(&world),
        world.city.seed,
        source,
        Some(out.join("frames")),
    )?;
    pipeline.run(duration)?;
    save_state(out, &world, &pipeline.stores)?;
    if pipeline.skipped_frames > 0 {
        eprintln!("warning: {} capture instants had no frame file", pipeline.skipped_frames);
    }
    println!(
        "simulated {duration} s (seed {}): {} samples, {} fixes -> {}",
        world.city.seed,
        pipeline.stores.samples.total_count(),
        pipeline.stores.fixes.len(),
        out.display()
    );
    Ok(())
}

fn run_serve(config_path: &Path, listen: Option<String>) -> Result<(), AnyError> {
    let world = Arc::new(load_config(config_path)?);
    let pipeline = Pipeline::new(
        Arc::clone(&world),
        world.city.seed,
        FrameSource::Synthesize,
        None,
    )?;
    let shared = serve::shared_snapshot(pipeline.snapshot());
    let shutdown = Arc::new(AtomicBool::new(false));
    let writer = {
        let shared = Arc::clone(&shared);
        let shutdown = Arc::clone(&shutdown);
        thread::spawn(move || serve::run_writer(pipeline, shared, shutdown, Duration::from_secs(1)))
    };
    eprintln!("pipeline live for {}; request: FROM <number> TEXT <body>", world.city.name);
    match listen {
        Some(addr) => {
            let listener = TcpListener::bind(&addr)?;
            eprintln!("listening on {addr}");
            serve::serve_tcp(listener, shared, Arc::clone(&shutdown))?;
        }
        None => {
            serve::run_session(std::io::stdin().lock(), &mut std::io::stdout(), &shared)?;
        }
    }
    shutdown.store(true, Ordering::Relaxed);
    writer.join().map_err(|_| "writer thread panicked")??;
    Ok(())
}

fn parse_latlon(text: &str) -> Result<GeoPoint, AnyError> {
    let (lat, lon) = text
        .split_once(',')
        .ok_or_else(|| format!("expected \"lat,lon\", got {text:?}"))?;
    Ok(GeoPoint::new(lat.trim().parse()?, lon.trim().parse()?)?)
}

fn query(sms: &str, state_dir: &Path, at: Option<String>) -> Result<(), AnyError> {
    let (world, stores) = load_state(state_dir)?;
    let world = Arc::new(world);
    let snapshot = stores.snapshot(&world);
    let device = at.map(|s| parse_latlon(&s)).transpose()?;
    println!("{}", gateway::answer_body(sms, &snapshot, device));
    Ok(())
}

/// Project road polylines (lat/lon) onto the canvas, north up.
fn project_roads(
    world: &WorldConfig,
    stores: &Stores,
    width: u32,
    height: u32,
) -> Vec<(Vec<(f64, f64)>, f64)> {
    let points = world.city.roads.iter().flat_map(|r| r.polyline.points().iter());
    let (mut min_lat, mut max_lat) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_lon, mut max_lon) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_lat = min_lat.min(p.lat);
        max_lat = max_lat.max(p.lat);
        min_lon = min_lon.min(p.lon);
        max_lon = max_lon.max(p.lon);
    }
    let margin = 16.0;
    let span_x = (width as f64 - 2.0 * margin).max(1.0);
    let span_y = (height as f64 - 2.0 * margin).max(1.0);
    let lat_range = (max_lat - min_lat).max(1e-9);
    let lon_range = (max_lon - min_lon).max(1e-9);
    world
        .city
        .roads
        .iter()
        .map(|road| {
            let polyline = road
                .polyline
                .points()
                .iter()
                .map(|p| {
                    let x = margin + (p.lon - min_lon) / lon_range * span_x;
                    let y = margin + (max_lat - p.lat) / lat_range * span_y;
                    (x, y)
                })
                .collect();
            let percent =
                stores.samples.latest(road.road_id()).map(|s| s.percent).unwrap_or(0.0);
            (polyline, percent)
        })
        .collect()
}

fn render_map(state_dir: &Path, out: &Path, width: u32, height: u32) -> Result<(), AnyError> {
    let (world, stores) = load_state(state_dir)?;
    let roads = project_roads(&world, &stores, width, height);
    let map = render_virtual_map(&roads, width, height)?;
    pnm::save_ppm(out, &map)?;
    println!("wrote {}", out.display());
    Ok(())
}
