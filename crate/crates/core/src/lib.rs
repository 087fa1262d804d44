//! City ITS datacenter.
//!
//! A deterministic traffic datacenter plus a synthetic-city simulator:
//!
//! * [`congestion`] — frame-differencing congestion detection: empty-road
//!   baseline vs. captured frame, white/red processed images, 5-minute
//!   trends, day-of-week/hour historical model, color-coded virtual maps.
//! * [`transit`] — bus tracking along route polylines and congestion-aware
//!   arrival estimation for a source/destination pair.
//! * [`signalctl`] — gradual, congestion-prioritized green-time retiming at
//!   junctions under a fixed cycle.
//! * [`simulator`] — generates the datacenter's input streams (road frames,
//!   GPS fixes, ground-truth queues) from a configurable city, seeded and
//!   bit-reproducible.
//! * [`gateway`] — SMS-style query parsing (`BUS src;dst`, `TRAFFIC src;dst`),
//!   dispatch, reply formatting, and the account store.
//! * [`datacenter`] — the autonomous pipeline tying it together, CSV/PPM
//!   persistence, snapshots, and the CLI entry points.

pub mod congestion;
pub mod datacenter;
pub mod demo;
pub mod gateway;
pub mod pnm;
pub mod raster;
pub mod signalctl;
pub mod simulator;
pub mod transit;
