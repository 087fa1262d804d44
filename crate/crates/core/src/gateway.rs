//! Query gateway: the SMS grammar, dispatch against a datacenter snapshot,
//! reply formatting, and user accounts.
//!
//! Grammar: `BUS <source>;<destination>` or `TRAFFIC <source>;<destination>`
//! (keyword case-insensitive, fields trimmed). A source of `@GPS` means the
//! device supplies the coordinate. Anything malformed earns an error reply
//! that always carries the usage string.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::congestion::{classify_status, trend_last_5min, TrendLabel};
use crate::datacenter::Snapshot;
use crate::transit::{buses_toward, GeoPoint, TransitError};

pub const SMS_MAX_CHARS: usize = 160;
pub const USAGE: &str = "USAGE: BUS <src>;<dst> or TRAFFIC <src>;<dst>";

#[derive(Debug, Error, PartialEq)]
pub enum GatewayError {
    #[error("bad query format: {0}")]
    BadFormat(String),
    #[error("username '{0}' is already registered")]
    DuplicateUsername(String),
    #[error("authentication failed")]
    AuthFailed,
    #[error("username and password must be non-empty")]
    EmptyCredentials,
    #[error("formatted reply cannot fit in {SMS_MAX_CHARS} characters")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuerySource {
    /// A named place to resolve through the gazetteer.
    Named(String),
    /// `@GPS`: the querying device provides its coordinate.
    DeviceGps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    BusInfo,
    TrafficInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub kind: QueryKind,
    pub source: QuerySource,
    pub destination: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    BusReply {
        bus_no: String,
        stop_name: String,
        distance_m: f64,
        eta_s: f64,
        /// Source fell back to the configured city center (network location).
        approx_source: bool,
    },
    TrafficReply {
        percent: f64,
        trend: TrendLabel,
        status: crate::congestion::TrafficStatus,
    },
    ErrorReply {
        message: String,
    },
}

/// Parse an SMS body against the query grammar.
pub fn parse_query(body: &str) -> Result<Query, GatewayError> {
    let body = body.trim();
    let (keyword, rest) = body
        .split_once(char::is_whitespace)
        .ok_or_else(|| GatewayError::BadFormat("missing query fields".into()))?;
    let kind = if keyword.eq_ignore_ascii_case("BUS") {
        QueryKind::BusInfo
    } else if keyword.eq_ignore_ascii_case("TRAFFIC") {
        QueryKind::TrafficInfo
    } else {
        return Err(GatewayError::BadFormat(format!("unknown keyword '{keyword}'")));
    };
    let (source, destination) = rest
        .split_once(';')
        .ok_or_else(|| GatewayError::BadFormat("missing ';' between source and destination".into()))?;
    let source = source.trim();
    let destination = destination.trim();
    if destination.is_empty() {
        return Err(GatewayError::BadFormat("empty destination".into()));
    }
    if source.is_empty() {
        return Err(GatewayError::BadFormat("empty source".into()));
    }
    let source = if source.eq_ignore_ascii_case("@GPS") {
        QuerySource::DeviceGps
    } else {
        QuerySource::Named(source.to_string())
    };
    Ok(Query { kind, source, destination: destination.to_string() })
}

/// Resolve the rider's position. Unknown names and missing device fixes
/// fall back to the configured city center ("network location"), flagged
/// so the reply can say so.
fn resolve_source(
    source: &QuerySource,
    snapshot: &Snapshot,
    device_location: Option<GeoPoint>,
) -> (GeoPoint, bool) {
    match source {
        QuerySource::DeviceGps => match device_location {
            Some(p) => (p, false),
            None => (snapshot.world.city_center, true),
        },
        QuerySource::Named(name) => match snapshot.world.gazetteer_lookup(name) {
            Some(p) => (p, false),
            None => (snapshot.world.city_center, true),
        },
    }
}

/// Answer a parsed query against a consistent snapshot. Never touches the
/// stores; failures come back as `ErrorReply` with distinct messages.
pub fn handle_query(
    query: &Query,
    snapshot: &Snapshot,
    device_location: Option<GeoPoint>,
) -> Response {
    match query.kind {
        QueryKind::BusInfo => {
            let (source, approx) = resolve_source(&query.source, snapshot, device_location);
            let congestion_for = |bus: &crate::transit::Bus| snapshot.congestion_at(bus.last_fix.0);
            match buses_toward(
                source,
                &query.destination,
                &snapshot.world.city.routes,
                &snapshot.buses,
                &congestion_for,
            ) {
                Ok(results) => {
                    let best = &results[0];
                    Response::BusReply {
                        bus_no: best.bus_no.clone(),
                        stop_name: best.boarding_stop.name.clone(),
                        distance_m: best.distance_m,
                        eta_s: best.eta_s,
                        approx_source: approx,
                    }
                }
                Err(TransitError::UnknownDestination(name)) => {
                    Response::ErrorReply { message: format!("unknown destination '{name}'") }
                }
                Err(TransitError::NoRouteFound) => Response::ErrorReply {
                    message: "no route from your stop to that destination".into(),
                },
                Err(TransitError::NoBusAvailable) => Response::ErrorReply {
                    message: "no bus is currently heading to your stop".into(),
                },
                Err(other) => Response::ErrorReply { message: other.to_string() },
            }
        }
        QueryKind::TrafficInfo => {
            let source_name = match &query.source {
                QuerySource::Named(name) => name.clone(),
                QuerySource::DeviceGps => {
                    return Response::ErrorReply {
                        message: "traffic queries need a named source".into(),
                    }
                }
            };
            let Some(road_id) = snapshot.world.road_between(&source_name, &query.destination)
            else {
                return Response::ErrorReply {
                    message: format!(
                        "no road mapped from '{}' to '{}'",
                        source_name.trim(),
                        query.destination.trim()
                    ),
                };
            };
            let Some(latest) = snapshot.latest.get(&road_id) else {
                return Response::ErrorReply {
                    message: format!("no congestion data yet for {road_id}"),
                };
            };
            let trend = snapshot
                .windows
                .get(&road_id)
                .and_then(|w| trend_last_5min(w).ok())
                .map(|t| t.label)
                .unwrap_or(TrendLabel::Steady);
            let status = classify_status(latest.percent.clamp(0.0, 100.0)).expect("clamped");
            Response::TrafficReply { percent: latest.percent, trend, status }
        }
    }
}

/// Truncate to `limit` characters, marking the cut with an ellipsis.
fn truncate_chars(s: &str, limit: usize) -> String {
    if s.chars().count() <= limit {
        return s.to_string();
    }
    let keep: String = s.chars().take(limit.saturating_sub(1)).collect();
    format!("{keep}\u{2026}")
}

/// Render a reply as SMS text (<= 160 chars). Variable fields are
/// truncated with an ellipsis when needed; `Overflow` only fires if the
/// fixed parts alone cannot fit.
pub fn format_response(response: &Response) -> Result<String, GatewayError> {
    let formatted = match response {
        Response::BusReply { bus_no, stop_name, distance_m, eta_s, approx_source } => {
            let suffix = if *approx_source { " | SRC approx" } else { "" };
            let fixed = format!(
                "BUS {bus_no} | STOP  | DIST {:.0}m | ETA {:.0}s{suffix}",
                distance_m.max(0.0),
                eta_s.max(0.0)
            );
            let budget = SMS_MAX_CHARS
                .checked_sub(fixed.chars().count())
                .ok_or(GatewayError::Overflow)?;
            format!(
                "BUS {bus_no} | STOP {} | DIST {:.0}m | ETA {:.0}s{suffix}",
                truncate_chars(stop_name, budget),
                distance_m.max(0.0),
                eta_s.max(0.0)
            )
        }
        Response::TrafficReply { percent, trend, status } => {
            format!("CONGESTION {percent:.1}% | TREND {trend} | STATUS {status}")
        }
        Response::ErrorReply { message } => {
            let fixed = format!("ERR  | {USAGE}");
            let budget = SMS_MAX_CHARS
                .checked_sub(fixed.chars().count())
                .ok_or(GatewayError::Overflow)?;
            format!("ERR {} | {USAGE}", truncate_chars(message, budget))
        }
    };
    if formatted.chars().count() > SMS_MAX_CHARS {
        return Err(GatewayError::Overflow);
    }
    Ok(formatted)
}

/// Full parse -> handle -> format path for one SMS body. Malformed bodies
/// become error replies rather than errors.
pub fn answer_body(body: &str, snapshot: &Snapshot, device_location: Option<GeoPoint>) -> String {
    let response = match parse_query(body) {
        Ok(query) => handle_query(&query, snapshot, device_location),
        Err(GatewayError::BadFormat(reason)) => Response::ErrorReply { message: reason },
        Err(other) => Response::ErrorReply { message: other.to_string() },
    };
    format_response(&response).unwrap_or_else(|_| format!("ERR reply too long | {USAGE}"))
}

/// One line of the wire protocol: `FROM <number> TEXT <body>` in,
/// `TO <number> TEXT <reply>` out.
pub fn handle_protocol_line(
    line: &str,
    snapshot: &Snapshot,
    device_location: Option<GeoPoint>,
) -> String {
    let parsed = (|| {
        let rest = line.trim().strip_prefix("FROM ")?;
        let (number, rest) = rest.split_once(' ')?;
        let body = rest.strip_prefix("TEXT ")?;
        Some((number.to_string(), body.to_string()))
    })();
    match parsed {
        Some((number, body)) => {
            format!("TO {number} TEXT {}", answer_body(&body, snapshot, device_location))
        }
        None => {
            let reply = format_response(&Response::ErrorReply {
                message: "malformed envelope, expected FROM <number> TEXT <body>".into(),
            })
            .expect("static error reply fits");
            format!("TO UNKNOWN TEXT {reply}")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Account {
    pub username: String,
    pub salt: [u8; 16],
    pub digest: [u8; 32],
    pub created_at: u64,
}

fn digest_password(salt: &[u8; 16], password: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(password.as_bytes());
    hasher.finalize().into()
}

fn constant_time_eq(a: &[u8; 32], b: &[u8; 32]) -> bool {
    let mut diff = 0u8;
    for (x, y) in a.iter().zip(b.iter()) {
        diff |= x ^ y;
    }
    diff == 0
}

/// Registered users with salted password digests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccountStore {
    accounts: BTreeMap<String, Account>,
}

impl AccountStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        username: &str,
        password: &str,
        now: u64,
    ) -> Result<&Account, GatewayError> {
        if username.trim().is_empty() || password.is_empty() {
            return Err(GatewayError::EmptyCredentials);
        }
        if self.accounts.contains_key(username) {
            return Err(GatewayError::DuplicateUsername(username.to_string()));
        }
        let salt: [u8; 16] = rand::random();
        let account = Account {
            username: username.to_string(),
            salt,
            digest: digest_password(&salt, password),
            created_at: now,
        };
        Ok(self.accounts.entry(username.to_string()).or_insert(account))
    }

    pub fn authenticate(&self, username: &str, password: &str) -> Result<(), GatewayError> {
        let Some(account) = self.accounts.get(username) else {
            return Err(GatewayError::AuthFailed);
        };
        let candidate = digest_password(&account.salt, password);
        if constant_time_eq(&candidate, &account.digest) {
            Ok(())
        } else {
            Err(GatewayError::AuthFailed)
        }
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn insert_raw(&mut self, account: Account) -> Result<(), GatewayError> {
        if self.accounts.contains_key(&account.username) {
            return Err(GatewayError::DuplicateUsername(account.username));
        }
        self.accounts.insert(account.username.clone(), account);
        Ok(())
    }
}
