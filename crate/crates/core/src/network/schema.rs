//! JSON feeder format.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bus, Line, Network, NetworkError, DEFAULT_ANGLE_BOUND};

/// Optional system base metadata carried through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseInfo {
    pub mva: f64,
    pub kv: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: u64,
    v_min: f64,
    v_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_fixed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_max: Option<f64>,
    #[serde(default)]
    p_load: f64,
    #[serde(default)]
    q_load: f64,
    #[serde(default)]
    shunt_g: f64,
    #[serde(default)]
    shunt_b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    from: u64,
    to: u64,
    g: f64,
    b: f64,
    #[serde(default = "neg_default_bound")]
    theta_min: f64,
    #[serde(default = "default_bound")]
    theta_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flow_max_fwd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flow_max_rev: Option<f64>,
}

fn default_bound() -> f64 {
    DEFAULT_ANGLE_BOUND
}

fn neg_default_bound() -> f64 {
    -DEFAULT_ANGLE_BOUND
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<BaseInfo>,
    buses: Vec<BusRecord>,
    lines: Vec<LineRecord>,
}

/// Parse and validate a feeder from a UTF-8 JSON byte stream.
pub fn load_network<R: Read>(source: R) -> Result<Network, NetworkError> {
    let mut de = serde_json::Deserializer::from_reader(source);
    let record: NetworkRecord = serde_path_to_error::deserialize(&mut de).map_err(|err| NetworkError::Schema {
        path: err.path().to_string(),
        message: err.inner().to_string(),
    })?;
    de.end().map_err(|err| NetworkError::Schema {
        path: ".".into(),
        message: err.to_string(),
    })?;
    from_record(record)
}

pub fn load_network_from_path(path: impl AsRef<Path>) -> Result<Network, NetworkError> {
    let file = std::fs::File::open(path)?;
    load_network(std::io::BufReader::new(file))
}

fn from_record(record: NetworkRecord) -> Result<Network, NetworkError> {
    let mut position = HashMap::with_capacity(record.buses.len());
    for (pos, bus) in record.buses.iter().enumerate() {
        if position.insert(bus.id, pos).is_some() {
            return Err(NetworkError::Invariant {
                item: format!("bus {}", bus.id),
                message: "duplicate bus id".into(),
            });
        }
    }
    let lookup = |id: u64, pos: usize, end: &str| {
        position.get(&id).copied().ok_or_else(|| NetworkError::Schema {
            path: format!("lines[{pos}].{end}"),
            message: format!("unknown bus id {id}"),
        })
    };
    let mut lines = Vec::with_capacity(record.lines.len());
    for (pos, l) in record.lines.iter().enumerate() {
        lines.push(Line {
            from: lookup(l.from, pos, "from")?,
            to: lookup(l.to, pos, "to")?,
            g: l.g,
            b: l.b,
            theta_min: l.theta_min,
            theta_max: l.theta_max,
            loss_max: l.loss_max,
            flow_max_fwd: l.flow_max_fwd,
            flow_max_rev: l.flow_max_rev,
        });
    }
    let buses = record
        .buses
        .into_iter()
        .map(|b| Bus {
            id: b.id,
            v_min: b.v_min,
            v_max: b.v_max,
            v_fixed: b.v_fixed,
            p_min: b.p_min,
            p_max: b.p_max,
            q_min: b.q_min,
            q_max: b.q_max,
            p_load: b.p_load,
            q_load: b.q_load,
            shunt_g: b.shunt_g,
            shunt_b: b.shunt_b,
        })
        .collect();
    Network::with_base(buses, lines, record.base)
}

impl Network {
    fn to_record(&self) -> NetworkRecord {
        NetworkRecord {
            base: self.base.clone(),
            buses: self
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id,
                    v_min: b.v_min,
                    v_max: b.v_max,
                    v_fixed: b.v_fixed,
                    p_min: b.p_min,
                    p_max: b.p_max,
                    q_min: b.q_min,
                    q_max: b.q_max,
                    p_load: b.p_load,
                    q_load: b.q_load,
                    shunt_g: b.shunt_g,
                    shunt_b: b.shunt_b,
                })
                .collect(),
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    from: self.buses[l.from].id,
                    to: self.buses[l.to].id,
                    g: l.g,
                    b: l.b,
                    theta_min: l.theta_min,
                    theta_max: l.theta_max,
                    loss_max: l.loss_max,
                    flow_max_fwd: l.flow_max_fwd,
                    flow_max_rev: l.flow_max_rev,
                })
                .collect(),
        }
    }

    /// Serialize to the feeder JSON format. Reloading the output yields an
    /// identical network.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("network records always serialize")
    }
}
