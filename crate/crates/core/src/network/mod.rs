//! Radial network data model.
//!
//! A [`Network`] is an immutable description of a tree: buses carry voltage
//! and injection bounds, lines carry series admittance `g - jb` plus optional
//! angle, thermal-loss and flow limits. Networks are loaded from the JSON
//! feeder format (see [`load_network`]) and validated on construction, so
//! every downstream module can assume a connected tree with consistent bounds.

mod limits;
mod schema;
mod topology;

pub use limits::{angle_interval_from_limits, loss_cap_from_current, AngleInterval, Sinusoid};
pub use schema::{load_network, load_network_from_path, BaseInfo};
pub use topology::{validate_tree, TopologyReport};

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::PI;

use thiserror::Error;

/// Default angle-difference bound applied when a line omits `theta_min`/`theta_max`.
pub const DEFAULT_ANGLE_BOUND: f64 = FRAC_PI_2;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("non-tree topology: {0}")]
    NonTree(String),
    #[error("invariant violated for {item}: {message}")]
    Invariant { item: String, message: String },
    #[error("line {line}: limit `{limit}` excludes a zero angle difference")]
    InfeasibleAtZero { line: String, limit: &'static str },
    #[error("io error")]
    Io(#[from] std::io::Error),
}

/// A bus. Powers and voltages are per-unit; `None` bounds are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// Identifier as it appears in the feeder file.
    pub id: u64,
    pub v_min: f64,
    pub v_max: f64,
    pub v_fixed: Option<f64>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    /// Nominal active demand (positive = withdrawal).
    pub p_load: f64,
    /// Nominal reactive demand (positive = withdrawal).
    pub q_load: f64,
    pub shunt_g: f64,
    pub shunt_b: f64,
}

impl Bus {
    /// A bus with magnitude bounds `[v_min, v_max]` and no other constraints.
    pub fn new(id: u64, v_min: f64, v_max: f64) -> Self {
        Self {
            id,
            v_min,
            v_max,
            v_fixed: None,
            p_min: None,
            p_max: None,
            q_min: None,
            q_max: None,
            p_load: 0.0,
            q_load: 0.0,
            shunt_g: 0.0,
            shunt_b: 0.0,
        }
    }

    /// A bus held at a fixed magnitude `v`.
    pub fn fixed(id: u64, v: f64) -> Self {
        Self {
            v_fixed: Some(v),
            ..Self::new(id, v, v)
        }
    }

    pub fn with_p_bounds(mut self, p_min: Option<f64>, p_max: Option<f64>) -> Self {
        self.p_min = p_min;
        self.p_max = p_max;
        self
    }

    pub fn has_q_bounds(&self) -> bool {
        self.q_min.is_some() || self.q_max.is_some()
    }

    fn check(&self) -> Result<(), NetworkError> {
        let item = format!("bus {}", self.id);
        let fail = |message: String| NetworkError::Invariant {
            item: item.clone(),
            message,
        };
        let finite = [
            self.v_min,
            self.v_max,
            self.p_load,
            self.q_load,
            self.shunt_g,
            self.shunt_b,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite value".into()));
        }
        if self.v_min.is_nan() || self.v_min <= 0.0 {
            return Err(fail(format!("v_min = {} must be > 0", self.v_min)));
        }
        if self.v_min > self.v_max {
            return Err(fail(format!("v_min = {} exceeds v_max = {}", self.v_min, self.v_max)));
        }
        if let Some(v) = self.v_fixed {
            if !(self.v_min <= v && v <= self.v_max) {
                return Err(fail(format!(
                    "v_fixed = {v} outside [v_min, v_max] = [{}, {}]",
                    self.v_min, self.v_max
                )));
            }
        }
        for (lo, hi, what) in [(self.p_min, self.p_max, "p"), (self.q_min, self.q_max, "q")] {
            if lo.is_some_and(|v| !v.is_finite()) || hi.is_some_and(|v| !v.is_finite()) {
                return Err(fail(format!("{what} bound must be finite when present")));
            }
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if lo > hi {
                    return Err(fail(format!("{what}_min = {lo} exceeds {what}_max = {hi}")));
                }
            }
        }
        Ok(())
    }
}

/// A line between two buses, stored with `from < to` (bus indices).
///
/// `theta_*` bound the angle difference `theta_from - theta_to`; the flow caps
/// bound `P_from,to` (`fwd`) and `P_to,from` (`rev`).
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub g: f64,
    pub b: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub loss_max: Option<f64>,
    pub flow_max_fwd: Option<f64>,
    pub flow_max_rev: Option<f64>,
}

impl Line {
    pub fn new(from: usize, to: usize, g: f64, b: f64) -> Self {
        Self {
            from,
            to,
            g,
            b,
            theta_min: -DEFAULT_ANGLE_BOUND,
            theta_max: DEFAULT_ANGLE_BOUND,
            loss_max: None,
            flow_max_fwd: None,
            flow_max_rev: None,
        }
    }

    pub fn with_angles(mut self, theta_min: f64, theta_max: f64) -> Self {
        self.theta_min = theta_min;
        self.theta_max = theta_max;
        self
    }

    /// The same physical line seen from the opposite end.
    pub fn reversed(&self) -> Self {
        Self {
            from: self.to,
            to: self.from,
            g: self.g,
            b: self.b,
            theta_min: -self.theta_max,
            theta_max: -self.theta_min,
            loss_max: self.loss_max,
            flow_max_fwd: self.flow_max_rev,
            flow_max_rev: self.flow_max_fwd,
        }
    }

    /// The bus at the other end, if `bus` is an endpoint.
    pub fn other(&self, bus: usize) -> Option<usize> {
        if bus == self.from {
            Some(self.to)
        } else if bus == self.to {
            Some(self.from)
        } else {
            None
        }
    }

    fn check(&self, label: &str) -> Result<(), NetworkError> {
        let fail = |message: String| NetworkError::Invariant {
            item: format!("line {label}"),
            message,
        };
        if !self.g.is_finite() || !self.b.is_finite() {
            return Err(fail("non-finite admittance".into()));
        }
        if self.g < 0.0 {
            return Err(fail(format!("g = {} violates g >= 0", self.g)));
        }
        if self.b < 0.0 {
            return Err(fail(format!("b = {} violates b >= 0", self.b)));
        }
        if (self.g + self.b).is_nan() || self.g + self.b <= 0.0 {
            return Err(fail("g + b must be > 0".into()));
        }
        if !(-PI..=0.0).contains(&self.theta_min) {
            return Err(fail(format!("theta_min = {} outside [-pi, 0]", self.theta_min)));
        }
        if !(0.0..=PI).contains(&self.theta_max) {
            return Err(fail(format!("theta_max = {} outside [0, pi]", self.theta_max)));
        }
        for (cap, name) in [
            (self.loss_max, "loss_max"),
            (self.flow_max_fwd, "flow_max_fwd"),
            (self.flow_max_rev, "flow_max_rev"),
        ] {
            if cap.is_some_and(|v| !v.is_finite()) {
                return Err(fail(format!("{name} must be finite when present")));
            }
        }
        Ok(())
    }
}

/// A validated radial network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    base: Option<BaseInfo>,
    topology: TopologyReport,
}

impl Network {
    /// Build a network from buses and lines whose endpoints are bus *indices*.
    ///
    /// Buses are reordered by id; line endpoints are remapped accordingly,
    /// oriented so `from < to`, and sorted by `(from, to)`.
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>) -> Result<Self, NetworkError> {
        Self::with_base(buses, lines, None)
    }

    pub fn with_base(mut buses: Vec<Bus>, lines: Vec<Line>, base: Option<BaseInfo>) -> Result<Self, NetworkError> {
        let n = buses.len();
        if n == 0 {
            return Err(NetworkError::NonTree("network has no buses".into()));
        }
        for bus in &buses {
            bus.check()?;
        }
        // Map original positions to id-sorted positions.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| buses[i].id);
        for w in order.windows(2) {
            if buses[w[0]].id == buses[w[1]].id {
                return Err(NetworkError::Invariant {
                    item: format!("bus {}", buses[w[0]].id),
                    message: "duplicate bus id".into(),
                });
            }
        }
        let mut new_index = vec![0; n];
        for (pos, &old) in order.iter().enumerate() {
            new_index[old] = pos;
        }
        let mut sorted = Vec::with_capacity(n);
        for &old in &order {
            sorted.push(buses[old].clone());
        }
        buses = sorted;

        let mut canon = Vec::with_capacity(lines.len());
        for line in lines {
            if line.from >= n || line.to >= n {
                return Err(NetworkError::Invariant {
                    item: format!("line {}-{}", line.from, line.to),
                    message: "endpoint is not a bus".into(),
                });
            }
            let mut line = Line {
                from: new_index[line.from],
                to: new_index[line.to],
                ..line
            };
            let label = format!("{}-{}", buses[line.from].id, buses[line.to].id);
            if line.from == line.to {
                return Err(NetworkError::NonTree(format!(
                    "self-loop at bus {}",
                    buses[line.from].id
                )));
            }
            line.check(&label)?;
            if line.from > line.to {
                line = line.reversed();
            }
            canon.push(line);
        }
        canon.sort_by_key(|l| (l.from, l.to));
        for w in canon.windows(2) {
            if (w[0].from, w[0].to) == (w[1].from, w[1].to) {
                return Err(NetworkError::NonTree(format!(
                    "duplicate line {}-{}",
                    buses[w[0].from].id, buses[w[0].to].id
                )));
            }
        }
        let topology = validate_tree(n, &canon);
        if !topology.is_tree {
            return Err(NetworkError::NonTree(
                topology.problem.clone().unwrap_or_else(|| "not a tree".into()),
            ));
        }
        Ok(Self {
            buses,
            lines: canon,
            base,
            topology,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn bus(&self, index: usize) -> &Bus {
        &self.buses[index]
    }

    pub fn line(&self, index: usize) -> &Line {
        &self.lines[index]
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn base(&self) -> Option<&BaseInfo> {
        self.base.as_ref()
    }

    pub fn topology(&self) -> &TopologyReport {
        &self.topology
    }

    /// Index of the bus with file id `id`.
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.buses.binary_search_by_key(&id, |b| b.id).ok()
    }

    /// Indices of lines incident to `bus`.
    pub fn incident_lines(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.lines
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.from == bus || l.to == bus)
            .map(|(e, _)| e)
    }

    /// Fixed magnitudes for every bus, if all buses carry `v_fixed`.
    pub fn fixed_magnitudes(&self) -> Option<Vec<f64>> {
        self.buses.iter().map(|b| b.v_fixed).collect()
    }

    /// Human-readable label `from_id-to_id` for a line.
    pub fn line_label(&self, e: usize) -> String {
        let l = &self.lines[e];
        format!("{}-{}", self.buses[l.from].id, self.buses[l.to].id)
    }

    /// A copy with bus `index` replaced, re-validated.
    pub fn with_bus(&self, index: usize, bus: Bus) -> Result<Self, NetworkError> {
        let mut buses = self.buses.clone();
        buses[index] = bus;
        let lines = self.lines.clone();
        Self::with_base(buses, lines, self.base.clone())
    }

    /// A copy with line `index` replaced, re-validated.
    pub fn with_line(&self, index: usize, line: Line) -> Result<Self, NetworkError> {
        let mut lines = self.lines.clone();
        lines[index] = line;
        Self::with_base(self.buses.clone(), lines, self.base.clone())
    }

    /// Effective angle interval of every line at the given magnitudes.
    pub fn angle_intervals(&self, magnitudes: &[f64]) -> Result<Vec<AngleInterval>, NetworkError> {
        self.lines
            .iter()
            .enumerate()
            .map(|(e, l)| {
                angle_interval_from_limits(l, magnitudes[l.from], magnitudes[l.to])
                    .map_err(|err| relabel(err, self.line_label(e)))
            })
            .collect()
    }
}

fn relabel(err: NetworkError, label: String) -> NetworkError {
    match err {
        NetworkError::InfeasibleAtZero { limit, .. } => NetworkError::InfeasibleAtZero { line: label, limit },
        other => other,
    }
}
