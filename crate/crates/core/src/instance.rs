//! Instance document schema, unit conversion and validation.
//!
//! The on-disk document is JSON with the top-level sections `units`,
//! `network`, `crews`, `cyber`, `uncertainty`, `horizon` and `costs`.
//! Unknown fields are rejected. After loading, every quantity is held in
//! canonical units: kW, kvar, minutes, volts and meters.

use std::collections::{BTreeMap, HashMap};

use serde::Deserialize;

use crate::cells::{reduce_network, NodeCellGraph};
use crate::cyber::derive_cyber_links;
use crate::error::InstanceError;
use crate::travel::{euclidean, travel_minutes};

// ---------------------------------------------------------------------------
// Raw document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    #[serde(default)]
    pub units: Units,
    pub network: NetworkDoc,
    pub crews: CrewsDoc,
    #[serde(default)]
    pub cyber: CyberDoc,
    #[serde(default)]
    pub uncertainty: UncertaintyDoc,
    pub horizon: HorizonDoc,
    #[serde(default)]
    pub costs: CostsDoc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default = "Units::default_power")]
    pub power: String,
    #[serde(default = "Units::default_time")]
    pub time: String,
    #[serde(default = "Units::default_length")]
    pub length: String,
    #[serde(default = "Units::default_voltage")]
    pub voltage: String,
}

impl Units {
    fn default_power() -> String {
        "kW".into()
    }
    fn default_time() -> String {
        "min".into()
    }
    fn default_length() -> String {
        "m".into()
    }
    fn default_voltage() -> String {
        "V".into()
    }
}

impl Default for Units {
    fn default() -> Self {
        Units {
            power: Self::default_power(),
            time: Self::default_time(),
            length: Self::default_length(),
            voltage: Self::default_voltage(),
        }
    }
}

/// A scalar or a per-slot series.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Series(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub nominal_voltage: f64,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default = "default_power_factor")]
    pub power_factor: f64,
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub lines: Vec<LineDoc>,
    #[serde(default)]
    pub sources: Vec<SourceDoc>,
    #[serde(default)]
    pub initially_energized: Vec<String>,
}

fn default_power_factor() -> f64 {
    0.95
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub x: f64,
    pub y: f64,
    #[serde(default = "zero_profile")]
    pub load: Profile,
    #[serde(default)]
    pub critical: bool,
    pub penalty: Option<f64>,
    pub power_factor: Option<f64>,
}

fn zero_profile() -> Profile {
    Profile::Constant(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SwitchKind {
    #[serde(rename = "MS")]
    Manual,
    #[serde(rename = "RCS")]
    Remote,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub r: f64,
    pub x: f64,
    pub p_max: f64,
    pub q_max: f64,
    pub switch: Option<SwitchKind>,
    #[serde(default)]
    pub damaged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Substation,
    Gt,
    Res,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDoc {
    pub id: String,
    pub kind: SourceKind,
    pub node: String,
    pub p_max: Profile,
    pub q_max: Profile,
    #[serde(default)]
    pub ramp_up: Option<f64>,
    #[serde(default)]
    pub ramp_down: Option<f64>,
    #[serde(default = "one")]
    pub reserve_factor: f64,
    #[serde(default)]
    pub frr: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrewsDoc {
    pub speed_kmh: f64,
    #[serde(default)]
    pub repair: Vec<RepairCrewDoc>,
    #[serde(default)]
    pub operating: Vec<OperatingCrewDoc>,
    #[serde(default)]
    pub remote_minutes: BTreeMap<String, f64>,
    #[serde(default = "yes")]
    pub clustering: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepairCrewDoc {
    pub id: String,
    pub depot: [f64; 2],
    pub repair_minutes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingCrewDoc {
    pub id: String,
    pub depot: [f64; 2],
    pub operate_minutes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouterRole {
    ControlCentre,
    RcsFtu,
    Gt,
    Res,
    Substation,
    Relay,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterDoc {
    pub id: String,
    pub role: RouterRole,
    pub x: f64,
    pub y: f64,
    pub node: Option<String>,
    pub switch: Option<String>,
    #[serde(default = "default_router_power")]
    pub power: f64,
    #[serde(default)]
    pub ups: f64,
}

fn default_router_power() -> f64 {
    0.075
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyberDoc {
    #[serde(default)]
    pub radius: f64,
    #[serde(default = "default_hops")]
    pub hop_limit: usize,
    #[serde(default)]
    pub routers: Vec<RouterDoc>,
    /// Explicit link sequences per router, overriding geometric derivation.
    pub links: Option<BTreeMap<String, Vec<Vec<String>>>>,
}

fn default_hops() -> usize {
    4
}

impl Default for CyberDoc {
    fn default() -> Self {
        CyberDoc { radius: 0.0, hop_limit: default_hops(), routers: Vec::new(), links: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyDoc {
    #[serde(default = "default_bits")]
    pub bits: u32,
    #[serde(default)]
    pub res: Vec<ResUncertaintyDoc>,
}

fn default_bits() -> u32 {
    6
}

impl Default for UncertaintyDoc {
    fn default() -> Self {
        UncertaintyDoc { bits: default_bits(), res: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResUncertaintyDoc {
    pub source: String,
    pub forecast: Profile,
    pub max_error: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonDoc {
    pub slot_length: f64,
    pub slots: usize,
    pub t_max: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsDoc {
    #[serde(default = "default_critical")]
    pub critical_penalty: f64,
    #[serde(default = "default_normal")]
    pub normal_penalty: f64,
}

fn default_critical() -> f64 {
    1000.0
}
fn default_normal() -> f64 {
    14.0
}

impl Default for CostsDoc {
    fn default() -> Self {
        CostsDoc { critical_penalty: default_critical(), normal_penalty: default_normal() }
    }
}

// ---------------------------------------------------------------------------
// Validated instance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub pos: [f64; 2],
    /// Maximum active load per slot (kW).
    pub load: Vec<f64>,
    pub critical: bool,
    /// $/kWh
    pub penalty: f64,
    pub power_factor: f64,
}

impl Node {
    /// Reactive-to-active ratio implied by the power factor.
    pub fn q_ratio(&self) -> f64 {
        let pf = self.power_factor;
        (1.0 - pf * pf).sqrt() / pf
    }
}

#[derive(Debug, Clone)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub p_max: f64,
    pub q_max: f64,
    pub switch: Option<SwitchKind>,
    pub damaged: bool,
}

#[derive(Debug, Clone)]
pub struct Source {
    pub id: String,
    pub kind: SourceKind,
    pub node: usize,
    /// Active capacity per slot (kW). For RES this is the rated capacity.
    pub p_max: Vec<f64>,
    pub q_max: Vec<f64>,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub reserve_factor: f64,
    pub frr: f64,
}

impl Source {
    /// Nameplate rating used by the frequency-response budget.
    pub fn rated(&self) -> f64 {
        self.p_max.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PhysicalNetwork {
    pub nodes: Vec<Node>,
    pub lines: Vec<Line>,
    pub sources: Vec<Source>,
    pub nominal_voltage: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub initially_energized: Vec<usize>,
}

impl PhysicalNetwork {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// Midpoint of a line, used as the task site of faults and switches.
    pub fn line_site(&self, line: usize) -> [f64; 2] {
        let l = &self.lines[line];
        let a = self.nodes[l.from].pos;
        let b = self.nodes[l.to].pos;
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
    }

    pub fn total_peak_load(&self) -> f64 {
        self.nodes.iter().map(|n| n.load.iter().copied().fold(0.0, f64::max)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RepairCrew {
    pub id: String,
    pub depot: [f64; 2],
    /// Repair duration per fault, indexed like `Instance::faults`.
    pub repair_minutes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OperatingCrew {
    pub id: String,
    pub depot: [f64; 2],
    /// Manual operation duration per switch task, indexed like `Instance::switches`.
    pub operate_minutes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CrewSpec {
    pub speed_kmh: f64,
    pub repair: Vec<RepairCrew>,
    pub operating: Vec<OperatingCrew>,
    /// Remote operation duration per switch task (meaningful for RCS only).
    pub remote_minutes: Vec<f64>,
    pub clustering: bool,
}

#[derive(Debug, Clone)]
pub struct Router {
    pub id: String,
    pub role: RouterRole,
    pub pos: [f64; 2],
    pub node: Option<usize>,
    /// Switch task index controlled by this router.
    pub switch: Option<usize>,
    /// Rated consumption (kW).
    pub power: f64,
    /// UPS duration (min).
    pub ups: f64,
}

#[derive(Debug, Clone)]
pub struct CyberNetwork {
    pub routers: Vec<Router>,
    pub centre: usize,
    pub radius: f64,
    pub hop_limit: usize,
    /// Per router: candidate link sequences, each starting at the router and
    /// ending at the control centre.
    pub links: Vec<Vec<Vec<usize>>>,
}

impl CyberNetwork {
    /// Router controlling a switch task, if any.
    pub fn controller_of(&self, switch: usize) -> Option<usize> {
        self.routers.iter().position(|r| r.switch == Some(switch))
    }
}

#[derive(Debug, Clone)]
pub struct ResUncertainty {
    /// Index into `PhysicalNetwork::sources`.
    pub source: usize,
    /// Forecast output per slot (kW).
    pub forecast: Vec<f64>,
    pub max_error: f64,
    pub budget: f64,
}

#[derive(Debug, Clone)]
pub struct UncertaintySpec {
    pub bits: u32,
    pub res: Vec<ResUncertainty>,
}

#[derive(Debug, Clone)]
pub struct Horizon {
    pub slot_length: f64,
    pub slots: usize,
    pub t_max: f64,
    pub epsilon: f64,
}

impl Horizon {
    /// Slot length in hours.
    pub fn slot_hours(&self) -> f64 {
        self.slot_length / 60.0
    }

    /// Start of slot `t` (1-based) in minutes.
    pub fn slot_start(&self, t: usize) -> f64 {
        (t as f64 - 1.0) * self.slot_length
    }

    /// Whether an event completing at `minutes` is in effect during slot `t`.
    pub fn in_effect(&self, minutes: f64, t: usize) -> bool {
        self.slot_start(t) >= minutes - self.epsilon
    }

    /// Whether a UPS rated for `ups` minutes still powers its router in slot `t`.
    pub fn ups_alive(&self, ups: f64, t: usize) -> bool {
        t as f64 * self.slot_length <= ups + self.epsilon
    }

    /// First slot in which an event completing at `minutes` is in effect.
    pub fn first_slot(&self, minutes: f64) -> Option<usize> {
        (1..=self.slots).find(|&t| self.in_effect(minutes, t))
    }
}

/// Named big-M values, one per constraint family.
#[derive(Debug, Clone)]
pub struct BigM {
    /// Upper bound for every time variable (min).
    pub time: f64,
    /// Routing-time M for arrival chains and selectors.
    pub routing: f64,
    /// Commodity-flow M for radiality.
    pub commodity: f64,
    /// Power-dependency M.
    pub power: f64,
    /// RES availability M.
    pub res: f64,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub network: PhysicalNetwork,
    pub crews: CrewSpec,
    pub cyber: CyberNetwork,
    pub uncertainty: UncertaintySpec,
    pub horizon: Horizon,
    pub cells: NodeCellGraph,
    /// Damaged lines (line indices), the fault set.
    pub faults: Vec<usize>,
    /// Switchable lines (line indices), the operating-crew task set.
    pub switches: Vec<usize>,
    pub big_m: BigM,
    pub warnings: Vec<String>,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Instance, InstanceError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| InstanceError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Instance::from_document(doc)
    }

    pub fn from_document(doc: Document) -> Result<Instance, InstanceError> {
        build(doc)
    }

    pub fn slots(&self) -> usize {
        self.horizon.slots
    }

    pub fn fault_site(&self, fault: usize) -> [f64; 2] {
        self.network.line_site(self.faults[fault])
    }

    pub fn switch_site(&self, switch: usize) -> [f64; 2] {
        self.network.line_site(self.switches[switch])
    }

    pub fn switch_kind(&self, switch: usize) -> SwitchKind {
        self.network.lines[self.switches[switch]].switch.expect("switch task on switchable line")
    }

    pub fn is_remote(&self, switch: usize) -> bool {
        self.switch_kind(switch) == SwitchKind::Remote
    }

    pub fn manual_count(&self) -> usize {
        (0..self.switches.len()).filter(|&q| !self.is_remote(q)).count()
    }

    pub fn remote_count(&self) -> usize {
        (0..self.switches.len()).filter(|&q| self.is_remote(q)).count()
    }

    /// Travel minutes from repair crew depot to fault.
    pub fn rc_depot_travel(&self, rc: usize, fault: usize) -> f64 {
        travel_minutes(self.crews.repair[rc].depot, self.fault_site(fault), self.crews.speed_kmh)
    }

    pub fn rc_travel(&self, a: usize, b: usize) -> f64 {
        travel_minutes(self.fault_site(a), self.fault_site(b), self.crews.speed_kmh)
    }

    pub fn oc_depot_travel(&self, oc: usize, switch: usize) -> f64 {
        travel_minutes(self.crews.operating[oc].depot, self.switch_site(switch), self.crews.speed_kmh)
    }

    pub fn oc_travel(&self, p: usize, q: usize) -> f64 {
        travel_minutes(self.switch_site(p), self.switch_site(q), self.crews.speed_kmh)
    }

    /// Faults whose clearing gates the given cell (fault indices).
    pub fn cell_faults(&self, cell: usize) -> &[usize] {
        &self.cells.cells[cell].faults
    }

    /// Uncertainty entry for a source index, if it is an RES.
    pub fn res_entry(&self, source: usize) -> Option<&ResUncertainty> {
        self.uncertainty.res.iter().find(|r| r.source == source)
    }
}

struct Scales {
    power: f64,
    time: f64,
    length: f64,
    voltage: f64,
}

fn scales(units: &Units) -> Result<Scales, InstanceError> {
    let power = match units.power.as_str() {
        "kW" => 1.0,
        "MW" => 1000.0,
        "W" => 1e-3,
        other => return Err(InstanceError::invalid("units.power", format!("unknown unit `{other}`"))),
    };
    let time = match units.time.as_str() {
        "min" => 1.0,
        "h" => 60.0,
        "s" => 1.0 / 60.0,
        other => return Err(InstanceError::invalid("units.time", format!("unknown unit `{other}`"))),
    };
    let length = match units.length.as_str() {
        "m" => 1.0,
        "km" => 1000.0,
        other => return Err(InstanceError::invalid("units.length", format!("unknown unit `{other}`"))),
    };
    let voltage = match units.voltage.as_str() {
        "V" => 1.0,
        "kV" => 1000.0,
        other => return Err(InstanceError::invalid("units.voltage", format!("unknown unit `{other}`"))),
    };
    Ok(Scales { power, time, length, voltage })
}

fn expand(profile: &Profile, slots: usize, scale: f64, path: &str) -> Result<Vec<f64>, InstanceError> {
    let values = match profile {
        Profile::Constant(v) => vec![*v; slots],
        Profile::Series(s) => {
            if s.len() != slots {
                return Err(InstanceError::invalid(
                    path,
                    format!("series has {} entries, horizon has {slots} slots", s.len()),
                ));
            }
            s.clone()
        }
    };
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(InstanceError::invalid(path, format!("value {v} must be finite and non-negative")));
    }
    Ok(values.into_iter().map(|v| v * scale).collect())
}

fn non_negative(value: f64, path: &str) -> Result<f64, InstanceError> {
    if !value.is_finite() || value < 0.0 {
        return Err(InstanceError::invalid(path, format!("value {value} must be finite and non-negative")));
    }
    Ok(value)
}

fn positive(value: f64, path: &str) -> Result<f64, InstanceError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(InstanceError::invalid(path, format!("value {value} must be positive")));
    }
    Ok(value)
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>, section: &str) -> Result<HashMap<String, usize>, InstanceError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            return Err(InstanceError::DuplicateId { path: format!("{section}[{i}].id"), id: id.to_string() });
        }
    }
    Ok(map)
}

fn build(doc: Document) -> Result<Instance, InstanceError> {
    let sc = scales(&doc.units)?;
    let mut warnings = Vec::new();

    // Horizon
    let slot_length = positive(doc.horizon.slot_length * sc.time, "horizon.slot_length")?;
    let slots = doc.horizon.slots;
    if slots == 0 {
        return Err(InstanceError::invalid("horizon.slots", "at least one slot is required"));
    }
    let epsilon = match doc.horizon.epsilon {
        Some(e) => {
            let e = positive(e * sc.time, "horizon.epsilon")?;
            if e >= slot_length {
                return Err(InstanceError::invalid("horizon.epsilon", "epsilon must be smaller than the slot length"));
            }
            e
        }
        None => slot_length * 1e-3,
    };

    // Nodes
    let net = &doc.network;
    let node_ids = unique_ids(net.nodes.iter().map(|n| n.id.as_str()), "network.nodes")?;
    let pf_default = net.power_factor;
    if !(pf_default > 0.0 && pf_default <= 1.0) {
        return Err(InstanceError::invalid("network.power_factor", "power factor must lie in (0, 1]"));
    }
    let mut nodes = Vec::with_capacity(net.nodes.len());
    for (i, n) in net.nodes.iter().enumerate() {
        let path = format!("network.nodes[{i}]");
        let load = expand(&n.load, slots, sc.power, &format!("{path}.load"))?;
        let penalty = n.penalty.unwrap_or(if n.critical {
            doc.costs.critical_penalty
        } else {
            doc.costs.normal_penalty
        });
        // penalties are always $/kWh, independent of the power unit
        let penalty = positive(penalty, &format!("{path}.penalty"))?;
        let power_factor = n.power_factor.unwrap_or(pf_default);
        if !(power_factor > 0.0 && power_factor <= 1.0) {
            return Err(InstanceError::invalid(format!("{path}.power_factor"), "power factor must lie in (0, 1]"));
        }
        nodes.push(Node {
            id: n.id.clone(),
            pos: [n.x * sc.length, n.y * sc.length],
            load,
            critical: n.critical,
            penalty,
            power_factor,
        });
    }

    // Lines
    let line_ids = unique_ids(net.lines.iter().map(|l| l.id.as_str()), "network.lines")?;
    let mut lines = Vec::with_capacity(net.lines.len());
    for (i, l) in net.lines.iter().enumerate() {
        let path = format!("network.lines[{i}]");
        let from = *node_ids.get(&l.from).ok_or_else(|| InstanceError::dangling(format!("{path}.from"), &l.from))?;
        let to = *node_ids.get(&l.to).ok_or_else(|| InstanceError::dangling(format!("{path}.to"), &l.to))?;
        if from == to {
            return Err(InstanceError::invalid(path, "line endpoints must differ"));
        }
        lines.push(Line {
            id: l.id.clone(),
            from,
            to,
            r: non_negative(l.r, &format!("{path}.r"))?,
            x: non_negative(l.x, &format!("{path}.x"))?,
            p_max: non_negative(l.p_max * sc.power, &format!("{path}.p_max"))?,
            q_max: non_negative(l.q_max * sc.power, &format!("{path}.q_max"))?,
            switch: l.switch,
            damaged: l.damaged,
        });
    }

    // Sources
    unique_ids(net.sources.iter().map(|s| s.id.as_str()), "network.sources")?;
    let mut sources = Vec::with_capacity(net.sources.len());
    for (i, s) in net.sources.iter().enumerate() {
        let path = format!("network.sources[{i}]");
        let node = *node_ids.get(&s.node).ok_or_else(|| InstanceError::dangling(format!("{path}.node"), &s.node))?;
        let p_max = expand(&s.p_max, slots, sc.power, &format!("{path}.p_max"))?;
        let q_max = expand(&s.q_max, slots, sc.power, &format!("{path}.q_max"))?;
        let big = p_max.iter().copied().fold(0.0, f64::max);
        let ramp_up = non_negative(s.ramp_up.map(|r| r * sc.power).unwrap_or(big), &format!("{path}.ramp_up"))?;
        let ramp_down =
            non_negative(s.ramp_down.map(|r| r * sc.power).unwrap_or(big), &format!("{path}.ramp_down"))?;
        let reserve_factor = positive(s.reserve_factor, &format!("{path}.reserve_factor"))?;
        let frr = non_negative(s.frr, &format!("{path}.frr"))?;
        sources.push(Source { id: s.id.clone(), kind: s.kind, node, p_max, q_max, ramp_up, ramp_down, reserve_factor, frr });
    }

    let v0 = positive(net.nominal_voltage * sc.voltage, "network.nominal_voltage")?;
    let v_min = positive(net.v_min * sc.voltage, "network.v_min")?;
    let v_max = positive(net.v_max * sc.voltage, "network.v_max")?;
    if v_min > v_max {
        return Err(InstanceError::invalid("network.v_min", "v_min exceeds v_max"));
    }
    let mut initially_energized = Vec::new();
    for (i, id) in net.initially_energized.iter().enumerate() {
        let node = *node_ids
            .get(id)
            .ok_or_else(|| InstanceError::dangling(format!("network.initially_energized[{i}]"), id))?;
        initially_energized.push(node);
    }

    let network = PhysicalNetwork { nodes, lines, sources, nominal_voltage: v0, v_min, v_max, initially_energized };

    let faults: Vec<usize> = (0..network.lines.len()).filter(|&l| network.lines[l].damaged).collect();
    let switches: Vec<usize> = (0..network.lines.len()).filter(|&l| network.lines[l].switch.is_some()).collect();
    let fault_of_line: HashMap<usize, usize> = faults.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let switch_of_line: HashMap<usize, usize> = switches.iter().enumerate().map(|(k, &l)| (l, k)).collect();

    let cells = reduce_network(&network, &faults)?;
    for &n in &network.initially_energized {
        let c = cells.cell_of_node[n];
        if !cells.cells[c].faults.is_empty() {
            return Err(InstanceError::invalid(
                "network.initially_energized",
                format!("node `{}` lies in a cell containing faults", network.nodes[n].id),
            ));
        }
    }

    // Crews
    let cd = &doc.crews;
    let speed_kmh = positive(cd.speed_kmh, "crews.speed_kmh")?;
    unique_ids(cd.repair.iter().map(|c| c.id.as_str()).chain(cd.operating.iter().map(|c| c.id.as_str())), "crews")?;
    let mut repair = Vec::new();
    for (i, c) in cd.repair.iter().enumerate() {
        let path = format!("crews.repair[{i}]");
        let mut minutes = vec![f64::NAN; faults.len()];
        for (line_id, &m) in &c.repair_minutes {
            let mpath = format!("{path}.repair_minutes.{line_id}");
            let line = *line_ids.get(line_id).ok_or_else(|| InstanceError::dangling(&mpath, line_id))?;
            let f = *fault_of_line
                .get(&line)
                .ok_or_else(|| InstanceError::invalid(&mpath, "line is not damaged"))?;
            minutes[f] = positive(m * sc.time, &mpath)?;
        }
        if let Some(f) = minutes.iter().position(|m| m.is_nan()) {
            return Err(InstanceError::invalid(
                format!("{path}.repair_minutes"),
                format!("missing duration for fault `{}`", network.lines[faults[f]].id),
            ));
        }
        repair.push(RepairCrew { id: c.id.clone(), depot: [c.depot[0] * sc.length, c.depot[1] * sc.length], repair_minutes: minutes });
    }
    if !faults.is_empty() && repair.is_empty() {
        return Err(InstanceError::invalid("crews.repair", "faults exist but no repair crew is available"));
    }
    let mut operating = Vec::new();
    for (i, c) in cd.operating.iter().enumerate() {
        let path = format!("crews.operating[{i}]");
        let mut minutes = vec![f64::NAN; switches.len()];
        for (line_id, &m) in &c.operate_minutes {
            let mpath = format!("{path}.operate_minutes.{line_id}");
            let line = *line_ids.get(line_id).ok_or_else(|| InstanceError::dangling(&mpath, line_id))?;
            let q = *switch_of_line
                .get(&line)
                .ok_or_else(|| InstanceError::invalid(&mpath, "line carries no switch"))?;
            minutes[q] = positive(m * sc.time, &mpath)?;
        }
        if let Some(q) = minutes.iter().position(|m| m.is_nan()) {
            return Err(InstanceError::invalid(
                format!("{path}.operate_minutes"),
                format!("missing duration for switch `{}`", network.lines[switches[q]].id),
            ));
        }
        operating.push(OperatingCrew {
            id: c.id.clone(),
            depot: [c.depot[0] * sc.length, c.depot[1] * sc.length],
            operate_minutes: minutes,
        });
    }
    let mut remote_minutes = vec![0.0; switches.len()];
    for (line_id, &m) in &cd.remote_minutes {
        let mpath = format!("crews.remote_minutes.{line_id}");
        let line = *line_ids.get(line_id).ok_or_else(|| InstanceError::dangling(&mpath, line_id))?;
        let q = *switch_of_line.get(&line).ok_or_else(|| InstanceError::invalid(&mpath, "line carries no switch"))?;
        if network.lines[line].switch != Some(SwitchKind::Remote) {
            return Err(InstanceError::invalid(&mpath, "remote duration given for a manual switch"));
        }
        remote_minutes[q] = positive(m * sc.time, &mpath)?;
    }
    for (q, &line) in switches.iter().enumerate() {
        if network.lines[line].switch == Some(SwitchKind::Remote) && remote_minutes[q] <= 0.0 {
            return Err(InstanceError::invalid(
                "crews.remote_minutes",
                format!("missing remote duration for switch `{}`", network.lines[line].id),
            ));
        }
    }
    let mut crews = CrewSpec { speed_kmh, repair, operating, remote_minutes, clustering: cd.clustering };

    // Cyber
    let cy = &doc.cyber;
    let router_ids = unique_ids(cy.routers.iter().map(|r| r.id.as_str()), "cyber.routers")?;
    let mut routers = Vec::new();
    for (i, r) in cy.routers.iter().enumerate() {
        let path = format!("cyber.routers[{i}]");
        let node = match &r.node {
            Some(id) => Some(*node_ids.get(id).ok_or_else(|| InstanceError::dangling(format!("{path}.node"), id))?),
            None => None,
        };
        if node.is_none() && r.role != RouterRole::ControlCentre {
            return Err(InstanceError::invalid(format!("{path}.node"), "non-centre routers need a host node"));
        }
        let switch = match &r.switch {
            Some(id) => {
                let line = *line_ids.get(id).ok_or_else(|| InstanceError::dangling(format!("{path}.switch"), id))?;
                if network.lines[line].switch != Some(SwitchKind::Remote) {
                    return Err(InstanceError::invalid(format!("{path}.switch"), "controlled line carries no RCS"));
                }
                Some(switch_of_line[&line])
            }
            None => None,
        };
        if r.role == RouterRole::RcsFtu && switch.is_none() {
            return Err(InstanceError::invalid(format!("{path}.switch"), "an RCS-FTU router must name its switch"));
        }
        routers.push(Router {
            id: r.id.clone(),
            role: r.role,
            pos: [r.x * sc.length, r.y * sc.length],
            node,
            switch,
            power: non_negative(r.power * sc.power, &format!("{path}.power"))?,
            ups: non_negative(r.ups * sc.time, &format!("{path}.ups"))?,
        });
    }
    for q in 0..switches.len() {
        let count = routers.iter().filter(|r| r.switch == Some(q)).count();
        if count > 1 {
            return Err(InstanceError::invalid(
                "cyber.routers",
                format!("switch `{}` has {count} controllers", network.lines[switches[q]].id),
            ));
        }
        if network.lines[switches[q]].switch == Some(SwitchKind::Remote) && count == 0 {
            warnings.push(format!(
                "remote switch `{}` has no controlling router; it can only be operated manually",
                network.lines[switches[q]].id
            ));
        }
    }
    let centres: Vec<usize> =
        (0..routers.len()).filter(|&i| routers[i].role == RouterRole::ControlCentre).collect();
    let centre = match (routers.is_empty(), centres.as_slice()) {
        (true, _) => usize::MAX,
        (false, [c]) => *c,
        (false, []) => return Err(InstanceError::Cyber("control centre missing".into())),
        (false, _) => return Err(InstanceError::Cyber("more than one control centre".into())),
    };
    let radius = non_negative(cy.radius * sc.length, "cyber.radius")?;
    let mut cyber = CyberNetwork { routers, centre, radius, hop_limit: cy.hop_limit.max(1), links: Vec::new() };
    cyber.links = match &cy.links {
        Some(explicit) => explicit_links(&cyber, explicit, &router_ids)?,
        None if cyber.routers.is_empty() => Vec::new(),
        None => derive_cyber_links(&cyber)?,
    };
    for (c, r) in cyber.routers.iter().enumerate() {
        if c != cyber.centre && cyber.links[c].is_empty() {
            warnings.push(format!("router `{}` has no link to the control centre; it is never available", r.id));
        }
    }

    // Uncertainty
    let ud = &doc.uncertainty;
    let mut res = Vec::new();
    let source_ids: HashMap<&str, usize> = network.sources.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    for (i, u) in ud.res.iter().enumerate() {
        let path = format!("uncertainty.res[{i}]");
        let source = *source_ids
            .get(u.source.as_str())
            .ok_or_else(|| InstanceError::dangling(format!("{path}.source"), &u.source))?;
        if network.sources[source].kind != SourceKind::Res {
            return Err(InstanceError::invalid(format!("{path}.source"), "source is not an RES"));
        }
        if res.iter().any(|r: &ResUncertainty| r.source == source) {
            return Err(InstanceError::DuplicateId { path: format!("{path}.source"), id: u.source.clone() });
        }
        if !(0.0..=1.0).contains(&u.max_error) {
            return Err(InstanceError::invalid(format!("{path}.max_error"), "must lie in [0, 1]"));
        }
        let budget = non_negative(u.budget, &format!("{path}.budget"))?;
        if budget > 2.0 * slots as f64 {
            warnings.push(format!("budget of `{}` exceeds 2|T|; the budget is inactive", u.source));
        }
        res.push(ResUncertainty {
            source,
            forecast: expand(&u.forecast, slots, sc.power, &format!("{path}.forecast"))?,
            max_error: u.max_error,
            budget,
        });
    }
    for (i, s) in network.sources.iter().enumerate() {
        if s.kind == SourceKind::Res && !res.iter().any(|r| r.source == i) {
            return Err(InstanceError::invalid(
                "uncertainty.res",
                format!("RES `{}` has no forecast entry", s.id),
            ));
        }
    }
    if ud.bits > 20 {
        return Err(InstanceError::invalid("uncertainty.bits", "at most 20 expansion bits are supported"));
    }
    let uncertainty = UncertaintySpec { bits: ud.bits, res };

    // Slot-boundary separation for single-leg completions.
    let mut horizon = Horizon { slot_length, slots, t_max: 0.0, epsilon };
    nudge_boundaries(&network, &faults, &switches, &mut crews, &horizon, &mut warnings);

    // T^MAX must cover every possible completion time.
    let completion_bound = completion_bound(&network, &faults, &switches, &crews);
    let horizon_end = slots as f64 * slot_length;
    let t_max = match doc.horizon.t_max {
        Some(t) => {
            let t = positive(t * sc.time, "horizon.t_max")?;
            if t < horizon_end {
                return Err(InstanceError::invalid("horizon.t_max", "t_max must cover the scheduling horizon"));
            }
            if t < completion_bound {
                return Err(InstanceError::invalid(
                    "horizon.t_max",
                    format!("t_max {t} is below the worst-case completion time {completion_bound:.1}"),
                ));
            }
            t
        }
        None => horizon_end.max(completion_bound).ceil() + slot_length,
    };
    horizon.t_max = t_max;

    let max_task = crews
        .repair
        .iter()
        .flat_map(|c| c.repair_minutes.iter())
        .chain(crews.operating.iter().flat_map(|c| c.operate_minutes.iter()))
        .chain(crews.remote_minutes.iter())
        .copied()
        .fold(0.0, f64::max);
    let time = t_max + max_task;
    let res_m = uncertainty
        .res
        .iter()
        .flat_map(|r| r.forecast.iter().map(move |p| p * (1.0 + r.max_error)))
        .fold(0.0, f64::max);
    let big_m = BigM {
        time,
        routing: time + max_task + max_travel(&network, &faults, &switches, &crews),
        commodity: cells.cells.len() as f64,
        power: 10.0 * network.total_peak_load(),
        res: res_m,
    };

    Ok(Instance { network, crews, cyber, uncertainty, horizon, cells, faults, switches, big_m, warnings })
}

fn explicit_links(
    cyber: &CyberNetwork,
    explicit: &BTreeMap<String, Vec<Vec<String>>>,
    ids: &HashMap<String, usize>,
) -> Result<Vec<Vec<Vec<usize>>>, InstanceError> {
    let mut links = vec![Vec::new(); cyber.routers.len()];
    for (router, seqs) in explicit {
        let path = format!("cyber.links.{router}");
        let c = *ids.get(router).ok_or_else(|| InstanceError::dangling(&path, router))?;
        for (k, seq) in seqs.iter().enumerate() {
            let kpath = format!("{path}[{k}]");
            let mut resolved = Vec::with_capacity(seq.len());
            for id in seq {
                resolved.push(*ids.get(id).ok_or_else(|| InstanceError::dangling(&kpath, id))?);
            }
            if resolved.first() != Some(&c) || resolved.last() != Some(&cyber.centre) || resolved.len() < 2 {
                return Err(InstanceError::invalid(&kpath, "link must start at the router and end at the control centre"));
            }
            if cyber.radius > 0.0 {
                for w in resolved.windows(2) {
                    if euclidean(cyber.routers[w[0]].pos, cyber.routers[w[1]].pos) > cyber.radius + 1e-9 {
                        return Err(InstanceError::invalid(&kpath, "consecutive routers lie beyond the radius"));
                    }
                }
            }
            links[c].push(resolved);
        }
    }
    Ok(links)
}

fn max_travel(net: &PhysicalNetwork, faults: &[usize], switches: &[usize], crews: &CrewSpec) -> f64 {
    let mut sites: Vec<[f64; 2]> = faults.iter().chain(switches.iter()).map(|&l| net.line_site(l)).collect();
    sites.extend(crews.repair.iter().map(|c| c.depot));
    sites.extend(crews.operating.iter().map(|c| c.depot));
    let mut best: f64 = 0.0;
    for a in &sites {
        for b in &sites {
            best = best.max(travel_minutes(*a, *b, crews.speed_kmh));
        }
    }
    best
}

fn completion_bound(net: &PhysicalNetwork, faults: &[usize], switches: &[usize], crews: &CrewSpec) -> f64 {
    let travel = max_travel(net, faults, switches, crews);
    let repairs: f64 = (0..faults.len())
        .map(|f| crews.repair.iter().map(|c| c.repair_minutes[f]).fold(0.0, f64::max))
        .sum();
    let operations: f64 = (0..switches.len())
        .map(|q| crews.operating.iter().map(|c| c.operate_minutes[q]).fold(0.0, f64::max))
        .sum();
    repairs + operations + (faults.len() + switches.len() + 2) as f64 * travel
}

/// Perturbs durations whose depot-direct completion lands just after a slot
/// boundary, where the epsilon-linearized status rows are ambiguous.
fn nudge_boundaries(
    net: &PhysicalNetwork,
    faults: &[usize],
    switches: &[usize],
    crews: &mut CrewSpec,
    horizon: &Horizon,
    warnings: &mut Vec<String>,
) {
    let eps = horizon.epsilon;
    let ambiguous = |t: f64| {
        let k = (t / horizon.slot_length).floor();
        let off = t - k * horizon.slot_length;
        off > 0.0 && off <= eps
    };
    let speed = crews.speed_kmh;
    for c in crews.repair.iter_mut() {
        for (f, &line) in faults.iter().enumerate() {
            let done = travel_minutes(c.depot, net.line_site(line), speed) + c.repair_minutes[f];
            if ambiguous(done) {
                c.repair_minutes[f] += 2.0 * eps;
                warnings.push(format!(
                    "repair of `{}` by `{}` ends within epsilon of a slot boundary; duration extended by {:.4} min",
                    net.lines[line].id,
                    c.id,
                    2.0 * eps
                ));
            }
        }
    }
    for c in crews.operating.iter_mut() {
        for (q, &line) in switches.iter().enumerate() {
            let done = travel_minutes(c.depot, net.line_site(line), speed) + c.operate_minutes[q];
            if ambiguous(done) {
                c.operate_minutes[q] += 2.0 * eps;
                warnings.push(format!(
                    "operation of `{}` by `{}` ends within epsilon of a slot boundary; duration extended by {:.4} min",
                    net.lines[line].id,
                    c.id,
                    2.0 * eps
                ));
            }
        }
    }
}
