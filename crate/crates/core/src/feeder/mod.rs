//! Three-phase feeder description: buses, branches, spot loads, generators
//! and operating limits, plus the nodal admittance assembly.
//!
//! Feeders are read from a JSON document (see [`FeederDocument`]). Every
//! electrical quantity in the document is in physical units; the solver works
//! internally on a 1 MVA three-phase base with each bus' nominal voltage as the
//! voltage base.

mod admittance;
mod phase;

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use admittance::{build_admittance, AdmittanceMatrix, BranchBlocks};
pub use phase::{Phase, PhaseSet};

/// Three-phase apparent power base, kVA.
pub const BASE_KVA_3PH: f64 = 1000.0;
/// Per-phase apparent power base, kVA.
pub const BASE_KVA_PHASE: f64 = BASE_KVA_3PH / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    PQ,
    PV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(rename = "type")]
    pub bus_type: BusType,
    pub phases: PhaseSet,
    /// Nominal line-to-line voltage, kV.
    pub base_kv: f64,
    /// Voltage magnitude setpoint of slack and PV buses, p.u.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0_pu: Option<f64>,
    /// Constant-admittance capacitor rating per present phase at nominal
    /// voltage, kvar (capacitive positive).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shunt_kvar: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connection {
    /// Grounded wye on both windings.
    #[serde(rename = "gry-gry")]
    WyeWye,
    /// Delta primary, grounded wye secondary (secondary lags by 30 degrees).
    #[serde(rename = "delta-gry")]
    DeltaWye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BranchKind {
    Line,
    /// Per-phase off-nominal ratio `tap` (primary : secondary). The series
    /// impedance is referred to the secondary (`to`) side.
    Transformer { tap: Vec<f64>, connection: Connection },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: PhaseSet,
    /// Series phase impedance over the present phases, ohms.
    pub z_ohm: Vec<Vec<Complex64>>,
    /// Total shunt admittance over the present phases, siemens; split
    /// equally between both ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_shunt_s: Option<Vec<Vec<Complex64>>>,
    /// Per-phase current rating, amperes (secondary side for transformers).
    pub ampacity_a: f64,
    pub kind: BranchKind,
}

impl Branch {
    pub fn is_transformer(&self) -> bool {
        matches!(self.kind, BranchKind::Transformer { .. })
    }
}

/// Constant-power spot load on one phase, kW / kvar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: String,
    pub phase: Phase,
    pub p_kw: f64,
    pub q_kvar: f64,
}

/// Generator attached to a bus. On PV buses it regulates the voltage to the
/// bus setpoint within `[q_min_kvar, q_max_kvar]` per phase; elsewhere it is a
/// constant `p_kw + j q_kvar` injection per phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    #[serde(default)]
    pub p_kw: f64,
    #[serde(default)]
    pub q_kvar: f64,
    #[serde(default = "neg_inf", skip_serializing_if = "is_neg_inf")]
    pub q_min_kvar: f64,
    #[serde(default = "pos_inf", skip_serializing_if = "is_pos_inf")]
    pub q_max_kvar: f64,
    /// Constant per-phase variation along the loading direction, kW.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub delta_p_kw: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub delta_q_kvar: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}
fn pos_inf() -> f64 {
    f64::INFINITY
}
fn is_neg_inf(x: &f64) -> bool {
    *x == f64::NEG_INFINITY
}
fn is_pos_inf(x: &f64) -> bool {
    *x == f64::INFINITY
}
fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingLimits {
    pub v_min_pu: f64,
    pub v_max_pu: f64,
}

/// The on-disk feeder document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederDocument {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    pub limits: OperatingLimits,
}

/// One (bus, phase) electrical node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub bus: usize,
    pub phase: Phase,
}

/// Scheduled nodal injections at the base operating point (generation minus
/// load), kW / kvar, plus the constant per-node variation of other DG.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseInjections {
    pub p_kw: Vec<f64>,
    pub q_kvar: Vec<f64>,
    pub delta_gen_p_kw: Vec<f64>,
    pub delta_gen_q_kvar: Vec<f64>,
}

/// Reactive capability of one regulated phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLimits {
    pub min_kvar: f64,
    pub max_kvar: f64,
}

/// A validated feeder. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FeederModel {
    doc: FeederDocument,
    bus_lookup: HashMap<String, usize>,
    nodes: Vec<Node>,
    node_lookup: Vec<[Option<usize>; 3]>,
    slack: usize,
}

impl PartialEq for FeederModel {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

/// Parses and validates a feeder document.
pub fn load_feeder(text: &str) -> Result<FeederModel> {
    let doc: FeederDocument = serde_json::from_str(text).map_err(Error::parse)?;
    FeederModel::from_document(doc)
}

impl FeederModel {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        load_feeder(&std::fs::read_to_string(path)?)
    }

    pub fn from_document(doc: FeederDocument) -> Result<Self> {
        let mut bus_lookup = HashMap::new();
        let mut slack = None;
        for (i, bus) in doc.buses.iter().enumerate() {
            if bus_lookup.insert(bus.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id `{}`", bus.id)));
            }
            validate_bus(bus)?;
            if bus.bus_type == BusType::Slack {
                if let Some(prev) = slack.replace(i) {
                    return Err(Error::Topology(format!(
                        "more than one slack bus (`{}` and `{}`)",
                        doc.buses[prev].id, bus.id
                    )));
                }
            }
        }
        let slack = slack.ok_or_else(|| Error::Topology("feeder has no slack bus".into()))?;

        let mut nodes = Vec::new();
        let mut node_lookup = vec![[None; 3]; doc.buses.len()];
        for (b, bus) in doc.buses.iter().enumerate() {
            for p in bus.phases.iter() {
                node_lookup[b][p.index()] = Some(nodes.len());
                nodes.push(Node { bus: b, phase: p });
            }
        }

        let lookup = |id: &str, what: &str| {
            bus_lookup
                .get(id)
                .copied()
                .ok_or_else(|| Error::Validation(format!("{what} references unknown bus `{id}`")))
        };

        let mut branch_ids = HashMap::new();
        for br in &doc.branches {
            if branch_ids.insert(br.id.as_str(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate branch id `{}`", br.id)));
            }
            let f = lookup(&br.from, &format!("branch `{}`", br.id))?;
            let t = lookup(&br.to, &format!("branch `{}`", br.id))?;
            validate_branch(br, &doc.buses[f], &doc.buses[t])?;
        }
        for load in &doc.loads {
            let b = lookup(&load.bus, "load")?;
            if !doc.buses[b].phases.contains(load.phase) {
                return Err(Error::Validation(format!(
                    "load on bus `{}` uses absent phase {}",
                    load.bus, load.phase
                )));
            }
            if !load.p_kw.is_finite() || !load.q_kvar.is_finite() {
                return Err(Error::Validation(format!("load on bus `{}` is not finite", load.bus)));
            }
        }
        for g in &doc.generators {
            let b = lookup(&g.bus, &format!("generator `{}`", g.id))?;
            if g.phases.is_empty() || !g.phases.is_subset(doc.buses[b].phases) {
                return Err(Error::Validation(format!(
                    "generator `{}` phases {} not present on bus `{}`",
                    g.id, g.phases, g.bus
                )));
            }
            if g.q_min_kvar >= g.q_max_kvar {
                return Err(Error::Validation(format!(
                    "generator `{}` requires q_min_kvar < q_max_kvar",
                    g.id
                )));
            }
        }
        for (b, bus) in doc.buses.iter().enumerate() {
            if bus.bus_type == BusType::PV
                && !doc.generators.iter().any(|g| bus_lookup[&g.bus] == b)
            {
                return Err(Error::Validation(format!("PV bus `{}` has no generator", bus.id)));
            }
        }
        let l = doc.limits;
        if !(l.v_min_pu > 0.0 && l.v_min_pu < l.v_max_pu) {
            return Err(Error::Validation(
                "limits require 0 < v_min_pu < v_max_pu".into(),
            ));
        }

        let model = FeederModel {
            doc,
            bus_lookup,
            nodes,
            node_lookup,
            slack,
        };
        model.check_connectivity()?;
        Ok(model)
    }

    /// Every (bus, phase) node must reach the slack through branches carrying
    /// that phase.
    fn check_connectivity(&self) -> Result<()> {
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for br in &self.doc.branches {
            let (f, t) = (self.bus_lookup[&br.from], self.bus_lookup[&br.to]);
            let delta = matches!(
                br.kind,
                BranchKind::Transformer { connection: Connection::DeltaWye, .. }
            );
            for p in br.phases.iter() {
                let nf = self.node_lookup[f][p.index()].unwrap();
                let nt = self.node_lookup[t][p.index()].unwrap();
                adjacency[nf].push(nt);
                adjacency[nt].push(nf);
                if delta {
                    // delta windings couple each secondary phase to two primary phases
                    let q = Phase::ALL[(p.index() + 2) % 3];
                    let nq = self.node_lookup[f][q.index()].unwrap();
                    adjacency[nq].push(nt);
                    adjacency[nt].push(nq);
                }
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue: VecDeque<usize> = self.node_lookup[self.slack].iter().flatten().copied().collect();
        for &n in &queue {
            seen[n] = true;
        }
        while let Some(n) = queue.pop_front() {
            for &m in &adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        if let Some(n) = seen.iter().position(|s| !s) {
            let node = self.nodes[n];
            return Err(Error::Topology(format!(
                "bus `{}` phase {} is islanded from the slack bus",
                self.doc.buses[node.bus].id, node.phase
            )));
        }
        Ok(())
    }

    pub fn document(&self) -> &FeederDocument {
        &self.doc
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn buses(&self) -> &[Bus] {
        &self.doc.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.doc.branches
    }

    pub fn loads(&self) -> &[Load] {
        &self.doc.loads
    }

    pub fn generators(&self) -> &[Generator] {
        &self.doc.generators
    }

    pub fn limits(&self) -> OperatingLimits {
        self.doc.limits
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_lookup.get(id).copied()
    }

    pub fn slack_bus(&self) -> usize {
        self.slack
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Total number of (bus, phase) nodes, the admittance dimension.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, bus: usize, phase: Phase) -> Option<usize> {
        self.node_lookup.get(bus)?[phase.index()]
    }

    pub fn node_by_id(&self, bus: &str, phase: Phase) -> Option<usize> {
        self.node(self.bus_index(bus)?, phase)
    }

    /// Human readable node label, e.g. `611.C`.
    pub fn node_label(&self, node: usize) -> String {
        let n = self.nodes[node];
        format!("{}.{}", self.doc.buses[n.bus].id, n.phase)
    }

    pub fn bus_type_of(&self, node: usize) -> BusType {
        self.doc.buses[self.nodes[node].bus].bus_type
    }

    /// Voltage setpoint of the bus owning `node`, if regulated.
    pub fn setpoint_of(&self, node: usize) -> Option<f64> {
        self.doc.buses[self.nodes[node].bus].v0_pu
    }

    /// Line-to-neutral voltage base of the bus owning `node`, kV.
    pub fn base_kv_ln(&self, bus: usize) -> f64 {
        self.doc.buses[bus].base_kv / 3f64.sqrt()
    }

    /// Impedance base of a bus, ohms.
    pub fn base_ohm(&self, bus: usize) -> f64 {
        let kv = self.doc.buses[bus].base_kv;
        kv * kv * 1000.0 / BASE_KVA_3PH
    }

    /// Per-phase current base of a bus, amperes.
    pub fn base_amp(&self, bus: usize) -> f64 {
        BASE_KVA_PHASE / self.base_kv_ln(bus)
    }

    /// Sum of all spot loads as (MW, Mvar).
    pub fn total_load(&self) -> (f64, f64) {
        let (p, q) = self
            .doc
            .loads
            .iter()
            .fold((0.0, 0.0), |(p, q), l| (p + l.p_kw, q + l.q_kvar));
        (p / 1000.0, q / 1000.0)
    }

    /// Scheduled injections per node at the base operating point.
    pub fn base_injections(&self) -> BaseInjections {
        let n = self.nodes.len();
        let mut inj = BaseInjections {
            p_kw: vec![0.0; n],
            q_kvar: vec![0.0; n],
            delta_gen_p_kw: vec![0.0; n],
            delta_gen_q_kvar: vec![0.0; n],
        };
        for load in &self.doc.loads {
            let node = self.node_by_id(&load.bus, load.phase).unwrap();
            inj.p_kw[node] -= load.p_kw;
            inj.q_kvar[node] -= load.q_kvar;
        }
        for g in &self.doc.generators {
            let bus = self.bus_lookup[&g.bus];
            let regulated = self.doc.buses[bus].bus_type != BusType::PQ;
            for p in g.phases.iter() {
                let node = self.node(bus, p).unwrap();
                inj.p_kw[node] += g.p_kw;
                if !regulated {
                    inj.q_kvar[node] += g.q_kvar;
                }
                inj.delta_gen_p_kw[node] += g.delta_p_kw;
                inj.delta_gen_q_kvar[node] += g.delta_q_kvar;
            }
        }
        inj
    }

    /// Reactive limits per node for the phases of PV buses; summed over the
    /// generators sharing a node.
    pub fn q_limits(&self) -> Vec<Option<QLimits>> {
        let mut out: Vec<Option<QLimits>> = vec![None; self.nodes.len()];
        for g in &self.doc.generators {
            let bus = self.bus_lookup[&g.bus];
            if self.doc.buses[bus].bus_type != BusType::PV {
                continue;
            }
            for p in g.phases.iter() {
                let node = self.node(bus, p).unwrap();
                let lim = out[node].get_or_insert(QLimits {
                    min_kvar: 0.0,
                    max_kvar: 0.0,
                });
                lim.min_kvar += g.q_min_kvar;
                lim.max_kvar += g.q_max_kvar;
            }
        }
        out
    }

    /// Flat-start angle per node: the phase reference rotated by the
    /// cumulative shift of delta-wye transformers between the slack and the
    /// node.
    pub fn reference_angles(&self) -> Vec<f64> {
        self.flat_profile().0
    }

    /// Flat-start magnitude per node: the slack setpoint scaled by the
    /// off-nominal ratios of transformers between the slack and the node.
    pub fn reference_magnitudes(&self) -> Vec<f64> {
        self.flat_profile().1
    }

    fn flat_profile(&self) -> (Vec<f64>, Vec<f64>) {
        let nb = self.doc.buses.len();
        let mut shift = vec![None; nb];
        let mut ratio = vec![[1.0f64; 3]; nb];
        shift[self.slack] = Some(0.0);
        ratio[self.slack] = [self.doc.buses[self.slack].v0_pu.unwrap_or(1.0); 3];
        let mut queue = VecDeque::from([self.slack]);
        while let Some(b) = queue.pop_front() {
            let base = shift[b].unwrap();
            for br in &self.doc.branches {
                let (f, t) = (self.bus_lookup[&br.from], self.bus_lookup[&br.to]);
                let (step, taps) = match &br.kind {
                    BranchKind::Transformer { tap, connection } => (
                        match connection {
                            Connection::DeltaWye => -std::f64::consts::FRAC_PI_6,
                            Connection::WyeWye => 0.0,
                        },
                        Some(tap),
                    ),
                    BranchKind::Line => (0.0, None),
                };
                let (other, s, forward) = if f == b {
                    (t, base + step, true)
                } else if t == b {
                    (f, base - step, false)
                } else {
                    continue;
                };
                if shift[other].is_none() {
                    shift[other] = Some(s);
                    let mut r = ratio[b];
                    if let Some(taps) = taps {
                        for (k, p) in br.phases.iter().enumerate() {
                            let tk = taps[k];
                            r[p.index()] = if forward { r[p.index()] / tk } else { r[p.index()] * tk };
                        }
                    }
                    ratio[other] = r;
                    queue.push_back(other);
                }
            }
        }
        let angles = self
            .nodes
            .iter()
            .map(|n| n.phase.reference_angle() + shift[n.bus].unwrap_or(0.0))
            .collect();
        let mags = self.nodes.iter().map(|n| ratio[n.bus][n.phase.index()]).collect();
        (angles, mags)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("feeder documents always serialize")
    }
}

fn validate_bus(bus: &Bus) -> Result<()> {
    if bus.phases.is_empty() {
        return Err(Error::Validation(format!("bus `{}` has no phases", bus.id)));
    }
    if !(bus.base_kv > 0.0) {
        return Err(Error::Validation(format!("bus `{}` needs base_kv > 0", bus.id)));
    }
    let regulated = matches!(bus.bus_type, BusType::Slack | BusType::PV);
    match (regulated, bus.v0_pu) {
        (true, None) => {
            return Err(Error::Validation(format!(
                "bus `{}` of type {:?} needs v0_pu",
                bus.id, bus.bus_type
            )))
        }
        (false, Some(_)) => {
            return Err(Error::Validation(format!(
                "PQ bus `{}` must not carry v0_pu",
                bus.id
            )))
        }
        (true, Some(v)) if !(v > 0.0) => {
            return Err(Error::Validation(format!("bus `{}` needs v0_pu > 0", bus.id)))
        }
        _ => {}
    }
    if !bus.shunt_kvar.is_empty() && bus.shunt_kvar.len() != bus.phases.len() {
        return Err(Error::Validation(format!(
            "bus `{}` shunt_kvar needs one entry per phase",
            bus.id
        )));
    }
    if bus.bus_type == BusType::Slack && bus.phases != PhaseSet::ABC {
        return Err(Error::Validation(format!("slack bus `{}` must be three-phase", bus.id)));
    }
    Ok(())
}

fn validate_branch(br: &Branch, from: &Bus, to: &Bus) -> Result<()> {
    let k = br.phases.len();
    if k == 0 {
        return Err(Error::Validation(format!("branch `{}` has no phases", br.id)));
    }
    if !br.phases.is_subset(from.phases) || !br.phases.is_subset(to.phases) {
        return Err(Error::Validation(format!(
            "branch `{}` phases {} not present on both ends",
            br.id, br.phases
        )));
    }
    if br.from == br.to {
        return Err(Error::Validation(format!("branch `{}` is a self loop", br.id)));
    }
    check_square(&br.z_ohm, k, &br.id, "z_ohm")?;
    if let Some(y) = &br.y_shunt_s {
        check_square(y, k, &br.id, "y_shunt_s")?;
    }
    if !(br.ampacity_a > 0.0) {
        return Err(Error::Validation(format!("branch `{}` needs ampacity_a > 0", br.id)));
    }
    match &br.kind {
        BranchKind::Line => {
            if (from.base_kv - to.base_kv).abs() > 1e-9 * from.base_kv {
                return Err(Error::Validation(format!(
                    "line `{}` joins buses of different base voltage",
                    br.id
                )));
            }
        }
        BranchKind::Transformer { tap, connection } => {
            if tap.len() != k || tap.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::Validation(format!(
                    "transformer `{}` needs one positive tap per phase",
                    br.id
                )));
            }
            if *connection == Connection::DeltaWye && br.phases != PhaseSet::ABC {
                return Err(Error::Validation(format!(
                    "delta-wye transformer `{}` must be three-phase",
                    br.id
                )));
            }
        }
    }
    Ok(())
}

fn check_square(m: &[Vec<Complex64>], k: usize, id: &str, field: &str) -> Result<()> {
    if m.len() != k || m.iter().any(|row| row.len() != k) {
        return Err(Error::Validation(format!(
            "branch `{id}` {field} must be {k}x{k} over its phases"
        )));
    }
    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..k {
        for j in 0..i {
            if (m[i][j] - m[j][i]).norm() > 1e-9 * scale.max(1e-300) {
                return Err(Error::Validation(format!("branch `{id}` {field} is not symmetric")));
            }
        }
    }
    if m.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation(format!("branch `{id}` {field} is not finite")));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_bus_doc() -> String {
        r#"{
          "name": "toy",
          "buses": [
            {"id": "src", "type": "slack", "phases": "ABC", "base_kv": 4.16, "v0_pu": 1.0},
            {"id": "load", "type": "pq", "phases": "A", "base_kv": 4.16}
          ],
          "branches": [
            {"id": "l1", "from": "src", "to": "load", "phases": "A",
             "z_ohm": [[[0.01, 0.03]]], "ampacity_a": 400.0, "kind": {"type": "line"}}
          ],
          "loads": [{"bus": "load", "phase": "A", "p_kw": 50.0, "q_kvar": 20.0}],
          "generators": [],
          "limits": {"v_min_pu": 0.9, "v_max_pu": 1.1}
        }"#
        .to_string()
    }

    #[test]
    fn loads_minimal_document() {
        let model = load_feeder(&two_bus_doc()).unwrap();
        assert_eq!(model.node_count(), 4);
        assert_eq!(model.total_load(), (0.05, 0.02));
        assert_eq!(model.node_label(3), "load.A");
        let inj = model.base_injections();
        assert_eq!(inj.p_kw[3], -50.0);
    }

    #[test]
    fn rejects_two_slack_buses() {
        let doc = two_bus_doc().replace(
            r#""type": "pq", "phases": "A", "base_kv": 4.16}"#,
            r#""type": "slack", "phases": "ABC", "base_kv": 4.16, "v0_pu": 1.0}"#,
        );
        assert!(matches!(load_feeder(&doc), Err(Error::Topology(_))));
    }

    #[test]
    fn rejects_duplicate_bus() {
        let doc = two_bus_doc().replace(r#""id": "load""#, r#""id": "src""#);
        assert!(matches!(load_feeder(&doc), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_islanded_bus() {
        let doc = two_bus_doc().replace(
            r#"{"id": "load", "type": "pq", "phases": "A", "base_kv": 4.16}"#,
            r#"{"id": "load", "type": "pq", "phases": "A", "base_kv": 4.16},
               {"id": "island", "type": "pq", "phases": "B", "base_kv": 4.16}"#,
        );
        assert!(matches!(load_feeder(&doc), Err(Error::Topology(_))));
    }

    #[test]
    fn parse_error_carries_position() {
        let doc = two_bus_doc().replace(r#""p_kw": 50.0,"#, "");
        match load_feeder(&doc) {
            Err(Error::Parse { line, message, .. }) => {
                assert!(line > 1);
                assert!(message.contains("p_kw"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn v0_only_on_regulated_buses() {
        let doc = two_bus_doc().replace(
            r#""type": "pq", "phases": "A", "base_kv": 4.16}"#,
            r#""type": "pq", "phases": "A", "base_kv": 4.16, "v0_pu": 1.0}"#,
        );
        assert!(matches!(load_feeder(&doc), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_asymmetric_impedance() {
        let doc = two_bus_doc()
            .replace(r#""phases": "A", "base_kv""#, r#""phases": "AB", "base_kv""#)
            .replace(r#""to": "load", "phases": "A""#, r#""to": "load", "phases": "AB""#)
            .replace(
                r#"[[[0.01, 0.03]]]"#,
                r#"[[[0.01, 0.03], [0.0, 0.01]], [[0.0, 0.02], [0.01, 0.03]]]"#,
            );
        assert!(matches!(load_feeder(&doc), Err(Error::Validation(_))));
    }
}
