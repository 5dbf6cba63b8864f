//! Threshold-filtered net pairwise spillover networks.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Npdc, SpilloverIndices, SplitKind};

pub const DEFAULT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Transmitter,
    Receiver,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Transmitter => "transmitter",
            Role::Receiver => "receiver",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub label: String,
    pub role: Role,
    /// NET for the network's split, in the table's units.
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub weight: f64,
    pub split: SplitKind,
}

/// Directed graph for one split: edge `i → j` when `NPDC[i, j]` exceeds the
/// threshold. Nodes and edges are sorted by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverNetwork {
    pub split: SplitKind,
    pub threshold: f64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl SpilloverNetwork {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn node(&self, label: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.label == label)
    }

    pub fn edge(&self, source: &str, target: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.source == source && e.target == target)
    }
}

/// One network per split present in both `npdc` and `indices`. Edges use a
/// strict `>` comparison with `threshold`; a node is a transmitter iff its
/// NET is positive.
pub fn build_network(npdc: &Npdc, indices: &SpilloverIndices, threshold: f64) -> Result<Vec<SpilloverNetwork>> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must be a finite value ≥ 0")));
    }
    if npdc.labels != indices.labels {
        return Err(Error::DimensionMismatch("NPDC and indices describe different series".into()));
    }
    let k = npdc.labels.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| npdc.labels[a].cmp(&npdc.labels[b]));

    let mut out = Vec::new();
    for kind in SplitKind::ALL {
        let (Some(m), Some(dir)) = (npdc.get(kind), indices.get(kind)) else {
            continue;
        };
        let nodes = order
            .iter()
            .map(|&i| Node {
                label: npdc.labels[i].clone(),
                role: if dir.net[i] > 0.0 { Role::Transmitter } else { Role::Receiver },
                net: dir.net[i],
            })
            .collect();
        let mut edges = Vec::new();
        for &i in &order {
            for &j in &order {
                if i != j && m[(i, j)] > threshold {
                    edges.push(Edge {
                        source: npdc.labels[i].clone(),
                        target: npdc.labels[j].clone(),
                        weight: m[(i, j)],
                        split: kind,
                    });
                }
            }
        }
        out.push(SpilloverNetwork { split: kind, threshold, nodes, edges });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Json,
    Dot,
    Graphml,
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Json => "json",
            GraphFormat::Dot => "dot",
            GraphFormat::Graphml => "graphml",
        }
    }
}

impl fmt::Display for GraphFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(GraphFormat::Json),
            "dot" => Ok(GraphFormat::Dot),
            "graphml" => Ok(GraphFormat::Graphml),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;").replace('\'', "&apos;")
}

fn to_dot(net: &SpilloverNetwork) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph {} {{", dot_id(net.split.as_str()));
    let _ = writeln!(s, "  graph [threshold=\"{}\"];", net.threshold);
    for n in &net.nodes {
        let _ = writeln!(s, "  {} [role=\"{}\", net=\"{}\"];", dot_id(&n.label), n.role.as_str(), n.net);
    }
    for e in &net.edges {
        let _ = writeln!(
            s,
            "  {} -> {} [weight=\"{}\", split=\"{}\"];",
            dot_id(&e.source),
            dot_id(&e.target),
            e.weight,
            e.split
        );
    }
    s.push_str("}\n");
    s
}

fn to_graphml(net: &SpilloverNetwork) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"role\" for=\"node\" attr.name=\"role\" attr.type=\"string\"/>\n");
    s.push_str("  <key id=\"net\" for=\"node\" attr.name=\"net\" attr.type=\"double\"/>\n");
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    s.push_str("  <key id=\"split\" for=\"edge\" attr.name=\"split\" attr.type=\"string\"/>\n");
    s.push_str("  <key id=\"threshold\" for=\"graph\" attr.name=\"threshold\" attr.type=\"double\"/>\n");
    let _ = writeln!(s, "  <graph id=\"{}\" edgedefault=\"directed\">", net.split.as_str());
    let _ = writeln!(s, "    <data key=\"threshold\">{}</data>", net.threshold);
    for n in &net.nodes {
        let _ = writeln!(s, "    <node id=\"{}\">", xml_escape(&n.label));
        let _ = writeln!(s, "      <data key=\"role\">{}</data>", n.role.as_str());
        let _ = writeln!(s, "      <data key=\"net\">{}</data>", n.net);
        s.push_str("    </node>\n");
    }
    for e in &net.edges {
        let _ = writeln!(s, "    <edge source=\"{}\" target=\"{}\">", xml_escape(&e.source), xml_escape(&e.target));
        let _ = writeln!(s, "      <data key=\"weight\">{}</data>", e.weight);
        let _ = writeln!(s, "      <data key=\"split\">{}</data>", e.split);
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

/// Serializes a network. Floats use the shortest representation that reads
/// back to the same value.
pub fn export_graph(net: &SpilloverNetwork, format: GraphFormat) -> Result<String> {
    Ok(match format {
        GraphFormat::Json => serde_json::to_string_pretty(net)? + "\n",
        GraphFormat::Dot => to_dot(net),
        GraphFormat::Graphml => to_graphml(net),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{aggregate_indices, npdc, ConnectednessTable};
    use nalgebra::DMatrix;

    fn table() -> ConnectednessTable {
        let c = DMatrix::from_row_slice(3, 3, &[0.0, 5.0, 1.0, 2.0, 0.0, 3.0, 4.0, 0.5, 0.0]);
        let l = DMatrix::from_row_slice(3, 3, &[0.3, 1.0, 0.2, 6.0, 0.1, 0.4, 0.7, 0.2, 0.9]);
        ConnectednessTable::from_split(vec!["c".into(), "a".into(), "b".into()], c, l).unwrap()
    }

    #[test]
    fn roles_follow_net_and_edges_follow_npdc() {
        let t = table();
        let nets = build_network(&npdc(&t), &aggregate_indices(&t), 0.2).unwrap();
        assert_eq!(nets.len(), 3);
        let overall = &nets[0];
        let labels: Vec<_> = overall.nodes.iter().map(|n| n.label.as_str()).collect();
        assert_eq!(labels, ["a", "b", "c"]);
        for e in &overall.edges {
            assert!(e.weight > 0.2);
            assert!(overall.edge(&e.target, &e.source).is_none());
        }
    }

    #[test]
    fn high_threshold_leaves_nodes_only() {
        let t = table();
        let nets = build_network(&npdc(&t), &aggregate_indices(&t), 1e6).unwrap();
        assert!(nets.iter().all(|n| n.edges.is_empty() && n.nodes.len() == 3));
    }

    #[test]
    fn json_round_trip() {
        let t = table();
        for net in build_network(&npdc(&t), &aggregate_indices(&t), 0.0).unwrap() {
            let text = export_graph(&net, GraphFormat::Json).unwrap();
            assert_eq!(SpilloverNetwork::from_json(&text).unwrap(), net);
        }
    }

    #[test]
    fn negative_threshold_rejected() {
        let t = table();
        assert!(build_network(&npdc(&t), &aggregate_indices(&t), -0.1).is_err());
        assert!("svg".parse::<GraphFormat>().is_err());
    }
}
