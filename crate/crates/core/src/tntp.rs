//! Reader and writer for the TransportationNetworks (TNTP) text format.
//!
//! Network files (`*_net.tntp`) start with `<KEY> value` metadata lines ending
//! at `<END OF METADATA>`, followed by `;`-terminated link records:
//!
//! ```text
//! ~ init_node term_node capacity length free_flow_time b power speed toll link_type ;
//!   1 2 25900.20064 6 6 0.15 4 0 0 1 ;
//! ```
//!
//! Trip files (`*_trips.tntp`) contain `Origin n` blocks of `dest : flow;`
//! entries. Lines starting with `~` are comments in both formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{LatencyFunction, NetworkBuilder, NetworkModel, NodeId};

const END_OF_METADATA: &str = "END OF METADATA";

/// One link record of a network file; node numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TntpLink {
    pub init_node: u64,
    pub term_node: u64,
    pub capacity: f64,
    pub length: f64,
    pub free_flow_time: f64,
    /// BPR alpha; `None` when the record omits it.
    pub b: Option<f64>,
    /// BPR beta; `None` when the record omits it.
    pub power: Option<f64>,
    pub speed: Option<f64>,
    pub toll: Option<f64>,
    pub link_type: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TntpNetworkFile {
    /// All metadata entries in file order, including unrecognized keys.
    pub metadata: Vec<(String, String)>,
    pub num_zones: usize,
    pub num_nodes: usize,
    pub first_thru_node: u64,
    pub num_links: usize,
    pub links: Vec<TntpLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TntpTripsFile {
    pub metadata: Vec<(String, String)>,
    pub num_zones: Option<usize>,
    pub total_flow: Option<f64>,
    /// Positive demands keyed by 1-based (origin, destination).
    pub demand: BTreeMap<(u64, u64), f64>,
}

impl TntpTripsFile {
    pub fn total(&self) -> f64 {
        self.demand.values().sum()
    }
}

/// Splits `<KEY> value` lines until the end marker; returns entries and the
/// index of the first body line.
fn read_metadata(lines: &[&str]) -> Result<(Vec<(String, String)>, usize)> {
    let mut meta = Vec::new();
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        let Some(rest) = line.strip_prefix('<') else {
            return Err(Error::parse(
                i + 1,
                format!("expected a <KEY> metadata line, found {line:?}"),
            ));
        };
        let Some(close) = rest.find('>') else {
            return Err(Error::parse(i + 1, "unterminated metadata key"));
        };
        let key = rest[..close].trim().to_ascii_uppercase();
        let value = rest[close + 1..].trim().to_string();
        if key == END_OF_METADATA {
            return Ok((meta, i + 1));
        }
        meta.push((key, value));
    }
    Err(Error::parse(lines.len(), "missing <END OF METADATA>"))
}

fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn meta_number<T: std::str::FromStr>(
    meta: &[(String, String)],
    key: &str,
    line: usize,
) -> Result<Option<T>> {
    match meta_value(meta, key) {
        None => Ok(None),
        Some(v) => {
            // some files decorate values, e.g. "360600.0 ~ comment"
            let token = v.split_whitespace().next().unwrap_or("");
            token
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::parse(line, format!("metadata <{key}> is not numeric: {v:?}")))
        }
    }
}

fn required<T>(v: Option<T>, key: &str, line: usize) -> Result<T> {
    v.ok_or_else(|| Error::parse(line, format!("missing mandatory metadata <{key}>")))
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("{what} is not numeric: {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what} is not finite: {tok:?}")));
    }
    Ok(v)
}

fn parse_node(tok: &str, line: usize, num_nodes: usize) -> Result<u64> {
    let v: u64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("node id is not an integer: {tok:?}")))?;
    if v == 0 || v as usize > num_nodes {
        return Err(Error::parse(
            line,
            format!("node {v} outside 1..={num_nodes}"),
        ));
    }
    Ok(v)
}

/// Parses a `*_net.tntp` document.
pub fn parse_network(text: &str) -> Result<TntpNetworkFile> {
    let lines: Vec<&str> = text.lines().collect();
    let (metadata, body_start) = read_metadata(&lines)?;
    let header_line = body_start;
    let num_nodes: usize = required(
        meta_number(&metadata, "NUMBER OF NODES", header_line)?,
        "NUMBER OF NODES",
        header_line,
    )?;
    let num_links: usize = required(
        meta_number(&metadata, "NUMBER OF LINKS", header_line)?,
        "NUMBER OF LINKS",
        header_line,
    )?;
    let num_zones: usize = required(
        meta_number(&metadata, "NUMBER OF ZONES", header_line)?,
        "NUMBER OF ZONES",
        header_line,
    )?;
    let first_thru_node: u64 = meta_number(&metadata, "FIRST THRU NODE", header_line)?.unwrap_or(1);

    let mut links = Vec::with_capacity(num_links);
    for (offset, raw) in lines[body_start..].iter().enumerate() {
        let line_no = body_start + offset + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        let record = line.split(';').next().unwrap_or("");
        let fields: Vec<&str> = record.split_whitespace().collect();
        // Trailing optional columns may be omitted.
        if !(5..=10).contains(&fields.len()) {
            return Err(Error::parse(
                line_no,
                format!("link record has {} fields, expected 5 to 10", fields.len()),
            ));
        }
        let opt = |i: usize, what: &str| -> Result<Option<f64>> {
            fields
                .get(i)
                .map(|t| parse_f64(t, line_no, what))
                .transpose()
        };
        links.push(TntpLink {
            init_node: parse_node(fields[0], line_no, num_nodes)?,
            term_node: parse_node(fields[1], line_no, num_nodes)?,
            capacity: parse_f64(fields[2], line_no, "capacity")?,
            length: parse_f64(fields[3], line_no, "length")?,
            free_flow_time: parse_f64(fields[4], line_no, "free flow time")?,
            b: opt(5, "b")?,
            power: opt(6, "power")?,
            speed: opt(7, "speed")?,
            toll: opt(8, "toll")?,
            link_type: opt(9, "link type")?,
        });
    }
    if links.len() != num_links {
        return Err(Error::parse(
            lines.len(),
            format!(
                "<NUMBER OF LINKS> declares {num_links} links but {} records were found",
                links.len()
            ),
        ));
    }
    Ok(TntpNetworkFile {
        metadata,
        num_zones,
        num_nodes,
        first_thru_node,
        num_links,
        links,
    })
}

/// Parses a `*_trips.tntp` document. Zero entries are dropped.
pub fn parse_trips(text: &str) -> Result<TntpTripsFile> {
    let lines: Vec<&str> = text.lines().collect();
    let (metadata, body_start) = read_metadata(&lines)?;
    let num_zones: Option<usize> = meta_number(&metadata, "NUMBER OF ZONES", body_start)?;
    let total_flow: Option<f64> = meta_number(&metadata, "TOTAL OD FLOW", body_start)?;

    let mut seen = BTreeMap::new();
    let mut origin: Option<u64> = None;
    for (offset, raw) in lines[body_start..].iter().enumerate() {
        let line_no = body_start + offset + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("Origin") {
            let tok = rest.trim();
            let o: u64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad origin id {tok:?}")))?;
            origin = Some(o);
            continue;
        }
        let Some(o) = origin else {
            return Err(Error::parse(line_no, "demand entry before any Origin line"));
        };
        for entry in line.split(';') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let Some((d, v)) = entry.split_once(':') else {
                return Err(Error::parse(
                    line_no,
                    format!("expected `dest : flow`, found {entry:?}"),
                ));
            };
            let d: u64 = d
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad destination {d:?}")))?;
            let v = parse_f64(v.trim(), line_no, "demand")?;
            if v < 0.0 {
                return Err(Error::parse(
                    line_no,
                    format!("negative demand {v} for ({o}, {d})"),
                ));
            }
            if seen.insert((o, d), v).is_some() {
                return Err(Error::parse(
                    line_no,
                    format!("duplicate entry for ({o}, {d})"),
                ));
            }
        }
    }
    let demand: BTreeMap<(u64, u64), f64> = seen.into_iter().filter(|&(_, v)| v > 0.0).collect();
    let file = TntpTripsFile {
        metadata,
        num_zones,
        total_flow,
        demand,
    };
    if let Some(total) = total_flow {
        let parsed = file.total();
        if (parsed - total).abs() > 1e-3 * total.abs().max(1.0) {
            warn!("trip table declares total flow {total} but entries sum to {parsed}");
        }
    }
    Ok(file)
}

/// Assembles a [`NetworkModel`] with one BPR link per record.
pub fn build_model(net: &TntpNetworkFile, trips: &TntpTripsFile) -> Result<NetworkModel> {
    let n = net.num_nodes;
    if let Some(z) = trips.num_zones {
        if z > n {
            return Err(Error::Validation(format!(
                "trip table declares {z} zones but the network has {n} nodes"
            )));
        }
    }
    let mut b = NetworkBuilder::new(n)
        .zones(net.num_zones.min(n))
        .first_through_node(net.first_thru_node.saturating_sub(1) as NodeId)
        .node_labels((1..=n as u64).collect());
    for (i, l) in net.links.iter().enumerate() {
        if l.capacity <= 0.0 {
            warn!(
                "link {i} ({} -> {}) has non-positive capacity {}",
                l.init_node, l.term_node, l.capacity
            );
        }
        let latency = LatencyFunction::Bpr {
            free_flow_time: l.free_flow_time,
            capacity: l.capacity,
            alpha: l.b.unwrap_or(LatencyFunction::BPR_ALPHA),
            beta: l.power.unwrap_or(LatencyFunction::BPR_BETA),
        };
        b.add_link(
            l.init_node as NodeId - 1,
            l.term_node as NodeId - 1,
            latency,
        );
    }
    for (&(o, d), &v) in &trips.demand {
        if o == 0 || d == 0 || o as usize > n || d as usize > n {
            return Err(Error::Validation(format!(
                "trip ({o}, {d}) references a node outside 1..={n}"
            )));
        }
        b.add_demand(o as NodeId - 1, d as NodeId - 1, v);
    }
    b.build()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn read_network(path: impl AsRef<Path>) -> Result<TntpNetworkFile> {
    parse_network(&read_text(path.as_ref())?)
}

pub fn read_trips(path: impl AsRef<Path>) -> Result<TntpTripsFile> {
    parse_trips(&read_text(path.as_ref())?)
}

/// Loads and validates a network/trips file pair.
pub fn load_model(
    net_path: impl AsRef<Path>,
    trips_path: impl AsRef<Path>,
) -> Result<NetworkModel> {
    build_model(&read_network(net_path)?, &read_trips(trips_path)?)
}

/// Writes a network file. Optional columns are written up to the last one
/// present; a missing column before a present one is written as 0, so
/// such records do not round-trip exactly.
pub fn write_network(net: &TntpNetworkFile) -> String {
    let mut out = String::new();
    for (k, v) in &net.metadata {
        let _ = writeln!(out, "<{k}> {v}");
    }
    let _ = writeln!(out, "<{END_OF_METADATA}>\n");
    let _ = writeln!(out, "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;");
    for l in &net.links {
        let _ = write!(
            out,
            "\t{}\t{}\t{}\t{}\t{}",
            l.init_node, l.term_node, l.capacity, l.length, l.free_flow_time
        );
        let opt = [l.b, l.power, l.speed, l.toll, l.link_type];
        let used = opt.iter().rposition(Option::is_some).map_or(0, |i| i + 1);
        for v in &opt[..used] {
            let _ = write!(out, "\t{}", v.unwrap_or(0.0));
        }
        out.push_str("\t;\n");
    }
    out
}

/// Writes a trip table in the TNTP dialect (1-based node numbers).
pub fn write_trips(num_zones: usize, demand: &BTreeMap<(u64, u64), f64>) -> String {
    let total: f64 = demand.values().sum();
    let mut out = String::new();
    let _ = writeln!(out, "<NUMBER OF ZONES> {num_zones}");
    let _ = writeln!(out, "<TOTAL OD FLOW> {total}");
    let _ = writeln!(out, "<{END_OF_METADATA}>\n");
    let mut current = None;
    for (&(o, d), &v) in demand {
        if current != Some(o) {
            if current.is_some() {
                out.push('\n');
            }
            let _ = writeln!(out, "Origin\t{o}");
            current = Some(o);
        }
        let _ = writeln!(out, "{d:>5} : {v};");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL_NET: &str = "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 3\n<FIRST THRU NODE> 1\n<NUMBER OF LINKS> 3\n<SOME KEY> kept\n<END OF METADATA>\n\n~ init term cap len fft b power speed toll type ;\n\t1\t3\t10\t1\t1\t0.15\t4\t0\t0\t1\t;\n3 2   10 1 2 0.15 4 0 0 1;\n  1 2 5.5 1 9 0.15 4 0 0 1 ;\n";

    #[test]
    fn parses_small_network() {
        let net = parse_network(SMALL_NET).unwrap();
        assert_eq!(
            (
                net.num_nodes,
                net.num_links,
                net.num_zones,
                net.first_thru_node
            ),
            (3, 3, 2, 1)
        );
        assert_eq!(net.links[1].term_node, 2);
        assert_eq!(net.links[2].capacity, 5.5);
        assert!(net
            .metadata
            .iter()
            .any(|(k, v)| k == "SOME KEY" && v == "kept"));
    }

    #[test]
    fn empty_link_section() {
        let text =
            "<NUMBER OF ZONES> 0\n<NUMBER OF NODES> 0\n<NUMBER OF LINKS> 0\n<END OF METADATA>\n";
        let net = parse_network(text).unwrap();
        assert!(net.links.is_empty());
        let trips = parse_trips("<NUMBER OF ZONES> 0\n<END OF METADATA>\n").unwrap();
        let model = build_model(&net, &trips).unwrap();
        assert_eq!(model.num_links(), 0);
    }

    #[test]
    fn malformed_records_report_line_numbers() {
        let bad = SMALL_NET.replace("3 2   10 1 2", "3 2   10 x 2");
        match parse_network(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("unexpected {other:?}"),
        }
        let short = SMALL_NET.replace("3 2   10 1 2 0.15 4 0 0 1;", "3 2 10 1;");
        assert!(matches!(
            parse_network(&short),
            Err(Error::Parse { line: 10, .. })
        ));
        let missing = SMALL_NET.replace("<NUMBER OF NODES> 3\n", "");
        assert!(matches!(parse_network(&missing), Err(Error::Parse { .. })));
        let count = SMALL_NET.replace("<NUMBER OF LINKS> 3", "<NUMBER OF LINKS> 4");
        assert!(matches!(parse_network(&count), Err(Error::Parse { .. })));
        let range = SMALL_NET.replace("\t1\t3\t10", "\t1\t4\t10");
        assert!(matches!(parse_network(&range), Err(Error::Parse { .. })));
    }

    #[test]
    fn trips_parsing_rules() {
        let t =
            parse_trips("<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n  2 : 0.0;\n").unwrap();
        assert!(t.demand.is_empty());
        let t = parse_trips("<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 3.5\n<END OF METADATA>\nOrigin 1\n 1 : 0; 2 : 3.5;\nOrigin 2\n 1 : 0.0;\n").unwrap();
        assert_eq!(t.demand.get(&(1, 2)), Some(&3.5));
        assert_eq!(t.total_flow, Some(3.5));
        let dup = parse_trips("<END OF METADATA>\nOrigin 1\n 2 : 1; 2 : 2;\n");
        assert!(matches!(dup, Err(Error::Parse { line: 3, .. })));
        let neg = parse_trips("<END OF METADATA>\nOrigin 1\n 2 : -1;\n");
        assert!(matches!(neg, Err(Error::Parse { .. })));
    }

    #[test]
    fn build_model_checks_bounds_and_defaults() {
        let net = parse_network(SMALL_NET).unwrap();
        let trips = parse_trips("<END OF METADATA>\nOrigin 1\n 2 : 4;\n").unwrap();
        let model = build_model(&net, &trips).unwrap();
        assert_eq!(model.num_links(), 3);
        assert_eq!(model.demand_between(0, 1), 4.0);

        let far = parse_trips("<END OF METADATA>\nOrigin 1\n 7 : 4;\n").unwrap();
        assert!(matches!(build_model(&net, &far), Err(Error::Validation(_))));

        let five = "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n1 2 10 1 3 ;\n";
        let net5 = parse_network(five).unwrap();
        let m = build_model(&net5, &trips).unwrap();
        assert_eq!(
            m.link(0).latency,
            LatencyFunction::Bpr {
                free_flow_time: 3.0,
                capacity: 10.0,
                alpha: 0.15,
                beta: 4.0
            }
        );
    }

    #[test]
    fn zero_capacity_unused_link_is_accepted() {
        let text = SMALL_NET.replace("5.5 1 9", "0 1 9");
        let net = parse_network(&text).unwrap();
        let trips = parse_trips("<END OF METADATA>\nOrigin 1\n 2 : 4;\n").unwrap();
        // 1 -> 3 -> 2 is still available
        assert!(build_model(&net, &trips).is_ok());
    }

    #[test]
    fn trips_writer_round_trips() {
        let mut d = BTreeMap::new();
        d.insert((1, 2), 0.25);
        d.insert((2, 1), 3.0);
        let t = parse_trips(&write_trips(2, &d)).unwrap();
        assert_eq!(t.demand, d);
        assert_eq!(t.num_zones, Some(2));
    }
}
