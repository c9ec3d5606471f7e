//! Run reports.
//!
//! A report is an ordered list of sections, each holding key-value entries
//! and optionally one table. The text rendering looks like
//!
//! ```text
//! # stackroute report
//! version = 0.1.0
//! command = max-ue
//!
//! [config]
//! net = data/SiouxFalls_net.tntp
//!
//! [summary]
//! compliant_pct = 13.039
//!
//! [table selfish_share]
//! origin    destination    demand    selfish    compliant
//! 1    2    100    100    0
//! ```
//!
//! Keys are `snake_case`, table cells are tab separated (shown as spaces
//! above), and node numbers
//! are the labels from the input files. The same structure serializes to
//! JSON through [`Report::to_json`]. Nothing time- or host-dependent is
//! recorded, so identical inputs give byte-identical reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::assignment::{EquilibriumSolution, Objective};
use crate::compliance::{ComplianceResult, PipelineResult};
use crate::network::{NetworkModel, PathFlowSet};
use crate::reduced_cost::ReducedCostSets;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn entry(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: String,
    pub command: String,
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            version: VERSION.to_string(),
            command: command.into(),
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Value of `key` in section `section`.
    pub fn value(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section)?
            .entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# stackroute report");
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "command = {}", self.command);
        for s in &self.sections {
            if !s.entries.is_empty() {
                let _ = writeln!(out, "\n[{}]", s.name);
                for (k, v) in &s.entries {
                    let _ = writeln!(out, "{k} = {v}");
                }
            }
            if let Some(t) = &s.table {
                let _ = writeln!(out, "\n[table {}]", s.name);
                let _ = writeln!(out, "{}", t.columns.join("\t"));
                for r in &t.rows {
                    let _ = writeln!(out, "{}", r.join("\t"));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fixed-precision rendering for reported quantities.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn equilibrium_section(sol: &EquilibriumSolution) -> Section {
    let name = match sol.objective {
        Objective::UserEquilibrium => "user_equilibrium",
        Objective::SystemOptimum => "system_optimum",
    };
    Section::new(name)
        .entry("total_travel_time", num(sol.total_travel_time))
        .entry("aec", sci(sol.aec))
        .entry("aec_target", sci(sol.aec_target))
        .entry("iterations", sol.iterations)
        .entry("converged", sol.converged)
}

pub fn link_flow_table(model: &NetworkModel, sol: &EquilibriumSolution) -> Section {
    let rows = (0..model.num_links())
        .map(|e| {
            let l = model.link(e);
            vec![
                (e + 1).to_string(),
                model.node_label(l.tail).to_string(),
                model.node_label(l.head).to_string(),
                num(sol.link_flow.get(e)),
                num(sol.link_latency[e]),
                num(sol.link_marginal_cost[e]),
            ]
        })
        .collect();
    Section::new("link_flows").with_table(Table {
        columns: ["link", "tail", "head", "flow", "latency", "marginal_cost"]
            .map(String::from)
            .to_vec(),
        rows,
    })
}

pub fn reduced_cost_section(rc: &ReducedCostSets) -> Section {
    Section::new("reduced_cost")
        .entry("mode", rc.mode)
        .entry("tolerance", sci(rc.tolerance))
        .entry("threshold", sci(rc.threshold))
        .entry("certified_links", rc.total_links())
        .entry("disconnected_pairs", rc.disconnected_pairs.len())
}

pub fn share_table(model: &NetworkModel, res: &ComplianceResult) -> Section {
    let rows = res
        .r_ue
        .iter()
        .map(|(&(s, t), &r)| {
            vec![
                model.node_label(s).to_string(),
                model.node_label(t).to_string(),
                num(model.demand_between(s, t)),
                num(r),
                num(res.r_compliant[&(s, t)]),
            ]
        })
        .collect();
    Section::new("selfish_share").with_table(Table {
        columns: ["origin", "destination", "demand", "selfish", "compliant"]
            .map(String::from)
            .to_vec(),
        rows,
    })
}

pub fn compliance_section(res: &ComplianceResult) -> Section {
    Section::new("compliance")
        .entry("formulation", res.formulation)
        .entry("total_demand", num(res.total_demand))
        .entry("r_ue", num(res.r_ue_total))
        .entry("compliant_pct", num(100.0 * res.compliant_fraction))
        .entry("compliant_routed", res.compliant_routed)
        .entry("selfish_paths", res.ue_paths.len())
        .entry("compliant_paths", res.compliant_paths.len())
        .entry("canceled_cycles", res.canceled_cycles.len())
        .entry(
            "ue_lp_iterations",
            res.ue_lp_stats.phase1_iterations + res.ue_lp_stats.phase2_iterations,
        )
        .entry(
            "compliant_lp_iterations",
            res.compliant_lp_stats.phase1_iterations + res.compliant_lp_stats.phase2_iterations,
        )
        .entry(
            "note",
            "the per-pair split is one optimal vertex; other splits with the same total may exist",
        )
}

/// Path prescriptions. Links are 1-based input order; nodes are listed from
/// origin to destination.
pub fn path_table(name: &str, model: &NetworkModel, paths: &PathFlowSet) -> Section {
    let rows = paths
        .entries
        .iter()
        .map(|p| {
            let mut nodes = vec![model.node_label(p.origin).to_string()];
            nodes.extend(
                p.links
                    .iter()
                    .map(|&e| model.node_label(model.link(e).head).to_string()),
            );
            let links: Vec<String> = p.links.iter().map(|&e| (e + 1).to_string()).collect();
            vec![
                model.node_label(p.origin).to_string(),
                model.node_label(p.destination).to_string(),
                num(p.flow),
                links.join(","),
                nodes.join("-"),
            ]
        })
        .collect();
    Section::new(name).with_table(Table {
        columns: ["origin", "destination", "flow", "links", "nodes"]
            .map(String::from)
            .to_vec(),
        rows,
    })
}

/// Summary row in the layout of a results table: travel times, saving and
/// compliant share.
pub fn summary_section(run: &PipelineResult) -> Section {
    let s = &run.summary;
    let mut sec = Section::new("summary");
    if let Some(ue) = s.ue_total_travel_time {
        sec = sec.entry("ue_total_travel_time", num(ue));
    }
    sec = sec.entry("so_total_travel_time", num(s.so_total_travel_time));
    if let Some(p) = s.improvement_pct {
        sec = sec.entry("improvement_pct", num(p));
    }
    sec.entry("threshold", sci(s.threshold))
        .entry("compliant_pct", num(s.compliant_pct))
        .entry(
            "selfish_only_compliant_pct",
            num(s.selfish_only_compliant_pct),
        )
}

/// Sections describing a full pipeline run.
pub fn pipeline_sections(
    model: &NetworkModel,
    run: &PipelineResult,
    with_paths: bool,
) -> Vec<Section> {
    let mut out = vec![summary_section(run)];
    if let Some(ue) = &run.ue {
        out.push(equilibrium_section(ue));
    }
    out.push(equilibrium_section(&run.so));
    out.push(reduced_cost_section(&run.reduced_costs));
    out.push(compliance_section(&run.compliance));
    out.push(share_table(model, &run.compliance));
    if with_paths {
        out.push(path_table("selfish_paths", model, &run.compliance.ue_paths));
        out.push(path_table(
            "compliant_paths",
            model,
            &run.compliance.compliant_paths,
        ));
    }
    out
}
