//! Command-line front end.
//!
//! Every flag can also be set through an environment variable named
//! `STACKROUTE_` followed by the flag name in upper case with dashes turned
//! into underscores (`--rc-mode` is `STACKROUTE_RC_MODE`). Flags win over
//! the environment.
//!
//! Exit codes: 0 success, 1 input, usage or stage failure, 2 an equilibrium
//! did not reach its AEC target, 3 the compliant demand is insufficient.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::assignment::{solve_equilibrium, AssignmentOptions, Objective};
use crate::compliance::{
    check_sufficiency_with, run_pipeline, PipelineOptions, ShareFormulation, Sufficiency,
};
use crate::error::{Error, Result};
use crate::lp::{export_lp, LpOptions};
use crate::network::NetworkModel;
use crate::reduced_cost::{ReducedCostMode, ReducedCostSets};
use crate::report::{self, Report, Section};
use crate::tntp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INSUFFICIENT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "stackroute",
    version,
    about = "Compliant-agent analysis for system-optimal traffic routing"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Solve the user equilibrium.
    Ue,
    /// Solve the system optimum.
    So,
    /// Largest selfish share compatible with the system optimum.
    MaxUe,
    /// Whether a given compliant demand suffices for the system optimum.
    Check {
        /// Compliant demand in the TNTP trips format.
        #[arg(long, env = "STACKROUTE_COMPLIANT_DEMAND")]
        compliant_demand: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ue => "ue",
            Command::So => "so",
            Command::MaxUe => "max-ue",
            Command::Check { .. } => "check",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Network file in the TNTP format.
    #[arg(long, global = true, env = "STACKROUTE_NET")]
    pub net: Option<PathBuf>,
    /// Trip table in the TNTP format.
    #[arg(long, global = true, env = "STACKROUTE_TRIPS")]
    pub trips: Option<PathBuf>,
    /// Target average excess cost.
    #[arg(long, global = true, env = "STACKROUTE_AEC", default_value_t = 1e-8)]
    pub aec: f64,
    /// Iteration cap for the equilibrium solver.
    #[arg(
        long,
        global = true,
        env = "STACKROUTE_MAX_ITERATIONS",
        default_value_t = 5000
    )]
    pub max_iterations: usize,
    /// How zero-reduced-cost links are identified: exact or empirical.
    #[arg(
        long,
        global = true,
        env = "STACKROUTE_RC_MODE",
        default_value = "exact"
    )]
    pub rc_mode: ReducedCostMode,
    /// Tolerance of the reduced-cost test; defaults depend on the mode.
    #[arg(long, global = true, env = "STACKROUTE_RC_TOL")]
    pub rc_tol: Option<f64>,
    /// Selfish-share program: joint or selfish-only.
    #[arg(
        long,
        global = true,
        env = "STACKROUTE_FORMULATION",
        default_value = "joint"
    )]
    pub formulation: ShareFormulation,
    /// Write the selfish-share program to this MPS file.
    #[arg(long, global = true, env = "STACKROUTE_EXPORT_LP")]
    pub export_lp: Option<PathBuf>,
    /// Report file; standard output when absent.
    #[arg(long, global = true, env = "STACKROUTE_OUT")]
    pub out: Option<PathBuf>,
    /// Also write the report as JSON to this file.
    #[arg(long, global = true, env = "STACKROUTE_JSON")]
    pub json: Option<PathBuf>,
    /// Include link flows and path prescriptions in the report.
    #[arg(long, global = true, env = "STACKROUTE_DETAIL")]
    pub detail: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, env = "STACKROUTE_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Seed for the randomized initial loading.
    #[arg(long, global = true, env = "STACKROUTE_SEED")]
    pub seed: Option<u64>,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if !(self.aec > 0.0) {
            return Err(Error::Usage(format!(
                "--aec must be positive, got {}",
                self.aec
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Usage("--max-iterations must be positive".into()));
        }
        if let Some(t) = self.rc_tol {
            if !(t > 0.0) {
                return Err(Error::Usage(format!("--rc-tol must be positive, got {t}")));
            }
        }
        Ok(())
    }

    fn paths(&self) -> Result<(&Path, &Path)> {
        let net = self
            .net
            .as_deref()
            .ok_or_else(|| Error::Usage("--net is required".into()))?;
        let trips = self
            .trips
            .as_deref()
            .ok_or_else(|| Error::Usage("--trips is required".into()))?;
        Ok((net, trips))
    }

    fn assignment(&self) -> AssignmentOptions {
        AssignmentOptions {
            aec_target: self.aec,
            max_iterations: self.max_iterations,
            seed: self.seed,
            ..Default::default()
        }
    }

    fn echo(&self, command: &Command) -> Section {
        let opt = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or_else(|| "-".to_string(), |p| p.display().to_string())
        };
        let mut s = Section::new("config")
            .entry("net", opt(&self.net))
            .entry("trips", opt(&self.trips))
            .entry("aec", self.aec)
            .entry("max_iterations", self.max_iterations)
            .entry("rc_mode", self.rc_mode)
            .entry(
                "rc_tol",
                self.rc_tol
                    .map_or_else(|| "default".to_string(), |t| t.to_string()),
            )
            .entry("formulation", self.formulation)
            .entry(
                "seed",
                self.seed
                    .map_or_else(|| "none".to_string(), |s| s.to_string()),
            );
        if let Command::Check { compliant_demand } = command {
            s = s.entry("compliant_demand", compliant_demand.display());
        }
        s
    }
}

/// Result of one command: the report and the exit code it implies.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
    /// One-line summary for standard output.
    pub summary: String,
}

/// Runs `command` and builds its report without writing anything except
/// an optional MPS export.
pub fn execute(config: &RunConfig, command: &Command) -> Result<Outcome> {
    config.validate()?;
    let (net, trips) = config.paths()?;
    let model = tntp::load_model(net, trips)?;
    info!(
        "loaded {} nodes, {} links, {} pairs with demand",
        model.num_nodes(),
        model.num_links(),
        model.demand().len()
    );
    let mut report = Report::new(command.name());
    report.push(config.echo(command));
    report.push(
        Section::new("network")
            .entry("nodes", model.num_nodes())
            .entry("links", model.num_links())
            .entry("zones", model.num_zones())
            .entry("pairs", model.demand().len())
            .entry("total_demand", report::num(model.total_demand())),
    );
    match command {
        Command::Ue => equilibrium(config, &model, Objective::UserEquilibrium, report),
        Command::So => equilibrium(config, &model, Objective::SystemOptimum, report),
        Command::MaxUe => max_ue(config, &model, report),
        Command::Check { compliant_demand } => check(config, &model, compliant_demand, report),
    }
}

fn equilibrium(
    config: &RunConfig,
    model: &NetworkModel,
    objective: Objective,
    mut report: Report,
) -> Result<Outcome> {
    let sol = solve_equilibrium(model, objective, &config.assignment())?;
    report.push(report::equilibrium_section(&sol));
    if config.detail {
        report.push(report::link_flow_table(model, &sol));
    }
    let summary = format!(
        "{}: total travel time {} (AEC {:.3e}, {} iterations{})",
        if objective == Objective::UserEquilibrium {
            "ue"
        } else {
            "so"
        },
        report::num(sol.total_travel_time),
        sol.aec,
        sol.iterations,
        if sol.converged { "" } else { ", not converged" }
    );
    Ok(Outcome {
        report,
        exit_code: if sol.converged {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        },
        summary,
    })
}

fn pipeline_options(config: &RunConfig) -> PipelineOptions {
    PipelineOptions {
        assignment: config.assignment(),
        rc_mode: config.rc_mode,
        rc_tolerance: config.rc_tol,
        formulation: config.formulation,
        lp: LpOptions::default(),
        solve_ue: true,
        keep_lp: config.export_lp.is_some(),
    }
}

fn max_ue(config: &RunConfig, model: &NetworkModel, mut report: Report) -> Result<Outcome> {
    let run = run_pipeline(model, &pipeline_options(config))?;
    if let (Some(path), Some(lp)) = (&config.export_lp, &run.ue_lp) {
        write_file(path, &export_lp(lp))?;
    }
    for s in report::pipeline_sections(model, &run, config.detail) {
        report.push(s);
    }
    let converged = run.so.converged && run.ue.as_ref().is_none_or(|u| u.converged);
    let summary = format!(
        "max-ue: {}% compliant (selfish-only bound {}%), selfish demand {} of {}",
        report::num(run.summary.compliant_pct),
        report::num(run.summary.selfish_only_compliant_pct),
        report::num(run.compliance.r_ue_total),
        report::num(run.compliance.total_demand)
    );
    Ok(Outcome {
        report,
        exit_code: if converged {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        },
        summary,
    })
}

fn check(
    config: &RunConfig,
    model: &NetworkModel,
    demand_path: &Path,
    mut report: Report,
) -> Result<Outcome> {
    let trips = tntp::read_trips(demand_path)?;
    let index = model_index(model);
    let mut compliant = std::collections::BTreeMap::new();
    for (&(o, d), &v) in &trips.demand {
        if v == 0.0 {
            continue;
        }
        let s = *index
            .get(&o)
            .ok_or_else(|| Error::Validation(format!("compliant demand names unknown node {o}")))?;
        let t = *index
            .get(&d)
            .ok_or_else(|| Error::Validation(format!("compliant demand names unknown node {d}")))?;
        compliant.insert((s, t), v);
    }
    let so = solve_equilibrium(model, Objective::SystemOptimum, &config.assignment())
        .map_err(|e| e.in_stage("so-assignment"))?;
    report.push(report::equilibrium_section(&so));
    let rc = ReducedCostSets::compute(model, &so, config.rc_mode, config.rc_tol)
        .map_err(|e| e.in_stage("reduced-cost"))?;
    report.push(report::reduced_cost_section(&rc));
    let verdict = check_sufficiency_with(
        model,
        &so,
        &rc,
        &compliant,
        config.formulation,
        &LpOptions::default(),
    )?;
    let total: f64 = compliant.values().sum();
    let mut sec = Section::new("sufficiency").entry("compliant_demand", report::num(total));
    let (exit_code, word) = match &verdict {
        Sufficiency::Sufficient(res) => {
            sec = sec.entry("verdict", "sufficient");
            report.push(sec);
            report.push(report::compliance_section(res));
            report.push(report::path_table("selfish_paths", model, &res.ue_paths));
            report.push(report::path_table(
                "compliant_paths",
                model,
                &res.compliant_paths,
            ));
            (EXIT_OK, "sufficient")
        }
        Sufficiency::Insufficient => {
            report.push(sec.entry("verdict", "insufficient"));
            (EXIT_INSUFFICIENT, "insufficient")
        }
    };
    let exit_code = if exit_code == EXIT_OK && !so.converged {
        EXIT_NOT_CONVERGED
    } else {
        exit_code
    };
    Ok(Outcome {
        report,
        exit_code,
        summary: format!("check: {word}"),
    })
}

fn model_index(model: &NetworkModel) -> std::collections::HashMap<u64, usize> {
    (0..model.num_nodes())
        .map(|v| (model.node_label(v), v))
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if cli.config.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.config.threads)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let outcome = match execute(&cli.config, &cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let text = outcome.report.to_text();
    let written = match &cli.config.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
    .and_then(|()| {
        cli.config
            .json
            .as_ref()
            .map_or(Ok(()), |p| write_file(p, &outcome.report.to_json()))
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    if cli.config.out.is_some() {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    outcome.exit_code
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "stackroute",
            "max-ue",
            "--net",
            "a",
            "--trips",
            "b",
            "--rc-mode",
            "empirical",
        ])
        .unwrap();
        assert_eq!(cli.config.rc_mode, ReducedCostMode::Empirical);
        assert!(matches!(cli.command, Command::MaxUe));
    }

    #[test]
    fn missing_files_are_usage_errors() {
        let cli =
            Cli::try_parse_from(["stackroute", "so", "--net", "/nonexistent/net.tntp"]).unwrap();
        assert!(matches!(
            execute(&cli.config, &cli.command),
            Err(Error::Usage(_))
        ));
        let cli = Cli::try_parse_from([
            "stackroute",
            "so",
            "--net",
            "/nonexistent/a",
            "--trips",
            "/nonexistent/b",
        ])
        .unwrap();
        assert_eq!(run(&cli), EXIT_FAILURE);
    }

    #[test]
    fn rejects_bad_numbers() {
        let cli =
            Cli::try_parse_from(["stackroute", "so", "--net", "a", "--trips", "b", "--aec=-1"])
                .unwrap();
        assert!(matches!(
            execute(&cli.config, &cli.command),
            Err(Error::Usage(_))
        ));
    }
}
