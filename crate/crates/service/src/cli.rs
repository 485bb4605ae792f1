//! Command line front end. Exit codes: 0 on success, 1 with one JSON error
//! line on stderr, 2 for usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexigraph_core::matcher::{MatchParams, VectorSelection};
use lexigraph_core::Workbench;
use serde_json::Value;

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::ops::{load_run_config, run_to_completion, CodeSetRequest, CustomTableRequest, ImportRequest, MatchBatchRequest};

#[derive(Debug, Parser)]
#[command(name = "lexigraph", version, about = "Populate and match a terminology-mapped knowledge graph")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Service settings file (TOML). LEXIGRAPH_* variables override it.
    #[arg(long, global = true, env = "LEXIGRAPH_SETTINGS")]
    pub settings: Option<PathBuf>,
    /// Store snapshot file.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Replay transcript (JSON lines).
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// Answer from a recorded transcript.
    Replay,
    /// No language model; any prompt fails.
    None,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import a terminology from a delimited file or a columnar JSON fixture.
    ImportTerminology {
        #[arg(long)]
        name: String,
        #[arg(long)]
        file: PathBuf,
        /// tab, comma, pipe or a single character.
        #[arg(long)]
        delimiter: Option<String>,
        #[arg(long)]
        header: bool,
    },
    /// Create a code set from a filter over a terminology.
    CreateCodeSet {
        #[arg(long)]
        terminology: String,
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "all")]
        filter: String,
        #[arg(long)]
        expansion_style: Option<String>,
    },
    /// Run relationship population from a run configuration file.
    Run {
        /// Run configuration (JSON or TOML).
        #[arg(long)]
        config: PathBuf,
        /// Report file; defaults to the configuration path with a
        /// `.report.json` extension.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Match one string, or every object of a run, to a code set.
    Match {
        #[arg(long, conflicts_with = "run", required_unless_present = "run")]
        string: Option<String>,
        #[arg(long)]
        run: Option<String>,
        #[arg(long)]
        code_set: String,
        #[arg(long, default_value_t = lexigraph_core::matcher::DEFAULT_TOP_N)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        z: f64,
        /// Write the review export (TSV) for the code set here.
        #[arg(long)]
        review: Option<PathBuf>,
    },
    /// Materialize a query over the store as a named custom table.
    Materialize {
        #[arg(long)]
        name: String,
        #[arg(long)]
        query: String,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Print the store's logical export, or its hash.
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        hash: bool,
    },
    /// Write example inputs (terminology, run configs, transcript, settings).
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

impl GlobalArgs {
    pub fn service_config(&self) -> Result<ServiceConfig, ServiceError> {
        let mut cfg = ServiceConfig::load(self.settings.as_deref())?;
        let wb = &mut cfg.workbench;
        if let Some(s) = &self.store {
            wb.store_path = Some(s.clone());
        }
        if let Some(t) = &self.transcript {
            wb.provider.transcript = Some(t.clone());
        }
        if let Some(m) = &self.model {
            wb.provider.model = m.clone();
        }
        match self.provider {
            Some(ProviderKind::Replay) if wb.provider.transcript.is_none() => {
                return Err(ServiceError::BadRequest("--provider replay needs --transcript".into()));
            }
            Some(ProviderKind::None) => wb.provider.transcript = None,
            _ => {}
        }
        if let Some(t) = &wb.provider.transcript {
            if !t.exists() {
                return Err(ServiceError::config(t, "transcript not found"));
            }
        }
        Ok(cfg)
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn write_file(path: &std::path::Path, body: &str) -> Result<(), ServiceError> {
    std::fs::write(path, body).map_err(|e| ServiceError::config(path, e))
}

/// Executes a parsed command, writing normal output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), ServiceError> {
    let cfg = cli.global.service_config()?;
    let mut say = |s: &str| writeln!(out, "{s}").map_err(|e| ServiceError::Core(lexigraph_core::Error::io("stdout", e)));
    match &cli.command {
        Command::Fixtures { out: dir } => {
            for p in crate::fixtures::write_examples(dir)? {
                say(&p.display().to_string())?;
            }
            return Ok(());
        }
        Command::Serve { bind, static_dir } => {
            let mut cfg = cfg;
            if let Some(b) = bind {
                cfg.bind = b.clone();
            }
            if let Some(d) = static_dir {
                cfg.static_dir = Some(d.clone());
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| lexigraph_core::Error::io("starting runtime", e))?;
            return rt.block_on(crate::http::serve(cfg));
        }
        _ => {}
    }
    let wb = Workbench::open(cfg.workbench)?;
    match &cli.command {
        Command::ImportTerminology {
            name,
            file,
            delimiter,
            header,
        } => {
            if !file.exists() {
                return Err(ServiceError::config(file, "file not found"));
            }
            let req = ImportRequest {
                name: name.clone(),
                path: Some(file.clone()),
                rows: None,
                delimiter: delimiter.clone(),
                has_header: *header,
            };
            say(&pretty(&req.execute(&wb)?))?;
        }
        Command::CreateCodeSet {
            terminology,
            name,
            filter,
            expansion_style,
        } => {
            let req = CodeSetRequest {
                terminology: terminology.clone(),
                name: name.clone(),
                filter: filter.clone(),
                expansion_style: expansion_style.clone(),
            };
            say(&pretty(&req.execute(&wb)?))?;
        }
        Command::Run { config, report } => {
            let run_cfg = load_run_config(config)?;
            let rep = run_to_completion(&wb, &run_cfg, None)?;
            let report_path = report.clone().unwrap_or_else(|| config.with_extension("report.json"));
            let body = serde_json::to_value(&rep).expect("serializable");
            write_file(&report_path, &pretty(&body))?;
            write_file(&report_path.with_extension("log"), &(rep.log.join("\n") + "\n"))?;
            say(&pretty(&body))?;
        }
        Command::Match {
            string,
            run,
            code_set,
            n,
            z,
            review,
        } => {
            let params = MatchParams {
                selection: VectorSelection::default(),
                z: *z,
                n: *n,
            };
            match string {
                Some(s) => {
                    let r = wb.match_one(s, code_set, &params)?;
                    let term = wb.store().find_code_set(code_set)?.terminology_id;
                    for (i, c) in r.ranked.iter().enumerate() {
                        let main = wb
                            .store()
                            .code(&term, &c.code_id)
                            .map(|code| code.main_text().to_string())
                            .unwrap_or_default();
                        say(&format!("{}\t{}\t{:.6}\t{}", i + 1, c.code_id, c.distance, main))?;
                    }
                }
                None => {
                    let req = MatchBatchRequest {
                        code_set: code_set.clone(),
                        run_id: run.clone(),
                        objects: None,
                        params,
                    };
                    let v = req.execute(&wb)?;
                    say(&format!(
                        "matched {} object(s): {} computed, {} reused, {} failed",
                        v["results"].as_array().map_or(0, |a| a.len()),
                        v["computed"],
                        v["reused"],
                        v["failures"].as_array().map_or(0, |a| a.len())
                    ))?;
                }
            }
            if let Some(path) = review {
                write_file(path, &wb.review_export(code_set)?)?;
            }
        }
        Command::Materialize { name, query } => {
            let req = CustomTableRequest {
                name: name.clone(),
                query: query.clone(),
            };
            say(&pretty(&req.execute(&wb)?))?;
        }
        Command::Export { out: file, hash } => {
            let body = if *hash { wb.export_hash() } else { wb.export() };
            match file {
                Some(p) => write_file(p, &body)?,
                None => say(&body)?,
            }
        }
        Command::Serve { .. } | Command::Fixtures { .. } => unreachable!("handled above"),
    }
    Ok(())
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.body().line());
            1
        }
    }
}
