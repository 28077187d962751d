//! `msfem`: offline basis construction, online solves and studies driven by
//! an experiment config file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use msfem::artifact::{load_artifact, save_artifact};
use msfem::basis::{build_trial_space, BuildOptions, OfflineArtifact};
use msfem::coefficient::CoefficientSpec;
use msfem::config::{parse_config, ExperimentConfig};
use msfem::fem::FineField;
use msfem::solve::{reference_solve, run_online, REPORT_HEADER};
use msfem::studies::{
    basis_count_stats, centered_regions, convergence_study, forcing_ratio, local_operator_svd, log_log_slope,
    CONVERGENCE_HEADER,
};
use msfem::{CoefficientField, Error, ErrorClass, TwoLevelMesh};

#[derive(Parser, Debug)]
#[command(name = "msfem", version, about = "Multiscale finite elements with optimal local bases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact path (written by `offline`, read by `online` and `info`).
    #[arg(long, global = true)]
    artifact: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config's `threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Add the per-cell bubble correction to the online solution.
    #[arg(long, global = true)]
    bubble: bool,
    /// Write the fine solution as `x,y,value` rows.
    #[arg(long, global = true)]
    dump: bool,
    /// Random-field seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build the trial space and write the artifact plus edge spectra.
    Offline,
    /// Solve against a stored artifact.
    Online,
    /// Fine-mesh reference solve.
    Reference,
    /// Singular values of the local solution operator.
    StudySvd,
    /// Errors against coarse size.
    StudyConvergence,
    /// Coarse forcing approximation ratio.
    #[command(alias = "study-lemma31")]
    StudyForcingRatio,
    /// Summarize the config and, with --artifact, the artifact.
    Info,
}

impl Command {
    fn stage(self) -> &'static str {
        match self {
            Command::Offline => "offline",
            Command::Online => "online",
            Command::Reference => "reference",
            Command::StudySvd => "study-svd",
            Command::StudyConvergence => "study-convergence",
            Command::StudyForcingRatio => "study-forcing-ratio",
            Command::Info => "info",
        }
    }
}

struct Failure {
    stage: &'static str,
    error: Error,
}

impl Failure {
    fn new(stage: &'static str, error: impl Into<Error>) -> Self {
        Failure {
            stage,
            error: error.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.error.class() {
            ErrorClass::Config => 2,
            ErrorClass::Numeric => 3,
            ErrorClass::Io => 4,
        }
    }

    fn line(&self) -> String {
        let kind = match self.error.class() {
            ErrorClass::Config => "config",
            ErrorClass::Numeric => "numeric",
            ErrorClass::Io => "io",
        };
        let mut s = format!("error stage={} kind={kind}", self.stage);
        if let Some(site) = self.error.site() {
            let _ = write!(s, " {site}");
        }
        let mut inner = &self.error;
        while let Error::At { source, .. } = inner {
            inner = source;
        }
        let msg = inner.to_string().replace('"', "'").replace('\n', " ");
        let _ = write!(s, " msg=\"{msg}\"");
        s
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::new("config", Error::InvalidArgument("--config is required".into())))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::new("config", e))?;
    let cfg = parse_config(&text).map_err(|e| Failure::new("config", e))?;
    Ok(match cli.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let stage = cli.command.stage();
    let threads = cli.threads.unwrap_or(cfg.threads);
    if threads == 0 {
        return Err(Failure::new(stage, Error::InvalidArgument("--threads must be at least 1".into())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::new(stage, Error::InvalidArgument(e.to_string())))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output));
    pool.install(|| {
        let ctx = Ctx { cli, cfg: &cfg, out };
        match cli.command {
            Command::Offline => ctx.offline(),
            Command::Online => ctx.online(),
            Command::Reference => ctx.reference(),
            Command::StudySvd => ctx.study_svd(),
            Command::StudyConvergence => ctx.study_convergence(),
            Command::StudyForcingRatio => ctx.study_forcing_ratio(),
            Command::Info => ctx.info(),
        }
        .map_err(|e| Failure::new(stage, e))
    })
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: &'a ExperimentConfig,
    out: PathBuf,
}

impl Ctx<'_> {
    fn mesh(&self) -> msfem::Result<(TwoLevelMesh, CoefficientField)> {
        let mesh = TwoLevelMesh::new(self.cfg.nc, self.cfg.nf)?;
        let a = CoefficientField::from_spec(&mesh, &self.cfg.coefficient)?;
        Ok((mesh, a))
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.out.join(format!("{}_{suffix}", self.cfg.id))
    }

    fn artifact_path(&self) -> PathBuf {
        self.cli
            .artifact
            .clone()
            .unwrap_or_else(|| self.out.join(format!("{}.msba", self.cfg.id)))
    }

    fn write(&self, path: &Path, contents: &str) -> msfem::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, contents)?;
        Ok(())
    }

    fn offline(&self) -> msfem::Result<()> {
        let (mesh, a) = self.mesh()?;
        let opts = BuildOptions {
            eps: self.cfg.resolved_eps(),
            interp_kind: self.cfg.interp_kind,
            include_edge_basis: self.cfg.include_edge_basis,
        };
        let started = Instant::now();
        let build = build_trial_space(&mesh, &a, &opts)?;
        let seconds = started.elapsed().as_secs_f64();
        let path = self.artifact_path();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        save_artifact(&build.artifact, &path)?;
        let mut csv = String::from("edge_id,k,sigma\n");
        for e in &build.edges {
            for (k, s) in e.sigma.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{}", e.edge, k + 1, s);
            }
        }
        self.write(&self.path("spectra.csv"), &csv)?;
        eprintln!(
            "offline id={} n_basis={} kbar_e={} seconds={seconds:.3} artifact={}",
            self.cfg.id,
            build.artifact.n_basis(),
            build.artifact.kbar_e(),
            path.display()
        );
        Ok(())
    }

    fn check_artifact(&self, art: &OfflineArtifact, mesh: &TwoLevelMesh) -> msfem::Result<()> {
        art.check_mesh(mesh)
            .map_err(|e| Error::InvalidArgument(format!("artifact does not match the config mesh: {e}")))?;
        if art.coefficient_hash != self.cfg.coefficient.hash() {
            return Err(Error::InvalidArgument("artifact was built for a different coefficient".into()));
        }
        Ok(())
    }

    fn online(&self) -> msfem::Result<()> {
        let path = self
            .cli
            .artifact
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("online needs --artifact".into()))?;
        let (mesh, a) = self.mesh()?;
        let art = load_artifact(path)?;
        self.check_artifact(&art, &mesh)?;
        let f = self.cfg.forcing_on(&mesh);
        let run = run_online(&self.cfg.id, &art, &mesh, &a, &f, self.cli.bubble, None)?;
        self.write(&self.path("report.csv"), &format!("{REPORT_HEADER}\n{}\n", run.report.csv_row()))?;
        if self.cli.dump {
            let field = run.corrected.as_ref().unwrap_or(&run.solution.field);
            self.write(&self.path("solution.csv"), &dump(&mesh, field))?;
        }
        eprintln!(
            "online id={} offline_reused=true artifact={} n_basis={} online_seconds={:.6}",
            self.cfg.id,
            path.display(),
            run.report.n_basis,
            run.report.online_seconds
        );
        Ok(())
    }

    fn reference(&self) -> msfem::Result<()> {
        let (mesh, a) = self.mesh()?;
        let u = reference_solve(&mesh, &a, &self.cfg.forcing_on(&mesh))?;
        self.write(&self.path("reference.csv"), &dump(&mesh, &u))
    }

    fn study_svd(&self) -> msfem::Result<()> {
        let (mesh, a) = self.mesh()?;
        let (d, w) = centered_regions(&mesh)?;
        let grid = self.cfg.svd_grid.unwrap_or(self.cfg.nc);
        let mut csv = String::from("label,k,sigma\n");
        let mut specs = vec![(a, self.cfg.coefficient.kind())];
        if !matches!(self.cfg.coefficient, CoefficientSpec::Constant { c } if c == 1.0) {
            specs.push((msfem::coefficient::constant_field(&mesh, 1.0)?, "constant"));
        }
        for (field, label) in specs {
            let mut table = local_operator_svd(&mesh, &field, &d, &w, grid, self.cfg.svd_cap)?;
            table.label = label.to_string();
            for row in table.csv_rows() {
                csv.push_str(&row);
                csv.push('\n');
            }
        }
        self.write(&self.path("svd.csv"), &csv)
    }

    fn study_convergence(&self) -> msfem::Result<()> {
        let rows = convergence_study(
            self.cfg.nf,
            &self.cfg.convergence_nc,
            &self.cfg.coefficient,
            &|m| self.cfg.forcing_on(m),
            self.cfg.interp_kind,
            self.cfg.include_edge_basis,
        )?;
        let mut csv = format!("{CONVERGENCE_HEADER}\n");
        for r in &rows {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        self.write(&self.path("convergence.csv"), &csv)?;
        let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let col = |i: usize| rows.iter().map(|r| r.errors[i]).collect::<Vec<_>>();
        let fmt = |s: Option<f64>| s.map_or("none".to_string(), |v| format!("{v:.3}"));
        eprintln!(
            "slopes E_a_ms={} E_l2_ms={}",
            fmt(log_log_slope(&h, &col(0))),
            fmt(log_log_slope(&h, &col(2)))
        );
        Ok(())
    }

    fn study_forcing_ratio(&self) -> msfem::Result<()> {
        let mut csv = String::from("Nc,ratio\n");
        for &nc in &self.cfg.ratio_nc {
            let mesh = TwoLevelMesh::new(nc, self.cfg.nf)?;
            let r = forcing_ratio(&mesh, &self.cfg.ratio_forcing_on(&mesh))?;
            let _ = writeln!(csv, "{nc},{r}");
        }
        self.write(&self.path("forcing_ratio.csv"), &csv)
    }

    fn info(&self) -> msfem::Result<()> {
        let c = self.cfg;
        println!("id={} nc={} nf={} eps={}", c.id, c.nc, c.nf, c.resolved_eps());
        println!(
            "interp_kind={} include_edge_basis={} coefficient={} forcing={}",
            c.interp_kind.as_str(),
            c.include_edge_basis,
            c.coefficient.canonical(),
            c.forcing
        );
        if let Some(path) = &self.cli.artifact {
            let art = load_artifact(path)?;
            let (kbar, hist) = basis_count_stats(&art);
            println!(
                "artifact nc={} nf={} eps={} n_basis={} n_nodal={} kbar_e={kbar}",
                art.nc,
                art.nf,
                art.eps,
                art.n_basis(),
                art.n_nodal()
            );
            for (k, n) in hist {
                println!("edges_with_{k}={n}");
            }
        }
        Ok(())
    }
}

fn dump(mesh: &TwoLevelMesh, u: &FineField) -> String {
    let mut s = String::from("x,y,value\n");
    for (n, v) in u.values().iter().enumerate() {
        let p = mesh.node_coords(n);
        let _ = writeln!(s, "{},{},{}", p[0], p[1], v);
    }
    s
}
