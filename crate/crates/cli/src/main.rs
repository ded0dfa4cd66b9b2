//! `surfjet` command-line driver.
//!
//! Exit codes: 0 on success, 1 on invalid input or I/O errors, 2 when some
//! vertex fits failed (outputs are still written, with failures marked).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surfjet::fitting::FitConfig;
use surfjet::harness::{
    default_base_level, estimate_all, generate_mesh, metric_index, run_experiment, write_per_vertex_csv,
    ExperimentConfig, HarnessError, MeshSpec, Rate, Summary, METRICS,
};
use surfjet::mesh::{load_mesh, write_off, MeshFormat, RingLevel};
use surfjet::oracle::{GraphStyle, Surface};

#[derive(Debug, Parser)]
#[command(name = "surfjet", version, about = "Normal and curvature estimation on triangle meshes by local polynomial fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate normals and curvatures at every vertex of a mesh file.
    Estimate {
        /// Input mesh (.off or .obj).
        mesh: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        /// Per-vertex CSV output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Error norms and convergence rates over a generated refinement hierarchy.
    Convergence {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Number of refinement levels.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Generator level of the coarsest mesh [default: 2 for the sphere, 0 otherwise].
        #[arg(long)]
        base_level: Option<usize>,
        /// Degrees to run, as `a..b` (inclusive) or a single degree.
        #[arg(long, default_value = "1..4", value_parser = parse_degrees)]
        degrees: Degrees,
        #[command(flatten)]
        switches: SwitchArgs,
        /// Output directory for the summary and per-vertex CSV files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a generated test mesh as OFF.
    Genmesh {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Generator refinement level.
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Fitting degree, 1 to 6.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[command(flatten)]
    switches: SwitchArgs,
}

#[derive(Debug, Args)]
struct SwitchArgs {
    /// Refit the fitted normals for a more accurate Hessian.
    #[arg(long)]
    iterative: bool,
    /// Disable distance/normal weighting.
    #[arg(long)]
    no_weights: bool,
    /// Disable the condition-number safeguard and ring enlargement.
    #[arg(long)]
    no_conditioning: bool,
    /// Condition number above which the fit degree is reduced.
    #[arg(long, default_value_t = 1e3)]
    cond_threshold: f64,
    /// Largest neighborhood ring, in steps of 0.5.
    #[arg(long, default_value_t = RingLevel::MAX.value())]
    ring_cap: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Sphere,
    Torus,
    F1,
    F2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StyleArg {
    Irregular,
    Semiregular,
}

#[derive(Debug, Args)]
struct MeshArgs {
    #[arg(long, value_enum)]
    surface: SurfaceArg,
    /// Graph surfaces: triangulation style.
    #[arg(long, value_enum, default_value = "irregular")]
    style: StyleArg,
    /// Torus: jitter the parameter grid and mix diagonals.
    #[arg(long)]
    jitter: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone)]
struct Degrees(Vec<usize>);

fn parse_degrees(s: &str) -> Result<Degrees, String> {
    let bad = || format!("expected a degree or a range `a..b`, got `{s}`");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
        }
        None => {
            let d = s.trim().parse().map_err(|_| bad())?;
            (d, d)
        }
    };
    if lo > hi {
        return Err(format!("empty degree range `{s}`"));
    }
    Ok(Degrees((lo..=hi).collect()))
}

impl SwitchArgs {
    fn fit_config(&self, degree: usize) -> Result<FitConfig, String> {
        let ring_cap = RingLevel::new(self.ring_cap)
            .ok_or_else(|| format!("ring cap must be a multiple of 0.5 in [1, {}]", RingLevel::MAX.value()))?;
        let config = FitConfig {
            degree,
            weighting: !self.no_weights,
            iterative: self.iterative,
            conditioning: !self.no_conditioning,
            cond_threshold: self.cond_threshold,
            ring_cap,
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

impl MeshArgs {
    fn spec(&self) -> MeshSpec {
        let surface = match self.surface {
            SurfaceArg::Sphere => Surface::UNIT_SPHERE,
            SurfaceArg::Torus => Surface::TORUS,
            SurfaceArg::F1 => Surface::F1,
            SurfaceArg::F2 => Surface::F2,
        };
        let style = match self.style {
            StyleArg::Irregular => GraphStyle::Irregular,
            StyleArg::Semiregular => GraphStyle::Semiregular,
        };
        MeshSpec { surface, style, torus_jitter: self.jitter, seed: self.seed }
    }
}

enum Failure {
    Invalid(String),
    FitFailures(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::FitFailures(_) => Failure::FitFailures(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn estimate(mesh_path: &Path, fit: &FitArgs, out: &Path) -> Result<(), Failure> {
    let config = fit.switches.fit_config(fit.degree).map_err(Failure::Invalid)?;
    let format = MeshFormat::from_path(mesh_path)
        .ok_or_else(|| Failure::Invalid(format!("{}: unknown mesh format (use .off or .obj)", mesh_path.display())))?;
    let mesh = load_mesh(mesh_path, format).map_err(|e| Failure::Invalid(e.to_string()))?;
    let estimates = estimate_all(&mesh, &config)?;
    write_per_vertex_csv(out, &mesh, &estimates)?;
    eprintln!(
        "{} vertices, degree {}, {:.3} s -> {}",
        mesh.num_vertices(),
        config.degree,
        estimates.wall_time_s,
        out.display()
    );
    estimates.into_complete()?;
    Ok(())
}

fn fmt_rate(rate: Option<Rate>) -> String {
    match rate {
        Some(Rate::Value(r)) => format!("{r:7.3}"),
        Some(Rate::Exact) => "  exact".into(),
        None => "      -".into(),
    }
}

fn print_summary(summary: &Summary) {
    let metrics = ["normal_l2", "kappaH_l2", "kappaG_l2", "kappaH_linf", "kappaG_linf"];
    print!("{:>3} {:>5} {:>8} {:>6}", "d", "level", "vertices", "failed");
    for m in metrics {
        print!(" {m:>11} {:>7}", "rate");
    }
    println!();
    for row in &summary.rows {
        let r = &row.report;
        print!("{:>3} {:>5} {:>8} {:>6}", row.degree, row.level, r.vertex_count, r.failed_count);
        for m in metrics {
            let i = metric_index(m).expect("known metric");
            print!(" {:11.4e} {}", METRICS[i].1(r), fmt_rate(row.rates[i]));
        }
        println!();
    }
}

fn convergence(
    mesh: &MeshArgs,
    levels: usize,
    base_level: Option<usize>,
    degrees: &[usize],
    switches: &SwitchArgs,
    out: &Path,
) -> Result<(), Failure> {
    let spec = mesh.spec();
    let mut config = ExperimentConfig::new(spec, levels, degrees.to_vec());
    config.base_level = base_level.unwrap_or_else(|| default_base_level(&spec.surface));
    // The degree is overridden per run; validate the remaining options now.
    config.fit = switches.fit_config(degrees[0]).map_err(Failure::Invalid)?;
    config.out_dir = Some(out.to_path_buf());
    let summary = run_experiment(&config)?;
    print_summary(&summary);
    let failed: usize = summary.rows.iter().map(|r| r.report.failed_count).sum();
    if failed > 0 {
        return Err(Failure::FitFailures(format!("{failed} vertex fits failed; see the per-vertex CSV files")));
    }
    Ok(())
}

fn genmesh(mesh: &MeshArgs, level: usize, out: &Path) -> Result<(), Failure> {
    let m = generate_mesh(&mesh.spec(), level)?;
    write_text(out, &write_off(&m))?;
    eprintln!("{} vertices, {} faces -> {}", m.num_vertices(), m.num_faces(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Estimate { mesh, fit, out } => estimate(mesh, fit, out),
        Command::Convergence { mesh, levels, base_level, degrees, switches, out } => {
            convergence(mesh, *levels, *base_level, &degrees.0, switches, out)
        }
        Command::Genmesh { mesh, level, out } => genmesh(mesh, *level, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::FitFailures(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
