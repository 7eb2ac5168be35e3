use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stable_alloc::analysis::{phase_stats, territory_geometry, Adjacency};
use stable_alloc::io::{
    self, load_allocation, load_config, render, save_config, sweep, write_ppm, write_sweep_csv,
    ExperimentConfig, RenderSpec, RenderStyle, SourceSpec, SweepAxes,
};
use stable_alloc::oracle::{oracle_deferred_acceptance, oracle_enumerate, Proposer, TinyInstance};
use stable_alloc::verifier::{validate, verify_stability};
use stable_alloc::{
    load_centers, save_centers, Algorithm, Appetite, CenterSet, Error, Grid, Region, RegionKind,
    Result,
};

/// Stable allocations of Lebesgue measure to random centers.
#[derive(Parser)]
#[command(name = "stable-alloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample centers and write centers.csv
    Generate(ExperimentArgs),
    /// Allocate, verify and write all artifacts
    Allocate(ExperimentArgs),
    /// Check a saved allocation for unstable pairs and capacity violations
    Verify(SavedArgs),
    /// Phase statistics and territory geometry of a saved allocation
    Stats(SavedArgs),
    /// Render a saved planar allocation as a PPM image
    Render(RenderArgs),
    /// Run a grid of parameters over several seeds
    Sweep(SweepArgs),
    /// Brute-force reference on a tiny instance (JSON distance matrix)
    #[command(hide = true)]
    Oracle { instance: PathBuf },
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    region: Option<RegionKind>,
    /// Side lengths, e.g. 32,32
    #[arg(long)]
    sides: Option<String>,
    /// Cells per axis, e.g. 512,512
    #[arg(long)]
    resolution: Option<String>,
    /// Poisson intensity
    #[arg(long, group = "source")]
    lambda: Option<f64>,
    /// Exactly this many uniform centers
    #[arg(long, group = "source")]
    uniform: Option<usize>,
    /// Lattice spacing with optional jitter, e.g. 1.0,0.1
    #[arg(long, group = "source")]
    lattice: Option<String>,
    /// CSV file of centers
    #[arg(long, group = "source")]
    centers: Option<PathBuf>,
    /// Appetite: a non-negative number or `inf`
    #[arg(long, value_parser = parse_appetite)]
    alpha: Option<Appetite>,
    #[arg(long, value_parser = parse_algo)]
    algo: Option<Algorithm>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an image: `ppm` or `ppm:<pixels per unit>`
    #[arg(long)]
    render: Option<String>,
}

#[derive(Args)]
struct SavedArgs {
    /// allocation.csv; its .json sidecar must sit next to it
    #[arg(long)]
    allocation: PathBuf,
    /// centers.csv the allocation was computed from
    #[arg(long)]
    centers: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    saved: SavedArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16.0)]
    ppu: f64,
    #[arg(long, value_parser = parse_style, default_value = "flat")]
    style: RenderStyle,
    #[arg(long, default_value_t = 0)]
    palette_seed: u64,
    #[arg(long, default_value_t = 0.25)]
    annulus_width: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: ExperimentArgs,
    /// Appetites, e.g. 0.5,1,2,inf
    #[arg(long)]
    alphas: Option<String>,
    /// Poisson intensities, e.g. 0.5,1
    #[arg(long)]
    lambdas: Option<String>,
    /// Resolutions, e.g. 64x64,128x128
    #[arg(long)]
    resolutions: Option<String>,
    /// Seed list `1,2,3` or half-open range `0..10`
    #[arg(long)]
    seeds: String,
    /// Aggregated CSV path
    #[arg(long = "csv")]
    csv: PathBuf,
}

fn parse_kind(s: &str) -> Result<RegionKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_appetite(s: &str) -> Result<Appetite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_style(s: &str) -> Result<RenderStyle, String> {
    match s {
        "flat" => Ok(RenderStyle::Flat),
        "annuli" => Ok(RenderStyle::Annuli),
        _ => Err(format!("unknown style `{s}`")),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn list<T: std::str::FromStr>(s: &str, sep: char, what: &str) -> Result<Vec<T>> {
    s.split(sep)
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| invalid(format!("bad {what} `{v}`")))
        })
        .collect()
}

fn parse_render(s: &str) -> Result<RenderSpec> {
    let mut spec = RenderSpec::default();
    match s.split_once(':') {
        None if s == "ppm" => {}
        Some(("ppm", ppu)) => spec.pixels_per_unit = list::<f64>(ppu, ',', "pixels per unit")?[0],
        _ => return Err(invalid(format!("unsupported render format `{s}`"))),
    }
    Ok(spec)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (list(a, ',', "seed")?[0], list(b, ',', "seed")?[0]);
        return Ok((a..b).collect());
    }
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    list(s, ',', "seed")
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => {
                let sides = self
                    .sides
                    .as_deref()
                    .ok_or_else(|| invalid("--sides is required without --config"))?;
                let resolution = self
                    .resolution
                    .as_deref()
                    .ok_or_else(|| invalid("--resolution is required without --config"))?;
                ExperimentConfig {
                    region: Region::new(
                        self.region.unwrap_or(RegionKind::Torus),
                        list(sides, ',', "side")?,
                    )?,
                    resolution: list(resolution, ',', "resolution")?,
                    source: SourceSpec::Poisson { intensity: 1.0 },
                    appetite: Appetite::Finite(1.0),
                    algorithm: Algorithm::default(),
                    seed: 0,
                    out_dir: PathBuf::from("out"),
                    render: None,
                }
            }
        };
        if self.region.is_some() || self.sides.is_some() {
            let kind = self.region.unwrap_or(config.region.kind());
            let sides = match &self.sides {
                Some(s) => list(s, ',', "side")?,
                None => config.region.sides().to_vec(),
            };
            config.region = Region::new(kind, sides)?;
        }
        if let Some(r) = &self.resolution {
            config.resolution = list(r, ',', "resolution")?;
        }
        if let Some(intensity) = self.lambda {
            config.source = SourceSpec::Poisson { intensity };
        }
        if let Some(count) = self.uniform {
            config.source = SourceSpec::Uniform { count };
        }
        if let Some(l) = &self.lattice {
            let v: Vec<f64> = list(l, ',', "lattice parameter")?;
            config.source = match v[..] {
                [spacing] => SourceSpec::Lattice {
                    spacing,
                    jitter: 0.0,
                },
                [spacing, jitter] => SourceSpec::Lattice { spacing, jitter },
                _ => return Err(invalid("--lattice takes spacing[,jitter]")),
            };
        }
        if let Some(path) = &self.centers {
            config.source = SourceSpec::File { path: path.clone() };
        }
        if let Some(a) = self.alpha {
            config.appetite = a;
        }
        if let Some(a) = self.algo {
            config.algorithm = a;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.out_dir = o.clone();
        }
        if let Some(r) = &self.render {
            config.render = Some(parse_render(r)?);
        }
        config.validate()?;
        Ok(config)
    }
}

fn print_json(value: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn load_saved(args: &SavedArgs) -> Result<(Grid, CenterSet, io::AllocationRecord)> {
    let record = load_allocation(&args.allocation)?;
    let grid = Grid::new(record.meta.region.clone(), record.meta.resolution.clone())?;
    let centers = load_centers(&args.centers, grid.region())?;
    Ok((grid, centers, record))
}

fn generate(args: &ExperimentArgs) -> Result<u8> {
    let config = args.config()?;
    let centers = io::build_centers(&config)?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::Io {
        path: config.out_dir.clone(),
        source: e,
    })?;
    save_centers(&centers, config.out_dir.join("centers.csv"))?;
    save_config(&config, config.out_dir.join("config.json"))?;
    print_json(&json!({ "centers": centers.len(), "intensity": centers.intensity() }));
    Ok(0)
}

fn allocate(args: &ExperimentArgs) -> Result<u8> {
    let config = args.config()?;
    let outcome = io::run(&config)?;
    print_json(&serde_json::to_value(&outcome.stats)?);
    Ok(if outcome.stats.verified() { 0 } else { 2 })
}

fn verify(args: &SavedArgs) -> Result<u8> {
    let (grid, centers, record) = load_saved(args)?;
    let alloc = record.attach(&grid, &centers)?;
    let pairs = verify_stability(&alloc)?;
    let report = validate(&alloc);
    let ok = pairs.is_empty() && report.passed;
    print_json(&json!({
        "stable": pairs.is_empty(),
        "unstable_pair_count": pairs.len(),
        "unstable_pairs": pairs.iter().take(100).collect::<Vec<_>>(),
        "validation": report,
    }));
    Ok(if ok { 0 } else { 2 })
}

fn stats(args: &SavedArgs) -> Result<u8> {
    let (grid, centers, record) = load_saved(args)?;
    let alloc = record.attach(&grid, &centers)?;
    print_json(&json!({
        "phase": phase_stats(&alloc),
        "territories": territory_geometry(&alloc, Adjacency::Face),
    }));
    Ok(0)
}

fn render_cmd(args: &RenderArgs) -> Result<u8> {
    let (grid, centers, record) = load_saved(&args.saved)?;
    let alloc = record.attach(&grid, &centers)?;
    let spec = RenderSpec {
        pixels_per_unit: args.ppu,
        palette_seed: args.palette_seed,
        style: args.style,
        annulus_width: args.annulus_width,
        ..RenderSpec::default()
    };
    write_ppm(&render(&alloc, &spec)?, &args.out)?;
    Ok(0)
}

fn sweep_cmd(args: &SweepArgs) -> Result<u8> {
    let base = args.base.config()?;
    let axes = SweepAxes {
        appetites: match &args.alphas {
            Some(s) => s.split(',').map(str::parse).collect::<Result<_>>()?,
            None => Vec::new(),
        },
        intensities: match &args.lambdas {
            Some(s) => list(s, ',', "intensity")?,
            None => Vec::new(),
        },
        resolutions: match &args.resolutions {
            Some(s) => s
                .split(',')
                .map(|r| list(r, 'x', "resolution"))
                .collect::<Result<_>>()?,
            None => Vec::new(),
        },
    };
    let result = sweep(&base, &axes, &parse_seeds(&args.seeds)?)?;
    write_sweep_csv(&result, &args.csv)?;
    let failures: usize = result.summaries.iter().map(|s| s.failures).sum();
    print_json(&json!({ "runs": result.runs.len(), "failures": failures }));
    Ok(0)
}

fn oracle(path: &Path) -> Result<u8> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let inst: TinyInstance = serde_json::from_str(&text)?;
    print_json(&json!({
        "sites_propose": oracle_deferred_acceptance(&inst, Proposer::Sites),
        "centers_propose": oracle_deferred_acceptance(&inst, Proposer::Centers),
        "stable": oracle_enumerate(&inst),
    }));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Allocate(a) => allocate(a),
        Command::Verify(a) => verify(a),
        Command::Stats(a) => stats(a),
        Command::Render(a) => render_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Oracle { instance } => oracle(instance),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
