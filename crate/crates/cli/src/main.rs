use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use torusflow::certify::{certify_all, report_json};
use torusflow::classify::{code_name, decompose_field, ClassifierParams, GridPartition};
use torusflow::construct::{apply_x3_holonomy, build_blowup, build_denjoy};
use torusflow::poincare::suspend;
use torusflow::presets::{flow_preset, map_preset, parse_real, x3_demo_box};
use torusflow::report::{portrait_ppm, portrait_svg};
use torusflow::suite::{run_suite, SuiteConfig};
use torusflow::{Error, SurfaceDescriptor, TorusPoint, VectorFieldSpec};

const EXIT_CERTIFICATE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CONSTRUCTION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "torusflow", version, about = "Orbit classification and certificates for flows on the torus")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Decompose the seed grid and write the partition JSON.
    Classify(Common),
    /// Run every certificate and write the report JSON.
    Certify(Common),
    /// Write a P6 pixmap and an SVG of the partition.
    Portrait {
        #[command(flatten)]
        common: Common,
        /// Read this partition JSON instead of decomposing.
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Run the acceptance corpus.
    Suite(Common),
    /// Build a flow and write its spec JSON.
    Construct {
        kind: Construction,
        #[command(flatten)]
        common: Common,
        /// Rotation number or slope ratio (`phi`, `sqrt2`, or a decimal).
        #[arg(long, default_value = "phi")]
        rho: String,
        /// Truncation order.
        #[arg(long)]
        order: Option<usize>,
        /// Blow-up ball margin.
        #[arg(long, default_value_t = 0.1)]
        r_margin: f64,
        /// Denjoy weight scale.
        #[arg(long, default_value_t = 0.5)]
        weight_scale: f64,
        /// Map preset for `suspension`.
        #[arg(long, default_value = "rotation-phi")]
        map: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Construction {
    Blowup,
    Denjoy,
    Suspension,
    X3Box,
}

#[derive(Args, Clone)]
struct Common {
    /// `preset:NAME`, a bare preset name, or a flow-spec JSON path.
    #[arg(long)]
    flow: Option<String>,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 2000.0)]
    horizon: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol_per: Option<f64>,
    #[arg(long)]
    tol_sing: Option<f64>,
    #[arg(long)]
    delta_cover: Option<f64>,
    #[arg(long)]
    delta_closure: Option<f64>,
}

/// Validated run configuration.
struct RunConfig {
    params: ClassifierParams,
    delta_cover: f64,
    out: PathBuf,
    seed: u64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Construction(_) | Error::StepUnderflow { .. } | Error::NoReturn(_) | Error::Decomposition(_) => {
                EXIT_CONSTRUCTION
            }
            Error::Io(_) => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.into() }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

impl Common {
    fn config(&self) -> Result<RunConfig, Failure> {
        if self.resolution < 16 {
            return Err(config_error(format!("resolution {} below 16", self.resolution)));
        }
        let overrides = [self.tol_per, self.tol_sing, self.delta_cover, self.delta_closure];
        if overrides.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(config_error("tolerance overrides must be positive"));
        }
        let mut params = ClassifierParams::with_resolution(self.resolution);
        params.horizon = self.horizon;
        params.tol_per = self.tol_per.unwrap_or(params.tol_per);
        params.tol_sing = self.tol_sing.unwrap_or(params.tol_sing);
        params.delta_closure = self.delta_closure.unwrap_or(params.delta_closure);
        params.validate()?;
        let delta_cover = self.delta_cover.unwrap_or(torusflow::certify::DELTA_COVER);
        if delta_cover >= 1.0 {
            return Err(config_error("delta-cover must be below 1"));
        }
        if let Some(w) = self.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build_global()
                .map_err(|e| config_error(format!("worker pool: {e}")))?;
        }
        Ok(RunConfig { params, delta_cover, out: self.out.clone(), seed: self.seed })
    }

    fn flow(&self) -> Result<VectorFieldSpec, Failure> {
        let source = self.flow.as_deref().ok_or_else(|| config_error("--flow is required"))?;
        if let Some(name) = source.strip_prefix("preset:") {
            return Ok(flow_preset(name)?);
        }
        let path = Path::new(source);
        if source.ends_with(".json") || path.exists() {
            let text = fs::read_to_string(path).map_err(|e| config_error(format!("{source}: {e}")))?;
            let spec: VectorFieldSpec =
                serde_json::from_str(&text).map_err(|e| config_error(format!("{source}: {e}")))?;
            spec.compile()?;
            return Ok(spec);
        }
        Ok(flow_preset(source)?)
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn decompose(common: &Common, cfg: &RunConfig) -> Result<GridPartition, Failure> {
    let spec = common.flow()?;
    let field = spec.compile()?;
    Ok(decompose_field(&field, &cfg.params)?)
}

fn summary(p: &GridPartition) -> String {
    let counts = p.counts();
    let mut s = format!("resolution {} horizon {}\n", p.resolution, p.horizon);
    for (code, count) in counts.iter().enumerate() {
        s.push_str(&format!("{:<20}{count}\n", code_name(code as u8)));
    }
    s
}

fn classify(common: &Common) -> Result<u8, Failure> {
    let cfg = common.config()?;
    let p = decompose(common, &cfg)?;
    write(&cfg.out, "partition.json", p.to_json().as_bytes())?;
    print!("{}", summary(&p));
    Ok(0)
}

fn certify(common: &Common) -> Result<u8, Failure> {
    let cfg = common.config()?;
    let p = decompose(common, &cfg)?;
    let certs = certify_all(&p, SurfaceDescriptor::TORUS, cfg.delta_cover)?;
    write(&cfg.out, "certificates.json", report_json(&certs).as_bytes())?;
    let mut failed = Vec::new();
    for c in &certs {
        println!("{:<24}{:?}", c.name, c.verdict);
        if c.failed() {
            failed.push(c.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed: {}", failed.join(", "));
        Ok(EXIT_CERTIFICATE)
    }
}

fn portrait(common: &Common, partition: Option<&Path>) -> Result<u8, Failure> {
    let cfg = common.config()?;
    let p = match partition {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            GridPartition::from_json(&text)?
        }
        None => decompose(common, &cfg)?,
    };
    let ppm = write(&cfg.out, "portrait.ppm", &portrait_ppm(&p))?;
    let svg = write(&cfg.out, "portrait.svg", portrait_svg(&p, true).as_bytes())?;
    println!("{}\n{}", ppm.display(), svg.display());
    Ok(0)
}

fn suite(common: &Common) -> Result<u8, Failure> {
    let cfg = common.config()?;
    let suite_cfg = SuiteConfig {
        resolution: cfg.params.resolution,
        horizon: cfg.params.horizon,
        tol_per: cfg.params.tol_per,
        tol_sing: cfg.params.tol_sing,
        delta_closure: cfg.params.delta_closure,
        delta_cover: cfg.delta_cover,
        seed: cfg.seed,
        presets: common
            .flow
            .as_ref()
            .map(|f| f.split(';').map(|s| s.strip_prefix("preset:").unwrap_or(s).to_string()).collect()),
    };
    let report = run_suite(&suite_cfg, &mut |line| eprintln!("{line}"))?;
    write(&cfg.out, "suite.json", report.to_json().as_bytes())?;
    for c in &report.criteria {
        println!("{:>2} {} {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    Ok(if report.passed { 0 } else { EXIT_CERTIFICATE })
}

fn construct(
    kind: Construction,
    common: &Common,
    rho: &str,
    order: Option<usize>,
    r_margin: f64,
    weight_scale: f64,
    map: &str,
) -> Result<u8, Failure> {
    let rho = parse_real(rho)?;
    let spec = match kind {
        Construction::Blowup => build_blowup((1.0, rho), TorusPoint::ORIGIN, order.unwrap_or(8), r_margin)?,
        Construction::Denjoy => suspend(&build_denjoy(rho, order.unwrap_or(64), weight_scale)?)?,
        Construction::Suspension => suspend(&map_preset(map)?)?,
        Construction::X3Box => {
            let base = match &common.flow {
                Some(_) => common.flow()?,
                None => VectorFieldSpec::linear(1.0, 0.0),
            };
            apply_x3_holonomy(&base, &x3_demo_box())?
        }
    };
    let path = write(&common.out, "flow.json", spec.to_json().as_bytes())?;
    println!("{}", path.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match &cli.verb {
        Verb::Classify(c) => classify(c),
        Verb::Certify(c) => certify(c),
        Verb::Portrait { common, partition } => portrait(common, partition.as_deref()),
        Verb::Suite(c) => suite(c),
        Verb::Construct { kind, common, rho, order, r_margin, weight_scale, map } => {
            construct(*kind, common, rho, *order, *r_margin, *weight_scale, map)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
