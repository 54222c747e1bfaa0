use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Virtual crime-scene examination server and tools.
///
/// Flags take precedence over environment variables, which take precedence
/// over defaults.
#[derive(Debug, Parser)]
#[command(name = "scenelab", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the asset catalog over TCP and WebSocket until Ctrl-C or SIGTERM.
    Serve(ServeArgs),
    /// Connect to a server and answer its classify requests with the stub detector.
    Worker(WorkerArgs),
    /// Check a scene file and print its objects; optionally install it into the asset root.
    ImportScene(ImportArgs),
    /// Run a detector over an image corpus and report counts, accuracy and timing.
    Bench(BenchArgs),
    /// Write one session's log, replayed configuration and metadata to a directory.
    Export(ExportArgs),
    /// Replay an export, print the configuration, and check it against the stored one.
    Replay(ReplayArgs),
    /// Run the stub detector on one image.
    Detect(DetectArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to bind both listeners to.
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    /// TCP port for framed clients and workers (0 picks a free port).
    #[arg(long, env = "SCENELAB_PORT", default_value_t = 7047)]
    pub port: u16,
    /// HTTP port for the viewer and the `/ws` WebSocket (0 picks a free port).
    #[arg(long, env = "SCENELAB_WS_PORT", default_value_t = 7048)]
    pub ws_port: u16,
    /// Asset root: one `<scene_id>/scene.(obj|gltf|glb)` directory per scene.
    #[arg(long, env = "SCENELAB_ASSETS")]
    pub assets: PathBuf,
    /// Directory holding the action log and saved configurations.
    #[arg(long, env = "SCENELAB_LOG")]
    pub log_dir: PathBuf,
    /// Static viewer build served at `/`.
    #[arg(long)]
    pub viewer: Option<PathBuf>,
    /// Register the stub detector with this manifest at startup.
    #[arg(long)]
    pub stub_manifest: Option<PathBuf>,
    /// Default minimum score for classify requests.
    #[arg(long, default_value_t = 0.5, value_parser = score)]
    pub min_score: f64,
    /// Seconds to wait for a detector before answering backend_timeout.
    #[arg(long, default_value_t = 30.0, value_parser = positive)]
    pub classify_timeout: f64,
    /// Refuse log appends once the log file reaches this size.
    #[arg(long)]
    pub max_log_bytes: Option<u64>,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    /// Server TCP address.
    #[arg(long, default_value = "127.0.0.1:7047")]
    pub server: std::net::SocketAddr,
    /// Stub manifest: image SHA-256 to detections.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Backend id to register as.
    #[arg(long, default_value = "stub")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Scene file (.obj, .gltf or .glb).
    pub file: PathBuf,
    /// Scene id; object ids are `<scene_id>/<name>/<ordinal>`.
    #[arg(long, value_parser = scene_id)]
    pub id: String,
    /// Meters per file unit.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub unit_scale: f64,
    /// Copy the scene (and any external glTF buffers) to `<assets>/<id>/`.
    #[arg(long, requires = "assets")]
    pub install: bool,
    /// Asset root used by --install.
    #[arg(long, env = "SCENELAB_ASSETS")]
    pub assets: Option<PathBuf>,
    /// Replace an installed scene with the same id.
    #[arg(long, requires = "install")]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Hash-keyed answers from a manifest.
    Stub,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AccuracyArg {
    /// Correct detections over all detections.
    PerDetection,
    /// Mean per-image ratio over images with detections.
    PerImage,
}

impl From<AccuracyArg> for scenelab_bench::AccuracyMode {
    fn from(a: AccuracyArg) -> Self {
        match a {
            AccuracyArg::PerDetection => scenelab_bench::AccuracyMode::PerDetection,
            AccuracyArg::PerImage => scenelab_bench::AccuracyMode::PerImage,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Detector to evaluate.
    #[arg(long, value_enum, default_value_t = BackendKind::Stub)]
    pub backend: BackendKind,
    /// Stub manifest: image SHA-256 to detections.
    #[arg(long, required_unless_present_any = ["from_results", "compare"])]
    pub manifest: Option<PathBuf>,
    /// Model name for the report row (defaults to the backend id).
    #[arg(long)]
    pub name: Option<String>,
    /// Directory of PNG images, searched recursively.
    #[arg(long, required_unless_present_any = ["from_results", "compare", "objects"])]
    pub corpus: Option<PathBuf>,
    /// Ground truth: JSON object from corpus-relative image path to class names.
    #[arg(long, required_unless_present_any = ["compare", "objects"])]
    pub truth: Option<PathBuf>,
    /// Drop detections scoring below this.
    #[arg(long, default_value_t = 0.0, value_parser = score)]
    pub min_score: f64,
    /// Evaluate a random subset of this many images.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Seed for --subset.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Images in flight at once.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=256))]
    pub parallelism: u32,
    /// Per-image detector timeout in seconds.
    #[arg(long, default_value_t = 30.0, value_parser = positive)]
    pub timeout: f64,
    /// How accuracy is averaged.
    #[arg(long, value_enum, default_value_t = AccuracyArg::PerDetection)]
    pub accuracy: AccuracyArg,
    /// Report format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write report.txt, report.json and results.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rebuild the report from a results.json of an earlier run instead of running the detector.
    #[arg(long, conflicts_with_all = ["corpus", "manifest", "subset", "compare", "objects"])]
    pub from_results: Option<PathBuf>,
    /// Print the model comparison table from several report.json files.
    #[arg(long, num_args = 1.., conflicts_with_all = ["corpus", "objects"])]
    pub compare: Vec<PathBuf>,
    /// Per-object table: JSON object from target class to a crop PNG path
    /// (relative to the file).
    #[arg(long, conflicts_with = "corpus")]
    pub objects: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Session id.
    #[arg(long)]
    pub session: String,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Log directory of the server; read only.
    #[arg(long, env = "SCENELAB_LOG")]
    pub log_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Directory written by `export`.
    #[arg(long)]
    pub export: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// PNG image.
    #[arg(long)]
    pub image: PathBuf,
    /// Stub manifest: image SHA-256 to detections.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Drop detections scoring below this.
    #[arg(long, default_value_t = 0.5, value_parser = score)]
    pub min_score: f64,
}

fn score(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be a positive number"))
    }
}

fn scene_id(s: &str) -> Result<String, String> {
    let ok = !s.is_empty()
        && s != "."
        && s != ".."
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(s.to_owned())
    } else {
        Err(format!("`{s}` is not a valid scene id (letters, digits, `_`, `-`, `.`)"))
    }
}
