//! `pcgeo`: train, encode, decode, evaluate and sweep the geometry codec.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use pcgeo_core::bitstream::StreamHeader;
use pcgeo_core::error::{Error, StreamError};
use pcgeo_core::pointcloud::metrics::DEFAULT_NORMAL_NEIGHBOURS;
use pcgeo_core::pointcloud::{evaluate, read_ply, write_ply, MetricsReport, PlyFormat};
use pcgeo_core::{decode, synth, train_model, CodecConfig, GicModel, PointCloud, PreparedInput};

#[derive(Parser)]
#[command(name = "pcgeo", version, about = "Static point-cloud geometry codec")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on every .ply file in a directory.
    Train {
        #[arg(long)]
        input: PathBuf,
        /// TOML codec configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a PLY cloud.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = parse_lambda)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a stream to PLY.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Decode only octree levels up to this one.
        #[arg(long)]
        level: Option<u8>,
        #[arg(long)]
        ascii: bool,
    },
    /// D1/D2 metrics and bpp as one CSV row.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        rec: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value_t = 9)]
        normal_k: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate-distortion curve over a list of λ values.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_lambda)]
        lambdas: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic clouds.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 9)]
        bit_depth: u8,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Scene count for `corpus`.
        #[arg(long, default_value_t = 12)]
        count: usize,
        /// A file, or a directory for `corpus`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ascii: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Shell,
    Plane,
    Scene,
    Corpus,
}

fn parse_lambda(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("λ must be finite and >= 0, got {v}"))
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Stream(StreamError::ModelMismatch { .. }) => 4,
            Error::Train(_) | Error::MissingModelEntry { .. } => 5,
            _ => 3,
        };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

fn load_cloud(path: &Path) -> Result<PointCloud, Failure> {
    read_ply(&read(path)?).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

fn load_model(path: &Path) -> Result<GicModel, Failure> {
    GicModel::from_bytes(&read(path)?).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

fn ply_format(ascii: bool) -> PlyFormat {
    if ascii {
        PlyFormat::Ascii
    } else {
        PlyFormat::Binary
    }
}

/// Header plus body bits of a stream, read from its header alone.
fn stream_bits(bytes: &[u8]) -> Result<u64, Failure> {
    let (h, len) = StreamHeader::parse(bytes).map_err(Error::from)?;
    Ok(8 * len as u64 + h.payload_bit_count)
}

fn cmd_train(input: &Path, config: Option<&Path>, out: &Path) -> CmdResult {
    let cfg = match config {
        Some(p) => {
            let text = String::from_utf8(read(p)?).map_err(|_| Failure { code: 3, message: format!("{}: not UTF-8", p.display()) })?;
            CodecConfig::from_toml(&text)?
        }
        None => CodecConfig::default(),
    };
    let entries = fs::read_dir(input).map_err(|e| Failure { code: 3, message: format!("{}: {e}", input.display()) })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("ply")))
        .collect();
    files.sort();
    let clouds = files.iter().map(|p| load_cloud(p)).collect::<Result<Vec<_>, _>>()?;
    let t = Instant::now();
    let model = train_model(&clouds, &cfg)?;
    write(out, &model.to_bytes())?;
    println!(
        "trained {} coders on {} clouds in {:.2}s: {} parameters, hash {:016x}",
        model.units().count(),
        clouds.len(),
        t.elapsed().as_secs_f64(),
        model.parameter_count(),
        model.hash()
    );
    Ok(())
}

fn cmd_encode(input: &Path, model: &Path, lambda: f64, out: &Path) -> CmdResult {
    let cloud = load_cloud(input)?;
    let model = load_model(model)?;
    let e = PreparedInput::new(&cloud, &model)?.encode(lambda)?;
    write(out, &e.bytes)?;
    let levels: Vec<String> = e.stats.leaves_per_level.iter().map(|n| n.to_string()).collect();
    println!(
        "{} points, {} bits, {} bpp, leaves per level [{}]",
        e.stats.input_points,
        e.stats.stream_bits,
        e.stats.bpp(),
        levels.join(", ")
    );
    Ok(())
}

fn cmd_decode(input: &Path, model: &Path, out: &Path, level: Option<u8>, ascii: bool) -> CmdResult {
    let bytes = read(input)?;
    let model = load_model(model)?;
    let cloud = match level {
        Some(k) => pcgeo_core::decode_progressive(&bytes, &model, k)?,
        None => decode(&bytes, &model)?,
    };
    write(out, &write_ply(&cloud, ply_format(ascii)))?;
    println!("{} points at {} bits", cloud.len(), cloud.bit_depth());
    Ok(())
}

fn cmd_eval(reference: &Path, rec: &Path, stream: &Path, normal_k: usize, out: Option<&Path>) -> CmdResult {
    let a = load_cloud(reference)?;
    let b = load_cloud(rec)?;
    let bits = stream_bits(&read(stream)?)?;
    let report = evaluate(&a, &b, bits, normal_k)?;
    let name = rec.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let csv = format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_record(&name));
    match out {
        Some(p) => write(p, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

struct SweepRecord {
    lambda: f64,
    bpp: f64,
    d1_psnr: f64,
    d2_psnr: f64,
    encode_seconds: f64,
    decode_seconds: f64,
}

fn db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn cmd_sweep(input: &Path, model: &Path, lambdas: &[f64], out: &Path) -> CmdResult {
    let cloud = load_cloud(input)?;
    let model = load_model(model)?;
    let mut unique: Vec<f64> = Vec::new();
    for &l in lambdas {
        if !unique.contains(&l) {
            unique.push(l);
        }
    }
    let t = Instant::now();
    let prep = PreparedInput::new(&cloud, &model)?;
    let prep_seconds = t.elapsed().as_secs_f64();
    let mut records = Vec::with_capacity(unique.len());
    for lambda in unique {
        let t = Instant::now();
        let e = prep.encode(lambda)?;
        let encode_seconds = prep_seconds + t.elapsed().as_secs_f64();
        let t = Instant::now();
        let rec = decode(&e.bytes, &model)?;
        let decode_seconds = t.elapsed().as_secs_f64();
        let m = evaluate(&cloud, &rec, e.stats.stream_bits, DEFAULT_NORMAL_NEIGHBOURS)?;
        records.push(SweepRecord { lambda, bpp: m.bpp, d1_psnr: m.d1_psnr, d2_psnr: m.d2_psnr, encode_seconds, decode_seconds });
    }
    records.sort_by(|a, b| a.bpp.total_cmp(&b.bpp).then(b.lambda.total_cmp(&a.lambda)));
    let mut csv = String::from("lambda,bpp,d1_psnr,d2_psnr,encode_seconds,decode_seconds\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{:.3},{:.3}\n",
            r.lambda,
            r.bpp,
            db(r.d1_psnr),
            db(r.d2_psnr),
            r.encode_seconds,
            r.decode_seconds
        ));
    }
    write(out, csv.as_bytes())?;
    println!("{} points, {} rate points", cloud.len(), records.len());
    Ok(())
}

fn cmd_synth(kind: SynthKind, bit_depth: u8, seed: u64, count: usize, out: &Path, ascii: bool) -> CmdResult {
    if !(4..=16).contains(&bit_depth) {
        return Err(Failure::usage(format!("bit depth {bit_depth} outside 4..=16")));
    }
    let n = (1u32 << bit_depth) as f64;
    let fmt = ply_format(ascii);
    match kind {
        SynthKind::Corpus => {
            fs::create_dir_all(out).map_err(|e| Failure { code: 3, message: format!("{}: {e}", out.display()) })?;
            let corpus = synth::training_corpus(seed, count, bit_depth);
            for (i, c) in corpus.iter().enumerate() {
                write(&out.join(format!("cloud_{i:03}.ply")), &write_ply(c, fmt))?;
            }
            println!("{} clouds", corpus.len());
        }
        _ => {
            let cloud = match kind {
                SynthKind::Shell => synth::sphere_shell(bit_depth, 0.3 * n),
                SynthKind::Plane => {
                    let side = n as u32;
                    synth::rasterize(&[synth::Shape::Plane { axis: 2, offset: side / 3, lo: [0, 0], hi: [side, side] }], bit_depth)
                }
                _ => synth::random_scene(seed, bit_depth),
            };
            write(out, &write_ply(&cloud, fmt))?;
            println!("{} points", cloud.len());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Train { input, config, out } => cmd_train(&input, config.as_deref(), &out),
        Command::Encode { input, model, lambda, out } => cmd_encode(&input, &model, lambda, &out),
        Command::Decode { input, model, out, level, ascii } => cmd_decode(&input, &model, &out, level, ascii),
        Command::Eval { reference, rec, stream, normal_k, out } => cmd_eval(&reference, &rec, &stream, normal_k, out.as_deref()),
        Command::Sweep { input, model, lambdas, out } => cmd_sweep(&input, &model, &lambdas, &out),
        Command::Synth { kind, bit_depth, seed, count, out, ascii } => cmd_synth(kind, bit_depth, seed, count, &out, ascii),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
