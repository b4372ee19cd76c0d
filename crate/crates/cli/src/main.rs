//! `chartrelate` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chartrelate::chartgen::{generate_corpus, load_truth, ChartGroundTruth, ChartType, Corpus, GenConfig, LineStyleMode};
use chartrelate::cluster::{select_k, KSelectionResult};
use chartrelate::eval::{ablate_k_selection, ablate_segmentation, evaluate};
use chartrelate::preprocess::saturation_threshold;
use chartrelate::relate::{extract_relations, NoText, PointReduction, TextRecognizer, TruthText};
use chartrelate::segment::{segment_series, FacetBoxes, FacetProvider, NoFacets, TruthFacets};
use chartrelate::{load_image, save_image, Error, ExtractionResult, PipelineConfig, RasterImage};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "chartrelate", version, about = "Extract series correlations from chart images")]
struct Cli {
    /// Flat TOML file of pipeline settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for per-image parallelism (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(flatten)]
    pipeline: PipelineArgs,

    #[command(subcommand)]
    command: Command,
}

/// Overrides for pipeline settings.
#[derive(Args, Debug, Default)]
struct PipelineArgs {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "CHARTRELATE_SEED")]
    seed: Option<u64>,
    /// Pixels with saturation at or below this become white [default: 30].
    #[arg(long, global = true)]
    saturation_threshold: Option<u8>,
    /// Masks smaller than this are dropped [default: 25].
    #[arg(long, global = true)]
    min_mask_pixels: Option<usize>,
    /// Largest cluster count tried during k selection [default: 8].
    #[arg(long, global = true)]
    k_range_max: Option<usize>,
    /// Normalized error above which the knee moves one step right [default: 0.985].
    #[arg(long, global = true)]
    kneedle_threshold: Option<f64>,
    /// |rho| must exceed this to be Positive or Negative [default: 0.4].
    #[arg(long, global = true)]
    correlation_threshold: Option<f64>,
    /// Hue tolerance around a cluster centre, in OpenCV units [default: 10].
    #[arg(long, global = true)]
    hue_half_width: Option<u8>,
    /// Saturation tolerance around a cluster centre [default: 25].
    #[arg(long, global = true)]
    saturation_half_width: Option<u8>,
    /// Value tolerance around a cluster centre [default: 40].
    #[arg(long, global = true)]
    value_half_width: Option<u8>,
    /// Maximum pixels sampled for k-means [default: 20000].
    #[arg(long, global = true)]
    subsample_cap: Option<usize>,
    /// k-means++ restarts per k [default: 3].
    #[arg(long, global = true)]
    kmeans_restarts: Option<usize>,
    /// `column-median` or `pixels`.
    #[arg(long, global = true, value_parser = parse_reduction)]
    point_reduction: Option<PointReduction>,
}

fn parse_reduction(s: &str) -> Result<PointReduction, String> {
    match s {
        "column-median" => Ok(PointReduction::ColumnMedian),
        "pixels" => Ok(PointReduction::Pixels),
        _ => Err(format!("unknown point reduction `{s}` (expected column-median or pixels)")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic chart corpus with ground truth.
    Gen(GenArgs),
    /// Write the saturation-thresholded image.
    Preprocess {
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar; crops to its plot area.
        #[arg(long)]
        facets: Option<PathBuf>,
    },
    /// Report the selected number of color clusters.
    SelectK {
        image: PathBuf,
        /// Ground-truth sidecar; crops to its plot area.
        #[arg(long)]
        facets: Option<PathBuf>,
        /// Cluster the raw image instead of the thresholded one.
        #[arg(long)]
        raw: bool,
    },
    /// Write one mask image per detected series.
    Segment {
        image: PathBuf,
        /// Directory for mask PNGs and masks.json.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar; crops to its plot area.
        #[arg(long)]
        facets: Option<PathBuf>,
        /// Number of clusters; selected automatically when absent.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Extract series relations from one image or a whole corpus.
    Extract {
        #[arg(required_unless_present = "corpus", conflicts_with = "corpus")]
        image: Option<PathBuf>,
        /// Ground-truth sidecar supplying facet boxes and text.
        #[arg(long)]
        facets: Option<PathBuf>,
        /// Corpus directory; every chart is extracted with its own sidecar.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Output file (single image) or directory (corpus); stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score extraction results against corpus ground truth.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare k-selection accuracy with and without preprocessing.
    AblateK {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare color-identification errors with and without preprocessing.
    AblateSeg {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Output directory for images, sidecars and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Image width in pixels.
    #[arg(long)]
    width: Option<u32>,
    /// Image height in pixels.
    #[arg(long)]
    height: Option<u32>,
    /// Comma-separated subset of scatter, line, bar.
    #[arg(long, value_delimiter = ',', value_parser = parse_chart_type)]
    chart_types: Option<Vec<ChartType>>,
    /// Fewest series per chart.
    #[arg(long)]
    min_series: Option<usize>,
    /// Most series per chart.
    #[arg(long)]
    max_series: Option<usize>,
    /// Draw lines with random dash patterns instead of solid strokes.
    #[arg(long)]
    random_line_styles: bool,
    /// Standard deviation of Gaussian pixel noise.
    #[arg(long)]
    pixel_noise: Option<f64>,
}

fn parse_chart_type(s: &str) -> Result<ChartType, String> {
    match s {
        "scatter" => Ok(ChartType::Scatter),
        "line" => Ok(ChartType::Line),
        "bar" => Ok(ChartType::Bar),
        _ => Err(format!("unknown chart type `{s}`")),
    }
}

/// Extraction output document: the result plus the settings that produced it.
#[derive(Serialize, Deserialize)]
struct ResultDocument {
    #[serde(flatten)]
    result: ExtractionResult,
    config: PipelineConfig,
}

#[derive(Serialize)]
struct SelectKDocument {
    #[serde(flatten)]
    selection: KSelectionResult,
    preprocessed: bool,
    config: PipelineConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error[{}]: {}", e.code(), one_line(&e.to_string()));
            ExitCode::from(1)
        }
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let cfg = effective_config(cli.config.as_deref(), &cli.pipeline)?;

    match cli.command {
        Command::Gen(args) => gen(args, cfg.seed),
        Command::Preprocess { image, out, facets } => {
            let (img, boxes) = load_with_facets(&image, facets.as_deref())?;
            save_image(&saturation_threshold(&plot_crop(&img, &boxes)?, &cfg.preprocess()), out)?;
            Ok(())
        }
        Command::SelectK { image, facets, raw } => {
            let (img, boxes) = load_with_facets(&image, facets.as_deref())?;
            let crop = plot_crop(&img, &boxes)?;
            let work = if raw { crop } else { saturation_threshold(&crop, &cfg.preprocess()) };
            let selection = select_k(&work, cfg.seed, &cfg.cluster())?;
            print_json(&SelectKDocument { selection, preprocessed: !raw, config: cfg })
        }
        Command::Segment { image, out, facets, k } => segment(&image, &out, facets.as_deref(), k, &cfg),
        Command::Extract { image: Some(image), facets, out, .. } => {
            let truth = facets.as_deref().map(load_truth).transpose()?;
            let img = load_image(&image)?;
            let doc = ResultDocument { result: extract_one(&img, truth.as_ref(), &cfg)?, config: cfg };
            match out {
                Some(path) => write_json(&path, &doc),
                None => print_json(&doc),
            }
        }
        Command::Extract { corpus: Some(dir), out, .. } => {
            let out = out.ok_or_else(|| Failure::Usage("--out DIR is required with --corpus".into()))?;
            extract_corpus(&dir, &out, &cfg)
        }
        Command::Extract { .. } => Err(Failure::Usage("give an image or --corpus".into())),
        Command::Eval { corpus, results, out } => {
            let corpus = Corpus::open(corpus)?;
            let pairs = (0..corpus.len())
                .into_par_iter()
                .map(|i| {
                    let path = results.join(result_name(&corpus.manifest.entries[i].image_path));
                    let doc: ExtractionResult = read_json(&path)?;
                    Ok((doc, load_truth(corpus.truth_path(i))?))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let mut report = evaluate(&pairs)?;
            report.config = Some(cfg);
            emit_report(&report, &report.to_table(), out.as_deref())
        }
        Command::AblateK { corpus, out } => {
            let report = ablate_k_selection(&Corpus::open(corpus)?, &cfg)?;
            emit_report(&report, &report.to_table(), out.as_deref())
        }
        Command::AblateSeg { corpus, out } => {
            let report = ablate_segmentation(&Corpus::open(corpus)?, &cfg)?;
            emit_report(&report, &report.to_table(), out.as_deref())
        }
    }
}

/// Defaults, then the config file, then flags and environment.
fn effective_config(file: Option<&Path>, args: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
            toml::from_str(&text).map_err(|e| Error::Document { path: path.to_path_buf(), reason: e.to_string() })?
        }
        None => PipelineConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = v; })* };
    }
    apply!(
        seed,
        saturation_threshold,
        min_mask_pixels,
        k_range_max,
        kneedle_threshold,
        correlation_threshold,
        hue_half_width,
        saturation_half_width,
        value_half_width,
        subsample_cap,
        kmeans_restarts,
        point_reduction
    );
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn gen(args: GenArgs, seed: u64) -> Result<(), Failure> {
    let mut config = GenConfig { count: args.count, ..Default::default() };
    if let Some(v) = args.width {
        config.width = v;
    }
    if let Some(v) = args.height {
        config.height = v;
    }
    if let Some(v) = args.chart_types {
        config.chart_types = v;
    }
    if let Some(v) = args.min_series {
        config.min_series = v;
    }
    if let Some(v) = args.max_series {
        config.max_series = v;
    }
    if let Some(v) = args.pixel_noise {
        config.pixel_noise_sigma = v;
    }
    if args.random_line_styles {
        config.line_styles = LineStyleMode::Random;
    }
    let manifest = generate_corpus(&config, seed, &args.out)?;
    stdout(&format!("wrote {} charts to {}\n", manifest.entries.len(), args.out.display()));
    Ok(())
}

fn load_with_facets(image: &Path, facets: Option<&Path>) -> Result<(RasterImage, FacetBoxes), Error> {
    let img = load_image(image)?;
    let boxes = match facets {
        Some(p) => load_truth(p)?.facets,
        None => FacetBoxes::default(),
    };
    Ok((img, boxes))
}

fn plot_crop(img: &RasterImage, boxes: &FacetBoxes) -> Result<RasterImage, Error> {
    match boxes.plot_area.filter(|b| b.fits_in(img.width(), img.height())) {
        Some(b) => img.crop(&b),
        None => Ok(img.clone()),
    }
}

fn segment(image: &Path, out: &Path, facets: Option<&Path>, k: Option<usize>, cfg: &PipelineConfig) -> Result<(), Failure> {
    let (img, boxes) = load_with_facets(image, facets)?;
    let pre = saturation_threshold(&plot_crop(&img, &boxes)?, &cfg.preprocess());
    let k = match k {
        Some(k) => k,
        None => select_k(&pre, cfg.seed, &cfg.cluster())?.chosen_k,
    };
    let masks = segment_series(&pre, k, cfg.seed, &cfg.segment(), &cfg.cluster())?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    let mut summary = Vec::new();
    for (i, m) in masks.iter().enumerate() {
        let name = format!("mask_{i}.png");
        save_image(&m.to_image(), out.join(&name))?;
        summary.push(serde_json::json!({
            "file": name,
            "pixels": m.len(),
            "color": m.representative_color,
        }));
    }
    write_json(&out.join("masks.json"), &serde_json::json!({ "k": k, "masks": summary, "config": cfg }))
}

fn extract_one(img: &RasterImage, truth: Option<&ChartGroundTruth>, cfg: &PipelineConfig) -> Result<ExtractionResult, Error> {
    let (facets, ocr): (Box<dyn FacetProvider>, Box<dyn TextRecognizer>) = match truth {
        Some(t) => (Box::new(TruthFacets(t.facets.clone())), Box::new(TruthText::new(t))),
        None => (Box::new(NoFacets), Box::new(NoText)),
    };
    extract_relations(img, facets.as_ref(), ocr.as_ref(), cfg)
}

fn result_name(image_path: &str) -> String {
    let stem = Path::new(image_path).file_stem().and_then(|s| s.to_str()).unwrap_or(image_path);
    format!("{stem}.result.json")
}

fn extract_corpus(dir: &Path, out: &Path, cfg: &PipelineConfig) -> Result<(), Failure> {
    let corpus = Corpus::open(dir)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    let empty = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let (img, truth) = corpus.load(i)?;
            let (result, empty) = match extract_one(&img, Some(&truth), cfg) {
                Ok(r) => (r, false),
                // A chart where nothing survives still gets a (scored) result.
                Err(Error::SegmentationEmpty) => {
                    (ExtractionResult { x_axis: None, y_axis: None, title: None, series: Vec::new() }, true)
                }
                Err(e) => return Err(e),
            };
            let path = out.join(result_name(&corpus.manifest.entries[i].image_path));
            write_json(&path, &ResultDocument { result, config: *cfg }).map_err(|f| match f {
                Failure::Domain(e) => e,
                Failure::Usage(m) => Error::InvalidParams(m),
            })?;
            Ok(empty)
        })
        .collect::<Result<Vec<bool>, Error>>()?;
    let n_empty = empty.iter().filter(|&&e| e).count();
    stdout(&format!("extracted {} charts into {} ({n_empty} without series)\n", corpus.len(), out.display()));
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path.to_path_buf())
        } else {
            Error::Io { path: path.to_path_buf(), source: e }
        }
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Document { path: path.to_path_buf(), reason: e.to_string() })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn stdout(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    stdout(&format!("{}\n", serde_json::to_string_pretty(value).expect("serializable")));
    Ok(())
}

/// Writes the JSON report to `out` (if given) and the table to stdout.
fn emit_report<T: Serialize>(report: &T, table: &str, out: Option<&Path>) -> Result<(), Failure> {
    if let Some(path) = out {
        write_json(path, report)?;
    }
    stdout(table);
    Ok(())
}
