use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use poolprop::edges::extract_edges;
use poolprop::eval::{
    generation_lattice, sweep_generation, sweep_ranking, write_generation_csv, write_ranking_csv,
    RecallReport, SweepImage,
};
use poolprop::fixtures::write_fixtures;
use poolprop::ingest::{
    load_gray, write_proposal_records, DatasetManifest, GroundTruthBox, ProposalRecord, Sample,
};
use poolprop::pipeline::{self, AnnotatedImage, PipelineConfig, TrainingSet};
use poolprop::ranking::TemplateSet;
use rayon::prelude::*;
use thiserror::Error;

use crate::args::{Cli, Command, GlobalOpts};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] poolprop::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot start worker threads: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

impl From<poolprop::ingest::IngestError> for CliError {
    fn from(e: poolprop::ingest::IngestError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<poolprop::ranking::RankingError> for CliError {
    fn from(e: poolprop::ranking::RankingError) -> Self {
        CliError::Core(e.into())
    }
}

pub enum Outcome {
    Complete,
    /// Finished, but this many inputs were skipped.
    Partial(usize),
}

fn outcome(skipped: usize) -> Outcome {
    if skipped == 0 {
        Outcome::Complete
    } else {
        Outcome::Partial(skipped)
    }
}

/// Settings resolved from flags and the environment, checked before any
/// file is touched.
struct Resolved {
    opts: GlobalOpts,
    pipeline: PipelineConfig,
    seed: u64,
}

impl Resolved {
    fn header(&self, command: &str) -> String {
        format!(
            "poolprop {command} seed={} n={} exemplar={} {}",
            self.seed, self.opts.n, self.opts.exemplar, self.pipeline
        )
    }
}

fn resolve(opts: GlobalOpts, command: &Command) -> Result<Resolved, CliError> {
    let mut seed = opts.seed;
    if let Ok(v) = std::env::var("POOLPROP_SEED") {
        seed = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("POOLPROP_SEED `{v}` is not an unsigned integer")))?;
    }
    let pipeline = opts.pipeline();
    pipeline.validate()?;
    let usage = |m: &str| Err(CliError::Usage(m.to_string()));
    if opts.jobs == 0 {
        return usage("--jobs must be at least 1");
    }
    if opts.n == 0 {
        return usage("--n must be at least 1");
    }
    let templates = match command {
        Command::Propose { templates, .. } | Command::Evaluate { templates, .. } => Some(templates),
        _ => None,
    };
    if let Some(templates) = templates {
        match (templates.is_some(), opts.no_rank) {
            (false, false) => return usage("ranking needs --templates FILE (or pass --no-rank)"),
            (true, true) => return usage("--templates and --no-rank are mutually exclusive"),
            _ => {}
        }
        if opts.no_rank && opts.nms.is_some() {
            return usage("--nms needs scores and cannot be combined with --no-rank");
        }
    }
    Ok(Resolved { opts, pipeline, seed })
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let resolved = resolve(cli.opts, &cli.command)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.opts.jobs)
        .build()?;
    pool.install(|| dispatch(&resolved, cli.command))
}

fn dispatch(r: &Resolved, command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Propose { images, templates, out } => propose(r, &images, templates.as_deref(), out.as_deref()),
        Command::TrainTemplates { dataset, out } => train(r, &dataset, &out),
        Command::Evaluate {
            dataset,
            templates,
            out_dir,
        } => evaluate(r, &dataset, templates.as_deref(), &out_dir),
        Command::SweepGeneration { dataset, out, sizes } => {
            let (images, skipped) = load_dataset(&dataset)?;
            let sweep: Vec<SweepImage> = images
                .par_iter()
                .filter_map(|s| {
                    match extract_edges(&s.image, &r.pipeline.canny, r.pipeline.label_mode) {
                        Ok(e) => Some(SweepImage {
                            label_map: e.label_map,
                            gt: s.ground_truth.boxes.clone(),
                        }),
                        Err(e) => {
                            log::error!("{}: {e}", s.id);
                            None
                        }
                    }
                })
                .collect();
            let lost = images.len() - sweep.len();
            let rows = sweep_generation(&sweep, &generation_lattice(sizes, r.pipeline.pooling.mode));
            write_file(&out, |w| write_generation_csv(&rows, w, &r.header("sweep-generation")))?;
            log::info!("{} settings written to {}", rows.len(), out.display());
            Ok(outcome(skipped + lost))
        }
        Command::SweepRanking {
            dataset,
            out,
            n_values,
            dims_values,
        } => {
            let (images, skipped) = load_dataset(&dataset)?;
            let (annotated, lost) = annotate(r, &images);
            let rows = sweep_ranking(
                &annotated,
                &n_values.0,
                &dims_values.0,
                r.pipeline.max_proposals,
                r.seed,
                r.pipeline.signed,
                r.opts.method(),
            )?;
            write_file(&out, |w| write_ranking_csv(&rows, w, &r.header("sweep-ranking")))?;
            log::info!("{} settings written to {}", rows.len(), out.display());
            Ok(outcome(skipped + lost))
        }
        Command::Fixtures { out } => {
            let paths = write_fixtures(&out, r.seed)?;
            let count = DatasetManifest::load(&paths.manifest)?.len();
            log::info!("{count} cases listed in {}", paths.manifest.display());
            Ok(Outcome::Complete)
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut io::BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = io::BufWriter::new(File::create(path).map_err(err)?);
    f(&mut w).map_err(err)?;
    w.flush().map_err(err)
}

fn load_templates(path: Option<&Path>) -> Result<Option<TemplateSet>, CliError> {
    Ok(path.map(TemplateSet::load).transpose()?)
}

/// Loads every manifest entry, skipping (and counting) the ones that fail.
fn load_dataset(manifest: &Path) -> Result<(Vec<Sample>, usize), CliError> {
    let path = manifest;
    let manifest = DatasetManifest::load(path)?;
    if manifest.is_empty() {
        return Err(CliError::Usage(format!("{} lists no images", path.display())));
    }
    let loaded: Vec<Option<Sample>> = manifest
        .entries
        .par_iter()
        .map(|e| match e.load() {
            Ok(s) => {
                for w in &s.ground_truth.warnings {
                    log::warn!("{}: {w:?}", e.ground_truth.display());
                }
                Some(s)
            }
            Err(err) => {
                log::error!("{err}");
                None
            }
        })
        .collect();
    let skipped = loaded.iter().filter(|s| s.is_none()).count();
    Ok((loaded.into_iter().flatten().collect(), skipped))
}

fn annotate(r: &Resolved, images: &[Sample]) -> (Vec<AnnotatedImage>, usize) {
    let prepared: Vec<Option<AnnotatedImage>> = images
        .par_iter()
        .map(|s| match AnnotatedImage::prepare(&s.image, s.ground_truth.boxes.clone(), &r.pipeline) {
            Ok(a) => Some(a),
            Err(e) => {
                log::error!("{}: {e}", s.id);
                None
            }
        })
        .collect();
    let lost = prepared.iter().filter(|a| a.is_none()).count();
    (prepared.into_iter().flatten().collect(), lost)
}

fn records(id: &str, out: &pipeline::PipelineOutput) -> Vec<ProposalRecord> {
    out.proposals
        .iter()
        .map(|p| ProposalRecord {
            image_id: id.to_string(),
            rect: p.bbox,
            score: p.score,
        })
        .collect()
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn propose(r: &Resolved, images: &[PathBuf], templates: Option<&Path>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let templates = load_templates(templates)?;
    let results: Vec<Result<Vec<ProposalRecord>, poolprop::Error>> = images
        .par_iter()
        .map(|path| {
            let img = load_gray(path)?;
            let output = pipeline::run(&img, &r.pipeline, templates.as_ref())?;
            let id = image_id(path);
            if output.components == 0 {
                log::info!("{id}: 0 components, no proposals");
            }
            Ok(records(&id, &output))
        })
        .collect();

    let mut results = results;
    if results.len() == 1 && results[0].is_err() {
        return Err(results.remove(0).unwrap_err().into());
    }
    let mut all = Vec::new();
    let mut skipped = 0;
    for (path, res) in images.iter().zip(results) {
        match res {
            Ok(recs) => all.extend(recs),
            Err(e) => {
                log::error!("{}: {e}", path.display());
                skipped += 1;
            }
        }
    }
    match out {
        Some(path) => write_file(path, |w| write_proposal_records(all, w))?,
        None => write_proposal_records(all, io::stdout().lock()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    Ok(outcome(skipped))
}

fn train(r: &Resolved, dataset: &Path, out: &Path) -> Result<Outcome, CliError> {
    let (images, skipped) = load_dataset(dataset)?;
    let (annotated, lost) = annotate(r, &images);
    let refs: Vec<&AnnotatedImage> = annotated.iter().collect();
    let training = TrainingSet::collect(&refs, r.pipeline.signed, r.seed)?;
    log::info!(
        "{} text and {} non-text samples from {} images",
        training.text_count(),
        training.nontext_count(),
        refs.len()
    );
    let set = training.train(r.opts.n, r.pipeline.dims, r.seed, r.opts.method())?;
    set.save(out)?;
    Ok(outcome(skipped + lost))
}

fn evaluate(r: &Resolved, dataset: &Path, templates: Option<&Path>, out_dir: &Path) -> Result<Outcome, CliError> {
    let templates = load_templates(templates)?;
    let (images, skipped) = load_dataset(dataset)?;
    let results: Vec<Result<pipeline::PipelineOutput, poolprop::Error>> = images
        .par_iter()
        .map(|s| pipeline::run(&s.image, &r.pipeline, templates.as_ref()))
        .collect();

    let mut boxes = Vec::new();
    let mut gt: Vec<Vec<GroundTruthBox>> = Vec::new();
    let mut times: Vec<Duration> = Vec::new();
    let mut all = Vec::new();
    let mut failed = 0;
    for (s, res) in images.iter().zip(results) {
        match res {
            Ok(output) => {
                boxes.push(output.proposals.iter().map(|p| p.bbox).collect());
                gt.push(s.ground_truth.boxes.clone());
                times.push(output.elapsed);
                all.extend(records(&s.id, &output));
            }
            Err(e) => {
                log::error!("{}: {e}", s.id);
                failed += 1;
            }
        }
    }
    let timing = (!r.opts.no_timing).then_some(&times[..]);
    let report = RecallReport::compute(&boxes, &gt, r.pipeline.max_proposals, timing)
        .map_err(poolprop::Error::from)?;
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let header = r.header("evaluate");
    write_file(&out_dir.join("summary.csv"), |w| report.write_summary(w, &header))?;
    write_file(&out_dir.join("curve.csv"), |w| report.write_curve(w, &header))?;
    write_file(&out_dir.join("proposals.csv"), |w| write_proposal_records(all, w))?;
    for t in [0.5, 0.7, 0.8] {
        if let Some(v) = report.recall_at_iou(t) {
            log::info!("recall@{t:.1} = {:.4}", v);
        }
    }
    log::info!("nppb = {:.1} over {} images", report.nppb, report.images);
    Ok(outcome(skipped + failed))
}
