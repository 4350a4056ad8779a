use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poolprop::edges::{CannyConfig, LabelMode};
use poolprop::grouping::{PoolMode, PoolingConfig};
use poolprop::pipeline::PipelineConfig;
use poolprop::ranking::TemplateMethod;

#[derive(Parser, Debug)]
#[command(name = "poolprop", version, about = "Scene text proposals by pooling-based edge grouping")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract ranked proposals from one or more images into a CSV.
    Propose {
        /// Input images (PNG, JPEG or BMP).
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Template file from `train-templates`; required unless --no-rank.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Output CSV; standard output when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Learn text and non-text HoGe templates from an annotated dataset.
    TrainTemplates {
        /// Dataset manifest (`image,ground_truth,format` per line).
        #[arg(long)]
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Recall-vs-IoU summary, recall-vs-budget curve and all proposals for a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Template file; required unless --no-rank.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Directory receiving summary.csv, curve.csv and proposals.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Uncapped generation recall over the window/stride lattice.
    SweepGeneration {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Window and stride sizes to try, as LO-HI.
        #[arg(long, default_value = "1-5", value_parser = parse_range)]
        sizes: RangeInclusive<usize>,
    },
    /// Held-out recall over template count and dimension (80/20 split).
    SweepRanking {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Template counts as START:END:STEP.
        #[arg(long, default_value = "5:100:5", value_parser = parse_steps)]
        n_values: Steps,
        /// Histogram dimensions as START:END:STEP.
        #[arg(long, default_value = "10:180:10", value_parser = parse_steps)]
        dims_values: Steps,
    },
    /// Write the synthetic conformance cases and the rendered text corpus.
    Fixtures {
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelArg {
    Searl,
    Maxe,
    Meane,
}

impl From<LabelArg> for LabelMode {
    fn from(a: LabelArg) -> Self {
        match a {
            LabelArg::Searl => LabelMode::SearchOrder,
            LabelArg::Maxe => LabelMode::MaxGradient,
            LabelArg::Meane => LabelMode::MeanGradient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolArg {
    Max,
    Min,
}

impl From<PoolArg> for PoolMode {
    fn from(a: PoolArg) -> Self {
        match a {
            PoolArg::Max => PoolMode::Max,
            PoolArg::Min => PoolMode::Min,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Gaussian sigma of the Canny smoothing.
    #[arg(long, global = true, default_value_t = 1.4)]
    pub sigma: f64,
    /// Quantile of the gradient magnitudes used as the Canny high threshold.
    #[arg(long, global = true, default_value_t = 0.8)]
    pub canny_high_pct: f64,
    /// Canny low threshold as a fraction of the high threshold.
    #[arg(long, global = true, default_value_t = 0.4)]
    pub canny_low_ratio: f64,
    /// Edge label assignment.
    #[arg(long, global = true, value_enum, default_value_t = LabelArg::Searl)]
    pub label: LabelArg,
    /// Pooling window as HxW.
    #[arg(long, global = true, default_value = "1x3", value_parser = parse_pair)]
    pub window: (usize, usize),
    /// Pooling strides as VxH.
    #[arg(long, global = true, default_value = "1x2", value_parser = parse_pair)]
    pub stride: (usize, usize),
    #[arg(long, global = true, value_enum, default_value_t = PoolArg::Max)]
    pub pool: PoolArg,
    /// HoGe histogram bins.
    #[arg(long, global = true, default_value_t = 120)]
    pub dims: usize,
    /// Signed gradient orientation over 360 degrees.
    #[arg(long, global = true)]
    pub signed: bool,
    /// Use cluster medoids instead of centroids as templates.
    #[arg(long, global = true)]
    pub exemplar: bool,
    /// Templates per class.
    #[arg(long, global = true, default_value_t = 25)]
    pub n: usize,
    /// Random seed; the POOLPROP_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = 17)]
    pub seed: u64,
    /// Proposals kept per image after ranking.
    #[arg(long, global = true, default_value_t = 2000)]
    pub max_proposals: usize,
    /// Score NMS IoU threshold applied after ranking.
    #[arg(long, global = true, value_name = "T")]
    pub nms: Option<f64>,
    /// Skip scoring; proposals keep generation order.
    #[arg(long, global = true)]
    pub no_rank: bool,
    /// Worker threads for per-image work.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Leave timing out of reports so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

impl GlobalOpts {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            canny: CannyConfig {
                gaussian_sigma: self.sigma,
                high_threshold_percentile: self.canny_high_pct,
                low_high_ratio: self.canny_low_ratio,
            },
            label_mode: self.label.into(),
            pooling: PoolingConfig {
                mode: self.pool.into(),
                ..PoolingConfig::with_geometry(self.window.0, self.window.1, self.stride.0, self.stride.1)
            },
            dims: self.dims,
            signed: self.signed,
            max_proposals: self.max_proposals,
            nms: self.nms,
        }
    }

    pub fn method(&self) -> TemplateMethod {
        if self.exemplar {
            TemplateMethod::Exemplar
        } else {
            TemplateMethod::Centroid
        }
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected LO-HI, got `{s}`"))?;
    let lo: usize = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let hi: usize = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range `{s}` must satisfy 1 <= LO <= HI"));
    }
    Ok(lo..=hi)
}

/// Values of a `START:END:STEP` list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Steps(pub Vec<usize>);

fn parse_steps(s: &str) -> Result<Steps, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let (start, end, step) = match nums[..] {
        [v] => (v, v, 1),
        [a, b, c] => (a, b, c),
        _ => return Err(format!("expected START:END:STEP or a single value, got `{s}`")),
    };
    if start == 0 || step == 0 || start > end {
        return Err(format!("`{s}` must satisfy 1 <= START <= END and STEP >= 1"));
    }
    Ok(Steps((start..=end).step_by(step).collect()))
}
