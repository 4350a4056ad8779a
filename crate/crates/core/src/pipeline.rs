//! End-to-end proposal extraction for one image: gray image, Canny, component
//! labelling, pooling-based grouping, HoGe scoring, ranking with a cap, and
//! optional score NMS.

use std::fmt;
use std::time::{Duration, Instant};

use crate::edges::{extract_edges, CannyConfig, EdgeExtraction, LabelMode};
use crate::geometry::Rect;
use crate::grouping::{generate_proposals, PoolingConfig, Proposal, Termination};
use crate::hoge::{EdgeIndex, HogeVector, DEFAULT_DIMS};
use crate::ingest::{GrayImage, GroundTruthBox};
use crate::ranking::{
    nms, rank_and_cap, sample_nontext_boxes, score_proposals, train_templates, TemplateMethod,
    TemplateSet, DEFAULT_PROPOSAL_CAP,
};
use crate::Error;

/// Proposals matching a ground-truth box at this IoU join the text samples.
pub const POSITIVE_MIN_IOU: f64 = 0.7;
pub const NEGATIVES_PER_IMAGE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub canny: CannyConfig,
    pub label_mode: LabelMode,
    pub pooling: PoolingConfig,
    pub dims: usize,
    pub signed: bool,
    pub max_proposals: usize,
    pub nms: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            canny: CannyConfig::default(),
            label_mode: LabelMode::SearchOrder,
            pooling: PoolingConfig::default(),
            dims: DEFAULT_DIMS,
            signed: false,
            max_proposals: DEFAULT_PROPOSAL_CAP,
            nms: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.canny.validate()?;
        self.pooling.validate()?;
        if self.dims < 2 {
            return Err(crate::hoge::HogeError::InvalidDims(self.dims).into());
        }
        if let Some(t) = self.nms {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("NMS threshold {t} is outside (0, 1]")));
            }
        }
        if self.max_proposals == 0 {
            return Err(Error::Config("proposal cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Single-line `key=value` rendering used in report headers.
impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.pooling;
        write!(
            f,
            "sigma={} canny_high_pct={} canny_low_ratio={} label={} window={}x{} stride={}x{} pool={} dims={} signed={} max_proposals={}",
            self.canny.gaussian_sigma,
            self.canny.high_threshold_percentile,
            self.canny.low_high_ratio,
            self.label_mode,
            p.window_h,
            p.window_w,
            p.stride_v,
            p.stride_h,
            p.mode,
            self.dims,
            self.signed,
            self.max_proposals,
        )?;
        match self.nms {
            Some(t) => write!(f, " nms={t}"),
            None => write!(f, " nms=off"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Ranked (or, without templates, emission-ordered) and capped.
    pub proposals: Vec<Proposal>,
    pub components: usize,
    pub generated: usize,
    pub iterations: usize,
    pub termination: Termination,
    /// Wall-clock time from edge extraction to the final list.
    pub elapsed: Duration,
}

/// Runs the full chain. Without templates, proposals keep emission order and
/// are only capped.
pub fn run(img: &GrayImage, cfg: &PipelineConfig, templates: Option<&TemplateSet>) -> Result<PipelineOutput, Error> {
    cfg.validate()?;
    if let Some(t) = templates {
        if t.dim != cfg.dims {
            return Err(crate::ranking::RankingError::DimensionMismatch {
                expected: cfg.dims,
                actual: t.dim,
            }
            .into());
        }
    }
    let start = Instant::now();
    let edges = extract_edges(img, &cfg.canny, cfg.label_mode)?;
    let generation = generate_proposals(&edges.label_map, &cfg.pooling)?;
    let generated = generation.proposals.len();
    let mut proposals = generation.proposals;
    match templates {
        Some(t) => {
            let index = EdgeIndex::new(&edges.gradients, &edges.mask, cfg.signed)?;
            score_proposals(&mut proposals, &index, t)?;
            proposals = rank_and_cap(proposals, cfg.max_proposals);
            if let Some(threshold) = cfg.nms {
                proposals = nms(&proposals, threshold);
            }
        }
        None => proposals.truncate(cfg.max_proposals),
    }
    Ok(PipelineOutput {
        proposals,
        components: edges.label_map.components.len(),
        generated,
        iterations: generation.iterations,
        termination: generation.termination,
        elapsed: start.elapsed(),
    })
}

/// Edge maps and uncapped proposals of one annotated training image.
#[derive(Debug, Clone)]
pub struct AnnotatedImage {
    pub width: usize,
    pub height: usize,
    pub edges: EdgeExtraction,
    pub gt: Vec<GroundTruthBox>,
    pub proposals: Vec<Proposal>,
}

impl AnnotatedImage {
    pub fn prepare(img: &GrayImage, gt: Vec<GroundTruthBox>, cfg: &PipelineConfig) -> Result<Self, Error> {
        let edges = extract_edges(img, &cfg.canny, cfg.label_mode)?;
        let proposals = generate_proposals(&edges.label_map, &cfg.pooling)?.proposals;
        Ok(Self {
            width: img.width(),
            height: img.height(),
            edges,
            gt,
            proposals,
        })
    }

    pub fn index(&self, signed: bool) -> Result<EdgeIndex, Error> {
        Ok(EdgeIndex::new(&self.edges.gradients, &self.edges.mask, signed)?)
    }

    /// Text boxes (ground truth plus well-overlapping proposals) and
    /// sampled non-text boxes for template learning.
    pub fn training_boxes(&self, seed: u64) -> Result<(Vec<Rect>, Vec<Rect>), Error> {
        let targets: Vec<&GroundTruthBox> = self.gt.iter().filter(|g| !g.difficult).collect();
        let mut text: Vec<Rect> = targets.iter().map(|g| g.rect).collect();
        text.extend(
            self.proposals
                .iter()
                .map(|p| p.bbox)
                .filter(|b| targets.iter().any(|g| g.rect.iou(b) >= POSITIVE_MIN_IOU)),
        );
        let nontext = sample_nontext_boxes((self.width, self.height), &self.gt, NEGATIVES_PER_IMAGE, seed)?;
        Ok((text, nontext))
    }
}

/// Per-image seed derived from a run seed.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Text and non-text sample boxes gathered over several training images.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    indices: Vec<EdgeIndex>,
    text: Vec<(usize, Rect)>,
    nontext: Vec<(usize, Rect)>,
}

impl TrainingSet {
    /// `seed` drives the negative sampling; image `i` uses `image_seed(seed, i)`.
    pub fn collect(images: &[&AnnotatedImage], signed: bool, seed: u64) -> Result<Self, Error> {
        let mut set = Self {
            indices: Vec::with_capacity(images.len()),
            text: Vec::new(),
            nontext: Vec::new(),
        };
        for (i, img) in images.iter().enumerate() {
            let (text, nontext) = img.training_boxes(image_seed(seed, i))?;
            set.text.extend(text.into_iter().map(|r| (i, r)));
            set.nontext.extend(nontext.into_iter().map(|r| (i, r)));
            set.indices.push(img.index(signed)?);
        }
        Ok(set)
    }

    pub fn text_count(&self) -> usize {
        self.text.len()
    }

    pub fn nontext_count(&self) -> usize {
        self.nontext.len()
    }

    /// HoGe vectors of the text and non-text samples at `dims` bins.
    pub fn features(&self, dims: usize) -> Result<(Vec<HogeVector>, Vec<HogeVector>), Error> {
        let describe = |samples: &[(usize, Rect)]| -> Result<Vec<HogeVector>, Error> {
            samples
                .iter()
                .map(|(i, r)| Ok(self.indices[*i].hoge(r, dims)?))
                .collect()
        };
        Ok((describe(&self.text)?, describe(&self.nontext)?))
    }

    pub fn train(&self, n: usize, dims: usize, seed: u64, method: TemplateMethod) -> Result<TemplateSet, Error> {
        let (text, nontext) = self.features(dims)?;
        Ok(train_templates(&text, &nontext, n, seed, method)?)
    }
}
