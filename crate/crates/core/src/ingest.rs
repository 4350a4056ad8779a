//! Image loading, ground-truth parsing, dataset manifests and the proposal
//! CSV format.
//!
//! Text inputs are UTF-8; a leading BOM and CRLF line endings are accepted.
//! Everything written uses LF.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::Rect;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unknown ground-truth format `{0}` (expected icdar, svt or msra)")]
    UnknownFormat(String),
    #[error("manifest {manifest}: {message}")]
    Manifest { manifest: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// 8-bit luminance image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, IngestError> {
        if width == 0 || height == 0 {
            return Err(IngestError::EmptyImage);
        }
        if data.len() != width * height {
            return Err(IngestError::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant-valued image.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, IngestError> {
        Self::from_raw(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    /// Image rotated 90° counter-clockwise.
    pub fn rotate90_ccw(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0u8; w * h];
        // new width = h, new height = w; new(x', y') = old(w - 1 - y', x')
        for y_new in 0..w {
            for x_new in 0..h {
                data[y_new * h + x_new] = self.get(w - 1 - y_new, x_new);
            }
        }
        GrayImage {
            width: h,
            height: w,
            data,
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), IngestError> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(source) => IngestError::Io {
                    path: path.to_path_buf(),
                    source,
                },
                other => IngestError::Decode {
                    path: path.to_path_buf(),
                    message: other.to_string(),
                },
            })
    }
}

/// Integer luminance `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

/// Load a PNG, JPEG or BMP file as grayscale.
pub fn load_gray(path: &Path) -> Result<GrayImage, IngestError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_gray(&bytes).map_err(|e| match e {
        IngestError::Decode { message, .. } => IngestError::Decode {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Decode an in-memory raster file as grayscale.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage, IngestError> {
    let decoded = image::load_from_memory(bytes).map_err(|e| IngestError::Decode {
        path: PathBuf::new(),
        message: e.to_string(),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(IngestError::EmptyImage);
    }
    let data = match decoded {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        image::DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    GrayImage::from_raw(width, height, data)
}

/// Ground-truth file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GtFormat {
    /// `x_min,y_min,x_max,y_max[,transcription]`
    Icdar,
    /// `x,y,width,height[,transcription]`
    Svt,
    /// `index difficulty x y w h angle`, angle in radians about the box centre.
    Msra,
}

impl FromStr for GtFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "icdar" => Ok(GtFormat::Icdar),
            "svt" => Ok(GtFormat::Svt),
            "msra" => Ok(GtFormat::Msra),
            other => Err(IngestError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for GtFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GtFormat::Icdar => "icdar",
            GtFormat::Svt => "svt",
            GtFormat::Msra => "msra",
        })
    }
}

/// Rotated rectangle as annotated in MSRA-TD500.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    pub angle: f64,
}

impl OrientedBox {
    /// Axis-aligned hull of the four rotated corners.
    pub fn hull(&self) -> Rect {
        let (sin, cos) = self.angle.sin_cos();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (dx, dy) in [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)] {
            let x = self.cx + dx * cos - dy * sin;
            let y = self.cy + dx * sin + dy * cos;
            r.x_min = r.x_min.min(x);
            r.y_min = r.y_min.min(y);
            r.x_max = r.x_max.max(x);
            r.y_max = r.y_max.max(y);
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub rect: Rect,
    pub transcription: Option<String>,
    pub difficult: bool,
    pub oriented: Option<OrientedBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GtWarning {
    /// Box extended past the image and was clamped.
    OutOfBounds { line: usize },
    /// Box lay entirely outside the image and was dropped.
    Dropped { line: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub boxes: Vec<GroundTruthBox>,
    pub warnings: Vec<GtWarning>,
}

pub fn parse_ground_truth(
    path: &Path,
    format: GtFormat,
    image_dims: (usize, usize),
) -> Result<GroundTruth, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_ground_truth_str(&text, format, image_dims).map_err(|e| match e {
        IngestError::Parse { line, message, .. } => IngestError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

/// Lines that carry annotations: BOM and trailing CR stripped, blank lines and
/// `#` comments skipped. Yields 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.strip_prefix('\u{feff}')
        .unwrap_or(text)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        path: PathBuf::new(),
        line,
        message: message.into(),
    }
}

fn parse_num(field: &str, line: usize) -> Result<f64, IngestError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("`{}` is not a number", field.trim())))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, "non-finite coordinate"))
    }
}

/// Splits `a,b,c,d,rest` (or whitespace-separated) into four numbers and an
/// optional trailing transcription.
fn split_four(line: &str, lineno: usize) -> Result<([f64; 4], Option<String>), IngestError> {
    let (fields, rest): (Vec<&str>, Option<String>) = if line.contains(',') {
        let mut parts = line.splitn(5, ',');
        let f: Vec<&str> = parts.by_ref().take(4).collect();
        (f, parts.next().map(str::to_string))
    } else {
        let mut parts = line.split_whitespace();
        let f: Vec<&str> = parts.by_ref().take(4).collect();
        let rest: Vec<&str> = parts.collect();
        (f, (!rest.is_empty()).then(|| rest.join(" ")))
    };
    if fields.len() < 4 {
        return Err(parse_err(lineno, "expected four coordinates"));
    }
    let mut nums = [0.0; 4];
    for (slot, f) in nums.iter_mut().zip(&fields) {
        *slot = parse_num(f, lineno)?;
    }
    let transcription = rest
        .map(|t| t.trim().trim_matches('"').to_string())
        .filter(|t| !t.is_empty());
    Ok((nums, transcription))
}

pub fn parse_ground_truth_str(
    text: &str,
    format: GtFormat,
    image_dims: (usize, usize),
) -> Result<GroundTruth, IngestError> {
    let (w, h) = (image_dims.0 as f64, image_dims.1 as f64);
    let mut out = GroundTruth::default();
    for (lineno, line) in content_lines(text) {
        let mut gt = match format {
            GtFormat::Icdar | GtFormat::Svt => {
                let ([a, b, c, d], transcription) = split_four(line, lineno)?;
                let rect = if format == GtFormat::Icdar {
                    Rect::new(a, b, c, d)
                } else {
                    Rect::new(a, b, a + c, b + d)
                };
                let difficult = transcription.as_deref() == Some("###");
                GroundTruthBox {
                    rect,
                    transcription,
                    difficult,
                    oriented: None,
                }
            }
            GtFormat::Msra => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() < 7 {
                    return Err(parse_err(lineno, "expected `index difficulty x y w h angle`"));
                }
                let difficulty = parse_num(fields[1], lineno)?;
                let v: Vec<f64> = fields[2..7]
                    .iter()
                    .map(|f| parse_num(f, lineno))
                    .collect::<Result<_, _>>()?;
                let (x, y, bw, bh, angle) = (v[0], v[1], v[2], v[3], v[4]);
                if bw <= 0.0 || bh <= 0.0 {
                    return Err(parse_err(lineno, "non-positive box size"));
                }
                let oriented = OrientedBox {
                    cx: x + bw / 2.0,
                    cy: y + bh / 2.0,
                    width: bw,
                    height: bh,
                    angle,
                };
                GroundTruthBox {
                    rect: oriented.hull(),
                    transcription: None,
                    difficult: difficulty != 0.0,
                    oriented: Some(oriented),
                }
            }
        };
        if gt.rect.is_degenerate() {
            return Err(parse_err(
                lineno,
                format!("degenerate box {} (need min < max)", gt.rect),
            ));
        }
        let clamped = gt.rect.clamp_to(w, h);
        if clamped != gt.rect {
            if clamped.is_degenerate() {
                log::warn!("ground truth line {lineno}: box {} outside image, dropped", gt.rect);
                out.warnings.push(GtWarning::Dropped { line: lineno });
                continue;
            }
            log::warn!("ground truth line {lineno}: box {} clamped to image", gt.rect);
            out.warnings.push(GtWarning::OutOfBounds { line: lineno });
            gt.rect = clamped;
        }
        out.boxes.push(gt);
    }
    Ok(out)
}

/// Serialise boxes back to the ICDAR layout.
pub fn write_icdar_ground_truth(boxes: &[GroundTruthBox], path: &Path) -> Result<(), IngestError> {
    let mut text = String::new();
    for b in boxes {
        text.push_str(&format!(
            "{},{},{},{}",
            b.rect.x_min, b.rect.y_min, b.rect.x_max, b.rect.y_max
        ));
        if let Some(t) = &b.transcription {
            text.push(',');
            text.push_str(t);
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub ground_truth: PathBuf,
    pub format: GtFormat,
}

/// List of `(image, ground truth, format)` triples.
///
/// On disk: one `image,ground_truth,format` line per entry; paths relative to
/// the manifest's directory; `#` comments allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let fail = |message: String| IngestError::Manifest {
            manifest: path.to_path_buf(),
            message,
        };
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in content_lines(&text) {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(fail(format!("line {lineno}: expected `image,ground_truth,format`")));
            }
            let image = base.join(fields[0]);
            let ground_truth = base.join(fields[1]);
            let format: GtFormat = fields[2].parse()?;
            for p in [&image, &ground_truth] {
                if !p.is_file() {
                    return Err(fail(format!("line {lineno}: {} does not exist", p.display())));
                }
            }
            if !seen.insert(image.clone()) {
                return Err(fail(format!("line {lineno}: duplicate image {}", image.display())));
            }
            entries.push(ManifestEntry {
                image,
                ground_truth,
                format,
            });
        }
        Ok(Self { entries })
    }

    /// Writes entries with paths relative to `path`'s directory when possible.
    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let rel = |p: &Path| {
            p.strip_prefix(base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut text = String::from("# image,ground_truth,format\n");
        for e in &self.entries {
            text.push_str(&format!(
                "{},{},{}\n",
                rel(&e.image),
                rel(&e.ground_truth),
                e.format
            ));
        }
        fs::write(path, text).map_err(io_err(path))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A decoded manifest entry.
#[derive(Debug, Clone)]
pub struct Sample {
    /// File stem of the image, used as the image id in proposal files.
    pub id: String,
    pub image: GrayImage,
    pub ground_truth: GroundTruth,
}

impl ManifestEntry {
    pub fn image_id(&self) -> String {
        self.image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    /// Decodes the image and parses its ground truth against its size.
    pub fn load(&self) -> Result<Sample, IngestError> {
        let image = load_gray(&self.image)?;
        let ground_truth = parse_ground_truth(&self.ground_truth, self.format, (image.width(), image.height()))?;
        Ok(Sample {
            id: self.image_id(),
            image,
            ground_truth,
        })
    }
}

/// One line of a proposals CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalRecord {
    pub image_id: String,
    pub rect: Rect,
    pub score: Option<f64>,
}

pub const PROPOSALS_HEADER: &str = "image_id,x_min,y_min,x_max,y_max,score";

/// Writes the header and one line per record. Missing scores are written as an
/// empty field.
pub fn write_proposal_records<W: Write>(
    records: impl IntoIterator<Item = ProposalRecord>,
    sink: W,
) -> io::Result<()> {
    let mut out = BufWriter::new(sink);
    writeln!(out, "{PROPOSALS_HEADER}")?;
    for r in records {
        write!(
            out,
            "{},{},{},{},{},",
            r.image_id, r.rect.x_min, r.rect.y_min, r.rect.x_max, r.rect.y_max
        )?;
        if let Some(s) = r.score {
            write!(out, "{s:.6}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Writes a ranked proposal list for one image.
pub fn write_proposals(
    proposals: &[crate::grouping::Proposal],
    image_id: &str,
    sink: &Path,
) -> Result<(), IngestError> {
    let file = fs::File::create(sink).map_err(io_err(sink))?;
    let records = proposals.iter().map(|p| ProposalRecord {
        image_id: image_id.to_string(),
        rect: p.bbox,
        score: p.score,
    });
    write_proposal_records(records, file).map_err(io_err(sink))
}

pub fn parse_proposal_records(text: &str) -> Result<Vec<ProposalRecord>, IngestError> {
    let mut out = Vec::new();
    for (lineno, line) in content_lines(text) {
        if line == PROPOSALS_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(lineno, "expected six fields"));
        }
        let mut c = [0.0; 4];
        for (slot, f) in c.iter_mut().zip(&fields[1..5]) {
            *slot = parse_num(f, lineno)?;
        }
        let score = match fields[5].trim() {
            "" => None,
            s => Some(parse_num(s, lineno)?),
        };
        out.push(ProposalRecord {
            image_id: fields[0].to_string(),
            rect: Rect::new(c[0], c[1], c[2], c[3]),
            score,
        });
    }
    Ok(out)
}

pub fn read_proposals(path: &Path) -> Result<Vec<ProposalRecord>, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_proposal_records(&text)
}
