//! Synthetic conformance maps and rendered text images.
//!
//! Three hand-built label maps exercise grouping directly: a three-component
//! row that yields six proposals, a staircase whose steps overlap vertically,
//! and a pair with no vertical overlap. Each map also renders to an image.
//! The text corpus is twenty seeded images of block-font words on a plain
//! background with non-text clutter kept to its own horizontal band.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edges::EdgeLabelMap;
use crate::geometry::Rect;
use crate::ingest::{
    write_icdar_ground_truth, DatasetManifest, GrayImage, GroundTruthBox, GtFormat, IngestError,
    ManifestEntry,
};

pub const DEFAULT_FIXTURE_SEED: u64 = 17;
pub const CORPUS_SIZE: usize = 20;
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const CORPUS_FILE: &str = "corpus.csv";

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// 5×7 block font, one byte per row, bit 4 is the leftmost column.
fn glyph(c: char) -> Option<[u8; GLYPH_H]> {
    Some(match c {
        'A' => [0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        _ => return None,
    })
}

/// One image with its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub image: GrayImage,
    pub gt: Vec<GroundTruthBox>,
}

fn gt_box(rect: Rect, text: Option<&str>) -> GroundTruthBox {
    GroundTruthBox {
        rect,
        transcription: text.map(str::to_string),
        difficult: false,
        oriented: None,
    }
}

/// Draws `word` with its top-left glyph pixel at `(x, y)`, each font pixel a
/// `scale × scale` block and `scale` pixels between letters. Returns the
/// tight box of the drawn pixels.
pub fn draw_word(img: &mut GrayImage, word: &str, x: usize, y: usize, scale: usize, ink: u8) -> Rect {
    let (mut x_min, mut y_min, mut x_max, mut y_max) = (usize::MAX, usize::MAX, 0, 0);
    for (i, c) in word.chars().enumerate() {
        let rows = glyph(c.to_ascii_uppercase()).unwrap_or([0; GLYPH_H]);
        let gx = x + i * (GLYPH_W + 1) * scale;
        for (r, bits) in rows.iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits & (0x10 >> col) == 0 {
                    continue;
                }
                let px = gx + col * scale;
                let py = y + r * scale;
                for dy in 0..scale {
                    for dx in 0..scale {
                        img.set(px + dx, py + dy, ink);
                    }
                }
                x_min = x_min.min(px);
                y_min = y_min.min(py);
                x_max = x_max.max(px + scale);
                y_max = y_max.max(py + scale);
            }
        }
    }
    Rect::new(x_min as f64, y_min as f64, x_max as f64, y_max as f64)
}

/// Width in pixels of `letters` glyphs drawn by [`draw_word`].
pub fn word_width(letters: usize, scale: usize) -> usize {
    (letters * (GLYPH_W + 1) - 1) * scale
}

/// Label map from rows of digits, `.` for background.
fn map_from_rows(rows: &[&str]) -> EdgeLabelMap {
    let width = rows[0].len();
    let ids = rows
        .iter()
        .flat_map(|r| r.chars().map(|c| c.to_digit(10).unwrap_or(0)))
        .collect();
    EdgeLabelMap::from_id_grid(width, rows.len(), ids).expect("fixture maps are rectangular")
}

/// Three vertical bars whose pooling emits `{1}, {2}, {3}, {1,2}, {2,3}`
/// and `{1,2,3}` under the default 1×3 / stride 1×2 max pooling.
pub fn three_component_map() -> EdgeLabelMap {
    map_from_rows(&["1..2...3....", "1..2...3....", "1..2...3...."])
}

/// Five blocks stepping down to the right, each sharing rows with the next.
pub fn staircase_map() -> EdgeLabelMap {
    map_from_rows(&[
        "11..............",
        "11..22..........",
        "11..22..33......",
        "....22..33..44..",
        "........33..44.5",
        "............44.5",
        "...............5",
    ])
}

/// Two blocks whose row ranges are disjoint.
pub fn no_overlap_pair_map() -> EdgeLabelMap {
    map_from_rows(&[
        "111.......",
        "111.......",
        "111.......",
        "..........",
        "......222.",
        "......222.",
        "......222.",
    ])
}

/// Renders every non-zero map cell as a dark `scale × scale` block on a
/// light background, framed by `margin` pixels.
pub fn render_map(map: &EdgeLabelMap, scale: usize, margin: usize) -> GrayImage {
    let w = map.width * scale + 2 * margin;
    let h = map.height * scale + 2 * margin;
    let mut img = GrayImage::filled(w, h, 220).expect("non-empty map");
    for r in 0..map.height {
        for c in 0..map.width {
            if map.ids[r * map.width + c] == 0 {
                continue;
            }
            for dy in 0..scale {
                for dx in 0..scale {
                    img.set(margin + c * scale + dx, margin + r * scale + dy, 30);
                }
            }
        }
    }
    img
}

/// Box of a group of components of `map` after [`render_map`].
fn rendered_box(map: &EdgeLabelMap, ids: &[u32], scale: usize, margin: usize) -> Rect {
    let b = ids
        .iter()
        .map(|&id| map.component(id).bbox)
        .reduce(|a, b| a.union(&b))
        .expect("at least one id");
    let s = scale as f64;
    let m = margin as f64;
    Rect::new(b.x_min * s + m, b.y_min * s + m, b.x_max * s + m, b.y_max * s + m)
}

/// Scale and margin used when rendering the three synthetic maps.
pub const SYNTHETIC_SCALE: (usize, usize) = (6, 8);

/// The three synthetic cases as images. The first two carry one box around
/// all components, the pair one box per component.
pub fn synthetic_fixtures() -> Vec<Fixture> {
    let (s, m) = SYNTHETIC_SCALE;
    let three = three_component_map();
    let stairs = staircase_map();
    let pair = no_overlap_pair_map();
    vec![
        Fixture {
            name: "three_components".into(),
            image: render_map(&three, s, m),
            gt: vec![gt_box(rendered_box(&three, &[1, 2, 3], s, m), None)],
        },
        Fixture {
            name: "staircase".into(),
            image: render_map(&stairs, s, m),
            gt: vec![gt_box(rendered_box(&stairs, &[1, 2, 3, 4, 5], s, m), None)],
        },
        Fixture {
            name: "no_overlap_pair".into(),
            gt: vec![
                gt_box(rendered_box(&pair, &[1], s, m), None),
                gt_box(rendered_box(&pair, &[2], s, m), None),
            ],
            image: render_map(&pair, s, m),
        },
    ]
}

const WORDS: &[&str] = &[
    "OPEN", "EXIT", "SALE", "CAFE", "STOP", "HOTEL", "PARK", "TAXI", "BANK", "ROAD", "2024", "BUS",
    "SHOP", "FOOD", "MAIN", "NORTH", "WEST", "GATE", "CITY", "INFO", "BAR", "PUSH", "PULL", "AREA",
    "ZONE", "FIRE", "WAY", "KEY", "MENU", "SIGN", "TEXT", "HALL", "999", "QUIZ", "JAZZ",
];

pub const CORPUS_WIDTH: usize = 192;
pub const CORPUS_HEIGHT: usize = 96;
const WORD_GAP_GLYPHS: usize = 4;
const BAND_GAP: usize = 10;

fn fill_disc(img: &mut GrayImage, cx: f64, cy: f64, rx: f64, ry: f64, value: u8, band: (usize, usize)) {
    for y in band.0..band.1 {
        for x in 0..img.width() {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                img.set(x, y, value);
            }
        }
    }
}

fn draw_ring(img: &mut GrayImage, cx: f64, cy: f64, r: f64, thickness: f64, value: u8, band: (usize, usize)) {
    for y in band.0..band.1 {
        for x in 0..img.width() {
            let d = (x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy);
            if (d - r).abs() <= thickness / 2.0 {
                img.set(x, y, value);
            }
        }
    }
}

fn draw_segment(img: &mut GrayImage, from: (f64, f64), to: (f64, f64), thickness: f64, value: u8, band: (usize, usize)) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len2 = dx * dx + dy * dy;
    for y in band.0..band.1 {
        for x in 0..img.width() {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let t = (((px - from.0) * dx + (py - from.1) * dy) / len2).clamp(0.0, 1.0);
            let d = (px - from.0 - t * dx).hypot(py - from.1 - t * dy);
            if d <= thickness / 2.0 {
                img.set(x, y, value);
            }
        }
    }
}

/// Round and slanted shapes confined to rows `band`.
fn draw_clutter(img: &mut GrayImage, rng: &mut ChaCha8Rng, band: (usize, usize), ink: u8) {
    let (top, bottom) = (band.0 as f64, band.1 as f64);
    let height = bottom - top;
    let width = img.width() as f64;
    let shapes = rng.gen_range(2..=4);
    for _ in 0..shapes {
        let cx = rng.gen_range(12.0..width - 12.0);
        let cy = top + height / 2.0 + rng.gen_range(-2.0..2.0);
        let r = (height / 2.0 - 2.0).max(3.0);
        match rng.gen_range(0..3) {
            0 => draw_ring(img, cx, cy, r * rng.gen_range(0.6..1.0), 2.0, ink, band),
            1 => fill_disc(img, cx, cy, r * rng.gen_range(1.2..2.5), r * rng.gen_range(0.5..1.0), ink, band),
            _ => {
                let half = rng.gen_range(6.0..14.0);
                let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                draw_segment(
                    img,
                    (cx - half, cy - dir * (r - 1.0)),
                    (cx + half, cy + dir * (r - 1.0)),
                    2.0,
                    ink,
                    band,
                );
            }
        }
    }
}

/// Lays out one line of words starting at row `y`; returns their boxes.
fn draw_text_line(
    img: &mut GrayImage,
    rng: &mut ChaCha8Rng,
    y: usize,
    scale: usize,
    ink: u8,
) -> Vec<GroundTruthBox> {
    let margin = 6;
    let avail = img.width() - 2 * margin;
    let gap = WORD_GAP_GLYPHS * scale;
    let mut words: Vec<&str> = Vec::new();
    let mut used = 0;
    for _ in 0..rng.gen_range(1..=3) {
        let w = *WORDS.choose(rng).expect("word list is non-empty");
        let extra = word_width(w.len(), scale) + if words.is_empty() { 0 } else { gap };
        if used + extra > avail {
            break;
        }
        used += extra;
        words.push(w);
    }
    if words.is_empty() {
        let w = *WORDS.iter().min_by_key(|w| w.len()).expect("word list is non-empty");
        used = word_width(w.len(), scale);
        words.push(w);
    }
    let mut x = margin + rng.gen_range(0..=avail - used);
    let mut boxes = Vec::new();
    for w in words {
        let rect = draw_word(img, w, x, y, scale, ink);
        boxes.push(gt_box(rect, Some(w)));
        x += word_width(w.len(), scale) + gap;
    }
    boxes
}

/// One rendered corpus image: two text lines and a clutter band, in a
/// seeded vertical order.
pub fn render_text_image(seed: u64) -> (GrayImage, Vec<GroundTruthBox>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dark_text = rng.gen_bool(0.7);
    let (bg, ink, clutter_ink) = if dark_text {
        (rng.gen_range(180..=230), rng.gen_range(20..=70), rng.gen_range(60..=120))
    } else {
        (rng.gen_range(20..=60), rng.gen_range(190..=240), rng.gen_range(130..=180))
    };
    let mut img = GrayImage::filled(CORPUS_WIDTH, CORPUS_HEIGHT, bg).expect("fixed size");
    let scales = [rng.gen_range(2..=3), 2];
    let clutter_height = 18;
    let mut bands: Vec<Option<usize>> = vec![Some(0), Some(1), None];
    bands.shuffle(&mut rng);

    let mut y = 5;
    let mut gt = Vec::new();
    for band in bands {
        match band {
            Some(line) => {
                let s = scales[line];
                gt.extend(draw_text_line(&mut img, &mut rng, y, s, ink));
                y += GLYPH_H * s + BAND_GAP;
            }
            None => {
                draw_clutter(&mut img, &mut rng, (y, y + clutter_height), clutter_ink);
                y += clutter_height + BAND_GAP;
            }
        }
    }
    (img, gt)
}

/// The seeded twenty-image text corpus.
pub fn text_corpus(seed: u64) -> Vec<Fixture> {
    (0..CORPUS_SIZE)
        .map(|i| {
            let (image, gt) = render_text_image(seed.wrapping_mul(1000).wrapping_add(i as u64));
            Fixture {
                name: format!("text_{i:02}"),
                image,
                gt,
            }
        })
        .collect()
}

/// Paths written by [`write_fixtures`].
#[derive(Debug, Clone)]
pub struct FixturePaths {
    /// All 23 cases.
    pub manifest: PathBuf,
    /// The 20 rendered text images only.
    pub corpus: PathBuf,
}

fn write_case(dir: &Path, f: &Fixture) -> Result<ManifestEntry, IngestError> {
    let image = dir.join(format!("{}.png", f.name));
    let ground_truth = dir.join(format!("{}.gt.txt", f.name));
    f.image.save_png(&image)?;
    write_icdar_ground_truth(&f.gt, &ground_truth)?;
    Ok(ManifestEntry {
        image,
        ground_truth,
        format: GtFormat::Icdar,
    })
}

/// Writes every fixture as PNG plus ICDAR ground truth, with a manifest of
/// all cases and one of the text corpus.
pub fn write_fixtures(dir: &Path, seed: u64) -> Result<FixturePaths, IngestError> {
    std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut all = DatasetManifest::default();
    for f in synthetic_fixtures() {
        all.entries.push(write_case(dir, &f)?);
    }
    let mut corpus = DatasetManifest::default();
    for f in text_corpus(seed) {
        let entry = write_case(dir, &f)?;
        all.entries.push(entry.clone());
        corpus.entries.push(entry);
    }
    let paths = FixturePaths {
        manifest: dir.join(MANIFEST_FILE),
        corpus: dir.join(CORPUS_FILE),
    };
    all.save(&paths.manifest)?;
    corpus.save(&paths.corpus)?;
    Ok(paths)
}
