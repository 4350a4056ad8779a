//! Text / non-text HoGe templates: learning and the on-disk format.
//!
//! File layout: a header line `hoge-templates v1 dims=D n=N`, then `2N`
//! lines of `D` space-separated decimals, text templates first.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::hoge::HogeVector;

use super::kmeans::{kmeans, medoids, KMeansParams};
use super::RankingError;

pub const DEFAULT_TEMPLATE_COUNT: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub text: Vec<Vec<f64>>,
    pub nontext: Vec<Vec<f64>>,
    pub dim: usize,
}

/// How a cluster is turned into a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemplateMethod {
    /// Re-normalised cluster mean.
    #[default]
    Centroid,
    /// Most central training sample of the cluster.
    Exemplar,
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

fn learn_class(
    samples: &[HogeVector],
    n: usize,
    seed: u64,
    method: TemplateMethod,
    class: &'static str,
) -> Result<Vec<Vec<f64>>, RankingError> {
    let points: Vec<Vec<f64>> = samples
        .iter()
        .filter(|s| !s.empty)
        .map(|s| s.bins.clone())
        .collect();
    if points.len() < n {
        return Err(RankingError::InsufficientSamples {
            class,
            needed: n,
            available: points.len(),
        });
    }
    let clustering = kmeans(&points, n, seed, &KMeansParams::default());
    let templates = match method {
        TemplateMethod::Centroid => clustering.centroids,
        TemplateMethod::Exemplar => medoids(&points, &clustering),
    };
    Ok(templates.iter().map(|t| normalized(t)).collect())
}

/// Per-class k-means with `k = n`.
pub fn train_templates(
    samples_text: &[HogeVector],
    samples_nontext: &[HogeVector],
    n: usize,
    seed: u64,
    method: TemplateMethod,
) -> Result<TemplateSet, RankingError> {
    if n == 0 {
        return Err(RankingError::InsufficientSamples {
            class: "text",
            needed: 1,
            available: 0,
        });
    }
    let dim = samples_text
        .first()
        .or(samples_nontext.first())
        .map(HogeVector::dim)
        .unwrap_or(0);
    if let Some(bad) = samples_text
        .iter()
        .chain(samples_nontext)
        .find(|s| s.dim() != dim)
    {
        return Err(RankingError::DimensionMismatch {
            expected: dim,
            actual: bad.dim(),
        });
    }
    let text = learn_class(samples_text, n, seed, method, "text")?;
    let nontext = learn_class(samples_nontext, n, seed.wrapping_add(1), method, "non-text")?;
    Ok(TemplateSet { text, nontext, dim })
}

impl TemplateSet {
    pub fn n(&self) -> usize {
        self.text.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("hoge-templates v1 dims={} n={}\n", self.dim, self.n());
        for t in self.text.iter().chain(&self.nontext) {
            let line: Vec<String> = t.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RankingError> {
        let bad = |line: usize, msg: &str| RankingError::TemplateFormat {
            line,
            message: msg.to_string(),
        };
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let header = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "hoge-templates" || fields[1] != "v1" {
            return Err(bad(1, "expected `hoge-templates v1 dims=D n=N`"));
        }
        let dim: usize = fields[2]
            .strip_prefix("dims=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, "bad dims"))?;
        let n: usize = fields[3]
            .strip_prefix("n=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, "bad n"))?;
        if dim < 2 || n == 0 {
            return Err(bad(1, "dims must be >= 2 and n >= 1"));
        }
        let mut rows = Vec::with_capacity(2 * n);
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad(i + 2, "not a number"))?;
            if row.len() != dim {
                return Err(bad(i + 2, "wrong number of values"));
            }
            rows.push(row);
        }
        if rows.len() != 2 * n {
            return Err(bad(0, &format!("expected {} template rows, found {}", 2 * n, rows.len())));
        }
        let nontext = rows.split_off(n);
        Ok(Self {
            text: rows,
            nontext,
            dim,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RankingError> {
        fs::write(path, self.to_text()).map_err(|e| RankingError::Io(path.to_path_buf(), e))
    }

    pub fn load(path: &Path) -> Result<Self, RankingError> {
        let text = fs::read_to_string(path).map_err(|e| RankingError::Io(path.to_path_buf(), e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hv(bins: &[f64]) -> HogeVector {
        HogeVector::from_raw(bins.to_vec())
    }

    #[test]
    fn one_template_is_normalized_mean() {
        let text = [hv(&[1.0, 0.0]), hv(&[0.0, 1.0])];
        let set = train_templates(&text, &text, 1, 3, TemplateMethod::Centroid).unwrap();
        let s = 0.5f64.sqrt();
        assert!((set.text[0][0] - s).abs() < 1e-12 && (set.text[0][1] - s).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_samples_are_fixed_point() {
        let d = 5;
        let samples: Vec<HogeVector> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                hv(&v)
            })
            .collect();
        for seed in 0..5 {
            let set = train_templates(&samples, &samples, d, seed, TemplateMethod::Centroid).unwrap();
            let mut got = set.text.clone();
            got.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut want: Vec<Vec<f64>> = samples.iter().map(|s| s.bins.clone()).collect();
            want.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_eq!(got, want);
        }
    }

    #[test]
    fn empty_vectors_do_not_count() {
        let text = [hv(&[1.0, 0.0]), hv(&[0.0, 0.0])];
        let err = train_templates(&text, &text, 2, 0, TemplateMethod::Centroid).unwrap_err();
        assert!(matches!(err, RankingError::InsufficientSamples { available: 1, .. }));
    }

    #[test]
    fn mixed_dims_rejected() {
        let err = train_templates(&[hv(&[1.0, 0.0])], &[hv(&[1.0, 0.0, 0.0])], 1, 0, TemplateMethod::Centroid)
            .unwrap_err();
        assert!(matches!(err, RankingError::DimensionMismatch { .. }));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let set = TemplateSet {
            text: vec![vec![0.1, 0.7, 1.0 / 3.0]],
            nontext: vec![vec![-0.0, 1e-17, 0.9999999999999999]],
            dim: 3,
        };
        let text = set.to_text();
        assert!(text.starts_with("hoge-templates v1 dims=3 n=1\n"));
        assert_eq!(TemplateSet::from_text(&text).unwrap(), set);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(TemplateSet::from_text("hoge-templates v2 dims=2 n=1\n1 0\n0 1\n").is_err());
        assert!(TemplateSet::from_text("hoge-templates v1 dims=2 n=1\n1 0\n").is_err());
        assert!(TemplateSet::from_text("hoge-templates v1 dims=2 n=1\n1 0 0\n0 1\n").is_err());
    }
}
