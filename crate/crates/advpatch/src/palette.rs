//! Printable-color palettes.
//!
//! A palette is the set of RGB triplets a printer can actually reproduce.
//! The text format is one color per line, three decimals in `[0, 1]`
//! separated by commas; lines starting with `#` are comments.

use std::path::Path;

use crate::error::{Error, Result};

/// Nonempty, duplicate-free list of printable RGB colors.
#[derive(Debug, Clone, PartialEq)]
pub struct PrintPalette {
    colors: Vec<[f64; 3]>,
}

impl PrintPalette {
    /// Builds a palette, dropping exact duplicate triplets (first wins).
    pub fn new(colors: Vec<[f64; 3]>) -> Result<Self> {
        let mut unique: Vec<[f64; 3]> = Vec::with_capacity(colors.len());
        for c in colors {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::argument(format!(
                    "palette color {c:?} outside [0, 1]"
                )));
            }
            if !unique.contains(&c) {
                unique.push(c);
            }
        }
        if unique.is_empty() {
            return Err(Error::argument("palette must contain at least one color"));
        }
        Ok(PrintPalette { colors: unique })
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut colors = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::input(format!(
                    "palette line {}: expected 3 comma-separated values, got {}",
                    lineno + 1,
                    parts.len()
                )));
            }
            let mut c = [0.0; 3];
            for (i, p) in parts.iter().enumerate() {
                c[i] = p.parse::<f64>().map_err(|_| {
                    Error::input(format!("palette line {}: bad number '{p}'", lineno + 1))
                })?;
            }
            colors.push(c);
        }
        PrintPalette::new(colors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PrintPalette::parse(&text).map_err(|e| match e {
            Error::Input(msg) => Error::input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.colors {
            out.push_str(&format!("{}, {}, {}\n", c[0], c[1], c[2]));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

/// Reduces a set of measured colors to `target_count` representatives.
///
/// Greedy farthest-point (k-center) selection: deterministic, seeded from the
/// lexicographically smallest color, 2-approximation of the optimal covering
/// radius. Inputs at or below the target count are returned as-is after
/// deduplication.
pub fn build_palette(measured: &[[f64; 3]], target_count: usize) -> Result<PrintPalette> {
    if measured.is_empty() {
        return Err(Error::argument("no measured colors supplied"));
    }
    if target_count == 0 {
        return Err(Error::argument("target_count must be at least 1"));
    }
    let deduped = PrintPalette::new(measured.to_vec())?;
    let points = deduped.colors();
    if points.len() <= target_count {
        return Ok(deduped);
    }

    let start = points
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut chosen = vec![start];
    let mut min_dist: Vec<f64> = points.iter().map(|p| dist(p, &points[start])).collect();
    while chosen.len() < target_count {
        // farthest point from the chosen set; ties break on the smaller index
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, d) in min_dist.iter().enumerate() {
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        chosen.push(best);
        for (i, d) in min_dist.iter_mut().enumerate() {
            let nd = dist(&points[i], &points[best]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    PrintPalette::new(chosen.into_iter().map(|i| points[i]).collect())
}

/// Largest distance from any measured color to its nearest palette entry.
pub fn coverage_radius(measured: &[[f64; 3]], palette: &PrintPalette) -> f64 {
    measured
        .iter()
        .map(|m| {
            palette
                .colors()
                .iter()
                .map(|c| dist(m, c))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
