//! Turning object detections of a real scene into a block configuration.
//!
//! Each detected class maps to one color. Boxes resting on top of other
//! boxes become stacked blocks; the rest stand on the table, left to right.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{Color, Configuration};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
}

impl Detection {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Detection {
        Detection {
            x_min: self.x_min + dx,
            x_max: self.x_max + dx,
            y_min: self.y_min + dy,
            y_max: self.y_max + dy,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum ReimagineError {
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("class {0:?} has no color")]
    UnknownClass(String),
    #[error("class {0:?} detected more than once")]
    DuplicateClass(String),
    #[error("ambiguous stacking: {}", pairs.iter().map(|(a, b)| format!("{a} on {b}")).collect::<Vec<_>>().join(", "))]
    Ambiguous { pairs: Vec<(String, String)> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line per detection: `label x_min y_min x_max y_max score`, tab
/// separated. Blank lines and `#` comments are ignored.
pub fn parse_detections(text: &str) -> Result<Vec<Detection>, ReimagineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(ReimagineError::Parse { row, msg: format!("expected 6 fields, found {}", f.len()) });
        }
        let mut nums = [0.0; 5];
        for (k, s) in f[1..].iter().enumerate() {
            nums[k] = s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ReimagineError::Parse { row, msg: format!("bad number {s:?}") })?;
        }
        let [x_min, y_min, x_max, y_max, score] = nums;
        if x_min >= x_max || y_min >= y_max {
            return Err(ReimagineError::Parse { row, msg: "box has no positive area".into() });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(ReimagineError::Parse { row, msg: format!("score {score} outside [0,1]") });
        }
        out.push(Detection { label: f[0].trim().to_string(), x_min, y_min, x_max, y_max, score });
    }
    Ok(out)
}

pub fn load_detections(path: &Path) -> Result<Vec<Detection>, ReimagineError> {
    parse_detections(&fs::read_to_string(path)?)
}

/// Injective mapping from class names to colors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassMap(BTreeMap<String, Color>);

impl ClassMap {
    pub fn new(pairs: impl IntoIterator<Item = (String, Color)>) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (label, color) in pairs {
            if map.values().any(|&c| c == color) {
                return Err(format!("color {color} assigned twice"));
            }
            if map.insert(label.clone(), color).is_some() {
                return Err(format!("class {label:?} listed twice"));
            }
        }
        Ok(ClassMap(map))
    }

    pub fn color(&self, label: &str) -> Option<Color> {
        self.0.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `label<TAB>color-letter` lines.
pub fn parse_class_map(text: &str) -> Result<ClassMap, ReimagineError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, letter) = line
            .split_once('\t')
            .ok_or_else(|| ReimagineError::Parse { row, msg: "expected label<TAB>color".into() })?;
        let mut chars = letter.trim().chars();
        let color = match (chars.next().and_then(Color::from_letter), chars.next()) {
            (Some(c), None) => c,
            _ => return Err(ReimagineError::Parse { row, msg: format!("bad color {letter:?}") }),
        };
        pairs.push((label.trim().to_string(), color));
    }
    let row = text.lines().count();
    ClassMap::new(pairs).map_err(|msg| ReimagineError::Parse { row, msg })
}

pub fn load_class_map(path: &Path) -> Result<ClassMap, ReimagineError> {
    parse_class_map(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Detections scoring below this are dropped.
    pub min_score: f64,
    /// Horizontal overlap, as a fraction of the upper box's width.
    pub overlap: f64,
    /// Allowed gap between the upper box's bottom and the lower box's top,
    /// as a fraction of the lower box's height.
    pub gap: f64,
    pub max_blocks: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { min_score: 0.5, overlap: 0.5, gap: 0.1, max_blocks: crate::model::MAX_BLOCKS }
    }
}

/// Whether `a` rests on `b` (image y grows downward).
pub fn rests_on(a: &Detection, b: &Detection, th: &Thresholds) -> bool {
    let overlap = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    overlap >= th.overlap * a.width() && (a.y_max - b.y_min).abs() <= th.gap * b.height()
}

/// Builds the configuration for one image's detections.
pub fn to_blocks(dets: &[Detection], map: &ClassMap, th: &Thresholds) -> Result<Configuration, ReimagineError> {
    let mut kept: Vec<&Detection> = dets.iter().filter(|d| d.score >= th.min_score).collect();
    kept.sort_by(|a, b| b.score.total_cmp(&a.score));
    kept.truncate(th.max_blocks);
    for (i, d) in kept.iter().enumerate() {
        if map.color(&d.label).is_none() {
            return Err(ReimagineError::UnknownClass(d.label.clone()));
        }
        if kept[..i].iter().any(|e| e.label == d.label) {
            return Err(ReimagineError::DuplicateClass(d.label.clone()));
        }
    }

    let n = kept.len();
    let mut support: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut carries: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            if a != b && rests_on(kept[a], kept[b], th) {
                support[a].push(b);
                carries[b].push(a);
            }
        }
    }
    let pair = |a: usize, b: usize| (kept[a].label.clone(), kept[b].label.clone());
    let mut ambiguous: Vec<(String, String)> = Vec::new();
    for a in 0..n {
        if support[a].len() > 1 {
            ambiguous.extend(support[a].iter().map(|&b| pair(a, b)));
        }
        if carries[a].len() > 1 {
            ambiguous.extend(carries[a].iter().map(|&c| pair(c, a)));
        }
    }
    if !ambiguous.is_empty() {
        ambiguous.sort();
        ambiguous.dedup();
        return Err(ReimagineError::Ambiguous { pairs: ambiguous });
    }

    let mut bottoms: Vec<usize> = (0..n).filter(|&a| support[a].is_empty()).collect();
    bottoms.sort_by(|&a, &b| kept[a].x_min.total_cmp(&kept[b].x_min));
    let mut stacks = Vec::new();
    let mut placed = 0;
    for b in bottoms {
        let mut stack = vec![b];
        while let Some(&up) = carries[*stack.last().expect("non-empty")].first() {
            stack.push(up);
        }
        placed += stack.len();
        stacks.push(stack.iter().map(|&i| map.color(&kept[i].label).expect("checked")).collect());
    }
    if placed != n {
        // whatever is left supports itself in a loop
        let pairs = (0..n).filter_map(|a| support[a].first().map(|&b| pair(a, b))).collect();
        return Err(ReimagineError::Ambiguous { pairs });
    }
    Ok(Configuration::from_stacks(stacks).expect("distinct colors, at most five blocks"))
}
