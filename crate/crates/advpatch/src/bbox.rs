//! Normalized bounding boxes and the text label format.
//!
//! Labels are one object per line: `class_id cx cy w h`, whitespace-separated
//! decimals normalized to image dimensions.

use crate::error::{Error, Result};

const EDGE_TOL: f64 = 1e-9;

/// Center-format box normalized to `[0, 1]` image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(class_id: u32, cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox {
            class_id,
            cx,
            cy,
            w,
            h,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.cx)
            && (0.0..=1.0).contains(&self.cy)
            && self.w > 0.0
            && self.w <= 1.0
            && self.h > 0.0
            && self.h <= 1.0
            && self.cx - self.w / 2.0 >= -EDGE_TOL
            && self.cx + self.w / 2.0 <= 1.0 + EDGE_TOL
            && self.cy - self.h / 2.0 >= -EDGE_TOL
            && self.cy + self.h / 2.0 <= 1.0 + EDGE_TOL;
        if !ok {
            return Err(Error::input(format!(
                "box out of range: class={} cx={} cy={} w={} h={}",
                self.class_id, self.cx, self.cy, self.w, self.h
            )));
        }
        Ok(())
    }

    /// Corner coordinates `(x0, y0, x1, y1)` in normalized units.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection over union in normalized coordinates.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let (ax0, ay0, ax1, ay1) = self.corners();
        let (bx0, by0, bx1, by1) = other.corners();
        let ix = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let iy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Parses one label line. `None` for blank lines.
    pub fn parse_label_line(line: &str) -> Result<Option<Self>> {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            return Ok(None);
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::input(format!(
                "expected 5 fields 'class cx cy w h', got {}",
                fields.len()
            )));
        }
        let class_id: u32 = fields[0]
            .parse()
            .map_err(|_| Error::input(format!("bad class id '{}'", fields[0])))?;
        let mut vals = [0.0f64; 4];
        for (i, f) in fields[1..].iter().enumerate() {
            vals[i] = f
                .parse()
                .map_err(|_| Error::input(format!("bad number '{f}'")))?;
        }
        BoundingBox::new(class_id, vals[0], vals[1], vals[2], vals[3]).map(Some)
    }

    pub fn to_label_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.class_id, self.cx, self.cy, self.w, self.h
        )
    }
}
