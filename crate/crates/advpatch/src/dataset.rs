//! Dataset ingestion: images paired with text label files.

use std::path::{Path, PathBuf};

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::tensor::{self, ImageTensor};

/// An RGB image in `[0, 1]` plus its ground-truth boxes.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub image: ImageTensor,
    pub boxes: Vec<BoundingBox>,
}

impl LabeledImage {
    pub fn new(image: ImageTensor, boxes: Vec<BoundingBox>) -> Result<Self> {
        if !tensor::in_unit_range(&image) {
            return Err(Error::argument("image values must lie in [0, 1]"));
        }
        Ok(LabeledImage { image, boxes })
    }

    pub fn dims(&self) -> (usize, usize) {
        let (h, w, _) = self.image.dim();
        (h, w)
    }

    /// Boxes belonging to the person class.
    pub fn person_boxes(&self, person_class_id: u32) -> Vec<BoundingBox> {
        self.boxes
            .iter()
            .copied()
            .filter(|b| b.class_id == person_class_id)
            .collect()
    }
}

/// Filename-sorted pairing of image files with label files.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    entries: Vec<(PathBuf, PathBuf)>,
}

impl DatasetIndex {
    pub fn entries(&self) -> &[(PathBuf, PathBuf)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Decodes entry `i` into memory.
    pub fn load(&self, i: usize) -> Result<LabeledImage> {
        let (img_path, label_path) = &self.entries[i];
        let image = tensor::load_png(img_path)?;
        let boxes = parse_label_file(label_path)?;
        LabeledImage::new(image, boxes)
    }

    /// Decodes the whole index in order.
    pub fn load_all(&self) -> Result<Vec<LabeledImage>> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }
}

fn parse_label_file(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        match BoundingBox::parse_label_line(line) {
            Ok(Some(b)) => boxes.push(b),
            Ok(None) => {}
            Err(Error::Input(msg)) => {
                return Err(Error::input(format!(
                    "{}:{}: {msg}",
                    path.display(),
                    lineno + 1
                )));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(boxes)
}

/// Scans `images_dir` for PNGs and pairs each with `<stem>.txt` in
/// `labels_dir`. Ordering is lexicographic by filename bytes, so iteration
/// order is stable across platforms.
pub fn load_dataset(images_dir: &Path, labels_dir: &Path) -> Result<DatasetIndex> {
    let mut image_files: Vec<PathBuf> = Vec::new();
    let read = std::fs::read_dir(images_dir).map_err(|e| Error::io(images_dir, e))?;
    for entry in read {
        let entry = entry.map_err(|e| Error::io(images_dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            image_files.push(path);
        }
    }
    image_files.sort_by(|a, b| {
        a.file_name()
            .unwrap()
            .as_encoded_bytes()
            .cmp(b.file_name().unwrap().as_encoded_bytes())
    });

    let mut entries = Vec::with_capacity(image_files.len());
    for img in image_files {
        let stem = img
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::input(format!("bad image filename {}", img.display())))?;
        let label = labels_dir.join(format!("{stem}.txt"));
        if !label.exists() {
            return Err(Error::input(format!(
                "missing label file for image {}: expected {}",
                img.display(),
                label.display()
            )));
        }
        entries.push((img, label));
    }
    Ok(DatasetIndex { entries })
}

/// Composites the patch onto every image and writes the adversarial set:
/// `<out_dir>/images/*.png` plus copied label files under
/// `<out_dir>/labels/`. Returns the number of samples written.
///
/// Draws are keyed by `(seed, image index)`, so a re-export with the same
/// seed is byte-identical.
pub fn export_adv_dataset(
    patch: &crate::patch::Patch,
    index: &DatasetIndex,
    transform: &crate::transform::TransformConfig,
    person_class_id: u32,
    seed: u64,
    out_dir: &Path,
) -> Result<usize> {
    use crate::transform::{apply_patch, RandomDraw};

    let images_out = out_dir.join("images");
    let labels_out = out_dir.join("labels");
    std::fs::create_dir_all(&images_out).map_err(|e| Error::io(&images_out, e))?;
    std::fs::create_dir_all(&labels_out).map_err(|e| Error::io(&labels_out, e))?;

    for (i, (img_path, label_path)) in index.entries().iter().enumerate() {
        let sample = index.load(i)?;
        let n_boxes = sample.person_boxes(person_class_id).len();
        let draw = RandomDraw::sample(
            transform,
            (patch.height(), patch.width()),
            seed,
            0,
            i as u64,
            n_boxes,
        );
        let adv = apply_patch(patch, &sample, transform, &draw, person_class_id)?;
        let name = img_path.file_name().expect("indexed image has a name");
        tensor::save_png(&adv.image, &images_out.join(name))?;
        let label_name = label_path.file_name().expect("indexed label has a name");
        std::fs::copy(label_path, labels_out.join(label_name))
            .map_err(|e| Error::io(label_path, e))?;
    }
    Ok(index.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn write_png(dir: &Path, name: &str) {
        let t = Array3::from_elem((4, 4, 3), 0.25);
        tensor::save_png(&t, &dir.join(name)).unwrap();
    }

    #[test]
    fn empty_dirs_give_empty_index() {
        let dir = tempfile::tempdir().unwrap();
        let idx = load_dataset(dir.path(), dir.path()).unwrap();
        assert!(idx.is_empty());
    }

    #[test]
    fn pairs_sorted_by_filename() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("img");
        let labels = dir.path().join("lbl");
        std::fs::create_dir_all(&images).unwrap();
        std::fs::create_dir_all(&labels).unwrap();
        for name in ["b.png", "a.png", "c.png"] {
            write_png(&images, name);
        }
        for name in ["a.txt", "b.txt", "c.txt"] {
            std::fs::write(labels.join(name), "0 0.5 0.5 0.5 0.5\n").unwrap();
        }
        let idx = load_dataset(&images, &labels).unwrap();
        assert_eq!(idx.len(), 3);
        let names: Vec<_> = idx
            .entries()
            .iter()
            .map(|(i, _)| i.file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        assert_eq!(names, ["a.png", "b.png", "c.png"]);
        let sample = idx.load(0).unwrap();
        assert_eq!(sample.boxes.len(), 1);
    }

    #[test]
    fn missing_label_is_reported_with_image_name() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("img");
        let labels = dir.path().join("lbl");
        std::fs::create_dir_all(&images).unwrap();
        std::fs::create_dir_all(&labels).unwrap();
        write_png(&images, "x.png");
        let err = load_dataset(&images, &labels).unwrap_err();
        assert!(err.to_string().contains("x.png"), "{err}");
    }

    #[test]
    fn export_is_deterministic_and_complete() {
        use crate::patch::{InitMode, Patch};
        use crate::transform::TransformConfig;

        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("img");
        let labels = dir.path().join("lbl");
        crate::synth::write_toy_dataset(&images, &labels, 3, 5, 32, 32).unwrap();
        let idx = load_dataset(&images, &labels).unwrap();
        let patch = Patch::init(8, 8, InitMode::RandomUniform, 2).unwrap();
        let cfg = TransformConfig::default();

        let out_a = dir.path().join("adv_a");
        let out_b = dir.path().join("adv_b");
        assert_eq!(
            export_adv_dataset(&patch, &idx, &cfg, 0, 9, &out_a).unwrap(),
            3
        );
        assert_eq!(
            export_adv_dataset(&patch, &idx, &cfg, 0, 9, &out_b).unwrap(),
            3
        );
        for (img, lbl) in idx.entries() {
            let name = img.file_name().unwrap();
            let a = std::fs::read(out_a.join("images").join(name)).unwrap();
            let b = std::fs::read(out_b.join("images").join(name)).unwrap();
            assert_eq!(a, b);
            let lname = lbl.file_name().unwrap();
            assert!(out_a.join("labels").join(lname).exists());
        }
        // empty dataset exports zero files
        let empty_dir = dir.path().join("none");
        std::fs::create_dir_all(&empty_dir).unwrap();
        let empty = load_dataset(&empty_dir, &empty_dir).unwrap();
        assert_eq!(
            export_adv_dataset(&patch, &empty, &cfg, 0, 9, &dir.path().join("adv_c")).unwrap(),
            0
        );
    }

    #[test]
    fn malformed_label_line_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("img");
        let labels = dir.path().join("lbl");
        std::fs::create_dir_all(&images).unwrap();
        std::fs::create_dir_all(&labels).unwrap();
        write_png(&images, "x.png");
        std::fs::write(labels.join("x.txt"), "0 0.5 0.5 0.5 0.5\n0 0.5 0.5 1.2 0.3\n").unwrap();
        let idx = load_dataset(&images, &labels).unwrap();
        let err = idx.load(0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x.txt") && msg.contains(":2:"), "{msg}");
    }
}
