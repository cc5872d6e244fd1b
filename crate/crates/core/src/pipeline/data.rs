use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::gaze::{
    parse_fixation_csv, validate_sequence, write_fixation_csv, DatasetManifest, GazeSequence,
    Split, SynthDataset,
};
use crate::hva::{generate_hva, read_hva, write_hva, HvaSet, IntegrationParams, Variant};
use crate::tensor::Tensor;

use super::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIXATION_FILE: &str = "fixations.csv";
pub const HVA_DIR: &str = "hva";

/// `(C,H,W)` tensor of 8-bit pixels scaled to `[0, 1]`.
pub fn image_tensor(
    pixels: &[u8],
    channels: usize,
    height: usize,
    width: usize,
) -> Result<Tensor, PipelineError> {
    // pixels arrive interleaved (HWC); the tensor is planar (CHW)
    if pixels.len() != channels * height * width {
        return Err(PipelineError::Data(format!(
            "{} pixels for a {channels}x{height}x{width} image",
            pixels.len()
        )));
    }
    let mut data = vec![0.0; pixels.len()];
    for (i, &p) in pixels.iter().enumerate() {
        let (pos, c) = (i / channels, i % channels);
        data[c * height * width + pos] = f64::from(p) / 255.0;
    }
    Ok(Tensor::new(&[channels, height, width], data)?)
}

/// Images, labels and gaze held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub images: BTreeMap<String, Tensor>,
    pub gaze: Vec<GazeSequence>,
}

impl Dataset {
    pub fn from_synth(ds: &SynthDataset) -> Result<Self, PipelineError> {
        let mut images = BTreeMap::new();
        for img in &ds.images {
            let r = ds.manifest.record(&img.id).ok_or_else(|| {
                PipelineError::Data(format!("image `{}` missing from the manifest", img.id))
            })?;
            images.insert(
                img.id.clone(),
                image_tensor(&img.pixels, r.channels, r.height, r.width)?,
            );
        }
        Ok(Self {
            manifest: ds.manifest.clone(),
            images,
            gaze: ds.gaze.clone(),
        })
    }

    /// Read `manifest.json`, every image it lists and, when present,
    /// `fixations.csv` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let manifest = read_manifest(dir)?;
        let mut images = BTreeMap::new();
        for r in &manifest.records {
            let path = dir.join(&r.path);
            let decoded = image::open(&path)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
            let pixels = match r.channels {
                1 => decoded.to_luma8().into_raw(),
                3 => decoded.to_rgb8().into_raw(),
                c => {
                    return Err(PipelineError::Data(format!(
                        "record `{}`: {c} channels unsupported",
                        r.id
                    )))
                }
            };
            if (decoded.height() as usize, decoded.width() as usize) != (r.height, r.width) {
                return Err(PipelineError::Data(format!(
                    "record `{}` declares {}x{} but the image is {}x{}",
                    r.id,
                    r.height,
                    r.width,
                    decoded.height(),
                    decoded.width()
                )));
            }
            images.insert(
                r.id.clone(),
                image_tensor(&pixels, r.channels, r.height, r.width)?,
            );
        }
        let fix = dir.join(FIXATION_FILE);
        let gaze = if fix.exists() {
            let f = File::open(&fix).map_err(|e| PipelineError::io(&fix, e))?;
            parse_fixation_csv(BufReader::new(f))?
        } else {
            Vec::new()
        };
        Ok(Self {
            manifest,
            images,
            gaze,
        })
    }

    /// `(id, image, label)` of every record in `split`, in manifest order.
    pub fn samples(&self, split: Split) -> Vec<(String, Tensor, usize)> {
        self.manifest
            .split(split)
            .map(|r| (r.id.clone(), self.images[&r.id].clone(), r.label))
            .collect()
    }

    /// Gaze sequences clamped to their image bounds, keeping the first
    /// sequence of each image. Returns the clamped-point total as well.
    pub fn validated_gaze(&self) -> Result<(Vec<GazeSequence>, usize), PipelineError> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut clamped = 0;
        for seq in &self.gaze {
            let r = self.manifest.record(&seq.image_id).ok_or_else(|| {
                PipelineError::Data(format!("gaze for unknown image `{}`", seq.image_id))
            })?;
            if !seen.insert(seq.image_id.clone()) {
                continue;
            }
            let (fixed, report) = validate_sequence(seq, r.height, r.width);
            clamped += report.clamped_points;
            out.push(fixed);
        }
        Ok((out, clamped))
    }

    /// HVA maps of every gazed image at its own resolution.
    pub fn build_hva(
        &self,
        n_windows: usize,
        params: &IntegrationParams,
    ) -> Result<BTreeMap<String, HvaSet>, PipelineError> {
        let (gaze, _) = self.validated_gaze()?;
        gaze.iter()
            .map(|seq| {
                let r = self
                    .manifest
                    .record(&seq.image_id)
                    .expect("validated above");
                Ok((
                    seq.image_id.clone(),
                    generate_hva(seq, n_windows, params, r.height, r.width)?,
                ))
            })
            .collect()
    }
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, PipelineError> {
    let path = dir.join(MANIFEST_FILE);
    let f = File::open(&path).map_err(|e| PipelineError::io(&path, e))?;
    Ok(DatasetManifest::from_json(BufReader::new(f))?)
}

/// Write images as PNG, the manifest and the fixation log under `dir`.
pub fn write_synth(ds: &SynthDataset, dir: &Path) -> Result<(), PipelineError> {
    for img in &ds.images {
        let r = ds.manifest.record(&img.id).ok_or_else(|| {
            PipelineError::Data(format!("image `{}` missing from the manifest", img.id))
        })?;
        let path = dir.join(&r.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        image::save_buffer(
            &path,
            &img.pixels,
            r.width as u32,
            r.height as u32,
            image::ExtendedColorType::L8,
        )
        .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let f = File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
    ds.manifest.to_json(BufWriter::new(f))?;
    write_gaze(&ds.gaze, &dir.join(FIXATION_FILE))
}

pub fn write_gaze(gaze: &[GazeSequence], path: &Path) -> Result<(), PipelineError> {
    let f = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(write_fixation_csv(gaze, BufWriter::new(f))?)
}

fn hva_path(dir: &Path, id: &str, variant: Variant) -> std::path::PathBuf {
    dir.join(format!("{id}.{}.hva", variant.suffix()))
}

/// One file per image and variant: `<id>.I.hva` and `<id>.D.hva`.
pub fn write_hva_dir(hva: &BTreeMap<String, HvaSet>, dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    for (id, set) in hva {
        for variant in [Variant::Integration, Variant::Disintegration] {
            let path = hva_path(dir, id, variant);
            let f = File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
            write_hva(set.maps(variant), BufWriter::new(f))?;
        }
    }
    Ok(())
}

/// Read the HVA files of `ids` from `dir`.
pub fn read_hva_dir<'a>(
    dir: &Path,
    ids: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, HvaSet>, PipelineError> {
    let mut out = BTreeMap::new();
    for id in ids {
        let load = |variant| -> Result<_, PipelineError> {
            let path = hva_path(dir, id, variant);
            let f = File::open(&path).map_err(|e| PipelineError::io(&path, e))?;
            Ok(read_hva(BufReader::new(f))?)
        };
        let set = HvaSet {
            image_id: id.to_string(),
            integration: load(Variant::Integration)?,
            disintegration: load(Variant::Disintegration)?,
        };
        set.validate()?;
        out.insert(id.to_string(), set);
    }
    Ok(out)
}
