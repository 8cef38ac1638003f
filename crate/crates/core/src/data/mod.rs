//! Dataset layout, PNG codecs and the synthetic stereo corpus.
//!
//! On disk a corpus looks like
//!
//! ```text
//! root/calibration.toml
//! root/{train,test}/tir_left/000000.png    (8-bit grey, required)
//! root/{train,test}/vis_right/000000.png   (8-bit RGB, required)
//! root/{train,test}/vis_left/000000.png    (optional)
//! root/{train,test}/tir_right/000000.png   (optional)
//! root/{train,test}/depth/000000.png       (16-bit millimetres, 0 = none; optional)
//! ```

pub mod png;
pub mod synth;
pub mod thermal;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crossdepth_autograd::{resize, ResizeMode};
use serde::{Deserialize, Serialize};

use crate::geometry::{ImagePlane, StereoCalibration};
use crate::{Error, Result};

pub use png::{colorize, read_depth_mm, read_image, write_depth_mm, write_disparity_u16, write_image};
pub use synth::{generate_scene, generate_scenes, generate_synthetic_dataset, SynthParams, SyntheticScene};
pub use thermal::{simulate_thermal, ThermalParams};

pub const CALIBRATION_FILE: &str = "calibration.toml";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    #[default]
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

/// Paths of one sample, relative to the split directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub tir_left: PathBuf,
    pub vis_right: PathBuf,
    pub vis_left: Option<PathBuf>,
    pub tir_right: Option<PathBuf>,
    pub depth: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: Split,
    pub entries: Vec<ManifestEntry>,
    pub calibration: StereoCalibration,
}

/// A decoded sample; depth is in metres with `0` marking missing values.
#[derive(Clone, Debug)]
pub struct DatasetSample {
    pub id: String,
    pub tir_left: ImagePlane,
    pub vis_right: ImagePlane,
    pub vis_left: Option<ImagePlane>,
    pub tir_right: Option<ImagePlane>,
    pub depth: Option<ImagePlane>,
    /// Width of the files before resizing.
    pub native_width: usize,
}

pub fn read_calibration(root: &Path) -> Result<StereoCalibration> {
    let path = root.join(CALIBRATION_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let calib: StereoCalibration = toml::from_str(&text).map_err(|e| Error::Load {
        entry: path.display().to_string(),
        msg: e.to_string(),
    })?;
    calib.validate().map_err(|e| Error::Load {
        entry: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(calib)
}

impl DatasetManifest {
    /// Scans `root/<split>`; a missing or empty split yields no entries.
    pub fn discover(root: &Path, split: Split) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root not found"),
            ));
        }
        let calibration = read_calibration(root)?;
        let split_dir = root.join(split.dir_name());
        let anchor = split_dir.join("tir_left");
        let mut names: Vec<String> = match fs::read_dir(&anchor) {
            Ok(rd) => rd
                .map(|e| e.map_err(|err| Error::io(&anchor, err)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter_map(|e| {
                    let name = e.file_name().to_string_lossy().into_owned();
                    name.ends_with(".png").then_some(name)
                })
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(&anchor, e)),
        };
        names.sort();
        let entries = names
            .into_iter()
            .map(|name| {
                let rel = |kind: &str| PathBuf::from(kind).join(&name);
                let optional = |kind: &str| split_dir.join(rel(kind)).is_file().then(|| rel(kind));
                let id = name.trim_end_matches(".png").to_owned();
                if !split_dir.join(rel("vis_right")).is_file() {
                    return Err(Error::Load {
                        entry: format!("{split}/{id}"),
                        msg: format!("missing {}", rel("vis_right").display()),
                    });
                }
                Ok(ManifestEntry {
                    tir_left: rel("tir_left"),
                    vis_right: rel("vis_right"),
                    vis_left: optional("vis_left"),
                    tir_right: optional("tir_right"),
                    depth: optional("depth"),
                    id,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            root: root.to_owned(),
            split,
            entries,
            calibration,
        })
    }

    pub fn split_dir(&self) -> PathBuf {
        self.root.join(self.split.dir_name())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Decodes one entry, resizing images bilinearly and depth by nearest
    /// neighbour when `target` is given.
    pub fn load_entry(&self, entry: &ManifestEntry, target: Option<ImageSize>) -> Result<DatasetSample> {
        let dir = self.split_dir();
        let label = format!("{}/{}", self.split, entry.id);
        let wrap = |e: Error| match e {
            Error::Load { msg, .. } => Error::Load {
                entry: label.clone(),
                msg,
            },
            other => other,
        };
        let tir_left = read_image(&dir.join(&entry.tir_left), 1).map_err(wrap)?;
        let native = (tir_left.height(), tir_left.width());
        let check = |p: &ImagePlane, what: &str| -> Result<()> {
            if (p.height(), p.width()) != native {
                return Err(Error::Load {
                    entry: label.clone(),
                    msg: format!(
                        "{what} is {}x{}, tir_left is {}x{}",
                        p.width(),
                        p.height(),
                        native.1,
                        native.0
                    ),
                });
            }
            Ok(())
        };
        let vis_right = read_image(&dir.join(&entry.vis_right), 3).map_err(wrap)?;
        check(&vis_right, "vis_right")?;
        let optional = |path: &Option<PathBuf>, channels: usize, what: &str| -> Result<Option<ImagePlane>> {
            path.as_ref()
                .map(|p| {
                    let img = read_image(&dir.join(p), channels).map_err(wrap)?;
                    check(&img, what)?;
                    Ok(img)
                })
                .transpose()
        };
        let vis_left = optional(&entry.vis_left, 3, "vis_left")?;
        let tir_right = optional(&entry.tir_right, 1, "tir_right")?;
        let depth = entry
            .depth
            .as_ref()
            .map(|p| {
                let d = read_depth_mm(&dir.join(p)).map_err(wrap)?;
                check(&d, "depth")?;
                Ok::<_, Error>(d)
            })
            .transpose()?;

        let resize_to = |p: ImagePlane, mode: ResizeMode| -> Result<ImagePlane> {
            match target {
                Some(t) if (t.height, t.width) != native => {
                    ImagePlane::from_tensor(resize(p.tensor(), t.height, t.width, mode))
                }
                _ => Ok(p),
            }
        };
        let bilinear = |p: ImagePlane| resize_to(p, ResizeMode::Bilinear);
        Ok(DatasetSample {
            id: entry.id.clone(),
            tir_left: bilinear(tir_left)?,
            vis_right: bilinear(vis_right)?,
            vis_left: vis_left.map(bilinear).transpose()?,
            tir_right: tir_right.map(bilinear).transpose()?,
            depth: depth.map(|d| resize_to(d, ResizeMode::Nearest)).transpose()?,
            native_width: native.1,
        })
    }

    pub fn load_all(&self, target: Option<ImageSize>) -> Result<Vec<DatasetSample>> {
        self.entries.iter().map(|e| self.load_entry(e, target)).collect()
    }
}

/// Discovers and decodes every sample of a split, in sorted file order.
pub fn load_dataset(root: &Path, split: Split, target: Option<ImageSize>) -> Result<Vec<DatasetSample>> {
    DatasetManifest::discover(root, split)?.load_all(target)
}
