use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometric::{FlipModes, GeometricConfig};
use crate::photometric::PhotometricConfig;
use crate::sampling::{FamilyConfig, InclusionMode};

/// Named augmentation settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Indoor depth completion.
    Void,
    /// Outdoor driving: no vertical flips, no resize, +-20 degrees.
    Kitti,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "void" => Ok(Preset::Void),
            "kitti" => Ok(Preset::Kitti),
            other => Err(Error::ParseError(format!("unknown preset `{other}`"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Void => "void",
            Preset::Kitti => "kitti",
        })
    }
}

/// Augmentation families that can be switched off as a group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    /// Translation.
    Trn,
    /// Rotation.
    Rot,
    /// Hue shift.
    Hue,
    /// Brightness, contrast and saturation.
    Coj,
    /// Sparse point removal.
    Rmp,
    /// Flips.
    Flp,
    /// Resize.
    Rzd,
    /// Image patch removal.
    Rmi,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Trn,
        Family::Rot,
        Family::Hue,
        Family::Coj,
        Family::Rmp,
        Family::Flp,
        Family::Rzd,
        Family::Rmi,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Family::Trn => "TRN",
            Family::Rot => "ROT",
            Family::Hue => "HUE",
            Family::Coj => "COJ",
            Family::Rmp => "RMP",
            Family::Flp => "FLP",
            Family::Rzd => "RZD",
            Family::Rmi => "RMI",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::ParseError(format!("unknown augmentation family `{s}`")))
    }
}

/// Full sampling configuration for one training step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub photometric: PhotometricConfig,
    pub geometric: GeometricConfig,
    pub mode: InclusionMode,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

impl AugmentationConfig {
    /// No augmentation at all.
    pub fn disabled() -> Self {
        Self {
            photometric: PhotometricConfig::disabled(),
            geometric: GeometricConfig::disabled(),
            mode: InclusionMode::PerFamily,
            seed: 0,
        }
    }

    pub fn void() -> Self {
        Self {
            photometric: PhotometricConfig::depth_completion(),
            geometric: GeometricConfig::indoor(),
            ..Self::disabled()
        }
    }

    pub fn kitti() -> Self {
        Self {
            photometric: PhotometricConfig::depth_completion(),
            geometric: GeometricConfig::outdoor(),
            ..Self::disabled()
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Void => Self::void(),
            Preset::Kitti => Self::kitti(),
        }
    }

    /// Horizontal and vertical flips only, each draw flipping with probability `p`.
    pub fn flips_only(p: f64) -> Self {
        let mut cfg = Self::disabled();
        cfg.geometric.flip = FamilyConfig::on(
            FlipModes {
                horizontal: true,
                vertical: true,
            },
            p,
        );
        cfg
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Turns off every listed family.
    pub fn without(mut self, families: &[Family]) -> Self {
        for f in families {
            let p = &mut self.photometric;
            let g = &mut self.geometric;
            match f {
                Family::Trn => g.translate.enabled = false,
                Family::Rot => g.rotate.enabled = false,
                Family::Hue => p.hue.enabled = false,
                Family::Coj => {
                    p.brightness.enabled = false;
                    p.contrast.enabled = false;
                    p.saturation.enabled = false;
                }
                Family::Rmp => p.point_removal.enabled = false,
                Family::Flp => g.flip.enabled = false,
                Family::Rzd => g.resize.enabled = false,
                Family::Rmi => p.patch_occlusion.enabled = false,
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.photometric.validate()?;
        self.geometric.validate()?;
        self.mode.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ParseError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let cfg = AugmentationConfig::void().with_seed(99);
        assert_eq!(AugmentationConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_json_falls_back_to_disabled() {
        let cfg = AugmentationConfig::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(cfg, AugmentationConfig::disabled().with_seed(5));
        assert!(AugmentationConfig::from_json(r#"{"sed": 5}"#).is_err());
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let mut cfg = AugmentationConfig::void();
        cfg.photometric.brightness.range.lo = 2.0;
        assert!(matches!(
            AugmentationConfig::from_json(&cfg.to_json()),
            Err(Error::BadRange { .. })
        ));
    }

    #[test]
    fn kitti_drops_vertical_flip_and_resize() {
        let k = AugmentationConfig::kitti();
        assert!(!k.geometric.flip.range.vertical && !k.geometric.resize.enabled);
        assert_eq!((k.geometric.rotate.range.lo, k.geometric.rotate.range.hi), (-20.0, 20.0));
    }

    #[test]
    fn families_parse_and_exclude() {
        assert_eq!("rzd".parse::<Family>().unwrap(), Family::Rzd);
        assert!("xyz".parse::<Family>().is_err());
        let off = AugmentationConfig::void().without(&Family::ALL);
        let p = &off.photometric;
        let g = &off.geometric;
        assert!(![
            p.brightness.enabled,
            p.contrast.enabled,
            p.saturation.enabled,
            p.hue.enabled,
            p.patch_occlusion.enabled,
            p.point_removal.enabled,
            g.flip.enabled,
            g.resize.enabled,
            g.rotate.enabled,
            g.translate.enabled,
        ]
        .iter()
        .any(|e| *e));
    }
}
