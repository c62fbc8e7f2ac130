use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LayerKind;

/// Split level: the output of one of the three convolutional groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SplitLevel {
    G1,
    G2,
    G3,
}

impl SplitLevel {
    pub const ALL: [SplitLevel; 3] = [SplitLevel::G1, SplitLevel::G2, SplitLevel::G3];

    /// Zero-based group index.
    pub fn group(self) -> usize {
        match self {
            SplitLevel::G1 => 0,
            SplitLevel::G2 => 1,
            SplitLevel::G3 => 2,
        }
    }
}

impl fmt::Display for SplitLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.group() + 1)
    }
}

impl FromStr for SplitLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "G1" => Ok(SplitLevel::G1),
            "G2" => Ok(SplitLevel::G2),
            "G3" => Ok(SplitLevel::G3),
            _ => Err(Error::config(format!("unknown level `{s}`, expected G1, G2 or G3"))),
        }
    }
}

/// Position in the network, ordered input < G1 < G2 < G3 < output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Input,
    Group(SplitLevel),
    Output,
}

impl From<SplitLevel> for Level {
    fn from(j: SplitLevel) -> Self {
        Level::Group(j)
    }
}

/// Plain three-group CNN: a stem convolution, then per group an optional
/// stride-2 entry convolution (groups 2 and 3) followed by
/// `blocks_per_group` 3×3 convolutions, then pooling and a dense classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    /// `(channels, height, width)`.
    pub input_shape: [usize; 3],
    pub group_widths: [usize; 3],
    pub blocks_per_group: usize,
    pub num_classes: usize,
}

/// One entry of [`ArchSpec::layer_plan`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedLayer {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ArchSpec {
    /// 16/32/64 widths on 3×32×32 input with ten classes.
    pub fn cifar() -> Self {
        ArchSpec {
            input_shape: [3, 32, 32],
            group_widths: [16, 32, 64],
            blocks_per_group: 1,
            num_classes: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.iter().any(|&d| d == 0) {
            return Err(Error::config(format!(
                "input_shape must be positive, got {:?}",
                self.input_shape
            )));
        }
        if self.group_widths.iter().any(|&d| d == 0) {
            return Err(Error::config(format!(
                "group_widths must be positive, got {:?}",
                self.group_widths
            )));
        }
        if self.blocks_per_group == 0 {
            return Err(Error::config("blocks_per_group must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("num_classes must be at least 2"));
        }
        Ok(())
    }

    pub fn layer_plan(&self) -> Vec<PlannedLayer> {
        let mut plan = Vec::new();
        let mut prev = self.input_shape[0];
        for (g, &width) in self.group_widths.iter().enumerate() {
            let entry = if g == 0 {
                LayerKind::Conv3x3
            } else {
                LayerKind::Downsample
            };
            plan.push(PlannedLayer {
                kind: entry,
                in_dim: prev,
                out_dim: width,
            });
            for _ in 0..self.blocks_per_group {
                plan.push(PlannedLayer {
                    kind: LayerKind::Conv3x3,
                    in_dim: width,
                    out_dim: width,
                });
            }
            prev = width;
        }
        plan.push(PlannedLayer {
            kind: LayerKind::Dense,
            in_dim: prev,
            out_dim: self.num_classes,
        });
        plan
    }

    pub fn layer_count(&self) -> usize {
        3 * (self.blocks_per_group + 1) + 1
    }

    /// Exclusive end index in the layer list of each group.
    pub fn group_boundaries(&self) -> [usize; 3] {
        let per = self.blocks_per_group + 1;
        [per, 2 * per, 3 * per]
    }

    /// Number of layers preceding `level`.
    pub fn boundary(&self, level: Level) -> usize {
        match level {
            Level::Input => 0,
            Level::Group(j) => self.group_boundaries()[j.group()],
            Level::Output => self.layer_count(),
        }
    }

    /// Per-sample tensor shape at `level`.
    pub fn level_shape(&self, level: Level) -> Vec<usize> {
        let [c, mut h, mut w] = self.input_shape;
        match level {
            Level::Input => vec![c, h, w],
            Level::Group(j) => {
                for _ in 0..j.group() {
                    h = (h - 1) / 2 + 1;
                    w = (w - 1) / 2 + 1;
                }
                vec![self.group_widths[j.group()], h, w]
            }
            Level::Output => vec![self.num_classes],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes_at_each_level() {
        let a = ArchSpec::cifar();
        assert_eq!(a.level_shape(SplitLevel::G1.into()), vec![16, 32, 32]);
        assert_eq!(a.level_shape(SplitLevel::G2.into()), vec![32, 16, 16]);
        assert_eq!(a.level_shape(SplitLevel::G3.into()), vec![64, 8, 8]);
        assert_eq!(a.level_shape(Level::Output), vec![10]);
    }

    #[test]
    fn small_input_halves_twice() {
        let a = ArchSpec {
            input_shape: [1, 8, 8],
            group_widths: [4, 8, 16],
            blocks_per_group: 1,
            num_classes: 10,
        };
        assert_eq!(a.level_shape(SplitLevel::G3.into()), vec![16, 2, 2]);
    }

    #[test]
    fn plan_matches_boundaries() {
        let a = ArchSpec {
            blocks_per_group: 2,
            ..ArchSpec::cifar()
        };
        let plan = a.layer_plan();
        assert_eq!(plan.len(), a.layer_count());
        assert_eq!(a.group_boundaries(), [3, 6, 9]);
        assert_eq!(plan[3].kind, LayerKind::Downsample);
        assert_eq!(plan[6].kind, LayerKind::Downsample);
        assert_eq!(plan[9].kind, LayerKind::Dense);
    }

    #[test]
    fn level_parsing() {
        assert_eq!("g2".parse::<SplitLevel>().unwrap(), SplitLevel::G2);
        assert!("G4".parse::<SplitLevel>().is_err());
        assert_eq!(SplitLevel::G3.to_string(), "G3");
        assert!(Level::Input < Level::Group(SplitLevel::G1));
        assert!(Level::Group(SplitLevel::G3) < Level::Output);
    }

    #[test]
    fn rejects_zero_width() {
        let a = ArchSpec {
            group_widths: [4, 0, 8],
            ..ArchSpec::cifar()
        };
        assert!(matches!(a.validate(), Err(Error::Config(_))));
    }
}
