//! Scalar stance values and their quantization grid.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Resolution of every stance-like value exchanged between engines.
pub const QUANTUM: f64 = 1e-6;

/// Rounds `x` onto the 1e-6 grid. Negative zero is normalized to `+0.0`.
pub fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6 + 0.0
}

/// A stance intensity in `[-1, 1]`, always quantized to [`QUANTUM`].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Opinion(f64);

impl Opinion {
    pub const NEUTRAL: Opinion = Opinion(0.0);

    /// Clamps to `[-1, 1]` and quantizes. NaN maps to neutral.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return Opinion::NEUTRAL;
        }
        Opinion(quantize(value.clamp(-1.0, 1.0)))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Which of the three stance bands the value falls into.
    pub fn band(self) -> StanceLabel {
        StanceLabel::from_opinion(self.0)
    }
}

impl From<f64> for Opinion {
    fn from(value: f64) -> Self {
        Opinion::new(value)
    }
}

impl From<Opinion> for f64 {
    fn from(value: Opinion) -> Self {
        value.0
    }
}

impl fmt::Display for Opinion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.6}", self.0)
    }
}

/// Output of the influence function `f(O_j, O_i)`; clipped to `[-2, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Influence(f64);

impl Influence {
    pub const BOUND: f64 = 2.0;

    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return Influence(0.0);
        }
        Influence(quantize(value.clamp(-Self::BOUND, Self::BOUND)))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Output of the compatibility function `g(O_i, O_j)`; always in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Compatibility(f64);

impl Compatibility {
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return Compatibility(0.0);
        }
        Compatibility(quantize(value.clamp(0.0, 1.0)))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Discrete stance label used by the datasets and ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Favor,
    Neutral,
    Oppose,
}

impl StanceLabel {
    /// Band edges; both boundaries are closed toward the outer bands.
    pub const FAVOR_FROM: f64 = 1.0 / 3.0;
    pub const OPPOSE_TO: f64 = -1.0 / 3.0;

    /// favor → +1, neutral → 0, oppose → −1.
    pub fn value(self) -> f64 {
        match self {
            StanceLabel::Favor => 1.0,
            StanceLabel::Neutral => 0.0,
            StanceLabel::Oppose => -1.0,
        }
    }

    pub fn from_opinion(x: f64) -> Self {
        if x >= Self::FAVOR_FROM {
            StanceLabel::Favor
        } else if x <= Self::OPPOSE_TO {
            StanceLabel::Oppose
        } else {
            StanceLabel::Neutral
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Favor => "favor",
            StanceLabel::Neutral => "neutral",
            StanceLabel::Oppose => "oppose",
        }
    }
}

impl std::str::FromStr for StanceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "favor" => Ok(StanceLabel::Favor),
            "neutral" => Ok(StanceLabel::Neutral),
            "oppose" => Ok(StanceLabel::Oppose),
            other => Err(format!("unknown stance label {other:?}")),
        }
    }
}
