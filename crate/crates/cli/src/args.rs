use std::f64::consts::TAU;

use clap::{Args, ValueEnum};
use nodal_core::curve::CurveSpec;
use nodal_core::lattice::{enumerate_level, spectral_measure, SpectralMeasure};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Circle,
    Arc,
    Ellipse,
    Flower,
}

/// Geometry flags shared by every curve-taking subcommand.
#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[arg(long, value_enum, default_value = "circle")]
    pub family: Family,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 0.5])]
    pub center: Vec<f64>,
    /// Circle and arc radius.
    #[arg(long, default_value_t = 0.2)]
    pub radius: f64,
    /// Arc start angle.
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    /// Arc sweep angle.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub sweep: f64,
    #[arg(long, default_value_t = 0.25)]
    pub a: f64,
    #[arg(long, default_value_t = 0.15)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rotation: f64,
    /// Flower base radius.
    #[arg(long, default_value_t = 0.2)]
    pub r0: f64,
    #[arg(long, default_value_t = 0.02)]
    pub eps: f64,
    #[arg(long, default_value_t = 4)]
    pub k: u32,
    #[arg(long, default_value_t = 0.0)]
    pub phase: f64,
}

impl CurveArgs {
    pub fn spec(&self) -> CurveSpec {
        let center = [self.center[0], self.center[1]];
        match self.family {
            Family::Circle => CurveSpec::Circle {
                center,
                radius: self.radius,
                start: 0.0,
                sweep: TAU,
            },
            Family::Arc => CurveSpec::Circle {
                center,
                radius: self.radius,
                start: self.start,
                sweep: self.sweep,
            },
            Family::Ellipse => CurveSpec::Ellipse {
                center,
                a: self.a,
                b: self.b,
                rotation: self.rotation,
            },
            Family::Flower => CurveSpec::Flower {
                center,
                r0: self.r0,
                eps: self.eps,
                k: self.k,
                phase: self.phase,
            },
        }
    }
}

/// `uniform`, `cilleruelo`, `tilted` or `level:<n>`.
pub fn parse_measure(s: &str) -> Result<SpectralMeasure, CliError> {
    match s {
        "uniform" => Ok(SpectralMeasure::uniform()),
        "cilleruelo" => Ok(SpectralMeasure::cilleruelo()),
        "tilted" => Ok(SpectralMeasure::tilted_cilleruelo()),
        _ => {
            let n = s
                .strip_prefix("level:")
                .and_then(|v| v.parse::<u64>().ok())
                .ok_or_else(|| CliError::Usage(format!("unknown measure {s:?}")))?;
            Ok(spectral_measure(&enumerate_level(n)?))
        }
    }
}
