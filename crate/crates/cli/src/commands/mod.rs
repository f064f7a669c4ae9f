mod basics;
mod determinism;
mod estimates;
mod oscint;
mod weights;
mod wellposed;

pub use basics::{BesselConfig, PropagateConfig, TransformConfig};
pub use determinism::DeterminismConfig;
pub use estimates::{ExtremizeConfig, MorawetzCase, MorawetzConfig, StrichartzConfig};
pub use oscint::{KernelConfig, KernelRegime, SamplingConfig, TkConfig, VdcConfig};
pub use weights::{MaximalConfig, McnormConfig};
pub use wellposed::WellposedConfig;

/// Largest |x − 1| over a list, NaN if any entry is NaN.
pub(crate) fn worst_deviation(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m: f64, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max((x - 1.0).abs()) })
}
