//! Threshold-law measurements near the saddle: launch surfaces, the harmonic
//! oracle, full-integration widths and flux fractions, and the exponent fit.

pub mod fit;
pub mod flux;
pub mod frame;
pub mod harmonic;
pub mod monte_carlo;
pub mod scan;
pub mod width;

pub use fit::{fit_exponent, ExponentFit, Measurement};
pub use flux::{make_flux_sample, FluxSample, LaunchSurface};
pub use frame::{NormalCoords, NormalModeFrame};
pub use harmonic::{critical_width_harmonic, linearized_y, HarmonicOrbit};
pub use monte_carlo::{flux_monte_carlo, FluxEstimate, SamplerSettings};
pub use scan::{epsilon_grid, run_scan, ScanGap, ScanMethod, ScanSettings, ThresholdScan};
pub use width::{critical_width_numeric, DoubleCriterion, Transverse, WidthMeasurement, WidthProbe, WidthSettings};
