//! Configuration, rasters, presets and result files.

pub mod config;
pub mod dem;
pub mod output;
pub mod presets;
mod scenario;

pub use config::{GridSpec, InitialSpec, KeyValues, OutputSpec, RainSpec, SimulationConfig};
pub use dem::{format_raster, load_dem, parse_raster, read_raster, write_dem, write_raster, Raster};
pub use output::{format_audit, format_gauge_summary, format_gauges_csv, write_outputs};
pub use presets::{PresetKind, PresetParams};
