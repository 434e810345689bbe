//! Text file formats: parameter tables, samples, populations and flat
//! `key=value` configuration.

mod config;
mod params_file;
mod population;
mod sample_csv;

pub use config::{parse_key_values, scenario_grid, KeyValues};
pub use params_file::ParameterFile;
pub use population::{read_population, read_zip_areas, write_population};
pub use sample_csv::{read_sample, sample_profiles, write_sample, SampleData};

use std::path::Path;

use crate::error::{Error, Result};

/// Reads a whole UTF-8 file.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn parse_f64(text: &str, row: usize, column: &str) -> Result<f64> {
    text.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("'{text}' is not a number"),
    })
}
