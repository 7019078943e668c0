//! Bundled benchmark data.
//!
//! * `galaxy`: 82 galaxy velocities in 1000 km/s (the MASS `galaxies`
//!   vector divided by 1000).
//! * `faithful`: 272 Old Faithful eruptions: duration (min), waiting time (min).
//!
//! `enzyme` and `acidity` are not redistributed with the crate. Put
//! `enzyme.csv` / `acidity.csv` (one value per line) in the directory named
//! by `MIXORDER_DATA_DIR`, or in `<crate>/data/`, and they load under the
//! same names.

use std::path::PathBuf;

use crate::error::{MixError, Result};
use crate::mixture::Dataset;

const GALAXY: &str = include_str!("../../data/galaxy.csv");
const FAITHFUL: &str = include_str!("../../data/faithful.csv");

/// Names accepted by [`load`].
pub const NAMES: &[&str] = &["galaxy", "faithful", "enzyme", "acidity"];

/// Directories searched for data files that are not compiled in.
pub fn search_dirs() -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    if let Ok(d) = std::env::var("MIXORDER_DATA_DIR") {
        dirs.push(PathBuf::from(d));
    }
    dirs.push(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    dirs
}

/// Loads a bundled or locally supplied benchmark data set by name.
pub fn load(name: &str) -> Result<Dataset> {
    let name = match name {
        "geyser" | "old-faithful" => "faithful",
        "galaxies" => "galaxy",
        other => other,
    };
    let text = match name {
        "galaxy" => GALAXY.to_string(),
        "faithful" => FAITHFUL.to_string(),
        "enzyme" | "acidity" => {
            let file = format!("{name}.csv");
            let path = search_dirs()
                .into_iter()
                .map(|d| d.join(&file))
                .find(|p| p.is_file())
                .ok_or_else(|| {
                    MixError::InvalidData(format!(
                        "data set `{name}` is not bundled; place {file} in $MIXORDER_DATA_DIR"
                    ))
                })?;
            std::fs::read_to_string(path)?
        }
        other => {
            return Err(MixError::InvalidData(format!(
                "unknown data set `{other}` (known: {})",
                NAMES.join(", ")
            )))
        }
    };
    Dataset::from_csv_reader(name, text.as_bytes())
}

/// Raw bytes of a compiled-in file, for checksum pinning.
pub fn bundled_bytes(name: &str) -> Option<&'static [u8]> {
    match name {
        "galaxy" => Some(GALAXY.as_bytes()),
        "faithful" => Some(FAITHFUL.as_bytes()),
        _ => None,
    }
}
