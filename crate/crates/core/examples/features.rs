//! Builds the 16-column sentence feature matrix for the fixture session and
//! prints it as CSV.

use std::path::Path;

use gazeread::features::{extract_features, FEATURE_DESCRIPTIONS, FEATURE_NAMES};
use gazeread::gaze::{load_gaze_log, IvtParams};
use gazeread::layout::{LayoutDocument, DEFAULT_SNAP_RADIUS};
use gazeread::linguistics::Lexicons;

fn main() -> gazeread::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/session");
    let layout = LayoutDocument::load(&dir.join("layout.json"))?;
    let samples = load_gaze_log(&dir.join("gaze.csv"))?;
    let matrix = extract_features(&layout, &samples, &IvtParams::default(), DEFAULT_SNAP_RADIUS, &Lexicons::bundled())?;
    for (name, what) in FEATURE_NAMES.iter().zip(FEATURE_DESCRIPTIONS) {
        eprintln!("{name:>4}  {what}");
    }
    matrix.write_csv(std::io::stdout().lock())
}
