//! Velocity-threshold fixation detection on the bundled fixture gaze log.

use std::path::Path;

use gazeread::gaze::{detect_fixations, load_gaze_log, IvtParams};

fn main() -> gazeread::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/session/gaze.csv");
    let samples = load_gaze_log(&path)?;
    let params = IvtParams::default();
    let fixations = detect_fixations(&samples, &params)?;
    println!(
        "{} samples -> {} fixations (threshold {} px/ms, minimum {} ms)",
        samples.len(),
        fixations.len(),
        params.velocity_threshold,
        params.min_fixation_duration
    );
    for f in &fixations {
        println!("{:>6.0}..{:<6.0} {:>4.0} ms at ({:.1}, {:.1})", f.start, f.end, f.duration, f.cx, f.cy);
    }
    Ok(())
}
