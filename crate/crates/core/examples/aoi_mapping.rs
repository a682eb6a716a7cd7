//! Maps fixations onto word boxes: containment first, then the nearest box
//! within the snap radius.

use std::path::Path;

use gazeread::gaze::{detect_fixations, load_gaze_log, IvtParams};
use gazeread::layout::{map_fixation_to_word, LayoutDocument, DEFAULT_SNAP_RADIUS};

fn main() -> gazeread::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/session");
    let layout = LayoutDocument::load(&dir.join("layout.json"))?;
    let samples = load_gaze_log(&dir.join("gaze.csv"))?;
    for f in detect_fixations(&samples, &IvtParams::default())? {
        match map_fixation_to_word(&f, &layout, DEFAULT_SNAP_RADIUS) {
            Some(i) => {
                let w = &layout.words[i];
                println!("{:>4.0} ms -> word {i} {:?} (sentence {})", f.duration, w.text, w.sentence_index);
            }
            None => println!("{:>4.0} ms -> off text at ({:.0}, {:.0})", f.duration, f.cx, f.cy),
        }
    }
    Ok(())
}
