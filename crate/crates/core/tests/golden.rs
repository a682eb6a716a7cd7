//! The bundled fixture session: a two-sentence layout, a 50 Hz gaze log and
//! a two-tree model, with the matrix and flags traced by hand.
//!
//! Fixations in reading order (word, ms): The 200, cat 180, [sat 20 dropped],
//! on 240, cat 140 (regression), mat. 200, [off-text 100 unmapped],
//! Officials 300 (one blink bridged), arson. 220, suspect 260 (regression).

use std::path::{Path, PathBuf};

use gazeread::features::{extract_features, FeatureMatrix};
use gazeread::gaze::{load_gaze_log, IvtParams};
use gazeread::layout::{LayoutDocument, WordBox};
use gazeread::learner::{sigmoid, ComprehensionModel};
use gazeread::linguistics::Lexicons;
use gazeread::service::{Service, ServiceConfig};
use gazeread::synth::Typesetter;
use gazeread::gaze::GazeSample;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/session").join(name)
}

fn hand_matrix() -> [[f64; 16]; 2] {
    let ari = |chars: f64, words: f64| 4.71 * chars / words + 0.5 * words - 21.43;
    let fkgl = |syll: f64, words: f64| 0.39 * words + 11.8 * syll / words - 15.59;
    [
        [
            240.0,
            200.0 + 180.0 + 240.0 + 140.0 + 200.0,
            5.0,
            1.0,
            5.0 / 6.0,
            6.0,
            3.0,
            17.0,
            3.0,
            303.0 - 50.0,
            0.0,
            0.0,
            ari(17.0, 6.0),
            fkgl(6.0, 6.0),
            // the, cat, sat, on, the, mat
            (3.6 + 2.6 + 4.0 + 3.9 + 3.6 + 4.4) / 6.0,
            (7.7 + 4.9 + 4.6 + 6.9 + 7.7 + 3.9) / 6.0,
        ],
        [
            300.0,
            300.0 + 220.0 + 260.0,
            3.0,
            1.0,
            1.0,
            3.0,
            0.0,
            21.0,
            3.0,
            578.0 - 314.0,
            1.0,
            1.0 / 3.0,
            ari(21.0, 3.0),
            // of-fi-cials, sus-pect, ar-son
            fkgl(7.0, 3.0),
            // only "suspect" is rated
            10.3,
            4.7,
        ],
    ]
}

fn replayed_matrix() -> FeatureMatrix {
    let layout = LayoutDocument::load(&fixture("layout.json")).unwrap();
    let gaze = load_gaze_log(&fixture("gaze.csv")).unwrap();
    extract_features(&layout, &gaze, &IvtParams::default(), 25.0, &Lexicons::bundled()).unwrap()
}

#[test]
fn golden_matrix_matches_hand_trace() {
    let golden = FeatureMatrix::load(&fixture("golden_matrix.csv")).unwrap().values();
    for (s, (got, want)) in golden.iter().zip(hand_matrix()).enumerate() {
        for (j, (g, w)) in got.iter().zip(want).enumerate() {
            assert!((g - w).abs() < 1e-9, "sentence {s} f{}: {g} vs {w}", j + 1);
        }
    }
}

#[test]
fn replay_reproduces_golden_matrix_bit_exactly() {
    let golden = FeatureMatrix::load(&fixture("golden_matrix.csv")).unwrap();
    let bits = |m: &FeatureMatrix| m.values().iter().flat_map(|r| r.map(f64::to_bits)).collect::<Vec<_>>();
    assert_eq!(bits(&replayed_matrix()), bits(&golden));
}

fn service_with_fixture_model(dir: &Path, user: &str) -> Service {
    let service = Service::open(dir, ServiceConfig::default()).unwrap();
    let model_dir = dir.join("users").join(user);
    std::fs::create_dir_all(&model_dir).unwrap();
    std::fs::copy(fixture("model.json"), model_dir.join("model.json")).unwrap();
    service
}

#[test]
fn fixture_session_flags_the_second_sentence() {
    // Tree 1: f1 <= 270 -> +1 else -1. Tree 2: f5 <= 0.9 -> +0.5 else -0.3.
    // Sentence 0: f1 240, f5 0.83 -> 1.5. Sentence 1: f1 300, f5 1 -> -1.3.
    let dir = tempfile::tempdir().unwrap();
    let service = service_with_fixture_model(dir.path(), "fixture");
    let layout = LayoutDocument::load(&fixture("layout.json")).unwrap();
    let id = service.create_session("fixture", layout).unwrap();
    let gaze = load_gaze_log(&fixture("gaze.csv")).unwrap();
    for batch in gaze.chunks(25) {
        service.ingest_gaze(&id, batch).unwrap();
    }
    let out = service.finalize_and_score(&id).unwrap();
    assert_eq!(out.flagged, vec![1]);
    assert_eq!(out.scores, vec![sigmoid(1.5), sigmoid(-1.3)]);
    let model = ComprehensionModel::load(&fixture("model.json")).unwrap();
    assert_eq!(model.predict_full(&replayed_matrix().values()).unwrap(), out.scores);
}

#[test]
fn steady_reader_is_never_flagged() {
    // Every word fixated once, in order, for 200 ms: f1 is 200 everywhere,
    // under the fixture model's 270 ms split.
    let sentences: Vec<String> = [
        "Officials suspect arson tonight.",
        "The cause of the fire is still unknown to everyone.",
        "Residents gathered near the old station.",
    ]
    .map(String::from)
    .to_vec();
    let layout = Typesetter::default().layout("steady", &sentences).unwrap();
    let mut gaze = Vec::new();
    let mut t = 0.0;
    for WordBox { x, y, w, h, .. } in &layout.words {
        for _ in 0..11 {
            gaze.push(GazeSample::new(t, x + w / 2.0, y + h / 2.0));
            t += 20.0;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let service = service_with_fixture_model(dir.path(), "steady");
    let id = service.create_session("steady", layout).unwrap();
    service.ingest_gaze(&id, &gaze).unwrap();
    assert!(service.finalize_and_score(&id).unwrap().flagged.is_empty());
}
