use super::*;
use crate::learner::{GridSpec, TrainingConfig, MODEL_FORMAT_VERSION};
use crate::simplifier::{MockClient, MockFallback};
use crate::synth::{generate_user, SynthConfig, SyntheticUser};

fn quick_config() -> ServiceConfig {
    ServiceConfig {
        training: TrainingConfig {
            grid: GridSpec {
                tree_depths: vec![3],
                l2_leaf_regs: vec![3.0],
                bagging_temperatures: vec![1.0],
            },
            n_trees: 30,
            feature_selection: false,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn open(dir: &Path) -> Service {
    Service::open(dir, quick_config()).unwrap()
}

fn reader(sentences: usize, seed: u64) -> SyntheticUser {
    let cfg = SynthConfig {
        sentences,
        ..Default::default()
    };
    generate_user("u1", seed, &cfg, &Lexicons::bundled()).unwrap()
}

/// A model with no trees: every sentence scores sigmoid(base_score).
fn install_constant_model(service: &Service, user: &str, base_score: f64) {
    let model = ComprehensionModel {
        format_version: MODEL_FORMAT_VERSION,
        selected_features: vec![0],
        hyperparams: Hyperparams::default(),
        base_score,
        trees: Vec::new(),
    };
    let dir = service.user_dir(user);
    create_dir(&dir).unwrap();
    model.save(&dir.join("model.json")).unwrap();
}

/// Creates a session for `user` and feeds it the whole gaze stream in
/// 500 ms batches.
fn read_through(service: &Service, user: &SyntheticUser) -> String {
    let id = service.create_session(&user.user_id, user.layout.clone()).unwrap();
    let mut start = 0;
    while start < user.gaze.len() {
        let t0 = user.gaze[start].timestamp;
        let end = user.gaze[start..]
            .iter()
            .position(|s| s.timestamp >= t0 + 500.0)
            .map_or(user.gaze.len(), |p| start + p);
        assert_eq!(service.ingest_gaze(&id, &user.gaze[start..end]).unwrap(), end - start);
        start = end;
    }
    id
}

#[test]
fn create_validates_and_issues_distinct_ids() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(5, 1);
    let a = service.create_session("u1", user.layout.clone()).unwrap();
    let b = service.create_session("u1", user.layout.clone()).unwrap();
    assert_ne!(a, b);
    assert_eq!(service.record(&a).unwrap().state, SessionState::Reading);

    let mut overlapping = user.layout.clone();
    overlapping.sentences[1].first_word = overlapping.sentences[0].last_word;
    assert!(matches!(
        service.create_session("u1", overlapping),
        Err(Error::InvalidLayout { .. })
    ));
    assert!(service.create_session("../etc", user.layout).is_err());
}

#[test]
fn ingest_rules() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(3, 2);
    let id = service.create_session("u1", user.layout.clone()).unwrap();
    assert_eq!(service.ingest_gaze(&id, &[]).unwrap(), 0);
    assert_eq!(service.ingest_gaze(&id, &user.gaze[..60]).unwrap(), 60);
    // Overlaps the previous batch: rejected whole.
    let err = service.ingest_gaze(&id, &user.gaze[50..120]).unwrap_err();
    assert!(matches!(err, Error::NonMonotone { .. }));
    assert!(err.to_string().contains("non-monotone"));
    assert_eq!(service.gaze_len(&id).unwrap(), 60);
    // Internally out of order.
    let mut shuffled = user.gaze[60..70].to_vec();
    shuffled.swap(2, 7);
    assert!(matches!(service.ingest_gaze(&id, &shuffled), Err(Error::NonMonotone { .. })));
    assert_eq!(service.ingest_gaze(&id, &user.gaze[60..120]).unwrap(), 60);
    assert!(matches!(service.ingest_gaze("nope", &user.gaze[..1]), Err(Error::NotFound(_))));
    assert_eq!(load_gaze_log(&service.session_dir(&id).join("gaze.csv")).unwrap().len(), 120);
}

#[test]
fn scoring_requires_a_model_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(6, 3);
    let id = read_through(&service, &user);
    assert!(matches!(service.finalize_and_score(&id), Err(Error::UntrainedUser(_))));
    assert!(matches!(service.finalize_and_score("missing"), Err(Error::NotFound(_))));

    install_constant_model(&service, "u1", 4.0);
    let first = service.finalize_and_score(&id).unwrap();
    assert!(first.flagged.is_empty());
    assert!(first.scores.iter().all(|&s| s == crate::learner::sigmoid(4.0)));
    // A later model change does not alter stored scores.
    install_constant_model(&service, "u1", -4.0);
    assert_eq!(service.finalize_and_score(&id).unwrap(), first);
    assert!(matches!(service.ingest_gaze(&id, &[]), Err(Error::InvalidState(_))));
}

#[test]
fn empty_gaze_buffer_scores_from_zero_gaze_features() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(4, 4);
    let id = service.create_session("u1", user.layout).unwrap();
    install_constant_model(&service, "u1", -1.0);
    let out = service.finalize_and_score(&id).unwrap();
    assert_eq!(out.flagged, vec![0, 1, 2, 3]);
    let m = FeatureMatrix::load(&service.session_dir(&id).join("features.csv")).unwrap();
    assert!(m.rows.iter().all(|r| r.vector.to_array()[..5].iter().all(|&v| v == 0.0)));
}

#[test]
fn simplify_state_machine_and_failure_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(3, 5);
    let id = read_through(&service, &user);
    assert!(matches!(service.simplify_flagged(&id), Err(Error::InvalidState(_))));
    install_constant_model(&service, "u1", -3.0);
    assert_eq!(service.finalize_and_score(&id).unwrap().flagged, vec![0, 1, 2]);

    let texts = user.layout.sentence_texts();
    let client = MockClient::new(MockFallback::Echo).failing_on(&texts[1], false);
    let out = service.simplify_flagged_with(&id, &client).unwrap();
    assert_eq!(out.results.len(), 2);
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].sentence_index, 1);
    // Echo leaves the text alone but still records the changes.
    assert_eq!(out.document.slots, texts);
    let record = service.record(&id).unwrap();
    assert_eq!(record.state, SessionState::Simplified);
    assert_eq!(record.changes.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 2]);
    assert!(matches!(service.simplify_flagged(&id), Err(Error::InvalidState(_))));
}

#[test]
fn zero_flagged_simplify_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(3, 6);
    let id = read_through(&service, &user);
    install_constant_model(&service, "u1", 3.0);
    service.finalize_and_score(&id).unwrap();
    let out = service.simplify_flagged(&id).unwrap();
    assert!(out.results.is_empty() && out.failures.is_empty());
    assert_eq!(out.document.slots, user.layout.sentence_texts());
    assert_eq!(service.document(&id).unwrap().state, SessionState::Simplified);
}

#[test]
fn marks_label_rows_and_resubmission_overwrites() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(5, 7);
    let id = read_through(&service, &user);
    assert!(matches!(
        service.submit_marks(&id, &[false; 4]),
        Err(Error::LengthMismatch { left: 5, right: 4 })
    ));
    assert_eq!(service.submit_marks(&id, &[false; 5]).unwrap(), 5);
    let rows = service.user_corpus("u1").unwrap();
    assert!(rows.iter().all(|r| r.understood));
    service.submit_marks(&id, &[true, false, false, false, true]).unwrap();
    let rows = service.user_corpus("u1").unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows.iter().filter(|r| !r.understood).count(), 2);
}

#[test]
fn training_needs_enough_rows_of_both_classes() {
    let dir = tempfile::tempdir().unwrap();
    let service = open(dir.path());
    let user = reader(40, 8);
    let id = read_through(&service, &user);
    assert!(matches!(service.train_user("u1", 0), Err(Error::InsufficientData(_))));
    service.submit_marks(&id, &[false; 40]).unwrap();
    assert!(matches!(service.train_user("u1", 0), Err(Error::InsufficientData(_))));
    assert!(matches!(service.user_report("u1"), Err(Error::NotFound(_))));
}

#[test]
fn full_flow_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let user = reader(60, 9);
    let (id, report, score) = {
        let service = open(dir.path());
        let id = read_through(&service, &user);
        service.submit_marks(&id, &user.marks).unwrap();
        let report = service.train_user("u1", 11).unwrap();
        assert_eq!(report.corpus_rows, 60);
        assert_eq!(report.train_rows + report.test_rows, 60);
        // Same seed, same corpus: same report.
        assert_eq!(service.train_user("u1", 11).unwrap(), report);
        let score = service.finalize_and_score(&id).unwrap();
        (id, report, score)
    };
    let service = open(dir.path());
    assert_eq!(service.user_report("u1").unwrap(), report);
    assert_eq!(service.gaze_len(&id).unwrap(), user.gaze.len());
    assert_eq!(service.finalize_and_score(&id).unwrap(), score);

    // The persisted model rescored from scratch gives bit-identical scores.
    let model = service.load_model("u1").unwrap();
    let gaze = load_gaze_log(&service.session_dir(&id).join("gaze.csv")).unwrap();
    let matrix = extract_features(&user.layout, &gaze, &ServiceConfig::default().ivt, 25.0, &Lexicons::bundled()).unwrap();
    let again = model.predict_full(&matrix.values()).unwrap();
    assert!(again.iter().zip(&score.scores).all(|(a, b)| a.to_bits() == b.to_bits()));
}
