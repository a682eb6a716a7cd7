//! Reference implementations and generators shared by the integration tests.
//! The oracles are written from the definitions, not from the library code.

#![allow(dead_code)]

use gazeread::gaze::{GazeSample, IvtParams};
use gazeread::layout::{LayoutDocument, SentenceSpan, WordBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A gaze stream with fixation-like dwells, saccades, blinks, tracking gaps
/// and the odd repeated timestamp.
pub fn random_stream(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<GazeSample> {
    let n = rng.gen_range(0..=max_len);
    let mut t = rng.gen_range(0.0..1000.0);
    let (mut x, mut y) = (rng.gen_range(0.0..1400.0), rng.gen_range(0.0..800.0));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let step = match rng.gen_range(0..100) {
            0..=2 => 0.0,
            3..=6 => rng.gen_range(40.0..120.0),
            _ => rng.gen_range(12.0..20.0),
        };
        t += step;
        match rng.gen_range(0..100) {
            0..=7 => {
                x = rng.gen_range(0.0..1400.0);
                y = rng.gen_range(0.0..800.0);
            }
            8..=20 => {
                x += rng.gen_range(-15.0..15.0);
                y += rng.gen_range(-4.0..4.0);
            }
            _ => {
                x += rng.gen_range(-1.5..1.5);
                y += rng.gen_range(-1.5..1.5);
            }
        }
        out.push(if rng.gen_bool(0.04) {
            GazeSample::invalid(t)
        } else {
            GazeSample::new(t, x, y)
        });
    }
    out
}

/// (start, end, cx, cy) of each fixation, by direct application of the
/// velocity rule: consecutive usable samples belong together when the gap is
/// at most `max_gap` and the speed is under the threshold; a group lasting
/// at least the minimum duration is a fixation. Of several samples sharing a
/// timestamp only the first counts.
pub fn reference_ivt(samples: &[GazeSample], p: &IvtParams) -> Vec<(f64, f64, f64, f64)> {
    let usable: Vec<&GazeSample> = samples
        .iter()
        .enumerate()
        .filter(|&(i, s)| i == 0 || samples[i - 1].timestamp != s.timestamp)
        .map(|(_, s)| s)
        .filter(|s| s.valid && s.x.is_finite() && s.y.is_finite())
        .collect();
    let mut groups: Vec<Vec<&GazeSample>> = Vec::new();
    for (i, s) in usable.iter().enumerate() {
        let linked = i > 0 && {
            let a = usable[i - 1];
            let dt = s.timestamp - a.timestamp;
            let dist = ((s.x - a.x).powi(2) + (s.y - a.y).powi(2)).sqrt();
            dt <= p.max_gap && dist / dt < p.velocity_threshold
        };
        if linked {
            groups.last_mut().unwrap().push(s);
        } else {
            groups.push(vec![s]);
        }
    }
    groups
        .into_iter()
        .filter_map(|g| {
            let start = g[0].timestamp;
            let end = g[g.len() - 1].timestamp;
            let mut sx = 0.0;
            let mut sy = 0.0;
            for s in &g {
                sx += s.x;
                sy += s.y;
            }
            (end - start >= p.min_fixation_duration).then(|| (start, end, sx / g.len() as f64, sy / g.len() as f64))
        })
        .collect()
}

/// Boxes on an integer grid, possibly overlapping. Sentence spans are
/// filled in only so the value is well formed; AOI mapping ignores them.
pub fn random_boxes(rng: &mut ChaCha8Rng, n: usize) -> LayoutDocument {
    let words: Vec<WordBox> = (0..n)
        .map(|i| WordBox {
            text: format!("w{i}"),
            x: f64::from(rng.gen_range(0..1300)),
            y: f64::from(rng.gen_range(0..760)),
            w: f64::from(rng.gen_range(1..120)),
            h: f64::from(rng.gen_range(1..40)),
            sentence_index: 0,
        })
        .collect();
    LayoutDocument {
        doc_id: "random".into(),
        sentences: vec![SentenceSpan {
            index: 0,
            text: "random".into(),
            first_word: 0,
            last_word: n.saturating_sub(1),
            pixel_length: 0.0,
        }],
        words,
    }
}

/// Lowest index whose closed box holds the point.
pub fn containment_oracle(px: f64, py: f64, doc: &LayoutDocument) -> Option<usize> {
    for (i, b) in doc.words.iter().enumerate() {
        let inside_x = b.x <= px && px <= b.x + b.w;
        let inside_y = b.y <= py && py <= b.y + b.h;
        if inside_x && inside_y {
            return Some(i);
        }
    }
    None
}

/// Containment, else the nearest box within `radius` by exhaustive search,
/// lowest index on ties.
pub fn nearest_box_oracle(px: f64, py: f64, doc: &LayoutDocument, radius: f64) -> Option<usize> {
    if let Some(i) = containment_oracle(px, py, doc) {
        return Some(i);
    }
    let dist = |b: &WordBox| {
        let cx = px.clamp(b.x, b.x + b.w);
        let cy = py.clamp(b.y, b.y + b.h);
        ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
    };
    let d: Vec<f64> = doc.words.iter().map(dist).collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if min > radius {
        return None;
    }
    d.iter().position(|&v| v == min)
}

/// (weighted precision, weighted recall, weighted F1) computed by counting
/// each cell of the confusion matrix directly.
pub fn metrics_oracle(truth: &[bool], pred: &[bool]) -> (f64, f64, f64) {
    let n = truth.len() as f64;
    let mut wp = 0.0;
    let mut wr = 0.0;
    let mut wf = 0.0;
    for class in [false, true] {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fne = 0.0;
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == class, p == class) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fne += 1.0,
                (false, false) => {}
            }
        }
        let support = tp + fne;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fne) } else { 0.0 };
        wp += support / n * precision;
        wr += support / n * recall;
        wf += support / n * f1;
    }
    (wp, wr, wf)
}

/// Rows whose first `informative` columns carry the label through a noisy
/// linear score, followed by pure-noise columns.
pub fn informative_noise_dataset(
    rng: &mut ChaCha8Rng,
    n: usize,
    informative: usize,
    noise: usize,
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 3 != 0;
        let mut row = Vec::with_capacity(informative + noise);
        for _ in 0..informative {
            let shift = if label { 1.0 } else { -1.0 };
            row.push(shift + rng.gen_range(-1.2..1.2));
        }
        for _ in 0..noise {
            row.push(rng.gen_range(-1.0..1.0));
        }
        rows.push(row);
        y.push(label);
    }
    (rows, y)
}

/// Rows of `informative` discrete columns (values 0 to 3) followed by
/// `noise` continuous i.i.d. columns. The label is drawn from a logistic
/// curve in the sum of the discrete columns, so the noise columns can only
/// help a model memorize label noise.
pub fn discrete_signal_dataset(
    rng: &mut ChaCha8Rng,
    n: usize,
    informative: usize,
    noise: usize,
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let centre = 1.5 * informative as f64;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row: Vec<f64> = (0..informative).map(|_| f64::from(rng.gen_range(0..4u8))).collect();
        let sum: f64 = row.iter().sum();
        let p = 1.0 / (1.0 + (-1.5 * (sum - centre)).exp());
        y.push(rng.gen_bool(p));
        row.extend((0..noise).map(|_| rng.gen_range(-1.0..1.0)));
        rows.push(row);
    }
    (rows, y)
}
