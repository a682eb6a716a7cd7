//! Gradient-boosted regression trees on logistic loss.
//!
//! Each round fits a level-wise tree of bounded depth to the Newton
//! statistics of the current ensemble. Samples carry Bayesian-bootstrap
//! weights `(-ln u)^t` redrawn every round, `u ~ U(0, 1]`, `t` the bagging
//! temperature (`t = 0` gives unit weights). Leaves hold
//! `sum(w * (y - p)) / (sum(w * p * (1 - p)) + l2_leaf_reg)` and are scaled by
//! the learning rate when accumulated.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Minimum number of training rows.
pub const MIN_TRAINING_ROWS: usize = 10;

const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub tree_depth: usize,
    pub l2_leaf_reg: f64,
    pub bagging_temperature: f64,
    pub n_trees: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            tree_depth: 6,
            l2_leaf_reg: 3.0,
            bagging_temperature: 1.0,
            n_trees: 200,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParam {
                name,
                reason: reason.to_string(),
            })
        };
        if self.n_trees == 0 {
            return bad("n_trees", "must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if !(self.l2_leaf_reg.is_finite() && self.l2_leaf_reg >= 0.0) {
            return bad("l2_leaf_reg", "must be non-negative");
        }
        if !(self.bagging_temperature.is_finite() && self.bagging_temperature >= 0.0) {
            return bad("bagging_temperature", "must be non-negative");
        }
        Ok(())
    }
}

/// A regression tree over original feature indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `value <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf { value: f64 },
}

impl TreeNode {
    fn eval(&self, value_of: &impl Fn(usize) -> f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if value_of(*feature) <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn visit_splits(&self, f: &mut impl FnMut(usize, f64)) {
        if let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } = self
        {
            f(*feature, *threshold);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }

    pub fn visit_leaves(&self, f: &mut impl FnMut(f64)) {
        match self {
            TreeNode::Leaf { value } => f(*value),
            TreeNode::Split { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }
}

/// A trained per-user classifier. Scores are P(understood).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComprehensionModel {
    pub format_version: u32,
    pub selected_features: Vec<usize>,
    pub hyperparams: Hyperparams,
    /// Prior log-odds of the positive class.
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ComprehensionModel {
    fn raw_with(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        let lr = self.hyperparams.learning_rate;
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + lr * t.eval(&value_of))
    }

    /// Scores rows whose columns are exactly `selected_features`, in order.
    pub fn predict<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>> {
        let width = self.selected_features.len();
        let max = self.selected_features.iter().copied().max().unwrap_or(0);
        let mut position = vec![usize::MAX; max + 1];
        for (i, &f) in self.selected_features.iter().enumerate() {
            position[f] = i;
        }
        rows.iter()
            .map(|r| {
                let r = r.as_ref();
                if r.len() != width {
                    return Err(Error::DimensionMismatch {
                        expected: width,
                        actual: r.len(),
                    });
                }
                Ok(sigmoid(self.raw_with(|f| r[position[f]])))
            })
            .collect()
    }

    /// Scores full-width rows, reading the selected columns by index.
    pub fn predict_full<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>> {
        let need = self.selected_features.iter().copied().max().map_or(0, |m| m + 1);
        rows.iter()
            .map(|r| {
                let r = r.as_ref();
                if r.len() < need {
                    return Err(Error::DimensionMismatch {
                        expected: need,
                        actual: r.len(),
                    });
                }
                Ok(sigmoid(self.raw_with(|f| r[f])))
            })
            .collect()
    }

    /// Restricts full rows to the selected columns.
    pub fn select_columns<R: AsRef<[f64]>>(&self, rows: &[R]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| self.selected_features.iter().map(|&f| r.as_ref()[f]).collect())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(probe.format_version));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Mean logistic loss of raw scores against labels.
pub fn log_loss(raw: &[f64], y: &[bool]) -> f64 {
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(&z, &yi)| {
            // log(1 + e^-z) for y=1, log(1 + e^z) for y=0, computed stably.
            let m = if yi { -z } else { z };
            m.max(0.0) + (-m.abs()).exp().ln_1p()
        })
        .sum();
    total / raw.len() as f64
}

pub fn check_training_input<R: AsRef<[f64]>>(rows: &[R], y: &[bool], features: &[usize]) -> Result<()> {
    if rows.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: y.len(),
        });
    }
    if rows.len() < MIN_TRAINING_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} rows, need at least {MIN_TRAINING_ROWS}",
            rows.len()
        )));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateLabels("only one class present".into()));
    }
    if features.is_empty() {
        return Err(Error::InvalidParam {
            name: "features",
            reason: "no features selected".into(),
        });
    }
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        for &f in features {
            let v = *r.get(f).ok_or(Error::DimensionMismatch {
                expected: f + 1,
                actual: r.len(),
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidParam {
                    name: "features",
                    reason: format!("non-finite value in row {i}, feature {f}"),
                });
            }
        }
    }
    Ok(())
}

/// Trains on every column of `rows`.
pub fn train_gbdt<R: AsRef<[f64]>>(rows: &[R], y: &[bool], hp: &Hyperparams) -> Result<ComprehensionModel> {
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    let features: Vec<usize> = (0..width).collect();
    train_on_features(rows, y, &features, hp)
}

/// Trains on the listed columns of `rows`.
pub fn train_on_features<R: AsRef<[f64]>>(
    rows: &[R],
    y: &[bool],
    features: &[usize],
    hp: &Hyperparams,
) -> Result<ComprehensionModel> {
    Ok(train_impl(rows, y, features, hp, false)?.0)
}

/// Training that also returns the raw training scores after every round
/// (index 0 is the base score).
pub fn train_traced<R: AsRef<[f64]>>(
    rows: &[R],
    y: &[bool],
    features: &[usize],
    hp: &Hyperparams,
) -> Result<(ComprehensionModel, Vec<Vec<f64>>)> {
    train_impl(rows, y, features, hp, true)
}

fn train_impl<R: AsRef<[f64]>>(
    rows: &[R],
    y: &[bool],
    features: &[usize],
    hp: &Hyperparams,
    keep_history: bool,
) -> Result<(ComprehensionModel, Vec<Vec<f64>>)> {
    hp.validate()?;
    check_training_input(rows, y, features)?;
    let data = ColumnData::new(rows, features);
    let n = rows.len();
    let targets: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let rate = targets.iter().sum::<f64>() / n as f64;
    let base_score = (rate / (1.0 - rate)).ln();

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut raw = vec![base_score; n];
    let mut history = Vec::new();
    if keep_history {
        history.push(raw.clone());
    }
    let mut trees = Vec::new();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut weights = vec![1.0; n];
    let mut workspace = Workspace::default();
    let builder = TreeBuilder {
        data: &data,
        max_depth: hp.tree_depth,
        l2: hp.l2_leaf_reg,
    };

    for _ in 0..hp.n_trees {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = targets[i] - p;
            hess[i] = p * (1.0 - p);
        }
        if hp.bagging_temperature > 0.0 {
            for w in weights.iter_mut() {
                let u = 1.0 - rng.gen::<f64>();
                let e = -u.ln();
                *w = match hp.bagging_temperature {
                    1.0 => e,
                    0.5 => e.sqrt(),
                    t => e.powf(t),
                };
            }
        }
        let Some((tree, leaf_of, leaf_values)) = builder.build(&grad, &hess, &weights, &mut workspace) else {
            if hp.bagging_temperature == 0.0 {
                // Unit weights: every later round would see the same statistics.
                break;
            }
            continue;
        };
        for i in 0..n {
            raw[i] += hp.learning_rate * leaf_values[leaf_of[i]];
        }
        trees.push(tree);
        if keep_history {
            history.push(raw.clone());
        }
    }

    Ok((
        ComprehensionModel {
            format_version: MODEL_FORMAT_VERSION,
            selected_features: features.to_vec(),
            hyperparams: *hp,
            base_score,
            trees,
        },
        history,
    ))
}

/// Column-major copy of the training columns with presorted row orders.
struct ColumnData {
    features: Vec<usize>,
    /// Per column, (value, row) in ascending value order, ties by row.
    sorted: Vec<Vec<Entry>>,
    rows: usize,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    row: u32,
}

impl ColumnData {
    fn new<R: AsRef<[f64]>>(rows: &[R], features: &[usize]) -> Self {
        let sorted = features
            .iter()
            .map(|&f| {
                let mut idx: Vec<Entry> = rows
                    .iter()
                    .enumerate()
                    .map(|(row, r)| Entry {
                        value: r.as_ref()[f],
                        row: row as u32,
                    })
                    .collect();
                idx.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.row.cmp(&b.row)));
                idx
            })
            .collect();
        ColumnData {
            features: features.to_vec(),
            sorted,
            rows: rows.len(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    column: usize,
    threshold: f64,
}

enum Slot {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Buffers reused across the trees of one training run.
#[derive(Default)]
struct Workspace {
    order: Vec<Vec<Entry>>,
    scratch: Vec<Entry>,
    goes_left: Vec<bool>,
    gh: Vec<(f64, f64)>,
}

struct TreeBuilder<'a> {
    data: &'a ColumnData,
    max_depth: usize,
    l2: f64,
}

impl TreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.l2)
    }

    /// Grows one tree. Returns `None` when the root admits no split.
    /// Otherwise returns the tree, each row's leaf id and the leaf values.
    ///
    /// Every column keeps its own presorted row order, partitioned so that
    /// the rows of each open node form one contiguous segment (at the same
    /// offsets in every column). Rows that reach a leaf leave the segments.
    fn build(
        &self,
        grad: &[f64],
        hess: &[f64],
        weights: &[f64],
        ws: &mut Workspace,
    ) -> Option<(TreeNode, Vec<usize>, Vec<f64>)> {
        let n = self.data.rows;
        ws.gh.clear();
        ws.gh
            .extend(grad.iter().zip(hess).zip(weights).map(|((g, h), w)| (g * w, h * w)));
        ws.order.resize_with(self.data.sorted.len(), Vec::new);
        for (dst, src) in ws.order.iter_mut().zip(&self.data.sorted) {
            dst.clone_from(src);
        }
        ws.goes_left.resize(n, false);
        let Workspace {
            order,
            scratch,
            goes_left,
            gh,
        } = ws;
        let gh: &[(f64, f64)] = gh;

        let mut slots: Vec<Option<Slot>> = vec![None];
        let mut leaf_of = vec![usize::MAX; n];
        let mut leaf_values = Vec::new();
        // (node, start, end) into every column's order.
        let mut open = vec![(0usize, 0usize, n)];

        for depth in 0..=self.max_depth {
            if open.is_empty() {
                break;
            }
            let mut next_open = Vec::new();
            for &(node, start, end) in &open {
                let (g_tot, h_tot) = order[0][start..end].iter().fold((0.0, 0.0), |(g, h), e| {
                    let (eg, eh) = gh[e.row as usize];
                    (g + eg, h + eh)
                });
                let choice = if depth < self.max_depth {
                    self.best_split(order, start, end, gh, g_tot, h_tot)
                } else {
                    None
                };
                if depth == 0 && choice.is_none() {
                    return None;
                }
                let Some(c) = choice else {
                    let leaf = leaf_values.len();
                    leaf_values.push(g_tot / (h_tot + self.l2));
                    slots[node] = Some(Slot::Leaf(leaf));
                    for e in &order[0][start..end] {
                        leaf_of[e.row as usize] = leaf;
                    }
                    continue;
                };
                let left = slots.len();
                slots.push(None);
                slots.push(None);
                slots[node] = Some(Slot::Split {
                    feature: c.column,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                });
                let mut n_left = 0;
                for e in &order[c.column][start..end] {
                    let l = e.value <= c.threshold;
                    goes_left[e.row as usize] = l;
                    n_left += usize::from(l);
                }
                // Branch-free stable partition: every entry is written to
                // both destinations and only the matching cursor advances.
                let len = end - start;
                scratch.resize(len + 1, Entry { value: 0.0, row: 0 });
                // Children at maximum depth are never searched, so only the
                // order used for their totals needs partitioning.
                let columns = if depth + 1 == self.max_depth { 1 } else { order.len() };
                for col in order.iter_mut().take(columns) {
                    let seg = &mut col[start..end];
                    let (mut w, mut k) = (0, 0);
                    for i in 0..len {
                        let e = seg[i];
                        let l = usize::from(goes_left[e.row as usize]);
                        // SAFETY: w <= i < len and k <= i < len, and
                        // scratch holds len + 1 entries.
                        unsafe {
                            *seg.get_unchecked_mut(w) = e;
                            *scratch.get_unchecked_mut(k) = e;
                        }
                        w += l;
                        k += 1 - l;
                    }
                    seg[w..].copy_from_slice(&scratch[..k]);
                }
                next_open.push((left, start, start + n_left));
                next_open.push((left + 1, start + n_left, end));
            }
            open = next_open;
        }

        let tree = self.assemble(&slots, &leaf_values, 0);
        Some((tree, leaf_of, leaf_values))
    }

    fn assemble(&self, slots: &[Option<Slot>], leaf_values: &[f64], node: usize) -> TreeNode {
        match slots[node].as_ref().expect("every node resolved") {
            Slot::Leaf(leaf) => TreeNode::Leaf {
                value: leaf_values[*leaf],
            },
            Slot::Split {
                feature,
                threshold,
                left,
                right,
            } => TreeNode::Split {
                feature: self.data.features[*feature],
                threshold: *threshold,
                left: Box::new(self.assemble(slots, leaf_values, *left)),
                right: Box::new(self.assemble(slots, leaf_values, *right)),
            },
        }
    }

    /// Exact greedy search over one node's segment. Ties keep the earlier
    /// column, then the lower threshold.
    ///
    /// The split score gl²/(hl+λ) + gr²/(hr+λ) is kept as one fraction
    /// num/den and compared by cross-multiplication (den > 0).
    fn best_split(
        &self,
        order: &[Vec<Entry>],
        start: usize,
        end: usize,
        gh: &[(f64, f64)],
        g_tot: f64,
        h_tot: f64,
    ) -> Option<SplitChoice> {
        if end - start < 2 {
            return None;
        }
        let l2 = self.l2;
        let mut target = self.score(g_tot, h_tot) + MIN_GAIN;
        let mut best: Option<SplitChoice> = None;
        for (column, col_order) in order.iter().enumerate() {
            let seg = &col_order[start..end];
            let (mut gl, mut hl) = gh[seg[0].row as usize];
            let mut prev = seg[0].value;
            for e in &seg[1..] {
                let value = e.value;
                let (gr, dl, dr) = (g_tot - gl, hl + l2, h_tot - hl + l2);
                let num = gl * gl * dr + gr * gr * dl;
                let den = dl * dr;
                if (value > prev) & (num > target * den) {
                    {
                        target = num / den;
                        let mid = prev + (value - prev) / 2.0;
                        best = Some(SplitChoice {
                            column,
                            threshold: if mid < value { mid } else { prev },
                        });
                    }
                }
                // SAFETY: every row id is < n == gh.len().
                let (g, h) = unsafe { *gh.get_unchecked(e.row as usize) };
                gl += g;
                hl += h;
                prev = value;
            }
        }
        best
    }
}
