//! Newton-boosted histogram trees with a softmax objective.
//!
//! Each round fits one regression tree per class to the gradient
//! `g = p − y` and Hessian `h = p(1 − p)` of the cross-entropy. Splits maximise
//! `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]` over per-feature quantile bins;
//! leaves carry `−lr · G/(H+λ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_rows, check_training, cross_entropy, softmax, LearnError};

pub const GBDT_VERSION: &str = "bs-gbdt-1";

const MIN_HESSIAN: f64 = 1e-16;
const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GbdtProfile {
    /// depth 7, learning rate 0.001, 50 rounds
    Paper,
    /// depth 7, learning rate 0.3, 200 rounds
    Tuned,
}

impl GbdtProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            GbdtProfile::Paper => "paper",
            GbdtProfile::Tuned => "tuned",
        }
    }

    pub fn config(self, seed: u64) -> GbdtConfig {
        match self {
            GbdtProfile::Paper => GbdtConfig {
                seed,
                ..GbdtConfig::default()
            },
            GbdtProfile::Tuned => GbdtConfig {
                learning_rate: 0.3,
                n_iterations: 200,
                seed,
                ..GbdtConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_iterations: usize,
    pub n_bins: usize,
    pub l2_lambda: f64,
    pub min_child_weight: f64,
    /// Training has no stochastic step; the seed is carried for provenance.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            max_depth: 7,
            learning_rate: 0.001,
            n_iterations: 50,
            n_bins: 256,
            l2_lambda: 1.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.into()));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(2..=256).contains(&self.n_bins) {
            return bad("n_bins must lie in [2, 256]");
        }
        if !(self.l2_lambda >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("l2_lambda and min_child_weight must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` (equivalently bin `<= bin`) go left.
    Split {
        feature: usize,
        bin: u16,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub version: String,
    pub config: GbdtConfig,
    pub n_features: usize,
    pub n_classes: usize,
    /// Log of the training class prior.
    pub base_score: Vec<f64>,
    /// Per-feature bin upper edges; bin `b` holds `edges[b-1] < x <= edges[b]`.
    pub bin_edges: Vec<Vec<f64>>,
    /// `rounds[r][c]` is the tree for class `c` in round `r`.
    pub rounds: Vec<Vec<Tree>>,
}

impl GbdtModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let m: GbdtModel = serde_json::from_str(text)?;
        if m.version != GBDT_VERSION {
            return Err(LearnError::Version(m.version));
        }
        Ok(m)
    }

    /// Raw class scores using the first `n_rounds` rounds.
    pub fn raw_scores(&self, row: &[f64], n_rounds: usize) -> Vec<f64> {
        let mut z = self.base_score.clone();
        for round in self.rounds.iter().take(n_rounds) {
            for (zc, tree) in z.iter_mut().zip(round) {
                *zc += tree.predict(row);
            }
        }
        z
    }

    pub fn predict_proba_rounds(&self, x: &[Vec<f64>], n_rounds: usize) -> Result<Vec<Vec<f64>>, LearnError> {
        check_rows(x, Some(self.n_features))?;
        Ok(x.par_iter()
            .map(|r| {
                let mut z = self.raw_scores(r, n_rounds);
                softmax(&mut z);
                z
            })
            .collect())
    }

    /// Swap class columns: class `c` of the result is class `perm[c]` of `self`.
    pub fn permute_classes(&self, perm: &[usize]) -> GbdtModel {
        let mut m = self.clone();
        m.base_score = perm.iter().map(|&c| self.base_score[c]).collect();
        m.rounds = self
            .rounds
            .iter()
            .map(|r| perm.iter().map(|&c| r[c].clone()).collect())
            .collect();
        m
    }
}

/// Quantile bin edges for one feature column. When the column has at most
/// `n_bins` distinct values, edges are midpoints between neighbours so that
/// bins separate every distinct value.
pub fn bin_edges(column: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= n_bins {
        return distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    }
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..n_bins).map(|q| sorted[(q * n / n_bins).min(n - 1)]).collect();
    edges.dedup();
    // the maximum as an edge puts every row left; drop it
    if edges.last() == distinct.last() {
        edges.pop();
    }
    edges
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|e| *e < x)
}

struct Binned {
    /// column-major bins, `cols[f][i]`
    cols: Vec<Vec<u8>>,
    n_bins: Vec<usize>,
}

#[derive(Clone, Copy)]
struct SplitChoice {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct TreeBuilder<'a> {
    binned: &'a Binned,
    edges: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a GbdtConfig,
    nodes: Vec<Node>,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        self.nodes.push(Node::Leaf {
            weight: -self.cfg.learning_rate * g / (h + self.cfg.l2_lambda),
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize]) -> Option<SplitChoice> {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let lambda = self.cfg.l2_lambda;
        let parent = score(g, h, lambda);
        let per_feature: Vec<Option<SplitChoice>> = (0..self.binned.cols.len())
            .into_par_iter()
            .map(|f| {
                let nb = self.binned.n_bins[f];
                if nb < 2 {
                    return None;
                }
                let col = &self.binned.cols[f];
                let mut hist = vec![(0.0f64, 0.0f64, 0usize); nb];
                for &i in rows {
                    let e = &mut hist[usize::from(col[i])];
                    e.0 += self.grad[i];
                    e.1 += self.hess[i];
                    e.2 += 1;
                }
                let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
                let mut best: Option<SplitChoice> = None;
                for (b, &(gb, hb, nbin)) in hist.iter().enumerate().take(nb - 1) {
                    gl += gb;
                    hl += hb;
                    nl += nbin;
                    let nr = rows.len() - nl;
                    if nbin == 0 || nl == 0 || nr == 0 {
                        continue;
                    }
                    let hr = h - hl;
                    if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                        continue;
                    }
                    let gain = 0.5 * (score(gl, hl, lambda) + score(g - gl, hr, lambda) - parent);
                    if best.is_none_or(|s| gain > s.gain) {
                        best = Some(SplitChoice { gain, feature: f, bin: b });
                    }
                }
                best
            })
            .collect();
        // lowest feature wins ties, in a fixed order
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<SplitChoice>, s| match acc {
                Some(a) if a.gain >= s.gain => Some(a),
                _ => Some(s),
            })
            .filter(|s| s.gain > 0.0)
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return self.leaf(rows);
        }
        let Some(split) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        let col = &self.binned.cols[split.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| usize::from(col[i]) <= split.bin);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { weight: 0.0 });
        let left = self.grow(&left_rows, depth + 1);
        let right = self.grow(&right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            bin: split.bin as u16,
            threshold: self.edges[split.feature][split.bin],
            left,
            right,
        };
        at
    }
}

pub fn train_gbdt(x: &[Vec<f64>], y: &[usize], n_classes: usize, cfg: &GbdtConfig) -> Result<GbdtModel, LearnError> {
    cfg.validate()?;
    let n_features = check_training(x, y, n_classes)?;
    let n = x.len();

    let edges: Vec<Vec<f64>> = (0..n_features)
        .into_par_iter()
        .map(|f| {
            let col: Vec<f64> = x.iter().map(|r| r[f]).collect();
            bin_edges(&col, cfg.n_bins)
        })
        .collect();
    let binned = Binned {
        cols: (0..n_features)
            .map(|f| x.iter().map(|r| bin_of(&edges[f], r[f]) as u8).collect())
            .collect(),
        n_bins: edges.iter().map(|e| e.len() + 1).collect(),
    };

    let mut counts = vec![0usize; n_classes];
    y.iter().for_each(|&c| counts[c] += 1);
    let base_score: Vec<f64> = counts
        .iter()
        .map(|&k| (k as f64 / n as f64).max(PRIOR_FLOOR).ln())
        .collect();

    let mut raw: Vec<Vec<f64>> = vec![base_score.clone(); n];
    let mut rounds = Vec::with_capacity(cfg.n_iterations);
    let all_rows: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.n_iterations {
        let probs: Vec<Vec<f64>> = raw
            .iter()
            .map(|z| {
                let mut p = z.clone();
                softmax(&mut p);
                p
            })
            .collect();
        let trees: Vec<Tree> = (0..n_classes)
            .into_par_iter()
            .map(|c| {
                let grad: Vec<f64> = (0..n).map(|i| probs[i][c] - f64::from(u8::from(y[i] == c))).collect();
                let hess: Vec<f64> = (0..n)
                    .map(|i| (probs[i][c] * (1.0 - probs[i][c])).max(MIN_HESSIAN))
                    .collect();
                let mut b = TreeBuilder {
                    binned: &binned,
                    edges: &edges,
                    grad: &grad,
                    hess: &hess,
                    cfg,
                    nodes: Vec::new(),
                };
                b.grow(&all_rows, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        for (z, row) in raw.iter_mut().zip(x) {
            for (zc, t) in z.iter_mut().zip(&trees) {
                *zc += t.predict(row);
            }
        }
        rounds.push(trees);
    }

    Ok(GbdtModel {
        version: GBDT_VERSION.into(),
        config: cfg.clone(),
        n_features,
        n_classes,
        base_score,
        bin_edges: edges,
        rounds,
    })
}

/// Class probabilities `[n × C]`.
pub fn predict_gbdt(model: &GbdtModel, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LearnError> {
    model.predict_proba_rounds(x, model.rounds.len())
}

/// Mean training cross-entropy after each of the first `n` rounds (index 0 is
/// the prior-only model).
pub fn loss_trace(model: &GbdtModel, x: &[Vec<f64>], y: &[usize], n: usize) -> Result<Vec<f64>, LearnError> {
    (0..=n.min(model.rounds.len()))
        .map(|k| Ok(cross_entropy(&model.predict_proba_rounds(x, k)?, y)))
        .collect()
}
