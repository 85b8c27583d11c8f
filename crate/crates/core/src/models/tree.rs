//! Binary decision trees on histogram-binned features.
//!
//! Every column is cut into at most `max_bins` ordered bins. A split on bin
//! `b` of feature `f` sends a row left iff its value is `<= cuts[f][b]`, so a
//! fitted tree predicts directly on raw values. Cut points sit halfway between
//! adjacent distinct values, which makes the search exact whenever a column
//! has no more distinct values than bins.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::rng::StageRng;

pub const DEFAULT_MAX_BINS: usize = 256;

/// Column-major bin codes plus the cut points that produced them.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    codes: Vec<Vec<u8>>,
    cuts: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn from_dataset(data: &Dataset, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, 256);
        let mut codes = Vec::with_capacity(data.n_features());
        let mut cuts = Vec::with_capacity(data.n_features());
        for f in 0..data.n_features() {
            let column = data.column(f);
            let c = column_cuts(&column, max_bins);
            codes.push(column.iter().map(|&v| bin_of(&c, v)).collect());
            cuts.push(c);
        }
        Self { n_rows: data.n_rows(), codes, cuts }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.codes.len()
    }

    pub fn cuts(&self, feature: usize) -> &[f64] {
        &self.cuts[feature]
    }

    fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }
}

fn bin_of(cuts: &[f64], v: f64) -> u8 {
    cuts.partition_point(|&c| c < v) as u8
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn column_cuts(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let below = sorted[(q * n / max_bins).max(1) - 1];
        let next = distinct.partition_point(|&d| d <= below);
        if next < distinct.len() {
            let cut = midpoint(below, distinct[next]);
            if cuts.last().is_none_or(|&last| cut > last) {
                cuts.push(cut);
            }
        }
    }
    cuts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Weighted Shannon entropy of 0/1 targets.
    Entropy,
    /// Weighted squared error of real targets.
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitStrategy {
    /// Best cut over all bins of each candidate feature.
    Best,
    /// One uniformly drawn cut per candidate feature; the best of those wins.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(c) => c,
        }
        .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub strategy: SplitStrategy,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Entropy,
            strategy: SplitStrategy::Best,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Leaf value reached by `x`: class-1 share for entropy trees, mean target otherwise.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature as usize] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub struct TreeFit {
    pub tree: Tree,
    /// Total weighted impurity decrease credited to each feature.
    pub importances: Vec<f64>,
}

/// Per-bin sufficient statistics: `(a, b, count)`.
/// Entropy: `a` = class-0 weight, `b` = class-1 weight. Squared error: `a` = weight, `b` = weighted target sum.
#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    a: f64,
    b: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, o: &Stats) {
        self.a += o.a;
        self.b += o.b;
        self.n += o.n;
    }

    fn sub(&self, o: &Stats) -> Stats {
        Stats { a: self.a - o.a, b: self.b - o.b, n: self.n - o.n }
    }
}

fn cost(criterion: Criterion, s: &Stats) -> f64 {
    match criterion {
        Criterion::Entropy => {
            let t = s.a + s.b;
            let term = |w: f64| if w > 0.0 { -w * (w / t).log2() } else { 0.0 };
            term(s.a) + term(s.b)
        }
        // Squared error up to a constant shared by parent and children.
        Criterion::SquaredError => {
            if s.a > 0.0 {
                -s.b * s.b / s.a
            } else {
                0.0
            }
        }
    }
}

fn leaf_value(criterion: Criterion, s: &Stats) -> f64 {
    match criterion {
        Criterion::Entropy => {
            let t = s.a + s.b;
            if t > 0.0 {
                s.b / t
            } else {
                0.0
            }
        }
        Criterion::SquaredError => {
            if s.a > 0.0 {
                s.b / s.a
            } else {
                0.0
            }
        }
    }
}

struct Builder<'a> {
    binned: &'a BinnedMatrix,
    targets: &'a [f64],
    weights: Option<&'a [f64]>,
    params: TreeParams,
    n_candidates: usize,
    nodes: Vec<Node>,
    importances: Vec<f64>,
    hist: Vec<Stats>,
}

struct Candidate {
    feature: usize,
    bin: usize,
    gain: f64,
}

impl Builder<'_> {
    fn stats_of(&self, row: usize) -> Stats {
        let w = self.weights.map_or(1.0, |w| w[row]);
        let y = self.targets[row];
        match self.params.criterion {
            Criterion::Entropy => {
                if y >= 0.5 {
                    Stats { a: 0.0, b: w, n: 1 }
                } else {
                    Stats { a: w, b: 0.0, n: 1 }
                }
            }
            Criterion::SquaredError => Stats { a: w, b: w * y, n: 1 },
        }
    }

    fn is_pure(&self, rows: &[usize], total: &Stats) -> bool {
        match self.params.criterion {
            Criterion::Entropy => total.a <= 0.0 || total.b <= 0.0,
            Criterion::SquaredError => {
                let first = self.targets[rows[0]];
                rows.iter().all(|&r| self.targets[r] == first)
            }
        }
    }

    /// Fills `hist` for one feature over `rows`; returns the occupied bin range.
    fn histogram(&mut self, feature: usize, rows: &[usize]) -> (usize, usize) {
        let n_bins = self.binned.n_bins(feature);
        self.hist.clear();
        self.hist.resize(n_bins, Stats::default());
        let codes = &self.binned.codes[feature];
        let (mut lo, mut hi) = (usize::MAX, 0);
        for &r in rows {
            let b = codes[r] as usize;
            let s = self.stats_of(r);
            self.hist[b].add(&s);
            lo = lo.min(b);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    fn best_split(&mut self, rows: &[usize], total: &Stats, rng: &mut StageRng) -> Option<Candidate> {
        let n_features = self.binned.n_features();
        let mut order: Vec<usize> = (0..n_features).collect();
        if self.n_candidates < n_features || self.params.strategy == SplitStrategy::Random {
            order.shuffle(rng);
        }
        let parent_cost = cost(self.params.criterion, total);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<Candidate> = None;
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.n_candidates && best.is_some() {
                break;
            }
            let (lo, hi) = self.histogram(f, rows);
            if lo >= hi {
                continue;
            }
            let bins: Vec<usize> = match self.params.strategy {
                SplitStrategy::Best => (lo..hi).collect(),
                SplitStrategy::Random => vec![rng.gen_range(lo..hi)],
            };
            let mut left = Stats::default();
            let mut next = lo;
            for b in bins {
                while next <= b {
                    left.add(&self.hist[next]);
                    next += 1;
                }
                let right = total.sub(&left);
                if left.n < min_leaf || right.n < min_leaf {
                    continue;
                }
                let gain = parent_cost - cost(self.params.criterion, &left) - cost(self.params.criterion, &right);
                if best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(Candidate { feature: f, bin: b, gain });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &mut [usize], rng: &mut StageRng) {
        // (node index, start, end, depth)
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        self.nodes.push(Node::Leaf { value: 0.0 });
        while let Some((id, start, end, depth)) = stack.pop() {
            let node_rows = &rows[start..end];
            let mut total = Stats::default();
            for &r in node_rows {
                let s = self.stats_of(r);
                total.add(&s);
            }
            let value = leaf_value(self.params.criterion, &total);
            let n = node_rows.len();
            let stop = n < self.params.min_samples_split.max(2)
                || n < 2 * self.params.min_samples_leaf.max(1)
                || self.params.max_depth.is_some_and(|d| depth >= d)
                || self.is_pure(node_rows, &total);
            let split = if stop { None } else { self.best_split(node_rows, &total, rng) };
            let Some(c) = split else {
                self.nodes[id] = Node::Leaf { value };
                continue;
            };
            if c.gain > 0.0 {
                self.importances[c.feature] += c.gain;
            }
            let codes = &self.binned.codes[c.feature];
            let slice = &mut rows[start..end];
            let mut mid = 0;
            for i in 0..slice.len() {
                if codes[slice[i]] as usize <= c.bin {
                    slice.swap(i, mid);
                    mid += 1;
                }
            }
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { value: 0.0 });
            self.nodes.push(Node::Leaf { value: 0.0 });
            self.nodes[id] = Node::Split {
                feature: c.feature as u32,
                threshold: self.binned.cuts[c.feature][c.bin],
                left: left as u32,
                right: left as u32 + 1,
            };
            stack.push((left + 1, start + mid, end, depth + 1));
            stack.push((left, start, start + mid, depth + 1));
        }
    }
}

/// Grows one tree over `rows` (duplicates allowed, e.g. a bootstrap sample).
pub fn fit_tree(
    binned: &BinnedMatrix,
    targets: &[f64],
    weights: Option<&[f64]>,
    mut rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut StageRng,
) -> TreeFit {
    let mut builder = Builder {
        binned,
        targets,
        weights,
        params: *params,
        n_candidates: params.max_features.resolve(binned.n_features()),
        nodes: Vec::new(),
        importances: vec![0.0; binned.n_features()],
        hist: Vec::new(),
    };
    if rows.is_empty() {
        return TreeFit { tree: Tree { nodes: vec![Node::Leaf { value: 0.0 }] }, importances: builder.importances };
    }
    builder.build(&mut rows, rng);
    TreeFit { tree: Tree { nodes: builder.nodes }, importances: builder.importances }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn fit(rows: &[Vec<f64>], y: &[f64], params: TreeParams) -> TreeFit {
        let names = (0..rows[0].len()).map(|i| format!("x{i}")).collect();
        let labels = y.iter().map(|&v| u8::from(v >= 0.5)).collect();
        let data = Dataset::from_rows(names, rows, labels).unwrap();
        let binned = BinnedMatrix::from_dataset(&data, DEFAULT_MAX_BINS);
        fit_tree(&binned, y, None, (0..rows.len()).collect(), &params, &mut rng_from_seed(1))
    }

    #[test]
    fn xor_is_memorised() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0.0, 1.0, 1.0, 0.0];
        let fit = fit(&rows, &y, TreeParams::default());
        for (x, &t) in rows.iter().zip(&y) {
            assert_eq!(fit.tree.predict(x), t);
        }
    }

    #[test]
    fn cuts_are_midpoints_when_few_values() {
        assert_eq!(column_cuts(&[3.0, 1.0, 2.0, 1.0], 256), vec![1.5, 2.5]);
        assert!(column_cuts(&[5.0, 5.0], 256).is_empty());
    }

    #[test]
    fn quantile_cuts_are_increasing_and_bounded() {
        let values: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 10_007) as f64).collect();
        let cuts = column_cuts(&values, 64);
        assert!(cuts.len() <= 63 && cuts.len() > 50);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn depth_limit_is_respected() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| f64::from(i % 2)).collect();
        let fit = fit(&rows, &y, TreeParams { max_depth: Some(3), ..Default::default() });
        assert!(fit.tree.depth() <= 3);
        assert!(fit.tree.leaf_count() <= 8);
    }

    #[test]
    fn regression_leaf_is_the_mean() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
        let params = TreeParams { criterion: Criterion::SquaredError, max_depth: Some(1), ..Default::default() };
        let fit = fit(&rows, &y, params);
        assert_eq!(fit.tree.predict(&[0.0]), 2.0);
        assert_eq!(fit.tree.predict(&[5.0]), 11.0);
        assert!(matches!(fit.tree.nodes()[0], Node::Split { threshold, .. } if threshold == 2.5));
    }

    #[test]
    fn informative_feature_gets_the_importance() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 13) as f64, (i / 100) as f64]).collect();
        let y: Vec<f64> = (0..200).map(|i| f64::from(i >= 100)).collect();
        let fit = fit(&rows, &y, TreeParams::default());
        assert!(fit.importances[1] > 0.0);
        assert_eq!(fit.importances[0], 0.0);
    }
}
