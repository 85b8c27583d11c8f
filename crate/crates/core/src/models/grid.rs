//! Exhaustive hyper-parameter search by cross-validated recall.

use std::collections::BTreeMap;

use super::{fit, ClassifierSpec, ModelError};
use crate::dataset::Dataset;
use crate::evaluation::{confusion, stratified_group_folds};

#[derive(Debug, Clone, PartialEq)]
pub struct GridEvaluation {
    pub params: BTreeMap<String, f64>,
    /// Mean validation recall over the folds where it is defined.
    pub mean_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: ClassifierSpec,
    pub evaluations: Vec<GridEvaluation>,
}

/// Cartesian product of the grid axes; the last axis varies fastest.
pub fn expand_grid(grid: &[(String, Vec<f64>)]) -> Vec<BTreeMap<String, f64>> {
    let mut points = vec![BTreeMap::new()];
    for (key, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Tries every grid point on top of `base.params` and keeps the one with the highest mean
/// validation recall; the first point in grid order wins ties.
pub fn grid_search(
    base: &ClassifierSpec,
    train: &Dataset,
    grid: &[(String, Vec<f64>)],
    folds: usize,
) -> Result<GridResult, ModelError> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(ModelError::InvalidParam {
            kind: base.kind,
            key: "grid".into(),
            value: 0.0,
            reason: "grid is empty".into(),
        });
    }
    let folds = folds.max(2);
    let assignments = stratified_group_folds(train, folds, base.seed);
    let mut evaluations = Vec::new();
    let mut best: Option<(f64, ClassifierSpec)> = None;
    for point in expand_grid(grid) {
        let mut params = base.params.clone();
        params.extend(point.clone());
        let spec = ClassifierSpec::new(base.kind, params, base.seed)?;
        let mut recalls = Vec::new();
        for held in &assignments {
            let mut in_fold = vec![false; train.n_rows()];
            held.iter().for_each(|&i| in_fold[i] = true);
            let rest: Vec<usize> = (0..train.n_rows()).filter(|&i| !in_fold[i]).collect();
            let fold_train = train.subset_rows(&rest);
            let fold_valid = train.subset_rows(held);
            if !fold_train.has_both_classes() && base.kind.can_score() {
                continue;
            }
            let model = fit(&spec, &fold_train)?;
            let predicted = model.predict_all(&fold_valid)?;
            let cm = confusion(fold_valid.labels(), &predicted).expect("equal lengths");
            if let Some(r) = cm.recall() {
                recalls.push(r);
            }
        }
        let mean_recall = (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64);
        let key = mean_recall.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _)| key > *b) {
            best = Some((key, spec));
        }
        evaluations.push(GridEvaluation { params: point, mean_recall });
    }
    Ok(GridResult { best: best.expect("grid is non-empty").1, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn separable() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let labels = (0..60).map(|i| u8::from(i >= 40)).collect();
        Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels).unwrap()
    }

    #[test]
    fn cartesian_count() {
        let grid = vec![("hidden_layers".to_string(), vec![1.0, 2.0]), ("hidden_units".to_string(), vec![8.0, 16.0])];
        let points = expand_grid(&grid);
        assert_eq!(points.len(), 4);
        assert_eq!(points[1]["hidden_layers"], 1.0);
        assert_eq!(points[1]["hidden_units"], 16.0);
    }

    #[test]
    fn ann_grid_performs_four_evaluations() {
        let base = ClassifierSpec::new(ModelKind::ANN, BTreeMap::from([("epochs".to_string(), 2.0)]), 1).unwrap();
        let grid = vec![("hidden_layers".to_string(), vec![1.0, 2.0]), ("hidden_units".to_string(), vec![8.0, 16.0])];
        let result = grid_search(&base, &separable(), &grid, 2).unwrap();
        assert_eq!(result.evaluations.len(), 4);
    }

    #[test]
    fn single_point_grid_is_returned_unchanged() {
        let base = ClassifierSpec::with_defaults(ModelKind::DT, 0);
        let grid = vec![("max_depth".to_string(), vec![2.0])];
        let result = grid_search(&base, &separable(), &grid, 3).unwrap();
        assert_eq!(result.best.params["max_depth"], 2.0);
    }

    #[test]
    fn perfect_recall_setting_wins() {
        // Depth 1 on a clean threshold reaches recall 1; GB with zero rounds of learning cannot.
        let base = ClassifierSpec::with_defaults(ModelKind::GB, 0);
        let grid = vec![("learning_rate".to_string(), vec![0.0, 1.0]), ("n_rounds".to_string(), vec![1.0])];
        let result = grid_search(&base, &separable(), &grid, 3).unwrap();
        assert_eq!(result.best.params["learning_rate"], 1.0);
        assert_eq!(result.evaluations[1].mean_recall, Some(1.0));
    }

    #[test]
    fn empty_grid_is_an_error() {
        let base = ClassifierSpec::with_defaults(ModelKind::DT, 0);
        assert!(grid_search(&base, &separable(), &[], 3).is_err());
    }
}
