//! Objective, selection and survival scores, and the transform pipeline
//! (normalization, rounding, ranks, grouping) that feeds extraction.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::genome::{ncd, Genotype};
use crate::math::{abs, floor, log10, log2, powf, round};
use crate::regress::RegressionModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    /// Strictly better.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Min => a < b,
            Direction::Max => a > b,
        }
    }

    /// Orders `a` before `b` when `a` is better.
    pub fn cmp_best_first(self, a: f64, b: f64) -> Ordering {
        match self {
            Direction::Min => a.total_cmp(&b),
            Direction::Max => b.total_cmp(&a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    /// Sum of estimation errors, `Σ |Ŷ - Y|^s`.
    Se,
    /// Determination, `(r²)^s`.
    R2,
    /// Power mean of slope significances.
    Mt,
    /// Entropy of determination in bits.
    Hr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub s: f64,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidConfig("objective exponent must be > 0".into()));
        }
        if kind == ObjectiveKind::Hr && s == 1.0 {
            return Err(Error::InvalidConfig(
                "entropy of determination is undefined for s = 1".into(),
            ));
        }
        Ok(Self { kind, s })
    }

    pub fn direction(&self) -> Direction {
        match self.kind {
            ObjectiveKind::Se | ObjectiveKind::Hr => Direction::Min,
            ObjectiveKind::R2 | ObjectiveKind::Mt => Direction::Max,
        }
    }
}

/// Magnitudes above this are treated as this value in the power mean.
pub const T_CAP: f64 = 1e12;

pub fn objective_score(model: &RegressionModel, spec: &ObjectiveSpec) -> Result<f64> {
    let s = spec.s;
    Ok(match spec.kind {
        ObjectiveKind::Se => model.error_sum(s),
        ObjectiveKind::R2 => powf(model.r2, s),
        ObjectiveKind::Mt => minkowski_mean(&model.t_slopes, s),
        ObjectiveKind::Hr => {
            if s == 1.0 {
                return Err(Error::InvalidConfig(
                    "entropy of determination is undefined for s = 1".into(),
                ));
            }
            entropy_of_determination(model.r2, s)
        }
    })
}

/// `((1/n) Σ |t_i|^s)^(1/s)`.
pub fn minkowski_mean(t: &[f64], s: f64) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let sum: f64 = t.iter().map(|v| powf(abs(*v).min(T_CAP), s)).sum();
    powf(sum / t.len() as f64, 1.0 / s)
}

/// `log2(r^(2s) + (1 - r²)^s) / (1 - s)`.
pub fn entropy_of_determination(r2: f64, s: f64) -> f64 {
    let r2 = r2.clamp(0.0, 1.0);
    log2(powf(r2, s) + powf(1.0 - r2, s)) / (1.0 - s)
}

/// Per-genotype aggregate over the valid regressions containing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionAggregate {
    /// Number of valid regressions containing the genotype.
    NAlive,
    Min,
    Max,
    Avg,
}

/// A valid model reduced to what the scores need: sample positions of its
/// members and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredModel {
    pub members: Vec<usize>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScores {
    pub values: Vec<f64>,
    pub direction: Direction,
    /// Number of valid models each genotype takes part in.
    pub participation: Vec<usize>,
    /// No valid model was available; every score is the worst value.
    pub no_models: bool,
}

pub fn selection_scores(
    sample_size: usize,
    models: &[ScoredModel],
    aggregate: SelectionAggregate,
    objective_direction: Direction,
) -> SelectionScores {
    let mut participation = vec![0usize; sample_size];
    let mut min = vec![f64::INFINITY; sample_size];
    let mut max = vec![f64::NEG_INFINITY; sample_size];
    let mut sum = vec![0.0; sample_size];
    for model in models {
        for &i in &model.members {
            participation[i] += 1;
            min[i] = min[i].min(model.objective);
            max[i] = max[i].max(model.objective);
            sum[i] += model.objective;
        }
    }

    let direction = match aggregate {
        SelectionAggregate::NAlive => Direction::Max,
        _ => objective_direction,
    };
    let mut values: Vec<Option<f64>> = (0..sample_size)
        .map(|i| {
            if participation[i] == 0 {
                return None;
            }
            Some(match aggregate {
                SelectionAggregate::NAlive => participation[i] as f64,
                SelectionAggregate::Min => min[i],
                SelectionAggregate::Max => max[i],
                SelectionAggregate::Avg => sum[i] / participation[i] as f64,
            })
        })
        .collect();
    if aggregate == SelectionAggregate::NAlive {
        for v in &mut values {
            v.get_or_insert(0.0);
        }
    }
    // genotypes outside every valid model tie with the worst observed score
    let worst = match direction {
        Direction::Max => 0.0f64.min(values.iter().flatten().copied().fold(0.0, f64::min)),
        Direction::Min => values.iter().flatten().copied().fold(0.0, f64::max),
    };
    SelectionScores {
        values: values.into_iter().map(|v| v.unwrap_or(worst)).collect(),
        direction,
        participation,
        no_models: models.is_empty(),
    }
}

/// Running reference scores mapping each generation onto `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationState {
    pub low: f64,
    pub high: f64,
    pub global_min: Option<f64>,
    pub global_max: Option<f64>,
}

impl NormalizationState {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::InvalidConfig("normalization needs low < high".into()));
        }
        Ok(Self {
            low,
            high,
            global_min: None,
            global_max: None,
        })
    }

    fn update(&mut self, scores: &[f64]) {
        for &v in scores {
            self.global_min = Some(self.global_min.map_or(v, |m| m.min(v)));
            self.global_max = Some(self.global_max.map_or(v, |m| m.max(v)));
        }
    }
}

/// Sorted scores grouped into distinct values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    /// Score per sample position.
    pub fs: Vec<f64>,
    /// Distinct scores, ascending.
    pub distinct: Vec<f64>,
    /// Occurrences of each distinct score.
    pub counts: Vec<usize>,
    /// Sample positions holding each distinct score, ascending.
    pub members: Vec<Vec<usize>>,
    pub direction: Direction,
    /// Normalization references coincided; all scores were mapped to the
    /// lower bound.
    pub degenerate_normalization: bool,
}

impl ScoreTable {
    pub fn new(fs: Vec<f64>, direction: Direction) -> Self {
        let mut order: Vec<usize> = (0..fs.len()).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]).then(a.cmp(&b)));
        let mut distinct: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match distinct.last() {
                Some(&last) if last == fs[i] => members.last_mut().unwrap().push(i),
                _ => {
                    distinct.push(fs[i]);
                    members.push(vec![i]);
                }
            }
        }
        Self {
            counts: members.iter().map(Vec::len).collect(),
            fs,
            distinct,
            members,
            direction,
            degenerate_normalization: false,
        }
    }

    pub fn len(&self) -> usize {
        self.fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fs.is_empty()
    }
}

/// Rounds to `digits` significant digits.
pub fn round_significant(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() || digits == 0 {
        return x;
    }
    let magnitude = floor(log10(abs(x)));
    let exponent = digits as i32 - 1 - magnitude as i32;
    if exponent >= 0 {
        let factor = powf(10.0, exponent as f64);
        round(x * factor) / factor
    } else {
        let factor = powf(10.0, -exponent as f64);
        round(x / factor) * factor
    }
}

/// Tie-aware ranks `2·midrank - 1`, ascending; always integers starting at 1.
pub fn doubled_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1..=end share the midrank (start+1+end)/2
        let doubled = (start + 1 + end) as f64 - 1.0;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        start = end;
    }
    ranks
}

/// Normalization (optional), rounding (optional), ranks (optional), then
/// grouping.
pub fn transform_scores(
    fs: &[f64],
    direction: Direction,
    state: Option<&mut NormalizationState>,
    digits: Option<u32>,
    use_ranks: bool,
) -> Result<ScoreTable> {
    if fs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let mut values = fs.to_vec();
    let mut degenerate = false;
    if let Some(state) = state {
        state.update(&values);
        if let (Some(lo), Some(hi)) = (state.global_min, state.global_max) {
            if hi > lo {
                let span = (state.high - state.low) / (hi - lo);
                for v in &mut values {
                    *v = state.low + (*v - lo) * span;
                }
            } else {
                degenerate = true;
                values.iter_mut().for_each(|v| *v = state.low);
            }
        }
    }
    if let Some(d) = digits {
        values.iter_mut().for_each(|v| *v = round_significant(*v, d));
    }
    if use_ranks {
        values = doubled_ranks(&values);
    }
    let mut table = ScoreTable::new(values, direction);
    table.degenerate_normalization = degenerate;
    Ok(table)
}

/// Similarity value used when a pair coincides in both score and genotype.
pub const DEFAULT_VS_CAP: f64 = 1e12;

/// Nearest-neighbour similarity `VS(i) = min_j 2 / (|f_i - f_j|^q + (ncd/NC)^r)`.
/// Higher means more redundant.
pub fn survival_scores(
    genotypes: &[Genotype],
    fs: &[f64],
    q: f64,
    r: f64,
    cap: f64,
) -> Result<Vec<f64>> {
    if genotypes.len() != fs.len() {
        return Err(Error::LengthMismatch {
            expected: genotypes.len(),
            found: fs.len(),
        });
    }
    if genotypes.len() < 2 {
        return Err(Error::InvalidArgument("survival scores need at least 2 genotypes".into()));
    }
    if !(q > 0.0 && r > 0.0) {
        return Err(Error::InvalidConfig("survival exponents must be > 0".into()));
    }
    let nc = genotypes[0].len() as f64;
    let p = genotypes.len();
    let mut vs = vec![f64::INFINITY; p];
    for i in 0..p {
        for j in i + 1..p {
            let pair = pair_similarity(
                abs(fs[i] - fs[j]),
                ncd(&genotypes[i], &genotypes[j])? as f64 / nc,
                q,
                r,
                cap,
            );
            vs[i] = vs[i].min(pair);
            vs[j] = vs[j].min(pair);
        }
    }
    Ok(vs)
}

pub fn pair_similarity(score_gap: f64, genotype_gap: f64, q: f64, r: f64, cap: f64) -> f64 {
    let denom = powf(score_gap, q) + powf(genotype_gap, r);
    if denom > 0.0 {
        (2.0 / denom).min(cap)
    } else {
        cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(r2: f64, t: &[f64], residuals: &[f64]) -> RegressionModel {
        RegressionModel {
            member_ids: (0..t.len()).collect(),
            with_intercept: true,
            intercept: Some(0.0),
            slopes: vec![1.0; t.len()],
            t_intercept: Some(1.0),
            t_slopes: t.to_vec(),
            r2,
            residuals: residuals.to_vec(),
            df: 3,
            valid: true,
            ill_conditioned: false,
        }
    }

    #[test]
    fn objective_examples() {
        let exact = model(1.0, &[5.0], &[0.0, 0.0, 0.0]);
        let se = ObjectiveSpec::new(ObjectiveKind::Se, 2.0).unwrap();
        let r2 = ObjectiveSpec::new(ObjectiveKind::R2, 1.0).unwrap();
        assert_eq!(objective_score(&exact, &se).unwrap(), 0.0);
        assert_eq!(objective_score(&exact, &r2).unwrap(), 1.0);

        let hr = ObjectiveSpec::new(ObjectiveKind::Hr, 2.0).unwrap();
        let half = model(0.5, &[1.0], &[1.0]);
        assert!((objective_score(&half, &hr).unwrap() - 1.0).abs() < 1e-15);
        assert!(ObjectiveSpec::new(ObjectiveKind::Hr, 1.0).is_err());
        assert!(ObjectiveSpec::new(ObjectiveKind::Se, 0.0).is_err());

        let equal = model(0.3, &[-2.5, 2.5, 2.5], &[1.0]);
        for s in [0.5, 1.0, 2.0, 3.0] {
            let mt = ObjectiveSpec::new(ObjectiveKind::Mt, s).unwrap();
            assert!((objective_score(&equal, &mt).unwrap() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_boundaries() {
        for s in [0.5, 2.0, 3.0] {
            assert!(entropy_of_determination(0.0, s).abs() < 1e-15);
            assert!(entropy_of_determination(1.0, s).abs() < 1e-15);
        }
    }

    #[test]
    fn directions() {
        assert_eq!(ObjectiveSpec::new(ObjectiveKind::Se, 2.0).unwrap().direction(), Direction::Min);
        assert_eq!(ObjectiveSpec::new(ObjectiveKind::Hr, 2.0).unwrap().direction(), Direction::Min);
        assert_eq!(ObjectiveSpec::new(ObjectiveKind::R2, 1.0).unwrap().direction(), Direction::Max);
        assert_eq!(ObjectiveSpec::new(ObjectiveKind::Mt, 1.0).unwrap().direction(), Direction::Max);
    }

    #[test]
    fn nalive_combinatorics() {
        let models: Vec<ScoredModel> = [[0, 1], [0, 2], [1, 2]]
            .iter()
            .map(|m| ScoredModel {
                members: m.to_vec(),
                objective: 0.5,
            })
            .collect();
        let s = selection_scores(3, &models, SelectionAggregate::NAlive, Direction::Max);
        assert_eq!(s.values, vec![2.0, 2.0, 2.0]);
        let s = selection_scores(4, &models[..1], SelectionAggregate::NAlive, Direction::Max);
        assert_eq!(s.values[3], 0.0);
        assert_eq!(s.participation, vec![1, 1, 0, 0]);
    }

    #[test]
    fn average_matches_membership_enumeration() {
        let models = vec![
            ScoredModel { members: vec![0, 1], objective: 0.9 },
            ScoredModel { members: vec![1, 2], objective: 0.3 },
            ScoredModel { members: vec![0, 2], objective: 0.6 },
        ];
        let s = selection_scores(4, &models, SelectionAggregate::Avg, Direction::Max);
        for i in 0..3 {
            let containing: Vec<f64> = models
                .iter()
                .filter(|m| m.members.contains(&i))
                .map(|m| m.objective)
                .collect();
            let want = containing.iter().sum::<f64>() / containing.len() as f64;
            assert!((s.values[i] - want).abs() < 1e-15);
        }
        assert_eq!(s.values[3], 0.0);
        let s = selection_scores(4, &models, SelectionAggregate::Max, Direction::Min);
        // min direction: outsiders tie with the worst (largest) observed score
        assert_eq!(s.values[3], 0.9);
        let s = selection_scores(2, &[], SelectionAggregate::Min, Direction::Max);
        assert!(s.no_models);
        assert_eq!(s.values, vec![0.0, 0.0]);
    }

    #[test]
    fn transform_examples() {
        let mut state = NormalizationState::new(0.0, 1.0).unwrap();
        let t = transform_scores(&[2.0, 3.0, 4.0], Direction::Max, Some(&mut state), None, false)
            .unwrap();
        assert_eq!(t.fs, vec![0.0, 0.5, 1.0]);
        // the references are global: a later narrower generation is mapped inside
        let t = transform_scores(&[3.0, 3.5], Direction::Max, Some(&mut state), None, false)
            .unwrap();
        assert_eq!(t.fs, vec![0.5, 0.75]);

        assert_eq!(doubled_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 4.0, 4.0, 7.0]);
        assert_eq!(round_significant(0.123456, 3), 0.123);
        assert_eq!(round_significant(123456.0, 2), 120000.0);

        let mut flat = NormalizationState::new(0.0, 1.0).unwrap();
        let t = transform_scores(&[5.0, 5.0], Direction::Max, Some(&mut flat), None, false).unwrap();
        assert!(t.degenerate_normalization);
        assert_eq!(t.fs, vec![0.0, 0.0]);
        assert!(transform_scores(&[f64::NAN], Direction::Max, None, None, false).is_err());
    }

    #[test]
    fn score_table_groups() {
        let t = ScoreTable::new(vec![3.0, 1.0, 3.0, 2.0], Direction::Max);
        assert_eq!(t.distinct, vec![1.0, 2.0, 3.0]);
        assert_eq!(t.counts, vec![1, 1, 2]);
        assert_eq!(t.members[2], vec![0, 2]);
    }

    #[test]
    fn survival_examples() {
        let a = Genotype(vec![0, 1, 0]);
        let b = Genotype(vec![1, 0, 1]);
        let vs = survival_scores(&[a.clone(), a.clone()], &[0.4, 0.4], 1.0, 1.0, DEFAULT_VS_CAP)
            .unwrap();
        assert_eq!(vs, vec![DEFAULT_VS_CAP, DEFAULT_VS_CAP]);
        let vs = survival_scores(&[a.clone(), b.clone()], &[0.4, 0.4], 1.0, 1.0, DEFAULT_VS_CAP)
            .unwrap();
        assert_eq!(vs, vec![2.0, 2.0]);
        assert!(survival_scores(&[a.clone()], &[1.0], 1.0, 1.0, DEFAULT_VS_CAP).is_err());
        assert!(survival_scores(&[a, b], &[1.0], 1.0, 1.0, DEFAULT_VS_CAP).is_err());
    }

    fn argsort(v: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        idx
    }

    proptest! {
        #[test]
        fn ranks_preserve_order(v in proptest::collection::vec(-100i32..100, 1..40)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let t = transform_scores(&v, Direction::Max, None, None, true).unwrap();
            prop_assert_eq!(argsort(&t.fs), argsort(&v));
            prop_assert!(t.fs.iter().all(|r| r.fract() == 0.0 && *r >= 1.0));
        }

        #[test]
        fn normalization_keeps_extremes(v in proptest::collection::vec(-1e3f64..1e3, 2..30)) {
            let mut state = NormalizationState::new(-1.0, 1.0).unwrap();
            let t = transform_scores(&v, Direction::Max, Some(&mut state), None, false).unwrap();
            let (a, b) = (argsort(&t.fs), argsort(&v));
            prop_assert_eq!(a.first(), b.first());
            prop_assert_eq!(a.last(), b.last());
        }

        #[test]
        fn power_mean_monotone(t in proptest::collection::vec(-50f64..50.0, 1..6),
                               s1 in 0.1f64..5.0, ds in 0.0f64..5.0) {
            prop_assert!(minkowski_mean(&t, s1) <= minkowski_mean(&t, s1 + ds) * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn survival_symmetric_and_equivariant(
            raw in proptest::collection::vec((proptest::collection::vec(0u32..3, 4), 0f64..1.0), 2..9),
            shift in 0usize..8,
        ) {
            let genotypes: Vec<Genotype> = raw.iter().map(|(g, _)| Genotype(g.clone())).collect();
            let fs: Vec<f64> = raw.iter().map(|(_, f)| *f).collect();
            let vs = survival_scores(&genotypes, &fs, 1.0, 2.0, DEFAULT_VS_CAP).unwrap();
            let p = genotypes.len();
            let perm: Vec<usize> = (0..p).map(|i| (i + shift) % p).collect();
            let g2: Vec<Genotype> = perm.iter().map(|&i| genotypes[i].clone()).collect();
            let f2: Vec<f64> = perm.iter().map(|&i| fs[i]).collect();
            let vs2 = survival_scores(&g2, &f2, 1.0, 2.0, DEFAULT_VS_CAP).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(vs2[k], vs[i]);
            }
            for i in 0..p {
                for j in 0..p {
                    let gi = ncd(&genotypes[i], &genotypes[j]).unwrap() as f64 / 4.0;
                    let a = pair_similarity((fs[i] - fs[j]).abs(), gi, 1.0, 2.0, DEFAULT_VS_CAP);
                    let b = pair_similarity((fs[j] - fs[i]).abs(), gi, 1.0, 2.0, DEFAULT_VS_CAP);
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
