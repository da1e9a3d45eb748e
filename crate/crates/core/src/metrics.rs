//! Evaluation protocol: variance explained, SMAPE, train/test splits and
//! time-point subsampling, score aggregation.

use rand::Rng;
use std::collections::HashMap;

/// Population variance.
fn pvar(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Variance explained for one parameter: `1 − Var(y − ŷ)/Var(y)`
/// (population variance). A degenerate target (zero variance, including a
/// single sample) scores 0.
pub fn variance_explained(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len());
    assert!(!y.is_empty());
    let vy = pvar(y);
    if vy == 0.0 {
        return 0.0;
    }
    let resid: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    1.0 - pvar(&resid) / vy
}

/// VE averaged over parameters; `y[i]` and `yhat[i]` are per-sequence
/// target vectors of equal length P.
pub fn variance_explained_multi(y: &[Vec<f64>], yhat: &[Vec<f64>]) -> f64 {
    let p = y[0].len();
    (0..p)
        .map(|k| {
            let yk: Vec<f64> = y.iter().map(|v| v[k]).collect();
            let hk: Vec<f64> = yhat.iter().map(|v| v[k]).collect();
            variance_explained(&yk, &hk)
        })
        .sum::<f64>()
        / p as f64
}

/// Symmetric mean absolute percentage error:
/// `mean |ŷ−y| / (|y|+|ŷ|)` with `0/0 := 0`. Lies in [0, 1].
pub fn smape(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len());
    let mut acc = 0.0;
    for (&a, &b) in y.iter().zip(yhat) {
        let denom = a.abs() + b.abs();
        if denom > 0.0 {
            acc += (b - a).abs() / denom;
        }
    }
    acc / y.len() as f64
}

pub fn smape_multi(y: &[Vec<f64>], yhat: &[Vec<f64>]) -> f64 {
    let p = y[0].len();
    (0..p)
        .map(|k| {
            let yk: Vec<f64> = y.iter().map(|v| v[k]).collect();
            let hk: Vec<f64> = yhat.iter().map(|v| v[k]).collect();
            smape(&yk, &hk)
        })
        .sum::<f64>()
        / p as f64
}

/// Split/subsampling protocol. Test folds are disjoint chunks of the
/// shuffled id list, so the folds partition the dataset.
#[derive(Debug, Clone)]
pub struct EvalProtocol {
    pub n_splits: usize,
    pub train_fraction: f64,
    pub subsample_rates: Vec<f64>,
    pub master_seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            n_splits: 5,
            train_fraction: 0.8,
            subsample_rates: vec![0.2, 0.5, 0.8],
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic split assignments plus per-(rate, sequence) kept
/// time-point indices, shared across models and across the train/test role
/// of a sequence.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub splits: Vec<Split>,
    /// kept_times[rate_index][sequence_id] -> sorted kept indices
    pub kept_times: Vec<HashMap<usize, Vec<usize>>>,
}

/// Builds the split plan: `n_splits` disjoint test folds of size
/// `(1 − train_fraction)·n`, and per-sequence kept time indices
/// (`⌈rate·N⌉` of them, at least one) for every subsampling rate.
pub fn make_splits(
    ids: &[usize],
    n_obs: usize,
    protocol: &EvalProtocol,
    rng: &mut impl Rng,
) -> SplitPlan {
    assert!(ids.len() >= protocol.n_splits);
    assert!(
        protocol.n_splits as f64 * (1.0 - protocol.train_fraction) <= 1.0 + 1e-12,
        "test folds must fit disjointly"
    );
    let mut shuffled: Vec<usize> = ids.to_vec();
    use rand::seq::SliceRandom;
    shuffled.shuffle(rng);
    let fold = ((1.0 - protocol.train_fraction) * ids.len() as f64).round() as usize;
    let fold = fold.max(1);
    let mut splits = Vec::with_capacity(protocol.n_splits);
    for s in 0..protocol.n_splits {
        let test: Vec<usize> = shuffled[s * fold..((s + 1) * fold).min(shuffled.len())].to_vec();
        let train: Vec<usize> = shuffled
            .iter()
            .copied()
            .filter(|id| !test.contains(id))
            .collect();
        splits.push(Split { train, test });
    }

    let mut kept_times = Vec::with_capacity(protocol.subsample_rates.len());
    for &rate in &protocol.subsample_rates {
        let keep = ((rate * n_obs as f64).ceil() as usize).clamp(1, n_obs);
        let mut per_seq = HashMap::new();
        for &id in ids {
            let mut kept: Vec<usize> = rand::seq::index::sample(rng, n_obs, keep).into_vec();
            kept.sort_unstable();
            per_seq.insert(id, kept);
        }
        kept_times.push(per_seq);
    }
    SplitPlan { splits, kept_times }
}

/// One evaluated (split, rate) cell.
#[derive(Debug, Clone)]
pub struct ScoreCell {
    pub split: usize,
    pub rate: f64,
    pub ve_per_param: Vec<f64>,
    pub smape_per_param: Vec<f64>,
    pub ve: f64,
    pub smape: f64,
}

impl ScoreCell {
    pub fn from_predictions(
        split: usize,
        rate: f64,
        y: &[Vec<f64>],
        yhat: &[Vec<f64>],
    ) -> ScoreCell {
        let p = y[0].len();
        let mut ve_per_param = Vec::with_capacity(p);
        let mut smape_per_param = Vec::with_capacity(p);
        for k in 0..p {
            let yk: Vec<f64> = y.iter().map(|v| v[k]).collect();
            let hk: Vec<f64> = yhat.iter().map(|v| v[k]).collect();
            ve_per_param.push(variance_explained(&yk, &hk));
            smape_per_param.push(smape(&yk, &hk));
        }
        let ve = ve_per_param.iter().sum::<f64>() / p as f64;
        let sm = smape_per_param.iter().sum::<f64>() / p as f64;
        ScoreCell { split, rate, ve_per_param, smape_per_param, ve, smape: sm }
    }
}

/// Aggregate over cells: mean ± sample standard deviation.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub method: String,
    pub cells: Vec<ScoreCell>,
}

impl ScoreReport {
    pub fn new(method: impl Into<String>, cells: Vec<ScoreCell>) -> Self {
        ScoreReport { method: method.into(), cells }
    }

    pub fn ve_mean_std(&self) -> (f64, f64) {
        mean_std(&self.cells.iter().map(|c| c.ve).collect::<Vec<_>>())
    }

    pub fn smape_mean_std(&self) -> (f64, f64) {
        mean_std(&self.cells.iter().map(|c| c.smape).collect::<Vec<_>>())
    }

    /// `method  VE mean±std  SMAPE mean±std`, VE clamped below at 0 for
    /// display (raw cell values stay untouched).
    pub fn summary_row(&self) -> String {
        let (vm, vs) = self.ve_mean_std();
        let (sm, ss) = self.smape_mean_std();
        format!(
            "{:<28} {:.3}±{:.3}  {:.3}±{:.3}",
            self.method,
            vm.max(0.0),
            vs,
            sm,
            ss
        )
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn ve_perfect_and_mean_predictors() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(variance_explained(&y, &y), 1.0);
        let mean = [2.5; 4];
        assert!((variance_explained(&y, &mean)).abs() < 1e-15);
    }

    #[test]
    fn ve_hand_computed_two_thirds() {
        let y = [0.0, 1.0, 2.0];
        let yhat = [0.0, 1.0, 1.0];
        assert!((variance_explained(&y, &yhat) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ve_degenerate_target_is_zero() {
        let y = [5.0, 5.0, 5.0];
        let yhat = [1.0, 2.0, 3.0];
        assert_eq!(variance_explained(&y, &yhat), 0.0);
    }

    #[test]
    fn ve_shift_invariance() {
        let y = [0.1, 0.9, 0.4, 0.7];
        let yhat = [0.2, 0.8, 0.5, 0.6];
        let a = variance_explained(&y, &yhat);
        let ys: Vec<f64> = y.iter().map(|v| v + 13.0).collect();
        let hs: Vec<f64> = yhat.iter().map(|v| v + 13.0).collect();
        let b = variance_explained(&ys, &hs);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn smape_examples() {
        assert_eq!(smape(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(smape(&[1.0], &[0.0]), 1.0);
        assert!((smape(&[2.0], &[1.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(smape(&[0.0], &[0.0]), 0.0);
    }

    #[test]
    fn smape_symmetry() {
        let mut rng = ChaCha12Rng::seed_from_u64(60);
        use rand::Rng;
        for _ in 0..100 {
            let y: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let h: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            assert!((smape(&y, &h) - smape(&h, &y)).abs() < 1e-15);
        }
    }

    #[test]
    fn splits_partition_and_subsample_counts() {
        let ids: Vec<usize> = (0..100).collect();
        let protocol = EvalProtocol { master_seed: 7, ..Default::default() };
        let mut rng = ChaCha12Rng::seed_from_u64(protocol.master_seed);
        let plan = make_splits(&ids, 100, &protocol, &mut rng);
        assert_eq!(plan.splits.len(), 5);
        let mut seen = std::collections::HashSet::new();
        for s in &plan.splits {
            assert_eq!(s.test.len(), 20);
            assert_eq!(s.train.len(), 80);
            for id in &s.test {
                assert!(seen.insert(*id), "test folds overlap");
            }
        }
        assert_eq!(seen.len(), 100);
        // rate 0.2 of 100 observations keeps exactly 20 indices
        for id in &ids {
            assert_eq!(plan.kept_times[0][id].len(), 20);
            assert_eq!(plan.kept_times[1][id].len(), 50);
            assert_eq!(plan.kept_times[2][id].len(), 80);
        }
    }

    #[test]
    fn rate_one_keeps_everything() {
        let ids: Vec<usize> = (0..10).collect();
        let protocol = EvalProtocol {
            n_splits: 2,
            subsample_rates: vec![1.0],
            master_seed: 3,
            ..Default::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let plan = make_splits(&ids, 25, &protocol, &mut rng);
        for id in &ids {
            assert_eq!(plan.kept_times[0][id], (0..25).collect::<Vec<_>>());
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let ids: Vec<usize> = (0..40).collect();
        let protocol = EvalProtocol::default();
        let run = || {
            let mut rng = ChaCha12Rng::seed_from_u64(11);
            make_splits(&ids, 50, &protocol, &mut rng)
        };
        let (a, b) = (run(), run());
        for (sa, sb) in a.splits.iter().zip(&b.splits) {
            assert_eq!(sa.train, sb.train);
            assert_eq!(sa.test, sb.test);
        }
        for (ra, rb) in a.kept_times.iter().zip(&b.kept_times) {
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn aggregation_over_cells() {
        let cells: Vec<ScoreCell> = (0..15)
            .map(|i| ScoreCell {
                split: i / 3,
                rate: [0.2, 0.5, 0.8][i % 3],
                ve_per_param: vec![],
                smape_per_param: vec![],
                ve: i as f64 / 14.0,
                smape: 1.0 - i as f64 / 14.0,
            })
            .collect();
        let report = ScoreReport::new("test", cells);
        let (vm, vs) = report.ve_mean_std();
        assert!((vm - 0.5).abs() < 1e-12);
        assert!(vs > 0.0);
        assert_eq!(report.cells.len(), 15);
    }
}
