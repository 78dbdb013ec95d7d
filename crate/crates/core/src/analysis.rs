//! Rank correlation, forecast error metrics and sensitivity analysis.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preprocess::FeatureTable;
use crate::synthetic;
use crate::{Error, Result};

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (crate::mean(x), crate::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation of two equal-length samples; `None` when either is
/// constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::MissingValues);
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Pairwise Spearman matrix over every column of a table. Entries involving
/// a constant column are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        self.values[i][j]
    }

    /// Columns whose correlations are undefined.
    pub fn constant_columns(&self) -> Vec<&str> {
        self.names
            .iter()
            .enumerate()
            .filter(|(i, _)| self.values[*i][*i].is_none())
            .map(|(_, n)| n.as_str())
            .collect()
    }

    /// Square labelled CSV; undefined entries are left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["variable".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.map(|x| format!("{x:.6}")).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

pub fn spearman_matrix(table: &FeatureTable) -> Result<CorrelationMatrix> {
    if table.n_rows() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: table.n_rows(),
        });
    }
    let mut names = Vec::new();
    let mut ranks = Vec::new();
    let mut constant = Vec::new();
    for c in table.columns() {
        let v = c.series.complete_values()?;
        names.push(c.name.clone());
        constant.push(v.iter().all(|&x| x == v[0]));
        ranks.push(average_ranks(v));
    }
    let k = names.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        if constant[i] {
            continue;
        }
        values[i][i] = Some(1.0);
        for j in i + 1..k {
            let r = pearson(&ranks[i], &ranks[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { names, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
}

/// MAE, RMSE and `R² = 1 - SS_res/SS_tot` of predictions against actuals.
pub fn evaluate(actual: &[f64], predicted: &[f64]) -> Result<Metrics> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: actual.len(),
        });
    }
    if actual.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metrics input".into()));
    }
    let n = actual.len() as f64;
    let mae = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / n;
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    let mean = crate::mean(actual);
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(Metrics {
        mae,
        rmse: (ss_res / n).sqrt(),
        r2: 1.0 - ss_res / ss_tot,
    })
}

/// Mean absolute error alone; defined for constant actuals too.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    Ok(actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Average of the `+δ` and `-δ` responses.
    #[default]
    TwoSided,
    /// `+δ` response only.
    OneSided,
}

/// Relative output change over relative input change for one factor.
pub fn single_factor_sensitivity<F>(model: F, base: &[f64], factor: usize, delta: f64, sided: Sidedness) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if factor >= base.len() {
        return Err(Error::InvalidArgument(format!(
            "factor index {factor} out of range for {} inputs",
            base.len()
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("perturbation must be positive, got {delta}")));
    }
    let x0 = base[factor];
    if x0 == 0.0 || !x0.is_finite() {
        return Err(Error::InvalidArgument("base factor value is zero".into()));
    }
    let eval = |scale: f64| -> Result<f64> {
        let mut x = base.to_vec();
        x[factor] = x0 * scale;
        let y = model(&x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite("model output".into()))
        }
    };
    let y0 = eval(1.0)?;
    if y0 == 0.0 {
        return Err(Error::InvalidArgument("base model output is zero".into()));
    }
    let up = eval(1.0 + delta)?;
    let s = match sided {
        Sidedness::OneSided => ((up - y0) / y0) / delta,
        Sidedness::TwoSided => {
            let down = eval(1.0 - delta)?;
            ((up - down) / (2.0 * y0)) / delta
        }
    };
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolIndex {
    pub s1: f64,
    pub st: f64,
    pub s1_se: f64,
    pub st_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    pub indices: Vec<SobolIndex>,
    pub s1_sum: f64,
    pub s1_sum_se: f64,
    pub variance: f64,
    pub n: usize,
    pub seed: u64,
}

fn mean_and_se(terms: &[f64]) -> (f64, f64) {
    let n = terms.len() as f64;
    let m = crate::mean(terms);
    let var = terms.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// First-order and total Sobol indices by pick-and-freeze over independent
/// uniform inputs on `ranges`, using `n` base rows (`n (k + 2)` model calls).
///
/// Both orders use Jansen's difference estimators:
/// `S1 = (V - E[(f_B - f_ABi)^2]/2) / V` and `ST = E[(f_A - f_ABi)^2]/2 / V`.
/// The reported standard errors are the Monte Carlo errors of those means.
pub fn sobol_indices<F>(model: F, ranges: &[(f64, f64)], n: usize, seed: u64) -> Result<SobolResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "sample count must be a power of two of at least 256, got {n}"
        )));
    }
    let k = ranges.len();
    if k < 2 {
        return Err(Error::InvalidArgument("at least two factors are required".into()));
    }
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!("degenerate range for factor {i}: [{lo}, {hi}]")));
        }
    }
    let mut rng = synthetic::rng(seed);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        ranges.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
    };
    let a: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng)).collect();
    let b: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng)).collect();

    let run = |rows: &[Vec<f64>]| -> Result<Vec<f64>> {
        let out: Vec<f64> = rows.par_iter().map(|x| model(x)).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model output".into()));
        }
        Ok(out)
    };
    let fa = run(&a)?;
    let fb = run(&b)?;
    let mut both = fa.clone();
    both.extend(&fb);
    let variance = crate::pop_variance(&both);
    if variance == 0.0 {
        return Err(Error::ZeroVariance);
    }

    let mut indices = Vec::with_capacity(k);
    let mut sum_terms = vec![0.0; n];
    for i in 0..k {
        let ab: Vec<Vec<f64>> = a
            .iter()
            .zip(&b)
            .map(|(ra, rb)| {
                let mut r = ra.clone();
                r[i] = rb[i];
                r
            })
            .collect();
        let fab = run(&ab)?;
        let first: Vec<f64> = (0..n).map(|j| variance - 0.5 * (fb[j] - fab[j]).powi(2)).collect();
        let total: Vec<f64> = (0..n).map(|j| 0.5 * (fa[j] - fab[j]).powi(2)).collect();
        for (s, t) in sum_terms.iter_mut().zip(&first) {
            *s += t;
        }
        let (s1, s1_se) = mean_and_se(&first);
        let (st, st_se) = mean_and_se(&total);
        indices.push(SobolIndex {
            s1: s1 / variance,
            st: st / variance,
            s1_se: s1_se / variance,
            st_se: st_se / variance,
        });
    }
    let (sum, sum_se) = mean_and_se(&sum_terms);
    Ok(SobolResult {
        indices,
        s1_sum: sum / variance,
        s1_sum_se: sum_se / variance,
        variance,
        n,
        seed,
    })
}

/// Default Sobol ranges: `±fraction` around each base value.
pub fn ranges_around(base: &[f64], fraction: f64) -> Vec<(f64, f64)> {
    base.iter()
        .map(|&b| {
            let half = (b * fraction).abs();
            (b - half, b + half)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{Column, Role, TimeSeries};
    use proptest::prelude::*;

    fn table(cols: &[(&str, Vec<f64>)]) -> FeatureTable {
        let n = cols[0].1.len();
        let years: Vec<i64> = (2000..2000 + n as i64).collect();
        let columns = cols
            .iter()
            .enumerate()
            .map(|(i, (name, v))| Column {
                name: name.to_string(),
                role: if i == 0 { Role::Target } else { Role::Indicator },
                series: TimeSeries::new(years.clone(), v.clone()).unwrap(),
            })
            .collect();
        FeatureTable::new(years, columns).unwrap()
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[5.0, 1.0, 3.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap().unwrap();
        assert!((r - 4.5 / 22.5f64.sqrt()).abs() < 1e-12);
        assert!((r - 0.948683).abs() < 1e-6);
        let up = [1.0, 2.0, 3.0, 4.0, 5.0];
        let down = [9.0, 7.0, 5.0, 3.0, 1.0];
        assert_eq!(spearman(&up, &down).unwrap(), Some(-1.0));
        assert_eq!(spearman(&up, &up).unwrap(), Some(1.0));
        assert_eq!(spearman(&up, &[2.0; 5]).unwrap(), None);
        assert!(spearman(&up[..2], &up[..2]).is_err());
        assert!(spearman(&up, &up[..4]).is_err());
    }

    #[test]
    fn spearman_matches_rank_pearson_oracle() {
        // hand ranks of x=[10,20,20,30,50], y=[3,1,4,1,5] are [1,2.5,2.5,4,5] and [3,1.5,4,1.5,5]
        let rx = [1.0, 2.5, 2.5, 4.0, 5.0];
        let ry = [3.0, 1.5, 4.0, 1.5, 5.0];
        let dx: Vec<f64> = rx.iter().map(|r| r - 3.0).collect();
        let dy: Vec<f64> = ry.iter().map(|r| r - 3.0).collect();
        let num: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
        let den = (dx.iter().map(|a| a * a).sum::<f64>() * dy.iter().map(|b| b * b).sum::<f64>()).sqrt();
        let r = spearman(&[10.0, 20.0, 20.0, 30.0, 50.0], &[3.0, 1.0, 4.0, 1.0, 5.0]).unwrap().unwrap();
        assert!((r - num / den).abs() < 1e-12);
    }

    #[test]
    fn matrix_marks_constant_columns() {
        let t = table(&[
            ("y", vec![1.0, 2.0, 3.0, 4.0]),
            ("a", vec![4.0, 3.0, 2.0, 1.0]),
            ("flat", vec![7.0; 4]),
        ]);
        let m = spearman_matrix(&t).unwrap();
        assert_eq!(m.get("y", "a"), Some(-1.0));
        assert_eq!(m.get("y", "flat"), None);
        assert_eq!(m.get("flat", "flat"), None);
        assert_eq!(m.constant_columns(), vec!["flat"]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "variable,y,a,flat\ny,1.000000,-1.000000,\na,-1.000000,1.000000,\nflat,,,\n"
        );
        assert!(spearman_matrix(&t.head(2)).is_err());
    }

    #[test]
    fn metrics_examples() {
        let m = evaluate(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(m.r2.abs() < 1e-12);
        let p = evaluate(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap();
        assert_eq!((p.mae, p.rmse, p.r2), (0.0, 0.0, 1.0));
        assert!(matches!(evaluate(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(2, 1))));
        assert!(matches!(evaluate(&[3.0, 3.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(evaluate(&[1.0], &[1.0]).is_err());
        assert_eq!(mae(&[3.0, 3.0], &[1.0, 2.0]).unwrap(), 1.5);
    }

    #[test]
    fn sensitivity_examples() {
        // output rises 3% for a 5% input rise
        let contrived = |x: &[f64]| 200.0 * (1.0 + 0.6 * (x[0] / 50.0 - 1.0));
        let one = single_factor_sensitivity(contrived, &[50.0], 0, 0.05, Sidedness::OneSided).unwrap();
        assert!((one - 0.6).abs() < 1e-9);
        let two = single_factor_sensitivity(contrived, &[50.0], 0, 0.05, Sidedness::TwoSided).unwrap();
        assert!((two - 0.6).abs() < 1e-9);
        let ignores = |x: &[f64]| 3.0 + x[1];
        assert_eq!(single_factor_sensitivity(ignores, &[2.0, 1.0], 0, 0.05, Sidedness::TwoSided).unwrap(), 0.0);
        for c in [-3.0, 0.5, 7.0] {
            let s = single_factor_sensitivity(|x: &[f64]| c * x[0], &[4.0], 0, 0.05, Sidedness::TwoSided).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sensitivity_power_law_limit() {
        for k in [1, 2] {
            for x in [0.3, 1.0, 17.0] {
                for sided in [Sidedness::OneSided, Sidedness::TwoSided] {
                    let s = single_factor_sensitivity(|v: &[f64]| v[0].powi(k), &[x], 0, 1e-4, sided).unwrap();
                    assert!((s - k as f64).abs() < 1e-2, "k={k} x={x}: {s}");
                }
            }
        }
    }

    #[test]
    fn sensitivity_errors() {
        let f = |x: &[f64]| x[0];
        assert!(single_factor_sensitivity(f, &[0.0], 0, 0.05, Sidedness::TwoSided).is_err());
        assert!(single_factor_sensitivity(|x: &[f64]| x[0] - 1.0, &[1.0], 0, 0.05, Sidedness::TwoSided).is_err());
        assert!(single_factor_sensitivity(|x: &[f64]| x[0].ln(), &[1.0], 0, 2.0, Sidedness::TwoSided).is_err());
        assert!(single_factor_sensitivity(f, &[1.0], 1, 0.05, Sidedness::TwoSided).is_err());
        assert!(single_factor_sensitivity(f, &[1.0], 0, 0.0, Sidedness::TwoSided).is_err());
    }

    #[test]
    fn sobol_additive_model() {
        let r = sobol_indices(|x: &[f64]| x[0] + x[1], &[(0.0, 1.0), (0.0, 1.0)], 1 << 14, 7).unwrap();
        for idx in &r.indices {
            assert!((idx.s1 - 0.5).abs() < 0.05, "{idx:?}");
            assert!(idx.st >= idx.s1 - 0.02, "{idx:?}");
            assert!((idx.st - 0.5).abs() < 0.05);
        }
        assert!((0.9..=1.1).contains(&r.s1_sum));
        assert!(r.s1_sum <= 1.0 + 3.0 * r.s1_sum_se);
    }

    #[test]
    fn sobol_dummy_factor() {
        let r = sobol_indices(|x: &[f64]| x[0], &[(0.0, 1.0), (5.0, 6.0)], 1 << 12, 3).unwrap();
        assert!((r.indices[0].s1 - 1.0).abs() < 0.05);
        assert!(r.indices[1].s1.abs() < 3.0 * r.indices[1].s1_se, "{:?}", r.indices[1]);
        assert!(r.indices[1].st.abs() < 1e-12);
    }

    #[test]
    fn sobol_interaction_separates_total_from_first_order() {
        // Ishigami-style product term: x3 acts only through interaction
        let f = |x: &[f64]| x[0] + x[0] * x[2] * 4.0 + x[1];
        let r = sobol_indices(f, &[(-1.0, 1.0); 3], 1 << 13, 11).unwrap();
        let x3 = r.indices[2];
        assert!(x3.s1.abs() < 3.0 * x3.s1_se + 0.02, "{x3:?}");
        assert!(x3.st > 0.3, "{x3:?}");
        for idx in &r.indices {
            assert!(idx.st >= idx.s1 - 3.0 * (idx.st_se + idx.s1_se), "{idx:?}");
        }
    }

    #[test]
    fn sobol_preconditions_and_determinism() {
        let f = |x: &[f64]| x[0] * x[1];
        let ranges = [(1.0, 2.0), (1.0, 3.0)];
        assert!(sobol_indices(f, &ranges, 128, 0).is_err());
        assert!(sobol_indices(f, &ranges, 300, 0).is_err());
        assert!(sobol_indices(f, &ranges[..1], 256, 0).is_err());
        assert!(sobol_indices(f, &[(1.0, 1.0), (1.0, 3.0)], 256, 0).is_err());
        assert!(sobol_indices(|_: &[f64]| f64::NAN, &ranges, 256, 0).is_err());
        assert!(matches!(sobol_indices(|_: &[f64]| 2.0, &ranges, 256, 0), Err(Error::ZeroVariance)));
        assert_eq!(sobol_indices(f, &ranges, 512, 5).unwrap(), sobol_indices(f, &ranges, 512, 5).unwrap());
        assert_ne!(sobol_indices(f, &ranges, 512, 5).unwrap(), sobol_indices(f, &ranges, 512, 6).unwrap());
    }

    #[test]
    fn default_ranges() {
        assert_eq!(ranges_around(&[10.0, -20.0], 0.1), vec![(9.0, 11.0), (-22.0, -18.0)]);
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40)) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(a.iter().any(|&v| v != a[0]));
            let m = evaluate(&a, &p).unwrap();
            prop_assert!(m.rmse >= m.mae * (1.0 - 1e-12));
            prop_assert!(m.r2 <= 1.0);
        }

        #[test]
        fn r2_shift_invariant(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..30), c in -1e3f64..1e3) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(crate::pop_variance(&a) > 1e-3);
            let base = evaluate(&a, &p).unwrap();
            let a2: Vec<f64> = a.iter().map(|v| v + c).collect();
            let p2: Vec<f64> = p.iter().map(|v| v + c).collect();
            let shifted = evaluate(&a2, &p2).unwrap();
            prop_assert!((base.r2 - shifted.r2).abs() < 1e-6 * (1.0 + base.r2.abs()));
        }

        #[test]
        fn spearman_matrix_properties(
            rows in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 3..25),
        ) {
            let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let c: Vec<f64> = rows.iter().map(|r| r.2).collect();
            prop_assume!([&a, &b, &c].iter().all(|v| v.iter().any(|&x| x != v[0])));
            let m = spearman_matrix(&table(&[("a", a.clone()), ("b", b.clone()), ("c", c.clone())])).unwrap();
            for i in 0..3 {
                prop_assert_eq!(m.values[i][i], Some(1.0));
                for j in 0..3 {
                    prop_assert_eq!(m.values[i][j], m.values[j][i]);
                    if let Some(v) = m.values[i][j] {
                        prop_assert!((-1.0..=1.0).contains(&v));
                    }
                }
            }
            // strictly monotone transform of one column leaves every rank intact
            let a2: Vec<f64> = a.iter().map(|x| (x / 10.0).exp() * 3.0 - 1.0).collect();
            let m2 = spearman_matrix(&table(&[("a", a2), ("b", b), ("c", c)])).unwrap();
            prop_assert_eq!(m.values, m2.values);
        }
    }
}

