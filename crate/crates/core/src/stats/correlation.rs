use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::Moments;
use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrMethod {
    Pearson,
    /// Pearson correlation of average ranks.
    Spearman,
    /// Kendall's tau-b (tie corrected).
    Kendall,
}

impl CorrMethod {
    pub const ALL: [CorrMethod; 3] = [CorrMethod::Pearson, CorrMethod::Spearman, CorrMethod::Kendall];

    pub fn as_str(self) -> &'static str {
        match self {
            CorrMethod::Pearson => "pearson",
            CorrMethod::Spearman => "spearman",
            CorrMethod::Kendall => "kendall",
        }
    }
}

impl fmt::Display for CorrMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(CorrMethod::Pearson),
            "spearman" => Ok(CorrMethod::Spearman),
            "kendall" => Ok(CorrMethod::Kendall),
            other => Err(Error::InvalidParameter(format!("unknown correlation method {other:?}"))),
        }
    }
}

/// Pairwise correlations with two-sided p-values under independence.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub method: CorrMethod,
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
    pub pvalues: DMatrix<f64>,
    pub n: usize,
}

/// Average ranks (1-based); ties share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson_columns(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        col /= norm;
    }
    let mut c = centered.transpose() * centered;
    for i in 0..c.nrows() {
        c[(i, i)] = 1.0;
    }
    for i in 0..c.nrows() {
        for j in 0..i {
            let v = (0.5 * (c[(i, j)] + c[(j, i)])).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Tau-b together with the quantities its normal approximation needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallTau {
    pub tau_b: f64,
    /// Concordant minus discordant pairs.
    pub s: f64,
    /// Null variance of `s` with tie corrections.
    pub var_s: f64,
}

struct TieSums {
    pairs: f64,
    v: f64,
    t1: f64,
    t2: f64,
}

fn tie_sums(sorted: &[f64]) -> TieSums {
    let mut out = TieSums { pairs: 0.0, v: 0.0, t1: 0.0, t2: 0.0 };
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        if t > 1.0 {
            out.pairs += t * (t - 1.0) / 2.0;
            out.v += t * (t - 1.0) * (2.0 * t + 5.0);
            out.t1 += t * (t - 1.0);
            out.t2 += t * (t - 1.0) * (t - 2.0);
        }
        i = j;
    }
    out
}

/// Counts inversions while merge sorting `v` in place.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b by Knight's O(n log n) algorithm.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> KendallTau {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let x_ties = tie_sums(&xs);
    let mut joint = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[j] == xs[i] && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        joint += t * (t - 1.0) / 2.0;
        i = j;
    }
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf) as f64;
    let y_ties = tie_sums(&ys);

    let nf = n as f64;
    let n0 = nf * (nf - 1.0) / 2.0;
    let s = n0 - x_ties.pairs - y_ties.pairs + joint - 2.0 * swaps;
    let denom = ((n0 - x_ties.pairs) * (n0 - y_ties.pairs)).sqrt();
    let tau_b = if denom > 0.0 { (s / denom).clamp(-1.0, 1.0) } else { 0.0 };

    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let mut var_s = (v0 - x_ties.v - y_ties.v) / 18.0;
    if n > 1 {
        var_s += x_ties.t1 * y_ties.t1 / (2.0 * nf * (nf - 1.0));
    }
    if n > 2 {
        var_s += x_ties.t2 * y_ties.t2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    }
    KendallTau { tau_b, s, var_s }
}

/// Correlation matrix of the columns of `data` (rows are observations).
/// Columns must be nonconstant.
pub fn correlation_of_columns(data: &DMatrix<f64>, method: CorrMethod) -> DMatrix<f64> {
    match method {
        CorrMethod::Pearson => pearson_columns(data),
        CorrMethod::Spearman => {
            let mut ranked = data.clone();
            for mut col in ranked.column_iter_mut() {
                let r = average_ranks(col.as_slice());
                col.copy_from_slice(&r);
            }
            pearson_columns(&ranked)
        }
        CorrMethod::Kendall => {
            let m = data.ncols();
            let mut c = DMatrix::identity(m, m);
            for i in 0..m {
                for j in 0..i {
                    let t = kendall_tau(data.column(i).as_slice(), data.column(j).as_slice()).tau_b;
                    c[(i, j)] = t;
                    c[(j, i)] = t;
                }
            }
            c
        }
    }
}

fn t_test_p(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = n as f64 - 2.0;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn normal_p(z: f64) -> f64 {
    let dist = Normal::standard();
    (2.0 * dist.sf(z.abs())).min(1.0)
}

/// Pairwise correlation matrix with p-values.
///
/// Pearson and Spearman p-values use `t = r·sqrt((n−2)/(1−r²))` with `n − 2`
/// degrees of freedom; Kendall uses the tie-corrected normal approximation.
pub fn correlation_matrix(returns: &ReturnPanel, method: CorrMethod) -> Result<CorrelationMatrix> {
    let k = returns.n_series();
    let n = returns.n_obs();
    if k < 2 {
        return Err(Error::InvalidParameter("correlation matrix needs at least two series".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientData { required: 3, actual: n });
    }
    for (j, label) in returns.labels().iter().enumerate() {
        if Moments::from_slice(returns.returns().column(j).as_slice()).is_constant() {
            return Err(Error::ConstantSeries(label.clone()));
        }
    }
    let data = returns.returns();
    let (values, pvalues) = match method {
        CorrMethod::Pearson | CorrMethod::Spearman => {
            let values = correlation_of_columns(data, method);
            let pvalues = DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { t_test_p(values[(i, j)], n) });
            (values, pvalues)
        }
        CorrMethod::Kendall => {
            let mut values = DMatrix::identity(k, k);
            let mut pvalues = DMatrix::zeros(k, k);
            for i in 0..k {
                for j in 0..i {
                    let kt = kendall_tau(data.column(i).as_slice(), data.column(j).as_slice());
                    let p = if kt.var_s > 0.0 { normal_p(kt.s / kt.var_s.sqrt()) } else { 1.0 };
                    values[(i, j)] = kt.tau_b;
                    values[(j, i)] = kt.tau_b;
                    pvalues[(i, j)] = p;
                    pvalues[(j, i)] = p;
                }
            }
            (values, pvalues)
        }
    };
    Ok(CorrelationMatrix { method, labels: returns.labels().to_vec(), values, pvalues, n })
}

/// Blanks every coefficient whose p-value exceeds `level`.
pub fn significance_mask(corr: &CorrelationMatrix, level: f64) -> Result<DMatrix<Option<f64>>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("significance level {level} outside (0, 1)")));
    }
    Ok(DMatrix::from_fn(corr.values.nrows(), corr.values.ncols(), |i, j| {
        (corr.pvalues[(i, j)] <= level).then_some(corr.values[(i, j)])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in i + 1..n {
                let dx = (x[i] - x[j]).signum() * ((x[i] != x[j]) as i32 as f64);
                let dy = (y[i] - y[j]).signum() * ((y[i] != y[j]) as i32 as f64);
                match (dx == 0.0, dy == 0.0) {
                    (true, true) => {}
                    (true, false) => tx += 1.0,
                    (false, true) => ty += 1.0,
                    _ if dx * dy > 0.0 => c += 1.0,
                    _ => d += 1.0,
                }
            }
        }
        (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
    }

    #[test]
    fn kendall_matches_pair_counting() {
        let x = [1.0, 4.0, 2.0, 6.0, 3.0, 5.0];
        let y = [2.0, 3.0, 1.0, 6.0, 5.0, 4.0];
        // Sorted by x, y reads 2 1 5 3 4 6: 3 inversions, 12 concordant pairs.
        let kt = kendall_tau(&x, &y);
        assert!((kt.tau_b - 0.6).abs() < 1e-15);
        assert!((kt.tau_b - brute_tau_b(&x, &y)).abs() < 1e-15);

        let x = [1.0, 1.0, 2.0, 3.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 1.0, 4.0, 4.0, 3.0, 3.0];
        assert!((kendall_tau(&x, &y).tau_b - brute_tau_b(&x, &y)).abs() < 1e-14);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn identity_and_reversal() {
        let x: Vec<f64> = (0..30).map(|i| ((i * 17) % 31) as f64 + 0.5 * i as f64).collect();
        let rev: Vec<f64> = x.iter().map(|v| -v.powi(3)).collect();
        let data = DMatrix::from_fn(30, 3, |i, j| match j {
            0 | 1 => x[i],
            _ => rev[i],
        });
        for m in CorrMethod::ALL {
            let c = correlation_of_columns(&data, m);
            assert!((c[(0, 1)] - 1.0).abs() < 1e-12, "{m}");
        }
        let s = correlation_of_columns(&data, CorrMethod::Spearman);
        assert!((s[(0, 2)] + 1.0).abs() < 1e-12);
        let k = correlation_of_columns(&data, CorrMethod::Kendall);
        assert!((k[(0, 2)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mask_rules() {
        let corr = CorrelationMatrix {
            method: CorrMethod::Pearson,
            labels: vec!["a".into(), "b".into()],
            values: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            pvalues: DMatrix::from_row_slice(2, 2, &[0.0, t_test_p(0.0, 50), t_test_p(0.0, 50), 0.0]),
            n: 50,
        };
        let m = significance_mask(&corr, 0.99).unwrap();
        assert_eq!(m[(0, 1)], None);
        assert_eq!(m[(0, 0)], Some(1.0));
        assert!(significance_mask(&corr, 1.0).is_err());
        // n = 700, r = 0.74 is overwhelmingly significant.
        assert!(t_test_p(0.74, 700) < 1e-10);
    }
}
