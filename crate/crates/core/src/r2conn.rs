//! R²-decomposition connectedness.
//!
//! Equation `k` regresses series `k` at time `t` on the other `K − 1` series
//! at `t` and on all `K` series at lags `1..p`. Its R² is split into
//! nonnegative per-predictor shares with the relative-weights method, which
//! only needs a correlation matrix, so Pearson, Spearman and Kendall
//! correlations can all drive it.
//!
//! Given predictor correlations `R_xx = V·Λ·V'` and predictor-response
//! correlations `r_xy`:
//!
//! ```text
//! Δ  = V·Λ^{1/2}·V'
//! β* = Δ^{-1}·r_xy
//! ε_j = Σ_m Δ[j,m]²·β*_m²         Σ_j ε_j = r_xy'·R_xx^{-1}·r_xy
//! ```
//!
//! Contemporaneous shares of series `i` fill `C[k, i]`; lagged shares of
//! series `i` summed over lags fill `L[k, i]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::estimators::nearest_psd_with_distance;
use crate::panel::ReturnPanel;
use crate::stats::{correlation_of_columns, CorrMethod, Moments};
use crate::table::ConnectednessTable;

/// Off-diagonal predictor correlation treated as exact collinearity.
const COLLINEAR_TOLERANCE: f64 = 1e-12;
/// Smallest admissible eigenvalue ratio of the predictor correlation matrix.
const CONDITION_FLOOR: f64 = 1e-12;

/// Where each predictor column of equation `k` comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSpec {
    pub k: usize,
    /// The `K − 1` other series at time `t`.
    pub contemporaneous: Vec<usize>,
    /// `(series, lag)` for every series at lags `1..=p`, lag-major.
    pub lagged: Vec<(usize, usize)>,
    pub p: usize,
}

impl DesignSpec {
    pub fn new(n_series: usize, k: usize, p: usize) -> Self {
        DesignSpec {
            k,
            contemporaneous: (0..n_series).filter(|&j| j != k).collect(),
            lagged: (1..=p).flat_map(|lag| (0..n_series).map(move |j| (j, lag))).collect(),
            p,
        }
    }

    pub fn n_predictors(&self) -> usize {
        self.contemporaneous.len() + self.lagged.len()
    }

    /// Source series of predictor column `c`.
    pub fn source(&self, c: usize) -> usize {
        let nc = self.contemporaneous.len();
        if c < nc {
            self.contemporaneous[c]
        } else {
            self.lagged[c - nc].0
        }
    }

    pub fn is_contemporaneous(&self, c: usize) -> bool {
        c < self.contemporaneous.len()
    }

    fn column_name(&self, labels: &[String], c: usize) -> String {
        let nc = self.contemporaneous.len();
        if c < nc {
            format!("{}(t)", labels[self.contemporaneous[c]])
        } else {
            let (j, lag) = self.lagged[c - nc];
            format!("{}(t-{lag})", labels[j])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// Standardized predictors, one row per time `t = p+1..T`.
    pub x: DMatrix<f64>,
    /// Standardized response.
    pub y: DVector<f64>,
    pub spec: DesignSpec,
    /// Column names such as `"USs(t-1)"`.
    pub names: Vec<String>,
}

fn check_dimensions(t: usize, k: usize, p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidParameter("lag order must be ≥ 1".into()));
    }
    let m = (k - 1) + k * p;
    if t <= p || t - p <= m {
        return Err(Error::InsufficientData { required: m + p + 1, actual: t });
    }
    Ok(())
}

fn standardize(col: &mut [f64], name: &str) -> Result<()> {
    let m = Moments::from_slice(col);
    if m.is_constant() {
        return Err(Error::ConstantSeries(name.to_string()));
    }
    let sd = m.sd();
    for v in col.iter_mut() {
        *v = (*v - m.mean) / sd;
    }
    Ok(())
}

/// Design for equation `k` with every column standardized over the
/// estimation sample.
pub fn build_design(returns: &ReturnPanel, k: usize, p: usize) -> Result<Design> {
    let y_all = returns.returns();
    let (t, nk) = y_all.shape();
    if k >= nk {
        return Err(Error::InvalidParameter(format!("equation {k} out of range for {nk} series")));
    }
    check_dimensions(t, nk, p)?;
    let spec = DesignSpec::new(nk, k, p);
    let n = t - p;
    let m = spec.n_predictors();
    let labels = returns.labels();
    let names: Vec<String> = (0..m).map(|c| spec.column_name(labels, c)).collect();
    let mut x = DMatrix::zeros(n, m);
    for c in 0..m {
        let (j, lag) = if spec.is_contemporaneous(c) {
            (spec.contemporaneous[c], 0)
        } else {
            spec.lagged[c - spec.contemporaneous.len()]
        };
        for r in 0..n {
            x[(r, c)] = y_all[(p + r - lag, j)];
        }
        let mut col = x.column_mut(c);
        standardize(col.as_mut_slice(), &names[c])?;
    }
    let mut y = DVector::from_fn(n, |r, _| y_all[(p + r, k)]);
    standardize(y.as_mut_slice(), &format!("{}(t)", labels[k]))?;
    Ok(Design { x, y, spec, names })
}

/// Per-predictor R² shares of one regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeWeights {
    pub weights: DVector<f64>,
    /// `r_xy'·R_xx^{-1}·r_xy`; equals `Σ weights`.
    pub r_squared: f64,
    /// Frobenius distance moved by PSD repair (zero for Pearson).
    pub repair_distance: f64,
}

/// Relative weights from a joint correlation matrix whose last row/column is
/// the response. `names` label the predictors for diagnostics.
fn relative_weights(joint: &DMatrix<f64>, method: CorrMethod, names: &[String]) -> Result<RelativeWeights> {
    let m = joint.nrows() - 1;
    let (joint, repair_distance) = if method == CorrMethod::Pearson {
        (joint.clone(), 0.0)
    } else {
        // Repairing the joint matrix keeps the implied R² within [0, 1].
        let (fixed, d) = nearest_psd_with_distance(joint);
        if d > 0.0 {
            log::debug!("{method} correlation repaired by {d:.3e}");
        }
        (fixed, d)
    };
    let rxx = joint.view((0, 0), (m, m)).into_owned();
    let rxy = joint.view((0, m), (m, 1)).column(0).into_owned();

    for i in 0..m {
        for j in 0..i {
            if rxx[(i, j)].abs() >= 1.0 - COLLINEAR_TOLERANCE {
                return Err(Error::Collinear { first: names[j].clone(), second: names[i].clone() });
            }
        }
    }

    let eig = SymmetricEigen::new(rxx);
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmax > 0.0) || lmin < CONDITION_FLOOR * lmax {
        return Err(Error::Singular(format!("predictor correlation eigenvalue ratio {:.3e}", lmin / lmax)));
    }
    let v = &eig.eigenvectors;
    let root = eig.eigenvalues.map(f64::sqrt);
    let delta = v * DMatrix::from_diagonal(&root) * v.transpose();
    let inv_root = v * DMatrix::from_diagonal(&root.map(|r| 1.0 / r)) * v.transpose();
    let beta = inv_root * rxy;
    let beta2 = beta.map(|b| b * b);
    let weights = delta.map(|d| d * d) * beta2;
    let r_squared = weights.sum();
    Ok(RelativeWeights { weights, r_squared, repair_distance })
}

/// Relative-weights decomposition of the R² of `y` on `x` under `method`.
pub fn decompose_r2(x: &DMatrix<f64>, y: &DVector<f64>, method: CorrMethod) -> Result<RelativeWeights> {
    let (n, m) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("design has {n} rows but response has {}", y.len())));
    }
    if m == 0 {
        return Err(Error::DimensionMismatch("design has no predictors".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientData { required: 3, actual: n });
    }
    let mut names: Vec<String> = (0..m).map(|c| format!("x{c}")).collect();
    for (c, name) in names.iter().enumerate() {
        if Moments::from_slice(x.column(c).as_slice()).is_constant() {
            return Err(Error::ConstantSeries(name.clone()));
        }
    }
    if Moments::from_slice(y.as_slice()).is_constant() {
        return Err(Error::ConstantSeries("y".into()));
    }
    let mut data = x.clone().insert_column(m, 0.0);
    data.set_column(m, y);
    names.push("y".into());
    let joint = correlation_of_columns(&data, method);
    relative_weights(&joint, method, &names)
}

/// Full connectedness table in percent.
///
/// One correlation matrix over the `K(p+1)` columns `[y_t, y_{t−1}, …]` is
/// computed and each equation reads its submatrix; this is equivalent to
/// running [`build_design`] and [`decompose_r2`] per equation because
/// correlations are unaffected by standardization.
pub fn connectedness_table(returns: &ReturnPanel, p: usize, method: CorrMethod) -> Result<ConnectednessTable> {
    let y = returns.returns();
    let (t, k) = y.shape();
    if k == 0 {
        return Err(Error::InvalidParameter("panel has no series".into()));
    }
    check_dimensions(t, k, p)?;
    let labels = returns.labels();
    let n = t - p;
    let width = k * (p + 1);
    let mut stacked = DMatrix::zeros(n, width);
    for lag in 0..=p {
        for j in 0..k {
            let c = lag * k + j;
            for r in 0..n {
                stacked[(r, c)] = y[(p + r - lag, j)];
            }
            if Moments::from_slice(stacked.column(c).as_slice()).is_constant() {
                let name = if lag == 0 { format!("{}(t)", labels[j]) } else { format!("{}(t-{lag})", labels[j]) };
                return Err(Error::ConstantSeries(name));
            }
        }
    }
    let corr = correlation_of_columns(&stacked, method);

    let mut c_mat = DMatrix::zeros(k, k);
    let mut l_mat = DMatrix::zeros(k, k);
    for eq in 0..k {
        let spec = DesignSpec::new(k, eq, p);
        let mut idx: Vec<usize> = spec.contemporaneous.clone();
        idx.extend(spec.lagged.iter().map(|&(j, lag)| lag * k + j));
        idx.push(eq);
        let joint = corr.select_rows(idx.iter()).select_columns(idx.iter());
        let names: Vec<String> = (0..spec.n_predictors()).map(|c| spec.column_name(labels, c)).collect();
        let rw = relative_weights(&joint, method, &names).map_err(|e| e.in_equation(eq, &labels[eq]))?;
        for (c, w) in rw.weights.iter().enumerate() {
            let src = spec.source(c);
            if spec.is_contemporaneous(c) {
                c_mat[(eq, src)] += 100.0 * w;
            } else {
                l_mat[(eq, src)] += 100.0 * w;
            }
        }
    }
    ConnectednessTable::from_split(labels.to_vec(), c_mat, l_mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ols_fit;

    fn panel(t: usize, k: usize) -> ReturnPanel {
        // Deterministic, mildly dependent, nonconstant series.
        let m = DMatrix::from_fn(t, k, |i, j| {
            let x = (i * 37 + j * 101) as f64;
            (x * 0.7).sin() + 0.3 * (x * 1.3 + j as f64).cos() + 0.01 * ((i * i + j) % 17) as f64
        });
        ReturnPanel::from_matrix(m, (0..k).map(|j| format!("s{j}")).collect()).unwrap()
    }

    #[test]
    fn design_dimensions() {
        let d = build_design(&panel(100, 3), 0, 1).unwrap();
        assert_eq!(d.x.shape(), (99, 5));
        let d = build_design(&panel(100, 2), 1, 2).unwrap();
        assert_eq!(d.x.ncols(), 5);
        assert_eq!(d.names[0], "s0(t)");
        assert_eq!(d.names[1], "s0(t-1)");
    }

    #[test]
    fn single_predictor_gets_r_squared() {
        let x = DMatrix::from_fn(50, 1, |i, _| (i as f64 * 0.3).sin());
        let y = DVector::from_fn(50, |i, _| (i as f64 * 0.3).sin() + 0.5 * (i as f64 * 2.1).cos());
        let rw = decompose_r2(&x, &y, CorrMethod::Pearson).unwrap();
        let fit = ols_fit(&x, &y, true).unwrap();
        assert!((rw.weights[0] - fit.r_squared).abs() < 1e-10);
    }

    #[test]
    fn pearson_total_matches_ols() {
        let d = build_design(&panel(200, 3), 1, 2).unwrap();
        let rw = decompose_r2(&d.x, &d.y, CorrMethod::Pearson).unwrap();
        let fit = ols_fit(&d.x, &d.y, true).unwrap();
        assert!((rw.r_squared - fit.r_squared).abs() < 1e-8);
        assert!(rw.weights.iter().all(|&w| w >= -1e-10));
    }

    #[test]
    fn table_matches_per_equation_route() {
        let r = panel(150, 3);
        for method in CorrMethod::ALL {
            let table = connectedness_table(&r, 1, method).unwrap();
            for k in 0..3 {
                let d = build_design(&r, k, 1).unwrap();
                let rw = decompose_r2(&d.x, &d.y, method).unwrap();
                let row: f64 = table.total().row(k).sum();
                assert!((row - 100.0 * rw.r_squared).abs() < 1e-8, "{method} row {k}");
            }
        }
    }

    #[test]
    fn collinear_pair_is_named() {
        let mut m = DMatrix::from_fn(60, 3, |i, j| ((i * 13 + j * 7) as f64 * 0.37).sin());
        let col = m.column(0).into_owned();
        m.set_column(2, &(col * 2.0));
        let r = ReturnPanel::from_matrix(m, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        match connectedness_table(&r, 1, CorrMethod::Pearson) {
            Err(Error::Equation { index, source, .. }) => {
                // a(t-1) and c(t-1) already collide in the first equation.
                assert_eq!(index, 0);
                assert!(matches!(*source, Error::Collinear { .. }), "{source}");
            }
            other => panic!("expected a collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn constant_column_rejected() {
        let mut m = DMatrix::from_fn(40, 2, |i, j| ((i * 3 + j) as f64).sin());
        m.column_mut(1).fill(0.0);
        let r = ReturnPanel::from_matrix(m, vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(connectedness_table(&r, 1, CorrMethod::Pearson), Err(Error::ConstantSeries(_))));
    }
}
