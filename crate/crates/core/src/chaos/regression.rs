use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{FitDiagnostics, PceModel};
use super::DesignMatrix;
use crate::error::{Error, Result};

/// How many terms a sparse fit keeps. Counts include the constant term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparseTarget {
    Fixed(usize),
    /// Path prefix with the smallest corrected leave-one-out error.
    Auto,
}

/// Least squares on a full-column-rank matrix via Householder QR.
struct LeastSquares {
    coefficients: DVector<f64>,
    residual: DVector<f64>,
    /// Diagonal of the hat matrix.
    leverage: DVector<f64>,
    /// `tr((AᵀA)⁻¹)`.
    trace_inverse_gram: f64,
}

fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |m, s| m.max(*s));
    let tol = top * 1e-10 * a.nrows().max(a.ncols()) as f64;
    sv.iter().filter(|s| **s > tol).count()
}

fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let cols = a.ncols();
    let rank = numerical_rank(a);
    if rank < cols || a.nrows() < cols {
        return Err(Error::RankDeficient { rank, columns: cols });
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * y;
    let coefficients = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient { rank, columns: cols })?;
    let residual = y - a * &coefficients;
    let leverage = DVector::from_iterator(q.nrows(), q.row_iter().map(|row| row.norm_squared()));
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or(Error::RankDeficient { rank, columns: cols })?;
    Ok(LeastSquares {
        coefficients,
        residual,
        leverage,
        trace_inverse_gram: r_inv.norm_squared(),
    })
}

/// Least-squares fit on every basis column.
pub fn fit_full(design: &DesignMatrix, y: &[f64]) -> Result<PceModel> {
    check_rows(design, y)?;
    let yv = DVector::from_column_slice(y);
    let ls = least_squares(&design.matrix, &yv)?;
    let all: Vec<usize> = (0..design.basis.len()).collect();
    Ok(PceModel::from_selection(
        design,
        &all,
        ls.coefficients.as_slice(),
        FitDiagnostics {
            method: "full".into(),
            rows: design.rows(),
            selected_terms: all.len(),
            residual_norm: ls.residual.norm(),
            loo_error: None,
        },
    ))
}

/// Linear coefficients per input from a least-squares fit of the constant
/// and all univariate terms, as identified by an axial design.
pub fn main_effects(design: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_rows(design, y)?;
    let cols: Vec<usize> = (0..design.basis.len())
        .filter(|&k| design.basis[k].0.iter().filter(|e| **e > 0).count() <= 1)
        .collect();
    let ls = ols_on(design, &cols, &DVector::from_column_slice(y))?;
    let mut effects = vec![0.0; design.config.n];
    for (&k, c) in cols.iter().zip(ls.coefficients.iter()) {
        let b = &design.basis[k];
        if b.degree() == 1 {
            let d = b.0.iter().position(|e| *e == 1).unwrap();
            effects[d] = *c;
        }
    }
    Ok(effects)
}

fn check_rows(design: &DesignMatrix, y: &[f64]) -> Result<()> {
    if y.len() != design.rows() {
        return Err(Error::Config(format!(
            "{} responses for {} design rows",
            y.len(),
            design.rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("responses must be finite".into()));
    }
    Ok(())
}

/// Order in which least angle regression activates the columns of `x`,
/// after centering the columns and `y` and scaling columns to unit norm.
/// Columns that are constant over the rows never enter. At most
/// `max_terms` columns are returned.
pub fn lars_path(x: &DMatrix<f64>, y: &[f64], max_terms: usize) -> Vec<usize> {
    let (rows, cols) = x.shape();
    if rows < 2 || cols == 0 || max_terms == 0 {
        return Vec::new();
    }
    let mut xs = x.clone();
    let mut usable = vec![false; cols];
    let mut largest: f64 = 0.0;
    let mut norms = vec![0.0; cols];
    for j in 0..cols {
        let mean = xs.column(j).mean();
        xs.column_mut(j).add_scalar_mut(-mean);
        norms[j] = xs.column(j).norm();
        largest = largest.max(norms[j]);
    }
    for j in 0..cols {
        if norms[j] > 1e-10 * largest.max(1e-300) {
            usable[j] = true;
            let n = norms[j];
            xs.column_mut(j).scale_mut(1.0 / n);
        }
    }
    let ybar = y.iter().sum::<f64>() / rows as f64;
    let yc = DVector::from_iterator(rows, y.iter().map(|v| v - ybar));
    let limit = max_terms.min(rows - 1).min(usable.iter().filter(|u| **u).count());

    let mut active: Vec<usize> = Vec::new();
    let mut mu = DVector::zeros(rows);
    let c0 = (xs.transpose() * &yc).amax();
    if !(c0 > 0.0) {
        return active;
    }
    let mut pending: Option<usize> = None;
    loop {
        let c = xs.transpose() * (&yc - &mu);
        if active.is_empty() {
            let j = argmax_abs(&c, &usable, &active);
            match j {
                Some(j) => pending = Some(j),
                None => break,
            }
        }
        if let Some(j) = pending.take() {
            active.push(j);
        }
        let big_c = active.iter().map(|&j| c[j].abs()).fold(0.0, f64::max);
        if big_c <= 1e-12 * c0 {
            break;
        }
        let signs: Vec<f64> = active.iter().map(|&j| c[j].signum()).collect();
        let xa = DMatrix::from_fn(rows, active.len(), |r, k| signs[k] * xs[(r, active[k])]);
        let gram = xa.transpose() * &xa;
        let ones = DVector::from_element(active.len(), 1.0);
        let w0 = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&ones),
            None => {
                // the newest column is collinear with the active set
                let j = active.pop().unwrap();
                usable[j] = false;
                continue;
            }
        };
        let a_norm = 1.0 / ones.dot(&w0).sqrt();
        if !a_norm.is_finite() {
            break;
        }
        let w = &w0 * a_norm;
        let u = &xa * &w;
        let a = xs.transpose() * &u;
        if active.len() >= limit {
            break;
        }
        let mut gamma = big_c / a_norm;
        let mut next = None;
        for j in 0..cols {
            if !usable[j] || active.contains(&j) {
                continue;
            }
            for g in [(big_c - c[j]) / (a_norm - a[j]), (big_c + c[j]) / (a_norm + a[j])] {
                if g.is_finite() && g > 1e-14 && g < gamma {
                    gamma = g;
                    next = Some(j);
                }
            }
        }
        mu += &u * gamma;
        match next {
            Some(j) => pending = Some(j),
            None => break,
        }
    }
    active
}

fn argmax_abs(c: &DVector<f64>, usable: &[bool], active: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in c.iter().enumerate() {
        if !usable[j] || active.contains(&j) {
            continue;
        }
        if best.is_none_or(|(_, b)| v.abs() > b) {
            best = Some((j, v.abs()));
        }
    }
    best.map(|b| b.0)
}

fn ols_on(design: &DesignMatrix, cols: &[usize], y: &DVector<f64>) -> Result<LeastSquares> {
    let a = design.matrix.select_columns(cols);
    least_squares(&a, y)
}

/// Corrected leave-one-out error, relative to the response variance.
fn corrected_loo(ls: &LeastSquares, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let m = ls.coefficients.len() as f64;
    let var = y.variance();
    if !(n > m) || var <= 0.0 {
        return f64::INFINITY;
    }
    let press = ls
        .residual
        .iter()
        .zip(ls.leverage.iter())
        .map(|(r, h)| (r / (1.0 - h)).powi(2))
        .sum::<f64>()
        / n;
    let t = n / (n - m) * (1.0 + ls.trace_inverse_gram);
    press / var * t
}

/// Fits the constant term plus the columns chosen by least angle regression,
/// then re-estimates the chosen coefficients by least squares; all other
/// coefficients are zero.
///
/// With a fixed count the constant term is included in `M_C`. When the
/// path ends before `M_C` terms, the remaining slots go to the lowest-index
/// columns that keep the selection full rank.
pub fn fit_sparse(design: &DesignMatrix, y: &[f64], target: SparseTarget) -> Result<PceModel> {
    check_rows(design, y)?;
    let k = design.basis.len();
    let rows = design.rows();
    if design.basis.first().is_none_or(|b| b.degree() != 0) {
        return Err(Error::Design("first basis column must be the constant term".into()));
    }
    let yv = DVector::from_column_slice(y);
    let x = design.matrix.columns(1, k - 1).into_owned();
    let (selected, loo) = match target {
        SparseTarget::Fixed(mc) => {
            if mc == 0 || mc > k {
                return Err(Error::Config(format!("M_C must lie in 1..={k} (got {mc})")));
            }
            if mc > rows {
                return Err(Error::Config(format!("M_C = {mc} exceeds the {rows} design rows")));
            }
            let path: Vec<usize> = lars_path(&x, y, mc - 1).into_iter().map(|j| j + 1).collect();
            let mut sel = vec![0];
            sel.extend(path);
            if sel.len() < mc {
                fill_by_index(design, &mut sel, mc);
            }
            (sel, None)
        }
        SparseTarget::Auto => {
            let path: Vec<usize> = lars_path(&x, y, rows.saturating_sub(2)).into_iter().map(|j| j + 1).collect();
            let mut best = (f64::INFINITY, 1usize);
            for m in 1..=path.len() + 1 {
                let mut cols = vec![0];
                cols.extend_from_slice(&path[..m - 1]);
                cols.sort_unstable();
                if let Ok(ls) = ols_on(design, &cols, &yv) {
                    let e = corrected_loo(&ls, &yv);
                    if e < best.0 {
                        best = (e, m);
                    }
                }
            }
            let mut sel = vec![0];
            sel.extend_from_slice(&path[..best.1 - 1]);
            (sel, best.0.is_finite().then_some(best.0))
        }
    };
    let mut cols = selected;
    cols.sort_unstable();
    let ls = ols_on(design, &cols, &yv)?;
    let loo_error = loo.or_else(|| {
        let e = corrected_loo(&ls, &yv);
        e.is_finite().then_some(e)
    });
    Ok(PceModel::from_selection(
        design,
        &cols,
        ls.coefficients.as_slice(),
        FitDiagnostics {
            method: "sparse".into(),
            rows,
            selected_terms: cols.len(),
            residual_norm: ls.residual.norm(),
            loo_error,
        },
    ))
}

fn fill_by_index(design: &DesignMatrix, sel: &mut Vec<usize>, target: usize) {
    for j in 0..design.basis.len() {
        if sel.len() >= target {
            break;
        }
        if sel.contains(&j) {
            continue;
        }
        let mut trial = sel.clone();
        trial.push(j);
        if numerical_rank(&design.matrix.select_columns(&trial)) == trial.len() {
            *sel = trial;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{multi_indices, PceConfig};

    #[test]
    fn lars_orders_by_correlation() {
        // y = 3·x0 + 0.5·x2 on an orthogonal design
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0]);
        let y: Vec<f64> = (0..4).map(|r| 3.0 * x[(r, 0)] + 0.5 * x[(r, 2)]).collect();
        assert_eq!(lars_path(&x, &y, 3)[..2], [0, 2]);
    }

    #[test]
    fn constant_response() {
        let config = PceConfig::new(2, 2).unwrap();
        let points = crate::chaos::collocation_design(&config, Some(6)).unwrap();
        let design = DesignMatrix::new(config, points).unwrap();
        let m = fit_full(&design, &[5.0; 6]).unwrap();
        assert!((m.coefficient(&multi_indices(2, 2)[0]) - 5.0).abs() < 1e-12);
        assert!(m.terms.iter().skip(1).all(|t| t.coefficient.abs() < 1e-12));
    }
}
