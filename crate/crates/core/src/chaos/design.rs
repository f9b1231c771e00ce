use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{hermite_table, MultiIndex, PceConfig};
use crate::error::{Error, Result};

/// Roots of `He_k`, ascending, from the eigenvalues of its Jacobi matrix.
pub fn hermite_roots(k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let jacobi = DMatrix::from_fn(k, k, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut roots: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .map(|&x| if x.abs() < 1e-12 { 0.0 } else { x })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots
}

/// Candidate collocation points ranked by joint standard-normal density
/// (descending), ties broken lexicographically (ascending).
///
/// Each coordinate is taken from `{0} ∪ roots(He_{p+1})` and at most `p`
/// coordinates of a point are nonzero.
pub fn collocation_candidates(config: &PceConfig) -> Vec<Vec<f64>> {
    let mut coords = hermite_roots(config.p + 1);
    coords.retain(|x| *x != 0.0);
    let nonzero = coords;
    let n = config.n;
    let mut out = vec![vec![0.0; n]];
    // every choice of up to p active dimensions, each with a nonzero value
    fn grow(
        start: usize,
        left: usize,
        point: &mut Vec<f64>,
        values: &[f64],
        out: &mut Vec<Vec<f64>>,
    ) {
        if left == 0 {
            return;
        }
        for d in start..point.len() {
            for &v in values {
                point[d] = v;
                out.push(point.clone());
                grow(d + 1, left - 1, point, values, out);
            }
            point[d] = 0.0;
        }
    }
    grow(0, config.p, &mut vec![0.0; n], &nonzero, &mut out);
    let key = |x: &Vec<f64>| (x.iter().map(|v| v * v).sum::<f64>() * 1e9).round() as i64;
    out.sort_by(|a, b| {
        key(a).cmp(&key(b)).then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    out
}

/// Basis evaluations: one row per point, one column per multi-index.
pub fn design_matrix(basis: &[MultiIndex], points: &[Vec<f64>]) -> DMatrix<f64> {
    let p = basis.iter().map(|m| m.degree() as usize).max().unwrap_or(0);
    let mut a = DMatrix::zeros(points.len(), basis.len());
    for (r, xi) in points.iter().enumerate() {
        let tables: Vec<Vec<f64>> = xi.iter().map(|&x| hermite_table(p, x)).collect();
        for (c, idx) in basis.iter().enumerate() {
            a[(r, c)] = idx
                .0
                .iter()
                .enumerate()
                .filter(|(_, e)| **e > 0)
                .map(|(d, &e)| tables[d][e as usize])
                .product();
        }
    }
    a
}

/// Basis evaluations at the collocation points, with the points kept as
/// row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub config: PceConfig,
    pub basis: Vec<MultiIndex>,
    pub points: Vec<Vec<f64>>,
    pub matrix: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(config: PceConfig, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.iter().any(|p| p.len() != config.n) {
            return Err(Error::Config(format!("design points must have dimension {}", config.n)));
        }
        let basis = config.basis();
        let matrix = design_matrix(&basis, &points);
        Ok(DesignMatrix {
            config,
            basis,
            points,
            matrix,
        })
    }

    pub fn rows(&self) -> usize {
        self.points.len()
    }
}

/// Greedy rank tracking over candidate rows by Gram–Schmidt.
struct RankTracker {
    basis: Vec<DVector<f64>>,
}

impl RankTracker {
    fn new() -> Self {
        RankTracker { basis: Vec::new() }
    }

    /// Accepts `row` if it is not in the span of the accepted rows.
    fn offer(&mut self, row: DVector<f64>) -> bool {
        let scale = row.norm();
        if scale == 0.0 {
            return false;
        }
        let mut r = row;
        for _ in 0..2 {
            for q in &self.basis {
                let d = q.dot(&r);
                r.axpy(-d, q, 1.0);
            }
        }
        let norm = r.norm();
        if norm > 1e-9 * scale {
            self.basis.push(r / norm);
            true
        } else {
            false
        }
    }

    fn rank(&self) -> usize {
        self.basis.len()
    }
}

fn basis_row(basis: &[MultiIndex], point: &[f64]) -> DVector<f64> {
    let m = design_matrix(basis, &[point.to_vec()]);
    DVector::from_iterator(basis.len(), m.iter().copied())
}

/// Full-rank collocation design with `rows` points (default ⌈1.5·K⌉, capped
/// at the candidate pool). Candidates are taken in rank order, skipping any
/// that do not raise the rank until it reaches K; further rows then come
/// from the remaining candidates in rank order.
pub fn collocation_design(config: &PceConfig, rows: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let k = config.basis_size();
    let candidates = collocation_candidates(config);
    let target = rows.unwrap_or((3 * k).div_ceil(2)).min(candidates.len());
    if target < k {
        return Err(Error::Config(format!(
            "a full design needs at least K = {k} rows (requested {target})"
        )));
    }
    let basis = config.basis();
    let mut tracker = RankTracker::new();
    let mut used = vec![false; candidates.len()];
    let mut chosen = Vec::with_capacity(target);
    for (i, c) in candidates.iter().enumerate() {
        if tracker.rank() == k {
            break;
        }
        if tracker.offer(basis_row(&basis, c)) {
            used[i] = true;
            chosen.push(c.clone());
        }
    }
    if tracker.rank() < k {
        return Err(Error::Design(format!(
            "candidate pool reaches rank {} < K = {k}; raise p or enlarge the pool",
            tracker.rank()
        )));
    }
    for (i, c) in candidates.iter().enumerate() {
        if chosen.len() >= target {
            break;
        }
        if !used[i] {
            chosen.push(c.clone());
        }
    }
    Ok(chosen)
}

/// Rank-increasing design of exactly `rows ≤ K` points for sparse fitting.
pub fn sparse_design(config: &PceConfig, rows: usize) -> Result<Vec<Vec<f64>>> {
    let k = config.basis_size();
    if rows == 0 || rows > k {
        return Err(Error::Config(format!("sparse design needs 1 ≤ rows ≤ K = {k} (got {rows})")));
    }
    let basis = config.basis();
    let mut tracker = RankTracker::new();
    let mut chosen = Vec::with_capacity(rows);
    for c in collocation_candidates(config) {
        if chosen.len() == rows {
            break;
        }
        if tracker.offer(basis_row(&basis, &c)) {
            chosen.push(c);
        }
    }
    if chosen.len() < rows {
        return Err(Error::Design(format!(
            "only {} rank-increasing candidates for {rows} rows",
            chosen.len()
        )));
    }
    Ok(chosen)
}

/// Axial candidates (at most one nonzero coordinate) in rank order that
/// raise the design rank. They identify the constant and every univariate
/// term and nothing else.
pub fn axial_design(config: &PceConfig) -> Vec<Vec<f64>> {
    let basis = config.basis();
    let mut tracker = RankTracker::new();
    collocation_candidates(config)
        .into_iter()
        .filter(|c| c.iter().filter(|x| **x != 0.0).count() <= 1)
        .filter(|c| tracker.offer(basis_row(&basis, c)))
        .collect()
}

/// Pair points for the `count` input pairs with the largest `|a_i·a_j|`,
/// where `a` holds the main (linear) effects. Under effect heredity these
/// pairs carry the largest interactions. Each pair gets its best-ranked
/// candidate with exactly those two nonzero coordinates.
pub fn heredity_pairs(config: &PceConfig, effects: &[f64], count: usize) -> Result<Vec<Vec<f64>>> {
    let n = config.n;
    if effects.len() != n {
        return Err(Error::Config(format!("{} main effects for {n} inputs", effects.len())));
    }
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| ((effects[i] * effects[j]).abs(), i, j))
        .collect();
    if count > pairs.len() {
        return Err(Error::Design(format!("only {} input pairs for {count} pair points", pairs.len())));
    }
    // stable: equal scores keep index order
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let candidates = collocation_candidates(config);
    pairs[..count]
        .iter()
        .map(|&(_, i, j)| {
            candidates
                .iter()
                .find(|c| {
                    c[i] != 0.0 && c[j] != 0.0 && c.iter().filter(|x| **x != 0.0).count() == 2
                })
                .cloned()
                .ok_or_else(|| Error::Design(format!("no pair candidate for inputs {} and {}", i + 1, j + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_he3_and_he4() {
        let r = hermite_roots(3);
        assert!((r[0] + 3f64.sqrt()).abs() < 1e-12 && r[1] == 0.0 && (r[2] - 3f64.sqrt()).abs() < 1e-12);
        for x in hermite_roots(4) {
            assert!(super::super::hermite_1d(4, x).abs() < 1e-10);
        }
    }

    #[test]
    fn one_dimensional_ranking() {
        let c = collocation_candidates(&PceConfig::new(1, 2).unwrap());
        assert_eq!(c.len(), 3);
        assert_eq!(c[0], vec![0.0]);
        assert!(c[1][0] < 0.0 && c[2][0] > 0.0);
    }

    #[test]
    fn pool_size_and_full_design_rank() {
        let config = PceConfig::new(12, 2).unwrap();
        assert_eq!(collocation_candidates(&config).len(), 289);
        let exact = collocation_design(&config, Some(91)).unwrap();
        assert_eq!(exact.len(), 91);
        let a = design_matrix(&config.basis(), &exact);
        assert_eq!(a.clone().svd(false, false).rank(1e-9 * a.amax()), 91);
        let default = collocation_design(&config, None).unwrap();
        assert_eq!(default.len(), 137);
        assert_eq!(&default[..91], &exact[..]);
        let sparse = sparse_design(&config, 31).unwrap();
        assert_eq!(&sparse[..], &exact[..31]);
        assert_eq!(&axial_design(&config)[..], &exact[..25]);
    }

    #[test]
    fn pairs_follow_effect_products() {
        let config = PceConfig::new(4, 2).unwrap();
        let pts = heredity_pairs(&config, &[0.1, -2.0, 0.0, 3.0], 2).unwrap();
        let support = |p: &Vec<f64>| -> Vec<usize> { (0..4).filter(|&d| p[d] != 0.0).collect() };
        assert_eq!(support(&pts[0]), vec![1, 3]);
        assert_eq!(support(&pts[1]), vec![0, 3]);
        assert_eq!(axial_design(&PceConfig::new(3, 3).unwrap()).len(), 10);
    }
}
