use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{BranchKind, Connection, FeederModel, BASE_KVA_PHASE};
use crate::error::{Error, Result};

/// Per-unit two-port admittance blocks of one branch, indexed over the
/// branch's present phases.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchBlocks {
    pub branch: usize,
    pub from_nodes: Vec<usize>,
    pub to_nodes: Vec<usize>,
    pub y_ff: DMatrix<Complex64>,
    pub y_ft: DMatrix<Complex64>,
    pub y_tf: DMatrix<Complex64>,
    pub y_tt: DMatrix<Complex64>,
}

impl BranchBlocks {
    /// Phase currents (p.u.) entering the branch at its from and to ends.
    pub fn currents(&self, v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let vf: Vec<Complex64> = self.from_nodes.iter().map(|&n| v[n]).collect();
        let vt: Vec<Complex64> = self.to_nodes.iter().map(|&n| v[n]).collect();
        let k = vf.len();
        let mut i_f = vec![Complex64::new(0.0, 0.0); k];
        let mut i_t = vec![Complex64::new(0.0, 0.0); k];
        for r in 0..k {
            for c in 0..k {
                i_f[r] += self.y_ff[(r, c)] * vf[c] + self.y_ft[(r, c)] * vt[c];
                i_t[r] += self.y_tf[(r, c)] * vf[c] + self.y_tt[(r, c)] * vt[c];
            }
        }
        (i_f, i_t)
    }
}

/// Sparse complex nodal admittance `Y = G + jB` over all (bus, phase) nodes,
/// stored row-wise with columns in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
    branches: Vec<BranchBlocks>,
}

impl AdmittanceMatrix {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.rows[i][k].1)
            .unwrap_or_default()
    }

    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).re
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).im
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn branch_blocks(&self) -> &[BranchBlocks] {
        &self.branches
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, y) in row {
                m[(i, j)] = y;
            }
        }
        m
    }

    /// Nodal currents `Y v`.
    pub fn mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, y)| y * v[j]).sum())
            .collect()
    }
}

/// Assembles the nodal admittance of a validated feeder in per unit.
///
/// Lines contribute their series admittance plus half the shunt admittance at
/// each end. Transformers apply the per-phase primary tap `T` and, for delta
/// primaries, the winding incidence `C`:
/// `Ypp = Cᵀ T⁻¹ Ys T⁻¹ C`, `Yps = -Cᵀ T⁻¹ Ys`, `Ysp = -Ys T⁻¹ C`, `Yss = Ys`.
/// Bus capacitors are constant susceptances.
pub fn build_admittance(model: &FeederModel) -> Result<AdmittanceMatrix> {
    let dim = model.node_count();
    let mut acc: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    let mut branches = Vec::with_capacity(model.branches().len());

    for (idx, br) in model.branches().iter().enumerate() {
        let f = model.bus_index(&br.from).unwrap();
        let t = model.bus_index(&br.to).unwrap();
        let k = br.phases.len();
        let ref_bus = if br.is_transformer() { t } else { f };
        let zb = model.base_ohm(ref_bus);

        let z = DMatrix::from_fn(k, k, |r, c| br.z_ohm[r][c] / zb);
        let ys = invert(&z).ok_or_else(|| Error::IllConditioned {
            element: br.id.clone(),
            reason: "series impedance matrix is singular".into(),
        })?;
        let ysh = match &br.y_shunt_s {
            Some(y) => DMatrix::from_fn(k, k, |r, c| y[r][c] * zb * 0.5),
            None => DMatrix::zeros(k, k),
        };

        let (y_ff, y_ft, y_tf, y_tt) = match &br.kind {
            BranchKind::Line => (&ys + &ysh, -&ys, -&ys, &ys + &ysh),
            BranchKind::Transformer { tap, connection } => {
                let tinv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    k,
                    tap.iter().map(|t| Complex64::new(1.0 / t, 0.0)),
                ));
                let c = match connection {
                    Connection::WyeWye => DMatrix::identity(k, k),
                    Connection::DeltaWye => delta_incidence(),
                };
                let ct = c.transpose();
                let left = &ct * &tinv;
                (
                    &left * &ys * &tinv * &c + &ysh,
                    -(&left * &ys),
                    -(&ys * &tinv * &c),
                    &ys + &ysh,
                )
            }
        };

        let from_nodes: Vec<usize> = br.phases.iter().map(|p| model.node(f, p).unwrap()).collect();
        let to_nodes: Vec<usize> = br.phases.iter().map(|p| model.node(t, p).unwrap()).collect();
        for r in 0..k {
            for c in 0..k {
                add(&mut acc, from_nodes[r], from_nodes[c], y_ff[(r, c)]);
                add(&mut acc, from_nodes[r], to_nodes[c], y_ft[(r, c)]);
                add(&mut acc, to_nodes[r], from_nodes[c], y_tf[(r, c)]);
                add(&mut acc, to_nodes[r], to_nodes[c], y_tt[(r, c)]);
            }
        }
        branches.push(BranchBlocks {
            branch: idx,
            from_nodes,
            to_nodes,
            y_ff,
            y_ft,
            y_tf,
            y_tt,
        });
    }

    for (b, bus) in model.buses().iter().enumerate() {
        for (kvar, p) in bus.shunt_kvar.iter().zip(bus.phases.iter()) {
            let n = model.node(b, p).unwrap();
            add(&mut acc, n, n, Complex64::new(0.0, kvar / BASE_KVA_PHASE));
        }
    }

    let mut rows = vec![Vec::new(); dim];
    for ((i, j), y) in acc {
        if y != Complex64::new(0.0, 0.0) {
            rows[i].push((j, y));
        }
    }
    Ok(AdmittanceMatrix {
        dim,
        rows,
        branches,
    })
}

fn add(acc: &mut BTreeMap<(usize, usize), Complex64>, i: usize, j: usize, y: Complex64) {
    *acc.entry((i, j)).or_default() += y;
}

/// Winding-voltage incidence of a delta primary: winding `a` sees `Va - Vc`.
fn delta_incidence() -> DMatrix<Complex64> {
    let s = 1.0 / 3f64.sqrt();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            s, 0.0, -s, //
            -s, s, 0.0, //
            0.0, -s, s,
        ],
    )
    .map(|x| Complex64::new(x, 0.0))
}

fn invert(z: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let scale = z.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let inv = z.clone().try_inverse()?;
    let inv_scale = inv.iter().map(|x| x.norm()).fold(0.0, f64::max);
    // crude condition estimate on the max-norm
    if !inv_scale.is_finite() || scale * inv_scale > 1e12 {
        return None;
    }
    Some(inv)
}
