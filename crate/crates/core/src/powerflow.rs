//! Three-phase Newton power flow in polar coordinates.
//!
//! Unknowns are the phase angles of every non-slack node and the magnitudes
//! of PQ nodes (including PV nodes switched to PQ at a reactive limit). The
//! residual of node `i` is
//! `P0_i + λ·Δp_i − P_i(x)` and `Q0_i + λ·Δq_i − Q_i(x)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feeder::{AdmittanceMatrix, BusType, FeederModel, BASE_KVA_PHASE};
use crate::stochastic::VariationVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Infinity-norm mismatch tolerance, p.u.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub flat_start: bool,
    pub enforce_q_limits: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-8,
            max_iterations: 30,
            flat_start: true,
            enforce_q_limits: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowState {
    /// Phase angle per node, radians.
    pub theta: Vec<f64>,
    /// Voltage magnitude per node, p.u.
    pub vm: Vec<f64>,
    /// Reactive generation of regulated nodes, kvar.
    pub q_gen_kvar: Vec<f64>,
    /// PV nodes held at a reactive limit.
    pub switched: Vec<bool>,
}

impl PowerFlowState {
    pub fn voltages(&self) -> Vec<Complex64> {
        self.vm
            .iter()
            .zip(&self.theta)
            .map(|(&v, &t)| Complex64::from_polar(v, t))
            .collect()
    }

    /// Lowest voltage magnitude and its node.
    pub fn min_voltage(&self) -> (usize, f64) {
        self.vm
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }
}

/// Residual of the parameterized equations, ordered like the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchVector {
    pub values: Vec<f64>,
    /// Node owning each row and whether the row is a reactive balance.
    pub rows: Vec<(usize, bool)>,
}

impl MismatchVector {
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
    }
}

/// Mapping between nodes and positions in the unknown vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub theta_col: Vec<Option<usize>>,
    pub vm_col: Vec<Option<usize>>,
    /// (node, is_q) for each equation row; row `k` pairs with unknown `k`.
    pub rows: Vec<(usize, bool)>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Outcome of a Newton solve with diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: PowerFlowState,
    pub iterations: usize,
    pub switches: usize,
    /// Mismatch infinity norm before each Newton update and at convergence.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Slack,
    PQ,
    PV,
}

/// A power-flow problem: one feeder, its admittance, and one loading
/// direction. Stateless; safe to share across threads.
#[derive(Debug, Clone)]
pub struct PowerFlow<'a> {
    model: &'a FeederModel,
    ybus: &'a AdmittanceMatrix,
    kinds: Vec<NodeKind>,
    setpoint: Vec<f64>,
    p0: Vec<f64>,
    q0: Vec<f64>,
    bp: Vec<f64>,
    bq: Vec<f64>,
    q_min: Vec<f64>,
    q_max: Vec<f64>,
}

impl<'a> PowerFlow<'a> {
    pub fn new(model: &'a FeederModel, ybus: &'a AdmittanceMatrix, direction: &VariationVector) -> Result<Self> {
        let n = model.node_count();
        if direction.dp_kw.len() != n || direction.dq_kvar.len() != n || ybus.dimension() != n {
            return Err(Error::Config(format!(
                "direction vector and admittance must cover the {n} feeder nodes"
            )));
        }
        let kinds = (0..n)
            .map(|i| match model.bus_type_of(i) {
                BusType::Slack => NodeKind::Slack,
                BusType::PQ => NodeKind::PQ,
                BusType::PV => NodeKind::PV,
            })
            .collect();
        let setpoint = (0..n).map(|i| model.setpoint_of(i).unwrap_or(1.0)).collect();
        let base = model.base_injections();
        let pu = |v: &[f64]| v.iter().map(|x| x / BASE_KVA_PHASE).collect::<Vec<_>>();
        let limits = model.q_limits();
        Ok(PowerFlow {
            model,
            ybus,
            kinds,
            setpoint,
            p0: pu(&base.p_kw),
            q0: pu(&base.q_kvar),
            bp: pu(&direction.dp_kw),
            bq: pu(&direction.dq_kvar),
            q_min: limits
                .iter()
                .map(|l| l.map_or(f64::NEG_INFINITY, |l| l.min_kvar / BASE_KVA_PHASE))
                .collect(),
            q_max: limits
                .iter()
                .map(|l| l.map_or(f64::INFINITY, |l| l.max_kvar / BASE_KVA_PHASE))
                .collect(),
        })
    }

    pub fn model(&self) -> &FeederModel {
        self.model
    }

    pub fn admittance(&self) -> &AdmittanceMatrix {
        self.ybus
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn flat_start(&self) -> PowerFlowState {
        let n = self.node_count();
        let mags = self.model.reference_magnitudes();
        PowerFlowState {
            theta: self.model.reference_angles(),
            vm: (0..n)
                .map(|i| match self.kinds[i] {
                    NodeKind::PQ => mags[i],
                    _ => self.setpoint[i],
                })
                .collect(),
            q_gen_kvar: vec![0.0; n],
            switched: vec![false; n],
        }
    }

    pub fn layout(&self, state: &PowerFlowState) -> Layout {
        let n = self.node_count();
        let mut theta_col = vec![None; n];
        let mut vm_col = vec![None; n];
        let mut rows = Vec::new();
        for i in 0..n {
            if self.kinds[i] != NodeKind::Slack {
                theta_col[i] = Some(rows.len());
                rows.push((i, false));
            }
        }
        for i in 0..n {
            if self.has_free_magnitude(state, i) {
                vm_col[i] = Some(rows.len());
                rows.push((i, true));
            }
        }
        Layout {
            theta_col,
            vm_col,
            rows,
        }
    }

    fn has_free_magnitude(&self, state: &PowerFlowState, i: usize) -> bool {
        match self.kinds[i] {
            NodeKind::Slack => false,
            NodeKind::PQ => true,
            NodeKind::PV => state.switched[i],
        }
    }

    /// Computed nodal injections `P_i(x)`, `Q_i(x)`, p.u.
    pub fn injections(&self, state: &PowerFlowState) -> (Vec<f64>, Vec<f64>) {
        let n = self.node_count();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            let (vi, ti) = (state.vm[i], state.theta[i]);
            for &(j, y) in self.ybus.row(i) {
                let (s, c) = (ti - state.theta[j]).sin_cos();
                let vv = vi * state.vm[j];
                p[i] += vv * (y.re * c + y.im * s);
                q[i] += vv * (y.re * s - y.im * c);
            }
        }
        (p, q)
    }

    /// Scheduled reactive injection of node `i` excluding PV regulation, p.u.
    fn q_scheduled(&self, state: &PowerFlowState, i: usize, lambda: f64) -> f64 {
        let held = if state.switched[i] {
            state.q_gen_kvar[i] / BASE_KVA_PHASE
        } else {
            0.0
        };
        self.q0[i] + lambda * self.bq[i] + held
    }

    pub fn mismatch(&self, state: &PowerFlowState, lambda: f64) -> MismatchVector {
        let layout = self.layout(state);
        let (p, q) = self.injections(state);
        let values = layout
            .rows
            .iter()
            .map(|&(i, is_q)| {
                if is_q {
                    self.q_scheduled(state, i, lambda) - q[i]
                } else {
                    self.p0[i] + lambda * self.bp[i] - p[i]
                }
            })
            .collect();
        MismatchVector {
            values,
            rows: layout.rows,
        }
    }

    /// Derivative of the residual with respect to λ, ordered like the rows.
    pub fn lambda_column(&self, layout: &Layout) -> DVector<f64> {
        DVector::from_iterator(
            layout.len(),
            layout
                .rows
                .iter()
                .map(|&(i, is_q)| if is_q { self.bq[i] } else { self.bp[i] }),
        )
    }

    /// Analytic Jacobian of the residual, `∂mismatch/∂x`.
    pub fn jacobian(&self, state: &PowerFlowState) -> DMatrix<f64> {
        let layout = self.layout(state);
        self.jacobian_with(state, &layout)
    }

    pub fn jacobian_with(&self, state: &PowerFlowState, layout: &Layout) -> DMatrix<f64> {
        let m = layout.len();
        let mut jac = DMatrix::zeros(m, m);
        let (p, q) = self.injections(state);
        for (row, &(i, is_q)) in layout.rows.iter().enumerate() {
            let vi = state.vm[i];
            for &(j, y) in self.ybus.row(i) {
                let (g, b) = (y.re, y.im);
                // derivatives of the computed injection; the residual carries a minus sign
                let (d_theta, d_vm) = if i == j {
                    if is_q {
                        (p[i] - g * vi * vi, q[i] / vi - b * vi)
                    } else {
                        (-q[i] - b * vi * vi, p[i] / vi + g * vi)
                    }
                } else {
                    let (s, c) = (state.theta[i] - state.theta[j]).sin_cos();
                    let vj = state.vm[j];
                    if is_q {
                        (-vi * vj * (g * c + b * s), vi * (g * s - b * c))
                    } else {
                        (vi * vj * (g * s - b * c), vi * (g * c + b * s))
                    }
                };
                if let Some(col) = layout.theta_col[j] {
                    jac[(row, col)] -= d_theta;
                }
                if let Some(col) = layout.vm_col[j] {
                    jac[(row, col)] -= d_vm;
                }
            }
        }
        jac
    }

    /// Writes an update of the unknowns into the state.
    pub fn apply_update(&self, state: &mut PowerFlowState, layout: &Layout, dx: &[f64]) {
        for i in 0..self.node_count() {
            if let Some(c) = layout.theta_col[i] {
                state.theta[i] += dx[c];
            }
            if let Some(c) = layout.vm_col[i] {
                state.vm[i] += dx[c];
            }
        }
    }

    /// Reactive generation required at each unswitched PV node, kvar; held
    /// limits for switched ones; zero elsewhere.
    pub fn update_q_gen(&self, state: &mut PowerFlowState, lambda: f64) {
        let (_, q) = self.injections(state);
        for i in 0..self.node_count() {
            if self.kinds[i] == NodeKind::PV && !state.switched[i] {
                state.q_gen_kvar[i] = (q[i] - self.q0[i] - lambda * self.bq[i]) * BASE_KVA_PHASE;
            } else if self.kinds[i] != NodeKind::PV {
                state.q_gen_kvar[i] = 0.0;
            }
        }
    }

    /// One PV→PQ switch for the violated reactive limit whose relative
    /// overshoot is smallest (ties by node order). Returns whether a switch
    /// happened.
    pub fn switch_one_q_limit(&self, state: &mut PowerFlowState) -> bool {
        let mut best: Option<(f64, usize, f64)> = None;
        for i in 0..self.node_count() {
            if self.kinds[i] != NodeKind::PV || state.switched[i] {
                continue;
            }
            let qg = state.q_gen_kvar[i] / BASE_KVA_PHASE;
            let (lo, hi) = (self.q_min[i], self.q_max[i]);
            let span = if (hi - lo).is_finite() { hi - lo } else { 1.0 };
            let (over, limit) = if qg > hi {
                (qg - hi, hi)
            } else if qg < lo {
                (lo - qg, lo)
            } else {
                continue;
            };
            let rel = over / span;
            if best.is_none_or(|(r, _, _)| rel < r) {
                best = Some((rel, i, limit));
            }
        }
        match best {
            Some((_, i, limit)) => {
                state.switched[i] = true;
                state.q_gen_kvar[i] = limit * BASE_KVA_PHASE;
                true
            }
            None => false,
        }
    }

    /// Newton iterations at fixed λ and fixed PV/PQ assignment.
    pub fn newton(
        &self,
        state: &mut PowerFlowState,
        lambda: f64,
        options: &SolveOptions,
        history: &mut Vec<f64>,
    ) -> Result<usize> {
        let layout = self.layout(state);
        for i in 0..self.node_count() {
            if layout.vm_col[i].is_none() {
                state.vm[i] = self.setpoint[i];
            }
        }
        for it in 0..=options.max_iterations {
            let f = self.mismatch(state, lambda);
            let norm = f.norm_inf();
            history.push(norm);
            if !norm.is_finite() {
                break;
            }
            if norm <= options.tolerance {
                return Ok(it);
            }
            if it == options.max_iterations {
                break;
            }
            let jac = self.jacobian_with(state, &layout);
            let rhs = DVector::from_iterator(f.values.len(), f.values.iter().map(|x| -x));
            let dx = solve_dense(jac, rhs)?;
            self.apply_update(state, &layout, dx.as_slice());
            if state.vm.iter().any(|v| !(*v > 0.0)) {
                break;
            }
        }
        Err(Error::Divergence {
            iterations: options.max_iterations,
            mismatch: history.last().copied().unwrap_or(f64::NAN),
        })
    }

    /// Solves at `lambda` from `start` (or a flat start), enforcing reactive
    /// limits by PV→PQ switching with a re-solve after each switch.
    pub fn solve_detailed(
        &self,
        lambda: f64,
        start: Option<&PowerFlowState>,
        options: &SolveOptions,
    ) -> Result<SolveOutcome> {
        if !lambda.is_finite() {
            return Err(Error::Config("λ must be finite".into()));
        }
        let mut state = match start {
            Some(s) if !options.flat_start => s.clone(),
            _ => self.flat_start(),
        };
        let mut history = Vec::new();
        let mut iterations = self.newton(&mut state, lambda, options, &mut history)?;
        self.update_q_gen(&mut state, lambda);
        let mut switches = 0;
        while options.enforce_q_limits && self.switch_one_q_limit(&mut state) {
            switches += 1;
            iterations += self.newton(&mut state, lambda, options, &mut history)?;
            self.update_q_gen(&mut state, lambda);
        }
        Ok(SolveOutcome {
            state,
            iterations,
            switches,
            history,
        })
    }

    pub fn solve(&self, lambda: f64, start: Option<&PowerFlowState>, options: &SolveOptions) -> Result<PowerFlowState> {
        self.solve_detailed(lambda, start, options).map(|o| o.state)
    }

    /// Complex power injected at every node, p.u., from the network side.
    pub fn node_power(&self, state: &PowerFlowState) -> Vec<Complex64> {
        let v = state.voltages();
        let i = self.ybus.mul(&v);
        v.iter().zip(&i).map(|(v, i)| v * i.conj()).collect()
    }

    /// Scheduled complex injection of non-slack nodes at `lambda`, p.u.
    pub fn scheduled_power(&self, state: &PowerFlowState, lambda: f64) -> Vec<Complex64> {
        (0..self.node_count())
            .map(|i| {
                let q = match self.kinds[i] {
                    NodeKind::PV => self.q0[i] + lambda * self.bq[i] + state.q_gen_kvar[i] / BASE_KVA_PHASE,
                    _ => self.q_scheduled(state, i, lambda),
                };
                Complex64::new(self.p0[i] + lambda * self.bp[i], q)
            })
            .collect()
    }

    pub fn is_slack(&self, node: usize) -> bool {
        self.kinds[node] == NodeKind::Slack
    }
}

/// Dense LU solve that reports near-singular systems.
pub fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let scale = a.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if !(min_pivot > 1e-13 * scale) {
        return Err(Error::SingularJacobian);
    }
    let x = lu.solve(&b).ok_or(Error::SingularJacobian)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    Ok(x)
}

/// Per-phase branch current magnitude, amperes, with its rating.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCurrent {
    pub branch: usize,
    pub phase: crate::feeder::Phase,
    pub amps: f64,
    pub ampacity: f64,
}

impl BranchCurrent {
    pub fn loading(&self) -> f64 {
        self.amps / self.ampacity
    }
}

/// Branch currents from the state through the branch admittance blocks.
/// Lines report the larger end current; transformers the secondary current.
pub fn branch_currents(model: &FeederModel, ybus: &AdmittanceMatrix, state: &PowerFlowState) -> Vec<BranchCurrent> {
    let v = state.voltages();
    let mut out = Vec::new();
    for blk in ybus.branch_blocks() {
        let br = &model.branches()[blk.branch];
        let (i_f, i_t) = blk.currents(&v);
        let f = model.bus_index(&br.from).unwrap();
        let t = model.bus_index(&br.to).unwrap();
        for (k, phase) in br.phases.iter().enumerate() {
            let amps = if br.is_transformer() {
                i_t[k].norm() * model.base_amp(t)
            } else {
                (i_f[k].norm() * model.base_amp(f)).max(i_t[k].norm() * model.base_amp(t))
            };
            out.push(BranchCurrent {
                branch: blk.branch,
                phase,
                amps,
                ampacity: br.ampacity_a,
            });
        }
    }
    out
}

/// Total complex losses (series, shunt and bus capacitors), p.u., computed
/// branch by branch.
pub fn network_losses(model: &FeederModel, ybus: &AdmittanceMatrix, state: &PowerFlowState) -> Complex64 {
    let v = state.voltages();
    let mut loss = Complex64::new(0.0, 0.0);
    for blk in ybus.branch_blocks() {
        let (i_f, i_t) = blk.currents(&v);
        for (k, (&nf, &nt)) in blk.from_nodes.iter().zip(&blk.to_nodes).enumerate() {
            loss += v[nf] * i_f[k].conj() + v[nt] * i_t[k].conj();
        }
    }
    for (b, bus) in model.buses().iter().enumerate() {
        for (kvar, p) in bus.shunt_kvar.iter().zip(bus.phases.iter()) {
            let n = model.node(b, p).unwrap();
            let y = Complex64::new(0.0, kvar / BASE_KVA_PHASE);
            loss += v[n] * (y * v[n]).conj();
        }
    }
    loss
}
