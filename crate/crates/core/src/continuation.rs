//! Predictor–corrector tracing of the loading path `f(x) − λ·b = 0` and the
//! three loadability limits along it.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::{AdmittanceMatrix, FeederModel, OperatingLimits};
use crate::powerflow::{branch_currents, solve_dense, BranchCurrent, PowerFlow, PowerFlowState, SolveOptions};
use crate::stochastic::VariationVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitClass {
    Voltage,
    Thermal,
    Collapse,
}

impl LimitClass {
    pub const ALL: [LimitClass; 3] = [LimitClass::Voltage, LimitClass::Thermal, LimitClass::Collapse];

    pub fn name(self) -> &'static str {
        match self {
            LimitClass::Voltage => "voltage",
            LimitClass::Thermal => "thermal",
            LimitClass::Collapse => "collapse",
        }
    }
}

impl fmt::Display for LimitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Initial step along the normalized path; about Δλ while λ dominates.
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Corrections needing at most this many Newton iterations count as easy.
    pub easy_iterations: usize,
    /// Consecutive easy corrections before the step is doubled.
    pub easy_streak: usize,
    pub corrector_max_iterations: usize,
    /// Largest accepted distance between prediction and corrected point,
    /// relative to the step. Larger corrections are treated as branch jumps.
    pub max_correction: f64,
    /// Smallest accepted cosine between the predictor direction and the
    /// secant to the corrected point.
    pub min_alignment: f64,
    /// Step length below which the nose is localized by a quadratic fit.
    pub nose_resolution: f64,
    pub lambda_max: f64,
    pub max_points: usize,
    /// Voltage refinement tolerance, p.u.
    pub voltage_tolerance: f64,
    /// Current refinement tolerance, relative to ampacity.
    pub current_tolerance: f64,
    pub solve: SolveOptions,
    pub keep_trace: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            initial_step: 0.1,
            max_step: 0.8,
            min_step: 1e-4,
            easy_iterations: 3,
            easy_streak: 3,
            corrector_max_iterations: 12,
            max_correction: 0.5,
            min_alignment: 0.9,
            nose_resolution: 0.02,
            lambda_max: 1e3,
            max_points: 4000,
            voltage_tolerance: 1e-6,
            current_tolerance: 1e-5,
            solve: SolveOptions::default(),
            keep_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationPoint {
    pub lambda: f64,
    pub state: PowerFlowState,
    pub branch_currents: Vec<BranchCurrent>,
}

impl ContinuationPoint {
    pub fn min_voltage(&self) -> f64 {
        self.state.min_voltage().1
    }

    pub fn max_loading(&self) -> f64 {
        self.branch_currents.iter().map(BranchCurrent::loading).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContinuationTrace {
    pub points: Vec<ContinuationPoint>,
}

/// One violated operating limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub class: LimitClass,
    pub element: String,
    /// Amount beyond the limit: p.u. voltage, or current over ampacity minus one.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdcResult {
    pub lambda_voltage: f64,
    pub lambda_thermal: f64,
    pub lambda_collapse: f64,
    pub adc_voltage: f64,
    pub adc_thermal: f64,
    pub adc_collapse: f64,
    pub adc_overall: f64,
    pub binding_limit: LimitClass,
    pub binding_element: Option<String>,
    pub voltage_element: Option<String>,
    pub thermal_element: Option<String>,
    /// Load increase carried by the direction vector, MW.
    pub load_increase_mw: f64,
    /// No nose was found below `lambda_max`.
    pub cap_reached: bool,
    pub corrector_solves: usize,
    pub trace: Option<ContinuationTrace>,
}

impl AdcResult {
    pub fn lambda(&self, class: LimitClass) -> f64 {
        match class {
            LimitClass::Voltage => self.lambda_voltage,
            LimitClass::Thermal => self.lambda_thermal,
            LimitClass::Collapse => self.lambda_collapse,
        }
    }

    pub fn adc(&self, class: LimitClass) -> f64 {
        match class {
            LimitClass::Voltage => self.adc_voltage,
            LimitClass::Thermal => self.adc_thermal,
            LimitClass::Collapse => self.adc_collapse,
        }
    }
}

/// Largest voltage excursion beyond the band (negative inside) and its node.
fn voltage_excess(state: &PowerFlowState, limits: OperatingLimits) -> (f64, usize) {
    let mut worst = (f64::NEG_INFINITY, 0);
    for (i, &v) in state.vm.iter().enumerate() {
        let e = (limits.v_min_pu - v).max(v - limits.v_max_pu);
        if e > worst.0 {
            worst = (e, i);
        }
    }
    worst
}

/// Largest relative overload (negative when within rating) and its index.
fn thermal_excess(currents: &[BranchCurrent]) -> (f64, usize) {
    let mut worst = (f64::NEG_INFINITY, 0);
    for (k, c) in currents.iter().enumerate() {
        let e = c.loading() - 1.0;
        if e > worst.0 {
            worst = (e, k);
        }
    }
    worst
}

fn current_label(model: &FeederModel, c: &BranchCurrent) -> String {
    format!("{}.{}", model.branches()[c.branch].id, c.phase)
}

/// Every violated limit class at a point, each with its worst element.
pub fn check_limits(model: &FeederModel, point: &ContinuationPoint, limits: OperatingLimits) -> Vec<Violation> {
    let mut out = Vec::new();
    let (ev, node) = voltage_excess(&point.state, limits);
    if ev > 0.0 {
        out.push(Violation {
            class: LimitClass::Voltage,
            element: model.node_label(node),
            margin: ev,
        });
    }
    let (et, k) = thermal_excess(&point.branch_currents);
    if et > 0.0 {
        out.push(Violation {
            class: LimitClass::Thermal,
            element: current_label(model, &point.branch_currents[k]),
            margin: et,
        });
    }
    out
}

/// Path coordinates (θ, V per node, then λ) of a corrected point.
fn coords(state: &PowerFlowState, lambda: f64) -> DVector<f64> {
    let n = state.vm.len();
    let mut z = DVector::zeros(2 * n + 1);
    for i in 0..n {
        z[i] = state.theta[i];
        z[n + i] = state.vm[i];
    }
    z[2 * n] = lambda;
    z
}

/// Which coordinate the corrector holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Lambda,
    Magnitude(usize),
}

/// Path tracer for one feeder and one direction vector.
pub struct Tracer<'a> {
    pf: PowerFlow<'a>,
    model: &'a FeederModel,
    ybus: &'a AdmittanceMatrix,
    limits: OperatingLimits,
    options: ContinuationOptions,
    load_increase_kw: f64,
    solves: usize,
}

impl<'a> Tracer<'a> {
    pub fn new(
        model: &'a FeederModel,
        ybus: &'a AdmittanceMatrix,
        direction: &VariationVector,
        options: ContinuationOptions,
    ) -> Result<Self> {
        if direction.is_zero() {
            return Err(Error::ZeroDirection);
        }
        Ok(Tracer {
            pf: PowerFlow::new(model, ybus, direction)?,
            model,
            ybus,
            limits: model.limits(),
            options,
            load_increase_kw: direction.load_increase_kw,
            solves: 0,
        })
    }

    pub fn power_flow(&self) -> &PowerFlow<'a> {
        &self.pf
    }

    fn point(&self, lambda: f64, state: PowerFlowState) -> ContinuationPoint {
        let branch_currents = branch_currents(self.model, self.ybus, &state);
        ContinuationPoint {
            lambda,
            state,
            branch_currents,
        }
    }

    /// Unit tangent at a corrected point from `[J  J_λ; e_λᵀ] t = e`.
    pub fn tangent(&self, point: &ContinuationPoint) -> Result<DVector<f64>> {
        self.tangent_bordered(point, None)
    }

    /// Unit tangent from `[J  J_λ; dᵀ] t = e` with `d` the previous
    /// direction: nonsingular at the fold and oriented along `d`.
    pub fn tangent_along(&self, point: &ContinuationPoint, previous: &DVector<f64>) -> Result<DVector<f64>> {
        self.tangent_bordered(point, Some(previous))
    }

    fn tangent_bordered(&self, point: &ContinuationPoint, previous: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let layout = self.pf.layout(&point.state);
        let m = layout.len();
        let n = self.pf.node_count();
        let jac = self.pf.jacobian_with(&point.state, &layout);
        let jl = self.pf.lambda_column(&layout);
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m)).copy_from(&jac);
        a.view_mut((0, m), (m, 1)).copy_from(&jl);
        match previous {
            None => a[(m, m)] = 1.0,
            Some(d) => {
                for i in 0..n {
                    if let Some(c) = layout.theta_col[i] {
                        a[(m, c)] = d[i];
                    }
                    if let Some(c) = layout.vm_col[i] {
                        a[(m, c)] = d[n + i];
                    }
                }
                a[(m, m)] = d[2 * n];
            }
        }
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = 1.0;
        let t = solve_dense(a, rhs)?;
        let mut z = DVector::zeros(2 * n + 1);
        for i in 0..n {
            if let Some(c) = layout.theta_col[i] {
                z[i] = t[c];
            }
            if let Some(c) = layout.vm_col[i] {
                z[n + i] = t[c];
            }
        }
        z[2 * n] = t[m];
        Ok(z / t.norm())
    }

    /// Predicted coordinates `z + h·t` and the parameter to hold.
    pub fn predict(&self, last: &ContinuationPoint, direction: &DVector<f64>, h: f64) -> (DVector<f64>, Parameter) {
        self.predict_with(last, direction, h, true)
    }

    fn predict_with(
        &self,
        last: &ContinuationPoint,
        direction: &DVector<f64>,
        h: f64,
        allow_lambda: bool,
    ) -> (DVector<f64>, Parameter) {
        let n = self.pf.node_count();
        let z = coords(&last.state, last.lambda) + direction * h;
        let layout = self.pf.layout(&last.state);
        let mut best = if allow_lambda {
            (direction[2 * n].abs(), Parameter::Lambda)
        } else {
            (-1.0, Parameter::Lambda)
        };
        for i in 0..n {
            if layout.vm_col[i].is_some() && direction[n + i].abs() > best.0 {
                best = (direction[n + i].abs(), Parameter::Magnitude(i));
            }
        }
        (z, best.1)
    }

    /// Newton correction of a prediction with one coordinate held fixed.
    /// Reactive limits are enforced after convergence, re-correcting after
    /// each switch. Returns the point and the Newton iterations used.
    pub fn correct(
        &mut self,
        from: &ContinuationPoint,
        predicted: &DVector<f64>,
        param: Parameter,
    ) -> Result<(ContinuationPoint, usize)> {
        self.solves += 1;
        let n = self.pf.node_count();
        let mut state = from.state.clone();
        for i in 0..n {
            state.theta[i] = predicted[i];
            state.vm[i] = predicted[n + i];
        }
        let mut lambda = predicted[2 * n];
        let target = match param {
            Parameter::Lambda => lambda,
            Parameter::Magnitude(i) => predicted[n + i],
        };
        let mut iterations = self.newton_augmented(&mut state, &mut lambda, param, target)?;
        self.pf.update_q_gen(&mut state, lambda);
        while self.options.solve.enforce_q_limits && self.pf.switch_one_q_limit(&mut state) {
            iterations += self.newton_augmented(&mut state, &mut lambda, param, target)?;
            self.pf.update_q_gen(&mut state, lambda);
        }
        Ok((self.point(lambda, state), iterations))
    }

    fn newton_augmented(
        &self,
        state: &mut PowerFlowState,
        lambda: &mut f64,
        param: Parameter,
        target: f64,
    ) -> Result<usize> {
        let layout = self.pf.layout(state);
        let m = layout.len();
        let pinned = match param {
            Parameter::Lambda => m,
            Parameter::Magnitude(i) => match layout.vm_col[i] {
                Some(c) => c,
                None => return Err(Error::Continuation("held magnitude is not free".into())),
            },
        };
        let jl = self.pf.lambda_column(&layout);
        let tol = self.options.solve.tolerance;
        let mut last = f64::NAN;
        for it in 0..=self.options.corrector_max_iterations {
            let f = self.pf.mismatch(state, *lambda);
            let pinned_value = if pinned == m { *lambda } else { state.vm[layout.rows[pinned].0] };
            let g = pinned_value - target;
            last = f.norm_inf().max(g.abs());
            if !last.is_finite() {
                break;
            }
            if last <= tol {
                return Ok(it);
            }
            if it == self.options.corrector_max_iterations {
                break;
            }
            let jac = self.pf.jacobian_with(state, &layout);
            let mut a = DMatrix::zeros(m + 1, m + 1);
            a.view_mut((0, 0), (m, m)).copy_from(&jac);
            a.view_mut((0, m), (m, 1)).copy_from(&jl);
            a[(m, pinned)] = 1.0;
            let mut rhs = DVector::zeros(m + 1);
            for (k, v) in f.values.iter().enumerate() {
                rhs[k] = -v;
            }
            rhs[m] = -g;
            let d = solve_dense(a, rhs)?;
            self.pf.apply_update(state, &layout, &d.as_slice()[..m]);
            *lambda += d[m];
            if state.vm.iter().any(|v| !(*v > 0.0)) {
                break;
            }
        }
        Err(Error::Divergence {
            iterations: self.options.corrector_max_iterations,
            mismatch: last,
        })
    }

    /// Fixed-λ solve warm-started from a nearby point.
    fn solve_at(&mut self, lambda: f64, start: &PowerFlowState) -> Result<ContinuationPoint> {
        self.solves += 1;
        let opts = SolveOptions {
            flat_start: false,
            ..self.options.solve
        };
        let state = self.pf.solve(lambda, Some(start), &opts)?;
        Ok(self.point(lambda, state))
    }

    /// Bisection on λ between a feasible and a violating point until the
    /// class quantity is within tolerance of its limit.
    fn refine_crossing(
        &mut self,
        class: LimitClass,
        lo: &ContinuationPoint,
        hi: &ContinuationPoint,
    ) -> (f64, String) {
        let tol = match class {
            LimitClass::Voltage => self.options.voltage_tolerance,
            _ => self.options.current_tolerance,
        };
        let limits = self.limits;
        let model = self.model;
        let excess = |p: &ContinuationPoint| -> (f64, String) {
            match class {
                LimitClass::Voltage => {
                    let (e, node) = voltage_excess(&p.state, limits);
                    (e, model.node_label(node))
                }
                _ => {
                    let (e, k) = thermal_excess(&p.branch_currents);
                    (e, current_label(model, &p.branch_currents[k]))
                }
            }
        };
        let (mut a, mut b) = (lo.clone(), hi.clone());
        let (mut ea, mut eb) = (excess(&a).0, excess(&b).0);
        // Illinois variant of regula falsi: the bracket always holds the
        // crossing, the stale end's weight is halved after repeated updates
        let (mut wa, mut wb) = (1.0, 1.0);
        let mut side = 0i8;
        for _ in 0..100 {
            if eb.abs() <= tol {
                return (b.lambda, excess(&b).1);
            }
            if ea.abs() <= tol {
                return (a.lambda, excess(&a).1);
            }
            let width = b.lambda - a.lambda;
            if width <= 1e-14 * b.lambda.abs().max(1.0) {
                break;
            }
            let (fa, fb) = (ea * wa, eb * wb);
            let mut mid = a.lambda + fa / (fa - fb) * width;
            if !(mid > a.lambda && mid < b.lambda) {
                mid = 0.5 * (a.lambda + b.lambda);
            }
            let warm = if mid - a.lambda < b.lambda - mid { &a.state } else { &b.state };
            match self.solve_at(mid, warm) {
                Ok(p) => {
                    let e = excess(&p).0;
                    if e > 0.0 {
                        b = p;
                        eb = e;
                        wb = 1.0;
                        if side == 1 {
                            wa *= 0.5;
                        }
                        side = 1;
                    } else {
                        a = p;
                        ea = e;
                        wa = 1.0;
                        if side == -1 {
                            wb *= 0.5;
                        }
                        side = -1;
                    }
                }
                Err(_) => {
                    // near the fold: interpolate linearly in the class quantity
                    let w = ea / (ea - eb);
                    let lambda = a.lambda + w * width;
                    log::debug!("{class} crossing interpolated at λ = {lambda}");
                    return (lambda, excess(&b).1);
                }
            }
        }
        let (_, label) = excess(&b);
        (0.5 * (a.lambda + b.lambda), label)
    }

    /// Runs the trace from the base case to the nose.
    pub fn run(&mut self) -> Result<AdcResult> {
        let opts = self.options;
        let limits = self.limits;
        self.solves += 1;
        let base_state = match self.pf.solve(0.0, None, &opts.solve) {
            Ok(s) => s,
            Err(Error::SingularJacobian) => return Err(Error::CollapseAtBase),
            Err(e) => return Err(e),
        };
        let base = self.point(0.0, base_state);
        let violations = check_limits(self.model, &base, limits);
        if let Some(v) = violations.first() {
            return Err(Error::BaseInfeasible(format!(
                "{} limit violated at {} by {:.6}",
                v.class, v.element, v.margin
            )));
        }

        let mut points = vec![base];
        let mut crossing: [Option<(f64, String)>; 2] = [None, None];
        let mut h = opts.initial_step;
        let mut easy = 0usize;
        let mut lambda_collapse = None;
        let mut cap_reached = false;
        let mut near_nose = false;
        let mut hold_magnitude = false;

        while lambda_collapse.is_none() {
            if points.len() >= opts.max_points {
                return Err(Error::Continuation(format!(
                    "no nose after {} points (λ = {})",
                    points.len(),
                    points.last().unwrap().lambda
                )));
            }
            let last = points.last().unwrap().clone();
            let direction = if points.len() == 1 {
                match self.tangent(&last) {
                    Ok(t) => t,
                    Err(Error::SingularJacobian) => return Err(Error::CollapseAtBase),
                    Err(e) => return Err(e),
                }
            } else {
                let prev = &points[points.len() - 2];
                let d = coords(&last.state, last.lambda) - coords(&prev.state, prev.lambda);
                let norm = d.norm();
                let secant = if norm > 0.0 { d / norm } else { self.tangent(&last)? };
                self.tangent_along(&last, &secant).unwrap_or(secant)
            };
            let (z, param) = self.predict_with(&last, &direction, h, !hold_magnitude);
            let corrected = self.correct(&last, &z, param);
            let jumped = |p: &ContinuationPoint| {
                let zn = coords(&p.state, p.lambda);
                let secant = &zn - coords(&last.state, last.lambda);
                let len = secant.norm();
                (&zn - &z).norm() > opts.max_correction * h
                    || (len > 0.0 && secant.dot(&direction) < opts.min_alignment * len)
            };
            let (next, iterations) = match corrected {
                Ok(r) if r.0.lambda.is_finite() && !jumped(&r.0) => r,
                failed => {
                    // holding λ cannot pass a fold just ahead of the last point
                    if failed.is_err() {
                        hold_magnitude = true;
                    }
                    h *= 0.5;
                    easy = 0;
                    if h < opts.min_step {
                        return Err(Error::Continuation(format!(
                            "step size fell below {} at λ = {}",
                            opts.min_step, last.lambda
                        )));
                    }
                    continue;
                }
            };

            hold_magnitude = false;
            if next.lambda < last.lambda {
                // past the fold: refine with shorter steps, then fit
                near_nose = true;
                if h > opts.nose_resolution && points.len() >= 2 {
                    points.pop();
                    h = (h * 0.25).max(opts.min_step);
                    easy = 0;
                    continue;
                }
                lambda_collapse = Some(fit_nose(&points, &next));
                break;
            }

            for (slot, class) in [(0, LimitClass::Voltage), (1, LimitClass::Thermal)] {
                if crossing[slot].is_some() {
                    continue;
                }
                let hit = check_limits(self.model, &next, limits).iter().any(|v| v.class == class);
                if hit {
                    crossing[slot] = Some(self.refine_crossing(class, &last, &next));
                }
            }

            if iterations <= opts.easy_iterations {
                easy += 1;
                if easy >= opts.easy_streak && !near_nose {
                    h = (h * 2.0).min(opts.max_step);
                    easy = 0;
                }
            } else {
                easy = 0;
            }
            let lam = next.lambda;
            points.push(next);
            if lam >= opts.lambda_max {
                cap_reached = true;
                lambda_collapse = Some(lam);
            }
        }

        let lambda_collapse = lambda_collapse.unwrap();
        let [cv, ct] = crossing;
        let (lambda_voltage, voltage_element) = match cv {
            Some((l, e)) if l <= lambda_collapse => (l, Some(e)),
            _ => (lambda_collapse, None),
        };
        let (lambda_thermal, thermal_element) = match ct {
            Some((l, e)) if l <= lambda_collapse => (l, Some(e)),
            _ => (lambda_collapse, None),
        };
        let load_increase_mw = self.pf_load_increase_mw();
        let adc_voltage = lambda_voltage * load_increase_mw;
        let adc_thermal = lambda_thermal * load_increase_mw;
        let adc_collapse = lambda_collapse * load_increase_mw;
        let mut binding = (LimitClass::Collapse, adc_collapse, None);
        if adc_thermal < binding.1 && thermal_element.is_some() {
            binding = (LimitClass::Thermal, adc_thermal, thermal_element.clone());
        }
        if adc_voltage <= binding.1 && voltage_element.is_some() {
            binding = (LimitClass::Voltage, adc_voltage, voltage_element.clone());
        }
        Ok(AdcResult {
            lambda_voltage,
            lambda_thermal,
            lambda_collapse,
            adc_voltage,
            adc_thermal,
            adc_collapse,
            adc_overall: adc_voltage.min(adc_thermal).min(adc_collapse),
            binding_limit: binding.0,
            binding_element: binding.2,
            voltage_element,
            thermal_element,
            load_increase_mw,
            cap_reached,
            corrector_solves: self.solves,
            trace: opts.keep_trace.then_some(ContinuationTrace { points }),
        })
    }

    fn pf_load_increase_mw(&self) -> f64 {
        self.load_increase_kw / 1000.0
    }
}

/// λ at the fold from a quadratic in cumulative arc length through the last
/// two accepted points and the first point past the fold.
fn fit_nose(points: &[ContinuationPoint], past: &ContinuationPoint) -> f64 {
    let k = points.len();
    let last = &points[k - 1];
    if k < 2 {
        return last.lambda.max(past.lambda);
    }
    let prev = &points[k - 2];
    let z0 = coords(&prev.state, prev.lambda);
    let z1 = coords(&last.state, last.lambda);
    let z2 = coords(&past.state, past.lambda);
    let s1 = (&z1 - &z0).norm();
    let s2 = s1 + (&z2 - &z1).norm();
    let (l0, l1, l2) = (prev.lambda, last.lambda, past.lambda);
    // Newton divided differences
    let d01 = (l1 - l0) / s1;
    let d12 = (l2 - l1) / (s2 - s1);
    let a = (d12 - d01) / s2;
    if !(a < 0.0) {
        return l1;
    }
    // λ(s) = l0 + d01 s + a s (s − s1)
    let b = d01 - a * s1;
    let s_star = -b / (2.0 * a);
    let peak = l0 + b * s_star + a * s_star * s_star;
    if peak.is_finite() && peak >= l1 {
        peak
    } else {
        l1
    }
}

/// Computes the three ADC values of one realization.
pub fn trace_adc(
    model: &FeederModel,
    ybus: &AdmittanceMatrix,
    direction: &VariationVector,
    options: &ContinuationOptions,
) -> Result<AdcResult> {
    Tracer::new(model, ybus, direction, *options)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::{build_admittance, load_feeder};

    fn radial(z: (f64, f64), base_load: (f64, f64), ampacity: f64) -> FeederModel {
        let doc = format!(
            r#"{{
              "name": "radial",
              "buses": [
                {{"id": "s", "type": "slack", "phases": "ABC", "base_kv": 4.16, "v0_pu": 1.0}},
                {{"id": "r", "type": "pq", "phases": "A", "base_kv": 4.16}}
              ],
              "branches": [
                {{"id": "l", "from": "s", "to": "r", "phases": "A",
                  "z_ohm": [[[{}, {}]]], "ampacity_a": {ampacity}, "kind": {{"type": "line"}}}}
              ],
              "loads": [{{"bus": "r", "phase": "A", "p_kw": {}, "q_kvar": {}}}],
              "generators": [],
              "limits": {{"v_min_pu": 0.0001, "v_max_pu": 10.0}}
            }}"#,
            z.0, z.1, base_load.0, base_load.1
        );
        load_feeder(&doc).unwrap()
    }

    fn direction(model: &FeederModel, p_kw: f64, q_kvar: f64) -> VariationVector {
        let mut b = VariationVector::zeros(model.node_count());
        b.dp_kw[3] = -p_kw;
        b.dq_kvar[3] = -q_kvar;
        b.load_increase_kw = p_kw;
        b
    }

    /// Maximum receiving-end power of a source E behind impedance Z for a load
    /// at power-factor angle φ: S = E²/(2|Z|(1 + cos(β − φ))).
    fn closed_form_nose(model: &FeederModel, z: (f64, f64), phi: f64) -> f64 {
        let zb = model.base_ohm(0);
        let (r, x) = (z.0 / zb, z.1 / zb);
        let mag = r.hypot(x);
        let beta = x.atan2(r);
        let s = 1.0 / (2.0 * mag * (1.0 + (beta - phi).cos()));
        s * phi.cos() * crate::feeder::BASE_KVA_PHASE
    }

    #[test]
    fn two_bus_nose_matches_closed_form() {
        for (z, pf) in [((0.0, 8.0), 1.0), ((2.0, 8.0), 0.9), ((3.0, 4.0), 0.8)] {
            let model = radial(z, (0.0, 0.0), 1e6);
            let y = build_admittance(&model).unwrap();
            let phi = f64::acos(pf);
            let b = direction(&model, 100.0, 100.0 * phi.tan());
            let res = trace_adc(&model, &y, &b, &ContinuationOptions::default()).unwrap();
            let expected = closed_form_nose(&model, z, phi);
            let got = res.lambda_collapse * 100.0;
            assert!((got / expected - 1.0).abs() < 1e-3, "{got} vs {expected}");
            assert_eq!(res.binding_limit, LimitClass::Collapse);
        }
    }

    #[test]
    fn zero_direction_rejected() {
        let model = radial((1.0, 3.0), (10.0, 2.0), 1e6);
        let y = build_admittance(&model).unwrap();
        let b = VariationVector::zeros(model.node_count());
        assert!(matches!(
            trace_adc(&model, &y, &b, &ContinuationOptions::default()),
            Err(Error::ZeroDirection)
        ));
    }

    #[test]
    fn overloaded_base_is_infeasible() {
        let model = radial((1.0, 3.0), (300.0, 100.0), 10.0);
        let y = build_admittance(&model).unwrap();
        let b = direction(&model, 10.0, 0.0);
        match trace_adc(&model, &y, &b, &ContinuationOptions::default()) {
            Err(Error::BaseInfeasible(msg)) => assert!(msg.contains("thermal"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crossings_refined_and_scale_free() {
        let mut model = radial((2.0, 8.0), (20.0, 8.0), 150.0);
        let mut doc = model.document().clone();
        doc.limits.v_min_pu = 0.9;
        model = FeederModel::from_document(doc).unwrap();
        let y = build_admittance(&model).unwrap();
        let b = direction(&model, 100.0, 40.0);
        let opts = ContinuationOptions {
            keep_trace: true,
            ..Default::default()
        };
        let r1 = trace_adc(&model, &y, &b, &opts).unwrap();
        assert_eq!(r1.voltage_element.as_deref(), Some("r.A"));
        assert!(r1.thermal_element.is_some());
        assert!(r1.lambda_voltage < r1.lambda_collapse);
        assert!(r1.lambda_thermal < r1.lambda_collapse);

        let pf = PowerFlow::new(&model, &y, &b).unwrap();
        let at_v = pf.solve(r1.lambda_voltage, None, &SolveOptions::default()).unwrap();
        assert!((at_v.vm[3] - 0.9).abs() < 1e-4);
        let at_t = pf.solve(r1.lambda_thermal, None, &SolveOptions::default()).unwrap();
        let loading = branch_currents(&model, &y, &at_t)[0].loading();
        assert!((loading - 1.0).abs() < 1e-3);

        let lambdas: Vec<f64> = r1.trace.as_ref().unwrap().points.iter().map(|p| p.lambda).collect();
        assert!(lambdas.windows(2).all(|w| w[1] > w[0]));

        let r2 = trace_adc(&model, &y, &b.scaled(2.5), &opts).unwrap();
        for class in LimitClass::ALL {
            assert!((r2.lambda(class) * 2.5 / r1.lambda(class) - 1.0).abs() < 1e-5, "{class} {} {}", r2.lambda(class) * 2.5, r1.lambda(class));
            assert!((r2.adc(class) / r1.adc(class) - 1.0).abs() < 1e-5, "{class}");
        }
    }
}
