use adc_core::data::{ieee13_feeder, ieee13_scenario};
use adc_core::feeder::{build_admittance, load_feeder, AdmittanceMatrix, FeederModel, BASE_KVA_PHASE};
use adc_core::powerflow::{network_losses, PowerFlow, PowerFlowState, SolveOptions};
use adc_core::stochastic::{assemble_variation, StochasticModel, VariationVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn bundled() -> (FeederModel, AdmittanceMatrix, VariationVector) {
    let model = ieee13_feeder().unwrap();
    let y = build_admittance(&model).unwrap();
    let sm = StochasticModel::new(&ieee13_scenario().unwrap(), &model).unwrap();
    let b = assemble_variation(&sm.mean_realization(), &sm).unwrap();
    (model, y, b)
}

fn perturbed(pf: &PowerFlow) -> PowerFlowState {
    let mut state = pf.flat_start();
    for (i, (t, v)) in state.theta.iter_mut().zip(state.vm.iter_mut()).enumerate() {
        *t += 0.01 * ((i * 7 % 5) as f64 - 2.0);
        *v += 0.005 * ((i * 3 % 7) as f64 - 3.0);
    }
    state
}

/// Largest central-difference error relative to the column's scale.
fn fd_error(pf: &PowerFlow, state: &PowerFlowState, lambda: f64) -> f64 {
    let layout = pf.layout(state);
    let jac = pf.jacobian_with(state, &layout);
    let h = 1e-7;
    let mut worst: f64 = 0.0;
    for col in 0..layout.len() {
        let mut dx = vec![0.0; layout.len()];
        dx[col] = h;
        let mut plus = state.clone();
        pf.apply_update(&mut plus, &layout, &dx);
        dx[col] = -h;
        let mut minus = state.clone();
        pf.apply_update(&mut minus, &layout, &dx);
        let fp = pf.mismatch(&plus, lambda).values;
        let fm = pf.mismatch(&minus, lambda).values;
        let scale = jac.column(col).amax().max(1e-12);
        for row in 0..layout.len() {
            let fd = (fp[row] - fm[row]) / (2.0 * h);
            worst = worst.max((fd - jac[(row, col)]).abs() / scale);
        }
    }
    worst
}

#[test]
fn jacobian_matches_central_differences() {
    let (model, y, b) = bundled();
    let pf = PowerFlow::new(&model, &y, &b).unwrap();
    assert!(fd_error(&pf, &perturbed(&pf), 0.7) < 1e-6);
    let solved = pf.solve(1.0, None, &SolveOptions::default()).unwrap();
    assert!(fd_error(&pf, &solved, 1.0) < 1e-6);
}

#[test]
fn jacobian_pattern_follows_adjacency() {
    let (model, y, b) = bundled();
    let pf = PowerFlow::new(&model, &y, &b).unwrap();
    let state = pf.flat_start();
    let layout = pf.layout(&state);
    let jac = pf.jacobian_with(&state, &layout);
    for (r, &(i, _)) in layout.rows.iter().enumerate() {
        for (c, &(j, _)) in layout.rows.iter().enumerate() {
            let coupled = y.get(i, j) != Complex64::new(0.0, 0.0);
            assert_eq!(jac[(r, c)] != 0.0, coupled, "{} / {}", model.node_label(i), model.node_label(j));
        }
    }
}

#[test]
fn base_case_within_band_and_balanced() {
    let (model, y, b) = bundled();
    let pf = PowerFlow::new(&model, &y, &b).unwrap();
    let opts = SolveOptions::default();
    for lambda in [0.0, 0.5, 1.2] {
        let out = pf.solve_detailed(lambda, None, &opts).unwrap();
        let s = &out.state;
        assert!(pf.mismatch(s, lambda).values.iter().all(|m| m.abs() <= opts.tolerance));
        if lambda == 0.0 {
            assert!(s.vm.iter().all(|v| (0.9..=1.1).contains(v)));
        }
        let network = pf.node_power(s);
        let scheduled = pf.scheduled_power(s, lambda);
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..model.node_count() {
            total += if pf.is_slack(i) { network[i] } else { scheduled[i] };
        }
        let residual = total - network_losses(&model, &y, s);
        assert!(residual.norm() < 10.0 * opts.tolerance, "λ = {lambda}: {residual}");
    }
}

#[test]
fn lambda_and_direction_enter_as_a_product() {
    let (model, y, b) = bundled();
    let pf1 = PowerFlow::new(&model, &y, &b).unwrap();
    let c = 3.5;
    let b2 = b.scaled(c);
    let pf2 = PowerFlow::new(&model, &y, &b2).unwrap();
    let opts = SolveOptions::default();
    let s1 = pf1.solve(1.4, None, &opts).unwrap();
    let s2 = pf2.solve(1.4 / c, None, &opts).unwrap();
    for i in 0..model.node_count() {
        assert!((s1.vm[i] - s2.vm[i]).abs() < 1e-8);
        assert!((s1.theta[i] - s2.theta[i]).abs() < 1e-8);
    }
}

/// Implicit Z-bus fixed point: `V_L = Y_LL⁻¹ (conj(S_L / V_L) − Y_LS V_S)`.
fn fixed_point_solve(model: &FeederModel, y: &AdmittanceMatrix) -> Vec<f64> {
    let n = model.node_count();
    let slack: Vec<usize> = (0..n).filter(|&i| model.nodes()[i].bus == model.slack_bus()).collect();
    let rest: Vec<usize> = (0..n).filter(|i| !slack.contains(i)).collect();
    let inj = model.base_injections();
    let s: Vec<Complex64> = rest
        .iter()
        .map(|&i| Complex64::new(inj.p_kw[i], inj.q_kvar[i]) / BASE_KVA_PHASE)
        .collect();
    let dense = y.to_dense();
    let yll = DMatrix::from_fn(rest.len(), rest.len(), |r, c| dense[(rest[r], rest[c])]);
    let yls = DMatrix::from_fn(rest.len(), slack.len(), |r, c| dense[(rest[r], slack[c])]);
    let angles = model.reference_angles();
    let mags = model.reference_magnitudes();
    let vs = DVector::from_iterator(slack.len(), slack.iter().map(|&i| Complex64::from_polar(mags[i], angles[i])));
    let lu = yll.lu();
    let mut v = DVector::from_iterator(rest.len(), rest.iter().map(|&i| Complex64::from_polar(mags[i], angles[i])));
    for _ in 0..500 {
        let rhs = DVector::from_iterator(rest.len(), (0..rest.len()).map(|k| (s[k] / v[k]).conj())) - &yls * &vs;
        let next = lu.solve(&rhs).unwrap();
        let step = (&next - &v).iter().fold(0.0f64, |m, d| m.max(d.norm()));
        v = next;
        if step < 1e-12 {
            break;
        }
    }
    let mut out = vec![0.0; n];
    for (k, &i) in rest.iter().enumerate() {
        out[i] = v[k].norm();
    }
    for (k, &i) in slack.iter().enumerate() {
        out[i] = vs[k].norm();
    }
    out
}

#[test]
fn newton_agrees_with_fixed_point_oracle() {
    let (model, y, _) = bundled();
    let pf = PowerFlow::new(&model, &y, &VariationVector::zeros(model.node_count())).unwrap();
    let s = pf.solve(0.0, None, &SolveOptions::default()).unwrap();
    let oracle = fixed_point_solve(&model, &y);
    for i in 0..model.node_count() {
        assert!((s.vm[i] - oracle[i]).abs() < 1e-7, "{}", model.node_label(i));
    }
}

fn pv_doc(q_max: f64) -> String {
    format!(
        r#"{{
          "name": "pv",
          "buses": [
            {{"id": "s", "type": "slack", "phases": "ABC", "base_kv": 4.16, "v0_pu": 1.0}},
            {{"id": "g", "type": "pv", "phases": "A", "base_kv": 4.16, "v0_pu": 1.0}}
          ],
          "branches": [
            {{"id": "l", "from": "s", "to": "g", "phases": "A",
              "z_ohm": [[[0.5, 1.5]]], "ampacity_a": 400.0, "kind": {{"type": "line"}}}}
          ],
          "loads": [{{"bus": "g", "phase": "A", "p_kw": 80.0, "q_kvar": 40.0}}],
          "generators": [{{"id": "g1", "bus": "g", "phases": "A", "p_kw": 20.0, "q_max_kvar": {q_max}}}],
          "limits": {{"v_min_pu": 0.9, "v_max_pu": 1.1}}
        }}"#
    )
}

#[test]
fn pv_bus_switches_at_reactive_limit_and_stays_switched() {
    let model = load_feeder(&pv_doc(0.0)).unwrap();
    let y = build_admittance(&model).unwrap();
    let pf = PowerFlow::new(&model, &y, &VariationVector::zeros(model.node_count())).unwrap();
    let opts = SolveOptions::default();
    let out = pf.solve_detailed(0.0, None, &opts).unwrap();
    let node = model.node_by_id("g", adc_core::feeder::Phase::A).unwrap();
    assert_eq!(out.switches, 1);
    assert!(out.state.switched[node]);
    assert_eq!(out.state.q_gen_kvar[node], 0.0);
    assert!(out.state.vm[node] < 1.0);
    assert!(pf.mismatch(&out.state, 0.0).norm_inf() <= opts.tolerance);

    let warm = SolveOptions {
        flat_start: false,
        ..opts
    };
    let again = pf.solve_detailed(0.0, Some(&out.state), &warm).unwrap();
    assert_eq!(again.switches, 0);
    assert_eq!(again.state.switched, out.state.switched);

    // a generous limit keeps the bus regulated
    let model = load_feeder(&pv_doc(500.0)).unwrap();
    let y = build_admittance(&model).unwrap();
    let pf = PowerFlow::new(&model, &y, &VariationVector::zeros(model.node_count())).unwrap();
    let out = pf.solve_detailed(0.0, None, &opts).unwrap();
    assert_eq!(out.switches, 0);
    assert!((out.state.vm[node] - 1.0).abs() < 1e-12);
    assert!(out.state.q_gen_kvar[node] > 40.0);
}
