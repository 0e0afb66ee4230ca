//! Scratch diagnostics (deleted before delivery).
use nalgebra::Matrix6;
use stiffbuck_core::pathtrace::{trace, MechState, Mechanism, PathPoint};
use stiffbuck_core::scenarios::{by_name, scenario_names, Built};
use stiffbuck_core::stability::classify;
use stiffbuck_core::stiffness::{fd_stiffness_probe, kc_frobenius, kc_full, kc_reduced};
use stiffbuck_core::{tol, ChainModel, EquilibriumState, SolverSettings};

fn rel(a: &Matrix6<f64>, b: &Matrix6<f64>) -> f64 {
    let s = a.norm().max(b.norm());
    if s > 0.0 { (a - b).norm() / s } else { 0.0 }
}

struct St { scenario: &'static str, delta: f64, chain: ChainModel, state: EquilibriumState }

fn states() -> Vec<St> {
    let settings = SolverSettings::default();
    let mut out = Vec::new();
    for name in scenario_names() {
        let sc = by_name(name).unwrap().unwrap();
        let mech = match &sc.built { Built::Chain(c) => Mechanism::Chain(c), Built::Assembly(a) => Mechanism::Assembly(a) };
        let path: Vec<PathPoint> = trace(mech, &sc.default_ray, sc.suggested_delta_max, sc.suggested_steps, &settings).unwrap();
        let chains: Vec<&ChainModel> = match &sc.built { Built::Chain(c) => vec![c], Built::Assembly(a) => a.chains().iter().collect() };
        for p in &path {
            if !p.converged { continue; }
            match &p.state {
                MechState::Chain(s) => out.push(St { scenario: sc.name, delta: p.delta, chain: chains[0].clone(), state: s.clone() }),
                MechState::Assembly(a) => for (c, s) in chains.iter().zip(&a.chain_states) {
                    out.push(St { scenario: sc.name, delta: p.delta, chain: (*c).clone(), state: s.clone() });
                },
            }
        }
    }
    out
}

#[test]
fn diag_routes() {
    let mut rows = Vec::new();
    for st in states() {
        let full = kc_full(&st.chain, &st.state).unwrap();
        if !full.singular_directions.is_empty() { continue; }
        let red = kc_reduced(&st.chain, &st.state).unwrap();
        let fro = kc_frobenius(&st.chain, &st.state).unwrap();
        let g = rel(&full.k_c, &red.k_c).max(rel(&full.k_c, &fro)).max(rel(&red.k_c, &fro));
        let v = classify(&st.chain, &st.state, tol::CRITICAL_BAND).unwrap();
        rows.push((g, st.scenario, st.delta, full.condition, v.min_eigenvalue,
                   rel(&full.k_c, &red.k_c), rel(&full.k_c, &fro), rel(&red.k_c, &fro)));
    }
    rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    eprintln!("top 25 route gaps (gap scen delta cond min_eig | fr-red fr-fro red-fro):");
    for r in rows.iter().take(25) {
        eprintln!("  {:10.3e} {:14} d={:<9.5} cond={:9.3e} me={:10.3e} | {:9.2e} {:9.2e} {:9.2e}",
                  r.0, r.1, r.2, r.3, r.4, r.5, r.6, r.7);
    }
    let n = rows.len();
    let over = rows.iter().filter(|r| r.0 > 1e-9).count();
    eprintln!("total {n}, over 1e-9: {over}");
}

#[test]
fn diag_probe() {
    let mut checked = 0;
    eprintln!("probe gaps on candidate states:");
    for st in states() {
        if checked >= 40 { break; }
        if !(st.scenario.starts_with("modelB") || st.scenario.starts_with("modelC")) { continue; }
        if st.delta <= 0.0 { continue; }
        let v = classify(&st.chain, &st.state, tol::CRITICAL_BAND).unwrap();
        if v.classification != stiffbuck_core::stability::Classification::Stable || v.min_eigenvalue < 1e-2 { continue; }
        let red = kc_reduced(&st.chain, &st.state).unwrap();
        let probe = fd_stiffness_probe(&st.chain, &st.state, tol::FD_STEP).unwrap();
        let g = rel(&red.k_c, &probe.matrix);
        eprintln!("  {:14} d={:<9.5} me={:10.3e} cond={:9.3e} gap={:10.3e} failed={:?}",
                  st.scenario, st.delta, v.min_eigenvalue, red.condition, g, probe.failed);
        checked += 1;
    }
}

#[test]
fn diag_probe_dump() {
    for st in states() {
        if st.scenario != "modelB-S" || (st.delta - 0.00128).abs() > 1e-9 { continue; }
        let red = kc_reduced(&st.chain, &st.state).unwrap();
        for step in [1e-5, 1e-6, 1e-7] {
            let probe = fd_stiffness_probe(&st.chain, &st.state, step).unwrap();
            let g = rel(&red.k_c, &probe.matrix);
            eprintln!("step {step:.0e}: gap {g:.3e}");
            let d = probe.matrix - red.k_c;
            for i in 0..6 {
                let row: Vec<String> = (0..6).map(|j| format!("{:9.2e}", d[(i, j)])).collect();
                eprintln!("   {}", row.join(" "));
            }
        }
        eprintln!("analytic k_c:");
        for i in 0..6 {
            let row: Vec<String> = (0..6).map(|j| format!("{:10.3e}", red.k_c[(i, j)])).collect();
            eprintln!("   {}", row.join(" "));
        }
        eprintln!("wrench: f={:?} m={:?}", st.state.wrench.force, st.state.wrench.moment);
        break;
    }
}

#[test]
fn diag_path_slope() {
    let settings = SolverSettings::default();
    let sc = by_name("modelB-S").unwrap().unwrap();
    let mech = match &sc.built { Built::Chain(c) => Mechanism::Chain(c), Built::Assembly(_) => unreachable!() };
    let path = trace(mech, &sc.default_ray, sc.suggested_delta_max, sc.suggested_steps, &settings).unwrap();
    eprintln!("delta    F_along      path-slope   kc_xx(analytic)  probe_xx   trace_tangent");
    for w in path.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if !(a.converged && b.converged && c.converged) { continue; }
        if b.delta < 0.0011 || b.delta > 0.0017 { continue; }
        let slope = (c.f_along - a.f_along) / (c.delta - a.delta);
        if let MechState::Chain(s) = &b.state {
            let chain = match &sc.built { Built::Chain(c) => c, _ => unreachable!() };
            let red = kc_reduced(chain, s).unwrap();
            let probe = fd_stiffness_probe(chain, s, 1e-6).unwrap();
            eprintln!("{:.5}  {:10.6}  {:10.5}  {:12.6}  {:10.6}  {:10.6}",
                b.delta, b.f_along, slope, red.k_c[(0, 0)], probe.matrix[(0, 0)], b.tangent_stiffness);
        }
    }
}

#[test]
fn diag_clean_postbuckle() {
    use stiffbuck_core::equilibrium::solve_for_pose;
    use nalgebra::Vector6;
    let sc = by_name("modelB-S").unwrap().unwrap();
    let chain = match &sc.built { Built::Chain(c) => c, _ => unreachable!() };
    let mut settings = SolverSettings::default();
    settings.residual_tol = 1e-13;
    settings.restart_count = 20;
    let ray: Vector6<f64> = sc.default_ray;
    for d in [0.0012, 0.005, 0.01] {
        let target = {
            let reference = chain.forward_pose(&chain.reference_configuration());
            stiffbuck_core::Pose::new(
                reference.position + d * ray.fixed_rows::<3>(0).into_owned(),
                reference.rotation,
            )
        };
        let st = solve_for_pose(&chain, &target, &chain.reference_configuration(), &settings);
        let v = classify(chain, &st, tol::CRITICAL_BAND).unwrap();
        let red = kc_reduced(chain, &st).unwrap();
        eprintln!("d={d}: converged={} res={:.2e} me={:.4} F={:.6} kc_xx={:.6}",
            st.converged, st.residual_norm, v.min_eigenvalue, -st.wrench.force.x, red.k_c[(0,0)]);
        for step in [1e-5, 1e-6, 1e-7] {
            let probe = fd_stiffness_probe(chain, &st, step).unwrap();
            eprintln!("   step {step:.0e}: probe_xx={:.6} gap_xx={:9.2e} relF={:9.2e}",
                probe.matrix[(0,0)], (probe.matrix[(0,0)] - red.k_c[(0,0)]).abs(),
                rel(&red.k_c, &probe.matrix));
        }
    }
}

#[test]
fn diag_two_hinge() {
    use stiffbuck_core::chain::{JointAxis, JointKind, TaskSpace, Element};
    use stiffbuck_core::elasticity::SpringBlock;
    use stiffbuck_core::equilibrium::solve_for_pose;
    use nalgebra::Vector6;
    let spring = |k: f64| Element::Joint(JointKind::VirtualSpring {
        axes: vec![JointAxis::RotZ],
        block: SpringBlock::scalar(k).unwrap(),
    });
    let chain = ChainModel::with_task(
        vec![spring(1.0), Element::link_x(1.0), spring(1.0), Element::link_x(1.0), spring(1.0), Element::link_x(1.0)],
        TaskSpace::planar_xy(),
    ).unwrap();
    let mut settings = SolverSettings::default();
    settings.residual_tol = 1e-13;
    // A bent loaded equilibrium: hold the tip displaced from the straight
    // reference so the hinge springs carry moment.
    let reference = chain.forward_pose(&chain.reference_configuration());
    let dt = Vector6::new(-0.3, 0.25, 0.0, 0.0, 0.0, 0.1);
    let target = reference.displaced(&dt);
    let st = solve_for_pose(&chain, &target, &chain.reference_configuration(), &settings);
    eprintln!("converged={} res={:.2e} wrench f={:?} m={:?}", st.converged, st.residual_norm,
        st.wrench.force, st.wrench.moment);
    let red = kc_reduced(&chain, &st).unwrap();
    let full = kc_full(&chain, &st).unwrap();
    eprintln!("kc_reduced (planar rows x,y,rz):");
    for i in [0usize, 1, 5] {
        eprintln!("   {:12.8} {:12.8} {:12.8}", red.k_c[(i,0)], red.k_c[(i,1)], red.k_c[(i,5)]);
    }
    eprintln!("full-vs-reduced rel {:.2e}", rel(&full.k_c, &red.k_c));
    for step in [1e-4, 1e-5, 1e-6] {
        let probe = fd_stiffness_probe(&chain, &st, step).unwrap();
        eprintln!("probe step {step:.0e}  relF gap {:.3e}:", rel(&red.k_c, &probe.matrix));
        for i in [0usize, 1, 5] {
            eprintln!("   {:12.8} {:12.8} {:12.8}", probe.matrix[(i,0)], probe.matrix[(i,1)], probe.matrix[(i,5)]);
        }
    }
    // Independent oracle: second difference of the optimal-value energy.
    let energy_at = |dt2: Vector6<f64>| -> f64 {
        let s = solve_for_pose(&chain, &target.displaced(&dt2), &st.cfg, &settings);
        assert!(s.converged);
        s.energy
    };
    let h = 1e-4;
    let comps = [0usize, 1, 5];
    eprintln!("energy-hessian oracle (step {h:.0e}):");
    for &i in &comps {
        let mut row = Vec::new();
        for &j in &comps {
            let mut pp = Vector6::zeros(); pp[i] += h; pp[j] += h;
            let mut pm = Vector6::zeros(); pm[i] += h; pm[j] -= h;
            let mut mp = Vector6::zeros(); mp[i] -= h; mp[j] += h;
            let mut mm = Vector6::zeros(); mm[i] -= h; mm[j] -= h;
            let kij = (energy_at(pp) - energy_at(pm) - energy_at(mp) + energy_at(mm)) / (4.0 * h * h);
            row.push(format!("{kij:12.8}"));
        }
        eprintln!("   {}", row.join(" "));
    }
}

#[test]
fn diag_polish_postsnap() {
    use stiffbuck_core::equilibrium::solve_for_pose;
    for st in states() {
        if st.scenario != "modelB-S" || st.delta < 0.00120 || st.delta > 0.00145 { continue; }
        let mut deep = SolverSettings::default();
        deep.residual_tol = 1e-13;
        let polished = solve_for_pose(&st.chain, &st.state.target, &st.state.cfg, &deep);
        let red_raw = kc_reduced(&st.chain, &st.state).unwrap();
        let red = kc_reduced(&st.chain, &polished).unwrap();
        let v = classify(&st.chain, &polished, tol::CRITICAL_BAND).unwrap();
        eprintln!("d={:.5} raw_res={:.1e} polished_res={:.1e} me={:.4} kc_xx raw={:.6} polished={:.6} shift={:.2e}",
            st.delta, st.state.residual_norm, polished.residual_norm, v.min_eigenvalue,
            red_raw.k_c[(0,0)], red.k_c[(0,0)], rel(&red_raw.k_c, &red.k_c));
        for step in [1e-5, 1e-6] {
            let probe = fd_stiffness_probe(&st.chain, &polished, step).unwrap();
            eprintln!("   step {step:.0e}: probe_xx={:.6} relF={:.3e}",
                probe.matrix[(0,0)], rel(&red.k_c, &probe.matrix));
        }
    }
}

#[test]
fn diag_force_grid() {
    use stiffbuck_core::equilibrium::solve_for_pose;
    use nalgebra::Vector6;
    for st in states() {
        if st.scenario != "modelB-S" || (st.delta - 0.00128).abs() > 1e-9 { continue; }
        let mut deep = SolverSettings::default();
        deep.residual_tol = 1e-13;
        let base = solve_for_pose(&st.chain, &st.state.target, &st.state.cfg, &deep);
        let red = kc_reduced(&st.chain, &base).unwrap();
        let k = red.k_c[(0, 0)];
        let f0 = base.wrench.force.x;
        eprintln!("base F_x={f0:.12} analytic k_xx={k:.8}");
        eprintln!("      h        F_x(h)          (F-F0)/h      F-F0-k*h      cfg_dist     res");
        for m in [-20.0, -10.0, -5.0, -2.0, -1.0, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let h = m * 1e-6;
            let mut dt = Vector6::zeros();
            dt[0] = h;
            let s = solve_for_pose(&st.chain, &base.target.displaced(&dt), &base.cfg, &deep);
            let fx = s.wrench.force.x;
            let mut dist = 0.0f64;
            let (bq, bt) = (&base.cfg.q, &base.cfg.theta);
            let (sq, stt) = (&s.cfg.q, &s.cfg.theta);
            for i in 0..bq.len() { dist += (bq[i] - sq[i]).powi(2); }
            for i in 0..bt.len() { dist += (bt[i] - stt[i]).powi(2); }
            eprintln!("  {h:9.1e}  {fx:.12}  {:12.8}  {:12.4e}  {:10.3e}  {:7.1e}",
                (fx - f0) / h, fx - f0 - k * h, dist.sqrt(), s.residual_norm);
        }
        break;
    }
}

#[test]
fn diag_reduced_pieces() {
    use nalgebra::DMatrix;
    for st in states() {
        if st.scenario != "orthoglide-Q2" || (st.delta - 0.00080).abs() > 1e-9 { continue; }
        let full = kc_full(&st.chain, &st.state).unwrap();
        let red = kc_reduced(&st.chain, &st.state).unwrap();
        if rel(&full.k_c, &red.k_c) < 1e-7 { continue; }
        eprintln!("state found: gap {:.3e} spring_critical={}", rel(&full.k_c, &red.k_c), red.spring_critical);
        let (jt, jq) = st.chain.masked_jacobians(&st.state.cfg);
        let hess = st.chain.torque_hessians(&st.state.cfg, &st.state.wrench.as_vector());
        let core: DMatrix<f64> = st.chain.k_theta() - &hess.h_thetatheta;
        let kf_lu = core.clone().try_inverse().unwrap();
        let residual_lu = (&core * &kf_lu - DMatrix::<f64>::identity(core.nrows(), core.ncols())).amax();
        eprintln!("condensation: dim {} lu-residual {:.2e}", core.nrows(), residual_lu);
        let svd = core.clone().svd(false, false);
        eprintln!("condensation singular values: max {:.3e} min {:.3e}",
            svd.singular_values.amax(), svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min));
        // Rebuild the reduced bordered system with the LU condensation and
        // examine its spectrum.
        let h_thetaq = hess.h_qtheta.transpose();
        let a = &jt * &kf_lu * jt.transpose();
        let b = &jq + &jt * &kf_lu * &h_thetaq;
        let d = &hess.h_qq + &hess.h_qtheta * &kf_lu * &h_thetaq;
        let (k, n) = (a.nrows(), d.nrows());
        let mut bordered = DMatrix::<f64>::zeros(k + n, k + n);
        bordered.view_mut((0, 0), (k, k)).copy_from(&a);
        bordered.view_mut((0, k), (k, n)).copy_from(&b);
        bordered.view_mut((k, 0), (n, k)).copy_from(&b.transpose());
        bordered.view_mut((k, k), (n, n)).copy_from(&d);
        let bsvd = bordered.clone().svd(false, false);
        let bmax = bsvd.singular_values.amax();
        let bmin = bsvd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        eprintln!("reduced bordered: dim {} svals max {:.3e} min {:.3e} cond {:.3e}", k + n, bmax, bmin, bmax / bmin);
        let binv = bordered.clone().try_inverse().unwrap();
        let bres = (&bordered * &binv - DMatrix::<f64>::identity(k + n, k + n)).amax();
        let kc_lu = binv.view((0, 0), (k, k)).into_owned();
        let kc_full_masked = {
            let mut out = DMatrix::<f64>::zeros(k, k);
            for (ci, i) in st.chain.task().components().enumerate() {
                for (cj, j) in st.chain.task().components().enumerate() {
                    out[(ci, cj)] = full.k_c[(i, j)];
                }
            }
            out
        };
        let gap_lu = (&kc_lu - &kc_full_masked).norm() / kc_full_masked.norm();
        eprintln!("LU-everything reduced vs full: {:.3e} (bordered inv residual {:.2e})", gap_lu, bres);
        break;
    }
}

fn ruiz(matrix: &nalgebra::DMatrix<f64>) -> nalgebra::DVector<f64> {
    let size = matrix.nrows();
    let mut scales = nalgebra::DVector::from_element(size, 1.0);
    let mut work = matrix.clone();
    for _ in 0..8 {
        let mut settled = true;
        let mut step = nalgebra::DVector::from_element(size, 1.0);
        for i in 0..size {
            let r = work.row(i).amax();
            if r > 0.0 {
                step[i] = 1.0 / r.sqrt();
                if (r - 1.0).abs() > 1e-2 { settled = false; }
            }
        }
        for i in 0..size { for j in 0..size { work[(i, j)] *= step[i] * step[j]; } }
        scales.component_mul_assign(&step);
        if settled { break; }
    }
    scales
}

#[test]
fn diag_bisect_stage() {
    use nalgebra::DMatrix;
    for st in states() {
        if st.scenario != "orthoglide-Q2" || (st.delta - 0.00080).abs() > 1e-9 { continue; }
        let full = kc_full(&st.chain, &st.state).unwrap();
        let red = kc_reduced(&st.chain, &st.state).unwrap();
        if rel(&full.k_c, &red.k_c) < 1e-7 { continue; }
        let (jt, jq) = st.chain.masked_jacobians(&st.state.cfg);
        let hess = st.chain.torque_hessians(&st.state.cfg, &st.state.wrench.as_vector());
        let core: DMatrix<f64> = st.chain.k_theta() - &hess.h_thetatheta;
        let m = core.nrows();
        let kf_lu = core.clone().try_inverse().unwrap();
        let dc = ruiz(&core);
        let mut core_eq = core.clone();
        for i in 0..m { for j in 0..m { core_eq[(i, j)] *= dc[i] * dc[j]; } }
        let eq_svd = core_eq.clone().svd(true, true);
        eprintln!("core_eq cond {:.3e}", eq_svd.singular_values.amax() /
            eq_svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min));
        let mut kf_eq = eq_svd.pseudo_inverse(0.0).unwrap();
        for i in 0..m { for j in 0..m { kf_eq[(i, j)] *= dc[i] * dc[j]; } }
        eprintln!("kf difference (eq-svd vs lu): rel {:.3e}", (&kf_eq - &kf_lu).norm() / kf_lu.norm());
        let kf_res_lu = (&core * &kf_lu - DMatrix::<f64>::identity(m, m)).amax();
        let kf_res_eq = (&core * &kf_eq - DMatrix::<f64>::identity(m, m)).amax();
        eprintln!("inverse residuals: lu {:.2e} eq-svd {:.2e}", kf_res_lu, kf_res_eq);
        // Stage B: bordered solve variants on the SAME (LU) pieces.
        let h_thetaq = hess.h_qtheta.transpose();
        for (label, kf) in [("lu-kf", &kf_lu), ("eq-kf", &kf_eq)] {
            let a = &jt * kf * jt.transpose();
            let b = &jq + &jt * kf * &h_thetaq;
            let d = &hess.h_qq + &hess.h_qtheta * kf * &h_thetaq;
            let (k, n) = (a.nrows(), d.nrows());
            let mut bordered = DMatrix::<f64>::zeros(k + n, k + n);
            bordered.view_mut((0, 0), (k, k)).copy_from(&a);
            bordered.view_mut((0, k), (k, n)).copy_from(&b);
            bordered.view_mut((k, 0), (n, k)).copy_from(&b.transpose());
            bordered.view_mut((k, k), (n, n)).copy_from(&d);
            let lu_inv = bordered.clone().try_inverse().unwrap();
            let db = ruiz(&bordered);
            let mut beq = bordered.clone();
            let sz = k + n;
            for i in 0..sz { for j in 0..sz { beq[(i, j)] *= db[i] * db[j]; } }
            let bsvd = beq.clone().svd(true, true);
            let bcut = 1e-13 * bsvd.singular_values.amax();
            let bcond = bsvd.singular_values.amax() / bsvd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut eq_inv = bsvd.pseudo_inverse(bcut).unwrap();
            for i in 0..sz { for j in 0..sz { eq_inv[(i, j)] *= db[i] * db[j]; } }
            let kc_a = lu_inv.view((0, 0), (k, k)).into_owned();
            let kc_b = eq_inv.view((0, 0), (k, k)).into_owned();
            eprintln!("{label}: beq cond {:.3e}; kc lu-bordered vs eq-bordered rel {:.3e}",
                bcond, (&kc_a - &kc_b).norm() / kc_a.norm());
        }
        break;
    }
}

#[test]
fn diag_svd_residual() {
    use nalgebra::DMatrix;
    for st in states() {
        if st.scenario != "orthoglide-Q2" || (st.delta - 0.00080).abs() > 1e-9 { continue; }
        let full = kc_full(&st.chain, &st.state).unwrap();
        let red = kc_reduced(&st.chain, &st.state).unwrap();
        if rel(&full.k_c, &red.k_c) < 1e-7 { continue; }
        let (jt, jq) = st.chain.masked_jacobians(&st.state.cfg);
        let hess = st.chain.torque_hessians(&st.state.cfg, &st.state.wrench.as_vector());
        let core: DMatrix<f64> = st.chain.k_theta() - &hess.h_thetatheta;
        let kf = core.clone().try_inverse().unwrap();
        let h_thetaq = hess.h_qtheta.transpose();
        let a = &jt * &kf * jt.transpose();
        let b = &jq + &jt * &kf * &h_thetaq;
        let d = &hess.h_qq + &hess.h_qtheta * &kf * &h_thetaq;
        let (k, n) = (a.nrows(), d.nrows());
        let sz = k + n;
        let mut bordered = DMatrix::<f64>::zeros(sz, sz);
        bordered.view_mut((0, 0), (k, k)).copy_from(&a);
        bordered.view_mut((0, k), (k, n)).copy_from(&b);
        bordered.view_mut((k, 0), (n, k)).copy_from(&b.transpose());
        bordered.view_mut((k, k), (n, n)).copy_from(&d);
        let db = ruiz(&bordered);
        let mut beq = bordered.clone();
        for i in 0..sz { for j in 0..sz { beq[(i, j)] *= db[i] * db[j]; } }
        let svd = beq.clone().svd(true, true);
        let rebuilt = svd.u.as_ref().unwrap()
            * DMatrix::from_diagonal(&svd.singular_values)
            * svd.v_t.as_ref().unwrap();
        eprintln!("svd reconstruction residual: {:.3e} (norm {:.3e})", (&rebuilt - &beq).norm(), beq.norm());
        let ortho_u = (svd.u.as_ref().unwrap().transpose() * svd.u.as_ref().unwrap()
            - DMatrix::<f64>::identity(sz, sz)).norm();
        let ortho_v = (svd.v_t.as_ref().unwrap() * svd.v_t.as_ref().unwrap().transpose()
            - DMatrix::<f64>::identity(sz, sz)).norm();
        eprintln!("orthogonality defects: U {:.3e} V {:.3e}", ortho_u, ortho_v);
        eprintln!("singular values: {:?}", svd.singular_values.as_slice());
        break;
    }
}
