use vfo_adr::vfo_controller::VelocityLimits;

fn report(label: &str, cfg: &vfo_adr::config::ScenarioConfig) {
    match vfo_adr::simulation::run_scenario(cfg) {
        Ok(tr) => {
            let m = vfo_adr::simulation::compute_metrics(&tr, cfg.metric_window_s).unwrap();
            println!("{label:34} OK  sup_ep={:8.4} sup_e2pi={:8.4} avg_ep={:8.4} avg_eo={:8.4} avg_nuc={:8.4} avg_tau={:8.4} max_nuc={:8.2} max_dhat={:10.1}",
                m.sup_position_error, m.sup_wrapped_error, m.avg_position_error, m.avg_orientation_error,
                m.avg_commanded_norm, m.avg_applied_force_norm, m.max_commanded, m.max_disturbance_estimate_norm);
        }
        Err(vfo_adr::simulation::RunError::Aborted { t, fault, .. }) => {
            println!("{label:34} ABORT at t={t:.3}: {fault}");
        }
        Err(e) => println!("{label:34} SETUP: {e}"),
    }
}

fn main() {
    let lim = Some(VelocityLimits { magnitude: 8.0, rate: 2.0 });

    let mut c = vfo_adr::config::scenario_a();
    c.velocity_limits = lim;
    report("A d75 limits(8,2)", &c);

    let mut c = vfo_adr::config::scenario_a();
    c.velocity_limits = Some(VelocityLimits { magnitude: 43.41, rate: 100.0 });
    report("A d75 limits(43,100)", &c);

    for (dp, do_) in [(0.25, 0.33), (0.5, 0.66)] {
        let mut c = vfo_adr::config::scenario_a();
        c.vfo.delta_p = dp;
        c.vfo.delta_o = do_;
        report(&format!("A d=({dp},{do_}) no limits"), &c);
        c.velocity_limits = lim;
        report(&format!("A d=({dp},{do_}) limits(8,2)"), &c);
    }
}
