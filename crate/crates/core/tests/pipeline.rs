use covert_a2g::detection::expected_min_dep;
use covert_a2g::oracle::{mc_expected_min_dep, mc_outage};
use covert_a2g::planner::{select_mode, Metric};
use covert_a2g::scenario::{load_scenario_str, Mode, Scenario};
use covert_a2g::throughput::{link_metrics, snr_threshold};

#[test]
fn config_text_resolves_to_defaults() {
    let (_, from_text) = load_scenario_str("", false).unwrap();
    assert_eq!(from_text, Scenario::default());
    let (cfg, sc) = load_scenario_str("power.p_a_dbm = 10\nnoise.rho_db = 3\n", false).unwrap();
    assert!((sc.p_a - 10.0).abs() < 1e-12);
    assert_eq!(cfg.hash_hex().len(), 64);
    assert!(load_scenario_str("alice.x = 3000\n", false).is_err());
    assert!(load_scenario_str("alice.x = 3000\n", true).is_ok());
}

#[test]
fn om_link_agrees_with_monte_carlo() {
    let sc = Scenario::default();
    let uav = sc.alice;
    let dep = expected_min_dep(&sc, uav, sc.p_a, Mode::Om).unwrap().value;
    let mc = mc_expected_min_dep(&sc, uav, sc.p_a, Mode::Om, 200_000, 7).unwrap();
    assert!((dep - mc.mean).abs() < 0.02_f64.max(4.0 * mc.std_error), "{dep} vs {}", mc.mean);

    let m = link_metrics(&sc, uav, sc.p_a, sc.r_b, Mode::Om).unwrap();
    let g = snr_threshold(sc.r_b, sc.band(Mode::Om).bandwidth);
    let mc = mc_outage(&sc, uav, sc.p_a, g, Mode::Om, 200_000, 8).unwrap();
    assert!((m.p_out - mc.mean).abs() < 0.02_f64.max(4.0 * mc.std_error));
    assert!((m.ecr - sc.r_b * (1.0 - m.p_out)).abs() < 1e-6 * sc.r_b);
    assert!(m.csc > 0.0);
}

#[test]
fn mode_selection_is_covert_and_picks_the_larger_objective() {
    let sc = Scenario::default();
    for metric in [Metric::Ecr, Metric::Csc] {
        let d = select_mode(&sc, sc.alice, metric).unwrap();
        assert_eq!(d.hybrid(), d.objective_om.max(d.objective_dm));
        for (mode, r) in [(Mode::Om, &d.om), (Mode::Dm, &d.dm)] {
            assert!(r.p_a_opt <= sc.p_max * (1.0 + 1e-12));
            if r.feasible {
                let dep = expected_min_dep(&sc, sc.alice, r.p_a_opt, mode).unwrap().value;
                assert!(dep >= 1.0 - sc.epsilon - 1e-6, "{metric:?} {mode:?}: {dep}");
            }
        }
    }
}
