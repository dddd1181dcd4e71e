//! End-to-end use of the public API: micro runs feeding the diagnostics,
//! limit runs feeding the analytics.

use lvwf_core::analytics::{invasion_criterion, StationaryModel};
use lvwf_core::diagnostics::{deviation_statistic, ks_distance, moment_monitor, MomentKind};
use lvwf_core::limit::{frozen_theta_model, wf_spatial_model, WfParams};
use lvwf_core::micro::{rescaled_frequency_run, HfpState, ScalingSchedule};
use lvwf_core::sde::{run_replicas, Observable};
use lvwf_core::{
    build_deme_graph, check_assumptions, integrate, EcologyParams, Equilibrium, GraphKind, IntegratorConfig,
    RngStream, SdeModel,
};

fn micro_setup() -> (Equilibrium, ScalingSchedule, lvwf_core::DemeGraph) {
    let eq = Equilibrium::new(EcologyParams::reference()).unwrap();
    let graph = build_deme_graph(GraphKind::CompleteUniform { demes: 3 }, 1.0).unwrap();
    (eq, ScalingSchedule::new(1.0, 1.0, 1.0), graph)
}

#[test]
fn schedule_satisfies_standing_assumptions() {
    let (eq, sched, _) = micro_setup();
    for n in [16.0, 64.0, 1024.0] {
        let report = check_assumptions(&eq.eco, &sched.params(n, &eq));
        assert!(report.overall, "N = {n}: {report:?}");
    }
}

#[test]
fn micro_moments_stay_bounded() {
    let (eq, sched, graph) = micro_setup();
    let x0 = HfpState::at_equilibrium(&eq, &[0.2, 0.5, 0.8]);
    let cfg = IntegratorConfig::new(1e-3, 0.0).with_stride(50);
    for r in 0..4 {
        let path = rescaled_frequency_run(&eq, &sched, &graph, 64.0, 0.5, &x0, &cfg, &RngStream::new(11, r)).unwrap();
        for kind in MomentKind::ALL {
            let m = moment_monitor(&path, &eq.eco, &graph, kind).unwrap();
            let peak = m.iter().copied().fold(0.0, f64::max);
            assert!(peak < 10.0 * m[0], "{}: {peak} vs initial {}", kind.name(), m[0]);
        }
        let dev = deviation_statistic(&path, &eq, &graph, 64.0).unwrap();
        assert_eq!(dev.times.len(), path.times.len());
        assert!(dev.final_integral().is_finite() && dev.final_integral() >= 0.0);
    }
}

#[test]
fn replica_results_do_not_depend_on_thread_count() {
    let wp = WfParams::new(1.0, 1.5, 1.0, 2.0).unwrap();
    let graph = build_deme_graph(GraphKind::Torus1d { demes: 5 }, 0.5).unwrap();
    let model = wf_spatial_model(wp, &graph).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 2.0).with_stride(100);
    let obs = [Observable::mean_of("mean", 0..5), Observable::component("Z0", 0)];
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_replicas(&model, |_| vec![0.5; 5], &cfg, 9, 12, &obs).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn frozen_theta_run_approaches_its_stationary_law() {
    let wp = WfParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
    let theta = 0.75;
    let model = frozen_theta_model(wp, theta).unwrap();
    assert_eq!(model.dim(), 1);
    let cfg = IntegratorConfig::new(1e-3, 200.0).with_stride(20);
    let path = integrate(&model, &[0.5], &cfg, &RngStream::new(5, 0)).unwrap();
    let samples: Vec<f64> = path.times.iter().zip(&path.states).filter(|(t, _)| **t > 20.0).map(|(_, x)| x[0]).collect();
    let table = StationaryModel::new(wp, theta).unwrap().cdf_table(2000).unwrap();
    // One path of moderate length: a loose bound that still rejects a wrong law.
    assert!(ks_distance(&samples, &table).unwrap() < 0.15);
    assert!(ks_distance(&samples, &lvwf_core::analytics::CdfTable::uniform()).unwrap() > 0.15);
}

#[test]
fn invasion_verdict_follows_selection_strength() {
    let weak = invasion_criterion(&WfParams::new(1.0, 0.1, 1.0, 2.0).unwrap()).unwrap();
    let strong = invasion_criterion(&WfParams::new(1.0, 4.0, 1.0, 2.0).unwrap()).unwrap();
    assert!(!weak.dies_out);
    assert!(strong.dies_out);
}
