use palpsim_core::engine::SceneSetup;
use palpsim_core::pathology::{Calibration, Condition, SHIPPED_CALIBRATION};
use palpsim_core::protocol::{calibrate, palpate, run_experiment, ProtocolParams};
use palpsim_core::pathology::make_preset;

#[test]
fn shipped_calibration_is_reproducible() {
    let setup = SceneSetup::default_liver();
    let seeds: Vec<u64> = (1000..1020).collect();
    let cal = calibrate(&setup, &seeds, &ProtocolParams::default()).unwrap();
    assert_eq!(cal.to_tsv(), SHIPPED_CALIBRATION);
}

#[test]
fn single_noiseless_session_is_correct() {
    let setup = SceneSetup::default_liver();
    let r = run_experiment(
        &setup,
        &[Condition::Fatty],
        &[3],
        &ProtocolParams::noiseless(),
        &Calibration::shipped(),
    )
    .unwrap();
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.trials.len(), 1);
    assert_eq!(r.count(Condition::Fatty, Condition::Fatty), 1);
    let total: usize = r.confusion.iter().flatten().sum();
    assert_eq!(total, 1);
}

#[test]
fn every_site_reaches_depth_with_quasi_static_holds() {
    let setup = SceneSetup::default_liver();
    let params = ProtocolParams::default();
    let traces = palpate(&setup, &make_preset(Condition::Normal, 0), &params, 1).unwrap();
    assert_eq!(traces.len(), 9);
    for (i, site) in traces.iter().enumerate() {
        let deepest = site.iter().filter_map(|s| s.contact.map(|c| c.depth)).fold(0.0, f64::max);
        assert!(deepest >= 0.005, "site {i} reached only {deepest}");
        let still = site.iter().filter(|s| s.contact.is_some() && s.probe.velocity.norm() < 0.005).count();
        // the smoothed velocity needs about 7 ticks to settle after each step
        assert!(still >= params.steps * (params.hold_ticks - 8), "site {i}: {still} quasi-static samples");
    }
}

#[test]
fn sessions_are_deterministic_per_seed() {
    let setup = SceneSetup::default_liver();
    let params = ProtocolParams::default();
    let p = make_preset(Condition::Cirrhosis, 5);
    assert_eq!(palpate(&setup, &p, &params, 7).unwrap(), palpate(&setup, &p, &params, 7).unwrap());
    assert_ne!(palpate(&setup, &p, &params, 7).unwrap(), palpate(&setup, &p, &params, 8).unwrap());
}
