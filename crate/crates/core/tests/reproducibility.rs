use cellhom::ergodic::{corrector, estimate_invariant, CorrectorKind};
use cellhom::fields::{build_example, ExampleName, ExampleParams};
use cellhom::sde::{simulate_ensemble, SimConfig};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let spec = build_example(ExampleName::Paper2, &ExampleParams::default()).unwrap();
    let cfg = SimConfig::new(0.005, 2.0, 0.25, 11, 24);
    let run = || simulate_ensemble(&spec, &[0.1, 0.2], &cfg).unwrap();
    let one = in_pool(1, run);
    let four = in_pool(4, run);
    assert_eq!(one, four);
    assert_ne!(one, simulate_ensemble(&spec, &[0.1, 0.2], &SimConfig { seed: 12, ..cfg }).unwrap());
}

#[test]
fn histograms_and_correctors_are_deterministic() {
    let spec = build_example(ExampleName::TaylorShear, &ExampleParams::default()).unwrap();
    let cfg = SimConfig::new(0.01, 10.0, 0.0, 5, 4);
    let a = in_pool(1, || estimate_invariant(&spec, &cfg, 16, 1.0).unwrap());
    let b = in_pool(3, || estimate_invariant(&spec, &cfg, 16, 1.0).unwrap());
    assert_eq!(a, b);
    let short = SimConfig::new(0.01, 1.0, 0.0, 5, 16);
    let c1 = in_pool(1, || corrector(&spec, spec.b(), CorrectorKind::Vector, &short, 8, 0.2, None).unwrap());
    let c2 = in_pool(2, || corrector(&spec, spec.b(), CorrectorKind::Vector, &short, 8, 0.2, None).unwrap());
    assert_eq!(c1, c2);
}
