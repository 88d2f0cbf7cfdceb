use std::path::Path;

use dirac_ee::area_law_harness::{run_sweep, run_sweeps, RegionGenerator, RegionKind};
use dirac_ee::config::ExperimentConfig;
use dirac_ee::dirac_symbols::{CutoffSpec, DiracParams};
use dirac_ee::entropy_functions::RenyiOrder;
use dirac_ee::lattice_model::{LatticeKernel, LatticeOptions, TorusLattice};
use dirac_ee::Error;

fn small_kernel() -> LatticeKernel {
    let p = DiracParams::new(0.0, 3.0, CutoffSpec::exponential()).unwrap();
    let opts = LatticeOptions {
        allow_small_margin: true,
        ..LatticeOptions::default()
    };
    LatticeKernel::build(&p, &TorusLattice::new(12.0, 12).unwrap(), &opts).unwrap()
}

const CUBE: RegionGenerator = RegionGenerator {
    kind: RegionKind::Cube,
    size: 1.0,
};

#[test]
fn sweep_is_monotone_and_matches_single_order_runs() {
    let k = small_kernel();
    let orders = [RenyiOrder::new(0.5).unwrap(), RenyiOrder::von_neumann()];
    let ls = [2.0, 3.0, 4.0, 5.0];
    let both = run_sweeps(&k, &CUBE, &ls, &orders).unwrap();
    for (rec, &order) in both.iter().zip(&orders) {
        let single = run_sweep(&k, &CUBE, &ls, order).unwrap();
        assert_eq!(rec.rows, single.rows);
        assert!(rec.rows.windows(2).all(|w| w[1].entropy > w[0].entropy));
        assert!(rec.fit.c2 > 0.0);
    }
}

#[test]
fn sweep_inputs_are_validated() {
    let k = small_kernel();
    let order = RenyiOrder::von_neumann();
    assert!(matches!(run_sweep(&k, &CUBE, &[1.0, 1.0], order), Err(Error::InvalidArgument(_))));
    assert!(matches!(run_sweep(&k, &CUBE, &[3.0, 2.0, 4.0], order), Err(Error::InvalidArgument(_))));
    // 13^3 sites exceed the dense limit; 12 is the largest fitting cube
    let p = DiracParams::new(0.0, 3.0, CutoffSpec::exponential()).unwrap();
    let opts = LatticeOptions {
        allow_small_margin: true,
        ..LatticeOptions::default()
    };
    let big = LatticeKernel::build(&p, &TorusLattice::new(14.0, 14).unwrap(), &opts).unwrap();
    match run_sweep(&big, &CUBE, &[11.0, 12.0, 13.0], order) {
        Err(Error::Size(msg)) => assert!(msg.contains("largest admissible L in this sweep is 12"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.conf");
    let c = ExperimentConfig::load(&path).unwrap();
    assert_eq!(c.l_values().unwrap().len(), 7);
    assert_eq!(c.dirac_params().unwrap().epsilon, 2.0);
    let (lat, opts) = c.torus().unwrap();
    assert_eq!(lat.spacing(), 1.0);
    assert!(opts.allow_coarse);
}
