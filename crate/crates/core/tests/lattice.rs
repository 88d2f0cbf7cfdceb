use std::f64::consts::PI;

use dirac_ee::dirac_symbols::{CutoffSpec, DiracParams};
use dirac_ee::entropy_functions::RenyiOrder;
use dirac_ee::lattice_model::{
    correlation_matrix, entanglement_entropy, schatten_commutator_slope, LatticeKernel, LatticeOptions, Region,
    TorusLattice,
};
use dirac_ee::spin_algebra::SpinorMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn relaxed() -> LatticeOptions {
    LatticeOptions {
        allow_small_margin: true,
        ..LatticeOptions::default()
    }
}

fn kernel(m: f64, eps: f64, box_side: f64, n: usize) -> LatticeKernel {
    let p = DiracParams::new(m, eps, CutoffSpec::exponential()).unwrap();
    LatticeKernel::build(&p, &TorusLattice::new(box_side, n).unwrap(), &relaxed()).unwrap()
}

#[test]
fn full_torus_spectrum_is_the_grid_spectrum() {
    let k = kernel(0.3, 3.0, 4.0, 4);
    let lat = k.lattice;
    let all: Vec<[usize; 3]> = (0..lat.sites()).map(|i| [i / 16, (i / 4) % 4, i % 4]).collect();
    let c = correlation_matrix(&k, &Region::voxels(&lat, all).unwrap()).unwrap();
    let got = c.matrix.eigenvalues(1e-10).unwrap();
    let mut expect: Vec<f64> = k.spectra().iter().flatten().copied().collect();
    expect.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn off_diagonal_block_matches_direct_momentum_sum() {
    let k = kernel(0.0, 3.0, 6.0, 6);
    let lat = k.lattice;
    let (a, b) = ([0, 0, 0], [3, 1, 5]);
    let region = Region::voxels(&lat, vec![a, b]).unwrap();
    let c = correlation_matrix(&k, &region).unwrap();
    let n = lat.points_per_dim;
    let dk = 2.0 * PI / lat.box_side;
    let x = [0i64 - 3, 0 - 1, 0 - 5].map(|v| v as f64 * lat.spacing());
    let mut direct = SpinorMatrix::zeros();
    for i in 0..lat.sites() {
        let idx = [i / (n * n), (i / n) % n, i % n];
        let q = idx.map(|v| dk * lat.fold(v) as f64);
        let phase = q[0] * x[0] + q[1] * x[1] + q[2] * x[2];
        direct += k.symbol(idx) * Complex64::from_polar(1.0 / lat.sites() as f64, phase);
    }
    for r in 0..4 {
        for s in 0..4 {
            assert!((c.matrix.get(r, 4 + s) - direct[(r, s)]).norm() < 1e-14);
        }
    }
}

#[test]
fn joint_rescaling_leaves_entropy_invariant() {
    // doubling box, epsilon and physical region at fixed N is the same lattice problem
    let a = kernel(0.0, 3.0, 10.0, 10);
    let b = kernel(0.0, 6.0, 20.0, 10);
    let ra = Region::cube(&a.lattice, 3.0).unwrap();
    let rb = Region::cube(&b.lattice, 6.0).unwrap();
    let order = RenyiOrder::von_neumann();
    let sa = entanglement_entropy(&correlation_matrix(&a, &ra).unwrap(), order, &a).unwrap();
    let sb = entanglement_entropy(&correlation_matrix(&b, &rb).unwrap(), order, &b).unwrap();
    assert!((sa - sb).abs() < 1e-9 * sa.abs(), "{sa} vs {sb}");
}

#[test]
fn gaussian_symbol_schatten_slope() {
    let eps: f64 = 3.0;
    let lat = TorusLattice::new(16.0, 16).unwrap();
    let p = DiracParams::new(0.0, eps, CutoffSpec::gaussian()).unwrap();
    let k = LatticeKernel::from_symbol(&p, &lat, |q| {
        let k2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
        SpinorMatrix::identity() * Complex64::new((-eps * eps * k2).exp(), 0.0)
    })
    .unwrap();
    let fit = schatten_commutator_slope(&k, 0.9, &[2.0, 3.0, 4.0, 5.0], |a| Region::cube(&lat, a)).unwrap();
    assert!((fit.slope - 2.0).abs() <= 0.3, "{fit:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn random_regions_have_nonnegative_entropy(mask in proptest::collection::vec(any::<bool>(), 27), m in 0.0f64..1.0) {
        let k = kernel(m, 3.0, 10.0, 10);
        let sites: Vec<[usize; 3]> = mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| [4 + i / 9, 4 + (i / 3) % 3, 4 + i % 3])
            .collect();
        prop_assume!(!sites.is_empty());
        let c = correlation_matrix(&k, &Region::voxels(&k.lattice, sites).unwrap()).unwrap();
        for kappa in [0.5, 1.0, 1.5] {
            let s = entanglement_entropy(&c, RenyiOrder::new(kappa).unwrap(), &k).unwrap();
            prop_assert!(s >= -1e-9, "kappa {kappa}: {s}");
        }
    }
}
