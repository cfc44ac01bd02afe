use mvavg::measure::{moments, w2_1d, w2_bruteforce, w2_coupling_bound, SampleSet};
use mvavg::spatial::{mode_project, sine_mode, Field, Grid1D, LaplacianOp, Norm};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()
}

#[test]
fn weighted_moments_by_direct_sum() {
    let m = SampleSet::<f64>::weighted(vec![vec![1.0], vec![-1.0], vec![2.0]], vec![0.25, 0.25, 0.5]).unwrap();
    let mm = moments(&m, &Norm::Euclidean).unwrap();
    let mean: f64 = 0.25 * 1.0 + -0.25 + 0.5 * 2.0;
    let m2: f64 = 0.25 * 1.0 + 0.25 * 1.0 + 0.5 * 4.0;
    assert!((mm.mean[0] - mean).abs() < 1e-15);
    assert!((mm.second_moment - m2).abs() < 1e-15);
    assert!(mm.second_moment >= mm.mean[0] * mm.mean[0]);
}

#[test]
fn sorted_coupling_is_optimal_against_every_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let a = SampleSet::scalars(&cloud(&mut rng, n)).unwrap();
        let b = SampleSet::scalars(&cloud(&mut rng, n)).unwrap();
        let fast = w2_1d(&a, &b).unwrap();
        assert!((fast - w2_bruteforce(&a, &b).unwrap()).abs() < 1e-12);
        assert!(fast <= w2_coupling_bound(&a, &b).unwrap() + 1e-12);
        assert_eq!(fast, w2_1d(&b, &a).unwrap());
        assert_eq!(w2_1d(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn two_sample_pairings_enumerated_by_hand() {
    let a = SampleSet::scalars(&[0.0, 1.0]).unwrap();
    let b = SampleSet::scalars(&[0.0, 3.0]).unwrap();
    let sorted = ((0.0f64 + 4.0) / 2.0).sqrt();
    let crossed = ((9.0f64 + 1.0) / 2.0).sqrt();
    assert!((w2_1d(&a, &b).unwrap() - sorted.min(crossed)).abs() < 1e-15);
}

#[test]
fn planar_example_resolved_by_enumeration() {
    let a = SampleSet::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let b = SampleSet::uniform(vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let identity = ((0.0 + 2.0) / 2.0f64).sqrt();
    let swapped = ((1.0 + 1.0) / 2.0f64).sqrt();
    let w = w2_bruteforce(&a, &b).unwrap();
    assert!((w - identity.min(swapped)).abs() < 1e-15);
    assert!((w - 1.0).abs() < 1e-15);
}

#[test]
fn triangle_inequality_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.random_range(1..=20);
        let [a, b, c] = [0, 1, 2].map(|_| SampleSet::scalars(&cloud(&mut rng, n)).unwrap());
        let ab = w2_1d(&a, &b).unwrap();
        let bc = w2_1d(&b, &c).unwrap();
        let ac = w2_1d(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-10);
    }
}

#[test]
fn lambda1_matches_dense_eigensolver() {
    for n in 1..=50 {
        let g = Grid1D::<f64>::new(n).unwrap();
        let op = LaplacianOp::new(g);
        let dx2 = g.dx() * g.dx();
        let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0 / dx2,
            1 => -1.0 / dx2,
            _ => 0.0,
        });
        let smallest = SymmetricEigen::new(m).eigenvalues.min();
        assert!((op.lambda1() - smallest).abs() < 1e-9 * smallest.max(1.0), "n = {n}");
    }
    let fine = LaplacianOp::new(Grid1D::<f64>::new(999).unwrap());
    assert!((fine.lambda1() - std::f64::consts::PI.powi(2)).abs() < 1e-3);
    let mut last = 0.0;
    for n in [1, 3, 7, 15, 31, 63, 127] {
        let l = LaplacianOp::new(Grid1D::<f64>::new(n).unwrap()).lambda1();
        assert!(l > last && l < std::f64::consts::PI.powi(2));
        last = l;
    }
}

#[test]
fn triple_identities_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Grid1D::<f64>::new(31).unwrap();
    let op = LaplacianOp::new(g);
    let n = g.n_interior();
    for _ in 0..50 {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut lu, mut lv) = (vec![0.0; n], vec![0.0; n]);
        op.apply_into(&u, &mut lu);
        op.apply_into(&v, &mut lv);
        assert!((g.l2_inner(&lu, &v) - g.l2_inner(&u, &lv)).abs() < 1e-10 * (1.0 + g.l2_inner(&lu, &v).abs()));
        let neg: Vec<f64> = lu.iter().map(|x| -x).collect();
        let h01 = g.h01_norm_sq(&u);
        assert!((g.l2_inner(&u, &neg) - h01).abs() < 1e-10 * h01);
        let hm1 = op.hminus1_norm_sq_slice(&v);
        assert!(g.l2_inner(&u, &v).powi(2) <= h01 * hm1 * (1.0 + 1e-12));
    }
}

#[test]
fn hminus1_single_point_inversion() {
    let g = Grid1D::<f64>::new(1).unwrap();
    let op = LaplacianOp::new(g);
    let u = Field::new(g, vec![1.0]).unwrap();
    assert!((op.hminus1_norm_sq(&u).unwrap() - 0.5 / 8.0).abs() < 1e-15);
}

#[test]
fn projection_by_direct_inner_products() {
    let g = Grid1D::<f64>::new(40).unwrap();
    let e1 = sine_mode(&g, 1);
    let e3 = sine_mode(&g, 3);
    assert!(g.l2_inner(&e1, &e3).abs() < 1e-12);
    assert!((g.l2_inner(&e1, &e1) - 1.0).abs() < 1e-12);
    let u = Field::new(g, e1.iter().zip(&e3).map(|(a, b)| a + b).collect()).unwrap();
    let p = mode_project(&u, 2).unwrap();
    for (a, b) in p.values().iter().zip(&e1) {
        assert!((a - b).abs() < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = Field::new(g, (0..40).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let once = mode_project(&w, 7).unwrap();
    let twice = mode_project(&once, 7).unwrap();
    for (a, b) in once.values().iter().zip(twice.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(g.l2_norm_sq(once.values()) <= g.l2_norm_sq(w.values()) + 1e-12);
}
