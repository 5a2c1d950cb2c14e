//! Foundation invariants: quaternions, vMF draws, symmetric decomposition.

use graspmc::sampling::{
    svd_symmetric, uniform_on_sphere, Matrix, UnitQuaternion, Vector, VonMisesFisher,
};
use graspmc::SimRng;
use proptest::prelude::*;
use rand::SeedableRng;

proptest! {
    #[test]
    fn canonical_quaternions_are_unit_with_nonnegative_w(q in prop::array::uniform4(-10.0..10.0f64)) {
        prop_assume!(q.iter().map(|c| c * c).sum::<f64>() > 1e-6);
        let u = UnitQuaternion::canonicalize(q).unwrap();
        prop_assert!((u.norm() - 1.0).abs() < 1e-9);
        prop_assert!(u.w() >= 0.0);
        let neg = UnitQuaternion::canonicalize(q.map(|c| -c)).unwrap();
        prop_assert_eq!(u.to_array(), neg.to_array());
    }

    #[test]
    fn vmf_draws_are_unit(seed in 0u64..10_000, kappa in 0.0..500.0f64, p in 3usize..=4) {
        let mut rng = SimRng::seed_from_u64(seed);
        let mean = uniform_on_sphere(p, &mut rng);
        let vmf = VonMisesFisher::new(mean, kappa).unwrap();
        for _ in 0..20 {
            prop_assert!((vmf.sample(&mut rng).norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_decomposition_reconstructs(
        d in 1usize..=10,
        xs in prop::collection::vec(-3.0..3.0f64, 100),
    ) {
        let a = Matrix::from_fn(d, d, |i, j| xs[i * 10 + j]);
        let m = &a * a.transpose();
        let dec = svd_symmetric(&m).unwrap();
        let rebuilt = &dec.rotation * Matrix::from_diagonal(&dec.eigenvalues) * dec.rotation.transpose();
        prop_assert!((rebuilt - &m).norm() < 1e-8 * m.norm().max(1.0));
        let sorted: Vec<f64> = dec.eigenvalues.iter().copied().collect();
        prop_assert!(sorted.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn diagonal_input_yields_its_entries() {
    let dec = svd_symmetric(&Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 4.0]))).unwrap();
    assert_eq!(dec.eigenvalues.as_slice(), &[4.0, 1.0]);
}
