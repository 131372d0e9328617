use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoband::model::{build_model, ModelParams};
use twoband::projections::{
    ham_average_state, ham_average_state_gram, hermitian_eigenvalues, liouvillian, max_abs, partial_trace_env, project_correlated,
    project_standard, relevant_operator, relevant_values, tensor, BandPartition, TotalDensity,
};
use twoband::state::RelevantSet;
use twoband::{Error, C64};

const TRIALS: u64 = 100;

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    let g = gaussian_matrix(rng, n);
    (&g + g.adjoint()) * C64::from(0.5)
}

fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    let g = gaussian_matrix(rng, n);
    let p = &g * g.adjoint();
    let tr = p.trace();
    p / tr
}

/// Environment state that is block diagonal over the two bands.
fn band_diagonal_reference(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> DMatrix<C64> {
    let mut r = DMatrix::zeros(n1 + n2, n1 + n2);
    r.view_mut((0, 0), (n1, n1)).copy_from(&random_density(rng, n1));
    r.view_mut((n1, n1), (n2, n2)).copy_from(&(random_density(rng, n2) * C64::from(2.0)));
    r / C64::from(3.0)
}

fn random_partition(rng: &mut ChaCha8Rng) -> BandPartition {
    let bands = rng.random_range(1..=4);
    BandPartition::new((0..bands).map(|_| rng.random_range(1..=4)).collect()).unwrap()
}

#[test]
fn both_projections_are_idempotent_and_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..TRIALS {
        let part = random_partition(&mut rng);
        let d = part.env_dim();
        let rho = random_hermitian(&mut rng, 2 * d);
        let reference = random_density(&mut rng, d);

        let ps = project_standard(&rho, &reference).unwrap();
        assert!(max_abs(&(project_standard(&ps, &reference).unwrap() - &ps)) <= 1e-13);
        let pc = project_correlated(&rho, &part).unwrap();
        assert!(max_abs(&(project_correlated(&pc, &part).unwrap() - &pc)) <= 1e-13);

        let rs = partial_trace_env(&rho).unwrap();
        assert!(partial_trace_env(&ps).unwrap().max_abs_diff(&rs) <= 1e-13);
        assert!(partial_trace_env(&pc).unwrap().max_abs_diff(&rs) <= 1e-13);
        assert!((pc.trace() - rho.trace()).norm() <= 1e-13);
        assert!((ps.trace() - rho.trace()).norm() <= 1e-13);

        // the correlated projection keeps every band's reduced block
        assert!(relevant_values(&pc, &part).unwrap().values().iter()
            .zip(relevant_values(&rho, &part).unwrap().values())
            .all(|(a, b)| (a - b).norm() <= 1e-13));
    }
}

#[test]
fn range_members_are_fixed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let part = BandPartition::new(vec![2, 3, 1]).unwrap();
    let reference = random_density(&mut rng, 6);
    let sys = Matrix2::from_fn(|i, j| C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
    let product = tensor(&sys, &reference);
    assert!(max_abs(&(project_standard(&product, &reference).unwrap() - &product)) <= 1e-14);

    let mut correlated = DMatrix::zeros(12, 12);
    for a in 0..3 {
        let block = random_hermitian(&mut rng, 2);
        let sys = Matrix2::from_fn(|i, j| block[(i, j)]);
        correlated += tensor(&sys, &(part.projector(a) / C64::from(part.size(a) as f64)));
    }
    assert!(max_abs(&(project_correlated(&correlated, &part).unwrap() - &correlated)) <= 1e-14);
}

#[test]
fn correlated_projection_preserves_positivity_and_band_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..TRIALS {
        let part = random_partition(&mut rng);
        let d = part.env_dim();
        let rho = random_density(&mut rng, 2 * d);
        let pc = project_correlated(&rho, &part).unwrap();
        assert!(hermitian_eigenvalues(&pc)[0] >= -1e-12);
        let _ = TotalDensity::new(pc.clone()).unwrap();
        for a in 0..part.bands() {
            for b in (0..part.bands()).filter(|&b| b != a) {
                for (e, f) in part.range(a).flat_map(|e| part.range(b).map(move |f| (e, f))) {
                    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        assert_eq!(pc[(i * d + e, j * d + f)], C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }
}

#[test]
fn odd_moments_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..TRIALS {
        let (n1, n2) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let model = build_model(ModelParams::new(n1, n2, 0.5, 0.3).unwrap(), trial).unwrap();
        let part = BandPartition::two_band(n1, n2).unwrap();
        let d = n1 + n2;
        let v = model.interaction_hamiltonian(rng.random::<f64>() * 50.0);
        let rho = random_hermitian(&mut rng, 2 * d);

        let pc = project_correlated(&rho, &part).unwrap();
        let odd = project_correlated(&liouvillian(&v, &pc), &part).unwrap();
        assert!(max_abs(&odd) <= 1e-12, "correlated: {}", max_abs(&odd));

        // the standard projection needs a reference without inter-band coherence
        let reference = band_diagonal_reference(&mut rng, n1, n2);
        let ps = project_standard(&rho, &reference).unwrap();
        let odd = project_standard(&liouvillian(&v, &ps), &reference).unwrap();
        assert!(max_abs(&odd) <= 1e-12, "standard: {}", max_abs(&odd));
    }
}

#[test]
fn ham_state_reproduces_expectations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..TRIALS {
        let part = random_partition(&mut rng);
        let rho = random_density(&mut rng, 2 * part.env_dim());
        let b = relevant_values(&rho, &part).unwrap();
        let alpha = ham_average_state(&b, &part).unwrap();
        for a in 0..part.bands() {
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let value = (&alpha * relevant_operator(i, j, a, &part)).trace();
                assert!((value - b.get(i, j, a)).norm() <= 1e-12);
            }
        }
        assert!(max_abs(&(&alpha - project_correlated(&rho, &part).unwrap())) <= 1e-12);
        assert!(max_abs(&(&alpha - ham_average_state_gram(&b, &part).unwrap())) <= 1e-12);
    }
}

#[test]
fn ham_state_of_uniform_lower_band_product() {
    let (n1, n2) = (3, 2);
    let part = BandPartition::two_band(n1, n2).unwrap();
    let d = n1 + n2;
    let amp = C64::from(1.0 / (n1 as f64).sqrt());
    let mut psi = DMatrix::<C64>::zeros(2 * d, 1);
    for e in 0..n1 {
        psi[(d + e, 0)] = amp;
    }
    let rho = &psi * psi.adjoint();
    let alpha = ham_average_state(&relevant_values(&rho, &part).unwrap(), &part).unwrap();
    let up = Matrix2::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let expected = tensor(&up, &(part.projector(0) / C64::from(n1 as f64)));
    assert!(max_abs(&(alpha - expected)) <= 1e-15);
}

#[test]
fn inconsistent_inputs_are_rejected() {
    let part = BandPartition::two_band(2, 2).unwrap();
    let mut b = RelevantSet::zeros(2);
    b.set(0, 1, 0, C64::new(0.1, 0.2));
    assert!(matches!(ham_average_state(&b, &part), Err(Error::Config(_))));
    assert!(matches!(ham_average_state(&RelevantSet::zeros(3), &part), Err(Error::Config(_))));
    let rho = DMatrix::<C64>::identity(8, 8) / C64::from(8.0);
    assert!(matches!(project_correlated(&rho, &BandPartition::two_band(2, 3).unwrap()), Err(Error::Config(_))));
    let bad_ref = DMatrix::<C64>::identity(3, 3);
    assert!(matches!(project_standard(&rho, &bad_ref), Err(Error::Config(_))));
    assert!(BandPartition::new(vec![2, 0]).is_err());
    let not_hermitian = DMatrix::from_fn(4, 4, |i, j| C64::new(i as f64, j as f64));
    assert!(TotalDensity::new(not_hermitian).is_err());
}

#[test]
fn band_projectors_partition_unity() {
    let part = BandPartition::new(vec![3, 1, 2]).unwrap();
    let mut sum = DMatrix::<C64>::zeros(6, 6);
    for a in 0..3 {
        let pa = part.projector(a);
        for b in 0..3 {
            let prod = &pa * part.projector(b);
            let expected = if a == b { pa.clone() } else { DMatrix::zeros(6, 6) };
            assert_eq!(prod, expected);
        }
        sum += pa;
    }
    assert_eq!(sum, DMatrix::identity(6, 6));
}
