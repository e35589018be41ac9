//! Cross-checks between the four kernels and against the cost model.

use num_rational::Ratio;
use symtensor::cost_model::{bcss_costs, bcss_dense_temp_costs, dense_costs};
use symtensor::dense::{max_rel_error, mode_multiply, DenseTensor};
use symtensor::random::{random_matrix, random_symmetric};
use symtensor::sttsm::{
    sttsm_bcss, sttsm_bcss_with, sttsm_dense_ttm, sttsm_naive, sttsm_naive_full,
    sttsm_scalar_temps, BcssOptions,
};
use symtensor::sym_index::{is_sym_in_modes, simplex_count};
use symtensor::{BcssTensor, OpCounter};

#[test]
fn four_algorithms_agree() {
    for m in 2..=5 {
        for n in [4, 6, 8] {
            let a = random_symmetric(m, n, 31 * m as u64 + n as u64);
            let x = random_matrix(n, n, 17 * m as u64 + n as u64);
            let xv = x.as_matrix().unwrap();
            let naive = sttsm_naive(&a, xv).unwrap();
            let scalar = sttsm_scalar_temps(&a, xv).unwrap();
            let dense = sttsm_dense_ttm(&a, xv).unwrap();
            assert!(
                max_rel_error(&scalar, &naive) <= 1e-10,
                "scalar m={m} n={n}"
            );
            assert!(max_rel_error(&dense, &naive) <= 1e-10, "dense m={m} n={n}");
            let mut bs = vec![1, 2, n / 2, n];
            bs.dedup();
            for b in bs {
                let ab = BcssTensor::compress(&a, b, 0.0).unwrap();
                let c = sttsm_bcss(&ab, xv, b).unwrap();
                assert_eq!(c.num_blocks() as u128, simplex_count(n / b, m).unwrap());
                let err = max_rel_error(&c.decompress(), &naive);
                assert!(err <= 1e-10, "bcss m={m} n={n} b={b} err={err}");
            }
        }
    }
}

#[test]
fn full_nest_oracle_agrees() {
    let a = random_symmetric(3, 4, 2);
    let x = random_matrix(3, 4, 3);
    let xv = x.as_matrix().unwrap();
    assert!(
        max_rel_error(
            &sttsm_naive(&a, xv).unwrap(),
            &sttsm_naive_full(&a, xv).unwrap()
        ) <= 1e-15
    );
}

#[test]
fn reuse_toggle_changes_cost_not_result() {
    let a = random_symmetric(4, 6, 5);
    let x = random_matrix(6, 6, 6);
    let ab = BcssTensor::compress(&a, 2, 0.0).unwrap();
    let run = |exploit| {
        let mut ctr = OpCounter::new();
        let c = sttsm_bcss_with(
            &ab,
            x.as_matrix().unwrap(),
            3,
            BcssOptions {
                exploit_partial_symmetry: exploit,
            },
            &mut ctr,
            |_| {},
        )
        .unwrap();
        (c, ctr)
    };
    let (c1, k1) = run(true);
    let (c0, k0) = run(false);
    assert!(max_rel_error(&c1.decompress(), &c0.decompress()) <= 1e-12);
    assert!(k1.flops < k0.flops);
    let zero = Ratio::from_integer(0);
    assert_eq!(k1.flops, bcss_costs(4, 6, 6, 2, 3, zero).unwrap().flops);
    assert_eq!(
        k0.flops,
        bcss_dense_temp_costs(4, 6, 6, 2, 3, zero).unwrap().flops
    );
}

#[test]
fn rectangular_counts_match_model() {
    // n != p and b_A != b_C
    for (m, n, p, ba, bc) in [
        (2, 6, 4, 3, 2),
        (3, 4, 6, 2, 3),
        (3, 6, 2, 2, 1),
        (4, 4, 4, 1, 2),
    ] {
        let a = random_symmetric(m, n, 9);
        let x = random_matrix(p, n, 10);
        let ab = BcssTensor::compress(&a, ba, 0.0).unwrap();
        let mut ctr = OpCounter::new();
        let c = sttsm_bcss_with(
            &ab,
            x.as_matrix().unwrap(),
            bc,
            BcssOptions::default(),
            &mut ctr,
            |_| {},
        )
        .unwrap();
        let model = bcss_costs(m, n, p, ba, bc, Ratio::from_integer(0)).unwrap();
        assert_eq!(ctr.flops, model.flops, "{m} {n} {p} {ba} {bc}");
        assert!(ctr.memops <= 2 * model.memops && model.memops <= 2 * ctr.memops);
        assert_eq!(c.storage().payload, model.storage_c.payload);
        let naive = sttsm_naive(&a, x.as_matrix().unwrap()).unwrap();
        assert!(max_rel_error(&c.decompress(), &naive) <= 1e-10);
    }
}

#[test]
fn dense_counts_match_model_with_p_not_n() {
    for (m, n, p) in [(2, 3, 5), (3, 4, 2), (4, 3, 1)] {
        let a = random_symmetric(m, n, 1);
        let x = random_matrix(p, n, 2);
        let mut ctr = OpCounter::new();
        symtensor::sttsm::sttsm_dense_ttm_counted(&a, x.as_matrix().unwrap(), &mut ctr).unwrap();
        let model = dense_costs(m, n, p).unwrap();
        assert_eq!(ctr.flops, model.flops);
        assert!(ctr.memops <= 2 * model.memops && model.memops <= ctr.memops);
    }
}

#[test]
fn single_mode_products_keep_leading_symmetry() {
    // A x_k X is symmetric in modes 0..k when A is symmetric
    for m in 3..=5 {
        let a = random_symmetric(m, 4, m as u64);
        let x = random_matrix(3, 4, 40 + m as u64);
        let mut t: DenseTensor = a.clone();
        for k in (1..m).rev() {
            t = mode_multiply(&t, k, x.as_matrix().unwrap()).unwrap();
            let modes: Vec<usize> = (0..k).collect();
            assert!(is_sym_in_modes(&t, &modes, 1e-12).unwrap(), "m={m} k={k}");
        }
    }
}
