use super::*;
use crate::tensor::grad_check;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape, data).unwrap()
}

// ---- gauss_map ----

#[test]
fn gauss_map_center_cell_is_one() {
    let g = gauss_map((2.0, 3.0), (6, 6), 2.0, 8).unwrap();
    assert_eq!(g.values.data[3 * 6 + 2], 1.0);
    assert!(g.values.data.iter().all(|&v| v > 0.0));
}

#[test]
fn gauss_map_huge_sigma_is_uniform() {
    let g = gauss_map((1.0, 1.0), (8, 8), 1e6, 8).unwrap();
    assert!(g.values.data.iter().all(|&v| v >= 1.0 - 1e-9));
}

#[test]
fn gauss_map_matches_scalar_loop() {
    let g = gauss_map((2.0, 3.0), (6, 6), 2.0, 8).unwrap();
    for y in 0..6 {
        for x in 0..6 {
            let d2 = (x as f64 - 2.0).powi(2) + (y as f64 - 3.0).powi(2);
            let expected = (-d2 / 8.0).exp();
            assert!((g.values.data[y * 6 + x] - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn gauss_map_rejects_out_of_grid_center() {
    assert!(gauss_map((6.0, 0.0), (6, 6), 2.0, 8).is_err());
}

// ---- guided correlation ----

/// Scalar reference for the guided affinity with softmax over rows.
fn correlation_reference(query: &[f64], value: &[f64], prior: &[f64], n: usize, c: usize) -> Vec<f64> {
    let scale = 1.0 / (c as f64).sqrt();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut dot = 0.0;
            for ch in 0..c {
                dot += query[i * c + ch] * value[j * c + ch] * prior[j];
            }
            m[i * n + j] = dot * scale;
        }
    }
    for i in 0..n {
        let row = &mut m[i * n..(i + 1) * n];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    m
}

#[test]
fn guided_correlation_uniform_prior_is_plain_affinity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = rand_tensor(&mut rng, &[4, 3]);
    let mut g = Graph::new();
    let v_id = g.leaf(&v);
    let ones = g.constant(&[4, 1], vec![1.0; 4]).unwrap();
    let m = guided_correlation(&mut g, v_id, v_id, ones).unwrap();
    let expected = correlation_reference(&v.data, &v.data, &[1.0; 4], 4, 3);
    for (a, e) in g.data(m).iter().zip(&expected) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn guided_correlation_single_pixel_is_identity() {
    let mut g = Graph::new();
    let v = g.constant(&[1, 3], vec![0.3, -0.7, 2.0]).unwrap();
    let prior = g.constant(&[1, 1], vec![0.4]).unwrap();
    let m = guided_correlation(&mut g, v, v, prior).unwrap();
    assert_eq!(g.data(m), &[1.0]);
}

#[test]
fn guided_correlation_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let q = rand_tensor(&mut rng, &[4, 2]);
        let v = rand_tensor(&mut rng, &[4, 2]);
        let p: Vec<f64> = (0..4).map(|_| rng.gen_range(0.01..1.0)).collect();
        let mut g = Graph::new();
        let q_id = g.leaf(&q);
        let v_id = g.leaf(&v);
        let p_id = g.constant(&[4, 1], p.clone()).unwrap();
        let m = guided_correlation(&mut g, q_id, v_id, p_id).unwrap();
        let expected = correlation_reference(&q.data, &v.data, &p, 4, 2);
        for (a, e) in g.data(m).iter().zip(&expected) {
            assert!((a - e).abs() < 1e-9);
        }
        for row in 0..4 {
            let sum: f64 = g.data(m)[row * 4..(row + 1) * 4].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(g.data(m)[row * 4..(row + 1) * 4].iter().all(|&v| v >= 0.0));
        }
    }
}

// ---- diffuse ----

#[test]
fn diffuse_identity_leaves_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = rand_tensor(&mut rng, &[3, 2]);
    let mut g = Graph::new();
    let v_id = g.leaf(&v);
    let eye = g
        .constant(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        .unwrap();
    let out = diffuse(&mut g, eye, v_id).unwrap();
    assert_eq!(g.data(out), v.data.as_slice());
}

#[test]
fn diffuse_uniform_gives_mean_row() {
    let mut g = Graph::new();
    let v = g
        .constant(&[3, 2], vec![1.0, 0.0, 2.0, 4.0, 3.0, 8.0])
        .unwrap();
    let uniform = g.constant(&[3, 3], vec![1.0 / 3.0; 9]).unwrap();
    let out = diffuse(&mut g, uniform, v).unwrap();
    for row in 0..3 {
        assert!((g.data(out)[row * 2] - 2.0).abs() < 1e-12);
        assert!((g.data(out)[row * 2 + 1] - 4.0).abs() < 1e-12);
    }
}

#[test]
fn diffuse_outputs_stay_within_per_channel_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let v = rand_tensor(&mut rng, &[5, 3]);
        // random row-stochastic matrix
        let mut m = vec![0.0; 25];
        for row in 0..5 {
            let mut sum = 0.0;
            for col in 0..5 {
                let w: f64 = rng.gen_range(0.0..1.0);
                m[row * 5 + col] = w;
                sum += w;
            }
            for col in 0..5 {
                m[row * 5 + col] /= sum;
            }
        }
        let mut g = Graph::new();
        let v_id = g.leaf(&v);
        let m_id = g.constant(&[5, 5], m).unwrap();
        let out = diffuse(&mut g, m_id, v_id).unwrap();
        for ch in 0..3 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for row in 0..5 {
                lo = lo.min(v.data[row * 3 + ch]);
                hi = hi.max(v.data[row * 3 + ch]);
            }
            for row in 0..5 {
                let o = g.data(out)[row * 3 + ch];
                assert!(o >= lo - 1e-12 && o <= hi + 1e-12);
            }
        }
    }
}

// ---- run_matching ----

#[test]
fn constant_features_collapse_all_flows() {
    let mut g = Graph::new();
    let v = g.constant(&[2, 2, 3], vec![0.6; 12]).unwrap();
    let prior = gauss_map((1.0, 0.0), (2, 2), 1.5, 8).unwrap();
    let flows = run_matching(&mut g, v, v, Some(&prior)).unwrap();
    for (a, b) in g.data(flows.original).iter().zip(g.data(flows.intra)) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in g.data(flows.intra).iter().zip(g.data(flows.inter)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn uniform_prior_reduces_to_unguided_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v0 = rand_tensor(&mut rng, &[3, 3, 4]);
    let vt = rand_tensor(&mut rng, &[3, 3, 4]);
    let uniform = GaussMap {
        values: Tensor::new(&[3, 3, 1], vec![1.0; 9]).unwrap(),
        stride: 8,
        center: (1.0, 1.0),
        sigma: f64::INFINITY,
    };
    let mut g = Graph::new();
    let (v0_id, vt_id) = (g.leaf(&v0), g.leaf(&vt));
    let guided = run_matching(&mut g, v0_id, vt_id, Some(&uniform)).unwrap();
    let unguided = run_matching(&mut g, v0_id, vt_id, None).unwrap();
    for (a, b) in g.data(guided.intra).iter().zip(g.data(unguided.intra)) {
        assert!((a - b).abs() < 1e-9);
    }
    for (a, b) in g.data(guided.inter).iter().zip(g.data(unguided.inter)) {
        assert!((a - b).abs() < 1e-9);
    }
}

/// End-to-end scalar oracle for the matching equations.
fn matching_reference(
    v0: &[f64],
    vt: &[f64],
    prior: &[f64],
    n: usize,
    c: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m_intra = correlation_reference(vt, vt, prior, n, c);
    let m_inter = correlation_reference(v0, vt, prior, n, c);
    let apply = |m: &[f64]| {
        let mut out = vec![0.0; n * c];
        for i in 0..n {
            for ch in 0..c {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += m[i * n + j] * vt[j * c + ch];
                }
                out[i * c + ch] = acc;
            }
        }
        out
    };
    (apply(&m_intra), apply(&m_inter))
}

#[test]
fn run_matching_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let v0 = rand_tensor(&mut rng, &[4, 4, 2]);
        let vt = rand_tensor(&mut rng, &[4, 4, 2]);
        let prior = gauss_map(
            (rng.gen_range(0.0..3.4), rng.gen_range(0.0..3.4)),
            (4, 4),
            1.2,
            8,
        )
        .unwrap();
        let mut g = Graph::new();
        let (v0_id, vt_id) = (g.leaf(&v0), g.leaf(&vt));
        let flows = run_matching(&mut g, v0_id, vt_id, Some(&prior)).unwrap();
        let (intra, inter) = matching_reference(&v0.data, &vt.data, &prior.values.data, 16, 2);
        for (a, e) in g.data(flows.intra).iter().zip(&intra) {
            assert!((a - e).abs() < 1e-9);
        }
        for (a, e) in g.data(flows.inter).iter().zip(&inter) {
            assert!((a - e).abs() < 1e-9);
        }
    }
}

#[test]
fn run_matching_gradients_pass_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v0 = rand_tensor(&mut rng, &[2, 2, 3]);
    let vt = rand_tensor(&mut rng, &[2, 2, 3]);
    let w = rand_tensor(&mut rng, &[2, 2, 3]);
    let prior = gauss_map((1.0, 1.0), (2, 2), 1.0, 8).unwrap();
    let err = grad_check(
        |g, ids| {
            let flows = run_matching(g, ids[0], ids[1], Some(&prior))?;
            let sum = g.add(flows.intra, flows.inter)?;
            let sum = g.add(sum, flows.original)?;
            let wid = g.leaf(&w);
            let weighted = g.mul(sum, wid)?;
            Ok(g.sum_all(weighted))
        },
        &[v0, vt],
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-4, "max rel err {err}");
}

#[test]
fn run_matching_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 9;
    let c = 2;
    let v0 = rand_tensor(&mut rng, &[3, 3, c]);
    let vt = rand_tensor(&mut rng, &[3, 3, c]);
    let prior = gauss_map((1.0, 2.0), (3, 3), 1.3, 8).unwrap();

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let permute_rows = |data: &[f64], width: usize| -> Vec<f64> {
        let mut out = vec![0.0; data.len()];
        for (dst, &src) in perm.iter().enumerate() {
            out[dst * width..(dst + 1) * width]
                .copy_from_slice(&data[src * width..(src + 1) * width]);
        }
        out
    };

    let mut g = Graph::new();
    let (a, b) = (g.leaf(&v0), g.leaf(&vt));
    let base = run_matching(&mut g, a, b, Some(&prior)).unwrap();

    let v0p = Tensor::new(&[3, 3, c], permute_rows(&v0.data, c)).unwrap();
    let vtp = Tensor::new(&[3, 3, c], permute_rows(&vt.data, c)).unwrap();
    let priorp = GaussMap {
        values: Tensor::new(&[3, 3, 1], permute_rows(&prior.values.data, 1)).unwrap(),
        ..prior.clone()
    };
    let mut g2 = Graph::new();
    let (ap, bp) = (g2.leaf(&v0p), g2.leaf(&vtp));
    let permuted = run_matching(&mut g2, ap, bp, Some(&priorp)).unwrap();

    let base_intra_perm = permute_rows(g.data(base.intra), c);
    for (a, e) in g2.data(permuted.intra).iter().zip(&base_intra_perm) {
        assert!((a - e).abs() < 1e-9);
    }
    let base_inter_perm = permute_rows(g.data(base.inter), c);
    for (a, e) in g2.data(permuted.inter).iter().zip(&base_inter_perm) {
        assert!((a - e).abs() < 1e-9);
    }
}

#[test]
fn run_matching_shape_mismatch_errors() {
    let mut g = Graph::new();
    let a = g.constant(&[2, 2, 3], vec![0.0; 12]).unwrap();
    let b = g.constant(&[2, 2, 2], vec![0.0; 8]).unwrap();
    assert!(run_matching(&mut g, a, b, None).is_err());
}
