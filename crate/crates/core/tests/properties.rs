use ndarray::{Array2, Array3};
use proptest::prelude::*;

use sumlogcone::checkered::{
    binary_logit_loss_grad, checkoid, checkoid_antisym_check, checkoid_log_loss, circular_convolution_direct,
    circular_convolution_fft, cr_as_family, cr_cross_gradient, cr_gradient, cr_log_loss,
    hamming_parity_predicts_same, multiclass_checkoid, BinaryParams, MulticlassParams,
};
use sumlogcone::family::{sum_families, tensor_cross_gradient};
use sumlogcone::models::{
    smooth_xor, smooth_xor_family, softmin_family, softmin_loss, SmoothXorParams, SoftMinBranch, SoftMinSpec,
};
use sumlogcone::numeric::{log_sigmoid, log_sum_exp, softargmax};
use sumlogcone::{Error, SimplexLaw, SumLogConcaveFamily};

fn vec_in(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

fn scores(max_m: usize, max_c: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_m, 2..=max_c).prop_flat_map(|(m, c)| {
        vec_in(m * c, -4.0, 4.0).prop_map(move |v| Array2::from_shape_vec((m, c), v).unwrap())
    })
}

fn law(len: usize) -> impl Strategy<Value = SimplexLaw> {
    vec_in(len, 0.01, 1.0).prop_map(|w| SimplexLaw::normalized(w).unwrap())
}

fn softmin_spec() -> impl Strategy<Value = SoftMinSpec> {
    (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(s, k, d)| {
        prop::collection::vec((vec_in(k, -2.0, 2.0), vec_in(k * d, -1.5, 1.5)), s).prop_map(move |branches| {
            SoftMinSpec::new(
                branches
                    .into_iter()
                    .map(|(targets, w)| SoftMinBranch {
                        targets,
                        weights: w.chunks(d).map(<[f64]>::to_vec).collect(),
                    })
                    .collect(),
            )
            .unwrap()
        })
    })
}

/// Family for `-log Ξ_{m,y}(Z)` over the flattened scores (`d = 1`, `x = 1`).
fn score_family(z: &Array2<f64>, y: usize) -> SumLogConcaveFamily {
    let (m, c) = z.dim();
    let params = MulticlassParams::new(Array3::zeros((m, c, 1))).unwrap();
    cr_as_family(&params, &[1.0], y).unwrap()
}

fn flat(z: &Array2<f64>) -> Vec<f64> {
    z.iter().copied().collect()
}

proptest! {
    #[test]
    fn log_sum_exp_shift(v in vec_in(5, -50.0, 50.0), shift in -600.0f64..600.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let a = log_sum_exp(&v).unwrap() + shift;
        let b = log_sum_exp(&shifted).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = log_sum_exp(&v).unwrap();
        prop_assert!(lse >= max && lse <= max + 5f64.ln() + 1e-12);
    }

    #[test]
    fn checkoid_antisymmetry(z in prop::collection::vec(-8.0f64..8.0, 1..7), k in 0usize..7) {
        let k = k % z.len();
        let (a, b) = checkoid_antisym_check(&z, k).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkoid_permutation_invariance(z in prop::collection::vec(-8.0f64..8.0, 2..7), rot in 0usize..7) {
        let mut p = z.clone();
        p.rotate_left(rot % z.len());
        p.reverse();
        prop_assert!((checkoid(&z).unwrap() - checkoid(&p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn smooth_xor_complements_checkoid(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        prop_assert!((smooth_xor(a, b) + checkoid(&[a, b]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dc_decomposition(z1 in -15.0f64..15.0, z2 in -15.0f64..15.0) {
        let (lhs, _) = binary_logit_loss_grad(&[z1, z2], 0).unwrap();
        let rhs = -log_sigmoid(z1) - log_sigmoid(z2) + log_sigmoid(z1 + z2);
        if z1.abs() < 5.0 && z2.abs() < 5.0 {
            prop_assert!((lhs + checkoid(&[z1, z2]).unwrap().ln()).abs() < 1e-12);
        }
        prop_assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn multiclass_normalized(z in scores(6, 7)) {
        let law = multiclass_checkoid(&z).unwrap();
        prop_assert!((law.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(law.weights().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn two_class_is_binary_checkoid(z in scores(6, 2)) {
        let diffs: Vec<f64> = z.rows().into_iter().map(|r| r[0] - r[1]).collect();
        let law = multiclass_checkoid(&z).unwrap();
        prop_assert!((law.weights()[0] - checkoid(&diffs).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fft_matches_direct(m in 1usize..=16, c in 2usize..=64, seed in vec_in(64 * 16, -3.0, 3.0)) {
        let rows: Vec<Vec<f64>> = (0..m).map(|k| softargmax(&seed[k * c..(k + 1) * c])).collect();
        let direct = circular_convolution_direct(&rows).unwrap();
        let fft = circular_convolution_fft(&rows).unwrap();
        let diff = direct.iter().zip(&fft).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-10);
    }

    #[test]
    fn gradient_entries_bounded(z in scores(4, 5), y in 0usize..5) {
        let y = y % z.ncols();
        let g = cr_gradient(&z, y).unwrap();
        prop_assert!(g.iter().all(|v| v.abs() < 1.0));
        // Each row of the gradient sums to zero (softargmax minus a law).
        for row in g.rows() {
            prop_assert!(row.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn cross_gradient_at_self(z in scores(4, 5), y in 0usize..5) {
        let y = y % z.ncols();
        let a = cr_cross_gradient(&z, &z, y).unwrap();
        let b = cr_gradient(&z, y).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() <= 1e-12));
    }

    #[test]
    fn cross_gradient_matches_family(z in scores(4, 4), y in 0usize..4, r in vec_in(16, -3.0, 3.0)) {
        let y = y % z.ncols();
        let zref = Array2::from_shape_fn(z.dim(), |(k, l)| r[k * z.ncols() + l]);
        let fam = score_family(&z, y);
        let expected = fam.cross_gradient_from_point(&flat(&z), &flat(&zref)).unwrap();
        let got = flat(&cr_cross_gradient(&z, &zref, y).unwrap());
        prop_assert!(got.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-10));
    }

    #[test]
    fn cr_family_matches_loss(
        (m, c, d) in (1usize..4, 2usize..4, 1usize..4),
        w in vec_in(48, -2.0, 2.0),
        x in vec_in(4, -2.0, 2.0),
        y in 0usize..4,
    ) {
        let y = y % c;
        let params = MulticlassParams::from_flat(m, c, d, &w[..m * c * d]).unwrap();
        let x = &x[..d];
        let fam = cr_as_family(&params, x, y).unwrap();
        prop_assert_eq!(fam.count(), c.pow(m as u32 - 1));
        let theta = params.flatten();
        let loss = cr_log_loss(&params, x, y).unwrap();
        prop_assert!((fam.evaluate(&theta).unwrap() - loss).abs() < 1e-10);
        prop_assert!(loss > 0.0);
        // Chain rule: ∂/∂Ω_{k,l,i} = G_{k,l} x_i.
        let g = cr_gradient(&params.logits(x).unwrap(), y).unwrap();
        let fam_grad = fam.gradient(&theta).unwrap();
        for k in 0..m {
            for l in 0..c {
                for i in 0..d {
                    prop_assert!((fam_grad[(k * c + l) * d + i] - g[[k, l]] * x[i]).abs() < 1e-10);
                }
            }
        }
        prop_assert!((checkoid_log_loss(&params.logits(x).unwrap(), y).unwrap() - loss).abs() < 1e-15);
    }

    #[test]
    fn hamming_parity(
        (m, d) in (1usize..6, 1usize..5),
        w in vec_in(30, -2.0, 2.0),
        x in vec_in(5, -3.0, 3.0),
        xp in vec_in(5, -3.0, 3.0),
    ) {
        let params = BinaryParams::from_flat(m, d, &w[..m * d]).unwrap();
        match hamming_parity_predicts_same(&params, &x[..d], &xp[..d]) {
            Ok((same, even)) => prop_assert_eq!(same, even),
            Err(Error::OnHyperplane { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn cross_convexity_smooth_xor(
        d in 1usize..4,
        theta in vec_in(6, -4.0, 4.0),
        eta in vec_in(6, -4.0, 4.0),
        x in vec_in(3, -2.0, 2.0),
        pos in any::<bool>(),
        mu in law(2),
    ) {
        let fam = smooth_xor_family(&SmoothXorParams::zeros(d), &x[..d], if pos { 1 } else { -1 }).unwrap();
        let gap = fam.cross_convexity_gap(&theta[..2 * d], &eta[..2 * d], &mu).unwrap();
        prop_assert!(gap >= -1e-9, "gap {gap}");
    }

    #[test]
    fn cross_convexity_softmin(spec in softmin_spec(), a in vec_in(3, -3.0, 3.0), b in vec_in(3, -3.0, 3.0), w in vec_in(3, 0.01, 1.0)) {
        let fam = softmin_family(&spec).unwrap();
        let d = spec.d();
        let mu = SimplexLaw::normalized(w[..fam.count()].to_vec()).unwrap();
        prop_assert!(fam.cross_convexity_gap(&a[..d], &b[..d], &mu).unwrap() >= -1e-9);
    }

    #[test]
    fn cross_convexity_checkered(z in scores(3, 3), r in vec_in(9, -4.0, 4.0), w in vec_in(9, 0.01, 1.0), y in 0usize..3) {
        let y = y % z.ncols();
        let fam = score_family(&z, y);
        let mu = SimplexLaw::normalized(w[..fam.count()].to_vec()).unwrap();
        let gap = fam.cross_convexity_gap(&flat(&z), &r[..z.len()], &mu).unwrap();
        prop_assert!(gap >= -1e-9);
    }

    #[test]
    fn softmin_sandwich(spec in softmin_spec(), x in vec_in(3, -3.0, 3.0)) {
        let x = &x[..spec.d()];
        let f = softmin_loss(&spec, x).unwrap();
        let branch_losses: Vec<f64> = spec
            .branches()
            .iter()
            .map(|b| b.targets.iter().zip(&b.weights).map(|(y, w)| {
                let p: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                0.5 * (y - p).powi(2)
            }).sum())
            .collect();
        let min = branch_losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let s = branch_losses.len() as f64;
        prop_assert!(f <= min + 1e-10 && f >= min - s.ln() - 1e-10);
    }

    #[test]
    fn sum_families_additive(spec in softmin_spec(), x in vec_in(3, -2.0, 2.0), w1 in vec_in(3, 0.01, 1.0), w2 in vec_in(3, 0.01, 1.0)) {
        let d = spec.d();
        let quad = SumLogConcaveFamily::new(d, vec![
            sumlogcone::partial_loss(|t| t.iter().map(|v| v * v).sum::<f64>(), |t| t.iter().map(|v| 2.0 * v).collect()),
            sumlogcone::partial_loss(|t| t.iter().map(|v| (v - 1.0).abs().powi(2)).sum::<f64>(), |t| t.iter().map(|v| 2.0 * (v - 1.0)).collect()),
        ]).unwrap();
        let soft = softmin_family(&spec).unwrap();
        let both = sum_families(&soft, &quad).unwrap();
        let x = &x[..d];
        let expected = soft.evaluate(x).unwrap() + quad.evaluate(x).unwrap();
        prop_assert!((both.evaluate(x).unwrap() - expected).abs() < 1e-12 * expected.abs().max(1.0));

        let mu1 = SimplexLaw::normalized(w1[..soft.count()].to_vec()).unwrap();
        let mu2 = SimplexLaw::normalized(w2[..2].to_vec()).unwrap();
        let via_product = both.cross_gradient_from_law(x, &mu1.outer(&mu2)).unwrap();
        let via_sum = tensor_cross_gradient(&[soft, quad], &[mu1, mu2], x).unwrap();
        prop_assert!(via_product.iter().zip(&via_sum).all(|(a, b)| (a - b).abs() <= 1e-10));
    }
}
