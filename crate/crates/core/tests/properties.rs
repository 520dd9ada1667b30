//! Randomized invariants across the public API.

use std::sync::OnceLock;

use proptest::prelude::*;

use edgeflow::codebooks::{deserialize_bundle, serialize_bundle, CodebookBundle};
use edgeflow::gradquant::{
    bits_per_coefficient, decode_code, decompose, dequantize, encode_code, quantize, signsgd_dequantize,
    signsgd_quantize, BlockIndex, CodeWidths, HierarchicalCode,
};
use edgeflow::harness::metrics::{read_metrics_from, write_metrics_to};
use edgeflow::harness::{build_bundle, BundleSpec, RoundMetrics};
use edgeflow::learners::{fed_apply, Architecture, FedModel};
use edgeflow::linalg::{grassmann_centroid, hermitian_eig, proj_dist_2, proj_dist_fro, svd, ComplexMatrix, Subspace};
use edgeflow::rng::RngStream;
use edgeflow::scheduling::{dii, select_device, DeviceReport, Policy};

fn gaussian_matrix(m: usize, n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = RngStream::new(seed, 0);
    ComplexMatrix::from_fn(m, n, |_, _| rng.complex_normal())
}

fn random_subspace(m: usize, n: usize, seed: u64) -> Subspace {
    Subspace::orthonormalize(&gaussian_matrix(m, n, seed)).unwrap()
}

fn bundle() -> &'static CodebookBundle {
    static BUNDLE: OnceLock<CodebookBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        let spec = BundleSpec {
            dim: 40,
            blocks: 4,
            bits_norm: 5,
            bits_block: 4,
            bits_hinge: 3,
            norm_range: (0.0, 20.0),
        };
        build_bundle(&spec, None, 11).unwrap()
    })
}

fn gradient(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len).prop_filter("nonzero", |g| g.iter().any(|v| v.abs() > 1e-6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs_and_sorts(m in 1usize..6, n in 1usize..6, seed in any::<u64>()) {
        let h = gaussian_matrix(m, n, seed);
        let dec = svd(&h).unwrap();
        prop_assert!((dec.reconstruct() - &h).norm() <= 1e-10 * h.norm().max(1.0));
        prop_assert!(dec.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(dec.singular_values.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn hermitian_eigenvalues_sum_to_trace(m in 1usize..6, seed in any::<u64>()) {
        let b = gaussian_matrix(m, m, seed);
        let g = &b * b.adjoint();
        let eig = hermitian_eig(&g).unwrap();
        let trace: f64 = (0..m).map(|i| g[(i, i)].re).sum();
        prop_assert!((eig.eigenvalues.iter().sum::<f64>() - trace).abs() <= 1e-9 * trace.max(1.0));
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn projection_distances_are_bounded_metrics(m in 2usize..7, seed in any::<u64>()) {
        let n = 1 + (seed as usize) % (m - 1);
        let u = random_subspace(m, n, seed);
        let a = random_subspace(m, n, seed.wrapping_add(1));
        let d2 = proj_dist_2(&u, &a).unwrap();
        let df = proj_dist_fro(&u, &a).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d2));
        prop_assert!(df * df <= 2.0 * n as f64 + 1e-10);
        prop_assert!(d2 <= df + 1e-12);
        prop_assert!((df - proj_dist_fro(&a, &u).unwrap()).abs() <= 1e-12);
        prop_assert!(proj_dist_fro(&u, &u).unwrap() <= 1e-7);
    }

    #[test]
    fn centroid_is_no_worse_than_any_member(k in 1usize..6, seed in any::<u64>()) {
        let subs: Vec<Subspace> = (0..k).map(|i| random_subspace(4, 2, seed.wrapping_add(i as u64))).collect();
        let c = grassmann_centroid(&subs, 2).unwrap();
        let cost = |a: &Subspace| subs.iter().map(|s| proj_dist_fro(s, a).unwrap().powi(2)).sum::<f64>();
        let best = cost(&c.subspace);
        for s in &subs {
            prop_assert!(best <= cost(s) + 1e-9);
        }
        prop_assert!((best - c.objective(k)).abs() <= 1e-8);
    }

    #[test]
    fn decomposition_factors_are_unit_and_reassemble(g in gradient(37), m in 1usize..8) {
        let d = decompose(&g, m).unwrap();
        let hinge_norm = d.hinge.iter().map(|h| h * h).sum::<f64>().sqrt();
        prop_assert!((hinge_norm - 1.0).abs() <= 1e-12);
        prop_assert!(d.hinge.iter().all(|h| *h >= 0.0));
        for s in &d.block_dirs {
            let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() <= 1e-12);
        }
        let back = d.reassemble();
        prop_assert_eq!(back.len(), g.len());
        for (a, b) in back.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-12 * d.rho.max(1.0));
        }
    }

    #[test]
    fn requantizing_a_reconstruction_is_stable(g in gradient(40)) {
        let b = bundle();
        let code = quantize(&g, b).unwrap();
        let once = dequantize(&code, b).unwrap();
        let twice = dequantize(&quantize(&once, b).unwrap(), b).unwrap();
        for (x, y) in once.iter().zip(&twice) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        let expected = (5 + 4 * 5 + 3) as f64 / 40.0;
        prop_assert_eq!(bits_per_coefficient(&code), expected);
    }

    #[test]
    fn wire_format_round_trips_any_valid_code(
        norm_w in 1u8..=16, block_w in 1u8..=16, hinge_w in 1u8..=16,
        m in 1usize..12, dim in 1u32..5000, seed in any::<u64>(),
    ) {
        let mut rng = RngStream::new(seed, 0);
        let mut draw = |bits: u8| (rng.uniform() * (1u64 << bits) as f64) as u32;
        let code = HierarchicalCode {
            dim,
            widths: CodeWidths { norm: norm_w, block: block_w, hinge: hinge_w },
            norm_index: draw(norm_w),
            blocks: (0..m).map(|i| BlockIndex { index: draw(block_w), negative: i % 3 == 0 }).collect(),
            hinge_index: draw(hinge_w),
        };
        let bytes = encode_code(&code).unwrap();
        prop_assert_eq!(decode_code(&bytes).unwrap(), code);
    }

    #[test]
    fn sign_compression_keeps_signs(g in prop::collection::vec(-5.0f64..5.0, 1..80)) {
        let code = signsgd_quantize(&g);
        let back = signsgd_dequantize(&code);
        prop_assert_eq!(bits_per_coefficient(&code), 1.0);
        for (x, s) in g.iter().zip(&back) {
            prop_assert_eq!(*s, if *x < 0.0 { -1.0 } else { 1.0 });
        }
    }

    #[test]
    fn dii_grows_with_snr_and_uncertainty(
        snr in 0.01f64..1e4, boost in 1.0f64..10.0,
        us in prop::collection::vec(-5.0f64..0.0, 1..20), shift in 0.0f64..1.0,
    ) {
        let (base, idx) = dii(snr, &us).unwrap();
        let (better_channel, _) = dii(snr * boost, &us).unwrap();
        prop_assert!(better_channel >= base);
        let shifted: Vec<f64> = us.iter().map(|u| u + shift).collect();
        let (better_data, idx2) = dii(snr, &shifted).unwrap();
        prop_assert!((better_data - base - shift).abs() <= 1e-12);
        prop_assert_eq!(idx, idx2);
    }

    #[test]
    fn scheduler_picks_the_argmax_regardless_of_order(
        entries in prop::collection::vec((0.01f64..100.0, -3.0f64..0.0), 1..12),
        rotate in 0usize..12,
    ) {
        let reports: Vec<DeviceReport> = entries
            .iter()
            .enumerate()
            .map(|(i, &(snr, u))| DeviceReport { device_id: i, snr_linear: snr, max_uncertainty: u, best_sample_index: 0 })
            .collect();
        let mut shuffled = reports.clone();
        shuffled.rotate_left(rotate % reports.len());
        for policy in [Policy::Importance, Policy::ChannelAware, Policy::DataAware] {
            let a = select_device(&reports, policy).unwrap();
            let b = select_device(&shuffled, policy).unwrap();
            prop_assert_eq!(a.selected_device, b.selected_device);
            let metric = |r: &DeviceReport| match policy {
                Policy::Importance => r.max_uncertainty - 1.0 / r.snr_linear,
                Policy::ChannelAware => r.snr_linear,
                Policy::DataAware => r.max_uncertainty,
            };
            let chosen = metric(&reports[a.selected_device]);
            prop_assert!(reports.iter().all(|r| metric(r) <= chosen));
        }
    }

    #[test]
    fn model_updates_compose_linearly(
        seed in any::<u64>(), lr in 0.001f64..1.0,
    ) {
        let mut rng = RngStream::new(seed, 0);
        let model = FedModel::random(Architecture::logistic(6), &mut rng).unwrap();
        let a: Vec<f64> = (0..7).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = (0..7).map(|_| rng.standard_normal()).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let joint = fed_apply(&model, &sum, lr).unwrap();
        let stepwise = fed_apply(&fed_apply(&model, &a, lr).unwrap(), &b, lr).unwrap();
        for (x, y) in joint.params.iter().zip(&stepwise.params) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn metrics_csv_round_trips_exactly(
        rows in prop::collection::vec(
            (prop::option::of(0.0f64..1.0), prop::option::of(0u64..1 << 40),
             prop::option::of(0.0f64..64.0), prop::option::of(0.0f64..1e3),
             prop::option::of(0usize..100), 0.0f64..1e4),
            0..20),
    ) {
        let metrics: Vec<RoundMetrics> = rows
            .into_iter()
            .enumerate()
            .map(|(round, (acc, bits, bpc, mse, dev, wall))| RoundMetrics {
                round,
                test_accuracy: acc,
                cum_bits: bits,
                bits_per_coeff: bpc,
                aircomp_mse: mse,
                selected_device: dev,
                wall_time_ms: (wall * 1e3).round() / 1e3,
            })
            .collect();
        let mut buf = Vec::new();
        write_metrics_to(&metrics, &mut buf).unwrap();
        let back = read_metrics_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), metrics.len());
        for (x, y) in back.iter().zip(&metrics) {
            prop_assert_eq!(x.test_accuracy, y.test_accuracy);
            prop_assert_eq!(x.cum_bits, y.cum_bits);
            prop_assert_eq!(x.bits_per_coeff, y.bits_per_coeff);
            prop_assert_eq!(x.aircomp_mse, y.aircomp_mse);
            prop_assert_eq!(x.selected_device, y.selected_device);
            prop_assert!((x.wall_time_ms - y.wall_time_ms).abs() <= 1e-9);
        }
    }
}

#[test]
fn bundle_files_round_trip() {
    let b = bundle();
    let back = deserialize_bundle(&serialize_bundle(b)).unwrap();
    assert_eq!(&back, b);
    assert_eq!(back.block_cb.coherence(), b.block_cb.coherence());
}
