//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see the lines for passing
//! criteria too).

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};

use convcast::alloc::{
    allocate_bruteforce, allocate_optimal, build_cost_table, predict_usage, AllocationRequest,
    CostTable,
};
use convcast::analysis::{correlation_matrix, evaluate, pearson};
use convcast::data::{generate_dataset, oracle_sweep, Dataset, NoiseSpec, SynthesisRecord};
use convcast::model::{
    descriptor, BlockKind, ConfigPoint, PlatformCapacity, ResourceKind, ResourceVector,
};
use convcast::regression::{
    fit_polynomial, fit_segmented, predict, select_model, Model, ModelSet, Route,
};
use convcast::sim::{convolve_frame, golden_convolve, pack_mul, Frame, Kernel3x3};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const FULL: (u8, u8) = (3, 16);

fn criterion<F: FnOnce()>(n: u32, name: &str, body: F) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("criterion {n} ({name}): PASS"),
        Err(e) => {
            println!("criterion {n} ({name}): FAIL");
            resume_unwind(e);
        }
    }
}

/// Exact-recovery model set fitted on the real-valued oracle sweep: the
/// minimal basis that reproduces each closed form with zero residual.
fn oracle_fitted_models() -> ModelSet {
    let ds = oracle_sweep(&BlockKind::ALL, FULL, FULL, "zcu104").unwrap();
    let mut set = ModelSet::new();
    use BlockKind::*;
    use ResourceKind::*;
    for (block, resource, degree) in [
        (Conv1, Llut, 2),
        (Conv1, Mlut, 2),
        (Conv1, Ff, 1),
        (Conv1, Cchain, 1),
        (Conv2, Llut, 1),
        (Conv2, Mlut, 1),
        (Conv2, Ff, 1),
        (Conv3, Ff, 1),
        (Conv4, Llut, 1),
        (Conv4, Mlut, 1),
        (Conv4, Ff, 1),
    ] {
        set.insert(Model::Polynomial(
            fit_polynomial(&ds, block, resource, degree).unwrap(),
        ));
    }
    for resource in [Llut, Mlut] {
        set.insert(Model::Segmented(
            fit_segmented(&ds, Conv3, resource, 4).unwrap(),
        ));
    }
    set
}

fn oracle_cost_table() -> CostTable {
    build_cost_table(
        &oracle_fitted_models(),
        ConfigPoint::new(8, 8),
        &BlockKind::ALL,
    )
    .unwrap()
}

#[test]
fn criterion_1_conv4_model_recovery() {
    criterion(1, "Conv4 model recovery", || {
        let ds = oracle_sweep(&[BlockKind::Conv4], FULL, FULL, "zcu104").unwrap();
        let fit = fit_polynomial(&ds, BlockKind::Conv4, ResourceKind::Llut, 1).unwrap();
        let expected = [20.886, 1.004, 1.037];
        for (got, want) in fit.coefficients.iter().zip(expected) {
            assert!(
                (got - want).abs() < 1e-6,
                "coefficient {got} != {want} within 1e-6"
            );
        }
        assert!(
            (fit.training_r2 - 1.0).abs() < 1e-12,
            "r2 = {}",
            fit.training_r2
        );
    });
}

#[test]
fn criterion_2_usage_table_reproduction() {
    criterion(2, "predicted-usage table reproduction", || {
        let costs = oracle_cost_table();
        let zcu104 = PlatformCapacity::zcu104();
        let check = |counts: [u64; 4], expect: &[(ResourceKind, f64)], convs: u64, tol: f64| {
            let (usage, total) = predict_usage(&counts, &costs, &zcu104).unwrap();
            assert_eq!(total, convs, "total convolutions for {counts:?}");
            for &(r, want) in expect {
                let got = usage.get(r);
                assert!(
                    (got - want).abs() <= tol,
                    "{counts:?} {r}: {got:.3} vs {want} (tol {tol})"
                );
            }
        };
        use ResourceKind::*;
        // mixed row, ±0.5 pp
        check(
            [1380, 284, 800, 150],
            &[(Llut, 80.4), (Ff, 23.3), (Dsp, 80.0), (Cchain, 44.5)],
            3564,
            0.5,
        );
        // single-block rows, ±0.15 pp
        check(
            [1770, 0, 0, 0],
            &[(Llut, 80.0), (Ff, 20.5), (Cchain, 57.1), (Dsp, 0.0)],
            1770,
            0.15,
        );
        check(
            [0, 1382, 0, 0],
            &[(Llut, 14.9), (Ff, 6.4), (Dsp, 79.9)],
            1382,
            0.15,
        );
        check(
            [0, 0, 1382, 0],
            &[(Llut, 21.5), (Ff, 9.2), (Dsp, 79.9)],
            2764,
            0.15,
        );
        check(
            [0, 0, 0, 691],
            &[(Llut, 11.1), (Ff, 3.3), (Dsp, 79.9)],
            1382,
            0.15,
        );
    });
}

#[test]
fn criterion_3_budgeted_allocation() {
    criterion(3, "budgeted allocation", || {
        let costs = oracle_cost_table();
        let zcu104 = PlatformCapacity::zcu104();

        // optimum dominates the published hand mix and stays feasible
        let req = AllocationRequest::new(
            zcu104.clone(),
            ConfigPoint::new(8, 8),
            BlockKind::ALL.to_vec(),
            costs.clone(),
        );
        let plan = allocate_optimal(&req).unwrap();
        assert!(
            plan.total_convs >= 3564,
            "optimum {} < 3564",
            plan.total_convs
        );
        for r in [
            ResourceKind::Llut,
            ResourceKind::Ff,
            ResourceKind::Cchain,
            ResourceKind::Dsp,
        ] {
            assert!(
                plan.usage_percent.get(r) <= 100.0 * req.budgets.get(r) + 1e-9,
                "{r} over budget"
            );
        }

        // optimality: exhaustive cross-check on 1000 scaled-down instances
        let mut rng = StdRng::seed_from_u64(7);
        let mut mismatches = 0u32;
        for _ in 0..1000 {
            let mut table = CostTable::default();
            for kind in BlockKind::ALL {
                table.insert(
                    kind,
                    ResourceVector::new(
                        rng.random_range(10.0..40.0),
                        0.0,
                        rng.random_range(5.0..30.0),
                        if kind == BlockKind::Conv1 {
                            rng.random_range(0.0..8.0)
                        } else {
                            0.0
                        },
                        descriptor(kind).dsp_per_block as f64,
                    ),
                );
            }
            let platform = PlatformCapacity {
                platform_id: "scaled".to_string(),
                totals: ResourceVector::new(
                    rng.random_range(100.0..300.0),
                    0.0,
                    rng.random_range(100.0..300.0),
                    rng.random_range(20.0..80.0),
                    rng.random_range(4.0..30.0),
                ),
            };
            let req = AllocationRequest::new(
                platform,
                ConfigPoint::new(8, 8),
                BlockKind::ALL.to_vec(),
                table,
            );
            let fast = allocate_optimal(&req).unwrap();
            let brute = allocate_bruteforce(&req).unwrap();
            if fast.total_convs != brute.total_convs {
                mismatches += 1;
            }
        }
        assert_eq!(
            mismatches, 0,
            "objective mismatches against exhaustive search"
        );

        // published single-block count: 1770 Conv1 instances.
        // NOTE: at the calibrated per-block cost of 104.07 LLUTs,
        // 1771 * 104.07 = 184307.97 <= 0.8 * 230400 = 184320, so the true
        // integer optimum is 1771; the published 1770 appears to be an
        // off-by-one. Asserted as published; an honest failure here is the
        // optimizer refusing to leave a whole block's headroom unused.
        let req1 = AllocationRequest::new(
            zcu104,
            ConfigPoint::new(8, 8),
            vec![BlockKind::Conv1],
            costs,
        );
        let plan1 = allocate_optimal(&req1).unwrap();
        assert_eq!(
            plan1.counts[0], 1770,
            "Conv1-only optimum is {} (see decision notes: 1771 fits the budget)",
            plan1.counts[0]
        );
    });
}

#[test]
fn criterion_4_conv3_exact_segmented_fit() {
    criterion(4, "Conv3 exact segmented fit + noisy-fit quality", || {
        let ds = generate_dataset(
            &[BlockKind::Conv3],
            FULL,
            FULL,
            &NoiseSpec::none(),
            "zcu104",
        )
        .unwrap();
        let outcome = select_model(&ds, BlockKind::Conv3, ResourceKind::Llut, 0.9, 0.05).unwrap();
        assert_eq!(
            outcome.report.route,
            Route::Segmented,
            "expected segmented routing"
        );
        let model = outcome.model.unwrap();
        let records: Vec<&SynthesisRecord> = ds.for_block(BlockKind::Conv3).collect();
        let preds: Vec<f64> = records.iter().map(|r| predict(&model, r.cfg)).collect();
        let truths: Vec<f64> = records.iter().map(|r| r.measured.llut).collect();
        let m = evaluate(&preds, &truths).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.r2, 1.0);
        assert_eq!(m.mape_percent, 0.0);

        // the published Conv1/Conv2/Conv4 error rows depend on private
        // synthesis measurements; substituted property: noisy Conv1 fits
        // stay accurate across seeds
        for seed in 0..20u64 {
            let noisy = generate_dataset(
                &[BlockKind::Conv1],
                FULL,
                FULL,
                &NoiseSpec { sigma: 0.03, seed },
                "zcu104",
            )
            .unwrap();
            let fit = fit_polynomial(&noisy, BlockKind::Conv1, ResourceKind::Llut, 2).unwrap();
            let records: Vec<&SynthesisRecord> = noisy.for_block(BlockKind::Conv1).collect();
            let preds: Vec<f64> = records.iter().map(|r| fit.eval(r.cfg)).collect();
            let truths: Vec<f64> = records.iter().map(|r| r.measured.llut).collect();
            let m = evaluate(&preds, &truths).unwrap();
            assert!(
                m.mape_percent <= 5.0,
                "seed {seed}: MAPE {}",
                m.mape_percent
            );
            assert!(m.r2 >= 0.99, "seed {seed}: r2 {}", m.r2);
        }
    });
}

#[test]
fn criterion_5_correlation_structure() {
    criterion(5, "correlation structure", || {
        // exact unity/zero entries hold on the noise-free real-valued sweep;
        // integer rounding of measurements perturbs the 0.2 LLUT/MLUT ratio
        // (and the published nonzero real-data magnitudes such as 0.668 or
        // 0.997 are not reproducible at all without the authors' raw data)
        let ds = oracle_sweep(&BlockKind::ALL, FULL, FULL, "zcu104").unwrap();
        let entry = |block, a: &str, b: &str| {
            let m = correlation_matrix(&ds, block).unwrap();
            let ia = m.labels.iter().position(|l| l == a).unwrap();
            let ib = m.labels.iter().position(|l| l == b).unwrap();
            m.r[ia][ib]
        };
        for block in BlockKind::ALL {
            let r = entry(block, "llut", "mlut");
            assert!((r - 1.0).abs() < 1e-12, "{block}: r(llut, mlut) = {r}");
        }
        for block in [BlockKind::Conv2, BlockKind::Conv3, BlockKind::Conv4] {
            let r = entry(block, "ff", "data_bits");
            assert!(r.abs() < 1e-12, "{block}: r(ff, d) = {r}");
        }
        let r = entry(BlockKind::Conv3, "llut", "data_bits");
        assert!(r.abs() < 1e-12, "conv3: r(llut, d) = {r}");

        // same zero pattern survives on rounded measurements
        let rounded =
            generate_dataset(&BlockKind::ALL, FULL, FULL, &NoiseSpec::none(), "zcu104").unwrap();
        let ff: Vec<f64> = rounded
            .for_block(BlockKind::Conv2)
            .map(|r| r.measured.ff)
            .collect();
        let d: Vec<f64> = rounded
            .for_block(BlockKind::Conv2)
            .map(|r| r.cfg.data_bits as f64)
            .collect();
        assert!(pearson(&ff, &d).unwrap().abs() < 1e-12);
    });
}

#[test]
fn criterion_6_packing_equivalence() {
    criterion(6, "operand-packing equivalence (2^24 sweep)", || {
        let mut mismatches = 0u64;
        for d1 in -128i64..=127 {
            for d2 in -128i64..=127 {
                for w in -128i64..=127 {
                    let (p1, p2) = pack_mul(d1, d2, w, 8, 8).unwrap();
                    if p1 != d1 * w || p2 != d2 * w {
                        mismatches += 1;
                    }
                }
            }
        }
        assert_eq!(mismatches, 0, "packing mismatches in exhaustive 8x8 sweep");
    });
}

#[test]
fn criterion_7_simulator_equivalence() {
    criterion(7, "simulator matches golden reference", || {
        let mut rng = StdRng::seed_from_u64(64);
        for kind in BlockKind::ALL {
            let bits = descriptor(kind).max_operand_bits;
            let cfg = ConfigPoint::new(bits, bits);
            let amp = 1i64 << (bits - 1);
            let lanes = descriptor(kind).convs_per_cycle as u64;
            let windows = 62u64 * 62;
            let expected_cycles = 9 + windows.div_ceil(lanes);
            for _ in 0..100 {
                let pixels: Vec<i64> = (0..64 * 64).map(|_| rng.random_range(-amp..amp)).collect();
                let frame = Frame::new(64, 64, bits, pixels).unwrap();
                let coeffs: [i64; 9] = std::array::from_fn(|_| rng.random_range(-amp..amp));
                let kernel = Kernel3x3::new(coeffs, bits).unwrap();
                let (out, cycles) = convolve_frame(kind, cfg, &frame, &kernel).unwrap();
                assert_eq!(cycles, expected_cycles, "{kind} cycle count");
                for r in 0..62 {
                    for c in 0..62 {
                        let golden = golden_convolve(&frame.window(r, c), &kernel, bits).unwrap();
                        assert_eq!(out.at(r, c), golden.value, "{kind} at ({r}, {c})");
                    }
                }
            }
        }
    });
}

/// Dataset over the full grid with llut set by a closure; other components
/// filled with benign constants.
fn synthetic_dataset(f: impl Fn(f64, f64) -> f64) -> Dataset {
    let mut records = Vec::new();
    for d in 3..=16u8 {
        for c in 3..=16u8 {
            let cfg = ConfigPoint::new(d, c);
            records.push(SynthesisRecord {
                block: BlockKind::Conv1,
                platform: "zcu104".to_string(),
                cfg,
                measured: ResourceVector::new(f(d as f64, c as f64), 0.0, 1.0, 0.0, 0.0),
            });
        }
    }
    Dataset::new(records).unwrap()
}

#[test]
fn criterion_8_regression_engine_properties() {
    criterion(8, "regression engine properties", || {
        // exact recovery at degree 4
        let ds = synthetic_dataset(|d, c| 1.5 - 0.5 * d + 2.0 * c + 0.25 * d * d * c * c);
        let fit = fit_polynomial(&ds, BlockKind::Conv1, ResourceKind::Llut, 4).unwrap();
        assert!((fit.training_r2 - 1.0).abs() < 1e-12);
        for (term, &coef) in fit.terms.iter().zip(&fit.coefficients) {
            let want = match (term.d_exp, term.c_exp) {
                (0, 0) => 1.5,
                (1, 0) => -0.5,
                (0, 1) => 2.0,
                (2, 2) => 0.25,
                _ => 0.0,
            };
            assert!(
                (coef - want).abs() < 1e-6,
                "d^{} c^{}: {coef} vs {want}",
                term.d_exp,
                term.c_exp
            );
        }

        // residual orthogonality and nested-basis R2 monotonicity on data no
        // finite basis fits exactly
        let noisy = synthetic_dataset(|d, c| {
            50.0 + 3.0 * d + (1.7 * d).sin() * 20.0 + (0.9 * c).cos() * 15.0
        });
        let y_norm: f64 = noisy
            .for_block(BlockKind::Conv1)
            .map(|r| r.measured.llut * r.measured.llut)
            .sum::<f64>()
            .sqrt();
        let mut last_r2 = f64::NEG_INFINITY;
        for degree in 1..=4 {
            let fit = fit_polynomial(&noisy, BlockKind::Conv1, ResourceKind::Llut, degree).unwrap();
            assert!(
                fit.training_r2 >= last_r2 - 1e-10,
                "r2 dropped at degree {degree}"
            );
            last_r2 = fit.training_r2;
            for term in &fit.terms {
                let dot: f64 = noisy
                    .for_block(BlockKind::Conv1)
                    .map(|r| (r.measured.llut - fit.eval(r.cfg)) * term.eval(r.cfg))
                    .sum();
                let t_norm: f64 = noisy
                    .for_block(BlockKind::Conv1)
                    .map(|r| term.eval(r.cfg) * term.eval(r.cfg))
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    dot.abs() <= 1e-8 * y_norm * t_norm,
                    "degree {degree}, term d^{} c^{}: residual dot {dot}",
                    term.d_exp,
                    term.c_exp
                );
            }
        }

        // parsimony on a constructed R2 ladder: components orthogonal on the
        // balanced grid give exactly known per-degree R2
        let grid_d: Vec<f64> = (3..=16).map(|v| v as f64).collect();
        let mu = 9.5;
        let s2: f64 = grid_d.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / 14.0;
        let s4: f64 = grid_d.iter().map(|d| (d - mu).powi(4)).sum::<f64>() / 14.0;
        let beta = s4 / s2; // makes (d-mu)^3 - beta (d-mu) orthogonal to degree-2 span
        let quad = |d: f64, c: f64| (d - mu) * (c - mu);
        let cubic = |d: f64, _c: f64| (d - mu).powi(3) - beta * (d - mu);
        let linear = |d: f64, c: f64| 1.0 + 2.0 * d + 3.0 * c;
        let grid: Vec<(f64, f64)> = grid_d
            .iter()
            .flat_map(|&d| grid_d.iter().map(move |&c| (d, c)))
            .collect();
        let sum_sq = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
            let mean = grid.iter().map(|&(d, c)| f(d, c)).sum::<f64>() / grid.len() as f64;
            grid.iter().map(|&(d, c)| (f(d, c) - mean).powi(2)).sum()
        };
        let (sl, sq, sc) = (sum_sq(&linear), sum_sq(&quad), sum_sq(&cubic));
        // choose amplitudes so the per-degree ladder is (0.70, 0.92, 1, 1)
        let sst = sl / 0.70;
        let t1 = (0.22 * sst / sq).sqrt();
        let t2 = (0.08 * sst / sc).sqrt();
        let ladder = synthetic_dataset(|d, c| linear(d, c) + t1 * quad(d, c) + t2 * cubic(d, c));
        let expected = [0.70, 0.92, 1.0, 1.0];
        for degree in 1..=4u32 {
            let fit =
                fit_polynomial(&ladder, BlockKind::Conv1, ResourceKind::Llut, degree).unwrap();
            assert!(
                (fit.training_r2 - expected[degree as usize - 1]).abs() < 1e-9,
                "degree {degree} r2 {}",
                fit.training_r2
            );
        }
        let pick = select_model(&ladder, BlockKind::Conv1, ResourceKind::Llut, 0.9, 0.05).unwrap();
        assert_eq!(
            pick.report.chosen_degree,
            Some(2),
            "smallest R2 >= 0.9 wins"
        );
        let pick = select_model(&ladder, BlockKind::Conv1, ResourceKind::Llut, 0.95, 0.05).unwrap();
        assert_eq!(
            pick.report.chosen_degree,
            Some(3),
            "ties break toward lower degree"
        );
    });
}
