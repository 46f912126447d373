//! Browser bindings for the demo page in `www/`: resource surfaces, point
//! usage, and budgeted allocation, all against models fitted once from the
//! built-in cost oracle.
//!
//! Every function returns a JSON string; errors come back as
//! `{"error": "..."}` so the page needs no exception plumbing.

use std::sync::OnceLock;

use wasm_bindgen::prelude::wasm_bindgen;

use convcast::alloc::{allocate_optimal, build_cost_table, predict_usage, AllocationRequest};
use convcast::data::oracle_sweep;
use convcast::model::{
    descriptor, BlockKind, ConfigPoint, PlatformCapacity, ResourceKind, ResourceVector,
    SWEEP_MAX_BITS, SWEEP_MIN_BITS,
};
use convcast::regression::{fit_polynomial, fit_segmented, predict, Model, ModelSet};

/// Exact-recovery fits of the oracle closed forms, computed once.
fn models() -> &'static ModelSet {
    static MODELS: OnceLock<ModelSet> = OnceLock::new();
    MODELS.get_or_init(|| {
        let ds = oracle_sweep(
            &BlockKind::ALL,
            (SWEEP_MIN_BITS, SWEEP_MAX_BITS),
            (SWEEP_MIN_BITS, SWEEP_MAX_BITS),
            "zcu104",
        )
        .expect("full-range oracle sweep");
        let mut set = ModelSet::new();
        for block in BlockKind::ALL {
            for resource in [ResourceKind::Llut, ResourceKind::Mlut, ResourceKind::Ff] {
                // Conv3 LLUT/MLUT are step functions of c; everything else is
                // polynomial (Conv1 LLUT carries the bilinear d*c term)
                let model = if block == BlockKind::Conv3 && resource != ResourceKind::Ff {
                    Model::Segmented(fit_segmented(&ds, block, resource, 4).expect("step fit"))
                } else {
                    let degree = if block == BlockKind::Conv1 { 2 } else { 1 };
                    Model::Polynomial(
                        fit_polynomial(&ds, block, resource, degree).expect("poly fit"),
                    )
                };
                set.insert(model);
            }
        }
        set.insert(Model::Polynomial(
            fit_polynomial(&ds, BlockKind::Conv1, ResourceKind::Cchain, 1).expect("cchain fit"),
        ));
        set
    })
}

fn err(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

/// Prediction surface over the block's full valid (d, c) grid.
///
/// Returns `{block, resource, d: [..], c: [..], values: [[row per d]..]}`.
#[wasm_bindgen]
pub fn surface_grid(block: &str, resource: &str) -> String {
    let block: BlockKind = match block.parse() {
        Ok(b) => b,
        Err(e) => return err(e),
    };
    let resource: ResourceKind = match resource.parse() {
        Ok(r) => r,
        Err(e) => return err(e),
    };
    let max = descriptor(block).max_operand_bits.min(SWEEP_MAX_BITS);
    let model = match resource {
        ResourceKind::Dsp => None, // constant per block, no fitted model
        _ => match models().get(block, resource) {
            Some(m) => Some(m),
            None => return err(format!("no model for ({block}, {resource})")),
        },
    };
    let axis: Vec<u8> = (SWEEP_MIN_BITS..=max).collect();
    let values: Vec<Vec<f64>> = axis
        .iter()
        .map(|&d| {
            axis.iter()
                .map(|&c| match model {
                    Some(m) => predict(m, ConfigPoint::new(d, c)),
                    None => descriptor(block).dsp_per_block as f64,
                })
                .collect()
        })
        .collect();
    serde_json::json!({
        "block": block.to_string(),
        "resource": resource.to_string(),
        "d": axis,
        "c": axis,
        "values": values,
    })
    .to_string()
}

/// Predicted ZCU104 utilization for an instance mix at one configuration.
#[wasm_bindgen]
pub fn usage_for_counts(n1: u32, n2: u32, n3: u32, n4: u32, d: u8, c: u8) -> String {
    let counts = [n1 as u64, n2 as u64, n3 as u64, n4 as u64];
    let cfg = ConfigPoint::new(d, c);
    let costs = match build_cost_table(models(), cfg, &BlockKind::ALL) {
        Ok(t) => t,
        Err(e) => return err(e),
    };
    match predict_usage(&counts, &costs, &PlatformCapacity::zcu104()) {
        Ok((usage, total)) => usage_json(&counts, &usage, total),
        Err(e) => err(e),
    }
}

/// Convolutions-per-cycle-maximizing mix under a uniform budget fraction.
/// `allowed` is a comma-separated block list ("" means all four).
#[wasm_bindgen]
pub fn allocate_mix(budget: f64, d: u8, c: u8, allowed: &str) -> String {
    if !(budget > 0.0 && budget <= 1.0) {
        return err("budget must be in (0, 1]");
    }
    let allowed: Vec<BlockKind> = if allowed.trim().is_empty() {
        BlockKind::ALL.to_vec()
    } else {
        match allowed.split(',').map(|s| s.trim().parse()).collect() {
            Ok(list) => list,
            Err(e) => return err(e),
        }
    };
    let cfg = ConfigPoint::new(d, c);
    // blocks whose operand limit excludes this configuration drop out
    let allowed: Vec<BlockKind> = allowed
        .into_iter()
        .filter(|&b| convcast::model::validate_config(b, cfg).is_ok())
        .collect();
    let costs = match build_cost_table(models(), cfg, &allowed) {
        Ok(t) => t,
        Err(e) => return err(e),
    };
    let mut request = AllocationRequest::new(PlatformCapacity::zcu104(), cfg, allowed, costs);
    request.budgets = ResourceVector::splat(budget);
    match allocate_optimal(&request) {
        Ok(plan) => usage_json(&plan.counts, &plan.usage_percent, plan.total_convs),
        Err(e) => err(e),
    }
}

fn usage_json(counts: &[u64; 4], usage: &ResourceVector, total_convs: u64) -> String {
    serde_json::json!({
        "counts": counts,
        "usage_percent": {
            "llut": usage.llut,
            "mlut": usage.mlut,
            "ff": usage.ff,
            "cchain": usage.cchain,
            "dsp": usage.dsp,
        },
        "total_convs": total_convs,
    })
    .to_string()
}
