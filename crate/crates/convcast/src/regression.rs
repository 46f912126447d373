//! Bivariate polynomial least squares (degrees 1..4), the model-selection
//! loop with its parsimony rule and insignificant-term pruning, segmented
//! regression for step-shaped targets, and prediction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analysis::pearson;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{BlockKind, ConfigPoint, ResourceKind};
use crate::TOOLKIT_VERSION;

/// Default acceptance threshold for training R2.
pub const DEFAULT_R2_THRESHOLD: f64 = 0.9;
/// Default significance level for term pruning.
pub const DEFAULT_PRUNE_ALPHA: f64 = 0.05;
/// Default segment budget for segmented fits.
pub const DEFAULT_MAX_SEGMENTS: usize = 4;

/// Relative correlation bound under which a target counts as independent of
/// the data width, justifying a single-variable segmented model.
const SEGMENTED_GUARD_R: f64 = 0.05;

/// One monomial `d^i * c^j` of the bivariate basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub d_exp: u32,
    pub c_exp: u32,
}

impl MonomialTerm {
    pub fn eval(&self, cfg: ConfigPoint) -> f64 {
        (cfg.data_bits as f64).powi(self.d_exp as i32)
            * (cfg.coeff_bits as f64).powi(self.c_exp as i32)
    }

    pub fn total_degree(&self) -> u32 {
        self.d_exp + self.c_exp
    }
}

impl std::fmt::Display for MonomialTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.d_exp, self.c_exp) {
            (0, 0) => write!(f, "1"),
            (i, 0) => write!(f, "d^{i}"),
            (0, j) => write!(f, "c^{j}"),
            (i, j) => write!(f, "d^{i}c^{j}"),
        }
    }
}

/// The full bivariate basis `{d^i c^j : i + j <= degree}`, intercept first,
/// ordered by total degree then descending d exponent.
pub fn basis_terms(degree: u32) -> Vec<MonomialTerm> {
    let mut terms = Vec::new();
    for total in 0..=degree {
        for d_exp in (0..=total).rev() {
            terms.push(MonomialTerm {
                d_exp,
                c_exp: total - d_exp,
            });
        }
    }
    terms
}

/// The rectangle of configurations a model was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedDomain {
    pub d_min: u8,
    pub d_max: u8,
    pub c_min: u8,
    pub c_max: u8,
}

impl FittedDomain {
    fn of(configs: &[ConfigPoint]) -> Self {
        FittedDomain {
            d_min: configs.iter().map(|c| c.data_bits).min().unwrap_or(0),
            d_max: configs.iter().map(|c| c.data_bits).max().unwrap_or(0),
            c_min: configs.iter().map(|c| c.coeff_bits).min().unwrap_or(0),
            c_max: configs.iter().map(|c| c.coeff_bits).max().unwrap_or(0),
        }
    }

    pub fn contains(&self, cfg: ConfigPoint) -> bool {
        (self.d_min..=self.d_max).contains(&cfg.data_bits)
            && (self.c_min..=self.c_max).contains(&cfg.coeff_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub block: BlockKind,
    pub resource: ResourceKind,
    pub terms: Vec<MonomialTerm>,
    pub coefficients: Vec<f64>,
    pub training_r2: f64,
    pub degree: u32,
    #[serde(rename = "fitted_domain")]
    pub domain: FittedDomain,
}

impl PolynomialModel {
    pub fn eval(&self, cfg: ConfigPoint) -> f64 {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, &b)| b * t.eval(cfg))
            .sum()
    }
}

/// Piecewise-constant model in the coefficient width. `breakpoints[k]` is the
/// first c value of segment k+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedModel {
    pub block: BlockKind,
    pub resource: ResourceKind,
    pub breakpoints: Vec<u8>,
    pub segment_values: Vec<f64>,
    pub training_r2: f64,
    #[serde(rename = "fitted_domain")]
    pub domain: FittedDomain,
}

impl SegmentedModel {
    pub fn eval(&self, cfg: ConfigPoint) -> f64 {
        let idx = self
            .breakpoints
            .iter()
            .filter(|&&b| b <= cfg.coeff_bits)
            .count();
        self.segment_values[idx]
    }
}

/// A fitted predictor of one (block, resource) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Polynomial(PolynomialModel),
    Segmented(SegmentedModel),
}

impl Model {
    pub fn block(&self) -> BlockKind {
        match self {
            Model::Polynomial(m) => m.block,
            Model::Segmented(m) => m.block,
        }
    }

    pub fn resource(&self) -> ResourceKind {
        match self {
            Model::Polynomial(m) => m.resource,
            Model::Segmented(m) => m.resource,
        }
    }

    pub fn training_r2(&self) -> f64 {
        match self {
            Model::Polynomial(m) => m.training_r2,
            Model::Segmented(m) => m.training_r2,
        }
    }

    pub fn domain(&self) -> FittedDomain {
        match self {
            Model::Polynomial(m) => m.domain,
            Model::Segmented(m) => m.domain,
        }
    }
}

/// Prediction with its caveats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// cfg lies outside the fitted domain.
    pub extrapolated: bool,
    /// a negative raw prediction was clamped to 0.
    pub clamped: bool,
}

/// Evaluates a model at a configuration. Total on valid configs; negative
/// predictions clamp to 0 and extrapolation is flagged, not refused.
pub fn predict_checked(model: &Model, cfg: ConfigPoint) -> Prediction {
    let raw = match model {
        Model::Polynomial(m) => m.eval(cfg),
        Model::Segmented(m) => m.eval(cfg),
    };
    Prediction {
        value: raw.max(0.0),
        extrapolated: !model.domain().contains(cfg),
        clamped: raw < 0.0,
    }
}

pub fn predict(model: &Model, cfg: ConfigPoint) -> f64 {
    predict_checked(model, cfg).value
}

/// Model file wrapper carrying the toolkit version stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub toolkit_version: String,
    #[serde(flatten)]
    pub model: Model,
}

pub fn model_to_json(model: &Model) -> String {
    let file = ModelFile {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        model: model.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization")
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
    Ok(file.model)
}

/// Keyed collection of fitted models.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    map: BTreeMap<(BlockKind, ResourceKind), Model>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: Model) {
        self.map.insert((model.block(), model.resource()), model);
    }

    pub fn get(&self, block: BlockKind, resource: ResourceKind) -> Option<&Model> {
        self.map.get(&(block, resource))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Model> {
        self.map.values()
    }
}

// --- least squares machinery ---

struct TargetSeries {
    configs: Vec<ConfigPoint>,
    values: Vec<f64>,
}

fn target_series(
    dataset: &Dataset,
    block: BlockKind,
    resource: ResourceKind,
) -> Result<TargetSeries> {
    let mut configs = Vec::new();
    let mut values = Vec::new();
    for rec in dataset.for_block(block) {
        configs.push(rec.cfg);
        values.push(rec.measured.get(resource));
    }
    if configs.is_empty() {
        return Err(Error::NoRecords(block));
    }
    Ok(TargetSeries { configs, values })
}

fn distinct_configs(configs: &[ConfigPoint]) -> usize {
    let mut seen: Vec<ConfigPoint> = configs.to_vec();
    seen.sort();
    seen.dedup();
    seen.len()
}

struct OlsFit {
    beta: Vec<f64>,
    sse: f64,
    sst: f64,
    r2: f64,
    /// diag of (X^T X)^-1, for coefficient standard errors
    inv_diag: Vec<f64>,
    n: usize,
}

/// Ordinary least squares over an explicit term basis, solved by singular
/// value decomposition. The normal matrix is never formed.
fn ols(series: &TargetSeries, terms: &[MonomialTerm]) -> Result<OlsFit> {
    let n = series.configs.len();
    let m = terms.len();
    let x = DMatrix::from_fn(n, m, |r, k| terms[k].eval(series.configs[r]));
    let y = DVector::from_column_slice(&series.values);

    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if max_sv <= 0.0 || min_sv / max_sv < 1e-12 {
        let basis = terms
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::RankDeficient { basis });
    }
    let beta = svd.solve(&y, 0.0).map_err(|e| Error::RankDeficient {
        basis: e.to_string(),
    })?;

    let residual = &y - &x * &beta;
    let sse = residual.norm_squared();
    let mean = y.mean();
    let sst = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let r2 = if sst == 0.0 {
        if sse < 1e-18 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - sse / sst
    };

    // (X^T X)^-1 = V S^-2 V^T
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut inv_diag = vec![0.0; m];
    for (k, d) in inv_diag.iter_mut().enumerate() {
        for l in 0..svd.singular_values.len() {
            let s = svd.singular_values[l];
            let vkl = v_t[(l, k)];
            *d += vkl * vkl / (s * s);
        }
    }

    Ok(OlsFit {
        beta: beta.iter().copied().collect(),
        sse,
        sst,
        r2,
        inv_diag,
        n,
    })
}

fn fit_terms(
    dataset: &Dataset,
    block: BlockKind,
    resource: ResourceKind,
    terms: Vec<MonomialTerm>,
) -> Result<(PolynomialModel, OlsFit)> {
    let series = target_series(dataset, block, resource)?;
    let fit = ols(&series, &terms)?;
    let degree = terms
        .iter()
        .map(|t| t.total_degree())
        .max()
        .unwrap_or(0)
        .max(1);
    let model = PolynomialModel {
        block,
        resource,
        coefficients: fit.beta.clone(),
        training_r2: fit.r2,
        degree,
        domain: FittedDomain::of(&series.configs),
        terms,
    };
    Ok((model, fit))
}

/// OLS fit of the full bivariate basis of the given degree. Requires at
/// least twice as many distinct configurations as basis terms.
pub fn fit_polynomial(
    dataset: &Dataset,
    block: BlockKind,
    resource: ResourceKind,
    degree: u32,
) -> Result<PolynomialModel> {
    assert!((1..=4).contains(&degree), "degree must be 1..=4");
    let series = target_series(dataset, block, resource)?;
    let terms = basis_terms(degree);
    let distinct = distinct_configs(&series.configs);
    if distinct < 2 * terms.len() {
        return Err(Error::InsufficientData {
            got: distinct,
            terms: terms.len(),
            needed: 2 * terms.len(),
        });
    }
    let (mut model, _) = fit_terms(dataset, block, resource, terms)?;
    model.degree = degree;
    Ok(model)
}

fn p_values(fit: &OlsFit) -> Option<Vec<f64>> {
    let m = fit.beta.len();
    let df = fit.n.checked_sub(m)?;
    if df == 0 {
        return None;
    }
    if fit.sse <= 1e-16 * fit.sst.max(1e-12) {
        return None; // residual variance is effectively zero
    }
    let sigma2 = fit.sse / df as f64;
    let dist = StudentsT::new(0.0, 1.0, df as f64).ok()?;
    Some(
        fit.beta
            .iter()
            .zip(&fit.inv_diag)
            .map(|(&b, &v)| {
                let se = (sigma2 * v).sqrt();
                if se == 0.0 {
                    return 0.0;
                }
                let t = (b / se).abs();
                2.0 * (1.0 - dist.cdf(t))
            })
            .collect(),
    )
}

fn prune_with_report(
    model: &PolynomialModel,
    dataset: &Dataset,
    alpha: f64,
) -> Result<(PolynomialModel, Vec<(MonomialTerm, f64)>)> {
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
    let (_, fit) = fit_terms(dataset, model.block, model.resource, model.terms.clone())?;

    let mut removed = Vec::new();
    let survivors: Vec<MonomialTerm> = match p_values(&fit) {
        Some(ps) => model
            .terms
            .iter()
            .zip(&ps)
            .filter_map(|(&t, &p)| {
                if t.total_degree() == 0 || p <= alpha {
                    Some(t)
                } else {
                    removed.push((t, p));
                    None
                }
            })
            .collect(),
        None => {
            // perfect fit: keep nonzero coefficients, drop exact zeros
            let scale = fit.beta.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            model
                .terms
                .iter()
                .zip(&fit.beta)
                .filter_map(|(&t, &b)| {
                    if t.total_degree() == 0 || b.abs() > 1e-9 * scale {
                        Some(t)
                    } else {
                        removed.push((t, 1.0));
                        None
                    }
                })
                .collect()
        }
    };

    if removed.is_empty() {
        return Ok((model.clone(), removed));
    }
    let (refit, _) = fit_terms(dataset, model.block, model.resource, survivors)?;
    Ok((refit, removed))
}

/// Removes, in one pass, every non-intercept term whose two-sided t-test
/// p-value exceeds `alpha`, then refits on the surviving basis. A perfect
/// fit keeps nonzero-coefficient terms and drops exact zeros.
pub fn prune_insignificant(
    model: &PolynomialModel,
    dataset: &Dataset,
    alpha: f64,
) -> Result<PolynomialModel> {
    prune_with_report(model, dataset, alpha).map(|(m, _)| m)
}

/// How a selection run concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Polynomial,
    Segmented,
    None,
}

/// Trace of a model-selection run.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSelectionReport {
    /// training R2 per fitted degree (degrees whose preconditions fail are
    /// absent)
    pub per_degree_r2: Vec<(u32, f64)>,
    pub chosen_degree: Option<u32>,
    /// terms removed by pruning, with their p-values
    pub pruned_terms: Vec<(MonomialTerm, f64)>,
    pub post_prune_r2: Option<f64>,
    pub route: Route,
    pub accepted: bool,
}

/// Result of [`select_model`]: the chosen model, if any, plus the trace.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub model: Option<Model>,
    pub report: ModelSelectionReport,
}

/// Fits degrees 1..4 and applies the parsimony rule: among models reaching
/// the R2 threshold, the one with MINIMAL training R2 wins, ties broken
/// toward lower degree; the winner is then pruned, and the pruned model kept
/// only if it still reaches the threshold.
///
/// Targets that are independent of the data width (the correlation guard of
/// [`fit_segmented`]) are additionally offered a segmented fit; it is
/// preferred when it reaches the threshold with fewer parameters than the
/// polynomial choice, or when no polynomial qualifies.
pub fn select_model(
    dataset: &Dataset,
    block: BlockKind,
    resource: ResourceKind,
    r2_threshold: f64,
    alpha: f64,
) -> Result<SelectionOutcome> {
    let mut per_degree_r2 = Vec::new();
    let mut fits: Vec<(u32, PolynomialModel)> = Vec::new();
    for degree in 1..=4 {
        match fit_polynomial(dataset, block, resource, degree) {
            Ok(model) => {
                per_degree_r2.push((degree, model.training_r2));
                fits.push((degree, model));
            }
            Err(Error::InsufficientData { .. }) | Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }

    // parsimony: minimal R2 at or above the threshold; R2 values within 1e-9
    // count as tied and the lower degree wins
    let poly_choice = fits
        .iter()
        .filter(|(_, m)| m.training_r2 >= r2_threshold)
        .min_by(|(da, a), (db, b)| {
            if (a.training_r2 - b.training_r2).abs() <= 1e-9 {
                da.cmp(db)
            } else {
                a.training_r2.partial_cmp(&b.training_r2).unwrap()
            }
        })
        .map(|(d, m)| (*d, m.clone()));

    let segmented =
        match fit_segmented_with(dataset, block, resource, DEFAULT_MAX_SEGMENTS, r2_threshold) {
            Ok(seg) => Some(seg),
            Err(Error::SegmentedGuard { .. })
            | Err(Error::SegmentedBelowThreshold { .. })
            | Err(Error::TooFewDistinctValues(_)) => None,
            Err(e) => return Err(e),
        };

    let take_segmented = match (&segmented, &poly_choice) {
        (Some(seg), Some((_, poly))) => seg.segment_values.len() < poly.terms.len(),
        (Some(_), None) => true,
        (None, _) => false,
    };

    if take_segmented {
        let seg = segmented.expect("checked above");
        return Ok(SelectionOutcome {
            report: ModelSelectionReport {
                per_degree_r2,
                chosen_degree: None,
                pruned_terms: Vec::new(),
                post_prune_r2: None,
                route: Route::Segmented,
                accepted: true,
            },
            model: Some(Model::Segmented(seg)),
        });
    }

    let Some((degree, chosen)) = poly_choice else {
        return Ok(SelectionOutcome {
            report: ModelSelectionReport {
                per_degree_r2,
                chosen_degree: None,
                pruned_terms: Vec::new(),
                post_prune_r2: None,
                route: Route::None,
                accepted: false,
            },
            model: None,
        });
    };

    let (pruned, removed) = prune_with_report(&chosen, dataset, alpha)?;
    let post_prune_r2 = pruned.training_r2;
    let final_model = if post_prune_r2 >= r2_threshold {
        pruned
    } else {
        chosen
    };
    Ok(SelectionOutcome {
        report: ModelSelectionReport {
            per_degree_r2,
            chosen_degree: Some(degree),
            pruned_terms: removed,
            post_prune_r2: Some(post_prune_r2),
            route: Route::Polynomial,
            accepted: true,
        },
        model: Some(Model::Polynomial(final_model)),
    })
}

/// [`fit_segmented_with`] at the default 0.9 threshold.
pub fn fit_segmented(
    dataset: &Dataset,
    block: BlockKind,
    resource: ResourceKind,
    max_segments: usize,
) -> Result<SegmentedModel> {
    fit_segmented_with(dataset, block, resource, max_segments, DEFAULT_R2_THRESHOLD)
}

/// Piecewise-constant fit in the coefficient width by exhaustive breakpoint
/// search: minimal segment count reaching the R2 threshold, minimal SSE among
/// equal counts, leftmost breakpoints on ties.
///
/// Guarded: the target must be uncorrelated with the data width
/// (|r| <= 0.05), otherwise the single-variable model is not justified.
pub fn fit_segmented_with(
    dataset: &Dataset,
    block: BlockKind,
    resource: ResourceKind,
    max_segments: usize,
    r2_threshold: f64,
) -> Result<SegmentedModel> {
    let series = target_series(dataset, block, resource)?;
    if series.values.len() >= 2 {
        let d_col: Vec<f64> = series.configs.iter().map(|c| c.data_bits as f64).collect();
        let guard = pearson(&series.values, &d_col)?;
        if guard.abs() > SEGMENTED_GUARD_R {
            return Err(Error::SegmentedGuard { resource, r: guard });
        }
    }

    let mut c_values: Vec<u8> = series.configs.iter().map(|c| c.coeff_bits).collect();
    c_values.sort_unstable();
    c_values.dedup();
    let k = c_values.len();
    if k < 2 {
        return Err(Error::TooFewDistinctValues(k));
    }

    // per-c pooled sums over all data widths
    let mut sums = vec![0.0; k];
    let mut sq_sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (cfg, &y) in series.configs.iter().zip(&series.values) {
        let idx = c_values.binary_search(&cfg.coeff_bits).unwrap();
        sums[idx] += y;
        sq_sums[idx] += y * y;
        counts[idx] += 1;
    }
    let total: f64 = series.values.iter().sum();
    let n = series.values.len() as f64;
    let mean = total / n;
    let sst: f64 = series.values.iter().map(|v| (v - mean) * (v - mean)).sum();

    // SSE of one segment spanning c index range [lo, hi)
    let seg_sse = |lo: usize, hi: usize| -> f64 {
        let s: f64 = sums[lo..hi].iter().sum();
        let sq: f64 = sq_sums[lo..hi].iter().sum();
        let cnt: f64 = counts[lo..hi].iter().sum::<usize>() as f64;
        sq - s * s / cnt
    };
    let seg_mean = |lo: usize, hi: usize| -> f64 {
        let s: f64 = sums[lo..hi].iter().sum();
        let cnt: f64 = counts[lo..hi].iter().sum::<usize>() as f64;
        s / cnt
    };

    // advances a strictly increasing combination of cut positions in 1..k;
    // false once exhausted
    fn next_combination(cuts: &mut [usize], k: usize) -> bool {
        let m = cuts.len();
        let mut i = m;
        while i > 0 {
            i -= 1;
            if cuts[i] < k - 1 - (m - 1 - i) {
                cuts[i] += 1;
                for j in i + 1..m {
                    cuts[j] = cuts[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }

    let mut overall_best_r2 = f64::NEG_INFINITY;
    for segments in 1..=max_segments.min(k) {
        // all ways to cut the k distinct c values into `segments` contiguous
        // runs, enumerated with leftmost cut positions first; strict
        // improvement keeps the leftmost optimum
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut cuts: Vec<usize> = (1..segments).collect();
        loop {
            let mut bounds = Vec::with_capacity(segments + 1);
            bounds.push(0);
            bounds.extend(cuts.iter().copied());
            bounds.push(k);
            let sse: f64 = bounds.windows(2).map(|w| seg_sse(w[0], w[1])).sum();
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                best = Some((sse, cuts.clone()));
            }
            if !next_combination(&mut cuts, k) {
                break;
            }
        }

        let (sse, cuts) = best.expect("at least one partition");
        let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
        overall_best_r2 = overall_best_r2.max(r2);
        if r2 >= r2_threshold {
            let mut bounds = Vec::with_capacity(segments + 1);
            bounds.push(0);
            bounds.extend(cuts.iter().copied());
            bounds.push(k);
            let segment_values: Vec<f64> =
                bounds.windows(2).map(|w| seg_mean(w[0], w[1])).collect();
            let breakpoints: Vec<u8> = cuts.iter().map(|&i| c_values[i]).collect();
            return Ok(SegmentedModel {
                block,
                resource,
                breakpoints,
                segment_values,
                training_r2: r2,
                domain: FittedDomain::of(&series.configs),
            });
        }
    }
    Err(Error::SegmentedBelowThreshold {
        threshold: r2_threshold,
        best_r2: overall_best_r2,
    })
}
