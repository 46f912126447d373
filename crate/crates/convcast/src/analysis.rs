//! Statistics layer: Pearson correlation matrices and the four error
//! metrics (MSE, MAE, R2, MAPE).

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{BlockKind, ResourceKind};

/// Sample Pearson coefficient. A zero-variance series yields 0, matching the
/// reporting convention for resources that do not depend on an input.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Pairwise Pearson coefficients over the width columns and each non-trivial
/// resource column of one block's records.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub block: BlockKind,
    pub labels: Vec<String>,
    pub r: Vec<Vec<f64>>,
    /// Resource columns identically zero for this block, left out of the
    /// matrix.
    pub excluded: Vec<String>,
}

/// Candidate columns of the matrix; DSP is constant per block and never
/// enters.
const MATRIX_RESOURCES: [ResourceKind; 4] = [
    ResourceKind::Llut,
    ResourceKind::Mlut,
    ResourceKind::Ff,
    ResourceKind::Cchain,
];

pub fn correlation_matrix(dataset: &Dataset, block: BlockKind) -> Result<CorrelationMatrix> {
    let records: Vec<_> = dataset.for_block(block).collect();
    if records.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: records.len(),
        });
    }

    let mut labels = vec!["data_bits".to_string(), "coeff_bits".to_string()];
    let mut series: Vec<Vec<f64>> = vec![
        records.iter().map(|r| r.cfg.data_bits as f64).collect(),
        records.iter().map(|r| r.cfg.coeff_bits as f64).collect(),
    ];
    let mut excluded = Vec::new();
    for kind in MATRIX_RESOURCES {
        let col: Vec<f64> = records.iter().map(|r| r.measured.get(kind)).collect();
        if col.iter().all(|&v| v == 0.0) {
            excluded.push(kind.to_string());
        } else {
            labels.push(kind.to_string());
            series.push(col);
        }
    }

    let n = labels.len();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        r[i][i] = 1.0;
        for j in 0..i {
            let v = pearson(&series[i], &series[j])?;
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(CorrelationMatrix {
        block,
        labels,
        r,
        excluded,
    })
}

/// The four error metrics of a prediction set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
    pub mape_percent: f64,
    /// Zero-truth points excluded from the MAPE mean.
    pub mape_excluded: usize,
}

/// MSE, MAE, R2 (SST around the truth mean) and MAPE over nonzero truths.
pub fn evaluate(predictions: &[f64], truths: &[f64]) -> Result<MetricsReport> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if truths.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: truths.len(),
        });
    }
    let n = truths.len() as f64;
    let mean = truths.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    let mut abs_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut ape_count = 0usize;
    for (&p, &t) in predictions.iter().zip(truths) {
        let e = t - p;
        sse += e * e;
        sst += (t - mean) * (t - mean);
        abs_sum += e.abs();
        if t != 0.0 {
            ape_sum += e.abs() / t.abs();
            ape_count += 1;
        }
    }
    if ape_count == 0 {
        return Err(Error::AllTruthsZero);
    }
    let r2 = if sst == 0.0 {
        if sse == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - sse / sst
    };
    Ok(MetricsReport {
        mse: sse / n,
        mae: abs_sum / n,
        r2,
        mape_percent: 100.0 * ape_sum / ape_count as f64,
        mape_excluded: truths.len() - ape_count,
    })
}
