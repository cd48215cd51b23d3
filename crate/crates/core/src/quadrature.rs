//! Adaptive Gauss–Kronrod quadrature and geometric-block summation of
//! improper integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (abscissae in
// decreasing order, centre last).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "non-finite panel value on [{a}, {b}]"
        )));
    }
    Ok(Panel { a, b, value, error })
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Integrate `f` over `[a, b]` by globally adaptive bisection with a
/// 7/15-point Gauss–Kronrod rule per panel, to
/// `error <= max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Quad>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_PANELS: usize = 4000;
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let first = gauss_kronrod(&mut f, a, b)?;
    let mut total = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::from([first]);
    loop {
        if error <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::QuadratureFailure(format!(
                "tolerance {rel_tol:e} not met on [{a}, {b}] after {MAX_PANELS} panels \
                 (estimate {total}, error {error:e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // panel cannot be split further in floating point
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            error -= worst.error;
            continue;
        }
        let left = gauss_kronrod(&mut f, worst.a, mid)?;
        let right = gauss_kronrod(&mut f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // resum to shed accumulated update rounding
    let (value, err) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(Quad {
        value,
        error: err,
        panels: heap.len(),
    })
}

/// Outcome of summing an integral over a sequence of geometric blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesVerdict {
    /// Block integrals decayed geometrically; `value` includes the
    /// extrapolated geometric remainder.
    Converged { value: f64, blocks: Vec<f64> },
    /// Numerical evidence of divergence: a run of blocks that failed to
    /// decay.
    Divergent { blocks: Vec<f64> },
}

/// Decision rule for block sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRule {
    /// A block ratio at or above this counts as non-decaying.
    pub ratio_threshold: f64,
    /// Consecutive non-decaying blocks that establish divergence.
    pub run: usize,
    /// Relative size of the extrapolated remainder that ends summation.
    pub rel_tol: f64,
    pub max_blocks: usize,
}

impl BlockRule {
    pub fn new(rel_tol: f64, max_blocks: usize) -> Self {
        Self {
            ratio_threshold: 0.95,
            run: 8,
            rel_tol,
            max_blocks,
        }
    }
}

/// Sum `block(0) + block(1) + ...` where each block is an integral over a
/// geometrically shrinking (or growing) piece of an improper range.
pub fn sum_blocks<F>(mut block: F, rule: BlockRule) -> Result<SeriesVerdict>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut blocks: Vec<f64> = Vec::new();
    let mut sum = 0.0;
    let mut stalled = 0usize;
    let mut last_ratio = 1.0;
    for k in 0..rule.max_blocks {
        let b = block(k)?;
        blocks.push(b);
        sum += b;
        if b == 0.0 {
            return Ok(SeriesVerdict::Converged { value: sum, blocks });
        }
        if k == 0 {
            continue;
        }
        let prev = blocks[k - 1].abs();
        last_ratio = if prev == 0.0 { 0.0 } else { b.abs() / prev };
        if last_ratio >= rule.ratio_threshold {
            stalled += 1;
            if stalled >= rule.run {
                return Ok(SeriesVerdict::Divergent { blocks });
            }
            continue;
        }
        stalled = 0;
        let remainder = b * last_ratio / (1.0 - last_ratio);
        if k >= 2 && remainder.abs() <= rule.rel_tol * sum.abs() {
            return Ok(SeriesVerdict::Converged {
                value: sum + remainder,
                blocks,
            });
        }
    }
    if stalled == 0 && last_ratio < rule.ratio_threshold {
        let b = *blocks.last().unwrap_or(&0.0);
        let value = sum + b * last_ratio / (1.0 - last_ratio);
        Ok(SeriesVerdict::Converged { value, blocks })
    } else {
        Ok(SeriesVerdict::Divergent { blocks })
    }
}
