//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector integrands on
//! log-spaced frequency axes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-4, max_intervals: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Interval<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Interval<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Interval<N> {}
impl<const N: usize> PartialOrd for Interval<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Interval<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<Interval<N>>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..N {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        for k in 0..N {
            let sum = f1[k] + f2[k];
            kron[k] += WGK[j] * sum;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * sum;
            }
        }
    }
    let mut error = 0.0;
    for k in 0..N {
        kron[k] *= half;
        gauss[k] *= half;
        error += (kron[k] - gauss[k]).abs();
    }
    Ok(Interval { a, b, value: kron, error })
}

/// Integrate the vector function `f` over `[a, b]` starting from the given
/// breakpoints. Convergence is declared when the summed absolute error is below
/// `rel_tol` times `scale(value)`.
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    breakpoints: &[f64],
    scale: S,
    opts: QuadOptions,
) -> Result<QuadResult<N>>
where
    F: FnMut(f64) -> Result<[f64; N]>,
    S: Fn(&[f64; N]) -> f64,
{
    let mut pts: Vec<f64> = breakpoints.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("quadrature needs at least two distinct breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in pts.windows(2) {
        heap.push(gk15(&mut f, w[0], w[1])?);
        evaluations += 15;
    }
    loop {
        let (value, error) = totals(&heap);
        let target = opts.rel_tol * scale(&value).abs();
        if error <= target || error == 0.0 {
            return Ok(QuadResult { value, abs_error: error, evaluations });
        }
        if heap.len() >= opts.max_intervals {
            let achieved = error / scale(&value).abs().max(f64::MIN_POSITIVE);
            return Err(Error::Quadrature { achieved, requested: opts.rel_tol });
        }
        let worst = heap.pop().expect("non-empty interval heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            let achieved = error / scale(&value).abs().max(f64::MIN_POSITIVE);
            return Err(Error::Quadrature { achieved, requested: opts.rel_tol });
        }
        heap.push(gk15(&mut f, worst.a, mid)?);
        heap.push(gk15(&mut f, mid, worst.b)?);
        evaluations += 30;
    }
}

/// Sum interval contributions in ascending order of their left endpoint so the
/// result does not depend on the refinement history.
fn totals<const N: usize>(heap: &BinaryHeap<Interval<N>>) -> ([f64; N], f64) {
    let mut parts: Vec<&Interval<N>> = heap.iter().collect();
    parts.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = [0.0; N];
    let mut error = 0.0;
    for p in parts {
        for (v, x) in value.iter_mut().zip(&p.value) {
            *v += x;
        }
        error += p.error;
    }
    (value, error)
}

/// Integrate `f(omega)` over `[lo, hi]` in the variable `ln omega`.
pub fn integrate_log<const N: usize, F, S>(
    mut f: F,
    lo: f64,
    hi: f64,
    extra_breaks: &[f64],
    per_decade: usize,
    scale: S,
    opts: QuadOptions,
) -> Result<QuadResult<N>>
where
    F: FnMut(f64) -> Result<[f64; N]>,
    S: Fn(&[f64; N]) -> f64,
{
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("log quadrature needs 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let (ulo, uhi) = (lo.ln(), hi.ln());
    let n = (((uhi - ulo) / std::f64::consts::LN_10) * per_decade as f64).ceil().max(1.0) as usize;
    let mut breaks: Vec<f64> = (0..=n).map(|i| ulo + (uhi - ulo) * i as f64 / n as f64).collect();
    breaks.extend(extra_breaks.iter().filter(|&&x| x > lo && x < hi).map(|x| x.ln()));
    integrate(
        |u| {
            let w = u.exp();
            let mut v = f(w)?;
            for x in v.iter_mut() {
                *x *= w;
            }
            Ok(v)
        },
        &breaks,
        scale,
        opts,
    )
}
