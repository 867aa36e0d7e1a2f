//! Deliberately naive reference computations.
//!
//! Everything here works on plain `f64` slices with nested loops so it shares
//! no code path with the kernels it is used to check. Nothing in this crate is
//! fast and nothing in it should be.

/// Triple-loop matrix product of a row-major `[m, k]` by a row-major `[k, n]`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    c
}

/// Direct valid-padding, stride-1 convolution (cross-correlation).
///
/// `x` is `[n, c, h, w]`, `weights` is `[f, c, kh, kw]`, result is
/// `[n, f, h - kh + 1, w - kw + 1]`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f64],
    (n, c, h, w): (usize, usize, usize, usize),
    weights: &[f64],
    (f, kh, kw): (usize, usize, usize),
    bias: &[f64],
) -> Vec<f64> {
    let oh = h - kh + 1;
    let ow = w - kw + 1;
    let mut y = vec![0.0; n * f * oh * ow];
    for b in 0..n {
        for o in 0..f {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = bias[o];
                    for ch in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                let xv = x[((b * c + ch) * h + i + u) * w + j + v];
                                let wv = weights[((o * c + ch) * kh + u) * kw + v];
                                acc += xv * wv;
                            }
                        }
                    }
                    y[((b * f + o) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    y
}

/// Gathers every receptive field of a valid-padding window walk.
///
/// Returns `[c * kh * kw, n * oh * ow]`: row `(ch, u, v)`, column
/// `(b, i, j)`.
pub fn window_gather(
    x: &[f64],
    (n, c, h, w): (usize, usize, usize, usize),
    kh: usize,
    kw: usize,
    stride: usize,
) -> Vec<f64> {
    let oh = (h - kh) / stride + 1;
    let ow = (w - kw) / stride + 1;
    let cols = n * oh * ow;
    let mut out = vec![0.0; c * kh * kw * cols];
    for ch in 0..c {
        for u in 0..kh {
            for v in 0..kw {
                let row = (ch * kh + u) * kw + v;
                for b in 0..n {
                    for i in 0..oh {
                        for j in 0..ow {
                            let col = (b * oh + i) * ow + j;
                            let src = ((b * c + ch) * h + i * stride + u) * w + j * stride + v;
                            out[row * cols + col] = x[src];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Exhaustive 2x2 stride-2 window maximum, floor mode.
pub fn window_max(x: &[f64], (n, c, h, w): (usize, usize, usize, usize)) -> Vec<f64> {
    let oh = h / 2;
    let ow = w / 2;
    let mut y = vec![0.0; n * c * oh * ow];
    for plane in 0..n * c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for u in 0..2 {
                    for v in 0..2 {
                        best = best.max(x[(plane * h + 2 * i + u) * w + 2 * j + v]);
                    }
                }
                y[(plane * oh + i) * ow + j] = best;
            }
        }
    }
    y
}

/// Central finite difference of `f` with respect to coordinate `index`.
pub fn central_difference<F>(mut f: F, point: &[f64], index: usize, step: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = point.to_vec();
    probe[index] = point[index] + step;
    let up = f(&probe);
    probe[index] = point[index] - step;
    let down = f(&probe);
    (up - down) / (2.0 * step)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// AUC by enumerating every positive/negative pair; ties count one half.
pub fn pairwise_auc(positives: &[f64], negatives: &[f64]) -> f64 {
    assert!(!positives.is_empty() && !negatives.is_empty());
    let mut wins = 0.0;
    for &p in positives {
        for &q in negatives {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (positives.len() * negatives.len()) as f64
}

/// Index of the first maximal entry.
pub fn first_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Counts `[true][predicted]` pairs by scanning every cell for every sample.
pub fn enumerate_confusion(predicted: &[usize], labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; classes]; classes];
    for t in 0..classes {
        for p in 0..classes {
            m[t][p] = predicted
                .iter()
                .zip(labels)
                .filter(|&(&pr, &lb)| lb == t && pr == p)
                .count();
        }
    }
    m
}
