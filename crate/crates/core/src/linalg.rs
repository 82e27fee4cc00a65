//! Small dense linear-algebra helpers shared across modules.

use ndarray::{Array1, Array2, ArrayView2};

/// Matrix exponential by scaling-and-squaring with a Taylor series.
///
/// Intended for the small generators used here (antisymmetric beamsplitter
/// blocks, symplectic algebra elements); not a general-purpose `expm`.
pub(crate) fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0f64, f64::max) * n as f64;
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);

    let mut result = Array2::eye(n);
    let mut term = Array2::eye(n);
    for k in 1..=30 {
        term = term.dot(&scaled) / k as f64;
        result += &term;
        let tnorm = term.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        if tnorm < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Kronecker product.
pub(crate) fn kron(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
            block.assign(&(b * aij));
        }
    }
    out
}

/// Forward substitution: solve `L y = b` for lower-triangular `L`.
pub(crate) fn solve_lower(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[[i, j]] * y[j];
        }
        y[i] = acc / l[[i, i]];
    }
    y
}

pub(crate) fn det2(m: &ArrayView2<f64>) -> f64 {
    m[[0, 0]] * m[[1, 1]] - m[[0, 1]] * m[[1, 0]]
}

pub(crate) fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
