use crate::BaselineError;

/// `y ≈ w · x + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }
}

const REL_CUTOFF: f64 = 1e-10;
const MAX_SWEEPS: usize = 80;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One-sided Jacobi: rotates the columns of `cols` until they are mutually
/// orthogonal, applying the same rotations to the columns of `v` (which
/// starts as the identity). Afterwards `A V = cols`; both are stored as
/// lists of columns.
fn jacobi_orthogonalize(cols: &mut [Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut *cols, &mut v] {
                    let (lo, hi) = m.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (xp, xq) = (*x, *y);
                        *x = c * xp - s * xq;
                        *y = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

/// Minimum-norm least squares on the centred system, with the intercept
/// matching the means. Singular values below `1e-10 · σ_max` are dropped.
/// `ridge > 0` shrinks every direction by `σ² / (σ² + ridge)`.
pub fn fit_minnorm(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Result<LinearFit, BaselineError> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(BaselineError::Input(format!("{n} rows and {} targets", y.len())));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(BaselineError::Input("rows differ in length".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) || !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(BaselineError::Input("non-finite regression input".into()));
    }
    let xm: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let xc: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&xm).map(|(a, m)| a - m).collect()).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();

    let mut weights = vec![0.0; d];
    if n <= d {
        // columns of Xᵀ: X = V Σ Uᵀ, w = Σ_j B_j (V_jᵀ y) / σ_j²
        let mut b = xc;
        let v = jacobi_orthogonalize(&mut b);
        let sig2: Vec<f64> = b.iter().map(|c| dot(c, c)).collect();
        let cut = (sig2.iter().cloned().fold(0.0, f64::max)).sqrt() * REL_CUTOFF;
        for j in 0..n {
            if sig2[j].sqrt() <= cut || sig2[j] == 0.0 {
                continue;
            }
            let proj = dot(&v[j], &yc);
            let f = proj / (sig2[j] + ridge);
            for (w, &bj) in weights.iter_mut().zip(&b[j]) {
                *w += f * bj;
            }
        }
    } else {
        // columns of X: X V = B, w = Σ_j V_j (B_jᵀ y) / σ_j²
        let mut b: Vec<Vec<f64>> = (0..d).map(|j| xc.iter().map(|r| r[j]).collect()).collect();
        let v = jacobi_orthogonalize(&mut b);
        let sig2: Vec<f64> = b.iter().map(|c| dot(c, c)).collect();
        let cut = (sig2.iter().cloned().fold(0.0, f64::max)).sqrt() * REL_CUTOFF;
        for j in 0..d {
            if sig2[j].sqrt() <= cut || sig2[j] == 0.0 {
                continue;
            }
            let f = dot(&b[j], &yc) / (sig2[j] + ridge);
            for (i, w) in weights.iter_mut().enumerate() {
                *w += f * v[j][i];
            }
        }
    }
    let intercept = ym - dot(&weights, &xm);
    Ok(LinearFit { weights, intercept })
}
