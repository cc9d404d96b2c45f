//! Dense symmetric positive-definite solves for design-width matrices.

/// Lower Cholesky factor of a row-major `k x k` matrix.
#[derive(Clone, Debug)]
pub(crate) struct Cholesky {
    k: usize,
    l: Vec<f64>,
}

/// Column `column` is (numerically) a combination of `partners`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dependency {
    pub column: usize,
    pub partners: Vec<usize>,
}

/// Relative pivot below which a column is treated as dependent on its predecessors.
const PIVOT_TOL: f64 = 1e-10;

impl Cholesky {
    pub fn factor(a: &[f64], k: usize) -> Result<Self, Dependency> {
        debug_assert_eq!(a.len(), k * k);
        let mut l = vec![0.0; k * k];
        for j in 0..k {
            let diag = a[j * k + j];
            let mut d = diag;
            for m in 0..j {
                d -= l[j * k + m] * l[j * k + m];
            }
            if !(diag > 0.0) || !(d > PIVOT_TOL * diag) {
                let partners = if diag > 0.0 {
                    let partial = Cholesky {
                        k: j,
                        l: shrink(&l, k, j),
                    };
                    let rhs: Vec<f64> = (0..j).map(|m| a[m * k + j]).collect();
                    let c = partial.solve(&rhs);
                    let scale = c.iter().fold(0.0f64, |s, v| s.max(v.abs()));
                    (0..j).filter(|&m| c[m].abs() > 1e-6 * scale.max(1e-300)).collect()
                } else {
                    Vec::new()
                };
                return Err(Dependency { column: j, partners });
            }
            let ljj = d.sqrt();
            l[j * k + j] = ljj;
            for i in j + 1..k {
                let mut s = a[i * k + j];
                for m in 0..j {
                    s -= l[i * k + m] * l[j * k + m];
                }
                l[i * k + j] = s / ljj;
            }
        }
        Ok(Cholesky { k, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut y = b.to_vec();
        for i in 0..k {
            let mut s = y[i];
            for m in 0..i {
                s -= self.l[i * k + m] * y[m];
            }
            y[i] = s / self.l[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = y[i];
            for m in i + 1..k {
                s -= self.l[m * k + i] * y[m];
            }
            y[i] = s / self.l[i * k + i];
        }
        y
    }

    /// Diagonal of the inverse.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|c| {
                let mut e = vec![0.0; k];
                e[c] = 1.0;
                self.solve(&e)[c]
            })
            .collect()
    }
}

fn shrink(l: &[f64], k: usize, j: usize) -> Vec<f64> {
    let mut out = vec![0.0; j * j];
    for r in 0..j {
        out[r * j..r * j + j].copy_from_slice(&l[r * k..r * k + j]);
    }
    out
}
