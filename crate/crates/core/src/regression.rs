//! Least-squares estimation of conditional expectations on a polynomial basis
//! of the state, plus an exact mode where each path is its own atom.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// State variables usable as regressors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateVar {
    X,
    LambdaA,
    LambdaB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_vars")]
    pub vars: Vec<StateVar>,
}

fn default_degree() -> usize {
    2
}

fn default_vars() -> Vec<StateVar> {
    vec![StateVar::X, StateVar::LambdaA, StateVar::LambdaB]
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self { degree: default_degree(), vars: default_vars() }
    }
}

impl BasisSpec {
    /// Number of monomials of total degree `<= degree` in the configured variables.
    pub fn size(&self) -> usize {
        monomials(self.vars.len(), self.degree).len()
    }
}

/// How conditional expectations are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Exact when the bundle is small enough, regression otherwise.
    #[default]
    Auto,
    /// Every path is its own atom.
    Exact,
    Regression,
}

impl Conditioning {
    pub fn resolve(self, n_paths: usize, exact_paths_max: usize) -> Conditioning {
        match self {
            Conditioning::Auto if n_paths <= exact_paths_max => Conditioning::Exact,
            Conditioning::Auto => Conditioning::Regression,
            other => other,
        }
    }
}

/// Exponent vectors of all monomials with total degree `<= degree`.
pub fn monomials(nvars: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; nvars]];
    for d in 1..=degree {
        let mut cur = vec![0; nvars];
        push_degree(nvars, d, 0, &mut cur, &mut out);
    }
    out
}

fn push_degree(nvars: usize, left: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if left == 0 {
        out.push(cur.clone());
        return;
    }
    for v in start..nvars {
        cur[v] += 1;
        push_degree(nvars, left - 1, v, cur, out);
        cur[v] -= 1;
    }
}

/// A factored regression design over a fixed set of rows.
#[derive(Debug, Clone)]
pub struct Design {
    n_rows: usize,
    n_cols: usize,
    /// Left singular vectors spanning the column space (rank columns).
    u: DMatrix<f64>,
    /// `V Σ^{-1}` restricted to the retained singular values.
    v_sinv: DMatrix<f64>,
    rank: usize,
}

impl Design {
    /// Build the design from raw state rows (one row per observation).
    /// Variables are centred and scaled; constant variables contribute nothing.
    pub fn new(rows: &[Vec<f64>], degree: usize) -> Self {
        let n = rows.len();
        let nvars = rows.first().map_or(0, |r| r.len());
        let mut keep = Vec::new();
        let mut centre = Vec::new();
        let mut scale = Vec::new();
        for v in 0..nvars {
            let m = rows.iter().map(|r| r[v]).sum::<f64>() / n.max(1) as f64;
            let var = rows.iter().map(|r| (r[v] - m).powi(2)).sum::<f64>() / n.max(1) as f64;
            let sd = var.sqrt();
            if sd > 1e-14 * (1.0 + m.abs()) {
                keep.push(v);
                centre.push(m);
                scale.push(sd);
            }
        }
        let powers = monomials(keep.len(), degree);
        let n_cols = powers.len();
        let mut a = DMatrix::<f64>::zeros(n, n_cols);
        for (i, r) in rows.iter().enumerate() {
            let z: Vec<f64> = keep
                .iter()
                .enumerate()
                .map(|(j, &v)| (r[v] - centre[j]) / scale[j])
                .collect();
            for (c, pw) in powers.iter().enumerate() {
                a[(i, c)] = pw.iter().zip(&z).map(|(&e, &zv)| zv.powi(e as i32)).product();
            }
        }
        Self::factor(a)
    }

    fn factor(a: DMatrix<f64>) -> Self {
        let (n_rows, n_cols) = a.shape();
        if n_rows == 0 {
            return Self {
                n_rows,
                n_cols,
                u: DMatrix::zeros(0, 0),
                v_sinv: DMatrix::zeros(n_cols, 0),
                rank: 0,
            };
        }
        let svd = a.svd(true, true);
        let u_full = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let tol = smax * 1e-10 * (n_rows.max(n_cols) as f64);
        let idx: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol).collect();
        let rank = idx.len();
        if rank < n_cols {
            log::debug!("rank-deficient regression design ({rank} of {n_cols} columns)");
        }
        let mut u = DMatrix::zeros(n_rows, rank);
        let mut v_sinv = DMatrix::zeros(n_cols, rank);
        for (j, &i) in idx.iter().enumerate() {
            u.set_column(j, &u_full.column(i));
            let s = svd.singular_values[i];
            for c in 0..n_cols {
                v_sinv[(c, j)] = vt[(i, c)] / s;
            }
        }
        Self { n_rows, n_cols, u, v_sinv, rank }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Fitted values (orthogonal projection of `y` onto the column space) and
    /// coefficients in the standardised basis.
    pub fn fit(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(y.len(), self.n_rows);
        if self.rank == 0 {
            let m = y.iter().sum::<f64>() / y.len().max(1) as f64;
            log::warn!("singular regression; using the path mean as continuation");
            return (vec![m; y.len()], vec![m]);
        }
        let yv = DVector::from_column_slice(y);
        let proj = self.u.transpose() * &yv;
        let fitted = &self.u * &proj;
        let coef = &self.v_sinv * &proj;
        if fitted.iter().any(|v| !v.is_finite()) {
            let m = y.iter().sum::<f64>() / y.len().max(1) as f64;
            log::warn!("non-finite regression fit; using the path mean as continuation");
            return (vec![m; y.len()], vec![m]);
        }
        (fitted.iter().cloned().collect(), coef.iter().cloned().collect())
    }
}

/// Conditional-expectation operator over a subset of paths at one time step.
#[derive(Debug, Clone)]
pub enum Conditioner {
    Exact,
    Regression(Design),
}

impl Conditioner {
    pub fn new(mode: Conditioning, rows: &[Vec<f64>], degree: usize) -> Self {
        match mode {
            Conditioning::Exact => Conditioner::Exact,
            _ => Conditioner::Regression(Design::new(rows, degree)),
        }
    }

    pub fn expect(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Conditioner::Exact => (y.to_vec(), Vec::new()),
            Conditioner::Regression(d) => d.fit(y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(3, 2).len(), 10);
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(0, 5).len(), 1);
        assert_eq!(BasisSpec::default().size(), 10);
    }

    #[test]
    fn quadratic_is_reproduced_exactly() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 * 0.1]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0] - 0.5 * r[0] * r[0]).collect();
        let d = Design::new(&rows, 2);
        let (fit, _) = d.fit(&y);
        for (a, b) in fit.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_state_gives_mean() {
        let rows = vec![vec![1.0, 0.1]; 20];
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let (fit, _) = Design::new(&rows, 2).fit(&y);
        assert!(fit.iter().all(|&v| (v - 9.5).abs() < 1e-12));
    }

    #[test]
    fn group_means_recovered_when_rank_deficient() {
        // two distinct states, cubic basis: the projection gives group means
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![if i < 4 { 1.0 } else { 2.0 }]).collect();
        let y = vec![1.0, 2.0, 3.0, 4.0, 10.0, 10.0, 12.0, 12.0];
        let (fit, _) = Design::new(&rows, 3).fit(&y);
        for f in &fit[..4] {
            assert!((f - 2.5).abs() < 1e-12);
        }
        for f in &fit[4..] {
            assert!((f - 11.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_is_identity() {
        let c = Conditioner::new(Conditioning::Exact, &[], 2);
        assert_eq!(c.expect(&[1.0, 2.0]).0, vec![1.0, 2.0]);
    }
}
