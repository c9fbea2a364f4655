//! Gauss rules and the composite Gauss–Legendre time grid on `[0, T]`.
//!
//! Grid functions are stored column-wise: an `n x N` matrix whose column `a`
//! holds the value at node `a`. Within each panel a grid function is treated
//! as its degree `q - 1` polynomial interpolant, which gives spectrally
//! accurate interpolation, antiderivatives and derivatives for smooth data.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, Mat};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let q = order;
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the standard normal density (probabilists'
/// convention): `Σ wᵢ g(xᵢ) ≈ ∫ g(x) e^{-x²/2} dx / √(2π)`, weights summing to 1.
pub fn gauss_hermite_normal(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let q = order;
    // Jacobi matrix of the orthonormal Hermite polynomials for initial nodes.
    let jac = Mat::from_fn(q, q, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(q);
    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (p, p_prev, _) = hermite_orthonormal(q, *x);
            let dp = (q as f64).sqrt() * p_prev;
            let dx = p / dp;
            *x -= dx;
            if dx.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, christoffel) = hermite_orthonormal(q, *x);
        weights.push(1.0 / christoffel);
    }
    (nodes, weights)
}

/// Returns `(p_q(x), p_{q-1}(x), Σ_{k<q} p_k(x)²)` for the orthonormal
/// probabilists' Hermite polynomials.
fn hermite_orthonormal(q: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum = 0.0;
    for k in 0..q {
        sum += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum)
}

/// Composite Gauss–Legendre grid: `panels` equal panels of `order` nodes each.
#[derive(Debug, Clone)]
pub struct PanelGrid {
    horizon: f64,
    panels: usize,
    order: usize,
    ref_nodes: Vec<f64>,
    ref_weights: Vec<f64>,
    bary: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `S[i][j] = ∫_{-1}^{x_i} ℓ_j` on the reference panel.
    ref_integration: Mat,
    /// `D[i][j] = ℓ_j'(x_i)` on the reference panel.
    ref_derivative: Mat,
}

impl PanelGrid {
    pub fn new(horizon: f64, panels: usize, order: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if panels == 0 || order < 2 {
            return Err(Error::InvalidArgument(
                "grid needs at least one panel of two or more nodes".into(),
            ));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(order);
        let bary: Vec<f64> = (0..order)
            .map(|j| {
                let prod: f64 = (0..order)
                    .filter(|&k| k != j)
                    .map(|k| ref_nodes[j] - ref_nodes[k])
                    .product();
                1.0 / prod
            })
            .collect();
        let h = horizon / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * h;
            for i in 0..order {
                nodes.push(a + 0.5 * h * (ref_nodes[i] + 1.0));
                weights.push(0.5 * h * ref_weights[i]);
            }
        }
        let mut grid = PanelGrid {
            horizon,
            panels,
            order,
            ref_nodes,
            ref_weights,
            bary,
            nodes,
            weights,
            ref_integration: Mat::zeros(order, order),
            ref_derivative: Mat::zeros(order, order),
        };
        let mut s = Mat::zeros(order, order);
        for i in 0..order {
            let row = grid.ref_integration_row(grid.ref_nodes[i]);
            for j in 0..order {
                s[(i, j)] = row[j];
            }
        }
        let mut d = Mat::zeros(order, order);
        for i in 0..order {
            let mut diag = 0.0;
            for j in 0..order {
                if i != j {
                    let v = (grid.bary[j] / grid.bary[i])
                        / (grid.ref_nodes[i] - grid.ref_nodes[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        grid.ref_integration = s;
        grid.ref_derivative = d;
        Ok(grid)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn panels(&self) -> usize {
        self.panels
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn panel_width(&self) -> f64 {
        self.horizon / self.panels as f64
    }

    /// Same rule with twice as many panels.
    pub fn refined(&self) -> Self {
        PanelGrid::new(self.horizon, 2 * self.panels, self.order).expect("valid parent grid")
    }

    /// Panel boundaries `0 = b_0 < … < b_P = T`.
    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.panels).map(|p| p as f64 * self.panel_width()).collect()
    }

    pub fn check<T: ComplexField>(&self, values: &DMatrix<T>) -> Result<()> {
        if values.ncols() != self.len() {
            return Err(Error::GridMismatch(format!(
                "grid function has {} samples, grid has {} nodes",
                values.ncols(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Panel index containing `t` and the matching reference coordinate.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let h = self.panel_width();
        let t = t.clamp(0.0, self.horizon);
        let p = ((t / h).floor() as usize).min(self.panels - 1);
        let x = 2.0 * (t - p as f64 * h) / h - 1.0;
        (p, x.clamp(-1.0, 1.0))
    }

    /// Lagrange basis values `ℓ_j(x)` at a reference coordinate.
    pub fn lagrange_row(&self, x: f64) -> Vec<f64> {
        if let Some(j) = self.ref_nodes.iter().position(|&xn| xn == x) {
            let mut row = vec![0.0; self.order];
            row[j] = 1.0;
            return row;
        }
        let terms: Vec<f64> = (0..self.order).map(|j| self.bary[j] / (x - self.ref_nodes[j])).collect();
        let total: f64 = terms.iter().sum();
        terms.iter().map(|t| t / total).collect()
    }

    /// `∫_{-1}^{x} ℓ_j` for each `j`, exact for the interpolant.
    fn ref_integration_row(&self, x: f64) -> Vec<f64> {
        let half = 0.5 * (x + 1.0);
        let mut row = vec![0.0; self.order];
        if half == 0.0 {
            return row;
        }
        for m in 0..self.order {
            let y = -1.0 + half * (self.ref_nodes[m] + 1.0);
            let l = self.lagrange_row(y);
            for j in 0..self.order {
                row[j] += half * self.ref_weights[m] * l[j];
            }
        }
        row
    }

    fn panel_slice<T: ComplexField>(&self, values: &DMatrix<T>, p: usize) -> DMatrix<T> {
        values.columns(p * self.order, self.order).into_owned()
    }

    fn combine<T: ComplexField<RealField = f64>>(block: &DMatrix<T>, coeffs: &[f64]) -> DVector<T> {
        let mut out = DVector::<T>::zeros(block.nrows());
        for (j, c) in coeffs.iter().enumerate() {
            if *c != 0.0 {
                out.axpy(T::from_real(*c), &block.column(j), T::one());
            }
        }
        out
    }

    /// Value of the panel interpolant at `t`.
    pub fn interpolate<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>, t: f64) -> DVector<T> {
        let (p, x) = self.locate(t);
        let row = self.lagrange_row(x);
        Self::combine(&self.panel_slice(values, p), &row)
    }

    /// `∫_0^T f` by the composite rule.
    pub fn integrate<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>) -> DVector<T> {
        let mut acc = DVector::<T>::zeros(values.nrows());
        for (a, w) in self.weights.iter().enumerate() {
            acc.axpy(T::from_real(*w), &values.column(a), T::one());
        }
        acc
    }

    fn panel_integrals<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>) -> Vec<DVector<T>> {
        // running integral up to the start of each panel
        let mut starts = Vec::with_capacity(self.panels + 1);
        let mut acc = DVector::<T>::zeros(values.nrows());
        starts.push(acc.clone());
        for p in 0..self.panels {
            for i in 0..self.order {
                let a = p * self.order + i;
                acc.axpy(T::from_real(self.weights[a]), &values.column(a), T::one());
            }
            starts.push(acc.clone());
        }
        starts
    }

    /// Antiderivative `∫_0^{s_a} f` at every node.
    pub fn cumulative<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>) -> DMatrix<T> {
        let starts = self.panel_integrals(values);
        let half = 0.5 * self.panel_width();
        let mut out = DMatrix::<T>::zeros(values.nrows(), values.ncols());
        for (p, start) in starts.iter().take(self.panels).enumerate() {
            let block = self.panel_slice(values, p);
            for i in 0..self.order {
                let coeffs: Vec<f64> = (0..self.order).map(|j| half * self.ref_integration[(i, j)]).collect();
                let v = start + Self::combine(&block, &coeffs);
                out.set_column(p * self.order + i, &v);
            }
        }
        out
    }

    /// In-panel antiderivative `∫_{b_p}^{s_a} f` where `b_p` is the left edge
    /// of the panel holding node `a`.
    pub fn panel_cumulative<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>) -> DMatrix<T> {
        let half = 0.5 * self.panel_width();
        let mut out = DMatrix::<T>::zeros(values.nrows(), values.ncols());
        for p in 0..self.panels {
            let block = self.panel_slice(values, p);
            for i in 0..self.order {
                let coeffs: Vec<f64> = (0..self.order).map(|j| half * self.ref_integration[(i, j)]).collect();
                out.set_column(p * self.order + i, &Self::combine(&block, &coeffs));
            }
        }
        out
    }

    /// `∫` over each panel, one column per panel.
    pub fn panel_totals<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::<T>::zeros(values.nrows(), self.panels);
        for p in 0..self.panels {
            let mut acc = DVector::<T>::zeros(values.nrows());
            for i in 0..self.order {
                let a = p * self.order + i;
                acc.axpy(T::from_real(self.weights[a]), &values.column(a), T::one());
            }
            out.set_column(p, &acc);
        }
        out
    }

    /// Panel index of node `a`.
    pub fn panel_of(&self, a: usize) -> usize {
        a / self.order
    }

    /// Antiderivative `∫_0^t f` of the interpolant at an arbitrary time.
    pub fn antiderivative_at<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>, t: f64) -> DVector<T> {
        let starts = self.panel_integrals(values);
        self.antiderivative_with(values, &starts, t)
    }

    /// As [`Self::antiderivative_at`] for many times at once.
    pub fn antiderivative_many<T: ComplexField<RealField = f64>>(
        &self,
        values: &DMatrix<T>,
        times: &[f64],
    ) -> DMatrix<T> {
        let starts = self.panel_integrals(values);
        let mut out = DMatrix::<T>::zeros(values.nrows(), times.len());
        for (c, &t) in times.iter().enumerate() {
            out.set_column(c, &self.antiderivative_with(values, &starts, t));
        }
        out
    }

    fn antiderivative_with<T: ComplexField<RealField = f64>>(
        &self,
        values: &DMatrix<T>,
        starts: &[DVector<T>],
        t: f64,
    ) -> DVector<T> {
        if t >= self.horizon {
            return starts[self.panels].clone();
        }
        if t <= 0.0 {
            return DVector::<T>::zeros(values.nrows());
        }
        let (p, x) = self.locate(t);
        let half = 0.5 * self.panel_width();
        let coeffs: Vec<f64> = self.ref_integration_row(x).iter().map(|c| half * c).collect();
        &starts[p] + Self::combine(&self.panel_slice(values, p), &coeffs)
    }

    /// Panel-wise spectral derivative at the nodes.
    pub fn derivative<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>) -> DMatrix<T> {
        let scale = 2.0 / self.panel_width();
        let mut out = DMatrix::<T>::zeros(values.nrows(), values.ncols());
        for p in 0..self.panels {
            let block = self.panel_slice(values, p);
            for i in 0..self.order {
                let coeffs: Vec<f64> = (0..self.order).map(|j| scale * self.ref_derivative[(i, j)]).collect();
                out.set_column(p * self.order + i, &Self::combine(&block, &coeffs));
            }
        }
        out
    }

    /// Derivative of the interpolant at an arbitrary time.
    pub fn derivative_at<T: ComplexField<RealField = f64>>(&self, values: &DMatrix<T>, t: f64) -> DVector<T> {
        let (p, x) = self.locate(t);
        let row = self.lagrange_row(x);
        let scale = 2.0 / self.panel_width();
        // ℓ_j'(x) = Σ_i ℓ_i(x) D[i][j] since the derivative interpolant is exact
        let coeffs: Vec<f64> = (0..self.order)
            .map(|j| scale * (0..self.order).map(|i| row[i] * self.ref_derivative[(i, j)]).sum::<f64>())
            .collect();
        Self::combine(&self.panel_slice(values, p), &coeffs)
    }

    /// `⟨f, g⟩ = ∫ f(t)ᵀ g(t) dt` for real grid functions.
    pub fn inner(&self, f: &Mat, g: &Mat) -> f64 {
        f.column_iter()
            .zip(g.column_iter())
            .zip(&self.weights)
            .map(|((a, b), w)| w * a.dot(&b))
            .sum()
    }

    /// `⟨f, g⟩ = ∫ f(t)* g(t) dt` for complex grid functions.
    pub fn inner_complex(&self, f: &CMat, g: &CMat) -> Complex64 {
        f.column_iter()
            .zip(g.column_iter())
            .zip(&self.weights)
            .map(|((a, b), w)| a.dotc(&b) * *w)
            .sum()
    }

    /// Row-stacked node weights `(w_0 I_n, w_1 I_n, …)` as a vector of length `n N`.
    pub fn stacked_weights(&self, n: usize) -> DVector<f64> {
        DVector::from_iterator(self.len() * n, self.weights.iter().flat_map(|&w| std::iter::repeat_n(w, n)))
    }
}
