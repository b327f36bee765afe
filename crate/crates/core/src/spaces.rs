//! Finite-dimensional realizations of the function spaces and convex sets.
//!
//! Every space is a coefficient space `ℝⁿ` equipped with two Gram matrices:
//! the primary one defines the energy norm (‖·‖_V, ‖·‖_Y, ‖·‖_W) and the
//! pivot one defines the Hilbert pivot norm (‖·‖_H, ‖·‖_{Y₁}). Dual elements
//! are plain load arrays; the duality pairing is the dot product and the
//! Riesz map is an explicit Gram solve.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::box_qp::projected_sor;
use crate::error::{check_len, Error, Result};

pub type Coeffs = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceLabel {
    V,
    Y,
    W,
}

/// Which of the two Gram matrices a norm is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Primary,
    Pivot,
}

/// A symmetric positive-definite Gram matrix together with its Cholesky
/// factor.
#[derive(Debug, Clone)]
pub struct Metric {
    gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    diagonal: bool,
}

impl Metric {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::InvalidInput(format!(
                "Gram matrix must be square, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let scale = gram.amax().max(f64::MIN_POSITIVE);
        let n = gram.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (gram[(i, j)] - gram[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "entry ({i},{j}) breaks symmetry"
                    )));
                }
            }
        }
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || gram[(i, j)] == 0.0));
        let factor = Cholesky::new(gram.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        Ok(Self { gram, factor, diagonal })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn inner(&self, x: &Coeffs, y: &Coeffs) -> f64 {
        (&self.gram * y).dot(x)
    }

    pub fn norm(&self, x: &Coeffs) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Riesz representative `G⁻¹f` of a dual element.
    pub fn riesz(&self, f: &Coeffs) -> Coeffs {
        self.factor.solve(f)
    }

    /// Dual norm `sqrt(fᵀG⁻¹f)`.
    pub fn dual_norm(&self, f: &Coeffs) -> f64 {
        self.riesz(f).dot(f).max(0.0).sqrt()
    }

    /// Smallest and largest generalized eigenvalues of the symmetric matrix
    /// `k` relative to this metric.
    pub fn generalized_extremes(&self, k: &DMatrix<f64>) -> (f64, f64) {
        let l = self.factor.l();
        let linv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(self.dim(), self.dim()))
            .expect("Cholesky factor is invertible");
        let sym = &linv * k * linv.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        (eig.min(), eig.max())
    }
}

/// A discrete realization of one of the spaces V, Y or W.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    label: SpaceLabel,
    primary: Metric,
    pivot: Metric,
}

impl DiscreteSpace {
    pub fn new(label: SpaceLabel, gram_primary: DMatrix<f64>, gram_pivot: DMatrix<f64>) -> Result<Self> {
        if gram_primary.nrows() == 0 {
            return Err(Error::InvalidInput(format!("space {label:?} has dimension zero")));
        }
        check_len(gram_primary.nrows(), gram_pivot.nrows())?;
        Ok(Self {
            label,
            primary: Metric::new(gram_primary)?,
            pivot: Metric::new(gram_pivot)?,
        })
    }

    /// Space whose primary and pivot inner products are both Euclidean.
    pub fn euclidean(label: SpaceLabel, dim: usize) -> Self {
        Self { label, primary: Metric::identity(dim), pivot: Metric::identity(dim) }
    }

    pub fn label(&self) -> SpaceLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.primary.dim()
    }

    pub fn primary(&self) -> &Metric {
        &self.primary
    }

    pub fn pivot(&self) -> &Metric {
        &self.pivot
    }

    fn metric(&self, which: NormKind) -> &Metric {
        match which {
            NormKind::Primary => &self.primary,
            NormKind::Pivot => &self.pivot,
        }
    }

    pub fn norm(&self, x: &Coeffs, which: NormKind) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        Ok(self.metric(which).norm(x))
    }

    pub fn inner(&self, x: &Coeffs, y: &Coeffs, which: NormKind) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), y.len())?;
        Ok(self.metric(which).inner(x, y))
    }

    /// Duality pairing between a load array and a coefficient array.
    pub fn pairing(&self, f: &Coeffs, v: &Coeffs) -> Result<f64> {
        check_len(self.dim(), f.len())?;
        check_len(self.dim(), v.len())?;
        Ok(f.dot(v))
    }

    /// Norm of a load array in the dual of the primary norm.
    pub fn dual_norm(&self, f: &Coeffs) -> Result<f64> {
        check_len(self.dim(), f.len())?;
        Ok(self.primary.dual_norm(f))
    }

    pub fn riesz(&self, f: &Coeffs) -> Result<Coeffs> {
        check_len(self.dim(), f.len())?;
        Ok(self.primary.riesz(f))
    }
}

/// Clamps the entries listed in `normal_indices` to be at most `bound`.
pub fn project_box_normal(values: &Coeffs, bound: f64, normal_indices: &[usize]) -> Result<Coeffs> {
    let mut out = values.clone();
    for &i in normal_indices {
        if i >= values.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), got: i + 1 });
        }
        out[i] = out[i].min(bound);
    }
    Ok(out)
}

pub fn project_unit_interval(values: &Coeffs) -> Coeffs {
    values.map(|v| v.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Unconstrained,
    /// `x[i] ≤ bound` for every listed index.
    UpperBound { indices: Vec<usize>, bound: f64 },
    /// `lower ≤ x[i] ≤ upper` for every entry.
    Interval { lower: f64, upper: f64 },
}

/// Closed convex set handled through its nodal projection.
///
/// `project` is the exact projection in any diagonal (lumped) inner product.
/// Projections in a general metric go through [`MetricProjector`].
#[derive(Debug, Clone)]
pub struct ConvexSet {
    dim: usize,
    constraint: Constraint,
    membership_tol: f64,
    description: String,
}

impl ConvexSet {
    pub fn whole(dim: usize) -> Self {
        Self {
            dim,
            constraint: Constraint::Unconstrained,
            membership_tol: 0.0,
            description: format!("R^{dim}"),
        }
    }

    pub fn upper_bound(dim: usize, indices: Vec<usize>, bound: f64) -> Result<Self> {
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::InvalidInput(format!(
                "normal bound must be finite and nonnegative, got {bound}"
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad + 1 });
        }
        let mut indices = indices;
        indices.sort_unstable();
        indices.dedup();
        let description = format!("{} entries bounded above by {bound}", indices.len());
        Ok(Self {
            dim,
            constraint: Constraint::UpperBound { indices, bound },
            membership_tol: 1e-12,
            description,
        })
    }

    /// `lower ≤ x[i] ≤ upper` for every entry.
    pub fn interval(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::InvalidInput(format!("invalid interval [{lower}, {upper}]")));
        }
        Ok(Self {
            dim,
            constraint: Constraint::Interval { lower, upper },
            membership_tol: 1e-12,
            description: format!("[{lower},{upper}]^{dim}"),
        })
    }

    pub fn unit_interval(dim: usize) -> Self {
        Self {
            dim,
            constraint: Constraint::Interval { lower: 0.0, upper: 1.0 },
            membership_tol: 1e-12,
            description: format!("[0,1]^{dim}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn membership_tol(&self) -> f64 {
        self.membership_tol
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn project(&self, x: &Coeffs) -> Coeffs {
        match &self.constraint {
            Constraint::Unconstrained => x.clone(),
            Constraint::UpperBound { indices, bound } => {
                project_box_normal(x, *bound, indices).expect("indices validated at construction")
            }
            Constraint::Interval { lower, upper } => x.map(|v| v.clamp(*lower, *upper)),
        }
    }

    /// Largest constraint violation of `x` (zero when feasible).
    pub fn violation(&self, x: &Coeffs) -> f64 {
        match &self.constraint {
            Constraint::Unconstrained => 0.0,
            Constraint::UpperBound { indices, bound } => {
                indices.iter().map(|&i| (x[i] - bound).max(0.0)).fold(0.0, f64::max)
            }
            Constraint::Interval { lower, upper } => x
                .iter()
                .map(|&v| (lower - v).max(v - upper).max(0.0))
                .fold(0.0, f64::max),
        }
    }

    pub fn contains(&self, x: &Coeffs) -> bool {
        x.len() == self.dim && self.violation(x) <= self.membership_tol
    }

    /// Per-entry lower and upper bounds.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lower = vec![f64::NEG_INFINITY; self.dim];
        let mut upper = vec![f64::INFINITY; self.dim];
        match &self.constraint {
            Constraint::Unconstrained => {}
            Constraint::UpperBound { indices, bound } => {
                for &i in indices {
                    upper[i] = *bound;
                }
            }
            Constraint::Interval { lower: lo, upper: hi } => {
                lower.fill(*lo);
                upper.fill(*hi);
            }
        }
        (lower, upper)
    }
}

#[derive(Debug, Clone)]
enum ProjectorKind {
    Nodal,
    /// Constrained block eliminated through the Schur complement of the
    /// unconstrained block.
    Reduced {
        free: Vec<usize>,
        bounded: Vec<usize>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        schur: DMatrix<f64>,
        coupling: DMatrix<f64>,
    },
}

/// Projection onto a [`ConvexSet`] in the inner product of a given metric.
#[derive(Debug, Clone)]
pub struct MetricProjector {
    set: ConvexSet,
    kind: ProjectorKind,
}

const PROJECTION_TOL: f64 = 1e-15;
const PROJECTION_SWEEPS: usize = 200_000;

impl MetricProjector {
    pub fn new(set: &ConvexSet, metric: &Metric) -> Result<Self> {
        check_len(set.dim(), metric.dim())?;
        let (lower, upper) = set.bounds();
        let bounded: Vec<usize> =
            (0..set.dim()).filter(|&i| lower[i].is_finite() || upper[i].is_finite()).collect();
        if metric.is_diagonal() || bounded.is_empty() {
            return Ok(Self { set: set.clone(), kind: ProjectorKind::Nodal });
        }
        let free: Vec<usize> = (0..set.dim()).filter(|i| !bounded.contains(i)).collect();
        let g = metric.gram();
        let g_bb = g.select_rows(&bounded).select_columns(&bounded);
        let (schur, coupling) = if free.is_empty() {
            (g_bb, DMatrix::zeros(0, bounded.len()))
        } else {
            let g_ff = g.select_rows(&free).select_columns(&free);
            let g_fb = g.select_rows(&free).select_columns(&bounded);
            let chol = Cholesky::new(g_ff)
                .ok_or_else(|| Error::NotPositiveDefinite("free block of metric".into()))?;
            let coupling = chol.solve(&g_fb);
            let schur = &g_bb - g_fb.transpose() * &coupling;
            (schur, coupling)
        };
        let lower = bounded.iter().map(|&i| lower[i]).collect();
        let upper = bounded.iter().map(|&i| upper[i]).collect();
        Ok(Self {
            set: set.clone(),
            kind: ProjectorKind::Reduced { free, bounded, lower, upper, schur, coupling },
        })
    }

    pub fn set(&self) -> &ConvexSet {
        &self.set
    }

    pub fn project(&self, y: &Coeffs) -> Coeffs {
        match &self.kind {
            ProjectorKind::Nodal => self.set.project(y),
            ProjectorKind::Reduced { free, bounded, lower, upper, schur, coupling } => {
                if self.set.violation(y) == 0.0 {
                    return y.clone();
                }
                // minimize ½dᵀSd over d = x_B − y_B with lower − y_B ≤ d ≤ upper − y_B
                let yb = DVector::from_iterator(bounded.len(), bounded.iter().map(|&i| y[i]));
                let lo: Vec<f64> = lower.iter().zip(yb.iter()).map(|(l, v)| l - v).collect();
                let hi: Vec<f64> = upper.iter().zip(yb.iter()).map(|(u, v)| u - v).collect();
                let start = DVector::zeros(bounded.len());
                let out = projected_sor(
                    schur,
                    &DVector::zeros(bounded.len()),
                    &lo,
                    &hi,
                    &start,
                    1.0,
                    PROJECTION_TOL,
                    PROJECTION_SWEEPS,
                );
                let d = out.x;
                let mut x = y.clone();
                for (k, &i) in bounded.iter().enumerate() {
                    x[i] = (y[i] + d[k]).clamp(lower[k], upper[k]);
                }
                if !free.is_empty() {
                    let shift = coupling * &d;
                    for (k, &i) in free.iter().enumerate() {
                        x[i] = y[i] - shift[k];
                    }
                }
                x
            }
        }
    }
}
