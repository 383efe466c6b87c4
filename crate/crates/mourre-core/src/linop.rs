//! Linear operators on a grid: multipliers in momentum, diagonals in position, dense
//! matrices, and lazy combinations of those.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::C64;

/// Anything that can be applied, together with its adjoint, to node vectors.
pub trait Operator {
    fn grid(&self) -> &Grid;
    fn apply(&self, f: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64>;
}

/// Matrix-free operator supplied by another module (e.g. the transport group).
pub trait MatrixFree: Send + Sync {
    fn apply(&self, f: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64>;
}

#[derive(Clone)]
pub enum Kind {
    /// Symbol samples at momentum nodes, storage order.
    Multiplier(Arc<Vec<C64>>),
    /// Values at position nodes.
    Diagonal(Arc<Vec<C64>>),
    Dense(Arc<DMatrix<C64>>),
    /// `[A, B, C]` means `A B C` (C applied first).
    Compose(Vec<LinOp>),
    Sum(Vec<LinOp>),
    Scale(C64, Box<LinOp>),
    Adjoint(Box<LinOp>),
    Custom(Arc<dyn MatrixFree>),
}

#[derive(Clone)]
pub struct LinOp {
    grid: Grid,
    kind: Kind,
}

impl core::fmt::Debug for LinOp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match &self.kind {
            Kind::Multiplier(_) => "multiplier",
            Kind::Diagonal(_) => "diagonal",
            Kind::Dense(_) => "dense",
            Kind::Compose(_) => "compose",
            Kind::Sum(_) => "sum",
            Kind::Scale(..) => "scale",
            Kind::Adjoint(_) => "adjoint",
            Kind::Custom(_) => "custom",
        };
        write!(f, "LinOp({name}, {})", self.grid.signature())
    }
}

/// Default cap on dense materialization (rows).
pub const DENSE_CAP: usize = 4096;

impl LinOp {
    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn multiplier(grid: &Grid, symbol: Vec<C64>) -> Self {
        assert_eq!(symbol.len(), grid.len());
        LinOp { grid: grid.clone(), kind: Kind::Multiplier(Arc::new(symbol)) }
    }

    /// Multiplier from a closed-form symbol `m(k)`.
    pub fn multiplier_fn<F: Fn(&[f64]) -> C64>(grid: &Grid, m: F) -> Self {
        Self::multiplier(grid, grid.sample_symbol(m))
    }

    pub fn diagonal(grid: &Grid, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.len());
        LinOp { grid: grid.clone(), kind: Kind::Diagonal(Arc::new(values)) }
    }

    pub fn diagonal_fn<F: Fn(&[f64]) -> C64>(grid: &Grid, f: F) -> Self {
        Self::diagonal(grid, grid.sample(f))
    }

    pub fn diagonal_real(grid: &Grid, values: &[f64]) -> Self {
        Self::diagonal(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn dense(grid: &Grid, m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), grid.len());
        LinOp { grid: grid.clone(), kind: Kind::Dense(Arc::new(m)) }
    }

    pub fn custom(grid: &Grid, op: Arc<dyn MatrixFree>) -> Self {
        LinOp { grid: grid.clone(), kind: Kind::Custom(op) }
    }

    pub fn identity(grid: &Grid) -> Self {
        Self::diagonal(grid, vec![C64::new(1.0, 0.0); grid.len()])
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::diagonal(grid, vec![C64::new(0.0, 0.0); grid.len()])
    }

    /// Coordinate operator `q_axis` (the sawtooth on the torus).
    pub fn position(grid: &Grid, axis: usize) -> Self {
        Self::diagonal_fn(grid, |x| C64::new(x[axis], 0.0))
    }

    /// Momentum operator `p_axis`.
    pub fn momentum(grid: &Grid, axis: usize) -> Self {
        Self::multiplier_fn(grid, |k| C64::new(k[axis], 0.0))
    }

    pub fn compose(ops: Vec<LinOp>) -> Result<Self> {
        let grid = ops.first().ok_or(Error::InvalidParameter("empty composition".into()))?.grid.clone();
        if ops.iter().any(|o| o.grid != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(LinOp { grid, kind: Kind::Compose(ops) })
    }

    pub fn sum(ops: Vec<LinOp>) -> Result<Self> {
        let grid = ops.first().ok_or(Error::InvalidParameter("empty sum".into()))?.grid.clone();
        if ops.iter().any(|o| o.grid != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(LinOp { grid, kind: Kind::Sum(ops) })
    }

    /// `self * other` (other applied first). Panics on grid mismatch.
    pub fn mul(&self, other: &LinOp) -> LinOp {
        Self::compose(vec![self.clone(), other.clone()]).expect("grid mismatch")
    }

    pub fn add(&self, other: &LinOp) -> LinOp {
        Self::sum(vec![self.clone(), other.clone()]).expect("grid mismatch")
    }

    pub fn sub(&self, other: &LinOp) -> LinOp {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> LinOp {
        LinOp { grid: self.grid.clone(), kind: Kind::Scale(c, Box::new(self.clone())) }
    }

    pub fn scale_re(&self, c: f64) -> LinOp {
        self.scale(C64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> LinOp {
        match &self.kind {
            Kind::Adjoint(inner) => (**inner).clone(),
            _ => LinOp { grid: self.grid.clone(), kind: Kind::Adjoint(Box::new(self.clone())) },
        }
    }

    /// `self other - other self`.
    pub fn commutator(&self, other: &LinOp) -> LinOp {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn apply_vec(&self, f: &[C64]) -> Vec<C64> {
        match &self.kind {
            Kind::Multiplier(s) => self.grid.apply_symbol(s, f),
            Kind::Diagonal(d) => d.iter().zip(f).map(|(a, b)| a * b).collect(),
            Kind::Dense(m) => dense_apply(m, f, false),
            Kind::Compose(ops) => {
                let mut v = f.to_vec();
                for op in ops.iter().rev() {
                    v = op.apply_vec(&v);
                }
                v
            }
            Kind::Sum(ops) => {
                let mut acc = vec![C64::new(0.0, 0.0); f.len()];
                for op in ops {
                    for (a, b) in acc.iter_mut().zip(op.apply_vec(f)) {
                        *a += b;
                    }
                }
                acc
            }
            Kind::Scale(c, op) => op.apply_vec(f).into_iter().map(|v| v * c).collect(),
            Kind::Adjoint(op) => op.adjoint_vec(f),
            Kind::Custom(op) => op.apply(f),
        }
    }

    pub fn adjoint_vec(&self, f: &[C64]) -> Vec<C64> {
        match &self.kind {
            Kind::Multiplier(s) => {
                let c: Vec<C64> = s.iter().map(|v| v.conj()).collect();
                self.grid.apply_symbol(&c, f)
            }
            Kind::Diagonal(d) => d.iter().zip(f).map(|(a, b)| a.conj() * b).collect(),
            Kind::Dense(m) => dense_apply(m, f, true),
            Kind::Compose(ops) => {
                let mut v = f.to_vec();
                for op in ops.iter() {
                    v = op.adjoint_vec(&v);
                }
                v
            }
            Kind::Sum(ops) => {
                let mut acc = vec![C64::new(0.0, 0.0); f.len()];
                for op in ops {
                    for (a, b) in acc.iter_mut().zip(op.adjoint_vec(f)) {
                        *a += b;
                    }
                }
                acc
            }
            Kind::Scale(c, op) => op.adjoint_vec(f).into_iter().map(|v| v * c.conj()).collect(),
            Kind::Adjoint(op) => op.apply_vec(f),
            Kind::Custom(op) => op.apply_adjoint(f),
        }
    }

    /// Materialize as a dense matrix (columns are images of unit vectors).
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        self.to_dense_capped(DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<C64>> {
        let n = self.grid.len();
        if n > cap {
            return Err(Error::SizeCap { size: n, cap });
        }
        Ok(match &self.kind {
            Kind::Dense(m) => (**m).clone(),
            Kind::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            Kind::Compose(ops) if ops.iter().all(|o| !matches!(o.kind, Kind::Custom(_))) => {
                let mut acc = ops[0].to_dense_capped(cap)?;
                for op in &ops[1..] {
                    acc = right_mul(acc, op, cap)?;
                }
                acc
            }
            Kind::Sum(ops) => {
                let mut acc = DMatrix::zeros(n, n);
                for op in ops {
                    acc += op.to_dense_capped(cap)?;
                }
                acc
            }
            Kind::Scale(c, op) => op.to_dense_capped(cap)? * *c,
            Kind::Adjoint(op) => op.to_dense_capped(cap)?.adjoint(),
            _ => {
                let mut m = DMatrix::zeros(n, n);
                let mut e = vec![C64::new(0.0, 0.0); n];
                for j in 0..n {
                    e[j] = C64::new(1.0, 0.0);
                    let col = self.apply_vec(&e);
                    m.column_mut(j).copy_from_slice(&col);
                    e[j] = C64::new(0.0, 0.0);
                }
                m
            }
        })
    }
}

fn right_mul(acc: DMatrix<C64>, op: &LinOp, cap: usize) -> Result<DMatrix<C64>> {
    Ok(match &op.kind {
        Kind::Diagonal(d) => {
            let mut acc = acc;
            for (j, v) in d.iter().enumerate() {
                for x in acc.column_mut(j).iter_mut() {
                    *x *= v;
                }
            }
            acc
        }
        _ => acc * op.to_dense_capped(cap)?,
    })
}

fn dense_apply(m: &DMatrix<C64>, f: &[C64], adjoint: bool) -> Vec<C64> {
    let v = nalgebra::DVector::from_column_slice(f);
    let out = if adjoint { m.ad_mul(&v) } else { m * v };
    out.as_slice().to_vec()
}

impl Operator for LinOp {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.apply_vec(f)
    }
    fn apply_adjoint(&self, f: &[C64]) -> Vec<C64> {
        self.adjoint_vec(f)
    }
}

impl LinOp {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// Dense spectral norm of a dense matrix (largest singular value).
pub fn dense_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Submatrix on the rows and columns flagged in `mask`.
pub fn restrict(m: &DMatrix<C64>, mask: &[bool]) -> DMatrix<C64> {
    let idx: Vec<usize> = mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}
