use nalgebra::{DMatrix, DVector};

use super::{LinsysError, OperatorBasis, C64};

/// Linear generator `d⟨σ_k⟩/dt = Σ_l M_kl ⟨σ_l⟩` over an operator basis.
#[derive(Clone, Debug)]
pub struct Generator {
    basis: OperatorBasis,
    matrix: DMatrix<C64>,
    /// Row-compressed nonzeros, kept when the matrix is sparse enough to beat gemv.
    sparse: Option<SparseRows>,
}

#[derive(Clone, Debug)]
struct SparseRows {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
}

impl SparseRows {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut row_start = Vec::with_capacity(m.nrows() + 1);
        let (mut cols, mut values) = (Vec::new(), Vec::new());
        row_start.push(0);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                if z != C64::new(0.0, 0.0) {
                    cols.push(c);
                    values.push(z);
                }
            }
            row_start.push(cols.len());
        }
        Self { row_start, cols, values }
    }
}

impl Generator {
    pub fn new(basis: OperatorBasis, matrix: DMatrix<C64>) -> Result<Self, LinsysError> {
        let n = basis.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(LinsysError::DimensionMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinsysError::NonFinite("generator matrix"));
        }
        let sparse = Some(SparseRows::from_dense(&matrix)).filter(|s| 4 * s.values.len() < n * n);
        Ok(Self { basis, matrix, sparse })
    }

    /// A zero generator to be filled row by row.
    pub fn builder(basis: OperatorBasis) -> GeneratorBuilder {
        let n = basis.len();
        GeneratorBuilder { basis, matrix: DMatrix::zeros(n, n) }
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `M y`
    pub fn apply(&self, y: &DVector<C64>, out: &mut DVector<C64>) {
        match &self.sparse {
            Some(s) => {
                for (r, o) in out.iter_mut().enumerate() {
                    let span = s.row_start[r]..s.row_start[r + 1];
                    *o = s.cols[span.clone()].iter().zip(&s.values[span]).map(|(&c, v)| v * y[c]).sum();
                }
            }
            None => out.gemv(C64::new(1.0, 0.0), &self.matrix, y, C64::new(0.0, 0.0)),
        }
    }

    /// Largest |(1ᵀ_pop M)_l| over all columns; zero when the summed
    /// population is a constant of motion.
    pub fn population_sum_residual(&self) -> f64 {
        let pops: Vec<usize> = self.basis.population_indices().collect();
        (0..self.dim())
            .map(|l| pops.iter().map(|&k| self.matrix[(k, l)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }

    /// Restriction of the generator to a subset of labels.
    pub(crate) fn submatrix(&self, keep: &[usize]) -> DMatrix<C64> {
        DMatrix::from_fn(keep.len(), keep.len(), |r, c| self.matrix[(keep[r], keep[c])])
    }
}

/// Accumulates matrix entries by label index.
pub struct GeneratorBuilder {
    basis: OperatorBasis,
    matrix: DMatrix<C64>,
}

impl GeneratorBuilder {
    pub fn add(&mut self, row: usize, col: usize, value: C64) -> &mut Self {
        self.matrix[(row, col)] += value;
        self
    }

    pub fn add_real(&mut self, row: usize, col: usize, value: f64) -> &mut Self {
        self.add(row, col, C64::new(value, 0.0))
    }

    pub fn build(self) -> Result<Generator, LinsysError> {
        Generator::new(self.basis, self.matrix)
    }
}
