/// A `dim x cols` real matrix stored column-major: column `i` is one entity's
/// latent vector and is contiguous in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    dim: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Factors {
    pub fn zeros(dim: usize, cols: usize) -> Self {
        Factors {
            dim,
            cols,
            data: vec![0.0; dim * cols],
        }
    }

    /// Wrap column-major data. Panics if the length is not `dim * cols`.
    pub fn from_column_major(dim: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * cols, "factor data has wrong length");
        Factors { dim, cols, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn col_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.dim + row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.dim + row] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self -= step * grad`, elementwise.
    pub fn descend(&mut self, grad: &Factors, step: f64) {
        debug_assert_eq!((self.dim, self.cols), (grad.dim, grad.cols));
        for (x, g) in self.data.iter_mut().zip(&grad.data) {
            *x -= step * g;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
