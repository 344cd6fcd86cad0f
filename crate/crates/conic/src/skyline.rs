//! Symmetric envelope ("skyline") storage with in-place Cholesky.
//!
//! Row `i` stores the lower-triangular entries in columns `first[i]..=i`.
//! Fill-in stays inside the envelope, so the factor reuses the same layout.

#[derive(Clone, Debug)]
pub(crate) struct Skyline {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl Skyline {
    /// `first[i] <= i` is the leftmost column that row `i` may touch.
    pub(crate) fn new(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut acc = 0;
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            start.push(acc);
            acc += i - f + 1;
        }
        start.push(acc);
        Self {
            first,
            start,
            data: vec![0.0; acc],
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.first.len()
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.first[i], "({i},{j}) outside envelope");
        self.start[i] + j - self.first[i]
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)` (once when `i == j`).
    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        self.data[self.idx(i, i)]
    }

    pub(crate) fn max_diag(&self) -> f64 {
        (0..self.dim()).fold(0.0, |m: f64, i| m.max(self.diag(i).abs()))
    }

    /// Replaces `A` by `D A D` with `D = diag(d)`.
    pub(crate) fn scale_symmetric(&mut self, d: &[f64]) {
        for i in 0..self.dim() {
            let f = self.first[i];
            for (k, a) in self.data[self.start[i]..self.start[i + 1]].iter_mut().enumerate() {
                *a *= d[i] * d[f + k];
            }
        }
    }

    /// `y = A x` for the symmetric matrix held in the envelope.
    pub(crate) fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let f = self.first[i];
            let mut acc = row[i - f] * x[i];
            for (k, &a) in row[..i - f].iter().enumerate() {
                let j = f + k;
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// Overwrites the matrix with its lower Cholesky factor.
    /// Fails (returning the offending row) when a pivot is not positive.
    pub(crate) fn factor(&mut self) -> Result<(), usize> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut s = self.data[si + j - fi];
                for k in k0..j {
                    s -= self.data[si + k - fi] * self.data[sj + k - fj];
                }
                self.data[si + j - fi] = s / self.data[sj + j - fj];
            }
            let mut d = self.data[si + i - fi];
            for k in fi..i {
                let l = self.data[si + k - fi];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(i);
            }
            self.data[si + i - fi] = d.sqrt();
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place after [`Skyline::factor`].
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let f = self.first[i];
            let mut s = b[i];
            for (k, &l) in row[..i - f].iter().enumerate() {
                s -= l * b[f + k];
            }
            b[i] = s / row[i - f];
        }
        for i in (0..n).rev() {
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let f = self.first[i];
            b[i] /= row[i - f];
            let bi = b[i];
            for (k, &l) in row[..i - f].iter().enumerate() {
                b[f + k] -= l * bi;
            }
        }
    }
}
