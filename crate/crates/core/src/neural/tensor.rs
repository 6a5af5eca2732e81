use crate::error::{Error, Result};

/// Dense `(n, c, h, w)` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::Dimension(format!(
                "tensor shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor4 {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    /// Batch of flat vectors, shaped `(n, len, 1, 1)`.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let len = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * len);
        for r in rows {
            if r.len() != len {
                return Err(Error::Dimension("rows of unequal length".into()));
            }
            data.extend_from_slice(r);
        }
        Tensor4::new([rows.len(), len, 1, 1], data)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Values per batch element.
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn sample(&self, b: usize) -> &[f64] {
        let s = self.sample_len();
        &self.data[b * s..(b + 1) * s]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [f64] {
        let s = self.sample_len();
        &mut self.data[b * s..(b + 1) * s]
    }

    pub fn reshaped(mut self, shape: [usize; 4]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Concatenates along the channel axis; spatial dims must agree.
    pub fn concat_channels(parts: &[&Tensor4]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("nothing to concatenate".into()))?;
        let [n, _, h, w] = first.shape;
        let mut c = 0;
        for p in parts {
            if p.shape[0] != n || p.shape[2] != h || p.shape[3] != w {
                return Err(Error::Dimension(format!(
                    "cannot concatenate {:?} with {:?}",
                    first.shape, p.shape
                )));
            }
            c += p.shape[1];
        }
        let mut data = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for p in parts {
                data.extend_from_slice(p.sample(b));
            }
        }
        Tensor4::new([n, c, h, w], data)
    }

    /// Inverse of [`Tensor4::concat_channels`].
    pub fn split_channels(&self, channels: &[usize]) -> Result<Vec<Tensor4>> {
        let [n, c, h, w] = self.shape;
        if channels.iter().sum::<usize>() != c {
            return Err(Error::Dimension(format!(
                "channel split {channels:?} does not cover {c} channels"
            )));
        }
        let mut out: Vec<Vec<f64>> = channels.iter().map(|k| Vec::with_capacity(n * k * h * w)).collect();
        for b in 0..n {
            let s = self.sample(b);
            let mut off = 0;
            for (k, o) in channels.iter().zip(&mut out) {
                o.extend_from_slice(&s[off * h * w..(off + k) * h * w]);
                off += k;
            }
        }
        channels
            .iter()
            .zip(out)
            .map(|(&k, d)| Tensor4::new([n, k, h, w], d))
            .collect()
    }
}

// Row-major GEMM kernels. All accumulate into `c`.

/// `c[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_nn(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m×n] += a[m×k] · b[n×k]ᵀ`
pub(crate) fn gemm_nt(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `c[m×n] += a[k×m]ᵀ · b[k×n]`
pub(crate) fn gemm_tn(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// Dot product with four independent partial sums (fixed order, so results
/// are reproducible).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0f64; 4];
    let chunks = n / 4;
    for q in 0..chunks {
        let i = 4 * q;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}
