// SPDX-License-Identifier: Apache-2.0

//! Dense real hypervectors, the three HDC operators, cosine similarity, the
//! chunk-shift base matrix and the nonlinear fragment encoder.

use crate::error::{Error, Result};
use crate::rng::{stream, SeededRng};

/// Dense real hypervector. Values are stored at 32-bit precision; all
/// reductions over them accumulate at 64-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypervector {
    values: Vec<f32>,
}

impl Hypervector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::usage("hypervector dimension must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "hypervector element {i} is not finite"
            )));
        }
        Ok(Hypervector { values })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "hypervector dimension must be positive");
        Hypervector {
            values: vec![0.0; dim],
        }
    }

    pub fn ones(dim: usize) -> Self {
        assert!(dim > 0, "hypervector dimension must be positive");
        Hypervector {
            values: vec![1.0; dim],
        }
    }

    /// Standard Gaussian entries.
    pub fn random_gaussian(dim: usize, rng: &mut SeededRng) -> Self {
        Hypervector {
            values: (0..dim).map(|_| rng.normal() as f32).collect(),
        }
    }

    /// Entries drawn uniformly from {-1, +1}.
    pub fn random_bipolar(dim: usize, rng: &mut SeededRng) -> Self {
        Hypervector {
            values: (0..dim)
                .map(|_| if rng.next_u64() >> 63 == 0 { -1.0 } else { 1.0 })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// `self += scale * other`, computed at 64-bit and stored at 32-bit.
    pub fn add_scaled(&mut self, other: &Hypervector, scale: f64) -> Result<()> {
        check_dims(self.dim(), other.dim())?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = (*a as f64 + scale * b as f64) as f32;
        }
        Ok(())
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::usage(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Bundling: element-wise addition.
pub fn bundle(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    check_dims(a.dim(), b.dim())?;
    Ok(Hypervector {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
    })
}

/// Binding: element-wise multiplication.
pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    check_dims(a.dim(), b.dim())?;
    Ok(Hypervector {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
    })
}

/// Permutation: cyclic rotation by `k` positions, so that element `i` lands
/// at `(i + k) mod D`. Negative `k` rotates the other way.
pub fn permute(a: &Hypervector, k: i64) -> Hypervector {
    let d = a.dim() as i64;
    let shift = k.rem_euclid(d) as usize;
    let mut values = a.values.clone();
    values.rotate_right(shift);
    Hypervector { values }
}

/// Cosine similarity. Returns 0 when either vector has zero norm.
pub fn cosine(a: &Hypervector, b: &Hypervector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(cosine_slices(&a.values, &b.values))
}

pub(crate) fn cosine_slices(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

/// Base hypervectors for an `h x w` window with the chunk-shift structure:
/// every vector is split into `w` chunks of `D / w` elements, and chunk
/// `k + 1` of `B[i][j + 1]` is chunk `k` of `B[i][j]`. Only the head chunk of
/// each `B[i][j]` (j > 0) is fresh.
///
/// Writing `G[i][g]` for the distinct chunks of row `i`, chunk `k` of
/// `B[i][j]` is `G[i][j - k]` with `g` in `-(w-1)..=w-1`. They are stored in
/// descending `g`, which makes every `B[i][j]` one contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseMatrix {
    rows: usize,
    cols: usize,
    dim: usize,
    chunk: usize,
    seed: u64,
    generators: Vec<f32>,
}

impl BaseMatrix {
    pub fn generate(seed: u64, h: usize, w: usize, dim: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::usage("window dimensions must be positive"));
        }
        if dim < w {
            return Err(Error::usage(format!(
                "dimension {dim} smaller than window width {w}"
            )));
        }
        if !dim.is_multiple_of(w) {
            return Err(Error::usage(format!(
                "dimension not divisible by window width ({dim} mod {w} != 0)"
            )));
        }
        let chunk = dim / w;
        let row_len = (2 * w - 1) * chunk;
        let mut generators = vec![0.0f32; h * row_len];
        let mut rng = SeededRng::new(seed, stream::BASE_MATRIX);
        for i in 0..h {
            let row = &mut generators[i * row_len..(i + 1) * row_len];
            // B[i][0] in full, then the head chunk of B[i][1..w].
            for v in &mut row[(w - 1) * chunk..] {
                *v = rng.normal() as f32;
            }
            for j in 1..w {
                let start = (w - 1 - j) * chunk;
                for v in &mut row[start..start + chunk] {
                    *v = rng.normal() as f32;
                }
            }
        }
        Ok(BaseMatrix {
            rows: h,
            cols: w,
            dim,
            chunk,
            seed,
            generators,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of inputs the matrix projects (`h * w`).
    pub fn inputs(&self) -> usize {
        self.rows * self.cols
    }

    fn row_len(&self) -> usize {
        (2 * self.cols - 1) * self.chunk
    }

    /// Base hypervector `B[i][j]` as a `D`-length slice.
    pub fn vector(&self, i: usize, j: usize) -> &[f32] {
        assert!(i < self.rows && j < self.cols);
        let start = i * self.row_len() + (self.cols - 1 - j) * self.chunk;
        &self.generators[start..start + self.dim]
    }

    /// Chunk `k` of `B[i][j]`.
    pub fn chunk(&self, i: usize, j: usize, k: usize) -> &[f32] {
        assert!(k < self.cols);
        &self.vector(i, j)[k * self.chunk..(k + 1) * self.chunk]
    }

    /// Distinct chunk `G[i][g]`, `g` in `-(w-1)..=w-1`.
    pub fn generator(&self, i: usize, g: isize) -> &[f32] {
        let w = self.cols as isize;
        assert!(i < self.rows && g > -w && g < w);
        let t = (w - 1 - g) as usize;
        let start = i * self.row_len() + t * self.chunk;
        &self.generators[start..start + self.chunk]
    }

    /// Flattened-index view: input `idx = i * w + j` maps to `B[i][j]`.
    pub fn vector_flat(&self, idx: usize) -> &[f32] {
        self.vector(idx / self.cols, idx % self.cols)
    }
}

/// Everything needed to encode a fragment: the base matrix and the phase
/// bias `b`, both regenerated from one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    base: BaseMatrix,
    bias: Hypervector,
    seed: u64,
}

impl EncoderParams {
    pub fn generate(seed: u64, h: usize, w: usize, dim: usize) -> Result<Self> {
        let base = BaseMatrix::generate(seed, h, w, dim)?;
        let mut rng = SeededRng::new(seed, stream::BIAS);
        let tau = std::f32::consts::TAU;
        let values = (0..dim)
            .map(|_| {
                let b = rng.uniform_range(0.0, std::f64::consts::TAU) as f32;
                // Rounding to 32 bits can land on the f32 nearest 2*pi.
                if b >= tau {
                    f32::from_bits(tau.to_bits() - 1)
                } else {
                    b
                }
            })
            .collect();
        Ok(EncoderParams {
            base,
            bias: Hypervector { values },
            seed,
        })
    }

    pub fn base(&self) -> &BaseMatrix {
        &self.base
    }

    pub fn bias(&self) -> &Hypervector {
        &self.bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }
}

/// Applies `cos(z + b) * sin(z)` element-wise.
pub fn nonlinearity(z: &[f64], bias: &Hypervector) -> Hypervector {
    debug_assert_eq!(z.len(), bias.dim());
    Hypervector {
        values: z
            .iter()
            .zip(bias.values())
            .map(|(&z, &b)| ((z + b as f64).cos() * z.sin()) as f32)
            .collect(),
    }
}

/// Linear projection `z = sum_idx x[idx] * B[idx]`, accumulated in ascending
/// flattened index order.
pub fn project(x: &[f64], base: &BaseMatrix) -> Result<Vec<f64>> {
    Ok(project_batch(&[x], base)?.pop().expect("one input"))
}

const PROJECT_BLOCK: usize = 512;

/// Projection of several inputs at once. Each output is bit-identical to
/// [`project`] of the same input: the blocking only reorders work across
/// inputs and output elements, never the accumulation order of one element.
pub fn project_batch(xs: &[&[f64]], base: &BaseMatrix) -> Result<Vec<Vec<f64>>> {
    let n = base.inputs();
    if let Some(x) = xs.iter().find(|x| x.len() != n) {
        return Err(Error::usage(format!(
            "input length {} does not match window size {n}",
            x.len()
        )));
    }
    let dim = base.dim;
    let mut out = vec![vec![0.0f64; dim]; xs.len()];
    let mut start = 0;
    while start < dim {
        let end = (start + PROJECT_BLOCK).min(dim);
        for idx in 0..n {
            let b = &base.vector_flat(idx)[start..end];
            for (z, x) in out.iter_mut().zip(xs) {
                let xv = x[idx];
                for (zd, &bd) in z[start..end].iter_mut().zip(b) {
                    *zd += xv * bd as f64;
                }
            }
        }
        start = end;
    }
    Ok(out)
}

/// Nonlinear encoder `phi(x) = cos(x B + b) * sin(x B)` of an already
/// normalized flattened fragment.
pub fn encode(x_norm: &[f64], params: &EncoderParams) -> Result<Hypervector> {
    let z = project(x_norm, &params.base)?;
    Ok(nonlinearity(&z, &params.bias))
}

/// [`encode`] over many fragments; outputs are identical to one-at-a-time
/// encoding.
pub fn encode_batch(xs: &[&[f64]], params: &EncoderParams) -> Result<Vec<Hypervector>> {
    use rayon::prelude::*;
    const GROUP: usize = 16;
    let groups: Vec<Result<Vec<Hypervector>>> = xs
        .par_chunks(GROUP)
        .map(|group| {
            let zs = project_batch(group, &params.base)?;
            Ok(zs.iter().map(|z| nonlinearity(z, &params.bias)).collect())
        })
        .collect();
    let mut out = Vec::with_capacity(xs.len());
    for g in groups {
        out.extend(g?);
    }
    Ok(out)
}
