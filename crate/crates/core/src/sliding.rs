// SPDX-License-Identifier: Apache-2.0

//! Sliding-window fragment enumeration and batch encoding of every window of
//! a frame, either naively or with chunk-level product reuse.
//!
//! The reuse path exploits the chunk-shift base matrix: chunk `k` of
//! `B[i][j]` is the generator chunk `G[i][j - k]`, so an element at column
//! `p` contributes `x[p] * G[i][p - c0 - k]` to chunk `k` of the window with
//! origin `c0`. Every `(p, i, g)` product is computed once and added into
//! all windows that need it. With stride 1 an interior element needs
//! `2w - 1` distinct chunks instead of `w * w`.

use crate::error::{Error, Result};
use crate::fragment::normalize;
use crate::hdc::{encode_batch, nonlinearity, BaseMatrix, EncoderParams, Hypervector};

/// A 2-D sensor frame, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl Frame {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::usage("frame dimensions must be positive"));
        }
        if pixels.len() != height * width {
            return Err(Error::data(format!(
                "frame has {} pixels, expected {height}x{width}",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(Error::data(format!("pixel {i} is not finite")));
        }
        Ok(Frame {
            height,
            width,
            pixels,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Frame {
            height,
            width,
            pixels: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.pixels[r * self.width + c]
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.pixels[r * self.width..(r + 1) * self.width]
    }

    /// Row-major copy of the `h x w` window at `(r, c)`.
    pub fn window(&self, r: usize, c: usize, h: usize, w: usize) -> Vec<f32> {
        assert!(r + h <= self.height && c + w <= self.width);
        let mut out = Vec::with_capacity(h * w);
        for rr in r..r + h {
            out.extend_from_slice(&self.row(rr)[c..c + w]);
        }
        out
    }
}

/// Window origins of a sliding scan, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentGrid {
    pub frag_h: usize,
    pub frag_w: usize,
    pub stride: usize,
    pub origin_rows: usize,
    pub origin_cols: usize,
    pub positions: Vec<(usize, usize)>,
    pub skipped_rows: usize,
    pub skipped_cols: usize,
}

impl FragmentGrid {
    pub fn new(
        height: usize,
        width: usize,
        frag_h: usize,
        frag_w: usize,
        stride: usize,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::usage("stride must be at least 1"));
        }
        if frag_h == 0 || frag_w == 0 {
            return Err(Error::usage("fragment size must be positive"));
        }
        if frag_h > height || frag_w > width {
            return Err(Error::usage(format!(
                "fragment {frag_h}x{frag_w} larger than frame {height}x{width}"
            )));
        }
        let origin_rows = (height - frag_h) / stride + 1;
        let origin_cols = (width - frag_w) / stride + 1;
        let positions = (0..origin_rows)
            .flat_map(|r| (0..origin_cols).map(move |c| (r * stride, c * stride)))
            .collect();
        Ok(FragmentGrid {
            frag_h,
            frag_w,
            stride,
            origin_rows,
            origin_cols,
            positions,
            skipped_rows: (height - frag_h) % stride,
            skipped_cols: (width - frag_w) % stride,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn row_origins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.origin_rows).map(move |r| r * self.stride)
    }

    pub fn col_origins(&self) -> Vec<usize> {
        (0..self.origin_cols).map(|c| c * self.stride).collect()
    }
}

/// Square-fragment enumeration over a frame.
pub fn enumerate_fragments(frame: &Frame, frag: usize, stride: usize) -> Result<FragmentGrid> {
    FragmentGrid::new(frame.height, frame.width, frag, frag, stride)
}

/// Scalar operation counts of an encoding run. The projection counters
/// (`scalar_mults`, `scalar_adds`, `reused_products`) cover the linear stage
/// only; per-fragment normalization scaling is tallied in `scaling_mults`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub scalar_mults: u64,
    pub scalar_adds: u64,
    pub reused_products: u64,
    pub scaling_mults: u64,
}

impl OpCounter {
    pub fn merge(&mut self, other: &OpCounter) {
        self.scalar_mults += other.scalar_mults;
        self.scalar_adds += other.scalar_adds;
        self.reused_products += other.reused_products;
        self.scaling_mults += other.scaling_mults;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderPath {
    Naive,
    Reuse,
}

impl std::str::FromStr for EncoderPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(EncoderPath::Naive),
            "reuse" => Ok(EncoderPath::Reuse),
            other => Err(Error::usage(format!("unknown encoder path '{other}'"))),
        }
    }
}

fn check_geometry(frame: &Frame, grid: &FragmentGrid, base: &BaseMatrix) -> Result<()> {
    if grid.frag_h != base.rows() || grid.frag_w != base.cols() {
        return Err(Error::usage(format!(
            "grid fragment {}x{} does not match encoder window {}x{}",
            grid.frag_h,
            grid.frag_w,
            base.rows(),
            base.cols()
        )));
    }
    if let Some(&(r, c)) = grid.positions.last() {
        if r + grid.frag_h > frame.height || c + grid.frag_w > frame.width {
            return Err(Error::usage("fragment grid does not fit the frame"));
        }
    }
    Ok(())
}

/// Reference path: every window normalized and encoded independently.
pub fn encode_naive(
    frame: &Frame,
    grid: &FragmentGrid,
    enc: &EncoderParams,
    counter: &mut OpCounter,
) -> Result<Vec<Hypervector>> {
    check_geometry(frame, grid, enc.base())?;
    let work = (grid.frag_h * grid.frag_w * enc.dim()) as u64;
    let windows: Vec<Vec<f64>> = grid
        .positions
        .iter()
        .map(|&(r, c)| normalize(&frame.window(r, c, grid.frag_h, grid.frag_w)))
        .collect();
    let refs: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
    let out = encode_batch(&refs, enc)?;
    counter.scalar_mults += work * grid.len() as u64;
    counter.scalar_adds += work * grid.len() as u64;
    Ok(out)
}

/// Unnormalized contributions of one frame row, projected through base row
/// `base_row`, to every window origin in `origins`. Output `v` holds the
/// `D`-length partial sum of window `origins[v]`, accumulated in ascending
/// column order.
pub fn row_contributions(
    row: &[f32],
    base: &BaseMatrix,
    base_row: usize,
    origins: &[usize],
    counter: &mut OpCounter,
) -> Result<Vec<Vec<f64>>> {
    let w = base.cols();
    let c = base.chunk_len();
    let dim = base.dim();
    if row.len() < w {
        return Err(Error::usage(format!(
            "row of {} elements shorter than window width {w}",
            row.len()
        )));
    }
    if let Some(&o) = origins.iter().find(|&&o| o + w > row.len()) {
        return Err(Error::usage(format!("window origin {o} runs past row end")));
    }
    let mut acc = vec![vec![0.0f64; dim]; origins.len()];
    let span = 2 * w - 1;
    let mut products = vec![0.0f64; span * c];
    let mut have = vec![false; span];
    for (p, &x) in row.iter().enumerate() {
        // Windows containing column p; origins are sorted ascending.
        let first = origins.partition_point(|&o| o + w <= p);
        let last = origins.partition_point(|&o| o <= p);
        if first >= last {
            continue;
        }
        have.iter_mut().for_each(|h| *h = false);
        let xv = x as f64;
        for (v, &c0) in origins.iter().enumerate().take(last).skip(first) {
            let j = p - c0;
            for k in 0..w {
                let g = j as isize - k as isize;
                let slot = (g + w as isize - 1) as usize;
                let prod = &mut products[slot * c..(slot + 1) * c];
                if have[slot] {
                    counter.reused_products += c as u64;
                } else {
                    for (pd, &gd) in prod.iter_mut().zip(base.generator(base_row, g)) {
                        *pd = xv * gd as f64;
                    }
                    have[slot] = true;
                    counter.scalar_mults += c as u64;
                }
                for (a, &pd) in acc[v][k * c..(k + 1) * c].iter_mut().zip(prod.iter()) {
                    *a += pd;
                }
                counter.scalar_adds += c as u64;
            }
        }
    }
    Ok(acc)
}

/// Unnormalized projections `z_raw` of every window in `grid`, in grid
/// order, built from [`row_contributions`] summed over base rows in
/// ascending order.
pub fn project_reuse(
    frame: &Frame,
    grid: &FragmentGrid,
    base: &BaseMatrix,
    counter: &mut OpCounter,
) -> Result<Vec<Vec<f64>>> {
    check_geometry(frame, grid, base)?;
    let origins = grid.col_origins();
    let mut out = Vec::with_capacity(grid.len());
    for r0 in grid.row_origins() {
        let mut z = vec![vec![0.0f64; base.dim()]; origins.len()];
        for i in 0..grid.frag_h {
            let part = row_contributions(frame.row(r0 + i), base, i, &origins, counter)?;
            for (zv, pv) in z.iter_mut().zip(&part) {
                for (a, &b) in zv.iter_mut().zip(pv) {
                    *a += b;
                }
            }
            counter.scalar_adds += (origins.len() * base.dim()) as u64;
        }
        out.extend(z);
    }
    Ok(out)
}

/// Applies per-window normalization (by linearity, `z = z_raw / |x|`) and the
/// nonlinearity to raw projections produced in grid order.
pub fn finish_windows(
    frame: &Frame,
    grid: &FragmentGrid,
    enc: &EncoderParams,
    raw: Vec<Vec<f64>>,
    counter: &mut OpCounter,
) -> Vec<Hypervector> {
    grid.positions
        .iter()
        .zip(raw)
        .map(|(&(r, c), mut z)| {
            let norm = window_norm(frame, r, c, grid.frag_h, grid.frag_w);
            if norm > 0.0 {
                for v in z.iter_mut() {
                    *v /= norm;
                }
                counter.scaling_mults += z.len() as u64;
            } else {
                z.iter_mut().for_each(|v| *v = 0.0);
            }
            nonlinearity(&z, enc.bias())
        })
        .collect()
}

fn window_norm(frame: &Frame, r: usize, c: usize, h: usize, w: usize) -> f64 {
    let mut sum = 0.0f64;
    for rr in r..r + h {
        for &p in &frame.row(rr)[c..c + w] {
            sum += p as f64 * p as f64;
        }
    }
    sum.sqrt()
}

/// Computation-reuse path. Produces the same hypervectors as
/// [`encode_naive`] up to floating-point summation differences.
pub fn encode_reuse(
    frame: &Frame,
    grid: &FragmentGrid,
    enc: &EncoderParams,
    counter: &mut OpCounter,
) -> Result<Vec<Hypervector>> {
    let raw = project_reuse(frame, grid, enc.base(), counter)?;
    Ok(finish_windows(frame, grid, enc, raw, counter))
}

pub fn encode_frame(
    path: EncoderPath,
    frame: &Frame,
    grid: &FragmentGrid,
    enc: &EncoderParams,
    counter: &mut OpCounter,
) -> Result<Vec<Hypervector>> {
    match path {
        EncoderPath::Naive => encode_naive(frame, grid, enc, counter),
        EncoderPath::Reuse => encode_reuse(frame, grid, enc, counter),
    }
}
