// SPDX-License-Identifier: Apache-2.0

//! Cycle-level model of the systolic-array encoder.
//!
//! A tile holds `h x w` processing elements. PE row `i` projects one frame
//! row through base row `i`; PE column `k` owns chunk `k` of every window's
//! partial hypervector. Elements stream left to right, one per cycle, each
//! carrying the chunk products that later PEs can reuse. The head PE
//! multiplies an element by every head chunk it needs (up to `w`), and in
//! steady state each downstream PE adds exactly one fresh product.
//!
//! Timing contract: one cycle is one PE consuming one element and performing
//! its scheduled chunk multiplications. With `multipliers_per_pe` below the
//! number of products an element needs, the PE stays busy for
//! `ceil(products / multipliers)` cycles and upstream FIFOs back up.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hdc::{BaseMatrix, EncoderParams, Hypervector};
use crate::sliding::{finish_windows, FragmentGrid, Frame, OpCounter};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SaConfig {
    pub frag_h: usize,
    pub frag_w: usize,
    pub dim: usize,
    pub stride: usize,
    /// Tiles along the frame's rows and columns.
    pub t1: usize,
    pub t2: usize,
    pub fifo_capacity: usize,
    /// Chunk multipliers available per PE per cycle.
    pub multipliers_per_pe: usize,
    /// Fixed latency of the cosine-and-compare stage after projection.
    pub classifier_latency: u64,
}

impl SaConfig {
    pub fn new(frag_h: usize, frag_w: usize, dim: usize) -> Self {
        SaConfig {
            frag_h,
            frag_w,
            dim,
            stride: 1,
            t1: 1,
            t2: 1,
            fifo_capacity: 4,
            multipliers_per_pe: frag_w.max(1),
            classifier_latency: 0,
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.dim / self.frag_w
    }

    pub fn validate(&self) -> Result<()> {
        if self.frag_h == 0 || self.frag_w == 0 {
            return Err(Error::usage("PE grid dimensions must be positive"));
        }
        if !self.dim.is_multiple_of(self.frag_w) || self.dim < self.frag_w {
            return Err(Error::usage(format!(
                "dimension not divisible by window width ({} mod {} != 0)",
                self.dim, self.frag_w
            )));
        }
        if self.t1 == 0 || self.t2 == 0 {
            return Err(Error::usage("tile counts must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::usage("stride must be at least 1"));
        }
        if self.fifo_capacity == 0 || self.multipliers_per_pe == 0 {
            return Err(Error::usage(
                "FIFO capacity and multipliers must be at least 1",
            ));
        }
        Ok(())
    }

    fn check_base(&self, base: &BaseMatrix) -> Result<()> {
        if base.rows() != self.frag_h || base.cols() != self.frag_w || base.dim() != self.dim {
            return Err(Error::usage(format!(
                "base matrix {}x{}x{} does not match SA config {}x{}x{}",
                base.rows(),
                base.cols(),
                base.dim(),
                self.frag_h,
                self.frag_w,
                self.dim
            )));
        }
        Ok(())
    }
}

/// One PE's activity in one cycle. `pe_row` and `pe_col` are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub cycle: u64,
    pub sa: usize,
    pub pe_row: usize,
    pub pe_col: usize,
    pub active: bool,
    /// Chunk multiplications started this cycle.
    pub mults: u64,
    /// Chunk products forwarded to the next PE this cycle.
    pub forwards: u64,
    /// Window chunks completed this cycle.
    pub completions: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineTrace {
    pub records: Vec<TraceRecord>,
}

impl PipelineTrace {
    /// `cycle,sa,pe_row,pe_col,active,mults,forwards,completions`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle,sa,pe_row,pe_col,active,mults,forwards,completions\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.cycle,
                r.sa,
                r.pe_row,
                r.pe_col,
                r.active as u8,
                r.mults,
                r.forwards,
                r.completions
            );
        }
        out
    }

    pub fn chunk_mults(&self) -> u64 {
        self.records.iter().map(|r| r.mults).sum()
    }

    /// First cycle at which PE `(pe_row, pe_col)` (1-based) was active.
    pub fn first_active(&self, pe_row: usize, pe_col: usize) -> Option<u64> {
        self.records
            .iter()
            .filter(|r| r.pe_row == pe_row && r.pe_col == pe_col && r.active)
            .map(|r| r.cycle)
            .min()
    }

    pub fn active_at(&self, cycle: u64, pe_row: usize, pe_col: usize) -> bool {
        self.records
            .iter()
            .any(|r| r.cycle == cycle && r.pe_row == pe_row && r.pe_col == pe_col && r.active)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RowStats {
    pub cycles: u64,
    pub chunk_mults: u64,
    pub forwards: u64,
    pub completions: u64,
    /// Cycles in which a PE held a finished element because the next FIFO
    /// was full, plus cycles the source could not inject.
    pub stalls: u64,
    pub max_fifo_occupancy: usize,
    pub max_registers: usize,
}

impl RowStats {
    fn absorb(&mut self, other: &RowStats) {
        self.chunk_mults += other.chunk_mults;
        self.forwards += other.forwards;
        self.completions += other.completions;
        self.stalls += other.stalls;
        self.max_fifo_occupancy = self.max_fifo_occupancy.max(other.max_fifo_occupancy);
        self.max_registers = self.max_registers.max(other.max_registers);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowRun {
    /// Per window origin, the `D`-length unnormalized projection of this row.
    pub chunks: Vec<Vec<f64>>,
    pub trace: PipelineTrace,
    pub stats: RowStats,
}

struct Token {
    p: usize,
    x: f64,
    products: Vec<(isize, Vec<f64>)>,
    ready_at: u64,
}

struct Pe {
    fifo: VecDeque<Token>,
    busy: Option<(Token, u64)>,
    outbox: Option<Token>,
    registers: BTreeMap<usize, Vec<f64>>,
}

/// Streams one frame row through a chain of `w` PEs projecting through base
/// row `base_row`. `origins` are the window origins (ascending) within
/// `row`. The returned chunks equal
/// [`crate::sliding::row_contributions`] bit for bit.
pub fn run_row(
    row: &[f32],
    cfg: &SaConfig,
    base: &BaseMatrix,
    base_row: usize,
    origins: &[usize],
    sa: usize,
) -> Result<RowRun> {
    cfg.validate()?;
    cfg.check_base(base)?;
    let w = cfg.frag_w;
    let n = row.len();
    if n < w {
        return Err(Error::usage(format!(
            "row of {n} elements shorter than window width {w}"
        )));
    }
    if base_row >= cfg.frag_h {
        return Err(Error::usage("base row outside PE grid"));
    }
    if origins.windows(2).any(|o| o[0] >= o[1]) || origins.iter().any(|&o| o + w > n) {
        return Err(Error::usage(
            "window origins must be ascending and inside the row",
        ));
    }

    let mut pes: Vec<Pe> = (0..w)
        .map(|_| Pe {
            fifo: VecDeque::new(),
            busy: None,
            outbox: None,
            registers: BTreeMap::new(),
        })
        .collect();
    let mut chunks = vec![vec![0.0f64; cfg.dim]; origins.len()];
    let mut trace = PipelineTrace::default();
    let mut stats = RowStats::default();
    let mut next = 0usize;
    let mut t: u64 = 0;

    loop {
        t += 1;
        if next < n {
            if pes[0].fifo.len() < cfg.fifo_capacity {
                pes[0].fifo.push_back(Token {
                    p: next,
                    x: row[next] as f64,
                    products: Vec::new(),
                    ready_at: t,
                });
                next += 1;
            } else {
                stats.stalls += 1;
            }
        }
        let mut any_active = false;
        // Downstream first: a pop this cycle frees space for an upstream push.
        for k in (0..w).rev() {
            let mut rec = TraceRecord {
                cycle: t,
                sa,
                pe_row: base_row + 1,
                pe_col: k + 1,
                active: false,
                mults: 0,
                forwards: 0,
                completions: 0,
            };
            if let Some(tok) = pes[k].outbox.take() {
                if !try_push(&mut pes, k + 1, tok, t, cfg.fifo_capacity) {
                    stats.stalls += 1;
                }
            }
            if pes[k].busy.is_none() && pes[k].outbox.is_none() {
                let ready = pes[k].fifo.front().is_some_and(|tok| tok.ready_at <= t);
                if ready {
                    let tok = pes[k].fifo.pop_front().expect("front checked");
                    let (out_tok, new_products) = process(
                        &mut pes[k],
                        tok,
                        k,
                        cfg,
                        base,
                        base_row,
                        origins,
                        &mut chunks,
                        &mut rec,
                    );
                    stats.max_registers = stats.max_registers.max(pes[k].registers.len());
                    rec.mults = new_products;
                    let service = new_products.div_ceil(cfg.multipliers_per_pe as u64).max(1);
                    pes[k].busy = Some((out_tok, t + service - 1));
                }
            }
            if let Some((_, finish)) = &pes[k].busy {
                rec.active = true;
                any_active = true;
                if *finish == t {
                    let (tok, _) = pes[k].busy.take().expect("busy checked");
                    if k + 1 < w {
                        rec.forwards = tok.products.len() as u64;
                        // A refused push parks the token; later waiting cycles count as stalls.
                        try_push(&mut pes, k + 1, tok, t, cfg.fifo_capacity);
                    }
                }
            }
            stats.chunk_mults += rec.mults;
            stats.forwards += rec.forwards;
            stats.completions += rec.completions;
            trace.records.push(rec);
        }
        for pe in &pes {
            stats.max_fifo_occupancy = stats.max_fifo_occupancy.max(pe.fifo.len());
        }
        let drained = next == n
            && pes
                .iter()
                .all(|pe| pe.fifo.is_empty() && pe.busy.is_none() && pe.outbox.is_none());
        if any_active {
            stats.cycles = t;
        }
        if drained {
            break;
        }
    }
    // Trim records past the last active cycle.
    trace.records.retain(|r| r.cycle <= stats.cycles);
    Ok(RowRun {
        chunks,
        trace,
        stats,
    })
}

/// Pushes `tok` into PE `k`'s FIFO when there is room; otherwise parks it in
/// the sender's outbox. Returns whether the push happened.
fn try_push(pes: &mut [Pe], k: usize, mut tok: Token, t: u64, cap: usize) -> bool {
    if pes[k].fifo.len() < cap {
        tok.ready_at = t + 1;
        pes[k].fifo.push_back(tok);
        true
    } else {
        pes[k - 1].outbox = Some(tok);
        false
    }
}

#[allow(clippy::too_many_arguments)]
fn process(
    pe: &mut Pe,
    tok: Token,
    k: usize,
    cfg: &SaConfig,
    base: &BaseMatrix,
    base_row: usize,
    origins: &[usize],
    chunks: &mut [Vec<f64>],
    rec: &mut TraceRecord,
) -> (Token, u64) {
    let w = cfg.frag_w;
    let c = cfg.chunk_len();
    let p = tok.p;
    let first = origins.partition_point(|&o| o + w <= p);
    let last = origins.partition_point(|&o| o <= p);
    let mut products: BTreeMap<isize, Vec<f64>> = tok.products.into_iter().collect();
    let mut fresh = 0u64;
    for v in first..last {
        let o = origins[v];
        let g = p as isize - o as isize - k as isize;
        let prod = products.entry(g).or_insert_with(|| {
            fresh += 1;
            base.generator(base_row, g)
                .iter()
                .map(|&gd| tok.x * gd as f64)
                .collect()
        });
        let reg = pe.registers.entry(v).or_insert_with(|| vec![0.0; c]);
        for (a, &b) in reg.iter_mut().zip(prod.iter()) {
            *a += b;
        }
        if p == o + w - 1 {
            let done = pe.registers.remove(&v).expect("register present");
            chunks[v][k * c..(k + 1) * c].copy_from_slice(&done);
            rec.completions += 1;
        }
    }
    // Keep only products some later PE of this chain will need.
    let offsets: Vec<isize> = (first..last).map(|v| (p - origins[v]) as isize).collect();
    let forward: Vec<(isize, Vec<f64>)> = products
        .into_iter()
        .filter(|(g, _)| (k + 1..w).any(|k2| offsets.contains(&(g + k2 as isize))))
        .collect();
    (
        Token {
            p,
            x: tok.x,
            products: forward,
            ready_at: 0,
        },
        fresh,
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SimSummary {
    /// Cycles of the slowest tile, including reduction and classifier stages.
    pub cycles: u64,
    /// Row-chain streaming cycles of the slowest tile.
    pub projection_cycles: u64,
    pub chunk_mults: u64,
    pub scalar_mults: u64,
    pub forwards: u64,
    pub stalls: u64,
    pub max_fifo_occupancy: usize,
    pub fragments: usize,
    /// Naive projection multiplications divided by simulated ones.
    pub reuse_factor: f64,
}

impl SimSummary {
    pub fn to_csv(&self) -> String {
        format!(
            "cycles,projection_cycles,chunk_mults,scalar_mults,forwards,stalls,max_fifo_occupancy,fragments,reuse_factor\n{},{},{},{},{},{},{},{},{}\n",
            self.cycles,
            self.projection_cycles,
            self.chunk_mults,
            self.scalar_mults,
            self.forwards,
            self.stalls,
            self.max_fifo_occupancy,
            self.fragments,
            self.reuse_factor
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRun {
    /// Encoded windows in grid (row-major origin) order.
    pub hypervectors: Vec<Hypervector>,
    pub summary: SimSummary,
    pub trace: Option<PipelineTrace>,
}

/// Splits `n` items into `parts` contiguous, near-equal, non-empty blocks.
fn partition(n: usize, parts: usize) -> Option<Vec<std::ops::Range<usize>>> {
    if parts == 0 || parts > n {
        return None;
    }
    let (q, r) = (n / parts, n % parts);
    let mut start = 0;
    Some(
        (0..parts)
            .map(|i| {
                let len = q + usize::from(i < r);
                let range = start..start + len;
                start += len;
                range
            })
            .collect(),
    )
}

fn reduction_cycles(h: usize) -> u64 {
    (usize::BITS - (h.max(1) - 1).leading_zeros()) as u64
}

/// Simulates a whole frame on `t1 x t2` independent tiles. Window origins
/// are split into contiguous tile blocks; each tile reads the columns its
/// windows cover. Within a tile, row bands run one after another and the
/// `h` PE rows of a band run in parallel, followed by a `ceil(log2 h)`-cycle
/// reduction of row partials.
pub fn run_frame(
    frame: &Frame,
    cfg: &SaConfig,
    enc: &EncoderParams,
    keep_trace: bool,
) -> Result<FrameRun> {
    cfg.validate()?;
    cfg.check_base(enc.base())?;
    let grid = FragmentGrid::new(
        frame.height(),
        frame.width(),
        cfg.frag_h,
        cfg.frag_w,
        cfg.stride,
    )?;
    let row_blocks = partition(grid.origin_rows, cfg.t1).ok_or_else(|| {
        Error::usage(format!(
            "{} row tiles but only {} window rows: tile smaller than fragment",
            cfg.t1, grid.origin_rows
        ))
    })?;
    let col_blocks = partition(grid.origin_cols, cfg.t2).ok_or_else(|| {
        Error::usage(format!(
            "{} column tiles but only {} window columns: tile smaller than fragment",
            cfg.t2, grid.origin_cols
        ))
    })?;
    let s = cfg.stride;
    let w = cfg.frag_w;
    let base = enc.base();
    let mut raw = vec![vec![0.0f64; cfg.dim]; grid.len()];
    let mut trace = keep_trace.then(PipelineTrace::default);
    let mut summary = SimSummary {
        fragments: grid.len(),
        ..SimSummary::default()
    };
    let mut totals = RowStats::default();
    let mut sa = 0usize;
    for rb in &row_blocks {
        for cb in &col_blocks {
            sa += 1;
            let col_start = cb.start * s;
            let col_end = (cb.end - 1) * s + w;
            let origins: Vec<usize> = cb.clone().map(|cj| cj * s - col_start).collect();
            let mut tile_proj = 0u64;
            let mut tile_cycles = 0u64;
            for ri in rb.clone() {
                let r0 = ri * s;
                let mut band = 0u64;
                let mut band_z = vec![vec![0.0f64; cfg.dim]; origins.len()];
                for i in 0..cfg.frag_h {
                    let row = &frame.row(r0 + i)[col_start..col_end];
                    let run = run_row(row, cfg, base, i, &origins, sa)?;
                    band = band.max(run.stats.cycles);
                    totals.absorb(&run.stats);
                    for (z, part) in band_z.iter_mut().zip(&run.chunks) {
                        for (a, &b) in z.iter_mut().zip(part) {
                            *a += b;
                        }
                    }
                    if let Some(tr) = trace.as_mut() {
                        tr.records
                            .extend(run.trace.records.iter().map(|r| TraceRecord {
                                cycle: r.cycle + tile_cycles,
                                ..*r
                            }));
                    }
                }
                for (v, z) in band_z.into_iter().enumerate() {
                    raw[ri * grid.origin_cols + cb.start + v] = z;
                }
                tile_proj += band;
                tile_cycles += band + reduction_cycles(cfg.frag_h);
            }
            tile_cycles += cfg.classifier_latency;
            summary.projection_cycles = summary.projection_cycles.max(tile_proj);
            summary.cycles = summary.cycles.max(tile_cycles);
        }
    }
    summary.chunk_mults = totals.chunk_mults;
    summary.scalar_mults = totals.chunk_mults * cfg.chunk_len() as u64;
    summary.forwards = totals.forwards;
    summary.stalls = totals.stalls;
    summary.max_fifo_occupancy = totals.max_fifo_occupancy;
    let naive = (grid.len() * cfg.frag_h * cfg.frag_w * cfg.dim) as f64;
    summary.reuse_factor = if summary.scalar_mults == 0 {
        0.0
    } else {
        naive / summary.scalar_mults as f64
    };
    let hypervectors = finish_windows(frame, &grid, enc, raw, &mut OpCounter::default());
    Ok(FrameRun {
        hypervectors,
        summary,
        trace,
    })
}
