//! Register-tiled, cache-blocked GEMM kernels.
//!
//! Three orientations cover every layer in the network:
//!
//! * [`matmul_nn`]  — `C = A * B`        (im2col convolutions, FC forward)
//! * [`matmul_nt`]  — `C = A * B^T`      (conv weight gradients, FC input
//!   gradients against a transposed weight store)
//! * [`matmul_tn`]  — `C = A^T * B`      (FC weight-gradient tiles)
//!
//! The microkernels accumulate into small fixed-size `[f64; 4/8]` locals so
//! LLVM keeps them in vector registers, and the K dimension is processed in
//! cache-sized chunks so each operand streams from memory once even for the
//! gigabyte-scale fully-connected weight.
//!
//! # Threading and determinism
//!
//! Large calls fan out across up to [`max_threads`] scoped threads by
//! splitting the **rows of C**. Every output element's floating-point
//! sequence is a pure function of its own row and column — the K-chunk
//! boundaries and lane accumulators never couple rows — so any row
//! partitioning produces bit-identical results to the serial loop. The one
//! global decision (the rank-1 fast path in the NN kernel) is made from the
//! full problem shape *before* splitting, so workers can never disagree with
//! what a serial run would have computed. Calls below a FLOP threshold stay
//! on the calling thread.

use std::sync::OnceLock;

/// K-chunk for the NN kernel: an 8-column B panel (KC x 8 x 8 bytes = 64 KiB)
/// stays cache resident while the M loop re-reads it.
const KC: usize = 1024;
/// K-chunk for the NT kernel: a block of 8 B rows (8 x KC_NT x 8 bytes)
/// stays cache resident while all A rows stream past it.
const KC_NT: usize = 1024;
/// Calls below this many FLOPs (2·m·k·n) are not worth a thread spawn.
const THREAD_MIN_FLOPS: f64 = 1.2e7;

/// Worker cap for large GEMMs: `ICTUS_THREADS` if set, otherwise the
/// machine's parallelism capped at 4 (the pipeline budgets a 4-core
/// desktop). Thread count never changes numeric results.
pub fn max_threads() -> usize {
    static N: OnceLock<usize> = OnceLock::new();
    *N.get_or_init(|| {
        if let Ok(v) = std::env::var("ICTUS_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                return n.clamp(1, 64);
            }
        }
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(4)
    })
}

fn plan_threads(flops: f64, rows: usize) -> usize {
    if flops < THREAD_MIN_FLOPS || rows < 2 {
        1
    } else {
        max_threads().min(rows)
    }
}

/// Rows per worker: even split, rounded up to whole 8-row tiles so the
/// threaded kernel dispatch matches the serial tiling exactly.
fn chunk_rows(m: usize, t: usize) -> usize {
    let per = m.div_ceil(t);
    per.div_ceil(8) * 8
}

#[inline(always)]
fn load<const W: usize>(s: &[f64]) -> [f64; W] {
    s[..W].try_into().unwrap()
}

/// Generates an NN microkernel computing an `MR x NL` C tile:
/// `C[i0.., j0..] (+)= A_chunk * B_chunk`. Accumulators are `MR` stack
/// arrays of `NL` lanes, small enough to live in registers.
macro_rules! gen_kernel_nn {
    ($name:ident, $mr:expr, $nl:expr) => {
        #[allow(clippy::too_many_arguments)]
        #[inline]
        fn $name(
            c: &mut [f64],
            cs: usize,
            a: &[f64],
            astride: usize,
            b: &[f64],
            bs: usize,
            i0: usize,
            j0: usize,
            p0: usize,
            kc: usize,
            acc_now: bool,
        ) {
            const MR: usize = $mr;
            const NL: usize = $nl;
            let mut arows: [&[f64]; MR] = [&[]; MR];
            for r in 0..MR {
                arows[r] = &a[(i0 + r) * astride + p0..(i0 + r) * astride + p0 + kc];
            }
            let mut acc = [[0.0f64; NL]; MR];
            for p in 0..kc {
                let bv: [f64; NL] = load(&b[(p0 + p) * bs + j0..]);
                for r in 0..MR {
                    let av = arows[r][p];
                    for l in 0..NL {
                        acc[r][l] = av.mul_add(bv[l], acc[r][l]);
                    }
                }
            }
            for r in 0..MR {
                let row = &mut c[(i0 + r) * cs + j0..(i0 + r) * cs + j0 + NL];
                if acc_now {
                    for l in 0..NL {
                        row[l] += acc[r][l];
                    }
                } else {
                    row.copy_from_slice(&acc[r]);
                }
            }
        }
    };
}

gen_kernel_nn!(nn_8x8, 8, 8);
gen_kernel_nn!(nn_4x8, 4, 8);
gen_kernel_nn!(nn_2x8, 2, 8);
gen_kernel_nn!(nn_1x8, 1, 8);
gen_kernel_nn!(nn_8x4, 8, 4);
gen_kernel_nn!(nn_4x4, 4, 4);
gen_kernel_nn!(nn_2x4, 2, 4);
gen_kernel_nn!(nn_1x4, 1, 4);

/// Tall contraction with a tiny output (the wide FC forward): rank-1 updates
/// keep all of C in L1 and stream B linearly exactly once, instead of
/// revisiting thin B panels per column block.
#[allow(clippy::too_many_arguments)]
fn nn_rank1_rows(
    c: &mut [f64],
    c_stride: usize,
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    b_stride: usize,
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    if !accumulate {
        for i in 0..m {
            c[i * c_stride..i * c_stride + n].fill(0.0);
        }
    }
    for p in 0..k {
        let brow = &b[p * b_stride..p * b_stride + n];
        for i in 0..m {
            let av = a[i * a_stride + p];
            for (cv, &bv) in c[i * c_stride..i * c_stride + n].iter_mut().zip(brow) {
                *cv = av.mul_add(bv, *cv);
            }
        }
    }
}

/// Cache-blocked tiled path over a window of C rows.
#[allow(clippy::too_many_arguments)]
fn nn_tiled_rows(
    c: &mut [f64],
    c_stride: usize,
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    b_stride: usize,
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    let mut p0 = 0;
    while p0 < k {
        let kc = KC.min(k - p0);
        let acc_now = accumulate || p0 > 0;
        // N outermost so a B panel is loaded once per chunk and the smaller
        // A chunk is re-read from cache.
        let mut j0 = 0;
        while j0 < n {
            let nl = if n - j0 >= 8 {
                8
            } else if n - j0 >= 4 {
                4
            } else {
                1
            };
            let mut i0 = 0;
            while i0 < m {
                let rem = m - i0;
                let ml = if rem >= 8 {
                    8
                } else if rem >= 4 {
                    4
                } else if rem >= 2 {
                    2
                } else {
                    1
                };
                match (ml, nl) {
                    (8, 8) => nn_8x8(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    (4, 8) => nn_4x8(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    (2, 8) => nn_2x8(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    (1, 8) => nn_1x8(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    (8, 4) => nn_8x4(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    (4, 4) => nn_4x4(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    (2, 4) => nn_2x4(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    (1, 4) => nn_1x4(c, c_stride, a, a_stride, b, b_stride, i0, j0, p0, kc, acc_now),
                    _ => {
                        // Single-column scalar tail (nl == 1).
                        for i in i0..i0 + ml {
                            let arow = &a[i * a_stride + p0..i * a_stride + p0 + kc];
                            let mut acc = if acc_now { c[i * c_stride + j0] } else { 0.0 };
                            for (p, &av) in arow.iter().enumerate() {
                                acc += av * b[(p0 + p) * b_stride + j0];
                            }
                            c[i * c_stride + j0] = acc;
                        }
                    }
                }
                i0 += ml;
            }
            j0 += nl;
        }
        p0 += kc;
    }
}

/// `C[m,n] (+)= A[m,k] * B[k,n]`, all row-major with explicit row strides.
#[allow(clippy::too_many_arguments)]
pub fn matmul_nn_strided(
    c: &mut [f64],
    c_stride: usize,
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    b_stride: usize,
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            for i in 0..m {
                c[i * c_stride..i * c_stride + n].fill(0.0);
            }
        }
        return;
    }
    let t = plan_threads(2.0 * m as f64 * k as f64 * n as f64, m);
    nn_split(c, c_stride, a, a_stride, b, b_stride, m, k, n, accumulate, t);
}

#[allow(clippy::too_many_arguments)]
fn nn_split(
    c: &mut [f64],
    c_stride: usize,
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    b_stride: usize,
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
    t: usize,
) {
    // Decided on the full shape, never per worker.
    let rank1 = m * n <= 2048 && k >= 4 * KC;
    let run = |c: &mut [f64], a: &[f64], rows: usize| {
        if rank1 {
            nn_rank1_rows(c, c_stride, a, a_stride, b, b_stride, rows, k, n, accumulate);
        } else {
            nn_tiled_rows(c, c_stride, a, a_stride, b, b_stride, rows, k, n, accumulate);
        }
    };
    if t == 1 {
        run(c, a, m);
        return;
    }
    let chunk = chunk_rows(m, t);
    std::thread::scope(|s| {
        let mut rest = c;
        let mut i0 = 0;
        while i0 < m {
            let rows = chunk.min(m - i0);
            let split = if i0 + rows == m {
                rest.len()
            } else {
                rows * c_stride
            };
            let (mine, tail) = std::mem::take(&mut rest).split_at_mut(split);
            rest = tail;
            let a_lo = &a[i0 * a_stride..];
            s.spawn(move || run(mine, a_lo, rows));
            i0 += rows;
        }
    });
}

/// Contiguous convenience wrapper for [`matmul_nn_strided`].
pub fn matmul_nn(
    c: &mut [f64],
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    matmul_nn_strided(c, n, a, k, b, n, m, k, n, accumulate);
}

/// Horizontal sum of a lane accumulator.
#[inline(always)]
fn hsum<const W: usize>(v: [f64; W]) -> f64 {
    v.iter().sum()
}

/// Generates an NT microkernel: dots one A row against `JB` B rows at once,
/// vectorised over the contraction axis with per-pair lane accumulators.
macro_rules! gen_kernel_nt {
    ($name:ident, $jb:expr) => {
        #[inline]
        fn $name(c: &mut [f64], arow: &[f64], brows: &[&[f64]; $jb]) {
            const JB: usize = $jb;
            const W: usize = 8;
            let kc = arow.len();
            let mut acc = [[0.0f64; W]; JB];
            let chunks = kc / W;
            for q in 0..chunks {
                let av: [f64; W] = load(&arow[q * W..]);
                for j in 0..JB {
                    let bv: [f64; W] = load(&brows[j][q * W..]);
                    for l in 0..W {
                        acc[j][l] = av[l].mul_add(bv[l], acc[j][l]);
                    }
                }
            }
            for p in chunks * W..kc {
                let av = arow[p];
                for j in 0..JB {
                    acc[j][0] = av.mul_add(brows[j][p], acc[j][0]);
                }
            }
            for j in 0..JB {
                c[j] += hsum(acc[j]);
            }
        }
    };
}

gen_kernel_nt!(nt_dot8, 8);
gen_kernel_nt!(nt_dot4, 4);
gen_kernel_nt!(nt_dot2, 2);
gen_kernel_nt!(nt_dot1, 1);

/// NT over a window of C/A rows.
fn nt_rows(c: &mut [f64], a: &[f64], b: &[f64], m: usize, inner: usize, n: usize, accumulate: bool) {
    if !accumulate {
        for i in 0..m {
            c[i * n..(i + 1) * n].fill(0.0);
        }
    }
    if inner == 0 {
        return;
    }
    let mut p0 = 0;
    while p0 < inner {
        let kc = KC_NT.min(inner - p0);
        let mut j0 = 0;
        while j0 < n {
            let jb = if n - j0 >= 8 {
                8
            } else if n - j0 >= 4 {
                4
            } else if n - j0 >= 2 {
                2
            } else {
                1
            };
            match jb {
                8 => {
                    let brows: [&[f64]; 8] =
                        std::array::from_fn(|j| &b[(j0 + j) * inner + p0..(j0 + j) * inner + p0 + kc]);
                    for i in 0..m {
                        let arow = &a[i * inner + p0..i * inner + p0 + kc];
                        nt_dot8(&mut c[i * n + j0..i * n + j0 + 8], arow, &brows);
                    }
                }
                4 => {
                    let brows: [&[f64]; 4] =
                        std::array::from_fn(|j| &b[(j0 + j) * inner + p0..(j0 + j) * inner + p0 + kc]);
                    for i in 0..m {
                        let arow = &a[i * inner + p0..i * inner + p0 + kc];
                        nt_dot4(&mut c[i * n + j0..i * n + j0 + 4], arow, &brows);
                    }
                }
                2 => {
                    let brows: [&[f64]; 2] =
                        std::array::from_fn(|j| &b[(j0 + j) * inner + p0..(j0 + j) * inner + p0 + kc]);
                    for i in 0..m {
                        let arow = &a[i * inner + p0..i * inner + p0 + kc];
                        nt_dot2(&mut c[i * n + j0..i * n + j0 + 2], arow, &brows);
                    }
                }
                _ => {
                    let brows: [&[f64]; 1] = [&b[j0 * inner + p0..j0 * inner + p0 + kc]];
                    for i in 0..m {
                        let arow = &a[i * inner + p0..i * inner + p0 + kc];
                        nt_dot1(&mut c[i * n + j0..i * n + j0 + 1], arow, &brows);
                    }
                }
            }
            j0 += jb;
        }
        p0 += kc;
    }
}

/// `C[m,n] (+)= A[m,inner] * B[n,inner]^T`: every output is a dot product of
/// an A row with a B row. Used where both operands are stored row-major
/// along the contraction axis. K-chunked so a block of 8 B rows stays cached
/// while every A row streams past it.
#[allow(clippy::too_many_arguments)]
pub fn matmul_nt(
    c: &mut [f64],
    a: &[f64],
    b: &[f64],
    m: usize,
    inner: usize,
    n: usize,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let t = plan_threads(2.0 * m as f64 * inner as f64 * n as f64, m);
    nt_split(c, a, b, m, inner, n, accumulate, t);
}

#[allow(clippy::too_many_arguments)]
fn nt_split(
    c: &mut [f64],
    a: &[f64],
    b: &[f64],
    m: usize,
    inner: usize,
    n: usize,
    accumulate: bool,
    t: usize,
) {
    if t == 1 {
        nt_rows(c, a, b, m, inner, n, accumulate);
        return;
    }
    let chunk = chunk_rows(m, t);
    std::thread::scope(|s| {
        let mut rest = c;
        let mut i0 = 0;
        while i0 < m {
            let rows = chunk.min(m - i0);
            let split = if i0 + rows == m { rest.len() } else { rows * n };
            let (mine, tail) = std::mem::take(&mut rest).split_at_mut(split);
            rest = tail;
            let a_lo = &a[i0 * inner..];
            s.spawn(move || nt_rows(mine, a_lo, b, rows, inner, n, accumulate));
            i0 += rows;
        }
    });
}

/// TN over a window of C rows; `col0` is the window's offset into A's
/// columns (output row `i` reads `A[p, col0 + i]`).
#[allow(clippy::too_many_arguments)]
fn tn_rows(
    c: &mut [f64],
    a: &[f64],
    a_stride: usize,
    col0: usize,
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        if !accumulate {
            crow.fill(0.0);
        }
        for p in 0..k {
            let av = a[p * a_stride + col0 + i];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = av.mul_add(bv, *cv);
            }
        }
    }
}

/// `C[m,n] (+)= A^T * B` where `A` is `[k, m]` with row stride `a_stride`
/// and `B` is `[k, n]` row-major. `k` is expected to be small (a batch
/// dimension); the kernel walks output rows and accumulates rank-1 updates.
#[allow(clippy::too_many_arguments)]
pub fn matmul_tn(
    c: &mut [f64],
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let t = plan_threads(2.0 * m as f64 * k as f64 * n as f64, m);
    tn_split(c, a, a_stride, b, m, k, n, accumulate, t);
}

#[allow(clippy::too_many_arguments)]
fn tn_split(
    c: &mut [f64],
    a: &[f64],
    a_stride: usize,
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
    t: usize,
) {
    if t == 1 {
        tn_rows(c, a, a_stride, 0, b, m, k, n, accumulate);
        return;
    }
    let chunk = chunk_rows(m, t);
    std::thread::scope(|s| {
        let mut rest = c;
        let mut i0 = 0;
        while i0 < m {
            let rows = chunk.min(m - i0);
            let split = if i0 + rows == m { rest.len() } else { rows * n };
            let (mine, tail) = std::mem::take(&mut rest).split_at_mut(split);
            rest = tail;
            s.spawn(move || tn_rows(mine, a, a_stride, i0, b, rows, k, n, accumulate));
            i0 += rows;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                for j in 0..n {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn nn_matches_naive_over_edge_shapes() {
        let mut rng = crate::seeding::substream(41, "matmul-nn");
        // Shapes straddling the microkernel tiles and the 1024 K-chunk.
        for &(m, k, n) in &[
            (1, 1, 1),
            (3, 5, 7),
            (4, 16, 32),
            (5, 17, 33),
            (8, 1030, 40),
            (9, 64, 124),
            (13, 2050, 65),
        ] {
            let a = rand_vec(&mut rng, m * k);
            let b = rand_vec(&mut rng, k * n);
            let want = naive_nn(&a, &b, m, k, n);
            let mut c = vec![0.0; m * n];
            matmul_nn(&mut c, &a, &b, m, k, n, false);
            for (x, y) in c.iter().zip(&want) {
                assert!((x - y).abs() < 1e-10, "({m},{k},{n}): {x} vs {y}");
            }
            // Accumulating on top of an existing C.
            let mut c2 = want.clone();
            matmul_nn(&mut c2, &a, &b, m, k, n, true);
            for (x, y) in c2.iter().zip(&want) {
                assert!((x - 2.0 * y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nn_strided_views_match_dense_result() {
        let mut rng = crate::seeding::substream(43, "matmul-strided");
        let (m, k, n) = (6, 9, 11);
        let (a_stride, b_stride, c_stride) = (15, 20, 14);
        let a_buf = rand_vec(&mut rng, m * a_stride);
        let b_buf = rand_vec(&mut rng, k * b_stride);
        let mut c_buf = vec![7.0; m * c_stride];
        matmul_nn_strided(
            &mut c_buf, c_stride, &a_buf, a_stride, &b_buf, b_stride, m, k, n, false,
        );

        let a: Vec<f64> = (0..m).flat_map(|i| a_buf[i * a_stride..i * a_stride + k].to_vec()).collect();
        let b: Vec<f64> = (0..k).flat_map(|p| b_buf[p * b_stride..p * b_stride + n].to_vec()).collect();
        let want = naive_nn(&a, &b, m, k, n);
        for i in 0..m {
            for j in 0..n {
                assert!((c_buf[i * c_stride + j] - want[i * n + j]).abs() < 1e-12);
            }
            // Bytes outside the written window stay untouched.
            for j in n..c_stride {
                assert_eq!(c_buf[i * c_stride + j], 7.0);
            }
        }
    }

    #[test]
    fn nt_matches_naive() {
        let mut rng = crate::seeding::substream(47, "matmul-nt");
        for &(m, inner, n) in &[(1, 3, 2), (4, 33, 5), (7, 4100, 9), (16, 257, 124), (3, 1025, 19)] {
            let a = rand_vec(&mut rng, m * inner);
            let b = rand_vec(&mut rng, n * inner);
            let mut c = vec![0.0; m * n];
            matmul_nt(&mut c, &a, &b, m, inner, n, false);
            for i in 0..m {
                for j in 0..n {
                    let want: f64 = (0..inner).map(|p| a[i * inner + p] * b[j * inner + p]).sum();
                    let got = c[i * n + j];
                    assert!((got - want).abs() < 1e-9, "({m},{inner},{n})@({i},{j})");
                }
            }
            // Accumulate path.
            let mut c2 = c.clone();
            matmul_nt(&mut c2, &a, &b, m, inner, n, true);
            for (x, y) in c2.iter().zip(&c) {
                assert!((x - 2.0 * y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tn_matches_naive_with_stride() {
        let mut rng = crate::seeding::substream(53, "matmul-tn");
        let (m, k, n) = (37, 6, 19);
        let a_stride = 50; // A is [k, a_stride], logical [k, m] slice
        let a = rand_vec(&mut rng, k * a_stride);
        let b = rand_vec(&mut rng, k * n);
        let mut c = vec![0.0; m * n];
        matmul_tn(&mut c, &a, a_stride, &b, m, k, n, false);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|p| a[p * a_stride + i] * b[p * n + j]).sum();
                assert!((c[i * n + j] - want).abs() < 1e-12);
            }
        }
        // Accumulate path.
        matmul_tn(&mut c, &a, a_stride, &b, m, k, n, true);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|p| a[p * a_stride + i] * b[p * n + j]).sum();
                assert!((c[i * n + j] - 2.0 * want).abs() < 1e-12);
            }
        }
    }

    /// Splitting C's rows across workers must produce exactly the bytes of
    /// the serial loop — tolerance zero by design. Worker counts are forced
    /// here so the property is exercised even on a single-core machine, and
    /// the row counts deliberately do not divide evenly.
    #[test]
    fn threaded_paths_are_bitwise_equal_to_serial() {
        let mut rng = crate::seeding::substream(61, "matmul-threads");
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();

        // Tiled NN, strided C so the last chunk's slice is shorter than
        // rows * stride.
        let (m, k, n) = (61, 1600, 47);
        let c_stride = n + 3;
        let a = rand_vec(&mut rng, m * k);
        let b = rand_vec(&mut rng, k * n);
        let mut serial = vec![0.5; (m - 1) * c_stride + n];
        nn_split(&mut serial, c_stride, &a, k, &b, n, m, k, n, false, 1);
        for t in [2, 3, 4, 7] {
            let mut par = vec![0.5; (m - 1) * c_stride + n];
            nn_split(&mut par, c_stride, &a, k, &b, n, m, k, n, false, t);
            assert_eq!(bits(&par), bits(&serial), "nn tiled, t={t}");
        }

        // Rank-1 NN path: m*n <= 2048 and k >= 4*KC.
        let (m, k, n) = (8, 8192, 124);
        let a = rand_vec(&mut rng, m * k);
        let b = rand_vec(&mut rng, k * n);
        let mut serial = vec![0.0; m * n];
        nn_split(&mut serial, n, &a, k, &b, n, m, k, n, false, 1);
        for t in [2, 3, 4] {
            let mut par = vec![0.0; m * n];
            nn_split(&mut par, n, &a, k, &b, n, m, k, n, false, t);
            assert_eq!(bits(&par), bits(&serial), "nn rank1, t={t}");
        }

        // NT, accumulate path.
        let (m, inner, n) = (19, 2837, 140);
        let a = rand_vec(&mut rng, m * inner);
        let b = rand_vec(&mut rng, n * inner);
        let mut serial = vec![1.0; m * n];
        nt_split(&mut serial, &a, &b, m, inner, n, true, 1);
        for t in [2, 3, 4] {
            let mut par = vec![1.0; m * n];
            nt_split(&mut par, &a, &b, m, inner, n, true, t);
            assert_eq!(bits(&par), bits(&serial), "nt, t={t}");
        }

        // TN: workers see a column offset into A instead of a sliced base.
        let (m, k, n) = (1021, 8, 124);
        let a_stride = m + 13;
        let a = rand_vec(&mut rng, k * a_stride);
        let b = rand_vec(&mut rng, k * n);
        let mut serial = vec![0.0; m * n];
        tn_split(&mut serial, &a[5..], a_stride, &b, m, k, n, false, 1);
        for t in [2, 3, 4] {
            let mut par = vec![0.0; m * n];
            tn_split(&mut par, &a[5..], a_stride, &b, m, k, n, false, t);
            assert_eq!(bits(&par), bits(&serial), "tn, t={t}");
        }
    }

    /// Not a correctness test: prints kernel throughput for the shapes that
    /// dominate training. Run with
    /// `cargo test -p ictus-core --release -- --ignored gemm_throughput --nocapture`.
    #[test]
    #[ignore]
    fn gemm_throughput() {
        let mut rng = crate::seeding::substream(59, "bench");
        println!("worker cap: {}", max_threads());

        // Large-kernel convolution forward: [64, 1600] x [1600, 6837].
        let (m, k, n) = (64, 1600, 6837);
        let a = rand_vec(&mut rng, m * k);
        let b = rand_vec(&mut rng, k * n);
        let mut c = vec![0.0; m * n];
        let reps = 10;
        let t0 = std::time::Instant::now();
        for _ in 0..reps {
            matmul_nn(&mut c, &a, &b, m, k, n, false);
        }
        let dt = t0.elapsed().as_secs_f64();
        let gflops = (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / dt / 1e9;
        println!("matmul_nn conv {m}x{k}x{n}: {gflops:.2} GFLOP/s");

        // Wide FC forward: [8, 164088] x [164088, 124] with B streaming.
        let (m, k, n) = (8, 164_088, 124);
        let a = rand_vec(&mut rng, m * k);
        let b = rand_vec(&mut rng, k * n);
        let mut c = vec![0.0; m * n];
        let t0 = std::time::Instant::now();
        for _ in 0..reps {
            matmul_nn(&mut c, &a, &b, m, k, n, false);
        }
        let dt = t0.elapsed().as_secs_f64();
        let gflops = (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / dt / 1e9;
        println!("matmul_nn fc   {m}x{k}x{n}: {gflops:.2} GFLOP/s");

        // Convolution weight gradient: dY [64, 6837] x col [1600, 6837]^T.
        let (m, inner, n) = (64, 6837, 1600);
        let a = rand_vec(&mut rng, m * inner);
        let b = rand_vec(&mut rng, n * inner);
        let mut c = vec![0.0; m * n];
        let t1 = std::time::Instant::now();
        for _ in 0..reps {
            matmul_nt(&mut c, &a, &b, m, inner, n, false);
        }
        let dt = t1.elapsed().as_secs_f64();
        let gflops = (2.0 * m as f64 * inner as f64 * n as f64 * reps as f64) / dt / 1e9;
        println!("matmul_nt dW   {m}x{inner}x{n}: {gflops:.2} GFLOP/s");

        // FC input gradient: dY [8, 124] x W_t [164088, 124]^T.
        let (m, inner, n) = (8, 124, 164_088);
        let a = rand_vec(&mut rng, m * inner);
        let b = rand_vec(&mut rng, n * inner);
        let mut c = vec![0.0; m * n];
        let t1 = std::time::Instant::now();
        for _ in 0..reps {
            matmul_nt(&mut c, &a, &b, m, inner, n, false);
        }
        let dt = t1.elapsed().as_secs_f64();
        let gflops = (2.0 * m as f64 * inner as f64 * n as f64 * reps as f64) / dt / 1e9;
        println!("matmul_nt dX   {m}x{inner}x{n}: {gflops:.2} GFLOP/s");

        // FC weight-gradient tile: 8192 weight rows against an 8-sample batch.
        let (mt, kb, nt) = (8192, 8, 124);
        let a = rand_vec(&mut rng, kb * 164_088);
        let b = rand_vec(&mut rng, kb * nt);
        let mut c = vec![0.0; mt * nt];
        let t2 = std::time::Instant::now();
        let tiles = 160;
        for t in 0..tiles {
            let off = (t % 16) * mt;
            matmul_tn(&mut c, &a[off..], 164_088, &b, mt, kb, nt, false);
        }
        let dt = t2.elapsed().as_secs_f64();
        let gflops = (2.0 * mt as f64 * kb as f64 * nt as f64 * tiles as f64) / dt / 1e9;
        println!("matmul_tn dWt  {mt}x{kb}x{nt}: {gflops:.2} GFLOP/s");
    }
}
