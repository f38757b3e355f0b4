// SPDX-License-Identifier: Apache-2.0

//! Block-level primitives: work-efficient exclusive scan, prefix-array
//! search and fixed-order pairwise reduction.

use std::ops::AddAssign;

/// Number of steps charged for scanning `n` values (padded to a power of two).
pub fn scan_steps(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        2 * n.next_power_of_two().trailing_zeros()
    }
}

/// Exclusive prefix sum using the up-sweep / down-sweep schedule.
/// Input is padded with zeros to a power of two; the result has the input's length.
pub fn exclusive_scan(values: &[u64]) -> Vec<u64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let size = n.next_power_of_two();
    let mut a = vec![0u64; size];
    a[..n].copy_from_slice(values);
    let mut stride = 1;
    while stride < size {
        for k in (0..size).step_by(2 * stride) {
            a[k + 2 * stride - 1] += a[k + stride - 1];
        }
        stride *= 2;
    }
    a[size - 1] = 0;
    while stride > 1 {
        stride /= 2;
        for k in (0..size).step_by(2 * stride) {
            let left = a[k + stride - 1];
            a[k + stride - 1] = a[k + 2 * stride - 1];
            a[k + 2 * stride - 1] += left;
        }
    }
    a.truncate(n);
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("task {task} is outside the workload of {total} tasks")]
pub struct TaskOutOfRange {
    pub task: u64,
    pub total: u64,
}

/// Steps charged for one search over an array of `len` entries.
pub fn search_steps(len: usize) -> u32 {
    if len <= 1 {
        0
    } else {
        len.next_power_of_two().trailing_zeros()
    }
}

/// Greatest `i` with `prefix[i] <= task`. The last entry is the workload
/// total, so `task` must be below it.
pub fn lower_bound(prefix: &[u64], task: u64) -> Result<usize, TaskOutOfRange> {
    let total = prefix.last().copied().unwrap_or(0);
    if task >= total || prefix[0] > task {
        return Err(TaskOutOfRange { task, total });
    }
    Ok(prefix.partition_point(|&v| v <= task) - 1)
}

/// Pairwise reduction: at stride `i = 1, 2, 4, ...`, lane `k` (with
/// `k % 2i == 0`) absorbs lane `k + i`. Returns lane 0.
pub fn tree_reduce<T: Copy + AddAssign>(lanes: &mut [T]) -> T {
    let n = lanes.len();
    let mut stride = 1;
    while stride < n {
        let mut k = 0;
        while k + stride < n {
            let other = lanes[k + stride];
            lanes[k] += other;
            k += 2 * stride;
        }
        stride *= 2;
    }
    lanes[0]
}

/// Steps charged for a reduction over `n` lanes.
pub fn reduction_steps(n: usize) -> u32 {
    search_steps(n)
}
