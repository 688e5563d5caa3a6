//! Piecewise-constant schedules for the performance weight and filter horizon.

use serde::{Deserialize, Serialize};

/// `a(k)` and `M(k)` as step functions. Each segment list is sorted by its
/// start index and the first segment starts at `k = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSchedule {
    pub a_segments: Vec<(usize, f64)>,
    pub m_segments: Vec<(usize, usize)>,
    pub ks: Option<usize>,
}

impl ModeSchedule {
    pub fn constant(a: f64, m: usize) -> Self {
        Self { a_segments: vec![(0, a)], m_segments: vec![(0, m)], ks: None }
    }

    /// Exploration with `a_before` until `ks`, then `a_after`.
    pub fn two_phase(a_before: f64, a_after: f64, ks: usize, m: usize) -> Self {
        let a_segments = if ks == 0 { vec![(0, a_after)] } else { vec![(0, a_before), (ks, a_after)] };
        Self { a_segments, m_segments: vec![(0, m)], ks: Some(ks) }
    }

    fn lookup<T: Copy>(segments: &[(usize, T)], k: usize) -> T {
        let idx = segments.partition_point(|(start, _)| *start <= k);
        segments[idx.saturating_sub(1)].1
    }

    pub fn a_at(&self, k: usize) -> f64 {
        Self::lookup(&self.a_segments, k)
    }

    pub fn m_at(&self, k: usize) -> usize {
        Self::lookup(&self.m_segments, k)
    }

    /// Smallest and largest `a` the schedule ever uses.
    pub fn a_range(&self) -> (f64, f64) {
        self.a_segments
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, a)| (lo.min(*a), hi.max(*a)))
    }

    /// `1 - sup_{k >= ks} a(k)` when a switch index is declared.
    pub fn stability_margin(&self) -> Option<f64> {
        let ks = self.ks?;
        let sup = self
            .a_segments
            .iter()
            .enumerate()
            .filter(|(i, (start, _))| {
                let end = self.a_segments.get(i + 1).map_or(usize::MAX, |s| s.0);
                end > ks || *start >= ks
            })
            .map(|(_, (_, a))| *a)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(1.0 - sup)
    }

    /// Problems with the schedule for a nominal horizon `n`.
    pub fn check(&self, n: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.a_segments.first().map(|s| s.0) != Some(0) || self.m_segments.first().map(|s| s.0) != Some(0) {
            out.push("schedule must start at k = 0".to_string());
        }
        if self.a_segments.windows(2).any(|w| w[0].0 >= w[1].0) || self.m_segments.windows(2).any(|w| w[0].0 >= w[1].0) {
            out.push("segment starts must increase".to_string());
        }
        if self.a_segments.iter().any(|(_, a)| !(*a >= 0.0)) {
            out.push("a(k) must be nonnegative".to_string());
        }
        if self.m_segments.iter().any(|(_, m)| *m < 1 || *m > n) {
            out.push(format!("M(k) must lie in [1, {n}]"));
        }
        out
    }
}
