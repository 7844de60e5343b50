//! Exhaustive grid oracle for the "fairness maximiser minimises makespan"
//! properties. Exact when run with [`crate::Rational`].

use crate::error::{CoreError, Result};
use crate::fairness::{makespan, pbf, vbf};
use crate::load::LoadVector;
use crate::scalar::Scalar;

/// Upper bound on enumerated allocations.
pub const MAX_GRID_POINTS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridObjective {
    Vbf,
    Pbf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult<T> {
    /// Allocations attaining the maximum of the fairness objective.
    pub fairness_argmax: Vec<Vec<T>>,
    /// Allocations attaining the minimum makespan.
    pub makespan_argmin: Vec<Vec<T>>,
    pub points: u128,
}

impl<T: Scalar> BruteForceResult<T> {
    /// Every fairness maximiser is also a makespan minimiser.
    pub fn argmax_within_argmin(&self) -> bool {
        self.fairness_argmax
            .iter()
            .all(|a| self.makespan_argmin.contains(a))
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of ways to split `units` identical units over `n` servers.
pub fn grid_points(units: u64, n: usize) -> u128 {
    if n == 0 {
        return 0;
    }
    binomial(u128::from(units) + n as u128 - 1, n as u128 - 1)
}

fn for_each_composition(units: u64, n: usize, f: &mut impl FnMut(&[u64])) {
    fn rec(rem: u64, slot: usize, buf: &mut Vec<u64>, f: &mut impl FnMut(&[u64])) {
        if slot + 1 == buf.len() {
            buf[slot] = rem;
            f(buf);
            return;
        }
        for k in 0..=rem {
            buf[slot] = k;
            rec(rem - k, slot + 1, buf, f);
        }
    }
    let mut buf = vec![0; n];
    rec(units, 0, &mut buf, f);
}

fn push_extremum<T: Scalar>(best: &mut Option<T>, set: &mut Vec<Vec<T>>, value: T, alloc: &[T], maximize: bool) {
    let better = match *best {
        None => true,
        Some(b) => {
            if maximize {
                value > b
            } else {
                value < b
            }
        }
    };
    if better {
        *best = Some(value);
        set.clear();
        set.push(alloc.to_vec());
    } else if Some(value) == *best {
        set.push(alloc.to_vec());
    }
}

/// Enumerates every allocation of `total` over `n` servers in multiples of
/// `step` and returns the fairness-argmax and makespan-argmin sets.
pub fn argmax_fairness_bruteforce<T: Scalar>(
    total: T,
    n: usize,
    step: T,
    objective: GridObjective,
) -> Result<BruteForceResult<T>> {
    if n == 0 {
        return Err(CoreError::Empty);
    }
    if !(step > T::zero()) || total < T::zero() {
        return Err(CoreError::InvalidValue("need step > 0 and total >= 0".into()));
    }
    let ratio = total / step;
    let units = ratio
        .to_u64()
        .filter(|&u| T::from_u64(u).map(|x| x * step) == Some(total))
        .ok_or_else(|| CoreError::InvalidValue("grid step must divide total".into()))?;
    let points = grid_points(units, n);
    if points > MAX_GRID_POINTS {
        return Err(CoreError::TooLarge {
            points,
            limit: MAX_GRID_POINTS,
        });
    }
    let mut fair_best = None;
    let mut fair_set = Vec::new();
    let mut ms_best = None;
    let mut ms_set = Vec::new();
    let mut alloc = vec![T::zero(); n];
    for_each_composition(units, n, &mut |c| {
        for (a, &k) in alloc.iter_mut().zip(c) {
            *a = T::from_u64(k).expect("units representable") * step;
        }
        let l = LoadVector::new(alloc.clone()).expect("grid allocation is a valid load");
        let f = match objective {
            GridObjective::Vbf => vbf(&l),
            GridObjective::Pbf => pbf(&l),
        };
        push_extremum(&mut fair_best, &mut fair_set, f, &alloc, true);
        let ms = makespan(&l).expect("nonempty");
        push_extremum(&mut ms_best, &mut ms_set, ms, &alloc, false);
    });
    Ok(BruteForceResult {
        fairness_argmax: fair_set,
        makespan_argmin: ms_set,
        points,
    })
}
