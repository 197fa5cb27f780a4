// SPDX-License-Identifier: MIT OR Apache-2.0

//! Left-to-right hidden chain over segment labels: `R_1 = 1`, `R_n = K`,
//! and each step either stays or advances by one. Segmentations and label
//! paths are in one-to-one correspondence.

use serde::{Deserialize, Serialize};

use crate::data::Segmentation;
use crate::error::{Error, Result};
use crate::real::{log_add_exp, Real};

/// Transition probabilities of the chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionScheme {
    /// Every allowed move has weight one, so all segmentations are equally
    /// likely a priori and path scores reduce to the emission sum.
    #[default]
    Uniform,
    /// Probability ½ for each move when both are feasible, 1 when only one
    /// is.
    HalfHalf,
}

/// Shape of the lattice: `n` positions, `k` states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chain {
    pub n: usize,
    pub k: usize,
    pub scheme: TransitionScheme,
}

impl Chain {
    pub fn new(n: usize, k: usize, scheme: TransitionScheme) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Infeasible(format!("cannot place {k} segments on {n} observations")));
        }
        Ok(Chain { n, k, scheme })
    }

    /// Whether state `s` (0-based) is reachable at position `i` (0-based)
    /// and can still reach the final state.
    #[inline]
    pub fn feasible(&self, i: usize, s: usize) -> bool {
        s <= i && self.k - 1 - s <= self.n - 1 - i
    }

    /// Log-probabilities `(stay, advance)` for leaving state `s` at
    /// position `i`; `-∞` marks a disallowed move.
    #[inline]
    pub fn log_moves<T: Real>(&self, i: usize, s: usize) -> (T, T) {
        let stay = self.feasible(i + 1, s);
        let advance = s + 1 < self.k && self.feasible(i + 1, s + 1);
        let ninf = T::neg_infinity();
        match (self.scheme, stay, advance) {
            (_, false, false) => (ninf, ninf),
            (TransitionScheme::HalfHalf, true, true) => (-T::LN_2(), -T::LN_2()),
            (_, s, a) => (if s { T::zero() } else { ninf }, if a { T::zero() } else { ninf }),
        }
    }

    /// Log prior weight of a label path under the transition scheme.
    pub fn log_path_prior<T: Real>(&self, labels: &[usize]) -> T {
        labels
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (stay, adv) = self.log_moves::<T>(i, w[0]);
                if w[1] == w[0] {
                    stay
                } else if w[1] == w[0] + 1 {
                    adv
                } else {
                    T::neg_infinity()
                }
            })
            .sum()
    }
}

/// Forward and backward log-messages, stored `n × k` row-major.
#[derive(Clone, Debug)]
pub struct Lattice<T> {
    pub chain: Chain,
    pub log_f: Vec<T>,
    pub log_b: Vec<T>,
}

impl<T: Real> Lattice<T> {
    #[inline]
    pub fn f(&self, i: usize, s: usize) -> T {
        self.log_f[i * self.chain.k + s]
    }

    #[inline]
    pub fn b(&self, i: usize, s: usize) -> T {
        self.log_b[i * self.chain.k + s]
    }

    /// Row maximum of the forward messages at position `i`.
    pub fn forward_scale(&self, i: usize) -> T {
        row_max(&self.log_f[i * self.chain.k..(i + 1) * self.chain.k])
    }

    /// Row maximum of the backward messages at position `i`.
    pub fn backward_scale(&self, i: usize) -> T {
        row_max(&self.log_b[i * self.chain.k..(i + 1) * self.chain.k])
    }

    /// Log normalizer (sum-product) or best path score (max-product).
    pub fn total(&self) -> T {
        self.f(self.chain.n - 1, self.chain.k - 1)
    }
}

fn row_max<T: Real>(row: &[T]) -> T {
    row.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
}

#[derive(Clone, Copy)]
enum Semiring {
    Sum,
    Max,
}

impl Semiring {
    #[inline]
    fn combine<T: Real>(self, a: T, b: T) -> T {
        match self {
            Semiring::Sum => log_add_exp(a, b),
            Semiring::Max => a.max(b),
        }
    }
}

fn check_table<T>(chain: &Chain, log_e: &[T]) -> Result<()> {
    if log_e.len() != chain.n * chain.k {
        return Err(Error::invalid(format!(
            "emission table has {} entries, expected {} x {}",
            log_e.len(),
            chain.n,
            chain.k
        )));
    }
    Ok(())
}

fn run<T: Real>(chain: Chain, log_e: &[T], semiring: Semiring) -> Result<Lattice<T>> {
    check_table(&chain, log_e)?;
    let (n, k) = (chain.n, chain.k);
    let ninf = T::neg_infinity();
    let mut log_f = vec![ninf; n * k];
    let mut log_b = vec![ninf; n * k];
    log_f[0] = log_e[0];
    for i in 0..n - 1 {
        for s in 0..k {
            let from = log_f[i * k + s];
            if from == ninf {
                continue;
            }
            let (stay, adv) = chain.log_moves::<T>(i, s);
            if stay > ninf {
                let cell = &mut log_f[(i + 1) * k + s];
                *cell = semiring.combine(*cell, from + stay);
            }
            if adv > ninf {
                let cell = &mut log_f[(i + 1) * k + s + 1];
                *cell = semiring.combine(*cell, from + adv);
            }
        }
        for s in 0..k {
            let cell = &mut log_f[(i + 1) * k + s];
            if *cell > ninf {
                *cell += log_e[(i + 1) * k + s];
            }
        }
    }
    log_b[(n - 1) * k + k - 1] = T::zero();
    for i in (0..n - 1).rev() {
        for s in 0..k {
            if !chain.feasible(i, s) {
                continue;
            }
            let (stay, adv) = chain.log_moves::<T>(i, s);
            let mut acc = ninf;
            if stay > ninf {
                acc = semiring.combine(acc, stay + log_e[(i + 1) * k + s] + log_b[(i + 1) * k + s]);
            }
            if adv > ninf {
                acc = semiring.combine(acc, adv + log_e[(i + 1) * k + s + 1] + log_b[(i + 1) * k + s + 1]);
            }
            log_b[i * k + s] = acc;
        }
    }
    Ok(Lattice { chain, log_f, log_b })
}

/// Sum-product recursions in log space. `log_e[i·k + s]` is the log
/// emission of observation `i` under state `s`.
pub fn forward_backward<T: Real>(chain: Chain, log_e: &[T]) -> Result<Lattice<T>> {
    run(chain, log_e, Semiring::Sum)
}

/// Max-product recursions in log space.
pub fn max_forward_backward<T: Real>(chain: Chain, log_e: &[T]) -> Result<Lattice<T>> {
    run(chain, log_e, Semiring::Max)
}

/// Posterior state probabilities `ω_i(s)` from a sum-product lattice,
/// `n × k` row-major.
pub fn posterior_weights<T: Real>(lattice: &Lattice<T>) -> Vec<T> {
    let z = lattice.total();
    lattice
        .log_f
        .iter()
        .zip(&lattice.log_b)
        .map(|(&f, &b)| if f == T::neg_infinity() || b == T::neg_infinity() { T::zero() } else { (f + b - z).exp() })
        .collect()
}

/// Most probable label path from a max-product lattice.
///
/// Each position takes the state maximizing `F + B`, ties going to the
/// smaller state. If the result is not a valid path (possible under
/// floating-point ties), the path is recovered by backtracking instead,
/// preferring to stay on ties.
pub fn map_decode<T: Real>(lattice: &Lattice<T>) -> Segmentation {
    let Chain { n, k, .. } = lattice.chain;
    let labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = (0, T::neg_infinity());
            for s in 0..k {
                let v = lattice.f(i, s) + lattice.b(i, s);
                if v > best.1 {
                    best = (s, v);
                }
            }
            best.0
        })
        .collect();
    if valid_path(&labels, k) {
        return Segmentation::from_labels(&labels).expect("validated path");
    }
    Segmentation::from_labels(&backtrack(lattice)).expect("backtracked path is valid")
}

/// Viterbi backtrack from the final state.
pub fn backtrack<T: Real>(lattice: &Lattice<T>) -> Vec<usize> {
    let chain = lattice.chain;
    let mut labels = vec![0; chain.n];
    let mut s = chain.k - 1;
    labels[chain.n - 1] = s;
    for i in (0..chain.n - 1).rev() {
        if s > 0 {
            let (stay, _) = chain.log_moves::<T>(i, s);
            let (_, adv) = chain.log_moves::<T>(i, s - 1);
            let via_stay = lattice.f(i, s) + stay;
            let via_adv = lattice.f(i, s - 1) + adv;
            if via_adv > via_stay || !chain.feasible(i, s) {
                s -= 1;
            }
        }
        labels[i] = s;
    }
    labels
}

fn valid_path(labels: &[usize], k: usize) -> bool {
    labels.first() == Some(&0)
        && labels.last() == Some(&(k - 1))
        && labels.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1)
}
