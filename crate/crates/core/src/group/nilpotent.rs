//! Free nilpotent groups of class <= 3 via the collection process.
//!
//! Elements are Mal'cev exponent vectors over the basic-commutator basis.
//! Multiplication expands both factors into unit letters and collects the
//! concatenation back to normal form. Swap rules (bracket convention
//! [a,b] = aba^{-1}b^{-1}, c = [x,y], d1 = [c,x], d2 = [c,y]):
//!
//!   x y     -> y x       c    d1   d2
//!   x y^-1  -> y^-1 x    c^-1 d1^-1
//!   x^-1 y  -> y x^-1    c^-1 d2^-1
//!   x^-1y^-1-> y^-1 x^-1 c
//!
//! Length-3 commutators are central; a bracket [[a_s,a_t],a_k] with k < t is
//! rewritten through the Jacobi identity as [[a_t,a_k],a_s]^-1 [[a_s,a_k],a_t].
//! Letter-by-letter collection is quadratic in the word length, which is fine
//! at desk scale; nothing in the convolution engines multiplies here.

use crate::error::{Error, Result};
use crate::polycyclic::basic_commutators;
use rustc_hash::FxHashMap;

#[derive(Clone, Debug)]
pub struct NilBasis {
    rank: usize,
    class: usize,
    /// slot lengths in basis order
    lengths: Vec<usize>,
    /// letter pair (i, j), i > j -> length-2 slot index (class >= 2)
    comm2: FxHashMap<(usize, usize), usize>,
    /// (length-2 slot, letter) -> central combination (slot, coeff)
    comm3: FxHashMap<(usize, usize), Vec<(usize, i64)>>,
}

impl NilBasis {
    pub fn new(rank: usize, class: usize) -> Result<Self> {
        if rank < 1 {
            return Err(Error::usage("free nilpotent rank must be >= 1"));
        }
        if !(1..=3).contains(&class) {
            return Err(Error::usage(
                "free nilpotent collection is implemented for class <= 3",
            ));
        }
        let bc = basic_commutators(rank, class);
        let lengths: Vec<usize> = bc.iter().map(|b| b.length).collect();
        let mut comm2 = FxHashMap::default();
        let mut by_parts = FxHashMap::default();
        for b in &bc {
            if let Some((l, r)) = b.parts {
                by_parts.insert((l, r), b.order_index);
                if b.length == 2 {
                    comm2.insert((l, r), b.order_index);
                }
            }
        }
        let mut comm3 = FxHashMap::default();
        if class >= 3 {
            for b in &bc {
                if b.length != 2 {
                    continue;
                }
                let (s, t) = b.parts.unwrap();
                for k in 0..rank {
                    let combo = if k >= t {
                        vec![(by_parts[&(b.order_index, k)], 1i64)]
                    } else {
                        // Jacobi: [[a_s,a_t],a_k] = [[a_t,a_k],a_s]^-1 [[a_s,a_k],a_t]
                        let left = by_parts[&(comm2[&(t, k)], s)];
                        let right = by_parts[&(comm2[&(s, k)], t)];
                        vec![(left, -1i64), (right, 1i64)]
                    };
                    comm3.insert((b.order_index, k), combo);
                }
            }
        }
        Ok(NilBasis {
            rank,
            class,
            lengths,
            comm2,
            comm3,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn class(&self) -> usize {
        self.class
    }
    pub fn dim(&self) -> usize {
        self.lengths.len()
    }
    pub fn slot_lengths(&self) -> &[usize] {
        &self.lengths
    }

    fn is_central(&self, slot: usize) -> bool {
        self.lengths[slot] == self.class
    }

    fn expand_units(&self, coords: &[i64], out: &mut Vec<(usize, i64)>, central: &mut Vec<i64>) {
        for (slot, &x) in coords.iter().enumerate() {
            if x == 0 {
                continue;
            }
            if self.is_central(slot) {
                central[slot] += x;
            } else {
                let sign = x.signum();
                for _ in 0..x.unsigned_abs() {
                    out.push((slot, sign));
                }
            }
        }
    }

    fn collect(&self, mut word: Vec<(usize, i64)>, central: &mut Vec<i64>) -> Vec<i64> {
        let mut guard: u64 = 0;
        let mut idx = 0usize;
        while idx + 1 < word.len() {
            guard += 1;
            assert!(guard < 100_000_000, "collection budget exceeded");
            let (s1, e1) = word[idx];
            let (s2, e2) = word[idx + 1];
            if s1 < s2 {
                idx += 1;
                continue;
            }
            if s1 == s2 {
                let merged = e1 + e2;
                word.remove(idx + 1);
                if merged == 0 {
                    word.remove(idx);
                    idx = idx.saturating_sub(1);
                } else {
                    word[idx].1 = merged;
                }
                continue;
            }
            // s1 > s2: swap, inserting the commutator correction after the
            // pair. Central corrections are bilinear in the block exponents;
            // the class-3 letter-letter rule is not, so that case peels off
            // single units first.
            let l1 = self.lengths[s1];
            let l2 = self.lengths[s2];
            if l1 + l2 > self.class {
                word.swap(idx, idx + 1);
            } else if l1 == 2 && l2 == 1 {
                // [c, letter] is central
                word.swap(idx, idx + 1);
                for &(slot, k) in &self.comm3[&(s1, s2)] {
                    central[slot] += e1 * e2 * k;
                }
            } else {
                debug_assert!(l1 == 1 && l2 == 1);
                let c = self.comm2[&(s1, s2)];
                if self.is_central(c) {
                    // class 2: x^p y^q = y^q x^p c^{pq} exactly
                    word.swap(idx, idx + 1);
                    central[c] += e1 * e2;
                } else {
                    // class 3: reduce to unit swaps
                    if e1.abs() > 1 {
                        let s = e1.signum();
                        word[idx].1 = e1 - s;
                        word.insert(idx + 1, (s1, s));
                        idx += 1;
                        continue;
                    }
                    if e2.abs() > 1 {
                        let s = e2.signum();
                        word[idx + 1].1 = s;
                        word.insert(idx + 2, (s2, e2 - s));
                    }
                    let e2 = word[idx + 1].1;
                    word.swap(idx, idx + 1);
                    let (c_exp, d_terms): (i64, &[(usize, i64)]) = match (e1 > 0, e2 > 0) {
                        (true, true) => (1, &[(0, 1), (1, 1)]),
                        (true, false) => (-1, &[(0, -1)]),
                        (false, true) => (-1, &[(1, -1)]),
                        (false, false) => (1, &[]),
                    };
                    word.insert(idx + 2, (c, c_exp));
                    for &(which, coeff) in d_terms {
                        let letter = if which == 0 { s1 } else { s2 };
                        for &(slot, k) in &self.comm3[&(c, letter)] {
                            central[slot] += coeff * k;
                        }
                    }
                }
            }
            idx = idx.saturating_sub(1);
        }
        let mut coords = vec![0i64; self.dim()];
        for (slot, e) in word {
            coords[slot] += e;
        }
        for (slot, &z) in central.iter().enumerate() {
            if z != 0 {
                coords[slot] += z;
            }
        }
        coords
    }

    pub fn multiply(&self, a: &[i64], b: &[i64]) -> Vec<i64> {
        let mut central = vec![0i64; self.dim()];
        let mut word = Vec::new();
        self.expand_units(a, &mut word, &mut central);
        self.expand_units(b, &mut word, &mut central);
        self.collect(word, &mut central)
    }

    pub fn invert(&self, a: &[i64]) -> Vec<i64> {
        let mut central = vec![0i64; self.dim()];
        let mut word = Vec::new();
        let neg: Vec<i64> = a.iter().map(|x| -x).collect();
        self.expand_units(&neg, &mut word, &mut central);
        word.reverse();
        self.collect(word, &mut central)
    }
}
