//! Mal'cev bases, basic commutators, normal forms and the coordinate maps
//! used by coordinate-wise measures.

use crate::error::{Error, Result};
use crate::group::{Elem, GroupDescriptor, GroupKind};

/// A basic commutator: a formal bracket over the alphabet x_1..x_m, indexed
/// into the inductively ordered sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicCommutator {
    /// Bracket length (number of letters in the fully expanded tree).
    pub length: usize,
    /// Position in the inductive order (0-based).
    pub order_index: usize,
    /// For length 1: the letter index. Otherwise None.
    pub letter: Option<usize>,
    /// For length >= 2: order indices of the left/right subtrees.
    pub parts: Option<(usize, usize)>,
}

impl BasicCommutator {
    /// Render as "x1", "[x2,x1]", "[[x3,x2],x3]", 1-based letters.
    pub fn display(&self, all: &[BasicCommutator]) -> String {
        match (self.letter, self.parts) {
            (Some(i), _) => format!("x{}", i + 1),
            (None, Some((l, r))) => format!(
                "[{},{}]",
                all[l].display(all),
                all[r].display(all)
            ),
            _ => unreachable!(),
        }
    }
}

/// All basic commutators of length <= c over m letters, in the inductive
/// order. Commutators of equal length are ordered lexicographically by
/// (left subtree index, right subtree index), which fixes the orderings the
/// construction leaves free. Increasing c only appends.
pub fn basic_commutators(m: usize, c: usize) -> Vec<BasicCommutator> {
    assert!(m >= 1 && c >= 1);
    let mut out: Vec<BasicCommutator> = (0..m)
        .map(|i| BasicCommutator {
            length: 1,
            order_index: i,
            letter: Some(i),
            parts: None,
        })
        .collect();
    for len in 2..=c {
        let mut level: Vec<(usize, usize)> = Vec::new();
        for i in 0..out.len() {
            for j in 0..out.len() {
                if out[i].length + out[j].length != len {
                    continue;
                }
                // b_i > b_j
                if i <= j {
                    continue;
                }
                // if b_i = [b_s, b_t] then b_j >= b_t
                if let Some((_, t)) = out[i].parts {
                    if j < t {
                        continue;
                    }
                }
                level.push((i, j));
            }
        }
        level.sort();
        for (i, j) in level {
            let idx = out.len();
            out.push(BasicCommutator {
                length: len,
                order_index: idx,
                letter: None,
                parts: Some((i, j)),
            });
        }
    }
    out
}

/// An ordered Mal'cev basis for one of the built-in groups, together with
/// the commutator table needed for weight propagation.
#[derive(Clone, Debug)]
pub struct MalcevBasis {
    descriptor: GroupDescriptor,
    basis: Vec<Elem>,
    /// commutator_table[(i, j)] = Mal'cev coordinates of [u_i, u_j], i < j.
    commutator_table: Vec<((usize, usize), Vec<i64>)>,
    adapted: bool,
    labels: Vec<String>,
}

impl MalcevBasis {
    /// The canonical adapted basis for a built-in group.
    pub fn for_group(descriptor: &GroupDescriptor) -> Result<MalcevBasis> {
        let d = descriptor.clone();
        let (basis, labels): (Vec<Elem>, Vec<String>) = match d.kind() {
            GroupKind::FreeAbelian(n) => {
                let n = *n;
                (
                    (0..n)
                        .map(|i| {
                            let mut c = vec![0i64; n];
                            c[i] = 1;
                            Elem::from_coords(c)
                        })
                        .collect(),
                    (0..n).map(|i| format!("e{}", i + 1)).collect(),
                )
            }
            GroupKind::Heisenberg => (
                vec![
                    Elem::from_coords(vec![1, 0, 0]),
                    Elem::from_coords(vec![0, 1, 0]),
                    Elem::from_coords(vec![0, 0, 1]),
                ],
                vec!["a".into(), "b".into(), "c".into()],
            ),
            GroupKind::Unipotent4 => {
                // (M14, M24, M34, M13, M23, M12): the matrix coordinate order
                let mk = |i: usize| {
                    let mut c = vec![0i64; 6];
                    c[i] = 1;
                    Elem::from_coords(c)
                };
                // coords are (a12, a13, a14, a23, a24, a34)
                (
                    vec![mk(2), mk(4), mk(5), mk(1), mk(3), mk(0)],
                    vec![
                        "M14".into(),
                        "M24".into(),
                        "M34".into(),
                        "M13".into(),
                        "M23".into(),
                        "M12".into(),
                    ],
                )
            }
            GroupKind::DihedralTimesZ => {
                // Mal'cev basis of the nilpotent subgroup N = <uv> x Z.
                (
                    vec![
                        Elem::from_coords(vec![1, 0, 0]),
                        Elem::from_coords(vec![0, 0, 1]),
                    ],
                    vec!["uv".into(), "z".into()],
                )
            }
            GroupKind::FreeNilpotent(nb) => {
                let dim = nb.dim();
                let bc = basic_commutators(nb.rank(), nb.class());
                (
                    (0..dim)
                        .map(|i| {
                            let mut c = vec![0i64; dim];
                            c[i] = 1;
                            Elem::from_coords(c)
                        })
                        .collect(),
                    bc.iter().map(|b| b.display(&bc)).collect(),
                )
            }
        };
        let mut table = Vec::new();
        for i in 0..basis.len() {
            for j in (i + 1)..basis.len() {
                let comm = d.commutator(&basis[i], &basis[j])?;
                if !d.is_identity(&comm) {
                    let coords = malcev_coordinates_impl(&d, &comm)?;
                    table.push(((i, j), coords));
                }
            }
        }
        Ok(MalcevBasis {
            descriptor: d,
            basis,
            commutator_table: table,
            adapted: true,
            labels,
        })
    }

    pub fn descriptor(&self) -> &GroupDescriptor {
        &self.descriptor
    }
    pub fn basis(&self) -> &[Elem] {
        &self.basis
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn len(&self) -> usize {
        self.basis.len()
    }
    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
    pub fn is_adapted(&self) -> bool {
        self.adapted
    }
    pub fn commutator_table(&self) -> &[((usize, usize), Vec<i64>)] {
        &self.commutator_table
    }

    /// The unique exponent vector with g = u_1^{x_1} ... u_n^{x_n}.
    pub fn coordinates(&self, g: &Elem) -> Result<Vec<i64>> {
        malcev_coordinates_impl(&self.descriptor, g)
    }

    /// Inverse of `coordinates`: compose u_1^{x_1} ... u_n^{x_n}.
    pub fn compose(&self, coords: &[i64]) -> Result<Elem> {
        if coords.len() != self.basis.len() {
            return Err(Error::usage("coordinate vector length mismatch"));
        }
        pi_s(&self.descriptor, coords, &self.basis)
    }
}

/// Mal'cev coordinates with respect to the canonical basis order of each
/// built-in group.
fn malcev_coordinates_impl(d: &GroupDescriptor, g: &Elem) -> Result<Vec<i64>> {
    let c = g.coords();
    Ok(match d.kind() {
        GroupKind::FreeAbelian(_) => c.to_vec(),
        // g = a^x b^y c^w has matrix coords (x, y, w + x*y)
        GroupKind::Heisenberg => vec![c[0], c[1], c[2] - c[0] * c[1]],
        GroupKind::Unipotent4 => {
            // basis (M14, M24, M34, M13, M23, M12) gives the matrix
            // coordinate system: exponents are the matrix entries.
            vec![c[2], c[4], c[5], c[1], c[3], c[0]]
        }
        GroupKind::DihedralTimesZ => {
            if c[1] != 0 {
                return Err(Error::domain(
                    "element is outside the nilpotent subgroup spanned by the basis",
                ));
            }
            vec![c[0], c[2]]
        }
        GroupKind::FreeNilpotent(_) => c.to_vec(),
    })
}

/// pi_S(a) = s_1^{a_1} ... s_k^{a_k} in canonical form.
pub fn pi_s(d: &GroupDescriptor, exponents: &[i64], tuple: &[Elem]) -> Result<Elem> {
    if exponents.len() != tuple.len() {
        return Err(Error::usage(format!(
            "pi_S: got {} exponents for a {}-tuple",
            exponents.len(),
            tuple.len()
        )));
    }
    let mut acc = d.identity();
    for (&a, s) in exponents.iter().zip(tuple) {
        if a == 0 {
            continue;
        }
        let p = d.pow(s, a)?;
        acc = d.multiply(&acc, &p)?;
    }
    Ok(acc)
}
