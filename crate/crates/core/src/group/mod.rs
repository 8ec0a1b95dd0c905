//! Finitely generated groups with canonical integer coordinate forms.
//!
//! Each built-in family stores elements as short integer vectors chosen so
//! that equality and hashing are O(1): free abelian groups use coordinate
//! vectors, unipotent matrix groups use their strictly-upper-triangular
//! entries, the infinite dihedral factor uses the normal form (uv)^k u^f,
//! and free nilpotent groups use Mal'cev exponents over the basic-commutator
//! basis.

mod metric;
mod nilpotent;

pub use metric::{LengthStatus, WordMetric};
pub use nilpotent::NilBasis;

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// A group element in canonical form. The coordinate layout is owned by the
/// descriptor that produced it; mixing descriptors is a usage error.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Elem(pub(crate) Vec<i64>);

impl Elem {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }
    pub fn from_coords(coords: Vec<i64>) -> Self {
        Elem(coords)
    }
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{:?}", self.0)
    }
}

#[derive(Clone, Debug)]
pub enum GroupKind {
    /// Z^d with standard generators ±e_i.
    FreeAbelian(usize),
    /// Discrete Heisenberg group, coordinates (x, y, z) for
    /// [[1,x,z],[0,1,y],[0,0,1]].
    Heisenberg,
    /// 4x4 upper unitriangular integer matrices, coordinates
    /// (a12, a13, a14, a23, a24, a34).
    Unipotent4,
    /// D_inf x Z with D_inf = <u, v | u^2 = v^2 = e>, coordinates
    /// (k, f, z) for the normal form (uv)^k u^f z^z.
    DihedralTimesZ,
    /// Free nilpotent group of given rank and class (class <= 3),
    /// coordinates over the basic-commutator Mal'cev basis.
    FreeNilpotent(Arc<NilBasis>),
}

/// A finitely generated group: identity, product, inverse, canonical forms,
/// and a fixed symmetric generating tuple.
#[derive(Clone, Debug)]
pub struct GroupDescriptor {
    kind: GroupKind,
    name: String,
    generators: Vec<Elem>,
    known_growth_degree: Option<u32>,
    nilpotent: bool,
    dim: usize,
}

impl GroupDescriptor {
    pub fn free_abelian(d: usize) -> Self {
        assert!(d >= 1, "Z^d needs d >= 1");
        let mut gens = Vec::with_capacity(2 * d);
        for i in 0..d {
            for sign in [1i64, -1] {
                let mut c = vec![0i64; d];
                c[i] = sign;
                gens.push(Elem(c));
            }
        }
        GroupDescriptor {
            kind: GroupKind::FreeAbelian(d),
            name: format!("Z^{d}"),
            generators: gens,
            known_growth_degree: Some(d as u32),
            nilpotent: true,
            dim: d,
        }
    }

    pub fn heisenberg() -> Self {
        let a = Elem(vec![1, 0, 0]);
        let b = Elem(vec![0, 1, 0]);
        let ai = Elem(vec![-1, 0, 0]);
        let bi = Elem(vec![0, -1, 0]);
        GroupDescriptor {
            kind: GroupKind::Heisenberg,
            name: "heisenberg3".into(),
            generators: vec![a, ai, b, bi],
            known_growth_degree: Some(4),
            nilpotent: true,
            dim: 3,
        }
    }

    pub fn unipotent4() -> Self {
        // superdiagonal generators M12, M23, M34 and inverses
        let gens = vec![
            Elem(vec![1, 0, 0, 0, 0, 0]),
            Elem(vec![-1, 0, 0, 0, 0, 0]),
            Elem(vec![0, 0, 0, 1, 0, 0]),
            Elem(vec![0, 0, 0, -1, 0, 0]),
            Elem(vec![0, 0, 0, 0, 0, 1]),
            Elem(vec![0, 0, 0, 0, 0, -1]),
        ];
        GroupDescriptor {
            kind: GroupKind::Unipotent4,
            name: "unipotent4".into(),
            generators: gens,
            known_growth_degree: Some(10),
            nilpotent: true,
            dim: 6,
        }
    }

    pub fn dihedral_times_z() -> Self {
        let u = Elem(vec![0, 1, 0]);
        let v = Elem(vec![-1, 1, 0]);
        let z = Elem(vec![0, 0, 1]);
        let zi = Elem(vec![0, 0, -1]);
        GroupDescriptor {
            kind: GroupKind::DihedralTimesZ,
            name: "dihedralxZ".into(),
            generators: vec![u, v, z, zi],
            known_growth_degree: Some(2),
            nilpotent: false,
            dim: 3,
        }
    }

    pub fn free_nilpotent(rank: usize, class: usize) -> Result<Self> {
        let basis = NilBasis::new(rank, class)?;
        let dim = basis.dim();
        let mut gens = Vec::with_capacity(2 * rank);
        for i in 0..rank {
            for sign in [1i64, -1] {
                let mut c = vec![0i64; dim];
                c[i] = sign;
                gens.push(Elem(c));
            }
        }
        // homogeneous growth degree: sum over basis slots of their length
        let degree: u32 = basis.slot_lengths().iter().map(|&l| l as u32).sum();
        Ok(GroupDescriptor {
            kind: GroupKind::FreeNilpotent(Arc::new(basis)),
            name: format!("free_nilpotent({rank},{class})"),
            generators: gens,
            known_growth_degree: Some(degree),
            nilpotent: true,
            dim,
        })
    }

    /// Resolve a group by its config-file name, e.g. "Z^2", "heisenberg3",
    /// "unipotent4", "dihedralxZ", "free_nilpotent(2,3)".
    pub fn by_name(name: &str) -> Result<Self> {
        let name = name.trim();
        if let Some(rest) = name.strip_prefix("Z^") {
            let d: usize = rest
                .parse()
                .map_err(|_| Error::usage(format!("bad dimension in group name {name:?}")))?;
            if d == 0 {
                return Err(Error::usage("Z^d needs d >= 1"));
            }
            return Ok(Self::free_abelian(d));
        }
        match name {
            "Z" => Ok(Self::free_abelian(1)),
            "heisenberg3" => Ok(Self::heisenberg()),
            "unipotent4" => Ok(Self::unipotent4()),
            "dihedralxZ" => Ok(Self::dihedral_times_z()),
            _ => {
                if let Some(args) = name
                    .strip_prefix("free_nilpotent(")
                    .and_then(|s| s.strip_suffix(')'))
                {
                    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
                    if parts.len() != 2 {
                        return Err(Error::usage(format!(
                            "free_nilpotent wants (rank,class), got {name:?}"
                        )));
                    }
                    let m: usize = parts[0]
                        .parse()
                        .map_err(|_| Error::usage("bad rank in free_nilpotent"))?;
                    let c: usize = parts[1]
                        .parse()
                        .map_err(|_| Error::usage("bad class in free_nilpotent"))?;
                    return Self::free_nilpotent(m, c);
                }
                Err(Error::usage(format!("unknown group name {name:?}")))
            }
        }
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn generators(&self) -> &[Elem] {
        &self.generators
    }
    pub fn known_growth_degree(&self) -> Option<u32> {
        self.known_growth_degree
    }
    pub fn is_nilpotent(&self) -> bool {
        self.nilpotent
    }
    pub fn coord_dim(&self) -> usize {
        self.dim
    }

    pub fn identity(&self) -> Elem {
        Elem(vec![0; self.dim])
    }

    /// Resolves a generator or basis element by its config-file name.
    /// Prefix a name with "inv:" for the inverse; "e" is the identity.
    pub fn element_by_name(&self, name: &str) -> Result<Elem> {
        let name = name.trim();
        if let Some(rest) = name.strip_prefix("inv:") {
            let e = self.element_by_name(rest)?;
            return self.invert(&e);
        }
        if name == "e" {
            return Ok(self.identity());
        }
        let mk = |i: usize| {
            let mut c = vec![0i64; self.dim];
            c[i] = 1;
            Elem(c)
        };
        let found = match &self.kind {
            GroupKind::FreeAbelian(d) => {
                let d = *d;
                name.strip_prefix('e')
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|i| (1..=d).contains(i))
                    .map(|i| mk(i - 1))
            }
            GroupKind::Heisenberg => match name {
                "a" => Some(mk(0)),
                "b" => Some(mk(1)),
                "c" => Some(mk(2)),
                _ => None,
            },
            GroupKind::Unipotent4 => match name {
                // coords (a12, a13, a14, a23, a24, a34)
                "M12" => Some(mk(0)),
                "M13" => Some(mk(1)),
                "M14" => Some(mk(2)),
                "M23" => Some(mk(3)),
                "M24" => Some(mk(4)),
                "M34" => Some(mk(5)),
                _ => None,
            },
            GroupKind::DihedralTimesZ => match name {
                "u" => Some(Elem(vec![0, 1, 0])),
                "v" => Some(Elem(vec![-1, 1, 0])),
                "t" | "uv" => Some(Elem(vec![1, 0, 0])),
                "z" => Some(Elem(vec![0, 0, 1])),
                _ => None,
            },
            GroupKind::FreeNilpotent(nb) => name
                .strip_prefix('x')
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|i| (1..=nb.rank()).contains(i))
                .map(|i| mk(i - 1)),
        };
        found.ok_or_else(|| {
            Error::usage(format!("unknown element name {name:?} in {}", self.name))
        })
    }

    pub fn is_identity(&self, g: &Elem) -> bool {
        g.0.iter().all(|&c| c == 0)
    }

    fn check(&self, g: &Elem) -> Result<()> {
        if g.0.len() != self.dim {
            return Err(Error::usage(format!(
                "element with {} coordinates does not belong to {} (dim {})",
                g.0.len(),
                self.name,
                self.dim
            )));
        }
        if matches!(self.kind, GroupKind::DihedralTimesZ) && !(g.0[1] == 0 || g.0[1] == 1) {
            return Err(Error::usage("dihedral flag coordinate must be 0 or 1"));
        }
        Ok(())
    }

    /// Canonical form of the group product gh.
    pub fn multiply(&self, g: &Elem, h: &Elem) -> Result<Elem> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul_unchecked(g, h))
    }

    pub(crate) fn mul_unchecked(&self, g: &Elem, h: &Elem) -> Elem {
        let a = &g.0;
        let b = &h.0;
        match &self.kind {
            GroupKind::FreeAbelian(_) => {
                Elem(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            GroupKind::Heisenberg => {
                Elem(vec![a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]])
            }
            GroupKind::Unipotent4 => {
                // coords (a12, a13, a14, a23, a24, a34)
                let (a12, a13, a14, a23, a24, a34) = (a[0], a[1], a[2], a[3], a[4], a[5]);
                let (b12, b13, b14, b23, b24, b34) = (b[0], b[1], b[2], b[3], b[4], b[5]);
                Elem(vec![
                    a12 + b12,
                    a13 + b13 + a12 * b23,
                    a14 + b14 + a12 * b24 + a13 * b34,
                    a23 + b23,
                    a24 + b24 + a23 * b34,
                    a34 + b34,
                ])
            }
            GroupKind::DihedralTimesZ => {
                let (k, f, z) = (a[0], a[1], a[2]);
                let (k2, f2, z2) = (b[0], b[1], b[2]);
                let kk = if f == 0 { k + k2 } else { k - k2 };
                Elem(vec![kk, f ^ f2, z + z2])
            }
            GroupKind::FreeNilpotent(basis) => Elem(basis.multiply(a, b)),
        }
    }

    /// Canonical form of g^{-1}.
    pub fn invert(&self, g: &Elem) -> Result<Elem> {
        self.check(g)?;
        Ok(self.inv_unchecked(g))
    }

    pub(crate) fn inv_unchecked(&self, g: &Elem) -> Elem {
        let a = &g.0;
        match &self.kind {
            GroupKind::FreeAbelian(_) => Elem(a.iter().map(|x| -x).collect()),
            GroupKind::Heisenberg => Elem(vec![-a[0], -a[1], -a[2] + a[0] * a[1]]),
            GroupKind::Unipotent4 => {
                let (a12, a13, a14, a23, a24, a34) = (a[0], a[1], a[2], a[3], a[4], a[5]);
                Elem(vec![
                    -a12,
                    -a13 + a12 * a23,
                    -a14 + a12 * a24 + a13 * a34 - a12 * a23 * a34,
                    -a23,
                    -a24 + a23 * a34,
                    -a34,
                ])
            }
            GroupKind::DihedralTimesZ => {
                let (k, f, z) = (a[0], a[1], a[2]);
                if f == 0 {
                    Elem(vec![-k, 0, -z])
                } else {
                    Elem(vec![k, 1, -z])
                }
            }
            GroupKind::FreeNilpotent(basis) => Elem(basis.invert(a)),
        }
    }

    /// g^n by square-and-multiply.
    pub fn pow(&self, g: &Elem, n: i64) -> Result<Elem> {
        self.check(g)?;
        let mut base = if n < 0 {
            self.inv_unchecked(g)
        } else {
            g.clone()
        };
        let mut e = n.unsigned_abs();
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_unchecked(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul_unchecked(&base, &base);
            }
        }
        Ok(acc)
    }

    /// Commutator [g, h] = g h g^{-1} h^{-1}.
    pub fn commutator(&self, g: &Elem, h: &Elem) -> Result<Elem> {
        let gi = self.invert(g)?;
        let hi = self.invert(h)?;
        let gh = self.mul_unchecked(g, h);
        let ghgi = self.mul_unchecked(&gh, &gi);
        Ok(self.mul_unchecked(&ghgi, &hi))
    }

    /// Cheap lower bound on the word length |g|, used by pruning
    /// certificates. Exact on Z^d and D_inf x Z; for matrix groups it
    /// combines the abelianization with the commutator-area bound
    /// |z| <= |g|^2 / 2.
    pub fn length_lower_bound(&self, g: &Elem) -> u64 {
        let a = &g.0;
        match &self.kind {
            GroupKind::FreeAbelian(_) => a.iter().map(|x| x.unsigned_abs()).sum(),
            GroupKind::Heisenberg => {
                let ab = a[0].unsigned_abs() + a[1].unsigned_abs();
                let z = a[2].unsigned_abs();
                ab.max(isqrt(2 * z))
            }
            GroupKind::Unipotent4 => {
                let lvl1 = a[0].unsigned_abs() + a[3].unsigned_abs() + a[5].unsigned_abs();
                let lvl2 = a[1].unsigned_abs().max(a[4].unsigned_abs());
                let lvl3 = a[2].unsigned_abs();
                lvl1.max(isqrt(2 * lvl2)).max(icbrt(6 * lvl3))
            }
            GroupKind::DihedralTimesZ => {
                let (k, f, z) = (a[0], a[1], a[2]);
                let dl = if f == 0 {
                    2 * k.unsigned_abs()
                } else if k >= 0 {
                    2 * k.unsigned_abs() + 1
                } else {
                    2 * k.unsigned_abs() - 1
                };
                dl + z.unsigned_abs()
            }
            GroupKind::FreeNilpotent(basis) => {
                let lengths = basis.slot_lengths();
                let mut best = 0u64;
                for (i, &x) in a.iter().enumerate() {
                    let v = x.unsigned_abs();
                    let lb = match lengths[i] {
                        1 => v,
                        2 => isqrt(2 * v),
                        _ => icbrt(6 * v),
                    };
                    best = best.max(lb);
                }
                best
            }
        }
    }
}

fn isqrt(v: u64) -> u64 {
    if v == 0 {
        return 0;
    }
    let mut r = (v as f64).sqrt() as u64;
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    while r * r > v {
        r -= 1;
    }
    r
}

fn icbrt(v: u64) -> u64 {
    if v == 0 {
        return 0;
    }
    let mut r = (v as f64).cbrt() as u64;
    while (r + 1).pow(3) <= v {
        r += 1;
    }
    while r.pow(3) > v {
        r -= 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z2_componentwise() {
        let g = GroupDescriptor::free_abelian(2);
        let a = Elem(vec![1, 2]);
        let b = Elem(vec![3, -1]);
        assert_eq!(g.multiply(&a, &b).unwrap(), Elem(vec![4, 1]));
        assert_eq!(g.multiply(&a, &g.identity()).unwrap(), a);
    }

    #[test]
    fn mixed_descriptor_rejected() {
        let g = GroupDescriptor::free_abelian(2);
        let bad = Elem(vec![1, 2, 3]);
        assert!(matches!(
            g.multiply(&bad, &g.identity()),
            Err(Error::Usage(_))
        ));
    }

    // Oracle: 3x3 unitriangular integer matrices.
    fn mat3_mul(a: [[i64; 3]; 3], b: [[i64; 3]; 3]) -> [[i64; 3]; 3] {
        let mut r = [[0i64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    r[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        r
    }

    fn heis_to_mat(e: &Elem) -> [[i64; 3]; 3] {
        let c = e.coords();
        [[1, c[0], c[2]], [0, 1, c[1]], [0, 0, 1]]
    }

    #[test]
    fn heisenberg_matches_matrix_oracle() {
        let g = GroupDescriptor::heisenberg();
        let a = &g.generators()[0];
        let b = &g.generators()[2];
        let ab = g.multiply(a, b).unwrap();
        let ba = g.multiply(b, a).unwrap();
        assert_ne!(ab, ba);
        let comm = g.commutator(a, b).unwrap();
        assert_eq!(comm, Elem(vec![0, 0, 1]));
        assert!(!g.is_identity(&comm));
        // central: commutes with both generators
        assert_eq!(
            g.multiply(&comm, a).unwrap(),
            g.multiply(a, &comm).unwrap()
        );

        // random products agree with the matrix oracle
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 11) as i64 - 5
        };
        for _ in 0..200 {
            let x = Elem(vec![next(), next(), next()]);
            let y = Elem(vec![next(), next(), next()]);
            let prod = g.multiply(&x, &y).unwrap();
            let oracle = mat3_mul(heis_to_mat(&x), heis_to_mat(&y));
            assert_eq!(heis_to_mat(&prod), oracle);
            let inv = g.invert(&x).unwrap();
            assert!(g.is_identity(&g.multiply(&x, &inv).unwrap()));
            assert_eq!(g.invert(&inv).unwrap(), x);
        }
    }

    #[test]
    fn unipotent4_inverse_and_associativity() {
        let g = GroupDescriptor::unipotent4();
        let mut state = 0xdeadbeefcafef00du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 13) as i64 - 6
        };
        for _ in 0..200 {
            let x = Elem((0..6).map(|_| next()).collect());
            let y = Elem((0..6).map(|_| next()).collect());
            let z = Elem((0..6).map(|_| next()).collect());
            let xy_z = g
                .multiply(&g.multiply(&x, &y).unwrap(), &z)
                .unwrap();
            let x_yz = g
                .multiply(&x, &g.multiply(&y, &z).unwrap())
                .unwrap();
            assert_eq!(xy_z, x_yz);
            let inv = g.invert(&x).unwrap();
            assert!(g.is_identity(&g.multiply(&x, &inv).unwrap()));
            assert!(g.is_identity(&g.multiply(&inv, &x).unwrap()));
        }
    }

    #[test]
    fn dihedral_relations() {
        let g = GroupDescriptor::dihedral_times_z();
        let u = &g.generators()[0];
        let v = &g.generators()[1];
        assert!(g.is_identity(&g.multiply(u, u).unwrap()));
        assert!(g.is_identity(&g.multiply(v, v).unwrap()));
        let t = g.multiply(u, v).unwrap();
        assert_eq!(t, Elem(vec![1, 0, 0]));
        // paper identity for involutions: [t^n, u] = t^{2n}
        for n in [-3i64, 1, 2, 5] {
            let tn = g.pow(&t, n).unwrap();
            let comm = g.commutator(&tn, u).unwrap();
            assert_eq!(comm, g.pow(&t, 2 * n).unwrap());
        }
    }

    #[test]
    fn group_names_resolve() {
        for name in ["Z^1", "Z^3", "heisenberg3", "unipotent4", "dihedralxZ"] {
            assert!(GroupDescriptor::by_name(name).is_ok(), "{name}");
        }
        assert!(GroupDescriptor::by_name("free_nilpotent(2,2)").is_ok());
        assert!(GroupDescriptor::by_name("so3").is_err());
    }

    #[test]
    fn integer_roots() {
        assert_eq!(isqrt(0), 0);
        assert_eq!(isqrt(15), 3);
        assert_eq!(isqrt(16), 4);
        assert_eq!(icbrt(26), 2);
        assert_eq!(icbrt(27), 3);
    }
}
