//! Dense linear algebra over ℚ: reduced echelon forms, subspaces,
//! determinants.

use num_traits::{One, Zero};

use crate::error::{Result, SlopeError};
use crate::rational::Q;

pub type Vector = Vec<Q>;
pub type Matrix = Vec<Vec<Q>>;

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![Q::zero(); cols]; rows]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Q::one();
    }
    m
}

/// Reduced row echelon form; returns the non-zero rows and pivot columns.
pub fn rref(rows: &[Vector], ncols: usize) -> (Matrix, Vec<usize>) {
    let mut m: Matrix = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[Vector], ncols: usize) -> usize {
    rref(rows, ncols).1.len()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = zeros(n, m);
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += &a[i][l] * &b[l][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Matrix) -> Matrix {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j].clone()).collect())
        .collect()
}

/// Determinant by Gaussian elimination over ℚ.
pub fn det(a: &Matrix) -> Q {
    let n = a.len();
    let mut m = a.clone();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= &m[c][c];
        let inv = m[c][c].recip();
        for i in c + 1..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] * &inv;
            for j in c..n {
                let t = &f * &m[c][j];
                m[i][j] -= t;
            }
        }
    }
    d
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.len();
    let aug: Matrix = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let (red, piv) = rref(&aug, 2 * n);
    if piv.len() < n || piv[n - 1] >= n {
        return Err(SlopeError::invalid("singular matrix"));
    }
    Ok(red.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Basis of `{x : A x = 0}` for `A` given by rows.
pub fn nullspace(rows: &[Vector], ncols: usize) -> Matrix {
    let (red, piv) = rref(rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); ncols];
            v[f] = Q::one();
            for (r, &p) in red.iter().zip(&piv) {
                v[p] = -r[f].clone();
            }
            v
        })
        .collect()
}

/// A subspace of ℚⁿ in canonical (reduced echelon) form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subspace {
    ambient: usize,
    basis: Matrix,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: identity(ambient),
        }
    }

    pub fn span(ambient: usize, vectors: &[Vector]) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != ambient) {
            return Err(SlopeError::invalid(format!(
                "vector length differs from ambient dimension {ambient}"
            )));
        }
        let (basis, _) = rref(vectors, ambient);
        Ok(Subspace { ambient, basis })
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.basis
            .iter()
            .map(|r| r.iter().position(|x| !x.is_zero()).expect("non-zero rows"))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.ambient
    }

    pub fn contains_vector(&self, v: &Vector) -> bool {
        let mut rows = self.basis.clone();
        rows.push(v.clone());
        rank(&rows, self.ambient) == self.dim()
    }

    pub fn contains(&self, other: &Subspace) -> bool {
        other.basis.iter().all(|v| self.contains_vector(v))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        let (basis, _) = rref(&rows, self.ambient);
        Subspace {
            ambient: self.ambient,
            basis,
        }
    }

    /// `{ f : f(v) = 0 for all v in self }` under the standard pairing.
    pub fn annihilator(&self) -> Subspace {
        let basis = nullspace(&self.basis, self.ambient);
        let (basis, _) = rref(&basis, self.ambient);
        Subspace {
            ambient: self.ambient,
            basis,
        }
    }

    pub fn intersect(&self, other: &Subspace) -> Subspace {
        self.annihilator().sum(&other.annihilator()).annihilator()
    }

    /// Coordinates of `v` with respect to the echelon basis.
    pub fn coordinates(&self, v: &Vector) -> Result<Vector> {
        if !self.contains_vector(v) {
            return Err(SlopeError::invalid("vector not in subspace"));
        }
        Ok(self.pivots().iter().map(|&p| v[p].clone()).collect())
    }

    /// Re-expresses `inner ⊆ self` in the coordinates of `self`'s basis.
    pub fn relative(&self, inner: &Subspace) -> Result<Subspace> {
        let coords = inner
            .basis
            .iter()
            .map(|v| self.coordinates(v))
            .collect::<Result<Vec<_>>>()?;
        Subspace::span(self.dim(), &coords)
    }

    /// Pushes a subspace given in `self`-coordinates back to the ambient space.
    pub fn embed(&self, inner: &Subspace) -> Result<Subspace> {
        if inner.ambient != self.dim() {
            return Err(SlopeError::invalid("embedding dimension mismatch"));
        }
        let rows: Matrix = inner
            .basis
            .iter()
            .map(|c| {
                let mut v = vec![Q::zero(); self.ambient];
                for (coef, b) in c.iter().zip(&self.basis) {
                    if coef.is_zero() {
                        continue;
                    }
                    for (x, y) in v.iter_mut().zip(b) {
                        *x += coef * y;
                    }
                }
                v
            })
            .collect();
        Subspace::span(self.ambient, &rows)
    }

    /// Image under `x ↦ M x` where `M` has `out_dim` rows.
    pub fn image(&self, m: &Matrix, out_dim: usize) -> Result<Subspace> {
        let rows: Matrix = self
            .basis
            .iter()
            .map(|v| {
                (0..out_dim)
                    .map(|i| m[i].iter().zip(v).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        Subspace::span(out_dim, &rows)
    }
}

/// Quotient map `ℚⁿ → ℚⁿ / S` realized as projection onto the non-pivot
/// coordinates after reducing by the echelon basis of `S`.
#[derive(Clone, Debug)]
pub struct QuotientMap {
    pub ambient: usize,
    pub kernel: Subspace,
    free: Vec<usize>,
}

impl QuotientMap {
    pub fn new(kernel: &Subspace) -> Self {
        let piv = kernel.pivots();
        let free = (0..kernel.ambient()).filter(|c| !piv.contains(c)).collect();
        QuotientMap {
            ambient: kernel.ambient(),
            kernel: kernel.clone(),
            free,
        }
    }

    pub fn target_dim(&self) -> usize {
        self.free.len()
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        let mut w = v.clone();
        for (row, p) in self.kernel.basis().iter().zip(self.kernel.pivots()) {
            let f = w[p].clone();
            if f.is_zero() {
                continue;
            }
            for (x, y) in w.iter_mut().zip(row) {
                *x -= &f * y;
            }
        }
        self.free.iter().map(|&c| w[c].clone()).collect()
    }

    pub fn image(&self, s: &Subspace) -> Subspace {
        let rows: Matrix = s.basis().iter().map(|v| self.apply(v)).collect();
        Subspace::span(self.target_dim(), &rows).expect("dimensions agree")
    }

    /// A section: places quotient coordinates on the free columns.
    pub fn lift(&self, v: &Vector) -> Vector {
        let mut w = vec![Q::zero(); self.ambient];
        for (x, &c) in v.iter().zip(&self.free) {
            w[c] = x.clone();
        }
        w
    }

    pub fn preimage(&self, s: &Subspace) -> Subspace {
        let mut rows: Matrix = self.kernel.basis().clone();
        rows.extend(s.basis().iter().map(|v| self.lift(v)));
        Subspace::span(self.ambient, &rows).expect("dimensions agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use proptest::prelude::*;

    fn v(xs: &[i64]) -> Vector {
        xs.iter().map(|&x| q(x)).collect()
    }

    #[test]
    fn det_and_inverse() {
        let m = vec![v(&[2, 1]), v(&[1, 1])];
        assert_eq!(det(&m), q(1));
        let inv = inverse(&m).unwrap();
        assert_eq!(mat_mul(&m, &inv), identity(2));
        assert!(inverse(&vec![v(&[1, 2]), v(&[2, 4])]).is_err());
    }

    #[test]
    fn subspace_lattice_operations() {
        let a = Subspace::span(3, &[v(&[1, 0, 0]), v(&[0, 1, 0])]).unwrap();
        let b = Subspace::span(3, &[v(&[0, 1, 0]), v(&[0, 0, 1])]).unwrap();
        let i = a.intersect(&b);
        assert_eq!(i, Subspace::span(3, &[v(&[0, 1, 0])]).unwrap());
        assert!(a.sum(&b).is_full());
        assert!(a.contains(&i) && b.contains(&i));
    }

    #[test]
    fn quotient_map_roundtrip() {
        let k = Subspace::span(3, &[v(&[1, 1, 0])]).unwrap();
        let qm = QuotientMap::new(&k);
        assert_eq!(qm.target_dim(), 2);
        assert!(qm.apply(&v(&[2, 2, 0])).iter().all(|x| x.is_zero()));
        let line = Subspace::span(2, &[v(&[1, 0])]).unwrap();
        let pre = qm.preimage(&line);
        assert_eq!(pre.dim(), 2);
        assert_eq!(qm.image(&pre), line);
    }

    fn arb_vecs() -> impl Strategy<Value = Vec<Vector>> {
        proptest::collection::vec(proptest::collection::vec(-3i64..4, 3), 0..4)
            .prop_map(|vs| vs.into_iter().map(|x| v(&x)).collect())
    }

    proptest! {
        #[test]
        fn dimension_formula(a in arb_vecs(), b in arb_vecs()) {
            let a = Subspace::span(3, &a).unwrap();
            let b = Subspace::span(3, &b).unwrap();
            prop_assert_eq!(a.dim() + b.dim(), a.sum(&b).dim() + a.intersect(&b).dim());
        }

        #[test]
        fn annihilator_is_involutive(a in arb_vecs()) {
            let a = Subspace::span(3, &a).unwrap();
            prop_assert_eq!(a.annihilator().annihilator(), a.clone());
            prop_assert_eq!(a.annihilator().dim(), 3 - a.dim());
        }
    }
}
