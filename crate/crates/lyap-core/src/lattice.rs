//! Lattice geometry: sites of `Z^d`, real directions, finite boxes with an
//! absorbing boundary layer, and the point-preserving isometries (signed
//! coordinate permutations) used by invariance tests.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // test builds resolve f64 math through std instead
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// A point of `Z^d`. Ordering is lexicographic, so sites can key ordered maps.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub coords: Vec<i64>,
}

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        assert!(!coords.is_empty(), "site needs dimension >= 1");
        Site { coords }
    }

    pub fn origin(d: usize) -> Self {
        Site::new(alloc::vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).sum()
    }

    pub fn linf_norm(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Squared Euclidean norm, exact in integer arithmetic.
    pub fn l2_norm_sq(&self) -> i64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    /// The lattice point `k * l` for an integer direction `l`.
    pub fn scaled(ell: &[i64], k: i64) -> Self {
        Site::new(ell.iter().map(|&c| c * k).collect())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", c)?;
        }
        write!(f, ")")
    }
}

/// The `2d` nearest neighbors of `x`, in deterministic order: axis 0 minus,
/// axis 0 plus, axis 1 minus, axis 1 plus, ...
pub fn neighbors(x: &Site) -> Vec<Site> {
    let d = x.dim();
    let mut out = Vec::with_capacity(2 * d);
    for axis in 0..d {
        for sign in [-1i64, 1] {
            let mut c = x.coords.clone();
            c[axis] += sign;
            out.push(Site::new(c));
        }
    }
    out
}

/// A nonzero direction `l` of `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction {
    components: Vec<f64>,
}

impl Direction {
    pub fn new(components: Vec<f64>) -> Result<Self, String> {
        if components.is_empty() {
            return Err(String::from("direction needs dimension >= 1"));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(String::from("direction components must be finite"));
        }
        if components.iter().all(|&c| c == 0.0) {
            return Err(String::from("direction must be nonzero"));
        }
        Ok(Direction { components })
    }

    /// Unit vector `e_axis` in dimension `d`.
    pub fn axis(d: usize, axis: usize) -> Self {
        let mut c = alloc::vec![0.0; d];
        c[axis] = 1.0;
        Direction { components: c }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm_l1(&self) -> f64 {
        self.components.iter().map(|c| c.abs()).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot_self().sqrt()
    }

    pub fn norm_linf(&self) -> f64 {
        self.components.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// `l . l`; by construction `norm_l2()^2` up to one rounding.
    pub fn dot_self(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum()
    }

    pub fn dot_site(&self, x: &Site) -> f64 {
        assert_eq!(self.dim(), x.dim(), "dimension mismatch");
        self.components.iter().zip(&x.coords).map(|(l, &c)| l * c as f64).sum()
    }

    /// Integer coordinates, when every component is an exact integer.
    pub fn as_lattice(&self) -> Option<Vec<i64>> {
        let mut out = Vec::with_capacity(self.dim());
        for &c in &self.components {
            if c.fract() != 0.0 || c.abs() > (1i64 << 52) as f64 {
                return None;
            }
            out.push(c as i64);
        }
        Some(out)
    }

    /// `(axis, c)` when the direction is `c * e_axis` with `c > 0`.
    pub fn positive_axis_multiple(&self) -> Option<(usize, f64)> {
        let mut found = None;
        for (i, &c) in self.components.iter().enumerate() {
            if c != 0.0 {
                if found.is_some() {
                    return None;
                }
                found = Some((i, c));
            }
        }
        found.filter(|&(_, c)| c > 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Direction { components: self.components.iter().map(|c| c * factor).collect() }
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = String;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Vec<f64> {
        d.components
    }
}

/// Boundary handling of a finite box. Only absorbing boundaries exist: the
/// outermost site layer kills the walk (passage and Green values vanish there).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    Absorbing,
}

/// A centered hypercube `{x : |x - center|_inf <= R}` of `(2R+1)^d` sites.
///
/// Sites with `|x - center|_inf = R` form the absorbing boundary layer;
/// strictly inside is "interior". Flat storage is row-major over coordinates
/// offset by `R`: the last axis varies fastest, so index 0 is the corner
/// `center - (R,...,R)` and moving `+1` along the last axis moves `+1` in
/// index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRegion {
    dimension: usize,
    radius: i64,
    center: Site,
    boundary_rule: BoundaryRule,
}

impl BoxRegion {
    pub fn centered(dimension: usize, radius: i64) -> Self {
        BoxRegion::new(dimension, radius, Site::origin(dimension))
    }

    pub fn new(dimension: usize, radius: i64, center: Site) -> Self {
        assert!(dimension >= 1, "box needs dimension >= 1");
        assert!(radius >= 1, "box radius must be >= 1");
        assert_eq!(center.dim(), dimension, "dimension mismatch");
        let side = 2 * radius as u128 + 1;
        let volume = side.checked_pow(dimension as u32).expect("box volume overflow");
        assert!(volume <= usize::MAX as u128, "box volume exceeds addressable memory");
        BoxRegion { dimension, radius, center, boundary_rule: BoundaryRule::Absorbing }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn center(&self) -> &Site {
        &self.center
    }

    pub fn boundary_rule(&self) -> BoundaryRule {
        self.boundary_rule
    }

    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn site_count(&self) -> usize {
        let mut v = 1usize;
        for _ in 0..self.dimension {
            v *= self.side();
        }
        v
    }

    /// Index step caused by `+1` along each axis.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = alloc::vec![1usize; self.dimension];
        for i in (0..self.dimension.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.side();
        }
        s
    }

    pub fn contains(&self, x: &Site) -> bool {
        assert_eq!(x.dim(), self.dimension, "dimension mismatch");
        x.coords
            .iter()
            .zip(&self.center.coords)
            .all(|(&c, &m)| (c - m).abs() <= self.radius)
    }

    /// Strictly inside the absorbing layer.
    pub fn is_interior(&self, x: &Site) -> bool {
        assert_eq!(x.dim(), self.dimension, "dimension mismatch");
        x.coords
            .iter()
            .zip(&self.center.coords)
            .all(|(&c, &m)| (c - m).abs() < self.radius)
    }

    pub fn index_of(&self, x: &Site) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for (&c, &m) in x.coords.iter().zip(&self.center.coords) {
            idx = idx * self.side() + (c - m + self.radius) as usize;
        }
        Some(idx)
    }

    pub fn site_at(&self, mut index: usize) -> Site {
        assert!(index < self.site_count(), "site index out of range");
        let mut coords = alloc::vec![0i64; self.dimension];
        for i in (0..self.dimension).rev() {
            let off = (index % self.side()) as i64;
            coords[i] = self.center.coords[i] + off - self.radius;
            index /= self.side();
        }
        Site::new(coords)
    }

    /// All sites in storage (index) order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.site_count()).map(move |i| self.site_at(i))
    }

    /// `mask[i] = true` iff the site at flat index `i` is interior.
    pub fn interior_mask(&self) -> Vec<bool> {
        let n = self.site_count();
        let side = self.side();
        let mut mask = alloc::vec![true; n];
        // Odometer over offset coordinates in 0..side; boundary = 0 or side-1.
        let mut digits = alloc::vec![0usize; self.dimension];
        for m in mask.iter_mut() {
            if digits.iter().any(|&v| v == 0 || v == side - 1) {
                *m = false;
            }
            for i in (0..self.dimension).rev() {
                digits[i] += 1;
                if digits[i] == side {
                    digits[i] = 0;
                } else {
                    break;
                }
            }
        }
        mask
    }
}

/// An isometry of `Z^d` fixing the origin: a permutation of the axes composed
/// with per-axis sign flips. `apply` sends `x` to `y` with
/// `y[i] = sign[i] * x[perm[i]]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeIsometry {
    perm: Vec<usize>,
    flip: Vec<bool>,
}

impl LatticeIsometry {
    pub fn new(perm: Vec<usize>, flip: Vec<bool>) -> Result<Self, String> {
        let d = perm.len();
        if flip.len() != d {
            return Err(String::from("perm and flip lengths differ"));
        }
        let mut seen = alloc::vec![false; d];
        for &p in &perm {
            if p >= d || seen[p] {
                return Err(String::from("not a permutation"));
            }
            seen[p] = true;
        }
        Ok(LatticeIsometry { perm, flip })
    }

    pub fn identity(d: usize) -> Self {
        LatticeIsometry { perm: (0..d).collect(), flip: alloc::vec![false; d] }
    }

    pub fn swap_axes(d: usize, i: usize, j: usize) -> Self {
        let mut perm: Vec<usize> = (0..d).collect();
        perm.swap(i, j);
        LatticeIsometry { perm, flip: alloc::vec![false; d] }
    }

    pub fn flip_axis(d: usize, i: usize) -> Self {
        let mut flip = alloc::vec![false; d];
        flip[i] = true;
        LatticeIsometry { perm: (0..d).collect(), flip }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn apply(&self, x: &Site) -> Site {
        assert_eq!(x.dim(), self.dim(), "dimension mismatch");
        let coords = self
            .perm
            .iter()
            .zip(&self.flip)
            .map(|(&p, &f)| if f { -x.coords[p] } else { x.coords[p] })
            .collect();
        Site::new(coords)
    }

    pub fn apply_direction(&self, l: &Direction) -> Direction {
        assert_eq!(l.dim(), self.dim(), "dimension mismatch");
        let comps = self
            .perm
            .iter()
            .zip(&self.flip)
            .map(|(&p, &f)| if f { -l.components()[p] } else { l.components()[p] })
            .collect();
        Direction::new(comps).expect("isometry preserves nonzero directions")
    }

    /// `self` after `other`: `(self.compose(other)).apply(x) = self.apply(other.apply(x))`.
    pub fn compose(&self, other: &LatticeIsometry) -> LatticeIsometry {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let d = self.dim();
        let mut perm = alloc::vec![0usize; d];
        let mut flip = alloc::vec![false; d];
        for i in 0..d {
            perm[i] = other.perm[self.perm[i]];
            flip[i] = self.flip[i] ^ other.flip[self.perm[i]];
        }
        LatticeIsometry { perm, flip }
    }

    pub fn inverse(&self) -> LatticeIsometry {
        let d = self.dim();
        let mut perm = alloc::vec![0usize; d];
        let mut flip = alloc::vec![false; d];
        for i in 0..d {
            perm[self.perm[i]] = i;
            flip[self.perm[i]] = self.flip[i];
        }
        LatticeIsometry { perm, flip }
    }

    /// Uniformly random group element from a SplitMix64 stream (for tests).
    pub fn random(d: usize, state: &mut u64) -> Self {
        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = (crate::rng::splitmix64(state) % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let flip = (0..d).map(|_| crate::rng::splitmix64(state) & 1 == 1).collect();
        LatticeIsometry { perm, flip }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn neighbors_d1() {
        let n = neighbors(&Site::new(vec![0]));
        assert_eq!(n, vec![Site::new(vec![-1]), Site::new(vec![1])]);
    }

    #[test]
    fn neighbors_are_at_l1_distance_one() {
        for d in 1..=3 {
            let x = Site::new((0..d as i64).map(|i| i - 1).collect());
            let ns = neighbors(&x);
            assert_eq!(ns.len(), 2 * d);
            for n in &ns {
                let dist: i64 =
                    n.coords.iter().zip(&x.coords).map(|(a, b)| (a - b).abs()).sum();
                assert_eq!(dist, 1);
            }
            // no duplicates
            for i in 0..ns.len() {
                for j in i + 1..ns.len() {
                    assert_ne!(ns[i], ns[j]);
                }
            }
        }
    }

    #[test]
    fn isometry_examples() {
        let x = Site::new(vec![3, -1]);
        assert_eq!(LatticeIsometry::identity(2).apply(&x), x);
        assert_eq!(LatticeIsometry::swap_axes(2, 0, 1).apply(&x), Site::new(vec![-1, 3]));
        assert_eq!(LatticeIsometry::flip_axis(2, 0).apply(&x), Site::new(vec![-3, -1]));
    }

    #[test]
    fn isometry_group_properties() {
        let mut state = 0xabcdu64;
        for d in 1..=4 {
            for _ in 0..20 {
                let f = LatticeIsometry::random(d, &mut state);
                let g = LatticeIsometry::random(d, &mut state);
                let x = Site::new(
                    (0..d).map(|_| (crate::rng::splitmix64(&mut state) % 19) as i64 - 9).collect(),
                );
                // norm preservation, exactly
                assert_eq!(f.apply(&x).l2_norm_sq(), x.l2_norm_sq());
                // composition law and inverse
                assert_eq!(f.compose(&g).apply(&x), f.apply(&g.apply(&x)));
                assert_eq!(f.inverse().apply(&f.apply(&x)), x);
                assert_eq!(f.apply(&Site::origin(d)), Site::origin(d));
            }
        }
    }

    #[test]
    fn box_indexing_roundtrip() {
        let b = BoxRegion::new(2, 3, Site::new(vec![5, -2]));
        assert_eq!(b.site_count(), 49);
        for i in 0..b.site_count() {
            let s = b.site_at(i);
            assert_eq!(b.index_of(&s), Some(i));
        }
        assert_eq!(b.index_of(&Site::new(vec![9, 0])), None);
    }

    #[test]
    fn box_strides_match_axis_steps() {
        let b = BoxRegion::centered(3, 2);
        let st = b.strides();
        let x = Site::new(vec![0, 0, 0]);
        let i0 = b.index_of(&x).unwrap();
        for axis in 0..3 {
            let mut c = x.coords.clone();
            c[axis] += 1;
            assert_eq!(b.index_of(&Site::new(c)).unwrap(), i0 + st[axis]);
        }
    }

    #[test]
    fn interior_mask_counts() {
        let b = BoxRegion::centered(2, 3);
        let mask = b.interior_mask();
        let interior = mask.iter().filter(|&&m| m).count();
        assert_eq!(interior, 5 * 5);
        for (i, m) in mask.iter().enumerate() {
            assert_eq!(*m, b.is_interior(&b.site_at(i)));
        }
    }

    #[test]
    fn direction_norms_consistent() {
        let l = Direction::new(vec![3.0, -4.0]).unwrap();
        assert_eq!(l.norm_l1(), 7.0);
        assert_eq!(l.norm_linf(), 4.0);
        assert!((l.norm_l2() * l.norm_l2() - l.dot_self()).abs() < 1e-12);
        assert_eq!(l.as_lattice(), Some(vec![3, -4]));
        assert!(Direction::new(vec![0.0, 0.0]).is_err());
        assert_eq!(Direction::new(vec![0.0, 2.0]).unwrap().positive_axis_multiple(), Some((1, 2.0)));
        assert_eq!(Direction::new(vec![1.0, 2.0]).unwrap().positive_axis_multiple(), None);
    }
}
