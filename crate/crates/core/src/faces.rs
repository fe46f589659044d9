//! Open faces of the hypercube and grid checkers for polynomial boundedness.
//!
//! The face `F_{A,S,B}` holds the points with `p_i = 0` on `A`, `p_i = 1` on
//! `B` and `0 < p_i < 1` on `S`. Grid verdicts are evidence, not proofs.

use std::fmt;

use num::{BigRational, One, Signed, Zero};
use serde_json::{json, Value};

use crate::domain::AffineCubeDomain;
use crate::error::{FactoryError, Result};
use crate::rational::{fmt_rational, pow, Point};
use crate::target::TargetFunction;

/// A partition of the (0-based) coordinates into `A`, `S`, `B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FacePartition {
    n: usize,
    a: Vec<usize>,
    s: Vec<usize>,
    b: Vec<usize>,
}

/// `f(p) >= c * face_poly(p)^m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundCertificate {
    pub c: BigRational,
    pub m: u32,
}

impl BoundCertificate {
    pub fn new(c: BigRational, m: u32) -> Result<Self> {
        if !c.is_positive() {
            return Err(FactoryError::usage("certificate constant must be positive"));
        }
        Ok(BoundCertificate { c, m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Zero,
    Interior,
    One,
}

impl FacePartition {
    /// The face with zeros on `a`, ones on `b` and interior coordinates elsewhere.
    pub fn new(n: usize, mut a: Vec<usize>, mut b: Vec<usize>) -> Result<Self> {
        a.sort_unstable();
        b.sort_unstable();
        a.dedup();
        b.dedup();
        if a.iter().chain(&b).any(|&i| i >= n) {
            return Err(FactoryError::usage(format!("face index out of range for n = {n}")));
        }
        if a.iter().any(|i| b.contains(i)) {
            return Err(FactoryError::usage("A and B must be disjoint"));
        }
        let s = (0..n).filter(|i| !a.contains(i) && !b.contains(i)).collect();
        Ok(FacePartition { n, a, s, b })
    }

    fn from_slots(slots: &[Slot]) -> Self {
        let pick = |want: Slot| {
            slots
                .iter()
                .enumerate()
                .filter(|(_, s)| **s == want)
                .map(|(i, _)| i)
                .collect()
        };
        FacePartition {
            n: slots.len(),
            a: pick(Slot::Zero),
            s: pick(Slot::Interior),
            b: pick(Slot::One),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coordinates pinned to 0.
    pub fn zeros(&self) -> &[usize] {
        &self.a
    }

    /// Coordinates strictly inside `(0,1)`.
    pub fn interior(&self) -> &[usize] {
        &self.s
    }

    /// Coordinates pinned to 1.
    pub fn ones(&self) -> &[usize] {
        &self.b
    }

    pub fn dimension(&self) -> usize {
        self.s.len()
    }

    pub fn contains(&self, p: &[BigRational]) -> bool {
        p.len() == self.n && face_of(p) == *self
    }

    pub fn to_json(&self) -> Value {
        let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
        json!({"A": one_based(&self.a), "S": one_based(&self.s), "B": one_based(&self.b)})
    }
}

impl fmt::Display for FacePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = |v: &[usize]| {
            let items: Vec<String> = v.iter().map(|i| (i + 1).to_string()).collect();
            format!("{{{}}}", items.join(","))
        };
        write!(f, "(A={}, S={}, B={})", set(&self.a), set(&self.s), set(&self.b))
    }
}

/// All `3^n` faces. Coordinate 1 varies fastest, in the order A, S, B.
pub fn enum_faces(n: usize) -> Vec<FacePartition> {
    let total = 3usize.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let slots: Vec<Slot> = (0..n)
                .map(|_| {
                    let s = [Slot::Zero, Slot::Interior, Slot::One][code % 3];
                    code /= 3;
                    s
                })
                .collect();
            FacePartition::from_slots(&slots)
        })
        .collect()
}

pub fn face_of(p: &[BigRational]) -> FacePartition {
    let slots: Vec<Slot> = p
        .iter()
        .map(|x| {
            if x.is_zero() {
                Slot::Zero
            } else if x.is_one() {
                Slot::One
            } else {
                Slot::Interior
            }
        })
        .collect();
    FacePartition::from_slots(&slots)
}

/// `prod_A (1-p_i) * prod_S p_i (1-p_i) * prod_B p_i`.
pub fn face_poly(face: &FacePartition, p: &[BigRational]) -> BigRational {
    let one = BigRational::one();
    let mut acc = one.clone();
    for &i in &face.a {
        acc *= &one - &p[i];
    }
    for &i in &face.s {
        acc *= &p[i] * (&one - &p[i]);
    }
    for &i in &face.b {
        acc *= &p[i];
    }
    acc
}

/// Every face in the closure: `A ⊆ A'` and `B ⊆ B'`.
pub fn face_closure(face: &FacePartition) -> Vec<FacePartition> {
    enum_faces(face.n)
        .into_iter()
        .filter(|g| face.a.iter().all(|i| g.a.contains(i)) && face.b.iter().all(|i| g.b.contains(i)))
        .collect()
}

/// All points of `[0,1]^n` with coordinates in `{0, 1/d, ..., 1}`, first
/// coordinate varying slowest.
pub fn grid_points(n: usize, d: u32) -> Vec<Point> {
    let steps: Vec<BigRational> = (0..=d)
        .map(|j| BigRational::new(j.into(), d.into()))
        .collect();
    let mut out: Vec<Point> = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                steps.iter().map(move |x| {
                    let mut q = prefix.clone();
                    q.push(x.clone());
                    q
                })
            })
            .collect();
    }
    out
}

fn mesh_denominator(mesh: &BigRational) -> Result<u32> {
    let bad = || FactoryError::usage("grid mesh must be 1/d for an integer d >= 2");
    if !mesh.is_positive() {
        return Err(bad());
    }
    let d = mesh.recip();
    if !d.is_integer() || d < BigRational::from_integer(2.into()) {
        return Err(bad());
    }
    d.to_integer()
        .try_into()
        .map_err(|_| FactoryError::resource("grid mesh too fine"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Decided exactly (a constant, or a tree with no reachable 1-path).
    ExactlyZero,
    /// Zero at every sampled grid point of the face.
    GridZero,
    /// No grid point lies on the face (within the domain).
    NoGridPoints,
    /// Some grid point of the face has a positive value.
    NonZero,
}

impl Hypothesis {
    pub fn label(&self) -> &'static str {
        match self {
            Hypothesis::ExactlyZero => "exactly-zero",
            Hypothesis::GridZero => "grid-zero",
            Hypothesis::NoGridPoints => "no-grid-points",
            Hypothesis::NonZero => "non-zero",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FaceReport {
    pub face: FacePartition,
    pub hypothesis: Hypothesis,
    pub pass: bool,
    pub worst_point: Option<Point>,
    pub worst_margin: Option<BigRational>,
}

impl FaceReport {
    pub fn to_json(&self) -> Value {
        json!({
            "face": self.face.to_json(),
            "hypothesis": self.hypothesis.label(),
            "pass": self.pass,
            "worst_point": self.worst_point.as_ref().map(|p| p.iter().map(fmt_rational).collect::<Vec<_>>()),
            "worst_margin": self.worst_margin.as_ref().map(fmt_rational),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BoundednessReport {
    pub faces: Vec<FaceReport>,
    pub grid_points: usize,
}

impl BoundednessReport {
    pub fn pass(&self) -> bool {
        self.faces.iter().all(|f| f.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass(),
            "grid_points": self.grid_points,
            "faces": self.faces.iter().map(FaceReport::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Grid check of `f(p) >= c * face_poly(p)^m` for every face on which `f`
/// is not identically zero. With a domain, only grid points of `K` are used.
pub fn check_poly_bounded(
    f: &TargetFunction,
    cert: &BoundCertificate,
    grid_mesh: &BigRational,
    domain: Option<&AffineCubeDomain>,
) -> Result<BoundednessReport> {
    let d = mesh_denominator(grid_mesh)?;
    let n = f.arity();
    if let Some(k) = domain {
        if k.n() != n {
            return Err(FactoryError::usage("domain and function dimensions differ"));
        }
    }
    let points: Vec<Point> = grid_points(n, d)
        .into_iter()
        .filter(|p| domain.map_or(true, |k| k.contains(p)))
        .collect();
    let values: Vec<BigRational> = points.iter().map(|p| f.eval(p)).collect::<Result<_>>()?;
    let faces = enum_faces(n)
        .into_iter()
        .map(|face| {
            let on_face: Vec<usize> = (0..points.len()).filter(|&j| face.contains(&points[j])).collect();
            let positive_on_face = on_face.iter().any(|&j| values[j].is_positive());
            let hypothesis = match f.exact_face_zero(&face) {
                Some(true) => Hypothesis::ExactlyZero,
                _ if on_face.is_empty() => Hypothesis::NoGridPoints,
                _ if !positive_on_face => Hypothesis::GridZero,
                _ => Hypothesis::NonZero,
            };
            if hypothesis != Hypothesis::NonZero {
                // an exact zero claim contradicted by the grid is a failure
                let pass = !(hypothesis == Hypothesis::ExactlyZero && positive_on_face);
                return FaceReport {
                    face,
                    hypothesis,
                    pass,
                    worst_point: None,
                    worst_margin: None,
                };
            }
            let mut worst: Option<(usize, BigRational)> = None;
            for (j, p) in points.iter().enumerate() {
                let margin = &values[j] - &cert.c * pow(&face_poly(&face, p), cert.m);
                if worst.as_ref().map_or(true, |(_, w)| margin < *w) {
                    worst = Some((j, margin));
                }
            }
            let (j, margin) = worst.expect("a non-zero face has grid points");
            FaceReport {
                face,
                hypothesis,
                pass: !margin.is_negative(),
                worst_point: Some(points[j].clone()),
                worst_margin: Some(margin),
            }
        })
        .collect();
    Ok(BoundednessReport {
        faces,
        grid_points: points.len(),
    })
}

#[derive(Debug, Clone)]
pub struct OneDimReport {
    pub pass: bool,
    /// Set when `f` is the constant 0 or 1 on the grid (the exempt cases).
    pub constant: Option<BigRational>,
    pub worst_point: Option<BigRational>,
    pub worst_margin: Option<BigRational>,
}

impl OneDimReport {
    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass,
            "constant": self.constant.as_ref().map(fmt_rational),
            "worst_point": self.worst_point.as_ref().map(fmt_rational),
            "worst_margin": self.worst_margin.as_ref().map(fmt_rational),
        })
    }
}

/// Grid check of `min(p,1-p)^m <= f(p) <= 1 - min(p,1-p)^m`.
pub fn check_1d(f: &TargetFunction, m: u32, grid_mesh: &BigRational) -> Result<OneDimReport> {
    if f.arity() != 1 {
        return Err(FactoryError::usage("check_1d needs a function of one coin"));
    }
    let d = mesh_denominator(grid_mesh)?;
    let one = BigRational::one();
    let points = grid_points(1, d);
    let values: Vec<BigRational> = points.iter().map(|p| f.eval(p)).collect::<Result<_>>()?;
    if values.iter().all(|v| v.is_zero()) || values.iter().all(|v| v.is_one()) {
        return Ok(OneDimReport {
            pass: true,
            constant: Some(values[0].clone()),
            worst_point: None,
            worst_margin: None,
        });
    }
    let mut worst: Option<(BigRational, BigRational)> = None;
    for (p, v) in points.iter().zip(&values) {
        let x = &p[0];
        let low = pow(x.min(&(&one - x)), m);
        let margin = (v - &low).min(&one - &low - v);
        if worst.as_ref().map_or(true, |(_, w)| margin < *w) {
            worst = Some((x.clone(), margin));
        }
    }
    let (x, margin) = worst.expect("grid is non-empty");
    Ok(OneDimReport {
        pass: !margin.is_negative(),
        constant: None,
        worst_point: Some(x),
        worst_margin: Some(margin),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn face_counts_and_order() {
        let one = enum_faces(1);
        assert_eq!(one.len(), 3);
        assert_eq!(one[0], FacePartition::new(1, vec![0], vec![]).unwrap());
        assert_eq!(one[1].interior(), &[0]);
        assert_eq!(one[2].ones(), &[0]);
        assert_eq!(enum_faces(2).len(), 9);
        let three: HashSet<_> = enum_faces(3).into_iter().collect();
        assert_eq!(three.len(), 27);
    }

    #[test]
    fn face_of_examples() {
        let f = face_of(&[int(0), rat(1, 2), int(1)]);
        assert_eq!((f.zeros(), f.interior(), f.ones()), (&[0][..], &[1][..], &[2][..]));
        assert_eq!(face_of(&[rat(1, 3), rat(2, 3)]).dimension(), 2);
        assert!(face_of(&[int(1), int(0)]).interior().is_empty());
    }

    #[test]
    fn face_poly_examples() {
        let vertex = FacePartition::new(2, vec![0], vec![1]).unwrap();
        assert_eq!(face_poly(&vertex, &[int(0), int(1)]), int(1));
        let interval = FacePartition::new(1, vec![], vec![]).unwrap();
        assert_eq!(face_poly(&interval, &[rat(1, 2)]), rat(1, 4));
        assert_eq!(face_poly(&interval, &[int(0)]), int(0));
    }

    #[test]
    fn closures() {
        let edge = FacePartition::new(2, vec![0], vec![]).unwrap();
        assert_eq!(face_closure(&edge).len(), 3);
        let vertex = FacePartition::new(2, vec![0], vec![1]).unwrap();
        assert_eq!(face_closure(&vertex), vec![vertex.clone()]);
        let interior = FacePartition::new(3, vec![], vec![]).unwrap();
        assert_eq!(face_closure(&interior).len(), 27);
    }

    #[test]
    fn bounded_examples() {
        let zero = TargetFunction::constant(int(0), 2).unwrap();
        let cert = BoundCertificate::new(int(1), 1).unwrap();
        let report = check_poly_bounded(&zero, &cert, &rat(1, 4), None).unwrap();
        assert!(report.pass());
        assert!(report.faces.iter().all(|f| f.hypothesis == Hypothesis::ExactlyZero));

        let affine = crate::target::builtin("quarter-affine").unwrap();
        let cert = BoundCertificate::new(rat(1, 4), 0).unwrap();
        assert!(check_poly_bounded(&affine, &cert, &rat(1, 16), None).unwrap().pass());
        let too_big = BoundCertificate::new(rat(1, 2), 0).unwrap();
        let report = check_poly_bounded(&affine, &too_big, &rat(1, 16), None).unwrap();
        assert!(!report.pass());
        assert_eq!(report.faces[0].worst_point, Some(vec![int(0)]));
        assert_eq!(report.faces[0].worst_margin, Some(rat(-1, 4)));
    }

    #[test]
    fn identity_zero_face_is_grid_zero() {
        let f = crate::target::builtin("identity").unwrap();
        let cert = BoundCertificate::new(int(1), 1).unwrap();
        let report = check_poly_bounded(&f, &cert, &rat(1, 8), None).unwrap();
        assert_eq!(report.faces[0].hypothesis, Hypothesis::GridZero);
        assert!(report.pass());
        let text = report.to_json().to_string();
        assert!(text.contains("\"hypothesis\":\"grid-zero\""));
    }

    #[test]
    fn one_dimensional_condition() {
        let id = crate::target::builtin("identity").unwrap();
        assert!(check_1d(&id, 1, &rat(1, 16)).unwrap().pass);
        let one = TargetFunction::constant(int(1), 1).unwrap();
        let r = check_1d(&one, 3, &rat(1, 16)).unwrap();
        assert!(r.pass && r.constant == Some(int(1)));
        let sq = crate::target::builtin("square").unwrap();
        let r = check_1d(&sq, 1, &rat(1, 4)).unwrap();
        assert!(!r.pass);
        // 1/16 < 1/4 at p = 1/4, and the gap is widest at p = 1/2
        assert_eq!(r.worst_point, Some(rat(1, 2)));
        assert!(check_1d(&sq, 2, &rat(1, 4)).unwrap().pass);
        assert!(check_1d(&sq, 2, &rat(1, 3)).is_ok());
        assert!(check_1d(&sq, 2, &rat(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn face_of_is_consistent(nums in proptest::collection::vec(0i64..=6, 1..5)) {
            let p: Vec<BigRational> = nums.iter().map(|&k| rat(k, 6)).collect();
            let face = face_of(&p);
            prop_assert!(face.contains(&p));
            for &i in face.zeros() { prop_assert!(p[i].is_zero()); }
            for &i in face.ones() { prop_assert!(p[i].is_one()); }
            for &i in face.interior() { prop_assert!(p[i].is_positive() && p[i] < int(1)); }
            prop_assert!(face_closure(&face).contains(&face));
        }
    }
}
