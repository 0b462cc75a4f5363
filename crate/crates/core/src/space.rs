//! Finite Lebesgue model.
//!
//! The unit interval with Lebesgue measure is replaced by `N` cells of mass
//! exactly `1/N`. Measure-preserving automorphisms become permutations of the
//! cells, measurable sets become unions of cells, and every mass or distance
//! is an integer count over a known denominator.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};

use crate::error::{Error, Result};
use crate::rng;

/// Exact rational used for masses, distances and statistics.
pub type Rational = Ratio<i128>;

/// Renders a rational as `p/q`, keeping the denominator even when it is 1.
pub fn fmt_ratio(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn ratio(numer: usize, denom: usize) -> Rational {
    Rational::new(numer as i128, denom as i128)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellSpace {
    resolution: usize,
}

impl CellSpace {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("cell space needs at least one cell".into()));
        }
        Ok(CellSpace { resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cell_mass(&self) -> Rational {
        ratio(1, self.resolution)
    }

    /// `N * (1/N)`, always exactly one.
    pub fn total_mass(&self) -> Rational {
        self.cell_mass() * Rational::from_integer(self.resolution as i128)
    }

    pub(crate) fn check_same(&self, other: &CellSpace, what: &'static str) -> Result<()> {
        if self.resolution != other.resolution {
            return Err(Error::Dimension {
                what,
                left: self.resolution,
                right: other.resolution,
            });
        }
        Ok(())
    }
}

/// Multiset of cycle lengths, stored as `length -> multiplicity`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Census(BTreeMap<usize, usize>);

impl Census {
    pub fn new() -> Self {
        Census::default()
    }

    pub fn from_lengths<I: IntoIterator<Item = usize>>(lengths: I) -> Self {
        let mut census = Census::new();
        for len in lengths {
            census.add(len, 1);
        }
        census
    }

    pub fn add(&mut self, length: usize, count: usize) {
        if count > 0 {
            *self.0.entry(length).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &Census) {
        for (&len, &count) in &other.0 {
            self.add(len, count);
        }
    }

    /// Sum of all lengths, i.e. the number of points covered.
    pub fn total(&self) -> usize {
        self.0.iter().map(|(len, count)| len * count).sum()
    }

    pub fn cycle_count(&self) -> usize {
        self.0.values().sum()
    }

    pub fn longest(&self) -> Option<usize> {
        self.0.keys().next_back().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn multiplicity(&self, length: usize) -> usize {
        self.0.get(&length).copied().unwrap_or(0)
    }

    /// Multiplies every length by `factor`, keeping multiplicities.
    pub fn scaled(&self, factor: usize) -> Census {
        Census(self.0.iter().map(|(&len, &count)| (len * factor, count)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().map(|(&len, &count)| (len, count))
    }
}

impl fmt::Display for Census {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (len, count) in self.iter() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{len}x{count}")?;
        }
        Ok(())
    }
}

/// A permutation of the cells of a [`CellSpace`]; `images[i]` is the image of cell `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Automorphism {
    space: CellSpace,
    images: Vec<usize>,
}

const PERM_HEADER: &str = "ergolab-perm v1";

impl Automorphism {
    pub fn identity(space: CellSpace) -> Self {
        Automorphism {
            space,
            images: (0..space.resolution()).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let space = CellSpace::new(images.len())?;
        let mut seen = vec![false; images.len()];
        for (i, &img) in images.iter().enumerate() {
            if img >= images.len() {
                return Err(Error::InvalidPermutation(format!(
                    "image {img} of cell {i} is out of range 0..{}",
                    images.len()
                )));
            }
            if std::mem::replace(&mut seen[img], true) {
                return Err(Error::InvalidPermutation(format!("cell {img} is hit twice")));
            }
        }
        Ok(Automorphism { space, images })
    }

    /// Cyclic shift `i -> i + 1 mod N`.
    pub fn rotation(space: CellSpace) -> Self {
        Self::rotation_by(space, 1)
    }

    pub fn rotation_by(space: CellSpace, step: usize) -> Self {
        let n = space.resolution();
        Automorphism {
            space,
            images: (0..n).map(|i| (i + step) % n).collect(),
        }
    }

    pub fn space(&self) -> CellSpace {
        self.space
    }

    pub fn resolution(&self) -> usize {
        self.space.resolution()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, cell: usize) -> usize {
        self.images[cell]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &img)| i == img)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (i, &img) in self.images.iter().enumerate() {
            inv[img] = i;
        }
        Automorphism {
            space: self.space,
            images: inv,
        }
    }

    /// `self ∘ inner`, i.e. apply `inner` first.
    pub fn after(&self, inner: &Automorphism) -> Result<Self> {
        compose(self, inner)
    }

    pub fn power(&self, exponent: usize) -> Self {
        let mut images: Vec<usize> = (0..self.resolution()).collect();
        for _ in 0..exponent {
            for img in images.iter_mut() {
                *img = self.images[*img];
            }
        }
        Automorphism {
            space: self.space,
            images,
        }
    }

    /// Disjoint cycles, each listed from its minimal cell, ordered by that cell.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.images.len()];
        let mut out = Vec::new();
        for start in 0..self.images.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut cell = start;
            while !seen[cell] {
                seen[cell] = true;
                cycle.push(cell);
                cell = self.images[cell];
            }
            out.push(cycle);
        }
        out
    }

    pub fn image_of(&self, set: &CellSet) -> Result<CellSet> {
        self.space.check_same(&set.space, "set image")?;
        let mut members = vec![false; self.resolution()];
        for i in set.indices() {
            members[self.images[i]] = true;
        }
        Ok(CellSet {
            space: self.space,
            members,
        })
    }

    pub fn to_text(&self) -> String {
        let body: Vec<String> = self.images.iter().map(usize::to_string).collect();
        format!("{PERM_HEADER}\nN {}\n{}\n", self.resolution(), body.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        expect_line(lines.next(), 1, PERM_HEADER)?;
        let n = parse_keyed(lines.next(), 2, "N")?;
        let perm = parse_perm_line(lines.next(), 3, n)?;
        if let Some(extra) = lines.next() {
            return Err(Error::Parse {
                line: 4,
                msg: format!("unexpected trailing content {extra:?}"),
            });
        }
        Ok(perm)
    }
}

impl fmt::Display for Automorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, img) in self.images.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{img}")?;
        }
        f.write_str("]")
    }
}

pub(crate) fn expect_line(line: Option<&str>, number: usize, expected: &str) -> Result<()> {
    match line {
        Some(l) if l == expected => Ok(()),
        other => Err(Error::Parse {
            line: number,
            msg: format!("expected {expected:?}, found {other:?}"),
        }),
    }
}

pub(crate) fn parse_keyed(line: Option<&str>, number: usize, key: &str) -> Result<usize> {
    let err = |msg: String| Error::Parse { line: number, msg };
    let line = line.ok_or_else(|| err(format!("missing `{key} <value>` line")))?;
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| err(format!("expected `{key} <value>`, found {line:?}")))?;
    let value: usize = rest.parse().map_err(|_| err(format!("bad value {rest:?}")))?;
    if value == 0 || value.to_string() != rest {
        return Err(err(format!("bad value {rest:?}")));
    }
    Ok(value)
}

pub(crate) fn parse_perm_line(line: Option<&str>, number: usize, n: usize) -> Result<Automorphism> {
    let err = |msg: String| Error::Parse { line: number, msg };
    let line = line.ok_or_else(|| err("missing permutation line".into()))?;
    let images = line
        .split(' ')
        .map(|tok| {
            let v: usize = tok.parse().map_err(|_| err(format!("bad index {tok:?}")))?;
            if v.to_string() != tok {
                return Err(err(format!("non-canonical index {tok:?}")));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    if images.len() != n {
        return Err(err(format!("expected {n} indices, found {}", images.len())));
    }
    Automorphism::from_images(images).map_err(|e| err(e.to_string()))
}

/// `(S∘T)(i) = S(T(i))`.
pub fn compose(s: &Automorphism, t: &Automorphism) -> Result<Automorphism> {
    s.space.check_same(&t.space, "compose")?;
    Ok(Automorphism {
        space: s.space,
        images: t.images.iter().map(|&i| s.images[i]).collect(),
    })
}

/// Fraction of cells on which `s` and `t` disagree.
pub fn hamming_distance(s: &Automorphism, t: &Automorphism) -> Result<Rational> {
    s.space.check_same(&t.space, "hamming distance")?;
    Ok(ratio(moved_count(s, t), s.resolution()))
}

pub(crate) fn moved_count(s: &Automorphism, t: &Automorphism) -> usize {
    s.images
        .iter()
        .zip(&t.images)
        .filter(|(a, b)| a != b)
        .count()
}

/// `Σ_i 2^-(i+1) · mass(S·A_i Δ T·A_i)` over `family`, exactly.
pub fn weak_distance(s: &Automorphism, t: &Automorphism, family: &[CellSet]) -> Result<BigRational> {
    s.space.check_same(&t.space, "weak distance")?;
    let mut total = BigRational::from_integer(BigInt::from(0));
    let mut weight = BigRational::new(BigInt::from(1), BigInt::from(2));
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    for set in family {
        s.space.check_same(&set.space, "weak distance family")?;
        let sa = s.image_of(set)?;
        let ta = t.image_of(set)?;
        let diff = sa.symmetric_difference_count(&ta);
        if diff > 0 {
            let mass = BigRational::new(BigInt::from(diff), BigInt::from(s.resolution()));
            total += &weight * mass;
        }
        weight *= &half;
    }
    Ok(total)
}

/// Contiguous ranges partitioning `0..n` into `parts` pieces, larger pieces first.
pub(crate) fn split_ranges(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.clamp(1, n);
    let (base, extra) = (n / parts, n % parts);
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Dyadic scales of the space: scale `s` splits `0..N` into `2^s` contiguous
/// ranges. Stops at the first scale made of single cells.
///
/// When `N` is not a power of two, each scale splits greedily left to right
/// into `⌈N/2^s⌉`- and `⌊N/2^s⌋`-sized ranges; this is not a canonical dyadic
/// structure.
pub fn dyadic_scales(space: CellSpace) -> Vec<Vec<CellSet>> {
    let n = space.resolution();
    let mut scales = Vec::new();
    let mut parts = 1usize;
    loop {
        let ranges = split_ranges(n, parts);
        let finest = ranges.iter().all(|r| r.len() == 1);
        scales.push(
            ranges
                .into_iter()
                .map(|r| CellSet::range(space, r).expect("range within space"))
                .collect(),
        );
        if finest {
            break;
        }
        parts = parts.saturating_mul(2);
    }
    scales
}

/// Coarse-to-fine enumeration of [`dyadic_scales`].
pub fn dyadic_family(space: CellSpace) -> Vec<CellSet> {
    dyadic_scales(space).into_iter().flatten().collect()
}

pub fn cycle_census(t: &Automorphism) -> Census {
    Census::from_lengths(t.cycles().iter().map(Vec::len))
}

/// Uniform random permutation: ChaCha8 seeded with `seed`, unbiased Fisher-Yates.
pub fn random_automorphism(space: CellSpace, seed: u64) -> Automorphism {
    let mut images: Vec<usize> = (0..space.resolution()).collect();
    let mut rng = rng::seeded(seed);
    rng::shuffle(&mut rng, &mut images);
    Automorphism { space, images }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellSet {
    space: CellSpace,
    members: Vec<bool>,
}

impl CellSet {
    pub fn empty(space: CellSpace) -> Self {
        CellSet {
            space,
            members: vec![false; space.resolution()],
        }
    }

    pub fn full(space: CellSpace) -> Self {
        CellSet {
            space,
            members: vec![true; space.resolution()],
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(space: CellSpace, indices: I) -> Result<Self> {
        let mut set = CellSet::empty(space);
        for i in indices {
            if i >= space.resolution() {
                return Err(Error::InvalidCellSet(format!(
                    "cell {i} outside 0..{}",
                    space.resolution()
                )));
            }
            set.members[i] = true;
        }
        Ok(set)
    }

    pub fn range(space: CellSpace, range: std::ops::Range<usize>) -> Result<Self> {
        Self::from_indices(space, range)
    }

    pub fn from_mask(space: CellSpace, members: Vec<bool>) -> Result<Self> {
        if members.len() != space.resolution() {
            return Err(Error::Dimension {
                what: "cell set mask",
                left: space.resolution(),
                right: members.len(),
            });
        }
        Ok(CellSet { space, members })
    }

    pub fn space(&self) -> CellSpace {
        self.space
    }

    #[inline]
    pub fn contains(&self, cell: usize) -> bool {
        self.members[cell]
    }

    pub fn mask(&self) -> &[bool] {
        &self.members
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn mass(&self) -> Rational {
        ratio(self.len(), self.space.resolution())
    }

    pub fn complement(&self) -> CellSet {
        CellSet {
            space: self.space,
            members: self.members.iter().map(|m| !m).collect(),
        }
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.members
            .iter()
            .zip(&other.members)
            .all(|(a, b)| !(a & b))
    }

    pub fn symmetric_difference_count(&self, other: &CellSet) -> usize {
        self.members
            .iter()
            .zip(&other.members)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Labelled partition of the cells; label values are `0..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    space: CellSpace,
    labels: Vec<usize>,
    label_count: usize,
}

impl Partition {
    /// `label_count` must exceed every label; labels with no cells are allowed.
    pub fn new(space: CellSpace, labels: Vec<usize>, label_count: usize) -> Result<Self> {
        if labels.len() != space.resolution() {
            return Err(Error::Dimension {
                what: "partition labels",
                left: space.resolution(),
                right: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_count) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} exceeds label count {label_count}"
            )));
        }
        Ok(Partition {
            space,
            labels,
            label_count,
        })
    }

    pub fn trivial(space: CellSpace) -> Self {
        Partition {
            space,
            labels: vec![0; space.resolution()],
            label_count: 1,
        }
    }

    pub fn space(&self) -> CellSpace {
        self.space
    }

    #[inline]
    pub fn label(&self, cell: usize) -> usize {
        self.labels[cell]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn cells(&self, label: usize) -> CellSet {
        CellSet {
            space: self.space,
            members: self.labels.iter().map(|&l| l == label).collect(),
        }
    }
}
