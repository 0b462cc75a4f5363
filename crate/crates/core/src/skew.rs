//! Skew products over a fixed base permutation and their relatively
//! independent self-joining.
//!
//! Grid layouts are fixed: a point `(z, y)` of the `N × M` grid has flat index
//! `z·M + y`, and a point `(z, y, y')` of the `N × M × M` fiber-product grid has
//! flat index `z·M² + y·M + y'`. Censuses and serialized output depend on them.

use crate::error::{Error, Result};
use crate::space::{
    compose, expect_line, parse_keyed, parse_perm_line, ratio, Automorphism, CellSet, CellSpace, Census,
    Rational,
};

/// Fiber-automorphism-valued function on the base cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cocycle {
    base: CellSpace,
    fiber: CellSpace,
    maps: Vec<Automorphism>,
}

impl Cocycle {
    pub fn new(fiber: CellSpace, maps: Vec<Automorphism>) -> Result<Self> {
        let base = CellSpace::new(maps.len())?;
        for map in &maps {
            fiber.check_same(&map.space(), "cocycle fiber map")?;
        }
        Ok(Cocycle { base, fiber, maps })
    }

    pub fn identity(base: CellSpace, fiber: CellSpace) -> Self {
        Self::constant(base, Automorphism::identity(fiber))
    }

    pub fn constant(base: CellSpace, map: Automorphism) -> Self {
        Cocycle {
            base,
            fiber: map.space(),
            maps: vec![map; base.resolution()],
        }
    }

    pub fn base(&self) -> CellSpace {
        self.base
    }

    pub fn fiber(&self) -> CellSpace {
        self.fiber
    }

    #[inline]
    pub fn map(&self, z: usize) -> &Automorphism {
        &self.maps[z]
    }

    pub fn maps(&self) -> &[Automorphism] {
        &self.maps
    }

    /// Pointwise inverse `z -> τ_z⁻¹`.
    pub fn inverse(&self) -> Cocycle {
        Cocycle {
            base: self.base,
            fiber: self.fiber,
            maps: self.maps.iter().map(Automorphism::inverse).collect(),
        }
    }
}

/// `(z, y) -> (T₀ z, τ_z y)` on the `N × M` grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SkewSystem {
    base_map: Automorphism,
    cocycle: Cocycle,
}

const SKEW_HEADER: &str = "ergolab-skew v1";

impl SkewSystem {
    pub fn base_map(&self) -> &Automorphism {
        &self.base_map
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    pub fn base_space(&self) -> CellSpace {
        self.base_map.space()
    }

    pub fn fiber_space(&self) -> CellSpace {
        self.cocycle.fiber()
    }

    pub fn base_resolution(&self) -> usize {
        self.base_map.resolution()
    }

    pub fn fiber_resolution(&self) -> usize {
        self.cocycle.fiber().resolution()
    }

    pub fn grid_size(&self) -> usize {
        self.base_resolution() * self.fiber_resolution()
    }

    #[inline]
    pub fn apply(&self, z: usize, y: usize) -> (usize, usize) {
        (self.base_map.apply(z), self.cocycle.map(z).apply(y))
    }

    pub fn flatten(&self) -> Automorphism {
        flatten(self)
    }

    /// Image of `A × fiber` as a set of grid points.
    pub fn image_of_cylinder(&self, base_set: &CellSet) -> Result<CellSet> {
        self.base_space().check_same(&base_set.space(), "cylinder image")?;
        let m = self.fiber_resolution();
        let grid = CellSpace::new(self.grid_size())?;
        let flat = self.flatten();
        let cylinder = CellSet::from_indices(grid, base_set.indices().flat_map(|z| z * m..(z + 1) * m))?;
        flat.image_of(&cylinder)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{SKEW_HEADER}\nN {}\nM {}\n{}\n",
            self.base_resolution(),
            self.fiber_resolution(),
            perm_body(&self.base_map)
        );
        for map in self.cocycle.maps() {
            out.push_str(&perm_body(map));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        expect_line(lines.next(), 1, SKEW_HEADER)?;
        let n = parse_keyed(lines.next(), 2, "N")?;
        let m = parse_keyed(lines.next(), 3, "M")?;
        let base_map = parse_perm_line(lines.next(), 4, n)?;
        let maps = (0..n)
            .map(|z| parse_perm_line(lines.next(), 5 + z, m))
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = lines.next() {
            return Err(Error::Parse {
                line: 5 + n,
                msg: format!("unexpected trailing content {extra:?}"),
            });
        }
        make_skew(base_map, Cocycle::new(CellSpace::new(m)?, maps)?)
    }
}

fn perm_body(p: &Automorphism) -> String {
    p.images().iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn make_skew(base_map: Automorphism, cocycle: Cocycle) -> Result<SkewSystem> {
    base_map.space().check_same(&cocycle.base(), "skew product base")?;
    let system = SkewSystem { base_map, cocycle };
    // flatten re-validates bijectivity of the grid action
    Automorphism::from_images(flatten(&system).images().to_vec())
        .map_err(|e| Error::Structural(format!("skew action is not a bijection: {e}")))?;
    Ok(system)
}

/// The grid action as a permutation of `N·M` cells, index `z·M + y`.
pub fn flatten(t: &SkewSystem) -> Automorphism {
    let m = t.fiber_resolution();
    let mut images = Vec::with_capacity(t.grid_size());
    for z in 0..t.base_resolution() {
        let tz = t.base_map.apply(z);
        let fiber = t.cocycle.map(z);
        images.extend((0..m).map(|y| tz * m + fiber.apply(y)));
    }
    Automorphism::from_images(images).expect("skew action of bijective parts is bijective")
}

/// First-return composition `τ_{z_{L-1}} ∘ … ∘ τ_{z_0}` along the base cycle of `z0`.
pub fn return_map(t: &SkewSystem, z0: usize) -> Automorphism {
    let mut acc = t.cocycle.map(z0).clone();
    let mut z = t.base_map.apply(z0);
    while z != z0 {
        acc = compose(t.cocycle.map(z), &acc).expect("fiber maps share a space");
        z = t.base_map.apply(z);
    }
    acc
}

/// `T × T` on the fiber-product grid `{(z, y, y')}` carrying the uniform joining.
#[derive(Debug, Clone)]
pub struct RelativeProduct {
    system: SkewSystem,
    action: Vec<u32>,
}

impl RelativeProduct {
    pub fn system(&self) -> &SkewSystem {
        &self.system
    }

    pub fn point_count(&self) -> usize {
        self.action.len()
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, y2: usize) -> usize {
        let m = self.system.fiber_resolution();
        (z * m + y) * m + y2
    }

    #[inline]
    pub fn decode(&self, idx: usize) -> (usize, usize, usize) {
        let m = self.system.fiber_resolution();
        (idx / (m * m), (idx / m) % m, idx % m)
    }

    /// Flat action table.
    pub fn action(&self) -> &[u32] {
        &self.action
    }

    #[inline]
    pub fn step(&self, idx: usize) -> usize {
        self.action[idx] as usize
    }

    #[inline]
    pub fn flip(&self, idx: usize) -> usize {
        let (z, y, y2) = self.decode(idx);
        self.index(z, y2, y)
    }

    #[inline]
    pub fn is_diagonal(&self, idx: usize) -> bool {
        let (_, y, y2) = self.decode(idx);
        y == y2
    }

    /// Each point carries mass `1/(N·M²)`.
    pub fn point_mass(&self) -> Rational {
        ratio(1, self.point_count())
    }

    pub fn diagonal_mass(&self) -> Rational {
        let count = (0..self.point_count()).filter(|&i| self.is_diagonal(i)).count();
        ratio(count, self.point_count())
    }

    /// Mass pushed to each grid point of `X` by the first (`second == false`)
    /// or second coordinate projection.
    pub fn marginal(&self, second: bool) -> Vec<Rational> {
        let m = self.system.fiber_resolution();
        let mut counts = vec![0usize; self.system.grid_size()];
        for idx in 0..self.point_count() {
            let (z, y, y2) = self.decode(idx);
            counts[z * m + if second { y2 } else { y }] += 1;
        }
        counts.into_iter().map(|c| ratio(c, self.point_count())).collect()
    }

    fn check_invariants(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Structural(format!("relative product: {msg}")));
        let total = self.point_count();
        let mut hit = vec![false; total];
        for idx in 0..total {
            let next = self.step(idx);
            if std::mem::replace(&mut hit[next], true) {
                return fail("action is not a bijection");
            }
            if self.is_diagonal(idx) != self.is_diagonal(next) {
                return fail("diagonal is not invariant");
            }
            if self.flip(next) != self.step(self.flip(idx)) {
                return fail("flip does not commute with the action");
            }
        }
        let mu = ratio(1, self.system.grid_size());
        for second in [false, true] {
            if self.marginal(second).iter().any(|w| *w != mu) {
                return fail("marginal is not uniform");
            }
        }
        if self.diagonal_mass() != ratio(1, self.system.fiber_resolution()) {
            return fail("diagonal mass differs from 1/M");
        }
        Ok(())
    }
}

pub fn relative_product(t: &SkewSystem) -> RelativeProduct {
    let n = t.base_resolution();
    let m = t.fiber_resolution();
    let total = n * m * m;
    assert!(total <= u32::MAX as usize, "fiber-product grid too large");
    let mut action = Vec::with_capacity(total);
    for z in 0..n {
        let tz = t.base_map.apply(z);
        let fiber = t.cocycle.map(z);
        for y in 0..m {
            let row = (tz * m + fiber.apply(y)) * m;
            action.extend((0..m).map(|y2| (row + fiber.apply(y2)) as u32));
        }
    }
    let product = RelativeProduct {
        system: t.clone(),
        action,
    };
    if let Err(e) = product.check_invariants() {
        panic!("{e}");
    }
    product
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitStructure {
    pub diagonal: Census,
    pub off_diagonal: Census,
    pub flip_pairing: bool,
}

pub fn orbit_structure(p: &RelativeProduct) -> OrbitStructure {
    let total = p.point_count();
    let mut cycle_len = vec![0u32; total];
    let mut diagonal = Census::new();
    let mut off_diagonal = Census::new();
    let mut members = Vec::new();
    for start in 0..total {
        if cycle_len[start] != 0 {
            continue;
        }
        members.clear();
        let mut idx = start;
        loop {
            members.push(idx);
            cycle_len[idx] = u32::MAX;
            idx = p.step(idx);
            if idx == start {
                break;
            }
        }
        let len = members.len();
        for &i in &members {
            cycle_len[i] = len as u32;
        }
        if p.is_diagonal(start) {
            diagonal.add(len, 1);
        } else {
            off_diagonal.add(len, 1);
        }
    }
    let flip_pairing = (0..total)
        .filter(|&i| !p.is_diagonal(i))
        .all(|i| cycle_len[i] == cycle_len[p.flip(i)] && !p.is_diagonal(p.flip(i)));
    assert!(flip_pairing, "flip must pair off-diagonal cycles");
    OrbitStructure {
        diagonal,
        off_diagonal,
        flip_pairing,
    }
}

/// `1 − (largest off-diagonal cycle mass) / (off-diagonal mass)`.
pub fn ergodicity_defect(p: &RelativeProduct) -> Result<Rational> {
    let m = p.system().fiber_resolution();
    if m < 2 {
        return Err(Error::DegenerateFiber(m));
    }
    Ok(defect_from_census(&orbit_structure(p).off_diagonal))
}

pub(crate) fn defect_from_census(off_diagonal: &Census) -> Rational {
    let largest = off_diagonal.longest().unwrap_or(0);
    Rational::from_integer(1) - ratio(largest, off_diagonal.total())
}
