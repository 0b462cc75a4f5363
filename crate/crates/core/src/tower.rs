//! Rohlin towers for the base permutation.
//!
//! A tower of height `n` is a base set `B` with `B, T₀B, …, T₀ⁿ⁻¹B` pairwise
//! disjoint. The construction marks every `n`-th cell along each cycle,
//! starting at the cycle's minimal cell; the last `L mod n` cells of a cycle
//! of length `L` are left in the error set.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::space::{ratio, Automorphism, CellSet, CellSpace, Partition, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tower {
    base_set: CellSet,
    levels: Vec<CellSet>,
    error_set: CellSet,
    error_mass: Rational,
}

impl Tower {
    pub fn base_set(&self) -> &CellSet {
        &self.base_set
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[CellSet] {
        &self.levels
    }

    pub fn error_set(&self) -> &CellSet {
        &self.error_set
    }

    pub fn error_mass(&self) -> Rational {
        self.error_mass
    }

    pub fn space(&self) -> CellSpace {
        self.base_set.space()
    }

    /// Level of `cell`, or `None` for cells in the error set.
    pub fn level_of(&self, cell: usize) -> Option<usize> {
        self.levels.iter().position(|l| l.contains(cell))
    }

    /// One line per level, `level <i>: <sorted cells>`, then the error set.
    pub fn render(&self) -> String {
        let join = |s: &CellSet| s.indices().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        for (i, level) in self.levels.iter().enumerate() {
            out.push_str(&format!("level {i}: {}\n", join(level)));
        }
        out.push_str(&format!("error: {}\n", join(&self.error_set)));
        out
    }

    /// Exhaustive check of disjointness, the mapping property and the error accounting.
    pub fn check(&self, t0: &Automorphism) -> Result<()> {
        let fail = |msg: String| Err(Error::Structural(format!("tower: {msg}")));
        let space = self.space();
        space.check_same(&t0.space(), "tower base map")?;
        let mut owner = vec![None; space.resolution()];
        for (i, level) in self.levels.iter().enumerate() {
            for cell in level.indices() {
                if let Some(j) = owner[cell] {
                    return fail(format!("cell {cell} lies in levels {j} and {i}"));
                }
                owner[cell] = Some(i);
            }
        }
        for window in self.levels.windows(2) {
            if t0.image_of(&window[0])? != window[1] {
                return fail("base map does not carry a level onto the next".into());
            }
        }
        for cell in 0..space.resolution() {
            if owner[cell].is_none() != self.error_set.contains(cell) {
                return fail(format!("cell {cell} is misclassified in the error set"));
            }
        }
        if self.levels.first() != Some(&self.base_set) {
            return fail("level 0 differs from the base set".into());
        }
        let expected = Rational::from_integer(1) - Rational::from_integer(self.height() as i128) * self.base_set.mass();
        if self.error_mass != expected || self.error_mass != self.error_set.mass() {
            return fail("error mass is inconsistent".into());
        }
        Ok(())
    }
}

pub fn build_tower(t0: &Automorphism, height: usize, eps: Rational) -> Result<Tower> {
    if height == 0 {
        return Err(Error::InvalidParameter("tower height must be at least 1".into()));
    }
    let space = t0.space();
    let cycles = t0.cycles();
    if let Some(short) = cycles.iter().find(|c| c.len() < height) {
        return Err(Error::Aperiodic {
            start: short[0],
            cycle_len: short.len(),
            height,
        });
    }
    let mut levels = vec![vec![false; space.resolution()]; height];
    let mut leftover = 0usize;
    for cycle in &cycles {
        let blocks = cycle.len() / height;
        for (pos, &cell) in cycle.iter().enumerate().take(blocks * height) {
            levels[pos % height][cell] = true;
        }
        leftover += cycle.len() % height;
    }
    let error_mass = ratio(leftover, space.resolution());
    if error_mass >= eps {
        return Err(Error::TowerTooCoarse {
            achieved: error_mass,
            eps,
        });
    }
    let levels = levels
        .into_iter()
        .map(|mask| CellSet::from_mask(space, mask))
        .collect::<Result<Vec<_>>>()?;
    let mut covered = vec![false; space.resolution()];
    for level in &levels {
        for cell in level.indices() {
            covered[cell] = true;
        }
    }
    let error_set = CellSet::from_mask(space, covered.into_iter().map(|c| !c).collect())?;
    let tower = Tower {
        base_set: levels[0].clone(),
        levels,
        error_set,
        error_mass,
    };
    tower.check(t0)?;
    Ok(tower)
}

/// One column of a refined tower: base cells sharing a label word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub cells: CellSet,
    /// `labels[i]` is the partition label of every cell of `T₀ⁱ(cells)`.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinedTower {
    tower: Tower,
    columns: Vec<Column>,
}

impl RefinedTower {
    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    /// Columns ordered by their minimal base cell.
    pub fn columns(&self) -> &[Column] {
        &self.columns
    }
}

/// Groups base cells by their label word `(p(z), p(T₀z), …, p(T₀ⁿ⁻¹z))`.
pub fn refine_tower(t: &Tower, t0: &Automorphism, p: &Partition) -> Result<RefinedTower> {
    let space = t.space();
    space.check_same(&p.space(), "tower refinement partition")?;
    t.check(t0)?;
    let height = t.height();
    let mut words: BTreeMap<Vec<usize>, (usize, Vec<usize>)> = BTreeMap::new();
    for z in t.base_set().indices() {
        let mut word = Vec::with_capacity(height);
        let mut cell = z;
        for _ in 0..height {
            word.push(p.label(cell));
            cell = t0.apply(cell);
        }
        words.entry(word).or_insert_with(|| (z, Vec::new())).1.push(z);
    }
    let mut columns = words
        .into_iter()
        .map(|(labels, (first, cells))| Ok((first, Column { cells: CellSet::from_indices(space, cells)?, labels })))
        .collect::<Result<Vec<_>>>()?;
    columns.sort_by_key(|(first, _)| *first);
    Ok(RefinedTower {
        tower: t.clone(),
        columns: columns.into_iter().map(|(_, c)| c).collect(),
    })
}
