//! Fiber-preserving conjugators.
//!
//! Given a refined Rohlin tower and a piecewise-constant target, the
//! conjugator `Q(z, y) = (z, κ_z y)` is built column by column: `κ` is the
//! identity on the column base and then
//!
//! ```text
//! κ_{T₀^{i+1} z} = R_{α(l,i)} ∘ κ_{T₀^i z} ∘ τ_{T₀^i z}⁻¹      for i = 0, …, n−2
//! ```
//!
//! so that the conjugated cocycle `κ_{T₀z} ∘ τ_z ∘ κ_z⁻¹` equals the target
//! value on levels `0..n−1` of every column. The top level and the error set
//! are not controlled; their mass is the closeness budget.

use crate::approx::PiecewiseSpec;
use crate::error::{Error, Result};
use crate::skew::{flatten, make_skew, Cocycle, SkewSystem};
use crate::space::{compose, moved_count, ratio, Automorphism, Rational};
use crate::tower::{RefinedTower, Tower};

/// `Q(z, y) = (z, κ_z y)`; acts trivially on the base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conjugator {
    kappa: Cocycle,
}

impl Conjugator {
    pub fn new(kappa: Cocycle) -> Self {
        Conjugator { kappa }
    }

    pub fn identity(t: &SkewSystem) -> Self {
        Conjugator {
            kappa: Cocycle::identity(t.base_space(), t.fiber_space()),
        }
    }

    pub fn kappa(&self) -> &Cocycle {
        &self.kappa
    }

    pub fn is_identity(&self) -> bool {
        self.kappa.maps().iter().all(Automorphism::is_identity)
    }

    pub fn inverse(&self) -> Conjugator {
        Conjugator {
            kappa: self.kappa.inverse(),
        }
    }

    /// `Q` as a skew product over the identity base.
    pub fn as_system(&self) -> SkewSystem {
        make_skew(Automorphism::identity(self.kappa.base()), self.kappa.clone())
            .expect("identity base matches cocycle base")
    }

    /// `Q` as a permutation of the `N·M` grid.
    pub fn flatten(&self) -> Automorphism {
        flatten(&self.as_system())
    }
}

pub fn build_conjugator(t: &SkewSystem, rt: &RefinedTower, spec: &PiecewiseSpec) -> Result<Conjugator> {
    let base = t.base_map();
    let tower = rt.tower();
    let structural = |msg: String| Err(Error::Structural(msg));
    t.base_space().check_same(&tower.space(), "conjugator tower")?;
    t.base_space().check_same(&spec.partition().space(), "conjugator partition")?;
    t.fiber_space().check_same(&spec.reps()[0].space(), "conjugator target fiber")?;
    tower
        .check(base)
        .map_err(|e| Error::Structural(format!("tower was not built from this base map: {e}")))?;

    let height = tower.height();
    let mut kappa: Vec<Option<Automorphism>> = vec![None; t.base_resolution()];
    let mut covered = 0;
    for (l, column) in rt.columns().iter().enumerate() {
        if column.labels.len() != height {
            return structural(format!("column {l} carries {} labels for height {height}", column.labels.len()));
        }
        for z in column.cells.indices() {
            if !tower.base_set().contains(z) {
                return structural(format!("column {l} cell {z} is outside the tower base"));
            }
            let mut cell = z;
            let mut current = Automorphism::identity(t.fiber_space());
            for (i, &label) in column.labels.iter().enumerate() {
                if spec.partition().label(cell) != label {
                    return structural(format!(
                        "column {l} expects label {label} at level {i} but cell {cell} has label {}",
                        spec.partition().label(cell)
                    ));
                }
                if kappa[cell].is_some() {
                    return structural(format!("cell {cell} is reached twice"));
                }
                kappa[cell] = Some(current.clone());
                covered += 1;
                if i + 1 < height {
                    let tau_inv = t.cocycle().map(cell).inverse();
                    current = compose(&spec.reps()[label], &compose(&current, &tau_inv)?)?;
                    cell = base.apply(cell);
                }
            }
        }
    }
    if covered + tower.error_set().len() != t.base_resolution() {
        return structural("columns do not cover the tower".into());
    }
    let maps = kappa
        .into_iter()
        .map(|k| k.unwrap_or_else(|| Automorphism::identity(t.fiber_space())))
        .collect();
    Ok(Conjugator {
        kappa: Cocycle::new(t.fiber_space(), maps)?,
    })
}

/// `V = Q T Q⁻¹`, with cocycle `v_z = κ_{T₀z} ∘ τ_z ∘ κ_z⁻¹`.
pub fn conjugate(q: &Conjugator, t: &SkewSystem) -> Result<SkewSystem> {
    t.base_space().check_same(&q.kappa.base(), "conjugate base")?;
    t.fiber_space().check_same(&q.kappa.fiber(), "conjugate fiber")?;
    let base = t.base_map();
    let maps = (0..t.base_resolution())
        .map(|z| {
            let inner = compose(t.cocycle().map(z), &q.kappa.map(z).inverse())?;
            compose(q.kappa.map(base.apply(z)), &inner)
        })
        .collect::<Result<Vec<_>>>()?;
    make_skew(base.clone(), Cocycle::new(t.fiber_space(), maps)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Closeness {
    /// Fraction of grid points where the two actions differ.
    pub distance: Rational,
    /// `1/n + tower error`.
    pub bound: Rational,
    pub ok: bool,
}

pub fn verify_closeness(v: &SkewSystem, r: &SkewSystem, height: usize, tower_error: Rational) -> Result<Closeness> {
    if height == 0 {
        return Err(Error::InvalidParameter("tower height must be at least 1".into()));
    }
    v.base_space().check_same(&r.base_space(), "closeness base")?;
    v.fiber_space().check_same(&r.fiber_space(), "closeness fiber")?;
    let distance = ratio(moved_count(&flatten(v), &flatten(r)), v.grid_size());
    let bound = ratio(1, height) + tower_error;
    Ok(Closeness {
        distance,
        bound,
        ok: distance <= bound,
    })
}

/// Checks `v_z = ρ_z` for every `z` on levels `0..n−1` of the tower.
pub fn check_level_agreement(v: &SkewSystem, r: &SkewSystem, tower: &Tower) -> Result<()> {
    let controlled = tower.height().saturating_sub(1);
    for (i, level) in tower.levels().iter().take(controlled).enumerate() {
        for z in level.indices() {
            if v.cocycle().map(z) != r.cocycle().map(z) {
                return Err(Error::Structural(format!(
                    "conjugated cocycle differs from the target at cell {z} on level {i}"
                )));
            }
        }
    }
    Ok(())
}
