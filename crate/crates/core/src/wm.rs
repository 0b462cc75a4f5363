//! Ergodic-average test for relative weak mixing.
//!
//! For grid sets `A`, `B` the statistic is
//!
//! ```text
//! D_N = ‖ (1/N) Σ_{n<N} (Tⁿ×Tⁿ)(1_A ⊗ 1_B) − E(E(1_A|Z) E(1_B|Z)) ‖_{L²(λ)}
//! ```
//!
//! evaluated on the fiber-product grid with the uniform joining. With
//! `G = N_base·M²` points, per-point hit counts `s`, step count `S` and
//! `C = Σ_z |A_z|·|B_z|` the exact value is
//! `D² = Σ (s·G − S·C)² / (G · (S·G)²)`; all sums are integers, so results do
//! not depend on evaluation order or thread count.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::skew::{defect_from_census, orbit_structure, relative_product, RelativeProduct, SkewSystem};
use crate::space::{dyadic_scales, fmt_ratio, ratio, Automorphism, CellSet, CellSpace, Census, Rational};

const CHUNK: usize = 4096;

/// A subset of the `N × M` grid, stored as a mask over flat indices `z·M + y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TestSet {
    base: usize,
    fiber: usize,
    members: Vec<bool>,
}

impl TestSet {
    pub fn product(base_part: &CellSet, fiber_part: &CellSet) -> Self {
        let (n, m) = (base_part.space().resolution(), fiber_part.space().resolution());
        let mut members = vec![false; n * m];
        for z in base_part.indices() {
            for y in fiber_part.indices() {
                members[z * m + y] = true;
            }
        }
        TestSet { base: n, fiber: m, members }
    }

    pub fn full(base: CellSpace, fiber: CellSpace) -> Self {
        Self::product(&CellSet::full(base), &CellSet::full(fiber))
    }

    pub fn from_points<I: IntoIterator<Item = (usize, usize)>>(base: usize, fiber: usize, points: I) -> Result<Self> {
        let mut members = vec![false; base * fiber];
        for (z, y) in points {
            if z >= base || y >= fiber {
                return Err(Error::InvalidCellSet(format!("grid point ({z}, {y}) outside {base}x{fiber}")));
            }
            members[z * fiber + y] = true;
        }
        Ok(TestSet { base, fiber, members })
    }

    pub fn base_resolution(&self) -> usize {
        self.base
    }

    pub fn fiber_resolution(&self) -> usize {
        self.fiber
    }

    #[inline]
    pub fn contains(&self, z: usize, y: usize) -> bool {
        self.members[z * self.fiber + y]
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mass(&self) -> Rational {
        ratio(self.len(), self.members.len())
    }

    /// Image of the set under a permutation of the flat grid.
    pub fn transported(&self, grid_map: &Automorphism) -> Result<TestSet> {
        if grid_map.resolution() != self.members.len() {
            return Err(Error::Dimension {
                what: "test set transport",
                left: self.members.len(),
                right: grid_map.resolution(),
            });
        }
        let mut members = vec![false; self.members.len()];
        for (i, _) in self.members.iter().enumerate().filter(|(_, &m)| m) {
            members[grid_map.apply(i)] = true;
        }
        Ok(TestSet { members, ..*self })
    }

    fn column_counts(&self) -> Vec<usize> {
        self.members.chunks(self.fiber).map(|c| c.iter().filter(|&&m| m).count()).collect()
    }

    fn check_grid(&self, base: usize, fiber: usize) -> Result<()> {
        if (self.base, self.fiber) != (base, fiber) {
            return Err(Error::Dimension {
                what: "test set grid",
                left: base * fiber,
                right: self.base * self.fiber,
            });
        }
        Ok(())
    }
}

/// `E(1_A | Z)` as one exact value per base cell.
pub fn conditional_expectation(a: &TestSet) -> Vec<Rational> {
    a.column_counts().into_iter().map(|c| ratio(c, a.fiber)).collect()
}

/// `E(E(1_A|Z) E(1_B|Z))`, the λ-mass of `{(z,y,y') : (z,y) ∈ A, (z,y') ∈ B}`.
pub fn product_constant(a: &TestSet, b: &TestSet) -> Result<Rational> {
    b.check_grid(a.base, a.fiber)?;
    Ok(ratio(pair_count(a, b), a.base * a.fiber * a.fiber))
}

fn pair_count(a: &TestSet, b: &TestSet) -> usize {
    a.column_counts()
        .into_iter()
        .zip(b.column_counts())
        .map(|(x, y)| x * y)
        .sum()
}

/// One evaluation of the statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnValue {
    pub steps: usize,
    /// `D_N²` when the integer accumulators did not overflow.
    pub squared: Option<Rational>,
    /// `D_N`, taken from the exact value when available.
    pub value: f64,
    /// `D_N` accumulated purely in double precision.
    pub float: f64,
}

impl DnValue {
    /// `D_N < eps`, decided exactly when possible.
    pub fn below(&self, eps: Rational) -> bool {
        match self.squared {
            Some(sq) => eps > Rational::from_integer(0) && sq < eps * eps,
            None => self.value < *eps.numer() as f64 / *eps.denom() as f64,
        }
    }
}

/// Shared state for evaluating the statistic of one system on many set pairs.
#[derive(Debug, Clone)]
pub struct DnEvaluator {
    product: RelativeProduct,
}

impl DnEvaluator {
    pub fn new(t: &SkewSystem) -> Self {
        DnEvaluator {
            product: relative_product(t),
        }
    }

    pub fn from_product(product: RelativeProduct) -> Self {
        DnEvaluator { product }
    }

    pub fn product(&self) -> &RelativeProduct {
        &self.product
    }

    fn pair_indicator(&self, a: &TestSet, b: &TestSet) -> Result<Vec<u8>> {
        let sys = self.product.system();
        let (n, m) = (sys.base_resolution(), sys.fiber_resolution());
        a.check_grid(n, m)?;
        b.check_grid(n, m)?;
        let mut ind = Vec::with_capacity(self.product.point_count());
        for z in 0..n {
            for y in 0..m {
                let in_a = a.contains(z, y);
                ind.extend((0..m).map(|y2| u8::from(in_a && b.contains(z, y2))));
            }
        }
        Ok(ind)
    }

    /// `D_S` for every `S = 1..=max_steps`.
    ///
    /// The action is iterated once per step over all grid points, with a
    /// running hit count per point.
    pub fn series(&self, a: &TestSet, b: &TestSet, max_steps: usize) -> Result<Vec<DnValue>> {
        if max_steps == 0 {
            return Err(Error::InvalidParameter("step count must be at least 1".into()));
        }
        let ind = self.pair_indicator(a, b)?;
        let g = self.product.point_count() as i128;
        let c = pair_count(a, b) as i128;
        let action = self.product.action();

        // Per chunk and per step: (exact Σ (sG − SC)², float Σ (s/S − c)²).
        let chunk_sums: Vec<Vec<(Option<i128>, f64)>> = (0..action.len())
            .step_by(CHUNK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let end = (start + CHUNK).min(action.len());
                let mut cur: Vec<u32> = (start as u32..end as u32).collect();
                let mut hits = vec![0i128; end - start];
                let cf = c as f64 / g as f64;
                let mut out = Vec::with_capacity(max_steps);
                for step in 1..=max_steps {
                    for (pos, h) in cur.iter_mut().zip(hits.iter_mut()) {
                        *h += i128::from(ind[*pos as usize]);
                        *pos = action[*pos as usize];
                    }
                    let s = step as i128;
                    let exact = hits.iter().try_fold(0i128, |acc, &h| {
                        let d = h.checked_mul(g)?.checked_sub(s.checked_mul(c)?)?;
                        acc.checked_add(d.checked_mul(d)?)
                    });
                    let float = hits
                        .iter()
                        .map(|&h| {
                            let d = h as f64 / step as f64 - cf;
                            d * d
                        })
                        .sum::<f64>();
                    out.push((exact, float));
                }
                out
            })
            .collect();

        let mut values = Vec::with_capacity(max_steps);
        for step in 1..=max_steps {
            let mut exact = Some(0i128);
            let mut float = 0.0;
            for chunk in &chunk_sums {
                let (e, f) = chunk[step - 1];
                exact = exact.zip(e).and_then(|(x, y)| x.checked_add(y));
                float += f;
            }
            let s = step as i128;
            let denom = s
                .checked_mul(g)
                .and_then(|sg| sg.checked_mul(sg))
                .and_then(|sg2| sg2.checked_mul(g));
            let squared = exact.zip(denom).map(|(num, den)| Rational::new(num, den));
            let float = (float / g as f64).sqrt();
            let value = match squared {
                Some(sq) => (*sq.numer() as f64 / *sq.denom() as f64).sqrt(),
                None => float,
            };
            values.push(DnValue {
                steps: step,
                squared,
                value,
                float,
            });
        }
        Ok(values)
    }

    pub fn evaluate(&self, a: &TestSet, b: &TestSet, steps: usize) -> Result<DnValue> {
        Ok(*self.series(a, b, steps)?.last().expect("nonempty series"))
    }
}

/// `D_N` in double precision.
pub fn dn_statistic(t: &SkewSystem, a: &TestSet, b: &TestSet, steps: usize) -> Result<f64> {
    Ok(DnEvaluator::new(t).evaluate(a, b, steps)?.value)
}

/// `D_N²` as an exact rational.
pub fn dn_squared_exact(t: &SkewSystem, a: &TestSet, b: &TestSet, steps: usize) -> Result<Rational> {
    DnEvaluator::new(t)
        .evaluate(a, b, steps)?
        .squared
        .ok_or(Error::Overflow("D_N accumulator"))
}

/// Smallest `N ≤ max_steps` with `D_N < eps`.
pub fn wm_membership(t: &SkewSystem, a: &TestSet, b: &TestSet, eps: Rational, max_steps: usize) -> Result<Option<usize>> {
    let series = DnEvaluator::new(t).series(a, b, max_steps)?;
    Ok(series.iter().find(|v| v.below(eps)).map(|v| v.steps))
}

/// Products of base and fiber dyadic sets with both scales at most `depth`,
/// ordered by total scale, then base scale, then base set, then fiber set.
pub fn product_dyadic_family(base: CellSpace, fiber: CellSpace, depth: usize) -> Vec<TestSet> {
    let base_scales = dyadic_scales(base);
    let fiber_scales = dyadic_scales(fiber);
    let max_b = depth.min(base_scales.len() - 1);
    let max_f = depth.min(fiber_scales.len() - 1);
    let mut out = Vec::new();
    for total in 0..=max_b + max_f {
        for sb in 0..=max_b.min(total) {
            let sf = total - sb;
            if sf > max_f {
                continue;
            }
            for bs in &base_scales[sb] {
                for fs in &fiber_scales[sf] {
                    out.push(TestSet::product(bs, fs));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub a_index: usize,
    pub b_index: usize,
    /// The threshold is `1/k`.
    pub k: usize,
    /// First passing step count, if any.
    pub first_pass: Option<usize>,
    /// Statistic at `first_pass`, or at the step cap when absent.
    pub dn: DnValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmReport {
    pub family_depth: usize,
    pub k_max: usize,
    pub max_steps: usize,
    pub family_size: usize,
    pub pairs: Vec<PairResult>,
    /// `None` when the fiber has a single cell.
    pub defect: Option<Rational>,
    pub off_diagonal: Census,
    pub diagonal: Census,
}

pub const WM_CSV_HEADER: &str = "system_id,A_index,B_index,N_steps,DN,eps,member";

impl WmReport {
    pub fn to_csv(&self, system_id: &str) -> String {
        let mut out = String::from(WM_CSV_HEADER);
        out.push('\n');
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{system_id},{},{},{},{},1/{},{}",
                p.a_index,
                p.b_index,
                p.first_pass.unwrap_or(self.max_steps),
                format_float(p.dn.value),
                p.k,
                p.first_pass.is_some()
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let defect = self.defect.as_ref().map(fmt_ratio).unwrap_or_else(|| "n/a".into());
        let members = self.pairs.iter().filter(|p| p.first_pass.is_some()).count();
        format!(
            "family_size {}\npairs {}\nthresholds {}\nmax_steps {}\nmemberships {members}/{}\ndefect {defect}\ndiagonal_census {}\noff_diagonal_census {}\n",
            self.family_size,
            self.family_size * self.family_size,
            self.k_max,
            self.max_steps,
            self.pairs.len(),
            self.diagonal,
            self.off_diagonal,
        )
    }
}

/// Fixed-format float shared by every CSV writer in the crate.
pub fn format_float(x: f64) -> String {
    format!("{x:.12}")
}

pub fn wm_profile(t: &SkewSystem, family_depth: usize, k_max: usize, max_steps: usize) -> Result<WmReport> {
    if k_max == 0 || max_steps == 0 {
        return Err(Error::InvalidParameter("threshold and step bounds must be at least 1".into()));
    }
    let eval = DnEvaluator::new(t);
    let family = product_dyadic_family(t.base_space(), t.fiber_space(), family_depth);
    let index_pairs: Vec<(usize, usize)> = (0..family.len())
        .flat_map(|i| (0..family.len()).map(move |j| (i, j)))
        .collect();
    let per_pair = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let series = eval.series(&family[i], &family[j], max_steps)?;
            Ok((1..=k_max)
                .map(|k| {
                    let eps = Rational::new(1, k as i128);
                    let hit = series.iter().find(|v| v.below(eps));
                    PairResult {
                        a_index: i,
                        b_index: j,
                        k,
                        first_pass: hit.map(|v| v.steps),
                        dn: *hit.unwrap_or_else(|| series.last().expect("nonempty")),
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let orbits = orbit_structure(eval.product());
    let defect = (t.fiber_resolution() >= 2).then(|| defect_from_census(&orbits.off_diagonal));
    Ok(WmReport {
        family_depth,
        k_max,
        max_steps,
        family_size: family.len(),
        pairs: per_pair.into_iter().flatten().collect(),
        defect,
        off_diagonal: orbits.off_diagonal,
        diagonal: orbits.diagonal,
    })
}
