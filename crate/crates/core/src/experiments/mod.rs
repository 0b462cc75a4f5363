//! Scenario library, seeded genericity sampling and the command-line driver.

pub mod cli;
pub mod config;

use std::fmt::Write as _;
use std::str::FromStr;

use rand_core::RngCore;
use rayon::prelude::*;

use crate::approx::{make_piecewise, PiecewiseSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::skew::{ergodicity_defect, make_skew, Cocycle, SkewSystem};
use crate::space::{dyadic_scales, fmt_ratio, random_automorphism, Automorphism, CellSet, CellSpace, Partition, Rational};
use crate::wm::{format_float, DnEvaluator, DnValue, TestSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Trivial,
    Compact,
    ProductWm,
    RandomPiecewise,
    ConjugationDemo,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Trivial,
        ScenarioKind::Compact,
        ScenarioKind::ProductWm,
        ScenarioKind::RandomPiecewise,
        ScenarioKind::ConjugationDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Trivial => "trivial",
            ScenarioKind::Compact => "compact",
            ScenarioKind::ProductWm => "product_wm",
            ScenarioKind::RandomPiecewise => "random_piecewise",
            ScenarioKind::ConjugationDemo => "conjugation_demo",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidParameter(format!("unknown scenario {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Base resolution `N`.
    pub base: usize,
    /// Fiber resolution `M`.
    pub fiber: usize,
    /// Tower height.
    pub height: usize,
    pub eps: Rational,
    pub seed: u64,
    pub steps: Vec<usize>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, base: usize, fiber: usize, seed: u64) -> Self {
        Scenario {
            kind,
            base,
            fiber,
            height: 4,
            eps: Rational::new(1, 4),
            seed,
            steps: vec![64],
        }
    }
}

/// Seed stream used for the target of `conjugation_demo`.
const TARGET_STREAM: u64 = 0x7a26_e7;

pub fn scenario_build(s: &Scenario) -> Result<SkewSystem> {
    if s.base == 0 || s.fiber == 0 {
        return Err(Error::InvalidParameter(format!(
            "scenario {} needs N >= 1 and M >= 1 (got N={}, M={})",
            s.kind.name(),
            s.base,
            s.fiber
        )));
    }
    let base_space = CellSpace::new(s.base)?;
    let fiber = CellSpace::new(s.fiber)?;
    let base = Automorphism::rotation(base_space);
    match s.kind {
        ScenarioKind::Trivial => make_skew(base, Cocycle::identity(base_space, fiber)),
        ScenarioKind::Compact => make_skew(base, Cocycle::constant(base_space, Automorphism::rotation(fiber))),
        ScenarioKind::ProductWm => make_skew(base, Cocycle::constant(base_space, doubling(fiber)?)),
        ScenarioKind::RandomPiecewise => random_piecewise(&base, s.fiber, s.seed),
        ScenarioKind::ConjugationDemo => random_cocycle_system(&base, s.fiber, s.seed),
    }
}

/// Target system steered to by the `conjugation_demo` pipeline.
pub fn conjugation_target(s: &Scenario) -> Result<SkewSystem> {
    let base = Automorphism::rotation(CellSpace::new(s.base)?);
    random_piecewise(&base, s.fiber, rng::derive_seed(s.seed, TARGET_STREAM))
}

/// `y -> 2y mod M`; a permutation only for odd `M`.
pub fn doubling(fiber: CellSpace) -> Result<Automorphism> {
    let m = fiber.resolution();
    if m % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "product_wm needs an odd fiber resolution M so that y -> 2y mod M is a permutation (got M={m})"
        )));
    }
    Automorphism::from_images((0..m).map(|y| 2 * y % m).collect())
}

/// Piecewise-constant system over `base`: the base is cut into the dyadic
/// intervals of a seeded scale `d ≤ 3`, interval `p` gets label `p + 1` and an
/// independent uniform fiber permutation; label 0 (identity) stays empty.
pub fn random_piecewise_spec(base: CellSpace, fiber: usize, seed: u64) -> Result<PiecewiseSpec> {
    let fiber = CellSpace::new(fiber)?;
    let mut rng = rng::seeded(seed);
    let depth = rng::below(&mut rng, 4) as usize;
    let scales = dyadic_scales(base);
    let parts: &[CellSet] = &scales[depth.min(scales.len() - 1)];
    let mut labels = vec![0; base.resolution()];
    let mut reps = vec![Automorphism::identity(fiber)];
    for (p, part) in parts.iter().enumerate() {
        for z in part.indices() {
            labels[z] = p + 1;
        }
        reps.push(random_automorphism(fiber, rng.next_u64()));
    }
    PiecewiseSpec::new(Partition::new(base, labels, parts.len() + 1)?, reps)
}

pub fn random_piecewise(base: &Automorphism, fiber: usize, seed: u64) -> Result<SkewSystem> {
    make_piecewise(base, &random_piecewise_spec(base.space(), fiber, seed)?)
}

/// Independent uniform fiber permutation at every base cell.
pub fn random_cocycle_system(base: &Automorphism, fiber: usize, seed: u64) -> Result<SkewSystem> {
    let fiber = CellSpace::new(fiber)?;
    let maps = (0..base.resolution())
        .map(|z| random_automorphism(fiber, rng::derive_seed(seed, z as u64)))
        .collect();
    make_skew(base.clone(), Cocycle::new(fiber, maps)?)
}

/// `Z × {0, …, ⌈M/2⌉−1}`.
pub fn canonical_test_set(base: CellSpace, fiber: CellSpace) -> TestSet {
    let half = fiber.resolution().div_ceil(2);
    TestSet::product(&CellSet::full(base), &CellSet::range(fiber, 0..half).expect("half fits"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    /// Trial index; baselines use −1 (trivial), −2 (compact), −3 (product_wm).
    pub trial: i64,
    pub system: &'static str,
    pub steps: usize,
    /// Absent when the baseline cannot be built (product_wm with even `M`).
    pub defect: Option<Rational>,
    pub dn: Option<DnValue>,
}

pub const SAMPLE_CSV_HEADER: &str = "trial,system,N_steps,defect,DN,eps,member";

pub fn sample_to_csv(rows: &[SampleRow], eps: Rational, exact: bool) -> String {
    let mut out = String::from(SAMPLE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let defect = row.defect.as_ref().map(fmt_ratio).unwrap_or_else(|| "NA".into());
        let (dn, member) = match &row.dn {
            Some(v) => (format_float(if exact { v.value } else { v.float }), v.below(eps).to_string()),
            None => ("NA".into(), "false".into()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{defect},{dn},{},{member}",
            row.trial,
            row.system,
            row.steps,
            fmt_ratio(&eps)
        );
    }
    out
}

fn evaluate_rows(trial: i64, system: &'static str, sys: Option<&SkewSystem>, steps: &[usize]) -> Result<Vec<SampleRow>> {
    let Some(sys) = sys else {
        return Ok(steps
            .iter()
            .map(|&s| SampleRow { trial, system, steps: s, defect: None, dn: None })
            .collect());
    };
    let eval = DnEvaluator::new(sys);
    let defect = ergodicity_defect(eval.product())?;
    let set = canonical_test_set(sys.base_space(), sys.fiber_space());
    let max = steps.iter().copied().max().unwrap_or(1);
    let series = eval.series(&set, &set, max)?;
    Ok(steps
        .iter()
        .map(|&s| SampleRow {
            trial,
            system,
            steps: s,
            defect: Some(defect),
            dn: Some(series[s - 1]),
        })
        .collect())
}

/// Seeded genericity experiment: baselines first, then one random
/// piecewise system per trial with seed `derive_seed(seed, trial)`.
pub fn genericity_sample(base: &Automorphism, trials: usize, fiber: usize, seed: u64, steps: &[usize]) -> Result<Vec<SampleRow>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if fiber < 2 {
        return Err(Error::InvalidParameter(format!("sampling needs M >= 2 (got M={fiber})")));
    }
    if steps.is_empty() || steps.contains(&0) {
        return Err(Error::InvalidParameter("step counts must be at least 1".into()));
    }
    let base_space = base.space();
    let fiber_space = CellSpace::new(fiber)?;
    let trivial = make_skew(base.clone(), Cocycle::identity(base_space, fiber_space))?;
    let compact = make_skew(base.clone(), Cocycle::constant(base_space, Automorphism::rotation(fiber_space)))?;
    let product_wm = doubling(fiber_space)
        .ok()
        .map(|w0| make_skew(base.clone(), Cocycle::constant(base_space, w0)))
        .transpose()?;

    let mut rows = evaluate_rows(-1, "trivial", Some(&trivial), steps)?;
    rows.extend(evaluate_rows(-2, "compact", Some(&compact), steps)?);
    rows.extend(evaluate_rows(-3, "product_wm", product_wm.as_ref(), steps)?);
    let sampled = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let sys = random_piecewise(base, fiber, rng::derive_seed(seed, trial as u64))?;
            evaluate_rows(trial as i64, "random_piecewise", Some(&sys), steps)
        })
        .collect::<Result<Vec<_>>>()?;
    rows.extend(sampled.into_iter().flatten());
    Ok(rows)
}
