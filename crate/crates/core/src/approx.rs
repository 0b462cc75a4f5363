//! Piecewise-constant skew products and first-fit approximation by them.

use crate::error::{Error, Result};
use crate::skew::{make_skew, Cocycle, SkewSystem};
use crate::space::{hamming_distance, Automorphism, Partition, Rational};

/// A partition of the base together with one fiber map per label.
/// Label 0 always carries the identity, possibly on an empty cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseSpec {
    partition: Partition,
    reps: Vec<Automorphism>,
}

impl PiecewiseSpec {
    pub fn new(partition: Partition, reps: Vec<Automorphism>) -> Result<Self> {
        if reps.len() != partition.label_count() {
            return Err(Error::Dimension {
                what: "piecewise representatives",
                left: partition.label_count(),
                right: reps.len(),
            });
        }
        let fiber = reps[0].space();
        for rep in &reps {
            fiber.check_same(&rep.space(), "piecewise representative")?;
        }
        if !reps[0].is_identity() {
            return Err(Error::InvalidParameter("representative of label 0 must be the identity".into()));
        }
        Ok(PiecewiseSpec { partition, reps })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn reps(&self) -> &[Automorphism] {
        &self.reps
    }

    pub fn rep_of_cell(&self, z: usize) -> &Automorphism {
        &self.reps[self.partition.label(z)]
    }

    /// `label <j> cells <indices> rep <permutation>`, one line per label.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (j, rep) in self.reps.iter().enumerate() {
            let cells: Vec<String> = self.partition.cells(j).indices().map(|i| i.to_string()).collect();
            out.push_str(&format!("label {j} cells {} rep {rep}\n", cells.join(" ")));
        }
        out
    }
}

/// The system whose cocycle is `reps[label(z)]` at every base cell.
pub fn make_piecewise(base_map: &Automorphism, spec: &PiecewiseSpec) -> Result<SkewSystem> {
    base_map.space().check_same(&spec.partition.space(), "piecewise partition")?;
    let maps = (0..base_map.resolution())
        .map(|z| spec.rep_of_cell(z).clone())
        .collect();
    make_skew(base_map.clone(), Cocycle::new(spec.reps[0].space(), maps)?)
}

/// Clusters the cocycle values first-fit in ascending base order.
///
/// Each cluster is represented by its first member; a value joins the first
/// cluster whose representative is within Hamming distance `< eps`.
/// A cluster represented by the identity takes label 0; the other clusters
/// are numbered from 1 in opening order. Every `z` ends up with
/// `hamming_distance(τ_z, reps[label(z)]) < eps`.
pub fn piecewise_approximate(t: &SkewSystem, eps: Rational) -> Result<PiecewiseSpec> {
    if eps <= Rational::from_integer(0) {
        return Err(Error::InvalidParameter(format!("approximation radius must be positive, got {eps}")));
    }
    let cocycle = t.cocycle();
    let mut reps: Vec<&Automorphism> = Vec::new();
    let mut cluster_of = Vec::with_capacity(t.base_resolution());
    for map in cocycle.maps() {
        let found = reps
            .iter()
            .position(|rep| hamming_distance(map, rep).expect("same fiber") < eps);
        let cluster = found.unwrap_or_else(|| {
            reps.push(map);
            reps.len() - 1
        });
        cluster_of.push(cluster);
    }

    let identity_cluster = reps.iter().position(|r| r.is_identity());
    let mut label_of_cluster = vec![0; reps.len()];
    let mut next = 1;
    for (c, slot) in label_of_cluster.iter_mut().enumerate() {
        if Some(c) != identity_cluster {
            *slot = next;
            next += 1;
        }
    }
    let mut label_reps = vec![Automorphism::identity(cocycle.fiber()); next];
    for (c, rep) in reps.iter().enumerate() {
        label_reps[label_of_cluster[c]] = (*rep).clone();
    }
    let labels = cluster_of.iter().map(|&c| label_of_cluster[c]).collect();
    PiecewiseSpec::new(Partition::new(t.base_space(), labels, next)?, label_reps)
}
