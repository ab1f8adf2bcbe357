//! Exact global optimization over finite policy classes: evaluate every
//! class member's state-action divergence against the expert by forward
//! occupancy recursion, then rank and take argmins per divergence.
//!
//! The bandit class is `{A, B, M}`; the gridworld class is all `4^9`
//! deterministic maps from cells to actions. A vertical mirror symmetry of
//! the layout lets the gridworld enumeration compute one member of each
//! mirror pair and copy the values across.

use rayon::prelude::*;

use crate::divergence::{exact_f_divergence, Divergence};
use crate::envs::{make_bandit, make_gridworld, GridWorldSpec, BANDIT_POLICY_LABELS};
use crate::error::{FilabError, Result};
use crate::mdp::occupancy;

/// Hard cap on enumerable class sizes; the 3x3 gridworld's `4^9` fits.
const MAX_CLASS_SIZE: usize = 1 << 19;

/// Exact divergence values for an entire policy class.
#[derive(Debug, Clone)]
pub struct EnumerationResult {
    pub divergences: Vec<Divergence>,
    /// `values[d][id]`: exact state-action divergence of policy `id` under
    /// `divergences[d]`. `+inf` marks support violations.
    pub values: Vec<Vec<f64>>,
    /// Minimizing policy id per divergence; value ties break to the lowest
    /// id, so equal-valued policies are all visible in the ranking.
    pub argmin: Vec<usize>,
    /// `rankings[d]`: all policy ids sorted by (value, id), infinities last.
    pub rankings: Vec<Vec<usize>>,
}

impl EnumerationResult {
    fn from_values(divergences: Vec<Divergence>, values: Vec<Vec<f64>>) -> Self {
        let mut argmin = Vec::with_capacity(divergences.len());
        let mut rankings = Vec::with_capacity(divergences.len());
        for vals in &values {
            let mut ids: Vec<usize> = (0..vals.len()).collect();
            ids.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
            argmin.push(ids[0]);
            rankings.push(ids);
        }
        Self {
            divergences,
            values,
            argmin,
            rankings,
        }
    }

    /// The exact value of policy `id` under the result's `d`-th divergence.
    pub fn value(&self, d: usize, id: usize) -> f64 {
        self.values[d][id]
    }
}

/// Evaluates the three bandit candidates `A`, `B`, `M` (ids 0, 1, 2)
/// against the half-and-half expert. At horizon one the state-action
/// divergence coincides with the trajectory divergence.
pub fn enumerate_bandit(epsilon0: f64, divergences: &[Divergence]) -> Result<EnumerationResult> {
    let (env, candidates) = make_bandit(epsilon0)?;
    let expert_sa = occupancy(&env.mdp, &env.expert.policy).state_action;
    let mut values = vec![Vec::with_capacity(candidates.len()); divergences.len()];
    for candidate in &candidates {
        let sa = occupancy(&env.mdp, candidate).state_action;
        for (d, &div) in divergences.iter().enumerate() {
            values[d].push(exact_f_divergence(div, &expert_sa, &sa)?);
        }
    }
    Ok(EnumerationResult::from_values(divergences.to_vec(), values))
}

/// Evaluates every deterministic gridworld policy. With `symmetry_prune`,
/// only the lexicographically first member of each mirror pair is computed
/// and its values are copied to the partner, which halves the work without
/// changing any value beyond float summation order.
pub fn enumerate_gridworld(
    spec: &GridWorldSpec,
    divergences: &[Divergence],
    symmetry_prune: bool,
) -> Result<EnumerationResult> {
    let (env, class) = make_gridworld(spec.epsilon1, spec.epsilon2, spec.horizon)?;
    if class.size() > MAX_CLASS_SIZE {
        return Err(FilabError::Resource(format!(
            "policy class of size {} exceeds the enumeration budget {}",
            class.size(),
            MAX_CLASS_SIZE
        )));
    }
    let expert_sa = occupancy(&env.mdp, &env.expert.policy).state_action;
    let evaluate = |id: usize| -> Result<Vec<f64>> {
        let sa = occupancy(&env.mdp, &class.policy(id)).state_action;
        divergences
            .iter()
            .map(|&div| exact_f_divergence(div, &expert_sa, &sa))
            .collect()
    };

    let per_policy: Vec<Vec<f64>> = if symmetry_prune {
        let computed: Vec<Option<Vec<f64>>> = (0..class.size())
            .into_par_iter()
            .map(|id| {
                if class.mirror_id(id, spec) < id {
                    Ok(None)
                } else {
                    evaluate(id).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let mut filled: Vec<Vec<f64>> = Vec::with_capacity(class.size());
        for (id, entry) in computed.into_iter().enumerate() {
            match entry {
                Some(vals) => filled.push(vals),
                // The mirror has a smaller id, so its slot is already set.
                None => filled.push(filled[class.mirror_id(id, spec)].clone()),
            }
        }
        filled
    } else {
        (0..class.size())
            .into_par_iter()
            .map(evaluate)
            .collect::<Result<_>>()?
    };

    let mut values = vec![vec![0.0; class.size()]; divergences.len()];
    for (id, vals) in per_policy.iter().enumerate() {
        for (d, &v) in vals.iter().enumerate() {
            values[d][id] = v;
        }
    }
    Ok(EnumerationResult::from_values(divergences.to_vec(), values))
}

/// One sweep point: the three candidate values under one divergence at one
/// control-noise setting, and which candidate wins.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon0: f64,
    pub divergence: Divergence,
    pub value_a: f64,
    pub value_b: f64,
    pub value_m: f64,
    pub argmin_label: &'static str,
}

/// Evaluates the bandit candidates across a grid of control-noise values.
pub fn divergence_vs_noise_sweep(
    epsilon0_grid: &[f64],
    divergences: &[Divergence],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(epsilon0_grid.len() * divergences.len());
    for &epsilon0 in epsilon0_grid {
        let result = enumerate_bandit(epsilon0, divergences)?;
        for (d, &div) in divergences.iter().enumerate() {
            rows.push(SweepRow {
                epsilon0,
                divergence: div,
                value_a: result.values[d][0],
                value_b: result.values[d][1],
                value_m: result.values[d][2],
                argmin_label: BANDIT_POLICY_LABELS[result.argmin[d]],
            });
        }
    }
    Ok(rows)
}

/// Scans `epsilon0 = step, 2*step, ...` below one half and returns the
/// first grid point where the mixture policy `M` is the unique-by-rank
/// argmin, or `None` if it never wins on the grid. Exact ties go to `A` by
/// id order, so the returned point lies strictly past any tie.
pub fn first_mixture_optimal_noise(div: Divergence, step: f64) -> Result<Option<f64>> {
    if !(step > 0.0) || step >= 0.5 {
        return Err(FilabError::Input(format!(
            "scan step must lie in (0, 0.5), got {step}"
        )));
    }
    let mut k = 1usize;
    loop {
        let epsilon0 = k as f64 * step;
        if epsilon0 >= 0.5 - 1e-12 {
            let result = enumerate_bandit(0.5, &[div])?;
            return Ok((result.argmin[0] == 2).then_some(0.5));
        }
        let result = enumerate_bandit(epsilon0, &[div])?;
        if result.argmin[0] == 2 {
            return Ok(Some(epsilon0));
        }
        k += 1;
    }
}
