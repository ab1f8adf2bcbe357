//! f-divergences between finite distributions, their convex conjugates, and
//! the score activations used by variational estimation.
//!
//! For a convex generator `f` with `f(1) = 0`, the divergence between
//! distributions `p` and `q` is `D_f(p, q) = sum_x q(x) f(p(x)/q(x))`.
//! Four instances are implemented:
//!
//! * forward KL:  `f(u) = u ln u`
//! * reverse KL:  `f(u) = -ln u`
//! * Jensen-Shannon: `f(u) = u ln u - (u+1) ln((1+u)/2)`
//! * total variation: `f(u) = |u - 1| / 2`
//!
//! Each comes with its conjugate `f*`, the derivative `f'`, and an
//! activation `g` mapping an unconstrained score `v` into `dom f*`. The
//! compositions `f*(g(v))` and their derivatives are provided in closed
//! form so estimation code never evaluates `f*` near its domain boundary.
//!
//! Zero-mass cells follow the limit conventions of `q f(p/q)`; mismatched
//! supports yield `+inf` (an ordinary `f64` infinity, never NaN).

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{FilabError, Result};
use crate::mdp::{enumerate_trajectories, occupancy, FiniteMdp, TabularPolicy, Trajectory};

/// Score magnitude standing in for `atanh(1)` when the optimal total
/// variation discriminator saturates; `tanh(20)` rounds to `1.0` in `f64`.
pub const V_CLAMP: f64 = 20.0;

/// Sum tolerance accepted by [`exact_f_divergence`] when validating that its
/// inputs are probability vectors.
pub const DIST_SUM_TOL: f64 = 1e-9;

/// The four f-divergences this crate works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Divergence {
    /// Forward Kullback-Leibler, `sum p ln(p/q)`.
    Kl,
    /// Reverse Kullback-Leibler, `sum q ln(q/p)`.
    Rkl,
    /// Jensen-Shannon, `KL(p, m) + KL(q, m)` with `m = (p+q)/2`.
    Js,
    /// Total variation, `sum |p - q| / 2`.
    Tv,
}

impl Divergence {
    /// All four instances, in canonical order.
    pub const ALL: [Divergence; 4] = [
        Divergence::Kl,
        Divergence::Rkl,
        Divergence::Js,
        Divergence::Tv,
    ];

    /// Short lowercase name used by the CLI and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Divergence::Kl => "kl",
            Divergence::Rkl => "rkl",
            Divergence::Js => "js",
            Divergence::Tv => "tv",
        }
    }

    /// Generator `f(u)` for `u >= 0`, with the `u = 0` limit values
    /// (`0`, `+inf`, `ln 2`, `1/2` respectively).
    pub fn generator(self, u: f64) -> f64 {
        debug_assert!(u >= 0.0);
        match self {
            Divergence::Kl => {
                if u == 0.0 {
                    0.0
                } else {
                    u * u.ln()
                }
            }
            Divergence::Rkl => {
                if u == 0.0 {
                    f64::INFINITY
                } else {
                    -u.ln()
                }
            }
            Divergence::Js => {
                if u == 0.0 {
                    LN_2
                } else {
                    u * u.ln() - (u + 1.0) * ((1.0 + u) / 2.0).ln()
                }
            }
            Divergence::Tv => 0.5 * (u - 1.0).abs(),
        }
    }

    /// Convex conjugate `f*(t) = sup_u { u t - f(u) }`, defined on:
    ///
    /// * KL: all of `R`, value `exp(t - 1)`
    /// * reverse KL: `t < 0`, value `-1 - ln(-t)`
    /// * Jensen-Shannon: `t < ln 2`, value `-ln(2 - exp(t))`
    /// * total variation: `|t| <= 1/2`, value `t`
    ///
    /// Arguments outside the domain produce a domain error.
    pub fn conjugate(self, t: f64) -> Result<f64> {
        match self {
            Divergence::Kl => Ok((t - 1.0).exp()),
            Divergence::Rkl => {
                if t < 0.0 {
                    Ok(-1.0 - (-t).ln())
                } else {
                    Err(FilabError::Domain(format!(
                        "reverse KL conjugate needs t < 0, got {t}"
                    )))
                }
            }
            Divergence::Js => {
                if t < LN_2 {
                    Ok(-(2.0 - t.exp()).ln())
                } else {
                    Err(FilabError::Domain(format!(
                        "Jensen-Shannon conjugate needs t < ln 2, got {t}"
                    )))
                }
            }
            Divergence::Tv => {
                if t.abs() <= 0.5 {
                    Ok(t)
                } else {
                    Err(FilabError::Domain(format!(
                        "total variation conjugate needs |t| <= 1/2, got {t}"
                    )))
                }
            }
        }
    }

    /// Derivative `f'(u)` for `u > 0`. Total variation uses the
    /// subgradient convention `f'(1) = 0`.
    pub fn derivative(self, u: f64) -> f64 {
        debug_assert!(u > 0.0 || matches!(self, Divergence::Tv));
        match self {
            Divergence::Kl => 1.0 + u.ln(),
            Divergence::Rkl => -1.0 / u,
            Divergence::Js => (2.0 * u / (1.0 + u)).ln(),
            Divergence::Tv => {
                if u > 1.0 {
                    0.5
                } else if u < 1.0 {
                    -0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Activation `g(v)` squashing an unconstrained score into `dom f*`:
    /// identity for KL, `-exp(-v)` for reverse KL, `ln 2 - ln(1 + exp(-v))`
    /// for Jensen-Shannon, and `tanh(v)/2` for total variation.
    pub fn activation(self, v: f64) -> f64 {
        match self {
            Divergence::Kl => v,
            Divergence::Rkl => -(-v).exp(),
            Divergence::Js => LN_2 - softplus(-v),
            Divergence::Tv => 0.5 * v.tanh(),
        }
    }

    /// `g'(v)`, the activation's derivative.
    pub fn activation_derivative(self, v: f64) -> f64 {
        match self {
            Divergence::Kl => 1.0,
            Divergence::Rkl => (-v).exp(),
            Divergence::Js => sigmoid(-v),
            Divergence::Tv => {
                let t = v.tanh();
                0.5 * (1.0 - t * t)
            }
        }
    }

    /// The composition `f*(g(v))` in closed form, stable for any finite `v`:
    /// `exp(v-1)` for KL, `v - 1` for reverse KL, `softplus(v) - ln 2` for
    /// Jensen-Shannon, `tanh(v)/2` for total variation.
    pub fn conjugate_of_activation(self, v: f64) -> f64 {
        match self {
            Divergence::Kl => (v - 1.0).exp(),
            Divergence::Rkl => v - 1.0,
            Divergence::Js => softplus(v) - LN_2,
            Divergence::Tv => 0.5 * v.tanh(),
        }
    }

    /// `d/dv f*(g(v))`: `exp(v-1)`, `1`, `sigmoid(v)`, and `(1-tanh^2 v)/2`
    /// respectively.
    pub fn conjugate_of_activation_derivative(self, v: f64) -> f64 {
        match self {
            Divergence::Kl => (v - 1.0).exp(),
            Divergence::Rkl => 1.0,
            Divergence::Js => sigmoid(v),
            Divergence::Tv => {
                let t = v.tanh();
                0.5 * (1.0 - t * t)
            }
        }
    }

    /// Score for which the variational lower bound is tight at density
    /// ratio `ratio = p(x)/q(x) > 0`, i.e. `g^{-1}(f'(ratio))`.
    ///
    /// For KL this is `1 + ln r`; for reverse KL and Jensen-Shannon it is
    /// `ln r`; for total variation the exact saturating score is infinite,
    /// so the result is clamped to `sign(r - 1) *` [`V_CLAMP`] (zero on a
    /// tie), which is saturated to working precision.
    pub fn optimal_score(self, ratio: f64) -> f64 {
        debug_assert!(ratio > 0.0);
        match self {
            Divergence::Kl => 1.0 + ratio.ln(),
            Divergence::Rkl | Divergence::Js => ratio.ln(),
            Divergence::Tv => {
                if ratio > 1.0 {
                    V_CLAMP
                } else if ratio < 1.0 {
                    -V_CLAMP
                } else {
                    0.0
                }
            }
        }
    }

    /// One cell `q f(p/q)` of the divergence sum, with the zero-mass
    /// conventions built in: `(0, 0)` contributes nothing; a cell where
    /// only the other side has mass contributes `+inf` for KL (`q = 0`)
    /// and reverse KL (`p = 0`), `mass * ln 2` for Jensen-Shannon, and
    /// `mass / 2` for total variation.
    pub fn cell(self, p: f64, q: f64) -> f64 {
        debug_assert!(p >= 0.0 && q >= 0.0);
        match self {
            Divergence::Kl => {
                if p == 0.0 {
                    0.0
                } else if q == 0.0 {
                    f64::INFINITY
                } else {
                    p * (p / q).ln()
                }
            }
            Divergence::Rkl => {
                if q == 0.0 {
                    0.0
                } else if p == 0.0 {
                    f64::INFINITY
                } else {
                    q * (q / p).ln()
                }
            }
            Divergence::Js => {
                let m = 0.5 * (p + q);
                let mut v = 0.0;
                if p > 0.0 {
                    v += p * (p / m).ln();
                }
                if q > 0.0 {
                    v += q * (q / m).ln();
                }
                v
            }
            Divergence::Tv => 0.5 * (p - q).abs(),
        }
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Divergence {
    type Err = FilabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kl" => Ok(Divergence::Kl),
            "rkl" => Ok(Divergence::Rkl),
            "js" => Ok(Divergence::Js),
            "tv" => Ok(Divergence::Tv),
            other => Err(FilabError::Input(format!(
                "unknown divergence {other:?}, expected one of kl, rkl, js, tv"
            ))),
        }
    }
}

/// `ln(1 + exp(x))` without overflow for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic function, evaluated from the side that avoids overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn validate_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(FilabError::Input(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(FilabError::Input("distributions must be nonempty".into()));
    }
    for (label, v) in [("first", p), ("second", q)] {
        let mut sum = 0.0;
        for &x in v {
            if !x.is_finite() || x < 0.0 {
                return Err(FilabError::Input(format!(
                    "{label} distribution has entry {x}, need finite nonnegative"
                )));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > DIST_SUM_TOL {
            return Err(FilabError::Input(format!(
                "{label} distribution sums to {sum}, expected 1 within {DIST_SUM_TOL:e}"
            )));
        }
    }
    Ok(())
}

/// Exact `D_f(p, q)` over a shared finite support. Mismatched supports give
/// `+inf` where the divergence calls for it; the result is never NaN.
pub fn exact_f_divergence(div: Divergence, p: &[f64], q: &[f64]) -> Result<f64> {
    validate_pair(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        total += div.cell(pi, qi);
        if total.is_infinite() {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total)
}

/// `D_f` between the trajectory distributions induced by two policies in
/// the same MDP, computed by exhaustive enumeration over the union of their
/// supports. The first policy plays the role of `p`.
pub fn traj_divergence(
    div: Divergence,
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    learner: &TabularPolicy,
) -> Result<f64> {
    // Accumulate in first-seen order; hash-order summation would perturb
    // the low bits from run to run and break byte-identical output.
    let mut index: HashMap<Trajectory, usize> = HashMap::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (traj, prob) in enumerate_trajectories(mdp, expert)? {
        let next = pairs.len();
        let i = *index.entry(traj).or_insert(next);
        if i == next {
            pairs.push((0.0, 0.0));
        }
        pairs[i].0 = prob;
    }
    for (traj, prob) in enumerate_trajectories(mdp, learner)? {
        let next = pairs.len();
        let i = *index.entry(traj).or_insert(next);
        if i == next {
            pairs.push((0.0, 0.0));
        }
        pairs[i].1 = prob;
    }
    let mut total = 0.0;
    for &(p, q) in &pairs {
        total += div.cell(p, q);
        if total.is_infinite() {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total)
}

/// `D_f` between the average state-action occupancies of two policies. The
/// expert's occupancy plays the role of `p`.
pub fn state_action_divergence(
    div: Divergence,
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    learner: &TabularPolicy,
) -> Result<f64> {
    let occ_e = occupancy(mdp, expert);
    let occ_l = occupancy(mdp, learner);
    exact_f_divergence(div, &occ_e.state_action, &occ_l.state_action)
}

/// Expected per-state action divergence under the learner's average state
/// occupancy: `sum_s rho_learner(s) D_f(expert(.|s), learner(.|s))`.
/// States the learner never visits are skipped.
///
/// For reverse KL this matches the trajectory divergence divided by the
/// horizon exactly, because initial and transition factors cancel inside
/// the log ratio.
pub fn expected_action_divergence(
    div: Divergence,
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    learner: &TabularPolicy,
) -> Result<f64> {
    let occ_l = occupancy(mdp, learner);
    let mut total = 0.0;
    for s in 0..mdp.n_states() {
        let w = occ_l.avg[s];
        if w == 0.0 {
            continue;
        }
        total += w * exact_f_divergence(div, expert.row(s), learner.row(s))?;
        if total.is_infinite() {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total)
}

/// Information lost by summarizing trajectories as average state-action
/// occupancies: `D_f(trajectory) - D_f(state-action)`, which is always
/// nonnegative. If the trajectory divergence is infinite the gap is
/// reported as `+inf` regardless of the occupancy term.
pub fn divergence_gap(
    div: Divergence,
    mdp: &FiniteMdp,
    expert: &TabularPolicy,
    learner: &TabularPolicy,
) -> Result<f64> {
    let traj = traj_divergence(div, mdp, expert, learner)?;
    if traj.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let flat = state_action_divergence(div, mdp, expert, learner)?;
    Ok(traj - flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const P: [f64; 2] = [0.5, 0.5];
    const Q: [f64; 2] = [0.25, 0.75];

    #[test]
    fn generator_reference_points() {
        assert_eq!(Divergence::Kl.generator(1.0), 0.0);
        assert_abs_diff_eq!(Divergence::Kl.generator(2.0), 2.0 * LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(Divergence::Rkl.generator(2.0), -LN_2, epsilon = 1e-15);
        assert_eq!(Divergence::Rkl.generator(0.0), f64::INFINITY);
        assert_eq!(Divergence::Js.generator(1.0), 0.0);
        assert_abs_diff_eq!(Divergence::Js.generator(0.0), LN_2, epsilon = 1e-15);
        assert_eq!(Divergence::Tv.generator(3.0), 1.0);
        assert_eq!(Divergence::Tv.generator(0.0), 0.5);
    }

    #[test]
    fn conjugate_values_and_domains() {
        assert_eq!(Divergence::Kl.conjugate(1.0).unwrap(), 1.0);
        assert_eq!(Divergence::Rkl.conjugate(-1.0).unwrap(), -1.0);
        assert_abs_diff_eq!(Divergence::Js.conjugate(0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(Divergence::Tv.conjugate(0.3).unwrap(), 0.3);
        assert!(matches!(
            Divergence::Rkl.conjugate(0.0),
            Err(FilabError::Domain(_))
        ));
        assert!(matches!(
            Divergence::Js.conjugate(LN_2),
            Err(FilabError::Domain(_))
        ));
        assert!(matches!(
            Divergence::Tv.conjugate(0.6),
            Err(FilabError::Domain(_))
        ));
    }

    #[test]
    fn fenchel_young_equality_at_derivative() {
        // f(u) + f*(f'(u)) = u f'(u), and strict inequality off the contact
        // point, for every divergence at u = 0.7.
        let u = 0.7;
        for div in Divergence::ALL {
            let t = div.derivative(u);
            let lhs = div.generator(u) + div.conjugate(t).unwrap();
            assert_abs_diff_eq!(lhs, u * t, epsilon = 1e-12);
            let t_off = t - 0.1;
            if let Ok(c) = div.conjugate(t_off) {
                assert!(div.generator(u) + c > u * t_off - 1e-12);
            }
        }
    }

    #[test]
    fn activation_lands_in_conjugate_domain() {
        for div in Divergence::ALL {
            for v in [-5.0, -0.3, 0.0, 0.7, 5.0] {
                let g = div.activation(v);
                let direct = div.conjugate(g).unwrap();
                assert_abs_diff_eq!(direct, div.conjugate_of_activation(v), epsilon = 1e-9);
            }
            // Extreme scores push g against the domain boundary, where the
            // direct route loses precision or leaves the domain outright.
            // The closed-form composition must stay finite and close.
            for v in [-30.0, 30.0] {
                let composed = div.conjugate_of_activation(v);
                assert!(composed.is_finite());
                if let Ok(d) = div.conjugate(div.activation(v)) {
                    assert!((d - composed).abs() < 1e-3 * (1.0 + composed.abs()));
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for div in Divergence::ALL {
            for v in [-2.0, -0.4, 0.0, 0.9, 3.0] {
                let num = (div.activation(v + h) - div.activation(v - h)) / (2.0 * h);
                assert_relative_eq!(num, div.activation_derivative(v), max_relative = 1e-5);
                let num = (div.conjugate_of_activation(v + h)
                    - div.conjugate_of_activation(v - h))
                    / (2.0 * h);
                assert_relative_eq!(
                    num,
                    div.conjugate_of_activation_derivative(v),
                    max_relative = 1e-5,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn optimal_scores_for_reference_pair() {
        // ratio p/q per cell: 2 and 2/3.
        assert_abs_diff_eq!(Divergence::Rkl.optimal_score(2.0), LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(
            Divergence::Rkl.optimal_score(2.0 / 3.0),
            (2.0_f64 / 3.0).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            Divergence::Kl.optimal_score(2.0),
            1.0 + LN_2,
            epsilon = 1e-15
        );
        assert_eq!(Divergence::Tv.optimal_score(2.0), V_CLAMP);
        assert_eq!(Divergence::Tv.optimal_score(0.5), -V_CLAMP);
        assert_eq!(Divergence::Tv.optimal_score(1.0), 0.0);
        // The activation maps the optimal score back onto f'(ratio).
        for div in Divergence::ALL {
            for r in [0.5, 1.0, 2.0] {
                assert_abs_diff_eq!(
                    div.activation(div.optimal_score(r)),
                    div.derivative(r),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn exact_divergence_reference_values() {
        // Hand-computed for p = (1/2, 1/2), q = (1/4, 3/4).
        assert_abs_diff_eq!(
            exact_f_divergence(Divergence::Kl, &P, &Q).unwrap(),
            0.1438410362258904,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            exact_f_divergence(Divergence::Rkl, &P, &Q).unwrap(),
            0.1308120359411371,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            exact_f_divergence(Divergence::Js, &P, &Q).unwrap(),
            0.0676441511372104,
            epsilon = 1e-12
        );
        assert_eq!(exact_f_divergence(Divergence::Tv, &P, &Q).unwrap(), 0.25);
    }

    #[test]
    fn zero_mass_conventions() {
        let p = [1.0, 0.0];
        let q = [0.0, 1.0];
        assert_eq!(
            exact_f_divergence(Divergence::Kl, &p, &q).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            exact_f_divergence(Divergence::Rkl, &p, &q).unwrap(),
            f64::INFINITY
        );
        assert_abs_diff_eq!(
            exact_f_divergence(Divergence::Js, &p, &q).unwrap(),
            2.0 * LN_2,
            epsilon = 1e-15
        );
        assert_eq!(exact_f_divergence(Divergence::Tv, &p, &q).unwrap(), 1.0);
        // Identical distributions with a shared dead cell.
        let r = [0.5, 0.0, 0.5];
        for div in Divergence::ALL {
            assert_eq!(exact_f_divergence(div, &r, &r).unwrap(), 0.0);
        }
    }

    #[test]
    fn validation_rejects_malformed_pairs() {
        assert!(matches!(
            exact_f_divergence(Divergence::Kl, &[0.5, 0.5], &[1.0]),
            Err(FilabError::Input(_))
        ));
        assert!(matches!(
            exact_f_divergence(Divergence::Kl, &[0.6, 0.6], &[0.5, 0.5]),
            Err(FilabError::Input(_))
        ));
        assert!(matches!(
            exact_f_divergence(Divergence::Kl, &[-0.1, 1.1], &[0.5, 0.5]),
            Err(FilabError::Input(_))
        ));
    }

    fn flip_mdp(horizon: usize) -> FiniteMdp {
        #[rustfmt::skip]
        let transition = vec![
            1.0, 0.0,   0.0, 1.0,
            0.0, 1.0,   1.0, 0.0,
        ];
        FiniteMdp::new(2, 2, horizon, vec![1.0, 0.0], transition).unwrap()
    }

    #[test]
    fn one_step_trajectory_divergence_reduces_to_action_rows() {
        // Single start state, deterministic shared transitions, one step:
        // the trajectory divergence equals the action-row divergence.
        let mdp = flip_mdp(1);
        let e = TabularPolicy::new(2, 2, vec![0.5, 0.5, 1.0, 0.0]).unwrap();
        let l = TabularPolicy::new(2, 2, vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        for div in Divergence::ALL {
            let t = traj_divergence(div, &mdp, &e, &l).unwrap();
            let rows = exact_f_divergence(div, e.row(0), l.row(0)).unwrap();
            assert_abs_diff_eq!(t, rows, epsilon = 1e-12);
        }
    }

    #[test]
    fn reverse_kl_factorizes_over_steps() {
        let mdp = flip_mdp(3);
        let e = TabularPolicy::new(2, 2, vec![0.5, 0.5, 0.7, 0.3]).unwrap();
        let l = TabularPolicy::new(2, 2, vec![0.25, 0.75, 0.4, 0.6]).unwrap();
        let traj = traj_divergence(Divergence::Rkl, &mdp, &e, &l).unwrap();
        let per_action = expected_action_divergence(Divergence::Rkl, &mdp, &e, &l).unwrap();
        assert_abs_diff_eq!(traj, 3.0 * per_action, epsilon = 1e-12);
    }

    #[test]
    fn gap_is_nonnegative_and_infinite_when_trajectories_disagree_in_support() {
        let mdp = flip_mdp(3);
        let e = TabularPolicy::new(2, 2, vec![0.5, 0.5, 0.7, 0.3]).unwrap();
        let l = TabularPolicy::new(2, 2, vec![0.25, 0.75, 0.4, 0.6]).unwrap();
        for div in Divergence::ALL {
            let gap = divergence_gap(div, &mdp, &e, &l).unwrap();
            assert!(gap >= -1e-12, "{div}: gap = {gap}");
        }
        let det = TabularPolicy::new(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let gap = divergence_gap(Divergence::Kl, &mdp, &e, &det).unwrap();
        assert_eq!(gap, f64::INFINITY);
    }

    #[test]
    fn parses_names_case_insensitively() {
        assert_eq!("KL".parse::<Divergence>().unwrap(), Divergence::Kl);
        assert_eq!(" js ".parse::<Divergence>().unwrap(), Divergence::Js);
        assert!("hellinger".parse::<Divergence>().is_err());
    }
}
